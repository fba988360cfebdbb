//! `nazone`: compile circuits, check instruction files and run benchmarks.
//!
//! Exit codes: 0 success, 1 input error, 2 capacity or search budget
//! failure, 3 constraint violations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nazone::bench::{BenchSpec, Family};
use nazone::{
    compile, parse_circuit, parse_instructions, to_text, validate, Architecture, CompileOptions, HeuristicParams,
    PlacementConfig, RoutingPolicy, SearchConfig, Strategy,
};
use serde::Serialize;

const INPUT: u8 = 1;
const RESOURCE: u8 = 2;
const VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "nazone", version, about = "Compiler for zoned neutral-atom architectures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a circuit into timed instructions.
    Compile(CompileArgs),
    /// Check an instruction file against the AOD constraints.
    Validate(ValidateArgs),
    /// Compile generated circuits under every strategy and routing mode.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Astar,
    Ids,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoutingArg {
    Strict,
    Relaxed,
    Auto,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Astar => Strategy::Astar,
            StrategyArg::Ids => Strategy::Ids,
        }
    }
}

impl From<RoutingArg> for RoutingPolicy {
    fn from(r: RoutingArg) -> Self {
        match r {
            RoutingArg::Strict => RoutingPolicy::Strict,
            RoutingArg::Relaxed => RoutingPolicy::Relaxed,
            RoutingArg::Auto => RoutingPolicy::Auto,
        }
    }
}

fn policy_name(p: RoutingPolicy) -> &'static str {
    match p {
        RoutingPolicy::Strict => "strict",
        RoutingPolicy::Relaxed => "relaxed",
        RoutingPolicy::Auto => "auto",
    }
}

fn strategy_name(s: Strategy) -> &'static str {
    match s {
        Strategy::Astar => "astar",
        Strategy::Ids => "ids",
    }
}

/// Search and heuristic knobs shared by `compile` and `bench`.
#[derive(Args)]
struct SearchArgs {
    /// Weight of the admissible estimate.
    #[arg(long, default_value_t = HeuristicParams::default().delta)]
    delta: f64,
    /// Depth discount of the estimate.
    #[arg(long, default_value_t = HeuristicParams::default().beta)]
    beta: f64,
    /// Weight of the next-layer look-ahead.
    #[arg(long, default_value_t = HeuristicParams::default().alpha)]
    alpha: f64,
    /// IDS queue capacity.
    #[arg(long, default_value_t = SearchConfig::default().queue_capacity)]
    nmax: usize,
    /// IDS goals to collect.
    #[arg(long, default_value_t = SearchConfig::default().trials)]
    ntrials: usize,
    /// Maximum node expansions per placement.
    #[arg(long, default_value_t = SearchConfig::default().node_budget)]
    node_budget: usize,
    /// Maximum nodes stored by A*.
    #[arg(long, default_value_t = SearchConfig::default().max_nodes)]
    max_nodes: usize,
    /// Candidate traps per free choice.
    #[arg(long, default_value_t = PlacementConfig::default().max_candidates)]
    max_candidates: usize,
}

impl SearchArgs {
    fn options(&self, strategy: Strategy, routing: RoutingPolicy, wall_clock: bool) -> CompileOptions {
        CompileOptions {
            routing,
            placement: PlacementConfig {
                params: HeuristicParams {
                    delta: self.delta,
                    beta: self.beta,
                    alpha: self.alpha,
                },
                max_candidates: self.max_candidates,
            },
            search: SearchConfig {
                strategy,
                queue_capacity: self.nmax,
                trials: self.ntrials,
                node_budget: self.node_budget,
                max_nodes: self.max_nodes,
            },
            wall_clock,
        }
    }
}

#[derive(Args)]
struct CompileArgs {
    /// Circuit file (native format or OpenQASM 2).
    circuit: PathBuf,
    /// Architecture TOML; the built-in default when absent.
    arch: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ids")]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "auto")]
    routing: RoutingArg,
    #[command(flatten)]
    search: SearchArgs,
    /// Instruction file; stdout when absent.
    #[arg(long)]
    emit_out: Option<PathBuf>,
    /// Stats document (TOML).
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Record wall-clock times in the stats.
    #[arg(long)]
    include_wall_clock: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Instruction file.
    instructions: PathBuf,
    /// Architecture TOML; the built-in default when absent.
    arch: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "graphstate-like")]
    family: Family,
    #[arg(long, default_value_t = 100)]
    qubits: usize,
    #[arg(long, default_value_t = 20)]
    parallelism: usize,
    #[arg(long, default_value_t = 5)]
    layers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances; instance `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    instances: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ids,astar")]
    strategies: Vec<StrategyArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "strict,relaxed,auto")]
    routings: Vec<RoutingArg>,
    /// Architecture TOML; the built-in default when absent.
    #[arg(long)]
    arch: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
    /// Machine-readable table (JSON).
    #[arg(long)]
    json_out: Option<PathBuf>,
    #[arg(long)]
    include_wall_clock: bool,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(INPUT, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| fail(INPUT, format!("{}: {e}", path.display())))
}

fn load_arch(path: Option<&Path>) -> Result<Architecture, Failure> {
    match path {
        None => Ok(Architecture::load_default()),
        Some(p) => Architecture::from_toml(&read(p)?).map_err(|e| fail(INPUT, format!("{}: {e}", p.display()))),
    }
}

fn run_compile(args: &CompileArgs) -> Result<(), Failure> {
    let arch = load_arch(args.arch.as_deref())?;
    let text = read(&args.circuit)?;
    let circuit = parse_circuit(&text).map_err(|e| fail(INPUT, format!("{}: {e}", args.circuit.display())))?;
    let options = args
        .search
        .options(args.strategy.into(), args.routing.into(), args.include_wall_clock);
    let out = compile(&circuit, &arch, &options).map_err(|e| {
        let code = if e.is_resource_failure() { RESOURCE } else { INPUT };
        fail(code, e.to_string())
    })?;
    let report = validate(&out.instructions, &arch).map_err(|e| fail(VIOLATION, format!("emitted sequence is malformed: {e}")))?;
    let program = to_text(&out.instructions);
    match &args.emit_out {
        Some(p) => write(p, &program)?,
        None => print!("{program}"),
    }
    if let Some(p) = &args.stats_out {
        write(p, &out.stats.to_toml())?;
    }
    let t = &out.stats.totals;
    eprintln!(
        "{} cz layers, {} steps, rearrangement {:.3} ms, {} nodes expanded",
        t.cz_layers, t.steps, t.rearrangement_time_ms, t.nodes_expanded
    );
    if !report.is_clean() {
        for v in &report.violations {
            eprintln!("instruction {}: {}: {}", v.index, v.constraint, v.detail);
        }
        return Err(fail(VIOLATION, format!("{} constraint violations", report.violations.len())));
    }
    Ok(())
}

fn run_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let arch = load_arch(args.arch.as_deref())?;
    let text = read(&args.instructions)?;
    let seq = parse_instructions(&text).map_err(|e| fail(INPUT, format!("{}: {e}", args.instructions.display())))?;
    let report = validate(&seq, &arch).map_err(|e| fail(INPUT, format!("{}: {e}", args.instructions.display())))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report is plain data"));
    } else {
        for v in &report.violations {
            println!("{}\t{}\t{}", v.index, v.constraint, v.detail);
        }
        eprintln!("{} instructions, {} violations", seq.len(), report.violations.len());
    }
    if report.is_clean() {
        Ok(())
    } else {
        Err(fail(VIOLATION, format!("{} constraint violations", report.violations.len())))
    }
}

#[derive(Serialize)]
struct BenchRow {
    instance: u64,
    seed: u64,
    family: String,
    qubits: usize,
    parallelism: usize,
    layers: usize,
    strategy: &'static str,
    routing: &'static str,
    status: String,
    steps: Option<usize>,
    rearrangement_time_ms: Option<f64>,
    nodes_expanded: Option<usize>,
    peak_queue_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock_s: Option<f64>,
}

fn cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or("-".into(), |v| v.to_string())
}

fn table(rows: &[BenchRow]) -> String {
    let header = ["instance", "seed", "strategy", "routing", "status", "steps", "rearr_ms", "nodes", "peak_queue"];
    let body: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.instance.to_string(),
                r.seed.to_string(),
                r.strategy.to_string(),
                r.routing.to_string(),
                r.status.clone(),
                cell(&r.steps),
                r.rearrangement_time_ms.map_or("-".into(), |t| format!("{t:.3}")),
                cell(&r.nodes_expanded),
                cell(&r.peak_queue_size),
            ]
        })
        .collect();
    let mut width = header.map(str::len);
    for row in &body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", padded.join("  ").trim_end()).expect("writing to a string");
    };
    line(&mut out, &header.map(String::from));
    for row in &body {
        line(&mut out, row);
    }
    out
}

fn run_bench(args: &BenchArgs) -> Result<(), Failure> {
    let arch = load_arch(args.arch.as_deref())?;
    let mut rows = Vec::new();
    for instance in 0..args.instances {
        let spec = BenchSpec {
            family: args.family,
            qubits: args.qubits,
            parallelism: args.parallelism,
            layers: args.layers,
            seed: args.seed + instance,
        };
        let circuit = spec.generate().map_err(|e| fail(INPUT, e.to_string()))?;
        for &s in &args.strategies {
            for &r in &args.routings {
                let options = args.search.options(s.into(), r.into(), args.include_wall_clock);
                let mut row = BenchRow {
                    instance,
                    seed: spec.seed,
                    family: spec.family.to_string(),
                    qubits: spec.qubits,
                    parallelism: spec.parallelism,
                    layers: spec.layers,
                    strategy: strategy_name(options.search.strategy),
                    routing: policy_name(options.routing),
                    status: "ok".into(),
                    steps: None,
                    rearrangement_time_ms: None,
                    nodes_expanded: None,
                    peak_queue_size: None,
                    wall_clock_s: None,
                };
                match compile(&circuit, &arch, &options) {
                    Ok(out) => {
                        let t = out.stats.totals;
                        row.steps = Some(t.steps);
                        row.rearrangement_time_ms = Some(t.rearrangement_time_ms);
                        row.nodes_expanded = Some(t.nodes_expanded);
                        row.peak_queue_size = Some(t.peak_queue_size);
                        row.wall_clock_s = t.wall_clock_s;
                    }
                    Err(e) => {
                        row.status = match e.termination() {
                            Some(t) => format!("{t:?}").to_lowercase(),
                            None if e.is_resource_failure() => "capacity".into(),
                            None => "error".into(),
                        };
                        eprintln!("instance {instance} {} {}: {e}", row.strategy, row.routing);
                    }
                }
                rows.push(row);
            }
        }
    }
    print!("{}", table(&rows));
    if let Some(p) = &args.json_out {
        write(p, &serde_json::to_string_pretty(&rows).expect("rows are plain data"))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compile(a) => run_compile(a),
        Command::Validate(a) => run_validate(a),
        Command::Bench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
