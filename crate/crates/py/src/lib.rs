//! Python bindings: `import nazone`.

use nazone::bench::{BenchSpec, Family};
use nazone::routing::route as route_moves;
use nazone::{
    compile as compile_circuit, parse_circuit, parse_instructions, schedule, to_text, validate as validate_seq,
    Architecture, Circuit, CompileOptions, Gate, HeuristicParams, MotionParams, Move, PlacementConfig, Position,
    RoutingContext, RoutingMode, RoutingPolicy, SearchConfig, Strategy,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Architecture", module = "nazone", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyArchitecture {
    inner: Architecture,
}

#[pymethods]
impl PyArchitecture {
    /// The built-in two-zone architecture.
    #[staticmethod]
    fn default() -> Self {
        Self {
            inner: Architecture::load_default(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Architecture::from_toml(text).map(|inner| Self { inner }).map_err(value_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn pair_capacity(&self) -> usize {
        self.inner.pair_capacity()
    }

    #[getter]
    fn num_traps(&self) -> usize {
        self.inner.num_traps()
    }

    #[getter]
    fn interaction_radius(&self) -> f64 {
        self.inner.interaction_radius
    }

    /// Travel time in microseconds over `distance` micrometers.
    fn move_time(&self, distance: f64) -> PyResult<f64> {
        self.inner.motion.move_time(distance).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Architecture(name={:?}, traps={})", self.inner.name, self.inner.num_traps())
    }
}

#[pyclass(name = "Circuit", module = "nazone", skip_from_py_object)]
#[derive(Clone)]
pub struct PyCircuit {
    inner: Circuit,
}

#[pymethods]
impl PyCircuit {
    #[new]
    fn new(num_qubits: usize) -> Self {
        Self {
            inner: Circuit::new(num_qubits),
        }
    }

    /// Parses the native format or OpenQASM 2.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_circuit(text).map(|inner| Self { inner }).map_err(value_err)
    }

    fn cz(&mut self, a: usize, b: usize) -> PyResult<()> {
        self.inner.cz(a, b).map_err(value_err)
    }

    #[pyo3(signature = (name, qubit, params = Vec::new()))]
    fn gate(&mut self, name: &str, qubit: usize, params: Vec<f64>) -> PyResult<()> {
        self.inner.push(Gate::single(name, params, qubit)).map_err(value_err)
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits
    }

    #[getter]
    fn num_cz(&self) -> usize {
        self.inner.num_cz()
    }

    /// CZ pairs of every scheduled layer.
    fn layers(&self) -> Vec<Vec<(usize, usize)>> {
        schedule(&self.inner)
            .into_iter()
            .filter(|l| !l.cz_pairs.is_empty())
            .map(|l| l.cz_pairs)
            .collect()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

#[pyclass(name = "Compilation", module = "nazone", frozen, get_all)]
pub struct PyCompilation {
    /// Instruction text.
    instructions: String,
    /// Stats document (TOML).
    stats: String,
    cz_layers: usize,
    steps: usize,
    rearrangement_time_ms: f64,
    nodes_expanded: usize,
    peak_queue_size: usize,
}

fn strategy(s: &str) -> PyResult<Strategy> {
    match s {
        "ids" => Ok(Strategy::Ids),
        "astar" => Ok(Strategy::Astar),
        _ => Err(PyValueError::new_err(format!("unknown strategy `{s}`"))),
    }
}

fn policy(s: &str) -> PyResult<RoutingPolicy> {
    match s {
        "strict" => Ok(RoutingPolicy::Strict),
        "relaxed" => Ok(RoutingPolicy::Relaxed),
        "auto" => Ok(RoutingPolicy::Auto),
        _ => Err(PyValueError::new_err(format!("unknown routing mode `{s}`"))),
    }
}

fn arch_or_default(arch: Option<PyRef<'_, PyArchitecture>>) -> Architecture {
    arch.map_or_else(Architecture::load_default, |a| a.inner.clone())
}

/// Compiles a circuit. Capacity and budget failures raise `RuntimeError`,
/// bad options raise `ValueError`.
#[pyfunction]
#[pyo3(signature = (circuit, arch = None, strategy = "ids", routing = "auto", delta = 0.01, beta = 0.0, alpha = 0.4, nmax = 10_000, ntrials = 10, node_budget = 10_000_000, max_nodes = 2_000_000))]
#[allow(clippy::too_many_arguments)]
fn compile(
    circuit: PyRef<'_, PyCircuit>,
    arch: Option<PyRef<'_, PyArchitecture>>,
    strategy: &str,
    routing: &str,
    delta: f64,
    beta: f64,
    alpha: f64,
    nmax: usize,
    ntrials: usize,
    node_budget: usize,
    max_nodes: usize,
) -> PyResult<PyCompilation> {
    let arch = arch_or_default(arch);
    let options = CompileOptions {
        routing: policy(routing)?,
        placement: PlacementConfig {
            params: HeuristicParams { delta, beta, alpha },
            ..Default::default()
        },
        search: SearchConfig {
            strategy: self::strategy(strategy)?,
            queue_capacity: nmax,
            trials: ntrials,
            node_budget,
            max_nodes,
        },
        wall_clock: false,
    };
    let out = compile_circuit(&circuit.inner, &arch, &options).map_err(|e| {
        if e.is_resource_failure() {
            PyRuntimeError::new_err(e.to_string())
        } else {
            value_err(e)
        }
    })?;
    let t = &out.stats.totals;
    Ok(PyCompilation {
        instructions: to_text(&out.instructions),
        stats: out.stats.to_toml(),
        cz_layers: t.cz_layers,
        steps: t.steps,
        rearrangement_time_ms: t.rearrangement_time_ms,
        nodes_expanded: t.nodes_expanded,
        peak_queue_size: t.peak_queue_size,
    })
}

/// Checks instruction text; returns `(index, constraint, detail)` per
/// violation.
#[pyfunction]
#[pyo3(signature = (instructions, arch = None))]
fn validate(instructions: &str, arch: Option<PyRef<'_, PyArchitecture>>) -> PyResult<Vec<(usize, String, String)>> {
    let arch = arch_or_default(arch);
    let seq = parse_instructions(instructions).map_err(value_err)?;
    let report = validate_seq(&seq, &arch).map_err(value_err)?;
    Ok(report
        .violations
        .into_iter()
        .map(|v| (v.index, v.constraint.to_string(), v.detail))
        .collect())
}

/// Groups `(src, dst)` moves into AOD steps; returns the number of steps,
/// the total time in microseconds and the mode of every step.
#[pyfunction]
#[pyo3(signature = (moves, mode = "auto", pickup_offset = 2.0, min_separation = 1.0))]
fn route(
    moves: Vec<((f64, f64), (f64, f64))>,
    mode: &str,
    pickup_offset: f64,
    min_separation: f64,
) -> PyResult<(usize, f64, Vec<String>)> {
    let moves: Vec<Move> = moves
        .into_iter()
        .enumerate()
        .map(|(q, ((sx, sy), (dx, dy)))| Move::new(q, Position::new(sx, sy), Position::new(dx, dy)))
        .collect();
    let ctx = RoutingContext::new(pickup_offset, min_separation);
    let result = route_moves(&moves, policy(mode)?, None, &ctx, &MotionParams::default());
    let modes = result
        .steps
        .iter()
        .map(|s| match s.mode {
            RoutingMode::Strict => "strict".to_string(),
            RoutingMode::Relaxed => "relaxed".to_string(),
        })
        .collect();
    Ok((result.steps.len(), result.total_time, modes))
}

/// Seeded benchmark circuit (`graphstate-like` or `random-pairs`).
#[pyfunction]
#[pyo3(signature = (family, qubits, parallelism, layers, seed = 0))]
fn generate(family: &str, qubits: usize, parallelism: usize, layers: usize, seed: u64) -> PyResult<PyCircuit> {
    let family: Family = family.parse().map_err(value_err)?;
    let spec = BenchSpec {
        family,
        qubits,
        parallelism,
        layers,
        seed,
    };
    spec.generate().map(|inner| PyCircuit { inner }).map_err(value_err)
}

#[pymodule]
#[pyo3(name = "nazone")]
fn nazone_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArchitecture>()?;
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyCompilation>()?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(route, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
