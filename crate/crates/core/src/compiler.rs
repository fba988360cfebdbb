//! The full pipeline from a circuit to timed instructions.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{Architecture, Position, TrapId};
use crate::circuit::{reuse_analysis, schedule, Circuit, Layer};
use crate::codegen::{emit, Instruction, Program, Stage};
use crate::placement::{place, Node, PlacementConfig, PlacementError, PlacementTask, Transition};
use crate::routing::{route, Move, RoutingContext, RoutingMode, RoutingPolicy, RoutingResult};
use crate::search::{SearchConfig, Termination};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompileOptions {
    pub routing: RoutingPolicy,
    pub placement: PlacementConfig,
    pub search: SearchConfig,
    /// Record wall-clock times in the stats. Off by default so that the
    /// stats of identical runs are identical.
    pub wall_clock: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("{qubits} qubits do not fit into {traps} storage traps")]
    StorageCapacity { qubits: usize, traps: usize },
    #[error("transition {transition}: {source}")]
    Placement {
        transition: usize,
        #[source]
        source: PlacementError,
    },
    #[error("invalid options: {0}")]
    Options(String),
}

impl CompileError {
    /// True for failures caused by limits rather than by bad input:
    /// capacity and search budget.
    pub fn is_resource_failure(&self) -> bool {
        match self {
            CompileError::StorageCapacity { .. } => true,
            CompileError::Placement { source, .. } => matches!(
                source,
                PlacementError::Capacity { .. } | PlacementError::StorageFull(_) | PlacementError::NoSolution(_)
            ),
            CompileError::Options(_) => false,
        }
    }

    pub fn termination(&self) -> Option<Termination> {
        match self {
            CompileError::Placement {
                source: PlacementError::NoSolution(t),
                ..
            } => Some(*t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    /// Unload the previous layer and load a CZ layer.
    Layer,
    /// Return every atom to storage after the last layer.
    FinalUnload,
}

/// Statistics of one transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats {
    pub index: usize,
    pub kind: TransitionKind,
    pub cz_pairs: usize,
    pub movers: usize,
    pub steps: usize,
    pub strict_steps: usize,
    pub relaxed_steps: usize,
    pub rearrangement_time_ms: f64,
    pub nodes_expanded: usize,
    pub peak_queue_size: usize,
    pub peak_memory_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

/// Totals over all transitions. Counts and times are sums; the peak values
/// are maxima.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub qubits: usize,
    pub cz_layers: usize,
    pub cz_pairs: usize,
    pub movers: usize,
    pub steps: usize,
    pub strict_steps: usize,
    pub relaxed_steps: usize,
    pub rearrangement_time_ms: f64,
    pub nodes_expanded: usize,
    pub peak_queue_size: usize,
    pub peak_memory_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompileStats {
    pub totals: Totals,
    pub transitions: Vec<TransitionStats>,
}

impl CompileStats {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("stats are plain data")
    }
}

#[derive(Debug, Clone)]
pub struct Compilation {
    pub program: Program,
    pub instructions: Vec<Instruction>,
    pub stats: CompileStats,
    /// Trap of every qubit at the end.
    pub final_sites: Vec<TrapId>,
}

/// Qubit `q` starts at the `q`-th storage trap in row-major order.
pub fn initial_layout(arch: &Architecture, num_qubits: usize) -> Result<Vec<TrapId>, CompileError> {
    let storage = arch.storage_zone();
    let traps = arch.zone(storage).num_traps();
    if num_qubits > traps {
        return Err(CompileError::StorageCapacity {
            qubits: num_qubits,
            traps,
        });
    }
    Ok(arch.zone_traps(storage).take(num_qubits).collect())
}

pub fn compile(circuit: &Circuit, arch: &Architecture, options: &CompileOptions) -> Result<Compilation, CompileError> {
    options.search.validate().map_err(CompileError::Options)?;
    options.placement.params.validate().map_err(CompileError::Options)?;
    let started = Instant::now();
    let layers = schedule(circuit);
    let cz: Vec<&Layer> = layers.iter().filter(|l| !l.cz_pairs.is_empty()).collect();
    let reuse = reuse_analysis(&layers);
    let mut sites = initial_layout(arch, circuit.num_qubits)?;
    let mut program = Program {
        num_qubits: circuit.num_qubits,
        initial: sites.iter().map(|&t| arch.pos(t)).collect(),
        stages: Vec::new(),
    };
    let mut stats = CompileStats::default();
    let none = BTreeSet::new();

    for i in 0..=cz.len() {
        let layer_started = Instant::now();
        let transition = Transition {
            sites: &sites,
            stays: if i == 0 { &none } else { &reuse[i - 1] },
            prev: i.checked_sub(1).map(|j| cz[j]),
            layer: cz.get(i).copied(),
            next: cz.get(i + 1).copied(),
        };
        let fail = |source| CompileError::Placement { transition: i, source };
        let task = PlacementTask::build(arch, &transition, &options.placement).map_err(fail)?;
        let placement = place(arch, &task, &options.placement, &options.search).map_err(fail)?;

        if let Some(layer) = cz.get(i) {
            program.stages.push(Stage::Gates(layer.pre_single_qubit.clone()));
        }
        let mut results = Vec::new();
        for moves in [&placement.unload, &placement.load] {
            if moves.is_empty() {
                continue;
            }
            let result = route_phase(arch, &sites, moves, options.routing);
            for m in moves {
                sites[m.qubit] = arch.trap_at(m.dst).expect("placement targets are traps");
            }
            results.push(result);
        }

        let count = |mode| results.iter().flat_map(|r| &r.steps).filter(|s| s.mode == mode).count();
        stats.transitions.push(TransitionStats {
            index: i,
            kind: if i < cz.len() {
                TransitionKind::Layer
            } else {
                TransitionKind::FinalUnload
            },
            cz_pairs: cz.get(i).map_or(0, |l| l.cz_pairs.len()),
            movers: task.len(),
            steps: results.iter().map(|r| r.steps.len()).sum(),
            strict_steps: count(RoutingMode::Strict),
            relaxed_steps: count(RoutingMode::Relaxed),
            rearrangement_time_ms: results.iter().map(|r| r.total_time).sum::<f64>() / 1000.0,
            nodes_expanded: placement.nodes_expanded,
            peak_queue_size: placement.peak_queue_size,
            peak_memory_bytes: placement.peak_queue_size * Node::size_estimate(),
            wall_clock_s: options.wall_clock.then(|| layer_started.elapsed().as_secs_f64()),
        });
        program.stages.extend(results.into_iter().map(Stage::Route));
        if i < cz.len() {
            program.stages.push(Stage::Rydberg);
        }
    }
    if let Some(epilogue) = layers.last().filter(|l| l.cz_pairs.is_empty()) {
        program.stages.push(Stage::Gates(epilogue.pre_single_qubit.clone()));
    }
    if cz.is_empty() {
        // Nothing moved; keep only the single-qubit gates, if any.
        program.stages.retain(|s| matches!(s, Stage::Gates(g) if !g.is_empty()));
        stats.transitions.clear();
    }

    let t = &stats.transitions;
    stats.totals = Totals {
        qubits: circuit.num_qubits,
        cz_layers: cz.len(),
        cz_pairs: t.iter().map(|s| s.cz_pairs).sum(),
        movers: t.iter().map(|s| s.movers).sum(),
        steps: t.iter().map(|s| s.steps).sum(),
        strict_steps: t.iter().map(|s| s.strict_steps).sum(),
        relaxed_steps: t.iter().map(|s| s.relaxed_steps).sum(),
        rearrangement_time_ms: t.iter().map(|s| s.rearrangement_time_ms).sum(),
        nodes_expanded: t.iter().map(|s| s.nodes_expanded).sum(),
        peak_queue_size: t.iter().map(|s| s.peak_queue_size).max().unwrap_or(0),
        peak_memory_bytes: t.iter().map(|s| s.peak_memory_bytes).max().unwrap_or(0),
        wall_clock_s: options.wall_clock.then(|| started.elapsed().as_secs_f64()),
    };
    let instructions = emit(&program, &arch.motion);
    Ok(Compilation {
        program,
        instructions,
        stats,
        final_sites: sites,
    })
}

/// Routes one phase. Every current atom position and every destination
/// counts as occupied for the ghost-spot checks.
fn route_phase(arch: &Architecture, sites: &[TrapId], moves: &[Move], policy: RoutingPolicy) -> RoutingResult {
    let zone = arch
        .trap_at(moves[0].src)
        .expect("moves start at traps")
        .zone;
    let occupied: Vec<Position> = sites
        .iter()
        .map(|&t| arch.pos(t))
        .chain(moves.iter().map(|m| m.dst))
        .collect();
    let ctx = RoutingContext::for_zone(arch, zone).with_occupied(occupied);
    route(moves, policy, None, &ctx, &arch.motion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::codegen::{to_text, validate, InstructionKind};

    fn circuit(n: usize, gates: &[Gate]) -> Circuit {
        Circuit {
            num_qubits: n,
            gates: gates.to_vec(),
        }
    }

    fn kinds(c: &Compilation) -> Vec<&'static str> {
        c.instructions.iter().map(Instruction::name).collect()
    }

    #[test]
    fn single_pair_round_trip() {
        let arch = Architecture::load_default();
        let c = compile(&circuit(2, &[Gate::Cz(0, 1)]), &arch, &CompileOptions::default()).unwrap();
        assert_eq!(
            kinds(&c),
            ["INIT", "PICKUP", "MOVE", "DROP", "DROP", "RYDBERG", "PICKUP", "MOVE", "DROP", "DROP"]
        );
        let report = validate(&c.instructions, &arch).unwrap();
        assert!(report.is_clean());
        let [a, b] = [report.pulses[0][0], report.pulses[0][1]];
        assert!(a.distance(&b) <= arch.interaction_radius);
        assert_eq!(c.final_sites, initial_layout(&arch, 2).unwrap());
    }

    #[test]
    fn empty_circuit_is_empty() {
        let arch = Architecture::load_default();
        let c = compile(&Circuit::new(4), &arch, &CompileOptions::default()).unwrap();
        assert!(c.instructions.is_empty());
        assert_eq!(c.stats.totals.steps, 0);
    }

    #[test]
    fn single_qubit_only() {
        let arch = Architecture::load_default();
        let c = compile(&circuit(2, &[Gate::single("h", vec![], 0)]), &arch, &CompileOptions::default()).unwrap();
        assert_eq!(kinds(&c), ["INIT", "GATE"]);
    }

    #[test]
    fn totals_reconcile_with_clock() {
        let arch = Architecture::load_default();
        let gates = [
            Gate::single("h", vec![], 0),
            Gate::Cz(0, 1),
            Gate::Cz(2, 3),
            Gate::Cz(1, 2),
            Gate::single("rz", vec![0.25], 3),
            Gate::Cz(0, 3),
        ];
        let c = compile(&circuit(4, &gates), &arch, &CompileOptions::default()).unwrap();
        let routed: f64 = c
            .program
            .stages
            .iter()
            .filter_map(|s| match s {
                Stage::Route(r) => Some(r.total_time),
                _ => None,
            })
            .sum();
        assert!((c.stats.totals.rearrangement_time_ms * 1000.0 - routed).abs() < 1e-6);
        // The clock after the last drop equals the summed step times.
        let last = c.instructions.iter().rev().find(|i| i.name() == "DROP").unwrap();
        assert!((last.time + arch.motion.transfer_time - routed).abs() < 1e-6);
        assert_eq!(c.stats.totals.cz_layers, 2);
        assert_eq!(c.stats.transitions.len(), 3);
        let steps: usize = c.stats.transitions.iter().map(|t| t.steps).sum();
        assert_eq!(c.stats.totals.steps, steps);
        assert!(validate(&c.instructions, &arch).unwrap().is_clean());
    }

    #[test]
    fn pulses_colocate_every_pair() {
        let arch = Architecture::load_default();
        let gates: Vec<Gate> = [(0, 1), (2, 3), (4, 5), (1, 2), (3, 4), (5, 0), (0, 3)]
            .iter()
            .map(|&(a, b)| Gate::Cz(a, b))
            .collect();
        let circ = circuit(6, &gates);
        for policy in [RoutingPolicy::Strict, RoutingPolicy::Relaxed, RoutingPolicy::Auto] {
            let options = CompileOptions {
                routing: policy,
                ..Default::default()
            };
            let c = compile(&circ, &arch, &options).unwrap();
            let report = validate(&c.instructions, &arch).unwrap();
            assert!(report.is_clean(), "{policy:?}: {:?}", report.violations);
            let layers: Vec<Layer> = schedule(&circ).into_iter().filter(|l| !l.cz_pairs.is_empty()).collect();
            assert_eq!(report.pulses.len(), layers.len());
            for (pos, layer) in report.pulses.iter().zip(&layers) {
                for &(a, b) in &layer.cz_pairs {
                    let (ta, tb) = (arch.trap_at(pos[a]).unwrap(), arch.trap_at(pos[b]).unwrap());
                    assert_eq!(arch.pair_partner(ta).unwrap(), tb);
                }
            }
        }
    }

    #[test]
    fn reused_atom_stays_put() {
        let arch = Architecture::load_default();
        let c = compile(&circuit(3, &[Gate::Cz(0, 1), Gate::Cz(0, 2)]), &arch, &CompileOptions::default()).unwrap();
        let report = validate(&c.instructions, &arch).unwrap();
        assert_eq!(report.pulses[0][0], report.pulses[1][0]);
    }

    #[test]
    fn deterministic_text() {
        let arch = Architecture::load_default();
        let gates: Vec<Gate> = (0..10).map(|i| Gate::Cz(i % 7, (i * 3 + 1) % 7)).filter(|g| g.qubits()[0] != g.qubits()[1]).collect();
        let circ = circuit(7, &gates);
        let a = compile(&circ, &arch, &CompileOptions::default()).unwrap();
        let b = compile(&circ, &arch, &CompileOptions::default()).unwrap();
        assert_eq!(to_text(&a.instructions), to_text(&b.instructions));
        assert_eq!(a.stats.to_toml(), b.stats.to_toml());
        assert!(a.instructions.iter().any(|i| matches!(i.kind, InstructionKind::Rydberg { .. })));
    }

    #[test]
    fn too_many_qubits() {
        let arch = Architecture::load_default();
        let n = arch.zone(arch.storage_zone()).num_traps() + 1;
        let err = compile(&Circuit::new(n), &arch, &CompileOptions::default()).unwrap_err();
        assert!(err.is_resource_failure());
    }

    #[test]
    fn layer_over_capacity() {
        let arch = Architecture::load_default();
        let cap = arch.pair_capacity();
        let gates: Vec<Gate> = (0..=cap).map(|i| Gate::Cz(2 * i, 2 * i + 1)).collect();
        let err = compile(&circuit(2 * cap + 2, &gates), &arch, &CompileOptions::default()).unwrap_err();
        assert!(matches!(err, CompileError::Placement { source: PlacementError::Capacity { .. }, .. }));
        assert!(err.is_resource_failure());
    }
}
