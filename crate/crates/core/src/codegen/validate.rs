use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::{Instruction, InstructionKind, Scope};
use crate::arch::{Architecture, Position};
use crate::routing::Axis;

/// Tolerance when matching line and atom coordinates, in micrometers. The
/// text format keeps three decimals, so this absorbs rounding.
const TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Crossing,
    Preservation,
    GhostSpot,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Crossing => "crossing",
            Constraint::Preservation => "preservation",
            Constraint::GhostSpot => "ghost_spot",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub index: usize,
    pub constraint: Constraint,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Position of every qubit at each Rydberg pulse.
    #[serde(skip)]
    pub pulses: Vec<Vec<Position>>,
    /// Position of every qubit after the last instruction.
    #[serde(skip)]
    pub final_positions: Vec<Position>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("instruction {index}: {message}")]
pub struct MalformedError {
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Copy)]
struct Held {
    qubit: usize,
    row: usize,
    col: usize,
    pickup: usize,
    origin: Position,
}

#[derive(Default)]
struct Sim {
    /// Atom per occupied SLM trap.
    slm: HashMap<(i64, i64), usize>,
    positions: Vec<Position>,
    /// Coordinates of AOD rows and columns by id; `None` once released.
    rows: Vec<Option<f64>>,
    cols: Vec<Option<f64>>,
    held: Vec<Held>,
    moved: bool,
}

fn find(lines: &[Option<f64>], v: f64) -> Option<usize> {
    lines.iter().position(|l| matches!(l, Some(x) if (x - v).abs() < TOL))
}

fn near(a: Position, b: Position) -> bool {
    (a.x - b.x).abs() < TOL && (a.y - b.y).abs() < TOL
}

fn active(lines: &[Option<f64>]) -> impl Iterator<Item = (usize, f64)> + '_ {
    lines.iter().enumerate().filter_map(|(i, l)| l.map(|v| (i, v)))
}

/// Simulates SLM occupancy and AOD lines and reports constraint violations.
///
/// Lines must keep their order and stay at least `aod_min_separation` apart
/// (crossing), atoms sharing a line must keep sharing it and distinct lines
/// must stay distinct (preservation), and no pickup may activate an
/// intersection over an atom that is not being loaded (ghost spot).
pub fn validate(instructions: &[Instruction], arch: &Architecture) -> Result<ValidationReport, MalformedError> {
    let sep = arch.aod_min_separation;
    let mut sim = Sim::default();
    let mut report = ValidationReport::default();
    let mut last_time = f64::NEG_INFINITY;
    for (index, ins) in instructions.iter().enumerate() {
        let bad = |message: String| MalformedError { index, message };
        if !(ins.time >= last_time) {
            return Err(bad("timestamp decreases".into()));
        }
        last_time = ins.time;
        let mut flag = |constraint, detail: String| {
            report.violations.push(Violation {
                index,
                constraint,
                detail,
            })
        };
        match &ins.kind {
            InstructionKind::Init { atoms } => {
                if !sim.positions.is_empty() {
                    return Err(bad("second INIT".into()));
                }
                for (q, p) in atoms.iter().enumerate() {
                    if arch.trap_at(*p).is_none() {
                        return Err(bad(format!("qubit {q} starts off-trap at {p}")));
                    }
                    if sim.slm.insert(p.key(), q).is_some() {
                        return Err(bad(format!("two atoms start at {p}")));
                    }
                }
                sim.positions = atoms.clone();
            }
            InstructionKind::Pickup { rows, cols } => {
                if sim.moved {
                    return Err(bad("pickup after transit before all drops".into()));
                }
                let mut new_rows = Vec::new();
                for &y in rows {
                    let id = match find(&sim.rows, y) {
                        Some(id) => id,
                        None => {
                            if let Some((_, o)) = active(&sim.rows).find(|(_, o)| (o - y).abs() < sep - TOL) {
                                flag(Constraint::Crossing, format!("row {y:.3} activated {:.3} from row {o:.3}", (o - y).abs()));
                            }
                            sim.rows.push(Some(y));
                            sim.rows.len() - 1
                        }
                    };
                    new_rows.push(id);
                }
                let mut new_cols = Vec::new();
                for &x in cols {
                    let id = match find(&sim.cols, x) {
                        Some(id) => id,
                        None => {
                            if let Some((_, o)) = active(&sim.cols).find(|(_, o)| (o - x).abs() < sep - TOL) {
                                flag(Constraint::Crossing, format!("column {x:.3} activated {:.3} from column {o:.3}", (o - x).abs()));
                            }
                            sim.cols.push(Some(x));
                            sim.cols.len() - 1
                        }
                    };
                    new_cols.push(id);
                }
                let row_list: Vec<(usize, f64)> = active(&sim.rows).collect();
                let col_list: Vec<(usize, f64)> = active(&sim.cols).collect();
                for &(ri, y) in &row_list {
                    for &(ci, x) in &col_list {
                        let key = Position::new(x, y).key();
                        let Some(&q) = sim.slm.get(&key) else { continue };
                        if new_rows.contains(&ri) && new_cols.contains(&ci) {
                            sim.slm.remove(&key);
                            sim.held.push(Held {
                                qubit: q,
                                row: ri,
                                col: ci,
                                pickup: index,
                                origin: sim.positions[q],
                            });
                        } else {
                            flag(Constraint::GhostSpot, format!("intersection ({x:.3},{y:.3}) over qubit {q}"));
                        }
                    }
                }
            }
            InstructionKind::Shift { axis, delta } => {
                let lines = match axis {
                    Axis::X => &mut sim.cols,
                    Axis::Y => &mut sim.rows,
                };
                for v in lines.iter_mut().flatten() {
                    *v += delta;
                }
                for h in &sim.held {
                    let p = &mut sim.positions[h.qubit];
                    match axis {
                        Axis::X => p.x += delta,
                        Axis::Y => p.y += delta,
                    }
                }
            }
            InstructionKind::Move { map } => {
                let mut listed = vec![false; sim.held.len()];
                for (from, _) in map {
                    let Some(k) = sim.held.iter().position(|h| near(sim.positions[h.qubit], *from)) else {
                        return Err(bad(format!("no held atom at {from}")));
                    };
                    if std::mem::replace(&mut listed[k], true) {
                        return Err(bad(format!("{from} listed twice")));
                    }
                }
                // Loaded but not listed: captured by an unintended intersection.
                // The atom is reported and put back so the simulation goes on.
                let mut k = 0;
                sim.held.retain(|h| {
                    k += 1;
                    if listed[k - 1] {
                        return true;
                    }
                    report.violations.push(Violation {
                        index: h.pickup,
                        constraint: Constraint::GhostSpot,
                        detail: format!("qubit {} captured at {}", h.qubit, h.origin),
                    });
                    sim.positions[h.qubit] = h.origin;
                    sim.slm.insert(h.origin.key(), h.qubit);
                    false
                });
                let mut flag = |constraint, detail: String| {
                    report.violations.push(Violation {
                        index,
                        constraint,
                        detail,
                    })
                };
                let mut row_to: Vec<Option<f64>> = vec![None; sim.rows.len()];
                let mut col_to: Vec<Option<f64>> = vec![None; sim.cols.len()];
                let mut targets = Vec::with_capacity(map.len());
                for (from, to) in map {
                    let h = *sim.held.iter().find(|h| near(sim.positions[h.qubit], *from)).expect("checked above");
                    for (slot, v, what, id) in [(&mut row_to[h.row], to.y, "row", h.row), (&mut col_to[h.col], to.x, "column", h.col)] {
                        match *slot {
                            Some(t) if (t - v).abs() >= TOL => {
                                flag(Constraint::Preservation, format!("{what} {id} split between {t:.3} and {v:.3}"));
                            }
                            Some(_) => {}
                            None => *slot = Some(v),
                        }
                    }
                    targets.push((h.qubit, *to));
                }
                for (what, lines, to) in [("row", &mut sim.rows, row_to), ("column", &mut sim.cols, col_to)] {
                    let mut order: Vec<(f64, f64)> = active(lines).map(|(i, v)| (v, to[i].unwrap_or(v))).collect();
                    order.sort_by(|a, b| a.0.total_cmp(&b.0));
                    for w in order.windows(2) {
                        let gap = w[1].1 - w[0].1;
                        if gap.abs() < TOL {
                            flag(Constraint::Preservation, format!("{what}s at {:.3} and {:.3} merge at {:.3}", w[0].0, w[1].0, w[1].1));
                        } else if gap < sep - TOL {
                            flag(
                                Constraint::Crossing,
                                format!("{what}s at {:.3} and {:.3} end at {:.3} and {:.3}", w[0].0, w[1].0, w[0].1, w[1].1),
                            );
                        }
                    }
                    for (i, l) in lines.iter_mut().enumerate() {
                        if let (Some(v), Some(t)) = (l.as_mut(), to[i]) {
                            *v = t;
                        }
                    }
                }
                for (q, to) in targets {
                    sim.positions[q] = to;
                }
                sim.moved = true;
            }
            InstructionKind::Drop { cols } => {
                for &x in cols {
                    let Some(ci) = find(&sim.cols, x) else {
                        return Err(bad(format!("no active column at {x:.3}")));
                    };
                    sim.cols[ci] = None;
                    let (released, kept): (Vec<Held>, Vec<Held>) = sim.held.iter().partition(|h| h.col == ci);
                    sim.held = kept;
                    for h in released {
                        let p = sim.positions[h.qubit];
                        let Some(trap) = arch.trap_at(p) else {
                            return Err(bad(format!("qubit {} released off-trap at {p}", h.qubit)));
                        };
                        let p = arch.pos(trap);
                        sim.positions[h.qubit] = p;
                        if let Some(other) = sim.slm.insert(p.key(), h.qubit) {
                            return Err(bad(format!("qubit {} dropped onto qubit {other} at {p}", h.qubit)));
                        }
                    }
                }
                if sim.held.is_empty() {
                    sim.rows.clear();
                    sim.cols.clear();
                    sim.moved = false;
                }
            }
            InstructionKind::Rydberg { .. } => {
                if !sim.held.is_empty() {
                    return Err(bad("Rydberg pulse while atoms are held".into()));
                }
                report.pulses.push(sim.positions.clone());
            }
            InstructionKind::Gate { scope, .. } => {
                if let Scope::Qubit(q) = scope {
                    if *q >= sim.positions.len() {
                        return Err(bad(format!("gate on unknown qubit {q}")));
                    }
                }
            }
        }
    }
    if !sim.held.is_empty() {
        return Err(MalformedError {
            index: instructions.len(),
            message: format!("{} atoms still held at the end", sim.held.len()),
        });
    }
    report.violations.sort_by_key(|v| v.index);
    report.final_positions = sim.positions;
    Ok(report)
}
