//! Timed instruction sequences and their text format.
//!
//! One instruction per line, prefixed by its start time in microseconds:
//!
//! ```text
//! @0.000 INIT atoms=[(0.000,111.000),(4.000,111.000)]
//! @0.000 GATE h q=global
//! @0.000 PICKUP rows=[111.000] cols=[0.000,4.000]
//! @15.000 MOVE map=[(0.000,111.000)->(1.000,0.000),(4.000,111.000)->(3.000,0.000)]
//! @250.512 DROP cols=[1.000]
//! @265.512 DROP cols=[3.000]
//! @280.512 RYDBERG zone=entanglement
//! ```
//!
//! `INIT` lists the initial trap of every qubit in qubit order. `PICKUP`
//! activates AOD rows and columns and loads the atoms at the listed
//! intersections, `SHIFT axis=x|y delta=<um>` translates all active columns
//! or rows, `MOVE` gives the current and target position of every held atom
//! and `DROP` deactivates columns, releasing their atoms. `GATE <label>
//! q=<qubit>|global` is a single-qubit pulse.

mod validate;

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::arch::Position;
use crate::circuit::Gate;
use crate::routing::{AodOp, Axis, RoutingResult};
use crate::timing::MotionParams;

pub use validate::{validate, Constraint, MalformedError, ValidationReport, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Qubit(usize),
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstructionKind {
    Init { atoms: Vec<Position> },
    Pickup { rows: Vec<f64>, cols: Vec<f64> },
    Shift { axis: Axis, delta: f64 },
    Move { map: Vec<(Position, Position)> },
    Drop { cols: Vec<f64> },
    Rydberg { zone: String },
    Gate { label: String, scope: Scope },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    /// Start time in microseconds.
    pub time: f64,
    pub kind: InstructionKind,
}

impl Instruction {
    pub fn name(&self) -> &'static str {
        match self.kind {
            InstructionKind::Init { .. } => "INIT",
            InstructionKind::Pickup { .. } => "PICKUP",
            InstructionKind::Shift { .. } => "SHIFT",
            InstructionKind::Move { .. } => "MOVE",
            InstructionKind::Drop { .. } => "DROP",
            InstructionKind::Rydberg { .. } => "RYDBERG",
            InstructionKind::Gate { .. } => "GATE",
        }
    }
}

fn num_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", items.join(","))
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{:.3} {}", self.time, self.name())?;
        match &self.kind {
            InstructionKind::Init { atoms } => {
                let items: Vec<String> = atoms.iter().map(|p| p.to_string()).collect();
                write!(f, " atoms=[{}]", items.join(","))
            }
            InstructionKind::Pickup { rows, cols } => write!(f, " rows={} cols={}", num_list(rows), num_list(cols)),
            InstructionKind::Shift { axis, delta } => {
                let a = match axis {
                    Axis::X => "x",
                    Axis::Y => "y",
                };
                write!(f, " axis={a} delta={delta:.3}")
            }
            InstructionKind::Move { map } => {
                let items: Vec<String> = map.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                write!(f, " map=[{}]", items.join(","))
            }
            InstructionKind::Drop { cols } => write!(f, " cols={}", num_list(cols)),
            InstructionKind::Rydberg { zone } => write!(f, " zone={zone}"),
            InstructionKind::Gate { label, scope } => match scope {
                Scope::Qubit(q) => write!(f, " {label} q={q}"),
                Scope::Global => write!(f, " {label} q=global"),
            },
        }
    }
}

/// Renders a sequence, one instruction per line.
pub fn to_text(instructions: &[Instruction]) -> String {
    let mut out = String::new();
    for i in instructions {
        writeln!(out, "{i}").expect("writing to a string");
    }
    out
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

struct Cursor<'a> {
    s: &'a str,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            line: self.line,
            message: message.into(),
        })
    }

    fn expect(&mut self, lit: &str) -> Result<(), ParseError> {
        self.s = self.s.trim_start();
        match self.s.strip_prefix(lit) {
            Some(rest) => {
                self.s = rest;
                Ok(())
            }
            None => self.err(format!("expected `{lit}`")),
        }
    }

    fn peek(&mut self, lit: &str) -> bool {
        self.s = self.s.trim_start();
        self.s.starts_with(lit)
    }

    fn word(&mut self) -> Result<&'a str, ParseError> {
        self.s = self.s.trim_start();
        let end = self.s.find(|c: char| c.is_whitespace()).unwrap_or(self.s.len());
        if end == 0 {
            return self.err("unexpected end of line");
        }
        let (w, rest) = self.s.split_at(end);
        self.s = rest;
        Ok(w)
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.s = self.s.trim_start();
        let end = self
            .s
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(self.s.len());
        let (w, rest) = self.s.split_at(end);
        match w.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.s = rest;
                Ok(v)
            }
            _ => self.err(format!("expected a number near `{}`", self.s)),
        }
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, ParseError>) -> Result<Vec<T>, ParseError> {
        self.expect("[")?;
        let mut out = Vec::new();
        if self.peek("]") {
            self.expect("]")?;
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.peek(",") {
                self.expect(",")?;
            } else {
                self.expect("]")?;
                return Ok(out);
            }
        }
    }

    fn position(&mut self) -> Result<Position, ParseError> {
        self.expect("(")?;
        let x = self.number()?;
        self.expect(",")?;
        let y = self.number()?;
        self.expect(")")?;
        Ok(Position::new(x, y))
    }

    fn key(&mut self, k: &str) -> Result<(), ParseError> {
        self.expect(k)?;
        self.expect("=")
    }
}

/// Parses the text format; blank lines and `#` comments are skipped.
pub fn parse_instructions(text: &str) -> Result<Vec<Instruction>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut c = Cursor { s: body, line: i + 1 };
        c.expect("@")?;
        let time = c.number()?;
        let kind = match c.word()? {
            "INIT" => {
                c.key("atoms")?;
                InstructionKind::Init {
                    atoms: c.list(Cursor::position)?,
                }
            }
            "PICKUP" => {
                c.key("rows")?;
                let rows = c.list(Cursor::number)?;
                c.key("cols")?;
                let cols = c.list(Cursor::number)?;
                InstructionKind::Pickup { rows, cols }
            }
            "SHIFT" => {
                c.key("axis")?;
                let axis = match c.word()? {
                    "x" => Axis::X,
                    "y" => Axis::Y,
                    other => return c.err(format!("unknown axis `{other}`")),
                };
                c.key("delta")?;
                InstructionKind::Shift {
                    axis,
                    delta: c.number()?,
                }
            }
            "MOVE" => {
                c.key("map")?;
                let map = c.list(|c| {
                    let a = c.position()?;
                    c.expect("->")?;
                    Ok((a, c.position()?))
                })?;
                InstructionKind::Move { map }
            }
            "DROP" => {
                c.key("cols")?;
                InstructionKind::Drop {
                    cols: c.list(Cursor::number)?,
                }
            }
            "RYDBERG" => {
                c.key("zone")?;
                InstructionKind::Rydberg {
                    zone: c.word()?.to_string(),
                }
            }
            "GATE" => {
                let label = c.word()?.to_string();
                c.key("q")?;
                let scope = match c.word()? {
                    "global" => Scope::Global,
                    q => match q.parse() {
                        Ok(q) => Scope::Qubit(q),
                        Err(_) => return c.err(format!("bad qubit `{q}`")),
                    },
                };
                InstructionKind::Gate { label, scope }
            }
            other => return c.err(format!("unknown instruction `{other}`")),
        };
        if !c.s.trim().is_empty() {
            return c.err(format!("trailing input `{}`", c.s.trim()));
        }
        out.push(Instruction { time, kind });
    }
    Ok(out)
}

/// One stage of a compiled program.
#[derive(Debug, Clone)]
pub enum Stage {
    Gates(Vec<Gate>),
    Route(RoutingResult),
    Rydberg,
}

/// Everything needed to emit instructions.
#[derive(Debug, Clone, Default)]
pub struct Program {
    pub num_qubits: usize,
    /// Initial position of every qubit.
    pub initial: Vec<Position>,
    pub stages: Vec<Stage>,
}

/// Turns a program into timed instructions.
///
/// Transfers take `transfer_time`, shifts and transits take the travel time
/// of their distance (the transit uses the longest source-to-destination
/// distance of its step); gates and Rydberg pulses are instantaneous.
pub fn emit(program: &Program, motion: &MotionParams) -> Vec<Instruction> {
    let mut out = Vec::new();
    if program.stages.is_empty() {
        return out;
    }
    let mut t = 0.0;
    out.push(Instruction {
        time: t,
        kind: InstructionKind::Init {
            atoms: program.initial.clone(),
        },
    });
    for stage in &program.stages {
        match stage {
            Stage::Gates(gates) => {
                for (label, scope) in gate_pulses(gates, program.num_qubits) {
                    out.push(Instruction {
                        time: t,
                        kind: InstructionKind::Gate { label, scope },
                    });
                }
            }
            Stage::Rydberg => out.push(Instruction {
                time: t,
                kind: InstructionKind::Rydberg {
                    zone: "entanglement".into(),
                },
            }),
            Stage::Route(result) => {
                for step in &result.steps {
                    for op in &step.plan.ops {
                        let (kind, dt) = match op {
                            AodOp::Pickup { row, cols } => (
                                InstructionKind::Pickup {
                                    rows: vec![*row],
                                    cols: cols.clone(),
                                },
                                motion.transfer_time,
                            ),
                            AodOp::Shift { axis, delta } => (
                                InstructionKind::Shift {
                                    axis: *axis,
                                    delta: *delta,
                                },
                                motion.travel(delta.abs()),
                            ),
                            AodOp::Move { map } => (
                                InstructionKind::Move { map: map.clone() },
                                motion.travel(step.max_distance()),
                            ),
                            AodOp::Drop { col } => (InstructionKind::Drop { cols: vec![*col] }, motion.transfer_time),
                        };
                        out.push(Instruction { time: t, kind });
                        t += dt;
                    }
                }
            }
        }
    }
    out
}

/// A layer's single-qubit gates as pulses. The gates become one global pulse
/// when every qubit receives exactly one gate and all share a label.
fn gate_pulses(gates: &[Gate], num_qubits: usize) -> Vec<(String, Scope)> {
    let labels: Vec<String> = gates.iter().map(Gate::label).collect();
    let mut seen = vec![false; num_qubits];
    let global = num_qubits > 1
        && gates.len() == num_qubits
        && labels.iter().all(|l| *l == labels[0])
        && gates.iter().all(|g| {
            let q = g.qubits()[0];
            !std::mem::replace(&mut seen[q], true)
        });
    if global {
        return vec![(labels[0].clone(), Scope::Global)];
    }
    gates
        .iter()
        .zip(labels)
        .map(|(g, l)| (l, Scope::Qubit(g.qubits()[0])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_roundtrip() {
        let p = Position::new;
        let seq = vec![
            Instruction {
                time: 0.0,
                kind: InstructionKind::Init {
                    atoms: vec![p(0.0, 111.0), p(4.0, 111.0)],
                },
            },
            Instruction {
                time: 0.0,
                kind: InstructionKind::Gate {
                    label: "rz(0.5)".into(),
                    scope: Scope::Qubit(1),
                },
            },
            Instruction {
                time: 0.0,
                kind: InstructionKind::Pickup {
                    rows: vec![111.0],
                    cols: vec![0.0, 4.0],
                },
            },
            Instruction {
                time: 15.0,
                kind: InstructionKind::Shift {
                    axis: Axis::Y,
                    delta: -2.0,
                },
            },
            Instruction {
                time: 60.25,
                kind: InstructionKind::Move {
                    map: vec![(p(0.0, 109.0), p(1.0, 0.0))],
                },
            },
            Instruction {
                time: 300.0,
                kind: InstructionKind::Drop { cols: vec![1.0] },
            },
            Instruction {
                time: 315.0,
                kind: InstructionKind::Rydberg {
                    zone: "entanglement".into(),
                },
            },
            Instruction {
                time: 315.0,
                kind: InstructionKind::Gate {
                    label: "h".into(),
                    scope: Scope::Global,
                },
            },
        ];
        let text = to_text(&seq);
        assert!(text.contains("@60.250 MOVE map=[(0.000,109.000)->(1.000,0.000)]"));
        assert_eq!(parse_instructions(&text).unwrap(), seq);
    }

    #[test]
    fn parse_errors_have_lines() {
        let err = parse_instructions("@0 RYDBERG zone=entanglement\n@1 JUMP").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(parse_instructions("@x DROP cols=[1]").is_err());
        assert!(parse_instructions("@0 DROP cols=[1] extra").is_err());
    }

    #[test]
    fn empty_program_emits_nothing() {
        assert!(emit(&Program::default(), &MotionParams::default()).is_empty());
    }

    #[test]
    fn global_pulse_detection() {
        let gates: Vec<Gate> = (0..3).map(|q| Gate::single("h", vec![], q)).collect();
        assert_eq!(gate_pulses(&gates, 3), vec![("h".to_string(), Scope::Global)]);
        let mixed = vec![Gate::single("h", vec![], 0), Gate::single("h", vec![], 0), Gate::single("h", vec![], 1)];
        assert_eq!(gate_pulses(&mixed, 3).len(), 3);
    }
}
