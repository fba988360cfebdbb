//! Gate-level circuits, ASAP layering and reuse analysis.

mod parse;
mod schedule;

use std::fmt;

use thiserror::Error;

pub use parse::parse_circuit;
pub use schedule::{reuse_analysis, schedule, ReusePlan};

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: qubit {qubit} out of range for {num_qubits} qubits")]
    QubitOutOfRange {
        line: usize,
        qubit: usize,
        num_qubits: usize,
    },
    #[error("cz on a single qubit {0}")]
    SelfInteraction(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Single {
        name: String,
        params: Vec<f64>,
        qubit: usize,
    },
    Cz(usize, usize),
}

impl Gate {
    pub fn single(name: &str, params: Vec<f64>, qubit: usize) -> Self {
        Gate::Single {
            name: name.to_string(),
            params,
            qubit,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Single { qubit, .. } => vec![qubit],
            Gate::Cz(a, b) => vec![a, b],
        }
    }

    /// Gate name including parameters, e.g. `rz(0.5)`.
    pub fn label(&self) -> String {
        match self {
            Gate::Cz(..) => "cz".to_string(),
            Gate::Single { name, params, .. } if params.is_empty() => name.clone(),
            Gate::Single { name, params, .. } => {
                let p: Vec<String> = params.iter().map(|v| format!("{v}")).collect();
                format!("{name}({})", p.join(","))
            }
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Cz(a, b) => write!(f, "cz {a} {b};"),
            Gate::Single { qubit, .. } => write!(f, "{} {qubit};", self.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        for q in gate.qubits() {
            if q >= self.num_qubits {
                return Err(CircuitError::QubitOutOfRange {
                    line: 0,
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
        }
        if let Gate::Cz(a, b) = gate {
            if a == b {
                return Err(CircuitError::SelfInteraction(a));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn cz(&mut self, a: usize, b: usize) -> Result<(), CircuitError> {
        self.push(Gate::Cz(a, b))
    }

    pub fn num_cz(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cz(..))).count()
    }
}

impl fmt::Display for Circuit {
    /// Serializes in the native text format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {};", self.num_qubits)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

/// One scheduling unit: disjoint CZ pairs and the single-qubit gates that
/// run before them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layer {
    /// Pairs stored with the smaller qubit first.
    pub cz_pairs: Vec<(usize, usize)>,
    pub pre_single_qubit: Vec<Gate>,
}

impl Layer {
    pub fn partner(&self, q: usize) -> Option<usize> {
        self.cz_pairs.iter().find_map(|&(a, b)| {
            if a == q {
                Some(b)
            } else if b == q {
                Some(a)
            } else {
                None
            }
        })
    }

    pub fn pair_index(&self, q: usize) -> Option<usize> {
        self.cz_pairs.iter().position(|&(a, b)| a == q || b == q)
    }
}
