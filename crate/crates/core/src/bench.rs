//! Seeded benchmark circuit generators.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Gate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Hadamards on all qubits, then CZ layers whose width ramps up to the
    /// requested parallelism.
    GraphstateLike,
    /// CZ layers of constant width with random rotations in between.
    RandomPairs,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::GraphstateLike => "graphstate-like",
            Family::RandomPairs => "random-pairs",
        })
    }
}

impl FromStr for Family {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graphstate-like" | "graphstate" => Ok(Family::GraphstateLike),
            "random-pairs" | "random" => Ok(Family::RandomPairs),
            _ => Err(BenchError::Family(s.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("unknown family `{0}`")]
    Family(String),
    #[error("parallelism {parallelism} needs {} qubits, have {qubits}", 2 * parallelism)]
    TooFewQubits { qubits: usize, parallelism: usize },
    #[error("parallelism and layer count must be positive")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub family: Family,
    pub qubits: usize,
    /// CZ pairs of the widest layer.
    pub parallelism: usize,
    pub layers: usize,
    pub seed: u64,
}

impl BenchSpec {
    /// Layer `l` of the generated circuit has exactly `widths()[l]` pairs.
    pub fn widths(&self) -> Vec<usize> {
        let (p, n) = (self.parallelism, self.layers);
        match self.family {
            Family::RandomPairs => vec![p; n],
            Family::GraphstateLike => (1..=n).map(|l| (p * l).div_ceil(n)).collect(),
        }
    }

    pub fn generate(&self) -> Result<Circuit, BenchError> {
        if self.parallelism == 0 || self.layers == 0 {
            return Err(BenchError::Empty);
        }
        if 2 * self.parallelism > self.qubits {
            return Err(BenchError::TooFewQubits {
                qubits: self.qubits,
                parallelism: self.parallelism,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.qubits;
        let mut gates = Vec::new();
        if self.family == Family::GraphstateLike {
            gates.extend((0..n).map(|q| Gate::single("h", vec![], q)));
        }
        // Every pair after the first layer touches a qubit of the previous
        // layer, which pins it to the next layer under ASAP scheduling.
        let mut prev: Vec<usize> = Vec::new();
        for (l, width) in self.widths().into_iter().enumerate() {
            let mut pairs = Vec::with_capacity(width);
            let mut used = vec![false; n];
            if l > 0 {
                prev.shuffle(&mut rng);
                for &a in prev.iter().take(width) {
                    used[a] = true;
                }
            }
            let anchors: Vec<usize> = if l == 0 { Vec::new() } else { prev.iter().take(width).copied().collect() };
            let mut rest: Vec<usize> = (0..n).filter(|&q| !used[q]).collect();
            rest.shuffle(&mut rng);
            let mut rest = rest.into_iter();
            for a in anchors {
                pairs.push((a, rest.next().expect("2 * width <= qubits")));
            }
            while pairs.len() < width {
                let a = rest.next().expect("2 * width <= qubits");
                pairs.push((a, rest.next().expect("2 * width <= qubits")));
            }
            if self.family == Family::RandomPairs && l > 0 {
                for &(a, _) in &pairs {
                    gates.push(Gate::single("rz", vec![rng.gen_range(-3.14..3.14)], a));
                }
            }
            prev = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
            gates.extend(pairs.into_iter().map(|(a, b)| Gate::Cz(a, b)));
        }
        if self.family == Family::GraphstateLike {
            gates.extend((0..n).map(|q| Gate::single("h", vec![], q)));
        }
        Ok(Circuit { num_qubits: n, gates })
    }
}
