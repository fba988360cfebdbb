use std::collections::BTreeSet;

use super::{Circuit, Gate, Layer};

/// Greedy ASAP layering without commutation.
///
/// Every CZ lands in the earliest layer after all previous gates on its
/// qubits. Single-qubit gates are attached to the layer of the next CZ on the
/// same qubit; gates with no later CZ go to a trailing layer without pairs.
pub fn schedule(circuit: &Circuit) -> Vec<Layer> {
    let mut next_free = vec![0usize; circuit.num_qubits];
    let mut pending: Vec<Vec<(usize, &Gate)>> = vec![Vec::new(); circuit.num_qubits];
    let mut layers: Vec<Layer> = Vec::new();
    let mut attached: Vec<Vec<(usize, &Gate)>> = Vec::new();
    for (i, gate) in circuit.gates.iter().enumerate() {
        match *gate {
            Gate::Single { qubit, .. } => pending[qubit].push((i, gate)),
            Gate::Cz(a, b) => {
                let l = next_free[a].max(next_free[b]);
                if layers.len() <= l {
                    layers.resize_with(l + 1, Layer::default);
                    attached.resize_with(l + 1, Vec::new);
                }
                layers[l].cz_pairs.push((a.min(b), a.max(b)));
                for q in [a, b] {
                    attached[l].append(&mut pending[q]);
                    next_free[q] = l + 1;
                }
            }
        }
    }
    let mut tail: Vec<(usize, &Gate)> = pending.into_iter().flatten().collect();
    if !tail.is_empty() {
        tail.sort_by_key(|(i, _)| *i);
        layers.push(Layer::default());
        attached.push(tail);
    }
    for (layer, mut gates) in layers.iter_mut().zip(attached) {
        gates.sort_by_key(|(i, _)| *i);
        layer.pre_single_qubit = gates.into_iter().map(|(_, g)| g.clone()).collect();
    }
    layers
}

/// For each CZ layer `i`, the qubits that stay at their entanglement trap
/// into layer `i + 1`.
pub type ReusePlan = Vec<BTreeSet<usize>>;

/// Flags atoms that can stay in the entanglement zone between consecutive
/// layers. A flagged atom keeps its exact trap; its next partner is brought
/// to the other slot of the pair. That slot is held by the atom's current
/// partner, so at most one atom per pair is flagged unless the same pair
/// interacts again.
pub fn reuse_analysis(layers: &[Layer]) -> ReusePlan {
    let cz_layers: Vec<&Layer> = layers.iter().filter(|l| !l.cz_pairs.is_empty()).collect();
    let mut plan = vec![BTreeSet::new(); cz_layers.len()];
    for i in 0..cz_layers.len().saturating_sub(1) {
        let (cur, next) = (cz_layers[i], cz_layers[i + 1]);
        let flagged = &mut plan[i];
        for &(a, b) in &next.cz_pairs {
            if cur.partner(a) == Some(b) {
                flagged.insert(a);
                flagged.insert(b);
                continue;
            }
            for q in [a, b] {
                if let Some(p) = cur.partner(q) {
                    if !flagged.contains(&p) {
                        flagged.insert(q);
                        break;
                    }
                }
            }
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circuit(n: usize, gates: &[Gate]) -> Circuit {
        Circuit {
            num_qubits: n,
            gates: gates.to_vec(),
        }
    }

    /// Layer index of every CZ as the longest chain of CZ predecessors in the
    /// qubit-dependency DAG.
    fn longest_path_layers(c: &Circuit) -> Vec<usize> {
        let cz: Vec<(usize, usize)> = c
            .gates
            .iter()
            .filter_map(|g| match *g {
                Gate::Cz(a, b) => Some((a, b)),
                _ => None,
            })
            .collect();
        let mut depth = vec![0; cz.len()];
        for j in 0..cz.len() {
            for i in 0..j {
                let share = [cz[i].0, cz[i].1].iter().any(|q| *q == cz[j].0 || *q == cz[j].1);
                if share {
                    depth[j] = depth[j].max(depth[i] + 1);
                }
            }
        }
        depth
    }

    #[test]
    fn parallel_then_bridge() {
        let c = circuit(4, &[Gate::Cz(0, 1), Gate::Cz(2, 3), Gate::Cz(1, 2)]);
        let layers = schedule(&c);
        assert_eq!(layers.len(), 2);
        assert_eq!(layers[0].cz_pairs, vec![(0, 1), (2, 3)]);
        assert_eq!(layers[1].cz_pairs, vec![(1, 2)]);
        assert_eq!(longest_path_layers(&c), vec![0, 0, 1]);
    }

    #[test]
    fn empty() {
        assert!(schedule(&Circuit::new(3)).is_empty());
    }

    #[test]
    fn star_serializes() {
        let k = 5;
        let gates: Vec<Gate> = (1..=k).map(|i| Gate::Cz(0, i)).collect();
        let layers = schedule(&circuit(k + 1, &gates));
        assert_eq!(layers.len(), k);
        assert!(layers.iter().all(|l| l.cz_pairs.len() == 1));
    }

    #[test]
    fn single_qubit_gates_attach_to_next_cz_or_epilogue() {
        let c = circuit(
            3,
            &[
                Gate::single("h", vec![], 0),
                Gate::Cz(0, 1),
                Gate::single("x", vec![], 1),
                Gate::Cz(1, 2),
                Gate::single("z", vec![], 0),
            ],
        );
        let layers = schedule(&c);
        assert_eq!(layers.len(), 3);
        assert_eq!(layers[0].pre_single_qubit, vec![Gate::single("h", vec![], 0)]);
        assert_eq!(layers[1].pre_single_qubit, vec![Gate::single("x", vec![], 1)]);
        assert!(layers[2].cz_pairs.is_empty());
        assert_eq!(layers[2].pre_single_qubit, vec![Gate::single("z", vec![], 0)]);
    }

    #[test]
    fn reuse_shared_qubit() {
        let layers = vec![
            Layer { cz_pairs: vec![(0, 1)], ..Default::default() },
            Layer { cz_pairs: vec![(0, 2)], ..Default::default() },
        ];
        let plan = reuse_analysis(&layers);
        assert_eq!(plan[0], BTreeSet::from([0]));
        assert!(plan[1].is_empty());
    }

    #[test]
    fn reuse_nothing_shared() {
        let layers = vec![
            Layer { cz_pairs: vec![(0, 1)], ..Default::default() },
            Layer { cz_pairs: vec![(2, 3)], ..Default::default() },
        ];
        assert!(reuse_analysis(&layers)[0].is_empty());
    }

    #[test]
    fn reuse_single_layer() {
        let layers = vec![Layer { cz_pairs: vec![(0, 1)], ..Default::default() }];
        assert_eq!(reuse_analysis(&layers), vec![BTreeSet::new()]);
    }

    #[test]
    fn reuse_repeated_pair_keeps_both() {
        let layers = vec![
            Layer { cz_pairs: vec![(0, 1)], ..Default::default() },
            Layer { cz_pairs: vec![(0, 1)], ..Default::default() },
        ];
        assert_eq!(reuse_analysis(&layers)[0], BTreeSet::from([0, 1]));
    }

    #[test]
    fn reuse_never_flags_both_partners_of_a_split_pair() {
        // (0,1) splits into (0,2) and (1,3): only one of 0 and 1 may stay.
        let layers = vec![
            Layer { cz_pairs: vec![(0, 1)], ..Default::default() },
            Layer { cz_pairs: vec![(0, 2), (1, 3)], ..Default::default() },
        ];
        assert_eq!(reuse_analysis(&layers)[0], BTreeSet::from([0]));
    }
}
