use nazone::codegen::InstructionKind;
use nazone::compiler::TransitionKind;
use nazone::*;
use proptest::prelude::*;
use proptest::strategy::Strategy;

fn circuit_strategy() -> impl Strategy<Value = Circuit> {
    (2usize..=24).prop_flat_map(|n| {
        let gate = prop_oneof![
            3 => (0..n, 1..n).prop_map(move |(a, k)| Gate::Cz(a, (a + k) % n)),
            1 => (0..n, 0..3usize).prop_map(|(q, g)| Gate::single(["h", "x", "sx"][g], vec![], q)),
        ];
        proptest::collection::vec(gate, 0..40).prop_map(move |gates| Circuit { num_qubits: n, gates })
    })
}

fn policy_strategy() -> impl Strategy<Value = RoutingPolicy> {
    prop_oneof![Just(RoutingPolicy::Strict), Just(RoutingPolicy::Relaxed), Just(RoutingPolicy::Auto)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn compiled_programs_are_consistent(circuit in circuit_strategy(), policy in policy_strategy()) {
        let arch = Architecture::load_default();
        let options = CompileOptions { routing: policy, ..Default::default() };
        let out = compile(&circuit, &arch, &options).unwrap();

        // The text form round-trips and validates clean.
        let seq = parse_instructions(&to_text(&out.instructions)).unwrap();
        let report = validate(&seq, &arch).unwrap();
        prop_assert!(report.is_clean(), "{:?}", report.violations);

        // Every pair of every layer shares an entanglement trap pair at its pulse.
        let layers: Vec<Layer> = schedule(&circuit).into_iter().filter(|l| !l.cz_pairs.is_empty()).collect();
        prop_assert_eq!(report.pulses.len(), layers.len());
        for (pos, layer) in report.pulses.iter().zip(&layers) {
            for &(a, b) in &layer.cz_pairs {
                let ta = arch.trap_at(pos[a]).unwrap();
                prop_assert_eq!(arch.pair_partner(ta).unwrap(), arch.trap_at(pos[b]).unwrap());
                prop_assert!(pos[a].distance(&pos[b]) <= arch.interaction_radius);
            }
            // Atoms outside the layer wait in storage.
            for (q, p) in pos.iter().enumerate() {
                if layer.partner(q).is_none() {
                    prop_assert_eq!(arch.zone_kind(arch.trap_at(*p).unwrap()), ZoneKind::Storage);
                }
            }
        }

        // Atoms are conserved and end in storage.
        let expected = if out.instructions.is_empty() { 0 } else { circuit.num_qubits };
        prop_assert_eq!(report.final_positions.len(), expected);
        for &t in &out.final_sites {
            prop_assert_eq!(arch.zone_kind(t), ZoneKind::Storage);
        }
        for (p, &t) in report.final_positions.iter().zip(&out.final_sites) {
            prop_assert!(p.approx_eq(&arch.trap_position(t).unwrap()));
        }

        // Totals are the sums over transitions and match the routed time.
        let t = &out.stats.totals;
        let per = &out.stats.transitions;
        prop_assert_eq!(t.steps, per.iter().map(|s| s.steps).sum::<usize>());
        prop_assert_eq!(t.steps, t.strict_steps + t.relaxed_steps);
        prop_assert_eq!(t.nodes_expanded, per.iter().map(|s| s.nodes_expanded).sum::<usize>());
        let ms: f64 = per.iter().map(|s| s.rearrangement_time_ms).sum();
        prop_assert!((t.rearrangement_time_ms - ms).abs() < 1e-9);
        prop_assert_eq!(t.cz_layers, layers.len());
        if !layers.is_empty() {
            prop_assert_eq!(per.last().unwrap().kind, TransitionKind::FinalUnload);
            let last_drop = seq.iter().rev().find(|i| matches!(i.kind, InstructionKind::Drop { .. })).unwrap();
            let clock_us = last_drop.time + arch.motion.transfer_time;
            // Text timestamps carry three decimals.
            prop_assert!((clock_us - t.rearrangement_time_ms * 1000.0).abs() < 1e-3);
        }
    }
}

#[test]
fn compiles_openqasm() {
    let qasm = r#"
        OPENQASM 2.0;
        include "qelib1.inc";
        qreg q[4];
        h q[0];
        cz q[0], q[1];
        cz q[2], q[3];
        rz(pi/2) q[1];
        cz q[1], q[2];
    "#;
    let circuit = parse_circuit(qasm).unwrap();
    let arch = Architecture::load_default();
    let out = compile(&circuit, &arch, &CompileOptions::default()).unwrap();
    let text = to_text(&out.instructions);
    assert_eq!(text.matches("RYDBERG").count(), 2);
    assert!(text.contains("GATE rz("), "{text}");
}

#[test]
fn astar_and_ids_agree_on_tiny_layers() {
    let arch = Architecture::load_default();
    let mut circuit = Circuit::new(4);
    circuit.cz(0, 1).unwrap();
    circuit.cz(2, 3).unwrap();
    let ids = compile(&circuit, &arch, &CompileOptions::default()).unwrap();
    let mut options = CompileOptions::default();
    options.search.strategy = nazone::Strategy::Astar;
    let astar = compile(&circuit, &arch, &options).unwrap();
    let validate_ok = |c: &Compilation| validate(&c.instructions, &arch).unwrap().is_clean();
    assert!(validate_ok(&ids) && validate_ok(&astar));
    assert_eq!(ids.stats.totals.cz_layers, astar.stats.totals.cz_layers);
}
