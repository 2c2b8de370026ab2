// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use proptest::prelude::*;
use qpw_core::compiler::*;
use qpw_core::gates::*;
use qpw_core::labels::two_qutrit_labels;
use qpw_core::{Error, LabeledOperator};

fn zero_layer(entangler: Entangler, angle: f64) -> Layer {
    Layer { entangler, entangler_angle: angle, entangler_phase: 0.0, local: [0.0; 18] }
}

fn max_entry(m: &M9) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn quick(restarts: usize, seed: u64) -> OptimizerConfig {
    OptimizerConfig { restarts, seed, ..Default::default() }
}

#[test]
fn ansatz_reductions() {
    let id = ansatz_unitary(&AnsatzParams { initial: [0.0; 18], layers: vec![] }).unwrap();
    assert!(max_entry(&(operator_m9(&id).unwrap() - M9::identity())) < 1e-15);
    let one = AnsatzParams { initial: [0.0; 18], layers: vec![zero_layer(Entangler::Iswap0110, PI)] };
    let u = operator_m9(&ansatz_unitary(&one).unwrap()).unwrap();
    assert!(max_entry(&(u - iswap_m9(Entangler::Iswap0110, PI, 0.0))) < 1e-15);
    assert_eq!(ansatz_unitary(&one).unwrap().labels(), two_qutrit_labels().as_slice());
    let mut bad = one.clone();
    bad.layers[0].local[4] = f64::NAN;
    assert!(matches!(ansatz_unitary(&bad), Err(Error::InvalidArgument(_))));
}

#[test]
fn local_layer_is_a_tensor_product() {
    let mut a = [0.0; 18];
    a[0] = PI; // RX(π) on (0,1) of qudit 1
    let u = local_layer_m9(&a, TemporalOrder::ListedFirst);
    // |02⟩ → −i|12⟩
    assert!((u[(5, 2)] - qpw_core::linalg::c64(0.0, -1.0)).norm() < 1e-15);
}

#[test]
fn cost_examples() {
    let cz = qutrit_cz();
    let id = AnsatzParams { initial: [0.0; 18], layers: vec![] };
    assert!((cost(&id, &cz).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    let one = AnsatzParams { initial: [0.0; 18], layers: vec![zero_layer(Entangler::Iswap1221, 1.1)] };
    let target = m9_operator(&iswap_m9(Entangler::Iswap1221, 1.1, 0.0));
    assert!(cost(&one, &target).unwrap().abs() < 1e-15);
    let not_unitary = LabeledOperator::new(two_qutrit_labels(), qpw_core::linalg::CMatrix::zeros(9, 9)).unwrap();
    assert!(cost(&id, &not_unitary).is_err());
}

// Half-angle RZ has period 4π on a qutrit: +2π flips the sign of the
// rotated subspace but not of the third level, which is not a global phase.
#[test]
fn rz_period_is_four_pi() {
    let p = tabulated_cz_decomposition();
    let base = cost(&p, &qutrit_cz()).unwrap();
    // RZ slots are the middle angle of each (RX, RZ, RX) triple
    for k in [1, 4, 7, 10, 13, 16] {
        let mut q = p.clone();
        q.layers[1].local[k] += 4.0 * PI;
        assert!((cost(&q, &qutrit_cz()).unwrap() - base).abs() < 1e-12, "slot {k}");
        let mut q = p.clone();
        q.initial[k] += 4.0 * PI;
        assert!((cost(&q, &qutrit_cz()).unwrap() - base).abs() < 1e-12);
        let mut q = p.clone();
        q.initial[k] += 2.0 * PI;
        assert!((cost(&q, &qutrit_cz()).unwrap() - 2.0 / 3.0).abs() < 1e-6, "slot {k}");
    }
}

#[test]
fn tabulated_decomposition_verifies() {
    let (f, conv) = verify_tabulated_decomposition().unwrap();
    assert!(f >= TABULATED_MIN_FIDELITY, "{f}");
    assert!((f - 0.999_999_97).abs() < 1e-7, "{f}");
    assert_eq!(conv, Convention::STANDARD);
    // listed-last order gives the same score through transposition symmetry
    let scores = convention_scores(&tabulated_cz_decomposition()).unwrap();
    assert_eq!(scores.len(), 8);
    assert!(scores.iter().filter(|s| s.1 > 0.999).count() >= 1);
}

#[test]
fn perturbed_table_fails_verification() {
    let mut p = tabulated_cz_decomposition();
    p.layers[0].local[0] += 0.1 * PI;
    match verify_decomposition(&p) {
        Err(Error::Verification { best, scores }) => {
            // one half-angle rotation off by ε costs (2cos(ε/2) + 1)/3 exactly
            let want = (2.0 * (0.05 * PI).cos() + 1.0) / 3.0;
            assert!((best - want).abs() < 1e-5, "{best}");
            assert_eq!(scores.len(), 8);
        }
        other => panic!("expected a verification failure, got {other:?}"),
    }
}

#[test]
fn zeroed_locals_match_bare_entanglers() {
    let mut p = tabulated_cz_decomposition();
    p.initial = [0.0; 18];
    for l in &mut p.layers {
        l.local = [0.0; 18];
    }
    let scores = convention_scores(&p).unwrap();
    let best = scores.iter().map(|s| s.1).fold(0.0, f64::max);
    let b = iswap_m9(Entangler::Iswap1221, 0.6667 * PI, 0.0) * iswap_m9(Entangler::Iswap0110, -0.6667 * PI, 0.0);
    let bare = (trace_overlap_m9(&b, &cz_m9()).norm() / 9.0).min(1.0);
    assert!(best < 0.5, "{best}");
    assert!((scores[0].1 - bare).abs() < 1e-12);
}

#[test]
fn iswap_target_in_one_layer() {
    let target = m9_operator(&iswap_m9(Entangler::Iswap0110, 2.0 * PI / 3.0, 0.0));
    let schedule = [ScheduleEntry { entangler: Entangler::Iswap0110, angle: 2.0 * PI / 3.0, phase: 0.0 }];
    let r = compile(&target, "ISWAP_0110", &schedule, &quick(10, 3)).unwrap();
    assert!(r.final_cost < 1e-8, "{}", r.final_cost);
    assert!(r.converged);
    assert_eq!(r.params.layers[0].entangler_angle, 2.0 * PI / 3.0);
    assert_eq!(r.final_cost, cost(&r.params, &target).unwrap().max(0.0));
}

#[test]
fn cz_in_two_layers() {
    let r = compile(&qutrit_cz(), "CZ3", &cz_schedule(), &quick(50, 0)).unwrap();
    assert!(r.final_cost < 1e-6, "{}", r.final_cost);
    assert!(r.restarts_used <= 50);
    assert_eq!(r.restart_costs.len(), r.restarts_used);
    assert_eq!(r.target_label, "CZ3");
    // the phase-aligned distance scales as √cost
    let u = operator_m9(&ansatz_unitary(&r.params).unwrap()).unwrap();
    let ov = trace_overlap_m9(&u, &cz_m9());
    let aligned = u * (ov.conj() / ov.norm());
    assert!(max_entry(&(aligned - cz_m9())) < 3.0 * r.final_cost.sqrt() + 1e-9);
}

#[test]
fn cz_out_of_reach_in_one_layer() {
    let schedule = [cz_schedule()[0]];
    let cfg = OptimizerConfig { max_iterations: 500, ..quick(100, 1) };
    let r = compile(&qutrit_cz(), "CZ3", &schedule, &cfg).unwrap();
    assert!(r.final_cost > 0.01, "{}", r.final_cost);
    assert!(!r.converged);
    assert_eq!(r.restarts_used, 100);
}

#[test]
fn compile_is_deterministic() {
    let target = m9_operator(&iswap_m9(Entangler::Iswap1221, 0.7, 0.0));
    let schedule = [ScheduleEntry { entangler: Entangler::Iswap1221, angle: 0.7, phase: 0.0 }];
    let a = compile(&target, "t", &schedule, &quick(4, 11)).unwrap();
    let b = compile(&target, "t", &schedule, &quick(4, 11)).unwrap();
    assert_eq!(serde_json::to_string(&a.params).unwrap(), serde_json::to_string(&b.params).unwrap());
    assert_eq!(a.final_cost.to_bits(), b.final_cost.to_bits());
    let c = compile(&target, "t", &schedule, &quick(4, 12)).unwrap();
    assert_ne!(a.restart_costs, c.restart_costs);
}

#[test]
fn compile_preconditions() {
    let cz = qutrit_cz();
    assert!(compile(&cz, "CZ3", &[], &quick(1, 0)).is_err());
    assert!(compile(&cz, "CZ3", &cz_schedule(), &quick(0, 0)).is_err());
    let cfg = OptimizerConfig { fd_step: 0.0, ..quick(1, 0) };
    assert!(compile(&cz, "CZ3", &cz_schedule(), &cfg).is_err());
}

#[test]
fn free_entanglers_add_variables() {
    let target = m9_operator(&iswap_m9(Entangler::Iswap0110, 1.0, 0.0));
    let schedule = [ScheduleEntry { entangler: Entangler::Iswap0110, angle: 0.5, phase: 0.0 }];
    let cfg = OptimizerConfig { free_entanglers: true, ..quick(8, 5) };
    let r = compile(&target, "t", &schedule, &cfg).unwrap();
    assert!(r.final_cost < 1e-8, "{}", r.final_cost);
    assert_ne!(r.params.layers[0].entangler_angle, 0.5);
}

#[test]
fn gradient_matches_step_halving() {
    let mut p = tabulated_cz_decomposition();
    p.initial[3] += 0.2;
    p.layers[1].local[11] -= 0.4;
    let g1 = cost_gradient(&p, &qutrit_cz(), 1e-6).unwrap();
    let g2 = cost_gradient(&p, &qutrit_cz(), 5e-7).unwrap();
    assert_eq!(g1.len(), 54);
    let scale = g1.iter().map(|x| x.abs()).fold(0.0, f64::max);
    assert!(scale > 1e-3);
    for (a, b) in g1.iter().zip(g2.iter()) {
        assert!((a - b).abs() <= 1e-4 * scale, "{a} {b}");
    }
}

#[test]
fn ansatz_json_layout() {
    let p = tabulated_cz_decomposition();
    let v = serde_json::to_value(&p).unwrap();
    assert_eq!(v["initial"]["qudit1"][0]["subspace"], "01");
    assert!((v["initial"]["qudit1"][0]["angles_pi"][0].as_f64().unwrap() - 0.3584).abs() < 1e-12);
    assert_eq!(v["layers"][0]["entangler"], "ISWAP_0110");
    assert!((v["layers"][0]["angle_pi"].as_f64().unwrap() + 0.6667).abs() < 1e-12);
    let back: AnsatzParams = serde_json::from_value(v.clone()).unwrap();
    for (a, b) in back.initial.iter().zip(p.initial.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    let mut dup = v.clone();
    dup["initial"]["qudit2"][1]["subspace"] = "01".into();
    assert!(serde_json::from_value::<AnsatzParams>(dup).is_err());
    let mut extra = v;
    extra["layers"][0]["bogus"] = 1.into();
    assert!(serde_json::from_value::<AnsatzParams>(extra).is_err());
}

#[test]
fn ideal_reports_compose_to_the_table_value() {
    let r = compose_simulated_cz(
        &ideal_report(Entangler::Iswap0110, -2.0 * PI / 3.0, 0.0),
        &ideal_report(Entangler::Iswap1221, 2.0 * PI / 3.0, 0.0),
    )
    .unwrap();
    let (f, _) = verify_tabulated_decomposition().unwrap();
    // exact ∓2π/3 blocks against the table's rounded ±0.6667π
    assert!((r.fidelity - f).abs() < 1e-7, "{} {f}", r.fidelity);
    assert_eq!(r.target_label, "CZ3");
}

#[test]
fn opposite_sign_report_is_reconciled_by_phase() {
    // +2π/3 at drive phase φ equals −2π/3 at φ + π
    let r = compose_simulated_cz(
        &ideal_report(Entangler::Iswap0110, 2.0 * PI / 3.0, 0.9),
        &ideal_report(Entangler::Iswap1221, 2.0 * PI / 3.0, -2.1),
    )
    .unwrap();
    assert!(r.fidelity > 0.9999, "{}", r.fidelity);
}

#[test]
fn identity_entangler_spoils_composition() {
    let mut id = ideal_report(Entangler::Iswap1221, 2.0 * PI / 3.0, 0.0);
    id.u9 = LabeledOperator::identity(two_qutrit_labels()).unwrap();
    let r = compose_simulated_cz(&ideal_report(Entangler::Iswap0110, -2.0 * PI / 3.0, 0.0), &id).unwrap();
    assert!(r.fidelity < 0.9, "{}", r.fidelity);
}

#[test]
fn mismatched_reports_are_rejected() {
    let a = ideal_report(Entangler::Iswap1221, 2.0 * PI / 3.0, 0.0);
    let b = ideal_report(Entangler::Iswap1221, 2.0 * PI / 3.0, 0.0);
    assert!(matches!(compose_simulated_cz(&a, &b), Err(Error::InvalidArgument(_))));
    let c = ideal_report(Entangler::Iswap0110, 1.0, 0.0);
    assert!(compose_simulated_cz(&c, &b).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ansatz_always_unitary(x in proptest::collection::vec(-10.0..10.0f64, 36 + 4)) {
        let mut initial = [0.0; 18];
        initial.copy_from_slice(&x[..18]);
        let mut local = [0.0; 18];
        local.copy_from_slice(&x[18..36]);
        let p = AnsatzParams {
            initial,
            layers: vec![
                Layer { entangler: Entangler::Iswap0110, entangler_angle: x[36], entangler_phase: x[37], local },
                Layer { entangler: Entangler::Iswap1221, entangler_angle: x[38], entangler_phase: x[39], local: initial },
            ],
        };
        let u = ansatz_unitary(&p).unwrap();
        prop_assert!(u.unitarity_error() < 1e-10);
        let c = cost(&p, &qutrit_cz()).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
    }
}
