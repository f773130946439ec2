// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use shfsim::dynamics::{rotation_unitary, run_script, ProtocolScript, PulseSpec};
use shfsim::hamiltonian::{build, exact_levels, Site, SpinSystemConfig};
use shfsim::linalg::{c, unitary_deviation, CVector};
use shfsim::scenario::Scenario;
use shfsim::spin_algebra::{entanglement_entropy, BasisLabel, StateVector};

const A: f64 = 3.14159e8;

fn label(s: &str) -> BasisLabel {
    s.parse().unwrap()
}

fn single(ratio: f64) -> SpinSystemConfig {
    SpinSystemConfig::from_energies(ratio * A, vec![Site::isotropic(A)])
}

fn ket(re: &[f64], im: &[f64]) -> CVector {
    CVector::from_iterator(re.len(), re.iter().zip(im).map(|(&r, &i)| c(r) + c(i) * shfsim::linalg::I))
}

#[derive(Debug, Clone)]
enum Op {
    Esr(f64, f64),
    FlipFlop(f64, f64),
    Free(f64),
    Toggle(bool),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0.01..6.28f64, -3.2..3.2f64).prop_map(|(a, p)| Op::Esr(a, p)),
        (0.01..6.28f64, -3.2..3.2f64).prop_map(|(a, p)| Op::FlipFlop(a, p)),
        (0.0..1e-6f64).prop_map(Op::Free),
        any::<bool>().prop_map(Op::Toggle),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rotations_are_unitary(ratio in 20.0..1e4f64, area in -7.0..7.0f64, phase in -4.0..4.0f64) {
        let cfg = single(ratio);
        for (f, t) in [("du", "uu"), ("du", "ud"), ("dd", "ud")] {
            let u = rotation_unitary(&cfg, &label(f), &label(t), area, phase).unwrap();
            prop_assert!(unitary_deviation(u.entries()) < 1e-10);
        }
    }

    #[test]
    fn levels_are_complete_and_ordered(ratio in 10.0..1e4f64, a2 in 0.1..1.0f64, on in any::<bool>()) {
        let mut cfg = SpinSystemConfig::from_energies(ratio * A, vec![Site::isotropic(A), Site::isotropic(a2 * A)]);
        cfg.sites[1].coupling_on = on;
        let table = exact_levels(&cfg).unwrap();
        prop_assert_eq!(table.len(), 8);
        prop_assert!(table.levels.windows(2).all(|w| w[0].energy >= w[1].energy));
        let mut idx: Vec<usize> = table.levels.iter().map(|l| l.label.index()).collect();
        idx.sort();
        prop_assert_eq!(idx, (0..8).collect::<Vec<_>>());
        let h = build(&cfg).unwrap();
        let trace: f64 = (0..8).map(|k| h.entries()[(k, k)].re).sum();
        prop_assert!((table.energy_sum() - trace).abs() <= 1e-9 * ratio * A);
    }

    #[test]
    fn scripts_preserve_norm(ops in prop::collection::vec(op(), 1..8), re in prop::collection::vec(-1.0..1.0f64, 4), im in prop::collection::vec(-1.0..1.0f64, 4)) {
        let amps = ket(&re, &im);
        prop_assume!(amps.norm() > 1e-3);
        let initial = StateVector::new(amps, 1).unwrap();
        let mut script = ProtocolScript::new(single(200.0), initial);
        let mut on = true;
        for o in &ops {
            let step = match *o {
                Op::Esr(a, p) if on => PulseSpec::microwave(label("du"), label("uu"), a, p),
                Op::FlipFlop(a, p) if on => PulseSpec::microwave(label("du"), label("ud"), a, p),
                Op::Esr(a, p) | Op::FlipFlop(a, p) => PulseSpec::electron_hard(a, p),
                Op::Free(t) => PulseSpec::free(t),
                Op::Toggle(next) => {
                    on = next;
                    PulseSpec::toggle(0, next)
                }
            };
            script = script.step(step);
        }
        let out = run_script(&script).unwrap();
        for s in &out.trajectory {
            prop_assert!((s.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn product_states_carry_no_entanglement(e in prop::collection::vec(-1.0..1.0f64, 4), n in prop::collection::vec(-1.0..1.0f64, 8)) {
        let electron = ket(&e[..2], &e[2..]);
        let nuclear = ket(&n[..4], &n[4..]);
        prop_assume!(electron.norm() > 1e-3 && nuclear.norm() > 1e-3);
        let s = StateVector::product(&electron, &nuclear).unwrap();
        prop_assert!(entanglement_entropy(&s, &[0]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn sweep_override_sets_the_field(a in 1e6..1e9f64) {
        let base = Scenario::from_system(single(200.0));
        let s = base.with_value("system.sites.0.hyperfine.a_s", a).unwrap();
        prop_assert_eq!(s.system.sites[0].hyperfine.a_s, a);
        prop_assert_eq!(&s.system.sites[0].coupling_on, &base.system.sites[0].coupling_on);
    }
}
