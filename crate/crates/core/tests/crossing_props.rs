mod common;

use common::{grid_root, oracle_eigenvalues, oracle_hamiltonian, OracleSpin};
use crosspeak::catalog::Catalog;
use crosspeak::crossing::{
    distinct_fields, find_crossings, p1_three_body_fields, sweep_curves, SweepSpec, REFINED_TOL,
};
use crosspeak::spin::{
    transitions, MagneticField, OrientationClass, SelectionRule, SpinSpecies, GAMMA_E,
};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn nv_oracle() -> OracleSpin {
    OracleSpin {
        two_s: 2,
        d: 2870.0,
        e: 0.0,
        gamma_e: GAMMA_E,
        nuclear: None,
    }
}

#[test]
fn bare_p1_roots_match_grid_scan() {
    let mut p1 = Catalog::builtin().get("P1").unwrap().clone();
    let gamma_n = {
        let n = p1.nuclear.as_mut().unwrap();
        n.hyperfine = Matrix3::zeros();
        n.quadrupole_p = 0.0;
        n.gamma_n
    };
    let spec = SweepSpec::new(Vector3::z(), 0.0, 300.0, 0.1).unwrap();
    let got = distinct_fields(
        &p1_three_body_fields(&SpinSpecies::nv(), &p1, &spec).unwrap(),
        0.05,
    );

    // Bare P1 levels are ms·γe·B + mI·γn·B, so every transition is c·B.
    let mut coeffs = Vec::new();
    for dms in [0.0, 1.0] {
        for dmi in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let c: f64 = dms * GAMMA_E + dmi * gamma_n;
            if c.abs() > 0.0 {
                coeffs.push(c.abs());
            }
        }
    }
    coeffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    coeffs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    // NV class 1 along [001]: field in the defect frame.
    let n = Vector3::new(1.0, 1.0, 1.0).normalize();
    let x = Vector3::new(1.0, 1.0, -2.0).normalize();
    let y = n.cross(&x);
    let nv_diff = |b: f64| {
        let v = Vector3::z() * b;
        let e = oracle_eigenvalues(&oracle_hamiltonian(&nv_oracle(), [x.dot(&v), y.dot(&v), n.dot(&v)]));
        e[2] - e[1]
    };
    let mut want = vec![0.0];
    for c in coeffs {
        for r in grid_root(|b| c * b - nv_diff(b), 0.05, 300.0, 3000) {
            want.push(r);
        }
    }
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    want.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-3, "{got:?} vs {want:?}");
    }
}

fn arb_axis() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| Vector3::new(x, y, z).normalize())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn refined_crossings_are_true_degeneracies(axis in arb_axis(), d in 2500.0f64..2800.0) {
        let other = SpinSpecies::spin_one("X", d, GAMMA_E);
        let spec = SweepSpec::new(axis, 5.0, 60.0, 0.1).unwrap();
        let all = OrientationClass::all();
        let a = sweep_curves(&other, &spec, &all, SelectionRule::NvProbe).unwrap();
        let b = sweep_curves(&SpinSpecies::nv(), &spec, &all, SelectionRule::NvProbe).unwrap();
        for ev in find_crossings(&a, &b).unwrap() {
            let f = MagneticField::new(ev.b_star, axis).unwrap();
            let freq = |s: &SpinSpecies, cls: u8, label: &str| {
                transitions(s, &f, OrientationClass::new(cls).unwrap(), SelectionRule::NvProbe)
                    .unwrap()
                    .into_iter()
                    .find(|t| t.label() == label)
                    .unwrap()
                    .frequency
            };
            let fa = freq(&other, ev.classes_a[0], &ev.transition_a);
            let fb = freq(&SpinSpecies::nv(), ev.classes_b[0], &ev.transition_b);
            prop_assert!((fa - fb).abs() <= REFINED_TOL, "{ev:?}: {fa} vs {fb}");
        }
    }

    #[test]
    fn halving_the_step_keeps_the_roots(axis in arb_axis(), d in 2600.0f64..2800.0) {
        let other = SpinSpecies::spin_one("X", d, GAMMA_E);
        let all = OrientationClass::all();
        let run = |step: f64| {
            let spec = SweepSpec::new(axis, 10.0, 60.0, step).unwrap();
            let a = sweep_curves(&other, &spec, &all, SelectionRule::NvProbe).unwrap();
            let b = sweep_curves(&SpinSpecies::nv(), &spec, &all, SelectionRule::NvProbe).unwrap();
            find_crossings(&a, &b).unwrap()
        };
        let coarse = run(0.1);
        let fine = run(0.05);
        // Only compare well-separated transversal roots.
        let robust = |e: &crosspeak::crossing::CrossingEvent| e.slope_gap > 0.05 && e.b_star > 10.5 && e.b_star < 59.5;
        let c: Vec<f64> = coarse.iter().filter(|e| robust(e)).map(|e| e.b_star).collect();
        for b in c {
            prop_assert!(fine.iter().any(|e| (e.b_star - b).abs() < 1e-3), "{b} missing from {fine:?}");
        }
    }

    #[test]
    fn swapping_operands_keeps_the_fields(axis in arb_axis()) {
        let cat = Catalog::builtin();
        let spec = SweepSpec::new(axis, 15.0, 145.0, 0.2).unwrap();
        let all = OrientationClass::all();
        let a = sweep_curves(cat.get("VH-").unwrap(), &spec, &all, SelectionRule::NvProbe).unwrap();
        let b = sweep_curves(&SpinSpecies::nv(), &spec, &all, SelectionRule::NvProbe).unwrap();
        let ab: Vec<f64> = find_crossings(&a, &b).unwrap().iter().map(|e| e.b_star).collect();
        let ba: Vec<f64> = find_crossings(&b, &a).unwrap().iter().map(|e| e.b_star).collect();
        prop_assert_eq!(ab.len(), ba.len());
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn nv_upper_branch_rises(axis in arb_axis()) {
        let spec = SweepSpec::new(axis, 0.0, 100.0, 0.5).unwrap();
        let curves = sweep_curves(&SpinSpecies::nv(), &spec, &OrientationClass::all(), SelectionRule::NvProbe).unwrap();
        for c in curves.iter().filter(|c| c.to_state == "ms=+1") {
            prop_assert!(c.samples.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-9));
        }
    }
}
