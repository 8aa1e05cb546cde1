mod common;

use common::geometry::{extract_ridges, near_plane, plane_residuals};
use common::{oracle_eigenvalues, oracle_hamiltonian, OracleSpin};
use crosspeak::angular::*;
use crosspeak::spin::{MagneticField, SpinSpecies, GAMMA_E};
use nalgebra::Vector3;

const AXES: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];

/// Probe lines of one class from a hand-built 3×3 Hamiltonian.
fn oracle_lines(b: Vector3<f64>, class: usize) -> [f64; 2] {
    let z = Vector3::from(AXES[class]).normalize();
    let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x = (helper - z * z.dot(&helper)).normalize();
    let y = z.cross(&x);
    let p = OracleSpin {
        two_s: 2,
        d: 2870.0,
        e: 0.0,
        gamma_e: GAMMA_E,
        nuclear: None,
    };
    let e = oracle_eigenvalues(&oracle_hamiltonian(&p, [x.dot(&b), y.dot(&b), z.dot(&b)]));
    // ms=0 is the lowest level below ~1000 G
    [e[1] - e[0], e[2] - e[0]]
}

#[test]
fn odmr_at_three_three_matches_oracle() {
    let nv = SpinSpecies::nv();
    let f = field_from_angles(Vector3::x(), 3.0, 3.0, 115.0).unwrap();
    let lines = odmr_lines(&f, &nv).unwrap();
    let mut oracle: Vec<f64> = (0..4).flat_map(|c| oracle_lines(f.vector(), c)).collect();
    oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<(f64, usize)> = Vec::new();
    for v in oracle {
        match merged.last_mut() {
            Some(m) if v - m.0 <= 0.1 => m.1 += 1,
            _ => merged.push((v, 1)),
        }
    }
    assert_eq!(lines.len(), merged.len());
    for (l, (f, m)) in lines.iter().zip(&merged) {
        assert!((l.frequency - f).abs() < 0.1, "{lines:?} vs {merged:?}");
        assert_eq!(l.multiplicity, *m);
    }
    // one degenerate class pair: its two lines each carry multiplicity 2
    assert_eq!(lines.len(), 6, "{lines:?}");
    assert_eq!(lines.iter().filter(|l| l.multiplicity == 2).count(), 2);
    for l in lines.iter().filter(|l| l.multiplicity == 2) {
        assert_eq!(l.classes, vec![1, 2]);
    }
}

#[test]
fn classes_degenerate_on_reference_axis() {
    let f = MagneticField::new(115.0, Vector3::x()).unwrap();
    let first = oracle_lines(f.vector(), 0);
    for c in 1..4 {
        let l = oracle_lines(f.vector(), c);
        assert!((l[0] - first[0]).abs() < 1e-9 && (l[1] - first[1]).abs() < 1e-9);
    }
    let lines = odmr_lines(&f, &SpinSpecies::nv()).unwrap();
    assert_eq!(lines.len(), 2);
    assert!((lines[0].frequency - first[0]).abs() < 1e-9);
}

#[test]
fn map_mirror_symmetries_and_minimum() {
    let grid = AngleGrid::square(20.0, 41).unwrap();
    let map = simulate_map(&grid, Vector3::x(), 115.0, &SpinSpecies::nv(), 6.0, 0.05).unwrap();
    let n = 41;
    assert_eq!(map.min_point(), (20, 20));
    for i in 0..n {
        for j in 0..n {
            let v = map.value(i, j);
            assert!(v > 0.0 && v <= 1.0);
            for (a, b) in [(n - 1 - i, n - 1 - j), (n - 1 - i, j), (i, n - 1 - j)] {
                assert!((v - map.value(a, b)).abs() < 1e-9, "({i},{j}) vs ({a},{b})");
            }
        }
    }
    assert!((map.value(20, 20) - 0.95).abs() < 1e-12);
}

#[test]
fn plane_points_are_darker_than_their_surroundings() {
    let nv = SpinSpecies::nv();
    let s = |phi: f64, theta: f64| degeneracy_strength(&field_from_angles(Vector3::x(), phi, theta, 115.0).unwrap(), &nv, 6.0);
    for theta in [-15.0, -8.0, 6.0, 12.0, 18.0] {
        // on the plane orthogonal to [011]: tanφ = sinθ
        let phi = (f64::sin(f64::to_radians(theta))).atan().to_degrees();
        assert!(s(phi, theta) > 0.5);
        assert!(s(phi, theta) > 5.0 * s(phi + 3.0, theta));
    }
}

#[test]
fn ridges_follow_analytic_planes() {
    let grid = AngleGrid::square(20.0, 41).unwrap();
    let map = simulate_map(&grid, Vector3::x(), 115.0, &SpinSpecies::nv(), 6.0, 0.05).unwrap();
    let (phis, thetas) = (grid.phis(), grid.thetas());
    let cell = grid.phi_step();
    let ridges = extract_ridges(&map.pl_proxy, 0.05);
    assert!(!ridges.is_empty());
    for &(i, j) in &ridges {
        let (p, t) = (phis[i], thetas[j]);
        assert!(near_plane(p, t, cell), "ridge at ({p}, {t}) is off every plane");
    }
    // every plane is traced
    for k in 0..4 {
        let hits = ridges
            .iter()
            .filter(|&&(i, j)| {
                let r = plane_residuals(phis[i], thetas[j]);
                r[k].abs() < (cell.to_radians()).sin() * 1.5
            })
            .count();
        assert!(hits >= 20, "plane {k}: {hits} ridge points");
    }
    // the library's own loci agree
    for locus in plane_loci(Vector3::x(), &grid) {
        for &(p, t) in &locus.points {
            if ["[010]", "[001]", "[011]", "[01-1]"].contains(&locus.normal.as_str()) {
                assert!(plane_residuals(p, t).iter().any(|r| r.abs() < 1e-9), "{} at ({p},{t})", locus.normal);
            }
        }
    }
}
