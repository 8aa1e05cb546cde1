//! Test-only oracles, written independently of the library's numerical path.
#![allow(dead_code)]

pub mod geometry;
pub mod synth;

use crosspeak::spin::{MagneticField, OrientationClass, SpinSpecies, SpinValue};
use num_complex::Complex64;

pub type Dense = Vec<Vec<Complex64>>;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn zeros(n: usize) -> Dense {
    vec![vec![re(0.0); n]; n]
}

/// Explicit spin matrices, written out by hand: (Sx, Sy, Sz).
pub fn spin_matrices(two_s: usize) -> (Dense, Dense, Dense) {
    let i = Complex64::new(0.0, 1.0);
    match two_s {
        1 => (
            vec![vec![re(0.0), re(0.5)], vec![re(0.5), re(0.0)]],
            vec![vec![re(0.0), -i * 0.5], vec![i * 0.5, re(0.0)]],
            vec![vec![re(0.5), re(0.0)], vec![re(0.0), re(-0.5)]],
        ),
        2 => {
            let r = 1.0 / 2f64.sqrt();
            (
                vec![
                    vec![re(0.0), re(r), re(0.0)],
                    vec![re(r), re(0.0), re(r)],
                    vec![re(0.0), re(r), re(0.0)],
                ],
                vec![
                    vec![re(0.0), -i * r, re(0.0)],
                    vec![i * r, re(0.0), -i * r],
                    vec![re(0.0), i * r, re(0.0)],
                ],
                vec![
                    vec![re(1.0), re(0.0), re(0.0)],
                    vec![re(0.0), re(0.0), re(0.0)],
                    vec![re(0.0), re(0.0), re(-1.0)],
                ],
            )
        }
        _ => panic!("oracle supports S = 1/2, 1"),
    }
}

fn identity(n: usize) -> Dense {
    let mut m = zeros(n);
    for (k, row) in m.iter_mut().enumerate() {
        row[k] = re(1.0);
    }
    m
}

fn mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut c = zeros(n);
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn kron(a: &Dense, b: &Dense) -> Dense {
    let (na, nb) = (a.len(), b.len());
    let mut c = zeros(na * nb);
    for i in 0..na {
        for j in 0..na {
            for k in 0..nb {
                for l in 0..nb {
                    c[i * nb + k][j * nb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    c
}

fn add_scaled(acc: &mut Dense, m: &Dense, s: f64) {
    for (r, row) in acc.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v += m[r][c] * s;
        }
    }
}

/// Parameters for an oracle Hamiltonian, with the field already in the
/// defect frame.
pub struct OracleSpin {
    pub two_s: usize,
    pub d: f64,
    pub e: f64,
    pub gamma_e: f64,
    /// (2I, gamma_n, A, P)
    pub nuclear: Option<(usize, f64, [[f64; 3]; 3], f64)>,
}

pub fn oracle_hamiltonian(p: &OracleSpin, b: [f64; 3]) -> Dense {
    let (sx, sy, sz) = spin_matrices(p.two_s);
    let ne = sz.len();
    let mut he = zeros(ne);
    add_scaled(&mut he, &mul(&sz, &sz), p.d);
    add_scaled(&mut he, &mul(&sx, &sx), p.e);
    add_scaled(&mut he, &mul(&sy, &sy), -p.e);
    add_scaled(&mut he, &sx, p.gamma_e * b[0]);
    add_scaled(&mut he, &sy, p.gamma_e * b[1]);
    add_scaled(&mut he, &sz, p.gamma_e * b[2]);
    let Some((two_i, gn, a, q)) = p.nuclear else {
        return he;
    };
    let (ix, iy, iz) = spin_matrices(two_i);
    let nn = iz.len();
    let mut h = kron(&he, &identity(nn));
    let s_ops = [&sx, &sy, &sz];
    let i_ops = [&ix, &iy, &iz];
    for k in 0..3 {
        add_scaled(&mut h, &kron(&identity(ne), i_ops[k]), gn * b[k]);
        for l in 0..3 {
            add_scaled(&mut h, &kron(s_ops[k], i_ops[l]), a[k][l]);
        }
    }
    if two_i == 2 {
        let mut iz2 = mul(&iz, &iz);
        add_scaled(&mut iz2, &identity(nn), -2.0 / 3.0);
        add_scaled(&mut h, &kron(&identity(ne), &iz2), q);
    }
    h
}

/// Number of eigenvalues of Hermitian `h` strictly below `x`, from the
/// signs of the LDLᴴ pivots of h - x·I (Sylvester's law of inertia).
pub fn count_below(h: &Dense, x: f64) -> usize {
    let n = h.len();
    let scale = h
        .iter()
        .flat_map(|r| r.iter())
        .fold(1.0f64, |m, v| m.max(v.norm()));
    let mut a: Dense = h.clone();
    for (k, row) in a.iter_mut().enumerate() {
        row[k] -= re(x);
    }
    let mut negative = 0;
    for k in 0..n {
        let mut pivot = a[k][k].re;
        if pivot.abs() < 1e-300 {
            pivot = -1e-14 * scale;
        }
        if pivot < 0.0 {
            negative += 1;
        }
        for i in (k + 1)..n {
            let factor = a[i][k] / pivot;
            for j in (k + 1)..n {
                let upd = factor * a[k][j];
                a[i][j] -= upd;
            }
        }
    }
    negative
}

/// All eigenvalues, ascending, by bisection on the inertia count.
pub fn oracle_eigenvalues(h: &Dense) -> Vec<f64> {
    let n = h.len();
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| h[i][j].norm()).sum();
        lo = lo.min(h[i][i].re - radius);
        hi = hi.max(h[i][i].re + radius);
    }
    lo -= 1.0;
    hi += 1.0;
    (0..n)
        .map(|k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if count_below(h, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
                if b - a <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
                    break;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Dense grid scan followed by bisection, for monotone scalar residuals.
pub fn grid_root(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let h = (hi - lo) / steps as f64;
    let mut prev = f(lo);
    for k in 1..=steps {
        let x = lo + h * k as f64;
        let cur = f(x);
        if prev == 0.0 {
            roots.push(x - h);
        } else if prev * cur < 0.0 {
            let (mut a, mut b, mut fa) = (x - h, x, prev);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
    }
    roots
}

/// Oracle parameters read off a catalog species.
pub fn oracle_for(species: &SpinSpecies) -> OracleSpin {
    OracleSpin {
        two_s: if species.spin == SpinValue::One { 2 } else { 1 },
        d: species.d,
        e: species.e,
        gamma_e: species.gamma_e,
        nuclear: species.nuclear.as_ref().map(|n| {
            let a = n.hyperfine;
            (
                if n.spin == SpinValue::One { 2 } else { 1 },
                n.gamma_n,
                [
                    [a[(0, 0)], a[(0, 1)], a[(0, 2)]],
                    [a[(1, 0)], a[(1, 1)], a[(1, 2)]],
                    [a[(2, 0)], a[(2, 1)], a[(2, 2)]],
                ],
                n.quadrupole_p,
            )
        }),
    }
}

pub fn defect_field(species: &SpinSpecies, field: &MagneticField, o: OrientationClass) -> [f64; 3] {
    let b = species.frame(o).to_defect(&field.vector());
    [b[0], b[1], b[2]]
}
