//! Analytic plane geometry around the [100] reference and ridge extraction.

/// Analytic degeneracy planes in the [100] goniometer convention,
/// B ∝ (cosφ cosθ, cosφ sinθ, −sinφ).
pub fn plane_residuals(phi: f64, theta: f64) -> [f64; 4] {
    let (p, t) = (phi.to_radians(), theta.to_radians());
    [t.sin(), p.sin(), p.tan() - t.sin(), p.tan() + t.sin()]
}

/// Points that are local minima along φ or along θ and reach at least a
/// tenth of the map's full depth.
pub fn extract_ridges(pl: &[Vec<f64>], contrast: f64) -> Vec<(usize, usize)> {
    let n = pl.len();
    let m = pl[0].len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let v = pl[i][j];
            if v > 1.0 - 0.1 * contrast {
                continue;
            }
            let row_min = j > 0 && j + 1 < m && v <= pl[i][j - 1] && v <= pl[i][j + 1];
            let col_min = i > 0 && i + 1 < n && v <= pl[i - 1][j] && v <= pl[i + 1][j];
            if row_min || col_min {
                out.push((i, j));
            }
        }
    }
    out
}

pub fn near_plane(phi: f64, theta: f64, cell: f64) -> bool {
    // sample a one-cell neighbourhood for a sign change of any plane residual
    let r0 = plane_residuals(phi, theta);
    let mut steps = Vec::new();
    for a in -4..=4 {
        for b in -4..=4 {
            let (dp, dt) = (cell * a as f64 / 4.0, cell * b as f64 / 4.0);
            if dp * dp + dt * dt <= cell * cell + 1e-12 {
                steps.push((dp, dt));
            }
        }
    }
    (0..4).any(|k| {
        r0[k] == 0.0
            || steps
                .iter()
                .any(|&(dp, dt)| plane_residuals(phi + dp, theta + dt)[k] * r0[k] <= 0.0)
    })
}
