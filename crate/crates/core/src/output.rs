//! Deterministic CSV and JSON renderings, and atomic file writes.
//!
//! Fields in gauss are printed with six decimals, frequencies in MHz with four.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::angular::{DegeneracyMap, OdmrLine, PlaneLocus};
use crate::crossing::{CrossingEvent, TransitionCurve};
use crate::spectrum::{ScanReport, ZfsEstimate};

pub fn gauss(x: f64) -> String {
    format!("{x:.6}")
}

pub fn mhz(x: f64) -> String {
    format!("{x:.4}")
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

fn classes_tag(classes: &[u8]) -> String {
    let c: Vec<String> = classes.iter().map(|c| format!("c{c}")).collect();
    format!("[{}]", c.join(","))
}

/// Quotes a CSV field when it holds a comma or quote.
fn cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn curves_csv(curves: &[TransitionCurve]) -> String {
    let mut out = String::from("species,transition,classes,B_G,f_MHz\n");
    for c in curves {
        let (label, tag) = (cell(&c.label()), cell(&classes_tag(&c.classes)));
        for &(b, f) in &c.samples {
            let _ = writeln!(out, "{},{label},{tag},{},{}", cell(&c.species), gauss(b), mhz(f));
        }
    }
    out
}

pub fn curves_json(curves: &[TransitionCurve]) -> Value {
    Value::Array(
        curves
            .iter()
            .map(|c| {
                json!({
                    "species": c.species,
                    "transition": c.label(),
                    "classes": c.classes,
                    "multiplicity": c.multiplicity(),
                    "min_overlap": round_to(c.min_overlap, 6),
                    "tracking_ok": c.tracking_ok(),
                    "points": c.samples.len(),
                })
            })
            .collect(),
    )
}

pub fn crossings_csv(events: &[CrossingEvent]) -> String {
    let mut out = String::from("species_a,transition_a,species_b,transition_b,B_star_G,f_star_MHz,slope_gap\n");
    for e in events {
        let ta = format!("{} {}", e.transition_a, classes_tag(&e.classes_a));
        let tb = format!("{} {}", e.transition_b, classes_tag(&e.classes_b));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            cell(&e.species_a),
            cell(&ta),
            cell(&e.species_b),
            cell(&tb),
            gauss(e.b_star),
            mhz(e.f_star),
            mhz(e.slope_gap)
        );
    }
    out
}

pub fn crossings_json(events: &[CrossingEvent]) -> Value {
    Value::Array(
        events
            .iter()
            .map(|e| {
                json!({
                    "species_a": e.species_a,
                    "transition_a": e.transition_a,
                    "classes_a": e.classes_a,
                    "species_b": e.species_b,
                    "transition_b": e.transition_b,
                    "classes_b": e.classes_b,
                    "B_star_G": round_to(e.b_star, 6),
                    "f_star_MHz": round_to(e.f_star, 4),
                    "slope_gap_MHz_per_G": round_to(e.slope_gap, 4),
                })
            })
            .collect(),
    )
}

pub fn zfs_json(z: &ZfsEstimate) -> Value {
    json!({
        "D_MHz": round_to(z.d, 4),
        "sigma_D_MHz": round_to(z.sigma_d, 4),
        "contributions_MHz": {
            "angle": round_to(z.contributions.angle, 4),
            "calibration": round_to(z.contributions.calibration, 4),
            "fit": round_to(z.contributions.fit, 4),
            "nv_reference": round_to(z.contributions.nv_reference, 4),
        },
        "center_G": round_to(z.center, 6),
        "center_sigma_G": round_to(z.center_sigma, 6),
        "crossing": z.crossing,
    })
}

pub fn report_json(report: &ScanReport) -> Value {
    let peaks: Vec<Value> = report
        .peaks
        .iter()
        .map(|p| {
            json!({
                "center_G": round_to(p.center, 6),
                "center_sigma_G": round_to(p.center_sigma(), 6),
                "sigma_G": round_to(p.sigma, 6),
                "depth": round_to(p.depth, 4),
                "contrast": p.contrast.map(|c| round_to(c, 8)),
                "window_G": [round_to(p.window.0, 6), round_to(p.window.1, 6)],
                "converged": p.converged,
                "iterations": p.iterations,
                "runs_z": round_to(p.runs_z, 4),
                "poor_fit": p.poor_fit,
                "edge_truncated": p.edge_truncated,
            })
        })
        .collect();
    let calibration = report.calibration.as_ref().map(|c| {
        json!({
            "anchors": c.anchors().iter().map(|a| [round_to(a.0, 6), round_to(a.1, 6)]).collect::<Vec<_>>(),
            "quality": c.quality,
            "max_nonlinearity_G": round_to(c.max_nonlinearity, 6),
        })
    });
    json!({
        "calibration": calibration,
        "baseline": {
            "coefficients": report.baseline.coefficients,
            "excluded_windows_G": report.baseline.excluded_windows.iter().map(|w| [round_to(w.0, 6), round_to(w.1, 6)]).collect::<Vec<_>>(),
            "residual_rms": round_to(report.baseline.residual_rms, 6),
        },
        "peaks": peaks,
        "zfs": report.zfs.iter().map(zfs_json).collect::<Vec<_>>(),
    })
}

pub fn report_csv(report: &ScanReport) -> String {
    let mut out = String::from(
        "center_G,center_sigma_G,sigma_G,depth,contrast,converged,poor_fit,edge_truncated,D_MHz,sigma_D_MHz\n",
    );
    for p in &report.peaks {
        let z = report.zfs.iter().find(|z| (z.center - p.center).abs() < 1e-12);
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{},{},{},{},{},{}",
            gauss(p.center),
            gauss(p.center_sigma()),
            gauss(p.sigma),
            p.depth,
            p.contrast.map(|c| format!("{c:.8}")).unwrap_or_default(),
            p.converged,
            p.poor_fit,
            p.edge_truncated,
            z.map(|z| mhz(z.d)).unwrap_or_default(),
            z.map(|z| mhz(z.sigma_d)).unwrap_or_default(),
        );
    }
    out
}

pub fn map_csv(map: &DegeneracyMap) -> String {
    let mut out = String::from("phi_deg,theta_deg,pl_proxy\n");
    let (phis, thetas) = (map.grid.phis(), map.grid.thetas());
    for (i, phi) in phis.iter().enumerate() {
        for (j, theta) in thetas.iter().enumerate() {
            let _ = writeln!(out, "{phi:.4},{theta:.4},{:.8}", map.pl_proxy[i][j]);
        }
    }
    out
}

pub fn map_metadata(map: &DegeneracyMap, loci: &[PlaneLocus]) -> Value {
    let (i, j) = map.min_point();
    json!({
        "reference_axis": map.reference,
        "amplitude_G": round_to(map.amplitude, 6),
        "linewidth_MHz": round_to(map.linewidth, 4),
        "contrast": map.contrast,
        "grid": map.grid,
        "convention": map.convention,
        "uniform": map.uniform,
        "minimum_deg": [round_to(map.grid.phis()[i], 4), round_to(map.grid.thetas()[j], 4)],
        "planes": loci.iter().map(|l| l.normal.clone()).collect::<Vec<_>>(),
    })
}

pub fn loci_csv(loci: &[PlaneLocus]) -> String {
    let mut out = String::from("plane_normal,phi_deg,theta_deg\n");
    for l in loci {
        for (p, t) in &l.points {
            let _ = writeln!(out, "{},{p:.4},{t:.4}", l.normal);
        }
    }
    out
}

pub fn odmr_csv(lines: &[OdmrLine]) -> String {
    let mut out = String::from("f_MHz,multiplicity,classes\n");
    for l in lines {
        let _ = writeln!(out, "{},{},{}", mhz(l.frequency), l.multiplicity, cell(&classes_tag(&l.classes)));
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
