//! Field vectors, ⟨111⟩ orientation classes and the defect frames built on them.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::SpinError;

const AXIS_NORM_TOL: f64 = 1e-12;

/// A static field: amplitude in gauss along a unit axis of the cubic crystal frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagneticField {
    amplitude: f64,
    axis: Vector3<f64>,
}

impl MagneticField {
    /// Normalizes `axis`; rejects a zero axis or a negative amplitude.
    pub fn new(amplitude: f64, axis: Vector3<f64>) -> Result<Self, SpinError> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(SpinError::InvalidField(format!(
                "amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        let norm = axis.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(SpinError::InvalidField("field axis has zero length".into()));
        }
        let axis = axis / norm;
        debug_assert!((axis.norm() - 1.0).abs() < AXIS_NORM_TOL);
        Ok(MagneticField { amplitude, axis })
    }

    pub fn zero() -> Self {
        MagneticField {
            amplitude: 0.0,
            axis: Vector3::z(),
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    /// Same direction, different amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        MagneticField {
            amplitude,
            axis: self.axis,
        }
    }

    /// Cartesian field vector in gauss.
    pub fn vector(&self) -> Vector3<f64> {
        self.axis * self.amplitude
    }
}

/// Parses "100", "111", "1,-1,0" or "[0 1 1]" style axis strings.
pub fn parse_axis(text: &str) -> Result<Vector3<f64>, SpinError> {
    let cleaned: String = text
        .chars()
        .filter(|c| !matches!(c, '[' | ']' | '(' | ')'))
        .collect();
    let parts: Vec<&str> = cleaned
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect();
    let bad = || SpinError::InvalidField(format!("cannot parse axis '{text}'"));
    let comps: Vec<f64> = if parts.len() == 3 {
        parts
            .iter()
            .map(|p| p.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    } else if parts.len() == 1 {
        // Miller shorthand: "100", "1-10", "01-1".
        let mut digits = Vec::new();
        let mut neg = false;
        for c in parts[0].chars() {
            match c {
                '-' => neg = true,
                d if d.is_ascii_digit() => {
                    let v = d.to_digit(10).unwrap() as f64;
                    digits.push(if neg { -v } else { v });
                    neg = false;
                }
                _ => return Err(bad()),
            }
        }
        if digits.len() != 3 {
            return Err(bad());
        }
        digits
    } else {
        return Err(bad());
    };
    let v = Vector3::new(comps[0], comps[1], comps[2]);
    if v.norm() == 0.0 {
        return Err(bad());
    }
    Ok(v.normalize())
}

/// One of the four ⟨111⟩ body diagonals a trigonal defect can align with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrientationClass {
    label: u8,
}

impl OrientationClass {
    const AXES: [[f64; 3]; 4] = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];

    pub fn new(label: u8) -> Result<Self, SpinError> {
        if (1..=4).contains(&label) {
            Ok(OrientationClass { label })
        } else {
            Err(SpinError::InvalidOrientation(label))
        }
    }

    pub fn all() -> [OrientationClass; 4] {
        [1, 2, 3, 4].map(|label| OrientationClass { label })
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn symmetry_axis(&self) -> Vector3<f64> {
        let a = Self::AXES[(self.label - 1) as usize];
        Vector3::new(a[0], a[1], a[2]) / 3f64.sqrt()
    }

    /// Defect frame with z along the symmetry axis and x in a {110} mirror
    /// plane, e.g. x ∝ [1,1,-2] for the [111] class.
    pub fn frame(&self) -> DefectFrame {
        let a = Self::AXES[(self.label - 1) as usize];
        let z = self.symmetry_axis();
        let x = Vector3::new(a[0], a[1], -2.0 * a[2]).normalize();
        let y = z.cross(&x);
        DefectFrame::from_axes(x, y, z)
    }
}

/// Orthonormal frame attached to a defect; rows are the defect axes
/// expressed in crystal coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectFrame {
    to_defect: Matrix3<f64>,
}

impl DefectFrame {
    pub fn identity() -> Self {
        DefectFrame {
            to_defect: Matrix3::identity(),
        }
    }

    pub fn from_axes(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>) -> Self {
        DefectFrame {
            to_defect: Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]),
        }
    }

    /// Crystal-frame vector expressed in defect coordinates.
    pub fn to_defect(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.to_defect * v
    }

    /// Frame after rotating the crystal by `rot` (both defect axes and
    /// fields rotate together).
    pub fn rotated(&self, rot: &Rotation3<f64>) -> Self {
        DefectFrame {
            to_defect: self.to_defect * rot.matrix().transpose(),
        }
    }

    pub fn symmetry_axis(&self) -> Vector3<f64> {
        self.to_defect.row(2).transpose()
    }
}

/// Rotation by `angle` radians about `axis`.
pub fn rotation_about(axis: &Vector3<f64>, angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle)
}

/// Two unit vectors orthogonal to `axis` and to each other, (axis, u, v)
/// right-handed. The first is built from the crystal axis least aligned
/// with `axis`, taking z before y before x on ties.
pub fn transverse_basis(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = axis.normalize();
    let candidates = [Vector3::z(), Vector3::y(), Vector3::x()];
    let helper = candidates
        .iter()
        .copied()
        .min_by(|p, q| {
            a.dot(p)
                .abs()
                .partial_cmp(&a.dot(q).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    let w = (helper - a * a.dot(&helper)).normalize();
    let v = w.cross(&a);
    (v, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_classes_tetrahedral() {
        let classes = OrientationClass::all();
        let cos = -1.0 / 3.0;
        for i in 0..4 {
            assert!((classes[i].symmetry_axis().norm() - 1.0).abs() < 1e-15);
            for j in (i + 1)..4 {
                let d = classes[i].symmetry_axis().dot(&classes[j].symmetry_axis());
                assert!((d - cos).abs() < 1e-14, "{i} {j} {d}");
            }
        }
    }

    #[test]
    fn projection_on_100_identical() {
        let x = Vector3::x();
        for c in OrientationClass::all() {
            let p = c.symmetry_axis().dot(&x).abs();
            assert!((p - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn frames_are_orthonormal() {
        for c in OrientationClass::all() {
            let f = c.frame();
            let m = f.to_defect;
            assert!((m * m.transpose() - Matrix3::identity()).norm() < 1e-14);
            assert!((m.determinant() - 1.0).abs() < 1e-14);
            assert!((f.symmetry_axis() - c.symmetry_axis()).norm() < 1e-15);
        }
    }

    #[test]
    fn invalid_class_label() {
        assert!(OrientationClass::new(0).is_err());
        assert!(OrientationClass::new(5).is_err());
        assert_eq!(OrientationClass::new(3).unwrap().label(), 3);
    }

    #[test]
    fn field_axis_normalized() {
        let f = MagneticField::new(10.0, Vector3::new(1.0, 1.0, 1.0)).unwrap();
        assert!((f.axis().norm() - 1.0).abs() < AXIS_NORM_TOL);
        assert!(MagneticField::new(1.0, Vector3::zeros()).is_err());
        assert!(MagneticField::new(-1.0, Vector3::x()).is_err());
    }

    #[test]
    fn parses_axis_strings() {
        assert_eq!(parse_axis("100").unwrap(), Vector3::x());
        let a = parse_axis("[1,1,1]").unwrap();
        assert!((a - Vector3::repeat(1.0 / 3f64.sqrt())).norm() < 1e-15);
        let b = parse_axis("01-1").unwrap();
        assert!((b - Vector3::new(0.0, 1.0, -1.0).normalize()).norm() < 1e-15);
        assert!(parse_axis("12").is_err());
        assert!(parse_axis("000").is_err());
    }

    #[test]
    fn transverse_basis_right_handed() {
        for a in [Vector3::x(), Vector3::new(1.0, 1.0, 1.0).normalize()] {
            let (v, w) = transverse_basis(&a);
            assert!(v.dot(&a).abs() < 1e-15 && w.dot(&a).abs() < 1e-15);
            assert!((a.cross(&v) - w).norm() < 1e-14);
        }
        let (v, w) = transverse_basis(&Vector3::x());
        assert!((w - Vector3::z()).norm() < 1e-15);
        assert!((v - Vector3::y()).norm() < 1e-15);
    }
}
