use nalgebra::{Matrix3, Rotation3, Unit};
use serde::{Deserialize, Serialize};

use super::{Point3, PointCloud, Vec3};
use crate::error::{Error, Result};

const ROTATION_TOL: f64 = 1e-6;

/// `p' = rotation * p + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let t = Self { rotation, translation };
        t.validate("rotation")?;
        Ok(t)
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Result<Self> {
        Self::new(rotation, Vec3::zeros())
    }

    /// Checks orthonormality and a +1 determinant. `field` names the
    /// offending value in the error.
    pub fn validate(&self, field: &str) -> Result<()> {
        check_rotation(&self.rotation, field)?;
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::validation(field, "translation must be finite"));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `other` after `self`: `p -> other(self(p))`.
    pub fn then(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: other.rotation * self.rotation,
            translation: other.rotation * self.translation + other.translation,
        }
    }
}

pub(crate) fn check_rotation(r: &Matrix3<f64>, field: &str) -> Result<()> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::validation(field, "entries must be finite"));
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > ROTATION_TOL {
        return Err(Error::validation(
            field,
            format!("not orthonormal (max |RᵀR - I| = {err:.3e})"),
        ));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOL {
        return Err(Error::validation(field, format!("determinant {det} is not +1")));
    }
    Ok(())
}

pub fn gravity_align(points: &[Point3], g_rot: &RigidTransform) -> Result<PointCloud> {
    g_rot.validate("gravity_rotation")?;
    Ok(points.iter().map(|p| g_rot.apply(p)).collect())
}

/// The rotation taking the measured gravity direction onto `(0, -1, 0)`.
pub fn rotation_aligning_gravity(gravity: &Vec3) -> Result<RigidTransform> {
    let norm = gravity.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Domain("gravity vector must be non-zero".into()));
    }
    let g = gravity / norm;
    let down = -Vec3::y();
    let rot = match Rotation3::rotation_between(&g, &down) {
        Some(r) => r,
        // Antiparallel: any half turn about a horizontal axis works.
        None => Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::x()), std::f64::consts::PI),
    };
    RigidTransform::from_rotation(*rot.matrix())
}
