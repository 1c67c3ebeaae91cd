use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::transform::check_rotation;
use super::{ConvexPolygon, Point3, Vec2, Vec3};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignedBox2 {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl AxisAlignedBox2 {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::validation("box2d", "coordinates must be finite"));
        }
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(Error::validation("box2d", "min corner exceeds max corner"));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x_min && u <= self.x_max && v >= self.y_min && v <= self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }
}

/// Intersection over union. Zero-area boxes score 0, even against
/// themselves.
pub fn box_iou_2d(a: &AxisAlignedBox2, b: &AxisAlignedBox2) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 || inter <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox3 {
    pub center: Point3,
    pub half_extents: Vec3,
    pub rotation: Matrix3<f64>,
}

impl OrientedBox3 {
    pub fn new(center: Point3, half_extents: Vec3, rotation: Matrix3<f64>) -> Result<Self> {
        let b = Self {
            center,
            half_extents,
            rotation,
        };
        b.validate("obb")?;
        Ok(b)
    }

    /// Box rotated by `yaw` radians about the vertical axis.
    pub fn upright(center: Point3, half_extents: Vec3, yaw: f64) -> Self {
        let rotation = *nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), yaw).matrix();
        Self {
            center,
            half_extents,
            rotation,
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !self.center.iter().all(|v| v.is_finite()) {
            return Err(Error::validation(format!("{field}.center"), "must be finite"));
        }
        if !self.half_extents.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::validation(
                format!("{field}.half_extents"),
                "every half extent must be > 0",
            ));
        }
        check_rotation(&self.rotation, &format!("{field}.rotation"))
    }

    pub fn corners(&self) -> [Point3; 8] {
        let mut out = [Point3::origin(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let s = Vec3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            );
            *c = self.center + self.rotation * self.half_extents.component_mul(&s);
        }
        out
    }

    /// Width of the box's projection on the unit direction `dir`.
    pub fn extent_along(&self, dir: &Vec3) -> f64 {
        (0..3)
            .map(|i| 2.0 * self.half_extents[i] * self.rotation.column(i).dot(dir).abs())
            .sum()
    }

    pub fn bottom(&self) -> f64 {
        self.center.y - 0.5 * self.extent_along(&Vec3::y())
    }

    pub fn top(&self) -> f64 {
        self.center.y + 0.5 * self.extent_along(&Vec3::y())
    }

    pub fn height(&self) -> f64 {
        self.extent_along(&Vec3::y())
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    /// Projection onto the XZ plane.
    pub fn footprint(&self) -> ConvexPolygon {
        let pts: Vec<Vec2> = self.corners().iter().map(|c| Vec2::new(c.x, c.z)).collect();
        ConvexPolygon::hull(&pts)
    }

    pub fn footprint_diagonal(&self) -> f64 {
        self.footprint().diameter()
    }

    /// Point containment with an outward tolerance in metres.
    pub fn contains(&self, p: &Point3, tol: f64) -> bool {
        let local = self.rotation.transpose() * (p - self.center);
        (0..3).all(|i| local[i].abs() <= self.half_extents[i] + tol)
    }

    /// Ray parameter of the first hit with `origin + t * dir`, `t > 0`.
    pub fn ray_hit(&self, origin: &Point3, dir: &Vec3) -> Option<f64> {
        let rt = self.rotation.transpose();
        let o = rt * (origin - self.center);
        let d = rt * dir;
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let h = self.half_extents[i];
            if d[i].abs() < 1e-15 {
                if o[i].abs() > h {
                    return None;
                }
            } else {
                let a = (-h - o[i]) / d[i];
                let b = (h - o[i]) / d[i];
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
                if t0 > t1 {
                    return None;
                }
            }
        }
        if t1 <= 0.0 {
            None
        } else if t0 > 0.0 {
            Some(t0)
        } else {
            Some(t1)
        }
    }
}

/// Share of the subject's footprint covered by `support`.
pub fn footprint_overlap_ratio(subject: &OrientedBox3, support: &ConvexPolygon) -> Result<f64> {
    let fp = subject.footprint();
    let area = fp.area();
    if area <= 1e-12 {
        return Err(Error::Domain("subject footprint has zero area".into()));
    }
    Ok((fp.intersection_area(support) / area).clamp(0.0, 1.0))
}
