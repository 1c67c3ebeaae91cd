use serde::{Deserialize, Serialize};

use super::Point3;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx.is_finite() && self.fx > 0.0) {
            return Err(Error::validation(
                "intrinsics.fx",
                format!("must be > 0, got {}", self.fx),
            ));
        }
        if !(self.fy.is_finite() && self.fy > 0.0) {
            return Err(Error::validation(
                "intrinsics.fy",
                format!("must be > 0, got {}", self.fy),
            ));
        }
        if self.width == 0 {
            return Err(Error::validation("intrinsics.width", "must be >= 1"));
        }
        if self.height == 0 {
            return Err(Error::validation("intrinsics.height", "must be >= 1"));
        }
        if !(self.cx >= 0.0 && self.cx < f64::from(self.width)) {
            return Err(Error::validation(
                "intrinsics.cx",
                format!("must lie in [0, {}), got {}", self.width, self.cx),
            ));
        }
        if !(self.cy >= 0.0 && self.cy < f64::from(self.height)) {
            return Err(Error::validation(
                "intrinsics.cy",
                format!("must lie in [0, {}), got {}", self.height, self.cy),
            ));
        }
        Ok(())
    }

    /// Continuous pixel bounds: `0 <= u <= width - 1`, same for `v`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= f64::from(self.width - 1) && v <= f64::from(self.height - 1)
    }
}

/// An image point, either in pixels or normalised to `[0, 1]` by image size.
///
/// Normalisation is `x = u / width`, `y = v / height`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "lowercase")]
pub enum Point2 {
    Pixel { u: f64, v: f64 },
    Normalized { x: f64, y: f64 },
}

impl Point2 {
    pub fn pixel(u: f64, v: f64) -> Self {
        Point2::Pixel { u, v }
    }

    pub fn normalized(x: f64, y: f64) -> Result<Self> {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            return Err(Error::Domain(format!("normalized point ({x}, {y}) outside [0,1]^2")));
        }
        Ok(Point2::Normalized { x, y })
    }

    pub fn to_pixels(self, width: u32, height: u32) -> (f64, f64) {
        match self {
            Point2::Pixel { u, v } => (u, v),
            Point2::Normalized { x, y } => (x * f64::from(width), y * f64::from(height)),
        }
    }

    pub fn to_normalized(self, width: u32, height: u32) -> (f64, f64) {
        match self {
            Point2::Pixel { u, v } => (u / f64::from(width), v / f64::from(height)),
            Point2::Normalized { x, y } => (x, y),
        }
    }

    /// Integer pixel after half-up rounding, or `None` outside the image.
    pub fn pixel_index(self, width: u32, height: u32) -> Option<(u32, u32)> {
        let (u, v) = self.to_pixels(width, height);
        let (iu, iv) = ((u + 0.5).floor(), (v + 0.5).floor());
        if iu >= 0.0 && iv >= 0.0 && iu < f64::from(width) && iv < f64::from(height) {
            Some((iu as u32, iv as u32))
        } else {
            None
        }
    }
}

pub fn backproject(u: f64, v: f64, depth: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !k.contains(u, v) {
        return Err(Error::OutOfBounds {
            u,
            v,
            width: k.width,
            height: k.height,
        });
    }
    if !(depth >= 0.0) {
        return Err(Error::Domain(format!("negative depth {depth}")));
    }
    Ok(Point3::new((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth))
}

/// Projects a camera-frame point to pixels. The result may fall outside the
/// image; callers that care check [`CameraIntrinsics::contains`].
pub fn project(p: &Point3, k: &CameraIntrinsics) -> Result<(f64, f64)> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera(p.z));
    }
    Ok((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 1000, 800).unwrap()
    }

    #[test]
    fn backproject_principal_point() {
        let p = backproject(320.0, 240.0, 2.0, &k()).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn backproject_offset() {
        let p = backproject(820.0, 240.0, 2.0, &k()).unwrap();
        assert_abs_diff_eq!(p.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn backproject_hand_arithmetic() {
        // (100-320)/500*1.5 = -0.66, (700-240)/500*1.5 = 1.38
        let p = backproject(100.0, 700.0, 1.5, &k()).unwrap();
        assert_abs_diff_eq!(p.x, -0.66, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 1.38, epsilon = 1e-12);
        assert_abs_diff_eq!(p.z, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn backproject_errors() {
        assert!(matches!(
            backproject(-1.0, 0.0, 1.0, &k()),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            backproject(1000.0, 0.0, 1.0, &k()),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(backproject(10.0, 10.0, -0.1, &k()), Err(Error::Domain(_))));
    }

    #[test]
    fn project_examples() {
        assert_eq!(project(&Point3::new(0.0, 0.0, 2.0), &k()).unwrap(), (320.0, 240.0));
        assert_eq!(project(&Point3::new(2.0, 0.0, 2.0), &k()).unwrap(), (820.0, 240.0));
        assert!(matches!(
            project(&Point3::new(0.0, 0.0, 0.0), &k()),
            Err(Error::BehindCamera(_))
        ));
    }

    #[test]
    fn intrinsics_validation_names_field() {
        let err = CameraIntrinsics::new(0.0, 500.0, 320.0, 240.0, 640, 480).unwrap_err();
        assert!(err.to_string().contains("intrinsics.fx"));
        assert!(CameraIntrinsics::new(500.0, 500.0, 640.0, 240.0, 640, 480).is_err());
    }

    #[test]
    fn pixel_index_rounds_half_up() {
        assert_eq!(Point2::pixel(2.5, 3.49).pixel_index(10, 10), Some((3, 3)));
        assert_eq!(Point2::pixel(9.6, 0.0).pixel_index(10, 10), None);
        assert_eq!(Point2::Normalized { x: 0.25, y: 0.5 }.pixel_index(8, 4), Some((2, 2)));
    }
}
