use serde::{Deserialize, Serialize};

use crate::geometry::{backproject, DepthMap, OccupancyMap, Point2, Point3, Vec2, Vec3};
use crate::scene::SceneFrame;

/// A sampled point that passed the depth test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisiblePoint {
    /// Index into the region's sampled points.
    pub index: usize,
    pub u: f64,
    pub v: f64,
}

/// Depth at the pixel holding `(u, v)` agrees with `z`.
fn depth_consistent(u: f64, v: f64, z: f64, depth: &DepthMap, tolerance: f64) -> bool {
    let Some((pu, pv)) = Point2::pixel(u, v).pixel_index(depth.width(), depth.height()) else {
        return false;
    };
    depth.get(pu, pv).is_some_and(|d| (z - d).abs() <= tolerance)
}

/// Projects gravity-frame points into the image and keeps those whose
/// camera depth matches the depth map within `tolerance`.
pub fn filter_visible(points: &[Point3], frame: &SceneFrame, depth: &DepthMap, tolerance: f64) -> Vec<VisiblePoint> {
    let to_cam = frame.gravity_to_camera();
    let k = &frame.intrinsics;
    points
        .iter()
        .enumerate()
        .filter_map(|(index, p)| {
            let c = to_cam.apply(p);
            if c.z <= 0.0 {
                return None;
            }
            let u = k.fx * c.x / c.z + k.cx;
            let v = k.fy * c.y / c.z + k.cy;
            depth_consistent(u, v, c.z, depth, tolerance).then_some(VisiblePoint { index, u, v })
        })
        .collect()
}

/// Conditions a placement pixel must satisfy.
pub struct PlacementCheck<'a> {
    pub frame: &'a SceneFrame,
    pub depth: &'a DepthMap,
    pub region: &'a crate::geometry::ConvexPolygon,
    pub occupancy: &'a OccupancyMap,
    pub plane_height: f64,
    pub tolerance: f64,
}

impl PlacementCheck<'_> {
    /// Where the pixel's viewing ray meets the placement plane.
    pub fn ground_point(&self, u: f64, v: f64) -> Option<Point3> {
        let dir_cam = backproject(u, v, 1.0, &self.frame.intrinsics).ok()?.coords;
        let to_g = self.frame.camera_to_gravity();
        let origin = to_g.apply(&Point3::origin());
        let dir: Vec3 = to_g.apply_vector(&dir_cam);
        if dir.y.abs() < 1e-12 {
            return None;
        }
        let s = (self.plane_height - origin.y) / dir.y;
        (s > 0.0).then(|| origin + dir * s)
    }

    /// Integer pixel `(u, v)` lands in a Free cell of the region and its
    /// plane point agrees with the depth map.
    pub fn accepts(&self, u: f64, v: f64) -> bool {
        let Some(g) = self.ground_point(u, v) else {
            return false;
        };
        let xz = Vec2::new(g.x, g.z);
        if !self.region.contains(&xz) || !self.occupancy.is_free_at(&xz) {
            return false;
        }
        let z = self.frame.gravity_to_camera().apply(&g).z;
        depth_consistent(u, v, z, self.depth, self.tolerance)
    }
}

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// The mean visible pixel when it is acceptable, else the visible pixel
/// nearest that mean which is. Pixels are snapped to integers first.
pub fn select_placement_point(visible: &[VisiblePoint], check: &PlacementCheck<'_>) -> Option<(f64, f64)> {
    if visible.is_empty() {
        return None;
    }
    let n = visible.len() as f64;
    let mu = visible.iter().map(|p| p.u).sum::<f64>() / n;
    let mv = visible.iter().map(|p| p.v).sum::<f64>() / n;
    let mean = (round_half_up(mu), round_half_up(mv));
    if check.accepts(mean.0, mean.1) {
        return Some(mean);
    }
    let mut order: Vec<(f64, (f64, f64))> = visible
        .iter()
        .map(|p| {
            let d = (p.u - mu).powi(2) + (p.v - mv).powi(2);
            (d, (round_half_up(p.u), round_half_up(p.v)))
        })
        .collect();
    order.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1 .0.total_cmp(&b.1 .0))
            .then(a.1 .1.total_cmp(&b.1 .1))
    });
    order.into_iter().map(|(_, px)| px).find(|px| check.accepts(px.0, px.1))
}
