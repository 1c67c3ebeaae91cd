use serde::{Deserialize, Serialize};

use crate::defaults::Thresholds;
use crate::error::{Error, Result};
use crate::geometry::{footprint_overlap_ratio, ConvexPolygon, OrientedBox3};
use crate::scene::{ObjectInstance, SceneFrame};

/// Top face of a supporting object in the gravity-aligned frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlatformSurface {
    pub object_id: String,
    pub top_height: f64,
    pub footprint: ConvexPolygon,
}

impl PlatformSurface {
    pub fn new(object_id: impl Into<String>, top_height: f64, footprint: ConvexPolygon) -> Result<Self> {
        if footprint.is_degenerate() || footprint.area() <= 0.0 {
            return Err(Error::validation("platform.footprint", "must have positive area"));
        }
        Ok(Self {
            object_id: object_id.into(),
            top_height,
            footprint,
        })
    }

    pub fn from_box(object_id: impl Into<String>, obb: &OrientedBox3) -> Result<Self> {
        Self::new(object_id, obb.top(), obb.footprint())
    }
}

/// Surfaces of every object the frame lists as a platform.
pub fn frame_platforms(frame: &SceneFrame) -> Result<Vec<PlatformSurface>> {
    frame
        .platform_ids
        .iter()
        .map(|id| PlatformSurface::from_box(id, &frame.object(id)?.obb))
        .collect()
}

/// Platform whose top lies within the gap tolerance of the object's bottom
/// and covers enough of its footprint. The smallest gap wins; exact ties keep
/// the earlier platform.
pub fn find_supporting_platform<'a>(
    object: &ObjectInstance,
    platforms: &'a [PlatformSurface],
    t: &Thresholds,
) -> Option<&'a PlatformSurface> {
    let mut best: Option<(&PlatformSurface, f64)> = None;
    for p in platforms.iter().filter(|p| p.object_id != object.id) {
        let gap = (object.obb.bottom() - p.top_height).abs();
        if gap > t.platform_gap_m {
            continue;
        }
        let Ok(overlap) = footprint_overlap_ratio(&object.obb, &p.footprint) else {
            continue;
        };
        if overlap < t.platform_overlap {
            continue;
        }
        if best.is_none_or(|(_, g)| gap < g) {
            best = Some((p, gap));
        }
    }
    best.map(|(p, _)| p)
}

/// Platform under a possibly suspended object: the highest top at or below
/// its bottom (within the gap tolerance) that covers enough of its footprint.
pub fn find_platform_below<'a>(
    object: &ObjectInstance,
    platforms: &'a [PlatformSurface],
    t: &Thresholds,
) -> Option<&'a PlatformSurface> {
    let mut best: Option<&PlatformSurface> = None;
    for p in platforms.iter().filter(|p| p.object_id != object.id) {
        if p.top_height > object.obb.bottom() + t.platform_gap_m {
            continue;
        }
        match footprint_overlap_ratio(&object.obb, &p.footprint) {
            Ok(r) if r >= t.platform_overlap => {}
            _ => continue,
        }
        if best.is_none_or(|b| p.top_height > b.top_height) {
            best = Some(p);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point3, Vec2, Vec3};
    use crate::scene::fixtures::object;

    fn slab(id: &str, top: f64, half: f64) -> PlatformSurface {
        PlatformSurface::new(
            id,
            top,
            ConvexPolygon::rect(Vec2::new(-half, -half), Vec2::new(half, half)),
        )
        .unwrap()
    }

    fn resting(bottom: f64) -> ObjectInstance {
        let mut o = object("cup", "cup", [0.0, 0.0, 0.0], [0.05, 0.05, 0.05]);
        o.obb = OrientedBox3::upright(Point3::new(0.0, bottom + 0.05, 0.0), Vec3::new(0.05, 0.05, 0.05), 0.0);
        o
    }

    #[test]
    fn within_gap_and_overlap() {
        let ps = [slab("table", 0.72, 1.0)];
        assert_eq!(
            find_supporting_platform(&resting(0.75), &ps, &Thresholds::default())
                .unwrap()
                .object_id,
            "table"
        );
        let far = [slab("table", 0.67, 1.0)];
        assert!(find_supporting_platform(&resting(0.75), &far, &Thresholds::default()).is_none());
    }

    #[test]
    fn partial_overlap() {
        // 0.1 m cup whose footprint is 85% on a platform edge at x = 0.035
        let p = PlatformSurface::new(
            "shelf",
            0.72,
            ConvexPolygon::rect(Vec2::new(-1.0, -1.0), Vec2::new(0.035, 1.0)),
        )
        .unwrap();
        let ps = [p];
        assert!(find_supporting_platform(&resting(0.75), &ps, &Thresholds::default()).is_some());
        let q = PlatformSurface::new(
            "shelf",
            0.72,
            ConvexPolygon::rect(Vec2::new(-1.0, -1.0), Vec2::new(0.0, 1.0)),
        )
        .unwrap();
        assert!(find_supporting_platform(&resting(0.75), &[q], &Thresholds::default()).is_none());
    }

    #[test]
    fn smallest_gap_wins() {
        let ps = [slab("low", 0.71, 1.0), slab("high", 0.74, 1.0)];
        assert_eq!(
            find_supporting_platform(&resting(0.75), &ps, &Thresholds::default())
                .unwrap()
                .object_id,
            "high"
        );
    }

    #[test]
    fn platform_below_picks_nearest_top() {
        let ps = [slab("floor", 0.0, 3.0), slab("shelf", 0.4, 1.0)];
        assert_eq!(
            find_platform_below(&resting(0.9), &ps, &Thresholds::default())
                .unwrap()
                .object_id,
            "shelf"
        );
    }
}
