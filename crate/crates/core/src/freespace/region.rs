use crate::defaults::Thresholds;
use crate::geometry::{ConvexPolygon, OccupancyMap, OrientedBox3, Point3, PointCloud, Vec2};
use crate::rng::CounterRng;

/// Arc vertices per 90° sector; the polygon is inscribed in the true sector.
const SECTOR_ARC_SEGMENTS: usize = 32;

/// Rejection sampling gives up after this many draws per requested point.
pub const MAX_ATTEMPTS_PER_SAMPLE: usize = 64;

pub fn sector_radius(target: &OrientedBox3, t: &Thresholds) -> f64 {
    target.footprint_diagonal().max(t.sector_radius_floor_m)
}

/// Circular sector with its apex at `apex`, opening `angle_deg` around
/// `direction`.
pub fn sector_polygon(apex: Vec2, direction: Vec2, radius: f64, angle_deg: f64) -> ConvexPolygon {
    let base = direction.y.atan2(direction.x);
    let half = angle_deg.to_radians() / 2.0;
    let mut pts = vec![apex];
    for k in 0..=SECTOR_ARC_SEGMENTS {
        let a = base - half + 2.0 * half * k as f64 / SECTOR_ARC_SEGMENTS as f64;
        pts.push(apex + Vec2::new(a.cos(), a.sin()) * radius);
    }
    ConvexPolygon::hull(&pts)
}

/// Sector around the target's footprint centroid, clipped to the platform.
pub fn directional_region(
    target: &OrientedBox3,
    direction: Vec2,
    platform: &ConvexPolygon,
    t: &Thresholds,
) -> ConvexPolygon {
    let fp = target.footprint();
    sector_polygon(fp.centroid(), direction, sector_radius(target, t), t.sector_angle_deg).intersection(platform)
}

/// The target's footprint shrunk about its centroid, clipped to the platform.
pub fn vertical_region(target: &OrientedBox3, platform: &ConvexPolygon, t: &Thresholds) -> ConvexPolygon {
    target.footprint().scaled(t.vertical_shrink).intersection(platform)
}

/// Convex span of both footprints, clipped to the platform.
pub fn between_region(a: &OrientedBox3, b: &OrientedBox3, platform: &ConvexPolygon) -> ConvexPolygon {
    let mut pts: Vec<Vec2> = a.footprint().vertices().to_vec();
    pts.extend_from_slice(b.footprint().vertices());
    ConvexPolygon::hull(&pts).intersection(platform)
}

/// Area of Free cells whose centres lie in `region`.
pub fn free_area(region: &ConvexPolygon, occupancy: &OccupancyMap) -> f64 {
    let n = occupancy
        .cells()
        .filter(|((i, j), s)| {
            matches!(s, crate::geometry::CellState::Free) && region.contains(&occupancy.cell_center(*i, *j))
        })
        .count();
    n as f64 * occupancy.cell_size().powi(2)
}

/// Draws up to `n` points uniformly inside `region` at `height`. The stream
/// depends only on the region and the generator, never on occupancy.
pub fn sample_in_region(region: &ConvexPolygon, height: f64, n: usize, rng: &mut CounterRng) -> PointCloud {
    let mut out = Vec::with_capacity(n);
    if region.is_degenerate() {
        return out;
    }
    let (lo, hi) = region.bounds();
    let mut attempts = 0;
    while out.len() < n && attempts < n * MAX_ATTEMPTS_PER_SAMPLE {
        attempts += 1;
        let p = Vec2::new(rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y));
        if region.contains(&p) {
            out.push(Point3::new(p.x, height, p.y));
        }
    }
    out
}

/// Keeps the points whose cell is Free.
pub fn drop_occupied(points: PointCloud, occupancy: &OccupancyMap) -> PointCloud {
    points
        .into_iter()
        .filter(|p| occupancy.is_free_at(&Vec2::new(p.x, p.z)))
        .collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn radius_from_diagonal_or_floor() {
        let t = Thresholds::default();
        let big = OrientedBox3::upright(Point3::origin(), Vec3::new(0.15, 0.1, 0.2), 0.0);
        assert_abs_diff_eq!(sector_radius(&big, &t), 0.5, epsilon = 1e-12);
        let small = OrientedBox3::upright(Point3::origin(), Vec3::new(0.05, 0.1, 0.05), 0.0);
        assert_abs_diff_eq!(sector_radius(&small, &t), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn sector_spans_quarter_turn() {
        let s = sector_polygon(Vec2::zeros(), Vec2::x(), 1.0, 90.0);
        // inscribed polygon area approaches pi/4
        assert!((s.area() - std::f64::consts::FRAC_PI_4).abs() < 2e-3);
        assert!(s.contains(&Vec2::new(0.5, 0.0)));
        assert!(!s.contains(&Vec2::new(-0.1, 0.0)));
        assert!(!s.contains(&Vec2::new(0.3, 0.4)));
    }

    #[test]
    fn vertical_shrink_is_linear() {
        let t = Thresholds::default();
        let b = OrientedBox3::upright(Point3::new(1.0, 0.5, 2.0), Vec3::new(0.25, 0.1, 0.2), 0.0);
        let big = ConvexPolygon::rect(Vec2::new(-5.0, -5.0), Vec2::new(5.0, 5.0));
        let (lo, hi) = vertical_region(&b, &big, &t).bounds();
        assert_abs_diff_eq!(hi.x - lo.x, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(hi.y - lo.y, 0.32, epsilon = 1e-12);
        assert_abs_diff_eq!((hi.x + lo.x) / 2.0, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_stays_inside() {
        let r = ConvexPolygon::hull(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]);
        let mut rng = CounterRng::new(3);
        let pts = sample_in_region(&r, 0.7, 500, &mut rng);
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|p| r.contains(&Vec2::new(p.x, p.z)) && p.y == 0.7));
    }
}
