//! Reference implementations used as oracles by the integration tests.
//! They work from raw coordinates and avoid the library's own helpers.

#![allow(dead_code)]

use nalgebra::{Matrix3, Point3, Vector2, Vector3};
use spatial_core::geometry::OrientedBox3;
use spatial_core::scene::{ObjectInstance, SceneFrame};
use spatial_core::Thresholds;

pub type V2 = Vector2<f64>;
pub type V3 = Vector3<f64>;

/// One PASS/FAIL line per criterion, then fail the test on FAIL.
pub fn report(name: &str, failures: &[String], detail: &str) {
    if failures.is_empty() {
        println!("PASS  {name}: {detail}");
    } else {
        println!("FAIL  {name}: {} failure(s); first: {}", failures.len(), failures[0]);
        panic!("{name} failed: {:#?}", &failures[..failures.len().min(10)]);
    }
}

/// Camera-to-gravity rotation and translation, composed by hand.
pub fn cam_to_gravity(frame: &SceneFrame) -> (Matrix3<f64>, V3) {
    let (e, g) = (&frame.extrinsics, &frame.gravity_rotation);
    (g.rotation * e.rotation, g.rotation * e.translation + g.translation)
}

pub fn to_camera(frame: &SceneFrame, p: &V3) -> V3 {
    let (r, t) = cam_to_gravity(frame);
    r.transpose() * (p - t)
}

pub fn corners(b: &OrientedBox3) -> Vec<V3> {
    let mut out = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let local = V3::new(sx * b.half_extents.x, sy * b.half_extents.y, sz * b.half_extents.z);
                out.push(b.center.coords + b.rotation * local);
            }
        }
    }
    out
}

/// Full width of the box measured along `dir` via its corners.
pub fn extent(b: &OrientedBox3, dir: &V3) -> f64 {
    let d: Vec<f64> = corners(b).iter().map(|c| c.dot(dir)).collect();
    d.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - d.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn cross2(o: V2, a: V2, b: V2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull (monotone chain).
pub fn hull(points: &[V2]) -> Vec<V2> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut lower: Vec<V2> = Vec::new();
    for q in &p {
        while lower.len() >= 2 && cross2(lower[lower.len() - 2], lower[lower.len() - 1], *q) <= 0.0 {
            lower.pop();
        }
        lower.push(*q);
    }
    let mut upper: Vec<V2> = Vec::new();
    for q in p.iter().rev() {
        while upper.len() >= 2 && cross2(upper[upper.len() - 2], upper[upper.len() - 1], *q) <= 0.0 {
            upper.pop();
        }
        upper.push(*q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn footprint(b: &OrientedBox3) -> Vec<V2> {
    hull(&corners(b).iter().map(|c| V2::new(c.x, c.z)).collect::<Vec<_>>())
}

/// Closed containment in a counter-clockwise convex polygon.
pub fn poly_contains(poly: &[V2], p: &V2, eps: f64) -> bool {
    if poly.len() < 3 {
        return false;
    }
    (0..poly.len()).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let e = b - a;
        let len = e.norm();
        len == 0.0 || cross2(a, b, *p) / len >= -eps
    })
}

pub fn poly_area(poly: &[V2]) -> f64 {
    (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        / 2.0
}

fn seg_dist(p: V2, a: V2, b: V2) -> f64 {
    let ab = b - a;
    let s = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * s)).norm()
}

fn separated_on_axis(a: &[V2], b: &[V2], axis: V2) -> bool {
    let pa: Vec<f64> = a.iter().map(|p| p.dot(&axis)).collect();
    let pb: Vec<f64> = b.iter().map(|p| p.dot(&axis)).collect();
    let (amin, amax) = (
        pa.iter().cloned().fold(f64::INFINITY, f64::min),
        pa.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (bmin, bmax) = (
        pb.iter().cloned().fold(f64::INFINITY, f64::min),
        pb.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    amax < bmin || bmax < amin
}

/// Euclidean distance between convex polygons; 0 when they intersect.
pub fn poly_distance(a: &[V2], b: &[V2]) -> f64 {
    let edges = |p: &[V2]| -> Vec<V2> {
        (0..p.len())
            .map(|i| {
                let e = p[(i + 1) % p.len()] - p[i];
                V2::new(-e.y, e.x)
            })
            .collect()
    };
    let apart = edges(a)
        .into_iter()
        .chain(edges(b))
        .any(|ax| separated_on_axis(a, b, ax));
    if !apart {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (p, q) in [(a, b), (b, a)] {
        for v in p {
            for i in 0..q.len() {
                best = best.min(seg_dist(*v, q[i], q[(i + 1) % q.len()]));
            }
        }
    }
    best
}

pub fn diameter(poly: &[V2]) -> f64 {
    let mut d: f64 = 0.0;
    for a in poly {
        for b in poly {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Viewer axes: horizontal camera right, world up, and their cross product
/// (pointing back toward the viewer).
pub fn viewer_axes(frame: &SceneFrame) -> (V3, V3, V3) {
    let (r, _) = cam_to_gravity(frame);
    let x = r * V3::x();
    let right = V3::new(x.x, 0.0, x.z).normalize();
    let up = V3::y();
    (right, up, right.cross(&up))
}

fn volume(b: &OrientedBox3) -> f64 {
    8.0 * b.half_extents.product()
}

/// Boolean relations computed from coordinates alone, keyed by name.
pub fn relation_oracle(
    frame: &SceneFrame,
    a: &ObjectInstance,
    b: &ObjectInstance,
    t: &Thresholds,
) -> Vec<(&'static str, bool)> {
    let (right, up, toward) = viewer_axes(frame);
    let (r, _) = cam_to_gravity(frame);
    let cam_up = r * -V3::y();
    let d = a.obb.center - b.obb.center;
    let beyond = |dir: &V3, sign: f64| {
        let m = t
            .position_margin_m
            .max(t.position_margin_frac * extent(&a.obb, dir).min(extent(&b.obb, dir)));
        sign * d.dot(dir) > m
    };
    let exceeds = |x: f64, y: f64| x - y > t.position_margin_m.max(t.position_margin_frac * x.min(y));

    let (fa, fb) = (footprint(&a.obb), footprint(&b.obb));
    let near = d.norm() < t.near_factor * 0.5 * (diameter(&fa) + diameter(&fb));
    let (ha, hb) = (extent(&a.obb, &V3::y()), extent(&b.obb, &V3::y()));
    let (bot_a, top_a) = (a.obb.center.y - ha / 2.0, a.obb.center.y + ha / 2.0);
    let (bot_b, top_b) = (b.obb.center.y - hb / 2.0, b.obb.center.y + hb / 2.0);
    let dy = (bot_a - top_b).max(bot_b - top_a).max(0.0);
    let dxz = poly_distance(&fa, &fb);
    let touching = (dy * dy + dxz * dxz).sqrt() < t.touching_gap_m;
    let inside = corners(&a.obb).iter().all(|c| {
        let local = b.obb.rotation.transpose() * (c - b.obb.center.coords);
        (0..3).all(|i| local[i].abs() <= b.obb.half_extents[i] + t.position_margin_m)
    });
    let (va, vb) = (volume(&a.obb), volume(&b.obb));
    let (wa, wb) = (extent(&a.obb, &right), extent(&b.obb, &right));
    vec![
        ("left", beyond(&right, -1.0)),
        ("right", beyond(&right, 1.0)),
        ("above-world", beyond(&up, 1.0)),
        ("below-world", beyond(&up, -1.0)),
        ("above-camera", beyond(&cam_up, 1.0)),
        ("below-camera", beyond(&cam_up, -1.0)),
        ("front", beyond(&toward, 1.0)),
        ("behind", beyond(&toward, -1.0)),
        ("near", near),
        ("far", !near),
        ("inside", inside),
        ("outside", !inside),
        ("touching", touching),
        ("separated", !touching),
        ("bigger", va > vb * (1.0 + t.position_margin_frac)),
        ("smaller", va * (1.0 + t.position_margin_frac) < vb),
        ("taller", exceeds(ha, hb)),
        ("shorter", exceeds(hb, ha)),
        ("wider", exceeds(wa, wb)),
        ("thinner", exceeds(wb, wa)),
    ]
}

pub fn oracle_relation(
    frame: &SceneFrame,
    a: &ObjectInstance,
    b: &ObjectInstance,
    name: &str,
    t: &Thresholds,
) -> Option<bool> {
    relation_oracle(frame, a, b, t)
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, v)| v)
}

/// Facing toward `b`: orientation (camera frame) mapped into the gravity
/// frame lies within 45° of the direction to `b`.
pub fn oracle_facing(frame: &SceneFrame, a: &ObjectInstance, b: &ObjectInstance) -> Option<bool> {
    let o = a.orientation?;
    let (r, _) = cam_to_gravity(frame);
    let og = (r * o).normalize();
    let to = (b.obb.center - a.obb.center).normalize();
    Some(og.dot(&to) > std::f64::consts::FRAC_1_SQRT_2)
}

/// Pixel through which the camera sees gravity-frame point `p`.
pub fn project(frame: &SceneFrame, p: &V3) -> Option<(f64, f64, f64)> {
    let c = to_camera(frame, p);
    let k = &frame.intrinsics;
    (c.z > 0.0).then(|| (k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy, c.z))
}

/// Where the viewing ray of pixel `(u, v)` meets the plane `y = height`.
pub fn ray_plane(frame: &SceneFrame, u: f64, v: f64, height: f64) -> Option<V3> {
    let k = &frame.intrinsics;
    let (r, t) = cam_to_gravity(frame);
    let dir = r * V3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
    if dir.y.abs() < 1e-12 {
        return None;
    }
    let s = (height - t.y) / dir.y;
    (s > 0.0).then(|| t + dir * s)
}

pub fn point3(v: &V3) -> Point3<f64> {
    Point3::from(*v)
}

/// Half-up rounding to three decimals, as the generators round points.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0 + 0.5).floor() / 1000.0
}
