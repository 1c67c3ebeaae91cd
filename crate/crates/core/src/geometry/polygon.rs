//! Convex polygons on the gravity-aligned XZ plane.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// `(x, z)` on the horizontal plane.
pub type Vec2 = Vector2<f64>;

const EPS: f64 = 1e-12;

fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise vertex ring with no repeated closing vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Convex hull of `points` (Andrew's monotone chain). Collinear points
    /// are dropped.
    pub fn hull(points: &[Vec2]) -> Self {
        let mut pts: Vec<Vec2> = points
            .iter()
            .copied()
            .filter(|p| p.x.is_finite() && p.y.is_finite())
            .collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup_by(|a, b| (a.x - b.x).abs() < EPS && (a.y - b.y).abs() < EPS);
        if pts.len() < 3 {
            return Self { vertices: pts };
        }
        let mut lower: Vec<Vec2> = Vec::with_capacity(pts.len());
        for p in &pts {
            while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= EPS {
                lower.pop();
            }
            lower.push(*p);
        }
        let mut upper: Vec<Vec2> = Vec::with_capacity(pts.len());
        for p in pts.iter().rev() {
            while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= EPS {
                upper.pop();
            }
            upper.push(*p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        Self { vertices: lower }
    }

    /// Axis-aligned rectangle on the XZ plane.
    pub fn rect(min: Vec2, max: Vec2) -> Self {
        Self::hull(&[min, Vec2::new(max.x, min.y), max, Vec2::new(min.x, max.y)])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= EPS
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let twice: f64 = (0..n)
            .map(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                a.x * b.y - b.x * a.y
            })
            .sum();
        0.5 * twice.abs()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        if n == 0 {
            return Vec2::zeros();
        }
        let area = self.area();
        if area <= EPS {
            return self.vertices.iter().sum::<Vec2>() / n as f64;
        }
        let mut c = Vec2::zeros();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let w = a.x * b.y - b.x * a.y;
            c += (a + b) * w;
        }
        c / (6.0 * area)
    }

    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Inclusive of the boundary.
    pub fn contains(&self, p: &Vec2) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % n], p) >= -EPS)
    }

    /// Sutherland-Hodgman clip of `self` against the convex `clipper`.
    pub fn intersection(&self, clipper: &ConvexPolygon) -> ConvexPolygon {
        if self.vertices.len() < 3 || clipper.vertices.len() < 3 {
            return ConvexPolygon { vertices: vec![] };
        }
        let mut output = self.vertices.clone();
        let m = clipper.vertices.len();
        for i in 0..m {
            if output.is_empty() {
                break;
            }
            let a = clipper.vertices[i];
            let b = clipper.vertices[(i + 1) % m];
            let input = std::mem::take(&mut output);
            let k = input.len();
            for j in 0..k {
                let cur = input[j];
                let prev = input[(j + k - 1) % k];
                let cur_in = cross(&a, &b, &cur) >= -EPS;
                let prev_in = cross(&a, &b, &prev) >= -EPS;
                if cur_in {
                    if !prev_in {
                        output.push(segment_line_intersection(&prev, &cur, &a, &b));
                    }
                    output.push(cur);
                } else if prev_in {
                    output.push(segment_line_intersection(&prev, &cur, &a, &b));
                }
            }
        }
        ConvexPolygon::hull(&output)
    }

    pub fn intersection_area(&self, other: &ConvexPolygon) -> f64 {
        self.intersection(other).area()
    }

    /// True when the two polygons share positive area.
    pub fn overlaps(&self, other: &ConvexPolygon) -> bool {
        self.intersection_area(other) > EPS
    }

    /// Euclidean distance between the two regions; zero when they touch or
    /// overlap.
    pub fn distance(&self, other: &ConvexPolygon) -> f64 {
        if self.vertices.is_empty() || other.vertices.is_empty() {
            return f64::INFINITY;
        }
        if self.vertices.iter().any(|v| other.contains(v)) || other.vertices.iter().any(|v| self.contains(v)) {
            return 0.0;
        }
        let ea = self.edges();
        let eb = other.edges();
        if ea
            .iter()
            .any(|(a0, a1)| eb.iter().any(|(b0, b1)| segments_cross(a0, a1, b0, b1)))
        {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for v in &self.vertices {
            for (b0, b1) in &eb {
                best = best.min(point_segment_distance(v, b0, b1));
            }
        }
        for v in &other.vertices {
            for (a0, a1) in &ea {
                best = best.min(point_segment_distance(v, a0, a1));
            }
        }
        best
    }

    /// Uniform scale about the area centroid.
    pub fn scaled(&self, factor: f64) -> ConvexPolygon {
        let c = self.centroid();
        ConvexPolygon {
            vertices: self.vertices.iter().map(|v| c + (v - c) * factor).collect(),
        }
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max((a - b).norm());
            }
        }
        best
    }

    /// Width of the projection onto the unit direction `dir`.
    pub fn extent_along(&self, dir: &Vec2) -> f64 {
        let (lo, hi) = self
            .vertices
            .iter()
            .map(|v| v.dot(dir))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    fn edges(&self) -> Vec<(Vec2, Vec2)> {
        let n = self.vertices.len();
        (0..n).map(|i| (self.vertices[i], self.vertices[(i + 1) % n])).collect()
    }
}

fn segment_line_intersection(p: &Vec2, q: &Vec2, a: &Vec2, b: &Vec2) -> Vec2 {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let t = d1 / (d1 - d2);
    p + (q - p) * t
}

fn segments_cross(a0: &Vec2, a1: &Vec2, b0: &Vec2, b1: &Vec2) -> bool {
    let d1 = cross(b0, b1, a0);
    let d2 = cross(b0, b1, a1);
    let d3 = cross(a0, a1, b0);
    let d4 = cross(a0, a1, b1);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    fn sq(x0: f64, z0: f64, x1: f64, z1: f64) -> ConvexPolygon {
        ConvexPolygon::rect(Vec2::new(x0, z0), Vec2::new(x1, z1))
    }

    #[test]
    fn hull_drops_interior_points() {
        let h = ConvexPolygon::hull(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 0.5),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.5, 0.0),
        ]);
        assert_eq!(h.vertices().len(), 4);
        assert_abs_diff_eq!(h.area(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn clip_half_overlap() {
        let a = sq(0.0, 0.0, 2.0, 2.0);
        let b = sq(1.0, 0.0, 3.0, 2.0);
        assert_abs_diff_eq!(a.intersection_area(&b), 2.0, epsilon = 1e-12);
        assert!(a.overlaps(&b));
        assert!(!a.overlaps(&sq(5.0, 5.0, 6.0, 6.0)));
    }

    #[test]
    fn distance_between_rects() {
        let a = sq(0.0, 0.0, 1.0, 1.0);
        assert_abs_diff_eq!(a.distance(&sq(1.5, 0.0, 2.0, 1.0)), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.distance(&sq(2.0, 2.0, 3.0, 3.0)), 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(a.distance(&sq(0.5, 0.5, 3.0, 3.0)), 0.0);
        // Cross shape: no vertex inside the other, edges cross.
        assert_eq!(sq(-2.0, -0.5, 2.0, 0.5).distance(&sq(-0.5, -2.0, 0.5, 2.0)), 0.0);
    }

    #[test]
    fn scaled_about_centre() {
        let s = sq(0.0, 0.0, 0.5, 0.4).scaled(0.8);
        let (lo, hi) = s.bounds();
        assert_abs_diff_eq!(hi.x - lo.x, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(hi.y - lo.y, 0.32, epsilon = 1e-12);
        assert_abs_diff_eq!(s.centroid(), Vec2::new(0.25, 0.2), epsilon = 1e-12);
    }

    #[test]
    fn contains_boundary() {
        let a = sq(0.0, 0.0, 1.0, 1.0);
        assert!(a.contains(&Vec2::new(1.0, 0.5)));
        assert!(!a.contains(&Vec2::new(1.0001, 0.5)));
    }
}
