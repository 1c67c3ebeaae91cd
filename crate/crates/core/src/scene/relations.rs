//! The spatial relation vocabulary and its predicates.
//!
//! Positional comparisons act on gravity-aligned OBB centres along one
//! viewer axis and require the separation to exceed
//! `max(position_margin_m, position_margin_frac * smaller extent)`, where the
//! extent is each box's projected width along that axis. That margin is
//! symmetric in the two objects, so `left(a, b) <=> right(b, a)` holds exactly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ObjectInstance, SceneFrame};
use crate::defaults::Thresholds;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialRelationKind {
    // position
    Left,
    Right,
    AboveWorld,
    BelowWorld,
    AboveCamera,
    BelowCamera,
    Front,
    Behind,
    Near,
    Far,
    Inside,
    Outside,
    Touching,
    Separated,
    Between,
    // orientation
    FacingToward,
    FacingAway,
    Horizontal,
    Vertical,
    RelativeAngle,
    // attribute
    Bigger,
    Smaller,
    Taller,
    Shorter,
    Wider,
    Thinner,
    // quantitative
    PointDepth,
    PairwiseDistance,
    ObjectWidth,
    ObjectHeight,
    // placement
    FreeSpaceDirectional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arity {
    Unary,
    Binary,
    Ternary,
}

impl Arity {
    /// Number of objects besides the subject.
    pub fn others(self) -> usize {
        match self {
            Arity::Unary => 0,
            Arity::Binary => 1,
            Arity::Ternary => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Boolean,
    Meters,
    Radians,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationFamily {
    Position,
    Orientation,
    Attribute,
    Quantitative,
    Placement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RelationValue {
    Bool(bool),
    Metric(f64),
}

impl RelationValue {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            RelationValue::Bool(b) => Some(b),
            RelationValue::Metric(_) => None,
        }
    }

    pub fn as_metric(self) -> Option<f64> {
        match self {
            RelationValue::Metric(m) => Some(m),
            RelationValue::Bool(_) => None,
        }
    }
}

use SpatialRelationKind as K;

impl SpatialRelationKind {
    pub const ALL: [SpatialRelationKind; 31] = [
        K::Left,
        K::Right,
        K::AboveWorld,
        K::BelowWorld,
        K::AboveCamera,
        K::BelowCamera,
        K::Front,
        K::Behind,
        K::Near,
        K::Far,
        K::Inside,
        K::Outside,
        K::Touching,
        K::Separated,
        K::Between,
        K::FacingToward,
        K::FacingAway,
        K::Horizontal,
        K::Vertical,
        K::RelativeAngle,
        K::Bigger,
        K::Smaller,
        K::Taller,
        K::Shorter,
        K::Wider,
        K::Thinner,
        K::PointDepth,
        K::PairwiseDistance,
        K::ObjectWidth,
        K::ObjectHeight,
        K::FreeSpaceDirectional,
    ];

    pub fn name(self) -> &'static str {
        match self {
            K::Left => "left",
            K::Right => "right",
            K::AboveWorld => "above-world",
            K::BelowWorld => "below-world",
            K::AboveCamera => "above-camera",
            K::BelowCamera => "below-camera",
            K::Front => "front",
            K::Behind => "behind",
            K::Near => "near",
            K::Far => "far",
            K::Inside => "inside",
            K::Outside => "outside",
            K::Touching => "touching",
            K::Separated => "separated",
            K::Between => "between",
            K::FacingToward => "facing-toward",
            K::FacingAway => "facing-away",
            K::Horizontal => "horizontal",
            K::Vertical => "vertical",
            K::RelativeAngle => "relative-angle",
            K::Bigger => "bigger",
            K::Smaller => "smaller",
            K::Taller => "taller",
            K::Shorter => "shorter",
            K::Wider => "wider",
            K::Thinner => "thinner",
            K::PointDepth => "point-depth",
            K::PairwiseDistance => "pairwise-distance",
            K::ObjectWidth => "object-width",
            K::ObjectHeight => "object-height",
            K::FreeSpaceDirectional => "free-space-directional",
        }
    }

    pub fn family(self) -> RelationFamily {
        match self {
            K::Left
            | K::Right
            | K::AboveWorld
            | K::BelowWorld
            | K::AboveCamera
            | K::BelowCamera
            | K::Front
            | K::Behind
            | K::Near
            | K::Far
            | K::Inside
            | K::Outside
            | K::Touching
            | K::Separated
            | K::Between => RelationFamily::Position,
            K::FacingToward | K::FacingAway | K::Horizontal | K::Vertical | K::RelativeAngle => {
                RelationFamily::Orientation
            }
            K::Bigger | K::Smaller | K::Taller | K::Shorter | K::Wider | K::Thinner => RelationFamily::Attribute,
            K::PointDepth | K::PairwiseDistance | K::ObjectWidth | K::ObjectHeight => RelationFamily::Quantitative,
            K::FreeSpaceDirectional => RelationFamily::Placement,
        }
    }

    pub fn arity(self) -> Arity {
        match self {
            K::Horizontal
            | K::Vertical
            | K::PointDepth
            | K::ObjectWidth
            | K::ObjectHeight
            | K::FreeSpaceDirectional => Arity::Unary,
            K::Between => Arity::Ternary,
            _ => Arity::Binary,
        }
    }

    pub fn value_kind(self) -> ValueKind {
        match self {
            K::RelativeAngle => ValueKind::Radians,
            K::PointDepth | K::PairwiseDistance | K::ObjectWidth | K::ObjectHeight => ValueKind::Meters,
            _ => ValueKind::Boolean,
        }
    }

    /// Whether the subject needs an orientation annotation.
    pub fn needs_subject_orientation(self) -> bool {
        matches!(
            self,
            K::FacingToward | K::FacingAway | K::Horizontal | K::Vertical | K::RelativeAngle
        )
    }

    /// Whether every other object also needs one.
    pub fn needs_other_orientation(self) -> bool {
        matches!(self, K::RelativeAngle)
    }

    /// The relation with subject and object swapped, for binary relations
    /// that have one.
    pub fn converse(self) -> Option<SpatialRelationKind> {
        Some(match self {
            K::Left => K::Right,
            K::Right => K::Left,
            K::AboveWorld => K::BelowWorld,
            K::BelowWorld => K::AboveWorld,
            K::AboveCamera => K::BelowCamera,
            K::BelowCamera => K::AboveCamera,
            K::Front => K::Behind,
            K::Behind => K::Front,
            K::Bigger => K::Smaller,
            K::Smaller => K::Bigger,
            K::Taller => K::Shorter,
            K::Shorter => K::Taller,
            K::Wider => K::Thinner,
            K::Thinner => K::Wider,
            K::Near => K::Near,
            K::Far => K::Far,
            K::Touching => K::Touching,
            K::Separated => K::Separated,
            _ => return None,
        })
    }
}

impl fmt::Display for SpatialRelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpatialRelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        K::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown relation `{s}`")))
    }
}

/// `cos 45°`: the facing cone half-angle.
const FACING_COS: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Orientation within 30° of the horizontal plane.
const HORIZONTAL_MAX_SIN: f64 = 0.5;
/// Orientation within 30° of the vertical.
const VERTICAL_MIN_COS: f64 = 0.866_025_403_784_438_6;

fn margin(a: &ObjectInstance, b: &ObjectInstance, dir: &Vec3, t: &Thresholds) -> f64 {
    let smaller = a.obb.extent_along(dir).min(b.obb.extent_along(dir));
    t.position_margin_m.max(t.position_margin_frac * smaller)
}

/// `a` exceeds `b` along `dir` by more than the margin.
fn beyond(a: &ObjectInstance, b: &ObjectInstance, dir: &Vec3, t: &Thresholds) -> bool {
    (a.obb.center - b.obb.center).dot(dir) > margin(a, b, dir, t)
}

fn exceeds(a: f64, b: f64, t: &Thresholds) -> bool {
    a - b > t.position_margin_m.max(t.position_margin_frac * a.min(b))
}

fn surface_gap(a: &ObjectInstance, b: &ObjectInstance) -> f64 {
    let dy = (a.obb.bottom() - b.obb.top())
        .max(b.obb.bottom() - a.obb.top())
        .max(0.0);
    let dxz = a.obb.footprint().distance(&b.obb.footprint());
    (dy * dy + dxz * dxz).sqrt()
}

fn near(a: &ObjectInstance, b: &ObjectInstance, t: &Thresholds) -> bool {
    let dist = (a.obb.center - b.obb.center).norm();
    let mean_diag = 0.5 * (a.obb.footprint_diagonal() + b.obb.footprint_diagonal());
    dist < t.near_factor * mean_diag
}

fn inside(a: &ObjectInstance, b: &ObjectInstance, t: &Thresholds) -> bool {
    a.obb.corners().iter().all(|c| b.obb.contains(c, t.position_margin_m))
}

fn between(a: &ObjectInstance, b: &ObjectInstance, c: &ObjectInstance) -> bool {
    let p = nalgebra::Vector2::new(a.obb.center.x, a.obb.center.z);
    let pb = nalgebra::Vector2::new(b.obb.center.x, b.obb.center.z);
    let pc = nalgebra::Vector2::new(c.obb.center.x, c.obb.center.z);
    let seg = pc - pb;
    let len2 = seg.norm_squared();
    if len2 < 1e-12 {
        return false;
    }
    let s = (p - pb).dot(&seg) / len2;
    if !(s > 0.0 && s < 1.0) {
        return false;
    }
    let off = (p - (pb + seg * s)).norm();
    off <= 0.25 * (b.obb.footprint_diagonal() + c.obb.footprint_diagonal())
}

fn unit(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        v
    }
}

/// Evaluates `relation(subject, others...)` on the frame's annotations.
pub fn evaluate_relation(
    frame: &SceneFrame,
    relation: SpatialRelationKind,
    subject: &str,
    others: &[&str],
    t: &Thresholds,
) -> Result<RelationValue> {
    let expected = relation.arity().others();
    if others.len() != expected {
        return Err(Error::Usage(format!(
            "relation `{relation}` takes {expected} other object(s), got {}",
            others.len()
        )));
    }
    if others.contains(&subject) || (others.len() == 2 && others[0] == others[1]) {
        return Err(Error::Usage(format!("relation `{relation}` needs distinct objects")));
    }
    let a = frame.object(subject)?;
    let objs = others.iter().map(|id| frame.object(id)).collect::<Result<Vec<_>>>()?;
    let view = frame.viewer();
    let cam_up = frame.camera_to_gravity().apply_vector(&-Vec3::y());

    let b = objs.first().copied();
    let pair = || b.expect("binary relation has one other object");
    use RelationValue::{Bool, Metric};
    Ok(match relation {
        K::Left => Bool(beyond(pair(), a, &view.right, t)),
        K::Right => Bool(beyond(a, pair(), &view.right, t)),
        K::AboveWorld => Bool(beyond(a, pair(), &view.up, t)),
        K::BelowWorld => Bool(beyond(pair(), a, &view.up, t)),
        K::AboveCamera => Bool(beyond(a, pair(), &cam_up, t)),
        K::BelowCamera => Bool(beyond(pair(), a, &cam_up, t)),
        K::Front => Bool(beyond(a, pair(), &view.toward, t)),
        K::Behind => Bool(beyond(pair(), a, &view.toward, t)),
        K::Near => Bool(near(a, pair(), t)),
        K::Far => Bool(!near(a, pair(), t)),
        K::Inside => Bool(inside(a, pair(), t)),
        K::Outside => Bool(!inside(a, pair(), t)),
        K::Touching => Bool(surface_gap(a, pair()) < t.touching_gap_m),
        K::Separated => Bool(surface_gap(a, pair()) >= t.touching_gap_m),
        K::Between => Bool(between(a, objs[0], objs[1])),
        K::FacingToward | K::FacingAway => {
            let o = frame.orientation_in_gravity(a)?;
            let to = unit(pair().obb.center - a.obb.center);
            let cos = unit(o).dot(&to);
            Bool(if relation == K::FacingToward {
                cos > FACING_COS
            } else {
                cos < -FACING_COS
            })
        }
        K::Horizontal => Bool(unit(frame.orientation_in_gravity(a)?).y.abs() < HORIZONTAL_MAX_SIN),
        K::Vertical => Bool(unit(frame.orientation_in_gravity(a)?).y.abs() > VERTICAL_MIN_COS),
        K::RelativeAngle => {
            let oa = unit(frame.orientation_in_gravity(a)?);
            let ob = unit(frame.orientation_in_gravity(pair())?);
            Metric(oa.dot(&ob).clamp(-1.0, 1.0).acos())
        }
        K::Bigger => Bool(a.obb.volume() > pair().obb.volume() * (1.0 + t.position_margin_frac)),
        K::Smaller => Bool(a.obb.volume() * (1.0 + t.position_margin_frac) < pair().obb.volume()),
        K::Taller => Bool(exceeds(a.obb.height(), pair().obb.height(), t)),
        K::Shorter => Bool(exceeds(pair().obb.height(), a.obb.height(), t)),
        K::Wider => Bool(exceeds(
            a.obb.extent_along(&view.right),
            pair().obb.extent_along(&view.right),
            t,
        )),
        K::Thinner => Bool(exceeds(
            pair().obb.extent_along(&view.right),
            a.obb.extent_along(&view.right),
            t,
        )),
        K::PointDepth => Metric(frame.gravity_to_camera().apply(&a.obb.center).z),
        K::PairwiseDistance => Metric((a.obb.center - pair().obb.center).norm()),
        K::ObjectWidth => Metric(a.obb.extent_along(&view.right)),
        K::ObjectHeight => Metric(a.obb.height()),
        K::FreeSpaceDirectional => Bool(crate::freespace::has_directional_free_space(frame, a, t)),
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::scene::fixtures::{frame, object};

    fn eval(f: &SceneFrame, r: K, s: &str, o: &[&str]) -> RelationValue {
        evaluate_relation(f, r, s, o, &Thresholds::default()).unwrap()
    }

    #[test]
    fn exactly_31_relations() {
        assert_eq!(K::ALL.len(), 31);
        let names: std::collections::BTreeSet<_> = K::ALL.iter().map(|k| k.name()).collect();
        assert_eq!(names.len(), 31);
        for k in K::ALL {
            assert_eq!(k.name().parse::<K>().unwrap(), k);
        }
    }

    #[test]
    fn left_by_sign_of_dx() {
        let f = frame(vec![
            object("a", "cup", [-0.5, 0.8, 0.0], [0.05, 0.05, 0.05]),
            object("b", "cup", [0.5, 0.8, 0.0], [0.05, 0.05, 0.05]),
        ]);
        assert_eq!(eval(&f, K::Left, "a", &["b"]), RelationValue::Bool(true));
        assert_eq!(eval(&f, K::Right, "a", &["b"]), RelationValue::Bool(false));
        assert_eq!(eval(&f, K::Right, "b", &["a"]), RelationValue::Bool(true));
    }

    #[test]
    fn pairwise_distance_euclidean() {
        let f = frame(vec![
            object("a", "cup", [0.0, 0.0, 1.0], [0.05, 0.05, 0.05]),
            object("b", "cup", [0.0, 0.0, 3.0], [0.05, 0.05, 0.05]),
        ]);
        assert_abs_diff_eq!(
            eval(&f, K::PairwiseDistance, "a", &["b"]).as_metric().unwrap(),
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn taller_by_vertical_extent() {
        let f = frame(vec![
            object("a", "lamp", [0.0, 0.5, 0.0], [0.1, 0.5, 0.1]),
            object("b", "box", [1.0, 0.25, 0.0], [0.1, 0.25, 0.1]),
        ]);
        assert_eq!(eval(&f, K::Taller, "a", &["b"]), RelationValue::Bool(true));
        assert_eq!(eval(&f, K::Shorter, "b", &["a"]), RelationValue::Bool(true));
    }

    #[test]
    fn within_margin_neither_side() {
        let f = frame(vec![
            object("a", "cup", [0.0, 0.8, 0.0], [0.05, 0.05, 0.05]),
            object("b", "cup", [0.005, 0.8, 0.0], [0.05, 0.05, 0.05]),
        ]);
        assert_eq!(eval(&f, K::Left, "a", &["b"]), RelationValue::Bool(false));
        assert_eq!(eval(&f, K::Right, "a", &["b"]), RelationValue::Bool(false));
    }

    #[test]
    fn front_is_toward_viewer() {
        // The fixture camera sits at +Z.
        let f = frame(vec![
            object("near", "cup", [0.0, 0.8, 0.5], [0.05, 0.05, 0.05]),
            object("far", "cup", [0.0, 0.8, -0.5], [0.05, 0.05, 0.05]),
        ]);
        assert_eq!(eval(&f, K::Front, "near", &["far"]), RelationValue::Bool(true));
        assert_eq!(eval(&f, K::Behind, "far", &["near"]), RelationValue::Bool(true));
    }

    #[test]
    fn touching_and_inside() {
        let f = frame(vec![
            object("a", "box", [0.0, 0.1, 0.0], [0.1, 0.1, 0.1]),
            object("b", "box", [0.205, 0.1, 0.0], [0.1, 0.1, 0.1]),
            object("c", "ball", [0.0, 0.1, 0.0], [0.02, 0.02, 0.02]),
        ]);
        assert_eq!(eval(&f, K::Touching, "a", &["b"]), RelationValue::Bool(true));
        assert_eq!(eval(&f, K::Inside, "c", &["a"]), RelationValue::Bool(true));
        assert_eq!(eval(&f, K::Outside, "a", &["c"]), RelationValue::Bool(true));
    }

    #[test]
    fn between_on_segment() {
        let f = frame(vec![
            object("m", "cup", [0.0, 0.8, 0.0], [0.03, 0.03, 0.03]),
            object("l", "box", [-0.4, 0.8, 0.0], [0.1, 0.1, 0.1]),
            object("r", "box", [0.4, 0.8, 0.02], [0.1, 0.1, 0.1]),
        ]);
        assert_eq!(eval(&f, K::Between, "m", &["l", "r"]), RelationValue::Bool(true));
        assert_eq!(eval(&f, K::Between, "l", &["m", "r"]), RelationValue::Bool(false));
    }

    #[test]
    fn arity_and_annotation_errors() {
        let f = frame(vec![
            object("a", "cup", [0.0, 0.8, 0.0], [0.05, 0.05, 0.05]),
            object("b", "cup", [0.5, 0.8, 0.0], [0.05, 0.05, 0.05]),
        ]);
        let t = Thresholds::default();
        assert!(matches!(
            evaluate_relation(&f, K::Left, "a", &[], &t),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            evaluate_relation(&f, K::FacingToward, "a", &["b"], &t),
            Err(Error::MissingAnnotation { .. })
        ));
        assert!(matches!(
            evaluate_relation(&f, K::Left, "a", &["zz"], &t),
            Err(Error::UnknownObject(_))
        ));
    }

    #[test]
    fn facing_uses_camera_frame_orientation() {
        let mut a = object("a", "mug", [0.0, 0.8, 0.0], [0.05, 0.05, 0.05]);
        // Camera +X is gravity +X for the fixture camera.
        a.orientation = Some(Vec3::x());
        let f = frame(vec![a, object("b", "cup", [0.5, 0.8, 0.0], [0.05, 0.05, 0.05])]);
        assert_eq!(eval(&f, K::FacingToward, "a", &["b"]), RelationValue::Bool(true));
        assert_eq!(eval(&f, K::FacingAway, "a", &["b"]), RelationValue::Bool(false));
        assert_eq!(eval(&f, K::Horizontal, "a", &[]), RelationValue::Bool(true));
    }
}
