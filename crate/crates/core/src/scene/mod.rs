//! Annotated scene frames and the 3D scene graphs built from them.

mod expressions;
mod graph;
pub mod io;
mod matching;
mod ordering;
mod relations;

pub use expressions::{
    generate_referring_expressions, generate_referring_expressions_seeded, ordinal_word, resolve_reference,
    ExpressionSet, ReferenceProgram, ReferringExpression, Tier,
};
pub use graph::{build_scene_graph, Edge, SceneGraph};
pub use matching::{match_boxes_bidirectional, LabeledBox, MatchResult, MatchedPair};
pub use ordering::{dominant_axis, rank_objects, Axis, DiversityThreshold, OrderDirection};
pub use relations::{evaluate_relation, Arity, RelationFamily, RelationValue, SpatialRelationKind, ValueKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project, AxisAlignedBox2, CameraIntrinsics, OrientedBox3, Point3, RigidTransform, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    pub category: String,
    pub color: Option<String>,
    /// Dense caption, e.g. "glossy ceramic mug at upper center".
    pub caption: Option<String>,
    pub box2d: AxisAlignedBox2,
    pub mask_ref: Option<String>,
    /// Gravity-aligned.
    pub obb: OrientedBox3,
    /// Semantic facing direction, unit length, camera frame.
    pub orientation: Option<Vec3>,
    /// Pixel coordinates of a point on the object.
    pub point2d: (f64, f64),
}

impl ObjectInstance {
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation(format!("{field}.id"), "must be non-empty"));
        }
        self.box2d
            .validate()
            .map_err(|e| Error::validation(format!("{field}.box2d"), e.to_string()))?;
        self.obb.validate(&format!("{field}.obb"))?;
        if let Some(o) = &self.orientation {
            let n = o.norm();
            if (n - 1.0).abs() > 1e-6 {
                return Err(Error::validation(
                    format!("{field}.orientation"),
                    format!("must have unit norm, got {n}"),
                ));
            }
        }
        if !self.box2d.contains(self.point2d.0, self.point2d.1) {
            return Err(Error::validation(format!("{field}.point2d"), "must lie inside box2d"));
        }
        Ok(())
    }

    /// Human-facing base phrase: the caption if any, else "the [color] category".
    pub fn base_phrase(&self) -> String {
        if let Some(c) = &self.caption {
            return c.clone();
        }
        match &self.color {
            Some(color) => format!("the {color} {}", self.category),
            None => format!("the {}", self.category),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFrame {
    pub frame_id: String,
    pub image_ref: Option<String>,
    pub intrinsics: CameraIntrinsics,
    /// Camera to world.
    pub extrinsics: RigidTransform,
    /// World to gravity-aligned (+Y up).
    pub gravity_rotation: RigidTransform,
    pub depth_ref: String,
    pub objects: Vec<ObjectInstance>,
    /// Objects whose top faces are supporting surfaces.
    pub platform_ids: Vec<String>,
}

impl SceneFrame {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.extrinsics.validate("extrinsics.rotation")?;
        self.gravity_rotation.validate("gravity_rotation.rotation")?;
        let mut seen = std::collections::BTreeSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            o.validate(&format!("objects[{i}]"))?;
            if !seen.insert(o.id.as_str()) {
                return Err(Error::validation(
                    format!("objects[{i}].id"),
                    format!("duplicate id `{}`", o.id),
                ));
            }
        }
        for (i, p) in self.platform_ids.iter().enumerate() {
            if !seen.contains(p.as_str()) {
                return Err(Error::validation(
                    format!("platform_ids[{i}]"),
                    format!("unknown object `{p}`"),
                ));
            }
        }
        Ok(())
    }

    pub fn object(&self, id: &str) -> Result<&ObjectInstance> {
        self.objects
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    pub fn is_platform(&self, id: &str) -> bool {
        self.platform_ids.iter().any(|p| p == id)
    }

    /// Camera frame to gravity-aligned frame.
    pub fn camera_to_gravity(&self) -> RigidTransform {
        self.extrinsics.then(&self.gravity_rotation)
    }

    pub fn gravity_to_camera(&self) -> RigidTransform {
        self.camera_to_gravity().inverse()
    }

    pub fn viewer(&self) -> ViewerFrame {
        ViewerFrame::from_camera(&self.camera_to_gravity())
    }

    /// Projects a gravity-aligned point; returns pixel coordinates and the
    /// camera-frame depth.
    pub fn project_gravity_point(&self, p: &Point3) -> Result<(f64, f64, f64)> {
        let c = self.gravity_to_camera().apply(p);
        let (u, v) = project(&c, &self.intrinsics)?;
        Ok((u, v, c.z))
    }

    /// Orientation of `obj` rotated into the gravity-aligned frame.
    pub fn orientation_in_gravity(&self, obj: &ObjectInstance) -> Result<Vec3> {
        obj.orientation
            .map(|o| self.camera_to_gravity().apply_vector(&o))
            .ok_or_else(|| Error::MissingAnnotation {
                object: obj.id.clone(),
                what: "orientation",
            })
    }
}

/// Horizontal axes as seen by the camera, expressed in the gravity-aligned
/// frame: `right` and `toward` (pointing back at the viewer) span the XZ
/// plane and `up` is +Y.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewerFrame {
    pub right: Vec3,
    pub up: Vec3,
    pub toward: Vec3,
}

impl ViewerFrame {
    pub fn from_camera(cam_to_gravity: &RigidTransform) -> Self {
        let up = Vec3::y();
        let flat = |v: Vec3| {
            let h = Vec3::new(v.x, 0.0, v.z);
            let n = h.norm();
            (n > 1e-9).then(|| h / n)
        };
        let right = flat(cam_to_gravity.apply_vector(&Vec3::x()))
            .or_else(|| flat(cam_to_gravity.apply_vector(&Vec3::z())).map(|f| f.cross(&up)))
            .unwrap_or_else(Vec3::x);
        let toward = right.cross(&up);
        Self { right, up, toward }
    }

    /// `(right, up, toward)` coordinates of a gravity-aligned point.
    pub fn coords(&self, p: &Point3) -> Vec3 {
        Vec3::new(
            p.coords.dot(&self.right),
            p.coords.dot(&self.up),
            p.coords.dot(&self.toward),
        )
    }
}
