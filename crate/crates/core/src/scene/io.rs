//! The scene-frame JSON schema.
//!
//! Matrices are 9 numbers in row-major order, vectors 3 numbers, `box2d` is
//! `[x_min, y_min, x_max, y_max]` in pixels.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{ObjectInstance, SceneFrame};
use crate::error::{Error, Result};
use crate::geometry::{AxisAlignedBox2, CameraIntrinsics, OrientedBox3, Point3, RigidTransform, Vec3};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformDto {
    pub rotation: [f64; 9],
    #[serde(default)]
    pub translation: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObbDto {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub rotation: [f64; 9],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectDto {
    pub id: String,
    pub category: String,
    #[serde(default)]
    pub color: Option<String>,
    #[serde(default)]
    pub caption: Option<String>,
    pub box2d: [f64; 4],
    #[serde(default)]
    pub mask_ref: Option<String>,
    pub obb: ObbDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point2d: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneDto {
    pub frame_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: TransformDto,
    pub gravity_rotation: TransformDto,
    pub depth_ref: String,
    pub objects: Vec<ObjectDto>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub platform_ids: Vec<String>,
}

fn mat(m: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(m)
}

fn rows(m: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[r * 3 + c] = m[(r, c)];
        }
    }
    out
}

impl From<&RigidTransform> for TransformDto {
    fn from(t: &RigidTransform) -> Self {
        Self {
            rotation: rows(&t.rotation),
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TransformDto {
    fn to_transform(&self, field: &str) -> Result<RigidTransform> {
        let t = RigidTransform {
            rotation: mat(&self.rotation),
            translation: Vec3::from(self.translation),
        };
        t.validate(&format!("{field}.rotation"))?;
        Ok(t)
    }
}

impl From<&ObjectInstance> for ObjectDto {
    fn from(o: &ObjectInstance) -> Self {
        Self {
            id: o.id.clone(),
            category: o.category.clone(),
            color: o.color.clone(),
            caption: o.caption.clone(),
            box2d: [o.box2d.x_min, o.box2d.y_min, o.box2d.x_max, o.box2d.y_max],
            mask_ref: o.mask_ref.clone(),
            obb: ObbDto {
                center: [o.obb.center.x, o.obb.center.y, o.obb.center.z],
                half_extents: [o.obb.half_extents.x, o.obb.half_extents.y, o.obb.half_extents.z],
                rotation: rows(&o.obb.rotation),
            },
            orientation: o.orientation.map(|v| [v.x, v.y, v.z]),
            point2d: Some([o.point2d.0, o.point2d.1]),
        }
    }
}

impl ObjectDto {
    pub fn to_instance(&self, field: &str) -> Result<ObjectInstance> {
        let [x0, y0, x1, y1] = self.box2d;
        let box2d = AxisAlignedBox2 {
            x_min: x0,
            y_min: y0,
            x_max: x1,
            y_max: y1,
        };
        box2d
            .validate()
            .map_err(|e| Error::validation(format!("{field}.box2d"), e.to_string()))?;
        let obj = ObjectInstance {
            id: self.id.clone(),
            category: self.category.clone(),
            color: self.color.clone(),
            caption: self.caption.clone(),
            box2d,
            mask_ref: self.mask_ref.clone(),
            obb: OrientedBox3 {
                center: Point3::from(self.obb.center),
                half_extents: Vec3::from(self.obb.half_extents),
                rotation: mat(&self.obb.rotation),
            },
            orientation: self.orientation.map(Vec3::from),
            point2d: self.point2d.map_or_else(|| box2d.center(), |[u, v]| (u, v)),
        };
        obj.validate(field)?;
        Ok(obj)
    }
}

impl From<&SceneFrame> for SceneDto {
    fn from(f: &SceneFrame) -> Self {
        Self {
            frame_id: f.frame_id.clone(),
            image_ref: f.image_ref.clone(),
            intrinsics: f.intrinsics,
            extrinsics: (&f.extrinsics).into(),
            gravity_rotation: (&f.gravity_rotation).into(),
            depth_ref: f.depth_ref.clone(),
            objects: f.objects.iter().map(ObjectDto::from).collect(),
            platform_ids: f.platform_ids.clone(),
        }
    }
}

impl SceneDto {
    pub fn to_frame(&self) -> Result<SceneFrame> {
        let objects = self
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| o.to_instance(&format!("objects[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let frame = SceneFrame {
            frame_id: self.frame_id.clone(),
            image_ref: self.image_ref.clone(),
            intrinsics: self.intrinsics,
            extrinsics: self.extrinsics.to_transform("extrinsics")?,
            gravity_rotation: self.gravity_rotation.to_transform("gravity_rotation")?,
            depth_ref: self.depth_ref.clone(),
            objects,
            platform_ids: self.platform_ids.clone(),
        };
        frame.validate()?;
        Ok(frame)
    }
}

pub fn scene_from_str(s: &str) -> Result<SceneFrame> {
    let dto: SceneDto = serde_json::from_str(s).map_err(|source| Error::Json {
        path: PathBuf::from("<scene>"),
        source,
    })?;
    dto.to_frame()
}

pub fn scene_to_string(frame: &SceneFrame) -> String {
    serde_json::to_string_pretty(&SceneDto::from(frame)).expect("scene serialises")
}

pub fn load_scene(path: &Path) -> Result<SceneFrame> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dto: SceneDto = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    dto.to_frame()
}

/// Resolves a reference stored in a file relative to that file's directory.
pub fn resolve_ref(base_file: &Path, reference: &str) -> PathBuf {
    let r = Path::new(reference);
    if r.is_absolute() {
        r.to_path_buf()
    } else {
        base_file.parent().unwrap_or_else(|| Path::new(".")).join(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::fixtures;

    const SCENE: &str = r#"{
      "frame_id": "f0",
      "intrinsics": {"fx": 500, "fy": 500, "cx": 320, "cy": 240, "width": 640, "height": 480},
      "extrinsics": {"rotation": [1,0,0, 0,-1,0, 0,0,-1], "translation": [0, 1.5, 3]},
      "gravity_rotation": {"rotation": [1,0,0, 0,1,0, 0,0,1], "translation": [0,0,0]},
      "depth_ref": "f0.depth",
      "objects": [
        {"id": "cup_0", "category": "cup", "color": "red", "caption": null,
         "box2d": [10, 10, 50, 60], "mask_ref": null,
         "obb": {"center": [0, 0.8, 0], "half_extents": [0.04, 0.05, 0.04], "rotation": [1,0,0,0,1,0,0,0,1]},
         "orientation": [1, 0, 0]}
      ]
    }"#;

    #[test]
    fn parses_schema() {
        let f = scene_from_str(SCENE).unwrap();
        assert_eq!(f.objects.len(), 1);
        assert_eq!(f.objects[0].point2d, (30.0, 35.0));
        assert_eq!(f.extrinsics.translation, Vec3::new(0.0, 1.5, 3.0));
    }

    #[test]
    fn zero_focal_length_names_field() {
        let bad = SCENE.replace("\"fx\": 500", "\"fx\": 0");
        let err = scene_from_str(&bad).unwrap_err();
        assert!(err.to_string().contains("intrinsics.fx"), "{err}");
    }

    #[test]
    fn bad_obb_rotation_names_object() {
        let bad = SCENE.replace("\"rotation\": [1,0,0,0,1,0,0,0,1]", "\"rotation\": [2,0,0,0,1,0,0,0,1]");
        let err = scene_from_str(&bad).unwrap_err();
        assert!(err.to_string().contains("objects[0].obb.rotation"), "{err}");
    }

    #[test]
    fn serialise_then_parse_is_identity() {
        let f = fixtures::frame(vec![fixtures::object("a", "cup", [0.0, 0.8, 0.0], [0.1, 0.1, 0.1])]);
        let back = scene_from_str(&scene_to_string(&f)).unwrap();
        assert_eq!(back, f);
    }
}
