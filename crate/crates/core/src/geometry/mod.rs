//! Camera model, rigid transforms, depth maps and the 2D/3D box math every
//! other module builds on.
//!
//! Frame conventions: the camera frame is +X right, +Y down, +Z forward.
//! The gravity-aligned frame is +Y up, and object footprints live on its XZ
//! plane, written here as `(x, z)` pairs.

mod boxes;
mod camera;
mod image;
mod occupancy;
mod polygon;
mod transform;

pub use boxes::{box_iou_2d, footprint_overlap_ratio, AxisAlignedBox2, OrientedBox3};
pub use camera::{backproject, project, CameraIntrinsics, Point2};
pub use image::{point_cloud_from_mask, DepthMap, Mask};
pub use occupancy::{build_occupancy_map, CellState, OccupancyMap};
pub use polygon::{ConvexPolygon, Vec2};
pub use transform::{gravity_align, rotation_aligning_gravity, RigidTransform};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type PointCloud = Vec<Point3>;
