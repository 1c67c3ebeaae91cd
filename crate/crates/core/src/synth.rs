//! Procedural tabletop scenes with ray-cast depth and instance masks, used as
//! fixtures for the pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, Unit};

use crate::error::{Error, Result};
use crate::geometry::{
    backproject, project, AxisAlignedBox2, CameraIntrinsics, DepthMap, Mask, OrientedBox3, Point3, RigidTransform, Vec3,
};
use crate::rng::CounterRng;
use crate::scene::{io, ObjectInstance, SceneFrame};

pub const TABLE_HEIGHT: f64 = 0.75;
const MIN_VISIBLE_PIXELS: usize = 50;
const LAYOUT_ATTEMPTS: usize = 40;
const OBJECT_CLEARANCE: f64 = 0.02;

#[derive(Clone, Copy, Debug)]
struct Kind {
    name: &'static str,
    /// (min, max) half extents along x, y, z.
    half: [(f64, f64); 3],
    oriented: bool,
    stackable_base: bool,
}

const KINDS: &[Kind] = &[
    Kind {
        name: "cup",
        half: [(0.035, 0.045), (0.045, 0.06), (0.035, 0.045)],
        oriented: false,
        stackable_base: false,
    },
    Kind {
        name: "mug",
        half: [(0.04, 0.05), (0.045, 0.055), (0.04, 0.05)],
        oriented: true,
        stackable_base: false,
    },
    Kind {
        name: "bottle",
        half: [(0.03, 0.04), (0.10, 0.14), (0.03, 0.04)],
        oriented: false,
        stackable_base: false,
    },
    Kind {
        name: "bowl",
        half: [(0.06, 0.09), (0.03, 0.045), (0.06, 0.09)],
        oriented: false,
        stackable_base: false,
    },
    Kind {
        name: "book",
        half: [(0.07, 0.10), (0.012, 0.025), (0.10, 0.13)],
        oriented: false,
        stackable_base: true,
    },
    Kind {
        name: "box",
        half: [(0.06, 0.12), (0.04, 0.10), (0.06, 0.12)],
        oriented: false,
        stackable_base: true,
    },
    Kind {
        name: "apple",
        half: [(0.035, 0.045), (0.035, 0.045), (0.035, 0.045)],
        oriented: false,
        stackable_base: false,
    },
    Kind {
        name: "phone",
        half: [(0.035, 0.04), (0.005, 0.008), (0.07, 0.08)],
        oriented: true,
        stackable_base: false,
    },
    Kind {
        name: "laptop",
        half: [(0.15, 0.18), (0.01, 0.012), (0.11, 0.13)],
        oriented: true,
        stackable_base: true,
    },
    Kind {
        name: "keyboard",
        half: [(0.20, 0.23), (0.012, 0.018), (0.06, 0.08)],
        oriented: true,
        stackable_base: false,
    },
    Kind {
        name: "mouse",
        half: [(0.028, 0.032), (0.016, 0.02), (0.045, 0.055)],
        oriented: true,
        stackable_base: false,
    },
    Kind {
        name: "plate",
        half: [(0.10, 0.13), (0.01, 0.015), (0.10, 0.13)],
        oriented: false,
        stackable_base: false,
    },
];

const COLORS: &[&str] = &["red", "blue", "green", "white", "black", "yellow", "gray", "brown"];

#[derive(Clone, Copy, Debug)]
pub struct SynthConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            min_objects: 3,
            max_objects: 10,
            width: 640,
            height: 480,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub frame: SceneFrame,
    pub depth: DepthMap,
    pub masks: BTreeMap<String, Mask>,
}

impl SyntheticScene {
    /// Writes `<frame_id>.json`, the raw depth map and one PNG mask per
    /// object into `dir`. Returns the scene file path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let id = &self.frame.frame_id;
        self.depth.save_raw(&dir.join(&self.frame.depth_ref))?;
        for o in &self.frame.objects {
            if let (Some(r), Some(m)) = (&o.mask_ref, self.masks.get(&o.id)) {
                m.save(&dir.join(r))?;
            }
        }
        let path = dir.join(format!("{id}.json"));
        std::fs::write(&path, io::scene_to_string(&self.frame)).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

struct Placed {
    id: String,
    kind: Kind,
    color: &'static str,
    obb: OrientedBox3,
}

fn draw_half(kind: &Kind, rng: &mut CounterRng) -> Vec3 {
    Vec3::new(
        rng.uniform(kind.half[0].0, kind.half[0].1),
        rng.uniform(kind.half[1].0, kind.half[1].1),
        rng.uniform(kind.half[2].0, kind.half[2].1),
    )
}

fn layout(rng: &mut CounterRng, cfg: &SynthConfig, table: &OrientedBox3) -> Vec<Placed> {
    let n = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
    let mut pool: Vec<&Kind> = KINDS.iter().collect();
    rng.shuffle(&mut pool);
    let pool = &pool[..2 + rng.below(4)];

    let top = table.top();
    let (tlo, thi) = table.footprint().bounds();
    let mut placed: Vec<Placed> = Vec::new();
    for i in 0..n {
        let kind = **rng.pick(pool).expect("non-empty pool");
        let color = *rng.pick(COLORS).expect("colors");
        let half = draw_half(&kind, rng);
        let yaw = rng.uniform(0.0, std::f64::consts::TAU);
        let id = format!("obj_{i:02}");

        // Occasionally rest a small item on an existing flat object.
        let bases: Vec<usize> = (0..placed.len()).filter(|&k| placed[k].kind.stackable_base).collect();
        if !bases.is_empty() && half.x.max(half.z) < 0.05 && rng.chance(0.25) {
            let base = &placed[bases[rng.below(bases.len())]];
            let c = base.obb.center;
            let obb = OrientedBox3::upright(Point3::new(c.x, base.obb.top() + half.y, c.z), half, yaw);
            let clash = placed
                .iter()
                .any(|p| p.obb.footprint().overlaps(&obb.footprint()) && p.obb.top() > base.obb.top() + 1e-9);
            if !clash {
                placed.push(Placed { id, kind, color, obb });
                continue;
            }
        }

        let reach = (half.x * half.x + half.z * half.z).sqrt();
        if thi.x - tlo.x < 2.0 * reach || thi.y - tlo.y < 2.0 * reach {
            continue;
        }
        for _ in 0..200 {
            let x = rng.uniform(tlo.x + reach, thi.x - reach);
            let z = rng.uniform(tlo.y + reach, thi.y - reach);
            let obb = OrientedBox3::upright(Point3::new(x, top + half.y, z), half, yaw);
            let fp = obb.footprint();
            if placed
                .iter()
                .all(|p| p.obb.footprint().distance(&fp) > OBJECT_CLEARANCE)
            {
                placed.push(Placed { id, kind, color, obb });
                break;
            }
        }
    }
    placed
}

/// Camera-to-gravity pose looking from `eye` at `target`.
fn look_at(eye: Point3, target: Point3) -> RigidTransform {
    let z = (target - eye).normalize();
    let x = z.cross(&Vec3::y()).normalize();
    let y = z.cross(&x);
    let r = Matrix3::from_columns(&[x, y, z]);
    RigidTransform {
        rotation: r,
        translation: eye.coords,
    }
}

struct Render {
    depth: DepthMap,
    /// Index of the nearest box per pixel.
    owner: Vec<Option<usize>>,
}

/// Ray casts every pixel centre against the boxes. Depth is the camera-frame
/// z of the first hit.
fn render(boxes: &[OrientedBox3], cam_to_g: &RigidTransform, k: &CameraIntrinsics) -> Render {
    let (w, h) = (k.width as usize, k.height as usize);
    let g_to_cam = cam_to_g.inverse();
    // Pixel rectangle each box can cover; None means test everywhere.
    let rects: Vec<Option<(f64, f64, f64, f64)>> = boxes
        .iter()
        .map(|b| {
            let mut r = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for c in b.corners() {
                let (u, v) = project(&g_to_cam.apply(&c), k).ok()?;
                r = (r.0.min(u), r.1.min(v), r.2.max(u), r.3.max(v));
            }
            Some(r)
        })
        .collect();
    let origin = Point3::from(cam_to_g.translation);
    let mut values = vec![0.0; w * h];
    let mut owner = vec![None; w * h];
    for v in 0..h {
        for u in 0..w {
            let (uf, vf) = (u as f64, v as f64);
            let d_cam = backproject(uf, vf, 1.0, k).expect("pixel in bounds").coords;
            let dir = cam_to_g.apply_vector(&d_cam);
            let mut best: Option<(f64, usize)> = None;
            for (i, b) in boxes.iter().enumerate() {
                if let Some((u0, v0, u1, v1)) = rects[i] {
                    if uf < u0 - 1.0 || uf > u1 + 1.0 || vf < v0 - 1.0 || vf > v1 + 1.0 {
                        continue;
                    }
                }
                if let Some(t) = b.ray_hit(&origin, &dir) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, i));
                    }
                }
            }
            if let Some((t, i)) = best {
                // d_cam has unit z, so the ray parameter is the camera depth.
                values[v * w + u] = t;
                owner[v * w + u] = Some(i);
            }
        }
    }
    Render {
        depth: DepthMap::from_values(k.width, k.height, values).expect("dimensions match"),
        owner,
    }
}

fn mask_of(render: &Render, index: usize, k: &CameraIntrinsics) -> Mask {
    let bits = render.owner.iter().map(|o| *o == Some(index)).collect();
    Mask::from_bits(k.width, k.height, bits).expect("dimensions match")
}

/// Mask bounding box (pixel edges) and the mask pixel nearest its centroid.
fn box_and_point(mask: &Mask) -> Option<(AxisAlignedBox2, (f64, f64))> {
    let px: Vec<(u32, u32)> = mask.pixels().collect();
    if px.is_empty() {
        return None;
    }
    let n = px.len() as f64;
    let cu = px.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cv = px.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let nearest = px
        .iter()
        .min_by(|a, b| {
            let da = (a.0 as f64 - cu).powi(2) + (a.1 as f64 - cv).powi(2);
            let db = (b.0 as f64 - cu).powi(2) + (b.1 as f64 - cv).powi(2);
            da.total_cmp(&db)
        })
        .copied()?;
    let x0 = px.iter().map(|p| p.0).min()? as f64;
    let x1 = px.iter().map(|p| p.0).max()? as f64 + 1.0;
    let y0 = px.iter().map(|p| p.1).min()? as f64;
    let y1 = px.iter().map(|p| p.1).max()? as f64 + 1.0;
    Some((
        AxisAlignedBox2::new(x0, y0, x1, y1).ok()?,
        (nearest.0 as f64, nearest.1 as f64),
    ))
}

fn random_rotation(rng: &mut CounterRng) -> Matrix3<f64> {
    let axis = loop {
        let v = Vec3::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            break v / n;
        }
    };
    *Rotation3::from_axis_angle(&Unit::new_unchecked(axis), rng.uniform(0.0, std::f64::consts::PI)).matrix()
}

/// Builds scene `index` of the stream selected by `seed`.
pub fn generate_scene(seed: u64, index: usize, cfg: &SynthConfig) -> Result<SyntheticScene> {
    if cfg.min_objects == 0 || cfg.min_objects > cfg.max_objects {
        return Err(Error::Configuration(format!(
            "object count range {}..={} is empty",
            cfg.min_objects, cfg.max_objects
        )));
    }
    let frame_id = format!("synth_{seed}_{index:04}");
    let mut rng = CounterRng::fork(seed, &frame_id);

    let half_w = rng.uniform(0.5, 0.8);
    let half_d = rng.uniform(0.35, 0.5);
    let table = OrientedBox3::upright(
        Point3::new(0.0, TABLE_HEIGHT / 2.0, 0.0),
        Vec3::new(half_w, TABLE_HEIGHT / 2.0, half_d),
        0.0,
    );
    let floor = OrientedBox3::upright(Point3::new(0.0, -0.01, 0.0), Vec3::new(4.0, 0.01, 4.0), 0.0);

    let f = rng.uniform(480.0, 560.0);
    let k = CameraIntrinsics::new(
        f,
        f,
        cfg.width as f64 / 2.0,
        cfg.height as f64 / 2.0,
        cfg.width,
        cfg.height,
    )?;
    let azimuth = rng.uniform(-35f64.to_radians(), 35f64.to_radians());
    let dist = rng.uniform(1.2, 1.7);
    let eye = Point3::new(dist * azimuth.sin(), rng.uniform(1.25, 1.6), dist * azimuth.cos());
    let target = Point3::new(rng.uniform(-0.1, 0.1), TABLE_HEIGHT, rng.uniform(-0.1, 0.1));
    let cam_to_g = look_at(eye, target);

    let mut best: Option<(Vec<Placed>, Render, Vec<bool>)> = None;
    for _ in 0..LAYOUT_ATTEMPTS {
        let placed = layout(&mut rng, cfg, &table);
        if placed.len() < cfg.min_objects {
            continue;
        }
        let mut boxes = vec![floor, table];
        boxes.extend(placed.iter().map(|p| p.obb));
        let r = render(&boxes, &cam_to_g, &k);
        let mut counts = vec![0usize; boxes.len()];
        for i in r.owner.iter().flatten() {
            counts[*i] += 1;
        }
        let visible: Vec<bool> = counts.iter().map(|c| *c >= MIN_VISIBLE_PIXELS).collect();
        let all = visible.iter().all(|v| *v);
        let better = best
            .as_ref()
            .is_none_or(|(_, _, bv)| visible.iter().filter(|v| **v).count() > bv.iter().filter(|v| **v).count());
        if all || better {
            best = Some((placed, r, visible));
        }
        if all {
            break;
        }
    }
    let (mut placed, mut r, visible) =
        best.ok_or_else(|| Error::Generation(format!("{frame_id}: could not place {} objects", cfg.min_objects)))?;
    if !visible.iter().all(|v| *v) {
        // Drop hidden items and render again.
        let keep: Vec<bool> = visible[2..].to_vec();
        placed = placed
            .into_iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(p, _)| p)
            .collect();
        let mut boxes = vec![floor, table];
        boxes.extend(placed.iter().map(|p| p.obb));
        r = render(&boxes, &cam_to_g, &k);
    }

    // World frame: an arbitrary rigid motion away from the gravity frame.
    let g_rot = RigidTransform::new(
        random_rotation(&mut rng),
        Vec3::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)),
    )?;
    let extrinsics = cam_to_g.then(&g_rot.inverse());
    let g_to_cam_rot = cam_to_g.rotation.transpose();

    let mut objects = Vec::new();
    let mut masks = BTreeMap::new();
    // id, category, color, box, facing
    type Entry<'a> = (String, &'a str, Option<&'a str>, OrientedBox3, Option<Vec3>);
    let mut entries: Vec<Entry> = vec![
        ("floor".into(), "floor", None, floor, None),
        ("table".into(), "table", None, table, None),
    ];
    for p in &placed {
        let orientation = p.kind.oriented.then(|| {
            let o = g_to_cam_rot * p.obb.rotation.column(0).into_owned();
            o / o.norm()
        });
        entries.push((p.id.clone(), p.kind.name, Some(p.color), p.obb, orientation));
    }
    for (i, (id, category, color, obb, orientation)) in entries.into_iter().enumerate() {
        let mask = mask_of(&r, i, &k);
        let Some((box2d, point2d)) = box_and_point(&mask) else {
            continue;
        };
        let mask_ref = format!("{frame_id}_{id}.png");
        objects.push(ObjectInstance {
            id: id.clone(),
            category: category.into(),
            color: color.map(str::to_string),
            caption: None,
            box2d,
            mask_ref: Some(mask_ref),
            obb,
            orientation,
            point2d,
        });
        masks.insert(id, mask);
    }

    let platform_ids = ["floor", "table"]
        .iter()
        .filter(|id| objects.iter().any(|o| o.id == **id))
        .map(|s| s.to_string())
        .collect();
    let frame = SceneFrame {
        frame_id: frame_id.clone(),
        image_ref: None,
        intrinsics: k,
        extrinsics,
        gravity_rotation: g_rot,
        depth_ref: format!("{frame_id}.depth"),
        objects,
        platform_ids,
    };
    frame.validate()?;
    Ok(SyntheticScene {
        frame,
        depth: r.depth,
        masks,
    })
}
