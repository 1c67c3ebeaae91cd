//! Free-space placement: platform association, neighbour selection, region
//! sampling on a top-down occupancy grid, and visibility-checked placement
//! point selection.

mod platform;
mod region;
mod visibility;

pub use platform::{find_platform_below, find_supporting_platform, frame_platforms, PlatformSurface};
pub use region::{
    between_region, directional_region, drop_occupied, free_area, sample_in_region, sector_polygon, sector_radius,
    vertical_region, MAX_ATTEMPTS_PER_SAMPLE,
};
pub use visibility::{filter_visible, select_placement_point, PlacementCheck, VisiblePoint};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::defaults::Thresholds;
use crate::error::{Error, Result};
use crate::geometry::{ConvexPolygon, DepthMap, Mask, OccupancyMap, PointCloud, Vec2};
use crate::rng::CounterRng;
use crate::scene::{ObjectInstance, SceneFrame, ViewerFrame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreeSpaceRelation {
    Front,
    Behind,
    Left,
    Right,
    Above,
    Below,
    Between,
}

impl FreeSpaceRelation {
    pub const ALL: [FreeSpaceRelation; 7] = [
        FreeSpaceRelation::Front,
        FreeSpaceRelation::Behind,
        FreeSpaceRelation::Left,
        FreeSpaceRelation::Right,
        FreeSpaceRelation::Above,
        FreeSpaceRelation::Below,
        FreeSpaceRelation::Between,
    ];
    pub const DIRECTIONAL: [FreeSpaceRelation; 4] = [
        FreeSpaceRelation::Front,
        FreeSpaceRelation::Behind,
        FreeSpaceRelation::Left,
        FreeSpaceRelation::Right,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FreeSpaceRelation::Front => "front",
            FreeSpaceRelation::Behind => "behind",
            FreeSpaceRelation::Left => "left",
            FreeSpaceRelation::Right => "right",
            FreeSpaceRelation::Above => "above",
            FreeSpaceRelation::Below => "below",
            FreeSpaceRelation::Between => "between",
        }
    }

    pub fn is_directional(self) -> bool {
        Self::DIRECTIONAL.contains(&self)
    }

    pub fn target_count(self) -> usize {
        if self == FreeSpaceRelation::Between {
            2
        } else {
            1
        }
    }

    pub fn default_quotas(self, t: &Thresholds) -> Quotas {
        if self.is_directional() {
            Quotas {
                samples: t.directional_samples,
                min_visible: t.directional_min_visible,
            }
        } else {
            Quotas {
                samples: t.vertical_samples,
                min_visible: t.vertical_min_visible,
            }
        }
    }

    /// Horizontal unit direction on the XZ plane for the four directional
    /// relations.
    pub fn horizontal_direction(self, view: &ViewerFrame) -> Option<Vec2> {
        let r = Vec2::new(view.right.x, view.right.z);
        let f = Vec2::new(view.toward.x, view.toward.z);
        Some(match self {
            FreeSpaceRelation::Right => r,
            FreeSpaceRelation::Left => -r,
            FreeSpaceRelation::Front => f,
            FreeSpaceRelation::Behind => -f,
            _ => return None,
        })
    }
}

impl fmt::Display for FreeSpaceRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FreeSpaceRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown free-space relation `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quotas {
    pub samples: usize,
    pub min_visible: usize,
}

impl Quotas {
    pub fn is_met(&self, visible: usize) -> bool {
        visible >= self.min_visible
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeSpaceQuery {
    pub relation: FreeSpaceRelation,
    pub target_ids: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quotas: Option<Quotas>,
}

impl FreeSpaceQuery {
    pub fn new(relation: FreeSpaceRelation, target_ids: &[&str], seed: u64) -> Self {
        Self {
            relation,
            target_ids: target_ids.iter().map(|s| s.to_string()).collect(),
            seed,
            quotas: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.relation.target_count();
        if self.target_ids.len() != want {
            return Err(Error::InvalidQuery(format!(
                "`{}` takes {want} target(s), got {}",
                self.relation,
                self.target_ids.len()
            )));
        }
        if want == 2 && self.target_ids[0] == self.target_ids[1] {
            return Err(Error::InvalidQuery("between needs two distinct targets".into()));
        }
        if let Some(q) = self.quotas {
            if q.samples == 0 || q.min_visible > q.samples {
                return Err(Error::InvalidQuery(format!(
                    "quotas need 0 < min_visible <= samples, got {}/{}",
                    q.min_visible, q.samples
                )));
            }
        }
        Ok(())
    }

    pub fn quotas(&self, t: &Thresholds) -> Quotas {
        self.quotas.unwrap_or_else(|| self.relation.default_quotas(t))
    }

    fn stream_label(&self) -> String {
        format!("free-space/{}/{}", self.relation, self.target_ids.join("+"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum Rejection {
    NoSupportingPlatform { object_id: String },
    EmptyRegion,
    AreaBelowFloor { area_m2: f64, floor_m2: f64 },
    QuotaUnmet { visible: usize, required: usize },
    NoConsistentPoint,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::NoSupportingPlatform { object_id } => write!(f, "no supporting platform for `{object_id}`"),
            Rejection::EmptyRegion => f.write_str("search region has no free cells"),
            Rejection::AreaBelowFloor { area_m2, floor_m2 } => {
                write!(f, "free area {area_m2:.4} m² does not exceed {floor_m2} m²")
            }
            Rejection::QuotaUnmet { visible, required } => write!(f, "{visible} visible points, {required} required"),
            Rejection::NoConsistentPoint => f.write_str("no depth-consistent placement pixel"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeSpaceRegion {
    pub query: FreeSpaceQuery,
    pub platform_id: Option<String>,
    /// Gravity-frame height of the placement plane.
    pub plane_height: f64,
    pub search_region: ConvexPolygon,
    pub occupancy: Option<OccupancyMap>,
    pub neighbor_ids: Vec<String>,
    pub region_area: f64,
    /// Candidates that landed on Free cells.
    pub sampled_points3d: PointCloud,
    pub visible_points2d: Vec<VisiblePoint>,
    /// Integer pixel coordinates.
    pub selected_point: Option<(f64, f64)>,
    pub rejection: Option<Rejection>,
}

impl FreeSpaceRegion {
    fn rejected(query: &FreeSpaceQuery, why: Rejection) -> Self {
        Self {
            query: query.clone(),
            platform_id: None,
            plane_height: 0.0,
            search_region: ConvexPolygon::hull(&[]),
            occupancy: None,
            neighbor_ids: vec![],
            region_area: 0.0,
            sampled_points3d: vec![],
            visible_points2d: vec![],
            selected_point: None,
            rejection: Some(why),
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.selected_point.is_some()
    }

    pub fn placement_check<'a>(
        &'a self,
        frame: &'a SceneFrame,
        depth: &'a DepthMap,
        t: &Thresholds,
    ) -> Option<PlacementCheck<'a>> {
        Some(PlacementCheck {
            frame,
            depth,
            region: &self.search_region,
            occupancy: self.occupancy.as_ref()?,
            plane_height: self.plane_height,
            tolerance: t.visibility_tolerance_m,
        })
    }

    /// Every pixel that would be an acceptable placement answer. Empty for
    /// rejected regions.
    pub fn placement_mask(&self, frame: &SceneFrame, depth: &DepthMap, t: &Thresholds) -> Mask {
        let (w, h) = (depth.width(), depth.height());
        let mut mask = Mask::new(w, h);
        if !self.is_accepted() {
            return mask;
        }
        let Some(check) = self.placement_check(frame, depth, t) else {
            return mask;
        };
        for v in 0..h {
            for u in 0..w {
                if check.accepts(u as f64, v as f64) {
                    mask.set(u, v, true);
                }
            }
        }
        mask
    }

    /// Summary document for the CLI and for fixtures.
    pub fn to_json(&self, width: u32, height: u32) -> serde_json::Value {
        let selected = self.selected_point.map(|(u, v)| {
            serde_json::json!({
                "pixel": [u, v],
                "normalized": [u / width as f64, v / height as f64],
            })
        });
        serde_json::json!({
            "relation": self.query.relation,
            "target_ids": self.query.target_ids,
            "seed": self.query.seed,
            "platform_id": self.platform_id,
            "plane_height": self.plane_height,
            "region_area_m2": self.region_area,
            "neighbor_ids": self.neighbor_ids,
            "sampled_count": self.sampled_points3d.len(),
            "visible_count": self.visible_points2d.len(),
            "selected_point": selected,
            "rejection": self.rejection,
        })
    }
}

/// Objects that occupy the query's search region on `platform`.
pub fn candidate_neighbors<'a>(
    frame: &'a SceneFrame,
    targets: &[&ObjectInstance],
    relation: FreeSpaceRelation,
    platform: &PlatformSurface,
    search_region: &ConvexPolygon,
    t: &Thresholds,
) -> Vec<&'a ObjectInstance> {
    let target = targets[0];
    let tfp = target.obb.footprint();
    let target_top = targets.iter().map(|o| o.obb.top()).fold(f64::NEG_INFINITY, f64::max);
    let target_vol = targets.iter().map(|o| o.obb.volume()).fold(0.0, f64::max);
    frame
        .objects
        .iter()
        .filter(|o| o.id != platform.object_id && !targets.iter().any(|x| x.id == o.id))
        .filter(|o| {
            let fp = o.obb.footprint();
            match relation {
                FreeSpaceRelation::Below => {
                    fp.overlaps(&tfp) && o.obb.bottom() <= target.obb.top() && o.obb.top() >= platform.top_height
                }
                FreeSpaceRelation::Above => {
                    let lift = o.obb.bottom() - platform.top_height;
                    lift >= -t.platform_gap_m
                        && lift <= t.above_band_m
                        && o.obb.top() >= platform.top_height
                        && fp.overlaps(&platform.footprint)
                }
                _ => {
                    o.obb.bottom() <= target_top + t.neighbor_height_margin_m
                        && o.obb.top() > platform.top_height
                        && fp.overlaps(search_region)
                        && o.obb.volume() <= t.neighbor_volume_ratio * target_vol
                }
            }
        })
        .collect()
}

struct Setup<'a> {
    platform: PlatformSurface,
    plane_height: f64,
    region: ConvexPolygon,
    occupiers: Vec<&'a ObjectInstance>,
    neighbors: Vec<&'a ObjectInstance>,
}

fn setup<'a>(
    frame: &'a SceneFrame,
    query: &FreeSpaceQuery,
    t: &Thresholds,
) -> Result<std::result::Result<Setup<'a>, Rejection>> {
    let platforms = frame_platforms(frame)?;
    let targets = query
        .target_ids
        .iter()
        .map(|id| frame.object(id))
        .collect::<Result<Vec<_>>>()?;
    let target = targets[0];
    let no_platform = |o: &ObjectInstance| Rejection::NoSupportingPlatform {
        object_id: o.id.clone(),
    };

    let (platform, region, mut occupiers) = match query.relation {
        r if r.is_directional() => {
            let Some(p) = find_supporting_platform(target, &platforms, t) else {
                return Ok(Err(no_platform(target)));
            };
            let dir = r.horizontal_direction(&frame.viewer()).expect("directional");
            let region = directional_region(&target.obb, dir, &p.footprint, t);
            (p.clone(), region, vec![target])
        }
        FreeSpaceRelation::Above => {
            let p = PlatformSurface::from_box(&target.id, &target.obb)?;
            let region = vertical_region(&target.obb, &p.footprint, t);
            (p, region, vec![])
        }
        FreeSpaceRelation::Below => {
            let Some(p) = find_platform_below(target, &platforms, t) else {
                return Ok(Err(no_platform(target)));
            };
            let region = vertical_region(&target.obb, &p.footprint, t);
            (p.clone(), region, vec![])
        }
        _ => {
            let other = targets[1];
            let pa = find_supporting_platform(target, &platforms, t);
            let pb = find_supporting_platform(other, &platforms, t);
            let (pa, pb) = match (pa, pb) {
                (Some(a), Some(b)) => (a, b),
                (None, _) => return Ok(Err(no_platform(target))),
                (_, None) => return Ok(Err(no_platform(other))),
            };
            if pa.object_id != pb.object_id {
                return Err(Error::InvalidQuery(format!(
                    "`{}` rests on `{}` but `{}` rests on `{}`",
                    target.id, pa.object_id, other.id, pb.object_id
                )));
            }
            let region = between_region(&target.obb, &other.obb, &pa.footprint);
            (pa.clone(), region, vec![target, other])
        }
    };
    let neighbors = candidate_neighbors(frame, &targets, query.relation, &platform, &region, t);
    occupiers.extend(neighbors.iter().copied());
    Ok(Ok(Setup {
        plane_height: platform.top_height,
        platform,
        region,
        occupiers,
        neighbors,
    }))
}

/// Runs the full placement pipeline for one query.
pub fn sample_free_space(
    frame: &SceneFrame,
    depth: &DepthMap,
    query: &FreeSpaceQuery,
    t: &Thresholds,
) -> Result<FreeSpaceRegion> {
    query.validate()?;
    if depth.width() != frame.intrinsics.width || depth.height() != frame.intrinsics.height {
        return Err(Error::validation(
            "depth",
            format!(
                "is {}x{} but intrinsics are {}x{}",
                depth.width(),
                depth.height(),
                frame.intrinsics.width,
                frame.intrinsics.height
            ),
        ));
    }
    let s = match setup(frame, query, t)? {
        Ok(s) => s,
        Err(why) => return Ok(FreeSpaceRegion::rejected(query, why)),
    };
    let fps: Vec<ConvexPolygon> = s.occupiers.iter().map(|o| o.obb.footprint()).collect();
    let occupancy = OccupancyMap::from_footprints(&s.platform.footprint, &fps, t.cell_size_m)?;
    let area = free_area(&s.region, &occupancy);

    let mut out = FreeSpaceRegion {
        query: query.clone(),
        platform_id: Some(s.platform.object_id.clone()),
        plane_height: s.plane_height,
        search_region: s.region.clone(),
        occupancy: None,
        neighbor_ids: s.neighbors.iter().map(|o| o.id.clone()).collect(),
        region_area: area,
        sampled_points3d: vec![],
        visible_points2d: vec![],
        selected_point: None,
        rejection: None,
    };
    if area <= 0.0 {
        out.rejection = Some(Rejection::EmptyRegion);
        out.occupancy = Some(occupancy);
        return Ok(out);
    }
    if !query.relation.is_directional() && area <= t.min_free_area_m2 {
        out.rejection = Some(Rejection::AreaBelowFloor {
            area_m2: area,
            floor_m2: t.min_free_area_m2,
        });
        out.occupancy = Some(occupancy);
        return Ok(out);
    }

    let quotas = query.quotas(t);
    let mut rng = CounterRng::fork(query.seed, &query.stream_label());
    let candidates = sample_in_region(&s.region, s.plane_height, quotas.samples, &mut rng);
    out.sampled_points3d = drop_occupied(candidates, &occupancy);
    out.visible_points2d = filter_visible(&out.sampled_points3d, frame, depth, t.visibility_tolerance_m);

    if !quotas.is_met(out.visible_points2d.len()) {
        out.rejection = Some(Rejection::QuotaUnmet {
            visible: out.visible_points2d.len(),
            required: quotas.min_visible,
        });
    } else {
        let check = PlacementCheck {
            frame,
            depth,
            region: &s.region,
            occupancy: &occupancy,
            plane_height: s.plane_height,
            tolerance: t.visibility_tolerance_m,
        };
        out.selected_point = select_placement_point(&out.visible_points2d, &check);
        if out.selected_point.is_none() {
            out.rejection = Some(Rejection::NoConsistentPoint);
        }
    }
    out.occupancy = Some(occupancy);
    Ok(out)
}

/// Whether any of the four horizontal sectors around `object` holds a Free
/// cell on its supporting platform. Depth is not consulted.
pub fn has_directional_free_space(frame: &SceneFrame, object: &ObjectInstance, t: &Thresholds) -> bool {
    let Ok(platforms) = frame_platforms(frame) else {
        return false;
    };
    let Some(p) = find_supporting_platform(object, &platforms, t) else {
        return false;
    };
    let view = frame.viewer();
    FreeSpaceRelation::DIRECTIONAL.iter().any(|r| {
        let dir = r.horizontal_direction(&view).expect("directional");
        let region = directional_region(&object.obb, dir, &p.footprint, t);
        if region.is_degenerate() {
            return false;
        }
        let mut occupiers = candidate_neighbors(frame, &[object], *r, p, &region, t);
        occupiers.push(object);
        let fps: Vec<ConvexPolygon> = occupiers.iter().map(|o| o.obb.footprint()).collect();
        OccupancyMap::from_footprints(&p.footprint, &fps, t.cell_size_m)
            .map(|occ| free_area(&region, &occ) > 0.0)
            .unwrap_or(false)
    })
}
