//! Every numeric threshold the pipeline uses, in one table.
//!
//! Callers override individual fields; [`Thresholds::validate`] rejects
//! values outside their legal range.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reciprocal of the golden ratio, cubed and inverted: `(1 / 0.618)^3`.
pub const NEIGHBOR_VOLUME_RATIO: f64 = 4.236;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    // platform association
    pub platform_gap_m: f64,
    pub platform_overlap: f64,

    // neighbour selection
    pub neighbor_volume_ratio: f64,
    pub neighbor_height_margin_m: f64,
    pub above_band_m: f64,

    // region construction
    pub sector_angle_deg: f64,
    pub sector_radius_floor_m: f64,
    pub vertical_shrink: f64,
    pub min_free_area_m2: f64,
    pub cell_size_m: f64,

    // sampling quotas
    pub directional_samples: usize,
    pub directional_min_visible: usize,
    pub vertical_samples: usize,
    pub vertical_min_visible: usize,

    // visibility
    pub visibility_tolerance_m: f64,

    // rewards
    pub point_l1_px: f64,
    pub orientation_cosine: f64,
    pub size_tolerance: f64,
    pub alpha: f64,

    // box matching
    pub iou_threshold: f64,

    // relation predicates
    pub position_margin_m: f64,
    pub position_margin_frac: f64,
    pub touching_gap_m: f64,
    pub near_factor: f64,
    pub diversity_factor: f64,

    pub max_steps: u32,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            platform_gap_m: 0.05,
            platform_overlap: 0.70,
            neighbor_volume_ratio: NEIGHBOR_VOLUME_RATIO,
            neighbor_height_margin_m: 0.05,
            above_band_m: 0.20,
            sector_angle_deg: 90.0,
            sector_radius_floor_m: 0.20,
            vertical_shrink: 0.80,
            min_free_area_m2: 0.036,
            cell_size_m: 0.01,
            directional_samples: 9_000,
            directional_min_visible: 2_000,
            vertical_samples: 10_000,
            vertical_min_visible: 6_000,
            visibility_tolerance_m: 0.025,
            point_l1_px: 50.0,
            orientation_cosine: 0.8,
            size_tolerance: 0.15,
            alpha: 0.25,
            iou_threshold: 0.5,
            position_margin_m: 0.01,
            position_margin_frac: 0.05,
            touching_gap_m: 0.01,
            near_factor: 3.0,
            diversity_factor: 0.5,
            max_steps: 5,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must be > 0, got {v}")))
            }
        }
        fn fraction(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::validation(name, format!("must lie in (0, 1], got {v}")))
            }
        }
        positive("platform_gap_m", self.platform_gap_m)?;
        fraction("platform_overlap", self.platform_overlap)?;
        positive("neighbor_volume_ratio", self.neighbor_volume_ratio)?;
        if !(self.neighbor_height_margin_m >= 0.0) {
            return Err(Error::validation("neighbor_height_margin_m", "must be >= 0"));
        }
        positive("above_band_m", self.above_band_m)?;
        if !(self.sector_angle_deg > 0.0 && self.sector_angle_deg < 360.0) {
            return Err(Error::validation("sector_angle_deg", "must lie in (0, 360)"));
        }
        positive("sector_radius_floor_m", self.sector_radius_floor_m)?;
        fraction("vertical_shrink", self.vertical_shrink)?;
        if !(self.min_free_area_m2 >= 0.0) {
            return Err(Error::validation("min_free_area_m2", "must be >= 0"));
        }
        positive("cell_size_m", self.cell_size_m)?;
        for (name, samples, visible) in [
            ("directional", self.directional_samples, self.directional_min_visible),
            ("vertical", self.vertical_samples, self.vertical_min_visible),
        ] {
            if samples == 0 {
                return Err(Error::validation(format!("{name}_samples"), "must be > 0"));
            }
            if visible > samples {
                return Err(Error::validation(
                    format!("{name}_min_visible"),
                    format!("quota {visible} exceeds sample count {samples}"),
                ));
            }
        }
        positive("visibility_tolerance_m", self.visibility_tolerance_m)?;
        positive("point_l1_px", self.point_l1_px)?;
        if !(self.orientation_cosine > -1.0 && self.orientation_cosine < 1.0) {
            return Err(Error::validation("orientation_cosine", "must lie in (-1, 1)"));
        }
        positive("size_tolerance", self.size_tolerance)?;
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::validation("alpha", "must be >= 0"));
        }
        fraction("iou_threshold", self.iou_threshold)?;
        positive("position_margin_m", self.position_margin_m)?;
        if !(self.position_margin_frac >= 0.0) {
            return Err(Error::validation("position_margin_frac", "must be >= 0"));
        }
        positive("touching_gap_m", self.touching_gap_m)?;
        positive("near_factor", self.near_factor)?;
        positive("diversity_factor", self.diversity_factor)?;
        if self.max_steps == 0 {
            return Err(Error::validation("max_steps", "must be >= 1"));
        }
        Ok(())
    }

    /// Overrides one field by name, then revalidates.
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let mut doc = serde_json::to_value(&*self).expect("thresholds serialise");
        let slot = doc
            .get_mut(name)
            .ok_or_else(|| Error::Usage(format!("unknown threshold `{name}`")))?;
        let parsed: serde_json::Value = serde_json::from_str(value.trim())
            .map_err(|_| Error::validation(name, format!("`{value}` is not a number")))?;
        if !parsed.is_number() {
            return Err(Error::validation(name, format!("`{value}` is not a number")));
        }
        *slot = parsed;
        let next: Thresholds = serde_json::from_value(doc).map_err(|e| Error::validation(name, e.to_string()))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// `(name, value)` rows for display.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        vec![
            ("platform_gap_m", self.platform_gap_m.to_string()),
            ("platform_overlap", self.platform_overlap.to_string()),
            ("neighbor_volume_ratio", self.neighbor_volume_ratio.to_string()),
            ("neighbor_height_margin_m", self.neighbor_height_margin_m.to_string()),
            ("above_band_m", self.above_band_m.to_string()),
            ("sector_angle_deg", self.sector_angle_deg.to_string()),
            ("sector_radius_floor_m", self.sector_radius_floor_m.to_string()),
            ("vertical_shrink", self.vertical_shrink.to_string()),
            ("min_free_area_m2", self.min_free_area_m2.to_string()),
            ("cell_size_m", self.cell_size_m.to_string()),
            ("directional_samples", self.directional_samples.to_string()),
            ("directional_min_visible", self.directional_min_visible.to_string()),
            ("vertical_samples", self.vertical_samples.to_string()),
            ("vertical_min_visible", self.vertical_min_visible.to_string()),
            ("visibility_tolerance_m", self.visibility_tolerance_m.to_string()),
            ("point_l1_px", self.point_l1_px.to_string()),
            ("orientation_cosine", self.orientation_cosine.to_string()),
            ("size_tolerance", self.size_tolerance.to_string()),
            ("alpha", self.alpha.to_string()),
            ("iou_threshold", self.iou_threshold.to_string()),
            ("position_margin_m", self.position_margin_m.to_string()),
            ("position_margin_frac", self.position_margin_frac.to_string()),
            ("touching_gap_m", self.touching_gap_m.to_string()),
            ("near_factor", self.near_factor.to_string()),
            ("diversity_factor", self.diversity_factor.to_string()),
            ("max_steps", self.max_steps.to_string()),
        ]
    }
}
