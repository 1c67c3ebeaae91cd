//! Point-in-mask benchmark scoring and reasoning-step counting.

mod steps;

pub use steps::{count_reasoning_steps, Constraint, MAX_STEPS, VIEWER};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mask, Point2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Location,
    Placement,
    Unseen,
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::Location => "location",
            Subset::Placement => "placement",
            Subset::Unseen => "unseen",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub mask_ref: String,
    pub instruction: String,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    pub step: usize,
    pub subset: Subset,
}

impl BenchmarkSample {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_STEPS).contains(&self.step) {
            return Err(Error::validation(
                format!("{}.step", self.sample_id),
                format!("must lie in 1..={MAX_STEPS}, got {}", self.step),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointSpace {
    #[default]
    Normalized,
    Pixels,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub sample_id: String,
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub space: PointSpace,
}

impl Prediction {
    pub fn points2(&self) -> Vec<Point2> {
        self.points
            .iter()
            .map(|[a, b]| match self.space {
                PointSpace::Normalized => Point2::Normalized { x: *a, y: *b },
                PointSpace::Pixels => Point2::Pixel { u: *a, v: *b },
            })
            .collect()
    }
}

/// True iff the point's pixel (normalised points are scaled and rounded half
/// up) is set in the mask. Out-of-image points are misses.
pub fn point_in_mask(point: Point2, mask: &Mask) -> bool {
    point
        .pixel_index(mask.width(), mask.height())
        .is_some_and(|(u, v)| mask.get(u, v))
}

/// Share of predicted points inside the mask.
pub fn sample_success(points: &[Point2], mask: &Mask) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Scoring("prediction has no points".into()));
    }
    let hits = points.iter().filter(|p| point_in_mask(**p, mask)).count();
    Ok(hits as f64 / points.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    pub success: f64,
    pub step: usize,
    pub subset: Subset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiscrepancy {
    pub sample_id: String,
    pub label: usize,
    pub computed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_sample: Vec<SampleScore>,
    pub per_step: BTreeMap<usize, f64>,
    pub per_subset: BTreeMap<Subset, f64>,
    pub overall: f64,
    /// Samples whose prediction had no points; they score 0.
    pub invalid: Vec<String>,
    /// Step labels that disagree with the constraint counter. Labels win.
    pub step_discrepancies: Vec<StepDiscrepancy>,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut s = format!("overall  {:.4}  (n={})\n", self.overall, self.per_sample.len());
        for (k, v) in &self.per_subset {
            s.push_str(&format!("subset {k:<10} {v:.4}\n"));
        }
        for (k, v) in &self.per_step {
            s.push_str(&format!("step {k}  {v:.4}\n"));
        }
        if !self.invalid.is_empty() {
            s.push_str(&format!("invalid predictions: {}\n", self.invalid.join(", ")));
        }
        s
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores one prediction per sample. `masks` is keyed by sample id.
pub fn benchmark_success_rate(
    predictions: &[Prediction],
    samples: &[BenchmarkSample],
    masks: &BTreeMap<String, Mask>,
) -> Result<EvalReport> {
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    let mut dups = BTreeSet::new();
    for p in predictions {
        if by_id.insert(p.sample_id.as_str(), p).is_some() {
            dups.insert(p.sample_id.as_str());
        }
    }
    if !dups.is_empty() {
        return Err(Error::Usage(format!(
            "duplicate predictions for: {}",
            dups.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let known: BTreeSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
    let missing: Vec<&str> = samples
        .iter()
        .map(|s| s.sample_id.as_str())
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Usage(format!("missing predictions for: {}", missing.join(", "))));
    }
    let orphans: Vec<&str> = by_id.keys().copied().filter(|id| !known.contains(id)).collect();
    if !orphans.is_empty() {
        return Err(Error::Usage(format!(
            "predictions for unknown samples: {}",
            orphans.join(", ")
        )));
    }

    let mut per_sample = Vec::with_capacity(samples.len());
    let mut invalid = Vec::new();
    let mut step_discrepancies = Vec::new();
    for s in samples {
        s.validate()?;
        let mask = masks
            .get(&s.sample_id)
            .ok_or_else(|| Error::Usage(format!("no mask loaded for `{}`", s.sample_id)))?;
        let success = match sample_success(&by_id[s.sample_id.as_str()].points2(), mask) {
            Ok(r) => r,
            Err(_) => {
                invalid.push(s.sample_id.clone());
                0.0
            }
        };
        if !s.constraints.is_empty() {
            let computed = count_reasoning_steps(&s.constraints, MAX_STEPS);
            if computed != s.step {
                step_discrepancies.push(StepDiscrepancy {
                    sample_id: s.sample_id.clone(),
                    label: s.step,
                    computed,
                });
            }
        }
        per_sample.push(SampleScore {
            sample_id: s.sample_id.clone(),
            success,
            step: s.step,
            subset: s.subset,
        });
    }

    let mut steps: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut subsets: BTreeMap<Subset, Vec<f64>> = BTreeMap::new();
    for r in &per_sample {
        steps.entry(r.step).or_default().push(r.success);
        subsets.entry(r.subset).or_default().push(r.success);
    }
    Ok(EvalReport {
        overall: mean(per_sample.iter().map(|r| r.success)),
        per_step: steps.into_iter().map(|(k, v)| (k, mean(v.into_iter()))).collect(),
        per_subset: subsets.into_iter().map(|(k, v)| (k, mean(v.into_iter()))).collect(),
        per_sample,
        invalid,
        step_discrepancies,
    })
}

/// Reads a JSONL file of `T`, one record per non-blank line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text).map_err(|(line, source)| Error::JsonLine {
        path: path.to_path_buf(),
        line,
        source,
    })
}

/// Parses JSONL text; the error carries the 1-based line number.
pub fn parse_jsonl<T: serde::de::DeserializeOwned>(
    text: &str,
) -> std::result::Result<Vec<T>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

/// Loads every sample's mask, resolving `mask_ref` against `base`.
pub fn load_masks(samples: &[BenchmarkSample], base: &Path) -> Result<BTreeMap<String, Mask>> {
    samples
        .iter()
        .map(|s| {
            Ok((
                s.sample_id.clone(),
                Mask::load(&crate::scene::io::resolve_ref(base, &s.mask_ref))?,
            ))
        })
        .collect()
}
