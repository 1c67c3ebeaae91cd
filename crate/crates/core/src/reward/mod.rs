//! Verifiable rewards for structured `<think>`/`<answer>` responses and
//! group-relative advantages.

mod parse;

pub use parse::{parse_response, parse_step_line, Flags, ParsedResponse, ParsedStep};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::defaults::Thresholds;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Vec3};
use crate::qa::{KeyStep, KeyStepValue};

/// Slack for the inclusive boundaries, so decimal inputs that sit exactly on
/// a threshold are not lost to binary rounding.
const INCLUSIVE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthAnnotation {
    /// Pixels.
    pub point: [f64; 2],
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub key_steps: Vec<KeyStep>,
}

impl GroundTruthAnnotation {
    pub fn validate(&self) -> Result<()> {
        let [u, v] = self.point;
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("width/height", "must be positive"));
        }
        if !(u >= 0.0 && v >= 0.0 && u <= f64::from(self.width) && v <= f64::from(self.height)) {
            return Err(Error::validation(
                "point",
                format!("({u}, {v}) outside {}x{}", self.width, self.height),
            ));
        }
        self.key_steps.iter().try_for_each(KeyStep::validate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_of: f64,
    pub r_p: f64,
    pub r_pf: f64,
    pub r_acc: f64,
    pub alpha: f64,
    pub total: f64,
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn outcome_format_reward(p: &ParsedResponse) -> f64 {
    indicator(p.flags.outcome_format_ok)
}

fn l1_px(a: Point2, b: Point2, width: u32, height: u32) -> f64 {
    let (au, av) = a.to_pixels(width, height);
    let (bu, bv) = b.to_pixels(width, height);
    (au - bu).abs() + (av - bv).abs()
}

/// 1 when the final point is within the L1 pixel radius (inclusive).
pub fn point_l1_reward(p: &ParsedResponse, gt: &GroundTruthAnnotation, t: &Thresholds) -> f64 {
    let Some(pred) = p.final_point else {
        return 0.0;
    };
    let gt_point = Point2::pixel(gt.point[0], gt.point[1]);
    indicator(l1_px(pred, gt_point, gt.width, gt.height) <= t.point_l1_px + INCLUSIVE_EPS)
}

pub fn process_format_reward(p: &ParsedResponse) -> f64 {
    indicator(p.flags.process_format_ok)
}

/// Lowercased, punctuation stripped, whitespace collapsed.
pub fn normalize_target(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn targets_match(a: &str, b: &str) -> bool {
    let (a, b) = (normalize_target(a), normalize_target(b));
    !a.is_empty() && !b.is_empty() && (a.contains(&b) || b.contains(&a))
}

/// Whether a predicted step value passes the metric for its type.
pub fn step_correct(pred: &KeyStep, gt: &KeyStep, width: u32, height: u32, t: &Thresholds) -> bool {
    match (pred.value, gt.value) {
        (KeyStepValue::Point([px, py]), KeyStepValue::Point([gx, gy])) => {
            let (Ok(a), Ok(b)) = (Point2::normalized(px, py), Point2::normalized(gx, gy)) else {
                return false;
            };
            l1_px(a, b, width, height) < t.point_l1_px
        }
        (KeyStepValue::Vector(p), KeyStepValue::Vector(g)) => {
            let (p, g) = (Vec3::from(p), Vec3::from(g));
            let denom = p.norm() * g.norm();
            denom > 0.0 && p.dot(&g) / denom > t.orientation_cosine
        }
        (KeyStepValue::Meters(p), KeyStepValue::Meters(g)) => {
            g > 0.0 && (p - g).abs() <= t.size_tolerance * g + INCLUSIVE_EPS
        }
        _ => false,
    }
}

/// Mean over ground-truth key steps of "some well-formed predicted step of
/// the same type names this target and passes its metric".
pub fn accuracy_reward(p: &ParsedResponse, gt: &GroundTruthAnnotation, t: &Thresholds) -> f64 {
    if gt.key_steps.is_empty() {
        return 0.0;
    }
    let preds: Vec<&KeyStep> = p.steps.iter().filter_map(|s| s.step.as_ref()).collect();
    let hits = gt
        .key_steps
        .iter()
        .filter(|g| {
            preds.iter().any(|s| {
                s.perception_type == g.perception_type
                    && targets_match(&s.target_text, &g.target_text)
                    && step_correct(s, g, gt.width, gt.height, t)
            })
        })
        .count();
    hits as f64 / gt.key_steps.len() as f64
}

pub fn total_reward(
    p: &ParsedResponse,
    gt: &GroundTruthAnnotation,
    alpha: f64,
    t: &Thresholds,
) -> Result<RewardBreakdown> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::Usage(format!(
            "alpha must be a non-negative number, got {alpha}"
        )));
    }
    let r_of = outcome_format_reward(p);
    let r_p = point_l1_reward(p, gt, t);
    let r_pf = process_format_reward(p);
    let r_acc = accuracy_reward(p, gt, t);
    Ok(RewardBreakdown {
        r_of,
        r_p,
        r_pf,
        r_acc,
        alpha,
        total: r_of + r_p + alpha * (r_pf + r_acc),
    })
}

/// `(r - mean) / std` with the population standard deviation; a group with
/// no spread gets all zeros.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    if rewards.len() < 2 {
        return Err(Error::Usage(format!(
            "advantage groups need at least 2 rewards, got {}",
            rewards.len()
        )));
    }
    if let Some(bad) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(Error::Usage(format!("reward {bad} is not finite")));
    }
    let n = rewards.len() as f64;
    let (lo, hi) = rewards.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(*r), hi.max(*r))
    });
    if lo == hi {
        return Ok(vec![0.0; rewards.len()]);
    }
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // spread lost entirely to rounding
    if std <= 1e-15 * lo.abs().max(hi.abs()) {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub sample_id: String,
    #[serde(flatten)]
    pub annotation: GroundTruthAnnotation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_id: String,
    pub r_of: f64,
    pub r_p: f64,
    pub r_pf: f64,
    pub r_acc: f64,
    pub alpha: f64,
    pub total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advantage: Option<f64>,
}

/// How rows are grouped for advantages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grouping {
    None,
    /// Consecutive runs of this many rows.
    Contiguous(usize),
    /// Rows sharing a `group_id`.
    ByGroupId,
}

/// Scores each response against the GT row with its `sample_id`. Several
/// responses may share one GT row (a sampling group).
pub fn score_batch(
    responses: &[ResponseRecord],
    truths: &[GroundTruthRecord],
    alpha: f64,
    grouping: Grouping,
    t: &Thresholds,
) -> Result<Vec<ScoreRow>> {
    let mut gt: BTreeMap<&str, &GroundTruthAnnotation> = BTreeMap::new();
    for r in truths {
        if gt.insert(&r.sample_id, &r.annotation).is_some() {
            return Err(Error::Usage(format!("duplicate ground truth for `{}`", r.sample_id)));
        }
        r.annotation
            .validate()
            .map_err(|e| Error::Usage(format!("ground truth `{}`: {e}", r.sample_id)))?;
    }
    let answered: BTreeSet<&str> = responses.iter().map(|r| r.sample_id.as_str()).collect();
    let no_gt: Vec<&str> = answered.iter().copied().filter(|id| !gt.contains_key(id)).collect();
    let no_response: Vec<&str> = gt.keys().copied().filter(|id| !answered.contains(id)).collect();
    if !no_gt.is_empty() || !no_response.is_empty() {
        return Err(Error::Usage(format!(
            "sample ids do not align; responses without ground truth: {no_gt:?}; ground truth without responses: {no_response:?}"
        )));
    }

    let mut rows = Vec::with_capacity(responses.len());
    for r in responses {
        let b = total_reward(&parse_response(&r.text), gt[r.sample_id.as_str()], alpha, t)?;
        rows.push(ScoreRow {
            sample_id: r.sample_id.clone(),
            r_of: b.r_of,
            r_p: b.r_p,
            r_pf: b.r_pf,
            r_acc: b.r_acc,
            alpha: b.alpha,
            total: b.total,
            advantage: None,
        });
    }

    match grouping {
        Grouping::None => {}
        Grouping::Contiguous(n) => {
            if n < 2 || rows.len() % n != 0 {
                return Err(Error::Usage(format!(
                    "group size {n} must be at least 2 and divide the {} responses",
                    rows.len()
                )));
            }
            for chunk in rows.chunks_mut(n) {
                let adv = group_advantages(&chunk.iter().map(|r| r.total).collect::<Vec<_>>())?;
                for (row, a) in chunk.iter_mut().zip(adv) {
                    row.advantage = Some(a);
                }
            }
        }
        Grouping::ByGroupId => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, r) in responses.iter().enumerate() {
                if let Some(g) = &r.group_id {
                    groups.entry(g).or_default().push(i);
                }
            }
            for (g, idx) in groups {
                let totals: Vec<f64> = idx.iter().map(|i| rows[*i].total).collect();
                let adv = group_advantages(&totals).map_err(|e| Error::Usage(format!("group `{g}`: {e}")))?;
                for (i, a) in idx.into_iter().zip(adv) {
                    rows[i].advantage = Some(a);
                }
            }
        }
    }
    Ok(rows)
}
