use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{box_iou_2d, AxisAlignedBox2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledBox {
    pub id: String,
    pub bbox: AxisAlignedBox2,
}

impl LabeledBox {
    pub fn new(id: impl Into<String>, bbox: AxisAlignedBox2) -> Self {
        Self { id: id.into(), bbox }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub predicted: String,
    pub reference: String,
    pub iou: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_predicted: Vec<String>,
    pub unmatched_reference: Vec<String>,
}

/// Index of the largest value at or above `min`; ties keep the lowest index.
fn best(values: impl Iterator<Item = f64>, min: f64) -> Option<(usize, f64)> {
    let mut out: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v >= min && out.is_none_or(|(_, b)| v > b) {
            out = Some((i, v));
        }
    }
    out
}

/// Two-pass one-to-one matching. Each reference box first claims its
/// highest-IoU predicted box; a predicted box claimed by several references
/// then keeps only the one with the highest IoU.
pub fn match_boxes_bidirectional(
    reference: &[LabeledBox],
    predicted: &[LabeledBox],
    iou_min: f64,
) -> Result<MatchResult> {
    if !(iou_min > 0.0 && iou_min <= 1.0) {
        return Err(Error::Usage(format!("iou threshold must lie in (0, 1], got {iou_min}")));
    }
    let iou: Vec<Vec<f64>> = reference
        .iter()
        .map(|r| predicted.iter().map(|p| box_iou_2d(&r.bbox, &p.bbox)).collect())
        .collect();

    // claims[p] = references that picked p in the first pass
    let mut claims: Vec<Vec<usize>> = vec![Vec::new(); predicted.len()];
    for (r, row) in iou.iter().enumerate() {
        if let Some((p, _)) = best(row.iter().copied(), iou_min) {
            claims[p].push(r);
        }
    }

    let mut ref_taken = vec![false; reference.len()];
    let mut pairs = Vec::new();
    let mut unmatched_predicted = Vec::new();
    for (p, refs) in claims.iter().enumerate() {
        match best(refs.iter().map(|&r| iou[r][p]), iou_min) {
            Some((k, v)) => {
                let r = refs[k];
                ref_taken[r] = true;
                pairs.push(MatchedPair {
                    predicted: predicted[p].id.clone(),
                    reference: reference[r].id.clone(),
                    iou: v,
                });
            }
            None => unmatched_predicted.push(predicted[p].id.clone()),
        }
    }
    let unmatched_reference = reference
        .iter()
        .zip(&ref_taken)
        .filter(|(_, t)| !**t)
        .map(|(r, _)| r.id.clone())
        .collect();
    Ok(MatchResult {
        pairs,
        unmatched_predicted,
        unmatched_reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lb(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> LabeledBox {
        LabeledBox::new(id, AxisAlignedBox2::new(x0, y0, x1, y1).unwrap())
    }

    #[test]
    fn single_candidate() {
        let r = [lb("r", 0.0, 0.0, 10.0, 10.0)];
        let p = [lb("p", 0.0, 0.0, 10.0, 9.0)];
        let m = match_boxes_bidirectional(&r, &p, 0.5).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert!((m.pairs[0].iou - 0.9).abs() < 1e-12);
    }

    #[test]
    fn contested_prediction_keeps_best_reference() {
        let p = [lb("p", 0.0, 0.0, 10.0, 10.0)];
        let r = [lb("r6", 0.0, 0.0, 10.0, 6.0), lb("r8", 0.0, 0.0, 10.0, 8.0)];
        let m = match_boxes_bidirectional(&r, &p, 0.5).unwrap();
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].reference, "r8");
        assert!((m.pairs[0].iou - 0.8).abs() < 1e-12);
        assert_eq!(m.unmatched_reference, vec!["r6".to_string()]);
    }

    #[test]
    fn below_threshold_unmatched() {
        let r = [lb("r", 0.0, 0.0, 10.0, 3.0)];
        let p = [lb("p", 0.0, 0.0, 10.0, 10.0)];
        let m = match_boxes_bidirectional(&r, &p, 0.5).unwrap();
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_predicted, vec!["p".to_string()]);
        assert_eq!(m.unmatched_reference, vec!["r".to_string()]);
    }

    #[test]
    fn empty_and_bad_threshold() {
        assert_eq!(
            match_boxes_bidirectional(&[], &[], 0.5).unwrap(),
            MatchResult::default()
        );
        assert!(match_boxes_bidirectional(&[], &[], 0.0).is_err());
        assert!(match_boxes_bidirectional(&[], &[], 1.5).is_err());
    }
}
