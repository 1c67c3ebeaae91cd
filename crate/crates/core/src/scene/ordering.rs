use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ObjectInstance, ViewerFrame};
use crate::error::{Error, Result};

/// Axes of the viewer-aligned gravity frame: X is viewer right, Y is up,
/// Z points back toward the viewer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::Z,
            Axis::Z => Axis::X,
        }
    }

    /// The direction used when no other is requested.
    pub fn canonical_direction(self) -> OrderDirection {
        match self {
            Axis::X => OrderDirection::LeftToRight,
            Axis::Y => OrderDirection::TopToBottom,
            Axis::Z => OrderDirection::FrontToBack,
        }
    }

    pub fn directions(self) -> [OrderDirection; 2] {
        match self {
            Axis::X => [OrderDirection::LeftToRight, OrderDirection::RightToLeft],
            Axis::Y => [OrderDirection::TopToBottom, OrderDirection::BottomToTop],
            Axis::Z => [OrderDirection::FrontToBack, OrderDirection::BackToFront],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderDirection {
    LeftToRight,
    RightToLeft,
    FrontToBack,
    BackToFront,
    TopToBottom,
    BottomToTop,
}

impl OrderDirection {
    pub const ALL: [OrderDirection; 6] = [
        OrderDirection::LeftToRight,
        OrderDirection::RightToLeft,
        OrderDirection::FrontToBack,
        OrderDirection::BackToFront,
        OrderDirection::TopToBottom,
        OrderDirection::BottomToTop,
    ];

    pub fn axis(self) -> Axis {
        match self {
            OrderDirection::LeftToRight | OrderDirection::RightToLeft => Axis::X,
            OrderDirection::TopToBottom | OrderDirection::BottomToTop => Axis::Y,
            OrderDirection::FrontToBack | OrderDirection::BackToFront => Axis::Z,
        }
    }

    /// True when ordinal 1 has the smallest coordinate.
    fn ascending(self) -> bool {
        matches!(
            self,
            OrderDirection::LeftToRight | OrderDirection::BackToFront | OrderDirection::BottomToTop
        )
    }

    pub fn key(self) -> &'static str {
        match self {
            OrderDirection::LeftToRight => "left_to_right",
            OrderDirection::RightToLeft => "right_to_left",
            OrderDirection::FrontToBack => "front_to_back",
            OrderDirection::BackToFront => "back_to_front",
            OrderDirection::TopToBottom => "top_to_bottom",
            OrderDirection::BottomToTop => "bottom_to_top",
        }
    }
}

impl fmt::Display for OrderDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for OrderDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OrderDirection::ALL
            .into_iter()
            .find(|d| d.key() == s)
            .ok_or_else(|| Error::Usage(format!("unknown order direction `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityThreshold {
    /// Fixed standard deviation in meters.
    Absolute(f64),
    /// Multiple of the group's mean footprint diagonal.
    RelativeToFootprint(f64),
}

impl DiversityThreshold {
    pub fn resolve(self, instances: &[&ObjectInstance]) -> f64 {
        match self {
            DiversityThreshold::Absolute(m) => m,
            DiversityThreshold::RelativeToFootprint(f) => {
                let n = instances.len().max(1) as f64;
                f * instances.iter().map(|o| o.obb.footprint_diagonal()).sum::<f64>() / n
            }
        }
    }
}

/// Population standard deviation of the centre coordinates per viewer axis.
pub(crate) fn axis_sigmas(instances: &[&ObjectInstance], view: &ViewerFrame) -> [f64; 3] {
    let n = instances.len() as f64;
    let coords: Vec<_> = instances.iter().map(|o| view.coords(&o.obb.center)).collect();
    let mut out = [0.0; 3];
    for (k, s) in out.iter_mut().enumerate() {
        let mean = coords.iter().map(|c| c[k]).sum::<f64>() / n;
        *s = (coords.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / n).sqrt();
    }
    out
}

/// The axis along which the centres spread most, or `None` when even that
/// spread is below the threshold. Exact ties prefer X, then Y, then Z.
pub fn dominant_axis(
    instances: &[&ObjectInstance],
    view: &ViewerFrame,
    threshold: DiversityThreshold,
) -> Result<Option<Axis>> {
    if instances.len() < 2 {
        return Err(Error::Usage(format!(
            "dominant axis needs at least 2 instances, got {}",
            instances.len()
        )));
    }
    let sig = axis_sigmas(instances, view);
    let mut axis = Axis::X;
    for a in [Axis::Y, Axis::Z] {
        if sig[a.index()] > sig[axis.index()] {
            axis = a;
        }
    }
    Ok((sig[axis.index()] >= threshold.resolve(instances)).then_some(axis))
}

/// Ordinals 1..n along `direction`; ties fall back to the next axis
/// (ascending), then to the id.
pub fn rank_objects(
    instances: &[&ObjectInstance],
    view: &ViewerFrame,
    direction: OrderDirection,
) -> BTreeMap<String, usize> {
    let axis = direction.axis();
    let second = axis.next();
    let third = second.next();
    let mut keyed: Vec<_> = instances
        .iter()
        .map(|o| (view.coords(&o.obb.center), o.id.as_str()))
        .collect();
    keyed.sort_by(|(a, ia), (b, ib)| {
        let primary = a[axis.index()].total_cmp(&b[axis.index()]);
        let primary = if direction.ascending() {
            primary
        } else {
            primary.reverse()
        };
        primary
            .then_with(|| a[second.index()].total_cmp(&b[second.index()]))
            .then_with(|| a[third.index()].total_cmp(&b[third.index()]))
            .then_with(|| ia.cmp(ib))
    });
    keyed
        .iter()
        .enumerate()
        .map(|(i, (_, id))| (id.to_string(), i + 1))
        .collect()
}
