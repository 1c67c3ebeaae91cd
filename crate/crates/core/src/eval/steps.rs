use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub const VIEWER: &str = "viewer";
pub const MAX_STEPS: usize = 5;

/// One structured piece of an instruction: an anchor object (or the viewer)
/// and the relation linking the target to it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub anchor: String,
    #[serde(default)]
    pub relation: String,
    /// Colour, material and similar properties of the target itself.
    #[serde(default)]
    pub intrinsic: bool,
}

impl Constraint {
    pub fn new(anchor: impl Into<String>, relation: impl Into<String>) -> Self {
        Self {
            anchor: anchor.into(),
            relation: relation.into(),
            intrinsic: false,
        }
    }

    pub fn intrinsic(relation: impl Into<String>) -> Self {
        Self {
            anchor: VIEWER.into(),
            relation: relation.into(),
            intrinsic: true,
        }
    }

    fn has_anchor(&self) -> bool {
        !self.intrinsic && !self.anchor.trim().eq_ignore_ascii_case(VIEWER) && !self.anchor.trim().is_empty()
    }

    fn relation_counts(&self) -> bool {
        let r = self.relation.trim();
        self.has_anchor() && !r.is_empty() && !r.eq_ignore_ascii_case("on")
    }
}

/// Distinct non-viewer anchors plus anchor-linked relations other than "on",
/// clamped to `1..=max_steps`.
pub fn count_reasoning_steps(constraints: &[Constraint], max_steps: usize) -> usize {
    let anchors: BTreeSet<&str> = constraints
        .iter()
        .filter(|c| c.has_anchor())
        .map(|c| c.anchor.trim())
        .collect();
    let relations = constraints.iter().filter(|c| c.relation_counts()).count();
    (anchors.len() + relations).clamp(1, max_steps.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attributes_only_floor_to_one() {
        assert_eq!(count_reasoning_steps(&[Constraint::intrinsic("red")], MAX_STEPS), 1);
        assert_eq!(count_reasoning_steps(&[], MAX_STEPS), 1);
    }

    #[test]
    fn one_anchor_one_relation() {
        assert_eq!(
            count_reasoning_steps(&[Constraint::new("the keyboard", "left")], MAX_STEPS),
            2
        );
    }

    #[test]
    fn capped_at_five() {
        let c = [
            Constraint::new("a", "left"),
            Constraint::new("b", "near"),
            Constraint::new("c", ""),
        ];
        assert_eq!(count_reasoning_steps(&c, MAX_STEPS), 5);
        let more = [
            Constraint::new("a", "left"),
            Constraint::new("b", "near"),
            Constraint::new("c", "behind"),
        ];
        assert_eq!(count_reasoning_steps(&more, MAX_STEPS), 5);
    }

    #[test]
    fn viewer_and_on_do_not_count() {
        let c = [
            Constraint::new("viewer", "left_to_right"),
            Constraint::new("the table", "on"),
        ];
        assert_eq!(count_reasoning_steps(&c, MAX_STEPS), 1);
    }

    #[test]
    fn repeated_anchor_counts_once() {
        let c = [Constraint::new("a", "left"), Constraint::new("a", "near")];
        assert_eq!(count_reasoning_steps(&c, MAX_STEPS), 3);
    }
}
