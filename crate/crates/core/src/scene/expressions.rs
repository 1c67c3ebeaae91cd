//! Hierarchical referring expressions: plain category, attribute or caption,
//! ordinal position within a same-category group, and anchor-relative.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::ordering::{dominant_axis, rank_objects, DiversityThreshold, OrderDirection};
use super::relations::{evaluate_relation, SpatialRelationKind};
use super::{ObjectInstance, SceneFrame};
use crate::defaults::Thresholds;
use crate::error::{Error, Result};
use crate::rng::CounterRng;

const TEMPLATES_JSON: &str = include_str!("../../data/ordinal_templates.json");

/// A nearest-anchor expression needs the runner-up to be this much farther.
const ANCHOR_MARGIN_M: f64 = 0.01;

fn templates() -> &'static HashMap<String, Vec<String>> {
    static CELL: OnceLock<HashMap<String, Vec<String>>> = OnceLock::new();
    CELL.get_or_init(|| serde_json::from_str(TEMPLATES_JSON).expect("bundled ordinal templates are valid JSON"))
}

pub(crate) fn ordinal_templates(direction: OrderDirection) -> &'static [String] {
    templates()
        .get(direction.key())
        .map(Vec::as_slice)
        .expect("every direction has templates")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Category,
    Attribute,
    Ordinal,
    Anchored,
}

/// Structured form of an expression, resolvable against a frame without
/// parsing its text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceProgram {
    /// Every object of the category.
    Category {
        category: String,
    },
    /// Objects of the category whose color/caption phrase matches.
    Attribute {
        category: String,
        phrase: String,
    },
    Ordinal {
        category: String,
        direction: OrderDirection,
        ordinal: usize,
    },
    ClosestTo {
        category: String,
        anchor: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferringExpression {
    pub object_id: String,
    pub text: String,
    pub tier: Tier,
    pub program: ReferenceProgram,
    /// Whether the program selects this object alone.
    pub unique: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpressionSet {
    pub expressions: Vec<ReferringExpression>,
    /// Objects in same-category groups with no dominant axis.
    pub ambiguous: Vec<String>,
}

impl ExpressionSet {
    pub fn for_object<'a>(&'a self, id: &str) -> impl Iterator<Item = &'a ReferringExpression> + 'a {
        let id = id.to_string();
        self.expressions.iter().filter(move |e| e.object_id == id)
    }

    /// The preferred uniquely resolving expression, if any.
    pub fn best_for<'a>(&'a self, id: &str) -> Option<&'a ReferringExpression> {
        self.for_object(id).filter(|e| e.unique).min_by_key(|e| match e.tier {
            Tier::Attribute => 0,
            Tier::Category => 1,
            Tier::Ordinal => 2,
            Tier::Anchored => 3,
        })
    }
}

/// "1st", "2nd", "3rd", "11th", ...
pub fn ordinal_word(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn groups(frame: &SceneFrame) -> BTreeMap<&str, Vec<&ObjectInstance>> {
    let mut out: BTreeMap<&str, Vec<&ObjectInstance>> = BTreeMap::new();
    for o in &frame.objects {
        out.entry(o.category.as_str()).or_default().push(o);
    }
    out
}

fn fill(template: &str, caption: &str, ordinal: usize, class_name: &str) -> String {
    template
        .replace("{dense_caption}", caption)
        .replace("{ordinal}", &ordinal_word(ordinal))
        .replace("{class_name}", class_name)
}

/// Objects matching the program, sorted by id.
pub fn resolve_reference(frame: &SceneFrame, program: &ReferenceProgram, t: &Thresholds) -> Result<Vec<String>> {
    let members =
        |category: &str| -> Vec<&ObjectInstance> { frame.objects.iter().filter(|o| o.category == category).collect() };
    let mut out = match program {
        ReferenceProgram::Category { category } => members(category).iter().map(|o| o.id.clone()).collect(),
        ReferenceProgram::Attribute { category, phrase } => members(category)
            .iter()
            .filter(|o| o.base_phrase() == *phrase)
            .map(|o| o.id.clone())
            .collect(),
        ReferenceProgram::Ordinal {
            category,
            direction,
            ordinal,
        } => {
            let group = members(category);
            rank_objects(&group, &frame.viewer(), *direction)
                .into_iter()
                .filter(|(_, r)| r == ordinal)
                .map(|(id, _)| id)
                .collect()
        }
        ReferenceProgram::ClosestTo { category, anchor } => {
            let mut dists = Vec::new();
            for o in members(category) {
                if o.id == *anchor {
                    continue;
                }
                let d = evaluate_relation(frame, SpatialRelationKind::PairwiseDistance, &o.id, &[anchor], t)?
                    .as_metric()
                    .ok_or_else(|| Error::Generation("pairwise distance is metric".into()))?;
                dists.push((o.id.clone(), d));
            }
            let min = dists.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
            dists
                .into_iter()
                .filter(|(_, d)| *d <= min + ANCHOR_MARGIN_M)
                .map(|(id, _)| id)
                .collect::<Vec<_>>()
        }
    };
    out.sort();
    Ok(out)
}

/// Deterministic expressions: the canonical direction of each group's
/// dominant axis and the first template for it.
pub fn generate_referring_expressions(frame: &SceneFrame, t: &Thresholds) -> Result<ExpressionSet> {
    generate(frame, t, None)
}

/// Like [`generate_referring_expressions`], but the direction along the
/// dominant axis and the template are drawn from `seed`.
pub fn generate_referring_expressions_seeded(frame: &SceneFrame, t: &Thresholds, seed: u64) -> Result<ExpressionSet> {
    let mut rng = CounterRng::fork(seed, &format!("expressions/{}", frame.frame_id));
    generate(frame, t, Some(&mut rng))
}

fn generate(frame: &SceneFrame, t: &Thresholds, mut rng: Option<&mut CounterRng>) -> Result<ExpressionSet> {
    let view = frame.viewer();
    let groups = groups(frame);
    let mut set = ExpressionSet::default();

    for (category, members) in &groups {
        for o in members {
            let phrase = o.base_phrase();
            let (tier, program, unique) = if o.caption.is_some() || o.color.is_some() {
                let same = members.iter().filter(|m| m.base_phrase() == phrase).count();
                let program = ReferenceProgram::Attribute {
                    category: category.to_string(),
                    phrase: phrase.clone(),
                };
                (Tier::Attribute, program, same == 1)
            } else {
                let program = ReferenceProgram::Category {
                    category: category.to_string(),
                };
                (Tier::Category, program, members.len() == 1)
            };
            set.expressions.push(ReferringExpression {
                object_id: o.id.clone(),
                text: phrase,
                tier,
                program,
                unique,
            });
        }
        if members.len() == 1 {
            continue;
        }

        let threshold = DiversityThreshold::RelativeToFootprint(t.diversity_factor);
        match dominant_axis(members, &view, threshold)? {
            None => set.ambiguous.extend(
                members
                    .iter()
                    .filter(|o| !set.expressions.iter().any(|e| e.object_id == o.id && e.unique))
                    .map(|o| o.id.clone()),
            ),
            Some(axis) => {
                let direction = match rng.as_deref_mut() {
                    Some(r) => axis.directions()[r.below(2)],
                    None => axis.canonical_direction(),
                };
                let options = ordinal_templates(direction);
                let ranks = rank_objects(members, &view, direction);
                for o in members {
                    let template = match rng.as_deref_mut() {
                        Some(r) => &options[r.below(options.len())],
                        None => &options[0],
                    };
                    let ordinal = ranks[&o.id];
                    set.expressions.push(ReferringExpression {
                        object_id: o.id.clone(),
                        text: fill(template, &o.base_phrase(), ordinal, category),
                        tier: Tier::Ordinal,
                        program: ReferenceProgram::Ordinal {
                            category: category.to_string(),
                            direction,
                            ordinal,
                        },
                        unique: true,
                    });
                }
            }
        }

        // Anchor on single-instance non-platform objects of other categories.
        for (anchor_cat, anchors) in &groups {
            if anchor_cat == category || anchors.len() != 1 || frame.is_platform(&anchors[0].id) {
                continue;
            }
            let anchor = anchors[0];
            let program = ReferenceProgram::ClosestTo {
                category: category.to_string(),
                anchor: anchor.id.clone(),
            };
            let hits = resolve_reference(frame, &program, t)?;
            if let [only] = hits.as_slice() {
                set.expressions.push(ReferringExpression {
                    object_id: only.clone(),
                    text: format!("the {category} closest to {}", anchor.base_phrase()),
                    tier: Tier::Anchored,
                    program,
                    unique: true,
                });
            }
        }
    }
    set.expressions
        .sort_by(|a, b| a.object_id.cmp(&b.object_id).then(a.tier.cmp(&b.tier)));
    set.ambiguous.sort();
    Ok(set)
}
