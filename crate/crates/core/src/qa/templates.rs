use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    binding, fmt_point, fmt_trimmed, normalize_pixel, reference_constraints, round2, Answer, Family, QAPair, QaContext,
    QaProgram,
};
use crate::error::{Error, Result};
use crate::eval::{count_reasoning_steps, Constraint, MAX_STEPS};
use crate::freespace::FreeSpaceRelation;
use crate::scene::{ReferringExpression, RelationValue, SpatialRelationKind, ValueKind};

const LIBRARY_JSON: &str = include_str!("../../data/qa_templates.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Vqa,
    Choice,
    Fact,
    Point,
    Reasoning,
}

/// Which computation fills a template's answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AnswerRule {
    Relation(SpatialRelationKind),
    Larger,
    ObjectPoint,
    ObjectAt,
    DepthAt,
    FreeSpace(FreeSpaceRelation),
    Fact(SpatialRelationKind),
    Describe,
    Identify,
    EmptySpace,
}

impl AnswerRule {
    fn expected_kind(self) -> TemplateKind {
        match self {
            AnswerRule::Relation(_) | AnswerRule::ObjectAt | AnswerRule::DepthAt => TemplateKind::Vqa,
            AnswerRule::Larger => TemplateKind::Choice,
            AnswerRule::ObjectPoint | AnswerRule::FreeSpace(_) => TemplateKind::Point,
            AnswerRule::Fact(_) => TemplateKind::Fact,
            AnswerRule::Describe | AnswerRule::Identify | AnswerRule::EmptySpace => TemplateKind::Reasoning,
        }
    }

    /// Object slots the rule consumes, when fixed.
    fn object_slots(self) -> Option<usize> {
        Some(match self {
            AnswerRule::Relation(k) => k.arity().others() + 1,
            AnswerRule::Larger => 2,
            AnswerRule::ObjectPoint | AnswerRule::Describe => 1,
            AnswerRule::FreeSpace(r) => r.target_count(),
            AnswerRule::ObjectAt | AnswerRule::DepthAt | AnswerRule::Identify | AnswerRule::EmptySpace => 0,
            AnswerRule::Fact(_) => return None,
        })
    }
}

impl fmt::Display for AnswerRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnswerRule::Relation(k) => write!(f, "relation:{k}"),
            AnswerRule::Larger => f.write_str("larger"),
            AnswerRule::ObjectPoint => f.write_str("object_point"),
            AnswerRule::ObjectAt => f.write_str("object_at"),
            AnswerRule::DepthAt => f.write_str("depth_at"),
            AnswerRule::FreeSpace(r) => write!(f, "free_space:{r}"),
            AnswerRule::Fact(k) => write!(f, "fact:{k}"),
            AnswerRule::Describe => f.write_str("describe"),
            AnswerRule::Identify => f.write_str("identify"),
            AnswerRule::EmptySpace => f.write_str("empty_space"),
        }
    }
}

impl FromStr for AnswerRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.split_once(':') {
            Some(("relation", k)) => AnswerRule::Relation(k.parse()?),
            Some(("free_space", r)) => AnswerRule::FreeSpace(r.parse()?),
            Some(("fact", k)) => AnswerRule::Fact(k.parse()?),
            None => match s {
                "larger" => AnswerRule::Larger,
                "object_point" => AnswerRule::ObjectPoint,
                "object_at" => AnswerRule::ObjectAt,
                "depth_at" => AnswerRule::DepthAt,
                "describe" => AnswerRule::Describe,
                "identify" => AnswerRule::Identify,
                "empty_space" => AnswerRule::EmptySpace,
                _ => return Err(Error::Usage(format!("unknown answer rule `{s}`"))),
            },
            _ => return Err(Error::Usage(format!("unknown answer rule `{s}`"))),
        })
    }
}

impl TryFrom<String> for AnswerRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AnswerRule> for String {
    fn from(r: AnswerRule) -> String {
        r.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QATemplate {
    pub template_id: String,
    pub family: Family,
    pub kind: TemplateKind,
    /// Text with `[A]`-style slots.
    pub pattern: String,
    pub rule: AnswerRule,
}

fn slot_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([A-Z])\]").expect("static regex"))
}

/// Slots that name objects, in binding order.
const OBJECT_SLOTS: [&str; 3] = ["A", "B", "C"];

impl QATemplate {
    /// Slot names in order of first appearance.
    pub fn slots(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in slot_re().captures_iter(&self.pattern) {
            let s = c[1].to_string();
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("template `{}`.{f}", self.template_id);
        if self.rule.expected_kind() != self.kind {
            return Err(Error::validation(
                field("kind"),
                format!("rule `{}` answers {:?} items", self.rule, self.rule.expected_kind()),
            ));
        }
        let slots = self.slots();
        let objects = slots.iter().filter(|s| OBJECT_SLOTS.contains(&s.as_str())).count();
        if let Some(want) = self.rule.object_slots() {
            if objects != want {
                return Err(Error::validation(
                    field("pattern"),
                    format!(
                        "rule `{}` needs {want} object slot(s), pattern has {objects}",
                        self.rule
                    ),
                ));
            }
        }
        let needs_point = matches!(self.rule, AnswerRule::ObjectAt | AnswerRule::DepthAt);
        if needs_point != slots.iter().any(|s| s == "X") && !matches!(self.rule, AnswerRule::Fact(_)) {
            return Err(Error::validation(field("pattern"), "point slot [X] mismatch"));
        }
        Ok(())
    }
}

/// The bundled template library, validated on first use.
pub fn template_library() -> &'static [QATemplate] {
    static LIB: OnceLock<Vec<QATemplate>> = OnceLock::new();
    LIB.get_or_init(|| {
        let lib: Vec<QATemplate> = serde_json::from_str(LIBRARY_JSON).expect("bundled QA templates parse");
        for t in &lib {
            t.validate().expect("bundled QA templates are consistent");
        }
        lib
    })
}

pub(crate) fn template(id: &str) -> &'static QATemplate {
    template_library()
        .iter()
        .find(|t| t.template_id == id)
        .unwrap_or_else(|| panic!("template `{id}` is bundled"))
}

/// Substitutes every slot; an unbound slot is a usage error.
pub(crate) fn fill_pattern(pattern: &str, values: &BTreeMap<String, String>) -> Result<String> {
    let mut missing = None;
    let out = slot_re().replace_all(pattern, |c: &regex::Captures<'_>| match values.get(&c[1]) {
        Some(v) => v.clone(),
        None => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(s) => Err(Error::Usage(format!("slot [{s}] of \"{pattern}\" is unbound"))),
        None => Ok(out.into_owned()),
    }
}

/// What a slot is bound to.
#[derive(Clone, Debug, PartialEq)]
pub enum SlotValue {
    Object(ReferringExpression),
    /// The object's representative pixel, shown as normalized coordinates.
    PointOf(ReferringExpression),
    /// A raw pixel position.
    Pixel([f64; 2]),
    Text(String),
}

fn yes_no(b: bool) -> Answer {
    Answer::Text(if b { "Yes" } else { "No" }.into())
}

fn metric_answer(kind: SpatialRelationKind, v: f64) -> Answer {
    match kind.value_kind() {
        ValueKind::Radians => Answer::Number {
            value: round2(v.to_degrees()),
            unit: "degrees".into(),
        },
        _ => Answer::Number {
            value: round2(v),
            unit: "meters".into(),
        },
    }
}

/// Looks up a relation edge; ternary edges are stored with the pair in id order.
fn edge_value(ctx: &QaContext<'_>, kind: SpatialRelationKind, subject: &str, others: &[&str]) -> Result<RelationValue> {
    let mut sorted = others.to_vec();
    sorted.sort_unstable();
    ctx.graph
        .value(kind, subject, others)
        .or_else(|| ctx.graph.value(kind, subject, &sorted))
        .ok_or_else(|| Error::Generation(format!("graph has no `{kind}` edge for `{subject}` -> {others:?}")))
}

/// Fills `template` from `bindings` and computes its answer from the scene
/// graph, free-space regions or depth map held by `ctx`.
pub fn instantiate_template(
    ctx: &QaContext<'_>,
    template: &QATemplate,
    bindings: &BTreeMap<String, SlotValue>,
) -> Result<QAPair> {
    let (w, h) = (ctx.width(), ctx.height());
    let mut texts = BTreeMap::new();
    let mut objects: Vec<&ReferringExpression> = Vec::new();
    let mut point: Option<([f64; 2], Option<&ReferringExpression>)> = None;
    let mut bound = Vec::new();
    for slot in template.slots() {
        let Some(value) = bindings.get(&slot) else {
            return Err(Error::Usage(format!(
                "slot [{slot}] of `{}` is unbound",
                template.template_id
            )));
        };
        let text = match value {
            SlotValue::Object(e) => {
                objects.push(e);
                bound.push(binding(&slot, e));
                e.text.clone()
            }
            SlotValue::PointOf(e) => {
                let o = ctx.frame.object(&e.object_id)?;
                point = Some(([o.point2d.0, o.point2d.1], Some(e)));
                bound.push(binding(&slot, e));
                fmt_point(normalize_pixel(o.point2d.0, o.point2d.1, w, h))
            }
            SlotValue::Pixel(p) => {
                point = Some((*p, None));
                fmt_point(normalize_pixel(p[0], p[1], w, h))
            }
            SlotValue::Text(t) => t.clone(),
        };
        texts.insert(slot, text);
    }
    let question = fill_pattern(&template.pattern, &texts)?;
    let ids: Vec<&str> = objects.iter().map(|e| e.object_id.as_str()).collect();

    let mut constraints: Vec<Constraint> = Vec::new();
    let anchor_refs = |constraints: &mut Vec<Constraint>, e: &ReferringExpression| {
        constraints.extend(reference_constraints(ctx, e).into_iter().filter(|c| !c.intrinsic));
    };

    let (answer, program) = match template.rule {
        AnswerRule::Relation(kind) => {
            let value = edge_value(ctx, kind, ids[0], &ids[1..])?;
            constraints.extend(reference_constraints(ctx, objects[0]));
            for e in &objects[1..] {
                constraints.push(Constraint::new(e.text.clone(), kind.name()));
                anchor_refs(&mut constraints, e);
            }
            let answer = match value {
                RelationValue::Bool(b) => yes_no(b),
                RelationValue::Metric(m) => metric_answer(kind, m),
            };
            let program = QaProgram::Relation {
                relation: kind,
                subject: ids[0].to_string(),
                others: ids[1..].iter().map(|s| s.to_string()).collect(),
            };
            (answer, program)
        }
        AnswerRule::Larger => {
            let bigger = edge_value(ctx, SpatialRelationKind::Bigger, ids[0], &ids[1..])?.as_bool();
            let smaller = edge_value(ctx, SpatialRelationKind::Smaller, ids[0], &ids[1..])?.as_bool();
            let correct = match (bigger, smaller) {
                (Some(true), _) => 0,
                (_, Some(true)) => 1,
                _ => return Err(Error::Generation(format!("neither of {ids:?} is clearly larger"))),
            };
            for e in &objects {
                constraints.extend(reference_constraints(ctx, e));
            }
            let answer = Answer::Choice {
                options: objects.iter().map(|e| e.text.clone()).collect(),
                correct,
            };
            (
                answer,
                QaProgram::Larger {
                    options: ids.iter().map(|s| s.to_string()).collect(),
                },
            )
        }
        AnswerRule::ObjectPoint => {
            constraints.extend(reference_constraints(ctx, objects[0]));
            let answer = Answer::Point2d(ctx.object_point(ids[0])?);
            (
                answer,
                QaProgram::Locate {
                    object_id: ids[0].to_string(),
                },
            )
        }
        AnswerRule::ObjectAt => {
            let Some((pixel, Some(e))) = point else {
                return Err(Error::Usage(format!(
                    "`{}` needs [X] bound to an object's point",
                    template.template_id
                )));
            };
            constraints.push(Constraint::intrinsic("point"));
            let program = QaProgram::ObjectAt {
                pixel,
                object_id: e.object_id.clone(),
            };
            (Answer::Text(e.text.clone()), program)
        }
        AnswerRule::DepthAt => {
            let Some((pixel, _)) = point else {
                return Err(Error::Usage(format!("`{}` needs [X] bound", template.template_id)));
            };
            let depth = ctx
                .depth
                .ok_or_else(|| Error::Generation("depth questions need a depth map".into()))?;
            let z = depth
                .get(pixel[0] as u32, pixel[1] as u32)
                .filter(|z| z.is_finite() && *z > 0.0)
                .ok_or_else(|| Error::Generation(format!("no valid depth at {pixel:?}")))?;
            constraints.push(Constraint::intrinsic("point"));
            let answer = Answer::Number {
                value: round2(z),
                unit: "meters".into(),
            };
            (answer, QaProgram::DepthAt { pixel })
        }
        AnswerRule::FreeSpace(relation) => {
            let target_ids: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
            let region = ctx
                .region(relation, &target_ids)
                .ok_or_else(|| Error::Generation(format!("no `{relation}` region for {target_ids:?}")))?;
            let (u, v) = match (region.selected_point, &region.rejection) {
                (Some(p), _) => p,
                (None, Some(why)) => return Err(Error::Generation(format!("`{relation}` region rejected: {why}"))),
                (None, None) => return Err(Error::Generation(format!("`{relation}` region has no point"))),
            };
            for (i, e) in objects.iter().enumerate() {
                let rel = if i == 0 { relation.name() } else { "" };
                constraints.push(Constraint::new(e.text.clone(), rel));
                anchor_refs(&mut constraints, e);
            }
            let answer = Answer::Point2d(normalize_pixel(u, v, w, h));
            (
                answer,
                QaProgram::Placement {
                    query: region.query.clone(),
                },
            )
        }
        AnswerRule::Fact(_) | AnswerRule::Describe | AnswerRule::Identify | AnswerRule::EmptySpace => {
            return Err(Error::Usage(format!(
                "`{}` is not a question template; it has its own generator",
                template.template_id
            )))
        }
    };

    if let Answer::Number { value, .. } = &answer {
        let literal = fmt_trimmed(*value);
        if question.contains(&literal) {
            return Err(Error::Generation(format!("answer {literal} appears in the question")));
        }
    }

    Ok(QAPair {
        qa_id: template.template_id.clone(),
        image_ref: ctx.frame.image_ref.clone(),
        depth_ref: Some(ctx.frame.depth_ref.clone()),
        question,
        answer,
        reasoning: vec![],
        source: template.family.source(),
        step_count: count_reasoning_steps(&constraints, MAX_STEPS),
        seed: 0,
        frame_id: ctx.frame.frame_id.clone(),
        family: template.family,
        template_id: template.template_id.clone(),
        constraints,
        program,
        bindings: bound,
    })
}
