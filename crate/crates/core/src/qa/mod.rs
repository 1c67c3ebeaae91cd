//! Question/answer generation from scene graphs and free-space regions:
//! template VQA, choice and point questions, declarative facts, and
//! multi-step reasoning items with key-step chains.

mod facts;
mod reasoning;
mod spatial;
mod templates;

pub use facts::generate_fact_statements;
pub use reasoning::{generate_reasoning_qa, ReasoningTask};
pub use spatial::{generate_spatial_qa, QaConfig, QaReport, SkippedFamily};
pub use templates::{instantiate_template, template_library, AnswerRule, QATemplate, SlotValue, TemplateKind};

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::defaults::Thresholds;
use crate::error::{Error, Result};
use crate::eval::{read_jsonl, Constraint, Subset};
use crate::freespace::{sample_free_space, FreeSpaceQuery, FreeSpaceRegion, FreeSpaceRelation};
use crate::geometry::{DepthMap, Mask, Vec3};
use crate::scene::{
    build_scene_graph, generate_referring_expressions_seeded, ExpressionSet, ReferenceProgram, ReferringExpression,
    SceneFrame, SceneGraph, SpatialRelationKind,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Position,
    Orientation,
    Attribute,
    Quantitative,
    Location,
    Placement,
    Between,
    Reasoning,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Position,
        Family::Orientation,
        Family::Attribute,
        Family::Quantitative,
        Family::Location,
        Family::Placement,
        Family::Between,
        Family::Reasoning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Position => "position",
            Family::Orientation => "orientation",
            Family::Attribute => "attribute",
            Family::Quantitative => "quantitative",
            Family::Location => "location",
            Family::Placement => "placement",
            Family::Between => "between",
            Family::Reasoning => "reasoning",
        }
    }

    pub fn source(self) -> Source {
        match self {
            Family::Placement | Family::Between => Source::Freespace,
            Family::Reasoning => Source::Simulation,
            _ => Source::Graph3d,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown QA family `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "2d-graph")]
    Graph2d,
    #[serde(rename = "3d-graph")]
    Graph3d,
    #[serde(rename = "freespace")]
    Freespace,
    #[serde(rename = "simulation")]
    Simulation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerceptionType {
    Position,
    Orientation,
    Size,
}

impl PerceptionType {
    pub fn name(self) -> &'static str {
        match self {
            PerceptionType::Position => "Position",
            PerceptionType::Orientation => "Orientation",
            PerceptionType::Size => "Size",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeyStepValue {
    Point([f64; 2]),
    Vector([f64; 3]),
    Meters(f64),
}

/// One `[Type] [target]: value` line of a reasoning chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyStep {
    pub perception_type: PerceptionType,
    pub target_text: String,
    pub value: KeyStepValue,
}

/// Unit-norm tolerance after each component is rounded to 3 decimals.
const ROUNDED_UNIT_TOL: f64 = 2e-3;

impl KeyStep {
    pub fn position(target: impl Into<String>, normalized: [f64; 2]) -> Self {
        Self {
            perception_type: PerceptionType::Position,
            target_text: target.into(),
            value: KeyStepValue::Point([round3(normalized[0]), round3(normalized[1])]),
        }
    }

    pub fn orientation(target: impl Into<String>, dir: &Vec3) -> Self {
        let d = dir.normalize();
        Self {
            perception_type: PerceptionType::Orientation,
            target_text: target.into(),
            value: KeyStepValue::Vector([round3(d.x), round3(d.y), round3(d.z)]),
        }
    }

    pub fn size(target: impl Into<String>, meters: f64) -> Self {
        Self {
            perception_type: PerceptionType::Size,
            target_text: target.into(),
            value: KeyStepValue::Meters(round3(meters)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Err(Error::validation(format!("key_step `{}`", self.target_text), reason));
        if self.target_text.trim().is_empty() {
            return bad("empty target text".into());
        }
        match (self.perception_type, self.value) {
            (PerceptionType::Position, KeyStepValue::Point(p)) => {
                if p.iter()
                    .any(|c| !(0.0..=1.0).contains(c) || (round3(*c) - c).abs() > 1e-9)
                {
                    return bad(format!("position {p:?} must be in [0,1]² with 3 decimals"));
                }
            }
            (PerceptionType::Orientation, KeyStepValue::Vector(v)) => {
                let n = Vec3::from(v).norm();
                if (n - 1.0).abs() > ROUNDED_UNIT_TOL {
                    return bad(format!("orientation norm {n} is not 1"));
                }
            }
            (PerceptionType::Size, KeyStepValue::Meters(m)) => {
                if !(m.is_finite() && m > 0.0) {
                    return bad(format!("size {m} must be positive"));
                }
            }
            (t, v) => return bad(format!("{} step cannot hold {v:?}", t.name())),
        }
        Ok(())
    }

    pub fn line(&self) -> String {
        let value = match self.value {
            KeyStepValue::Point([x, y]) => format!("[({x:.3}, {y:.3})]"),
            KeyStepValue::Vector([x, y, z]) => format!("({x:.3}, {y:.3}, {z:.3})"),
            KeyStepValue::Meters(m) => fmt_trimmed(m),
        };
        format!("[{}] [{}]: {value}", self.perception_type.name(), self.target_text)
    }
}

/// Half-up rounding to three decimals.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0 + 0.5).floor() / 1000.0
}

pub(crate) fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5).floor() / 100.0
}

/// Up to three decimals with trailing zeros dropped.
pub(crate) fn fmt_trimmed(x: f64) -> String {
    let s = format!("{:.3}", round3(x));
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_string()
}

/// Pixel to normalized coordinates, rounded to three decimals. For images
/// narrower than 1000 px the rounded value maps back to the same pixel.
pub fn normalize_pixel(u: f64, v: f64, width: u32, height: u32) -> [f64; 2] {
    [round3(u / width as f64), round3(v / height as f64)]
}

pub(crate) fn fmt_point(p: [f64; 2]) -> String {
    format!("({:.3}, {:.3})", p[0], p[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "answer_type", content = "answer", rename_all = "snake_case")]
pub enum Answer {
    Text(String),
    Choice { options: Vec<String>, correct: usize },
    Number { value: f64, unit: String },
    Point2d([f64; 2]),
}

impl Answer {
    pub fn point(&self) -> Option<[f64; 2]> {
        match self {
            Answer::Point2d(p) => Some(*p),
            _ => None,
        }
    }
}

/// One relation the answer object satisfies: `relation(target, anchor)`, or
/// `relation(anchor, target)` when `anchor_is_subject`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationConstraint {
    pub relation: SpatialRelationKind,
    pub anchor: String,
    #[serde(default)]
    pub anchor_is_subject: bool,
}

/// Machine-checkable statement of what a QA item asks, used to re-solve it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QaProgram {
    Relation {
        relation: SpatialRelationKind,
        subject: String,
        others: Vec<String>,
    },
    Larger {
        options: Vec<String>,
    },
    Locate {
        object_id: String,
    },
    ObjectAt {
        pixel: [f64; 2],
        object_id: String,
    },
    DepthAt {
        pixel: [f64; 2],
    },
    Placement {
        query: FreeSpaceQuery,
    },
    Identify {
        object_id: String,
        constraints: Vec<RelationConstraint>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub slot: String,
    pub object_id: String,
    pub text: String,
    pub reference: ReferenceProgram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub qa_id: String,
    pub image_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_ref: Option<String>,
    pub question: String,
    #[serde(flatten)]
    pub answer: Answer,
    pub reasoning: Vec<KeyStep>,
    pub source: Source,
    pub step_count: usize,
    pub seed: u64,
    pub frame_id: String,
    pub family: Family,
    pub template_id: String,
    pub constraints: Vec<Constraint>,
    pub program: QaProgram,
    pub bindings: Vec<Binding>,
}

impl QAPair {
    pub fn validate(&self) -> Result<()> {
        let field = |f: &str| format!("{}.{f}", self.qa_id);
        if !(1..=crate::eval::MAX_STEPS).contains(&self.step_count) {
            return Err(Error::validation(
                field("step_count"),
                format!("{} outside 1..=5", self.step_count),
            ));
        }
        if self.reasoning.len() > crate::eval::MAX_STEPS {
            return Err(Error::validation(field("reasoning"), "more than 5 key steps"));
        }
        for s in &self.reasoning {
            s.validate()?;
        }
        if let Answer::Point2d(p) = &self.answer {
            if p.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::validation(field("answer"), "point must be normalized"));
            }
        }
        if let Answer::Choice { options, correct } = &self.answer {
            if *correct >= options.len() {
                return Err(Error::validation(field("answer"), "correct option out of range"));
            }
        }
        Ok(())
    }

    /// Benchmark subset for point-answer items.
    pub fn subset(&self) -> Option<Subset> {
        match (&self.answer, &self.program) {
            (Answer::Point2d(_), QaProgram::Placement { .. }) => Some(Subset::Placement),
            (Answer::Point2d(_), _) => Some(Subset::Location),
            _ => None,
        }
    }
}

/// Everything generation reads from one scene.
pub struct QaContext<'a> {
    pub frame: &'a SceneFrame,
    pub depth: Option<&'a DepthMap>,
    pub graph: SceneGraph,
    pub expressions: ExpressionSet,
    pub regions: Vec<FreeSpaceRegion>,
    pub thresholds: Thresholds,
}

impl<'a> QaContext<'a> {
    /// Builds the full-vocabulary graph and seeded expressions. Regions start
    /// empty; see [`QaContext::with_regions`].
    pub fn new(frame: &'a SceneFrame, depth: Option<&'a DepthMap>, t: &Thresholds, seed: u64) -> Result<Self> {
        Ok(Self {
            frame,
            depth,
            graph: build_scene_graph(frame, &SpatialRelationKind::ALL, t)?,
            expressions: generate_referring_expressions_seeded(frame, t, seed)?,
            regions: vec![],
            thresholds: t.clone(),
        })
    }

    pub fn with_regions(mut self, regions: Vec<FreeSpaceRegion>) -> Self {
        self.regions = regions;
        self
    }

    pub(crate) fn width(&self) -> u32 {
        self.frame.intrinsics.width
    }

    pub(crate) fn height(&self) -> u32 {
        self.frame.intrinsics.height
    }

    /// Non-platform objects, in frame order.
    pub(crate) fn items(&self) -> impl Iterator<Item = &'a crate::scene::ObjectInstance> + '_ {
        self.frame.objects.iter().filter(|o| !self.frame.is_platform(&o.id))
    }

    pub(crate) fn unique_expressions(&self, id: &str) -> Vec<&ReferringExpression> {
        self.expressions.for_object(id).filter(|e| e.unique).collect()
    }

    pub(crate) fn object_point(&self, id: &str) -> Result<[f64; 2]> {
        let o = self.frame.object(id)?;
        Ok(normalize_pixel(o.point2d.0, o.point2d.1, self.width(), self.height()))
    }

    pub(crate) fn region(&self, relation: FreeSpaceRelation, ids: &[String]) -> Option<&FreeSpaceRegion> {
        self.regions
            .iter()
            .find(|r| r.query.relation == relation && r.query.target_ids == ids)
    }
}

/// Runs every free-space query the generators can use: four directions plus
/// above and below for each item, and between for each same-platform pair.
pub fn placement_regions(
    frame: &SceneFrame,
    depth: &DepthMap,
    t: &Thresholds,
    seed: u64,
) -> Result<Vec<FreeSpaceRegion>> {
    let mut ids: Vec<&str> = frame
        .objects
        .iter()
        .filter(|o| !frame.is_platform(&o.id))
        .map(|o| o.id.as_str())
        .collect();
    ids.sort_unstable();
    let mut out = Vec::new();
    for id in &ids {
        for rel in FreeSpaceRelation::ALL.iter().filter(|r| r.target_count() == 1) {
            out.push(sample_free_space(
                frame,
                depth,
                &FreeSpaceQuery::new(*rel, &[id], seed),
                t,
            )?);
        }
    }
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            let q = FreeSpaceQuery::new(FreeSpaceRelation::Between, &[a, b], seed);
            match sample_free_space(frame, depth, &q, t) {
                Ok(r) => out.push(r),
                Err(Error::InvalidQuery(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Step-counter entries contributed by how an object is referred to.
pub(crate) fn reference_constraints(ctx: &QaContext<'_>, expr: &ReferringExpression) -> Vec<Constraint> {
    match &expr.program {
        ReferenceProgram::Category { .. } => vec![Constraint::intrinsic("category")],
        ReferenceProgram::Attribute { .. } => vec![Constraint::intrinsic("attribute")],
        ReferenceProgram::Ordinal { direction, .. } => vec![Constraint::new(crate::eval::VIEWER, direction.key())],
        ReferenceProgram::ClosestTo { anchor, .. } => {
            let text = ctx
                .frame
                .object(anchor)
                .map(|o| o.base_phrase())
                .unwrap_or_else(|_| anchor.clone());
            vec![Constraint::new(text, "closest")]
        }
    }
}

pub(crate) fn binding(slot: &str, expr: &ReferringExpression) -> Binding {
    Binding {
        slot: slot.to_string(),
        object_id: expr.object_id.clone(),
        text: expr.text.clone(),
        reference: expr.program.clone(),
    }
}

/// The mask a point answer must land in: the object's mask for location
/// items, the acceptable placement pixels for placement items.
pub fn answer_mask(ctx: &QaContext<'_>, qa: &QAPair, object_masks: &BTreeMap<String, Mask>) -> Result<Option<Mask>> {
    let id = match &qa.program {
        QaProgram::Locate { object_id } | QaProgram::Identify { object_id, .. } => object_id,
        QaProgram::Placement { query } => {
            let depth = ctx
                .depth
                .ok_or_else(|| Error::Usage("placement masks need a depth map".into()))?;
            let region = ctx
                .region(query.relation, &query.target_ids)
                .ok_or_else(|| Error::Generation(format!("no region for `{}`", qa.qa_id)))?;
            return Ok(Some(region.placement_mask(ctx.frame, depth, &ctx.thresholds)));
        }
        _ => return Ok(None),
    };
    Ok(object_masks.get(id).cloned())
}

/// One JSON object per line; an empty list gives an empty string.
pub fn qa_to_jsonl(pairs: &[QAPair]) -> Result<String> {
    let mut out = String::new();
    for p in pairs {
        let line = serde_json::to_string(p).map_err(|e| Error::Generation(format!("serializing {}: {e}", p.qa_id)))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn serialize_qa(pairs: &[QAPair], path: &Path) -> Result<()> {
    let text = qa_to_jsonl(pairs)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_qa(path: &Path) -> Result<Vec<QAPair>> {
    read_jsonl(path)
}
