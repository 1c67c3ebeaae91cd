use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::templates::{fill_pattern, template};
use super::{
    binding, normalize_pixel, reference_constraints, Answer, Family, KeyStep, QAPair, QaContext, QaProgram,
    RelationConstraint,
};
use crate::error::{Error, Result};
use crate::eval::{count_reasoning_steps, Constraint, MAX_STEPS};
use crate::freespace::FreeSpaceRelation;
use crate::rng::CounterRng;
use crate::scene::{ReferenceProgram, ReferringExpression, SpatialRelationKind as K, Tier};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReasoningTask {
    LocateFromDescription,
    IdentifyFromRelations,
    LocateEmptySpace,
}

impl ReasoningTask {
    pub const ALL: [ReasoningTask; 3] = [
        ReasoningTask::LocateFromDescription,
        ReasoningTask::IdentifyFromRelations,
        ReasoningTask::LocateEmptySpace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReasoningTask::LocateFromDescription => "locate-from-description",
            ReasoningTask::IdentifyFromRelations => "identify-from-relations",
            ReasoningTask::LocateEmptySpace => "locate-empty-space",
        }
    }
}

impl fmt::Display for ReasoningTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReasoningTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReasoningTask::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown reasoning task `{s}`")))
    }
}

/// Relations the identify task draws constraints from, as `relation(target, anchor)`.
const IDENTIFY_RELATIONS: [K; 6] = [K::Left, K::Right, K::Front, K::Behind, K::Taller, K::Shorter];

/// Builds one multi-step item of the given kind. Fails with a generation
/// error when the scene cannot support it.
pub fn generate_reasoning_qa(ctx: &QaContext<'_>, task: ReasoningTask, seed: u64) -> Result<QAPair> {
    let mut rng = CounterRng::fork(seed, &format!("reasoning/{}/{task}", ctx.frame.frame_id));
    let mut qa = match task {
        ReasoningTask::LocateFromDescription => locate_from_description(ctx, &mut rng)?,
        ReasoningTask::IdentifyFromRelations => identify_from_relations(ctx, &mut rng)?,
        ReasoningTask::LocateEmptySpace => locate_empty_space(ctx, &mut rng)?,
    };
    qa.qa_id = format!("{}-reasoning-{task}", ctx.frame.frame_id);
    qa.seed = seed;
    Ok(qa)
}

fn position(ctx: &QaContext<'_>, e: &ReferringExpression) -> Result<KeyStep> {
    Ok(KeyStep::position(e.text.clone(), ctx.object_point(&e.object_id)?))
}

/// Preferred expression for an anchor: the one adding the fewest steps.
fn anchor_expression<'a>(ctx: &'a QaContext<'_>, id: &str) -> Option<&'a ReferringExpression> {
    let mut exprs = ctx.unique_expressions(id);
    exprs.sort_by_key(|e| match e.tier {
        Tier::Attribute | Tier::Category => 0,
        Tier::Ordinal => 1,
        Tier::Anchored => 2,
    });
    exprs.into_iter().next()
}

fn skeleton(ctx: &QaContext<'_>, template_id: &str, question: String, answer: Answer, program: QaProgram) -> QAPair {
    QAPair {
        qa_id: String::new(),
        image_ref: ctx.frame.image_ref.clone(),
        depth_ref: Some(ctx.frame.depth_ref.clone()),
        question,
        answer,
        reasoning: vec![],
        source: Family::Reasoning.source(),
        step_count: 1,
        seed: 0,
        frame_id: ctx.frame.frame_id.clone(),
        family: Family::Reasoning,
        template_id: template_id.to_string(),
        constraints: vec![],
        program,
        bindings: vec![],
    }
}

fn finish(mut qa: QAPair, constraints: Vec<Constraint>, reasoning: Vec<KeyStep>) -> Option<QAPair> {
    let raw = count_reasoning_steps(&constraints, usize::MAX);
    if raw > MAX_STEPS || reasoning.len() > MAX_STEPS {
        return None;
    }
    qa.step_count = raw;
    qa.constraints = constraints;
    qa.reasoning = reasoning;
    Some(qa)
}

/// Key steps behind resolving `e`: every ranked group member for ordinals,
/// the anchor then the target for closest-to, the target alone otherwise.
fn describe_chain(ctx: &QaContext<'_>, e: &ReferringExpression) -> Result<Vec<KeyStep>> {
    match &e.program {
        ReferenceProgram::Category { .. } | ReferenceProgram::Attribute { .. } => Ok(vec![position(ctx, e)?]),
        ReferenceProgram::Ordinal { direction, .. } => {
            let mut ranked: Vec<(usize, &ReferringExpression)> = ctx
                .expressions
                .expressions
                .iter()
                .filter_map(|x| match &x.program {
                    ReferenceProgram::Ordinal {
                        category,
                        direction: d,
                        ordinal,
                    } if d == direction && Some(category) == category_of(e) => Some((*ordinal, x)),
                    _ => None,
                })
                .collect();
            ranked.sort_by_key(|(n, x)| (*n, x.object_id.clone()));
            ranked.into_iter().map(|(_, x)| position(ctx, x)).collect()
        }
        ReferenceProgram::ClosestTo { anchor, .. } => {
            let a = ctx
                .expressions
                .best_for(anchor)
                .ok_or_else(|| Error::Generation(format!("anchor `{anchor}` has no unique expression")))?;
            Ok(vec![position(ctx, a)?, position(ctx, e)?])
        }
    }
}

fn category_of(e: &ReferringExpression) -> Option<&String> {
    match &e.program {
        ReferenceProgram::Category { category }
        | ReferenceProgram::Attribute { category, .. }
        | ReferenceProgram::Ordinal { category, .. }
        | ReferenceProgram::ClosestTo { category, .. } => Some(category),
    }
}

fn locate_from_description(ctx: &QaContext<'_>, rng: &mut CounterRng) -> Result<QAPair> {
    let t = template("sim_describe");
    let mut items: Vec<_> = ctx.items().collect();
    rng.shuffle(&mut items);
    for o in items {
        let mut exprs = ctx.unique_expressions(&o.id);
        rng.shuffle(&mut exprs);
        for e in exprs {
            let chain = describe_chain(ctx, e)?;
            let mut slots = BTreeMap::new();
            slots.insert("A".to_string(), e.text.clone());
            let question = fill_pattern(&t.pattern, &slots)?;
            let answer = Answer::Point2d(ctx.object_point(&o.id)?);
            let mut qa = skeleton(
                ctx,
                &t.template_id,
                question,
                answer,
                QaProgram::Locate {
                    object_id: o.id.clone(),
                },
            );
            qa.bindings.push(binding("A", e));
            if let Some(qa) = finish(qa, reference_constraints(ctx, e), chain) {
                return Ok(qa);
            }
        }
    }
    Err(Error::Generation(
        "no object has a unique description resolvable in at most 5 key steps".into(),
    ))
}

fn holds(ctx: &QaContext<'_>, c: &RelationConstraint, candidate: &str) -> bool {
    if candidate == c.anchor {
        return false;
    }
    let value = if c.anchor_is_subject {
        ctx.graph.value(c.relation, &c.anchor, &[candidate])
    } else {
        ctx.graph.value(c.relation, candidate, &[c.anchor.as_str()])
    };
    value.and_then(|v| v.as_bool()).unwrap_or(false)
}

fn phrase(c: &RelationConstraint, anchor: &str) -> String {
    match c.relation {
        K::Left => format!("it is to the left of {anchor}"),
        K::Right => format!("it is to the right of {anchor}"),
        K::Front => format!("it is in front of {anchor}"),
        K::Behind => format!("it is behind {anchor}"),
        K::Taller => format!("it is taller than {anchor}"),
        K::Shorter => format!("it is shorter than {anchor}"),
        K::FacingToward => format!("{anchor} is facing it"),
        other => format!("it is {other} {anchor}"),
    }
}

/// Greedy cover: keep adding the constraint that rules out the most
/// remaining distractors, then drop constraints that became redundant.
fn select_constraints(
    ctx: &QaContext<'_>,
    pool: &[RelationConstraint],
    target: &str,
    distractors: &[&str],
) -> Option<Vec<RelationConstraint>> {
    let unique = |set: &[RelationConstraint]| distractors.iter().all(|d| set.iter().any(|c| !holds(ctx, c, d)));
    let mut remaining: Vec<&str> = distractors.to_vec();
    let mut chosen: Vec<RelationConstraint> = Vec::new();
    while !remaining.is_empty() {
        let (best, removed) = pool
            .iter()
            .filter(|c| !chosen.contains(c))
            .map(|c| (c, remaining.iter().filter(|d| !holds(ctx, c, d)).count()))
            .fold(None, |acc: Option<(&RelationConstraint, usize)>, (c, n)| match acc {
                Some((_, m)) if m >= n => acc,
                _ => Some((c, n)),
            })?;
        if removed == 0 {
            return None;
        }
        remaining.retain(|d| holds(ctx, best, d));
        chosen.push(best.clone());
    }
    for i in (0..chosen.len()).rev() {
        let mut without = chosen.clone();
        without.remove(i);
        if !without.is_empty() && unique(&without) {
            chosen = without;
        }
    }
    debug_assert!(chosen.iter().all(|c| holds(ctx, c, target)));
    Some(chosen)
}

fn identify_from_relations(ctx: &QaContext<'_>, rng: &mut CounterRng) -> Result<QAPair> {
    let t = template("sim_identify");
    let ids: Vec<&str> = ctx.items().map(|o| o.id.as_str()).collect();
    if ids.len() < 2 {
        return Err(Error::Generation(
            "identify-from-relations needs at least two objects".into(),
        ));
    }
    let mut targets = ids.clone();
    rng.shuffle(&mut targets);
    for target in targets {
        let mut pool = Vec::new();
        for anchor in ids.iter().filter(|a| **a != target) {
            if anchor_expression(ctx, anchor).is_none() {
                continue;
            }
            for k in IDENTIFY_RELATIONS {
                let c = RelationConstraint {
                    relation: k,
                    anchor: anchor.to_string(),
                    anchor_is_subject: false,
                };
                if holds(ctx, &c, target) {
                    pool.push(c);
                }
            }
            let c = RelationConstraint {
                relation: K::FacingToward,
                anchor: anchor.to_string(),
                anchor_is_subject: true,
            };
            if holds(ctx, &c, target) {
                pool.push(c);
            }
        }
        rng.shuffle(&mut pool);
        let distractors: Vec<&str> = ids.iter().copied().filter(|d| *d != target).collect();
        let Some(chosen) = select_constraints(ctx, &pool, target, &distractors) else {
            continue;
        };
        if let Some(qa) = identify_item(ctx, t, target, chosen)? {
            return Ok(qa);
        }
    }
    Err(Error::Generation(
        "no object is singled out by at most 5 steps of left/right/front/behind/height/facing constraints".into(),
    ))
}

fn identify_item(
    ctx: &QaContext<'_>,
    t: &super::QATemplate,
    target: &str,
    chosen: Vec<RelationConstraint>,
) -> Result<Option<QAPair>> {
    let mut phrases = Vec::new();
    let mut constraints = Vec::new();
    let mut steps = Vec::new();
    let mut positioned = BTreeSet::new();
    let mut sized = BTreeSet::new();
    let mut bindings = Vec::new();
    for c in &chosen {
        let e = anchor_expression(ctx, &c.anchor).expect("pool anchors have expressions");
        phrases.push(phrase(c, &e.text));
        constraints.push(Constraint::new(e.text.clone(), c.relation.name()));
        constraints.extend(reference_constraints(ctx, e).into_iter().filter(|x| !x.intrinsic));
        if positioned.insert(c.anchor.clone()) {
            steps.push(position(ctx, e)?);
            bindings.push(binding(&format!("anchor{}", bindings.len() + 1), e));
        }
        let o = ctx.frame.object(&c.anchor)?;
        match c.relation {
            K::FacingToward => {
                let dir = o.orientation.ok_or(Error::MissingAnnotation {
                    object: o.id.clone(),
                    what: "orientation",
                })?;
                steps.push(KeyStep::orientation(e.text.clone(), &dir));
            }
            K::Taller | K::Shorter if sized.insert(c.anchor.clone()) => {
                steps.push(KeyStep::size(e.text.clone(), o.obb.height()));
            }
            _ => {}
        }
    }
    let mut slots = BTreeMap::new();
    slots.insert("Q".to_string(), phrases.join("; "));
    let question = fill_pattern(&t.pattern, &slots)?;
    let answer = Answer::Point2d(ctx.object_point(target)?);
    let program = QaProgram::Identify {
        object_id: target.to_string(),
        constraints: chosen,
    };
    let mut qa = skeleton(ctx, &t.template_id, question, answer, program);
    qa.bindings = bindings;
    Ok(finish(qa, constraints, steps))
}

fn space_phrase(relation: FreeSpaceRelation, names: &[&str]) -> String {
    match relation {
        FreeSpaceRelation::Front => format!("in front of {}", names[0]),
        FreeSpaceRelation::Behind => format!("behind {}", names[0]),
        FreeSpaceRelation::Left => format!("to the left of {}", names[0]),
        FreeSpaceRelation::Right => format!("to the right of {}", names[0]),
        FreeSpaceRelation::Above => format!("on top of {}", names[0]),
        FreeSpaceRelation::Below => format!("underneath {}", names[0]),
        FreeSpaceRelation::Between => format!("between {} and {}", names[0], names[1]),
    }
}

fn locate_empty_space(ctx: &QaContext<'_>, rng: &mut CounterRng) -> Result<QAPair> {
    let t = template("sim_empty_space");
    let mut regions: Vec<_> = ctx
        .regions
        .iter()
        .filter(|r| {
            r.is_accepted() && (r.query.relation.is_directional() || r.query.relation == FreeSpaceRelation::Between)
        })
        .collect();
    rng.shuffle(&mut regions);
    for region in regions {
        let Some(exprs) = region
            .query
            .target_ids
            .iter()
            .map(|id| anchor_expression(ctx, id))
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let names: Vec<&str> = exprs.iter().map(|e| e.text.as_str()).collect();
        let mut slots = BTreeMap::new();
        slots.insert("Q".to_string(), space_phrase(region.query.relation, &names));
        let question = fill_pattern(&t.pattern, &slots)?;
        let (u, v) = region.selected_point.expect("accepted");
        let answer = Answer::Point2d(normalize_pixel(u, v, ctx.width(), ctx.height()));
        let program = QaProgram::Placement {
            query: region.query.clone(),
        };
        let mut constraints = Vec::new();
        let mut steps = Vec::new();
        for (i, e) in exprs.iter().enumerate() {
            let rel = if i == 0 { region.query.relation.name() } else { "" };
            constraints.push(Constraint::new(e.text.clone(), rel));
            constraints.extend(reference_constraints(ctx, e).into_iter().filter(|x| !x.intrinsic));
            steps.push(position(ctx, e)?);
        }
        let mut qa = skeleton(ctx, &t.template_id, question, answer, program);
        qa.bindings = exprs
            .iter()
            .enumerate()
            .map(|(i, e)| binding(["A", "B"][i], e))
            .collect();
        if let Some(qa) = finish(qa, constraints, steps) {
            return Ok(qa);
        }
    }
    Err(Error::Generation(
        "no accepted free-space region with nameable anchors".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defaults::Thresholds;
    use crate::geometry::Vec3;
    use crate::scene::fixtures::{frame, object};
    use crate::scene::{ObjectInstance, SceneFrame};

    fn named(id: &str, cat: &str, color: &str, center: [f64; 3], half: [f64; 3]) -> ObjectInstance {
        let mut o = object(id, cat, center, half);
        o.color = Some(color.into());
        o
    }

    fn row() -> SceneFrame {
        frame(vec![
            named("a", "cup", "red", [-0.4, 0.8, 0.0], [0.04, 0.05, 0.04]),
            named("b", "bottle", "green", [0.0, 0.85, 0.0], [0.04, 0.10, 0.04]),
            named("c", "bowl", "white", [0.4, 0.78, 0.0], [0.08, 0.03, 0.08]),
        ])
    }

    #[test]
    fn task_names_round_trip() {
        for t in ReasoningTask::ALL {
            assert_eq!(t.name().parse::<ReasoningTask>().unwrap(), t);
        }
    }

    #[test]
    fn describe_uses_target_position() {
        let f = row();
        let ctx = QaContext::new(&f, None, &Thresholds::default(), 3).unwrap();
        let qa = generate_reasoning_qa(&ctx, ReasoningTask::LocateFromDescription, 3).unwrap();
        assert!(qa.question.starts_with("Give me the position of the "));
        assert_eq!(qa.reasoning.len(), 1);
        assert_eq!(qa.step_count, 1);
        let QaProgram::Locate { object_id } = &qa.program else {
            panic!()
        };
        assert_eq!(qa.answer.point().unwrap(), ctx.object_point(object_id).unwrap());
        qa.validate().unwrap();
    }

    #[test]
    fn identify_constraints_single_out_the_answer() {
        let f = row();
        let t = Thresholds::default();
        for seed in 0..10 {
            let ctx = QaContext::new(&f, None, &t, seed).unwrap();
            let qa = generate_reasoning_qa(&ctx, ReasoningTask::IdentifyFromRelations, seed).unwrap();
            let QaProgram::Identify { object_id, constraints } = &qa.program else {
                panic!()
            };
            let hits: Vec<_> = ["a", "b", "c"]
                .into_iter()
                .filter(|id| constraints.iter().all(|c| holds(&ctx, c, id)))
                .collect();
            assert_eq!(hits, vec![object_id.as_str()], "{}", qa.question);
            assert!(qa.step_count <= 5 && qa.reasoning.len() <= 5);
            assert!(qa.question.starts_with("Please specify an object on the desktop"));
            qa.validate().unwrap();
        }
    }

    #[test]
    fn facing_constraint_adds_orientation_step() {
        // two identical-height mugs; only the laptop facing `b` separates them
        let mut laptop = named("l", "laptop", "black", [0.0, 0.8, -0.5], [0.15, 0.05, 0.1]);
        laptop.orientation = Some(Vec3::new(0.6, 0.0, -0.8));
        let f = frame(vec![
            laptop,
            named("a", "mug", "red", [-0.45, 0.8, -0.5], [0.04, 0.05, 0.04]),
            named("b", "mug", "blue", [0.45, 0.8, 0.1], [0.04, 0.05, 0.04]),
        ]);
        let ctx = QaContext::new(&f, None, &Thresholds::default(), 0).unwrap();
        let c = RelationConstraint {
            relation: K::FacingToward,
            anchor: "l".into(),
            anchor_is_subject: true,
        };
        assert!(holds(&ctx, &c, "b"));
        let qa = identify_item(&ctx, template("sim_identify"), "b", vec![c])
            .unwrap()
            .unwrap();
        assert!(qa.question.contains("the black laptop is facing it"), "{}", qa.question);
        let ori = qa
            .reasoning
            .iter()
            .find(|s| s.perception_type == super::super::PerceptionType::Orientation)
            .unwrap();
        assert_eq!(ori.value, super::super::KeyStepValue::Vector([0.6, 0.0, -0.8]));
        assert_eq!(qa.step_count, 2);
    }

    #[test]
    fn too_many_anchors_are_rejected() {
        let f = row();
        let ctx = QaContext::new(&f, None, &Thresholds::default(), 0).unwrap();
        let constraints = vec![
            Constraint::new("x", "left"),
            Constraint::new("y", "left"),
            Constraint::new("z", "left"),
        ];
        let qa = skeleton(
            &ctx,
            "sim_identify",
            "q".into(),
            Answer::Text("t".into()),
            QaProgram::DepthAt { pixel: [0.0, 0.0] },
        );
        assert!(finish(qa.clone(), constraints[..2].to_vec(), vec![]).is_some());
        assert!(finish(qa, constraints, vec![]).is_none());
    }

    #[test]
    fn empty_space_needs_regions() {
        let f = row();
        let ctx = QaContext::new(&f, None, &Thresholds::default(), 0).unwrap();
        assert!(matches!(
            generate_reasoning_qa(&ctx, ReasoningTask::LocateEmptySpace, 0),
            Err(Error::Generation(_))
        ));
    }
}
