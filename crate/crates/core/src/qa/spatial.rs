use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::reasoning::{generate_reasoning_qa, ReasoningTask};
use super::templates::{instantiate_template, template_library, AnswerRule, QATemplate, SlotValue, TemplateKind};
use super::{Answer, Family, QAPair, QaContext};
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scene::{Arity, ReferringExpression};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaConfig {
    pub families: Vec<Family>,
    /// Items per family per scene.
    pub per_family: usize,
}

impl Default for QaConfig {
    fn default() -> Self {
        Self {
            families: Family::ALL.to_vec(),
            per_family: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedFamily {
    pub family: Family,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub counts: BTreeMap<Family, usize>,
    pub skipped: Vec<SkippedFamily>,
}

/// A template plus the objects its slots will name, before expressions
/// are chosen.
struct Candidate {
    template: &'static QATemplate,
    objects: Vec<String>,
    /// Binds `[X]` to this object's point instead of naming it.
    point_of: Option<String>,
}

fn candidates(ctx: &QaContext<'_>, family: Family) -> Vec<Candidate> {
    let ids: Vec<String> = ctx.items().map(|o| o.id.clone()).collect();
    let mut out = Vec::new();
    let push = |out: &mut Vec<Candidate>, t: &'static QATemplate, objects: Vec<String>| {
        out.push(Candidate {
            template: t,
            objects,
            point_of: None,
        })
    };
    for t in template_library().iter().filter(|t| {
        t.family == family && matches!(t.kind, TemplateKind::Vqa | TemplateKind::Choice | TemplateKind::Point)
    }) {
        match t.rule {
            AnswerRule::Relation(k) => match k.arity() {
                Arity::Unary => ids.iter().for_each(|a| push(&mut out, t, vec![a.clone()])),
                Arity::Binary => {
                    for a in &ids {
                        for b in ids.iter().filter(|b| *b != a) {
                            push(&mut out, t, vec![a.clone(), b.clone()]);
                        }
                    }
                }
                Arity::Ternary => {
                    for a in &ids {
                        let others: Vec<&String> = ids.iter().filter(|x| *x != a).collect();
                        for (i, b) in others.iter().enumerate() {
                            for c in &others[i + 1..] {
                                push(&mut out, t, vec![a.clone(), (*b).clone(), (*c).clone()]);
                            }
                        }
                    }
                }
            },
            AnswerRule::Larger => {
                for a in &ids {
                    for b in ids.iter().filter(|b| *b != a) {
                        push(&mut out, t, vec![a.clone(), b.clone()]);
                    }
                }
            }
            AnswerRule::ObjectPoint => ids.iter().for_each(|a| push(&mut out, t, vec![a.clone()])),
            AnswerRule::ObjectAt | AnswerRule::DepthAt => {
                for a in &ids {
                    out.push(Candidate {
                        template: t,
                        objects: vec![],
                        point_of: Some(a.clone()),
                    });
                }
            }
            AnswerRule::FreeSpace(rel) => {
                for r in ctx
                    .regions
                    .iter()
                    .filter(|r| r.query.relation == rel && r.is_accepted())
                {
                    push(&mut out, t, r.query.target_ids.clone());
                }
            }
            AnswerRule::Fact(_) | AnswerRule::Describe | AnswerRule::Identify | AnswerRule::EmptySpace => {}
        }
    }
    out
}

fn pick<'a>(ctx: &'a QaContext<'_>, id: &str, rng: &mut CounterRng) -> Option<&'a ReferringExpression> {
    let exprs = ctx.unique_expressions(id);
    rng.pick(&exprs).copied()
}

fn instantiate(ctx: &QaContext<'_>, c: &Candidate, rng: &mut CounterRng) -> Result<Option<QAPair>> {
    let mut bindings = BTreeMap::new();
    for (slot, id) in ["A", "B", "C"].iter().zip(&c.objects) {
        let Some(e) = pick(ctx, id, rng) else {
            return Ok(None);
        };
        bindings.insert(slot.to_string(), SlotValue::Object(e.clone()));
    }
    if let Some(id) = &c.point_of {
        let Some(e) = pick(ctx, id, rng) else {
            return Ok(None);
        };
        bindings.insert("X".to_string(), SlotValue::PointOf(e.clone()));
    }
    match instantiate_template(ctx, c.template, &bindings) {
        Ok(qa) => Ok(Some(qa)),
        Err(Error::Generation(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn reasoning_items(ctx: &QaContext<'_>, want: usize, rng: &mut CounterRng) -> Result<(Vec<QAPair>, Option<String>)> {
    let mut out: Vec<QAPair> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut last_err = None;
    for attempt in 0..want * 3 {
        if out.len() == want {
            break;
        }
        let task = ReasoningTask::ALL[attempt % ReasoningTask::ALL.len()];
        match generate_reasoning_qa(ctx, task, rng.next_u64()) {
            Ok(qa) => {
                if seen.insert(qa.question.clone()) {
                    out.push(qa);
                }
            }
            Err(Error::Generation(msg)) => last_err = Some(format!("{task}: {msg}")),
            Err(e) => return Err(e),
        }
    }
    Ok((out, last_err))
}

/// Generates up to `cfg.per_family` items for each requested family.
/// Families the scene cannot support are listed in the report instead.
pub fn generate_spatial_qa(ctx: &QaContext<'_>, cfg: &QaConfig, seed: u64) -> Result<(Vec<QAPair>, QaReport)> {
    let mut families = cfg.families.clone();
    families.sort_unstable();
    families.dedup();
    let mut pairs = Vec::new();
    let mut report = QaReport::default();
    for family in families {
        let mut rng = CounterRng::fork(seed, &format!("qa/{}/{family}", ctx.frame.frame_id));
        let (mut items, why_empty) = if family == Family::Reasoning {
            reasoning_items(ctx, cfg.per_family, &mut rng)?
        } else {
            let mut cands = candidates(ctx, family);
            rng.shuffle(&mut cands);
            let mut items: Vec<QAPair> = Vec::new();
            let mut deferred: Vec<QAPair> = Vec::new();
            let mut seen = BTreeSet::new();
            // at most half of the yes/no answers may share a polarity while
            // other candidates remain
            let cap = cfg.per_family.div_ceil(2);
            let mut polarity: BTreeMap<String, usize> = BTreeMap::new();
            for c in &cands {
                if items.len() == cfg.per_family {
                    break;
                }
                let Some(qa) = instantiate(ctx, c, &mut rng)? else {
                    continue;
                };
                if !seen.insert(qa.question.clone()) {
                    continue;
                }
                if let Answer::Text(a) = &qa.answer {
                    if a == "Yes" || a == "No" {
                        let n = polarity.entry(a.clone()).or_default();
                        if *n >= cap {
                            deferred.push(qa);
                            continue;
                        }
                        *n += 1;
                    }
                }
                items.push(qa);
            }
            let short = cfg.per_family.saturating_sub(items.len());
            items.extend(deferred.into_iter().take(short));
            let why = if cands.is_empty() {
                "scene has no objects or regions this family can ask about"
            } else {
                "no candidate had nameable objects and a computable answer"
            };
            (items, Some(why.to_string()))
        };
        for (n, qa) in items.iter_mut().enumerate() {
            qa.qa_id = format!("{}-{family}-{n}", ctx.frame.frame_id);
            qa.seed = seed;
        }
        report.counts.insert(family, items.len());
        if items.is_empty() && cfg.per_family > 0 {
            report.skipped.push(SkippedFamily {
                family,
                reason: why_empty.unwrap_or_else(|| "no items".into()),
            });
        }
        pairs.extend(items);
    }
    Ok((pairs, report))
}
