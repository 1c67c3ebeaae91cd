use std::collections::BTreeMap;

use super::templates::{fill_pattern, template_library, AnswerRule};
use super::{fmt_point, fmt_trimmed, normalize_pixel, round2, QaContext};
use crate::scene::SpatialRelationKind as K;

/// Declarative statements for every metric and positional edge whose
/// objects have a unique expression. Order follows the graph's edge order.
pub fn generate_fact_statements(ctx: &QaContext<'_>) -> Vec<String> {
    let facts: BTreeMap<K, &str> = template_library()
        .iter()
        .filter_map(|t| match t.rule {
            AnswerRule::Fact(k) => Some((k, t.pattern.as_str())),
            _ => None,
        })
        .collect();
    let name = |id: &str| ctx.expressions.best_for(id).map(|e| e.text.clone());

    let mut out = Vec::new();
    for edge in &ctx.graph.edges {
        let Some(pattern) = facts.get(&edge.relation) else {
            continue;
        };
        if ctx.frame.is_platform(&edge.subject) || edge.objects.iter().any(|o| ctx.frame.is_platform(o)) {
            continue;
        }
        let Some(a) = name(&edge.subject) else {
            continue;
        };
        let mut slots = BTreeMap::new();
        slots.insert("A".to_string(), a);
        match edge.relation {
            K::PointDepth => {
                let Some(d) = edge.value.as_metric() else { continue };
                let Ok(o) = ctx.frame.object(&edge.subject) else {
                    continue;
                };
                let Ok((u, v, _)) = ctx.frame.project_gravity_point(&o.obb.center) else {
                    continue;
                };
                if !ctx.frame.intrinsics.contains(u, v) {
                    continue;
                }
                let p = normalize_pixel(u.floor(), v.floor(), ctx.width(), ctx.height());
                slots.insert("X".to_string(), fmt_point(p));
                slots.insert("D".to_string(), format!("{} meters", fmt_trimmed(round2(d))));
            }
            K::PairwiseDistance => {
                // each unordered pair once
                if edge.objects[0] < edge.subject {
                    continue;
                }
                let (Some(d), Some(b)) = (edge.value.as_metric(), name(&edge.objects[0])) else {
                    continue;
                };
                slots.insert("B".to_string(), b);
                slots.insert("D".to_string(), format!("{} meters", fmt_trimmed(round2(d))));
            }
            _ => {
                let (Some(true), Some(b)) = (edge.value.as_bool(), name(&edge.objects[0])) else {
                    continue;
                };
                slots.insert("B".to_string(), b);
            }
        }
        if let Ok(s) = fill_pattern(pattern, &slots) {
            out.push(s);
        }
    }
    out
}
