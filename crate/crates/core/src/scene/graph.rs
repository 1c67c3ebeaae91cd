use serde::Serialize;

use super::io::ObjectDto;
use super::relations::{evaluate_relation, Arity, RelationValue, SpatialRelationKind};
use super::{ObjectInstance, SceneFrame};
use crate::defaults::Thresholds;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub subject: String,
    pub objects: Vec<String>,
    pub relation: SpatialRelationKind,
    pub value: RelationValue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneGraph {
    pub frame_id: String,
    pub nodes: Vec<ObjectInstance>,
    pub edges: Vec<Edge>,
}

#[derive(Serialize)]
struct GraphJson<'a> {
    frame_id: &'a str,
    nodes: Vec<ObjectDto>,
    edges: &'a [Edge],
}

impl SceneGraph {
    pub fn to_json(&self) -> String {
        let doc = GraphJson {
            frame_id: &self.frame_id,
            nodes: self.nodes.iter().map(ObjectDto::from).collect(),
            edges: &self.edges,
        };
        serde_json::to_string_pretty(&doc).expect("graph serialises")
    }

    pub fn edges_for(&self, relation: SpatialRelationKind) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.relation == relation)
    }

    /// The stored value for `relation(subject, objects...)`.
    pub fn value(&self, relation: SpatialRelationKind, subject: &str, objects: &[&str]) -> Option<RelationValue> {
        self.edges
            .iter()
            .find(|e| {
                e.relation == relation
                    && e.subject == subject
                    && e.objects.iter().map(String::as_str).eq(objects.iter().copied())
            })
            .map(|e| e.value)
    }
}

fn compatible(relation: SpatialRelationKind, subject: &ObjectInstance, others: &[&ObjectInstance]) -> bool {
    (!relation.needs_subject_orientation() || subject.orientation.is_some())
        && (!relation.needs_other_orientation() || others.iter().all(|o| o.orientation.is_some()))
}

/// Evaluates every requested relation over every compatible ordered tuple of
/// distinct objects. Ternary relations take the two other objects as an
/// unordered pair, listed in id order.
pub fn build_scene_graph(frame: &SceneFrame, relations: &[SpatialRelationKind], t: &Thresholds) -> Result<SceneGraph> {
    let mut objs: Vec<&ObjectInstance> = frame.objects.iter().collect();
    objs.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rels = relations.to_vec();
    rels.sort();
    rels.dedup();

    let mut edges = Vec::new();
    let mut push = |rel: SpatialRelationKind, a: &ObjectInstance, others: &[&ObjectInstance]| -> Result<()> {
        if !compatible(rel, a, others) {
            return Ok(());
        }
        let ids: Vec<&str> = others.iter().map(|o| o.id.as_str()).collect();
        let value = evaluate_relation(frame, rel, &a.id, &ids, t)?;
        edges.push(Edge {
            subject: a.id.clone(),
            objects: ids.iter().map(|s| s.to_string()).collect(),
            relation: rel,
            value,
        });
        Ok(())
    };

    for &rel in &rels {
        for (i, a) in objs.iter().enumerate() {
            match rel.arity() {
                Arity::Unary => push(rel, a, &[])?,
                Arity::Binary => {
                    for (j, b) in objs.iter().enumerate() {
                        if i != j {
                            push(rel, a, &[b])?;
                        }
                    }
                }
                Arity::Ternary => {
                    for (j, b) in objs.iter().enumerate() {
                        for (k, c) in objs.iter().enumerate().skip(j + 1) {
                            if i != j && i != k {
                                push(rel, a, &[b, c])?;
                            }
                        }
                    }
                }
            }
        }
    }
    edges.sort_by(|x, y| {
        x.subject
            .cmp(&y.subject)
            .then_with(|| x.objects.cmp(&y.objects))
            .then_with(|| x.relation.cmp(&y.relation))
    });
    Ok(SceneGraph {
        frame_id: frame.frame_id.clone(),
        nodes: frame.objects.clone(),
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::fixtures::{frame, object};

    #[test]
    fn left_right_pair() {
        let f = frame(vec![
            object("a", "cup", [-0.5, 0.8, 0.0], [0.05, 0.05, 0.05]),
            object("b", "cup", [0.5, 0.8, 0.0], [0.05, 0.05, 0.05]),
        ]);
        let g = build_scene_graph(&f, &[SpatialRelationKind::Left], &Thresholds::default()).unwrap();
        assert_eq!(g.edges.len(), 2);
        assert_eq!(
            g.value(SpatialRelationKind::Left, "a", &["b"]),
            Some(RelationValue::Bool(true))
        );
        assert_eq!(
            g.value(SpatialRelationKind::Left, "b", &["a"]),
            Some(RelationValue::Bool(false))
        );
    }

    #[test]
    fn empty_frame() {
        let g = build_scene_graph(&frame(vec![]), &SpatialRelationKind::ALL, &Thresholds::default()).unwrap();
        assert!(g.nodes.is_empty() && g.edges.is_empty());
    }

    #[test]
    fn orientation_relations_skip_unannotated() {
        let f = frame(vec![
            object("a", "cup", [-0.5, 0.8, 0.0], [0.05, 0.05, 0.05]),
            object("b", "cup", [0.5, 0.8, 0.0], [0.05, 0.05, 0.05]),
        ]);
        let g = build_scene_graph(&f, &[SpatialRelationKind::FacingToward], &Thresholds::default()).unwrap();
        assert!(g.edges.is_empty());
        assert!(g.to_json().contains("\"edges\": []"));
    }

    #[test]
    fn ternary_counts() {
        let f = frame(
            (0..4)
                .map(|i| object(&format!("o{i}"), "cup", [i as f64 * 0.3, 0.8, 0.0], [0.05, 0.05, 0.05]))
                .collect(),
        );
        let g = build_scene_graph(&f, &[SpatialRelationKind::Between], &Thresholds::default()).unwrap();
        // 4 subjects x C(3,2) pairs
        assert_eq!(g.edges.len(), 12);
        assert_eq!(
            g.value(SpatialRelationKind::Between, "o1", &["o0", "o2"]),
            Some(RelationValue::Bool(true))
        );
    }
}
