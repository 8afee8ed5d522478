//! Target-centric obstruction graphs.
//!
//! Edges point from an obstructed object to the object obstructing it. For a
//! target `t`, the ancestors are every object reachable from `t`; the
//! top-level obstructors are the ancestors with no outgoing edge. Paths are
//! stored top-first: `[top, ..., t]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    pairwise_occlusion, DegreeThresholds, GeometryConfig, OcclusionRelation, RelationRecord,
};
use crate::scene::{ObjectId, SceneRecord};
use crate::SCHEMA_VERSION;

/// Default ceiling on enumerated paths per target.
pub const DEFAULT_PATH_CAP: usize = 64;

/// An obstructed → obstructor edge.
pub type Edge = (ObjectId, ObjectId);

/// All retained relations of a scene. Only pairs ordered by z-rank are
/// examined, so a pair never yields edges in both directions.
pub fn build_relations(scene: &SceneRecord, cfg: &GeometryConfig) -> Result<Vec<OcclusionRelation>> {
    let mut order: Vec<_> = scene.objects.iter().collect();
    order.sort_by_key(|o| o.z_rank);
    let mut out = Vec::new();
    for (i, lower) in order.iter().enumerate() {
        for upper in &order[i + 1..] {
            if let Some(rel) = pairwise_occlusion(lower, upper, cfg)? {
                out.push(rel);
            }
        }
    }
    out.sort_by_key(|r| (r.below, r.above));
    Ok(out)
}

/// Result of scene-hygiene checks on a relation set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationVerdict {
    /// Unordered pairs `(a, b)`, `a < b`, with edges in both directions.
    pub bidirectional: Vec<Edge>,
    /// Every edge lying on some directed cycle (self-loops included).
    pub cycle_edges: Vec<Edge>,
}

impl RelationVerdict {
    pub fn accepted(&self) -> bool {
        self.bidirectional.is_empty() && self.cycle_edges.is_empty()
    }
}

impl fmt::Display for RelationVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.accepted() {
            return write!(f, "accepted");
        }
        let list = |edges: &[Edge]| {
            edges
                .iter()
                .map(|(a, b)| format!("({a},{b})"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut parts = Vec::new();
        if !self.bidirectional.is_empty() {
            parts.push(format!("bidirectional pairs {}", list(&self.bidirectional)));
        }
        if !self.cycle_edges.is_empty() {
            parts.push(format!("cycle edges {}", list(&self.cycle_edges)));
        }
        write!(f, "{}", parts.join("; "))
    }
}

fn adjacency(edges: impl IntoIterator<Item = Edge>) -> BTreeMap<ObjectId, BTreeSet<ObjectId>> {
    let mut adj: BTreeMap<ObjectId, BTreeSet<ObjectId>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().insert(b);
    }
    adj
}

fn reachable(adj: &BTreeMap<ObjectId, BTreeSet<ObjectId>>, from: ObjectId) -> BTreeSet<ObjectId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        for &m in adj.get(&n).into_iter().flatten() {
            if seen.insert(m) {
                stack.push(m);
            }
        }
    }
    seen
}

/// Accepts iff the edge set has no cycle and no bidirectional pair.
pub fn validate_relations(edges: &[Edge]) -> RelationVerdict {
    let set: BTreeSet<Edge> = edges.iter().copied().collect();
    let adj = adjacency(set.iter().copied());
    let bidirectional = set
        .iter()
        .filter(|(a, b)| a < b && set.contains(&(*b, *a)))
        .copied()
        .collect();
    let cycle_edges = set
        .iter()
        .filter(|(a, b)| a == b || reachable(&adj, *b).contains(a))
        .copied()
        .collect();
    RelationVerdict {
        bidirectional,
        cycle_edges,
    }
}

/// Validated, scene-wide obstruction relations.
#[derive(Debug, Clone)]
pub struct RelationGraph {
    ids: BTreeSet<ObjectId>,
    adj: BTreeMap<ObjectId, BTreeSet<ObjectId>>,
    relations: BTreeMap<Edge, OcclusionRelation>,
}

impl RelationGraph {
    pub fn new(ids: impl IntoIterator<Item = ObjectId>, relations: Vec<OcclusionRelation>) -> Result<Self> {
        let mut ids: BTreeSet<ObjectId> = ids.into_iter().collect();
        let edges: Vec<Edge> = relations.iter().map(|r| (r.below, r.above)).collect();
        let verdict = validate_relations(&edges);
        if !verdict.accepted() {
            return Err(Error::Relations(verdict.to_string()));
        }
        ids.extend(edges.iter().flat_map(|(a, b)| [*a, *b]));
        Ok(RelationGraph {
            ids,
            adj: adjacency(edges),
            relations: relations.into_iter().map(|r| ((r.below, r.above), r)).collect(),
        })
    }

    pub fn from_scene(scene: &SceneRecord, cfg: &GeometryConfig) -> Result<Self> {
        RelationGraph::new(scene.ids(), build_relations(scene, cfg)?)
    }

    pub fn ids(&self) -> &BTreeSet<ObjectId> {
        &self.ids
    }

    pub fn relation(&self, below: ObjectId, above: ObjectId) -> Option<&OcclusionRelation> {
        self.relations.get(&(below, above))
    }

    pub fn relations(&self) -> impl Iterator<Item = &OcclusionRelation> {
        self.relations.values()
    }

    pub fn target_graph(&self, target: ObjectId) -> Result<TargetGraph> {
        if !self.ids.contains(&target) {
            return Err(Error::UnknownObject(target));
        }
        let mut nodes = reachable(&self.adj, target);
        nodes.insert(target);
        let edges = nodes
            .iter()
            .flat_map(|&a| self.adj.get(&a).into_iter().flatten().map(move |&b| (a, b)))
            .collect();
        Ok(TargetGraph { target, nodes, edges })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetGraph {
    pub target: ObjectId,
    pub nodes: BTreeSet<ObjectId>,
    pub edges: BTreeSet<Edge>,
}

impl TargetGraph {
    /// Rebuilds a graph from top-first paths.
    pub fn from_paths(target: ObjectId, paths: &[Vec<ObjectId>]) -> Self {
        let mut nodes = BTreeSet::from([target]);
        let mut edges = BTreeSet::new();
        for p in paths {
            nodes.extend(p.iter().copied());
            for w in p.windows(2) {
                edges.insert((w[1], w[0]));
            }
        }
        TargetGraph { target, nodes, edges }
    }

    fn adj(&self) -> BTreeMap<ObjectId, BTreeSet<ObjectId>> {
        adjacency(self.edges.iter().copied())
    }

    pub fn is_obstructed(&self) -> bool {
        self.edges.iter().any(|(a, _)| *a == self.target)
    }

    pub fn ancestors(&self) -> BTreeSet<ObjectId> {
        let mut a = reachable(&self.adj(), self.target);
        a.remove(&self.target);
        a
    }

    /// Ancestors with out-degree zero, or `{target}` when nothing obstructs it.
    pub fn top_level(&self) -> BTreeSet<ObjectId> {
        let ancestors = self.ancestors();
        if ancestors.is_empty() {
            return BTreeSet::from([self.target]);
        }
        let adj = self.adj();
        ancestors
            .into_iter()
            .filter(|n| adj.get(n).is_none_or(|s| s.is_empty()))
            .collect()
    }

    /// Every maximal path from the target, top-first, sorted lexicographically.
    pub fn enumerate_paths(&self, cap: usize) -> Result<Vec<Vec<ObjectId>>> {
        let adj = self.adj();
        let mut out = Vec::new();
        if !self.is_obstructed() {
            return Ok(out);
        }
        let mut stack = vec![self.target];
        self.walk(&adj, &mut stack, &mut out, cap)?;
        for p in &mut out {
            p.reverse();
        }
        out.sort();
        Ok(out)
    }

    fn walk(
        &self,
        adj: &BTreeMap<ObjectId, BTreeSet<ObjectId>>,
        stack: &mut Vec<ObjectId>,
        out: &mut Vec<Vec<ObjectId>>,
        cap: usize,
    ) -> Result<()> {
        let node = *stack.last().expect("non-empty stack");
        match adj.get(&node) {
            Some(next) if !next.is_empty() => {
                for &n in next {
                    stack.push(n);
                    self.walk(adj, stack, out, cap)?;
                    stack.pop();
                }
            }
            _ => {
                if out.len() == cap {
                    return Err(Error::PathExplosion {
                        target: self.target,
                        cap,
                    });
                }
                out.push(stack.clone());
            }
        }
        Ok(())
    }
}

/// Fewest removals along any single path; 0 when there are no paths.
pub fn k_min(paths: &[Vec<ObjectId>]) -> usize {
    paths.iter().map(|p| p.len().saturating_sub(1)).min().unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    #[serde(rename = "No-Occ", alias = "NoOcc")]
    NoOcc,
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [
        Difficulty::NoOcc,
        Difficulty::Easy,
        Difficulty::Medium,
        Difficulty::Hard,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Difficulty::NoOcc => "No-Occ",
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "noocc" => Ok(Difficulty::NoOcc),
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            _ => Err(Error::Domain(format!("unknown difficulty {s:?}"))),
        }
    }
}

pub fn classify_difficulty(k_min: usize, num_paths: usize) -> Result<Difficulty> {
    if (k_min == 0) != (num_paths == 0) {
        return Err(Error::Domain(format!(
            "inconsistent k_min {k_min} with {num_paths} paths"
        )));
    }
    Ok(match (k_min, num_paths) {
        (0, _) => Difficulty::NoOcc,
        (1, 1) => Difficulty::Easy,
        (1, _) => Difficulty::Medium,
        (2, p) if p <= 2 => Difficulty::Medium,
        _ => Difficulty::Hard,
    })
}

/// Per-target ground-truth record. The first nine fields follow the
/// published dataset layout; the remaining ones are local additions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub scene_id: String,
    pub view_id: String,
    pub target_object: ObjectId,
    pub obstruction_paths: Vec<Vec<ObjectId>>,
    pub top_objects: Vec<ObjectId>,
    pub depends_on: Vec<ObjectId>,
    pub k_min: usize,
    pub num_paths: usize,
    pub new_difficulty: Difficulty,
    #[serde(default = "crate::default_schema_version")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_path: Option<String>,
}

impl GraphRecord {
    pub fn new(scene_id: &str, view_id: &str, graph: &TargetGraph, path_cap: usize) -> Result<Self> {
        let paths = graph.enumerate_paths(path_cap)?;
        let k = k_min(&paths);
        Ok(GraphRecord {
            scene_id: scene_id.to_string(),
            view_id: view_id.to_string(),
            target_object: graph.target,
            top_objects: graph.top_level().into_iter().collect(),
            depends_on: graph.ancestors().into_iter().collect(),
            k_min: k,
            num_paths: paths.len(),
            new_difficulty: classify_difficulty(k, paths.len())?,
            obstruction_paths: paths,
            schema_version: SCHEMA_VERSION,
            scene_path: None,
        })
    }

    pub fn graph(&self) -> TargetGraph {
        TargetGraph::from_paths(self.target_object, &self.obstruction_paths)
    }

    /// Answer set a correct prediction must name.
    pub fn answer_set(&self) -> BTreeSet<ObjectId> {
        if self.obstruction_paths.is_empty() {
            BTreeSet::from([self.target_object])
        } else {
            self.top_objects.iter().copied().collect()
        }
    }

    /// Inconsistencies between the stored fields and the stored paths.
    /// An empty list means the record is internally coherent.
    pub fn audit(&self) -> Vec<String> {
        let mut issues = Vec::new();
        let g = self.graph();
        let ancestors: Vec<_> = g.ancestors().into_iter().collect();
        let tops: Vec<_> = g.top_level().into_iter().collect();
        let mut depends = self.depends_on.clone();
        depends.sort_unstable();
        let mut top = self.top_objects.clone();
        top.sort_unstable();
        if depends != ancestors {
            issues.push(format!(
                "depends_on {depends:?} differs from ancestors {ancestors:?}"
            ));
        }
        if top != tops {
            issues.push(format!("top_objects {top:?} differs from path tops {tops:?}"));
        }
        for p in &self.obstruction_paths {
            if p.last() != Some(&self.target_object) {
                issues.push(format!("path {p:?} does not end at the target"));
            }
        }
        let k = k_min(&self.obstruction_paths);
        if k != self.k_min {
            issues.push(format!("k_min {} but paths give {k}", self.k_min));
        }
        if self.num_paths != self.obstruction_paths.len() {
            issues.push(format!(
                "num_paths {} but {} paths stored",
                self.num_paths,
                self.obstruction_paths.len()
            ));
        }
        match classify_difficulty(k, self.obstruction_paths.len()) {
            Ok(d) if d != self.new_difficulty => {
                issues.push(format!("difficulty {} but paths give {d}", self.new_difficulty))
            }
            Err(e) => issues.push(e.to_string()),
            _ => {}
        }
        issues
    }
}

/// Graph records for every object of a scene, in id order.
pub fn scene_graph_records(
    scene: &SceneRecord,
    cfg: &GeometryConfig,
    path_cap: usize,
) -> Result<Vec<GraphRecord>> {
    let rg = RelationGraph::from_scene(scene, cfg)?;
    let mut ids: Vec<_> = scene.ids().collect();
    ids.sort_unstable();
    ids.into_iter()
        .map(|t| GraphRecord::new(&scene.scene_id, &scene.view_id, &rg.target_graph(t)?, path_cap))
        .collect()
}

/// Scene-wide relations as stored on disk, one scene per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRelations {
    #[serde(default = "crate::default_schema_version")]
    pub schema_version: u32,
    pub scene_id: String,
    pub view_id: String,
    /// Every object of the scene, including those in no relation.
    #[serde(default)]
    pub object_ids: Vec<ObjectId>,
    pub relations: Vec<RelationRecord>,
}

impl SceneRelations {
    pub fn from_graph(scene_id: &str, view_id: &str, graph: &RelationGraph) -> Self {
        SceneRelations {
            schema_version: SCHEMA_VERSION,
            scene_id: scene_id.to_string(),
            view_id: view_id.to_string(),
            object_ids: graph.ids().iter().copied().collect(),
            relations: graph.relations().map(RelationRecord::from).collect(),
        }
    }

    /// Validates the relations and builds the scene graph.
    pub fn to_graph(&self, degrees: &DegreeThresholds) -> Result<RelationGraph> {
        let relations = self
            .relations
            .iter()
            .map(|r| r.to_relation(degrees))
            .collect::<Result<Vec<_>>>()?;
        RelationGraph::new(self.object_ids.iter().copied(), relations).map_err(|e| match e {
            Error::Relations(m) => {
                Error::Relations(format!("scene {} view {}: {m}", self.scene_id, self.view_id))
            }
            other => other,
        })
    }

    /// Graph records for every known object, in id order.
    pub fn graph_records(&self, degrees: &DegreeThresholds, path_cap: usize) -> Result<Vec<GraphRecord>> {
        let rg = self.to_graph(degrees)?;
        rg.ids()
            .iter()
            .map(|&t| GraphRecord::new(&self.scene_id, &self.view_id, &rg.target_graph(t)?, path_cap))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Degree;

    fn rel(below: ObjectId, above: ObjectId) -> OcclusionRelation {
        OcclusionRelation {
            below,
            above,
            ratio: 0.1,
            contact: (0, 0),
            degree: Degree::Slightly,
        }
    }

    fn graph(ids: &[ObjectId], edges: &[Edge]) -> RelationGraph {
        RelationGraph::new(
            ids.iter().copied(),
            edges.iter().map(|&(a, b)| rel(a, b)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn verdicts() {
        assert!(validate_relations(&[(4, 1), (4, 3)]).accepted());
        let v = validate_relations(&[(1, 2), (2, 1)]);
        assert_eq!(v.bidirectional, vec![(1, 2)]);
        let v = validate_relations(&[(1, 2), (2, 3), (3, 1)]);
        assert!(v.bidirectional.is_empty());
        assert_eq!(v.cycle_edges, vec![(1, 2), (2, 3), (3, 1)]);
        assert!(!validate_relations(&[(5, 5)]).accepted());
    }

    #[test]
    fn cyclic_relations_rejected_on_build() {
        let err = RelationGraph::new([1, 2, 3], vec![rel(1, 2), rel(2, 3), rel(3, 1)]).unwrap_err();
        assert!(err.to_string().contains("(3,1)"), "{err}");
    }

    #[test]
    fn unobstructed_target() {
        let g = graph(&[1, 2], &[]).target_graph(2).unwrap();
        assert_eq!(g.nodes, BTreeSet::from([2]));
        assert!(g.edges.is_empty());
        assert!(g.ancestors().is_empty());
        assert_eq!(g.top_level(), BTreeSet::from([2]));
        assert!(g.enumerate_paths(64).unwrap().is_empty());
    }

    #[test]
    fn two_direct_obstructors() {
        let g = graph(&[1, 2, 3, 4], &[(4, 1), (4, 3)]).target_graph(4).unwrap();
        assert_eq!(g.nodes, BTreeSet::from([1, 3, 4]));
        assert_eq!(g.ancestors(), BTreeSet::from([1, 3]));
        assert_eq!(g.top_level(), BTreeSet::from([1, 3]));
        assert_eq!(g.enumerate_paths(64).unwrap(), vec![vec![1, 4], vec![3, 4]]);
    }

    #[test]
    fn chain_and_diamond() {
        // chain 2 -> 4 -> 5
        let g = graph(&[2, 4, 5], &[(2, 4), (4, 5)]).target_graph(2).unwrap();
        assert_eq!(g.edges, BTreeSet::from([(2, 4), (4, 5)]));
        assert_eq!(g.ancestors(), BTreeSet::from([4, 5]));
        assert_eq!(g.top_level(), BTreeSet::from([5]));
        assert_eq!(g.enumerate_paths(64).unwrap(), vec![vec![5, 4, 2]]);
        // diamond t=1, a=2, b=3, c=4
        let g = graph(&[1, 2, 3, 4], &[(1, 2), (1, 3), (2, 4), (3, 4)])
            .target_graph(1)
            .unwrap();
        assert_eq!(g.enumerate_paths(64).unwrap(), vec![vec![4, 2, 1], vec![4, 3, 1]]);
    }

    #[test]
    fn unrelated_edges_excluded() {
        let g = graph(&[1, 2, 3, 4], &[(1, 2), (3, 4)]).target_graph(1).unwrap();
        assert_eq!(g.edges, BTreeSet::from([(1, 2)]));
    }

    #[test]
    fn unknown_target() {
        assert!(matches!(
            graph(&[1], &[]).target_graph(7),
            Err(Error::UnknownObject(7))
        ));
    }

    #[test]
    fn path_cap_is_an_error() {
        // Layered lattice: 1 -> {2,3} -> {4,5} -> {6,7}: 8 paths.
        let mut edges = vec![];
        for (lo, hi) in [((1, 1), (2, 3)), ((2, 3), (4, 5)), ((4, 5), (6, 7))] {
            for a in lo.0..=lo.1 {
                for b in hi.0..=hi.1 {
                    edges.push((a, b));
                }
            }
        }
        let g = graph(&[1, 2, 3, 4, 5, 6, 7], &edges).target_graph(1).unwrap();
        assert_eq!(g.enumerate_paths(8).unwrap().len(), 8);
        assert!(matches!(
            g.enumerate_paths(7),
            Err(Error::PathExplosion { target: 1, cap: 7 })
        ));
    }

    #[test]
    fn difficulty_table() {
        assert_eq!(classify_difficulty(1, 2).unwrap(), Difficulty::Medium);
        assert_eq!(classify_difficulty(0, 0).unwrap(), Difficulty::NoOcc);
        assert_eq!(classify_difficulty(3, 1).unwrap(), Difficulty::Hard);
        assert_eq!(classify_difficulty(1, 1).unwrap(), Difficulty::Easy);
        assert_eq!(classify_difficulty(2, 2).unwrap(), Difficulty::Medium);
        assert_eq!(classify_difficulty(2, 3).unwrap(), Difficulty::Hard);
        assert!(classify_difficulty(0, 1).is_err());
        assert!(classify_difficulty(2, 0).is_err());
    }

    #[test]
    fn record_audit_flags_mismatch() {
        let g = graph(&[1, 3, 4], &[(4, 1), (4, 3)]).target_graph(4).unwrap();
        let mut rec = GraphRecord::new("s", "3", &g, 64).unwrap();
        assert!(rec.audit().is_empty());
        rec.depends_on = vec![1];
        assert_eq!(rec.audit().len(), 1);
    }
}
