//! Scene-graph data model.
//!
//! Graphs store label *indices* into a [`Vocabulary`]. Node and edge lists are
//! kept in canonical order (nodes by id, edges by `(src, dst, label)`), so two
//! graphs with the same content compare equal regardless of how they were
//! built.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

/// Index of an object class in [`Vocabulary::object_labels`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectLabel(pub u32);

/// Index of a relation class in [`Vocabulary::relation_labels`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationLabel(pub u32);

impl ObjectLabel {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationLabel {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge endpoint {0} is not a node of the graph")]
    MissingEndpoint(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("duplicate directed edge {src} -> {dst}")]
    DuplicateEdge { src: NodeId, dst: NodeId },
    #[error("unknown object label `{0}`")]
    UnknownObjectLabel(String),
    #[error("unknown relation label `{0}`")]
    UnknownRelationLabel(String),
    #[error("object label index {0} outside the vocabulary")]
    ObjectIndexOutOfRange(u32),
    #[error("relation label index {0} outside the vocabulary")]
    RelationIndexOutOfRange(u32),
    #[error("duplicate vocabulary label `{0}`")]
    DuplicateLabel(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("percentile must lie in (0, 1], got {0}")]
    BadPercentile(f64),
}

/// Object and relation label sets.
///
/// Sentinels are not labels: the node-side `SOS`/`EOS` symbols and the
/// relation-side `NO_EDGE` symbol are the indices just past the stored labels
/// (see [`Vocabulary::sos`], [`Vocabulary::eos`], [`Vocabulary::no_edge`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    object_labels: Vec<String>,
    relation_labels: Vec<String>,
    object_index: BTreeMap<String, u32>,
    relation_index: BTreeMap<String, u32>,
}

impl Vocabulary {
    pub fn new(object_labels: Vec<String>, relation_labels: Vec<String>) -> Result<Self, GraphError> {
        let object_index = index_labels(&object_labels)?;
        let relation_index = index_labels(&relation_labels)?;
        Ok(Vocabulary { object_labels, relation_labels, object_index, relation_index })
    }

    pub fn object_labels(&self) -> &[String] {
        &self.object_labels
    }

    pub fn relation_labels(&self) -> &[String] {
        &self.relation_labels
    }

    pub fn num_objects(&self) -> usize {
        self.object_labels.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_labels.len()
    }

    pub fn object(&self, name: &str) -> Result<ObjectLabel, GraphError> {
        self.object_index.get(name).map(|&i| ObjectLabel(i)).ok_or_else(|| GraphError::UnknownObjectLabel(name.into()))
    }

    pub fn relation(&self, name: &str) -> Result<RelationLabel, GraphError> {
        self.relation_index
            .get(name)
            .map(|&i| RelationLabel(i))
            .ok_or_else(|| GraphError::UnknownRelationLabel(name.into()))
    }

    pub fn object_name(&self, label: ObjectLabel) -> Option<&str> {
        self.object_labels.get(label.index()).map(String::as_str)
    }

    pub fn relation_name(&self, label: RelationLabel) -> Option<&str> {
        self.relation_labels.get(label.index()).map(String::as_str)
    }

    /// End-of-sequence node symbol; the last node class.
    pub fn eos(&self) -> usize {
        self.object_labels.len()
    }

    /// Start-of-sequence node symbol (input only, never predicted).
    pub fn sos(&self) -> usize {
        self.object_labels.len() + 1
    }

    /// The "no relationship" relation class.
    pub fn no_edge(&self) -> RelationLabel {
        RelationLabel(self.relation_labels.len() as u32)
    }

    /// Checks that every label of `g` indexes into this vocabulary.
    pub fn check_graph(&self, g: &SceneGraph) -> Result<(), GraphError> {
        for n in g.nodes() {
            if n.label.index() >= self.num_objects() {
                return Err(GraphError::ObjectIndexOutOfRange(n.label.0));
            }
        }
        for e in g.edges() {
            if e.label.index() >= self.num_relations() {
                return Err(GraphError::RelationIndexOutOfRange(e.label.0));
            }
        }
        Ok(())
    }

    /// 64-bit FNV digest of both label lists, in order.
    pub fn fingerprint(&self) -> u64 {
        use core::hash::Hasher;
        let mut h = fnv::FnvHasher::default();
        for l in &self.object_labels {
            h.write(l.as_bytes());
            h.write_u8(0);
        }
        h.write_u8(0xff);
        for l in &self.relation_labels {
            h.write(l.as_bytes());
            h.write_u8(0);
        }
        h.finish()
    }
}

fn index_labels(labels: &[String]) -> Result<BTreeMap<String, u32>, GraphError> {
    let mut map = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        if map.insert(l.clone(), i as u32).is_some() {
            return Err(GraphError::DuplicateLabel(l.clone()));
        }
    }
    Ok(map)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Node {
    pub id: NodeId,
    pub label: ObjectLabel,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub label: RelationLabel,
}

/// Labelled directed graph without self-loops and with at most one edge per
/// ordered node pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SceneGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl SceneGraph {
    /// Builds a graph, rejecting every invariant violation.
    pub fn new(mut nodes: Vec<Node>, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        nodes.sort();
        for w in nodes.windows(2) {
            if w[0].id == w[1].id {
                return Err(GraphError::DuplicateNode(w[0].id));
            }
        }
        let has = |id: NodeId| nodes.binary_search_by_key(&id, |n| n.id).is_ok();
        for e in &edges {
            if e.src == e.dst {
                return Err(GraphError::SelfLoop(e.src));
            }
            if !has(e.src) {
                return Err(GraphError::MissingEndpoint(e.src));
            }
            if !has(e.dst) {
                return Err(GraphError::MissingEndpoint(e.dst));
            }
        }
        edges.sort();
        for w in edges.windows(2) {
            if w[0].src == w[1].src && w[0].dst == w[1].dst {
                return Err(GraphError::DuplicateEdge { src: w[0].src, dst: w[0].dst });
            }
        }
        Ok(SceneGraph { nodes, edges })
    }

    pub fn empty() -> Self {
        SceneGraph::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of `id` in [`SceneGraph::nodes`].
    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok()
    }

    pub fn label_of(&self, id: NodeId) -> Option<ObjectLabel> {
        self.position(id).map(|p| self.nodes[p].label)
    }

    pub fn edge_label(&self, src: NodeId, dst: NodeId) -> Option<RelationLabel> {
        // Edges are sorted by (src, dst, label) and (src, dst) is unique.
        self.edges.binary_search_by(|e| (e.src, e.dst).cmp(&(src, dst))).ok().map(|i| self.edges[i].label)
    }

    pub fn max_node_id(&self) -> Option<NodeId> {
        self.nodes.last().map(|n| n.id)
    }

    /// Position-indexed undirected neighbour lists (sorted, deduplicated).
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let a = self.position(e.src).expect("validated endpoint");
            let b = self.position(e.dst).expect("validated endpoint");
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Total (in + out) degree per node position.
    pub fn total_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[self.position(e.src).expect("validated endpoint")] += 1;
            deg[self.position(e.dst).expect("validated endpoint")] += 1;
        }
        deg
    }

    /// Node-induced subgraph on `ids` (ids not in the graph are ignored).
    pub fn induced(&self, ids: &[NodeId]) -> SceneGraph {
        let keep: BTreeSet<NodeId> = ids.iter().copied().filter(|&i| self.position(i).is_some()).collect();
        let nodes = self.nodes.iter().filter(|n| keep.contains(&n.id)).copied().collect();
        let edges = self.edges.iter().filter(|e| keep.contains(&e.src) && keep.contains(&e.dst)).copied().collect();
        SceneGraph { nodes, edges }
    }

    /// Set of distinct object labels present.
    pub fn label_set(&self) -> BTreeSet<ObjectLabel> {
        self.nodes.iter().map(|n| n.label).collect()
    }
}

/// Incremental graph construction that collapses duplicate directed edges to
/// the first one added.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    nodes: BTreeMap<NodeId, ObjectLabel>,
    edges: BTreeMap<(NodeId, NodeId), RelationLabel>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_graph(g: &SceneGraph) -> Self {
        let mut b = GraphBuilder::new();
        for n in g.nodes() {
            b.nodes.insert(n.id, n.label);
        }
        for e in g.edges() {
            b.edges.insert((e.src, e.dst), e.label);
        }
        b
    }

    pub fn add_node(&mut self, id: NodeId, label: ObjectLabel) -> Result<(), GraphError> {
        if self.nodes.insert(id, label).is_some() {
            return Err(GraphError::DuplicateNode(id));
        }
        Ok(())
    }

    /// Adds `src -> dst`. Returns `Ok(false)` when the ordered pair already
    /// carries an edge (the existing one is kept).
    pub fn add_edge(&mut self, src: NodeId, dst: NodeId, label: RelationLabel) -> Result<bool, GraphError> {
        if src == dst {
            return Err(GraphError::SelfLoop(src));
        }
        for id in [src, dst] {
            if !self.nodes.contains_key(&id) {
                return Err(GraphError::MissingEndpoint(id));
            }
        }
        if self.edges.contains_key(&(src, dst)) {
            return Ok(false);
        }
        self.edges.insert((src, dst), label);
        Ok(true)
    }

    pub fn build(self) -> SceneGraph {
        let nodes = self.nodes.into_iter().map(|(id, label)| Node { id, label }).collect();
        let edges = self.edges.into_iter().map(|((src, dst), label)| Edge { src, dst, label }).collect();
        // BTreeMap iteration already yields canonical order.
        SceneGraph { nodes, edges }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    #[default]
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub graphs: Vec<SceneGraph>,
    pub vocabulary: Vocabulary,
    pub split: Split,
}

impl Corpus {
    pub fn new(graphs: Vec<SceneGraph>, vocabulary: Vocabulary, split: Split) -> Result<Self, GraphError> {
        for g in &graphs {
            vocabulary.check_graph(g)?;
        }
        Ok(Corpus { graphs, vocabulary, split })
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn mean_node_count(&self) -> f64 {
        mean(self.graphs.iter().map(|g| g.num_nodes() as f64))
    }

    pub fn mean_edge_count(&self) -> f64 {
        mean(self.graphs.iter().map(|g| g.num_edges() as f64))
    }
}

pub(crate) fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Weakly connected components, each sorted by id, ordered by smallest member.
pub fn connected_components(g: &SceneGraph) -> Vec<Vec<NodeId>> {
    let adj = g.undirected_adjacency();
    let mut seen = vec![false; g.num_nodes()];
    let mut out = Vec::new();
    // Node positions are in id order, so scanning positions yields components
    // ordered by their smallest member.
    for start in 0..g.num_nodes() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            members.push(g.nodes()[u].id);
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        members.sort();
        out.push(members);
    }
    out
}

/// Degree profile of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    pub node_counts: Vec<usize>,
    pub edge_counts: Vec<usize>,
    /// `cumulative[d]` is the fraction of all nodes with total degree `<= d`.
    pub cumulative: Vec<f64>,
    pub percentile: f64,
    /// Smallest `k` with `cumulative[k] >= percentile`.
    pub percentile_k: usize,
}

pub fn degree_stats(graphs: &[SceneGraph], percentile: f64) -> Result<DegreeStats, GraphError> {
    if graphs.is_empty() {
        return Err(GraphError::EmptyCorpus);
    }
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(GraphError::BadPercentile(percentile));
    }
    let mut hist: Vec<usize> = Vec::new();
    let mut total = 0usize;
    for g in graphs {
        for d in g.total_degrees() {
            if d >= hist.len() {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
            total += 1;
        }
    }
    if hist.is_empty() {
        hist.push(0);
    }
    let mut cumulative = Vec::with_capacity(hist.len());
    let mut running = 0usize;
    for &h in &hist {
        running += h;
        cumulative.push(if total == 0 { 1.0 } else { running as f64 / total as f64 });
    }
    // Integer comparison avoids rounding at exact percentile boundaries:
    // running / total >= p  <=>  running >= ceil(p * total).
    let needed = ceil_fraction(percentile, total);
    let mut running = 0usize;
    let mut percentile_k = hist.len() - 1;
    for (d, &h) in hist.iter().enumerate() {
        running += h;
        if running >= needed {
            percentile_k = d;
            break;
        }
    }
    Ok(DegreeStats {
        node_counts: graphs.iter().map(SceneGraph::num_nodes).collect(),
        edge_counts: graphs.iter().map(SceneGraph::num_edges).collect(),
        cumulative,
        percentile,
        percentile_k,
    })
}

fn ceil_fraction(p: f64, total: usize) -> usize {
    let x = p * total as f64;
    let r = libm::round(x);
    // Snap values within float noise of an integer before taking the ceiling.
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        libm::ceil(x) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    pub(crate) fn n(id: u32, label: u32) -> Node {
        Node { id: NodeId(id), label: ObjectLabel(label) }
    }

    pub(crate) fn e(src: u32, dst: u32, label: u32) -> Edge {
        Edge { src: NodeId(src), dst: NodeId(dst), label: RelationLabel(label) }
    }

    #[test]
    fn rejects_invariant_violations() {
        assert_eq!(SceneGraph::new(vec![n(0, 0)], vec![e(0, 0, 0)]), Err(GraphError::SelfLoop(NodeId(0))));
        assert_eq!(SceneGraph::new(vec![n(0, 0)], vec![e(0, 1, 0)]), Err(GraphError::MissingEndpoint(NodeId(1))));
        assert_eq!(
            SceneGraph::new(vec![n(0, 0), n(1, 0)], vec![e(0, 1, 0), e(0, 1, 1)]),
            Err(GraphError::DuplicateEdge { src: NodeId(0), dst: NodeId(1) })
        );
        assert_eq!(SceneGraph::new(vec![n(0, 0), n(0, 1)], vec![]), Err(GraphError::DuplicateNode(NodeId(0))));
        // Opposite directions are two different ordered pairs.
        assert!(SceneGraph::new(vec![n(0, 0), n(1, 0)], vec![e(0, 1, 0), e(1, 0, 1)]).is_ok());
    }

    #[test]
    fn builder_collapses_duplicates_to_first() {
        let mut b = GraphBuilder::new();
        b.add_node(NodeId(0), ObjectLabel(0)).unwrap();
        b.add_node(NodeId(1), ObjectLabel(1)).unwrap();
        assert!(b.add_edge(NodeId(0), NodeId(1), RelationLabel(2)).unwrap());
        assert!(!b.add_edge(NodeId(0), NodeId(1), RelationLabel(3)).unwrap());
        let g = b.build();
        assert_eq!(g.edges(), &[e(0, 1, 2)]);
    }

    #[test]
    fn vocabulary_sentinels_and_lookup() {
        let v = Vocabulary::new(vec!["man".to_string(), "horse".to_string()], vec!["riding".to_string()]).unwrap();
        assert_eq!(v.object("horse").unwrap(), ObjectLabel(1));
        assert_eq!(v.eos(), 2);
        assert_eq!(v.sos(), 3);
        assert_eq!(v.no_edge(), RelationLabel(1));
        assert!(matches!(v.object("dog"), Err(GraphError::UnknownObjectLabel(_))));
        assert!(Vocabulary::new(vec!["a".to_string(), "a".to_string()], vec![]).is_err());
    }

    #[test]
    fn components_small_cases() {
        let g = SceneGraph::new(vec![n(0, 0), n(1, 0), n(2, 0)], vec![e(0, 1, 0)]).unwrap();
        assert_eq!(connected_components(&g), vec![vec![NodeId(0), NodeId(1)], vec![NodeId(2)]]);
        assert!(connected_components(&SceneGraph::empty()).is_empty());
    }

    #[test]
    fn degree_stats_constant_degree() {
        // Directed 4-cycle: every node has in + out = 2.
        let g = SceneGraph::new(
            vec![n(0, 0), n(1, 0), n(2, 0), n(3, 0)],
            vec![e(0, 1, 0), e(1, 2, 0), e(2, 3, 0), e(3, 0, 0)],
        )
        .unwrap();
        let s = degree_stats(&[g], 0.99).unwrap();
        assert_eq!(s.percentile_k, 2);
        assert_eq!(*s.cumulative.last().unwrap(), 1.0);
        assert!(matches!(degree_stats(&[], 0.5), Err(GraphError::EmptyCorpus)));
        assert!(degree_stats(&[SceneGraph::empty()], 0.0).is_err());
    }
}
