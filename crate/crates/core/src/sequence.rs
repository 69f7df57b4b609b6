//! Flattening graphs into node/edge-pair step sequences.
//!
//! Step `i` holds the label of the `i`-th node in the ordering and one
//! [`EdgePair`] per earlier node inside the window, nearest predecessor first.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{connected_components, Edge, Node, NodeId, ObjectLabel, RelationLabel, SceneGraph};

/// Relationship pair between the current node `i` and a predecessor `j`.
/// `None` is the explicit "no relationship" class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EdgePair {
    /// Edge `i -> j`.
    pub forward: Option<RelationLabel>,
    /// Edge `j -> i`.
    pub backward: Option<RelationLabel>,
}

impl EdgePair {
    pub const NONE: EdgePair = EdgePair { forward: None, backward: None };

    pub fn is_none(&self) -> bool {
        self.forward.is_none() && self.backward.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceStep {
    pub node: ObjectLabel,
    /// `edges[d]` pairs this node with the node `d + 1` positions earlier.
    pub edges: Vec<EdgePair>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphSequence {
    pub steps: Vec<SequenceStep>,
    /// Window width; `usize::MAX` when untruncated.
    pub k: usize,
    /// Source node id at each position.
    pub order: Vec<NodeId>,
}

impl GraphSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of (i, j) pair slots, i.e. the sum of all window lengths.
    pub fn num_pair_slots(&self) -> usize {
        self.steps.iter().map(|s| s.edges.len()).sum()
    }
}

/// Flattens `g` with an explicit node order. Pairs further apart than `k`
/// positions are not recorded.
pub fn sequence_with_order(g: &SceneGraph, order: &[NodeId], k: usize) -> GraphSequence {
    let labels: Vec<ObjectLabel> = order.iter().map(|&id| g.label_of(id).expect("order lists graph nodes")).collect();
    let steps = (0..order.len())
        .map(|i| {
            let window = i.min(k);
            let edges = (1..=window)
                .map(|d| {
                    let j = i - d;
                    EdgePair { forward: g.edge_label(order[i], order[j]), backward: g.edge_label(order[j], order[i]) }
                })
                .collect();
            SequenceStep { node: labels[i], edges }
        })
        .collect();
    GraphSequence { steps, k, order: order.to_vec() }
}

/// Cluster-aware BFS order: each weakly connected component is traversed
/// breadth-first from a uniformly drawn start with shuffled neighbour
/// expansion, and the component blocks are concatenated in shuffled order.
pub fn cluster_aware_order<R: Rng + ?Sized>(g: &SceneGraph, rng: &mut R) -> Vec<NodeId> {
    let mut components = connected_components(g);
    components.shuffle(rng);
    let adj = g.undirected_adjacency();
    let mut seen = vec![false; g.num_nodes()];
    let mut order = Vec::with_capacity(g.num_nodes());
    for comp in &components {
        let start = comp[rng.gen_range(0..comp.len())];
        let start = g.position(start).expect("component member");
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(g.nodes()[u].id);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !seen[v]).collect();
            next.shuffle(rng);
            for v in next {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    order
}

pub fn cluster_aware_bfs<R: Rng + ?Sized>(g: &SceneGraph, k: usize, rng: &mut R) -> GraphSequence {
    assert!(k >= 1, "window must be at least 1");
    let order = cluster_aware_order(g, rng);
    sequence_with_order(g, &order, k)
}

/// Rebuilds a graph whose node ids are sequence positions.
pub fn sequence_to_graph(s: &GraphSequence) -> SceneGraph {
    let nodes: Vec<Node> =
        s.steps.iter().enumerate().map(|(i, st)| Node { id: NodeId(i as u32), label: st.node }).collect();
    let mut edges = Vec::new();
    for (i, st) in s.steps.iter().enumerate() {
        for (d, pair) in st.edges.iter().enumerate() {
            let j = i - (d + 1);
            if let Some(label) = pair.forward {
                edges.push(Edge { src: NodeId(i as u32), dst: NodeId(j as u32), label });
            }
            if let Some(label) = pair.backward {
                edges.push(Edge { src: NodeId(j as u32), dst: NodeId(i as u32), label });
            }
        }
    }
    SceneGraph::new(nodes, edges).expect("sequence encodes one edge per ordered pair")
}

/// Keeps only the `k` nearest predecessors of each step.
pub fn truncate_edges(s: &GraphSequence, k: usize) -> GraphSequence {
    assert!(k >= 1, "window must be at least 1");
    GraphSequence {
        steps: s
            .steps
            .iter()
            .map(|st| SequenceStep { node: st.node, edges: st.edges.iter().take(k).copied().collect() })
            .collect(),
        k: k.min(s.k),
        order: s.order.clone(),
    }
}
