//! Labelled directed subgraph monomorphism.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{RelationLabel, SceneGraph};

/// Position-indexed edge structure for constant-time pair lookups.
struct Index {
    labels: Vec<u32>,
    /// `rel[u * n + v]` is the relation on `u -> v`, if any.
    rel: Vec<Option<RelationLabel>>,
    out_deg: Vec<usize>,
    in_deg: Vec<usize>,
    /// Undirected neighbours.
    adj: Vec<Vec<usize>>,
}

impl Index {
    fn new(g: &SceneGraph) -> Self {
        let n = g.num_nodes();
        let mut rel = vec![None; n * n];
        let mut out_deg = vec![0; n];
        let mut in_deg = vec![0; n];
        for e in g.edges() {
            let s = g.position(e.src).expect("valid edge");
            let d = g.position(e.dst).expect("valid edge");
            rel[s * n + d] = Some(e.label);
            out_deg[s] += 1;
            in_deg[d] += 1;
        }
        Index {
            labels: g.nodes().iter().map(|x| x.label.0).collect(),
            rel,
            out_deg,
            in_deg,
            adj: g.undirected_adjacency(),
        }
    }

    fn n(&self) -> usize {
        self.labels.len()
    }

    fn rel(&self, u: usize, v: usize) -> Option<RelationLabel> {
        self.rel[u * self.n() + v]
    }
}

/// Matching order: connected growth from the most constrained node, so every
/// node after the first in a component has an already-mapped neighbour.
fn match_order(s: &Index) -> Vec<usize> {
    let n = s.n();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let next = (0..n)
            .filter(|&u| !placed[u])
            .max_by_key(|&u| {
                let linked = s.adj[u].iter().filter(|&&v| placed[v]).count();
                (linked, s.adj[u].len(), core::cmp::Reverse(u))
            })
            .expect("unplaced node exists");
        placed[next] = true;
        order.push(next);
    }
    order
}

/// True iff there is an injective map from the nodes of `small` into the
/// nodes of `big` that preserves object labels and sends every edge of
/// `small` to an edge of `big` with the same relation. `big` may have extra
/// edges among the image nodes.
pub fn is_subgraph_isomorphic(small: &SceneGraph, big: &SceneGraph) -> bool {
    if small.num_nodes() > big.num_nodes() || small.num_edges() > big.num_edges() {
        return false;
    }
    if !label_multiset_fits(small, big) {
        return false;
    }
    let s = Index::new(small);
    let b = Index::new(big);
    let order = match_order(&s);
    let mut map = vec![usize::MAX; s.n()];
    let mut used = vec![false; b.n()];
    extend(&s, &b, &order, 0, &mut map, &mut used)
}

fn label_multiset_fits(small: &SceneGraph, big: &SceneGraph) -> bool {
    let mut a: Vec<u32> = small.nodes().iter().map(|n| n.label.0).collect();
    let mut b: Vec<u32> = big.nodes().iter().map(|n| n.label.0).collect();
    a.sort_unstable();
    b.sort_unstable();
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

fn feasible(s: &Index, b: &Index, map: &[usize], u: usize, v: usize) -> bool {
    if s.labels[u] != b.labels[v] || s.out_deg[u] > b.out_deg[v] || s.in_deg[u] > b.in_deg[v] {
        return false;
    }
    for &w in &s.adj[u] {
        let mw = map[w];
        if mw == usize::MAX {
            continue;
        }
        if let Some(r) = s.rel(u, w) {
            if b.rel(v, mw) != Some(r) {
                return false;
            }
        }
        if let Some(r) = s.rel(w, u) {
            if b.rel(mw, v) != Some(r) {
                return false;
            }
        }
    }
    true
}

fn extend(s: &Index, b: &Index, order: &[usize], depth: usize, map: &mut [usize], used: &mut [bool]) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    // A node linked to something already mapped must land next to its image.
    let anchor = s.adj[u].iter().find(|&&w| map[w] != usize::MAX).map(|&w| map[w]);
    let candidates: Vec<usize> = match anchor {
        Some(a) => b.adj[a].clone(),
        None => (0..b.n()).collect(),
    };
    for v in candidates {
        if used[v] || !feasible(s, b, map, u, v) {
            continue;
        }
        map[u] = v;
        used[v] = true;
        if extend(s, b, order, depth + 1, map, used) {
            return true;
        }
        map[u] = usize::MAX;
        used[v] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node, NodeId, ObjectLabel};

    fn g(nodes: &[u32], edges: &[(u32, u32, u32)]) -> SceneGraph {
        SceneGraph::new(
            nodes.iter().enumerate().map(|(i, &l)| Node { id: NodeId(i as u32), label: ObjectLabel(l) }).collect(),
            edges.iter().map(|&(s, d, l)| Edge { src: NodeId(s), dst: NodeId(d), label: RelationLabel(l) }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn basic_cases() {
        let big = g(&[0, 1, 2], &[(0, 1, 0), (1, 2, 1), (2, 0, 0)]);
        assert!(is_subgraph_isomorphic(&big, &big));
        assert!(is_subgraph_isomorphic(&g(&[1], &[]), &big));
        assert!(!is_subgraph_isomorphic(&g(&[3], &[]), &big));
        assert!(is_subgraph_isomorphic(&g(&[0, 1], &[(0, 1, 0)]), &big));
        assert!(!is_subgraph_isomorphic(&g(&[0, 1], &[(1, 0, 0)]), &big));
        assert!(!is_subgraph_isomorphic(&g(&[0, 1], &[(0, 1, 1)]), &big));
        // Monomorphism: extra edges in the target are fine.
        assert!(is_subgraph_isomorphic(&g(&[0, 1, 2], &[]), &big));
        assert!(!is_subgraph_isomorphic(&g(&[0, 0], &[]), &big));
        assert!(is_subgraph_isomorphic(&SceneGraph::empty(), &big));
    }
}
