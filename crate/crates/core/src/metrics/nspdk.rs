//! NSPDK* features: hashed pairs of rooted neighbourhood subgraphs at radius
//! `r` whose roots are `d` hops apart, with the node-only `(0, 0)` pair left
//! out.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::hash::{Hash, Hasher};

use fnv::FnvHasher;

use super::descriptors::mmd_with;
use super::{MetricConfig, MetricError};
use crate::graph::SceneGraph;
use crate::math;

/// Sparse, L2-normalised feature vector.
pub type Features = BTreeMap<u64, f64>;

fn hash_of<T: Hash>(x: &T) -> u64 {
    let mut h = FnvHasher::default();
    x.hash(&mut h);
    h.finish()
}

fn bfs_distances(adj: &[Vec<usize>], root: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut q = VecDeque::from([root]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

/// Invariant code of the radius-`r` ball around `root`: node codes are
/// (distance from root, label), edge codes are (source code, target code,
/// relation), and both lists are sorted before hashing.
fn rooted_code(g: &SceneGraph, dist: &[usize], r: usize) -> u64 {
    let node_code: Vec<Option<u64>> =
        g.nodes().iter().zip(dist).map(|(n, &d)| (d <= r).then(|| hash_of(&(d, n.label.0)))).collect();
    let mut nodes: Vec<u64> = node_code.iter().flatten().copied().collect();
    nodes.sort_unstable();
    let mut edges: Vec<(u64, u64, u32)> = g
        .edges()
        .iter()
        .filter_map(|e| {
            let s = node_code[g.position(e.src)?]?;
            let t = node_code[g.position(e.dst)?]?;
            Some((s, t, e.label.0))
        })
        .collect();
    edges.sort_unstable();
    hash_of(&(r, nodes, edges))
}

pub fn nspdk_features(g: &SceneGraph, radii: &[usize], distances: &[usize]) -> Features {
    let adj = g.undirected_adjacency();
    let dists: Vec<Vec<usize>> = (0..g.num_nodes()).map(|u| bfs_distances(&adj, u)).collect();
    let codes: Vec<Vec<u64>> = radii.iter().map(|&r| dists.iter().map(|d| rooted_code(g, d, r)).collect()).collect();
    let mut feats = Features::new();
    for (ri, &r) in radii.iter().enumerate() {
        for &d in distances {
            if r == 0 && d == 0 {
                continue;
            }
            for u in 0..g.num_nodes() {
                for v in u..g.num_nodes() {
                    if dists[u][v] != d {
                        continue;
                    }
                    let (a, b) = (codes[ri][u], codes[ri][v]);
                    let key = hash_of(&(r, d, a.min(b), a.max(b)));
                    *feats.entry(key).or_insert(0.0) += 1.0;
                }
            }
        }
    }
    let norm = math::sqrt(feats.values().map(|x| x * x).sum());
    if norm > 0.0 {
        for x in feats.values_mut() {
            *x /= norm;
        }
    }
    feats
}

/// Squared distance between sparse vectors.
fn sq_dist(a: &Features, b: &Features) -> f64 {
    let mut s = 0.0;
    for (k, x) in a {
        let y = b.get(k).copied().unwrap_or(0.0);
        s += (x - y) * (x - y);
    }
    for (k, y) in b {
        if !a.contains_key(k) {
            s += y * y;
        }
    }
    s
}

/// MMD between graph sets under the Gaussian kernel on normalised NSPDK*
/// features. A featureless graph is the zero vector: featureless graphs match
/// each other exactly and sit at unit distance from every structured graph.
pub fn nspdk_star_mmd(a: &[SceneGraph], b: &[SceneGraph], cfg: &MetricConfig) -> Result<f64, MetricError> {
    if !(cfg.sigma > 0.0) {
        return Err(MetricError::Config("sigma must be positive"));
    }
    let fa: Vec<Features> = a.iter().map(|g| nspdk_features(g, &cfg.nspdk_radii, &cfg.nspdk_distances)).collect();
    let fb: Vec<Features> = b.iter().map(|g| nspdk_features(g, &cfg.nspdk_radii, &cfg.nspdk_distances)).collect();
    let s2 = 2.0 * cfg.sigma * cfg.sigma;
    mmd_with(&fa, &fb, |x, y| math::exp(-sq_dist(x, y) / s2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node, NodeId, ObjectLabel, RelationLabel};

    fn g(labels: &[u32], edges: &[(u32, u32)]) -> SceneGraph {
        SceneGraph::new(
            labels.iter().enumerate().map(|(i, &l)| Node { id: NodeId(i as u32), label: ObjectLabel(l) }).collect(),
            edges.iter().map(|&(s, d)| Edge { src: NodeId(s), dst: NodeId(d), label: RelationLabel(0) }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn edgeless_label_changes_are_invisible() {
        let cfg = MetricConfig::default();
        let a = [g(&[0, 1], &[]), g(&[2], &[])];
        let b = [g(&[3, 3, 3], &[])];
        assert_eq!(nspdk_star_mmd(&a, &b, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn path_differs_from_triangle() {
        let cfg = MetricConfig::default();
        let path = [g(&[0, 0, 0], &[(0, 1), (1, 2)])];
        let tri = [g(&[0, 0, 0], &[(0, 1), (1, 2), (2, 0)])];
        assert!(nspdk_star_mmd(&path, &tri, &cfg).unwrap() > 0.0);
        assert!(nspdk_star_mmd(&path, &path, &cfg).unwrap().abs() < 1e-12);
    }

    #[test]
    fn relabelling_ids_keeps_features() {
        let a = g(&[0, 1, 2], &[(0, 1), (2, 1)]);
        let b = SceneGraph::new(
            vec![
                Node { id: NodeId(10), label: ObjectLabel(2) },
                Node { id: NodeId(4), label: ObjectLabel(1) },
                Node { id: NodeId(7), label: ObjectLabel(0) },
            ],
            vec![
                Edge { src: NodeId(7), dst: NodeId(4), label: RelationLabel(0) },
                Edge { src: NodeId(10), dst: NodeId(4), label: RelationLabel(0) },
            ],
        )
        .unwrap();
        assert_eq!(nspdk_features(&a, &[0, 1], &[1, 2, 3]), nspdk_features(&b, &[0, 1], &[1, 2, 3]));
    }
}
