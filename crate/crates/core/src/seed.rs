//! Seed extraction: sample small connected subgraphs of a scene graph with
//! probability proportional to the mean PageRank of their nodes.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::graph::{connected_components, NodeId, SceneGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeedError {
    #[error("PageRank did not converge within {iterations} iterations (last change {delta:e})")]
    NotConverged { iterations: usize, delta: f64 },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    /// L1 change between iterates below which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig { damping: 0.85, tolerance: 1e-10, max_iterations: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedExtractConfig {
    /// Seeds drawn per connected component.
    pub per_component: usize,
    /// Largest seed, in nodes.
    pub max_nodes: usize,
}

impl Default for SeedExtractConfig {
    fn default() -> Self {
        SeedExtractConfig { per_component: 1, max_nodes: 4 }
    }
}

/// PageRank over the directed edges of `g`, ignoring labels. Nodes without
/// out-edges spread their mass uniformly. Scores follow `g.nodes()` order.
pub fn pagerank(g: &SceneGraph, cfg: &PageRankConfig) -> Result<Vec<f64>, SeedError> {
    if !(cfg.damping > 0.0 && cfg.damping < 1.0) {
        return Err(SeedError::Config("damping must lie in (0, 1)"));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(SeedError::Config("tolerance must be positive"));
    }
    let n = g.num_nodes();
    if n == 0 {
        return Err(SeedError::EmptyGraph);
    }
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in g.edges() {
        let s = g.position(e.src).expect("valid edge");
        let d = g.position(e.dst).expect("valid edge");
        out[s].push(d);
    }
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut delta = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let dangling: f64 = (0..n).filter(|&u| out[u].is_empty()).map(|u| x[u]).sum();
        let base = (1.0 - cfg.damping) / nf + cfg.damping * dangling / nf;
        let mut next = vec![base; n];
        for u in 0..n {
            if !out[u].is_empty() {
                let share = cfg.damping * x[u] / out[u].len() as f64;
                for &v in &out[u] {
                    next[v] += share;
                }
            }
        }
        delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < cfg.tolerance {
            return Ok(x);
        }
    }
    Err(SeedError::NotConverged { iterations: cfg.max_iterations, delta })
}

/// Node sets (as positions into `g.nodes()`) of every connected induced
/// subgraph with 1 to `max_nodes` nodes, ordered by size, then
/// lexicographically.
pub fn connected_node_sets(g: &SceneGraph, max_nodes: usize) -> Vec<Vec<usize>> {
    let adj = g.undirected_adjacency();
    let mut all: Vec<Vec<usize>> = Vec::new();
    let mut frontier: BTreeSet<Vec<usize>> = (0..g.num_nodes()).map(|u| vec![u]).collect();
    for _ in 0..max_nodes {
        if frontier.is_empty() {
            break;
        }
        let mut next = BTreeSet::new();
        for set in &frontier {
            if set.len() < max_nodes {
                for &u in set {
                    for &v in &adj[u] {
                        if let Err(at) = set.binary_search(&v) {
                            let mut grown = set.clone();
                            grown.insert(at, v);
                            next.insert(grown);
                        }
                    }
                }
            }
        }
        all.extend(frontier);
        frontier = next;
    }
    all
}

/// Every connected induced subgraph with at most `max_nodes` nodes, in the
/// order of [`connected_node_sets`].
pub fn enumerate_subgraphs(g: &SceneGraph, max_nodes: usize) -> Vec<SceneGraph> {
    connected_node_sets(g, max_nodes).into_iter().map(|set| induced_by_positions(g, &set)).collect()
}

fn induced_by_positions(g: &SceneGraph, set: &[usize]) -> SceneGraph {
    let ids: Vec<NodeId> = set.iter().map(|&p| g.nodes()[p].id).collect();
    g.induced(&ids)
}

/// Candidate seeds of one component and their sampling probabilities.
pub fn seed_distribution(
    component: &SceneGraph,
    max_nodes: usize,
    pr_cfg: &PageRankConfig,
) -> Result<(Vec<SceneGraph>, Vec<f64>), SeedError> {
    let pr = pagerank(component, pr_cfg)?;
    let sets = connected_node_sets(component, max_nodes);
    let scores: Vec<f64> = sets.iter().map(|s| s.iter().map(|&p| pr[p]).sum::<f64>() / s.len() as f64).collect();
    let total: f64 = scores.iter().sum();
    let probs = scores.into_iter().map(|s| s / total).collect();
    let graphs = sets.iter().map(|s| induced_by_positions(component, s)).collect();
    Ok((graphs, probs))
}

/// Draws `per_component` seeds without replacement from every weakly
/// connected component of `g`. Components are visited in the order of
/// [`connected_components`].
pub fn extract_seeds<R: Rng + ?Sized>(
    g: &SceneGraph,
    cfg: &SeedExtractConfig,
    pr_cfg: &PageRankConfig,
    rng: &mut R,
) -> Result<Vec<SceneGraph>, SeedError> {
    if cfg.per_component == 0 || cfg.max_nodes == 0 {
        return Err(SeedError::Config("seed count and size cap must be positive"));
    }
    if g.is_empty() {
        return Err(SeedError::EmptyGraph);
    }
    let mut seeds = Vec::new();
    for comp in connected_components(g) {
        let sub = g.induced(&comp);
        let (mut cands, mut probs) = seed_distribution(&sub, cfg.max_nodes, pr_cfg)?;
        for _ in 0..cfg.per_component.min(cands.len()) {
            let total: f64 = probs.iter().sum();
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            probs.remove(pick);
            seeds.push(cands.remove(pick));
        }
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node, ObjectLabel, RelationLabel};
    use crate::rng::rng_from_seed;

    fn graph(n: u32, edges: &[(u32, u32)]) -> SceneGraph {
        SceneGraph::new(
            (0..n).map(|i| Node { id: NodeId(i), label: ObjectLabel(i % 3) }).collect(),
            edges.iter().map(|&(s, d)| Edge { src: NodeId(s), dst: NodeId(d), label: RelationLabel(0) }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pagerank_small_cases() {
        let cfg = PageRankConfig::default();
        assert_eq!(pagerank(&graph(1, &[]), &cfg).unwrap(), vec![1.0]);
        let pr = pagerank(&graph(2, &[(0, 1), (1, 0)]), &cfg).unwrap();
        assert!((pr[0] - 0.5).abs() < 1e-12 && (pr[1] - 0.5).abs() < 1e-12);
        let pr = pagerank(&graph(2, &[(0, 1)]), &cfg).unwrap();
        // x = 0.075 + 0.85 (1 - x) / 2
        let a = (0.075 + 0.425) / 1.425;
        assert!((pr[0] - a).abs() < 1e-9, "{pr:?}");
        assert!((pr[0] + pr[1] - 1.0).abs() < 1e-12);
        assert!(matches!(
            pagerank(&graph(2, &[(0, 1)]), &PageRankConfig { max_iterations: 1, ..cfg }),
            Err(SeedError::NotConverged { .. })
        ));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_subgraphs(&graph(1, &[]), 4).len(), 1);
        let tri = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        assert_eq!(enumerate_subgraphs(&tri, 3).len(), 7);
        let path = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(enumerate_subgraphs(&path, 2).len(), 7);
        let sets = connected_node_sets(&path, 4);
        assert_eq!(sets.len(), 4 + 3 + 2 + 1);
        assert!(sets.windows(2).all(|w| (w[0].len(), &w[0]) < (w[1].len(), &w[1])));
    }

    #[test]
    fn seeds_per_component() {
        let g = graph(4, &[(0, 1), (2, 3)]);
        let cfg = SeedExtractConfig { per_component: 2, max_nodes: 4 };
        let seeds = extract_seeds(&g, &cfg, &PageRankConfig::default(), &mut rng_from_seed(5)).unwrap();
        assert_eq!(seeds.len(), 4);
        assert_ne!(seeds[0], seeds[1]);
        let single = extract_seeds(
            &graph(1, &[]),
            &SeedExtractConfig::default(),
            &PageRankConfig::default(),
            &mut rng_from_seed(0),
        )
        .unwrap();
        assert_eq!(single, vec![graph(1, &[])]);
    }

    #[test]
    fn distribution_is_normalized() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 1)]);
        let (cands, probs) = seed_distribution(&g, 4, &PageRankConfig::default()).unwrap();
        assert_eq!(cands.len(), probs.len());
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
