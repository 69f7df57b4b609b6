//! Per-graph descriptor histograms and the Gaussian-kernel MMD between sets
//! of them.

use alloc::vec;
use alloc::vec::Vec;

use super::{MetricConfig, MetricError};
use crate::graph::SceneGraph;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DescriptorKind {
    /// Total (in + out) degree, one bin per value up to the max bin, then an
    /// overflow bin.
    Degree,
    /// Local clustering coefficient of the undirected simplification.
    Clustering,
    NodeLabel,
    EdgeLabel,
    /// One-hot node count (overflow bin last).
    NodeCount,
    /// One-hot edge count (overflow bin last).
    EdgeCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorHistogram {
    pub kind: DescriptorKind,
    pub frequencies: Vec<f64>,
    /// Nothing to count (no nodes, or no edges for [`DescriptorKind::EdgeLabel`]);
    /// `frequencies` is all zero.
    pub empty: bool,
}

fn normalized(kind: DescriptorKind, counts: Vec<f64>) -> DescriptorHistogram {
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return DescriptorHistogram { kind, frequencies: counts, empty: true };
    }
    DescriptorHistogram { kind, frequencies: counts.into_iter().map(|c| c / total).collect(), empty: false }
}

fn one_hot(kind: DescriptorKind, value: usize, max_bin: usize) -> DescriptorHistogram {
    let mut v = vec![0.0; max_bin + 2];
    v[value.min(max_bin + 1)] = 1.0;
    DescriptorHistogram { kind, frequencies: v, empty: false }
}

/// Local clustering coefficient per node position on the undirected,
/// label-free simplification. Nodes of degree below 2 get 0.
pub fn clustering_coefficients(g: &SceneGraph) -> Vec<f64> {
    let adj = g.undirected_adjacency();
    adj.iter()
        .map(|nb| {
            let d = nb.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &a) in nb.iter().enumerate() {
                for &b in &nb[i + 1..] {
                    if adj[a].binary_search(&b).is_ok() {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

/// Histogram of `kind` for `g`. Label histograms have one bin per label of
/// a vocabulary with `num_objects` objects and `num_relations` relations.
pub fn descriptor_histogram(
    g: &SceneGraph,
    kind: DescriptorKind,
    cfg: &MetricConfig,
    num_objects: usize,
    num_relations: usize,
) -> DescriptorHistogram {
    match kind {
        DescriptorKind::Degree => {
            let mut c = vec![0.0; cfg.degree_max_bin + 2];
            for d in g.total_degrees() {
                c[d.min(cfg.degree_max_bin + 1)] += 1.0;
            }
            normalized(kind, c)
        }
        DescriptorKind::Clustering => {
            let bins = cfg.clustering_bins;
            let mut c = vec![0.0; bins];
            for x in clustering_coefficients(g) {
                let b = libm::floor(x * bins as f64) as usize;
                c[b.min(bins - 1)] += 1.0;
            }
            normalized(kind, c)
        }
        DescriptorKind::NodeLabel => {
            let mut c = vec![0.0; num_objects];
            for n in g.nodes() {
                c[n.label.index()] += 1.0;
            }
            normalized(kind, c)
        }
        DescriptorKind::EdgeLabel => {
            let mut c = vec![0.0; num_relations];
            for e in g.edges() {
                c[e.label.index()] += 1.0;
            }
            normalized(kind, c)
        }
        DescriptorKind::NodeCount => one_hot(kind, g.num_nodes(), cfg.count_max_bin),
        DescriptorKind::EdgeCount => one_hot(kind, g.num_edges(), cfg.count_max_bin),
    }
}

/// Gaussian kernel `exp(-||x - y||^2 / (2 sigma^2))`. Shorter vectors are
/// zero-padded.
pub fn gaussian_kernel(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let n = x.len().max(y.len());
    let d2: f64 = (0..n)
        .map(|i| {
            let d = x.get(i).copied().unwrap_or(0.0) - y.get(i).copied().unwrap_or(0.0);
            d * d
        })
        .sum();
    math::exp(-d2 / (2.0 * sigma * sigma))
}

/// Biased (V-statistic) squared MMD under an arbitrary kernel, clamped at 0.
pub fn mmd_with<T>(a: &[T], b: &[T], kernel: impl Fn(&T, &T) -> f64) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let mean = |xs: &[T], ys: &[T]| {
        let mut s = 0.0;
        for x in xs {
            for y in ys {
                s += kernel(x, y);
            }
        }
        s / (xs.len() * ys.len()) as f64
    };
    let v = mean(a, a) + mean(b, b) - 2.0 * mean(a, b);
    Ok(v.max(0.0))
}

/// MMD between two histogram sets with the Gaussian kernel.
pub fn mmd(a: &[DescriptorHistogram], b: &[DescriptorHistogram], sigma: f64) -> Result<f64, MetricError> {
    if !(sigma > 0.0) {
        return Err(MetricError::Config("sigma must be positive"));
    }
    mmd_with(a, b, |x, y| gaussian_kernel(&x.frequencies, &y.frequencies, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node, NodeId, ObjectLabel, RelationLabel};

    fn g(n: u32, edges: &[(u32, u32)]) -> SceneGraph {
        SceneGraph::new(
            (0..n).map(|i| Node { id: NodeId(i), label: ObjectLabel(0) }).collect(),
            edges.iter().map(|&(s, d)| Edge { src: NodeId(s), dst: NodeId(d), label: RelationLabel(0) }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn simple_histograms() {
        let cfg = MetricConfig::default();
        let h = descriptor_histogram(&g(3, &[]), DescriptorKind::Degree, &cfg, 1, 1);
        assert_eq!(h.frequencies[0], 1.0);
        let tri = g(3, &[(0, 1), (1, 2), (2, 0)]);
        let h = descriptor_histogram(&tri, DescriptorKind::Clustering, &cfg, 1, 1);
        assert_eq!(h.frequencies[9], 1.0);
        let h = descriptor_histogram(&g(2, &[]), DescriptorKind::EdgeLabel, &cfg, 1, 1);
        assert!(h.empty && h.frequencies == vec![0.0]);
        let h = descriptor_histogram(&SceneGraph::empty(), DescriptorKind::NodeLabel, &cfg, 2, 1);
        assert!(h.empty);
    }

    #[test]
    fn mmd_closed_form() {
        let a = DescriptorHistogram { kind: DescriptorKind::Degree, frequencies: vec![1.0, 0.0], empty: false };
        let b = DescriptorHistogram { frequencies: vec![0.0, 1.0], ..a.clone() };
        let v = mmd(core::slice::from_ref(&a), &[b], 1.0).unwrap();
        assert!((v - (2.0 - 2.0 * math::exp(-1.0))).abs() < 1e-12);
        assert_eq!(mmd(&[a.clone(), a.clone()], core::slice::from_ref(&a), 1.0).unwrap(), 0.0);
        assert!(matches!(mmd(&[], &[a], 1.0), Err(MetricError::EmptySet)));
    }
}
