//! Seeded synthetic scene-graph corpora.
//!
//! Each cluster is an ordered list of object labels that tend to appear
//! together, read as a chain (`c[0] - c[1] - ...`). A graph picks one cluster,
//! takes a contiguous window of it, links consecutive objects with relations
//! drawn from a Zipf-like law, and then perturbs the result: some objects are
//! swapped for off-cluster labels and some chain links are dropped, which
//! splits the scene into several components.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::graph::{Corpus, GraphBuilder, NodeId, ObjectLabel, RelationLabel, Split, Vocabulary};
use crate::math;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_graphs: usize,
    pub num_object_labels: usize,
    pub num_relation_labels: usize,
    /// Ordered, label-index groups. Clusters may overlap.
    pub clusters: Vec<Vec<u32>>,
    /// Relation `r` is drawn with weight `(r + 1)^-skew`; 0 is uniform.
    pub edge_label_skew: f64,
    /// Inclusive node-count range.
    pub nodes_per_graph: (usize, usize),
    /// Chance that an object is replaced by a label outside its cluster.
    pub off_cluster_prob: f64,
    /// Chance that a chain link is dropped.
    pub split_prob: f64,
    /// Chance that a chain link points backwards (`c[i+1] -> c[i]`).
    pub reverse_prob: f64,
    /// Chance of an extra `c[i] -> c[i+2]` link, which closes a triangle.
    pub chord_prob: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// `num_clusters` disjoint clusters of `cluster_size` consecutive labels.
    pub fn disjoint_clusters(num_clusters: usize, cluster_size: usize) -> Vec<Vec<u32>> {
        (0..num_clusters).map(|c| ((c * cluster_size) as u32..((c + 1) * cluster_size) as u32).collect()).collect()
    }
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            num_graphs: 300,
            num_object_labels: 60,
            num_relation_labels: 8,
            clusters: SyntheticSpec::disjoint_clusters(3, 8),
            edge_label_skew: 1.5,
            nodes_per_graph: (7, 8),
            off_cluster_prob: 0.01,
            split_prob: 0.0,
            reverse_prob: 0.1,
            chord_prob: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("cluster {cluster} has {size} labels but graphs need at least {min_nodes}")]
    ClusterTooSmall { cluster: usize, size: usize, min_nodes: usize },
    #[error("cluster {cluster} references label {label} outside 0..{num_labels}")]
    LabelOutOfRange { cluster: usize, label: u32, num_labels: usize },
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
}

fn check(spec: &SyntheticSpec) -> Result<(), SynthError> {
    let (lo, hi) = spec.nodes_per_graph;
    if lo == 0 || lo > hi {
        return Err(SynthError::Invalid(format!("bad node range {lo}..={hi}")));
    }
    if spec.clusters.is_empty() {
        return Err(SynthError::Invalid("no clusters".into()));
    }
    if spec.num_relation_labels == 0 {
        return Err(SynthError::Invalid("no relation labels".into()));
    }
    if !(spec.edge_label_skew >= 0.0) {
        return Err(SynthError::Invalid(format!("skew {} < 0", spec.edge_label_skew)));
    }
    for (name, p) in [
        ("off_cluster_prob", spec.off_cluster_prob),
        ("split_prob", spec.split_prob),
        ("reverse_prob", spec.reverse_prob),
        ("chord_prob", spec.chord_prob),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(SynthError::Invalid(format!("{name} = {p} outside [0, 1]")));
        }
    }
    for (ci, c) in spec.clusters.iter().enumerate() {
        if c.len() < lo {
            return Err(SynthError::ClusterTooSmall { cluster: ci, size: c.len(), min_nodes: lo });
        }
        for &l in c {
            if l as usize >= spec.num_object_labels {
                return Err(SynthError::LabelOutOfRange { cluster: ci, label: l, num_labels: spec.num_object_labels });
            }
        }
    }
    Ok(())
}

pub fn synthetic_vocabulary(num_objects: usize, num_relations: usize) -> Vocabulary {
    Vocabulary::new(
        (0..num_objects).map(|i| format!("obj{i}")).collect(),
        (0..num_relations).map(|i| format!("rel{i}")).collect(),
    )
    .expect("generated labels are unique")
}

/// Normalized relation-label probabilities for a skew exponent.
pub fn relation_weights(num_relations: usize, skew: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..num_relations).map(|r| math::powf((r + 1) as f64, -skew)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

fn draw_index(rng: &mut impl rand::Rng, cumulative: &[f64]) -> usize {
    let u: f64 = rng.gen::<f64>() * cumulative[cumulative.len() - 1];
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<Corpus, SynthError> {
    check(spec)?;
    let vocabulary = synthetic_vocabulary(spec.num_object_labels, spec.num_relation_labels);
    let mut rng = rng_from_seed(spec.seed);
    let mut cumulative = relation_weights(spec.num_relation_labels, spec.edge_label_skew);
    for i in 1..cumulative.len() {
        cumulative[i] += cumulative[i - 1];
    }
    let (lo, hi) = spec.nodes_per_graph;
    let mut graphs = Vec::with_capacity(spec.num_graphs);
    for _ in 0..spec.num_graphs {
        let cluster = &spec.clusters[rng.gen_range(0..spec.clusters.len())];
        let n = rng.gen_range(lo..=hi.min(cluster.len()));
        let offset = rng.gen_range(0..=cluster.len() - n);
        let outside: Vec<u32> = (0..spec.num_object_labels as u32).filter(|l| !cluster.contains(l)).collect();
        let mut b = GraphBuilder::new();
        for (i, &label) in cluster[offset..offset + n].iter().enumerate() {
            let label = if !outside.is_empty() && rng.gen::<f64>() < spec.off_cluster_prob {
                *outside.choose(&mut rng).expect("non-empty")
            } else {
                label
            };
            b.add_node(NodeId(i as u32), ObjectLabel(label)).expect("fresh id");
        }
        for i in 0..n.saturating_sub(1) {
            let keep = rng.gen::<f64>() >= spec.split_prob;
            let reverse = rng.gen::<f64>() < spec.reverse_prob;
            let rel = RelationLabel(draw_index(&mut rng, &cumulative) as u32);
            if keep {
                let (s, d) = if reverse { (i + 1, i) } else { (i, i + 1) };
                b.add_edge(NodeId(s as u32), NodeId(d as u32), rel).expect("valid endpoints");
            }
        }
        if spec.chord_prob > 0.0 {
            for i in 0..n.saturating_sub(2) {
                if rng.gen::<f64>() < spec.chord_prob {
                    let rel = RelationLabel(draw_index(&mut rng, &cumulative) as u32);
                    b.add_edge(NodeId(i as u32), NodeId((i + 2) as u32), rel).expect("valid endpoints");
                }
            }
        }
        graphs.push(b.build());
    }
    Ok(Corpus::new(graphs, vocabulary, Split::Train).expect("labels generated in range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn same_seed_same_corpus() {
        let spec = SyntheticSpec { num_graphs: 40, seed: 11, ..SyntheticSpec::default() };
        let a = generate_synthetic_corpus(&spec).unwrap();
        let b = generate_synthetic_corpus(&spec).unwrap();
        assert_eq!(a.graphs, b.graphs);
        let c = generate_synthetic_corpus(&SyntheticSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a.graphs, c.graphs);
    }

    #[test]
    fn infeasible_cluster_rejected() {
        let spec = SyntheticSpec { clusters: vec![vec![0, 1, 2]], nodes_per_graph: (4, 5), ..SyntheticSpec::default() };
        assert!(matches!(
            generate_synthetic_corpus(&spec),
            Err(SynthError::ClusterTooSmall { size: 3, min_nodes: 4, .. })
        ));
        let spec = SyntheticSpec { edge_label_skew: -1.0, ..SyntheticSpec::default() };
        assert!(generate_synthetic_corpus(&spec).is_err());
    }

    #[test]
    fn relation_weights_are_normalized_and_decreasing() {
        let w = relation_weights(5, 1.2);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[0] > p[1]));
        assert!(relation_weights(4, 0.0).iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }
}
