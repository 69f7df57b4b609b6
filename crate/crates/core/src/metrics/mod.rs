//! Evaluation of generated graph sets against reference corpora.

mod cooccur;
mod descriptors;
mod edges;
mod iso;
mod nspdk;

pub use cooccur::{obj_k, trip_k, CooccurrenceMatrix, TripleStats};
pub use descriptors::{
    clustering_coefficients, descriptor_histogram, gaussian_kernel, mmd, mmd_with, DescriptorHistogram, DescriptorKind,
};
pub use edges::{mep, triples, zsep, MepScore, TripleSet, ZsepScore};
pub use iso::is_subgraph_isomorphic;
pub use nspdk::{nspdk_features, nspdk_star_mmd, Features};

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::{mean, Corpus, SceneGraph};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric needs a non-empty graph set")]
    EmptySet,
    #[error("K = {k} exceeds the {available} object pairs observed in the reference set")]
    NotEnoughPairs { k: usize, available: usize },
    #[error("K = {k} exceeds the {available} triples observed in the reference set")]
    NotEnoughTriples { k: usize, available: usize },
    #[error("invalid metric configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    /// Gaussian kernel bandwidth.
    pub sigma: f64,
    pub degree_max_bin: usize,
    pub clustering_bins: usize,
    /// Largest node/edge count with its own bin.
    pub count_max_bin: usize,
    pub nspdk_radii: Vec<usize>,
    pub nspdk_distances: Vec<usize>,
    /// K for Obj_K and Trip_K.
    pub k: usize,
    /// The reference set is cut into this many contiguous splits; MMDs are
    /// averaged over them.
    pub splits: usize,
    /// Generated graphs come in consecutive groups of this many expansions
    /// of one seed; diversity is averaged over the groups.
    pub diversity_group: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            sigma: 1.0,
            degree_max_bin: 20,
            clustering_bins: 10,
            count_max_bin: 50,
            nspdk_radii: vec![0, 1],
            nspdk_distances: vec![1, 2, 3],
            k: 20,
            splits: 1,
            diversity_group: 3,
        }
    }
}

impl MetricConfig {
    fn validate(&self) -> Result<(), MetricError> {
        if !(self.sigma > 0.0) {
            return Err(MetricError::Config("sigma must be positive"));
        }
        if self.clustering_bins == 0 || self.splits == 0 || self.diversity_group == 0 || self.k == 0 {
            return Err(MetricError::Config("bins, splits, group size and K must be positive"));
        }
        Ok(())
    }
}

/// Fraction of `gen` that embeds in no training graph.
pub fn novelty(gen: &[SceneGraph], train: &[SceneGraph]) -> Result<f64, MetricError> {
    if gen.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let novel = gen.iter().filter(|g| !train.iter().any(|t| is_subgraph_isomorphic(g, t))).count();
    Ok(novel as f64 / gen.len() as f64)
}

/// Fraction of expansions that embed in none of the other expansions.
pub fn diversity(expansions: &[SceneGraph]) -> Result<f64, MetricError> {
    if expansions.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let kept = (0..expansions.len())
        .filter(|&i| !(0..expansions.len()).any(|j| j != i && is_subgraph_isomorphic(&expansions[i], &expansions[j])))
        .count();
    Ok(kept as f64 / expansions.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub mmd_degree: f64,
    pub mmd_clustering: f64,
    pub mmd_nspdk: f64,
    pub mmd_node_label: f64,
    pub mmd_edge_label: f64,
    pub mmd_node_count: f64,
    pub mmd_edge_count: f64,
    pub nodes_reference: f64,
    pub nodes_predicted: f64,
    pub edges_reference: f64,
    pub edges_predicted: f64,
    pub obj_k: f64,
    pub trip_k: f64,
    pub mep: f64,
    /// MEP of each generated graph, in input order.
    pub mep_per_graph: Vec<f64>,
    /// Generated graphs without edges (scored 0 in `mep`).
    pub mep_edgeless: usize,
    pub zsep: f64,
    pub zsep_no_novel_edges: bool,
    pub novelty: f64,
    pub diversity: f64,
    /// Generated graphs with nothing to count for some histogram.
    pub empty_histograms: usize,
}

fn histograms(
    graphs: &[SceneGraph],
    kind: DescriptorKind,
    cfg: &MetricConfig,
    nv: usize,
    ne: usize,
) -> Vec<DescriptorHistogram> {
    graphs.iter().map(|g| descriptor_histogram(g, kind, cfg, nv, ne)).collect()
}

fn splits(graphs: &[SceneGraph], n: usize) -> Vec<&[SceneGraph]> {
    let n = n.min(graphs.len()).max(1);
    let size = graphs.len().div_ceil(n);
    graphs.chunks(size).collect()
}

/// Mean edge count of the reference graphs that contain `seed`, or `None`
/// when no reference graph does.
pub fn mep_reference_length(seed: &SceneGraph, reference: &[SceneGraph]) -> Option<f64> {
    let hits: Vec<f64> =
        reference.iter().filter(|g| is_subgraph_isomorphic(seed, g)).map(|g| g.num_edges() as f64).collect();
    (!hits.is_empty()).then(|| mean(hits.into_iter()))
}

/// Every metric for `gen` against the `test` reference, with `train`
/// defining what counts as novel.
///
/// When `seeds` is given, `seeds[i]` is the seed `gen[i]` was expanded from
/// and MEP's reference length is [`mep_reference_length`] of that seed over
/// the test set. Otherwise (or when no test graph contains the seed) the
/// reference length equals the generated edge count, i.e. no brevity
/// penalty.
pub fn evaluate_all(
    gen: &[SceneGraph],
    seeds: Option<&[SceneGraph]>,
    train: &Corpus,
    test: &Corpus,
    cfg: &MetricConfig,
) -> Result<MetricReport, MetricError> {
    cfg.validate()?;
    if gen.is_empty() || test.graphs.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let nv = test.vocabulary.num_objects();
    let ne = test.vocabulary.num_relations();
    let parts = splits(&test.graphs, cfg.splits);
    let mut mmds = [0.0f64; 7];
    let kinds = [
        DescriptorKind::Degree,
        DescriptorKind::Clustering,
        DescriptorKind::NodeLabel,
        DescriptorKind::EdgeLabel,
        DescriptorKind::NodeCount,
        DescriptorKind::EdgeCount,
    ];
    let gen_h: Vec<Vec<DescriptorHistogram>> = kinds.iter().map(|&k| histograms(gen, k, cfg, nv, ne)).collect();
    for part in &parts {
        for (i, &k) in kinds.iter().enumerate() {
            mmds[i] += mmd(&gen_h[i], &histograms(part, k, cfg, nv, ne), cfg.sigma)?;
        }
        mmds[6] += nspdk_star_mmd(gen, part, cfg)?;
    }
    for m in &mut mmds {
        *m /= parts.len() as f64;
    }
    let empty_histograms = gen.iter().enumerate().filter(|&(i, _)| gen_h.iter().any(|hs| hs[i].empty)).count();

    let train_t = triples(&train.graphs);
    let test_t = triples(&test.graphs);
    if seeds.is_some_and(|s| s.len() != gen.len()) {
        return Err(MetricError::Config("one seed per generated graph is required"));
    }
    let meps: Vec<MepScore> = gen
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let r = seeds.and_then(|s| mep_reference_length(&s[i], &test.graphs)).unwrap_or(g.num_edges() as f64);
            mep(g, &train_t, &test_t, r)
        })
        .collect();
    let z = zsep(gen, &train_t, &test_t);
    let div = mean(gen.chunks(cfg.diversity_group).map(|c| diversity(c).expect("non-empty chunk")));

    Ok(MetricReport {
        mmd_degree: mmds[0],
        mmd_clustering: mmds[1],
        mmd_node_label: mmds[2],
        mmd_edge_label: mmds[3],
        mmd_node_count: mmds[4],
        mmd_edge_count: mmds[5],
        mmd_nspdk: mmds[6],
        nodes_reference: mean(test.graphs.iter().map(|g| g.num_nodes() as f64)),
        nodes_predicted: mean(gen.iter().map(|g| g.num_nodes() as f64)),
        edges_reference: mean(test.graphs.iter().map(|g| g.num_edges() as f64)),
        edges_predicted: mean(gen.iter().map(|g| g.num_edges() as f64)),
        obj_k: obj_k(&test.graphs, gen, cfg.k)?,
        trip_k: trip_k(&test.graphs, gen, cfg.k)?,
        mep: mean(meps.iter().map(|m| m.value)),
        mep_per_graph: meps.iter().map(|m| m.value).collect(),
        mep_edgeless: meps.iter().filter(|m| m.edgeless).count(),
        zsep: z.value,
        zsep_no_novel_edges: z.no_novel_edges,
        novelty: novelty(gen, &train.graphs)?,
        diversity: div,
        empty_histograms,
    })
}
