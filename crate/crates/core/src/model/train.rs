use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::forward::score_sequence;
use super::{EdgeClassStats, EdgeWeighting, ExternalKnowledge, ModelError, ModelParams};
use crate::graph::{Corpus, SceneGraph};
use crate::nn::{AdamConfig, AdamState, Gradients, Tape};
use crate::rng::derived_rng;
use crate::sequence::cluster_aware_bfs;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Class-balanced edge loss; `false` weighs every edge class 1.
    pub class_balanced: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            alpha: 0.2,
            beta: 0.9999,
            class_balanced: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn weighting(&self, stats: EdgeClassStats) -> EdgeWeighting {
        if self.class_balanced {
            EdgeWeighting::ClassBalanced { stats, beta: self.beta }
        } else {
            EdgeWeighting::Uniform
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-graph loss of the untrained model.
    pub initial_loss: f64,
    /// Mean per-graph loss seen during each epoch.
    pub loss_curve: Vec<f64>,
    pub edge_stats: EdgeClassStats,
}

/// Relation-class counts (`NO_EDGE` included) over one seeded sequencing of
/// `graphs` with window `k`.
pub fn edge_class_stats(graphs: &[SceneGraph], k: usize, num_relations: usize, seed: u64) -> EdgeClassStats {
    let mut stats = EdgeClassStats::new(num_relations + 1);
    let mut rng = derived_rng(seed, "edge-stats", 0);
    for g in graphs {
        for step in cluster_aware_bfs(g, k, &mut rng).steps {
            for pair in step.edges {
                for r in [pair.forward, pair.backward] {
                    stats.record(r.map_or(num_relations, |l| l.index()));
                }
            }
        }
    }
    stats
}

/// Mean per-graph loss under one seeded sequencing.
pub fn corpus_loss(
    m: &ModelParams,
    graphs: &[SceneGraph],
    ek: &ExternalKnowledge,
    weighting: &EdgeWeighting,
    seed: u64,
) -> Result<f64, ModelError> {
    if graphs.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let w = weighting.weights(m.config.edge_classes());
    let mut rng = derived_rng(seed, "corpus-loss", 0);
    let mut total = 0.0;
    for g in graphs {
        let s = cluster_aware_bfs(g, m.config.k, &mut rng);
        let mut tape = Tape::new(&m.store);
        let sc = score_sequence(m, &mut tape, &s, ek, &w)?;
        total += tape.scalar(sc.loss);
    }
    Ok(total / graphs.len() as f64)
}

/// Teacher-forced minibatch training with Adam. Each epoch reshuffles the
/// graphs and draws a fresh cluster-aware BFS ordering for every graph.
pub fn train(
    m: &mut ModelParams,
    corpus: &Corpus,
    ek: &ExternalKnowledge,
    cfg: &TrainConfig,
) -> Result<TrainReport, ModelError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    if corpus.vocabulary.num_objects() != m.config.num_objects
        || corpus.vocabulary.num_relations() != m.config.num_relations
    {
        return Err(ModelError::Config("corpus vocabulary differs from the model".into()));
    }
    m.alpha = cfg.alpha;
    m.beta = cfg.beta;
    let k = m.config.k;
    let stats = edge_class_stats(&corpus.graphs, k, m.config.num_relations, cfg.seed);
    let weighting = cfg.weighting(stats.clone());
    let weights = weighting.weights(m.config.edge_classes());
    let initial_loss = corpus_loss(m, &corpus.graphs, ek, &weighting, cfg.seed)?;

    let mut adam = AdamState::new(&m.store, AdamConfig { lr: cfg.learning_rate, ..AdamConfig::default() });
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = derived_rng(cfg.seed, "epoch", epoch as u64);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::zeros_like(&m.store);
            for &gi in batch {
                let s = cluster_aware_bfs(&corpus.graphs[gi], k, &mut rng);
                let mut tape = Tape::new(&m.store);
                let sc = score_sequence(m, &mut tape, &s, ek, &weights)?;
                let loss = tape.scalar(sc.loss);
                if !loss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch, graph: gi });
                }
                epoch_loss += loss;
                grads.add_assign(&tape.backward(sc.loss)?);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.step(&mut m.store, &grads)?;
        }
        curve.push(epoch_loss / corpus.len() as f64);
    }
    Ok(TrainReport { initial_loss, loss_curve: curve, edge_stats: stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::small_model;
    use crate::synth::{generate_synthetic_corpus, SyntheticSpec};

    fn tiny_corpus() -> Corpus {
        let spec = SyntheticSpec {
            num_graphs: 6,
            num_object_labels: 6,
            num_relation_labels: 3,
            clusters: SyntheticSpec::disjoint_clusters(2, 3),
            nodes_per_graph: (2, 3),
            ..SyntheticSpec::default()
        };
        generate_synthetic_corpus(&spec).unwrap()
    }

    #[test]
    fn zero_epochs_leaves_parameters() {
        let c = tiny_corpus();
        let mut m = small_model(6, 3, 2, 1);
        let before = m.store.clone();
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let r = train(&mut m, &c, &ExternalKnowledge::none(6), &cfg).unwrap();
        assert!(r.loss_curve.is_empty());
        assert_eq!(m.store, before);
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let c = tiny_corpus();
        let cfg = TrainConfig { epochs: 3, batch_size: 4, learning_rate: 1e-2, ..TrainConfig::default() };
        let run = || {
            let mut m = small_model(6, 3, 2, 1);
            let r = train(&mut m, &c, &ExternalKnowledge::none(6), &cfg).unwrap();
            (m.store, r.loss_curve)
        };
        let (a, ca) = run();
        let (b, cb) = run();
        assert_eq!(ca, cb);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_config_and_empty_corpus() {
        let c = tiny_corpus();
        let mut m = small_model(6, 3, 2, 1);
        let cfg = TrainConfig { alpha: 1.5, ..TrainConfig::default() };
        assert!(matches!(train(&mut m, &c, &ExternalKnowledge::none(6), &cfg), Err(ModelError::Config(_))));
        let empty = Corpus { graphs: Vec::new(), ..c };
        assert!(matches!(
            train(&mut m, &empty, &ExternalKnowledge::none(6), &TrainConfig::default()),
            Err(ModelError::EmptyCorpus)
        ));
    }
}
