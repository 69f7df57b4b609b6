//! Hierarchical node/edge model.
//!
//! `f_node` is a GRU stack over the step sequence that emits a distribution
//! over object classes plus EOS. For every new node, `f_node2edge` maps the
//! top `f_node` state to an initial `f_edge` state, and `f_edge` then emits the
//! relation (or `NO_EDGE`) from the new node to each predecessor in the window
//! and back, one ordered pair at a time.

mod expand;
mod forward;
mod knowledge;
mod loss;
mod train;

pub use expand::{expand, expand_one, ExpandOptions};
pub use forward::{score_sequence, sequence_log_likelihood, EdgeOutput, NodeOutput, SequenceScore};
pub use knowledge::{partial_similarity_matrix, similarity_matrix, EmbeddingTable, ExternalKnowledge, KnowledgeError};
pub use loss::{class_balance_weight, compute_q, cross_entropy, edge_loss, node_loss, EdgeClassStats, EdgeWeighting};
pub use train::{corpus_loss, edge_class_stats, train, TrainConfig, TrainReport};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::graph::{GraphError, Vocabulary};
use crate::nn::{GruStack, NnError, ParamId, ParamStore};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("object label {0} outside the model vocabulary")]
    UnknownObject(u32),
    #[error("relation label {0} outside the model vocabulary")]
    UnknownRelation(u32),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("non-finite loss at epoch {epoch}, graph {graph}")]
    NonFiniteLoss { epoch: usize, graph: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub num_objects: usize,
    pub num_relations: usize,
    /// Window of predecessors each new node is paired with.
    pub k: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub node_layers: usize,
    pub edge_layers: usize,
}

impl ModelConfig {
    pub fn new(num_objects: usize, num_relations: usize, k: usize) -> Self {
        ModelConfig { num_objects, num_relations, k, embed_dim: 64, hidden: 128, node_layers: 4, edge_layers: 4 }
    }

    /// Node classes: every object label plus EOS.
    pub fn node_classes(&self) -> usize {
        self.num_objects + 1
    }

    /// Relation classes: every relation label plus NO_EDGE.
    pub fn edge_classes(&self) -> usize {
        self.num_relations + 1
    }

    pub fn eos(&self) -> usize {
        self.num_objects
    }

    pub fn sos(&self) -> usize {
        self.num_objects + 1
    }

    pub fn no_edge(&self) -> usize {
        self.num_relations
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.into()));
        if self.num_objects == 0 {
            return bad("vocabulary has no object labels");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.embed_dim == 0 || self.hidden == 0 {
            return bad("embedding and hidden sizes must be positive");
        }
        if self.node_layers == 0 || self.edge_layers == 0 {
            return bad("GRU stacks need at least one layer");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Node-loss mixing weight used for training.
    pub alpha: f64,
    /// Class-balance factor used for training.
    pub beta: f64,
    pub store: ParamStore,
    /// Rows: object labels, EOS, SOS.
    pub node_emb: ParamId,
    /// Rows: relation labels, NO_EDGE.
    pub rel_emb: ParamId,
    pub node_rnn: GruStack,
    pub node_out_w: ParamId,
    pub node_out_b: ParamId,
    pub edge_rnn: GruStack,
    pub edge_out_w: ParamId,
    pub edge_out_b: ParamId,
    pub n2e_hidden_w: ParamId,
    pub n2e_hidden_b: ParamId,
    /// One output map per `f_edge` layer.
    pub n2e_out: Vec<(ParamId, ParamId)>,
}

impl ModelParams {
    /// Fresh model with every parameter uniform in `[-1/sqrt(H), 1/sqrt(H)]`.
    ///
    /// When `embeddings` is given, its dimension must equal `embed_dim`;
    /// labels found in it get their vector copied into the embedding tables
    /// and frozen.
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        vocab: Option<&Vocabulary>,
        embeddings: Option<&EmbeddingTable>,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        if let Some(v) = vocab {
            if v.num_objects() != config.num_objects || v.num_relations() != config.num_relations {
                return Err(ModelError::Config("vocabulary size differs from the model config".into()));
            }
        }
        let d = config.embed_dim;
        let h = config.hidden;
        let s = 1.0 / crate::math::sqrt(h as f64);
        let mut store = ParamStore::new();
        let node_emb = store.add_uniform("node_emb", config.num_objects + 2, d, s, rng);
        let rel_emb = store.add_uniform("rel_emb", config.num_relations + 1, d, s, rng);
        let node_rnn = GruStack::new(&mut store, "f_node", d + 2 * config.k * d, h, config.node_layers, rng);
        let node_out_w = store.add_uniform("f_node.out_w", config.node_classes(), h, s, rng);
        let node_out_b = store.add_uniform("f_node.out_b", config.node_classes(), 1, s, rng);
        let edge_rnn = GruStack::new(&mut store, "f_edge", 3 * d, h, config.edge_layers, rng);
        let edge_out_w = store.add_uniform("f_edge.out_w", config.edge_classes(), h, s, rng);
        let edge_out_b = store.add_uniform("f_edge.out_b", config.edge_classes(), 1, s, rng);
        let n2e_hidden_w = store.add_uniform("f_node2edge.hidden_w", h, h, s, rng);
        let n2e_hidden_b = store.add_uniform("f_node2edge.hidden_b", h, 1, s, rng);
        let n2e_out = (0..config.edge_layers)
            .map(|l| {
                (
                    store.add_uniform(format!("f_node2edge.out{l}_w"), h, h, s, rng),
                    store.add_uniform(format!("f_node2edge.out{l}_b"), h, 1, s, rng),
                )
            })
            .collect();
        let mut m = ModelParams {
            config,
            alpha: 0.2,
            beta: 0.9999,
            store,
            node_emb,
            rel_emb,
            node_rnn,
            node_out_w,
            node_out_b,
            edge_rnn,
            edge_out_w,
            edge_out_b,
            n2e_hidden_w,
            n2e_hidden_b,
            n2e_out,
        };
        if let (Some(table), Some(v)) = (embeddings, vocab) {
            m.load_pretrained(v, table)?;
        }
        Ok(m)
    }

    fn load_pretrained(&mut self, vocab: &Vocabulary, table: &EmbeddingTable) -> Result<(), ModelError> {
        if table.dim != self.config.embed_dim {
            return Err(ModelError::Config(format!(
                "embedding file has dimension {}, model uses {}",
                table.dim, self.config.embed_dim
            )));
        }
        let d = self.config.embed_dim;
        let fill = |p: &mut crate::nn::Param, labels: &[String]| {
            p.frozen_rows = alloc::vec![false; p.rows];
            for (row, label) in labels.iter().enumerate() {
                if let Some(v) = table.get(label) {
                    p.value[row * d..(row + 1) * d].copy_from_slice(v);
                    p.frozen_rows[row] = true;
                }
            }
            if !p.frozen_rows.contains(&true) {
                p.frozen_rows.clear();
            }
        };
        fill(self.store.get_mut(self.node_emb), vocab.object_labels());
        fill(self.store.get_mut(self.rel_emb), vocab.relation_labels());
        Ok(())
    }

    /// Sets every parameter to zero (all predicted distributions uniform).
    pub fn zero_all(&mut self) {
        let ids: Vec<ParamId> = self.store.iter().map(|(id, _)| id).collect();
        for id in ids {
            self.store.get_mut(id).value.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}
