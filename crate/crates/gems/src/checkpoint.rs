//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `GEMSCKPT`, a little-endian `u32` format version,
//! a little-endian `u64` header length, the JSON header, then every parameter's
//! values as little-endian `f64` in header order.

use gems_core::graph::Vocabulary;
use gems_core::model::{ModelConfig, ModelError, ModelParams};
use gems_core::rng::rng_from_seed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"GEMSCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("truncated checkpoint")]
    Truncated,
    #[error("{0} trailing bytes after the last parameter")]
    TrailingBytes(usize),
    #[error("bad checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint parameter `{name}`: {problem}")]
    Parameter { name: String, problem: String },
    #[error("vocabulary hash mismatch: checkpoint has {checkpoint:016x}, given vocabulary has {given:016x}")]
    VocabularyMismatch { checkpoint: u64, given: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConfigDoc {
    num_objects: usize,
    num_relations: usize,
    k: usize,
    embed_dim: usize,
    hidden: usize,
    node_layers: usize,
    edge_layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ParamDoc {
    name: String,
    rows: usize,
    cols: usize,
    frozen_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    object_labels: Vec<String>,
    relation_labels: Vec<String>,
    vocabulary_hash: String,
    config: ConfigDoc,
    alpha: f64,
    beta: f64,
    params: Vec<ParamDoc>,
}

/// A model together with the vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: ModelParams,
    pub vocabulary: Vocabulary,
}

impl Checkpoint {
    pub fn check_vocabulary(&self, given: &Vocabulary) -> Result<(), CheckpointError> {
        let (checkpoint, given) = (self.vocabulary.fingerprint(), given.fingerprint());
        if checkpoint != given {
            return Err(CheckpointError::VocabularyMismatch { checkpoint, given });
        }
        Ok(())
    }
}

pub fn encode(model: &ModelParams, vocab: &Vocabulary) -> Vec<u8> {
    let c = &model.config;
    let header = Header {
        object_labels: vocab.object_labels().to_vec(),
        relation_labels: vocab.relation_labels().to_vec(),
        vocabulary_hash: format!("{:016x}", vocab.fingerprint()),
        config: ConfigDoc {
            num_objects: c.num_objects,
            num_relations: c.num_relations,
            k: c.k,
            embed_dim: c.embed_dim,
            hidden: c.hidden,
            node_layers: c.node_layers,
            edge_layers: c.edge_layers,
        },
        alpha: model.alpha,
        beta: model.beta,
        params: model
            .store
            .iter()
            .map(|(_, p)| ParamDoc {
                name: p.name.clone(),
                rows: p.rows,
                cols: p.cols,
                frozen_rows: (0..p.rows).filter(|&r| p.is_row_frozen(r)).collect(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header always serializes");
    let mut out = Vec::with_capacity(20 + json.len() + 8 * model.store.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in model.store.iter() {
        for v in &p.value {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if bytes.len() < n {
        return Err(CheckpointError::Truncated);
    }
    let (head, tail) = bytes.split_at(n);
    *bytes = tail;
    Ok(head)
}

pub fn decode(mut bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if take(&mut bytes, 8).map_err(|_| CheckpointError::BadMagic)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let len = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().expect("8 bytes"));
    let len = usize::try_from(len).map_err(|_| CheckpointError::Truncated)?;
    let header: Header =
        serde_json::from_slice(take(&mut bytes, len)?).map_err(|e| CheckpointError::Header(e.to_string()))?;

    let vocabulary = Vocabulary::new(header.object_labels, header.relation_labels)
        .map_err(|e| CheckpointError::Header(e.to_string()))?;
    let hash = format!("{:016x}", vocabulary.fingerprint());
    if hash != header.vocabulary_hash {
        return Err(CheckpointError::Header(format!(
            "stored vocabulary hash {} does not match its labels ({hash})",
            header.vocabulary_hash
        )));
    }
    let c = &header.config;
    let config = ModelConfig {
        num_objects: c.num_objects,
        num_relations: c.num_relations,
        k: c.k,
        embed_dim: c.embed_dim,
        hidden: c.hidden,
        node_layers: c.node_layers,
        edge_layers: c.edge_layers,
    };
    let mut model = ModelParams::new(config, Some(&vocabulary), None, &mut rng_from_seed(0))?;
    model.alpha = header.alpha;
    model.beta = header.beta;
    if header.params.len() != model.store.len() {
        return Err(CheckpointError::Header(format!(
            "{} parameters stored, the architecture has {}",
            header.params.len(),
            model.store.len()
        )));
    }
    for pd in &header.params {
        let bad = |problem: String| CheckpointError::Parameter { name: pd.name.clone(), problem };
        let id = model.store.id_of(&pd.name).ok_or_else(|| bad("not part of the architecture".into()))?;
        let p = model.store.get_mut(id);
        if (p.rows, p.cols) != (pd.rows, pd.cols) {
            return Err(bad(format!("shape {}x{}, expected {}x{}", pd.rows, pd.cols, p.rows, p.cols)));
        }
        let raw = take(&mut bytes, 8 * pd.rows * pd.cols)?;
        for (v, chunk) in p.value.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        p.frozen_rows = Vec::new();
        if !pd.frozen_rows.is_empty() {
            p.frozen_rows = vec![false; p.rows];
            for &r in &pd.frozen_rows {
                *p.frozen_rows.get_mut(r).ok_or_else(|| bad(format!("frozen row {r} out of range")))? = true;
            }
        }
    }
    if !bytes.is_empty() {
        return Err(CheckpointError::TrailingBytes(bytes.len()));
    }
    Ok(Checkpoint { model, vocabulary })
}
