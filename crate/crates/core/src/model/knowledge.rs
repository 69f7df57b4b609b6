//! Label similarity from pretrained embeddings.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::math;

/// Label -> vector map with a fixed dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KnowledgeError {
    #[error("no embedding for {} label(s): {}", .0.len(), .0.join(", "))]
    MissingLabels(Vec<String>),
    #[error("embedding for `{label}` has dimension {found}, expected {expected}")]
    Dimension { label: String, expected: usize, found: usize },
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable { dim, vectors: BTreeMap::new() }
    }

    pub fn insert(&mut self, label: impl Into<String>, v: Vec<f64>) -> Result<(), KnowledgeError> {
        let label = label.into();
        if v.len() != self.dim {
            return Err(KnowledgeError::Dimension { label, expected: self.dim, found: v.len() });
        }
        self.vectors.insert(label, v);
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<&[f64]> {
        self.vectors.get(label).map(Vec::as_slice)
    }
}

/// Pairwise object-label similarity `f(v, v')`, row-major `n x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalKnowledge {
    n: usize,
    sim: Vec<f64>,
}

impl ExternalKnowledge {
    /// All-zero similarity: the proxy distribution equals the prediction.
    pub fn none(num_objects: usize) -> Self {
        ExternalKnowledge { n: num_objects, sim: vec![0.0; num_objects * num_objects] }
    }

    pub fn from_matrix(n: usize, sim: Vec<f64>) -> Self {
        assert_eq!(sim.len(), n * n, "similarity matrix must be square");
        ExternalKnowledge { n, sim }
    }

    pub fn num_objects(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.sim[a * self.n + b]
    }

    /// `f(., target)` over all object labels.
    pub fn row(&self, target: usize) -> &[f64] {
        &self.sim[target * self.n..(target + 1) * self.n]
    }

    /// `f(., target)` over the node classes (object labels then EOS). The EOS
    /// class has no embedding: its similarity to everything is 0, and an EOS
    /// target gets an all-zero row.
    pub fn class_row(&self, target: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n + 1];
        if target < self.n {
            out[..self.n].copy_from_slice(self.row(target));
        }
        out
    }
}

/// Cosine similarity between the embeddings of `labels`. Zero vectors are
/// dissimilar to everything except themselves.
pub fn similarity_matrix(labels: &[String], table: &EmbeddingTable) -> Result<ExternalKnowledge, KnowledgeError> {
    let (ek, missing) = partial_similarity_matrix(labels, table);
    if !missing.is_empty() {
        return Err(KnowledgeError::MissingLabels(missing));
    }
    Ok(ek)
}

/// Like [`similarity_matrix`], but labels without an embedding are only
/// similar to themselves. Returns those labels alongside the matrix.
pub fn partial_similarity_matrix(labels: &[String], table: &EmbeddingTable) -> (ExternalKnowledge, Vec<String>) {
    let missing: Vec<String> = labels.iter().filter(|l| table.get(l).is_none()).cloned().collect();
    let vecs: Vec<Option<&[f64]>> = labels.iter().map(|l| table.get(l)).collect();
    let norms: Vec<f64> = vecs.iter().map(|v| v.map_or(0.0, |v| math::sqrt(v.iter().map(|x| x * x).sum()))).collect();
    let n = labels.len();
    let mut sim = vec![0.0; n * n];
    for i in 0..n {
        sim[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let s = match (vecs[i], vecs[j]) {
                (Some(a), Some(b)) if norms[i] > 0.0 && norms[j] > 0.0 => {
                    let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    (d / (norms[i] * norms[j])).clamp(-1.0, 1.0)
                }
                _ => 0.0,
            };
            sim[i * n + j] = s;
            sim[j * n + i] = s;
        }
    }
    (ExternalKnowledge { n, sim }, missing)
}
