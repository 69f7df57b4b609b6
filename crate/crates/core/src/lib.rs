//! Conditional scene-graph expansion.
//!
//! A scene graph is a set of labelled objects joined by directed, labelled
//! relationships. This crate grows a small seed graph into a larger plausible
//! scene with a hierarchical recurrent model: one recurrent stack emits object
//! labels, a second one emits the relationship pair between the new object and
//! each of its most recent predecessors.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the command
//! line and the HTTP service live in the `gems` companion crate.
//!
//! Module map:
//!
//! - [`graph`]: graph data model, vocabularies, components and degree statistics
//! - [`synth`]: seeded synthetic corpora with clustered objects and skewed relations
//! - [`sequence`]: cluster-aware BFS flattening of graphs into step sequences
//! - [`nn`]: reverse-mode autodiff, stacked GRU cells, Adam
//! - [`model`]: the node/edge model, its losses, training and expansion
//! - [`seed`]: PageRank-weighted seed subgraph extraction
//! - [`metrics`]: MMD descriptors, NSPDK*, co-occurrence and edge metrics, subgraph matching
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod graph;
pub mod math;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod rng;
pub mod seed;
pub mod sequence;
pub mod synth;

pub use graph::{Corpus, Edge, GraphError, Node, NodeId, ObjectLabel, RelationLabel, SceneGraph, Split, Vocabulary};
