//! HTTP facade: expansion, seed extraction and the vocabulary.
//!
//! The handlers are plain functions from a request body to a status code and
//! a JSON body; [`router`] wires them into axum.

use std::io;
use std::net::TcpListener;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use gems_core::graph::SceneGraph;
use gems_core::metrics::is_subgraph_isomorphic;
use gems_core::model::{expand, ExpandOptions};
use gems_core::rng::derived_rng;
use gems_core::seed::{extract_seeds, PageRankConfig, SeedExtractConfig};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::format::GraphDoc;

pub const MAX_SAMPLES: usize = 16;
pub const MAX_NEW_NODES: usize = 100;

/// Everything a request may read. Never mutated after startup.
pub struct AppState {
    pub checkpoint: Checkpoint,
    /// Reference set for the per-expansion novelty flag.
    pub train: Option<Vec<SceneGraph>>,
    pub seed_config: SeedExtractConfig,
    pub pagerank: PageRankConfig,
}

impl AppState {
    pub fn new(checkpoint: Checkpoint, train: Option<Vec<SceneGraph>>) -> Self {
        AppState { checkpoint, train, seed_config: SeedExtractConfig::default(), pagerank: PageRankConfig::default() }
    }

    fn hash(&self) -> String {
        format!("{:016x}", self.checkpoint.vocabulary.fingerprint())
    }
}

fn default_samples() -> usize {
    1
}
fn default_new_nodes() -> usize {
    20
}
fn default_temperature() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandRequest {
    pub seed_graph: GraphDoc,
    #[serde(default = "default_samples")]
    pub num_samples: usize,
    #[serde(default = "default_new_nodes")]
    pub max_new_nodes: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// When given, must equal the served model's vocabulary hash.
    #[serde(default)]
    pub vocabulary_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub graph: GraphDoc,
    /// `None` when no training corpus is loaded.
    pub novel: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandResponse {
    pub expansions: Vec<Expansion>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedExtractRequest {
    pub graph: GraphDoc,
    #[serde(default)]
    pub per_component: Option<usize>,
    #[serde(default)]
    pub max_nodes: Option<usize>,
    #[serde(default)]
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedExtractResponse {
    pub seeds: Vec<GraphDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabResponse {
    pub object_labels: Vec<String>,
    pub relation_labels: Vec<String>,
    pub vocabulary_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

fn error(status: u16, message: impl Into<String>) -> (u16, String) {
    let body = ErrorBody { error: message.into() };
    (status, serde_json::to_string(&body).expect("serializable"))
}

fn ok<T: Serialize>(body: &T) -> (u16, String) {
    (200, serde_json::to_string(body).expect("serializable"))
}

pub fn handle_expand(state: &AppState, body: &[u8]) -> (u16, String) {
    let req: ExpandRequest = match serde_json::from_slice(body) {
        Ok(r) => r,
        Err(e) => return error(400, format!("bad request: {e}")),
    };
    if let Some(h) = &req.vocabulary_hash {
        if !h.eq_ignore_ascii_case(&state.hash()) {
            return error(422, format!("vocabulary hash {h} does not match the served model ({})", state.hash()));
        }
    }
    if !(1..=MAX_SAMPLES).contains(&req.num_samples) {
        return error(400, format!("num_samples must lie in [1, {MAX_SAMPLES}]"));
    }
    if req.max_new_nodes > MAX_NEW_NODES {
        return error(400, format!("max_new_nodes must be at most {MAX_NEW_NODES}"));
    }
    if !(req.temperature > 0.0 && req.temperature.is_finite()) {
        return error(400, "temperature must be positive");
    }
    let vocab = &state.checkpoint.vocabulary;
    let seed = match req.seed_graph.to_graph(vocab, false) {
        Ok(g) => g,
        Err(e) => return error(400, e.to_string()),
    };
    let opt = ExpandOptions {
        num_samples: req.num_samples,
        max_new_nodes: req.max_new_nodes,
        temperature: req.temperature,
        seed: req.rng_seed,
    };
    let graphs = match expand(&state.checkpoint.model, &seed, &opt) {
        Ok(g) => g,
        Err(e) => return error(500, e.to_string()),
    };
    let mut expansions = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let graph = match GraphDoc::from_graph(g, vocab) {
            Ok(d) => d,
            Err(e) => return error(500, e.to_string()),
        };
        let novel = state.train.as_ref().map(|t| !t.iter().any(|x| is_subgraph_isomorphic(g, x)));
        expansions.push(Expansion { graph, novel });
    }
    ok(&ExpandResponse { expansions })
}

pub fn handle_vocab(state: &AppState) -> (u16, String) {
    let v = &state.checkpoint.vocabulary;
    let mut object_labels = v.object_labels().to_vec();
    let mut relation_labels = v.relation_labels().to_vec();
    object_labels.sort();
    relation_labels.sort();
    ok(&VocabResponse { object_labels, relation_labels, vocabulary_hash: state.hash() })
}

pub fn handle_seed_extract(state: &AppState, body: &[u8]) -> (u16, String) {
    let req: SeedExtractRequest = match serde_json::from_slice(body) {
        Ok(r) => r,
        Err(e) => return error(400, format!("bad request: {e}")),
    };
    let vocab = &state.checkpoint.vocabulary;
    let g = match req.graph.to_graph(vocab, false) {
        Ok(g) => g,
        Err(e) => return error(400, e.to_string()),
    };
    let cfg = SeedExtractConfig {
        per_component: req.per_component.unwrap_or(state.seed_config.per_component),
        max_nodes: req.max_nodes.unwrap_or(state.seed_config.max_nodes),
    };
    let mut rng = derived_rng(req.rng_seed, "seed-extract", 0);
    let seeds = match extract_seeds(&g, &cfg, &state.pagerank, &mut rng) {
        Ok(s) => s,
        Err(e) => return error(400, e.to_string()),
    };
    let seeds =
        seeds.iter().map(|s| GraphDoc::from_graph(s, vocab).expect("seed labels come from the request")).collect();
    ok(&SeedExtractResponse { seeds })
}

fn respond((status, body): (u16, String)) -> Response {
    let status = StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

async fn blocking(f: impl FnOnce() -> (u16, String) + Send + 'static) -> Response {
    respond(tokio::task::spawn_blocking(f).await.unwrap_or_else(|_| error(500, "internal failure")))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route(
            "/api/expand",
            post(|State(s): State<Arc<AppState>>, body: Bytes| blocking(move || handle_expand(&s, &body))),
        )
        .route("/api/vocab", get(|State(s): State<Arc<AppState>>| async move { respond(handle_vocab(&s)) }))
        .route(
            "/api/seed-extract",
            post(|State(s): State<Arc<AppState>>, body: Bytes| blocking(move || handle_seed_extract(&s, &body))),
        )
        .with_state(state)
}

/// Serves until the process is stopped.
pub fn serve(listener: TcpListener, state: AppState) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        axum::serve(listener, router(Arc::new(state))).await
    })
}
