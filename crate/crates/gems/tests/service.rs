use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};

use gems::checkpoint::Checkpoint;
use gems::format::GraphDoc;
use gems::service::{
    handle_expand, handle_seed_extract, handle_vocab, serve, AppState, ErrorBody, ExpandResponse, SeedExtractResponse,
    VocabResponse,
};
use gems_core::graph::{SceneGraph, Vocabulary};
use gems_core::metrics::is_subgraph_isomorphic;
use gems_core::model::{ModelConfig, ModelParams};
use gems_core::rng::rng_from_seed;
use serde_json::json;

fn vocab() -> Vocabulary {
    Vocabulary::new(
        vec!["man".into(), "horse".into(), "hat".into(), "saddle".into(), "field".into()],
        vec!["on".into(), "wearing".into(), "near".into()],
    )
    .unwrap()
}

fn state(train: Option<Vec<SceneGraph>>) -> AppState {
    let v = vocab();
    let cfg = ModelConfig { embed_dim: 4, hidden: 8, node_layers: 1, edge_layers: 1, ..ModelConfig::new(5, 3, 2) };
    let model = ModelParams::new(cfg, Some(&v), None, &mut rng_from_seed(11)).unwrap();
    AppState::new(Checkpoint { model, vocabulary: v }, train)
}

fn seed_doc() -> serde_json::Value {
    json!({
        "nodes": [{"id": 3, "label": "man"}, {"id": 8, "label": "horse"}],
        "edges": [{"src": 3, "dst": 8, "label": "on"}]
    })
}

fn graph(doc: &serde_json::Value) -> SceneGraph {
    serde_json::from_value::<GraphDoc>(doc.clone()).unwrap().to_graph(&vocab(), false).unwrap()
}

fn error_text(body: &str) -> String {
    serde_json::from_str::<ErrorBody>(body).unwrap().error
}

#[test]
fn expansions_contain_the_seed() {
    let s = state(None);
    let req = json!({"seed_graph": seed_doc(), "num_samples": 3, "max_new_nodes": 5, "rng_seed": 4});
    let (status, body) = handle_expand(&s, req.to_string().as_bytes());
    assert_eq!(status, 200, "{body}");
    let resp: ExpandResponse = serde_json::from_str(&body).unwrap();
    assert_eq!(resp.expansions.len(), 3);
    let seed = graph(&seed_doc());
    for e in &resp.expansions {
        let g = e.graph.to_graph(&vocab(), false).unwrap();
        assert!(is_subgraph_isomorphic(&seed, &g));
        assert!(seed.nodes().iter().all(|n| g.label_of(n.id) == Some(n.label)));
        assert!(g.num_nodes() <= 7);
        assert_eq!(e.novel, None);
    }
}

#[test]
fn identical_requests_give_identical_bytes() {
    let s = state(None);
    let req = json!({"seed_graph": seed_doc(), "num_samples": 4, "rng_seed": 17}).to_string();
    let a = handle_expand(&s, req.as_bytes());
    assert_eq!(a.0, 200);
    assert_eq!(a, handle_expand(&s, req.as_bytes()));
    let other = json!({"seed_graph": seed_doc(), "num_samples": 4, "rng_seed": 18}).to_string();
    assert_eq!(handle_expand(&s, other.as_bytes()).0, 200);
}

#[test]
fn novelty_is_reported_against_the_training_corpus() {
    let seed = graph(&seed_doc());
    let s = state(Some(vec![seed]));
    let req = json!({"seed_graph": seed_doc(), "max_new_nodes": 0});
    let resp: ExpandResponse = serde_json::from_str(&handle_expand(&s, req.to_string().as_bytes()).1).unwrap();
    assert_eq!(resp.expansions[0].novel, Some(false));
}

#[test]
fn bad_requests_are_rejected_with_a_reason() {
    let s = state(None);
    let mut doc = seed_doc();
    doc["nodes"][1]["label"] = json!("unicorn");
    let (status, body) = handle_expand(&s, json!({"seed_graph": doc}).to_string().as_bytes());
    assert_eq!(status, 400);
    assert!(error_text(&body).contains("unicorn"));
    for req in [
        json!({"seed_graph": seed_doc(), "num_samples": 0}),
        json!({"seed_graph": seed_doc(), "num_samples": 17}),
        json!({"seed_graph": seed_doc(), "max_new_nodes": 101}),
        json!({"seed_graph": seed_doc(), "temperature": 0.0}),
        json!({"seed_graph": seed_doc(), "surprise": 1}),
        json!({"num_samples": 1}),
    ] {
        assert_eq!(handle_expand(&s, req.to_string().as_bytes()).0, 400, "{req}");
    }
    assert_eq!(handle_expand(&s, b"{not json").0, 400);
    let mut self_loop = seed_doc();
    self_loop["edges"][0]["dst"] = json!(3);
    assert_eq!(handle_expand(&s, json!({"seed_graph": self_loop}).to_string().as_bytes()).0, 400);
}

#[test]
fn mismatched_vocabulary_hash_is_unprocessable() {
    let s = state(None);
    let req = json!({"seed_graph": seed_doc(), "vocabulary_hash": "0000000000000000"});
    let (status, body) = handle_expand(&s, req.to_string().as_bytes());
    assert_eq!(status, 422);
    assert!(error_text(&body).contains("0000000000000000"));
    let hash: VocabResponse = serde_json::from_str(&handle_vocab(&s).1).unwrap();
    let req = json!({"seed_graph": seed_doc(), "vocabulary_hash": hash.vocabulary_hash});
    assert_eq!(handle_expand(&s, req.to_string().as_bytes()).0, 200);
}

#[test]
fn vocabulary_is_sorted_and_stable() {
    let s = state(None);
    let (status, body) = handle_vocab(&s);
    assert_eq!(status, 200);
    assert_eq!(body, handle_vocab(&s).1);
    let v: VocabResponse = serde_json::from_str(&body).unwrap();
    assert_eq!(v.object_labels, ["field", "hat", "horse", "man", "saddle"]);
    assert_eq!(v.relation_labels, ["near", "on", "wearing"]);
    assert_eq!(v.vocabulary_hash, format!("{:016x}", vocab().fingerprint()));
}

#[test]
fn seed_extraction_returns_connected_subgraphs() {
    let s = state(None);
    let single = json!({"graph": {"nodes": [{"id": 0, "label": "field"}], "edges": []}});
    let (status, body) = handle_seed_extract(&s, single.to_string().as_bytes());
    assert_eq!(status, 200, "{body}");
    let resp: SeedExtractResponse = serde_json::from_str(&body).unwrap();
    assert_eq!(resp.seeds.len(), 1);
    assert_eq!(resp.seeds[0].to_graph(&vocab(), false).unwrap(), graph(&single["graph"]));

    let big = json!({"graph": {
        "nodes": [{"id": 1, "label": "man"}, {"id": 2, "label": "hat"}, {"id": 3, "label": "horse"},
                  {"id": 4, "label": "saddle"}, {"id": 9, "label": "field"}],
        "edges": [{"src": 1, "dst": 2, "label": "wearing"}, {"src": 1, "dst": 3, "label": "on"},
                  {"src": 4, "dst": 3, "label": "on"}]
    }, "max_nodes": 2, "rng_seed": 5});
    let (status, body) = handle_seed_extract(&s, big.to_string().as_bytes());
    assert_eq!(status, 200);
    assert_eq!(body, handle_seed_extract(&s, big.to_string().as_bytes()).1);
    let full = graph(&big["graph"]);
    let resp: SeedExtractResponse = serde_json::from_str(&body).unwrap();
    assert_eq!(resp.seeds.len(), 2);
    for d in &resp.seeds {
        let seed = d.to_graph(&vocab(), false).unwrap();
        let ids: Vec<_> = seed.nodes().iter().map(|n| n.id).collect();
        assert!(!ids.is_empty() && ids.len() <= 2);
        assert_eq!(full.induced(&ids), seed);
    }
    assert_eq!(handle_seed_extract(&s, br#"{"graph": {"nodes": [{"id": 0, "label": "cat"}], "edges": []}}"#).0, 400);
}

fn http(addr: std::net::SocketAddr, request: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    stream.write_all(request.as_bytes()).unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let status = raw.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = raw.split_once("\r\n\r\n").map(|(_, b)| b.to_owned()).unwrap_or_default();
    (status, body)
}

fn post(addr: std::net::SocketAddr, path: &str, body: &str) -> (u16, String) {
    http(
        addr,
        &format!(
            "POST {path} HTTP/1.1\r\nHost: x\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        ),
    )
}

#[test]
fn http_server_answers_every_route() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let direct = state(None);
    std::thread::spawn(move || serve(listener, state(None)));

    let (status, body) = http(addr, "GET /api/vocab HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n");
    assert_eq!((status, body), handle_vocab(&direct));

    let req = json!({"seed_graph": seed_doc(), "num_samples": 2, "rng_seed": 3}).to_string();
    assert_eq!(post(addr, "/api/expand", &req), handle_expand(&direct, req.as_bytes()));
    assert_eq!(post(addr, "/api/expand", "{").0, 400);

    let req = json!({"graph": seed_doc()}).to_string();
    assert_eq!(post(addr, "/api/seed-extract", &req), handle_seed_extract(&direct, req.as_bytes()));

    assert_eq!(http(addr, "GET /api/nothing HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").0, 404);
}
