//! Text formats: graph JSON, corpus JSONL, vocabulary files and embedding
//! tables.

use std::collections::BTreeMap;

use gems_core::graph::{Edge, GraphError, Node, NodeId, SceneGraph, Vocabulary};
use gems_core::model::EmbeddingTable;
use gems_core::{Corpus, Split};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed graph JSON: {0}")]
    Malformed(String),
    #[error("unknown object label `{0}`")]
    UnknownObjectLabel(String),
    #[error("unknown relation label `{0}`")]
    UnknownRelationLabel(String),
    #[error("self-loop on node {0}")]
    SelfLoop(u32),
    #[error("duplicate directed edge {src} -> {dst}")]
    DuplicateEdge { src: u32, dst: u32 },
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("edge endpoint {0} is not a node of the graph")]
    MissingEndpoint(u32),
    #[error("label index {0} outside the vocabulary")]
    LabelOutOfRange(u32),
    #[error("bad vocabulary file: {0}")]
    Vocabulary(String),
    #[error("bad embedding file, line {line}: {message}")]
    Embedding { line: usize, message: String },
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: Box<FormatError>,
    },
}

impl FormatError {
    /// The innermost error, past any line annotations.
    pub fn root(&self) -> &FormatError {
        match self {
            FormatError::Line { source, .. } => source.root(),
            e => e,
        }
    }

    fn at_line(self, line: usize) -> Self {
        FormatError::Line { line, source: Box::new(self) }
    }
}

impl From<GraphError> for FormatError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::DuplicateNode(id) => FormatError::DuplicateNode(id.0),
            GraphError::MissingEndpoint(id) => FormatError::MissingEndpoint(id.0),
            GraphError::SelfLoop(id) => FormatError::SelfLoop(id.0),
            GraphError::DuplicateEdge { src, dst } => FormatError::DuplicateEdge { src: src.0, dst: dst.0 },
            GraphError::UnknownObjectLabel(l) => FormatError::UnknownObjectLabel(l),
            GraphError::UnknownRelationLabel(l) => FormatError::UnknownRelationLabel(l),
            GraphError::ObjectIndexOutOfRange(i) | GraphError::RelationIndexOutOfRange(i) => {
                FormatError::LabelOutOfRange(i)
            }
            other => FormatError::Vocabulary(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: u32,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub src: u32,
    pub dst: u32,
    pub label: String,
}

/// Wire form of a graph, labels spelled out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
}

impl GraphDoc {
    pub fn from_graph(g: &SceneGraph, vocab: &Vocabulary) -> Result<Self, FormatError> {
        let nodes = g
            .nodes()
            .iter()
            .map(|n| {
                let label = vocab.object_name(n.label).ok_or(FormatError::LabelOutOfRange(n.label.0))?;
                Ok(NodeDoc { id: n.id.0, label: label.to_owned() })
            })
            .collect::<Result<_, FormatError>>()?;
        let edges = g
            .edges()
            .iter()
            .map(|e| {
                let label = vocab.relation_name(e.label).ok_or(FormatError::LabelOutOfRange(e.label.0))?;
                Ok(EdgeDoc { src: e.src.0, dst: e.dst.0, label: label.to_owned() })
            })
            .collect::<Result<_, FormatError>>()?;
        Ok(GraphDoc { nodes, edges })
    }

    /// Validates against `vocab`. Duplicate edges are rejected unless
    /// `collapse_duplicates` is set, in which case the first one wins.
    pub fn to_graph(&self, vocab: &Vocabulary, collapse_duplicates: bool) -> Result<SceneGraph, FormatError> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            nodes.push(Node { id: NodeId(n.id), label: vocab.object(&n.label)? });
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut seen = BTreeMap::new();
        for e in &self.edges {
            let label = vocab.relation(&e.label)?;
            if collapse_duplicates && e.src != e.dst && seen.insert((e.src, e.dst), ()).is_some() {
                continue;
            }
            edges.push(Edge { src: NodeId(e.src), dst: NodeId(e.dst), label });
        }
        Ok(SceneGraph::new(nodes, edges)?)
    }
}

pub fn parse_graph(json: &str, vocab: &Vocabulary) -> Result<SceneGraph, FormatError> {
    let doc: GraphDoc = serde_json::from_str(json).map_err(|e| FormatError::Malformed(e.to_string()))?;
    doc.to_graph(vocab, false)
}

/// Canonical compact JSON: nodes by id, edges by `(src, dst)`.
pub fn serialize_graph(g: &SceneGraph, vocab: &Vocabulary) -> Result<String, FormatError> {
    let doc = GraphDoc::from_graph(g, vocab)?;
    Ok(serde_json::to_string(&doc).expect("graph documents always serialize"))
}

/// One graph per non-blank line. Duplicate edges within a graph collapse to
/// the first when `collapse_duplicates` is set.
pub fn parse_graphs_jsonl(
    text: &str,
    vocab: &Vocabulary,
    collapse_duplicates: bool,
) -> Result<Vec<SceneGraph>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: GraphDoc =
            serde_json::from_str(line).map_err(|e| FormatError::Malformed(e.to_string()).at_line(i + 1))?;
        out.push(doc.to_graph(vocab, collapse_duplicates).map_err(|e| e.at_line(i + 1))?);
    }
    Ok(out)
}

pub fn serialize_graphs_jsonl(graphs: &[SceneGraph], vocab: &Vocabulary) -> Result<String, FormatError> {
    let mut out = String::new();
    for g in graphs {
        out.push_str(&serialize_graph(g, vocab)?);
        out.push('\n');
    }
    Ok(out)
}

/// Object labels, a blank line, then relation labels; one per line.
pub fn parse_vocabulary(text: &str) -> Result<Vocabulary, FormatError> {
    let mut objects = Vec::new();
    let mut relations = Vec::new();
    let mut in_relations = false;
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if in_relations {
                continue;
            }
            in_relations = true;
            continue;
        }
        if in_relations { &mut relations } else { &mut objects }.push(line.to_owned());
    }
    if !in_relations {
        return Err(FormatError::Vocabulary("a blank line must separate object labels from relation labels".into()));
    }
    Vocabulary::new(objects, relations).map_err(|e| FormatError::Vocabulary(e.to_string()))
}

pub fn serialize_vocabulary(vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for l in vocab.object_labels() {
        out.push_str(l);
        out.push('\n');
    }
    out.push('\n');
    for l in vocab.relation_labels() {
        out.push_str(l);
        out.push('\n');
    }
    out
}

pub fn parse_corpus(jsonl: &str, vocab: Vocabulary, split: Split) -> Result<Corpus, FormatError> {
    let graphs = parse_graphs_jsonl(jsonl, &vocab, true)?;
    Ok(Corpus::new(graphs, vocab, split)?)
}

/// `label<TAB>x1 x2 ...`; values may be separated by tabs or spaces.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable, FormatError> {
    let mut table: Option<EmbeddingTable> = None;
    for (i, line) in text.lines().enumerate() {
        let err = |message: String| FormatError::Embedding { line: i + 1, message };
        if line.trim().is_empty() {
            continue;
        }
        let (label, rest) = line.split_once('\t').ok_or_else(|| err("expected `label<TAB>values`".into()))?;
        let values = rest
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(format!("`{t}` is not a number"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if values.is_empty() {
            return Err(err(format!("no values for `{label}`")));
        }
        let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
        if t.vectors.contains_key(label) {
            return Err(err(format!("duplicate label `{label}`")));
        }
        t.insert(label, values).map_err(|e| err(e.to_string()))?;
    }
    table.ok_or(FormatError::Embedding { line: 0, message: "file holds no embeddings".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        Vocabulary::new(vec!["man".into(), "horse".into(), "hat".into()], vec!["on".into(), "wearing".into()]).unwrap()
    }

    #[test]
    fn minimal_graph() {
        let g = parse_graph(r#"{"nodes":[{"id":0,"label":"man"}],"edges":[]}"#, &vocab()).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (1, 0));
    }

    #[test]
    fn canonical_round_trip() {
        let v = vocab();
        let text = r#"{"nodes":[{"id":0,"label":"man"},{"id":1,"label":"horse"},{"id":2,"label":"hat"}],"edges":[{"src":0,"dst":1,"label":"on"},{"src":0,"dst":2,"label":"wearing"}]}"#;
        assert_eq!(serialize_graph(&parse_graph(text, &v).unwrap(), &v).unwrap(), text);
        let shuffled = r#"{"edges":[{"src":0,"dst":2,"label":"wearing"},{"src":0,"dst":1,"label":"on"}],"nodes":[{"id":2,"label":"hat"},{"id":0,"label":"man"},{"id":1,"label":"horse"}]}"#;
        assert_eq!(serialize_graph(&parse_graph(shuffled, &v).unwrap(), &v).unwrap(), text);
        assert_eq!(serialize_graph(&SceneGraph::empty(), &v).unwrap(), r#"{"nodes":[],"edges":[]}"#);
    }

    #[test]
    fn named_errors() {
        let v = vocab();
        let two = r#"{"id":0,"label":"man"},{"id":1,"label":"hat"}"#;
        let cases = [
            ("{", "malformed"),
            (r#"{"nodes":[{"id":0,"label":"dog"}],"edges":[]}"#, "dog"),
            (&format!(r#"{{"nodes":[{two}],"edges":[{{"src":0,"dst":0,"label":"on"}}]}}"#), "self"),
            (
                &format!(
                    r#"{{"nodes":[{two}],"edges":[{{"src":0,"dst":1,"label":"on"}},{{"src":0,"dst":1,"label":"wearing"}}]}}"#
                ),
                "dup",
            ),
            (&format!(r#"{{"nodes":[{two}],"edges":[{{"src":0,"dst":1,"label":"near"}}]}}"#), "near"),
        ];
        let errs: Vec<FormatError> = cases.iter().map(|(t, _)| parse_graph(t, &v).unwrap_err()).collect();
        assert!(matches!(errs[0], FormatError::Malformed(_)));
        assert!(matches!(&errs[1], FormatError::UnknownObjectLabel(l) if l == "dog"));
        assert!(matches!(errs[2], FormatError::SelfLoop(0)));
        assert!(matches!(errs[3], FormatError::DuplicateEdge { src: 0, dst: 1 }));
        assert!(matches!(&errs[4], FormatError::UnknownRelationLabel(l) if l == "near"));
    }

    #[test]
    fn corpus_collapses_duplicates() {
        let v = vocab();
        let line = r#"{"nodes":[{"id":0,"label":"man"},{"id":1,"label":"hat"}],"edges":[{"src":0,"dst":1,"label":"wearing"},{"src":0,"dst":1,"label":"on"}]}"#;
        let c = parse_corpus(&format!("{line}\n\n"), v, Split::Train).unwrap();
        assert_eq!(c.graphs[0].num_edges(), 1);
        assert_eq!(c.graphs[0].edges()[0].label.0, 1);
        let err = parse_corpus("\n{", vocab(), Split::Train).unwrap_err();
        assert!(matches!(err, FormatError::Line { line: 2, .. }));
    }

    #[test]
    fn vocabulary_round_trip() {
        let v = vocab();
        let text = serialize_vocabulary(&v);
        assert_eq!(text, "man\nhorse\nhat\n\non\nwearing\n");
        assert_eq!(parse_vocabulary(&text).unwrap(), v);
        let none = Vocabulary::new(vec!["a".into()], vec![]).unwrap();
        assert_eq!(parse_vocabulary(&serialize_vocabulary(&none)).unwrap(), none);
        assert!(parse_vocabulary("a\nb\n").is_err());
        assert!(parse_vocabulary("a\na\n\nr\n").is_err());
    }

    #[test]
    fn embeddings() {
        let t = parse_embeddings("man\t1 0\ntraffic light\t0.5\t-2\n").unwrap();
        assert_eq!(t.dim, 2);
        assert_eq!(t.get("traffic light").unwrap(), &[0.5, -2.0]);
        assert!(matches!(parse_embeddings("a\t1 2\nb\t1\n"), Err(FormatError::Embedding { line: 2, .. })));
        assert!(parse_embeddings("a 1 2\n").is_err());
        assert!(parse_embeddings("a\t1\na\t2\n").is_err());
    }
}
