//! Object-pair and triple co-occurrence agreement (Obj_K and Trip_K).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::MetricError;
use crate::graph::SceneGraph;

/// Symmetric pair co-occurrence over a graph set:
/// `P[i, j] = |graphs with both| / |graphs with i or j|`, `i < j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CooccurrenceMatrix {
    /// Graphs containing label `i`.
    pub label_graphs: BTreeMap<u32, usize>,
    /// Graphs containing both labels of the pair.
    pub pair_graphs: BTreeMap<(u32, u32), usize>,
}

impl CooccurrenceMatrix {
    pub fn new(graphs: &[SceneGraph]) -> Self {
        let mut m = CooccurrenceMatrix::default();
        for g in graphs {
            let labels: Vec<u32> = g.label_set().into_iter().map(|l| l.0).collect();
            for (i, &a) in labels.iter().enumerate() {
                *m.label_graphs.entry(a).or_insert(0) += 1;
                for &b in &labels[i + 1..] {
                    *m.pair_graphs.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
        m
    }

    pub fn probability(&self, a: u32, b: u32) -> f64 {
        let (a, b) = (a.min(b), a.max(b));
        let both = self.pair_graphs.get(&(a, b)).copied().unwrap_or(0);
        if both == 0 {
            return 0.0;
        }
        let ca = self.label_graphs.get(&a).copied().unwrap_or(0);
        let cb = self.label_graphs.get(&b).copied().unwrap_or(0);
        both as f64 / (ca + cb - both) as f64
    }

    /// The `k` pairs seen in most graphs, ties broken by label order.
    pub fn top_pairs(&self, k: usize) -> Result<Vec<(u32, u32)>, MetricError> {
        if self.pair_graphs.len() < k {
            return Err(MetricError::NotEnoughPairs { k, available: self.pair_graphs.len() });
        }
        let mut pairs: Vec<(&(u32, u32), &usize)> = self.pair_graphs.iter().collect();
        pairs.sort_by(|x, y| y.1.cmp(x.1).then(x.0.cmp(y.0)));
        Ok(pairs.into_iter().take(k).map(|(p, _)| *p).collect())
    }
}

/// `1 - (1/K) sum |P_test - P_gen|` over the `K` most frequent test pairs.
pub fn obj_k(test: &[SceneGraph], gen: &[SceneGraph], k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::Config("K must be at least 1"));
    }
    let pt = CooccurrenceMatrix::new(test);
    let pg = CooccurrenceMatrix::new(gen);
    let top = pt.top_pairs(k)?;
    let diff: f64 = top.iter().map(|&(a, b)| (pt.probability(a, b) - pg.probability(a, b)).abs()).sum();
    Ok(1.0 - diff / k as f64)
}

type Triple = (u32, u32, u32);

/// Per graph set: graphs holding each (subject, relation, object) triple and
/// graphs in which each ordered subject/object label pair co-occurs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripleStats {
    pub triple_graphs: BTreeMap<Triple, usize>,
    pub pair_graphs: BTreeMap<(u32, u32), usize>,
}

impl TripleStats {
    pub fn new(graphs: &[SceneGraph]) -> Self {
        let mut s = TripleStats::default();
        for g in graphs {
            let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
            for n in g.nodes() {
                *counts.entry(n.label.0).or_insert(0) += 1;
            }
            for (&a, &ca) in &counts {
                for &b in counts.keys() {
                    // A same-label pair needs two distinct nodes.
                    if a != b || ca >= 2 {
                        *s.pair_graphs.entry((a, b)).or_insert(0) += 1;
                    }
                }
            }
            let triples: BTreeSet<Triple> = g
                .edges()
                .iter()
                .map(|e| {
                    let sl = g.label_of(e.src).expect("valid edge").0;
                    let ol = g.label_of(e.dst).expect("valid edge").0;
                    (sl, e.label.0, ol)
                })
                .collect();
            for t in triples {
                *s.triple_graphs.entry(t).or_insert(0) += 1;
            }
        }
        s
    }

    /// Probability that the relation links the pair given the pair co-occurs;
    /// 0 when the pair never co-occurs.
    pub fn probability(&self, t: Triple) -> f64 {
        let pair = self.pair_graphs.get(&(t.0, t.2)).copied().unwrap_or(0);
        if pair == 0 {
            return 0.0;
        }
        self.triple_graphs.get(&t).copied().unwrap_or(0) as f64 / pair as f64
    }
}

/// `1 - (1/K) sum |P_test - P_gen|` over the `K` most frequent test triples.
pub fn trip_k(test: &[SceneGraph], gen: &[SceneGraph], k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::Config("K must be at least 1"));
    }
    let st = TripleStats::new(test);
    let sg = TripleStats::new(gen);
    if st.triple_graphs.len() < k {
        return Err(MetricError::NotEnoughTriples { k, available: st.triple_graphs.len() });
    }
    let mut ranked: Vec<(&Triple, &usize)> = st.triple_graphs.iter().collect();
    ranked.sort_by(|x, y| y.1.cmp(x.1).then(x.0.cmp(y.0)));
    let diff: f64 = ranked.iter().take(k).map(|(t, _)| (st.probability(**t) - sg.probability(**t)).abs()).sum();
    Ok(1.0 - diff / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node, NodeId, ObjectLabel, RelationLabel};

    fn g(labels: &[u32], edges: &[(u32, u32, u32)]) -> SceneGraph {
        SceneGraph::new(
            labels.iter().enumerate().map(|(i, &l)| Node { id: NodeId(i as u32), label: ObjectLabel(l) }).collect(),
            edges.iter().map(|&(s, d, l)| Edge { src: NodeId(s), dst: NodeId(d), label: RelationLabel(l) }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn obj_k_cases() {
        let test = [g(&[0, 1], &[]), g(&[0, 1, 2], &[])];
        assert_eq!(obj_k(&test, &test, 2).unwrap(), 1.0);
        // Top pair (0, 1): P_test = 1. Gen: both in 3 graphs of 4 with either.
        let gen = [g(&[0, 1], &[]), g(&[0, 1], &[]), g(&[0, 1], &[]), g(&[0], &[])];
        assert!((obj_k(&test, &gen, 1).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(obj_k(&test, &[g(&[5], &[])], 1).unwrap(), 0.0);
        assert!(matches!(obj_k(&test, &test, 4), Err(MetricError::NotEnoughPairs { k: 4, available: 3 })));
    }

    #[test]
    fn trip_k_cases() {
        let test = [g(&[0, 1], &[(0, 1, 0)])];
        assert_eq!(trip_k(&test, &test, 1).unwrap(), 1.0);
        let gen = [g(&[0, 1], &[(0, 1, 0)]), g(&[0, 1], &[])];
        assert_eq!(trip_k(&test, &gen, 1).unwrap(), 0.5);
        assert_eq!(trip_k(&test, &[g(&[0], &[])], 1).unwrap(), 0.0);
    }
}
