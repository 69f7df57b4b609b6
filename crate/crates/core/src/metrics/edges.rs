//! Edge-level precision metrics over label triples.

use alloc::collections::BTreeSet;

use crate::graph::SceneGraph;
use crate::math;

/// `(subject label, relation, object label)` triples.
pub type TripleSet = BTreeSet<(u32, u32, u32)>;

pub fn triples<'a>(graphs: impl IntoIterator<Item = &'a SceneGraph>) -> TripleSet {
    let mut out = TripleSet::new();
    for g in graphs {
        for e in g.edges() {
            let s = g.label_of(e.src).expect("valid edge").0;
            let o = g.label_of(e.dst).expect("valid edge").0;
            out.insert((s, e.label.0, o));
        }
    }
    out
}

fn triple_of(g: &SceneGraph, e: &crate::graph::Edge) -> (u32, u32, u32) {
    (g.label_of(e.src).expect("valid edge").0, e.label.0, g.label_of(e.dst).expect("valid edge").0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MepScore {
    pub value: f64,
    /// The graph has no edges; `value` is 0 by convention.
    pub edgeless: bool,
}

/// `min(1, exp(1 - r/c))` times the fraction of the `c` edges of `g` whose
/// triple occurs in `train` or `test`.
pub fn mep(g: &SceneGraph, train: &TripleSet, test: &TripleSet, r: f64) -> MepScore {
    let c = g.num_edges();
    if c == 0 {
        return MepScore { value: 0.0, edgeless: true };
    }
    let hits = g
        .edges()
        .iter()
        .filter(|e| {
            let t = triple_of(g, e);
            train.contains(&t) || test.contains(&t)
        })
        .count();
    let cf = c as f64;
    let penalty = math::exp(1.0 - r / cf).min(1.0);
    MepScore { value: penalty * hits as f64 / cf, edgeless: false }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZsepScore {
    pub value: f64,
    /// No generated edge was novel; `value` is 0 by convention.
    pub no_novel_edges: bool,
}

/// Among generated edge occurrences whose triple is absent from training, the
/// fraction whose triple occurs in the test set.
pub fn zsep(gen: &[SceneGraph], train: &TripleSet, test: &TripleSet) -> ZsepScore {
    let mut novel = 0usize;
    let mut hit = 0usize;
    for g in gen {
        for e in g.edges() {
            let t = triple_of(g, e);
            if !train.contains(&t) {
                novel += 1;
                if test.contains(&t) {
                    hit += 1;
                }
            }
        }
    }
    if novel == 0 {
        return ZsepScore { value: 0.0, no_novel_edges: true };
    }
    ZsepScore { value: hit as f64 / novel as f64, no_novel_edges: false }
}
