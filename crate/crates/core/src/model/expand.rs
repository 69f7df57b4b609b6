use alloc::vec::Vec;

use rand::Rng;

use super::{ModelError, ModelParams};
use crate::graph::{GraphBuilder, NodeId, ObjectLabel, RelationLabel, SceneGraph};
use crate::math;
use crate::nn::Tape;
use crate::rng::derived_rng;
use crate::sequence::{cluster_aware_order, sequence_with_order, EdgePair, SequenceStep};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpandOptions {
    /// Independent expansions to draw.
    pub num_samples: usize,
    /// Most nodes added per expansion.
    pub max_new_nodes: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions { num_samples: 1, max_new_nodes: 20, temperature: 1.0, seed: 0 }
    }
}

/// Draws `num_samples` expansions of `seed`; sample `s` uses its own rng
/// stream derived from `opt.seed`.
pub fn expand(m: &ModelParams, seed: &SceneGraph, opt: &ExpandOptions) -> Result<Vec<SceneGraph>, ModelError> {
    if opt.num_samples == 0 {
        return Err(ModelError::Config("at least one sample is required".into()));
    }
    (0..opt.num_samples)
        .map(|s| {
            let mut rng = derived_rng(opt.seed, "expand", s as u64);
            expand_one(m, seed, opt.max_new_nodes, opt.temperature, &mut rng)
        })
        .collect()
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left `u` beyond the cumulative total: take the last class
    // with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// One expansion. The seed is ordered by cluster-aware BFS and fed through
/// `f_node` as teacher input, then new nodes are sampled until EOS or `cap`.
/// Edges between each new node and its window predecessors take the most
/// probable relation class. New nodes get ids above the largest seed id.
pub fn expand_one<R: Rng + ?Sized>(
    m: &ModelParams,
    seed: &SceneGraph,
    cap: usize,
    temperature: f64,
    rng: &mut R,
) -> Result<SceneGraph, ModelError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(ModelError::Config("temperature must be positive".into()));
    }
    for n in seed.nodes() {
        m.check_object(n.label)?;
    }
    for e in seed.edges() {
        m.check_relation(Some(e.label))?;
    }
    let k = m.config.k;
    let order = cluster_aware_order(seed, rng);
    let seq = sequence_with_order(seed, &order, k);

    let mut tape = Tape::new(&m.store);
    let mut hidden = m.node_rnn.zero_state(&mut tape);
    for i in 0..seq.len() {
        let prev = i.checked_sub(1).map(|p| &seq.steps[p]);
        hidden = m.node_step(&mut tape, prev, &hidden)?.hidden;
    }

    let mut builder = GraphBuilder::from_graph(seed);
    let mut ids: Vec<NodeId> = order;
    let mut labels: Vec<ObjectLabel> = seq.steps.iter().map(|s| s.node).collect();
    let mut prev: Option<SequenceStep> = seq.steps.last().cloned();
    let first_id = seed.max_node_id().map_or(0, |id| id.0 + 1);

    for next_id in (first_id..).take(cap) {
        let out = m.node_step(&mut tape, prev.as_ref(), &hidden)?;
        hidden = out.hidden;
        let scaled: Vec<f64> = tape.value(out.logits).iter().map(|z| z / temperature).collect();
        let class = sample_index(&math::softmax(&scaled), rng);
        if class == m.config.eos() {
            break;
        }
        let label = ObjectLabel(class as u32);
        let id = NodeId(next_id);
        builder.add_node(id, label)?;

        let i = labels.len();
        let window = i.min(k);
        let mut pairs = alloc::vec![EdgePair::NONE; window];
        if window > 0 {
            let mut eh = m.edge_init(&mut tape, *hidden.last().expect("non-empty stack"))?;
            for d in (0..window).rev() {
                let j = i - d - 1;
                let o = m.edge_step(&mut tape, label, labels[j], None, &eh)?;
                eh = o.hidden;
                let fwd = argmax(tape.value(o.logits));
                let o = m.edge_step(&mut tape, labels[j], label, Some(fwd), &eh)?;
                eh = o.hidden;
                let bwd = argmax(tape.value(o.logits));
                let decode = |c: usize| (c != m.config.no_edge()).then_some(RelationLabel(c as u32));
                pairs[d] = EdgePair { forward: decode(fwd), backward: decode(bwd) };
                if let Some(r) = pairs[d].forward {
                    builder.add_edge(id, ids[j], r)?;
                }
                if let Some(r) = pairs[d].backward {
                    builder.add_edge(ids[j], id, r)?;
                }
            }
        }
        ids.push(id);
        labels.push(label);
        prev = Some(SequenceStep { node: label, edges: pairs });
    }
    Ok(builder.build())
}
