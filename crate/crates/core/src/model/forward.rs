use alloc::vec;
use alloc::vec::Vec;

use super::{EdgeWeighting, ExternalKnowledge, ModelError, ModelParams};
use crate::graph::{ObjectLabel, RelationLabel};
use crate::nn::{Tape, Var};
use crate::sequence::{EdgePair, GraphSequence, SequenceStep};

#[derive(Debug, Clone)]
pub struct NodeOutput {
    /// Logits over object labels then EOS.
    pub logits: Var,
    /// New `f_node` state per layer; the top layer is last.
    pub hidden: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct EdgeOutput {
    /// Logits over relation labels then `NO_EDGE`.
    pub logits: Var,
    pub hidden: Vec<Var>,
}

/// Teacher-forced score of one sequence.
#[derive(Debug, Clone, Copy)]
pub struct SequenceScore {
    /// Total weighted loss (a scalar record on the tape).
    pub loss: Var,
    /// Sum of log-probabilities of every node and edge target.
    pub log_likelihood: f64,
}

fn rel_class(m: &ModelParams, r: Option<RelationLabel>) -> usize {
    r.map_or(m.config.no_edge(), RelationLabel::index)
}

impl ModelParams {
    /// Encodes `S_{i-1}`: the previous label embedding followed by forward and
    /// backward relation embeddings for each of the `k` window slots.
    /// `prev = None` is the start-of-sequence input.
    pub fn node_input(&self, tape: &mut Tape<'_>, prev: Option<&SequenceStep>) -> Result<Var, ModelError> {
        let k = self.config.k;
        let (label, edges): (usize, &[EdgePair]) = match prev {
            None => (self.config.sos(), &[]),
            Some(s) => (self.check_object(s.node)?, &s.edges),
        };
        let mut parts = Vec::with_capacity(1 + 2 * k);
        parts.push(tape.row(self.node_emb, label)?);
        for slot in 0..k {
            let pair = edges.get(slot).copied().unwrap_or(EdgePair::NONE);
            for r in [pair.forward, pair.backward] {
                let c = self.check_relation(r)?;
                parts.push(tape.row(self.rel_emb, c)?);
            }
        }
        Ok(tape.concat(&parts))
    }

    pub fn node_step(
        &self,
        tape: &mut Tape<'_>,
        prev: Option<&SequenceStep>,
        hidden: &[Var],
    ) -> Result<NodeOutput, ModelError> {
        let x = self.node_input(tape, prev)?;
        let hidden = self.node_rnn.step(tape, x, hidden)?;
        let top = *hidden.last().expect("non-empty stack");
        let logits = tape.affine(&[(self.node_out_w, top)], Some(self.node_out_b))?;
        Ok(NodeOutput { logits, hidden })
    }

    /// `f_node2edge`: initial `f_edge` state from the top `f_node` state.
    pub fn edge_init(&self, tape: &mut Tape<'_>, node_top: Var) -> Result<Vec<Var>, ModelError> {
        let a = tape.affine(&[(self.n2e_hidden_w, node_top)], Some(self.n2e_hidden_b))?;
        let a = tape.tanh(a);
        self.n2e_out
            .iter()
            .map(|&(w, b)| {
                let h = tape.affine(&[(w, a)], Some(b))?;
                Ok(tape.tanh(h))
            })
            .collect()
    }

    /// One `f_edge` call predicting the relation `a -> b`. `prior` is the
    /// relation class decided for the opposite direction, if any.
    pub fn edge_step(
        &self,
        tape: &mut Tape<'_>,
        a: ObjectLabel,
        b: ObjectLabel,
        prior: Option<usize>,
        hidden: &[Var],
    ) -> Result<EdgeOutput, ModelError> {
        let ea = tape.row(self.node_emb, self.check_object(a)?)?;
        let eb = tape.row(self.node_emb, self.check_object(b)?)?;
        let ep = match prior {
            Some(c) => tape.row(self.rel_emb, c)?,
            None => tape.constant(vec![0.0; self.config.embed_dim]),
        };
        let x = tape.concat(&[ea, eb, ep]);
        let hidden = self.edge_rnn.step(tape, x, hidden)?;
        let top = *hidden.last().expect("non-empty stack");
        let logits = tape.affine(&[(self.edge_out_w, top)], Some(self.edge_out_b))?;
        Ok(EdgeOutput { logits, hidden })
    }

    pub(crate) fn check_object(&self, l: ObjectLabel) -> Result<usize, ModelError> {
        if l.index() < self.config.num_objects {
            Ok(l.index())
        } else {
            Err(ModelError::UnknownObject(l.0))
        }
    }

    pub(crate) fn check_relation(&self, r: Option<RelationLabel>) -> Result<usize, ModelError> {
        match r {
            Some(l) if l.index() >= self.config.num_relations => Err(ModelError::UnknownRelation(l.0)),
            other => Ok(rel_class(self, other)),
        }
    }

    /// Node loss for target class `t`:
    /// `(1 - alpha) CE(softmax(z), t) + alpha CE(softmax(z + sim(., t)), t)`.
    /// The second term is `H(p, q)` because `q ∝ p̂ exp(sim)` is the softmax of
    /// `z + sim`. Returns the loss record and the plain cross-entropy value.
    fn node_loss_on_tape(
        &self,
        tape: &mut Tape<'_>,
        logits: Var,
        target: usize,
        ek: &ExternalKnowledge,
    ) -> Result<(Var, f64), ModelError> {
        let alpha = self.alpha;
        let ce = tape.cross_entropy_index(logits, target)?;
        let plain = tape.scalar(ce);
        if alpha == 0.0 {
            return Ok((ce, plain));
        }
        let sim = tape.constant(ek.class_row(target));
        let shifted = tape.add(logits, sim)?;
        let ce_q = tape.cross_entropy_index(shifted, target)?;
        let a = tape.scale(ce, 1.0 - alpha);
        let b = tape.scale(ce_q, alpha);
        Ok((tape.sum_all(&[a, b]), plain))
    }
}

/// Records the teacher-forced loss of `s` on `tape`.
///
/// Node steps run over every node plus a final EOS target. For node `i`, the
/// edge loop visits the window predecessors from the farthest to the nearest,
/// predicting `e(i, j)` and then `e(j, i)` with the teacher value of the first
/// fed into the second. Edge cross-entropies are multiplied by `edge_weights`
/// indexed by the target class.
pub fn score_sequence(
    m: &ModelParams,
    tape: &mut Tape<'_>,
    s: &GraphSequence,
    ek: &ExternalKnowledge,
    edge_weights: &[f64],
) -> Result<SequenceScore, ModelError> {
    if ek.num_objects() != m.config.num_objects {
        return Err(ModelError::Config("similarity matrix size differs from the vocabulary".into()));
    }
    if edge_weights.len() != m.config.edge_classes() {
        return Err(ModelError::Config("one edge weight per relation class is required".into()));
    }
    let k = m.config.k;
    let mut terms = Vec::new();
    let mut ll = 0.0;
    let mut hidden = m.node_rnn.zero_state(tape);
    let mut prev: Option<&SequenceStep> = None;
    for (i, step) in s.steps.iter().enumerate() {
        let out = m.node_step(tape, prev, &hidden)?;
        hidden = out.hidden;
        let target = m.check_object(step.node)?;
        let (loss, ce) = m.node_loss_on_tape(tape, out.logits, target, ek)?;
        terms.push(loss);
        ll -= ce;

        let window = step.edges.len().min(k).min(i);
        if window > 0 {
            let mut eh = m.edge_init(tape, *hidden.last().expect("non-empty stack"))?;
            for d in (0..window).rev() {
                let pair = step.edges[d];
                let pred = s.steps[i - d - 1].node;
                let fwd = m.check_relation(pair.forward)?;
                let bwd = m.check_relation(pair.backward)?;
                let o = m.edge_step(tape, step.node, pred, None, &eh)?;
                eh = o.hidden;
                let ce = tape.cross_entropy_index(o.logits, fwd)?;
                ll -= tape.scalar(ce);
                terms.push(tape.scale(ce, edge_weights[fwd]));
                let o = m.edge_step(tape, pred, step.node, Some(fwd), &eh)?;
                eh = o.hidden;
                let ce = tape.cross_entropy_index(o.logits, bwd)?;
                ll -= tape.scalar(ce);
                terms.push(tape.scale(ce, edge_weights[bwd]));
            }
        }
        prev = Some(step);
    }
    let out = m.node_step(tape, prev, &hidden)?;
    let (loss, ce) = m.node_loss_on_tape(tape, out.logits, m.config.eos(), ek)?;
    terms.push(loss);
    ll -= ce;
    Ok(SequenceScore { loss: tape.sum_all(&terms), log_likelihood: ll })
}

/// `(log-likelihood, loss)` of a sequence under teacher forcing.
pub fn sequence_log_likelihood(
    m: &ModelParams,
    s: &GraphSequence,
    ek: &ExternalKnowledge,
    weighting: &EdgeWeighting,
) -> Result<(f64, f64), ModelError> {
    let mut tape = Tape::new(&m.store);
    let w = weighting.weights(m.config.edge_classes());
    let score = score_sequence(m, &mut tape, s, ek, &w)?;
    Ok((score.log_likelihood, tape.scalar(score.loss)))
}
