use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use super::NnError;

/// One gated recurrent layer:
///
/// ```text
/// z  = sigmoid(Wz x + Uz h + bz)
/// r  = sigmoid(Wr x + Ur h + br)
/// h~ = tanh(Wh x + Uh (r * h) + bh)
/// h' = (1 - z) * h + z * h~
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruLayer {
    pub input: usize,
    pub hidden: usize,
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

impl GruLayer {
    fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let s = 1.0 / crate::math::sqrt(hidden as f64);
        let mut m =
            |name: &str, rows: usize, cols: usize| store.add_uniform(format!("{prefix}.{name}"), rows, cols, s, rng);
        GruLayer {
            input,
            hidden,
            w_z: m("w_z", hidden, input),
            u_z: m("u_z", hidden, hidden),
            b_z: m("b_z", hidden, 1),
            w_r: m("w_r", hidden, input),
            u_r: m("u_r", hidden, hidden),
            b_r: m("b_r", hidden, 1),
            w_h: m("w_h", hidden, input),
            u_h: m("u_h", hidden, hidden),
            b_h: m("b_h", hidden, 1),
        }
    }

    pub fn step(&self, tape: &mut Tape<'_>, x: Var, h: Var) -> Result<Var, NnError> {
        if tape.value(x).len() != self.input {
            return Err(NnError::Shape { expected: self.input, found: tape.value(x).len() });
        }
        if tape.value(h).len() != self.hidden {
            return Err(NnError::Shape { expected: self.hidden, found: tape.value(h).len() });
        }
        let z = tape.affine(&[(self.w_z, x), (self.u_z, h)], Some(self.b_z))?;
        let z = tape.sigmoid(z);
        let r = tape.affine(&[(self.w_r, x), (self.u_r, h)], Some(self.b_r))?;
        let r = tape.sigmoid(r);
        let rh = tape.mul(r, h)?;
        let cand = tape.affine(&[(self.w_h, x), (self.u_h, rh)], Some(self.b_h))?;
        let cand = tape.tanh(cand);
        // (1 - z) h + z h~ = h + z (h~ - h)
        let diff = tape.sub(cand, h)?;
        let gated = tape.mul(z, diff)?;
        tape.add(h, gated)
    }
}

/// `layers.len()` GRU layers; layer 0 reads the input, layer `l` reads the
/// new hidden state of layer `l - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GruStack {
    pub layers: Vec<GruLayer>,
}

impl GruStack {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut R,
    ) -> Self {
        assert!(num_layers >= 1, "a GRU stack needs at least one layer");
        let layers = (0..num_layers)
            .map(|l| {
                let inp = if l == 0 { input } else { hidden };
                GruLayer::new(store, &format!("{prefix}.l{l}"), inp, hidden, rng)
            })
            .collect();
        GruStack { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// One time step. Returns the new per-layer hidden states; the output is
    /// the last one.
    pub fn step(&self, tape: &mut Tape<'_>, input: Var, hidden: &[Var]) -> Result<Vec<Var>, NnError> {
        if hidden.len() != self.layers.len() {
            return Err(NnError::Shape { expected: self.layers.len(), found: hidden.len() });
        }
        let mut x = input;
        let mut out = Vec::with_capacity(hidden.len());
        for (layer, &h) in self.layers.iter().zip(hidden) {
            x = layer.step(tape, x, h)?;
            out.push(x);
        }
        Ok(out)
    }

    /// All-zero initial state.
    pub fn zero_state(&self, tape: &mut Tape<'_>) -> Vec<Var> {
        self.layers.iter().map(|l| tape.constant(alloc::vec![0.0; l.hidden])).collect()
    }
}

/// Runs one step of `stack` and returns `(output, new hidden states)`.
pub fn gru_forward(
    stack: &GruStack,
    tape: &mut Tape<'_>,
    input: Var,
    hidden: &[Var],
) -> Result<(Var, Vec<Var>), NnError> {
    let h = stack.step(tape, input, hidden)?;
    Ok((*h.last().expect("at least one layer"), h))
}
