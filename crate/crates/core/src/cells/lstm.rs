use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{init_param, Graph, InitScheme, ParamStore, Scalar, Tensor, Var};

/// Fused LSTM weights.
///
/// `w` is `[4·hidden × (input + hidden)]` and maps `[x; h_prev]` to the
/// pre-activations of the candidate memory, output, input and forget gates,
/// stacked in that block order. `b` is `[4·hidden]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<T> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

/// Row offsets of the four gate blocks inside the fused weight.
pub const CANDIDATE: usize = 0;
pub const OUTPUT: usize = 1;
pub const INPUT: usize = 2;
pub const FORGET: usize = 3;

impl<T: Scalar> LstmParams<T> {
    /// Scaled-uniform weights, zero biases except a forget bias of 1.
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::Config("LSTM sizes must be positive".into()));
        }
        let w = init_param(&[4 * hidden, input + hidden], InitScheme::ScaledUniform, rng)?;
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[FORGET * hidden..].fill(T::one());
        Ok(Self { w, b })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Tensor::zeros(&[4 * hidden, input + hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w.shape()[0] / 4
    }

    pub fn input_size(&self) -> usize {
        self.w.shape()[1] - self.hidden_size()
    }

    /// Stores the weights under `{prefix}/w` and `{prefix}/b`.
    pub fn register(self, store: &mut ParamStore<T>, prefix: &str) -> Result<()> {
        store.insert(&format!("{prefix}/w"), self.w)?;
        store.insert(&format!("{prefix}/b"), self.b)
    }

    /// Reads the weights back from a store.
    pub fn from_store(store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let get = |n: &str| {
            store
                .value(&format!("{prefix}/{n}"))
                .cloned()
                .ok_or_else(|| Error::Config(format!("missing parameter {prefix}/{n}")))
        };
        Ok(Self {
            w: get("w")?,
            b: get("b")?,
        })
    }
}

/// `(h, c)` for one recurrent stream, one row per batch element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamState {
    pub h: Var,
    pub c: Var,
}

impl StreamState {
    pub fn zeros<T: Scalar>(g: &mut Graph<T>, batch: usize, hidden: usize) -> Self {
        let h = g.leaf(Tensor::zeros(&[batch, hidden]));
        let c = g.leaf(Tensor::zeros(&[batch, hidden]));
        Self { h, c }
    }
}

/// LSTM weights bound into a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmCell {
    pub w: Var,
    pub b: Var,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn bind<T: Scalar>(g: &mut Graph<T>, store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let w = g.param(store, &format!("{prefix}/w"))?;
        let b = g.param(store, &format!("{prefix}/b"))?;
        Self::from_vars(g, w, b)
    }

    /// Wraps already-created weight nodes.
    pub fn from_vars<T: Scalar>(g: &Graph<T>, w: Var, b: Var) -> Result<Self> {
        let ws = g.shape(w);
        if ws.len() != 2 || !ws[0].is_multiple_of(4) || ws[0] == 0 || ws[1] <= ws[0] / 4 {
            return Err(Error::Contract(format!("malformed LSTM weight {ws:?}")));
        }
        let hidden = ws[0] / 4;
        if g.shape(b) != [4 * hidden] {
            return Err(Error::dim("lstm bias", ws, g.shape(b)));
        }
        Ok(Self {
            w,
            b,
            input: ws[1] - hidden,
            hidden,
        })
    }

    pub fn zero_state<T: Scalar>(&self, g: &mut Graph<T>, batch: usize) -> StreamState {
        StreamState::zeros(g, batch, self.hidden)
    }

    /// One step: `c = c̃ ⊙ i + c_prev ⊙ f`, `h = o ⊙ tanh(c)`.
    pub fn step<T: Scalar>(&self, g: &mut Graph<T>, x: Var, prev: &StreamState) -> Result<StreamState> {
        let d = self.hidden;
        if g.shape(x).last() != Some(&self.input) || g.shape(prev.h).last() != Some(&d) {
            return Err(Error::dim("lstm_step", g.shape(x), g.shape(prev.h)));
        }
        if g.shape(prev.h) != g.shape(prev.c) {
            return Err(Error::dim("lstm_step state", g.shape(prev.h), g.shape(prev.c)));
        }
        let xh = g.concat_cols(&[x, prev.h])?;
        let z = g.matmul_t(xh, self.w)?;
        let z = g.add_row(z, self.b)?;
        let block = |g: &mut Graph<T>, k: usize| g.slice_cols(z, k * d, (k + 1) * d);
        let cand = block(g, CANDIDATE)?;
        let cand = g.tanh(cand);
        let out = block(g, OUTPUT)?;
        let out = g.sigmoid(out);
        let inp = block(g, INPUT)?;
        let inp = g.sigmoid(inp);
        let forget = block(g, FORGET)?;
        let forget = g.sigmoid(forget);

        let write = g.mul(cand, inp)?;
        let keep = g.mul(prev.c, forget)?;
        let c = g.add(write, keep)?;
        let tc = g.tanh(c);
        let h = g.mul(out, tc)?;
        Ok(StreamState { h, c })
    }
}

/// Convenience for a single un-batched step on plain tensors.
pub fn lstm_step<T: Scalar>(
    params: &LstmParams<T>,
    x: &Tensor<T>,
    h_prev: &Tensor<T>,
    c_prev: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let mut g = Graph::new();
    let w = g.leaf(params.w.clone());
    let b = g.leaf(params.b.clone());
    let cell = LstmCell::from_vars(&g, w, b)?;
    let as_row = |t: &Tensor<T>| t.clone().reshape(vec![1, t.len()]);
    let x = g.leaf(as_row(x)?);
    let h = g.leaf(as_row(h_prev)?);
    let c = g.leaf(as_row(c_prev)?);
    let next = cell.step(&mut g, x, &StreamState { h, c })?;
    let d = cell.hidden;
    Ok((
        g.value(next.h).clone().reshape(vec![d])?,
        g.value(next.c).clone().reshape(vec![d])?,
    ))
}
