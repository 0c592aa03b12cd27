use super::{composite_step, GateHead, LstmCell, StreamState};
use crate::error::{Error, Result};
use crate::numeric::{Graph, Scalar, Tensor, Var};

/// Runs a cell from a zero state over per-step inputs `[B×d_in]`.
///
/// With `reverse`, steps are consumed from last to first but the returned
/// states are still indexed by original position. Rows whose `mask` entry
/// (per step `[B×1]` of 0/1) is zero keep their previous state.
pub fn run_lstm_sequence<T: Scalar>(
    g: &mut Graph<T>,
    cell: &LstmCell,
    xs: &[Var],
    mask: Option<&[Var]>,
    reverse: bool,
) -> Result<Vec<StreamState>> {
    let first = xs
        .first()
        .ok_or_else(|| Error::Contract("empty sequence".into()))?;
    check_mask(mask, xs.len())?;
    let batch = g.value(*first).rows();
    let mut state = cell.zero_state(g, batch);
    let mut states = Vec::with_capacity(xs.len());
    let order: Vec<usize> = if reverse {
        (0..xs.len()).rev().collect()
    } else {
        (0..xs.len()).collect()
    };
    for t in order {
        let next = cell.step(g, xs[t], &state)?;
        state = match mask {
            Some(mask) => hold(g, &next, &state, mask[t])?,
            None => next,
        };
        states.push(state);
    }
    if reverse {
        states.reverse();
    }
    Ok(states)
}

fn check_mask(mask: Option<&[Var]>, n: usize) -> Result<()> {
    match mask {
        Some(mask) if mask.len() != n => Err(Error::dim("mask length", &[mask.len()], &[n])),
        _ => Ok(()),
    }
}

/// `mask·next + (1 − mask)·prev`, row-wise; exact for a 0/1 mask.
fn hold<T: Scalar>(g: &mut Graph<T>, next: &StreamState, prev: &StreamState, mask: Var) -> Result<StreamState> {
    let keep = g.affine(mask, -T::one(), T::one());
    let mut mix = |a: Var, b: Var| -> Result<Var> {
        let a = g.mul_col(a, mask)?;
        let b = g.mul_col(b, keep)?;
        g.add(a, b)
    };
    Ok(StreamState {
        h: mix(next.h, prev.h)?,
        c: mix(next.c, prev.c)?,
    })
}

/// Forward and reverse runs concatenated per position (`[B×2d]`).
pub fn run_bilstm_sequence<T: Scalar>(
    g: &mut Graph<T>,
    fwd: &LstmCell,
    bwd: &LstmCell,
    xs: &[Var],
) -> Result<Vec<Var>> {
    let f = run_lstm_sequence(g, fwd, xs, None, false)?;
    let b = run_lstm_sequence(g, bwd, xs, None, true)?;
    f.iter()
        .zip(&b)
        .map(|(f, b)| g.concat_cols(&[f.h, b.h]))
        .collect()
}

/// Zeroes the rows of `states[n×d]` whose mask entry is 0.
pub fn apply_mask<T: Scalar>(states: &Tensor<T>, mask: &[T]) -> Result<Tensor<T>> {
    if states.rows() != mask.len() {
        return Err(Error::dim("apply_mask", states.shape(), &[mask.len()]));
    }
    if mask.iter().any(|&m| m != T::zero() && m != T::one()) {
        return Err(Error::Contract("mask entries must be 0 or 1".into()));
    }
    let c = states.cols();
    let mut out = states.clone();
    for (row, &m) in out.data_mut().chunks_mut(c).zip(mask) {
        if m == T::zero() {
            row.fill(T::zero());
        }
    }
    Ok(out)
}

/// Cells of one gated interleaved pathway, bound into a graph.
#[derive(Clone, Debug)]
pub struct GirnetCells {
    /// Gating LSTM over the primary input.
    pub gating: LstmCell,
    /// Backward gating LSTM; when present the gate head also sees the
    /// backward state of the following position.
    pub gating_bwd: Option<LstmCell>,
    pub gate_head: GateHead,
    /// Auxiliary cells, shared with the auxiliary pathways.
    pub aux: Vec<LstmCell>,
}

/// State sequences of one [`run_girnet_sequence`] call, indexed by position.
#[derive(Clone, Debug)]
pub struct GirnetRun {
    /// Gating-LSTM hidden states (`[B×d′]`, or `[B×2d′]` when bidirectional).
    pub h_prim: Vec<Var>,
    pub comp: Vec<StreamState>,
    /// Per-position, per-expert states computed from the previous composite.
    pub primaux: Vec<Vec<StreamState>>,
    /// Gate values `[B×m]` per position.
    pub gates: Vec<Var>,
}

/// Runs the gating LSTM, the gate head and the composite recurrence over a
/// primary sequence.
///
/// At each position the gate is computed from `x_t` and the gating state
/// *before* it consumes `x_t`; then the gating LSTM advances and the
/// composite step mixes the auxiliary cells. All initial states are zero.
///
/// `mask` (per step `[B×1]` of 0/1) forces the gates of padded positions to
/// zero and holds the gating states there, so every state passes through.
/// `forced` (`[n×m]`) replaces the gate head's output for every batch row,
/// for probing the recurrence with fixed routings.
pub fn run_girnet_sequence<T: Scalar>(
    g: &mut Graph<T>,
    cells: &GirnetCells,
    xs: &[Var],
    mask: Option<&[Var]>,
    forced: Option<&Tensor<T>>,
) -> Result<GirnetRun> {
    let n = xs.len();
    let first = xs
        .first()
        .ok_or_else(|| Error::Contract("empty sequence".into()))?;
    let batch = g.value(*first).rows();
    let m = cells.aux.len();
    if cells.gate_head.num_aux != m {
        return Err(Error::Config(format!(
            "gate head has {} channels for {m} auxiliary cells",
            cells.gate_head.num_aux
        )));
    }
    check_mask(mask, n)?;
    if let Some(f) = forced {
        if f.shape() != [n, m] {
            return Err(Error::dim("forced gates", f.shape(), &[n, m]));
        }
    }

    let backward_states = match &cells.gating_bwd {
        Some(cell) => Some(run_lstm_sequence(g, cell, xs, mask, true)?),
        None => None,
    };
    let bwd_zero = cells
        .gating_bwd
        .as_ref()
        .map(|c| g.leaf(Tensor::zeros(&[batch, c.hidden])));

    let d = cells.aux[0].hidden;
    let mut prim = cells.gating.zero_state(g, batch);
    let mut comp = StreamState::zeros(g, batch, d);
    let mut run = GirnetRun {
        h_prim: Vec::with_capacity(n),
        comp: Vec::with_capacity(n),
        primaux: Vec::with_capacity(n),
        gates: Vec::with_capacity(n),
    };

    for t in 0..n {
        let x = xs[t];
        let raw = match forced {
            Some(f) => {
                let row = f.row(t);
                let data = (0..batch).flat_map(|_| row.iter().copied()).collect();
                g.leaf(Tensor::new(vec![batch, m], data)?)
            }
            None => {
                let mut inputs = vec![x, prim.h];
                if let Some(states) = &backward_states {
                    let next = if t + 1 < n {
                        states[t + 1].h
                    } else {
                        bwd_zero.expect("bidirectional zero state")
                    };
                    inputs.push(next);
                }
                cells.gate_head.gates(g, &inputs)?
            }
        };
        let gates = match mask {
            Some(mask) => g.mul_col(raw, mask[t])?,
            None => raw,
        };

        let next = cells.gating.step(g, x, &prim)?;
        prim = match mask {
            Some(mask) => hold(g, &next, &prim, mask[t])?,
            None => next,
        };
        let h_prim = match &backward_states {
            Some(states) => g.concat_cols(&[prim.h, states[t].h])?,
            None => prim.h,
        };

        let (next, experts) = composite_step(g, &cells.aux, x, &comp, gates)?;
        comp = next;
        run.h_prim.push(h_prim);
        run.comp.push(comp);
        run.primaux.push(experts);
        run.gates.push(gates);
    }
    Ok(run)
}
