//! LSTM steps, the gate head, the gated composite recurrence and sequence
//! runners.

mod gating;
mod lstm;
mod sequence;

pub use gating::{
    composite_step, gates_from_logits, GateHead, GateHeadParams, GateTrace, SIMPLEX_TOLERANCE,
};
pub use lstm::{lstm_step, LstmCell, LstmParams, StreamState, CANDIDATE, FORGET, INPUT, OUTPUT};
pub use sequence::{
    apply_mask, run_bilstm_sequence, run_girnet_sequence, run_lstm_sequence, GirnetCells, GirnetRun,
};
