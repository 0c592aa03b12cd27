use std::fmt;

use crate::cells::GateTrace;
use crate::error::{Error, Result};
use crate::numeric::Scalar;

/// One exported position: 1-based index, token, gate values and skip.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub pos: usize,
    pub token: String,
    pub gates: Vec<f64>,
    pub skip: f64,
}

impl fmt::Display for TraceRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.pos, self.token)?;
        for g in &self.gates {
            write!(f, ", {g:.6}")?;
        }
        write!(f, ", {:.6}", self.skip)
    }
}

impl TraceRow {
    /// `pos,token,g1,…,gm,skip`; values are written so they parse back to
    /// the same `f64`.
    pub fn csv_fields(&self) -> Vec<String> {
        let mut out = vec![self.pos.to_string(), self.token.clone()];
        out.extend(self.gates.iter().map(f64::to_string));
        out.push(self.skip.to_string());
        out
    }
}

/// Rows for the unmasked positions of a trace. `mask`, when given, has one
/// entry per position; `false` drops the row.
pub fn export_gate_trace<T: Scalar>(
    trace: &GateTrace<T>,
    tokens: &[String],
    mask: Option<&[bool]>,
) -> Result<Vec<TraceRow>> {
    if tokens.len() != trace.len() || mask.is_some_and(|m| m.len() != trace.len()) {
        return Err(Error::Contract(format!(
            "trace of {} positions for {} tokens",
            trace.len(),
            tokens.len()
        )));
    }
    Ok((0..trace.len())
        .filter(|&t| mask.is_none_or(|m| m[t]))
        .map(|t| TraceRow {
            pos: t + 1,
            token: tokens[t].clone(),
            gates: trace.gates().row(t).iter().map(|g| g.as_f64()).collect(),
            skip: trace.skip().data()[t].as_f64(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor64;

    #[test]
    fn single_row_format() {
        let t = GateTrace::new(Tensor64::from_rows(&[vec![0.5, 0.25]]).unwrap()).unwrap();
        let rows = export_gate_trace(&t, &["tok".to_string()], None).unwrap();
        assert_eq!(rows[0].to_string(), "1, tok, 0.500000, 0.250000, 0.250000");
        assert_eq!(rows[0].csv_fields(), ["1", "tok", "0.5", "0.25", "0.25"]);
    }

    #[test]
    fn masked_rows_are_dropped() {
        let t = GateTrace::new(Tensor64::from_rows(&[vec![0.1], vec![0.0]]).unwrap()).unwrap();
        let toks = vec!["a".to_string(), "<pad>".to_string()];
        let rows = export_gate_trace(&t, &toks, Some(&[true, false])).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].skip + rows[0].gates[0] - 1.0).abs() < 1e-9);
        assert!(export_gate_trace(&t, &toks[..1], None).is_err());
    }
}
