use serde::{Deserialize, Serialize};

use crate::cells::GateTrace;
use crate::error::{Error, Result};
use crate::numeric::{Graph, Scalar, Var};

/// Auxiliary loss weights `α_j` and the gate activity weight `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub lambda: f64,
}

impl LossWeights {
    /// `α_j = 1`, `λ = 0`.
    pub fn uniform(num_aux: usize) -> Self {
        Self {
            alpha: vec![1.0; num_aux],
            lambda: 0.0,
        }
    }

    pub fn validate(&self, num_aux: usize) -> Result<()> {
        if self.alpha.len() != num_aux {
            return Err(Error::Config(format!(
                "{} alpha weights for {num_aux} auxiliary tasks",
                self.alpha.len()
            )));
        }
        if self.alpha.iter().chain([&self.lambda]).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Config("loss weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Loss nodes of one joint forward pass.
#[derive(Clone, Debug)]
pub struct LossVars {
    pub prim: Var,
    pub aux: Vec<Var>,
    pub reg: Var,
    pub all: Var,
}

/// Scalar values of [`LossVars`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub prim: f64,
    pub aux: Vec<f64>,
    pub reg: f64,
    pub all: f64,
}

impl LossReport {
    pub fn read<T: Scalar>(g: &Graph<T>, vars: &LossVars) -> Self {
        let item = |v: Var| g.value(v).item().as_f64();
        Self {
            prim: item(vars.prim),
            aux: vars.aux.iter().map(|&v| item(v)).collect(),
            reg: item(vars.reg),
            all: item(vars.all),
        }
    }

    /// `prim + Σ α_j·aux_j + reg` recomputed from the components.
    pub fn recombine(&self, weights: &LossWeights) -> f64 {
        self.prim + self.aux.iter().zip(&weights.alpha).map(|(l, a)| a * l).sum::<f64>() + self.reg
    }

    pub(crate) fn accumulate(&mut self, other: &LossReport) {
        if self.aux.len() < other.aux.len() {
            self.aux.resize(other.aux.len(), 0.0);
        }
        self.prim += other.prim;
        for (a, b) in self.aux.iter_mut().zip(&other.aux) {
            *a += b;
        }
        self.reg += other.reg;
        self.all += other.all;
    }

    pub(crate) fn scaled(&self, s: f64) -> Self {
        Self {
            prim: self.prim * s,
            aux: self.aux.iter().map(|a| a * s).collect(),
            reg: self.reg * s,
            all: self.all * s,
        }
    }
}

/// `λ·Σ_t Σ_j min(g[t, j], 1 − g[t, j])` for one sequence.
pub fn activity_reg<T: Scalar>(trace: &GateTrace<T>, lambda: f64) -> f64 {
    lambda * fence_sum(trace)
}

/// `Σ min(g, 1 − g)` over a trace.
pub fn fence_sum<T: Scalar>(trace: &GateTrace<T>) -> f64 {
    trace
        .gates()
        .data()
        .iter()
        .map(|g| {
            let g = g.as_f64();
            g.min(1.0 - g)
        })
        .sum()
}

/// Graph form of the activity penalty over per-step `[B×m]` gate nodes,
/// summed over steps and gates and averaged over the `batch` rows.
pub(crate) fn activity_reg_graph<T: Scalar>(
    g: &mut Graph<T>,
    gates: &[Var],
    lambda: f64,
    batch: usize,
) -> Result<Var> {
    let all = g.concat_rows(gates)?;
    let other = g.affine(all, -T::one(), T::one());
    let fence = g.min(all, other)?;
    let total = g.sum(fence);
    Ok(g.scale(total, T::lit(lambda / batch as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor64;

    fn trace(rows: &[Vec<f64>]) -> GateTrace<f64> {
        GateTrace::new(Tensor64::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn regularizer_examples() {
        assert_eq!(activity_reg(&trace(&[vec![0.5]]), 1.0), 0.5);
        assert!((activity_reg(&trace(&[vec![0.9, 0.1]]), 2.0) - 0.4).abs() < 1e-15);
        assert_eq!(activity_reg(&trace(&[vec![1.0, 0.0], vec![0.0, 0.0]]), 3.0), 0.0);
    }

    #[test]
    fn graph_form_matches_value_form() {
        let rows = [vec![0.2, 0.7], vec![0.05, 0.3]];
        let mut g = Graph::new();
        let a = g.leaf(Tensor64::from_rows(&rows[..1]).unwrap());
        let b = g.leaf(Tensor64::from_rows(&rows[1..]).unwrap());
        let r = activity_reg_graph(&mut g, &[a, b], 0.5, 1).unwrap();
        let want = activity_reg(&trace(&rows), 0.5);
        assert!((g.value(r).item() - want).abs() < 1e-15);
    }

    #[test]
    fn recombination() {
        let report = LossReport {
            prim: 1.0,
            aux: vec![0.5, 0.2],
            reg: 0.0,
            all: 1.9,
        };
        let w = LossWeights {
            alpha: vec![1.0, 2.0],
            lambda: 0.0,
        };
        assert!((report.recombine(&w) - 1.9).abs() < 1e-15);
    }

    #[test]
    fn weight_validation() {
        assert!(LossWeights::uniform(2).validate(3).is_err());
        let neg = LossWeights {
            alpha: vec![-1.0],
            lambda: 0.0,
        };
        assert!(neg.validate(1).is_err());
    }
}
