use serde::{Deserialize, Serialize};

use super::loss::fence_sum;
use crate::cells::GateTrace;
use crate::error::{Error, Result};
use crate::numeric::Scalar;
use crate::tasks::Language;

/// Accuracy and macro-averaged precision, recall and F1. Classes with no
/// predictions (or no gold items) score 0 on the undefined ratio.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub count: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_pairs(predicted: &[usize], gold: &[usize], num_classes: usize) -> Result<Self> {
        if predicted.len() != gold.len() {
            return Err(Error::dim("metrics", &[predicted.len()], &[gold.len()]));
        }
        if num_classes == 0 {
            return Err(Error::Contract("metrics over zero classes".into()));
        }
        let mut tp = vec![0usize; num_classes];
        let mut pred_count = vec![0usize; num_classes];
        let mut gold_count = vec![0usize; num_classes];
        for (&p, &y) in predicted.iter().zip(gold) {
            if p >= num_classes || y >= num_classes {
                return Err(Error::Data(format!("class {} outside {num_classes}", p.max(y))));
            }
            pred_count[p] += 1;
            gold_count[y] += 1;
            if p == y {
                tp[y] += 1;
            }
        }
        let mut precision = 0.0;
        let mut recall = 0.0;
        let mut f1 = 0.0;
        for c in 0..num_classes {
            let p = ratio(tp[c], pred_count[c]);
            let r = ratio(tp[c], gold_count[c]);
            precision += p;
            recall += r;
            if p + r > 0.0 {
                f1 += 2.0 * p * r / (p + r);
            }
        }
        let k = num_classes as f64;
        Ok(Self {
            accuracy: ratio(tp.iter().sum(), gold.len()),
            macro_precision: precision / k,
            macro_recall: recall / k,
            macro_f1: f1 / k,
            count: gold.len(),
        })
    }
}

/// Fraction of positions where the argmax over `(g[t, ·], skip[t])` names
/// the generating language's expert, with fractional credit on ties.
pub fn gate_agreement<T: Scalar>(traces: &[&GateTrace<T>], routing: &[Vec<Language>]) -> Result<f64> {
    if traces.len() != routing.len() {
        return Err(Error::dim("gate agreement", &[traces.len()], &[routing.len()]));
    }
    let mut credit = 0.0;
    let mut positions = 0usize;
    for (trace, truth) in traces.iter().zip(routing) {
        if trace.len() != truth.len() {
            return Err(Error::dim("gate agreement row", &[trace.len()], &[truth.len()]));
        }
        for (t, lang) in truth.iter().enumerate() {
            credit += trace.agreement(t, lang.expert());
            positions += 1;
        }
    }
    Ok(credit / positions.max(1) as f64)
}

/// Mean of `min(g, 1 − g)` over every position and gate of `traces`.
pub fn mean_fence<T: Scalar>(traces: &[&GateTrace<T>]) -> f64 {
    let total: f64 = traces.iter().map(|t| fence_sum(t)).sum();
    let count: usize = traces.iter().map(|t| t.len() * t.num_aux()).sum();
    total / count.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor64;

    #[test]
    fn perfect_predictions() {
        let m = Metrics::from_pairs(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!((m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_predictor_on_balanced_classes() {
        let gold = [0, 1, 2, 0, 1, 2];
        let m = Metrics::from_pairs(&[0; 6], &gold, 3).unwrap();
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.macro_recall - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hand_confusion_matrix() {
        // gold \ pred   0  1  2
        //   0           2  1  0
        //   1           1  3  0
        //   2           0  1  2
        let gold = [0, 0, 0, 1, 1, 1, 1, 2, 2, 2];
        let pred = [0, 0, 1, 0, 1, 1, 1, 1, 2, 2];
        let m = Metrics::from_pairs(&pred, &gold, 3).unwrap();
        let p = [2.0 / 3.0, 3.0 / 5.0, 1.0];
        let r = [2.0 / 3.0, 3.0 / 4.0, 2.0 / 3.0];
        let f: Vec<f64> = p.iter().zip(&r).map(|(p, r)| 2.0 * p * r / (p + r)).collect();
        assert!((m.accuracy - 0.7).abs() < 1e-15);
        assert!((m.macro_precision - p.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert!((m.macro_recall - r.iter().sum::<f64>() / 3.0).abs() < 1e-15);
        assert!((m.macro_f1 - f.iter().sum::<f64>() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn agreement_counts_skip_as_wrong() {
        let t = GateTrace::new(Tensor64::from_rows(&[vec![0.7, 0.1], vec![0.1, 0.2], vec![0.2, 0.6]]).unwrap())
            .unwrap();
        let a = gate_agreement(&[&t], &[vec![Language::A, Language::B, Language::B]]).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-15);
    }
}
