//! The tiny model used by `gradcheck`.

use crate::error::Result;
use crate::model::{Girnet, LossWeights, ModelConfig, SequenceBatch, SequenceModel};
use crate::numeric::{grad_check_with, Fault, GradCheckReport, Graph};
use crate::tasks::{gen_codeswitched, gen_monolingual, Example, Language, SyntheticTaskSpec, TaskKind};

pub const EPSILON: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// V=20, d_emb=4, d=4, d′=3, m=2, sequences of 5 tokens, batches of 2 and
/// λ=0.01.
pub struct Fixture {
    pub model: Girnet<f64>,
    pub prim: SequenceBatch,
    pub aux: Vec<SequenceBatch>,
    pub weights: LossWeights,
}

fn batch(examples: &[Example]) -> Result<SequenceBatch> {
    let rows: Vec<&Example> = examples.iter().collect();
    SequenceBatch::from_examples(&rows)
}

impl Fixture {
    pub fn new(seed: u64) -> Result<Self> {
        let spec = SyntheticTaskSpec {
            vocab_a: 9,
            vocab_b: 9,
            len_min: 5,
            len_max: 5,
            p_switch: 0.3,
            kind: TaskKind::Tag,
            seed,
        };
        let config = ModelConfig {
            d_emb: 4,
            d: 4,
            d_gate: 3,
            ..ModelConfig::tagging(spec.vocab_size(), 2, 2)
        };
        Ok(Self {
            model: Girnet::new(config, seed)?,
            prim: batch(&gen_codeswitched(&spec, 2)?.examples)?,
            aux: vec![
                batch(&gen_monolingual(&spec, Language::A, 2)?.examples)?,
                batch(&gen_monolingual(&spec, Language::B, 2)?.examples)?,
            ],
            weights: LossWeights {
                lambda: 0.01,
                ..LossWeights::uniform(2)
            },
        })
    }

    /// Central differences against the joint loss, optionally with a broken
    /// backward rule in the analytic pass.
    pub fn check(&self, fault: Option<Fault>) -> Result<GradCheckReport> {
        let config = self.model.config().clone();
        let make_graph = || fault.map_or_else(Graph::new, Graph::with_fault);
        grad_check_with(
            make_graph,
            |g, store| {
                let model = Girnet::from_store(config.clone(), store.clone())?;
                Ok(model.losses(g, &self.prim, &self.aux, &self.weights)?.all)
            },
            self.model.store(),
            EPSILON,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_passes_and_fault_is_caught() {
        let f = Fixture::new(0).unwrap();
        assert_eq!(f.model.config().vocab_size, 20);
        let ok = f.check(None).unwrap();
        assert!(ok.max_rel_error < TOLERANCE, "{ok:?}");
        let bad = f.check(Some(Fault::SigmoidGrad)).unwrap();
        assert!(bad.max_rel_error > TOLERANCE, "{bad:?}");
    }
}
