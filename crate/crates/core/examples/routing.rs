//! Trains GIRNet and a single-LSTM tagger on synthetic code-switched data and
//! reports tagging accuracy and gate agreement with the generating language.
//!
//! `cargo run --release --example routing -- [seed] [lambda] [epochs]`

use std::time::Instant;

use girnet::model::{
    evaluate, gate_agreement, mean_fence, train, Baseline, BaselineConfig, BaselineKind, HeadKind, LossWeights,
    ModelConfig, TrainConfig,
};
use girnet::tasks::{gen_codeswitched_stream, gen_monolingual, Language, SyntheticTaskSpec};
use girnet::Girnet64;

fn main() -> girnet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).map(String::as_str);
    let seed: u64 = arg(0).map_or(Ok(0), str::parse).expect("seed");
    let lambda: f64 = arg(1).map_or(Ok(0.0), str::parse).expect("lambda");
    let epochs: usize = arg(2).map_or(Ok(15), str::parse).expect("epochs");

    let spec = SyntheticTaskSpec {
        seed,
        ..SyntheticTaskSpec::default()
    };
    let aux_a = gen_monolingual(&spec, Language::A, 4000)?;
    let aux_b = gen_monolingual(&spec, Language::B, 4000)?;
    let prim = gen_codeswitched_stream(&spec, 2000, "train")?;
    let test = gen_codeswitched_stream(&spec, 1000, "test")?;
    let routing = test.routing.clone().expect("synthetic routing");
    let cfg = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };

    let start = Instant::now();
    let mut model = Girnet64::new(ModelConfig::tagging(spec.vocab_size(), 2, 2), seed)?;
    let weights = LossWeights {
        lambda,
        ..LossWeights::uniform(2)
    };
    train(&mut model, &prim.examples, &[&aux_a.examples, &aux_b.examples], &weights, &cfg, |m, r| {
        let ev = evaluate(m, &test.examples, 2, 64)?;
        let traces = ev.traces(0);
        println!(
            "girnet   epoch {:2} loss {:.4} acc {:.4} agreement {:.4} fence {:.4} [{:.0?}]",
            r.epoch,
            r.loss.all,
            ev.metrics.accuracy,
            gate_agreement(&traces, &routing)?,
            mean_fence(&traces),
            start.elapsed()
        );
        Ok(())
    })?;

    let start = Instant::now();
    let mut base = Baseline::<f64>::new(
        BaselineConfig {
            kind: BaselineKind::Lstm(HeadKind::TokenTag),
            vocab_size: spec.vocab_size(),
            d_emb: 32,
            d: 64,
            classes: 2,
        },
        seed,
    )?;
    train(&mut base, &prim.examples, &[], &LossWeights::uniform(0), &cfg, |m, r| {
        let ev = evaluate(m, &test.examples, 2, 64)?;
        println!(
            "baseline epoch {:2} loss {:.4} acc {:.4} [{:.0?}]",
            r.epoch,
            r.loss.all,
            ev.metrics.accuracy,
            start.elapsed()
        );
        Ok(())
    })?;
    Ok(())
}
