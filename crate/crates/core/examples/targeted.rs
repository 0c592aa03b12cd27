//! Trains the target-split GIRNet head on synthetic targeted sentiment and
//! compares it with a whole-sequence mean-pool classifier.
//!
//! `cargo run --release --example targeted -- [seed] [epochs]`

use std::time::Instant;

use girnet::model::{evaluate, train, Baseline, BaselineConfig, BaselineKind, HeadKind, LossWeights, ModelConfig, TrainConfig};
use girnet::tasks::{gen_passages, gen_targeted, TargetedLayout, TaskKind, SyntheticTaskSpec};
use girnet::Girnet64;

fn main() -> girnet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize| args.get(i).map(String::as_str);
    let seed: u64 = arg(0).map_or(Ok(0), str::parse).expect("seed");
    let epochs: usize = arg(1).map_or(Ok(15), str::parse).expect("epochs");

    let layout = TargetedLayout::new(SyntheticTaskSpec {
        seed,
        kind: TaskKind::Classify,
        ..SyntheticTaskSpec::default()
    })?;
    let passages = gen_passages(&layout, 4000)?;
    let all = gen_targeted(&layout, 3000)?;
    let (prim, test) = all.examples.split_at(2000);
    let cfg = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };

    let start = Instant::now();
    let config = ModelConfig {
        prim_head: HeadKind::TargetSplit,
        aux_head: HeadKind::ClassifyLast,
        bidirectional_gating: true,
        ..ModelConfig::tagging(layout.vocab_size(), 1, 2)
    };
    let mut model = Girnet64::new(config, seed)?;
    train(&mut model, prim, &[&passages.examples], &LossWeights::uniform(1), &cfg, |m, r| {
        let ev = evaluate(m, test, 2, 64)?;
        println!(
            "girnet   epoch {:2} loss {:.4} acc {:.4} [{:.0?}]",
            r.epoch,
            r.loss.all,
            ev.metrics.accuracy,
            start.elapsed()
        );
        Ok(())
    })?;

    let start = Instant::now();
    let mut base = Baseline::<f64>::new(
        BaselineConfig {
            kind: BaselineKind::MeanPool,
            vocab_size: layout.vocab_size(),
            d_emb: 32,
            d: 64,
            classes: 2,
        },
        seed,
    )?;
    train(&mut base, prim, &[], &LossWeights::uniform(0), &cfg, |m, r| {
        let ev = evaluate(m, test, 2, 64)?;
        println!(
            "meanpool epoch {:2} loss {:.4} acc {:.4} [{:.0?}]",
            r.epoch,
            r.loss.all,
            ev.metrics.accuracy,
            start.elapsed()
        );
        Ok(())
    })?;
    Ok(())
}
