use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::SequenceBatch;
use super::loss::{LossReport, LossVars, LossWeights};
use super::metrics::Metrics;
use super::HeadKind;
use crate::cells::GateTrace;
use crate::error::{Error, Result};
use crate::numeric::{Adam, AdamConfig, Graph, ParamStore, Scalar};
use crate::tasks::{stream_seed, Example, Label};

/// Per-row outputs of a model: predicted labels (one for a sequence, one per
/// token for tagging) and, for gated models, one gate trace per pathway
/// (`None` for a pathway with no positions in that row).
#[derive(Clone, Debug)]
pub struct Predictions<T> {
    pub labels: Vec<Vec<usize>>,
    pub traces: Vec<Vec<Option<GateTrace<T>>>>,
}

/// Anything the trainer can fit: GIRNet or a single-task baseline.
pub trait SequenceModel<T: Scalar> {
    fn store(&self) -> &ParamStore<T>;
    fn store_mut(&mut self) -> &mut ParamStore<T>;
    /// Number of auxiliary batches [`Self::losses`] expects.
    fn num_aux(&self) -> usize;
    fn task_head(&self) -> HeadKind;
    fn losses(
        &self,
        g: &mut Graph<T>,
        prim: &SequenceBatch,
        aux: &[SequenceBatch],
        weights: &LossWeights,
    ) -> Result<LossVars>;
    fn predict(&self, batch: &SequenceBatch) -> Result<Predictions<T>>;
}

/// One optimizer step on the joint loss of one primary batch and one batch
/// per auxiliary task.
pub fn joint_step<T: Scalar, M: SequenceModel<T>>(
    model: &mut M,
    opt: &mut Adam<T>,
    prim: &SequenceBatch,
    aux: &[SequenceBatch],
    weights: &LossWeights,
) -> Result<LossReport> {
    let mut g = Graph::new();
    let vars = model.losses(&mut g, prim, aux, weights)?;
    let report = LossReport::read(&g, &vars);
    if !report.all.is_finite() {
        return Err(Error::NonFinite {
            step: opt.step_count() as usize + 1,
        });
    }
    g.backward(vars.all)?;
    g.accumulate_into(model.store_mut())?;
    opt.step(model.store_mut());
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            batch_size: 14,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// Mean losses of one epoch (epoch 0: the untrained model).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub steps: usize,
    pub loss: LossReport,
}

/// Shuffled pass over `0..len`, reshuffled each time it runs out.
struct Cycle {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Cycle {
    fn new(len: usize, seed: u64) -> Self {
        let mut c = Self {
            order: (0..len).collect(),
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        c.order.shuffle(&mut c.rng);
        c
    }

    fn take(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

fn batch_of(examples: &[Example], idx: &[usize]) -> Result<SequenceBatch> {
    let rows: Vec<&Example> = idx.iter().map(|&i| &examples[i]).collect();
    SequenceBatch::from_examples(&rows)
}

fn check_sets<T: Scalar, M: SequenceModel<T>>(model: &M, prim: &[Example], aux: &[&[Example]]) -> Result<()> {
    if prim.is_empty() {
        return Err(Error::Data("empty primary training set".into()));
    }
    if aux.len() != model.num_aux() {
        return Err(Error::Config(format!(
            "{} auxiliary datasets for {} auxiliary tasks",
            aux.len(),
            model.num_aux()
        )));
    }
    if aux.iter().any(|a| a.is_empty()) {
        return Err(Error::Data("empty auxiliary training set".into()));
    }
    Ok(())
}

/// Mean losses over the primary set in file order, each primary batch paired
/// with the next batch of every auxiliary set in file order. No update.
pub fn mean_loss<T: Scalar, M: SequenceModel<T>>(
    model: &M,
    prim: &[Example],
    aux: &[&[Example]],
    weights: &LossWeights,
    batch_size: usize,
) -> Result<LossReport> {
    check_sets(model, prim, aux)?;
    let mut total = LossReport::default();
    let mut cursors = vec![0usize; aux.len()];
    let mut batches = 0;
    for chunk in (0..prim.len()).collect::<Vec<_>>().chunks(batch_size) {
        let pb = batch_of(prim, chunk)?;
        let mut abs = Vec::with_capacity(aux.len());
        for (set, cur) in aux.iter().zip(cursors.iter_mut()) {
            let idx: Vec<usize> = (0..batch_size).map(|k| (*cur + k) % set.len()).collect();
            *cur = (*cur + batch_size) % set.len();
            abs.push(batch_of(set, &idx)?);
        }
        let mut g = Graph::new();
        let vars = model.losses(&mut g, &pb, &abs, weights)?;
        total.accumulate(&LossReport::read(&g, &vars));
        batches += 1;
    }
    Ok(total.scaled(1.0 / batches as f64))
}

/// Joint training. An epoch is one shuffled pass over the primary set; each
/// step pairs a primary batch with one batch from every auxiliary set, whose
/// own shuffled orders cycle independently. `on_epoch` sees the model after
/// every epoch, and once before training with the untrained losses.
pub fn train<T, M, F>(
    model: &mut M,
    prim: &[Example],
    aux: &[&[Example]],
    weights: &LossWeights,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<()>
where
    T: Scalar,
    M: SequenceModel<T>,
    F: FnMut(&M, &EpochReport) -> Result<()>,
{
    check_sets(model, prim, aux)?;
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let initial = mean_loss(model, prim, aux, weights, config.batch_size)?;
    on_epoch(
        model,
        &EpochReport {
            epoch: 0,
            steps: 0,
            loss: initial,
        },
    )?;

    let mut opt = Adam::new(config.adam);
    let mut prim_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, "prim-order"));
    let mut aux_cycles: Vec<Cycle> = aux
        .iter()
        .enumerate()
        .map(|(j, set)| Cycle::new(set.len(), stream_seed(config.seed, &format!("aux-order-{j}"))))
        .collect();
    let mut order: Vec<usize> = (0..prim.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut prim_rng);
        let mut total = LossReport::default();
        let mut steps = 0;
        for chunk in order.chunks(config.batch_size) {
            let pb = batch_of(prim, chunk)?;
            let abs = aux
                .iter()
                .zip(aux_cycles.iter_mut())
                .map(|(set, cyc)| batch_of(set, &cyc.take(config.batch_size)))
                .collect::<Result<Vec<_>>>()?;
            let report = joint_step(model, &mut opt, &pb, &abs, weights)?;
            total.accumulate(&report);
            steps += 1;
        }
        on_epoch(
            model,
            &EpochReport {
                epoch,
                steps,
                loss: total.scaled(1.0 / steps as f64),
            },
        )?;
    }
    Ok(())
}

/// Metrics plus the raw per-row outputs of an evaluation pass.
#[derive(Clone, Debug)]
pub struct Evaluation<T> {
    pub metrics: Metrics,
    pub predictions: Predictions<T>,
}

impl<T: Scalar> Evaluation<T> {
    /// Traces of pathway `k` for rows where it is non-empty.
    pub fn traces(&self, k: usize) -> Vec<&GateTrace<T>> {
        self.predictions
            .traces
            .iter()
            .filter_map(|row| row.get(k).and_then(Option::as_ref))
            .collect()
    }
}

/// Predicts `examples` in order, in batches, and scores the predictions;
/// token-level metrics cover real (unpadded) positions only.
pub fn evaluate<T: Scalar, M: SequenceModel<T>>(
    model: &M,
    examples: &[Example],
    num_classes: usize,
    batch_size: usize,
) -> Result<Evaluation<T>> {
    if examples.is_empty() {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    let mut predictions = Predictions {
        labels: Vec::with_capacity(examples.len()),
        traces: Vec::with_capacity(examples.len()),
    };
    let idx: Vec<usize> = (0..examples.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let p = model.predict(&batch_of(examples, chunk)?)?;
        predictions.labels.extend(p.labels);
        predictions.traces.extend(p.traces);
    }
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for (e, p) in examples.iter().zip(&predictions.labels) {
        match &e.label {
            Label::Class(c) => gold.push(*c),
            Label::Tags(tags) => gold.extend_from_slice(tags),
        }
        pred.extend_from_slice(p);
    }
    let metrics = Metrics::from_pairs(&pred, &gold, num_classes)?;
    Ok(Evaluation { metrics, predictions })
}
