//! Single-task reference models trained on the primary data only.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::batch::SequenceBatch;
use super::girnet::{check_layout, decode};
use super::layers::{embed_steps, masked_mean, Linear};
use super::loss::{LossVars, LossWeights};
use super::{HeadKind, Predictions, SequenceModel};
use crate::cells::{run_lstm_sequence, LstmCell, LstmParams};
use crate::error::{Error, Result};
use crate::numeric::{init_param, Graph, InitScheme, ParamStore, Scalar, Var};
use crate::tasks::stream_seed;

/// Which reference architecture to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaselineKind {
    /// Embeddings, one LSTM of width `d`, and a head of the given kind.
    Lstm(HeadKind),
    /// Mean of the embeddings fed to a linear classifier; blind to order and
    /// to any target span.
    MeanPool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub vocab_size: usize,
    pub d_emb: usize,
    pub d: usize,
    pub classes: usize,
}

#[derive(Clone, Debug)]
pub struct Baseline<T> {
    config: BaselineConfig,
    store: ParamStore<T>,
}

impl<T: Scalar> Baseline<T> {
    pub fn new(config: BaselineConfig, seed: u64) -> Result<Self> {
        if config.classes < 2 || config.vocab_size < 3 || config.d_emb == 0 || config.d == 0 {
            return Err(Error::Config(format!("bad baseline configuration {config:?}")));
        }
        if config.kind == BaselineKind::Lstm(HeadKind::TargetSplit) {
            return Err(Error::Config("the LSTM baseline has no target-split head".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "init"));
        let mut store = ParamStore::new(seed);
        store.insert(
            "embed",
            init_param(&[config.vocab_size, config.d_emb], InitScheme::ScaledUniform, &mut rng)?,
        )?;
        let width = match config.kind {
            BaselineKind::Lstm(_) => {
                LstmParams::init(config.d_emb, config.d, &mut rng)?.register(&mut store, "lstm")?;
                config.d
            }
            BaselineKind::MeanPool => config.d_emb,
        };
        Linear::init(&mut store, "head", config.classes, width, &mut rng)?;
        Ok(Self { config, store })
    }

    pub fn from_store(config: BaselineConfig, store: ParamStore<T>) -> Result<Self> {
        let reference = Self::new(config, 0)?;
        check_layout(&reference.store, &store)?;
        Ok(Self {
            config: reference.config,
            store,
        })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn forward(&self, g: &mut Graph<T>, batch: &SequenceBatch) -> Result<(Var, Var)> {
        if let Some(t) = batch.tokens.iter().flatten().find(|&&t| t >= self.config.vocab_size) {
            return Err(Error::Data(format!("token id {t} outside vocabulary")));
        }
        let table = g.param(&self.store, "embed")?;
        let xs = embed_steps(g, table, (0..batch.max_len()).map(|t| batch.step_ids(t)).collect())?;
        let masks = batch.step_masks(g)?;
        let head = Linear::bind(g, &self.store, "head")?;
        match self.config.kind {
            BaselineKind::MeanPool => {
                let pooled = masked_mean(g, &xs, masks.as_deref(), &batch.lengths)?;
                let logits = head.apply(g, pooled)?;
                let loss = g.cross_entropy(logits, &batch.classes()?)?;
                Ok((logits, loss))
            }
            BaselineKind::Lstm(kind) => {
                let cell = LstmCell::bind(g, &self.store, "lstm")?;
                let hs: Vec<Var> = run_lstm_sequence(g, &cell, &xs, masks.as_deref(), false)?
                    .iter()
                    .map(|s| s.h)
                    .collect();
                let n = hs.len();
                let (logits, targets) = match kind {
                    HeadKind::ClassifyLast => (head.apply(g, hs[n - 1])?, batch.classes()?),
                    HeadKind::ClassifyMeanPool => {
                        let pooled = masked_mean(g, &hs, masks.as_deref(), &batch.lengths)?;
                        (head.apply(g, pooled)?, batch.classes()?)
                    }
                    HeadKind::TokenTag => {
                        let stacked = g.concat_rows(&hs)?;
                        (head.apply(g, stacked)?, batch.stacked_tags()?)
                    }
                    HeadKind::TargetSplit => unreachable!("rejected at construction"),
                };
                let loss = g.cross_entropy(logits, &targets)?;
                Ok((logits, loss))
            }
        }
    }

    fn head_kind(&self) -> HeadKind {
        match self.config.kind {
            BaselineKind::Lstm(k) => k,
            BaselineKind::MeanPool => HeadKind::ClassifyMeanPool,
        }
    }
}

impl<T: Scalar> SequenceModel<T> for Baseline<T> {
    fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    fn num_aux(&self) -> usize {
        0
    }

    fn task_head(&self) -> HeadKind {
        self.head_kind()
    }

    fn losses(
        &self,
        g: &mut Graph<T>,
        prim: &SequenceBatch,
        aux: &[SequenceBatch],
        _weights: &LossWeights,
    ) -> Result<LossVars> {
        if !aux.is_empty() {
            return Err(Error::Config("baselines take no auxiliary batches".into()));
        }
        let (_, loss) = self.forward(g, prim)?;
        let reg = g.leaf(crate::numeric::Tensor::scalar(T::zero()));
        Ok(LossVars {
            prim: loss,
            aux: Vec::new(),
            reg,
            all: loss,
        })
    }

    fn predict(&self, batch: &SequenceBatch) -> Result<Predictions<T>> {
        let mut g = Graph::new();
        let (logits, _) = self.forward(&mut g, batch)?;
        Ok(Predictions {
            labels: decode(g.value(logits), self.head_kind(), batch),
            traces: vec![Vec::new(); batch.batch_size()],
        })
    }
}
