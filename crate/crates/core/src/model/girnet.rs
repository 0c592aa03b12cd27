use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::batch::{SequenceBatch, SideBatch};
use super::layers::{argmax_rows, embed_steps, masked_mean, Linear};
use super::loss::{activity_reg_graph, LossVars, LossWeights};
use super::{HeadKind, ModelConfig, Predictions, SequenceModel};
use crate::cells::{run_girnet_sequence, run_lstm_sequence, GateHead, GateHeadParams, GateTrace, GirnetCells, GirnetRun, LstmCell, LstmParams};
use crate::error::{Error, Result};
use crate::numeric::{init_param, Graph, InitScheme, ParamStore, Scalar, Tensor, Var};
use crate::tasks::stream_seed;

/// Logits and mean cross-entropy of one head.
#[derive(Clone, Copy, Debug)]
pub struct HeadOutput {
    pub logits: Var,
    pub loss: Var,
}

/// One gated pathway of a primary forward pass.
#[derive(Clone, Debug)]
pub struct PathwayOutput {
    pub run: GirnetRun,
    /// Unmasked positions of each batch row.
    pub valid: Vec<Range<usize>>,
}

impl PathwayOutput {
    /// Gate trace of batch row `row` over its unmasked positions, or `None`
    /// when the row has none (an empty target side).
    pub fn trace<T: Scalar>(&self, g: &Graph<T>, row: usize) -> Result<Option<GateTrace<T>>> {
        let range = self.valid[row].clone();
        if range.is_empty() {
            return Ok(None);
        }
        GateTrace::from_steps(g, &self.run.gates[range], row).map(Some)
    }
}

#[derive(Clone, Debug)]
pub struct PrimOutput {
    pub logits: Var,
    pub loss: Var,
    /// One pathway, or left and right for the target-split head.
    pub pathways: Vec<PathwayOutput>,
}

impl PrimOutput {
    pub fn gate_vars(&self) -> Vec<Var> {
        self.pathways.iter().flat_map(|p| p.run.gates.iter().copied()).collect()
    }
}

/// A gated interleaved recurrent network: `m` auxiliary LSTMs with their own
/// heads, a gating LSTM and gate head over the primary input, and a primary
/// head over the gating and composite states.
///
/// Parameter paths: `embed`, `gate/{fwd,bwd,head}`, `aux/{j}/{cell,head}`,
/// `prim/head`. The target-split variant has `left/gate/…` and
/// `right/gate/…` pathways and `aux/{j}/{left,right}` cells.
#[derive(Clone, Debug)]
pub struct Girnet<T> {
    config: ModelConfig,
    store: ParamStore<T>,
}

fn split(config: &ModelConfig) -> bool {
    config.prim_head == HeadKind::TargetSplit
}

fn sides(config: &ModelConfig) -> &'static [&'static str] {
    if split(config) {
        &["left", "right"]
    } else {
        &[""]
    }
}

fn gate_prefix(side: &str) -> String {
    if side.is_empty() {
        "gate".to_string()
    } else {
        format!("{side}/gate")
    }
}

fn aux_cell_name(side: &str, j: usize) -> String {
    if side.is_empty() {
        format!("aux/{j}/cell")
    } else {
        format!("aux/{j}/{side}")
    }
}

impl<T: Scalar> Girnet<T> {
    /// Freshly initialized model; all randomness comes from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "init"));
        let mut store = ParamStore::new(seed);
        let c = &config;
        store.insert("embed", init_param(&[c.vocab_size, c.d_emb], InitScheme::ScaledUniform, &mut rng)?)?;
        for side in sides(c) {
            let prefix = gate_prefix(side);
            LstmParams::init(c.d_emb, c.d_gate, &mut rng)?.register(&mut store, &format!("{prefix}/fwd"))?;
            if c.bidirectional_gating {
                LstmParams::init(c.d_emb, c.d_gate, &mut rng)?.register(&mut store, &format!("{prefix}/bwd"))?;
            }
            GateHeadParams::init(c.num_aux, c.d_emb + c.gate_width(), &mut rng)?
                .register(&mut store, &format!("{prefix}/head"))?;
        }
        for j in 0..c.num_aux {
            for side in sides(c) {
                LstmParams::init(c.d_emb, c.d, &mut rng)?.register(&mut store, &aux_cell_name(side, j))?;
            }
            let width = if split(c) { 2 * c.d } else { c.d };
            Linear::init(&mut store, &format!("aux/{j}/head"), c.aux_classes(j), width, &mut rng)?;
        }
        let prim_width = if split(c) { 2 * c.d } else { c.gate_width() + c.d };
        Linear::init(&mut store, "prim/head", c.prim_classes, prim_width, &mut rng)?;
        Ok(Self { config, store })
    }

    /// Wraps existing parameters after checking them against `config`.
    pub fn from_store(config: ModelConfig, store: ParamStore<T>) -> Result<Self> {
        let reference = Self::new(config, 0)?;
        check_layout(&reference.store, &store)?;
        Ok(Self {
            config: reference.config,
            store,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn cells(&self, g: &mut Graph<T>, side: &str) -> Result<GirnetCells> {
        let prefix = gate_prefix(side);
        let gating = LstmCell::bind(g, &self.store, &format!("{prefix}/fwd"))?;
        let gating_bwd = if self.config.bidirectional_gating {
            Some(LstmCell::bind(g, &self.store, &format!("{prefix}/bwd"))?)
        } else {
            None
        };
        let gate_head = GateHead::bind(g, &self.store, &format!("{prefix}/head"))?;
        let aux = (0..self.config.num_aux)
            .map(|j| LstmCell::bind(g, &self.store, &aux_cell_name(side, j)))
            .collect::<Result<_>>()?;
        Ok(GirnetCells {
            gating,
            gating_bwd,
            gate_head,
            aux,
        })
    }

    fn check_vocab(&self, tokens: &[Vec<usize>]) -> Result<()> {
        match tokens.iter().flatten().find(|&&t| t >= self.config.vocab_size) {
            Some(t) => Err(Error::Data(format!(
                "token id {t} outside vocabulary of {}",
                self.config.vocab_size
            ))),
            None => Ok(()),
        }
    }

    /// Auxiliary task `j` on its own data: the auxiliary cell as a plain LSTM
    /// (or, in the target-split variant, its left and right cells
    /// concatenated per token), then auxiliary head `j`.
    pub fn forward_aux(&self, g: &mut Graph<T>, j: usize, batch: &SequenceBatch) -> Result<HeadOutput> {
        if j >= self.config.num_aux {
            return Err(Error::Config(format!("no auxiliary task {j}")));
        }
        self.check_vocab(&batch.tokens)?;
        let table = g.param(&self.store, "embed")?;
        let xs = embed_steps(g, table, (0..batch.max_len()).map(|t| batch.step_ids(t)).collect())?;
        let masks = batch.step_masks(g)?;
        let head = Linear::bind(g, &self.store, &format!("aux/{j}/head"))?;

        let states: Vec<Var> = if split(&self.config) {
            let left = LstmCell::bind(g, &self.store, &aux_cell_name("left", j))?;
            let right = LstmCell::bind(g, &self.store, &aux_cell_name("right", j))?;
            let l = run_lstm_sequence(g, &left, &xs, masks.as_deref(), false)?;
            let r = run_lstm_sequence(g, &right, &xs, masks.as_deref(), true)?;
            l.iter()
                .zip(&r)
                .map(|(a, b)| g.concat_cols(&[a.h, b.h]))
                .collect::<Result<_>>()?
        } else {
            let cell = LstmCell::bind(g, &self.store, &aux_cell_name("", j))?;
            run_lstm_sequence(g, &cell, &xs, masks.as_deref(), false)?
                .iter()
                .map(|s| s.h)
                .collect()
        };
        let kind = if split(&self.config) {
            HeadKind::ClassifyMeanPool
        } else {
            self.config.aux_head
        };
        classify_states(g, &head, kind, &[&states], masks.as_deref(), batch)
    }

    /// Primary task: gating pathway plus composite recurrence, then the
    /// primary head.
    pub fn forward_prim(&self, g: &mut Graph<T>, batch: &SequenceBatch) -> Result<PrimOutput> {
        self.forward_prim_forced(g, batch, None)
    }

    /// [`Self::forward_prim`] with the gate head replaced by fixed `[n×m]`
    /// gates (single-pathway heads only).
    pub fn forward_prim_forced(
        &self,
        g: &mut Graph<T>,
        batch: &SequenceBatch,
        forced: Option<&Tensor<T>>,
    ) -> Result<PrimOutput> {
        self.check_vocab(&batch.tokens)?;
        if split(&self.config) {
            if forced.is_some() {
                return Err(Error::Config("forced gates are not supported by the target-split head".into()));
            }
            return self.forward_target_split(g, batch);
        }
        let table = g.param(&self.store, "embed")?;
        let xs = embed_steps(g, table, (0..batch.max_len()).map(|t| batch.step_ids(t)).collect())?;
        let masks = batch.step_masks(g)?;
        let cells = self.cells(g, "")?;
        let run = run_girnet_sequence(g, &cells, &xs, masks.as_deref(), forced)?;
        let head = Linear::bind(g, &self.store, "prim/head")?;
        let comp: Vec<Var> = run.comp.iter().map(|s| s.h).collect();
        let out = classify_states(g, &head, self.config.prim_head, &[&run.h_prim, &comp], masks.as_deref(), batch)?;
        Ok(PrimOutput {
            logits: out.logits,
            loss: out.loss,
            pathways: vec![PathwayOutput {
                valid: batch.lengths.iter().map(|&l| 0..l).collect(),
                run,
            }],
        })
    }

    /// Target-split head: the context left of each target runs forward
    /// through the left pathway, the context right of it runs backward
    /// through the right pathway. Each side is pooled as `Σ_t ĝ_t·h_comp_t`
    /// (`ĝ_t = Σ_j g_t[j]`); the two pools are concatenated and classified.
    pub fn forward_target_split(&self, g: &mut Graph<T>, batch: &SequenceBatch) -> Result<PrimOutput> {
        if !split(&self.config) {
            return Err(Error::Config("model was not built with a target-split head".into()));
        }
        let (left, right) = batch.split_at_targets()?;
        let table = g.param(&self.store, "embed")?;
        let mut pools = Vec::with_capacity(2);
        let mut pathways = Vec::with_capacity(2);
        for (side, data) in [("left", &left), ("right", &right)] {
            let (pool, pathway) = self.side_pool(g, table, side, data)?;
            pools.push(pool);
            pathways.push(pathway);
        }
        let features = g.concat_cols(&pools)?;
        let head = Linear::bind(g, &self.store, "prim/head")?;
        let logits = head.apply(g, features)?;
        let loss = g.cross_entropy(logits, &batch.classes()?)?;
        Ok(PrimOutput { logits, loss, pathways })
    }

    fn side_pool(&self, g: &mut Graph<T>, table: Var, side: &str, data: &SideBatch) -> Result<(Var, PathwayOutput)> {
        let xs = embed_steps(g, table, (0..data.len()).map(|t| data.step_ids(t)).collect())?;
        let masks = data.step_masks(g)?;
        let cells = self.cells(g, side)?;
        let run = run_girnet_sequence(g, &cells, &xs, Some(&masks), None)?;
        let mut terms = Vec::with_capacity(data.len());
        for (state, &gates) in run.comp.iter().zip(&run.gates) {
            let weight = if self.config.num_aux == 1 {
                gates
            } else {
                g.sum_cols(gates)?
            };
            terms.push(g.mul_col(state.h, weight)?);
        }
        let pool = g.add_all(&terms)?;
        let valid = data
            .mask
            .iter()
            .map(|row| {
                let start = row.iter().position(|&m| m).unwrap_or(row.len());
                start..row.len()
            })
            .collect();
        Ok((pool, PathwayOutput { run, valid }))
    }
}

/// Classification or tagging logits from state streams concatenated per
/// position.
fn classify_states<T: Scalar>(
    g: &mut Graph<T>,
    head: &Linear,
    kind: HeadKind,
    streams: &[&[Var]],
    masks: Option<&[Var]>,
    batch: &SequenceBatch,
) -> Result<HeadOutput> {
    let n = batch.max_len();
    match kind {
        HeadKind::ClassifyLast => {
            let last: Vec<Var> = streams.iter().map(|s| s[n - 1]).collect();
            let features = g.concat_cols(&last)?;
            let logits = head.apply(g, features)?;
            let loss = g.cross_entropy(logits, &batch.classes()?)?;
            Ok(HeadOutput { logits, loss })
        }
        HeadKind::ClassifyMeanPool => {
            let pooled = streams
                .iter()
                .map(|s| masked_mean(g, s, masks, &batch.lengths))
                .collect::<Result<Vec<_>>>()?;
            let features = g.concat_cols(&pooled)?;
            let logits = head.apply(g, features)?;
            let loss = g.cross_entropy(logits, &batch.classes()?)?;
            Ok(HeadOutput { logits, loss })
        }
        HeadKind::TokenTag => {
            let per_step = (0..n)
                .map(|t| {
                    let parts: Vec<Var> = streams.iter().map(|s| s[t]).collect();
                    g.concat_cols(&parts)
                })
                .collect::<Result<Vec<_>>>()?;
            let features = g.concat_rows(&per_step)?;
            let logits = head.apply(g, features)?;
            let loss = g.cross_entropy(logits, &batch.stacked_tags()?)?;
            Ok(HeadOutput { logits, loss })
        }
        HeadKind::TargetSplit => Err(Error::Config("target-split features are built by the model".into())),
    }
}

/// Reads predictions per row from logits laid out by [`classify_states`].
pub(crate) fn decode<T: Scalar>(logits: &Tensor<T>, kind: HeadKind, batch: &SequenceBatch) -> Vec<Vec<usize>> {
    let best = argmax_rows(logits);
    match kind {
        HeadKind::TokenTag => {
            let b = batch.batch_size();
            batch
                .lengths
                .iter()
                .enumerate()
                .map(|(row, &len)| (0..len).map(|t| best[t * b + row]).collect())
                .collect()
        }
        _ => best.into_iter().map(|c| vec![c]).collect(),
    }
}

pub(crate) fn check_layout<T: Scalar>(want: &ParamStore<T>, got: &ParamStore<T>) -> Result<()> {
    for (name, p) in want.iter() {
        match got.value(name) {
            None => return Err(Error::Checkpoint(format!("missing parameter '{name}'"))),
            Some(v) if v.shape() != p.value.shape() => {
                return Err(Error::Checkpoint(format!(
                    "parameter '{name}' has shape {:?}, model expects {:?}",
                    v.shape(),
                    p.value.shape()
                )))
            }
            _ => {}
        }
    }
    if let Some(extra) = got.names().find(|n| !want.contains(n)) {
        return Err(Error::Checkpoint(format!("unexpected parameter '{extra}'")));
    }
    Ok(())
}

impl<T: Scalar> SequenceModel<T> for Girnet<T> {
    fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    fn num_aux(&self) -> usize {
        self.config.num_aux
    }

    fn task_head(&self) -> HeadKind {
        self.config.prim_head
    }

    fn losses(
        &self,
        g: &mut Graph<T>,
        prim: &SequenceBatch,
        aux: &[SequenceBatch],
        weights: &LossWeights,
    ) -> Result<LossVars> {
        let m = self.config.num_aux;
        if aux.len() != m {
            return Err(Error::Config(format!("{} auxiliary batches for {m} auxiliary tasks", aux.len())));
        }
        weights.validate(m)?;
        let p = self.forward_prim(g, prim)?;
        let aux_losses = aux
            .iter()
            .enumerate()
            .map(|(j, b)| self.forward_aux(g, j, b).map(|o| o.loss))
            .collect::<Result<Vec<_>>>()?;
        let reg = activity_reg_graph(g, &p.gate_vars(), weights.lambda, prim.batch_size())?;
        let mut terms = vec![p.loss];
        for (&l, &a) in aux_losses.iter().zip(&weights.alpha) {
            terms.push(g.scale(l, T::lit(a)));
        }
        terms.push(reg);
        let all = g.add_all(&terms)?;
        Ok(LossVars {
            prim: p.loss,
            aux: aux_losses,
            reg,
            all,
        })
    }

    fn predict(&self, batch: &SequenceBatch) -> Result<Predictions<T>> {
        let mut g = Graph::new();
        let out = self.forward_prim(&mut g, batch)?;
        let kind = match self.config.prim_head {
            HeadKind::TargetSplit => HeadKind::ClassifyLast,
            k => k,
        };
        let labels = decode(g.value(out.logits), kind, batch);
        let mut traces = Vec::with_capacity(batch.batch_size());
        for row in 0..batch.batch_size() {
            let mut per_row = Vec::with_capacity(out.pathways.len());
            for p in &out.pathways {
                per_row.push(p.trace(&g, row)?);
            }
            traces.push(per_row);
        }
        Ok(Predictions { labels, traces })
    }
}
