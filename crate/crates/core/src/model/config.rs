use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::TaskKind;

/// How a head turns a state sequence into logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadKind {
    /// One class per sequence from the last unmasked state.
    ClassifyLast,
    /// One class per sequence from the mean of the unmasked states.
    ClassifyMeanPool,
    /// One tag per unmasked position.
    TokenTag,
    /// One class per sequence from gate-weighted pools of the contexts left
    /// and right of a target span.
    TargetSplit,
}

impl HeadKind {
    pub fn task_kind(self) -> TaskKind {
        match self {
            HeadKind::TokenTag => TaskKind::Tag,
            _ => TaskKind::Classify,
        }
    }
}

fn default_d_emb() -> usize {
    32
}
fn default_d() -> usize {
    64
}
fn default_d_gate() -> usize {
    32
}
fn default_classes() -> usize {
    2
}

/// Shape of a GIRNet model. Widths: `d_emb` embeddings, `d` auxiliary and
/// composite states, `d_gate` gating states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    #[serde(default = "default_d_emb")]
    pub d_emb: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_d_gate")]
    pub d_gate: usize,
    /// Number of auxiliary tasks `m`.
    pub num_aux: usize,
    pub prim_head: HeadKind,
    pub aux_head: HeadKind,
    #[serde(default = "default_classes")]
    pub prim_classes: usize,
    /// Class count per auxiliary task; a single entry is broadcast.
    #[serde(default)]
    pub aux_classes: Vec<usize>,
    #[serde(default)]
    pub bidirectional_gating: bool,
}

impl ModelConfig {
    /// Tagging configuration with `m` auxiliary taggers and default widths.
    pub fn tagging(vocab_size: usize, num_aux: usize, classes: usize) -> Self {
        Self {
            vocab_size,
            d_emb: default_d_emb(),
            d: default_d(),
            d_gate: default_d_gate(),
            num_aux,
            prim_head: HeadKind::TokenTag,
            aux_head: HeadKind::TokenTag,
            prim_classes: classes,
            aux_classes: vec![classes; num_aux],
            bidirectional_gating: false,
        }
    }

    pub fn aux_classes(&self, j: usize) -> usize {
        match self.aux_classes.len() {
            0 => self.prim_classes,
            1 => self.aux_classes[0],
            _ => self.aux_classes[j],
        }
    }

    pub fn gate_width(&self) -> usize {
        if self.bidirectional_gating {
            2 * self.d_gate
        } else {
            self.d_gate
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.vocab_size < 3 {
            return bad(format!("vocab_size {} leaves no room for tokens", self.vocab_size));
        }
        if self.d_emb == 0 || self.d == 0 || self.d_gate == 0 {
            return bad("widths must be positive".into());
        }
        if self.num_aux == 0 {
            return bad("at least one auxiliary task is required".into());
        }
        if !matches!(self.aux_classes.len(), 0 | 1) && self.aux_classes.len() != self.num_aux {
            return bad(format!(
                "{} auxiliary class counts for {} auxiliary tasks",
                self.aux_classes.len(),
                self.num_aux
            ));
        }
        if self.prim_classes < 2 || (0..self.num_aux).any(|j| self.aux_classes(j) < 2) {
            return bad("every head needs at least two classes".into());
        }
        match (self.prim_head, self.aux_head) {
            (HeadKind::TargetSplit, HeadKind::TokenTag) | (_, HeadKind::TargetSplit) => {
                bad("auxiliary heads of a target-split model classify whole passages".into())
            }
            (HeadKind::TokenTag, a) if a != HeadKind::TokenTag => {
                bad("a tagging model needs tagging auxiliary tasks".into())
            }
            _ => Ok(()),
        }
    }
}
