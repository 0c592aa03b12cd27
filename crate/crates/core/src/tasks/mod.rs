//! Labeled corpora: synthetic generators with known routing and a TSV loader.

mod synthetic;
mod targeted;
mod tsv;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub(crate) use synthetic::stream_seed;
pub use synthetic::{
    classify_label, gen_codeswitched, gen_codeswitched_stream, gen_monolingual, tag_sequence, Language, SyntheticTaskSpec,
    TaskKind,
};
pub use targeted::{gen_passages, gen_targeted, nearest_polarity_label, Polarity, TargetedLayout};
pub use tsv::{format_tsv, load_tsv, load_tsv_labels, parse_tsv, read_routing, write_routing, write_tsv};

/// Reserved id for padding.
pub const PAD: usize = 0;
/// Reserved id for tokens outside the vocabulary.
pub const UNK: usize = 1;

/// Token-string to id map. Ids 0 and 1 are reserved for padding and unknown
/// tokens; new tokens get ids in first-seen order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    frozen: bool,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
    frozen: bool,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        let index = r.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens: r.tokens,
            index,
            frozen: r.frozen,
        }
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        Self {
            tokens: v.tokens,
            frozen: v.frozen,
        }
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    pub fn new() -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
            frozen: false,
        };
        v.insert("<pad>");
        v.insert("<unk>");
        v
    }

    fn insert(&mut self, token: &str) -> usize {
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Id of `token`, adding it unless the vocabulary is frozen (then unknown
    /// tokens map to [`UNK`]).
    pub fn id_or_insert(&mut self, token: &str) -> usize {
        match self.index.get(token) {
            Some(&id) => id,
            None if self.frozen => UNK,
            None => self.insert(token),
        }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or("<unk>", String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Label names for one task.
///
/// Purely numeric labels keep their value as class id (`"1"` is class 1);
/// otherwise names get ids in first-seen order. Mixing the two styles in one
/// task is rejected.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVocab {
    names: Vec<String>,
    numeric: Option<bool>,
}

impl LabelVocab {
    pub fn numeric(num_classes: usize) -> Self {
        Self {
            names: (0..num_classes).map(|i| i.to_string()).collect(),
            numeric: Some(true),
        }
    }

    pub fn id_or_insert(&mut self, label: &str) -> std::result::Result<usize, String> {
        let as_number = label.parse::<usize>().ok();
        match (self.numeric, as_number) {
            (Some(true), None) | (Some(false), Some(_)) => {
                return Err(format!("label '{label}' mixes numeric and named labels"))
            }
            _ => {}
        }
        if let Some(n) = as_number {
            self.numeric = Some(true);
            while self.names.len() <= n {
                self.names.push(self.names.len().to_string());
            }
            return Ok(n);
        }
        self.numeric = Some(false);
        if let Some(i) = self.names.iter().position(|n| n == label) {
            return Ok(i);
        }
        self.names.push(label.to_string());
        Ok(self.names.len() - 1)
    }

    pub fn name(&self, id: usize) -> &str {
        self.names.get(id).map_or("?", String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    /// One class for the whole sequence.
    Class(usize),
    /// One tag per token.
    Tags(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub label: Label,
    /// Target span, 1-based and inclusive.
    pub span: Option<(usize, usize)>,
}

/// A labeled dataset. `routing` holds, per example and position, the
/// language that generated the token; it exists only for synthetic data and
/// is never part of a training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCorpus {
    pub examples: Vec<Example>,
    pub vocab: Vocab,
    pub labels: LabelVocab,
    pub routing: Option<Vec<Vec<Language>>>,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn kind(&self) -> Option<TaskKind> {
        self.examples.first().map(|e| match e.label {
            Label::Class(_) => TaskKind::Classify,
            Label::Tags(_) => TaskKind::Tag,
        })
    }

    pub fn num_tokens(&self) -> usize {
        self.examples.iter().map(|e| e.tokens.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocab_reserves_pad_and_unk() {
        let mut v = Vocab::new();
        assert_eq!(v.id_or_insert("good"), 2);
        assert_eq!(v.id_or_insert("movie"), 3);
        assert_eq!(v.id_or_insert("good"), 2);
        v.freeze();
        assert_eq!(v.id_or_insert("unseen"), UNK);
        assert_eq!(v.token(PAD), "<pad>");
    }

    #[test]
    fn vocab_json_round_trip_rebuilds_index() {
        let mut v = Vocab::new();
        v.id_or_insert("x");
        let back: Vocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back.id("x"), 2);
        assert_eq!(back, v);
    }

    #[test]
    fn label_vocab_styles() {
        let mut l = LabelVocab::default();
        assert_eq!(l.id_or_insert("1"), Ok(1));
        assert_eq!(l.len(), 2);
        assert!(l.id_or_insert("POS").is_err());

        let mut named = LabelVocab::default();
        assert_eq!(named.id_or_insert("PRON"), Ok(0));
        assert_eq!(named.id_or_insert("VERB"), Ok(1));
        assert_eq!(named.id_or_insert("PRON"), Ok(0));
        assert!(named.id_or_insert("3").is_err());
    }
}
