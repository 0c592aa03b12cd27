use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Example, Label, LabelVocab, LabeledCorpus, Vocab};
use crate::error::{Error, Result};

/// Generating language of a synthetic token. Language `A` is served by
/// auxiliary task 0, `B` by auxiliary task 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    A,
    B,
}

impl Language {
    pub fn expert(self) -> usize {
        match self {
            Language::A => 0,
            Language::B => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Language::A => "A",
            Language::B => "B",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "A" => Some(Language::A),
            "B" => Some(Language::B),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classify,
    Tag,
}

/// Parameters of the two-language synthetic family.
///
/// Language `A` owns ids `2 .. 2 + vocab_a`, language `B` the next `vocab_b`
/// ids; 0 and 1 stay reserved for padding and unknown tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticTaskSpec {
    pub vocab_a: usize,
    pub vocab_b: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub p_switch: f64,
    pub kind: TaskKind,
    pub seed: u64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        Self {
            vocab_a: 50,
            vocab_b: 50,
            len_min: 8,
            len_max: 20,
            p_switch: 0.3,
            kind: TaskKind::Tag,
            seed: 0,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_a < 2 || self.vocab_b < 2 {
            return Err(Error::Config("each language needs at least two tokens".into()));
        }
        if self.len_min == 0 || self.len_min > self.len_max {
            return Err(Error::Config(format!(
                "bad length range [{}, {}]",
                self.len_min, self.len_max
            )));
        }
        if !(self.p_switch > 0.0 && self.p_switch < 1.0) {
            return Err(Error::Config(format!(
                "p_switch must lie strictly inside (0, 1), got {}",
                self.p_switch
            )));
        }
        Ok(())
    }

    pub fn first_id(&self, lang: Language) -> usize {
        match lang {
            Language::A => 2,
            Language::B => 2 + self.vocab_a,
        }
    }

    pub fn size(&self, lang: Language) -> usize {
        match lang {
            Language::A => self.vocab_a,
            Language::B => self.vocab_b,
        }
    }

    /// Total vocabulary size including the two reserved ids.
    pub fn vocab_size(&self) -> usize {
        2 + self.vocab_a + self.vocab_b
    }

    /// Routing oracle: the language owning `id`.
    pub fn language_of(&self, id: usize) -> Option<Language> {
        let a = self.first_id(Language::A);
        let b = self.first_id(Language::B);
        if (a..b).contains(&id) {
            Some(Language::A)
        } else if (b..b + self.vocab_b).contains(&id) {
            Some(Language::B)
        } else {
            None
        }
    }

    /// Position of `id` inside its language's range.
    pub fn offset(&self, id: usize) -> Option<usize> {
        self.language_of(id).map(|l| id - self.first_id(l))
    }

    /// Vocabulary whose ids coincide with the generator's ids: `a0, a1, …`
    /// then `b0, b1, …`.
    pub fn vocab(&self) -> Vocab {
        let mut v = Vocab::new();
        for k in 0..self.vocab_a {
            v.id_or_insert(&format!("a{k}"));
        }
        for k in 0..self.vocab_b {
            v.id_or_insert(&format!("b{k}"));
        }
        v
    }

    pub(crate) fn rng(&self, stream: &str) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(stream_seed(self.seed, stream))
    }

    fn draw_token<R: Rng>(&self, lang: Language, rng: &mut R) -> usize {
        self.first_id(lang) + rng.gen_range(0..self.size(lang))
    }

    pub(crate) fn draw_len<R: Rng>(&self, rng: &mut R) -> usize {
        rng.gen_range(self.len_min..=self.len_max)
    }
}

/// Derives an independent seed for a named stream of one spec seed.
pub(crate) fn stream_seed(seed: u64, stream: &str) -> u64 {
    // FNV-1a over the stream name, folded into the seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    (seed ^ h).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Whole-sequence rule: class 0 ("even") when at least half of the token
/// offsets are even, else class 1.
pub fn classify_label(spec: &SyntheticTaskSpec, tokens: &[usize]) -> usize {
    let even = tokens
        .iter()
        .filter(|&&t| spec.offset(t).is_some_and(|o| o % 2 == 0))
        .count();
    usize::from(2 * even < tokens.len())
}

/// Per-token rule with tags 0 and 1.
///
/// At the start of a language run a token is tagged with the parity of its
/// offset. Inside a run the tag is 1 when `o + p` (language `A`) or
/// `o + 2p` (language `B`) is divisible by 3, where `o` is the token's offset
/// and `p` the offset of the token before it.
pub fn tag_sequence(spec: &SyntheticTaskSpec, tokens: &[usize]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .map(|(t, &id)| {
            let lang = spec.language_of(id);
            let off = spec.offset(id).unwrap_or(0);
            let prev = t
                .checked_sub(1)
                .map(|s| tokens[s])
                .filter(|&p| spec.language_of(p) == lang)
                .and_then(|p| spec.offset(p));
            match (lang, prev) {
                (Some(Language::B), Some(p)) => usize::from((off + 2 * p).is_multiple_of(3)),
                (_, Some(p)) => usize::from((off + p).is_multiple_of(3)),
                (_, None) => off % 2,
            }
        })
        .collect()
}

fn label_for(spec: &SyntheticTaskSpec, tokens: &[usize]) -> Label {
    match spec.kind {
        TaskKind::Classify => Label::Class(classify_label(spec, tokens)),
        TaskKind::Tag => Label::Tags(tag_sequence(spec, tokens)),
    }
}

fn corpus(spec: &SyntheticTaskSpec, examples: Vec<Example>, routing: Option<Vec<Vec<Language>>>) -> LabeledCorpus {
    LabeledCorpus {
        examples,
        vocab: spec.vocab(),
        labels: LabelVocab::numeric(2),
        routing,
    }
}

/// Single-language sequences for auxiliary task `language`.
pub fn gen_monolingual(spec: &SyntheticTaskSpec, language: Language, count: usize) -> Result<LabeledCorpus> {
    spec.validate()?;
    let mut rng = spec.rng(&format!("mono-{}", language.tag()));
    let examples = (0..count)
        .map(|_| {
            let n = spec.draw_len(&mut rng);
            let tokens: Vec<usize> = (0..n).map(|_| spec.draw_token(language, &mut rng)).collect();
            let label = label_for(spec, &tokens);
            Example {
                tokens,
                label,
                span: None,
            }
        })
        .collect();
    Ok(corpus(spec, examples, None))
}

/// Mixed-language sequences. The language follows a two-state Markov chain
/// that starts uniformly and flips with probability `p_switch` before each
/// subsequent token; the chain is kept as routing ground truth.
pub fn gen_codeswitched(spec: &SyntheticTaskSpec, count: usize) -> Result<LabeledCorpus> {
    gen_codeswitched_stream(spec, count, "codeswitched")
}

/// [`gen_codeswitched`] drawing from a named random stream, so several
/// disjoint sets (train, test) can come from one spec.
pub fn gen_codeswitched_stream(
    spec: &SyntheticTaskSpec,
    count: usize,
    stream: &str,
) -> Result<LabeledCorpus> {
    spec.validate()?;
    let mut rng = spec.rng(stream);
    let mut examples = Vec::with_capacity(count);
    let mut routing = Vec::with_capacity(count);
    for _ in 0..count {
        let n = spec.draw_len(&mut rng);
        let mut lang = if rng.gen_bool(0.5) { Language::A } else { Language::B };
        let mut tokens = Vec::with_capacity(n);
        let mut langs = Vec::with_capacity(n);
        for t in 0..n {
            if t > 0 && rng.gen_bool(spec.p_switch) {
                lang = match lang {
                    Language::A => Language::B,
                    Language::B => Language::A,
                };
            }
            tokens.push(spec.draw_token(lang, &mut rng));
            langs.push(lang);
        }
        let label = label_for(spec, &tokens);
        examples.push(Example {
            tokens,
            label,
            span: None,
        });
        routing.push(langs);
    }
    Ok(corpus(spec, examples, Some(routing)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: TaskKind) -> SyntheticTaskSpec {
        SyntheticTaskSpec {
            kind,
            ..SyntheticTaskSpec::default()
        }
    }

    #[test]
    fn run_start_parity_then_mod_three() {
        let s = spec(TaskKind::Tag);
        // offsets 0, 1, 2
        assert_eq!(tag_sequence(&s, &[2, 3, 4]), vec![0, 0, 1]);
        assert_eq!(tag_sequence(&s, &[3, 3]), vec![1, 0]);
        assert_eq!(classify_label(&s, &[2, 4, 7]), 0);
    }

    #[test]
    fn language_b_doubles_the_previous_offset() {
        let s = spec(TaskKind::Tag);
        let b = s.first_id(Language::B);
        assert_eq!(tag_sequence(&s, &[b + 1, b + 1]), vec![1, 1]);
        assert_eq!(tag_sequence(&s, &[b + 3, b + 30, b + 4]), vec![1, 1, 0]);
        // a run start after language A only looks at the token itself
        assert_eq!(tag_sequence(&s, &[3, b + 4]), vec![1, 0]);
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(TaskKind::Tag);
        assert_eq!(
            gen_monolingual(&s, Language::A, 20).unwrap(),
            gen_monolingual(&s, Language::A, 20).unwrap()
        );
        assert_eq!(gen_codeswitched(&s, 20).unwrap(), gen_codeswitched(&s, 20).unwrap());
    }

    #[test]
    fn monolingual_tokens_stay_in_range() {
        let s = spec(TaskKind::Classify);
        let c = gen_monolingual(&s, Language::B, 50).unwrap();
        for e in &c.examples {
            assert!((s.len_min..=s.len_max).contains(&e.tokens.len()));
            assert!(e.tokens.iter().all(|&t| s.language_of(t) == Some(Language::B)));
        }
    }

    #[test]
    fn routing_matches_token_language() {
        let s = spec(TaskKind::Tag);
        let c = gen_codeswitched(&s, 100).unwrap();
        let routing = c.routing.as_ref().unwrap();
        for (e, r) in c.examples.iter().zip(routing) {
            assert_eq!(e.tokens.len(), r.len());
            for (&t, &l) in e.tokens.iter().zip(r) {
                assert_eq!(s.language_of(t), Some(l));
            }
        }
    }

    #[test]
    fn rejects_degenerate_switch_probability() {
        for p in [0.0, 1.0, -0.1] {
            let s = SyntheticTaskSpec {
                p_switch: p,
                ..SyntheticTaskSpec::default()
            };
            assert!(gen_codeswitched(&s, 1).is_err());
        }
    }
}
