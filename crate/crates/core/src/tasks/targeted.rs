use rand::seq::SliceRandom;
use rand::Rng;

use super::synthetic::Language;
use super::{Example, Label, LabelVocab, LabeledCorpus, SyntheticTaskSpec, TaskKind, Vocab};
use crate::error::{Error, Result};

/// Largest distance between the target and its own polarity token.
pub const NEAR_WINDOW: usize = 2;
/// Smallest distance between the target and a distractor.
pub const DISTRACTOR_GAP: usize = 4;
/// Fraction of targeted sequences that carry a distractor.
pub const DISTRACTOR_RATE: f64 = 0.9;
const NUM_TARGETS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    pub fn class(self) -> usize {
        match self {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        }
    }

    fn flip(self) -> Self {
        match self {
            Polarity::Negative => Polarity::Positive,
            Polarity::Positive => Polarity::Negative,
        }
    }
}

/// Token layout of the targeted-sentiment family, carved out of a
/// [`SyntheticTaskSpec`]: language `A` ids are neutral filler, the lower half
/// of language `B` is positive, the upper half negative, and a few ids past
/// `B` name targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetedLayout {
    pub spec: SyntheticTaskSpec,
}

impl TargetedLayout {
    pub fn new(spec: SyntheticTaskSpec) -> Result<Self> {
        spec.validate()?;
        if spec.kind != TaskKind::Classify {
            return Err(Error::Config("targeted sentiment is a classification task".into()));
        }
        if spec.len_min < NEAR_WINDOW + 2 {
            return Err(Error::Config("targeted sequences need at least 4 tokens".into()));
        }
        Ok(Self { spec })
    }

    pub fn polarity(&self, id: usize) -> Option<Polarity> {
        let off = self.spec.offset(id)?;
        match self.spec.language_of(id)? {
            Language::A => None,
            Language::B if 2 * off < self.spec.vocab_b => Some(Polarity::Positive),
            Language::B => Some(Polarity::Negative),
        }
    }

    fn first_target(&self) -> usize {
        self.spec.vocab_size()
    }

    pub fn is_target(&self, id: usize) -> bool {
        (self.first_target()..self.first_target() + NUM_TARGETS).contains(&id)
    }

    pub fn vocab_size(&self) -> usize {
        self.spec.vocab_size() + NUM_TARGETS
    }

    pub fn vocab(&self) -> Vocab {
        let mut v = self.spec.vocab();
        for k in 0..NUM_TARGETS {
            v.id_or_insert(&format!("t{k}"));
        }
        v
    }

    fn filler<R: Rng>(&self, rng: &mut R) -> usize {
        2 + rng.gen_range(0..self.spec.vocab_a)
    }

    fn polar<R: Rng>(&self, p: Polarity, rng: &mut R) -> usize {
        let half = self.spec.vocab_b / 2;
        let base = self.spec.first_id(Language::B);
        match p {
            Polarity::Positive => base + rng.gen_range(0..half.max(1)),
            Polarity::Negative => base + half + rng.gen_range(0..self.spec.vocab_b - half),
        }
    }
}

/// Label of the polarity token closest to the 1-based inclusive `span`;
/// ties go to the left token. `None` when the sequence has no polarity token.
pub fn nearest_polarity_label(
    layout: &TargetedLayout,
    tokens: &[usize],
    span: (usize, usize),
) -> Option<usize> {
    let (start, end) = (span.0 - 1, span.1 - 1);
    tokens
        .iter()
        .enumerate()
        .filter_map(|(pos, &id)| {
            let dist = if pos < start {
                start - pos
            } else if pos > end {
                pos - end
            } else {
                return None;
            };
            layout.polarity(id).map(|p| (dist, pos, p))
        })
        .min_by_key(|&(dist, pos, _)| (dist, pos))
        .map(|(_, _, p)| p.class())
}

/// Target-dependent sequences: a target token, a polarity token within
/// [`NEAR_WINDOW`] of it, and (usually) a distractor of the opposite sign at
/// least [`DISTRACTOR_GAP`] away. The label is the sign nearest the target.
pub fn gen_targeted(layout: &TargetedLayout, count: usize) -> Result<LabeledCorpus> {
    let spec = &layout.spec;
    let mut rng = spec.rng("targeted");
    let mut examples = Vec::with_capacity(count);
    for _ in 0..count {
        let n = spec.draw_len(&mut rng);
        let mut tokens: Vec<usize> = (0..n).map(|_| layout.filler(&mut rng)).collect();
        let target = rng.gen_range(0..n);
        tokens[target] = layout.first_target() + rng.gen_range(0..NUM_TARGETS);

        let near_slots: Vec<usize> = (1..=NEAR_WINDOW)
            .flat_map(|d| [target.checked_sub(d), Some(target + d)])
            .flatten()
            .filter(|&p| p < n)
            .collect();
        let near = *near_slots.choose(&mut rng).expect("sequence has room near the target");
        let sign = if rng.gen_bool(0.5) {
            Polarity::Positive
        } else {
            Polarity::Negative
        };
        tokens[near] = layout.polar(sign, &mut rng);

        if rng.gen_bool(DISTRACTOR_RATE) {
            let far_slots: Vec<usize> = (0..n).filter(|&p| p.abs_diff(target) >= DISTRACTOR_GAP).collect();
            if let Some(&far) = far_slots.choose(&mut rng) {
                tokens[far] = layout.polar(sign.flip(), &mut rng);
            }
        }
        let span = (target + 1, target + 1);
        let label = nearest_polarity_label(layout, &tokens, span).expect("polarity token present");
        examples.push(Example {
            tokens,
            label: Label::Class(label),
            span: Some(span),
        });
    }
    Ok(LabeledCorpus {
        examples,
        vocab: layout.vocab(),
        labels: LabelVocab::numeric(2),
        routing: None,
    })
}

/// Whole-passage sentiment: filler with one to three polarity tokens of a
/// single sign, labeled with that sign. Auxiliary data for the targeted task.
pub fn gen_passages(layout: &TargetedLayout, count: usize) -> Result<LabeledCorpus> {
    let spec = &layout.spec;
    let mut rng = spec.rng("passages");
    let mut examples = Vec::with_capacity(count);
    for _ in 0..count {
        let n = spec.draw_len(&mut rng);
        let mut tokens: Vec<usize> = (0..n).map(|_| layout.filler(&mut rng)).collect();
        let sign = if rng.gen_bool(0.5) {
            Polarity::Positive
        } else {
            Polarity::Negative
        };
        let k = rng.gen_range(1..=3.min(n));
        let mut slots: Vec<usize> = (0..n).collect();
        slots.shuffle(&mut rng);
        for &p in &slots[..k] {
            tokens[p] = layout.polar(sign, &mut rng);
        }
        examples.push(Example {
            tokens,
            label: Label::Class(sign.class()),
            span: None,
        });
    }
    Ok(LabeledCorpus {
        examples,
        vocab: layout.vocab(),
        labels: LabelVocab::numeric(2),
        routing: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> TargetedLayout {
        TargetedLayout::new(SyntheticTaskSpec {
            kind: TaskKind::Classify,
            ..SyntheticTaskSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn nearest_rule_examples() {
        let l = layout();
        let pos = l.polar(Polarity::Positive, &mut rand::rngs::mock::StepRng::new(0, 0));
        let neg = l.polar(Polarity::Negative, &mut rand::rngs::mock::StepRng::new(0, 0));
        let t = l.first_target();
        // 1-based: target at 3, "+" at 4, "-" at 9
        let mut tokens = vec![2; 10];
        tokens[2] = t;
        tokens[3] = pos;
        tokens[8] = neg;
        assert_eq!(nearest_polarity_label(&l, &tokens, (3, 3)), Some(1));

        let mut single = vec![2; 6];
        single[1] = t;
        single[0] = neg;
        assert_eq!(nearest_polarity_label(&l, &single, (2, 2)), Some(0));

        // moving the target next to the distractor flips the label
        let mut moved = vec![2; 10];
        moved[3] = pos;
        moved[8] = neg;
        moved[9] = t;
        assert_eq!(nearest_polarity_label(&l, &moved, (10, 10)), Some(0));
    }

    #[test]
    fn generated_sequences_follow_the_layout() {
        let l = layout();
        let c = gen_targeted(&l, 300).unwrap();
        let mut with_distractor = 0;
        for e in &c.examples {
            let (s, _) = e.span.unwrap();
            assert!(l.is_target(e.tokens[s - 1]));
            let polar: Vec<usize> = (0..e.tokens.len()).filter(|&p| l.polarity(e.tokens[p]).is_some()).collect();
            assert!(polar.iter().any(|&p| p.abs_diff(s - 1) <= NEAR_WINDOW));
            if polar.len() == 2 {
                with_distractor += 1;
            }
            assert_eq!(e.label, Label::Class(nearest_polarity_label(&l, &e.tokens, e.span.unwrap()).unwrap()));
        }
        assert!(with_distractor > 200, "{with_distractor}");
    }

    #[test]
    fn passages_have_one_sign() {
        let l = layout();
        let c = gen_passages(&l, 100).unwrap();
        for e in &c.examples {
            let Label::Class(y) = e.label else { panic!() };
            for &t in &e.tokens {
                if let Some(p) = l.polarity(t) {
                    assert_eq!(p.class(), y);
                }
            }
        }
    }
}
