use girnet::cells::{gates_from_logits, GateTrace};
use girnet::model::{checkpoint, gate_agreement, Girnet, ModelConfig, SequenceModel};
use girnet::tasks::{
    classify_label, format_tsv, gen_codeswitched, gen_monolingual, parse_tsv, tag_sequence, Label, LabelVocab,
    Language, SyntheticTaskSpec, TaskKind, Vocab,
};
use girnet::Tensor64;
use proptest::prelude::*;

fn spec(seed: u64, kind: TaskKind) -> SyntheticTaskSpec {
    SyntheticTaskSpec {
        vocab_a: 12,
        vocab_b: 9,
        len_min: 1,
        len_max: 10,
        seed,
        kind,
        ..SyntheticTaskSpec::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gates_stay_on_the_simplex(logits in prop::collection::vec(-1e3f64..1e3, 2..8)) {
        let g = gates_from_logits(&Tensor64::vector(&logits)).unwrap();
        let total: f64 = g.data().iter().sum();
        prop_assert!(g.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!(total <= 1.0 + 1e-9);
    }

    #[test]
    fn codeswitched_labels_follow_the_rule(seed in 0u64..1000) {
        let s = spec(seed, TaskKind::Tag);
        let corpus = gen_codeswitched(&s, 20).unwrap();
        let routing = corpus.routing.as_ref().unwrap();
        for (e, langs) in corpus.examples.iter().zip(routing) {
            prop_assert_eq!(e.tokens.len(), langs.len());
            for (&t, &l) in e.tokens.iter().zip(langs) {
                prop_assert_eq!(s.language_of(t), Some(l));
            }
            prop_assert_eq!(&e.label, &Label::Tags(tag_sequence(&s, &e.tokens)));
        }
        prop_assert_eq!(gen_codeswitched(&s, 20).unwrap(), corpus);
    }

    #[test]
    fn monolingual_stays_in_one_range(seed in 0u64..1000, b in any::<bool>()) {
        let s = spec(seed, TaskKind::Classify);
        let lang = if b { Language::B } else { Language::A };
        for e in gen_monolingual(&s, lang, 20).unwrap().examples {
            prop_assert!(e.tokens.iter().all(|&t| s.language_of(t) == Some(lang)));
            prop_assert_eq!(e.label, Label::Class(classify_label(&s, &e.tokens)));
        }
    }

    #[test]
    fn tsv_round_trips(seed in 0u64..1000) {
        let corpus = gen_codeswitched(&spec(seed, TaskKind::Tag), 10).unwrap();
        let text = format_tsv(&corpus);
        let mut vocab = Vocab::new();
        let mut labels = LabelVocab::default();
        let examples = parse_tsv(&text, TaskKind::Tag, &mut vocab, &mut labels).unwrap();
        prop_assert_eq!(examples.len(), corpus.examples.len());
        for (a, b) in examples.iter().zip(&corpus.examples) {
            prop_assert_eq!(&a.label, &b.label);
            let words: Vec<&str> = a.tokens.iter().map(|&t| vocab.token(t)).collect();
            let orig: Vec<&str> = b.tokens.iter().map(|&t| corpus.vocab.token(t)).collect();
            prop_assert_eq!(words, orig);
        }
    }

    #[test]
    fn checkpoints_round_trip_bit_exact(seed in any::<u64>()) {
        let model = Girnet::<f64>::new(
            ModelConfig { d_emb: 3, d: 4, d_gate: 2, ..ModelConfig::tagging(10, 2, 3) },
            seed,
        ).unwrap();
        let bytes = checkpoint::encode(model.store());
        let back = checkpoint::decode::<f64>(&bytes).unwrap();
        for (name, p) in model.store().iter() {
            let a: Vec<u64> = p.value.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back.value(name).unwrap().data().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
        prop_assert_eq!(checkpoint::encode(&back), bytes);
    }

    #[test]
    fn uniform_gates_score_chance(m in 1usize..5, n in 1usize..12, truth in prop::collection::vec(any::<bool>(), 12)) {
        let trace = GateTrace::new(Tensor64::full(&[n, m], 1.0 / (m + 1) as f64)).unwrap();
        let routing = vec![truth[..n].iter().map(|&b| if b { Language::B } else { Language::A }).collect()];
        let a = gate_agreement(&[&trace], &routing).unwrap();
        prop_assert!((a - 1.0 / (m + 1) as f64).abs() < 1e-9, "{} for m={}", a, m);
    }
}
