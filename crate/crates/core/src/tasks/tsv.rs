use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::synthetic::Language;
use super::{Example, Label, LabelVocab, LabeledCorpus, TaskKind, Vocab};
use crate::error::{Error, Result};

/// Parses `tokens<TAB>label[<TAB>start end]` lines. Tokens are added to
/// `vocab` (or mapped to the unknown id once it is frozen); labels go through
/// `labels`. Blank lines and lines starting with `#` are skipped.
pub fn parse_tsv(
    text: &str,
    kind: TaskKind,
    vocab: &mut Vocab,
    labels: &mut LabelVocab,
) -> Result<Vec<Example>> {
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(format!("expected 2 or 3 tab-separated fields, found {}", fields.len())));
        }
        let words: Vec<&str> = fields[0].split_whitespace().collect();
        if words.is_empty() {
            return Err(parse_err("empty token sequence".into()));
        }
        let mut label_ids = Vec::new();
        for name in fields[1].split_whitespace() {
            label_ids.push(labels.id_or_insert(name).map_err(parse_err)?);
        }
        let label = match kind {
            TaskKind::Classify if label_ids.len() == 1 => Label::Class(label_ids[0]),
            TaskKind::Classify => {
                return Err(parse_err(format!("expected one label, found {}", label_ids.len())))
            }
            TaskKind::Tag if label_ids.len() == words.len() => Label::Tags(label_ids),
            TaskKind::Tag => {
                return Err(parse_err(format!(
                    "{} tokens but {} tags",
                    words.len(),
                    label_ids.len()
                )))
            }
        };
        let span = match fields.get(2) {
            None => None,
            Some(s) => {
                let bounds: Vec<usize> = s
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(format!("bad span '{s}': {e}")))?;
                match bounds[..] {
                    [a, b] if 1 <= a && a <= b && b <= words.len() => Some((a, b)),
                    _ => return Err(parse_err(format!("span '{s}' outside [1, {}]", words.len()))),
                }
            }
        };
        let tokens = words.iter().map(|w| vocab.id_or_insert(w)).collect();
        examples.push(Example { tokens, label, span });
    }
    Ok(examples)
}

/// Reads one task file against a shared vocabulary. The returned corpus owns
/// a copy of the vocabulary as it stands after this file.
pub fn load_tsv(path: &Path, kind: TaskKind, vocab: &mut Vocab) -> Result<LabeledCorpus> {
    load_tsv_labels(path, kind, vocab, LabelVocab::default())
}

/// Like [`load_tsv`] but continues an existing label vocabulary, so dev and
/// test files share the training file's class ids.
pub fn load_tsv_labels(
    path: &Path,
    kind: TaskKind,
    vocab: &mut Vocab,
    mut labels: LabelVocab,
) -> Result<LabeledCorpus> {
    let text = fs::read_to_string(path)?;
    let examples = parse_tsv(&text, kind, vocab, &mut labels)?;
    if examples.is_empty() {
        return Err(Error::Data(format!("{} holds no examples", path.display())));
    }
    Ok(LabeledCorpus {
        examples,
        vocab: vocab.clone(),
        labels,
        routing: None,
    })
}

pub fn format_tsv(corpus: &LabeledCorpus) -> String {
    let mut out = String::new();
    for e in &corpus.examples {
        let tokens: Vec<&str> = e.tokens.iter().map(|&t| corpus.vocab.token(t)).collect();
        let label = match &e.label {
            Label::Class(c) => corpus.labels.name(*c).to_string(),
            Label::Tags(tags) => tags
                .iter()
                .map(|&t| corpus.labels.name(t))
                .collect::<Vec<_>>()
                .join(" "),
        };
        let _ = write!(out, "{}\t{}", tokens.join(" "), label);
        if let Some((a, b)) = e.span {
            let _ = write!(out, "\t{a} {b}");
        }
        out.push('\n');
    }
    out
}

pub fn write_tsv(path: &Path, corpus: &LabeledCorpus) -> Result<()> {
    fs::write(path, format_tsv(corpus))?;
    Ok(())
}

/// Routing sidecar: one line of space-separated language tags per example.
pub fn write_routing(path: &Path, routing: &[Vec<Language>]) -> Result<()> {
    let mut out = String::new();
    for row in routing {
        let tags: Vec<&str> = row.iter().map(|l| l.tag()).collect();
        out.push_str(&tags.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_routing(path: &Path) -> Result<Vec<Vec<Language>>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    Language::parse(t).ok_or_else(|| Error::Parse {
                        line: i + 1,
                        message: format!("unknown language tag '{t}'"),
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, kind: TaskKind) -> Result<(Vec<Example>, Vocab, LabelVocab)> {
        let mut v = Vocab::new();
        let mut l = LabelVocab::default();
        let ex = parse_tsv(text, kind, &mut v, &mut l)?;
        Ok((ex, v, l))
    }

    #[test]
    fn classification_line() {
        let (ex, v, _) = parse("good movie\t1\n", TaskKind::Classify).unwrap();
        assert_eq!(ex[0].tokens, vec![2, 3]);
        assert_eq!(ex[0].label, Label::Class(1));
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn duplicate_tokens_share_an_id() {
        let (ex, _, _) = parse("# header\nvery very good\t0\n\nvery\t1\n", TaskKind::Classify).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].tokens, vec![2, 2, 3]);
        assert_eq!(ex[1].tokens, vec![2]);
    }

    #[test]
    fn tag_line() {
        let (ex, _, l) = parse("I like it\tPRON VERB PRON\n", TaskKind::Tag).unwrap();
        assert_eq!(ex[0].label, Label::Tags(vec![0, 1, 0]));
        assert_eq!(l.name(1), "VERB");
    }

    #[test]
    fn tag_count_mismatch_names_the_line() {
        let err = parse("a b\t0 1\na b c\t0 1\n", TaskKind::Tag).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn span_column() {
        let (ex, _, _) = parse("a t b\t1\t2 2\n", TaskKind::Classify).unwrap();
        assert_eq!(ex[0].span, Some((2, 2)));
        assert!(parse("a t b\t1\t3 4\n", TaskKind::Classify).is_err());
    }

    #[test]
    fn empty_file_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.tsv");
        fs::write(&p, "# nothing\n").unwrap();
        let err = load_tsv(&p, TaskKind::Classify, &mut Vocab::new()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.tsv");
        let mut v = Vocab::new();
        let mut l = LabelVocab::default();
        let ex = parse_tsv("x y\tB A\nz\tA\n", TaskKind::Tag, &mut v, &mut l).unwrap();
        let c = LabeledCorpus {
            examples: ex,
            vocab: v,
            labels: l,
            routing: None,
        };
        write_tsv(&p, &c).unwrap();
        let back = load_tsv(&p, TaskKind::Tag, &mut Vocab::new()).unwrap();
        assert_eq!(back.examples, c.examples);

        let r = dir.path().join("r.routing");
        let routing = vec![vec![Language::A, Language::B], vec![Language::B]];
        write_routing(&r, &routing).unwrap();
        assert_eq!(read_routing(&r).unwrap(), routing);
    }
}
