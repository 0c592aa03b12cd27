use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{RunConfig, SyntheticTask};
use super::fixture::{Fixture, TOLERANCE};
use super::io_at;
use crate::error::{Error, Result};
use crate::model::{
    checkpoint, evaluate, export_gate_trace, gate_agreement, train, Evaluation, Girnet, HeadKind, ModelConfig,
};
use crate::numeric::{Fault, GradCheckReport};
use crate::tasks::{
    gen_codeswitched_stream, gen_monolingual, gen_passages, gen_targeted, load_tsv, load_tsv_labels, read_routing,
    write_routing, write_tsv, LabelVocab, LabeledCorpus, Language, SyntheticTaskSpec, TargetedLayout, TaskKind, Vocab,
};

/// Vocabulary, label names and model shape saved next to a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub vocab: Vocab,
    pub labels: LabelVocab,
    pub aux_labels: Vec<LabelVocab>,
}

/// `<checkpoint>.meta.json`.
pub fn meta_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    checkpoint.with_file_name(name)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_at(dir)),
        _ => Ok(()),
    }
}

/// Writes the synthetic corpus files and returns their paths.
pub fn gen(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let d = &config.data;
    for (what, n) in [("aux_count", d.aux_count), ("train_count", d.train_count), ("test_count", d.test_count)] {
        if n == 0 {
            return Err(Error::Data(format!("data.{what} is 0; refusing to write an empty corpus")));
        }
    }
    let dir = config.data_dir();
    fs::create_dir_all(&dir).map_err(io_at(&dir))?;
    let names = config.default_aux_names();
    let mut written = Vec::new();
    let mut put = |name: &str, corpus: &LabeledCorpus| -> Result<()> {
        let path = dir.join(name);
        write_tsv(&path, corpus).map_err(|e| match e {
            Error::Io(io) => io_at(&path)(io),
            other => other,
        })?;
        written.push(path);
        Ok(())
    };
    match d.task {
        SyntheticTask::CodeSwitched => {
            put(names[0], &gen_monolingual(&d.synthetic, Language::A, d.aux_count)?)?;
            put(names[1], &gen_monolingual(&d.synthetic, Language::B, d.aux_count)?)?;
            put("train.tsv", &gen_codeswitched_stream(&d.synthetic, d.train_count, "train")?)?;
            let test = gen_codeswitched_stream(&d.synthetic, d.test_count, "test")?;
            put("test.tsv", &test)?;
            let routing = dir.join("test.routing");
            write_routing(&routing, test.routing.as_deref().unwrap_or_default())?;
            written.push(routing);
        }
        SyntheticTask::Targeted => {
            let layout = TargetedLayout::new(SyntheticTaskSpec {
                kind: TaskKind::Classify,
                ..d.synthetic.clone()
            })?;
            put(names[0], &gen_passages(&layout, d.aux_count)?)?;
            let mut all = gen_targeted(&layout, d.train_count + d.test_count)?;
            let test = LabeledCorpus {
                examples: all.examples.split_off(d.train_count),
                ..all.clone()
            };
            put("train.tsv", &all)?;
            put("test.tsv", &test)?;
        }
    }
    Ok(written)
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Data(format!("{what} file {} does not exist", path.display())))
    }
}

/// Loads `path` with the frozen vocabulary and label names of a trained
/// model, so ids line up with the checkpoint.
fn load_frozen(path: &Path, kind: HeadKind, vocab: &Vocab, labels: &LabelVocab) -> Result<LabeledCorpus> {
    let mut vocab = vocab.clone();
    vocab.freeze();
    let corpus = load_tsv_labels(path, kind.task_kind(), &mut vocab, labels.clone())?;
    if corpus.labels.len() > labels.len() {
        return Err(Error::Data(format!(
            "{} uses labels the model was not trained on",
            path.display()
        )));
    }
    Ok(corpus)
}

/// Routing truth for `corpus`, checked row by row against its lengths.
fn load_routing(path: &Path, corpus: &LabeledCorpus) -> Result<Vec<Vec<Language>>> {
    let routing = read_routing(path)?;
    let lengths_match = routing.len() == corpus.len()
        && routing.iter().zip(&corpus.examples).all(|(r, e)| r.len() == e.tokens.len());
    if !lengths_match {
        return Err(Error::Data(format!(
            "routing file {} does not line up with {} examples",
            path.display(),
            corpus.len()
        )));
    }
    Ok(routing)
}

fn agreement(model: &ModelConfig, eval: &Evaluation<f64>, routing: Option<&[Vec<Language>]>) -> Result<Option<f64>> {
    match routing {
        Some(r) if model.prim_head != HeadKind::TargetSplit => gate_agreement(&eval.traces(0), r).map(Some),
        _ => Ok(None),
    }
}

/// Summary of a finished training run.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_loss: f64,
    pub dev_accuracy: Option<f64>,
}

pub fn train_cmd(config: &RunConfig) -> Result<TrainSummary> {
    let aux_paths = config.aux_paths();
    if aux_paths.len() != config.model.num_aux {
        return Err(Error::Config(format!(
            "{} auxiliary files for {} auxiliary tasks",
            aux_paths.len(),
            config.model.num_aux
        )));
    }
    let train_path = config.train_path();
    for p in &aux_paths {
        require_file(p, "auxiliary")?;
    }
    require_file(&train_path, "training")?;
    let dev_path = config.dev_path();
    if let Some(p) = &dev_path {
        require_file(p, "dev")?;
    }

    let mut vocab = Vocab::new();
    let aux = aux_paths
        .iter()
        .map(|p| load_tsv(p, config.model.aux_head.task_kind(), &mut vocab))
        .collect::<Result<Vec<_>>>()?;
    let prim = load_tsv(&train_path, config.model.prim_head.task_kind(), &mut vocab)?;
    let model_config = config.model.model_config(
        vocab.len(),
        prim.num_classes(),
        aux.iter().map(LabeledCorpus::num_classes).collect(),
    );
    let meta = CheckpointMeta {
        model: model_config.clone(),
        vocab,
        labels: prim.labels.clone(),
        aux_labels: aux.iter().map(|a| a.labels.clone()).collect(),
    };
    let dev = dev_path
        .as_deref()
        .map(|p| load_frozen(p, config.model.prim_head, &meta.vocab, &meta.labels))
        .transpose()?;
    let routing = match (&dev, config.routing_path(), config.data.dev.is_none()) {
        (Some(d), Some(r), true) => Some(load_routing(&r, d)?),
        _ => None,
    };

    let mut model = Girnet::<f64>::new(model_config, config.optim.seed)?;
    let metrics_path = config.metrics_path();
    create_parent(&metrics_path)?;
    let mut log = BufWriter::new(fs::File::create(&metrics_path).map_err(io_at(&metrics_path))?);
    let aux_sets: Vec<&[_]> = aux.iter().map(|a| a.examples.as_slice()).collect();
    let mut summary = TrainSummary {
        epochs: config.optim.epochs,
        final_loss: f64::NAN,
        dev_accuracy: None,
    };
    train(&mut model, &prim.examples, &aux_sets, &config.loss_weights(), &config.optim, |m, report| {
        let mut line = json!({
            "epoch": report.epoch,
            "steps": report.steps,
            "loss": report.loss,
        });
        if let Some(d) = &dev {
            let eval = evaluate(m, &d.examples, d.num_classes(), config.optim.batch_size)?;
            line["dev"] = serde_json::to_value(&eval.metrics)?;
            if let Some(a) = agreement(m.config(), &eval, routing.as_deref())? {
                line["agreement"] = json!(a);
            }
            summary.dev_accuracy = Some(eval.metrics.accuracy);
        }
        summary.final_loss = report.loss.all;
        writeln!(log, "{line}")?;
        log.flush()?;
        Ok(())
    })?;

    let ckpt = config.checkpoint_path();
    create_parent(&ckpt)?;
    checkpoint::save(&ckpt, crate::model::SequenceModel::store(&model))?;
    fs::write(meta_path(&ckpt), serde_json::to_string_pretty(&meta)?)?;
    Ok(summary)
}

/// Loads a checkpoint and its sidecar and checks them against the model
/// section of `config`.
pub fn load_model(config: &RunConfig, checkpoint_path: &Path) -> Result<(Girnet<f64>, CheckpointMeta)> {
    let meta_file = meta_path(checkpoint_path);
    let meta: CheckpointMeta = serde_json::from_str(&fs::read_to_string(&meta_file)?)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", meta_file.display())))?;
    if !config.model.matches(&meta.model) {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds a model of shape {:?}, configuration asks for {:?}",
            meta.model, config.model
        )));
    }
    let store = checkpoint::load(checkpoint_path)?;
    let model = Girnet::from_store(meta.model.clone(), store)?;
    Ok((model, meta))
}

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub metrics: crate::model::Metrics,
    pub agreement: Option<f64>,
}

pub fn eval_cmd(config: &RunConfig, checkpoint_path: &Path, input: Option<&Path>) -> Result<EvalSummary> {
    let (model, meta) = load_model(config, checkpoint_path)?;
    let path = input.map_or_else(|| config.test_path(), Path::to_path_buf);
    require_file(&path, "evaluation")?;
    let corpus = load_frozen(&path, meta.model.prim_head, &meta.vocab, &meta.labels)?;
    let routing = match (input, config.routing_path()) {
        (None, Some(r)) => Some(load_routing(&r, &corpus)?),
        _ => None,
    };
    let eval = evaluate(&model, &corpus.examples, meta.labels.len(), config.optim.batch_size)?;
    Ok(EvalSummary {
        agreement: agreement(&meta.model, &eval, routing.as_deref())?,
        metrics: eval.metrics,
    })
}

/// The words of every example line of a TSV file, in file order.
fn raw_tokens(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split('\t')
                .next()
                .unwrap_or_default()
                .split_whitespace()
                .map(str::to_string)
                .collect()
        })
        .collect())
}

/// Writes `seq,pos,token,g1..gm,skip` rows for every input sequence and
/// returns the number of rows. Target-split models give two row groups per
/// sequence, `<seq>/left` and `<seq>/right`, with `pos` the position in the
/// full sequence.
pub fn trace_cmd(config: &RunConfig, checkpoint_path: &Path, input: Option<&Path>, out: &Path) -> Result<usize> {
    let (model, meta) = load_model(config, checkpoint_path)?;
    let path = input.map_or_else(|| config.test_path(), Path::to_path_buf);
    require_file(&path, "trace input")?;
    let corpus = load_frozen(&path, meta.model.prim_head, &meta.vocab, &meta.labels)?;
    let words = raw_tokens(&path)?;
    let eval = evaluate(&model, &corpus.examples, meta.labels.len(), config.optim.batch_size)?;

    create_parent(out)?;
    let mut w = csv::Writer::from_path(out).map_err(csv_error)?;
    let mut header = vec!["seq".to_string(), "pos".into(), "token".into()];
    header.extend((1..=meta.model.num_aux).map(|j| format!("g{j}")));
    header.push("skip".into());
    w.write_record(&header).map_err(csv_error)?;

    let split = meta.model.prim_head == HeadKind::TargetSplit;
    let mut rows = 0;
    for (i, ((example, traces), words)) in
        corpus.examples.iter().zip(&eval.predictions.traces).zip(&words).enumerate()
    {
        let n = example.tokens.len();
        for (k, trace) in traces.iter().enumerate() {
            let Some(trace) = trace else { continue };
            let (seq, positions): (String, Vec<usize>) = if split {
                let (a, b) = example.span.ok_or_else(|| Error::Data(format!("example {i} has no target span")))?;
                match k {
                    0 => (format!("{i}/left"), (1..a).collect()),
                    _ => (format!("{i}/right"), (b + 1..=n).rev().collect()),
                }
            } else {
                (i.to_string(), (1..=n).collect())
            };
            let tokens: Vec<String> = positions.iter().map(|&p| words[p - 1].clone()).collect();
            for (row, &pos) in export_gate_trace(trace, &tokens, None)?.into_iter().zip(&positions) {
                let mut fields = row.csv_fields();
                fields[0] = pos.to_string();
                fields.insert(0, seq.clone());
                w.write_record(&fields).map_err(csv_error)?;
                rows += 1;
            }
        }
    }
    w.flush()?;
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("csv: {other:?}")),
    }
}

pub fn gradcheck_cmd(config: &RunConfig, fault: Option<Fault>) -> Result<(GradCheckReport, bool)> {
    let report = Fixture::new(config.optim.seed)?.check(fault)?;
    let pass = report.max_rel_error < TOLERANCE;
    Ok((report, pass))
}
