use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{HeadKind, LossWeights, ModelConfig, TrainConfig};
use crate::tasks::SyntheticTaskSpec;

/// Environment variable that replaces every seed in the configuration.
pub const SEED_ENV: &str = "GIRNET_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// Number of auxiliary tasks `m`.
    pub num_aux: usize,
    pub d_emb: usize,
    pub d: usize,
    pub d_gate: usize,
    pub prim_head: HeadKind,
    pub aux_head: HeadKind,
    pub bidirectional_gating: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::tagging(3, 2, 2);
        Self {
            num_aux: m.num_aux,
            d_emb: m.d_emb,
            d: m.d,
            d_gate: m.d_gate,
            prim_head: m.prim_head,
            aux_head: m.aux_head,
            bidirectional_gating: m.bidirectional_gating,
        }
    }
}

impl ModelSection {
    pub fn model_config(&self, vocab_size: usize, prim_classes: usize, aux_classes: Vec<usize>) -> ModelConfig {
        ModelConfig {
            vocab_size,
            d_emb: self.d_emb,
            d: self.d,
            d_gate: self.d_gate,
            num_aux: self.num_aux,
            prim_head: self.prim_head,
            aux_head: self.aux_head,
            prim_classes,
            aux_classes,
            bidirectional_gating: self.bidirectional_gating,
        }
    }

    /// Whether a trained model's configuration has this section's shape.
    pub fn matches(&self, model: &ModelConfig) -> bool {
        let c = self.model_config(model.vocab_size, model.prim_classes, model.aux_classes.clone());
        &c == model
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossSection {
    /// One weight per auxiliary task; all ones when absent.
    pub alpha: Option<Vec<f64>>,
    pub lambda: f64,
}

/// Which synthetic family `gen` writes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticTask {
    /// Two monolingual tagging (or classification) sets and a mixed
    /// primary set with routing truth.
    #[default]
    CodeSwitched,
    /// Whole-passage sentiment as auxiliary data and target-dependent
    /// sentiment as the primary task.
    Targeted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    /// Directory `gen` writes to and default file names are read from.
    pub dir: PathBuf,
    pub task: SyntheticTask,
    pub synthetic: SyntheticTaskSpec,
    /// Examples per auxiliary set written by `gen`.
    pub aux_count: usize,
    pub train_count: usize,
    pub test_count: usize,
    /// Explicit file locations; each defaults to a file in `dir`.
    pub aux: Option<Vec<PathBuf>>,
    pub train: Option<PathBuf>,
    /// Scored after every epoch; defaults to the test file when it exists.
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Per-token generating language of the test file.
    pub routing: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data"),
            task: SyntheticTask::default(),
            synthetic: SyntheticTaskSpec::default(),
            aux_count: 4000,
            train_count: 2000,
            test_count: 1000,
            aux: None,
            train: None,
            dev: None,
            test: None,
            routing: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub trace: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            checkpoint: PathBuf::from("runs/model.ckpt"),
            metrics: PathBuf::from("runs/metrics.jsonl"),
            trace: PathBuf::from("runs/trace.csv"),
        }
    }
}

/// Everything one CLI invocation needs. Relative paths are resolved against
/// the directory of the configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub optim: TrainConfig,
    pub loss: LossSection,
    pub data: DataSection,
    pub output: OutputSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Reads `path`, applies `GIRNET_SEED` (if `seed_env` is set) and then
    /// the dotted overrides, in order.
    pub fn load(path: &Path, seed_env: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(super::io_at(path))?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(seed) = seed_env {
            let seed: u64 = seed
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}='{seed}' is not an unsigned integer")))?;
            set_path(&mut value, "optim.seed", Value::from(seed))?;
            set_path(&mut value, "data.synthetic.seed", Value::from(seed))?;
        }
        for (key, raw) in overrides {
            set_path(&mut value, key, parse_value(raw))?;
        }
        let mut config = Self::from_value(value)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    fn from_value(value: Value) -> Result<Self> {
        let config: Self =
            serde_json::from_value(value.clone()).map_err(|e| Error::Config(e.to_string()))?;
        let canonical = serde_json::to_value(&config)?;
        check_known(&value, &canonical, "")?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.loss_weights().validate(self.model.num_aux)?;
        if self.optim.batch_size == 0 {
            return Err(Error::Config("optim.batch_size must be positive".into()));
        }
        if let Some(aux) = &self.data.aux {
            if aux.len() != self.model.num_aux {
                return Err(Error::Config(format!(
                    "{} auxiliary files for {} auxiliary tasks",
                    aux.len(),
                    self.model.num_aux
                )));
            }
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            alpha: self
                .loss
                .alpha
                .clone()
                .unwrap_or_else(|| vec![1.0; self.model.num_aux]),
            lambda: self.loss.lambda,
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.resolve(&self.data.dir)
    }

    /// Auxiliary file names written by `gen` for the configured family.
    pub fn default_aux_names(&self) -> &'static [&'static str] {
        match self.data.task {
            SyntheticTask::CodeSwitched => &["aux_a.tsv", "aux_b.tsv"],
            SyntheticTask::Targeted => &["aux_passages.tsv"],
        }
    }

    pub fn aux_paths(&self) -> Vec<PathBuf> {
        match &self.data.aux {
            Some(paths) => paths.iter().map(|p| self.resolve(p)).collect(),
            None => self
                .default_aux_names()
                .iter()
                .map(|n| self.data_dir().join(n))
                .collect(),
        }
    }

    fn data_file(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.as_ref().map_or_else(|| self.data_dir().join(name), |p| self.resolve(p))
    }

    pub fn train_path(&self) -> PathBuf {
        self.data_file(&self.data.train, "train.tsv")
    }

    pub fn test_path(&self) -> PathBuf {
        self.data_file(&self.data.test, "test.tsv")
    }

    /// Explicit dev file, or the test file if it exists.
    pub fn dev_path(&self) -> Option<PathBuf> {
        match &self.data.dev {
            Some(p) => Some(self.resolve(p)),
            None => Some(self.test_path()).filter(|p| p.is_file()),
        }
    }

    /// Explicit routing file, or `test.routing` in the data directory if it
    /// exists.
    pub fn routing_path(&self) -> Option<PathBuf> {
        match &self.data.routing {
            Some(p) => Some(self.resolve(p)),
            None => Some(self.data_dir().join("test.routing")).filter(|p| p.is_file()),
        }
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.resolve(&self.output.checkpoint)
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.resolve(&self.output.metrics)
    }

    pub fn trace_path(&self) -> PathBuf {
        self.resolve(&self.output.trace)
    }
}

/// Override values are JSON when they parse as JSON (numbers, booleans,
/// arrays, `null`), plain strings otherwise.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn set_path(root: &mut Value, dotted: &str, value: Value) -> Result<()> {
    let mut node = root;
    let mut keys = dotted.split('.').peekable();
    while let Some(key) = keys.next() {
        if key.is_empty() {
            return Err(Error::Config(format!("bad override key '{dotted}'")));
        }
        let map = match node {
            Value::Object(map) => map,
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().expect("just created")
            }
            _ => return Err(Error::Config(format!("'{dotted}' descends into a non-object"))),
        };
        if keys.peek().is_none() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Rejects keys of `given` that do not survive a round trip through the
/// typed configuration, i.e. misspelled or unknown fields.
fn check_known(given: &Value, canonical: &Value, prefix: &str) -> Result<()> {
    let (Value::Object(given), Value::Object(canonical)) = (given, canonical) else {
        return Ok(());
    };
    for (key, value) in given {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match canonical.get(key) {
            None => return Err(Error::Config(format!("unknown configuration field '{path}'"))),
            Some(c) => check_known(value, c, &path)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_json(text: &str, overrides: &[(&str, &str)]) -> Result<RunConfig> {
        let mut value: Value = serde_json::from_str(text).unwrap();
        for (k, v) in overrides {
            set_path(&mut value, k, parse_value(v))?;
        }
        let c = RunConfig::from_value(value)?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn empty_config_takes_defaults() {
        let c = from_json("{}", &[]).unwrap();
        assert_eq!(c.model.num_aux, 2);
        assert_eq!(c.optim.adam.lr, 1e-3);
        assert_eq!(c.loss_weights(), LossWeights::uniform(2));
    }

    #[test]
    fn dotted_overrides() {
        let c = from_json(
            r#"{"loss": {"lambda": 0.5}}"#,
            &[("loss.lambda", "0.01"), ("optim.clip", "null"), ("data.dir", "elsewhere"), ("loss.alpha", "[1, 0.5]")],
        )
        .unwrap();
        assert_eq!(c.loss.lambda, 0.01);
        assert_eq!(c.optim.adam.clip, None);
        assert_eq!(c.data.dir, PathBuf::from("elsewhere"));
        assert_eq!(c.loss.alpha, Some(vec![1.0, 0.5]));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(matches!(from_json(r#"{"optim": {"lrr": 1}}"#, &[]), Err(Error::Config(_))));
        assert!(matches!(from_json("{}", &[("model.width", "3")]), Err(Error::Config(_))));
        assert!(matches!(from_json("{}", &[("loss.lambda.x", "3")]), Err(Error::Config(_))));
    }

    #[test]
    fn alpha_length_must_match_m() {
        let e = from_json(r#"{"loss": {"alpha": [1.0]}}"#, &[]).unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{e}");
        assert!(from_json(r#"{"model": {"num_aux": 1}, "loss": {"alpha": [1.0]}}"#, &[]).is_ok());
    }

    #[test]
    fn section_matches_its_model() {
        let s = ModelSection::default();
        let m = s.model_config(40, 2, vec![2, 2]);
        assert!(s.matches(&m));
        let wider = ModelSection { d: 8, ..s };
        assert!(!wider.matches(&m));
    }
}
