//! Experiment configuration files.
//!
//! One `key: value` pair per line; `#` starts a comment. Values are numbers,
//! booleans, bare words, or bracketed lists such as `snr_db: [0, 5, 10]`.
//! Unknown and repeated keys are errors. Every key is optional; see
//! [`ExperimentConfig::default`] for the defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use fedair_core::federation::{DatasetSpec, ExperimentSpec, FederationConfig};
use fedair_core::model::{Activation, ModelArch, TrainConfig};
use fedair_core::phy::Modulation;
use fedair_core::schemes::{SchemeConfig, SchemeKind};
use thiserror::Error;

/// Overrides `output_dir` when set.
pub const OUT_DIR_ENV: &str = "FEDAIR_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

/// A scheme as swept: the kind plus, for digital-only, its constellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemeVariant {
    pub kind: SchemeKind,
    pub modulation: Modulation,
}

impl SchemeVariant {
    pub fn parse(s: &str) -> Option<Self> {
        let (kind, modulation) = match s {
            "digital" | "digital-qam4" => (SchemeKind::Digital, Modulation::Qam4),
            "digital-bpsk" => (SchemeKind::Digital, Modulation::Bpsk),
            other => (SchemeKind::parse(other)?, Modulation::Qam4),
        };
        Some(Self { kind, modulation })
    }

    pub fn label(&self) -> &'static str {
        match (self.kind, self.modulation) {
            (SchemeKind::Digital, Modulation::Bpsk) => "digital-bpsk",
            (SchemeKind::Digital, Modulation::Qam4) => "digital-qam4",
            (kind, _) => kind.name(),
        }
    }
}

impl fmt::Display for SchemeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub schemes: Vec<SchemeVariant>,
    pub snr_db: Vec<f64>,
    /// Symbol budgets; empty means one budget of `budget_per_param · M`.
    pub budgets: Vec<usize>,
    pub budget_per_param: f64,
    pub seeds: Vec<u64>,

    pub learners: usize,
    pub rounds: usize,
    pub epochs: usize,
    pub aggregation_lr: f64,
    pub train: TrainConfig,

    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub dataset: DatasetSpec,

    pub total_power: f64,
    pub noise_power: f64,
    pub gamma_0_db: f64,
    pub track_channel: bool,
    pub analog_pack_iq: bool,
    pub fading_db: Option<f64>,

    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schemes: ["hybrid", "digital-bpsk", "digital-qam4", "analog"]
                .iter()
                .map(|s| SchemeVariant::parse(s).unwrap())
                .collect(),
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            budgets: Vec::new(),
            budget_per_param: 4.0,
            seeds: vec![0, 1, 2, 3, 4],
            learners: 10,
            rounds: 10,
            epochs: 10,
            aggregation_lr: 1.0,
            train: TrainConfig {
                lr: 0.001,
                ..TrainConfig::default()
            },
            hidden: vec![72],
            activation: Activation::Relu,
            dataset: DatasetSpec {
                train_samples: 6000,
                test_samples: 600,
                dim: 64,
                classes: 3,
                center_spread: 0.4,
                noise: 1.0,
                offset: 3.0,
            },
            total_power: 1.0,
            noise_power: 0.1,
            gamma_0_db: 5.0,
            track_channel: false,
            analog_pack_iq: false,
            fading_db: None,
            output_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Scalar(String),
    List(Vec<String>),
}

struct Entry {
    line: usize,
    value: Value,
}

fn parse_value(raw: &str, line: usize) -> Result<Value, ConfigError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(ConfigError::Parse {
            line,
            message: "missing value".into(),
        });
    }
    if let Some(inner) = raw.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
            line,
            message: "unterminated list".into(),
        })?;
        let items: Vec<String> = inner
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        return Ok(Value::List(items));
    }
    if raw.contains(['[', ']']) {
        return Err(ConfigError::Parse {
            line,
            message: format!("malformed value `{raw}`"),
        });
    }
    Ok(Value::Scalar(raw.to_string()))
}

const KEYS: &[&str] = &[
    "schemes",
    "snr_db",
    "budgets",
    "budget_per_param",
    "seeds",
    "learners",
    "rounds",
    "epochs",
    "aggregation_lr",
    "lr",
    "momentum",
    "weight_decay",
    "batch_size",
    "hidden",
    "activation",
    "dim",
    "classes",
    "train_samples",
    "test_samples",
    "center_spread",
    "noise",
    "offset",
    "total_power",
    "noise_power",
    "gamma_0_db",
    "track_channel",
    "analog_pack_iq",
    "fading_db",
    "output_dir",
];

struct Fields(BTreeMap<String, Entry>);

impl Fields {
    fn scalar(&mut self, key: &str) -> Result<Option<(usize, String)>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Entry {
                line,
                value: Value::Scalar(s),
            }) => Ok(Some((line, s))),
            Some(Entry { line, .. }) => Err(ConfigError::Parse {
                line,
                message: format!("`{key}` takes a single value, not a list"),
            }),
        }
    }

    fn list(&mut self, key: &str) -> Result<Option<(usize, Vec<String>)>, ConfigError> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(Entry {
                line,
                value: Value::List(v),
            }) => Ok(Some((line, v))),
            // A bare scalar is a one-element list.
            Some(Entry {
                line,
                value: Value::Scalar(s),
            }) => Ok(Some((line, vec![s]))),
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, into: &mut T) -> Result<(), ConfigError> {
        if let Some((line, s)) = self.scalar(key)? {
            *into = parse_item(&s, key, line)?;
        }
        Ok(())
    }

    fn parsed_list<T: std::str::FromStr>(
        &mut self,
        key: &str,
        into: &mut Vec<T>,
    ) -> Result<(), ConfigError> {
        if let Some((line, items)) = self.list(key)? {
            *into = items
                .iter()
                .map(|s| parse_item(s, key, line))
                .collect::<Result<_, _>>()?;
        }
        Ok(())
    }
}

fn parse_item<T: std::str::FromStr>(s: &str, key: &str, line: usize) -> Result<T, ConfigError> {
    s.parse().map_err(|_| ConfigError::Parse {
        line,
        message: format!("cannot parse `{s}` for `{key}`"),
    })
}

/// Parses config text. Missing keys keep their defaults.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once(':').ok_or_else(|| ConfigError::Parse {
            line,
            message: "expected `key: value`".into(),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        let value = parse_value(value, line)?;
        if map.insert(key.to_string(), Entry { line, value }).is_some() {
            return Err(ConfigError::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    let mut f = Fields(map);
    let mut cfg = ExperimentConfig::default();

    if let Some((line, names)) = f.list("schemes")? {
        cfg.schemes = names
            .iter()
            .map(|n| {
                SchemeVariant::parse(n).ok_or_else(|| ConfigError::Parse {
                    line,
                    message: format!("unknown scheme `{n}`"),
                })
            })
            .collect::<Result<_, _>>()?;
    }
    f.parsed_list("snr_db", &mut cfg.snr_db)?;
    f.parsed_list("budgets", &mut cfg.budgets)?;
    f.parsed("budget_per_param", &mut cfg.budget_per_param)?;
    f.parsed_list("seeds", &mut cfg.seeds)?;
    f.parsed("learners", &mut cfg.learners)?;
    f.parsed("rounds", &mut cfg.rounds)?;
    f.parsed("epochs", &mut cfg.epochs)?;
    f.parsed("aggregation_lr", &mut cfg.aggregation_lr)?;
    f.parsed("lr", &mut cfg.train.lr)?;
    f.parsed("momentum", &mut cfg.train.momentum)?;
    f.parsed("weight_decay", &mut cfg.train.weight_decay)?;
    let mut batch = cfg.train.batch_size.unwrap_or(0);
    f.parsed("batch_size", &mut batch)?;
    cfg.train.batch_size = (batch > 0).then_some(batch);
    f.parsed_list("hidden", &mut cfg.hidden)?;
    if let Some((line, s)) = f.scalar("activation")? {
        cfg.activation = Activation::from_tag(&s).ok_or_else(|| ConfigError::Parse {
            line,
            message: format!("unknown activation `{s}`"),
        })?;
    }
    f.parsed("dim", &mut cfg.dataset.dim)?;
    f.parsed("classes", &mut cfg.dataset.classes)?;
    f.parsed("train_samples", &mut cfg.dataset.train_samples)?;
    f.parsed("test_samples", &mut cfg.dataset.test_samples)?;
    f.parsed("center_spread", &mut cfg.dataset.center_spread)?;
    f.parsed("noise", &mut cfg.dataset.noise)?;
    f.parsed("offset", &mut cfg.dataset.offset)?;
    f.parsed("total_power", &mut cfg.total_power)?;
    f.parsed("noise_power", &mut cfg.noise_power)?;
    f.parsed("gamma_0_db", &mut cfg.gamma_0_db)?;
    f.parsed("track_channel", &mut cfg.track_channel)?;
    f.parsed("analog_pack_iq", &mut cfg.analog_pack_iq)?;
    if let Some((line, s)) = f.scalar("fading_db")? {
        cfg.fading_db = match s.as_str() {
            "none" => None,
            v => Some(parse_item(v, "fading_db", line)?),
        };
    }
    if let Some((_, s)) = f.scalar("output_dir")? {
        cfg.output_dir = PathBuf::from(s);
    }
    debug_assert!(f.0.is_empty(), "unhandled keys: {:?}", f.0.keys().collect::<Vec<_>>());

    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a config file; `FEDAIR_OUT_DIR` overrides its
/// output directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_config_str(&text)?;
    if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
        cfg.output_dir = PathBuf::from(dir);
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn arch(&self) -> Result<ModelArch, ConfigError> {
        let mut widths = vec![self.dataset.dim];
        widths.extend(&self.hidden);
        widths.push(self.dataset.classes);
        ModelArch::dense(&widths, self.activation).map_err(|e| invalid("hidden", e.to_string()))
    }

    /// Budgets to sweep, resolving the per-parameter default.
    pub fn resolved_budgets(&self) -> Result<Vec<usize>, ConfigError> {
        if !self.budgets.is_empty() {
            return Ok(self.budgets.clone());
        }
        let m = self.arch()?.param_count();
        Ok(vec![(self.budget_per_param * m as f64).ceil() as usize])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, empty) in [
            ("schemes", self.schemes.is_empty()),
            ("snr_db", self.snr_db.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ] {
            if empty {
                return Err(invalid(field, "list must not be empty"));
            }
        }
        if self.snr_db.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(invalid("snr_db", "values must be numbers or inf"));
        }
        if self.budgets.contains(&0) {
            return Err(invalid("budgets", "budgets must be positive"));
        }
        if !(self.budget_per_param > 0.0 && self.budget_per_param.is_finite()) {
            return Err(invalid("budget_per_param", "must be finite and positive"));
        }
        if self.hidden.contains(&0) {
            return Err(invalid("hidden", "widths must be positive"));
        }
        // The remaining checks live in the core types; run one point to
        // surface them with the core's field names.
        let spec = self.spec(
            self.schemes[0],
            self.snr_db[0],
            self.resolved_budgets()?[0],
            self.seeds[0],
        )?;
        spec.validate().map_err(|e| match e {
            fedair_core::Error::InvalidArgument { name, reason } => invalid(name, reason),
            other => invalid("config", other.to_string()),
        })
    }

    /// The run for one sweep point.
    pub fn spec(
        &self,
        scheme: SchemeVariant,
        snr_db: f64,
        budget: usize,
        seed: u64,
    ) -> Result<ExperimentSpec, ConfigError> {
        let mut sc = SchemeConfig::new(scheme.kind, budget);
        sc.modulation = scheme.modulation;
        sc.total_power = self.total_power;
        sc.noise_power = self.noise_power;
        sc.gamma_0_db = self.gamma_0_db;
        sc.track_channel = self.track_channel;
        sc.analog_pack_iq = self.analog_pack_iq;
        Ok(ExperimentSpec {
            arch: self.arch()?,
            data: self.dataset,
            federation: FederationConfig {
                learners: self.learners,
                rounds: self.rounds,
                epochs: self.epochs,
                aggregation_lr: self.aggregation_lr,
                train: self.train,
            },
            scheme: sc,
            snr_db,
            fading_db: self.fading_db,
            seed,
        })
    }
}
