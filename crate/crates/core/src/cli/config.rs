//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may not repeat
//! and unknown keys are rejected, so a typo cannot silently fall back to a
//! default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::domain::{GroupWeights, MetricKind};
use crate::sampling::DEFAULT_ETA;
use crate::simulator::{AlphaSpec, Experiment, ExperimentPoint, InstanceSource, SweepAxis, DEFAULT_TARGET};

use super::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct KvFile {
    origin: String,
    base_dir: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("{origin}:{line_no}: expected `key = value`, got `{line}`")));
            };
            let key = k.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(CliError::Config(format!("{origin}:{line_no}: empty key")));
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(CliError::Config(format!(
                    "{origin}:{line_no}: duplicate key `{key}` (first set on line {first})"
                )));
            }
            entries.insert(key, (line_no, v.trim().to_string()));
        }
        Ok(Self { origin: origin.to_string(), base_dir: PathBuf::from("."), entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let mut kv = Self::parse(&text, &path.display().to_string())?;
        kv.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Ok(kv)
    }

    /// Directory that relative paths inside the file are resolved against.
    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        let line = self.entries.get(key).map(|(l, _)| *l).unwrap_or(0);
        CliError::Config(format!("{}:{line}: key `{key}`: {msg}", self.origin))
    }

    pub fn parse_opt<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| self.err(key, format!("invalid value `{v}`: {e}"))),
        }
    }

    pub fn list_opt<T>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.get(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse().map_err(|e| self.err(key, format!("invalid list item `{}`: {e}", s.trim()))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn reject_unknown(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.err(k, format!("unknown key; expected one of: {}", allowed.join(", ")))),
            None => Ok(()),
        }
    }
}

/// Where audit weights come from.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSource {
    Uniform,
    /// Group frequencies among the records kept by the metric.
    Empirical,
    /// CSV with `group,weight` columns; its row order fixes group ids.
    File(PathBuf),
    /// `name=weight` pairs in file order.
    List(Vec<(String, f64)>),
}

impl WeightSource {
    fn parse(v: &str, base: &Path) -> Result<Self, String> {
        if v.eq_ignore_ascii_case("uniform") {
            return Ok(WeightSource::Uniform);
        }
        if v.eq_ignore_ascii_case("empirical") {
            return Ok(WeightSource::Empirical);
        }
        if let Some(p) = v.strip_prefix("file:") {
            let p = Path::new(p.trim());
            return Ok(WeightSource::File(if p.is_absolute() { p.to_path_buf() } else { base.join(p) }));
        }
        if let Some(list) = v.strip_prefix("list:") {
            return list
                .split(',')
                .map(|item| {
                    let (g, w) = item.split_once('=').ok_or(format!("expected `group=weight`, got `{}`", item.trim()))?;
                    let w: f64 = w.trim().parse().map_err(|e| format!("weight of `{}`: {e}", g.trim()))?;
                    Ok((g.trim().to_string(), w))
                })
                .collect::<Result<_, String>>()
                .map(WeightSource::List);
        }
        Err(format!("expected uniform, empirical, file:<path> or list:<g>=<w>,..., got `{v}`"))
    }
}

/// Column names in the input CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub group: String,
    pub label: String,
    pub prediction: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self { group: "group".into(), label: "label".into(), prediction: "prediction".into() }
    }
}

/// Settings for `audit`; every field may be overridden from the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub metric: MetricKind,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub weights: WeightSource,
    pub plan: String,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    /// Defaults to the number of samples.
    pub budget: Option<u64>,
    pub columns: ColumnMap,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            metric: MetricKind::StatisticalParity,
            alpha: None,
            epsilon: None,
            weights: WeightSource::Empirical,
            plan: "weighted".into(),
            eta: None,
            gamma: None,
            budget: None,
            columns: ColumnMap::default(),
        }
    }
}

pub const AUDIT_KEYS: &[&str] = &[
    "metric",
    "alpha",
    "epsilon",
    "weights",
    "plan",
    "eta",
    "gamma",
    "budget",
    "column.group",
    "column.label",
    "column.prediction",
];

impl AuditConfig {
    pub fn from_kv(kv: &KvFile) -> Result<Self, CliError> {
        kv.reject_unknown(AUDIT_KEYS)?;
        let d = Self::default();
        let weights = match kv.get("weights") {
            None => d.weights,
            Some(v) => WeightSource::parse(v, kv.base_dir()).map_err(|e| kv.err("weights", e))?,
        };
        let col = |key: &str, default: String| kv.get(key).map(str::to_string).unwrap_or(default);
        Ok(Self {
            metric: kv.parse_opt("metric")?.unwrap_or(d.metric),
            alpha: kv.parse_opt("alpha")?,
            epsilon: kv.parse_opt("epsilon")?,
            weights,
            plan: kv.get("plan").map(str::to_string).unwrap_or(d.plan),
            eta: kv.parse_opt("eta")?,
            gamma: kv.parse_opt("gamma")?,
            budget: kv.parse_opt("budget")?,
            columns: ColumnMap {
                group: col("column.group", d.columns.group),
                label: col("column.label", d.columns.label),
                prediction: col("column.prediction", d.columns.prediction),
            },
        })
    }
}

pub const EXPERIMENT_KEYS: &[&str] = &[
    "source",
    "member_seed",
    "instance_seed",
    "weights",
    "mu_h0",
    "mu_h1",
    "k",
    "n",
    "epsilon",
    "alpha",
    "plan",
    "eta",
    "gamma",
    "sweep",
    "values",
    "trials",
    "seed",
    "target",
];

fn parse_alpha(v: &str) -> Result<AlphaSpec, String> {
    if v.eq_ignore_ascii_case("one_group") {
        return Ok(AlphaSpec::OneGroup);
    }
    v.parse().map(AlphaSpec::Value).map_err(|e| format!("expected a number or one_group: {e}"))
}

/// Reads an experiment description for `simulate`.
pub fn experiment_from_kv(kv: &KvFile) -> Result<Experiment, CliError> {
    kv.reject_unknown(EXPERIMENT_KEYS)?;
    let require = |key: &str| kv.get(key).ok_or_else(|| kv.err(key, "missing required key"));
    let source = match kv.get("source").unwrap_or("hard_pair") {
        "hard_pair" => InstanceSource::HardPair,
        "mixture_member" => InstanceSource::MixtureMember { member_seed: kv.parse_opt("member_seed")?.unwrap_or(0) },
        "random_simplex" => InstanceSource::RandomSimplex { instance_seed: kv.parse_opt("instance_seed")?.unwrap_or(0) },
        "explicit" => {
            let w: Vec<f64> = kv.list_opt("weights")?.ok_or_else(|| kv.err("weights", "required for explicit sources"))?;
            InstanceSource::Explicit {
                weights: GroupWeights::new(w).map_err(|e| kv.err("weights", e))?,
                mu_h0: kv.list_opt("mu_h0")?.ok_or_else(|| kv.err("mu_h0", "required for explicit sources"))?,
                mu_h1: kv.list_opt("mu_h1")?.ok_or_else(|| kv.err("mu_h1", "required for explicit sources"))?,
            }
        }
        other => {
            return Err(kv.err(
                "source",
                format!("unknown source `{other}`; expected hard_pair, mixture_member, random_simplex or explicit"),
            ))
        }
    };
    let k = match &source {
        InstanceSource::Explicit { weights, .. } => weights.len(),
        _ => kv.parse_opt("k")?.ok_or_else(|| kv.err("k", "missing required key"))?,
    };
    let alpha = match kv.get("alpha") {
        None => AlphaSpec::OneGroup,
        Some(v) => parse_alpha(v).map_err(|e| kv.err("alpha", e))?,
    };
    let axis: SweepAxis = kv.parse_opt("sweep")?.unwrap_or(SweepAxis::N);
    let values: Vec<f64> = kv.list_opt("values")?.ok_or_else(|| kv.err("values", "missing required key"))?;
    let n = match axis {
        SweepAxis::N => kv.parse_opt("n")?.unwrap_or(0),
        _ => kv.parse_opt("n")?.ok_or_else(|| kv.err("n", "missing required key"))?,
    };
    let epsilon: f64 = require("epsilon")?.parse().map_err(|e| kv.err("epsilon", e))?;
    let plan = kv.get("plan").unwrap_or("weighted").to_string();
    let eta = match (kv.parse_opt("eta")?, plan.as_str()) {
        (Some(e), _) => Some(e),
        (None, "weighted") => Some(DEFAULT_ETA),
        (None, _) => None,
    };
    Ok(Experiment {
        source,
        point: ExperimentPoint { k, n, epsilon, alpha, plan, eta, gamma: kv.parse_opt("gamma")? },
        axis,
        values,
        trials: kv.parse_opt("trials")?.ok_or_else(|| kv.err("trials", "missing required key"))?,
        base_seed: kv.parse_opt("seed")?.unwrap_or(0),
        target: kv.parse_opt("target")?.unwrap_or(DEFAULT_TARGET),
    })
}
