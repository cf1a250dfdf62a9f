//! Run configuration and the plain-text `key = value` format.
//!
//! Resolution order, lowest to highest precedence: desk-scale defaults, the
//! full-scale profile (when `full_scale = true`), the config file, and
//! command-line flags. Both sources are merged as key/value pairs before
//! [`RunConfig::from_pairs`] interprets them, so every key means the same
//! thing in a file and on the command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use ate_core::dgp::{DesignSpec, DEFAULT_PILOT_SIZE};
use ate_core::estimators::{BandwidthRule, DEFAULT_BANDWIDTH_RULE, DEFAULT_RADIUS_FACTOR, DEFAULT_ZETA};
use ate_core::{EstimatorId, TuningRule};

pub const DESK_N: usize = 500;
pub const DESK_P: usize = 500;
pub const DESK_REPS: usize = 200;
pub const FULL_N: usize = 2000;
pub const FULL_P: usize = 2000;
pub const FULL_REPS: usize = 1000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// Where the outcome predictions come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeModel {
    /// Per-arm linear Lasso.
    Lasso,
    /// `m1 ≡ m0 ≡ 0`; augmented estimators collapse to their weighting parts.
    Zero,
}

impl OutcomeModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lasso => "lasso",
            Self::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub designs: Vec<u8>,
    pub reps: usize,
    pub n: usize,
    pub p: usize,
    pub r2_y: Vec<f64>,
    /// Latent treatment R²; design 10 always uses 0.
    pub r2_d: f64,
    /// Requested estimators in canonical order.
    pub estimators: Vec<EstimatorId>,
    /// Tuning rule for every estimator that uses a Lasso.
    pub tuning: BTreeMap<EstimatorId, TuningRule>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub workers: usize,
    pub pilot_size: usize,
    pub zeta: f64,
    pub radius_factor: f64,
    pub bandwidth: BandwidthRule,
    pub outcome_model: OutcomeModel,
    pub full_scale: bool,
}

/// Default tuning: double selection uses the one-standard-error rule, the
/// other Lasso-based estimators the CV minimum.
pub fn default_tuning(id: EstimatorId) -> Option<TuningRule> {
    match id {
        EstimatorId::Naive => None,
        EstimatorId::Dsipw | EstimatorId::Dsrm => Some(TuningRule::Cv1Se),
        _ => Some(TuningRule::CvMin),
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            designs: DesignSpec::IDS.collect(),
            reps: DESK_REPS,
            n: DESK_N,
            p: DESK_P,
            r2_y: vec![DesignSpec::DEFAULT_R2_Y],
            r2_d: DesignSpec::DEFAULT_R2_D,
            estimators: EstimatorId::ALL.to_vec(),
            tuning: EstimatorId::ALL.iter().filter_map(|&e| default_tuning(e).map(|r| (e, r))).collect(),
            master_seed: 42,
            output_dir: PathBuf::from("results"),
            workers: 1,
            pilot_size: DEFAULT_PILOT_SIZE,
            zeta: DEFAULT_ZETA,
            radius_factor: DEFAULT_RADIUS_FACTOR,
            bandwidth: DEFAULT_BANDWIDTH_RULE,
            outcome_model: OutcomeModel::Lasso,
            full_scale: false,
        }
    }
}

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// ignored; keys are case-insensitive and `-` is read as `_`.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut pairs = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: idx + 1, text: raw.to_string() });
        };
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: idx + 1, text: raw.to_string() });
        }
        if pairs.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError::Duplicate { line: idx + 1, key });
        }
    }
    Ok(pairs)
}

pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn bad(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.to_string(), value: value.to_string(), reason: reason.into() }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| bad(key, value, e.to_string()))
}

fn parse_list<T>(key: &str, value: &str, item: impl Fn(&str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    let items: Vec<T> = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(bad(key, value, "empty list"));
    }
    Ok(items)
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

impl RunConfig {
    /// Builds a configuration from merged key/value pairs.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(v) = pairs.get("full_scale") {
            if parse_bool("full_scale", v)? {
                cfg.full_scale = true;
                cfg.n = FULL_N;
                cfg.p = FULL_P;
                cfg.reps = FULL_REPS;
            }
        }
        for (key, value) in pairs {
            match key.as_str() {
                "full_scale" => {}
                "designs" => {
                    cfg.designs = parse_list(key, value, |s| {
                        let id: u8 = parse_num(key, s)?;
                        if DesignSpec::IDS.contains(&id) {
                            Ok(id)
                        } else {
                            Err(bad(key, s, "design ids run from 1 to 10"))
                        }
                    })?;
                }
                "reps" => cfg.reps = parse_num(key, value)?,
                "n" => cfg.n = parse_num(key, value)?,
                "p" => cfg.p = parse_num(key, value)?,
                "r2y" | "r2_y" => cfg.r2_y = parse_list(key, value, |s| parse_num(key, s))?,
                "r2d" | "r2_d" => cfg.r2_d = parse_num(key, value)?,
                "estimators" => {
                    let mut ids = parse_list(key, value, |s| {
                        EstimatorId::from_name(s).ok_or_else(|| bad(key, s, "unknown estimator"))
                    })?;
                    ids.sort_unstable();
                    ids.dedup();
                    cfg.estimators = ids;
                }
                "seed" => cfg.master_seed = parse_num(key, value)?,
                "out" | "output_dir" => cfg.output_dir = PathBuf::from(value),
                "workers" => cfg.workers = parse_num(key, value)?,
                "pilot_size" => cfg.pilot_size = parse_num(key, value)?,
                "zeta" => cfg.zeta = parse_num(key, value)?,
                "radius_factor" => cfg.radius_factor = parse_num(key, value)?,
                "bandwidth" => {
                    cfg.bandwidth =
                        BandwidthRule::from_name(value).ok_or_else(|| bad(key, value, "expected pair-match or per-target"))?
                }
                "outcome_model" => {
                    cfg.outcome_model = match value.trim().to_ascii_lowercase().as_str() {
                        "lasso" => OutcomeModel::Lasso,
                        "zero" => OutcomeModel::Zero,
                        _ => return Err(bad(key, value, "expected lasso or zero")),
                    }
                }
                other => {
                    let Some(name) = other.strip_prefix("tuning.") else {
                        return Err(ConfigError::UnknownKey(other.to_string()));
                    };
                    let id = EstimatorId::from_name(name).ok_or_else(|| ConfigError::UnknownKey(other.to_string()))?;
                    if default_tuning(id).is_none() {
                        return Err(bad(key, value, "estimator has no tuning parameter"));
                    }
                    let rule = TuningRule::from_name(value).ok_or_else(|| bad(key, value, "expected cv-min, cv-1se or plug-in"))?;
                    cfg.tuning.insert(id, rule);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.reps < 1 {
            return fail("reps must be at least 1");
        }
        if self.estimators.is_empty() {
            return fail("at least one estimator is required");
        }
        if self.designs.is_empty() {
            return fail("at least one design is required");
        }
        if self.workers < 1 {
            return fail("workers must be at least 1");
        }
        if self.n < 40 {
            return fail("n must be at least 40");
        }
        if self.p < 1 {
            return fail("p must be at least 1");
        }
        if self.r2_y.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
            return fail("r2y values must lie in (0, 1)");
        }
        let mut sorted = self.r2_y.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.r2_y.len() {
            return fail("r2y values must be distinct");
        }
        if !(self.r2_d >= 0.0 && self.r2_d < 1.0) {
            return fail("r2d must lie in [0, 1)");
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return fail("zeta must lie in (0, 1)");
        }
        if !(self.radius_factor > 0.0 && self.radius_factor.is_finite()) {
            return fail("radius_factor must be positive");
        }
        if self.pilot_size < 1000 {
            return fail("pilot_size must be at least 1000");
        }
        Ok(())
    }

    pub fn tuning_for(&self, id: EstimatorId) -> TuningRule {
        self.tuning.get(&id).copied().or(default_tuning(id)).unwrap_or(TuningRule::CvMin)
    }

    /// The fully resolved configuration as `key = value` lines; parsing the
    /// result reproduces this configuration.
    pub fn to_pairs_text(&self) -> String {
        let join = |items: Vec<String>| items.join(",");
        let mut out = String::new();
        let _ = writeln!(out, "designs = {}", join(self.designs.iter().map(u8::to_string).collect()));
        let _ = writeln!(out, "reps = {}", self.reps);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "p = {}", self.p);
        let _ = writeln!(out, "r2y = {}", join(self.r2_y.iter().map(f64::to_string).collect()));
        let _ = writeln!(out, "r2d = {}", self.r2_d);
        let _ = writeln!(out, "estimators = {}", join(self.estimators.iter().map(|e| e.name().to_string()).collect()));
        for (id, rule) in &self.tuning {
            let _ = writeln!(out, "tuning.{} = {}", id.name(), rule.name());
        }
        let _ = writeln!(out, "seed = {}", self.master_seed);
        let _ = writeln!(out, "out = {}", self.output_dir.display());
        let _ = writeln!(out, "workers = {}", self.workers);
        let _ = writeln!(out, "pilot_size = {}", self.pilot_size);
        let _ = writeln!(out, "zeta = {}", self.zeta);
        let _ = writeln!(out, "radius_factor = {}", self.radius_factor);
        let _ = writeln!(out, "bandwidth = {}", self.bandwidth.name());
        let _ = writeln!(out, "outcome_model = {}", self.outcome_model.name());
        let _ = writeln!(out, "full_scale = {}", self.full_scale);
        out
    }
}
