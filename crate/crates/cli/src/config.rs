//! Run configuration: `key = value` files with dotted keys, `AKSVD_*`
//! environment overrides and command-line overrides, in that order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Every recognised key with its default. An empty default means "unset";
/// seed-like keys fall back to `seed`.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("threads", "1"),
    ("out", "out"),
    ("dataset.format", "synth"),
    ("dataset.path", ""),
    ("dataset.labels", ""),
    ("dataset.directed", "true"),
    ("dataset.self_loops", "false"),
    ("dataset.target", ""),
    ("dataset.zscore", "true"),
    ("dataset.synth", "two_block"),
    ("dataset.nodes", "200"),
    ("kernel.family", "sne"),
    ("kernel.gamma", ""),
    ("kernel.gamma_k", "1"),
    ("compat.mode", "auto"),
    ("compat.seed", ""),
    ("compat.target_dim", ""),
    ("rank", "8"),
    ("center", "true"),
    ("solver", "exact"),
    ("nystrom.n", "0"),
    ("nystrom.m", "0"),
    ("nystrom.epsilon", "0.1"),
    ("nystrom.seed", ""),
    ("nystrom.growth", "2"),
    ("nystrom.exact_sne", "false"),
    ("nystrom.subproblem", "rsvd"),
    ("method", "ksvd"),
    ("features.count", "8"),
    ("features.sides", "both"),
    ("split.seed", ""),
    ("split.test_fraction", "0.2"),
    ("lssvm.gamma", "1"),
    ("bench.solvers", "tsvd,rsvd,sym_nystrom,asym_nystrom"),
    ("bench.epsilons", "0.1"),
    ("bench.runs", "3"),
    ("bench.trials", "1"),
    ("bench.reference", "tsvd"),
    ("bench.sweep", "false"),
    ("sweep.k", "0.1,0.2,0.3,0.5,1"),
];

/// Keys that default to the global seed when unset.
const SEEDED: [&str; 3] = ["compat.seed", "nystrom.seed", "split.seed"];

/// Manifest bookkeeping keys; accepted in config files and ignored.
const RUN_PREFIX: &str = "run.";

const ENV_PREFIX: &str = "AKSVD_";

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_ascii_uppercase())
}

/// Resolved key/value settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// skipped. Optional `[section]` headers prefix the following keys.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut section = String::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = format!("{}.", name.trim());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("{origin}:{}: expected 'key = value'", no + 1)))?;
        let key = format!("{section}{}", k.trim());
        if key.starts_with(RUN_PREFIX) {
            continue;
        }
        if !known(&key) {
            return Err(ConfigError(format!("{origin}:{}: unknown key '{key}'", no + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Defaults, then `file`, then `AKSVD_*` variables from `env`, then
    /// `overrides`.
    pub fn resolve(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_pairs(&text, &path.display().to_string())? {
                cfg.values.insert(k, v);
            }
        }
        let env: BTreeMap<String, String> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        for (key, _) in KEYS {
            if let Some(v) = env.get(&env_name(key)) {
                cfg.values.insert(key.to_string(), v.clone());
            }
        }
        for name in env.keys() {
            if name != "AKSVD_LOG" && !KEYS.iter().any(|(k, _)| env_name(k) == *name) {
                log::warn!("ignoring unknown environment variable {name}");
            }
        }
        for (k, v) in overrides {
            if !known(k) {
                return Err(ConfigError(format!("unknown key '{k}'")));
            }
            cfg.values.insert(k.clone(), v.clone());
        }
        let seed = cfg.get("seed").to_string();
        for key in SEEDED {
            if cfg.get(key).is_empty() {
                cfg.values.insert(key.to_string(), seed.clone());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("unregistered key {key}"))
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.get(key).is_empty()
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let raw = self.get(key);
        raw.parse()
            .map_err(|e| ConfigError(format!("invalid value '{raw}' for {key}: {e}")))
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if self.is_set(key) {
            self.parse(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key).to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            other => Err(ConfigError(format!("invalid boolean '{other}' for {key}"))),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let items: Vec<T> = self
            .get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| ConfigError(format!("invalid item '{s}' in {key}: {e}"))))
            .collect::<Result<_>>()?;
        if items.is_empty() {
            return Err(ConfigError(format!("{key} must not be empty")));
        }
        Ok(items)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.is_set(key).then(|| PathBuf::from(self.get(key)))
    }

    /// Checks numeric domains and that referenced files exist.
    fn validate(&self) -> Result<()> {
        for key in ["seed", "compat.seed", "nystrom.seed", "split.seed"] {
            self.parse::<u64>(key)?;
        }
        for key in ["threads", "rank", "features.count", "bench.runs", "bench.trials", "dataset.nodes"] {
            if self.parse::<usize>(key)? == 0 {
                return Err(ConfigError(format!("{key} must be positive")));
            }
        }
        for key in ["dataset.directed", "dataset.self_loops", "dataset.zscore", "center", "nystrom.exact_sne", "bench.sweep"] {
            self.flag(key)?;
        }
        let frac: f64 = self.parse("split.test_fraction")?;
        if !(frac > 0.0 && frac < 1.0) {
            return Err(ConfigError(format!("split.test_fraction must lie in (0, 1), got {frac}")));
        }
        let growth: f64 = self.parse("nystrom.growth")?;
        if !(growth > 1.0 && growth <= 4.0) {
            return Err(ConfigError(format!("nystrom.growth must lie in (1, 4], got {growth}")));
        }
        for key in ["nystrom.epsilon", "lssvm.gamma", "kernel.gamma_k"] {
            let v: f64 = self.parse(key)?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError(format!("{key} must be positive, got {v}")));
            }
        }
        if let Some(g) = self.optional::<f64>("kernel.gamma")? {
            if !(g > 0.0 && g.is_finite()) {
                return Err(ConfigError(format!("kernel.gamma must be positive, got {g}")));
            }
        }
        self.optional::<usize>("compat.target_dim")?;
        self.parse::<usize>("nystrom.n")?;
        self.parse::<usize>("nystrom.m")?;
        self.list::<f64>("bench.epsilons")?;
        self.list::<f64>("sweep.k")?;
        if self.get("dataset.format") != "synth" {
            match self.path("dataset.path") {
                None => {
                    return Err(ConfigError(format!(
                        "dataset.path is required for format '{}'",
                        self.get("dataset.format")
                    )))
                }
                Some(p) if !p.exists() => {
                    return Err(ConfigError(format!("dataset.path {} does not exist", p.display())))
                }
                _ => {}
            }
        }
        if let Some(p) = self.path("dataset.labels") {
            if !p.exists() {
                return Err(ConfigError(format!("dataset.labels {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// `key = value` lines for every key, sorted.
    pub fn snapshot(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
