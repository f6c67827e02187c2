//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Every key a config file may contain.
pub const KEYS: &[&str] = &[
    "system.kind",
    "tail.class",
    "tail.beta",
    "tail.c",
    "tail.gamma",
    "tail.s",
    "tail.nmax",
    "tail.masses",
    "lsv.alpha",
    "lsv.cells",
    "lsv.quadrature",
    "trunc.k",
    "horizon.n",
    "bound.class",
    "bound.p",
    "bound.eps",
    "bound.q",
    "bound.r",
    "bound.embedded",
    "mc.samples",
    "mc.burnin",
    "mc.batches",
    "output.prefix",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    /// Parses `key = value` lines. `#` starts a comment; blank lines are
    /// ignored. Unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                bail!("line {}: unknown key `{key}`", i + 1);
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: key `{key}` given twice", i + 1);
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| anyhow!("missing key `{key}`"))
    }

    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}")))
            .transpose()
    }

    pub fn parsed_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| anyhow!("key `{key}`: `{x}`: {e}")))
                    .collect()
            })
            .transpose()
    }
}

/// A parsed config plus the command-line overrides.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub config: Config,
    pub seed: u64,
    /// Overrides `mc.batches`.
    pub shards: Option<usize>,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn output_path(&self, name: &str) -> PathBuf {
        let prefix = self.config.get("output.prefix").unwrap_or("");
        self.out.join(format!("{prefix}{name}"))
    }
}
