use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::confidence::{BetaMode, ConfidenceConfig};
use crate::environments::TestFunction;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::policies::PolicyKind;

/// Keys of the flat config format, in file order.
pub const KEYS: [&str; 13] = [
    "env",
    "policy",
    "horizon",
    "seeds",
    "delta",
    "beta",
    "lambda",
    "bound",
    "kernel",
    "variance",
    "lengthscale",
    "restrict_to_maximizers",
    "out_dir",
];

/// One benchmark cell: environment × policy × hyperparameters × seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: TestFunction,
    pub policy: PolicyKind,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub lambda: f64,
    pub bound: f64,
    pub beta: BetaMode,
    pub kernel: KernelSpec,
    /// Restrict MaxMinLCB's leader and follower to the plausible maximizers.
    pub restrict_to_maximizers: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: TestFunction::Ackley,
            policy: PolicyKind::MaxMinLcb,
            horizon: 2000,
            seeds: (0..20).collect(),
            delta: 0.1,
            lambda: 0.1,
            bound: 1.0,
            beta: BetaMode::Fixed(1.0),
            kernel: KernelSpec::default(),
            restrict_to_maximizers: true,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.kernel.validate()?;
        self.confidence()?;
        Ok(())
    }

    pub fn confidence(&self) -> Result<ConfidenceConfig> {
        ConfidenceConfig::new(self.bound, self.lambda, self.delta, self.beta)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "env" => self.env = TestFunction::parse(value)?,
            "policy" => self.policy = PolicyKind::parse(value)?,
            "horizon" => self.horizon = parse_num(key, value)?,
            "seeds" => self.seeds = parse_seeds(value)?,
            "delta" => self.delta = parse_num(key, value)?,
            "beta" => self.beta = BetaMode::parse(value)?,
            "lambda" => self.lambda = parse_num(key, value)?,
            "bound" => self.bound = parse_num(key, value)?,
            "kernel" => self.kernel.family = KernelFamily::parse(value)?,
            "variance" => self.kernel.variance = parse_num(key, value)?,
            "lengthscale" => self.kernel.lengthscale = parse_num(key, value)?,
            "restrict_to_maximizers" => self.restrict_to_maximizers = parse_num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "env" => self.env.name().to_string(),
            "policy" => self.policy.name().to_string(),
            "horizon" => self.horizon.to_string(),
            "seeds" => format_seeds(&self.seeds),
            "delta" => self.delta.to_string(),
            "beta" => self.beta.to_string(),
            "lambda" => self.lambda.to_string(),
            "bound" => self.bound.to_string(),
            "kernel" => self.kernel.family.name().to_string(),
            "variance" => self.kernel.variance.to_string(),
            "lengthscale" => self.kernel.lengthscale.to_string(),
            "restrict_to_maximizers" => self.restrict_to_maximizers.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => return None,
        })
    }

    /// Renders the `key = value` form.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        config.apply_kv(text)?;
        Ok(config)
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_kv()).map_err(|e| Error::io(path, e))
    }

    /// Extracts the config echoed in a `summary.json`.
    pub fn from_summary_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Echo {
            config: RunConfig,
        }
        Ok(serde_json::from_str::<Echo>(text)?.config)
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// Accepts `a..b` (inclusive), `a..=b`, or a comma-separated list.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: u64 = parse_num("seeds", lo.trim())?;
        let hi: u64 = parse_num("seeds", hi.trim())?;
        if hi < lo {
            return Err(Error::Config(format!("empty seed range `{text}`")));
        }
        return Ok((lo..=hi).collect());
    }
    let seeds = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num("seeds", s.trim()))
        .collect::<Result<Vec<u64>>>()?;
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    Ok(seeds)
}

pub fn format_seeds(seeds: &[u64]) -> String {
    let contiguous = seeds.len() > 1 && seeds.windows(2).all(|w| w[1] == w[0] + 1);
    if contiguous {
        format!("{}..{}", seeds[0], seeds[seeds.len() - 1])
    } else {
        seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_round_trip() {
        let mut c = RunConfig::default();
        c.lambda = 0.1 + 0.2;
        c.delta = 1.0 / 3.0;
        c.seeds = vec![4, 9, 2];
        c.beta = BetaMode::Theoretical;
        c.kernel.family = KernelFamily::parse("matern52").unwrap();
        c.restrict_to_maximizers = false;
        assert_eq!(RunConfig::from_kv(&c.to_kv()).unwrap(), c);
    }

    #[test]
    fn seeds_forms() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert_eq!(parse_seeds("1, 5").unwrap(), vec![1, 5]);
        assert!(parse_seeds("5..1").is_err());
        assert_eq!(format_seeds(&[3, 4, 5]), "3..5");
        assert_eq!(format_seeds(&[3]), "3");
    }

    #[test]
    fn bad_lines_name_the_line() {
        let err = RunConfig::from_kv("env = ackley\nhorizon = -4\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(RunConfig::from_kv("colour = red").is_err());
        assert!(RunConfig::from_kv("just words").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.horizon = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.seeds.clear();
        assert!(c.validate().is_err());
    }
}
