//! Fit settings read from TOML.

use std::path::Path;
use std::str::FromStr;

use mmsb_core::{FitConfig, Threshold};
use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};

/// Parses `auto` or a nonnegative number.
pub fn parse_threshold(s: &str) -> std::result::Result<Threshold, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(Threshold::Auto);
    }
    match f64::from_str(s) {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(Threshold::Fixed(v)),
        _ => Err(format!("expected `auto` or a nonnegative number, got `{s}`")),
    }
}

fn threshold<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Threshold>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Word(String),
    }
    let raw = Option::<Raw>::deserialize(d)?;
    raw.map(|r| match r {
        Raw::Number(v) => parse_threshold(&v.to_string()),
        Raw::Word(w) => parse_threshold(&w),
    })
    .transpose()
    .map_err(serde::de::Error::custom)
}

/// Every field optional; unset fields keep the command-line or built-in value.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub k: Option<usize>,
    pub alpha0: Option<f64>,
    pub seed: Option<u64>,
    /// Sizes of `A, B, C, X, Y` as fractions of `n`.
    pub fractions: Option<[f64; 5]>,
    pub iterations: Option<usize>,
    pub gap_ratio: Option<f64>,
    pub initializers: Option<usize>,
    #[serde(default, deserialize_with = "threshold")]
    pub tau: Option<Threshold>,
    #[serde(default, deserialize_with = "threshold")]
    pub xi: Option<Threshold>,
    #[serde(default, deserialize_with = "threshold")]
    pub deflation_xi: Option<Threshold>,
    pub c_tau: Option<f64>,
    pub c2: Option<f64>,
    pub undirected: Option<bool>,
    pub support: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(toml::from_str(&text)?)
    }

    /// `other`'s set fields win.
    pub fn overlay(self, other: FileConfig) -> FileConfig {
        FileConfig {
            k: other.k.or(self.k),
            alpha0: other.alpha0.or(self.alpha0),
            seed: other.seed.or(self.seed),
            fractions: other.fractions.or(self.fractions),
            iterations: other.iterations.or(self.iterations),
            gap_ratio: other.gap_ratio.or(self.gap_ratio),
            initializers: other.initializers.or(self.initializers),
            tau: other.tau.or(self.tau),
            xi: other.xi.or(self.xi),
            deflation_xi: other.deflation_xi.or(self.deflation_xi),
            c_tau: other.c_tau.or(self.c_tau),
            c2: other.c2.or(self.c2),
            undirected: other.undirected.or(self.undirected),
            support: other.support.or(self.support),
        }
    }

    /// Builds a validated fit configuration; `k` and `alpha0` must be set.
    pub fn to_fit_config(&self) -> Result<FitConfig> {
        let k = self.k.ok_or_else(|| Error::Invalid("k is required".into()))?;
        let alpha0 = self.alpha0.ok_or_else(|| Error::Invalid("alpha0 is required".into()))?;
        let mut cfg = FitConfig::new(k, alpha0);
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut FitConfig) {
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.alpha0 {
            cfg.alpha0 = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.fractions {
            cfg.fractions = v;
        }
        if self.iterations.is_some() {
            cfg.iterations = self.iterations;
        }
        if let Some(v) = self.gap_ratio {
            cfg.gap_ratio = v;
        }
        if self.initializers.is_some() {
            cfg.max_inits = self.initializers;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.xi {
            cfg.xi = v;
        }
        if let Some(v) = self.deflation_xi {
            cfg.deflation_xi = v;
        }
        if let Some(v) = self.c_tau {
            cfg.c_tau = v;
        }
        if let Some(v) = self.c2 {
            cfg.c2 = v;
        }
        if let Some(v) = self.undirected {
            cfg.undirected = v;
        }
        if let Some(v) = self.support {
            cfg.support = v;
        }
    }
}
