//! `--config` JSON files. Every key is optional and any flag given on the
//! command line wins.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

/// A number or the string `"inf"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum NumOrInf {
    Num(f64),
    Text(String),
}

impl NumOrInf {
    pub fn value(&self) -> Result<f64> {
        match self {
            NumOrInf::Num(x) => Ok(*x),
            NumOrInf::Text(s) => parse_fmax(s),
        }
    }
}

pub fn parse_fmax(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "infinity" | "unbounded" => Ok(f64::INFINITY),
        t => t.parse().with_context(|| format!("bad f_max {s:?}")),
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub delay: Option<String>,
    pub fmax: Option<NumOrInf>,
    pub tol: Option<f64>,
    pub policy: Option<String>,
    pub cycles: Option<usize>,
    pub runs: Option<usize>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
    pub queue_cap: Option<usize>,
    pub sweep: Option<String>,
    pub grid: Option<Vec<f64>>,
    pub policies: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
