//! Experiment configuration: a `key = value` text file plus overrides.
//!
//! ```text
//! # Two-stratum benchmark
//! data = example2            # example2 | heteroscedastic | csv
//! n = 15000                  # rows to generate (synthetic sources)
//! split = 5000,5000,5000     # train,cal,test
//! seed = 1
//! confidence = 0.9
//! C = 0.5
//! base = standard            # standard | normalized | scoring
//! start = -1,-5              # initial (log γ, log δ)
//! segments = x=1; x=2
//! out = out/example2
//! ```
//!
//! Further keys: `features`, `noise` (heteroscedastic source);
//! `csv.path`, `csv.label`, `csv.task`, `csv.categorical`, `csv.levels`
//! (csv source, path relative to the config file); `shuffle`, `ridge`,
//! `budget`, `tol`, `max_iters`, `skip_ifacm`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::conformity::BaseKind;
use crate::dataset::{CsvSchema, NoiseLaw, TaskKind};
use crate::error::{Error, Result};
use crate::ifacm::IfacmConfig;
use crate::metrics::{SegmentRule, DEFAULT_RIDGE};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Example2 { n: usize },
    Heteroscedastic { n: usize, m: usize, law: NoiseLaw },
    Csv { path: PathBuf, schema: CsvSchema },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// `[train, cal, test]` sizes.
    pub split: [usize; 3],
    pub shuffle: bool,
    pub seed: u64,
    pub confidence: f64,
    pub c: f64,
    pub base: BaseKind,
    pub ridge: f64,
    pub budget: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub start: [f64; 2],
    pub segments: Vec<SegmentRule>,
    pub out: PathBuf,
    pub skip_ifacm: bool,
}

impl ExperimentConfig {
    /// Defaults for a synthetic source, split into equal thirds.
    pub fn synthetic(source: DataSource) -> Self {
        let n = match &source {
            DataSource::Example2 { n } | DataSource::Heteroscedastic { n, .. } => *n,
            DataSource::Csv { .. } => 0,
        };
        Self {
            source,
            split: [n / 3, n / 3, n - 2 * (n / 3)],
            shuffle: true,
            seed: 1,
            confidence: 0.9,
            c: 0.5,
            base: BaseKind::Normalized,
            ridge: DEFAULT_RIDGE,
            budget: 100,
            tol: 1e-4,
            max_iters: 25,
            start: [-5.0, -5.0],
            segments: Vec::new(),
            out: PathBuf::from("out"),
            skip_ifacm: false,
        }
    }

    pub fn ifacm(&self) -> IfacmConfig {
        IfacmConfig {
            epsilon: 1.0 - self.confidence,
            c: self.c,
            ridge: self.ridge,
            budget: self.budget,
            tol: self.tol,
            max_iters: self.max_iters,
            start: self.start,
        }
    }

    pub fn epsilon(&self) -> f64 {
        1.0 - self.confidence
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config(format!(
                "confidence must be in (0,1), got {}",
                self.confidence
            )));
        }
        if self.c.is_nan() || self.c < 0.0 {
            return Err(Error::Config(format!("C must be non-negative, got {}", self.c)));
        }
        if self.split.contains(&0) {
            return Err(Error::Config("every split part needs at least one row".into()));
        }
        if let DataSource::Csv { path, .. } = &self.source {
            if !path.exists() {
                return Err(Error::Config(format!("data file {} does not exist", path.display())));
            }
        }
        if !self.start.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("start must be finite".into()));
        }
        self.ifacm().validate()
    }

    /// Parses a config file; relative `csv.path` values resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if kv.iter().any(|(kk, _)| *kk == k) {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
            }
            kv.push((k, v));
        }
        let get = |k: &str| kv.iter().find(|(kk, _)| kk == k).map(|(_, v)| v.as_str());
        const KNOWN: [&str; 23] = [
            "data",
            "n",
            "features",
            "noise",
            "csv.path",
            "csv.label",
            "csv.task",
            "csv.categorical",
            "csv.levels",
            "split",
            "shuffle",
            "seed",
            "confidence",
            "C",
            "base",
            "ridge",
            "budget",
            "tol",
            "max_iters",
            "start",
            "segments",
            "out",
            "skip_ifacm",
        ];
        for (k, _) in &kv {
            if !KNOWN.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown key '{k}'")));
            }
        }

        let n = get("n").map(|v| num::<usize>("n", v)).transpose()?;
        let source = match get("data").ok_or_else(|| Error::Config("missing key 'data'".into()))? {
            "example2" => DataSource::Example2 {
                n: n.ok_or_else(|| Error::Config("example2 needs 'n'".into()))?,
            },
            "heteroscedastic" => DataSource::Heteroscedastic {
                n: n.ok_or_else(|| Error::Config("heteroscedastic needs 'n'".into()))?,
                m: get("features").map(|v| num("features", v)).transpose()?.unwrap_or(3),
                law: match get("noise") {
                    None => NoiseLaw::ScaleMixture,
                    Some(v) => NoiseLaw::parse(v).ok_or_else(|| Error::Config(format!("unknown noise law '{v}'")))?,
                },
            },
            "csv" => {
                let p = get("csv.path").ok_or_else(|| Error::Config("csv source needs 'csv.path'".into()))?;
                let task = match get("csv.task").unwrap_or("regression") {
                    "regression" => TaskKind::Regression,
                    "classification" => TaskKind::Classification,
                    other => return Err(Error::Config(format!("unknown csv.task '{other}'"))),
                };
                let mut schema = CsvSchema::new(get("csv.label").unwrap_or("y"), task);
                schema.categorical = list(get("csv.categorical"));
                if get("csv.levels").is_some() {
                    schema.label_levels = Some(list(get("csv.levels")));
                }
                DataSource::Csv {
                    path: base_dir.join(p),
                    schema,
                }
            }
            other => return Err(Error::Config(format!("unknown data source '{other}'"))),
        };
        let mut cfg = Self::synthetic(source);
        if let Some(v) = get("split") {
            let parts: Vec<usize> = v.split(',').map(|s| num("split", s.trim())).collect::<Result<_>>()?;
            cfg.split = parts
                .try_into()
                .map_err(|_| Error::Config("split needs three sizes: train,cal,test".into()))?;
        } else if matches!(cfg.source, DataSource::Csv { .. }) {
            return Err(Error::Config("csv source needs 'split'".into()));
        }
        if let Some(v) = get("shuffle") {
            cfg.shuffle = boolean("shuffle", v)?;
        }
        if let Some(v) = get("skip_ifacm") {
            cfg.skip_ifacm = boolean("skip_ifacm", v)?;
        }
        if let Some(v) = get("seed") {
            cfg.seed = num("seed", v)?;
        }
        if let Some(v) = get("confidence") {
            cfg.confidence = num("confidence", v)?;
        }
        if let Some(v) = get("C") {
            cfg.c = num("C", v)?;
        }
        if let Some(v) = get("base") {
            cfg.base = BaseKind::parse(v).ok_or_else(|| Error::Config(format!("unknown base '{v}'")))?;
        }
        if let Some(v) = get("ridge") {
            cfg.ridge = num("ridge", v)?;
        }
        if let Some(v) = get("budget") {
            cfg.budget = num("budget", v)?;
        }
        if let Some(v) = get("tol") {
            cfg.tol = num("tol", v)?;
        }
        if let Some(v) = get("max_iters") {
            cfg.max_iters = num("max_iters", v)?;
        }
        if let Some(v) = get("start") {
            let parts: Vec<f64> = v.split(',').map(|s| num("start", s.trim())).collect::<Result<_>>()?;
            cfg.start = parts
                .try_into()
                .map_err(|_| Error::Config("start needs two values: log_gamma,log_delta".into()))?;
        }
        if let Some(v) = get("segments") {
            cfg.segments = v
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(SegmentRule::parse)
                .collect::<Result<_>>()?;
        }
        if let Some(v) = get("out") {
            cfg.out = PathBuf::from(v);
        }
        Ok(cfg)
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value '{v}' for '{key}'")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad value '{v}' for '{key}'"))),
    }
}

fn list(v: Option<&str>) -> Vec<String> {
    v.map(|s| {
        s.split(',')
            .map(|p| p.trim().to_string())
            .filter(|p| !p.is_empty())
            .collect()
    })
    .unwrap_or_default()
}

/// Command-line overrides; set fields win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub confidence: Option<f64>,
    pub c: Option<f64>,
    pub base: Option<BaseKind>,
    pub out: Option<PathBuf>,
    pub skip_ifacm: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.confidence {
            cfg.confidence = v;
        }
        if let Some(v) = self.c {
            cfg.c = v;
        }
        if let Some(v) = self.base {
            cfg.base = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.skip_ifacm |= self.skip_ifacm;
    }
}
