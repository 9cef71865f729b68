//! Experiment protocols producing tidy numeric CSV tables.
//!
//! Every protocol takes a parameter struct (defaults in `reference()`, shrunk copies in
//! `scaled()`) and a base seed. Repetition `r` draws its data from
//! `derive_seed(seed, r)`, so results depend only on the parameters and the seed,
//! never on the number of worker threads. Categorical columns are integer codes;
//! their meaning is listed in the run manifest.

pub mod exp1;
pub mod exp2;
pub mod exp3;
pub mod exp4;
pub mod exp5;
mod manifest;

pub use manifest::{Manifest, MANIFEST_FILE};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::write_table;
use crate::error::{Error, Result};

/// Names accepted by `bkernn experiment`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    Exp5,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::Exp1,
        ExperimentName::Exp2,
        ExperimentName::Exp3,
        ExperimentName::Exp4,
        ExperimentName::Exp5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::Exp1 => "exp1",
            ExperimentName::Exp2 => "exp2",
            ExperimentName::Exp3 => "exp3",
            ExperimentName::Exp4 => "exp4",
            ExperimentName::Exp5 => "exp5",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::param(format!("unknown experiment '{s}' (expected exp1..exp5)")))
    }
}

/// Parameters of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentParams {
    Exp1(exp1::Params),
    Exp2(exp2::Params),
    Exp3(exp3::Params),
    Exp4(exp4::Params),
    Exp5(exp5::Params),
}

impl ExperimentParams {
    /// Published defaults shrunk by `scale` (1 keeps them), with an optional repetition count.
    pub fn defaults(name: ExperimentName, scale: f64, seeds: Option<usize>) -> Result<Self> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(Error::param(format!("scale must be in (0, 1], got {scale}")));
        }
        if seeds == Some(0) {
            return Err(Error::param("--seeds must be at least 1"));
        }
        let mut p = match name {
            ExperimentName::Exp1 => ExperimentParams::Exp1(exp1::Params::reference().scaled(scale)),
            ExperimentName::Exp2 => ExperimentParams::Exp2(exp2::Params::reference().scaled(scale)),
            ExperimentName::Exp3 => ExperimentParams::Exp3(exp3::Params::reference().scaled(scale)),
            ExperimentName::Exp4 => ExperimentParams::Exp4(exp4::Params::reference().scaled(scale)),
            ExperimentName::Exp5 => ExperimentParams::Exp5(exp5::Params::reference().scaled(scale)),
        };
        if let Some(s) = seeds {
            *p.n_seeds_mut() = s;
        }
        Ok(p)
    }

    pub fn name(&self) -> ExperimentName {
        match self {
            ExperimentParams::Exp1(_) => ExperimentName::Exp1,
            ExperimentParams::Exp2(_) => ExperimentName::Exp2,
            ExperimentParams::Exp3(_) => ExperimentName::Exp3,
            ExperimentParams::Exp4(_) => ExperimentName::Exp4,
            ExperimentParams::Exp5(_) => ExperimentName::Exp5,
        }
    }

    pub fn n_seeds(&self) -> usize {
        match self {
            ExperimentParams::Exp1(p) => p.n_seeds,
            ExperimentParams::Exp2(p) => p.n_seeds,
            ExperimentParams::Exp3(p) => p.n_seeds,
            ExperimentParams::Exp4(p) => p.n_seeds,
            ExperimentParams::Exp5(p) => p.n_seeds,
        }
    }

    fn n_seeds_mut(&mut self) -> &mut usize {
        match self {
            ExperimentParams::Exp1(p) => &mut p.n_seeds,
            ExperimentParams::Exp2(p) => &mut p.n_seeds,
            ExperimentParams::Exp3(p) => &mut p.n_seeds,
            ExperimentParams::Exp4(p) => &mut p.n_seeds,
            ExperimentParams::Exp5(p) => &mut p.n_seeds,
        }
    }

    /// Runs the protocol on a pool of `jobs` worker threads.
    pub fn run(&self, seed: u64, jobs: usize) -> Result<ExperimentOutput> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::param(format!("cannot build worker pool: {e}")))?;
        pool.install(|| match self {
            ExperimentParams::Exp1(p) => exp1::run(p, seed),
            ExperimentParams::Exp2(p) => exp2::run(p, seed),
            ExperimentParams::Exp3(p) => exp3::run(p, seed),
            ExperimentParams::Exp4(p) => exp4::run(p, seed),
            ExperimentParams::Exp5(p) => exp5::run(p, seed),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("parameters serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("experiment parameters: {e}")))
    }
}

/// A numeric result table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Table {
            name: name.into(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, header: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == header)
    }

    /// Values of `header` in every row.
    pub fn values(&self, header: &str) -> Vec<f64> {
        match self.column(header) {
            Some(c) => self.rows.iter().map(|r| r[c]).collect(),
            None => Vec::new(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

/// Tables and code legends of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    /// `(column, meaning of its codes)` pairs recorded in the manifest.
    pub legends: Vec<(String, String)>,
}

impl ExperimentOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Largest objective increase over all BKerNN fits (column `max_objective_rise`).
    pub fn max_objective_rise(&self) -> f64 {
        self.tables
            .iter()
            .flat_map(|t| t.values("max_objective_rise"))
            .filter(|v| !v.is_nan())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs an experiment and writes its tables plus a manifest into `out_dir`.
pub fn run_to_dir(
    params: &ExperimentParams,
    seed: u64,
    jobs: usize,
    out_dir: &Path,
    command: &str,
) -> Result<(ExperimentOutput, Vec<PathBuf>)> {
    std::fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let output = params.run(seed, jobs)?;
    let mut paths = Vec::new();
    for t in &output.tables {
        let path = out_dir.join(t.file_name());
        let headers: Vec<&str> = t.headers.iter().map(String::as_str).collect();
        write_table(&path, &headers, &t.rows)?;
        paths.push(path);
    }
    let manifest = Manifest {
        experiment: params.name(),
        command: command.to_string(),
        seed,
        jobs,
        params: params.clone(),
        legends: output.legends.clone(),
        artifacts: output.tables.iter().map(Table::file_name).collect(),
        duration_seconds: start.elapsed().as_secs_f64(),
    };
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok((output, paths))
}

/// Worker count: explicit value, then `BKERNN_JOBS`, then the machine's parallelism.
pub fn resolve_jobs(explicit: Option<usize>) -> Result<usize> {
    if let Some(j) = explicit {
        return if j == 0 {
            Err(Error::param("--jobs must be at least 1"))
        } else {
            Ok(j)
        };
    }
    if let Ok(v) = std::env::var("BKERNN_JOBS") {
        return match v.trim().parse::<usize>() {
            Ok(j) if j > 0 => Ok(j),
            _ => Err(Error::param(format!("BKERNN_JOBS must be a positive integer, got '{v}'"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// `round(v · scale)` bounded below by `floor`.
pub(crate) fn scale_count(v: usize, scale: f64, floor: usize) -> usize {
    ((v as f64 * scale).round() as usize).max(floor)
}

/// Scales every entry, keeping the result sorted and free of duplicates.
pub(crate) fn scale_list(values: &[usize], scale: f64, floor: usize) -> Vec<usize> {
    let mut out: Vec<usize> = values.iter().map(|&v| scale_count(v, scale, floor)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Numeric code of a boolean-like or enumerated value, as written in tables.
pub(crate) fn code(v: impl Into<u8>) -> f64 {
    v.into() as f64
}

/// The descent column value of a BKerNN fit: 0 when every step lowered the objective.
pub(crate) fn rise(report: &crate::trainer::TrainReport) -> f64 {
    report.max_objective_rise().max(0.0)
}
