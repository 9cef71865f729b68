//! Plain-text run manifest: one `key = value` pair per line.

use std::collections::BTreeMap;
use std::path::Path;

use super::{ExperimentName, ExperimentParams};
use crate::error::{Error, Result};
use crate::rng::PRNG_NAME;

pub const MANIFEST_FILE: &str = "manifest.txt";
const FORMAT: &str = "bkernn-run-manifest";
const VERSION: u32 = 1;

/// Everything needed to replay a run, plus what it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub experiment: ExperimentName,
    pub command: String,
    pub seed: u64,
    /// Worker threads used; results do not depend on it.
    pub jobs: usize,
    pub params: ExperimentParams,
    pub legends: Vec<(String, String)>,
    pub artifacts: Vec<String>,
    pub duration_seconds: f64,
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("format = {FORMAT}"),
            format!("version = {VERSION}"),
            format!("experiment = {}", self.experiment),
            format!("command = {}", one_line(&self.command)),
            format!("seed = {}", self.seed),
            format!("repetitions = {}", self.params.n_seeds()),
            format!("jobs = {}", self.jobs),
            format!("prng = {PRNG_NAME}"),
            format!("params = {}", self.params.to_json()),
        ];
        for (col, meaning) in &self.legends {
            lines.push(format!("legend.{col} = {}", one_line(meaning)));
        }
        for a in &self.artifacts {
            lines.push(format!("artifact = {a}"));
        }
        lines.push(format!("duration_seconds = {:.3}", self.duration_seconds));
        lines.join("\n") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut single: BTreeMap<&str, &str> = BTreeMap::new();
        let mut legends = Vec::new();
        let mut artifacts = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::Format(format!("manifest line {}: expected 'key = value'", no + 1)))?;
            if let Some(col) = k.strip_prefix("legend.") {
                legends.push((col.to_string(), v.to_string()));
            } else if k == "artifact" {
                artifacts.push(v.to_string());
            } else {
                single.insert(k, v);
            }
        }
        let get = |k: &str| {
            single
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("manifest is missing '{k}'")))
        };
        if get("format")? != FORMAT {
            return Err(Error::Format("not a run manifest".into()));
        }
        let version: u32 = get("version")?
            .parse()
            .map_err(|_| Error::Format("bad manifest version".into()))?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported manifest version {version}")));
        }
        let experiment: ExperimentName = get("experiment")?
            .parse()
            .map_err(|_| Error::Format("bad experiment name in manifest".into()))?;
        let params = ExperimentParams::from_json(get("params")?)?;
        if params.name() != experiment {
            return Err(Error::Format("manifest parameters belong to another experiment".into()));
        }
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Format(format!("bad value for '{k}' in manifest")))
        };
        Ok(Manifest {
            experiment,
            command: get("command")?.to_string(),
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::Format("bad seed in manifest".into()))?,
            jobs: num("jobs")? as usize,
            params,
            legends,
            artifacts,
            duration_seconds: num("duration_seconds")?,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
