//! Dataset files: one JSON object per line. The first line is a header, each
//! following line one problem.
//!
//! ```text
//! {"format":"nesy-rpm-dataset","format_version":1,"configuration":"center","seed":7,"first_index":0,"count":2}
//! {"config":"center","matrix":[[[[0,2,3,1]]], ...],"options":[...],"answer":4,"rules":[...]}
//! ```
//!
//! A panel is a list of components, a component a list of
//! `[slot, type, size, color]` entries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{generate_indexed, GeneratorConfig};
use crate::model::{validate_panel, Configuration, Problem, MATRIX_PANELS, OPTION_COUNT};
use crate::par;

pub const DATASET_FORMAT_VERSION: u32 = 1;
const DATASET_FORMAT: &str = "nesy-rpm-dataset";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub format_version: u32,
    pub configuration: Configuration,
    pub seed: u64,
    /// Stream index of the first record.
    pub first_index: u64,
    pub count: usize,
}

impl DatasetHeader {
    pub fn new(configuration: Configuration, seed: u64, first_index: u64, count: usize) -> Self {
        DatasetHeader {
            format: DATASET_FORMAT.into(),
            format_version: DATASET_FORMAT_VERSION,
            configuration,
            seed,
            first_index,
            count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub problems: Vec<Problem>,
}

impl Dataset {
    /// Problems `first_index .. first_index + count` of the seeded stream.
    pub fn generate(configuration: Configuration, seed: u64, first_index: u64, count: usize) -> Result<Self> {
        let gcfg = GeneratorConfig::new(configuration, seed);
        gcfg.validate()?;
        let problems = par::map_range(count, |i| generate_indexed(&gcfg, first_index + i as u64))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            header: DatasetHeader::new(configuration, seed, first_index, count),
            problems,
        })
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for p in &self.problems {
            out += &serde_json::to_string(p)?;
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| Error::Format("empty dataset file".into()))?;
        let header: DatasetHeader =
            serde_json::from_str(first).map_err(|e| Error::Format(format!("dataset header: {e}")))?;
        if header.format != DATASET_FORMAT {
            return Err(Error::Format(format!(
                "not a dataset file (format '{}')",
                header.format
            )));
        }
        if header.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: DATASET_FORMAT_VERSION,
                found: header.format_version,
            });
        }
        let mut problems = Vec::with_capacity(header.count);
        for (n, line) in lines {
            let p: Problem = serde_json::from_str(line).map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
            check_problem(&p, header.configuration).map_err(|e| Error::Format(format!("line {}: {e}", n + 1)))?;
            problems.push(p);
        }
        if problems.len() != header.count {
            return Err(Error::Format(format!(
                "header announces {} problems, file holds {}",
                header.count,
                problems.len()
            )));
        }
        Ok(Dataset { header, problems })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::fsio::write_atomic(path, self.to_jsonl()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn config(&self) -> Configuration {
        self.header.configuration
    }
}

fn check_problem(p: &Problem, config: Configuration) -> Result<()> {
    if p.config != config {
        return Err(Error::ConfigMismatch {
            expected: config,
            found: p.config,
        });
    }
    if p.matrix.len() != MATRIX_PANELS || p.options.len() != OPTION_COUNT || p.answer >= OPTION_COUNT {
        return Err(Error::Format(
            "problem needs 8 matrix panels, 8 options and an answer below 8".into(),
        ));
    }
    if p.rules.len() != config.components().len() {
        return Err(Error::Format("one rule map per component expected".into()));
    }
    for panel in p.panels() {
        let v = validate_panel(panel, config);
        if !v.is_empty() {
            return Err(Error::InvalidPanel(format!("{v:?}")));
        }
    }
    Ok(())
}

/// Shard sizes for `count` problems split 60/20/20 (6000/2000/2000 for 10000),
/// rounding toward the training shard.
pub fn default_split(count: usize) -> [usize; 3] {
    let val = count / 5;
    let test = count / 5;
    [count - val - test, val, test]
}

pub const SHARD_NAMES: [&str; 3] = ["train", "val", "test"];

/// Consecutive shards of one seeded stream.
pub fn generate_shards(configuration: Configuration, seed: u64, sizes: [usize; 3]) -> Result<[Dataset; 3]> {
    let mut start = 0u64;
    let mut out = Vec::with_capacity(3);
    for n in sizes {
        out.push(Dataset::generate(configuration, seed, start, n)?);
        start += n as u64;
    }
    Ok(out.try_into().expect("three shards"))
}
