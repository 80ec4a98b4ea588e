use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub raw_ratings: usize,
    pub raw_users: usize,
    pub raw_items: usize,
    pub ratings: usize,
    pub users: usize,
    pub items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPartition {
    pub fold: usize,
    pub threshold: u64,
    pub short_head_items: usize,
    pub long_tail_items: usize,
    pub train_ratings: usize,
    pub test_ratings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    /// `None` for stages that run once per experiment.
    pub fold: Option<usize>,
    pub stage: String,
    pub seconds: f64,
}

/// Provenance written next to the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub counts: DatasetCounts,
    pub partitions: Vec<FoldPartition>,
    pub timings: Vec<StageTiming>,
    pub complete: bool,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            counts: DatasetCounts::default(),
            partitions: Vec::new(),
            timings: Vec::new(),
            complete: false,
            error: None,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}
