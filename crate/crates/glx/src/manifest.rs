use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::RunConfig;

/// Record of one run; written last, as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub artifact_version: String,
    pub experiment: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_s: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub config: RunConfig,
}
