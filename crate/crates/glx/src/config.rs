//! Run configuration: the checked-in defaults file merged with a user file,
//! validated before any computation, and hashed so outputs can be traced to it.

use std::fmt;
use std::path::Path;

use glx_core::evt::MaximaMode;
use glx_core::gaussian::VarianceMode;
use glx_core::model::DependencyRadiusPolicy;
use glx_core::point_process::CellSpec;
use glx_core::stein_chen::B3Method;
use glx_core::{BoxDomain, ModelSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Contents of `configs/defaults.json`.
pub const DEFAULTS: &str = include_str!("../../../configs/defaults.json");

/// Sizes above this volume are refused for the dense infinite-volume mode.
pub const INFINITE_MODE_MAX_VOLUME: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Covariance,
    Sample,
    Maxima,
    Steinchen,
    Pointprocess,
    Audit,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Covariance => "covariance",
            Experiment::Sample => "sample",
            Experiment::Maxima => "maxima",
            Experiment::Steinchen => "steinchen",
            Experiment::Pointprocess => "pointprocess",
            Experiment::Audit => "audit",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusConfig {
    pub theta: f64,
    pub margin: f64,
    /// overrides the policy when set
    pub fixed: Option<f64>,
}

/// Normalizing count for maxima: the number of selected sites (`N` or
/// `m_N`) or always the box volume `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rescale {
    Sites,
    Box,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximaConfig {
    pub mode: MaximaMode,
    pub rescale: Rescale,
    pub quantiles: Vec<f64>,
}

/// A cell as written in JSON; `null` as an upper mark means `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub marks: Vec<(f64, Option<f64>)>,
}

impl CellConfig {
    pub fn spec(&self) -> CellSpec {
        CellSpec {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            intervals: self.marks.iter().map(|&(x, y)| (x, y.unwrap_or(f64::INFINITY))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub export_matrix: bool,
    pub kappa_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauConfig {
    /// truncation radius `R` of the fractional evaluator; compared with `2R`
    pub box_radius: usize,
    pub radii: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeConfig {
    pub side: usize,
    pub radii: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub decay_radius: usize,
    pub kappa_radius: f64,
    pub z: f64,
    pub finite_vs_infinite: bool,
    pub plateau: PlateauConfig,
    pub slope: SlopeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub model: ModelSpec,
    pub sizes: Vec<usize>,
    pub delta: f64,
    pub z_grid: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub workers: usize,
    pub out: String,
    pub tolerance: f64,
    pub variance_mode: VarianceMode,
    pub radius: RadiusConfig,
    pub b3: B3Method,
    pub maxima: MaximaConfig,
    pub cells: Vec<CellConfig>,
    pub sample: SampleConfig,
    pub covariance: CovarianceConfig,
    pub audit: AuditConfig,
    pub plotdata: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

/// Recursive merge; objects carrying an enum tag (`kind`, `method`) and all
/// non-objects are replaced whole.
pub fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let tagged = v.as_object().is_some_and(|m| m.contains_key("kind") || m.contains_key("method"));
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() && !tagged => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

impl RunConfig {
    /// Defaults merged with `user` (a JSON object).
    pub fn from_value(user: &Value) -> Result<Self, ConfigError> {
        if !user.is_object() {
            return invalid("config must be a JSON object");
        }
        let mut v: Value = serde_json::from_str(DEFAULTS)?;
        merge(&mut v, user);
        Ok(serde_json::from_value(v)?)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Self::from_value(&serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn defaults() -> Self {
        Self::from_json("{}").expect("defaults file is a valid config")
    }

    /// SHA-256 of the canonical JSON with `seed`, `workers` and `out`
    /// removed: runs that differ only in these may be merged.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let m = v.as_object_mut().expect("object");
        for k in ["seed", "workers", "out"] {
            m.remove(k);
        }
        // serde_json maps are ordered by key, so this is canonical
        let text = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn policy(&self) -> Result<DependencyRadiusPolicy, ConfigError> {
        DependencyRadiusPolicy::for_model(&self.model, self.radius.theta, self.radius.margin)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// `s_N` for a box of volume `n`.
    pub fn dependency_radius(&self, n: usize) -> Result<f64, ConfigError> {
        match self.radius.fixed {
            Some(s) => Ok(s),
            None => self.policy()?.radius(n as f64).map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    pub fn domains(&self) -> Result<Vec<BoxDomain>, ConfigError> {
        self.sizes
            .iter()
            .map(|&n| BoxDomain::new(self.model.dim(), n, self.delta).map_err(|e| ConfigError::Invalid(e.to_string())))
            .collect()
    }

    pub fn cell_specs(&self) -> Vec<CellSpec> {
        self.cells.iter().map(CellConfig::spec).collect()
    }

    /// Checks everything that can be checked without numerics.
    pub fn validate(&self, experiment: Experiment) -> Result<(), ConfigError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return invalid(format!("config is for experiment `{e}` but `{experiment}` was requested"));
            }
        }
        self.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let d = self.model.dim();
        if self.sizes.is_empty() {
            return invalid("sizes must list at least one box side");
        }
        if self.sizes.iter().any(|&n| n < 2) {
            return invalid("box sides must be at least 2");
        }
        if !(0.0..0.5).contains(&self.delta) {
            return invalid(format!("delta must lie in [0, 1/2) (got {})", self.delta));
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1e-3) {
            return invalid(format!("tolerance must lie in (0, 1e-3) (got {})", self.tolerance));
        }
        if self.z_grid.iter().any(|z| !z.is_finite()) {
            return invalid("z_grid entries must be finite");
        }
        if let B3Method::GaussHermite { nodes } = self.b3 {
            if !(2..=256).contains(&nodes) {
                return invalid(format!("b3 nodes must lie in 2..=256 (got {nodes})"));
            }
        }
        if self.variance_mode == VarianceMode::Infinite {
            let big = self.sizes.iter().find(|&&n| n.pow(d as u32) > INFINITE_MODE_MAX_VOLUME);
            if let Some(n) = big {
                return invalid(format!(
                    "infinite variance mode is dense; box side {n} in d={d} exceeds {INFINITE_MODE_MAX_VOLUME} sites"
                ));
            }
        }
        let domains = self.domains()?;
        let needs_bulk = matches!(experiment, Experiment::Steinchen | Experiment::Pointprocess)
            || (experiment == Experiment::Maxima && self.maxima.mode == MaximaMode::Bulk);
        for dom in &domains {
            let m = dom.bulk_indices().len();
            if needs_bulk && m < 3 {
                return invalid(format!(
                    "bulk of side {} with delta {} has {m} sites; need at least 3",
                    dom.side(),
                    self.delta
                ));
            }
        }
        match experiment {
            Experiment::Steinchen | Experiment::Pointprocess => {
                if self.radius.fixed.is_none() {
                    self.policy()?;
                }
                if let Some(s) = self.radius.fixed {
                    if s.is_nan() || s < 0.0 {
                        return invalid("fixed radius must be non-negative");
                    }
                }
                if experiment == Experiment::Steinchen && self.z_grid.is_empty() {
                    return invalid("z_grid must not be empty");
                }
            }
            Experiment::Maxima => {
                if self.replicates == 0 {
                    return invalid("replicates must be positive");
                }
                if self.maxima.quantiles.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                    return invalid("quantile levels must lie in (0, 1)");
                }
            }
            Experiment::Sample => {
                if self.sample.count == 0 {
                    return invalid("sample.count must be positive");
                }
            }
            Experiment::Audit => {
                self.policy()?;
                if self.audit.decay_radius < 3 {
                    return invalid("audit.decay_radius must be at least 3");
                }
                if self.audit.kappa_radius < 2.0 {
                    return invalid("audit.kappa_radius must be at least 2");
                }
                if self.audit.slope.radii.len() < 2 {
                    return invalid("audit.slope.radii needs at least two radii");
                }
            }
            Experiment::Covariance => {
                if self.covariance.kappa_radius < 2.0 {
                    return invalid("covariance.kappa_radius must be at least 2");
                }
            }
        }
        if experiment == Experiment::Pointprocess {
            if self.replicates < 1000 {
                return invalid(format!("pointprocess needs at least 1000 replicates (got {})", self.replicates));
            }
            if self.cells.is_empty() {
                return invalid("pointprocess needs at least one cell");
            }
            for (j, c) in self.cells.iter().enumerate() {
                if c.lower.len() != d {
                    return invalid(format!("cell {j} has {} coordinates; the model has d={d}", c.lower.len()));
                }
                c.spec().validate().map_err(|e| ConfigError::Invalid(format!("cell {j}: {e}")))?;
                if c.marks.iter().any(|&(x, _)| !x.is_finite()) {
                    return invalid(format!("cell {j}: lower marks must be finite"));
                }
            }
            for a in 0..self.cells.len() {
                for b in a + 1..self.cells.len() {
                    let (p, q) = (&self.cells[a], &self.cells[b]);
                    let overlap = (0..d).all(|i| p.lower[i].max(q.lower[i]) < p.upper[i].min(q.upper[i]));
                    if overlap {
                        return invalid(format!("cells {a} and {b} overlap"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_parse_and_validate() {
        let c = RunConfig::defaults();
        for e in [Experiment::Maxima, Experiment::Steinchen, Experiment::Pointprocess, Experiment::Sample] {
            c.validate(e).unwrap();
        }
    }

    #[test]
    fn merge_replaces_tagged_objects() {
        let c =
            RunConfig::from_value(&json!({"model": {"kind": "dgff", "dim": 3}, "maxima": {"mode": "bulk"}})).unwrap();
        assert_eq!(c.model, ModelSpec::Dgff { dim: 3 });
        assert_eq!(c.maxima.mode, MaximaMode::Bulk);
        assert_eq!(c.maxima.quantiles.len(), 7);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_value(&json!({"replicate": 3})).is_err());
        assert!(RunConfig::from_value(&json!({"model": {"kind": "dgff", "dim": 3, "mass": 0.1}})).is_err());
    }

    #[test]
    fn dimension_constraint_is_cited() {
        let c = RunConfig::from_value(&json!({"model": {"kind": "membrane", "dim": 3}})).unwrap();
        let e = c.validate(Experiment::Maxima).unwrap_err().to_string();
        assert!(e.contains("membrane requires d>=5"), "{e}");
    }

    #[test]
    fn hash_ignores_seed_workers_out() {
        let a = RunConfig::defaults();
        let b = RunConfig::from_value(&json!({"seed": 99, "workers": 4, "out": "x"})).unwrap();
        let c = RunConfig::from_value(&json!({"replicates": 10})).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
