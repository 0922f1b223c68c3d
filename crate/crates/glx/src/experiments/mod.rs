//! The six experiments. Each has a `compute` step returning plain data and a
//! `write` step emitting CSV/JSON files.

use std::collections::BTreeMap;

use anyhow::Result;
use glx_core::audit::AuditFlag;
use glx_core::BoxDomain;

use crate::config::{Experiment, RunConfig};
use crate::engine::Engine;
use crate::output::OutputDir;

pub mod audit;
pub mod covariance;
pub mod maxima;
pub mod pointprocess;
pub mod sample;
pub mod steinchen;

/// Flags and tolerances reported in the manifest.
#[derive(Debug, Default, Clone)]
pub struct Outcome {
    pub flags: BTreeMap<String, AuditFlag>,
    pub tolerances: BTreeMap<String, f64>,
}

impl Outcome {
    pub fn flag(&mut self, name: impl Into<String>, f: AuditFlag) {
        let name = name.into();
        let merged = match self.flags.get(&name) {
            Some(&g) => g.and(f),
            None => f,
        };
        self.flags.insert(name, merged);
    }

    pub fn worst(&self) -> AuditFlag {
        self.flags.values().fold(AuditFlag::Pass, |a, &b| a.and(b))
    }
}

pub fn run(experiment: Experiment, cfg: &RunConfig, engine: &Engine, out: &mut OutputDir) -> Result<Outcome> {
    let mut o = Outcome::default();
    o.tolerances.insert("green".into(), cfg.tolerance);
    o.tolerances.insert("cross_check".into(), glx_core::gaussian::CROSS_CHECK_TOL);
    match experiment {
        Experiment::Covariance => covariance::write(&covariance::compute(cfg, engine)?, cfg, out, &mut o)?,
        Experiment::Sample => sample::write(&sample::compute(cfg, engine)?, out)?,
        Experiment::Maxima => maxima::write(&maxima::compute(cfg, engine)?, cfg, out, &mut o)?,
        Experiment::Steinchen => steinchen::write(&steinchen::compute(cfg, engine)?, cfg, out, &mut o)?,
        Experiment::Pointprocess => pointprocess::write(&pointprocess::compute(cfg, engine)?, cfg, out, &mut o)?,
        Experiment::Audit => audit::write(&audit::compute(cfg, engine)?, cfg, out, &mut o)?,
    }
    Ok(o)
}

pub(crate) fn domain_label(d: &BoxDomain) -> String {
    format!("n{}", d.side())
}
