//! Raw field draws, `(replicate, site_index, value)`.

use anyhow::Result;
use glx_core::gaussian::FieldSample;
use glx_core::BoxDomain;

use super::domain_label;
use crate::config::RunConfig;
use crate::engine::Engine;
use crate::output::{num, OutputDir};

#[derive(Debug)]
pub struct SampleResult {
    pub per_size: Vec<(BoxDomain, Vec<FieldSample>)>,
}

pub fn compute(cfg: &RunConfig, engine: &Engine) -> Result<SampleResult> {
    let mut per_size = Vec::new();
    for d in cfg.domains()? {
        let sampler = engine.field(&cfg.model, &d, cfg.variance_mode)?.sampler()?;
        let draws = engine.map(cfg.sample.count, |r| sampler.sample(cfg.seed, r as u64));
        per_size.push((d, draws));
    }
    Ok(SampleResult { per_size })
}

pub fn write(res: &SampleResult, out: &mut OutputDir) -> Result<()> {
    for (d, draws) in &res.per_size {
        let rows: Vec<Vec<String>> = draws
            .iter()
            .flat_map(|s| {
                s.values.iter().enumerate().map(move |(i, &v)| vec![s.replicate.to_string(), i.to_string(), num(v)])
            })
            .collect();
        out.write_csv(&format!("samples_{}.csv", domain_label(d)), &["replicate", "site_index", "value"], &rows)?;
    }
    Ok(())
}
