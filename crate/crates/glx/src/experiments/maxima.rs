//! Monte Carlo maxima per box size, distances to the limit law, quantiles.

use anyhow::Result;
use glx_core::evt::{
    cramer_von_mises, gumbel_cdf, ks_distance, limit_cdf, limit_quantile, quantile_table, replicate_maximum,
    scaling_constants, MaximaMode, MaximaSample,
};
use glx_core::BoxDomain;
use serde::Serialize;

use super::{domain_label, Outcome};
use crate::config::{Rescale, RunConfig};
use crate::engine::{self, Engine};
use crate::output::{num, OutputDir};

#[derive(Debug, Clone, Serialize)]
pub struct QuantileRow {
    pub p: f64,
    pub empirical: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaximaSummary {
    pub side: usize,
    pub volume: usize,
    pub sites: usize,
    pub rescale_count: f64,
    /// `gumbel` or `bulk_shifted`
    pub reference: String,
    pub ks_reference: f64,
    pub ks_gumbel: f64,
    pub cvm_reference: f64,
    pub quantiles: Vec<QuantileRow>,
}

#[derive(Debug)]
pub struct SizeMaxima {
    pub domain: BoxDomain,
    pub sample: MaximaSample,
    pub summary: MaximaSummary,
}

#[derive(Debug)]
pub struct MaximaResult {
    pub g0: f64,
    pub sizes: Vec<SizeMaxima>,
}

/// Reference law: shifted only for bulk maxima normalized by the box volume.
fn shifted(cfg: &RunConfig) -> bool {
    cfg.maxima.mode == MaximaMode::Bulk && cfg.maxima.rescale == Rescale::Box
}

pub fn compute_size(cfg: &RunConfig, engine: &Engine, d: &BoxDomain, g0: f64) -> Result<SizeMaxima> {
    let field = engine.field(&cfg.model, d, cfg.variance_mode)?;
    let sampler = field.sampler()?;
    let sites: Vec<usize> = match cfg.maxima.mode {
        MaximaMode::Full => (0..d.volume()).collect(),
        MaximaMode::Bulk => d.bulk_indices(),
    };
    let count = match cfg.maxima.rescale {
        Rescale::Sites => sites.len() as f64,
        Rescale::Box => d.volume() as f64,
    };
    let scaling = scaling_constants(g0, count)?;
    let n = d.volume();
    let z = engine.map(cfg.replicates, |r| {
        let mut buf = vec![0.0; n];
        replicate_maximum(&sampler, &sites, &scaling, cfg.seed, r as u64, &mut buf)
    });
    let sample = MaximaSample { z, mode: cfg.maxima.mode, seed: cfg.seed, sites: sites.len(), scaling };
    let (delta, dim) = (d.delta(), d.dim());
    let shift = shifted(cfg);
    let reference = move |x: f64| {
        if shift {
            limit_cdf(x, delta, dim)
        } else {
            gumbel_cdf(x)
        }
    };
    let ref_q = move |p: f64| {
        if shift {
            limit_quantile(p, delta, dim)
        } else {
            limit_quantile(p, 0.0, dim)
        }
    };
    let quantiles = quantile_table(&sample.z, &cfg.maxima.quantiles, &ref_q)
        .into_iter()
        .map(|(p, e, r)| QuantileRow { p, empirical: e, reference: r })
        .collect();
    let summary = MaximaSummary {
        side: d.side(),
        volume: d.volume(),
        sites: sites.len(),
        rescale_count: count,
        reference: if shift { "bulk_shifted" } else { "gumbel" }.into(),
        ks_reference: ks_distance(&sample.z, &reference)?,
        ks_gumbel: ks_distance(&sample.z, &gumbel_cdf)?,
        cvm_reference: cramer_von_mises(&sample.z, &reference)?,
        quantiles,
    };
    Ok(SizeMaxima { domain: *d, sample, summary })
}

pub fn compute(cfg: &RunConfig, engine: &Engine) -> Result<MaximaResult> {
    let g0 = engine::g0(&cfg.model, cfg.tolerance)?;
    let sizes = cfg.domains()?.iter().map(|d| compute_size(cfg, engine, d, g0)).collect::<Result<_>>()?;
    Ok(MaximaResult { g0, sizes })
}

pub fn write(res: &MaximaResult, cfg: &RunConfig, out: &mut OutputDir, _o: &mut Outcome) -> Result<()> {
    for s in &res.sizes {
        let label = domain_label(&s.domain);
        let rows: Vec<Vec<String>> = s.sample.z.iter().enumerate().map(|(r, z)| vec![r.to_string(), num(*z)]).collect();
        out.write_csv(&format!("maxima_{label}.csv"), &["replicate", "z"], &rows)?;
        if cfg.plotdata {
            let mut sorted = s.sample.z.clone();
            sorted.sort_by(f64::total_cmp);
            let shift = shifted(cfg);
            let mut pts = Vec::new();
            for k in 0..=90 {
                let x = -3.0 + 0.1 * k as f64;
                let emp = sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64;
                pts.push((x, emp, "empirical".to_string()));
            }
            for k in 0..=90 {
                let x = -3.0 + 0.1 * k as f64;
                let lim = if shift { limit_cdf(x, s.domain.delta(), s.domain.dim()) } else { gumbel_cdf(x) };
                pts.push((x, lim, "limit".to_string()));
            }
            out.write_plot(&format!("plot_gumbel_{label}.csv"), &pts)?;
        }
    }
    let rows: Vec<Vec<String>> = res
        .sizes
        .iter()
        .map(|s| {
            let m = &s.summary;
            vec![
                m.side.to_string(),
                m.volume.to_string(),
                m.sites.to_string(),
                num(m.rescale_count),
                num(s.sample.scaling.a),
                num(s.sample.scaling.b),
                m.reference.clone(),
                num(m.ks_reference),
                num(m.ks_gumbel),
                num(m.cvm_reference),
            ]
        })
        .collect();
    out.write_csv(
        "maxima_summary.csv",
        &[
            "side",
            "volume",
            "sites",
            "rescale_count",
            "a",
            "b",
            "reference",
            "ks_reference",
            "ks_gumbel",
            "cvm_reference",
        ],
        &rows,
    )?;
    let summaries: Vec<&MaximaSummary> = res.sizes.iter().map(|s| &s.summary).collect();
    out.write_json(
        "maxima_summary.json",
        &serde_json::json!({ "model": cfg.model, "g0": res.g0, "seed": cfg.seed, "replicates": cfg.replicates, "sizes": summaries }),
    )?;
    Ok(())
}
