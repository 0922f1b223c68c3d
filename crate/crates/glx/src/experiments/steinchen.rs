//! Stein-Chen bounds over a z-grid and the Monte Carlo law of the exceedance
//! count `W` on the bulk.

use anyhow::Result;
use glx_core::audit::AuditFlag;
use glx_core::evt::{scaling_constants, ScalingConstants};
use glx_core::gaussian::FieldCovariance;
use glx_core::stein_chen::{alpha_terms, assemble_report, build_exceedance_family, B3Rule, SteinChenReport};
use glx_core::BoxDomain;
use serde::Serialize;

use super::Outcome;
use crate::config::RunConfig;
use crate::engine::{self, Engine};
use crate::output::{num, OutputDir};

/// Empirical law of `W` at one level.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountEstimate {
    pub replicates: usize,
    pub p_void: f64,
    pub p_void_se: f64,
    pub mean: f64,
    pub mean_se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteinChenCell {
    pub side: usize,
    pub volume: usize,
    pub bulk_sites: usize,
    pub radius: f64,
    pub z: f64,
    pub u: f64,
    pub report: SteinChenReport,
    pub mc: Option<CountEstimate>,
}

impl SteinChenCell {
    /// `|P(W=0) - e^{-lambda}| <= min(1, 1/lambda)(b1+b2+b3) + 3 s.e.`
    pub fn void_gap_ok(&self) -> Option<bool> {
        self.mc
            .map(|m| (m.p_void - (-self.report.lambda).exp()).abs() <= self.report.void_gap_bound + 3.0 * m.p_void_se)
    }

    /// `|E W - lambda| <= 3 s.e.`
    pub fn lambda_ok(&self) -> Option<bool> {
        self.mc.map(|m| (m.mean - self.report.lambda).abs() <= 3.0 * m.mean_se)
    }
}

#[derive(Debug)]
pub struct SteinChenResult {
    pub g0: f64,
    pub cells: Vec<SteinChenCell>,
}

/// Per replicate, the number of bulk exceedances of each level.
pub fn simulate_counts(
    engine: &Engine,
    field: &FieldCovariance,
    sites: &[usize],
    levels: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<u32>>> {
    let sampler = field.sampler()?;
    let n = field.domain().volume();
    Ok(engine.map(replicates, |r| {
        let mut buf = vec![0.0; n];
        sampler.sample_into(seed, r as u64, &mut buf);
        levels.iter().map(|&u| sites.iter().filter(|&&i| buf[i] > u).count() as u32).collect()
    }))
}

pub fn estimate(counts: &[Vec<u32>], level: usize) -> CountEstimate {
    let r = counts.len() as f64;
    let w: Vec<f64> = counts.iter().map(|c| c[level] as f64).collect();
    let p = w.iter().filter(|&&x| x == 0.0).count() as f64 / r;
    let mean = w.iter().sum::<f64>() / r;
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
    CountEstimate {
        replicates: counts.len(),
        p_void: p,
        p_void_se: (p * (1.0 - p) / r).sqrt(),
        mean,
        mean_se: (var / r).sqrt(),
    }
}

/// Bounds for one level, terms computed on the pool.
pub fn report_for_level(
    cfg: &RunConfig,
    engine: &Engine,
    field: &FieldCovariance,
    u: f64,
    radius: f64,
) -> Result<SteinChenReport> {
    let family = build_exceedance_family(field, u, radius)?;
    let rule = B3Rule::new(cfg.b3)?;
    let terms = engine.map(family.len(), |i| alpha_terms(&family, i, &rule));
    Ok(assemble_report(&family, terms)?)
}

pub fn compute_size(cfg: &RunConfig, engine: &Engine, d: &BoxDomain, g0: f64) -> Result<Vec<SteinChenCell>> {
    let field = engine.field(&cfg.model, d, cfg.variance_mode)?;
    let bulk = d.bulk_indices();
    let scaling: ScalingConstants = scaling_constants(g0, bulk.len() as f64)?;
    let radius = cfg.dependency_radius(d.volume())?;
    let levels: Vec<f64> = cfg.z_grid.iter().map(|&z| scaling.level(z)).collect();
    let counts = if cfg.replicates > 1 {
        Some(simulate_counts(engine, &field, &bulk, &levels, cfg.replicates, cfg.seed)?)
    } else {
        None
    };
    let mut cells = Vec::new();
    for (k, (&z, &u)) in cfg.z_grid.iter().zip(&levels).enumerate() {
        let report = report_for_level(cfg, engine, &field, u, radius)?;
        cells.push(SteinChenCell {
            side: d.side(),
            volume: d.volume(),
            bulk_sites: bulk.len(),
            radius,
            z,
            u,
            report,
            mc: counts.as_ref().map(|c| estimate(c, k)),
        });
    }
    Ok(cells)
}

pub fn compute(cfg: &RunConfig, engine: &Engine) -> Result<SteinChenResult> {
    let g0 = engine::g0(&cfg.model, cfg.tolerance)?;
    let mut cells = Vec::new();
    for d in cfg.domains()? {
        cells.extend(compute_size(cfg, engine, &d, g0)?);
    }
    Ok(SteinChenResult { g0, cells })
}

pub fn write(res: &SteinChenResult, cfg: &RunConfig, out: &mut OutputDir, o: &mut Outcome) -> Result<()> {
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let mut rows = Vec::new();
    for c in &res.cells {
        let r = &c.report;
        let ok = c.void_gap_ok();
        rows.push(vec![
            c.side.to_string(),
            c.volume.to_string(),
            c.bulk_sites.to_string(),
            num(c.radius),
            num(c.z),
            num(c.u),
            num(r.lambda),
            num(r.b1),
            num(r.b2),
            num(r.b3),
            num(r.b3_error),
            r.quadrature_ok.to_string(),
            num(r.tv_bound),
            num(r.void_gap_bound),
            num((-r.lambda).exp()),
            c.mc.map(|m| m.replicates.to_string()).unwrap_or_default(),
            opt(c.mc.map(|m| m.p_void)),
            opt(c.mc.map(|m| m.p_void_se)),
            opt(c.mc.map(|m| m.mean)),
            opt(c.mc.map(|m| m.mean_se)),
            ok.map(|b| b.to_string()).unwrap_or_default(),
        ]);
        o.flag("b3_quadrature", if r.quadrature_ok { AuditFlag::Pass } else { AuditFlag::Inconclusive });
        if let Some(b) = ok {
            o.flag("void_gap_inequality", if b { AuditFlag::Pass } else { AuditFlag::Fail });
        }
    }
    out.write_csv(
        "steinchen.csv",
        &[
            "side",
            "volume",
            "bulk_sites",
            "radius",
            "z",
            "u",
            "lambda",
            "b1",
            "b2",
            "b3",
            "b3_error",
            "quadrature_ok",
            "tv_bound",
            "void_gap_bound",
            "exp_neg_lambda",
            "replicates",
            "p_void",
            "p_void_se",
            "mean_w",
            "mean_w_se",
            "void_gap_ok",
        ],
        &rows,
    )?;
    for (k, c) in res.cells.iter().enumerate() {
        let zi = k % cfg.z_grid.len();
        let tag = format!("n{}_z{zi}", c.side);
        let terms: Vec<Vec<String>> = c
            .report
            .terms
            .iter()
            .map(|t| {
                vec![
                    t.site.to_string(),
                    num(t.p),
                    num(t.b1),
                    num(t.b2),
                    num(t.b3),
                    num(t.b3_error),
                    num(t.var_mu),
                    num(t.var_psi),
                    t.neighbors.to_string(),
                ]
            })
            .collect();
        out.write_csv(
            &format!("steinchen_alpha_{tag}.csv"),
            &["site_index", "p", "b1", "b2", "b3", "b3_error", "var_mu", "var_psi", "neighbors"],
            &terms,
        )?;
        let mut summary = c.report.clone();
        summary.terms.clear();
        out.write_json(
            &format!("steinchen_{tag}.json"),
            &serde_json::json!({
                "model": cfg.model, "side": c.side, "z": c.z, "u": c.u, "radius": c.radius,
                "bulk_sites": c.bulk_sites, "report": summary, "monte_carlo": c.mc,
            }),
        )?;
    }
    if cfg.plotdata {
        for (zi, z) in cfg.z_grid.iter().enumerate() {
            let mut pts = Vec::new();
            for (name, f) in [("b1", 0), ("b2", 1), ("b3", 2)] {
                for c in res.cells.iter().filter(|c| c.z == *z) {
                    let v = [c.report.b1, c.report.b2, c.report.b3][f];
                    pts.push((c.volume as f64, v, name.to_string()));
                }
            }
            out.write_plot(&format!("plot_bterms_z{zi}.csv"), &pts)?;
        }
    }
    Ok(())
}
