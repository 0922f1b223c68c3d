//! Finite-volume Green matrices per box size, their diagonals against the
//! infinite-volume `g(0)`, and `kappa`.

use anyhow::Result;
use glx_core::audit::AuditFlag;
use glx_core::green::{kappa, GreenMatrix, KappaEstimate};
use glx_core::Error;
use serde::Serialize;

use super::{domain_label, Outcome};
use crate::config::RunConfig;
use crate::engine::{self, Engine};
use crate::output::{num, OutputDir};

#[derive(Debug, Clone, Serialize)]
pub struct SizeSummary {
    pub side: usize,
    pub volume: usize,
    pub min_diag: f64,
    pub max_diag: f64,
    pub centre_diag: f64,
}

#[derive(Debug)]
pub struct CovarianceResult {
    pub g0: f64,
    pub greens: Vec<GreenMatrix>,
    pub sizes: Vec<SizeSummary>,
    pub kappa: std::result::Result<KappaEstimate, String>,
}

pub fn compute(cfg: &RunConfig, engine: &Engine) -> Result<CovarianceResult> {
    let g0 = engine::g0(&cfg.model, cfg.tolerance)?;
    let mut greens = Vec::new();
    let mut sizes = Vec::new();
    for d in cfg.domains()? {
        let (_, g) = engine.box_green(&cfg.model, &d)?;
        let diag = g.diag();
        let c = d.side() as i64 / 2;
        let centre = d.index_of(&glx_core::Site::new(&vec![c; d.dim()])?).expect("centre inside");
        sizes.push(SizeSummary {
            side: d.side(),
            volume: d.volume(),
            min_diag: diag.iter().copied().fold(f64::INFINITY, f64::min),
            max_diag: diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            centre_diag: diag[centre],
        });
        greens.push(g);
    }
    let r = cfg.covariance.kappa_radius;
    let g = engine::stationary(&cfg.model, r, cfg.tolerance)?;
    let kappa = match kappa(&cfg.model, g.as_ref(), r) {
        Ok(k) => Ok(k),
        Err(Error::Inconclusive(m)) => Err(m),
        Err(e) => return Err(e.into()),
    };
    Ok(CovarianceResult { g0, greens, sizes, kappa })
}

pub fn write(res: &CovarianceResult, cfg: &RunConfig, out: &mut OutputDir, o: &mut Outcome) -> Result<()> {
    if cfg.covariance.export_matrix {
        for g in &res.greens {
            let n = g.domain().volume();
            let mut rows = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                for j in i..n {
                    rows.push(vec![i.to_string(), j.to_string(), num(g.get(i, j))]);
                }
            }
            out.write_csv(&format!("green_{}.csv", domain_label(g.domain())), &["row", "col", "value"], &rows)?;
        }
    }
    let rows: Vec<Vec<String>> = res
        .sizes
        .iter()
        .map(|s| {
            vec![
                s.side.to_string(),
                s.volume.to_string(),
                num(s.min_diag),
                num(s.max_diag),
                num(s.centre_diag),
                num(res.g0),
            ]
        })
        .collect();
    out.write_csv("covariance.csv", &["side", "volume", "min_diag", "max_diag", "centre_diag", "g0"], &rows)?;
    let flag = match &res.kappa {
        Ok(_) => AuditFlag::Pass,
        Err(_) => AuditFlag::Inconclusive,
    };
    o.flag("kappa", flag);
    let k = match &res.kappa {
        Ok(k) => serde_json::to_value(k)?,
        Err(m) => serde_json::json!({ "inconclusive": m }),
    };
    out.write_json("kappa.json", &serde_json::json!({ "model": cfg.model, "g0": res.g0, "kappa": k, "flag": flag }))?;
    Ok(())
}
