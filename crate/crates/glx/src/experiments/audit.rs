//! Hypothesis audits: covariance decay, finite versus infinite volume,
//! conditional-mean variance and `kappa`.

use anyhow::Result;
use glx_core::audit::{
    audit_decay, compare_plateaus, conditional_slope, conditional_variance_row, conditional_variance_table,
    finite_vs_infinite_row, finite_vs_infinite_table, skipped_row, AuditFlag, ConditionalVarianceTable, DecayTable,
    FiniteVsInfiniteTable, PlateauComparison, SlopeFit,
};
use glx_core::gaussian::VarianceMode;
use glx_core::green::{kappa, FractionalGreen, KappaEstimate, ModelKernel};
use glx_core::{BoxDomain, Error, ModelSpec};
use serde::Serialize;

use super::Outcome;
use crate::config::{RunConfig, INFINITE_MODE_MAX_VOLUME};
use crate::engine::{self, Engine};
use crate::output::{num, OutputDir};

/// Largest fractional truncation radius built for the finite-volume comparison.
const FRACTIONAL_MAX_BOX: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct SlopeAudit {
    pub side: usize,
    pub fit: SlopeFit,
    pub threshold: f64,
    pub flag: AuditFlag,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditResult {
    pub model: ModelSpec,
    pub g0: f64,
    pub decay: DecayTable,
    pub plateau: Option<PlateauComparison>,
    /// `None` when disabled in the config
    pub finite_vs_infinite: Option<FiniteVsInfiniteTable>,
    pub conditional: ConditionalVarianceTable,
    /// sizes left out of the conditional-variance table and why
    pub conditional_skipped: Vec<(usize, String)>,
    pub slope: Option<SlopeAudit>,
    pub kappa: std::result::Result<KappaEstimate, String>,
}

impl AuditResult {
    pub fn kappa_flag(&self) -> AuditFlag {
        if self.kappa.is_ok() {
            AuditFlag::Pass
        } else {
            AuditFlag::Inconclusive
        }
    }
}

/// `kappa` with a tail certificate; an unsettled certificate is reported.
pub fn kappa_for(model: &ModelSpec, radius: f64, tol: f64) -> Result<std::result::Result<KappaEstimate, String>> {
    let g = engine::stationary(model, radius, tol)?;
    match kappa(model, g.as_ref(), radius) {
        Ok(k) => Ok(Ok(k)),
        Err(Error::Inconclusive(m)) => Ok(Err(m)),
        Err(e) => Err(e.into()),
    }
}

/// Slope of `log Var[mu]` against `log s` at the centre of a box of side
/// `side`; passes when it is at most `-(d - 4) + 1/2` (membrane) or
/// `-(d - 2) + 1/2` (dgff).
pub fn slope_audit(model: &ModelSpec, side: usize, radii: &[f64], tol: f64) -> Result<Option<SlopeAudit>> {
    let p = match model {
        ModelSpec::Membrane { .. } | ModelSpec::Dgff { .. } => model.decay_power().expect("power-law model"),
        _ => return Ok(None),
    };
    let d = BoxDomain::new(model.dim(), side, 0.0)?;
    let kernel = ModelKernel::for_box(model, &d, tol)?;
    let sites: Vec<_> = d.sites().collect();
    let q = kernel.precision(&sites)?;
    let fit = conditional_slope(&q, &d, radii, tol)?;
    let threshold = -p + 0.5;
    let flag = if fit.slope <= threshold { AuditFlag::Pass } else { AuditFlag::Fail };
    Ok(Some(SlopeAudit { side, fit, threshold, flag }))
}

pub fn compute(cfg: &RunConfig, engine: &Engine) -> Result<AuditResult> {
    let model = cfg.model;
    let tol = cfg.tolerance;
    let a = &cfg.audit;
    let g0 = engine::g0(&model, tol)?;
    let g = engine::stationary(&model, a.decay_radius as f64, tol)?;
    let decay = audit_decay(&model, g.as_ref(), a.decay_radius)?;
    let plateau = match model.stable_law() {
        Some(law) => {
            let small = FractionalGreen::new(law, a.plateau.box_radius, tol)?;
            let large = FractionalGreen::new(law, 2 * a.plateau.box_radius, tol)?;
            Some(compare_plateaus(&model, &small, &large, &a.plateau.radii)?)
        }
        None => None,
    };
    let kappa = kappa_for(&model, a.kappa_radius, tol)?;
    let policy = cfg.policy()?;
    let mut fvi = Vec::new();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for d in cfg.domains()? {
        if d.volume() > INFINITE_MODE_MAX_VOLUME {
            let note = format!("volume {} above the dense limit {INFINITE_MODE_MAX_VOLUME}", d.volume());
            if a.finite_vs_infinite {
                fvi.push(skipped_row(d.side(), d.dim(), note.clone()));
            }
            skipped.push((d.side(), note));
            continue;
        }
        let (bg, green) = engine.box_green(&model, &d)?;
        let reach = (d.side() - 1) as f64 * (d.dim() as f64).sqrt();
        if a.finite_vs_infinite && model.stable_law().is_some() && 4.0 * reach > FRACTIONAL_MAX_BOX as f64 {
            fvi.push(skipped_row(
                d.side(),
                d.dim(),
                format!("fractional truncation radius above {FRACTIONAL_MAX_BOX}"),
            ));
        } else if a.finite_vs_infinite {
            let gi = engine::stationary(&model, reach, tol)?;
            fvi.push(finite_vs_infinite_row(&green, gi.as_ref())?);
        }
        let field = glx_core::gaussian::FieldCovariance::from_box_green(&bg, &green);
        debug_assert_eq!(field.mode(), VarianceMode::Finite);
        let k = kappa.as_ref().ok().map(|k| k.kappa);
        match conditional_variance_row(&field, &policy, g0, a.z, k) {
            Ok(r) => rows.push(r),
            Err(e @ (Error::InvalidParameter(_) | Error::Range(_))) => skipped.push((d.side(), e.to_string())),
            Err(e) => return Err(e.into()),
        }
    }
    let slope = slope_audit(&model, a.slope.side, &a.slope.radii, a.slope.tol)?;
    Ok(AuditResult {
        model,
        g0,
        decay,
        plateau,
        finite_vs_infinite: a.finite_vs_infinite.then(|| finite_vs_infinite_table(fvi)),
        conditional: conditional_variance_table(rows),
        conditional_skipped: skipped,
        slope,
        kappa,
    })
}

pub fn write(res: &AuditResult, cfg: &RunConfig, out: &mut OutputDir, o: &mut Outcome) -> Result<()> {
    let rows: Vec<Vec<String>> = res
        .decay
        .rows
        .iter()
        .map(|r| {
            vec![r.direction.as_str().to_string(), r.step.to_string(), num(r.radius), num(r.value), num(r.normalized)]
        })
        .collect();
    out.write_csv("audit_decay.csv", &["direction", "step", "radius", "value", "normalized"], &rows)?;
    if cfg.plotdata {
        let pts: Vec<(f64, f64, String)> =
            res.decay.rows.iter().map(|r| (r.radius, r.normalized, r.direction.as_str().to_string())).collect();
        out.write_plot("plot_decay.csv", &pts)?;
    }
    if let Some(p) = &res.plateau {
        let rows: Vec<Vec<String>> =
            (0..p.radii.len()).map(|i| vec![p.radii[i].to_string(), num(p.small[i]), num(p.large[i])]).collect();
        out.write_csv("audit_plateau.csv", &["radius", "normalized_r", "normalized_2r"], &rows)?;
    }
    if let Some(t) = &res.finite_vs_infinite {
        let rows: Vec<Vec<String>> = t
            .rows
            .iter()
            .map(|r| {
                let done = r.skipped.is_none();
                let v = |x: f64| if done { num(x) } else { String::new() };
                vec![
                    r.side.to_string(),
                    r.volume.to_string(),
                    v(r.lower_dev),
                    v(r.upper_dev),
                    v(r.diag_excess),
                    if done { r.diag_monotone.to_string() } else { String::new() },
                    r.skipped.clone().unwrap_or_default(),
                ]
            })
            .collect();
        out.write_csv(
            "audit_finite_vs_infinite.csv",
            &["side", "volume", "lower_dev", "upper_dev", "diag_excess", "diag_monotone", "skipped"],
            &rows,
        )?;
    }
    let rows: Vec<Vec<String>> = res
        .conditional
        .rows
        .iter()
        .map(|r| {
            vec![
                r.side.to_string(),
                r.volume.to_string(),
                num(r.radius),
                num(r.sup_var_mu),
                num(r.scaled),
                num(r.claim),
                r.kappa_link.map(|k| num(k.ratio)).unwrap_or_default(),
            ]
        })
        .collect();
    out.write_csv(
        "audit_conditional_variance.csv",
        &["side", "volume", "radius", "sup_var_mu", "scaled", "claim", "kappa_ratio"],
        &rows,
    )?;
    if let Some(s) = &res.slope {
        let rows: Vec<Vec<String>> = s.fit.points.iter().map(|&(r, v)| vec![num(r), num(v)]).collect();
        out.write_csv("audit_slope.csv", &["radius", "var_mu"], &rows)?;
    }
    o.flag("decay", res.decay.flag);
    if let Some(p) = &res.plateau {
        o.flag("plateau_doubling", p.flag);
    }
    if let Some(t) = &res.finite_vs_infinite {
        o.flag("finite_vs_infinite", t.flag);
    }
    o.flag("conditional_variance", res.conditional.flag);
    if let Some(s) = &res.slope {
        o.flag("conditional_slope", s.flag);
    }
    o.flag("kappa", res.kappa_flag());
    let flags: std::collections::BTreeMap<&str, &str> = o.flags.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    let kappa = match &res.kappa {
        Ok(k) => serde_json::to_value(k)?,
        Err(m) => serde_json::json!({ "inconclusive": m }),
    };
    out.write_json(
        "audit.json",
        &serde_json::json!({
            "model": res.model,
            "g0": res.g0,
            "flags": flags,
            "decay": { "plateau": res.decay.plateau, "log_correlation": res.decay.log_correlation,
                       "step_ratio": res.decay.step_ratio, "note": res.decay.note },
            "plateau_doubling": res.plateau,
            "conditional_skipped": res.conditional_skipped,
            "slope": res.slope,
            "kappa": kappa,
        }),
    )?;
    Ok(())
}
