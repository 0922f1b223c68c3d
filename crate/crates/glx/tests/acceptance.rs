//! Acceptance criteria, one line each. Runs without the libtest harness so
//! every line is printed; exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Result};
use glx::cache::GreenCache;
use glx::experiments::{audit, maxima, pointprocess, steinchen};
use glx::{Engine, RunConfig};
use glx_core::audit::{audit_decay, compare_plateaus, AuditFlag, Direction};
use glx_core::gaussian::conditional_variances;
use glx_core::green::{
    finite_green, stable_density, BoxGreen, FractionalGreen, KilledWalkOracle, ModelKernel, TransitionTable, WalkGreen,
};
use glx_core::model::StableLaw;
use glx_core::rng::{stream_rng, uniform};
use glx_core::special::gamma;
use glx_core::{BoxDomain, ModelSpec, Site};
use serde_json::json;

const TOL: f64 = 1e-12;

type Verdict = Result<(bool, String)>;

fn dgff3() -> ModelSpec {
    ModelSpec::Dgff { dim: 3 }
}
fn membrane5() -> ModelSpec {
    ModelSpec::Membrane { dim: 5 }
}
fn massive(dim: usize, mass: f64) -> ModelSpec {
    ModelSpec::Massive { dim, mass }
}
fn fractional2() -> ModelSpec {
    ModelSpec::Fractional { dim: 2, index: 1.0, scale: 1.0 }
}

fn engine() -> Engine {
    Engine::new(1, GreenCache::disabled(), TOL).expect("engine")
}

fn config(over: serde_json::Value) -> RunConfig {
    RunConfig::from_value(&over).expect("config")
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.1}s of {limit_s}s"))
}

fn c01_closed_form_anchor() -> Verdict {
    let t = Instant::now();
    let model = massive(1, 0.5);
    let want = [2.0 / 3f64.sqrt(), 2.0 * (2.0 / 3f64.sqrt() - 1.0)];
    let w = WalkGreen::new(&model, TOL)?;
    let bessel = [w.value(&Site::origin(1))?, w.value(&Site::axis(1, 1))?];
    // walks on [-40, 40]; leaving costs (1/2)^40 in mass
    let d = BoxDomain::new(1, 81, 0.0)?;
    let kernel = ModelKernel::for_box(&model, &d, TOL)?;
    let oracle = KilledWalkOracle::new(&kernel, d.sites().collect())?;
    let col = oracle.column(40, 1e-13, 100_000)?;
    let walk = [col.values[40], col.values[41]];
    let gap = (0..2).map(|i| (bessel[i] - want[i]).abs().max((walk[i] - want[i]).abs())).fold(0.0, f64::max);
    let (fast, time) = within(t.elapsed(), 1.0);
    Ok((gap <= 1e-6 && fast, format!("max gap {gap:.2e}, {time}")))
}

fn cauchy(d: usize, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let df = d as f64;
    gamma((df + 1.0) / 2.0) / PI.powf((df + 1.0) / 2.0) / (1.0 + r2).powf((df + 1.0) / 2.0)
}

fn c02_cauchy_anchor() -> Verdict {
    let t = Instant::now();
    let mut gap: f64 = 0.0;
    let mut rows: f64 = 0.0;
    for d in [1usize, 2] {
        let law = StableLaw::new(d, 1.0, 1.0)?;
        for i in 0..20 {
            let x: Vec<f64> = match d {
                1 => vec![-3.0 + 0.37 * i as f64],
                _ => vec![0.25 * i as f64 - 1.0, 2.0 - 0.15 * i as f64],
            };
            gap = gap.max((stable_density(&x, law, 1e-10)? - cauchy(d, &x)).abs());
        }
        let table = TransitionTable::new(law, 12, 1e-10)?;
        let (sum, tail) = table.row_sum(12)?;
        rows = rows.max((sum + tail - 1.0).abs());
    }
    let (fast, time) = within(t.elapsed(), 10.0);
    Ok((gap <= 1e-6 && rows <= 1e-4 && fast, format!("density gap {gap:.2e}, row-sum gap {rows:.2e}, {time}")))
}

fn oracle_gap(model: &ModelSpec, side: usize) -> Result<f64> {
    let d = BoxDomain::new(model.dim(), side, 0.0)?;
    let g = finite_green(model, &d, TOL)?;
    let kernel = ModelKernel::for_box(model, &d, TOL)?;
    let oracle = KilledWalkOracle::new(&kernel, d.sites().collect())?;
    let mut gap: f64 = 0.0;
    for b in 0..d.volume() {
        let col = oracle.column(b, 1e-11, 5_000_000)?;
        for a in 0..d.volume() {
            gap = gap.max((col.values[a] - g.get(a, b)).abs());
        }
    }
    Ok(gap)
}

fn c03_oracle_equivalence() -> Verdict {
    let t = Instant::now();
    let cases = [(dgff3(), 4, 1e-8), (massive(1, 0.3), 64, 1e-8), (fractional2(), 8, 1e-8), (membrane5(), 3, 1e-6)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (model, side, tol) in cases {
        let gap = oracle_gap(&model, side)?;
        ok &= gap <= tol;
        detail.push(format!("{} n={side}: {gap:.2e}", model.name()));
    }
    let (fast, time) = within(t.elapsed(), 300.0);
    Ok((ok && fast, format!("{}, {time}", detail.join("; "))))
}

fn c04_conditional_identities() -> Verdict {
    let t = Instant::now();
    let cases = [(massive(2, 0.3), 5), (dgff3(), 4), (fractional2(), 5), (membrane5(), 3)];
    let mut rng = stream_rng(2024, 0);
    let (mut sum_gap, mut route_gap, mut bvp_gap): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for k in 0..20 {
        let (model, side) = cases[k % cases.len()];
        let d = BoxDomain::new(model.dim(), side, 0.0)?;
        let kernel = ModelKernel::for_box(&model, &d, TOL)?;
        let bg = BoxGreen::new(&kernel, &d)?;
        let g = bg.dense()?;
        let n = d.volume();
        let alpha = ((uniform(&mut rng) * n as f64) as usize).min(n - 1);
        let set: Vec<usize> = (0..n).filter(|&i| i != alpha && uniform(&mut rng) < 0.5).collect();
        let c = conditional_variances(&g, &set, alpha, Some(bg.precision()))?;
        sum_gap = sum_gap.max((c.var_mu + c.var_psi - c.variance).abs() / c.variance);
        route_gap = route_gap.max((c.schur_var_psi - c.var_psi).abs());
        bvp_gap = bvp_gap.max((c.markov_var_psi.ok_or_else(|| anyhow!("no BVP route"))? - c.var_psi).abs());
    }
    let (fast, time) = within(t.elapsed(), 120.0);
    Ok((
        sum_gap <= 1e-10 && route_gap <= 1e-8 && bvp_gap <= 1e-8 && fast,
        format!("sum {sum_gap:.1e}, Schur {route_gap:.1e}, BVP {bvp_gap:.1e}, {time}"),
    ))
}

/// `G_n(x, x)` for box sites `x`, one solve per symmetry orbit.
fn diagonal(model: &ModelSpec, side: usize, sites: &[Site]) -> Result<Vec<f64>> {
    let d = BoxDomain::new(model.dim(), side, 0.0)?;
    let bg = BoxGreen::new(&ModelKernel::for_box(model, &d, TOL)?, &d)?;
    let mut memo = BTreeMap::new();
    sites
        .iter()
        .map(|s| {
            let r = bg.rep_of(d.index_of(s).ok_or_else(|| anyhow!("site outside box"))?);
            if let Some(&v) = memo.get(&r) {
                return Ok(v);
            }
            let v = bg.solve_column(r)?[r];
            memo.insert(r, v);
            Ok(v)
        })
        .collect()
}

fn c05_variance_monotonicity() -> Verdict {
    let models = [dgff3(), membrane5(), massive(2, 0.3), fractional2()];
    let mut violations = 0;
    let mut checked = 0;
    for model in models {
        let dim = model.dim();
        for (small, large) in [(3usize, 5usize), (5, 7)] {
            let inner: Vec<Site> = BoxDomain::new(dim, small, 0.0)?.sites().collect();
            let shift = Site::new(&vec![((large - small) / 2) as i64; dim])?;
            let outer: Vec<Site> = inner.iter().map(|s| s.add(&shift)).collect();
            let a = diagonal(&model, small, &inner)?;
            let b = diagonal(&model, large, &outer)?;
            for (x, y) in a.iter().zip(&b) {
                checked += 1;
                if x > y {
                    violations += 1;
                }
            }
        }
    }
    Ok((violations == 0, format!("{violations} violations in {checked} nested pairs")))
}

struct SteinChenRuns {
    dgff: steinchen::SteinChenResult,
    massive: steinchen::SteinChenResult,
    secs: f64,
}

fn steinchen_runs() -> Result<SteinChenRuns> {
    let t = Instant::now();
    let e = engine();
    let base = json!({"z_grid": [-1.0, 0.0, 1.0], "replicates": 20000, "seed": 11});
    let mut dg = base.clone();
    dg["model"] = json!({"kind": "dgff", "dim": 3});
    dg["sizes"] = json!([6, 8, 10]);
    let mut ms = base;
    ms["model"] = json!({"kind": "massive", "dim": 2, "mass": 0.3});
    ms["sizes"] = json!([16, 32, 64]);
    let dgff = steinchen::compute(&config(dg), &e)?;
    let massive = steinchen::compute(&config(ms), &e)?;
    Ok(SteinChenRuns { dgff, massive, secs: t.elapsed().as_secs_f64() })
}

fn c06_stein_chen(runs: &SteinChenRuns) -> Verdict {
    let cells: Vec<_> = runs.dgff.cells.iter().chain(&runs.massive.cells).collect();
    let bad: Vec<String> =
        cells.iter().filter(|c| c.void_gap_ok() != Some(true)).map(|c| format!("n={} z={}", c.side, c.z)).collect();
    let worst = cells
        .iter()
        .map(|c| {
            let m = c.mc.expect("simulated");
            (m.p_void - (-c.report.lambda).exp()).abs() / (c.report.void_gap_bound + 3.0 * m.p_void_se)
        })
        .fold(0.0, f64::max);
    let fast = runs.secs < 1800.0;
    Ok((
        bad.is_empty() && fast,
        format!(
            "{} cells, largest gap/allowance {worst:.3}, misses {:?}, {:.0}s of 1800s",
            cells.len(),
            bad,
            runs.secs
        ),
    ))
}

fn c07_lambda(runs: &SteinChenRuns) -> Verdict {
    let cells: Vec<_> = runs.dgff.cells.iter().chain(&runs.massive.cells).collect();
    let worst = cells
        .iter()
        .map(|c| {
            let m = c.mc.expect("simulated");
            (m.mean - c.report.lambda).abs() / m.mean_se
        })
        .fold(0.0, f64::max);
    let ok = cells.iter().all(|c| c.lambda_ok() == Some(true));
    Ok((ok, format!("largest |E W - lambda| / s.e. = {worst:.2}")))
}

fn c08_b_terms(runs: &SteinChenRuns) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for z in [-1.0, 0.0, 1.0] {
        let cs: Vec<_> = runs.massive.cells.iter().filter(|c| c.z == z).collect();
        for (name, f) in [("b1", 0usize), ("b2", 1), ("b3", 2)] {
            let v: Vec<f64> = cs.iter().map(|c| [c.report.b1, c.report.b2, c.report.b3][f]).collect();
            let dec = v.windows(2).all(|w| w[1] < w[0]);
            ok &= dec && v.len() == 3;
            if !dec {
                detail.push(format!("z={z} {name} {v:?}"));
            }
        }
    }
    Ok((ok, if detail.is_empty() { "strictly decreasing at every z".into() } else { detail.join("; ") }))
}

fn maxima_run(mode: &str, rescale: &str) -> Result<maxima::MaximaResult> {
    let cfg = config(json!({
        "model": {"kind": "massive", "dim": 2, "mass": 0.3},
        "sizes": [16, 32, 64], "replicates": 5000, "delta": 0.1, "seed": 3,
        "maxima": {"mode": mode, "rescale": rescale},
    }));
    maxima::compute(&cfg, &engine())
}

fn c09_gumbel_trend() -> Verdict {
    let res = maxima_run("full", "sites")?;
    let ks: Vec<f64> = res.sizes.iter().map(|s| s.summary.ks_gumbel).collect();
    let trend = ks.windows(2).all(|w| w[1] <= w[0] + 0.01);
    let last = *ks.last().expect("three sizes");
    Ok((trend && last <= 0.15, format!("KS {ks:.4?}")))
}

fn c10_bulk_shift() -> Verdict {
    let res = maxima_run("bulk", "box")?;
    let s = &res.sizes.last().expect("three sizes").summary;
    Ok((
        s.ks_reference < s.ks_gumbel,
        format!("n=64: KS to shifted law {:.4}, to Gumbel {:.4}", s.ks_reference, s.ks_gumbel),
    ))
}

fn pointprocess_run() -> Result<pointprocess::PointProcessResult> {
    let cfg = config(json!({"model": {"kind": "massive", "dim": 2, "mass": 0.3}, "sizes": [64], "seed": 5}));
    pointprocess::compute(&cfg, &engine())
}

fn c11_kallenberg_i(res: &pointprocess::PointProcessResult) -> Verdict {
    let s = &res.sizes[0];
    let means = s.intensity_ok().iter().all(|&b| b);
    let ratios: Vec<f64> = s.summary.cells.iter().map(|c| c.var_over_mean).collect();
    let disp = ratios.iter().all(|r| (0.85..=1.15).contains(r));
    let z: Vec<f64> = s.summary.cells.iter().map(|c| (c.mean - c.intensity.expected) / c.mean_se).collect();
    Ok((means && disp, format!("(mean - intensity)/s.e. {z:.2?}, var/mean {ratios:.3?}")))
}

fn c12_kallenberg_ii(res: &pointprocess::PointProcessResult) -> Verdict {
    let s = &res.sizes[0];
    let k = &s.summary;
    Ok((
        s.joint_void_ok(),
        format!(
            "joint void {:.4} vs {:.4}, bound {:.4} + 3 s.e. {:.4}",
            k.joint_void_freq,
            k.joint_void_limit,
            s.partition.joint_bound,
            3.0 * k.joint_void_se
        ),
    ))
}

fn c13_decay() -> Verdict {
    let m = membrane5();
    let table = audit_decay(&m, &WalkGreen::new(&m, TOL)?, 12)?;
    let window: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r.direction == Direction::Axis && (8.0..=12.0).contains(&r.radius))
        .map(|r| r.normalized)
        .collect();
    let hi = window.iter().copied().fold(f64::MIN, f64::max);
    let lo = window.iter().copied().fold(f64::MAX, f64::min);
    let membrane_spread = (hi - lo) / hi;

    let ms = massive(2, 0.3);
    let corr = audit_decay(&ms, &WalkGreen::new(&ms, TOL)?, 12)?.log_correlation.unwrap_or(0.0);

    let f = fractional2();
    let law = f.stable_law().expect("fractional");
    let small = FractionalGreen::new(law, 24, TOL)?;
    let large = FractionalGreen::new(law, 48, TOL)?;
    let plateau = compare_plateaus(&f, &small, &large, &[3, 4, 5, 6])?;
    Ok((
        membrane_spread <= 0.1 && corr <= -0.999 && plateau.max_relative_gap <= 0.1,
        format!(
            "membrane spread {membrane_spread:.4}, massive corr {corr:.6}, fractional doubling gap {:.4}",
            plateau.max_relative_gap
        ),
    ))
}

fn c14_conditional_variance() -> Verdict {
    let cfg = config(json!({
        "model": {"kind": "massive", "dim": 1, "mass": 0.3},
        "sizes": [64, 128, 256],
        "radius": {"theta": 1.0},
    }));
    let res = audit::compute(&cfg, &engine())?;
    let scaled: Vec<f64> = res.conditional.rows.iter().map(|r| r.scaled).collect();
    let massive_ok = res.conditional.rows.len() == 3 && scaled.windows(2).all(|w| w[1] < w[0]);
    let slope =
        audit::slope_audit(&membrane5(), 11, &[2.0, 3.0, 4.0, 5.0], 1e-10)?.ok_or_else(|| anyhow!("no slope"))?;
    Ok((
        massive_ok && slope.flag == AuditFlag::Pass,
        format!("massive scaled {:?}; membrane slope {:.3} vs {:.1}", scaled, slope.fit.slope, slope.threshold),
    ))
}

fn c15_kappa() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [dgff3(), membrane5(), massive(2, 0.3), fractional2()] {
        match audit::kappa_for(&m, 8.0, TOL)? {
            Ok(k) => {
                ok &= k.kappa > 0.0 && k.kappa <= 1.0;
                detail.push(format!("{} {:.4}", m.name(), k.kappa));
            }
            Err(msg) => {
                ok = false;
                detail.push(format!("{} inconclusive: {msg}", m.name()));
            }
        }
    }
    Ok((ok, detail.join(", ")))
}

fn run_glx(experiment: &str, cfg: &Path, out: &Path, workers: usize) -> Result<()> {
    let status = Command::new(env!("CARGO_BIN_EXE_glx"))
        .args([experiment, "--config"])
        .arg(cfg)
        .args(["--workers", &workers.to_string(), "--out"])
        .arg(out)
        .env_remove("GLX_CACHE_DIR")
        .output()?;
    if !status.status.success() {
        return Err(anyhow!(
            "glx {experiment} exited with {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        ));
    }
    Ok(())
}

fn outputs(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut m = BTreeMap::new();
    for e in std::fs::read_dir(dir)? {
        let e = e?;
        let name = e.file_name().to_string_lossy().into_owned();
        // wall time and worker count are the only run-dependent fields
        if name != "manifest.json" {
            m.insert(name, std::fs::read(e.path())?);
        }
    }
    Ok(m)
}

fn c16_determinism() -> Verdict {
    let tmp = tempfile::tempdir()?;
    let cfg = tmp.path().join("run.json");
    std::fs::write(
        &cfg,
        json!({"model": {"kind": "massive", "dim": 2, "mass": 0.3}, "sizes": [8, 16], "replicates": 1000, "seed": 9})
            .to_string(),
    )?;
    let mut compared = 0;
    for exp in ["sample", "maxima", "steinchen", "pointprocess"] {
        let runs = [("a", 1), ("b", 1), ("c", 4)];
        let mut got = Vec::new();
        for (tag, w) in runs {
            let out = tmp.path().join(format!("{exp}_{tag}"));
            run_glx(exp, &cfg, &out, w)?;
            got.push(outputs(&out)?);
        }
        if got[0] != got[1] || got[0] != got[2] {
            return Ok((false, format!("{exp} outputs differ")));
        }
        compared += got[0].len();
    }
    Ok((true, format!("{compared} files identical over 2 runs and workers 1/4")))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, title: &str, v: Verdict| {
        let (ok, detail) = v.unwrap_or_else(|e| (false, format!("error: {e:#}")));
        if !ok {
            failed += 1;
        }
        println!("criterion {n:>2} {} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    };
    report(1, "massive d=1 closed form", c01_closed_form_anchor());
    report(2, "Cauchy density and row sums", c02_cauchy_anchor());
    report(3, "finite Green vs walk oracle", c03_oracle_equivalence());
    report(4, "conditional identities", c04_conditional_identities());
    report(5, "variance monotonicity", c05_variance_monotonicity());
    match steinchen_runs() {
        Ok(runs) => {
            report(6, "Stein-Chen void gap", c06_stein_chen(&runs));
            report(7, "lambda consistency", c07_lambda(&runs));
            report(8, "b-term decay", c08_b_terms(&runs));
        }
        Err(e) => {
            for (n, t) in [(6, "Stein-Chen void gap"), (7, "lambda consistency"), (8, "b-term decay")] {
                report(n, t, Err(anyhow!("{e:#}")));
            }
        }
    }
    report(9, "Gumbel trend", c09_gumbel_trend());
    report(10, "bulk shift law", c10_bulk_shift());
    match pointprocess_run() {
        Ok(res) => {
            report(11, "Kallenberg (i)", c11_kallenberg_i(&res));
            report(12, "Kallenberg (ii)", c12_kallenberg_ii(&res));
        }
        Err(e) => {
            report(11, "Kallenberg (i)", Err(anyhow!("{e:#}")));
            report(12, "Kallenberg (ii)", Err(anyhow!("{e:#}")));
        }
    }
    report(13, "decay audits", c13_decay());
    report(14, "conditional-variance audit", c14_conditional_variance());
    report(15, "kappa positivity", c15_kappa());
    report(16, "determinism", c16_determinism());
    println!("acceptance: {} of 16 criteria pass", 16 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
