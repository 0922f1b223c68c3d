//! Poisson approximation of exceedance counts: `lambda`, `b1`, `b2`, `b3`
//! and the resulting total-variation and void-probability bounds.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gaussian::{residual_variances, FieldCovariance, VarianceMode};
use crate::quadrature::{adaptive_gk15, gauss_hermite};
use crate::special::{bvn_rectangle, norm_pdf, norm_sf, normal_interval};

/// Exceedance probability with the Mills-ratio bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExceedProb {
    pub p: f64,
    /// `((1 - 1/t^2) phi(t)/t, phi(t)/t)` with `t = u/sigma`, only for `u > 0`
    pub bracket: Option<(f64, f64)>,
}

pub fn exceed_prob(variance: f64, u: f64) -> Result<ExceedProb> {
    if !(variance > 0.0) {
        return Err(Error::InvalidParameter(format!("variance must be positive (got {variance})")));
    }
    let t = u / libm::sqrt(variance);
    let p = norm_sf(t);
    let bracket = (u > 0.0).then(|| {
        let m = norm_pdf(t) / t;
        ((1.0 - 1.0 / (t * t)) * m, m)
    });
    Ok(ExceedProb { p, bracket })
}

/// Joint exceedance of a bivariate normal pair with the Savage bound.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BivariateExceed {
    pub p: f64,
    /// present when both `Delta_i > 0`
    pub savage: Option<f64>,
    pub degenerate: bool,
}

/// Correlations this close to `+-1` use the one-dimensional branch.
const DEGENERATE_GAP: f64 = 1e-12;

pub fn bivariate_exceed_prob(v1: f64, v2: f64, c: f64, u: f64) -> Result<BivariateExceed> {
    if !(v1 > 0.0 && v2 > 0.0) {
        return Err(Error::InvalidParameter("variances must be positive".into()));
    }
    let (s1, s2) = (libm::sqrt(v1), libm::sqrt(v2));
    let r = c / (s1 * s2);
    if r.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("not a covariance: correlation {r}")));
    }
    if 1.0 - r.abs() < DEGENERATE_GAP {
        let p = if r > 0.0 {
            norm_sf(u / s1.min(s2))
        } else {
            (crate::special::norm_cdf(-u / s2) - crate::special::norm_cdf(u / s1)).max(0.0)
        };
        return Ok(BivariateExceed { p, savage: None, degenerate: true });
    }
    let p = crate::special::bvn_upper(u / s1, u / s2, r);
    let det = v1 * v2 - c * c;
    let d1 = u * (v2 - c) / det;
    let d2 = u * (v1 - c) / det;
    let savage = (d1 > 0.0 && d2 > 0.0).then(|| {
        let q = u * u * (v1 + v2 - 2.0 * c) / det;
        libm::exp(-0.5 * q) / (2.0 * core::f64::consts::PI * libm::sqrt(det) * d1 * d2)
    });
    Ok(BivariateExceed { p, savage, degenerate: false })
}

/// Pair bound `(1+r)^{3/2} (1-r)^{-1/2} m^{-2/(1+r)} e^{-2z/(1+r)}` for
/// normalized correlation `r = g(alpha-beta)/g(0)`, valid up to factors
/// `1 + o(1)`.
pub fn pair_form_bound(r: f64, m: f64, z: f64) -> f64 {
    libm::pow(1.0 + r, 1.5) / libm::sqrt(1.0 - r) * libm::pow(m, -2.0 / (1.0 + r)) * libm::exp(-2.0 * z / (1.0 + r))
}

/// Uniform pair bound in terms of `kappa`.
pub fn kappa_form_bound(kappa: f64, m: f64, z: f64) -> f64 {
    let e = if z <= 0.0 { libm::exp(-2.0 * z) } else { libm::exp(-2.0 * z / (2.0 - kappa)) };
    libm::pow(2.0 - kappa, 1.5) / libm::sqrt(kappa) * libm::pow(m, -2.0 / (2.0 - kappa)) * e
}

/// Finite union of disjoint half-open intervals `(lo, hi]` in field units;
/// `hi` may be `+inf`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    intervals: Vec<(f64, f64)>,
}

impl Event {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidParameter("event needs at least one interval".into()));
        }
        for &(lo, hi) in &intervals {
            if lo.is_nan() || hi.is_nan() || !(lo < hi) || lo == f64::INFINITY {
                return Err(Error::InvalidParameter(format!("bad interval ({lo}, {hi}]")));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if intervals.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::InvalidParameter("intervals overlap".into()));
        }
        Ok(Event { intervals })
    }

    /// `{x > u}`.
    pub fn exceedance(u: f64) -> Self {
        Event { intervals: vec![(u, f64::INFINITY)] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Threshold of a pure exceedance event.
    pub fn threshold(&self) -> Option<f64> {
        match self.intervals.as_slice() {
            [(lo, hi)] if *hi == f64::INFINITY => Some(*lo),
            _ => None,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo < x && x <= hi)
    }

    /// `P(X in event)` for `X ~ N(0, sd^2)`.
    pub fn prob(&self, sd: f64) -> f64 {
        self.intervals.iter().map(|&(lo, hi)| normal_interval(lo, hi, sd)).sum()
    }

    /// `P(mu + Y in event)` for `Y ~ N(0, sd^2)`; `sd = 0` is the indicator.
    pub fn conditional_prob(&self, mu: f64, sd: f64) -> f64 {
        if sd <= 0.0 {
            return if self.contains(mu) { 1.0 } else { 0.0 };
        }
        self.intervals.iter().map(|&(lo, hi)| normal_interval(lo - mu, hi - mu, sd)).sum()
    }

    /// `P(X in self, Y in other)`.
    pub fn joint_prob(&self, other: &Event, s1: f64, s2: f64, c: f64) -> f64 {
        let mut p = 0.0;
        for &(a1, b1) in &self.intervals {
            for &(a2, b2) in &other.intervals {
                p += bvn_rectangle(a1, b1, a2, b2, s1, s2, c);
            }
        }
        p
    }
}

/// Indicators `X_alpha = 1{phi_alpha in R_cell(alpha)}` over an index set
/// with ball neighborhoods.
#[derive(Debug, Clone)]
pub struct BernoulliFamily {
    pub mode: VarianceMode,
    /// box indices of the index set `A`
    pub sites: Vec<usize>,
    pub cell_of: Vec<usize>,
    pub events: Vec<Event>,
    pub radius: f64,
    pub variances: Vec<f64>,
    pub probs: Vec<f64>,
    /// local indices of `B_alpha`, sorted, including `alpha`
    pub neighbors: Vec<Vec<usize>>,
    /// covariances aligned with `neighbors`
    pub neighbor_covs: Vec<Vec<f64>>,
    pub var_mu: Vec<f64>,
    pub var_psi: Vec<f64>,
}

/// Family over `sites` with cell `cell_of[i]` carrying event `events[cell]`
/// and `B_alpha = ball(alpha, radius)` intersected with the index set.
pub fn build_family(
    field: &FieldCovariance,
    sites: &[usize],
    cell_of: &[usize],
    events: &[Event],
    radius: f64,
) -> Result<BernoulliFamily> {
    if sites.is_empty() {
        return Err(Error::InvalidParameter("empty index set".into()));
    }
    if cell_of.len() != sites.len() || cell_of.iter().any(|&c| c >= events.len()) {
        return Err(Error::InvalidParameter("cell labels do not match the index set".into()));
    }
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be nonnegative (got {radius})")));
    }
    let domain = field.domain();
    let mut local = vec![usize::MAX; domain.volume()];
    for (i, &a) in sites.iter().enumerate() {
        if a >= domain.volume() || local[a] != usize::MAX {
            return Err(Error::InvalidParameter(format!("bad or repeated site {a}")));
        }
        local[a] = i;
    }
    let cov = field.covariance();
    let mut neighbors = Vec::with_capacity(sites.len());
    let mut neighbor_covs = Vec::with_capacity(sites.len());
    let mut free_sets = Vec::with_capacity(sites.len());
    for &a in sites {
        let ball = domain.ball_indices(&domain.site(a), radius);
        let mut nb: Vec<usize> = ball.iter().filter(|&&b| local[b] != usize::MAX).map(|&b| local[b]).collect();
        nb.sort_unstable();
        neighbor_covs.push(nb.iter().map(|&j| cov.get(a, sites[j])).collect());
        let mut free: Vec<usize> = nb.iter().map(|&j| sites[j]).collect();
        free.sort_unstable();
        free_sets.push(free);
        neighbors.push(nb);
    }
    let variances: Vec<f64> = sites.iter().map(|&a| field.variance(a)).collect();
    let probs = variances.iter().zip(cell_of).map(|(&v, &c)| events[c].prob(libm::sqrt(v))).collect();
    let var_psi = residual_variances(field, sites, &free_sets)?;
    let var_mu = variances.iter().zip(&var_psi).map(|(&v, &p)| (v - p).max(0.0)).collect();
    Ok(BernoulliFamily {
        mode: field.mode(),
        sites: sites.to_vec(),
        cell_of: cell_of.to_vec(),
        events: events.to_vec(),
        radius,
        variances,
        probs,
        neighbors,
        neighbor_covs,
        var_mu,
        var_psi,
    })
}

/// Exceedance family `X_alpha = 1{phi_alpha > u}` over the bulk.
pub fn build_exceedance_family(field: &FieldCovariance, u: f64, radius: f64) -> Result<BernoulliFamily> {
    let sites = field.domain().bulk_indices();
    if sites.is_empty() {
        return Err(Error::InvalidParameter("bulk is empty".into()));
    }
    let cells = vec![0; sites.len()];
    build_family(field, &sites, &cells, &[Event::exceedance(u)], radius)
}

impl BernoulliFamily {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        pairwise_sum(&self.probs)
    }

    pub fn event_of(&self, i: usize) -> &Event {
        &self.events[self.cell_of[i]]
    }

    /// Local indices grouped by cell.
    pub fn cell_partition(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.events.len()];
        for (i, &c) in self.cell_of.iter().enumerate() {
            cells[c].push(i);
        }
        cells
    }

    /// `X_alpha` for a field realization on the whole box.
    pub fn indicator(&self, i: usize, values: &[f64]) -> bool {
        self.event_of(i).contains(values[self.sites[i]])
    }
}

/// Rule for the one-dimensional `b3` integral over the conditional mean.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "method", rename_all = "snake_case"))]
pub enum B3Method {
    /// Gauss-Hermite rule; the doubled rule estimates the error
    GaussHermite { nodes: usize },
    /// adaptive Gauss-Kronrod split where the integrand changes sign
    KinkSplit,
}

impl Default for B3Method {
    fn default() -> Self {
        B3Method::GaussHermite { nodes: 64 }
    }
}

/// Precomputed quadrature nodes for `b3`.
#[derive(Debug, Clone)]
pub struct B3Rule {
    method: B3Method,
    nodes: Vec<(f64, f64)>,
    check: Vec<(f64, f64)>,
}

fn hermite_pairs(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_hermite(n);
    let c = 1.0 / libm::sqrt(core::f64::consts::PI);
    x.iter().zip(&w).map(|(&x, &w)| (core::f64::consts::SQRT_2 * x, w * c)).collect()
}

impl B3Rule {
    pub fn new(method: B3Method) -> Result<Self> {
        match method {
            B3Method::GaussHermite { nodes } => {
                if nodes < 2 {
                    return Err(Error::InvalidParameter("Gauss-Hermite rule needs at least 2 nodes".into()));
                }
                Ok(B3Rule { method, nodes: hermite_pairs(nodes), check: hermite_pairs(2 * nodes) })
            }
            B3Method::KinkSplit => Ok(B3Rule { method, nodes: Vec::new(), check: Vec::new() }),
        }
    }

    pub fn method(&self) -> B3Method {
        self.method
    }

    /// `(E|P(X=1 | mu) - p|, error estimate)` for `mu ~ N(0, var_mu)`.
    pub fn integrate(&self, event: &Event, p: f64, var_mu: f64, var_psi: f64) -> (f64, f64) {
        if var_mu <= 0.0 {
            return (0.0, 0.0);
        }
        let sm = libm::sqrt(var_mu);
        let sp = libm::sqrt(var_psi.max(0.0));
        let f = |t: f64| libm::fabs(event.conditional_prob(sm * t, sp) - p);
        match self.method {
            B3Method::GaussHermite { .. } => {
                let a: f64 = self.nodes.iter().map(|&(t, w)| w * f(t)).sum();
                let b: f64 = self.check.iter().map(|&(t, w)| w * f(t)).sum();
                (a, libm::fabs(a - b))
            }
            B3Method::KinkSplit => {
                let g = |t: f64| f(t) * norm_pdf(t);
                let mut cuts = vec![-12.0];
                if let (Some(u), true) = (event.threshold(), sp > 0.0) {
                    // P(mu + psi > u) = p where mu = u - sp * Phi_bar^{-1}(p); with
                    // p = Phi_bar(u/sigma) that point is u (1 - sp/sigma).
                    let sigma = libm::sqrt(var_mu + var_psi);
                    let t0 = u * (1.0 - sp / sigma) / sm;
                    if t0 > -12.0 && t0 < 12.0 {
                        cuts.push(t0);
                    }
                }
                cuts.push(12.0);
                let mut value = 0.0;
                let mut err = 0.0;
                for w in cuts.windows(2) {
                    let r = adaptive_gk15(&g, w[0], w[1], 1e-300, 1e-10, 50);
                    value += r.value;
                    err += r.error;
                }
                (value, err)
            }
        }
    }
}

/// Per-site contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaTerms {
    pub site: usize,
    pub cell: usize,
    pub p: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b3_error: f64,
    pub var_mu: f64,
    pub var_psi: f64,
    pub neighbors: usize,
}

/// Contributions of local index `i`.
pub fn alpha_terms(family: &BernoulliFamily, i: usize, rule: &B3Rule) -> AlphaTerms {
    let nb = &family.neighbors[i];
    let p = family.probs[i];
    let b1 = p * pairwise_sum(&nb.iter().map(|&j| family.probs[j]).collect::<Vec<_>>());
    let si = libm::sqrt(family.variances[i]);
    let ev = family.event_of(i);
    let pairs: Vec<f64> = nb
        .iter()
        .zip(&family.neighbor_covs[i])
        .filter(|(&j, _)| j != i)
        .map(|(&j, &c)| ev.joint_prob(family.event_of(j), si, libm::sqrt(family.variances[j]), c))
        .collect();
    let b2 = pairwise_sum(&pairs);
    let (b3, b3_error) = rule.integrate(ev, p, family.var_mu[i], family.var_psi[i]);
    AlphaTerms {
        site: family.sites[i],
        cell: family.cell_of[i],
        p,
        b1,
        b2,
        b3,
        b3_error,
        var_mu: family.var_mu[i],
        var_psi: family.var_psi[i],
        neighbors: nb.len(),
    }
}

/// Totals and guarantees for the family.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SteinChenReport {
    pub mode: VarianceMode,
    pub lambda: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// `2 (b1 + b2 + b3)`
    pub tv_bound: f64,
    /// `min(1, 1/lambda) (b1 + b2 + b3)`
    pub void_gap_bound: f64,
    pub b3_error: f64,
    pub quadrature_ok: bool,
    pub terms: Vec<AlphaTerms>,
}

/// Report from per-site terms in local-index order; sums use a fixed
/// pairwise tree so the totals do not depend on how the terms were produced.
pub fn assemble_report(family: &BernoulliFamily, terms: Vec<AlphaTerms>) -> Result<SteinChenReport> {
    if terms.len() != family.len() {
        return Err(Error::Consistency(format!("{} terms for {} sites", terms.len(), family.len())));
    }
    let col = |f: fn(&AlphaTerms) -> f64| pairwise_sum(&terms.iter().map(f).collect::<Vec<_>>());
    let lambda = col(|t| t.p);
    let b1 = col(|t| t.b1);
    let b2 = col(|t| t.b2);
    let b3 = col(|t| t.b3);
    let b3_error = col(|t| t.b3_error);
    if !(lambda > 0.0) {
        return Err(Error::Range(format!("lambda = {lambda:e} is not positive")));
    }
    let s = b1 + b2 + b3;
    Ok(SteinChenReport {
        mode: family.mode,
        lambda,
        b1,
        b2,
        b3,
        tv_bound: 2.0 * s,
        void_gap_bound: (1.0f64).min(1.0 / lambda) * s,
        b3_error,
        quadrature_ok: b3_error <= 0.01 * b3 || b3_error < 1e-15,
        terms,
    })
}

pub fn compute_bounds(family: &BernoulliFamily, method: B3Method) -> Result<SteinChenReport> {
    let rule = B3Rule::new(method)?;
    let terms = (0..family.len()).map(|i| alpha_terms(family, i, &rule)).collect();
    assemble_report(family, terms)
}

/// `min(1, 1/lambda) (b1 + b2 + b3)`.
pub fn poisson_gap_bound(report: &SteinChenReport) -> f64 {
    gap_bound(report.lambda, report.b1 + report.b2 + report.b3)
}

pub fn gap_bound(lambda: f64, b_sum: f64) -> f64 {
    (1.0f64).min(1.0 / lambda) * b_sum
}

/// Joint guarantee for the cell counts of a partition of the index set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionReport {
    pub cell_sizes: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub min_lambda: f64,
    /// `2 min(1, 1.4 min_j lambda_j^{-1/2}) (2 b1 + 2 b2 + b3)`
    pub joint_bound: f64,
}

pub fn partition_bound(min_lambda: f64, b1: f64, b2: f64, b3: f64) -> f64 {
    2.0 * (1.0f64).min(1.4 / libm::sqrt(min_lambda)) * (2.0 * b1 + 2.0 * b2 + b3)
}

/// `partition` holds local indices of the family.
pub fn multivariate_tv_bound(
    family: &BernoulliFamily,
    report: &SteinChenReport,
    partition: &[Vec<usize>],
) -> Result<PartitionReport> {
    let mut seen = vec![false; family.len()];
    for cell in partition {
        if cell.is_empty() {
            return Err(Error::Partition("empty cell".into()));
        }
        for &i in cell {
            if i >= family.len() || seen[i] {
                return Err(Error::Partition(format!("index {i} out of range or repeated")));
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|s| !s) || partition.is_empty() {
        return Err(Error::Partition("cells do not cover the index set".into()));
    }
    let lambdas: Vec<f64> =
        partition.iter().map(|c| pairwise_sum(&c.iter().map(|&i| family.probs[i]).collect::<Vec<_>>())).collect();
    let min_lambda = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PartitionReport {
        cell_sizes: partition.iter().map(Vec::len).collect(),
        joint_bound: partition_bound(min_lambda, report.b1, report.b2, report.b3),
        lambdas,
        min_lambda,
    })
}

/// Sum by recursive halving; the tree depends only on the length.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}
