//! Exact Gaussian sampling and the conditional decomposition `phi = mu + psi`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::green::{BoxGreen, GreenMatrix, ModelKernel, Precision, PrecisionFactor, StationaryCovariance};
use crate::lattice::{BoxDomain, Site};
use crate::linalg::{Cholesky, DenseMatrix};
use crate::model::ModelSpec;
use crate::rng::{fill_standard_normal, stream_rng};

/// Tolerance of the cross-checks between the conditional-variance routes.
pub const CROSS_CHECK_TOL: f64 = 1e-8;

/// One draw of the field on the box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldSample {
    pub seed: u64,
    pub replicate: u64,
    pub values: Vec<f64>,
}

/// Centered Gaussian sampler in covariance form (`x = L z`) or precision
/// form (`x = L^{-T} z` with `Q = L L^T`).
#[derive(Debug, Clone)]
pub enum Sampler {
    Covariance(Cholesky),
    Precision(PrecisionFactor),
}

impl Sampler {
    pub fn from_covariance(cov: &DenseMatrix) -> Result<Self> {
        Ok(Sampler::Covariance(cov.cholesky()?))
    }

    pub fn from_precision(q: &Precision) -> Result<Self> {
        Ok(Sampler::Precision(q.factor()?))
    }

    pub fn n(&self) -> usize {
        match self {
            Sampler::Covariance(c) => c.n(),
            Sampler::Precision(f) => f.n(),
        }
    }

    /// Writes replicate `replicate` of stream `seed` into `out`.
    pub fn sample_into(&self, seed: u64, replicate: u64, out: &mut [f64]) {
        let mut rng = stream_rng(seed, replicate);
        fill_standard_normal(&mut rng, out);
        match self {
            Sampler::Covariance(c) => c.lower_mul_in_place(out),
            Sampler::Precision(f) => f.sample_from_white(out),
        }
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> FieldSample {
        let mut values = vec![0.0; self.n()];
        self.sample_into(seed, replicate, &mut values);
        FieldSample { seed, replicate, values }
    }
}

/// `count` independent draws, replicate ids `0..count`.
pub fn sample_field(sampler: &Sampler, count: usize, seed: u64) -> Vec<FieldSample> {
    (0..count as u64).map(|r| sampler.sample(seed, r)).collect()
}

/// Anything that can hand out covariances between indexed sites.
pub trait CovarianceSource {
    fn len(&self) -> usize;
    fn cov(&self, i: usize, j: usize) -> f64;
}

impl CovarianceSource for DenseMatrix {
    fn len(&self) -> usize {
        self.n()
    }
    fn cov(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

impl CovarianceSource for GreenMatrix {
    fn len(&self) -> usize {
        self.matrix().n()
    }
    fn cov(&self, i: usize, j: usize) -> f64 {
        self.get(i, j)
    }
}

/// `phi_alpha = mu_alpha + psi_alpha` given the field on `K`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionalDecomposition {
    pub target: usize,
    pub conditioning: Vec<usize>,
    /// `T(alpha, gamma)` for `gamma` in `conditioning` order
    pub weights: Vec<f64>,
    pub variance: f64,
    pub var_mu: f64,
    pub var_psi: f64,
    /// last Cholesky pivot of `G` on `K` followed by `alpha`
    pub schur_var_psi: f64,
    /// `[(Q_UU)^{-1}]_{alpha alpha}` for `U` the complement of `K`
    pub markov_var_psi: Option<f64>,
}

fn check_indices(n: usize, k: &[usize], alpha: usize) -> Result<()> {
    if alpha >= n || k.iter().any(|&g| g >= n) {
        return Err(Error::InvalidParameter(format!("index out of range for {n} sites")));
    }
    Ok(())
}

fn factor_block(cov: &dyn CovarianceSource, idx: &[usize]) -> Result<Cholesky> {
    let m = DenseMatrix::from_fn(idx.len(), |i, j| cov.cov(idx[i], idx[j]));
    m.cholesky().map_err(|e| Error::Conditioning(format!("covariance on K: {e}")))
}

/// Weights `T(alpha, .) = G_K^{-1} G(K, alpha)` of the conditional mean.
pub fn conditional_weights(cov: &dyn CovarianceSource, k: &[usize], alpha: usize) -> Result<Vec<f64>> {
    check_indices(cov.len(), k, alpha)?;
    if let Some(pos) = k.iter().position(|&g| g == alpha) {
        let mut w = vec![0.0; k.len()];
        w[pos] = 1.0;
        return Ok(w);
    }
    if k.is_empty() {
        return Ok(Vec::new());
    }
    let f = factor_block(cov, k)?;
    let rhs: Vec<f64> = k.iter().map(|&g| cov.cov(g, alpha)).collect();
    Ok(f.solve(&rhs))
}

/// Variances of `mu_alpha` and `psi_alpha`, cross-checked against the Schur
/// complement and, given the precision of the whole index set, against the
/// Dirichlet Green's function of the complement of `K`.
pub fn conditional_variances(
    cov: &dyn CovarianceSource,
    k: &[usize],
    alpha: usize,
    precision: Option<&Precision>,
) -> Result<ConditionalDecomposition> {
    let weights = conditional_weights(cov, k, alpha)?;
    let variance = cov.cov(alpha, alpha);
    let in_k = k.contains(&alpha);
    let var_mu: f64 = weights.iter().zip(k).map(|(w, &g)| w * cov.cov(alpha, g)).sum();
    let var_mu = if in_k { variance } else { var_mu };
    let var_psi = variance - var_mu;

    let schur_var_psi = if in_k {
        0.0
    } else {
        let mut idx = k.to_vec();
        idx.push(alpha);
        let f = factor_block(cov, &idx)?;
        let p = f.l(k.len(), k.len());
        p * p
    };
    let scale = libm::fmax(1.0, variance);
    if libm::fabs(schur_var_psi - var_psi) > CROSS_CHECK_TOL * scale {
        return Err(Error::Consistency(format!(
            "T-route variance {var_psi:e} differs from Schur complement {schur_var_psi:e}"
        )));
    }

    let markov_var_psi = match precision {
        Some(q) if !in_k => {
            if q.n() != cov.len() {
                return Err(Error::InvalidParameter("precision and covariance sizes differ".into()));
            }
            let mut in_set = vec![false; q.n()];
            k.iter().for_each(|&g| in_set[g] = true);
            let u: Vec<usize> = (0..q.n()).filter(|&i| !in_set[i]).collect();
            let pos = u.iter().position(|&i| i == alpha).expect("alpha outside K");
            let v = q.submatrix(&u).factor()?.inverse_diag_entry(pos);
            if libm::fabs(v - var_psi) > CROSS_CHECK_TOL * scale {
                return Err(Error::Consistency(format!(
                    "T-route variance {var_psi:e} differs from Dirichlet variance {v:e}"
                )));
            }
            Some(v)
        }
        _ => None,
    };

    Ok(ConditionalDecomposition {
        target: alpha,
        conditioning: k.to_vec(),
        weights,
        variance,
        var_mu,
        var_psi,
        schur_var_psi,
        markov_var_psi,
    })
}

/// `G(alpha, beta) = g(alpha - beta)` on every pair of box sites, with one
/// evaluation per canonical offset.
pub fn stationary_matrix(domain: &BoxDomain, g: &dyn StationaryCovariance) -> Result<DenseMatrix> {
    let sites: Vec<Site> = domain.sites().collect();
    let mut cache: BTreeMap<Site, f64> = BTreeMap::new();
    for off in domain.canonical_offsets() {
        let v = g.value(&off)?;
        cache.insert(off, v);
    }
    let n = sites.len();
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = cache[&sites[i].sub(&sites[j]).canonical()];
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

/// Whether a field lives on the box (`P_N`) or is the infinite-volume field
/// observed on the box (`P`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VarianceMode {
    Finite,
    Infinite,
}

/// Covariance and precision of a field on a box.
#[derive(Debug, Clone)]
pub struct FieldCovariance {
    mode: VarianceMode,
    domain: BoxDomain,
    covariance: DenseMatrix,
    precision: Precision,
}

impl FieldCovariance {
    /// `P_N`: zero boundary values outside the box.
    pub fn finite(model: &ModelSpec, domain: &BoxDomain, tol: f64) -> Result<Self> {
        let kernel = ModelKernel::for_box(model, domain, tol)?;
        let bg = BoxGreen::new(&kernel, domain)?;
        let green = bg.dense()?;
        Ok(Self::from_parts(VarianceMode::Finite, *domain, green.matrix().clone(), bg.precision().clone()))
    }

    /// `P_N` from an already solved box Green's function.
    pub fn from_box_green(bg: &BoxGreen, green: &GreenMatrix) -> Self {
        Self::from_parts(VarianceMode::Finite, *bg.domain(), green.matrix().clone(), bg.precision().clone())
    }

    /// `P` restricted to the box.
    pub fn stationary(domain: &BoxDomain, g: &dyn StationaryCovariance) -> Result<Self> {
        let covariance = stationary_matrix(domain, g)?;
        let precision = Precision::Dense(covariance.cholesky()?.inverse());
        Ok(Self::from_parts(VarianceMode::Infinite, *domain, covariance, precision))
    }

    /// Identity covariance (independent standard normals).
    pub fn white_noise(domain: &BoxDomain) -> Self {
        let n = domain.volume();
        Self::from_parts(
            VarianceMode::Infinite,
            *domain,
            DenseMatrix::identity(n),
            Precision::Dense(DenseMatrix::identity(n)),
        )
    }

    pub fn from_parts(mode: VarianceMode, domain: BoxDomain, covariance: DenseMatrix, precision: Precision) -> Self {
        FieldCovariance { mode, domain, covariance, precision }
    }

    pub fn mode(&self) -> VarianceMode {
        self.mode
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn covariance(&self) -> &DenseMatrix {
        &self.covariance
    }

    pub fn precision(&self) -> &Precision {
        &self.precision
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance.get(i, i)
    }

    /// Whether the precision entries depend on offsets only, so residual
    /// variances can be shared between translated conditioning sets.
    pub fn translation_invariant_precision(&self) -> bool {
        self.mode == VarianceMode::Finite
    }

    /// `Var[phi_alpha | phi_beta, beta outside U]` for `alpha` in `U`.
    pub fn residual_variance(&self, alpha: usize, u: &[usize]) -> Result<f64> {
        let pos = u
            .iter()
            .position(|&i| i == alpha)
            .ok_or_else(|| Error::InvalidParameter(format!("site {alpha} is not in the free set")))?;
        Ok(self.precision.submatrix(u).factor()?.inverse_diag_entry(pos))
    }

    pub fn sampler(&self) -> Result<Sampler> {
        match (&self.mode, &self.precision) {
            (VarianceMode::Finite, q) => Sampler::from_precision(q),
            (VarianceMode::Infinite, _) => Sampler::from_covariance(&self.covariance),
        }
    }
}

impl CovarianceSource for FieldCovariance {
    fn len(&self) -> usize {
        self.covariance.n()
    }
    fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance.get(i, j)
    }
}

/// Residual variances `Var[phi_alpha | phi outside U_alpha]`. Consecutive
/// targets with the same free set share one factorization, and with a
/// translation-invariant precision so do targets whose free sets are
/// translates of each other.
pub fn residual_variances(field: &FieldCovariance, targets: &[usize], free_sets: &[Vec<usize>]) -> Result<Vec<f64>> {
    if targets.len() != free_sets.len() {
        return Err(Error::InvalidParameter("one free set per target".into()));
    }
    let domain = field.domain();
    let mut cache: BTreeMap<Vec<Site>, f64> = BTreeMap::new();
    let mut last: Option<(&[usize], PrecisionFactor)> = None;
    let mut out = Vec::with_capacity(targets.len());
    for (&a, u) in targets.iter().zip(free_sets) {
        let key: Option<Vec<Site>> = field.translation_invariant_precision().then(|| {
            let centre = domain.site(a);
            u.iter().map(|&i| domain.site(i).sub(&centre)).collect()
        });
        if let Some(v) = key.as_ref().and_then(|k| cache.get(k)) {
            out.push(*v);
            continue;
        }
        let pos = u
            .iter()
            .position(|&i| i == a)
            .ok_or_else(|| Error::InvalidParameter(format!("site {a} is not in its free set")))?;
        if !matches!(&last, Some((set, _)) if *set == u.as_slice()) {
            last = Some((u.as_slice(), field.precision().submatrix(u).factor()?));
        }
        let v = last.as_ref().expect("factor").1.inverse_diag_entry(pos);
        if let Some(k) = key {
            cache.insert(k, v);
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_schur_by_hand() {
        let c = DenseMatrix::from_rows(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let d = conditional_variances(&c, &[1], 0, None).unwrap();
        assert!((d.var_mu - 0.25).abs() < 1e-15);
        assert!((d.var_psi - 0.75).abs() < 1e-15);
        assert_eq!(d.weights, vec![0.5]);
    }

    #[test]
    fn empty_and_member_conditioning() {
        let c = DenseMatrix::from_rows(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let d = conditional_variances(&c, &[], 0, None).unwrap();
        assert!(d.weights.is_empty());
        assert_eq!((d.var_mu, d.var_psi), (0.0, 2.0));
        let w = conditional_weights(&c, &[1, 0], 0).unwrap();
        assert_eq!(w, vec![0.0, 1.0]);
    }

    #[test]
    fn markov_route_agrees_on_massive_line() {
        let model = ModelSpec::Massive { dim: 1, mass: 0.5 };
        let domain = BoxDomain::new(1, 20, 0.0).unwrap();
        let f = FieldCovariance::finite(&model, &domain, 1e-12).unwrap();
        let k: Vec<usize> = (0..20).filter(|&i| !(7..=12).contains(&i)).collect();
        let d = conditional_variances(&f, &k, 9, Some(f.precision())).unwrap();
        assert!((d.markov_var_psi.unwrap() - d.var_psi).abs() < 1e-12);
        assert!(d.var_mu > 0.0);
    }

    #[test]
    fn shape_cache_matches_direct() {
        let model = ModelSpec::Dgff { dim: 3 };
        let domain = BoxDomain::new(3, 6, 0.0).unwrap();
        let f = FieldCovariance::finite(&model, &domain, 1e-12).unwrap();
        let targets: Vec<usize> = (0..domain.volume()).collect();
        let sets: Vec<Vec<usize>> = targets.iter().map(|&a| domain.ball_indices(&domain.site(a), 1.5)).collect();
        let cached = residual_variances(&f, &targets, &sets).unwrap();
        for (i, &a) in targets.iter().enumerate().step_by(17) {
            let v = f.residual_variance(a, &sets[i]).unwrap();
            assert!((v - cached[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn samplers_agree_in_law_on_small_matrix() {
        let c = DenseMatrix::from_rows(2, vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let q = Precision::Dense(c.cholesky().unwrap().inverse());
        let a = Sampler::from_covariance(&c).unwrap();
        let b = Sampler::from_precision(&q).unwrap();
        let (mut sa, mut sb) = (0.0, 0.0);
        let n = 20000;
        for r in 0..n {
            let x = a.sample(3, r).values;
            let y = b.sample(3, r).values;
            sa += x[0] * x[1];
            sb += y[0] * y[1];
        }
        assert!((sa / n as f64 - 0.5).abs() < 0.03);
        assert!((sb / n as f64 - 0.5).abs() < 0.03);
        assert_eq!(a.sample(9, 4), a.sample(9, 4));
    }
}
