//! Isotropic stable densities `q_s` on `R^d` and the lattice transition
//! kernel `Q(a, b) = int_{[-1/2,1/2]^d} q_s(a - b + x) dx`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{canonical_offsets_upto, Site};
use crate::model::StableLaw;
use crate::quadrature::{adaptive_gk15, gauss_legendre};
use crate::special::{bessel_j, gamma, gaussian_norm_moment, gaussian_sup_moment, ln_gamma, sphere_area};

const MAX_TERMS: usize = 400;

/// Which route produced a density value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityRoute {
    Origin,
    LargeSeries,
    SmallSeries,
    Hankel,
}

/// Density evaluator with the series coefficients precomputed.
#[derive(Debug, Clone)]
pub struct StableDensity {
    law: StableLaw,
    tol: f64,
    /// `(ln|c_j|, sign)` of `q(r) = sum_j c_j r^{-d-js}`
    large: Vec<(f64, f64)>,
    /// `(ln|a_m|, sign)` of `q(r) = sum_m a_m r^{2m}`
    small: Vec<(f64, f64)>,
    origin: f64,
}

impl StableDensity {
    pub fn new(law: StableLaw, tol: f64) -> Result<Self> {
        let law = StableLaw::new(law.dim, law.index, law.scale)?;
        let d = law.dim as f64;
        let s = law.index;
        let rho = law.scale;
        let mut large = Vec::with_capacity(MAX_TERMS);
        let pre_l = -(d / 2.0 + 1.0) * libm::log(PI);
        for j in 1..=MAX_TERMS {
            let jf = j as f64;
            let sn = libm::sin(PI * jf * s / 2.0);
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 } * sn.signum();
            if libm::fabs(sn) < 1e-14 {
                large.push((f64::NEG_INFINITY, 0.0));
                continue;
            }
            let ln = pre_l + jf * libm::log(rho) - ln_gamma(jf + 1.0)
                + ln_gamma((d + jf * s) / 2.0)
                + ln_gamma(1.0 + jf * s / 2.0)
                + libm::log(libm::fabs(sn))
                + jf * s * libm::log(2.0);
            large.push((ln, sign));
        }
        let nu = d / 2.0 - 1.0;
        let pre_s = -(d / 2.0) * libm::log(2.0 * PI) - nu * libm::log(2.0);
        let mut small = Vec::with_capacity(MAX_TERMS);
        for m in 0..MAX_TERMS {
            let mf = m as f64;
            let e = (2.0 * mf + d) / s;
            let ln = pre_s - 2.0 * mf * libm::log(2.0) + ln_gamma(e)
                - ln_gamma(mf + 1.0)
                - ln_gamma(mf + d / 2.0)
                - libm::log(s)
                - e * libm::log(rho);
            small.push((ln, if m % 2 == 0 { 1.0 } else { -1.0 }));
        }
        let origin = sphere_area(law.dim) * gamma(d / s) / (s * libm::pow(rho, d / s)) / libm::pow(2.0 * PI, d);
        Ok(StableDensity { law, tol, large, small, origin })
    }

    pub fn law(&self) -> StableLaw {
        self.law
    }

    /// `q(x)` for a point of `R^d`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.law.dim {
            return Err(Error::InvalidParameter(format!("point dimension {} != {}", x.len(), self.law.dim)));
        }
        let r = libm::sqrt(x.iter().map(|v| v * v).sum());
        self.radial(r).map(|v| v.0)
    }

    /// `q` as a function of `r = |x|`, with the route used.
    pub fn radial(&self, r: f64) -> Result<(f64, DensityRoute)> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Range(format!("density requested at r={r}")));
        }
        if r == 0.0 {
            return Ok((self.origin, DensityRoute::Origin));
        }
        if let Some(v) = self.large_series(r) {
            return Ok((v, DensityRoute::LargeSeries));
        }
        if let Some(v) = self.small_series(r) {
            return Ok((v, DensityRoute::SmallSeries));
        }
        self.hankel(r).map(|v| (v, DensityRoute::Hankel))
    }

    fn large_series(&self, r: f64) -> Option<f64> {
        let d = self.law.dim as f64;
        let s = self.law.index;
        let lr = libm::log(r);
        let mut sum = 0.0;
        let mut abs = 0.0;
        let mut prev = f64::INFINITY;
        let mut zero_run = 0;
        for (j, &(ln, sign)) in self.large.iter().enumerate() {
            if sign == 0.0 {
                continue;
            }
            let jf = (j + 1) as f64;
            let t = sign * libm::exp(ln - (d + jf * s) * lr);
            let at = libm::fabs(t);
            if at > prev && j > 2 {
                // asymptotic series turned around before converging
                return None;
            }
            sum += t;
            abs += at;
            if at <= 1e-3 * self.tol * libm::fabs(sum) {
                zero_run += 1;
                if zero_run >= 2 || s < 1.0 {
                    return (abs <= 1e3 * libm::fabs(sum) && sum > 0.0).then_some(sum);
                }
            } else {
                zero_run = 0;
            }
            prev = at;
        }
        None
    }

    fn small_series(&self, r: f64) -> Option<f64> {
        let lr = libm::log(r);
        let mut sum = 0.0;
        let mut abs = 0.0;
        let mut prev = f64::INFINITY;
        for (m, &(ln, sign)) in self.small.iter().enumerate() {
            let t = sign * libm::exp(ln + 2.0 * m as f64 * lr);
            let at = libm::fabs(t);
            if at > prev && m > 2 && at > 1e3 * libm::fabs(sum) {
                return None;
            }
            sum += t;
            abs += at;
            if at <= 1e-3 * self.tol * libm::fabs(sum) && m > 0 {
                return (abs <= 1e4 * libm::fabs(sum) && sum > 0.0).then_some(sum);
            }
            prev = at;
        }
        None
    }

    fn hankel(&self, r: f64) -> Result<f64> {
        let d = self.law.dim as f64;
        let s = self.law.index;
        let rho = self.law.scale;
        let nu = d / 2.0 - 1.0;
        let f = |k: f64| {
            if k == 0.0 {
                return 0.0;
            }
            libm::exp(-rho * libm::pow(k, s)) * libm::pow(k, d / 2.0) * bessel_j(nu, k * r)
        };
        let kmax = libm::pow((60.0 + d * 10.0) / rho, 1.0 / s);
        let width = (PI / r).min(kmax / 16.0);
        let panels = libm::ceil(kmax / width) as usize;
        if panels > 50_000 {
            return Err(Error::Range(format!("Hankel quadrature needs {panels} panels at r={r}")));
        }
        let mut total = 0.0;
        let mut scale = 0.0f64;
        for p in 0..panels {
            let a = p as f64 * width;
            let b = (a + width).min(kmax);
            let res = adaptive_gk15(&f, a, b, 1e-300, 1e-3 * self.tol, 50);
            if !res.converged && res.error > 1e-3 * self.tol * libm::fabs(res.value).max(1e-300) {
                return Err(Error::Quadrature(format!("Hankel panel [{a}, {b}] failed at r={r}")));
            }
            total += res.value;
            scale = scale.max(libm::fabs(res.value));
        }
        let v = libm::pow(2.0 * PI, -d / 2.0) * libm::pow(r, -nu) * total;
        if !(v > 0.0) || libm::fabs(total) < 1e-10 * scale {
            return Err(Error::Range(format!("density at r={r} lost to cancellation")));
        }
        Ok(v)
    }

    /// `int` of `q` over the complement of the cube `[-l, l]^d`, from the
    /// large-`r` series integrated term by term.
    pub fn cube_exterior_mass(&self, l: f64) -> Result<f64> {
        let d = self.law.dim;
        let s = self.law.index;
        let area = sphere_area(d);
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        for (j, &(ln, sign)) in self.large.iter().enumerate() {
            if sign == 0.0 {
                continue;
            }
            let p = (j + 1) as f64 * s;
            // int_{outside cube} |x|^{-d-p} dx = l^{-p}/p * int_S ||theta||_inf^p
            let ang = area * gaussian_sup_moment(d, p) / gaussian_norm_moment(d, p);
            let t = sign * libm::exp(ln - p * libm::log(l)) * ang / p;
            if libm::fabs(t) > prev && j > 2 {
                return Err(Error::Range(format!("tail series diverges at cube half-width {l}")));
            }
            sum += t;
            prev = libm::fabs(t);
            if prev < 1e-14 * libm::fabs(sum) {
                return Ok(sum);
            }
        }
        Err(Error::Range(format!("tail series did not converge at cube half-width {l}")))
    }
}

/// `q` at a point, building a one-off evaluator.
pub fn stable_density(x: &[f64], law: StableLaw, tol: f64) -> Result<f64> {
    StableDensity::new(law, tol)?.density(x)
}

/// Table of the lattice transition probabilities `Q(offset)` for all offsets
/// with coordinates bounded by `max_coord`.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    dim: usize,
    m: usize,
    /// indexed by absolute coordinates, row-major in `(m+1)^d`
    values: Vec<f64>,
    density: StableDensity,
}

impl TransitionTable {
    pub fn new(law: StableLaw, max_coord: usize, tol: f64) -> Result<Self> {
        let density = StableDensity::new(law, tol)?;
        let dim = law.dim;
        let side = max_coord + 1;
        let len = side
            .checked_pow(dim as u32)
            .filter(|&l| l <= 1 << 26)
            .ok_or_else(|| Error::Size(format!("transition table {side}^{dim} too large")))?;
        let mut values = vec![f64::NAN; len];
        let width = law.scale.powf_pos(1.0 / law.index);
        for c in canonical_offsets_upto(dim, max_coord as i64) {
            let v = cube_integral(&density, &c, width)?;
            // every permutation of the canonical key shares the value
            permute_fill(c.coords(), side, &mut values, v);
        }
        Ok(TransitionTable { dim, m: max_coord, values, density })
    }

    pub fn max_coord(&self) -> usize {
        self.m
    }

    pub fn density(&self) -> &StableDensity {
        &self.density
    }

    /// `Q(offset)`; signed offsets are folded by the sign-flip symmetry.
    pub fn get(&self, offset: &Site) -> Result<f64> {
        let side = self.m + 1;
        let mut idx = 0usize;
        for &c in offset.coords() {
            let a = c.unsigned_abs() as usize;
            if a > self.m {
                return Err(Error::Range(format!("offset {offset:?} beyond transition table")));
            }
            idx = idx * side + a;
        }
        Ok(self.values[idx])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `sum_{||o||_inf <= r} Q(o)` together with the exterior mass estimate.
    pub fn row_sum(&self, r: usize) -> Result<(f64, f64)> {
        if r > self.m {
            return Err(Error::Range(format!("row sum radius {r} beyond table {}", self.m)));
        }
        let mut sum = 0.0;
        let side = 2 * r + 1;
        let dom = crate::lattice::BoxDomain::new(self.dim, side, 0.0)?;
        let center = Site::diagonal(self.dim, r as i64);
        for s in dom.sites() {
            sum += self.get(&s.sub(&center))?;
        }
        let tail = self.density.cube_exterior_mass(r as f64 + 0.5)?;
        Ok((sum, tail))
    }
}

trait PowPos {
    fn powf_pos(self, e: f64) -> f64;
}

impl PowPos for f64 {
    fn powf_pos(self, e: f64) -> f64 {
        libm::pow(self, e)
    }
}

fn permute_fill(c: &[i64], side: usize, values: &mut [f64], v: f64) {
    let mut perm: Vec<usize> = c.iter().map(|&x| x as usize).collect();
    perm.sort_unstable();
    loop {
        let idx = perm.iter().fold(0usize, |acc, &a| acc * side + a);
        values[idx] = v;
        if !next_permutation(&mut perm) {
            break;
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// `int_{[-1/2,1/2]^d} q(c + x) dx` by tensor Gauss-Legendre; near the
/// origin the cube is split so the peak of width `width` is resolved.
fn cube_integral(density: &StableDensity, c: &Site, width: f64) -> Result<f64> {
    let d = c.dim();
    let near = c.norm() <= 2.0 + 3.0 * width;
    let pieces = if near { libm::ceil(2.0 / width.min(2.0)).max(1.0) as usize } else { 1 };
    let nodes = if near { 20 } else { 8 };
    let (gx, gw) = gauss_legendre(nodes);
    // one-dimensional composite rule on [-1/2, 1/2]
    let h = 1.0 / pieces as f64;
    let mut px = Vec::with_capacity(pieces * nodes);
    let mut pw = Vec::with_capacity(pieces * nodes);
    for p in 0..pieces {
        let a = -0.5 + p as f64 * h;
        for (x, w) in gx.iter().zip(&gw) {
            px.push(a + 0.5 * h * (x + 1.0));
            pw.push(0.5 * h * w);
        }
    }
    let k = px.len();
    let total_pts = k
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::Size(format!("cube quadrature with {k}^{d} points is too large")))?;
    let mut idx = vec![0usize; d];
    let mut sum = 0.0;
    let mut point = vec![0.0; d];
    for _ in 0..total_pts {
        let mut w = 1.0;
        for i in 0..d {
            point[i] = c.coords()[i] as f64 + px[idx[i]];
            w *= pw[idx[i]];
        }
        sum += w * density.density(&point)?;
        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < k {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(sum)
}

/// `Q(a, b)` for a single pair of sites.
pub fn fractional_transition(a: &Site, b: &Site, law: StableLaw, tol: f64) -> Result<f64> {
    let density = StableDensity::new(law, tol)?;
    let c = a.sub(b);
    cube_integral(&density, &c, libm::pow(law.scale, 1.0 / law.index))
}
