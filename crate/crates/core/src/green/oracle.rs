//! Truncated path sums `sum_m w(m) P_U^m(a, b)` for walks killed outside a
//! finite set `U`, with a certified bound on the truncation error.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::Site;

use super::finite::{site_index, ModelKernel, Precision, WalkWeight};

/// A column of path sums and the certified bound on what was left out.
#[derive(Debug, Clone)]
pub struct PathSum {
    pub values: Vec<f64>,
    pub tail_bound: f64,
    pub steps: usize,
}

/// Walk-sum oracle on a fixed site set.
#[derive(Debug, Clone)]
pub struct KilledWalkOracle {
    sites: Vec<Site>,
    kernel: Precision,
    weight: WalkWeight,
}

impl KilledWalkOracle {
    pub fn new(model: &ModelKernel, sites: Vec<Site>) -> Result<Self> {
        let (kernel, weight) = model.killed_kernel(&sites)?;
        Ok(KilledWalkOracle { sites, kernel, weight })
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// `sum_m w(m) P^m(., b)` until the certified tail drops below `tol`.
    pub fn column(&self, b: usize, tol: f64, max_steps: usize) -> Result<PathSum> {
        let n = self.sites.len();
        let mut v = vec![0.0; n];
        v[b] = 1.0;
        let mut ones = vec![1.0; n];
        let mut acc = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        // k with ||P^k||_inf <= rho < 1, found on the fly
        let mut contraction: Option<(usize, f64)> = None;
        for m in 0..max_steps {
            let w = match self.weight {
                WalkWeight::One => 1.0,
                WalkWeight::Linear => (m + 1) as f64,
            };
            for i in 0..n {
                acc[i] += w * v[i];
            }
            self.kernel.matvec_into(&v, &mut tmp);
            core::mem::swap(&mut v, &mut tmp);
            self.kernel.matvec_into(&ones, &mut tmp);
            core::mem::swap(&mut ones, &mut tmp);
            let big_m = m + 1;
            let norm = ones.iter().copied().fold(0.0, f64::max);
            if contraction.is_none() && norm <= 0.5 {
                contraction = Some((big_m, norm));
            }
            if let Some((k, rho)) = contraction {
                // ||P^{M + jk + r}|| <= ||P^M|| rho^j
                let kf = k as f64;
                let mf = big_m as f64;
                let bound = match self.weight {
                    WalkWeight::One => norm * kf / (1.0 - rho),
                    WalkWeight::Linear => {
                        norm * kf * ((mf + kf) / (1.0 - rho) + kf * rho / ((1.0 - rho) * (1.0 - rho)))
                    }
                };
                if bound <= tol {
                    return Ok(PathSum { values: acc, tail_bound: bound, steps: big_m });
                }
            }
            if norm == 0.0 {
                return Ok(PathSum { values: acc, tail_bound: 0.0, steps: big_m });
            }
        }
        let norm = ones.iter().copied().fold(0.0, f64::max);
        Err(Error::Truncation { bound: norm, steps: max_steps })
    }

    /// Single entry `sum_m w(m) P^m(a, b)`.
    pub fn entry(&self, a: &Site, b: &Site, tol: f64, max_steps: usize) -> Result<f64> {
        let idx = site_index(&self.sites);
        let (ia, ib) = match (idx.get(a), idx.get(b)) {
            (Some(&x), Some(&y)) => (x, y),
            _ => return Err(Error::InvalidParameter(format!("{a:?} or {b:?} outside the oracle set"))),
        };
        Ok(self.column(ib, tol, max_steps)?.values[ia])
    }
}

/// One-shot helper: `sum_m w(m) P_U^m(a, b)` for `U = sites`.
pub fn killed_walk_green_oracle(model: &ModelKernel, sites: Vec<Site>, a: &Site, b: &Site, tol: f64) -> Result<f64> {
    KilledWalkOracle::new(model, sites)?.entry(a, b, tol, 1_000_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::finite::finite_green;
    use crate::lattice::BoxDomain;
    use crate::model::ModelSpec;

    #[test]
    fn single_site_massive() {
        let model = ModelSpec::Massive { dim: 1, mass: 0.5 };
        let k = ModelKernel::new(&model, 1, 1e-10).unwrap();
        let o = Site::origin(1);
        assert_eq!(killed_walk_green_oracle(&k, vec![o], &o, &o, 1e-12).unwrap(), 1.0);
    }

    #[test]
    fn dgff_box_matches_inverse() {
        let model = ModelSpec::Dgff { dim: 3 };
        let dom = BoxDomain::new(3, 4, 0.0).unwrap();
        let g = finite_green(&model, &dom, 1e-10).unwrap();
        let k = ModelKernel::for_box(&model, &dom, 1e-10).unwrap();
        let oracle = KilledWalkOracle::new(&k, dom.sites().collect()).unwrap();
        let c = dom.index_of(&Site::new(&[1, 2, 1]).unwrap()).unwrap();
        let col = oracle.column(c, 1e-12, 100_000).unwrap();
        for i in 0..dom.volume() {
            assert!((col.values[i] - g.get(i, c)).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_is_reported() {
        let model = ModelSpec::Dgff { dim: 3 };
        let dom = BoxDomain::new(3, 6, 0.0).unwrap();
        let k = ModelKernel::for_box(&model, &dom, 1e-10).unwrap();
        let oracle = KilledWalkOracle::new(&k, dom.sites().collect()).unwrap();
        assert!(matches!(oracle.column(0, 1e-12, 5), Err(Error::Truncation { .. })));
    }
}
