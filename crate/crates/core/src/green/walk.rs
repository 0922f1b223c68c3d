//! Infinite-volume Green's functions of the nearest-neighbour models through
//! the Bessel-integral form
//!
//! `g(x) = int_0^inf w(t) e^{-kill t} prod_i e^{-ct/d} I_{|x_i|}(ct/d) dt`
//!
//! with `w = 1` (dgff, massive) or `w = t` (membrane) and `c = 1 - kill`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::model::ModelSpec;
use crate::quadrature::adaptive_gk15;
use crate::special::bessel_ie_seq;

/// Evaluator for `g(0, x)` of the dgff, membrane or massive model on `Z^d`.
#[derive(Debug, Clone, Copy)]
pub struct WalkGreen {
    dim: usize,
    /// power of `t` in the weight
    weight_power: i32,
    kill: f64,
    rate: f64,
    tol: f64,
}

impl WalkGreen {
    pub fn new(model: &ModelSpec, tol: f64) -> Result<Self> {
        model.validate()?;
        if !(tol > 0.0 && tol < 1e-2) {
            return Err(Error::InvalidParameter(format!("tolerance {tol} outside (0, 1e-2)")));
        }
        let dim = model.dim();
        let (weight_power, kill) = match *model {
            ModelSpec::Dgff { .. } => (0, 0.0),
            ModelSpec::Membrane { .. } => (1, 0.0),
            ModelSpec::Massive { mass, .. } => (0, mass),
            ModelSpec::Fractional { .. } => {
                return Err(Error::Unsupported(
                    "the Bessel-integral evaluator covers nearest-neighbour models only".into(),
                ))
            }
        };
        Ok(WalkGreen { dim, weight_power, kill, rate: 1.0 - kill, tol })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn integrand(&self, t: f64, orders: &[usize], buf: &mut Vec<f64>) -> f64 {
        let z = self.rate * t / self.dim as f64;
        let nmax = orders.iter().copied().max().unwrap_or(0);
        bessel_ie_seq(nmax, z, buf);
        let mut p = 1.0;
        for &o in orders {
            p *= buf[o];
        }
        let w = if self.weight_power == 1 { t } else { 1.0 };
        w * libm::exp(-self.kill * t) * p
    }

    /// `g(0, offset)`.
    pub fn value(&self, offset: &Site) -> Result<f64> {
        if offset.dim() != self.dim {
            return Err(Error::InvalidParameter(format!("offset dimension {} != {}", offset.dim(), self.dim)));
        }
        let orders: Vec<usize> = offset.coords().iter().map(|c| c.unsigned_abs() as usize).collect();
        let r2: f64 = orders.iter().map(|&o| (o * o) as f64).sum();
        let buf = core::cell::RefCell::new(Vec::new());
        let f = |t: f64| self.integrand(t, &orders, &mut buf.borrow_mut());
        let panel_tol = 0.05 * self.tol;
        let mut total = 0.0;
        let mut err = 0.0;
        let mut a = 0.0;
        let mut b = 1.0;
        // end of the explicit quadrature range for the polynomially decaying cases
        let d = self.dim as f64;
        let t_end = libm::ldexp(1.0, 40).max(1e6 * d * (r2 + 1.0));
        loop {
            let r = adaptive_gk15(&f, a, b, 1e-300, panel_tol, 40);
            if !r.converged {
                return Err(Error::Quadrature(format!("panel [{a}, {b}] did not converge (offset {offset:?})")));
            }
            total += r.value;
            err += r.error;
            a = b;
            b *= 2.0;
            if self.kill > 0.0 {
                // exponentially killed: stop once the remaining mass is negligible
                let bound = libm::exp(-self.kill * a) / self.kill;
                if a > r2.sqrt() && bound < 1e-3 * self.tol * total.abs() {
                    break;
                }
                if a > 1e9 {
                    break;
                }
            } else if a >= t_end {
                break;
            }
        }
        if self.kill == 0.0 {
            total += self.tail(a, &orders);
        }
        if !(total.is_finite()) || err > self.tol * total.abs() {
            return Err(Error::Quadrature(format!("error estimate {err:e} exceeds tolerance for {offset:?}")));
        }
        Ok(total)
    }

    /// `int_T^inf w(t) (2 pi c t/d)^{-d/2} (1 - A d/(c t)) dt` with the Hankel
    /// correction `A = sum_i (4 nu_i^2 - 1)/8`.
    fn tail(&self, t: f64, orders: &[usize]) -> f64 {
        let d = self.dim as f64;
        let p = self.weight_power as f64;
        let c = self.rate;
        let a: f64 = orders.iter().map(|&o| (4.0 * (o * o) as f64 - 1.0) / 8.0).sum();
        let pre = libm::pow(2.0 * PI * c / d, -d / 2.0);
        let e1 = d / 2.0 - p - 1.0;
        let e2 = d / 2.0 - p;
        pre * (libm::pow(t, -e1) / e1 - a * d / c * libm::pow(t, -e2) / e2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn massive_one_dimensional_closed_forms() {
        let g = WalkGreen::new(&ModelSpec::Massive { dim: 1, mass: 0.5 }, 1e-10).unwrap();
        let g0 = g.value(&Site::origin(1)).unwrap();
        let g1 = g.value(&Site::axis(1, 1)).unwrap();
        let want0 = 2.0 / libm::sqrt(3.0);
        assert!((g0 - want0).abs() < 1e-9, "{g0}");
        assert!((g1 - 2.0 * (want0 - 1.0)).abs() < 1e-9, "{g1}");
        // the massive resolvent gives g(r) = g(0) q^r with q = (2 - sqrt 3)
        let g5 = g.value(&Site::axis(1, 5)).unwrap();
        let q: f64 = 2.0 - libm::sqrt(3.0);
        assert!((g5 - want0 * q.powi(5)).abs() < 1e-10);
    }

    #[test]
    fn watson_integral() {
        let g = WalkGreen::new(&ModelSpec::Dgff { dim: 3 }, 1e-10).unwrap();
        let g0 = g.value(&Site::origin(3)).unwrap();
        assert!((g0 - 1.516_386_059_151_978).abs() < 1e-8, "{g0}");
        // harmonic away from the origin: g(0) - 1 = g(e_1)
        let g1 = g.value(&Site::axis(3, 1)).unwrap();
        assert!((g0 - 1.0 - g1).abs() < 1e-8);
    }

    #[test]
    fn dgff_is_harmonic_off_origin() {
        let g = WalkGreen::new(&ModelSpec::Dgff { dim: 3 }, 1e-10).unwrap();
        let x = Site::new(&[2, 1, 0]).unwrap();
        let mut avg = 0.0;
        for e in crate::lattice::unit_offsets(3) {
            avg += g.value(&x.add(&e)).unwrap() / 6.0;
        }
        assert!((avg - g.value(&x).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn membrane_is_dgff_convolution_square() {
        // (I - P) G_membrane = Gamma
        let m = WalkGreen::new(&ModelSpec::Membrane { dim: 5 }, 1e-10).unwrap();
        let d = WalkGreen::new(&ModelSpec::Dgff { dim: 5 }, 1e-10).unwrap();
        for x in [Site::origin(5), Site::new(&[1, 1, 0, 0, 0]).unwrap(), Site::axis(5, 3)] {
            let mut pg = 0.0;
            for e in crate::lattice::unit_offsets(5) {
                pg += m.value(&x.add(&e)).unwrap() / 10.0;
            }
            let lhs = m.value(&x).unwrap() - pg;
            let rhs = d.value(&x).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * rhs, "{x:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn fractional_is_rejected() {
        assert!(WalkGreen::new(&ModelSpec::Fractional { dim: 2, index: 1.0, scale: 1.0 }, 1e-8).is_err());
    }
}
