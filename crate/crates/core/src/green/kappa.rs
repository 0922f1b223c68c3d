//! `kappa = 1 - sup_{alpha != 0} g(alpha)/g(0)` with a tail certificate for
//! offsets beyond the scanned ball.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{ball_offsets, Site};
use crate::model::ModelSpec;

use super::StationaryCovariance;

/// How the tail beyond the search radius was controlled.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TailCertificate {
    /// `exponential` (rigorous walk bound) or `power` (fitted envelope)
    pub method: String,
    /// bound on `sup_{|alpha| > R} g(alpha)/g(0)`
    pub tail_bound: f64,
    /// envelope constants at radius `R` and `R/2` for the power method
    pub envelope: Option<(f64, f64)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KappaEstimate {
    pub kappa: f64,
    pub argmax: Site,
    pub max_ratio: f64,
    pub search_radius: f64,
    pub g0: f64,
    pub certificate: TailCertificate,
}

/// Scans all offsets with `0 < |alpha| <= search_radius`.
pub fn kappa(model: &ModelSpec, cov: &dyn StationaryCovariance, search_radius: f64) -> Result<KappaEstimate> {
    let d = model.dim();
    if search_radius < 2.0 {
        return Err(Error::InvalidParameter("search radius must be at least 2".into()));
    }
    let g0 = cov.value(&Site::origin(d))?;
    let mut best = (f64::NEG_INFINITY, Site::origin(d));
    let mut offsets: Vec<Site> = ball_offsets(d, search_radius).into_iter().map(|s| s.canonical()).collect();
    offsets.sort();
    offsets.dedup();
    let mut shell_outer = 0.0f64;
    let mut shell_inner = 0.0f64;
    let power = model.decay_power();
    for o in offsets.iter().filter(|o| o.norm2() > 0) {
        let g = cov.value(o)?;
        let r = g / g0;
        if r > best.0 {
            best = (r, *o);
        }
        if let Some(p) = power {
            let nr = o.norm();
            let c = g * libm::pow(nr, p);
            if nr > search_radius - 1.0 {
                shell_outer = shell_outer.max(c);
            }
            if nr > search_radius / 2.0 - 1.0 && nr <= search_radius / 2.0 {
                shell_inner = shell_inner.max(c);
            }
        }
    }
    let max_ratio = best.0;
    let certificate = match *model {
        ModelSpec::Massive { mass, .. } => {
            // g(alpha) <= sum_{m >= |alpha|_1} (1-mass)^m and |alpha|_1 >= |alpha|_2
            let k = libm::floor(search_radius) + 1.0;
            let bound = libm::pow(1.0 - mass, k) / (mass * g0);
            TailCertificate {
                method: "exponential".into(),
                tail_bound: bound,
                envelope: None,
                passed: bound < max_ratio,
            }
        }
        _ => {
            let p = power.expect("polynomial models");
            let stable = shell_inner > 0.0 && libm::fabs(shell_outer / shell_inner - 1.0) <= 0.25;
            let bound = 1.5 * shell_outer * libm::pow(search_radius, -p) / g0;
            let cert = TailCertificate {
                method: "power".into(),
                tail_bound: bound,
                envelope: Some((shell_outer, shell_inner)),
                passed: stable && bound < max_ratio,
            };
            if !stable {
                return Err(Error::Inconclusive(format!(
                    "decay envelope not settled at R={search_radius}: C(R)={shell_outer:.6}, C(R/2)={shell_inner:.6}"
                )));
            }
            cert
        }
    };
    if !certificate.passed {
        return Err(Error::Inconclusive(format!(
            "tail bound {:.4} not below the scanned maximum {max_ratio:.4}",
            certificate.tail_bound
        )));
    }
    Ok(KappaEstimate { kappa: 1.0 - max_ratio, argmax: best.1, max_ratio, search_radius, g0, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::{FractionalGreen, WalkGreen};
    use crate::model::StableLaw;

    #[test]
    fn massive_line() {
        let m = ModelSpec::Massive { dim: 1, mass: 0.5 };
        let g = WalkGreen::new(&m, 1e-10).unwrap();
        let k = kappa(&m, &g, 8.0).unwrap();
        assert!((k.kappa - (libm::sqrt(3.0) - 1.0)).abs() < 1e-9);
        assert_eq!(k.argmax, Site::axis(1, 1));
        assert!(k.certificate.passed);
    }

    #[test]
    fn dgff_three_dimensions() {
        let m = ModelSpec::Dgff { dim: 3 };
        let g = WalkGreen::new(&m, 1e-10).unwrap();
        let k = kappa(&m, &g, 8.0).unwrap();
        assert!((k.kappa - 1.0 / 1.516_386_059_151_978).abs() < 1e-8, "{k:?}");
    }

    #[test]
    fn membrane_and_fractional_certify() {
        let m = ModelSpec::Membrane { dim: 5 };
        let g = WalkGreen::new(&m, 1e-10).unwrap();
        let k = kappa(&m, &g, 8.0).unwrap();
        assert!(k.kappa > 0.0 && k.kappa <= 1.0, "{k:?}");
        let m = ModelSpec::Fractional { dim: 2, index: 1.0, scale: 1.0 };
        let g = FractionalGreen::new(StableLaw::new(2, 1.0, 1.0).unwrap(), 24, 1e-10).unwrap();
        let k = kappa(&m, &g, 6.0).unwrap();
        assert!(k.kappa > 0.0 && k.kappa <= 1.0, "{k:?}");
    }
}
