//! Model specifications, stable laws and dependency-radius policies.

use alloc::format;

use crate::error::{Error, Result};

/// The four interface models.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum ModelSpec {
    /// Discrete Gaussian free field, covariance the simple random walk Green's function.
    Dgff { dim: usize },
    /// Membrane model with bilaplacian precision.
    Membrane { dim: usize },
    /// Massive free field: walk killed with probability `mass` at every step.
    Massive { dim: usize, mass: f64 },
    /// Fractional free field driven by an isotropic `index`-stable walk.
    Fractional { dim: usize, index: f64, scale: f64 },
}

/// Short model label used in tables and file names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    Dgff,
    Membrane,
    Massive,
    Fractional,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ModelSpec::Dgff { dim } | ModelSpec::Membrane { dim } => dim,
            ModelSpec::Massive { dim, .. } | ModelSpec::Fractional { dim, .. } => dim,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Dgff { .. } => ModelKind::Dgff,
            ModelSpec::Membrane { .. } => ModelKind::Membrane,
            ModelSpec::Massive { .. } => ModelKind::Massive,
            ModelSpec::Fractional { .. } => ModelKind::Fractional,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind() {
            ModelKind::Dgff => "dgff",
            ModelKind::Membrane => "membrane",
            ModelKind::Massive => "massive",
            ModelKind::Fractional => "fractional",
        }
    }

    /// Checks the dimension and parameter constraints of each model.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > crate::lattice::MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension {d} outside 1..={}", crate::lattice::MAX_DIM)));
        }
        match *self {
            ModelSpec::Dgff { .. } if d < 3 => Err(Error::Unsupported(format!("dgff requires d>=3 (got d={d})"))),
            ModelSpec::Membrane { .. } if d < 5 => {
                Err(Error::Unsupported(format!("membrane requires d>=5 (got d={d})")))
            }
            ModelSpec::Massive { mass, .. } if !(mass > 0.0 && mass < 1.0) => {
                Err(Error::InvalidParameter(format!("massive requires mass in (0,1) (got {mass})")))
            }
            ModelSpec::Fractional { index, scale, .. } => {
                let cap = (d as f64).min(2.0);
                if !(index > 0.0 && index < cap) {
                    return Err(Error::Unsupported(format!("fractional requires 0<s<min(2,d) (got s={index}, d={d})")));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!("fractional requires scale>0 (got {scale})")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The isotropic stable law behind the fractional model.
    pub fn stable_law(&self) -> Option<StableLaw> {
        match *self {
            ModelSpec::Fractional { dim, index, scale } => Some(StableLaw { dim, index, scale }),
            _ => None,
        }
    }

    /// Polynomial decay exponent `p` with `g(x) ~ c |x|^{-p}`, if any.
    pub fn decay_power(&self) -> Option<f64> {
        let d = self.dim() as f64;
        match *self {
            ModelSpec::Dgff { .. } => Some(d - 2.0),
            ModelSpec::Membrane { .. } => Some(d - 4.0),
            ModelSpec::Massive { .. } => None,
            ModelSpec::Fractional { index, .. } => Some(d - index),
        }
    }
}

/// Isotropic stable law on `R^d` with characteristic function `exp(-scale |t|^index)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StableLaw {
    pub dim: usize,
    pub index: f64,
    pub scale: f64,
}

impl StableLaw {
    pub fn new(dim: usize, index: f64, scale: f64) -> Result<Self> {
        if dim == 0 || dim > crate::lattice::MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension {dim} unsupported")));
        }
        if !(index > 0.0 && index < 2.0) {
            return Err(Error::Unsupported(format!("stable index must lie in (0,2) (got {index})")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("stable scale must be positive (got {scale})")));
        }
        Ok(StableLaw { dim, index, scale })
    }
}

/// How the dependency radius `s_N` grows with the volume.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DependencyRadiusPolicy {
    pub kind: ModelKind,
    pub dim: usize,
    /// audit exponent in `(log N)^{2+theta}`
    pub theta: f64,
    /// `T` in `(log N)^T` for the dgff and membrane
    pub exponent: f64,
    /// `xi` in `(log N)^{xi/(d-s)}` for the fractional model
    pub xi: f64,
    /// stable index of the fractional model
    pub index: f64,
}

impl DependencyRadiusPolicy {
    /// Policy with the smallest admissible exponents plus `margin`.
    pub fn for_model(model: &ModelSpec, theta: f64, margin: f64) -> Result<Self> {
        model.validate()?;
        let d = model.dim();
        let df = d as f64;
        let (exponent, xi, index) = match *model {
            ModelSpec::Dgff { .. } => ((2.0 + theta) / (df - 2.0) + margin, 0.0, 0.0),
            ModelSpec::Membrane { .. } => ((2.0 + theta) / (df - 4.0) + margin, 0.0, 0.0),
            ModelSpec::Massive { .. } => (1.0, 0.0, 0.0),
            ModelSpec::Fractional { index, .. } => (0.0, 2.0 + theta + margin, index),
        };
        let p = DependencyRadiusPolicy { kind: model.kind(), dim: d, theta, exponent, xi, index };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let df = self.dim as f64;
        match self.kind {
            ModelKind::Membrane => {
                if self.dim <= 4 {
                    return Err(Error::Unsupported(format!("membrane requires d>=5 (got d={})", self.dim)));
                }
                let t0 = (2.0 + self.theta) / (df - 4.0);
                if self.exponent <= t0 {
                    return Err(Error::InvalidParameter(format!("membrane needs T>{t0} (got {})", self.exponent)));
                }
            }
            ModelKind::Dgff => {
                if self.dim <= 2 {
                    return Err(Error::Unsupported(format!("dgff requires d>=3 (got d={})", self.dim)));
                }
                let t0 = (2.0 + self.theta) / (df - 2.0);
                if self.exponent <= t0 {
                    return Err(Error::InvalidParameter(format!("dgff needs T>{t0} (got {})", self.exponent)));
                }
            }
            ModelKind::Fractional => {
                if self.index >= df {
                    return Err(Error::Unsupported(format!(
                        "fractional requires s<d (got s={}, d={})",
                        self.index, self.dim
                    )));
                }
                if self.xi <= 2.0 {
                    return Err(Error::InvalidParameter(format!("fractional needs xi>2 (got {})", self.xi)));
                }
            }
            ModelKind::Massive => {}
        }
        Ok(())
    }

    /// `s_N` for a box of volume `n_sites`.
    pub fn radius(&self, n_sites: f64) -> Result<f64> {
        if !(n_sites >= 2.0) {
            return Err(Error::InvalidParameter(format!("dependency radius needs N>=2 (got {n_sites})")));
        }
        self.check()?;
        let l = libm::log(n_sites);
        Ok(match self.kind {
            ModelKind::Massive => l,
            ModelKind::Dgff | ModelKind::Membrane => libm::pow(l, self.exponent),
            ModelKind::Fractional => libm::pow(l, self.xi / (self.dim as f64 - self.index)),
        })
    }

    /// Compares `s_N` with `N^{kappa/(d(2-kappa))}`.
    pub fn kappa_link(&self, n_sites: f64, kappa: f64) -> Result<KappaLink> {
        let s = self.radius(n_sites)?;
        let eps = kappa / (self.dim as f64 * (2.0 - kappa));
        let l = libm::log(n_sites);
        let ratio = s / libm::exp(eps * l);
        // d log(ratio) / d log N
        let p = match self.kind {
            ModelKind::Massive => 1.0,
            ModelKind::Dgff | ModelKind::Membrane => self.exponent,
            ModelKind::Fractional => self.xi / (self.dim as f64 - self.index),
        };
        let slope = p / l - eps;
        Ok(KappaLink {
            radius: s,
            exponent: eps,
            ratio,
            log_slope: slope,
            decreasing: slope < 0.0,
            onset_log_n: p / eps,
        })
    }
}

/// Numerical view of the constraint `s_N = o(N^{kappa/(d(2-kappa))})`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KappaLink {
    pub radius: f64,
    pub exponent: f64,
    /// `s_N / N^{exponent}`
    pub ratio: f64,
    /// local slope of `log ratio` against `log N`
    pub log_slope: f64,
    /// whether the ratio is already decreasing at this `N`
    pub decreasing: bool,
    /// `log N` beyond which the ratio decreases
    pub onset_log_n: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e10() -> f64 {
        libm::exp(10.0)
    }

    #[test]
    fn radius_examples() {
        let m = ModelSpec::Massive { dim: 2, mass: 0.3 };
        let p = DependencyRadiusPolicy::for_model(&m, 1.0, 0.0).unwrap();
        assert!((p.radius(e10()).unwrap() - 10.0).abs() < 1e-12);

        let mut p = DependencyRadiusPolicy::for_model(&ModelSpec::Membrane { dim: 5 }, 1.0, 0.01).unwrap();
        p.exponent = 3.01;
        assert!((p.radius(e10()).unwrap() - 10f64.powf(3.01)).abs() < 1e-9);
        assert!((p.radius(e10()).unwrap() - 1023.3).abs() < 0.05);

        let mut p =
            DependencyRadiusPolicy::for_model(&ModelSpec::Fractional { dim: 2, index: 1.0, scale: 1.0 }, 0.4, 0.0)
                .unwrap();
        p.xi = 2.5;
        assert!((p.radius(e10()).unwrap() - 316.227_766).abs() < 1e-5);
    }

    #[test]
    fn constraints_are_enforced() {
        assert!(matches!(ModelSpec::Membrane { dim: 4 }.validate(), Err(Error::Unsupported(_))));
        assert!(matches!(ModelSpec::Dgff { dim: 2 }.validate(), Err(Error::Unsupported(_))));
        assert!(ModelSpec::Fractional { dim: 1, index: 1.0, scale: 1.0 }.validate().is_err());
        assert!(ModelSpec::Massive { dim: 1, mass: 1.0 }.validate().is_err());
        let mut p = DependencyRadiusPolicy::for_model(&ModelSpec::Membrane { dim: 5 }, 1.0, 0.01).unwrap();
        p.exponent = 3.0;
        assert!(p.radius(100.0).is_err());
        let mut p =
            DependencyRadiusPolicy::for_model(&ModelSpec::Fractional { dim: 2, index: 1.0, scale: 1.0 }, 0.1, 0.0)
                .unwrap();
        p.xi = 2.0;
        assert!(p.radius(100.0).is_err());
        assert!(p.radius(1.0).is_err());
        let msg = alloc::string::ToString::to_string(&ModelSpec::Membrane { dim: 3 }.validate().unwrap_err());
        assert!(msg.contains("membrane requires d>=5"));
    }
}
