//! Green's functions: infinite-volume evaluators, finite-volume covariance
//! matrices, walk-sum oracles and the constant `kappa`.

pub mod walk;

pub use walk::WalkGreen;
pub mod stable;

pub use stable::{fractional_transition, stable_density, StableDensity, TransitionTable};
pub mod finite;

pub use finite::{finite_green, BoxGreen, GreenMatrix, ModelKernel, Precision, PrecisionFactor, WalkWeight};
pub mod oracle;

pub use oracle::{killed_walk_green_oracle, KilledWalkOracle, PathSum};
pub mod fractional;
pub mod kappa;

pub use fractional::FractionalGreen;
pub use kappa::{kappa, KappaEstimate, TailCertificate};

use crate::error::Result;
use crate::lattice::Site;

/// Stationary covariance `g(alpha) = g(0, alpha)` on `Z^d`.
pub trait StationaryCovariance {
    fn dim(&self) -> usize;
    fn value(&self, offset: &Site) -> Result<f64>;
}

impl StationaryCovariance for WalkGreen {
    fn dim(&self) -> usize {
        WalkGreen::dim(self)
    }
    fn value(&self, offset: &Site) -> Result<f64> {
        WalkGreen::value(self, offset)
    }
}

impl StationaryCovariance for FractionalGreen {
    fn dim(&self) -> usize {
        self.law().dim
    }
    fn value(&self, offset: &Site) -> Result<f64> {
        FractionalGreen::value(self, offset)
    }
}
