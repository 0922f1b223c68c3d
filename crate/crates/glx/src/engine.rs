//! Worker pool, cached Green matrices and field construction shared by the
//! experiments. Parallel maps collect in index order, so every reduction
//! downstream runs in a fixed order regardless of the worker count.

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use glx_core::gaussian::{FieldCovariance, VarianceMode};
use glx_core::green::{BoxGreen, FractionalGreen, GreenMatrix, ModelKernel, StationaryCovariance, WalkGreen};
use glx_core::{BoxDomain, ModelSpec, Site};
use rayon::prelude::*;

use crate::cache::GreenCache;

#[derive(Debug)]
pub struct Engine {
    pool: rayon::ThreadPool,
    cache: GreenCache,
    tol: f64,
}

impl Engine {
    pub fn new(workers: usize, cache: GreenCache, tol: f64) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
        Ok(Engine { pool, cache, tol })
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// `f(0), ..., f(n-1)` computed on the pool, returned in index order.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }

    pub fn try_map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }

    /// Box solver and dense `G_N`, columns solved in parallel, one per orbit
    /// of the box symmetry group.
    pub fn box_green(&self, model: &ModelSpec, domain: &BoxDomain) -> Result<(BoxGreen, GreenMatrix)> {
        let kernel = ModelKernel::for_box(model, domain, self.tol)?;
        let bg = BoxGreen::new(&kernel, domain)?;
        if let Some(g) = self.cache.load(model, domain, self.tol)? {
            return Ok((bg, g));
        }
        let reps = bg.representatives();
        let cols = self.try_map(reps.len(), |k| Ok(bg.solve_column(reps[k])?))?;
        let map: BTreeMap<usize, Vec<f64>> = reps.into_iter().zip(cols).collect();
        let g = bg.assemble(&map)?;
        self.cache.store(model, &g, self.tol).context("writing Green cache")?;
        Ok((bg, g))
    }

    pub fn field(&self, model: &ModelSpec, domain: &BoxDomain, mode: VarianceMode) -> Result<FieldCovariance> {
        match mode {
            VarianceMode::Finite => {
                let (bg, g) = self.box_green(model, domain)?;
                Ok(FieldCovariance::from_box_green(&bg, &g))
            }
            VarianceMode::Infinite => {
                let reach = domain.side().saturating_sub(1) as f64 * (domain.dim() as f64).sqrt();
                let g = stationary(model, reach, self.tol)?;
                Ok(FieldCovariance::stationary(domain, g.as_ref())?)
            }
        }
    }
}

/// Infinite-volume evaluator valid for offsets of norm up to `reach`.
pub fn stationary(model: &ModelSpec, reach: f64, tol: f64) -> Result<Box<dyn StationaryCovariance + Sync>> {
    Ok(match model.stable_law() {
        None => Box::new(WalkGreen::new(model, tol)?),
        Some(law) => {
            // the evaluator accepts offsets with 4 |alpha| <= R
            let r = ((4.0 * reach).ceil() as usize).max(8);
            Box::new(FractionalGreen::new(law, r, tol)?)
        }
    })
}

/// `g(0)` of the infinite-volume field.
pub fn g0(model: &ModelSpec, tol: f64) -> Result<f64> {
    Ok(stationary(model, 2.0, tol)?.value(&Site::origin(model.dim()))?)
}
