//! Extremal point measures on `[0,1]^d x (-inf, inf]` and the two Kallenberg
//! conditions for Poisson convergence.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evt::ScalingConstants;
use crate::lattice::BoxDomain;
use crate::stein_chen::Event;

/// Points `(alpha/n, (phi_alpha - b_N)/a_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMeasure {
    pub dim: usize,
    /// `dim` coordinates per point
    pub positions: Vec<f64>,
    pub marks: Vec<f64>,
}

impl PointMeasure {
    pub fn len(&self) -> usize {
        self.marks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of points in the cell.
    pub fn count(&self, cell: &CellSpec) -> usize {
        (0..self.len()).filter(|&i| cell.contains(self.position(i), self.marks[i])).count()
    }
}

/// Point measure of one replicate over `sites` (all box sites in full mode,
/// the bulk in bulk mode).
pub fn exceedance_points(
    values: &[f64],
    domain: &BoxDomain,
    scaling: &ScalingConstants,
    sites: &[usize],
) -> PointMeasure {
    let n = domain.side() as f64;
    let dim = domain.dim();
    let mut positions = Vec::with_capacity(sites.len() * dim);
    let mut marks = Vec::with_capacity(sites.len());
    for &i in sites {
        positions.extend(domain.site(i).coords().iter().map(|&c| c as f64 / n));
        marks.push(scaling.rescale(values[i]));
    }
    PointMeasure { dim, positions, marks }
}

/// Rectangle `prod [lower_i, upper_i)` of the unit cube (closed at 1) times a
/// union of disjoint intervals `(x, y]` in the rescaled variable.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
}

impl CellSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidParameter("rectangle bounds must share a positive dimension".into()));
        }
        for (&l, &u) in self.lower.iter().zip(&self.upper) {
            if !(0.0 <= l && l <= u && u <= 1.0) {
                return Err(Error::InvalidParameter(format!("rectangle side [{l}, {u}] not inside [0, 1]")));
            }
        }
        Event::new(self.intervals.clone()).map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains_position(&self, t: &[f64]) -> bool {
        t.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&l, &u))| l <= x && (x < u || (u == 1.0 && x <= 1.0)))
    }

    pub fn contains_mark(&self, z: f64) -> bool {
        self.intervals.iter().any(|&(x, y)| x < z && z <= y)
    }

    pub fn contains(&self, t: &[f64], z: f64) -> bool {
        self.contains_position(t) && self.contains_mark(z)
    }

    /// Intervals mapped to field units `b + a x`.
    pub fn field_event(&self, scaling: &ScalingConstants) -> Result<Event> {
        let map = |x: f64| if x.is_infinite() { x } else { scaling.level(x) };
        Event::new(self.intervals.iter().map(|&(x, y)| (map(x), map(y))).collect())
    }

    /// Box indices among `sites` whose position lies in the rectangle.
    pub fn sites_in(&self, domain: &BoxDomain, sites: &[usize]) -> Vec<usize> {
        let n = domain.side() as f64;
        sites
            .iter()
            .copied()
            .filter(|&i| {
                let t: Vec<f64> = domain.site(i).coords().iter().map(|&c| c as f64 / n).collect();
                self.contains_position(&t)
            })
            .collect()
    }
}

/// Limit intensity of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Intensity {
    pub expected: f64,
    pub void_probability: f64,
}

/// `|A cap [delta, 1-delta]^d| sum (e^{-x_i} - e^{-y_i})` and its void
/// probability.
pub fn poisson_intensity(cell: &CellSpec, delta: f64) -> Result<Intensity> {
    cell.validate()?;
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta must lie in [0, 1/2) (got {delta})")));
    }
    let vol: f64 =
        cell.lower.iter().zip(&cell.upper).map(|(&l, &u)| (u.min(1.0 - delta) - l.max(delta)).max(0.0)).product();
    let mut mass = 0.0;
    for &(x, y) in &cell.intervals {
        if x == f64::NEG_INFINITY {
            return Err(Error::Range("interval unbounded below has infinite intensity".into()));
        }
        mass += libm::exp(-x) - if y == f64::INFINITY { 0.0 } else { libm::exp(-y) };
    }
    let expected = vol * mass;
    Ok(Intensity { expected, void_probability: libm::exp(-expected) })
}

/// Empirical summary for one cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellSummary {
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub var_over_mean: f64,
    pub void_freq: f64,
    pub intensity: Intensity,
}

/// Both Kallenberg conditions from per-replicate cell counts.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KallenbergSummary {
    pub replicates: usize,
    pub cells: Vec<CellSummary>,
    pub joint_void_freq: f64,
    pub joint_void_se: f64,
    /// `exp(-sum of expected counts)`
    pub joint_void_limit: f64,
    /// pairwise count correlations, row-major `k x k`
    pub correlations: Vec<f64>,
}

/// `counts[r][j]` is the count of cell `j` in replicate `r`.
pub fn kallenberg_summary(counts: &[Vec<usize>], cells: &[CellSpec], delta: f64) -> Result<KallenbergSummary> {
    let k = cells.len();
    let r = counts.len();
    if r < 2 || k == 0 || counts.iter().any(|c| c.len() != k) {
        return Err(Error::InvalidParameter("counts must be replicates x cells with at least two replicates".into()));
    }
    let rf = r as f64;
    let mut means = vec![0.0; k];
    for row in counts {
        for j in 0..k {
            means[j] += row[j] as f64;
        }
    }
    means.iter_mut().for_each(|m| *m /= rf);
    let mut cov = vec![0.0; k * k];
    for row in counts {
        for a in 0..k {
            for b in 0..k {
                cov[a * k + b] += (row[a] as f64 - means[a]) * (row[b] as f64 - means[b]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= rf - 1.0);
    let mut summaries = Vec::with_capacity(k);
    let mut total = 0.0;
    for j in 0..k {
        let intensity = poisson_intensity(&cells[j], delta)?;
        total += intensity.expected;
        let variance = cov[j * k + j];
        summaries.push(CellSummary {
            mean: means[j],
            mean_se: libm::sqrt(variance / rf),
            variance,
            var_over_mean: if means[j] > 0.0 { variance / means[j] } else { f64::NAN },
            void_freq: counts.iter().filter(|c| c[j] == 0).count() as f64 / rf,
            intensity,
        });
    }
    let correlations = (0..k * k)
        .map(|ab| {
            let (a, b) = (ab / k, ab % k);
            let d = libm::sqrt(cov[a * k + a] * cov[b * k + b]);
            if d > 0.0 {
                cov[ab] / d
            } else {
                f64::NAN
            }
        })
        .collect();
    let jv = counts.iter().filter(|c| c.iter().all(|&x| x == 0)).count() as f64 / rf;
    Ok(KallenbergSummary {
        replicates: r,
        cells: summaries,
        joint_void_freq: jv,
        joint_void_se: libm::sqrt(jv * (1.0 - jv) / rf),
        joint_void_limit: libm::exp(-total),
        correlations,
    })
}

/// Cell counts of one replicate from precomputed per-cell site lists and
/// field-unit events.
pub fn cell_counts(values: &[f64], cell_sites: &[Vec<usize>], events: &[Event]) -> Vec<usize> {
    cell_sites.iter().zip(events).map(|(s, e)| s.iter().filter(|&&i| e.contains(values[i])).count()).collect()
}
