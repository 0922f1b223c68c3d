//! Finite-volume precision matrices and Green's functions with zero boundary
//! values outside a site set.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{unit_offsets, BoxDomain, Site};
use crate::linalg::{conjugate_gradient, BandCholesky, Cholesky, DenseMatrix, SparseSym};
use crate::model::ModelSpec;

use super::stable::TransitionTable;

/// A precision matrix restricted to a finite site set.
#[derive(Debug, Clone)]
pub enum Precision {
    Sparse(SparseSym),
    Dense(DenseMatrix),
}

impl Precision {
    pub fn n(&self) -> usize {
        match self {
            Precision::Sparse(s) => s.n(),
            Precision::Dense(d) => d.n(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Precision::Sparse(s) => s.get(i, j),
            Precision::Dense(d) => d.get(i, j),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Precision::Sparse(s) => s.to_dense(),
            Precision::Dense(d) => d.clone(),
        }
    }

    pub fn submatrix(&self, idx: &[usize]) -> Precision {
        match self {
            Precision::Sparse(s) => Precision::Sparse(s.submatrix(idx)),
            Precision::Dense(d) => Precision::Dense(d.submatrix(idx)),
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Precision::Sparse(s) => s.matvec_into(x, y),
            Precision::Dense(d) => {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = crate::linalg::dot(d.row(i), x);
                }
            }
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        match self {
            Precision::Sparse(s) => s.diag(),
            Precision::Dense(d) => d.diag(),
        }
    }

    /// Cholesky factorization in the cheapest available form.
    pub fn factor(&self) -> Result<PrecisionFactor> {
        Ok(match self {
            Precision::Sparse(s) => PrecisionFactor::Band(BandCholesky::factor(s)?),
            Precision::Dense(d) => PrecisionFactor::Dense(d.cholesky()?),
        })
    }
}

/// Factor of a precision matrix.
#[derive(Debug, Clone)]
pub enum PrecisionFactor {
    Band(BandCholesky),
    Dense(Cholesky),
}

impl PrecisionFactor {
    pub fn n(&self) -> usize {
        match self {
            PrecisionFactor::Band(b) => b.n(),
            PrecisionFactor::Dense(c) => c.n(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            PrecisionFactor::Band(f) => f.solve(b),
            PrecisionFactor::Dense(f) => f.solve(b),
        }
    }

    /// `L^{-T} z`: a draw with covariance `Q^{-1}` from white noise `z`.
    pub fn sample_from_white(&self, z: &mut [f64]) {
        match self {
            PrecisionFactor::Band(f) => f.solve_upper(z),
            PrecisionFactor::Dense(f) => f.solve_upper(z),
        }
    }

    /// `(Q^{-1})_{ii}`.
    pub fn inverse_diag_entry(&self, i: usize) -> f64 {
        let mut e = vec![0.0; self.n()];
        e[i] = 1.0;
        self.solve(&e)[i]
    }
}

/// Whether walk sums carry weight `1` or `m + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkWeight {
    One,
    Linear,
}

/// Model together with whatever tables are needed to assemble its finite
/// precision matrices.
#[derive(Debug, Clone)]
pub struct ModelKernel {
    model: ModelSpec,
    table: Option<TransitionTable>,
}

impl ModelKernel {
    /// `extent` is the largest coordinate difference that will be queried.
    pub fn new(model: &ModelSpec, extent: usize, tol: f64) -> Result<Self> {
        model.validate()?;
        let table = match model.stable_law() {
            Some(law) => Some(TransitionTable::new(law, extent, tol)?),
            None => None,
        };
        Ok(ModelKernel { model: *model, table })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn table(&self) -> Option<&TransitionTable> {
        self.table.as_ref()
    }

    pub fn for_box(model: &ModelSpec, domain: &BoxDomain, tol: f64) -> Result<Self> {
        if model.dim() != domain.dim() {
            return Err(Error::InvalidParameter(format!(
                "model dimension {} does not match domain dimension {}",
                model.dim(),
                domain.dim()
            )));
        }
        ModelKernel::new(model, domain.side().saturating_sub(1), tol)
    }

    /// Precision of the model on `sites` with zero boundary values outside.
    ///
    /// * dgff: `I - P`, massive: `I - (1 - mass) P`, fractional: `I - Q`;
    /// * membrane: the bilaplacian `(P - I)^2` with both indices in the set.
    pub fn precision(&self, sites: &[Site]) -> Result<Precision> {
        let index = site_index(sites);
        let d = self.model.dim();
        let step = 1.0 / (2 * d) as f64;
        match self.model {
            ModelSpec::Dgff { .. } | ModelSpec::Massive { .. } => {
                let a = match self.model {
                    ModelSpec::Massive { mass, .. } => (1.0 - mass) * step,
                    _ => step,
                };
                let units = unit_offsets(d);
                let rows = sites
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let mut r = vec![(i, 1.0)];
                        for e in &units {
                            if let Some(&j) = index.get(&s.add(e)) {
                                r.push((j, -a));
                            }
                        }
                        r
                    })
                    .collect();
                Ok(Precision::Sparse(SparseSym::from_rows(rows)))
            }
            ModelSpec::Membrane { .. } => {
                let stencil = bilaplacian_stencil(d);
                let rows = sites
                    .iter()
                    .map(|s| stencil.iter().filter_map(|(o, v)| index.get(&s.add(o)).map(|&j| (j, *v))).collect())
                    .collect();
                Ok(Precision::Sparse(SparseSym::from_rows(rows)))
            }
            ModelSpec::Fractional { .. } => {
                let t = self.table.as_ref().expect("fractional kernel carries a table");
                let n = sites.len();
                let mut m = DenseMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        let q = t.get(&sites[i].sub(&sites[j]))?;
                        m.set(i, j, if i == j { 1.0 - q } else { -q });
                    }
                }
                Ok(Precision::Dense(m))
            }
        }
    }

    /// One-step kernel of the walk killed outside `sites`, and the weight of
    /// the path sum representing the covariance.
    pub fn killed_kernel(&self, sites: &[Site]) -> Result<(Precision, WalkWeight)> {
        let index = site_index(sites);
        let d = self.model.dim();
        let step = 1.0 / (2 * d) as f64;
        let nn = |a: f64| {
            let units = unit_offsets(d);
            let rows = sites
                .iter()
                .map(|s| units.iter().filter_map(|e| index.get(&s.add(e)).map(|&j| (j, a))).collect())
                .collect();
            Precision::Sparse(SparseSym::from_rows(rows))
        };
        Ok(match self.model {
            ModelSpec::Dgff { .. } => (nn(step), WalkWeight::One),
            ModelSpec::Massive { mass, .. } => (nn((1.0 - mass) * step), WalkWeight::One),
            ModelSpec::Membrane { .. } => (nn(step), WalkWeight::Linear),
            ModelSpec::Fractional { .. } => {
                let t = self.table.as_ref().expect("fractional kernel carries a table");
                let n = sites.len();
                let mut m = DenseMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        m.set(i, j, t.get(&sites[i].sub(&sites[j]))?);
                    }
                }
                (Precision::Dense(m), WalkWeight::One)
            }
        })
    }
}

pub(crate) fn site_index(sites: &[Site]) -> BTreeMap<Site, usize> {
    sites.iter().enumerate().map(|(i, s)| (*s, i)).collect()
}

/// Stencil of `(P - I)^2` on `Z^d`.
pub fn bilaplacian_stencil(d: usize) -> Vec<(Site, f64)> {
    let df = d as f64;
    let mut out = vec![(Site::origin(d), 1.0 + 1.0 / (2.0 * df))];
    for e in unit_offsets(d) {
        out.push((e, -1.0 / df));
        out.push((e.add(&e), 1.0 / (4.0 * df * df)));
    }
    let units = unit_offsets(d);
    for (a, ea) in units.iter().enumerate() {
        for eb in units.iter().skip(a + 1) {
            let s = ea.add(eb);
            // skip e_i - e_i = 0 (same axis, opposite sign)
            if s.norm2() == 2 {
                out.push((s, 1.0 / (2.0 * df * df)));
            }
        }
    }
    out
}

/// Dense symmetric covariance matrix `g_N` on a box, indexed row-major.
#[derive(Debug, Clone)]
pub struct GreenMatrix {
    domain: BoxDomain,
    matrix: DenseMatrix,
}

impl GreenMatrix {
    pub fn new(domain: BoxDomain, matrix: DenseMatrix) -> Result<Self> {
        if matrix.n() != domain.volume() {
            return Err(Error::InvalidParameter("matrix size does not match the domain".into()));
        }
        Ok(GreenMatrix { domain, matrix })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn diag(&self) -> Vec<f64> {
        self.matrix.diag()
    }
}

/// How columns of `Q^{-1}` are obtained.
#[derive(Debug, Clone)]
pub enum ColumnBackend {
    Factor(PrecisionFactor),
    /// conjugate gradients with relative tolerance
    Iterative {
        tol: f64,
    },
}

/// Column solver for `G_N = Q_N^{-1}` on a box that only solves for one
/// representative per orbit of the box symmetry group.
#[derive(Debug, Clone)]
pub struct BoxGreen {
    domain: BoxDomain,
    precision: Precision,
    backend: ColumnBackend,
}

/// Rough flop budget above which the banded factorization is avoided.
const BAND_FLOP_LIMIT: f64 = 2e10;

impl BoxGreen {
    pub fn new(kernel: &ModelKernel, domain: &BoxDomain) -> Result<Self> {
        let sites: Vec<Site> = domain.sites().collect();
        let precision = kernel.precision(&sites)?;
        let backend = match &precision {
            Precision::Sparse(s) => {
                let b = s.bandwidth() as f64;
                if (s.n() as f64) * b * b > BAND_FLOP_LIMIT {
                    ColumnBackend::Iterative { tol: 1e-13 }
                } else {
                    ColumnBackend::Factor(precision.factor()?)
                }
            }
            Precision::Dense(_) => ColumnBackend::Factor(precision.factor()?),
        };
        Ok(BoxGreen { domain: *domain, precision, backend })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn precision(&self) -> &Precision {
        &self.precision
    }

    pub fn backend(&self) -> &ColumnBackend {
        &self.backend
    }

    /// Sorted list of orbit representatives (box indices).
    pub fn representatives(&self) -> Vec<usize> {
        let mut reps: Vec<usize> = (0..self.domain.volume())
            .map(|i| {
                let s = self.domain.site(i);
                let t = self.domain.symmetry_of(&s);
                self.domain.index_of(&t.apply(&s)).expect("inside")
            })
            .collect();
        reps.sort_unstable();
        reps.dedup();
        reps
    }

    /// Column `G(., j)` by a direct solve (no symmetry).
    pub fn solve_column(&self, j: usize) -> Result<Vec<f64>> {
        let n = self.domain.volume();
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        match &self.backend {
            ColumnBackend::Factor(f) => Ok(f.solve(&e)),
            ColumnBackend::Iterative { tol } => {
                let diag = self.precision.diag();
                conjugate_gradient(&|x, y| self.precision.matvec_into(x, y), &diag, &e, *tol, 20 * n + 1000)
            }
        }
    }

    /// Maps column `j` from the column of its orbit representative.
    pub fn column_from_rep(&self, j: usize, rep_column: &[f64]) -> Vec<f64> {
        let s = self.domain.site(j);
        let t = self.domain.symmetry_of(&s);
        (0..self.domain.volume())
            .map(|b| {
                let tb = t.apply(&self.domain.site(b));
                rep_column[self.domain.index_of(&tb).expect("inside")]
            })
            .collect()
    }

    /// `G(j, j)` through the representative's column entry.
    pub fn rep_of(&self, j: usize) -> usize {
        let s = self.domain.site(j);
        let t = self.domain.symmetry_of(&s);
        self.domain.index_of(&t.apply(&s)).expect("inside")
    }

    /// Full dense `G_N` from representative columns.
    pub fn assemble(&self, rep_columns: &BTreeMap<usize, Vec<f64>>) -> Result<GreenMatrix> {
        let n = self.domain.volume();
        let mut m = DenseMatrix::zeros(n);
        for j in 0..n {
            let s = self.domain.site(j);
            let t = self.domain.symmetry_of(&s);
            let r = self.domain.index_of(&t.apply(&s)).expect("inside");
            let col = rep_columns.get(&r).ok_or_else(|| Error::Consistency(format!("missing column {r}")))?;
            for b in 0..n {
                let tb = t.apply(&self.domain.site(b));
                m.set(b, j, col[self.domain.index_of(&tb).expect("inside")]);
            }
        }
        m.symmetrize();
        for i in 0..n {
            if !(m.get(i, i) > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: i, value: m.get(i, i) });
            }
        }
        GreenMatrix::new(self.domain, m)
    }

    /// Sequential dense `G_N`.
    pub fn dense(&self) -> Result<GreenMatrix> {
        let mut cols = BTreeMap::new();
        for r in self.representatives() {
            cols.insert(r, self.solve_column(r)?);
        }
        self.assemble(&cols)
    }
}

/// Dense finite-volume Green's function `G_N` of the model on the box.
pub fn finite_green(model: &ModelSpec, domain: &BoxDomain, tol: f64) -> Result<GreenMatrix> {
    let kernel = ModelKernel::for_box(model, domain, tol)?;
    BoxGreen::new(&kernel, domain)?.dense()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_boxes() {
        let dom = BoxDomain::new(1, 1, 0.0).unwrap();
        let g = finite_green(&ModelSpec::Massive { dim: 1, mass: 0.3 }, &dom, 1e-10).unwrap();
        assert_eq!(g.get(0, 0), 1.0);
        // membrane needs d >= 5; the 1x1 bilaplacian entry is 1 + 1/(2d)
        let st = bilaplacian_stencil(1);
        assert!((st[0].1 - 1.5).abs() < 1e-15);
        let dom5 = BoxDomain::new(5, 1, 0.0).unwrap();
        let g = finite_green(&ModelSpec::Membrane { dim: 5 }, &dom5, 1e-10).unwrap();
        assert!((g.get(0, 0) - 10.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn bilaplacian_rows_sum_to_zero() {
        for d in 1..7 {
            let s: f64 = bilaplacian_stencil(d).iter().map(|e| e.1).sum();
            assert!(s.abs() < 1e-14, "d={d}");
            assert_eq!(bilaplacian_stencil(d).len(), 1 + 4 * d + 2 * d * (d - 1));
        }
    }

    #[test]
    fn symmetry_reduced_matches_direct_inverse() {
        for model in
            [ModelSpec::Dgff { dim: 3 }, ModelSpec::Massive { dim: 2, mass: 0.2 }, ModelSpec::Membrane { dim: 5 }]
        {
            let n = if model.dim() == 5 { 3 } else { 5 };
            let dom = BoxDomain::new(model.dim(), n, 0.0).unwrap();
            let g = finite_green(&model, &dom, 1e-10).unwrap();
            let kernel = ModelKernel::for_box(&model, &dom, 1e-10).unwrap();
            let sites: Vec<Site> = dom.sites().collect();
            let direct = kernel.precision(&sites).unwrap().to_dense().cholesky().unwrap().inverse();
            assert!(g.matrix().max_abs_diff(&direct) < 1e-12, "{model:?}");
        }
    }

    #[test]
    fn iterative_backend_agrees() {
        let model = ModelSpec::Membrane { dim: 5 };
        let dom = BoxDomain::new(5, 3, 0.0).unwrap();
        let kernel = ModelKernel::for_box(&model, &dom, 1e-10).unwrap();
        let mut bg = BoxGreen::new(&kernel, &dom).unwrap();
        let col = bg.solve_column(121).unwrap();
        bg.backend = ColumnBackend::Iterative { tol: 1e-14 };
        let col2 = bg.solve_column(121).unwrap();
        for (a, b) in col.iter().zip(&col2) {
            assert!((a - b).abs() < 1e-11);
        }
    }
}
