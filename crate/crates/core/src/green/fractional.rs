//! Infinite-volume Green's function of the fractional model from the inverse
//! of `I - Q` on a centred box, extrapolated in the box radius.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{BoxDomain, Site};
use crate::linalg::{conjugate_gradient, DenseMatrix};
use crate::model::StableLaw;

use super::stable::TransitionTable;

const DENSE_LIMIT: usize = 1500;

/// `G_Lambda(0, .)` on `Lambda = [-r, r]^d` for the box radius `r` and `r/2`.
#[derive(Debug, Clone)]
pub struct FractionalGreen {
    law: StableLaw,
    radius: usize,
    full: Vec<f64>,
    half: Vec<f64>,
}

impl FractionalGreen {
    pub fn new(law: StableLaw, box_radius: usize, tol: f64) -> Result<Self> {
        if law.index >= law.dim as f64 {
            return Err(Error::Unsupported(format!(
                "fractional Green's function needs s<d (s={}, d={})",
                law.index, law.dim
            )));
        }
        if box_radius < 2 {
            return Err(Error::InvalidParameter("box radius must be at least 2".into()));
        }
        let table = TransitionTable::new(law, 2 * box_radius, tol)?;
        let full = centred_column(&table, box_radius)?;
        let half = centred_column(&table, box_radius / 2)?;
        Ok(FractionalGreen { law, radius: box_radius, full, half })
    }

    pub fn box_radius(&self) -> usize {
        self.radius
    }

    pub fn law(&self) -> StableLaw {
        self.law
    }

    fn lookup(&self, column: &[f64], r: usize, offset: &Site) -> Option<f64> {
        let side = 2 * r + 1;
        let mut idx = 0usize;
        for &c in offset.coords() {
            let a = c + r as i64;
            if a < 0 || a >= side as i64 {
                return None;
            }
            idx = idx * side + a as usize;
        }
        Some(column[idx])
    }

    fn check(&self, offset: &Site) -> Result<()> {
        if offset.dim() != self.law.dim {
            return Err(Error::InvalidParameter("offset dimension mismatch".into()));
        }
        if 4.0 * offset.norm() > self.radius as f64 {
            return Err(Error::Range(format!("box radius {} is below 4|offset| for {offset:?}", self.radius)));
        }
        Ok(())
    }

    /// `G_Lambda(0, offset)` on the box of the full radius.
    pub fn raw(&self, offset: &Site) -> Result<f64> {
        self.check(offset)?;
        Ok(self.lookup(&self.full, self.radius, offset).expect("checked"))
    }

    /// Value on the half-radius box.
    pub fn raw_half(&self, offset: &Site) -> Result<f64> {
        self.check(offset)?;
        Ok(self.lookup(&self.half, self.radius / 2, offset).expect("checked"))
    }

    /// Richardson extrapolation assuming a box error `~ r^{s-d}`.
    pub fn value(&self, offset: &Site) -> Result<f64> {
        let a = self.raw(offset)?;
        let b = self.raw_half(offset)?;
        let ratio = self.radius as f64 / (self.radius / 2) as f64;
        let f = libm::pow(ratio, self.law.dim as f64 - self.law.index);
        Ok(a + (a - b) / (f - 1.0))
    }
}

/// Solves `(I - Q) x = e_0` on `[-r, r]^d`.
fn centred_column(table: &TransitionTable, r: usize) -> Result<Vec<f64>> {
    let d = table.dim();
    let side = 2 * r + 1;
    let dom = BoxDomain::new(d, side, 0.0)?;
    let n = dom.volume();
    let center = dom.index_of(&Site::diagonal(d, r as i64)).expect("centre");
    let mut rhs = vec![0.0; n];
    rhs[center] = 1.0;
    // table of Q by absolute coordinate differences, row-major in side^d
    let tside = table.max_coord() + 1;
    let mut flat = vec![0.0; tside.pow(d as u32)];
    for (i, v) in flat.iter_mut().enumerate() {
        let mut rem = i;
        let mut c = [0i64; crate::lattice::MAX_DIM];
        for k in (0..d).rev() {
            c[k] = (rem % tside) as i64;
            rem /= tside;
        }
        *v = table.get(&Site::new(&c[..d])?)?;
    }
    if n <= DENSE_LIMIT {
        let m = DenseMatrix::from_fn(n, |i, j| {
            let q = flat[abs_index(&dom, i, j, tside)];
            if i == j {
                1.0 - q
            } else {
                -q
            }
        });
        return Ok(m.cholesky()?.solve(&rhs));
    }
    let coords: Vec<Vec<usize>> = (0..n).map(|i| dom.site(i).coords().iter().map(|&c| c as usize).collect()).collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            let s = conv_row(&flat, tside, side, &coords[i], x, 0, 0, 0);
            y[i] = x[i] - s;
        }
    };
    let diag = vec![1.0 - flat[0]; n];
    conjugate_gradient(&apply, &diag, &rhs, 1e-12, 5000)
}

fn abs_index(dom: &BoxDomain, i: usize, j: usize, tside: usize) -> usize {
    let a = dom.site(i);
    let b = dom.site(j);
    a.coords().iter().zip(b.coords()).fold(0usize, |acc, (x, y)| acc * tside + x.abs_diff(*y) as usize)
}

/// `sum_j Q(|i - j|) x_j` by recursion over coordinates, innermost contiguous.
#[allow(clippy::too_many_arguments)]
fn conv_row(
    flat: &[f64],
    tside: usize,
    side: usize,
    ci: &[usize],
    x: &[f64],
    level: usize,
    tbase: usize,
    xbase: usize,
) -> f64 {
    let d = ci.len();
    if level + 1 == d {
        let il = ci[level];
        let mut s = 0.0;
        for jl in 0..side {
            s += flat[tbase * tside + il.abs_diff(jl)] * x[xbase * side + jl];
        }
        return s;
    }
    let mut s = 0.0;
    for j in 0..side {
        s += conv_row(flat, tside, side, ci, x, level + 1, tbase * tside + ci[level].abs_diff(j), xbase * side + j);
    }
    s
}

/// Polynomial decay check helper: `value * |offset|^{d-s}`.
pub fn normalized(g: f64, offset: &Site, power: f64) -> f64 {
    g * libm::pow(offset.norm(), power)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refuses_small_boxes() {
        let g = FractionalGreen::new(StableLaw::new(2, 1.0, 1.0).unwrap(), 8, 1e-10).unwrap();
        assert!(g.value(&Site::axis(2, 2)).is_ok());
        assert!(matches!(g.value(&Site::axis(2, 3)), Err(Error::Range(_))));
    }

    #[test]
    fn structured_and_dense_solves_agree() {
        let law = StableLaw::new(2, 1.0, 1.0).unwrap();
        let t = TransitionTable::new(law, 40, 1e-10).unwrap();
        let r = 20; // 41^2 = 1681 sites: iterative path
        let x = centred_column(&t, r).unwrap();
        let dom = BoxDomain::new(2, 2 * r + 1, 0.0).unwrap();
        let n = dom.volume();
        let m = DenseMatrix::from_fn(n, |i, j| {
            let q = t.get(&dom.site(i).sub(&dom.site(j))).unwrap();
            if i == j {
                1.0 - q
            } else {
                -q
            }
        });
        let c = dom.index_of(&Site::diagonal(2, r as i64)).unwrap();
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        let y = m.cholesky().unwrap().solve(&e);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn monotone_in_box_radius() {
        let law = StableLaw::new(2, 1.0, 1.0).unwrap();
        let g = FractionalGreen::new(law, 12, 1e-10).unwrap();
        let o = Site::origin(2);
        assert!(g.raw(&o).unwrap() > g.raw_half(&o).unwrap());
        assert!(g.value(&o).unwrap() > g.raw(&o).unwrap());
    }
}
