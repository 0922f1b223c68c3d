//! Lattice sites, boxes `[0, n-1]^d`, bulk selection, Euclidean balls and
//! outer boundaries.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// A point of `Z^d`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Site {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Site {
    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!("site dimension {} outside 1..={MAX_DIM}", coords.len())));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Site { dim: coords.len() as u8, coords: c })
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Site { dim: dim as u8, coords: [0; MAX_DIM] }
    }

    /// `k e_1`.
    pub fn axis(dim: usize, k: i64) -> Self {
        let mut s = Site::origin(dim);
        s.coords[0] = k;
        s
    }

    /// `(k, k, ..., k)`.
    pub fn diagonal(dim: usize, k: i64) -> Self {
        let mut s = Site::origin(dim);
        s.coords[..dim].iter_mut().for_each(|c| *c = k);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn sub(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = *self;
        for i in 0..self.dim() {
            s.coords[i] -= other.coords[i];
        }
        s
    }

    pub fn add(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = *self;
        for i in 0..self.dim() {
            s.coords[i] += other.coords[i];
        }
        s
    }

    pub fn norm2(&self) -> i64 {
        self.coords().iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm2() as f64)
    }

    pub fn dist2(&self, other: &Site) -> i64 {
        self.sub(other).norm2()
    }

    pub fn l1(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }

    /// Representative under the hyperoctahedral group: absolute values sorted
    /// ascending. Isotropic kernels are functions of this key.
    pub fn canonical(&self) -> Site {
        let mut s = *self;
        let d = self.dim();
        s.coords[..d].iter_mut().for_each(|c| *c = c.abs());
        s.coords[..d].sort_unstable();
        s
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

/// The box `V_N = [0, n-1]^d` together with the bulk fraction `delta`.
///
/// Sites are indexed row-major with the first coordinate varying slowest.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxDomain {
    dim: usize,
    side: usize,
    delta: f64,
    volume: usize,
}

impl BoxDomain {
    pub fn new(dim: usize, side: usize, delta: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        if side == 0 {
            return Err(Error::InvalidParameter("box side must be positive".into()));
        }
        if !(0.0..0.5).contains(&delta) {
            return Err(Error::InvalidParameter(format!("bulk fraction {delta} outside [0, 1/2)")));
        }
        let mut volume: usize = 1;
        for _ in 0..dim {
            volume = volume
                .checked_mul(side)
                .filter(|v| *v <= i64::MAX as usize)
                .ok_or_else(|| Error::Size(format!("{side}^{dim} sites exceed the index capacity")))?;
        }
        Ok(BoxDomain { dim, side, delta, volume })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        BoxDomain::new(self.dim, self.side, delta)
    }

    /// Number of sites `N = n^d`.
    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn contains(&self, s: &Site) -> bool {
        s.dim() == self.dim && s.coords().iter().all(|&c| c >= 0 && (c as usize) < self.side)
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        Some(s.coords().iter().fold(0usize, |acc, &c| acc * self.side + c as usize))
    }

    pub fn site(&self, mut index: usize) -> Site {
        debug_assert!(index < self.volume);
        let mut s = Site::origin(self.dim);
        for i in (0..self.dim).rev() {
            s.coords[i] = (index % self.side) as i64;
            index /= self.side;
        }
        s
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.volume).map(move |i| self.site(i))
    }

    /// Lattice distance from `s` to the complement of the box:
    /// `min_i min(s_i + 1, n - s_i)`.
    pub fn exterior_distance(&self, s: &Site) -> i64 {
        let n = self.side as i64;
        s.coords().iter().map(|&c| (c + 1).min(n - c)).min().unwrap_or(0)
    }

    /// Whether `s` lies in the bulk: its distance to the exterior exceeds
    /// `delta * N^{1/d} = delta * n`.
    pub fn in_bulk(&self, s: &Site) -> bool {
        self.contains(s) && self.exterior_distance(s) as f64 > self.delta * self.side as f64
    }

    pub fn bulk_indices(&self) -> Vec<usize> {
        (0..self.volume).filter(|&i| self.in_bulk(&self.site(i))).collect()
    }

    pub fn bulk_sites(&self) -> Vec<Site> {
        self.sites().filter(|s| self.in_bulk(s)).collect()
    }

    /// Sites of the box within Euclidean distance `radius` of `center`.
    pub fn ball_indices(&self, center: &Site, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if radius < 0.0 {
            return out;
        }
        let r = libm::floor(radius) as i64;
        let r2 = radius * radius;
        let d = self.dim;
        let n = self.side as i64;
        let lo: Vec<i64> = center.coords().iter().map(|&c| (c - r).max(0)).collect();
        let hi: Vec<i64> = center.coords().iter().map(|&c| (c + r).min(n - 1)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return out;
        }
        let mut cur = lo.clone();
        loop {
            let s = Site::new(&cur).expect("dimension checked");
            if s.dist2(center) as f64 <= r2 {
                out.push(self.index_of(&s).expect("inside box"));
            }
            // odometer increment, last coordinate fastest keeps indices sorted
            let mut i = d;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if cur[i] < hi[i] {
                    cur[i] += 1;
                    break;
                }
                cur[i] = lo[i];
            }
        }
    }

    pub fn ball_sites(&self, center: &Site, radius: f64) -> Vec<Site> {
        self.ball_indices(center, radius).into_iter().map(|i| self.site(i)).collect()
    }

    /// Sites outside the box within Euclidean distance 2 of it, in
    /// lexicographic order.
    pub fn outer_boundary2(&self) -> Vec<Site> {
        let n = self.side as i64;
        let d = self.dim;
        let mut out = Vec::new();
        let mut cur = alloc::vec![-2i64; d];
        loop {
            let dist2: i64 = cur
                .iter()
                .map(|&c| {
                    let e = (-c).max(c - (n - 1)).max(0);
                    e * e
                })
                .sum();
            if dist2 > 0 && dist2 <= 4 {
                out.push(Site::new(&cur).expect("dimension checked"));
            }
            let mut i = d;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if cur[i] < n + 1 {
                    cur[i] += 1;
                    break;
                }
                cur[i] = -2;
            }
        }
    }

    /// Offsets between sites of the box, one per hyperoctahedral class:
    /// canonical keys with every coordinate below `n`.
    pub fn canonical_offsets(&self) -> Vec<Site> {
        canonical_offsets_upto(self.dim, self.side as i64 - 1)
    }

    /// The hyperoctahedral symmetry taking `s` to its fundamental-domain
    /// representative (each coordinate folded to `min(c, n-1-c)` and then
    /// sorted ascending).
    pub fn symmetry_of(&self, s: &Site) -> BoxSymmetry {
        let n = self.side as i64;
        let d = self.dim;
        let mut flip = [false; MAX_DIM];
        let mut folded = [0i64; MAX_DIM];
        for i in 0..d {
            let c = s.coords[i];
            if n - 1 - c < c {
                flip[i] = true;
                folded[i] = n - 1 - c;
            } else {
                folded[i] = c;
            }
        }
        let mut perm = [0usize; MAX_DIM];
        for (i, p) in perm.iter_mut().enumerate().take(d) {
            *p = i;
        }
        perm[..d].sort_by_key(|&i| (folded[i], i));
        BoxSymmetry { dim: d, side: self.side as i64, flip, perm }
    }
}

/// A reflection-then-permutation symmetry of a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxSymmetry {
    dim: usize,
    side: i64,
    flip: [bool; MAX_DIM],
    /// output coordinate `j` is input coordinate `perm[j]`
    perm: [usize; MAX_DIM],
}

impl BoxSymmetry {
    pub fn apply(&self, s: &Site) -> Site {
        let mut out = Site::origin(self.dim);
        for j in 0..self.dim {
            let i = self.perm[j];
            let c = s.coords[i];
            out.coords[j] = if self.flip[i] { self.side - 1 - c } else { c };
        }
        out
    }
}

/// All canonical offsets (sorted absolute coordinates) with entries `<= m`.
pub fn canonical_offsets_upto(dim: usize, m: i64) -> Vec<Site> {
    let mut out = Vec::new();
    let mut cur = alloc::vec![0i64; dim];
    loop {
        out.push(Site::new(&cur).expect("dimension checked"));
        // next non-decreasing sequence
        let mut i = dim;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < m {
                cur[i] += 1;
                let v = cur[i];
                for c in cur.iter_mut().skip(i + 1) {
                    *c = v;
                }
                break;
            }
        }
    }
}

/// All lattice offsets with Euclidean norm at most `radius`.
pub fn ball_offsets(dim: usize, radius: f64) -> Vec<Site> {
    let r = libm::floor(radius.max(0.0)) as i64;
    let n = (2 * r + 1) as usize;
    let dom = BoxDomain::new(dim, n, 0.0).expect("ball box");
    let center = Site::diagonal(dim, r);
    dom.ball_sites(&center, radius).into_iter().map(|s| s.sub(&center)).collect()
}

/// Nearest-neighbour offsets `+-e_i`.
pub fn unit_offsets(dim: usize) -> Vec<Site> {
    let mut v = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        for sgn in [-1i64, 1] {
            let mut s = Site::origin(dim);
            s.coords[i] = sgn;
            v.push(s);
        }
    }
    v
}
