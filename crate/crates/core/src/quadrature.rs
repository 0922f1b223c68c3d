//! Gauss rules and adaptive Gauss-Kronrod integration.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if libm::fabs(dz) < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Hermite nodes and weights for the weight `e^{-x^2}`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    let pim4 = libm::pow(PI, -0.25);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => libm::sqrt(2.0 * nf + 1.0) - 1.855_75 * libm::pow(2.0 * nf + 1.0, -1.0 / 6.0),
            1 => z - 1.14 * libm::pow(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * libm::sqrt(2.0 / jf) * p2 - libm::sqrt((jf - 1.0) / jf) * p3;
            }
            pp = libm::sqrt(2.0 * nf) * p2;
            let dz = p1 / pp;
            z -= dz;
            if libm::fabs(dz) < 1e-15 * libm::fabs(z).max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// `E f(s Z)` for `Z` standard normal by `n`-point Gauss-Hermite.
pub fn gauss_hermite_expectation(f: impl Fn(f64) -> f64, s: f64, n: usize) -> f64 {
    let (x, w) = gauss_hermite(n);
    let c = core::f64::consts::SQRT_2 * s;
    let sum: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * f(c * xi)).sum();
    sum / libm::sqrt(PI)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        rk += WGK[j] * s;
        if j % 2 == 1 {
            rg += WG[j / 2] * s;
        }
    }
    (rk * h, libm::fabs((rk - rg) * h))
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive Gauss-Kronrod 7/15 on `[a, b]` with global error control.
pub fn adaptive_gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_depth: u32) -> Integral {
    if a == b {
        return Integral { value: 0.0, error: 0.0, converged: true };
    }
    let (v, e) = gk15(f, a, b);
    let mut segs: Vec<(f64, f64, f64, f64, u32)> = vec![(a, b, v, e, 0)];
    let mut total = v;
    let mut err = e;
    let max_segments = 4096;
    while err > abs_tol.max(rel_tol * libm::fabs(total)) {
        // split the segment with the largest error
        let (idx, _) = segs.iter().enumerate().fold((0, -1.0), |acc, (i, s)| if s.3 > acc.1 { (i, s.3) } else { acc });
        let (sa, sb, sv, se, depth) = segs[idx];
        if depth >= max_depth || segs.len() >= max_segments {
            return Integral { value: total, error: err, converged: false };
        }
        let mid = 0.5 * (sa + sb);
        let (v1, e1) = gk15(f, sa, mid);
        let (v2, e2) = gk15(f, mid, sb);
        total += v1 + v2 - sv;
        err += e1 + e2 - se;
        segs[idx] = (sa, mid, v1, e1, depth + 1);
        segs.push((mid, sb, v2, e2, depth + 1));
    }
    // recompute sums to shed accumulated rounding
    let value = segs.iter().map(|s| s.2).sum();
    let error = segs.iter().map(|s| s.3).sum();
    Integral { value, error, converged: true }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 6, 12, 20, 32, 64] {
            let (x, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let got: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(p as i32)).sum();
                let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((got - want).abs() < 1e-13, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn hermite_moments() {
        for n in [4usize, 16, 64] {
            // E Z^{2k} = (2k-1)!!
            let mut df = 1.0;
            for k in 0..n.min(10) {
                if k > 0 {
                    df *= (2 * k - 1) as f64;
                }
                let got = gauss_hermite_expectation(|z| z.powi(2 * k as i32), 1.0, n);
                if 2 * k < 2 * n {
                    assert!((got - df).abs() < 1e-10 * df, "n={n} k={k} got {got}");
                }
            }
        }
    }

    #[test]
    fn kronrod_polynomial_and_smooth() {
        let r = adaptive_gk15(&|x: f64| x.powi(20), 0.0, 1.0, 0.0, 1e-14, 30);
        assert!((r.value - 1.0 / 21.0).abs() < 1e-15);
        let r = adaptive_gk15(&|x: f64| (-x * x).exp(), -10.0, 10.0, 0.0, 1e-13, 30);
        assert!((r.value - PI.sqrt()).abs() < 1e-12);
        let r = adaptive_gk15(&|x: f64| x.sqrt(), 0.0, 1.0, 0.0, 1e-10, 40);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10);
    }
}
