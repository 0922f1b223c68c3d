use glx_core::evt::{ks_distance, scaling_constants};
use glx_core::gaussian::{conditional_variances, FieldCovariance};
use glx_core::green::{finite_green, Precision, StationaryCovariance, WalkGreen};
use glx_core::lattice::{BoxDomain, Site};
use glx_core::linalg::DenseMatrix;
use glx_core::point_process::{exceedance_points, CellSpec};
use glx_core::special::norm_sf;
use glx_core::stein_chen::{
    bivariate_exceed_prob, build_exceedance_family, compute_bounds, exceed_prob, multivariate_tv_bound, B3Method, Event,
};
use glx_core::ModelSpec;
use proptest::prelude::*;

fn spd(n: usize, entries: &[f64]) -> DenseMatrix {
    let a = DenseMatrix::from_fn(n, |i, j| entries[(i * n + j) % entries.len()]);
    DenseMatrix::from_fn(n, |i, j| {
        let s: f64 = (0..n).map(|k| a.get(i, k) * a.get(j, k)).sum();
        s + if i == j { 0.5 } else { 0.0 }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decomposition_identity(
        n in 2usize..9,
        entries in proptest::collection::vec(-1.0f64..1.0, 81),
        mask in proptest::collection::vec(any::<bool>(), 9),
        alpha in 0usize..9,
    ) {
        let c = spd(n, &entries);
        let alpha = alpha % n;
        let k: Vec<usize> = (0..n).filter(|&i| i != alpha && mask[i]).collect();
        let q = Precision::Dense(c.cholesky().unwrap().inverse());
        let d = conditional_variances(&c, &k, alpha, Some(&q)).unwrap();
        prop_assert!(d.var_mu >= -1e-12 && d.var_psi >= 0.0);
        prop_assert!((d.var_mu + d.var_psi - d.variance).abs() <= 1e-10 * d.variance);
        prop_assert!((d.schur_var_psi - d.var_psi).abs() <= 1e-8 * d.variance.max(1.0));
    }

    #[test]
    fn level_is_increasing(z1 in -4.0f64..8.0, dz in 1e-3f64..3.0, g0 in 0.1f64..5.0, logn in 1.2f64..20.0) {
        let s = scaling_constants(g0, logn.exp()).unwrap();
        prop_assert!(s.level(z1 + dz) > s.level(z1));
        prop_assert_eq!(s.level(0.0), s.b);
    }

    #[test]
    fn mills_bracket_contains_tail(t in 1.0001f64..30.0, v in 0.1f64..10.0) {
        let u = t * v.sqrt();
        let e = exceed_prob(v, u).unwrap();
        let (lo, hi) = e.bracket.unwrap();
        prop_assert!(lo <= e.p * (1.0 + 1e-12) && e.p <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn joint_tail_below_savage(r in 0.0f64..0.95, u in 1.0f64..6.0, v1 in 0.5f64..2.0, v2 in 0.5f64..2.0) {
        let c = r * (v1 * v2).sqrt();
        let b = bivariate_exceed_prob(v1, v2, c, u).unwrap();
        if let Some(s) = b.savage {
            prop_assert!(b.p <= s * (1.0 + 1e-9));
        }
        prop_assert!(b.p <= norm_sf(u / v1.sqrt()).min(norm_sf(u / v2.sqrt())) * (1.0 + 1e-9));
    }

    #[test]
    fn interval_mass_is_additive(a in -3.0f64..3.0, w1 in 0.01f64..2.0, w2 in 0.01f64..2.0, sd in 0.2f64..3.0) {
        let whole = Event::new(vec![(a, a + w1 + w2)]).unwrap();
        let parts = Event::new(vec![(a, a + w1), (a + w1, a + w1 + w2)]).unwrap();
        prop_assert!((whole.prob(sd) - parts.prob(sd)).abs() < 1e-14);
    }

    #[test]
    fn ks_statistic_in_unit_interval(xs in proptest::collection::vec(-5.0f64..5.0, 1..50)) {
        let d = ks_distance(&xs, &|x| glx_core::special::norm_cdf(x)).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!(d >= 0.5 / xs.len() as f64);
    }

    #[test]
    fn counts_non_increasing_in_threshold(vals in proptest::collection::vec(-3.0f64..6.0, 16), x in -2.0f64..4.0, dx in 0.0f64..2.0) {
        let d = BoxDomain::new(2, 4, 0.0).unwrap();
        let s = scaling_constants(1.0, 16.0).unwrap();
        let pm = exceedance_points(&vals, &d, &s, &(0..16).collect::<Vec<_>>());
        let cell = |x: f64| CellSpec { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0], intervals: vec![(x, f64::INFINITY)] };
        prop_assert!(pm.count(&cell(x + dx)) <= pm.count(&cell(x)));
    }
}

#[test]
fn stationary_evaluator_is_symmetric() {
    let g = WalkGreen::new(&ModelSpec::Dgff { dim: 3 }, 1e-12).unwrap();
    let base = g.value(&Site::new(&[2, -1, 3]).unwrap()).unwrap();
    for c in [[-2, 1, 3], [3, 2, -1], [1, 3, 2], [-3, -2, -1]] {
        let v = StationaryCovariance::value(&g, &Site::new(&c).unwrap()).unwrap();
        assert_eq!(v, base);
    }
}

#[test]
fn refinement_never_decreases_partition_bound() {
    let m = ModelSpec::Massive { dim: 1, mass: 0.5 };
    let d = BoxDomain::new(1, 60, 0.1).unwrap();
    let f = FieldCovariance::finite(&m, &d, 1e-12).unwrap();
    let fam = build_exceedance_family(&f, 2.0, 3.0).unwrap();
    let r = compute_bounds(&fam, B3Method::default()).unwrap();
    let n = fam.len();
    let mut last = 0.0;
    for k in [1usize, 2, 4, 8] {
        let cells: Vec<Vec<usize>> = (0..k).map(|j| (j * n / k..(j + 1) * n / k).collect()).collect();
        let b = multivariate_tv_bound(&fam, &r, &cells).unwrap().joint_bound;
        assert!(b >= last);
        last = b;
    }
    let cap = 2.0 * (2.0 * r.b1 + 2.0 * r.b2 + r.b3);
    assert!(last <= cap * (1.0 + 1e-12));
}

#[test]
fn variances_monotone_in_nested_boxes() {
    for model in [ModelSpec::Massive { dim: 2, mass: 0.3 }, ModelSpec::Dgff { dim: 3 }] {
        let mut prev: Option<(usize, Vec<f64>)> = None;
        for n in [3usize, 5, 7] {
            let d = BoxDomain::new(model.dim(), n, 0.0).unwrap();
            let diag = finite_green(&model, &d, 1e-12).unwrap().diag();
            if let Some((pn, pd)) = &prev {
                let shift = ((n - pn) / 2) as i64;
                let small = BoxDomain::new(model.dim(), *pn, 0.0).unwrap();
                for (i, s) in small.sites().enumerate() {
                    let c: Vec<i64> = s.coords().iter().map(|x| x + shift).collect();
                    let j = d.index_of(&Site::new(&c).unwrap()).unwrap();
                    assert!(pd[i] <= diag[j] + 1e-13);
                }
            }
            prev = Some((n, diag));
        }
    }
}
