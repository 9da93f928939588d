use mixlab::field::{apply_poly, transform, Direction, Field, Polynomial, TorusGrid};
use mixlab::haar::{sample_kick, sample_scalar_path, ScalarNoiseConfig, XiDensity};
use mixlab::mixing::bl_distance_1d;
use mixlab::saturation::{ladder, ModeSet};
use rustfft::num_complex::Complex64;
use proptest::prelude::*;

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

/// Exact BL distance for samples on the lattice `Z/8`: an optimal test
/// function may be taken with values in `{-1, -7/8, …, 1}`, so a dynamic
/// programme over those 17 values is exact.
fn bl_lattice_oracle(a: &[i32], b: &[i32]) -> f64 {
    let mut w = std::collections::BTreeMap::<i32, f64>::new();
    for &x in a {
        *w.entry(x).or_default() += 1.0 / a.len() as f64;
    }
    for &x in b {
        *w.entry(x).or_default() -= 1.0 / b.len() as f64;
    }
    let pts: Vec<(i32, f64)> = w.into_iter().collect();
    let mut best: Vec<f64> = (-8..=8).map(|v| pts[0].1 * v as f64 / 8.0).collect();
    for i in 1..pts.len() {
        let gap = pts[i].0 - pts[i - 1].0;
        best = (-8..=8i32)
            .map(|v| {
                let reach = (-8..=8i32)
                    .filter(|u| (u - v).abs() <= gap)
                    .map(|u| best[(u + 8) as usize])
                    .fold(f64::NEG_INFINITY, f64::max);
                reach + pts[i].1 * v as f64 / 8.0
            })
            .collect();
    }
    best.into_iter().fold(f64::NEG_INFINITY, f64::max).max(0.0)
}

fn lattice_sample() -> impl Strategy<Value = Vec<i32>> {
    prop::collection::vec(-24i32..=24, 1..7)
}

fn scaled(xs: &[i32]) -> Vec<f64> {
    xs.iter().map(|&x| x as f64 / 8.0).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_1d(v in values(16)) {
        let g = TorusGrid::new(1, 16).unwrap();
        let data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let hat = transform(&g, &data, Direction::Forward).unwrap();
        let lhs: f64 = v.iter().map(|x| x * x).sum::<f64>() / 16.0;
        let rhs: f64 = hat.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        let back = transform(&g, &hat, Direction::Inverse).unwrap();
        for (a, b) in back.iter().zip(&data) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval_2d_matches_l2_norm(v in values(64)) {
        let g = TorusGrid::new(2, 8).unwrap();
        let u = Field::new(g, v).unwrap();
        let spec = u.to_spectrum();
        let direct = u.l2_norm();
        let spectral = (g.volume() * spec.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt();
        prop_assert!((direct - spectral).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn square_matches_brute_force_convolution(v in values(16)) {
        let g = TorusGrid::new(1, 16).unwrap();
        let u = Field::new(g, v).unwrap().band_limited();
        let sq = apply_poly(&Polynomial::general(vec![0.0, 0.0, 1.0]).unwrap(), &u).unwrap().to_spectrum();
        let hat = u.to_spectrum();
        for k in -7i64..=7 {
            let mut c = Complex64::new(0.0, 0.0);
            for a in -7i64..=7 {
                let b = k - a;
                if b.abs() <= 7 {
                    c += hat.coeff(&[a]) * hat.coeff(&[b]);
                }
            }
            prop_assert!((sq.coeff(&[k]) - c).norm() < 1e-12, "mode {k}");
        }
        prop_assert!(sq.coeff(&[8]).norm() < 1e-12);
    }

    #[test]
    fn laplacian_is_symmetric_and_nonpositive(a in values(64), b in values(64)) {
        let g = TorusGrid::new(2, 8).unwrap();
        let (u, w) = (Field::new(g, a).unwrap().band_limited(), Field::new(g, b).unwrap().band_limited());
        let (lu, lw) = (u.laplacian(), w.laplacian());
        let (x, y) = (lu.inner(&w), u.inner(&lw));
        prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        prop_assert!(lu.inner(&u) <= 1e-10);
    }

    #[test]
    fn ladder_grows_monotonically_and_stays_symmetric(
        modes in prop::collection::vec((-3i64..=3, -3i64..=3), 1..4),
        k in 0usize..4,
    ) {
        let set = ModeSet::new(2, modes.into_iter().map(|(a, b)| vec![a, b])).unwrap();
        let (lo, hi) = (ladder(&set, k), ladder(&set, k + 1));
        prop_assert!(lo.is_subset(&hi));
        prop_assert!(hi.is_symmetric());
        prop_assert!(set.symmetrized().is_subset(&lo));
    }

    #[test]
    fn kicks_are_deterministic_and_bounded(seed in any::<u64>(), t in 0.0f64..1.0) {
        let cfg = ScalarNoiseConfig::new(1.0, 2.0, 5, XiDensity::Parabolic).unwrap();
        let a = sample_kick(&cfg, &[1.0, 0.5], seed).unwrap();
        let b = sample_kick(&cfg, &[1.0, 0.5], seed).unwrap();
        prop_assert_eq!(a.eval(t).unwrap(), b.eval(t).unwrap());
        let path = sample_scalar_path(&cfg, seed);
        prop_assert!(path.sup_norm() <= cfg.sup_bound() + 1e-12);
        prop_assert!(path.eval(t).unwrap().abs() <= path.sup_norm() + 1e-12);
    }

    #[test]
    fn bl_matches_lattice_oracle(a in lattice_sample(), b in lattice_sample()) {
        let fast = bl_distance_1d(&scaled(&a), &scaled(&b));
        let slow = bl_lattice_oracle(&a, &b);
        prop_assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn bl_is_a_bounded_pseudometric(a in lattice_sample(), b in lattice_sample(), c in lattice_sample()) {
        let (a, b, c) = (scaled(&a), scaled(&b), scaled(&c));
        let ab = bl_distance_1d(&a, &b);
        prop_assert!((ab - bl_distance_1d(&b, &a)).abs() < 1e-12);
        prop_assert!(bl_distance_1d(&a, &a) < 1e-12);
        prop_assert!((0.0..=2.0).contains(&ab));
        prop_assert!(ab <= bl_distance_1d(&a, &c) + bl_distance_1d(&c, &b) + 1e-12);
    }
}
