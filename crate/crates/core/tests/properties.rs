use proptest::prelude::*;
use std::f64::consts::PI;

use shearlab::levelset::{thickened_measure, Cutoff, LevelGeometry, Span};
use shearlab::operator::{assemble, norm_h, numerical_range_check, truncate_domain, TruncationPolicy};
use shearlab::par::Exec;
use shearlab::profiles::ShearProfile;
use shearlab::resolvent::{resolvent_scan, sigma_min_dense, PsiSearch};
use shearlab::rng::{complex_gaussian, seeded, smooth_bumps};
use shearlab::semigroup::CnPropagator;
use shearlab::sweep::rate_target;
use shearlab::tridiag::{Tridiagonal, C64};

fn profile(i: usize) -> (ShearProfile, Span) {
    match i % 4 {
        0 => (ShearProfile::couette(), Span::new(-2.0, 2.0)),
        1 => (ShearProfile::poiseuille(), Span::new(-1.0, 1.0)),
        2 => (ShearProfile::kolmogorov(), Span::new(0.0, 2.0 * PI)),
        _ => (ShearProfile::monomial(3), Span::new(-1.0, 1.0)),
    }
}

fn random_vector(seed: u64, nodes: &[f64]) -> Vec<C64> {
    let mut r = seeded(seed);
    if seed % 2 == 0 {
        complex_gaussian(&mut r, nodes.len())
    } else {
        smooth_bumps(&mut r, nodes)
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn operator_is_accretive(i in 0usize..4, lnu in -3.0f64..0.0, k in 0.2f64..3.0, seed in any::<u64>()) {
        let (p, _) = profile(i);
        let nu = 10f64.powf(lnu);
        let grid = truncate_domain(&p, nu, k, &TruncationPolicy::default()).unwrap();
        let op = assemble(&p, &grid, nu, k, 0.0).unwrap();
        let g = random_vector(seed, &grid.nodes());
        let hg = op.apply(&g).unwrap();
        let q = op.inner(&hg, &g);
        let g2 = op.norm(&g).powi(2);
        prop_assert!(q.re >= -1e-12 * g2, "Re<Hg,g> = {}", q.re);
        let res = numerical_range_check(&op, &g).unwrap();
        prop_assert!(res.re_residual < 1e-9 && res.im_residual < 1e-9, "{res:?}");
    }

    #[test]
    fn crank_nicolson_never_grows(i in 0usize..4, lnu in -3.0f64..0.0, k in 0.2f64..3.0, ldt in -3.0f64..0.0, seed in any::<u64>()) {
        let (p, _) = profile(i);
        let nu = 10f64.powf(lnu);
        let grid = truncate_domain(&p, nu, k, &TruncationPolicy::default()).unwrap();
        let op = assemble(&p, &grid, nu, k, 0.3).unwrap();
        let cn = CnPropagator::new(&op, 10f64.powf(ldt)).unwrap();
        let mut g = random_vector(seed, &grid.nodes());
        let mut prev = norm_h(&g, grid.h);
        let mut scratch = Vec::new();
        for _ in 0..20 {
            cn.step(&mut g, &mut scratch);
            let now = norm_h(&g, grid.h);
            prop_assert!(now <= prev * (1.0 + 1e-12), "{now} > {prev}");
            prev = now;
        }
    }

    #[test]
    fn cutoff_is_bounded_and_odd_about_level(i in 0usize..4, t in 0.05f64..0.95, delta in 0.01f64..0.3, s in 0.0f64..1.0) {
        let (p, w) = profile(i);
        let m = p.m();
        let (vlo, vhi) = range_on(&p, w);
        let lambda = vlo + t * (vhi - vlo);
        let chi = Cutoff::new(&p, lambda, delta, m, w).unwrap();
        let y = w.lo + s * w.len();
        let c = chi.eval(y);
        prop_assert!((-1.0..=1.0).contains(&c));
        let diff = p.value(y) - lambda;
        prop_assert!(c == 0.0 || c.signum() == diff.signum());
        if !chi.in_neighborhood(y) {
            prop_assert_eq!(c.abs(), 1.0);
        }
        if diff.abs() < delta.powi(m as i32) {
            prop_assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn measure_grows_with_delta(i in 0usize..4, t in 0.0f64..1.0, d1 in 0.005f64..0.5, d2 in 0.005f64..0.5) {
        let (p, w) = profile(i);
        let (vlo, vhi) = range_on(&p, w);
        let lambda = vlo - 0.2 + t * (vhi - vlo + 0.4);
        let (a, b) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let ma = thickened_measure(&p, lambda, a, p.m(), w).unwrap().measure;
        let mb = thickened_measure(&p, lambda, b, p.m(), w).unwrap().measure;
        prop_assert!(ma <= mb + 1e-12, "{ma} > {mb}");
        prop_assert!(mb <= w.len() + 1e-12);
    }

    #[test]
    fn level_points_bounded_by_pieces(i in 0usize..4, t in -0.1f64..1.1) {
        let (p, w) = profile(i);
        let (vlo, vhi) = range_on(&p, w);
        let lambda = vlo + t * (vhi - vlo);
        let geo = LevelGeometry::new(&p, w, 0.0).unwrap();
        let pts = geo.level_points(lambda);
        prop_assert!(pts.len() <= geo.window_pieces().len());
        for y in pts {
            prop_assert!(w.contains(y));
            prop_assert!((p.value(y) - lambda).abs() < 1e-9);
        }
    }

    #[test]
    fn sigma_min_scales(n in 3usize..40, scale in 0.01f64..100.0, seed in any::<u64>()) {
        let mut r = seeded(seed);
        let a = Tridiagonal::new(complex_gaussian(&mut r, n - 1), complex_gaussian(&mut r, n), complex_gaussian(&mut r, n - 1)).unwrap();
        let s = sigma_min_dense(&a);
        let ss = sigma_min_dense(&a.scaled(scale));
        prop_assert!((ss - scale * s).abs() <= 1e-10 * scale * (s + 1e-300).max(1e-8), "{ss} vs {}", scale * s);
    }

    #[test]
    fn rate_target_is_continuous_across_regimes(k in 0.01f64..10.0, m in 1usize..5, sign in prop::bool::ANY) {
        let k = if sign { k } else { -k };
        let nu = k.abs();
        let at = rate_target(nu, k, m).unwrap();
        prop_assert!((at - k.abs()).abs() <= 1e-12 * k.abs());
        let below = rate_target(nu * (1.0 - 1e-9), k, m).unwrap();
        let above = rate_target(nu * (1.0 + 1e-9), k, m).unwrap();
        prop_assert!((below - at).abs() <= 1e-8 * at);
        prop_assert!((above - at).abs() <= 1e-8 * at);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn parallel_scan_matches_sequential(i in 0usize..4, lnu in -3.0f64..-1.0, k in 0.5f64..2.0) {
        let (p, _) = profile(i);
        let nu = 10f64.powf(lnu);
        let grid = truncate_domain(&p, nu, k, &TruncationPolicy::default()).unwrap();
        let op = assemble(&p, &grid, nu, k, 0.0).unwrap();
        let lambdas: Vec<f64> = (0..16).map(|j| -1.0 + 0.125 * j as f64).collect();
        let par = resolvent_scan(&op, &lambdas, &PsiSearch { exec: Exec::Auto, ..PsiSearch::default() });
        let seq = resolvent_scan(&op, &lambdas, &PsiSearch { exec: Exec::Sequential, ..PsiSearch::default() });
        prop_assert_eq!(par, seq);
    }
}

fn range_on(p: &ShearProfile, w: Span) -> (f64, f64) {
    (0..=2000)
        .map(|j| p.value(w.lo + w.len() * j as f64 / 2000.0))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}
