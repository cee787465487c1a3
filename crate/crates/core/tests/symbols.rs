mod common;

use std::f64::consts::PI;

use bs_spectra::symbols::*;
use bs_spectra::Execution;
use common::{perturbed_harper, polar_area, real_symbol};
use proptest::prelude::*;

fn harper_geometry() -> LevelGeometry {
    LevelGeometry::new(&TrigSymbol::harper(), SymplecticNormalization::torus())
}

#[test]
fn harper_point_values() {
    let h = TrigSymbol::harper();
    assert!((h.eval(0.5, 0.5) + 4.0).abs() < 1e-14);
    assert!((h.eval(0.0, 0.0) - 4.0).abs() < 1e-14);
    assert!(h.eval(0.25, 0.25).abs() < 1e-14);
}

#[test]
fn harper_hessian_matches_finite_differences() {
    let h = TrigSymbol::harper();
    let an = h.hessian(0.5, 0.5);
    let e = 1e-4;
    let f = |q: f64, p: f64| h.eval(q, p);
    let fqq = (f(0.5 + e, 0.5) - 2.0 * f(0.5, 0.5) + f(0.5 - e, 0.5)) / (e * e);
    let fpp = (f(0.5, 0.5 + e) - 2.0 * f(0.5, 0.5) + f(0.5, 0.5 - e)) / (e * e);
    let eight_pi2 = 8.0 * PI * PI;
    assert!((an[0][0] - eight_pi2).abs() < 1e-10);
    assert!((fqq - an[0][0]).abs() / eight_pi2 < 1e-5);
    assert!((fpp - an[1][1]).abs() / eight_pi2 < 1e-5);
    assert!(an[0][1].abs() < 1e-12);
}

#[test]
fn minimum_and_slope() {
    let m = find_minimum(&TrigSymbol::harper());
    assert!((m.q - 0.5).abs() < 1e-12 && (m.p - 0.5).abs() < 1e-12);
    assert!(m.is_certified());
    let c = action_derivative_at_min(&m, SymplecticNormalization::torus()).unwrap();
    assert!((c - 1.0).abs() < 1e-12);
}

#[test]
fn degenerate_minimum_is_refused() {
    let m = find_minimum(&TrigSymbol::constant(3.0));
    assert!(!m.nondegenerate);
    assert!(action_derivative_at_min(&m, SymplecticNormalization::torus()).is_err());
}

#[test]
fn perturbed_minimum_gradient_certificate() {
    let s = TrigSymbol::harper().plus(&TrigSymbol::cosine(1, 1, 0.2, 0.0));
    let m = find_minimum(&s);
    assert!(m.gradient_norm < 1e-10);
    let g = s.gradient(m.q, m.p);
    assert!(g[0].hypot(g[1]) < 1e-10);
}

#[test]
fn harper_separatrix_is_zero() {
    let g = harper_geometry();
    assert!(g.separatrix().abs() < 1e-10);
}

#[test]
fn area_matches_polar_oracle() {
    let g = harper_geometry();
    let h = TrigSymbol::harper();
    for e in [-3.999, -3.5, -2.0, -1.0] {
        let exact = polar_area(&h, (0.5, 0.5), e, 4.0 * PI, 8192);
        let a = g.sublevel_area(e, AreaOptions::with_resolution(1024)).unwrap();
        assert!(((a - exact) / exact).abs() < 1e-6, "E={e}: {a} vs {exact}");
    }
}

#[test]
fn small_well_area_is_epsilon() {
    let g = harper_geometry();
    let eps = 1e-3;
    let a = g.sublevel_area(-4.0 + eps, AreaOptions::with_resolution(512)).unwrap();
    assert!(((a - eps) / eps).abs() < 0.02);
}

#[test]
fn area_at_minus_two_against_cell_count() {
    let h = TrigSymbol::harper();
    let a = harper_geometry()
        .sublevel_area(-2.0, AreaOptions::with_resolution(512))
        .unwrap();
    assert!(a / 2.0 > 1.0 && a / 2.0 < 1.35);
    // brute-force node count on a 4096² grid
    let n = 4096;
    let inside = sample_grid(&h, n, Execution::default())
        .into_iter()
        .filter(|&v| v <= -2.0)
        .count();
    let count_area = 4.0 * PI * inside as f64 / (n * n) as f64;
    assert!(((a - count_area) / a).abs() < 1e-3, "{a} vs {count_area}");
}

#[test]
fn whole_torus_and_bottom() {
    let g = harper_geometry();
    let full = g.sublevel_area(4.0, AreaOptions::with_resolution(128)).unwrap();
    assert!((full - 4.0 * PI).abs() < 1e-9);
    assert_eq!(g.sublevel_area(-4.0, AreaOptions::default()).unwrap(), 0.0);
    assert!(g.sublevel_area(-4.5, AreaOptions::default()).is_err());
}

#[test]
fn area_is_strictly_increasing() {
    let g = harper_geometry();
    let opts = AreaOptions::with_resolution(256);
    let mut prev = 0.0;
    for i in 1..=50 {
        let e = -4.0 + 4.0 * i as f64 / 51.0;
        let a = g.sublevel_area(e, opts).unwrap();
        assert!(a > prev, "E={e}");
        prev = a;
    }
}

#[test]
fn slope_agrees_with_quadrature_secant() {
    let g = harper_geometry();
    let c = g.action_derivative_at_min().unwrap();
    let opts = AreaOptions::with_resolution(512);
    let a1 = g.sublevel_area(-4.0 + 1e-3, opts).unwrap();
    let a2 = g.sublevel_area(-4.0 + 5e-4, opts).unwrap();
    let secant = (a1 - a2) / 5e-4;
    assert!(((secant - c) / c).abs() < 0.01);
}

#[test]
fn sequential_and_parallel_areas_agree_bitwise() {
    let g = harper_geometry();
    let e = -2.7;
    let a = g
        .sublevel_area(e, AreaOptions { exec: Execution::Sequential, ..AreaOptions::with_resolution(256) })
        .unwrap();
    let b = g
        .sublevel_area(e, AreaOptions { exec: Execution::Parallel, ..AreaOptions::with_resolution(256) })
        .unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn file_format_rejects_unbalanced_modes() {
    assert!(TrigSymbol::parse("1 0 1 0\n").is_err());
    assert!(TrigSymbol::parse("1 0 1 0\n-1 0 1 0\n").is_ok());
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/harper.sym")).unwrap();
    assert_eq!(TrigSymbol::parse(&text).unwrap(), TrigSymbol::harper());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn evaluation_is_real_and_periodic(sym in real_symbol(3), q in -2.0f64..2.0, p in -2.0f64..2.0) {
        let z = sym.eval_complex(q, p);
        prop_assert!(z.im.abs() <= 1e-13);
        let v = sym.eval(q, p);
        for (dq, dp) in [(1.0, 0.0), (0.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
            prop_assert!((sym.eval(q + dq, p + dp) - v).abs() <= 1e-13 * (1.0 + sym.max_coeff()) * 10.0);
        }
    }

    #[test]
    fn hessian_matches_finite_differences(sym in real_symbol(3), q in 0.0f64..1.0, p in 0.0f64..1.0) {
        let h = sym.hessian(q, p);
        let e = 1e-4;
        let f = |a: f64, b: f64| sym.eval(a, b);
        let fqq = (f(q + e, p) - 2.0 * f(q, p) + f(q - e, p)) / (e * e);
        let fpp = (f(q, p + e) - 2.0 * f(q, p) + f(q, p - e)) / (e * e);
        let fqp = (f(q + e, p + e) - f(q + e, p - e) - f(q - e, p + e) + f(q - e, p - e)) / (4.0 * e * e);
        // scale: the largest possible second derivative
        let scale = 4.0 * PI * PI * 9.0 * sym.modes().iter().map(|m| m.coeff.norm()).sum::<f64>();
        prop_assert!((fqq - h[0][0]).abs() <= 1e-5 * scale);
        prop_assert!((fpp - h[1][1]).abs() <= 1e-5 * scale);
        prop_assert!((fqp - h[0][1]).abs() <= 1e-5 * scale);
        prop_assert!((h[0][1] - h[1][0]).abs() <= 1e-12 * scale);
    }

    #[test]
    fn symbol_text_round_trips(sym in real_symbol(3)) {
        let back = TrigSymbol::parse(&sym.to_text()).unwrap();
        for (q, p) in [(0.1, 0.7), (0.33, 0.25)] {
            prop_assert!((back.eval(q, p) - sym.eval(q, p)).abs() < 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn perturbed_wells_have_consistent_slope(sym in perturbed_harper()) {
        let g = LevelGeometry::new(&sym, SymplecticNormalization::torus());
        prop_assume!(g.minimum().is_certified());
        let c = g.action_derivative_at_min().unwrap();
        let e0 = g.minimum().value;
        let opts = AreaOptions::with_resolution(256);
        let d = 1e-3;
        let a = g.sublevel_area(e0 + d, opts).unwrap();
        prop_assert!(((a / d - c) / c).abs() < 0.01);
    }
}
