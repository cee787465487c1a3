#![allow(dead_code)]

use bs_spectra::symbols::{FourierMode, TrigSymbol};
use num_complex::Complex64;
use proptest::prelude::*;

/// Real trigonometric polynomials with frequencies `|m|, |n| ≤ degree`.
pub fn real_symbol(degree: i32) -> impl Strategy<Value = TrigSymbol> {
    prop::collection::vec(
        (-degree..=degree, -degree..=degree, -1.0f64..1.0, -1.0f64..1.0),
        1..8,
    )
    .prop_map(|modes| {
        TrigSymbol::symmetrized(
            modes
                .into_iter()
                .map(|(m, n, re, im)| FourierMode::new(m, n, Complex64::new(re, im))),
        )
    })
}

/// Harper symbol plus a small random perturbation that keeps the
/// minimum near `(½, ½)` nondegenerate.
pub fn perturbed_harper() -> impl Strategy<Value = TrigSymbol> {
    (-0.15f64..0.15, -0.15f64..0.15, 0.0f64..std::f64::consts::TAU).prop_map(|(a, b, ph)| {
        TrigSymbol::harper()
            .plus(&TrigSymbol::cosine(1, 1, a, ph))
            .plus(&TrigSymbol::cosine(2, -1, b, 0.0))
    })
}

/// `½∫r(θ)² dθ · nu` for a star-shaped sublevel set around `(q0, p0)`, with
/// each radius found by bisection on the ray.
pub fn polar_area(sym: &TrigSymbol, center: (f64, f64), energy: f64, nu: f64, rays: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..rays {
        let t = std::f64::consts::TAU * i as f64 / rays as f64;
        let (c, s) = (t.cos(), t.sin());
        let f = |r: f64| sym.eval(center.0 + r * c, center.1 + r * s) - energy;
        let (mut lo, mut hi) = (0.0, 0.5);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f(mid) <= 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let r = 0.5 * (lo + hi);
        acc += 0.5 * r * r;
    }
    nu * acc * std::f64::consts::TAU / rays as f64
}

pub fn max_abs_diff(a: &nalgebra::DMatrix<Complex64>, b: &nalgebra::DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
