use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bs_spectra::bohr_sommerfeld::{low_spectra, ActionProfile, ProfileOptions};
use bs_spectra::symbols::{AreaOptions, LevelGeometry, SymplecticNormalization, TrigSymbol};
use bs_spectra::theta::ThetaBasis;
use bs_spectra::Execution;
use num_complex::Complex64;

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sublevel_area(c: &mut Criterion) {
    let sym = TrigSymbol::harper();
    let geometry = LevelGeometry::new(&sym, SymplecticNormalization::torus());
    let mut g = c.benchmark_group("sublevel_area_res1024");
    for (name, exec) in POLICIES {
        let opts = AreaOptions {
            exec,
            ..AreaOptions::with_resolution(1024)
        };
        g.bench_function(name, |b| b.iter(|| geometry.sublevel_area(black_box(-2.5), opts).unwrap()));
    }
    g.finish();
}

fn action_profile(c: &mut Criterion) {
    let sym = TrigSymbol::harper();
    let mut g = c.benchmark_group("action_profile_grid32_res128");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        let opts = ProfileOptions {
            grid_size: 32,
            area_resolution: 128,
            exec,
            ..ProfileOptions::default()
        };
        g.bench_function(name, |b| {
            b.iter(|| ActionProfile::build(&sym, SymplecticNormalization::torus(), opts).unwrap())
        });
    }
    g.finish();
}

fn k_sweep(c: &mut Criterion) {
    let sym = TrigSymbol::harper();
    let ks = [25, 50, 100];
    let mut g = c.benchmark_group("k_sweep_25_50_100");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(name, |b| b.iter(|| low_spectra(&sym, black_box(&ks), 10, exec).unwrap()));
    }
    g.finish();
}

fn theta_field(c: &mut Criterion) {
    let basis = ThetaBasis::build(50, 256).unwrap();
    let v: Vec<Complex64> = (0..basis.dim())
        .map(|i| Complex64::from_polar(1.0 / (basis.dim() as f64).sqrt(), i as f64))
        .collect();
    let mut g = c.benchmark_group("theta_field_k50");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::new(name, 256), &v, |b, v| {
            b.iter(|| basis.eigenfunction_modulus(v, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sublevel_area, action_profile, k_sweep, theta_field);
criterion_main!(benches);
