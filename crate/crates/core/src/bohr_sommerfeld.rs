//! Eigenvalue predictions from the action of the closed orbits around a
//! nondegenerate minimum, and reports comparing them with computed spectra.
//!
//! The principal action `c₀(E)` is the symplectic area of the well component
//! of `{a₀ ≤ E}` and `f₀ = c₀/2π`. Level `j` is predicted at
//! `E_j = g₀((j+½)/k)` with `g₀ = f₀⁻¹`, optionally corrected by a
//! first-order term `f₁` (zero unless supplied).

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use thiserror::Error;

use crate::io::fmt_f64;
use crate::spectral::{eigh, SpectralError, SpectrumResult};
use crate::symbols::{
    AreaOptions, LevelGeometry, SymbolError, SymplecticNormalization, TrigSymbol,
};
use crate::torus::{weyl_quantize, QuantumTorusParams, TorusError};
use crate::Execution;

/// Energy-grid size of a default profile.
pub const DEFAULT_GRID_SIZE: usize = 200;
/// Area-quadrature resolution of a default profile.
pub const DEFAULT_AREA_RESOLUTION: usize = 512;
/// Residuals below this are reported as machine-limited rather than fitted.
pub const MACHINE_FLOOR: f64 = 1e-12;
/// Target accuracy of the inversion `f₀(E_pred) = (j+½)/k`.
pub const INVERSION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BohrSommerfeldError {
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Torus(#[from] TorusError),
    #[error("the minimum is not certified (degenerate or not isolated)")]
    UncertifiedMinimum,
    #[error("E_cap = {e_cap} must lie in (E_min, E_sep) = ({e_min}, {e_sep})")]
    CapOutOfWindow { e_cap: f64, e_min: f64, e_sep: f64 },
    #[error("grid size {0} is below the minimum of 8")]
    GridTooSmall(usize),
    #[error("sampled action is not strictly increasing at E = {energy} (area resolution {resolution})")]
    NotMonotone { energy: f64, resolution: usize },
    #[error("action deviates from its linear behaviour at the minimum: remainder ratio {ratio:.3e} exceeds {bound:.3e}")]
    BadMinimumSlope { ratio: f64, bound: f64 },
    #[error("target {target} lies outside the range [0, {max}] of f0")]
    TargetOutOfRange { target: f64, max: f64 },
    #[error("spectrum has dimension {dim} but the predictions are for k = {k}")]
    KMismatch { dim: usize, k: usize },
    #[error("a sweep needs at least 3 strictly ascending values of k")]
    BadKList,
    #[error("counting level {level} lies outside the profile window [{lo}, {hi}]")]
    LevelOutOfWindow { level: f64, lo: f64, hi: f64 },
}

type Result<T> = std::result::Result<T, BohrSommerfeldError>;

/// Piecewise cubic Hermite interpolant through strictly increasing data.
#[derive(Clone, Debug)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Hermite interpolant with the given node slopes, limited where needed
    /// so every piece is monotone (Fritsch–Carlson).
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len() && y.len() == d.len());
        for i in 0..x.len() - 1 {
            let delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
            if delta <= 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            d[i] = d[i].max(0.0);
            d[i + 1] = d[i + 1].max(0.0);
            let a = d[i] / delta;
            let b = d[i + 1] / delta;
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                d[i] = t * a * delta;
                d[i + 1] = t * b * delta;
            }
        }
        Self { x, y, d }
    }

    pub fn nodes(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.x, &self.y, &self.d)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn range(&self) -> (f64, f64) {
        (self.y[0], *self.y.last().unwrap())
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.x.len();
        self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1
    }

    /// Value and derivative at `t`, clamped to the domain.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let (lo, hi) = self.domain();
        let t = t.clamp(lo, hi);
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i] * h, self.d[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let v = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
        let dv = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1)
            / h;
        (v, dv)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }
}

/// Bisection-safeguarded Newton solve of `F(E) = target` for increasing `F`
/// on `[lo, hi]`; `F` returns value and derivative.
fn solve_increasing(
    f: impl Fn(f64) -> (f64, f64),
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    let mut e = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = f(e);
        let r = v - target;
        if r.abs() <= 0.25 * INVERSION_TOL {
            return e;
        }
        if r > 0.0 {
            hi = e;
        } else {
            lo = e;
        }
        let newton = e - r / dv;
        e = if dv > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
    }
    e
}

/// Tabulated action `c₀` on `(E_min, E_cap]` with its monotone interpolant.
#[derive(Clone, Debug)]
pub struct ActionProfile {
    geometry: LevelGeometry,
    e_grid: Vec<f64>,
    c0: Vec<f64>,
    f0: Vec<f64>,
    c0_prime_min: f64,
    e_cap: f64,
    area_resolution: usize,
    interpolant: MonotoneCubic,
}

/// Grid, cap and quadrature settings for [`ActionProfile::build`].
#[derive(Clone, Copy, Debug)]
pub struct ProfileOptions {
    /// `None` selects the midpoint `(E_min + E_sep)/2`.
    pub e_cap: Option<f64>,
    pub grid_size: usize,
    pub area_resolution: usize,
    pub exec: Execution,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            e_cap: None,
            grid_size: DEFAULT_GRID_SIZE,
            area_resolution: DEFAULT_AREA_RESOLUTION,
            exec: Execution::default(),
        }
    }
}

/// `E_i = E_min + Δ(1 − cos(πi/2n))`, `i = 1..=n`.
fn clustered_grid(e_min: f64, e_cap: f64, n: usize) -> Vec<f64> {
    let span = e_cap - e_min;
    (1..=n)
        .map(|i| {
            if i == n {
                e_cap
            } else {
                e_min + span * (1.0 - (PI * i as f64 / (2 * n) as f64).cos())
            }
        })
        .collect()
}

/// Derivative at `x[i]` of the polynomial through up to five neighbouring
/// nodes (Fornberg weights for first derivatives on a nonuniform stencil).
fn stencil_derivative(x: &[f64], y: &[f64], i: usize) -> f64 {
    let n = x.len();
    let width = 5.min(n);
    let start = i.saturating_sub(width / 2).min(n - width);
    let xs = &x[start..start + width];
    let ys = &y[start..start + width];
    let x0 = x[i];
    // derivative of the Lagrange basis at x0
    let mut total = 0.0;
    for j in 0..width {
        let mut denom = 1.0;
        for m in 0..width {
            if m != j {
                denom *= xs[j] - xs[m];
            }
        }
        let mut num = 0.0;
        for l in 0..width {
            if l == j {
                continue;
            }
            let mut prod = 1.0;
            for m in 0..width {
                if m != j && m != l {
                    prod *= x0 - xs[m];
                }
            }
            num += prod;
        }
        total += ys[j] * num / denom;
    }
    total
}

impl ActionProfile {
    /// Samples `c₀` on a cosine-clustered grid and fits the interpolant.
    /// A monotonicity failure is retried once at doubled area resolution.
    pub fn build(
        symbol: &TrigSymbol,
        norm: SymplecticNormalization,
        opts: ProfileOptions,
    ) -> Result<Self> {
        Self::from_geometry(LevelGeometry::new(symbol, norm), opts)
    }

    pub fn from_geometry(geometry: LevelGeometry, opts: ProfileOptions) -> Result<Self> {
        if !geometry.minimum().is_certified() {
            return Err(BohrSommerfeldError::UncertifiedMinimum);
        }
        if opts.grid_size < 8 {
            return Err(BohrSommerfeldError::GridTooSmall(opts.grid_size));
        }
        let e_min = geometry.minimum().value;
        let e_sep = geometry.separatrix();
        let e_cap = opts.e_cap.unwrap_or(0.5 * (e_min + e_sep));
        if !(e_cap > e_min && e_cap < e_sep) {
            return Err(BohrSommerfeldError::CapOutOfWindow { e_cap, e_min, e_sep });
        }
        let c0_prime_min = geometry.action_derivative_at_min()?;

        match Self::sample(geometry.clone(), e_cap, c0_prime_min, opts, opts.area_resolution) {
            Err(BohrSommerfeldError::NotMonotone { .. }) => Self::sample(
                geometry,
                e_cap,
                c0_prime_min,
                opts,
                2 * opts.area_resolution,
            ),
            other => other,
        }
    }

    fn sample(
        geometry: LevelGeometry,
        e_cap: f64,
        c0_prime_min: f64,
        opts: ProfileOptions,
        resolution: usize,
    ) -> Result<Self> {
        let e_min = geometry.minimum().value;
        let e_grid = clustered_grid(e_min, e_cap, opts.grid_size);
        let area_opts = AreaOptions {
            resolution,
            richardson: true,
            exec: Execution::Sequential,
        };
        let c0 = opts
            .exec
            .map_slice(&e_grid, |&e| geometry.sublevel_area(e, area_opts))
            .into_iter()
            .collect::<std::result::Result<Vec<f64>, _>>()?;
        let f0: Vec<f64> = c0.iter().map(|c| c / TAU).collect();

        let mut prev = 0.0;
        for (e, &f) in e_grid.iter().zip(&f0) {
            if !(f > prev) {
                return Err(BohrSommerfeldError::NotMonotone {
                    energy: *e,
                    resolution,
                });
            }
            prev = f;
        }

        // the minimum itself is a node: f₀(E_min) = 0 with the closed-form slope
        let slope0 = c0_prime_min / TAU;
        let mut xs = Vec::with_capacity(e_grid.len() + 1);
        let mut ys = Vec::with_capacity(e_grid.len() + 1);
        xs.push(e_min);
        ys.push(0.0);
        xs.extend_from_slice(&e_grid);
        ys.extend_from_slice(&f0);
        let mut ds: Vec<f64> = (0..xs.len()).map(|i| stencil_derivative(&xs, &ys, i)).collect();
        ds[0] = slope0;
        let interpolant = MonotoneCubic::with_slopes(xs, ys, ds);

        let profile = Self {
            geometry,
            e_grid,
            c0,
            f0,
            c0_prime_min,
            e_cap,
            area_resolution: resolution,
            interpolant,
        };
        profile.check_minimum_slope()?;
        Ok(profile)
    }

    /// `(f₀(E) − f₀′(E_min)(E − E_min))/(E − E_min)²` at the three lowest
    /// nodes must be bounded by the window's overall curvature scale.
    fn check_minimum_slope(&self) -> Result<()> {
        let e_min = self.e_min();
        let span = self.e_cap - e_min;
        let s = self.c0_prime_min / TAU;
        let last = *self.f0.last().unwrap();
        let scale = 2.0 * (last - s * span).abs() / (span * span) + s / span;
        let bound = 100.0 * scale;
        for i in 0..3 {
            let d = self.e_grid[i] - e_min;
            let ratio = ((self.f0[i] - s * d) / (d * d)).abs();
            if !(ratio <= bound) {
                return Err(BohrSommerfeldError::BadMinimumSlope { ratio, bound });
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> &LevelGeometry {
        &self.geometry
    }

    pub fn e_grid(&self) -> &[f64] {
        &self.e_grid
    }

    pub fn c0(&self) -> &[f64] {
        &self.c0
    }

    pub fn f0_samples(&self) -> &[f64] {
        &self.f0
    }

    /// Closed-form `c₀′(E_min)`.
    pub fn c0_prime_min(&self) -> f64 {
        self.c0_prime_min
    }

    /// `c₀(E₁)/(E₁ − E_min)` at the lowest grid node.
    pub fn c0_secant_at_min(&self) -> f64 {
        self.c0[0] / (self.e_grid[0] - self.e_min())
    }

    pub fn e_min(&self) -> f64 {
        self.geometry.minimum().value
    }

    pub fn e_cap(&self) -> f64 {
        self.e_cap
    }

    pub fn area_resolution(&self) -> usize {
        self.area_resolution
    }

    pub fn interpolant(&self) -> &MonotoneCubic {
        &self.interpolant
    }

    /// Interpolated `f₀(E)` on `[E_min, E_cap]`.
    pub fn f0(&self, energy: f64) -> f64 {
        self.interpolant.eval(energy)
    }

    pub fn f0_max(&self) -> f64 {
        self.interpolant.range().1
    }

    /// `g₀(t)`: the energy with `f₀(E) = t`.
    pub fn g0(&self, target: f64) -> Result<f64> {
        self.invert(target, |_| 0.0, 0.0)
    }

    fn invert(&self, target: f64, f1: impl Fn(f64) -> f64, hbar: f64) -> Result<f64> {
        let max = self.f0_max() + hbar * f1(self.e_cap);
        let min = hbar * f1(self.e_min());
        if !(target >= min && target <= max) {
            return Err(BohrSommerfeldError::TargetOutOfRange { target, max });
        }
        let (xs, ys, _) = self.interpolant.nodes();
        // bracket from the tabulated values
        let i = ys.partition_point(|&y| y < target).clamp(1, ys.len() - 1);
        let (lo, hi) = if hbar == 0.0 {
            (xs[i - 1], xs[i])
        } else {
            self.interpolant.domain()
        };
        let eps = 1e-7 * (self.e_cap - self.e_min());
        Ok(solve_increasing(
            |e| {
                let (v, dv) = self.interpolant.eval_with_derivative(e);
                if hbar == 0.0 {
                    (v, dv)
                } else {
                    let dfe = (f1(e + eps) - f1(e - eps)) / (2.0 * eps);
                    (v + hbar * f1(e), dv + hbar * dfe)
                }
            },
            target,
            lo,
            hi,
        ))
    }

    /// Window of the low-lying spectrum: `[E_min, E_min + 20π/(k·c₀′)]`.
    pub fn zoom_window(&self, k: usize) -> (f64, f64) {
        let e_min = self.e_min();
        (e_min, e_min + 20.0 * PI / (k as f64 * self.c0_prime_min))
    }
}

/// Predicted energies `E_j` for `j = 0, 1, …` up to the profile's cap.
#[derive(Clone, Debug)]
pub struct PredictionSet {
    pub k: usize,
    /// `(j, E_pred)`, ascending in both.
    pub entries: Vec<(usize, f64)>,
    /// Gap unit `2π/c₀′(E_min)`.
    pub gap_unit: f64,
    pub e_cap: f64,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }
}

/// `E_j = g₀((j+½)/k)` for every `j` with `(j+½)/k ≤ f₀(E_cap)`.
pub fn predict(profile: &ActionProfile, k: usize) -> Result<PredictionSet> {
    predict_with(profile, k, None::<fn(f64) -> f64>)
}

/// As [`predict`], solving `f₀(E) + f₁(E)/k = (j+½)/k` when `f₁` is given.
pub fn predict_with(
    profile: &ActionProfile,
    k: usize,
    f1: Option<impl Fn(f64) -> f64>,
) -> Result<PredictionSet> {
    QuantumTorusParams::new(k as i64)?;
    let kf = k as f64;
    let mut entries = Vec::new();
    for j in 0.. {
        let target = (j as f64 + 0.5) / kf;
        let e = match &f1 {
            None => {
                if target > profile.f0_max() {
                    break;
                }
                profile.g0(target)?
            }
            Some(f1) => match profile.invert(target, f1, 1.0 / kf) {
                Ok(e) => e,
                Err(BohrSommerfeldError::TargetOutOfRange { .. }) if j > 0 => break,
                Err(e) => return Err(e),
            },
        };
        entries.push((j, e));
    }
    Ok(PredictionSet {
        k,
        entries,
        gap_unit: TAU / profile.c0_prime_min(),
        e_cap: profile.e_cap(),
    })
}

/// `E_min + (a₁(m₀) + 2π(j+½)/c₀′(E_min))/k`.
pub fn near_minimum_predict(geometry: &LevelGeometry, k: usize, j: usize, a1_at_min: f64) -> Result<f64> {
    let slope = geometry.action_derivative_at_min()?;
    Ok(geometry.minimum().value + (a1_at_min + TAU * (j as f64 + 0.5) / slope) / k as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationRow {
    pub j: usize,
    pub lambda: f64,
    pub e_pred: f64,
    pub residual: f64,
    /// `k(λ_{j+1} − λ_j)/(2π/c₀′)`; absent for the top eigenvalue.
    pub gap_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountingDefect {
    pub level: f64,
    pub count: usize,
    pub weyl: f64,
    pub defect: f64,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub k: usize,
    pub e_cap: f64,
    pub rows: Vec<VerificationRow>,
    /// Eigenvalues `≤ E_cap` that have no prediction to pair with.
    pub unpaired_eigenvalues: usize,
    pub counting: Vec<CountingDefect>,
}

impl VerificationReport {
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn gap_ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.gap_ratio).collect()
    }

    /// Report CSV `k,j,lambda,E_pred,residual,gap_ratio`; a missing gap ratio
    /// is written as `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,j,lambda,E_pred,residual,gap_ratio\n");
        for r in &self.rows {
            let gap = r.gap_ratio.map(fmt_f64).unwrap_or_else(|| "nan".into());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.k,
                r.j,
                fmt_f64(r.lambda),
                fmt_f64(r.e_pred),
                fmt_f64(r.residual),
                gap
            );
        }
        out
    }
}

/// Pairs the `j`-th eigenvalue with the `j`-th prediction whenever either
/// lies below `E_cap`, and evaluates `|#{λ ≤ E} − k·f₀(E)|` at each level.
pub fn verify(
    spectrum: &SpectrumResult,
    predictions: &PredictionSet,
    profile: &ActionProfile,
    levels: &[f64],
) -> Result<VerificationReport> {
    let k = predictions.k;
    if spectrum.dim() != 2 * k {
        return Err(BohrSommerfeldError::KMismatch {
            dim: spectrum.dim(),
            k,
        });
    }
    let lam = &spectrum.eigenvalues;
    let e_cap = predictions.e_cap;
    let kf = k as f64;
    let rows: Vec<VerificationRow> = predictions
        .entries
        .iter()
        .filter(|&&(j, e)| j < lam.len() && (lam[j] <= e_cap || e <= e_cap))
        .map(|&(j, e)| VerificationRow {
            j,
            lambda: lam[j],
            e_pred: e,
            residual: (lam[j] - e).abs(),
            gap_ratio: lam
                .get(j + 1)
                .map(|next| kf * (next - lam[j]) / predictions.gap_unit),
        })
        .collect();
    let below_cap = spectrum.count_below(e_cap);
    let unpaired_eigenvalues = below_cap.saturating_sub(rows.len());

    let (lo, hi) = (profile.e_min(), profile.e_cap());
    let counting = levels
        .iter()
        .map(|&level| {
            if !(level >= lo && level <= hi) {
                return Err(BohrSommerfeldError::LevelOutOfWindow { level, lo, hi });
            }
            let count = spectrum.count_below(level);
            let weyl = kf * profile.f0(level);
            Ok(CountingDefect {
                level,
                count,
                weyl,
                defect: (count as f64 - weyl).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(VerificationReport {
        k,
        e_cap,
        rows,
        unpaired_eigenvalues,
        counting,
    })
}

/// Which predictor a sweep compares against.
#[derive(Clone, Copy, Debug)]
pub enum Predictor<'a> {
    /// Harmonic approximation at the minimum with the given `a₁(m₀)`.
    NearMinimum { a1_at_min: f64 },
    /// Full inversion of the tabulated action.
    Profile(&'a ActionProfile),
}

/// Least-squares line through `(log k, log r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayFit {
    Fitted { slope: f64, intercept: f64 },
    /// Some residual fell below [`MACHINE_FLOOR`].
    MachineLimited,
}

impl DecayFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            DecayFit::Fitted { slope, .. } => Some(*slope),
            DecayFit::MachineLimited => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayRow {
    pub j: usize,
    /// `|λ_k^{(j)} − E_pred|` for each `k` of the sweep.
    pub residuals: Vec<f64>,
    pub fit: DecayFit,
}

#[derive(Clone, Debug)]
pub struct DecaySweep {
    pub k_list: Vec<usize>,
    pub rows: Vec<DecayRow>,
}

impl DecaySweep {
    /// Sweep CSV `j,slope,intercept`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,slope,intercept\n");
        for r in &self.rows {
            match r.fit {
                DecayFit::Fitted { slope, intercept } => {
                    let _ = writeln!(out, "{},{},{}", r.j, fmt_f64(slope), fmt_f64(intercept));
                }
                DecayFit::MachineLimited => {
                    let _ = writeln!(out, "{},machine-limited,nan", r.j);
                }
            }
        }
        out
    }
}

pub fn fit_decay(k_list: &[usize], residuals: &[f64]) -> DecayFit {
    if residuals.iter().any(|&r| !(r >= MACHINE_FLOOR)) {
        return DecayFit::MachineLimited;
    }
    let xs: Vec<f64> = k_list.iter().map(|&k| (k as f64).ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    DecayFit::Fitted {
        slope,
        intercept: my - slope * mx,
    }
}

/// Lowest `count` eigenvalues of the quantized symbol at each `k`.
pub fn low_spectra(symbol: &TrigSymbol, k_list: &[usize], count: usize, exec: Execution) -> Result<Vec<Vec<f64>>> {
    exec.map_slice(k_list, |&k| -> Result<Vec<f64>> {
        let params = QuantumTorusParams::new(k as i64)?;
        let s = eigh(weyl_quantize(symbol, params).matrix(), false)?;
        Ok(s.eigenvalues.into_iter().take(count).collect())
    })
    .into_iter()
    .collect()
}

/// Per-`j` log-log slope of `|λ_k^{(j)} − E_pred(k, j)|` against `k`.
pub fn decay_sweep(
    geometry: &LevelGeometry,
    k_list: &[usize],
    j_max: usize,
    predictor: Predictor<'_>,
    exec: Execution,
) -> Result<DecaySweep> {
    if k_list.len() < 3 || k_list.windows(2).any(|w| w[0] >= w[1]) || k_list[0] == 0 {
        return Err(BohrSommerfeldError::BadKList);
    }
    let spectra = low_spectra(geometry.symbol(), k_list, j_max + 1, exec)?;
    let mut rows = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let mut residuals = Vec::with_capacity(k_list.len());
        for (&k, low) in k_list.iter().zip(&spectra) {
            let Some(&lam) = low.get(j) else { continue };
            let pred = match predictor {
                Predictor::NearMinimum { a1_at_min } => near_minimum_predict(geometry, k, j, a1_at_min)?,
                Predictor::Profile(p) => p.g0((j as f64 + 0.5) / k as f64)?,
            };
            residuals.push((lam - pred).abs());
        }
        if residuals.len() != k_list.len() {
            continue;
        }
        let fit = fit_decay(k_list, &residuals);
        rows.push(DecayRow { j, residuals, fit });
    }
    Ok(DecaySweep {
        k_list: k_list.to_vec(),
        rows,
    })
}

/// Synthetic spectrum `λ_j = g₀((j+½)/k)` padded above `E_cap`, for
/// self-consistency checks of [`verify`].
pub fn synthetic_spectrum(profile: &ActionProfile, k: usize) -> Result<SpectrumResult> {
    let preds = predict(profile, k)?;
    let mut values = preds.energies();
    let top = profile.e_cap() + 1.0;
    while values.len() < 2 * k {
        values.push(top + values.len() as f64);
    }
    values.truncate(2 * k);
    Ok(SpectrumResult {
        residuals: vec![0.0; values.len()],
        eigenvalues: values,
        eigenvectors: None,
        hermiticity_defect: 0.0,
        orthonormality_defect: None,
        max_entry: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_reproduces_linear_data() {
        let x = vec![0.0, 0.5, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t + 1.0).collect();
        let c = MonotoneCubic::with_slopes(x, y, vec![2.0; 4]);
        for t in [0.1, 1.3, 2.9] {
            let (v, d) = c.eval_with_derivative(t);
            assert!((v - (2.0 * t + 1.0)).abs() < 1e-14);
            assert!((d - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn limiter_keeps_pieces_monotone() {
        let x = vec![0.0, 1.0, 2.0];
        let y = vec![0.0, 0.01, 1.0];
        let c = MonotoneCubic::with_slopes(x, y, vec![5.0, 5.0, 5.0]);
        let mut prev = -1.0;
        for i in 0..=200 {
            let v = c.eval(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn stencil_is_exact_on_quartics() {
        let x: [f64; 6] = [0.0, 0.1, 0.3, 0.35, 0.8, 1.0];
        let y: Vec<f64> = x.iter().map(|t| t.powi(4) - t).collect();
        for i in 0..x.len() {
            let d = stencil_derivative(&x, &y, i);
            assert!((d - (4.0 * x[i].powi(3) - 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn clustered_grid_ends_at_cap() {
        let g = clustered_grid(-4.0, -2.0, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(*g.last().unwrap(), -2.0);
        assert!(g[0] > -4.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g[1] - g[0] < g[9] - g[8]);
    }

    #[test]
    fn fit_recovers_power_law() {
        let ks = [10, 20, 40];
        let r: Vec<f64> = ks.iter().map(|&k| 3.0 * (k as f64).powi(-2)).collect();
        let DecayFit::Fitted { slope, intercept } = fit_decay(&ks, &r) else {
            panic!()
        };
        assert!((slope + 2.0).abs() < 1e-12);
        assert!((intercept - 3f64.ln()).abs() < 1e-12);
        assert_eq!(fit_decay(&ks, &[1e-3, 1e-13, 1e-4]), DecayFit::MachineLimited);
    }

    #[test]
    fn near_minimum_harper() {
        let g = LevelGeometry::new(&TrigSymbol::harper(), SymplecticNormalization::torus());
        let e0 = near_minimum_predict(&g, 50, 0, 0.0).unwrap();
        let e1 = near_minimum_predict(&g, 50, 1, 0.0).unwrap();
        assert!((e0 - (-4.0 + PI / 50.0)).abs() < 1e-10);
        assert!((e1 - e0 - TAU / 50.0).abs() < 1e-10);
    }
}
