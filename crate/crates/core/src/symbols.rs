//! Real trigonometric-polynomial Hamiltonians on the torus `[0,1)²`.
//!
//! A symbol is a finite sum `Σ c_{m,n} exp(2πi(mq + np))` whose coefficient
//! table is closed under `(m, n, c) ↦ (−m, −n, c̄)`, so that it evaluates to a
//! real number everywhere. Besides pointwise evaluation this module locates
//! the global minimum and the first critical value above it, and measures the
//! symplectic area of the sublevel component that contains the minimum.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::par::Execution;

/// Symbols built from files must already be real to this tolerance.
pub const FILE_REALITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SymbolError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mode ({m}, {n}) is listed twice")]
    DuplicateMode { m: i32, n: i32 },
    #[error("symbol is not real: mode ({m}, {n}) moves by {change:.3e} under symmetrization")]
    NotReal { m: i32, n: i32, change: f64 },
    #[error("the minimum of the symbol is degenerate or not isolated")]
    DegenerateMinimum,
    #[error("energy {energy} outside the admissible window ({lo}, {hi})")]
    EnergyOutOfWindow { energy: f64, lo: f64, hi: f64 },
    #[error("symplectic density must be positive, got {0}")]
    InvalidNormalization(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierMode {
    /// Frequency in `q`.
    pub m: i32,
    /// Frequency in `p`.
    pub n: i32,
    pub coeff: Complex64,
}

impl FourierMode {
    pub fn new(m: i32, n: i32, coeff: Complex64) -> Self {
        Self { m, n, coeff }
    }
}

/// Density `nu` of the symplectic form `ω = nu · dp∧dq`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymplecticNormalization {
    nu: f64,
}

impl SymplecticNormalization {
    pub fn new(nu: f64) -> Result<Self, SymbolError> {
        if nu > 0.0 && nu.is_finite() {
            Ok(Self { nu })
        } else {
            Err(SymbolError::InvalidNormalization(nu))
        }
    }

    /// The torus of volume `4π` carrying the Harper model.
    pub fn torus() -> Self {
        Self { nu: 4.0 * PI }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl Default for SymplecticNormalization {
    fn default() -> Self {
        Self::torus()
    }
}

/// Principal symbol `a₀` (and optional subprincipal `a₁`) as Fourier data.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigSymbol {
    modes: Vec<FourierMode>,
    sub_modes: Vec<FourierMode>,
}

type ModeTable = BTreeMap<(i32, i32), Complex64>;

fn collect_unique(modes: impl IntoIterator<Item = FourierMode>) -> Result<ModeTable, SymbolError> {
    let mut table = ModeTable::new();
    for mode in modes {
        if table.insert((mode.m, mode.n), mode.coeff).is_some() {
            return Err(SymbolError::DuplicateMode { m: mode.m, n: mode.n });
        }
    }
    Ok(table)
}

fn accumulate(modes: impl IntoIterator<Item = FourierMode>) -> ModeTable {
    let mut table = ModeTable::new();
    for mode in modes {
        *table.entry((mode.m, mode.n)).or_default() += mode.coeff;
    }
    table
}

/// Replaces every coefficient by `(c_{m,n} + conj(c_{−m,−n}))/2` and reports
/// the largest change.
fn symmetrize(table: &ModeTable) -> (ModeTable, Option<(i32, i32, f64)>) {
    let mut out = ModeTable::new();
    let mut worst: Option<(i32, i32, f64)> = None;
    let keys: Vec<(i32, i32)> = table
        .keys()
        .flat_map(|&(m, n)| [(m, n), (-m, -n)])
        .collect();
    for (m, n) in keys {
        if out.contains_key(&(m, n)) {
            continue;
        }
        let c = table.get(&(m, n)).copied().unwrap_or_default();
        let partner = table.get(&(-m, -n)).copied().unwrap_or_default();
        let sym = (c + partner.conj()) * 0.5;
        let change = (sym - c).norm();
        if worst.map_or(true, |w| change > w.2) {
            worst = Some((m, n, change));
        }
        if sym != Complex64::new(0.0, 0.0) {
            out.insert((m, n), sym);
        }
    }
    (out, worst)
}

fn table_to_modes(table: ModeTable) -> Vec<FourierMode> {
    table
        .into_iter()
        .map(|((m, n), coeff)| FourierMode { m, n, coeff })
        .collect()
}

impl TrigSymbol {
    /// Strict builder: duplicate modes are rejected, and so is any table that
    /// symmetrization would change by more than [`FILE_REALITY_TOL`].
    pub fn from_modes(modes: impl IntoIterator<Item = FourierMode>) -> Result<Self, SymbolError> {
        let table = collect_unique(modes)?;
        let (sym, worst) = symmetrize(&table);
        if let Some((m, n, change)) = worst {
            if change > FILE_REALITY_TOL {
                return Err(SymbolError::NotReal { m, n, change });
            }
        }
        Ok(Self {
            modes: table_to_modes(sym),
            sub_modes: Vec::new(),
        })
    }

    /// Reality-enforcing builder: repeated modes add up, then the table is
    /// projected onto real symbols.
    pub fn symmetrized(modes: impl IntoIterator<Item = FourierMode>) -> Self {
        let (sym, _) = symmetrize(&accumulate(modes));
        Self {
            modes: table_to_modes(sym),
            sub_modes: Vec::new(),
        }
    }

    /// `2(cos 2πp + cos 2πq)`.
    pub fn harper() -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self::symmetrized([
            FourierMode::new(1, 0, one),
            FourierMode::new(-1, 0, one),
            FourierMode::new(0, 1, one),
            FourierMode::new(0, -1, one),
        ])
    }

    pub fn constant(value: f64) -> Self {
        Self::symmetrized([FourierMode::new(0, 0, Complex64::new(value, 0.0))])
    }

    /// `amplitude · cos(2π(mq + np) + phase)`.
    pub fn cosine(m: i32, n: i32, amplitude: f64, phase: f64) -> Self {
        let c = Complex64::from_polar(0.5 * amplitude, phase);
        Self::symmetrized([FourierMode::new(m, n, c), FourierMode::new(-m, -n, c.conj())])
    }

    /// Sum of two symbols (principal and subprincipal parts separately).
    pub fn plus(&self, other: &TrigSymbol) -> Self {
        let (modes, _) = symmetrize(&accumulate(
            self.modes.iter().chain(other.modes.iter()).copied(),
        ));
        let (sub, _) = symmetrize(&accumulate(
            self.sub_modes.iter().chain(other.sub_modes.iter()).copied(),
        ));
        Self {
            modes: table_to_modes(modes),
            sub_modes: table_to_modes(sub),
        }
    }

    /// Attaches a subprincipal symbol `a₁`; it is symmetrized like `a₀`.
    pub fn with_sub_modes(mut self, modes: impl IntoIterator<Item = FourierMode>) -> Self {
        let (sub, _) = symmetrize(&accumulate(modes));
        self.sub_modes = table_to_modes(sub);
        self
    }

    pub fn modes(&self) -> &[FourierMode] {
        &self.modes
    }

    pub fn sub_modes(&self) -> &[FourierMode] {
        &self.sub_modes
    }

    /// Largest `|m|` or `|n|` among the principal modes.
    pub fn degree(&self) -> i32 {
        self.modes
            .iter()
            .map(|md| md.m.abs().max(md.n.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Largest `|c|` among the principal modes.
    pub fn max_coeff(&self) -> f64 {
        self.modes.iter().map(|md| md.coeff.norm()).fold(0.0, f64::max)
    }

    /// Full complex sum; its imaginary part is round-off for a real symbol.
    pub fn eval_complex(&self, q: f64, p: f64) -> Complex64 {
        eval_modes(&self.modes, q, p)
    }

    pub fn eval(&self, q: f64, p: f64) -> f64 {
        self.modes
            .iter()
            .map(|md| {
                let theta = TAU * (md.m as f64 * q + md.n as f64 * p);
                md.coeff.re * theta.cos() - md.coeff.im * theta.sin()
            })
            .sum()
    }

    /// Subprincipal symbol `a₁(q, p)` (zero when none is attached).
    pub fn eval_sub(&self, q: f64, p: f64) -> f64 {
        eval_modes(&self.sub_modes, q, p).re
    }

    pub fn gradient(&self, q: f64, p: f64) -> [f64; 2] {
        let mut g = [0.0; 2];
        for md in &self.modes {
            let theta = TAU * (md.m as f64 * q + md.n as f64 * p);
            // d/dx Re(c e^{iθ}) = −θ' Im(c e^{iθ})
            let im = md.coeff.re * theta.sin() + md.coeff.im * theta.cos();
            g[0] -= TAU * md.m as f64 * im;
            g[1] -= TAU * md.n as f64 * im;
        }
        g
    }

    pub fn hessian(&self, q: f64, p: f64) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for md in &self.modes {
            let theta = TAU * (md.m as f64 * q + md.n as f64 * p);
            let re = md.coeff.re * theta.cos() - md.coeff.im * theta.sin();
            let (m, n) = (md.m as f64, md.n as f64);
            let s = -TAU * TAU * re;
            h[0][0] += s * m * m;
            h[0][1] += s * m * n;
            h[1][1] += s * n * n;
        }
        h[1][0] = h[0][1];
        h
    }

    /// Parses the plain-text symbol format: one `m n re im` per line, `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self, SymbolError> {
        let mut modes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |msg: String| SymbolError::Parse { line: idx + 1, msg };
            if fields.len() != 4 {
                return Err(parse_err(format!(
                    "expected `m n re im`, found {} fields",
                    fields.len()
                )));
            }
            let m: i32 = fields[0]
                .parse()
                .map_err(|e| parse_err(format!("bad m `{}`: {e}", fields[0])))?;
            let n: i32 = fields[1]
                .parse()
                .map_err(|e| parse_err(format!("bad n `{}`: {e}", fields[1])))?;
            let re: f64 = fields[2]
                .parse()
                .map_err(|e| parse_err(format!("bad re `{}`: {e}", fields[2])))?;
            let im: f64 = fields[3]
                .parse()
                .map_err(|e| parse_err(format!("bad im `{}`: {e}", fields[3])))?;
            if !re.is_finite() || !im.is_finite() {
                return Err(parse_err("non-finite coefficient".into()));
            }
            modes.push(FourierMode::new(m, n, Complex64::new(re, im)));
        }
        Self::from_modes(modes)
    }

    /// Inverse of [`TrigSymbol::parse`] for the principal modes.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# m n re im\n");
        for md in &self.modes {
            let _ = writeln!(out, "{} {} {:e} {:e}", md.m, md.n, md.coeff.re, md.coeff.im);
        }
        out
    }
}

fn eval_modes(modes: &[FourierMode], q: f64, p: f64) -> Complex64 {
    modes
        .iter()
        .map(|md| md.coeff * Complex64::cis(TAU * (md.m as f64 * q + md.n as f64 * p)))
        .sum()
}

/// Evaluates a symbol on a tensor grid `q_i = q0 + i·hq`, `p_j = p0 + j·hp`
/// through separable phase tables.
pub(crate) struct GridEvaluator {
    /// Distinct q-frequencies.
    ms: Vec<i32>,
    /// For each q-frequency, the p-dependence `Σ_n c_{m,n} e^{2πi n p_j}`.
    rows: Vec<Vec<Complex64>>,
    q0: f64,
    hq: f64,
}

impl GridEvaluator {
    pub(crate) fn new(sym: &TrigSymbol, q0: f64, hq: f64, p0: f64, hp: f64, np: usize) -> Self {
        let mut by_m: BTreeMap<i32, Vec<(i32, Complex64)>> = BTreeMap::new();
        for md in &sym.modes {
            by_m.entry(md.m).or_default().push((md.n, md.coeff));
        }
        let ms: Vec<i32> = by_m.keys().copied().collect();
        let rows = by_m
            .values()
            .map(|terms| {
                (0..np)
                    .map(|j| {
                        let p = p0 + j as f64 * hp;
                        terms
                            .iter()
                            .map(|&(n, c)| c * Complex64::cis(TAU * n as f64 * p))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Self { ms, rows, q0, hq }
    }

    /// Values along the row `q_i`, written into `out[j]`.
    pub(crate) fn fill_row(&self, i: usize, out: &mut [f64]) {
        let q = self.q0 + i as f64 * self.hq;
        out.iter_mut().for_each(|x| *x = 0.0);
        for (m, row) in self.ms.iter().zip(&self.rows) {
            let phase = Complex64::cis(TAU * *m as f64 * q);
            for (x, r) in out.iter_mut().zip(row) {
                *x += phase.re * r.re - phase.im * r.im;
            }
        }
    }
}

/// Values of `sym` on the `res × res` grid `(i/res, j/res)`, row-major in `q`.
pub fn sample_grid(sym: &TrigSymbol, res: usize, exec: Execution) -> Vec<f64> {
    let h = 1.0 / res as f64;
    let ev = GridEvaluator::new(sym, 0.0, h, 0.0, h, res);
    let mut out = vec![0.0; res * res];
    exec.for_each_chunk(&mut out, res, |i, row| ev.fill_row(i, row));
    out
}

fn wrap(x: f64) -> f64 {
    let w = x - x.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Distance on the unit torus.
pub fn torus_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dq = a[0] - b[0] - (a[0] - b[0]).round();
    let dp = a[1] - b[1] - (a[1] - b[1]).round();
    dq.hypot(dp)
}

fn sym_eigenvalues(h: [[f64; 2]; 2]) -> [f64; 2] {
    let tr = h[0][0] + h[1][1];
    let diff = h[0][0] - h[1][1];
    let disc = (diff * diff + 4.0 * h[0][1] * h[0][1]).sqrt();
    [0.5 * (tr - disc), 0.5 * (tr + disc)]
}

fn solve2(h: [[f64; 2]; 2], g: [f64; 2]) -> Option<[f64; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let scale = h[0][0].abs() + h[1][1].abs() + h[0][1].abs() + f64::MIN_POSITIVE;
    if det.abs() <= 1e-14 * scale * scale {
        return None;
    }
    Some([
        (h[1][1] * g[0] - h[0][1] * g[1]) / det,
        (h[0][0] * g[1] - h[1][0] * g[0]) / det,
    ])
}

/// A located global minimum together with its certificate flags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Minimum {
    pub q: f64,
    pub p: f64,
    pub value: f64,
    pub hessian: [[f64; 2]; 2],
    pub gradient_norm: f64,
    /// Both Hessian eigenvalues exceed `1e−8`.
    pub nondegenerate: bool,
    /// No other point of the domain attains the same value.
    pub isolated: bool,
}

impl Minimum {
    pub fn is_certified(&self) -> bool {
        self.nondegenerate && self.isolated
    }

    pub fn hessian_eigenvalues(&self) -> [f64; 2] {
        sym_eigenvalues(self.hessian)
    }
}

const NONDEGENERATE_EIG: f64 = 1e-8;

/// Damped Newton descent on `sym` from `start`.
fn descend(sym: &TrigSymbol, start: [f64; 2]) -> [f64; 2] {
    let mut x = start;
    let mut fx = sym.eval(x[0], x[1]);
    let mut best_g = f64::INFINITY;
    for _ in 0..200 {
        let g = sym.gradient(x[0], x[1]);
        let gn = g[0].hypot(g[1]);
        if gn == 0.0 {
            break;
        }
        let h = sym.hessian(x[0], x[1]);
        let ev = sym_eigenvalues(h);
        let newton = if ev[0] > 0.0 { solve2(h, g) } else { None };
        if let Some(s) = newton {
            let step = [-s[0], -s[1]];
            let len = step[0].hypot(step[1]);
            if len < 1e-6 {
                // quadratic convergence zone: plain Newton until the
                // gradient stops shrinking
                if gn >= best_g {
                    break;
                }
                best_g = gn;
                x = [x[0] + step[0], x[1] + step[1]];
                fx = sym.eval(x[0], x[1]);
                continue;
            }
        }
        let mut dir = match newton {
            Some(s) => [-s[0], -s[1]],
            None => {
                let scale = ev[1].abs().max(1.0);
                [-g[0] / scale, -g[1] / scale]
            }
        };
        let len = dir[0].hypot(dir[1]);
        if len > 0.05 {
            dir = [dir[0] * 0.05 / len, dir[1] * 0.05 / len];
        }
        let slope = g[0] * dir[0] + g[1] * dir[1];
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let y = [x[0] + t * dir[0], x[1] + t * dir[1]];
            let fy = sym.eval(y[0], y[1]);
            if fy <= fx + 1e-4 * t * slope {
                x = y;
                fx = fy;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    [wrap(x[0]), wrap(x[1])]
}

/// Global minimum with the default 256×256 scan.
pub fn find_minimum(sym: &TrigSymbol) -> Minimum {
    find_minimum_with(sym, 256, Execution::default())
}

/// Coarse scan on a `grid × grid` lattice, then damped Newton from the
/// lowest local minima of the scan.
pub fn find_minimum_with(sym: &TrigSymbol, grid: usize, exec: Execution) -> Minimum {
    let grid = grid.max(4);
    let values = sample_grid(sym, grid, exec);
    let at = |i: usize, j: usize| values[(i % grid) * grid + (j % grid)];
    let mut seeds: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let v = at(i, j);
            let is_local_min = (0..3).all(|di| {
                (0..3).all(|dj| at(i + grid + di - 1, j + grid + dj - 1) >= v)
            });
            if is_local_min {
                seeds.push((v, i, j));
            }
        }
    }
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    seeds.truncate(16);

    let h = 1.0 / grid as f64;
    let refined: Vec<([f64; 2], f64)> = seeds
        .iter()
        .map(|&(_, i, j)| {
            let x = descend(sym, [i as f64 * h, j as f64 * h]);
            (x, sym.eval(x[0], x[1]))
        })
        .collect();
    let (best, value) = refined
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("scan always yields a local minimum");

    let scale = 1.0 + sym.max_coeff();
    let isolated = !refined
        .iter()
        .any(|(x, v)| (v - value).abs() <= 1e-9 * scale && torus_distance(*x, best) > 1e-5);
    let hessian = sym.hessian(best[0], best[1]);
    let g = sym.gradient(best[0], best[1]);
    let ev = sym_eigenvalues(hessian);
    Minimum {
        q: best[0],
        p: best[1],
        value,
        hessian,
        gradient_norm: g[0].hypot(g[1]),
        nondegenerate: ev[0] > NONDEGENERATE_EIG,
        isolated,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Saddle,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalPoint {
    pub q: f64,
    pub p: f64,
    pub value: f64,
    pub kind: CriticalKind,
}

/// Critical points reached by undamped Newton on the gradient from a
/// `seeds × seeds` grid, deduplicated on the torus.
pub fn critical_points(sym: &TrigSymbol, seeds: usize, exec: Execution) -> Vec<CriticalPoint> {
    let h = 1.0 / seeds as f64;
    let found: Vec<Option<[f64; 2]>> = exec.map(seeds * seeds, |idx| {
        let mut x = [(idx / seeds) as f64 * h, (idx % seeds) as f64 * h];
        for _ in 0..60 {
            let g = sym.gradient(x[0], x[1]);
            if g[0].hypot(g[1]) < 1e-11 * (1.0 + sym.max_coeff()) {
                return Some([wrap(x[0]), wrap(x[1])]);
            }
            let s = solve2(sym.hessian(x[0], x[1]), g)?;
            let mut step = [-s[0], -s[1]];
            let len = step[0].hypot(step[1]);
            if len > 0.05 {
                step = [step[0] * 0.05 / len, step[1] * 0.05 / len];
            }
            x = [x[0] + step[0], x[1] + step[1]];
        }
        None
    });
    let mut points: Vec<CriticalPoint> = Vec::new();
    for x in found.into_iter().flatten() {
        if points.iter().any(|c| torus_distance([c.q, c.p], x) < 1e-7) {
            continue;
        }
        let hess = sym.hessian(x[0], x[1]);
        let ev = sym_eigenvalues(hess);
        let tol = 1e-8 * (1.0 + sym.max_coeff());
        let kind = if ev[0] > tol {
            CriticalKind::Minimum
        } else if ev[1] < -tol {
            CriticalKind::Maximum
        } else if ev[0] < -tol && ev[1] > tol {
            CriticalKind::Saddle
        } else {
            CriticalKind::Degenerate
        };
        points.push(CriticalPoint {
            q: x[0],
            p: x[1],
            value: sym.eval(x[0], x[1]),
            kind,
        });
    }
    points.sort_by(|a, b| a.value.total_cmp(&b.value));
    points
}

/// Smallest critical value strictly above the minimum (64×64 Newton seeds);
/// falls back to the grid maximum when no such value is found.
pub fn separatrix_energy(sym: &TrigSymbol, min: &Minimum, exec: Execution) -> f64 {
    let tol = 1e-9 * (1.0 + sym.max_coeff());
    critical_points(sym, 64, exec)
        .iter()
        .map(|c| c.value)
        .find(|&v| v > min.value + tol)
        .unwrap_or_else(|| {
            sample_grid(sym, 256, exec)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max)
        })
}

/// `c₀′(E_min) = 2π·nu / sqrt(det d²a₀(m₀))`, the slope of the enclosed area
/// at the bottom of the well in the harmonic approximation.
pub fn action_derivative_at_min(
    min: &Minimum,
    norm: SymplecticNormalization,
) -> Result<f64, SymbolError> {
    if !min.nondegenerate {
        return Err(SymbolError::DegenerateMinimum);
    }
    let h = min.hessian;
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    Ok(TAU * norm.nu() / det.sqrt())
}

/// Resolution and execution policy for [`LevelGeometry::sublevel_area`].
#[derive(Clone, Copy, Debug)]
pub struct AreaOptions {
    /// Grid nodes per side of the sampling window.
    pub resolution: usize,
    /// Combine `resolution` and `2·resolution` to cancel the `h²` term.
    pub richardson: bool,
    pub exec: Execution,
}

impl Default for AreaOptions {
    fn default() -> Self {
        Self {
            resolution: 1024,
            richardson: true,
            exec: Execution::default(),
        }
    }
}

impl AreaOptions {
    pub fn with_resolution(resolution: usize) -> Self {
        Self {
            resolution,
            ..Self::default()
        }
    }
}

/// Symbol plus its certified well: the data every area/action query needs.
#[derive(Clone, Debug)]
pub struct LevelGeometry {
    symbol: TrigSymbol,
    minimum: Minimum,
    separatrix: f64,
    norm: SymplecticNormalization,
}

impl LevelGeometry {
    pub fn new(symbol: &TrigSymbol, norm: SymplecticNormalization) -> Self {
        let exec = Execution::default();
        let minimum = find_minimum_with(symbol, 256, exec);
        let separatrix = separatrix_energy(symbol, &minimum, exec);
        Self {
            symbol: symbol.clone(),
            minimum,
            separatrix,
            norm,
        }
    }

    pub fn symbol(&self) -> &TrigSymbol {
        &self.symbol
    }

    pub fn minimum(&self) -> &Minimum {
        &self.minimum
    }

    /// First critical value above the minimum.
    pub fn separatrix(&self) -> f64 {
        self.separatrix
    }

    pub fn norm(&self) -> SymplecticNormalization {
        self.norm
    }

    pub fn action_derivative_at_min(&self) -> Result<f64, SymbolError> {
        action_derivative_at_min(&self.minimum, self.norm)
    }

    /// Symplectic area `nu·|C_E|` of the component `C_E` of `{a₀ ≤ E}`
    /// containing the minimizer.
    ///
    /// The component is flood-filled on a grid centred at the minimizer. Each
    /// grid cell is split into two triangles and covered by the exact area of
    /// the sublevel set of the linear interpolant, which makes the error a
    /// smooth `O(h²)`; Richardson extrapolation over `h` and `h/2` removes the
    /// leading term. Small wells use a zoomed window (doubled until the
    /// component no longer touches its border) so the relative accuracy does
    /// not degrade as `E → E_min`.
    pub fn sublevel_area(&self, energy: f64, opts: AreaOptions) -> Result<f64, SymbolError> {
        let e_min = self.minimum.value;
        if !energy.is_finite() || energy < e_min {
            return Err(SymbolError::EnergyOutOfWindow {
                energy,
                lo: e_min,
                hi: f64::INFINITY,
            });
        }
        if energy == e_min {
            return Ok(0.0);
        }
        let res = (opts.resolution.max(8) + 1) & !1;
        let lam_min = self.minimum.hessian_eigenvalues()[0];
        let mut half = if lam_min > NONDEGENERATE_EIG {
            // harmonic radius of the well, with margin
            3.0 * (2.0 * (energy - e_min) / lam_min).sqrt()
        } else {
            0.5
        };
        loop {
            let window = if half >= 0.5 { None } else { Some(half) };
            let coarse = self.component_area(energy, window, res, opts.exec);
            let Some(coarse) = coarse else {
                half *= 2.0;
                continue;
            };
            let area = if opts.richardson {
                match self.component_area(energy, window, 2 * res, opts.exec) {
                    Some(fine) => (4.0 * fine - coarse) / 3.0,
                    None => {
                        half *= 2.0;
                        continue;
                    }
                }
            } else {
                coarse
            };
            return Ok(self.norm.nu() * area);
        }
    }

    /// Lebesgue area of the component on one grid; `None` when a windowed
    /// component reaches the window border.
    fn component_area(
        &self,
        energy: f64,
        window: Option<f64>,
        res: usize,
        exec: Execution,
    ) -> Option<f64> {
        let (q0, p0) = (self.minimum.q, self.minimum.p);
        let (nodes, h, periodic) = match window {
            None => (res, 1.0 / res as f64, true),
            Some(w) => (res + 1, 2.0 * w / res as f64, false),
        };
        let origin = |c: f64| c - h * (res / 2) as f64;
        let ev = GridEvaluator::new(&self.symbol, origin(q0), h, origin(p0), h, nodes);
        let mut g = vec![0.0; nodes * nodes];
        exec.for_each_chunk(&mut g, nodes, |i, row| {
            ev.fill_row(i, row);
            row.iter_mut().for_each(|x| *x -= energy);
        });

        let mut inside = vec![false; nodes * nodes];
        let center = (res / 2) * nodes + res / 2;
        let mut stack = vec![center];
        inside[center] = true;
        let mut touches = false;
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx / nodes, idx % nodes);
            if !periodic && (i == 0 || j == 0 || i == nodes - 1 || j == nodes - 1) {
                touches = true;
                continue;
            }
            let neighbours = [
                ((i + nodes - 1) % nodes, j),
                ((i + 1) % nodes, j),
                (i, (j + nodes - 1) % nodes),
                (i, (j + 1) % nodes),
            ];
            for (a, b) in neighbours {
                let n = a * nodes + b;
                if !inside[n] && g[n] <= 0.0 {
                    inside[n] = true;
                    stack.push(n);
                }
            }
        }
        if touches {
            return None;
        }

        let cells = if periodic { nodes } else { nodes - 1 };
        let row_sums = exec.map(cells, |i| {
            let i1 = (i + 1) % nodes;
            let mut acc = 0.0;
            for j in 0..cells {
                let j1 = (j + 1) % nodes;
                let idx = [i * nodes + j, i1 * nodes + j, i * nodes + j1, i1 * nodes + j1];
                if !idx.iter().any(|&k| inside[k]) {
                    continue;
                }
                let [f00, f10, f01, f11] = idx.map(|k| g[k]);
                acc += triangle_fraction(f00, f10, f11) + triangle_fraction(f00, f11, f01);
            }
            acc
        });
        let total: f64 = row_sums.iter().sum();
        Some(total * 0.5 * h * h)
    }
}

/// Fraction of a triangle where the linear interpolant of the vertex values
/// is `≤ 0`.
fn triangle_fraction(a: f64, b: f64, c: f64) -> f64 {
    let neg = [a, b, c].iter().filter(|&&x| x <= 0.0).count();
    match neg {
        0 => 0.0,
        3 => 1.0,
        1 => {
            let (s, u, v) = if a <= 0.0 {
                (a, b, c)
            } else if b <= 0.0 {
                (b, a, c)
            } else {
                (c, a, b)
            };
            s * s / ((s - u) * (s - v))
        }
        _ => {
            let (s, u, v) = if a > 0.0 {
                (a, b, c)
            } else if b > 0.0 {
                (b, a, c)
            } else {
                (c, a, b)
            };
            1.0 - s * s / ((s - u) * (s - v))
        }
    }
}

/// Convenience wrapper: locates the minimum, then measures the area.
pub fn sublevel_area(
    sym: &TrigSymbol,
    energy: f64,
    norm: SymplecticNormalization,
    resolution: usize,
) -> Result<f64, SymbolError> {
    LevelGeometry::new(sym, norm).sublevel_area(energy, AreaOptions::with_resolution(resolution))
}
