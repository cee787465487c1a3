//! Theta-function basis of the level-`k` quantum space of the torus,
//! evaluated on the fundamental domain `[0,1)²`.
//!
//! With `ζ = √(2π)(q − ip)`, the section `ψ_ℓ` has the unitary-frame value
//!
//! `S_ℓ(q,p) = N e^{−2πikqp} Σ_{n ≡ ℓ (2k)} exp(−π(n − 2kp)²/2k + 2πinq)`,
//!
//! `N = k^{1/4}/√(2π)`, normalized so that `∫|S_ℓ|² 4π dq dp = 1`. The
//! moduli `|S_ℓ|` are gauge invariant. The sections satisfy
//!
//! - `e^{iπp} S_ℓ(q + 1/2k, p) = w^ℓ S_ℓ(q, p)`,
//! - `e^{iπq} S_ℓ(q, p − 1/2k) = S_{ℓ+1}(q, p)`,
//! - `e^{2πikp} S_ℓ(q + 1, p) = S_ℓ = e^{2πikq} S_ℓ(q, p − 1)`,
//!
//! matching the clock/shift convention of [`crate::torus`].

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::io::fmt_f64;
use crate::symbols::TrigSymbol;
use crate::torus::QuantumTorusParams;
use crate::Execution;

/// Gaussian terms below this fraction of the peak are dropped.
pub const SERIES_TAIL: f64 = 1e-15;
/// Relation residuals above this reject the construction.
pub const RELATION_TOL: f64 = 1e-8;
/// Largest `k` for which [`ThetaBasis::build`] also runs the Gram check.
pub const GRAM_CHECK_MAX_K: usize = 20;
/// Number of quasi-random probe points for the relation checks.
pub const RELATION_PROBES: usize = 100;

#[derive(Debug, Error)]
pub enum ThetaError {
    #[error("k must be a positive integer, got {0}")]
    InvalidK(i64),
    #[error("resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
    #[error("{relation} relation residual {residual:.3e} exceeds {tol:.1e}")]
    RelationFailed {
        relation: &'static str,
        residual: f64,
        tol: f64,
    },
    #[error("coefficient vector has length {got}, expected 2k = {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("field resolution {field} differs from {expected}")]
    ResolutionMismatch { field: usize, expected: usize },
    #[error("the tube around the level set contains no grid point")]
    EmptyTube,
}

/// Residuals of the defining relations, each a max over probe points and `ℓ`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RelationResiduals {
    pub clock: f64,
    pub shift: f64,
    pub lattice_e: f64,
    pub lattice_f: f64,
    /// `2k`-fold shift returning to the start.
    pub shift_cycle: f64,
}

impl RelationResiduals {
    pub fn max(&self) -> f64 {
        [self.clock, self.shift, self.lattice_e, self.lattice_f, self.shift_cycle]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ThetaBasis {
    params: QuantumTorusParams,
    resolution: usize,
    /// Terms with `|n − 2kp| > cutoff` are dropped.
    cutoff: f64,
    norm: f64,
    relations: RelationResiduals,
    gram_defect: Option<f64>,
}

/// Deterministic points of `[0,1)²` (Kronecker sequence of the plastic ratio).
fn probe_points(count: usize) -> Vec<(f64, f64)> {
    let g = 1.324_717_957_244_746_f64;
    let (a1, a2) = (1.0 / g, 1.0 / (g * g));
    (1..=count)
        .map(|i| ((0.5 + a1 * i as f64).fract(), (0.5 + a2 * i as f64).fract()))
        .collect()
}

impl ThetaBasis {
    /// Builds the basis and verifies its defining relations at
    /// [`RELATION_PROBES`] points; for `k ≤ GRAM_CHECK_MAX_K` also measures the
    /// Gram defect on the grid.
    pub fn build(k: i64, resolution: usize) -> Result<Self, ThetaError> {
        let params = QuantumTorusParams::new(k).map_err(|_| ThetaError::InvalidK(k))?;
        if resolution < 2 {
            return Err(ThetaError::InvalidResolution(resolution));
        }
        let kf = params.k() as f64;
        let mut basis = Self {
            params,
            resolution,
            cutoff: (2.0 * kf * (-SERIES_TAIL.ln()) / PI).sqrt(),
            norm: kf.powf(0.25) / TAU.sqrt(),
            relations: RelationResiduals::default(),
            gram_defect: None,
        };
        basis.relations = basis.relation_residuals(&probe_points(RELATION_PROBES));
        for (relation, residual) in [
            ("clock", basis.relations.clock),
            ("shift", basis.relations.shift),
            ("lattice-e", basis.relations.lattice_e),
            ("lattice-f", basis.relations.lattice_f),
            ("shift-cycle", basis.relations.shift_cycle),
        ] {
            if !(residual <= RELATION_TOL) {
                return Err(ThetaError::RelationFailed {
                    relation,
                    residual,
                    tol: RELATION_TOL,
                });
            }
        }
        if params.k() <= GRAM_CHECK_MAX_K {
            basis.gram_defect = Some(basis.gram_defect_at(resolution, Execution::default()));
        }
        Ok(basis)
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn series_cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn relations(&self) -> RelationResiduals {
        self.relations
    }

    /// `max |G − I|` at the basis resolution, when it was measured.
    pub fn gram_defect(&self) -> Option<f64> {
        self.gram_defect
    }

    /// `n` range with `|n − 2kp| ≤ cutoff`.
    fn n_range(&self, p: f64) -> (i64, i64) {
        let c = 2.0 * self.k() as f64 * p;
        ((c - self.cutoff).ceil() as i64, (c + self.cutoff).floor() as i64)
    }

    fn gaussian(&self, n: i64, p: f64) -> f64 {
        let kf = self.k() as f64;
        let d = n as f64 - 2.0 * kf * p;
        (-PI * d * d / (2.0 * kf)).exp()
    }

    /// `S_ℓ(q, p)` at any real `(q, p)`, including the frame phase.
    pub fn section_value(&self, l: usize, q: f64, p: f64) -> Complex64 {
        let d = self.dim() as i64;
        let kf = self.k() as f64;
        let (lo, hi) = self.n_range(p);
        let start = lo + (l as i64 - lo).rem_euclid(d);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut n = start;
        while n <= hi {
            sum += self.gaussian(n, p) * Complex64::cis(TAU * (n as f64 * q).fract());
            n += d;
        }
        self.norm * Complex64::cis(-TAU * (kf * q * p).fract()) * sum
    }

    fn relation_residuals(&self, points: &[(f64, f64)]) -> RelationResiduals {
        let d = self.dim();
        let kf = self.k() as f64;
        let h = 1.0 / (2.0 * kf);
        let mut r = RelationResiduals::default();
        for &(q, p) in points {
            for l in 0..d {
                let s = self.section_value(l, q, p);
                let scale = s.norm().max(self.norm);
                let clock = Complex64::cis(PI * p) * self.section_value(l, q + h, p)
                    - self.params.half_w_pow(2 * l as i64) * s;
                let shift = Complex64::cis(PI * q) * self.section_value(l, q, p - h)
                    - self.section_value((l + 1) % d, q, p);
                let le = Complex64::cis(TAU * kf * p) * self.section_value(l, q + 1.0, p) - s;
                let lf = Complex64::cis(TAU * kf * q) * self.section_value(l, q, p - 1.0) - s;
                // 2k successive shifts accumulate e^{iπq} each and move p by 1
                let mut cyc = Complex64::new(1.0, 0.0);
                for _ in 0..d {
                    cyc *= Complex64::cis(PI * q);
                }
                let cycle = cyc * self.section_value(l, q, p - 1.0) - s;
                r.clock = r.clock.max(clock.norm() / scale);
                r.shift = r.shift.max(shift.norm() / scale);
                r.lattice_e = r.lattice_e.max(le.norm() / scale);
                r.lattice_f = r.lattice_f.max(lf.norm() / scale);
                r.shift_cycle = r.shift_cycle.max(cycle.norm() / scale);
            }
        }
        r
    }

    /// Frame-free values `e^{2πikqp} S_ℓ(q, p)` for every `ℓ` along the row
    /// `p = j/res`, as a `2k × res` matrix over `q = i/res`.
    fn row_values(&self, j: usize, res: usize) -> DMatrix<Complex64> {
        let d = self.dim();
        let p = j as f64 / res as f64;
        let (lo, hi) = self.n_range(p);
        let mut out = DMatrix::zeros(d, res);
        for n in lo..=hi {
            let l = n.rem_euclid(d as i64) as usize;
            let g = self.norm * self.gaussian(n, p);
            let step = n.rem_euclid(res as i64) as f64 / res as f64;
            for i in 0..res {
                out[(l, i)] += g * Complex64::cis(TAU * (step * i as f64).fract());
            }
        }
        out
    }

    /// `max |G − I|` with `G_{ℓℓ'} = Σ_grid conj(S_ℓ) S_ℓ' · 4π/res²`.
    pub fn gram_defect_at(&self, res: usize, exec: Execution) -> f64 {
        let d = self.dim();
        let weight = 2.0 * TAU / (res * res) as f64;
        let partial = exec.map(res, |j| {
            let v = self.row_values(j, res);
            &v.conjugate() * v.transpose()
        });
        let mut g = DMatrix::<Complex64>::zeros(d, d);
        for m in partial {
            g += m;
        }
        let mut worst = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g[(a, b)] * weight - target).norm());
            }
        }
        worst
    }

    /// `|Σ_ℓ v_ℓ S_ℓ|` on the basis grid.
    pub fn eigenfunction_modulus(&self, v: &[Complex64], exec: Execution) -> Result<ThetaField, ThetaError> {
        self.eigenfunction_modulus_at(v, self.resolution, exec)
    }

    /// As [`Self::eigenfunction_modulus`] on a `res × res` grid.
    pub fn eigenfunction_modulus_at(
        &self,
        v: &[Complex64],
        res: usize,
        exec: Execution,
    ) -> Result<ThetaField, ThetaError> {
        let d = self.dim();
        if v.len() != d {
            return Err(ThetaError::DimensionMismatch {
                got: v.len(),
                expected: d,
            });
        }
        if res < 2 {
            return Err(ThetaError::InvalidResolution(res));
        }
        // column j holds p = j/res
        let columns = exec.map(res, |j| {
            let p = j as f64 / res as f64;
            let (lo, hi) = self.n_range(p);
            let coeffs: Vec<(f64, Complex64)> = (lo..=hi)
                .map(|n| {
                    let c = v[n.rem_euclid(d as i64) as usize] * (self.norm * self.gaussian(n, p));
                    (n.rem_euclid(res as i64) as f64 / res as f64, c)
                })
                .filter(|(_, c)| *c != Complex64::new(0.0, 0.0))
                .collect();
            (0..res)
                .map(|i| {
                    coeffs
                        .iter()
                        .map(|&(step, c)| c * Complex64::cis(TAU * (step * i as f64).fract()))
                        .sum::<Complex64>()
                        .norm()
                })
                .collect::<Vec<f64>>()
        });
        let mut values = vec![0.0; res * res];
        for (j, col) in columns.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                values[i * res + j] = x;
            }
        }
        Ok(ThetaField {
            k: self.k(),
            resolution: res,
            values,
        })
    }
}

/// Nonnegative field on the grid `(i/res, j/res)`, stored with `q` outer.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaField {
    pub k: usize,
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl ThetaField {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.resolution + j]
    }

    /// `Σ |f|² · 4π/res²`.
    pub fn mass(&self) -> f64 {
        let w = 2.0 * TAU / (self.resolution * self.resolution) as f64;
        self.values.iter().map(|x| x * x).sum::<f64>() * w
    }

    /// Grid point of the largest value, as `(q, p)`.
    pub fn argmax(&self) -> (f64, f64) {
        let (idx, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        let r = self.resolution;
        ((idx / r) as f64 / r as f64, (idx % r) as f64 / r as f64)
    }

    /// Field CSV `q,p,value` with `q` as the outer loop.
    pub fn to_csv(&self) -> String {
        let r = self.resolution;
        let mut out = String::with_capacity(r * r * 72 + 16);
        out.push_str("q,p,value\n");
        for i in 0..r {
            let q = fmt_f64(i as f64 / r as f64);
            for j in 0..r {
                let _ = writeln!(
                    out,
                    "{q},{},{}",
                    fmt_f64(j as f64 / r as f64),
                    fmt_f64(self.values[i * r + j])
                );
            }
        }
        out
    }
}

/// Fraction of the field's grid mass within `|a₀ − E| ≤ |∇a₀|·delta`, a
/// first-order tube of half-width `delta` around the level set.
pub fn mass_concentration(field: &ThetaField, sym: &TrigSymbol, energy: f64, delta: f64) -> Result<f64, ThetaError> {
    let r = field.resolution;
    let mut tube = 0.0;
    let mut total = 0.0;
    let mut hits = 0usize;
    for i in 0..r {
        let q = i as f64 / r as f64;
        for j in 0..r {
            let p = j as f64 / r as f64;
            let m = field.values[i * r + j].powi(2);
            total += m;
            let g = sym.gradient(q, p);
            if (sym.eval(q, p) - energy).abs() <= g[0].hypot(g[1]) * delta {
                tube += m;
                hits += 1;
            }
        }
    }
    if hits == 0 {
        return Err(ThetaError::EmptyTube);
    }
    Ok(if total > 0.0 { tube / total } else { 0.0 })
}
