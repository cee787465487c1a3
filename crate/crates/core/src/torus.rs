//! Quantized torus: clock and shift unitaries on `C^{2k}` and the Weyl-ordered
//! quantization of trigonometric symbols built from them.
//!
//! In the basis `ψ_ℓ, ℓ ∈ Z/2kZ`, the clock `M` acts by `M ψ_ℓ = w^ℓ ψ_ℓ` and
//! the shift `L` by `L ψ_ℓ = ψ_{ℓ+1}`, with `w = exp(iπ/k)`. They satisfy
//! `M L = w L M`. The mode `exp(2πi(mq + np))` is quantized to
//! `w^{mn/2} L^m M^n`, which maps real symbols to Hermitian matrices.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::io::fmt_f64;
use crate::symbols::TrigSymbol;

#[derive(Debug, Error)]
pub enum TorusError {
    #[error("k must be a positive integer, got {0}")]
    InvalidK(i64),
}

/// Semiclassical parameter `k` (so `ħ = 1/k`) and the Hilbert dimension `2k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantumTorusParams {
    k: usize,
}

impl QuantumTorusParams {
    pub fn new(k: i64) -> Result<Self, TorusError> {
        if k >= 1 {
            Ok(Self { k: k as usize })
        } else {
            Err(TorusError::InvalidK(k))
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        2 * self.k
    }

    pub fn hbar(&self) -> f64 {
        1.0 / self.k as f64
    }

    /// `w = exp(iπ/k)`.
    pub fn w(&self) -> Complex64 {
        self.half_w_pow(2)
    }

    /// `w^{x/2} = exp(iπx/2k)` with the exponent reduced exactly mod `4k`.
    pub fn half_w_pow(&self, x: i64) -> Complex64 {
        let period = 4 * self.k as i64;
        let r = x.rem_euclid(period);
        Complex64::cis(PI * r as f64 / (2 * self.k) as f64)
    }
}

#[derive(Clone, Debug)]
pub struct TorusOperator {
    params: QuantumTorusParams,
    matrix: DMatrix<Complex64>,
    symbol: Option<TrigSymbol>,
}

impl TorusOperator {
    pub fn from_matrix(params: QuantumTorusParams, matrix: DMatrix<Complex64>) -> Self {
        assert_eq!(matrix.nrows(), params.dim());
        assert_eq!(matrix.ncols(), params.dim());
        Self {
            params,
            matrix,
            symbol: None,
        }
    }

    pub fn params(&self) -> QuantumTorusParams {
        self.params
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// The symbol this operator quantizes, if it came from one.
    pub fn symbol(&self) -> Option<&TrigSymbol> {
        self.symbol.as_ref()
    }

    /// `max |H − H*|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    /// Nonzero entries as `row,col,re,im` with a header line.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.matrix)
    }
}

pub fn hermiticity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Operator dump shared with the Fock model.
pub fn matrix_to_csv(m: &DMatrix<Complex64>) -> String {
    let mut out = String::from("row,col,re,im\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            if z.re != 0.0 || z.im != 0.0 {
                let _ = writeln!(out, "{i},{j},{},{}", fmt_f64(z.re), fmt_f64(z.im));
            }
        }
    }
    out
}

/// `M = diag(w⁰, …, w^{2k−1})`.
pub fn clock(params: QuantumTorusParams) -> TorusOperator {
    let d = params.dim();
    let mut m = DMatrix::zeros(d, d);
    for l in 0..d {
        m[(l, l)] = params.half_w_pow(2 * l as i64);
    }
    TorusOperator::from_matrix(params, m)
}

/// `L[ℓ+1 mod 2k, ℓ] = 1`.
pub fn shift(params: QuantumTorusParams) -> TorusOperator {
    let d = params.dim();
    let mut m = DMatrix::zeros(d, d);
    for l in 0..d {
        m[((l + 1) % d, l)] = Complex64::new(1.0, 0.0);
    }
    TorusOperator::from_matrix(params, m)
}

/// Adds `coeff · w^{mn/2} L^m M^n` into `out`. The product has a single
/// nonzero per column: `[ℓ+m, ℓ] = w^{mn/2 + nℓ}`.
fn add_mode(out: &mut DMatrix<Complex64>, params: QuantumTorusParams, m: i32, n: i32, coeff: Complex64) {
    let d = params.dim() as i64;
    let (m, n) = (m as i64, n as i64);
    for l in 0..d {
        let row = (l + m).rem_euclid(d) as usize;
        out[(row, l as usize)] += coeff * params.half_w_pow(m * n + 2 * n * l);
    }
}

/// Weyl-symmetrized quantization `Σ c_{m,n} w^{mn/2} L^m M^n`. A subprincipal
/// part, when present, enters with the factor `1/k`.
pub fn weyl_quantize(sym: &TrigSymbol, params: QuantumTorusParams) -> TorusOperator {
    let d = params.dim();
    let mut out = DMatrix::zeros(d, d);
    for md in sym.modes() {
        add_mode(&mut out, params, md.m, md.n, md.coeff);
    }
    for md in sym.sub_modes() {
        add_mode(&mut out, params, md.m, md.n, md.coeff * params.hbar());
    }
    TorusOperator {
        params,
        matrix: out,
        symbol: Some(sym.clone()),
    }
}

/// The Harper matrix `M + M* + L + L*`: diagonal `2cos(ℓπ/k)`, ones on the
/// cyclic off-diagonals. For `k = 1` the two off-diagonals coincide and add.
pub fn harper(params: QuantumTorusParams) -> TorusOperator {
    let d = params.dim();
    let k = params.k() as f64;
    let mut m = DMatrix::zeros(d, d);
    for l in 0..d {
        m[(l, l)] = Complex64::new(2.0 * (l as f64 * PI / k).cos(), 0.0);
        m[((l + 1) % d, l)] += Complex64::new(1.0, 0.0);
        m[(l, (l + 1) % d)] += Complex64::new(1.0, 0.0);
    }
    TorusOperator {
        params,
        matrix: m,
        symbol: Some(TrigSymbol::harper()),
    }
}
