//! Dense Hermitian eigenproblems with residual certificates.
//!
//! The decomposition itself is delegated to nalgebra's symmetric
//! eigensolver (Householder tridiagonalization + implicit QR). Real matrices,
//! which include every Harper operator, take the `f64` path. Every returned
//! pair is checked against `‖Hv − λv‖₂ ≤ 1e−10 · ‖H‖_max · dim`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::io::fmt_f64;
use crate::torus::{hermiticity_defect, TorusOperator};

/// Relative tolerance (times `‖H‖_max`, and `dim` for residuals) of the
/// Hermiticity precondition and of the eigenpair certificates.
pub const CERTIFICATE_TOL: f64 = 1e-10;
/// Imaginary parts up to this fraction of `‖H‖_max` count as rounding noise.
const REAL_PATH_TOL: f64 = 8.0 * f64::EPSILON;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is {rows}×{cols}, not square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds {bound:.3e}")]
    NotHermitian { defect: f64, bound: f64 },
    #[error("eigenpair {index} residual {residual:.3e} exceeds the certificate bound {bound:.3e}")]
    CertificateFailed {
        index: usize,
        residual: f64,
        bound: f64,
    },
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`; present when requested.
    pub eigenvectors: Option<DMatrix<Complex64>>,
    /// `‖Hv_j − λ_j v_j‖₂`.
    pub residuals: Vec<f64>,
    pub hermiticity_defect: f64,
    /// `max |V*V − I|`, computed when vectors are returned.
    pub orthonormality_defect: Option<f64>,
    /// `max |H_ij|`.
    pub max_entry: f64,
}

impl SpectrumResult {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Residual bound `1e−10 · ‖H‖_max · dim`.
    pub fn residual_bound(&self) -> f64 {
        CERTIFICATE_TOL * self.max_entry.max(f64::MIN_POSITIVE) * self.dim() as f64
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    /// `max |λ|`.
    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Number of eigenvalues `≤ level`.
    pub fn count_below(&self, level: f64) -> usize {
        self.eigenvalues.partition_point(|&x| x <= level)
    }

    /// Spectrum CSV `k,j,lambda,residual`.
    pub fn to_csv(&self, k: usize) -> String {
        let mut out = String::from("k,j,lambda,residual\n");
        self.append_csv_rows(k, &mut out);
        out
    }

    pub(crate) fn append_csv_rows(&self, k: usize, out: &mut String) {
        for (j, (l, r)) in self.eigenvalues.iter().zip(&self.residuals).enumerate() {
            let _ = writeln!(out, "{k},{j},{},{}", fmt_f64(*l), fmt_f64(*r));
        }
    }
}

/// Eigen-decomposition of a torus operator.
pub fn eigh_operator(op: &TorusOperator, want_vectors: bool) -> Result<SpectrumResult, SpectralError> {
    eigh(op.matrix(), want_vectors)
}

/// Full spectrum of a Hermitian matrix, certified.
pub fn eigh(h: &DMatrix<Complex64>, want_vectors: bool) -> Result<SpectrumResult, SpectralError> {
    let (rows, cols) = h.shape();
    if rows != cols {
        return Err(SpectralError::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(SpectralError::Empty);
    }
    let max_entry = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let defect = hermiticity_defect(h);
    let bound = CERTIFICATE_TOL * max_entry;
    if defect > bound {
        return Err(SpectralError::NotHermitian { defect, bound });
    }

    // imaginary parts at rounding level (e.g. from cancelling phases) take
    // the real path; the certificate below still uses the full matrix
    let is_real = h.iter().all(|z| z.im.abs() <= REAL_PATH_TOL * max_entry);
    let (values, vectors, residuals, ortho) = if is_real {
        real_path(h, want_vectors)
    } else {
        complex_path(h, want_vectors)
    };

    let result = SpectrumResult {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
        hermiticity_defect: defect,
        orthonormality_defect: ortho,
        max_entry,
    };
    let rb = result.residual_bound();
    if let Some((index, &residual)) = result
        .residuals
        .iter()
        .enumerate()
        .find(|(_, r)| !(**r <= rb))
    {
        return Err(SpectralError::CertificateFailed {
            index,
            residual,
            bound: rb,
        });
    }
    Ok(result)
}

type Decomposition = (Vec<f64>, Option<DMatrix<Complex64>>, Vec<f64>, Option<f64>);

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

fn real_path(h: &DMatrix<Complex64>, want_vectors: bool) -> Decomposition {
    // symmetrize exactly; the input passed the Hermiticity check
    let a = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| 0.5 * (h[(i, j)].re + h[(j, i)].re));
    let eig = SymmetricEigen::new(a.clone());
    let order = sorted_order(eig.eigenvalues.as_slice());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let v = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    // residuals against the input itself, split into real and imaginary parts
    let re = h.map(|z| z.re);
    let b = h.map(|z| z.im);
    let av = &re * &v;
    let bv = &b * &v;
    let residuals = (0..values.len())
        .map(|j| (av.column(j) - v.column(j) * values[j]).norm().hypot(bv.column(j).norm()))
        .collect();
    if !want_vectors {
        return (values, None, residuals, None);
    }
    let gram = v.transpose() * &v;
    let ortho = max_identity_defect_real(&gram);
    let vc = v.map(|x| Complex64::new(x, 0.0));
    (values, Some(vc), residuals, Some(ortho))
}

fn complex_path(h: &DMatrix<Complex64>, want_vectors: bool) -> Decomposition {
    let a = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let eig = SymmetricEigen::new(a.clone());
    let order = sorted_order(eig.eigenvalues.as_slice());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let v = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let av = h * &v;
    let residuals = (0..values.len())
        .map(|j| (av.column(j) - v.column(j) * Complex64::new(values[j], 0.0)).norm())
        .collect();
    if !want_vectors {
        return (values, None, residuals, None);
    }
    let gram = v.adjoint() * &v;
    let n = gram.nrows();
    let mut ortho = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    (values, Some(v), residuals, Some(ortho))
}

fn max_identity_defect_real(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// `max |λ|`, which for a Hermitian matrix is the operator norm.
pub fn operator_norm(h: &DMatrix<Complex64>) -> Result<f64, SpectralError> {
    Ok(eigh(h, false)?.spectral_radius())
}
