//! Toeplitz calculus on the plane, realized exactly on truncated Fock space.
//!
//! Symbols are polynomials in `z, z̄` whose coefficients are polynomials in
//! `ħ = 1/k`. The orthonormal basis is `φ_n ∝ z^n`, and the Toeplitz
//! operator of `z^a z̄^b` has the single band
//! `T[n+a−b, n] = (n+a)! / (sqrt((n+a−b)!·n!) · k^{(a+b)/2})`.
//! Because every operator here raises the degree by a bounded amount, the
//! truncated matrices agree with the infinite ones away from the top band.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::io::fmt_f64;
use crate::torus::matrix_to_csv;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate term (hbar order {order}, a = {a}, b = {b})")]
    DuplicateTerm { order: u32, a: u32, b: u32 },
    #[error("k must be positive")]
    InvalidK,
    #[error("truncation N = {n} is too small; need at least {needed}")]
    TruncationTooSmall { n: usize, needed: usize },
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `Σ c · ħ^order · z^a z̄^b`, keyed by `(order, a, b)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolySymbol {
    terms: BTreeMap<(u32, u32, u32), Complex64>,
}

impl PolySymbol {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::term(0, 0, 0, c)
    }

    /// `z^a z̄^b`.
    pub fn monomial(a: u32, b: u32) -> Self {
        Self::term(0, a, b, Complex64::new(1.0, 0.0))
    }

    /// `c · ħ^order · z^a z̄^b`.
    pub fn term(order: u32, a: u32, b: u32, c: Complex64) -> Self {
        let mut s = Self::zero();
        s.add_term(order, a, b, c);
        s
    }

    /// `x = (z + z̄)/√2`.
    pub fn x() -> Self {
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::term(0, 1, 0, r).plus(&Self::term(0, 0, 1, r))
    }

    /// `ξ = i(z − z̄)/√2`.
    pub fn xi() -> Self {
        let r = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
        Self::term(0, 1, 0, r).plus(&Self::term(0, 0, 1, -r))
    }

    /// Builds a symbol, rejecting repeated `(order, a, b)` keys.
    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, u32, Complex64)>) -> Result<Self, FockError> {
        let mut map = BTreeMap::new();
        for (order, a, b, c) in terms {
            if map.insert((order, a, b), c).is_some() {
                return Err(FockError::DuplicateTerm { order, a, b });
            }
        }
        let mut s = Self { terms: map };
        s.prune();
        Ok(s)
    }

    fn add_term(&mut self, order: u32, a: u32, b: u32, c: Complex64) {
        if c == ZERO {
            return;
        }
        let e = self.terms.entry((order, a, b)).or_insert(ZERO);
        *e += c;
        if *e == ZERO {
            self.terms.remove(&(order, a, b));
        }
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != ZERO);
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, u32, Complex64)> + '_ {
        self.terms.iter().map(|(&(o, a, b), &c)| (o, a, b, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, order: u32, a: u32, b: u32) -> Complex64 {
        self.terms.get(&(order, a, b)).copied().unwrap_or(ZERO)
    }

    /// Highest `ħ` power present.
    pub fn hbar_degree(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
    }

    /// Lowest `ħ` power present (`None` for the zero symbol).
    pub fn hbar_valuation(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.0).min()
    }

    /// `max(a, b)` over all terms.
    pub fn band(&self) -> usize {
        self.terms.keys().map(|k| k.1.max(k.2) as usize).max().unwrap_or(0)
    }

    /// `max(a + b)` over all terms.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(|k| (k.1 + k.2) as usize).max().unwrap_or(0)
    }

    /// Part of exact `ħ` order `order`, as an `ħ`-independent symbol.
    pub fn hbar_part(&self, order: u32) -> Self {
        let mut s = Self::zero();
        for (o, a, b, c) in self.terms() {
            if o == order {
                s.add_term(0, a, b, c);
            }
        }
        s
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut s = self.clone();
        for (o, a, b, c) in other.terms() {
            s.add_term(o, a, b, c);
        }
        s
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, f: Complex64) -> Self {
        let mut s = Self::zero();
        for (o, a, b, c) in self.terms() {
            s.add_term(o, a, b, c * f);
        }
        s
    }

    /// Multiplies by `ħ^shift`.
    pub fn shift_hbar(&self, shift: u32) -> Self {
        let mut s = Self::zero();
        for (o, a, b, c) in self.terms() {
            s.add_term(o + shift, a, b, c);
        }
        s
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut s = Self::zero();
        for (o1, a1, b1, c1) in self.terms() {
            for (o2, a2, b2, c2) in other.terms() {
                s.add_term(o1 + o2, a1 + a2, b1 + b2, c1 * c2);
            }
        }
        s
    }

    /// `∂_z^i ∂_z̄^j`.
    pub fn derivative(&self, i: u32, j: u32) -> Self {
        let mut s = Self::zero();
        for (o, a, b, c) in self.terms() {
            if a >= i && b >= j {
                let f = falling(a, i) * falling(b, j);
                s.add_term(o, a - i, b - j, c * f);
            }
        }
        s
    }

    /// `Δ = ∂_z ∂_z̄`.
    pub fn laplacian(&self) -> Self {
        self.derivative(1, 1)
    }

    /// `{f, g} = i(∂_z̄ f ∂_z g − ∂_z f ∂_z̄ g) = ∂_ξ f ∂_x g − ∂_x f ∂_ξ g`
    /// with `z = (x − iξ)/√2`.
    pub fn poisson(&self, other: &Self) -> Self {
        let t = self
            .derivative(0, 1)
            .mul(&other.derivative(1, 0))
            .minus(&self.derivative(1, 0).mul(&other.derivative(0, 1)));
        t.scale(Complex64::new(0.0, 1.0))
    }

    /// Sets `ħ = 1/k`, leaving an `ħ`-independent symbol.
    pub fn at_k(&self, k: f64) -> Self {
        let mut s = Self::zero();
        for (o, a, b, c) in self.terms() {
            s.add_term(0, a, b, c * k.powi(-(o as i32)));
        }
        s
    }

    /// Value at `z` with `ħ = 1/k`.
    pub fn eval(&self, z: Complex64, k: f64) -> Complex64 {
        let zb = z.conj();
        self.terms()
            .map(|(o, a, b, c)| c * k.powi(-(o as i32)) * z.powu(a) * zb.powu(b))
            .sum()
    }

    /// Maximum coefficient modulus.
    pub fn max_coeff(&self) -> f64 {
        self.terms().map(|t| t.3.norm()).fold(0.0, f64::max)
    }

    /// Lines `hbar_order a b re im`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, FockError> {
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| FockError::Parse {
                line: idx + 1,
                msg: msg.to_string(),
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err("expected 5 fields: hbar_order a b re im"));
            }
            let int = |s: &str| s.parse::<u32>().map_err(|_| err("orders and powers must be nonnegative integers"));
            let real = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err("coefficients must be finite reals"))
            };
            terms.push((int(f[0])?, int(f[1])?, int(f[2])?, Complex64::new(real(f[3])?, real(f[4])?)));
        }
        Self::from_terms(terms)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# hbar_order a b re im\n");
        for (o, a, b, c) in self.terms() {
            let _ = writeln!(out, "{o} {a} {b} {} {}", fmt_f64(c.re), fmt_f64(c.im));
        }
        out
    }
}

/// `a(a−1)…(a−i+1)`.
fn falling(a: u32, i: u32) -> f64 {
    (0..i).map(|t| (a - t) as f64).product()
}

/// `exp(s·ħΔ)` applied exactly (the series terminates on polynomials).
fn heat(sym: &PolySymbol, s: f64) -> PolySymbol {
    let mut out = sym.clone();
    let mut term = sym.clone();
    let mut l = 1u32;
    loop {
        term = term.laplacian().shift_hbar(1).scale(Complex64::new(s / l as f64, 0.0));
        if term.is_zero() {
            return out;
        }
        out = out.plus(&term);
        l += 1;
    }
}

/// Covariant symbol `exp(ħΔ)a` of the operator with contravariant symbol
/// `a`, kept symbolic in `ħ`.
pub fn covariant_from_contravariant(sym: &PolySymbol) -> PolySymbol {
    heat(sym, 1.0)
}

/// Inverse of [`covariant_from_contravariant`].
pub fn contravariant_from_covariant(sym: &PolySymbol) -> PolySymbol {
    heat(sym, -1.0)
}

/// Covariant symbol at a fixed `k`.
pub fn covariant_at_k(sym: &PolySymbol, k: f64) -> PolySymbol {
    covariant_from_contravariant(sym).at_k(k)
}

/// Contravariant symbol of the product: `Σ_ℓ (−ħ)^ℓ/ℓ! ∂_z^ℓ A ∂_z̄^ℓ B`.
pub fn compose_symbols(a: &PolySymbol, b: &PolySymbol) -> PolySymbol {
    let mut out = PolySymbol::zero();
    let mut fact = 1.0;
    for l in 0u32.. {
        if l > 0 {
            fact *= l as f64;
        }
        let da = a.derivative(l, 0);
        let db = b.derivative(0, l);
        if da.is_zero() || db.is_zero() {
            break;
        }
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        out = out.plus(&da.mul(&db).shift_hbar(l).scale(Complex64::new(sign / fact, 0.0)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalizationDirection {
    /// Contravariant → normalized: apply `Id + ħΔ/2`.
    ToNormalized,
    /// Normalized → contravariant: apply `(Id + ħΔ/2)⁻¹ = Σ (−ħΔ/2)^ℓ`.
    FromNormalized,
}

/// Converts between contravariant and normalized symbols, exactly.
pub fn normalized_symbol(sym: &PolySymbol, direction: NormalizationDirection) -> PolySymbol {
    let half = Complex64::new(0.5, 0.0);
    match direction {
        NormalizationDirection::ToNormalized => sym.plus(&sym.laplacian().shift_hbar(1).scale(half)),
        NormalizationDirection::FromNormalized => {
            let mut out = sym.clone();
            let mut term = sym.clone();
            loop {
                term = term.laplacian().shift_hbar(1).scale(-half);
                if term.is_zero() {
                    return out;
                }
                out = out.plus(&term);
            }
        }
    }
}

/// `σ_norm(AB) − a₀b₀ − (ħ/2i){a₀, b₀}` where `A`, `B` have normalized
/// symbols `a₀`, `b₀`. Symbolic in `ħ`; vanishes below order `ħ²`.
pub fn star_bracket_defect(a0: &PolySymbol, b0: &PolySymbol) -> PolySymbol {
    use NormalizationDirection::*;
    let a = normalized_symbol(a0, FromNormalized);
    let b = normalized_symbol(b0, FromNormalized);
    let prod = normalized_symbol(&compose_symbols(&a, &b), ToNormalized);
    // ħ/2i = −iħ/2
    let bracket = a0.poisson(b0).shift_hbar(1).scale(Complex64::new(0.0, -0.5));
    prod.minus(&a0.mul(b0)).minus(&bracket)
}

#[derive(Clone, Debug)]
pub struct StarBracketCheck {
    pub defect: PolySymbol,
    pub point: Complex64,
    /// `(k, |defect(point)|)`.
    pub values: Vec<(f64, f64)>,
}

impl StarBracketCheck {
    /// `|d(k_first)| / |d(k_last)|`.
    pub fn ratio(&self) -> f64 {
        self.values[0].1 / self.values.last().unwrap().1
    }
}

/// Evaluates [`star_bracket_defect`] at `point` for each `k`.
pub fn star_bracket_check(a0: &PolySymbol, b0: &PolySymbol, point: Complex64, k_list: &[f64]) -> StarBracketCheck {
    let defect = star_bracket_defect(a0, b0);
    let values = k_list.iter().map(|&k| (k, defect.eval(point, k).norm())).collect();
    StarBracketCheck { defect, point, values }
}

/// Matrix on `φ_0..φ_N` of a Toeplitz operator with polynomial symbol.
#[derive(Clone, Debug)]
pub struct FockOperator {
    k: f64,
    matrix: DMatrix<Complex64>,
    interior_band: usize,
}

impl FockOperator {
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Truncation order `N`.
    pub fn truncation(&self) -> usize {
        self.matrix.nrows() - 1
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Indices `≥ N − interior_band` may differ from the infinite operator.
    pub fn interior_band(&self) -> usize {
        self.interior_band
    }

    /// Largest index unaffected by truncation.
    pub fn interior_end(&self) -> usize {
        self.truncation().saturating_sub(self.interior_band)
    }

    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.matrix)
    }
}

/// `ln` of `(n+a)!/sqrt(m!·n!)` with `m = n+a−b`, as a sum over the
/// `a + b` factors so that `(a,b,n)` and its adjoint agree bitwise.
fn log_entry(m: usize, n: usize, top: usize) -> f64 {
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    let s_lo: f64 = (lo + 1..=top).map(|i| (i as f64).ln()).sum();
    let s_hi: f64 = (hi + 1..=top).map(|i| (i as f64).ln()).sum();
    0.5 * (s_lo + s_hi)
}

fn add_monomial(out: &mut DMatrix<Complex64>, a: usize, b: usize, k: f64, coeff: Complex64) {
    let dim = out.nrows();
    let log_k = 0.5 * (a + b) as f64 * k.ln();
    for n in 0..dim {
        if n + a < b {
            continue;
        }
        let m = n + a - b;
        if m >= dim {
            continue;
        }
        out[(m, n)] += coeff * (log_entry(m, n, n + a) - log_k).exp();
    }
}

/// Toeplitz operator of `z^a z̄^b` on `φ_0..φ_N`.
pub fn quantize_monomial(a: u32, b: u32, k: f64, n: usize) -> Result<FockOperator, FockError> {
    quantize(&PolySymbol::monomial(a, b), k, n)
}

/// Toeplitz operator of a contravariant symbol, with `ħ = 1/k`.
pub fn quantize(sym: &PolySymbol, k: f64, n: usize) -> Result<FockOperator, FockError> {
    if !(k > 0.0) {
        return Err(FockError::InvalidK);
    }
    let needed = sym.degree();
    if n < needed {
        return Err(FockError::TruncationTooSmall { n, needed });
    }
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for (o, a, b, c) in sym.terms() {
        add_monomial(&mut m, a as usize, b as usize, k, c * k.powi(-(o as i32)));
    }
    Ok(FockOperator {
        k,
        matrix: m,
        interior_band: sym.band(),
    })
}

/// `diag(k⁻¹(n + ½))`, the harmonic oscillator `k⁻¹(z∂_z + ½)`.
pub fn harmonic_oscillator(k: f64, n: usize) -> Result<FockOperator, FockError> {
    if !(k > 0.0) {
        return Err(FockError::InvalidK);
    }
    let m = DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if i == j {
            Complex64::new((i as f64 + 0.5) / k, 0.0)
        } else {
            ZERO
        }
    });
    Ok(FockOperator {
        k,
        matrix: m,
        interior_band: 0,
    })
}

/// `max |Op(A ⋆ B) − Op(A)·Op(B)|` over indices `≤ N − band`, where the band
/// is the widest `max(a, b)` among `A`, `B` and their product symbol.
pub fn verify_composition(a: &PolySymbol, b: &PolySymbol, k: f64, n: usize) -> Result<f64, FockError> {
    let c = compose_symbols(a, b);
    let band = a.band().max(b.band()).max(c.band());
    let needed = a.degree() + b.degree() + 2;
    if n < needed {
        return Err(FockError::TruncationTooSmall { n, needed });
    }
    let qa = quantize(a, k, n)?;
    let qb = quantize(b, k, n)?;
    let qc = quantize(&c, k, n)?;
    let prod = qa.matrix() * qb.matrix();
    let end = n - band;
    let mut worst = 0.0f64;
    for i in 0..=end {
        for j in 0..=end {
            worst = worst.max((qc.matrix()[(i, j)] - prod[(i, j)]).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn covariant_of_z2zb2() {
        let s = covariant_from_contravariant(&PolySymbol::monomial(2, 2));
        assert_eq!(s.coeff(0, 2, 2), c(1.0));
        assert_eq!(s.coeff(1, 1, 1), c(4.0));
        assert_eq!(s.coeff(2, 0, 0), c(2.0));
        assert_eq!(s.terms().count(), 3);
    }

    #[test]
    fn holomorphic_symbols_are_heat_invariant() {
        let z3 = PolySymbol::monomial(3, 0);
        assert_eq!(covariant_from_contravariant(&z3), z3);
    }

    #[test]
    fn compose_z_zbar() {
        let s = compose_symbols(&PolySymbol::monomial(1, 0), &PolySymbol::monomial(0, 1));
        assert_eq!(s.coeff(0, 1, 1), c(1.0));
        assert_eq!(s.coeff(1, 0, 0), c(-1.0));
        let t = compose_symbols(&PolySymbol::monomial(0, 1), &PolySymbol::monomial(1, 0));
        assert_eq!(t, PolySymbol::monomial(1, 1));
    }

    #[test]
    fn normalization_of_oscillator() {
        let q = PolySymbol::monomial(1, 1).minus(&PolySymbol::term(1, 0, 0, c(0.5)));
        let n = normalized_symbol(&q, NormalizationDirection::ToNormalized);
        assert_eq!(n, PolySymbol::monomial(1, 1));
    }

    #[test]
    fn entries_of_z_and_zbar() {
        let z = quantize_monomial(1, 0, 4.0, 5).unwrap();
        let zb = quantize_monomial(0, 1, 4.0, 5).unwrap();
        for n in 0..5 {
            let expected = ((n + 1) as f64 / 4.0).sqrt();
            assert!((z.matrix()[(n + 1, n)].re - expected).abs() < 1e-15);
            assert!((zb.matrix()[(n, n + 1)].re - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn large_index_entries_stay_finite() {
        let t = quantize_monomial(3, 2, 10.0, 1000).unwrap();
        let v = t.matrix()[(1000, 999)].re;
        // (1002)!/sqrt(1000!·999!)/10^{5/2} = sqrt(1001·1002 · 1000·1001·1002)/10^{2.5}
        let exact = (1001.0f64 * 1002.0 * 1000.0 * 1001.0 * 1002.0).sqrt() / 10f64.powf(2.5);
        assert!(((v - exact) / exact).abs() < 1e-13);
    }

    #[test]
    fn text_round_trip() {
        let s = PolySymbol::from_terms([(0, 1, 1, c(1.0)), (1, 0, 0, Complex64::new(-0.5, 0.25))]).unwrap();
        assert_eq!(PolySymbol::parse(&s.to_text()).unwrap(), s);
        assert!(matches!(
            PolySymbol::parse("0 1 1 1 0\n0 1 1 2 0"),
            Err(FockError::DuplicateTerm { .. })
        ));
        assert!(matches!(PolySymbol::parse("0 1 x 1 0"), Err(FockError::Parse { line: 1, .. })));
    }

    #[test]
    fn truncation_guard() {
        assert!(matches!(
            quantize_monomial(2, 2, 1.0, 3),
            Err(FockError::TruncationTooSmall { .. })
        ));
        assert!(matches!(
            verify_composition(&PolySymbol::monomial(1, 0), &PolySymbol::monomial(0, 1), 1.0, 3),
            Err(FockError::TruncationTooSmall { .. })
        ));
    }
}
