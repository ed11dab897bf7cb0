//! Matrix-vector operators, the power method with deflation, and truncated
//! Taylor exponentials.
//!
//! Operators are only accessed through [`MatVec::apply`]. Small operators may
//! be materialised internally to evaluate `A^t g` by repeated squaring, which
//! yields the same vector as `t` successive products up to rounding.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{axpy, dot, gemv, norm, project_out, scale};
use crate::rng::{gaussian_vec, Rng};

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator is not flagged positive semidefinite")]
    NotPsd,
}

/// A linear map `R^dim → R^dim` accessed by products.
pub trait MatVec {
    fn dim(&self) -> usize;
    /// `y ← A x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn is_psd(&self) -> bool {
        true
    }
    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: MatVec + ?Sized> MatVec for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn is_psd(&self) -> bool {
        (**self).is_psd()
    }
}

impl<T: MatVec + ?Sized> MatVec for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn is_psd(&self) -> bool {
        (**self).is_psd()
    }
}

impl<T: MatVec + ?Sized> MatVec for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
    fn is_psd(&self) -> bool {
        (**self).is_psd()
    }
}

/// Shared, thread-safe operator handle.
pub type SharedOp = Arc<dyn MatVec + Send + Sync>;

/// Operator backed by an explicit square matrix.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    psd: bool,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "operator matrix must be square");
        Self { matrix, psd: true }
    }

    pub fn general(matrix: DMatrix<f64>) -> Self {
        let mut s = Self::new(matrix);
        s.psd = false;
        s
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl MatVec for DenseOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        gemv(&self.matrix, x, y)
    }
    fn is_psd(&self) -> bool {
        self.psd
    }
}

/// Operator given by a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
    psd: bool,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, psd: true }
    }
}

impl<F: Fn(&[f64], &mut [f64])> MatVec for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
    fn is_psd(&self) -> bool {
        self.psd
    }
}

/// `Σ_i w_i C_i C_iᵀ` for factor matrices `C_i` (`dim × r_i`).
#[derive(Debug, Clone)]
pub struct FactorSum {
    dim: usize,
    factors: Arc<Vec<DMatrix<f64>>>,
    weights: Vec<f64>,
}

impl FactorSum {
    pub fn new(dim: usize, factors: Arc<Vec<DMatrix<f64>>>, weights: Vec<f64>) -> Self {
        assert_eq!(factors.len(), weights.len());
        Self { dim, factors, weights }
    }

    /// Upper bound on the spectral norm: `Σ |w_i| ‖C_i‖_F²`.
    pub fn trace_bound(&self) -> f64 {
        self.factors
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w.abs() * c.norm_squared())
            .sum()
    }
}

impl MatVec for FactorSum {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (c, &w) in self.factors.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let rows = c.nrows();
            let data = c.as_slice();
            for j in 0..c.ncols() {
                let col = &data[j * rows..(j + 1) * rows];
                let s = w * dot(col, x);
                axpy(s, col, y);
            }
        }
    }
    fn is_psd(&self) -> bool {
        self.weights.iter().all(|w| *w >= 0.0)
    }
}

/// `P⊥ A P⊥` where `P⊥` removes the span of an orthonormal basis.
pub struct Deflated<'a, A: ?Sized> {
    inner: &'a A,
    basis: &'a [Vec<f64>],
}

impl<'a, A: MatVec + ?Sized> Deflated<'a, A> {
    pub fn new(inner: &'a A, basis: &'a [Vec<f64>]) -> Self {
        Self { inner, basis }
    }
}

impl<A: MatVec + ?Sized> MatVec for Deflated<'_, A> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut xp = x.to_vec();
        project_out(self.basis, &mut xp);
        self.inner.apply(&xp, y);
        project_out(self.basis, y);
    }
    fn is_psd(&self) -> bool {
        self.inner.is_psd()
    }
}

/// Dense matrix of an operator, assembled column by column.
pub fn materialize(a: &dyn MatVec) -> DMatrix<f64> {
    let n = a.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        a.apply(&e, &mut y);
        m.set_column(j, &nalgebra::DVector::from_column_slice(&y));
        e[j] = 0.0;
    }
    m
}

/// Constant `L` in the iteration count of the power method.
pub const POWER_CONSTANT: f64 = 8.0;
/// Below this norm the iterate is treated as the image of a zero operator.
pub const ZERO_OPERATOR_THRESHOLD: f64 = 1e-30;
/// Largest dimension for which repeated squaring is considered.
pub const SQUARING_DIM_LIMIT: usize = 128;

/// `t = ceil(L (ln d + ln 1/δ + ln 1/ε) / ε)`, at least one.
pub fn power_iterations(dim: usize, eps: f64, delta: f64) -> usize {
    let d = dim.max(1) as f64;
    let t = POWER_CONSTANT * (d.ln() + (1.0 / delta).ln() + (1.0 / eps).ln()) / eps;
    (t.ceil() as usize).max(1)
}

/// How `A^t g` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerStrategy {
    /// Squaring for small operators with many iterations, products otherwise.
    #[default]
    Auto,
    /// `t` successive products with per-step normalisation.
    Iterate,
    /// Materialise `A` and form `A^t g` by binary powering.
    Squaring,
}

impl PowerStrategy {
    fn use_squaring(self, dim: usize, t: usize) -> bool {
        match self {
            PowerStrategy::Iterate => false,
            PowerStrategy::Squaring => true,
            PowerStrategy::Auto => {
                let lg = (t as f64).log2().ceil().max(1.0);
                dim <= SQUARING_DIM_LIMIT && (t as f64) > dim as f64 * (1.0 + 2.0 * lg)
            }
        }
    }
}

/// Result of the power method.
#[derive(Debug, Clone)]
pub struct PowerOutcome {
    pub vector: Vec<f64>,
    /// `vᵀ A v`.
    pub rayleigh: f64,
    /// Set when `A` acts as the zero operator on the iterate.
    pub zero_operator: bool,
    pub iterations: usize,
}

fn check_unit_interval(name: &str, v: f64) -> Result<(), SpectralError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(SpectralError::InvalidParameter(format!("{name} must lie in (0,1), got {v}")))
    }
}

fn canonical_unit(dim: usize, avoid: &[Vec<f64>]) -> Vec<f64> {
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        project_out(avoid, &mut e);
        let n = norm(&e);
        if n > 1e-8 {
            scale(1.0 / n, &mut e);
            return e;
        }
    }
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    e
}

/// Power method: `v = A^t g / ‖A^t g‖` for a Gaussian start `g`.
pub fn power_method(a: &dyn MatVec, eps: f64, delta: f64, rng: &mut Rng) -> Result<PowerOutcome, SpectralError> {
    power_method_with(a, eps, delta, rng, PowerStrategy::Auto)
}

/// [`power_method`] with an explicit evaluation strategy.
pub fn power_method_with(
    a: &dyn MatVec,
    eps: f64,
    delta: f64,
    rng: &mut Rng,
    strategy: PowerStrategy,
) -> Result<PowerOutcome, SpectralError> {
    check_unit_interval("eps", eps)?;
    check_unit_interval("delta", delta)?;
    if !a.is_psd() {
        return Err(SpectralError::NotPsd);
    }
    let dim = a.dim();
    if dim == 0 {
        return Err(SpectralError::InvalidParameter("dimension must be positive".into()));
    }
    let t = power_iterations(dim, eps, delta);
    let g = gaussian_vec(rng, dim);
    if strategy.use_squaring(dim, t) {
        let m = materialize(a);
        Ok(power_dense(&m, g, t, &[]))
    } else {
        Ok(power_iterate(a, g, t, &[]))
    }
}

fn zero_outcome(dim: usize, avoid: &[Vec<f64>], a_apply: impl Fn(&[f64]) -> Vec<f64>, t: usize) -> PowerOutcome {
    let v = canonical_unit(dim, avoid);
    let av = a_apply(&v);
    PowerOutcome { rayleigh: dot(&v, &av), vector: v, zero_operator: true, iterations: t }
}

fn power_iterate(a: &dyn MatVec, mut v: Vec<f64>, t: usize, avoid: &[Vec<f64>]) -> PowerOutcome {
    let dim = v.len();
    let n0 = norm(&v);
    if n0 > 0.0 {
        scale(1.0 / n0, &mut v);
    }
    let mut y = vec![0.0; dim];
    for _ in 0..t {
        a.apply(&v, &mut y);
        let ny = norm(&y);
        if !(ny >= ZERO_OPERATOR_THRESHOLD) {
            return zero_outcome(dim, avoid, |x| a.apply_vec(x), t);
        }
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = yi / ny;
        }
    }
    a.apply(&v, &mut y);
    PowerOutcome { rayleigh: dot(&v, &y), vector: v, zero_operator: false, iterations: t }
}

fn power_dense(m: &DMatrix<f64>, g: Vec<f64>, t: usize, avoid: &[Vec<f64>]) -> PowerOutcome {
    let dim = g.len();
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; dim];
        gemv(m, x, &mut y);
        y
    };
    let mut v = g;
    let n0 = norm(&v);
    if n0 > 0.0 {
        scale(1.0 / n0, &mut v);
    }
    let first = apply(&v);
    if !(norm(&first) >= ZERO_OPERATOR_THRESHOLD) {
        return zero_outcome(dim, avoid, apply, t);
    }
    let mut p = m.clone();
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            let mut y = vec![0.0; dim];
            gemv(&p, &v, &mut y);
            let ny = norm(&y);
            if !(ny > 0.0) || !ny.is_finite() {
                return zero_outcome(dim, avoid, apply, t);
            }
            scale(1.0 / ny, &mut y);
            v = y;
        }
        e >>= 1;
        if e > 0 {
            let sq = &p * &p;
            let f = sq.norm();
            if !(f > 0.0) || !f.is_finite() {
                break;
            }
            p = (&sq + sq.transpose()) * (0.5 / f);
        }
    }
    let av = apply(&v);
    PowerOutcome { rayleigh: dot(&v, &av), vector: v, zero_operator: false, iterations: t }
}

/// Top-`m` approximate eigenpairs, defining the sandwich
/// `Ã = Σ λ̃_i v_i v_iᵀ + P⊥ A P⊥`.
#[derive(Debug, Clone)]
pub struct SpectralSandwich {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub eps: f64,
    pub delta: f64,
    pub zero_operator: bool,
}

impl SpectralSandwich {
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    /// `Ã x`, using one product with the source operator.
    pub fn apply(&self, source: &dyn MatVec, x: &[f64]) -> Result<Vec<f64>, SpectralError> {
        sandwich_apply(self, source, x)
    }

    /// Dense `Ã`.
    pub fn assemble(&self, source: &dyn MatVec) -> DMatrix<f64> {
        let a = materialize(source);
        let n = a.nrows();
        let mut p = DMatrix::identity(n, n);
        for v in &self.vectors {
            let c = nalgebra::DVector::from_column_slice(v);
            p -= &c * c.transpose();
        }
        let mut out = &p * a * &p;
        for (l, v) in self.values.iter().zip(&self.vectors) {
            let c = nalgebra::DVector::from_column_slice(v);
            out += &c * c.transpose() * *l;
        }
        (&out + out.transpose()) * 0.5
    }
}

/// Top-`m` eigenpairs by power method with deflation; each component uses
/// accuracy `ε/(2m)` and failure probability `δ/(2m)`.
pub fn pca_topk(a: &dyn MatVec, m: usize, eps: f64, delta: f64, rng: &mut Rng) -> Result<SpectralSandwich, SpectralError> {
    pca_topk_with(a, m, eps, delta, rng, PowerStrategy::Auto)
}

/// [`pca_topk`] with an explicit evaluation strategy.
pub fn pca_topk_with(
    a: &dyn MatVec,
    m: usize,
    eps: f64,
    delta: f64,
    rng: &mut Rng,
    strategy: PowerStrategy,
) -> Result<SpectralSandwich, SpectralError> {
    check_unit_interval("eps", eps)?;
    check_unit_interval("delta", delta)?;
    if !a.is_psd() {
        return Err(SpectralError::NotPsd);
    }
    let dim = a.dim();
    if m == 0 || m > dim {
        return Err(SpectralError::InvalidParameter(format!("component count {m} out of range 1..={dim}")));
    }
    let ec = eps / (2.0 * m as f64);
    let dc = delta / (2.0 * m as f64);
    let t = power_iterations(dim, ec, dc);
    let dense = if strategy.use_squaring(dim, t) { Some(materialize(a)) } else { None };
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut values = Vec::with_capacity(m);
    let mut any_zero = false;
    for _ in 0..m {
        let g = gaussian_vec(rng, dim);
        let out = match &dense {
            Some(full) => {
                let defl = deflate_dense(full, &vectors);
                power_dense(&defl, g, t, &vectors)
            }
            None => {
                let op = Deflated::new(a, &vectors);
                power_iterate(&op, g, t, &vectors)
            }
        };
        any_zero |= out.zero_operator;
        let mut v = out.vector;
        project_out(&vectors, &mut v);
        let nv = norm(&v);
        if nv > 1e-12 {
            scale(1.0 / nv, &mut v);
        } else {
            v = canonical_unit(dim, &vectors);
        }
        let op = Deflated::new(a, &vectors);
        let lam = dot(&v, &op.apply_vec(&v)).max(0.0);
        values.push(lam);
        vectors.push(v);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    Ok(SpectralSandwich {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: order.iter().map(|&i| vectors[i].clone()).collect(),
        eps,
        delta,
        zero_operator: any_zero,
    })
}

fn deflate_dense(a: &DMatrix<f64>, basis: &[Vec<f64>]) -> DMatrix<f64> {
    if basis.is_empty() {
        return a.clone();
    }
    let n = a.nrows();
    let mut p = DMatrix::identity(n, n);
    for v in basis {
        let c = nalgebra::DVector::from_column_slice(v);
        p -= &c * c.transpose();
    }
    let out = &p * a * &p;
    (&out + out.transpose()) * 0.5
}

/// `Ã x = Σ λ̃_i ⟨v_i, x⟩ v_i + P⊥ A P⊥ x`.
pub fn sandwich_apply(s: &SpectralSandwich, source: &dyn MatVec, x: &[f64]) -> Result<Vec<f64>, SpectralError> {
    let n = source.dim();
    if x.len() != n {
        return Err(SpectralError::DimensionMismatch { expected: n, got: x.len() });
    }
    if s.dim() != 0 && s.dim() != n {
        return Err(SpectralError::DimensionMismatch { expected: n, got: s.dim() });
    }
    let op = Deflated::new(source, &s.vectors);
    let mut y = op.apply_vec(x);
    for (l, v) in s.values.iter().zip(&s.vectors) {
        axpy(l * dot(v, x), v, &mut y);
    }
    Ok(y)
}

/// Truncation degree `max{⌈e² κ⌉, ⌈ln(2/ε)⌉}`.
pub fn taylor_degree(kappa: f64, eps: f64) -> usize {
    let e2 = std::f64::consts::E * std::f64::consts::E;
    let a = (e2 * kappa).ceil();
    let b = (2.0 / eps).ln().ceil();
    (a.max(b).max(1.0)) as usize
}

/// Truncated Taylor series `e^{-s} Σ_{i≤degree} B^i / i!` of a PSD operator,
/// with an optional log-scale shift `s` that keeps large exponents finite.
#[derive(Debug, Clone)]
pub struct ExpOperator<B> {
    base: B,
    kappa: f64,
    degree: usize,
    eps: f64,
    log_shift: f64,
}

/// Taylor exponential of `B` with `‖B‖ ≤ κ` and accuracy `ε`.
pub fn exp_operator<B: MatVec>(b: B, kappa: f64, eps: f64) -> Result<ExpOperator<B>, SpectralError> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(SpectralError::InvalidParameter(format!("kappa must be finite and >= 0, got {kappa}")));
    }
    check_unit_interval("eps", eps)?;
    Ok(ExpOperator { degree: taylor_degree(kappa, eps), base: b, kappa, eps, log_shift: 0.0 })
}

impl<B: MatVec> ExpOperator<B> {
    /// Same series multiplied by `e^{-s}`.
    pub fn with_log_shift(mut self, s: f64) -> Self {
        self.log_shift = s;
        self
    }

    /// Replaces the truncation degree.
    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree.max(1);
        self
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn log_shift(&self) -> f64 {
        self.log_shift
    }

    pub fn base(&self) -> &B {
        &self.base
    }
}

impl<B: MatVec> MatVec for ExpOperator<B> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = x.len();
        let c0 = (-self.log_shift).exp();
        let mut term: Vec<f64> = x.iter().map(|v| v * c0).collect();
        y.copy_from_slice(&term);
        let mut next = vec![0.0; n];
        for i in 1..=self.degree {
            self.base.apply(&term, &mut next);
            let inv = 1.0 / i as f64;
            for (t, nx) in term.iter_mut().zip(&next) {
                *t = nx * inv;
            }
            for (yi, t) in y.iter_mut().zip(&term) {
                *yi += t;
            }
        }
    }
    fn is_psd(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dense_eig, dense_expm, DenseSym};
    use crate::rng::rng_from_seed;

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng_from_seed(seed);
        let a = DMatrix::from_column_slice(n, n, &gaussian_vec(&mut r, n * n));
        &a * a.transpose() / n as f64
    }

    fn min_eig(m: &DMatrix<f64>) -> f64 {
        let e = dense_eig(&DenseSym::new((m + m.transpose()) * 0.5).unwrap()).unwrap();
        *e.values.last().unwrap()
    }

    #[test]
    fn iteration_count_formula() {
        let t = power_iterations(10, 0.1, 0.01);
        let want = (8.0 * (10f64.ln() + 100f64.ln() + 10f64.ln()) / 0.1).ceil() as usize;
        assert_eq!(t, want);
    }

    #[test]
    fn power_method_dominant_diagonal() {
        let a = DenseOperator::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0])));
        for strategy in [PowerStrategy::Iterate, PowerStrategy::Squaring] {
            let mut r = rng_from_seed(3);
            let out = power_method_with(&a, 0.05, 0.01, &mut r, strategy).unwrap();
            assert!(out.vector[0].abs() >= 0.99);
            assert!(!out.zero_operator);
        }
    }

    #[test]
    fn power_method_identity() {
        let a = DenseOperator::new(DMatrix::identity(5, 5));
        let mut r = rng_from_seed(1);
        let out = power_method(&a, 0.1, 0.1, &mut r).unwrap();
        assert!((out.rayleigh - 1.0).abs() < 1e-12);
        assert!((norm(&out.vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_method_random_psd_rayleigh_bound() {
        for seed in 0..10 {
            let m = random_psd(20, seed);
            let l1 = dense_eig(&DenseSym::new(m.clone()).unwrap()).unwrap().values[0];
            let a = DenseOperator::new(m);
            let mut r = rng_from_seed(100 + seed);
            let out = power_method(&a, 0.1, 0.01, &mut r).unwrap();
            assert!(out.rayleigh >= 0.8 * l1);
        }
    }

    #[test]
    fn squaring_and_iteration_agree() {
        let m = random_psd(12, 77);
        let a = DenseOperator::new(m);
        let mut r1 = rng_from_seed(5);
        let mut r2 = rng_from_seed(5);
        let x = power_method_with(&a, 0.05, 0.05, &mut r1, PowerStrategy::Iterate).unwrap();
        let y = power_method_with(&a, 0.05, 0.05, &mut r2, PowerStrategy::Squaring).unwrap();
        let c = dot(&x.vector, &y.vector).abs();
        assert!(c > 1.0 - 1e-8, "cosine {c}");
    }

    #[test]
    fn zero_operator_is_flagged() {
        let a = DenseOperator::new(DMatrix::zeros(4, 4));
        for strategy in [PowerStrategy::Iterate, PowerStrategy::Squaring] {
            let mut r = rng_from_seed(2);
            let out = power_method_with(&a, 0.1, 0.1, &mut r, strategy).unwrap();
            assert!(out.zero_operator);
            assert_eq!(out.rayleigh, 0.0);
            assert!((norm(&out.vector) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_validation() {
        let a = DenseOperator::new(DMatrix::identity(2, 2));
        let mut r = rng_from_seed(0);
        assert!(power_method(&a, 0.0, 0.1, &mut r).is_err());
        assert!(power_method(&a, 0.1, 1.0, &mut r).is_err());
        assert!(pca_topk(&a, 3, 0.1, 0.1, &mut r).is_err());
        let g = DenseOperator::general(DMatrix::identity(2, 2));
        assert_eq!(power_method(&g, 0.1, 0.1, &mut r).unwrap_err(), SpectralError::NotPsd);
    }

    #[test]
    fn pca_on_diagonal() {
        let a = DenseOperator::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 3.0, 1.0])));
        let mut r = rng_from_seed(8);
        let s = pca_topk(&a, 2, 0.05, 0.01, &mut r).unwrap();
        assert!((s.values[0] - 5.0).abs() <= 0.1 * 5.0);
        assert!((s.values[1] - 3.0).abs() <= 0.1 * 3.0);
    }

    #[test]
    fn pca_zero_operator() {
        let a = DenseOperator::new(DMatrix::zeros(3, 3));
        let mut r = rng_from_seed(8);
        let s = pca_topk(&a, 2, 0.05, 0.01, &mut r).unwrap();
        assert!(s.zero_operator);
        assert!(s.values.iter().all(|v| *v == 0.0));
        assert!(s.assemble(&a).norm() == 0.0);
        assert!(dot(&s.vectors[0], &s.vectors[1]).abs() < 1e-15);
    }

    fn sandwich_holds(m: &DMatrix<f64>, s: &SpectralSandwich, k: usize, eps: f64) -> bool {
        let a = DenseOperator::new(m.clone());
        let at = s.assemble(&a);
        let up = &at * (1.0 + eps).powi(k as i32) - m;
        let lo = m - &at * (1.0 - eps).powi(k as i32);
        let tol = -1e-8 * m.norm();
        min_eig(&up) >= tol && min_eig(&lo) >= tol
    }

    #[test]
    fn pca_sandwich_random() {
        for seed in 0..6 {
            let m = random_psd(30, seed);
            let a = DenseOperator::new(m.clone());
            let mut r = rng_from_seed(seed + 50);
            let s = pca_topk(&a, 5, 0.05, 0.05, &mut r).unwrap();
            assert!(sandwich_holds(&m, &s, 5, 0.05));
            for i in 0..5 {
                for j in 0..5 {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot(&s.vectors[i], &s.vectors[j]) - want).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn pca_iterate_path_also_sandwiches() {
        let m = random_psd(10, 4);
        let a = DenseOperator::new(m.clone());
        let mut r = rng_from_seed(1);
        let s = pca_topk_with(&a, 2, 0.2, 0.1, &mut r, PowerStrategy::Iterate).unwrap();
        assert!(sandwich_holds(&m, &s, 2, 0.2));
    }

    #[test]
    fn sandwich_apply_examples() {
        let a = DenseOperator::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0])));
        let s = SpectralSandwich { values: vec![2.0], vectors: vec![vec![1.0, 0.0]], eps: 0.1, delta: 0.1, zero_operator: false };
        assert_eq!(sandwich_apply(&s, &a, &[1.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(sandwich_apply(&s, &a, &[0.0, 1.0]).unwrap(), vec![0.0, 3.0]);
        assert!(sandwich_apply(&s, &a, &[1.0]).is_err());
    }

    #[test]
    fn sandwich_apply_matches_dense_assembly() {
        let m = random_psd(9, 12);
        let a = DenseOperator::new(m);
        let mut r = rng_from_seed(3);
        let s = pca_topk(&a, 3, 0.1, 0.1, &mut r).unwrap();
        let dense = s.assemble(&a);
        let x = gaussian_vec(&mut r, 9);
        let y = sandwich_apply(&s, &a, &x).unwrap();
        let mut want = vec![0.0; 9];
        gemv(&dense, &x, &mut want);
        for (p, q) in y.iter().zip(&want) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let z = DenseOperator::new(DMatrix::zeros(3, 3));
        let e = exp_operator(&z, 0.0, 0.1).unwrap();
        assert_eq!(e.apply_vec(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn exp_scalar_bounds() {
        let b = DenseOperator::new(DMatrix::from_element(1, 1, 1.0));
        let e = exp_operator(&b, 1.0, 0.01).unwrap();
        let v = e.apply_vec(&[1.0])[0];
        let ee = std::f64::consts::E;
        assert!(v <= ee && v >= 0.99 * ee);
        assert!(exp_operator(&b, -1.0, 0.1).is_err());
    }

    #[test]
    fn exp_sandwich_vs_dense() {
        let mut m = random_psd(15, 31);
        let l1 = dense_eig(&DenseSym::new(m.clone()).unwrap()).unwrap().values[0];
        m *= 3.0 / l1;
        let b = DenseOperator::new(m.clone());
        let e = exp_operator(&b, 3.0, 0.05).unwrap();
        let bh = materialize(&e);
        let ex = dense_expm(&DenseSym::new(m).unwrap()).unwrap().into_matrix();
        let tol = -1e-8 * ex.norm();
        assert!(min_eig(&(&ex - &bh)) >= tol);
        assert!(min_eig(&(&bh - &ex * 0.95)) >= tol);
    }

    #[test]
    fn log_shift_scales_output() {
        let b = DenseOperator::new(DMatrix::from_element(1, 1, 2.0));
        let e = exp_operator(&b, 2.0, 0.01).unwrap();
        let plain = e.apply_vec(&[1.0])[0];
        let shifted = e.clone().with_log_shift(2.0).apply_vec(&[1.0])[0];
        assert!((shifted - plain * (-2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn factor_sum_matches_dense() {
        let mut r = rng_from_seed(6);
        let f: Vec<DMatrix<f64>> = (0..3).map(|_| DMatrix::from_column_slice(4, 2, &gaussian_vec(&mut r, 8))).collect();
        let w = vec![0.5, 1.0, 2.0];
        let dense: DMatrix<f64> = f.iter().zip(&w).map(|(c, wi)| c * c.transpose() * *wi).fold(DMatrix::zeros(4, 4), |a, b| a + b);
        let op = FactorSum::new(4, Arc::new(f), w);
        assert!((materialize(&op) - dense).norm() < 1e-12);
    }

    #[test]
    fn deterministic_under_seed() {
        let m = random_psd(16, 2);
        let a = DenseOperator::new(m);
        let s1 = pca_topk(&a, 3, 0.1, 0.1, &mut rng_from_seed(9)).unwrap();
        let s2 = pca_topk(&a, 3, 0.1, 0.1, &mut rng_from_seed(9)).unwrap();
        assert_eq!(s1.values, s2.values);
        assert_eq!(s1.vectors, s2.vectors);
    }
}
