//! Gaussian Johnson–Lindenstrauss sketches for batches of inner products
//! `⟨U_i U_iᵀ, exp(B)⟩` and for traces `Σ_j c_jᵀ exp(B) c_j`.
//!
//! The exponential is split in halves: with `T` the truncated Taylor series of
//! `exp(B/2)`, `⟨U Uᵀ, exp(B)⟩ ≈ ‖T U‖_F²`, and the sketch estimates
//! `‖Π T U‖_F²` for a Gaussian `Π` with `l` rows.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{dot, norm_sq};
use crate::rng::{fill_gaussian, Rng};
use crate::spectral::{exp_operator, MatVec, SpectralError};

/// Constant `c` in `l = ⌈c (ln m + ln n + ln 1/δ) / ε²⌉`.
pub const JL_CONSTANT: f64 = 64.0;

#[derive(Debug, Error, PartialEq)]
pub enum SketchError {
    #[error("{name} must lie in (0, 1/4), got {value}")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("target {index} has {got} rows, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Dense Gaussian sketch with i.i.d. `N(0, 1/l)` entries, stored row-major.
#[derive(Debug, Clone)]
pub struct SketchMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Number of sketch rows for `m` targets in dimension `n`.
pub fn jl_rows(m: usize, n: usize, eps: f64, delta: f64) -> usize {
    let m = m.max(1) as f64;
    let n = n.max(1) as f64;
    let l = JL_CONSTANT * (m.ln() + n.ln() + (1.0 / delta).ln()) / (eps * eps);
    (l.ceil() as usize).max(1)
}

impl SketchMatrix {
    pub fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let mut data = vec![0.0; rows * cols];
        fill_gaussian(rng, &mut data, 1.0 / (rows as f64).sqrt());
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `Π x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data.chunks_exact(self.cols).map(|r| dot(r, x)).collect()
    }

    /// `‖Π x‖²`.
    pub fn sq_norm_of(&self, x: &[f64]) -> f64 {
        norm_sq(&self.apply(x))
    }

    /// `Πᵀ Π`, useful when many vectors are sketched against the same `Π`.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.cols;
        let mut g = DMatrix::zeros(n, n);
        for r in self.data.chunks_exact(n) {
            for a in 0..n {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                for b in a..n {
                    g[(a, b)] += ra * r[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }
}

/// How the sketch is realised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SketchMode {
    /// Always draw the Gaussian `Π`.
    #[default]
    Gaussian,
    /// Use the identity embedding (exact norms) whenever `l` would not be
    /// smaller than the ambient dimension.
    Compressing,
}

/// Exponent input: a PSD operator `B` with `‖B‖ ≤ κ` and a log-scale shift
/// `s`; estimates refer to `e^{-s} exp(B)`.
#[derive(Clone, Copy)]
pub struct ExpInput<'a> {
    pub op: &'a dyn MatVec,
    pub kappa: f64,
    pub log_shift: f64,
}

impl<'a> ExpInput<'a> {
    pub fn new(op: &'a dyn MatVec, kappa: f64) -> Self {
        Self { op, kappa, log_shift: 0.0 }
    }

    pub fn shifted(mut self, s: f64) -> Self {
        self.log_shift = s;
        self
    }
}

/// Degree of the Taylor series of `exp(B/2)`: `max{⌈4e²κ⌉, ⌈ln(4/ε)⌉}`.
pub fn half_exp_degree(kappa: f64, eps: f64) -> usize {
    let e2 = std::f64::consts::E * std::f64::consts::E;
    let a = (4.0 * e2 * kappa).ceil();
    let b = (4.0 / eps).ln().ceil();
    a.max(b).max(1.0) as usize
}

fn check_quarter(name: &'static str, value: f64) -> Result<(), SketchError> {
    if value > 0.0 && value < 0.25 {
        Ok(())
    } else {
        Err(SketchError::OutOfRange { name, value })
    }
}

struct Half<'a> {
    op: &'a dyn MatVec,
}

impl MatVec for Half<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.op.apply(x, y);
        y.iter_mut().for_each(|v| *v *= 0.5);
    }
}

/// Estimates `z_i ≈ ⟨U_i U_iᵀ, exp(B)⟩` for every target factor `U_i`
/// (column-major `n × r_i`).
pub fn estimate_inner_products(
    b: ExpInput<'_>,
    targets: &[DMatrix<f64>],
    eps: f64,
    delta: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>, SketchError> {
    estimate_inner_products_with(b, targets, eps, delta, rng, SketchMode::Gaussian)
}

/// [`estimate_inner_products`] with an explicit sketch mode.
pub fn estimate_inner_products_with(
    b: ExpInput<'_>,
    targets: &[DMatrix<f64>],
    eps: f64,
    delta: f64,
    rng: &mut Rng,
    mode: SketchMode,
) -> Result<Vec<f64>, SketchError> {
    check_quarter("eps", eps)?;
    check_quarter("delta", delta)?;
    let n = b.op.dim();
    for (i, u) in targets.iter().enumerate() {
        if u.nrows() != n {
            return Err(SketchError::DimensionMismatch { index: i, expected: n, got: u.nrows() });
        }
    }
    let half = Half { op: b.op };
    let degree = half_exp_degree(b.kappa, eps);
    let t = exp_operator(&half, 0.5 * b.kappa, eps.min(0.5))?
        .with_degree(degree)
        .with_log_shift(0.5 * b.log_shift);
    let l = jl_rows(targets.len(), n, eps, delta);
    let total_cols: usize = targets.iter().map(|u| u.ncols()).sum();
    if mode == SketchMode::Compressing && l >= n {
        return Ok(targets
            .iter()
            .map(|u| (0..u.ncols()).map(|j| norm_sq(&t.apply_vec(u.column(j).as_slice()))).sum())
            .collect());
    }
    let pi = SketchMatrix::gaussian(l, n, rng);
    // With more columns than sketch rows the Gram matrix is the cheaper route.
    let gram = if total_cols > n { Some(pi.gram()) } else { None };
    let mut tmp = vec![0.0; n];
    Ok(targets
        .iter()
        .map(|u| {
            (0..u.ncols())
                .map(|j| {
                    let y = t.apply_vec(u.column(j).as_slice());
                    match &gram {
                        Some(g) => {
                            crate::linalg::gemv(g, &y, &mut tmp);
                            dot(&y, &tmp).max(0.0)
                        }
                        None => pi.sq_norm_of(&y),
                    }
                })
                .sum()
        })
        .collect())
}

/// Estimates `Σ_j c_jᵀ exp(B) c_j` for the columns `c_j` of `C`; with
/// `C = I` this is `Tr exp(B)`.
pub fn estimate_trace(b: ExpInput<'_>, c: &DMatrix<f64>, eps: f64, delta: f64, rng: &mut Rng) -> Result<f64, SketchError> {
    estimate_trace_with(b, c, eps, delta, rng, SketchMode::Gaussian)
}

/// [`estimate_trace`] with an explicit sketch mode.
pub fn estimate_trace_with(
    b: ExpInput<'_>,
    c: &DMatrix<f64>,
    eps: f64,
    delta: f64,
    rng: &mut Rng,
    mode: SketchMode,
) -> Result<f64, SketchError> {
    let z = estimate_inner_products_with(b, std::slice::from_ref(c), eps, delta, rng, mode)?;
    Ok(z[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dense_eig, dense_expm, DenseSym};
    use crate::rng::{gaussian_vec, rng_from_seed};
    use crate::spectral::DenseOperator;

    #[test]
    fn row_count_formula() {
        let l = jl_rows(5, 12, 0.1, 0.05);
        let want = (64.0 * (5f64.ln() + 12f64.ln() + 20f64.ln()) / 0.01).ceil() as usize;
        assert_eq!(l, want);
    }

    #[test]
    fn degree_formula() {
        assert_eq!(half_exp_degree(0.0, 0.1), (40f64).ln().ceil() as usize);
        assert_eq!(half_exp_degree(1.0, 0.1), (4.0 * std::f64::consts::E.powi(2)).ceil() as usize);
    }

    #[test]
    fn identity_exponential() {
        let z = DenseOperator::new(DMatrix::zeros(3, 3));
        let mut e1 = DMatrix::zeros(3, 1);
        e1[(0, 0)] = 1.0;
        let mut r = rng_from_seed(1);
        let v = estimate_inner_products(ExpInput::new(&z, 0.0), &[e1], 0.1, 0.05, &mut r).unwrap();
        assert!(v[0] >= 0.9 && v[0] <= 1.1);
        let tr = estimate_trace(ExpInput::new(&z, 0.0), &DMatrix::identity(3, 3), 0.1, 0.05, &mut r).unwrap();
        assert!(tr >= 2.7 && tr <= 3.3);
    }

    #[test]
    fn scalar_exponential() {
        let b = DenseOperator::new(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0])));
        let mut e1 = DMatrix::zeros(2, 1);
        e1[(0, 0)] = 1.0;
        let mut r = rng_from_seed(2);
        let v = estimate_inner_products(ExpInput::new(&b, 1.0), &[e1], 0.1, 0.05, &mut r).unwrap()[0];
        let e = std::f64::consts::E;
        assert!(v >= 0.9 * e && v <= 1.1 * e);
        let b2 = DenseOperator::new(DMatrix::identity(2, 2));
        let tr = estimate_trace(ExpInput::new(&b2, 1.0), &DMatrix::identity(2, 2), 0.1, 0.05, &mut r).unwrap();
        assert!(tr >= 0.9 * 2.0 * e && tr <= 1.1 * 2.0 * e);
    }

    #[test]
    fn random_targets_vs_dense() {
        let mut r = rng_from_seed(3);
        let a = DMatrix::from_column_slice(12, 12, &gaussian_vec(&mut r, 144));
        let mut m = &a * a.transpose();
        let l1 = dense_eig(&DenseSym::new(m.clone()).unwrap()).unwrap().values[0];
        m *= 1.5 / l1;
        let ex = dense_expm(&DenseSym::new(m.clone()).unwrap()).unwrap().into_matrix();
        let targets: Vec<DMatrix<f64>> = (0..5).map(|_| DMatrix::from_column_slice(12, 1, &gaussian_vec(&mut r, 12))).collect();
        let op = DenseOperator::new(m);
        let z = estimate_inner_products(ExpInput::new(&op, 1.5), &targets, 0.1, 0.05, &mut r).unwrap();
        for (zi, u) in z.iter().zip(&targets) {
            let want = (u.transpose() * &ex * u)[(0, 0)];
            assert!((zi / want - 1.0).abs() <= 0.1, "{zi} vs {want}");
        }
    }

    #[test]
    fn shift_rescales_estimates() {
        let b = DenseOperator::new(DMatrix::identity(2, 2) * 3.0);
        let c = DMatrix::identity(2, 2);
        let plain = estimate_trace_with(ExpInput::new(&b, 3.0), &c, 0.1, 0.05, &mut rng_from_seed(5), SketchMode::Compressing).unwrap();
        let shifted = estimate_trace_with(ExpInput::new(&b, 3.0).shifted(3.0), &c, 0.1, 0.05, &mut rng_from_seed(5), SketchMode::Compressing).unwrap();
        assert!((shifted - plain * (-3f64).exp()).abs() < 1e-9 * plain);
    }

    #[test]
    fn rejects_out_of_range() {
        let z = DenseOperator::new(DMatrix::zeros(2, 2));
        let c = DMatrix::identity(2, 2);
        let mut r = rng_from_seed(0);
        assert!(estimate_trace(ExpInput::new(&z, 0.0), &c, 0.3, 0.05, &mut r).is_err());
        assert!(estimate_trace(ExpInput::new(&z, 0.0), &c, 0.1, 0.25, &mut r).is_err());
        assert!(estimate_trace(ExpInput::new(&z, 0.0), &DMatrix::identity(3, 3), 0.1, 0.1, &mut r).is_err());
    }

    #[test]
    fn gram_matches_direct_norms() {
        let mut r = rng_from_seed(8);
        let pi = SketchMatrix::gaussian(50, 6, &mut r);
        let g = pi.gram();
        let x = gaussian_vec(&mut r, 6);
        let mut gx = vec![0.0; 6];
        crate::linalg::gemv(&g, &x, &mut gx);
        assert!((dot(&x, &gx) - pi.sq_norm_of(&x)).abs() < 1e-10);
    }
}
