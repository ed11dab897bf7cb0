//! Small dense vector and matrix helpers shared by the numerical modules.

use nalgebra::DMatrix;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for i in 4 * chunks..a.len() {
        s0 += a[i] * b[i];
    }
    (s0 + s1) + (s2 + s3)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn scale(a: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= a;
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Removes from `x` its components along the orthonormal `basis`.
pub fn project_out(basis: &[Vec<f64>], x: &mut [f64]) {
    for v in basis {
        let c = dot(v, x);
        axpy(-c, v, x);
    }
}

/// `y = M x` for a column-major dense matrix.
pub fn gemv(m: &DMatrix<f64>, x: &[f64], y: &mut [f64]) {
    let (rows, cols) = m.shape();
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(y.len(), rows);
    y.iter_mut().for_each(|v| *v = 0.0);
    let data = m.as_slice();
    for (j, xj) in x.iter().enumerate() {
        if *xj != 0.0 {
            axpy(*xj, &data[j * rows..(j + 1) * rows], y);
        }
    }
}

/// Symmetric part `(M + Mᵀ)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order (LAPACK-style tridiagonal QR from nalgebra).
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let e = symmetrize(m).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (j, &i) in idx.iter().enumerate() {
        vecs.set_column(j, &e.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym_eigen_desc(m).0[0]
}

/// Sum of the `k` largest singular values of a symmetric matrix.
pub fn kyfan_sym(m: &DMatrix<f64>, k: usize) -> f64 {
    let (vals, _) = sym_eigen_desc(m);
    let mut s: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.iter().take(k).sum()
}

/// Trace norm of a symmetric matrix.
pub fn trace_norm_sym(m: &DMatrix<f64>) -> f64 {
    sym_eigen_desc(m).0.iter().map(|v| v.abs()).sum()
}

/// `V diag(f(λ)) Vᵀ`.
pub fn spectral_map(vals: &[f64], vecs: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = vecs.nrows();
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let c = f(l);
        scaled.column_mut(j).scale_mut(c);
    }
    let out = &scaled * vecs.transpose();
    debug_assert_eq!(out.nrows(), n);
    symmetrize(&out)
}

/// Gram matrix `C Cᵀ` of a factor.
pub fn outer_gram(c: &DMatrix<f64>) -> DMatrix<f64> {
    c * c.transpose()
}

/// `⟨C Cᵀ, M⟩ = Σ_j c_jᵀ M c_j` for a factor `C`.
pub fn factor_inner(c: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    let mut tmp = vec![0.0; m.nrows()];
    for j in 0..c.ncols() {
        let col = c.column(j);
        gemv(m, col.as_slice(), &mut tmp);
        s += dot(col.as_slice(), &tmp);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_axpy() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(dot(&a, &b), 35.0);
        let mut y = b;
        axpy(2.0, &a, &mut y);
        assert_eq!(y, [7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn eigen_sorted_descending() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 3.0]);
        let (vals, vecs) = sym_eigen_desc(&m);
        assert_eq!(vals.len(), 3);
        assert!((vals[0] - 5.0).abs() < 1e-12 && (vals[2] - 1.0).abs() < 1e-12);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((kyfan_sym(&m, 2) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn factor_inner_matches_trace() {
        let c = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let direct = (outer_gram(&c) * &m).trace();
        assert!((factor_inner(&c, &m) - direct).abs() < 1e-12);
    }
}
