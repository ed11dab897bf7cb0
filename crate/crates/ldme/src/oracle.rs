//! Dense reference implementations.
//!
//! Everything here is cubic (or worse) in the dimension and is meant for
//! validating the fast routines on small instances: a cyclic Jacobi
//! eigensolver, the matrix exponential, exact Ky-Fan norms, the closed-form
//! entropic projection onto the capped constraint set, and a projected
//! subgradient solver for the weighted min-max cost.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::cost::CostQuery;
use crate::linalg::{dot, sq_dist};

/// Default dimension cap for the dense routines.
pub const DEFAULT_CAP: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("dimension {dim} exceeds the oracle cap {cap}")]
    CapExceeded { dim: usize, cap: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("rank {k} out of range 1..={n}")]
    RankOutOfRange { k: usize, n: usize },
    #[error("budgets sum to {0}, the capped simplex of mass one is empty")]
    EmptyBudget(f64),
}

/// Dense real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSym(DMatrix<f64>);

impl DenseSym {
    /// Accepts `m` if it is symmetric to within `1e-12` relative; the stored
    /// matrix is the exact symmetric part.
    pub fn new(m: DMatrix<f64>) -> Result<Self, OracleError> {
        if m.nrows() != m.ncols() {
            return Err(OracleError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let scale = m.norm().max(f64::MIN_POSITIVE);
        let asym = (&m - m.transpose()).norm() / scale;
        if asym > 1e-12 {
            return Err(OracleError::NotSymmetric(asym));
        }
        Ok(Self((&m + m.transpose()) * 0.5))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigen {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        crate::linalg::spectral_map(&self.values, &self.vectors, f)
    }
}

fn check_cap(n: usize, cap: usize) -> Result<(), OracleError> {
    if n > cap {
        Err(OracleError::CapExceeded { dim: n, cap })
    } else {
        Ok(())
    }
}

/// Cyclic Jacobi eigensolver with the default cap.
pub fn dense_eig(m: &DenseSym) -> Result<Eigen, OracleError> {
    dense_eig_capped(m, DEFAULT_CAP)
}

/// Cyclic Jacobi eigensolver.
pub fn dense_eig_capped(m: &DenseSym, cap: usize) -> Result<Eigen, OracleError> {
    let n = m.dim();
    check_cap(n, cap)?;
    // Row-major working copy.
    let mut a: Vec<f64> = (0..n * n).map(|idx| m.0[(idx / n, idx % n)]).collect();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if total > 0.0 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
            if off.sqrt() <= 1e-17 * total {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for r in 0..n {
                        let arp = a[r * n + p];
                        let arq = a[r * n + q];
                        a[r * n + p] = c * arp - s * arq;
                        a[r * n + q] = s * arp + c * arq;
                    }
                    for r in 0..n {
                        let apr = a[p * n + r];
                        let aqr = a[q * n + r];
                        a[p * n + r] = c * apr - s * aqr;
                        a[q * n + r] = s * apr + c * aqr;
                    }
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    for r in 0..n {
                        let vrp = v[r * n + p];
                        let vrq = v[r * n + q];
                        v[r * n + p] = c * vrp - s * vrq;
                        v[r * n + q] = s * vrp + c * vrq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[r * n + i];
        }
    }
    Ok(Eigen { values, vectors })
}

/// `exp(M)` through the eigen-decomposition.
pub fn dense_expm(m: &DenseSym) -> Result<DenseSym, OracleError> {
    let e = dense_eig(m)?;
    Ok(DenseSym(e.map(f64::exp)))
}

/// Sum of the `k` largest singular values.
pub fn exact_kyfan_norm(m: &DenseSym, k: usize) -> Result<f64, OracleError> {
    let n = m.dim();
    if k == 0 || k > n {
        return Err(OracleError::RankOutOfRange { k, n });
    }
    let e = dense_eig(m)?;
    let mut s: Vec<f64> = e.values.iter().map(|x| x.abs()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s.iter().take(k).sum())
}

/// Threshold `ν` solving `k ν = Σ min(ν, λ_i)` for a spectrum sorted in
/// descending order. Located by bisection on the monotone residual and then
/// snapped to the closed form of the bracketing linear piece.
pub fn cap_threshold(lams: &[f64], k: usize) -> f64 {
    let m = lams.len();
    assert!(k >= 1 && k <= m);
    let residual = |nu: f64| k as f64 * nu - lams.iter().map(|&l| l.min(nu)).sum::<f64>();
    let total: f64 = lams.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, lams[0].max(total / k as f64));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = hi;
    if k == m {
        return lams[m - 1];
    }
    let capped = lams.iter().filter(|&&l| l > nu).count().min(k - 1);
    let rest: f64 = lams[capped..].iter().sum();
    rest / (k - capped) as f64
}

/// Closed-form entropic projection onto the constraint set
/// `{(M, W) ⪰ 0 : Tr M + Tr W = 1, ‖W‖ ≤ Tr W / k}`.
#[derive(Debug, Clone)]
pub struct ExactProjection {
    pub m: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub gamma: f64,
    pub zeta: f64,
    pub tau: f64,
    /// `e^γ / (e^γ + e^ζ)`, the trace of `M`.
    pub m_mass: f64,
}

/// Builds the exact projection from eigen-decompositions of `F` and `G`.
/// Shared by the oracle and by the dense solver backend.
pub fn projection_from_spectra(f: &Eigen, g: &Eigen, k: usize) -> ExactProjection {
    let lf = f.values.len();
    let lg = g.values.len();
    assert!(k >= 1 && k <= lg, "rank must satisfy 1 <= k <= m");
    let mut shift = f64::NEG_INFINITY;
    for &x in f.values.iter().chain(g.values.iter()) {
        shift = shift.max(x);
    }
    if !shift.is_finite() {
        shift = 0.0;
    }
    let ef: Vec<f64> = f.values.iter().map(|x| (x - shift).exp()).collect();
    let lam: Vec<f64> = g.values.iter().map(|x| (x - shift).exp()).collect();
    let nu = cap_threshold(&lam, k);
    let capped: Vec<f64> = lam.iter().map(|&l| l.min(nu)).collect();
    let z2: f64 = capped.iter().sum();
    let zeta_s = z2.ln()
        + lam
            .iter()
            .zip(&capped)
            .map(|(l, c)| if l > c { l.ln() - c.ln() } else { 0.0 })
            .sum::<f64>()
            / k as f64;
    let (gamma_s, m_mass) = if lf == 0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        let z1: f64 = ef.iter().sum();
        let gamma_s = z1.ln();
        (gamma_s, 1.0 / (1.0 + (zeta_s - gamma_s).exp()))
    };
    let m = if lf == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let z1: f64 = ef.iter().sum();
        let coef: Vec<f64> = ef.iter().map(|e| m_mass * e / z1).collect();
        weighted_outer(&f.vectors, &coef)
    };
    let coef: Vec<f64> = capped.iter().map(|c| (1.0 - m_mass) * c / z2).collect();
    let w = weighted_outer(&g.vectors, &coef);
    ExactProjection {
        m,
        w,
        gamma: gamma_s + shift,
        zeta: zeta_s + shift,
        tau: nu * shift.exp(),
        m_mass,
    }
}

fn weighted_outer(vecs: &DMatrix<f64>, coef: &[f64]) -> DMatrix<f64> {
    let mut scaled = vecs.clone();
    for (j, c) in coef.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*c);
    }
    let out = &scaled * vecs.transpose();
    (&out + out.transpose()) * 0.5
}

/// Exact maximiser of `⟨F,M⟩ + ⟨G,W⟩ + vNE(M) + vNE(W)` over the capped
/// constraint set. `F` may be empty (dimension zero), in which case all mass
/// goes to `W`.
pub fn exact_fantope_projection(f: &DenseSym, g: &DenseSym, k: usize) -> Result<ExactProjection, OracleError> {
    let m = g.dim();
    if k == 0 || k > m {
        return Err(OracleError::RankOutOfRange { k, n: m });
    }
    let fe = dense_eig(f)?;
    let ge = dense_eig(g)?;
    Ok(projection_from_spectra(&fe, &ge, k))
}

/// Euclidean projection of `y` onto `{w : 0 ≤ w ≤ b, Σ w = mass}`.
pub fn project_capped_simplex(y: &[f64], b: &[f64], mass: f64) -> Vec<f64> {
    let total: f64 = b.iter().sum();
    if total <= mass {
        return b.to_vec();
    }
    let f = |s: f64| -> f64 { y.iter().zip(b).map(|(&yi, &bi)| (yi - s).clamp(0.0, bi)).sum() };
    let mut lo = y.iter().zip(b).map(|(yi, bi)| yi - bi).fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    y.iter().zip(b).map(|(&yi, &bi)| (yi - s).clamp(0.0, bi)).collect()
}

/// Ky-Fan `k`-norm of `Σ w_i z_i z_iᵀ` and the top-`k` eigenvectors.
fn weighted_kyfan(z: &[Vec<f64>], w: &[f64], k: usize) -> (f64, Eigen) {
    let d = z.first().map_or(0, |v| v.len());
    let mut s = DMatrix::zeros(d, d);
    for (zi, &wi) in z.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for a in 0..d {
            let za = wi * zi[a];
            for b in 0..d {
                s[(a, b)] += za * zi[b];
            }
        }
    }
    let e = dense_eig(&DenseSym(s)).expect("size checked by caller");
    let val = e.values.iter().take(k).map(|v| v.max(0.0)).sum();
    (val, e)
}

/// Number of projected subgradient steps used by [`exact_cost_small`].
pub const SUBGRADIENT_STEPS: usize = 10_000;

/// Minimises `w ↦ ‖Σ w_i z_i z_iᵀ‖_k` over `{0 ≤ w ≤ b, Σ w = 1}` with
/// `z_i = x_i − ν` by projected subgradient descent from the budget-proportional
/// start. Returns the best value seen and its weights.
pub fn exact_cost_small(q: &CostQuery) -> Result<(f64, Vec<f64>), OracleError> {
    let total: f64 = q.b.iter().sum();
    let start: Vec<f64> = q.b.iter().map(|bi| bi / total.max(f64::MIN_POSITIVE)).collect();
    exact_cost_small_from(q, &start)
}

/// [`exact_cost_small`] started from an arbitrary point (projected first).
pub fn exact_cost_small_from(q: &CostQuery, start: &[f64]) -> Result<(f64, Vec<f64>), OracleError> {
    let n = q.x.n();
    let d = q.x.d();
    if n > 20 || d > 8 {
        return Err(OracleError::CapExceeded { dim: n.max(d), cap: if n > 20 { 20 } else { 8 } });
    }
    let k = q.k.min(d).max(1);
    let total: f64 = q.b.iter().sum();
    if total < 1.0 - 1e-12 {
        return Err(OracleError::EmptyBudget(total));
    }
    let z: Vec<Vec<f64>> = (0..n)
        .map(|i| q.x.row(i).iter().zip(q.nu).map(|(a, b)| a - b).collect())
        .collect();
    // Diameter of the capped simplex: at most sqrt(2) and at most ‖b‖.
    let diam = (2.0f64).sqrt().min(dot(q.b, q.b).sqrt() * 2.0);
    let mut w = project_capped_simplex(start, q.b, 1.0);
    let mut best = f64::INFINITY;
    let mut best_w = w.clone();
    for t in 1..=SUBGRADIENT_STEPS {
        let (val, e) = weighted_kyfan(&z, &w, k);
        if val < best {
            best = val;
            best_w = w.clone();
        }
        let g: Vec<f64> = z
            .iter()
            .map(|zi| {
                (0..k)
                    .map(|j| {
                        let c: f64 = (0..d).map(|a| zi[a] * e.vectors[(a, j)]).sum();
                        c * c
                    })
                    .sum()
            })
            .collect();
        let gnorm = dot(&g, &g).sqrt();
        if gnorm == 0.0 {
            break;
        }
        let step = diam / (t as f64).sqrt() / gnorm;
        let y: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - step * gi).collect();
        w = project_capped_simplex(&y, q.b, 1.0);
    }
    Ok((best, best_w))
}

/// Squared distances between a point and every row, used by tests.
pub fn sq_dists(rows: &[Vec<f64>], p: &[f64]) -> Vec<f64> {
    rows.iter().map(|r| sq_dist(r, p)).collect()
}
