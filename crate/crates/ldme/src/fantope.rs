//! Approximate entropic projection onto
//! `S = {(M, W) ⪰ 0 : Tr M + Tr W = 1, ‖W‖ ≤ Tr W / k}`.
//!
//! The projection is never formed densely. A [`ProjectionHandle`] stores a
//! few scalars, the top-`k` eigenpairs of `exp(G)` and shared references to
//! the exponential operators, and applies `M̃` or `W̃` to vectors on demand.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{axpy, dot, project_out};
use crate::rng::Rng;
use crate::sketch::{estimate_trace_with, ExpInput, SketchError, SketchMode};
use crate::spectral::{
    exp_operator, materialize, pca_topk_with, DenseOperator, MatVec, PowerStrategy, SharedOp, SpectralError,
};

/// Floor applied to eigenvalue estimates before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-30;

/// Trace-norm constant for the `M` part of the full projection (`C₁ k ε`).
pub const C1: f64 = 16.0;

/// Trace-norm constant for the `W` part of the full projection (`C₂ √(kε)`).
pub const C2: f64 = 8.0;

#[derive(Debug, Error)]
pub enum FantopeError {
    #[error("all eigenvalue estimates and the tail trace are zero")]
    Degenerate,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

/// `k τ = (1−ε) T + Σ_{i≤k} min(σ_i, τ)` on `τ ∈ [σ_k, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauEquation {
    /// Top-`k` eigenvalue estimates, descending.
    pub sigma: Vec<f64>,
    pub tail_trace: f64,
    pub eps: f64,
}

impl TauEquation {
    pub fn new(sigma: Vec<f64>, tail_trace: f64, eps: f64) -> Self {
        Self { sigma, tail_trace, eps }
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// `kτ − (1−ε)T − Σ min(σ_i, τ)`, strictly increasing for `τ ≥ σ_k`.
    pub fn residual(&self, tau: f64) -> f64 {
        self.k() as f64 * tau
            - (1.0 - self.eps) * self.tail_trace
            - self.sigma.iter().map(|s| s.min(tau)).sum::<f64>()
    }
}

/// Unique root of the threshold equation, found by scanning the breakpoints
/// `σ_1 ≥ σ_2 ≥ …`: with the `j` largest values capped the equation is linear
/// and `τ = ((1−ε)T + Σ_{i>j} σ_i)/(k−j)`.
pub fn solve_tau(eq: &TauEquation) -> Result<f64, FantopeError> {
    let k = eq.k();
    if k == 0 {
        return Err(FantopeError::InvalidParameter("empty eigenvalue list".into()));
    }
    if eq.sigma.windows(2).any(|w| w[0] < w[1]) || eq.sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(FantopeError::InvalidParameter("sigma must be nonnegative and sorted descending".into()));
    }
    if !(eq.tail_trace >= 0.0) || !(0.0..1.0).contains(&eq.eps) {
        return Err(FantopeError::InvalidParameter(format!(
            "tail trace {} and eps {} must satisfy T >= 0, 0 <= eps < 1",
            eq.tail_trace, eq.eps
        )));
    }
    if eq.tail_trace == 0.0 && eq.sigma[0] == 0.0 {
        return Err(FantopeError::Degenerate);
    }
    let base = (1.0 - eq.eps) * eq.tail_trace;
    let mut suffix: f64 = eq.sigma.iter().sum();
    for j in 0..k {
        let tau = (base + suffix) / (k - j) as f64;
        let upper = if j == 0 { f64::INFINITY } else { eq.sigma[j - 1] };
        if tau >= eq.sigma[j] && tau <= upper {
            return Ok(tau);
        }
        suffix -= eq.sigma[j];
    }
    // Rounding pushed every candidate out of its interval; the root is then
    // at the smallest breakpoint.
    Ok(eq.sigma[k - 1])
}

/// Tolerances and evaluation strategy shared by both projections.
#[derive(Debug, Clone, Copy)]
pub struct FantopeConfig {
    pub eps: f64,
    pub delta: f64,
    /// Sketch realisation for the trace estimates.
    pub sketch: SketchMode,
    pub power: PowerStrategy,
    /// Exponential operators up to this dimension are assembled densely once.
    pub materialize_limit: usize,
}

impl FantopeConfig {
    pub fn new(eps: f64, delta: f64) -> Self {
        Self { eps, delta, sketch: SketchMode::Compressing, power: PowerStrategy::Auto, materialize_limit: 64 }
    }

    fn check(&self, k: usize) -> Result<(), FantopeError> {
        let kk = (k * k) as f64;
        if !(self.eps > 0.0 && self.eps < 0.25 && self.eps * kk < 1.0) {
            return Err(FantopeError::InvalidParameter(format!(
                "eps = {} must lie in (0, 1/4) and below 1/k² = {}",
                self.eps,
                1.0 / kk
            )));
        }
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return Err(FantopeError::InvalidParameter(format!("delta = {} must lie in (0, 1/4)", self.delta)));
        }
        Ok(())
    }
}

/// Which block of the projection to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    M,
    W,
}

/// `e^{-s} exp(B)` either as a Taylor operator or assembled densely.
fn shifted_exp(b: SharedOp, kappa: f64, shift: f64, eps: f64, limit: usize) -> Result<SharedOp, FantopeError> {
    let op = exp_operator(b, kappa, eps)?.with_log_shift(shift);
    if op.dim() <= limit {
        let m = materialize(&op);
        Ok(Arc::new(DenseOperator::new((&m + m.transpose()) * 0.5)))
    } else {
        Ok(Arc::new(op))
    }
}

/// The `W` block: `c (Σ min(σ_i, τ) v_i v_iᵀ + h P⊥ Ŵ P⊥)` where `Ŵ` is the
/// (shifted) exponential of `G`.
#[derive(Clone)]
pub struct WPart {
    pub sigma: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub tau: f64,
    /// Normalisation `(1−4kε)/(kτ)`.
    pub scale: f64,
    /// Factor `1−2ε` on the deflated exponential.
    pub h_scale: f64,
    /// Estimated `Tr(P⊥ Ŵ P⊥)` before the `h_scale` factor.
    pub tail_trace: f64,
    /// Log-scale shift carried by `σ`, `τ` and `Ŵ`.
    pub log_shift: f64,
    exp_g: SharedOp,
}

impl WPart {
    pub fn dim(&self) -> usize {
        self.exp_g.dim()
    }

    pub fn k(&self) -> usize {
        self.sigma.len()
    }

    /// Unnormalised `Σ min(σ_i, τ) v_i v_iᵀ x + h P⊥ Ŵ P⊥ x`.
    fn apply_raw(&self, x: &[f64], y: &mut [f64]) {
        let mut xp = x.to_vec();
        project_out(&self.vectors, &mut xp);
        self.exp_g.apply(&xp, y);
        project_out(&self.vectors, y);
        y.iter_mut().for_each(|v| *v *= self.h_scale);
        for (s, v) in self.sigma.iter().zip(&self.vectors) {
            axpy(s.min(self.tau) * dot(v, x), v, y);
        }
    }

    /// `Σ_i ⟨v_i, D D ᵀ v_i⟩ min(σ_i, τ)` for a factor `D`: the explicit
    /// top-`k` part of `⟨W, D Dᵀ⟩` before scaling.
    pub fn top_inner(&self, d: &DMatrix<f64>) -> f64 {
        let rows = d.nrows();
        let data = d.as_slice();
        let mut acc = 0.0;
        for (s, v) in self.sigma.iter().zip(&self.vectors) {
            let mut q = 0.0;
            for j in 0..d.ncols() {
                let c = dot(&data[j * rows..(j + 1) * rows], v);
                q += c * c;
            }
            acc += s.min(self.tau) * q;
        }
        acc
    }

    pub fn exp_operator(&self) -> &SharedOp {
        &self.exp_g
    }
}

/// Implicit representation of an approximate projection.
#[derive(Clone)]
pub struct ProjectionHandle {
    pub gamma: f64,
    pub zeta: f64,
    /// Threshold in unshifted units.
    pub tau: f64,
    /// `e^γ/(e^γ+e^ζ)`.
    pub m_mass: f64,
    /// `e^ζ/(e^γ+e^ζ)`.
    pub w_mass: f64,
    /// `1/Z̃₁` in the shifted units of `exp_f`.
    m_norm: f64,
    exp_f: Option<SharedOp>,
    pub w: WPart,
}

impl ProjectionHandle {
    pub fn dims(&self) -> (usize, usize) {
        (self.exp_f.as_ref().map_or(0, |f| f.dim()), self.w.dim())
    }

    /// `M̃ x` (one exponential product) or `W̃ x` (one exponential product
    /// plus `O(km)`).
    pub fn apply(&self, side: Side, x: &[f64]) -> Result<Vec<f64>, FantopeError> {
        let (l, m) = self.dims();
        let want = if side == Side::M { l } else { m };
        if x.len() != want {
            return Err(FantopeError::DimensionMismatch { expected: want, got: x.len() });
        }
        let mut y = vec![0.0; want];
        match side {
            Side::M => {
                if let Some(f) = &self.exp_f {
                    f.apply(x, &mut y);
                    y.iter_mut().for_each(|v| *v *= self.m_mass * self.m_norm);
                }
            }
            Side::W => {
                self.w.apply_raw(x, &mut y);
                let c = self.w_mass * self.w.scale;
                y.iter_mut().for_each(|v| *v *= c);
            }
        }
        Ok(y)
    }

    /// Coefficient on the shifted `exp(F)` in `M̃`.
    pub fn m_coefficient(&self) -> f64 {
        self.m_mass * self.m_norm
    }

    /// Coefficient `β` on `Σ min(σ_i, τ) v_i v_iᵀ` in `W̃` (shifted units).
    pub fn beta(&self) -> f64 {
        self.w_mass * self.w.scale
    }

    /// Coefficient `β'` on the shifted `P⊥ exp(G) P⊥` in `W̃`.
    pub fn beta_prime(&self) -> f64 {
        self.w_mass * self.w.scale * self.w.h_scale
    }

    pub fn exp_f(&self) -> Option<&SharedOp> {
        self.exp_f.as_ref()
    }

    /// Operator view of one block.
    pub fn operator(self: &Arc<Self>, side: Side) -> SharedOp {
        Arc::new(HandleSide { h: Arc::clone(self), side })
    }

    /// Dense `(M̃, W̃)` for verification.
    pub fn assemble(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let h = Arc::new(self.clone());
        let (l, _) = self.dims();
        let m = if l == 0 { DMatrix::zeros(0, 0) } else { materialize(&*h.operator(Side::M)) };
        let w = materialize(&*h.operator(Side::W));
        ((&m + m.transpose()) * 0.5, (&w + w.transpose()) * 0.5)
    }
}

struct HandleSide {
    h: Arc<ProjectionHandle>,
    side: Side,
}

impl MatVec for HandleSide {
    fn dim(&self) -> usize {
        let (l, m) = self.h.dims();
        if self.side == Side::M {
            l
        } else {
            m
        }
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let out = self.h.apply(self.side, x).expect("dimension checked by caller");
        y.copy_from_slice(&out);
    }
}

/// Approximate maximiser of `⟨G, W⟩ + vNE(W)` over `{W ⪰ 0, Tr W = 1,
/// ‖W‖ ≤ 1/k}` for PSD `G` with `‖G‖ ≤ κ_G`.
pub fn simple_projection(
    g: SharedOp,
    kappa_g: f64,
    k: usize,
    cfg: &FantopeConfig,
    rng: &mut Rng,
) -> Result<WPart, FantopeError> {
    cfg.check(k)?;
    if !(kappa_g >= 0.0 && kappa_g.is_finite()) {
        return Err(FantopeError::InvalidParameter(format!("kappa_G must be finite and >= 0, got {kappa_g}")));
    }
    let m = g.dim();
    if k == 0 || k > m {
        return Err(FantopeError::InvalidParameter(format!("rank {k} out of range 1..={m}")));
    }
    let eps = cfg.eps;
    let exp_g = shifted_exp(Arc::clone(&g), kappa_g, kappa_g, eps, cfg.materialize_limit)?;
    let pca = pca_topk_with(&*exp_g, k, eps, cfg.delta / 2.0, rng, cfg.power)?;

    let mut p_perp = DMatrix::identity(m, m);
    for v in &pca.vectors {
        let c = nalgebra::DVector::from_column_slice(v);
        p_perp -= &c * c.transpose();
    }
    let tail = trace_of(&exp_g, &g, kappa_g, &p_perp, cfg, rng)?;
    let h_scale = 1.0 - 2.0 * eps;
    let eq = TauEquation::new(pca.values.clone(), h_scale * tail, eps);
    let tau = solve_tau(&eq)?;
    Ok(WPart {
        scale: (1.0 - 4.0 * k as f64 * eps) / (k as f64 * tau),
        sigma: pca.values,
        vectors: pca.vectors,
        tau,
        h_scale,
        tail_trace: tail,
        log_shift: kappa_g,
        exp_g,
    })
}

/// `Σ_j c_jᵀ E c_j` where `E = e^{-s} exp(B)`: a densely assembled `E` is
/// contracted directly, otherwise the sketch estimates it from `B`.
fn trace_of(
    exp: &SharedOp,
    base: &SharedOp,
    kappa: f64,
    c: &DMatrix<f64>,
    cfg: &FantopeConfig,
    rng: &mut Rng,
) -> Result<f64, FantopeError> {
    if exp.dim() <= cfg.materialize_limit && cfg.sketch == SketchMode::Compressing {
        let mut y = vec![0.0; exp.dim()];
        let mut acc = 0.0;
        for j in 0..c.ncols() {
            let col = c.column(j);
            exp.apply(col.as_slice(), &mut y);
            acc += dot(col.as_slice(), &y);
        }
        return Ok(acc.max(0.0));
    }
    let input = ExpInput::new(&**base, kappa).shifted(kappa);
    Ok(estimate_trace_with(input, c, cfg.eps, cfg.delta / 2.0, rng, cfg.sketch)?)
}

/// Approximate joint maximiser of `⟨F,M⟩ + ⟨G,W⟩ + vNE(M) + vNE(W)` over
/// `S`. `F` may have dimension zero, in which case all mass goes to `W`.
pub fn full_projection(
    f: SharedOp,
    kappa_f: f64,
    g: SharedOp,
    kappa_g: f64,
    k: usize,
    cfg: &FantopeConfig,
    rng: &mut Rng,
) -> Result<ProjectionHandle, FantopeError> {
    if !(kappa_f >= 0.0 && kappa_f.is_finite()) {
        return Err(FantopeError::InvalidParameter(format!("kappa_F must be finite and >= 0, got {kappa_f}")));
    }
    let w = simple_projection(g, kappa_g, k, cfg, rng)?;
    let kf = k as f64;
    let z2 = kf * w.tau;
    let log_ratio: f64 =
        w.sigma.iter().map(|s| s.max(LOG_FLOOR).ln() - s.min(w.tau).max(LOG_FLOOR).ln()).sum::<f64>() / kf;
    let zeta = z2.max(LOG_FLOOR).ln() + w.log_shift + log_ratio;

    let (exp_f, gamma, m_norm) = if f.dim() == 0 {
        (None, f64::NEG_INFINITY, 0.0)
    } else {
        let l = f.dim();
        let exp_f = shifted_exp(Arc::clone(&f), kappa_f, kappa_f, cfg.eps, cfg.materialize_limit)?;
        let z1 = trace_of(&exp_f, &f, kappa_f, &DMatrix::identity(l, l), cfg, rng)?.max(LOG_FLOOR);
        (Some(exp_f), z1.ln() + kappa_f, 1.0 / z1)
    };
    let m_mass = if exp_f.is_none() { 0.0 } else { 1.0 / (1.0 + (zeta - gamma).exp()) };
    Ok(ProjectionHandle {
        gamma,
        zeta,
        tau: w.tau * w.log_shift.exp(),
        m_mass,
        w_mass: 1.0 - m_mass,
        m_norm,
        exp_f,
        w,
    })
}

/// `h` applied to `x` on the chosen side.
pub fn projection_apply(h: &ProjectionHandle, side: Side, x: &[f64]) -> Result<Vec<f64>, FantopeError> {
    h.apply(side, x)
}

/// Dense `W̃` from a standalone [`simple_projection`] result.
pub fn assemble_w(w: &WPart) -> DMatrix<f64> {
    let m = w.dim();
    let mut out = DMatrix::zeros(m, m);
    let mut e = vec![0.0; m];
    let mut y = vec![0.0; m];
    for j in 0..m {
        e[j] = 1.0;
        w.apply_raw(&e, &mut y);
        for (i, v) in y.iter().enumerate() {
            out[(i, j)] = v * w.scale;
        }
        e[j] = 0.0;
    }
    (&out + out.transpose()) * 0.5
}
