//! Width-independent solver for the ε-decision version of the
//! packing/covering pair
//!
//! ```text
//! max Σ w_i   s.t.  Σ w_i A_i ⪯ I,  ‖Σ w_i B_i‖_k ≤ k,  w ≥ 0
//! min Tr M + Tr W  s.t.  ⟨A_i, M⟩ + ⟨B_i, W⟩ ≥ 1,  ‖W‖ ≤ Tr W / k
//! ```
//!
//! with `A_i = C_i C_iᵀ` (`l × l`) and `B_i = D_i D_iᵀ` (`m × m`), by matrix
//! multiplicative weights over the entropic projection onto the capped set.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::fantope::{full_projection, FantopeConfig, FantopeError, ProjectionHandle, Side};
use crate::io::{Dataset, IoError};
use crate::linalg::{factor_inner, kyfan_sym, lambda_max, sym_eigen_desc};
use crate::oracle::{projection_from_spectra, Eigen};
use crate::rng::Rng;
use crate::sketch::{estimate_inner_products_with, ExpInput, SketchError};
use crate::spectral::{materialize, DenseOperator, FactorSum, MatVec, SharedOp};

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("eps = {eps} is below 1/n² = {min} for n = {n}")]
    EpsTooSmall { eps: f64, n: usize, min: f64 },
    #[error(transparent)]
    Fantope(#[from] FantopeError),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Factorised constraint family.
#[derive(Debug, Clone)]
pub struct SdpInstance {
    pub l: usize,
    pub m: usize,
    pub k: usize,
    /// `C_i`, each `l × r_i`.
    pub a: Arc<Vec<DMatrix<f64>>>,
    /// `D_i`, each `m × s_i`.
    pub b: Arc<Vec<DMatrix<f64>>>,
    pub eps: f64,
    pub delta: f64,
}

impl SdpInstance {
    pub fn new(
        l: usize,
        m: usize,
        k: usize,
        a: Vec<DMatrix<f64>>,
        b: Vec<DMatrix<f64>>,
        eps: f64,
        delta: f64,
    ) -> Result<Self, SdpError> {
        if a.len() != b.len() {
            return Err(SdpError::InvalidInstance(format!("{} A-factors but {} B-factors", a.len(), b.len())));
        }
        if l == 0 || m == 0 {
            return Err(SdpError::InvalidInstance("both sides need positive dimension".into()));
        }
        if k == 0 || k > m {
            return Err(SdpError::InvalidInstance(format!("rank {k} out of range 1..={m}")));
        }
        if !(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(SdpError::InvalidInstance(format!("eps = {eps}, delta = {delta} must lie in (0, 1)")));
        }
        for (i, (c, d)) in a.iter().zip(&b).enumerate() {
            if c.nrows() != l || d.nrows() != m {
                return Err(SdpError::InvalidInstance(format!(
                    "constraint {i}: factor rows {}/{} do not match l = {l}, m = {m}",
                    c.nrows(),
                    d.nrows()
                )));
            }
            if c.iter().chain(d.iter()).any(|v| !v.is_finite()) {
                return Err(SdpError::InvalidInstance(format!("constraint {i} has a non-finite entry")));
            }
        }
        Ok(Self { l, m, k, a: Arc::new(a), b: Arc::new(b), eps, delta })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn trace_a(&self, i: usize) -> f64 {
        self.a[i].norm_squared()
    }

    pub fn trace_b(&self, i: usize) -> f64 {
        self.b[i].norm_squared()
    }

    pub fn psi(&self, w: &[f64]) -> DMatrix<f64> {
        weighted_gram(self.l, &self.a, w)
    }

    pub fn phi(&self, w: &[f64]) -> DMatrix<f64> {
        weighted_gram(self.m, &self.b, w)
    }

    /// `⟨A_i, M⟩ + ⟨B_i, W⟩` for every constraint.
    pub fn coverage(&self, mm: &DMatrix<f64>, ww: &DMatrix<f64>) -> Vec<f64> {
        (0..self.n()).map(|i| factor_inner(&self.a[i], mm) + factor_inner(&self.b[i], ww)).collect()
    }

    /// Sub-instance on the given indices.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        Self {
            l: self.l,
            m: self.m,
            k: self.k,
            a: Arc::new(keep.iter().map(|&i| self.a[i].clone()).collect()),
            b: Arc::new(keep.iter().map(|&i| self.b[i].clone()).collect()),
            eps: self.eps,
            delta: self.delta,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    /// Encodes the instance in the dataset format. Row 0 is
    /// `[l, m, k, 0, …]`; every other row is `[i, c, d]` holding one column
    /// of `C_i` and of `D_i` (zero-padded when ranks differ).
    pub fn to_dataset(&self) -> Result<Dataset, IoError> {
        let width = 1 + self.l + self.m;
        let mut vals = vec![0.0; width];
        vals[0] = self.l as f64;
        vals[1] = self.m as f64;
        vals[2] = self.k as f64;
        let mut rows = 1;
        for i in 0..self.n() {
            let (c, d) = (&self.a[i], &self.b[i]);
            for j in 0..c.ncols().max(d.ncols()).max(1) {
                vals.push(i as f64);
                for r in 0..self.l {
                    vals.push(if j < c.ncols() { c[(r, j)] } else { 0.0 });
                }
                for r in 0..self.m {
                    vals.push(if j < d.ncols() { d[(r, j)] } else { 0.0 });
                }
                rows += 1;
            }
        }
        Dataset::new(rows, width, vals)
    }

    pub fn from_dataset(ds: &Dataset, eps: f64, delta: f64) -> Result<Self, SdpError> {
        let bad = |msg: String| SdpError::InvalidInstance(msg);
        if ds.n() == 0 || ds.d() < 3 {
            return Err(bad("instance file needs a header row of width >= 3".into()));
        }
        let h = ds.row(0);
        let as_count = |v: f64, what: &str| -> Result<usize, SdpError> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(bad(format!("header {what} = {v} is not a count")))
            }
        };
        let (l, m, k) = (as_count(h[0], "l")?, as_count(h[1], "m")?, as_count(h[2], "k")?);
        if ds.d() != 1 + l + m {
            return Err(bad(format!("row width {} does not equal 1 + l + m = {}", ds.d(), 1 + l + m)));
        }
        let mut cols: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let mut owner: Vec<usize> = Vec::new();
        for r in 1..ds.n() {
            let row = ds.row(r);
            owner.push(as_count(row[0], "constraint index")?);
            cols.push((row[1..1 + l].to_vec(), row[1 + l..].to_vec()));
        }
        let n = owner.iter().map(|&i| i + 1).max().unwrap_or(0);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let mine: Vec<&(Vec<f64>, Vec<f64>)> =
                owner.iter().zip(&cols).filter(|(&o, _)| o == i).map(|(_, c)| c).collect();
            let cs: Vec<f64> = mine.iter().flat_map(|c| c.0.iter().copied()).collect();
            let ds_: Vec<f64> = mine.iter().flat_map(|c| c.1.iter().copied()).collect();
            a.push(DMatrix::from_vec(l, mine.len(), cs));
            b.push(DMatrix::from_vec(m, mine.len(), ds_));
        }
        Self::new(l, m, k, a, b, eps, delta)
    }

    pub fn write(&self, path: &Path) -> Result<(), SdpError> {
        Ok(self.to_dataset()?.write_binary(path)?)
    }

    pub fn read(path: &Path, eps: f64, delta: f64) -> Result<Self, SdpError> {
        Self::from_dataset(&Dataset::read_binary(path)?, eps, delta)
    }
}

fn weighted_gram(dim: usize, factors: &[DMatrix<f64>], w: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(dim, dim);
    for (c, &wi) in factors.iter().zip(w) {
        if wi != 0.0 && c.ncols() > 0 {
            out.gemm(wi, c, &c.transpose(), 1.0);
        }
    }
    (&out + out.transpose()) * 0.5
}

/// Primal certificate: operator handles for `M̂` and `Ŵ`.
#[derive(Clone)]
pub struct PrimalPair {
    pub m: SharedOp,
    pub w: SharedOp,
}

impl fmt::Debug for PrimalPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrimalPair {{ l: {}, m: {} }}", self.m.dim(), self.w.dim())
    }
}

impl PrimalPair {
    pub fn dense(m: DMatrix<f64>, w: DMatrix<f64>) -> Self {
        Self { m: Arc::new(DenseOperator::new(m)), w: Arc::new(DenseOperator::new(w)) }
    }

    pub fn assemble(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = materialize(&*self.m);
        let w = materialize(&*self.w);
        ((&m + m.transpose()) * 0.5, (&w + w.transpose()) * 0.5)
    }
}

#[derive(Debug, Clone)]
pub enum SdpAnswer {
    Dual(Vec<f64>),
    Primal(PrimalPair),
}

impl SdpAnswer {
    pub fn is_dual(&self) -> bool {
        matches!(self, Self::Dual(_))
    }
}

/// How the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exit {
    /// `‖w‖₁` crossed `K`.
    DualThreshold,
    /// A periodic check found the rescaled weights already certify.
    DualCertified,
    /// Initial weights already exceed `K`.
    DualInitial,
    /// No constraint is under-covered by the current iterate.
    PrimalEmpty,
    /// The running average covers every constraint well enough.
    PrimalAverage,
    /// Iteration cap reached; the averages are returned.
    PrimalCap,
    /// Every constraint was discarded for its trace.
    PrimalShiftOnly,
}

/// Choice of `ε†` in the step size and iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsDagger {
    /// `ε† = ε²/(2048 k ln(n+l+m))`.
    Strict,
    /// `ε† = ε`.
    Practical,
}

/// Projection and inner-product realisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Exact projection from dense eigendecompositions and exact coverages.
    Dense,
    /// Approximate projection, power-method PCA and sketched inner products.
    Sketched,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub eps_dagger: EpsDagger,
    pub backend: Backend,
    /// Period of the dense dual certificate check and instrumentation.
    pub check_every: usize,
    /// Stop as soon as a rescaled iterate or average certifies.
    pub early_exit: bool,
    pub max_iterations: Option<usize>,
    /// The wrapper solves the inner loop at `ε · inner_eps_factor`.
    pub inner_eps_factor: f64,
    pub instrument: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_dagger: EpsDagger::Practical,
            backend: Backend::Dense,
            check_every: 10,
            early_exit: true,
            max_iterations: None,
            inner_eps_factor: 1.0,
            instrument: false,
        }
    }
}

/// Step-size constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Constants {
    pub k_bound: f64,
    pub alpha: f64,
    pub r: f64,
    pub eps_dagger: f64,
    pub eps_prime: f64,
    pub delta_dagger: f64,
}

impl Constants {
    pub fn new(n: usize, l: usize, m: usize, k: usize, eps: f64, delta: f64, mode: EpsDagger) -> Self {
        let ln = ((n + l + m) as f64).ln();
        let kf = k as f64;
        let k_bound = (1.0 + ln) / eps;
        let eps_prime = eps * eps / (2048.0 * kf * ln.max(f64::MIN_POSITIVE));
        let eps_dagger = match mode {
            EpsDagger::Strict => eps_prime,
            EpsDagger::Practical => eps,
        };
        let alpha = eps_dagger / ((1.0 + 10.0 * eps) * k_bound * kf);
        let r = 512.0 * ln * k_bound * kf / (eps_dagger * eps);
        Self { k_bound, alpha, r, eps_dagger, eps_prime, delta_dagger: delta / (5.0 * r) }
    }
}

/// Worst ratios seen by the running-bound checks (each should stay ≤ 1).
#[derive(Debug, Clone, Default, Serialize)]
pub struct Instrumentation {
    /// `max_t ‖w^t‖₁ / ((1+ε)K)`.
    pub weight_ratio: f64,
    /// `max λ_max(Ψ^t) / ((1+10ε)K)` over checked iterations.
    pub psi_ratio: f64,
    /// `max ‖Φ^t‖_k / ((1+10ε)Kk)` over checked iterations.
    pub phi_ratio: f64,
    pub monotone: bool,
    pub checks: usize,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub answer: SdpAnswer,
    pub exit: Exit,
    pub iterations: usize,
    pub constants: Constants,
    pub instrumentation: Option<Instrumentation>,
}

fn eig_of(m: &DMatrix<f64>) -> Eigen {
    let (values, vectors) = sym_eigen_desc(m);
    Eigen { values, vectors }
}

/// Eigen-decomposition of a diagonal matrix without a solver.
fn eig_diag(diag: &[f64]) -> Eigen {
    let n = diag.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors[(i, col)] = 1.0;
    }
    Eigen { values: order.iter().map(|&i| diag[i]).collect(), vectors }
}

/// `A_i = s_i e_{j_i} e_{j_i}ᵀ` for every constraint, when that holds.
fn diagonal_side(factors: &[DMatrix<f64>]) -> Option<Vec<(usize, f64)>> {
    factors
        .iter()
        .map(|c| {
            let mut hit = None;
            for j in 0..c.ncols() {
                for r in 0..c.nrows() {
                    let v = c[(r, j)];
                    if v != 0.0 {
                        match hit {
                            None => hit = Some((r, v * v)),
                            Some((r0, s)) if r0 == r => hit = Some((r, s + v * v)),
                            _ => return None,
                        }
                    }
                }
            }
            Some(hit.unwrap_or((0, 0.0)))
        })
        .collect()
}

fn check_bounds(inst: &SdpInstance, w: &[f64], c: &Constants, acc: &mut Instrumentation) {
    let eps = inst.eps;
    let cap = (1.0 + 10.0 * eps) * c.k_bound;
    acc.psi_ratio = acc.psi_ratio.max(lambda_max(&inst.psi(w)) / cap);
    acc.phi_ratio = acc.phi_ratio.max(kyfan_sym(&inst.phi(w), inst.k) / (cap * inst.k as f64));
    acc.checks += 1;
}

/// Scale making `w` exactly packing-feasible: `max(λ_max(Ψ), ‖Φ‖_k / k)`.
pub fn dual_scale(inst: &SdpInstance, psi: &DMatrix<f64>, phi: &DMatrix<f64>) -> f64 {
    lambda_max(psi).max(kyfan_sym(phi, inst.k) / inst.k as f64)
}

/// The multiplicative-weights loop on an instance that already satisfies
/// the trace caps.
pub fn solver_loop(inst: &SdpInstance, cfg: &SolverConfig, rng: &mut Rng) -> Result<SolveOutcome, SdpError> {
    let n = inst.n();
    if n == 0 {
        return Err(SdpError::InvalidInstance("no constraints".into()));
    }
    let c = Constants::new(n, inst.l, inst.m, inst.k, inst.eps, inst.delta, cfg.eps_dagger);
    let cap = cfg.max_iterations.map_or(c.r, |m| (m as f64).min(c.r)).ceil() as usize;
    let w0: Vec<f64> = (0..n)
        .map(|i| {
            let t = inst.trace_a(i) + inst.trace_b(i);
            if t > 0.0 {
                1.0 / (n as f64 * t)
            } else {
                0.0
            }
        })
        .collect();
    match cfg.backend {
        Backend::Dense => dense_loop(inst, cfg, c, cap, w0),
        Backend::Sketched => sketched_loop(inst, cfg, c, cap, w0, rng),
    }
}

fn dense_loop(
    inst: &SdpInstance,
    cfg: &SolverConfig,
    c: Constants,
    cap: usize,
    w0: Vec<f64>,
) -> Result<SolveOutcome, SdpError> {
    let n = inst.n();
    let eps = inst.eps;
    let diag_a = diagonal_side(&inst.a);
    let mut w = w0.clone();
    let psi0 = inst.psi(&w0);
    let phi0 = inst.phi(&w0);
    let mut omega = DMatrix::zeros(inst.l, inst.l);
    let mut omega_diag = vec![0.0; inst.l];
    let mut theta = DMatrix::zeros(inst.m, inst.m);
    let mut m_sum = DMatrix::zeros(inst.l, inst.l);
    let mut w_sum = DMatrix::zeros(inst.m, inst.m);
    let mut cov_sum = vec![0.0; n];
    let mut trace_sum = 0.0;
    let mut inst_acc = cfg.instrument.then(|| Instrumentation { monotone: true, ..Default::default() });
    let mut cov = vec![0.0; n];
    let mut t = 0;

    let finish = |answer, exit, t, acc: Option<Instrumentation>| SolveOutcome {
        answer,
        exit,
        iterations: t,
        constants: c,
        instrumentation: acc,
    };

    while w.iter().sum::<f64>() <= c.k_bound && t < cap {
        t += 1;
        let fe = match &diag_a {
            Some(_) => eig_diag(&omega_diag),
            None => eig_of(&omega),
        };
        let ge = eig_of(&theta);
        let p = projection_from_spectra(&fe, &ge, inst.k);
        for i in 0..n {
            let a_part = match &diag_a {
                Some(d) => d[i].1 * p.m[(d[i].0, d[i].0)],
                None => factor_inner(&inst.a[i], &p.m),
            };
            cov[i] = a_part + factor_inner(&inst.b[i], &p.w);
            cov_sum[i] += cov[i];
        }
        m_sum += &p.m;
        w_sum += &p.w;
        trace_sum += p.m.trace() + p.w.trace();

        if cfg.early_exit {
            let min_cov = cov.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_cov > 1.0 + eps {
                let s = 1.0 / min_cov;
                return Ok(finish(SdpAnswer::Primal(PrimalPair::dense(p.m * s, p.w * s)), Exit::PrimalEmpty, t, inst_acc));
            }
            // Only when the averages rule out any dual answer.
            let min_avg = cov_sum.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_avg > 0.0 && trace_sum / min_avg < 1.0 - eps {
                let s = 1.0 / min_avg;
                let pair = PrimalPair::dense(&m_sum * s, &w_sum * s);
                return Ok(finish(SdpAnswer::Primal(pair), Exit::PrimalAverage, t, inst_acc));
            }
        }
        if t % cfg.check_every.max(1) == 0 {
            let psi = &omega + &psi0;
            let phi = &theta + &phi0;
            if let Some(acc) = inst_acc.as_mut() {
                check_bounds(inst, &w, &c, acc);
            }
            if cfg.early_exit {
                let s = dual_scale(inst, &psi, &phi);
                let total: f64 = w.iter().sum();
                if s > 0.0 && total / s >= 1.0 - eps {
                    let dual = w.iter().map(|x| x / s).collect();
                    return Ok(finish(SdpAnswer::Dual(dual), Exit::DualCertified, t, inst_acc));
                }
            }
        }

        for i in 0..n {
            if cov[i] <= 1.0 + eps {
                let step = c.alpha * w[i];
                w[i] += step;
                if let Some(d) = &diag_a {
                    omega_diag[d[i].0] += step * d[i].1;
                } else if inst.a[i].ncols() > 0 {
                    omega.gemm(step, &inst.a[i], &inst.a[i].transpose(), 1.0);
                }
                if inst.b[i].ncols() > 0 {
                    theta.gemm(step, &inst.b[i], &inst.b[i].transpose(), 1.0);
                }
            }
        }
        if diag_a.is_some() {
            omega = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&omega_diag));
        }
        if let Some(acc) = inst_acc.as_mut() {
            let total: f64 = w.iter().sum();
            acc.weight_ratio = acc.weight_ratio.max(total / ((1.0 + eps) * c.k_bound));
        }
    }

    let total: f64 = w.iter().sum();
    if total >= c.k_bound {
        let psi = &omega + &psi0;
        let phi = &theta + &phi0;
        let s = if cfg.early_exit { dual_scale(inst, &psi, &phi) } else { (1.0 + 10.0 * eps) * c.k_bound };
        let dual = w.iter().map(|x| x / s).collect();
        return Ok(finish(SdpAnswer::Dual(dual), Exit::DualThreshold, t, inst_acc));
    }
    let tt = t.max(1) as f64;
    let (mut mm, mut ww) = (m_sum / tt, w_sum / tt);
    if cfg.early_exit {
        let min_avg = cov_sum.iter().cloned().fold(f64::INFINITY, f64::min) / tt;
        if min_avg > 0.0 {
            mm /= min_avg;
            ww /= min_avg;
        }
    }
    Ok(finish(SdpAnswer::Primal(PrimalPair::dense(mm, ww)), Exit::PrimalCap, t, inst_acc))
}

/// Running average of projection handles; applies each in turn.
struct HandleAverage {
    handles: Vec<Arc<ProjectionHandle>>,
    side: Side,
    dim: usize,
    scale: f64,
}

impl MatVec for HandleAverage {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let c = self.scale / self.handles.len().max(1) as f64;
        for h in &self.handles {
            let part = h.apply(self.side, x).expect("dimension fixed at construction");
            for (yi, p) in y.iter_mut().zip(&part) {
                *yi += c * p;
            }
        }
    }
}

fn averaged_pair(handles: Vec<Arc<ProjectionHandle>>, l: usize, m: usize, scale: f64) -> PrimalPair {
    PrimalPair {
        m: Arc::new(HandleAverage { handles: handles.clone(), side: Side::M, dim: l, scale }),
        w: Arc::new(HandleAverage { handles, side: Side::W, dim: m, scale }),
    }
}

fn sketched_loop(
    inst: &SdpInstance,
    cfg: &SolverConfig,
    c: Constants,
    cap: usize,
    w0: Vec<f64>,
    rng: &mut Rng,
) -> Result<SolveOutcome, SdpError> {
    let n = inst.n();
    let eps = inst.eps;
    let kf = inst.k as f64;
    let mut fcfg = FantopeConfig::new(c.eps_dagger.min(0.999 / (kf * kf)).min(0.24), c.delta_dagger.min(0.24));
    fcfg.materialize_limit = 64;
    let sk_eps = fcfg.eps;
    let mut w = w0.clone();
    let mut handles: Vec<Arc<ProjectionHandle>> = Vec::new();
    let mut cov_sum = vec![0.0; n];
    let mut inst_acc = cfg.instrument.then(|| Instrumentation { monotone: true, ..Default::default() });
    let mut t = 0;

    while w.iter().sum::<f64>() <= c.k_bound && t < cap {
        t += 1;
        let dw: Vec<f64> = w.iter().zip(&w0).map(|(a, b)| (a - b).max(0.0)).collect();
        let omega = FactorSum::new(inst.l, Arc::clone(&inst.a), dw.clone());
        let theta = FactorSum::new(inst.m, Arc::clone(&inst.b), dw);
        let kappa_o = omega.trace_bound();
        let kappa_t = theta.trace_bound();
        let omega: SharedOp = Arc::new(omega);
        let theta: SharedOp = Arc::new(theta);
        let h = full_projection(Arc::clone(&omega), kappa_o, Arc::clone(&theta), kappa_t, inst.k, &fcfg, rng)?;

        let y = estimate_inner_products_with(
            ExpInput::new(&*omega, kappa_o).shifted(kappa_o),
            &inst.a,
            sk_eps,
            fcfg.delta,
            rng,
            fcfg.sketch,
        )?;
        let deflated: Vec<DMatrix<f64>> = inst
            .b
            .iter()
            .map(|d| {
                let mut p = d.clone();
                for v in &h.w.vectors {
                    let vv = nalgebra::DVector::from_column_slice(v);
                    let proj = &vv * (vv.transpose() * &p);
                    p -= proj;
                }
                p
            })
            .collect();
        let z = estimate_inner_products_with(
            ExpInput::new(&*theta, kappa_t).shifted(h.w.log_shift),
            &deflated,
            sk_eps,
            fcfg.delta,
            rng,
            fcfg.sketch,
        )?;
        let (gam, beta, beta_p) = (h.m_coefficient(), h.beta(), h.beta_prime());
        let cov: Vec<f64> =
            (0..n).map(|i| gam * y[i] + beta_p * z[i] + beta * h.w.top_inner(&inst.b[i])).collect();
        for i in 0..n {
            cov_sum[i] += cov[i];
        }
        let h = Arc::new(h);
        handles.push(Arc::clone(&h));

        if cfg.early_exit {
            let min_cov = cov.iter().cloned().fold(f64::INFINITY, f64::min);
            if min_cov > 1.0 + eps {
                let pair = averaged_pair(vec![h], inst.l, inst.m, 1.0 / min_cov);
                return Ok(SolveOutcome {
                    answer: SdpAnswer::Primal(pair),
                    exit: Exit::PrimalEmpty,
                    iterations: t,
                    constants: c,
                    instrumentation: inst_acc,
                });
            }
        }
        if t % cfg.check_every.max(1) == 0 {
            if let Some(acc) = inst_acc.as_mut() {
                check_bounds(inst, &w, &c, acc);
            }
        }
        for i in 0..n {
            if cov[i] <= 1.0 + eps {
                w[i] += c.alpha * w[i];
            }
        }
        if let Some(acc) = inst_acc.as_mut() {
            let total: f64 = w.iter().sum();
            acc.weight_ratio = acc.weight_ratio.max(total / ((1.0 + eps) * c.k_bound));
        }
    }
    let total: f64 = w.iter().sum();
    if total >= c.k_bound {
        let s = (1.0 + 10.0 * eps) * c.k_bound;
        return Ok(SolveOutcome {
            answer: SdpAnswer::Dual(w.iter().map(|x| x / s).collect()),
            exit: Exit::DualThreshold,
            iterations: t,
            constants: c,
            instrumentation: inst_acc,
        });
    }
    let tt = t.max(1) as f64;
    let min_avg = cov_sum.iter().cloned().fold(f64::INFINITY, f64::min) / tt;
    let scale = if cfg.early_exit && min_avg > 0.0 { 1.0 / min_avg } else { 1.0 };
    Ok(SolveOutcome {
        answer: SdpAnswer::Primal(averaged_pair(handles, inst.l, inst.m, scale)),
        exit: Exit::PrimalCap,
        iterations: t,
        constants: c,
        instrumentation: inst_acc,
    })
}

/// `A + c I` as an operator.
struct Shifted {
    inner: SharedOp,
    c: f64,
}

impl MatVec for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.inner.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += self.c * xi;
        }
    }
}

/// Decision with preprocessing: drops constraints whose trace reaches
/// `(n+l+m)⁵`, exits at once when the initial weights already exceed `K`,
/// runs the loop at `ε · inner_eps_factor`, pads the dual with zeros and
/// shifts the primal by `I/(n+l+m)⁵`.
pub fn packing_covering_decision(
    inst: &SdpInstance,
    cfg: &SolverConfig,
    rng: &mut Rng,
) -> Result<SolveOutcome, SdpError> {
    let n = inst.n();
    let min = 1.0 / (n as f64 * n as f64);
    if n == 0 || inst.eps < min {
        return Err(SdpError::EpsTooSmall { eps: inst.eps, n, min });
    }
    let big = ((n + inst.l + inst.m) as f64).powi(5);
    let keep: Vec<usize> = (0..n).filter(|&i| inst.trace_a(i) < big && inst.trace_b(i) < big).collect();
    let shift = 1.0 / big;
    let inner_eps = inst.eps * cfg.inner_eps_factor;
    let shift_pair = |p: PrimalPair| PrimalPair {
        m: Arc::new(Shifted { inner: p.m, c: shift }),
        w: Arc::new(Shifted { inner: p.w, c: shift }),
    };

    if keep.is_empty() {
        let zero = PrimalPair::dense(DMatrix::zeros(inst.l, inst.l), DMatrix::zeros(inst.m, inst.m));
        let c = Constants::new(n, inst.l, inst.m, inst.k, inner_eps, inst.delta, cfg.eps_dagger);
        return Ok(SolveOutcome {
            answer: SdpAnswer::Primal(shift_pair(zero)),
            exit: Exit::PrimalShiftOnly,
            iterations: 0,
            constants: c,
            instrumentation: None,
        });
    }
    let sub = inst.restrict(&keep).with_eps(inner_eps);
    let c = Constants::new(sub.n(), sub.l, sub.m, sub.k, inner_eps, sub.delta, cfg.eps_dagger);
    let w0: Vec<f64> = (0..sub.n()).map(|i| 1.0 / (sub.n() as f64 * (sub.trace_a(i) + sub.trace_b(i)))).collect();
    let pad = |w: Vec<f64>| {
        let mut full = vec![0.0; n];
        for (j, &i) in keep.iter().enumerate() {
            full[i] = w[j];
        }
        full
    };
    if w0.iter().sum::<f64>() > c.k_bound {
        return Ok(SolveOutcome {
            answer: SdpAnswer::Dual(pad(w0)),
            exit: Exit::DualInitial,
            iterations: 0,
            constants: c,
            instrumentation: None,
        });
    }
    let mut out = solver_loop(&sub, cfg, rng)?;
    out.answer = match out.answer {
        SdpAnswer::Dual(w) => SdpAnswer::Dual(pad(w)),
        SdpAnswer::Primal(p) => SdpAnswer::Primal(shift_pair(p)),
    };
    Ok(out)
}

/// One failed check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: String,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Verification {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// `Σ w` for duals, `Tr M + Tr W` for primals.
    pub objective: f64,
}

impl Verification {
    fn check(&mut self, name: impl Into<String>, value: f64, limit: f64, upper: bool) {
        let ok = if upper { value <= limit } else { value >= limit };
        if !ok || !value.is_finite() {
            self.violations.push(Violation { constraint: name.into(), value, limit });
        }
    }
}

/// Relative slack absorbed by the dense checks.
pub const VERIFY_TOL: f64 = 1e-9;

/// Dense check of either side of the ε-decision contract.
pub fn verify_certificate(inst: &SdpInstance, ans: &SdpAnswer) -> Verification {
    let mut v = Verification::default();
    let eps = inst.eps;
    match ans {
        SdpAnswer::Dual(w) => {
            if w.len() != inst.n() {
                v.check("dual length", w.len() as f64, inst.n() as f64, true);
                v.check("dual length", w.len() as f64, inst.n() as f64, false);
            } else {
                for (i, &x) in w.iter().enumerate() {
                    v.check(format!("w[{i}] >= 0"), x, 0.0, false);
                }
                let total: f64 = w.iter().sum();
                v.objective = total;
                v.check("sum w >= 1 - eps", total, 1.0 - eps, false);
                v.check("lambda_max(sum w_i A_i) <= 1", lambda_max(&inst.psi(w)), 1.0 + VERIFY_TOL, true);
                let kf = inst.k as f64;
                v.check("||sum w_i B_i||_k <= k", kyfan_sym(&inst.phi(w), inst.k), kf * (1.0 + VERIFY_TOL), true);
            }
        }
        SdpAnswer::Primal(p) => {
            let (mm, ww) = p.assemble();
            let (em, _) = sym_eigen_desc(&mm);
            let (ew, _) = sym_eigen_desc(&ww);
            let scale = mm.trace().abs() + ww.trace().abs() + 1.0;
            v.check("M psd", em.last().copied().unwrap_or(0.0), -VERIFY_TOL * scale, false);
            v.check("W psd", ew.last().copied().unwrap_or(0.0), -VERIFY_TOL * scale, false);
            let tr = mm.trace() + ww.trace();
            v.objective = tr;
            v.check("Tr M + Tr W <= 1 + eps", tr, 1.0 + eps, true);
            v.check("||W|| <= Tr W / k", ew[0], ww.trace() / inst.k as f64 + 1e-8, true);
            for (i, c) in inst.coverage(&mm, &ww).iter().enumerate() {
                v.check(format!("coverage[{i}] >= 1"), *c, 1.0 - VERIFY_TOL, false);
            }
        }
    }
    v.ok = v.violations.is_empty();
    v
}
