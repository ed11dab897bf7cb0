//! Weighted Ky-Fan cost `min_{w ∈ Φ_b(1)} ‖Σ w_i z_i z_iᵀ‖_k` with
//! `z_i = x_i − ν`.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::io::Dataset;
use crate::linalg::{kyfan_sym, sq_dist};
use crate::rng::Rng;
use crate::sdp::{packing_covering_decision, solver_loop, Exit, SdpAnswer, SdpInstance, SolverConfig};
use crate::spectral::{pca_topk, DenseOperator, MatVec};

#[derive(Debug, Error)]
pub enum CostError {
    #[error("budgets sum to {0} < 1")]
    EmptyBudget(f64),
    #[error("invalid query: {0}")]
    Invalid(String),
}

/// Cost query over a dataset with center `ν`, budgets `b` and rank `k`.
#[derive(Debug, Clone, Copy)]
pub struct CostQuery<'a> {
    pub x: &'a Dataset,
    pub nu: &'a [f64],
    pub b: &'a [f64],
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
}

impl<'a> CostQuery<'a> {
    pub fn new(x: &'a Dataset, nu: &'a [f64], b: &'a [f64], k: usize, eps: f64, delta: f64) -> Result<Self, CostError> {
        if nu.len() != x.d() || b.len() != x.n() {
            return Err(CostError::Invalid(format!(
                "center has {} coordinates for d = {}, budgets have {} entries for N = {}",
                nu.len(),
                x.d(),
                b.len(),
                x.n()
            )));
        }
        if b.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(CostError::Invalid("budgets must be finite and nonnegative".into()));
        }
        if k == 0 {
            return Err(CostError::Invalid("rank must be positive".into()));
        }
        let total: f64 = b.iter().sum();
        if total < 1.0 - 1e-12 {
            return Err(CostError::EmptyBudget(total));
        }
        Ok(Self { x, nu, b, k, eps, delta })
    }

    /// `‖x_i − ν‖²` for every row.
    pub fn sq_lengths(&self) -> Vec<f64> {
        (0..self.x.n()).map(|i| sq_dist(self.x.row(i), self.nu)).collect()
    }
}

/// Greedy fill of the budgets in ascending `‖z_i‖` order: the minimiser of
/// `Σ w_i ‖z_i‖²` over `Φ_b(1)`. Returns `(l*, w)`.
pub fn compute_lstar(q: &CostQuery) -> Result<(f64, Vec<f64>), CostError> {
    let total: f64 = q.b.iter().sum();
    if total < 1.0 - 1e-12 {
        return Err(CostError::EmptyBudget(total));
    }
    let len = q.sq_lengths();
    let mut order: Vec<usize> = (0..len.len()).collect();
    order.sort_by(|&i, &j| len[i].total_cmp(&len[j]).then(i.cmp(&j)));
    let mut w = vec![0.0; len.len()];
    let mut left = 1.0;
    let mut val = 0.0;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = q.b[i].min(left);
        w[i] = take;
        val += take * len[i];
        left -= take;
    }
    Ok((val, w))
}

/// Reduction of the cost at level `λ` to a packing instance.
#[derive(Debug, Clone)]
pub struct PackInstance {
    pub sdp: SdpInstance,
    /// Row of the dataset behind each constraint (rows with `b_i = 0` are
    /// dropped).
    pub rows: Vec<usize>,
    pub lambda: f64,
    pub eps_dagger: f64,
}

/// `A_i = e_i e_iᵀ / ((1+ε†) b_i)` on an `N'`-dimensional side and
/// `B_i = z_i z_iᵀ / ((1+ε†) λ/k)` on the `d` side.
pub fn build_pack_instance(
    q: &CostQuery,
    lambda: f64,
    eps_dagger: f64,
    decision_eps: f64,
    delta: f64,
) -> Result<PackInstance, CostError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CostError::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    let rows: Vec<usize> = (0..q.x.n()).filter(|&i| q.b[i] > 0.0).collect();
    let d = q.x.d();
    let k = q.k.min(d);
    let np = rows.len();
    let bscale = 1.0 / ((1.0 + eps_dagger) * lambda / k as f64).sqrt();
    let mut a = Vec::with_capacity(np);
    let mut b = Vec::with_capacity(np);
    for (pos, &i) in rows.iter().enumerate() {
        let mut c = DMatrix::zeros(np, 1);
        c[(pos, 0)] = 1.0 / ((1.0 + eps_dagger) * q.b[i]).sqrt();
        a.push(c);
        let z: Vec<f64> = q.x.row(i).iter().zip(q.nu).map(|(x, n)| (x - n) * bscale).collect();
        b.push(DMatrix::from_vec(d, 1, z));
    }
    let sdp = SdpInstance::new(np, d, k, a, b, decision_eps, delta).map_err(|e| CostError::Invalid(e.to_string()))?;
    Ok(PackInstance { sdp, rows, lambda, eps_dagger })
}

/// `Σ w_i z_i z_iᵀ` as a dense `d × d` matrix.
pub fn weighted_second_moment(q: &CostQuery, w: &[f64]) -> DMatrix<f64> {
    let d = q.x.d();
    let mut s = DMatrix::zeros(d, d);
    let mut z = vec![0.0; d];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for (zj, (x, n)) in z.iter_mut().zip(q.x.row(i).iter().zip(q.nu)) {
            *zj = x - n;
        }
        for c in 0..d {
            let zc = wi * z[c];
            for r in 0..d {
                s[(r, c)] += zc * z[r];
            }
        }
    }
    s
}

/// Tolerances of the λ search, as fractions of the query's `ε`.
#[derive(Debug, Clone, Copy)]
pub struct CostParams {
    /// `ε† = eps_dagger_ratio · ε`.
    pub eps_dagger_ratio: f64,
    /// Each decision runs at `decision_ratio · ε`.
    pub decision_ratio: f64,
    /// Stop once `λ_h/λ_l ≤ 1 + stop_ratio · ε`.
    pub stop_ratio: f64,
    pub solver: SolverConfig,
}

impl Default for CostParams {
    fn default() -> Self {
        Self { eps_dagger_ratio: 0.0, decision_ratio: 0.6, stop_ratio: 0.3, solver: SolverConfig::default() }
    }
}

/// One λ decision of the search.
#[derive(Debug, Clone, Serialize)]
pub struct DecisionRecord {
    pub lambda: f64,
    pub dual: bool,
    pub exit: Exit,
    pub iterations: usize,
    /// Certified objective: `Σ w` (dual) or `Tr M + Tr W` (primal).
    pub value: f64,
}

/// Output of [`approx_cost`].
#[derive(Debug, Clone, Serialize)]
pub struct CostCertificate {
    /// Ky-Fan value of `w̄`, estimated by power-method PCA.
    pub theta: f64,
    pub wbar: Vec<f64>,
    pub lambda_low: f64,
    pub lambda_high: f64,
    pub lstar: f64,
    /// `true` when the rank covers the whole space and the greedy fill is
    /// exact.
    pub exact: bool,
    pub decisions: Vec<DecisionRecord>,
}

impl CostCertificate {
    pub fn mass(&self) -> f64 {
        self.wbar.iter().sum()
    }
}

fn op_trace(op: &dyn MatVec) -> f64 {
    let n = op.dim();
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut t = 0.0;
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        t += y[j];
        e[j] = 0.0;
    }
    t
}

/// Top-`k` Ky-Fan value of `Σ w_i z_i z_iᵀ` by power-method PCA.
pub fn estimate_kyfan(q: &CostQuery, w: &[f64], rng: &mut Rng) -> Result<f64, CostError> {
    let k = q.k.min(q.x.d());
    if w.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let s = DenseOperator::new(weighted_second_moment(q, w));
    let eps = q.eps.clamp(1e-6, 0.5);
    let pca = pca_topk(&s, k, eps, q.delta.clamp(1e-12, 0.5), rng).map_err(|e| CostError::Invalid(e.to_string()))?;
    Ok(pca.values.iter().sum())
}

/// Binary search over `λ` between `(k/d)·l*` and `l*`, each step deciding
/// the packing reduction at level `λ`.
///
/// The search keeps a weight vector `w̃ ≤ b` with `‖Σ w̃_i z_i z_iᵀ‖_k ≤ λ_h`
/// and a lower bound `λ_l ≤ OPT`. A dual answer at `λ` supplies a new `w̃`
/// and `λ_h = min(λ, ‖·‖_k(w̃))`; a primal answer of value `T < 1+ε†`
/// proves `OPT ≥ (1+ε†)λ/T`. The returned weights are `w̃` scaled so that
/// their Ky-Fan value is at most `λ_l`.
pub fn approx_cost(q: &CostQuery, rng: &mut Rng) -> Result<CostCertificate, CostError> {
    approx_cost_with(q, &CostParams::default(), rng)
}

pub fn approx_cost_with(q: &CostQuery, p: &CostParams, rng: &mut Rng) -> Result<CostCertificate, CostError> {
    let (lstar, greedy) = compute_lstar(q)?;
    let d = q.x.d();
    let k = q.k.min(d);
    let mut cert = CostCertificate {
        theta: lstar,
        wbar: greedy.clone(),
        lambda_low: lstar,
        lambda_high: lstar,
        lstar,
        exact: true,
        decisions: Vec::new(),
    };
    if lstar == 0.0 || k >= d {
        return Ok(cert);
    }
    cert.exact = false;
    let eps = q.eps;
    let eps_dagger = p.eps_dagger_ratio * eps;
    let dec_eps = p.decision_ratio * eps;
    let stop = 1.0 + p.stop_ratio * eps;
    let max_steps = ((d as f64 / (k as f64 * (stop - 1.0))).log2().ceil() as usize).max(1);
    let delta_step = q.delta / max_steps as f64;

    let mut lo = (k as f64 / d as f64) * lstar;
    let greedy_kf = kyfan_sym(&weighted_second_moment(q, &greedy), k);
    let mut hi = greedy_kf.min(lstar);
    let mut candidates = vec![(greedy, greedy_kf)];
    let mut steps = 0;
    while hi > stop * lo && steps < max_steps {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        let pack = build_pack_instance(q, mid, eps_dagger, dec_eps, delta_step)?;
        let n = pack.sdp.n() as f64;
        let out = if dec_eps >= 1.0 / (n * n) {
            packing_covering_decision(&pack.sdp, &p.solver, rng)
        } else {
            solver_loop(&pack.sdp, &p.solver, rng)
        }
        .map_err(|e| CostError::Invalid(e.to_string()))?;
        let (dual, value) = match &out.answer {
            SdpAnswer::Dual(w) => {
                let mut cand = vec![0.0; q.x.n()];
                for (pos, &i) in pack.rows.iter().enumerate() {
                    cand[i] = (w[pos] / (1.0 + eps_dagger)).min(q.b[i]);
                }
                let kf = kyfan_sym(&weighted_second_moment(q, &cand), k);
                candidates.push((cand, kf));
                hi = mid;
                (true, w.iter().sum())
            }
            SdpAnswer::Primal(pair) => {
                let value = op_trace(&*pair.m) + op_trace(&*pair.w);
                let bound = mid * (1.0 + eps_dagger) / value;
                if !(bound > lo) {
                    break;
                }
                lo = bound;
                (false, value)
            }
        };
        cert.decisions.push(DecisionRecord { lambda: mid, dual, exit: out.exit, iterations: out.iterations, value });
    }
    // Largest mass among the candidates once each is scaled into the box,
    // onto the simplex and under the certified lower bound.
    let scaled = |w: &[f64], kf: f64| {
        let mass: f64 = w.iter().sum();
        let mut c = if kf > 0.0 { lo / kf } else { f64::INFINITY };
        c = c.min(1.0 / mass);
        for (wi, bi) in w.iter().zip(q.b) {
            if *wi > 0.0 {
                c = c.min(bi / wi);
            }
        }
        c
    };
    let (best, c) = candidates
        .iter()
        .map(|(w, kf)| (w, scaled(w, *kf)))
        .max_by(|a, b| (a.1 * a.0.iter().sum::<f64>()).total_cmp(&(b.1 * b.0.iter().sum::<f64>())))
        .expect("greedy candidate present");
    let wbar: Vec<f64> = best.iter().map(|w| w * c).collect();
    cert.theta = estimate_kyfan(q, &wbar, rng)?;
    cert.wbar = wbar;
    cert.lambda_low = lo;
    cert.lambda_high = hi;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exact_cost_small, exact_kyfan_norm, DenseSym};
    use crate::rng::{gaussian_vec, rng_from_seed};
    use crate::sdp::verify_certificate;
    use rand::Rng as _;

    fn ds(rows: &[Vec<f64>]) -> Dataset {
        Dataset::from_rows(rows).unwrap()
    }

    #[test]
    fn lstar_examples() {
        let x = ds(&[vec![1.0], vec![2.0], vec![3.0]]);
        let b = [0.5; 3];
        let q = CostQuery::new(&x, &[0.0], &b, 1, 0.05, 0.01).unwrap();
        assert_eq!(compute_lstar(&q).unwrap().0, 2.5);
        let x0 = ds(&vec![vec![0.0, 0.0]; 3]);
        let q = CostQuery::new(&x0, &[0.0, 0.0], &b, 1, 0.05, 0.01).unwrap();
        assert_eq!(compute_lstar(&q).unwrap().0, 0.0);
        let x1 = ds(&[vec![3.0, 4.0]]);
        let q = CostQuery::new(&x1, &[0.0, 0.0], &[1.0], 1, 0.05, 0.01).unwrap();
        assert_eq!(compute_lstar(&q).unwrap().0, 25.0);
        assert!(CostQuery::new(&x1, &[0.0, 0.0], &[0.5], 1, 0.05, 0.01).is_err());
    }

    #[test]
    fn pack_instance_scalings() {
        let x = ds(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        let b = [1.0, 1.0];
        let q = CostQuery::new(&x, &[0.0, 0.0], &b, 1, 0.05, 0.01).unwrap();
        let p = build_pack_instance(&q, 1.0, 0.0, 0.1, 0.01).unwrap();
        assert_eq!(p.sdp.a[0][(0, 0)], 1.0);
        assert_eq!(p.sdp.b[0].as_slice(), &[1.0, 2.0]);
        let p2 = build_pack_instance(&q, 2.0, 0.0, 0.1, 0.01).unwrap();
        assert!((p2.sdp.trace_b(0) - 0.5 * p.sdp.trace_b(0)).abs() < 1e-12);
        let b0 = [1.0, 0.0];
        let q0 = CostQuery::new(&x, &[0.0, 0.0], &b0, 1, 0.05, 0.01).unwrap();
        assert_eq!(build_pack_instance(&q0, 1.0, 0.0, 0.1, 0.01).unwrap().rows, vec![0]);
    }

    fn random_query_data(n: usize, d: usize, seed: u64) -> (Dataset, Vec<f64>) {
        let mut r = rng_from_seed(seed);
        let mut vals = gaussian_vec(&mut r, n * d);
        for i in 0..n {
            let s: f64 = r.gen_range(0.5..3.0);
            vals[i * d..(i + 1) * d].iter_mut().for_each(|v| *v *= s);
        }
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(1.2..2.5) / n as f64).collect();
        (Dataset::new(n, d, vals).unwrap(), b)
    }

    #[test]
    fn pack_value_at_exact_cost_is_at_least_one() {
        let (x, b) = random_query_data(10, 4, 1);
        let nu = vec![0.0; 4];
        let q = CostQuery::new(&x, &nu, &b, 2, 0.05, 0.01).unwrap();
        let (opt, wopt) = exact_cost_small(&q).unwrap();
        let p = build_pack_instance(&q, opt, 0.0, 0.1, 0.01).unwrap();
        // The optimiser itself is packing-feasible up to the oracle's slack.
        let w: Vec<f64> = p.rows.iter().map(|&i| wopt[i] / (1.0 + 1e-3)).collect();
        let v = verify_certificate(&p.sdp, &crate::sdp::SdpAnswer::Dual(w));
        assert!(v.ok, "{v:?}");
    }

    #[test]
    fn tight_budgets_keep_mass_and_bound() {
        let (x, _) = random_query_data(8, 4, 2);
        let nu = vec![0.1; 4];
        let b = vec![1.0 / 8.0; 8];
        let q = CostQuery::new(&x, &nu, &b, 2, 0.05, 0.01).unwrap();
        let cert = approx_cost(&q, &mut rng_from_seed(0)).unwrap();
        let full = exact_kyfan_norm(&DenseSym::new(weighted_second_moment(&q, &b)).unwrap(), 2).unwrap();
        assert!(cert.theta <= full * (1.0 + 1e-9));
        assert!(cert.mass() >= 0.95);
        assert!(cert.wbar.iter().all(|w| *w <= 1.0 / 8.0 + 1e-15));
        assert!(cert.lambda_low <= full);
    }

    #[test]
    fn random_instances_sound_and_heavy() {
        for seed in 0..3 {
            let (x, b) = random_query_data(12, 5, 10 + seed);
            let nu = vec![0.0; 5];
            let q = CostQuery::new(&x, &nu, &b, 2, 0.05, 0.01).unwrap();
            let cert = approx_cost(&q, &mut rng_from_seed(seed)).unwrap();
            let (opt, _) = exact_cost_small(&q).unwrap();
            let kf = kyfan_sym(&weighted_second_moment(&q, &cert.wbar), 2);
            assert!(cert.wbar.iter().zip(&b).all(|(w, bi)| *w >= 0.0 && *w <= bi * (1.0 + 1e-12)));
            assert!(cert.mass() >= 0.95, "mass {}", cert.mass());
            assert!(kf <= opt + 1e-4, "{kf} > {opt}");
            assert!(cert.theta <= opt + 1e-4);
        }
    }

    #[test]
    fn zero_second_moment() {
        let x = ds(&vec![vec![1.0, 1.0]; 4]);
        let b = [0.5; 4];
        let q = CostQuery::new(&x, &[1.0, 1.0], &b, 1, 0.05, 0.01).unwrap();
        let cert = approx_cost(&q, &mut rng_from_seed(0)).unwrap();
        assert_eq!(cert.theta, 0.0);
        assert!(cert.mass() >= 0.95);
    }

    #[test]
    fn decision_flips_once_across_lambda_grid() {
        let (x, b) = random_query_data(8, 3, 5);
        let nu = vec![0.0; 3];
        let q = CostQuery::new(&x, &nu, &b, 1, 0.05, 0.01).unwrap();
        let (opt, _) = exact_cost_small(&q).unwrap();
        let mut answers = Vec::new();
        for f in [0.3, 0.6, 0.85, 1.2, 1.6, 3.0] {
            let p = build_pack_instance(&q, f * opt, 0.05, 0.1, 0.01).unwrap();
            let out = packing_covering_decision(&p.sdp, &SolverConfig::default(), &mut rng_from_seed(1)).unwrap();
            answers.push(out.answer.is_dual());
        }
        let flips = answers.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(flips, 1, "{answers:?}");
        assert!(!answers[0] && answers[5]);
    }
}
