//! Oracle-backed validation suite. Each routine runs a seeded batch of trials
//! against dense references and returns one [`CheckResult`]; the acceptance
//! tests, `ldme verify` and `ldme bench` share them.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;
use serde::Serialize;
use serde_json::{json, Value};

use crate::cost::{approx_cost, weighted_second_moment, CostQuery};
use crate::estimator::{output_list, EstimatorConfig};
use crate::fantope::{assemble_w, simple_projection, FantopeConfig};
use crate::io::generate::{gen_mixture, MixtureSpec, OutlierPolicy};
use crate::io::Dataset;
use crate::linalg::{kyfan_sym, lambda_max, sym_eigen_desc, trace_norm_sym};
use crate::oracle::{dense_expm, exact_cost_small, exact_fantope_projection, DenseSym};
use crate::planted::{error_scale, expected_row, generate, partition_error, recover, round_vector, Adversary};
use crate::rng::{derive_indexed, gaussian_vec, rng_from_seed, Rng};
use crate::sdp::{packing_covering_decision, solver_loop, verify_certificate, SdpAnswer, SdpInstance, SolverConfig};
use crate::sketch::{estimate_inner_products, estimate_trace, ExpInput};
use crate::spectral::{pca_topk, DenseOperator};

/// Multiplier on `c·n/(α²(a−b)²)` for the planted-partition error, fixed
/// from one calibration run.
pub const PLANTED_C_CAL: f64 = 0.25;

/// Largest acceptable scaling exponent of estimate wall time in `N`.
pub const SCALING_BETA_MAX: f64 = 1.3;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub successes: usize,
    pub trials: usize,
    /// Successes needed to pass.
    pub required: usize,
    pub seconds: f64,
    /// Wall-clock allowance; exceeding it fails the check.
    pub time_limit: Option<f64>,
    pub blocking: bool,
    pub detail: Value,
}

impl CheckResult {
    fn finish(name: &str, successes: usize, trials: usize, required: usize, start: Instant, limit: Option<f64>, detail: Value) -> Self {
        let seconds = start.elapsed().as_secs_f64();
        let in_time = limit.map_or(true, |l| seconds <= l);
        Self {
            name: name.into(),
            passed: successes >= required && in_time,
            successes,
            trials,
            required,
            seconds,
            time_limit: limit,
            blocking: true,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed {
            "PASS"
        } else if self.blocking {
            "FAIL"
        } else {
            "FAIL (non-blocking)"
        };
        let limit = self.time_limit.map_or(String::new(), |l| format!(" (limit {l:.0}s)"));
        format!(
            "{verdict} {}: {}/{} (need {}) in {:.1}s{limit} {}",
            self.name, self.successes, self.trials, self.required, self.seconds, self.detail
        )
    }
}

fn seeded(master: u64, label: &str, i: usize) -> Rng {
    rng_from_seed(derive_indexed(master, label, i as u64))
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigen_desc(&((m + m.transpose()) * 0.5)).0.last().copied().unwrap_or(0.0)
}

/// Random orthonormal basis times a prescribed spectrum.
fn with_spectrum(vals: &[f64], rng: &mut Rng) -> DMatrix<f64> {
    let n = vals.len();
    let g = DMatrix::from_vec(n, n, gaussian_vec(rng, n * n));
    let q = g.qr().q();
    let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(vals)) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Random PSD matrix of spectral norm `norm`, cycling through Wishart,
/// geometrically decaying and clustered-top spectra.
pub fn random_psd(n: usize, norm: f64, kind: usize, rng: &mut Rng) -> DMatrix<f64> {
    let vals: Vec<f64> = match kind % 3 {
        0 => {
            let c = DMatrix::from_vec(n, n, gaussian_vec(rng, n * n));
            let a = &c * c.transpose();
            return (&a + a.transpose()) * (0.5 * norm / lambda_max(&a));
        }
        1 => {
            let r: f64 = rng.gen_range(0.5..0.95);
            (0..n).map(|i| r.powi(i as i32)).collect()
        }
        _ => {
            let top = rng.gen_range(1..=n.min(10));
            (0..n).map(|i| if i < top { 1.0 - 0.01 * i as f64 } else { 0.1 * rng.gen::<f64>() }).collect()
        }
    };
    with_spectrum(&vals, rng) * (norm / vals[0])
}

/// List decoding on truncated-normal mixtures with far-blob and mimic
/// outliers: list length at most `4/α` and best error at most
/// `2·10³·σ/√α`, on every trial.
pub fn list_decoding(alphas: &[f64], seeds: u64, d: usize, time_limit: Option<f64>) -> CheckResult {
    let start = Instant::now();
    let (mut ok, mut trials) = (0, 0);
    let mut settings = Vec::new();
    for &alpha in alphas {
        let t = Instant::now();
        let n = (d as f64 / alpha).ceil() as usize * 4;
        let bound = 2e3 / alpha.sqrt();
        let cap = (4.0 / alpha).floor() as usize;
        let (mut worst, mut longest, mut good) = (0f64, 0usize, 0usize);
        for policy in [OutlierPolicy::FarBlob, OutlierPolicy::Mimic] {
            for seed in 0..seeds {
                trials += 1;
                let m = match gen_mixture(&MixtureSpec::list_decoding(n, d, alpha, 1.0, policy, seed)) {
                    Ok(m) => m,
                    Err(_) => continue,
                };
                let Ok(out) = output_list(&m.data, EstimatorConfig::new(alpha, 1.0), None, &mut rng_from_seed(seed)) else {
                    continue;
                };
                let err = out.min_error(m.target_mean());
                worst = worst.max(err);
                longest = longest.max(out.means.len());
                if out.means.len() <= cap && err <= bound && !out.cap_exceeded {
                    good += 1;
                }
            }
        }
        ok += good;
        let secs = t.elapsed().as_secs_f64();
        settings.push(json!({
            "alpha": alpha, "n": n, "passed": good, "worst_error": worst, "error_bound": bound,
            "longest_list": longest, "list_cap": cap, "seconds": secs,
            "within_time": time_limit.map_or(true, |l| secs <= l),
        }));
    }
    let all_in_time = settings.iter().all(|s| s["within_time"] == json!(true));
    let mut r = CheckResult::finish("list-decoding", ok, trials, trials, start, None, json!({ "settings": settings }));
    r.time_limit = time_limit;
    r.passed &= all_in_time;
    r
}

/// Both sandwich inequalities `A ⪯ (1+ε)^m Ã` and `(1−ε)^m Ã ⪯ A` checked
/// densely with tolerance `10⁻⁸‖A‖`.
pub fn sandwich_holds(a: &DMatrix<f64>, at: &DMatrix<f64>, m: usize, eps: f64) -> bool {
    let up = at * (1.0 + eps).powi(m as i32) - a;
    let lo = a - at * (1.0 - eps).powi(m as i32);
    let tol = -1e-8 * lambda_max(a);
    min_eig(&up) >= tol && min_eig(&lo) >= tol
}

/// Spectral sandwich of `pca_topk` at dimension `dim`, `m ∈ {1, 3, 8}`
/// cycled over trials.
pub fn spectral_sandwich(trials: usize, dim: usize, required: usize, seed: u64, time_limit: Option<f64>) -> CheckResult {
    let start = Instant::now();
    let (eps, delta) = (0.05, 0.01);
    let mut ok = 0;
    let mut worst = f64::INFINITY;
    for t in 0..trials {
        let mut r = seeded(seed, "checks/sandwich", t);
        let m = [1, 3, 8][t % 3];
        let norm = (r.gen_range(-3.0f64..3.0)).exp();
        let a = random_psd(dim, norm, t / 3, &mut r);
        let op = DenseOperator::new(a.clone());
        let Ok(s) = pca_topk(&op, m, eps, delta, &mut r) else { continue };
        let at = s.assemble(&op);
        let slack = min_eig(&(&at * (1.0 + eps).powi(m as i32) - &a)).min(min_eig(&(&a - &at * (1.0 - eps).powi(m as i32))));
        worst = worst.min(slack / lambda_max(&a));
        if sandwich_holds(&a, &at, m, eps) {
            ok += 1;
        }
    }
    CheckResult::finish(
        "spectral-sandwich",
        ok,
        trials,
        required,
        start,
        time_limit,
        json!({ "dim": dim, "eps": eps, "delta": delta, "worst_relative_slack": worst }),
    )
}

/// `simple_projection` against the exact fantope projection: trace-norm
/// distance at most `4√(kε)+9kε` and `‖W̃‖ ≤ Tr W̃/k + 10⁻⁸`.
pub fn fantope(trials: usize, dim: usize, seed: u64, time_limit: Option<f64>) -> CheckResult {
    let start = Instant::now();
    let mut ok = 0;
    let mut worst_ratio = 0f64;
    let mut cap_violations = 0;
    for t in 0..trials {
        let mut r = seeded(seed, "checks/fantope", t);
        let k = [2, 3][t % 2];
        let eps = [0.01, 0.002][(t / 2) % 2];
        let kappa = (r.gen_range(-2.0f64..2.0)).exp();
        let g = random_psd(dim, kappa, t / 4, &mut r);
        let cfg = FantopeConfig::new(eps, 0.01);
        let op = std::sync::Arc::new(DenseOperator::new(g.clone()));
        let Ok(w) = simple_projection(op, kappa, k, &cfg, &mut r) else { continue };
        let dense = assemble_w(&w);
        let Ok(gs) = DenseSym::new(g) else { continue };
        let Ok(exact) = exact_fantope_projection(&DenseSym::zeros(0), &gs, k) else { continue };
        let kf = k as f64;
        let bound = 4.0 * (kf * eps).sqrt() + 9.0 * kf * eps;
        let dist = trace_norm_sym(&(&dense - &exact.w));
        worst_ratio = worst_ratio.max(dist / bound);
        let capped = lambda_max(&dense) <= dense.trace() / kf + 1e-8;
        if !capped {
            cap_violations += 1;
        }
        if dist <= bound && capped {
            ok += 1;
        }
    }
    CheckResult::finish(
        "fantope-projection",
        ok,
        trials,
        trials,
        start,
        time_limit,
        json!({ "dim": dim, "worst_distance_over_bound": worst_ratio, "cap_violations": cap_violations }),
    )
}

/// Random factorised Ky-Fan packing instance with factors of rank 1–2.
pub fn random_sdp_instance(rng: &mut Rng, max_n: usize, max_lm: usize, max_k: usize) -> SdpInstance {
    let n = rng.gen_range(4..=max_n);
    let l = rng.gen_range(2..=max_lm);
    let m = rng.gen_range(2..=max_lm);
    let k = rng.gen_range(1..=max_k.min(m));
    let s = rng.gen_range((0.05f64).ln()..(20f64).ln()).exp();
    let factor = |rows: usize, var: f64, rng: &mut Rng| {
        let rk = rng.gen_range(1..=2);
        DMatrix::from_vec(rows, rk, gaussian_vec(rng, rows * rk)) * var.sqrt()
    };
    let a = (0..n).map(|_| factor(l, s / l as f64, rng)).collect();
    let b = (0..n).map(|_| factor(m, s * k as f64 / m as f64, rng)).collect();
    SdpInstance::new(l, m, k, a, b, 0.1, 0.01).expect("well-formed instance")
}

/// `n` copies of the scalar pair `(a, b)`; the packing optimum is
/// `1/max(a, b)`.
pub fn scalar_instance(n: usize, a: f64, b: f64) -> SdpInstance {
    let fa = vec![DMatrix::from_element(1, 1, a.sqrt()); n];
    let fb = vec![DMatrix::from_element(1, 1, b.sqrt()); n];
    SdpInstance::new(1, 1, 1, fa, fb, 0.1, 0.01).expect("scalar instance")
}

fn decide(inst: &SdpInstance, rng: &mut Rng) -> Option<SdpAnswer> {
    let cfg = SolverConfig::default();
    let n = inst.n() as f64;
    let out = if inst.eps >= 1.0 / (n * n) {
        packing_covering_decision(inst, &cfg, rng)
    } else {
        solver_loop(inst, &cfg, rng)
    };
    out.ok().map(|o| o.answer)
}

/// Certificate verification on random instances, plus the answer side on
/// scalar instances whose optimum lies outside the `ε` gap.
pub fn sdp_decision(trials: usize, required: usize, seed: u64, time_limit: Option<f64>) -> CheckResult {
    let start = Instant::now();
    let mut ok = 0;
    let mut dual = 0;
    for t in 0..trials {
        let mut r = seeded(seed, "checks/sdp", t);
        let inst = random_sdp_instance(&mut r, 30, 16, 3);
        if let Some(ans) = decide(&inst, &mut r) {
            dual += ans.is_dual() as usize;
            if verify_certificate(&inst, &ans).ok {
                ok += 1;
            }
        }
    }
    let mut analytic_ok = true;
    let mut analytic = Vec::new();
    let eps = 0.1;
    for (i, &(n, a, b)) in ANALYTIC.iter().enumerate() {
        let inst = scalar_instance(n, a, b);
        let opt = 1.0 / a.max(b);
        let want_dual = opt >= 1.0 / (1.0 - eps);
        let mut r = seeded(seed, "checks/sdp-analytic", i);
        let got = decide(&inst, &mut r);
        let good = got.as_ref().is_some_and(|ans| ans.is_dual() == want_dual && verify_certificate(&inst, ans).ok);
        analytic_ok &= good;
        analytic.push(json!({ "n": n, "a": a, "b": b, "opt": opt, "dual_expected": want_dual, "ok": good }));
    }
    let mut res = CheckResult::finish(
        "sdp-decision",
        ok,
        trials,
        required,
        start,
        time_limit,
        json!({ "dual_answers": dual, "analytic_all_match": analytic_ok, "analytic": analytic }),
    );
    res.passed &= analytic_ok;
    res
}

/// Scalar instances `(copies, a, b)`, optimum `1/max(a,b)` well clear of
/// `[1−ε, 1+ε]`.
const ANALYTIC: [(usize, f64, f64); 10] = [
    (1, 0.5, 0.5),
    (1, 0.8, 0.2),
    (1, 2.0, 2.0),
    (1, 10.0, 1.0),
    (4, 0.25, 0.5),
    (4, 0.1, 0.1),
    (4, 1.5, 0.5),
    (9, 0.6, 0.6),
    (9, 3.0, 3.0),
    (9, 0.2, 5.0),
];

/// `approx_cost` against the projected-subgradient optimum on small
/// instances: `0 ≤ w̄ ≤ b`, `Σw̄ ≥ 0.95` and Ky-Fan value at most the
/// optimum plus `10⁻⁴`.
pub fn approx_cost_vs_oracle(trials: usize, seed: u64, time_limit: Option<f64>) -> CheckResult {
    let start = Instant::now();
    let mut ok = 0;
    let (mut min_mass, mut worst_gap) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..trials {
        let mut r = seeded(seed, "checks/cost", t);
        let n = r.gen_range(4..=12);
        let d = r.gen_range(2..=5);
        let k = r.gen_range(1..=2);
        let mut vals = gaussian_vec(&mut r, n * d);
        for i in 0..n {
            let s: f64 = r.gen_range(0.5..3.0);
            vals[i * d..(i + 1) * d].iter_mut().for_each(|v| *v *= s);
        }
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(1.2..2.5) / n as f64).collect();
        let Ok(x) = Dataset::new(n, d, vals) else { continue };
        let nu = vec![0.0; d];
        let Ok(q) = CostQuery::new(&x, &nu, &b, k, 0.05, 0.01) else { continue };
        let Ok(c) = approx_cost(&q, &mut r) else { continue };
        let Ok((opt, _)) = exact_cost_small(&q) else { continue };
        let kf = kyfan_sym(&weighted_second_moment(&q, &c.wbar), k.min(d));
        let feasible = c.wbar.iter().zip(&b).all(|(w, bi)| *w >= 0.0 && *w <= bi * (1.0 + 1e-12));
        min_mass = min_mass.min(c.mass());
        worst_gap = worst_gap.max(kf - opt);
        if feasible && c.mass() >= 0.95 && kf <= opt + 1e-4 {
            ok += 1;
        }
    }
    CheckResult::finish(
        "approx-cost",
        ok,
        trials,
        trials,
        start,
        time_limit,
        json!({ "eps": 0.05, "min_mass": min_mass, "worst_value_minus_opt": worst_gap }),
    )
}

/// Sketched inner products `⟨exp(B), U_i U_iᵀ⟩` and `Tr exp(B)` against the
/// dense exponential; a trial fails if any estimate leaves `(1±ε)`.
pub fn sketch_accuracy(trials: usize, seed: u64, time_limit: Option<f64>) -> CheckResult {
    let start = Instant::now();
    let (eps, delta) = (0.1, 0.05);
    let mut ok = 0;
    let mut worst = 0f64;
    for t in 0..trials {
        let mut r = seeded(seed, "checks/sketch", t);
        let dim = r.gen_range(2..=20);
        let kappa = r.gen_range(0.0..3.0);
        let b = if kappa > 0.0 { random_psd(dim, kappa, t, &mut r) } else { DMatrix::zeros(dim, dim) };
        let Ok(bs) = DenseSym::new(b.clone()) else { continue };
        let Ok(ex) = dense_expm(&bs) else { continue };
        let ex = ex.into_matrix();
        let targets: Vec<DMatrix<f64>> = (0..r.gen_range(1..=5))
            .map(|_| {
                let c = r.gen_range(1..=2);
                DMatrix::from_vec(dim, c, gaussian_vec(&mut r, dim * c))
            })
            .collect();
        let op = DenseOperator::new(b);
        let input = ExpInput::new(&op, kappa);
        let Ok(z) = estimate_inner_products(input, &targets, eps, delta, &mut r) else { continue };
        let Ok(tr) = estimate_trace(input, &DMatrix::identity(dim, dim), eps, delta, &mut r) else { continue };
        let mut dev = (tr / ex.trace() - 1.0).abs();
        for (zi, u) in z.iter().zip(&targets) {
            let want = (u.transpose() * &ex * u).trace();
            dev = dev.max((zi / want - 1.0).abs());
        }
        worst = worst.max(dev);
        if dev <= eps {
            ok += 1;
        }
    }
    let allowed = (2.0 * delta * trials as f64).floor() as usize;
    CheckResult::finish(
        "sketch-accuracy",
        ok,
        trials,
        trials.saturating_sub(allowed),
        start,
        time_limit,
        json!({ "eps": eps, "delta": delta, "failures_allowed": allowed, "worst_relative_error": worst }),
    )
}

/// Semirandom planted partition: best list member within
/// `C_cal·cn/(α²(a−b)²)` of `S`, plus exact recovery from the expected
/// adjacency rows.
pub fn planted_partition(n: usize, seeds: u64, time_limit: Option<f64>) -> CheckResult {
    let start = Instant::now();
    let (alpha, a, b) = (0.2, 40.0, 10.0);
    let bound = PLANTED_C_CAL * error_scale(n, alpha, a, b);
    let mut ok = 0;
    let mut trials = 0;
    let mut runs = Vec::new();
    for adversary in [Adversary::Empty, Adversary::Mimic] {
        for seed in 0..seeds {
            trials += 1;
            let Ok(g) = generate(n, alpha, a, b, adversary, seed) else { continue };
            let Ok(rec) = recover(&g.rows, alpha, a, b, seed) else { continue };
            let err = rec.min_error(&g.s);
            if err as f64 <= bound {
                ok += 1;
            }
            runs.push(json!({ "adversary": format!("{adversary:?}").to_lowercase(), "seed": seed, "error": err, "list": rec.sets.len() }));
        }
    }
    let mut exact_ok = true;
    for seed in 0..3 {
        let Ok(g) = generate(n, alpha, a, b, Adversary::Empty, seed) else {
            exact_ok = false;
            continue;
        };
        let s = round_vector(&expected_row(n, &g.s, a, b), a, b);
        exact_ok &= s.is_ok_and(|s| partition_error(&g.s, &s) == 0);
    }
    let mut res = CheckResult::finish(
        "planted-partition",
        ok,
        trials,
        trials,
        start,
        time_limit,
        json!({ "n": n, "c_cal": PLANTED_C_CAL, "error_bound": bound, "exact_expectation_recovered": exact_ok, "runs": runs }),
    );
    res.passed &= exact_ok;
    res
}

/// Least-squares slope of `ln t` against `ln N`.
pub fn loglog_slope(sizes: &[usize], secs: &[f64]) -> f64 {
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = secs.iter().map(|s| s.max(1e-9).ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Wall time of `output_list` on mimic mixtures at `α = 0.25`, fitted to
/// `c·N^β`. The quadratic distance cache is off so every size runs the
/// same code path. Non-blocking.
pub fn scaling(sizes: &[usize], d: usize, seed: u64) -> CheckResult {
    let start = Instant::now();
    let alpha = 0.25;
    let mut secs = Vec::new();
    for &n in sizes {
        let Ok(m) = gen_mixture(&MixtureSpec::list_decoding(n, d, alpha, 1.0, OutlierPolicy::Mimic, seed)) else {
            secs.push(f64::NAN);
            continue;
        };
        let mut cfg = EstimatorConfig::new(alpha, 1.0);
        cfg.cache_limit = 0;
        let t = Instant::now();
        let _ = output_list(&m.data, cfg, None, &mut rng_from_seed(seed));
        secs.push(t.elapsed().as_secs_f64());
    }
    let beta = loglog_slope(sizes, &secs);
    let good = beta.is_finite() && beta <= SCALING_BETA_MAX;
    let mut res = CheckResult::finish(
        "scaling",
        good as usize,
        1,
        1,
        start,
        None,
        json!({ "d": d, "alpha": alpha, "cache": false, "sizes": sizes, "seconds": secs, "beta": beta, "beta_max": SCALING_BETA_MAX }),
    );
    res.blocking = false;
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let sizes = [1000, 2000, 4000];
        let secs: Vec<f64> = sizes.iter().map(|&n| 3e-6 * (n as f64).powf(1.2)).collect();
        assert!((loglog_slope(&sizes, &secs) - 1.2).abs() < 1e-9);
    }

    #[test]
    fn random_psd_has_requested_norm() {
        let mut r = rng_from_seed(4);
        for kind in 0..3 {
            let m = random_psd(9, 2.5, kind, &mut r);
            assert!((lambda_max(&m) - 2.5).abs() < 1e-9);
            assert!(min_eig(&m) >= -1e-12);
        }
    }

    #[test]
    fn small_suites_pass() {
        for r in [
            spectral_sandwich(6, 12, 6, 1, None),
            fantope(4, 8, 1, None),
            sketch_accuracy(10, 1, None),
            approx_cost_vs_oracle(2, 1, None),
        ] {
            assert!(r.passed, "{}", r.line());
        }
    }
}
