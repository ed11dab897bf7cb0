//! List-decodable mean estimation: an outer loop that emits candidates and
//! removes budget, around a cost-descent inner loop.

use std::sync::Arc;

use rand::seq::index::sample;
use serde::Serialize;
use thiserror::Error;

use crate::cost::{approx_cost_with, CostError, CostParams, CostQuery};
use crate::io::Dataset;
use crate::linalg::{dot, norm_sq, sq_dist};
use crate::rng::Rng;
use crate::spectral::{pca_topk, DenseOperator};

/// Radius multiplier in the list guarantee `r·σ/√α`.
pub const RADIUS: f64 = 2e3;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("spectral step failed: {0}")]
    Spectral(String),
    #[error("sub-rank cost needs dense rows; this point set has none")]
    NeedsDense,
}

/// Rows addressable by index, with squared distances between them.
pub trait PointSet {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn row_into(&self, i: usize, out: &mut [f64]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sq_dist_rows(&self, i: usize, j: usize) -> f64 {
        let mut a = vec![0.0; self.dim()];
        let mut b = vec![0.0; self.dim()];
        self.row_into(i, &mut a);
        self.row_into(j, &mut b);
        sq_dist(&a, &b)
    }

    /// Dense view, required when the projection rank is below the dimension.
    fn dense(&self) -> Option<&Dataset> {
        None
    }
}

impl PointSet for Dataset {
    fn len(&self) -> usize {
        self.n()
    }
    fn dim(&self) -> usize {
        self.d()
    }
    fn row_into(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(i));
    }
    fn sq_dist_rows(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }
    fn dense(&self) -> Option<&Dataset> {
        Some(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimatorConfig {
    pub alpha: f64,
    pub sigma: f64,
    /// Projection rank; `100·ceil(1/α)` when unset.
    pub ell: Option<usize>,
    /// Slack handed to the cost routine.
    pub cost_eps: f64,
    pub cost_delta: f64,
    /// Cap on descent steps; `10·ceil(log₂ d) + 10` when unset.
    pub descend_cap: Option<usize>,
    /// Cache row distances when `N² ≤ cache_limit`.
    pub cache_limit: usize,
}

impl EstimatorConfig {
    pub fn new(alpha: f64, sigma: f64) -> Self {
        Self { alpha, sigma, ell: None, cost_eps: 0.01, cost_delta: 0.01, descend_cap: None, cache_limit: 1 << 25 }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(EstimatorError::Invalid(format!("alpha must lie in (0, 1/2], got {}", self.alpha)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(EstimatorError::Invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.cost_eps > 0.0 && self.cost_eps < 1.0) {
            return Err(EstimatorError::Invalid(format!("cost eps must lie in (0, 1), got {}", self.cost_eps)));
        }
        if self.ell == Some(0) {
            return Err(EstimatorError::Invalid("ell must be positive".into()));
        }
        Ok(())
    }
}

/// Derived constants `k`, `ℓ`, `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub k: usize,
    pub ell: usize,
    pub p: usize,
    pub radius: f64,
}

impl Constants {
    pub fn new(cfg: &EstimatorConfig, d: usize) -> Self {
        let k = (1.0 / cfg.alpha).ceil() as usize;
        let ell = cfg.ell.unwrap_or(100 * k);
        let p = if d <= 1 { 1.0 } else { (10.0 * (d as f64).ln() / (1.0 / (1.0 - cfg.alpha)).ln()).ceil() };
        Self { k, ell, p: (p as usize).max(1), radius: RADIUS }
    }
}

/// Square-root of the median per-coordinate variance. A heuristic for
/// exploratory runs when the inlier scale is unknown; it assumes the
/// coordinate spread of the bulk reflects the inliers.
pub fn median_variance_sigma(x: &Dataset) -> f64 {
    let (n, d) = (x.n(), x.d());
    if n < 2 {
        return 0.0;
    }
    let mut vars: Vec<f64> = (0..d)
        .map(|j| {
            let mean = (0..n).map(|i| x.row(i)[j]).sum::<f64>() / n as f64;
            (0..n).map(|i| (x.row(i)[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        })
        .collect();
    vars.sort_by(f64::total_cmp);
    let mid = d / 2;
    let med = if d % 2 == 1 { vars[mid] } else { 0.5 * (vars[mid - 1] + vars[mid]) };
    med.sqrt()
}

/// Minimiser of `Σ w_i c_i` over `0 ≤ w ≤ b`, `Σ w = 1`: fill the cheapest
/// entries first, ties by index.
pub fn greedy_fill(costs: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let mut order: Vec<usize> = (0..costs.len()).filter(|&i| b[i] > 0.0).collect();
    let by = |&i: &usize, &j: &usize| costs[i].total_cmp(&costs[j]).then(i.cmp(&j));
    let bmax = order.iter().map(|&i| b[i]).fold(0.0, f64::max);
    // Enough entries to fill unit mass if every budget were the largest.
    let guess = if bmax > 0.0 { (2.0 / bmax).ceil() as usize + 1 } else { order.len() };
    if guess < order.len() {
        order.select_nth_unstable_by(guess, by);
        order[..guess].sort_unstable_by(by);
        let mass: f64 = order[..guess].iter().map(|&i| b[i]).sum();
        if mass < 1.0 {
            order.sort_unstable_by(by);
        }
    } else {
        order.sort_unstable_by(by);
    }
    let mut w = vec![0.0; costs.len()];
    let mut left = 1.0;
    let mut value = 0.0;
    for i in order {
        if left <= 0.0 {
            break;
        }
        let take = b[i].min(left);
        w[i] = take;
        value += take * costs[i];
        left -= take;
    }
    (value, w)
}

#[derive(Debug, Clone)]
enum Center {
    Row(usize),
    Point(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Evaluated {
    theta: f64,
    center: Center,
    wbar: Vec<f64>,
    /// Squared distances to the center, kept on the full-rank path.
    dists: Option<Arc<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescendExit {
    /// Cost fell below `σ²`.
    Base,
    /// Descent stalled; the weights were trimmed around the last center.
    Removal,
}

/// A candidate mean with the weights to be removed from the budget.
#[derive(Debug, Clone)]
pub struct SanitizingTuple {
    pub muhat: Vec<f64>,
    pub what: Vec<f64>,
    pub exit: DescendExit,
    pub thetas: Vec<f64>,
    pub capped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub thetas: Vec<f64>,
    pub exit: DescendExit,
    pub removed: f64,
    pub budget: f64,
    /// `Σ_{i∈I} b_i` after the round, when inliers are known.
    pub inlier_budget: Option<f64>,
    pub capped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ListOutcome {
    pub means: Vec<Vec<f64>>,
    pub rounds: Vec<RoundRecord>,
    pub constants: Constants,
    /// The round cap `4/α + 1` was reached before the budget ran out.
    pub cap_exceeded: bool,
}

impl ListOutcome {
    /// `min_i ‖μ̂_i − μ‖`.
    pub fn min_error(&self, mu: &[f64]) -> f64 {
        self.means.iter().map(|m| sq_dist(m, mu).sqrt()).fold(f64::INFINITY, f64::min)
    }
}

/// Runs the estimator over one point set, caching row distances.
pub struct Estimator<'a, P: PointSet + ?Sized> {
    points: &'a P,
    cfg: EstimatorConfig,
    consts: Constants,
    cache: Vec<Option<Arc<Vec<f64>>>>,
}

impl<'a, P: PointSet + ?Sized> Estimator<'a, P> {
    pub fn new(points: &'a P, cfg: EstimatorConfig) -> Result<Self, EstimatorError> {
        cfg.validate()?;
        if points.is_empty() || points.dim() == 0 {
            return Err(EstimatorError::Invalid("empty point set".into()));
        }
        let consts = Constants::new(&cfg, points.dim());
        if consts.ell < points.dim() && points.dense().is_none() {
            return Err(EstimatorError::NeedsDense);
        }
        let n = points.len();
        let cache = if n.saturating_mul(n) <= cfg.cache_limit { vec![None; n] } else { Vec::new() };
        Ok(Self { points, cfg, consts, cache })
    }

    pub fn constants(&self) -> Constants {
        self.consts
    }

    fn full_rank(&self) -> bool {
        self.consts.ell >= self.points.dim()
    }

    fn row_dists(&mut self, j: usize) -> Arc<Vec<f64>> {
        if let Some(Some(d)) = self.cache.get(j) {
            return d.clone();
        }
        let d: Arc<Vec<f64>> = Arc::new((0..self.points.len()).map(|i| self.points.sq_dist_rows(i, j)).collect());
        if let Some(slot) = self.cache.get_mut(j) {
            *slot = Some(d.clone());
        }
        d
    }

    fn center_vec(&self, c: &Center) -> Vec<f64> {
        match c {
            Center::Row(j) => {
                let mut v = vec![0.0; self.points.dim()];
                self.points.row_into(*j, &mut v);
                v
            }
            Center::Point(v) => v.clone(),
        }
    }

    fn evaluate(&mut self, center: Center, b: &[f64], rng: &mut Rng) -> Result<Evaluated, EstimatorError> {
        if self.full_rank() {
            let dists = match &center {
                Center::Row(j) => self.row_dists(*j),
                Center::Point(v) => {
                    let mut row = vec![0.0; self.points.dim()];
                    Arc::new(
                        (0..self.points.len())
                            .map(|i| {
                                self.points.row_into(i, &mut row);
                                sq_dist(&row, v)
                            })
                            .collect(),
                    )
                }
            };
            let (theta, wbar) = greedy_fill(&dists, b);
            return Ok(Evaluated { theta, center, wbar, dists: Some(dists) });
        }
        let x = self.points.dense().ok_or(EstimatorError::NeedsDense)?;
        let nu = self.center_vec(&center);
        let q = CostQuery::new(x, &nu, b, self.consts.ell, self.cfg.cost_eps, self.cfg.cost_delta)?;
        let cert = approx_cost_with(&q, &CostParams::default(), rng)?;
        Ok(Evaluated { theta: cert.theta, center, wbar: cert.wbar, dists: None })
    }

    fn sample_rows(&self, rng: &mut Rng) -> Vec<usize> {
        let n = self.points.len();
        let p = self.consts.p.min(n);
        let mut idx = sample(rng, n, p).into_vec();
        idx.sort_unstable();
        idx
    }

    fn best_of(&mut self, cands: Vec<Center>, b: &[f64], rng: &mut Rng) -> Result<Evaluated, EstimatorError> {
        let mut best: Option<Evaluated> = None;
        for c in cands {
            let e = self.evaluate(c, b, rng)?;
            if best.as_ref().is_none_or(|cur| e.theta < cur.theta) {
                best = Some(e);
            }
        }
        best.ok_or_else(|| EstimatorError::Invalid("no candidates".into()))
    }

    /// Cost at `p` random data points; returns the cheapest.
    pub fn warm_start(&mut self, b: &[f64], rng: &mut Rng) -> Result<(f64, Vec<f64>, Vec<f64>), EstimatorError> {
        let e = self.warm(b, rng)?;
        Ok((e.theta, self.center_vec(&e.center), e.wbar))
    }

    fn warm(&mut self, b: &[f64], rng: &mut Rng) -> Result<Evaluated, EstimatorError> {
        self.check_budget(b)?;
        let rows = self.sample_rows(rng);
        self.best_of(rows.into_iter().map(Center::Row).collect(), b, rng)
    }

    fn check_budget(&self, b: &[f64]) -> Result<(), EstimatorError> {
        if b.len() != self.points.len() {
            return Err(EstimatorError::Invalid(format!("{} budgets for {} points", b.len(), self.points.len())));
        }
        let total: f64 = b.iter().sum();
        if total < 1.0 - 1e-9 {
            return Err(EstimatorError::Invalid(format!("budget mass {total} below 1")));
        }
        Ok(())
    }

    /// Top-`ℓ` eigenbasis of the weighted second moment about `ν`.
    fn subspace(&self, nu: &[f64], wbar: &[f64], rng: &mut Rng) -> Result<Vec<Vec<f64>>, EstimatorError> {
        let x = self.points.dense().ok_or(EstimatorError::NeedsDense)?;
        let d = x.d();
        let mass: f64 = wbar.iter().sum();
        let mut s = nalgebra::DMatrix::zeros(d, d);
        let mut z = vec![0.0; d];
        for (i, &w) in wbar.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (zj, (a, c)) in z.iter_mut().zip(x.row(i).iter().zip(nu)) {
                *zj = a - c;
            }
            let zv = nalgebra::DVector::from_column_slice(&z);
            s.ger(w / mass, &zv, &zv, 1.0);
        }
        let op = DenseOperator::new(s);
        let pca = pca_topk(&op, self.consts.ell.min(d), 0.1, self.cfg.cost_delta, rng)
            .map_err(|e| EstimatorError::Spectral(e.to_string()))?;
        Ok(pca.vectors)
    }

    fn projected(&self, basis: &[Vec<f64>], nu: &[f64], i: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.points.dim()];
        self.points.row_into(i, &mut row);
        for (r, c) in row.iter_mut().zip(nu) {
            *r -= c;
        }
        let mut out = vec![0.0; row.len()];
        for v in basis {
            let c = dot(v, &row);
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        out
    }

    fn descend_cap(&self) -> usize {
        self.cfg.descend_cap.unwrap_or(10 * (self.points.dim() as f64).log2().ceil().max(1.0) as usize + 10)
    }

    /// One run of the descent with budgets `b`.
    pub fn descend_cost(&mut self, b: &[f64], rng: &mut Rng) -> Result<SanitizingTuple, EstimatorError> {
        let sigma2 = self.cfg.sigma * self.cfg.sigma;
        let mut cur = self.warm(b, rng)?;
        let mut thetas = vec![cur.theta];
        let mut prev_theta = f64::INFINITY;
        let mut prev: Option<(Evaluated, Option<Vec<Vec<f64>>>)> = None;
        let cap = self.descend_cap();
        let mut steps = 0;
        while cur.theta >= sigma2 && cur.theta <= 0.5 * prev_theta {
            if steps == cap {
                break;
            }
            steps += 1;
            let rows = self.sample_rows(rng);
            let (cands, basis) = if self.full_rank() {
                (rows.into_iter().map(Center::Row).collect(), None)
            } else {
                let nu = self.center_vec(&cur.center);
                let basis = self.subspace(&nu, &cur.wbar, rng)?;
                let cands = rows
                    .into_iter()
                    .map(|j| {
                        let mut y = self.projected(&basis, &nu, j);
                        for (a, c) in y.iter_mut().zip(&nu) {
                            *a += c;
                        }
                        Center::Point(y)
                    })
                    .collect();
                (cands, Some(basis))
            };
            let next = self.best_of(cands, b, rng)?;
            thetas.push(next.theta);
            prev_theta = cur.theta;
            prev = Some((std::mem::replace(&mut cur, next), basis));
        }
        let capped = cur.theta >= sigma2 && cur.theta <= 0.5 * prev_theta;
        if cur.theta < sigma2 {
            let muhat = self.center_vec(&cur.center);
            return Ok(SanitizingTuple { muhat, what: cur.wbar, exit: DescendExit::Base, thetas, capped });
        }
        let (last, basis) = prev.expect("descent runs at least once when the cost is at least sigma squared");
        let nu = self.center_vec(&last.center);
        let lengths: Vec<f64> = match (&last.dists, &basis) {
            (Some(d), _) => d.to_vec(),
            (None, Some(basis)) => (0..self.points.len()).map(|i| norm_sq(&self.projected(basis, &nu, i))).collect(),
            (None, None) => unreachable!("sub-rank steps always carry a basis"),
        };
        let what = weight_removal(&lengths, &last.wbar)?;
        Ok(SanitizingTuple { muhat: nu, what, exit: DescendExit::Removal, thetas, capped })
    }

    /// Repeats the descent, removing `ŵ` from the budget each round, until
    /// less than unit budget remains.
    pub fn output_list(&mut self, inliers: Option<&[usize]>, rng: &mut Rng) -> Result<ListOutcome, EstimatorError> {
        let n = self.points.len();
        let mut b = vec![2.0 / (self.cfg.alpha * n as f64); n];
        let cap = (4.0 / self.cfg.alpha).floor() as usize + 1;
        let mut out = ListOutcome { means: Vec::new(), rounds: Vec::new(), constants: self.consts, cap_exceeded: false };
        while b.iter().sum::<f64>() >= 1.0 - 1e-9 {
            if out.rounds.len() == cap {
                out.cap_exceeded = true;
                break;
            }
            let t = self.descend_cost(&b, rng)?;
            let mut removed = 0.0;
            for (bi, wi) in b.iter_mut().zip(&t.what) {
                let w = wi.min(*bi);
                removed += w;
                *bi = (*bi - w).max(0.0);
            }
            out.rounds.push(RoundRecord {
                round: out.rounds.len() + 1,
                thetas: t.thetas,
                exit: t.exit,
                removed,
                budget: b.iter().sum(),
                inlier_budget: inliers.map(|idx| idx.iter().map(|&i| b[i]).sum()),
                capped: t.capped,
            });
            out.means.push(t.muhat);
        }
        Ok(out)
    }
}

/// Keeps the weights of the points nearest to the center (by `lengths`,
/// ties by index) until the kept mass reaches `1/2`.
pub fn weight_removal(lengths: &[f64], wbar: &[f64]) -> Result<Vec<f64>, EstimatorError> {
    let total: f64 = wbar.iter().sum();
    if total < 0.5 {
        return Err(EstimatorError::Invalid(format!("weights carry mass {total} < 0.5")));
    }
    let mut order: Vec<usize> = (0..wbar.len()).collect();
    order.sort_by(|&i, &j| lengths[i].total_cmp(&lengths[j]).then(i.cmp(&j)));
    let mut what = vec![0.0; wbar.len()];
    let mut acc = 0.0;
    for i in order {
        what[i] = wbar[i];
        acc += wbar[i];
        if acc >= 0.5 {
            break;
        }
    }
    Ok(what)
}

/// One-shot list decoding over `points`.
pub fn output_list<P: PointSet + ?Sized>(
    points: &P,
    cfg: EstimatorConfig,
    inliers: Option<&[usize]>,
    rng: &mut Rng,
) -> Result<ListOutcome, EstimatorError> {
    Estimator::new(points, cfg)?.output_list(inliers, rng)
}

/// Outcome of checking `‖μ − μ'‖ ≤ √(2(σ₁² + σ₂²)/γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResilienceVerdict {
    pub distance: f64,
    pub bound: f64,
    pub overlap: f64,
    pub holds: bool,
    /// No common mass, so the bound says nothing.
    pub vacuous: bool,
}

/// Means of two weightings with weighted covariance at most `σ₁²` and `σ₂²`
/// can differ by at most `√(2(σ₁²+σ₂²)/γ)` where `γ = Σ min(w_i, w'_i)`.
pub fn resilience_check(w: &[f64], w2: &[f64], mu: &[f64], mu2: &[f64], sigma1: f64, sigma2: f64) -> ResilienceVerdict {
    let overlap: f64 = w.iter().zip(w2).map(|(a, b)| a.min(*b)).sum();
    let distance = sq_dist(mu, mu2).sqrt();
    if overlap <= 0.0 {
        return ResilienceVerdict { distance, bound: f64::INFINITY, overlap, holds: true, vacuous: true };
    }
    let bound = (2.0 * (sigma1 * sigma1 + sigma2 * sigma2) / overlap).sqrt();
    ResilienceVerdict { distance, bound, overlap, holds: distance <= bound * (1.0 + 1e-12), vacuous: false }
}

/// Weighted mean and top eigenvalue of the weighted covariance.
pub fn weighted_moments(x: &Dataset, w: &[f64]) -> (Vec<f64>, f64) {
    let d = x.d();
    let mass: f64 = w.iter().sum();
    let mut mu = vec![0.0; d];
    for (i, &wi) in w.iter().enumerate() {
        for (m, v) in mu.iter_mut().zip(x.row(i)) {
            *m += wi * v / mass;
        }
    }
    let mut cov = nalgebra::DMatrix::zeros(d, d);
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let z: Vec<f64> = x.row(i).iter().zip(&mu).map(|(a, b)| a - b).collect();
        let zv = nalgebra::DVector::from_vec(z);
        cov.ger(wi / mass, &zv, &zv, 1.0);
    }
    (mu, crate::linalg::lambda_max(&cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::generate::{gen_mixture, MixtureSpec, OutlierPolicy};
    use crate::rng::rng_from_seed;

    #[test]
    fn constants_follow_alpha() {
        let c = Constants::new(&EstimatorConfig::new(0.1, 1.0), 50);
        assert_eq!(c.k, 10);
        assert_eq!(c.ell, 1000);
        assert_eq!(c.p, 372);
        assert_eq!(Constants::new(&EstimatorConfig::new(0.5, 1.0), 1).p, 1);
    }

    #[test]
    fn greedy_fill_matches_sort() {
        let costs = [5.0, 1.0, 3.0, 1.0, 9.0, 0.5];
        let b = [0.3, 0.2, 0.4, 0.2, 1.0, 0.0];
        let (v, w) = greedy_fill(&costs, &b);
        let want = [0.2, 0.2, 0.4, 0.2, 0.0, 0.0];
        assert!(w.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12), "{w:?}");
        assert!((v - (0.2 * 1.0 + 0.2 * 1.0 + 0.4 * 3.0 + 0.2 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn weight_removal_examples() {
        assert_eq!(weight_removal(&[1.0, 2.0, 3.0], &[0.3, 0.3, 0.4]).unwrap(), vec![0.3, 0.3, 0.0]);
        assert_eq!(weight_removal(&[1.0, 2.0, 3.0], &[0.6, 0.2, 0.2]).unwrap(), vec![0.6, 0.0, 0.0]);
        assert_eq!(weight_removal(&[2.0, 2.0, 1.0], &[0.3, 0.3, 0.1]).unwrap(), vec![0.3, 0.3, 0.1]);
        assert_eq!(weight_removal(&[2.0, 2.0], &[0.5, 0.5]).unwrap(), vec![0.5, 0.0]);
        assert!(weight_removal(&[1.0], &[0.4]).is_err());
    }

    #[test]
    fn warm_start_identical_points() {
        let x = Dataset::new(6, 2, vec![1.5; 12]).unwrap();
        let mut est = Estimator::new(&x, EstimatorConfig::new(0.5, 1.0)).unwrap();
        let b = vec![2.0 / 3.0; 6];
        let (theta, nu, w) = est.warm_start(&b, &mut rng_from_seed(0)).unwrap();
        assert_eq!(theta, 0.0);
        assert_eq!(nu, vec![1.5, 1.5]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_exhaustive_for_small_n() {
        let x = Dataset::from_rows(&[vec![0.0, 0.0], vec![0.1, 0.0], vec![0.3, 0.0], vec![50.0, 0.0]]).unwrap();
        let mut est = Estimator::new(&x, EstimatorConfig::new(0.5, 1.0)).unwrap();
        assert!(est.constants().p >= 4);
        let (theta, nu, _) = est.warm_start(&[1.0 / 3.0; 4], &mut rng_from_seed(3)).unwrap();
        assert_eq!(nu, vec![0.1, 0.0]);
        assert!((theta - 0.05 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_cluster_descends_to_its_mean() {
        let spec = MixtureSpec::list_decoding(400, 20, 0.5, 1.0, OutlierPolicy::None, 4);
        let spec = MixtureSpec { per_cluster: 400, outliers: 0, ..spec };
        let m = gen_mixture(&spec).unwrap();
        let mut est = Estimator::new(&m.data, EstimatorConfig::new(0.5, 1.0)).unwrap();
        let b = vec![2.0 / (0.5 * 400.0); 400];
        let t = est.descend_cost(&b, &mut rng_from_seed(1)).unwrap();
        let mean = m.data.mean_of(&(0..400).collect::<Vec<_>>());
        assert!(sq_dist(&t.muhat, &mean).sqrt() <= RADIUS / 0.5f64.sqrt());
        assert!(t.what.iter().sum::<f64>() >= 0.5);
        assert!(t.what.iter().zip(&b).all(|(w, bi)| *w >= 0.0 && *w <= *bi + 1e-15));
    }

    #[test]
    fn far_clusters_removal_spares_the_other_cluster() {
        let spec = MixtureSpec {
            clusters: 2,
            d: 10,
            per_cluster: 100,
            separation: 1e4,
            sigma: 1.0,
            policy: OutlierPolicy::None,
            outliers: 0,
            seed: 9,
        };
        let m = gen_mixture(&spec).unwrap();
        let mut est = Estimator::new(&m.data, EstimatorConfig::new(0.5, 1.0)).unwrap();
        let b = vec![2.0 / (0.5 * 200.0); 200];
        let t = est.descend_cost(&b, &mut rng_from_seed(2)).unwrap();
        for c in 0..2 {
            if sq_dist(&t.muhat, &m.means[c]).sqrt() > RADIUS / 0.5f64.sqrt() {
                let mass: f64 = m.members(c).iter().map(|&i| t.what[i]).sum();
                assert!(mass <= 0.5 / 4.0, "cluster {c} lost {mass}");
            }
        }
    }

    #[test]
    fn list_respects_length_and_budget() {
        let spec = MixtureSpec::list_decoding(200, 8, 0.25, 1.0, OutlierPolicy::Mimic, 5);
        let m = gen_mixture(&spec).unwrap();
        let out = output_list(&m.data, EstimatorConfig::new(0.25, 1.0), m.data.inliers(), &mut rng_from_seed(0)).unwrap();
        assert!(out.means.len() <= 16);
        assert!(!out.cap_exceeded);
        let mut last = 2.0 / 0.25;
        for r in &out.rounds {
            assert!(r.removed >= 0.5 - 1e-12);
            assert!(r.budget <= last - 0.5 + 1e-9);
            last = r.budget;
        }
        assert!(out.min_error(m.target_mean()) <= RADIUS / 0.5);
    }

    #[test]
    fn tiny_dataset_terminates() {
        let x = Dataset::from_rows(&[vec![0.0, 1.0], vec![3.0, 1.0], vec![-2.0, 0.5]]).unwrap();
        let out = output_list(&x, EstimatorConfig::new(0.5, 1.0), None, &mut rng_from_seed(0)).unwrap();
        assert!(!out.means.is_empty());
    }

    #[test]
    fn sub_rank_path_runs() {
        let spec = MixtureSpec::list_decoding(8, 3, 0.5, 1.0, OutlierPolicy::FarBlob, 2);
        let m = gen_mixture(&spec).unwrap();
        let mut cfg = EstimatorConfig::new(0.5, 1.0);
        cfg.ell = Some(2);
        cfg.cost_eps = 0.25;
        cfg.descend_cap = Some(2);
        let out = output_list(&m.data, cfg, None, &mut rng_from_seed(0)).unwrap();
        assert!(!out.means.is_empty() && out.means.len() <= 8);
        assert!(out.min_error(m.target_mean()) <= RADIUS / 0.5f64.sqrt());
    }

    #[test]
    fn resilience_examples() {
        let v = resilience_check(&[0.5, 0.5], &[0.5, 0.5], &[1.0], &[1.0], 1.0, 1.0);
        assert!(v.holds && v.distance == 0.0);
        assert!(resilience_check(&[1.0, 0.0], &[0.0, 1.0], &[0.0], &[9.0], 1.0, 1.0).vacuous);
        let x = Dataset::from_rows(&(0..40).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect::<Vec<_>>()).unwrap();
        let w: Vec<f64> = (0..40).map(|i| if i < 30 { 1.0 / 30.0 } else { 0.0 }).collect();
        let w2: Vec<f64> = (0..40).map(|i| if i >= 10 { 1.0 / 30.0 } else { 0.0 }).collect();
        let (m1, s1) = weighted_moments(&x, &w);
        let (m2, s2) = weighted_moments(&x, &w2);
        assert!(resilience_check(&w, &w2, &m1, &m2, s1.sqrt(), s2.sqrt()).holds);
    }

    #[test]
    fn median_variance_of_unit_cluster() {
        let spec = MixtureSpec::list_decoding(2000, 9, 0.5, 2.0, OutlierPolicy::None, 1);
        let m = gen_mixture(&MixtureSpec { per_cluster: 2000, outliers: 0, ..spec }).unwrap();
        let s = median_variance_sigma(&m.data);
        assert!((s - 2.0).abs() < 0.2, "{s}");
    }
}
