//! Semirandom planted partition: rows of vertices in `S` are random with
//! edge probability `a/n` into `S` and `b/n` elsewhere; all other rows are
//! chosen by an adversary.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{output_list, EstimatorConfig, EstimatorError, ListOutcome, PointSet};
use crate::rng::{child_rng, derive_indexed, rng_from_seed, Rng};

/// Magic prefix of the graph file.
pub const GRAPH_MAGIC: &[u8; 7] = b"LDMEG1\n";

#[derive(Debug, Error)]
pub enum PlantedError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("a = b leaves the planted set unidentifiable")]
    EqualRates,
    #[error("graph file: {0}")]
    Format(String),
    #[error("{0}: {1}")]
    Fs(String, String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    /// Rows outside `S` have no edges.
    Empty,
    /// Rows outside `S` follow the planted law around a decoy set.
    Mimic,
    /// Rows outside `S` are fair coin flips.
    RandomDense,
}

impl std::str::FromStr for Adversary {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "empty" => Ok(Self::Empty),
            "mimic" => Ok(Self::Mimic),
            "random-dense" => Ok(Self::RandomDense),
            _ => Err(format!("unknown adversary {s:?} (empty, mimic, random-dense)")),
        }
    }
}

/// Packed 0/1 rows, 64 columns per word, least significant bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRows {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitRows {
    pub fn zeros(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self { n, words, bits: vec![0; n * words] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn words_per_row(&self) -> usize {
        self.words
    }

    pub fn row_words(&self, u: usize) -> &[u64] {
        &self.bits[u * self.words..(u + 1) * self.words]
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[u * self.words + v / 64] >> (v % 64) & 1 == 1
    }

    pub fn set(&mut self, u: usize, v: usize) {
        self.bits[u * self.words + v / 64] |= 1 << (v % 64);
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_words(u).iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Hamming distance between two rows.
    pub fn hamming(&self, u: usize, v: usize) -> usize {
        self.row_words(u).iter().zip(self.row_words(v)).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    /// Edges from `u` into `set`.
    pub fn count_into(&self, u: usize, set: &[usize]) -> usize {
        set.iter().filter(|&&v| self.get(u, v)).count()
    }
}

/// Rows scaled by a constant, as points in `R^n`.
pub struct ScaledRows<'a> {
    pub rows: &'a BitRows,
    pub scale: f64,
}

impl PointSet for ScaledRows<'_> {
    fn len(&self) -> usize {
        self.rows.n
    }
    fn dim(&self) -> usize {
        self.rows.n
    }
    fn row_into(&self, i: usize, out: &mut [f64]) {
        for (v, o) in out.iter_mut().enumerate() {
            *o = if self.rows.get(i, v) { self.scale } else { 0.0 };
        }
    }
    fn sq_dist_rows(&self, i: usize, j: usize) -> f64 {
        self.scale * self.scale * self.rows.hamming(i, j) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub n: usize,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub seed: u64,
    /// Sorted planted set.
    pub s: Vec<usize>,
    pub rows: BitRows,
}

fn check_params(n: usize, alpha: f64, a: f64, b: f64) -> Result<usize, PlantedError> {
    if n == 0 {
        return Err(PlantedError::Invalid("n must be positive".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(PlantedError::Invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let nf = n as f64;
    if !(0.0..=nf).contains(&a) || !(0.0..=nf).contains(&b) {
        return Err(PlantedError::Invalid(format!("a and b must lie in [0, n], got {a}, {b}")));
    }
    let size = (alpha * nf).round() as usize;
    if size == 0 {
        return Err(PlantedError::Invalid(format!("alpha·n = {} rounds to an empty set", alpha * nf)));
    }
    Ok(size)
}

fn fill_row(rows: &mut BitRows, u: usize, rng: &mut Rng, member: &[bool], p_in: f64, p_out: f64) {
    for (v, &m) in member.iter().enumerate() {
        let p = if m { p_in } else { p_out };
        if p >= 1.0 || (p > 0.0 && rng.gen::<f64>() < p) {
            rows.set(u, v);
        }
    }
}

/// Samples the graph. Self-loops are allowed. Each row has its own seed.
pub fn generate(n: usize, alpha: f64, a: f64, b: f64, adversary: Adversary, seed: u64) -> Result<PlantedInstance, PlantedError> {
    let size = check_params(n, alpha, a, b)?;
    let mut pick = child_rng(seed, "planted/set");
    let mut s = sample(&mut pick, n, size).into_vec();
    s.sort_unstable();
    let mut in_s = vec![false; n];
    s.iter().for_each(|&u| in_s[u] = true);

    let decoy: Vec<bool> = if adversary == Adversary::Mimic {
        let outside: Vec<usize> = (0..n).filter(|&u| !in_s[u]).collect();
        let m = size.min(outside.len());
        let mut flag = vec![false; n];
        for j in sample(&mut child_rng(seed, "planted/decoy"), outside.len(), m) {
            flag[outside[j]] = true;
        }
        flag
    } else {
        Vec::new()
    };

    let (nf, mut rows) = (n as f64, BitRows::zeros(n));
    for u in 0..n {
        let mut r = rng_from_seed(derive_indexed(seed, "planted/row", u as u64));
        if in_s[u] {
            fill_row(&mut rows, u, &mut r, &in_s, a / nf, b / nf);
            continue;
        }
        match adversary {
            Adversary::Empty => {}
            Adversary::Mimic => fill_row(&mut rows, u, &mut r, &decoy, a / nf, b / nf),
            Adversary::RandomDense => fill_row(&mut rows, u, &mut r, &in_s, 0.5, 0.5),
        }
    }
    Ok(PlantedInstance { n, alpha, a, b, seed, s, rows })
}

/// `|S Δ S̃|`.
pub fn partition_error(s: &[usize], stilde: &[usize]) -> usize {
    let a: BTreeSet<usize> = s.iter().copied().collect();
    let b: BTreeSet<usize> = stilde.iter().copied().collect();
    a.symmetric_difference(&b).count()
}

/// Vertices whose coordinate lies on the `S` side of `(a+b)/(2n)`.
pub fn round_vector(phi: &[f64], a: f64, b: f64) -> Result<Vec<usize>, PlantedError> {
    if a == b {
        return Err(PlantedError::EqualRates);
    }
    let thr = (a + b) / (2.0 * phi.len() as f64);
    Ok((0..phi.len()).filter(|&v| if a > b { phi[v] > thr } else { phi[v] < thr }).collect())
}

/// Row expectation of a planted vertex: `a/n` on `S`, `b/n` elsewhere.
pub fn expected_row(n: usize, s: &[usize], a: f64, b: f64) -> Vec<f64> {
    let mut phi = vec![b / n as f64; n];
    s.iter().for_each(|&v| phi[v] = a / n as f64);
    phi
}

/// Input scaling `√(αn/(24c))`, `c = max(a, b)`.
pub fn row_scale(n: usize, alpha: f64, a: f64, b: f64) -> f64 {
    (alpha * n as f64 / (24.0 * a.max(b))).sqrt()
}

/// `c·n/(α²(a−b)²)`, the order of the recovery error.
pub fn error_scale(n: usize, alpha: f64, a: f64, b: f64) -> f64 {
    a.max(b) * n as f64 / (alpha * alpha * (a - b).powi(2))
}

#[derive(Debug, Clone, Serialize)]
pub struct Recovery {
    pub sets: Vec<Vec<usize>>,
    pub list: ListOutcome,
    pub scale: f64,
}

impl Recovery {
    pub fn min_error(&self, s: &[usize]) -> usize {
        self.sets.iter().map(|t| partition_error(s, t)).min().unwrap_or(s.len())
    }
}

/// List-decodes the scaled rows with inlier fraction `α/2`, unscales each
/// candidate and rounds it to a vertex set.
pub fn recover(rows: &BitRows, alpha: f64, a: f64, b: f64, seed: u64) -> Result<Recovery, PlantedError> {
    if a == b {
        return Err(PlantedError::EqualRates);
    }
    let n = rows.n();
    check_params(n, alpha, a, b)?;
    let scale = row_scale(n, alpha, a, b);
    let points = ScaledRows { rows, scale };
    let mut cfg = EstimatorConfig::new(alpha / 2.0, 1.0);
    cfg.ell = Some(n);
    let list = output_list(&points, cfg, None, &mut child_rng(seed, "planted/recover"))?;
    let sets = list
        .means
        .iter()
        .map(|m| {
            let phi: Vec<f64> = m.iter().map(|x| x / scale).collect();
            round_vector(&phi, a, b)
        })
        .collect::<Result<_, _>>()?;
    Ok(Recovery { sets, list, scale })
}

impl PlantedInstance {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + self.rows.bits.len() * 8);
        out.extend_from_slice(GRAPH_MAGIC);
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        for x in [self.alpha, self.a, self.b] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        for w in &self.rows.bits {
            out.extend_from_slice(&w.to_le_bytes());
        }
        let list: Vec<String> = self.s.iter().map(|v| v.to_string()).collect();
        out.extend_from_slice(format!("S: {}\n", list.join(" ")).as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PlantedError> {
        let bad = |m: String| PlantedError::Format(m);
        if bytes.len() < 7 || &bytes[..7] != GRAPH_MAGIC {
            return Err(bad("bad magic at offset 0".into()));
        }
        let word = |off: usize| -> Result<[u8; 8], PlantedError> {
            bytes
                .get(off..off + 8)
                .map(|s| s.try_into().expect("eight bytes"))
                .ok_or_else(|| bad(format!("truncated header at offset {off}")))
        };
        let n = u64::from_le_bytes(word(7)?) as usize;
        let alpha = f64::from_le_bytes(word(15)?);
        let a = f64::from_le_bytes(word(23)?);
        let b = f64::from_le_bytes(word(31)?);
        let seed = u64::from_le_bytes(word(39)?);
        let mut rows = BitRows::zeros(n);
        let start = 47;
        let end = start + rows.bits.len() * 8;
        if bytes.len() < end {
            return Err(bad(format!("truncated rows at offset {}", bytes.len())));
        }
        for (w, chunk) in rows.bits.iter_mut().zip(bytes[start..end].chunks_exact(8)) {
            *w = u64::from_le_bytes(chunk.try_into().expect("eight bytes"));
        }
        let tail = std::str::from_utf8(&bytes[end..]).map_err(|_| bad(format!("set line at offset {end} is not UTF-8")))?;
        let line = tail.trim_end().strip_prefix("S:").ok_or_else(|| bad(format!("missing set line at offset {end}")))?;
        let s = line
            .split_whitespace()
            .map(|t| t.parse::<usize>().ok().filter(|&v| v < n))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad(format!("bad vertex in set line at offset {end}")))?;
        Ok(Self { n, alpha, a, b, seed, s, rows })
    }

    pub fn write(&self, path: &Path) -> Result<(), PlantedError> {
        fs::write(path, self.to_bytes()).map_err(|e| PlantedError::Fs(path.display().to_string(), e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, PlantedError> {
        let bytes = fs::read(path).map_err(|e| PlantedError::Fs(path.display().to_string(), e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_rates_give_indicator_rows() {
        let g = generate(60, 0.25, 60.0, 0.0, Adversary::Empty, 1).unwrap();
        for &u in &g.s {
            let row: Vec<usize> = (0..60).filter(|&v| g.rows.get(u, v)).collect();
            assert_eq!(row, g.s);
        }
        for u in (0..60).filter(|u| !g.s.contains(u)) {
            assert_eq!(g.rows.degree(u), 0);
        }
    }

    #[test]
    fn marginals_within_binomial_tolerance() {
        let (n, a, b) = (2000, 40.0, 10.0);
        let g = generate(n, 0.2, a, b, Adversary::Mimic, 3).unwrap();
        let outside: Vec<usize> = (0..n).filter(|v| g.s.binary_search(v).is_err()).collect();
        let (mut into, mut out) = (0usize, 0usize);
        for &u in &g.s {
            into += g.rows.count_into(u, &g.s);
            out += g.rows.degree(u);
        }
        out -= into;
        let trials_in = (g.s.len() * g.s.len()) as f64;
        let trials_out = (g.s.len() * outside.len()) as f64;
        for (count, trials, p) in [(into, trials_in, a / n as f64), (out, trials_out, b / n as f64)] {
            let sd = (trials * p * (1.0 - p)).sqrt();
            assert!((count as f64 - trials * p).abs() <= 4.0 * sd, "{count} vs {}", trials * p);
        }
    }

    #[test]
    fn partition_error_examples() {
        assert_eq!(partition_error(&[1, 2, 3], &[3, 2, 1]), 0);
        assert_eq!(partition_error(&[0, 1], &[2, 3]), 4);
        assert_eq!(partition_error(&[0, 1, 2], &[0, 1, 5]), 2);
    }

    #[test]
    fn exact_expectation_rounds_to_s() {
        for (a, b) in [(40.0, 10.0), (3.0, 7.0), (1.0, 0.0)] {
            let s = vec![1, 4, 5, 9];
            let phi = expected_row(12, &s, a, b);
            assert_eq!(round_vector(&phi, a, b).unwrap(), s);
        }
        assert!(round_vector(&[0.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn graph_file_round_trip() {
        let g = generate(70, 0.3, 20.0, 5.0, Adversary::RandomDense, 8).unwrap();
        let bytes = g.to_bytes();
        assert_eq!(PlantedInstance::from_bytes(&bytes).unwrap(), g);
        assert!(PlantedInstance::from_bytes(&bytes[..60]).is_err());
        assert!(PlantedInstance::from_bytes(b"LDMEG0\n").is_err());
    }

    #[test]
    fn scaled_rows_distance_matches_dense() {
        let g = generate(100, 0.3, 30.0, 5.0, Adversary::Mimic, 2).unwrap();
        let p = ScaledRows { rows: &g.rows, scale: 0.7 };
        let (mut x, mut y) = (vec![0.0; 100], vec![0.0; 100]);
        p.row_into(3, &mut x);
        p.row_into(40, &mut y);
        assert!((p.sq_dist_rows(3, 40) - crate::linalg::sq_dist(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn dense_rates_recover_exactly() {
        let g = generate(200, 0.25, 200.0, 0.0, Adversary::Empty, 4).unwrap();
        let r = recover(&g.rows, 0.25, 200.0, 0.0, 1).unwrap();
        assert_eq!(r.min_error(&g.s), 0);
        assert!(recover(&g.rows, 0.25, 5.0, 5.0, 1).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate(10, 0.0, 1.0, 1.0, Adversary::Empty, 0).is_err());
        assert!(generate(10, 0.5, 11.0, 1.0, Adversary::Empty, 0).is_err());
        assert!("sideways".parse::<Adversary>().is_err());
    }
}
