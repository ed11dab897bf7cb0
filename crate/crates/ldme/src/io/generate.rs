//! Synthetic mixtures with bounded-covariance clusters and adversarial
//! outliers.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, IoError};
use crate::rng::{child_rng, derive_indexed, rng_from_seed, Rng};

/// Per-coordinate truncation radius, in units of sigma.
pub const TRUNCATION: f64 = 3.0;

/// Distance of the far blob from the target mean is `FAR_BLOB_DISTANCE·σ/√α`.
pub const FAR_BLOB_DISTANCE: f64 = 1e4;

/// Coordinate spread of the far blob, in units of sigma.
pub const FAR_BLOB_SPREAD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutlierPolicy {
    None,
    /// All outliers in one tight blob far from the target cluster.
    FarBlob,
    /// Outliers form decoy clusters that look exactly like the target.
    Mimic,
}

impl std::str::FromStr for OutlierPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "far-blob" => Ok(Self::FarBlob),
            "mimic" => Ok(Self::Mimic),
            _ => Err(format!("unknown outlier policy {s:?} (none, far-blob, mimic)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub clusters: usize,
    pub d: usize,
    pub per_cluster: usize,
    pub separation: f64,
    pub sigma: f64,
    pub policy: OutlierPolicy,
    pub outliers: usize,
    pub seed: u64,
}

impl MixtureSpec {
    /// One target cluster holding an `alpha` fraction of `n` points; the rest
    /// are outliers under `policy`.
    pub fn list_decoding(n: usize, d: usize, alpha: f64, sigma: f64, policy: OutlierPolicy, seed: u64) -> Self {
        let inliers = ((alpha * n as f64).round() as usize).clamp(1, n);
        Self {
            clusters: 1,
            d,
            per_cluster: inliers,
            separation: 0.0,
            sigma,
            policy,
            outliers: n - inliers,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mixture {
    /// Rows shuffled; the trailer lists the members of cluster 0.
    pub data: Dataset,
    pub means: Vec<Vec<f64>>,
    /// Cluster of every row, `None` for outliers.
    pub labels: Vec<Option<usize>>,
}

impl Mixture {
    pub fn target_mean(&self) -> &[f64] {
        &self.means[0]
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == Some(cluster)).collect()
    }
}

fn truncated_normal(rng: &mut Rng, sigma: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= TRUNCATION {
            return sigma * z;
        }
    }
}

fn unit_vector(rng: &mut Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::linalg::norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn cluster_rows(seed: u64, label: &str, center: &[f64], count: usize, sigma: f64, out: &mut Vec<f64>) {
    for i in 0..count {
        let mut r = rng_from_seed(derive_indexed(seed, label, i as u64));
        out.extend(center.iter().map(|c| c + truncated_normal(&mut r, sigma)));
    }
}

/// Samples the mixture. Cluster `i` has mean `separation·u_i` for a random
/// unit vector `u_i`, and coordinates drawn from a normal truncated at
/// `3σ`, so every point lies within `3σ√d` of its mean.
pub fn gen_mixture(spec: &MixtureSpec) -> Result<Mixture, IoError> {
    let MixtureSpec { clusters, d, per_cluster, separation, sigma, policy, outliers, seed } = *spec;
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(IoError::Invalid(format!("separation must be >= 0, got {separation}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(IoError::Invalid(format!("sigma must be > 0, got {sigma}")));
    }
    if clusters == 0 || d == 0 || per_cluster == 0 {
        return Err(IoError::Invalid("clusters, d and per_cluster must be positive".into()));
    }
    if policy == OutlierPolicy::None && outliers > 0 {
        return Err(IoError::Invalid("outlier count given without an outlier policy".into()));
    }
    let mut geo = child_rng(seed, "mixture/means");
    let means: Vec<Vec<f64>> =
        (0..clusters).map(|_| unit_vector(&mut geo, d).into_iter().map(|u| u * separation).collect()).collect();

    let mut values = Vec::with_capacity((clusters * per_cluster + outliers) * d);
    let mut labels = Vec::new();
    for (c, mu) in means.iter().enumerate() {
        cluster_rows(seed, &format!("mixture/cluster/{c}"), mu, per_cluster, sigma, &mut values);
        labels.extend(std::iter::repeat(Some(c)).take(per_cluster));
    }

    let n_total = clusters * per_cluster + outliers;
    let alpha = per_cluster as f64 / n_total as f64;
    match policy {
        OutlierPolicy::None => {}
        OutlierPolicy::FarBlob => {
            let dir = unit_vector(&mut geo, d);
            let dist = FAR_BLOB_DISTANCE * sigma / alpha.sqrt();
            let center: Vec<f64> = means[0].iter().zip(&dir).map(|(m, u)| m + dist * u).collect();
            cluster_rows(seed, "mixture/far-blob", &center, outliers, FAR_BLOB_SPREAD * sigma, &mut values);
        }
        OutlierPolicy::Mimic => {
            let decoys = outliers.div_ceil(per_cluster);
            let mut left = outliers;
            for j in 0..decoys {
                let spread = separation.max(FAR_BLOB_DISTANCE.sqrt() * sigma / alpha.sqrt());
                let center: Vec<f64> = unit_vector(&mut geo, d).into_iter().map(|u| u * spread).collect();
                let count = left.min(per_cluster);
                cluster_rows(seed, &format!("mixture/decoy/{j}"), &center, count, sigma, &mut values);
                left -= count;
            }
        }
    }
    labels.extend(std::iter::repeat(None).take(outliers));

    let mut perm: Vec<usize> = (0..n_total).collect();
    perm.shuffle(&mut child_rng(seed, "mixture/shuffle"));
    let mut shuffled = Vec::with_capacity(values.len());
    let mut new_labels = Vec::with_capacity(n_total);
    for &p in &perm {
        shuffled.extend_from_slice(&values[p * d..(p + 1) * d]);
        new_labels.push(labels[p]);
    }
    let target: Vec<usize> = (0..n_total).filter(|&i| new_labels[i] == Some(0)).collect();
    let data = Dataset::new(n_total, d, shuffled)?.with_inliers(target)?;
    Ok(Mixture { data, means, labels: new_labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lambda_max, norm, sq_dist};
    use nalgebra::DMatrix;

    fn spec(clusters: usize, sep: f64, policy: OutlierPolicy, outliers: usize) -> MixtureSpec {
        MixtureSpec { clusters, d: 6, per_cluster: 300, separation: sep, sigma: 1.0, policy, outliers, seed: 11 }
    }

    #[test]
    fn single_cluster_has_bounded_covariance() {
        let m = gen_mixture(&spec(1, 0.0, OutlierPolicy::None, 0)).unwrap();
        let ds = &m.data;
        let mu = ds.mean_of(&(0..ds.n()).collect::<Vec<_>>());
        let mut cov = DMatrix::zeros(ds.d(), ds.d());
        for i in 0..ds.n() {
            let x: Vec<f64> = ds.row(i).iter().zip(&mu).map(|(a, b)| a - b).collect();
            let v = nalgebra::DVector::from_vec(x);
            cov += &v * v.transpose();
        }
        cov /= ds.n() as f64;
        assert!(lambda_max(&cov) <= 1.5, "covariance norm {}", lambda_max(&cov));
        for i in 0..ds.n() {
            assert!(ds.row(i).iter().all(|v| v.abs() <= TRUNCATION));
        }
    }

    #[test]
    fn separated_clusters_average_to_their_means() {
        let m = gen_mixture(&spec(2, 1e6, OutlierPolicy::None, 0)).unwrap();
        for c in 0..2 {
            let avg = m.data.mean_of(&m.members(c));
            assert!(sq_dist(&avg, &m.means[c]).sqrt() < 0.5);
        }
        assert!(sq_dist(&m.means[0], &m.means[1]).sqrt() > 1e6);
        assert_eq!(m.data.inliers().unwrap(), m.members(0).as_slice());
    }

    #[test]
    fn far_blob_is_tight_and_far() {
        let s = MixtureSpec::list_decoding(400, 5, 0.25, 1.0, OutlierPolicy::FarBlob, 3);
        let m = gen_mixture(&s).unwrap();
        let out: Vec<usize> = (0..400).filter(|&i| m.labels[i].is_none()).collect();
        assert_eq!(out.len(), 300);
        let want = FAR_BLOB_DISTANCE / 0.25f64.sqrt();
        for &i in &out {
            let dist = sq_dist(m.data.row(i), m.target_mean()).sqrt();
            assert!((dist - want).abs() < 0.01 * 5.0, "{dist} vs {want}");
        }
    }

    #[test]
    fn mimic_decoys_match_cluster_size() {
        let s = MixtureSpec::list_decoding(400, 5, 0.25, 1.0, OutlierPolicy::Mimic, 3);
        let m = gen_mixture(&s).unwrap();
        assert_eq!(m.members(0).len(), 100);
        assert_eq!(m.labels.iter().filter(|l| l.is_none()).count(), 300);
        assert!(norm(m.target_mean()) == 0.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(2, 5.0, OutlierPolicy::Mimic, 200);
        assert_eq!(gen_mixture(&s).unwrap().data, gen_mixture(&s).unwrap().data);
        let mut t = s.clone();
        t.seed += 1;
        assert_ne!(gen_mixture(&s).unwrap().data, gen_mixture(&t).unwrap().data);
    }

    #[test]
    fn rejects_negative_separation() {
        assert!(gen_mixture(&spec(1, -1.0, OutlierPolicy::None, 0)).is_err());
    }
}
