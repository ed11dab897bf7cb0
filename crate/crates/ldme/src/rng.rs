//! Seeded randomness.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] built from a 64-bit
//! seed. Sub-streams are derived from a master seed and a text label so that
//! adding a consumer in one subsystem never shifts the stream of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Generator for a raw seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a label (FNV-1a over the label, mixed
/// with splitmix64).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(master ^ splitmix64(h))
}

/// Derives a child seed from `master`, a label and an index.
pub fn derive_indexed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(master, label) ^ splitmix64(index.wrapping_add(1)))
}

/// Generator for the labelled sub-stream of `master`.
pub fn child_rng(master: u64, label: &str) -> Rng {
    rng_from_seed(derive_seed(master, label))
}

/// Fresh seed drawn from an existing generator.
pub fn fork(rng: &mut Rng) -> Rng {
    use rand::RngCore;
    rng_from_seed(rng.next_u64())
}

/// Vector of i.i.d. standard normal samples.
pub fn gaussian_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Fills `out` with i.i.d. normal samples of the given standard deviation.
pub fn fill_gaussian(rng: &mut Rng, out: &mut [f64], std: f64) {
    for x in out.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *x = std * g;
    }
}
