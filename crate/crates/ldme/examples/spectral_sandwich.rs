//! Top-m eigenpairs by power iteration with deflation, checked against a
//! dense eigendecomposition and the two-sided sandwich bound.

use ldme::checks::{random_psd, sandwich_holds};
use ldme::linalg::sym_eigen_desc;
use ldme::rng::rng_from_seed;
use ldme::spectral::{pca_topk, power_method, DenseOperator};

fn main() {
    let mut rng = rng_from_seed(7);
    let a = random_psd(40, 3.0, 1, &mut rng);
    let op = DenseOperator::new(a.clone());

    let top = power_method(&op, 0.05, 0.01, &mut rng).expect("power method");
    println!("power method: rayleigh {:.6} after {} iterations", top.rayleigh, top.iterations);

    let (exact, _) = sym_eigen_desc(&a);
    for m in [1, 3, 8] {
        let s = pca_topk(&op, m, 0.05, 0.01, &mut rng).expect("pca");
        let at = s.assemble(&op);
        println!("m = {m}");
        for (i, v) in s.values.iter().enumerate() {
            println!("  lambda_{i}: approx {v:.6}  exact {:.6}", exact[i]);
        }
        println!("  sandwich holds: {}", sandwich_holds(&a, &at, m, 0.05));
    }
}
