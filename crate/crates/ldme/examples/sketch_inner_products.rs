//! JL-sketched estimates of <exp(B), U Uᵀ> and Tr exp(B) next to the dense
//! matrix exponential.

use ldme::checks::random_psd;
use ldme::oracle::{dense_expm, DenseSym};
use ldme::rng::{gaussian_vec, rng_from_seed};
use ldme::sketch::{estimate_inner_products, estimate_trace, jl_rows, ExpInput};
use ldme::spectral::DenseOperator;
use nalgebra::DMatrix;

fn main() {
    let (dim, kappa, eps, delta) = (16, 2.0, 0.1, 0.05);
    let mut rng = rng_from_seed(11);
    let b = random_psd(dim, kappa, 0, &mut rng);
    let exact = dense_expm(&DenseSym::new(b.clone()).unwrap()).unwrap().into_matrix();

    let targets: Vec<DMatrix<f64>> = (0..4).map(|_| DMatrix::from_vec(dim, 2, gaussian_vec(&mut rng, 2 * dim))).collect();
    let op = DenseOperator::new(b);
    let input = ExpInput::new(&op, kappa);
    println!("sketch rows: {}", jl_rows(targets.len(), dim, eps, delta));

    let est = estimate_inner_products(input, &targets, eps, delta, &mut rng).unwrap();
    for (i, (z, u)) in est.iter().zip(&targets).enumerate() {
        let want = (u.transpose() * &exact * u).trace();
        println!("target {i}: sketched {z:10.4}  dense {want:10.4}  ratio {:.4}", z / want);
    }
    let tr = estimate_trace(input, &DMatrix::identity(dim, dim), eps, delta, &mut rng).unwrap();
    println!("trace:    sketched {tr:10.4}  dense {:10.4}", exact.trace());
}
