//! Budgeted Ky-Fan cost: find weights w ≤ b with Σw ≈ 1 that minimise the
//! top-k Ky-Fan norm of Σ w_i (x_i − ν)(x_i − ν)ᵀ, next to the
//! projected-subgradient optimum.

use ldme::cost::{approx_cost, weighted_second_moment, CostQuery};
use ldme::io::Dataset;
use ldme::linalg::kyfan_sym;
use ldme::oracle::exact_cost_small;
use ldme::rng::{gaussian_vec, rng_from_seed};

fn main() {
    let (n, d, k) = (10, 4, 2);
    let mut rng = rng_from_seed(5);
    let mut vals = gaussian_vec(&mut rng, n * d);
    // Two far rows the budget should drain away from.
    vals[..d].iter_mut().for_each(|v| *v += 8.0);
    vals[d..2 * d].iter_mut().for_each(|v| *v -= 8.0);
    let x = Dataset::new(n, d, vals).unwrap();
    let nu = vec![0.0; d];
    let b = vec![1.5 / n as f64; n];
    let q = CostQuery::new(&x, &nu, &b, k, 0.05, 0.01).unwrap();

    let cert = approx_cost(&q, &mut rng).unwrap();
    let (opt, _) = exact_cost_small(&q).unwrap();
    let value = kyfan_sym(&weighted_second_moment(&q, &cert.wbar), k);
    println!("mass {:.4}, Ky-Fan value {value:.5}, oracle optimum {opt:.5}", cert.mass());
    println!("bracket [{:.5}, {:.5}], l* = {:.5}, {} decisions", cert.lambda_low, cert.lambda_high, cert.lstar, cert.decisions.len());
    for (i, w) in cert.wbar.iter().enumerate() {
        println!("  w[{i}] = {w:.4} (budget {:.4})", b[i]);
    }
}
