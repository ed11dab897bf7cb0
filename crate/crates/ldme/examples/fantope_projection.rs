//! Entropy-regularised projection onto the capped simplex of spectra
//! (Tr W = 1, ‖W‖ ≤ 1/k), compared with the exact projection.

use std::sync::Arc;

use ldme::checks::random_psd;
use ldme::fantope::{assemble_w, full_projection, simple_projection, FantopeConfig, Side};
use ldme::linalg::{lambda_max, trace_norm_sym};
use ldme::oracle::{exact_fantope_projection, DenseSym};
use ldme::rng::rng_from_seed;
use ldme::spectral::DenseOperator;

fn main() {
    let (m, k, kappa) = (12, 3, 2.5);
    let cfg = FantopeConfig::new(0.01, 0.01);
    let mut rng = rng_from_seed(3);
    let g = random_psd(m, kappa, 2, &mut rng);
    let op = Arc::new(DenseOperator::new(g.clone()));

    let w = simple_projection(op.clone(), kappa, k, &cfg, &mut rng).unwrap();
    let dense = assemble_w(&w);
    let exact = exact_fantope_projection(&DenseSym::zeros(0), &DenseSym::new(g.clone()).unwrap(), k).unwrap();
    let kf = k as f64;
    println!("tau = {:.5}, trace = {:.6}", w.tau, dense.trace());
    println!("spectral cap: {:.6} <= {:.6}", lambda_max(&dense), dense.trace() / kf);
    println!(
        "trace-norm distance to exact: {:.3e} (bound {:.3e})",
        trace_norm_sym(&(&dense - &exact.w)),
        4.0 * (kf * cfg.eps).sqrt() + 9.0 * kf * cfg.eps
    );

    let f = Arc::new(DenseOperator::new(random_psd(6, 1.0, 0, &mut rng)));
    let h = full_projection(f, 1.0, op, kappa, k, &cfg, &mut rng).unwrap();
    let (mm, ww) = h.assemble();
    println!("joint projection: Tr M = {:.4}, Tr W = {:.4}", mm.trace(), ww.trace());
    let x = vec![1.0; m];
    let y = h.apply(Side::W, &x).unwrap();
    println!("<1, W 1> = {:.5}", y.iter().sum::<f64>());
}
