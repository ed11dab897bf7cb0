//! Ky-Fan packing/covering decision: a random instance and two scalar
//! instances on either side of the threshold, each certificate re-checked
//! densely.

use ldme::checks::{random_sdp_instance, scalar_instance};
use ldme::rng::rng_from_seed;
use ldme::sdp::{packing_covering_decision, solver_loop, verify_certificate, SdpAnswer, SdpInstance, SolverConfig};

fn show(name: &str, inst: &SdpInstance, seed: u64) {
    let cfg = SolverConfig::default();
    let mut rng = rng_from_seed(seed);
    let n = inst.n() as f64;
    let out = if inst.eps >= 1.0 / (n * n) {
        packing_covering_decision(inst, &cfg, &mut rng)
    } else {
        solver_loop(inst, &cfg, &mut rng)
    }
    .expect("solve");
    let v = verify_certificate(inst, &out.answer);
    let side = match &out.answer {
        SdpAnswer::Dual(w) => format!("dual, sum w = {:.4}", w.iter().sum::<f64>()),
        SdpAnswer::Primal(_) => format!("primal, Tr M + Tr W = {:.4}", v.objective),
    };
    println!("{name}: n={} l={} m={} k={} -> {side} ({:?}, {} iterations), verified {}", inst.n(), inst.l, inst.m, inst.k, out.exit, out.iterations, v.ok);
}

fn main() {
    show("random", &random_sdp_instance(&mut rng_from_seed(21), 20, 10, 3), 1);
    show("scalar 0.5", &scalar_instance(4, 0.5, 0.5), 2);
    show("scalar 3.0", &scalar_instance(4, 3.0, 3.0), 3);
}
