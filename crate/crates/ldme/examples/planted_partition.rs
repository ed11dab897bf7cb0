//! Semirandom planted partition: recover the dense set S from adjacency
//! rows via list decoding, against an adversary that plants a decoy.

use ldme::planted::{error_scale, expected_row, generate, recover, round_vector, partition_error, Adversary};

fn main() {
    let (n, alpha, a, b) = (1000, 0.2, 40.0, 10.0);
    for adversary in [Adversary::Empty, Adversary::Mimic] {
        let g = generate(n, alpha, a, b, adversary, 4).unwrap();
        let rec = recover(&g.rows, alpha, a, b, 4).unwrap();
        let errs: Vec<usize> = rec.sets.iter().map(|s| partition_error(&g.s, s)).collect();
        println!("{adversary:?}: {} candidate sets, errors {errs:?}", rec.sets.len());
        println!("  best |S Δ S~| = {} of |S| = {} (scale c·n/(α²(a−b)²) = {:.0})", rec.min_error(&g.s), g.s.len(), error_scale(n, alpha, a, b));
    }
    let g = generate(n, alpha, a, b, Adversary::Empty, 0).unwrap();
    let exact = round_vector(&expected_row(n, &g.s, a, b), a, b).unwrap();
    println!("rounding the expected row recovers S exactly: {}", partition_error(&g.s, &exact) == 0);
}
