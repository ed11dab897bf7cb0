//! Randomised invariants of the combinatorial pieces and file formats.

use ldme::estimator::{greedy_fill, weight_removal};
use ldme::io::{Dataset, RunConfig};
use ldme::oracle::project_capped_simplex;
use ldme::planted::{partition_error, round_vector, BitRows, PlantedInstance};
use proptest::prelude::*;

fn costs_and_budgets() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| (prop::collection::vec(0.0f64..100.0, n), prop::collection::vec(0.0f64..0.3, n)))
}

proptest! {
    #[test]
    fn greedy_fill_is_feasible_and_exchange_optimal((c, b) in costs_and_budgets()) {
        let (value, w) = greedy_fill(&c, &b);
        let total: f64 = b.iter().sum();
        let mass: f64 = w.iter().sum();
        prop_assert!((mass - total.min(1.0)).abs() < 1e-9);
        for i in 0..c.len() {
            prop_assert!(w[i] >= 0.0 && w[i] <= b[i] + 1e-15);
        }
        // No unused budget is cheaper than a used entry.
        for i in 0..c.len() {
            for j in 0..c.len() {
                if w[i] < b[i] - 1e-12 && w[j] > 1e-12 {
                    prop_assert!(c[i] >= c[j]);
                }
            }
        }
        let direct: f64 = w.iter().zip(&c).map(|(a, b)| a * b).sum();
        prop_assert!((value - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }

    #[test]
    fn weight_removal_keeps_a_minimal_nearest_prefix(
        lengths in prop::collection::vec(0.0f64..10.0, 2..40),
        seed in 0u64..1000,
    ) {
        let n = lengths.len();
        let w: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 13 + 1) as f64).collect();
        let s: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / s).collect();
        let kept = weight_removal(&lengths, &w).unwrap();
        let mass: f64 = kept.iter().sum();
        prop_assert!(mass >= 0.5 - 1e-12);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| lengths[i].total_cmp(&lengths[j]).then(i.cmp(&j)));
        let m = order.iter().position(|&i| kept[i] == 0.0).unwrap_or(n);
        for (pos, &i) in order.iter().enumerate() {
            prop_assert_eq!(kept[i], if pos < m { w[i] } else { 0.0 });
        }
        // Dropping the last kept point falls below one half.
        if m > 0 {
            let before: f64 = order[..m - 1].iter().map(|&i| w[i]).sum();
            prop_assert!(before < 0.5);
        }
    }

    #[test]
    fn capped_simplex_projection_is_feasible(
        y in prop::collection::vec(-3.0f64..3.0, 1..20),
        cap in 0.05f64..1.0,
    ) {
        let b = vec![cap; y.len()];
        let p = project_capped_simplex(&y, &b, 1.0);
        let total = cap * y.len() as f64;
        prop_assert!((p.iter().sum::<f64>() - total.min(1.0)).abs() < 1e-8);
        prop_assert!(p.iter().all(|&v| (-1e-12..=cap + 1e-12).contains(&v)));
    }

    #[test]
    fn hamming_is_a_metric(n in 2usize..150, edges in prop::collection::vec((0usize..150, 0usize..150), 0..300)) {
        let mut rows = BitRows::zeros(n);
        for (u, v) in edges {
            rows.set(u % n, v % n);
        }
        for u in 0..n.min(12) {
            prop_assert_eq!(rows.hamming(u, u), 0);
            for v in 0..n.min(12) {
                let direct = (0..n).filter(|&x| rows.get(u, x) != rows.get(v, x)).count();
                prop_assert_eq!(rows.hamming(u, v), direct);
                prop_assert_eq!(rows.hamming(u, v), rows.hamming(v, u));
                for w in 0..n.min(6) {
                    prop_assert!(rows.hamming(u, w) <= rows.hamming(u, v) + rows.hamming(v, w));
                }
            }
            prop_assert_eq!(rows.degree(u), (0..n).filter(|&x| rows.get(u, x)).count());
        }
    }

    #[test]
    fn partition_error_is_a_symmetric_difference(
        a in prop::collection::btree_set(0usize..60, 0..30),
        b in prop::collection::btree_set(0usize..60, 0..30),
    ) {
        let (a, b): (Vec<usize>, Vec<usize>) = (a.into_iter().collect(), b.into_iter().collect());
        prop_assert_eq!(partition_error(&a, &b), partition_error(&b, &a));
        prop_assert_eq!(partition_error(&a, &a), 0);
        prop_assert_eq!(partition_error(&a, &[]), a.len());
        prop_assert!(partition_error(&a, &b) <= a.len() + b.len());
    }

    #[test]
    fn rounding_the_indicator_row_returns_the_set(
        s in prop::collection::btree_set(0usize..80, 1..40),
        a in 1.0f64..50.0,
        b in 0.0f64..50.0,
    ) {
        prop_assume!((a - b).abs() > 1e-6);
        let n = 80;
        let s: Vec<usize> = s.into_iter().collect();
        let phi = ldme::planted::expected_row(n, &s, a, b);
        prop_assert_eq!(round_vector(&phi, a, b).unwrap(), s);
    }

    #[test]
    fn dataset_round_trips(
        rows in 1usize..12,
        d in 1usize..6,
        seed in any::<u64>(),
        with_inliers in any::<bool>(),
    ) {
        let vals: Vec<f64> = (0..rows * d)
            .map(|i| (((seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)) >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 1e3)
            .collect();
        let mut ds = Dataset::new(rows, d, vals).unwrap();
        if with_inliers {
            ds = ds.with_inliers((0..rows).step_by(2).collect()).unwrap();
        }
        let bytes = ds.to_bytes();
        let back = Dataset::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back.to_bytes(), &bytes);
        prop_assert_eq!(&back, &ds);
        let csv = Dataset::from_csv(&ds.to_csv().unwrap()).unwrap();
        prop_assert_eq!(csv.values(), ds.values());
        for cut in [0usize, 5, 6, 13, 21] {
            if cut < bytes.len() {
                prop_assert!(Dataset::from_bytes(&bytes[..cut]).is_err());
            }
        }
    }

    #[test]
    fn config_text_round_trips(alpha in 0.01f64..0.5, sigma in 0.1f64..10.0, seed in any::<u64>()) {
        let text = format!("alpha={alpha}\nsigma={sigma}\nseed={seed}\nflags=a,b\n");
        let cfg = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(cfg.alpha, Some(alpha));
        prop_assert_eq!(cfg.seed, Some(seed));
        prop_assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn graph_file_round_trips_and_rejects_corruption() {
    let g = ldme::planted::generate(70, 0.3, 20.0, 4.0, ldme::planted::Adversary::RandomDense, 5).unwrap();
    let bytes = g.to_bytes();
    assert_eq!(PlantedInstance::from_bytes(&bytes).unwrap(), g);
    assert!(PlantedInstance::from_bytes(&bytes[..30]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(PlantedInstance::from_bytes(&bad).is_err());
}
