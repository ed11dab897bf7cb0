//! Wall time of the estimator at growing N with the fitted exponent β in
//! time ≈ c·N^β. Pass sizes as arguments, e.g. `2000 4000 8000`.

fn main() {
    let mut sizes: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if sizes.len() < 2 {
        sizes = vec![500, 1000, 2000];
    }
    let r = ldme::checks::scaling(&sizes, 50, 0);
    println!("{}", r.line());
}
