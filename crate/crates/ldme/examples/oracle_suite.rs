//! The quick oracle-vs-fast suite behind `ldme verify`, one line per check.

fn main() {
    let suite = ldme::cli::quick_suite(0);
    for c in &suite {
        println!("{}", c.line());
    }
    let failed = suite.iter().filter(|c| !c.passed && c.blocking).count();
    println!("{} checks, {failed} failed", suite.len());
}
