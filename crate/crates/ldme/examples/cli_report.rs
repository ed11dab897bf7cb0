//! Drives the command-line entry point in-process: generate a mixture,
//! estimate, and read the JSON report back.

use ldme::cli::run_cli;

fn main() {
    let dir = std::env::temp_dir().join("ldme-cli-report");
    std::fs::create_dir_all(&dir).unwrap();
    let data = dir.join("mix.ldme");
    let report = dir.join("report.json");
    let (data_s, report_s) = (data.to_str().unwrap(), report.to_str().unwrap());

    let code = run_cli([
        "ldme", "gen-mixture", "--d", "10", "--per-cluster", "100", "--policy", "mimic", "--outliers", "300", "--seed", "3",
        "--out", data_s, "--report", dir.join("gen.json").to_str().unwrap(),
    ]);
    println!("gen-mixture exit {code}");
    let code = run_cli(["ldme", "estimate", "--input", data_s, "--alpha", "0.25", "--sigma", "1", "--seed", "3", "--out", report_s]);
    println!("estimate exit {code}");

    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    println!("{} candidates, inlier-mean error {}", v["results"]["list"].as_array().map_or(0, |l| l.len()), v["results"]["inlier_mean_error"]);
    println!("unknown flag exit {}", run_cli(["ldme", "estimate", "--frobnicate"]));
}
