//! Binary and CSV datasets, key=value configs, graph files and JSON reports.

use ldme::io::generate::{gen_mixture, MixtureSpec, OutlierPolicy};
use ldme::io::{validate_report, Dataset, Report, RunConfig};
use ldme::planted::{generate, Adversary, PlantedInstance};

fn main() {
    let dir = std::env::temp_dir().join("ldme-dataset-io");
    std::fs::create_dir_all(&dir).unwrap();

    let mix = gen_mixture(&MixtureSpec::list_decoding(60, 3, 0.5, 1.0, OutlierPolicy::FarBlob, 1)).unwrap();
    let bin = dir.join("mix.ldme");
    mix.data.write_binary(&bin).unwrap();
    let back = Dataset::read_binary(&bin).unwrap();
    println!("binary round trip exact: {}, {} inliers in trailer", back == mix.data, back.inliers().map_or(0, |s| s.len()));

    let csv = Dataset::from_csv("x1,x2\n1.5,-2\n0.25,3\n").unwrap();
    println!("csv rows: {:?} {:?}", csv.row(0), csv.row(1));

    let mut bytes = mix.data.to_bytes();
    bytes.truncate(40);
    println!("truncated file: {}", Dataset::from_bytes(&bytes).unwrap_err());

    let cfg = RunConfig::parse("alpha=0.5\nsigma=1\nseed=9\n").unwrap();
    println!("config echo:\n{}", cfg.to_text());
    println!("unknown key: {}", RunConfig::parse("gamma=1\n").unwrap_err());

    let g = generate(128, 0.25, 30.0, 5.0, Adversary::Mimic, 2).unwrap();
    let path = dir.join("graph.ldmeg");
    g.write(&path).unwrap();
    println!("graph round trip exact: {}", PlantedInstance::read(&path).unwrap() == g);

    let mut r = Report::new("estimate", 9).config("alpha", 0.5);
    r.results = serde_json::json!({ "list": [[0.0, 0.0, 0.0]] });
    r.timings.insert("total".into(), 0.01);
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    println!("report validates: {:?}", validate_report(&v));
}
