//! Command-line front end. Every subcommand writes a JSON [`Report`]; exit
//! codes are 0 on success, 1 on usage or input errors and 2 when a
//! verification fails.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::checks::{self, CheckResult};
use crate::estimator::{median_variance_sigma, output_list, EstimatorConfig};
use crate::io::generate::{gen_mixture, MixtureSpec, OutlierPolicy};
use crate::io::{Dataset, Report, RunConfig, Timer};
use crate::planted::{generate, recover, Adversary, PlantedInstance};
use crate::rng::child_rng;
use crate::sdp::{packing_covering_decision, solver_loop, verify_certificate, Backend, SdpAnswer, SdpInstance, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ldme", version, about = "List-decodable mean estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed; `LDME_SEED` takes precedence, a config seed is the fallback.
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value` run configuration (alpha, sigma, eps, delta, seed, flags).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a truncated-normal mixture with outliers.
    GenMixture {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        clusters: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        per_cluster: usize,
        #[arg(long, default_value_t = 0.0)]
        separation: f64,
        #[arg(long)]
        sigma: Option<f64>,
        /// none, far-blob or mimic.
        #[arg(long, default_value = "none")]
        policy: OutlierPolicy,
        #[arg(long, default_value_t = 0)]
        outliers: usize,
        /// Dataset path; a `.csv` extension selects CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample a semirandom planted-partition graph.
    GenPlanted {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        /// empty, mimic or random-dense.
        #[arg(long, default_value = "empty")]
        adversary: Adversary,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the list-decoding estimator on a dataset.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Use the median per-coordinate spread as sigma.
        #[arg(long, conflicts_with = "sigma")]
        estimate_sigma: bool,
        /// Projection rank; rank at least d selects the exact path.
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the planted set from a graph file.
    PlantedRecover {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide a Ky-Fan packing/covering instance.
    SdpSolve {
        #[command(flatten)]
        common: Common,
        /// Instance in the dataset format; a random instance is drawn when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Overrides the rank stored in the instance.
        #[arg(long)]
        k: Option<usize>,
        /// Check the certificate densely; failure exits with 2.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        sketched: bool,
        /// Save the (possibly random) instance.
        #[arg(long)]
        write_instance: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Oracle-vs-fast comparison suite.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Acceptance-scale trial counts instead of the quick suite.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wall time of `estimate` across sizes and the fitted exponent.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [2000usize, 4000, 8000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        d: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Any error that maps to the usage exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
}

impl<E: std::fmt::Display> From<E> for Failure
where
    E: std::error::Error,
{
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(Report, Option<PathBuf>, bool), Failure>;

/// Parses `argv` (program name first) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok((report, path, ok)) => {
            let emitted = match &path {
                Some(p) => report.write(p).map_err(|e| e.to_string()),
                None => {
                    println!("{}", report.to_json());
                    Ok(())
                }
            };
            match emitted {
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
                Ok(()) if ok => EXIT_OK,
                Ok(()) => EXIT_VERIFY,
            }
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
    }
}

/// Config file, then `--seed`, then `LDME_SEED`.
fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.set("seed", &s.to_string()).map_err(Failure::Usage)?;
    }
    cfg.apply_env()?;
    Ok(cfg)
}

fn base_report(command: &str, cfg: &RunConfig) -> Report {
    Report::new(command, cfg.seed.unwrap_or(0)).config("config", &cfg.raw)
}

fn need(v: Option<f64>, name: &str) -> Result<f64, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("--{name} is required (flag or config key)")))
}

fn read_dataset(path: &Path) -> Result<Dataset, Failure> {
    Ok(Dataset::read_any(path)?)
}

fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), Failure> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        ds.write_csv(path)?;
    } else {
        ds.write_binary(path)?;
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::GenMixture { common, clusters, d, per_cluster, separation, sigma, policy, outliers, out, report } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seed.unwrap_or(0);
            let sigma = sigma.or(cfg.sigma).unwrap_or(1.0);
            let spec = MixtureSpec { clusters, d, per_cluster, separation, sigma, policy, outliers, seed };
            let t = Timer::start();
            let m = gen_mixture(&spec)?;
            write_dataset(&m.data, &out)?;
            let mut r = base_report("gen-mixture", &cfg).config("spec", &spec).config("out", out.display().to_string());
            r.results = json!({ "n": m.data.n(), "d": m.data.d(), "means": m.means, "inliers": m.data.inliers().map_or(0, |s| s.len()) });
            r.timings.insert("total".into(), t.secs());
            Ok((r, report, true))
        }
        Command::GenPlanted { common, n, alpha, a, b, adversary, out, report } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seed.unwrap_or(0);
            let alpha = need(alpha.or(cfg.alpha), "alpha")?;
            let t = Timer::start();
            let g = generate(n, alpha, a, b, adversary, seed)?;
            g.write(&out)?;
            let mut r = base_report("gen-planted", &cfg)
                .config("n", n)
                .config("alpha", alpha)
                .config("a", a)
                .config("b", b)
                .config("adversary", adversary)
                .config("out", out.display().to_string());
            r.results = json!({ "planted_size": g.s.len() });
            r.timings.insert("total".into(), t.secs());
            Ok((r, report, true))
        }
        Command::Estimate { common, input, alpha, sigma, estimate_sigma, ell, out } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seed.unwrap_or(0);
            let alpha = need(alpha.or(cfg.alpha), "alpha")?;
            let t = Timer::start();
            let data = read_dataset(&input)?;
            let sigma = if estimate_sigma || cfg.has_flag("estimate-sigma") {
                median_variance_sigma(&data)
            } else {
                need(sigma.or(cfg.sigma), "sigma")?
            };
            let mut ecfg = EstimatorConfig::new(alpha, sigma);
            ecfg.ell = ell;
            if let Some(e) = cfg.eps {
                ecfg.cost_eps = e;
            }
            if let Some(dl) = cfg.delta {
                ecfg.cost_delta = dl;
            }
            let loaded = t.secs();
            let outcome = output_list(&data, ecfg.clone(), data.inliers(), &mut child_rng(seed, "cli/estimate"))?;
            let mut results = json!({
                "list": outcome.means,
                "iterations": outcome.rounds,
                "constants": outcome.constants,
                "cap_exceeded": outcome.cap_exceeded,
                "sigma": sigma,
            });
            if let Some(inl) = data.inliers() {
                let mu = data.mean_of(inl);
                results["inlier_mean_error"] = json!(outcome.min_error(&mu));
            }
            let mut r = base_report("estimate", &cfg).config("input", input.display().to_string()).config("estimator", &ecfg);
            r.results = results;
            r.timings.insert("load".into(), loaded);
            r.timings.insert("total".into(), t.secs());
            Ok((r, out, true))
        }
        Command::PlantedRecover { common, input, out } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seed.unwrap_or(0);
            let t = Timer::start();
            let g = PlantedInstance::read(&input)?;
            let rec = recover(&g.rows, g.alpha, g.a, g.b, seed)?;
            let errors: Vec<usize> = rec.sets.iter().map(|s| crate::planted::partition_error(&g.s, s)).collect();
            let mut r = base_report("planted-recover", &cfg)
                .config("input", input.display().to_string())
                .config("n", g.n)
                .config("alpha", g.alpha)
                .config("a", g.a)
                .config("b", g.b);
            r.results = json!({
                "sets": rec.sets,
                "errors": errors,
                "min_error": rec.min_error(&g.s),
                "scale": rec.scale,
                "iterations": rec.list.rounds,
            });
            r.timings.insert("total".into(), t.secs());
            Ok((r, out, true))
        }
        Command::SdpSolve { common, input, eps, delta, k, verify, sketched, write_instance, out } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seed.unwrap_or(0);
            let eps = eps.or(cfg.eps).unwrap_or(0.1);
            let delta = delta.or(cfg.delta).unwrap_or(0.01);
            let t = Timer::start();
            let mut inst = match &input {
                Some(p) => SdpInstance::read(p, eps, delta)?,
                None => checks::random_sdp_instance(&mut child_rng(seed, "cli/sdp-instance"), 30, 16, 3).with_eps(eps),
            };
            inst.delta = delta;
            if let Some(k) = k {
                inst = SdpInstance::new(inst.l, inst.m, k, (*inst.a).clone(), (*inst.b).clone(), eps, delta)?;
            }
            if let Some(p) = &write_instance {
                inst.write(p)?;
            }
            let scfg = SolverConfig { backend: if sketched { Backend::Sketched } else { Backend::Dense }, ..Default::default() };
            let mut rng = child_rng(seed, "cli/sdp-solve");
            let n = inst.n() as f64;
            let solved = if inst.eps >= 1.0 / (n * n) {
                packing_covering_decision(&inst, &scfg, &mut rng)?
            } else {
                solver_loop(&inst, &scfg, &mut rng)?
            };
            let answer = match &solved.answer {
                SdpAnswer::Dual(w) => json!({ "side": "dual", "weights": w, "mass": w.iter().sum::<f64>() }),
                SdpAnswer::Primal(p) => {
                    let (m, w) = p.assemble();
                    json!({ "side": "primal", "trace_m": m.trace(), "trace_w": w.trace() })
                }
            };
            let mut results = json!({
                "answer": answer,
                "exit": solved.exit,
                "iterations": [solved.iterations],
                "constants": solved.constants,
            });
            let mut ok = true;
            if verify {
                let v = verify_certificate(&inst, &solved.answer);
                ok = v.ok;
                results["verification"] = serde_json::to_value(&v).unwrap_or(Value::Null);
                results["passed"] = json!(v.ok);
            }
            let mut r = base_report("sdp-solve", &cfg)
                .config("input", input.map(|p| p.display().to_string()))
                .config("n", inst.n())
                .config("l", inst.l)
                .config("m", inst.m)
                .config("k", inst.k)
                .config("eps", eps)
                .config("delta", delta)
                .config("sketched", sketched);
            r.results = results;
            r.timings.insert("total".into(), t.secs());
            Ok((r, out, ok))
        }
        Command::Verify { common, full, out } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seed.unwrap_or(0);
            let t = Timer::start();
            let suite = if full { full_suite(seed) } else { quick_suite(seed) };
            let mut r = base_report("verify", &cfg).config("full", full);
            let passed = suite.iter().all(|c| c.passed || !c.blocking);
            for c in &suite {
                r.timings.insert(c.name.clone(), c.seconds);
            }
            r.results = json!({ "passed": passed, "checks": suite.iter().map(check_json).collect::<Vec<_>>() });
            r.timings.insert("total".into(), t.secs());
            Ok((r, out, passed))
        }
        Command::Bench { common, sizes, d, out } => {
            let cfg = load_config(&common)?;
            let seed = cfg.seed.unwrap_or(0);
            if sizes.len() < 2 {
                return Err(Failure::Usage("--sizes needs at least two sizes".into()));
            }
            let t = Timer::start();
            let c = checks::scaling(&sizes, d, seed);
            let mut r = base_report("bench", &cfg).config("sizes", &sizes).config("d", d);
            let secs = c.detail["seconds"].clone();
            if let Some(arr) = secs.as_array() {
                for (n, s) in sizes.iter().zip(arr) {
                    r.timings.insert(format!("n{n}"), s.as_f64().unwrap_or(0.0));
                }
            }
            r.results = json!({ "beta": c.detail["beta"], "beta_max": checks::SCALING_BETA_MAX, "passed": c.passed, "blocking": false });
            r.timings.insert("total".into(), t.secs());
            Ok((r, out, true))
        }
    }
}

/// Removes wall-clock fields so equal seeds give equal results.
fn strip_times(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("seconds");
            m.remove("within_time");
            m.values_mut().for_each(strip_times);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_times),
        _ => {}
    }
}

fn check_json(c: &CheckResult) -> Value {
    let mut detail = c.detail.clone();
    strip_times(&mut detail);
    json!({
        "name": c.name,
        "passed": c.passed,
        "blocking": c.blocking,
        "successes": c.successes,
        "trials": c.trials,
        "required": c.required,
        "detail": detail,
    })
}

/// Reduced trial counts, a few seconds in total.
pub fn quick_suite(seed: u64) -> Vec<CheckResult> {
    vec![
        checks::spectral_sandwich(12, 20, 11, seed, None),
        checks::fantope(8, 12, seed, None),
        checks::sdp_decision(8, 7, seed, None),
        checks::approx_cost_vs_oracle(4, seed, None),
        checks::sketch_accuracy(40, seed, None),
        checks::list_decoding(&[0.5], 2, 20, None),
    ]
}

/// Acceptance-scale counts and time limits.
pub fn full_suite(seed: u64) -> Vec<CheckResult> {
    vec![
        checks::list_decoding(&[0.5, 0.25, 0.1], 20, 50, Some(300.0)),
        checks::spectral_sandwich(200, 40, 195, seed, Some(60.0)),
        checks::fantope(100, 12, seed, Some(120.0)),
        checks::sdp_decision(100, 99, seed, Some(300.0)),
        checks::approx_cost_vs_oracle(50, seed, Some(180.0)),
        checks::sketch_accuracy(500, seed, Some(60.0)),
        checks::planted_partition(2000, 10, Some(600.0)),
        checks::scaling(&[2000, 4000, 8000], 50, seed),
    ]
}
