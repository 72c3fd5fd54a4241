mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freeedge::edge::{find_edge_stability, support_lower_bound, EdgeReport};
use freeedge::harness::{
    run_dbm_comparison, run_local_law_experiment, run_rigidity_experiment, run_tw_experiment, ExperimentReport,
};
use freeedge::io;
use freeedge::rmt::{partial_decomposition, sample_haar_unitary, sample_stream, stream_rng, SpectrumSample};
use freeedge::subordination::{density, SolverOptions};
use freeedge::tracywidom::TwEvaluator;
use rayon::prelude::*;
use serde::Serialize;

use config::{parse_assignment, RunConfig, KEYS_HELP};

#[derive(Parser)]
#[command(name = "freeedge", version, about = "Free additive convolution edges and Tracy-Widom verification")]
#[command(after_long_help = KEYS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML config file with flat keys (see --help for the key list).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set n=500 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, value_parser = parse_assignment)]
    set: Vec<(String, toml::Value)>,
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(short, long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    n_samples: Option<usize>,
    #[arg(short, long, global = true)]
    t: Option<f64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Density of mu_a ⊞ mu_b ⊞ σ_t (density.csv) and its upper edge (edge.json).
    Convolve,
    /// Upper edge and square-root scale (edge.json).
    Edge,
    /// Tracy-Widom GUE distribution on a grid (tw2.csv).
    TabulateTw,
    /// Top eigenvalues of sampled matrices (spectra.csv).
    Sample,
    /// Rescaled largest eigenvalue against Tracy-Widom.
    VerifyTw,
    /// Resolvent entries against the subordination prediction over matrix sizes.
    VerifyLocalLaw,
    /// Top eigenvalues against classical locations.
    VerifyRigidity,
    /// Largest-eigenvalue law before and after a short Gaussian flow.
    VerifyDbm,
    /// Identities of the partial randomness decomposition of Haar unitaries.
    DecomposeCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Convolve => "convolve",
            Command::Edge => "edge",
            Command::TabulateTw => "tabulate-tw",
            Command::Sample => "sample",
            Command::VerifyTw => "verify-tw",
            Command::VerifyLocalLaw => "verify-local-law",
            Command::VerifyRigidity => "verify-rigidity",
            Command::VerifyDbm => "verify-dbm",
            Command::DecomposeCheck => "decompose-check",
        }
    }
}

enum Failure {
    Config(String),
    Numerical(String),
    Statistical(String),
}

impl From<freeedge::Error> for Failure {
    fn from(e: freeedge::Error) -> Self {
        use freeedge::Error::*;
        match e {
            InvalidInput(_) | OutOfRange(_) | Io(_) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| run(cli.command, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Statistical(line)) => {
            println!("{line}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let c = &cli.common;
    let mut overrides = c.set.clone();
    let mut flag = |key: &str, v: Option<toml::Value>| {
        if let Some(v) = v {
            overrides.push((key.to_string(), v));
        }
    };
    flag("output_dir", c.output_dir.as_ref().map(|p| p.display().to_string().into()));
    flag("seed", c.seed.map(|s| toml::Value::Integer(s as i64)));
    flag("n", c.n.map(|s| toml::Value::Integer(s as i64)));
    flag("n_samples", c.n_samples.map(|s| toml::Value::Integer(s as i64)));
    flag("t", c.t.map(toml::Value::Float));
    flag("workers", c.workers.map(|s| toml::Value::Integer(s as i64)));
    let cfg = RunConfig::load(cli.command.name(), c.config.as_deref(), overrides).map_err(Failure::Config)?;
    faer::set_global_parallelism(faer::Par::Seq);
    if cfg.workers > 0 {
        // A second initialization only happens in tests; ignore it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    Ok(cfg)
}

fn run(command: Command, cfg: &RunConfig) -> Outcome {
    match command {
        Command::Convolve => convolve(cfg),
        Command::Edge => edge(cfg),
        Command::TabulateTw => tabulate_tw(cfg),
        Command::Sample => sample(cfg),
        Command::VerifyTw => verify(cfg, "tw", run_tw_experiment),
        Command::VerifyLocalLaw => verify(cfg, "local_law", run_local_law_experiment),
        Command::VerifyRigidity => verify(cfg, "rigidity", run_rigidity_experiment),
        Command::VerifyDbm => verify(cfg, "dbm", run_dbm_comparison),
        Command::DecomposeCheck => decompose_check(cfg),
    }
}

fn measures(cfg: &RunConfig) -> Result<(freeedge::measure::Measure, freeedge::measure::Measure), Failure> {
    Ok((
        RunConfig::measure(&cfg.mu_a).map_err(Failure::Config)?,
        RunConfig::measure(&cfg.mu_b).map_err(Failure::Config)?,
    ))
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, Failure> {
    if points < 2 || !(hi > lo) {
        return Err(Failure::Config(format!("grid needs grid_points >= 2 and grid_hi > grid_lo, got [{lo}, {hi}] x {points}")));
    }
    Ok((0..points).map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64).collect())
}

fn compute_edge(cfg: &RunConfig) -> Result<EdgeReport, Failure> {
    let (mu1, mu2) = measures(cfg)?;
    Ok(find_edge_stability(&mu1, &mu2, cfg.t, cfg.tol)?)
}

fn write_edge(cfg: &RunConfig, edge: &EdgeReport) -> Outcome {
    io::write_json(&cfg.output_dir.join("edge.json"), edge)?;
    println!("{}", io::json_string(edge)?.trim_end());
    Ok(())
}

fn convolve(cfg: &RunConfig) -> Outcome {
    let (mu1, mu2) = measures(cfg)?;
    let edge = find_edge_stability(&mu1, &mu2, cfg.t, cfg.tol)?;
    let lower = support_lower_bound(&mu1, &mu2, cfg.t);
    let pad = 0.05 * (edge.e_plus - lower);
    let xs = grid(
        cfg.grid_lo.unwrap_or(lower - pad),
        cfg.grid_hi.unwrap_or(edge.e_plus + pad),
        cfg.grid_points,
    )?;
    let rho = density(&mu1, &mu2, cfg.t, &xs, &cfg.eta_seq, &SolverOptions::default())?;
    io::write_density_csv(&cfg.output_dir.join("density.csv"), &rho)?;
    write_edge(cfg, &edge)
}

fn edge(cfg: &RunConfig) -> Outcome {
    let e = compute_edge(cfg)?;
    write_edge(cfg, &e)
}

fn tabulate_tw(cfg: &RunConfig) -> Outcome {
    let xs = grid(cfg.grid_lo.unwrap_or(-8.0), cfg.grid_hi.unwrap_or(6.0), cfg.grid_points)?;
    let table = TwEvaluator::default().tabulate(&xs)?;
    io::write_tw_csv(&cfg.output_dir.join("tw2.csv"), &table)?;
    Ok(())
}

fn sample(cfg: &RunConfig) -> Outcome {
    let exp = cfg.experiment().map_err(Failure::Config)?;
    if cfg.n_samples == 0 {
        return Err(Failure::Config("n_samples must be at least 1".into()));
    }
    let spec = exp.ensemble(cfg.n)?;
    let samples: Vec<SpectrumSample> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| sample_stream(&spec, i))
        .collect::<Result<_, _>>()?;
    io::write_spectra_csv(&cfg.output_dir.join("spectra.csv"), &samples, cfg.top_k.min(cfg.n))?;
    Ok(())
}

fn verify(
    cfg: &RunConfig,
    tag: &str,
    f: fn(&freeedge::harness::ExperimentConfig) -> freeedge::Result<ExperimentReport>,
) -> Outcome {
    let exp = cfg.experiment().map_err(Failure::Config)?;
    let report = f(&exp)?;
    io::write_json(&cfg.output_dir.join(format!("{tag}_report.json")), &report)?;
    if !report.samples.is_empty() {
        io::write_samples_csv(&cfg.output_dir.join(format!("{tag}_samples.csv")), &report)?;
    }
    eprintln!("wall time {:.2}s", report.wall_time_s);
    if report.pass {
        println!("{}", report.summary_line());
        Ok(())
    } else {
        Err(Failure::Statistical(report.summary_line()))
    }
}

#[derive(Serialize)]
struct DecomposeReport {
    n: usize,
    pairs: usize,
    seed: u64,
    max_defect: f64,
    threshold: f64,
    pass: bool,
}

fn decompose_check(cfg: &RunConfig) -> Outcome {
    if cfg.n == 0 || cfg.n_samples == 0 {
        return Err(Failure::Config("decompose-check needs n >= 1 and n_samples >= 1".into()));
    }
    let defects: Vec<f64> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(cfg.seed, k);
            let u = sample_haar_unitary(cfg.n, &mut rng);
            let i = (k as usize) % cfg.n;
            partial_decomposition(&u, i).map(|p| p.identity_defect(&u))
        })
        .collect::<Result<_, _>>()?;
    let max_defect = defects.iter().copied().fold(0.0, f64::max);
    let threshold = 1e-10;
    let report = DecomposeReport {
        n: cfg.n,
        pairs: cfg.n_samples,
        seed: cfg.seed,
        max_defect,
        threshold,
        pass: max_defect <= threshold,
    };
    io::write_json(&cfg.output_dir.join("decompose.json"), &report)?;
    let line = format!(
        "{} decompose-check: max defect {max_defect:.3e} (threshold {threshold})",
        if report.pass { "PASS" } else { "FAIL" }
    );
    if report.pass {
        println!("{line}");
        Ok(())
    } else {
        Err(Failure::Statistical(line))
    }
}
