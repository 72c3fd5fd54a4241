//! Run configuration: built-in defaults per command, then the TOML file,
//! then `--set key=value` pairs, then dedicated flags.

use std::path::{Path, PathBuf};

use freeedge::harness::{ExperimentConfig, Theory};
use freeedge::measure::Measure;
use serde::Deserialize;
use toml::{Table, Value};

pub const KEYS_HELP: &str = "\
Config keys (TOML file via --config, or --set key=value):
  mu_a, mu_b            measures as \"tag\" or \"tag:p1,p2,...\"; tags: semicircle
                        (variance[,center]), uniform, arcsine (a,b), point_mass (c),
                        atoms (x1,...), grid (nodes..., values...)
  t                     Gaussian time of the model
  theory_mu1, theory_mu2, theory_t
                        deterministic side of the verify commands (default: mu_a, mu_b, t)
  n                     matrix size
  n_samples             number of Monte Carlo samples (pairs for decompose-check)
  seed                  master seed
  ks_threshold          pass threshold for KS distances
  eta_exponent          local-law probes at E_+ + i N^-eta_exponent
  chi                   flow time t0 = N^(-1/3 + chi)
  flow_time             explicit t0, overrides chi
  sizes                 matrix sizes for verify-local-law
  top_k                 eigenvalues per sample (sample, verify-rigidity)
  rigidity_threshold    pass threshold for the rigidity percentile
  workers               worker threads, 0 = all cores
  tol                   edge tolerance
  grid_lo, grid_hi, grid_points
                        grid for convolve and tabulate-tw
  eta_seq               imaginary parts extrapolated to zero by convolve
  output_dir            directory for CSV and JSON outputs";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mu_a: String,
    pub mu_b: String,
    pub t: f64,
    pub theory_mu1: Option<String>,
    pub theory_mu2: Option<String>,
    pub theory_t: Option<f64>,
    pub n: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub ks_threshold: f64,
    pub eta_exponent: f64,
    pub chi: f64,
    pub flow_time: Option<f64>,
    pub sizes: Vec<usize>,
    pub top_k: usize,
    pub rigidity_threshold: f64,
    pub workers: usize,
    pub tol: f64,
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    pub grid_points: usize,
    pub eta_seq: Vec<f64>,
    pub output_dir: PathBuf,
}

fn defaults(command: &str) -> Table {
    let mut base: Table = toml::from_str(
        r#"
        mu_a = "semicircle:1"
        mu_b = "semicircle:1"
        t = 0.0
        n = 300
        n_samples = 1000
        seed = 1
        ks_threshold = 0.05
        eta_exponent = 0.6
        chi = 0.1
        sizes = [250, 500, 1000]
        top_k = 10
        rigidity_threshold = 10.0
        workers = 0
        tol = 1e-10
        grid_points = 401
        eta_seq = [1e-3, 5e-4]
        output_dir = "out"
        "#,
    )
    .expect("built-in defaults parse");
    let over = match command {
        "tabulate-tw" => "grid_lo = -8.0\ngrid_hi = 6.0\ngrid_points = 141",
        "sample" => "mu_a = \"point_mass:0\"\nmu_b = \"point_mass:0\"\nt = 1.0\nn = 200\nn_samples = 10",
        "verify-tw" => "mu_a = \"point_mass:0\"\nmu_b = \"point_mass:0\"\nt = 1.0\nn = 400\nn_samples = 2000",
        "verify-local-law" => "mu_a = \"uniform:-1,1\"\nmu_b = \"uniform:-1,1\"\nn_samples = 20",
        "verify-rigidity" => {
            "mu_a = \"point_mass:0\"\nmu_b = \"point_mass:0\"\nt = 1.0\n\
             theory_mu1 = \"semicircle:1\"\ntheory_mu2 = \"point_mass:0\"\ntheory_t = 0.0\n\
             n = 1000\nn_samples = 50\ntop_k = 100"
        }
        "verify-dbm" => "mu_a = \"uniform:-1,1\"\nmu_b = \"uniform:-1,1\"\nks_threshold = 0.08",
        "decompose-check" => "n = 64\nn_samples = 50",
        _ => "",
    };
    base.extend(toml::from_str::<Table>(over).expect("command defaults parse"));
    base
}

/// Parses `key=value`; the value is read as a TOML value, or as a bare
/// string when that fails.
pub fn parse_assignment(s: &str) -> Result<(String, Value), String> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let key = key.trim().to_string();
    if key.is_empty() {
        return Err(format!("empty key in '{s}'"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key, value))
}

impl RunConfig {
    pub fn load(command: &str, file: Option<&Path>, overrides: Vec<(String, Value)>) -> Result<Self, String> {
        let mut table = defaults(command);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let user: Table = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            table.extend(user);
        }
        table.extend(overrides);
        let cfg: RunConfig = Value::Table(coerce_reals(table))
            .try_into()
            .map_err(|e: toml::de::Error| e.message().to_string())?;
        Ok(cfg)
    }

    pub fn measure(spec: &str) -> Result<Measure, String> {
        let (tag, params) = match spec.split_once(':') {
            Some((tag, p)) => {
                let params = p
                    .split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|e| format!("measure '{spec}': {e}")))
                    .collect::<Result<Vec<_>, _>>()?;
                (tag.trim(), params)
            }
            None => (spec.trim(), Vec::new()),
        };
        Measure::from_tag(tag, &params).map_err(|e| e.to_string())
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, String> {
        let mu_a = Self::measure(&self.mu_a)?;
        let mu_b = Self::measure(&self.mu_b)?;
        let mut cfg = ExperimentConfig::new(mu_a, mu_b, self.t, self.n, self.n_samples, self.seed);
        cfg.theory = Theory {
            mu1: match &self.theory_mu1 {
                Some(s) => Self::measure(s)?,
                None => cfg.mu_a.clone(),
            },
            mu2: match &self.theory_mu2 {
                Some(s) => Self::measure(s)?,
                None => cfg.mu_b.clone(),
            },
            t: self.theory_t.unwrap_or(self.t),
        };
        cfg.ks_threshold = self.ks_threshold;
        cfg.eta_exponent = self.eta_exponent;
        cfg.chi = self.chi;
        cfg.flow_time = self.flow_time;
        cfg.sizes = self.sizes.clone();
        cfg.top_k = self.top_k;
        cfg.rigidity_threshold = self.rigidity_threshold;
        cfg.workers = self.workers;
        Ok(cfg)
    }
}

const REAL_KEYS: [&str; 11] = [
    "t",
    "theory_t",
    "ks_threshold",
    "eta_exponent",
    "chi",
    "flow_time",
    "rigidity_threshold",
    "tol",
    "grid_lo",
    "grid_hi",
    "eta_seq",
];

/// Lets `t = 1` stand for `t = 1.0`.
fn coerce_reals(mut table: Table) -> Table {
    for key in REAL_KEYS {
        if let Some(v) = table.get_mut(key) {
            match v {
                Value::Integer(i) => *v = Value::Float(*i as f64),
                Value::Array(items) => {
                    for x in items.iter_mut() {
                        if let Value::Integer(i) = x {
                            *x = Value::Float(*i as f64);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    table
}
