//! Monte Carlo experiments comparing sampled spectra with the deterministic
//! predictions: Tracy-Widom edge law, local laws, rigidity and the
//! edge comparison along the matrix flow.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edge::{classical_locations, find_edge_stability, locate_edge_report, EdgeMethod, EdgeReport};
use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::rmt::{build, flow_spectra, resolvent_probe, sample_stream, stream_rng, EnsembleSpec};
use crate::subordination::{solve, SolverOptions, SubordinationQuery};
use crate::tracywidom::{TwEvaluator, S_MAX, S_MIN};

/// Measures and time on the deterministic side.
#[derive(Debug, Clone)]
pub struct Theory {
    pub mu1: Measure,
    pub mu2: Measure,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Matrix size for the TW, rigidity and flow experiments.
    pub n: usize,
    /// `A` and `B` are the `N`-point quantiles of these measures.
    pub mu_a: Measure,
    pub mu_b: Measure,
    /// Time of the sampled ensemble (base time for the flow comparison).
    pub t: f64,
    /// Deterministic side; defaults to `(mu_a, mu_b, t)`.
    pub theory: Theory,
    pub n_samples: usize,
    pub seed: u64,
    pub ks_threshold: f64,
    /// Local-law probes sit at `E_+ + i N^{-eta_exponent}`.
    pub eta_exponent: f64,
    /// Flow time `t₀ = N^{-1/3 + chi}`.
    pub chi: f64,
    /// Overrides `t₀` when set.
    pub flow_time: Option<f64>,
    /// Matrix sizes for the local-law experiment.
    pub sizes: Vec<usize>,
    /// Number of top eigenvalues in the rigidity statistic.
    pub top_k: usize,
    pub rigidity_threshold: f64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(mu_a: Measure, mu_b: Measure, t: f64, n: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            n,
            theory: Theory {
                mu1: mu_a.clone(),
                mu2: mu_b.clone(),
                t,
            },
            mu_a,
            mu_b,
            t,
            n_samples,
            seed,
            ks_threshold: 0.05,
            eta_exponent: 0.6,
            chi: 0.1,
            flow_time: None,
            sizes: vec![250, 500, 1000],
            top_k: 100,
            rigidity_threshold: 10.0,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("n_samples must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("matrix size must be positive".into()));
        }
        if !(self.ks_threshold > 0.0 && self.ks_threshold < 1.0) {
            return Err(Error::InvalidInput(format!("ks_threshold {} not in (0, 1)", self.ks_threshold)));
        }
        if !(self.chi > 0.0 && self.chi < 1.0 / 3.0) {
            return Err(Error::InvalidInput(format!("chi {} not in (0, 1/3)", self.chi)));
        }
        if !(self.eta_exponent > 0.0 && self.eta_exponent < 1.0) {
            return Err(Error::InvalidInput(format!("eta_exponent {} not in (0, 1)", self.eta_exponent)));
        }
        if !(self.t >= 0.0 && self.theory.t >= 0.0) {
            return Err(Error::InvalidInput("times must be >= 0".into()));
        }
        if let Some(t0) = self.flow_time {
            if !(t0 >= 0.0 && t0.is_finite()) {
                return Err(Error::InvalidInput(format!("flow time {t0} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Quantile-embedded ensemble of size `n`.
    pub fn ensemble(&self, n: usize) -> Result<EnsembleSpec> {
        EnsembleSpec::quantile_embedded(&self.mu_a, &self.mu_b, n, self.t, self.seed)
    }

    /// `t₀ = N^{-1/3 + chi}` unless overridden.
    pub fn flow_time(&self) -> f64 {
        self.flow_time
            .unwrap_or_else(|| (self.n as f64).powf(-1.0 / 3.0 + self.chi))
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            n: self.n,
            mu_a: self.mu_a.describe(),
            mu_b: self.mu_b.describe(),
            t: self.t,
            theory_mu1: self.theory.mu1.describe(),
            theory_mu2: self.theory.mu2.describe(),
            theory_t: self.theory.t,
            n_samples: self.n_samples,
            seed: self.seed,
            ks_threshold: self.ks_threshold,
            eta_exponent: self.eta_exponent,
            chi: self.chi,
            flow_time: self.flow_time,
            sizes: self.sizes.clone(),
            top_k: self.top_k,
            rigidity_threshold: self.rigidity_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub mu_a: String,
    pub mu_b: String,
    pub t: f64,
    pub theory_mu1: String,
    pub theory_mu2: String,
    pub theory_t: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub ks_threshold: f64,
    pub eta_exponent: f64,
    pub chi: f64,
    pub flow_time: Option<f64>,
    pub sizes: Vec<usize>,
    pub top_k: usize,
    pub rigidity_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub variance: f64,
}

impl SummaryStats {
    fn of(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let variance = if x.len() > 1 {
            x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, variance }
    }
}

/// Empirical CDF against a reference at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub s: f64,
    pub empirical: f64,
    pub reference: f64,
}

/// Local-law summary for one matrix size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLawRow {
    pub n: usize,
    pub z: Complex64,
    pub omega_a: Complex64,
    pub median_entry_error: f64,
    pub median_average_error: f64,
    pub median_upsilon: f64,
    pub median_omega_gap: f64,
    pub entry_errors: Vec<f64>,
    pub average_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tag: String,
    pub config: ConfigEcho,
    pub n_samples: usize,
    /// Kolmogorov-Smirnov distance for the distributional experiments.
    pub ks: Option<f64>,
    /// Quantity compared with `threshold` to decide `pass`.
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub edges: Vec<EdgeReport>,
    pub stats: Option<SummaryStats>,
    pub ecdf: Vec<CdfPoint>,
    /// Per-sample values (rescaled `λ₁`, or the rigidity statistic). The
    /// flow comparison stores the base-time values first.
    pub samples: Vec<f64>,
    pub local_law: Vec<LocalLawRow>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{} {}: statistic {:.6} (threshold {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.tag,
            self.statistic,
            self.threshold
        )
    }
}

/// One-sample Kolmogorov-Smirnov distance `max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("KS statistic of an empty sample".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    Ok(x.iter().enumerate().fold(0.0, |d: f64, (i, &xi)| {
        let f = cdf(xi);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("KS statistic of an empty sample".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

fn median(v: &[f64]) -> f64 {
    percentile(v, 0.5)
}

/// Linear-interpolation percentile, `p ∈ [0, 1]`.
pub fn percentile(v: &[f64], p: f64) -> f64 {
    let mut x = v.to_vec();
    x.sort_by(f64::total_cmp);
    let h = p * (x.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    x[lo] + (h - lo as f64) * (x[hi] - x[lo])
}

/// `F₂` extended by 0 and 1 outside its tabulated range.
fn tw_cdf(ev: &TwEvaluator, s: f64) -> f64 {
    if s < S_MIN {
        0.0
    } else if s > S_MAX {
        1.0
    } else {
        ev.cdf(s).unwrap_or(f64::NAN)
    }
}

fn ecdf_grid(samples: &[f64], reference: impl Fn(f64) -> f64) -> Vec<CdfPoint> {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    (0..=100)
        .map(|k| {
            let s = -6.0 + 0.1 * k as f64;
            let below = x.partition_point(|&v| v <= s);
            CdfPoint {
                s,
                empirical: below as f64 / x.len() as f64,
                reference: reference(s),
            }
        })
        .collect()
}

/// Runs `f` on the configured pool.
fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    faer::set_global_parallelism(faer::Par::Seq);
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Edge of the theory side, checked before any sampling.
fn theory_edge(mu1: &Measure, mu2: &Measure, t: f64) -> Result<EdgeReport> {
    let edge = find_edge_stability(mu1, mu2, t, 1e-10)?;
    if edge.method == EdgeMethod::StabilityRoot && edge.residual > 1e-9 {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: edge.residual,
        });
    }
    Ok(edge)
}

fn rescale(edge: &EdgeReport, n: usize, lambda: f64) -> f64 {
    edge.gamma * (n as f64).powf(2.0 / 3.0) * (lambda - edge.e_plus)
}

/// Rescaled largest eigenvalue `γ N^{2/3} (λ₁ - E_+)` against `F₂`.
pub fn run_tw_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let th = &cfg.theory;
    let edge = theory_edge(&th.mu1, &th.mu2, th.t)?;
    let spec = cfg.ensemble(cfg.n)?;
    let lambdas: Vec<f64> = in_pool(cfg.workers, || {
        (0..cfg.n_samples as u64)
            .into_par_iter()
            .map(|i| sample_stream(&spec, i).map(|s| s.lambda_max()))
            .collect::<Result<Vec<_>>>()
    })??;
    let xs: Vec<f64> = lambdas.iter().map(|&l| rescale(&edge, cfg.n, l)).collect();
    let ev = TwEvaluator::default();
    let ks = ks_statistic(&xs, |s| tw_cdf(&ev, s))?;
    Ok(ExperimentReport {
        tag: "tw".into(),
        config: cfg.echo(),
        n_samples: cfg.n_samples,
        ks: Some(ks),
        statistic: ks,
        threshold: cfg.ks_threshold,
        pass: ks <= cfg.ks_threshold,
        edges: vec![edge],
        stats: Some(SummaryStats::of(&xs)),
        ecdf: ecdf_grid(&xs, |s| tw_cdf(&ev, s)),
        samples: xs,
        local_law: Vec::new(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Entrywise and averaged resolvent errors against `(𝔞_i - ω_A(z))⁻¹` at
/// `z = E_+ + i N^{-eta_exponent}`, where `ω_A` and `E_+` come from the
/// empirical measures `μ_A, μ_B` of the sampled diagonals.
///
/// Passes if the median entrywise error strictly decreases with `N` and
/// drops by the factor `0.9` end to end, the median `|Υ|` stays below
/// `5 N^{-1/2}`, and the median `|ω_A^c - ω_A|` stays below the median
/// entrywise error, at every size.
pub fn run_local_law_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.sizes.is_empty() {
        return Err(Error::InvalidInput("local law needs at least one size".into()));
    }
    let start = Instant::now();
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    let mut edges = Vec::new();
    let mut ok = true;
    for &n in &cfg.sizes {
        let spec = cfg.ensemble(n)?;
        let mu_a = Measure::equal_atoms(&spec.a_diag)?;
        let mu_b = Measure::equal_atoms(&spec.b_diag)?;
        let edge = locate_edge_report(&mu_a, &mu_b, spec.t)?;
        let z = Complex64::new(edge.e_plus, (n as f64).powf(-cfg.eta_exponent));
        let sol = solve(&SubordinationQuery::new(&mu_a, &mu_b, spec.t, z), &SolverOptions::default())?;
        let omega = sol.omega1;
        let expected: Vec<Complex64> = spec
            .a_diag
            .iter()
            .map(|&a| (Complex64::new(a, 0.0) - omega).inv())
            .collect();
        let per_sample: Vec<(f64, f64, f64, f64)> = in_pool(cfg.workers, || {
            (0..cfg.n_samples as u64)
                .into_par_iter()
                .map(|i| {
                    let ens = build(&spec, &mut stream_rng(spec.seed, i))?;
                    let p = resolvent_probe(&ens.h, ens.b_tilde.as_ref(), spec.t, z)?;
                    let mut worst: f64 = 0.0;
                    let mut sum = Complex64::new(0.0, 0.0);
                    for (g, e) in p.g_diag.iter().zip(&expected) {
                        worst = worst.max((g - e).norm());
                        sum += g - e;
                    }
                    Ok((
                        worst,
                        sum.norm() / n as f64,
                        p.upsilon.norm(),
                        (p.omega_a_c - omega).norm(),
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let col = |k: usize| -> Vec<f64> {
            per_sample
                .iter()
                .map(|r| [r.0, r.1, r.2, r.3][k])
                .collect()
        };
        let row = LocalLawRow {
            n,
            z,
            omega_a: omega,
            median_entry_error: median(&col(0)),
            median_average_error: median(&col(1)),
            median_upsilon: median(&col(2)),
            median_omega_gap: median(&col(3)),
            entry_errors: col(0),
            average_errors: col(1),
        };
        ok &= row.median_upsilon <= 5.0 / (n as f64).sqrt();
        ok &= row.median_omega_gap <= row.median_entry_error;
        rows.push(row);
        edges.push(edge);
    }
    let medians: Vec<f64> = rows.iter().map(|r| r.median_entry_error).collect();
    ok &= medians.windows(2).all(|w| w[1] < w[0]);
    let ratio = medians.last().unwrap() / medians[0];
    let threshold = 0.9;
    if rows.len() > 1 {
        ok &= ratio <= threshold;
    }
    Ok(ExperimentReport {
        tag: "local_law".into(),
        config: cfg.echo(),
        n_samples: cfg.n_samples,
        ks: None,
        statistic: ratio,
        threshold,
        pass: ok,
        edges,
        stats: None,
        ecdf: Vec::new(),
        samples: Vec::new(),
        local_law: rows,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// `R = max_{i ≤ top_k} N^{2/3} i^{1/3} |λ_i - γ_i|` per sample, against the
/// classical locations of the theory side; passes if the 95th percentile
/// of `R` is at most `rigidity_threshold`.
pub fn run_rigidity_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.top_k == 0 || cfg.top_k > cfg.n {
        return Err(Error::InvalidInput(format!("top_k {} not in 1..={}", cfg.top_k, cfg.n)));
    }
    let start = Instant::now();
    let th = &cfg.theory;
    let gammas = classical_locations(&th.mu1, &th.mu2, th.t, cfg.n, cfg.top_k)?;
    let spec = cfg.ensemble(cfg.n)?;
    let n23 = (cfg.n as f64).powf(2.0 / 3.0);
    let stats: Vec<f64> = in_pool(cfg.workers, || {
        (0..cfg.n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let s = sample_stream(&spec, i)?;
                Ok(gammas
                    .iter()
                    .enumerate()
                    .map(|(k, &g)| n23 * ((k + 1) as f64).cbrt() * (s.eigenvalues[k] - g).abs())
                    .fold(0.0, f64::max))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let p95 = percentile(&stats, 0.95);
    let edges = locate_edge_report(&th.mu1, &th.mu2, th.t).into_iter().collect();
    Ok(ExperimentReport {
        tag: "rigidity".into(),
        config: cfg.echo(),
        n_samples: cfg.n_samples,
        ks: None,
        statistic: p95,
        threshold: cfg.rigidity_threshold,
        pass: p95 <= cfg.rigidity_threshold,
        edges,
        stats: Some(SummaryStats::of(&stats)),
        ecdf: Vec::new(),
        samples: stats,
        local_law: Vec::new(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Rescaled `λ₁` of `H` at the base time `t` and of `H + √t₀ W'` with an
/// independent `W'`, sharing `U`; two-sample KS between the two laws.
pub fn run_dbm_comparison(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let t0 = cfg.flow_time();
    let th = &cfg.theory;
    let edge_a = theory_edge(&th.mu1, &th.mu2, th.t)?;
    let edge_b = if t0 == 0.0 {
        edge_a
    } else {
        theory_edge(&th.mu1, &th.mu2, th.t + t0)?
    };
    let spec = cfg.ensemble(cfg.n)?;
    let times = [cfg.t, cfg.t + t0];
    let pairs: Vec<(f64, f64)> = in_pool(cfg.workers, || {
        (0..cfg.n_samples as u64)
            .into_par_iter()
            .map(|i| {
                let sp = flow_spectra(&spec, &times, &mut stream_rng(spec.seed, i))?;
                Ok((
                    rescale(&edge_a, cfg.n, sp[0][0]),
                    rescale(&edge_b, cfg.n, sp[1][0]),
                ))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let xa: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let xb: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let ks = ks_two_sample(&xa, &xb)?;
    let mut sorted_b = xb.clone();
    sorted_b.sort_by(f64::total_cmp);
    let reference = |s: f64| sorted_b.partition_point(|&v| v <= s) as f64 / sorted_b.len() as f64;
    let ecdf = ecdf_grid(&xa, reference);
    let mut samples = xa.clone();
    samples.extend_from_slice(&xb);
    Ok(ExperimentReport {
        tag: "dbm".into(),
        config: cfg.echo(),
        n_samples: cfg.n_samples,
        ks: Some(ks),
        statistic: ks,
        threshold: cfg.ks_threshold,
        pass: ks <= cfg.ks_threshold,
        edges: vec![edge_a, edge_b],
        stats: Some(SummaryStats::of(&xa)),
        ecdf,
        samples,
        local_law: Vec::new(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
