//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails. Pass criterion numbers as arguments to
//! run a subset: `cargo test --test acceptance -- 3 4`.

use std::process::ExitCode;
use std::time::Instant;

use faer::c64;
use freeedge::airy::airy_ai;
use freeedge::edge::{edge_from_xi, find_edge_stability};
use freeedge::harness::{
    run_dbm_comparison, run_local_law_experiment, run_rigidity_experiment, run_tw_experiment, ExperimentConfig,
    Theory,
};
use freeedge::measure::Measure;
use freeedge::rmt::{
    gue_tridiagonal_lambda_max, partial_decomposition, sample_haar_unitary, sample_stream,
    stream_rng, EnsembleSpec,
};
use freeedge::subordination::{solve, SolverOptions, SubordinationQuery};
use freeedge::tracywidom::TwEvaluator;
use freeedge::Complex64;
use rayon::prelude::*;

type Outcome = (bool, String);

fn sc(v: f64) -> Measure {
    Measure::semicircle(v, 0.0).unwrap()
}

fn unif() -> Measure {
    Measure::uniform(-1.0, 1.0).unwrap()
}

fn delta(c: f64) -> Measure {
    Measure::point_mass(c).unwrap()
}

/// Semicircle of variance `v`: `(-z + √(z - 2√v) √(z + 2√v)) / (2v)`.
fn m_semicircle(v: f64, z: Complex64) -> Complex64 {
    let r = 2.0 * v.sqrt();
    (-z + (z - r).sqrt() * (z + r).sqrt()) / (2.0 * v)
}

fn c1() -> Outcome {
    let mu = sc(1.0);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let z = Complex64::new(-3.5 + 7.0 * k as f64 / 99.0, 0.05);
        let sol = solve(&SubordinationQuery::new(&mu, &mu, 0.0, z), &SolverOptions::default()).unwrap();
        worst = worst.max((sol.m - m_semicircle(2.0, z)).norm());
    }
    (worst <= 1e-10, format!("max |m - m_sc(2)| = {worst:.3e}"))
}

fn c2() -> Outcome {
    let mut worst: f64 = 0.0;
    for mu in [sc(1.0), unif()] {
        for c in [-0.3, 0.5] {
            let d = delta(c);
            for k in 0..20 {
                let z = Complex64::new(-3.0 + 6.0 * (k / 2) as f64 / 9.0, if k % 2 == 0 { 0.1 } else { 1.0 });
                let sol = solve(&SubordinationQuery::new(&mu, &d, 0.0, z), &SolverOptions::default()).unwrap();
                worst = worst.max((sol.omega1 - (z - c)).norm());
            }
        }
    }
    (worst <= 1e-10, format!("max |omega1 - (z - c)| = {worst:.3e}"))
}

fn c3() -> Outcome {
    let mut worst: f64 = 0.0;
    for t in [0.25, 1.0] {
        let r = edge_from_xi(&sc(1.0), t, 1e-13).unwrap();
        let s = (1.0f64 + t).sqrt();
        worst = worst
            .max((r.xi.unwrap() - (2.0 + t) / s).abs())
            .max((r.e_plus - 2.0 * s).abs())
            .max((r.gamma - 1.0 / s).abs());
    }
    (worst <= 1e-8, format!("max deviation from closed forms = {worst:.3e}"))
}

fn c4() -> Outcome {
    let mu = sc(1.0);
    let r = find_edge_stability(&mu, &mu, 0.0, 1e-12).unwrap();
    let err = (r.e_plus - 2.0 * 2f64.sqrt()).abs();
    (
        err <= 1e-8 && r.residual <= 1e-9,
        format!("|E+ - 2√2| = {err:.3e}, |S| = {:.3e}", r.residual),
    )
}

fn c5() -> Outcome {
    let coarse = TwEvaluator::new(40, 14.0).unwrap();
    let fine = TwEvaluator::new(80, 14.0).unwrap();
    let mut cdf_gap: f64 = 0.0;
    for k in 0..=20 {
        let s = -6.0 + 0.5 * k as f64;
        cdf_gap = cdf_gap.max((coarse.cdf(s).unwrap() - fine.cdf(s).unwrap()).abs());
    }
    let h = 2e-3;
    let mut ode: f64 = 0.0;
    for x in [-8.0, -5.0, -2.5, -1.0, 0.0, 1.0, 2.5, 5.0] {
        let f = |x| airy_ai(x).unwrap();
        let second = (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h);
        ode = ode.max((second - x * f(x)).abs());
    }
    let (mean, _) = coarse.moments().unwrap();
    let n = 2000;
    let scale = (n as f64).powf(2.0 / 3.0);
    let mc: Vec<f64> = (0..5000u64)
        .into_par_iter()
        .map(|i| scale * (gue_tridiagonal_lambda_max(n, &mut stream_rng(5, i)) - 2.0))
        .collect();
    let mc_mean = mc.iter().sum::<f64>() / mc.len() as f64;
    let ok = cdf_gap <= 1e-8 && ode <= 1e-8 && (mean + 1.7711).abs() <= 1e-3 && (mc_mean - mean).abs() <= 0.01;
    (
        ok,
        format!(
            "m=40 vs m=80 gap {cdf_gap:.3e}, Airy ODE residual {ode:.3e}, quadrature mean {mean:.6}, GUE N=2000 mean {mc_mean:.4}"
        ),
    )
}

fn report(r: freeedge::harness::ExperimentReport) -> Outcome {
    let line = format!("{} in {:.1}s", r.summary_line(), r.wall_time_s);
    (r.pass, line)
}

fn c6() -> Outcome {
    let d = delta(0.0);
    let mut cfg = ExperimentConfig::new(d.clone(), d, 1.0, 400, 2000, 6);
    cfg.ks_threshold = 0.05;
    report(run_tw_experiment(&cfg).unwrap())
}

fn c7() -> Outcome {
    let mut cfg = ExperimentConfig::new(unif(), unif(), 0.0, 300, 1000, 7);
    cfg.ks_threshold = 0.08;
    report(run_tw_experiment(&cfg).unwrap())
}

fn c8() -> Outcome {
    let mut cfg = ExperimentConfig::new(unif(), unif(), 0.0, 250, 20, 8);
    cfg.sizes = vec![250, 500, 1000];
    cfg.eta_exponent = 0.6;
    let r = run_local_law_experiment(&cfg).unwrap();
    let rows: Vec<String> = r
        .local_law
        .iter()
        .map(|row| {
            format!(
                "N={} entry {:.3e} avg {:.3e} |Υ| {:.3e} |ω^c-ω| {:.3e}",
                row.n, row.median_entry_error, row.median_average_error, row.median_upsilon, row.median_omega_gap
            )
        })
        .collect();
    (r.pass, format!("ratio {:.3}; {}", r.statistic, rows.join("; ")))
}

fn c9() -> Outcome {
    let d = delta(0.0);
    let mut cfg = ExperimentConfig::new(d.clone(), d.clone(), 1.0, 1000, 50, 9);
    cfg.theory = Theory {
        mu1: sc(1.0),
        mu2: d,
        t: 0.0,
    };
    cfg.top_k = 100;
    cfg.rigidity_threshold = 10.0;
    report(run_rigidity_experiment(&cfg).unwrap())
}

fn c10() -> Outcome {
    let mut cfg = ExperimentConfig::new(unif(), unif(), 0.0, 300, 1000, 10);
    cfg.chi = 0.1;
    cfg.ks_threshold = 0.08;
    report(run_dbm_comparison(&cfg).unwrap())
}

fn c11() -> Outcome {
    let n = 64;
    let mut worst: f64 = 0.0;
    for k in 0..50u64 {
        let mut rng = stream_rng(11, k);
        let u = sample_haar_unitary(n, &mut rng);
        let i = (k as usize * 37) % n;
        let p = partial_decomposition(&u, i).unwrap();
        let r = p.reflection();
        let rr = &r * &r;
        let back = p.reconstruct();
        for a in 0..n {
            for b in 0..n {
                let id = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((rr[(a, b)] - c64::new(id, 0.0)).norm());
                worst = worst.max((back[(a, b)] - u[(a, b)]).norm());
                if a == i || b == i {
                    worst = worst.max((p.u_reduced[(a, b)] - c64::new(id, 0.0)).norm());
                }
            }
            // R e_i = -h.
            worst = worst.max((r[(a, i)] + p.h_vec[a]).norm());
        }
    }
    (worst <= 1e-10, format!("max identity defect over 50 pairs = {worst:.3e}"))
}

fn c12() -> Outcome {
    let n = 2000;
    let pm: Vec<f64> = (0..n).map(|k| if k < n / 2 { -1.0 } else { 1.0 }).collect();
    let spec = EnsembleSpec::new(pm.clone(), pm, 0.0, 12).unwrap();
    let ev = sample_stream(&spec, 0).unwrap().eigenvalues;
    let mut asc = ev.clone();
    asc.reverse();
    let arcsine = Measure::arcsine(-2.0, 2.0).unwrap();
    // Sup over x of |F_N(x) - F(x)| is attained at the eigenvalues.
    let mut d: f64 = 0.0;
    for (k, &x) in asc.iter().enumerate() {
        let f = arcsine.cdf(x.clamp(-2.0, 2.0));
        d = d.max((f - k as f64 / n as f64).abs()).max(((k + 1) as f64 / n as f64 - f).abs());
    }
    (d <= 0.03, format!("sup |F_N - F_arcsine| = {d:.4}"))
}

fn main() -> ExitCode {
    faer::set_global_parallelism(faer::Par::Seq);
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "semicircle self-convolution", c1),
        (2, "delta-shift identity", c2),
        (3, "xi and gamma closed forms", c3),
        (4, "edge via stability root", c4),
        (5, "Tracy-Widom module self-consistency", c5),
        (6, "GUE Tracy-Widom control", c6),
        (7, "uniform pair edge law", c7),
        (8, "local law decay", c8),
        (9, "rigidity", c9),
        (10, "flow edge comparison", c10),
        (11, "partial randomness decomposition", c11),
        (12, "Bernoulli arcsine sanity", c12),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {k} ({name}): {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
