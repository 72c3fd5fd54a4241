//! Subordination solver for `μ₁ ⊞ μ₂ ⊞ σ_t`, where `σ_t` is the semicircle
//! law of variance `t`.
//!
//! With `F_{μ,t}(z) = -1/m_μ(z) + t·m_μ(z)`, the subordination functions
//! `ω₁, ω₂` are the unique analytic self-maps of the upper half-plane with
//!
//! ```text
//! F_{μ₁,t}(ω₁) = F_{μ₂,t}(ω₂) = ω₁ + ω₂ - z,   Im ω_j ≥ Im z,
//! ```
//!
//! and then `m_{μ_t}(z) = m_{μ₁}(ω₁(z)) = m_{μ₂}(ω₂(z))`. We find them by
//! iterating `ω₂ ↦ z + h₁(z + h₂(ω₂))` with `h_j(ω) = F_{μ_j,t}(ω) - ω`,
//! a composition of Pick maps, and finish with Newton steps on the 2×2
//! system once the iterate is close.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Measure;

/// `F_{μ,t}(z) = -1/m_μ(z) + t·m_μ(z)`.
pub fn f_transform(mu: &Measure, t: f64, z: Complex64) -> Result<Complex64> {
    let m = mu.stieltjes(z)?;
    Ok(-m.inv() + t * m)
}

/// First or second derivative of [`f_transform`] in `z`.
pub fn f_transform_derivative(mu: &Measure, t: f64, z: Complex64, k: usize) -> Result<Complex64> {
    if !(1..=2).contains(&k) {
        return Err(Error::OutOfRange(format!("F derivative order {k} not in 1..=2")));
    }
    Ok(f_jet(mu, t, z, k)?[k])
}

/// `[F, F', F'']` up to `order`.
pub(crate) fn f_jet(mu: &Measure, t: f64, z: Complex64, order: usize) -> Result<[Complex64; 3]> {
    let j = mu.stieltjes_jet(z, order)?;
    let (m, m1, m2) = (j[0], j[1], j[2]);
    let inv = m.inv();
    let mut out = [-inv + t * m, Complex64::default(), Complex64::default()];
    if order >= 1 {
        out[1] = m1 * inv * inv + t * m1;
    }
    if order >= 2 {
        out[2] = m2 * inv * inv - 2.0 * m1 * m1 * inv * inv * inv + t * m2;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct SubordinationQuery<'a> {
    pub mu1: &'a Measure,
    pub mu2: &'a Measure,
    /// Variance of the semicircle component.
    pub t: f64,
    pub z: Complex64,
}

impl<'a> SubordinationQuery<'a> {
    pub fn new(mu1: &'a Measure, mu2: &'a Measure, t: f64, z: Complex64) -> Self {
        Self { mu1, mu2, t, z }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidInput(format!("time must be >= 0, got {}", self.t)));
        }
        if !(self.z.re.is_finite() && self.z.im.is_finite()) || self.z.im < 0.0 {
            return Err(Error::InvalidInput(format!(
                "spectral point must lie in the closed upper half-plane, got {}",
                self.z
            )));
        }
        Ok(())
    }

    fn swapped(&self) -> Self {
        Self {
            mu1: self.mu2,
            mu2: self.mu1,
            ..*self
        }
    }

    /// `(Φ₁, Φ₂)` at `(ω₁, ω₂)`.
    pub fn residuals(&self, w1: Complex64, w2: Complex64) -> Result<(Complex64, Complex64)> {
        let f1 = f_transform(self.mu1, self.t, w1)?;
        let f2 = f_transform(self.mu2, self.t, w2)?;
        let common = w1 + w2 - self.z;
        Ok((f1 - common, f2 - common))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinationSolution {
    pub omega1: Complex64,
    pub omega2: Complex64,
    /// `m_{μ_t}(z)`.
    pub m: Complex64,
    /// `F_{μ_t,t}(z)`.
    pub f_value: Complex64,
    /// `max(|Φ₁|, |Φ₂|)` at the returned point.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Averaging weight used once the plain iteration stalls.
    pub damping: f64,
    pub stall_window: usize,
    pub stall_ratio: f64,
    /// Finish with Newton steps once the fixed-point residual is small.
    pub newton: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            damping: 0.5,
            stall_window: 50,
            stall_ratio: 0.999,
            newton: true,
        }
    }
}

/// Offset used to seed real-axis solves from the upper half-plane.
const REAL_SEED_OFFSET: f64 = 1e-6;

/// Solves the subordination system at `query.z` from the default start
/// `ω₂ = z + i·max(1, |z|)`.
///
/// For real `z` the solution is only defined beyond the upper edge; it is
/// obtained by solving at `z + 1e-6 i` and polishing on the real line, and
/// [`Error::NotBeyondEdge`] is returned if no stable real solution exists.
pub fn solve(query: &SubordinationQuery, opts: &SolverOptions) -> Result<SubordinationSolution> {
    let z = query.z;
    solve_from(query, opts, z + Complex64::new(0.0, z.norm().max(1.0)))
}

/// As [`solve`], starting the iteration from `omega2_init`.
pub fn solve_from(
    query: &SubordinationQuery,
    opts: &SolverOptions,
    omega2_init: Complex64,
) -> Result<SubordinationSolution> {
    query.validate()?;
    if opts.tol < 1e-14 || opts.max_iter == 0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be >= 1e-14 and max_iter positive, got {} / {}",
            opts.tol, opts.max_iter
        )));
    }
    if query.z.im > 0.0 {
        iterate(query, opts, omega2_init)
    } else {
        solve_real(query, opts, omega2_init)
    }
}

fn finish(
    query: &SubordinationQuery,
    w1: Complex64,
    w2: Complex64,
    iterations: usize,
    tol: f64,
) -> Result<SubordinationSolution> {
    let (p1, p2) = query.residuals(w1, w2)?;
    let residual = p1.norm().max(p2.norm());
    let m = query.mu1.stieltjes(w1)?;
    let f_value = -m.inv() + query.t * m;
    Ok(SubordinationSolution {
        omega1: w1,
        omega2: w2,
        m,
        f_value,
        residual,
        iterations,
        converged: residual <= tol,
    })
}

fn h(mu: &Measure, t: f64, w: Complex64) -> Result<Complex64> {
    Ok(f_transform(mu, t, w)? - w)
}

fn iterate(
    query: &SubordinationQuery,
    opts: &SolverOptions,
    omega2_init: Complex64,
) -> Result<SubordinationSolution> {
    let z = query.z;
    let t = query.t;
    let mut w2 = omega2_init;
    let mut damped = false;
    let mut history: Vec<f64> = Vec::with_capacity(opts.max_iter.min(4096));
    // Newton is retried each time the residual has shrunk by this factor.
    let mut newton_gate = 1e-3;
    let mut last = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let w1 = z + h(query.mu2, t, w2)?;
        let w2_next = z + h(query.mu1, t, w1)?;
        let res = (w2_next - w2).norm();
        last = res;
        if !res.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it,
                residual: res,
            });
        }
        if res <= opts.tol {
            return check_half_plane(query, finish(query, w1, w2, it, opts.tol)?);
        }
        if opts.newton && res < newton_gate {
            newton_gate = res * 1e-2;
            if let Some((n1, n2, steps)) = newton(query, w1, w2, opts.tol, 30) {
                if n1.im >= z.im - 1e-10 && n2.im >= z.im - 1e-10 {
                    return check_half_plane(query, finish(query, n1, n2, it + steps, opts.tol)?);
                }
            }
        }
        history.push(res);
        let k = history.len();
        if !damped && k > opts.stall_window && res / history[k - 1 - opts.stall_window] > opts.stall_ratio {
            damped = true;
        }
        w2 = if damped {
            w2 * (1.0 - opts.damping) + w2_next * opts.damping
        } else {
            w2_next
        };
        if w2.im < -1e-8 {
            return Err(Error::LeftHalfPlane { im: w2.im });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: last,
    })
}

fn check_half_plane(query: &SubordinationQuery, sol: SubordinationSolution) -> Result<SubordinationSolution> {
    let floor = query.z.im - 1e-10;
    if sol.omega1.im < floor || sol.omega2.im < floor {
        return Err(Error::LeftHalfPlane {
            im: sol.omega1.im.min(sol.omega2.im),
        });
    }
    Ok(sol)
}

/// Damped Newton on `Φ = 0` from `(w1, w2)`. Returns the refined point and
/// the number of steps once `max |Φ_j| ≤ tol`, or `None` if the residual
/// stops decreasing.
pub(crate) fn newton(
    query: &SubordinationQuery,
    mut w1: Complex64,
    mut w2: Complex64,
    tol: f64,
    max_steps: usize,
) -> Option<(Complex64, Complex64, usize)> {
    let t = query.t;
    let mut phi = query.residuals(w1, w2).ok()?;
    let mut res = phi.0.norm().max(phi.1.norm());
    for step in 1..=max_steps {
        if res <= tol {
            return Some((w1, w2, step - 1));
        }
        let d1f = f_jet(query.mu1, t, w1, 1).ok()?[1];
        let d2f = f_jet(query.mu2, t, w2, 1).ok()?[1];
        let (a, b) = (d1f - 1.0, d2f - 1.0);
        let det = a * b - 1.0;
        if det.norm() == 0.0 {
            return None;
        }
        let dx1 = (-phi.0 * b - phi.1) / det;
        let dx2 = (-a * phi.1 - phi.0) / det;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (c1, c2) = (w1 + dx1 * lambda, w2 + dx2 * lambda);
            if let Ok(p) = query.residuals(c1, c2) {
                let r = p.0.norm().max(p.1.norm());
                if r < res {
                    w1 = c1;
                    w2 = c2;
                    phi = p;
                    res = r;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return if res <= tol { Some((w1, w2, step)) } else { None };
        }
    }
    (res <= tol).then_some((w1, w2, max_steps))
}

fn solve_real(
    query: &SubordinationQuery,
    opts: &SolverOptions,
    omega2_init: Complex64,
) -> Result<SubordinationSolution> {
    let e = query.z.re;
    let lifted = SubordinationQuery {
        z: Complex64::new(e, REAL_SEED_OFFSET),
        ..*query
    };
    let seed_opts = SolverOptions {
        tol: opts.tol.max(1e-10),
        ..*opts
    };
    let init = Complex64::new(omega2_init.re, omega2_init.im.max(REAL_SEED_OFFSET));
    let seed = iterate(&lifted, &seed_opts, init)?;
    let (r1, r2) = (seed.omega1.re, seed.omega2.re);
    let (up1, up2) = (query.mu1.support().upper, query.mu2.support().upper);
    if !(r1 > up1 && r2 > up2) {
        return Err(Error::NotBeyondEdge(e));
    }
    let real = |x: f64| Complex64::new(x, 0.0);
    let (w1, w2, steps) =
        newton_real(query, r1, r2, up1, up2, opts.tol).ok_or(Error::NotBeyondEdge(e))?;
    let sol = finish(query, real(w1), real(w2), seed.iterations + steps, opts.tol)?;
    // The physical branch beyond the edge is the stable one: S < 0.
    let a = f_jet(query.mu1, query.t, sol.omega1, 1)?[1].re - 1.0;
    let b = f_jet(query.mu2, query.t, sol.omega2, 1)?[1].re - 1.0;
    if a * b - 1.0 >= 0.0 || !sol.converged {
        return Err(Error::NotBeyondEdge(e));
    }
    Ok(sol)
}

fn newton_real(
    query: &SubordinationQuery,
    mut w1: f64,
    mut w2: f64,
    up1: f64,
    up2: f64,
    tol: f64,
) -> Option<(f64, f64, usize)> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let eval = |w1: f64, w2: f64| -> Option<(f64, f64)> {
        if !(w1 > up1 && w2 > up2) {
            return None;
        }
        let (p1, p2) = query.residuals(c(w1), c(w2)).ok()?;
        Some((p1.re, p2.re))
    };
    let (mut p1, mut p2) = eval(w1, w2)?;
    let mut res = p1.abs().max(p2.abs());
    for step in 0..100 {
        if res <= tol {
            return Some((w1, w2, step));
        }
        let a = f_jet(query.mu1, query.t, c(w1), 1).ok()?[1].re - 1.0;
        let b = f_jet(query.mu2, query.t, c(w2), 1).ok()?[1].re - 1.0;
        let det = a * b - 1.0;
        if det == 0.0 {
            return None;
        }
        let d1 = (-p1 * b - p2) / det;
        let d2 = (-a * p2 - p1) / det;
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let (c1, c2) = (w1 + lambda * d1, w2 + lambda * d2);
            if let Some((q1, q2)) = eval(c1, c2) {
                let r = q1.abs().max(q2.abs());
                if r < res {
                    w1 = c1;
                    w2 = c2;
                    p1 = q1;
                    p2 = q2;
                    res = r;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (res <= tol).then_some((w1, w2, 100))
}

/// Solves at a real energy `e` on the boundary of the upper half-plane,
/// starting Newton from `(w1, w2)`. Inside the bulk the boundary values are
/// genuinely complex; beyond the support they are real.
pub(crate) fn solve_boundary(
    mu1: &Measure,
    mu2: &Measure,
    t: f64,
    e: f64,
    w1: Complex64,
    w2: Complex64,
    tol: f64,
) -> Option<SubordinationSolution> {
    let q = SubordinationQuery::new(mu1, mu2, t, Complex64::new(e, 0.0));
    let (n1, n2, steps) = newton(&q, w1, w2, tol, 60)?;
    if n1.im < -1e-12 || n2.im < -1e-12 {
        return None;
    }
    finish(&q, n1, n2, steps, tol).ok()
}

/// Boundary value `lim_{η↓0}` of the solution at real `e`.
///
/// A `warm` start, typically the boundary value at a nearby energy, is
/// polished by Newton directly on the real axis. Without one, or if that
/// fails, the solution is continued from `e + i` down to `e + 1e-12 i` in
/// decades of `η` and then polished. Real solutions are accepted only on the
/// stable branch, `S < 0`.
pub fn boundary_value(
    mu1: &Measure,
    mu2: &Measure,
    t: f64,
    e: f64,
    warm: Option<(Complex64, Complex64)>,
) -> Result<SubordinationSolution> {
    const TOL: f64 = 1e-12;
    let accept = |sol: SubordinationSolution| -> bool {
        if sol.omega1.im < -1e-12 || sol.omega2.im < -1e-12 || !sol.converged {
            return false;
        }
        if sol.omega1.im.abs() < 1e-14 && sol.omega2.im.abs() < 1e-14 {
            let a = f_jet(mu1, t, sol.omega1, 1).map(|j| j[1].re - 1.0);
            let b = f_jet(mu2, t, sol.omega2, 1).map(|j| j[1].re - 1.0);
            return matches!((a, b), (Ok(a), Ok(b)) if a * b - 1.0 < 0.0);
        }
        true
    };
    if let Some((w1, w2)) = warm {
        if let Some(sol) = solve_boundary(mu1, mu2, t, e, w1, w2, TOL) {
            if accept(sol) {
                return Ok(sol);
            }
        }
    }
    let opts = SolverOptions::default();
    let mut w2 = Complex64::new(e, 1.0 + e.abs());
    let mut last = None;
    for k in 0..=12 {
        let eta = 10f64.powi(-k);
        let q = SubordinationQuery::new(mu1, mu2, t, Complex64::new(e, eta));
        let sol = solve_from(&q, &opts, w2)?;
        w2 = sol.omega2;
        last = Some(sol);
    }
    let seed = last.expect("at least one continuation step");
    // Beyond the edge the limit is real; a complex seed would leave an
    // imaginary residue of the order of the tolerance.
    if seed.omega1.im.abs().max(seed.omega2.im.abs()) < 1e-6 {
        let real = |w: Complex64| Complex64::new(w.re, 0.0);
        if let Some(sol) = solve_boundary(mu1, mu2, t, e, real(seed.omega1), real(seed.omega2), TOL) {
            if sol.omega1.im == 0.0 && sol.omega2.im == 0.0 && accept(sol) {
                return Ok(sol);
            }
        }
    }
    match solve_boundary(mu1, mu2, t, e, seed.omega1, seed.omega2, TOL) {
        Some(sol) if accept(sol) => Ok(sol),
        _ => Err(Error::NonConvergence {
            iterations: seed.iterations,
            residual: seed.residual,
        }),
    }
}

/// One point of a density sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub e: f64,
    pub rho: f64,
    /// Largest solver residual over the `η` sequence.
    pub residual: f64,
    /// Total iterations over the `η` sequence.
    pub iterations: usize,
    pub converged: bool,
}

/// Points per warm-started chunk in [`density`]. Chunk boundaries are fixed
/// by index so results do not depend on the number of worker threads.
const SWEEP_CHUNK: usize = 64;

/// Density of `μ₁ ⊞ μ₂ ⊞ σ_t` on `grid` by Stieltjes inversion: evaluates
/// `π⁻¹ Im m(E + iη)` for every `η` in `eta_seq` and extrapolates linearly to
/// `η = 0` (least squares), clipping negative values to zero. Points whose
/// solve fails are returned with `converged = false` and `rho = NaN`.
pub fn density(
    mu1: &Measure,
    mu2: &Measure,
    t: f64,
    grid: &[f64],
    eta_seq: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<DensityPoint>> {
    if eta_seq.len() < 2 || eta_seq.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput(
            "eta sequence needs at least two positive entries".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("density grid must be sorted".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    let chunks: Vec<Vec<DensityPoint>> = grid
        .par_chunks(SWEEP_CHUNK)
        .map(|chunk| density_chunk(mu1, mu2, t, chunk, eta_seq, opts))
        .collect();
    Ok(chunks.into_iter().flatten().collect())
}

fn density_chunk(
    mu1: &Measure,
    mu2: &Measure,
    t: f64,
    chunk: &[f64],
    eta_seq: &[f64],
    opts: &SolverOptions,
) -> Vec<DensityPoint> {
    let mut warm: Vec<Option<Complex64>> = vec![None; eta_seq.len()];
    let mut out = Vec::with_capacity(chunk.len());
    for &e in chunk {
        let mut samples = Vec::with_capacity(eta_seq.len());
        let mut residual: f64 = 0.0;
        let mut iterations = 0;
        let mut ok = true;
        for (k, &eta) in eta_seq.iter().enumerate() {
            let z = Complex64::new(e, eta);
            let q = SubordinationQuery::new(mu1, mu2, t, z);
            let res = match warm[k] {
                Some(w) => solve_from(&q, opts, w).or_else(|_| solve(&q, opts)),
                None => solve(&q, opts),
            };
            match res {
                Ok(sol) => {
                    warm[k] = Some(sol.omega2);
                    residual = residual.max(sol.residual);
                    iterations += sol.iterations;
                    samples.push((eta, sol.m.im / std::f64::consts::PI));
                }
                Err(_) => {
                    warm[k] = None;
                    ok = false;
                }
            }
        }
        let rho = if ok { extrapolate_to_zero(&samples).max(0.0) } else { f64::NAN };
        out.push(DensityPoint {
            e,
            rho,
            residual,
            iterations,
            converged: ok,
        });
    }
    out
}

/// Intercept of the least-squares line through `(η, ρ_η)`.
fn extrapolate_to_zero(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    if sxx == 0.0 {
        return my;
    }
    my - (sxy / sxx) * mx
}

/// Swapping the roles of the two measures swaps the subordination functions.
pub fn solve_swapped(query: &SubordinationQuery, opts: &SolverOptions) -> Result<SubordinationSolution> {
    solve(&query.swapped(), opts)
}
