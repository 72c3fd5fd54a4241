//! Upper spectral edge of `μ₁ ⊞ μ₂ ⊞ σ_t`, the square-root scale `γ`, and
//! classical eigenvalue locations.
//!
//! Beyond the edge the subordination functions are real and increasing.
//! We walk that real branch parametrized by `ω₁`: for `ω₁` above the support
//! of `μ₁`, `ω₂` is the unique point above the support of `μ₂` with
//! `F₂(ω₂) = F₁(ω₁)`, and the energy is `E(ω₁) = ω₁ + ω₂ - F₁(ω₁)`. Along
//! the branch `dE/dω₁ = -S / F₂'(ω₂)` with
//! `S = (F₁'(ω₁) - 1)(F₂'(ω₂) - 1) - 1`, so the edge is the largest root of
//! `S`. When the branch runs into the support boundary first (for example
//! a point-mass partner at `t = 0`) the edge is the branch endpoint.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Measure;
use crate::subordination::{boundary_value, f_jet, solve, SolverOptions, SubordinationQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeMethod {
    /// Largest root of the stability function on the real branch.
    StabilityRoot,
    /// Endpoint of the real branch (no root of `S` above the support).
    SupportBoundary,
    /// `∫ (x - ξ)^{-2} dμ₀ = 1/t` for a precomputed `μ₀`.
    XiEquation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub e_plus: f64,
    pub xi: Option<f64>,
    pub gamma: f64,
    pub omega1_edge: f64,
    pub omega2_edge: f64,
    pub scaled_edge: f64,
    pub method: EdgeMethod,
    /// `|S|` at the returned edge.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityDiagnostics {
    pub s_value: Complex64,
    pub t_alpha: Complex64,
    pub t_beta: Complex64,
    pub kappa: f64,
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `(F, F', F'')` at a real point above the support.
fn f_real(mu: &Measure, t: f64, x: f64, order: usize) -> Result<[f64; 3]> {
    let j = f_jet(mu, t, real(x), order)?;
    Ok([j[0].re, j[1].re, j[2].re])
}

/// Point on the real branch above both supports.
#[derive(Debug, Clone, Copy)]
struct BranchPoint {
    w1: f64,
    w2: f64,
    e: f64,
    s: f64,
}

struct Branch<'a> {
    mu1: &'a Measure,
    mu2: &'a Measure,
    t: f64,
    up1: f64,
    up2: f64,
}

impl<'a> Branch<'a> {
    fn new(mu1: &'a Measure, mu2: &'a Measure, t: f64) -> Self {
        Self {
            mu1,
            mu2,
            t,
            up1: mu1.support().upper,
            up2: mu2.support().upper,
        }
    }

    /// `ω₂ > sup supp μ₂` with `F₂(ω₂) = y`, or `None` if `y` is below the
    /// range of `F₂` there.
    fn invert_f2(&self, y: f64) -> Option<f64> {
        invert_increasing(|x| f_real(self.mu2, self.t, x, 1).ok().map(|f| (f[0], f[1])), self.up2, y)
    }

    fn point(&self, w1: f64) -> Option<BranchPoint> {
        let f1 = f_real(self.mu1, self.t, w1, 1).ok()?;
        let w2 = self.invert_f2(f1[0])?;
        let f2 = f_real(self.mu2, self.t, w2, 1).ok()?;
        let s = (f1[1] - 1.0) * (f2[1] - 1.0) - 1.0;
        Some(BranchPoint {
            w1,
            w2,
            e: w1 + w2 - f1[0],
            s,
        })
    }

    /// Second derivative of `E` along the branch at a root of `S`.
    fn curvature(&self, p: &BranchPoint) -> Result<f64> {
        let f1 = f_real(self.mu1, self.t, p.w1, 2)?;
        let f2 = f_real(self.mu2, self.t, p.w2, 2)?;
        let (a, b) = (f1[1] - 1.0, f2[1] - 1.0);
        let dw2 = f1[1] / f2[1];
        let ds = f1[2] * b + a * f2[2] * dw2;
        Ok(-ds / f2[1])
    }
}

/// Solves `f(x) = y` for `x > lower` with `f` increasing, by safeguarded
/// Newton. `f` returns `(value, derivative)` or `None` where undefined.
fn invert_increasing(f: impl Fn(f64) -> Option<(f64, f64)>, lower: f64, y: f64) -> Option<f64> {
    let scale = 1.0 + lower.abs();
    let mut lo = lower;
    let mut step = scale;
    let mut hi = lower + step;
    loop {
        let (v, _) = f(hi)?;
        if v >= y {
            break;
        }
        lo = hi;
        step *= 2.0;
        hi = lower + step;
        if step > 1e12 {
            return None;
        }
    }
    // lo may equal `lower`, where f is undefined; check the range there.
    let probe = lower + 1e-15 * scale;
    if lo == lower {
        if let Some((v, _)) = f(probe) {
            if v > y {
                return None;
            }
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = f(x)?;
        if v < y {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) || v == y {
            return Some(x);
        }
        let newton = x - (v - y) / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (newton - x).abs() == 0.0 && ((v - y) / d).abs() <= 1e-15 * x.abs().max(1.0) {
            return Some(x);
        }
    }
    Some(0.5 * (lo + hi))
}

/// Locates `E_+` and fills `γ`.
///
/// `γ` comes from the closed form in `ξ` when `t > 0` and one of the
/// measures is a point mass, and from a square-root fit of the density
/// otherwise.
pub fn find_edge_stability(mu1: &Measure, mu2: &Measure, t: f64, tol: f64) -> Result<EdgeReport> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    if !(tol >= 1e-12) {
        return Err(Error::InvalidInput(format!("edge tolerance {tol} below 1e-12")));
    }
    let (edge, branch_pt, method) = locate_edge(mu1, mu2, t)?;
    let partner_shift = mu2
        .as_point_mass()
        .map(|c| (mu1, c))
        .or_else(|| mu1.as_point_mass().map(|c| (mu2, c)));
    let (gamma, xi) = match partner_shift {
        Some((other, c)) if t > 0.0 => {
            let mu0 = other.translated(c);
            let r = edge_from_xi(&mu0, t, tol.min(1e-13))?;
            (r.gamma, r.xi)
        }
        _ => (gamma_from_density_fit(mu1, mu2, t, edge)?, None),
    };
    Ok(EdgeReport {
        e_plus: edge,
        xi,
        gamma,
        omega1_edge: branch_pt.w1,
        omega2_edge: branch_pt.w2,
        scaled_edge: gamma * edge,
        method,
        residual: branch_pt.s.abs(),
    })
}

/// Edge location only; `gamma` and `scaled_edge` are NaN.
pub fn locate_edge_report(mu1: &Measure, mu2: &Measure, t: f64) -> Result<EdgeReport> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    let (edge, p, method) = locate_edge(mu1, mu2, t)?;
    Ok(EdgeReport {
        e_plus: edge,
        xi: None,
        gamma: f64::NAN,
        omega1_edge: p.w1,
        omega2_edge: p.w2,
        scaled_edge: f64::NAN,
        method,
        residual: p.s.abs(),
    })
}

fn locate_edge(mu1: &Measure, mu2: &Measure, t: f64) -> Result<(f64, BranchPoint, EdgeMethod)> {
    let br = Branch::new(mu1, mu2, t);
    let lower = branch_start(&br);
    let s1 = mu1.support();
    let s2 = mu2.support();
    let scale = 1.0 + s1.width() + s2.width() + t.sqrt() + s1.upper.abs() + s2.upper.abs();
    // S → -1 as ω₁ → ∞; find a point where it is clearly negative.
    let mut u = 10.0 * scale;
    let mut top = br.point(lower + u);
    while !matches!(top, Some(p) if p.s < 0.0) {
        u *= 2.0;
        if u > 1e9 * scale {
            return Err(Error::BracketNotFound(
                "stability function never negative on the real branch".into(),
            ));
        }
        top = br.point(lower + u);
    }
    let mut hi = top.expect("checked above");
    let floor = 1e-14 * scale;
    let mut bracket = None;
    while u > floor {
        u *= 0.8;
        match br.point(lower + u) {
            Some(p) if p.s >= 0.0 => {
                bracket = Some((p, hi));
                break;
            }
            Some(p) => hi = p,
            None => break,
        }
    }
    let Some((mut lo, mut hi)) = bracket else {
        // No root: the branch ends on the support boundary.
        return Ok((hi.e, hi, EdgeMethod::SupportBoundary));
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo.w1 + hi.w1);
        if mid <= lo.w1 || mid >= hi.w1 {
            break;
        }
        let p = br
            .point(mid)
            .ok_or_else(|| Error::BracketNotFound(format!("branch undefined at omega1 = {mid}")))?;
        if p.s >= 0.0 {
            lo = p;
        } else {
            hi = p;
        }
    }
    let best = if lo.s.abs() < hi.s.abs() { lo } else { hi };
    Ok((best.e, best, EdgeMethod::StabilityRoot))
}

/// Smallest `ω₁` on the real branch: above the support of `μ₁`, and high
/// enough that `F₁(ω₁)` lies in the range of `F₂` above the support of `μ₂`.
fn branch_start(br: &Branch) -> f64 {
    let scale2 = 1.0 + br.up2.abs();
    let floor2 = match f_real(br.mu2, br.t, br.up2 + 1e-14 * scale2, 0) {
        Ok(f) => f[0],
        Err(_) => f64::NEG_INFINITY,
    };
    let f1 = |x: f64| f_real(br.mu1, br.t, x, 1).ok().map(|f| (f[0], f[1]));
    invert_increasing(f1, br.up1, floor2).unwrap_or(br.up1)
}

/// Rightmost `ξ` above the support of `μ₀` with `m₀'(ξ) = 1/t`.
pub fn solve_xi(mu0: &Measure, t: f64, tol: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("xi equation needs t > 0, got {t}")));
    }
    let target = 1.0 / t;
    let upper = mu0.support().upper;
    let dm = |x: f64| -> f64 {
        mu0.stieltjes_derivative(real(x), 1)
            .map(|v| v.re)
            .unwrap_or(f64::INFINITY)
    };
    let mut width = 1.0;
    while dm(upper + width) > target {
        width *= 2.0;
        if width > 1e6 {
            return Err(Error::BracketNotFound(format!("no xi root below {}", upper + width)));
        }
    }
    let (mut lo, mut hi) = (upper, upper + width);
    if dm(upper + 1e-15 * (1.0 + upper.abs())) < target {
        return Err(Error::BracketNotFound(format!(
            "m0' stays below 1/t = {target} above the support"
        )));
    }
    while hi - lo > tol.max(4.0 * f64::EPSILON * hi.abs().max(1.0)) {
        let mid = 0.5 * (lo + hi);
        if dm(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Edge of `μ₀ ⊞ σ_t` from `ξ`: `E_+ = ξ - t m₀(ξ)` and
/// `γ = (-t³ m₀''(ξ)/2)^{-1/3}`.
pub fn edge_from_xi(mu0: &Measure, t: f64, tol: f64) -> Result<EdgeReport> {
    let xi = solve_xi(mu0, t, tol)?;
    let j = mu0.stieltjes_jet(real(xi), 2)?;
    let (m, m2) = (j[0].re, j[2].re);
    let e_plus = xi - t * m;
    let gamma = (-t.powi(3) * m2 / 2.0).powf(-1.0 / 3.0);
    let residual = (j[1].re - 1.0 / t).abs() * t;
    Ok(EdgeReport {
        e_plus,
        xi: Some(xi),
        gamma,
        omega1_edge: xi,
        omega2_edge: -1.0 / m,
        scaled_edge: gamma * e_plus,
        method: EdgeMethod::XiEquation,
        residual,
    })
}

/// Distances below the edge used by [`gamma_from_density_fit`].
pub const FIT_OFFSETS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// `γ = (π c)^{2/3}` where `ρ(E_+ - κ) ≈ c √κ` is fitted by least squares
/// through the origin at `κ ∈ {1e-2, 5e-3, 2.5e-3}`.
pub fn gamma_from_density_fit(mu1: &Measure, mu2: &Measure, t: f64, e_plus: f64) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut ratios = Vec::with_capacity(FIT_OFFSETS.len());
    for &k in &FIT_OFFSETS {
        let rho = boundary_value(mu1, mu2, t, e_plus - k, None)?.m.im / std::f64::consts::PI;
        num += rho * k.sqrt();
        den += k;
        ratios.push(rho / k.sqrt());
    }
    let c = num / den;
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = if mean > 0.0 { (max - min) / mean } else { f64::INFINITY };
    if !(spread <= 0.2) || !(c > 0.0) {
        return Err(Error::FitUnstable { spread });
    }
    Ok((std::f64::consts::PI * c).powf(2.0 / 3.0))
}

/// `S`, `T_α`, `T_β` at `z`. At `z = E_+` the edge values of `ω` are used,
/// since the solver is singular there.
pub fn stability_diagnostics(
    mu1: &Measure,
    mu2: &Measure,
    t: f64,
    z: Complex64,
    edge: &EdgeReport,
) -> Result<StabilityDiagnostics> {
    let (w1, w2) = if z.im == 0.0 && z.re == edge.e_plus {
        (real(edge.omega1_edge), real(edge.omega2_edge))
    } else {
        let q = SubordinationQuery::new(mu1, mu2, t, z);
        let sol = solve(&q, &SolverOptions::default())?;
        (sol.omega1, sol.omega2)
    };
    let f1 = f_jet(mu1, t, w1, 2)?;
    let f2 = f_jet(mu2, t, w2, 2)?;
    let (a, b) = (f1[1] - 1.0, f2[1] - 1.0);
    Ok(StabilityDiagnostics {
        s_value: a * b - 1.0,
        t_alpha: 0.5 * (f1[2] * b * b + f2[2] * a),
        t_beta: 0.5 * (f2[2] * a * a + f1[2] * b),
        kappa: (z.re - edge.e_plus).abs(),
    })
}

/// Curvature `E''` of the real branch at the edge, and `dω₂/dω₁` there.
/// Only meaningful for [`EdgeMethod::StabilityRoot`] edges.
pub fn edge_curvature(mu1: &Measure, mu2: &Measure, t: f64, edge: &EdgeReport) -> Result<f64> {
    let br = Branch::new(mu1, mu2, t);
    let p = BranchPoint {
        w1: edge.omega1_edge,
        w2: edge.omega2_edge,
        e: edge.e_plus,
        s: 0.0,
    };
    br.curvature(&p)
}

/// Lower end of the support of `μ₁ ⊞ μ₂ ⊞ σ_t`, bounded from below.
pub fn support_lower_bound(mu1: &Measure, mu2: &Measure, t: f64) -> f64 {
    mu1.support().lower + mu2.support().lower - 2.0 * t.sqrt()
}

/// Step in `u = √(E_+ - E)` used by [`classical_locations`].
const TAIL_STEP: f64 = 1e-3;

/// Classical locations `γ_1 ≥ … ≥ γ_{top_k}` of `μ₁ ⊞ μ₂ ⊞ σ_t` for `n`
/// eigenvalues: `γ_j` carries tail mass `μ_t([γ_j, ∞)) = (j - 1/2)/n`.
///
/// The tail mass is integrated in `u = √(E_+ - E)`, where the integrand
/// `2u ρ(E_+ - u²)` is smooth at the edge.
pub fn classical_locations(
    mu1: &Measure,
    mu2: &Measure,
    t: f64,
    n: usize,
    top_k: usize,
) -> Result<Vec<f64>> {
    if n == 0 || top_k == 0 || top_k > n {
        return Err(Error::InvalidInput(format!("need 1 <= top_k <= n, got {top_k}, {n}")));
    }
    let edge = find_edge_stability(mu1, mu2, t, 1e-10).or_else(|e| match e {
        // The location does not depend on γ.
        Error::FitUnstable { .. } => locate_edge(mu1, mu2, t).map(|(e_plus, p, method)| EdgeReport {
            e_plus,
            xi: None,
            gamma: f64::NAN,
            omega1_edge: p.w1,
            omega2_edge: p.w2,
            scaled_edge: f64::NAN,
            method,
            residual: p.s.abs(),
        }),
        other => Err(other),
    })?;
    let e_plus = edge.e_plus;
    let bottom = support_lower_bound(mu1, mu2, t);
    let u_max = (e_plus - bottom).max(0.0).sqrt();
    let targets: Vec<f64> = (1..=top_k).map(|j| (j as f64 - 0.5) / n as f64).collect();
    let last_target = *targets.last().expect("top_k >= 1");

    let mut us = vec![0.0];
    let mut cum = vec![0.0];
    let mut prev_g = 0.0;
    let mut warm: Option<(Complex64, Complex64)> = None;
    let mut u = 0.0;
    while cum.last().copied().unwrap_or(0.0) < last_target && u < u_max {
        let next = (u + TAIL_STEP).min(u_max);
        let e = e_plus - next * next;
        let g = match boundary_value(mu1, mu2, t, e, warm) {
            Ok(sol) => {
                warm = Some((sol.omega1, sol.omega2));
                2.0 * next * (sol.m.im / std::f64::consts::PI).max(0.0)
            }
            Err(_) if next == u_max => 0.0,
            Err(e) => return Err(e),
        };
        let c = cum.last().unwrap() + 0.5 * (next - u) * (prev_g + g);
        us.push(next);
        cum.push(c);
        prev_g = g;
        u = next;
    }
    Ok(targets
        .iter()
        .map(|&p| {
            let k = cum.partition_point(|&c| c < p);
            let uu = if k == 0 {
                0.0
            } else if k >= cum.len() {
                u_max
            } else {
                let (c0, c1) = (cum[k - 1], cum[k]);
                let f = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
                us[k - 1] + f * (us[k] - us[k - 1])
            };
            e_plus - uu * uu
        })
        .collect())
}

/// Density grid of `μ₁ ⊞ μ₂` on `points` nodes between the lower support
/// bound and `E_+`, as a [`Measure`]. Nodes are clustered at both ends.
pub fn convolution_grid_measure(mu1: &Measure, mu2: &Measure, points: usize) -> Result<Measure> {
    if points < 3 {
        return Err(Error::InvalidInput("grid needs at least 3 points".into()));
    }
    let (e_plus, _, _) = locate_edge(mu1, mu2, 0.0)?;
    let lo = support_lower_bound(mu1, mu2, 0.0);
    let mut nodes = Vec::with_capacity(points);
    let mut values = Vec::with_capacity(points);
    let mut warm = None;
    for k in (0..points).rev() {
        // x = lo + (E_+ - lo)(1 - cos(π k/(n-1)))/2 clusters at both ends.
        let th = std::f64::consts::PI * k as f64 / (points - 1) as f64;
        let x = lo + (e_plus - lo) * 0.5 * (1.0 - th.cos());
        let rho = if k == points - 1 || k == 0 {
            0.0
        } else {
            match boundary_value(mu1, mu2, 0.0, x, warm) {
                Ok(sol) => {
                    warm = Some((sol.omega1, sol.omega2));
                    (sol.m.im / std::f64::consts::PI).max(0.0)
                }
                Err(_) => {
                    warm = None;
                    0.0
                }
            }
        };
        nodes.push(x);
        values.push(rho);
    }
    nodes.reverse();
    values.reverse();
    Measure::grid(&nodes, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn sc1() -> Measure {
        Measure::semicircle(1.0, 0.0).unwrap()
    }

    #[test]
    fn semicircle_pair_edge() {
        let sc = sc1();
        let r = find_edge_stability(&sc, &sc, 0.0, 1e-10).unwrap();
        assert!((r.e_plus - 2.0 * SQRT2).abs() < 1e-8, "{r:?}");
        assert!((r.omega1_edge - 1.5 * SQRT2).abs() < 1e-6);
        assert!(r.residual < 1e-9);
        assert!((r.gamma - 1.0 / SQRT2).abs() < 1e-3);
        assert_eq!(r.method, EdgeMethod::StabilityRoot);
    }

    #[test]
    fn point_mass_partner_at_time_zero() {
        let sc = sc1();
        let d = Measure::point_mass(0.0).unwrap();
        let r = find_edge_stability(&sc, &d, 0.0, 1e-10).unwrap();
        assert!((r.e_plus - 2.0).abs() < 1e-8, "{r:?}");
        assert!((r.gamma - 1.0).abs() < 1e-3);
        let shifted = find_edge_stability(&Measure::point_mass(0.5).unwrap(), &sc, 0.0, 1e-10).unwrap();
        assert!((shifted.e_plus - 2.5).abs() < 1e-8);
    }

    #[test]
    fn xi_closed_forms() {
        let sc = sc1();
        for t in [0.25, 1.0] {
            let r = edge_from_xi(&sc, t, 1e-13).unwrap();
            assert!((r.xi.unwrap() - (2.0 + t) / (1.0 + t).sqrt()).abs() < 1e-8);
            assert!((r.e_plus - 2.0 * (1.0 + t).sqrt()).abs() < 1e-8);
            assert!((r.gamma - 1.0 / (1.0 + t).sqrt()).abs() < 1e-8);
        }
        assert!(solve_xi(&sc, 0.0, 1e-10).is_err());
    }

    #[test]
    fn gue_control_pair() {
        let d = Measure::point_mass(0.0).unwrap();
        let r = find_edge_stability(&d, &d, 1.0, 1e-10).unwrap();
        assert!((r.e_plus - 2.0).abs() < 1e-8, "{r:?}");
        assert!((r.gamma - 1.0).abs() < 1e-8);
    }

    #[test]
    fn time_route_matches_xi_route() {
        let sc = sc1();
        let d = Measure::point_mass(0.0).unwrap();
        for t in [0.25, 1.0] {
            let a = find_edge_stability(&sc, &d, t, 1e-10).unwrap();
            let b = edge_from_xi(&sc, t, 1e-13).unwrap();
            assert!((a.e_plus - b.e_plus).abs() < 1e-6, "t={t}");
            assert!((a.omega1_edge - b.omega1_edge).abs() < 1e-5);
        }
    }

    #[test]
    fn diagnostics_at_edge() {
        let sc = sc1();
        let r = find_edge_stability(&sc, &sc, 0.0, 1e-10).unwrap();
        let d = stability_diagnostics(&sc, &sc, 0.0, Complex64::new(r.e_plus, 0.0), &r).unwrap();
        assert!(d.s_value.norm() < 1e-9);
        assert!((d.t_alpha - d.t_beta).norm() < 1e-10);
        assert_eq!(d.kappa, 0.0);
    }

    #[test]
    fn stability_scales_like_square_root() {
        // Closed form for sc(1) ⊞ sc(1): ω₁ = ω₂ = ω with E = ω - m(ω), and
        // S = m'(ω)² - 1. Expanding at the fold gives
        // S ≈ -F₂'·√(2 E'' κ) with F₂' = 2 and E'' = -m''(3/√2) = 4√2.
        let limit = 2.0 * (2.0 * 4.0 * SQRT2).sqrt();
        let sc = sc1();
        let r = find_edge_stability(&sc, &sc, 0.0, 1e-10).unwrap();
        let mut prev = 0.0;
        for k in [1e-2, 1e-3, 1e-4, 1e-6] {
            let d = stability_diagnostics(&sc, &sc, 0.0, Complex64::new(r.e_plus + k, 0.0), &r).unwrap();
            assert!(d.s_value.re < 0.0 && d.s_value.im.abs() < 1e-12);
            let ratio = d.s_value.norm() / k.sqrt();
            assert!(ratio > prev && ratio < limit, "kappa={k} ratio={ratio}");
            prev = ratio;
        }
        assert!((prev / limit - 1.0).abs() < 0.01, "{prev} vs {limit}");
        let curv = edge_curvature(&sc, &sc, 0.0, &r).unwrap();
        assert!((curv - 4.0 * SQRT2).abs() < 1e-5, "{curv}");
    }

    #[test]
    fn classical_locations_semicircle() {
        let sc = sc1();
        let n = 1000;
        let g = classical_locations(&sc, &sc, 0.0, n, 1).unwrap();
        // Oracle: tail mass of sc(2) by adaptive Simpson on the density.
        let e = 2.0 * SQRT2;
        let tail = |x: f64| {
            let steps = 20_000;
            let h = (e - x) / steps as f64;
            let rho = |y: f64| (8.0 - y * y).max(0.0).sqrt() / (4.0 * std::f64::consts::PI);
            let mut s = rho(x) + rho(e);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * rho(x + i as f64 * h);
            }
            s * h / 3.0
        };
        let mut lo = e - 1.0;
        let mut hi = e;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if tail(mid) > 0.5 / n as f64 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((g[0] - lo).abs() < 1e-4, "{} vs {lo}", g[0]);
    }
}
