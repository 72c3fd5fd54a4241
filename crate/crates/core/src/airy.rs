//! The Airy function `Ai` and its derivative on the real line.
//!
//! For `|x| ≥ 10` the classical asymptotic expansions are used. In between,
//! the Airy equation `y'' = x y` is integrated by high-order Taylor steps:
//! leftwards from the asymptotic values at `x = 10` on `[0, 10)` (the
//! direction in which `Ai` dominates), and outwards from the exact values at
//! the origin on `[-10, 0)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const AI0: f64 = 0.355_028_053_887_817_24;
const AIP0: f64 = -0.258_819_403_792_806_8;
const ASYMPTOTIC_FROM: f64 = 10.0;
const STEP: f64 = 0.5;
/// Beyond this `Ai` underflows to zero.
const UNDERFLOW_AT: f64 = 105.0;
const LOWER_LIMIT: f64 = -40.0;

/// `Ai(x)`.
pub fn airy_ai(x: f64) -> Result<f64> {
    Ok(airy_pair(x)?.0)
}

/// `Ai'(x)`.
pub fn airy_ai_prime(x: f64) -> Result<f64> {
    Ok(airy_pair(x)?.1)
}

/// `(Ai(x), Ai'(x))` for `x ≥ -40`.
pub fn airy_pair(x: f64) -> Result<(f64, f64)> {
    if x.is_nan() || x < LOWER_LIMIT {
        return Err(Error::OutOfRange(format!("Airy argument {x} below {LOWER_LIMIT}")));
    }
    if x >= UNDERFLOW_AT {
        return Ok((0.0, 0.0));
    }
    if x >= ASYMPTOTIC_FROM {
        return Ok(decaying_asymptotic(x));
    }
    if x <= -ASYMPTOTIC_FROM {
        return Ok(oscillating_asymptotic(-x));
    }
    if x > 0.0 {
        let (y, dy) = decaying_asymptotic(ASYMPTOTIC_FROM);
        Ok(taylor_march(ASYMPTOTIC_FROM, y, dy, x))
    } else {
        Ok(taylor_march(0.0, AI0, AIP0, x))
    }
}

/// Integrates `y'' = x y` from `(x0, y, y')` to `x1`.
fn taylor_march(mut x0: f64, mut y: f64, mut dy: f64, x1: f64) -> (f64, f64) {
    while (x1 - x0).abs() > 0.0 {
        let h = (x1 - x0).clamp(-STEP, STEP);
        (y, dy) = taylor_step(x0, y, dy, h);
        x0 = if (x1 - x0).abs() <= STEP { x1 } else { x0 + h };
    }
    (y, dy)
}

fn taylor_step(x0: f64, y: f64, dy: f64, h: f64) -> (f64, f64) {
    // a_{n+2} = (x0 a_n + a_{n-1}) / ((n+2)(n+1))
    let mut a = [0.0f64; 64];
    a[0] = y;
    a[1] = dy;
    a[2] = x0 * y / 2.0;
    let mut val = a[0] + a[1] * h + a[2] * h * h;
    let mut der = a[1] + 2.0 * a[2] * h;
    let mut hp = h * h;
    let scale = y.abs() + dy.abs();
    for n in 3..a.len() {
        a[n] = (x0 * a[n - 2] + a[n - 3]) / (n * (n - 1)) as f64;
        der += n as f64 * a[n] * hp;
        hp *= h;
        let term = a[n] * hp;
        val += term;
        if n > 8 && term.abs() <= 1e-18 * scale && (a[n - 1] * hp / h).abs() <= 1e-18 * scale {
            break;
        }
    }
    (val, der)
}

/// Coefficients `u_k` and `v_k` of the Airy asymptotic series.
fn series_coefficients(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; n];
    for k in 1..n {
        let kf = k as f64;
        u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        v[k] = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u[k];
    }
    (u, v)
}

/// Sums `Σ (-1)^k c_k / ζ^k` up to the smallest term.
fn alternating_sum(c: &[f64], zeta: f64, step: usize, offset: usize) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut sign = 1.0;
    let mut k = offset;
    while k < c.len() {
        let term = c[k] / zeta.powi(k as i32);
        if term.abs() > prev {
            break;
        }
        sum += sign * term;
        prev = term.abs();
        sign = -sign;
        k += step;
    }
    sum
}

const SERIES_TERMS: usize = 40;

fn decaying_asymptotic(x: f64) -> (f64, f64) {
    let (u, v) = series_coefficients(SERIES_TERMS);
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let pre = (-zeta).exp() / (2.0 * PI.sqrt());
    let q = x.powf(0.25);
    (
        pre / q * alternating_sum(&u, zeta, 1, 0),
        -pre * q * alternating_sum(&v, zeta, 1, 0),
    )
}

/// `(Ai(-z), Ai'(-z))` for large positive `z`.
fn oscillating_asymptotic(z: f64) -> (f64, f64) {
    let (u, v) = series_coefficients(SERIES_TERMS);
    let zeta = 2.0 / 3.0 * z.powf(1.5);
    let (s, c) = (zeta - PI / 4.0).sin_cos();
    let q = z.powf(0.25);
    let rp = PI.sqrt();
    let ai = (c * alternating_sum(&u, zeta, 2, 0) + s * alternating_sum(&u, zeta, 2, 1)) / (rp * q);
    let aip = q / rp * (s * alternating_sum(&v, zeta, 2, 0) - c * alternating_sum(&v, zeta, 2, 1));
    (ai, aip)
}
