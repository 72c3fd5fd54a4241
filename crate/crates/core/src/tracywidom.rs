//! GUE Tracy-Widom distribution `F₂(s) = det(I - K_Ai)` on `L²(s, ∞)`,
//! by Nyström discretization of the Airy kernel.

use faer::Mat;

use crate::airy::airy_pair;
use crate::error::{Error, Result};
use crate::quad::{composite_rule, gauss_legendre};

/// Range of `s` on which [`TwEvaluator::cdf`] is defined.
pub const S_MIN: f64 = -12.0;
pub const S_MAX: f64 = 8.0;

/// Discretized Airy-kernel determinant. Immutable after construction.
#[derive(Debug, Clone)]
pub struct TwEvaluator {
    order: usize,
    cap: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TwEvaluator {
    /// `order` Gauss-Legendre nodes on `(s, s + cap]`.
    pub fn new(order: usize, cap: f64) -> Result<Self> {
        if order < 20 {
            return Err(Error::InvalidInput(format!("quadrature order {order} < 20")));
        }
        if !(cap >= 10.0 && cap.is_finite()) {
            return Err(Error::InvalidInput(format!("domain cap {cap} < 10")));
        }
        let (nodes, weights) = gauss_legendre(order);
        Ok(Self {
            order,
            cap,
            nodes,
            weights,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// `F₂(s)` for `s ∈ [-12, 8]`.
    pub fn cdf(&self, s: f64) -> Result<f64> {
        if !(S_MIN..=S_MAX).contains(&s) {
            return Err(Error::OutOfRange(format!("s = {s} outside [{S_MIN}, {S_MAX}]")));
        }
        let half = 0.5 * self.cap;
        let m = self.order;
        let mut x = Vec::with_capacity(m);
        let mut sw = Vec::with_capacity(m);
        let mut ai = Vec::with_capacity(m);
        let mut aip = Vec::with_capacity(m);
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            let xi = s + half * (1.0 + u);
            let (a, ap) = airy_pair(xi)?;
            x.push(xi);
            sw.push((half * w).sqrt());
            ai.push(a);
            aip.push(ap);
        }
        let mat = Mat::<f64>::from_fn(m, m, |j, k| {
            let kernel = if j == k {
                aip[j] * aip[j] - x[j] * ai[j] * ai[j]
            } else {
                (ai[j] * aip[k] - aip[j] * ai[k]) / (x[j] - x[k])
            };
            let delta = if j == k { 1.0 } else { 0.0 };
            delta - sw[j] * sw[k] * kernel
        });
        Ok(mat.determinant().clamp(0.0, 1.0))
    }

    /// Inverse of [`cdf`](Self::cdf) by bisection to `1e-8` in `s`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(1e-4..=1.0 - 1e-6).contains(&p) {
            return Err(Error::OutOfRange(format!("probability {p} outside [1e-4, 1 - 1e-6]")));
        }
        let (mut lo, mut hi) = (S_MIN, S_MAX);
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid)? < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `(s, F₂(s))` on a grid.
    pub fn tabulate(&self, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        grid.iter().map(|&s| Ok((s, self.cdf(s)?))).collect()
    }

    /// Mean and variance of `F₂` by quadrature of `s dF₂` over `[-12, 8]`.
    pub fn moments(&self) -> Result<(f64, f64)> {
        // ∫ s dF = b F(b) - a F(a) - ∫ F ds, and similarly for s².
        let (a, b) = (S_MIN, S_MAX);
        let (xs, ws) = composite_rule(a, b, 20, 16);
        let (mut i0, mut i1) = (0.0, 0.0);
        for (x, w) in xs.iter().zip(&ws) {
            let f = self.cdf(*x)?;
            i0 += w * f;
            i1 += w * x * f;
        }
        let (fa, fb) = (self.cdf(a)?, self.cdf(b)?);
        let mean = b * fb - a * fa - i0;
        let second = b * b * fb - a * a * fa - 2.0 * i1;
        Ok((mean, second - mean * mean))
    }
}

impl Default for TwEvaluator {
    fn default() -> Self {
        Self::new(40, 14.0).expect("default evaluator parameters are valid")
    }
}

/// `F₂(s)` with the default evaluator.
pub fn tw2_cdf(ev: &TwEvaluator, s: f64) -> Result<f64> {
    ev.cdf(s)
}

pub fn tw2_quantile(ev: &TwEvaluator, p: f64) -> Result<f64> {
    ev.quantile(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        let ev = TwEvaluator::default();
        assert!(ev.cdf(6.0).unwrap() >= 1.0 - 1e-8);
        assert!(ev.cdf(-9.0).unwrap() <= 1e-4);
        assert!(ev.cdf(8.5).is_err());
        assert!(ev.cdf(-12.5).is_err());
    }

    #[test]
    fn refinement_agrees() {
        let coarse = TwEvaluator::new(40, 14.0).unwrap();
        let fine = TwEvaluator::new(80, 14.0).unwrap();
        for k in 0..=20 {
            let s = -6.0 + 0.5 * k as f64;
            let d = (coarse.cdf(s).unwrap() - fine.cdf(s).unwrap()).abs();
            assert!(d <= 1e-8, "s={s} diff={d:e}");
        }
    }

    #[test]
    fn monotone_on_grid() {
        let ev = TwEvaluator::default();
        let mut prev = 0.0;
        for k in 0..=100 {
            let s = -8.0 + 0.12 * k as f64;
            let f = ev.cdf(s).unwrap();
            assert!((0.0..=1.0).contains(&f));
            assert!(f - prev >= -1e-9, "s={s}");
            prev = f;
        }
    }

    #[test]
    fn quantile_round_trip() {
        let ev = TwEvaluator::default();
        for s in [-3.0, -1.0, 0.0] {
            let p = ev.cdf(s).unwrap();
            assert!((ev.quantile(p).unwrap() - s).abs() < 1e-6);
        }
        assert!(ev.quantile(0.0).is_err());
        assert!(ev.quantile(1.0).is_err());
        let ps = [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
        let qs: Vec<f64> = ps.iter().map(|&p| ev.quantile(p).unwrap()).collect();
        assert!(qs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn median_stable_under_refinement() {
        let a = TwEvaluator::new(40, 14.0).unwrap().quantile(0.5).unwrap();
        let b = TwEvaluator::new(80, 14.0).unwrap().quantile(0.5).unwrap();
        assert!((a - b).abs() < 1e-7);
    }

    #[test]
    fn rejects_small_parameters() {
        assert!(TwEvaluator::new(10, 14.0).is_err());
        assert!(TwEvaluator::new(40, 5.0).is_err());
    }
}
