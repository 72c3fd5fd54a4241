//! Compactly supported probability measures on the real line.
//!
//! A [`Measure`] is one of: a finite collection of atoms, a piecewise-linear
//! density on a grid, or a named analytic family (semicircle, uniform,
//! arcsine, point mass). Every measure exposes its Stieltjes transform
//! `m(z) = ∫ (x - z)^{-1} dμ(x)` and the first three `z`-derivatives, a CDF,
//! quantiles, and the Lévy distance to another measure.
//!
//! Measures are immutable once built and are `Send + Sync`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// Smallest closed interval containing the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportInfo {
    pub lower: f64,
    pub upper: f64,
}

impl SupportInfo {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    repr: Repr,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Atoms(Atoms),
    Grid(GridDensity),
    Semicircle { variance: f64, center: f64 },
    Uniform { a: f64, b: f64 },
    Arcsine { a: f64, b: f64 },
    PointMass { at: f64 },
}

/// Atoms sorted by location, with running cumulative weight.
#[derive(Debug, Clone, PartialEq)]
struct Atoms {
    locations: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

/// Piecewise-linear density through `(nodes[i], values[i])`.
#[derive(Debug, Clone, PartialEq)]
struct GridDensity {
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// Trapezoid weights; exact for the piecewise-linear interpolant.
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

fn finite(name: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidInput(format!("{name} must be finite, got {x}")))
    }
}

impl Measure {
    /// Semicircle law of the given variance centred at `center`; support
    /// `[center - 2σ, center + 2σ]`.
    pub fn semicircle(variance: f64, center: f64) -> Result<Self> {
        finite("variance", variance)?;
        finite("center", center)?;
        if variance <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "semicircle variance must be positive, got {variance}"
            )));
        }
        Ok(Self {
            repr: Repr::Semicircle { variance, center },
        })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        finite("a", a)?;
        finite("b", b)?;
        if a >= b {
            return Err(Error::InvalidInput(format!("uniform needs a < b, got [{a}, {b}]")));
        }
        Ok(Self {
            repr: Repr::Uniform { a, b },
        })
    }

    /// Arcsine law on `[a, b]`, density `1 / (π sqrt((x - a)(b - x)))`.
    pub fn arcsine(a: f64, b: f64) -> Result<Self> {
        finite("a", a)?;
        finite("b", b)?;
        if a >= b {
            return Err(Error::InvalidInput(format!("arcsine needs a < b, got [{a}, {b}]")));
        }
        Ok(Self {
            repr: Repr::Arcsine { a, b },
        })
    }

    pub fn point_mass(at: f64) -> Result<Self> {
        finite("point mass location", at)?;
        Ok(Self {
            repr: Repr::PointMass { at },
        })
    }

    /// Weighted atoms. Weights must be nonnegative and sum to one within 1e-12.
    pub fn atoms(locations: &[f64], weights: &[f64]) -> Result<Self> {
        if locations.is_empty() || locations.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "atoms need equal nonzero lengths, got {} locations and {} weights",
                locations.len(),
                weights.len()
            )));
        }
        let mut pairs = Vec::with_capacity(locations.len());
        for (&x, &w) in locations.iter().zip(weights) {
            finite("atom location", x)?;
            finite("atom weight", w)?;
            if w < 0.0 {
                return Err(Error::InvalidInput(format!("negative atom weight {w}")));
            }
            pairs.push((x, w));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!("atom weights sum to {total}, not 1")));
        }
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let locations: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self {
            repr: Repr::Atoms(Atoms {
                locations,
                weights,
                cumulative,
            }),
        })
    }

    /// Equal-weight atoms, the empirical spectral measure of `diag(locations)`.
    pub fn equal_atoms(locations: &[f64]) -> Result<Self> {
        let n = locations.len();
        if n == 0 {
            return Err(Error::InvalidInput("no atoms given".into()));
        }
        let w = vec![1.0 / n as f64; n];
        // Summation of 1/n can drift by a few ulps; renormalize the last weight.
        let mut m = Self::atoms_unchecked_mass(locations, &w)?;
        if let Repr::Atoms(a) = &mut m.repr {
            if let Some(last) = a.cumulative.last_mut() {
                *last = 1.0;
            }
        }
        Ok(m)
    }

    fn atoms_unchecked_mass(locations: &[f64], weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        let scaled: Vec<f64> = weights.iter().map(|w| w / total).collect();
        Self::atoms(locations, &scaled)
    }

    /// Piecewise-linear density through `(nodes, values)`, renormalized to
    /// unit mass. Leading and trailing zero segments are trimmed so that the
    /// reported support is tight.
    pub fn grid(nodes: &[f64], values: &[f64]) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "grid density needs at least two nodes and matching values, got {} / {}",
                nodes.len(),
                values.len()
            )));
        }
        for (&x, &v) in nodes.iter().zip(values) {
            finite("grid node", x)?;
            finite("grid value", v)?;
            if v < 0.0 {
                return Err(Error::InvalidInput(format!("negative density value {v}")));
            }
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid nodes must be strictly increasing".into()));
        }
        let mut start = 0;
        while start + 2 < nodes.len() && values[start] == 0.0 && values[start + 1] == 0.0 {
            start += 1;
        }
        let mut end = nodes.len();
        while end >= start + 3 && values[end - 1] == 0.0 && values[end - 2] == 0.0 {
            end -= 1;
        }
        let nodes = nodes[start..end].to_vec();
        let mut values = values[start..end].to_vec();
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            weights[i] += 0.5 * h;
            weights[i + 1] += 0.5 * h;
        }
        let mass: f64 = weights.iter().zip(&values).map(|(w, v)| w * v).sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidInput("grid density has zero mass".into()));
        }
        for v in &mut values {
            *v /= mass;
        }
        let mut cumulative = vec![0.0; n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            cumulative[i + 1] = cumulative[i] + 0.5 * h * (values[i] + values[i + 1]);
        }
        Ok(Self {
            repr: Repr::Grid(GridDensity {
                nodes,
                values,
                weights,
                cumulative,
            }),
        })
    }

    /// Builds a measure from a string tag and a flat parameter list:
    ///
    /// | tag          | params                                   |
    /// |--------------|------------------------------------------|
    /// | `semicircle` | `[variance]` or `[variance, center]`     |
    /// | `uniform`    | `[a, b]`                                 |
    /// | `arcsine`    | `[a, b]`                                 |
    /// | `point_mass` | `[c]`                                    |
    /// | `atoms`      | `[x_1, …, x_n]` (equal weights)          |
    /// | `grid`       | `[x_1, …, x_n, ρ_1, …, ρ_n]`             |
    pub fn from_tag(tag: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "measure '{tag}' takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        match tag {
            "semicircle" => match params.len() {
                1 => Self::semicircle(params[0], 0.0),
                2 => Self::semicircle(params[0], params[1]),
                _ => want(2).and_then(|_| unreachable!()),
            },
            "uniform" => {
                want(2)?;
                Self::uniform(params[0], params[1])
            }
            "arcsine" => {
                want(2)?;
                Self::arcsine(params[0], params[1])
            }
            "point_mass" => {
                want(1)?;
                Self::point_mass(params[0])
            }
            "atoms" => Self::equal_atoms(params),
            "grid" => {
                if params.len() % 2 != 0 {
                    return Err(Error::InvalidInput(
                        "grid parameters are nodes followed by values".into(),
                    ));
                }
                let (nodes, values) = params.split_at(params.len() / 2);
                Self::grid(nodes, values)
            }
            other => Err(Error::InvalidInput(format!("unknown measure tag '{other}'"))),
        }
    }

    /// Equal-weight atoms at the `n` midpoint quantiles of `self`.
    pub fn quantile_atoms(&self, n: usize) -> Result<Self> {
        Self::equal_atoms(&self.quantiles(n)?)
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match &self.repr {
            Repr::Atoms(a) => format!("atoms(n={})", a.locations.len()),
            Repr::Grid(g) => format!("grid(n={})", g.nodes.len()),
            Repr::Semicircle { variance, center } => {
                format!("semicircle(var={variance}, center={center})")
            }
            Repr::Uniform { a, b } => format!("uniform({a}, {b})"),
            Repr::Arcsine { a, b } => format!("arcsine({a}, {b})"),
            Repr::PointMass { at } => format!("point_mass({at})"),
        }
    }

    /// The location of the atom if `self` is a single point mass.
    pub fn as_point_mass(&self) -> Option<f64> {
        match &self.repr {
            Repr::PointMass { at } => Some(*at),
            Repr::Atoms(a) if a.locations.first() == a.locations.last() => {
                Some(a.locations[0])
            }
            _ => None,
        }
    }

    pub fn support(&self) -> SupportInfo {
        let (lower, upper) = match &self.repr {
            Repr::Atoms(a) => (a.locations[0], *a.locations.last().unwrap()),
            Repr::Grid(g) => (g.nodes[0], *g.nodes.last().unwrap()),
            Repr::Semicircle { variance, center } => {
                let r = 2.0 * variance.sqrt();
                (center - r, center + r)
            }
            Repr::Uniform { a, b } | Repr::Arcsine { a, b } => (*a, *b),
            Repr::PointMass { at } => (*at, *at),
        };
        SupportInfo { lower, upper }
    }

    pub fn mean(&self) -> f64 {
        match &self.repr {
            Repr::Atoms(a) => a.locations.iter().zip(&a.weights).map(|(x, w)| x * w).sum(),
            Repr::Grid(g) => {
                // exact first moment of the piecewise-linear interpolant
                let mut s = 0.0;
                for i in 0..g.nodes.len() - 1 {
                    let (x0, x1) = (g.nodes[i], g.nodes[i + 1]);
                    let (r0, r1) = (g.values[i], g.values[i + 1]);
                    let h = x1 - x0;
                    s += h * (r0 * (2.0 * x0 + x1) + r1 * (x0 + 2.0 * x1)) / 6.0;
                }
                s
            }
            Repr::Semicircle { center, .. } => *center,
            Repr::Uniform { a, b } | Repr::Arcsine { a, b } => 0.5 * (a + b),
            Repr::PointMass { at } => *at,
        }
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite spectral point {z}")));
        }
        let s = self.support();
        if z.im == 0.0 && s.contains(z.re) {
            return Err(Error::OnSupport {
                re: z.re,
                im: z.im,
                lower: s.lower,
                upper: s.upper,
            });
        }
        Ok(())
    }

    /// Stieltjes transform `m(z) = ∫ (x - z)^{-1} dμ(x)`, defined off the
    /// support interval.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        self.check_domain(z)?;
        Ok(self.jet(z, 0)[0])
    }

    /// `d^k m / dz^k = k! ∫ (x - z)^{-(k+1)} dμ(x)` for `k ∈ {1, 2, 3}`.
    pub fn stieltjes_derivative(&self, z: Complex64, k: usize) -> Result<Complex64> {
        if !(1..=3).contains(&k) {
            return Err(Error::OutOfRange(format!("derivative order {k} not in 1..=3")));
        }
        self.check_domain(z)?;
        Ok(self.jet(z, k)[k])
    }

    /// `[m, m', m'', m''']` up to `order`; entries above `order` are zero.
    pub fn stieltjes_jet(&self, z: Complex64, order: usize) -> Result<[Complex64; 4]> {
        if order > 3 {
            return Err(Error::OutOfRange(format!("derivative order {order} not in 0..=3")));
        }
        self.check_domain(z)?;
        Ok(self.jet(z, order))
    }

    fn jet(&self, z: Complex64, order: usize) -> [Complex64; 4] {
        let zero = Complex64::new(0.0, 0.0);
        let mut out = [zero; 4];
        match &self.repr {
            Repr::PointMass { at } => {
                let d = Complex64::new(*at, 0.0) - z;
                let inv = d.inv();
                let mut p = inv;
                let mut fact = 1.0;
                for (k, slot) in out.iter_mut().enumerate().take(order + 1) {
                    if k > 0 {
                        fact *= k as f64;
                        p *= inv;
                    }
                    *slot = p * fact;
                }
            }
            Repr::Atoms(a) => {
                for (&x, &w) in a.locations.iter().zip(&a.weights) {
                    let inv = (Complex64::new(x, 0.0) - z).inv();
                    let mut p = inv * w;
                    out[0] += p;
                    for slot in out.iter_mut().take(order + 1).skip(1) {
                        p *= inv;
                        *slot += p;
                    }
                }
                let mut fact = 1.0;
                for (k, slot) in out.iter_mut().enumerate().take(order + 1).skip(1) {
                    fact *= k as f64;
                    *slot *= fact;
                }
            }
            Repr::Semicircle { variance, center } => {
                let r = 2.0 * variance.sqrt();
                let w = z - center;
                let s = (w - r).sqrt() * (w + r).sqrt();
                let ws = w + s;
                out[0] = -2.0 / ws;
                if order >= 1 {
                    out[1] = 2.0 / (s * ws);
                }
                if order >= 2 {
                    out[2] = -2.0 / (s * s * s);
                }
                if order >= 3 {
                    out[3] = 6.0 * w / s.powu(5);
                }
            }
            Repr::Uniform { a, b } => {
                let len = b - a;
                let da = Complex64::new(*a, 0.0) - z;
                let db = Complex64::new(*b, 0.0) - z;
                out[0] = ln_1p(Complex64::new(len, 0.0) / da) / len;
                let (ia, ib) = (da.inv(), db.inv());
                let (mut pa, mut pb) = (ia, ib);
                let mut fact = 1.0;
                for k in 1..=order {
                    if k > 1 {
                        fact *= (k - 1) as f64;
                        pa *= ia;
                        pb *= ib;
                    }
                    out[k] = (pa - pb) * (fact / len);
                }
            }
            Repr::Arcsine { a, b } => {
                let s = (z - a).sqrt() * (z - b).sqrt();
                let p = 2.0 * z - a - b;
                let is = s.inv();
                out[0] = -is;
                if order >= 1 {
                    out[1] = 0.5 * p * is.powu(3);
                }
                if order >= 2 {
                    out[2] = is.powu(3) - 0.75 * p * p * is.powu(5);
                }
                if order >= 3 {
                    out[3] = -4.5 * p * is.powu(5) + 1.875 * p * p * p * is.powu(7);
                }
            }
            Repr::Grid(g) => g.jet(z, order, &mut out),
        }
        out
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match &self.repr {
            Repr::PointMass { at } => {
                if x >= *at {
                    1.0
                } else {
                    0.0
                }
            }
            Repr::Atoms(a) => {
                // number of atoms with location <= x
                let k = a.locations.partition_point(|&l| l <= x);
                if k == 0 {
                    0.0
                } else {
                    a.cumulative[k - 1].min(1.0)
                }
            }
            Repr::Semicircle { variance, center } => {
                let u = (x - center) / (2.0 * variance.sqrt());
                if u <= -1.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    (0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / std::f64::consts::PI)
                        .clamp(0.0, 1.0)
                }
            }
            Repr::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Repr::Arcsine { a, b } => {
                let u = ((x - a) / (b - a)).clamp(0.0, 1.0);
                (2.0 / std::f64::consts::PI * u.sqrt().asin()).clamp(0.0, 1.0)
            }
            Repr::Grid(g) => g.cdf(x),
        }
    }

    /// Midpoint quantiles: `x_i` with `CDF(x_i) = (i - 1/2) / n`, `i = 1..=n`,
    /// taking the smallest such `x` (generalized inverse). Continuous families
    /// are inverted by bisection to 1e-12 in `x`.
    pub fn quantiles(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidInput("quantile count must be at least 1".into()));
        }
        let probs = (1..=n).map(|i| (i as f64 - 0.5) / n as f64);
        match &self.repr {
            Repr::PointMass { at } => Ok(vec![*at; n]),
            Repr::Atoms(a) => Ok(probs
                .map(|p| {
                    let k = a.cumulative.partition_point(|&c| c < p - 1e-15);
                    a.locations[k.min(a.locations.len() - 1)]
                })
                .collect()),
            _ => Ok(probs.map(|p| self.invert_cdf(p)).collect()),
        }
    }

    fn invert_cdf(&self, p: f64) -> f64 {
        let s = self.support();
        let (mut lo, mut hi) = (s.lower, s.upper);
        // F(lo) <= p <= F(hi)
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Lévy distance on the default 10^5-point grid.
    pub fn levy_distance(&self, other: &Measure) -> f64 {
        self.levy_distance_with(other, 100_000)
    }

    /// Lévy distance `inf{ε : F₁(x-ε)-ε ≤ F₂(x) ≤ F₁(x+ε)+ε ∀x}`, with the
    /// sandwich condition checked on a uniform grid of `points` nodes spanning
    /// the joint support padded by 1. Accurate to the grid spacing.
    pub fn levy_distance_with(&self, other: &Measure, points: usize) -> f64 {
        let (s1, s2) = (self.support(), other.support());
        let lo = s1.lower.min(s2.lower) - 1.0;
        let hi = s1.upper.max(s2.upper) + 1.0;
        let points = points.max(2);
        let h = (hi - lo) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| lo + i as f64 * h).collect();
        let f2: Vec<f64> = xs.iter().map(|&x| other.cdf(x)).collect();
        let holds = |eps: f64| {
            xs.iter().zip(&f2).all(|(&x, &g)| {
                self.cdf(x - eps) - eps <= g + 1e-14 && g <= self.cdf(x + eps) + eps + 1e-14
            })
        };
        if holds(0.0) {
            return 0.0;
        }
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if holds(mid) {
                b = mid;
            } else {
                a = mid;
            }
            if b - a < 1e-12 {
                break;
            }
        }
        b
    }

    /// The same measure translated by `c`.
    pub fn translated(&self, c: f64) -> Measure {
        let repr = match &self.repr {
            Repr::PointMass { at } => Repr::PointMass { at: at + c },
            Repr::Atoms(a) => Repr::Atoms(Atoms {
                locations: a.locations.iter().map(|x| x + c).collect(),
                weights: a.weights.clone(),
                cumulative: a.cumulative.clone(),
            }),
            Repr::Grid(g) => Repr::Grid(GridDensity {
                nodes: g.nodes.iter().map(|x| x + c).collect(),
                values: g.values.clone(),
                weights: g.weights.clone(),
                cumulative: g.cumulative.clone(),
            }),
            Repr::Semicircle { variance, center } => Repr::Semicircle {
                variance: *variance,
                center: center + c,
            },
            Repr::Uniform { a, b } => Repr::Uniform { a: a + c, b: b + c },
            Repr::Arcsine { a, b } => Repr::Arcsine { a: a + c, b: b + c },
        };
        Measure { repr }
    }

    /// Total mass: exact for atoms and analytic families, trapezoid quadrature
    /// for grid densities.
    pub fn total_mass(&self) -> f64 {
        match &self.repr {
            Repr::Atoms(a) => a.weights.iter().sum(),
            Repr::Grid(g) => g.weights.iter().zip(&g.values).map(|(w, v)| w * v).sum(),
            _ => 1.0,
        }
    }
}

/// `log(1 + u)` accurate for small `|u|`.
fn ln_1p(u: Complex64) -> Complex64 {
    let w = Complex64::new(1.0, 0.0) + u;
    let d = w - 1.0;
    if d == Complex64::new(0.0, 0.0) {
        u
    } else if u.norm() < 0.5 {
        w.ln() * (u / d)
    } else {
        w.ln()
    }
}

impl GridDensity {
    fn cdf(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return 0.0;
        }
        if x >= self.nodes[n - 1] {
            return 1.0;
        }
        let i = self.nodes.partition_point(|&v| v <= x) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (r0, r1) = (self.values[i], self.values[i + 1]);
        let u = x - x0;
        let slope = (r1 - r0) / (x1 - x0);
        (self.cumulative[i] + r0 * u + 0.5 * slope * u * u).clamp(0.0, 1.0)
    }

    fn jet(&self, z: Complex64, order: usize, out: &mut [Complex64; 4]) {
        let lo = self.nodes[0];
        let hi = *self.nodes.last().unwrap();
        let width = hi - lo;
        let dist = if z.re < lo {
            Complex64::new(lo - z.re, z.im).norm()
        } else if z.re > hi {
            Complex64::new(z.re - hi, z.im).norm()
        } else {
            z.im.abs()
        };
        if dist > width {
            self.jet_far(z, order, out);
        } else {
            self.jet_exact(z, order, out);
        }
        if z.im == 0.0 {
            for v in out.iter_mut() {
                v.im = 0.0;
            }
        }
    }

    /// Three-point Gauss-Legendre per segment; the integrand is smooth when
    /// `z` is far from the support.
    fn jet_far(&self, z: Complex64, order: usize, out: &mut [Complex64; 4]) {
        const U: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        for i in 0..self.nodes.len() - 1 {
            let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
            let (r0, r1) = (self.values[i], self.values[i + 1]);
            let half = 0.5 * (x1 - x0);
            for (u, w) in U.iter().zip(&W) {
                let x = x0 + half * (1.0 + u);
                let rho = r0 + (r1 - r0) * 0.5 * (1.0 + u);
                let inv = (Complex64::new(x, 0.0) - z).inv();
                let mut p = inv * (rho * w * half);
                out[0] += p;
                for slot in out.iter_mut().take(order + 1).skip(1) {
                    p *= inv;
                    *slot += p;
                }
            }
        }
        let mut fact = 1.0;
        for (k, slot) in out.iter_mut().enumerate().take(order + 1).skip(1) {
            fact *= k as f64;
            *slot *= fact;
        }
    }

    /// Exact integration of the piecewise-linear density against
    /// `(x - z)^{-(k+1)}`, writing `ρ(x) = ρ(z) + s (x - z)` on each segment.
    /// The per-segment sums telescope; summing by parts leaves only the
    /// slope jumps at interior nodes, which avoids cancellation when `z` is
    /// close to the support.
    fn jet_exact(&self, z: Complex64, order: usize, out: &mut [Complex64; 4]) {
        let nodes = &self.nodes;
        let n = nodes.len() - 1;
        let slope = |i: usize| (self.values[i + 1] - self.values[i]) / (nodes[i + 1] - nodes[i]);
        let d = |i: usize| Complex64::new(nodes[i], 0.0) - z;
        let (d0, dn) = (d(0), d(n));
        let (s0, sn) = (slope(0), slope(n - 1));
        // ρ(z) as extended from the first and last segments.
        let r0 = self.values[0] - s0 * d0;
        let rn = self.values[n] - sn * dn;
        let (l0, ln) = (d0.ln(), dn.ln());
        let mut m = rn * ln - r0 * l0;
        let mut v = sn * ln - s0 * l0;
        let pw = |x: Complex64, k: i32| x.powi(-k);
        let mut t = [Complex64::default(); 4];
        let mut u = [Complex64::default(); 4];
        for k in 1..=3 {
            t[k] = r0 * pw(d0, k as i32) - rn * pw(dn, k as i32);
            u[k] = s0 * pw(d0, k as i32) - sn * pw(dn, k as i32);
        }
        let mut prev = s0;
        for i in 1..n {
            let si = slope(i);
            let jump = si - prev;
            prev = si;
            m += (nodes[i + 1] - nodes[i]) * si;
            if jump == 0.0 {
                continue;
            }
            let di = d(i);
            let li = di.ln();
            m += jump * di * li;
            v -= jump * li;
            let inv = di.inv();
            let mut p = Complex64::new(1.0, 0.0);
            for k in 1..=3 {
                // d_i^{1-k} and d_i^{-k}
                t[k] -= jump * p;
                p *= inv;
                u[k] += jump * p;
            }
        }
        m += (nodes[1] - nodes[0]) * s0;
        out[0] += m;
        if order >= 1 {
            out[1] += t[1] + v;
        }
        if order >= 2 {
            out[2] += t[2] + 2.0 * u[1];
        }
        if order >= 3 {
            out[3] += 2.0 * t[3] + 3.0 * u[2];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn semicircle_at_i() {
        let sc = Measure::semicircle(1.0, 0.0).unwrap();
        let m = sc.stieltjes(c(0.0, 1.0)).unwrap();
        assert!(close(m, c(0.0, (5f64.sqrt() - 1.0) / 2.0), 1e-14), "{m}");
    }

    #[test]
    fn point_mass_transform() {
        let d = Measure::point_mass(0.0).unwrap();
        assert!(close(d.stieltjes(c(0.0, 2.0)).unwrap(), c(0.0, 0.5), 1e-15));
        let m2 = d.stieltjes_derivative(c(2.0, 0.0), 2).unwrap();
        assert!(close(m2, c(-0.25, 0.0), 1e-15));
    }

    #[test]
    fn uniform_closed_form() {
        let u = Measure::uniform(-1.0, 1.0).unwrap();
        let m = u.stieltjes(c(2.0, 0.0)).unwrap();
        assert!(close(m, c(-3f64.ln() / 2.0, 0.0), 1e-15), "{m}");
        let m1 = u.stieltjes_derivative(c(2.0, 0.0), 1).unwrap();
        assert!(close(m1, c(1.0 / 3.0, 0.0), 1e-15), "{m1}");
    }

    #[test]
    fn semicircle_derivative_at_xi() {
        // m'(ξ) = 1/t at ξ = (2 + t)/sqrt(1 + t) for t = 1
        let sc = Measure::semicircle(1.0, 0.0).unwrap();
        let m1 = sc.stieltjes_derivative(c(3.0 / 2f64.sqrt(), 0.0), 1).unwrap();
        assert!(close(m1, c(1.0, 0.0), 1e-13), "{m1}");
    }

    #[test]
    fn real_inside_support_rejected() {
        let sc = Measure::semicircle(1.0, 0.0).unwrap();
        assert!(matches!(
            sc.stieltjes(c(1.0, 0.0)),
            Err(Error::OnSupport { .. })
        ));
        assert!(sc.stieltjes_derivative(c(3.0, 0.0), 4).is_err());
        assert!(sc.stieltjes_derivative(c(3.0, 0.0), 0).is_err());
    }

    #[test]
    fn real_beyond_support_negative() {
        let ms = [
            Measure::semicircle(1.0, 0.3).unwrap(),
            Measure::uniform(-1.0, 2.0).unwrap(),
            Measure::arcsine(-1.0, 1.0).unwrap(),
            Measure::equal_atoms(&[0.0, 1.0, 3.0]).unwrap(),
        ];
        for m in &ms {
            let up = m.support().upper;
            let v = m.stieltjes(c(up + 0.5, 0.0)).unwrap();
            assert!(v.re < 0.0 && v.im == 0.0, "{} {v}", m.describe());
        }
    }

    #[test]
    fn arcsine_matches_angle_quadrature() {
        // x = (a+b)/2 + (b-a)/2 cos θ turns the arcsine law into dθ/π on [0, π]
        let (a, b) = (-1.5, 0.5);
        let mu = Measure::arcsine(a, b).unwrap();
        let (nodes, weights) = crate::quad::composite_rule(0.0, PI, 8, 32);
        for z in [c(0.3, 0.7), c(-2.0, 0.1), c(1.5, 0.0), c(0.0, 3.0)] {
            let mut want = [c(0.0, 0.0); 4];
            for (th, w) in nodes.iter().zip(&weights) {
                let x = 0.5 * (a + b) + 0.5 * (b - a) * th.cos();
                let inv = (c(x, 0.0) - z).inv();
                want[0] += inv * (w / PI);
                want[1] += inv * inv * (w / PI);
                want[2] += 2.0 * inv.powu(3) * (w / PI);
                want[3] += 6.0 * inv.powu(4) * (w / PI);
            }
            let got = mu.stieltjes_jet(z, 3).unwrap();
            for k in 0..4 {
                assert!(
                    close(got[k], want[k], 1e-9 * want[k].norm().max(1.0)),
                    "k={k} z={z} {} vs {}",
                    got[k],
                    want[k]
                );
            }
        }
    }

    #[test]
    fn grid_matches_uniform() {
        let nodes: Vec<f64> = (0..=200).map(|i| -1.0 + i as f64 / 100.0).collect();
        let values = vec![0.5; nodes.len()];
        let g = Measure::grid(&nodes, &values).unwrap();
        let u = Measure::uniform(-1.0, 1.0).unwrap();
        for z in [c(0.2, 0.01), c(1.3, 0.0), c(-0.9, 2.0), c(50.0, 1.0)] {
            let a = g.stieltjes_jet(z, 3).unwrap();
            let b = u.stieltjes_jet(z, 3).unwrap();
            for k in 0..4 {
                assert!(close(a[k], b[k], 1e-11 * b[k].norm().max(1.0)), "k={k} z={z}");
            }
        }
        assert!((g.cdf(0.25) - 0.625).abs() < 1e-14);
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_trims_zero_tails() {
        let g = Measure::grid(&[0.0, 1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let s = g.support();
        assert_eq!((s.lower, s.upper), (1.0, 3.0));
        assert!((g.cdf(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Measure::semicircle(0.0, 0.0).is_err());
        assert!(Measure::uniform(1.0, 1.0).is_err());
        assert!(Measure::atoms(&[0.0, 1.0], &[0.5, 0.6]).is_err());
        assert!(Measure::atoms(&[0.0], &[-1.0]).is_err());
        assert!(Measure::grid(&[0.0, 1.0], &[1.0, -1.0]).is_err());
        assert!(Measure::grid(&[1.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(Measure::from_tag("cauchy", &[]).is_err());
        assert!(Measure::from_tag("uniform", &[0.0]).is_err());
        assert!(Measure::point_mass(f64::NAN).is_err());
    }

    #[test]
    fn tags_build_families() {
        let s = Measure::from_tag("semicircle", &[1.0]).unwrap();
        assert_eq!(s.support(), SupportInfo { lower: -2.0, upper: 2.0 });
        let g = Measure::from_tag("grid", &[0.0, 1.0, 2.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((g.mean() - 1.0).abs() < 1e-15);
        let a = Measure::from_tag("atoms", &[3.0, 1.0]).unwrap();
        assert_eq!(a.support(), SupportInfo { lower: 1.0, upper: 3.0 });
        assert_eq!(Measure::from_tag("point_mass", &[0.5]).unwrap().as_point_mass(), Some(0.5));
        assert!(Measure::from_tag("arcsine", &[-2.0, 2.0]).is_ok());
    }

    #[test]
    fn quantiles_examples() {
        let u = Measure::uniform(-1.0, 1.0).unwrap();
        let q = u.quantiles(2).unwrap();
        assert!((q[0] + 0.5).abs() < 1e-12 && (q[1] - 0.5).abs() < 1e-12);
        let d = Measure::point_mass(0.7).unwrap();
        assert_eq!(d.quantiles(3).unwrap(), vec![0.7; 3]);
        assert!(u.quantiles(0).is_err());
        let a = Measure::equal_atoms(&[0.0, 1.0]).unwrap();
        assert_eq!(a.quantiles(4).unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn semicircle_quantiles_against_numerical_cdf() {
        // Oracle: trapezoid CDF of the density on a fine grid, then bisection.
        let sc = Measure::semicircle(1.0, 0.0).unwrap();
        let tail = |x: f64| {
            let n = 200_000;
            let h = (2.0 - x) / n as f64;
            let rho = |y: f64| (4.0 - y * y).max(0.0).sqrt() / (2.0 * PI);
            // substitution y = 2 - v^2 removes the square-root endpoint
            let v_max = (2.0 - x).sqrt();
            let hv = v_max / n as f64;
            let mut s = 0.0;
            for i in 0..n {
                let v = (i as f64 + 0.5) * hv;
                s += rho(2.0 - v * v) * 2.0 * v * hv;
            }
            let _ = h;
            s
        };
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if tail(mid) > 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = sc.quantiles(2).unwrap();
        assert!((q[1] - lo).abs() < 1e-8, "{} vs {}", q[1], lo);
        assert!((q[0] + lo).abs() < 1e-8);
    }

    #[test]
    fn levy_examples() {
        let d0 = Measure::point_mass(0.0).unwrap();
        let d3 = Measure::point_mass(0.3).unwrap();
        assert_eq!(d0.levy_distance(&d0), 0.0);
        assert!((d0.levy_distance(&d3) - 0.3).abs() < 1e-4);
        let u = Measure::uniform(-1.0, 1.0).unwrap();
        let ua = u.quantile_atoms(1000).unwrap();
        assert!(u.levy_distance(&ua) <= 1.5e-3);
    }

    #[test]
    fn levy_direct_scan_oracle() {
        // Direct oracle: smallest ε on a fine ε-grid for which the sandwich
        // holds at every atom location and midpoint.
        let u = Measure::uniform(-1.0, 1.0).unwrap();
        let ua = u.quantile_atoms(50).unwrap();
        let xs: Vec<f64> = (0..=40_000).map(|i| -2.0 + i as f64 * 1e-4).collect();
        let mut eps = 0.0;
        while eps < 1.0 {
            let ok = xs.iter().all(|&x| {
                u.cdf(x - eps) - eps <= ua.cdf(x) + 1e-14 && ua.cdf(x) <= u.cdf(x + eps) + eps + 1e-14
            });
            if ok {
                break;
            }
            eps += 1e-5;
        }
        let got = u.levy_distance(&ua);
        assert!((got - eps).abs() < 1e-4, "{got} vs {eps}");
    }

    #[test]
    fn atomization_rate() {
        let sc = Measure::semicircle(1.0, 0.0).unwrap();
        let d100 = sc.levy_distance(&sc.quantile_atoms(100).unwrap());
        let d1000 = sc.levy_distance(&sc.quantile_atoms(1000).unwrap());
        let ratio = d100 / d1000;
        assert!(d100 <= 2.0 / 100.0 && d1000 <= 2.0 / 1000.0);
        assert!((7.0..=14.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn translation_shifts_transform() {
        let u = Measure::uniform(-1.0, 1.0).unwrap();
        let v = u.translated(0.5);
        let z = c(0.1, 0.4);
        assert!(close(v.stieltjes(z).unwrap(), u.stieltjes(z - 0.5).unwrap(), 1e-15));
        assert_eq!(v.support().upper, 1.5);
    }
}
