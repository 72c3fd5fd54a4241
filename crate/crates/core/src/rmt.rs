//! Random matrices: Haar unitaries, GUE, the ensemble
//! `H_t = A + U B U* + √t W`, resolvent probes and the partial randomness
//! decomposition of a unitary.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Measure;

/// Generator for sample `stream` of a run with master seed `seed`. Streams
/// are independent, so samples can be drawn in any order or in parallel.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> c64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(s * re, s * im)
}

/// Haar-distributed `n × n` unitary: QR of a complex Ginibre matrix with
/// the columns of `Q` rotated so that `R` has a positive diagonal.
pub fn sample_haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<c64> {
    assert!(n >= 1, "dimension must be positive");
    let z = Mat::<c64>::from_fn(n, n, |_, _| complex_gaussian(rng, 1.0));
    let qr = z.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        let d = r[(j, j)];
        let norm = d.norm();
        let phase = if norm > 0.0 { d / norm } else { c64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// GUE normalized so that the spectrum fills `[-2, 2]`: real diagonal with
/// variance `1/n`, complex off-diagonal with `E|W_ij|² = 1/n`.
pub fn sample_gue<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat<c64> {
    assert!(n >= 1, "dimension must be positive");
    let var = 1.0 / n as f64;
    let mut w = Mat::<c64>::zeros(n, n);
    for j in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        w[(j, j)] = c64::new(d * var.sqrt(), 0.0);
        for i in 0..j {
            let x = complex_gaussian(rng, var);
            w[(i, j)] = x;
            w[(j, i)] = x.conj();
        }
    }
    w
}

/// Largest eigenvalue of an `n × n` GUE matrix (same normalization as
/// [`sample_gue`]) drawn through the tridiagonal model with Gaussian
/// diagonal and `χ_{2k}/√2` off-diagonals, by Sturm-sequence bisection.
pub fn gue_tridiagonal_lambda_max<R: Rng + ?Sized>(n: usize, rng: &mut R) -> f64 {
    assert!(n >= 1, "dimension must be positive");
    let scale = 1.0 / (n as f64).sqrt();
    let diag: Vec<f64> = (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let off: Vec<f64> = (1..n)
        .rev()
        .map(|k| {
            let chi2: f64 = ChiSquared::new(2.0 * k as f64).expect("positive dof").sample(rng);
            scale * (0.5 * chi2).sqrt()
        })
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    // Number of eigenvalues below x.
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    while hi - lo > 1e-13 * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        if below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(A, B, t, N, seed)` with `A = diag(a_diag)` and `B = diag(b_diag)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub a_diag: Vec<f64>,
    pub b_diag: Vec<f64>,
    pub t: f64,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(a_diag: Vec<f64>, b_diag: Vec<f64>, t: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            n: a_diag.len(),
            a_diag,
            b_diag,
            t,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `A` and `B` carry the `n`-point quantiles of `mu_a` and `mu_b`.
    pub fn quantile_embedded(mu_a: &Measure, mu_b: &Measure, n: usize, t: f64, seed: u64) -> Result<Self> {
        Self::new(mu_a.quantiles(n)?, mu_b.quantiles(n)?, t, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if self.a_diag.len() != self.n || self.b_diag.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "diagonals have lengths {} and {}, expected {}",
                self.a_diag.len(),
                self.b_diag.len(),
                self.n
            )));
        }
        if self.a_diag.iter().chain(&self.b_diag).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite diagonal entry".into()));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidInput(format!("time must be >= 0, got {}", self.t)));
        }
        Ok(())
    }

    pub fn with_time(&self, t: f64) -> Self {
        Self { t, ..self.clone() }
    }

    fn b_is_zero(&self) -> bool {
        self.b_diag.iter().all(|&b| b == 0.0)
    }
}

/// Eigenvalues `λ₁ ≥ … ≥ λ_N` of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<f64>,
    /// Master seed of the run.
    pub seed: u64,
    /// Stream index within the run.
    pub stream: u64,
    pub t: f64,
}

impl SpectrumSample {
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }
}

/// Dense realization of one sample.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub h: Mat<c64>,
    /// `U B U*`, absent when `B = 0`.
    pub b_tilde: Option<Mat<c64>>,
}

/// `U diag(b) U*`.
fn conjugate_diagonal(u: &Mat<c64>, b: &[f64]) -> Mat<c64> {
    let n = b.len();
    let ub = Mat::<c64>::from_fn(n, n, |i, j| u[(i, j)] * b[j]);
    &ub * u.adjoint()
}

/// `A + B̃ + √t W` with `W` drawn from `rng` when `t > 0`.
fn add_flow<R: Rng + ?Sized>(a: &[f64], b_tilde: Option<&Mat<c64>>, t: f64, rng: &mut R) -> Mat<c64> {
    let n = a.len();
    let mut h = match b_tilde {
        Some(b) => b.clone(),
        None => Mat::<c64>::zeros(n, n),
    };
    for (i, &ai) in a.iter().enumerate() {
        h[(i, i)] += c64::new(ai, 0.0);
    }
    if t > 0.0 {
        let w = sample_gue(n, rng);
        let s = t.sqrt();
        for j in 0..n {
            for i in 0..n {
                h[(i, j)] += w[(i, j)] * s;
            }
        }
    }
    // Exact Hermitian symmetry regardless of rounding in the product.
    for j in 0..n {
        h[(j, j)].im = 0.0;
        for i in 0..j {
            let avg = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            h[(i, j)] = avg;
            h[(j, i)] = avg.conj();
        }
    }
    h
}

/// Dense `H_t` for `spec`; draws `U` (unless `B = 0`) then `W` (if `t > 0`).
pub fn build<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Ensemble> {
    spec.validate()?;
    let b_tilde = if spec.b_is_zero() {
        None
    } else {
        let u = sample_haar_unitary(spec.n, rng);
        Some(conjugate_diagonal(&u, &spec.b_diag))
    };
    let h = add_flow(&spec.a_diag, b_tilde.as_ref(), spec.t, rng);
    Ok(Ensemble { h, b_tilde })
}

/// Eigenvalues of a Hermitian matrix in descending order.
pub fn eigenvalues_desc(h: &Mat<c64>, seed: u64) -> Result<Vec<f64>> {
    let mut ev = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Eigensolver { seed })?;
    if ev.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigensolver { seed });
    }
    ev.reverse();
    Ok(ev)
}

/// Samples `H_t` and returns its spectrum.
pub fn assemble<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<SpectrumSample> {
    let ens = build(spec, rng)?;
    Ok(SpectrumSample {
        eigenvalues: eigenvalues_desc(&ens.h, spec.seed)?,
        seed: spec.seed,
        stream: 0,
        t: spec.t,
    })
}

/// Sample number `stream` of the run seeded by `spec.seed`.
pub fn sample_stream(spec: &EnsembleSpec, stream: u64) -> Result<SpectrumSample> {
    let mut rng = stream_rng(spec.seed, stream);
    let mut s = assemble(spec, &mut rng)?;
    s.stream = stream;
    Ok(s)
}

/// Spectra along the matrix flow `H_s = A + UBU* + √s W_s` at the
/// nondecreasing `times`, sharing one `U`. The Gaussian part is a
/// Brownian path: each step adds an independent `√(s - s_prev) W`.
pub fn flow_spectra<R: Rng + ?Sized>(spec: &EnsembleSpec, times: &[f64], rng: &mut R) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    if times.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidInput("flow times must be >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("flow times must be nondecreasing".into()));
    }
    let b_tilde = if spec.b_is_zero() {
        None
    } else {
        let u = sample_haar_unitary(spec.n, rng);
        Some(conjugate_diagonal(&u, &spec.b_diag))
    };
    let mut h = add_flow(&spec.a_diag, b_tilde.as_ref(), 0.0, rng);
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &s in times {
        if s > prev {
            let w = sample_gue(spec.n, rng);
            let c = (s - prev).sqrt();
            for j in 0..spec.n {
                for i in 0..spec.n {
                    h[(i, j)] += w[(i, j)] * c;
                }
            }
            prev = s;
        }
        out.push(eigenvalues_desc(&h, spec.seed)?);
    }
    Ok(out)
}

/// Resolvent quantities at `z`; traces are normalized, `tr = N⁻¹ Tr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventProbe {
    pub z: c64,
    pub g_diag: Vec<c64>,
    pub trace_g: c64,
    pub trace_bg: c64,
    pub trace_bgb: c64,
    /// `tr B̃G - (tr B̃G)² + tr G · tr B̃GB̃`.
    pub upsilon: c64,
    /// `z - tr B̃G / tr G + t · tr G`.
    pub omega_a_c: c64,
}

/// `G = (H - z)⁻¹` by dense LU, with the traces against `b_tilde`
/// (taken as zero when absent).
pub fn resolvent_probe(h: &Mat<c64>, b_tilde: Option<&Mat<c64>>, t: f64, z: c64) -> Result<ResolventProbe> {
    if !(z.im >= 1e-10) {
        return Err(Error::InvalidInput(format!("resolvent needs im z >= 1e-10, got {z}")));
    }
    let n = h.nrows();
    let mut shifted = h.clone();
    for i in 0..n {
        shifted[(i, i)] -= z;
    }
    let g = shifted.partial_piv_lu().inverse();
    let nf = n as f64;
    let g_diag: Vec<c64> = (0..n).map(|i| g[(i, i)]).collect();
    let trace_g = g_diag.iter().sum::<c64>() / nf;
    let (trace_bg, trace_bgb) = match b_tilde {
        Some(b) => {
            let bg = b * &g;
            let mut tbg = c64::new(0.0, 0.0);
            let mut tbgb = c64::new(0.0, 0.0);
            for i in 0..n {
                tbg += bg[(i, i)];
                for j in 0..n {
                    tbgb += bg[(i, j)] * b[(j, i)];
                }
            }
            (tbg / nf, tbgb / nf)
        }
        None => (c64::new(0.0, 0.0), c64::new(0.0, 0.0)),
    };
    let upsilon = trace_bg - trace_bg * trace_bg + trace_g * trace_bgb;
    let omega_a_c = z - trace_bg / trace_g + t * trace_g;
    Ok(ResolventProbe {
        z,
        g_diag,
        trace_g,
        trace_bg,
        trace_bgb,
        upsilon,
        omega_a_c,
    })
}

/// Factorization `U = -e^{iθ} R U^⟨i⟩` splitting off column `i`.
#[derive(Debug, Clone)]
pub struct DecompositionParts {
    pub index: usize,
    pub theta: f64,
    pub h_vec: Vec<c64>,
    pub r_vec: Vec<c64>,
    pub ell: f64,
    pub u_reduced: Mat<c64>,
}

impl DecompositionParts {
    /// `R = I - r r*`.
    pub fn reflection(&self) -> Mat<c64> {
        let n = self.r_vec.len();
        Mat::<c64>::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            c64::new(id, 0.0) - self.r_vec[i] * self.r_vec[j].conj()
        })
    }

    /// `-e^{iθ} R U^⟨i⟩`, which reproduces `U`.
    pub fn reconstruct(&self) -> Mat<c64> {
        let phase = c64::from_polar(1.0, self.theta);
        let ru = &self.reflection() * &self.u_reduced;
        Mat::<c64>::from_fn(ru.nrows(), ru.ncols(), |i, j| -phase * ru[(i, j)])
    }

    /// Largest violation of `R² = I`, the reconstruction of `u`, the unit
    /// row and column `i` of `U^⟨i⟩`, and `R e_i = -h`.
    pub fn identity_defect(&self, u: &Mat<c64>) -> f64 {
        let n = self.r_vec.len();
        let i = self.index;
        let r = self.reflection();
        let rr = &r * &r;
        let back = self.reconstruct();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let id = c64::new(if a == b { 1.0 } else { 0.0 }, 0.0);
                worst = worst.max((rr[(a, b)] - id).norm());
                worst = worst.max((back[(a, b)] - u[(a, b)]).norm());
                if a == i || b == i {
                    worst = worst.max((self.u_reduced[(a, b)] - id).norm());
                }
            }
            worst = worst.max((r[(a, i)] + self.h_vec[a]).norm());
        }
        worst
    }
}

/// With `v = U e_i`, `θ = arg v_i`, `h = e^{-iθ} v`, `r = ℓ(e_i + h)` where
/// `ℓ = √2/‖e_i + h‖`, `R = I - r r*` and `U^⟨i⟩ = -e^{-iθ} R U`.
pub fn partial_decomposition(u: &Mat<c64>, i: usize) -> Result<DecompositionParts> {
    let n = u.nrows();
    if u.ncols() != n || i >= n {
        return Err(Error::InvalidInput(format!("index {i} invalid for a {}x{} matrix", n, u.ncols())));
    }
    let theta = u[(i, i)].arg();
    let rot = c64::from_polar(1.0, -theta);
    let h_vec: Vec<c64> = (0..n).map(|k| rot * u[(k, i)]).collect();
    let mut sum = h_vec.clone();
    sum[i] += c64::new(1.0, 0.0);
    let norm = sum.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-8 {
        return Err(Error::Degenerate { index: i, norm });
    }
    let ell = std::f64::consts::SQRT_2 / norm;
    let r_vec: Vec<c64> = sum.iter().map(|x| x * ell).collect();
    let mut parts = DecompositionParts {
        index: i,
        theta,
        h_vec,
        r_vec,
        ell,
        u_reduced: Mat::<c64>::zeros(n, n),
    };
    let ru = &parts.reflection() * u;
    parts.u_reduced = Mat::<c64>::from_fn(n, n, |a, b| -rot * ru[(a, b)]);
    Ok(parts)
}
