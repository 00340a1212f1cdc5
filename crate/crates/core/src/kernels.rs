//! Gaussian transition kernels.
//!
//! * the Mehler kernel of e^{tL} and its continuation p(z, x, y) to Re z ≥ 0,
//! * the kernel k(t, x, y) of e^{−tA}, either by subordination
//!   `(4πt)^{−1/2} ∫ e^{−s²/4t} (p(is) + p(−is)) ds` or by the spectral sum
//!   `Σ e^{−t|α|²} Ĥ_α(x) Ĥ_α(y) μ(y)`.
//!
//! Both kernels are densities against Lebesgue measure dy. The Mehler kernel
//! is normalized so that its stationary law is the standard Gaussian μ.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{normalized_table, MultiIndex};
use crate::quad::{composite_legendre, integrate_points, Tolerance};

/// Cramér's bound |Ĥ_n(x)| ≤ K e^{x²/4} for every n.
pub const CRAMER_CONSTANT: f64 = 1.086435;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Mehler,
    ComplexTime,
    Subordination,
    SpectralSum,
}

impl KernelMethod {
    pub fn name(&self) -> &'static str {
        match self {
            KernelMethod::Mehler => "mehler",
            KernelMethod::ComplexTime => "complex_time",
            KernelMethod::Subordination => "subordination",
            KernelMethod::SpectralSum => "spectral_sum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub method: KernelMethod,
    pub error_estimate: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Highest retained shell for spectral sums.
    pub max_degree: Option<u32>,
    /// Regularization used by subordination.
    pub epsilon: Option<f64>,
}

/// Gaussian density (2π)^{−N/2} e^{−|y|²/2}.
pub fn gaussian_density(y: &[f64]) -> f64 {
    let r2: f64 = y.iter().map(|v| v * v).sum();
    (2.0 * PI).powf(-(y.len() as f64) / 2.0) * (-0.5 * r2).exp()
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.is_empty() {
        return Err(Error::Misuse("empty point".into()));
    }
    Ok(())
}

/// Normalization of the real Mehler kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MehlerNormalization {
    /// (2π(1−e^{−2t}))^{−N/2} exp(−|y − e^{−t}x|²/(2(1−e^{−2t})))
    Standard,
    /// (4π(1−e^{−2t}))^{−N/2} exp(−|y − e^{−t}x|²/(4(1−e^{−2t}))), whose
    /// stationary variance is 2 and which is kept only as a regression foil.
    DoubledVariance,
}

/// Kernel of e^{tL} with respect to dy.
pub fn mehler_kernel(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    mehler_kernel_with(MehlerNormalization::Standard, t, x, y)
}

pub fn mehler_kernel_with(norm: MehlerNormalization, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("Mehler kernel needs t > 0, got {t}")));
    }
    let v = -(-2.0 * t).exp_m1();
    let c = match norm {
        MehlerNormalization::Standard => 2.0,
        MehlerNormalization::DoubledVariance => 4.0,
    };
    let e = (-t).exp();
    let d2: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - e * xi).powi(2)).sum();
    Ok((c * PI * v).powf(-(x.len() as f64) / 2.0) * (-d2 / (c * v)).exp())
}

/// p(z, x, y): the Mehler kernel continued to Re z ≥ 0, principal branch.
pub fn complex_kernel(z: Complex64, x: &[f64], y: &[f64]) -> Result<Complex64> {
    check_pair(x, y)?;
    if z.re < 0.0 {
        return Err(Error::Domain(format!("complex kernel needs Re z >= 0, got {z}")));
    }
    let q = Complex64::new(1.0, 0.0) - (-2.0 * z).exp();
    if q.norm() < 1e-14 {
        return Err(Error::Singularity {
            point: vec![z.re, z.im],
            reason: "1 - exp(-2z) vanishes".into(),
        });
    }
    let e = (-z).exp();
    // bilinear square, not the Hermitian modulus
    let w2: Complex64 = x.iter().zip(y).map(|(&xi, &yi)| (yi - e * xi).powi(2)).sum();
    let n = x.len() as f64;
    Ok((-(n / 2.0) * (2.0 * PI * q).ln() - w2 / (2.0 * q)).exp())
}

/// Tail of the spectral sum beyond shell `d`, from Cramér's bound.
fn spectral_tail(n: usize, t: f64, d: u32, x: &[f64], y: &[f64], mu_y: f64) -> f64 {
    let r2: f64 = x.iter().chain(y).map(|v| v * v).sum();
    let pref = CRAMER_CONSTANT.powi(2 * n as i32) * (r2 / 4.0).exp() * mu_y;
    let mut tail = 0.0;
    let mut k = d + 1;
    loop {
        let term = MultiIndex::shell_size(n, k) * (-t * (k as f64).powi(2)).exp();
        tail += term;
        if term <= 1e-18 * tail || term == 0.0 || k > d + 10_000 {
            break;
        }
        k += 1;
    }
    pref * tail
}

/// Σ_{|α| ≤ d} e^{−t|α|²} Ĥ_α(x)Ĥ_α(y) μ(y) with a tail bound.
pub fn biou_kernel_spectral(t: f64, x: &[f64], y: &[f64], max_degree: u32) -> Result<KernelValue> {
    check_pair(x, y)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("kernel needs t > 0, got {t}")));
    }
    let shells = shell_products(x, y, max_degree);
    let mu_y = gaussian_density(y);
    let sum: f64 = shells.iter().enumerate().map(|(k, s)| (-t * (k as f64).powi(2)).exp() * s).sum();
    Ok(KernelValue {
        value: sum * mu_y,
        method: KernelMethod::SpectralSum,
        error_estimate: spectral_tail(x.len(), t, max_degree, x, y, mu_y),
        t,
        x: x.to_vec(),
        y: y.to_vec(),
        max_degree: Some(max_degree),
        epsilon: None,
    })
}

/// S_k = Σ_{|α|=k} Ĥ_α(x)Ĥ_α(y) for k ≤ d, as the product over axes of the
/// generating polynomials Σ_j Ĥ_j(x_i)Ĥ_j(y_i) z^j.
fn shell_products(x: &[f64], y: &[f64], d: u32) -> Vec<f64> {
    let d = d as usize;
    let mut acc = vec![0.0; d + 1];
    acc[0] = 1.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let hx = normalized_table(d as u32, xi);
        let hy = normalized_table(d as u32, yi);
        let mut next = vec![0.0; d + 1];
        for (i, a) in acc.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for j in 0..=(d - i) {
                next[i + j] += a * hx[j] * hy[j];
            }
        }
        acc = next;
    }
    acc
}

/// Options for the subordination quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinationOptions {
    pub epsilon: f64,
    /// Upper limit; `None` picks max(8√t, 4π).
    pub s_max: Option<f64>,
    /// Largest acceptable ε-refinement residual.
    pub tolerance: f64,
}

impl Default for SubordinationOptions {
    fn default() -> Self {
        Self { epsilon: 1e-3, s_max: None, tolerance: 1e-2 }
    }
}

/// Breakpoints on [0, s_max]: multiples of π with geometric grading toward each.
fn subordination_breakpoints(s_max: f64, eps: f64) -> Vec<f64> {
    let mut pts = vec![0.0, s_max];
    let mut k = 0.0;
    while k * PI <= s_max + PI {
        let c = k * PI;
        pts.push(c);
        let mut d = eps / 4.0;
        while d < PI / 2.0 {
            pts.push(c - d);
            pts.push(c + d);
            d *= 2.0;
        }
        k += 1.0;
    }
    let mut pts: Vec<f64> = pts.into_iter().filter(|&s| (0.0..=s_max).contains(&s)).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

fn regularized_integral(t: f64, x: &[f64], y: &[f64], eps: f64, s_max: f64) -> Result<(f64, f64)> {
    let pts = subordination_breakpoints(s_max, eps);
    let failure = RefCell::new(None);
    let integrand = |s: f64| match complex_kernel(Complex64::new(eps, s), x, y) {
        Ok(p) => (-s * s / (4.0 * t)).exp() * 2.0 * p.re,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let r = integrate_points(integrand, &pts, Tolerance::new(1e-12, 1e-11).with_max_intervals(20_000));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let pref = (4.0 * PI * t).sqrt().recip();
    Ok((pref * r.value, pref * r.error))
}

/// sup_s |p(ε + is, x, y)|, sampled over one period with refinement near s ∈ πℤ.
fn sup_modulus(x: &[f64], y: &[f64], eps: f64) -> Result<f64> {
    let mut samples: Vec<f64> = (0..2048).map(|i| 2.0 * PI * i as f64 / 2048.0).collect();
    for c in [0.0, PI, 2.0 * PI] {
        let mut d = eps / 8.0;
        while d < 0.5 {
            samples.push(c + d);
            samples.push(c - d);
            d *= 1.25;
        }
        samples.push(c);
    }
    let mut sup: f64 = 0.0;
    for s in samples {
        sup = sup.max(complex_kernel(Complex64::new(eps, s), x, y)?.norm());
    }
    Ok(sup)
}

/// k(t, x, y) through the subordination integral, regularized at Re z = ε and
/// ε/2 and Richardson-extrapolated to ε → 0.
pub fn biou_kernel_subordination(t: f64, x: &[f64], y: &[f64], opts: SubordinationOptions) -> Result<KernelValue> {
    check_pair(x, y)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("kernel needs t > 0, got {t}")));
    }
    if !(opts.epsilon > 0.0) {
        return Err(Error::Domain(format!("regularization must be positive, got {}", opts.epsilon)));
    }
    let floor = 8.0 * t.sqrt();
    let s_max = opts.s_max.unwrap_or(floor.max(4.0 * PI));
    if s_max < floor {
        return Err(Error::Misuse(format!("s_max = {s_max} below 8*sqrt(t) = {floor}")));
    }
    let (i1, e1) = regularized_integral(t, x, y, opts.epsilon, s_max)?;
    let (i2, e2) = regularized_integral(t, x, y, opts.epsilon / 2.0, s_max)?;
    let residual = (i1 - i2).abs();
    let tail = sup_modulus(x, y, opts.epsilon / 2.0)? * libm::erfc(s_max / (2.0 * t.sqrt()));
    if residual > opts.tolerance {
        return Err(Error::NonConvergence(format!(
            "epsilon refinement residual {residual:e} exceeds tolerance {:e}",
            opts.tolerance
        )));
    }
    Ok(KernelValue {
        value: 2.0 * i2 - i1,
        method: KernelMethod::Subordination,
        error_estimate: residual + tail + 2.0 * e2 + e1,
        t,
        x: x.to_vec(),
        y: y.to_vec(),
        max_degree: None,
        epsilon: Some(opts.epsilon),
    })
}

/// (4πt)^{−1/2} ∫_ℝ e^{−s²/4t} cos(ns) ds by adaptive quadrature; the
/// closed form is e^{−n²t}.
pub fn scalar_subordination(n: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("needs t > 0, got {t}")));
    }
    // e^{−s²/4t} < 1e-20 beyond this
    let s_max = 2.0 * t.sqrt() * (20.0 * 10f64.ln()).sqrt();
    let mut pts = vec![0.0];
    if n != 0.0 {
        let step = PI / n.abs();
        let mut s = step;
        while s < s_max {
            pts.push(s);
            s += step;
        }
    }
    pts.push(s_max);
    let r = integrate_points(|s| (-s * s / (4.0 * t)).exp() * (n * s).cos(), &pts, Tolerance::new(1e-14, 1e-13));
    Ok(2.0 * r.value / (4.0 * PI * t).sqrt())
}

/// How `apply_biou_by_kernel` evaluates k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum KernelSource {
    Spectral { max_degree: u32 },
    Subordination { epsilon: f64 },
}

/// Tensor composite Gauss–Legendre rule on [−L, L]^N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxQuadrature {
    pub half_width: f64,
    pub panels: usize,
    pub order: usize,
}

impl Default for BoxQuadrature {
    fn default() -> Self {
        Self { half_width: 10.0, panels: 40, order: 16 }
    }
}

impl BoxQuadrature {
    /// All nodes with their product weights, last axis fastest.
    pub fn nodes(&self, dimension: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        let (x, w) = composite_legendre(-self.half_width, self.half_width, self.panels, self.order);
        let m = x.len();
        let total = (m as f64).powi(dimension as i32);
        if total > crate::hermite::MAX_TENSOR_NODES as f64 {
            return Err(Error::Resource(format!("{total} box quadrature nodes exceed the cap")));
        }
        let total = total as usize;
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; dimension];
        for k in 0..total {
            let mut r = k;
            for d in (0..dimension).rev() {
                idx[d] = r % m;
                r /= m;
            }
            out.push((idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| w[i]).product()));
        }
        Ok(out)
    }
}

/// k(t, x, y) through the chosen source.
pub fn biou_kernel(source: KernelSource, t: f64, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    match source {
        KernelSource::Spectral { max_degree } => biou_kernel_spectral(t, x, y, max_degree),
        KernelSource::Subordination { epsilon } => {
            biou_kernel_subordination(t, x, y, SubordinationOptions { epsilon, ..Default::default() })
        }
    }
}

/// (e^{−tA}f)(x) = ∫ k(t, x, y) f(y) dy by box quadrature.
pub fn apply_biou_by_kernel<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    t: f64,
    x: &[f64],
    source: KernelSource,
    quadrature: BoxQuadrature,
) -> Result<f64> {
    let nodes = quadrature.nodes(x.len())?;
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|(y, w)| {
            let fy = f(y);
            if fy == 0.0 {
                return Ok(0.0);
            }
            Ok(w * fy * biou_kernel(source, t, x, y)?.value)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum())
}

/// Kernel values on a (t, x, y) grid in deterministic order.
pub fn kernel_grid(
    source: KernelSource,
    times: &[f64],
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
) -> Result<Vec<KernelValue>> {
    let mut tuples = Vec::with_capacity(times.len() * xs.len() * ys.len());
    for &t in times {
        for x in xs {
            for y in ys {
                tuples.push((t, x, y));
            }
        }
    }
    tuples.par_iter().map(|(t, x, y)| biou_kernel(source, *t, x, y)).collect()
}
