//! Radial probability densities μ on ℝᴺ, their logarithmic derivatives,
//! the potential U = ¼|∇μ/μ|² − ½Δμ/μ, and grid-sampled audits of the
//! structural hypotheses on μ.
//!
//! Every density here is radial, μ(x) = κ·exp(ψ(|x|)). Writing the drift as
//! b(x) = ∇μ/μ = g(r)·x, a profile supplies g together with h = g'/r and
//! k = h'/r, from which all Cartesian derivatives follow:
//!
//! ```text
//! ∂_i b_j       = g δ_ij + h x_i x_j
//! ∂_k ∂_i b_j   = h (δ_ij x_k + δ_jk x_i + δ_ik x_j) + k x_i x_j x_k
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_to_infinity, radial_integral, Tolerance};

/// Radial drift data (g, h, k) at a radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDrift {
    pub g: f64,
    pub h: f64,
    pub k: f64,
}

/// Closed-form radial log-density and drift functions.
pub trait RadialProfile: Send + Sync + fmt::Debug {
    /// ψ(r) with μ = κ e^{ψ}.
    fn log_density(&self, r: f64) -> f64;
    /// (g, h, k) at r; may fail at r = 0 for profiles singular at the origin.
    fn drift(&self, r: f64) -> Result<RadialDrift>;
    fn singular_at_origin(&self) -> bool;
    fn label(&self) -> String;
}

/// Registered families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// μ = (2π)^{−N/2} e^{−|x|²/2}
    Gaussian,
    /// μ = κ e^{−|x|^m}
    Power { m: f64 },
    /// μ = C (1 + |x|^α)/(1 + |x|^β), β > α + N
    Rational { alpha: f64, beta: f64 },
    /// μ = K exp(−(c1 + c2|x|²)^m), m > 1/2
    SquaredPower { c1: f64, c2: f64, m: f64 },
}

/// c·r^p, treating c = 0 as identically zero and rejecting r = 0 when p < 0.
fn power_term(c: f64, r: f64, p: f64) -> Result<f64> {
    if c == 0.0 {
        return Ok(0.0);
    }
    if r == 0.0 && p < 0.0 {
        return Err(Error::Singularity { point: vec![0.0], reason: format!("r^{p} at the origin") });
    }
    Ok(c * r.powf(p))
}

impl RadialProfile for Family {
    fn log_density(&self, r: f64) -> f64 {
        match *self {
            Family::Gaussian => -0.5 * r * r,
            Family::Power { m } => -r.powf(m),
            Family::Rational { alpha, beta } => (1.0 + r.powf(alpha)).ln() - (1.0 + r.powf(beta)).ln(),
            Family::SquaredPower { c1, c2, m } => -(c1 + c2 * r * r).powf(m),
        }
    }

    fn drift(&self, r: f64) -> Result<RadialDrift> {
        match *self {
            Family::Gaussian => Ok(RadialDrift { g: -1.0, h: 0.0, k: 0.0 }),
            Family::Power { m } => Ok(RadialDrift {
                g: power_term(-m, r, m - 2.0)?,
                h: power_term(-m * (m - 2.0), r, m - 4.0)?,
                k: power_term(-m * (m - 2.0) * (m - 4.0), r, m - 6.0)?,
            }),
            Family::Rational { alpha, beta } => {
                if r == 0.0 {
                    return Err(Error::Singularity {
                        point: vec![0.0],
                        reason: "rational drift derivatives are evaluated away from the origin".into(),
                    });
                }
                let a = rational_term(alpha, r);
                let b = rational_term(beta, r);
                Ok(RadialDrift { g: a.g - b.g, h: a.h - b.h, k: a.k - b.k })
            }
            Family::SquaredPower { c1, c2, m } => {
                let w = c1 + c2 * r * r;
                Ok(RadialDrift {
                    g: -2.0 * m * c2 * w.powf(m - 1.0),
                    h: -4.0 * m * (m - 1.0) * c2 * c2 * w.powf(m - 2.0),
                    k: -8.0 * m * (m - 1.0) * (m - 2.0) * c2.powi(3) * w.powf(m - 3.0),
                })
            }
        }
    }

    fn singular_at_origin(&self) -> bool {
        match *self {
            Family::Gaussian | Family::SquaredPower { .. } => false,
            Family::Power { m } => !(m == 2.0 || m == 4.0 || m >= 6.0),
            Family::Rational { .. } => true,
        }
    }

    fn label(&self) -> String {
        match *self {
            Family::Gaussian => "gaussian".into(),
            Family::Power { m } => format!("power(m={m})"),
            Family::Rational { alpha, beta } => format!("rational(alpha={alpha}, beta={beta})"),
            Family::SquaredPower { c1, c2, m } => format!("squared_power(c1={c1}, c2={c2}, m={m})"),
        }
    }
}

/// Drift data of the term ln(1 + r^p): g = p r^{p−2}/(1+s), s = r^p.
fn rational_term(p: f64, r: f64) -> RadialDrift {
    let s = r.powf(p);
    let f = ((p - 2.0) * s - 2.0 * s * s) / ((1.0 + s) * (1.0 + s));
    let df = ((p - 2.0) - (p + 2.0) * s) / (1.0 + s).powi(3);
    RadialDrift {
        g: p * r.powf(p - 2.0) / (1.0 + s),
        h: p * f / r.powi(4),
        k: p * (-4.0 * f + p * s * df) / r.powi(6),
    }
}

/// A normalized radial probability density on ℝᴺ.
#[derive(Debug, Clone)]
pub struct Measure {
    dimension: usize,
    normalization: f64,
    profile: Arc<dyn RadialProfile>,
    family: Option<Family>,
}

impl Measure {
    pub fn gaussian(dimension: usize) -> Result<Self> {
        check_dimension(dimension)?;
        Ok(Self {
            dimension,
            normalization: (2.0 * PI).powf(-(dimension as f64) / 2.0),
            profile: Arc::new(Family::Gaussian),
            family: Some(Family::Gaussian),
        })
    }

    pub fn power(dimension: usize, m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("power family needs m > 0, got {m}")));
        }
        Self::from_family(dimension, Family::Power { m })
    }

    pub fn rational(dimension: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::Domain(format!("rational family needs alpha, beta > 0, got {alpha}, {beta}")));
        }
        if beta <= alpha + dimension as f64 {
            return Err(Error::Domain(format!(
                "rational family needs beta > alpha + N: {beta} <= {}",
                alpha + dimension as f64
            )));
        }
        Self::from_family(dimension, Family::Rational { alpha, beta })
    }

    pub fn squared_power(dimension: usize, c1: f64, c2: f64, m: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::Domain(format!("squared_power needs c1, c2 > 0, got {c1}, {c2}")));
        }
        if m <= 0.5 {
            return Err(Error::Domain(format!("squared_power needs m > 1/2, got {m}")));
        }
        Self::from_family(dimension, Family::SquaredPower { c1, c2, m })
    }

    fn from_family(dimension: usize, family: Family) -> Result<Self> {
        let mut m = Self::from_profile(dimension, Arc::new(family))?;
        m.family = Some(family);
        Ok(m)
    }

    /// Wrap an arbitrary radial profile; the normalization constant is
    /// computed by radial quadrature.
    pub fn from_profile(dimension: usize, profile: Arc<dyn RadialProfile>) -> Result<Self> {
        check_dimension(dimension)?;
        let mass = unnormalized_mass(dimension, profile.as_ref())?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Domain(format!("density of {} is not normalizable", profile.label())));
        }
        Ok(Self { dimension, normalization: 1.0 / mass, profile, family: None })
    }

    pub fn from_config(config: &MeasureConfig) -> Result<Self> {
        let d = config.dimension;
        let p = &config.params;
        let num = |key: &str| -> Result<f64> {
            p.get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| Error::Config(format!("missing numeric parameter `{key}`")))
        };
        let allow = |keys: &[&str]| -> Result<()> {
            if let Some(bad) = p.keys().find(|k| !keys.contains(&k.as_str())) {
                return Err(Error::Config(format!("unknown parameter `{bad}` for family {:?}", config.family)));
            }
            Ok(())
        };
        match config.family {
            FamilyName::Gaussian => {
                allow(&[])?;
                Self::gaussian(d)
            }
            FamilyName::Power => {
                allow(&["m"])?;
                Self::power(d, num("m")?)
            }
            FamilyName::Rational => {
                allow(&["alpha", "beta"])?;
                Self::rational(d, num("alpha")?, num("beta")?)
            }
            FamilyName::SquaredPower => {
                allow(&["c1", "c2", "m"])?;
                Self::squared_power(d, num("c1")?, num("c2")?, num("m")?)
            }
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn family(&self) -> Option<Family> {
        self.family
    }

    pub fn is_gaussian(&self) -> bool {
        self.family == Some(Family::Gaussian)
    }

    pub fn label(&self) -> String {
        format!("{} N={}", self.profile.label(), self.dimension)
    }

    pub fn singular_at_origin(&self) -> bool {
        self.profile.singular_at_origin()
    }

    /// Always true: every supported density is radial.
    pub fn radial_profile(&self) -> bool {
        true
    }

    pub fn profile(&self) -> &dyn RadialProfile {
        self.profile.as_ref()
    }

    pub fn density_radial(&self, r: f64) -> f64 {
        self.normalization * self.profile.log_density(r).exp()
    }

    pub fn radial_drift(&self, r: f64) -> Result<RadialDrift> {
        self.profile.drift(r)
    }

    fn check_point(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: x.len() });
        }
        Ok(norm(x))
    }

    fn drift_at(&self, x: &[f64]) -> Result<(f64, RadialDrift)> {
        let r = self.check_point(x)?;
        let d = self.profile.drift(r).map_err(|e| match e {
            Error::Singularity { reason, .. } => Error::Singularity { point: x.to_vec(), reason },
            other => other,
        })?;
        Ok((r, d))
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        let r = self.check_point(x)?;
        Ok(self.density_radial(r))
    }

    /// b(x) = ∇μ/μ
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (_, d) = self.drift_at(x)?;
        Ok(x.iter().map(|xi| d.g * xi).collect())
    }

    /// Δμ/μ = div b + |b|²
    pub fn laplacian_ratio(&self, x: &[f64]) -> Result<f64> {
        let (r, d) = self.drift_at(x)?;
        let r2 = r * r;
        Ok(self.dimension as f64 * d.g + d.h * r2 + d.g * d.g * r2)
    }

    /// J[i][j] = ∂_i b_j
    pub fn drift_jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let (_, d) = self.drift_at(x)?;
        let n = self.dimension;
        Ok((0..n)
            .map(|i| (0..n).map(|j| d.h * x[i] * x[j] + if i == j { d.g } else { 0.0 }).collect())
            .collect())
    }

    /// T[i][j][k] = ∂_i ∂_j b_k
    pub fn drift_hessian(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let (_, d) = self.drift_at(x)?;
        let n = self.dimension;
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Ok((0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| {
                                d.h * (delta(i, j) * x[k] + delta(j, k) * x[i] + delta(i, k) * x[j])
                                    + d.k * x[i] * x[j] * x[k]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect())
    }

    /// ∇(Δμ)/μ = ∇(div b + |b|²) + (div b + |b|²) b
    pub fn grad_laplacian_ratio(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (r, d) = self.drift_at(x)?;
        let n = self.dimension as f64;
        let r2 = r * r;
        let lap = n * d.g + d.h * r2 + d.g * d.g * r2;
        // ∂_k div b = ((N+2)h + k r²) x_k ; ∂_k |b|² = 2 g (g + h r²) x_k
        let coef = (n + 2.0) * d.h + d.k * r2 + 2.0 * d.g * (d.g + d.h * r2) + lap * d.g;
        Ok(x.iter().map(|xi| coef * xi).collect())
    }
}

fn check_dimension(dimension: usize) -> Result<()> {
    if dimension == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    Ok(())
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn unnormalized_mass(dimension: usize, profile: &dyn RadialProfile) -> Result<f64> {
    let tol = Tolerance::new(1e-15, 1e-12);
    let f = |r: f64| profile.log_density(r).exp();
    let inner = radial_integral(dimension, f, 1.0, &[], tol)?;
    let nm1 = (dimension - 1) as i32;
    let outer = integrate_to_infinity(|r| r.powi(nm1) * f(r), tol)?;
    Ok(inner.value + crate::quad::sphere_area(dimension) * outer.value)
}

/// U(x) = ¼|b|² − ½ Δμ/μ
pub fn compute_u(m: &Measure, x: &[f64]) -> Result<f64> {
    let (r, d) = m.drift_at(x)?;
    Ok(potential_radial(m.dimension, r, d))
}

fn potential_radial(dimension: usize, r: f64, d: RadialDrift) -> f64 {
    let r2 = r * r;
    let b2 = d.g * d.g * r2;
    let lap = dimension as f64 * d.g + d.h * r2 + b2;
    0.25 * b2 - 0.5 * lap
}

/// Default measures at a given dimension.
pub fn registry(dimension: usize) -> Result<Vec<Measure>> {
    Ok(vec![
        Measure::gaussian(dimension)?,
        Measure::power(dimension, 4.0)?,
        Measure::rational(dimension, 2.0, 2.0 + dimension as f64 + 3.0)?,
        Measure::squared_power(dimension, 1.0, 1.0, 1.5)?,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    Gaussian,
    Power,
    Rational,
    SquaredPower,
}

/// Measure config file: `{"family": ..., "params": {...}, "dimension": N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub family: FamilyName,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    pub dimension: usize,
}

// ---------------------------------------------------------------------------
// Hypothesis audits

/// Log-spaced radial sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for AuditGrid {
    fn default() -> Self {
        Self { r_min: 1e-6, r_max: 1e3, per_decade: 200 }
    }
}

impl AuditGrid {
    pub fn radii(&self) -> Vec<f64> {
        let decades = (self.r_max / self.r_min).log10();
        let n = (decades * self.per_decade as f64).round() as usize;
        (0..=n).map(|i| self.r_min * 10f64.powf(i as f64 / self.per_decade as f64)).collect()
    }

    pub fn describe(&self) -> String {
        format!("log grid r in [{:e}, {:e}], {} per decade", self.r_min, self.r_max, self.per_decade)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonConstant {
    pub epsilon: f64,
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub name: String,
    pub passed: bool,
    pub measured_bound: f64,
    pub witness_point: Option<Vec<f64>>,
    pub grid_spec: String,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub constants: Vec<EpsilonConstant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub measure: String,
    pub dimension: usize,
    pub entries: Vec<HypothesisEntry>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn entry(&self, name: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{} (N={})\n", self.measure, self.dimension);
        s.push_str(&format!("{:<10} {:<7} {:>14}  witness\n", "hypothesis", "passed", "bound"));
        for e in &self.entries {
            let w = e.witness_point.as_ref().map(|p| format!("{p:?}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!("{:<10} {:<7} {:>14.6e}  {}\n", e.name, e.passed, e.measured_bound, w));
        }
        s
    }
}

/// Sample directions for radial audits: e₁, the diagonal, and a skew vector.
fn directions(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![crate::hermite::MultiIndex::axis(n, 0, 1).entries().iter().map(|&v| v as f64).collect()];
    if n > 1 {
        let d = 1.0 / (n as f64).sqrt();
        out.push(vec![d; n]);
        let skew: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let s = norm(&skew);
        out.push(skew.iter().map(|v| v / s).collect());
    }
    out
}

fn scaled(dir: &[f64], r: f64) -> Vec<f64> {
    dir.iter().map(|v| v * r).collect()
}

fn witness(m: &Measure, r: f64) -> Vec<f64> {
    scaled(&directions(m.dimension)[0], r)
}

/// Local power-law exponent of a positive radial quantity at the two smallest radii.
fn origin_exponent<F: Fn(f64) -> Result<f64>>(f: F, radii: &[f64]) -> Result<f64> {
    let (r1, r2) = (radii[0], radii[1]);
    let (a, b) = (f(r1)?.abs(), f(r2)?.abs());
    if a == 0.0 && b == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((b / a).ln() / (r2 / r1).ln())
}

/// (H1): μ ∈ H¹_loc with ∇μ/μ ∈ L^r_loc for some r > N, and μ bounded
/// below on compacts.
pub fn check_h1(m: &Measure, grid: &AuditGrid) -> Result<Vec<HypothesisEntry>> {
    let radii = grid.radii();
    let bmag = |r: f64| -> Result<f64> { Ok(m.radial_drift(r)?.g.abs() * r) };
    let p = origin_exponent(bmag, &radii)?;
    // |b| ~ r^p is in L^r_loc for some r > N iff p > −1
    let h1i = HypothesisEntry {
        name: "H1(i)".into(),
        passed: p > -1.0 && p.is_finite() || p == f64::INFINITY,
        measured_bound: p,
        witness_point: if p > -1.0 { None } else { Some(witness(m, radii[0])) },
        grid_spec: format!("origin exponent of |b| from {}", grid.describe()),
        constants: vec![],
    };
    // checked in log space so deep tails do not underflow to zero
    let mut min_log_mu = f64::INFINITY;
    let mut bad = None;
    for &r in radii.iter().filter(|&&r| r <= 10.0) {
        let v = m.normalization.ln() + m.profile.log_density(r);
        if !v.is_finite() && bad.is_none() {
            bad = Some(witness(m, r));
        }
        min_log_mu = min_log_mu.min(v);
    }
    let h1ii = HypothesisEntry {
        name: "H1(ii)".into(),
        passed: bad.is_none(),
        measured_bound: min_log_mu,
        witness_point: bad,
        grid_spec: format!("min of log mu over r <= 10 on {}", grid.describe()),
        constants: vec![],
    };
    Ok(vec![h1i, h1ii])
}

/// (H2)(i)–(iii). `r0` is the largest radius considered for the near-origin
/// bound |x|²U ≤ ¼|log|x||⁻²; the entry passes when the bound holds on an
/// initial segment (0, R*] of the grid spanning at least one decade, and
/// records R* as the measured bound.
pub fn check_h2(m: &Measure, r0: f64, grid: &AuditGrid) -> Result<Vec<HypothesisEntry>> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::Misuse(format!("H2(ii) audit needs 0 < R0 < 1, got {r0}")));
    }
    let radii = grid.radii();
    let n = m.dimension as f64;

    let bmag = |r: f64| -> Result<f64> { Ok(m.radial_drift(r)?.g.abs() * r) };
    let lap = |r: f64| -> Result<f64> {
        let d = m.radial_drift(r)?;
        Ok(n * d.g + d.h * r * r + d.g * d.g * r * r)
    };
    let pb = origin_exponent(bmag, &radii)?;
    let pl = origin_exponent(lap, &radii)?;
    let pl = if pl.is_nan() { f64::INFINITY } else { pl };
    // |∇√μ|² = ¼|b|²μ and Δμ = (Δμ/μ)μ are locally integrable iff the
    // origin exponents beat −N.
    let h2i_ok = 2.0 * pb > -n && pl > -n;
    let h2i = HypothesisEntry {
        name: "H2(i)".into(),
        passed: h2i_ok,
        measured_bound: (2.0 * pb).min(pl),
        witness_point: if h2i_ok { None } else { Some(witness(m, radii[0])) },
        grid_spec: format!("origin exponents of |b|^2 and Δμ/μ from {}", grid.describe()),
        constants: vec![],
    };

    let mut certified = 0.0;
    let mut first_violation = None;
    let mut worst = f64::NEG_INFINITY;
    for &r in radii.iter().filter(|&&r| r <= r0) {
        let u = potential_radial(m.dimension, r, m.radial_drift(r)?);
        let lhs = r * r * u;
        let rhs = 0.25 / (r.ln() * r.ln());
        worst = worst.max(lhs - rhs);
        if lhs <= rhs && first_violation.is_none() {
            certified = r;
        } else if lhs > rhs && first_violation.is_none() {
            first_violation = Some(r);
        }
    }
    let h2ii_ok = certified >= 10.0 * grid.r_min;
    let h2ii = HypothesisEntry {
        name: "H2(ii)".into(),
        passed: h2ii_ok,
        measured_bound: certified,
        witness_point: if h2ii_ok { None } else { first_violation.map(|r| witness(m, r)) },
        grid_spec: format!(
            "|x|^2 U <= 1/(4 log^2|x|) on (0, R*], R* <= R0 = {r0}; max excess {worst:e}; {}",
            grid.describe()
        ),
        constants: vec![],
    };

    let mut sup = f64::NEG_INFINITY;
    let mut bad = None;
    let far: Vec<f64> = radii.iter().copied().filter(|&r| r >= r0).collect();
    let mut values = Vec::with_capacity(far.len());
    for &r in &far {
        let u = potential_radial(m.dimension, r, m.radial_drift(r)?);
        if !u.is_finite() && bad.is_none() {
            bad = Some(witness(m, r));
        }
        sup = sup.max(u);
        values.push(u);
    }
    let decade = grid.per_decade.min(values.len() - 1);
    let (last, before) = (values[values.len() - 1], values[values.len() - 1 - decade]);
    let growing = last - before > 1e-3 * before.abs().max(1.0);
    if growing && bad.is_none() {
        bad = Some(witness(m, grid.r_max));
    }
    let h2iii = HypothesisEntry {
        name: "H2(iii)".into(),
        passed: bad.is_none(),
        measured_bound: sup,
        witness_point: bad,
        grid_spec: format!("sup U on [R0, r_max], growth over the last decade; {}", grid.describe()),
        constants: vec![],
    };
    Ok(vec![h2i, h2ii, h2iii])
}

/// (H3)(i)–(ii): for each ε the minimal sampled C_ε with
/// |∂_i b_j| ≤ ε/|x|² + C_ε|b| and |∂_ij b_k| ≤ ε/|x|³ + C_ε|b|.
pub fn check_h3(m: &Measure, epsilons: &[f64], grid: &AuditGrid) -> Result<Vec<HypothesisEntry>> {
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Misuse("H3 audit needs a non-empty list of positive epsilons".into()));
    }
    let radii = grid.radii();
    let dirs = directions(m.dimension);
    let mut samples = Vec::with_capacity(radii.len() * dirs.len());
    for &r in &radii {
        for d in &dirs {
            let x = scaled(d, r);
            let b = norm(&m.drift(&x)?);
            let j = m.drift_jacobian(&x)?;
            let t = m.drift_hessian(&x)?;
            let jmax = j.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            let tmax = t.iter().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            samples.push((x, r, b, jmax, tmax));
        }
    }
    let mut entries = Vec::new();
    for (name, power, pick) in [("H3(i)", 2, 0usize), ("H3(ii)", 3, 1usize)] {
        let mut constants = Vec::new();
        let mut witness_point = None;
        for &eps in epsilons {
            let mut c = 0.0f64;
            for (x, r, b, jmax, tmax) in &samples {
                let lhs = if pick == 0 { *jmax } else { *tmax };
                let need = lhs - eps / r.powi(power);
                if need <= 0.0 {
                    continue;
                }
                let ci = if *b > 0.0 { need / b } else { f64::INFINITY };
                if !ci.is_finite() && witness_point.is_none() {
                    witness_point = Some(x.clone());
                }
                c = c.max(ci);
            }
            constants.push(EpsilonConstant { epsilon: eps, constant: c });
        }
        let passed = constants.iter().all(|c| c.constant.is_finite());
        entries.push(HypothesisEntry {
            name: name.into(),
            passed,
            measured_bound: constants.iter().map(|c| c.constant).fold(0.0, f64::max),
            witness_point: if passed { None } else { witness_point },
            grid_spec: format!("{} directions on {}", dirs.len(), grid.describe()),
            constants,
        });
    }
    Ok(entries)
}

/// Full H1–H3 audit.
pub fn audit(m: &Measure, r0: f64, epsilons: &[f64], grid: &AuditGrid) -> Result<HypothesisReport> {
    let mut entries = check_h1(m, grid)?;
    entries.extend(check_h2(m, r0, grid)?);
    entries.extend(check_h3(m, epsilons, grid)?);
    Ok(HypothesisReport { measure: m.profile.label(), dimension: m.dimension, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Order-4 central difference along axis `k`.
    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], k: usize) -> f64 {
        let h = 1e-3 * (1.0 + norm(x));
        let at = |s: f64| {
            let mut y = x.to_vec();
            y[k] += s * h;
            f(&y)
        };
        (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
    }

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1.0)
    }

    #[test]
    fn potential_examples() {
        let g = Measure::gaussian(3).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5]] {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            assert!((compute_u(&g, &x).unwrap() - (1.5 - r2 / 4.0)).abs() < 1e-14);
        }
        for m in [3.0, 4.0, 1.5] {
            let n = 5;
            let p = Measure::power(n, m).unwrap();
            let x = [0.3, -0.7, 0.2, 0.9, 0.1];
            let r = norm(&x);
            let expect = -0.25 * m * m * r.powf(2.0 * m - 2.0) + 0.5 * m * (n as f64 + m - 2.0) * r.powf(m - 2.0);
            assert!(close(compute_u(&p, &x).unwrap(), expect, 1e-12));
        }
        let p = Measure::power(2, 3.0).unwrap();
        assert!(matches!(compute_u(&p, &[0.0, 0.0]), Err(Error::Singularity { .. })));
    }

    #[test]
    fn drift_examples() {
        let g = Measure::gaussian(1).unwrap();
        assert_eq!(g.drift(&[2.0]).unwrap(), vec![-2.0]);
        let p = Measure::power(1, 4.0).unwrap();
        assert!((p.drift(&[0.7]).unwrap()[0] + 4.0 * 0.7f64.powi(3)).abs() < 1e-14);
        let (a, b) = (2.0, 8.0);
        let q = Measure::rational(5, a, b).unwrap();
        let x = [0.4, -1.1, 0.3, 0.8, -0.2];
        let r = norm(&x);
        let factor = a * r.powf(a - 2.0) / (1.0 + r.powf(a)) - b * r.powf(b - 2.0) / (1.0 + r.powf(b));
        for (bi, xi) in q.drift(&x).unwrap().iter().zip(&x) {
            assert!((bi - factor * xi).abs() < 1e-13);
        }
    }

    #[test]
    fn parameter_guards() {
        assert!(matches!(Measure::rational(5, 2.0, 4.0), Err(Error::Domain(_))));
        assert!(matches!(Measure::rational(5, 2.0, 7.0), Err(Error::Domain(_))));
        assert!(matches!(Measure::power(2, 0.0), Err(Error::Domain(_))));
        assert!(matches!(Measure::squared_power(2, 1.0, 1.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_fields_match_finite_differences() {
        for n in [1, 2, 3] {
            for m in registry(n).unwrap() {
                let x: Vec<f64> = (0..n).map(|i| 0.6 - 0.35 * i as f64).collect();
                let logmu = |y: &[f64]| m.density(y).unwrap().ln();
                let b = m.drift(&x).unwrap();
                let j = m.drift_jacobian(&x).unwrap();
                let t = m.drift_hessian(&x).unwrap();
                for i in 0..n {
                    assert!(close(fd(logmu, &x, i), b[i], 1e-6), "{} b", m.label());
                    for k in 0..n {
                        let dbk = fd(|y: &[f64]| m.drift(y).unwrap()[k], &x, i);
                        assert!(close(dbk, j[i][k], 1e-6), "{} J", m.label());
                        for l in 0..n {
                            let djkl = fd(|y: &[f64]| m.drift_jacobian(y).unwrap()[k][l], &x, i);
                            assert!(close(djkl, t[i][k][l], 1e-6), "{} T", m.label());
                        }
                    }
                }
                // Δμ/μ and ∇(Δμ)/μ
                let lap_fd: f64 = (0..n)
                    .map(|i| fd(|y: &[f64]| fd(|z: &[f64]| m.density(z).unwrap(), y, i), &x, i))
                    .sum::<f64>()
                    / m.density(&x).unwrap();
                assert!(close(lap_fd, m.laplacian_ratio(&x).unwrap(), 1e-5), "{} lap", m.label());
                let gl = m.grad_laplacian_ratio(&x).unwrap();
                for i in 0..n {
                    let v = fd(|y: &[f64]| m.laplacian_ratio(y).unwrap() * m.density(y).unwrap(), &x, i)
                        / m.density(&x).unwrap();
                    assert!(close(v, gl[i], 1e-6), "{} grad lap", m.label());
                }
            }
        }
    }

    #[test]
    fn radial_invariance_under_rotation() {
        let m = Measure::rational(3, 2.0, 8.0).unwrap();
        let x = [0.3, -0.4, 1.2];
        // rotation about the z axis by 0.7 rad
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let y = [c * x[0] - s * x[1], s * x[0] + c * x[1], x[2]];
        assert!((m.density(&x).unwrap() - m.density(&y).unwrap()).abs() < 1e-10);
        assert!((m.laplacian_ratio(&x).unwrap() - m.laplacian_ratio(&y).unwrap()).abs() < 1e-10);
        assert!((compute_u(&m, &x).unwrap() - compute_u(&m, &y).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn normalization_is_unit_mass() {
        for n in [1, 2, 3, 5] {
            for m in registry(n).unwrap() {
                let tol = Tolerance::new(1e-14, 1e-12);
                let f = |r: f64| m.density_radial(r);
                let a = radial_integral(n, f, 30.0, &[0.5, 1.0, 2.0, 5.0], tol).unwrap().value;
                let nm1 = (n - 1) as i32;
                let tail = integrate_to_infinity(|r| r.powi(nm1) * m.density_radial(30.0 * r), tol).unwrap().value
                    * 30f64.powi(n as i32)
                    * crate::quad::sphere_area(n);
                assert!((a + tail - 1.0).abs() < 1e-8, "{}: {}", m.label(), a + tail);
            }
        }
    }

    #[test]
    fn config_parsing_is_strict() {
        let c: MeasureConfig = serde_json::from_str(r#"{"family":"power","params":{"m":4},"dimension":1}"#).unwrap();
        let m = Measure::from_config(&c).unwrap();
        assert_eq!(m.family(), Some(Family::Power { m: 4.0 }));
        assert!(serde_json::from_str::<MeasureConfig>(r#"{"family":"power","params":{"m":4},"dimension":1,"x":0}"#).is_err());
        let bad: MeasureConfig = serde_json::from_str(r#"{"family":"power","params":{"m":4,"q":1},"dimension":1}"#).unwrap();
        assert!(matches!(Measure::from_config(&bad), Err(Error::Config(_))));
        let rej: MeasureConfig =
            serde_json::from_str(r#"{"family":"rational","params":{"alpha":2,"beta":4},"dimension":5}"#).unwrap();
        assert!(matches!(Measure::from_config(&rej), Err(Error::Domain(_))));
    }

    /// Synthetic density r^{−a} e^{−r²/2} whose potential behaves like 1/r²
    /// at the origin (a = 3 − √5 in N = 5).
    #[derive(Debug)]
    struct InverseSquarePotential {
        a: f64,
    }

    impl RadialProfile for InverseSquarePotential {
        fn log_density(&self, r: f64) -> f64 {
            -self.a * r.ln() - 0.5 * r * r
        }
        fn drift(&self, r: f64) -> Result<RadialDrift> {
            let a = self.a;
            Ok(RadialDrift { g: -a / (r * r) - 1.0, h: 2.0 * a / r.powi(4), k: -8.0 * a / r.powi(6) })
        }
        fn singular_at_origin(&self) -> bool {
            true
        }
        fn label(&self) -> String {
            "inverse-square potential".into()
        }
    }

    #[test]
    fn h2_audits() {
        let grid = AuditGrid::default();
        let g = Measure::gaussian(1).unwrap();
        let e = check_h2(&g, 0.5, &grid).unwrap();
        assert!(e.iter().all(|e| e.passed), "{e:?}");
        assert!((e[1].measured_bound - 0.5).abs() < 0.01);

        let p = Measure::power(3, 4.0).unwrap();
        assert!(check_h2(&p, 0.5, &grid).unwrap().iter().all(|e| e.passed));

        let bad = Measure::from_profile(5, Arc::new(InverseSquarePotential { a: 3.0 - 5f64.sqrt() })).unwrap();
        let x = [0.01, 0.0, 0.0, 0.0, 0.0];
        assert!((compute_u(&bad, &x).unwrap() * 1e-4 - 1.0).abs() < 1e-3);
        let e = check_h2(&bad, 0.5, &grid).unwrap();
        let h2ii = &e[1];
        assert!(!h2ii.passed);
        assert!(h2ii.witness_point.is_some());

        assert!(matches!(check_h2(&g, 1.5, &grid), Err(Error::Misuse(_))));
    }

    #[test]
    fn h3_audits() {
        let grid = AuditGrid { per_decade: 50, ..AuditGrid::default() };
        let eps = [1.0, 0.1, 0.01];
        for m in registry(5).unwrap() {
            let e = check_h3(&m, &eps, &grid).unwrap();
            assert!(e.iter().all(|e| e.passed), "{}: {e:?}", m.label());
        }
        let g = Measure::gaussian(2).unwrap();
        let e = check_h3(&g, &[0.01], &grid).unwrap();
        // sup_r (1 − ε/r²)/r = (2/3)/√(3ε)
        let expected = (2.0 / 3.0) / (3.0f64 * 0.01).sqrt();
        assert!((e[0].measured_bound - expected).abs() < 0.02 * expected, "{}", e[0].measured_bound);
        assert_eq!(e[1].measured_bound, 0.0);
        assert!(check_h3(&g, &[], &grid).is_err());
    }

    #[test]
    fn full_audit_report_renders() {
        let m = Measure::squared_power(1, 1.0, 1.0, 1.5).unwrap();
        let rep = audit(&m, 0.5, &[1.0, 0.1], &AuditGrid { per_decade: 40, ..AuditGrid::default() }).unwrap();
        assert!(rep.all_passed(), "{}", rep.to_table());
        assert!(rep.to_table().contains("H3(ii)"));
    }
}
