//! Weighted Hardy and Rellich type inequalities on trial suites, their
//! empirical constants, and the Rayleigh quotient probe above the Rellich
//! constant.
//!
//! Radial trials carry their profile as a function on [`Jet`]s so every
//! derivative up to fourth order is exact. For u(x) = g(|x|) and drift
//! b = G(r)x the radial identities used are
//!
//! ```text
//! Lu      = ℓ = g'' + (N−1)g'/r + G r g'
//! |∇Lu|²  = ℓ'²
//! |L∇u|²  = (ℓ' − (G + G'r) g')²
//! Au      = ℓ'' + (N−1)ℓ'/r + G r ℓ'
//! |D²u|²  = g''² + (N−1)(g'/r)²
//! |D³u|²  = A² + 6AB + (3N+6)B²,  P = g'' − g'/r, B = P/r, A = P' − 2P/r
//! ```

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::SpectralFunction;
use crate::jet::Jet;
use crate::measures::Measure;
use crate::operator::apply_l_spectral;
use crate::quad::{integrate_points, integrate_toward_origin, sphere_area, Tolerance};

/// Best Hardy constant ((N−2)/2)².
pub fn c0(dimension: usize) -> f64 {
    let h = (dimension as f64 - 2.0) / 2.0;
    h * h
}

/// C2 = C0 − 1.
pub fn c2(dimension: usize) -> f64 {
    c0(dimension) - 1.0
}

/// Optimal Rellich constant (C0 − 1)² = (N(N−4)/4)².
pub fn rellich_constant(dimension: usize) -> f64 {
    c2(dimension).powi(2)
}

/// Whether a potential coefficient c stays within the Rellich constant.
pub fn rellich_feasible(c: f64, dimension: usize) -> bool {
    c <= rellich_constant(dimension)
}

type Profile = dyn Fn(Jet) -> Jet + Send + Sync;

/// A radial trial u(x) = g(|x|).
#[derive(Clone)]
pub struct RadialTrial {
    name: String,
    profile: Arc<Profile>,
    cuts: Vec<f64>,
    support: Option<f64>,
}

impl fmt::Debug for RadialTrial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialTrial").field("name", &self.name).field("support", &self.support).finish()
    }
}

const DEFAULT_CUTS: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

impl RadialTrial {
    pub fn new<F: Fn(Jet) -> Jet + Send + Sync + 'static>(name: impl Into<String>, g: F) -> Self {
        Self { name: name.into(), profile: Arc::new(g), cuts: DEFAULT_CUTS.to_vec(), support: None }
    }

    /// Extra panel boundaries for the radial quadrature.
    pub fn with_cuts(mut self, cuts: &[f64]) -> Self {
        self.cuts.extend_from_slice(cuts);
        self.cuts.sort_by(f64::total_cmp);
        self.cuts.dedup();
        self
    }

    /// Declares g ≡ 0 for r ≥ `radius`.
    pub fn with_support(mut self, radius: f64) -> Self {
        self.support = Some(radius);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn jet(&self, r: f64) -> Jet {
        (self.profile)(Jet::var(r))
    }

    pub fn value(&self, r: f64) -> f64 {
        self.jet(r).value()
    }

    /// e^{−a r²}
    pub fn gaussian(a: f64) -> Self {
        Self::new(format!("exp(-{a}r^2)"), move |r| (r * r * -a).exp())
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| Jet::constant(c))
    }

    /// r^p
    pub fn power(p: f64) -> Self {
        Self::new(format!("r^{p}"), move |r| r.powf(p))
    }

    /// u(x)/|x|
    pub fn divided_by_r(&self) -> Self {
        let inner = Arc::clone(&self.profile);
        Self {
            name: format!("({})/r", self.name),
            profile: Arc::new(move |r| inner(r) / r),
            cuts: self.cuts.clone(),
            support: self.support,
        }
    }

    /// The standard ten-member radial suite.
    pub fn suite() -> Vec<RadialTrial> {
        vec![
            Self::gaussian(0.25),
            Self::gaussian(0.5),
            Self::gaussian(1.0),
            Self::new("1/(1+r^2)", |r| (r * r + 1.0).recip()),
            Self::new("(1+r^2)^-2", |r| (r * r + 1.0).powi(-2)),
            Self::new("r^2 exp(-r^2/2)", |r| r * r * (r * r * -0.5).exp()),
            Self::new("(1-r^2/2)exp(-r^2/4)", |r| (r * r * -0.5 + 1.0) * (r * r * -0.25).exp()),
            Self::new("cos(r)exp(-r^2/2)", |r| r.cos() * (r * r * -0.5).exp()),
            Self::gaussian(0.125),
            Self::constant(1.0),
        ]
    }
}

/// Pointwise radial quantities of a trial at radius r.
#[derive(Debug, Clone, Copy)]
struct Local {
    u2: f64,
    grad2: f64,
    hess2: f64,
    d3: f64,
    lu2: f64,
    grad_lu2: f64,
    l_grad_u2: f64,
    au2: f64,
    bu2: f64,
}

fn local(m: &Measure, trial: &RadialTrial, r: f64) -> Result<Local> {
    let nm1 = m.dimension() as f64 - 1.0;
    let n = m.dimension() as f64;
    let j = trial.jet(r);
    let [u, a, a1, a2, a3] = j.d;
    let dr = m.radial_drift(r)?;
    let (gd, gd1, gd2) = (dr.g, dr.h * r, dr.h + dr.k * r * r);
    let ell = a1 + nm1 * a / r + gd * r * a;
    let ell1 = a2 + nm1 * (a1 / r - a / (r * r)) + gd1 * r * a + gd * a + gd * r * a1;
    let ell2 = a3
        + nm1 * (a2 / r - 2.0 * a1 / (r * r) + 2.0 * a / r.powi(3))
        + gd2 * r * a
        + 2.0 * gd1 * (a + r * a1)
        + gd * (2.0 * a1 + r * a2);
    let au = ell2 + nm1 * ell1 / r + gd * r * ell1;
    let p = a1 - a / r;
    let p1 = a2 - a1 / r + a / (r * r);
    let bb = p / r;
    let aa = p1 - 2.0 * p / r;
    Ok(Local {
        u2: u * u,
        grad2: a * a,
        hess2: a1 * a1 + nm1 * (a / r).powi(2),
        d3: aa * aa + 6.0 * aa * bb + (3.0 * n + 6.0) * bb * bb,
        lu2: ell * ell,
        grad_lu2: ell1 * ell1,
        l_grad_u2: (ell1 - (gd + gd1 * r) * a).powi(2),
        au2: au * au,
        bu2: (gd * r * u).powi(2),
    })
}

fn tolerance() -> Tolerance {
    Tolerance::new(1e-15, 1e-11).with_max_intervals(2000)
}

/// ∫ q(u)(x) dμ(x) for a radial quantity q.
fn radial_mu_integral<Q: Fn(&Local, f64) -> f64 + Sync>(m: &Measure, trial: &RadialTrial, q: Q) -> Result<f64> {
    let nm1 = m.dimension() as i32 - 1;
    let w = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if let Some(s) = trial.support {
            if r >= s {
                return 0.0;
            }
        }
        match local(m, trial, r) {
            Ok(l) => {
                let v = q(&l, r);
                if v == 0.0 {
                    0.0
                } else {
                    r.powi(nm1) * m.density_radial(r) * v
                }
            }
            Err(_) => f64::NAN,
        }
    };
    let mut cuts: Vec<f64> = trial.cuts.clone();
    if let Some(s) = trial.support {
        cuts.retain(|&c| c < s);
        cuts.push(s);
    }
    let tol = tolerance();
    let inner = integrate_toward_origin(w, cuts[0], tol)?;
    let mut total = inner.value;
    if cuts.len() >= 2 {
        total += integrate_points(w, &cuts, tol).value;
    }
    if trial.support.is_none() {
        let hi = *cuts.last().unwrap();
        let tail = integrate_toward_origin(|v: f64| if v <= 0.0 { 0.0 } else { hi * w(hi / v) / (v * v) }, 1.0, tol)?;
        total += tail.value;
    }
    if !total.is_finite() {
        return Err(Error::Integrability(format!("non-finite integral for {}", trial.name)));
    }
    Ok(sphere_area(m.dimension()) * total)
}

/// A trial function for the inequality suites.
#[derive(Debug, Clone)]
pub enum Trial {
    Radial(RadialTrial),
    /// Hermite expansion; only meaningful against the Gaussian measure.
    Spectral { name: String, function: SpectralFunction },
}

impl Trial {
    pub fn name(&self) -> &str {
        match self {
            Trial::Radial(r) => r.name(),
            Trial::Spectral { name, .. } => name,
        }
    }
}

impl From<RadialTrial> for Trial {
    fn from(r: RadialTrial) -> Self {
        Trial::Radial(r)
    }
}

/// L²(μ) norms of a trial that do not involve singular weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialNorms {
    pub u2: f64,
    pub grad2: f64,
    pub hess2: f64,
    pub lu2: f64,
    pub bu2: f64,
}

pub fn trial_norms(m: &Measure, trial: &Trial) -> Result<TrialNorms> {
    match trial {
        Trial::Radial(t) => Ok(TrialNorms {
            u2: radial_mu_integral(m, t, |l, _| l.u2)?,
            grad2: radial_mu_integral(m, t, |l, _| l.grad2)?,
            hess2: radial_mu_integral(m, t, |l, _| l.hess2)?,
            lu2: radial_mu_integral(m, t, |l, _| l.lu2)?,
            bu2: radial_mu_integral(m, t, |l, _| l.bu2)?,
        }),
        Trial::Spectral { function, .. } => {
            if !m.is_gaussian() {
                return Err(Error::Misuse("spectral trials need the Gaussian measure".into()));
            }
            if function.dimension() != m.dimension() {
                return Err(Error::DimensionMismatch { expected: m.dimension(), got: function.dimension() });
            }
            let bu2 = (0..function.dimension()).map(|k| function.multiply_coordinate(k).norm_sq()).sum();
            Ok(TrialNorms {
                u2: function.norm_sq(),
                grad2: function.gradient_norm_sq(),
                hess2: function.hessian_norm_sq(),
                lu2: apply_l_spectral(function).norm_sq(),
                bu2,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Constants {
    pub c0: f64,
    pub c2: f64,
    pub c1: Option<f64>,
    pub epsilon: Option<f64>,
    /// The constant of estimates stated as lhs ≤ C·(...).
    pub c: Option<f64>,
}

impl Constants {
    fn for_dimension(n: usize) -> Self {
        Self { c0: c0(n), c2: c2(n), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constants: Constants,
    /// rhs − lhs
    pub margin: f64,
    pub passed: bool,
    pub tolerance: f64,
    pub trial: String,
    pub measure: String,
    pub dimension: usize,
}

impl InequalityReport {
    fn new(name: &str, lhs: f64, rhs: f64, constants: Constants, trial: &str, m: &Measure) -> Self {
        let tolerance = 1e-9 * lhs.abs().max(rhs.abs()).max(1e-12);
        let margin = rhs - lhs;
        Self {
            name: name.into(),
            lhs,
            rhs,
            constants,
            margin,
            passed: margin.is_finite() && margin >= -tolerance,
            tolerance,
            trial: trial.into(),
            measure: m.label(),
            dimension: m.dimension(),
        }
    }

    pub const CSV_HEADER: &'static str = "name,trial,measure,dimension,lhs,rhs,margin,tolerance,passed,c0,c1,c2,epsilon,c";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_default();
        format!(
            "{},\"{}\",{},{},{:e},{:e},{:e},{:e},{},{},{},{},{},{}",
            self.name,
            self.trial,
            self.measure,
            self.dimension,
            self.lhs,
            self.rhs,
            self.margin,
            self.tolerance,
            self.passed,
            self.constants.c0,
            opt(self.constants.c1),
            self.constants.c2,
            opt(self.constants.epsilon),
            opt(self.constants.c)
        )
    }
}

pub fn reports_to_csv(reports: &[InequalityReport]) -> String {
    let mut s = String::from(InequalityReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn require_dimension(m: &Measure, min: usize, what: &str) -> Result<()> {
    if m.dimension() < min {
        return Err(Error::Domain(format!("{what} needs N >= {min}, got N = {}", m.dimension())));
    }
    Ok(())
}

struct HardyParts {
    weighted: f64,
    grad2: f64,
    u2: f64,
}

fn hardy_parts(m: &Measure, u: &RadialTrial) -> Result<HardyParts> {
    Ok(HardyParts {
        weighted: radial_mu_integral(m, u, |l, r| l.u2 / (r * r))?,
        grad2: radial_mu_integral(m, u, |l, _| l.grad2)?,
        u2: radial_mu_integral(m, u, |l, _| l.u2)?,
    })
}

/// C0∫u²/|x|² ≤ ∫|∇u|² + C1∫u².
pub fn hardy_report(m: &Measure, u: &RadialTrial, c1: f64) -> Result<InequalityReport> {
    require_dimension(m, 3, "Hardy inequality")?;
    let p = hardy_parts(m, u)?;
    let k = Constants { c1: Some(c1), ..Constants::for_dimension(m.dimension()) };
    Ok(InequalityReport::new("hardy", k.c0 * p.weighted, p.grad2 + c1 * p.u2, k, u.name(), m))
}

/// Smallest C1 ≥ 0 making the Hardy inequality hold for `u`.
pub fn hardy_minimal_c1(m: &Measure, u: &RadialTrial) -> Result<f64> {
    require_dimension(m, 3, "Hardy inequality")?;
    let p = hardy_parts(m, u)?;
    Ok(((c0(m.dimension()) * p.weighted - p.grad2) / p.u2).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    /// Empirical constant shared by every report.
    pub constant: f64,
    pub reports: Vec<InequalityReport>,
}

impl SuiteOutcome {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

/// Hardy inequality on a suite with the minimal C1 over that suite.
pub fn hardy_suite(m: &Measure, suite: &[RadialTrial]) -> Result<SuiteOutcome> {
    let needed: Vec<f64> = suite.par_iter().map(|u| hardy_minimal_c1(m, u)).collect::<Result<_>>()?;
    let constant = max_of(&needed);
    let reports = suite.par_iter().map(|u| hardy_report(m, u, constant)).collect::<Result<_>>()?;
    Ok(SuiteOutcome { constant, reports })
}

struct RellichParts {
    weighted: f64,
    lu2: f64,
    grad2: f64,
    u2: f64,
}

fn rellich_parts(m: &Measure, u: &RadialTrial) -> Result<RellichParts> {
    Ok(RellichParts {
        weighted: radial_mu_integral(m, u, |l, r| l.u2 / r.powi(4))?,
        lu2: radial_mu_integral(m, u, |l, _| l.lu2)?,
        grad2: radial_mu_integral(m, u, |l, _| l.grad2)?,
        u2: radial_mu_integral(m, u, |l, _| l.u2)?,
    })
}

/// C2²∫u²/|x|⁴ ≤ ∫(Lu)² + (2C2C1/C0)∫|∇u|² + (2C2C1²/C0)∫u².
pub fn rellich_report(m: &Measure, u: &RadialTrial, c1: f64) -> Result<InequalityReport> {
    require_dimension(m, 5, "Rellich inequality")?;
    let p = rellich_parts(m, u)?;
    let k = Constants { c1: Some(c1), ..Constants::for_dimension(m.dimension()) };
    let rhs = p.lu2 + 2.0 * k.c2 * c1 / k.c0 * p.grad2 + 2.0 * k.c2 * c1 * c1 / k.c0 * p.u2;
    Ok(InequalityReport::new("rellich", k.c2 * k.c2 * p.weighted, rhs, k, u.name(), m))
}

/// (C2² − ε)∫u²/|x|⁴ ≤ ∫(Lu)² + ((C2C1)²/ε)∫u², one report per ε.
pub fn rellich_epsilon_reports(m: &Measure, u: &RadialTrial, c1: f64, epsilons: &[f64]) -> Result<Vec<InequalityReport>> {
    require_dimension(m, 5, "Rellich inequality")?;
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Domain(format!("epsilon must be positive, got {e}")));
    }
    let p = rellich_parts(m, u)?;
    let base = Constants { c1: Some(c1), ..Constants::for_dimension(m.dimension()) };
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let k = Constants { epsilon: Some(eps), ..base };
            let lhs = (k.c2 * k.c2 - eps) * p.weighted;
            let rhs = p.lu2 + (k.c2 * c1).powi(2) / eps * p.u2;
            InequalityReport::new("rellich_epsilon", lhs, rhs, k, u.name(), m)
        })
        .collect())
}

pub const RELLICH_EPSILONS: [f64; 3] = [1.0, 0.1, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RellichSuite {
    pub c1: f64,
    pub hardy: SuiteOutcome,
    pub reports: Vec<InequalityReport>,
    pub epsilon_reports: Vec<InequalityReport>,
}

impl RellichSuite {
    pub fn all_passed(&self) -> bool {
        self.hardy.all_passed() && self.reports.iter().chain(&self.epsilon_reports).all(|r| r.passed)
    }
}

/// Rellich inequalities on a suite, with C1 the empirical Hardy constant
/// over the suite together with every u/|x|.
pub fn rellich_suite(m: &Measure, suite: &[RadialTrial], epsilons: &[f64]) -> Result<RellichSuite> {
    require_dimension(m, 5, "Rellich inequality")?;
    let mut hardy_trials = suite.to_vec();
    hardy_trials.extend(suite.iter().map(RadialTrial::divided_by_r));
    let hardy = hardy_suite(m, &hardy_trials)?;
    let c1 = hardy.constant;
    let reports = suite.par_iter().map(|u| rellich_report(m, u, c1)).collect::<Result<_>>()?;
    let eps: Vec<Vec<InequalityReport>> =
        suite.par_iter().map(|u| rellich_epsilon_reports(m, u, c1, epsilons)).collect::<Result<_>>()?;
    Ok(RellichSuite { c1, hardy, reports, epsilon_reports: eps.into_iter().flatten().collect() })
}

/// ‖∇u‖² ≤ ε‖D²u‖² + C_ε‖u‖².
pub fn interpolation_report(m: &Measure, u: &Trial, eps: f64, c_eps: f64) -> Result<InequalityReport> {
    let n = trial_norms(m, u)?;
    let k = Constants { epsilon: Some(eps), c: Some(c_eps), ..Constants::for_dimension(m.dimension()) };
    Ok(InequalityReport::new("interpolation", n.grad2, eps * n.hess2 + c_eps * n.u2, k, u.name(), m))
}

fn interpolation_needed(n: &TrialNorms, eps: f64) -> f64 {
    if n.u2 == 0.0 {
        return 0.0;
    }
    ((n.grad2 - eps * n.hess2) / n.u2).max(0.0)
}

/// Minimal C_ε over the suite for each ε, with the reports it produces.
pub fn interpolation_suite(m: &Measure, suite: &[Trial], epsilons: &[f64]) -> Result<Vec<SuiteOutcome>> {
    let norms: Vec<TrialNorms> = suite.par_iter().map(|u| trial_norms(m, u)).collect::<Result<_>>()?;
    Ok(epsilons
        .iter()
        .map(|&eps| {
            let need: Vec<f64> = norms.iter().map(|n| interpolation_needed(n, eps)).collect();
            let constant = max_of(&need);
            let k = Constants { epsilon: Some(eps), c: Some(constant), ..Constants::for_dimension(m.dimension()) };
            let reports = suite
                .iter()
                .zip(&norms)
                .map(|(u, n)| {
                    InequalityReport::new("interpolation", n.grad2, eps * n.hess2 + constant * n.u2, k, u.name(), m)
                })
                .collect();
            SuiteOutcome { constant, reports }
        })
        .collect())
}

/// ‖D²u‖/(‖Lu‖ + ‖u‖) for one trial.
pub fn calderon_zygmund_ratio(m: &Measure, u: &Trial) -> Result<f64> {
    let n = trial_norms(m, u)?;
    let den = n.lu2.sqrt() + n.u2.sqrt();
    Ok(if den == 0.0 { 0.0 } else { n.hess2.sqrt() / den })
}

/// Max over the suite of ‖D²u‖/(‖Lu‖ + ‖u‖).
pub fn calderon_zygmund_constant(m: &Measure, suite: &[Trial]) -> Result<f64> {
    let r: Vec<f64> = suite.par_iter().map(|u| calderon_zygmund_ratio(m, u)).collect::<Result<_>>()?;
    Ok(max_of(&r))
}

/// ‖b u‖ ≤ C(‖∇u‖ + ‖u‖).
pub fn drift_bound_report(m: &Measure, u: &Trial, c: f64) -> Result<InequalityReport> {
    let n = trial_norms(m, u)?;
    let k = Constants { c: Some(c), ..Constants::for_dimension(m.dimension()) };
    Ok(InequalityReport::new("drift_bound", n.bu2.sqrt(), c * (n.grad2.sqrt() + n.u2.sqrt()), k, u.name(), m))
}

/// ‖b u‖/(‖∇u‖ + ‖u‖).
pub fn drift_bound_ratio(m: &Measure, u: &Trial) -> Result<f64> {
    let n = trial_norms(m, u)?;
    let den = n.grad2.sqrt() + n.u2.sqrt();
    Ok(if den == 0.0 { 0.0 } else { n.bu2.sqrt() / den })
}

pub fn drift_bound_suite(m: &Measure, suite: &[Trial]) -> Result<SuiteOutcome> {
    let r: Vec<f64> = suite.par_iter().map(|u| drift_bound_ratio(m, u)).collect::<Result<_>>()?;
    let constant = max_of(&r);
    let reports = suite.par_iter().map(|u| drift_bound_report(m, u, constant)).collect::<Result<_>>()?;
    Ok(SuiteOutcome { constant, reports })
}

/// Weighted estimates with derivatives of order up to three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HigherRellich {
    /// ∫u²/|x|⁴ ≤ C‖u‖²_{H²}
    Stima2,
    /// ∫|∇u|²/|x|⁴ ≤ C(∫|∇Lu|² + ‖u‖²_{H²})
    FirstDerivative,
    /// ∫u²/|x|⁶ ≤ C(∫|L∇u|² + ‖u‖²_{H²})
    Stima3,
    /// ∫|∇u|²/|x|⁶ ≤ C(∫|Au|² + ‖u‖²_{H³})
    SecondDerivative,
    /// ∫|D²u|²/|x|⁴ ≤ C(∫|Au|² + ‖u‖²_{H³})
    ThirdDerivative,
}

impl HigherRellich {
    pub const ALL: [HigherRellich; 5] = [
        HigherRellich::Stima2,
        HigherRellich::FirstDerivative,
        HigherRellich::Stima3,
        HigherRellich::SecondDerivative,
        HigherRellich::ThirdDerivative,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            HigherRellich::Stima2 => "hardy_stima2",
            HigherRellich::FirstDerivative => "hardy_1derivative",
            HigherRellich::Stima3 => "hardy_stima3",
            HigherRellich::SecondDerivative => "hardy_2derivative",
            HigherRellich::ThirdDerivative => "hardy_3derivative",
        }
    }

    pub fn min_dimension(&self) -> usize {
        match self {
            HigherRellich::Stima2 | HigherRellich::FirstDerivative => 5,
            _ => 7,
        }
    }

    /// Estimates available in dimension N.
    pub fn applicable(dimension: usize) -> Vec<HigherRellich> {
        Self::ALL.into_iter().filter(|e| dimension >= e.min_dimension()).collect()
    }
}

/// (lhs, bracket) with the estimate reading lhs ≤ C·bracket.
pub fn higher_rellich_parts(m: &Measure, u: &RadialTrial, which: HigherRellich) -> Result<(f64, f64)> {
    require_dimension(m, which.min_dimension(), which.name())?;
    let h2 = || -> Result<f64> { radial_mu_integral(m, u, |l, _| l.u2 + l.grad2 + l.hess2) };
    let h3 = || -> Result<f64> { radial_mu_integral(m, u, |l, _| l.u2 + l.grad2 + l.hess2 + l.d3) };
    Ok(match which {
        HigherRellich::Stima2 => (radial_mu_integral(m, u, |l, r| l.u2 / r.powi(4))?, h2()?),
        HigherRellich::FirstDerivative => (
            radial_mu_integral(m, u, |l, r| l.grad2 / r.powi(4))?,
            radial_mu_integral(m, u, |l, _| l.grad_lu2)? + h2()?,
        ),
        HigherRellich::Stima3 => (
            radial_mu_integral(m, u, |l, r| l.u2 / r.powi(6))?,
            radial_mu_integral(m, u, |l, _| l.l_grad_u2)? + h2()?,
        ),
        HigherRellich::SecondDerivative => (
            radial_mu_integral(m, u, |l, r| l.grad2 / r.powi(6))?,
            radial_mu_integral(m, u, |l, _| l.au2)? + h3()?,
        ),
        HigherRellich::ThirdDerivative => (
            radial_mu_integral(m, u, |l, r| l.hess2 / r.powi(4))?,
            radial_mu_integral(m, u, |l, _| l.au2)? + h3()?,
        ),
    })
}

pub fn higher_rellich_report(m: &Measure, u: &RadialTrial, which: HigherRellich, c: f64) -> Result<InequalityReport> {
    let (lhs, bracket) = higher_rellich_parts(m, u, which)?;
    let k = Constants { c: Some(c), ..Constants::for_dimension(m.dimension()) };
    Ok(InequalityReport::new(which.name(), lhs, c * bracket, k, u.name(), m))
}

/// Every estimate applicable in dimension N, each reported with its minimal
/// empirical constant over the suite.
pub fn higher_rellich_reports(m: &Measure, suite: &[RadialTrial]) -> Result<Vec<SuiteOutcome>> {
    require_dimension(m, 5, "higher order estimates")?;
    HigherRellich::applicable(m.dimension())
        .into_iter()
        .map(|which| {
            let parts: Vec<(f64, f64)> =
                suite.par_iter().map(|u| higher_rellich_parts(m, u, which)).collect::<Result<_>>()?;
            let constant = parts.iter().map(|(l, b)| l / b).fold(0.0, f64::max);
            let k = Constants { c: Some(constant), ..Constants::for_dimension(m.dimension()) };
            let reports = suite
                .iter()
                .zip(&parts)
                .map(|(u, (l, b))| InequalityReport::new(which.name(), *l, constant * b, k, u.name(), m))
                .collect();
            Ok(SuiteOutcome { constant, reports })
        })
        .collect()
}

/// Rayleigh quotient of a spliced power trial against c|x|^{−4}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighProbe {
    pub c: f64,
    pub dimension: usize,
    pub gamma: f64,
    pub gamma1: f64,
    pub n: u64,
    pub alpha_n: f64,
    pub beta_n: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub lambda1_estimate: f64,
}

/// Checks the admissible box for (γ, γ1) in dimension N.
pub fn check_rayleigh_parameters(dimension: usize, gamma: f64, gamma1: f64) -> Result<()> {
    let h = dimension as f64 / 2.0;
    let nn = dimension as f64;
    if !(gamma > 1.0 - h && gamma <= 2.0 - h) {
        return Err(Error::Domain(format!("gamma = {gamma} outside (1 - N/2, 2 - N/2]")));
    }
    if !(gamma1 > 2.0 - h && gamma1 < 0.0) {
        return Err(Error::Domain(format!("gamma1 = {gamma1} outside (2 - N/2, 0)")));
    }
    if !(2.0 * gamma - 4.0 <= -nn && -nn < 2.0 * gamma - 2.0) {
        return Err(Error::Domain(format!("gamma = {gamma} violates 2γ − 4 ≤ −N < 2γ − 2")));
    }
    Ok(())
}

/// (α_n, β_n) making α + β r^{γ1} meet r^γ with matching value and slope
/// at r = 1/n.
pub fn splice_coefficients(gamma: f64, gamma1: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let beta = gamma / gamma1 * nf.powf(gamma1 - gamma);
    let alpha = nf.powf(-gamma) - beta * nf.powf(-gamma1);
    (alpha, beta)
}

/// Quintic smoothstep cutoff: 1 on [0, 1], 0 beyond 2.
pub fn cutoff(r: Jet) -> Jet {
    let s = r - 1.0;
    let s3 = s * s * s;
    -(s3 * (s * (s * 6.0 - 15.0) + 10.0)) + 1.0
}

/// The spliced trial φ_n.
pub fn rayleigh_trial(gamma: f64, gamma1: f64, n: u64) -> RadialTrial {
    let (alpha, beta) = splice_coefficients(gamma, gamma1, n);
    let r0 = 1.0 / n as f64;
    let mut cuts = vec![r0, 1.0, 2.0];
    let mut d = 1.0;
    while d * 0.1 > r0 {
        d *= 0.1;
        cuts.push(d);
    }
    RadialTrial {
        name: format!("phi_n(n={n}, gamma={gamma}, gamma1={gamma1})"),
        profile: Arc::new(move |r: Jet| {
            let x = r.value();
            if x < r0 {
                r.powf(gamma1) * beta + alpha
            } else if x < 1.0 {
                r.powf(gamma)
            } else if x < 2.0 {
                r.powf(gamma) * cutoff(r)
            } else {
                Jet::constant(0.0)
            }
        }),
        cuts: Vec::new(),
        support: None,
    }
    .with_cuts(&cuts)
    .with_support(2.0)
}

/// λ₁(φ_n) = (∫|Lφ_n|² − c∫φ_n²/|x|⁴)/(∫φ_n² + ∫|∇φ_n|²).
pub fn rayleigh_lambda1(m: &Measure, c: f64, gamma: f64, gamma1: f64, n: u64) -> Result<RayleighProbe> {
    require_dimension(m, 5, "Rayleigh probe")?;
    check_rayleigh_parameters(m.dimension(), gamma, gamma1)?;
    if !(c > 0.0) {
        return Err(Error::Domain(format!("c must be positive, got {c}")));
    }
    if n < 2 {
        return Err(Error::Domain("n must be at least 2".into()));
    }
    let phi = rayleigh_trial(gamma, gamma1, n);
    let numerator = radial_mu_integral(m, &phi, |l, r| l.lu2 - c * l.u2 / r.powi(4))?;
    let denominator = radial_mu_integral(m, &phi, |l, _| l.u2 + l.grad2)?;
    let (alpha_n, beta_n) = splice_coefficients(gamma, gamma1, n);
    Ok(RayleighProbe {
        c,
        dimension: m.dimension(),
        gamma,
        gamma1,
        n,
        alpha_n,
        beta_n,
        numerator,
        denominator,
        lambda1_estimate: numerator / denominator,
    })
}

pub fn rayleigh_sweep(m: &Measure, c: f64, gamma: f64, gamma1: f64, ns: &[u64]) -> Result<Vec<RayleighProbe>> {
    ns.par_iter().map(|&n| rayleigh_lambda1(m, c, gamma, gamma1, n)).collect()
}

pub fn sweep_to_csv(probes: &[RayleighProbe]) -> String {
    let mut s = String::from("n,lambda1_estimate\n");
    for p in probes {
        s.push_str(&format!("{},{:e}\n", p.n, p.lambda1_estimate));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::MultiIndex;
    use crate::operator::{apply_l_pointwise, Polynomial, TrialFunction};
    use crate::quad::integrate_to_infinity;

    fn gauss(n: usize) -> Measure {
        Measure::gaussian(n).unwrap()
    }

    /// E|x|^{−p} under the standard Gaussian, from the chi distribution.
    fn inverse_moment(n: usize, p: f64) -> f64 {
        let nf = n as f64;
        2f64.powf(-p / 2.0) * libm::tgamma((nf - p) / 2.0) / libm::tgamma(nf / 2.0)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn constant_wiring() {
        for n in 5..=8usize {
            let nf = n as f64;
            assert_eq!(rellich_constant(n), (nf * (nf - 4.0) / 4.0).powi(2));
            assert_eq!(c0(n), ((nf - 2.0) / 2.0).powi(2));
            assert_eq!(c2(n), c0(n) - 1.0);
        }
        assert_eq!(rellich_constant(5), 1.5625);
        assert!(rellich_feasible(1.5625, 5));
        assert!(!rellich_feasible(1.6, 5));
    }

    #[test]
    fn radial_identities_match_cartesian_derivatives() {
        // u = |x|⁴ + |x|⁶ in N = 3 against exact polynomial derivatives.
        let n = 3;
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0u32; n];
                e[i] += 2;
                e[j] += 2;
                terms.push((e, 1.0));
                for k in 0..n {
                    let mut e = vec![0u32; n];
                    e[i] += 2;
                    e[j] += 2;
                    e[k] += 2;
                    terms.push((e, 1.0));
                }
            }
        }
        let p = Polynomial::new(n, terms).unwrap();
        let trial = RadialTrial::new("r4+r6", |r| r.powi(4) + r.powi(6));
        let m = gauss(n);
        let x = [0.3, -0.7, 0.5];
        let r = crate::measures::norm(&x);
        let l = local(&m, &trial, r).unwrap();
        let mut d2 = 0.0;
        let mut d3 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut b = vec![0u32; n];
                b[i] += 1;
                b[j] += 1;
                d2 += p.partial(&b, &x).unwrap().powi(2);
                for k in 0..n {
                    let mut b3 = b.clone();
                    b3[k] += 1;
                    d3 += p.partial(&b3, &x).unwrap().powi(2);
                }
            }
        }
        assert!(rel(l.hess2, d2) < 1e-12, "{} vs {}", l.hess2, d2);
        assert!(rel(l.d3, d3) < 1e-12, "{} vs {}", l.d3, d3);
        let lu = apply_l_pointwise(&m, &p, &x).unwrap();
        assert!(rel(l.lu2, lu * lu) < 1e-12);
    }

    #[test]
    fn radial_operator_chain_on_gaussian_modes() {
        // u = |x|² − N is an eigenfunction: Lu = −2u, ∇Lu = −2∇u, Au = 4u.
        let n = 5;
        let m = gauss(n);
        let t = RadialTrial::new("r^2-N", move |r| r * r - n as f64);
        for r in [0.3, 1.0, 2.5] {
            let l = local(&m, &t, r).unwrap();
            assert!(rel(l.lu2, 4.0 * l.u2) < 1e-12);
            assert!(rel(l.grad_lu2, 4.0 * l.grad2) < 1e-12);
            assert!(rel(l.au2, 16.0 * l.u2) < 1e-12);
            // L∂_k u = ∂_k Lu + ∂_k u = −∂_k u for the Gaussian.
            assert!(rel(l.l_grad_u2, l.grad2) < 1e-12);
        }
    }

    #[test]
    fn hardy_examples() {
        let m = gauss(5);
        let r = hardy_report(&m, &RadialTrial::gaussian(0.25), 5.0).unwrap();
        assert!(r.passed && r.margin > 0.0);
        let one = RadialTrial::constant(1.0);
        let c = hardy_minimal_c1(&m, &one).unwrap();
        let expect = c0(5) * inverse_moment(5, 2.0);
        assert!(rel(c, expect) < 1e-9, "{c} vs {expect}");
        let r = hardy_report(&m, &one, 1.0).unwrap();
        assert!(rel(r.lhs, expect) < 1e-9 && rel(r.rhs, 1.0) < 1e-9);
        assert!(matches!(hardy_report(&m, &RadialTrial::power(-1.5), 1.0), Err(Error::Integrability(_))));
        assert!(matches!(hardy_report(&gauss(2), &one, 1.0), Err(Error::Domain(_))));
        let s = hardy_suite(&m, &RadialTrial::suite()).unwrap();
        assert!(s.all_passed() && s.constant.is_finite());
    }

    #[test]
    fn radial_integral_oracle() {
        // ∫ r² e^{-r²/2} dμ in N = 5 is E|x|² e^{−|x|²/2} = N/2^{N/2+1}.
        let m = gauss(5);
        let t = RadialTrial::new("r exp", |r| r * (r * r * -0.25).exp());
        let v = radial_mu_integral(&m, &t, |l, _| l.u2).unwrap();
        let w = sphere_area(5) * (2.0 * std::f64::consts::PI).powf(-2.5);
        let tail = integrate_to_infinity(|r| r.powi(6) * (-r * r).exp(), tolerance()).unwrap().value;
        let head = crate::quad::integrate(|r| r.powi(6) * (-r * r).exp(), 0.0, 1.0, tolerance()).value;
        assert!(rel(v, w * (head + tail)) < 1e-10);
        assert!(rel(v, 5.0 / 2f64.powf(3.5)) < 1e-10);
    }

    #[test]
    fn rellich_examples() {
        let m = gauss(5);
        let suite = rellich_suite(&m, &RadialTrial::suite(), &RELLICH_EPSILONS).unwrap();
        assert!(suite.all_passed(), "{:#?}", suite.reports.iter().filter(|r| !r.passed).collect::<Vec<_>>());
        let g = suite.reports.iter().find(|r| r.trial == "exp(-0.25r^2)").unwrap();
        assert!(g.margin > 0.0);
        let one = rellich_report(&m, &RadialTrial::constant(1.0), 2.0).unwrap();
        assert!(rel(one.lhs, 1.5625 * inverse_moment(5, 4.0)) < 1e-9);
        // only the zero-order term survives: 2C2C1²/C0 with C1 = 2.
        assert!(rel(one.rhs, 2.0 * 1.25 * 4.0 / 2.25) < 1e-9);
        assert!(matches!(rellich_report(&gauss(4), &RadialTrial::constant(1.0), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn suite_soundness_on_registered_measures() {
        for m in crate::measures::registry(5).unwrap() {
            let s = rellich_suite(&m, &RadialTrial::suite(), &RELLICH_EPSILONS).unwrap();
            assert!(s.all_passed(), "{}", m.label());
            let h = higher_rellich_reports(&m, &RadialTrial::suite()[..3]).unwrap();
            assert!(h.iter().all(|o| o.all_passed() && o.constant.is_finite()), "{}", m.label());
        }
    }

    fn mode(a: &[u32]) -> Trial {
        Trial::Spectral { name: format!("{a:?}"), function: SpectralFunction::mode(MultiIndex::new(a.to_vec())) }
    }

    #[test]
    fn interpolation_examples() {
        let m = gauss(1);
        // Ĥ_1 = x: ‖∇u‖² = 1, ‖D²u‖² = 0.
        let s = interpolation_suite(&m, &[mode(&[1])], &[1.0]).unwrap();
        assert_eq!(s[0].constant, 1.0);
        // He_2 = √2 Ĥ_2: ‖∇u‖² = 4, ‖D²u‖² = 4, ‖u‖² = 2.
        let he2 = Trial::Spectral { name: "He2".into(), function: SpectralFunction::mode(MultiIndex::new(vec![2])).scale(2f64.sqrt()) };
        let n = trial_norms(&m, &he2).unwrap();
        assert!((n.grad2 - 4.0).abs() < 1e-12 && (n.hess2 - 4.0).abs() < 1e-12 && (n.u2 - 2.0).abs() < 1e-12);
        assert!(interpolation_report(&m, &he2, 1.0, 1.0).unwrap().passed);
        let c = Trial::Spectral { name: "1".into(), function: SpectralFunction::constant(1, 3.0) };
        assert!(interpolation_report(&m, &c, 0.1, 0.0).unwrap().passed);
        let m5 = gauss(5);
        let mut suite: Vec<Trial> = RadialTrial::suite().into_iter().map(Trial::from).collect();
        suite.extend(MultiIndex::enumerate(5, 3).iter().map(|a| mode(a.entries())));
        for o in interpolation_suite(&m5, &suite, &RELLICH_EPSILONS).unwrap() {
            assert!(o.all_passed() && o.constant.is_finite());
        }
    }

    #[test]
    fn calderon_zygmund_examples() {
        let m = gauss(5);
        // ‖D²Ĥ_α‖² = |α|(|α|−1) for the Gaussian.
        let r = calderon_zygmund_ratio(&m, &mode(&[2, 0, 0, 0, 0])).unwrap();
        assert!((r - 2f64.sqrt() / 3.0).abs() < 1e-14);
        let r = calderon_zygmund_ratio(&m, &mode(&[1, 1, 0, 0, 0])).unwrap();
        assert!((r - 2f64.sqrt() / 3.0).abs() < 1e-14);
        let c = Trial::Spectral { name: "1".into(), function: SpectralFunction::constant(5, 1.0) };
        assert_eq!(calderon_zygmund_ratio(&m, &c).unwrap(), 0.0);
        // radial and spectral forms of |x|² − N agree.
        let rad = Trial::from(RadialTrial::new("r^2-5", |r| r * r - 5.0));
        let mut s = SpectralFunction::zero(5, 2);
        for k in 0..5 {
            s.set(MultiIndex::axis(5, k, 2), 2f64.sqrt()).unwrap();
        }
        let spec = Trial::Spectral { name: "r^2-5".into(), function: s };
        let a = trial_norms(&m, &rad).unwrap();
        let b = trial_norms(&m, &spec).unwrap();
        for (x, y) in [(a.u2, b.u2), (a.grad2, b.grad2), (a.hess2, b.hess2), (a.lu2, b.lu2), (a.bu2, b.bu2)] {
            assert!(rel(x, y) < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn drift_bound_examples() {
        let m = gauss(5);
        let one = Trial::from(RadialTrial::constant(1.0));
        let n = trial_norms(&m, &one).unwrap();
        assert!(rel(n.bu2, 5.0) < 1e-9);
        assert!(rel(drift_bound_ratio(&m, &one).unwrap(), 5f64.sqrt()) < 1e-9);
        let x = mode(&[1]);
        assert!((trial_norms(&gauss(1), &x).unwrap().bu2 - 3.0).abs() < 1e-12);
        let bump = Trial::from(
            RadialTrial::new("bump", |r| {
                if r.value() < 0.5 {
                    (r * r * -1.0 + 0.25).powi(4)
                } else {
                    Jet::constant(0.0)
                }
            })
            .with_support(0.5),
        );
        assert!(drift_bound_ratio(&m, &bump).unwrap() < 0.2);
        let s = drift_bound_suite(&m, &[one, bump]).unwrap();
        assert!(s.all_passed() && s.constant >= 5f64.sqrt() * (1.0 - 1e-9));
    }

    #[test]
    fn higher_rellich_examples() {
        let m = gauss(7);
        let out = higher_rellich_reports(&m, &[RadialTrial::gaussian(0.25)]).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.iter().all(|o| o.all_passed() && o.constant.is_finite() && o.constant > 0.0));
        let m5 = gauss(5);
        assert_eq!(higher_rellich_reports(&m5, &[RadialTrial::gaussian(0.25)]).unwrap().len(), 2);
        let e = higher_rellich_report(&m5, &RadialTrial::gaussian(0.25), HigherRellich::Stima3, 1.0);
        assert!(matches!(e, Err(Error::Domain(_))));
        let (lhs, bracket) = higher_rellich_parts(&m5, &RadialTrial::constant(1.0), HigherRellich::Stima2).unwrap();
        assert!(rel(lhs, inverse_moment(5, 4.0)) < 1e-9);
        assert!(rel(bracket, 1.0) < 1e-9);
    }

    #[test]
    fn splice_is_c1() {
        for n in [10u64, 100, 1000, 10000] {
            let t = rayleigh_trial(-0.5, -0.25, n);
            let r0 = 1.0 / n as f64;
            let below = t.jet(r0 * (1.0 - 1e-15));
            let at = t.jet(r0);
            let (alpha, beta) = splice_coefficients(-0.5, -0.25, n);
            let inner = Jet::var(r0).powf(-0.25) * beta + alpha;
            assert!((inner.d[0] - at.d[0]).abs() < 1e-12 * at.d[0].abs().max(1.0));
            assert!((inner.d[1] - at.d[1]).abs() < 1e-10 * at.d[1].abs().max(1.0));
            assert!((below.d[0] - at.d[0]).abs() < 1e-12 * at.d[0].abs().max(1.0));
        }
        let c = cutoff(Jet::var(1.0));
        assert_eq!(c.d[..3], [1.0, 0.0, 0.0]);
        let c = cutoff(Jet::var(2.0));
        assert!(c.d[..3].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rayleigh_parameter_guards() {
        let m = gauss(5);
        assert!(matches!(rayleigh_lambda1(&m, 1.0, -0.4, -0.25, 10), Err(Error::Domain(_))));
        assert!(matches!(rayleigh_lambda1(&m, 1.0, -0.5, -0.6, 10), Err(Error::Domain(_))));
        assert!(matches!(rayleigh_lambda1(&m, -1.0, -0.5, -0.25, 10), Err(Error::Domain(_))));
        assert!(check_rayleigh_parameters(5, -0.5, -0.25).is_ok());
    }

    #[test]
    fn rayleigh_trend() {
        let m = gauss(5);
        let ns = [10u64, 100, 1000, 10000];
        let above = rayleigh_sweep(&m, 1.05 * 1.5625, -0.5, -0.25, &ns).unwrap();
        let below = rayleigh_sweep(&m, 0.9 * 1.5625, -0.5, -0.25, &ns).unwrap();
        for w in above.windows(2) {
            assert!(w[1].lambda1_estimate < w[0].lambda1_estimate);
        }
        let lo = below.iter().map(|p| p.lambda1_estimate).fold(f64::INFINITY, f64::min);
        assert!(lo > below[0].lambda1_estimate - 1.0);
        eprintln!("above: {:?}", above.iter().map(|p| p.lambda1_estimate).collect::<Vec<_>>());
        eprintln!("below: {:?}", below.iter().map(|p| p.lambda1_estimate).collect::<Vec<_>>());
    }
}
