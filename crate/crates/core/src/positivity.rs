//! Eventual positivity of e^{−tA} on compact sets: time scans of the
//! minimum of e^{−tA}(χ_K f) over samples of K, the first grid time from
//! which those minima stay positive, and a small-time search for negative
//! values.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{project_on_box, SpectralFunction};
use crate::kernels::{apply_biou_by_kernel, BoxQuadrature, KernelSource};
use crate::semigroup::evolve_a;

/// A compact set K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Region::Box { lo: vec![lo], hi: vec![hi] }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Region::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
                }
                if lo.is_empty() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Misuse("box needs lo < hi on every axis".into()));
                }
            }
            Region::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return Err(Error::Misuse("ball needs a positive radius".into()));
                }
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *a <= *x && *x <= *b),
            Region::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() <= radius * radius * (1.0 + 1e-14)
            }
        }
    }

    /// Uniform grid of the bounding box with `per_axis` points per axis,
    /// restricted to K.
    pub fn samples(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        let n = lo.len();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(n as u32);
        let mut out = Vec::new();
        for k in 0..total {
            let mut r = k;
            let mut x = vec![0.0; n];
            for d in (0..n).rev() {
                let i = r % per_axis;
                r /= per_axis;
                x[d] = lo[d] + (hi[d] - lo[d]) * i as f64 / (per_axis - 1) as f64;
            }
            if self.contains(&x) {
                out.push(x);
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        match self {
            Region::Box { lo, hi } => format!("box{lo:?}x{hi:?}"),
            Region::Ball { center, radius } => format!("ball({center:?},{radius})"),
        }
    }
}

/// Initial datum f; the scans evolve χ_K f.
#[derive(Clone)]
pub struct Datum {
    pub name: String,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Datum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Datum").field("name", &self.name).finish()
    }
}

impl Datum {
    pub fn new<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }

    /// The indicator of a region.
    pub fn indicator(k: &Region) -> Self {
        let k = k.clone();
        Self::new(format!("indicator({})", k.describe()), move |x| if k.contains(x) { 1.0 } else { 0.0 })
    }

    /// (1 − |x − c|²/w²)² inside the ball of radius w, zero outside.
    pub fn bump(center: Vec<f64>, width: f64) -> Self {
        let name = format!("bump({center:?},{width})");
        Self::new(name, move |x| {
            let s: f64 = x.iter().zip(&center).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (width * width);
            if s < 1.0 {
                (1.0 - s).powi(2)
            } else {
                0.0
            }
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// How e^{−tA}(χ_K f) is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum EvolutionPath {
    /// Hermite projection of χ_K f truncated at `max_degree`.
    Spectral { max_degree: u32 },
    /// Quadrature of ∫ k(t, x, y) χ_K f(y) dy over the bounding box of K.
    Kernel { source: KernelSource, panels: usize, order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub samples_per_axis: usize,
    pub path: EvolutionPath,
    /// Composite Gauss–Legendre layout for the projection of χ_K f.
    pub panels: usize,
    pub order: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { samples_per_axis: 201, path: EvolutionPath::Spectral { max_degree: 40 }, panels: 32, order: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub t: f64,
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityScan {
    pub region: Region,
    pub datum: String,
    pub time_grid: Vec<f64>,
    pub minima: Vec<f64>,
    pub argmins: Vec<Vec<f64>>,
    /// First grid time from which every sampled minimum is positive.
    pub t0: Option<f64>,
    /// ∫ χ_K f dμ, the limit of every minimum.
    pub floor: f64,
    pub negative_witness: Option<Witness>,
    /// Whether, once above floor/2, minima stayed above floor/4.
    pub monotone_tail: bool,
}

impl PositivityScan {
    /// Assembles a scan from per-time sampled values.
    pub fn from_samples(
        region: Region,
        datum: String,
        time_grid: Vec<f64>,
        points: &[Vec<f64>],
        values: Vec<Vec<f64>>,
        floor: f64,
    ) -> Self {
        let mut minima = Vec::with_capacity(values.len());
        let mut argmins = Vec::with_capacity(values.len());
        let mut negative_witness: Option<Witness> = None;
        for (t, vals) in time_grid.iter().zip(&values) {
            let (i, v) = vals
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
            minima.push(v);
            argmins.push(points.get(i).cloned().unwrap_or_default());
            if v < 0.0 && negative_witness.as_ref().is_none_or(|w| v < w.value) {
                negative_witness = Some(Witness { t: *t, x: points[i].clone(), value: v });
            }
        }
        let t0 = first_positive_tail(&time_grid, &minima);
        let monotone_tail = monotone_tail(&minima, floor);
        Self { region, datum, time_grid, minima, argmins, t0, floor, negative_witness, monotone_tail }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,min,argmin\n");
        for ((t, m), x) in self.time_grid.iter().zip(&self.minima).zip(&self.argmins) {
            let xs: Vec<String> = x.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&format!("{t:e},{m:e},{}\n", xs.join(" ")));
        }
        s
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "t0": self.t0,
            "floor": self.floor,
            "negative_witness": self.negative_witness,
        })
    }
}

fn first_positive_tail(times: &[f64], minima: &[f64]) -> Option<f64> {
    let mut start = None;
    for (i, &m) in minima.iter().enumerate().rev() {
        if m > 0.0 {
            start = Some(i);
        } else {
            break;
        }
    }
    start.map(|i| times[i])
}

fn monotone_tail(minima: &[f64], floor: f64) -> bool {
    match minima.iter().position(|&m| m > 0.5 * floor) {
        Some(i) => minima[i..].iter().all(|&m| m >= 0.25 * floor),
        None => true,
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Misuse("empty time grid".into()));
    }
    if times.iter().any(|t| !(*t > 0.0)) || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Misuse("time grid must be positive and increasing".into()));
    }
    Ok(())
}

/// Rejects data that are negative somewhere on K or vanish on every sample.
pub fn check_datum(f: &Datum, points: &[Vec<f64>]) -> Result<()> {
    let mut positive = false;
    for x in points {
        let v = f.eval(x);
        if !(v >= 0.0) {
            return Err(Error::Rejected(format!("datum {} is {v} < 0 at {x:?}", f.name)));
        }
        positive |= v > 0.0;
    }
    if !positive {
        return Err(Error::Rejected(format!("datum {} vanishes on K", f.name)));
    }
    Ok(())
}

fn masked(k: &Region, f: &Datum) -> impl Fn(&[f64]) -> f64 + Sync {
    let k = k.clone();
    let f = f.clone();
    move |x: &[f64]| if k.contains(x) { f.eval(x) } else { 0.0 }
}

/// Hermite coefficients of χ_K f.
pub fn project_datum(f: &Datum, k: &Region, max_degree: u32, panels: usize, order: usize) -> Result<SpectralFunction> {
    let (lo, hi) = k.bounding_box();
    project_on_box(masked(k, f), &lo, &hi, max_degree, panels, order)
}

/// ∫ χ_K f dμ.
pub fn floor(f: &Datum, k: &Region, panels: usize, order: usize) -> Result<f64> {
    Ok(project_datum(f, k, 0, panels, order)?.mean())
}

/// Values of e^{−tA}(χ_K f) at `points`, one row per time.
pub fn evolve_on_points(
    f: &Datum,
    k: &Region,
    times: &[f64],
    points: &[Vec<f64>],
    opts: &ScanOptions,
) -> Result<Vec<Vec<f64>>> {
    match opts.path {
        EvolutionPath::Spectral { max_degree } => {
            let s = project_datum(f, k, max_degree, opts.panels, opts.order)?;
            times
                .par_iter()
                .map(|&t| {
                    let e = evolve_a(&s, t)?.state;
                    points.iter().map(|x| e.evaluate(x)).collect()
                })
                .collect()
        }
        EvolutionPath::Kernel { source, panels, order } => {
            let (lo, hi) = k.bounding_box();
            let half_width = lo.iter().chain(&hi).fold(0.0f64, |a, v| a.max(v.abs()));
            let quad = BoxQuadrature { half_width, panels, order };
            let g = masked(k, f);
            times.iter().map(|&t| points.iter().map(|x| apply_biou_by_kernel(&g, t, x, source, quad)).collect()).collect()
        }
    }
}

/// Scans min over K of e^{−tA}(χ_K f) along the time grid.
pub fn positivity_scan(f: &Datum, k: &Region, times: &[f64], opts: &ScanOptions) -> Result<PositivityScan> {
    k.validate()?;
    check_grid(times)?;
    let points = k.samples(opts.samples_per_axis);
    check_datum(f, &points)?;
    let floor = floor(f, k, opts.panels, opts.order)?;
    let values = evolve_on_points(f, k, times, &points, opts)?;
    Ok(PositivityScan::from_samples(k.clone(), f.name.clone(), times.to_vec(), &points, values, floor))
}

/// Most negative value of e^{−tA}f over the (t, x) grid, if any. `f` is
/// projected on the bounding box of `support`.
pub fn negativity_search(
    f: &Datum,
    support: &Region,
    times: &[f64],
    xs: &[Vec<f64>],
    opts: &ScanOptions,
) -> Result<Option<Witness>> {
    support.validate()?;
    check_grid(times)?;
    let values = evolve_on_points(f, support, times, xs, opts)?;
    let mut best: Option<Witness> = None;
    for (t, row) in times.iter().zip(&values) {
        for (x, &v) in xs.iter().zip(row) {
            if v < 0.0 && best.as_ref().is_none_or(|w| v < w.value) {
                best = Some(Witness { t: *t, x: x.clone(), value: v });
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformScan {
    pub scans: Vec<PositivityScan>,
    /// Max of the individual t0, or none if some member has none.
    pub common_t0: Option<f64>,
}

/// Individual scans of a family, each datum normalized to ∫χ_K f dμ = 1.
pub fn uniform_positivity_scan(
    family: &[Datum],
    k: &Region,
    times: &[f64],
    opts: &ScanOptions,
) -> Result<UniformScan> {
    let mut scans = Vec::with_capacity(family.len());
    for f in family {
        let mass = floor(f, k, opts.panels, opts.order)?;
        if !(mass > 0.0) {
            return Err(Error::Rejected(format!("datum {} has no mass on K", f.name)));
        }
        let g = f.clone();
        let normalized = Datum::new(f.name.clone(), move |x| g.eval(x) / mass);
        scans.push(positivity_scan(&normalized, k, times, opts)?);
    }
    let common_t0 = if scans.is_empty() {
        None
    } else {
        scans.iter().map(|s| s.t0).try_fold(f64::NEG_INFINITY, |a, t| t.map(|t| a.max(t)))
    };
    Ok(UniformScan { scans, common_t0 })
}

/// Default time grid for the scans.
pub fn default_time_grid() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0]
}
