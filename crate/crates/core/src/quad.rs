//! One-dimensional quadrature plumbing: Gauss–Legendre rules from the
//! Golub–Welsch eigenproblem, adaptive Gauss–Kronrod integration, and radial
//! integrals over ℝᴺ with geometric refinement toward the origin.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], 2.0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    symmetrize(&mut pairs);
    pairs.into_iter().unzip()
}

/// Enforce exact mirror symmetry of a rule symmetric about zero.
pub(crate) fn symmetrize(pairs: &mut [(f64, f64)]) {
    let n = pairs.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
}

/// Composite Gauss–Legendre rule on [a, b] with `panels` equal panels.
pub fn composite_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point Kronrod panel with its embedded 7-point Gauss estimate.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-12, max_intervals: 4000 }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel, ..Self::default() }
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over the segments
/// delimited by `points` (sorted, at least two entries). Segment boundaries
/// are never bisected across, so known near-singularities belong there.
pub fn integrate_points<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Integral {
    assert!(points.len() >= 2, "need at least one segment");
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&f, w[0], w[1]);
        evaluations += 15;
        total += v;
        total_err += e;
        heap.push(Segment { a: w[0], b: w[1], value: v, error: e });
    }
    while total_err > tol.abs.max(tol.rel * total.abs()) && heap.len() < tol.max_intervals {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&f, seg.a, mid);
        let (v2, e2) = gk15(&f, mid, seg.b);
        evaluations += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Integral { value, error, evaluations }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Integral {
    integrate_points(f, &[a, b], tol)
}

/// Integral over [0, r_outer] with geometric panels [r/2, r] accumulated
/// toward the origin until the panel contributions become negligible.
/// Integrable power singularities r^s with s > −1 at the origin are handled;
/// a non-decaying panel sequence is reported as non-integrable.
pub fn integrate_toward_origin<F: Fn(f64) -> f64>(f: F, r_outer: f64, tol: Tolerance) -> Result<Integral> {
    let mut total = Integral { value: 0.0, error: 0.0, evaluations: 0 };
    let mut hi = r_outer;
    let mut prev_abs = f64::INFINITY;
    let mut small_run = 0;
    for k in 0..1100 {
        let lo = 0.5 * hi;
        let panel = integrate(&f, lo, hi, tol);
        total.value += panel.value;
        total.error += panel.error;
        total.evaluations += panel.evaluations;
        let mag = panel.value.abs();
        if !mag.is_finite() {
            return Err(Error::Integrability(format!("non-finite panel near r = {lo:e}")));
        }
        let scale = total.value.abs().max(tol.abs);
        if mag <= 1e-3 * tol.rel * scale || mag <= 1e-3 * tol.abs {
            small_run += 1;
            if small_run >= 3 && k >= 8 {
                return Ok(total);
            }
        } else {
            small_run = 0;
        }
        if k >= 40 && mag > 0.0 && mag >= 0.999 * prev_abs {
            return Err(Error::Integrability(format!(
                "panel contributions stop decaying toward the origin (r ≈ {lo:e})"
            )));
        }
        prev_abs = mag;
        hi = lo;
    }
    Err(Error::Integrability("origin refinement exhausted".into()))
}

/// Surface area of the unit sphere S^{N−1} (ω_1 = 2 counts both half-lines).
pub fn sphere_area(dimension: usize) -> f64 {
    use std::f64::consts::PI;
    let (mut area, start) = if dimension % 2 == 1 { (2.0, 1) } else { (2.0 * PI, 2) };
    let mut n = start;
    while n < dimension {
        area *= 2.0 * PI / n as f64;
        n += 2;
    }
    area
}

/// Radial integral ω_N ∫₀^{r_max} r^{N−1} f(r) dr, with `breakpoints` placed
/// as panel boundaries and log-refinement below the smallest breakpoint.
pub fn radial_integral<F: Fn(f64) -> f64>(
    dimension: usize,
    f: F,
    r_max: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Integral> {
    let nm1 = (dimension - 1) as i32;
    let g = |r: f64| if r == 0.0 { 0.0 } else { r.powi(nm1) * f(r) };
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > 0.0 && b < r_max).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let inner = cuts.first().copied().unwrap_or(r_max.min(1.0));
    let mut pts = vec![inner];
    pts.extend(cuts.iter().copied().filter(|&c| c > inner));
    pts.push(r_max);
    pts.dedup();
    let mut total = integrate_toward_origin(&g, inner, tol)?;
    if pts.len() >= 2 && pts[pts.len() - 1] > pts[0] {
        let outer = integrate_points(&g, &pts, tol);
        total.value += outer.value;
        total.error += outer.error;
        total.evaluations += outer.evaluations;
    }
    let w = sphere_area(dimension);
    total.value *= w;
    total.error *= w;
    Ok(total)
}

/// ∫₁^∞ f(r) dr through the substitution r = 1/u.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, tol: Tolerance) -> Result<Integral> {
    let g = |u: f64| if u == 0.0 { 0.0 } else { f(1.0 / u) / (u * u) };
    integrate_toward_origin(g, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_is_exact_for_low_degree() {
        let (x, w) = gauss_legendre(5);
        for k in 0..10 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "k={k}: {q} vs {exact}");
        }
    }

    #[test]
    fn kronrod_panel_is_exact_to_degree_22() {
        for k in 0..=22 {
            let (v, _) = gk15(&|x: f64| x.powi(k), 0.0, 1.0);
            assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn adaptive_handles_sqrt_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::new(1e-10, 1e-10));
        assert!((r.value - 2.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn origin_refinement_and_rejection() {
        let ok = integrate_toward_origin(|r: f64| r.powf(-0.5), 1.0, Tolerance::default()).unwrap();
        assert!((ok.value - 2.0).abs() < 1e-9);
        assert!(integrate_toward_origin(|r: f64| 1.0 / r, 1.0, Tolerance::default()).is_err());
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert_eq!(sphere_area(1), 2.0);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn radial_gaussian_mass() {
        // ∫ (2π)^{-N/2} e^{-|x|²/2} dx = 1
        for n in 1..=5 {
            let c = (2.0 * std::f64::consts::PI).powf(-(n as f64) / 2.0);
            let r = radial_integral(n, |r| c * (-0.5 * r * r).exp(), 40.0, &[1.0, 5.0], Tolerance::default()).unwrap();
            assert!((r.value - 1.0).abs() < 1e-11, "N={n}: {}", r.value);
        }
    }
}
