//! Tensor Hermite basis orthonormal under the standard Gaussian measure
//! γ(x) = (2π)^{−N/2} e^{−|x|²/2}, Gauss–Hermite rules for that weight and
//! transforms between point values and spectral coefficients.
//!
//! Coefficients are stored against the orthonormal functions
//! Ĥ_α = He_α / √α!, so the L²(dμ) inner product is a plain dot product.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{composite_legendre, symmetrize};

/// Largest supported spatial dimension.
pub const MAX_DIMENSION: usize = 4;
/// Largest tensor rule (total node count).
pub const MAX_TENSOR_NODES: usize = 10_000_000;

/// Multi-index α ∈ ℕᴺ, ordered graded-lexicographically (total degree first,
/// then lexicographic on the entries).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        Self(entries)
    }

    pub fn zero(dimension: usize) -> Self {
        Self(vec![0; dimension])
    }

    /// The unit index e_i scaled by `k`.
    pub fn axis(dimension: usize, i: usize, k: u32) -> Self {
        let mut e = vec![0; dimension];
        e[i] = k;
        Self(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// |α| = Σ αᵢ
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// All indices of order exactly `degree`, in lexicographic order.
    pub fn shell(dimension: usize, degree: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; dimension];
        fill_shell(&mut cur, 0, degree, &mut out);
        out
    }

    /// All indices with order ≤ `max_degree`, graded-lexicographic order.
    pub fn enumerate(dimension: usize, max_degree: u32) -> Vec<MultiIndex> {
        (0..=max_degree).flat_map(|d| Self::shell(dimension, d)).collect()
    }

    /// Number of indices of order exactly `degree`: C(degree + N − 1, N − 1).
    pub fn shell_size(dimension: usize, degree: u32) -> f64 {
        let mut c = 1.0;
        for k in 1..dimension {
            c *= (degree as f64 + k as f64) / k as f64;
        }
        c
    }
}

fn fill_shell(cur: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    let n = cur.len();
    if pos + 1 == n {
        cur[pos] = remaining;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for v in 0..=remaining {
        cur[pos] = v;
        fill_shell(cur, pos + 1, remaining - v, out);
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// He_n(x), probabilists' convention, by the three-term recurrence.
pub fn hermite_eval(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Ĥ_0(x), …, Ĥ_{n_max}(x) by the normalized recurrence
/// √(k+1) Ĥ_{k+1} = x Ĥ_k − √k Ĥ_{k−1}.
pub fn normalized_table(n_max: u32, x: f64) -> Vec<f64> {
    let n = n_max as usize;
    let mut t = Vec::with_capacity(n + 1);
    t.push(1.0);
    if n >= 1 {
        t.push(x);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = (x * t[k] - kf.sqrt() * t[k - 1]) / (kf + 1.0).sqrt();
        t.push(next);
    }
    t
}

/// Ĥ_n(x) = He_n(x)/√n!
pub fn normalized_eval(n: u32, x: f64) -> f64 {
    normalized_table(n, x)[n as usize]
}

/// √(n!/(n−k)!), the factor in ∂ᵏĤ_n = √(n!/(n−k)!) Ĥ_{n−k}.
pub(crate) fn falling_sqrt(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|j| (j as f64).sqrt()).product()
}

/// Tensor Gauss–Hermite rule for the standard Gaussian probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dimension: usize,
    nodes_1d: Vec<f64>,
    weights_1d: Vec<f64>,
}

impl QuadratureRule {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_1d.len()
    }

    pub fn nodes_1d(&self) -> &[f64] {
        &self.nodes_1d
    }

    pub fn weights_1d(&self) -> &[f64] {
        &self.weights_1d
    }

    pub fn len(&self) -> usize {
        self.nodes_1d.len().pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes_1d.is_empty()
    }

    /// Tensor point `k` (mixed-radix decomposition, last axis fastest) and its weight.
    pub fn point(&self, mut k: usize, out: &mut [f64]) -> f64 {
        let m = self.nodes_1d.len();
        let mut w = 1.0;
        for d in (0..self.dimension).rev() {
            let i = k % m;
            k /= m;
            out[d] = self.nodes_1d[i];
            w *= self.weights_1d[i];
        }
        w
    }

    /// Per-axis node indices of tensor point `k`.
    pub fn point_indices(&self, mut k: usize, out: &mut [usize]) {
        let m = self.nodes_1d.len();
        for d in (0..self.dimension).rev() {
            out[d] = k % m;
            k /= m;
        }
    }

    /// ∫ f dμ approximated by the rule.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let mut x = vec![0.0; self.dimension];
        let mut acc = 0.0;
        for k in 0..self.len() {
            let w = self.point(k, &mut x);
            acc += w * f(&x);
        }
        acc
    }
}

/// Gauss–Hermite rule with `m` nodes per axis against the standard Gaussian
/// density, tensorized over `dimension` axes (Golub–Welsch).
pub fn quadrature_rule(dimension: usize, m: usize) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(Error::Misuse("quadrature rule needs at least one node".into()));
    }
    if dimension == 0 || dimension > MAX_DIMENSION {
        return Err(Error::Resource(format!("dimension {dimension} outside 1..={MAX_DIMENSION}")));
    }
    let total = (m as f64).powi(dimension as i32);
    if total > MAX_TENSOR_NODES as f64 {
        return Err(Error::Resource(format!("{m}^{dimension} tensor nodes exceed cap {MAX_TENSOR_NODES}")));
    }
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let b = (k as f64).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    // Newton-polish the eigenvalues on Ĥ_m, then take Christoffel weights
    // 1/Σ_{k<m} Ĥ_k(x)², which are far more accurate than v0² in the tails.
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let mut x = eig.eigenvalues[i];
            for _ in 0..3 {
                let t = normalized_table(m as u32, x);
                let d = (m as f64).sqrt() * t[m - 1];
                if d == 0.0 {
                    break;
                }
                x -= t[m] / d;
            }
            let t = normalized_table(m as u32 - 1, x);
            (x, 1.0 / t.iter().map(|v| v * v).sum::<f64>())
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    symmetrize(&mut pairs);
    let sum: f64 = pairs.iter().map(|p| p.1).sum();
    let (nodes_1d, weights_1d): (Vec<f64>, Vec<f64>) = pairs.into_iter().map(|(x, w)| (x, w / sum)).unzip();
    Ok(QuadratureRule { dimension, nodes_1d, weights_1d })
}

/// A function in L²(dμ) represented by its Ĥ_α coefficients, |α| ≤ max_degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectralWire", into = "SpectralWire")]
pub struct SpectralFunction {
    dimension: usize,
    max_degree: u32,
    coefficients: BTreeMap<MultiIndex, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectralWire {
    dimension: usize,
    max_degree: u32,
    entries: Vec<(Vec<u32>, f64)>,
}

impl From<SpectralFunction> for SpectralWire {
    fn from(s: SpectralFunction) -> Self {
        SpectralWire {
            dimension: s.dimension,
            max_degree: s.max_degree,
            entries: s.coefficients.into_iter().map(|(a, c)| (a.0, c)).collect(),
        }
    }
}

impl TryFrom<SpectralWire> for SpectralFunction {
    type Error = Error;

    fn try_from(w: SpectralWire) -> Result<Self> {
        let mut s = SpectralFunction::zero(w.dimension, w.max_degree);
        for (a, c) in w.entries {
            s.set(MultiIndex(a), c)?;
        }
        Ok(s)
    }
}

impl SpectralFunction {
    pub fn zero(dimension: usize, max_degree: u32) -> Self {
        Self { dimension, max_degree, coefficients: BTreeMap::new() }
    }

    pub fn constant(dimension: usize, value: f64) -> Self {
        let mut s = Self::zero(dimension, 0);
        s.coefficients.insert(MultiIndex::zero(dimension), value);
        s
    }

    /// The single orthonormal mode Ĥ_α.
    pub fn mode(alpha: MultiIndex) -> Self {
        let mut s = Self::zero(alpha.dimension(), alpha.order());
        s.coefficients.insert(alpha, 1.0);
        s
    }

    pub fn from_entries<I: IntoIterator<Item = (MultiIndex, f64)>>(
        dimension: usize,
        max_degree: u32,
        entries: I,
    ) -> Result<Self> {
        let mut s = Self::zero(dimension, max_degree);
        for (a, c) in entries {
            s.set(a, c)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, alpha: MultiIndex, value: f64) -> Result<()> {
        if alpha.dimension() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: alpha.dimension() });
        }
        if alpha.order() > self.max_degree {
            return Err(Error::Misuse(format!("index {alpha} exceeds max degree {}", self.max_degree)));
        }
        if value == 0.0 {
            self.coefficients.remove(&alpha);
        } else {
            self.coefficients.insert(alpha, value);
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        self.coefficients.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.coefficients.iter()
    }

    /// ∫ f dμ, the coefficient of Ĥ_0.
    pub fn mean(&self) -> f64 {
        self.coefficient(&MultiIndex::zero(self.dimension))
    }

    pub fn norm_sq(&self) -> f64 {
        self.coefficients.values().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Multiply every coefficient by `factor(α)`.
    pub fn map_modes<F: Fn(&MultiIndex) -> f64>(&self, factor: F) -> Self {
        let coefficients = self
            .coefficients
            .iter()
            .map(|(a, c)| (a.clone(), c * factor(a)))
            .filter(|(_, c)| *c != 0.0)
            .collect();
        Self { dimension: self.dimension, max_degree: self.max_degree, coefficients }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_modes(|_| s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dimension(other)?;
        let mut out = Self::zero(self.dimension, self.max_degree.max(other.max_degree));
        out.coefficients = self.coefficients.clone();
        for (a, c) in &other.coefficients {
            *out.coefficients.entry(a.clone()).or_insert(0.0) += c;
        }
        out.coefficients.retain(|_, c| *c != 0.0);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    fn check_dimension(&self, other: &Self) -> Result<()> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: other.dimension });
        }
        Ok(())
    }

    /// Exact partial derivative ∂^β through ∂ᵏĤ_n = √(n!/(n−k)!) Ĥ_{n−k}.
    pub fn derivative(&self, beta: &MultiIndex) -> Self {
        let shift = beta.order();
        let mut out = Self::zero(self.dimension, self.max_degree.saturating_sub(shift));
        for (a, c) in &self.coefficients {
            if a.0.iter().zip(&beta.0).any(|(ai, bi)| bi > ai) {
                continue;
            }
            let factor: f64 = a.0.iter().zip(&beta.0).map(|(&ai, &bi)| falling_sqrt(ai, bi)).product();
            let lowered = MultiIndex(a.0.iter().zip(&beta.0).map(|(ai, bi)| ai - bi).collect());
            *out.coefficients.entry(lowered).or_insert(0.0) += c * factor;
        }
        out
    }

    /// Exact product x_i·f through x Ĥ_n = √(n+1) Ĥ_{n+1} + √n Ĥ_{n−1}.
    pub fn multiply_coordinate(&self, axis: usize) -> Self {
        let mut out = Self::zero(self.dimension, self.max_degree + 1);
        for (a, c) in &self.coefficients {
            let n = a.0[axis];
            let mut up = a.0.clone();
            up[axis] += 1;
            *out.coefficients.entry(MultiIndex(up)).or_insert(0.0) += c * ((n + 1) as f64).sqrt();
            if n > 0 {
                let mut down = a.0.clone();
                down[axis] -= 1;
                *out.coefficients.entry(MultiIndex(down)).or_insert(0.0) += c * (n as f64).sqrt();
            }
        }
        out.coefficients.retain(|_, c| *c != 0.0);
        out
    }

    /// ‖∇f‖²_μ, exactly.
    pub fn gradient_norm_sq(&self) -> f64 {
        (0..self.dimension)
            .map(|i| self.derivative(&MultiIndex::axis(self.dimension, i, 1)).norm_sq())
            .sum()
    }

    /// ‖D²f‖²_μ = Σ_{ij} ‖∂_ij f‖²_μ, exactly.
    pub fn hessian_norm_sq(&self) -> f64 {
        let n = self.dimension;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut b = vec![0; n];
                b[i] += 1;
                b[j] += 1;
                acc += self.derivative(&MultiIndex(b)).norm_sq();
            }
        }
        acc
    }

    /// Pointwise value Σ c_α Ĥ_α(x).
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: x.len() });
        }
        let tables: Vec<Vec<f64>> = x.iter().map(|&xi| normalized_table(self.max_degree, xi)).collect();
        Ok(self.evaluate_with_tables(&tables))
    }

    pub(crate) fn evaluate_with_tables(&self, tables: &[Vec<f64>]) -> f64 {
        self.coefficients
            .iter()
            .map(|(a, c)| c * a.0.iter().enumerate().map(|(i, &ai)| tables[i][ai as usize]).product::<f64>())
            .sum()
    }
}

/// Coefficients c_α = ∫ f Ĥ_α dμ by quadrature (exact for polynomials of
/// degree ≤ max_degree when the rule has ≥ max_degree + 1 nodes per axis).
pub fn project<F: Fn(&[f64]) -> f64>(
    f: F,
    dimension: usize,
    max_degree: u32,
    rule: &QuadratureRule,
) -> Result<SpectralFunction> {
    if rule.dimension() != dimension {
        return Err(Error::DimensionMismatch { expected: dimension, got: rule.dimension() });
    }
    if rule.nodes_per_axis() < max_degree as usize + 1 {
        return Err(Error::Misuse(format!(
            "rule with {} nodes per axis cannot resolve degree {}",
            rule.nodes_per_axis(),
            max_degree
        )));
    }
    let tables: Vec<Vec<f64>> = rule.nodes_1d().iter().map(|&x| normalized_table(max_degree, x)).collect();
    let indices = MultiIndex::enumerate(dimension, max_degree);
    let mut acc = vec![0.0; indices.len()];
    let mut x = vec![0.0; dimension];
    let mut idx = vec![0usize; dimension];
    for k in 0..rule.len() {
        let w = rule.point(k, &mut x);
        rule.point_indices(k, &mut idx);
        let fw = w * f(&x);
        if fw == 0.0 {
            continue;
        }
        for (slot, a) in acc.iter_mut().zip(&indices) {
            let mut h = fw;
            for (d, &ad) in a.0.iter().enumerate() {
                h *= tables[idx[d]][ad as usize];
            }
            *slot += h;
        }
    }
    SpectralFunction::from_entries(dimension, max_degree, indices.into_iter().zip(acc))
}

/// Coefficients of f·χ_B for a box B = Π [lo_i, hi_i]: c_α = ∫_B f Ĥ_α dμ by
/// composite Gauss–Legendre on each axis. Suited to data with jumps on ∂B.
pub fn project_on_box<F: Fn(&[f64]) -> f64>(
    f: F,
    lo: &[f64],
    hi: &[f64],
    max_degree: u32,
    panels: usize,
    order: usize,
) -> Result<SpectralFunction> {
    let dimension = lo.len();
    if hi.len() != dimension {
        return Err(Error::DimensionMismatch { expected: dimension, got: hi.len() });
    }
    if dimension == 0 || dimension > MAX_DIMENSION {
        return Err(Error::Resource(format!("dimension {dimension} outside 1..={MAX_DIMENSION}")));
    }
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..dimension)
        .map(|d| {
            let (x, w) = composite_legendre(lo[d], hi[d], panels, order);
            let g = (2.0 * std::f64::consts::PI).sqrt().recip();
            let w = x.iter().zip(w).map(|(x, w)| w * g * (-0.5 * x * x).exp()).collect();
            (x, w)
        })
        .collect();
    let m = axes[0].0.len();
    let total = m.pow(dimension as u32);
    if total > MAX_TENSOR_NODES {
        return Err(Error::Resource(format!("{total} box nodes exceed cap")));
    }
    let tables: Vec<Vec<Vec<f64>>> = axes
        .iter()
        .map(|(x, _)| x.iter().map(|&xi| normalized_table(max_degree, xi)).collect())
        .collect();
    let indices = MultiIndex::enumerate(dimension, max_degree);
    let mut acc = vec![0.0; indices.len()];
    let mut x = vec![0.0; dimension];
    let mut idx = vec![0usize; dimension];
    for k in 0..total {
        let mut r = k;
        let mut w = 1.0;
        for d in (0..dimension).rev() {
            idx[d] = r % m;
            r /= m;
            x[d] = axes[d].0[idx[d]];
            w *= axes[d].1[idx[d]];
        }
        let fw = w * f(&x);
        if fw == 0.0 {
            continue;
        }
        for (slot, a) in acc.iter_mut().zip(&indices) {
            let mut h = fw;
            for (d, &ad) in a.0.iter().enumerate() {
                h *= tables[d][idx[d]][ad as usize];
            }
            *slot += h;
        }
    }
    SpectralFunction::from_entries(dimension, max_degree, indices.into_iter().zip(acc))
}

/// Pointwise values Σ c_α Ĥ_α(x) at each point.
pub fn synthesize(s: &SpectralFunction, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points.iter().map(|p| s.evaluate(p)).collect()
}

/// ⟨s1, s2⟩ in L²(dμ) = Σ_α c¹_α c²_α.
pub fn inner_product_mu(s1: &SpectralFunction, s2: &SpectralFunction) -> Result<f64> {
    s1.check_dimension(s2)?;
    Ok(s1.coefficients.iter().map(|(a, c)| c * s2.coefficient(a)).sum())
}
