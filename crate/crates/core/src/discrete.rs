//! Flux-form finite differences for L on a line or on radial profiles,
//! for general radial measures.
//!
//! With cell weights w_i and face weights c_{i+1/2},
//!
//! ```text
//! (L_h u)_i = [c_{i+1/2}(u_{i+1} − u_i) − c_{i−1/2}(u_i − u_{i−1})] / (w_i h)
//! ```
//!
//! and zero flux through the outer faces. On the line w_i = μ(x_i)h and
//! c = μ/h at midpoints; on radial grids μ is replaced by ω_N r^{N−1}μ(r).
//! L_h is symmetric in Σ w_i u_i v_i and annihilates constants exactly.
//! A_h = L_h².

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::positivity::{PositivityScan, Region};
use crate::quad::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// Uniform nodes on [−R, R] for a one-dimensional measure.
    Line,
    /// Cell centres (i + 1/2)h on [0, R] for radial functions in ℝᴺ.
    Radial,
}

#[derive(Debug)]
pub struct DiscreteOperator {
    kind: GridKind,
    dimension: usize,
    label: String,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// c_{i+1/2}/h between nodes i and i + 1.
    faces: Vec<f64>,
    full: OnceLock<std::result::Result<Eigenpairs, String>>,
}

/// Eigenpairs of −L_h, ascending, μ-orthonormal vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl Eigenpairs {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue\n");
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{i},{v:e}\n"));
        }
        s
    }
}

/// Assembles L_h. Requires μ(R) < 1e-12·max μ on the grid and h ≤ R/100.
pub fn build_discrete_l(m: &Measure, kind: GridKind, r_max: f64, h: f64) -> Result<DiscreteOperator> {
    if !(r_max > 0.0 && h > 0.0) {
        return Err(Error::Misuse("grid needs R > 0 and h > 0".into()));
    }
    if h > r_max / 100.0 {
        return Err(Error::Misuse(format!("h = {h} exceeds R/100 = {}", r_max / 100.0)));
    }
    let count = (r_max / h).round() as usize;
    if ((count as f64) * h - r_max).abs() > 1e-9 * r_max {
        return Err(Error::Misuse("R must be a multiple of h".into()));
    }
    let (nodes, density): (Vec<f64>, Box<dyn Fn(f64) -> f64>) = match kind {
        GridKind::Line => {
            if m.dimension() != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: m.dimension() });
            }
            let nodes = (0..=2 * count).map(|i| -r_max + i as f64 * h).collect();
            (nodes, Box::new(|x: f64| m.density_radial(x.abs())))
        }
        GridKind::Radial => {
            if m.dimension() < 2 {
                return Err(Error::Misuse("radial grids need N >= 2".into()));
            }
            let nodes = (0..count).map(|i| (i as f64 + 0.5) * h).collect();
            let w = sphere_area(m.dimension());
            let nm1 = m.dimension() as i32 - 1;
            (nodes, Box::new(move |r: f64| w * r.powi(nm1) * m.density_radial(r)))
        }
    };
    let weights: Vec<f64> = nodes.iter().map(|&x| density(x) * h).collect();
    let peak = weights.iter().copied().fold(0.0, f64::max);
    let edge = *weights.last().unwrap();
    if !(edge < 1e-12 * peak) {
        return Err(Error::Misuse(format!("density at R = {r_max} is not below 1e-12 of its peak")));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Misuse("density underflows or is singular on the grid; reduce R".into()));
    }
    let faces = nodes.windows(2).map(|p| density(0.5 * (p[0] + p[1])) / h).collect();
    Ok(DiscreteOperator {
        kind,
        dimension: m.dimension(),
        label: m.label(),
        h,
        nodes,
        weights,
        faces,
        full: OnceLock::new(),
    })
}

impl DiscreteOperator {
    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn flux(&self, u: &[f64], i: usize) -> f64 {
        self.faces[i] * (u[i + 1] - u[i])
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        let n = self.len();
        Ok((0..n)
            .map(|i| {
                let right = if i + 1 < n { self.flux(u, i) } else { 0.0 };
                let left = if i > 0 { self.flux(u, i - 1) } else { 0.0 };
                (right - left) / self.weights[i]
            })
            .collect())
    }

    /// A_h u = L_h(L_h u).
    pub fn apply_a(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply(&self.apply(u)?)
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: u.len() });
        }
        Ok(())
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.weights).map(|((a, b), w)| a * b * w).sum()
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Σ u_i w_i.
    pub fn mean(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Σ c_{i+1/2} (u_{i+1} − u_i)², the discrete Dirichlet form.
    pub fn dirichlet_form(&self, u: &[f64]) -> f64 {
        (0..self.faces.len()).map(|i| self.faces[i] * (u[i + 1] - u[i]).powi(2)).sum()
    }

    /// W^{1/2}(−L_h)W^{−1/2} as (diagonal, off-diagonal).
    fn symmetric_tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let diag = (0..n)
            .map(|i| {
                let r = if i + 1 < n { self.faces[i] } else { 0.0 };
                let l = if i > 0 { self.faces[i - 1] } else { 0.0 };
                (r + l) / self.weights[i]
            })
            .collect();
        let off = (0..n - 1).map(|i| -self.faces[i] / (self.weights[i] * self.weights[i + 1]).sqrt()).collect();
        (diag, off)
    }

    fn from_symmetric(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.weights).map(|(v, w)| v / w.sqrt()).collect()
    }

    fn full_eigenpairs(&self) -> Result<&Eigenpairs> {
        let r = self.full.get_or_init(|| {
            let n = self.len();
            if n > 6000 {
                return Err(format!("dense eigensolve of size {n} exceeds the cap"));
            }
            let (d, e) = self.symmetric_tridiagonal();
            let mut t = DMatrix::zeros(n, n);
            for i in 0..n {
                t[(i, i)] = d[i];
                if i + 1 < n {
                    t[(i, i + 1)] = e[i];
                    t[(i + 1, i)] = e[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
            let vectors = order
                .iter()
                .map(|&k| self.from_symmetric(eig.eigenvectors.column(k).as_slice()))
                .collect();
            Ok(Eigenpairs { values, vectors })
        });
        r.as_ref().map_err(|e| Error::Resource(e.clone()))
    }
}

/// Number of eigenvalues of the symmetric tridiagonal (d, e) below x.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    let tiny = f64::MIN_POSITIVE.sqrt();
    for i in 0..d.len() {
        if i > 0 {
            let denom = if q == 0.0 { tiny } else { q };
            q = d[i] - x - e[i - 1] * e[i - 1] / denom;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect_eigenvalue(d: &[f64], e: &[f64], k: usize, lo: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if sturm_count(d, e, mid) > k {
            b = mid;
        } else {
            a = mid;
        }
    }
    0.5 * (a + b)
}

/// Solves (T − sI)y = rhs for a general tridiagonal T given by its sub-,
/// main and super-diagonals, by LU with partial pivoting.
fn tridiagonal_solve(sub: &[f64], diag: &[f64], sup: &[f64], s: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let tiny = 1e-300;
    let mut d: Vec<f64> = diag.iter().map(|v| v - s).collect();
    let dl = sub.to_vec();
    let mut du = sup.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - f * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            b.swap(i, i + 1);
            b[i + 1] -= f * b[i];
        }
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = b[i];
        if i + 1 < n {
            v -= du[i] * y[i + 1];
        }
        if i + 2 < n {
            v -= du2[i] * y[i + 2];
        }
        y[i] = v / if d[i] == 0.0 { tiny } else { d[i] };
    }
    y
}

/// The k smallest eigenpairs of −L_h: eigenvalues by Sturm bisection on the
/// symmetrized form, eigenvectors by inverse iteration on −L_h itself, whose
/// rows stay well scaled where μ is tiny.
pub fn spectrum(op: &DiscreteOperator, k: usize) -> Result<Eigenpairs> {
    if k < 2 {
        return Err(Error::Misuse("spectrum needs k >= 2".into()));
    }
    let n = op.len();
    let k = k.min(n);
    let (d, e) = op.symmetric_tridiagonal();
    let bound = (0..n)
        .map(|i| d[i] + if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 })
        .fold(0.0, f64::max);
    let lo = -1e-12 * bound - 1e-300;
    let hi = bound * (1.0 + 1e-12) + 1e-300;
    let values: Vec<f64> = (0..k).into_par_iter().map(|j| bisect_eigenvalue(&d, &e, j, lo, hi)).collect();
    let sup: Vec<f64> = (0..n - 1).map(|i| -op.faces[i] / op.weights[i]).collect();
    let sub: Vec<f64> = (0..n - 1).map(|i| -op.faces[i] / op.weights[i + 1]).collect();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, &lambda) in values.iter().enumerate() {
        let shift = lambda - 4.0 * f64::EPSILON * bound;
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7 + j * 13) % 17) as f64).collect();
        for _ in 0..4 {
            v = tridiagonal_solve(&sub, &d, &sup, shift, &v);
            for prev in &vectors {
                let dot = op.inner(prev, &v);
                v.iter_mut().zip(prev).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = op.norm(&v);
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::NonConvergence(format!("inverse iteration failed for eigenvalue {j}")));
            }
            v.iter_mut().for_each(|a| *a /= norm);
        }
        // sign convention: positive mean, else positive first significant entry
        let s = op.mean(&v);
        let flip = if s.abs() > 1e-8 { s < 0.0 } else { v.iter().find(|x| x.abs() > 1e-12).is_some_and(|x| *x < 0.0) };
        if flip {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        vectors.push(v);
    }
    Ok(Eigenpairs { values, vectors })
}

/// e^{−tA_h}f through the eigenbasis of −L_h, dropping modes damped below
/// 1e-20.
pub fn evolve_discrete_a(op: &DiscreteOperator, f: &[f64], t: f64) -> Result<Vec<f64>> {
    op.check_len(f)?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    if t == 0.0 {
        return Ok(f.to_vec());
    }
    let cut = (46.0 / t).sqrt();
    let mut k = 16;
    let pairs = loop {
        if k >= op.len() || k > 400 {
            break op.full_eigenpairs()?.clone();
        }
        let p = spectrum(op, k)?;
        if *p.values.last().unwrap() > cut {
            break p;
        }
        k *= 2;
    };
    let mut out = vec![0.0; op.len()];
    for (lambda, v) in pairs.values.iter().zip(&pairs.vectors) {
        let damp = (-lambda * lambda * t).exp();
        if damp < 1e-20 {
            continue;
        }
        let c = op.inner(f, v) * damp;
        out.iter_mut().zip(v).for_each(|(o, vi)| *o += c * vi);
    }
    Ok(out)
}

/// Discrete analogue of the positivity scan: e^{−tA_h}(χ_K f) on the grid
/// nodes inside K. Supported for measures decaying like e^{−c|x|^a}, a > 1.
pub fn general_positivity_scan<F: Fn(f64) -> f64>(
    op: &DiscreteOperator,
    f: F,
    k: (f64, f64),
    times: &[f64],
) -> Result<PositivityScan> {
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Misuse("time grid must be positive and increasing".into()));
    }
    let mask: Vec<bool> = op.nodes.iter().map(|&x| x >= k.0 && x <= k.1).collect();
    let inside: Vec<usize> = (0..op.len()).filter(|&i| mask[i]).collect();
    if inside.is_empty() {
        return Err(Error::Misuse("no grid nodes inside K".into()));
    }
    let datum: Vec<f64> = (0..op.len()).map(|i| if mask[i] { f(op.nodes[i]) } else { 0.0 }).collect();
    if let Some(i) = inside.iter().find(|&&i| !(datum[i] >= 0.0)) {
        return Err(Error::Rejected(format!("datum is negative at x = {}", op.nodes[*i])));
    }
    if inside.iter().all(|&i| datum[i] == 0.0) {
        return Err(Error::Rejected("datum vanishes on K".into()));
    }
    let floor = op.mean(&datum);
    let values: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| {
            let e = evolve_discrete_a(op, &datum, t)?;
            Ok(inside.iter().map(|&i| e[i]).collect())
        })
        .collect::<Result<_>>()?;
    let points: Vec<Vec<f64>> = inside.iter().map(|&i| vec![op.nodes[i]]).collect();
    let region = match op.kind {
        GridKind::Line => Region::interval(k.0, k.1),
        GridKind::Radial => Region::Ball { center: vec![0.0; op.dimension], radius: k.1 },
    };
    Ok(PositivityScan::from_samples(region, "grid datum".into(), times.to_vec(), &points, values, floor))
}
