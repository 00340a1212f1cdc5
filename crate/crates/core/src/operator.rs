//! The Kolmogorov operator L = Δ + b·∇ (b = ∇μ/μ) and its square A = L²,
//! applied spectrally in the Gaussian case and pointwise for any measure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{falling_sqrt, normalized_table, SpectralFunction};
use crate::measures::Measure;

/// How an operator is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    Pointwise,
}

/// Gaussian L: c_α ↦ −|α| c_α.
pub fn apply_l_spectral(s: &SpectralFunction) -> SpectralFunction {
    s.map_modes(|a| -(a.order() as f64))
}

/// Gaussian A = L²: c_α ↦ |α|² c_α.
pub fn apply_a_spectral(s: &SpectralFunction) -> SpectralFunction {
    s.map_modes(|a| (a.order() as f64).powi(2))
}

/// A function whose partial derivatives can be evaluated pointwise.
pub trait TrialFunction {
    fn dimension(&self) -> usize;

    /// Highest derivative order available.
    fn max_order(&self) -> u32 {
        u32::MAX
    }

    /// ∂^β f(x), with β given per axis.
    fn partial(&self, beta: &[u32], x: &[f64]) -> Result<f64>;

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.partial(&vec![0; self.dimension()], x)
    }
}

fn check_order<T: TrialFunction + ?Sized>(f: &T, beta: &[u32], x: &[f64]) -> Result<()> {
    if x.len() != f.dimension() || beta.len() != f.dimension() {
        return Err(Error::DimensionMismatch { expected: f.dimension(), got: x.len().min(beta.len()) });
    }
    let order: u32 = beta.iter().sum();
    if order > f.max_order() {
        return Err(Error::Misuse(format!("derivative of order {order} not available (max {})", f.max_order())));
    }
    Ok(())
}

impl TrialFunction for SpectralFunction {
    fn dimension(&self) -> usize {
        SpectralFunction::dimension(self)
    }

    fn partial(&self, beta: &[u32], x: &[f64]) -> Result<f64> {
        check_order(self, beta, x)?;
        let tables: Vec<Vec<f64>> = x.iter().map(|&xi| normalized_table(self.max_degree(), xi)).collect();
        Ok(self
            .iter()
            .filter(|(a, _)| a.entries().iter().zip(beta).all(|(ai, bi)| ai >= bi))
            .map(|(a, c)| {
                c * a
                    .entries()
                    .iter()
                    .zip(beta)
                    .enumerate()
                    .map(|(i, (&ai, &bi))| falling_sqrt(ai, bi) * tables[i][(ai - bi) as usize])
                    .product::<f64>()
            })
            .sum())
    }
}

/// A polynomial in the monomial basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dimension: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn new<I: IntoIterator<Item = (Vec<u32>, f64)>>(dimension: usize, terms: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (e, c) in terms {
            if e.len() != dimension {
                return Err(Error::DimensionMismatch { expected: dimension, got: e.len() });
            }
            *map.entry(e).or_insert(0.0) += c;
        }
        Ok(Self { dimension, terms: map })
    }

    /// x_axis^k
    pub fn monomial(dimension: usize, axis: usize, k: u32) -> Self {
        let mut e = vec![0; dimension];
        e[axis] = k;
        Self { dimension, terms: BTreeMap::from([(e, 1.0)]) }
    }
}

impl TrialFunction for Polynomial {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn partial(&self, beta: &[u32], x: &[f64]) -> Result<f64> {
        check_order(self, beta, x)?;
        let mut acc = 0.0;
        for (e, c) in &self.terms {
            if e.iter().zip(beta).any(|(ei, bi)| bi > ei) {
                continue;
            }
            let mut t = *c;
            for i in 0..self.dimension {
                let falling: f64 = (0..beta[i]).map(|j| (e[i] - j) as f64).product();
                t *= falling * x[i].powi((e[i] - beta[i]) as i32);
            }
            acc += t;
        }
        Ok(acc)
    }
}

/// Derivatives of a closure by nested order-4 central differences.
pub struct FiniteDifference<F> {
    dimension: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64> FiniteDifference<F> {
    pub fn new(dimension: usize, f: F) -> Self {
        Self { dimension, f }
    }

    fn nested(&self, mut beta: Vec<u32>, x: &mut Vec<f64>, step: f64) -> f64 {
        match beta.iter().position(|&b| b > 0) {
            None => (self.f)(x),
            Some(i) => {
                beta[i] -= 1;
                let x0 = x[i];
                let mut at = |s: f64| {
                    x[i] = x0 + s * step;
                    let v = self.nested(beta.clone(), x, step);
                    x[i] = x0;
                    v
                };
                (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * step)
            }
        }
    }
}

impl<F: Fn(&[f64]) -> f64> TrialFunction for FiniteDifference<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn max_order(&self) -> u32 {
        4
    }

    fn partial(&self, beta: &[u32], x: &[f64]) -> Result<f64> {
        check_order(self, beta, x)?;
        let order: u32 = beta.iter().sum();
        let step = fd_step(x) * 10f64.powf(0.4 * order.saturating_sub(1) as f64);
        Ok(self.nested(beta.to_vec(), &mut x.to_vec(), step))
    }
}

/// Step for the order-4 central difference oracle: 1e-3·(1 + |x|).
pub fn fd_step(x: &[f64]) -> f64 {
    1e-3 * (1.0 + crate::measures::norm(x))
}

/// Order-4 central difference of a scalar field along an axis.
pub fn central_difference<F: Fn(&[f64]) -> Result<f64>>(f: F, x: &[f64], axis: usize) -> Result<f64> {
    let h = fd_step(x);
    let mut y = x.to_vec();
    let mut at = |s: f64| {
        y[axis] = x[axis] + s * h;
        f(&y)
    };
    Ok((-at(2.0)? + 8.0 * at(1.0)? - 8.0 * at(-1.0)? + at(-2.0)?) / (12.0 * h))
}

/// Pointwise derivatives through fourth order.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
    pub grad_laplacian: Vec<f64>,
    pub bilaplacian: f64,
}

impl Jet {
    pub fn laplacian(&self) -> f64 {
        (0..self.gradient.len()).map(|i| self.hessian[i][i]).sum()
    }
}

fn unit(n: usize, pairs: &[usize]) -> Vec<u32> {
    let mut b = vec![0; n];
    for &i in pairs {
        b[i] += 1;
    }
    b
}

/// Gradient and Hessian at x.
pub fn second_jet<T: TrialFunction + ?Sized>(f: &T, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = f.dimension();
    let g = (0..n).map(|i| f.partial(&unit(n, &[i]), x)).collect::<Result<Vec<_>>>()?;
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = f.partial(&unit(n, &[i, j]), x)?;
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    Ok((g, h))
}

pub fn fourth_jet<T: TrialFunction + ?Sized>(f: &T, x: &[f64]) -> Result<Jet> {
    let n = f.dimension();
    let (gradient, hessian) = second_jet(f, x)?;
    let mut grad_laplacian = vec![0.0; n];
    let mut bilaplacian = 0.0;
    for j in 0..n {
        for (k, gl) in grad_laplacian.iter_mut().enumerate() {
            *gl += f.partial(&unit(n, &[j, j, k]), x)?;
        }
        for k in 0..n {
            bilaplacian += f.partial(&unit(n, &[j, j, k, k]), x)?;
        }
    }
    Ok(Jet { gradient, hessian, grad_laplacian, bilaplacian })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lf(x) = Δf(x) + b(x)·∇f(x).
pub fn apply_l_pointwise<T: TrialFunction + ?Sized>(m: &Measure, f: &T, x: &[f64]) -> Result<f64> {
    if f.dimension() != m.dimension() {
        return Err(Error::DimensionMismatch { expected: m.dimension(), got: f.dimension() });
    }
    let b = m.drift(x)?;
    let (g, h) = second_jet(f, x)?;
    let lap: f64 = (0..g.len()).map(|i| h[i][i]).sum();
    Ok(lap + dot(&b, &g))
}

/// The eight summands of Af in terms of b = ∇μ/μ and M = Db + b⊗b:
///
/// ```text
/// Δ²f + 2b·∇Δf + 2Tr(M D²f) − (D²f b)·b − (M∇f)·b
///     + (∇Δμ/μ)·∇f − (Δμ/μ)(b·∇f) + |b|²(b·∇f)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ATerms {
    pub terms: [f64; 8],
}

impl ATerms {
    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }
}

pub fn a_terms<T: TrialFunction + ?Sized>(m: &Measure, f: &T, x: &[f64]) -> Result<ATerms> {
    let n = m.dimension();
    if f.dimension() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.dimension() });
    }
    let b = m.drift(x)?;
    let jac = m.drift_jacobian(x)?;
    let lap_ratio = m.laplacian_ratio(x)?;
    let grad_lap_ratio = m.grad_laplacian_ratio(x)?;
    let jet = fourth_jet(f, x)?;
    let g = &jet.gradient;
    let h = &jet.hessian;

    let mm: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| jac[i][j] + b[i] * b[j]).collect()).collect();
    let b_grad = dot(&b, g);
    let b2 = dot(&b, &b);
    let tr: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| mm[i][j] * h[i][j]).sum();
    let hbb: f64 = (0..n).map(|i| dot(&h[i], &b) * b[i]).sum();
    let mgb: f64 = (0..n).map(|i| dot(&mm[i], g) * b[i]).sum();

    Ok(ATerms {
        terms: [
            jet.bilaplacian,
            2.0 * dot(&b, &jet.grad_laplacian),
            2.0 * tr,
            -hbb,
            -mgb,
            dot(&grad_lap_ratio, g),
            -lap_ratio * b_grad,
            b2 * b_grad,
        ],
    })
}

/// Af(x) through the explicit eight-term formula.
pub fn apply_a_pointwise<T: TrialFunction + ?Sized>(m: &Measure, f: &T, x: &[f64]) -> Result<f64> {
    Ok(a_terms(m, f, x)?.total())
}

/// Af(x) for the Gaussian through Δ²f − 2x·∇Δf + xᵀD²f x − 2Δf + x·∇f.
pub fn apply_a_gaussian_pointwise<T: TrialFunction + ?Sized>(f: &T, x: &[f64]) -> Result<f64> {
    let jet = fourth_jet(f, x)?;
    let n = x.len();
    let xhx: f64 = (0..n).map(|i| dot(&jet.hessian[i], x) * x[i]).sum();
    Ok(jet.bilaplacian - 2.0 * dot(x, &jet.grad_laplacian) + xhx - 2.0 * jet.laplacian() + dot(x, &jet.gradient))
}

/// |L(∂_k f) − ∂_k(Lf) + ∇b_k·∇f| at x, with ∂_k(Lf) taken by order-4
/// central differences.
pub fn commutator_check<T: TrialFunction + ?Sized>(m: &Measure, f: &T, x: &[f64], k: usize) -> Result<f64> {
    let n = m.dimension();
    if k >= n {
        return Err(Error::Misuse(format!("axis {k} out of range for dimension {n}")));
    }
    let dk = Shifted { inner: f, axis: k };
    let l_dk = apply_l_pointwise(m, &dk, x)?;
    let dk_l = central_difference(|y| apply_l_pointwise(m, f, y), x, k)?;
    let jac = m.drift_jacobian(x)?;
    let (g, _) = second_jet(f, x)?;
    let grad_bk: f64 = (0..n).map(|i| jac[i][k] * g[i]).sum();
    Ok((l_dk - dk_l + grad_bk).abs())
}

/// ∂_axis f as a trial function.
struct Shifted<'a, T: ?Sized> {
    inner: &'a T,
    axis: usize,
}

impl<T: TrialFunction + ?Sized> TrialFunction for Shifted<'_, T> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn max_order(&self) -> u32 {
        self.inner.max_order().saturating_sub(1)
    }

    fn partial(&self, beta: &[u32], x: &[f64]) -> Result<f64> {
        let mut b = beta.to_vec();
        b[self.axis] += 1;
        self.inner.partial(&b, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{quadrature_rule, MultiIndex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn he2() -> Polynomial {
        Polynomial::new(1, [(vec![2], 1.0), (vec![0], -1.0)]).unwrap()
    }

    #[test]
    fn spectral_examples() {
        let c = SpectralFunction::constant(2, 3.0);
        assert_eq!(apply_l_spectral(&c).norm(), 0.0);
        assert_eq!(apply_a_spectral(&c).norm(), 0.0);
        let h2 = SpectralFunction::mode(MultiIndex::new(vec![2]));
        assert_eq!(apply_l_spectral(&h2).coefficient(&MultiIndex::new(vec![2])), -2.0);
        assert_eq!(apply_a_spectral(&h2).coefficient(&MultiIndex::new(vec![2])), 4.0);
        let h12 = SpectralFunction::mode(MultiIndex::new(vec![1, 2]));
        assert_eq!(apply_l_spectral(&h12).coefficient(&MultiIndex::new(vec![1, 2])), -3.0);
        let h111 = SpectralFunction::mode(MultiIndex::new(vec![1, 1, 1]));
        assert_eq!(apply_a_spectral(&h111).coefficient(&MultiIndex::new(vec![1, 1, 1])), 9.0);
        assert_eq!(apply_a_spectral(&h111).max_degree(), 3);
    }

    #[test]
    fn pointwise_l_examples() {
        let g = Measure::gaussian(1).unwrap();
        let x1 = Polynomial::monomial(1, 0, 1);
        assert!((apply_l_pointwise(&g, &x1, &[3.0]).unwrap() + 3.0).abs() < 1e-14);
        assert!((apply_l_pointwise(&g, &he2(), &[2.0]).unwrap() + 6.0).abs() < 1e-14);
        let p = Measure::power(1, 4.0).unwrap();
        let x2 = Polynomial::monomial(1, 0, 2);
        assert!((apply_l_pointwise(&p, &x2, &[1.0]).unwrap() + 6.0).abs() < 1e-14);
    }

    #[test]
    fn pointwise_a_examples() {
        let g = Measure::gaussian(1).unwrap();
        assert!(apply_a_pointwise(&g, &he2(), &[1.0]).unwrap().abs() < 1e-14);
        assert!((apply_a_pointwise(&g, &he2(), &[2.0]).unwrap() - 12.0).abs() < 1e-13);
        let one = Polynomial::new(1, [(vec![0], 1.0)]).unwrap();
        assert_eq!(apply_a_pointwise(&g, &one, &[0.4]).unwrap(), 0.0);
        let t = a_terms(&g, &he2(), &[2.0]).unwrap();
        // term 3 = 2Tr((−I + xxᵀ)D²f) = 2(−2 + 2x²)
        assert!((t.terms[2] - 12.0).abs() < 1e-13);
    }

    #[test]
    fn general_formula_reduces_to_gaussian_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3 {
            let g = Measure::gaussian(n).unwrap();
            for alpha in MultiIndex::enumerate(n, 5) {
                let f = SpectralFunction::mode(alpha);
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let a = apply_a_pointwise(&g, &f, &x).unwrap();
                let b = apply_a_gaussian_pointwise(&f, &x).unwrap();
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn spectral_and_pointwise_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let g = Measure::gaussian(n).unwrap();
            for alpha in MultiIndex::enumerate(n, 8) {
                let k = alpha.order() as f64;
                let f = SpectralFunction::mode(alpha);
                for _ in 0..20 {
                    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                    let r = crate::measures::norm(&x);
                    if r > 3.0 {
                        x.iter_mut().for_each(|v| *v *= 3.0 / r);
                    }
                    let expected = k * k * f.evaluate(&x).unwrap();
                    let got = apply_a_pointwise(&g, &f, &x).unwrap();
                    let scale = expected.abs().max(1.0);
                    assert!((got - expected).abs() <= 1e-8 * scale, "{f:?} at {x:?}: {got} vs {expected}");
                }
            }
        }
    }

    #[test]
    fn commutator_examples() {
        let g = Measure::gaussian(1).unwrap();
        let he3 = SpectralFunction::mode(MultiIndex::new(vec![3]));
        for x in [-1.3, 0.0, 0.4, 2.2] {
            assert!(commutator_check(&g, &he3, &[x], 0).unwrap() < 1e-10);
        }
        let p = Measure::power(1, 4.0).unwrap();
        let x3 = Polynomial::monomial(1, 0, 3);
        assert!(commutator_check(&p, &x3, &[0.7], 0).unwrap() < 1e-7);
        let c = Polynomial::new(2, [(vec![0, 0], 2.0)]).unwrap();
        assert_eq!(commutator_check(&Measure::gaussian(2).unwrap(), &c, &[0.3, 0.1], 1).unwrap(), 0.0);
        let q = Measure::rational(2, 2.0, 6.0).unwrap();
        let f = Polynomial::new(2, [(vec![2, 1], 1.0), (vec![0, 3], -0.5)]).unwrap();
        assert!(commutator_check(&q, &f, &[0.6, -0.4], 0).unwrap() < 1e-7);
    }

    #[test]
    fn finite_difference_wrapper() {
        let fd = FiniteDifference::new(2, |x: &[f64]| x[0].powi(3) * x[1] + x[1].sin());
        let exact = |b: &[u32], x: &[f64]| match b {
            [1, 0] => 3.0 * x[0] * x[0] * x[1],
            [2, 1] => 6.0 * x[0],
            [0, 4] => x[1].sin(),
            _ => unreachable!(),
        };
        let x = [0.4, 0.9];
        for b in [[1, 0], [2, 1], [0, 4]] {
            assert!((fd.partial(&b, &x).unwrap() - exact(&b, &x)).abs() < 1e-6, "{b:?}");
        }
        assert!(matches!(fd.partial(&[3, 2], &x), Err(Error::Misuse(_))));
    }

    /// ⟨Lf, g⟩, ⟨f, Lg⟩, ⟨Lf, f⟩ + ‖∇f‖², ⟨Af, f⟩ − ‖Lf‖² by Gaussian quadrature.
    #[test]
    fn symmetry_dissipativity_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=2 {
            let g = Measure::gaussian(n).unwrap();
            let rule = quadrature_rule(n, 16).unwrap();
            for _ in 0..5 {
                let rand_fn = |rng: &mut ChaCha8Rng| {
                    let entries: Vec<_> =
                        MultiIndex::enumerate(n, 4).into_iter().map(|a| (a, rng.gen_range(-1.0..1.0))).collect();
                    SpectralFunction::from_entries(n, 4, entries).unwrap()
                };
                let f = rand_fn(&mut rng);
                let h = rand_fn(&mut rng);
                let lf = |x: &[f64]| apply_l_pointwise(&g, &f, x).unwrap();
                let lh = |x: &[f64]| apply_l_pointwise(&g, &h, x).unwrap();
                let ev = |s: &SpectralFunction, x: &[f64]| s.evaluate(x).unwrap();
                let a = rule.integrate(|x| lf(x) * ev(&h, x));
                let b = rule.integrate(|x| ev(&f, x) * lh(x));
                assert!((a - b).abs() < 1e-8);
                let diss = rule.integrate(|x| lf(x) * ev(&f, x));
                assert!((diss + f.gradient_norm_sq()).abs() < 1e-8);
                let af = rule.integrate(|x| apply_a_pointwise(&g, &f, x).unwrap() * ev(&f, x));
                let lf2 = rule.integrate(|x| lf(x).powi(2));
                assert!((af - lf2).abs() < 1e-8 * lf2.max(1.0));
            }
        }
    }

    #[test]
    fn singular_points_are_reported() {
        let q = Measure::rational(1, 2.0, 6.0).unwrap();
        let f = Polynomial::monomial(1, 0, 2);
        assert!(matches!(apply_l_pointwise(&q, &f, &[0.0]), Err(Error::Singularity { .. })));
        assert!(matches!(apply_a_pointwise(&q, &f, &[0.0]), Err(Error::Singularity { .. })));
    }
}
