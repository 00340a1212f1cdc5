//! Truncated Taylor jets in one variable: value and derivatives through
//! fourth order, propagated by Leibniz and Faà di Bruno.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// `d[k]` is the k-th derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub d: [f64; 5],
}

const BINOM: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

impl Jet {
    pub fn constant(c: f64) -> Self {
        Self { d: [c, 0.0, 0.0, 0.0, 0.0] }
    }

    /// The independent variable at `x`.
    pub fn var(x: f64) -> Self {
        Self { d: [x, 1.0, 0.0, 0.0, 0.0] }
    }

    pub fn value(&self) -> f64 {
        self.d[0]
    }

    /// h∘self, given h and its first four derivatives at self.value().
    pub fn compose(&self, h: [f64; 5]) -> Self {
        let [_, f1, f2, f3, f4] = self.d;
        Self {
            d: [
                h[0],
                h[1] * f1,
                h[2] * f1 * f1 + h[1] * f2,
                h[3] * f1.powi(3) + 3.0 * h[2] * f1 * f2 + h[1] * f3,
                h[4] * f1.powi(4) + 6.0 * h[3] * f1 * f1 * f2 + h[2] * (4.0 * f1 * f3 + 3.0 * f2 * f2) + h[1] * f4,
            ],
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.d[0].exp();
        self.compose([e; 5])
    }

    pub fn ln(&self) -> Self {
        let x = self.d[0];
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / x.powi(3), -6.0 / x.powi(4)])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.d[0].sin_cos();
        self.compose([s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.d[0].sin_cos();
        self.compose([c, -s, -c, s, c])
    }

    pub fn powf(&self, p: f64) -> Self {
        let x = self.d[0];
        let mut h = [0.0; 5];
        let mut coef = 1.0;
        for (k, hk) in h.iter_mut().enumerate() {
            *hk = if coef == 0.0 { 0.0 } else { coef * x.powf(p - k as f64) };
            coef *= p - k as f64;
        }
        self.compose(h)
    }

    pub fn powi(&self, k: i32) -> Self {
        let mut out = Jet::constant(1.0);
        let base = if k >= 0 { *self } else { self.recip() };
        for _ in 0..k.unsigned_abs() {
            out = out * base;
        }
        out
    }

    pub fn recip(&self) -> Self {
        let x = self.d[0];
        self.compose([1.0 / x, -1.0 / (x * x), 2.0 / x.powi(3), -6.0 / x.powi(4), 24.0 / x.powi(5)])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet { d: std::array::from_fn(|k| self.d[k] + o.d[k]) }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet { d: std::array::from_fn(|k| self.d[k] - o.d[k]) }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { d: self.d.map(|v| -v) }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet { d: std::array::from_fn(|k| (0..=k).map(|j| BINOM[k][j] * self.d[j] * o.d[k - j]).sum()) }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.d[0] += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.d[0] -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        Jet { d: self.d.map(|v| v * c) }
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j * self
    }
}
