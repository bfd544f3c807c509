//! Power series truncated at a fixed order.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

/// Field operations needed by [`TruncatedSeries`].
pub trait Scalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    fn ln(self) -> Self;
    fn exp(self) -> Self;
    fn is_zero(self) -> bool;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn is_zero(self) -> bool {
        self == 0.0
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn ln(self) -> Self {
        Complex64::ln(self)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn is_zero(self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

/// Coefficients `c_0, ..., c_J` of a power series in `w`; products and
/// compositions discard every term of degree above `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries<T: Scalar = f64> {
    coeffs: Vec<T>,
}

impl<T: Scalar> TruncatedSeries<T> {
    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![T::from_f64(0.0); order + 1] }
    }

    pub fn constant(c: T, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// The series `w`.
    pub fn variable(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = T::from_f64(1.0);
        }
        s
    }

    /// Pads or truncates `coeffs` to `order`.
    pub fn from_coeffs(mut coeffs: Vec<T>, order: usize) -> Self {
        coeffs.resize(order + 1, T::from_f64(0.0));
        Self { coeffs }
    }

    /// `e^w - 1`.
    pub fn expm1_w(order: usize) -> Self {
        let mut s = Self::zero(order);
        let mut f = 1.0;
        for j in 1..=order {
            f /= j as f64;
            s.coeffs[j] = T::from_f64(f);
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> T {
        self.coeffs.get(j).copied().unwrap_or(T::from_f64(0.0))
    }

    pub fn scale(&self, c: T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|x| *x * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        Self { coeffs: (0..=n).map(|j| self.coeffs[j] + other.coeffs[j]).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(T::from_f64(-1.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let mut out = vec![T::from_f64(0.0); n + 1];
        for i in 0..=n {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..=(n - i) {
                out[i + j] = out[i + j] + self.coeffs[i] * other.coeffs[j];
            }
        }
        Self { coeffs: out }
    }

    /// `self(inner(w))`; requires `inner(0) = 0`.
    pub fn compose(&self, inner: &Self) -> Option<Self> {
        if !inner.coeffs[0].is_zero() {
            return None;
        }
        let n = self.order().min(inner.order());
        let mut acc = Self::constant(self.coeff(n), n);
        for i in (0..n).rev() {
            acc = acc.mul(inner);
            acc.coeffs[0] = acc.coeffs[0] + self.coeffs[i];
        }
        Some(acc)
    }

    /// Principal logarithm; requires a nonzero constant term.
    pub fn log(&self) -> Option<Self> {
        let f0 = self.coeffs[0];
        if f0.is_zero() {
            return None;
        }
        let n = self.order();
        let mut h = vec![T::from_f64(0.0); n + 1];
        h[0] = f0.ln();
        for m in 1..=n {
            let mut acc = T::from_f64(m as f64) * self.coeffs[m];
            for k in 1..m {
                acc = acc - T::from_f64(k as f64) * h[k] * self.coeffs[m - k];
            }
            h[m] = acc / (T::from_f64(m as f64) * f0);
        }
        Some(Self { coeffs: h })
    }

    pub fn exp(&self) -> Self {
        let n = self.order();
        let mut e = vec![T::from_f64(0.0); n + 1];
        e[0] = self.coeffs[0].exp();
        for m in 1..=n {
            let mut acc = T::from_f64(0.0);
            for k in 1..=m {
                acc = acc + T::from_f64(k as f64) * self.coeffs[k] * e[m - k];
            }
            e[m] = acc / T::from_f64(m as f64);
        }
        Self { coeffs: e }
    }

    pub fn eval(&self, w: T) -> T {
        self.coeffs.iter().rev().fold(T::from_f64(0.0), |acc, c| acc * w + *c)
    }
}

impl TruncatedSeries<Complex64> {
    pub fn re(&self) -> TruncatedSeries<f64> {
        TruncatedSeries { coeffs: self.coeffs.iter().map(|c| c.re).collect() }
    }
}
