//! Finitely supported laws on `{0, k, 2k, ...}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cumulants::CumulantSeq;
use crate::numeric::{compensated_sum, normal_cdf, CompensatedSum};
use crate::ErrorClass;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("probability vector is empty")]
    Empty,
    #[error("probability at index {index} is negative or not finite: {value}")]
    InvalidEntry { index: usize, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("span must be a positive integer")]
    ZeroSpan,
    #[error("spans differ: {0} vs {1}")]
    SpanMismatch(u64, u64),
    #[error("distribution is degenerate (variance zero)")]
    Degenerate,
    #[error("truncation order must lie in 2..=64, got {0}")]
    BadOrder(usize),
    #[error("cumulant of order {0} overflows")]
    Overflow(usize),
}

impl DistError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DistError::Overflow(_) => ErrorClass::Internal,
            _ => ErrorClass::Precondition,
        }
    }
}

const SUM_TOL: f64 = 1e-12;
const RENORM_TOL: f64 = 1e-9;

/// A probability vector `probs[i] = P(X = i * span)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf {
    probs: Vec<f64>,
    span: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mu: f64,
    pub sigma2: f64,
    pub sigma: f64,
}

impl DiscretePmf {
    /// Validates `probs`. Sums within 1e-12 of one are kept as given, sums
    /// within 1e-9 are renormalized, anything further off is rejected.
    /// Entries in `[-1e-15, 0)` are clamped to zero.
    pub fn new(mut probs: Vec<f64>, span: u64) -> Result<Self, DistError> {
        if span == 0 {
            return Err(DistError::ZeroSpan);
        }
        if probs.is_empty() {
            return Err(DistError::Empty);
        }
        for (index, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() || *p < -1e-15 {
                return Err(DistError::InvalidEntry { index, value: *p });
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total = compensated_sum(probs.iter().copied());
        if total <= 0.0 || (total - 1.0).abs() > RENORM_TOL {
            return Err(DistError::NotNormalized(total));
        }
        if (total - 1.0).abs() > SUM_TOL {
            for p in probs.iter_mut() {
                *p /= total;
            }
        }
        Ok(Self { probs, span })
    }

    pub fn point_mass(at: usize) -> Self {
        let mut probs = vec![0.0; at + 1];
        probs[at] = 1.0;
        Self { probs, span: 1 }
    }

    pub fn bernoulli(p: f64) -> Result<Self, DistError> {
        Self::new(vec![1.0 - p, p], 1)
    }

    /// Binomial(n, p) evaluated through log-gamma so that large `n` does not
    /// underflow intermediate products.
    pub fn binomial(n: usize, p: f64) -> Result<Self, DistError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(DistError::InvalidEntry { index: 0, value: p });
        }
        if p == 0.0 {
            return Ok(Self::point_mass(0));
        }
        if p == 1.0 {
            return Ok(Self::point_mass(n));
        }
        use libm::lgamma as ln_gamma;
        let lp = p.ln();
        let lq = (-p).ln_1p();
        let lnf = ln_gamma(n as f64 + 1.0);
        let probs: Vec<f64> = (0..=n)
            .map(|k| {
                let k_f = k as f64;
                (lnf - ln_gamma(k_f + 1.0) - ln_gamma((n - k) as f64 + 1.0) + k_f * lp + (n - k) as f64 * lq).exp()
            })
            .collect();
        let total = compensated_sum(probs.iter().copied());
        Self::new(probs.into_iter().map(|x| x / total).collect(), 1)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn span(&self) -> u64 {
        self.span
    }

    /// Largest support point, `(len - 1) * span`.
    pub fn max_value(&self) -> u64 {
        (self.probs.len() as u64 - 1) * self.span
    }

    /// Same law with span 1: zeros inserted between atoms.
    pub fn expand_span(&self) -> Vec<f64> {
        if self.span == 1 {
            return self.probs.clone();
        }
        let k = self.span as usize;
        let mut out = vec![0.0; (self.probs.len() - 1) * k + 1];
        for (i, p) in self.probs.iter().enumerate() {
            out[i * k] = *p;
        }
        out
    }

    /// Mean and standard deviation in units of the span.
    fn index_moments(&self) -> (f64, f64) {
        let mu = compensated_sum(self.probs.iter().enumerate().map(|(i, p)| i as f64 * p));
        let var = compensated_sum(self.probs.iter().enumerate().map(|(i, p)| {
            let d = i as f64 - mu;
            d * d * p
        }));
        (mu, var.max(0.0))
    }

    pub fn moments(&self) -> MomentSummary {
        let (mu, var) = self.index_moments();
        let k = self.span as f64;
        let sigma2 = var * k * k;
        MomentSummary { mu: mu * k, sigma2, sigma: sigma2.sqrt() }
    }
}

pub fn moments(pmf: &DiscretePmf) -> MomentSummary {
    pmf.moments()
}

fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![1.0f64]];
    for i in 1..=n {
        let prev = &c[i - 1];
        let mut row = vec![1.0; i + 1];
        for k in 1..i {
            row[k] = prev[k - 1] + prev[k];
        }
        c.push(row);
    }
    c
}

/// Converts moments about the mean (`m[0] = 1`, `m[1] = 0`, ...) into
/// cumulants `kappa[j-1]`, with `kappa_1` set to `mean`.
pub(crate) fn cumulants_from_central_moments(m: &[f64], mean: f64) -> Result<Vec<f64>, DistError> {
    let order = m.len() - 1;
    let c = binomial_table(order);
    let mut kappa = vec![0.0; order + 1];
    for n in 2..=order {
        let mut s = CompensatedSum::new();
        s.add(m[n]);
        for k in 2..n {
            s.add(-c[n - 1][k - 1] * kappa[k] * m[n - k]);
        }
        kappa[n] = s.value();
        if !kappa[n].is_finite() {
            return Err(DistError::Overflow(n));
        }
    }
    kappa[1] = mean;
    Ok(kappa[1..].to_vec())
}

/// Cumulants `kappa_1..kappa_J` and normalized cumulants `a_j = kappa_j / j!`.
///
/// Moments are taken about the mean before the moment-to-cumulant recursion;
/// raw moments of a long support cancel catastrophically.
pub fn cumulants_from_pmf(pmf: &DiscretePmf, order: usize) -> Result<CumulantSeq, DistError> {
    if !(2..=64).contains(&order) {
        return Err(DistError::BadOrder(order));
    }
    let (mu, _) = pmf.index_moments();
    let mut sums = vec![CompensatedSum::new(); order + 1];
    for (i, &p) in pmf.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let d = i as f64 - mu;
        let mut pw = p;
        for s in sums.iter_mut().skip(1) {
            pw *= d;
            s.add(pw);
        }
    }
    let k = pmf.span as f64;
    let mut m = vec![1.0; order + 1];
    let mut kp = 1.0;
    for j in 1..=order {
        kp *= k;
        m[j] = if j == 1 { 0.0 } else { sums[j].value() * kp };
        if !m[j].is_finite() {
            return Err(DistError::Overflow(j));
        }
    }
    let kappa = cumulants_from_central_moments(&m, mu * k)?;
    Ok(CumulantSeq::from_kappa(kappa))
}

pub fn convolve(p: &DiscretePmf, q: &DiscretePmf) -> Result<DiscretePmf, DistError> {
    if p.span != q.span {
        return Err(DistError::SpanMismatch(p.span, q.span));
    }
    let (a, b) = (&p.probs, &q.probs);
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    DiscretePmf::new(out, p.span)
}

/// Law of the sum of `m` independent copies (`m >= 1`), by repeated squaring.
pub fn convolve_power(p: &DiscretePmf, m: usize) -> Result<DiscretePmf, DistError> {
    assert!(m >= 1, "convolution power needs m >= 1");
    let mut result: Option<DiscretePmf> = None;
    let mut base = p.clone();
    let mut e = m;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base)?,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = convolve(&base, &base)?;
    }
    Ok(result.expect("m >= 1"))
}

/// Law of `k * Y`.
pub fn scale_support(p: &DiscretePmf, k: u64) -> Result<DiscretePmf, DistError> {
    if k == 0 {
        return Err(DistError::ZeroSpan);
    }
    Ok(DiscretePmf { probs: p.probs.clone(), span: p.span * k })
}

/// `sup_t |P(X* <= t) - Phi(t)|` for the standardized variable.
///
/// The step CDF only jumps at atoms, so the supremum is attained at an atom
/// either from the left or at the atom itself. Atoms are standardized in
/// units of the span, which makes the result independent of the span.
pub fn kolmogorov_distance(p: &DiscretePmf) -> Result<f64, DistError> {
    let (mu, var) = p.index_moments();
    if var <= 0.0 {
        return Err(DistError::Degenerate);
    }
    let sigma = var.sqrt();
    let mut cdf = CompensatedSum::new();
    let mut d: f64 = 0.0;
    for (i, &pi) in p.probs.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        let x = (i as f64 - mu) / sigma;
        let phi = normal_cdf(x);
        let left = cdf.value();
        cdf.add(pi);
        let right = cdf.value().min(1.0);
        d = d.max((left - phi).abs()).max((right - phi).abs());
    }
    Ok(d)
}

#[derive(Serialize, Deserialize)]
struct PmfWire {
    #[serde(with = "crate::decimal::vec")]
    probs: Vec<f64>,
    span: u64,
}

impl Serialize for DiscretePmf {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PmfWire { probs: self.probs.clone(), span: self.span }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscretePmf {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = PmfWire::deserialize(d)?;
        DiscretePmf::new(w.probs, w.span).map_err(serde::de::Error::custom)
    }
}
