//! Normalized cumulant sequences and the algorithms that act on them.
//!
//! With `U(w) = u(e^w)` and `u(1) = 0`, the normalized cumulants
//! `a_j = kappa_j / j!` are the Taylor coefficients of `log f(e^w)` at 0.
//! Each root `zeta` contributes `log(1 + t (e^w - 1))` with `t = 1/(1 - zeta)`,
//! since `e^w - zeta = (1 - zeta)(1 + t (e^w - 1))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{log_sum_exp, CompensatedSum};
use crate::pgf::RootSet;
use crate::series::TruncatedSeries;
use crate::ErrorClass;

pub const DEFAULT_ORDER: usize = 16;
pub const MAX_ORDER: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CumulantError {
    #[error("truncation order must lie in 2..=64, got {0}")]
    BadOrder(usize),
    #[error("a root lies at z = 1; the variance is undefined")]
    RootAtOne,
    #[error("the sequence (a_j) for j >= 2 is identically zero")]
    DegenerateSequence,
    #[error("parameter {name} = {value} is out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("truncation condition fails: head sum {head:e} does not exceed tail sum {tail:e}")]
    TruncationViolated { head: f64, tail: f64 },
    #[error("dominant index is {0}, not 2; the sequence does not come from a weakly positive potential")]
    NotWeaklyPositive(usize),
    #[error("taming check fails at order {j}: |a_2| = {a2:e} < s^(j-2) |a_j| = {rhs:e}")]
    TamingFailed { j: usize, a2: f64, rhs: f64 },
}

impl CumulantError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CumulantError::TamingFailed { .. } => ErrorClass::Internal,
            _ => ErrorClass::Precondition,
        }
    }
}

/// `kappa_j` and `a_j = kappa_j / j!` for `1 <= j <= J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSeq {
    #[serde(with = "crate::decimal::vec")]
    a: Vec<f64>,
    #[serde(with = "crate::decimal::vec")]
    kappa: Vec<f64>,
}

fn factorial(j: usize) -> f64 {
    (1..=j).map(|k| k as f64).product()
}

impl CumulantSeq {
    pub fn from_kappa(kappa: Vec<f64>) -> Self {
        let a = kappa.iter().enumerate().map(|(i, k)| k / factorial(i + 1)).collect();
        Self { a, kappa }
    }

    pub fn from_a(a: Vec<f64>) -> Self {
        let kappa = a.iter().enumerate().map(|(i, x)| x * factorial(i + 1)).collect();
        Self { a, kappa }
    }

    /// Truncation order `J`.
    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// `a_j`, zero beyond the truncation order.
    pub fn a(&self, j: usize) -> f64 {
        assert!(j >= 1, "cumulants are indexed from 1");
        self.a.get(j - 1).copied().unwrap_or(0.0)
    }

    pub fn kappa(&self, j: usize) -> f64 {
        assert!(j >= 1, "cumulants are indexed from 1");
        self.kappa.get(j - 1).copied().unwrap_or(0.0)
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a
    }

    pub fn kappa_values(&self) -> &[f64] {
        &self.kappa
    }

    pub fn mu(&self) -> f64 {
        self.kappa(1)
    }

    pub fn sigma2(&self) -> f64 {
        self.kappa(2)
    }

    /// Termwise sum, i.e. the cumulants of an independent sum.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        Self::from_kappa((1..=n).map(|j| self.kappa(j) + other.kappa(j)).collect())
    }
}

/// Normalized cumulants from the roots of the generating polynomial.
pub fn cumulants_from_roots(roots: &RootSet, order: usize) -> Result<CumulantSeq, CumulantError> {
    if !(2..=MAX_ORDER).contains(&order) {
        return Err(CumulantError::BadOrder(order));
    }
    let one = Complex64::new(1.0, 0.0);
    let e = TruncatedSeries::<Complex64>::expm1_w(order);
    let mut total = vec![CompensatedSum::new(); order + 1];
    for &(zeta, m) in roots.roots() {
        if zeta == one {
            return Err(CumulantError::RootAtOne);
        }
        let t = one / (one - zeta);
        let s = TruncatedSeries::constant(one, order).add(&e.scale(t));
        let l = s.log().expect("constant term is one");
        for j in 1..=order {
            total[j].add(m as f64 * l.coeff(j).re);
        }
    }
    let a: Vec<f64> = (1..=order).map(|j| total[j].value()).collect();
    Ok(CumulantSeq::from_a(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRatio {
    /// `sum_{L<=j<=J} |a_j| eps^j / sum_{2<=j<=J} |a_j| eps^j`.
    pub ratio: f64,
    /// Geometric extrapolation of `sum_{j>J} |a_j| eps^j` from the last
    /// terms; infinite when those terms are not decreasing.
    pub remainder_bound: f64,
    /// Largest value the ratio can take if the omitted tail is at most
    /// `remainder_bound`.
    pub ratio_upper: f64,
}

pub fn tail_ratio(a: &CumulantSeq, eps: f64, l: usize) -> Result<TailRatio, CumulantError> {
    if !(eps > 0.0) {
        return Err(CumulantError::BadParameter { name: "eps", value: eps });
    }
    if l < 2 {
        return Err(CumulantError::BadParameter { name: "L", value: l as f64 });
    }
    let order = a.order();
    let terms: Vec<f64> = (2..=order).map(|j| a.a(j).abs() * eps.powi(j as i32)).collect();
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (k, &t) in terms.iter().enumerate() {
        let j = k + 2;
        den.add(t);
        if j >= l {
            num.add(t);
        }
    }
    let (num, den) = (num.value(), den.value());
    if !(den > 0.0) {
        return Err(CumulantError::DegenerateSequence);
    }
    let tail = terms.iter().rev().take(4).copied().collect::<Vec<_>>();
    let mut q: f64 = 0.0;
    for w in tail.windows(2) {
        // w[0] is the later term
        if w[1] > 0.0 {
            q = q.max(w[0] / w[1]);
        } else if w[0] > 0.0 {
            q = f64::INFINITY;
        }
    }
    let last = *terms.last().unwrap_or(&0.0);
    let remainder_bound = if last == 0.0 && q == 0.0 {
        0.0
    } else if q < 1.0 {
        last * q / (1.0 - q)
    } else {
        f64::INFINITY
    };
    Ok(TailRatio { ratio: num / den, remainder_bound, ratio_upper: ((num + remainder_bound) / den).min(1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominantTerm {
    /// Dominant index, 1-based.
    pub ell: usize,
    pub s_star: f64,
    /// Number of rescaling steps taken before halting.
    pub iterations: usize,
}

fn log_terms(c: &[f64], log_s: f64) -> Vec<f64> {
    c.iter()
        .enumerate()
        .map(|(k, &ci)| if ci > 0.0 { ci.ln() + (k + 1) as f64 * log_s } else { f64::NEG_INFINITY })
        .collect()
}

/// Finds `ell <= L` and `s_star > s (16A)^-(L+1)` with
/// `c_ell s_star^ell > A sum_{i != ell} c_i s_star^i`.
///
/// `c[0]` is `c_1`. Starting from `s_0 = s/(2A)` and `j_0 = L`, the search
/// halts when `c_j s^j > 2A sum_{i<=L, i!=j} c_i s^i`; otherwise it moves to
/// the largest term among indices `<= j` (smallest index on ties) and divides
/// `s` by `16A`. Comparisons run on logarithms so that `s^i` cannot
/// underflow.
pub fn dominant_term_search(c: &[f64], s: f64, a: f64, l: usize) -> Result<DominantTerm, CumulantError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(CumulantError::BadParameter { name: "s", value: s });
    }
    if !(a >= 1.0) || !a.is_finite() {
        return Err(CumulantError::BadParameter { name: "A", value: a });
    }
    if l == 0 {
        return Err(CumulantError::BadParameter { name: "L", value: 0.0 });
    }
    if let Some(bad) = c.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(CumulantError::BadParameter { name: "c", value: *bad });
    }
    let lt = log_terms(c, s.ln());
    let split = l.min(c.len());
    let head = log_sum_exp(&lt[..split]);
    let tail = log_sum_exp(&lt[split..]);
    if !(head > tail) {
        return Err(CumulantError::TruncationViolated { head: head.exp(), tail: tail.exp() });
    }
    Ok(run_search(c, s, a, l))
}

fn run_search(c: &[f64], s: f64, a: f64, l: usize) -> DominantTerm {
    let mut log_s = (s / (2.0 * a)).ln();
    let step = (16.0 * a).ln();
    let log_2a = (2.0 * a).ln();
    let mut j = l;
    let split = l.min(c.len());
    let mut iterations = 0;
    loop {
        let lt = log_terms(c, log_s);
        let lj = if j <= c.len() { lt[j - 1] } else { f64::NEG_INFINITY };
        let others: Vec<f64> = (1..=split).filter(|&i| i != j).map(|i| lt[i - 1]).collect();
        if lj > log_2a + log_sum_exp(&others) {
            return DominantTerm { ell: j, s_star: log_s.exp(), iterations };
        }
        let mut best = 1;
        for i in 1..=j.min(c.len()) {
            if lt[i - 1] > lt[best - 1] {
                best = i;
            }
        }
        j = best;
        log_s -= step;
        iterations += 1;
        if iterations > l + 1 {
            // unreachable for valid input; return the current pair for the caller's check
            return DominantTerm { ell: j, s_star: log_s.exp(), iterations };
        }
    }
}

/// Checks `c_ell s^ell > A sum_{i != ell} c_i s^i` over every stored index by
/// summing the terms relative to `c_ell s^ell`.
pub fn verify_dominance(c: &[f64], ell: usize, s_star: f64, a: f64) -> bool {
    if ell == 0 || ell > c.len() || c[ell - 1] <= 0.0 {
        return false;
    }
    let ls = s_star.ln();
    let base = c[ell - 1].ln() + ell as f64 * ls;
    let mut sum = CompensatedSum::new();
    for (k, &ci) in c.iter().enumerate() {
        if k + 1 != ell && ci > 0.0 {
            sum.add((ci.ln() + (k + 1) as f64 * ls - base).exp());
        }
    }
    1.0 > a * sum.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Taming {
    pub s_star: f64,
    pub iterations: usize,
}

/// Finds `s_star > s 2^{-6(L+1)}` with `|a_2| >= s_star^{j-2} |a_j|` for
/// every stored `j >= 3`.
///
/// Runs [`dominant_term_search`] on `c_1 = 0`, `c_j = |a_j|` with `A = 4`.
/// For a weakly positive potential the dominant index is forced to be 2; any
/// other outcome is reported as an error, as is a failure of the final
/// direct check.
pub fn tame_cumulants(a: &CumulantSeq, s: f64, l: usize) -> Result<Taming, CumulantError> {
    if !(s > 0.0 && s < 0.5) {
        return Err(CumulantError::BadParameter { name: "s", value: s });
    }
    if l < 2 {
        return Err(CumulantError::BadParameter { name: "L", value: l as f64 });
    }
    let order = a.order();
    let mut c = vec![0.0; order];
    for j in 2..=order {
        c[j - 1] = a.a(j).abs();
    }
    if c.iter().all(|&x| x == 0.0) {
        return Err(CumulantError::DegenerateSequence);
    }
    let lt = log_terms(&c, s.ln());
    let split = l.min(order);
    let head = log_sum_exp(&lt[..split]);
    let tail = log_sum_exp(&lt[split..]);
    if head < tail {
        return Err(CumulantError::TruncationViolated { head: head.exp(), tail: tail.exp() });
    }
    let d = run_search(&c, s, 4.0, l);
    if d.ell != 2 {
        return Err(CumulantError::NotWeaklyPositive(d.ell));
    }
    let a2 = c[1];
    let ls = d.s_star.ln();
    for j in 3..=order {
        if c[j - 1] == 0.0 {
            continue;
        }
        let log_rhs = (j - 2) as f64 * ls + c[j - 1].ln();
        if log_rhs > a2.ln() {
            return Err(CumulantError::TamingFailed { j, a2, rhs: log_rhs.exp() });
        }
    }
    Ok(Taming { s_star: d.s_star, iterations: d.iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegcosExtrema {
    pub min_val: f64,
    pub min_theta: f64,
    pub max_val: f64,
    pub max_theta: f64,
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Extrema of `cos(theta)^j - cos(j theta)` over a period: a grid of 10^4
/// points followed by golden-section refinement around the best grid point.
pub fn negcos_extrema(j: u32) -> Result<NegcosExtrema, CumulantError> {
    if j < 3 {
        return Err(CumulantError::BadParameter { name: "j", value: j as f64 });
    }
    let f = |t: f64| t.cos().powi(j as i32) - (j as f64 * t).cos();
    let n = 10_000;
    let h = std::f64::consts::TAU / n as f64;
    let (mut imin, mut imax) = (0, 0);
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let v = f(i as f64 * h);
        if v < vmin {
            vmin = v;
            imin = i;
        }
        if v > vmax {
            vmax = v;
            imax = i;
        }
    }
    let tmin = golden_min(f, (imin as f64 - 1.0) * h, (imin as f64 + 1.0) * h);
    let tmax = golden_min(|t| -f(t), (imax as f64 - 1.0) * h, (imax as f64 + 1.0) * h);
    let (min_val, min_theta) = if f(tmin) < vmin { (f(tmin), tmin) } else { (vmin, imin as f64 * h) };
    let (max_val, max_theta) = if f(tmax) > vmax { (f(tmax), tmax) } else { (vmax, imax as f64 * h) };
    Ok(NegcosExtrema { min_val, min_theta, max_val, max_theta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{cumulants_from_pmf, DiscretePmf};
    use crate::pgf::{find_roots, PgfPoly, DEFAULT_ROOT_TOL};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn roots_examples() {
        let s = cumulants_from_roots(&RootSet::from_roots(vec![(c(-1.0, 0.0), 1)]), 8).unwrap();
        assert_relative_eq!(s.kappa(1), 0.5);
        assert_relative_eq!(s.kappa(2), 0.25);
        assert_relative_eq!(s.a(4), -1.0 / 192.0, max_relative = 1e-12);
        let s = cumulants_from_roots(&RootSet::from_roots(vec![(c(-1.0, 0.0), 2)]), 8).unwrap();
        assert_relative_eq!(s.kappa(2), 0.5);
        let s = cumulants_from_roots(&RootSet::from_roots(vec![(c(0.0, 1.0), 1), (c(0.0, -1.0), 1)]), 8).unwrap();
        assert_relative_eq!(s.kappa(1), 1.0);
        assert_relative_eq!(s.kappa(2), 1.0);
        let pmf = cumulants_from_pmf(&DiscretePmf::new(vec![0.5, 0.0, 0.5], 1).unwrap(), 8).unwrap();
        for j in 1..=8 {
            assert!((s.kappa(j) - pmf.kappa(j)).abs() < 1e-12);
        }
        assert_eq!(
            cumulants_from_roots(&RootSet::from_roots(vec![(c(1.0, 0.0), 1)]), 8),
            Err(CumulantError::RootAtOne)
        );
        assert!(cumulants_from_roots(&RootSet::from_roots(vec![(c(-1.0, 0.0), 1)]), 65).is_err());
    }

    #[test]
    fn root_at_zero_contributes_w() {
        let s = cumulants_from_roots(&RootSet::from_roots(vec![(c(0.0, 0.0), 3)]), 6).unwrap();
        assert_eq!(s.kappa(1), 3.0);
        for j in 2..=6 {
            assert!(s.a(j).abs() < 1e-15);
        }
    }

    #[test]
    fn roots_agree_with_pmf_on_random_input() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let d = rng.random_range(1..=30);
            let raw: Vec<f64> = (0..=d).map(|_| rng.random::<f64>() + 1e-3).collect();
            let p = PgfPoly::normalize(&raw).unwrap();
            let r = cumulants_from_roots(&find_roots(&p, DEFAULT_ROOT_TOL).unwrap(), 8).unwrap();
            let q = cumulants_from_pmf(&p.to_pmf(), 8).unwrap();
            for j in 1..=8 {
                let scale = q.kappa(j).abs().max(1e-3 * q.kappa(2));
                assert!((r.kappa(j) - q.kappa(j)).abs() <= 1e-8 * scale, "j={j} {} {}", r.kappa(j), q.kappa(j));
            }
        }
    }

    #[test]
    fn tail_ratio_examples() {
        let only2 = CumulantSeq::from_a(vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(tail_ratio(&only2, 0.5, 2).unwrap().ratio, 1.0);
        let t = tail_ratio(&only2, 0.5, 3).unwrap();
        assert_eq!(t.ratio, 0.0);
        assert_eq!(t.remainder_bound, 0.0);
        let geo = CumulantSeq::from_a((1..=60).map(|j| 0.5f64.powi(j)).collect());
        let t = tail_ratio(&geo, 1.0, 4).unwrap();
        assert_relative_eq!(t.ratio, 0.25, max_relative = 1e-12);
        assert!(t.remainder_bound < 1e-17 && t.remainder_bound > 0.0);
        let zero = CumulantSeq::from_a(vec![1.0, 0.0, 0.0]);
        assert_eq!(tail_ratio(&zero, 1.0, 2), Err(CumulantError::DegenerateSequence));
    }

    #[test]
    fn dominant_term_hand_traces() {
        let d = dominant_term_search(&[1.0, 0.0, 0.0], 1.0, 1.0, 1).unwrap();
        assert_eq!((d.ell, d.s_star, d.iterations), (1, 0.5, 0));
        let d = dominant_term_search(&[1.0, 1.0], 1.0, 1.0, 2).unwrap();
        assert_eq!(d.ell, 1);
        assert_relative_eq!(d.s_star, 1.0 / 32.0, max_relative = 1e-15);
        assert_eq!(d.iterations, 1);
        assert!(verify_dominance(&[1.0, 1.0], d.ell, d.s_star, 1.0));
    }

    #[test]
    fn dominant_term_rejects_bad_input() {
        assert!(matches!(
            dominant_term_search(&[0.0, 1.0], 1.0, 1.0, 1),
            Err(CumulantError::TruncationViolated { .. })
        ));
        assert!(dominant_term_search(&[1.0], 0.0, 1.0, 1).is_err());
        assert!(dominant_term_search(&[1.0], 1.0, 0.5, 1).is_err());
        assert!(dominant_term_search(&[-1.0], 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn tame_examples() {
        let only2 = CumulantSeq::from_a(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        let t = tame_cumulants(&only2, 0.25, 3).unwrap();
        assert!(t.s_star > 0.25 * 2f64.powi(-24));
        let bern = cumulants_from_pmf(&DiscretePmf::new(vec![0.5, 0.5], 1).unwrap(), 16).unwrap();
        let t = tame_cumulants(&bern, 0.25, 4).unwrap();
        assert!(0.125 >= t.s_star.powi(2) / 192.0);
        assert!(t.s_star > 0.25 * 2f64.powi(-30));
        let zero = CumulantSeq::from_a(vec![1.0, 0.0, 0.0]);
        assert_eq!(tame_cumulants(&zero, 0.25, 2), Err(CumulantError::DegenerateSequence));
        assert!(tame_cumulants(&bern, 0.5, 4).is_err());
    }

    #[test]
    fn tame_detects_non_positive_sequence() {
        // a dominant third cumulant cannot come from a weakly positive potential
        let bad = CumulantSeq::from_a(vec![0.0, 1e-9, 1.0, 0.0]);
        assert!(matches!(tame_cumulants(&bad, 0.25, 3), Err(CumulantError::NotWeaklyPositive(3))));
    }

    #[test]
    fn negcos_examples() {
        let f = |j: i32, t: f64| t.cos().powi(j) - (j as f64 * t).cos();
        assert_relative_eq!(f(3, 4.0 * PI / 3.0), -9.0 / 8.0, max_relative = 1e-12);
        assert_relative_eq!(f(3, PI / 3.0), 9.0 / 8.0, max_relative = 1e-12);
        let e = negcos_extrema(3).unwrap();
        assert!(e.min_val <= -9.0 / 8.0 + 1e-12);
        assert!(e.max_val >= 9.0 / 8.0 - 1e-12);
        let e = negcos_extrema(4).unwrap();
        assert!(e.min_val < -0.5);
        assert!(negcos_extrema(2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = CumulantSeq::from_a(vec![0.5, 0.125, 0.0]);
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"0.125\""));
        assert_eq!(serde_json::from_str::<CumulantSeq>(&j).unwrap(), s);
    }

    proptest! {
        #[test]
        fn dominant_term_postconditions(
            c in prop::collection::vec(prop_oneof![Just(0.0), 1e-3f64..1e3], 1..12),
            s in 0.05f64..2.0,
            a in 1.0f64..8.0,
            l_frac in 0.0f64..1.0,
        ) {
            let l = 1 + (l_frac * c.len() as f64) as usize % c.len();
            if let Ok(d) = dominant_term_search(&c, s, a, l) {
                prop_assert!(d.ell >= 1 && d.ell <= l);
                prop_assert!(d.iterations <= l);
                prop_assert!(d.s_star > s * (16.0 * a).powi(-(l as i32 + 1)));
                prop_assert!(verify_dominance(&c, d.ell, d.s_star, a));
            }
        }
    }
}
