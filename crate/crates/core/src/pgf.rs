//! Generating polynomials, their roots, and the logarithmic potential.
//!
//! For a generating polynomial `f` with roots `zeta` (with multiplicity) the
//! potential `u(z) = log|f(z)|` has the root form
//!
//! ```text
//! u(z) = sum_{|zeta|<1} log|1 - zeta/z| + sum_{|zeta|>=1} log|1 - z/zeta| + c + N log|z|
//! ```
//!
//! where `N` counts roots inside the unit disk and `c` is fixed by `u(1) = 0`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{self, DiscretePmf, DistError, MomentSummary};
use crate::ErrorClass;

pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
const CLUSTER_TOL: f64 = 1e-6;
const PAIR_TOL: f64 = 1e-8;
const POLISH_ITERS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PgfError {
    #[error("coefficient {index} is negative ({value}); not a generating function")]
    NegativeCoefficient { index: usize, value: f64 },
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error("coefficients sum to zero")]
    ZeroSum,
    #[error("coefficients sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("polynomial has degree 0; there are no roots")]
    ConstantPolynomial,
    #[error("root iteration did not converge: worst backward error {worst_backward_error:e}")]
    NoConvergence { best: Vec<Complex64>, worst_backward_error: f64 },
    #[error("u0 is undefined at z = 0")]
    ZeroArgument,
    #[error(transparent)]
    Dist(#[from] DistError),
}

impl PgfError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PgfError::NoConvergence { .. } => ErrorClass::Internal,
            PgfError::Dist(e) => e.class(),
            _ => ErrorClass::Precondition,
        }
    }
}

/// Nonnegative coefficients with `f(1) = 1` and nonzero leading coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct PgfPoly {
    coeffs: Vec<f64>,
}

fn check_coeffs(raw: &[f64]) -> Result<Vec<f64>, PgfError> {
    let mut out = Vec::with_capacity(raw.len());
    for (index, &c) in raw.iter().enumerate() {
        if !c.is_finite() {
            return Err(PgfError::NonFinite { index });
        }
        if c < -1e-15 {
            return Err(PgfError::NegativeCoefficient { index, value: c });
        }
        out.push(c.max(0.0));
    }
    while out.len() > 1 && *out.last().unwrap() == 0.0 {
        out.pop();
    }
    Ok(out)
}

impl PgfPoly {
    /// Divides by the value at 1. Negatives down to `-1e-15` are clamped.
    pub fn normalize(raw: &[f64]) -> Result<Self, PgfError> {
        let mut c = check_coeffs(raw)?;
        let total = crate::numeric::compensated_sum(c.iter().copied());
        if c.is_empty() || total <= 0.0 {
            return Err(PgfError::ZeroSum);
        }
        for x in c.iter_mut() {
            *x /= total;
        }
        Ok(Self { coeffs: c })
    }

    /// Accepts coefficients already summing to 1 within 1e-12.
    pub fn new(coeffs: &[f64]) -> Result<Self, PgfError> {
        let c = check_coeffs(coeffs)?;
        let total = crate::numeric::compensated_sum(c.iter().copied());
        if c.is_empty() || total <= 0.0 {
            return Err(PgfError::ZeroSum);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(PgfError::NotNormalized(total));
        }
        Ok(Self { coeffs: c })
    }

    pub fn from_pmf(pmf: &DiscretePmf) -> Self {
        Self::normalize(&pmf.expand_span()).expect("a valid pmf is a valid generating function")
    }

    /// Expands `prod (z - zeta)^m` and normalizes. Fails if the expansion has
    /// a negative coefficient.
    pub fn from_roots(roots: &[(Complex64, usize)]) -> Result<Self, PgfError> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &(zeta, m) in roots {
            for _ in 0..m {
                let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
                for (k, ck) in c.iter().enumerate() {
                    next[k + 1] += ck;
                    next[k] -= ck * zeta;
                }
                c = next;
            }
        }
        let scale = c.iter().map(|x| x.re.abs()).fold(0.0, f64::max);
        let re: Vec<f64> = c
            .iter()
            .map(|x| if x.re.abs() < 1e-14 * scale { 0.0 } else { x.re })
            .collect();
        Self::normalize(&re)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn to_pmf(&self) -> DiscretePmf {
        DiscretePmf::new(self.coeffs.clone(), 1).expect("normalized coefficients form a pmf")
    }

    pub fn moments(&self) -> MomentSummary {
        self.to_pmf().moments()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `(log|f(z)|, log sum_k p_k |z|^k)`, evaluated through the reversed
    /// polynomial when `|z| > 1` so that large degrees do not overflow.
    pub fn log_abs_eval(&self, z: Complex64) -> (f64, f64) {
        log_abs_eval(&self.coeffs, z)
    }

    pub fn product(&self, other: &Self) -> Self {
        let p = dist::convolve(&self.to_pmf(), &other.to_pmf()).expect("equal spans");
        Self::from_pmf(&p)
    }

    pub fn power(&self, m: usize) -> Self {
        let p = dist::convolve_power(&self.to_pmf(), m.max(1)).expect("equal spans");
        if m == 0 {
            return Self { coeffs: vec![1.0] };
        }
        Self::from_pmf(&p)
    }

    /// `f(z^k)`.
    pub fn substitute_power(&self, k: usize) -> Self {
        let p = dist::scale_support(&self.to_pmf(), k as u64).expect("k >= 1");
        Self::from_pmf(&p)
    }
}

fn log_abs_eval(c: &[f64], z: Complex64) -> (f64, f64) {
    let r = z.norm();
    if r <= 1.0 {
        let mut v = Complex64::new(0.0, 0.0);
        let mut a = 0.0;
        for &ck in c.iter().rev() {
            v = v * z + ck;
            a = a * r + ck;
        }
        (v.norm().ln(), a.ln())
    } else {
        let y = 1.0 / z;
        let ry = 1.0 / r;
        let mut v = Complex64::new(0.0, 0.0);
        let mut a = 0.0;
        for &ck in c.iter() {
            v = v * y + ck;
            a = a * ry + ck;
        }
        let d = (c.len() - 1) as f64;
        let s = d * r.ln();
        (v.norm().ln() + s, a.ln() + s)
    }
}

/// `(f/f', relative backward error)` at `z`.
fn newton_data(c: &[f64], z: Complex64) -> (Complex64, f64) {
    let d = c.len() - 1;
    let zero = Complex64::new(0.0, 0.0);
    if z.norm() <= 1.0 {
        let (mut f, mut fp) = (zero, zero);
        let mut a = 0.0;
        let r = z.norm();
        for &ck in c.iter().rev() {
            fp = fp * z + f;
            f = f * z + ck;
            a = a * r + ck;
        }
        (f / fp, f.norm() / a)
    } else {
        let y = 1.0 / z;
        let ry = y.norm();
        let (mut g, mut gp) = (zero, zero);
        let mut a = 0.0;
        for &ck in c.iter() {
            gp = gp * y + g;
            g = g * y + ck;
            a = a * ry + ck;
        }
        let denom = g * d as f64 - y * gp;
        (z * g / denom, g.norm() / a)
    }
}

fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let sqrdx = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / radix;
            while c < g {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while c > g {
                f /= radix;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let gi = 1.0 / f;
                for j in 0..n {
                    m[(i, j)] *= gi;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Eigenvalues of the balanced companion matrix of `c` after rescaling the
/// variable so that the roots have geometric-mean modulus one.
fn companion_roots(c: &[f64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    if d == 1 {
        return vec![Complex64::new(-c[0] / c[1], 0.0)];
    }
    let log_s = (c[0].ln() - c[d].ln()) / d as f64;
    let s = log_s.exp();
    let lead = c[d].ln() + d as f64 * log_s;
    let mut m = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        // monic coefficient of y^k in c(s y) / (c_d s^d)
        let ck = if c[k] == 0.0 { 0.0 } else { (c[k].ln() + k as f64 * log_s - lead).exp() };
        m[(0, d - 1 - k)] = -ck;
    }
    for i in 1..d {
        m[(i, i - 1)] = 1.0;
    }
    balance(&mut m);
    // the unshifted QR sweep can cycle forever on near-circulant companions
    // such as z^d + 1; fall back to the usual spread-out Aberth start
    match nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 100 * d) {
        Some(schur) => schur.complex_eigenvalues().iter().map(|y| y * s).collect(),
        None => circle_start(c),
    }
}

/// Points spread over the circle of radius `(c_0 / c_d)^{1/d}`.
fn circle_start(c: &[f64]) -> Vec<Complex64> {
    let d = c.len() - 1;
    let s = ((c[0].ln() - c[d].ln()) / d as f64).exp();
    (0..d).map(|k| Complex64::from_polar(s, (2.0 * std::f64::consts::PI * k as f64 + 0.4) / d as f64)).collect()
}

/// Simultaneous Newton (Aberth) polishing. Each root keeps its best iterate
/// by backward error.
fn polish(c: &[f64], init: Vec<Complex64>) -> (Vec<Complex64>, Vec<f64>) {
    let n = init.len();
    let mut z = init;
    let mut best = z.clone();
    let mut best_err: Vec<f64> = z.iter().map(|&x| newton_data(c, x).1).collect();
    let mut stall = 0;
    for _ in 0..POLISH_ITERS {
        let data: Vec<(Complex64, f64)> = z.iter().map(|&x| newton_data(c, x)).collect();
        let mut improved = false;
        for i in 0..n {
            if data[i].1 < best_err[i] {
                if data[i].1 < 0.5 * best_err[i] {
                    improved = true;
                }
                best_err[i] = data[i].1;
                best[i] = z[i];
            }
        }
        if best_err.iter().all(|&e| e <= f64::EPSILON) {
            break;
        }
        let mut next = z.clone();
        for i in 0..n {
            let w = data[i].0;
            if !w.re.is_finite() || !w.im.is_finite() {
                continue;
            }
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let step = w / (1.0 - w * s);
            if step.re.is_finite() && step.im.is_finite() {
                next[i] = z[i] - step;
            }
        }
        z = next;
        stall = if improved { 0 } else { stall + 1 };
        // from a symmetric circle start the error can grow for a dozen
        // steps before Aberth locks on
        if stall >= 25 {
            break;
        }
    }
    (best, best_err)
}

fn pair_tol(z: Complex64) -> f64 {
    PAIR_TOL * (1.0 + z.norm())
}

/// Makes the list closed under conjugation: near-real roots are snapped to
/// the axis and the rest are matched upper-to-lower and symmetrized.
fn pair_conjugates(roots: &mut [Complex64]) {
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (i, z) in roots.iter_mut().enumerate() {
        if z.im.abs() <= pair_tol(*z) {
            z.im = 0.0;
        } else if z.im > 0.0 {
            upper.push(i);
        } else {
            lower.push(i);
        }
    }
    let mut used = vec![false; lower.len()];
    let mut stray = Vec::new();
    for &i in &upper {
        let target = roots[i].conj();
        let mut pick: Option<(usize, f64)> = None;
        for (k, &j) in lower.iter().enumerate() {
            if used[k] {
                continue;
            }
            let dist = (roots[j] - target).norm();
            if pick.map_or(true, |(_, d)| dist < d) {
                pick = Some((k, dist));
            }
        }
        match pick {
            Some((k, _)) => {
                used[k] = true;
                let j = lower[k];
                let a = 0.5 * (roots[i] + roots[j].conj());
                roots[i] = a;
                roots[j] = a.conj();
            }
            None => stray.push(i),
        }
    }
    for (k, &j) in lower.iter().enumerate() {
        if !used[k] {
            stray.push(j);
        }
    }
    for i in stray {
        roots[i].im = 0.0;
    }
}

/// Groups roots closer than `CLUSTER_TOL * max(1, |zeta|)` and replaces each
/// group by its mean.
fn cluster(roots: &[(Complex64, usize)]) -> Vec<(Complex64, usize)> {
    let n = roots.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let next = p[j];
            p[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let tol = CLUSTER_TOL * roots[i].0.norm().max(1.0);
            if (roots[i].0 - roots[j].0).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Complex64, usize)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let (z, m) = roots[i];
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => {
                g.1 += z * m as f64;
                g.2 += m;
            }
            None => groups.push((r, z * m as f64, m)),
        }
    }
    let mut out: Vec<(Complex64, usize)> = groups
        .into_iter()
        .map(|(_, s, m)| {
            let mut z = s / m as f64;
            if z.im.abs() <= pair_tol(z) {
                z.im = 0.0;
            }
            (z, m)
        })
        .collect();
    out.sort_by(|a, b| {
        (a.0.re, a.0.im).partial_cmp(&(b.0.re, b.0.im)).unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Roots with multiplicity plus the constants of the root form of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    roots: Vec<(Complex64, usize)>,
    c_x: f64,
    n_x: usize,
}

impl RootSet {
    /// Builds the set and the constants `c` and `N` from a root list.
    pub fn from_roots(roots: Vec<(Complex64, usize)>) -> Self {
        let mut c = 0.0;
        let mut n_x = 0;
        let one = Complex64::new(1.0, 0.0);
        for &(z, m) in &roots {
            let m_f = m as f64;
            if z.norm() < 1.0 {
                n_x += m;
                c -= m_f * (one - z).norm().ln();
            } else {
                c -= m_f * (one - one / z).norm().ln();
            }
        }
        Self { roots, c_x: c, n_x }
    }

    pub fn roots(&self) -> &[(Complex64, usize)] {
        &self.roots
    }

    pub fn c_x(&self) -> f64 {
        self.c_x
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn degree(&self) -> usize {
        self.roots.iter().map(|r| r.1).sum()
    }

    /// Expanded list, each root repeated by its multiplicity.
    pub fn flat(&self) -> Vec<Complex64> {
        self.roots.iter().flat_map(|&(z, m)| std::iter::repeat(z).take(m)).collect()
    }

    /// `u(z)` through the root form; `-inf` at a root, and `u(0) = -inf`
    /// exactly when 0 is a root.
    pub fn potential(&self, z: Complex64) -> f64 {
        let r = z.norm();
        if r == 0.0 {
            // |1 - zeta/z| |z| -> |zeta| for the inner roots
            let mut s = self.c_x;
            for &(zeta, m) in &self.roots {
                if zeta.norm() < 1.0 {
                    s += m as f64 * zeta.norm().ln();
                }
            }
            return s;
        }
        let one = Complex64::new(1.0, 0.0);
        let mut s = self.c_x + self.n_x as f64 * r.ln();
        for &(zeta, m) in &self.roots {
            let t = if zeta.norm() < 1.0 { one - zeta / z } else { one - z / zeta };
            s += m as f64 * t.norm().ln();
        }
        s
    }

    /// Distance from `z` to the nearest root.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        self.roots.iter().map(|r| (r.0 - z).norm()).fold(f64::INFINITY, f64::min)
    }

    pub fn merge(sets: &[(RootSet, usize)]) -> Self {
        let mut all = Vec::new();
        for (s, p) in sets {
            for &(z, m) in &s.roots {
                all.push((z, m * p));
            }
        }
        Self::from_roots(cluster(&all))
    }
}

/// All roots of `poly`, with relative backward error at most `tol` each.
pub fn find_roots(poly: &PgfPoly, tol: f64) -> Result<RootSet, PgfError> {
    let c = poly.coeffs();
    if poly.degree() == 0 {
        return Err(PgfError::ConstantPolynomial);
    }
    let zeros = c.iter().take_while(|&&x| x == 0.0).count();
    let q = &c[zeros..];
    let mut roots: Vec<Complex64> = Vec::new();
    if q.len() > 1 {
        let (mut best, errs) = polish(q, companion_roots(q));
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        if !(worst <= tol) {
            return Err(PgfError::NoConvergence { best, worst_backward_error: worst });
        }
        pair_conjugates(&mut best);
        roots = best;
    }
    let mut list: Vec<(Complex64, usize)> = roots.into_iter().map(|z| (z, 1)).collect();
    if zeros > 0 {
        list.push((Complex64::new(0.0, 0.0), zeros));
    }
    Ok(RootSet::from_roots(cluster(&list)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootGeometry {
    /// `min |zeta - 1|`; infinite without roots.
    #[serde(with = "crate::decimal::scalar")]
    pub delta_ball: f64,
    /// `min |arg zeta|` over nonzero roots; `pi` if there are none.
    #[serde(with = "crate::decimal::scalar")]
    pub delta_sector: f64,
}

pub fn root_geometry(roots: &RootSet) -> RootGeometry {
    let one = Complex64::new(1.0, 0.0);
    let mut delta_ball = f64::INFINITY;
    let mut delta_sector = std::f64::consts::PI;
    for &(z, _) in roots.roots() {
        delta_ball = delta_ball.min((z - one).norm());
        if z.norm() > 0.0 {
            delta_sector = delta_sector.min(z.arg().abs());
        }
    }
    RootGeometry { delta_ball, delta_sector }
}

/// `u(z) = log|f(z)|`, or `u0(z) = u(z) - mu log|z|` when `subtract_mean`.
///
/// Direct evaluation is used unless it has lost more than half the working
/// precision to cancellation; then the root form takes over.
pub fn log_potential(poly: &PgfPoly, z: Complex64, subtract_mean: bool) -> Result<f64, PgfError> {
    if subtract_mean && z.norm() == 0.0 {
        return Err(PgfError::ZeroArgument);
    }
    let (lf, la) = poly.log_abs_eval(z);
    let u = if lf == f64::NEG_INFINITY && poly.degree() == 1 {
        f64::NEG_INFINITY
    } else if lf - la < -18.0 && poly.degree() >= 1 {
        match find_roots(poly, DEFAULT_ROOT_TOL) {
            Ok(r) => r.potential(z),
            Err(_) => lf,
        }
    } else {
        lf
    };
    Ok(if subtract_mean { u - poly.moments().mu * z.norm().ln() } else { u })
}

/// Anything that can be evaluated as a real potential on the plane.
pub trait Potential: Sync {
    fn u(&self, z: Complex64) -> f64;

    /// True when `z` lies within `radius` of a singularity of `u`.
    fn near_singularity(&self, _z: Complex64, _radius: f64) -> bool {
        false
    }
}

impl<F: Fn(Complex64) -> f64 + Sync> Potential for F {
    fn u(&self, z: Complex64) -> f64 {
        self(z)
    }
}

/// `u = log|f|` with the roots computed once.
#[derive(Debug, Clone)]
pub struct PgfPotential {
    poly: PgfPoly,
    roots: Option<RootSet>,
}

impl PgfPotential {
    pub fn new(poly: &PgfPoly) -> Result<Self, PgfError> {
        let roots = if poly.degree() == 0 { None } else { Some(find_roots(poly, DEFAULT_ROOT_TOL)?) };
        Ok(Self { poly: poly.clone(), roots })
    }

    pub fn roots(&self) -> Option<&RootSet> {
        self.roots.as_ref()
    }

    pub fn poly(&self) -> &PgfPoly {
        &self.poly
    }
}

impl Potential for PgfPotential {
    fn u(&self, z: Complex64) -> f64 {
        let (lf, la) = self.poly.log_abs_eval(z);
        match &self.roots {
            Some(r) if lf - la < -18.0 || lf == f64::NEG_INFINITY => r.potential(z),
            _ => lf,
        }
    }

    fn near_singularity(&self, z: Complex64, radius: f64) -> bool {
        self.roots.as_ref().map_or(false, |r| r.distance_to(z) < radius)
    }
}

/// A generating polynomial kept as a product of powers of small factors.
///
/// Roots of high multiplicity are numerically ill-conditioned in expanded
/// form (`(1+z)^64` has its computed roots scattered on a circle of radius
/// about 0.5 around -1), so roots are taken from the factors instead.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredPgf {
    factors: Vec<(PgfPoly, usize)>,
}

impl FactoredPgf {
    pub fn new(factors: Vec<(PgfPoly, usize)>) -> Self {
        Self { factors: factors.into_iter().filter(|f| f.1 > 0).collect() }
    }

    pub fn single(poly: PgfPoly) -> Self {
        Self::new(vec![(poly, 1)])
    }

    pub fn factors(&self) -> &[(PgfPoly, usize)] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.factors.iter().map(|(p, m)| p.degree() * m).sum()
    }

    pub fn expand(&self) -> PgfPoly {
        let mut acc = DiscretePmf::point_mass(0);
        for (p, m) in &self.factors {
            let pw = dist::convolve_power(&p.to_pmf(), *m).expect("span 1");
            acc = dist::convolve(&acc, &pw).expect("span 1");
        }
        PgfPoly::from_pmf(&acc)
    }

    pub fn roots(&self, tol: f64) -> Result<RootSet, PgfError> {
        let mut sets = Vec::new();
        for (p, m) in &self.factors {
            if p.degree() > 0 {
                sets.push((find_roots(p, tol)?, *m));
            }
        }
        if sets.is_empty() {
            return Err(PgfError::ConstantPolynomial);
        }
        Ok(RootSet::merge(&sets))
    }

    pub fn moments(&self) -> MomentSummary {
        let mut mu = 0.0;
        let mut sigma2 = 0.0;
        for (p, m) in &self.factors {
            let s = p.moments();
            mu += s.mu * *m as f64;
            sigma2 += s.sigma2 * *m as f64;
        }
        MomentSummary { mu, sigma2, sigma: sigma2.sqrt() }
    }

    pub fn potential(&self) -> Result<FactoredPotential, PgfError> {
        let parts = self
            .factors
            .iter()
            .map(|(p, m)| Ok((PgfPotential::new(p)?, *m as f64)))
            .collect::<Result<Vec<_>, PgfError>>()?;
        Ok(FactoredPotential { parts })
    }
}

#[derive(Debug, Clone)]
pub struct FactoredPotential {
    parts: Vec<(PgfPotential, f64)>,
}

impl Potential for FactoredPotential {
    fn u(&self, z: Complex64) -> f64 {
        self.parts.iter().map(|(p, m)| m * p.u(z)).sum()
    }

    fn near_singularity(&self, z: Complex64, radius: f64) -> bool {
        self.parts.iter().any(|(p, _)| p.near_singularity(z, radius))
    }
}

#[derive(Serialize, Deserialize)]
struct RootWire(
    #[serde(with = "crate::decimal::scalar")] f64,
    #[serde(with = "crate::decimal::scalar")] f64,
    usize,
);

impl Serialize for RootSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<RootWire> = self.roots.iter().map(|(z, m)| RootWire(z.re, z.im, *m)).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RootSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<RootWire>::deserialize(d)?;
        Ok(RootSet::from_roots(v.into_iter().map(|w| (Complex64::new(w.0, w.1), w.2)).collect()))
    }
}

#[derive(Serialize, Deserialize)]
struct PolyWire {
    #[serde(with = "crate::decimal::vec")]
    coeffs: Vec<f64>,
}

impl Serialize for PgfPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PolyWire { coeffs: self.coeffs.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PgfPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = PolyWire::deserialize(d)?;
        PgfPoly::new(&w.coeffs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn random_pgf(rng: &mut ChaCha8Rng, max_deg: usize) -> PgfPoly {
        let d = rng.random_range(1..=max_deg);
        let raw: Vec<f64> = (0..=d).map(|_| rng.random::<f64>() + 1e-3).collect();
        PgfPoly::normalize(&raw).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(PgfPoly::normalize(&[1.0, 1.0]).unwrap().coeffs(), &[0.5, 0.5]);
        assert_eq!(PgfPoly::normalize(&[2.0, 0.0, 2.0]).unwrap().coeffs(), &[0.5, 0.0, 0.5]);
        assert!(matches!(
            PgfPoly::normalize(&[1.0, -1.0]),
            Err(PgfError::NegativeCoefficient { index: 1, .. })
        ));
        assert_eq!(PgfPoly::normalize(&[1.0, -1e-16]).unwrap().coeffs(), &[1.0]);
        assert!(PgfPoly::normalize(&[0.0, 0.0]).is_err());
        assert!(PgfPoly::new(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn root_examples() {
        let r = find_roots(&PgfPoly::normalize(&[1.0, 1.0]).unwrap(), 1e-12).unwrap();
        assert_eq!(r.roots(), &[(c(-1.0, 0.0), 1)]);
        assert_eq!(r.n_x(), 0);
        assert_relative_eq!(r.c_x(), -(2f64.ln()));

        let r = find_roots(&PgfPoly::normalize(&[0.25, 0.5, 0.25]).unwrap(), 1e-12).unwrap();
        assert_eq!(r.roots().len(), 1);
        assert_eq!(r.roots()[0].1, 2);
        assert!((r.roots()[0].0 - c(-1.0, 0.0)).norm() < 1e-9);
        assert_eq!(r.roots()[0].0.im, 0.0);

        let r = find_roots(&PgfPoly::normalize(&[0.5, 0.0, 0.5]).unwrap(), 1e-12).unwrap();
        let flat = r.flat();
        assert_eq!(flat.len(), 2);
        assert!(flat.iter().any(|z| (z - c(0.0, 1.0)).norm() < 1e-12));
        assert!(flat.iter().any(|z| (z - c(0.0, -1.0)).norm() < 1e-12));
        assert_eq!(flat[0], flat[1].conj());

        assert!(matches!(find_roots(&PgfPoly::normalize(&[1.0]).unwrap(), 1e-12), Err(PgfError::ConstantPolynomial)));
    }

    #[test]
    fn roots_of_unity_shifted() {
        for d in [7usize, 20, 33] {
            let mut raw = vec![0.0; d + 1];
            raw[0] = 1.0;
            raw[d] = 1.0;
            let r = find_roots(&PgfPoly::normalize(&raw).unwrap(), DEFAULT_ROOT_TOL).unwrap();
            assert_eq!(r.degree(), d);
            for z in r.flat() {
                assert!((z.powu(d as u32) + 1.0).norm() < 1e-9, "{d} {z}");
            }
        }
    }

    #[test]
    fn zero_roots_are_exact() {
        let p = PgfPoly::normalize(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        let r = find_roots(&p, 1e-12).unwrap();
        assert!(r.roots().contains(&(c(0.0, 0.0), 2)));
        assert_eq!(r.n_x(), 2);
        let g = root_geometry(&r);
        assert_eq!(g.delta_ball, 1.0);
        assert_eq!(g.delta_sector, PI);
    }

    #[test]
    fn geometry_examples() {
        let g = root_geometry(&RootSet::from_roots(vec![(c(-1.0, 0.0), 1)]));
        assert_eq!((g.delta_ball, g.delta_sector), (2.0, PI));
        let g = root_geometry(&RootSet::from_roots(vec![(c(0.0, 1.0), 1), (c(0.0, -1.0), 1)]));
        assert_relative_eq!(g.delta_ball, 2f64.sqrt());
        assert_relative_eq!(g.delta_sector, PI / 2.0);
        let g = root_geometry(&RootSet::from_roots(vec![(c(0.0, 0.0), 1), (c(-1.0, 0.0), 1)]));
        assert_eq!((g.delta_ball, g.delta_sector), (1.0, PI));
    }

    #[test]
    fn potential_examples() {
        let b = PgfPoly::normalize(&[1.0, 1.0]).unwrap();
        assert_eq!(log_potential(&b, c(1.0, 0.0), false).unwrap(), 0.0);
        assert_eq!(log_potential(&b, c(-1.0, 0.0), false).unwrap(), f64::NEG_INFINITY);
        let u0 = log_potential(&b, c(2.0, 0.0), true).unwrap();
        assert_relative_eq!(u0, 1.5f64.ln() - 0.5 * 2f64.ln(), max_relative = 1e-14);
        assert!((u0 - 0.05889).abs() < 1e-5);
        assert_eq!(log_potential(&b, c(0.0, 0.0), true), Err(PgfError::ZeroArgument));
    }

    #[test]
    fn potential_near_root_uses_root_form() {
        let f = FactoredPgf::new(vec![(PgfPoly::normalize(&[1.0, 1.0]).unwrap(), 40)]);
        let p = f.expand();
        let z = c(-1.0 + 1e-9, 0.0);
        let want = 40.0 * (1e-9f64 / 2.0).ln();
        let got = PgfPotential::new(&PgfPoly::normalize(&[1.0, 1.0]).unwrap()).unwrap().u(z) * 40.0;
        assert_relative_eq!(got, want, max_relative = 1e-6);
        assert_relative_eq!(f.potential().unwrap().u(z), want, max_relative = 1e-6);
        // direct evaluation of the expanded polynomial is lost to cancellation
        assert!((p.log_abs_eval(z).0 - want).abs() > 1.0);
    }

    #[test]
    fn factored_roots_and_moments() {
        let b = PgfPoly::normalize(&[1.0, 1.0]).unwrap();
        let f = FactoredPgf::new(vec![(b.clone(), 64)]);
        let r = f.roots(1e-12).unwrap();
        assert_eq!(r.roots(), &[(c(-1.0, 0.0), 64)]);
        assert_eq!(f.degree(), 64);
        let m = f.moments();
        assert_relative_eq!(m.sigma2, 16.0);
        assert_relative_eq!(f.expand().moments().sigma2, 16.0, max_relative = 1e-12);
    }

    #[test]
    fn seed_factor_roots_are_exact() {
        let rho = 1.3f64;
        let theta = 2.0f64;
        let p = PgfPoly::normalize(&[rho * rho, -2.0 * rho * theta.cos(), 1.0]).unwrap();
        let r = find_roots(&p, 1e-12).unwrap();
        for z in r.flat() {
            assert!((z.norm() - rho).abs() < 1e-12);
            assert!((z.arg().abs() - theta).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let p = PgfPoly::normalize(&[1.0, 2.0, 1.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<PgfPoly>(&s).unwrap(), p);
        let r = find_roots(&PgfPoly::normalize(&[0.5, 0.0, 0.5]).unwrap(), 1e-12).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.starts_with("[["));
        let back: RootSet = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn random_root_form_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = random_pgf(&mut rng, 30);
            let r = find_roots(&p, DEFAULT_ROOT_TOL).unwrap();
            assert_eq!(r.degree(), p.degree());
            for _ in 0..50 {
                let z = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                if r.distance_to(z) < 1e-3 || z.norm() < 1e-3 {
                    continue;
                }
                let direct = p.log_abs_eval(z).0;
                assert!((r.potential(z) - direct).abs() < 1e-8, "{} vs {}", r.potential(z), direct);
            }
        }
    }

    #[test]
    fn random_round_trip_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let p = random_pgf(&mut rng, 20);
            let r = find_roots(&p, DEFAULT_ROOT_TOL).unwrap();
            let back = PgfPoly::from_roots(r.roots()).unwrap();
            for (a, b) in back.coeffs().iter().zip(p.coeffs()) {
                assert!((a - b).abs() < 1e-8);
            }
            let z = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            assert_eq!(p.log_abs_eval(z).0, p.log_abs_eval(z.conj()).0);
            // weak positivity
            let (lr, _) = p.log_abs_eval(c(z.norm(), 0.0));
            assert!(lr - p.log_abs_eval(z).0 >= -1e-10);
        }
    }
}
