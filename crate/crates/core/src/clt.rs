//! Characteristic functions of standardized variables, the cumulant
//! remainder `R(xi)`, Esseen inversion and consolidated bound reports.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::cumulants::{CumulantError, CumulantSeq};
use crate::dist::{self, DistError};
use crate::numeric::{integrate, Quadrature};
use crate::pgf::{root_geometry, FactoredPgf, PgfError, PgfPoly, DEFAULT_ROOT_TOL};
use crate::ErrorClass;

pub const ESSEEN_REL_TOL: f64 = 1e-8;
const ESSEEN_MAX_PANELS: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CltError {
    #[error("the variable has zero variance")]
    ZeroVariance,
    #[error("parameter {name} = {value} is out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("quadrature stopped at estimated error {error} for value {value}")]
    Quadrature { value: f64, error: f64 },
    #[error("zero-free angle is 0: a root lies at 1 or on the positive axis")]
    ZeroDelta,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Pgf(#[from] PgfError),
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
}

impl CltError {
    pub fn class(&self) -> ErrorClass {
        match self {
            CltError::Quadrature { .. } => ErrorClass::Internal,
            CltError::Dist(e) => e.class(),
            CltError::Pgf(e) => e.class(),
            CltError::Cumulant(e) => e.class(),
            _ => ErrorClass::Precondition,
        }
    }
}

/// `xi -> E exp(i xi (X - mu)/sigma)` for a generating function kept as a
/// product of factor powers.
#[derive(Debug, Clone)]
pub struct StandardizedCharFn {
    factors: Vec<(PgfPoly, usize)>,
    mu: f64,
    sigma: f64,
}

impl StandardizedCharFn {
    pub fn new(poly: &PgfPoly) -> Result<Self, CltError> {
        Self::from_factored(&FactoredPgf::single(poly.clone()))
    }

    pub fn from_factored(f: &FactoredPgf) -> Result<Self, CltError> {
        let m = f.moments();
        if !(m.sigma > 0.0) {
            return Err(CltError::ZeroVariance);
        }
        Ok(Self { factors: f.factors().to_vec(), mu: m.mu, sigma: m.sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        let t = xi / self.sigma;
        let z = Complex64::from_polar(1.0, t);
        let mut acc = Complex64::from_polar(1.0, -self.mu * t);
        for (p, m) in &self.factors {
            acc *= p.eval(z).powu(*m as u32);
        }
        acc
    }
}

/// `psi_{X*}(xi) = f(e^{i xi/sigma}) e^{-i mu xi/sigma}`.
pub fn characteristic_star(poly: &PgfPoly, xi: f64) -> Result<Complex64, CltError> {
    Ok(StandardizedCharFn::new(poly)?.eval(xi))
}

/// `R(xi) = sum_{j>=3} (a_j/sigma^j) (i xi)^j`, truncated at the order of
/// the cumulant sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderSeries {
    #[serde(with = "crate::decimal::scalar")]
    pub sigma: f64,
    /// `coeffs[j] = r_j`; entries 0, 1 and 2 are zero.
    #[serde(with = "crate::decimal::vec")]
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderValue {
    pub value: Complex64,
    /// Set when `|xi|` exceeds the supplied convergence radius heuristic.
    pub beyond_radius: bool,
}

impl RemainderSeries {
    pub fn new(a: &CumulantSeq, sigma: f64) -> Result<Self, CltError> {
        if !(sigma > 0.0) {
            return Err(CltError::ZeroVariance);
        }
        let mut coeffs = vec![0.0; a.order() + 1];
        for (j, c) in coeffs.iter_mut().enumerate().skip(3) {
            *c = scaled(a.a(j), sigma, j);
        }
        Ok(Self { sigma, coeffs })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn eval(&self, xi: Complex64) -> Complex64 {
        let w = Complex64::new(0.0, 1.0) * xi;
        let mut acc = Complex64::new(0.0, 0.0);
        for &r in self.coeffs.iter().skip(3).rev() {
            acc = (acc + r) * w;
        }
        // acc = sum_{j>=3} r_j w^{j-2}
        acc * w * w
    }

    /// `sup |R(xi)| / |xi|^3` over `samples` real points in `(0, tau]`.
    pub fn cubic_ratio(&self, tau: f64, samples: usize) -> f64 {
        (1..=samples.max(1))
            .map(|k| {
                let x = tau * k as f64 / samples.max(1) as f64;
                self.eval(Complex64::new(x, 0.0)).norm() / x.powi(3)
            })
            .fold(0.0, f64::max)
    }
}

/// `x / sigma^j` through logarithms, so that neither factor overflows.
fn scaled(x: f64, sigma: f64, j: usize) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * (x.abs().ln() - j as f64 * sigma.ln()).exp()
    }
}

/// Evaluates the remainder; `radius` is the convergence heuristic
/// `sigma s_star / 2` from cumulant taming, when known.
pub fn remainder_eval(a: &CumulantSeq, sigma: f64, xi: Complex64, radius: Option<f64>) -> Result<RemainderValue, CltError> {
    let s = RemainderSeries::new(a, sigma)?;
    Ok(RemainderValue { value: s.eval(xi), beyond_radius: radius.is_some_and(|r| xi.norm() > r) })
}

/// `sigma s_star / 2`, the radius on which the tamed cumulants bound
/// `|R(xi)| < 2|xi|^3/(s_star sigma)`.
pub fn remainder_radius(a: &CumulantSeq, s: f64, l: usize) -> Result<f64, CltError> {
    let t = crate::cumulants::tame_cumulants(a, s, l)?;
    Ok(a.sigma2().sqrt() * t.s_star / 2.0)
}

/// `2^9 max{eta, 1/tau}`: Kolmogorov bound when `|R(xi)| <= eta |xi|^3` on
/// `|xi| < tau`.
pub fn fourier_inversion_bound(eta: f64, tau: f64) -> f64 {
    512.0 * eta.max(1.0 / tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsseenValue {
    #[serde(with = "crate::decimal::scalar")]
    pub value: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub t: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub quad_error: f64,
}

/// `(1/pi) int_{-T}^{T} |psi*(xi) - e^{-xi^2/2}| / |xi| dxi + 4/T`.
///
/// The integrand is even, so the integral over `[0, T]` is doubled; the
/// removable singularity at 0 is never evaluated by the Gauss-Kronrod
/// nodes.
pub fn esseen_from_charfn<F: Fn(f64) -> Complex64>(psi: F, t: f64, initial_panels: usize) -> Result<EsseenValue, CltError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(CltError::BadParameter { name: "T", value: t });
    }
    let g = |x: f64| {
        if x == 0.0 {
            0.0
        } else {
            (psi(x) - (-0.5 * x * x).exp()).norm() / x
        }
    };
    let q: Quadrature = integrate(g, 0.0, t, initial_panels.max(1), ESSEEN_REL_TOL, 1e-15, ESSEEN_MAX_PANELS);
    if !q.converged {
        return Err(CltError::Quadrature { value: q.value, error: q.error });
    }
    Ok(EsseenValue { value: 2.0 / PI * q.value + 4.0 / t, t, quad_error: 2.0 / PI * q.error })
}

/// Panels follow the period `2 pi sigma` of `psi*`.
fn default_panels(t: f64, sigma: f64) -> usize {
    ((8.0 * t / (2.0 * PI * sigma)).ceil() as usize).clamp(8, 4096)
}

pub fn esseen_bound(poly: &PgfPoly, t: f64) -> Result<EsseenValue, CltError> {
    let cf = StandardizedCharFn::new(poly)?;
    esseen_from_charfn(|x| cf.eval(x), t, default_panels(t, cf.sigma))
}

pub fn esseen_bound_factored(f: &FactoredPgf, t: f64) -> Result<EsseenValue, CltError> {
    let cf = StandardizedCharFn::from_factored(f)?;
    esseen_from_charfn(|x| cf.eval(x), t, default_panels(t, cf.sigma))
}

/// `(kappa, delta)`: `|u(z)|/|z|^kappa -> 0` in the sector `S(delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSpec {
    pub kappa: f64,
    pub delta: f64,
}

impl GrowthSpec {
    pub fn new(kappa: f64, delta: f64) -> Result<Self, CltError> {
        if !(kappa > 0.0) {
            return Err(CltError::BadParameter { name: "kappa", value: kappa });
        }
        if !(delta > 0.0) {
            return Err(CltError::BadParameter { name: "delta", value: delta });
        }
        Ok(Self { kappa, delta })
    }
}

/// `max_{|arg z| <= delta} |u(z)|/|z|^kappa` on each circle `|z| = r`.
/// A decreasing profile is evidence for the growth condition, never a proof.
pub fn growth_profile<P: crate::pgf::Potential + ?Sized>(
    potential: &P,
    spec: &GrowthSpec,
    radii: &[f64],
    rays: usize,
) -> Vec<(f64, f64)> {
    let rays = rays.max(2);
    radii
        .iter()
        .map(|&r| {
            let m = (0..rays)
                .map(|k| {
                    let t = -spec.delta + 2.0 * spec.delta * k as f64 / (rays - 1) as f64;
                    potential.u(Complex64::from_polar(r, t)).abs()
                })
                .fold(0.0, f64::max);
            (r, m / r.powf(spec.kappa))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BoundMode {
    /// `2^3261 log n / (delta sigma)`, roots outside `B(1, delta)`.
    Ball { n: usize, delta: f64 },
    /// `2^3257 / (delta sigma)`, roots outside `S(delta)`.
    Sector { delta: f64 },
    /// `2^3258 max{1/delta, kappa} / sigma` under the growth condition.
    General { growth: GrowthSpec },
    /// `2^3255 / (eps sigma)` from harmonicity and `b`-decreasing on `B(1, eps)`.
    Local { eps: f64 },
}

/// A theorem bound kept as `log2` of its raw value; `capped` is
/// `min(1, raw)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBound {
    #[serde(with = "crate::decimal::scalar")]
    pub log2_raw: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub capped: f64,
}

impl TheoremBound {
    fn from_log2(l: f64) -> Self {
        Self { log2_raw: l, capped: if l >= 0.0 { 1.0 } else { l.exp2() } }
    }
}

pub fn theorem_bound(mode: BoundMode, sigma: f64) -> Result<TheoremBound, CltError> {
    if !(sigma > 0.0) {
        return Err(CltError::ZeroVariance);
    }
    let ls = sigma.log2();
    let l = match mode {
        BoundMode::Ball { n, delta } => {
            check_delta(delta)?;
            if n == 0 {
                return Err(CltError::BadParameter { name: "n", value: 0.0 });
            }
            3261.0 + (n as f64).ln().log2() - delta.log2() - ls
        }
        BoundMode::Sector { delta } => {
            check_delta(delta)?;
            3257.0 - delta.log2() - ls
        }
        BoundMode::General { growth } => 3258.0 + (1.0 / growth.delta).max(growth.kappa).log2() - ls,
        BoundMode::Local { eps } => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(CltError::BadParameter { name: "eps", value: eps });
            }
            3255.0 - eps.log2() - ls
        }
    };
    Ok(TheoremBound::from_log2(l))
}

fn check_delta(delta: f64) -> Result<(), CltError> {
    if delta == 0.0 {
        Err(CltError::ZeroDelta)
    } else if !(delta > 0.0) {
        Err(CltError::BadParameter { name: "delta", value: delta })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    #[serde(with = "crate::decimal::scalar")]
    pub mu: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub sigma: f64,
    /// Exact Kolmogorov distance of the standardized variable.
    #[serde(rename = "D", with = "crate::decimal::scalar")]
    pub d: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub delta_ball: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub delta_sector: f64,
    pub bound_ball: TheoremBound,
    pub bound_sector: TheoremBound,
    /// `D delta_sector sigma`.
    #[serde(with = "crate::decimal::scalar")]
    pub ratio_sector: f64,
    /// `D delta_ball sigma / log n`.
    #[serde(with = "crate::decimal::scalar")]
    pub ratio_ball: f64,
    pub esseen: EsseenValue,
}

pub fn verify_normal_approx(poly: &PgfPoly) -> Result<BoundReport, CltError> {
    report(&FactoredPgf::single(poly.clone()), poly)
}

/// As [`verify_normal_approx`], with roots taken factor by factor.
pub fn verify_normal_approx_factored(f: &FactoredPgf) -> Result<BoundReport, CltError> {
    report(f, &f.expand())
}

fn report(f: &FactoredPgf, expanded: &PgfPoly) -> Result<BoundReport, CltError> {
    let m = f.moments();
    if !(m.sigma > 0.0) {
        return Err(CltError::ZeroVariance);
    }
    let n = f.degree();
    let d = dist::kolmogorov_distance(&expanded.to_pmf())?;
    let g = root_geometry(&f.roots(DEFAULT_ROOT_TOL)?);
    let ball = if g.delta_ball > 0.0 {
        theorem_bound(BoundMode::Ball { n, delta: g.delta_ball }, m.sigma)?
    } else {
        TheoremBound::from_log2(f64::INFINITY)
    };
    let sector = if g.delta_sector > 0.0 {
        theorem_bound(BoundMode::Sector { delta: g.delta_sector }, m.sigma)?
    } else {
        TheoremBound::from_log2(f64::INFINITY)
    };
    let t = m.sigma.max(4.0);
    let esseen = esseen_bound_factored(f, t)?;
    Ok(BoundReport {
        n,
        mu: m.mu,
        sigma: m.sigma,
        d,
        delta_ball: g.delta_ball,
        delta_sector: g.delta_sector,
        bound_ball: ball,
        bound_sector: sector,
        ratio_sector: d * g.delta_sector * m.sigma,
        ratio_ball: d * g.delta_ball * m.sigma / (n as f64).ln(),
        esseen,
    })
}

/// One row of a sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub delta_ball: f64,
    pub delta_sector: f64,
    pub sigma: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub ratio_sector: f64,
    pub ratio_ball: f64,
}

impl From<&BoundReport> for SweepRow {
    fn from(r: &BoundReport) -> Self {
        Self {
            n: r.n,
            delta_ball: r.delta_ball,
            delta_sector: r.delta_sector,
            sigma: r.sigma,
            d: r.d,
            ratio_sector: r.ratio_sector,
            ratio_ball: r.ratio_ball,
        }
    }
}
