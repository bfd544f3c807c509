//! Families that attain the normal-approximation bounds up to constants.
//!
//! Every family is `k` times a simple lattice variable `Y`; scaling by `k`
//! leaves the standardized law unchanged while multiplying the standard
//! deviation by `k`, so the Kolmogorov distance stays at least
//! `e^{-16} k / sigma(X)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::dist::{self, DiscretePmf, DistError};
use crate::numeric::bisect;
use crate::pgf::{root_geometry, FactoredPgf, PgfError, PgfPoly, RootSet, DEFAULT_ROOT_TOL};
use crate::ErrorClass;

/// `e^{-16}`, the constant in the discrete lower bound.
pub const LOWER_BOUND_CONST: f64 = 1.125_351_747_192_591_e-7;
pub const DEFAULT_BALL_CONSTANT: f64 = 100.0;
pub const POISSON_SUPPORT_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("theta = {0} is outside [pi/2, pi]; the middle coefficient would be negative")]
    NegativeCoefficient(f64),
    #[error("parameter {name} = {value} is out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("target variance {target} exceeds the largest reachable {max}")]
    Infeasible { target: f64, max: f64 },
    #[error("k = floor(log n / (c_k delta)) is 0 for c_k = {c_k}; the construction degenerates")]
    Degenerate { c_k: f64 },
    #[error("tail mass {tol} needs more than {cap} atoms")]
    TailUnreachable { tol: f64, cap: usize },
    #[error("solver did not converge")]
    Solver,
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Pgf(#[from] PgfError),
}

impl ConstructionError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ConstructionError::Solver => ErrorClass::Internal,
            ConstructionError::Dist(e) => e.class(),
            ConstructionError::Pgf(e) => e.class(),
            _ => ErrorClass::Precondition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Generator {
    /// `k` times a sum of `m` copies of the sector seed `Y_{rho,theta}`.
    SectorSeeds { rho: f64, theta: f64, m: usize, k: u64 },
    /// `k` times Binomial(`trials`, `p`) with `p = n^{-alpha}`.
    Binomial { trials: usize, p: f64, alpha: f64, k: u64 },
    /// `scale` times Poisson(`lambda`), truncated to `support` atoms.
    Poisson { lambda: f64, scale: f64, support: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionResult {
    pub generator: Generator,
    /// Law of `X` on the lattice `k Z`; for the Poisson family with a
    /// non-integer scale, the law of `Y` with `scale` kept separately.
    pub pmf: DiscretePmf,
    pub k: u64,
    #[serde(with = "crate::decimal::scalar")]
    pub scale: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub achieved_sigma: f64,
    /// Sector angle for sector families, ball radius for the ball family.
    #[serde(with = "crate::decimal::scalar")]
    pub achieved_delta: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub lower_bound: f64,
}

impl ConstructionResult {
    /// Generating polynomial of the lattice law in `pmf`.
    pub fn poly(&self) -> PgfPoly {
        PgfPoly::from_pmf(&self.pmf)
    }

    /// The same polynomial as a product of factor powers, so that roots of
    /// high multiplicity are found factor by factor.
    pub fn factored(&self) -> Result<FactoredPgf, ConstructionError> {
        Ok(match self.generator {
            Generator::SectorSeeds { rho, theta, m, k } => {
                FactoredPgf::new(vec![(seed_sector_pgf(rho, theta)?.substitute_power(k as usize), m)])
            }
            Generator::Binomial { trials, p, k, .. } => {
                let mut c = vec![0.0; k as usize + 1];
                c[0] = 1.0 - p;
                c[k as usize] = p;
                FactoredPgf::new(vec![(PgfPoly::new(&c)?, trials)])
            }
            Generator::Poisson { .. } => FactoredPgf::single(self.poly()),
        })
    }
}

/// `(z^2 - 2 rho cos(theta) z + rho^2) / (1 - 2 rho cos(theta) + rho^2)`,
/// with roots `rho e^{+-i theta}`.
pub fn seed_sector_pgf(rho: f64, theta: f64) -> Result<PgfPoly, ConstructionError> {
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(ConstructionError::BadParameter { name: "rho", value: rho });
    }
    if !(PI / 2.0 - 1e-12..=PI + 1e-12).contains(&theta) {
        return Err(ConstructionError::NegativeCoefficient(theta));
    }
    // cos(pi/2) rounds to 6e-17; clamp so the coefficient is exactly 0 there
    let mid = (-2.0 * rho * theta.cos()).max(0.0);
    Ok(PgfPoly::normalize(&[rho * rho, mid, 1.0])?)
}

pub fn seed_variance(rho: f64, theta: f64) -> Result<f64, ConstructionError> {
    Ok(seed_sector_pgf(rho, theta)?.moments().sigma2)
}

/// Smallest `rho >= 1` with `Var(Y_{rho,theta}) = target`; the variance
/// decreases in `rho` from `Var(Y_{1,theta})` to 0.
pub fn solve_rho_for_variance(theta: f64, target: f64) -> Result<f64, ConstructionError> {
    let v1 = seed_variance(1.0, theta)?;
    if !(target > 0.0) {
        return Err(ConstructionError::BadParameter { name: "target_var", value: target });
    }
    if target > v1 * (1.0 + 1e-12) {
        return Err(ConstructionError::Infeasible { target, max: v1 });
    }
    if target >= v1 {
        return Ok(1.0);
    }
    let g = |rho: f64| seed_variance(rho, theta).expect("rho >= 1") - target;
    let mut hi = 2.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e150 {
            return Err(ConstructionError::Solver);
        }
    }
    bisect(g, 1.0, hi, 0.0, 1e-14 * target.max(1e-300), 2000).ok_or(ConstructionError::Solver)
}

/// `e^{-16} k / sigma`, valid when `sigma / k >= 1/8`.
pub fn discrete_lower_bound(sigma: f64, k: f64) -> Result<f64, ConstructionError> {
    if !(k > 0.0) {
        return Err(ConstructionError::BadParameter { name: "k", value: k });
    }
    if !(sigma / k >= 0.125) {
        return Err(ConstructionError::Precondition(format!("sigma/k = {} is below 1/8", sigma / k)));
    }
    Ok(LOWER_BOUND_CONST * k / sigma)
}

/// A variable with standard deviation `sigma` whose roots have smallest
/// argument exactly `delta`, built as `k (Y_1 + ... + Y_m)` with
/// `delta = theta / k`, `theta in [pi/2, pi]`.
///
/// `m` is the smallest count with `m Var(Y_{1,theta}) >= (sigma/k)^2`; `rho`
/// is then solved so that the variance is hit exactly.
pub fn construct_sector_sharp(sigma: f64, delta: f64) -> Result<ConstructionResult, ConstructionError> {
    if !(delta > 0.0 && delta <= PI) {
        return Err(ConstructionError::BadParameter { name: "delta", value: delta });
    }
    if !(delta * sigma >= 1.0) || !sigma.is_finite() {
        return Err(ConstructionError::Precondition(format!("delta * sigma = {} < 1", delta * sigma)));
    }
    let k = ((PI / (2.0 * delta)) - 1e-9).ceil().max(1.0) as u64;
    let theta = (k as f64 * delta).clamp(PI / 2.0, PI);
    let v1 = seed_variance(1.0, theta)?;
    let ys = sigma / k as f64;
    let m = ((ys * ys / v1) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let rho = solve_rho_for_variance(theta, ys * ys / m as f64)?;
    let seed = seed_sector_pgf(rho, theta)?;
    let pmf = dist::scale_support(&dist::convolve_power(&seed.to_pmf(), m)?, k)?;
    let generator = Generator::SectorSeeds { rho, theta, m, k };
    let achieved_sigma = pmf.moments().sigma;
    let mut out = ConstructionResult {
        generator,
        pmf,
        k,
        scale: 1.0,
        achieved_sigma,
        achieved_delta: f64::NAN,
        lower_bound: discrete_lower_bound(achieved_sigma, k as f64)?,
    };
    let roots = out.factored()?.roots(DEFAULT_ROOT_TOL)?;
    out.achieved_delta = root_geometry(&roots).delta_sector;
    Ok(out)
}

/// The `k` roots of `p z^k + (1 - p)`, each of multiplicity `trials`.
pub fn binomial_power_roots(p: f64, k: u64, trials: usize) -> RootSet {
    let r = ((1.0 - p) / p).powf(1.0 / k as f64);
    let roots = (0..k)
        .map(|l| (Complex64::from_polar(r, (2 * l + 1) as f64 * PI / k as f64), trials))
        .collect();
    RootSet::from_roots(roots)
}

/// `k Binomial(floor(n/k), n^{-alpha})` with `k = floor(log n / (c_k delta))`
/// and `alpha` solved so that the variance is `sigma^2`.
///
/// Requires `sigma^2 in [1, n^0.9)` and `log n / (delta sigma) <= 100 / c_k`,
/// which is the usual `log n / (delta sigma) <= 1` at the default constant.
pub fn construct_ball_sharp(n: usize, delta: f64, sigma: f64, c_k: f64) -> Result<ConstructionResult, ConstructionError> {
    if n < 2 {
        return Err(ConstructionError::BadParameter { name: "n", value: n as f64 });
    }
    if !(delta > 0.0) {
        return Err(ConstructionError::BadParameter { name: "delta", value: delta });
    }
    if !(c_k > 0.0) {
        return Err(ConstructionError::BadParameter { name: "c_k", value: c_k });
    }
    let nf = n as f64;
    let s2 = sigma * sigma;
    if !(s2 >= 1.0 && s2 < nf.powf(0.9)) {
        return Err(ConstructionError::Precondition(format!("sigma^2 = {s2} is outside [1, n^0.9)")));
    }
    let ln_n = nf.ln();
    let k = (ln_n / (c_k * delta)).floor();
    if k < 1.0 {
        return Err(ConstructionError::Degenerate { c_k });
    }
    if ln_n / (delta * sigma) > DEFAULT_BALL_CONSTANT / c_k {
        return Err(ConstructionError::Precondition(format!(
            "log n / (delta sigma) = {} exceeds 100 / c_k",
            ln_n / (delta * sigma)
        )));
    }
    let k = k as u64;
    let trials = n / k as usize;
    let var_at = |alpha: f64| {
        let p = (-alpha * ln_n).exp();
        (k * k) as f64 * trials as f64 * p * (1.0 - p)
    };
    // p <= 1/2 on this range, where the variance decreases in alpha
    let lo = 0.01f64.max(std::f64::consts::LN_2 / ln_n);
    let hi = 1.0;
    if s2 > var_at(lo) || s2 < var_at(hi) {
        return Err(ConstructionError::Infeasible { target: s2, max: var_at(lo) });
    }
    let alpha = bisect(|a| var_at(a) - s2, lo, hi, 0.0, 1e-12 * s2, 2000).ok_or(ConstructionError::Solver)?;
    let p = (-alpha * ln_n).exp();
    let pmf = dist::scale_support(&DiscretePmf::binomial(trials, p)?, k)?;
    let achieved_sigma = pmf.moments().sigma;
    let roots = binomial_power_roots(p, k, trials);
    Ok(ConstructionResult {
        generator: Generator::Binomial { trials, p, alpha, k },
        pmf,
        k,
        scale: 1.0,
        achieved_sigma,
        achieved_delta: root_geometry(&roots).delta_ball,
        lower_bound: discrete_lower_bound(achieved_sigma, k as f64)?,
    })
}

/// `log P(Y >= m) <= -lambda + m (1 + log(lambda/m))` for `m > lambda`.
fn poisson_log_tail(lambda: f64, m: f64) -> f64 {
    -lambda + m * (1.0 + (lambda / m).ln())
}

/// `(kappa/2) Y` with `Y ~ Poisson(4 sigma^2 / kappa^2)`, so that `sigma(X) =
/// sigma` and `u_X(z) = lambda (Re z^{kappa/2} - 1)`.
///
/// The support is cut where the Chernoff bound for the tail drops below
/// `tail_tol`, both for `Y` and for the tilted law `Poisson(lambda 2^{kappa/2})`,
/// so that the truncated generating function also matches the closed-form
/// potential on `|z| <= 2`.
pub fn poisson_scaled(sigma: f64, kappa: f64, tail_tol: f64) -> Result<ConstructionResult, ConstructionError> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(ConstructionError::BadParameter { name: "kappa", value: kappa });
    }
    if !(sigma >= kappa && sigma.is_finite()) {
        return Err(ConstructionError::Precondition(format!("sigma / kappa = {} < 1", sigma / kappa)));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(ConstructionError::BadParameter { name: "tail_tol", value: tail_tol });
    }
    let scale = kappa / 2.0;
    let lambda = 4.0 * sigma * sigma / (kappa * kappa);
    let tilted = lambda * 2f64.powf(scale);
    let log_tol = tail_tol.ln();
    let mut m = tilted.ceil() + 1.0;
    while poisson_log_tail(tilted, m) > log_tol || poisson_log_tail(lambda, m) > log_tol {
        m = (m * 1.05).ceil();
        if m > POISSON_SUPPORT_CAP as f64 {
            return Err(ConstructionError::TailUnreachable { tol: tail_tol, cap: POISSON_SUPPORT_CAP });
        }
    }
    let support = m as usize;
    let ll = lambda.ln();
    let probs: Vec<f64> = (0..support)
        .map(|j| (j as f64 * ll - lambda - libm::lgamma(j as f64 + 1.0)).exp())
        .collect();
    let total = crate::numeric::compensated_sum(probs.iter().copied());
    let probs = probs.into_iter().map(|x| x / total).collect();
    let int_scale = scale.round();
    let (k, rest) = if (scale - int_scale).abs() < 1e-12 && int_scale >= 1.0 { (int_scale as u64, 1.0) } else { (1, scale) };
    let pmf = DiscretePmf::new(probs, k)?;
    let achieved_sigma = pmf.moments().sigma * rest;
    Ok(ConstructionResult {
        generator: Generator::Poisson { lambda, scale, support },
        pmf,
        k,
        scale: rest,
        achieved_sigma,
        // exp(lambda (z^{kappa/2} - 1)) never vanishes
        achieved_delta: PI,
        lower_bound: discrete_lower_bound(achieved_sigma, scale)?,
    })
}

/// `u_X(z) = lambda (Re z^{kappa/2} - 1)` for the scaled Poisson family,
/// principal branch.
pub fn poisson_potential(lambda: f64, kappa: f64, z: Complex64) -> f64 {
    lambda * (z.powf(kappa / 2.0).re - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgf::find_roots;
    use approx::assert_relative_eq;

    #[test]
    fn seed_examples() {
        assert_eq!(seed_sector_pgf(1.0, PI / 2.0).unwrap().coeffs(), &[0.5, 0.0, 0.5]);
        assert_eq!(seed_sector_pgf(1.0, PI).unwrap().coeffs(), &[0.25, 0.5, 0.25]);
        assert!(matches!(seed_sector_pgf(1.0, PI / 3.0), Err(ConstructionError::NegativeCoefficient(_))));
        assert!(seed_sector_pgf(0.5, PI).is_err());
        let r = find_roots(&seed_sector_pgf(1.7, 2.0).unwrap(), DEFAULT_ROOT_TOL).unwrap();
        for (z, _) in r.roots() {
            assert!((z.norm() - 1.7).abs() < 1e-8 && (z.arg().abs() - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rho_solver_examples() {
        assert_eq!(solve_rho_for_variance(PI / 2.0, 1.0).unwrap(), 1.0);
        let rho = solve_rho_for_variance(PI / 2.0, 0.5).unwrap();
        assert!((seed_variance(rho, PI / 2.0).unwrap() - 0.5).abs() <= 1e-12);
        // 4q(1-q) = 1/2 with q = 1/(1+rho^2)
        let q = (1.0 - 0.5f64.sqrt()) / 2.0;
        assert_relative_eq!(rho, (1.0 / q - 1.0).sqrt(), max_relative = 1e-9);
        assert!(matches!(solve_rho_for_variance(PI / 2.0, 10.0), Err(ConstructionError::Infeasible { .. })));
    }

    #[test]
    fn sector_sharp_examples() {
        let r = construct_sector_sharp(10.0, PI / 2.0).unwrap();
        assert_eq!(r.k, 1);
        assert!((r.achieved_sigma - 10.0).abs() < 1e-6);
        assert!((r.achieved_delta - PI / 2.0).abs() < 1e-9);

        let r = construct_sector_sharp(10.0, PI / 4.0).unwrap();
        assert_eq!(r.k, 2);
        assert!(matches!(r.generator, Generator::SectorSeeds { theta, .. } if (theta - PI / 2.0).abs() < 1e-15));
        assert!((r.achieved_sigma - 10.0).abs() < 1e-6);
        assert!((r.achieved_delta - PI / 4.0).abs() < 1e-9);
        let roots = r.factored().unwrap().roots(DEFAULT_ROOT_TOL).unwrap();
        for (z, _) in roots.roots() {
            let a = z.arg().abs();
            assert!((a - PI / 4.0).abs() < 1e-8 || (a - 3.0 * PI / 4.0).abs() < 1e-8, "{z}");
        }
        let d = dist::kolmogorov_distance(&r.pmf).unwrap();
        assert!(d >= r.lower_bound);
        assert!(matches!(construct_sector_sharp(1.0, 0.5), Err(ConstructionError::Precondition(_))));
    }

    #[test]
    fn ball_sharp_examples() {
        let r = construct_ball_sharp(4096, 0.25, 16.0, 1.0).unwrap();
        assert_eq!(r.k, 33);
        assert!((r.achieved_sigma - 16.0).abs() < 1e-6);
        let Generator::Binomial { trials, p, alpha, .. } = r.generator else { panic!() };
        assert_eq!(trials, 124);
        assert!((0.01..1.0).contains(&alpha));
        let numeric = find_roots(&PgfPoly::normalize(&{
            let mut c = vec![0.0; 34];
            c[0] = 1.0 - p;
            c[33] = p;
            c
        }).unwrap(), DEFAULT_ROOT_TOL)
        .unwrap();
        let analytic = binomial_power_roots(p, 33, 1);
        assert!((root_geometry(&numeric).delta_ball - root_geometry(&analytic).delta_ball).abs() < 1e-8);
        assert!(dist::kolmogorov_distance(&r.pmf).unwrap() >= r.lower_bound);
        assert!(matches!(construct_ball_sharp(4096, 0.25, 4096f64.sqrt(), 1.0), Err(ConstructionError::Precondition(_))));
        assert!(matches!(construct_ball_sharp(4096, 0.25, 16.0, 100.0), Err(ConstructionError::Degenerate { .. })));
    }

    #[test]
    fn poisson_examples() {
        let r = poisson_scaled(4.0, 2.0, 1e-12).unwrap();
        assert_eq!((r.k, r.scale), (1, 1.0));
        assert!((r.achieved_sigma - 4.0).abs() < 1e-9);
        assert_eq!(poisson_potential(16.0, 2.0, Complex64::new(1.0, 0.0)), 0.0);
        assert_eq!(poisson_potential(3.3, 0.7, Complex64::new(1.0, 0.0)), 0.0);
        let poly = r.poly();
        for z in [Complex64::new(2.0, 0.0), Complex64::from_polar(1.5, 0.3), Complex64::from_polar(0.2, -0.4)] {
            let closed = poisson_potential(16.0, 2.0, z);
            assert!((poly.log_abs_eval(z).0 - closed).abs() < 1e-8, "{z}");
        }
        let r = poisson_scaled(6.0, 3.0, 1e-10).unwrap();
        assert_eq!((r.k, r.scale), (1, 1.5));
        assert!((r.achieved_sigma - 6.0).abs() < 1e-8);
        assert!(poisson_scaled(1.0, 2.0, 1e-12).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        assert_relative_eq!(discrete_lower_bound(1.0, 1.0).unwrap(), (-16f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(discrete_lower_bound(3.0, 3.0).unwrap(), (-16f64).exp(), max_relative = 1e-15);
        assert!(discrete_lower_bound(0.1, 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = construct_sector_sharp(5.0, PI / 2.0).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<ConstructionResult>(&s).unwrap(), r);
    }
}
