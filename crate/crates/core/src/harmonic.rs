//! Grid checks of the positivity properties of the potential `u`, plus the
//! closed-form quantities used alongside them (certified `b`, difference
//! functions, Poisson densities, Harnack constants, end bounds).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::pgf::{FactoredPgf, PgfError, PgfPoly, PgfPotential, Potential, RootSet};
use crate::ErrorClass;

/// Grid points closer than this to a singularity of `u` are skipped.
pub const ROOT_EXCLUSION: f64 = 1e-6;
pub const WEAK_POSITIVITY_TOL: f64 = 1e-10;
pub const B_DECREASING_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarmonicError {
    #[error("parameter {name} = {value} is out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("grid needs at least 8 points per axis, got {radial} x {angular}")]
    GridTooSmall { radial: usize, angular: usize },
    #[error("the potential is singular at {0}")]
    Singular(Complex64),
    #[error("point {z} is not inside the ball")]
    OutsideBall { z: Complex64 },
    #[error("point {w} is not on the boundary circle")]
    NotOnBoundary { w: Complex64 },
    #[error(transparent)]
    Pgf(#[from] PgfError),
}

impl HarmonicError {
    pub fn class(&self) -> ErrorClass {
        match self {
            HarmonicError::Pgf(e) => e.class(),
            _ => ErrorClass::Precondition,
        }
    }
}

/// `{z : arg z in [alpha, beta]}`, additionally cut to `|z| in [1/R, R]`
/// when `truncated`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorSpec {
    pub alpha: f64,
    pub beta: f64,
    pub r_outer: f64,
    pub truncated: bool,
}

impl SectorSpec {
    pub fn new(alpha: f64, beta: f64, r_outer: f64, truncated: bool) -> Result<Self, HarmonicError> {
        if !(-PI..=PI).contains(&alpha) || !(-PI..=PI).contains(&beta) || alpha > beta {
            return Err(HarmonicError::BadParameter { name: "alpha/beta", value: beta - alpha });
        }
        if !(r_outer > 1.0) {
            return Err(HarmonicError::BadParameter { name: "R", value: r_outer });
        }
        Ok(Self { alpha, beta, r_outer, truncated })
    }

    /// The truncated symmetric sector `|z| in [1/R, R]`, `|arg z| <= eps`.
    pub fn symmetric(eps: f64, r_outer: f64) -> Result<Self, HarmonicError> {
        Self::new(-eps, eps, r_outer, true)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        if r == 0.0 {
            return false;
        }
        if self.truncated && (r < 1.0 / self.r_outer || r > self.r_outer) {
            return false;
        }
        let a = z.arg();
        a >= self.alpha && a <= self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    Ball { center: Complex64, radius: f64 },
    Sector(SectorSpec),
}

impl Region {
    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            Region::Ball { center, radius } => (z - center).norm() <= *radius,
            Region::Sector(s) => s.contains(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radial: usize,
    pub angular: usize,
    pub region: Region,
}

impl GridSpec {
    pub fn new(radial: usize, angular: usize, region: Region) -> Result<Self, HarmonicError> {
        if radial < 8 || angular < 8 {
            return Err(HarmonicError::GridTooSmall { radial, angular });
        }
        Ok(Self { radial, angular, region })
    }

    /// 256 radial by 1024 angular points.
    pub fn default_for(region: Region) -> Self {
        Self { radial: 256, angular: 1024, region }
    }

    /// Polar grid of the region: for a ball, circles about its center
    /// (center and boundary included); for a sector, geometrically spaced
    /// radii in `[1/R, R]` and evenly spaced angles in `[alpha, beta]`.
    pub fn points(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.radial * self.angular);
        match self.region {
            Region::Ball { center, radius } => {
                for i in 0..self.radial {
                    let rho = radius * i as f64 / (self.radial - 1) as f64;
                    for k in 0..self.angular {
                        let phi = 2.0 * PI * k as f64 / self.angular as f64;
                        out.push(center + Complex64::from_polar(rho, phi));
                        if i == 0 {
                            break;
                        }
                    }
                }
            }
            Region::Sector(s) => {
                for rho in sector_radii(&s, self.radial) {
                    for k in 0..self.angular {
                        let t = s.alpha + (s.beta - s.alpha) * k as f64 / (self.angular - 1) as f64;
                        out.push(Complex64::from_polar(rho, t));
                    }
                }
            }
        }
        out
    }

    /// Circles `|z| = rho` and, on each, an angle interval inside `[0, pi]`
    /// intersected with the region.
    fn rings(&self) -> Vec<(f64, f64, f64)> {
        match self.region {
            Region::Ball { center, radius } => {
                let c = center.norm();
                let lo = (c - radius).max(radius * 1e-3);
                let hi = c + radius;
                (0..self.radial)
                    .filter_map(|i| {
                        let rho = lo + (hi - lo) * i as f64 / (self.radial - 1) as f64;
                        if c == 0.0 {
                            return if rho <= radius { Some((rho, 0.0, PI)) } else { None };
                        }
                        let cosv = (rho * rho + c * c - radius * radius) / (2.0 * rho * c);
                        if cosv > 1.0 {
                            return None;
                        }
                        let half = cosv.max(-1.0).acos();
                        let a = center.arg();
                        let t0 = (a - half).max(0.0);
                        let t1 = (a + half).min(PI);
                        if t0 > t1 {
                            None
                        } else {
                            Some((rho, t0, t1))
                        }
                    })
                    .collect()
            }
            Region::Sector(s) => {
                let t0 = s.alpha.max(0.0);
                if t0 > s.beta {
                    return Vec::new();
                }
                sector_radii(&s, self.radial).into_iter().map(|rho| (rho, t0, s.beta)).collect()
            }
        }
    }
}

fn sector_radii(s: &SectorSpec, n: usize) -> Vec<f64> {
    let (lo, hi) = (-(s.r_outer.ln()), s.r_outer.ln());
    (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub pass: bool,
    #[serde(with = "crate::decimal::scalar")]
    pub min_slack: f64,
    /// Where the minimum was attained; a pair `(z1, z2)` for two-point checks.
    pub worst_point: Vec<Complex64>,
    pub grid: GridSpec,
    pub evaluated: usize,
    /// Points dropped because they sit on or next to a singularity of `u`.
    pub skipped: usize,
}

fn near(p: &(impl Potential + ?Sized), z: Complex64) -> bool {
    p.near_singularity(z, ROOT_EXCLUSION)
}

/// `min u(|z|) - u(z)` over the grid; passes at `-1e-10`.
pub fn weak_positivity_check<P: Potential + ?Sized>(potential: &P, grid: &GridSpec) -> CheckReport {
    let pts = grid.points();
    let results: Vec<Option<(f64, Complex64)>> = pts
        .par_iter()
        .map(|&z| {
            let r = Complex64::new(z.norm(), 0.0);
            if near(potential, z) || near(potential, r) {
                return None;
            }
            let slack = potential.u(r) - potential.u(z);
            if slack.is_nan() {
                None
            } else {
                Some((slack, z))
            }
        })
        .collect();
    let mut min_slack = f64::INFINITY;
    let mut worst = Vec::new();
    let mut skipped = 0;
    for r in &results {
        match r {
            Some((s, z)) => {
                if *s < min_slack {
                    min_slack = *s;
                    worst = vec![*z];
                }
            }
            None => skipped += 1,
        }
    }
    CheckReport {
        pass: min_slack >= -WEAK_POSITIVITY_TOL,
        min_slack,
        worst_point: worst,
        grid: *grid,
        evaluated: results.len() - skipped,
        skipped,
    }
}

/// `min u(rho e^{i t1}) - u(rho e^{i t2}) + b` over `0 <= t1 <= t2` on each
/// grid ring inside the region; passes at `-1e-9`.
///
/// On each ring every ordered pair is covered by a running minimum of
/// `u(rho e^{i t1})` over `t1 <= t2`, so the cost is linear in the ring size.
pub fn b_decreasing_check<P: Potential + ?Sized>(potential: &P, b: f64, grid: &GridSpec) -> CheckReport {
    let rings = grid.rings();
    let n = grid.angular;
    let per_ring: Vec<(f64, Vec<Complex64>, usize, usize)> = rings
        .par_iter()
        .map(|&(rho, t0, t1)| {
            let mut best = f64::INFINITY;
            let mut worst = Vec::new();
            let mut evaluated = 0;
            let mut skipped = 0;
            let mut run_min = f64::INFINITY;
            let mut run_at = Complex64::new(0.0, 0.0);
            for k in 0..n {
                let t = if n == 1 { t0 } else { t0 + (t1 - t0) * k as f64 / (n - 1) as f64 };
                let z = Complex64::from_polar(rho, t);
                if near(potential, z) {
                    skipped += 1;
                    continue;
                }
                let u = potential.u(z);
                if u.is_nan() {
                    skipped += 1;
                    continue;
                }
                evaluated += 1;
                if u < run_min {
                    run_min = u;
                    run_at = z;
                }
                let slack = run_min - u + b;
                if slack < best {
                    best = slack;
                    worst = vec![run_at, z];
                }
            }
            (best, worst, evaluated, skipped)
        })
        .collect();
    let mut min_slack = f64::INFINITY;
    let mut worst = Vec::new();
    let (mut evaluated, mut skipped) = (0, 0);
    for (s, w, e, k) in per_ring {
        evaluated += e;
        skipped += k;
        if s < min_slack {
            min_slack = s;
            worst = w;
        }
    }
    CheckReport { pass: min_slack >= -B_DECREASING_TOL, min_slack, worst_point: worst, grid: *grid, evaluated, skipped }
}

/// `b = (8/3) (r/R)^{1/delta} u_max`, the smallest `b` for which
/// `(r/R)^{1/delta} u_max <= 3b/8`.
pub fn certified_b(u_max_ends: f64, r: f64, r_outer: f64, delta: f64) -> Result<f64, HarmonicError> {
    if !(r > 0.0 && r_outer > r) {
        return Err(HarmonicError::BadParameter { name: "r", value: r });
    }
    if !(delta > 0.0 && delta < PI) {
        return Err(HarmonicError::BadParameter { name: "delta", value: delta });
    }
    if !(u_max_ends >= 0.0) {
        return Err(HarmonicError::BadParameter { name: "u_max_ends", value: u_max_ends });
    }
    Ok(8.0 / 3.0 * ((r / r_outer).ln() / delta).exp() * u_max_ends)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "angle", rename_all = "lowercase")]
pub enum Difference {
    /// `h(z) = u(z) - u(e^{i tau} conj z) + b`.
    H(f64),
    /// `phi(z) = u(z) - u(e^{i gamma} z) + b`.
    Phi(f64),
}

pub fn difference_eval<P: Potential + ?Sized>(
    potential: &P,
    z: Complex64,
    kind: Difference,
    b: f64,
) -> Result<f64, HarmonicError> {
    let w = match kind {
        Difference::H(tau) => Complex64::from_polar(1.0, tau) * z.conj(),
        Difference::Phi(gamma) => Complex64::from_polar(1.0, gamma) * z,
    };
    let (uz, uw) = (potential.u(z), potential.u(w));
    if !uz.is_finite() {
        return Err(HarmonicError::Singular(z));
    }
    if !uw.is_finite() {
        return Err(HarmonicError::Singular(w));
    }
    Ok(uz - uw + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoneyReport {
    pub status: Verdict,
    /// `max_{B(1,eps)} |u0|` on the grid.
    #[serde(with = "crate::decimal::scalar")]
    pub lhs: f64,
    /// `3^4 3^{96 eps/eta} phi_{eta,b}(1)`.
    #[serde(with = "crate::decimal::scalar")]
    pub rhs: f64,
    pub reason: Option<String>,
}

/// Compares `max_{B(1,eps)} |u0|` with `3^4 3^{96 eps/eta} phi_{eta,b}(1)`.
///
/// The comparison only applies when `u` has no zeros in `B(1, 8 eps)` and is
/// `b`-decreasing there; otherwise the verdict is `Inapplicable`.
pub fn money_check(
    poly: &PgfPoly,
    eps: f64,
    eta: f64,
    b: f64,
    grid: (usize, usize),
) -> Result<MoneyReport, HarmonicError> {
    check_money_params(eps, eta, b, grid)?;
    if poly.degree() == 0 {
        return Ok(MoneyReport { status: Verdict::Pass, lhs: 0.0, rhs: 0.0, reason: None });
    }
    let pot = PgfPotential::new(poly)?;
    let roots = pot.roots().expect("degree >= 1").clone();
    money_core(&pot, &roots, poly.moments().mu, eps, eta, b, grid)
}

pub fn money_check_factored(
    f: &FactoredPgf,
    eps: f64,
    eta: f64,
    b: f64,
    grid: (usize, usize),
) -> Result<MoneyReport, HarmonicError> {
    check_money_params(eps, eta, b, grid)?;
    if f.degree() == 0 {
        return Ok(MoneyReport { status: Verdict::Pass, lhs: 0.0, rhs: 0.0, reason: None });
    }
    let pot = f.potential()?;
    let roots = f.roots(crate::pgf::DEFAULT_ROOT_TOL)?;
    money_core(&pot, &roots, f.moments().mu, eps, eta, b, grid)
}

fn check_money_params(eps: f64, eta: f64, b: f64, grid: (usize, usize)) -> Result<(), HarmonicError> {
    if !(eps > 0.0 && eps < 0.125) {
        return Err(HarmonicError::BadParameter { name: "eps", value: eps });
    }
    if !(eta > 0.0 && eta <= eps) {
        return Err(HarmonicError::BadParameter { name: "eta", value: eta });
    }
    if !(b >= 0.0) {
        return Err(HarmonicError::BadParameter { name: "b", value: b });
    }
    if grid.0 < 8 || grid.1 < 8 {
        return Err(HarmonicError::GridTooSmall { radial: grid.0, angular: grid.1 });
    }
    Ok(())
}

fn money_core<P: Potential>(
    pot: &P,
    roots: &RootSet,
    mu: f64,
    eps: f64,
    eta: f64,
    b: f64,
    grid: (usize, usize),
) -> Result<MoneyReport, HarmonicError> {
    let one = Complex64::new(1.0, 0.0);
    let big = Region::Ball { center: one, radius: 8.0 * eps };
    let dist = roots.distance_to(one);
    if dist <= 8.0 * eps {
        return Ok(MoneyReport {
            status: Verdict::Inapplicable,
            lhs: f64::NAN,
            rhs: f64::NAN,
            reason: Some(format!("a root lies within {dist} of 1, inside B(1, 8 eps)")),
        });
    }
    let bd = b_decreasing_check(pot, b, &GridSpec::new(grid.0, grid.1, big)?);
    if !bd.pass {
        return Ok(MoneyReport {
            status: Verdict::Inapplicable,
            lhs: f64::NAN,
            rhs: f64::NAN,
            reason: Some(format!("u is not {b}-decreasing on B(1, 8 eps): slack {}", bd.min_slack)),
        });
    }
    let small = GridSpec::new(grid.0, grid.1, Region::Ball { center: one, radius: eps })?;
    let lhs = small
        .points()
        .par_iter()
        .map(|&z| (pot.u(z) - mu * z.norm().ln()).abs())
        .reduce(|| 0.0, f64::max);
    let phi = b - pot.u(Complex64::from_polar(1.0, eta));
    let rhs = 81.0 * 3f64.powf(96.0 * eps / eta) * phi;
    let status = if lhs <= rhs * (1.0 + 1e-9) { Verdict::Pass } else { Verdict::Fail };
    Ok(MoneyReport { status, lhs, rhs, reason: None })
}

/// Density of harmonic measure from `z` on the circle `|w - center| = radius`,
/// with respect to arclength: `(r^2 - |z-c|^2) / (2 pi r |z-w|^2)`.
pub fn poisson_density_ball(z: Complex64, w: Complex64, center: Complex64, radius: f64) -> Result<f64, HarmonicError> {
    if !(radius > 0.0) {
        return Err(HarmonicError::BadParameter { name: "radius", value: radius });
    }
    let dz = (z - center).norm();
    if !(dz < radius) {
        return Err(HarmonicError::OutsideBall { z });
    }
    if ((w - center).norm() - radius).abs() > 1e-9 * radius {
        return Err(HarmonicError::NotOnBoundary { w });
    }
    Ok((radius * radius - dz * dz) / (2.0 * PI * radius * (z - w).norm_sqr()))
}

/// Two-sided ratio for a positive harmonic function on `B(z0, 2 eps)`
/// evaluated in `B(z0, eps)`.
pub const HARNACK_BALL_RATIO: f64 = 3.0;

/// `3^{2d/eps + 1}`: ratio bound between two points at distance `d` joined
/// by a segment whose `eps`-neighborhood stays inside the domain.
pub fn harnack_chain_bound(d: f64, eps: f64) -> f64 {
    3f64.powf(2.0 * d / eps + 1.0)
}

/// `7 n log(4/delta)`, the bound on `|u|` over the ends of a thin sector
/// inside a zero-free ball `B(1, delta)`.
pub fn end_bound(n: usize, delta: f64) -> f64 {
    7.0 * n as f64 * (4.0 / delta).ln()
}
