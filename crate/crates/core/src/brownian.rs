//! Walk-on-spheres estimates of where planar Brownian motion leaves
//! rectangles, truncated sectors and balls.
//!
//! Samples are split into fixed chunks; chunk `c` draws from the ChaCha
//! stream `c` of the user seed, so estimates do not depend on the number of
//! worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::harmonic::SectorSpec;
use crate::pgf::Potential;
use crate::ErrorClass;

const CHUNK: u64 = 2048;
/// `log(4/3)`, the per-box decay rate of the crossing bounds.
pub const CROSSING_RATE: f64 = 0.287_682_072_451_780_9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrownianError {
    #[error("start point {0} is not strictly inside the domain")]
    StartOutside(Complex64),
    #[error("parameter {name} = {value} is out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("sample count must be positive")]
    NoSamples,
}

impl BrownianError {
    pub fn class(&self) -> ErrorClass {
        ErrorClass::Precondition
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectangleSpec {
    /// `b` in `{|Re z| < b, |Im z| < delta}`.
    pub half_width: f64,
    pub half_height: f64,
}

impl RectangleSpec {
    pub fn new(half_width: f64, half_height: f64) -> Result<Self, BrownianError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(BrownianError::BadParameter { name: "half_width", value: half_width });
        }
        if !(half_height > 0.0 && half_height.is_finite()) {
            return Err(BrownianError::BadParameter { name: "half_height", value: half_height });
        }
        Ok(Self { half_width, half_height })
    }

    fn contains_strictly(&self, z: Complex64) -> bool {
        z.re.abs() < self.half_width && z.im.abs() < self.half_height
    }

    fn diameter(&self) -> f64 {
        2.0 * self.half_width.hypot(self.half_height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WosConfig {
    /// Absorption shell as a fraction of the domain's length scale: the
    /// diameter for rectangles and balls, `|z|` for the direct sector walk.
    pub epsilon_abs: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl WosConfig {
    pub fn new(seed: u64) -> Self {
        Self { epsilon_abs: 1e-5, max_steps: 100_000, seed }
    }

    fn validate(&self) -> Result<(), BrownianError> {
        if !(self.epsilon_abs > 0.0 && self.epsilon_abs < 1.0) {
            return Err(BrownianError::BadParameter { name: "epsilon_abs", value: self.epsilon_abs });
        }
        if self.max_steps == 0 {
            return Err(BrownianError::BadParameter { name: "max_steps", value: 0.0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitEstimate {
    #[serde(with = "crate::decimal::scalar")]
    pub p_hat: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Paths still outside the shell after `max_steps`; they are assigned to
    /// the nearest boundary piece like the others.
    pub unabsorbed: u64,
}

impl ExitEstimate {
    fn from_counts(hits: u64, n: u64, seed: u64, unabsorbed: u64) -> Self {
        let p = hits as f64 / n as f64;
        Self { p_hat: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), n_samples: n, seed, unabsorbed }
    }
}

/// Distance to the boundary and whether the nearest boundary piece is a
/// target piece.
trait Domain: Sync {
    fn nearest(&self, z: Complex64) -> (f64, bool);
    fn shell(&self, z: Complex64) -> f64;
}

struct Walk {
    exit: Complex64,
    target: bool,
    absorbed: bool,
}

fn walk<D: Domain, R: Rng>(d: &D, start: Complex64, max_steps: usize, rng: &mut R) -> Walk {
    let mut z = start;
    for _ in 0..max_steps {
        let (dist, target) = d.nearest(z);
        if dist <= d.shell(z) {
            return Walk { exit: z, target, absorbed: true };
        }
        let phi = rng.random::<f64>() * 2.0 * PI;
        z += Complex64::from_polar(dist, phi);
    }
    let (_, target) = d.nearest(z);
    Walk { exit: z, target, absorbed: false }
}

/// Runs `n` walks in deterministic chunks and folds each chunk with `f`.
fn run_chunks<D: Domain, T: Send, F>(d: &D, start: Complex64, cfg: &WosConfig, n: u64, f: F) -> Vec<T>
where
    F: Fn(&mut dyn Iterator<Item = Walk>) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c);
            let len = CHUNK.min(n - c * CHUNK);
            let mut it = (0..len).map(|_| walk(d, start, cfg.max_steps, &mut rng));
            f(&mut it)
        })
        .collect()
}

fn exit_estimate<D: Domain>(d: &D, start: Complex64, cfg: &WosConfig, n: u64) -> ExitEstimate {
    let counts = run_chunks(d, start, cfg, n, |it| {
        let (mut hits, mut stuck) = (0u64, 0u64);
        for w in it {
            hits += w.target as u64;
            stuck += (!w.absorbed) as u64;
        }
        (hits, stuck)
    });
    let (hits, stuck) = counts.iter().fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
    ExitEstimate::from_counts(hits, n, cfg.seed, stuck)
}

struct RectDomain {
    q: RectangleSpec,
    shell: f64,
}

impl Domain for RectDomain {
    fn nearest(&self, z: Complex64) -> (f64, bool) {
        let to_end = self.q.half_width - z.re.abs();
        let to_side = self.q.half_height - z.im.abs();
        if to_end <= to_side {
            (to_end, true)
        } else {
            (to_side, false)
        }
    }

    fn shell(&self, _z: Complex64) -> f64 {
        self.shell
    }
}

/// `P(B_tau in {|Re z| = b})` for Brownian motion from `start` stopped on
/// the boundary of the rectangle.
pub fn estimate_exit_rectangle(
    start: Complex64,
    q: RectangleSpec,
    cfg: &WosConfig,
    n: u64,
) -> Result<ExitEstimate, BrownianError> {
    cfg.validate()?;
    if n == 0 {
        return Err(BrownianError::NoSamples);
    }
    if !q.contains_strictly(start) {
        return Err(BrownianError::StartOutside(start));
    }
    let d = RectDomain { q, shell: cfg.epsilon_abs * q.diameter() };
    Ok(exit_estimate(&d, start, cfg, n))
}

/// Probability that Brownian motion from `iy` leaves the square
/// `{|Re z| <= delta, |Im z| <= delta}` through its left or right edge.
/// A start on the top or bottom edge leaves there at once.
pub fn estimate_square_crossing(y: f64, delta: f64, cfg: &WosConfig, n: u64) -> Result<ExitEstimate, BrownianError> {
    if !(delta > 0.0) || y.abs() > delta {
        return Err(BrownianError::BadParameter { name: "y", value: y });
    }
    if y.abs() == delta {
        cfg.validate()?;
        return Ok(ExitEstimate::from_counts(0, n.max(1), cfg.seed, 0));
    }
    estimate_exit_rectangle(Complex64::new(0.0, y), RectangleSpec::new(delta, delta)?, cfg, n)
}

/// `exp(-c floor((b - a)/delta))` with `c = log(4/3)`, for starts with
/// `|Re z| <= a`.
pub fn rectangle_bound(a: f64, q: &RectangleSpec) -> f64 {
    (-CROSSING_RATE * ((q.half_width - a) / q.half_height).floor().max(0.0)).exp()
}

/// `(4/3)(r/R)^{c/delta}` with `c = log(4/3)`, for starts with
/// `|log|z|| <= log r`.
pub fn sector_bound(r: f64, r_outer: f64, delta: f64) -> f64 {
    4.0 / 3.0 * ((r / r_outer).ln() * CROSSING_RATE / delta).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectorRoute {
    /// Walk in the sector itself.
    Direct,
    /// Walk in the rectangle `{|Re w| < log R, |Im w| < delta}` from
    /// `log z`; `e^w` maps it onto the sector.
    Conformal,
}

struct SectorDomain {
    delta: f64,
    r_outer: f64,
    rel_shell: f64,
}

fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let t = ((z - a) * ab.conj()).re / ab.norm_sqr();
    (z - (a + ab * t.clamp(0.0, 1.0))).norm()
}

impl Domain for SectorDomain {
    fn nearest(&self, z: Complex64) -> (f64, bool) {
        let r = z.norm();
        let ends = (self.r_outer - r).min(r - 1.0 / self.r_outer);
        let mut side = f64::INFINITY;
        for s in [self.delta, -self.delta] {
            let u = Complex64::from_polar(1.0, s);
            side = side.min(segment_distance(z, u / self.r_outer, u * self.r_outer));
        }
        if ends <= side {
            (ends, true)
        } else {
            (side, false)
        }
    }

    fn shell(&self, z: Complex64) -> f64 {
        self.rel_shell * z.norm()
    }
}

/// `P(B_tau in {|z| in {1/R, R}})` for Brownian motion from `start` stopped
/// on the boundary of `{|arg z| < delta, 1/R < |z| < R}`.
pub fn estimate_exit_sector(
    start: Complex64,
    sector: &SectorSpec,
    cfg: &WosConfig,
    n: u64,
    route: SectorRoute,
) -> Result<ExitEstimate, BrownianError> {
    cfg.validate()?;
    if n == 0 {
        return Err(BrownianError::NoSamples);
    }
    let delta = sector.beta;
    if !sector.truncated || sector.alpha != -delta || !(delta > 0.0 && delta < PI) {
        return Err(BrownianError::BadParameter { name: "delta", value: delta });
    }
    let r_outer = sector.r_outer;
    let lz = start.ln();
    if !(start.norm() > 0.0 && lz.re.abs() < r_outer.ln() && lz.im.abs() < delta) {
        return Err(BrownianError::StartOutside(start));
    }
    Ok(match route {
        SectorRoute::Direct => {
            let d = SectorDomain { delta, r_outer, rel_shell: cfg.epsilon_abs };
            exit_estimate(&d, start, cfg, n)
        }
        SectorRoute::Conformal => {
            let q = RectangleSpec::new(r_outer.ln(), delta)?;
            let d = RectDomain { q, shell: cfg.epsilon_abs * q.diameter() };
            exit_estimate(&d, lz, cfg, n)
        }
    })
}

struct BallDomain {
    center: Complex64,
    radius: f64,
    shell: f64,
}

impl Domain for BallDomain {
    fn nearest(&self, z: Complex64) -> (f64, bool) {
        (self.radius - (z - self.center).norm(), true)
    }

    fn shell(&self, _z: Complex64) -> f64 {
        self.shell
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanValueReport {
    #[serde(with = "crate::decimal::scalar")]
    pub mc_mean: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub u_start: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub stderr: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub z_score: f64,
    pub pass: bool,
}

/// Compares `u(start)` with the Monte Carlo mean of `u` at the exit point of
/// the ball; exit points are projected radially onto the circle. Passes
/// when `|z_score| <= 4`.
pub fn mean_value_check<P: Potential + ?Sized>(
    potential: &P,
    start: Complex64,
    center: Complex64,
    radius: f64,
    cfg: &WosConfig,
    n: u64,
) -> Result<MeanValueReport, BrownianError> {
    cfg.validate()?;
    if n < 2 {
        return Err(BrownianError::NoSamples);
    }
    if !(radius > 0.0) {
        return Err(BrownianError::BadParameter { name: "radius", value: radius });
    }
    if !((start - center).norm() < radius) {
        return Err(BrownianError::StartOutside(start));
    }
    let d = BallDomain { center, radius, shell: cfg.epsilon_abs * 2.0 * radius };
    let sums = run_chunks(&d, start, cfg, n, |it| {
        let mut s = crate::numeric::CompensatedSum::new();
        let mut s2 = crate::numeric::CompensatedSum::new();
        for w in it {
            let on_circle = center + (w.exit - center) * (radius / (w.exit - center).norm());
            let v = potential.u(on_circle);
            s.add(v);
            s2.add(v * v);
        }
        (s.value(), s2.value())
    });
    let nf = n as f64;
    let sum = crate::numeric::compensated_sum(sums.iter().map(|s| s.0));
    let sum2 = crate::numeric::compensated_sum(sums.iter().map(|s| s.1));
    let mean = sum / nf;
    let var = ((sum2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let stderr = (var / nf).sqrt();
    let u_start = potential.u(start);
    let diff = mean - u_start;
    let z_score = if stderr > 0.0 {
        diff / stderr
    } else if diff.abs() <= 1e-12 * (1.0 + u_start.abs()) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(MeanValueReport { mc_mean: mean, u_start, stderr, z_score, pass: z_score.abs() <= 4.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn square_center_is_fair() {
        let q = RectangleSpec::new(1.0, 1.0).unwrap();
        let e = estimate_exit_rectangle(c(0.0, 0.0), q, &WosConfig::new(11), 20_000).unwrap();
        assert!((e.p_hat - 0.5).abs() <= 3.0 * e.stderr, "{e:?}");
        assert_eq!(e.unabsorbed, 0);
        let expect = (e.p_hat * (1.0 - e.p_hat) / 20_000.0).sqrt();
        assert_eq!(e.stderr, expect);
    }

    #[test]
    fn start_on_shell_is_absorbed() {
        let q = RectangleSpec::new(1.0, 1.0).unwrap();
        let e = estimate_exit_rectangle(c(1.0 - 1e-7, 0.0), q, &WosConfig::new(1), 1000).unwrap();
        assert_eq!(e.p_hat, 1.0);
        assert!(estimate_exit_rectangle(c(1.0, 0.0), q, &WosConfig::new(1), 10).is_err());
        assert!(RectangleSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let q = RectangleSpec::new(2.0, 0.5).unwrap();
        let cfg = WosConfig::new(99);
        let a = estimate_exit_rectangle(c(0.3, 0.1), q, &cfg, 5000).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| estimate_exit_rectangle(c(0.3, 0.1), q, &cfg, 5000).unwrap());
        assert_eq!(a, b);
        let other = estimate_exit_rectangle(c(0.3, 0.1), q, &WosConfig::new(100), 5000).unwrap();
        assert_ne!(a.p_hat, other.p_hat);
    }

    #[test]
    fn long_rectangle_respects_bound() {
        let delta = 0.5;
        let q = RectangleSpec::new(10.0 * delta, delta).unwrap();
        let e = estimate_exit_rectangle(c(0.0, 0.2), q, &WosConfig::new(3), 20_000).unwrap();
        assert!(e.p_hat <= rectangle_bound(0.0, &q) + 3.0 * e.stderr);
        assert!((rectangle_bound(0.0, &q) - 0.75f64.powi(10)).abs() < 1e-15);
    }

    #[test]
    fn sector_routes_agree() {
        let s = SectorSpec::symmetric(PI / 2.0, 4.0).unwrap();
        let cfg = WosConfig::new(5);
        let a = estimate_exit_sector(c(1.0, 0.0), &s, &cfg, 20_000, SectorRoute::Direct).unwrap();
        let b = estimate_exit_sector(c(1.0, 0.0), &s, &cfg, 20_000, SectorRoute::Conformal).unwrap();
        let comb = a.stderr.hypot(b.stderr);
        assert!((a.p_hat - b.p_hat).abs() <= 4.0 * comb, "{a:?} {b:?}");
        assert!(a.p_hat <= sector_bound(1.0, 4.0, PI / 2.0) + 3.0 * a.stderr);
        assert!(estimate_exit_sector(c(-1.0, 0.0), &s, &cfg, 10, SectorRoute::Direct).is_err());
    }

    #[test]
    fn sector_bound_trivial_near_one() {
        assert!(sector_bound(1.0, 1.0 + 1e-9, 0.5) > 1.0);
    }

    #[test]
    fn mean_value_examples() {
        let cfg = WosConfig::new(8);
        let re = |z: Complex64| z.re;
        let r = mean_value_check(&re, c(0.0, 0.0), c(0.0, 0.0), 1.0, &cfg, 10_000).unwrap();
        assert!(r.pass, "{r:?}");
        let bern = |z: Complex64| ((c(1.0, 0.0) + z) / 2.0).norm().ln();
        let r = mean_value_check(&bern, c(1.0, 0.0), c(1.0, 0.0), 0.5, &cfg, 10_000).unwrap();
        assert!(r.pass && r.mc_mean.abs() <= 4.0 * r.stderr, "{r:?}");
        let sq = |z: Complex64| z.norm_sqr();
        let r = mean_value_check(&sq, c(0.0, 0.0), c(0.0, 0.0), 1.0, &cfg, 1000).unwrap();
        assert!(!r.pass);
        assert!((r.mc_mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_crossing_edges() {
        let e = estimate_square_crossing(1.0, 1.0, &WosConfig::new(1), 100).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert!(estimate_square_crossing(1.5, 1.0, &WosConfig::new(1), 100).is_err());
    }

    #[test]
    fn json_round_trip() {
        let e = ExitEstimate::from_counts(3, 10, 7, 0);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<ExitEstimate>(&s).unwrap(), e);
    }
}
