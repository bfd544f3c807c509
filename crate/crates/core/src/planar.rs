//! Elementary containments between balls about 1, annular sectors and the
//! exponential map, with a sampling checker.
//!
//! Each predicate returns `None` when the point does not satisfy the
//! hypothesis and otherwise whether the conclusion holds.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Slack for points sitting on a boundary up to rounding, applied to both
/// hypotheses and conclusions.
const EDGE: f64 = 1e-12;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

/// For `eps <= 1/2`: `z in B(1, eps)` implies `1 - eps <= |z| <= 1 + eps`
/// and `|arg z| <= 2 eps`.
pub fn ball_in_sector(eps: f64, z: Complex64) -> Option<bool> {
    if !(eps > 0.0 && eps <= 0.5) || (z - one()).norm() > eps + EDGE {
        return None;
    }
    let r = z.norm();
    Some(r >= 1.0 - eps - EDGE && r <= 1.0 + eps + EDGE && z.arg().abs() <= 2.0 * eps + EDGE)
}

/// For `eps <= 1`: `z in B(1, eps/2)` implies `1/(1+eps) <= |z| <= 1 + eps`
/// and `|arg z| <= eps`.
pub fn half_ball_in_sector(eps: f64, z: Complex64) -> Option<bool> {
    if !(eps > 0.0 && eps <= 1.0) || (z - one()).norm() > eps / 2.0 + EDGE {
        return None;
    }
    let r = z.norm();
    Some(r >= 1.0 / (1.0 + eps) - EDGE && r <= 1.0 + eps + EDGE && z.arg().abs() <= eps + EDGE)
}

/// For `eps <= 1`: `1 - eps <= |z| <= 1 + eps` and `|arg z| <= eps` imply
/// `|z - 1| <= 2 eps`.
pub fn sector_in_ball(eps: f64, z: Complex64) -> Option<bool> {
    if !(eps > 0.0 && eps <= 1.0) {
        return None;
    }
    let r = z.norm();
    if r < 1.0 - eps - EDGE || r > 1.0 + eps + EDGE || z.arg().abs() > eps + EDGE {
        return None;
    }
    Some((z - one()).norm() <= 2.0 * eps + EDGE)
}

/// For `eps < 1/2`: `w in B(0, eps)` implies `e^w in B(1, 2 eps)`.
pub fn exp_ball_in_ball(eps: f64, w: Complex64) -> Option<bool> {
    if !(eps > 0.0 && eps < 0.5) || w.norm() > eps + EDGE {
        return None;
    }
    Some((w.exp() - one()).norm() <= 2.0 * eps + EDGE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    BallInSector,
    HalfBallInSector,
    SectorInBall,
    ExpBallInBall,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleReport {
    pub tested: usize,
    pub violations: usize,
    pub first_violation: Option<(f64, Complex64)>,
}

/// Draws `samples` points uniform in the hypothesis region for the given
/// `eps` (boundary included with positive probability) and counts failures
/// of the conclusion. Returns zero tested points when `eps` is outside the
/// predicate's range.
pub fn sample_containment(which: Containment, eps: f64, samples: usize, seed: u64) -> SampleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SampleReport { tested: 0, violations: 0, first_violation: None };
    for _ in 0..samples {
        // a tenth of the draws land on the boundary
        let edge = rng.random_bool(0.1);
        let frac = if edge { 1.0 } else { rng.random::<f64>().sqrt() };
        let phi = rng.random_range(-PI..PI);
        let (point, verdict) = match which {
            Containment::BallInSector => {
                let z = one() + Complex64::from_polar(eps * frac, phi);
                (z, ball_in_sector(eps, z))
            }
            Containment::HalfBallInSector => {
                let z = one() + Complex64::from_polar(0.5 * eps * frac, phi);
                (z, half_ball_in_sector(eps, z))
            }
            Containment::SectorInBall => {
                let r = if edge { if rng.random_bool(0.5) { 1.0 - eps } else { 1.0 + eps } } else { rng.random_range(1.0 - eps..=1.0 + eps) };
                let t = if edge { eps * phi.signum() } else { rng.random_range(-eps..=eps) };
                let z = Complex64::from_polar(r, t);
                (z, sector_in_ball(eps, z))
            }
            Containment::ExpBallInBall => {
                let w = Complex64::from_polar(eps * frac, phi);
                (w, exp_ball_in_ball(eps, w))
            }
        };
        if let Some(ok) = verdict {
            report.tested += 1;
            if !ok {
                report.violations += 1;
                report.first_violation.get_or_insert((eps, point));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicates_reject_bad_hypotheses() {
        assert_eq!(ball_in_sector(0.6, one()), None);
        assert_eq!(ball_in_sector(0.1, Complex64::new(1.2, 0.0)), None);
        assert_eq!(exp_ball_in_ball(0.5, Complex64::new(0.1, 0.0)), None);
        assert_eq!(sector_in_ball(0.1, Complex64::from_polar(1.0, 0.2)), None);
    }

    #[test]
    fn out_of_range_eps_tests_nothing() {
        assert_eq!(sample_containment(Containment::ExpBallInBall, 0.5, 100, 1).tested, 0);
    }

    #[test]
    fn tight_corners_pass() {
        // arg is largest on the tangent point, |z| extremes on the axis
        let eps: f64 = 0.5;
        let tangent = Complex64::from_polar((1.0 - eps * eps).sqrt(), eps.asin());
        assert_eq!(ball_in_sector(eps, tangent), Some(true));
        assert_eq!(ball_in_sector(eps, Complex64::new(0.5, 0.0)), Some(true));
        assert_eq!(sector_in_ball(1.0, Complex64::from_polar(2.0, 1.0)), Some(true));
        assert_eq!(exp_ball_in_ball(0.49, Complex64::new(0.49, 0.0)), Some(true));
    }

    #[test]
    fn sampled_containments_hold() {
        for (i, which) in [
            Containment::BallInSector,
            Containment::HalfBallInSector,
            Containment::SectorInBall,
            Containment::ExpBallInBall,
        ]
        .into_iter()
        .enumerate()
        {
            for eps in [0.01, 0.1, 0.4] {
                let r = sample_containment(which, eps, 20_000, 7 + i as u64);
                assert!(r.tested > 19_000, "{which:?} {r:?}");
                assert_eq!(r.violations, 0, "{which:?} {r:?}");
            }
        }
    }
}
