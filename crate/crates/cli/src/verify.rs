//! Seeded invariant suites for `pgf-clt verify`.

use clap::ValueEnum;
use num_complex::Complex64;
use pgf_clt::clt::esseen_bound;
use pgf_clt::cumulants::{cumulants_from_roots, negcos_extrema, tame_cumulants, CumulantError};
use pgf_clt::dist::{cumulants_from_pmf, kolmogorov_distance};
use pgf_clt::harmonic::weak_positivity_check;
use pgf_clt::multivariate::{enumerate_directions, projection_sector_check, random_stable_product};
use pgf_clt::pgf::{find_roots, PgfPotential, DEFAULT_ROOT_TOL};
use pgf_clt::planar::{sample_containment, Containment};
use pgf_clt::{GridSpec, PgfPoly, Region};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Cumulants from roots against cumulants from the pmf, j <= 8.
    CumulantOracle,
    /// Esseen integral at T = sigma dominates the exact distance.
    Esseen,
    /// u(|z|) >= u(z) on a ball grid.
    WeakPositivity,
    /// Tamed cumulants satisfy |a_2| >= s^{j-2} |a_j|.
    Taming,
    /// Projections of stable products keep their zeros out of the sector.
    ProjectionSector,
    /// Ball, sector and exponential containments near 1.
    Planar,
    /// cos(theta)^j - cos(j theta) dips below -1/2 and exceeds 1/2.
    Negcos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub cases: usize,
    pub failures: usize,
    /// Suite-specific worst value (error, slack or margin).
    #[serde(with = "pgf_clt::decimal::scalar")]
    pub worst: f64,
    pub detail: String,
}

fn random_pgf(rng: &mut ChaCha8Rng, max_deg: usize) -> PgfPoly {
    let d = rng.random_range(1..=max_deg);
    let raw: Vec<f64> = (0..=d).map(|_| 1.0 - rng.random::<f64>()).collect();
    PgfPoly::normalize(&raw).expect("positive coefficients")
}

pub fn run(suite: Suite, seed: u64, cases: usize) -> Result<VerifyReport, CliError> {
    if cases == 0 {
        return Err(CliError::precondition("--cases must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut failures, mut worst) = (0usize, 0.0f64);
    let detail = match suite {
        Suite::CumulantOracle => {
            for _ in 0..cases {
                let p = random_pgf(&mut rng, 30);
                let a = cumulants_from_roots(&find_roots(&p, DEFAULT_ROOT_TOL)?, 8)?;
                let b = cumulants_from_pmf(&p.to_pmf(), 8)?;
                let err = (1..=8)
                    .map(|j| {
                        let s = a.kappa(j).abs().max(b.kappa(j).abs());
                        if s > 0.0 { (a.kappa(j) - b.kappa(j)).abs() / s } else { 0.0 }
                    })
                    .fold(0.0, f64::max);
                worst = worst.max(err);
                failures += (err > 1e-8) as usize;
            }
            "worst relative error, tolerance 1e-8".to_string()
        }
        Suite::Esseen => {
            worst = f64::INFINITY;
            let mut done = 0;
            while done < cases {
                let p = random_pgf(&mut rng, 60);
                let sigma = p.moments().sigma;
                if sigma < 2.0 {
                    continue;
                }
                done += 1;
                let gap = esseen_bound(&p, sigma)?.value - kolmogorov_distance(&p.to_pmf())?;
                worst = worst.min(gap);
                failures += (gap < 0.0) as usize;
            }
            "smallest Esseen bound minus D, sigma >= 2, T = sigma".to_string()
        }
        Suite::WeakPositivity => {
            worst = f64::INFINITY;
            let grid = GridSpec::new(32, 128, Region::Ball { center: Complex64::new(0.0, 0.0), radius: 2.5 })?;
            for _ in 0..cases {
                let p = random_pgf(&mut rng, 30);
                let r = weak_positivity_check(&PgfPotential::new(&p)?, &grid);
                worst = worst.min(r.min_slack);
                failures += (!r.pass) as usize;
            }
            "smallest slack of u(|z|) - u(z) on B(0, 2.5)".to_string()
        }
        Suite::Taming => {
            worst = f64::INFINITY;
            let mut done = 0;
            while done < cases {
                let p = random_pgf(&mut rng, 30);
                let roots = find_roots(&p, DEFAULT_ROOT_TOL)?;
                let r = roots.roots().iter().filter(|(z, _)| z.norm() > 0.0).map(|(z, _)| z.ln().norm()).fold(f64::INFINITY, f64::min);
                let s = 0.49f64.min(0.5 * r) * rng.random_range(0.5..1.0);
                let l = rng.random_range(2..=16);
                let a = cumulants_from_roots(&roots, 32)?;
                match tame_cumulants(&a, s, l) {
                    Ok(t) => {
                        done += 1;
                        let floor = s * 2f64.powi(-6 * (l as i32 + 1));
                        worst = worst.min(t.s_star / floor);
                        failures += (t.s_star <= floor) as usize;
                    }
                    Err(CumulantError::TruncationViolated { .. }) => {}
                    Err(_) => {
                        done += 1;
                        failures += 1;
                    }
                }
            }
            "smallest s* / (s 2^{-6(L+1)})".to_string()
        }
        Suite::ProjectionSector => {
            worst = f64::INFINITY;
            for i in 0..cases {
                let dim = 1 + i % 3;
                let sp = random_stable_product(dim, rng.random_range(1..=8), rng.random())?;
                for v in enumerate_directions(dim, 3) {
                    let r = projection_sector_check(&sp, &v, 1e-6)?;
                    if r.nonzero_roots > 0 {
                        worst = worst.min(r.min_arg - r.guaranteed);
                    }
                    failures += (!r.pass) as usize;
                }
            }
            "smallest |arg zeta| - pi / max v".to_string()
        }
        Suite::Planar => {
            for which in [Containment::BallInSector, Containment::HalfBallInSector, Containment::SectorInBall, Containment::ExpBallInBall] {
                for eps in [0.01, 0.1, 0.4] {
                    let r = sample_containment(which, eps, cases, rng.random());
                    failures += r.violations;
                }
            }
            "violations over 4 containments x 3 eps".to_string()
        }
        Suite::Negcos => {
            worst = f64::INFINITY;
            for j in 3..3 + cases as u32 {
                let e = negcos_extrema(j)?;
                let margin = (-0.5 - e.min_val).min(e.max_val - 0.5);
                worst = worst.min(margin);
                failures += (margin <= 0.0) as usize;
            }
            "smallest margin beyond +-1/2 for j = 3, 4, ...".to_string()
        }
    };
    Ok(VerifyReport { suite, seed, cases, failures, worst, detail })
}
