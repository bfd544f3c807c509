#![allow(dead_code)]

use std::io::Write;
use std::time::Duration;

use pgf_clt::constructions::seed_sector_pgf;
use pgf_clt::{FactoredPgf, PgfPoly};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Degree uniform in `min_deg..=max_deg`, coefficients uniform in `(0, 1]`
/// with interior zeros at rate 1/5; the end coefficients are never zero.
pub fn random_pgf(rng: &mut ChaCha8Rng, min_deg: usize, max_deg: usize) -> PgfPoly {
    let d = rng.random_range(min_deg..=max_deg);
    let raw: Vec<f64> = (0..=d)
        .map(|i| {
            let keep = i == 0 || i == d || !rng.random_bool(0.2);
            if keep {
                1.0 - rng.random::<f64>()
            } else {
                0.0
            }
        })
        .collect();
    PgfPoly::normalize(&raw).unwrap()
}

/// Product of `count` seed factors with roots `rho e^{+-i theta}`, some of
/// them composed with `z^k`, every root satisfying `|arg| > delta`.
pub fn seed_product(rng: &mut ChaCha8Rng, delta: f64, count: usize) -> FactoredPgf {
    use std::f64::consts::PI;
    let mut factors = Vec::with_capacity(count);
    for _ in 0..count {
        let rho = 1.0 + 2.0 * rng.random::<f64>();
        let theta = rng.random_range(PI / 2.0..=PI);
        // after z -> z^k the smallest root angle is theta / k
        let kmax = ((theta / delta).ceil() as usize).saturating_sub(1).clamp(1, 3);
        let k = rng.random_range(1..=kmax);
        let m = rng.random_range(1..=3);
        factors.push((seed_sector_pgf(rho, theta).unwrap().substitute_power(k), m));
    }
    FactoredPgf::new(factors)
}

/// One line per acceptance criterion, written past the test harness's
/// output capture so it shows on passing runs too.
pub fn report(id: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("[{tag}] {id:02} {name}: {detail} ({:.2} s)\n", elapsed.as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}
