//! Sparse multivariate generating functions, products of nonnegative affine
//! forms (real stable by construction) and their one-dimensional
//! projections `z -> f(z^{v_1}, ..., z^{v_d})`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use thiserror::Error;

use crate::dist::{self, DiscretePmf, DistError};
use crate::numeric::{compensated_sum, normal_cdf};
use crate::pgf::{FactoredPgf, PgfError, PgfPoly, DEFAULT_ROOT_TOL};
use crate::ErrorClass;

const SUM_TOL: f64 = 1e-12;
const RENORM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiError {
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("exponent vector of length {got} in dimension {dim}")]
    DimensionMismatch { dim: usize, got: usize },
    #[error("coefficient {value} for exponents {exponents:?} is negative or not finite")]
    BadCoefficient { exponents: Vec<u32>, value: f64 },
    #[error("coefficients sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("direction vector is zero")]
    ZeroDirection,
    #[error("affine form has no variable term")]
    ConstantForm,
    #[error(transparent)]
    Pgf(#[from] PgfError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

impl MultiError {
    pub fn class(&self) -> ErrorClass {
        match self {
            MultiError::Pgf(e) => e.class(),
            MultiError::Dist(e) => e.class(),
            _ => ErrorClass::Precondition,
        }
    }
}

/// `sum_x P(X = x) z^x` over `x in Z_{>=0}^d`, exponents kept in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPgf {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl MultiPgf {
    /// Merges repeated exponents; sums within 1e-9 of one are renormalized.
    pub fn new(dim: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self, MultiError> {
        if dim == 0 {
            return Err(MultiError::ZeroDimension);
        }
        let mut map: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e, c) in terms {
            if e.len() != dim {
                return Err(MultiError::DimensionMismatch { dim, got: e.len() });
            }
            if !(c >= 0.0 && c.is_finite()) {
                return Err(MultiError::BadCoefficient { exponents: e, value: c });
            }
            if c > 0.0 {
                *map.entry(e).or_insert(0.0) += c;
            }
        }
        let total = compensated_sum(map.values().copied());
        if !(total > 0.0) || (total - 1.0).abs() > RENORM_TOL {
            return Err(MultiError::NotNormalized(total));
        }
        if (total - 1.0).abs() > SUM_TOL {
            map.values_mut().for_each(|c| *c /= total);
        }
        Ok(Self { dim, terms: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, f64> {
        &self.terms
    }

    pub fn product(&self, other: &Self) -> Result<Self, MultiError> {
        if self.dim != other.dim {
            return Err(MultiError::DimensionMismatch { dim: self.dim, got: other.dim });
        }
        let mut out: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *out.entry(e).or_insert(0.0) += c1 * c2;
            }
        }
        Self::new(self.dim, out)
    }
}

#[derive(Serialize, Deserialize)]
struct TermWire {
    exponents: Vec<u32>,
    #[serde(with = "crate::decimal::scalar")]
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct MultiWire {
    dim: usize,
    terms: Vec<TermWire>,
}

impl Serialize for MultiPgf {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MultiWire {
            dim: self.dim,
            terms: self.terms.iter().map(|(e, &c)| TermWire { exponents: e.clone(), coeff: c }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MultiPgf {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = MultiWire::deserialize(d)?;
        MultiPgf::new(w.dim, w.terms.into_iter().map(|t| (t.exponents, t.coeff))).map_err(serde::de::Error::custom)
    }
}

/// `v in Z_{>=0}^d`, not all zero. The projection along `v` has no zeros in
/// the sector of half-angle `pi / max v_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct DirectionVector(Vec<u32>);

impl DirectionVector {
    pub fn new(v: Vec<u32>) -> Result<Self, MultiError> {
        if v.iter().all(|&x| x == 0) {
            return Err(MultiError::ZeroDirection);
        }
        Ok(Self(v))
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn max_entry(&self) -> u32 {
        *self.0.iter().max().expect("nonempty")
    }

    pub fn sector_angle(&self) -> f64 {
        PI / self.max_entry() as f64
    }

    pub fn gcd(&self) -> u32 {
        fn g(a: u32, b: u32) -> u32 {
            if b == 0 {
                a
            } else {
                g(b, a % b)
            }
        }
        self.0.iter().fold(0, |acc, &x| g(acc, x))
    }
}

impl TryFrom<Vec<u32>> for DirectionVector {
    type Error = MultiError;
    fn try_from(v: Vec<u32>) -> Result<Self, MultiError> {
        Self::new(v)
    }
}

impl From<DirectionVector> for Vec<u32> {
    fn from(v: DirectionVector) -> Self {
        v.0
    }
}

/// Every `v in {0, ..., max}^d` except 0, in lexicographic order.
pub fn enumerate_directions(dim: usize, max: u32) -> Vec<DirectionVector> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; dim];
    loop {
        let mut i = dim;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < max {
                cur[i] += 1;
                cur[i + 1..].iter_mut().for_each(|x| *x = 0);
                break;
            }
        }
        out.push(DirectionVector(cur.clone()));
    }
}

fn check_direction(dim: usize, v: &DirectionVector) -> Result<(), MultiError> {
    if v.0.len() != dim {
        return Err(MultiError::DimensionMismatch { dim, got: v.0.len() });
    }
    Ok(())
}

/// Generating function of `<v, X>`.
pub fn project(f: &MultiPgf, v: &DirectionVector) -> Result<PgfPoly, MultiError> {
    check_direction(f.dim, v)?;
    let deg = f
        .terms
        .keys()
        .map(|e| e.iter().zip(&v.0).map(|(a, b)| (*a as u64) * (*b as u64)).sum::<u64>())
        .max()
        .unwrap_or(0);
    let mut c = vec![0.0; deg as usize + 1];
    for (e, &p) in &f.terms {
        let k: u64 = e.iter().zip(&v.0).map(|(a, b)| (*a as u64) * (*b as u64)).sum();
        c[k as usize] += p;
    }
    Ok(PgfPoly::normalize(&c)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovStats {
    #[serde(with = "crate::decimal::vec")]
    pub mu: Vec<f64>,
    /// Row-major covariance matrix.
    pub a: Vec<Vec<f64>>,
    /// Largest eigenvalue of `a`.
    #[serde(with = "crate::decimal::scalar")]
    pub sigma2_max: f64,
    #[serde(with = "crate::decimal::scalar")]
    pub min_eigenvalue: f64,
}

impl CovStats {
    fn from_matrix(mu: Vec<f64>, a: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(a.clone()).eigenvalues;
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let d = a.nrows();
        Self {
            mu,
            a: (0..d).map(|i| (0..d).map(|j| a[(i, j)]).collect()).collect(),
            sigma2_max: max.max(0.0),
            min_eigenvalue: min,
        }
    }

    /// `v^T A v`.
    pub fn quadratic(&self, v: &DirectionVector) -> f64 {
        let x: Vec<f64> = v.0.iter().map(|&t| t as f64).collect();
        compensated_sum((0..x.len()).flat_map(|i| (0..x.len()).map(move |j| (i, j))).map(|(i, j)| x[i] * self.a[i][j] * x[j]))
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -1e-10
    }
}

/// Mean vector and covariance by summing over terms, centered first.
pub fn covariance_stats(f: &MultiPgf) -> CovStats {
    let d = f.dim;
    let mu: Vec<f64> = (0..d).map(|i| compensated_sum(f.terms.iter().map(|(e, &p)| p * e[i] as f64))).collect();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = compensated_sum(f.terms.iter().map(|(e, &p)| p * (e[i] as f64 - mu[i]) * (e[j] as f64 - mu[j])));
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    CovStats::from_matrix(mu, a)
}

/// `c0 + sum_i c_i z_i` with nonnegative coefficients and some `c_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineForm {
    #[serde(with = "crate::decimal::scalar")]
    pub c0: f64,
    #[serde(with = "crate::decimal::vec")]
    pub c: Vec<f64>,
}

impl AffineForm {
    pub fn new(c0: f64, c: Vec<f64>) -> Result<Self, MultiError> {
        for (i, &x) in std::iter::once(&c0).chain(&c).enumerate() {
            if !(x >= 0.0 && x.is_finite()) {
                let mut e = vec![0; c.len()];
                if i > 0 {
                    e[i - 1] = 1;
                }
                return Err(MultiError::BadCoefficient { exponents: e, value: x });
            }
        }
        if c.iter().all(|&x| x == 0.0) {
            return Err(MultiError::ConstantForm);
        }
        Ok(Self { c0, c })
    }

    fn total(&self) -> f64 {
        self.c0 + self.c.iter().sum::<f64>()
    }

    /// The normalized form as a generating function: one step that moves
    /// coordinate `i` up by one with probability `c_i / total`.
    pub fn to_multi(&self) -> MultiPgf {
        let d = self.c.len();
        let t = self.total();
        let mut terms = vec![(vec![0; d], self.c0 / t)];
        for (i, &ci) in self.c.iter().enumerate() {
            let mut e = vec![0; d];
            e[i] = 1;
            terms.push((e, ci / t));
        }
        MultiPgf::new(d, terms).expect("normalized by construction")
    }

    fn project(&self, v: &DirectionVector) -> PgfPoly {
        let deg = self.c.iter().zip(&v.0).filter(|(c, _)| **c > 0.0).map(|(_, &k)| k).max().unwrap_or(0);
        let mut out = vec![0.0; deg as usize + 1];
        out[0] = self.c0;
        for (&ci, &k) in self.c.iter().zip(&v.0).filter(|(c, _)| **c > 0.0) {
            out[k as usize] += ci;
        }
        PgfPoly::normalize(&out).expect("nonnegative with positive sum")
    }
}

/// Product of powers of nonnegative affine forms; real stable by
/// construction, so no stability test is ever run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableProduct {
    dim: usize,
    forms: Vec<(AffineForm, usize)>,
}

pub fn stable_product_generator(dim: usize, forms: Vec<(AffineForm, usize)>) -> Result<StableProduct, MultiError> {
    if dim == 0 {
        return Err(MultiError::ZeroDimension);
    }
    for (f, _) in &forms {
        if f.c.len() != dim {
            return Err(MultiError::DimensionMismatch { dim, got: f.c.len() });
        }
    }
    Ok(StableProduct { dim, forms: forms.into_iter().filter(|f| f.1 > 0).collect() })
}

/// `count` random forms in `dim` variables: each linear coefficient is
/// present with probability 0.7 (at least one is), the constant with
/// probability 0.5, values uniform in `(0, 1]`.
pub fn random_stable_product(dim: usize, count: usize, seed: u64) -> Result<StableProduct, MultiError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut forms = Vec::with_capacity(count);
    for _ in 0..count {
        let c0 = if rng.random_bool(0.5) { 1.0 - rng.random::<f64>() } else { 0.0 };
        let mut c: Vec<f64> = (0..dim).map(|_| if rng.random_bool(0.7) { 1.0 - rng.random::<f64>() } else { 0.0 }).collect();
        if c.iter().all(|&x| x == 0.0) {
            let i = rng.random_range(0..dim);
            c[i] = 1.0 - rng.random::<f64>();
        }
        forms.push((AffineForm::new(c0, c)?, 1));
    }
    stable_product_generator(dim, forms)
}

impl StableProduct {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn forms(&self) -> &[(AffineForm, usize)] {
        &self.forms
    }

    pub fn expand(&self) -> MultiPgf {
        let mut acc = MultiPgf::new(self.dim, [(vec![0; self.dim], 1.0)]).expect("point mass");
        for (f, m) in &self.forms {
            let g = f.to_multi();
            for _ in 0..*m {
                acc = acc.product(&g).expect("same dimension");
            }
        }
        acc
    }

    /// Projection along `v`, one factor per form.
    pub fn project(&self, v: &DirectionVector) -> Result<FactoredPgf, MultiError> {
        check_direction(self.dim, v)?;
        Ok(FactoredPgf::new(self.forms.iter().map(|(f, m)| (f.project(v), *m)).collect()))
    }

    /// Sum of the per-form covariances `diag(q) - q q^T`.
    pub fn covariance_stats(&self) -> CovStats {
        let d = self.dim;
        let mut mu = vec![0.0; d];
        let mut a = DMatrix::zeros(d, d);
        for (f, m) in &self.forms {
            let t = f.total();
            let q: Vec<f64> = f.c.iter().map(|c| c / t).collect();
            let m = *m as f64;
            for i in 0..d {
                mu[i] += m * q[i];
                for j in 0..d {
                    a[(i, j)] += m * (if i == j { q[i] } else { 0.0 } - q[i] * q[j]);
                }
            }
        }
        CovStats::from_matrix(mu, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSectorReport {
    pub v: DirectionVector,
    pub pass: bool,
    /// `pi / max v_i`.
    #[serde(with = "crate::decimal::scalar")]
    pub guaranteed: f64,
    /// Smallest `|arg zeta|` over nonzero roots; `pi` when there are none.
    #[serde(with = "crate::decimal::scalar")]
    pub min_arg: f64,
    pub nonzero_roots: usize,
}

/// Passes when every nonzero root of the projection has
/// `|arg zeta| >= pi / max v_i - tol`.
pub fn projection_sector_check(sp: &StableProduct, v: &DirectionVector, tol: f64) -> Result<ProjectionSectorReport, MultiError> {
    let f = sp.project(v)?;
    let guaranteed = v.sector_angle();
    let mut min_arg = PI;
    let mut count = 0;
    if f.degree() > 0 {
        let roots = f.roots(DEFAULT_ROOT_TOL)?;
        for &(z, m) in roots.roots() {
            if z.norm() > 0.0 {
                count += m;
                min_arg = min_arg.min(z.arg().abs());
            }
        }
    }
    Ok(ProjectionSectorReport { v: v.clone(), pass: min_arg >= guaranteed - tol, guaranteed, min_arg, nonzero_roots: count })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub v: DirectionVector,
    /// `v^T A v`.
    #[serde(with = "crate::decimal::scalar")]
    pub variance: f64,
    /// Kolmogorov distance of the standardized projection; absent when the
    /// projection is degenerate.
    #[serde(rename = "D", with = "crate::decimal::option")]
    pub d: Option<f64>,
    pub lattice_gcd: u32,
}

/// Exact law of `<v, X>` and its distance from normal.
pub fn direction_normality(sp: &StableProduct, v: &DirectionVector) -> Result<DirectionReport, MultiError> {
    let f = sp.project(v)?;
    let variance = sp.covariance_stats().quadratic(v);
    let pmf = f.expand().to_pmf();
    let d = match dist::kolmogorov_distance(&pmf) {
        Ok(d) => Some(d),
        Err(DistError::Degenerate) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(DirectionReport { v: v.clone(), variance, d, lattice_gcd: v.gcd() })
}

/// `P(|X - mu| <= x sigma_ref)` for a lattice law, with `sigma_ref` the
/// scale used to standardize (the largest variance direction in the null
/// regime, where the projection's own variance is vanishing).
pub fn standardized_mass_within(pmf: &DiscretePmf, sigma_ref: f64, x: f64) -> f64 {
    let m = pmf.moments();
    let span = pmf.span() as f64;
    compensated_sum(
        pmf.probs()
            .iter()
            .enumerate()
            .filter(|(i, _)| ((*i as f64 * span - m.mu) / sigma_ref).abs() <= x)
            .map(|(_, &p)| p),
    )
}

/// Normal mass `P(|Z| <= x)`, the limit for a non-degenerate direction.
pub fn normal_mass_within(x: f64) -> f64 {
    2.0 * normal_cdf(x) - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_point() -> MultiPgf {
        MultiPgf::new(2, [(vec![1, 0], 0.5), (vec![0, 1], 0.5)]).unwrap()
    }

    fn dv(v: &[u32]) -> DirectionVector {
        DirectionVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project(&two_point(), &dv(&[1, 1])).unwrap().coeffs(), &[0.0, 1.0]);
        let p = project(&two_point(), &dv(&[1, 2])).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 0.5, 0.5]);
        let r = crate::pgf::find_roots(&p, DEFAULT_ROOT_TOL).unwrap();
        let mut roots: Vec<_> = r.flat().iter().map(|z| z.re).collect();
        roots.sort_by(f64::total_cmp);
        assert!((roots[0] + 1.0).abs() < 1e-12 && roots[1] == 0.0);
        assert!(matches!(DirectionVector::new(vec![0, 0]), Err(MultiError::ZeroDirection)));
    }

    #[test]
    fn marginal_projection() {
        let sp = random_stable_product(2, 4, 3).unwrap();
        let f = sp.expand();
        let marginal = project(&f, &dv(&[1, 0])).unwrap();
        let direct = sp.project(&dv(&[1, 0])).unwrap().expand();
        for (a, b) in marginal.coeffs().iter().zip(direct.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn covariance_examples() {
        let c = covariance_stats(&two_point());
        assert_relative_eq!(c.a[0][0], 0.25);
        assert_relative_eq!(c.a[0][1], -0.25);
        assert_relative_eq!(c.sigma2_max, 0.5, max_relative = 1e-14);
        let point = MultiPgf::new(3, [(vec![1, 2, 3], 1.0)]).unwrap();
        let c = covariance_stats(&point);
        assert!(c.a.iter().flatten().all(|&x| x == 0.0));
        assert_eq!(c.sigma2_max, 0.0);
        let bern = AffineForm::new(1.0, vec![1.0, 0.0]).unwrap();
        let bern2 = AffineForm::new(1.0, vec![0.0, 1.0]).unwrap();
        let sp = stable_product_generator(2, vec![(bern, 3), (bern2, 5)]).unwrap();
        let c = covariance_stats(&sp.expand());
        assert!(c.a[0][1].abs() < 1e-15);
        assert_relative_eq!(c.a[0][0], 0.75, max_relative = 1e-14);
        assert_relative_eq!(c.a[1][1], 1.25, max_relative = 1e-14);
        let fast = sp.covariance_stats();
        assert_relative_eq!(fast.a[1][1], 1.25, max_relative = 1e-14);
    }

    #[test]
    fn generator_examples() {
        let f = AffineForm::new(0.0, vec![1.0, 1.0]).unwrap();
        let sp = stable_product_generator(2, vec![(f, 1)]).unwrap();
        assert_eq!(sp.expand(), two_point());
        let pair = stable_product_generator(
            2,
            vec![(AffineForm::new(1.0, vec![1.0, 0.0]).unwrap(), 1), (AffineForm::new(1.0, vec![0.0, 1.0]).unwrap(), 1)],
        )
        .unwrap()
        .expand();
        assert_eq!(pair.terms().len(), 4);
        assert!(pair.terms().values().all(|&c| c == 0.25));
        assert_eq!(random_stable_product(3, 10, 42).unwrap(), random_stable_product(3, 10, 42).unwrap());
        assert!(matches!(AffineForm::new(1.0, vec![0.0, 0.0]), Err(MultiError::ConstantForm)));
    }

    #[test]
    fn sector_check_examples() {
        let sp = stable_product_generator(2, vec![(AffineForm::new(0.0, vec![1.0, 1.0]).unwrap(), 1)]).unwrap();
        let r = projection_sector_check(&sp, &dv(&[1, 2]), 1e-6).unwrap();
        assert!(r.pass && (r.min_arg - PI).abs() < 1e-12 && r.nonzero_roots == 1);
        assert_eq!(r.guaranteed, PI / 2.0);
        let r = projection_sector_check(&sp, &dv(&[1, 1]), 1e-6).unwrap();
        assert!(r.pass && r.nonzero_roots == 0);
    }

    #[test]
    fn variance_identity() {
        let sp = random_stable_product(3, 6, 9).unwrap();
        let cov = covariance_stats(&sp.expand());
        for v in enumerate_directions(3, 2) {
            let m = sp.project(&v).unwrap().expand().moments();
            assert!((m.sigma2 - cov.quadratic(&v)).abs() < 1e-10, "{v:?}");
        }
        assert!(cov.is_psd());
    }

    #[test]
    fn direction_enumeration() {
        let ds = enumerate_directions(2, 3);
        assert_eq!(ds.len(), 15);
        assert_eq!(ds[0].entries(), &[0, 1]);
        assert_eq!(ds[14].entries(), &[3, 3]);
        assert_eq!(dv(&[2, 4, 6]).gcd(), 2);
    }

    #[test]
    fn json_round_trip() {
        let f = random_stable_product(2, 3, 1).unwrap().expand();
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"exponents\""));
        assert_eq!(serde_json::from_str::<MultiPgf>(&s).unwrap().terms().len(), f.terms().len());
        assert!(serde_json::from_str::<DirectionVector>("[0,0]").is_err());
    }
}
