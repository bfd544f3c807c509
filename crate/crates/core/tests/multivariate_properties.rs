use pgf_clt::multivariate::{
    covariance_stats, direction_normality, enumerate_directions, project, random_stable_product, stable_product_generator,
    standardized_mass_within, AffineForm,
};
use pgf_clt::DirectionVector;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_variance_matches_quadratic_form(dim in 1usize..=3, count in 1usize..=6, seed in any::<u64>()) {
        let sp = random_stable_product(dim, count, seed).unwrap();
        let f = sp.expand();
        let cov = covariance_stats(&f);
        let fast = sp.covariance_stats();
        for v in enumerate_directions(dim, 3) {
            let var = project(&f, &v).unwrap().moments().sigma2;
            prop_assert!((var - cov.quadratic(&v)).abs() < 1e-10);
            prop_assert!((var - fast.quadratic(&v)).abs() < 1e-10);
        }
        prop_assert!(cov.is_psd());
    }
}

#[test]
fn projected_distance_decreases_in_n() {
    let x1 = AffineForm::new(1.0, vec![1.0, 0.0]).unwrap();
    let x2 = AffineForm::new(1.0, vec![0.0, 1.0]).unwrap();
    let family: Vec<_> = [64usize, 256, 1024]
        .iter()
        .map(|&n| stable_product_generator(2, vec![(x1.clone(), n), (x2.clone(), n)]).unwrap())
        .collect();
    for v in enumerate_directions(2, 3) {
        let d: Vec<f64> = family.iter().map(|sp| direction_normality(sp, &v).unwrap().d.unwrap()).collect();
        assert!(d[1] < d[0] && d[2] < d[1], "{:?}: {d:?}", v.entries());
    }
}

#[test]
fn null_direction_concentrates() {
    // X1 + X2 = n for the (z1 + z2)/2 part, so (1, 1) only sees one coin
    let pair = AffineForm::new(0.0, vec![1.0, 1.0]).unwrap();
    let coin = AffineForm::new(1.0, vec![1.0, 0.0]).unwrap();
    let v = DirectionVector::new(vec![1, 1]).unwrap();
    let mut prev = 0.0;
    for n in [16usize, 256, 4096] {
        let sp = stable_product_generator(2, vec![(pair.clone(), n), (coin.clone(), 1)]).unwrap();
        let cov = sp.covariance_stats();
        let pmf = sp.project(&v).unwrap().expand().to_pmf();
        let mass = standardized_mass_within(&pmf, cov.sigma2_max.sqrt(), 0.05);
        assert!(mass >= prev);
        prev = mass;
    }
    assert_eq!(prev, 1.0);
}
