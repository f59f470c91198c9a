//! Empirical Riesz representer checks.
//!
//! The registry promises that under each data-generating process the m1 and
//! m2 moments pair against the analytic nuisances: for every test function h,
//! E{m1(O, h)} = E{-s_ab b(Z) h(Z)} and E{m2(O, h)} = E{-s_ab a(Z) h(Z)}.
//! These tests draw random bounded linear h and verify the sample analogues
//! within central-limit bands.

use mixedbias::{make_functional_aly, Dgp, ZPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Mean and standard error of the mean.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = mixedbias::compensated_sum(values.iter().copied()) / n;
    let ss = mixedbias::compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

/// Ten random bounded linear maps on a z of the given arity, coefficients
/// uniform on [-2, 2].
fn random_linear_maps(arity: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..10)
        .map(|_| (0..=arity).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect()
}

fn eval_affine(coeffs: &[f64], z: &ZPoint) -> f64 {
    let mut acc = coeffs[0];
    for (k, c) in coeffs[1..].iter().enumerate() {
        acc += c * z[k];
    }
    acc
}

#[test]
fn cf_mean_m1_pairs_with_true_b() {
    let dgp = Dgp::cf_mean(0.5, 1.0).unwrap();
    let dataset = dgp.sample(100_000, 1_905).unwrap();
    let functional = make_functional_aly(dgp.functional_kind(), "a", "l", "y");
    let (_, true_b) = dgp.true_nuisances();

    for coeffs in random_linear_maps(functional.z_arity(), 8_861) {
        let h = |z: &ZPoint| eval_affine(&coeffs, z);
        let diffs: Vec<f64> = dataset
            .rows()
            .map(|obs| {
                let z = functional.extract_z(&obs).unwrap();
                let lhs = functional.m1(&obs, &h).unwrap();
                lhs - true_b.eval(&z).unwrap() * h(&z)
            })
            .collect();
        let (mean, se) = mean_and_se(&diffs);
        assert!(
            mean.abs() <= 4.0 * se,
            "m1 representer mismatch for h = {coeffs:?}: mean {mean:.3e}, se {se:.3e}"
        );
    }
}

#[test]
fn m1_and_m2_pair_with_analytic_nuisances_for_both_processes() {
    let processes = [Dgp::cf_mean(0.5, 1.0).unwrap(), Dgp::ecc(1.0, 0.25).unwrap()];
    for (which, dgp) in processes.iter().enumerate() {
        let dataset = dgp.sample(100_000, 40_111 + which as u64).unwrap();
        let functional = make_functional_aly(dgp.functional_kind(), "a", "l", "y");
        let (true_a, true_b) = dgp.true_nuisances();

        for coeffs in random_linear_maps(functional.z_arity(), 7_207 + which as u64) {
            let h = |z: &ZPoint| eval_affine(&coeffs, z);
            let mut m1_diffs = Vec::with_capacity(dataset.n());
            let mut m2_diffs = Vec::with_capacity(dataset.n());
            for obs in dataset.rows() {
                let z = functional.extract_z(&obs).unwrap();
                let pairing = -functional.s_ab(&obs).unwrap() * h(&z);
                m1_diffs.push(functional.m1(&obs, &h).unwrap() - true_b.eval(&z).unwrap() * pairing);
                m2_diffs.push(functional.m2(&obs, &h).unwrap() - true_a.eval(&z).unwrap() * pairing);
            }
            let (m1_mean, m1_se) = mean_and_se(&m1_diffs);
            let (m2_mean, m2_se) = mean_and_se(&m2_diffs);
            assert!(
                m1_mean.abs() <= 4.0 * m1_se,
                "{}: m1 pairing for h = {coeffs:?}: mean {m1_mean:.3e}, se {m1_se:.3e}",
                functional.name()
            );
            assert!(
                m2_mean.abs() <= 4.0 * m2_se,
                "{}: m2 pairing for h = {coeffs:?}: mean {m2_mean:.3e}, se {m2_se:.3e}",
                functional.name()
            );
        }
    }
}
