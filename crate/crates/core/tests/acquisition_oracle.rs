//! Checks closed-form expected improvement against a plain Monte-Carlo
//! estimate and pins down its zero-variance limit.

use ccbo::expected_improvement;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const DRAWS: usize = 100_000;

#[test]
fn closed_form_matches_monte_carlo_within_three_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_250_101);
    for trial in 0..100 {
        let mean = rng.gen_range(-2.0..2.0);
        let variance: f64 = rng.gen_range(1e-4..4.0);
        let sigma = variance.sqrt();
        let best = mean + sigma * rng.gen_range(-3.5..3.5);

        let closed = expected_improvement(mean, variance, best);

        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..DRAWS {
            let z: f64 = StandardNormal.sample(&mut rng);
            let imp = (best - (mean + sigma * z)).max(0.0);
            sum += imp;
            sum_sq += imp * imp;
        }
        let n = DRAWS as f64;
        let mc = sum / n;
        let var_hat = (sum_sq - n * mc * mc) / (n - 1.0);
        let se = (var_hat.max(0.0) / n).sqrt();

        assert!(
            (closed - mc).abs() <= 3.0 * se,
            "trial {trial}: closed {closed}, mc {mc}, se {se}, \
             mean {mean}, variance {variance}, best {best}"
        );
    }
}

#[test]
fn zero_variance_reduces_to_the_plain_gap() {
    assert_eq!(expected_improvement(1.0, 0.0, 3.0), 2.0);
    assert_eq!(expected_improvement(3.0, 0.0, 1.0), 0.0);
    assert_eq!(expected_improvement(1.0, 1e-13, 3.0), 2.0);
    assert_eq!(expected_improvement(-4.0, 0.0, -4.0), 0.0);
}

#[test]
fn improvement_never_goes_negative_under_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10_000 {
        let mean = rng.gen_range(-50.0..50.0);
        let variance = rng.gen_range(0.0..100.0);
        let best = rng.gen_range(-50.0..50.0);
        let ei = expected_improvement(mean, variance, best);
        assert!(ei >= 0.0 && ei.is_finite(), "ei({mean}, {variance}, {best}) = {ei}");
    }
}
