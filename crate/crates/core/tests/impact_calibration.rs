mod common;

use nudge_core::impact::stats::ks_uniform;
use nudge_core::impact::{power_noncentral_t, welch_t_test};
use nudge_core::rng::substream;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

#[test]
fn welch_hand_example() {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
    let ys = [2.0, 4.0, 6.0, 8.0, 10.0];
    let r = welch_t_test(&xs, &ys, 0.1).unwrap();
    let (t, nu) = common::welch(&xs, &ys);
    // Means 3 and 6, variances 2.5 and 10: t = -3 / sqrt(2.5), nu = 6.25 / 1.0625.
    assert!((t - (-3.0 / 2.5f64.sqrt())).abs() < 1e-12);
    assert!((nu - 6.25 / 1.0625).abs() < 1e-12);
    assert!((r.t_stat - (-1.897)).abs() < 1e-3 && (r.df - 5.88).abs() < 5e-3);
    assert!((r.t_stat - t).abs() < 1e-12 && (r.df - nu).abs() < 1e-12);
    let p = 2.0 * StudentsT::new(0.0, 1.0, nu).unwrap().cdf(t);
    assert!((r.p_value - p).abs() < 1e-9);
}

#[test]
fn null_p_values_are_uniform() {
    let mut rng = substream(5, "null");
    let n = Normal::new(10.0, 3.0).unwrap();
    let ps: Vec<f64> = (0..1000)
        .map(|_| {
            let xs: Vec<f64> = (0..25).map(|_| n.sample(&mut rng)).collect();
            let ys: Vec<f64> = (0..40).map(|_| n.sample(&mut rng)).collect();
            welch_t_test(&xs, &ys, 0.1).unwrap().p_value
        })
        .collect();
    assert!(ks_uniform(&ps).p_value > 0.01);
    let size = ps.iter().filter(|&&p| p < 0.1).count() as f64 / 1000.0;
    assert!((size - 0.10).abs() <= 0.02, "size {size}");
}

#[test]
fn power_at_zero_effect_is_alpha() {
    for nu in [3.0, 8.5, 30.0, 200.0] {
        for alpha in [0.01, 0.05, 0.1] {
            assert!((power_noncentral_t(0.0, nu, alpha) - alpha).abs() < 1e-4, "nu {nu} alpha {alpha}");
        }
    }
}

#[test]
fn power_matches_monte_carlo() {
    let (delta, nu, alpha) = (3.0, 30.0, 0.05);
    let c = StudentsT::new(0.0, 1.0, nu).unwrap().inverse_cdf(1.0 - alpha / 2.0);
    let mut rng = substream(6, "power");
    let chi = ChiSquared::new(nu).unwrap();
    let n = 200_000;
    let hits = (0..n)
        .filter(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let t = (z + delta) / (chi.sample(&mut rng) / nu).sqrt();
            t.abs() > c
        })
        .count();
    let mc = hits as f64 / n as f64;
    let p = power_noncentral_t(delta, nu, alpha);
    assert!((p - mc).abs() < 4.0 * (mc * (1.0 - mc) / n as f64).sqrt() + 1e-4, "{p} vs {mc}");
    assert!((p - 0.84).abs() < 0.02, "{p}");
}

#[test]
fn power_grows_with_effect_size() {
    let grid: Vec<f64> = (0..=20).map(|k| power_noncentral_t(0.25 * k as f64, 12.0, 0.1)).collect();
    assert!(grid.windows(2).all(|w| w[1] > w[0]));
    assert!((power_noncentral_t(-2.0, 12.0, 0.1) - power_noncentral_t(2.0, 12.0, 0.1)).abs() < 1e-9);
}
