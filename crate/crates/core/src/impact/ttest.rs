use serde::{Deserialize, Serialize};

use super::stats::{mean, noncentral_t_cdf, sample_variance, t_quantile, t_two_sided_p};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Present only when significant.
    pub effect_size: Option<f64>,
    /// Present only when significant.
    pub power: Option<f64>,
    pub mean_diff: f64,
    pub std_err: f64,
    /// `1 - alpha` interval for the difference in means.
    pub ci_low: f64,
    pub ci_high: f64,
}

struct Moments {
    diff: f64,
    se: f64,
    df: f64,
}

fn moments(xs: &[f64], ys: &[f64]) -> Result<Moments> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::degenerate(format!("t-test needs at least 2 values per group, got {} and {}", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::input("t-test sample contains non-finite values"));
    }
    let (nt, nc) = (xs.len() as f64, ys.len() as f64);
    let at = sample_variance(xs) / nt;
    let ac = sample_variance(ys) / nc;
    let se2 = at + ac;
    if se2 <= 0.0 {
        return Err(Error::degenerate("both samples have zero variance"));
    }
    let df = se2 * se2 / (at * at / (nt - 1.0) + ac * ac / (nc - 1.0));
    Ok(Moments { diff: mean(xs) - mean(ys), se: se2.sqrt(), df })
}

/// Welch unequal-variance t-test of `xs` (treatment) against `ys` (control).
pub fn welch_t_test(xs: &[f64], ys: &[f64], alpha: f64) -> Result<TTestResult> {
    check_alpha(alpha)?;
    let m = moments(xs, ys)?;
    let t = m.diff / m.se;
    let p = t_two_sided_p(t, m.df);
    let significant = p < alpha;
    let half = t_quantile(1.0 - alpha / 2.0, m.df) * m.se;
    // The effect size's "pooled" sd is the standard error, so d equals t.
    let (effect_size, power) = if significant {
        (Some(t), Some(power_noncentral_t(t, m.df, alpha)))
    } else {
        (None, None)
    };
    Ok(TTestResult {
        t_stat: t,
        df: m.df,
        p_value: p,
        significant,
        effect_size,
        power,
        mean_diff: m.diff,
        std_err: m.se,
        ci_low: m.diff - half,
        ci_high: m.diff + half,
    })
}

/// `(mu_t - mu_c) / sqrt(var_t/n_t + var_c/n_c)`.
pub fn cohens_d(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let m = moments(xs, ys)?;
    Ok(m.diff / m.se)
}

/// Two-sided power `P(T > c) + P(T < -c)` with `T ~ t'(nu, delta)` and `c`
/// the upper `alpha/2` critical value of the central t.
pub fn power_noncentral_t(delta: f64, nu: f64, alpha: f64) -> f64 {
    let c = t_quantile(1.0 - alpha / 2.0, nu);
    let upper = 1.0 - noncentral_t_cdf(c, nu, delta);
    let lower = noncentral_t_cdf(-c, nu, delta);
    (upper + lower).clamp(0.0, 1.0)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("alpha must be in (0, 1), got {alpha}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_samples() {
        let xs = [1.0, 3.0, 4.0, 8.0];
        let r = welch_t_test(&xs, &xs, 0.1).unwrap();
        assert_eq!(r.t_stat, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.significant && r.effect_size.is_none() && r.power.is_none());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0], 0.1).is_err());
        assert!(welch_t_test(&[2.0, 2.0], &[5.0, 5.0, 5.0], 0.1).unwrap_err().is_analysis_infeasible());
        assert!(cohens_d(&[2.0, 2.0], &[2.0, 2.0]).is_err());
        assert!(welch_t_test(&[1.0, 2.0], &[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn large_shift_is_highly_significant() {
        let xs: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let sd = sample_variance(&xs).sqrt();
        let ys: Vec<f64> = xs.iter().map(|x| x + 10.0 * sd).collect();
        let r = welch_t_test(&ys, &xs, 0.1).unwrap();
        assert!(r.p_value < 1e-6);
        assert_eq!(r.effect_size, Some(r.t_stat));
        assert!(r.power.unwrap() > 0.999);
    }

    #[test]
    fn cohens_d_scaling() {
        let xs = [1.0, 2.5, 3.0, 7.0];
        let ys = [0.0, 1.0, 1.5];
        let d = cohens_d(&xs, &ys).unwrap();
        let sx: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
        let sy: Vec<f64> = ys.iter().map(|x| 3.0 * x).collect();
        assert!((cohens_d(&sx, &sy).unwrap() - d).abs() < 1e-12);
        let only_x: Vec<f64> = xs.iter().map(|x| 3.0 * x).collect();
        assert!((cohens_d(&only_x, &ys).unwrap() - d).abs() > 1e-3);
    }

    #[test]
    fn power_null_is_size() {
        for &nu in &[5.0, 30.0, 100.0] {
            for &alpha in &[0.05, 0.1] {
                assert!((power_noncentral_t(0.0, nu, alpha) - alpha).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn power_monotone_in_delta() {
        let grid: Vec<f64> = (0..=24).map(|k| 0.25 * k as f64).collect();
        let powers: Vec<f64> = grid.iter().map(|&d| power_noncentral_t(d, 12.0, 0.1)).collect();
        assert!(powers.windows(2).all(|w| w[1] > w[0]));
        assert!((power_noncentral_t(-2.0, 12.0, 0.1) - power_noncentral_t(2.0, 12.0, 0.1)).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn df_bounds_and_antisymmetry(
            xs in proptest::collection::vec(-50.0f64..50.0, 2..30),
            ys in proptest::collection::vec(-50.0f64..50.0, 2..30),
        ) {
            prop_assume!(sample_variance(&xs) > 1e-9 || sample_variance(&ys) > 1e-9);
            let r = welch_t_test(&xs, &ys, 0.1).unwrap();
            let (n1, n2) = (xs.len() as f64, ys.len() as f64);
            prop_assert!(r.df >= n1.min(n2) - 1.0 - 1e-9);
            prop_assert!(r.df <= n1 + n2 - 2.0 + 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            let s = welch_t_test(&ys, &xs, 0.1).unwrap();
            prop_assert!((s.t_stat + r.t_stat).abs() < 1e-12);
            prop_assert!((s.p_value - r.p_value).abs() < 1e-12);
            prop_assert!(r.ci_low <= r.mean_diff && r.mean_diff <= r.ci_high);
        }
    }
}
