//! Distribution functions used by the impact tests.

use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Two-sided tail `P(|T| > |t|)` of a central t with `nu` degrees of freedom.
pub fn t_two_sided_p(t: f64, nu: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(0.5 * nu, 0.5, nu / (nu + t * t)).clamp(0.0, 1.0)
}

pub fn t_cdf(t: f64, nu: f64) -> f64 {
    let tail = 0.5 * t_two_sided_p(t, nu);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

pub fn t_pdf(t: f64, nu: f64) -> f64 {
    (ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * std::f64::consts::PI).ln()
        - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p())
    .exp()
}

/// Quantile of the central t. Safeguarded Newton on the incomplete-beta CDF.
pub fn t_quantile(p: f64, nu: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0 && nu > 0.0, "t_quantile({p}, {nu})");
    if p < 0.5 {
        return -t_quantile(1.0 - p, nu);
    }
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while t_cdf(hi, nu) < p {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = t_cdf(x, nu) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = f / t_pdf(x, nu);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-14 * x.abs().max(1.0) || hi - lo <= 1e-14 * hi {
            return next;
        }
        x = next;
    }
    x
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration by recursive bisection.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
        let (value, err) = whole;
        if err <= tol || depth == 0 {
            return value;
        }
        let m = 0.5 * (a + b);
        let left = gk15(f, a, m);
        let right = gk15(f, m, b);
        rec(f, a, m, left, 0.5 * tol, depth - 1) + rec(f, m, b, right, 0.5 * tol, depth - 1)
    }
    rec(&f, a, b, gk15(&f, a, b), tol, 40)
}

/// CDF of the non-central t with `nu` degrees of freedom and non-centrality
/// `delta`: `E_V[Phi(t sqrt(V/nu) - delta)]` with `V ~ chi-square(nu)`,
/// integrated over `y = ln V`.
pub fn noncentral_t_cdf(t: f64, nu: f64, delta: f64) -> f64 {
    let k = 0.5 * nu;
    let log_norm = -k * std::f64::consts::LN_2 - ln_gamma(k);
    let integrand = |y: f64| {
        let v = y.exp();
        let log_density = k * y - 0.5 * v + log_norm;
        if log_density < -745.0 {
            return 0.0;
        }
        normal_cdf(t * (v / nu).sqrt() - delta) * log_density.exp()
    };
    // Log-density peaks at ln(nu) with curvature nu/2; the left tail is
    // linear with slope nu/2, the right tail doubly exponential.
    let mode = nu.ln();
    let sd = (2.0 / nu).sqrt();
    let lo = mode - 80.0 / k - 10.0 * sd;
    let hi = mode + 12.0 * sd.max(0.3);
    let inner_lo = (mode - 8.0 * sd).max(lo);
    let inner_hi = (mode + 8.0 * sd).min(hi);
    let tol = 1e-9;
    let total = integrate(integrand, lo, inner_lo, tol)
        + integrate(integrand, inner_lo, inner_hi, tol)
        + integrate(integrand, inner_hi, hi, tol);
    total.clamp(0.0, 1.0)
}

/// Asymptotic Kolmogorov tail `Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS test needs non-empty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult { statistic: d, p_value: ks_p(d, na * nb / (na + nb)) }
}

/// One-sample Kolmogorov-Smirnov test against Uniform(0, 1).
pub fn ks_uniform(xs: &[f64]) -> KsResult {
    assert!(!xs.is_empty(), "KS test needs a non-empty sample");
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max);
    KsResult { statistic: d, p_value: ks_p(d, n) }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{ChiSquared, Distribution, StandardNormal};

    #[test]
    fn t_table_values() {
        // Upper critical values from any t table.
        for &(p, nu, q) in &[(0.975, 10.0, 2.228139), (0.95, 5.0, 2.015048), (0.975, 30.0, 2.042272), (0.995, 2.0, 9.924843)] {
            assert!((t_quantile(p, nu) - q).abs() < 1e-5, "{p} {nu}");
            assert!((t_cdf(q, nu) - p).abs() < 1e-6);
        }
        assert!((t_quantile(0.025, 10.0) + 2.228139).abs() < 1e-5);
        assert_eq!(t_two_sided_p(0.0, 7.0), 1.0);
    }

    #[test]
    fn t_quantile_inverts_cdf() {
        for &nu in &[0.5, 1.0, 3.3, 40.0, 5000.0] {
            for &p in &[0.6, 0.9, 0.95, 0.999, 1.0 - 1e-9] {
                let q = t_quantile(p, nu);
                assert!((t_cdf(q, nu) - p).abs() < 1e-10, "nu={nu} p={p}");
            }
        }
    }

    #[test]
    fn normal_values() {
        let p = normal_cdf(1.959963984540054);
        assert!((p - 0.975).abs() < 1e-10, "{p}");
        assert!((normal_quantile(0.95) - 1.6448536269514722).abs() < 1e-9);
    }

    #[test]
    fn noncentral_reduces_to_central() {
        for &nu in &[1.0, 5.0, 30.0, 100.0, 2000.0] {
            for &t in &[-3.0, -0.5, 0.0, 1.0, 2.5] {
                let a = noncentral_t_cdf(t, nu, 0.0);
                assert!((a - t_cdf(t, nu)).abs() < 1e-7, "nu={nu} t={t}: {a}");
            }
        }
    }

    #[test]
    fn noncentral_matches_monte_carlo() {
        let mut rng = crate::rng::substream(11, "nct");
        let (nu, delta, t): (f64, f64, f64) = (8.0, 1.5, 2.0);
        let chi = ChiSquared::new(nu).unwrap();
        let n = 400_000;
        let below = (0..n)
            .filter(|_| {
                let z: f64 = rng.sample(StandardNormal);
                let v: f64 = chi.sample(&mut rng);
                (z + delta) / (v / nu).sqrt() <= t
            })
            .count();
        let mc = below as f64 / n as f64;
        assert!((noncentral_t_cdf(t, nu, delta) - mc).abs() < 0.003);
    }

    #[test]
    fn integrate_polynomial_and_gaussian() {
        assert!((integrate(|x| x * x, 0.0, 3.0, 1e-12) - 9.0).abs() < 1e-12);
        let g = integrate(|x| (-0.5 * x * x).exp(), -10.0, 10.0, 1e-12);
        assert!((g - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn ks_detects_shift_and_accepts_same() {
        let mut rng = crate::rng::substream(2, "ks");
        let a: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let c: Vec<f64> = b.iter().map(|x| x + 0.1).collect();
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
        assert!(ks_two_sample(&a, &c).p_value < 1e-6);
        assert!(ks_uniform(&a).p_value > 0.01);
        let squashed: Vec<f64> = a.iter().map(|x| x * x).collect();
        assert!(ks_uniform(&squashed).p_value < 1e-6);
    }

    #[test]
    fn ks_statistic_by_hand() {
        // ECDFs of {1,2,3} and {2.5}: largest gap 2/3 at x = 2.
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5]);
        assert!((r.statistic - 2.0 / 3.0).abs() < 1e-12);
        let u = ks_uniform(&[0.5]);
        assert!((u.statistic - 0.5).abs() < 1e-12);
    }
}
