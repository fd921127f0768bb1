use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Label of the no-nudge arm every model must contain.
pub const CONTROL_ARM: &str = "control";

/// Gaussian-Gamma prior shared by all arms:
/// `theta | tau ~ N(mu0, (tau * precision0)^-1)`, `tau ~ Gamma(a0, rate b0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    pub mu0: DVector<f64>,
    pub precision0: DMatrix<f64>,
    pub a0: f64,
    pub b0: f64,
}

impl Prior {
    /// `mu0 = 0`, `precision0 = I`, `a0 = 2`, `b0 = 1`.
    pub fn standard(dim: usize) -> Self {
        Self { mu0: DVector::zeros(dim), precision0: DMatrix::identity(dim, dim), a0: 2.0, b0: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::config("context dimension must be at least 1"));
        }
        if self.precision0.nrows() != d || self.precision0.ncols() != d {
            return Err(Error::config(format!("prior precision must be {d}x{d}")));
        }
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(Error::config(format!("prior shape a0 must be positive, got {}", self.a0)));
        }
        if !(self.b0 > 0.0 && self.b0.is_finite()) {
            return Err(Error::config(format!("prior rate b0 must be positive, got {}", self.b0)));
        }
        if self.mu0.iter().chain(self.precision0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("prior contains non-finite values"));
        }
        check_symmetric(&self.precision0)?;
        factor(&self.precision0)?;
        Ok(())
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::NotPositiveDefinite(format!("asymmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

pub(crate) fn factor(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))
}

/// Posterior of one arm. The Cholesky factor of `precision` is kept in
/// sync so no matrix is ever inverted explicitly.
#[derive(Clone, Debug)]
pub struct ArmPosterior {
    pub label: String,
    pub mu: DVector<f64>,
    pub precision: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
    pub n_obs: u64,
    chol: Cholesky<f64, Dyn>,
}

impl PartialEq for ArmPosterior {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
            && self.mu == other.mu
            && self.precision == other.precision
            && self.a == other.a
            && self.b == other.b
            && self.n_obs == other.n_obs
    }
}

impl ArmPosterior {
    pub(crate) fn from_parts(
        label: String,
        mu: DVector<f64>,
        precision: DMatrix<f64>,
        a: f64,
        b: f64,
        n_obs: u64,
    ) -> Result<Self> {
        check_symmetric(&precision)?;
        let chol = factor(&precision)?;
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::input(format!("arm {label}: a and b must be positive")));
        }
        Ok(Self { label, mu, precision, a, b, n_obs, chol })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Lower-triangular `L` with `precision = L L^T`.
    pub fn cholesky_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `x^T mu`.
    pub fn mean_score(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.mu)
    }

    /// `x^T precision^-1 x`.
    pub fn quad_form_inv(&self, x: &DVector<f64>) -> f64 {
        let mut w = x.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut w);
        // The strict upper part of the stored factor is garbage; only the
        // lower triangle is read by solve_lower_triangular.
        w.norm_squared()
    }

    /// Mean of the noise variance, `b / a`.
    pub fn noise_variance(&self) -> f64 {
        self.b / self.a
    }

    fn apply(&mut self, x: &DVector<f64>, reward: f64) -> Result<()> {
        let resid = reward - self.mean_score(x);
        let leverage = self.quad_form_inv(x);
        let eta = &self.precision * &self.mu + x * reward;
        let precision = &self.precision + x * x.transpose();
        let chol = factor(&precision)?;
        self.mu = chol.solve(&eta);
        self.precision = precision;
        self.chol = chol;
        self.a += 0.5;
        self.b += 0.5 * resid * resid / (1.0 + leverage);
        self.n_obs += 1;
        Ok(())
    }
}

/// K-armed linear bandit with one Gaussian-Gamma posterior per arm.
#[derive(Clone, Debug, PartialEq)]
pub struct BanditModel {
    pub arms: Vec<ArmPosterior>,
    pub prior: Prior,
}

impl BanditModel {
    /// Fresh model; every arm starts at the prior. One label must be
    /// [`CONTROL_ARM`].
    pub fn new<S: AsRef<str>>(labels: &[S], prior: Prior) -> Result<Self> {
        prior.validate()?;
        if labels.len() < 2 {
            return Err(Error::config("a bandit needs at least two arms"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in labels {
            if !seen.insert(l.as_ref()) {
                return Err(Error::config(format!("duplicate arm label {:?}", l.as_ref())));
            }
        }
        if !seen.contains(CONTROL_ARM) {
            return Err(Error::config("one arm must be labelled \"control\""));
        }
        let arms = labels
            .iter()
            .map(|l| {
                ArmPosterior::from_parts(
                    l.as_ref().to_string(),
                    prior.mu0.clone(),
                    prior.precision0.clone(),
                    prior.a0,
                    prior.b0,
                    0,
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self { arms, prior })
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.arms.iter().map(|a| a.label.as_str())
    }

    pub fn arm_index(&self, label: &str) -> Option<usize> {
        self.arms.iter().position(|a| a.label == label)
    }

    pub(crate) fn context(&self, x: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::input(format!("context has {} values, model expects {}", x.len(), self.dim())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("context contains non-finite values"));
        }
        Ok(DVector::from_column_slice(x))
    }

    /// Conjugate update of one arm with an observed `(x, reward)`.
    pub fn update(&mut self, arm: usize, x: &[f64], reward: f64) -> Result<()> {
        let xv = self.context(x)?;
        if !reward.is_finite() {
            return Err(Error::input(format!("non-finite reward {reward}")));
        }
        let n = self.n_arms();
        let posterior = self
            .arms
            .get_mut(arm)
            .ok_or_else(|| Error::input(format!("arm index {arm} out of range (K = {n})")))?;
        posterior.apply(&xv, reward)
    }

    pub fn update_by_label(&mut self, label: &str, x: &[f64], reward: f64) -> Result<()> {
        let arm = self.arm_index(label).ok_or_else(|| Error::input(format!("unknown arm {label:?}")))?;
        self.update(arm, x, reward)
    }
}
