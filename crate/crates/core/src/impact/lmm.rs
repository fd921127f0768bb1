//! Random-intercept linear mixed model
//! `y_it = x_it^T beta + u_i + e_it`, `u_i ~ N(0, s_u^2)`, `e_it ~ N(0, s_e^2)`,
//! fitted by profiling the variance ratio `gamma = s_u^2 / s_e^2`.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::groups::Group;
use super::stats::normal_quantile;
use crate::error::{Error, Result};
use crate::traits::{ArmLabel, UserId};

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

/// Long-format data: one row per (user, period).
#[derive(Clone, Debug, PartialEq)]
pub struct LmmDesign {
    pub users: Vec<UserId>,
    pub y: Vec<f64>,
    pub columns: Vec<Column>,
}

impl LmmDesign {
    pub fn new(users: Vec<UserId>, y: Vec<f64>) -> Result<Self> {
        if users.len() != y.len() {
            return Err(Error::input("users and responses differ in length"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("response contains non-finite values"));
        }
        Ok(Self { users, y, columns: Vec::new() })
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.y.len() {
            return Err(Error::input(format!("column {name} has {} rows, expected {}", values.len(), self.y.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("column {name} contains non-finite values")));
        }
        if self.columns.iter().any(|c| c.name == name) {
            return Err(Error::input(format!("duplicate column {name}")));
        }
        self.columns.push(Column { name, values });
        Ok(())
    }

    /// Keeps the named columns, in the order given.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|n| {
                self.columns
                    .iter()
                    .find(|c| c.name == n.as_ref())
                    .cloned()
                    .ok_or_else(|| Error::input(format!("unknown term {:?}", n.as_ref())))
            })
            .collect::<Result<_>>()?;
        Ok(Self { users: self.users.clone(), y: self.y.clone(), columns })
    }

    pub fn without(&self, name: &str) -> Self {
        let mut d = self.clone();
        d.columns.retain(|c| c.name != name);
        d
    }
}

/// One user-week of the weekly panel.
#[derive(Clone, Debug, PartialEq)]
pub struct WeeklyObservation {
    pub user: UserId,
    /// 1-based.
    pub week: u32,
    pub y: f64,
    pub baseline: f64,
    pub group: Group,
    /// Arm of the nudge sent in this week, if any.
    pub nudged: Option<ArmLabel>,
}

/// Fixed-effect terms of the weekly model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Intercept,
    /// Member of the adaptive intervention.
    Adaptive,
    Nudged,
    NudgedArm(ArmLabel),
    Baseline,
    Week,
    /// Week number times the adaptive indicator.
    WeekInIntervention,
    WeekInGroup(Group),
}

impl Term {
    pub fn label(&self) -> String {
        match self {
            Term::Intercept => "Intercept".into(),
            Term::Adaptive => "Adaptive intervention".into(),
            Term::Nudged => "Nudged that week".into(),
            Term::NudgedArm(a) => format!("Nudged that week ({})", a.as_str()),
            Term::Baseline => "Baseline expenditure".into(),
            Term::Week => "Week number".into(),
            Term::WeekInIntervention => "Week number in intervention".into(),
            Term::WeekInGroup(Group::NonAdaptive) => "Week number in non adaptive".into(),
            Term::WeekInGroup(g) => format!("Week number in {}", g.as_str().replace('_', " ")),
        }
    }

    pub fn value(&self, o: &WeeklyObservation) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        let week = o.week as f64;
        match self {
            Term::Intercept => 1.0,
            Term::Adaptive => ind(o.group == Group::Adaptive),
            Term::Nudged => ind(o.nudged.is_some_and(ArmLabel::is_nudge)),
            Term::NudgedArm(a) => ind(o.nudged == Some(*a)),
            Term::Baseline => o.baseline,
            Term::Week => week,
            Term::WeekInIntervention => ind(o.group == Group::Adaptive) * week,
            Term::WeekInGroup(g) => ind(o.group == *g) * week,
        }
    }

    /// Intercept, adaptive, nudged, baseline, week, week x adaptive.
    pub fn standard() -> Vec<Term> {
        vec![Term::Intercept, Term::Adaptive, Term::Nudged, Term::Baseline, Term::Week, Term::WeekInIntervention]
    }

    /// The standard model with one nudge indicator per arm and a week trend
    /// per intervention group.
    pub fn per_arm(arms: &[ArmLabel]) -> Vec<Term> {
        let mut t = vec![Term::Intercept, Term::Adaptive];
        t.extend(arms.iter().filter(|a| a.is_nudge()).map(|&a| Term::NudgedArm(a)));
        t.extend([Term::Baseline, Term::Week, Term::WeekInGroup(Group::NonAdaptive), Term::WeekInGroup(Group::Adaptive)]);
        t
    }
}

impl LmmDesign {
    pub fn from_weekly(obs: &[WeeklyObservation], terms: &[Term]) -> Result<Self> {
        let mut d = Self::new(obs.iter().map(|o| o.user.clone()).collect(), obs.iter().map(|o| o.y).collect())?;
        for t in terms {
            d.push_column(t.label(), obs.iter().map(|o| t.value(o)).collect())?;
        }
        Ok(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmmOptions {
    pub reml: bool,
    pub gamma_max: f64,
    pub tol: f64,
}

impl Default for LmmOptions {
    fn default() -> Self {
        Self { reml: false, gamma_max: 1e3, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub sigma_u2: f64,
    pub sigma_e2: f64,
    pub gamma: f64,
    pub loglik: f64,
    pub converged: bool,
    pub reml: bool,
    pub n_obs: usize,
    pub n_groups: usize,
    /// Best log-likelihood after each evaluation of the profile.
    pub loglik_trace: Vec<f64>,
}

impl LmmFit {
    pub fn index(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn coef(&self, term: &str) -> Option<f64> {
        self.index(term).map(|k| self.coefficients[k])
    }

    pub fn p_value(&self, term: &str) -> Option<f64> {
        self.index(term).map(|k| self.p_values[k])
    }

    /// Wald interval at the given confidence level.
    pub fn conf_int(&self, term: &str, level: f64) -> Option<(f64, f64)> {
        let k = self.index(term)?;
        let z = normal_quantile(0.5 + 0.5 * level);
        let (b, se) = (self.coefficients[k], self.standard_errors[k]);
        Some((b - z * se, b + z * se))
    }
}

/// Sufficient statistics; everything that depends on gamma is a sum over
/// distinct cluster sizes.
struct Stats {
    n: usize,
    p: usize,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    /// cluster size -> (count, sum s s^T, sum s * sy, sum sy^2), with
    /// `s` the column sums of a cluster and `sy` its response sum.
    by_size: BTreeMap<usize, (f64, DMatrix<f64>, DVector<f64>, f64)>,
}

impl Stats {
    fn new(d: &LmmDesign) -> Self {
        let (n, p) = (d.n_obs(), d.columns.len());
        let x = DMatrix::from_fn(n, p, |i, j| d.columns[j].values[i]);
        let y = DVector::from_column_slice(&d.y);
        let mut clusters: BTreeMap<&UserId, (usize, DVector<f64>, f64)> = BTreeMap::new();
        for i in 0..n {
            let e = clusters.entry(&d.users[i]).or_insert_with(|| (0, DVector::zeros(p), 0.0));
            e.0 += 1;
            e.1 += x.row(i).transpose();
            e.2 += d.y[i];
        }
        let mut by_size: BTreeMap<usize, (f64, DMatrix<f64>, DVector<f64>, f64)> = BTreeMap::new();
        for (_, (ni, s, sy)) in clusters {
            let e = by_size.entry(ni).or_insert_with(|| (0.0, DMatrix::zeros(p, p), DVector::zeros(p), 0.0));
            e.0 += 1.0;
            e.1 += &s * s.transpose();
            e.2 += &s * sy;
            e.3 += sy * sy;
        }
        Self { n, p, xtx: x.transpose() * &x, xty: x.transpose() * &y, yty: y.dot(&y), by_size }
    }
}

struct Profile {
    loglik: f64,
    beta: DVector<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    sigma2: f64,
}

fn profile(st: &Stats, gamma: f64, reml: bool) -> Result<Profile> {
    let mut xtwx = st.xtx.clone();
    let mut xtwy = st.xty.clone();
    let mut ytwy = st.yty;
    let mut logdet_v = 0.0;
    for (&ni, (count, sst, ssy, syy)) in &st.by_size {
        let c = gamma / (1.0 + gamma * ni as f64);
        xtwx -= sst * c;
        xtwy -= ssy * c;
        ytwy -= c * syy;
        logdet_v += count * (gamma * ni as f64).ln_1p();
    }
    let (beta, chol, logdet_xtwx) = if st.p == 0 {
        (DVector::zeros(0), None, 0.0)
    } else {
        let chol = Cholesky::new(xtwx).ok_or_else(|| Error::NotPositiveDefinite(format!("GLS normal equations at gamma = {gamma}")))?;
        let beta = chol.solve(&xtwy);
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        (beta, Some(chol), logdet)
    };
    let rss = ytwy - beta.dot(&xtwy);
    let dof = if reml { st.n - st.p } else { st.n } as f64;
    if !(rss > 1e-12 * st.yty.max(1e-300)) {
        return Err(Error::degenerate("the model fits the data exactly"));
    }
    let sigma2 = rss / dof;
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut loglik = -0.5 * dof * ((two_pi * sigma2).ln() + 1.0) - 0.5 * logdet_v;
    if reml {
        loglik -= 0.5 * logdet_xtwx;
    }
    Ok(Profile { loglik, beta, chol, sigma2 })
}

/// Names the first column that is a linear combination of earlier ones,
/// followed by the columns it depends on.
fn check_rank(d: &LmmDesign) -> Result<()> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept: Vec<usize> = Vec::new();
    for (j, col) in d.columns.iter().enumerate() {
        let x = DVector::from_column_slice(&col.values);
        let norm = x.norm();
        let mut r = x.clone();
        for _ in 0..2 {
            for q in &basis {
                r -= q * q.dot(&r);
            }
        }
        if norm == 0.0 || r.norm() <= 1e-9 * norm {
            let mut names = vec![col.name.clone()];
            if norm > 0.0 && !kept.is_empty() {
                let a = DMatrix::from_fn(d.n_obs(), kept.len(), |i, k| d.columns[kept[k]].values[i]);
                if let Some(ch) = Cholesky::new(a.transpose() * &a) {
                    let coef = ch.solve(&(a.transpose() * &x));
                    for (k, &idx) in kept.iter().enumerate() {
                        let scale = DVector::from_column_slice(&d.columns[idx].values).norm();
                        if (coef[k] * scale).abs() > 1e-8 * norm {
                            names.push(d.columns[idx].name.clone());
                        }
                    }
                }
            }
            return Err(Error::RankDeficient(names));
        }
        basis.push(&r / r.norm());
        kept.push(j);
    }
    Ok(())
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Fits the model with every column of `design` as a fixed effect.
pub fn fit_lmm(design: &LmmDesign, opts: &LmmOptions) -> Result<LmmFit> {
    if !(opts.gamma_max > 0.0 && opts.tol > 0.0) {
        return Err(Error::config("gamma_max and tol must be positive"));
    }
    let n_groups = design.users.iter().collect::<std::collections::BTreeSet<_>>().len();
    if n_groups < 2 {
        return Err(Error::degenerate("the mixed model needs at least two users"));
    }
    if design.n_obs() <= design.columns.len() + 1 {
        return Err(Error::degenerate(format!("{} rows for {} terms", design.n_obs(), design.columns.len())));
    }
    check_rank(design)?;
    let st = Stats::new(design);

    let mut trace = Vec::new();
    let mut best: Option<(f64, f64)> = None; // (gamma, loglik)
    let mut eval = |g: f64, trace: &mut Vec<f64>| -> Result<f64> {
        let ll = profile(&st, g, opts.reml)?.loglik;
        if best.is_none_or(|(_, b)| ll > b) {
            best = Some((g, ll));
        }
        trace.push(best.unwrap().1);
        Ok(ll)
    };

    // Coarse log-spaced grid with gamma = 0 first.
    let hi_exp = opts.gamma_max.log10();
    let lo_exp = -6.0f64.min(hi_exp - 1.0);
    let n_grid = 60;
    let mut grid = vec![0.0];
    grid.extend((0..=n_grid).map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / n_grid as f64)));
    let values = grid.iter().map(|&g| eval(g, &mut trace)).collect::<Result<Vec<f64>>>()?;
    let k = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);

    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = eval(c, &mut trace)?;
    let mut fd = eval(d, &mut trace)?;
    let mut converged = false;
    for _ in 0..500 {
        if b - a < opts.tol {
            converged = true;
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = eval(c, &mut trace)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = eval(d, &mut trace)?;
        }
    }
    eval(0.5 * (a + b), &mut trace)?;
    let (gamma, _) = best.expect("profile evaluated");

    let prof = profile(&st, gamma, opts.reml)?;
    let (se, pv): (Vec<f64>, Vec<f64>) = match &prof.chol {
        None => (Vec::new(), Vec::new()),
        Some(ch) => {
            let cov = ch.inverse() * prof.sigma2;
            (0..st.p)
                .map(|j| {
                    let se = cov[(j, j)].max(0.0).sqrt();
                    let z = prof.beta[j] / se;
                    (se, erfc(z.abs() / std::f64::consts::SQRT_2))
                })
                .unzip()
        }
    };
    Ok(LmmFit {
        terms: design.columns.iter().map(|c| c.name.clone()).collect(),
        coefficients: prof.beta.as_slice().to_vec(),
        standard_errors: se,
        p_values: pv,
        sigma_u2: gamma * prof.sigma2,
        sigma_e2: prof.sigma2,
        gamma,
        loglik: prof.loglik,
        converged,
        reml: opts.reml,
        n_obs: st.n,
        n_groups,
        loglik_trace: trace,
    })
}

/// Fits the model restricted to the named terms.
pub fn fit_lmm_terms<S: AsRef<str>>(design: &LmmDesign, terms: &[S], opts: &LmmOptions) -> Result<LmmFit> {
    fit_lmm(&design.select(terms)?, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub full: LmmFit,
    pub fit: LmmFit,
    /// Dropped terms in order of removal.
    pub dropped: Vec<String>,
}

/// Repeatedly drops the term with the largest Wald p-value at or above
/// `alpha` and refits, until every remaining term is significant.
pub fn backward_eliminate(design: &LmmDesign, alpha: f64, opts: &LmmOptions) -> Result<Elimination> {
    super::ttest::check_alpha(alpha)?;
    let full = fit_lmm(design, opts)?;
    let mut current = design.clone();
    let mut fit = full.clone();
    let mut dropped = Vec::new();
    loop {
        let worst = (0..fit.terms.len())
            .filter(|&k| fit.p_values[k] >= alpha)
            .max_by(|&a, &b| fit.p_values[a].total_cmp(&fit.p_values[b]));
        let Some(k) = worst else { break };
        let name = fit.terms[k].clone();
        current = current.without(&name);
        dropped.push(name);
        fit = fit_lmm(&current, opts)?;
    }
    Ok(Elimination { full, fit, dropped })
}
