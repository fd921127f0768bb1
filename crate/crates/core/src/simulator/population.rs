//! Synthetic pharmacies and their baseline purchasing.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{replication_stream, SimRng};
use crate::traits::{Day, ItemId, LoginEvent, PurchaseEvent, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormalParams {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Per-user multiplier on the purchase rate.
    pub baseline_spend: LogNormalParams,
    /// Chance that buying an item also brings its partner into the basket.
    /// Items are partnered in consecutive pairs (0, 1), (2, 3), ...
    pub pair_affinity: f64,
    /// Expected order lines per user per week before the spend multiplier.
    pub weekly_purchase_rate: f64,
    /// Expected units per order line, at least 1.
    pub units_per_line: f64,
    /// Daily login probability.
    pub login_rate: f64,
    pub mean_session_seconds: f64,
    /// Per-item, per-week chance of being out of stock.
    pub stockout_probability: f64,
    pub min_price: f64,
    pub max_price: f64,
    /// Gamma shape of each user's item preference weights. Small values make
    /// preferences concentrated, so every user has items they rarely buy.
    pub preference_shape: f64,
    /// Days of purchase history simulated before the experiment starts.
    pub history_days: i64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_items: 20,
            baseline_spend: LogNormalParams { mu: 0.0, sigma: 0.5 },
            pair_affinity: 0.3,
            weekly_purchase_rate: 4.0,
            units_per_line: 2.0,
            login_rate: 0.6,
            mean_session_seconds: 300.0,
            stockout_probability: 0.05,
            min_price: 5.0,
            max_price: 50.0,
            preference_shape: 0.5,
            history_days: 120,
        }
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be in [0, 1], got {p}")))
    }
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 2 || self.n_items < 2 {
            return Err(Error::config("a population needs at least 2 users and 2 items"));
        }
        let nonneg = [
            ("weekly_purchase_rate", self.weekly_purchase_rate),
            ("mean_session_seconds", self.mean_session_seconds),
            ("baseline_spend.sigma", self.baseline_spend.sigma),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config(format!("{name} must be a finite non-negative number")));
            }
        }
        if !self.baseline_spend.mu.is_finite() {
            return Err(Error::config("baseline_spend.mu must be finite"));
        }
        if !(self.units_per_line >= 1.0) {
            return Err(Error::config("units_per_line must be at least 1"));
        }
        probability("pair_affinity", self.pair_affinity)?;
        probability("login_rate", self.login_rate)?;
        probability("stockout_probability", self.stockout_probability)?;
        if !(self.min_price > 0.0 && self.max_price >= self.min_price && self.max_price.is_finite()) {
            return Err(Error::config("prices need 0 < min_price <= max_price"));
        }
        if !(self.preference_shape > 0.0) {
            return Err(Error::config("preference_shape must be positive"));
        }
        if self.history_days < 1 {
            return Err(Error::config("history_days must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SimUser {
    pub id: UserId,
    pub spend_rate: f64,
    pub preferences: Vec<f64>,
    sampler: Option<WeightedIndex<f64>>,
}

#[derive(Clone, Debug)]
pub struct SimItem {
    pub id: ItemId,
    pub price: f64,
}

/// A sampled population. Baseline behavior on each day is drawn from a
/// stream keyed by `(seed, day)`, so it does not depend on what the
/// experiment does.
#[derive(Clone, Debug)]
pub struct Population {
    pub spec: PopulationSpec,
    pub users: Vec<SimUser>,
    pub items: Vec<SimItem>,
}

/// Purchases and logins of one simulated day.
#[derive(Clone, Debug, Default)]
pub struct DayEvents {
    pub purchases: Vec<PurchaseEvent>,
    pub logins: Vec<LoginEvent>,
}

pub fn item_id(k: usize) -> ItemId {
    ItemId::new(format!("item_{k:03}"))
}

pub fn user_id(k: usize) -> UserId {
    UserId::new(format!("pharmacy_{k:04}"))
}

/// Index of the item bought together with `k`; the last item of an odd
/// catalog has none.
pub fn partner(k: usize, n_items: usize) -> Option<usize> {
    let p = k ^ 1;
    (p < n_items).then_some(p)
}

pub fn synth_population<R: Rng + ?Sized>(spec: &PopulationSpec, rng: &mut R) -> Result<Population> {
    spec.validate()?;
    let spend = LogNormal::new(spec.baseline_spend.mu, spec.baseline_spend.sigma)
        .map_err(|e| Error::config(format!("baseline_spend: {e}")))?;
    let prefs = Gamma::new(spec.preference_shape, 1.0).map_err(|e| Error::config(format!("preference_shape: {e}")))?;
    let items: Vec<SimItem> = (0..spec.n_items)
        .map(|k| {
            let price = spec.min_price + rng.random::<f64>() * (spec.max_price - spec.min_price);
            SimItem { id: item_id(k), price: (price * 100.0).round() / 100.0 }
        })
        .collect();
    let users = (0..spec.n_users)
        .map(|k| {
            let spend_rate = if spec.baseline_spend.sigma == 0.0 { spec.baseline_spend.mu.exp() } else { spend.sample(rng) };
            let mut w: Vec<f64> = (0..spec.n_items).map(|_| prefs.sample(rng)).collect();
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                w.iter_mut().for_each(|x| *x /= total);
            } else {
                w.iter_mut().for_each(|x| *x = 1.0 / spec.n_items as f64);
            }
            let sampler = WeightedIndex::new(&w).ok();
            SimUser { id: user_id(k), spend_rate, preferences: w, sampler }
        })
        .collect();
    Ok(Population { spec: spec.clone(), users, items })
}

impl Population {
    pub fn catalog(&self) -> Vec<ItemId> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }

    pub fn user(&self, id: &UserId) -> Option<&SimUser> {
        self.users.iter().find(|u| &u.id == id)
    }

    /// Basket of one user on one day as per-item unit counts. Lines arrive
    /// as a Poisson process split over items by preference, so items are
    /// independent of each other apart from the partner rule.
    pub fn basket<R: Rng + ?Sized>(&self, user: &SimUser, rng: &mut R) -> Vec<u32> {
        let mut units = vec![0u32; self.items.len()];
        let rate = self.spec.weekly_purchase_rate / 7.0 * user.spend_rate;
        let (Some(sampler), true) = (&user.sampler, rate > 0.0) else { return units };
        let lines = Poisson::new(rate).map(|p| p.sample(rng) as u64).unwrap_or(0);
        let extra = if self.spec.units_per_line > 1.0 { Poisson::new(self.spec.units_per_line - 1.0).ok() } else { None };
        let qty = |rng: &mut R| 1 + extra.as_ref().map_or(0, |p| p.sample(rng) as u32);
        for _ in 0..lines {
            let k = sampler.sample(rng);
            units[k] += qty(rng);
            if let Some(p) = partner(k, self.items.len()) {
                if self.spec.pair_affinity > 0.0 && rng.random::<f64>() < self.spec.pair_affinity {
                    units[p] += qty(rng);
                }
            }
        }
        units
    }

    /// Baseline events of `day`, identical for a given `(seed, day)`.
    pub fn baseline_day(&self, seed: u64, day: Day) -> DayEvents {
        let mut rng: SimRng = replication_stream(seed, "baseline-day", day as u64);
        let session = Exp::new(1.0 / self.spec.mean_session_seconds.max(f64::MIN_POSITIVE)).ok();
        let mut out = DayEvents::default();
        for user in &self.users {
            let units = self.basket(user, &mut rng);
            for (k, &q) in units.iter().enumerate() {
                if q > 0 {
                    let item = &self.items[k];
                    out.purchases
                        .push(PurchaseEvent::new(user.id.clone(), item.id.clone(), day, q, item.price).expect("valid row"));
                }
            }
            if rng.random::<f64>() < self.spec.login_rate {
                let secs = session.as_ref().map_or(0.0, |e| e.sample(&mut rng).round());
                out.logins.push(LoginEvent::new(user.id.clone(), day, secs).expect("valid login"));
            }
        }
        out
    }

    /// In-stock flags for one week.
    pub fn stock(&self, seed: u64, week: u64) -> crate::itempair::StockMap {
        let mut rng: SimRng = replication_stream(seed, "stock", week);
        self.items
            .iter()
            .map(|i| (i.id.clone(), rng.random::<f64>() >= self.spec.stockout_probability))
            .collect()
    }
}
