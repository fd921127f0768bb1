//! Behavioral log rows and the indexed logs built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer day index (days since an arbitrary epoch).
pub type Day = i64;

macro_rules! opaque_id {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

opaque_id!(UserId);
opaque_id!(ItemId);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurchaseEvent {
    pub user_id: UserId,
    pub item_id: ItemId,
    pub day: Day,
    pub quantity: u32,
    pub unit_price: f64,
    pub revenue: f64,
}

impl PurchaseEvent {
    /// Builds a row, deriving revenue. Negative or non-finite prices, zero
    /// quantities and negative days are rejected.
    pub fn new(
        user_id: impl Into<UserId>,
        item_id: impl Into<ItemId>,
        day: Day,
        quantity: u32,
        unit_price: f64,
    ) -> Result<Self> {
        if day < 0 {
            return Err(Error::input(format!("negative day {day}")));
        }
        if quantity == 0 {
            return Err(Error::input("quantity must be at least 1"));
        }
        if !unit_price.is_finite() || unit_price < 0.0 {
            return Err(Error::input(format!("invalid unit price {unit_price}")));
        }
        Ok(Self {
            user_id: user_id.into(),
            item_id: item_id.into(),
            day,
            quantity,
            unit_price,
            revenue: f64::from(quantity) * unit_price,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmLabel {
    Control,
    Personalized,
    Random,
}

impl ArmLabel {
    pub const ALL: [ArmLabel; 3] = [ArmLabel::Control, ArmLabel::Personalized, ArmLabel::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            ArmLabel::Control => "control",
            ArmLabel::Personalized => "personalized",
            ArmLabel::Random => "random",
        }
    }

    pub fn is_nudge(self) -> bool {
        self != ArmLabel::Control
    }
}

impl fmt::Display for ArmLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArmLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "control" => Ok(ArmLabel::Control),
            "personalized" => Ok(ArmLabel::Personalized),
            "random" => Ok(ArmLabel::Random),
            other => Err(Error::input(format!("unknown arm label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    Opened,
    Closed,
    Ignored,
}

impl Interaction {
    pub const ALL: [Interaction; 3] = [Interaction::Opened, Interaction::Closed, Interaction::Ignored];

    pub fn as_str(self) -> &'static str {
        match self {
            Interaction::Opened => "opened",
            Interaction::Closed => "closed",
            Interaction::Ignored => "ignored",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Interaction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "opened" => Ok(Interaction::Opened),
            "closed" => Ok(Interaction::Closed),
            "ignored" => Ok(Interaction::Ignored),
            other => Err(Error::input(format!("unknown interaction {other:?}"))),
        }
    }
}

/// The two items a message carries. `infrequent` is the item the message
/// tries to get the user to buy.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NudgePair {
    pub frequent: ItemId,
    pub infrequent: ItemId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NudgeEvent {
    pub user_id: UserId,
    pub day: Day,
    pub pair: Option<NudgePair>,
    pub arm_label: ArmLabel,
    pub interaction: Interaction,
}

impl NudgeEvent {
    pub fn new(
        user_id: impl Into<UserId>,
        day: Day,
        pair: Option<NudgePair>,
        arm_label: ArmLabel,
        interaction: Interaction,
    ) -> Result<Self> {
        if day < 0 {
            return Err(Error::input(format!("negative day {day}")));
        }
        match (&pair, arm_label) {
            (Some(_), ArmLabel::Control) => {
                return Err(Error::input("control nudge cannot carry an item pair"))
            }
            (None, ArmLabel::Personalized | ArmLabel::Random) => {
                return Err(Error::input(format!("{arm_label} nudge requires an item pair")))
            }
            (Some(p), _) if p.frequent == p.infrequent => {
                return Err(Error::input("nudge pair items must differ"))
            }
            _ => {}
        }
        Ok(Self { user_id: user_id.into(), day, pair, arm_label, interaction })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoginEvent {
    pub user_id: UserId,
    pub day: Day,
    pub session_seconds: f64,
}

impl LoginEvent {
    pub fn new(user_id: impl Into<UserId>, day: Day, session_seconds: f64) -> Result<Self> {
        if day < 0 {
            return Err(Error::input(format!("negative day {day}")));
        }
        if !session_seconds.is_finite() || session_seconds < 0.0 {
            return Err(Error::input(format!("invalid session length {session_seconds}")));
        }
        Ok(Self { user_id: user_id.into(), day, session_seconds })
    }
}

/// Inserts keeping `v` sorted by `key`; equal keys keep arrival order.
fn sorted_insert<T, K: Ord>(v: &mut Vec<T>, item: T, key: impl Fn(&T) -> K) {
    let k = key(&item);
    let pos = v.partition_point(|x| key(x) <= k);
    v.insert(pos, item);
}

/// Range of entries with day in `(from, to]` in a day-sorted slice.
fn window<T>(v: &[T], day: impl Fn(&T) -> Day, from_excl: Day, to_incl: Day) -> &[T] {
    let lo = v.partition_point(|x| day(x) <= from_excl);
    let hi = v.partition_point(|x| day(x) <= to_incl);
    if lo >= hi {
        &v[0..0]
    } else {
        &v[lo..hi]
    }
}

/// Purchase history indexed by user and by (user, item).
#[derive(Clone, Debug, Default)]
pub struct PurchaseLog {
    events: Vec<PurchaseEvent>,
    by_user: BTreeMap<UserId, Vec<(Day, f64)>>,
    by_user_item: BTreeMap<UserId, BTreeMap<ItemId, Vec<Day>>>,
}

impl PurchaseLog {
    pub fn new(events: Vec<PurchaseEvent>) -> Self {
        let mut log = Self::default();
        for e in events {
            log.push(e);
        }
        log
    }

    pub fn push(&mut self, e: PurchaseEvent) {
        sorted_insert(self.by_user.entry(e.user_id.clone()).or_default(), (e.day, e.revenue), |x| x.0);
        sorted_insert(
            self.by_user_item
                .entry(e.user_id.clone())
                .or_default()
                .entry(e.item_id.clone())
                .or_default(),
            e.day,
            |d| *d,
        );
        self.events.push(e);
    }

    /// Rows in insertion order.
    pub fn events(&self) -> &[PurchaseEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.by_user.keys()
    }

    pub fn total_revenue(&self) -> f64 {
        self.events.iter().map(|e| e.revenue).sum()
    }

    /// Sorted purchase days (with repeats) of `item` by `user`.
    pub fn purchase_days(&self, user: &UserId, item: &ItemId) -> &[Day] {
        self.by_user_item
            .get(user)
            .and_then(|m| m.get(item))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Days since `user` last bought `item` at or before `t`; `-1` if never.
    pub fn days_since_last_purchase(&self, user: &UserId, item: &ItemId, t: Day) -> i64 {
        let days = self.purchase_days(user, item);
        let n = days.partition_point(|&d| d <= t);
        if n == 0 {
            -1
        } else {
            t - days[n - 1]
        }
    }

    /// Mean gap between distinct purchase days of `item` by `user` within
    /// `(t - 30 * months, t]`. `None` with fewer than two purchase days.
    pub fn avg_interpurchase_days(&self, user: &UserId, item: &ItemId, t: Day, months: u32) -> Option<f64> {
        let span = 30 * i64::from(months);
        let days = window(self.purchase_days(user, item), |d| *d, t - span, t);
        let first = *days.first()?;
        let last = *days.last()?;
        let mut distinct = 1usize;
        for w in days.windows(2) {
            if w[1] != w[0] {
                distinct += 1;
            }
        }
        if distinct < 2 {
            return None;
        }
        // Consecutive gaps telescope to (last - first).
        Some((last - first) as f64 / (distinct - 1) as f64)
    }

    /// Revenue of `user` with day in `(from_excl, to_incl]`.
    pub fn revenue_between(&self, user: &UserId, from_excl: Day, to_incl: Day) -> f64 {
        self.by_user
            .get(user)
            .map(|v| window(v, |x| x.0, from_excl, to_incl).iter().map(|x| x.1).sum())
            .unwrap_or(0.0)
    }

    /// Distinct days with at least one order in `(from_excl, to_incl]`.
    pub fn order_days_between(&self, user: &UserId, from_excl: Day, to_incl: Day) -> usize {
        self.by_user
            .get(user)
            .map(|v| distinct_days(window(v, |x| x.0, from_excl, to_incl).iter().map(|x| x.0)))
            .unwrap_or(0)
    }
}

fn distinct_days(days: impl Iterator<Item = Day>) -> usize {
    let mut prev = None;
    let mut n = 0;
    for d in days {
        if prev != Some(d) {
            n += 1;
            prev = Some(d);
        }
    }
    n
}

#[derive(Clone, Debug, Default)]
pub struct LoginLog {
    events: Vec<LoginEvent>,
    by_user: BTreeMap<UserId, Vec<(Day, f64)>>,
}

impl LoginLog {
    pub fn new(events: Vec<LoginEvent>) -> Self {
        let mut log = Self::default();
        for e in events {
            log.push(e);
        }
        log
    }

    pub fn push(&mut self, e: LoginEvent) {
        sorted_insert(self.by_user.entry(e.user_id.clone()).or_default(), (e.day, e.session_seconds), |x| x.0);
        self.events.push(e);
    }

    pub fn events(&self) -> &[LoginEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.by_user.keys()
    }

    /// Distinct login days in `(from_excl, to_incl]`, sorted.
    pub fn login_days_between(&self, user: &UserId, from_excl: Day, to_incl: Day) -> Vec<Day> {
        let mut days: Vec<Day> = self
            .by_user
            .get(user)
            .map(|v| window(v, |x| x.0, from_excl, to_incl).iter().map(|x| x.0).collect())
            .unwrap_or_default();
        days.dedup();
        days
    }

    pub fn session_seconds_between(&self, user: &UserId, from_excl: Day, to_incl: Day) -> f64 {
        self.by_user
            .get(user)
            .map(|v| window(v, |x| x.0, from_excl, to_incl).iter().map(|x| x.1).sum())
            .unwrap_or(0.0)
    }

    pub fn first_login(&self, user: &UserId) -> Option<Day> {
        self.by_user.get(user).and_then(|v| v.first()).map(|x| x.0)
    }

    pub fn last_login_at_or_before(&self, user: &UserId, t: Day) -> Option<Day> {
        let v = self.by_user.get(user)?;
        let n = v.partition_point(|x| x.0 <= t);
        (n > 0).then(|| v[n - 1].0)
    }
}

#[derive(Clone, Debug, Default)]
pub struct NudgeLog {
    events: Vec<NudgeEvent>,
    by_user: BTreeMap<UserId, Vec<usize>>,
}

impl NudgeLog {
    pub fn new(events: Vec<NudgeEvent>) -> Self {
        let mut log = Self::default();
        for e in events {
            log.push(e);
        }
        log
    }

    pub fn push(&mut self, e: NudgeEvent) {
        let idx = self.events.len();
        let day = e.day;
        let slot = self.by_user.entry(e.user_id.clone()).or_default();
        self.events.push(e);
        let events = &self.events;
        let pos = slot.partition_point(|&i| events[i].day <= day);
        slot.insert(pos, idx);
    }

    pub fn events(&self) -> &[NudgeEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// Nudges of `user` sent strictly before `t`, oldest first.
    pub fn before(&self, user: &UserId, t: Day) -> impl Iterator<Item = &NudgeEvent> {
        self.by_user
            .get(user)
            .into_iter()
            .flat_map(|v| v.iter())
            .map(|&i| &self.events[i])
            .take_while(move |e| e.day < t)
    }

    pub fn last_before(&self, user: &UserId, t: Day) -> Option<Day> {
        self.before(user, t).last().map(|e| e.day)
    }
}

/// The three behavioral logs every analysis works from.
#[derive(Clone, Debug, Default)]
pub struct Logs {
    pub purchases: PurchaseLog,
    pub nudges: NudgeLog,
    pub logins: LoginLog,
}
