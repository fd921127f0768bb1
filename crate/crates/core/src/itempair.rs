//! Item-pair recommendations.
//!
//! Candidate pairs are the items most often bought together (same user, same
//! day) over a trailing window. Each user then gets a pair where one item is
//! bought on cadence and the other is not bought at all, or rarely.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{bad_row, open, read_csv_from, CsvOut};
use crate::traits::{Day, ItemId, PurchaseLog, UserId, DAYS_PER_MONTH};

pub const DEFAULT_MAX_PAIRS: usize = 100;
pub const DEFAULT_WINDOW_MONTHS: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    Count,
    Revenue,
}

/// Unordered pair stored with `item_i < item_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemPair {
    pub item_i: ItemId,
    pub item_j: ItemId,
    pub co_purchase_count: u64,
    pub co_purchase_revenue: f64,
}

impl ItemPair {
    pub fn new(a: ItemId, b: ItemId) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { item_i: a, item_j: b, co_purchase_count: 0, co_purchase_revenue: 0.0 }),
            std::cmp::Ordering::Greater => Ok(Self { item_i: b, item_j: a, co_purchase_count: 0, co_purchase_revenue: 0.0 }),
            std::cmp::Ordering::Equal => Err(Error::input(format!("pair needs two distinct items, got {a} twice"))),
        }
    }

    pub fn same_items(&self, other: &ItemPair) -> bool {
        self.item_i == other.item_i && self.item_j == other.item_j
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub window_months: u32,
    pub mode: RankingMode,
    pub max_pairs: usize,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        Self { window_months: DEFAULT_WINDOW_MONTHS, mode: RankingMode::Revenue, max_pairs: DEFAULT_MAX_PAIRS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateList {
    pub as_of_day: Day,
    pub ranking_mode: RankingMode,
    pub pairs: Vec<ItemPair>,
}

/// In-stock flags. Items missing from the map count as out of stock.
pub type StockMap = BTreeMap<ItemId, bool>;

fn in_stock(stock: &StockMap, item: &ItemId) -> bool {
    stock.get(item).copied().unwrap_or(false)
}

/// Top co-purchased pairs within `(t - 30 * window_months, t]`, truncated to
/// `max_pairs` and then restricted to pairs whose items are both in stock.
pub fn generate_candidate_pairs(log: &PurchaseLog, stock: &StockMap, t: Day, cfg: &CandidateConfig) -> Result<CandidateList> {
    if cfg.window_months < 1 {
        return Err(Error::config("window_months must be at least 1"));
    }
    let from = t - DAYS_PER_MONTH * i64::from(cfg.window_months);

    let mut baskets: BTreeMap<(&UserId, Day), BTreeMap<&ItemId, f64>> = BTreeMap::new();
    for e in log.events().iter().filter(|e| e.day > from && e.day <= t) {
        *baskets.entry((&e.user_id, e.day)).or_default().entry(&e.item_id).or_default() += e.revenue;
    }

    let mut tally: BTreeMap<(&ItemId, &ItemId), (u64, f64)> = BTreeMap::new();
    for basket in baskets.values() {
        let items: Vec<(&&ItemId, &f64)> = basket.iter().collect();
        for (a, (ia, ra)) in items.iter().enumerate() {
            for (ib, rb) in &items[a + 1..] {
                let slot = tally.entry((**ia, **ib)).or_default();
                slot.0 += 1;
                slot.1 += **ra + **rb;
            }
        }
    }

    let mut pairs: Vec<ItemPair> = tally
        .into_iter()
        .map(|((i, j), (count, revenue))| ItemPair {
            item_i: i.clone(),
            item_j: j.clone(),
            co_purchase_count: count,
            co_purchase_revenue: revenue,
        })
        .collect();
    pairs.sort_by(|a, b| {
        let primary = match cfg.mode {
            RankingMode::Revenue => b.co_purchase_revenue.total_cmp(&a.co_purchase_revenue),
            RankingMode::Count => b.co_purchase_count.cmp(&a.co_purchase_count),
        };
        primary
            .then_with(|| b.co_purchase_revenue.total_cmp(&a.co_purchase_revenue))
            .then_with(|| b.co_purchase_count.cmp(&a.co_purchase_count))
            .then_with(|| a.item_i.cmp(&b.item_i))
            .then_with(|| a.item_j.cmp(&b.item_j))
    });
    pairs.truncate(cfg.max_pairs);
    pairs.retain(|p| in_stock(stock, &p.item_i) && in_stock(stock, &p.item_j));
    Ok(CandidateList { as_of_day: t, ranking_mode: cfg.mode, pairs })
}

/// Where an item sits relative to the user's own purchase cadence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Recency {
    /// Never bought at or before `t`.
    Never,
    /// Bought, but no cadence is defined (fewer than two purchase days in
    /// the window, or a zero mean gap).
    NoCadence,
    /// Days since last purchase over the mean inter-purchase gap.
    Ratio(f64),
}

impl Recency {
    pub fn of(log: &PurchaseLog, user: &UserId, item: &ItemId, t: Day, months: u32) -> Self {
        let d = log.days_since_last_purchase(user, item, t);
        if d < 0 {
            return Recency::Never;
        }
        match log.avg_interpurchase_days(user, item, t, months) {
            Some(avg) if avg > 0.0 => Recency::Ratio(d as f64 / avg),
            _ => Recency::NoCadence,
        }
    }

    /// Bought recently relative to cadence: ratio strictly inside (0, 1).
    pub fn is_recent(self) -> bool {
        matches!(self, Recency::Ratio(r) if r > 0.0 && r < 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub user_id: UserId,
    pub day: Day,
    pub pair: ItemPair,
    pub frequent_item: ItemId,
    pub infrequent_item: ItemId,
}

/// Gap used when no candidate offers a never-bought item. A rarely bought
/// item without cadence sorts above every finite gap.
fn recency_gap(frequent: f64, infrequent: Recency) -> f64 {
    match infrequent {
        Recency::Ratio(r) => (frequent - r).abs(),
        Recency::NoCadence | Recency::Never => f64::INFINITY,
    }
}

/// User-specific filtering of the candidate list, in candidate order.
pub fn filter_pairs_for_user(
    candidates: &CandidateList,
    log: &PurchaseLog,
    user: &UserId,
    t: Day,
    months: u32,
) -> Vec<Recommendation> {
    struct Kept<'a> {
        pair: &'a ItemPair,
        frequent: &'a ItemId,
        infrequent: &'a ItemId,
        never: bool,
        gap: f64,
    }

    let mut kept = Vec::new();
    for pair in &candidates.pairs {
        let ri = Recency::of(log, user, &pair.item_i, t, months);
        let rj = Recency::of(log, user, &pair.item_j, t, months);
        // At most one orientation can qualify: the frequent side must be
        // recent, the other must not be.
        let oriented = if ri.is_recent() && !rj.is_recent() {
            Some((&pair.item_i, &pair.item_j, ri, rj))
        } else if rj.is_recent() && !ri.is_recent() {
            Some((&pair.item_j, &pair.item_i, rj, ri))
        } else {
            None
        };
        if let Some((frequent, infrequent, Recency::Ratio(rf), rinf)) = oriented {
            kept.push(Kept { pair, frequent, infrequent, never: rinf == Recency::Never, gap: recency_gap(rf, rinf) });
        }
    }

    if kept.iter().any(|k| k.never) {
        kept.retain(|k| k.never);
    } else if let Some(best) = kept.iter().map(|k| k.gap).reduce(f64::max) {
        kept.retain(|k| k.gap == best || (best.is_finite() && (best - k.gap) <= 1e-12 * best.max(1.0)));
    }

    kept.into_iter()
        .map(|k| Recommendation {
            user_id: user.clone(),
            day: t,
            pair: k.pair.clone(),
            frequent_item: k.frequent.clone(),
            infrequent_item: k.infrequent.clone(),
        })
        .collect()
}

/// Picks one filtered pair uniformly at random; `None` if nothing survives.
pub fn recommend<R: Rng + ?Sized>(
    candidates: &CandidateList,
    log: &PurchaseLog,
    user: &UserId,
    t: Day,
    months: u32,
    rng: &mut R,
) -> Option<Recommendation> {
    let mut options = filter_pairs_for_user(candidates, log, user, t, months);
    if options.is_empty() {
        return None;
    }
    let k = rng.random_range(0..options.len());
    Some(options.swap_remove(k))
}

/// Two distinct in-stock catalog items, uniformly without replacement.
pub fn random_pair<R: Rng + ?Sized>(catalog: &[ItemId], stock: &StockMap, rng: &mut R) -> Result<ItemPair> {
    let available: Vec<&ItemId> = catalog
        .iter()
        .filter(|i| in_stock(stock, i))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if available.len() < 2 {
        return Err(Error::input(format!("need at least 2 in-stock items, have {}", available.len())));
    }
    let picked = index::sample(rng, available.len(), 2);
    ItemPair::new(available[picked.index(0)].clone(), available[picked.index(1)].clone())
}

/// In-app message text for a pair.
pub fn render_message(item_a: &ItemId, item_b: &ItemId) -> String {
    format!("Pharmacies in your area typically purchase {item_a} and {item_b}. Click here to order now!")
}

#[derive(Deserialize)]
struct StockRow {
    item_id: String,
    in_stock: u8,
}

pub fn read_stock_from<R: Read>(rdr: R, label: &str) -> Result<StockMap> {
    read_csv_from::<_, StockRow>(rdr, label)?
        .into_iter()
        .map(|(line, r)| match r.in_stock {
            0 | 1 => Ok((ItemId::from(r.item_id), r.in_stock == 1)),
            v => Err(bad_row(label, line, Error::input(format!("in_stock must be 0 or 1, got {v}")))),
        })
        .collect()
}

pub fn read_stock(path: &Path) -> Result<StockMap> {
    read_stock_from(open(path)?, &path.display().to_string())
}

pub fn write_stock<W: Write>(w: W, label: &str, stock: &StockMap) -> Result<W> {
    let mut out = CsvOut::new(w, label, &["item_id", "in_stock"])?;
    for (item, &ok) in stock {
        out.row([item.to_string(), u8::from(ok).to_string()])?;
    }
    out.finish()
}

pub const RECOMMENDATION_HEADER: [&str; 6] = ["user_id", "day", "item_i", "item_j", "infrequent_item", "message"];

pub fn write_recommendations<'a, W: Write>(
    w: W,
    label: &str,
    recs: impl IntoIterator<Item = &'a Recommendation>,
) -> Result<W> {
    let mut out = CsvOut::new(w, label, &RECOMMENDATION_HEADER)?;
    for r in recs {
        out.row([
            r.user_id.to_string(),
            r.day.to_string(),
            r.pair.item_i.to_string(),
            r.pair.item_j.to_string(),
            r.infrequent_item.to_string(),
            render_message(&r.pair.item_i, &r.pair.item_j),
        ])?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::traits::PurchaseEvent;

    fn buy(u: &str, i: &str, day: Day, price: f64) -> PurchaseEvent {
        PurchaseEvent::new(u, i, day, 1, price).unwrap()
    }

    fn all_in_stock(items: &[&str]) -> StockMap {
        items.iter().map(|&i| (ItemId::from(i), true)).collect()
    }

    fn pair_ids(list: &CandidateList) -> Vec<(String, String)> {
        list.pairs.iter().map(|p| (p.item_i.to_string(), p.item_j.to_string())).collect()
    }

    #[test]
    fn dominant_pair_ranks_first() {
        let mut events = Vec::new();
        for u in 0..5 {
            let u = format!("u{u}");
            events.push(buy(&u, "a", 50, 10.0));
            events.push(buy(&u, "b", 50, 10.0));
        }
        events.push(buy("u0", "c", 60, 1.0));
        events.push(buy("u0", "a", 60, 1.0));
        let log = PurchaseLog::new(events);
        let list = generate_candidate_pairs(&log, &all_in_stock(&["a", "b", "c"]), 90, &CandidateConfig::default()).unwrap();
        assert_eq!(pair_ids(&list), vec![("a".into(), "b".into()), ("a".into(), "c".into())]);
        assert_eq!(list.pairs[0].co_purchase_count, 5);
        assert_eq!(list.pairs[0].co_purchase_revenue, 100.0);
    }

    #[test]
    fn out_of_stock_pair_dropped() {
        let log = PurchaseLog::new(vec![buy("u", "a", 50, 10.0), buy("u", "b", 50, 10.0), buy("u", "c", 51, 1.0), buy("u", "a", 51, 1.0)]);
        let mut stock = all_in_stock(&["a", "b", "c"]);
        stock.insert("b".into(), false);
        let list = generate_candidate_pairs(&log, &stock, 90, &CandidateConfig::default()).unwrap();
        assert_eq!(pair_ids(&list), vec![("a".into(), "c".into())]);
    }

    #[test]
    fn empty_log_empty_list() {
        let list = generate_candidate_pairs(&PurchaseLog::default(), &StockMap::new(), 90, &CandidateConfig::default()).unwrap();
        assert!(list.pairs.is_empty());
    }

    /// 4 items, 3 users: ranked list equals exhaustive enumeration of the
    /// C(4,2) pairs over all baskets.
    #[test]
    fn toy_list_matches_exhaustive_pair_count() {
        let events = vec![
            buy("x", "a", 10, 5.0),
            buy("x", "b", 10, 3.0),
            buy("x", "c", 10, 2.0),
            buy("y", "a", 20, 5.0),
            buy("y", "d", 20, 7.0),
            buy("z", "b", 30, 3.0),
            buy("z", "c", 30, 2.0),
            buy("z", "b", 31, 3.0),
            buy("z", "c", 31, 2.0),
            buy("z", "a", 200, 100.0), // outside the window at t = 90
        ];
        let log = PurchaseLog::new(events.clone());
        let items = ["a", "b", "c", "d"];
        let mut expected = Vec::new();
        for (x, a) in items.iter().enumerate() {
            for b in &items[x + 1..] {
                let mut count = 0u64;
                let mut revenue = 0.0;
                let mut keys: Vec<(&str, Day)> = events.iter().filter(|e| e.day <= 90).map(|e| (e.user_id.as_str(), e.day)).collect();
                keys.sort();
                keys.dedup();
                for (u, d) in keys {
                    let basket: Vec<&PurchaseEvent> = events.iter().filter(|e| e.user_id.as_str() == u && e.day == d).collect();
                    let ra: f64 = basket.iter().filter(|e| e.item_id.as_str() == *a).map(|e| e.revenue).sum();
                    let rb: f64 = basket.iter().filter(|e| e.item_id.as_str() == *b).map(|e| e.revenue).sum();
                    if basket.iter().any(|e| e.item_id.as_str() == *a) && basket.iter().any(|e| e.item_id.as_str() == *b) {
                        count += 1;
                        revenue += ra + rb;
                    }
                }
                if count > 0 {
                    expected.push((a.to_string(), b.to_string(), count, revenue));
                }
            }
        }
        expected.sort_by(|p, q| q.3.total_cmp(&p.3).then(q.2.cmp(&p.2)).then(p.0.cmp(&q.0)).then(p.1.cmp(&q.1)));
        let list = generate_candidate_pairs(&log, &all_in_stock(&items), 90, &CandidateConfig::default()).unwrap();
        let got: Vec<_> = list
            .pairs
            .iter()
            .map(|p| (p.item_i.to_string(), p.item_j.to_string(), p.co_purchase_count, p.co_purchase_revenue))
            .collect();
        assert_eq!(got, expected);
        assert_eq!((got[0].0.as_str(), got[0].1.as_str(), got[0].2), ("b", "c", 3));
    }

    #[test]
    fn truncates_to_max_pairs() {
        let mut events = Vec::new();
        for k in 0..20 {
            events.push(buy("u", &format!("i{k:02}"), 50, 1.0 + k as f64));
        }
        let log = PurchaseLog::new(events);
        let names: Vec<String> = (0..20).map(|k| format!("i{k:02}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let list = generate_candidate_pairs(&log, &all_in_stock(&refs), 90, &CandidateConfig::default()).unwrap();
        assert_eq!(list.pairs.len(), 100);
        assert_eq!(pair_ids(&list)[0], ("i18".into(), "i19".into()));
    }

    fn weekly(u: &str, i: &str, last: Day, n: i64) -> Vec<PurchaseEvent> {
        (0..n).map(|k| buy(u, i, last - 7 * k, 1.0)).collect()
    }

    fn candidates(pairs: &[(&str, &str)]) -> CandidateList {
        CandidateList {
            as_of_day: 100,
            ranking_mode: RankingMode::Revenue,
            pairs: pairs.iter().map(|(a, b)| ItemPair::new((*a).into(), (*b).into()).unwrap()).collect(),
        }
    }

    #[test]
    fn weekly_item_with_never_bought_partner() {
        // Weekly buyer of i, last purchase 3 days ago -> ratio 3/7.
        let log = PurchaseLog::new(weekly("u", "i", 97, 6));
        let recs = filter_pairs_for_user(&candidates(&[("i", "j")]), &log, &"u".into(), 100, 3);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].frequent_item.as_str(), "i");
        assert_eq!(recs[0].infrequent_item.as_str(), "j");
    }

    #[test]
    fn both_recent_excluded() {
        let mut events = weekly("u", "i", 97, 6);
        events.extend(weekly("u", "j", 98, 6));
        let log = PurchaseLog::new(events);
        assert!(filter_pairs_for_user(&candidates(&[("i", "j")]), &log, &"u".into(), 100, 3).is_empty());
    }

    #[test]
    fn largest_gap_wins_without_never_bought() {
        let mut events = weekly("u", "i", 99, 6); // ratio 1/7
        // k: cadence 10, last 10 days ago -> ratio 1.0, gap 6/7
        events.extend((0..4).map(|n| buy("u", "k", 90 - 10 * n, 1.0)));
        // m: cadence 10, last 11 days ago -> ratio 1.1, gap 67/70
        events.extend((0..4).map(|n| buy("u", "m", 89 - 10 * n, 1.0)));
        let log = PurchaseLog::new(events);
        let recs = filter_pairs_for_user(&candidates(&[("i", "k"), ("i", "m")]), &log, &"u".into(), 100, 3);
        let chosen: Vec<&str> = recs.iter().map(|r| r.infrequent_item.as_str()).collect();
        assert_eq!(chosen, vec!["m"]);
    }

    #[test]
    fn never_bought_beats_any_gap() {
        let mut events = weekly("u", "i", 99, 6);
        events.extend((0..4).map(|n| buy("u", "k", 60 - 10 * n, 1.0)));
        let log = PurchaseLog::new(events);
        let recs = filter_pairs_for_user(&candidates(&[("i", "k"), ("i", "z")]), &log, &"u".into(), 100, 3);
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].infrequent_item.as_str(), "z");
    }

    #[test]
    fn single_and_empty_choice() {
        let log = PurchaseLog::new(weekly("u", "i", 97, 6));
        let mut rng = substream(1, "t");
        let one = candidates(&[("i", "j")]);
        for _ in 0..20 {
            assert_eq!(recommend(&one, &log, &"u".into(), 100, 3, &mut rng).unwrap().infrequent_item.as_str(), "j");
        }
        let none = candidates(&[("a", "b")]);
        assert!(recommend(&none, &log, &"u".into(), 100, 3, &mut rng).is_none());
    }

    #[test]
    fn uniform_over_three_options() {
        let log = PurchaseLog::new(weekly("u", "i", 97, 6));
        let list = candidates(&[("i", "x"), ("i", "y"), ("i", "z")]);
        let mut rng = substream(2, "t");
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let n = 30_000;
        for _ in 0..n {
            let r = recommend(&list, &log, &"u".into(), 100, 3, &mut rng).unwrap();
            *counts.entry(r.infrequent_item.to_string()).or_default() += 1;
        }
        assert_eq!(counts.len(), 3);
        for c in counts.values() {
            assert!((*c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn random_pair_cases() {
        let catalog: Vec<ItemId> = ["a", "b", "c", "d", "e"].iter().map(|&s| s.into()).collect();
        let mut rng = substream(3, "t");

        let two = all_in_stock(&["a", "b"]);
        for _ in 0..50 {
            let p = random_pair(&catalog, &two, &mut rng).unwrap();
            assert_eq!((p.item_i.as_str(), p.item_j.as_str()), ("a", "b"));
        }

        let mut four = all_in_stock(&["a", "b", "c", "d"]);
        four.insert("e".into(), false);
        let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
        let n = 60_000;
        for _ in 0..n {
            let p = random_pair(&catalog, &four, &mut rng).unwrap();
            assert!(p.item_i.as_str() != "e" && p.item_j.as_str() != "e");
            *counts.entry((p.item_i.to_string(), p.item_j.to_string())).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            assert!((*c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.01);
        }

        assert!(random_pair(&catalog, &all_in_stock(&["a"]), &mut rng).is_err());
    }

    #[test]
    fn message_template() {
        assert_eq!(
            render_message(&"Amoxicillin".into(), &"Ibuprofen".into()),
            "Pharmacies in your area typically purchase Amoxicillin and Ibuprofen. Click here to order now!"
        );
    }

    #[test]
    fn stock_file_parses() {
        let s = read_stock_from("item_id,in_stock\na,1\nb,0\n".as_bytes(), "s").unwrap();
        assert_eq!(s[&ItemId::from("a")], true);
        assert_eq!(s[&ItemId::from("b")], false);
        assert!(read_stock_from("item_id,in_stock\na,2\n".as_bytes(), "s").is_err());
    }
}
