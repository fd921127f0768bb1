//! Independent reference implementations shared by the integration tests
//! and the acceptance runner. Nothing here calls the library code it checks.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

/// One purchase row: user, item, day, revenue.
pub type Row = (String, String, i64, f64);

/// Exact non-negative rational `num / den`, `den > 0`.
#[derive(Clone, Copy, Debug)]
pub struct Ratio {
    pub num: i128,
    pub den: i128,
}

impl Ratio {
    fn cmp_to(&self, o: &Ratio) -> Ordering {
        (self.num * o.den).cmp(&(o.num * self.den))
    }

    fn in_open_unit(&self) -> bool {
        self.num > 0 && self.num < self.den
    }

    fn abs_diff(&self, o: &Ratio) -> Ratio {
        Ratio { num: (self.num * o.den - o.num * self.den).abs(), den: self.den * o.den }
    }
}

/// What the brute force knows about one (user, item) at day `t`.
#[derive(Clone, Copy, Debug)]
pub enum Status {
    Never,
    Undefined,
    Ratio(Ratio),
}

/// Days since the last purchase over the mean gap between consecutive
/// distinct purchase days inside `(t - 30 * months, t]`, as an exact ratio.
pub fn status(rows: &[Row], user: &str, item: &str, t: i64, months: i64) -> Status {
    let all: Vec<i64> = rows.iter().filter(|r| r.0 == user && r.1 == item && r.2 <= t).map(|r| r.2).collect();
    let Some(&last) = all.iter().max() else { return Status::Never };
    let d = t - last;
    let window: BTreeSet<i64> = all.iter().copied().filter(|&day| day > t - 30 * months).collect();
    let days: Vec<i64> = window.into_iter().collect();
    if days.len() < 2 {
        return Status::Undefined;
    }
    let gaps: Vec<i64> = days.windows(2).map(|w| w[1] - w[0]).collect();
    let gap_sum: i64 = gaps.iter().sum();
    if gap_sum == 0 {
        return Status::Undefined;
    }
    // d / (gap_sum / n_gaps)
    Status::Ratio(Ratio { num: i128::from(d) * gaps.len() as i128, den: i128::from(gap_sum) })
}

fn recent(s: Status) -> bool {
    matches!(s, Status::Ratio(r) if r.in_open_unit())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct OraclePick {
    pub pair: (String, String),
    pub frequent: String,
    pub infrequent: String,
}

/// Candidate pairs by brute force: every unordered pair of items, counted
/// over (user, day) baskets in `(t - 30 * months, t]`, ranked, truncated,
/// then filtered to in-stock items.
pub fn oracle_candidates(
    rows: &[Row],
    stock: &BTreeMap<String, bool>,
    t: i64,
    months: i64,
    max_pairs: usize,
    by_revenue: bool,
) -> Vec<(String, String)> {
    let items: BTreeSet<&String> = rows.iter().map(|r| &r.1).collect();
    let baskets: BTreeSet<(&String, i64)> =
        rows.iter().filter(|r| r.2 > t - 30 * months && r.2 <= t).map(|r| (&r.0, r.2)).collect();
    let items: Vec<&String> = items.into_iter().collect();
    let mut scored = Vec::new();
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            let (i, j) = (items[a], items[b]);
            let mut count = 0u64;
            let mut revenue = 0.0;
            for &(u, day) in &baskets {
                let spend = |item: &String| -> Option<f64> {
                    let v: Vec<f64> = rows.iter().filter(|r| &r.0 == u && r.2 == day && &r.1 == item).map(|r| r.3).collect();
                    (!v.is_empty()).then(|| v.iter().sum())
                };
                if let (Some(ri), Some(rj)) = (spend(i), spend(j)) {
                    count += 1;
                    revenue += ri + rj;
                }
            }
            if count > 0 {
                scored.push((i.clone(), j.clone(), count, revenue));
            }
        }
    }
    scored.sort_by(|x, y| {
        let key = if by_revenue { y.3.total_cmp(&x.3) } else { y.2.cmp(&x.2) };
        key.then(y.3.total_cmp(&x.3)).then(y.2.cmp(&x.2)).then(x.0.cmp(&y.0)).then(x.1.cmp(&y.1))
    });
    scored.truncate(max_pairs);
    let ok = |i: &String| stock.get(i).copied().unwrap_or(false);
    scored.into_iter().filter(|s| ok(&s.0) && ok(&s.1)).map(|s| (s.0, s.1)).collect()
}

/// The user-specific rule, evaluated pair by pair.
pub fn oracle_filter(rows: &[Row], candidates: &[(String, String)], user: &str, t: i64, months: i64) -> BTreeSet<OraclePick> {
    struct Kept {
        pick: OraclePick,
        never: bool,
        gap: Option<Ratio>,
    }
    let mut kept = Vec::new();
    for (i, j) in candidates {
        let (si, sj) = (status(rows, user, i, t, months), status(rows, user, j, t, months));
        for (f, fs, n, ns) in [(i, si, j, sj), (j, sj, i, si)] {
            if recent(fs) && !recent(ns) {
                let Status::Ratio(rf) = fs else { unreachable!() };
                let gap = match ns {
                    Status::Ratio(rn) => Some(rf.abs_diff(&rn)),
                    _ => None,
                };
                kept.push(Kept {
                    pick: OraclePick { pair: (i.clone(), j.clone()), frequent: f.clone(), infrequent: n.clone() },
                    never: matches!(ns, Status::Never),
                    gap,
                });
            }
        }
    }
    if kept.iter().any(|k| k.never) {
        return kept.into_iter().filter(|k| k.never).map(|k| k.pick).collect();
    }
    // An undefined ratio for the infrequent item is an unbounded gap.
    if kept.iter().any(|k| k.gap.is_none()) {
        return kept.into_iter().filter(|k| k.gap.is_none()).map(|k| k.pick).collect();
    }
    let best = kept.iter().filter_map(|k| k.gap).max_by(|a, b| a.cmp_to(b));
    match best {
        None => BTreeSet::new(),
        Some(best) => kept
            .into_iter()
            .filter(|k| k.gap.is_some_and(|g| g.cmp_to(&best) == Ordering::Equal))
            .map(|k| k.pick)
            .collect(),
    }
}

/// A small random instance: up to 5 users, up to 5 items, days 1..=60.
pub struct Instance {
    pub rows: Vec<Row>,
    pub users: Vec<String>,
    pub stock: BTreeMap<String, bool>,
    pub t: i64,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let n_users = rng.random_range(1..=5);
    let n_items = rng.random_range(2..=5);
    let users: Vec<String> = (0..n_users).map(|k| format!("u{k}")).collect();
    let items: Vec<String> = (0..n_items).map(|k| format!("i{k}")).collect();
    let t = 60;
    let mut rows = Vec::new();
    for u in &users {
        for day in 1..=t {
            if rng.random::<f64>() < 0.25 {
                for it in &items {
                    if rng.random::<f64>() < 0.4 {
                        let price = f64::from(rng.random_range(1..=20u32));
                        rows.push((u.clone(), it.clone(), day, price));
                    }
                }
            }
        }
    }
    let stock = items.iter().map(|i| (i.clone(), rng.random::<f64>() < 0.85)).collect();
    Instance { rows, users, stock, t }
}

/// Least squares by Gaussian elimination with partial pivoting on the
/// normal equations.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for r in 0..p {
            for c in 0..p {
                a[r][c] += row[r] * row[c];
            }
            a[r][p] += row[r] * yi;
        }
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for r in 0..p {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..p).map(|r| a[r][p] / a[r][r]).collect()
}

/// Welch statistic and Welch-Satterthwaite degrees of freedom.
pub fn welch(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let s2 = |v: &[f64]| {
        let mu = m(v);
        v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (a, b) = (s2(xs) / xs.len() as f64, s2(ys) / ys.len() as f64);
    let t = (m(xs) - m(ys)) / (a + b).sqrt();
    let nu = (a + b).powi(2) / (a * a / (xs.len() - 1) as f64 + b * b / (ys.len() - 1) as f64);
    (t, nu)
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}
