//! CSV formats of the purchase, nudge and login logs.
//!
//! ```text
//! purchases: user_id,item_id,day,quantity,unit_price
//! nudges:    user_id,day,item_i,item_j,arm_label,interaction
//! logins:    user_id,day,session_seconds
//! ```
//!
//! In the nudge log `item_i` is the item the user already buys and `item_j`
//! the infrequent item; both are empty for control rows.

use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::events::{
    ArmLabel, Day, Interaction, LoginEvent, NudgeEvent, NudgePair, PurchaseEvent,
};
use crate::error::{Error, Result};
use crate::io::{bad_row, fmt_f64, open, read_csv_from, CsvOut};

pub const PURCHASE_HEADER: [&str; 5] = ["user_id", "item_id", "day", "quantity", "unit_price"];
pub const NUDGE_HEADER: [&str; 6] = ["user_id", "day", "item_i", "item_j", "arm_label", "interaction"];
pub const LOGIN_HEADER: [&str; 3] = ["user_id", "day", "session_seconds"];

#[derive(Deserialize)]
struct PurchaseRow {
    user_id: String,
    item_id: String,
    day: Day,
    quantity: i64,
    unit_price: f64,
}

#[derive(Deserialize)]
struct NudgeRow {
    user_id: String,
    day: Day,
    item_i: Option<String>,
    item_j: Option<String>,
    arm_label: String,
    interaction: String,
}

#[derive(Deserialize)]
struct LoginRow {
    user_id: String,
    day: Day,
    session_seconds: f64,
}

pub fn read_purchases_from<R: Read>(rdr: R, label: &str) -> Result<Vec<PurchaseEvent>> {
    read_csv_from::<_, PurchaseRow>(rdr, label)?
        .into_iter()
        .map(|(line, r)| {
            let qty = u32::try_from(r.quantity)
                .map_err(|_| Error::input(format!("invalid quantity {}", r.quantity)))
                .and_then(|q| PurchaseEvent::new(r.user_id, r.item_id, r.day, q, r.unit_price));
            qty.map_err(|e| bad_row(label, line, e))
        })
        .collect()
}

pub fn read_nudges_from<R: Read>(rdr: R, label: &str) -> Result<Vec<NudgeEvent>> {
    read_csv_from::<_, NudgeRow>(rdr, label)?
        .into_iter()
        .map(|(line, r)| {
            let parsed = (|| {
                let pair = match (r.item_i.filter(|s| !s.is_empty()), r.item_j.filter(|s| !s.is_empty())) {
                    (Some(i), Some(j)) => Some(NudgePair { frequent: i.into(), infrequent: j.into() }),
                    (None, None) => None,
                    _ => return Err(Error::input("item_i and item_j must both be set or both empty")),
                };
                let arm: ArmLabel = r.arm_label.parse()?;
                let interaction: Interaction = r.interaction.parse()?;
                NudgeEvent::new(r.user_id, r.day, pair, arm, interaction)
            })();
            parsed.map_err(|e| bad_row(label, line, e))
        })
        .collect()
}

pub fn read_logins_from<R: Read>(rdr: R, label: &str) -> Result<Vec<LoginEvent>> {
    read_csv_from::<_, LoginRow>(rdr, label)?
        .into_iter()
        .map(|(line, r)| LoginEvent::new(r.user_id, r.day, r.session_seconds).map_err(|e| bad_row(label, line, e)))
        .collect()
}

pub fn read_purchases(path: &Path) -> Result<Vec<PurchaseEvent>> {
    read_purchases_from(open(path)?, &path.display().to_string())
}

pub fn read_nudges(path: &Path) -> Result<Vec<NudgeEvent>> {
    read_nudges_from(open(path)?, &path.display().to_string())
}

pub fn read_logins(path: &Path) -> Result<Vec<LoginEvent>> {
    read_logins_from(open(path)?, &path.display().to_string())
}

pub fn write_purchases<'a, W: Write>(w: W, label: &str, events: impl IntoIterator<Item = &'a PurchaseEvent>) -> Result<W> {
    let mut out = CsvOut::new(w, label, &PURCHASE_HEADER)?;
    for e in events {
        out.row([
            e.user_id.to_string(),
            e.item_id.to_string(),
            e.day.to_string(),
            e.quantity.to_string(),
            fmt_f64(e.unit_price),
        ])?;
    }
    out.finish()
}

pub fn write_nudges<'a, W: Write>(w: W, label: &str, events: impl IntoIterator<Item = &'a NudgeEvent>) -> Result<W> {
    let mut out = CsvOut::new(w, label, &NUDGE_HEADER)?;
    for e in events {
        let (i, j) = e
            .pair
            .as_ref()
            .map_or((String::new(), String::new()), |p| (p.frequent.to_string(), p.infrequent.to_string()));
        out.row([e.user_id.to_string(), e.day.to_string(), i, j, e.arm_label.to_string(), e.interaction.to_string()])?;
    }
    out.finish()
}

pub fn write_logins<'a, W: Write>(w: W, label: &str, events: impl IntoIterator<Item = &'a LoginEvent>) -> Result<W> {
    let mut out = CsvOut::new(w, label, &LOGIN_HEADER)?;
    for e in events {
        out.row([e.user_id.to_string(), e.day.to_string(), fmt_f64(e.session_seconds)])?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purchase_rows_parse_and_validate() {
        let ok = "user_id,item_id,day,quantity,unit_price\nu1,paracetamol,3,2,1.25\n";
        let rows = read_purchases_from(ok.as_bytes(), "p.csv").unwrap();
        assert_eq!(rows[0].revenue, 2.5);

        let neg = "user_id,item_id,day,quantity,unit_price\nu1,a,3,2,1.0\nu1,a,3,2,-1.0\n";
        match read_purchases_from(neg.as_bytes(), "p.csv").unwrap_err() {
            Error::BadRow { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let negq = "user_id,item_id,day,quantity,unit_price\nu1,a,3,-2,1.0\n";
        assert!(read_purchases_from(negq.as_bytes(), "p.csv").is_err());
    }

    #[test]
    fn nudge_rows_roundtrip() {
        let text = "user_id,day,item_i,item_j,arm_label,interaction\n\
                    u1,7,a,b,personalized,opened\n\
                    u2,7,,,control,ignored\n";
        let rows = read_nudges_from(text.as_bytes(), "n.csv").unwrap();
        assert_eq!(rows[0].pair.as_ref().unwrap().infrequent.as_str(), "b");
        assert!(rows[1].pair.is_none());
        let bytes = write_nudges(Vec::new(), "n.csv", &rows).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), text);
    }

    #[test]
    fn half_pair_rejected() {
        let text = "user_id,day,item_i,item_j,arm_label,interaction\nu1,7,a,,random,opened\n";
        assert!(read_nudges_from(text.as_bytes(), "n.csv").is_err());
        let bad = "user_id,day,item_i,item_j,arm_label,interaction\nu1,7,a,b,random,tapped\n";
        assert!(read_nudges_from(bad.as_bytes(), "n.csv").is_err());
    }

    #[test]
    fn float_text_roundtrips_exactly() {
        let e = PurchaseEvent::new("u", "i", 1, 3, 0.1 + 0.2).unwrap();
        let bytes = write_purchases(Vec::new(), "p", [&e]).unwrap();
        let back = read_purchases_from(bytes.as_slice(), "p").unwrap();
        assert_eq!(back[0], e);
    }
}
