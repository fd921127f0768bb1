//! Versioned JSON snapshot of a model and the decision-log CSV.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{ArmPosterior, BanditModel, Prior};
use super::policy::Decision;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, open, CsvOut};
use crate::traits::{Day, UserId};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ArmState {
    label: String,
    mu: Vec<f64>,
    /// Row-major.
    precision: Vec<f64>,
    a: f64,
    b: f64,
    n_obs: u64,
}

#[derive(Serialize, Deserialize)]
struct PriorState {
    mu0: Vec<f64>,
    precision0: Vec<f64>,
    a0: f64,
    b0: f64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    dim: usize,
    prior: PriorState,
    arms: Vec<ArmState>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn square(dim: usize, data: &[f64], what: &str) -> Result<DMatrix<f64>> {
    if data.len() != dim * dim {
        return Err(Error::Snapshot(format!("{what}: expected {} entries, got {}", dim * dim, data.len())));
    }
    Ok(DMatrix::from_row_slice(dim, dim, data))
}

impl BanditModel {
    pub fn to_json(&self) -> String {
        let snap = Snapshot {
            version: SNAPSHOT_VERSION,
            dim: self.dim(),
            prior: PriorState {
                mu0: self.prior.mu0.as_slice().to_vec(),
                precision0: row_major(&self.prior.precision0),
                a0: self.prior.a0,
                b0: self.prior.b0,
            },
            arms: self
                .arms
                .iter()
                .map(|a| ArmState {
                    label: a.label.clone(),
                    mu: a.mu.as_slice().to_vec(),
                    precision: row_major(&a.precision),
                    a: a.a,
                    b: a.b,
                    n_obs: a.n_obs,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&snap).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| Error::Snapshot(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported snapshot version {}", snap.version)));
        }
        let d = snap.dim;
        if snap.prior.mu0.len() != d {
            return Err(Error::Snapshot("prior mean has wrong length".into()));
        }
        let prior = Prior {
            mu0: DVector::from_vec(snap.prior.mu0),
            precision0: square(d, &snap.prior.precision0, "prior precision")?,
            a0: snap.prior.a0,
            b0: snap.prior.b0,
        };
        let labels: Vec<&str> = snap.arms.iter().map(|a| a.label.as_str()).collect();
        let mut model = BanditModel::new(&labels, prior)?;
        for (slot, arm) in model.arms.iter_mut().zip(snap.arms) {
            if arm.mu.len() != d {
                return Err(Error::Snapshot(format!("arm {}: mean has wrong length", arm.label)));
            }
            *slot = ArmPosterior::from_parts(
                arm.label,
                DVector::from_vec(arm.mu),
                square(d, &arm.precision, "arm precision")?,
                arm.a,
                arm.b,
                arm.n_obs,
            )?;
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut text = String::new();
        open(path)?
            .read_to_string(&mut text)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }
}

pub fn decision_header(n_arms: usize) -> Vec<String> {
    let mut h = vec!["user_id".to_string(), "day".to_string(), "arm".to_string()];
    h.extend((0..n_arms).map(|k| format!("score_{k}")));
    h
}

/// `user_id,day,arm,score_0..score_{K-1}`.
pub fn write_decisions<'a, W: Write>(w: W, label: &str, n_arms: usize, decisions: impl IntoIterator<Item = &'a Decision>) -> Result<W> {
    let header = decision_header(n_arms);
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvOut::new(w, label, &refs)?;
    for d in decisions {
        if d.sampled_scores.len() != n_arms {
            return Err(Error::input(format!("decision for {} has {} scores, expected {n_arms}", d.user_id, d.sampled_scores.len())));
        }
        let mut row = vec![d.user_id.to_string(), d.day.to_string(), d.arm_label.clone()];
        row.extend(d.sampled_scores.iter().map(|&s| fmt_f64(s)));
        out.row(row)?;
    }
    out.finish()
}

/// A decision-log row as read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct LoggedDecision {
    pub user_id: UserId,
    pub day: Day,
    pub arm_label: String,
    pub scores: Vec<f64>,
}

pub fn read_decisions_from<R: Read>(rdr: R, label: &str) -> Result<Vec<LoggedDecision>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
    let bad = |line: u64, msg: String| Error::BadRow { path: label.to_string(), line, msg };
    let header = reader.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "user_id" || &header[1] != "day" || &header[2] != "arm" {
        return Err(bad(1, "expected header user_id,day,arm,score_0,...".into()));
    }
    let mut out = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let day: Day = rec[1].parse().map_err(|_| bad(line, format!("invalid day {:?}", &rec[1])))?;
        let scores = rec
            .iter()
            .skip(3)
            .map(|s| s.parse::<f64>().map_err(|_| bad(line, format!("invalid score {s:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(LoggedDecision { user_id: rec[0].into(), day, arm_label: rec[2].to_string(), scores });
    }
    Ok(out)
}

pub fn read_decisions(path: &Path) -> Result<Vec<LoggedDecision>> {
    read_decisions_from(open(path)?, &path.display().to_string())
}
