use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{bad_row, open, read_csv_from, CsvOut};
use crate::traits::UserId;

/// Experiment group of a user.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    PureControl,
    Adaptive,
    NonAdaptive,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::PureControl, Group::Adaptive, Group::NonAdaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::PureControl => "pure_control",
            Group::Adaptive => "adaptive",
            Group::NonAdaptive => "non_adaptive",
        }
    }

    pub fn is_intervention(self) -> bool {
        self != Group::PureControl
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Group::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown group {s:?}")))
    }
}

pub type GroupMap = BTreeMap<UserId, Group>;

pub fn members(groups: &GroupMap, g: Group) -> BTreeSet<UserId> {
    groups.iter().filter(|(_, &x)| x == g).map(|(u, _)| u.clone()).collect()
}

pub const GROUP_HEADER: [&str; 2] = ["user_id", "group"];

#[derive(Deserialize)]
struct GroupRow {
    user_id: String,
    group: String,
}

pub fn read_groups_from<R: Read>(rdr: R, label: &str) -> Result<GroupMap> {
    let mut out = GroupMap::new();
    for (line, r) in read_csv_from::<_, GroupRow>(rdr, label)? {
        let g: Group = r.group.parse().map_err(|e| bad_row(label, line, e))?;
        if out.insert(r.user_id.clone().into(), g).is_some() {
            return Err(bad_row(label, line, Error::input(format!("user {} listed twice", r.user_id))));
        }
    }
    Ok(out)
}

pub fn read_groups(path: &Path) -> Result<GroupMap> {
    read_groups_from(open(path)?, &path.display().to_string())
}

pub fn write_groups<W: Write>(w: W, label: &str, groups: &GroupMap) -> Result<W> {
    let mut out = CsvOut::new(w, label, &GROUP_HEADER)?;
    for (u, g) in groups {
        out.row([u.as_str(), g.as_str()])?;
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let g: GroupMap = [("a", Group::Adaptive), ("b", Group::PureControl), ("c", Group::NonAdaptive)]
            .iter()
            .map(|(u, g)| (UserId::from(*u), *g))
            .collect();
        let bytes = write_groups(Vec::new(), "g", &g).unwrap();
        assert_eq!(read_groups_from(bytes.as_slice(), "g").unwrap(), g);
        assert!(read_groups_from("user_id,group\na,treated\n".as_bytes(), "g").is_err());
        assert!(read_groups_from("user_id,group\na,adaptive\na,adaptive\n".as_bytes(), "g").is_err());
        assert_eq!(members(&g, Group::Adaptive).len(), 1);
    }
}
