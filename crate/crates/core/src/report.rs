//! Pass/fail reports shared by every verifier in the crate.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "n/a")]
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub item: String,
    pub status: Status,
    pub witness: Value,
}

impl CheckEntry {
    pub fn pass(item: impl Into<String>) -> Self {
        Self {
            item: item.into(),
            status: Status::Pass,
            witness: Value::Null,
        }
    }

    pub fn fail(item: impl Into<String>, witness: Value) -> Self {
        Self {
            item: item.into(),
            status: Status::Fail,
            witness,
        }
    }

    pub fn not_applicable(item: impl Into<String>) -> Self {
        Self {
            item: item.into(),
            status: Status::NotApplicable,
            witness: Value::Null,
        }
    }

    /// Pass when `witness` is `None`, otherwise fail with it.
    pub fn from_witness(item: impl Into<String>, witness: Option<Value>) -> Self {
        match witness {
            None => Self::pass(item),
            Some(w) => Self::fail(item, w),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Report {
    pub entries: Vec<CheckEntry>,
}

impl Report {
    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| e.status == Status::Fail)
    }

    pub fn get(&self, item: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.item == item)
    }

    pub fn status(&self, item: &str) -> Option<Status> {
        self.get(item).map(|e| e.status)
    }
}

impl FromIterator<CheckEntry> for Report {
    fn from_iter<I: IntoIterator<Item = CheckEntry>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}
