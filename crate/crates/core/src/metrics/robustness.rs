//! OA, corruption error, bug rates, corruption risk and their means.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::detection::BugCounts;
use crate::error::{Error, Result};

/// Mean of the defined per-difficulty APs.
pub fn overall_accuracy(aps: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = aps.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Positive when the corruption hurt.
pub fn corruption_error(oa_clean: f64, oa_corrupted: f64) -> f64 {
    oa_clean - oa_corrupted
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BugRates {
    pub td: f64,
    pub fc: f64,
    pub fd: f64,
    pub md: f64,
}

impl BugRates {
    pub fn sum(&self) -> f64 {
        self.td + self.fc + self.fd + self.md
    }
}

/// `None` without detections.
pub fn bug_rate(counts: &BugCounts) -> Option<BugRates> {
    let n = counts.total();
    if n == 0 {
        return None;
    }
    let n = n as f64;
    Some(BugRates {
        td: counts.td as f64 / n,
        fc: counts.fc as f64 / n,
        fd: counts.fd as f64 / n,
        md: counts.md as f64 / n,
    })
}

/// Per-category increase of the bug rate over the clean baseline.
pub fn corruption_risk(corrupted: &BugRates, clean: &BugRates) -> BugRates {
    BugRates {
        td: corrupted.td - clean.td,
        fc: corrupted.fc - clean.fc,
        fd: corrupted.fd - clean.fd,
        md: corrupted.md - clean.md,
    }
}

/// One value per (corruption, severity) cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeverityTable {
    pub cells: BTreeMap<(String, u8), f64>,
}

impl SeverityTable {
    pub fn insert(&mut self, corruption: impl Into<String>, severity: u8, value: f64) {
        self.cells.insert((corruption.into(), severity), value);
    }

    pub fn get(&self, corruption: &str, severity: u8) -> Option<f64> {
        self.cells.get(&(corruption.to_string(), severity)).copied()
    }

    /// Fills `corruptions x 1..=5` with `value`.
    pub fn constant(corruptions: &[&str], value: f64) -> Self {
        let mut t = SeverityTable::default();
        for c in corruptions {
            for s in 1..=5 {
                t.insert(*c, s, value);
            }
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableMean {
    pub value: f64,
    pub cells: usize,
    /// Set when some expected cells were missing and skipped.
    pub partial: bool,
}

/// Mean over `corruptions x 1..=5`. Missing cells are an error listing
/// them unless `allow_partial`, which averages what is present.
pub fn mean_corruption_error(table: &SeverityTable, corruptions: &[String], allow_partial: bool) -> Result<TableMean> {
    if corruptions.is_empty() {
        return Err(Error::InvalidArgument("mean over an empty corruption set".into()));
    }
    let mut missing = Vec::new();
    let mut sum = 0.0;
    let mut cells = 0;
    for c in corruptions {
        for s in 1..=5u8 {
            match table.get(c, s) {
                Some(v) => {
                    sum += v;
                    cells += 1;
                }
                None => missing.push((c.clone(), s)),
            }
        }
    }
    if !missing.is_empty() && !allow_partial {
        return Err(Error::IncompleteTable(missing));
    }
    if cells == 0 {
        return Err(Error::IncompleteTable(missing));
    }
    Ok(TableMean {
        value: sum / cells as f64,
        cells,
        partial: !missing.is_empty(),
    })
}

/// Same completeness rule as [`mean_corruption_error`].
pub fn mean_corruption_risk(table: &SeverityTable, corruptions: &[String], allow_partial: bool) -> Result<TableMean> {
    mean_corruption_error(table, corruptions, allow_partial)
}
