use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corruption intensity. Level 0 is the clean identity for every kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Severity(u8);

impl Severity {
    pub const CLEAN: Severity = Severity(0);
    pub const MAX: u8 = 5;

    pub fn new(level: u8) -> Result<Self> {
        if level > Self::MAX {
            return Err(Error::InvalidArgument(format!(
                "severity {level} outside 0..={}",
                Self::MAX
            )));
        }
        Ok(Severity(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_clean(self) -> bool {
        self.0 == 0
    }

    pub fn all() -> impl Iterator<Item = Severity> {
        (0..=Self::MAX).map(Severity)
    }

    /// Levels 1..=5.
    pub fn corrupted() -> impl Iterator<Item = Severity> {
        (1..=Self::MAX).map(Severity)
    }
}

impl TryFrom<u8> for Severity {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Severity::new(v)
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.0
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
