use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Curing-age groups used for per-age strength modelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeBucket {
    #[serde(rename = "LE3")]
    Le3,
    #[serde(rename = "D7")]
    D7,
    #[serde(rename = "D14")]
    D14,
    #[serde(rename = "D28")]
    D28,
    #[serde(rename = "D56")]
    D56,
    #[serde(rename = "GE90")]
    Ge90,
}

impl AgeBucket {
    pub const ALL: [AgeBucket; 6] = [
        AgeBucket::Le3,
        AgeBucket::D7,
        AgeBucket::D14,
        AgeBucket::D28,
        AgeBucket::D56,
        AgeBucket::Ge90,
    ];

    /// Representative age in days.
    pub fn center_days(self) -> u32 {
        match self {
            AgeBucket::Le3 => 3,
            AgeBucket::D7 => 7,
            AgeBucket::D14 => 14,
            AgeBucket::D28 => 28,
            AgeBucket::D56 => 56,
            AgeBucket::Ge90 => 90,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgeBucket::Le3 => "LE3",
            AgeBucket::D7 => "D7",
            AgeBucket::D14 => "D14",
            AgeBucket::D28 => "D28",
            AgeBucket::D56 => "D56",
            AgeBucket::Ge90 => "GE90",
        }
    }

    /// Age label as printed in report tables ("<=3", "7", ..., ">=90").
    pub fn label(self) -> &'static str {
        match self {
            AgeBucket::Le3 => "<=3",
            AgeBucket::D7 => "7",
            AgeBucket::D14 => "14",
            AgeBucket::D28 => "28",
            AgeBucket::D56 => "56",
            AgeBucket::Ge90 => ">=90",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AgeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgeBucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgeBucket::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Domain(format!("unknown age bucket {s:?}")))
    }
}

/// Maps a curing age to its bucket. Off-grid ages go to the nearest bucket
/// centre; equidistant ages go to the smaller centre.
pub fn bucket_age(age_days: u32) -> Result<AgeBucket> {
    if age_days < 1 {
        return Err(Error::Domain("age must be at least 1 day".into()));
    }
    if age_days <= 3 {
        return Ok(AgeBucket::Le3);
    }
    if age_days >= 90 {
        return Ok(AgeBucket::Ge90);
    }
    let mut best = AgeBucket::Le3;
    let mut best_dist = u32::MAX;
    for b in AgeBucket::ALL {
        let d = b.center_days().abs_diff(age_days);
        // strict < keeps the smaller centre on ties
        if d < best_dist {
            best = b;
            best_dist = d;
        }
    }
    Ok(best)
}
