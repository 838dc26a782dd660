use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::AgeBucket;
use crate::{Error, Result};

pub const DEFAULT_HALF_WIDTH: f64 = 1.0;

/// A closed strength interval `center ± half_width` in MPa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrengthBand {
    pub center: f64,
    pub half_width: f64,
}

impl StrengthBand {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !center.is_finite() || !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::Config(format!(
                "invalid strength band {center}±{half_width}: half width must be finite and > 0"
            )));
        }
        Ok(StrengthBand { center, half_width })
    }

    pub fn contains(&self, strength: f64) -> bool {
        (strength - self.center).abs() <= self.half_width
    }
}

impl fmt::Display for StrengthBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}±{}", self.center, self.half_width)
    }
}

/// Strength bands to analyse, per age bucket.
///
/// Text form: `BUCKET:CENTER[/HALF],...;BUCKET:...`, e.g. `D7:30,40;D28:70/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan(pub BTreeMap<AgeBucket, Vec<StrengthBand>>);

impl BandPlan {
    /// The standard reduction bands: two per early bucket, four at 56 days, one at 90+.
    pub fn standard() -> Self {
        use AgeBucket::*;
        let centers: [(AgeBucket, &[f64]); 6] = [
            (Le3, &[30.0, 40.0]),
            (D7, &[30.0, 40.0]),
            (D14, &[20.0, 60.0]),
            (D28, &[70.0, 80.0]),
            (D56, &[40.0, 50.0, 70.0, 80.0]),
            (Ge90, &[80.0]),
        ];
        BandPlan(
            centers
                .into_iter()
                .map(|(b, cs)| {
                    let bands = cs
                        .iter()
                        .map(|&c| StrengthBand {
                            center: c,
                            half_width: DEFAULT_HALF_WIDTH,
                        })
                        .collect();
                    (b, bands)
                })
                .collect(),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgeBucket, StrengthBand)> + '_ {
        self.0.iter().flat_map(|(b, bands)| bands.iter().map(move |band| (*b, *band)))
    }

    pub fn buckets(&self) -> impl Iterator<Item = AgeBucket> + '_ {
        self.0.keys().copied()
    }
}

impl FromStr for BandPlan {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: String| Error::Config(format!("band spec: {m}"));
        let mut plan = BTreeMap::new();
        for group in s.split(';').map(str::trim).filter(|g| !g.is_empty()) {
            let (bucket, list) = group
                .split_once(':')
                .ok_or_else(|| bad(format!("expected BUCKET:CENTERS in {group:?}")))?;
            let bucket: AgeBucket = bucket.trim().parse().map_err(|e: Error| bad(e.to_string()))?;
            let mut bands = Vec::new();
            for item in list.split(',').map(str::trim) {
                let (c, h) = match item.split_once('/') {
                    Some((c, h)) => (c, Some(h)),
                    None => (item, None),
                };
                let num = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(format!("invalid number {t:?} in {group:?}")))
                };
                let center = num(c)?;
                let half = h.map(num).transpose()?.unwrap_or(DEFAULT_HALF_WIDTH);
                bands.push(StrengthBand::new(center, half)?);
            }
            if plan.insert(bucket, bands).is_some() {
                return Err(bad(format!("bucket {bucket} listed twice")));
            }
        }
        if plan.is_empty() {
            return Err(bad("no bands given".into()));
        }
        Ok(BandPlan(plan))
    }
}

impl fmt::Display for BandPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (bucket, bands)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{bucket}:")?;
            for (j, b) in bands.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}/{}", b.center, b.half_width)?;
            }
        }
        Ok(())
    }
}
