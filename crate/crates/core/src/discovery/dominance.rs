use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{AgeBucket, Dataset, ImpactVector};

use super::{Candidate, StrengthBand};

/// Best observed impacts among extant records of one bucket and band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceBaseline {
    pub bucket: AgeBucket,
    pub band: StrengthBand,
    pub gwp_min: f64,
    pub ap_min: f64,
    pub cbw_min: f64,
    pub count: usize,
}

impl DominanceBaseline {
    pub fn minima(&self) -> [f64; 3] {
        [self.gwp_min, self.ap_min, self.cbw_min]
    }
}

/// Per-dimension minima over every record (train and test) of `bucket`
/// whose measured strength is in `band`. `None` when the band is empty.
pub fn extant_baseline(dataset: &Dataset, bucket: AgeBucket, band: StrengthBand) -> Option<DominanceBaseline> {
    let mut min = [f64::INFINITY; 3];
    let mut count = 0;
    for r in dataset.records() {
        if r.bucket == bucket && band.contains(r.raw.strength_mpa) {
            count += 1;
            for (m, v) in min.iter_mut().zip(r.impacts.to_array()) {
                *m = m.min(v);
            }
        }
    }
    (count > 0).then_some(DominanceBaseline {
        bucket,
        band,
        gwp_min: min[0],
        ap_min: min[1],
        cbw_min: min[2],
        count,
    })
}

pub fn dominates(impacts: &ImpactVector, baseline: &DominanceBaseline) -> bool {
    impacts
        .to_array()
        .iter()
        .zip(baseline.minima())
        .all(|(v, m)| *v < m)
}

/// Candidates in the band that are strictly better than the baseline in all
/// three impact dimensions, in input order.
pub fn filter_dominating(
    candidates: &[Candidate],
    baseline: &DominanceBaseline,
    band: StrengthBand,
) -> Vec<Candidate> {
    candidates
        .iter()
        .filter(|c| band.contains(c.predicted_strength) && dominates(&c.predicted_impacts, baseline))
        .copied()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub bucket: AgeBucket,
    pub age_days: u32,
    pub band: StrengthBand,
    /// Extant records supporting the baseline; 0 when the band is empty.
    pub n_extant: usize,
    pub n_better: usize,
    /// Mean percentage reductions; absent when undefined.
    pub gwp_pct: Option<f64>,
    pub ap_pct: Option<f64>,
    pub cbw_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub schema: String,
    pub rows: Vec<ReductionRow>,
}

pub fn reduction_pct(baseline: f64, predicted: f64) -> Option<f64> {
    (baseline != 0.0).then(|| 100.0 * (baseline - predicted) / baseline)
}

/// Average reduction of a filtered set against its baseline.
pub fn reduction_row(
    bucket: AgeBucket,
    band: StrengthBand,
    baseline: Option<&DominanceBaseline>,
    filtered: &[Candidate],
) -> ReductionRow {
    let mut row = ReductionRow {
        bucket,
        age_days: bucket.center_days(),
        band,
        n_extant: baseline.map_or(0, |b| b.count),
        n_better: filtered.len(),
        gwp_pct: None,
        ap_pct: None,
        cbw_pct: None,
    };
    let Some(base) = baseline else {
        row.n_better = 0;
        return row;
    };
    if filtered.is_empty() {
        return row;
    }
    let pct: Vec<Option<f64>> = (0..3)
        .map(|d| {
            let m = base.minima()[d];
            let total = filtered
                .iter()
                .map(|c| reduction_pct(m, c.predicted_impacts.to_array()[d]))
                .sum::<Option<f64>>()?;
            Some(total / filtered.len() as f64)
        })
        .collect();
    row.gwp_pct = pct[0];
    row.ap_pct = pct[1];
    row.cbw_pct = pct[2];
    row
}

impl ReductionReport {
    pub const SCHEMA: &'static str = "reduction-report/v1";

    pub fn new(rows: Vec<ReductionRow>) -> Self {
        ReductionReport {
            schema: Self::SCHEMA.into(),
            rows,
        }
    }

    /// One line per row; undefined percentages are empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("age,bucket,strength_band,gwp_pct,ap_pct,cbw_pct,n_better,n_extant\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.age_days,
                r.bucket,
                r.band,
                opt(r.gwp_pct),
                opt(r.ap_pct),
                opt(r.cbw_pct),
                r.n_better,
                r.n_extant
            );
        }
        out
    }
}
