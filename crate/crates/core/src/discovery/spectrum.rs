use serde::{Deserialize, Serialize};

use crate::dataset::{AgeBucket, Formula};

use super::Candidate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAxes {
    pub gwp: AxisRange,
    pub ap: AxisRange,
    pub cbw: AxisRange,
    pub strength: AxisRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub gwp: f64,
    pub ap: f64,
    pub cbw: f64,
    pub predicted_strength: f64,
    pub formula: Formula,
}

/// Generated formulas in impact space coloured by predicted strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDocument {
    pub schema: String,
    pub bucket: AgeBucket,
    pub count: usize,
    /// Absent when there are no points.
    pub axes: Option<SpectrumAxes>,
    pub points: Vec<SpectrumPoint>,
}

impl SpectrumDocument {
    pub const SCHEMA: &'static str = "strength-spectrum/v1";
}

fn range(values: impl Iterator<Item = f64>) -> AxisRange {
    let (min, max) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    AxisRange { min, max }
}

pub fn strength_spectrum_export(candidates: &[Candidate], bucket: AgeBucket) -> SpectrumDocument {
    let points: Vec<SpectrumPoint> = candidates
        .iter()
        .map(|c| SpectrumPoint {
            gwp: c.predicted_impacts.gwp,
            ap: c.predicted_impacts.ap,
            cbw: c.predicted_impacts.cbw,
            predicted_strength: c.predicted_strength,
            formula: c.formula,
        })
        .collect();
    let axes = (!points.is_empty()).then(|| SpectrumAxes {
        gwp: range(points.iter().map(|p| p.gwp)),
        ap: range(points.iter().map(|p| p.ap)),
        cbw: range(points.iter().map(|p| p.cbw)),
        strength: range(points.iter().map(|p| p.predicted_strength)),
    });
    SpectrumDocument {
        schema: SpectrumDocument::SCHEMA.into(),
        bucket,
        count: points.len(),
        axes,
        points,
    }
}
