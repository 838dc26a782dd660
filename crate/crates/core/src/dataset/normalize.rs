//! Min-max scaling to `[0, 1]`, fitted on training rows.

use serde::{Deserialize, Serialize};

use super::{LabeledRecord, CONSTITUENTS};
use crate::{Error, Result};

/// One of the twelve numeric columns of a labelled record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Column {
    /// Index into [`CONSTITUENTS`].
    Constituent(u8),
    Age,
    Strength,
    Gwp,
    Ap,
    Cbw,
}

impl Column {
    pub const COUNT: usize = 12;

    pub const ALL: [Column; 12] = [
        Column::Constituent(0),
        Column::Constituent(1),
        Column::Constituent(2),
        Column::Constituent(3),
        Column::Constituent(4),
        Column::Constituent(5),
        Column::Constituent(6),
        Column::Age,
        Column::Strength,
        Column::Gwp,
        Column::Ap,
        Column::Cbw,
    ];

    pub const IMPACTS: [Column; 3] = [Column::Gwp, Column::Ap, Column::Cbw];

    pub fn index(self) -> usize {
        match self {
            Column::Constituent(i) => i as usize,
            Column::Age => 7,
            Column::Strength => 8,
            Column::Gwp => 9,
            Column::Ap => 10,
            Column::Cbw => 11,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Column::Constituent(i) => CONSTITUENTS[i as usize],
            Column::Age => "age",
            Column::Strength => "strength",
            Column::Gwp => "gwp",
            Column::Ap => "ap",
            Column::Cbw => "cbw",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Column::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Domain(format!("unknown column {name:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRange {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

impl ColumnRange {
    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Per-column `(min, max)` for all twelve columns in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationSpec {
    columns: Vec<ColumnRange>,
}

impl NormalizationSpec {
    /// Fits column ranges over the records where `train_mask` is true.
    pub fn fit(records: &[LabeledRecord], train_mask: &[bool]) -> Result<Self> {
        if train_mask.len() != records.len() {
            return Err(Error::Shape(format!(
                "train mask has {} entries for {} records",
                train_mask.len(),
                records.len()
            )));
        }
        let mut mins = [f64::INFINITY; Column::COUNT];
        let mut maxs = [f64::NEG_INFINITY; Column::COUNT];
        let mut seen = 0usize;
        for rec in records.iter().zip(train_mask).filter(|(_, m)| **m).map(|(r, _)| r) {
            seen += 1;
            for col in Column::ALL {
                let v = rec.column(col);
                let i = col.index();
                mins[i] = mins[i].min(v);
                maxs[i] = maxs[i].max(v);
            }
        }
        if seen == 0 {
            return Err(Error::Empty("no training records to fit normalisation".into()));
        }
        let columns = Column::ALL
            .iter()
            .map(|c| ColumnRange {
                name: c.name().to_string(),
                min: mins[c.index()],
                max: maxs[c.index()],
            })
            .collect();
        Ok(NormalizationSpec { columns })
    }

    /// Builds a spec from explicit ranges in canonical column order.
    pub fn from_ranges(ranges: [(f64, f64); 12]) -> Result<Self> {
        let spec = NormalizationSpec {
            columns: Column::ALL
                .iter()
                .zip(ranges)
                .map(|(c, (min, max))| ColumnRange {
                    name: c.name().to_string(),
                    min,
                    max,
                })
                .collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.len() != Column::COUNT {
            return Err(Error::Shape(format!(
                "normalisation needs {} columns, got {}",
                Column::COUNT,
                self.columns.len()
            )));
        }
        for (c, r) in Column::ALL.iter().zip(&self.columns) {
            if r.name != c.name() {
                return Err(Error::Shape(format!(
                    "expected column {:?} at position {}, found {:?}",
                    c.name(),
                    c.index(),
                    r.name
                )));
            }
            if !r.min.is_finite() || !r.max.is_finite() || r.max < r.min {
                return Err(Error::Domain(format!(
                    "column {}: invalid range [{}, {}]",
                    r.name, r.min, r.max
                )));
            }
        }
        Ok(())
    }

    pub fn range(&self, column: Column) -> &ColumnRange {
        &self.columns[column.index()]
    }

    pub fn ranges(&self) -> &[ColumnRange] {
        &self.columns
    }

    /// Scales `value` into `[0, 1]`, clamping out-of-range values. Constant
    /// columns map to 0.5.
    pub fn normalize(&self, value: f64, column: Column) -> f64 {
        let r = self.range(column);
        if r.is_constant() {
            0.5
        } else {
            ((value - r.min) / r.width()).clamp(0.0, 1.0)
        }
    }

    /// Affine inverse of [`normalize`](Self::normalize), without clamping.
    /// Constant columns map back to their single value.
    pub fn denormalize(&self, unit: f64, column: Column) -> f64 {
        let r = self.range(column);
        if r.is_constant() {
            r.min
        } else {
            r.min + unit * r.width()
        }
    }

    pub fn normalize_named(&self, value: f64, column: &str) -> Result<f64> {
        Ok(self.normalize(value, Column::from_name(column)?))
    }

    pub fn denormalize_named(&self, unit: f64, column: &str) -> Result<f64> {
        Ok(self.denormalize(unit, Column::from_name(column)?))
    }
}
