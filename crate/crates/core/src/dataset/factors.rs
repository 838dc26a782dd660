//! Linear life-cycle impact model.
//!
//! Each constituent carries per-kg factors for global warming potential
//! (kg CO2-eq), acidification potential (kg SO2-eq) and concrete batching
//! water (m³); a mix's impacts are the amount-weighted sum plus an optional
//! fixed per-m³ process overhead.

use serde::{Deserialize, Serialize};

use super::{Formula, CONSTITUENTS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactVector {
    pub gwp: f64,
    pub ap: f64,
    pub cbw: f64,
}

impl ImpactVector {
    pub fn to_array(&self) -> [f64; 3] {
        [self.gwp, self.ap, self.cbw]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ImpactVector {
            gwp: a[0],
            ap: a[1],
            cbw: a[2],
        }
    }
}

/// Per-kg factors of one constituent (or the per-m³ overhead).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactFactors {
    pub gwp: f64,
    pub ap: f64,
    pub cbw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstituentFactors {
    pub cement: ImpactFactors,
    pub blast_furnace_slag: ImpactFactors,
    pub fly_ash: ImpactFactors,
    pub water: ImpactFactors,
    pub superplasticizer: ImpactFactors,
    pub coarse_aggregate: ImpactFactors,
    pub fine_aggregate: ImpactFactors,
}

impl ConstituentFactors {
    fn to_array(self) -> [ImpactFactors; 7] {
        [
            self.cement,
            self.blast_furnace_slag,
            self.fly_ash,
            self.water,
            self.superplasticizer,
            self.coarse_aggregate,
            self.fine_aggregate,
        ]
    }
}

/// Factor table as stored on disk:
///
/// ```json
/// {"constituents": {"cement": {"gwp": 0.9, "ap": 0.002, "cbw": 0.0}, ...},
///  "overhead": {"gwp": 5.0, "ap": 0.01, "cbw": 0.02}}
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorTable {
    pub constituents: ConstituentFactors,
    #[serde(default)]
    pub overhead: ImpactFactors,
}

impl FactorTable {
    /// All-zero table.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let table: FactorTable = serde_json::from_slice(bytes)?;
        table.validate()?;
        Ok(table)
    }

    pub fn per_constituent(&self) -> [ImpactFactors; 7] {
        self.constituents.to_array()
    }

    pub fn validate(&self) -> Result<()> {
        let named = CONSTITUENTS
            .iter()
            .copied()
            .zip(self.per_constituent())
            .chain(std::iter::once(("overhead", self.overhead)));
        for (name, f) in named {
            for (dim, v) in [("gwp", f.gwp), ("ap", f.ap), ("cbw", f.cbw)] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Config(format!(
                        "factor {name}.{dim} must be finite and >= 0, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Impacts of one m³ of `formula`. Summation runs in constituent declaration
/// order, then adds the overhead.
pub fn compute_impacts(formula: &Formula, factors: &FactorTable) -> ImpactVector {
    let mut out = ImpactVector::default();
    for (amount, f) in formula.to_array().into_iter().zip(factors.per_constituent()) {
        out.gwp += amount * f.gwp;
        out.ap += amount * f.ap;
        out.cbw += amount * f.cbw;
    }
    out.gwp += factors.overhead.gwp;
    out.ap += factors.overhead.ap;
    out.cbw += factors.overhead.cbw;
    out
}
