//! Concrete mix records, impact labelling, age buckets, scaling and splits.

mod bucket;
mod factors;
mod normalize;
mod split;
mod uci;

pub use bucket::{bucket_age, AgeBucket};
pub use factors::{compute_impacts, FactorTable, ImpactFactors, ImpactVector};
pub use normalize::{Column, ColumnRange, NormalizationSpec};
pub use split::{split, SplitRole};
pub use uci::{
    parse_labeled_csv, parse_uci_csv, write_labeled_csv, write_uci_csv, LABELED_HEADER, UCI_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Canonical constituent names, in UCI column order.
pub const CONSTITUENTS: [&str; 7] = [
    "cement",
    "blast_furnace_slag",
    "fly_ash",
    "water",
    "superplasticizer",
    "coarse_aggregate",
    "fine_aggregate",
];

/// Constituent amounts of one cubic metre of concrete, kg per m³.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Formula {
    pub cement: f64,
    pub blast_furnace_slag: f64,
    pub fly_ash: f64,
    pub water: f64,
    pub superplasticizer: f64,
    pub coarse_aggregate: f64,
    pub fine_aggregate: f64,
}

impl Formula {
    pub fn from_array(a: [f64; 7]) -> Self {
        Formula {
            cement: a[0],
            blast_furnace_slag: a[1],
            fly_ash: a[2],
            water: a[3],
            superplasticizer: a[4],
            coarse_aggregate: a[5],
            fine_aggregate: a[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
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

    /// Checks the non-negativity and finiteness invariants, naming the first
    /// offending constituent.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in CONSTITUENTS.iter().zip(self.to_array()) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} = {v}")));
            }
            if v < 0.0 {
                return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// One row of the UCI table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub formula: Formula,
    pub age_days: u32,
    pub strength_mpa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub raw: RawRecord,
    pub impacts: ImpactVector,
    pub bucket: AgeBucket,
}

impl LabeledRecord {
    pub fn label(raw: RawRecord, factors: &FactorTable) -> Result<Self> {
        Ok(LabeledRecord {
            impacts: compute_impacts(&raw.formula, factors),
            bucket: bucket_age(raw.age_days)?,
            raw,
        })
    }

    /// Value of a normalisable column for this record.
    pub fn column(&self, column: Column) -> f64 {
        match column {
            Column::Constituent(i) => self.raw.formula.to_array()[i as usize],
            Column::Age => f64::from(self.raw.age_days),
            Column::Strength => self.raw.strength_mpa,
            Column::Gwp => self.impacts.gwp,
            Column::Ap => self.impacts.ap,
            Column::Cbw => self.impacts.cbw,
        }
    }
}

/// Labelled records with a fitted normalisation and a train/test assignment.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<LabeledRecord>,
    normalization: NormalizationSpec,
    roles: Vec<SplitRole>,
}

impl Dataset {
    /// Labels `raw` with `factors`, splits with stratification by age bucket
    /// and fits the normalisation on the training rows.
    pub fn build(
        raw: &[RawRecord],
        factors: &FactorTable,
        test_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let records = raw
            .iter()
            .map(|r| LabeledRecord::label(*r, factors))
            .collect::<Result<Vec<_>>>()?;
        let (_, test) = split(&records, test_fraction, seed)?;
        let mut roles = vec![SplitRole::Train; records.len()];
        for i in test {
            roles[i] = SplitRole::Test;
        }
        Self::from_parts(records, roles)
    }

    /// Reassembles a dataset from labelled records and a stored split,
    /// refitting the normalisation on the training rows.
    pub fn from_parts(records: Vec<LabeledRecord>, roles: Vec<SplitRole>) -> Result<Self> {
        if roles.len() != records.len() {
            return Err(Error::Shape(format!(
                "{} split roles for {} records",
                roles.len(),
                records.len()
            )));
        }
        let mask: Vec<bool> = roles.iter().map(|r| *r == SplitRole::Train).collect();
        let normalization = NormalizationSpec::fit(&records, &mask)?;
        Ok(Dataset {
            records,
            normalization,
            roles,
        })
    }

    pub fn records(&self) -> &[LabeledRecord] {
        &self.records
    }

    pub fn normalization(&self) -> &NormalizationSpec {
        &self.normalization
    }

    pub fn roles(&self) -> &[SplitRole] {
        &self.roles
    }

    pub fn train(&self) -> impl Iterator<Item = &LabeledRecord> {
        self.with_role(SplitRole::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &LabeledRecord> {
        self.with_role(SplitRole::Test)
    }

    fn with_role(&self, role: SplitRole) -> impl Iterator<Item = &LabeledRecord> {
        self.records
            .iter()
            .zip(&self.roles)
            .filter(move |(_, r)| **r == role)
            .map(|(rec, _)| rec)
    }

    /// Normalised constituent vector (the generative target).
    pub fn formula01(&self, formula: &Formula) -> [f64; 7] {
        let a = formula.to_array();
        std::array::from_fn(|i| self.normalization.normalize(a[i], Column::Constituent(i as u8)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(cement: f64, age: u32, strength: f64) -> RawRecord {
        RawRecord {
            formula: Formula {
                cement,
                water: 150.0,
                ..Default::default()
            },
            age_days: age,
            strength_mpa: strength,
        }
    }

    #[test]
    fn validate_rejects_negative_and_nan() {
        let mut f = Formula::default();
        assert!(f.validate().is_ok());
        f.fly_ash = -1.0;
        assert!(matches!(f.validate(), Err(Error::Domain(m)) if m.contains("fly_ash")));
        f.fly_ash = f64::NAN;
        assert!(matches!(f.validate(), Err(Error::NonFinite(_))));
    }

    #[test]
    fn dataset_roles_are_disjoint_and_exhaustive() {
        let raw: Vec<_> = (0..40)
            .map(|i| rec(100.0 + i as f64, [3, 7, 28, 90][i % 4], 20.0 + i as f64))
            .collect();
        let ds = Dataset::build(&raw, &FactorTable::zero(), 0.25, 42).unwrap();
        assert_eq!(ds.train().count() + ds.test().count(), 40);
        assert_eq!(ds.test().count(), 10);
        for b in [AgeBucket::Le3, AgeBucket::D7, AgeBucket::D28, AgeBucket::Ge90] {
            assert!(ds.test().any(|r| r.bucket == b));
            assert!(ds.train().any(|r| r.bucket == b));
        }
    }

    #[test]
    fn normalization_uses_train_rows_only() {
        let raw: Vec<_> = (0..20).map(|i| rec(i as f64 * 10.0, 28, 30.0)).collect();
        let ds = Dataset::build(&raw, &FactorTable::zero(), 0.2, 1).unwrap();
        let train_max = ds
            .train()
            .map(|r| r.raw.formula.cement)
            .fold(f64::MIN, f64::max);
        let range = ds.normalization().range(Column::Constituent(0));
        assert_eq!(range.max, train_max);
    }
}
