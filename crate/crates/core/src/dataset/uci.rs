//! CSV readers and writers for the raw UCI table and the labelled export.

use std::fmt::Write as _;

use super::{bucket_age, AgeBucket, Formula, ImpactVector, LabeledRecord, RawRecord};
use crate::{Error, Result};

pub const UCI_HEADER: [&str; 9] = [
    "cement",
    "blast_furnace_slag",
    "fly_ash",
    "water",
    "superplasticizer",
    "coarse_aggregate",
    "fine_aggregate",
    "age",
    "compressive_strength",
];

pub const LABELED_HEADER: [&str; 13] = [
    "cement",
    "blast_furnace_slag",
    "fly_ash",
    "water",
    "superplasticizer",
    "coarse_aggregate",
    "fine_aggregate",
    "age",
    "compressive_strength",
    "gwp",
    "ap",
    "cbw",
    "bucket",
];

/// Reads rows of `width` fields after one header row. The header's own
/// content is not interpreted (the UCI distribution uses long descriptive
/// names). Row numbers in errors are 1-based over data rows; row 0 is the
/// header.
fn read_rows(bytes: &[u8], width: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, rec) in reader.byte_records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            row: i,
            message: e.to_string(),
        })?;
        if !header_seen {
            header_seen = true;
            if rec.len() != width {
                return Err(Error::Parse {
                    row: 0,
                    message: format!("header has {} columns, expected {width}", rec.len()),
                });
            }
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                row: i,
                message: format!("expected {width} columns, found {}", rec.len()),
            });
        }
        let fields = rec
            .iter()
            .map(|f| {
                std::str::from_utf8(f)
                    .map(str::to_owned)
                    .map_err(|_| Error::Parse {
                        row: i,
                        message: "invalid UTF-8".into(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((i, fields));
    }
    if !header_seen {
        return Err(Error::Empty("CSV input has no header row".into()));
    }
    Ok(rows)
}

fn number(row: usize, name: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::Parse {
        row,
        message: format!("{name}: not a number: {cell:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("{name}: non-finite value {cell:?}"),
        });
    }
    Ok(v)
}

fn raw_from_fields(row: usize, fields: &[String]) -> Result<RawRecord> {
    let mut amounts = [0.0; 7];
    for (k, amount) in amounts.iter_mut().enumerate() {
        let v = number(row, UCI_HEADER[k], &fields[k])?;
        if v < 0.0 {
            return Err(Error::Parse {
                row,
                message: format!("{}: negative amount {v}", UCI_HEADER[k]),
            });
        }
        *amount = v;
    }
    let age = number(row, "age", &fields[7])?;
    if age < 1.0 || age.fract() != 0.0 || age > f64::from(u32::MAX) {
        return Err(Error::Parse {
            row,
            message: format!("age must be a positive whole number of days, got {age}"),
        });
    }
    let strength = number(row, "compressive_strength", &fields[8])?;
    if strength <= 0.0 {
        return Err(Error::Parse {
            row,
            message: format!("compressive_strength must be > 0, got {strength}"),
        });
    }
    Ok(RawRecord {
        formula: Formula::from_array(amounts),
        age_days: age as u32,
        strength_mpa: strength,
    })
}

/// Parses the UCI concrete table: one header row, then nine numeric columns
/// (seven constituents in kg/m³, age in days, strength in MPa). Row order is
/// preserved.
pub fn parse_uci_csv(bytes: &[u8]) -> Result<Vec<RawRecord>> {
    read_rows(bytes, UCI_HEADER.len())?
        .into_iter()
        .map(|(row, fields)| raw_from_fields(row, &fields))
        .collect()
}

/// Parses the labelled export written by [`write_labeled_csv`]. The bucket
/// column must agree with the age column.
pub fn parse_labeled_csv(bytes: &[u8]) -> Result<Vec<LabeledRecord>> {
    read_rows(bytes, LABELED_HEADER.len())?
        .into_iter()
        .map(|(row, fields)| {
            let raw = raw_from_fields(row, &fields[..9])?;
            let mut impacts = [0.0; 3];
            for (k, v) in impacts.iter_mut().enumerate() {
                *v = number(row, LABELED_HEADER[9 + k], &fields[9 + k])?;
                if *v < 0.0 {
                    return Err(Error::Parse {
                        row,
                        message: format!("{}: negative impact {v}", LABELED_HEADER[9 + k]),
                    });
                }
            }
            let bucket: AgeBucket = fields[12].parse().map_err(|e: Error| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            let expected = bucket_age(raw.age_days)?;
            if bucket != expected {
                return Err(Error::Parse {
                    row,
                    message: format!(
                        "bucket {bucket} disagrees with age {} ({expected})",
                        raw.age_days
                    ),
                });
            }
            Ok(LabeledRecord {
                raw,
                impacts: ImpactVector::from_array(impacts),
                bucket,
            })
        })
        .collect()
}

fn push_raw(out: &mut String, r: &RawRecord) {
    for v in r.formula.to_array() {
        let _ = write!(out, "{v},");
    }
    let _ = write!(out, "{},{}", r.age_days, r.strength_mpa);
}

/// Writes records in UCI column order. Numbers use the shortest decimal form
/// that parses back to the identical `f64`.
pub fn write_uci_csv(records: &[RawRecord]) -> String {
    let mut out = UCI_HEADER.join(",");
    out.push('\n');
    for r in records {
        push_raw(&mut out, r);
        out.push('\n');
    }
    out
}

pub fn write_labeled_csv(records: &[LabeledRecord]) -> String {
    let mut out = LABELED_HEADER.join(",");
    out.push('\n');
    for r in records {
        push_raw(&mut out, &r.raw);
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            r.impacts.gwp, r.impacts.ap, r.impacts.cbw, r.bucket
        );
    }
    out
}
