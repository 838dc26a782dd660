//! Request body decoding with field-level validation errors.
//!
//! Bodies are parsed into a JSON value first so that each problem can be
//! reported against the offending field: missing or negative values are
//! 400s, non-finite numbers (overflowing literals or `"NaN"`-style strings)
//! are 422s.

use axum::http::StatusCode;
use ecomix_core::dataset::{AgeBucket, Formula, CONSTITUENTS};
use serde_json::{Map, Value};

use crate::ApiError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictRequest {
    pub formula: Formula,
    pub age_days: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateRequest {
    pub bucket: AgeBucket,
    pub strength_target_mpa: f64,
    pub count: u64,
    pub seed: Option<u64>,
    /// Physical GWP, AP and CBW targets.
    pub impact_targets: [Option<f64>; 3],
}

const NON_FINITE_WORDS: [&str; 6] = ["nan", "inf", "+inf", "-inf", "infinity", "-infinity"];

fn non_finite(field: &str) -> ApiError {
    ApiError::new(
        StatusCode::UNPROCESSABLE_ENTITY,
        "non_finite",
        format!("{field} must be a finite number"),
    )
    .with_field(field)
}

fn parse_object(body: &[u8]) -> Result<Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::bad_request("invalid_body", "request body must be a JSON object")),
        Err(e) if e.to_string().contains("number out of range") => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "non_finite",
            format!("non-finite number in request body: {e}"),
        )),
        Err(e) => Err(ApiError::bad_request("invalid_json", e.to_string())),
    }
}

fn number(v: Option<&Value>, field: &str) -> Result<Option<f64>, ApiError> {
    match v {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => match n.as_f64() {
            Some(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(non_finite(field)),
        },
        Some(Value::String(s)) if NON_FINITE_WORDS.contains(&s.trim().to_ascii_lowercase().as_str()) => {
            Err(non_finite(field))
        }
        Some(_) => Err(ApiError::bad_request("invalid_type", format!("{field} must be a number")).with_field(field)),
    }
}

fn required(v: Option<&Value>, field: &str) -> Result<f64, ApiError> {
    number(v, field)?.ok_or_else(|| {
        ApiError::bad_request("missing_field", format!("{field} is required")).with_field(field)
    })
}

fn non_negative(x: f64, field: &str) -> Result<f64, ApiError> {
    if x < 0.0 {
        return Err(ApiError::bad_request("negative_value", format!("{field} must be >= 0, got {x}")).with_field(field));
    }
    Ok(x)
}

fn integer(x: f64, field: &str, min: f64, max: f64) -> Result<u64, ApiError> {
    if x.fract() != 0.0 || x < min || x > max {
        return Err(ApiError::bad_request(
            "invalid_value",
            format!("{field} must be an integer in [{min}, {max}], got {x}"),
        )
        .with_field(field));
    }
    Ok(x as u64)
}

pub fn parse_predict(body: &[u8]) -> Result<PredictRequest, ApiError> {
    let obj = parse_object(body)?;
    let formula = match obj.get("formula") {
        Some(Value::Object(f)) => f,
        Some(_) => {
            return Err(ApiError::bad_request("invalid_type", "formula must be an object").with_field("formula"))
        }
        None => return Err(ApiError::bad_request("missing_field", "formula is required").with_field("formula")),
    };
    let mut amounts = [0.0; 7];
    for (a, name) in amounts.iter_mut().zip(CONSTITUENTS) {
        let field = format!("formula.{name}");
        *a = non_negative(required(formula.get(name), &field)?, &field)?;
    }
    let age = required(obj.get("age_days"), "age_days")?;
    let age_days = integer(age, "age_days", 1.0, u32::MAX as f64)? as u32;
    Ok(PredictRequest {
        formula: Formula::from_array(amounts),
        age_days,
    })
}

pub fn parse_generate(body: &[u8]) -> Result<GenerateRequest, ApiError> {
    let obj = parse_object(body)?;
    let bucket = match obj.get("bucket") {
        Some(Value::String(s)) => s.parse::<AgeBucket>().map_err(|_| {
            ApiError::bad_request("unknown_bucket", format!("unknown age bucket {s:?}")).with_field("bucket")
        })?,
        Some(_) => return Err(ApiError::bad_request("invalid_type", "bucket must be a string").with_field("bucket")),
        None => return Err(ApiError::bad_request("missing_field", "bucket is required").with_field("bucket")),
    };
    let strength = required(obj.get("strength_target_mpa"), "strength_target_mpa")?;
    let strength_target_mpa = non_negative(strength, "strength_target_mpa")?;
    let count = integer(required(obj.get("count"), "count")?, "count", 0.0, u64::MAX as f64)?;
    let seed = number(obj.get("seed"), "seed")?
        .map(|s| integer(s, "seed", 0.0, u64::MAX as f64))
        .transpose()?;
    let mut impact_targets = [None; 3];
    match obj.get("impact_targets") {
        None | Some(Value::Null) => {}
        Some(Value::Object(t)) => {
            for (slot, name) in impact_targets.iter_mut().zip(["gwp", "ap", "cbw"]) {
                let field = format!("impact_targets.{name}");
                *slot = number(t.get(name), &field)?.map(|x| non_negative(x, &field)).transpose()?;
            }
        }
        Some(_) => {
            return Err(ApiError::bad_request("invalid_type", "impact_targets must be an object")
                .with_field("impact_targets"))
        }
    }
    Ok(GenerateRequest {
        bucket,
        strength_target_mpa,
        count,
        seed,
        impact_targets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FORMULA: &str = r#"{"cement":540,"blast_furnace_slag":0,"fly_ash":0,"water":162,"superplasticizer":2.5,"coarse_aggregate":1040,"fine_aggregate":676}"#;

    #[test]
    fn predict_valid_and_invalid() {
        let ok = parse_predict(format!(r#"{{"formula":{FORMULA},"age_days":28}}"#).as_bytes()).unwrap();
        assert_eq!(ok.age_days, 28);
        assert_eq!(ok.formula.cement, 540.0);

        let neg = FORMULA.replace("\"water\":162", "\"water\":-1");
        let e = parse_predict(format!(r#"{{"formula":{neg},"age_days":28}}"#).as_bytes()).unwrap_err();
        assert_eq!((e.status, e.field.as_deref()), (StatusCode::BAD_REQUEST, Some("formula.water")));

        let missing = FORMULA.replace("\"fly_ash\":0,", "");
        let e = parse_predict(format!(r#"{{"formula":{missing},"age_days":28}}"#).as_bytes()).unwrap_err();
        assert_eq!((e.code, e.field.as_deref()), ("missing_field", Some("formula.fly_ash")));

        let e = parse_predict(format!(r#"{{"formula":{FORMULA}}}"#).as_bytes()).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("age_days"));

        for bad in ["1e999", "-1e400", "\"NaN\"", "\"Infinity\""] {
            let body = format!(r#"{{"formula":{},"age_days":28}}"#, FORMULA.replace("540", bad));
            let e = parse_predict(body.as_bytes()).unwrap_err();
            assert_eq!(e.status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        }
        for age in ["0", "2.5", "-3"] {
            let e = parse_predict(format!(r#"{{"formula":{FORMULA},"age_days":{age}}}"#).as_bytes()).unwrap_err();
            assert_eq!(e.status, StatusCode::BAD_REQUEST, "{age}");
        }
        assert_eq!(parse_predict(b"[1,2]").unwrap_err().code, "invalid_body");
        assert_eq!(parse_predict(b"{").unwrap_err().code, "invalid_json");
    }

    #[test]
    fn generate_valid_and_invalid() {
        let r = parse_generate(br#"{"bucket":"D7","strength_target_mpa":30,"count":5,"seed":9,"impact_targets":{"gwp":250}}"#).unwrap();
        assert_eq!(r.bucket, AgeBucket::D7);
        assert_eq!(r.seed, Some(9));
        assert_eq!(r.impact_targets, [Some(250.0), None, None]);
        let e = parse_generate(br#"{"bucket":"D8","strength_target_mpa":30,"count":5}"#).unwrap_err();
        assert_eq!((e.code, e.status), ("unknown_bucket", StatusCode::BAD_REQUEST));
        let e = parse_generate(br#"{"bucket":"D7","strength_target_mpa":30,"count":-1}"#).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("count"));
        let e = parse_generate(br#"{"bucket":"D7","strength_target_mpa":"nan","count":1}"#).unwrap_err();
        assert_eq!(e.status, StatusCode::UNPROCESSABLE_ENTITY);
    }
}
