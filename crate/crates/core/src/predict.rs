//! Calibrated MAC for countries without reference values, and the
//! prediction table and map outputs.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::domain::{CountryRef, Iso2, Sex};
use crate::groundtruth::GroundTruthRecord;
use crate::indicators::MacEstimate;
use crate::io::atomic_write;
use crate::stats::{CalibrationModel, StatsError};

/// Coverage of the reported prediction intervals.
pub const INTERVAL_LEVEL: f64 = 0.95;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("calibration model is not fitted")]
    UnfittedModel,
    #[error("nothing to emit")]
    EmptyInput,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("io error on {path}: {error}")]
    Io { path: String, error: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub country: CountryRef,
    pub sex: Sex,
    pub mac_fb: f64,
    pub mac_predicted: f64,
    pub interval_low: f64,
    pub interval_high: f64,
}

/// Predicts reference MAC for every eligible estimate of `model_sex` whose
/// (country, sex) has no reference record. Output is in ISO code order.
pub fn predict_missing(
    model: &CalibrationModel,
    model_sex: Sex,
    estimates: &[MacEstimate],
    truth: &[GroundTruthRecord],
) -> Result<Vec<Prediction>, ReportError> {
    if !model.is_fitted() {
        return Err(ReportError::UnfittedModel);
    }
    let observed: BTreeSet<(Iso2, Sex)> = truth.iter().map(|t| (t.country.iso2, t.sex)).collect();
    let mut out = Vec::new();
    for e in estimates.iter().filter(|e| e.sex == model_sex) {
        let Some(mac_fb) = e.eligible_mac() else { continue };
        if observed.contains(&(e.country.iso2, e.sex)) {
            continue;
        }
        let mac_predicted = model.predict(mac_fb);
        let half = model.interval_half_width(mac_fb, INTERVAL_LEVEL)?;
        out.push(Prediction {
            country: e.country.clone(),
            sex: e.sex,
            mac_fb,
            mac_predicted,
            interval_low: mac_predicted - half,
            interval_high: mac_predicted + half,
        });
    }
    out.sort_by_key(|p| (p.country.iso2, p.sex));
    Ok(out)
}

/// `iso2,sex,mac_fb,mac_predicted,pi_low,pi_high`, preceded by `header`
/// comment lines.
pub fn predictions_csv(predictions: &[Prediction], header: &str) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iso2", "sex", "mac_fb", "mac_predicted", "pi_low", "pi_high"]).expect("in-memory write");
    for p in predictions {
        w.write_record([
            p.country.iso2.to_string(),
            p.sex.to_string(),
            p.mac_fb.to_string(),
            p.mac_predicted.to_string(),
            p.interval_low.to_string(),
            p.interval_high.to_string(),
        ])
        .expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    format!("{header}{body}")
}

/// GeoJSON FeatureCollection keyed by ISO code, without geometries; a
/// boundaries layer is joined on `iso2` at render time. Observed reference
/// values, when given, are added with `source: "ground_truth"`.
pub fn choropleth(
    predictions: &[Prediction],
    observed: &[GroundTruthRecord],
    metadata: Option<&Value>,
) -> Result<Value, ReportError> {
    if predictions.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut features: Vec<Value> = predictions
        .iter()
        .map(|p| {
            feature(
                p.country.iso2,
                &p.country.name,
                p.sex,
                json!({
                    "mac_fb": p.mac_fb,
                    "mac_predicted": p.mac_predicted,
                    "interval_low": p.interval_low,
                    "interval_high": p.interval_high,
                    "source": "predicted",
                }),
            )
        })
        .collect();
    let mut observed: Vec<&GroundTruthRecord> = observed.iter().collect();
    observed.sort_by_key(|t| (t.country.iso2, t.sex));
    features.extend(observed.into_iter().map(|t| {
        feature(
            t.country.iso2,
            &t.country.name,
            t.sex,
            json!({ "mac": t.mac, "period": t.period, "source": "ground_truth" }),
        )
    }));
    let mut fc = Map::new();
    fc.insert("type".into(), json!("FeatureCollection"));
    if let Some(m) = metadata {
        fc.insert("metadata".into(), m.clone());
    }
    fc.insert("features".into(), Value::Array(features));
    Ok(Value::Object(fc))
}

fn feature(iso2: Iso2, name: &str, sex: Sex, extra: Value) -> Value {
    let mut props = json!({ "iso2": iso2.as_str(), "name": name, "sex": sex.as_str() });
    if let (Value::Object(p), Value::Object(e)) = (&mut props, extra) {
        p.extend(e);
    }
    json!({ "type": "Feature", "id": format!("{iso2}-{sex}"), "geometry": null, "properties": props })
}

/// Writes [`choropleth`] output to `path` atomically.
pub fn emit_choropleth(
    predictions: &[Prediction],
    observed: &[GroundTruthRecord],
    metadata: Option<&Value>,
    path: &Path,
) -> Result<(), ReportError> {
    let doc = choropleth(predictions, observed, metadata)?;
    let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    text.push('\n');
    atomic_write(path, text.as_bytes()).map_err(|error| ReportError::Io { path: path.display().to_string(), error })
}
