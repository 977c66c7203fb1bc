//! The pipeline stages. Every stage reads its inputs from disk, so each can
//! be rerun on its own once the earlier stages have produced their files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use reachmac::domain::{Continent, CountryRef, Iso2, Sex};
use reachmac::groundtruth::{
    join_pairs, latest_records, read_ground_truth, ContinentMap, GroundTruthError, GroundTruthRecord, ValidationPair,
    BUNDLED_CONTINENTS,
};
use reachmac::indicators::{estimate_country, MacEstimate};
use reachmac::ingest::table::{read_snapshot, write_snapshot};
use reachmac::ingest::{Collector, IngestError, Mode, ReachApiClient, SourceError};
use reachmac::io::{atomic_write, csv_reader, expect_columns};
use reachmac::predict::{choropleth, predict_missing, predictions_csv, Prediction};
use reachmac::stats::{
    coefficient_of_variation, grouped_metrics, loocv, ols_fit, random_split_validation, significance_stars,
    CalibrationModel, MetricRow,
};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::meta::Metadata;

pub const SNAPSHOT_DIR: &str = "snapshots";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const MAP_FILE: &str = "map.geojson";

pub fn metrics_file(sex: Sex) -> String {
    format!("metrics_{sex}.csv")
}

pub fn pairs_file(sex: Sex) -> String {
    format!("pairs_{sex}.csv")
}

pub fn model_json_file(sex: Sex) -> String {
    format!("model_{sex}.json")
}

pub fn model_text_file(sex: Sex) -> String {
    format!("model_{sex}.txt")
}

/// Files written by a stage, in write order.
pub type Written = Vec<PathBuf>;

fn write(path: PathBuf, text: &str, written: &mut Written) -> Result<(), CliError> {
    atomic_write(&path, text.as_bytes()).map_err(CliError::io(&path))?;
    written.push(path);
    Ok(())
}

fn require(stage: &'static str, needs: &'static str, path: &Path) -> Result<Vec<u8>, CliError> {
    match std::fs::read(path) {
        Ok(b) => Ok(b),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(CliError::MissingStageInput { stage, path: path.display().to_string(), needs })
        }
        Err(e) => Err(CliError::io(path)(e)),
    }
}

fn file_label(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn load_continents(cfg: &RunConfig, meta: &mut Metadata) -> Result<ContinentMap, CliError> {
    match &cfg.continent_map_path {
        None => {
            meta.input("continents (bundled)", BUNDLED_CONTINENTS.as_bytes());
            Ok(ContinentMap::bundled())
        }
        Some(p) => {
            let bytes = read_input(p)?;
            meta.input(file_label(p), &bytes);
            Ok(ContinentMap::from_reader(bytes.as_slice(), &p.display().to_string())?)
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            GroundTruthError::FileNotFound(path.display().to_string()).into()
        } else {
            CliError::io(path)(e)
        }
    })
}

fn load_truth(cfg: &RunConfig, map: &ContinentMap, meta: &mut Metadata) -> Result<Vec<GroundTruthRecord>, CliError> {
    let bytes = read_input(&cfg.truth_path)?;
    meta.input(file_label(&cfg.truth_path), &bytes);
    let loaded = read_ground_truth(bytes.as_slice(), &cfg.truth_path.display().to_string(), map)?;
    for d in &loaded.diagnostics {
        log::warn!("{}: {d}", cfg.truth_path.display());
    }
    Ok(loaded.records.into_iter().filter(|r| cfg.sexes.contains(&r.sex)).collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(i).unwrap_or_default();
    raw.parse().map_err(|e| CliError::Parse { path: path.display().to_string(), line, message: format!("'{raw}': {e}") })
}

fn parse_opt_f64(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<Option<f64>, CliError> {
    if rec.get(i).unwrap_or_default().is_empty() {
        Ok(None)
    } else {
        parse_field(rec, i, path).map(Some)
    }
}

fn header_check(rdr: &mut csv::Reader<&[u8]>, path: &Path, columns: &[&str]) -> Result<(), CliError> {
    let parse = |message: String| CliError::Parse { path: path.display().to_string(), line: 1, message };
    let headers = rdr.headers().map_err(|e| parse(e.to_string()))?.clone();
    expect_columns(&headers, columns).map_err(parse)
}

fn csv_records(bytes: &[u8], path: &Path, columns: &[&str]) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut rdr = csv_reader(bytes);
    header_check(&mut rdr, path, columns)?;
    rdr.records()
        .map(|r| r.map_err(|e| CliError::Parse { path: path.display().to_string(), line: 0, message: e.to_string() }))
        .collect()
}

fn resolve(map: &ContinentMap, iso2: Iso2) -> Result<CountryRef, CliError> {
    Ok(map.resolve(iso2)?)
}

// ---------------------------------------------------------------- collect

/// Writes one snapshot file per collected country.
pub fn cmd_collect(cfg: &RunConfig) -> Result<Written, CliError> {
    let mut base_meta = Metadata::new("collect", cfg);
    let map = load_continents(cfg, &mut base_meta)?;
    let mut collector = Collector::new(cfg.collector.clone());
    if cfg.collector.mode == Mode::Live {
        let client = ReachApiClient::from_env(&cfg.api_base, cfg.account_id.as_deref()).map_err(|e| match e {
            SourceError::Auth(m) => IngestError::AuthError(m),
            other => IngestError::MalformedResponse { query: "client setup".into(), message: other.to_string() },
        })?;
        collector = collector.with_source(Arc::new(client));
    }

    let candidates: Vec<Iso2> = match (&cfg.countries, cfg.collector.mode) {
        (Some(list), _) => list.clone(),
        (None, Mode::Fixture) => collector.fixture_countries()?,
        (None, Mode::Live) => map.countries().map(|c| c.iso2).collect(),
    };

    let dir = cfg.output_dir.join(SNAPSHOT_DIR);
    let mut written = Written::new();
    for iso2 in candidates {
        if cfg.collector.excluded_countries.contains(&iso2) {
            log::info!("collect: {iso2} is on the exclusion list, skipped");
            continue;
        }
        let Some(country) = map.get(iso2).cloned() else {
            log::warn!("collect: {iso2} is not in the continent map, skipped");
            continue;
        };
        let snapshot = match collector.collect_snapshot(&country) {
            Ok(s) => s,
            Err(IngestError::SnapshotIncomplete { snapshot, failures }) => {
                for f in &failures {
                    log::warn!("collect: {iso2}: {f}");
                }
                *snapshot
            }
            Err(e) => return Err(e.into()),
        };
        let mut meta = base_meta.clone();
        if cfg.collector.mode == Mode::Fixture {
            let fixture = cfg.collector.fixture_dir.join(format!("{iso2}.csv"));
            if let Ok(bytes) = std::fs::read(&fixture) {
                meta.input(file_label(&fixture), &bytes);
            }
        }
        let text = format!("{}{}", meta.comment_header(), write_snapshot(&snapshot));
        write(dir.join(format!("{iso2}.csv")), &text, &mut written)?;
    }
    if written.is_empty() {
        log::warn!("collect: no snapshots written");
    }
    Ok(written)
}

// --------------------------------------------------------------- estimate

fn snapshot_files(cfg: &RunConfig) -> Result<Vec<(Iso2, PathBuf, Vec<u8>)>, CliError> {
    let dir = cfg.output_dir.join(SNAPSHOT_DIR);
    let missing = || CliError::MissingStageInput { stage: "estimate", path: dir.display().to_string(), needs: "collect" };
    let entries = std::fs::read_dir(&dir).map_err(|_| missing())?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(CliError::io(&dir))?.path();
        if path.extension().is_none_or(|x| x != "csv") {
            continue;
        }
        let Some(iso2) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<Iso2>().ok()) else {
            log::warn!("estimate: ignoring {}", path.display());
            continue;
        };
        let bytes = std::fs::read(&path).map_err(CliError::io(&path))?;
        files.push((iso2, path, bytes));
    }
    if files.is_empty() {
        return Err(missing());
    }
    files.sort_by_key(|f| f.0);
    Ok(files)
}

/// MAC and eligibility for every snapshot and requested sex.
pub fn cmd_estimate(cfg: &RunConfig) -> Result<Written, CliError> {
    let mut meta = Metadata::new("estimate", cfg);
    let files = snapshot_files(cfg)?;
    let map = load_continents(cfg, &mut meta)?;
    let names: Vec<String> = files.iter().map(|f| file_label(&f.1)).collect();
    meta.input_set(SNAPSHOT_DIR, names.iter().map(String::as_str).zip(files.iter().map(|f| f.2.as_slice())));

    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["iso2", "sex", "mac", "eligible", "reason"]).expect("in-memory write");
    for (iso2, path, bytes) in &files {
        let country = resolve(&map, *iso2)?;
        let snapshot = read_snapshot(bytes.as_slice(), &path.display().to_string(), &country)?;
        for &sex in &cfg.sexes {
            let e = estimate_country(&snapshot, sex, cfg.lower_bound_policy);
            if let Some(reason) = e.reason {
                log::info!("estimate: {iso2} {sex} not eligible ({reason})");
            }
            w.write_record([
                iso2.to_string(),
                sex.to_string(),
                fmt_opt(e.mac),
                e.eligible.to_string(),
                e.reason.map(|r| r.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
    let mut written = Written::new();
    write(cfg.output_dir.join(ESTIMATES_FILE), &format!("{}{body}", meta.comment_header()), &mut written)?;
    Ok(written)
}

fn read_estimates(
    cfg: &RunConfig,
    stage: &'static str,
    map: &ContinentMap,
    meta: &mut Metadata,
) -> Result<Vec<MacEstimate>, CliError> {
    let path = cfg.output_dir.join(ESTIMATES_FILE);
    let bytes = require(stage, "estimate", &path)?;
    meta.input(ESTIMATES_FILE, &bytes);
    let mut out = Vec::new();
    for rec in csv_records(&bytes, &path, &["iso2", "sex", "mac", "eligible", "reason"])? {
        let iso2: Iso2 = parse_field(&rec, 0, &path)?;
        let reason = match rec.get(4).unwrap_or_default() {
            "" => None,
            _ => Some(parse_field(&rec, 4, &path)?),
        };
        out.push(MacEstimate {
            country: resolve(map, iso2)?,
            sex: parse_field(&rec, 1, &path)?,
            mac: parse_opt_f64(&rec, 2, &path)?,
            eligible: parse_field(&rec, 3, &path)?,
            reason,
        });
    }
    Ok(out)
}

// --------------------------------------------------------------- validate

const P_VALUE_NOTE: &str =
    "# note: correlation p-values use the t approximation and are unreliable for small n\n";

fn metric_cells(row: Option<&MetricRow>) -> [String; 4] {
    match row {
        None => Default::default(),
        Some(r) => [
            fmt_opt(r.spearman_rho),
            fmt_opt(r.mape),
            fmt_opt(r.spearman_p),
            r.spearman_p.map(significance_stars).unwrap_or_default().to_string(),
        ],
    }
}

/// Agreement of platform and reference MAC per continent, raw and under
/// leave-one-out calibration, plus the joined pairs for calibration.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Written, CliError> {
    let mut meta = Metadata::new("validate", cfg);
    let map = load_continents(cfg, &mut meta)?;
    let estimates = read_estimates(cfg, "validate", &map, &mut meta)?;
    let truth = load_truth(cfg, &map, &mut meta)?;
    let header = format!("{}{P_VALUE_NOTE}", meta.comment_header());
    let mut written = Written::new();

    for &sex in &cfg.sexes {
        let eligible: Vec<(CountryRef, Sex, f64)> = estimates
            .iter()
            .filter(|e| e.sex == sex)
            .filter_map(|e| e.eligible_mac().map(|m| (e.country.clone(), e.sex, m)))
            .collect();
        let sex_truth: Vec<GroundTruthRecord> = truth.iter().filter(|t| t.sex == sex).cloned().collect();
        let joined = join_pairs(&eligible, &sex_truth);
        for d in &joined.diagnostics {
            log::warn!("validate {sex}: {d}");
        }
        let pairs = joined.pairs;
        let context = format!("validate {sex}");
        let raw: Vec<(Continent, f64, f64)> =
            pairs.iter().map(|p| (p.country.continent, p.mac_fb, p.mac_truth)).collect();
        let metric = grouped_metrics(&raw).map_err(CliError::stats(&context))?;
        let cv = loocv(&pairs, cfg.loocv_scope).map_err(CliError::stats(&context))?;

        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record([
            "continent",
            "metric_corr",
            "metric_mape",
            "loocv_corr",
            "loocv_mape",
            "n",
            "loocv_n",
            "metric_corr_p",
            "loocv_corr_p",
            "metric_stars",
            "loocv_stars",
        ])
        .expect("in-memory write");
        let mut rows: Vec<(String, Option<&MetricRow>, Option<&MetricRow>)> = Continent::ALL
            .iter()
            .filter(|c| metric.per_continent.contains_key(c))
            .map(|c| (c.to_string(), metric.per_continent.get(c), cv.grouped.per_continent.get(c)))
            .collect();
        rows.push(("overall".into(), Some(&metric.overall), Some(&cv.grouped.overall)));
        for (name, m, l) in rows {
            let [m_rho, m_mape, m_p, m_stars] = metric_cells(m);
            let [l_rho, l_mape, l_p, l_stars] = metric_cells(l);
            let n = m.map_or(0, |r| r.n);
            let loocv_n = l.map_or(0, |r| r.n);
            w.write_record([
                name,
                m_rho,
                m_mape,
                l_rho,
                l_mape,
                n.to_string(),
                loocv_n.to_string(),
                m_p,
                l_p,
                m_stars,
                l_stars,
            ])
            .expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        write(cfg.output_dir.join(metrics_file(sex)), &format!("{header}{body}"), &mut written)?;

        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["iso2", "continent", "mac_fb", "mac_truth", "loocv_pred"]).expect("in-memory write");
        for p in &pairs {
            w.write_record([
                p.country.iso2.to_string(),
                p.country.continent.to_string(),
                p.mac_fb.to_string(),
                p.mac_truth.to_string(),
                fmt_opt(cv.predictions.get(&p.country.iso2).copied()),
            ])
            .expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        write(cfg.output_dir.join(pairs_file(sex)), &format!("{}{body}", meta.comment_header()), &mut written)?;
    }
    Ok(written)
}

fn read_pairs(cfg: &RunConfig, sex: Sex, map: &ContinentMap, meta: &mut Metadata) -> Result<Vec<ValidationPair>, CliError> {
    let name = pairs_file(sex);
    let path = cfg.output_dir.join(&name);
    let bytes = require("calibrate", "validate", &path)?;
    meta.input(name, &bytes);
    csv_records(&bytes, &path, &["iso2", "continent", "mac_fb", "mac_truth"])?
        .iter()
        .map(|rec| {
            Ok(ValidationPair {
                country: resolve(map, parse_field(rec, 0, &path)?)?,
                sex,
                mac_fb: parse_field(rec, 2, &path)?,
                mac_truth: parse_field(rec, 3, &path)?,
            })
        })
        .collect()
}

// -------------------------------------------------------------- calibrate

/// Fits the calibration regression per sex and scores it on random splits.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<Written, CliError> {
    let mut written = Written::new();
    for &sex in &cfg.sexes {
        let mut meta = Metadata::new("calibrate", cfg);
        let map = load_continents(cfg, &mut meta)?;
        let pairs = read_pairs(cfg, sex, &map, &mut meta)?;
        let context = format!("calibrate {sex}");
        let model = ols_fit(&pairs).map_err(CliError::stats(&context))?;
        let split = if pairs.len() >= cfg.test_size + 3 {
            Some(random_split_validation(&pairs, cfg.runs, cfg.test_size, cfg.seed).map_err(CliError::stats(&context))?)
        } else {
            log::warn!(
                "{context}: {} pairs, too few for {}-pair test sets; random splits skipped",
                pairs.len(),
                cfg.test_size
            );
            None
        };
        let truth: Vec<f64> = pairs.iter().map(|p| p.mac_truth).collect();
        let fb: Vec<f64> = pairs.iter().map(|p| p.mac_fb).collect();
        let cv_runs = split.as_ref().and_then(|s| coefficient_of_variation(&s.per_run));
        let cv_truth = coefficient_of_variation(&truth);
        let cv_fb = coefficient_of_variation(&fb);

        let doc = json!({
            "metadata": meta.json(),
            "sex": sex.as_str(),
            "model": model,
            "random_split": split.as_ref().map(|s| json!({
                "runs": s.per_run.len(),
                "test_size": s.test_size,
                "seed": s.seed,
                "mean_mape": s.mean_mape,
                "per_run_mape": s.per_run,
            })),
            "coefficient_of_variation": {
                "per_run_mape": cv_runs,
                "mac_truth": cv_truth,
                "mac_fb": cv_fb,
            },
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
        text.push('\n');
        write(cfg.output_dir.join(model_json_file(sex)), &text, &mut written)?;

        let mut report = meta.comment_header();
        report.push_str(&format!("\nCalibration of {sex} reference MAC on platform MAC\n\n"));
        report.push_str(&model.summary_table("Platform MAC"));
        report.push('\n');
        match &split {
            Some(s) => {
                report.push_str(&format!(
                    "Random splits: {} runs, {} test pairs each, seed {}\n",
                    s.per_run.len(),
                    s.test_size,
                    s.seed
                ));
                report.push_str(&format!("Mean test MAPE: {:.3}%\n", s.mean_mape));
                let runs: Vec<String> = s.per_run.iter().map(|m| format!("{m:.3}")).collect();
                report.push_str(&format!("Per-run MAPE: {}\n", runs.join(" ")));
            }
            None => report.push_str("Random splits: skipped (too few pairs)\n"),
        }
        let pct = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.3}%"));
        report.push_str(&format!("CV of per-run MAPE: {}\n", pct(cv_runs)));
        report.push_str(&format!("CV of reference MAC: {}\n", pct(cv_truth)));
        report.push_str(&format!("CV of platform MAC: {}\n", pct(cv_fb)));
        write(cfg.output_dir.join(model_text_file(sex)), &report, &mut written)?;
    }
    Ok(written)
}

fn read_model(cfg: &RunConfig, sex: Sex, meta: &mut Metadata) -> Result<CalibrationModel, CliError> {
    let name = model_json_file(sex);
    let path = cfg.output_dir.join(&name);
    let bytes = require("predict", "calibrate", &path)?;
    meta.input(name, &bytes);
    let bad = |message: String| CliError::Parse { path: path.display().to_string(), line: 0, message };
    let doc: Value = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
    serde_json::from_value(doc.get("model").cloned().unwrap_or(Value::Null)).map_err(|e| bad(e.to_string()))
}

// ---------------------------------------------------------------- predict

/// Calibrated MAC for eligible countries without a reference value.
pub fn cmd_predict(cfg: &RunConfig) -> Result<Written, CliError> {
    let mut meta = Metadata::new("predict", cfg);
    let map = load_continents(cfg, &mut meta)?;
    let estimates = read_estimates(cfg, "predict", &map, &mut meta)?;
    let truth = load_truth(cfg, &map, &mut meta)?;
    let mut predictions: Vec<Prediction> = Vec::new();
    for &sex in &cfg.sexes {
        let model = read_model(cfg, sex, &mut meta)?;
        predictions.extend(predict_missing(&model, sex, &estimates, &truth)?);
    }
    predictions.sort_by_key(|p| (p.country.iso2, p.sex));

    let mut written = Written::new();
    write(
        cfg.output_dir.join(PREDICTIONS_FILE),
        &predictions_csv(&predictions, &meta.comment_header()),
        &mut written,
    )?;
    if predictions.is_empty() {
        log::warn!("predict: every eligible country has a reference value; no map written");
        return Ok(written);
    }
    let doc = choropleth(&predictions, &latest_records(&truth), Some(&meta.json()))?;
    let mut text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    text.push('\n');
    write(cfg.output_dir.join(MAP_FILE), &text, &mut written)?;
    Ok(written)
}

/// Every stage in order.
pub fn cmd_all(cfg: &RunConfig) -> Result<Written, CliError> {
    let mut written = cmd_collect(cfg)?;
    written.extend(cmd_estimate(cfg)?);
    written.extend(cmd_validate(cfg)?);
    written.extend(cmd_calibrate(cfg)?);
    written.extend(cmd_predict(cfg)?);
    Ok(written)
}
