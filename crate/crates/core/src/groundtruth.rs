//! Reference MAC tables, the country → continent map, and the join that
//! pairs platform estimates with reference values.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Continent, CountryRef, Iso2, Sex};
use crate::io::{csv_reader, expect_columns, Diagnostic};

/// Text of the continent map returned by [`ContinentMap::bundled`].
pub const BUNDLED_CONTINENTS: &str = include_str!("../data/continents.csv");

/// Admissible range for a reference MAC, in years.
pub const MAC_RANGE: std::ops::RangeInclusive<f64> = 10.0..=60.0;

#[derive(Debug, Error)]
pub enum GroundTruthError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    ParseError { path: String, line: u64, column: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("country {0} is not in the continent map")]
    UnknownCountry(Iso2),
}

/// Country metadata keyed by ISO alpha-2 code.
#[derive(Debug, Clone, Default)]
pub struct ContinentMap {
    countries: BTreeMap<Iso2, CountryRef>,
}

impl ContinentMap {
    /// The map shipped with the crate (six-continent scheme; Central
    /// America and the Caribbean under NorthAmerica).
    pub fn bundled() -> Self {
        Self::from_reader(BUNDLED_CONTINENTS.as_bytes(), "<bundled>").expect("bundled continent map is valid")
    }

    pub fn load(path: &Path) -> Result<Self, GroundTruthError> {
        let file = open(path)?;
        Self::from_reader(file, &path.display().to_string())
    }

    /// Reads `iso2,continent[,name]`. Missing names default to the code.
    pub fn from_reader<R: Read>(rdr: R, source: &str) -> Result<Self, GroundTruthError> {
        let mut csv = csv_reader(rdr);
        let headers = csv.headers().map_err(|e| csv_error(source, e))?.clone();
        expect_columns(&headers, &["iso2", "continent"])
            .map_err(|message| GroundTruthError::ParseError { path: source.into(), line: 1, column: 1, message })?;
        let mut countries = BTreeMap::new();
        for rec in csv.records() {
            let rec = rec.map_err(|e| csv_error(source, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let iso2: Iso2 = field(&rec, 0, source, line)?;
            let continent: Continent = field(&rec, 1, source, line)?;
            let name = rec.get(2).filter(|s| !s.is_empty()).unwrap_or(iso2.as_str()).to_string();
            if countries.insert(iso2, CountryRef::new(iso2, name, continent)).is_some() {
                return Err(GroundTruthError::ParseError {
                    path: source.into(),
                    line,
                    column: 1,
                    message: format!("duplicate country {iso2}"),
                });
            }
        }
        Ok(Self { countries })
    }

    pub fn get(&self, iso2: Iso2) -> Option<&CountryRef> {
        self.countries.get(&iso2)
    }

    pub fn resolve(&self, iso2: Iso2) -> Result<CountryRef, GroundTruthError> {
        self.get(iso2).cloned().ok_or(GroundTruthError::UnknownCountry(iso2))
    }

    pub fn countries(&self) -> impl Iterator<Item = &CountryRef> {
        self.countries.values()
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }
}

/// Reference MAC for one (country, sex) and reference period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub country: CountryRef,
    pub sex: Sex,
    pub mac: f64,
    pub period: String,
}

/// Platform MAC and reference MAC for the same country and sex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPair {
    pub country: CountryRef,
    pub sex: Sex,
    pub mac_fb: f64,
    pub mac_truth: f64,
}

/// Records that passed validation plus one diagnostic per skipped row.
#[derive(Debug, Clone)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T> Default for Loaded<T> {
    fn default() -> Self {
        Self { records: Vec::new(), diagnostics: Vec::new() }
    }
}

/// Loads a reference table with header `iso2,sex,mac,period`.
///
/// Malformed values are hard errors. Rows that parse but violate the record
/// invariants (MAC outside 10-60, unknown country, repeated
/// country/sex/period) are skipped with a diagnostic.
pub fn load_ground_truth(path: &Path, continents: &ContinentMap) -> Result<Loaded<GroundTruthRecord>, GroundTruthError> {
    let file = open(path)?;
    read_ground_truth(file, &path.display().to_string(), continents)
}

pub fn read_ground_truth<R: Read>(
    rdr: R,
    source: &str,
    continents: &ContinentMap,
) -> Result<Loaded<GroundTruthRecord>, GroundTruthError> {
    let mut csv = csv_reader(rdr);
    let headers = csv.headers().map_err(|e| csv_error(source, e))?.clone();
    expect_columns(&headers, &["iso2", "sex", "mac", "period"])
        .map_err(|message| GroundTruthError::ParseError { path: source.into(), line: 1, column: 1, message })?;

    let mut out = Loaded::default();
    let mut seen = std::collections::BTreeSet::new();
    for rec in csv.records() {
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let iso2: Iso2 = field(&rec, 0, source, line)?;
        let sex: Sex = field(&rec, 1, source, line)?;
        let mac: f64 = field(&rec, 2, source, line)?;
        let period = rec.get(3).unwrap_or_default().to_string();

        if !mac.is_finite() || !MAC_RANGE.contains(&mac) {
            out.diagnostics.push(Diagnostic::at_line(line, format!("{iso2} {sex}: mac {mac} outside 10-60, skipped")));
            continue;
        }
        let Some(country) = continents.get(iso2) else {
            out.diagnostics.push(Diagnostic::at_line(line, format!("{iso2}: not in continent map, skipped")));
            continue;
        };
        if !seen.insert((iso2, sex, period.clone())) {
            out.diagnostics
                .push(Diagnostic::at_line(line, format!("{iso2} {sex} {period}: repeated record, skipped")));
            continue;
        }
        out.records.push(GroundTruthRecord { country: country.clone(), sex, mac, period });
    }
    Ok(out)
}

/// Result of [`join_pairs`].
#[derive(Debug, Clone, Default)]
pub struct JoinOutcome {
    pub pairs: Vec<ValidationPair>,
    pub unmatched_estimates: Vec<(CountryRef, Sex, f64)>,
    pub unmatched_truth: Vec<GroundTruthRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Sort key placing later reference periods last: `(end year, start year, text)`.
fn period_key(period: &str) -> (i32, i32, String) {
    let years: Vec<i32> = period
        .split(|c: char| !c.is_ascii_digit())
        .filter(|s| s.len() == 4)
        .filter_map(|s| s.parse().ok())
        .collect();
    let start = years.first().copied().unwrap_or(i32::MIN);
    let end = years.last().copied().unwrap_or(i32::MIN);
    (end, start, period.to_string())
}

/// One record per (country, sex): the one with the latest period, in ISO
/// code then sex order.
pub fn latest_records(truth: &[GroundTruthRecord]) -> Vec<GroundTruthRecord> {
    let mut best: BTreeMap<(Iso2, Sex), &GroundTruthRecord> = BTreeMap::new();
    for rec in truth {
        best.entry((rec.country.iso2, rec.sex))
            .and_modify(|cur| {
                if (period_key(&rec.period), rec.mac) > (period_key(&cur.period), cur.mac) {
                    *cur = rec;
                }
            })
            .or_insert(rec);
    }
    best.into_values().cloned().collect()
}

type Estimate = (CountryRef, Sex, f64);

/// Inner join of platform estimates and reference records on (country, sex).
///
/// Repeated reference rows for one (country, sex) resolve to the latest
/// period; repeated estimates keep the smallest value and send the rest to
/// `unmatched_estimates`. Both cases emit a diagnostic. Output lists are in
/// ISO code then sex order, so the result does not depend on input order.
pub fn join_pairs(estimates: &[(CountryRef, Sex, f64)], truth: &[GroundTruthRecord]) -> JoinOutcome {
    let mut out = JoinOutcome::default();

    let mut truth_by_key: BTreeMap<(Iso2, Sex), &GroundTruthRecord> = BTreeMap::new();
    for rec in truth {
        match truth_by_key.entry((rec.country.iso2, rec.sex)) {
            Entry::Vacant(v) => {
                v.insert(rec);
            }
            Entry::Occupied(mut o) => {
                let current = *o.get();
                let newer = (period_key(&rec.period), rec.mac) > (period_key(&current.period), current.mac);
                let (kept, dropped) = if newer { (rec, current) } else { (current, rec) };
                out.diagnostics.push(Diagnostic::general(format!(
                    "JoinAmbiguity: {} {} has several reference rows; using period {} over {}",
                    rec.country.iso2, rec.sex, kept.period, dropped.period
                )));
                o.insert(kept);
            }
        }
    }

    let mut est_by_key: BTreeMap<(Iso2, Sex), Vec<&Estimate>> = BTreeMap::new();
    for e in estimates {
        est_by_key.entry((e.0.iso2, e.1)).or_default().push(e);
    }

    for (key, mut group) in est_by_key {
        group.sort_by(|a, b| a.2.total_cmp(&b.2));
        if group.len() > 1 {
            out.diagnostics.push(Diagnostic::general(format!(
                "{} {}: {} platform estimates; keeping {}",
                key.0,
                key.1,
                group.len(),
                group[0].2
            )));
        }
        let (first, rest) = group.split_first().expect("non-empty group");
        out.unmatched_estimates.extend(rest.iter().map(|e| (*e).clone()));
        match truth_by_key.remove(&key) {
            Some(t) => out.pairs.push(ValidationPair {
                country: first.0.clone(),
                sex: first.1,
                mac_fb: first.2,
                mac_truth: t.mac,
            }),
            None => out.unmatched_estimates.push((*first).clone()),
        }
    }
    out.unmatched_estimates.sort_by(|a, b| (a.0.iso2, a.1).cmp(&(b.0.iso2, b.1)).then(a.2.total_cmp(&b.2)));
    out.unmatched_truth = truth_by_key.into_values().cloned().collect();
    out
}

fn open(path: &Path) -> Result<File, GroundTruthError> {
    File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            GroundTruthError::FileNotFound(path.display().to_string())
        } else {
            GroundTruthError::Io { path: path.display().to_string(), source: e }
        }
    })
}

fn csv_error(source: &str, e: csv::Error) -> GroundTruthError {
    let (line, column) = match e.position() {
        Some(p) => (p.line(), 0),
        None => (0, 0),
    };
    GroundTruthError::ParseError { path: source.into(), line, column, message: e.to_string() }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, source: &str, line: u64) -> Result<T, GroundTruthError>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(idx).ok_or_else(|| GroundTruthError::ParseError {
        path: source.into(),
        line,
        column: idx + 1,
        message: "missing field".into(),
    })?;
    raw.parse().map_err(|e: T::Err| GroundTruthError::ParseError {
        path: source.into(),
        line,
        column: idx + 1,
        message: format!("'{raw}': {e}"),
    })
}
