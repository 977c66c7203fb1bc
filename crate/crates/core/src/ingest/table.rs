//! The per-country audience CSV shared by fixtures, the response cache and
//! collected snapshots:
//! `iso2,sex,age_low,age_high,parent_filter,count,collected_at`.

use std::io::Read;

use chrono::{DateTime, SecondsFormat, Utc};

use super::IngestError;
use crate::domain::{AgeGroup, AudienceCell, AudienceSnapshot, CountryRef, Iso2, ParentFilter, Sex};
use crate::io::{csv_reader, expect_columns};

pub const COLUMNS: [&str; 7] = ["iso2", "sex", "age_low", "age_high", "parent_filter", "count", "collected_at"];

/// One parsed row, before it is attached to a [`CountryRef`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudienceRow {
    pub iso2: Iso2,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub parent_filter: ParentFilter,
    pub count: u64,
    pub collected_at: DateTime<Utc>,
}

impl AudienceRow {
    pub fn into_cell(self, country: CountryRef) -> AudienceCell {
        AudienceCell::new(country, self.sex, self.age_group, self.parent_filter, self.count, self.collected_at)
    }
}

pub fn read_rows<R: Read>(rdr: R, source: &str) -> Result<Vec<AudienceRow>, IngestError> {
    let bad = |line: u64, message: String| IngestError::Table { origin: source.to_string(), line, message };
    let mut csv = csv_reader(rdr);
    let headers = csv.headers().map_err(|e| bad(0, e.to_string()))?.clone();
    expect_columns(&headers, &COLUMNS).map_err(|m| bad(1, m))?;
    let mut rows = Vec::new();
    for rec in csv.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |i: usize| rec.get(i).unwrap_or_default();
        let parse_u32 = |i: usize| get(i).parse::<u32>().map_err(|e| bad(line, format!("column {}: {e}", i + 1)));
        let iso2: Iso2 = get(0).parse().map_err(|e| bad(line, format!("{e}")))?;
        let sex: Sex = get(1).parse().map_err(|e| bad(line, format!("{e}")))?;
        let age_group = AgeGroup::from_bounds(parse_u32(2)?, parse_u32(3)?).map_err(|e| bad(line, format!("{e}")))?;
        let parent_filter: ParentFilter = get(4).parse().map_err(|e| bad(line, format!("{e}")))?;
        let count: u64 = get(5).parse().map_err(|e| bad(line, format!("count: {e}")))?;
        let collected_at = DateTime::parse_from_rfc3339(get(6))
            .map_err(|e| bad(line, format!("collected_at: {e}")))?
            .with_timezone(&Utc);
        rows.push(AudienceRow { iso2, sex, age_group, parent_filter, count, collected_at });
    }
    Ok(rows)
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// Serializes cells in the order given, header first.
pub fn write_cells<'a>(cells: impl IntoIterator<Item = &'a AudienceCell>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS).expect("in-memory write");
    for c in cells {
        w.write_record([
            c.country.iso2.as_str(),
            c.sex.as_str(),
            &c.age_group.lower().to_string(),
            &c.age_group.upper().to_string(),
            c.parent_filter.as_str(),
            &c.count.to_string(),
            &format_timestamp(&c.collected_at),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_snapshot(s: &AudienceSnapshot) -> String {
    write_cells(&s.cells)
}

/// Reads a snapshot file. Every row must belong to `country`.
pub fn read_snapshot<R: Read>(rdr: R, source: &str, country: &CountryRef) -> Result<AudienceSnapshot, IngestError> {
    let rows = read_rows(rdr, source)?;
    if let Some(r) = rows.iter().find(|r| r.iso2 != country.iso2) {
        return Err(IngestError::Table {
            origin: source.to_string(),
            line: 0,
            message: format!("row for {} in the file of {}", r.iso2, country.iso2),
        });
    }
    let collected_at = rows.iter().map(|r| r.collected_at).max().unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
    let cells = rows.into_iter().map(|r| r.into_cell(country.clone())).collect();
    Ok(AudienceSnapshot::assemble(country.clone(), cells, collected_at).0)
}
