use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::NaiveDate;

use super::table::{self, AudienceRow};
use super::{IngestError, QueryDescriptor};
use crate::domain::{AudienceCell, CountryRef, Iso2};
use crate::io::atomic_write;

type DayFile = BTreeMap<String, AudienceRow>;

/// Write-through cache of live responses, one CSV per country and UTC day
/// at `<dir>/<YYYY-MM-DD>/<ISO2>.csv`, in the fixture format so a cached
/// day can be replayed as fixtures.
pub struct ResponseCache {
    dir: PathBuf,
    loaded: Mutex<HashMap<(Iso2, NaiveDate), DayFile>>,
}

impl ResponseCache {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir, loaded: Mutex::new(HashMap::new()) }
    }

    pub fn day_dir(&self, day: NaiveDate) -> PathBuf {
        self.dir.join(day.format("%Y-%m-%d").to_string())
    }

    fn file(&self, iso2: Iso2, day: NaiveDate) -> PathBuf {
        self.day_dir(day).join(format!("{iso2}.csv"))
    }

    /// Cache key: canonical query plus collection day.
    pub fn key(q: &QueryDescriptor, day: NaiveDate) -> String {
        format!("{}@{}", q.canonical(), day.format("%Y-%m-%d"))
    }

    pub fn get(&self, q: &QueryDescriptor, day: NaiveDate) -> Result<Option<AudienceRow>, IngestError> {
        let mut loaded = self.loaded.lock().expect("cache lock");
        let rows = self.day_file(&mut loaded, q.country_iso2, day)?;
        Ok(rows.get(&Self::key(q, day)).cloned())
    }

    pub fn put(&self, cell: &AudienceCell, day: NaiveDate) -> Result<(), IngestError> {
        let q = QueryDescriptor::new(cell.country.iso2, cell.sex, cell.age_group, cell.parent_filter);
        let mut loaded = self.loaded.lock().expect("cache lock");
        let rows = self.day_file(&mut loaded, cell.country.iso2, day)?;
        rows.insert(
            Self::key(&q, day),
            AudienceRow {
                iso2: cell.country.iso2,
                sex: cell.sex,
                age_group: cell.age_group,
                parent_filter: cell.parent_filter,
                count: cell.count,
                collected_at: cell.collected_at,
            },
        );
        // rows are persisted in canonical cell order
        let mut ordered: Vec<&AudienceRow> = rows.values().collect();
        ordered.sort_by_key(|r| (r.sex, r.age_group, r.parent_filter));
        let placeholder = CountryRef::new(cell.country.iso2, "", cell.country.continent);
        let cells: Vec<AudienceCell> = ordered.into_iter().map(|r| r.clone().into_cell(placeholder.clone())).collect();
        let path = self.file(cell.country.iso2, day);
        atomic_write(&path, table::write_cells(&cells).as_bytes()).map_err(|error| io_err(&path, error))
    }

    fn day_file<'a>(
        &self,
        loaded: &'a mut HashMap<(Iso2, NaiveDate), DayFile>,
        iso2: Iso2,
        day: NaiveDate,
    ) -> Result<&'a mut DayFile, IngestError> {
        match loaded.entry((iso2, day)) {
            std::collections::hash_map::Entry::Occupied(e) => Ok(e.into_mut()),
            std::collections::hash_map::Entry::Vacant(e) => Ok(e.insert(read_day_file(&self.file(iso2, day), day)?)),
        }
    }
}

fn read_day_file(path: &Path, day: NaiveDate) -> Result<DayFile, IngestError> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(DayFile::new()),
        Err(error) => return Err(io_err(path, error)),
    };
    let rows = table::read_rows(file, &path.display().to_string())?;
    Ok(rows
        .into_iter()
        .map(|r| {
            let q = QueryDescriptor::new(r.iso2, r.sex, r.age_group, r.parent_filter);
            (ResponseCache::key(&q, day), r)
        })
        .collect())
}

fn io_err(path: &Path, error: std::io::Error) -> IngestError {
    IngestError::Io { path: path.display().to_string(), error }
}
