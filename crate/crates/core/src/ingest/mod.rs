//! Audience collection: query construction, fixture replay, the live reach
//! API with retry and bounded concurrency, and the per-day response cache.

mod cache;
pub mod live;
pub mod table;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::ResponseCache;
pub use live::{ReachApiClient, ReachSource, SourceError};

use crate::domain::{age_grid, AgeGroup, AudienceCell, AudienceSnapshot, CountryRef, Iso2, ParentFilter, Sex};
use table::AudienceRow;

/// Countries the platform returns no data for.
pub const DEFAULT_EXCLUDED: [&str; 5] = ["CU", "IR", "KP", "SY", "SD"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{0} is on the exclusion list")]
    ExcludedCountry(Iso2),
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("still rate limited after {attempts} attempts: {query}")]
    RateLimited { query: String, attempts: usize },
    #[error("fixture has no row for {0}")]
    FixtureMiss(String),
    #[error("malformed response for {query}: {message}")]
    MalformedResponse { query: String, message: String },
    #[error("snapshot for {} is incomplete: {} of 28 cells", .snapshot.country.iso2, .snapshot.cells.len())]
    SnapshotIncomplete { snapshot: Box<AudienceSnapshot>, failures: Vec<String> },
    #[error("live mode needs a reach API client (set ADS_API_TOKEN)")]
    MissingCredentials,
    #[error("{origin}:{line}: {message}")]
    Table { origin: String, line: u64, message: String },
    #[error("io error on {path}: {error}")]
    Io { path: String, error: std::io::Error },
}

impl IngestError {
    /// Short machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::ExcludedCountry(_) => "ExcludedCountry",
            IngestError::AuthError(_) => "AuthError",
            IngestError::RateLimited { .. } => "RateLimited",
            IngestError::FixtureMiss(_) => "FixtureMiss",
            IngestError::MalformedResponse { .. } => "MalformedResponse",
            IngestError::SnapshotIncomplete { .. } => "SnapshotIncomplete",
            IngestError::MissingCredentials => "AuthError",
            IngestError::Table { .. } => "ParseError",
            IngestError::Io { .. } => "IoError",
        }
    }
}

/// One reach query. Its [`canonical`](Self::canonical) text is the cache key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueryDescriptor {
    pub country_iso2: Iso2,
    pub sex: Sex,
    pub age_min: u32,
    pub age_max: u32,
    pub parent_filter: ParentFilter,
}

impl QueryDescriptor {
    pub fn new(country_iso2: Iso2, sex: Sex, group: AgeGroup, parent_filter: ParentFilter) -> Self {
        Self { country_iso2, sex, age_min: group.lower(), age_max: group.upper(), parent_filter }
    }

    pub fn age_group(&self) -> AgeGroup {
        AgeGroup::from_bounds(self.age_min, self.age_max).expect("descriptors are built from grid groups")
    }

    /// Fixed-order serialization, e.g. `IT|female|15|19|all`.
    pub fn canonical(&self) -> String {
        format!("{}|{}|{}|{}|{}", self.country_iso2, self.sex, self.age_min, self.age_max, self.parent_filter)
    }
}

impl fmt::Display for QueryDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    #[default]
    Fixture,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Live => "live",
            Mode::Fixture => "fixture",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Mode::Live),
            "fixture" => Ok(Mode::Fixture),
            other => Err(format!("unknown mode '{other}' (expected live|fixture)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollectorConfig {
    pub mode: Mode,
    pub fixture_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub max_in_flight: usize,
    pub base_backoff: Duration,
    pub max_retries: usize,
    pub excluded_countries: BTreeSet<Iso2>,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Fixture,
            fixture_dir: PathBuf::from("fixtures/audience"),
            cache_dir: PathBuf::from(".cache/audience"),
            max_in_flight: 4,
            base_backoff: Duration::from_secs(2),
            max_retries: 5,
            excluded_countries: default_excluded(),
        }
    }
}

pub fn default_excluded() -> BTreeSet<Iso2> {
    DEFAULT_EXCLUDED.iter().map(|c| c.parse().expect("valid code")).collect()
}

/// The 28 queries for one country: sex, then age ascending, then filter.
pub fn build_queries(country: &CountryRef, excluded: &BTreeSet<Iso2>) -> Result<Vec<QueryDescriptor>, IngestError> {
    if excluded.contains(&country.iso2) {
        return Err(IngestError::ExcludedCountry(country.iso2));
    }
    let mut out = Vec::with_capacity(28);
    for sex in Sex::ALL {
        for group in age_grid() {
            for filter in ParentFilter::ALL {
                out.push(QueryDescriptor::new(country.iso2, sex, group, filter));
            }
        }
    }
    Ok(out)
}

/// Counting semaphore bounding outstanding live requests.
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self { limit: limit.max(1), active: Mutex::new(0), freed: Condvar::new() }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        let mut active = self.active.lock().expect("in-flight lock");
        while *active >= self.limit {
            active = self.freed.wait(active).expect("in-flight lock");
        }
        *active += 1;
        drop(active);
        let out = f();
        *self.active.lock().expect("in-flight lock") -= 1;
        self.freed.notify_one();
        out
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;
type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

/// Collects audience snapshots. Shareable across threads; the in-flight
/// bound holds across every concurrent collection on the same collector.
pub struct Collector {
    config: CollectorConfig,
    source: Option<Arc<dyn ReachSource>>,
    cache: ResponseCache,
    fixtures: Mutex<HashMap<Iso2, Arc<Vec<AudienceRow>>>>,
    in_flight: InFlight,
    sleep: Sleeper,
    clock: Clock,
}

impl Collector {
    pub fn new(config: CollectorConfig) -> Self {
        Self {
            cache: ResponseCache::new(config.cache_dir.clone()),
            in_flight: InFlight::new(config.max_in_flight),
            config,
            source: None,
            fixtures: Mutex::new(HashMap::new()),
            sleep: Arc::new(std::thread::sleep),
            clock: Arc::new(Utc::now),
        }
    }

    pub fn with_source(mut self, source: Arc<dyn ReachSource>) -> Self {
        self.source = Some(source);
        self
    }

    /// Replaces the backoff sleep, e.g. to record delays in tests.
    pub fn with_sleep(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    pub fn with_clock(mut self, clock: impl Fn() -> DateTime<Utc> + Send + Sync + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    pub fn config(&self) -> &CollectorConfig {
        &self.config
    }

    /// ISO codes with a fixture file in the fixture directory, sorted.
    pub fn fixture_countries(&self) -> Result<Vec<Iso2>, IngestError> {
        let dir = &self.config.fixture_dir;
        let entries = std::fs::read_dir(dir).map_err(|error| IngestError::Io { path: dir.display().to_string(), error })?;
        let mut out: Vec<Iso2> = entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .filter_map(|p| p.file_stem()?.to_str()?.parse().ok())
            .collect();
        out.sort();
        Ok(out)
    }

    pub fn fetch_cell(&self, country: &CountryRef, q: &QueryDescriptor) -> Result<AudienceCell, IngestError> {
        match self.config.mode {
            Mode::Fixture => self.fetch_fixture(country, q),
            Mode::Live => self.fetch_live(country, q),
        }
    }

    fn fetch_fixture(&self, country: &CountryRef, q: &QueryDescriptor) -> Result<AudienceCell, IngestError> {
        let rows = self.fixture_rows(q.country_iso2)?;
        let group = q.age_group();
        rows.iter()
            .find(|r| r.sex == q.sex && r.age_group == group && r.parent_filter == q.parent_filter)
            .map(|r| r.clone().into_cell(country.clone()))
            .ok_or_else(|| IngestError::FixtureMiss(q.canonical()))
    }

    fn fixture_rows(&self, iso2: Iso2) -> Result<Arc<Vec<AudienceRow>>, IngestError> {
        let mut loaded = self.fixtures.lock().expect("fixture lock");
        if let Some(rows) = loaded.get(&iso2) {
            return Ok(rows.clone());
        }
        let path = self.config.fixture_dir.join(format!("{iso2}.csv"));
        let rows = match std::fs::File::open(&path) {
            Ok(f) => table::read_rows(f, &path.display().to_string())?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(error) => return Err(IngestError::Io { path: path.display().to_string(), error }),
        };
        let rows = Arc::new(rows);
        loaded.insert(iso2, rows.clone());
        Ok(rows)
    }

    fn fetch_live(&self, country: &CountryRef, q: &QueryDescriptor) -> Result<AudienceCell, IngestError> {
        let now = (self.clock)();
        let day = now.date_naive();
        if let Some(row) = self.cache.get(q, day)? {
            return Ok(row.into_cell(country.clone()));
        }
        let source = self.source.as_ref().ok_or(IngestError::MissingCredentials)?;
        let count = self.fetch_with_retry(source.as_ref(), q)?;
        if count < crate::domain::LOWER_BOUND_COUNT {
            log::warn!("{q}: count {count} is below the platform floor");
        }
        let cell = AudienceCell::new(country.clone(), q.sex, q.age_group(), q.parent_filter, count, now);
        self.cache.put(&cell, day)?;
        Ok(cell)
    }

    fn fetch_with_retry(&self, source: &dyn ReachSource, q: &QueryDescriptor) -> Result<u64, IngestError> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.in_flight.run(|| source.fetch(q)) {
                Ok(count) => return Ok(count),
                Err(SourceError::Auth(m)) => return Err(IngestError::AuthError(m)),
                Err(SourceError::Malformed(message)) => {
                    return Err(IngestError::MalformedResponse { query: q.canonical(), message })
                }
                Err(e @ (SourceError::RateLimited(_) | SourceError::Transport(_))) => {
                    if attempt > self.config.max_retries {
                        log::warn!("{q}: giving up after {attempt} attempts ({e})");
                        return Err(IngestError::RateLimited { query: q.canonical(), attempts: attempt });
                    }
                    // retry k waits base * 2^(k-1)
                    let delay = self.config.base_backoff.saturating_mul(1u32 << (attempt - 1).min(31));
                    log::debug!("{q}: {e}; retrying in {delay:?}");
                    (self.sleep)(delay);
                }
            }
        }
    }

    /// Collects all 28 cells of one country.
    ///
    /// Cells are fetched concurrently but assembled in canonical order. When
    /// some cells fail after retries the cells obtained are returned inside
    /// [`IngestError::SnapshotIncomplete`]; an authentication failure aborts.
    pub fn collect_snapshot(&self, country: &CountryRef) -> Result<AudienceSnapshot, IngestError> {
        let queries = build_queries(country, &self.config.excluded_countries)?;
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<AudienceCell, IngestError>>>> =
            Mutex::new((0..queries.len()).map(|_| None).collect());
        let workers = self.config.max_in_flight.clamp(1, queries.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(q) = queries.get(i) else { break };
                    let r = self.fetch_cell(country, q);
                    results.lock().expect("results lock")[i] = Some(r);
                });
            }
        });

        let mut cells = Vec::with_capacity(queries.len());
        let mut failures = Vec::new();
        for r in results.into_inner().expect("results lock").into_iter().flatten() {
            match r {
                Ok(c) => cells.push(c),
                Err(e @ (IngestError::AuthError(_) | IngestError::MissingCredentials)) => return Err(e),
                Err(e) => failures.push(e.to_string()),
            }
        }
        let collected_at = cells.iter().map(|c| c.collected_at).max().unwrap_or_else(|| (self.clock)());
        let (snapshot, _) = AudienceSnapshot::assemble(country.clone(), cells, collected_at);
        if failures.is_empty() {
            Ok(snapshot)
        } else {
            Err(IngestError::SnapshotIncomplete { snapshot: Box::new(snapshot), failures })
        }
    }
}
