use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use reachmac::domain::{Iso2, Sex};
use reachmac::indicators::LowerBoundPolicy;
use reachmac::ingest::live::DEFAULT_API_BASE;
use reachmac::ingest::{default_excluded, CollectorConfig, Mode};
use reachmac::stats::LoocvScope;
use serde::Deserialize;

use crate::error::CliError;

/// Run settings as given on the command line or in a config file. Every
/// key is optional; command-line values win over file values.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// live | fixture
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Seed for every random choice (random train/test splits).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated subset of female,male.
    #[arg(long, global = true)]
    pub sexes: Option<String>,
    /// any | parents-only
    #[arg(long, global = true)]
    pub lower_bound_policy: Option<String>,
    /// global | continent
    #[arg(long, global = true)]
    pub loocv_scope: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub fixture_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Reference MAC table (iso2,sex,mac,period).
    #[arg(long, global = true)]
    pub truth: Option<PathBuf>,
    /// Continent map (iso2,continent[,name]); the bundled map by default.
    #[arg(long, global = true)]
    pub continent_map: Option<PathBuf>,
    /// Comma-separated ISO codes to collect instead of all available.
    #[arg(long, global = true)]
    pub countries: Option<String>,
    /// Random train/test runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Test-set size of each random run.
    #[arg(long, global = true)]
    pub test_size: Option<usize>,
    #[arg(long, global = true)]
    pub max_in_flight: Option<usize>,
    #[arg(long, global = true)]
    pub max_retries: Option<usize>,
    /// Base retry delay in milliseconds; doubles per retry.
    #[arg(long, global = true)]
    pub backoff_ms: Option<u64>,
    #[arg(long, global = true)]
    pub api_base: Option<String>,
    /// Ad account id for live mode (or ADS_ACCOUNT_ID).
    #[arg(long, global = true)]
    pub account_id: Option<String>,
}

impl Settings {
    /// Reads a TOML key-value file. Relative paths in it are taken relative
    /// to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut s: Settings =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut s.out, &mut s.fixture_dir, &mut s.cache_dir, &mut s.truth, &mut s.continent_map]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(s)
    }

    /// Fills unset keys from `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        Settings {
            mode: self.mode.or(fallback.mode),
            seed: self.seed.or(fallback.seed),
            sexes: self.sexes.or(fallback.sexes),
            lower_bound_policy: self.lower_bound_policy.or(fallback.lower_bound_policy),
            loocv_scope: self.loocv_scope.or(fallback.loocv_scope),
            out: self.out.or(fallback.out),
            fixture_dir: self.fixture_dir.or(fallback.fixture_dir),
            cache_dir: self.cache_dir.or(fallback.cache_dir),
            truth: self.truth.or(fallback.truth),
            continent_map: self.continent_map.or(fallback.continent_map),
            countries: self.countries.or(fallback.countries),
            runs: self.runs.or(fallback.runs),
            test_size: self.test_size.or(fallback.test_size),
            max_in_flight: self.max_in_flight.or(fallback.max_in_flight),
            max_retries: self.max_retries.or(fallback.max_retries),
            backoff_ms: self.backoff_ms.or(fallback.backoff_ms),
            api_base: self.api_base.or(fallback.api_base),
            account_id: self.account_id.or(fallback.account_id),
        }
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub collector: CollectorConfig,
    pub truth_path: PathBuf,
    pub continent_map_path: Option<PathBuf>,
    pub sexes: Vec<Sex>,
    pub seed: u64,
    pub lower_bound_policy: LowerBoundPolicy,
    pub loocv_scope: LoocvScope,
    pub output_dir: PathBuf,
    pub countries: Option<Vec<Iso2>>,
    pub runs: usize,
    pub test_size: usize,
    pub api_base: String,
    pub account_id: Option<String>,
}

pub const DEFAULT_SEED: u64 = 20180102;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            collector: CollectorConfig::default(),
            truth_path: PathBuf::from("fixtures/ground_truth.csv"),
            continent_map_path: None,
            sexes: Sex::ALL.to_vec(),
            seed: DEFAULT_SEED,
            lower_bound_policy: LowerBoundPolicy::Any,
            loocv_scope: LoocvScope::Global,
            output_dir: PathBuf::from("out"),
            countries: None,
            runs: 10,
            test_size: 10,
            api_base: DEFAULT_API_BASE.to_string(),
            account_id: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::Config(format!("{key}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{key}: empty list")));
    }
    Ok(items)
}

impl TryFrom<Settings> for RunConfig {
    type Error = CliError;

    fn try_from(s: Settings) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(v) = s.mode {
            cfg.collector.mode = parse::<Mode>("mode", &v)?;
        }
        if let Some(v) = s.seed {
            cfg.seed = v;
        }
        if let Some(v) = s.sexes {
            let mut sexes: Vec<Sex> = parse_list("sexes", &v)?;
            sexes.sort();
            sexes.dedup();
            cfg.sexes = sexes;
        }
        if let Some(v) = s.lower_bound_policy {
            cfg.lower_bound_policy = parse("lower_bound_policy", &v)?;
        }
        if let Some(v) = s.loocv_scope {
            cfg.loocv_scope = parse("loocv_scope", &v)?;
        }
        if let Some(v) = s.out {
            cfg.output_dir = v;
        }
        if let Some(v) = s.fixture_dir {
            cfg.collector.fixture_dir = v;
        }
        if let Some(v) = s.cache_dir {
            cfg.collector.cache_dir = v;
        }
        if let Some(v) = s.truth {
            cfg.truth_path = v;
        }
        cfg.continent_map_path = s.continent_map;
        if let Some(v) = s.countries {
            let mut c: Vec<Iso2> = parse_list("countries", &v)?;
            c.sort();
            c.dedup();
            cfg.countries = Some(c);
        }
        if let Some(v) = s.runs {
            cfg.runs = v;
        }
        if let Some(v) = s.test_size {
            cfg.test_size = v;
        }
        if cfg.runs == 0 || cfg.test_size == 0 {
            return Err(CliError::Config("runs and test_size must be positive".into()));
        }
        if let Some(v) = s.max_in_flight {
            if v == 0 {
                return Err(CliError::Config("max_in_flight must be positive".into()));
            }
            cfg.collector.max_in_flight = v;
        }
        if let Some(v) = s.max_retries {
            cfg.collector.max_retries = v;
        }
        if let Some(v) = s.backoff_ms {
            cfg.collector.base_backoff = Duration::from_millis(v);
        }
        if let Some(v) = s.api_base {
            cfg.api_base = v;
        }
        cfg.account_id = s.account_id;
        cfg.collector.excluded_countries = default_excluded();
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings { seed: Some(1), sexes: Some("male".into()), ..Default::default() };
        let flags = Settings { seed: Some(9), ..Default::default() };
        let cfg = RunConfig::try_from(flags.or(file)).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.sexes, [Sex::Male]);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for s in [
            Settings { mode: Some("batch".into()), ..Default::default() },
            Settings { sexes: Some("".into()), ..Default::default() },
            Settings { loocv_scope: Some("local".into()), ..Default::default() },
            Settings { runs: Some(0), ..Default::default() },
            Settings { countries: Some("ITA".into()), ..Default::default() },
        ] {
            assert!(matches!(RunConfig::try_from(s), Err(CliError::Config(_))));
        }
    }

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 5\nout = \"results\"\nsexes = \"female, male\"\n").unwrap();
        let s = Settings::from_file(&path).unwrap();
        assert_eq!(s.out.unwrap(), dir.path().join("results"));
        std::fs::write(&path, "colour = \"blue\"\n").unwrap();
        assert!(matches!(Settings::from_file(&path), Err(CliError::Config(_))));
    }
}
