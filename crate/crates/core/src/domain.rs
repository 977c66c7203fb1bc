//! Value types shared across the pipeline and the five-year age grid.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest age covered by the reproductive-age grid.
pub const AGE_MIN: u32 = 15;
/// Highest age (inclusive) covered by the grid.
pub const AGE_MAX: u32 = 49;
/// Width of every age group in years.
pub const GROUP_WIDTH: u32 = 5;
/// Number of groups in the grid.
pub const GROUP_COUNT: usize = 7;

/// The platform never reports audiences below this size.
pub const LOWER_BOUND_COUNT: u64 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("no age group starts at {0}")]
    UnknownAgeGroup(u32),
    #[error("age range {0}-{1} is not a grid group")]
    NotAGridRange(u32, u32),
    #[error("unknown sex '{0}'")]
    UnknownSex(String),
    #[error("unknown continent '{0}'")]
    UnknownContinent(String),
    #[error("unknown parent filter '{0}'")]
    UnknownParentFilter(String),
    #[error("invalid ISO-3166 alpha-2 code '{0}'")]
    InvalidIso2(String),
    #[error("fertility schedule needs {GROUP_COUNT} rates, got {0}")]
    ScheduleLength(usize),
    #[error("rate {0} at position {1} is negative or not finite")]
    InvalidRate(f64, usize),
}

/// A five-year age group `[lower, lower + 4]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct AgeGroup {
    lower: u32,
}

impl AgeGroup {
    pub fn new(lower: u32) -> Result<Self, DomainError> {
        if (AGE_MIN..=AGE_MAX).contains(&lower) && (lower - AGE_MIN).is_multiple_of(GROUP_WIDTH) {
            Ok(Self { lower })
        } else {
            Err(DomainError::UnknownAgeGroup(lower))
        }
    }

    /// Looks up the group whose inclusive bounds are exactly `low..=high`.
    pub fn from_bounds(low: u32, high: u32) -> Result<Self, DomainError> {
        let group = Self::new(low).map_err(|_| DomainError::NotAGridRange(low, high))?;
        if group.upper() == high {
            Ok(group)
        } else {
            Err(DomainError::NotAGridRange(low, high))
        }
    }

    /// Group containing the integer age, if it lies on the grid.
    pub fn containing(age: u32) -> Option<Self> {
        if (AGE_MIN..=AGE_MAX).contains(&age) {
            Some(Self { lower: age - (age - AGE_MIN) % GROUP_WIDTH })
        } else {
            None
        }
    }

    pub fn lower(self) -> u32 {
        self.lower
    }

    /// Inclusive upper age.
    pub fn upper(self) -> u32 {
        self.lower + GROUP_WIDTH - 1
    }

    pub fn width(self) -> u32 {
        GROUP_WIDTH
    }

    /// Group mid-point, `lower + width / 2`.
    pub fn midpoint(self) -> f64 {
        f64::from(self.lower) + f64::from(GROUP_WIDTH) / 2.0
    }

    /// Position of the group in [`age_grid`].
    pub fn index(self) -> usize {
        ((self.lower - AGE_MIN) / GROUP_WIDTH) as usize
    }
}

impl TryFrom<u32> for AgeGroup {
    type Error = DomainError;
    fn try_from(lower: u32) -> Result<Self, Self::Error> {
        Self::new(lower)
    }
}

impl From<AgeGroup> for u32 {
    fn from(g: AgeGroup) -> u32 {
        g.lower
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lower, self.upper())
    }
}

/// The seven canonical groups 15-19 .. 45-49 in ascending order.
pub fn age_grid() -> [AgeGroup; GROUP_COUNT] {
    std::array::from_fn(|i| AgeGroup { lower: AGE_MIN + GROUP_WIDTH * i as u32 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Female, Sex::Male];

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sex {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Ok(Sex::Female),
            "male" | "m" => Ok(Sex::Male),
            other => Err(DomainError::UnknownSex(other.to_string())),
        }
    }
}

/// Continental grouping used for the per-continent validation tables.
/// Central America and the Caribbean belong to `NorthAmerica`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Continent {
    Africa,
    Asia,
    Europe,
    NorthAmerica,
    Oceania,
    SouthAmerica,
}

impl Continent {
    pub const ALL: [Continent; 6] = [
        Continent::Africa,
        Continent::Asia,
        Continent::Europe,
        Continent::NorthAmerica,
        Continent::Oceania,
        Continent::SouthAmerica,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Continent::Africa => "Africa",
            Continent::Asia => "Asia",
            Continent::Europe => "Europe",
            Continent::NorthAmerica => "NorthAmerica",
            Continent::Oceania => "Oceania",
            Continent::SouthAmerica => "SouthAmerica",
        }
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Continent {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "africa" => Ok(Continent::Africa),
            "asia" => Ok(Continent::Asia),
            "europe" => Ok(Continent::Europe),
            "northamerica" => Ok(Continent::NorthAmerica),
            "oceania" => Ok(Continent::Oceania),
            "southamerica" => Ok(Continent::SouthAmerica),
            _ => Err(DomainError::UnknownContinent(s.to_string())),
        }
    }
}

/// Upper-case ISO-3166 alpha-2 code. The canonical country key everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iso2([u8; 2]);

impl Iso2 {
    pub fn as_str(&self) -> &str {
        // only ASCII upper-case letters are admitted
        std::str::from_utf8(&self.0).expect("ascii")
    }
}

impl FromStr for Iso2 {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bytes = t.as_bytes();
        if bytes.len() == 2 && bytes.iter().all(u8::is_ascii_alphabetic) {
            Ok(Iso2([bytes[0].to_ascii_uppercase(), bytes[1].to_ascii_uppercase()]))
        } else {
            Err(DomainError::InvalidIso2(s.to_string()))
        }
    }
}

impl fmt::Display for Iso2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Iso2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Iso2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountryRef {
    pub iso2: Iso2,
    pub name: String,
    pub continent: Continent,
}

impl CountryRef {
    pub fn new(iso2: Iso2, name: impl Into<String>, continent: Continent) -> Self {
        Self { iso2, name: name.into(), continent }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentFilter {
    /// Every user of the sex and age group: the exposure population.
    All,
    /// Users flagged as parents of a child aged 0-12 months.
    ParentOfChild0To12m,
}

impl ParentFilter {
    pub const ALL: [ParentFilter; 2] = [ParentFilter::All, ParentFilter::ParentOfChild0To12m];

    pub fn as_str(self) -> &'static str {
        match self {
            ParentFilter::All => "all",
            ParentFilter::ParentOfChild0To12m => "parent_of_child_0_12m",
        }
    }
}

impl fmt::Display for ParentFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParentFilter {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" => Ok(ParentFilter::All),
            "parent_of_child_0_12m" | "parents" => Ok(ParentFilter::ParentOfChild0To12m),
            other => Err(DomainError::UnknownParentFilter(other.to_string())),
        }
    }
}

/// One platform count for a (country, sex, age group, filter) query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceCell {
    pub country: CountryRef,
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub parent_filter: ParentFilter,
    pub count: u64,
    pub at_lower_bound: bool,
    pub collected_at: DateTime<Utc>,
}

impl AudienceCell {
    /// Builds a cell, deriving the lower-bound flag from the count.
    pub fn new(
        country: CountryRef,
        sex: Sex,
        age_group: AgeGroup,
        parent_filter: ParentFilter,
        count: u64,
        collected_at: DateTime<Utc>,
    ) -> Self {
        Self {
            country,
            sex,
            age_group,
            parent_filter,
            count,
            at_lower_bound: count == LOWER_BOUND_COUNT,
            collected_at,
        }
    }

    pub fn key(&self) -> CellKey {
        CellKey { sex: self.sex, age_group: self.age_group, parent_filter: self.parent_filter }
    }
}

/// Identity of a cell within one country's snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub sex: Sex,
    pub age_group: AgeGroup,
    pub parent_filter: ParentFilter,
}

/// All keys of a complete snapshot in canonical order: sex, then age
/// ascending, then filter (all before parents).
pub fn canonical_keys() -> Vec<CellKey> {
    let mut keys = Vec::with_capacity(GROUP_COUNT * 4);
    for sex in Sex::ALL {
        for age_group in age_grid() {
            for parent_filter in ParentFilter::ALL {
                keys.push(CellKey { sex, age_group, parent_filter });
            }
        }
    }
    keys
}

/// Cells collected for one country. Kept sorted in canonical key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceSnapshot {
    pub country: CountryRef,
    pub cells: Vec<AudienceCell>,
    pub collected_at: DateTime<Utc>,
}

impl AudienceSnapshot {
    /// Assembles a snapshot from cells in any order. Duplicate keys keep the
    /// first occurrence; the returned count says how many were dropped.
    pub fn assemble(country: CountryRef, mut cells: Vec<AudienceCell>, collected_at: DateTime<Utc>) -> (Self, usize) {
        cells.sort_by_key(AudienceCell::key);
        let before = cells.len();
        cells.dedup_by_key(|c| c.key());
        let dropped = before - cells.len();
        (Self { country, cells, collected_at }, dropped)
    }

    pub fn get(&self, sex: Sex, age_group: AgeGroup, parent_filter: ParentFilter) -> Option<&AudienceCell> {
        let key = CellKey { sex, age_group, parent_filter };
        self.cells.binary_search_by_key(&key, AudienceCell::key).ok().map(|i| &self.cells[i])
    }

    pub fn is_complete(&self) -> bool {
        self.cells.len() == GROUP_COUNT * 4 && self.cells.iter().map(AudienceCell::key).eq(canonical_keys())
    }

    pub fn cells_for(&self, sex: Sex) -> impl Iterator<Item = &AudienceCell> {
        self.cells.iter().filter(move |c| c.sex == sex)
    }
}

/// Age-specific rates for one (country, sex), one per grid group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FertilitySchedule {
    pub country: CountryRef,
    pub sex: Sex,
    rates: [f64; GROUP_COUNT],
}

impl FertilitySchedule {
    /// Rates must be finite and non-negative. Values above 1 are accepted
    /// (see [`crate::indicators::asfr`]).
    pub fn new(country: CountryRef, sex: Sex, rates: &[f64]) -> Result<Self, DomainError> {
        let rates: [f64; GROUP_COUNT] = rates.try_into().map_err(|_| DomainError::ScheduleLength(rates.len()))?;
        if let Some((i, r)) = rates.iter().enumerate().find(|(_, r)| !r.is_finite() || **r < 0.0) {
            return Err(DomainError::InvalidRate(*r, i));
        }
        Ok(Self { country, sex, rates })
    }

    pub fn rates(&self) -> &[f64; GROUP_COUNT] {
        &self.rates
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_the_seven_five_year_groups() {
        let labels: Vec<String> = age_grid().iter().map(ToString::to_string).collect();
        assert_eq!(labels, ["15-19", "20-24", "25-29", "30-34", "35-39", "40-44", "45-49"]);
        assert_eq!(age_grid()[0].midpoint(), 17.5);
        assert_eq!(age_grid()[6].midpoint(), 47.5);
    }

    #[test]
    fn every_reproductive_age_in_exactly_one_group() {
        for age in AGE_MIN..=AGE_MAX {
            let hits = age_grid().iter().filter(|g| (g.lower()..=g.upper()).contains(&age)).count();
            assert_eq!(hits, 1, "age {age}");
            assert_eq!(AgeGroup::containing(age).unwrap().index(), (age as usize - 15) / 5);
        }
        assert!(AgeGroup::containing(14).is_none());
        assert!(AgeGroup::containing(50).is_none());
        for g in age_grid() {
            assert_eq!(g.midpoint() - f64::from(g.lower()), 2.5);
            assert_eq!(g.width(), 5);
        }
    }

    #[test]
    fn bounds_must_match_a_group() {
        assert_eq!(AgeGroup::from_bounds(25, 29).unwrap().lower(), 25);
        assert!(AgeGroup::from_bounds(25, 30).is_err());
        assert!(AgeGroup::from_bounds(16, 20).is_err());
        assert!(AgeGroup::new(50).is_err());
    }

    #[test]
    fn lower_bound_flag_follows_count() {
        let c = CountryRef::new("IT".parse().unwrap(), "Italy", Continent::Europe);
        let g = age_grid()[0];
        let at = Utc::now();
        assert!(AudienceCell::new(c.clone(), Sex::Male, g, ParentFilter::All, 20, at).at_lower_bound);
        assert!(!AudienceCell::new(c, Sex::Male, g, ParentFilter::All, 21, at).at_lower_bound);
    }

    #[test]
    fn parses_labels() {
        assert_eq!("North America".parse::<Continent>().unwrap(), Continent::NorthAmerica);
        assert_eq!("SouthAmerica".parse::<Continent>().unwrap(), Continent::SouthAmerica);
        assert_eq!("it".parse::<Iso2>().unwrap().as_str(), "IT");
        assert!("ITA".parse::<Iso2>().is_err());
        assert!("M".parse::<Sex>().is_ok());
        assert!("other".parse::<Sex>().is_err());
    }

    #[test]
    fn canonical_order_starts_with_female_youngest_all() {
        let keys = canonical_keys();
        assert_eq!(keys.len(), 28);
        assert_eq!(keys[0], CellKey { sex: Sex::Female, age_group: age_grid()[0], parent_filter: ParentFilter::All });
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn schedule_rejects_bad_rates() {
        let c = CountryRef::new("IT".parse().unwrap(), "Italy", Continent::Europe);
        assert!(FertilitySchedule::new(c.clone(), Sex::Female, &[0.1; 6]).is_err());
        let mut r = [0.1; 7];
        r[3] = -0.1;
        assert!(FertilitySchedule::new(c.clone(), Sex::Female, &r).is_err());
        r[3] = f64::NAN;
        assert!(FertilitySchedule::new(c, Sex::Female, &r).is_err());
    }
}
