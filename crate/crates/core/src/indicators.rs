//! Age-specific rates, mean age at childbearing, and the eligibility rule
//! that drops countries with floored audience counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{age_grid, AudienceSnapshot, CountryRef, FertilitySchedule, ParentFilter, Sex, GROUP_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndicatorError {
    #[error("exposure count is zero")]
    ZeroExposure,
    #[error("snapshot for {0} is missing {1} cell(s) for {2}")]
    IncompleteSnapshot(String, usize, Sex),
    #[error("schedule sums to zero; MAC is undefined")]
    ZeroSchedule,
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
}

/// Rate of parents of a child under one year among all users of the group.
///
/// Rates above 1 are returned unchanged with a warning; the numerator is a
/// proxy and can only exceed the exposure through a data error.
pub fn asfr(parents_count: u64, total_count: u64) -> Result<f64, IndicatorError> {
    if total_count == 0 {
        return Err(IndicatorError::ZeroExposure);
    }
    let rate = parents_count as f64 / total_count as f64;
    if rate > 1.0 {
        log::warn!("rate {parents_count}/{total_count} exceeds 1");
    }
    Ok(rate)
}

/// Builds the schedule for one sex from the 7 exposure and 7 parent cells.
pub fn schedule_from_snapshot(s: &AudienceSnapshot, sex: Sex) -> Result<FertilitySchedule, IndicatorError> {
    let mut rates = [0.0; GROUP_COUNT];
    let mut missing = 0;
    let mut zero_exposure = false;
    for (i, group) in age_grid().into_iter().enumerate() {
        let all = s.get(sex, group, ParentFilter::All);
        let parents = s.get(sex, group, ParentFilter::ParentOfChild0To12m);
        match (all, parents) {
            (Some(a), Some(p)) => match asfr(p.count, a.count) {
                Ok(r) => rates[i] = r,
                Err(_) => zero_exposure = true,
            },
            (a, p) => missing += usize::from(a.is_none()) + usize::from(p.is_none()),
        }
    }
    if missing > 0 {
        return Err(IndicatorError::IncompleteSnapshot(s.country.iso2.to_string(), missing, sex));
    }
    if zero_exposure {
        return Err(IndicatorError::ZeroExposure);
    }
    Ok(FertilitySchedule::new(s.country.clone(), sex, &rates)?)
}

/// Mean age at childbearing: rate-weighted mean of the group mid-points.
///
/// Sums run in ascending age order with Neumaier compensation and exact
/// products, so the value is reproducible bit for bit.
pub fn mac(sched: &FertilitySchedule) -> Result<f64, IndicatorError> {
    // rates are taken relative to the largest one, which makes equal rates
    // exactly equal weights
    let peak = sched.rates().iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(IndicatorError::ZeroSchedule);
    }
    let mut weighted = CompensatedSum::default();
    let mut total = CompensatedSum::default();
    for (group, &rate) in age_grid().iter().zip(sched.rates()) {
        let w = rate / peak;
        let m = group.midpoint();
        let p = m * w;
        weighted.add(p);
        weighted.carry += m.mul_add(w, -p);
        total.add(w);
    }
    let total = total.value();
    if total <= 0.0 {
        return Err(IndicatorError::ZeroSchedule);
    }
    let first = age_grid()[0].midpoint();
    let last = age_grid()[GROUP_COUNT - 1].midpoint();
    // rounding can push a degenerate schedule an ulp outside the grid
    Ok((weighted.value() / total).clamp(first, last))
}

#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Which floored cells make a country ineligible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerBoundPolicy {
    /// Any of the 14 cells of the sex (parents or exposure).
    #[default]
    Any,
    /// Only the 7 parent cells.
    ParentsOnly,
}

impl fmt::Display for LowerBoundPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LowerBoundPolicy::Any => "any",
            LowerBoundPolicy::ParentsOnly => "parents-only",
        })
    }
}

impl FromStr for LowerBoundPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "any" => Ok(LowerBoundPolicy::Any),
            "parents-only" => Ok(LowerBoundPolicy::ParentsOnly),
            other => Err(format!("unknown lower-bound policy '{other}' (expected any|parents-only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IneligibilityReason {
    LowerBoundCell,
    IncompleteSnapshot,
    ZeroSchedule,
}

impl IneligibilityReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IneligibilityReason::LowerBoundCell => "lower_bound_cell",
            IneligibilityReason::IncompleteSnapshot => "incomplete_snapshot",
            IneligibilityReason::ZeroSchedule => "zero_schedule",
        }
    }
}

impl fmt::Display for IneligibilityReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IneligibilityReason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lower_bound_cell" => Ok(IneligibilityReason::LowerBoundCell),
            "incomplete_snapshot" => Ok(IneligibilityReason::IncompleteSnapshot),
            "zero_schedule" => Ok(IneligibilityReason::ZeroSchedule),
            other => Err(format!("unknown ineligibility reason '{other}'")),
        }
    }
}

/// MAC for one (country, sex) together with its eligibility.
///
/// `mac` is still filled in for countries excluded by the lower-bound rule
/// when it can be computed, so the raw value stays auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacEstimate {
    pub country: CountryRef,
    pub sex: Sex,
    pub mac: Option<f64>,
    pub eligible: bool,
    pub reason: Option<IneligibilityReason>,
}

impl MacEstimate {
    /// The MAC if the estimate may enter the analysis.
    pub fn eligible_mac(&self) -> Option<f64> {
        if self.eligible {
            self.mac
        } else {
            None
        }
    }
}

/// Estimates MAC for one sex, applying the lower-bound exclusion rule.
pub fn estimate_country(s: &AudienceSnapshot, sex: Sex, policy: LowerBoundPolicy) -> MacEstimate {
    let floored = s.cells_for(sex).any(|c| {
        c.at_lower_bound && (policy == LowerBoundPolicy::Any || c.parent_filter == ParentFilter::ParentOfChild0To12m)
    });
    let computed = schedule_from_snapshot(s, sex).and_then(|sched| mac(&sched));
    let (mac, failure) = match computed {
        Ok(m) => (Some(m), None),
        Err(IndicatorError::IncompleteSnapshot(..)) => (None, Some(IneligibilityReason::IncompleteSnapshot)),
        // zero exposure cannot come from live data (counts are at least 20)
        Err(_) => (None, Some(IneligibilityReason::ZeroSchedule)),
    };
    let reason = if floored { Some(IneligibilityReason::LowerBoundCell) } else { failure };
    MacEstimate { country: s.country.clone(), sex, mac, eligible: reason.is_none(), reason }
}
