//! Mean age at childbearing (MAC) from advertising-platform audience counts.
//!
//! The crate is organised along the pipeline:
//!
//! - [`domain`]: age grid, sexes, countries and audience cells.
//! - [`ingest`]: building reach queries and collecting audience snapshots
//!   from fixture files or the live reach API (cached, rate limited).
//! - [`groundtruth`]: reference MAC tables, the continent map, and joining
//!   platform estimates with reference values.
//! - [`indicators`]: age-specific rates, MAC and the lower-bound eligibility rule.
//! - [`stats`]: ranks, Spearman correlation, MAPE, OLS with inference,
//!   leave-one-out and random-split validation, and the t/F distributions.
//! - [`predict`]: calibrated predictions for countries without reference data,
//!   CSV and GeoJSON emission.

pub mod domain;
pub mod groundtruth;
pub mod indicators;
pub mod ingest;
pub mod io;
pub mod predict;
pub mod stats;

pub use domain::{AgeGroup, AudienceCell, AudienceSnapshot, Continent, CountryRef, FertilitySchedule, ParentFilter, Sex};
