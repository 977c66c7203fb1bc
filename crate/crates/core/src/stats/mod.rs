//! Statistical kernels: ranks and Spearman correlation, MAPE, simple OLS
//! with full inference, leave-one-out and random-split validation.

mod ols;
mod rank;
pub mod special;
mod validation;

pub use ols::{fit_xy, ols_fit, CalibrationModel};
pub use rank::{average_ranks, pearson, spearman, Spearman};
pub use special::{beta_inc, f_cdf, f_sf, ln_gamma, t_cdf, t_quantile, t_two_sided_p};
pub use validation::{
    coefficient_of_variation, grouped_metrics, loocv, mape, random_split_validation, GroupedMetrics, LoocvResult,
    LoocvScope, MetricRow, RandomSplitResult,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("input contains NaN or infinite values")]
    NonFiniteInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input is constant; correlation is undefined")]
    DegenerateInput,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("all x values are equal; slope is not identifiable")]
    DegenerateDesign,
    #[error("truth value at index {0} is zero")]
    ZeroTruth(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("domain error: {0}")]
    Domain(String),
}

/// Stars for the conventional `*p<0.1; **p<0.05; ***p<0.01` legend.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFiniteInput)
    }
}

#[cfg(test)]
mod tests {
    use super::significance_stars;

    #[test]
    fn star_legend() {
        assert_eq!(significance_stars(0.005), "***");
        assert_eq!(significance_stars(0.01), "**");
        assert_eq!(significance_stars(0.049), "**");
        assert_eq!(significance_stars(0.05), "*");
        assert_eq!(significance_stars(0.099), "*");
        assert_eq!(significance_stars(0.1), "");
    }
}
