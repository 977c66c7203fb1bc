//! Slow, independent reference computations for tests.
//!
//! Nothing here shares code with the library under test: regression and
//! correlation are evaluated in exact rational arithmetic, ranks by O(n²)
//! counting, and distribution functions by adaptive quadrature of the
//! densities with a Lanczos log-gamma.

pub mod exact;
pub mod quad;

pub use exact::{exact_ols, exact_spearman_rho, exact_weighted_mean, rank_by_counting, rank_by_counting_f64, ExactFit};
pub use quad::{f_cdf_quadrature, ln_gamma_lanczos, t_cdf_quadrature};
