use serde::{Deserialize, Serialize};

use super::special::{f_sf, t_quantile, t_two_sided_p};
use super::{check_finite, significance_stars, StatsError};
use crate::groundtruth::ValidationPair;

/// Simple linear regression `truth = intercept + slope · platform + ε`
/// with the usual inference statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    pub t_intercept: f64,
    pub t_slope: f64,
    pub p_intercept: f64,
    pub p_slope: f64,
    pub r2: f64,
    /// `1 − (1 − R²)(n − 1)/(n − 2)`; negative when the fit is worse than
    /// the mean after the degrees-of-freedom penalty.
    pub adj_r2: f64,
    pub residual_se: f64,
    pub f_stat: f64,
    pub p_f: f64,
    pub df_model: usize,
    pub df_resid: usize,
    pub n: usize,
    /// Mean of the predictor over the training data.
    pub x_mean: f64,
    /// Centred sum of squares of the predictor, `Σ (x − x̄)²`.
    pub x_ss: f64,
    pub residuals: Vec<f64>,
}

impl CalibrationModel {
    /// Point prediction `intercept + slope · x`.
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Two-sided prediction interval for a new observation at `x`.
    pub fn prediction_interval(&self, x: f64, level: f64) -> Result<(f64, f64), StatsError> {
        let half = self.interval_half_width(x, level)?;
        let y = self.predict(x);
        Ok((y - half, y + half))
    }

    pub fn interval_half_width(&self, x: f64, level: f64) -> Result<f64, StatsError> {
        if !(level > 0.0 && level < 1.0) {
            return Err(StatsError::Domain(format!("confidence level must lie in (0, 1), got {level}")));
        }
        let q = t_quantile(0.5 + level / 2.0, self.df_resid as f64)?;
        let dx = x - self.x_mean;
        let leverage = 1.0 / self.n as f64 + dx * dx / self.x_ss;
        Ok(q * self.residual_se * (1.0 + leverage).sqrt())
    }

    /// Rebuilds a model from a published coefficient table. The predictor
    /// mean and spread are recovered from the two standard errors, since
    /// `se_slope² = s²/Sxx` and `se_intercept² = s² (1/n + x̄²/Sxx)`.
    /// The predictor mean is taken as non-negative.
    pub fn from_summary(
        intercept: f64,
        slope: f64,
        se_intercept: f64,
        se_slope: f64,
        residual_se: f64,
        n: usize,
    ) -> Result<Self, StatsError> {
        if n < 3 {
            return Err(StatsError::TooFewPoints { needed: 3, got: n });
        }
        check_finite(&[intercept, slope, se_intercept, se_slope, residual_se])?;
        if se_slope <= 0.0 || residual_se <= 0.0 {
            return Err(StatsError::Domain("standard errors must be positive".into()));
        }
        let df = n - 2;
        let x_ss = (residual_se / se_slope).powi(2);
        let x_mean_sq = ((se_intercept / residual_se).powi(2) - 1.0 / n as f64) * x_ss;
        let x_mean = x_mean_sq.max(0.0).sqrt();
        let t_intercept = intercept / se_intercept;
        let t_slope = slope / se_slope;
        let f_stat = t_slope * t_slope;
        let ssr = residual_se * residual_se * df as f64;
        let ssm = slope * slope * x_ss;
        let r2 = ssm / (ssm + ssr);
        Ok(Self {
            intercept,
            slope,
            se_intercept,
            se_slope,
            t_intercept,
            t_slope,
            p_intercept: t_two_sided_p(t_intercept, df as f64)?,
            p_slope: t_two_sided_p(t_slope, df as f64)?,
            r2,
            adj_r2: 1.0 - (1.0 - r2) * (n - 1) as f64 / df as f64,
            residual_se,
            f_stat,
            p_f: f_sf(f_stat, 1.0, df as f64)?,
            df_model: 1,
            df_resid: df,
            n,
            x_mean,
            x_ss,
            residuals: Vec::new(),
        })
    }

    pub fn is_fitted(&self) -> bool {
        self.n >= 3
            && self.df_resid + 2 == self.n
            && [self.intercept, self.slope, self.residual_se, self.x_mean, self.x_ss].iter().all(|v| v.is_finite())
            && self.x_ss > 0.0
    }

    /// Coefficient table in the conventional regression-summary layout.
    pub fn summary_table(&self, predictor: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<22}{:>24}\n", "", "Estimate"));
        out.push_str(&format!("{}\n", "-".repeat(46)));
        let coef = |v: f64, se: f64, p: f64| format!("{:.3}{:<3} ({:.3})", v, significance_stars(p), se);
        out.push_str(&format!(
            "{:<22}{:>24}\n",
            "Intercept",
            coef(self.intercept, self.se_intercept, self.p_intercept)
        ));
        out.push_str(&format!("{:<22}{:>24}\n", predictor, coef(self.slope, self.se_slope, self.p_slope)));
        out.push_str(&format!("{:<22}{:>24}\n", "N", self.n));
        out.push_str(&format!("{:<22}{:>24.3}\n", "R2", self.r2));
        out.push_str(&format!("{:<22}{:>24.3}\n", "Adjusted R2", self.adj_r2));
        out.push_str(&format!(
            "{:<22}{:>24}\n",
            "Residual Std. Error",
            format!("{:.3} (df={})", self.residual_se, self.df_resid)
        ));
        out.push_str(&format!(
            "{:<22}{:>24}\n",
            "F Statistic",
            format!("{:.1}{} (df={};{})", self.f_stat, significance_stars(self.p_f), self.df_model, self.df_resid)
        ));
        out.push_str(&format!("{}\n", "-".repeat(46)));
        out.push_str("*p<0.1; **p<0.05; ***p<0.01\n");
        out
    }
}

/// Fits ground-truth MAC on platform MAC.
pub fn ols_fit(pairs: &[ValidationPair]) -> Result<CalibrationModel, StatsError> {
    let x: Vec<f64> = pairs.iter().map(|p| p.mac_fb).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.mac_truth).collect();
    fit_xy(&x, &y)
}

/// Least-squares fit of `y` on `x` with an intercept.
pub fn fit_xy(x: &[f64], y: &[f64]) -> Result<CalibrationModel, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: n });
    }
    check_finite(x)?;
    check_finite(y)?;

    let nf = n as f64;
    let x_mean = x.iter().sum::<f64>() / nf;
    let y_mean = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - x_mean;
        let dy = yi - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateDesign);
    }

    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| yi - (intercept + slope * xi)).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();

    let df_resid = n - 2;
    let df = df_resid as f64;
    let sigma2 = ssr / df;
    let residual_se = sigma2.sqrt();
    let se_slope = (sigma2 / sxx).sqrt();
    let se_intercept = (sigma2 * (1.0 / nf + x_mean * x_mean / sxx)).sqrt();

    // y constant: nothing left to explain, the fit is exact
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    let adj_r2 = 1.0 - (1.0 - r2) * (nf - 1.0) / df;

    let ssm = slope * sxy;
    let f_stat = if ssr == 0.0 {
        if ssm == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        ssm / sigma2
    };
    let t_slope = slope / se_slope;
    let t_intercept = intercept / se_intercept;

    Ok(CalibrationModel {
        intercept,
        slope,
        se_intercept,
        se_slope,
        t_intercept,
        t_slope,
        p_intercept: p_from_t(t_intercept, df)?,
        p_slope: p_from_t(t_slope, df)?,
        r2,
        adj_r2,
        residual_se,
        f_stat,
        p_f: if f_stat.is_nan() { 1.0 } else { f_sf(f_stat, 1.0, df)? },
        df_model: 1,
        df_resid,
        n,
        x_mean,
        x_ss: sxx,
        residuals,
    })
}

// 0/0 arises for a zero coefficient on an exact fit; nothing is significant there
fn p_from_t(t: f64, df: f64) -> Result<f64, StatsError> {
    if t.is_nan() {
        Ok(1.0)
    } else {
        t_two_sided_p(t, df)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = fit_xy(&x, &y).unwrap();
        assert_eq!(m.slope, 2.0);
        assert_eq!(m.intercept, 1.0);
        assert_eq!(m.r2, 1.0);
        assert_eq!(m.residual_se, 0.0);
        assert_eq!(m.p_slope, 0.0);
        assert!(m.f_stat.is_infinite());
    }

    #[test]
    fn small_hand_computed_fit() {
        // x = 1..4, y = [2, 3, 5, 4]: slope 0.8, intercept 1.5, SSR 1.8, SST 5
        let m = fit_xy(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 5.0, 4.0]).unwrap();
        assert!((m.slope - 0.8).abs() < 1e-15);
        assert!((m.intercept - 1.5).abs() < 1e-15);
        assert!((m.r2 - 0.64).abs() < 1e-15);
        assert!((m.adj_r2 - 0.46).abs() < 1e-14);
        assert!((m.residual_se - 0.9f64.sqrt()).abs() < 1e-15);
        assert!((m.se_slope - (0.9f64 / 5.0).sqrt()).abs() < 1e-15);
        assert!((m.f_stat - 3.2 / 0.9).abs() < 1e-13);
        assert_eq!(m.df_resid, 2);
        assert!((m.residuals.iter().sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert_eq!(fit_xy(&[1.0, 2.0], &[1.0, 2.0]).unwrap_err(), StatsError::TooFewPoints { needed: 3, got: 2 });
        assert_eq!(fit_xy(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]).unwrap_err(), StatsError::DegenerateDesign);
        assert_eq!(fit_xy(&[1.0, 2.0, 3.0], &[1.0, 2.0]).unwrap_err(), StatsError::LengthMismatch(3, 2));
        assert_eq!(fit_xy(&[1.0, 2.0, f64::NAN], &[1.0, 2.0, 3.0]).unwrap_err(), StatsError::NonFiniteInput);
    }

    #[test]
    fn constant_response() {
        let m = fit_xy(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap();
        assert_eq!(m.slope, 0.0);
        assert_eq!(m.r2, 1.0);
        assert_eq!(m.p_slope, 1.0);
    }

    #[test]
    fn summary_round_trip_recovers_design() {
        let x: Vec<f64> = (0..20).map(|i| 28.0 + 0.5 * i as f64).collect();
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 7.0 + 0.8 * v + if i % 2 == 0 { 0.6 } else { -0.6 }).collect();
        let m = fit_xy(&x, &y).unwrap();
        let r = CalibrationModel::from_summary(m.intercept, m.slope, m.se_intercept, m.se_slope, m.residual_se, m.n)
            .unwrap();
        assert!((r.x_mean - m.x_mean).abs() < 1e-9 * m.x_mean);
        assert!((r.x_ss - m.x_ss).abs() < 1e-9 * m.x_ss);
        assert!((r.r2 - m.r2).abs() < 1e-12);
        assert!((r.f_stat - m.f_stat).abs() < 1e-9 * m.f_stat);
    }

    #[test]
    fn interval_contains_point_and_widens_away_from_mean() {
        let m = fit_xy(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1.2, 1.9, 3.2, 3.8, 5.1, 6.2]).unwrap();
        let (lo, hi) = m.prediction_interval(m.x_mean, 0.95).unwrap();
        assert!(lo < m.predict(m.x_mean) && m.predict(m.x_mean) < hi);
        let w_mid = m.interval_half_width(m.x_mean, 0.95).unwrap();
        assert!(m.interval_half_width(m.x_mean + 2.0, 0.95).unwrap() > w_mid);
        assert!(m.interval_half_width(m.x_mean - 2.0, 0.95).unwrap() > w_mid);
    }
}
