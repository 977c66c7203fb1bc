use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

fn f(x: &BigRational) -> f64 {
    x.to_f64().expect("representable")
}

fn int(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Simple regression statistics evaluated exactly from the uncentred
/// normal equations; only the final square roots are taken in f64.
#[derive(Debug, Clone, Copy)]
pub struct ExactFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    pub residual_se: f64,
    pub r2: f64,
    pub f_stat: f64,
}

pub fn exact_ols(x: &[f64], y: &[f64]) -> ExactFit {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    assert!(n >= 3);
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) =
        (BigRational::zero(), BigRational::zero(), BigRational::zero(), BigRational::zero(), BigRational::zero());
    for (xi, yi) in x.iter().zip(y) {
        let (a, b) = (q(*xi), q(*yi));
        sxx += &a * &a;
        sxy += &a * &b;
        syy += &b * &b;
        sx += a;
        sy += b;
    }
    let nn = int(n);
    // [[n, Σx], [Σx, Σx²]] β = [Σy, Σxy], Cramer's rule
    let det = &nn * &sxx - &sx * &sx;
    assert!(!det.is_zero(), "degenerate design");
    let slope = (&nn * &sxy - &sx * &sy) / &det;
    let intercept = (&sxx * &sy - &sx * &sxy) / &det;

    let cxx = &det / &nn;
    let cxy = (&nn * &sxy - &sx * &sy) / &nn;
    let cyy = (&nn * &syy - &sy * &sy) / &nn;
    let ssr = &cyy - &cxy * &cxy / &cxx;
    let df = int(n - 2);
    let s2 = &ssr / &df;
    let var_slope = &s2 * &nn / &det;
    let var_intercept = &s2 * &sxx / &det;
    let r2 = if cyy.is_zero() { BigRational::from_integer(1.into()) } else { BigRational::from_integer(1.into()) - &ssr / &cyy };
    let f_stat = if s2.is_zero() { f64::INFINITY } else { f(&((&cyy - &ssr) / &s2)) };
    ExactFit {
        intercept: f(&intercept),
        slope: f(&slope),
        se_intercept: f(&var_intercept).sqrt(),
        se_slope: f(&var_slope).sqrt(),
        residual_se: f(&s2).sqrt(),
        r2: f(&r2),
        f_stat,
    }
}

/// `1 + #smaller + (#equal − 1)/2` for every element.
pub fn rank_by_counting(xs: &[f64]) -> Vec<BigRational> {
    xs.iter()
        .map(|&v| {
            let smaller = xs.iter().filter(|&&w| w < v).count();
            let equal = xs.iter().filter(|&&w| w == v).count();
            int(1 + smaller) + BigRational::new(BigInt::from(equal - 1), BigInt::from(2))
        })
        .collect()
}

/// [`rank_by_counting`] as floats; ranks are half-integers, so exact.
pub fn rank_by_counting_f64(xs: &[f64]) -> Vec<f64> {
    rank_by_counting(xs).iter().map(f).collect()
}

/// Spearman's rho from counted ranks: rho² is exact, the root is f64.
/// `None` when either rank vector is constant.
pub fn exact_spearman_rho(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let rx = rank_by_counting(xs);
    let ry = rank_by_counting(ys);
    let n = int(xs.len());
    let mx = rx.iter().fold(BigRational::zero(), |a, b| a + b) / &n;
    let my = ry.iter().fold(BigRational::zero(), |a, b| a + b) / &n;
    let (mut cxy, mut cxx, mut cyy) = (BigRational::zero(), BigRational::zero(), BigRational::zero());
    for (a, b) in rx.iter().zip(&ry) {
        let da = a - &mx;
        let db = b - &my;
        cxy += &da * &db;
        cxx += &da * &da;
        cyy += &db * &db;
    }
    if cxx.is_zero() || cyy.is_zero() {
        return None;
    }
    let rho2 = &cxy * &cxy / (&cxx * &cyy);
    let mag = f(&rho2).sqrt();
    Some(if cxy.is_negative() { -mag } else { mag })
}

/// `Σ wᵢ vᵢ / Σ wᵢ` in exact arithmetic, rounded once.
pub fn exact_weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let num = values.iter().zip(weights).fold(BigRational::zero(), |acc, (v, w)| acc + q(*v) * q(*w));
    let den = weights.iter().fold(BigRational::zero(), |acc, w| acc + q(*w));
    f(&(num / den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let fit = exact_ols(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]);
        assert_eq!((fit.intercept, fit.slope, fit.residual_se, fit.r2), (1.0, 2.0, 0.0, 1.0));
    }

    #[test]
    fn counted_ranks() {
        let r: Vec<f64> = rank_by_counting(&[5.0, 5.0, 9.0, 1.0]).iter().map(f).collect();
        assert_eq!(r, [2.5, 2.5, 4.0, 1.0]);
    }

    #[test]
    fn weighted_mean() {
        assert_eq!(exact_weighted_mean(&[1.0, 3.0], &[1.0, 1.0]), 2.0);
    }
}
