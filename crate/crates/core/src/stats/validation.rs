use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_finite, fit_xy, ols_fit, spearman, StatsError};
use crate::domain::{Continent, Iso2};
use crate::groundtruth::ValidationPair;

/// Mean absolute percentage error, in percent.
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64, StatsError> {
    if pred.len() != truth.len() {
        return Err(StatsError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    check_finite(pred)?;
    check_finite(truth)?;
    if let Some(i) = truth.iter().position(|t| *t == 0.0) {
        return Err(StatsError::ZeroTruth(i));
    }
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| ((p - t) / t).abs()).sum();
    Ok(100.0 * total / pred.len() as f64)
}

/// Sample standard deviation over mean, in percent. `None` below two values
/// or for a zero mean.
pub fn coefficient_of_variation(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return None;
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(100.0 * var.sqrt() / mean.abs())
}

/// Agreement statistics for one group of (prediction, truth) values.
/// Correlation fields are `None` when undefined (fewer than three points or
/// a constant vector).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub spearman_rho: Option<f64>,
    pub spearman_p: Option<f64>,
    pub mape: Option<f64>,
    pub n: usize,
}

impl MetricRow {
    fn compute(pred: &[f64], truth: &[f64]) -> Result<Self, StatsError> {
        let n = pred.len();
        let (rho, p) = match spearman(pred, truth) {
            Ok(s) => (Some(s.rho), Some(s.p)),
            Err(StatsError::TooFewPoints { .. } | StatsError::DegenerateInput) => (None, None),
            Err(e) => return Err(e),
        };
        let mape = if n == 0 { None } else { Some(mape(pred, truth)?) };
        Ok(Self { spearman_rho: rho, spearman_p: p, mape, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedMetrics {
    pub per_continent: BTreeMap<Continent, MetricRow>,
    pub overall: MetricRow,
}

/// Spearman and MAPE per continent and over everything.
pub fn grouped_metrics(items: &[(Continent, f64, f64)]) -> Result<GroupedMetrics, StatsError> {
    let mut groups: BTreeMap<Continent, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for &(c, p, t) in items {
        let g = groups.entry(c).or_default();
        g.0.push(p);
        g.1.push(t);
    }
    let per_continent = groups
        .into_iter()
        .map(|(c, (p, t))| MetricRow::compute(&p, &t).map(|row| (c, row)))
        .collect::<Result<_, _>>()?;
    let pred: Vec<f64> = items.iter().map(|i| i.1).collect();
    let truth: Vec<f64> = items.iter().map(|i| i.2).collect();
    Ok(GroupedMetrics { per_continent, overall: MetricRow::compute(&pred, &truth)? })
}

/// Which observations a leave-one-out fold trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoocvScope {
    /// Every other observation.
    #[default]
    Global,
    /// Only the other observations from the same continent. Continents with
    /// fewer than four observations produce no predictions.
    Continent,
}

impl fmt::Display for LoocvScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoocvScope::Global => "global",
            LoocvScope::Continent => "continent",
        })
    }
}

impl FromStr for LoocvScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(LoocvScope::Global),
            "continent" => Ok(LoocvScope::Continent),
            other => Err(format!("unknown loocv scope '{other}' (expected global|continent)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvResult {
    pub predictions: BTreeMap<Iso2, f64>,
    pub grouped: GroupedMetrics,
}

/// Leave-one-out cross-validation of the calibration regression.
///
/// Each held-out pair is predicted by a model refitted without it; the
/// held-out predictions are then scored against the truth per continent.
pub fn loocv(pairs: &[ValidationPair], scope: LoocvScope) -> Result<LoocvResult, StatsError> {
    if pairs.len() < 4 {
        return Err(StatsError::TooFewPoints { needed: 4, got: pairs.len() });
    }
    let preds: Vec<Option<f64>> = match scope {
        LoocvScope::Global => fold_predictions(pairs)?.into_iter().map(Some).collect(),
        LoocvScope::Continent => {
            let mut out = vec![None; pairs.len()];
            for continent in Continent::ALL {
                let idx: Vec<usize> =
                    (0..pairs.len()).filter(|&i| pairs[i].country.continent == continent).collect();
                if idx.len() < 4 {
                    if !idx.is_empty() {
                        log::warn!("loocv: {continent} has {} pairs, too few for a per-continent fit", idx.len());
                    }
                    continue;
                }
                let subset: Vec<ValidationPair> = idx.iter().map(|&i| pairs[i].clone()).collect();
                for (i, p) in idx.into_iter().zip(fold_predictions(&subset)?) {
                    out[i] = Some(p);
                }
            }
            out
        }
    };

    let mut predictions = BTreeMap::new();
    let mut items = Vec::with_capacity(pairs.len());
    for (pair, pred) in pairs.iter().zip(preds) {
        if let Some(p) = pred {
            predictions.insert(pair.country.iso2, p);
            items.push((pair.country.continent, p, pair.mac_truth));
        }
    }
    Ok(LoocvResult { predictions, grouped: grouped_metrics(&items)? })
}

fn fold_predictions(pairs: &[ValidationPair]) -> Result<Vec<f64>, StatsError> {
    use rayon::prelude::*;
    let x: Vec<f64> = pairs.iter().map(|p| p.mac_fb).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.mac_truth).collect();
    (0..pairs.len())
        .into_par_iter()
        .map(|held_out| {
            let xs: Vec<f64> = x.iter().enumerate().filter(|(i, _)| *i != held_out).map(|(_, v)| *v).collect();
            let ys: Vec<f64> = y.iter().enumerate().filter(|(i, _)| *i != held_out).map(|(_, v)| *v).collect();
            fit_xy(&xs, &ys).map(|m| m.predict(x[held_out]))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSplitResult {
    pub mean_mape: f64,
    pub per_run: Vec<f64>,
    pub seed: u64,
    pub test_size: usize,
}

/// Repeated random train/test splits of the calibration regression.
///
/// Every run draws `test_size` pairs without replacement (partial
/// Fisher-Yates over a ChaCha8 stream seeded from `seed`), fits on the
/// rest and records the test-set MAPE.
pub fn random_split_validation(
    pairs: &[ValidationPair],
    runs: usize,
    test_size: usize,
    seed: u64,
) -> Result<RandomSplitResult, StatsError> {
    if pairs.len() < test_size + 3 {
        return Err(StatsError::TooFewPoints { needed: test_size + 3, got: pairs.len() });
    }
    if runs == 0 || test_size == 0 {
        return Err(StatsError::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = pairs.len();
    let mut per_run = Vec::with_capacity(runs);
    for _ in 0..runs {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..test_size {
            let j = rng.random_range(i..n);
            idx.swap(i, j);
        }
        let (test, train) = idx.split_at(test_size);
        let train: Vec<ValidationPair> = train.iter().map(|&i| pairs[i].clone()).collect();
        let model = ols_fit(&train)?;
        let pred: Vec<f64> = test.iter().map(|&i| model.predict(pairs[i].mac_fb)).collect();
        let truth: Vec<f64> = test.iter().map(|&i| pairs[i].mac_truth).collect();
        per_run.push(mape(&pred, &truth)?);
    }
    let mean_mape = per_run.iter().sum::<f64>() / runs as f64;
    Ok(RandomSplitResult { mean_mape, per_run, seed, test_size })
}
