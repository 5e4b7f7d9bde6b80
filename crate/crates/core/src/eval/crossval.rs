use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

use super::{accuracy, f1_scores, kfold_assignments, lssvm_fit, LabeledFeatures};

/// Validation score maximized by [`crossval_gamma`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    MicroF1,
    MacroF1,
}

impl Metric {
    pub fn score(&self, pred: &[usize], truth: &[usize]) -> Result<f64> {
        match self {
            Metric::Accuracy => accuracy(pred, truth),
            Metric::MicroF1 => Ok(f1_scores(pred, truth)?.0),
            Metric::MacroF1 => Ok(f1_scores(pred, truth)?.1),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "micro_f1" => Ok(Metric::MicroF1),
            "macro_f1" => Ok(Metric::MacroF1),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::MicroF1 => "micro_f1",
            Metric::MacroF1 => "macro_f1",
        })
    }
}

/// Picks the bandwidth whose features give the best mean validation score of
/// an LSSVM classifier over stratified folds. `features_for(γ)` returns one
/// feature row per labeled sample. Ties go to the smaller γ.
pub fn crossval_gamma(
    grid: &[f64],
    labels: &[usize],
    folds: usize,
    seed: u64,
    metric: Metric,
    gamma_reg: f64,
    mut features_for: impl FnMut(f64) -> Result<DenseMatrix>,
) -> Result<f64> {
    let mut grid: Vec<f64> = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let assign = kfold_assignments(labels, folds, seed)?;
    let mut best = (f64::NEG_INFINITY, grid[0]);
    for &gamma in &grid {
        let features = features_for(gamma)?;
        if features.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: labels.len(),
                got: features.rows(),
            });
        }
        let mut total = 0.0;
        let mut used = 0;
        for k in 0..folds {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assign[i] == k);
            if val.is_empty() {
                continue;
            }
            let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let val_labels: Vec<usize> = val.iter().map(|&i| labels[i]).collect();
            let f_train = features.select_rows(&train);
            let model = match lssvm_fit(&LabeledFeatures::new(&f_train, &train_labels)?, gamma_reg) {
                Ok(m) => m,
                Err(Error::SingleClass(_)) => continue,
                Err(e) => return Err(e),
            };
            let pred = model.predict(&features.select_rows(&val))?;
            total += metric.score(&pred, &val_labels)?;
            used += 1;
        }
        let mean = if used == 0 { f64::NEG_INFINITY } else { total / used as f64 };
        log::debug!("gamma {gamma}: mean {metric} {mean:.4}");
        if mean > best.0 {
            best = (mean, gamma);
        }
    }
    Ok(best.1)
}
