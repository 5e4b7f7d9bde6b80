use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};

/// Features with one label per row.
#[derive(Clone, Debug)]
pub struct LabeledFeatures<'a, L> {
    pub features: &'a DenseMatrix,
    pub labels: &'a [L],
}

impl<'a, L> LabeledFeatures<'a, L> {
    pub fn new(features: &'a DenseMatrix, labels: &'a [L]) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }
}

/// One-vs-rest least-squares SVM with a linear kernel on the features.
#[derive(Clone, Debug, PartialEq)]
pub struct LssvmModel {
    /// Sorted class ids; `weights[k]` and `bias[k]` belong to `classes[k]`.
    pub classes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub gamma_reg: f64,
}

/// Least-squares SVM regressor with a linear kernel on the features.
#[derive(Clone, Debug, PartialEq)]
pub struct LssvmRegressor {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub gamma_reg: f64,
}

/// Ridge system shared by every target: features centered so the bias is
/// not penalized, and the Cholesky factor of `FcᵀFc + I/γ`.
struct RidgeSystem {
    means: Vec<f64>,
    centered: DenseMatrix,
    chol: DenseMatrix,
}

impl RidgeSystem {
    fn new(f: &DenseMatrix, gamma_reg: f64) -> Result<Self> {
        if !(gamma_reg > 0.0 && gamma_reg.is_finite()) {
            return Err(Error::Config(format!(
                "regularization must be positive and finite, got {gamma_reg}"
            )));
        }
        let (n, d) = f.shape();
        let mut means = vec![0.0; d];
        for row in f.row_iter() {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v / n as f64;
            }
        }
        let centered = DenseMatrix::from_fn(n, d, |i, j| f[(i, j)] - means[j]);
        let mut gram = centered.t_matmul(&centered)?;
        for k in 0..d {
            gram[(k, k)] += 1.0 / gamma_reg;
        }
        Ok(Self {
            means,
            chol: cholesky(&gram)?,
            centered,
        })
    }

    /// Weights and bias for one target vector.
    fn solve(&self, y: &[f64]) -> Result<(Vec<f64>, f64)> {
        let rhs = self.centered.t_matvec(y)?;
        let w = cholesky_solve(&self.chol, &rhs);
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        // Mean residual of y − Fw.
        let b = y_mean - dot(&self.means, &w);
        Ok((w, b))
    }
}

/// Lower-triangular `L` with `L Lᵀ = a`.
fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::SingularSystem);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[(i, k)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[(k, i)] * y[k];
        }
        y[i] /= l[(i, i)];
    }
    y
}

/// Trains one binary model per class on ±1 targets.
pub fn lssvm_fit(train: &LabeledFeatures<'_, usize>, gamma_reg: f64) -> Result<LssvmModel> {
    let mut classes = train.labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.first().copied().unwrap_or(0)));
    }
    let system = RidgeSystem::new(train.features, gamma_reg)?;
    let fits = classes
        .par_iter()
        .map(|&c| {
            let y: Vec<f64> = train
                .labels
                .iter()
                .map(|&l| if l == c { 1.0 } else { -1.0 })
                .collect();
            system.solve(&y)
        })
        .collect::<Result<Vec<_>>>()?;
    let (weights, bias) = fits.into_iter().unzip();
    Ok(LssvmModel {
        classes,
        weights,
        bias,
        gamma_reg,
    })
}

impl LssvmModel {
    /// `wᵀf + b` for every class (columns) and sample (rows).
    pub fn decision_values(&self, features: &DenseMatrix) -> Result<DenseMatrix> {
        let d = self.weights.first().map_or(0, Vec::len);
        if features.cols() != d {
            return Err(Error::DimensionMismatch {
                left: d,
                right: features.cols(),
            });
        }
        Ok(DenseMatrix::from_fn(features.rows(), self.classes.len(), |i, k| {
            dot(features.row(i), &self.weights[k]) + self.bias[k]
        }))
    }

    /// Class with the largest decision value; ties go to the smaller id.
    pub fn predict(&self, features: &DenseMatrix) -> Result<Vec<usize>> {
        let scores = self.decision_values(features)?;
        Ok(scores
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for k in 1..row.len() {
                    if row[k] > row[best] {
                        best = k;
                    }
                }
                self.classes[best]
            })
            .collect())
    }
}

/// Least-squares SVM regression on real targets.
pub fn lssvm_regress(train: &LabeledFeatures<'_, f64>, gamma_reg: f64) -> Result<LssvmRegressor> {
    let system = RidgeSystem::new(train.features, gamma_reg)?;
    let (weights, bias) = system.solve(train.labels)?;
    Ok(LssvmRegressor {
        weights,
        bias,
        gamma_reg,
    })
}

impl LssvmRegressor {
    pub fn predict(&self, features: &DenseMatrix) -> Result<Vec<f64>> {
        if features.cols() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                left: self.weights.len(),
                right: features.cols(),
            });
        }
        Ok(features
            .row_iter()
            .map(|f| dot(f, &self.weights) + self.bias)
            .collect())
    }
}
