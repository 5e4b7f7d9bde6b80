//! Feature extraction by kernel SVD and its baselines, and the downstream
//! protocols built on it: node classification, graph reconstruction, and
//! tabular classification and regression.

use std::fmt;
use std::str::FromStr;

use crate::compat::{CompatMatrix, CompatMode};
use crate::data::{GraphDataset, TabularDataset, Targets};
use crate::error::{Error, Result};
use crate::eval::{
    accuracy, auroc, f1_scores, graph_reconstruct_directed, lssvm_fit, lssvm_regress, reconstruction_error, rmse,
    stratified_split, uniform_split, LabeledFeatures, LssvmModel,
};
use crate::kernels::{DataSources, KernelFamily, KernelSpec};
use crate::ksvd::{fit, fit_sources, EmbeddingSide, FitOptions, KsvdModel, KsvdSolver};
use crate::linalg::{dot, svd_exact, svd_truncated, DenseMatrix, SvdResult, RANK_TOL};

/// Above this size the linear baselines use the truncated solver.
const EXACT_LIMIT: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Kernel SVD with the configured (asymmetric) kernel.
    Ksvd,
    /// Kernel PCA: RBF kernel between row samples.
    Kpca,
    /// Plain SVD of the data matrix.
    Svd,
    /// PCA of the column-centered data matrix.
    Pca,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ksvd, Method::Kpca, Method::Svd, Method::Pca];

    /// Whether the method yields separate left and right features.
    pub fn two_sided(&self) -> bool {
        matches!(self, Method::Ksvd | Method::Svd)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ksvd" => Ok(Method::Ksvd),
            "kpca" => Ok(Method::Kpca),
            "svd" => Ok(Method::Svd),
            "pca" => Ok(Method::Pca),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Ksvd => "ksvd",
            Method::Kpca => "kpca",
            Method::Svd => "svd",
            Method::Pca => "pca",
        })
    }
}

/// How left and right features are combined for samples that have both
/// (square data such as graphs).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureSides {
    /// First ⌈F/2⌉ left and ⌊F/2⌋ right features side by side.
    Both,
    Left,
}

impl FromStr for FeatureSides {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "both" | "concat" => Ok(FeatureSides::Both),
            "left" => Ok(FeatureSides::Left),
            other => Err(Error::Config(format!("unknown feature sides '{other}'"))),
        }
    }
}

/// Settings shared by every method. `fit.kernel` and `fit.gamma_k` also set
/// the RBF bandwidth of kernel PCA.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureParams {
    pub fit: FitOptions,
    /// Kernel PCA on graphs uses rows of `(A + Aᵀ)/2`.
    pub kpca_symmetrize: bool,
}

impl FeatureParams {
    pub fn new(fit: FitOptions) -> Self {
        Self {
            fit,
            kpca_symmetrize: true,
        }
    }
}

#[derive(Clone, Debug)]
enum Inner {
    Kernel(Box<KsvdModel>),
    Linear {
        /// M×r right singular vectors.
        v: DenseMatrix,
        s: Vec<f64>,
        /// Column means removed before factorizing (PCA).
        means: Option<Vec<f64>>,
    },
}

/// A fitted feature extractor.
#[derive(Clone, Debug)]
pub struct FeatureModel {
    pub method: Method,
    inner: Inner,
}

/// Output of [`extract`].
#[derive(Clone, Debug)]
pub struct Extracted {
    /// N×r features of the rows.
    pub left: DenseMatrix,
    /// M×r features of the columns, for two-sided methods.
    pub right: Option<DenseMatrix>,
    /// Singular values (or kernel eigenvalues), descending.
    pub lambda: Vec<f64>,
    pub model: FeatureModel,
}

fn linear_svd(a: &DenseMatrix, r: usize) -> Result<SvdResult> {
    let mut svd = if a.rows().min(a.cols()) <= EXACT_LIMIT {
        svd_exact(a, RANK_TOL)?.truncated(r)
    } else {
        svd_truncated(a, r, 1e-12, 1000)?
    };
    svd.canonicalize();
    if svd.s.len() < r {
        log::warn!("data has numerical rank {}; truncating the requested rank {r}", svd.s.len());
    }
    Ok(svd)
}

fn column_means(a: &DenseMatrix) -> Vec<f64> {
    let n = a.rows() as f64;
    let mut means = vec![0.0; a.cols()];
    for row in a.row_iter() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    means
}

fn symmetrized(a: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(a.add(&a.transpose())?.scale(0.5))
}

/// Fits `method` with rank `params.fit.rank` on the data matrix `a`.
pub fn extract(a: &DenseMatrix, method: Method, params: &FeatureParams) -> Result<Extracted> {
    let r = params.fit.rank;
    match method {
        Method::Ksvd => {
            let model = fit(a, &params.fit)?;
            let k = model.rank();
            Ok(Extracted {
                left: model.transform(EmbeddingSide::Left, k)?.features,
                right: Some(model.transform(EmbeddingSide::Right, k)?.features),
                lambda: model.lambda.clone(),
                model: FeatureModel {
                    method,
                    inner: Inner::Kernel(Box::new(model)),
                },
            })
        }
        Method::Kpca => {
            let data = if params.kpca_symmetrize && a.is_square() {
                symmetrized(a)?
            } else {
                a.clone()
            };
            if r > data.rows() {
                return Err(Error::RankTooLarge {
                    rank: r,
                    limit: data.rows(),
                });
            }
            let mut opts = params.fit.clone();
            opts.kernel = KernelSpec::new(KernelFamily::Rbf, params.fit.kernel.gamma)?;
            opts.center = true;
            let sources = DataSources {
                x: data.clone(),
                z: data,
            };
            let model = fit_sources(sources, CompatMatrix::identity(), &opts)?;
            let k = model.rank();
            Ok(Extracted {
                left: model.transform(EmbeddingSide::Left, k)?.features,
                right: None,
                lambda: model.lambda.clone(),
                model: FeatureModel {
                    method,
                    inner: Inner::Kernel(Box::new(model)),
                },
            })
        }
        Method::Svd => {
            let svd = linear_svd(a, r)?;
            Ok(Extracted {
                left: svd.u.clone(),
                right: Some(svd.v.clone()),
                lambda: svd.s.clone(),
                model: FeatureModel {
                    method,
                    inner: Inner::Linear {
                        v: svd.v,
                        s: svd.s,
                        means: None,
                    },
                },
            })
        }
        Method::Pca => {
            let means = column_means(a);
            let centered = DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] - means[j]);
            let svd = linear_svd(&centered, r)?;
            Ok(Extracted {
                left: svd.u.clone(),
                right: None,
                lambda: svd.s.clone(),
                model: FeatureModel {
                    method,
                    inner: Inner::Linear {
                        v: svd.v,
                        s: svd.s,
                        means: Some(means),
                    },
                },
            })
        }
    }
}

impl FeatureModel {
    /// Left features of new row samples, consistent with the training
    /// features.
    pub fn transform_rows(&self, rows: &DenseMatrix) -> Result<DenseMatrix> {
        match &self.inner {
            Inner::Kernel(model) => model.transform_oos_batch(EmbeddingSide::Left, rows),
            Inner::Linear { v, s, means } => {
                if rows.cols() != v.rows() {
                    return Err(Error::DimensionMismatch {
                        left: v.rows(),
                        right: rows.cols(),
                    });
                }
                let out: Vec<Vec<f64>> = rows
                    .row_iter()
                    .map(|x| {
                        let x: Vec<f64> = match means {
                            Some(m) => x.iter().zip(m).map(|(a, b)| a - b).collect(),
                            None => x.to_vec(),
                        };
                        (0..s.len()).map(|k| dot(&x, &v.column(k)) / s[k]).collect()
                    })
                    .collect();
                DenseMatrix::from_rows(&out)
            }
        }
    }

    pub fn kernel_model(&self) -> Option<&KsvdModel> {
        match &self.inner {
            Inner::Kernel(m) => Some(m),
            Inner::Linear { .. } => None,
        }
    }
}

/// `F` node features from a square data matrix: left and right features side
/// by side for two-sided methods (unless `sides` is `Left`), otherwise the
/// leading left features.
pub fn node_features(a: &DenseMatrix, method: Method, params: &FeatureParams, total: usize, sides: FeatureSides) -> Result<DenseMatrix> {
    let both = sides == FeatureSides::Both && method.two_sided();
    let k_left = if both { total.div_ceil(2) } else { total };
    let mut p = params.clone();
    p.fit.rank = k_left;
    let ext = extract(a, method, &p)?;
    let k_left = k_left.min(ext.left.cols());
    let left = ext.left.leading_columns(k_left);
    match (both, &ext.right) {
        (true, Some(right)) => {
            let k_right = (total - total.div_ceil(2)).min(right.cols());
            left.hcat(&right.leading_columns(k_right))
        }
        _ => Ok(left),
    }
}

/// Train/test protocol for the downstream learners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Protocol {
    pub test_fraction: f64,
    pub seed: u64,
    /// LSSVM regularization.
    pub gamma_reg: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 0,
            gamma_reg: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// One-vs-rest AUROC averaged over classes present in the test set.
    pub auroc: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
}

impl ClassificationReport {
    pub fn metrics(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("micro_f1", self.micro_f1),
            ("macro_f1", self.macro_f1),
            ("accuracy", self.accuracy),
        ];
        if let Some(a) = self.auroc {
            out.push(("auroc", a));
        }
        out
    }
}

fn mean_auroc(model: &LssvmModel, features: &DenseMatrix, truth: &[usize]) -> Result<Option<f64>> {
    let scores = model.decision_values(features)?;
    let mut total = 0.0;
    let mut count = 0;
    for (k, &c) in model.classes.iter().enumerate() {
        let labels: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        if labels.iter().all(|&b| b) || labels.iter().all(|&b| !b) {
            continue;
        }
        total += auroc(&scores.column(k), &labels)?;
        count += 1;
        if model.classes.len() == 2 {
            break;
        }
    }
    Ok((count > 0).then(|| total / count as f64))
}

fn evaluate_classifier(
    train_f: &DenseMatrix,
    train_y: &[usize],
    test_f: &DenseMatrix,
    test_y: &[usize],
    gamma_reg: f64,
) -> Result<ClassificationReport> {
    let model = lssvm_fit(&LabeledFeatures::new(train_f, train_y)?, gamma_reg)?;
    let pred = model.predict(test_f)?;
    let (micro_f1, macro_f1) = f1_scores(&pred, test_y)?;
    Ok(ClassificationReport {
        micro_f1,
        macro_f1,
        accuracy: accuracy(&pred, test_y)?,
        auroc: mean_auroc(&model, test_f, test_y)?,
        n_train: train_y.len(),
        n_test: test_y.len(),
    })
}

fn check_classes(labels: &[usize]) -> Result<()> {
    let first = labels.first().copied().unwrap_or(0);
    if labels.iter().all(|&l| l == first) {
        return Err(Error::SingleClass(first));
    }
    Ok(())
}

/// Node classification: features from the whole adjacency matrix, an
/// LSSVM trained on a seeded stratified split of the labeled nodes.
pub fn node_classification(
    graph: &GraphDataset,
    method: Method,
    params: &FeatureParams,
    total_features: usize,
    sides: FeatureSides,
    protocol: &Protocol,
) -> Result<ClassificationReport> {
    let (nodes, labels) = graph.labeled();
    if nodes.is_empty() {
        return Err(Error::Config(format!("graph '{}' has no labels", graph.name)));
    }
    check_classes(&labels)?;
    let features = node_features(&graph.adjacency, method, params, total_features, sides)?;
    let (train, test) = stratified_split(&labels, protocol.test_fraction, protocol.seed)?;
    let pick = |idx: &[usize]| -> (DenseMatrix, Vec<usize>) {
        let rows: Vec<usize> = idx.iter().map(|&k| nodes[k]).collect();
        (features.select_rows(&rows), idx.iter().map(|&k| labels[k]).collect())
    };
    let (train_f, train_y) = pick(&train);
    let (test_f, test_y) = pick(&test);
    evaluate_classifier(&train_f, &train_y, &test_f, &test_y, protocol.gamma_reg)
}

/// Graph reconstruction from rank-`params.fit.rank` features: each node links
/// to as many nearest targets as its true out-degree. Two-sided methods
/// compare left (source) with right (target) features.
pub fn graph_reconstruction(graph: &GraphDataset, method: Method, params: &FeatureParams) -> Result<(f64, f64)> {
    let ext = extract(&graph.adjacency, method, params)?;
    let targets = ext.right.as_ref().unwrap_or(&ext.left);
    let recon = graph_reconstruct_directed(&ext.left, targets, &graph.out_degrees())?;
    reconstruction_error(&recon, &graph.adjacency)
}

/// Tabular classification: features fitted on a seeded stratified training
/// split, test rows mapped out of sample.
pub fn tabular_classification(
    data: &TabularDataset,
    method: Method,
    params: &FeatureParams,
    protocol: &Protocol,
) -> Result<ClassificationReport> {
    let Targets::Classes { ids, .. } = &data.targets else {
        return Err(Error::Config("classification needs class targets".into()));
    };
    check_classes(ids)?;
    let (train, test) = stratified_split(ids, protocol.test_fraction, protocol.seed)?;
    let (train_f, test_f) = inductive_features(data, method, params, &train, &test)?;
    let train_y: Vec<usize> = train.iter().map(|&i| ids[i]).collect();
    let test_y: Vec<usize> = test.iter().map(|&i| ids[i]).collect();
    evaluate_classifier(&train_f, &train_y, &test_f, &test_y, protocol.gamma_reg)
}

/// Tabular regression; returns the test RMSE.
pub fn tabular_regression(
    data: &TabularDataset,
    method: Method,
    params: &FeatureParams,
    protocol: &Protocol,
) -> Result<f64> {
    let Targets::Values(y) = &data.targets else {
        return Err(Error::Config("regression needs numeric targets".into()));
    };
    let (train, test) = uniform_split(y.len(), protocol.test_fraction, protocol.seed)?;
    let (train_f, test_f) = inductive_features(data, method, params, &train, &test)?;
    let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let test_y: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    let model = lssvm_regress(&LabeledFeatures::new(&train_f, &train_y)?, protocol.gamma_reg)?;
    rmse(&model.predict(&test_f)?, &test_y)
}

fn inductive_features(
    data: &TabularDataset,
    method: Method,
    params: &FeatureParams,
    train: &[usize],
    test: &[usize],
) -> Result<(DenseMatrix, DenseMatrix)> {
    let x_train = data.features.select_rows(train);
    let x_test = data.features.select_rows(test);
    let mut p = params.clone();
    p.kpca_symmetrize = false;
    if method == Method::Ksvd && p.fit.compat.is_none() && !x_train.is_square() {
        p.fit.compat = Some(CompatMode::Pca);
    }
    let ext = extract(&x_train, method, &p)?;
    let test_f = ext.model.transform_rows(&x_test)?;
    Ok((ext.left, test_f))
}

/// Default options for the named solver.
pub fn solver_from_name(name: &str, seed: u64) -> Result<KsvdSolver> {
    match name.to_ascii_lowercase().as_str() {
        "exact" => Ok(KsvdSolver::Exact),
        "truncated" | "tsvd" => Ok(KsvdSolver::truncated()),
        "randomized" | "rsvd" => Ok(KsvdSolver::randomized(seed)),
        "nystrom" => Ok(KsvdSolver::Nystrom(crate::nystrom::NystromConfig::new(1, 0, 0, seed))),
        other => Err(Error::Config(format!("unknown solver '{other}'"))),
    }
}
