//! Downstream evaluation of extracted features: a least-squares SVM on top
//! of the features, nearest-neighbour graph reconstruction, and the metric
//! suite used to compare feature extractors.

mod crossval;
mod graph;
mod lssvm;
mod metrics;
mod report;
mod split;

pub use crossval::{crossval_gamma, Metric};
pub use graph::{graph_reconstruct, graph_reconstruct_directed, reconstruction_error};
pub use lssvm::{lssvm_fit, lssvm_regress, LabeledFeatures, LssvmModel, LssvmRegressor};
pub use metrics::{accuracy, auroc, f1_scores, rmse};
pub use report::{write_metric_csv, write_metric_rows, MetricRow};
pub use split::{kfold_assignments, stratified_split, uniform_split};
