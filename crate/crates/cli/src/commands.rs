use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use aksvd::compat::{apply_compat, compat_for, CompatMode};
use aksvd::data::{load_csv, load_edge_list, synth_directed_graph, EdgeListOptions, GraphDataset, GraphKind, TabularDataset, Task};
use aksvd::eval::{write_metric_csv, write_metric_rows, MetricRow};
use aksvd::kernels::{build_sources, default_gamma, KernelEvaluator, KernelFamily, KernelSpec};
use aksvd::ksvd::{fit, EmbeddingSide, FitOptions, KsvdSolver};
use aksvd::linalg::{read_matrix_csv, write_matrix_csv, write_vector_csv};
use aksvd::nystrom::{NystromConfig, SubSolver};
use aksvd::pipeline::{
    graph_reconstruction, node_classification, solver_from_name, tabular_classification, tabular_regression,
    FeatureParams, FeatureSides, Method, Protocol,
};
use aksvd::DenseMatrix;

use crate::config::{ConfigError, RunConfig};

/// Failure of a command, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(aksvd::Error),
}

impl CliError {
    /// 2 for configuration or input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_user_error() => 2,
            CliError::Core(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<aksvd::Error> for CliError {
    fn from(e: aksvd::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(ConfigError(msg.into()))
}

pub(crate) enum Data {
    Graph(GraphDataset),
    Table(TabularDataset),
    Matrix(DenseMatrix),
}

impl Data {
    /// The matrix the kernel methods operate on.
    pub(crate) fn into_matrix(self) -> DenseMatrix {
        match self {
            Data::Graph(g) => g.adjacency,
            Data::Table(t) => t.features,
            Data::Matrix(m) => m,
        }
    }
}

/// Loads the configured dataset. Tabular files need `task`; commands that
/// only use features load them as classification data.
pub(crate) fn load_data(cfg: &RunConfig, task: Option<Task>) -> CliResult<Data> {
    let path = || cfg.path("dataset.path").expect("validated");
    match cfg.get("dataset.format") {
        "synth" => {
            let kind: GraphKind = cfg.parse("dataset.synth")?;
            Ok(Data::Graph(synth_directed_graph(kind, cfg.parse("dataset.nodes")?, cfg.parse("seed")?)?))
        }
        "edges" => {
            let opts = EdgeListOptions {
                node_count: None,
                directed: cfg.flag("dataset.directed")?,
                allow_self_loops: cfg.flag("dataset.self_loops")?,
                labels: cfg.path("dataset.labels"),
            };
            Ok(Data::Graph(load_edge_list(path(), &opts)?))
        }
        "csv" => {
            if !cfg.is_set("dataset.target") {
                return Err(config_error("dataset.target is required for csv datasets"));
            }
            let task = task.unwrap_or(Task::Classification);
            let zscore = cfg.flag("dataset.zscore")?;
            Ok(Data::Table(load_csv(path(), cfg.get("dataset.target"), task, zscore)?))
        }
        "matrix" => Ok(Data::Matrix(read_matrix_csv(path())?)),
        other => Err(config_error(format!(
            "unknown dataset.format '{other}' (expected synth, edges, csv or matrix)"
        ))),
    }
}

/// Kernel with either an explicit bandwidth or a data-driven one; the
/// second value is the `gamma_k` multiplier in the latter case.
fn kernel_spec(cfg: &RunConfig) -> CliResult<(KernelSpec, Option<f64>)> {
    let family: KernelFamily = cfg.parse("kernel.family")?;
    if family == KernelFamily::Linear {
        return Ok((KernelSpec::linear(), None));
    }
    Ok(match cfg.optional::<f64>("kernel.gamma")? {
        Some(g) => (KernelSpec::new(family, g)?, None),
        None => (KernelSpec::new(family, 1.0)?, Some(cfg.parse("kernel.gamma_k")?)),
    })
}

fn compat_mode(cfg: &RunConfig) -> CliResult<Option<CompatMode>> {
    match cfg.get("compat.mode") {
        "auto" => Ok(None),
        _ => Ok(Some(cfg.parse("compat.mode")?)),
    }
}

pub(crate) fn nystrom_config(cfg: &RunConfig) -> CliResult<NystromConfig> {
    let mut ny = NystromConfig::new(
        cfg.parse("rank")?,
        cfg.parse("nystrom.n")?,
        cfg.parse("nystrom.m")?,
        cfg.parse("nystrom.seed")?,
    );
    ny.epsilon = cfg.parse("nystrom.epsilon")?;
    ny.m_growth = cfg.parse("nystrom.growth")?;
    ny.exact_sne_denominator = cfg.flag("nystrom.exact_sne")?;
    ny.subproblem = match cfg.get("nystrom.subproblem") {
        "rsvd" => SubSolver::default(),
        "truncated" => SubSolver::Truncated,
        "exact" => SubSolver::Exact,
        other => {
            return Err(config_error(format!(
                "unknown nystrom.subproblem '{other}' (rsvd, truncated or exact)"
            )))
        }
    };
    Ok(ny)
}

pub(crate) fn fit_options(cfg: &RunConfig) -> CliResult<FitOptions> {
    let (kernel, gamma_k) = kernel_spec(cfg)?;
    let mut opts = FitOptions::new(kernel, cfg.parse("rank")?);
    opts.gamma_k = gamma_k;
    opts.compat = compat_mode(cfg)?;
    opts.compat_seed = cfg.parse("compat.seed")?;
    opts.compat_target_dim = cfg.optional("compat.target_dim")?;
    opts.center = cfg.flag("center")?;
    opts.solver = match cfg.get("solver") {
        "nystrom" => KsvdSolver::Nystrom(nystrom_config(cfg)?),
        name => solver_from_name(name, cfg.parse("seed")?)?,
    };
    Ok(opts)
}

fn protocol(cfg: &RunConfig) -> CliResult<Protocol> {
    Ok(Protocol {
        test_fraction: cfg.parse("split.test_fraction")?,
        seed: cfg.parse("split.seed")?,
        gamma_reg: cfg.parse("lssvm.gamma")?,
    })
}

/// The evaluator for bench and sweep: compatibility applied, bandwidth
/// from `kernel.gamma` or `k · default`.
pub(crate) fn evaluator(cfg: &RunConfig, a: &DenseMatrix, k: Option<f64>) -> CliResult<KernelEvaluator> {
    let mode = compat_mode(cfg)?.unwrap_or(if a.is_square() { CompatMode::Identity } else { CompatMode::Pca });
    let compat = compat_for(mode, a, cfg.parse("compat.seed")?, cfg.optional("compat.target_dim")?, true)?;
    let sources = apply_compat(&compat, &build_sources(a))?;
    let (mut spec, gamma_k) = kernel_spec(cfg)?;
    if let Some(k) = k.or(gamma_k) {
        if spec.family != KernelFamily::Linear {
            spec.gamma = default_gamma(k, &sources);
        }
    }
    Ok(KernelEvaluator::new(spec, &sources)?)
}

pub(crate) fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let out = PathBuf::from(cfg.get("out"));
    fs::create_dir_all(&out)?;
    Ok(out)
}

/// `manifest.conf`: command, version and the full resolved configuration.
/// It is itself a valid `--config` file.
pub(crate) fn write_manifest(out: &Path, command: &str, cfg: &RunConfig) -> CliResult<()> {
    let text = format!(
        "run.command = {command}\nrun.version = {}\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.snapshot()
    );
    fs::write(out.join("manifest.conf"), text)?;
    Ok(())
}

pub fn extract(cfg: &RunConfig) -> CliResult<()> {
    let a = load_data(cfg, None)?.into_matrix();
    let model = fit(&a, &fit_options(cfg)?)?;
    let out = out_dir(cfg)?;
    let r = model.rank();
    write_matrix_csv(out.join("left.csv"), &model.transform(EmbeddingSide::Left, r)?.features)?;
    write_matrix_csv(out.join("right.csv"), &model.transform(EmbeddingSide::Right, r)?.features)?;
    write_vector_csv(out.join("lambda.csv"), &model.lambda)?;
    model.save(out.join("model"))?;
    write_manifest(&out, "extract", cfg)?;
    eprintln!("extracted rank {r} features into {}", out.display());
    Ok(())
}

fn emit_metrics(cfg: &RunConfig, command: &str, metrics: &[(&str, f64)]) -> CliResult<()> {
    let method: Method = cfg.parse("method")?;
    let (spec, _) = kernel_spec(cfg)?;
    let kernel = match method {
        Method::Ksvd => cfg.get("kernel.family").to_string(),
        Method::Kpca => "rbf".to_string(),
        Method::Svd | Method::Pca => "linear".to_string(),
    };
    let explicit = cfg.is_set("kernel.gamma") && spec.family != KernelFamily::Linear;
    let rows: Vec<MetricRow> = metrics
        .iter()
        .map(|&(name, value)| MetricRow {
            task: command.to_string(),
            method: method.to_string(),
            kernel: kernel.clone(),
            gamma: explicit.then_some(spec.gamma),
            seed: cfg.parse("split.seed").unwrap_or(0),
            metric_name: name.to_string(),
            value,
        })
        .collect();
    let out = out_dir(cfg)?;
    write_metric_csv(out.join("metrics.csv"), &rows)?;
    write_manifest(&out, command, cfg)?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    write_metric_rows(&mut lock, &rows)?;
    lock.flush()?;
    Ok(())
}

fn feature_params(cfg: &RunConfig) -> CliResult<FeatureParams> {
    Ok(FeatureParams::new(fit_options(cfg)?))
}

pub fn classify(cfg: &RunConfig) -> CliResult<()> {
    let method: Method = cfg.parse("method")?;
    let params = feature_params(cfg)?;
    let protocol = protocol(cfg)?;
    let report = match load_data(cfg, Some(Task::Classification))? {
        Data::Graph(g) => {
            let sides: FeatureSides = cfg.parse("features.sides")?;
            node_classification(&g, method, &params, cfg.parse("features.count")?, sides, &protocol)?
        }
        Data::Table(t) => tabular_classification(&t, method, &params, &protocol)?,
        Data::Matrix(_) => return Err(config_error("classify needs a graph or a csv dataset with targets")),
    };
    emit_metrics(cfg, "classify", &report.metrics())
}

pub fn regress(cfg: &RunConfig) -> CliResult<()> {
    let method: Method = cfg.parse("method")?;
    let params = feature_params(cfg)?;
    let Data::Table(t) = load_data(cfg, Some(Task::Regression))? else {
        return Err(config_error("regress needs a csv dataset (dataset.format = csv)"));
    };
    let err = tabular_regression(&t, method, &params, &protocol(cfg)?)?;
    emit_metrics(cfg, "regress", &[("rmse", err)])
}

pub fn reconstruct(cfg: &RunConfig) -> CliResult<()> {
    let method: Method = cfg.parse("method")?;
    let params = feature_params(cfg)?;
    let Data::Graph(g) = load_data(cfg, None)? else {
        return Err(config_error("reconstruct needs a graph dataset (synth or edges)"));
    };
    let (l1, l2) = graph_reconstruction(&g, method, &params)?;
    emit_metrics(cfg, "reconstruct", &[("l1", l1), ("l2", l2)])
}
