//! Kernel SVD: singular value decomposition of an asymmetric kernel matrix
//! built from the rows and columns of a data matrix.
//!
//! Fitting builds `G[i,j] = κ(x_i, z_j)`, double-centers it, takes the rank-r
//! SVD `G_c ≈ U D Vᵀ` and returns the dual coefficients
//!
//! ```text
//! B_φ = U D^{-1/2}     B_ψ = V D^{-1/2}     Λ = D
//! ```
//!
//! which satisfy `B_φᵀ G_c B_ψ = I` and the coupled conditions
//! `G_cᵀ G_c B_ψ = G_cᵀ B_φ Λ`, `G_c G_cᵀ B_φ = G_c B_ψ Λ`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::compat::{apply_compat, compat_for, CompatMatrix, CompatMode, ProjectedSide};
use crate::error::{Error, Result};
use crate::kernels::{
    build_sources, center_oos, kernel_row, kernel_value, CenteringStats, DataSources, KernelEvaluator,
    KernelFamily, KernelSpec, Side,
};
use crate::linalg::{
    read_matrix_csv, read_vector_csv, squared_distance, svd_exact, svd_randomized, svd_truncated,
    write_matrix_csv, write_vector_csv, DenseMatrix, SvdResult, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS,
    RANK_TOL,
};
use crate::nystrom::{extend_sampled, subsample, KernelSource, NystromConfig, Subsample};

/// SVD solver used by [`fit`].
#[derive(Clone, Debug, PartialEq)]
pub enum KsvdSolver {
    Exact,
    Truncated { tol: f64, max_iters: usize },
    Randomized { oversample: usize, power_iters: usize, seed: u64 },
    /// Asymmetric Nyström from sampled rows and columns; the full kernel
    /// matrix is never formed.
    Nystrom(NystromConfig),
}

impl KsvdSolver {
    pub fn truncated() -> Self {
        Self::Truncated {
            tol: 1e-12,
            max_iters: 1000,
        }
    }

    pub fn randomized(seed: u64) -> Self {
        Self::Randomized {
            oversample: DEFAULT_OVERSAMPLE,
            power_iters: DEFAULT_POWER_ITERS,
            seed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Truncated { .. } => "truncated",
            Self::Randomized { .. } => "randomized",
            Self::Nystrom(_) => "nystrom",
        }
    }
}

/// Everything [`fit`] needs besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub kernel: KernelSpec,
    /// When set, γ is replaced by `k · sqrt(d · var)` of the transformed data.
    pub gamma_k: Option<f64>,
    /// `None` picks identity for square data and a1 otherwise.
    pub compat: Option<CompatMode>,
    pub compat_seed: u64,
    pub compat_target_dim: Option<usize>,
    pub pca_centered: bool,
    pub rank: usize,
    pub solver: KsvdSolver,
    pub center: bool,
}

impl FitOptions {
    pub fn new(kernel: KernelSpec, rank: usize) -> Self {
        Self {
            kernel,
            gamma_k: None,
            compat: None,
            compat_seed: 0,
            compat_target_dim: None,
            pca_centered: true,
            rank,
            solver: KsvdSolver::Exact,
            center: true,
        }
    }

    pub fn compat(mut self, mode: CompatMode) -> Self {
        self.compat = Some(mode);
        self
    }

    pub fn solver(mut self, solver: KsvdSolver) -> Self {
        self.solver = solver;
        self
    }

    pub fn center(mut self, center: bool) -> Self {
        self.center = center;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingSide {
    /// One feature row per row of the data matrix.
    Left,
    /// One feature row per column of the data matrix.
    Right,
}

impl FromStr for EmbeddingSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Self::Left),
            "right" => Ok(Self::Right),
            other => Err(Error::Config(format!("unknown embedding side '{other}'"))),
        }
    }
}

impl fmt::Display for EmbeddingSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Left => "left",
            Self::Right => "right",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub side: EmbeddingSide,
    /// samples × r, unit-norm columns.
    pub features: DenseMatrix,
}

/// A fitted kernel SVD.
#[derive(Debug)]
pub struct KsvdModel {
    pub b_phi: DenseMatrix,
    pub b_psi: DenseMatrix,
    /// Multipliers Λ, positive and non-increasing.
    pub lambda: Vec<f64>,
    pub kernel: KernelSpec,
    pub compat: CompatMatrix,
    pub centering: CenteringStats,
    /// Row and column data after the compatibility transform.
    pub sources: DataSources,
    pub centered: bool,
    pub solver: String,
    sne_log_norm: OnceLock<Vec<f64>>,
}

impl Clone for KsvdModel {
    fn clone(&self) -> Self {
        Self {
            b_phi: self.b_phi.clone(),
            b_psi: self.b_psi.clone(),
            lambda: self.lambda.clone(),
            kernel: self.kernel,
            compat: self.compat.clone(),
            centering: self.centering.clone(),
            sources: self.sources.clone(),
            centered: self.centered,
            solver: self.solver.clone(),
            sne_log_norm: self.sne_log_norm.clone(),
        }
    }
}

/// Residuals of the optimality conditions; see [`verify_kkt`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktResiduals {
    pub residual_psi: f64,
    pub residual_phi: f64,
    pub ortho_gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.residual_psi.max(self.residual_phi).max(self.ortho_gap)
    }
}

fn resolve_compat(a: &DenseMatrix, opts: &FitOptions) -> Result<CompatMatrix> {
    let mode = opts.compat.unwrap_or(if a.is_square() {
        CompatMode::Identity
    } else {
        CompatMode::Pca
    });
    compat_for(mode, a, opts.compat_seed, opts.compat_target_dim, opts.pca_centered)
}

/// Estimated centering statistics from sampled blocks: column means over the
/// sampled rows, row means over the sampled columns. Exact at full sampling.
fn sampled_centering(sample: &Subsample) -> CenteringStats {
    let row_part = CenteringStats::of(&sample.g_n_big_m);
    let col_part = CenteringStats::of(&sample.g_big_n_m);
    let col_means = row_part.col_means;
    let grand_mean = col_means.iter().sum::<f64>() / col_means.len() as f64;
    CenteringStats {
        row_means: col_part.row_means,
        col_means,
        grand_mean,
    }
}

/// Fits a kernel SVD of rank `opts.rank` to the data matrix `a`.
///
/// Requests above the numerical rank of the centered kernel matrix are
/// truncated with a warning.
pub fn fit(a: &DenseMatrix, opts: &FitOptions) -> Result<KsvdModel> {
    let (n, m) = a.shape();
    let limit = n.min(m);
    if opts.rank == 0 || opts.rank > limit {
        return Err(Error::RankTooLarge {
            rank: opts.rank,
            limit,
        });
    }
    let compat = resolve_compat(a, opts)?;
    let sources = apply_compat(&compat, &build_sources(a))?;
    fit_sources(sources, compat, opts)
}

/// Fits on explicit row and column data that already share a feature
/// length. `compat` is kept for transforming new samples; the
/// compatibility fields of `opts` are ignored.
pub fn fit_sources(sources: DataSources, compat: CompatMatrix, opts: &FitOptions) -> Result<KsvdModel> {
    let (n, m) = sources.counts();
    let limit = n.min(m);
    if opts.rank == 0 || opts.rank > limit {
        return Err(Error::RankTooLarge {
            rank: opts.rank,
            limit,
        });
    }
    let mut kernel = opts.kernel;
    if let Some(k) = opts.gamma_k {
        kernel.gamma = crate::kernels::default_gamma(k, &sources);
    }
    let eval = KernelEvaluator::new(kernel, &sources)?;
    let r = opts.rank;

    let (svd, centering) = match &opts.solver {
        KsvdSolver::Nystrom(cfg) => {
            let mut cfg = cfg.clone();
            cfg.r = r;
            if cfg.m == 0 {
                cfg.m = NystromConfig::default_start(r).min(m);
            }
            if cfg.n == 0 {
                cfg.n = NystromConfig::coupled_n(r, cfg.m, (n, m));
            }
            let mut sample = subsample(&eval as &dyn KernelSource, &cfg)?;
            let stats = if opts.center {
                let stats = sampled_centering(&sample);
                let all_rows: Vec<usize> = (0..n).collect();
                let all_cols: Vec<usize> = (0..m).collect();
                sample.g_big_n_m = stats.apply_block(&sample.g_big_n_m, &all_rows, &sample.col_indices);
                sample.g_n_big_m = stats.apply_block(&sample.g_n_big_m, &sample.row_indices, &all_cols);
                sample.g_nm = sample.g_big_n_m.select_rows(&sample.row_indices);
                stats
            } else {
                CenteringStats::identity(n, m)
            };
            let res = extend_sampled(&sample, (n, m), r, cfg.subproblem, cfg.seed)?;
            (
                SvdResult {
                    u: res.u_tilde,
                    s: res.lambda_tilde,
                    v: res.v_tilde,
                },
                stats,
            )
        }
        solver => {
            let g = eval.full();
            let (g_c, stats) = if opts.center {
                crate::kernels::center(&g)
            } else {
                (g, CenteringStats::identity(n, m))
            };
            let mut svd = match *solver {
                KsvdSolver::Exact => svd_exact(&g_c, RANK_TOL)?.truncated(r),
                KsvdSolver::Truncated { tol, max_iters } => svd_truncated(&g_c, r, tol, max_iters)?,
                KsvdSolver::Randomized {
                    oversample,
                    power_iters,
                    seed,
                } => svd_randomized(&g_c, r, oversample, power_iters, seed)?,
                KsvdSolver::Nystrom(_) => unreachable!(),
            };
            svd.canonicalize();
            (svd, stats)
        }
    };

    let keep = svd
        .s
        .iter()
        .take_while(|&&s| s > RANK_TOL * svd.s[0].max(f64::MIN_POSITIVE))
        .count();
    if keep == 0 {
        return Err(Error::ZeroMatrix);
    }
    if keep < r {
        log::warn!("kernel matrix has numerical rank {keep}; truncating the requested rank {r}");
    }
    let svd = svd.truncated(keep);
    let inv_sqrt: Vec<f64> = svd.s.iter().map(|d| 1.0 / d.sqrt()).collect();
    Ok(KsvdModel {
        b_phi: svd.u.scale_columns(&inv_sqrt),
        b_psi: svd.v.scale_columns(&inv_sqrt),
        lambda: svd.s,
        kernel,
        compat,
        centering,
        sources,
        centered: opts.center,
        solver: opts.solver.name().to_string(),
        sne_log_norm: OnceLock::new(),
    })
}

/// `‖GᵀG B_ψ − Gᵀ B_φ Λ‖_F / max(1, ‖GᵀG B_ψ‖_F)`, the analogous residual
/// of `G Gᵀ B_φ = G B_ψ Λ`, and `‖B_φᵀ G B_ψ − I‖_max`.
pub fn verify_kkt(model: &KsvdModel, g_c: &DenseMatrix) -> Result<KktResiduals> {
    check_shape(model, g_c)?;
    let g_bpsi = g_c.matmul(&model.b_psi)?;
    let gt_bphi = g_c.t_matmul(&model.b_phi)?;
    let lhs_psi = g_c.t_matmul(&g_bpsi)?;
    let rhs_psi = gt_bphi.scale_columns(&model.lambda);
    let lhs_phi = g_c.matmul(&gt_bphi)?;
    let rhs_phi = g_bpsi.scale_columns(&model.lambda);
    let residual_psi = lhs_psi.sub(&rhs_psi)?.frobenius_norm() / lhs_psi.frobenius_norm().max(1.0);
    let residual_phi = lhs_phi.sub(&rhs_phi)?.frobenius_norm() / lhs_phi.frobenius_norm().max(1.0);
    let gram = model.b_phi.t_matmul(&g_bpsi)?;
    let ortho_gap = gram.sub(&DenseMatrix::identity(model.rank()))?.max_abs();
    Ok(KktResiduals {
        residual_psi,
        residual_phi,
        ortho_gap,
    })
}

/// `½‖Gᵀ B_φ‖²_F + ½‖G B_ψ‖²_F`; equals `Σ Λ` at the fitted solution.
pub fn objective(model: &KsvdModel, g_c: &DenseMatrix) -> Result<f64> {
    check_shape(model, g_c)?;
    let a = g_c.t_matmul(&model.b_phi)?.frobenius_norm();
    let b = g_c.matmul(&model.b_psi)?.frobenius_norm();
    Ok(0.5 * (a * a + b * b))
}

fn check_shape(model: &KsvdModel, g_c: &DenseMatrix) -> Result<()> {
    if g_c.shape() != (model.b_phi.rows(), model.b_psi.rows()) {
        return Err(Error::ShapeMismatch(format!(
            "kernel matrix is {:?}, model expects ({}, {})",
            g_c.shape(),
            model.b_phi.rows(),
            model.b_psi.rows()
        )));
    }
    Ok(())
}

impl KsvdModel {
    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    /// The centered training kernel matrix, recomputed from the stored data.
    pub fn centered_kernel(&self) -> Result<DenseMatrix> {
        let g = KernelEvaluator::new(self.kernel, &self.sources)?.full();
        let rows: Vec<usize> = (0..g.rows()).collect();
        let cols: Vec<usize> = (0..g.cols()).collect();
        Ok(self.centering.apply_block(&g, &rows, &cols))
    }

    /// Leading `r` left (`U = B_φ Λ^{1/2}`) or right (`V = B_ψ Λ^{1/2}`)
    /// singular vectors of the training kernel matrix.
    pub fn transform(&self, side: EmbeddingSide, r: usize) -> Result<Embedding> {
        if r > self.rank() {
            return Err(Error::RankTooLarge {
                rank: r,
                limit: self.rank(),
            });
        }
        let b = match side {
            EmbeddingSide::Left => &self.b_phi,
            EmbeddingSide::Right => &self.b_psi,
        };
        let sqrt: Vec<f64> = self.lambda[..r].iter().map(|l| l.sqrt()).collect();
        Ok(Embedding {
            side,
            features: b.leading_columns(r).scale_columns(&sqrt),
        })
    }

    fn log_normalizers(&self) -> Result<&[f64]> {
        if let Some(v) = self.sne_log_norm.get() {
            return Ok(v);
        }
        let eval = KernelEvaluator::new(self.kernel, &self.sources)?;
        Ok(self.sne_log_norm.get_or_init(|| eval.sne_log_normalizers()))
    }

    /// Kernel values of a new sample against the training data of the other
    /// side, after the compatibility transform and before centering.
    pub fn kernel_values(&self, side: EmbeddingSide, sample: &[f64]) -> Result<Vec<f64>> {
        match side {
            EmbeddingSide::Left => {
                let x = self.compat.transform_row(sample)?;
                kernel_row(&self.kernel, &x, &self.sources.z)
            }
            EmbeddingSide::Right => {
                let z = self.compat.transform_column(sample)?;
                if z.len() != self.sources.x.cols() {
                    return Err(Error::DimensionMismatch {
                        left: self.sources.x.cols(),
                        right: z.len(),
                    });
                }
                if self.kernel.family == KernelFamily::Sne {
                    let g2 = self.kernel.gamma * self.kernel.gamma;
                    let norms = self.log_normalizers()?;
                    Ok(self
                        .sources
                        .x
                        .row_iter()
                        .zip(norms)
                        .map(|(x, ln)| (-squared_distance(x, &z) / g2 - ln).exp())
                        .collect())
                } else {
                    self.sources
                        .x
                        .row_iter()
                        .map(|x| kernel_value(&self.kernel, x, &z))
                        .collect()
                }
            }
        }
    }

    /// Out-of-sample scores of a new row sample (`Left`, length M before the
    /// compatibility transform) or column sample (`Right`, length N):
    /// `score_s = (1/λ_s) Σ_j k_c[j] V_js` (or with `U`). Training samples
    /// reproduce their rows of [`KsvdModel::transform`].
    pub fn transform_oos(&self, side: EmbeddingSide, sample: &[f64]) -> Result<Vec<f64>> {
        let values = self.kernel_values(side, sample)?;
        let centered = if self.centered {
            let s = match side {
                EmbeddingSide::Left => Side::Row,
                EmbeddingSide::Right => Side::Column,
            };
            center_oos(&values, &self.centering, s)?
        } else {
            values
        };
        let basis = self.transform(
            match side {
                EmbeddingSide::Left => EmbeddingSide::Right,
                EmbeddingSide::Right => EmbeddingSide::Left,
            },
            self.rank(),
        )?;
        let proj = basis.features.t_matvec(&centered)?;
        Ok(proj.iter().zip(&self.lambda).map(|(p, l)| p / l).collect())
    }

    /// Scores for every row of `samples`.
    pub fn transform_oos_batch(&self, side: EmbeddingSide, samples: &DenseMatrix) -> Result<DenseMatrix> {
        let rows = samples
            .row_iter()
            .map(|s| self.transform_oos(side, s))
            .collect::<Result<Vec<_>>>()?;
        DenseMatrix::from_rows(&rows)
    }

    /// Writes the model to `dir` (created if needed).
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        write_matrix_csv(dir.join("B_phi.csv"), &self.b_phi)?;
        write_matrix_csv(dir.join("B_psi.csv"), &self.b_psi)?;
        write_vector_csv(dir.join("lambda.csv"), &self.lambda)?;
        write_vector_csv(dir.join("centering_rows.csv"), &self.centering.row_means)?;
        write_vector_csv(dir.join("centering_cols.csv"), &self.centering.col_means)?;
        write_vector_csv(dir.join("centering.csv"), &[self.centering.grand_mean])?;
        write_matrix_csv(dir.join("train_x.csv"), &self.sources.x)?;
        write_matrix_csv(dir.join("train_z.csv"), &self.sources.z)?;
        if let Some(c) = &self.compat.c {
            write_matrix_csv(dir.join("compat.csv"), c)?;
        }
        let side = match self.compat.side {
            ProjectedSide::Row => "row",
            ProjectedSide::Column => "column",
            ProjectedSide::Neither => "none",
        };
        let mut conf = String::new();
        conf.push_str(&format!("kernel.family = {}\n", self.kernel.family));
        conf.push_str(&format!("kernel.gamma = {}\n", crate::linalg::fmt_f64(self.kernel.gamma)));
        conf.push_str(&format!("compat.mode = {}\n", self.compat.mode));
        conf.push_str(&format!("compat.side = {side}\n"));
        if let Some(seed) = self.compat.seed {
            conf.push_str(&format!("compat.seed = {seed}\n"));
        }
        conf.push_str(&format!("rank = {}\n", self.rank()));
        conf.push_str(&format!("center = {}\n", self.centered));
        conf.push_str(&format!("solver = {}\n", self.solver));
        fs::write(dir.join("model.conf"), conf)?;
        Ok(())
    }

    /// Reads a model written by [`KsvdModel::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let conf_path = dir.join("model.conf");
        let text = fs::read_to_string(&conf_path)?;
        let mut kv = std::collections::BTreeMap::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: conf_path.clone(),
                line: line_no + 1,
                message: "expected key = value".into(),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("model.conf is missing '{k}'")))
        };
        let parse_f64 = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Config(format!("model.conf: '{k}' is not a number")))
        };
        let kernel = KernelSpec::new(get("kernel.family")?.parse()?, parse_f64("kernel.gamma")?)?;
        let side = match get("compat.side")?.as_str() {
            "row" => ProjectedSide::Row,
            "column" => ProjectedSide::Column,
            _ => ProjectedSide::Neither,
        };
        let c_path = dir.join("compat.csv");
        let compat = CompatMatrix {
            c: if c_path.exists() {
                Some(read_matrix_csv(c_path)?)
            } else {
                None
            },
            mode: get("compat.mode")?.parse()?,
            side,
            seed: kv.get("compat.seed").and_then(|s| s.parse().ok()),
        };
        let grand = read_vector_csv(dir.join("centering.csv"))?;
        let centering = CenteringStats {
            row_means: read_vector_csv(dir.join("centering_rows.csv"))?,
            col_means: read_vector_csv(dir.join("centering_cols.csv"))?,
            grand_mean: grand.first().copied().unwrap_or(0.0),
        };
        Ok(Self {
            b_phi: read_matrix_csv(dir.join("B_phi.csv"))?,
            b_psi: read_matrix_csv(dir.join("B_psi.csv"))?,
            lambda: read_vector_csv(dir.join("lambda.csv"))?,
            kernel,
            compat,
            centering,
            sources: DataSources {
                x: read_matrix_csv(dir.join("train_x.csv"))?,
                z: read_matrix_csv(dir.join("train_z.csv"))?,
            },
            centered: get("center")? == "true",
            solver: get("solver")?,
            sne_log_norm: OnceLock::new(),
        })
    }
}
