//! Nyström approximations of singular (and eigen) decompositions from
//! subsampled kernel rows and columns.
//!
//! The asymmetric variant samples `n` rows and `m` columns of an N×M matrix
//! `G`, solves the small n×m problem `G_nm = U Λ Vᵀ`, and extends the
//! singular vectors to all rows and columns:
//!
//! ```text
//! ũ_s ∝ G_{N,m} v_s / λ_s        ṽ_s ∝ G_{n,M}ᵀ u_s / λ_s
//! λ̃_s = λ_s · sqrt(N·M / (n·m))
//! ```
//!
//! Extended vectors are unit-normalized. With full sampling the result is
//! the exact SVD of `G`.

mod accuracy;
mod symmetric;
mod tolerance;

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use accuracy::eta_accuracy;
pub use symmetric::{sym_nystrom, sym_nystrom_on, sym_nystrom_svd, GramSide, SymNystromResult, SymmetricSource};
pub use tolerance::{
    run_solver, solve_to_tolerance, time_solver, Approximation, SolverKind, ToleranceReport,
};

use crate::error::{Error, Result};
use crate::kernels::KernelEvaluator;
use crate::linalg::{
    svd_exact, svd_randomized, svd_truncated, DenseMatrix, SvdResult, DEFAULT_OVERSAMPLE,
    DEFAULT_POWER_ITERS, RANK_TOL,
};

/// A kernel matrix that can hand out sampled rows and columns, either from
/// memory or by evaluating the kernel on demand.
pub trait KernelSource: Sync {
    /// (N, M)
    fn shape(&self) -> (usize, usize);

    /// `(G[:, cols], G[rows, :])`. `exact_normalization` only matters for
    /// lazily evaluated SNE kernels.
    fn sample(
        &self,
        rows: &[usize],
        cols: &[usize],
        exact_normalization: bool,
    ) -> (DenseMatrix, DenseMatrix);

    /// The whole matrix.
    fn materialize(&self) -> Cow<'_, DenseMatrix>;

    /// Running count of evaluated kernel entries, for lazy sources.
    fn evaluated(&self) -> Option<u64> {
        None
    }
}

impl KernelSource for DenseMatrix {
    fn shape(&self) -> (usize, usize) {
        DenseMatrix::shape(self)
    }

    fn sample(&self, rows: &[usize], cols: &[usize], _: bool) -> (DenseMatrix, DenseMatrix) {
        (self.select_cols(cols), self.select_rows(rows))
    }

    fn materialize(&self) -> Cow<'_, DenseMatrix> {
        Cow::Borrowed(self)
    }
}

impl KernelSource for KernelEvaluator {
    fn shape(&self) -> (usize, usize) {
        KernelEvaluator::shape(self)
    }

    fn sample(
        &self,
        rows: &[usize],
        cols: &[usize],
        exact_normalization: bool,
    ) -> (DenseMatrix, DenseMatrix) {
        self.sample_blocks(rows, cols, exact_normalization)
    }

    fn materialize(&self) -> Cow<'_, DenseMatrix> {
        Cow::Owned(self.full())
    }

    fn evaluated(&self) -> Option<u64> {
        Some(KernelEvaluator::evaluated(self))
    }
}

/// Solver for the small sampled problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubSolver {
    Randomized { oversample: usize, power_iters: usize },
    Truncated,
    Exact,
}

impl Default for SubSolver {
    fn default() -> Self {
        Self::Randomized {
            oversample: DEFAULT_OVERSAMPLE,
            power_iters: DEFAULT_POWER_ITERS,
        }
    }
}

impl SubSolver {
    pub(crate) fn solve(&self, g: &DenseMatrix, r: usize, seed: u64) -> Result<SvdResult> {
        match *self {
            SubSolver::Randomized {
                oversample,
                power_iters,
            } => svd_randomized(g, r, oversample, power_iters, seed),
            SubSolver::Truncated => svd_truncated(g, r, 1e-13, 1000),
            SubSolver::Exact => Ok(svd_exact(g, RANK_TOL)?.truncated(r)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NystromConfig {
    /// Row subsamples.
    pub n: usize,
    /// Column subsamples.
    pub m: usize,
    pub seed: u64,
    /// Target rank.
    pub r: usize,
    /// Target accuracy for [`solve_to_tolerance`].
    pub epsilon: f64,
    /// Multiplicative growth of the sample size between attempts.
    pub m_growth: f64,
    /// Cap on the column sample size (clamped to M).
    pub m_max: usize,
    /// Use one index set for rows and columns (square matrices, n = m).
    pub shared_indices: bool,
    /// Evaluate full SNE rows for the normalization of unsampled rows.
    pub exact_sne_denominator: bool,
    pub subproblem: SubSolver,
}

impl NystromConfig {
    pub fn new(r: usize, n: usize, m: usize, seed: u64) -> Self {
        Self {
            n,
            m,
            seed,
            r,
            epsilon: 1e-1,
            m_growth: 2.0,
            m_max: usize::MAX,
            shared_indices: false,
            exact_sne_denominator: false,
            subproblem: SubSolver::default(),
        }
    }

    /// Starting sample size `max(4r, 32)`.
    pub fn default_start(r: usize) -> usize {
        (4 * r).max(32)
    }

    pub fn validate(&self, shape: (usize, usize)) -> Result<()> {
        let (big_n, big_m) = shape;
        if self.n > big_n {
            return Err(Error::SampleTooLarge {
                requested: self.n,
                available: big_n,
            });
        }
        if self.m > big_m {
            return Err(Error::SampleTooLarge {
                requested: self.m,
                available: big_m,
            });
        }
        let limit = self.n.min(self.m);
        if self.r > limit || self.r == 0 {
            return Err(Error::RankTooLarge {
                rank: self.r,
                limit,
            });
        }
        if !(self.m_growth > 1.0 && self.m_growth <= 4.0) {
            return Err(Error::Config(format!(
                "m_growth must lie in (1, 4], got {}",
                self.m_growth
            )));
        }
        if self.shared_indices && (big_n != big_m || self.n != self.m) {
            return Err(Error::Config(
                "shared row/column indices need a square matrix and n = m".into(),
            ));
        }
        Ok(())
    }

    /// Row sample size paired with `m` columns: equal for square matrices,
    /// proportional to N/M otherwise.
    pub fn coupled_n(r: usize, m: usize, shape: (usize, usize)) -> usize {
        let (big_n, big_m) = shape;
        if big_n == big_m {
            return m.min(big_n);
        }
        let n = (m as f64 * big_n as f64 / big_m as f64).round() as usize;
        n.clamp(r.min(big_n), big_n)
    }
}

/// Sampled blocks of a kernel matrix.
#[derive(Clone, Debug)]
pub struct Subsample {
    pub row_indices: Vec<usize>,
    pub col_indices: Vec<usize>,
    /// n×m intersection.
    pub g_nm: DenseMatrix,
    /// N×m sampled columns.
    pub g_big_n_m: DenseMatrix,
    /// n×M sampled rows.
    pub g_n_big_m: DenseMatrix,
}

/// First `k` entries of a seeded permutation of `0..len`, sorted. Prefixes
/// are nested, so growing `k` with a fixed seed only adds indices.
pub fn sample_indices(len: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut rng);
    let mut out = perm[..k.min(len)].to_vec();
    out.sort_unstable();
    out
}

pub(crate) fn index_sets(cfg: &NystromConfig, shape: (usize, usize)) -> (Vec<usize>, Vec<usize>) {
    let rows = sample_indices(shape.0, cfg.n, cfg.seed);
    let cols = if cfg.shared_indices {
        rows.clone()
    } else {
        sample_indices(shape.1, cfg.m, cfg.seed ^ 0x9e37_79b9_7f4a_7c15)
    };
    (rows, cols)
}

/// Uniform sampling without replacement of `cfg.n` rows and `cfg.m` columns.
pub fn subsample(source: &dyn KernelSource, cfg: &NystromConfig) -> Result<Subsample> {
    let shape = source.shape();
    cfg.validate(shape)?;
    let (rows, cols) = index_sets(cfg, shape);
    let (g_big_n_m, g_n_big_m) = source.sample(&rows, &cols, cfg.exact_sne_denominator);
    let g_nm = g_big_n_m.select_rows(&rows);
    Ok(Subsample {
        row_indices: rows,
        col_indices: cols,
        g_nm,
        g_big_n_m,
        g_n_big_m,
    })
}

#[derive(Clone, Debug)]
pub struct NystromResult {
    /// N×r, unit columns.
    pub u_tilde: DenseMatrix,
    /// M×r, unit columns.
    pub v_tilde: DenseMatrix,
    pub lambda_tilde: Vec<f64>,
    pub row_indices: Vec<usize>,
    pub col_indices: Vec<usize>,
    /// Set when the sampled problem had numerical rank below the request.
    pub rank_deficient: bool,
    pub eta: Option<f64>,
    pub wall_time: f64,
}

fn normalize_columns(m: &DenseMatrix) -> Result<DenseMatrix> {
    let norms = m.column_norms();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    Ok(m.scale_columns(&norms.iter().map(|n| 1.0 / n).collect::<Vec<_>>()))
}

/// Extends the SVD of the sampled intersection to every row and column.
pub(crate) fn extend_sampled(
    sample: &Subsample,
    shape: (usize, usize),
    r: usize,
    subproblem: SubSolver,
    seed: u64,
) -> Result<NystromResult> {
    let small = subproblem.solve(&sample.g_nm, r, seed)?;
    let rank = small.rank();
    let rank_deficient = rank < r;
    if rank_deficient {
        log::warn!("sampled problem has numerical rank {rank} < {r}; result truncated");
    }
    let inv: Vec<f64> = small.s.iter().map(|l| 1.0 / l).collect();
    let u = sample.g_big_n_m.matmul(&small.v)?.scale_columns(&inv);
    let v = sample.g_n_big_m.t_matmul(&small.u)?.scale_columns(&inv);
    let mut u_tilde = normalize_columns(&u)?;
    let mut v_tilde = normalize_columns(&v)?;
    let (big_n, big_m) = shape;
    let (n, m) = (sample.row_indices.len(), sample.col_indices.len());
    let factor = ((big_n as f64 * big_m as f64) / (n as f64 * m as f64)).sqrt();
    let lambda_tilde = small.s.iter().map(|l| l * factor).collect();
    let mut pair = SvdResult {
        u: u_tilde,
        s: lambda_tilde,
        v: v_tilde,
    };
    pair.canonicalize();
    u_tilde = pair.u;
    v_tilde = pair.v;
    Ok(NystromResult {
        u_tilde,
        v_tilde,
        lambda_tilde: pair.s,
        row_indices: sample.row_indices.clone(),
        col_indices: sample.col_indices.clone(),
        rank_deficient,
        eta: None,
        wall_time: 0.0,
    })
}

/// Asymmetric Nyström approximation of the leading `cfg.r` singular
/// triplets of the source matrix.
pub fn asym_nystrom(source: &dyn KernelSource, cfg: &NystromConfig) -> Result<NystromResult> {
    let start = std::time::Instant::now();
    let sample = subsample(source, cfg)?;
    let mut out = extend_sampled(&sample, source.shape(), cfg.r, cfg.subproblem, cfg.seed)?;
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}
