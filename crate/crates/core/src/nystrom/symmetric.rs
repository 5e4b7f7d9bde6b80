//! Symmetric Nyström baseline for eigenpairs of a symmetric PSD matrix.

use crate::error::{Error, Result};
use crate::linalg::{canonicalize_columns, eigsh_lanczos, DenseMatrix, RANK_TOL};

use super::{sample_indices, NystromConfig};

/// A symmetric matrix that can return selected columns.
pub trait SymmetricSource: Sync {
    fn dim(&self) -> usize;

    /// `K[:, idx]`, N×n.
    fn columns(&self, idx: &[usize]) -> DenseMatrix;
}

impl SymmetricSource for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn columns(&self, idx: &[usize]) -> DenseMatrix {
        self.select_cols(idx)
    }
}

/// `GGᵀ` (left) or `GᵀG` (right) of a rectangular matrix, with columns formed
/// on demand.
#[derive(Clone, Copy, Debug)]
pub enum GramSide<'a> {
    Left(&'a DenseMatrix),
    Right(&'a DenseMatrix),
}

impl SymmetricSource for GramSide<'_> {
    fn dim(&self) -> usize {
        match self {
            GramSide::Left(g) => g.rows(),
            GramSide::Right(g) => g.cols(),
        }
    }

    fn columns(&self, idx: &[usize]) -> DenseMatrix {
        match self {
            GramSide::Left(g) => g.matmul_t(&g.select_rows(idx)),
            GramSide::Right(g) => g.t_matmul(&g.select_cols(idx)),
        }
        .expect("gram factors are conformable")
    }
}

#[derive(Clone, Debug)]
pub struct SymNystromResult {
    /// N×r approximate eigenvectors scaled as `sqrt(n/N)/λ · K_{N,n} u`.
    pub vectors: DenseMatrix,
    /// `(N/n) λ`, descending.
    pub values: Vec<f64>,
    pub indices: Vec<usize>,
    pub rank_deficient: bool,
}

impl SymNystromResult {
    /// Eigenvector approximations with unit columns and canonical signs.
    pub fn normalized_vectors(&self) -> Result<DenseMatrix> {
        let norms = self.vectors.column_norms();
        if let Some(j) = norms.iter().position(|&n| n == 0.0) {
            return Err(Error::ZeroColumn(j));
        }
        let mut out = self
            .vectors
            .scale_columns(&norms.iter().map(|n| 1.0 / n).collect::<Vec<_>>());
        canonicalize_columns(&mut out);
        Ok(out)
    }
}

/// Nyström approximation of the leading `r` eigenpairs of a symmetric PSD
/// source from `n` sampled columns, with the small eigenproblem solved by
/// Lanczos.
pub fn sym_nystrom_on(source: &dyn SymmetricSource, r: usize, n: usize, seed: u64) -> Result<SymNystromResult> {
    let big_n = source.dim();
    if n > big_n {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: big_n,
        });
    }
    if r == 0 || r > n {
        return Err(Error::RankTooLarge { rank: r, limit: n });
    }
    let idx = sample_indices(big_n, n, seed);
    let k_big_n_n = source.columns(&idx);
    let k_nn = k_big_n_n.select_rows(&idx);
    let (vals, vecs, _) = eigsh_lanczos(&k_nn, r, 1e-13, 1000)?;
    let top = vals.first().copied().unwrap_or(0.0);
    let keep = vals.iter().take_while(|&&l| l > RANK_TOL * top && l > 0.0).count();
    if keep == 0 {
        return Err(Error::ZeroMatrix);
    }
    let rank_deficient = keep < r;
    if rank_deficient {
        log::warn!("sampled eigenproblem has {keep} positive eigenvalues, {r} requested");
    }
    let ratio = n as f64 / big_n as f64;
    let scale: Vec<f64> = vals[..keep].iter().map(|l| ratio.sqrt() / l).collect();
    let vectors = k_big_n_n
        .matmul(&vecs.leading_columns(keep))?
        .scale_columns(&scale);
    Ok(SymNystromResult {
        vectors,
        values: vals[..keep].iter().map(|l| l / ratio).collect(),
        indices: idx,
        rank_deficient,
    })
}

/// [`sym_nystrom_on`] with rank, sample size (`cfg.n`) and seed from a config.
pub fn sym_nystrom(source: &dyn SymmetricSource, cfg: &NystromConfig) -> Result<SymNystromResult> {
    sym_nystrom_on(source, cfg.r, cfg.n, cfg.seed)
}

/// Singular triplet approximation of `G` from symmetric Nyström applied to
/// `GGᵀ` (n sampled rows) and `GᵀG` (m sampled columns). Returns unit left
/// and right vectors and singular values `sqrt` of the averaged eigenvalue
/// estimates.
pub fn sym_nystrom_svd(g: &DenseMatrix, cfg: &NystromConfig) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let left = sym_nystrom_on(&GramSide::Left(g), cfg.r, cfg.n, cfg.seed)?;
    let right = sym_nystrom_on(&GramSide::Right(g), cfg.r, cfg.m, cfg.seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let k = left.values.len().min(right.values.len());
    let s = (0..k)
        .map(|i| (0.5 * (left.values[i] + right.values[i])).sqrt())
        .collect();
    Ok((
        left.normalized_vectors()?.leading_columns(k),
        s,
        right.normalized_vectors()?.leading_columns(k),
    ))
}
