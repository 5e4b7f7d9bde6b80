//! Asymmetric kernel evaluation between row data and column data, and the
//! double centering applied to kernel matrices.
//!
//! Row data `X` holds the rows of the data matrix and column data `Z` its
//! columns (as rows). A kernel compares a row sample with a column sample, so
//! both must have the same feature length; see [`crate::compat`] for
//! non-square inputs.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use log::warn;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, squared_distance, DenseMatrix};

/// Rows per assembly block. Fixed so results do not depend on thread count.
const BLOCK_ROWS: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// Row-normalized Gaussian similarity; asymmetric by construction.
    Sne,
    Rbf,
    Linear,
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sne" => Ok(Self::Sne),
            "rbf" => Ok(Self::Rbf),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Config(format!("unknown kernel family '{other}'"))),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sne => "sne",
            Self::Rbf => "rbf",
            Self::Linear => "linear",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Bandwidth γ in `exp(-‖x-z‖²/γ²)`; ignored by the linear kernel.
    pub gamma: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        let spec = Self { family, gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn linear() -> Self {
        Self {
            family: KernelFamily::Linear,
            gamma: 1.0,
        }
    }

    pub fn rbf(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Rbf, gamma)
    }

    pub fn sne(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Sne, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family != KernelFamily::Linear && !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidGamma(self.gamma));
        }
        Ok(())
    }
}

/// Row data `x` (N×d) and column data `z` (M×d').
#[derive(Clone, Debug, PartialEq)]
pub struct DataSources {
    pub x: DenseMatrix,
    pub z: DenseMatrix,
}

impl DataSources {
    /// Number of row samples N and column samples M.
    pub fn counts(&self) -> (usize, usize) {
        (self.x.rows(), self.z.rows())
    }

    pub fn is_compatible(&self) -> bool {
        self.x.cols() == self.z.cols()
    }
}

/// Scans `a` row-wise and column-wise: `x = a`, `z = aᵀ`.
pub fn build_sources(a: &DenseMatrix) -> DataSources {
    DataSources {
        x: a.clone(),
        z: a.transpose(),
    }
}

/// Kernel value for the pointwise families. SNE needs the whole column data
/// set for its normalization; use [`kernel_row`] for it.
pub fn kernel_value(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: z.len(),
        });
    }
    match spec.family {
        KernelFamily::Linear => Ok(dot(x, z)),
        KernelFamily::Rbf => Ok((-squared_distance(x, z) / (spec.gamma * spec.gamma)).exp()),
        KernelFamily::Sne => Err(Error::Config(
            "the SNE kernel is normalized over the column data; evaluate it with kernel_row".into(),
        )),
    }
}

/// Kernel values of one row sample against every column sample.
pub fn kernel_row(spec: &KernelSpec, x: &[f64], z: &DenseMatrix) -> Result<Vec<f64>> {
    spec.validate()?;
    if x.len() != z.cols() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: z.cols(),
        });
    }
    let mut row: Vec<f64> = match spec.family {
        KernelFamily::Linear => z.row_iter().map(|zj| dot(x, zj)).collect(),
        _ => z.row_iter().map(|zj| -squared_distance(x, zj)).collect(),
    };
    match spec.family {
        KernelFamily::Linear => {}
        KernelFamily::Rbf => {
            let g2 = spec.gamma * spec.gamma;
            row.iter_mut().for_each(|v| *v = (*v / g2).exp());
        }
        KernelFamily::Sne => {
            // `row` holds -d²; normalize as a softmax of -d²/γ².
            let g2 = spec.gamma * spec.gamma;
            row.iter_mut().for_each(|v| *v /= g2);
            softmax_in_place(&mut row);
        }
    }
    Ok(row)
}

/// Numerically stable softmax; a row whose terms are all zero after
/// exponentiation falls back to the uniform distribution.
fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    if sum > 0.0 && sum.is_finite() {
        logits.iter_mut().for_each(|v| *v /= sum);
    } else {
        warn!("SNE row underflowed; using the uniform row");
        let u = 1.0 / logits.len() as f64;
        logits.iter_mut().for_each(|v| *v = u);
    }
}

/// Assembles the N×M kernel matrix `G[i,j] = κ(x_i, z_j)`.
pub fn kernel_matrix(spec: &KernelSpec, sources: &DataSources) -> Result<DenseMatrix> {
    let eval = KernelEvaluator::new(*spec, sources)?;
    Ok(eval.full())
}

/// Evaluates blocks of a kernel matrix on demand, so callers that only need
/// sampled rows or columns never pay for the full matrix.
///
/// Distances use `‖x‖² + ‖z‖² − 2xᵀz` with the cross term from a blocked
/// matrix product. Every evaluated entry is counted.
#[derive(Debug)]
pub struct KernelEvaluator {
    spec: KernelSpec,
    x: DenseMatrix,
    z: DenseMatrix,
    x_sq: Vec<f64>,
    z_sq: Vec<f64>,
    evaluated: AtomicU64,
}

impl Clone for KernelEvaluator {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec,
            x: self.x.clone(),
            z: self.z.clone(),
            x_sq: self.x_sq.clone(),
            z_sq: self.z_sq.clone(),
            evaluated: AtomicU64::new(0),
        }
    }
}

impl KernelEvaluator {
    pub fn new(spec: KernelSpec, sources: &DataSources) -> Result<Self> {
        spec.validate()?;
        if !sources.is_compatible() {
            return Err(Error::CompatibilityMissing {
                x_len: sources.x.cols(),
                z_len: sources.z.cols(),
            });
        }
        let sq = |m: &DenseMatrix| m.row_iter().map(|r| dot(r, r)).collect::<Vec<_>>();
        Ok(Self {
            spec,
            x_sq: sq(&sources.x),
            z_sq: sq(&sources.z),
            x: sources.x.clone(),
            z: sources.z.clone(),
            evaluated: AtomicU64::new(0),
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// (N, M)
    pub fn shape(&self) -> (usize, usize) {
        (self.x.rows(), self.z.rows())
    }

    pub fn row_data(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn column_data(&self) -> &DenseMatrix {
        &self.z
    }

    /// Kernel entries evaluated so far.
    pub fn evaluated(&self) -> u64 {
        self.evaluated.load(Ordering::Relaxed)
    }

    pub fn reset_counter(&self) {
        self.evaluated.store(0, Ordering::Relaxed);
    }

    /// Pre-normalization values for the selected rows and columns (all when
    /// `None`): `xᵀz` for the linear kernel, `-‖x−z‖²/γ²` otherwise.
    fn raw_block(&self, rows: Option<&[usize]>, cols: Option<&[usize]>) -> DenseMatrix {
        let row_idx: Vec<usize> = rows.map_or_else(|| (0..self.x.rows()).collect(), <[usize]>::to_vec);
        let zc = match cols {
            Some(c) => self.z.select_rows(c),
            None => self.z.clone(),
        };
        let zsq: Vec<f64> = match cols {
            Some(c) => c.iter().map(|&j| self.z_sq[j]).collect(),
            None => self.z_sq.clone(),
        };
        let m = zc.rows();
        self.evaluated
            .fetch_add((row_idx.len() * m) as u64, Ordering::Relaxed);
        let g2 = self.spec.gamma * self.spec.gamma;
        let family = self.spec.family;
        let blocks: Vec<Vec<f64>> = row_idx
            .par_chunks(BLOCK_ROWS)
            .map(|chunk| {
                let xb = self.x.select_rows(chunk);
                let cross = xb.matmul_t(&zc).expect("feature lengths checked at construction");
                let mut data = cross.into_vec();
                if family != KernelFamily::Linear {
                    for (r, &i) in chunk.iter().enumerate() {
                        let xi = self.x_sq[i];
                        for (v, zj) in data[r * m..(r + 1) * m].iter_mut().zip(&zsq) {
                            let d2 = (xi + zj - 2.0 * *v).max(0.0);
                            *v = -d2 / g2;
                        }
                    }
                }
                data
            })
            .collect();
        DenseMatrix::from_vec(row_idx.len(), m, blocks.concat())
    }

    /// Exponentiated block for RBF/SNE (SNE numerators shifted by a per-row
    /// constant `shift[r]`), or the plain linear block.
    fn finish_block(&self, mut raw: DenseMatrix, shift: Option<&[f64]>) -> DenseMatrix {
        if self.spec.family == KernelFamily::Linear {
            return raw;
        }
        let cols = raw.cols();
        for (r, row) in raw.as_mut_slice().chunks_exact_mut(cols.max(1)).enumerate() {
            let s = shift.map_or(0.0, |s| s[r]);
            row.iter_mut().for_each(|v| *v = (*v - s).exp());
        }
        raw
    }

    /// The full N×M kernel matrix.
    pub fn full(&self) -> DenseMatrix {
        let raw = self.raw_block(None, None);
        match self.spec.family {
            KernelFamily::Sne => {
                let mut g = raw;
                let cols = g.cols();
                g.as_mut_slice()
                    .par_chunks_mut(cols.max(1))
                    .for_each(softmax_in_place);
                g
            }
            _ => self.finish_block(raw, None),
        }
    }

    /// Rows `rows` of G, each against every column sample.
    pub fn rows(&self, rows: &[usize]) -> DenseMatrix {
        let raw = self.raw_block(Some(rows), None);
        match self.spec.family {
            KernelFamily::Sne => {
                let mut g = raw;
                let cols = g.cols();
                g.as_mut_slice()
                    .chunks_exact_mut(cols.max(1))
                    .for_each(softmax_in_place);
                g
            }
            _ => self.finish_block(raw, None),
        }
    }

    /// Samples the blocks used by Nyström approximations: `G[:, cols]`
    /// (N×m) and `G[rows, :]` (n×M), evaluating only those entries.
    ///
    /// For SNE the full normalization is known only for the sampled rows;
    /// the remaining rows use `(M/m) · Σ_{j∈cols}` numerators as an estimate
    /// of their denominator unless `exact_sne_denominator` is set, which
    /// evaluates the full rows at the cost of the whole matrix. Both blocks
    /// agree on their intersection.
    pub fn sample_blocks(
        &self,
        rows: &[usize],
        cols: &[usize],
        exact_sne_denominator: bool,
    ) -> (DenseMatrix, DenseMatrix) {
        if self.spec.family != KernelFamily::Sne {
            let g_cols = self.finish_block(self.raw_block(None, Some(cols)), None);
            let g_rows = self.finish_block(self.raw_block(Some(rows), None), None);
            return (g_cols, g_rows);
        }
        let (n_all, m_all) = self.shape();
        // Per-row log-normalizer: shift + ln(sum of shifted numerators).
        let mut log_norm: Vec<Option<f64>> = vec![None; n_all];
        if exact_sne_denominator {
            let all: Vec<usize> = (0..n_all).collect();
            let raw = self.raw_block(Some(&all), None);
            for (i, row) in raw.row_iter().enumerate() {
                log_norm[i] = Some(log_sum_exp(row));
            }
        }
        let raw_rows = self.raw_block(Some(rows), None);
        for (r, row) in raw_rows.row_iter().enumerate() {
            log_norm[rows[r]].get_or_insert_with(|| log_sum_exp(row));
        }
        let raw_cols = self.raw_block(None, Some(cols));
        let scale_ln = (m_all as f64 / cols.len() as f64).ln();
        for (i, row) in raw_cols.row_iter().enumerate() {
            if log_norm[i].is_none() {
                log_norm[i] = Some(log_sum_exp(row) + scale_ln);
            }
        }
        let norm_rows: Vec<f64> = rows.iter().map(|&i| log_norm[i].unwrap()).collect();
        let norm_all: Vec<f64> = log_norm.into_iter().map(Option::unwrap).collect();
        (
            self.finish_block(raw_cols, Some(&norm_all)),
            self.finish_block(raw_rows, Some(&norm_rows)),
        )
    }
}

impl KernelEvaluator {
    /// Natural log of each row's SNE denominator `Σ_j exp(-‖x_i−z_j‖²/γ²)`.
    /// Evaluates every entry, one row block at a time.
    pub fn sne_log_normalizers(&self) -> Vec<f64> {
        let n = self.x.rows();
        let mut out = Vec::with_capacity(n);
        let all: Vec<usize> = (0..n).collect();
        for chunk in all.chunks(BLOCK_ROWS * 8) {
            let raw = self.raw_block(Some(chunk), None);
            out.extend(raw.row_iter().map(log_sum_exp));
        }
        out
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Means removed by double centering.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteringStats {
    pub row_means: Vec<f64>,
    pub col_means: Vec<f64>,
    pub grand_mean: f64,
}

impl CenteringStats {
    pub fn of(g: &DenseMatrix) -> Self {
        let (n, m) = g.shape();
        let row_means: Vec<f64> = g.row_iter().map(|r| r.iter().sum::<f64>() / m as f64).collect();
        let mut col_means = vec![0.0; m];
        for r in g.row_iter() {
            for (c, v) in col_means.iter_mut().zip(r) {
                *c += v;
            }
        }
        col_means.iter_mut().for_each(|c| *c /= n as f64);
        let grand_mean = row_means.iter().sum::<f64>() / n as f64;
        Self {
            row_means,
            col_means,
            grand_mean,
        }
    }

    /// Statistics that leave every matrix unchanged.
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            row_means: vec![0.0; n],
            col_means: vec![0.0; m],
            grand_mean: 0.0,
        }
    }

    /// Applies `G[i,j] - r_i - c_j + g` to a block whose rows and columns
    /// are the given indices into the training matrix.
    pub fn apply_block(&self, block: &DenseMatrix, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        let mut out = block.clone();
        for (r, &i) in rows.iter().enumerate() {
            let ri = self.row_means[i];
            for (c, &j) in cols.iter().enumerate() {
                out[(r, c)] += self.grand_mean - ri - self.col_means[j];
            }
        }
        out
    }
}

/// Double centering: subtracts row and column means and adds back the grand
/// mean so every row and column of the result sums to zero.
pub fn center(g: &DenseMatrix) -> (DenseMatrix, CenteringStats) {
    let stats = CenteringStats::of(g);
    let rows: Vec<usize> = (0..g.rows()).collect();
    let cols: Vec<usize> = (0..g.cols()).collect();
    (stats.apply_block(g, &rows, &cols), stats)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// A new row sample, compared against the training column data.
    Row,
    /// A new column sample, compared against the training row data.
    Column,
}

/// Centers the kernel values of one new sample consistently with the
/// training matrix.
pub fn center_oos(values: &[f64], stats: &CenteringStats, side: Side) -> Result<Vec<f64>> {
    let means = match side {
        Side::Row => &stats.col_means,
        Side::Column => &stats.row_means,
    };
    if values.len() != means.len() {
        return Err(Error::LengthMismatch {
            expected: means.len(),
            got: values.len(),
        });
    }
    let own = values.iter().sum::<f64>() / values.len() as f64;
    Ok(values
        .iter()
        .zip(means)
        .map(|(v, m)| v - m - own + stats.grand_mean)
        .collect())
}

/// Bandwidth `k · sqrt(d · var)` with d the feature length and var the
/// variance of all entries of both sources.
pub fn default_gamma(k: f64, sources: &DataSources) -> f64 {
    let vals = sources.x.as_slice().iter().chain(sources.z.as_slice());
    let count = (sources.x.as_slice().len() + sources.z.as_slice().len()) as f64;
    let mean = vals.clone().sum::<f64>() / count;
    let var = vals.map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let d = sources.x.cols() as f64;
    let gamma = k * (d * var).sqrt();
    if gamma > 0.0 {
        gamma
    } else {
        k.max(f64::MIN_POSITIVE)
    }
}
