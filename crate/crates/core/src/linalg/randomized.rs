use super::matrix::DenseMatrix;
use super::qr::qr_thin;
use super::svd::{check_input, svd_exact, SvdResult, RANK_TOL};
use crate::error::{Error, Result};

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 2;

/// Randomized range-finder SVD with Gaussian sketching and subspace power
/// iterations.
///
/// The sketch width is `min(r + oversample, min(rows, cols))`; at full width
/// the result is exact up to rounding. Deterministic for a fixed `seed`.
pub fn svd_randomized(
    a: &DenseMatrix,
    r: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<SvdResult> {
    let limit = a.rows().min(a.cols());
    if r > limit {
        return Err(Error::RankTooLarge { rank: r, limit });
    }
    check_input(a)?;
    let width = (r + oversample).min(limit);
    let omega = DenseMatrix::gaussian(a.cols(), width, seed);
    let (mut q, _) = qr_thin(&a.matmul(&omega)?);
    for _ in 0..power_iters {
        let (z, _) = qr_thin(&a.t_matmul(&q)?);
        q = qr_thin(&a.matmul(&z)?).0;
    }
    // B = Qᵀ A is small (width × cols).
    let b = q.t_matmul(a)?;
    let small = svd_exact(&b, RANK_TOL)?;
    let mut out = SvdResult {
        u: q.matmul(&small.u)?,
        s: small.s,
        v: small.v,
    }
    .truncated(r);
    out.canonicalize();
    Ok(out)
}
