use crate::error::{Error, Result};
use crate::linalg::{dot, norm, DenseMatrix, SvdResult};

/// Weighted misalignment between approximate and reference singular
/// vectors:
///
/// `η = (1/r) Σ λ_i (1 − |u_iᵀ ũ_i| / ‖ũ_i‖) + (1/r) Σ λ_i (1 − |v_iᵀ ṽ_i| / ‖ṽ_i‖)`
///
/// with `λ_i` the reference singular values. Invariant to sign flips and
/// rescaling of the approximate columns.
pub fn eta_accuracy(
    u_approx: &DenseMatrix,
    v_approx: &DenseMatrix,
    reference: &SvdResult,
    r: usize,
) -> Result<f64> {
    if reference.rank() < r {
        return Err(Error::RankTooLarge {
            rank: r,
            limit: reference.rank(),
        });
    }
    if u_approx.cols() < r || v_approx.cols() < r {
        return Err(Error::RankTooLarge {
            rank: r,
            limit: u_approx.cols().min(v_approx.cols()),
        });
    }
    if u_approx.rows() != reference.u.rows() || v_approx.rows() != reference.v.rows() {
        return Err(Error::ShapeMismatch(format!(
            "approximation rows ({}, {}) vs reference ({}, {})",
            u_approx.rows(),
            v_approx.rows(),
            reference.u.rows(),
            reference.v.rows()
        )));
    }
    let misalignment = |approx: &DenseMatrix, exact: &DenseMatrix, i: usize| -> Result<f64> {
        let a = approx.column(i);
        let na = norm(&a);
        if na == 0.0 {
            return Err(Error::ZeroColumn(i));
        }
        let cos = (dot(&exact.column(i), &a) / na).abs();
        Ok((1.0 - cos).max(0.0))
    };
    let mut total = 0.0;
    for i in 0..r {
        let w = reference.s[i];
        total += w * misalignment(u_approx, &reference.u, i)?;
        total += w * misalignment(v_approx, &reference.v, i)?;
    }
    Ok(total / r as f64)
}
