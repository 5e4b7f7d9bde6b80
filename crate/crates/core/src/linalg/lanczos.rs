//! Krylov solvers: thick-restarted Golub–Kahan–Lanczos bidiagonalization for
//! the leading singular triplets, and thick-restarted symmetric Lanczos for
//! the leading eigenpairs. Both keep full reorthogonalization, which is
//! affordable at the ranks used here and keeps the small projected problem
//! exact.

use log::warn;

use super::matrix::{norm, DenseMatrix};
use super::svd::{canonicalize_columns, check_input, orthogonalize, svd_exact, sym_eigen, SvdResult, RANK_TOL};
use crate::error::{Error, Result};

const START_SEED: u64 = 0x5eed;

/// Convergence report of a Krylov run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KrylovInfo {
    pub restarts: usize,
    pub matvecs: usize,
    pub converged: bool,
}

fn basis_size(r: usize, limit: usize) -> usize {
    (2 * r).max(r + 10).min(limit)
}

fn start_vector(len: usize, salt: u64) -> Vec<f64> {
    let g = DenseMatrix::gaussian(len, 1, START_SEED ^ salt);
    let mut v = g.into_vec();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// A unit vector orthogonal to `basis`, drawn from a fixed stream.
fn fresh_direction(len: usize, basis: &[Vec<f64>], salt: u64) -> Option<Vec<f64>> {
    for attempt in 0..4u64 {
        let mut v = start_vector(len, salt.wrapping_mul(31).wrapping_add(attempt + 1));
        orthogonalize(&mut v, basis);
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            return Some(v);
        }
    }
    None
}

fn columns_to_matrix(cols: &[Vec<f64>], rows: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Linear combinations `basis · coeffs[:, k]` for the first `keep` columns.
fn combine(basis: &[Vec<f64>], coeffs: &DenseMatrix, keep: usize) -> Vec<Vec<f64>> {
    let len = basis[0].len();
    (0..keep)
        .map(|k| {
            let mut out = vec![0.0; len];
            for (i, b) in basis.iter().enumerate() {
                let c = coeffs[(i, k)];
                if c != 0.0 {
                    super::matrix::axpy(c, b, &mut out);
                }
            }
            out
        })
        .collect()
}

/// Leading `r` singular triplets by restarted Golub–Kahan–Lanczos
/// bidiagonalization.
///
/// Stops once every Ritz residual is at most `tol · σ₁`, the Krylov space
/// spans the whole domain, or `max_iters` restarts have run (with a warning).
/// The start vector is fixed, so the result is deterministic.
pub fn svd_truncated(a: &DenseMatrix, r: usize, tol: f64, max_iters: usize) -> Result<SvdResult> {
    svd_truncated_with_info(a, r, tol, max_iters).map(|(s, _)| s)
}

pub fn svd_truncated_with_info(
    a: &DenseMatrix,
    r: usize,
    tol: f64,
    max_iters: usize,
) -> Result<(SvdResult, KrylovInfo)> {
    let (m, n) = a.shape();
    let limit = m.min(n);
    if r > limit {
        return Err(Error::RankTooLarge { rank: r, limit });
    }
    let anorm = check_input(a)?;
    let kdim = basis_size(r, limit);
    let keep_default = (r + (kdim - r) / 2).max(r).min(kdim.saturating_sub(1)).max(1);
    let tiny = f64::EPSILON * anorm;

    let mut info = KrylovInfo::default();
    // Right vectors p_j (length n), left vectors q_j (length m) and the
    // projection B[i][j] = q_iᵀ A p_j, which is upper triangular.
    let mut p: Vec<Vec<f64>> = Vec::with_capacity(kdim);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(kdim);
    let mut b = DenseMatrix::zeros(kdim, kdim);
    let mut next = start_vector(n, 0);
    let mut beta;

    loop {
        // Extend the factorization to kdim steps.
        beta = 0.0;
        while p.len() < kdim {
            let j = p.len();
            p.push(next.clone());
            let mut w = a.matvec(&p[j])?;
            info.matvecs += 1;
            let coeffs = orthogonalize(&mut w, &q);
            let alpha = norm(&w);
            if alpha <= tiny {
                w = fresh_direction(m, &q, j as u64).unwrap_or_else(|| vec![0.0; m]);
                for (i, c) in coeffs.iter().enumerate() {
                    b[(i, j)] = *c;
                }
                b[(j, j)] = 0.0;
            } else {
                w.iter_mut().for_each(|x| *x /= alpha);
                for (i, c) in coeffs.iter().enumerate() {
                    b[(i, j)] = *c;
                }
                b[(j, j)] = alpha;
            }
            q.push(w);
            let mut f = a.t_matvec(&q[j])?;
            info.matvecs += 1;
            orthogonalize(&mut f, &p);
            beta = norm(&f);
            if p.len() == limit {
                break;
            }
            if beta <= tiny {
                beta = 0.0;
                match fresh_direction(n, &p, (j + 1000) as u64) {
                    Some(d) => next = d,
                    None => break,
                }
            } else {
                next = f.iter().map(|x| x / beta).collect();
            }
        }

        let k = p.len();
        let small = b.select_rows(&(0..k).collect::<Vec<_>>()).leading_columns(k);
        let sv = if small.frobenius_norm() == 0.0 {
            return Err(Error::ZeroMatrix);
        } else {
            svd_exact(&small, 0.0)?
        };
        let got = sv.s.len().min(r);
        let s1 = sv.s[0];
        let converged = k == limit
            || (0..got).all(|i| beta * sv.u[(k - 1, i)].abs() <= tol * s1);
        if converged || info.restarts >= max_iters {
            info.converged = converged;
            if !converged {
                warn!("truncated SVD stopped after {} restarts without converging", info.restarts);
            }
            let left = combine(&q, &sv.u, got);
            let right = combine(&p, &sv.v, got);
            let mut out = SvdResult {
                u: columns_to_matrix(&left, m),
                s: sv.s[..got].to_vec(),
                v: columns_to_matrix(&right, n),
            };
            // Drop numerically zero directions.
            let cutoff = RANK_TOL * s1;
            let rank = out.s.iter().take_while(|&&s| s > cutoff).count();
            out.truncate(rank);
            out.canonicalize();
            return Ok((out, info));
        }

        // Thick restart on the leading Ritz pairs.
        info.restarts += 1;
        let keep = keep_default.min(sv.s.len());
        let new_p = combine(&p, &sv.v, keep);
        let new_q = combine(&q, &sv.u, keep);
        p = new_p;
        q = new_q;
        b = DenseMatrix::zeros(kdim, kdim);
        for i in 0..keep {
            b[(i, i)] = sv.s[i];
        }
        if beta == 0.0 {
            match fresh_direction(n, &p, 7919 + info.restarts as u64) {
                Some(d) => next = d,
                None => continue,
            }
        }
    }
}

/// Leading `r` eigenpairs (largest algebraic eigenvalues) of a symmetric
/// matrix by restarted Lanczos with full reorthogonalization.
///
/// Returns eigenvalues in descending order and eigenvectors as columns with
/// canonical signs.
pub fn eigsh_lanczos(
    a: &DenseMatrix,
    r: usize,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, DenseMatrix, KrylovInfo)> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "eigensolver needs a square matrix, got {:?}",
            a.shape()
        )));
    }
    let n = a.rows();
    if r > n {
        return Err(Error::RankTooLarge { rank: r, limit: n });
    }
    let anorm = check_input(a)?;
    let kdim = basis_size(r, n);
    let keep_default = (r + (kdim - r) / 2).max(r).min(kdim.saturating_sub(1)).max(1);
    let tiny = f64::EPSILON * anorm;

    let mut info = KrylovInfo::default();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(kdim);
    let mut t = DenseMatrix::zeros(kdim, kdim);
    let mut next = start_vector(n, 1);
    let mut beta;

    loop {
        beta = 0.0;
        while q.len() < kdim {
            let j = q.len();
            q.push(next.clone());
            let mut w = a.matvec(&q[j])?;
            info.matvecs += 1;
            let coeffs = orthogonalize(&mut w, &q);
            for (i, c) in coeffs.iter().enumerate() {
                t[(i, j)] = *c;
                t[(j, i)] = *c;
            }
            beta = norm(&w);
            if q.len() == n {
                break;
            }
            if beta <= tiny {
                beta = 0.0;
                match fresh_direction(n, &q, (j + 17) as u64) {
                    Some(d) => next = d,
                    None => break,
                }
            } else {
                next = w.iter().map(|x| x / beta).collect();
            }
        }
        let k = q.len();
        let idx: Vec<usize> = (0..k).collect();
        let small = t.select_rows(&idx).select_cols(&idx);
        let (vals, vecs) = sym_eigen(&small)?;
        let got = r.min(k);
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(tiny);
        let converged =
            k == n || (0..got).all(|i| beta * vecs[(k - 1, i)].abs() <= tol * scale);
        if converged || info.restarts >= max_iters {
            info.converged = converged;
            if !converged {
                warn!("Lanczos stopped after {} restarts without converging", info.restarts);
            }
            let mut out = columns_to_matrix(&combine(&q, &vecs, got), n);
            canonicalize_columns(&mut out);
            return Ok((vals[..got].to_vec(), out, info));
        }
        info.restarts += 1;
        let keep = keep_default.min(k);
        q = combine(&q, &vecs, keep);
        t = DenseMatrix::zeros(kdim, kdim);
        for i in 0..keep {
            t[(i, i)] = vals[i];
        }
        if beta == 0.0 {
            if let Some(d) = fresh_direction(n, &q, 104_729 + info.restarts as u64) {
                next = d;
            }
        }
    }
}
