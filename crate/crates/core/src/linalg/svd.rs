use super::matrix::{axpy, dot, DenseMatrix};
use crate::error::{Error, Result};

/// Default relative cutoff below which singular values count as zero.
pub const RANK_TOL: f64 = 1e-10;

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 30;

/// Compact singular value decomposition `A ≈ U · diag(S) · Vᵀ`.
///
/// `s` is strictly positive and non-increasing; `u` is rows×r and `v` is
/// cols×r with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Flips each (u_s, v_s) pair so the largest-magnitude entry of u_s is
    /// positive. Ties resolve to the lowest index.
    pub fn canonicalize(&mut self) {
        for k in 0..self.s.len() {
            if leading_sign(&self.u, k) < 0.0 {
                negate_column(&mut self.u, k);
                negate_column(&mut self.v, k);
            }
        }
    }

    /// Keeps the leading `r` triplets.
    pub fn truncate(&mut self, r: usize) {
        if r < self.s.len() {
            self.s.truncate(r);
            self.u = self.u.leading_columns(r);
            self.v = self.v.leading_columns(r);
        }
    }

    pub fn truncated(mut self, r: usize) -> Self {
        self.truncate(r);
        self
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.u
            .scale_columns(&self.s)
            .matmul_t(&self.v)
            .expect("factor shapes are consistent")
    }

    /// Swaps the roles of the factors, i.e. the decomposition of Aᵀ.
    pub fn transposed(self) -> Self {
        let mut out = Self {
            u: self.v,
            s: self.s,
            v: self.u,
        };
        out.canonicalize();
        out
    }
}

fn leading_sign(m: &DenseMatrix, col: usize) -> f64 {
    let mut best = 0.0f64;
    for i in 0..m.rows() {
        let v = m[(i, col)];
        if v.abs() > best.abs() {
            best = v;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub(crate) fn negate_column(m: &mut DenseMatrix, col: usize) {
    for i in 0..m.rows() {
        m[(i, col)] = -m[(i, col)];
    }
}

/// Flips columns of `m` so the largest-magnitude entry of each is positive.
pub fn canonicalize_columns(m: &mut DenseMatrix) {
    for k in 0..m.cols() {
        if leading_sign(m, k) < 0.0 {
            negate_column(m, k);
        }
    }
}

pub(crate) fn check_input(a: &DenseMatrix) -> Result<f64> {
    if let Some(pos) = a.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / a.cols().max(1),
            col: pos % a.cols().max(1),
        });
    }
    let fro = a.frobenius_norm();
    if fro == 0.0 || a.rows() == 0 || a.cols() == 0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(fro)
}

/// Exact compact SVD by one-sided (Hestenes) Jacobi rotations.
///
/// Singular values at or below `tol · σ₁` are discarded.
pub fn svd_exact(a: &DenseMatrix, tol: f64) -> Result<SvdResult> {
    check_input(a)?;
    if a.rows() < a.cols() {
        return Ok(svd_exact(&a.transpose(), tol)?.transposed());
    }
    let (m, n) = a.shape();
    // Columns of A (and of the accumulated V) stored contiguously.
    let mut w: Vec<f64> = Vec::with_capacity(m * n);
    for j in 0..n {
        w.extend(a.column(j));
    }
    let mut v = vec![0.0; n * n];
    for j in 0..n {
        v[j * n + j] = 1.0;
    }
    let mut sq: Vec<f64> = w.chunks_exact(m).map(|c| dot(c, c)).collect();

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta) = (sq[p], sq[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let (wp, wq) = two_columns(&mut w, m, p, q);
                let gamma = dot(wp, wq);
                if gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = two_columns(&mut v, n, p, q);
                rotate(vp, vq, c, s);
                sq[p] = alpha - t * gamma;
                sq[q] = beta + t * gamma;
            }
        }
        // Refresh norms to stop drift of the incremental updates.
        for (j, c) in w.chunks_exact(m).enumerate() {
            sq[j] = dot(c, c);
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma: Vec<f64> = sq.iter().map(|x| x.max(0.0).sqrt()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]).then(i.cmp(&j)));
    let smax = sigma[order[0]];
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&j| sigma[j] > tol * smax && sigma[j] > 0.0)
        .collect();
    let r = keep.len();
    let mut u = DenseMatrix::zeros(m, r);
    let mut vm = DenseMatrix::zeros(n, r);
    let mut s = Vec::with_capacity(r);
    for (k, &j) in keep.iter().enumerate() {
        let sj = sigma[j];
        s.push(sj);
        let col: Vec<f64> = w[j * m..(j + 1) * m].iter().map(|x| x / sj).collect();
        u.set_column(k, &col);
        vm.set_column(k, &v[j * n..(j + 1) * n]);
    }
    let mut out = SvdResult { u, s, v: vm };
    out.canonicalize();
    Ok(out)
}

fn two_columns(buf: &mut [f64], len: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = buf.split_at_mut(q * len);
    (&mut head[p * len..(p + 1) * len], &mut tail[..len])
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Full eigendecomposition of a small symmetric matrix by cyclic Jacobi.
///
/// Returns eigenvalues in descending (algebraic) order and the matching
/// orthonormal eigenvectors as columns.
pub fn sym_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "eigendecomposition needs a square matrix, got {:?}",
            a.shape()
        )));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    for _sweep in 0..50 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = v.select_cols(&order);
    canonicalize_columns(&mut vectors);
    Ok((values, vectors))
}

/// Moore–Penrose pseudoinverse `V · diag(1/S) · Uᵀ` via [`svd_exact`].
pub fn pseudoinverse(a: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    let svd = svd_exact(a, tol)?;
    let inv: Vec<f64> = svd.s.iter().map(|s| 1.0 / s).collect();
    svd.v.scale_columns(&inv).matmul_t(&svd.u)
}

/// Gram–Schmidt step: removes from `x` its components along `basis`
/// (twice, for numerical orthogonality) and returns the coefficients.
pub(crate) fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, b) in coeffs.iter_mut().zip(basis) {
            let h = dot(b, x);
            axpy(-h, b, x);
            *c += h;
        }
    }
    coeffs
}
