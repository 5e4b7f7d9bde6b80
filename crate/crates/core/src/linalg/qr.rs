use super::matrix::{dot, DenseMatrix};

/// Thin Householder QR: `a = q · r` with `q` (m×k) column-orthonormal and
/// `r` (k×n) upper triangular, k = min(m, n).
///
/// The diagonal of `r` is made non-negative, so a column-orthonormal input
/// comes back as itself with `r = I` up to rounding.
pub fn qr_thin(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = a.shape();
    let k = m.min(n);
    // Column-major working copy.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(k);

    for j in 0..k {
        let x = &w[j][j..];
        let xnorm = dot(x, x).sqrt();
        let mut v = x.to_vec();
        if xnorm == 0.0 {
            reflectors.push(vec![0.0; m - j]);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vnorm = dot(&v, &v).sqrt();
        if vnorm == 0.0 {
            reflectors.push(vec![0.0; m - j]);
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= vnorm;
        }
        for col in w.iter_mut().skip(j) {
            let tail = &mut col[j..];
            let proj = 2.0 * dot(&v, tail);
            for (t, vi) in tail.iter_mut().zip(&v) {
                *t -= proj * vi;
            }
        }
        reflectors.push(v);
    }

    let mut r = DenseMatrix::zeros(k, n);
    for (j, col) in w.iter().enumerate() {
        for i in 0..k.min(j + 1) {
            r[(i, j)] = col[i];
        }
    }

    // Q = H_0 H_1 … H_{k-1} [I_k; 0], built column by column.
    let mut q_cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            e
        })
        .collect();
    for (j, v) in reflectors.iter().enumerate().rev() {
        for col in q_cols.iter_mut() {
            let tail = &mut col[j..];
            let proj = 2.0 * dot(v, tail);
            if proj != 0.0 {
                for (t, vi) in tail.iter_mut().zip(v) {
                    *t -= proj * vi;
                }
            }
        }
    }

    for i in 0..k {
        if r[(i, i)] < 0.0 {
            for j in i..n {
                r[(i, j)] = -r[(i, j)];
            }
            for qi in q_cols[i].iter_mut() {
                *qi = -*qi;
            }
        }
    }

    let mut q = DenseMatrix::zeros(m, k);
    for (j, col) in q_cols.iter().enumerate() {
        q.set_column(j, col);
    }
    (q, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ortho_gap(q: &DenseMatrix) -> f64 {
        q.t_matmul(q)
            .unwrap()
            .sub(&DenseMatrix::identity(q.cols()))
            .unwrap()
            .max_abs()
    }

    #[test]
    fn reproduces_input() {
        for &(m, n) in &[(7, 4), (4, 7), (5, 5), (1, 3)] {
            let a = DenseMatrix::gaussian(m, n, (m * 10 + n) as u64);
            let (q, r) = qr_thin(&a);
            let rel = q.matmul(&r).unwrap().sub(&a).unwrap().frobenius_norm() / a.frobenius_norm();
            assert!(rel < 1e-12, "{m}x{n}: {rel}");
            assert!(ortho_gap(&q) < 1e-12);
            for i in 0..r.rows() {
                for j in 0..i.min(r.cols()) {
                    assert_eq!(r[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn orthonormal_input_is_fixed_point() {
        let (q0, _) = qr_thin(&DenseMatrix::gaussian(6, 3, 9));
        let (q, r) = qr_thin(&q0);
        assert!(r.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-12);
        assert!(q.sub(&q0).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_input_still_orthonormal() {
        let mut a = DenseMatrix::gaussian(6, 3, 4);
        for i in 0..6 {
            a[(i, 2)] = a[(i, 0)] * 2.0;
        }
        let (q, r) = qr_thin(&a);
        assert!(ortho_gap(&q) < 1e-12);
        assert!(q.matmul(&r).unwrap().sub(&a).unwrap().max_abs() < 1e-12);
    }
}
