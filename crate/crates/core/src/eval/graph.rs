use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, DenseMatrix};

/// Links every node `v` to its `k_v` nearest other nodes in feature space
/// (Euclidean, ties broken by the smaller node index).
pub fn graph_reconstruct(embedding: &DenseMatrix, out_degrees: &[usize]) -> Result<DenseMatrix> {
    graph_reconstruct_directed(embedding, embedding, out_degrees)
}

/// Directed variant: node `v` links to the `k_v` nodes `w ≠ v` whose target
/// features `targets[w]` lie closest to its source features `sources[v]`.
/// With left singular vectors as sources and right ones as targets, an exact
/// factorization `A = U Vᵀ` of a permutation matrix is recovered exactly.
pub fn graph_reconstruct_directed(
    sources: &DenseMatrix,
    targets: &DenseMatrix,
    out_degrees: &[usize],
) -> Result<DenseMatrix> {
    let n = sources.rows();
    if targets.shape() != sources.shape() {
        return Err(Error::ShapeMismatch(format!(
            "source features {:?} vs target features {:?}",
            sources.shape(),
            targets.shape()
        )));
    }
    if out_degrees.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: out_degrees.len(),
        });
    }
    if let Some((node, &degree)) = out_degrees.iter().enumerate().find(|(_, &k)| k >= n) {
        return Err(Error::DegreeTooLarge {
            node,
            degree,
            nodes: n,
        });
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut row = vec![0.0; n];
            let k = out_degrees[v];
            if k == 0 {
                return row;
            }
            let me = sources.row(v);
            let mut cand: Vec<(f64, usize)> = (0..n)
                .filter(|&u| u != v)
                .map(|u| (squared_distance(me, targets.row(u)), u))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, u) in &cand[..k] {
                row[u] = 1.0;
            }
            row
        })
        .collect();
    DenseMatrix::from_rows(&rows)
}

/// Entrywise ℓ1 distance and Frobenius distance.
pub fn reconstruction_error(recon: &DenseMatrix, truth: &DenseMatrix) -> Result<(f64, f64)> {
    let diff = recon.sub(truth)?;
    let l1 = diff.as_slice().iter().map(|v| v.abs()).sum();
    Ok((l1, diff.frobenius_norm()))
}
