//! Dimensionality compatibility for non-square data.
//!
//! Row samples have length M and column samples length N. A kernel needs
//! equal lengths, so the longer side is mapped through a matrix `C`:
//! when M ≥ N the row data becomes `X·C` (C is M×N), otherwise the column
//! data becomes `Z·C` (C is N×M).

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernels::DataSources;
use crate::linalg::{dot, pseudoinverse, svd_exact, DenseMatrix, RANK_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompatMode {
    /// a0: Moore–Penrose pseudoinverse.
    PseudoInverse,
    /// a1: leading principal directions.
    Pca,
    /// a2: scaled Gaussian random projection.
    Random,
    Identity,
}

impl FromStr for CompatMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a0" | "pinv" | "pseudoinverse" => Ok(Self::PseudoInverse),
            "a1" | "pca" => Ok(Self::Pca),
            "a2" | "random" => Ok(Self::Random),
            "identity" | "none" => Ok(Self::Identity),
            other => Err(Error::Config(format!("unknown compat mode '{other}'"))),
        }
    }
}

impl fmt::Display for CompatMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PseudoInverse => "a0",
            Self::Pca => "a1",
            Self::Random => "a2",
            Self::Identity => "identity",
        })
    }
}

/// Which data source the transform is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectedSide {
    Row,
    Column,
    Neither,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompatMatrix {
    /// `None` for the identity.
    pub c: Option<DenseMatrix>,
    pub mode: CompatMode,
    pub side: ProjectedSide,
    pub seed: Option<u64>,
}

impl CompatMatrix {
    pub fn identity() -> Self {
        Self {
            c: None,
            mode: CompatMode::Identity,
            side: ProjectedSide::Neither,
            seed: None,
        }
    }

    /// Maps a new row sample into the kernel's input space.
    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        match (&self.c, self.side) {
            (Some(c), ProjectedSide::Row) => c.t_matvec(x),
            _ => Ok(x.to_vec()),
        }
    }

    /// Maps a new column sample into the kernel's input space.
    pub fn transform_column(&self, z: &[f64]) -> Result<Vec<f64>> {
        match (&self.c, self.side) {
            (Some(c), ProjectedSide::Column) => c.t_matvec(z),
            _ => Ok(z.to_vec()),
        }
    }
}

/// The side to project and the matrix whose rows are its samples.
fn long_side(a: &DenseMatrix) -> (ProjectedSide, DenseMatrix) {
    if a.cols() >= a.rows() {
        (ProjectedSide::Row, a.clone())
    } else {
        (ProjectedSide::Column, a.transpose())
    }
}

/// a0: `C = A†` (or `(Aᵀ)†` when the column side is projected), so that a
/// linear kernel reproduces `A·C·A = A`.
pub fn compat_pseudoinverse(a: &DenseMatrix) -> Result<CompatMatrix> {
    let (side, samples) = long_side(a);
    Ok(CompatMatrix {
        c: Some(pseudoinverse(&samples, RANK_TOL)?),
        mode: CompatMode::PseudoInverse,
        side,
        seed: None,
    })
}

fn column_center(a: &DenseMatrix) -> DenseMatrix {
    let n = a.rows() as f64;
    let mut means = vec![0.0; a.cols()];
    for r in a.row_iter() {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    DenseMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] - means[j])
}

/// a1: the `target_dim` leading right singular vectors of the (optionally
/// column-centered) samples of the projected side. Directions beyond the
/// numerical rank are completed with an orthonormal basis.
pub fn compat_pca(a: &DenseMatrix, target_dim: Option<usize>, centered: bool) -> Result<CompatMatrix> {
    let (side, samples) = long_side(a);
    let limit = a.rows().min(a.cols());
    let k = target_dim.unwrap_or(limit);
    if k > limit || k == 0 {
        return Err(Error::RankTooLarge { rank: k, limit });
    }
    let data = if centered { column_center(&samples) } else { samples };
    let d = data.cols();
    let mut basis: Vec<Vec<f64>> = match svd_exact(&data, RANK_TOL) {
        Ok(svd) => (0..svd.rank().min(k)).map(|j| svd.v.column(j)).collect(),
        Err(Error::ZeroMatrix) => Vec::new(),
        Err(e) => return Err(e),
    };
    let mut e = 0;
    while basis.len() < k {
        let mut cand = vec![0.0; d];
        cand[e % d] = 1.0;
        e += 1;
        for _ in 0..2 {
            for b in &basis {
                let h = dot(b, &cand);
                cand.iter_mut().zip(b).for_each(|(c, bi)| *c -= h * bi);
            }
        }
        let n = dot(&cand, &cand).sqrt();
        if n > 1e-6 {
            basis.push(cand.into_iter().map(|c| c / n).collect());
        }
    }
    Ok(CompatMatrix {
        c: Some(DenseMatrix::from_columns(&basis)?),
        mode: CompatMode::Pca,
        side,
        seed: None,
    })
}

/// a2: Gaussian projection scaled by `1/sqrt(d)`, with d the length of the
/// projected samples, so columns of `C` have unit expected norm.
pub fn compat_random(a: &DenseMatrix, seed: u64) -> CompatMatrix {
    let (side, samples) = long_side(a);
    let d = samples.cols();
    let k = a.rows().min(a.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64).sqrt();
    let data: Vec<f64> = (0..d * k)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            scale * g
        })
        .collect();
    CompatMatrix {
        c: Some(DenseMatrix::new(d, k, data).expect("finite gaussian draws")),
        mode: CompatMode::Random,
        side,
        seed: Some(seed),
    }
}

/// Builds the transform for `mode`. `Identity` requires square data.
pub fn compat_for(
    mode: CompatMode,
    a: &DenseMatrix,
    seed: u64,
    target_dim: Option<usize>,
    pca_centered: bool,
) -> Result<CompatMatrix> {
    match mode {
        CompatMode::Identity => {
            if !a.is_square() {
                return Err(Error::CompatibilityMissing {
                    x_len: a.cols(),
                    z_len: a.rows(),
                });
            }
            Ok(CompatMatrix::identity())
        }
        CompatMode::PseudoInverse => compat_pseudoinverse(a),
        CompatMode::Pca => compat_pca(a, target_dim, pca_centered),
        CompatMode::Random => Ok(compat_random(a, seed)),
    }
}

/// Maps the projected side through `C` so both sources share a feature
/// length.
pub fn apply_compat(compat: &CompatMatrix, sources: &DataSources) -> Result<DataSources> {
    let out = match (&compat.c, compat.side) {
        (None, _) | (_, ProjectedSide::Neither) => sources.clone(),
        (Some(c), ProjectedSide::Row) => DataSources {
            x: sources.x.matmul(c)?,
            z: sources.z.clone(),
        },
        (Some(c), ProjectedSide::Column) => DataSources {
            x: sources.x.clone(),
            z: sources.z.matmul(c)?,
        },
    };
    if !out.is_compatible() {
        return Err(Error::ShapeMismatch(format!(
            "after the compatibility transform row samples have length {} and column samples {}",
            out.x.cols(),
            out.z.cols()
        )));
    }
    Ok(out)
}

/// `‖A − A·C·Cᵀ‖²_F`, with `A` column-centered when `centered`.
pub fn pca_objective(a: &DenseMatrix, c: &DenseMatrix, centered: bool) -> Result<f64> {
    let data = if centered { column_center(a) } else { a.clone() };
    let proj = data.matmul(c)?.matmul_t(c)?;
    let r = data.sub(&proj)?.frobenius_norm();
    Ok(r * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{build_sources, kernel_matrix, KernelSpec};
    use crate::linalg::qr_thin;

    #[test]
    fn pseudoinverse_examples() {
        let c = compat_pseudoinverse(&DenseMatrix::from_diag(&[2.0, 4.0])).unwrap();
        let cm = c.c.unwrap();
        assert!(cm.sub(&DenseMatrix::from_diag(&[0.5, 0.25])).unwrap().max_abs() < 1e-15);

        let (q, _) = qr_thin(&DenseMatrix::gaussian(7, 3, 1));
        // q is 7×3: the column side (length 7) is projected with (qᵀ)† = q.
        let c = compat_pseudoinverse(&q).unwrap();
        assert_eq!(c.side, ProjectedSide::Column);
        assert!(c.c.unwrap().sub(&q).unwrap().max_abs() < 1e-12);
        let c = compat_pseudoinverse(&q.transpose()).unwrap();
        assert!(c.c.unwrap().sub(&q).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn moore_penrose_conditions() {
        let a = DenseMatrix::gaussian(4, 6, 21);
        let c = compat_pseudoinverse(&a).unwrap().c.unwrap();
        let tol = 1e-8;
        let aca = a.matmul(&c).unwrap().matmul(&a).unwrap();
        assert!(aca.sub(&a).unwrap().frobenius_norm() <= tol * a.frobenius_norm());
        let cac = c.matmul(&a).unwrap().matmul(&c).unwrap();
        assert!(cac.sub(&c).unwrap().frobenius_norm() <= tol * c.frobenius_norm());
        let ac = a.matmul(&c).unwrap();
        assert!(ac.sub(&ac.transpose()).unwrap().max_abs() <= tol);
        let ca = c.matmul(&a).unwrap();
        assert!(ca.sub(&ca.transpose()).unwrap().max_abs() <= tol);
    }

    #[test]
    fn pca_rank_one_plus_noise() {
        let u = DenseMatrix::gaussian(4, 1, 2);
        let v = DenseMatrix::gaussian(1, 9, 3);
        let noise = DenseMatrix::gaussian(4, 9, 4).scale(1e-12);
        let a = u.matmul(&v).unwrap().add(&noise).unwrap();
        let c = compat_pca(&a, Some(1), false).unwrap();
        let obj = pca_objective(&a, c.c.as_ref().unwrap(), false).unwrap();
        assert!(obj.sqrt() <= 1e-10, "{obj}");
    }

    #[test]
    fn pca_full_dim_is_lossless_when_rank_fits() {
        // 3×8 row samples: centered rank ≤ 2 < target 3.
        let a = DenseMatrix::gaussian(3, 8, 5);
        let c = compat_pca(&a, None, true).unwrap();
        let cm = c.c.unwrap();
        assert_eq!(cm.shape(), (8, 3));
        let gap = cm.t_matmul(&cm).unwrap().sub(&DenseMatrix::identity(3)).unwrap();
        assert!(gap.max_abs() < 1e-10);
        let obj = pca_objective(&a, &cm, true).unwrap();
        assert!(obj.sqrt() <= 1e-8 * a.frobenius_norm());
    }

    #[test]
    fn pca_objective_matches_tail_spectrum() {
        // 10×4: the column side (length 10) is projected, so the samples
        // are the rows of Aᵀ.
        let a = DenseMatrix::gaussian(10, 4, 6);
        let c = compat_pca(&a, Some(2), true).unwrap();
        assert_eq!(c.side, ProjectedSide::Column);
        let samples = a.transpose();
        let obj = pca_objective(&samples, c.c.as_ref().unwrap(), true).unwrap();
        let spectrum = svd_exact(&column_center(&samples), RANK_TOL).unwrap().s;
        let tail: f64 = spectrum[2..].iter().map(|s| s * s).sum();
        assert!((obj - tail).abs() < 1e-8, "{obj} vs {tail}");
    }

    #[test]
    fn pca_is_optimal_among_random_projections() {
        let a = DenseMatrix::gaussian(5, 12, 7);
        let c = compat_pca(&a, None, true).unwrap().c.unwrap();
        let best = pca_objective(&a, &c, true).unwrap().sqrt();
        for seed in 0..10 {
            let (q, _) = qr_thin(&DenseMatrix::gaussian(12, 5, 100 + seed));
            let other = pca_objective(&a, &q, true).unwrap().sqrt();
            assert!(other >= best - 1e-8);
        }
    }

    #[test]
    fn pca_rank_too_large() {
        let a = DenseMatrix::gaussian(3, 5, 0);
        assert!(matches!(
            compat_pca(&a, Some(4), true),
            Err(Error::RankTooLarge { rank: 4, limit: 3 })
        ));
    }

    #[test]
    fn random_projection_determinism_and_concentration() {
        let a = DenseMatrix::gaussian(20, 200, 8);
        let c1 = compat_random(&a, 5);
        let c2 = compat_random(&a, 5);
        let c3 = compat_random(&a, 6);
        assert_eq!(c1, c2);
        let m1 = c1.c.unwrap();
        assert!(m1.sub(c3.c.as_ref().unwrap()).unwrap().frobenius_norm() > 0.0);
        assert_eq!(m1.shape(), (200, 20));
        for n in m1.column_norms() {
            assert!((0.6..=1.4).contains(&n), "{n}");
        }
    }

    #[test]
    fn apply_shapes() {
        let sq = DenseMatrix::gaussian(4, 4, 1);
        let s = build_sources(&sq);
        assert_eq!(apply_compat(&CompatMatrix::identity(), &s).unwrap(), s);

        let a = DenseMatrix::gaussian(3, 5, 2);
        let s = build_sources(&a);
        for mode in [CompatMode::PseudoInverse, CompatMode::Pca, CompatMode::Random] {
            let c = compat_for(mode, &a, 1, None, true).unwrap();
            let t = apply_compat(&c, &s).unwrap();
            assert_eq!(t.x.shape(), (3, 3));
            assert_eq!(t.z.shape(), (5, 3));
        }
        let tall = DenseMatrix::gaussian(6, 2, 3);
        let s = build_sources(&tall);
        let c = compat_random(&tall, 1);
        let t = apply_compat(&c, &s).unwrap();
        assert_eq!((t.x.shape(), t.z.shape()), ((6, 2), (2, 2)));
        assert!(compat_for(CompatMode::Identity, &tall, 0, None, true).is_err());
        let narrow = compat_pca(&a, Some(2), true).unwrap();
        assert!(matches!(apply_compat(&narrow, &build_sources(&a)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn linear_kernel_with_pseudoinverse_reproduces_data() {
        for a in [
            DenseMatrix::gaussian(5, 5, 9),
            DenseMatrix::gaussian(4, 7, 10),
            DenseMatrix::gaussian(7, 4, 11),
        ] {
            let c = compat_pseudoinverse(&a).unwrap();
            let s = apply_compat(&c, &build_sources(&a)).unwrap();
            let g = kernel_matrix(&KernelSpec::linear(), &s).unwrap();
            assert!(g.sub(&a).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn transforms_match_apply() {
        let a = DenseMatrix::gaussian(4, 9, 12);
        let c = compat_pca(&a, None, true).unwrap();
        let s = apply_compat(&c, &build_sources(&a)).unwrap();
        let x0 = c.transform_row(a.row(0)).unwrap();
        for (u, v) in x0.iter().zip(s.x.row(0)) {
            assert!((u - v).abs() < 1e-12);
        }
        assert_eq!(c.transform_column(&[1.0; 4]).unwrap(), vec![1.0; 4]);
    }
}
