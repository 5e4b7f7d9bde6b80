//! Dense real linear algebra and the SVD solver family.

mod io;
mod lanczos;
mod matrix;
mod qr;
mod randomized;
mod svd;

pub use io::{fmt_f64, read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv};
pub use lanczos::{eigsh_lanczos, svd_truncated, svd_truncated_with_info, KrylovInfo};
pub use matrix::{axpy, dot, norm, squared_distance, DenseMatrix};
pub use qr::qr_thin;
pub use randomized::{svd_randomized, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
pub use svd::{canonicalize_columns, pseudoinverse, svd_exact, sym_eigen, SvdResult, RANK_TOL};

