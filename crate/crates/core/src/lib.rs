pub mod compat;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod ksvd;
pub mod linalg;
pub mod nystrom;
pub mod pipeline;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, SvdResult};
