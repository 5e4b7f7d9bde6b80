//! The chapters of `book/` as modules, so `cargo test` runs every Rust
//! snippet in the book as a doctest. mdbook cannot resolve external crates
//! in its own test runner; rustdoc can.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/kernels.md")]
pub mod kernels {}
#[doc = include_str!("../../../book/src/ksvd.md")]
pub mod ksvd {}
#[doc = include_str!("../../../book/src/compat.md")]
pub mod compat {}
#[doc = include_str!("../../../book/src/nystrom.md")]
pub mod nystrom {}
#[doc = include_str!("../../../book/src/downstream.md")]
pub mod downstream {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
