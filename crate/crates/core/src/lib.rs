//! Sketching-based low-rank approximation with learned sparse sketching
//! matrices: the SCW algorithm, characteristic-polynomial pseudo-inverses,
//! Nyström approximation, surrogate-loss training with fixed and learnable
//! sparsity patterns, and a complexity auditor for branching programs.

pub mod cli;
pub mod data;
pub mod gjtrace;
pub mod linalg;
pub mod nystrom;
pub mod pinv;
pub mod proxy;
pub mod scw;
pub mod sketch;
pub mod train;

pub use linalg::{DenseMatrix, SvdResult};
pub use sketch::SparseSketch;
