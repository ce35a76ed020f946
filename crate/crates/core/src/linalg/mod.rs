//! Small dense complex linear algebra, generic over [`Real`](crate::Real).

mod eigh;
mod lu;
mod matrix;

pub use eigh::{eigh, eigvalsh, lowest_eigenvalue, HermitianEigen};
pub use lu::lu_solve;
pub use matrix::{dot, norm2, CMatrix};
