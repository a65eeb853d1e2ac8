//! Dense and sparse kernels used by assembly, smoothing and multigrid.

mod dense;
mod sparse;

pub use dense::{invert_small, DenseMatrix, FullPivLu, PartialPivLu, SINGULAR_REL_TOL};
pub use sparse::{dot, norm2, CooMatrix, CsrMatrix};
