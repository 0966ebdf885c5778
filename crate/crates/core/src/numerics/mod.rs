//! Shared numeric containers and routines: dense real tensors, complex
//! matrices with LQ/QR factorization, and order statistics.

mod linalg;
mod stats;
mod tensor;

pub use linalg::{lq_decompose, qr_decompose, solve_lower_triangular, RANK_TOLERANCE};
pub use stats::{mean, median, percentile, percentile_sorted, quartiles, Quartiles};
pub use tensor::{ComplexMatrix, RealTensor, Scalar};
