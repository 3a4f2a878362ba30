//! Scalar abstraction for the numeric kernels.
//!
//! Similarity scores, embedding vectors, and CFG weights are computed by
//! functions generic over [`Scalar`], so the same kernels run on `f32` or
//! `f64`. The rest of the crate instantiates them with [`crate::Real`].

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the similarity and embedding kernels.
pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + std::iter::Sum {
    /// Lossless-enough conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::max_value)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
