//! Scalar abstraction for the numeric kernels.
//!
//! The link-budget math is pure floating-point arithmetic, so it is written
//! once against [`Real`] and instantiated at `f32` or `f64`. The LP-backed
//! planning stack stays `f64` end to end; making it generic would buy
//! nothing because the solver interface is `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the numeric kernels.
///
/// This is [`num_traits::Float`] plus conversion from primitive literals
/// and the formatting bounds needed for error messages. `f32` and `f64`
/// implement it out of the box.
pub trait Real: Float + FromPrimitive + Debug + Display + Copy {
    /// Converts an `f64` constant, panicking if the value is not
    /// representable. Only used with compile-time literals that fit
    /// comfortably in `f32`.
    fn from_f64_const(value: f64) -> Self {
        Self::from_f64(value).expect("literal must be representable in the scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
