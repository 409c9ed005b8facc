//! Scalar abstraction for feature values, thresholds and leaf scores.
//!
//! The reference evaluator and the interval geometry work for any IEEE float;
//! the solver path converts everything to scaled integers up front.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`. Panics only for values the type cannot
    /// represent at all, which `Float` types never reject.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("float conversion")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Round `scale * v` to the nearest integer.
#[inline]
pub fn scaled_round(v: f64, scale: f64) -> i64 {
    (v * scale).round() as i64
}
