use core::fmt::Debug;
use core::iter::Sum;

use num_traits::Float;

/// Element type of a [`Tensor`](super::Tensor): `f32` for training, `f64` for checks.
pub trait Scalar: Float + Default + Debug + Sum + Send + Sync + 'static {
    const NAME: &'static str;

    fn of_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn of_f64(v: f64) -> Self {
        v as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn of_f64(v: f64) -> Self {
        v
    }

    fn as_f64(self) -> f64 {
        self
    }
}
