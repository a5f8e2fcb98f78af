//! Floating-point abstraction shared by the model, the integrator and the
//! spectral tools.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the simulator is generic over: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a count or index.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wraps an angle into (−π, π].
pub fn wrap_phase<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let mut y = x - two_pi * ((x + T::PI()) / two_pi).floor();
    // `y` is now in [−π, π); move the lower edge onto the upper one.
    if y <= -T::PI() {
        y += two_pi;
    }
    y
}

/// Relative closeness test used for boundary tie-breaks.
pub(crate) fn nearly_equal<T: Real>(a: T, b: T, rel: T) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= rel * scale || a == b
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_phase_half_open_interval() {
        assert_eq!(wrap_phase(PI), PI);
        assert_eq!(wrap_phase(-PI), PI);
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5_f64) - 0.5).abs() < 1e-15);
        assert!((wrap_phase(-0.5 - 4.0 * PI) + 0.5).abs() < 1e-12);
        let w = wrap_phase(-3.0_f32);
        assert!(w > -std::f32::consts::PI && w <= std::f32::consts::PI);
    }
}
