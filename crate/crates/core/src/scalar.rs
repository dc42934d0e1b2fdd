//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Scalar`], which is any
//! IEEE float with the usual transcendental functions plus conversion and
//! text round-tripping. `f64` is the instantiation used by the CLI and the
//! trained pipeline; `f32` compiles and works where its precision suffices.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + FromStr
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and tolerances.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal converts to any Scalar")
    }

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Small fixed-size vector helpers shared by the geometry and slerp modules.
pub(crate) mod vec3 {
    use super::Scalar;

    pub fn add<S: Scalar>(a: [S; 3], b: [S; 3]) -> [S; 3] {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }

    pub fn sub<S: Scalar>(a: [S; 3], b: [S; 3]) -> [S; 3] {
        [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
    }

    pub fn scale<S: Scalar>(a: [S; 3], k: S) -> [S; 3] {
        [a[0] * k, a[1] * k, a[2] * k]
    }

    pub fn dot<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    pub fn cross<S: Scalar>(a: [S; 3], b: [S; 3]) -> [S; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    pub fn norm<S: Scalar>(a: [S; 3]) -> S {
        dot(a, a).sqrt()
    }

    pub fn normalize<S: Scalar>(a: [S; 3]) -> [S; 3] {
        let n = norm(a);
        [a[0] / n, a[1] / n, a[2] / n]
    }

    pub fn dist<S: Scalar>(a: [S; 3], b: [S; 3]) -> S {
        norm(sub(a, b))
    }
}
