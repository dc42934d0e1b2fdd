//! Hierarchical motion synthesis toolkit.
//!
//! The pipeline retrieves reference clips between sampled sub-goals on the
//! ground, re-synthesizes each clip by recombining content and style features
//! through a bi-linear transformation, and connects consecutive clips with
//! transitions generated in a compact per-bone latitude/longitude space.
//! Everything numeric is generic over [`scalar::Scalar`]; the aliases below
//! pin the `f64` instantiation used by the CLI and the shipped models.

pub mod dataset;
pub mod geom;
pub mod longrange;
pub mod nn;
pub mod pipeline;
pub mod refsearch;
pub mod scalar;
pub mod shortrange;
pub mod slerp;

pub use scalar::Scalar;

pub type MotionState64 = geom::MotionState<f64>;
pub type MotionSequence64 = geom::MotionSequence<f64>;
pub type SkeletonTopology64 = geom::SkeletonTopology<f64>;
pub type DirectionFrame64 = geom::DirectionFrame<f64>;
pub type SlerpBasis64 = slerp::SlerpBasis<f64>;
pub type SlerpParams64 = slerp::SlerpParams<f64>;
pub type ParamTrajectory64 = slerp::ParamTrajectory<f64>;
pub type Tensor64 = nn::Tensor<f64>;
pub type MotionClip64 = dataset::MotionClip<f64>;
pub type ShortRangeModel64 = shortrange::ShortRangeModel<f64>;
pub type TransitionModel64 = longrange::TransitionModel<f64>;
pub type ClipDatabase64 = pipeline::ClipDatabase<f64>;
