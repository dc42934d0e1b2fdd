//! Two-coordinate parameterization of unit directions relative to a pair of
//! endpoint directions.
//!
//! Given unit endpoint directions `start` and `end`, any unit vector can be
//! written with a longitude (fraction of the great-circle arc from `start`
//! toward `end`) and a latitude (rotation out of the `start`-`end` plane
//! toward its normal). Synthesis is two chained spherical interpolations;
//! recovery is its exact inverse away from the poles. This gives transitions
//! a compact 2-per-bone output space whose outputs are unit by construction.

use thiserror::Error;

use crate::geom::{forward_kinematics, DirectionFrame, MotionSequence, MotionState, SkeletonTopology};
use crate::geom::direction_vectors;
use crate::scalar::{vec3, Scalar};

/// Cross products smaller than this make a basis degenerate.
pub const DEGENERATE_CROSS_EPS: f64 = 1e-6;

/// In-plane components smaller than this are treated as polar.
pub const POLAR_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SlerpError {
    #[error("endpoint directions are parallel or antiparallel; basis undefined")]
    DegenerateBasis,
}

/// Orthogonal-ish triple built from two unit endpoint directions.
#[derive(Debug, Clone, PartialEq)]
pub struct SlerpBasis<S: Scalar> {
    /// Unit direction at the first endpoint.
    pub start: [S; 3],
    /// Unit direction at the last endpoint.
    pub end: [S; 3],
    /// Angle between `start` and `end`, in (0, pi).
    pub angle: S,
    /// Unit normal of the `start`-`end` plane (normalized cross product).
    pub normal: [S; 3],
    /// Latitude cap: the angle from the plane to `normal`, always pi/2.
    pub out_cap: S,
}

/// Latitude/longitude coordinates of one direction against a basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlerpParams<S: Scalar> {
    /// Out-of-plane latitude in [-1, 1]; 0 is in-plane, +-1 is the normal pole.
    pub latitude: S,
    /// In-plane longitude in [0, 1]; 0 is `start`, 1 is `end`.
    pub longitude: S,
}

impl<S: Scalar> SlerpParams<S> {
    pub fn new(latitude: S, longitude: S) -> Self {
        SlerpParams { latitude, longitude }
    }

    pub fn in_range(&self) -> bool {
        self.latitude >= -S::one()
            && self.latitude <= S::one()
            && self.longitude >= S::zero()
            && self.longitude <= S::one()
    }
}

/// Per-frame, per-bone parameter stack of shape `frames x bones x 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTrajectory<S: Scalar> {
    pub frames: Vec<Vec<SlerpParams<S>>>,
}

impl<S: Scalar> ParamTrajectory<S> {
    /// `(frame count, bone count, 2)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let bones = self.frames.first().map_or(0, |f| f.len());
        (self.frames.len(), bones, 2)
    }
}

pub fn make_basis<S: Scalar>(start: [S; 3], end: [S; 3]) -> Result<SlerpBasis<S>, SlerpError> {
    let cross = vec3::cross(start, end);
    let cross_norm = vec3::norm(cross);
    if cross_norm < S::of(DEGENERATE_CROSS_EPS) {
        return Err(SlerpError::DegenerateBasis);
    }
    Ok(SlerpBasis {
        start,
        end,
        angle: cross_norm.atan2(vec3::dot(start, end)),
        normal: vec3::scale(cross, S::one() / cross_norm),
        out_cap: S::FRAC_PI_2(),
    })
}

/// Chained spherical interpolation: longitude first along the `start`-`end`
/// arc, then latitude out of the plane toward `normal`. Output is unit.
pub fn synthesize_direction<S: Scalar>(basis: &SlerpBasis<S>, p: SlerpParams<S>) -> [S; 3] {
    let sin_angle = basis.angle.sin();
    let a = ((S::one() - p.longitude) * basis.angle).sin() / sin_angle;
    let b = (p.longitude * basis.angle).sin() / sin_angle;
    let in_plane = vec3::add(vec3::scale(basis.start, a), vec3::scale(basis.end, b));
    let lat = p.latitude * basis.out_cap;
    vec3::add(
        vec3::scale(in_plane, lat.cos()),
        vec3::scale(basis.normal, lat.sin()),
    )
}

/// Exact inverse of [`synthesize_direction`] for directions whose in-plane
/// angle lies within the arc. At the poles (`v` along the normal) the
/// longitude is undefined and fixed to 0.5 by convention.
pub fn recover_params<S: Scalar>(basis: &SlerpBasis<S>, v: [S; 3]) -> SlerpParams<S> {
    let half = S::of(0.5);
    let out = vec3::dot(v, basis.normal).max(-S::one()).min(S::one());
    let latitude = out.asin() / basis.out_cap;
    let in_plane = vec3::sub(v, vec3::scale(basis.normal, out));
    let n = vec3::norm(in_plane);
    if n < S::of(POLAR_EPS) {
        return SlerpParams::new(latitude, half);
    }
    let u = vec3::scale(in_plane, S::one() / n);
    let swept = vec3::dot(vec3::cross(basis.start, u), basis.normal)
        .atan2(vec3::dot(basis.start, u));
    let longitude = (swept / basis.angle).max(S::zero()).min(S::one());
    SlerpParams::new(latitude, longitude)
}

/// Per-bone basis with a normalized-lerp fallback where the endpoint
/// directions are (anti)parallel and no plane exists. The fallback ignores
/// latitude; antiparallel endpoints get a deterministic orthogonal axis for
/// the midpoint singularity.
#[derive(Debug, Clone)]
pub enum BoneBasis<S: Scalar> {
    Slerp(SlerpBasis<S>),
    Degenerate {
        start: [S; 3],
        end: [S; 3],
        axis: [S; 3],
    },
}

impl<S: Scalar> BoneBasis<S> {
    pub fn between(start: [S; 3], end: [S; 3]) -> Self {
        match make_basis(start, end) {
            Ok(b) => BoneBasis::Slerp(b),
            Err(_) => BoneBasis::Degenerate {
                start,
                end,
                axis: orthogonal_axis(start),
            },
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, BoneBasis::Degenerate { .. })
    }

    /// Direction for the given parameters; always finite and unit.
    pub fn direction(&self, p: SlerpParams<S>) -> [S; 3] {
        match self {
            BoneBasis::Slerp(b) => synthesize_direction(b, p),
            BoneBasis::Degenerate { start, end, axis } => {
                let mix = vec3::add(
                    vec3::scale(*start, S::one() - p.longitude),
                    vec3::scale(*end, p.longitude),
                );
                let n = vec3::norm(mix);
                if n < S::of(POLAR_EPS) {
                    *axis
                } else {
                    vec3::scale(mix, S::one() / n)
                }
            }
        }
    }

    /// Parameters for a direction; the degenerate fallback keeps latitude 0
    /// and reads longitude off the endpoint `v` is closer to.
    pub fn params(&self, v: [S; 3]) -> SlerpParams<S> {
        match self {
            BoneBasis::Slerp(b) => recover_params(b, v),
            BoneBasis::Degenerate { start, .. } => {
                let half = S::of(0.5);
                let along = vec3::dot(*start, v);
                let longitude = if along > S::zero() {
                    S::zero()
                } else if along < S::zero() {
                    S::one()
                } else {
                    half
                };
                SlerpParams::new(S::zero(), longitude)
            }
        }
    }
}

/// Deterministic unit vector orthogonal to `v`: Gram-Schmidt of the canonical
/// axis least aligned with it.
pub fn orthogonal_axis<S: Scalar>(v: [S; 3]) -> [S; 3] {
    let mut least = 0;
    for c in 1..3 {
        if v[c].abs() < v[least].abs() {
            least = c;
        }
    }
    let mut e = [S::zero(); 3];
    e[least] = S::one();
    let proj = vec3::dot(e, v);
    vec3::normalize(vec3::sub(e, vec3::scale(v, proj)))
}

/// Per-bone bases between two boundary frames plus the mask of bones whose
/// endpoints were (anti)parallel.
pub fn bone_bases<S: Scalar>(
    start: &DirectionFrame<S>,
    end: &DirectionFrame<S>,
) -> (Vec<BoneBasis<S>>, Vec<bool>) {
    assert_eq!(start.dirs.len(), end.dirs.len(), "boundary frames share one skeleton");
    let bases: Vec<BoneBasis<S>> = start
        .dirs
        .iter()
        .zip(&end.dirs)
        .map(|(&a, &b)| BoneBasis::between(a, b))
        .collect();
    let excluded = bases.iter().map(|b| b.is_degenerate()).collect();
    (bases, excluded)
}

/// Parameter trajectory of `interior` frames against the boundary bases.
#[derive(Debug, Clone)]
pub struct ParamExtraction<S: Scalar> {
    pub trajectory: ParamTrajectory<S>,
    /// True for bones whose basis was degenerate; those entries carry the
    /// fallback parameterization and are excluded from supervision.
    pub excluded: Vec<bool>,
}

pub fn motion_to_params<S: Scalar>(
    start: &DirectionFrame<S>,
    end: &DirectionFrame<S>,
    interior: &[DirectionFrame<S>],
) -> ParamExtraction<S> {
    let (bases, excluded) = bone_bases(start, end);
    let frames = interior
        .iter()
        .map(|f| {
            assert_eq!(f.dirs.len(), bases.len(), "interior frames share one skeleton");
            bases
                .iter()
                .zip(&f.dirs)
                .map(|(basis, &v)| basis.params(v))
                .collect()
        })
        .collect();
    ParamExtraction {
        trajectory: ParamTrajectory { frames },
        excluded,
    }
}

/// Decode a parameter trajectory back to motion: per frame, synthesize every
/// bone direction against the boundary bases, place the root from
/// `root_track`, and rebuild positions with forward kinematics. Every output
/// frame is bone-consistent by construction.
pub fn params_to_motion<S: Scalar>(
    start: &MotionState<S>,
    end: &MotionState<S>,
    traj: &ParamTrajectory<S>,
    root_track: &[[S; 3]],
    topo: &SkeletonTopology<S>,
    fps: S,
) -> Result<MotionSequence<S>, crate::geom::GeomError> {
    assert_eq!(traj.frames.len(), root_track.len(), "one root position per frame");
    let start_dirs = direction_vectors(start, topo)?;
    let end_dirs = direction_vectors(end, topo)?;
    let (bases, _) = bone_bases(&start_dirs, &end_dirs);
    let frames = traj
        .frames
        .iter()
        .zip(root_track)
        .map(|(params, &root)| {
            let dirs = bases
                .iter()
                .zip(params)
                .map(|(basis, &p)| basis.direction(p))
                .collect();
            forward_kinematics(&DirectionFrame { dirs, root_position: root }, topo)
        })
        .collect();
    MotionSequence::new(frames, fps)
}

// Cache-file layout for parameter trajectories: header `N B 2`, then N lines
// of `latitude longitude` pairs, bone-major. Mirrors the motion file format.

pub fn format_trajectory<S: Scalar>(traj: &ParamTrajectory<S>) -> String {
    let (n, bones, _) = traj.dims();
    let mut out = format!("{n} {bones} 2\n");
    for frame in &traj.frames {
        let mut first = true;
        for p in frame {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{} {}", p.latitude, p.longitude));
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn parse_trajectory<S: Scalar>(
    text: &str,
) -> Result<ParamTrajectory<S>, crate::geom::FormatError> {
    use crate::geom::FormatError;
    let bad = |line: usize, msg: String| FormatError { line, message: msg };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, head) = lines
        .next()
        .ok_or_else(|| bad(1, "empty trajectory file".into()))?;
    let toks: Vec<&str> = head.split_whitespace().collect();
    if toks.len() != 3 || toks[2] != "2" {
        return Err(bad(ln, "header must be: N bones 2".into()));
    }
    let n: usize = toks[0]
        .parse()
        .map_err(|_| bad(ln, format!("bad frame count {:?}", toks[0])))?;
    let bones: usize = toks[1]
        .parse()
        .map_err(|_| bad(ln, format!("bad bone count {:?}", toks[1])))?;
    let mut frames = Vec::with_capacity(n);
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 2 * bones {
            return Err(bad(ln, format!("expected {} values", 2 * bones)));
        }
        let mut frame = Vec::with_capacity(bones);
        for b in 0..bones {
            let lat: S = vals[2 * b]
                .parse()
                .map_err(|_| bad(ln, format!("bad value {:?}", vals[2 * b])))?;
            let lon: S = vals[2 * b + 1]
                .parse()
                .map_err(|_| bad(ln, format!("bad value {:?}", vals[2 * b + 1])))?;
            frame.push(SlerpParams::new(lat, lon));
        }
        frames.push(frame);
    }
    if frames.len() != n {
        return Err(bad(0, format!("expected {n} frames, found {}", frames.len())));
    }
    Ok(ParamTrajectory { frames })
}
