//! Reference motion search: index clip travel distances, sample sub-goals
//! between the start and end points, and match and align a database clip to
//! each sub-goal segment.

use rand::Rng;
use thiserror::Error;

use crate::dataset::MotionClip;
use crate::geom::{rotate_about_vertical, translate, SkeletonTopology};
use crate::scalar::Scalar;

/// Attempts before a plan is declared infeasible.
pub const PLAN_ATTEMPTS: usize = 1000;

/// Default match tolerance in meters.
pub const MATCH_SIGMA: f64 = 0.05;

/// Times the tolerance band may be doubled before giving up.
pub const SIGMA_WIDENINGS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("clip database is empty")]
    EmptyDatabase,
    #[error("no clip travels within ({lo}, {hi})")]
    NoMatch { lo: f64, hi: f64 },
    #[error("no feasible plan after {PLAN_ATTEMPTS} attempts")]
    PlanInfeasible,
}

/// Travel distances of every database clip plus their range.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipIndex<S: Scalar> {
    /// `(clip id, travel distance)`.
    pub entries: Vec<(usize, S)>,
    pub d_min: S,
    pub d_max: S,
}

pub fn build_index<S: Scalar>(clips: &[MotionClip<S>]) -> Result<ClipIndex<S>, SearchError> {
    if clips.is_empty() {
        return Err(SearchError::EmptyDatabase);
    }
    let entries: Vec<(usize, S)> = clips
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.travel_distance))
        .collect();
    let d_min = entries
        .iter()
        .map(|&(_, d)| d)
        .fold(S::infinity(), |a, b| a.min(b));
    let d_max = entries
        .iter()
        .map(|&(_, d)| d)
        .fold(S::neg_infinity(), |a, b| a.max(b));
    Ok(ClipIndex { entries, d_min, d_max })
}

/// Sub-goal chain on the ground between adjusted start and end points.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGoalPlan<S: Scalar> {
    /// `[p_start', p_1, ..., p_{L-1}, p_end']` -- adjusted endpoints included.
    pub points: Vec<[S; 2]>,
    /// Length of every consecutive segment; all inside `[d_min, d_max]`.
    pub segment_dists: Vec<S>,
    /// Unit heading of every segment.
    pub headings: Vec<[S; 2]>,
    /// Offset applied to the start point; apply it to the start state too.
    pub start_offset: [S; 2],
    /// Offset applied to the end point.
    pub end_offset: [S; 2],
}

impl<S: Scalar> SubGoalPlan<S> {
    pub fn segments(&self) -> usize {
        self.segment_dists.len()
    }

    /// Total polyline length.
    pub fn length(&self) -> S {
        self.segment_dists.iter().fold(S::zero(), |a, &b| a + b)
    }
}

fn norm2<S: Scalar>(v: [S; 2]) -> S {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

fn rotate2<S: Scalar>(v: [S; 2], angle: S) -> [S; 2] {
    let (sin, cos) = angle.sin_cos();
    [v[0] * cos - v[1] * sin, v[0] * sin + v[1] * cos]
}

/// Signed angle from `a` to `b`, matching the vertical-axis rotation
/// convention of [`rotate_about_vertical`].
fn angle_between<S: Scalar>(a: [S; 2], b: [S; 2]) -> S {
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1])
}

/// Sample `l` segments from `p_start` toward `p_end`.
///
/// Interior segments draw their length uniformly from `(d_min, d_max)` and
/// their heading uniformly within a quarter turn of the previous segment;
/// the first segment points at the end, the last is forced onto it. The
/// endpoints are shifted by the minimal offsets along their adjacent
/// headings that bring the first and last segment lengths into the open
/// range. Resamples up to [`PLAN_ATTEMPTS`] times, then gives up.
pub fn sample_subgoals<S: Scalar, R: Rng>(
    p_start: [S; 2],
    p_end: [S; 2],
    l: usize,
    index: &ClipIndex<S>,
    rng: &mut R,
) -> Result<SubGoalPlan<S>, SearchError> {
    assert!(l >= 1, "at least one segment");
    let (d_min, d_max) = (index.d_min.to_f64_lossy(), index.d_max.to_f64_lossy());
    if !(d_min < d_max) {
        return Err(SearchError::PlanInfeasible);
    }
    let span = d_max - d_min;
    let margin = span * 0.05;
    let clamp_open = |d: f64| d.max(d_min + margin).min(d_max - margin);

    let to_end = [p_end[0] - p_start[0], p_end[1] - p_start[1]];
    let first_heading = if norm2(to_end) < S::of(1e-9) {
        [S::one(), S::zero()]
    } else {
        let n = norm2(to_end);
        [to_end[0] / n, to_end[1] / n]
    };

    if l == 1 {
        let dist = norm2(to_end).to_f64_lossy();
        let target = clamp_open(dist);
        let delta = S::of((target - dist) / 2.0);
        let h = first_heading;
        let p_s = [p_start[0] - delta * h[0], p_start[1] - delta * h[1]];
        let p_e = [p_end[0] + delta * h[0], p_end[1] + delta * h[1]];
        return Ok(SubGoalPlan {
            points: vec![p_s, p_e],
            segment_dists: vec![S::of(target)],
            headings: vec![h],
            start_offset: [p_s[0] - p_start[0], p_s[1] - p_start[1]],
            end_offset: [p_e[0] - p_end[0], p_e[1] - p_end[1]],
        });
    }

    for _ in 0..PLAN_ATTEMPTS {
        let mut points = vec![p_start];
        let mut dists = Vec::with_capacity(l);
        let mut headings = Vec::with_capacity(l);
        let mut heading = first_heading;
        // Segments 1..=L-1 are sampled; the L-th runs into the end point.
        for seg in 0..l - 1 {
            if seg > 0 {
                let dev = S::of(rng.random_range(
                    -std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2,
                ));
                heading = rotate2(heading, dev);
            }
            let d = S::of(rng.random_range(d_min..d_max));
            let last = *points.last().unwrap();
            points.push([last[0] + d * heading[0], last[1] + d * heading[1]]);
            dists.push(d);
            headings.push(heading);
        }
        let last = *points.last().unwrap();
        let gap = [p_end[0] - last[0], p_end[1] - last[1]];
        let gap_len = norm2(gap);
        if gap_len < S::of(1e-9) {
            continue;
        }
        let final_heading = [gap[0] / gap_len, gap[1] / gap_len];
        // Keep the relative-deviation constraint on the forced segment too.
        if angle_between(heading, final_heading).abs() > S::FRAC_PI_2() {
            continue;
        }
        let target = S::of(clamp_open(gap_len.to_f64_lossy()));
        let adjusted_end = [
            last[0] + target * final_heading[0],
            last[1] + target * final_heading[1],
        ];
        points.push(adjusted_end);
        dists.push(target);
        headings.push(final_heading);
        return Ok(SubGoalPlan {
            points,
            segment_dists: dists,
            headings,
            start_offset: [S::zero(), S::zero()],
            end_offset: [adjusted_end[0] - p_end[0], adjusted_end[1] - p_end[1]],
        });
    }
    Err(SearchError::PlanInfeasible)
}

/// Uniform choice among clips whose travel distance lies strictly inside
/// `(d_l - sigma, d_l)`. Note the exclusive upper bound: a clip travelling
/// exactly `d_l` does not match.
pub fn match_clip<S: Scalar, R: Rng>(
    d_l: S,
    index: &ClipIndex<S>,
    sigma: S,
    rng: &mut R,
) -> Result<usize, SearchError> {
    if index.entries.is_empty() {
        return Err(SearchError::EmptyDatabase);
    }
    let lo = d_l - sigma;
    let candidates: Vec<usize> = index
        .entries
        .iter()
        .filter(|&&(_, d)| d > lo && d < d_l)
        .map(|&(id, _)| id)
        .collect();
    if candidates.is_empty() {
        return Err(SearchError::NoMatch {
            lo: lo.to_f64_lossy(),
            hi: d_l.to_f64_lossy(),
        });
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}

/// [`match_clip`] with the band doubled up to [`SIGMA_WIDENINGS`] times when
/// empty; sparse desk-scale databases often need the slack.
pub fn match_clip_widening<S: Scalar, R: Rng>(
    d_l: S,
    index: &ClipIndex<S>,
    sigma: S,
    rng: &mut R,
) -> Result<(usize, S), SearchError> {
    let mut s = sigma;
    for _ in 0..=SIGMA_WIDENINGS {
        match match_clip(d_l, index, s, rng) {
            Ok(id) => return Ok((id, s)),
            Err(SearchError::NoMatch { .. }) => s = s * S::of(2.0),
            Err(e) => return Err(e),
        }
    }
    Err(SearchError::PlanInfeasible)
}

/// A database clip rigidly placed onto a plan segment.
#[derive(Debug, Clone)]
pub struct AlignedClip<S: Scalar> {
    pub clip_id: usize,
    /// Rotation applied about the vertical through the segment start.
    pub rotation: S,
    /// Translation applied before rotating.
    pub translation: [S; 3],
    pub clip: MotionClip<S>,
}

/// Translate the clip so its first-frame root sits on `segment_start`, then
/// rotate about the vertical there so the clip's net root displacement runs
/// along `heading`. Bone lengths are untouched; the route is re-extracted in
/// the new pose.
pub fn align_clip<S: Scalar>(
    clip: &MotionClip<S>,
    clip_id: usize,
    segment_start: [S; 2],
    heading: [S; 2],
    topo: &SkeletonTopology<S>,
) -> Result<AlignedClip<S>, crate::dataset::DataError> {
    let root = topo.root();
    let first = clip.seq.frames[0].positions[root];
    let offset = [segment_start[0] - first[0], S::zero(), segment_start[1] - first[2]];
    let moved = translate(&clip.seq, offset);
    let last = moved.frames[moved.len() - 1].positions[root];
    let disp = [last[0] - segment_start[0], last[2] - segment_start[1]];
    let rotation = if norm2(disp) < S::of(1e-9) {
        S::zero()
    } else {
        let n = norm2(disp);
        angle_between([disp[0] / n, disp[1] / n], heading)
    };
    let rotated = rotate_about_vertical(&moved, rotation, segment_start);
    Ok(AlignedClip {
        clip_id,
        rotation,
        translation: offset,
        clip: MotionClip::from_sequence(rotated, topo)?,
    })
}
