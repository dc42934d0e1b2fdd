//! End-to-end assembly: plan sub-goals between the requested endpoint
//! states, fetch and style-transfer a reference clip per segment, generate
//! transitions between consecutive pieces, and concatenate everything into
//! one sequence with full provenance.

use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::dataset::{DataError, MotionClip};
use crate::geom::{
    direction_vectors, format_motion, forward_kinematics, rotate_state_about_vertical,
    DirectionFrame, GeomError, MotionSequence, MotionState, SkeletonTopology,
};
use crate::longrange::{
    interpolate_with_boundary, interpolation_mse, TransitionBoundary, TransitionModel,
};
use crate::nn::NnError;
use crate::refsearch::{
    align_clip, build_index, match_clip_widening, sample_subgoals, ClipIndex, SearchError,
    SubGoalPlan,
};
use crate::scalar::{vec3, Scalar};
use crate::shortrange::{diversity, ShortRangeModel};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("checkpoint skeleton mismatch: database has {expected} joints, model has {got}")]
    CheckpointMismatch { expected: usize, got: usize },
    #[error("evaluation needs at least one held-out clip")]
    EmptyEval,
    #[error("metrics report: line {line}: {message}")]
    BadReport { line: usize, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<crate::longrange::TrainError> for PipelineError {
    fn from(e: crate::longrange::TrainError) -> Self {
        match e {
            crate::longrange::TrainError::Nn(inner) => PipelineError::Nn(inner),
            crate::longrange::TrainError::Geom(inner) => PipelineError::Geom(inner),
            other => PipelineError::Nn(NnError::Checkpoint(other.to_string())),
        }
    }
}

/// Clip database: windowed training clips plus their travel-distance index.
#[derive(Debug)]
pub struct ClipDatabase<S: Scalar> {
    pub topo: SkeletonTopology<S>,
    pub clips: Vec<MotionClip<S>>,
    pub index: ClipIndex<S>,
}

impl<S: Scalar> ClipDatabase<S> {
    pub fn new(topo: SkeletonTopology<S>, clips: Vec<MotionClip<S>>) -> Result<Self, SearchError> {
        let index = build_index(&clips)?;
        Ok(ClipDatabase { topo, clips, index })
    }
}

/// Trained model pair used by generation.
pub struct Models<S: Scalar> {
    pub short: ShortRangeModel<S>,
    pub long: TransitionModel<S>,
}

/// How the style source of each segment is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum StylePolicy {
    /// A fresh random database clip per segment.
    Random,
    /// One fixed database clip for every segment.
    Fixed(usize),
    /// No restyling: aligned reference clips pass through unchanged.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig<S: Scalar> {
    pub num_segments: usize,
    pub transition_len: usize,
    pub sigma: S,
    pub plan_seed: u64,
    pub style_seed: u64,
    pub style_policy: StylePolicy,
}

impl<S: Scalar> Default for GenerationConfig<S> {
    fn default() -> Self {
        GenerationConfig {
            num_segments: 3,
            transition_len: 40,
            sigma: S::of(0.05),
            plan_seed: 7,
            style_seed: 11,
            style_policy: StylePolicy::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpanKind {
    /// One of the two requested endpoint states.
    Endpoint,
    /// Generated transition `index` (0 enters the first clip).
    Transition { index: usize },
    /// Style-transferred reference clip serving segment `segment`.
    Clip {
        segment: usize,
        clip_id: usize,
        style_id: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpan {
    pub kind: SpanKind,
    pub start_frame: usize,
    pub frames: usize,
}

#[derive(Debug)]
pub struct GenerationResult<S: Scalar> {
    pub sequence: MotionSequence<S>,
    pub spans: Vec<SegmentSpan>,
    pub plan: SubGoalPlan<S>,
    pub clip_ids: Vec<usize>,
    pub style_ids: Vec<Option<usize>>,
    /// Boundary state pair each transition was conditioned on; these frames
    /// appear exactly once in the output, owned by the neighbouring spans.
    pub junctions: Vec<(MotionState<S>, MotionState<S>)>,
    pub plan_seed: u64,
    pub style_seed: u64,
}

/// Facing direction of a state on the ground, read from the lateral axis
/// spanned by the two foot joints; `(1, 0)` when no feet are declared or the
/// feet coincide horizontally.
pub fn hip_facing<S: Scalar>(state: &MotionState<S>, topo: &SkeletonTopology<S>) -> [S; 2] {
    let Some((left, right)) = topo.feet() else {
        return [S::one(), S::zero()];
    };
    let l = state.positions[left];
    let r = state.positions[right];
    let lateral = [l[0] - r[0], l[2] - r[2]];
    let n = (lateral[0] * lateral[0] + lateral[1] * lateral[1]).sqrt();
    if n < S::of(1e-9) {
        return [S::one(), S::zero()];
    }
    // Quarter turn from the left-to-right lateral axis onto the forward axis.
    [lateral[1] / n, -lateral[0] / n]
}

/// Re-project every frame through forward kinematics so bone lengths hold
/// exactly. Collapsed bones borrow the direction from the previous frame, or
/// from `fallback` on the first frame.
pub fn project_to_skeleton<S: Scalar>(
    seq: &MotionSequence<S>,
    topo: &SkeletonTopology<S>,
    fallback: &MotionSequence<S>,
) -> Result<MotionSequence<S>, GeomError> {
    let eps = S::of(crate::geom::COLLAPSED_BONE_EPS);
    let mut prev: Option<DirectionFrame<S>> = None;
    let mut frames = Vec::with_capacity(seq.len());
    for (t, frame) in seq.frames.iter().enumerate() {
        let mut dirs = vec![[S::zero(); 3]; topo.rows()];
        for row in 0..topo.rows() {
            let child = topo.row_child(row);
            let parent = topo.parent_of(child).unwrap();
            let d = vec3::sub(frame.positions[child], frame.positions[parent]);
            let n = vec3::norm(d);
            dirs[row] = if n < eps {
                match &prev {
                    Some(p) => p.dirs[row],
                    None => direction_vectors(&fallback.frames[t.min(fallback.len() - 1)], topo)?
                        .dirs[row],
                }
            } else {
                vec3::scale(d, S::one() / n)
            };
        }
        let df = DirectionFrame {
            dirs,
            root_position: frame.positions[topo.root()],
        };
        frames.push(forward_kinematics(&df, topo));
        prev = Some(df);
    }
    MotionSequence::new(frames, seq.fps).map_err(|e| e)
}

fn horizontal<S: Scalar>(p: [S; 3]) -> [S; 2] {
    [p[0], p[2]]
}

fn root_vel<S: Scalar>(seq: &MotionSequence<S>, topo: &SkeletonTopology<S>, into: usize) -> [S; 2] {
    let root = topo.root();
    let a = seq.frames[into - 1].positions[root];
    let b = seq.frames[into].positions[root];
    [b[0] - a[0], b[2] - a[2]]
}

/// The full three-step synthesis: plan sub-goals, retrieve and restyle one
/// reference clip per segment, and connect everything with generated
/// transitions. Deterministic given the two seeds.
pub fn generate<S: Scalar>(
    cfg: &GenerationConfig<S>,
    start_state: &MotionState<S>,
    end_state: &MotionState<S>,
    database: &ClipDatabase<S>,
    models: &Models<S>,
) -> Result<GenerationResult<S>, PipelineError> {
    let topo = &database.topo;
    for joints in [models.short.joints, models.long.joints] {
        if joints != topo.joint_count() {
            return Err(PipelineError::CheckpointMismatch {
                expected: topo.joint_count(),
                got: joints,
            });
        }
    }
    let n = cfg.transition_len;
    let l = cfg.num_segments;
    let mut plan_rng = StdRng::seed_from_u64(cfg.plan_seed);
    let mut style_rng = StdRng::seed_from_u64(cfg.style_seed);

    let root = topo.root();
    let p_start = horizontal(start_state.positions[root]);
    let p_end = horizontal(end_state.positions[root]);
    let plan = sample_subgoals(p_start, p_end, l, &database.index, &mut plan_rng)?;
    let start_state = crate::geom::translate_state(
        start_state,
        [plan.start_offset[0], S::zero(), plan.start_offset[1]],
    );
    let end_state = crate::geom::translate_state(
        end_state,
        [plan.end_offset[0], S::zero(), plan.end_offset[1]],
    );

    // Retrieve, restyle, and re-project one clip per segment.
    let mut clip_ids = Vec::with_capacity(l);
    let mut style_ids = Vec::with_capacity(l);
    let mut pieces: Vec<MotionSequence<S>> = Vec::with_capacity(l);
    for seg in 0..l {
        let (clip_id, _) = match_clip_widening(
            plan.segment_dists[seg],
            &database.index,
            cfg.sigma,
            &mut plan_rng,
        )?;
        let aligned = align_clip(
            &database.clips[clip_id],
            clip_id,
            plan.points[seg],
            plan.headings[seg],
            topo,
        )?;
        let (styled, style_id) = match &cfg.style_policy {
            StylePolicy::Identity => (aligned.clip.seq.clone(), None),
            StylePolicy::Fixed(id) => (
                models
                    .short
                    .transfer_style(&aligned.clip, &database.clips[*id], topo)?
                    .seq,
                Some(*id),
            ),
            StylePolicy::Random => {
                let id = style_rng.random_range(0..database.clips.len());
                (
                    models
                        .short
                        .transfer_style(&aligned.clip, &database.clips[id], topo)?
                        .seq,
                    Some(id),
                )
            }
        };
        let projected = project_to_skeleton(&styled, topo, &aligned.clip.seq)?;
        clip_ids.push(clip_id);
        style_ids.push(style_id);
        pieces.push(projected);
    }

    // Boundary chain: endpoint state, clips, endpoint state; transitions
    // connect consecutive entries and own only their interior frames.
    let steps = S::from_usize(n - 1).unwrap();
    let facing_start = hip_facing(&start_state, topo);
    let facing_end = hip_facing(&end_state, topo);
    let mut transitions: Vec<MotionSequence<S>> = Vec::with_capacity(l + 1);
    let mut junctions: Vec<(MotionState<S>, MotionState<S>)> = Vec::with_capacity(l + 1);
    for junction in 0..=l {
        let (from_state, from_vel) = if junction == 0 {
            let gap = vec3::dist(
                start_state.positions[root],
                pieces[0].frames[0].positions[root],
            );
            (
                start_state.clone(),
                [facing_start[0] * gap / steps, facing_start[1] * gap / steps],
            )
        } else {
            let piece = &pieces[junction - 1];
            (
                piece.frames[piece.len() - 1].clone(),
                root_vel(piece, topo, piece.len() - 1),
            )
        };
        let (to_state, to_vel) = if junction == l {
            let gap = vec3::dist(
                from_state.positions[root],
                end_state.positions[root],
            );
            (
                end_state.clone(),
                [facing_end[0] * gap / steps, facing_end[1] * gap / steps],
            )
        } else {
            let piece = &pieces[junction];
            (piece.frames[0].clone(), root_vel(piece, topo, 1))
        };
        junctions.push((from_state.clone(), to_state.clone()));
        let boundary = TransitionBoundary {
            start_state: from_state,
            end_state: to_state,
            start_vel: from_vel,
            end_vel: to_vel,
            interior: None,
        };
        let seq = interpolate_with_boundary(&models.long, &boundary, n, topo)?;
        transitions.push(seq);
    }

    // Concatenate with provenance spans.
    let mut frames: Vec<MotionState<S>> = Vec::new();
    let mut spans = Vec::new();
    let mut push_span = |frames: &Vec<MotionState<S>>, kind: SpanKind, count: usize| {
        spans.push(SegmentSpan {
            kind,
            start_frame: frames.len(),
            frames: count,
        });
    };
    push_span(&frames, SpanKind::Endpoint, 1);
    frames.push(start_state.clone());
    for junction in 0..=l {
        let interior = &transitions[junction].frames[1..n - 1];
        push_span(&frames, SpanKind::Transition { index: junction }, interior.len());
        frames.extend_from_slice(interior);
        if junction < l {
            push_span(
                &frames,
                SpanKind::Clip {
                    segment: junction,
                    clip_id: clip_ids[junction],
                    style_id: style_ids[junction],
                },
                pieces[junction].len(),
            );
            frames.extend_from_slice(&pieces[junction].frames);
        }
    }
    push_span(&frames, SpanKind::Endpoint, 1);
    frames.push(end_state.clone());

    let sequence = MotionSequence::new(frames, models.long.fps)?;
    Ok(GenerationResult {
        sequence,
        spans,
        plan,
        clip_ids,
        style_ids,
        junctions,
        plan_seed: cfg.plan_seed,
        style_seed: cfg.style_seed,
    })
}

/// Expected output length of [`generate`]: the two endpoint states, `L`
/// clips, and `L + 1` transitions contributing interior frames only.
pub fn expected_length(l: usize, clip_len: usize, n: usize) -> usize {
    2 + l * clip_len + (l + 1) * (n - 2)
}

// ---------------------------------------------------------------------------
// Evaluation.
// ---------------------------------------------------------------------------

/// Vertical coordinate of the right foot per frame.
pub fn foot_height_curve<S: Scalar>(
    seq: &MotionSequence<S>,
    topo: &SkeletonTopology<S>,
) -> Vec<S> {
    let foot = topo.feet().map(|(_, r)| r).unwrap_or(topo.joint_count() - 1);
    seq.frames.iter().map(|f| f.positions[foot][1]).collect()
}

/// Largest frame-to-frame jump of a curve relative to its median jump;
/// smooth curves stay within a small factor.
pub fn max_over_median_jump<S: Scalar>(curve: &[S]) -> S {
    assert!(curve.len() >= 3);
    let mut jumps: Vec<S> = curve.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    jumps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = jumps[jumps.len() / 2];
    let max = jumps[jumps.len() - 1];
    max / median.max(S::of(1e-12))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<S: Scalar> {
    pub scalars: Vec<(String, S)>,
    pub curves: Vec<(String, Vec<S>)>,
}

pub struct EvalConfig<S: Scalar> {
    pub transition_len: usize,
    pub style_seed: u64,
    pub rotation_angles: Vec<S>,
    /// Cap on held-out windows fed to the MSE curve.
    pub max_windows: usize,
}

impl<S: Scalar> Default for EvalConfig<S> {
    fn default() -> Self {
        EvalConfig {
            transition_len: 40,
            style_seed: 11,
            rotation_angles: vec![S::zero(), S::FRAC_PI_4(), S::FRAC_PI_2()],
            max_windows: 16,
        }
    }
}

/// Metric sweep over a held-out clip set: style-transfer diversity, the
/// per-timestep transition MSE curve, and foot-height curves for rotated
/// endpoint pairs.
pub fn evaluate<S: Scalar>(
    models: &Models<S>,
    train_clips: &[MotionClip<S>],
    heldout: &[MotionClip<S>],
    topo: &SkeletonTopology<S>,
    cfg: &EvalConfig<S>,
) -> Result<MetricsReport<S>, PipelineError> {
    if heldout.is_empty() || train_clips.is_empty() {
        return Err(PipelineError::EmptyEval);
    }
    let n = cfg.transition_len;
    let mut scalars = Vec::new();
    let mut curves = Vec::new();
    scalars.push(("style_seed".to_string(), S::from_u64(cfg.style_seed).unwrap()));
    scalars.push(("transition_len".to_string(), S::from_usize(n).unwrap()));

    // Diversity: one held-out content clip restyled with several sources.
    let mut style_rng = StdRng::seed_from_u64(cfg.style_seed);
    let content = &heldout[0];
    let mut variants = Vec::new();
    for _ in 0..8.min(train_clips.len()) {
        let sid = style_rng.random_range(0..train_clips.len());
        variants.push(
            models
                .short
                .transfer_style(content, &train_clips[sid], topo)?,
        );
    }
    scalars.push(("diversity".to_string(), diversity(&variants)));

    // Transition MSE over held-out same-sequence windows.
    let mut windows = Vec::new();
    'outer: for clip in heldout {
        let frames = &clip.seq.frames;
        let mut start = 0;
        while start + n <= frames.len() {
            windows.push(TransitionBoundary::from_window(
                &frames[start..start + n],
                topo,
                models.long.fps,
            )?);
            start += n;
            if windows.len() >= cfg.max_windows {
                break 'outer;
            }
        }
    }
    if windows.is_empty() {
        return Err(PipelineError::EmptyEval);
    }
    let curve = interpolation_mse(&models.long, &windows, n, topo)?;
    scalars.push(("mse_windows".to_string(), S::from_usize(windows.len()).unwrap()));
    curves.push(("interpolation_mse".to_string(), curve));

    // Foot-height curves with the second endpoint rotated in place.
    let s1 = heldout[0].seq.frames[0].clone();
    let base = heldout[heldout.len() - 1].seq.frames[heldout[heldout.len() - 1].len() - 1].clone();
    let root = topo.root();
    for (k, &angle) in cfg.rotation_angles.iter().enumerate() {
        let pivot = [base.positions[root][0], base.positions[root][2]];
        let s2 = rotate_state_about_vertical(&base, angle, pivot);
        let seq = crate::longrange::interpolate(&models.long, &s1, &s2, n, topo)?;
        curves.push((format!("foot_height_rot{k}"), foot_height_curve(&seq, topo)));
        scalars.push((format!("rot{k}_angle"), angle));
    }
    Ok(MetricsReport { scalars, curves })
}

/// Plain-text report: `key value` lines, then one CSV block per curve.
pub fn format_report<S: Scalar>(report: &MetricsReport<S>) -> String {
    let mut out = String::new();
    for (k, v) in &report.scalars {
        out.push_str(&format!("{k} {v}\n"));
    }
    for (name, curve) in &report.curves {
        out.push_str(&format!("csv {name}\n"));
        out.push_str("index,value\n");
        for (i, v) in curve.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out.push_str("end\n");
    }
    out
}

pub fn parse_report<S: Scalar>(text: &str) -> Result<MetricsReport<S>, PipelineError> {
    let mut scalars = Vec::new();
    let mut curves = Vec::new();
    let mut lines = text.lines().enumerate();
    while let Some((ln, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| PipelineError::BadReport {
            line: ln + 1,
            message,
        };
        if let Some(name) = line.strip_prefix("csv ") {
            let mut curve = Vec::new();
            let mut saw_header = false;
            loop {
                let Some((ln2, raw2)) = lines.next() else {
                    return Err(bad(format!("csv block {name} is not closed")));
                };
                let l2 = raw2.trim();
                if l2 == "end" {
                    break;
                }
                if !saw_header {
                    if l2 != "index,value" {
                        return Err(PipelineError::BadReport {
                            line: ln2 + 1,
                            message: format!("expected csv header, got {l2:?}"),
                        });
                    }
                    saw_header = true;
                    continue;
                }
                let (_, v) = l2.split_once(',').ok_or_else(|| PipelineError::BadReport {
                    line: ln2 + 1,
                    message: "expected index,value".into(),
                })?;
                let v: S = v.parse().map_err(|_| PipelineError::BadReport {
                    line: ln2 + 1,
                    message: format!("bad value {v:?}"),
                })?;
                curve.push(v);
            }
            curves.push((name.to_string(), curve));
        } else {
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| bad("expected: key value".into()))?;
            let v: S = v
                .parse()
                .map_err(|_| bad(format!("bad value {v:?}")))?;
            scalars.push((k.to_string(), v));
        }
    }
    Ok(MetricsReport { scalars, curves })
}

// ---------------------------------------------------------------------------
// Export.
// ---------------------------------------------------------------------------

/// Write a generation result as a motion file plus an annotated per-frame
/// dump for external plotting. Exactly two files.
pub fn export_frames<S: Scalar>(
    result: &GenerationResult<S>,
    dir: &Path,
    stem: &str,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join(format!("{stem}.mseq")),
        format_motion(&result.sequence),
    )?;
    let mut dump = String::new();
    dump.push_str(&format!(
        "frames {} joints {}\n",
        result.sequence.len(),
        result.sequence.joint_count()
    ));
    for (i, span) in result.spans.iter().enumerate() {
        let kind = match &span.kind {
            SpanKind::Endpoint => "endpoint".to_string(),
            SpanKind::Transition { index } => format!("transition {index}"),
            SpanKind::Clip {
                segment,
                clip_id,
                style_id,
            } => format!(
                "clip {segment} source {clip_id} style {}",
                style_id.map_or("none".to_string(), |s| s.to_string())
            ),
        };
        dump.push_str(&format!(
            "span {i} start {} len {} {kind}\n",
            span.start_frame, span.frames
        ));
    }
    for (t, frame) in result.sequence.frames.iter().enumerate() {
        dump.push_str(&format!("frame {t}"));
        for p in &frame.positions {
            for c in p {
                dump.push_str(&format!(" {c}"));
            }
        }
        dump.push('\n');
    }
    std::fs::write(dir.join(format!("{stem}.frames.txt")), dump)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_dataset, window_clips, SynthSpec};
    use crate::longrange::TransitionConfig;
    use crate::nn::AdamConfig;
    use crate::shortrange::ShortRangeConfig;

    fn tiny_world(
        clip_len: usize,
        n: usize,
    ) -> (ClipDatabase<f64>, Models<f64>, MotionState<f64>, MotionState<f64>) {
        let (topo, seqs) = synth_dataset::<f64>(SynthSpec {
            walkers: 6,
            frames: clip_len + 20,
            styles: 2,
            seed: 21,
        });
        let seqs: Vec<MotionSequence<f64>> = seqs.into_iter().map(|(_, s)| s).collect();
        let start = seqs[0].frames[0].clone();
        let end = seqs[1].frames[seqs[1].len() - 1].clone();
        let clips = window_clips(&seqs, &topo, clip_len, clip_len).unwrap().clips;
        let db = ClipDatabase::new(topo.clone(), clips).unwrap();
        let mut rng = StdRng::seed_from_u64(22);
        let mut short = ShortRangeModel::new(
            ShortRangeConfig::tiny(clip_len),
            topo.joint_count(),
            30.0,
            &mut rng,
        );
        // Normalization must exist before transfer; fit on the database.
        let mats: Vec<crate::nn::Tensor<f64>> = db
            .clips
            .iter()
            .map(|c| crate::shortrange::clip_channels(c, &topo))
            .collect();
        short.norm = crate::shortrange::Normalization::fit(&mats);
        let long = TransitionModel::new(
            TransitionConfig::tiny(n),
            topo.joint_count(),
            30.0,
            &mut rng,
        );
        (db, Models { short, long }, start, end)
    }

    #[test]
    fn generate_has_exact_arithmetic_and_shared_junction_frames() {
        let (db, models, start, end) = tiny_world(24, 8);
        let cfg = GenerationConfig {
            num_segments: 1,
            transition_len: 8,
            style_policy: StylePolicy::Identity,
            ..GenerationConfig::default()
        };
        let result = generate(&cfg, &start, &end, &db, &models).unwrap();
        assert_eq!(result.sequence.len(), expected_length(1, 24, 8));
        assert_eq!(result.sequence.len(), 2 + 24 + 2 * 6);

        // Junction frames appear exactly once and match both neighbours:
        // transitions own interior frames only, so the clip spans
        // carry the junction frames themselves.
        let clip_span = result
            .spans
            .iter()
            .find(|s| matches!(s.kind, SpanKind::Clip { .. }))
            .unwrap();
        assert_eq!(result.clip_ids.len(), 1);
        assert!(clip_span.frames == 24);
        // Spans tile the sequence exactly.
        let mut cursor = 0;
        for span in &result.spans {
            assert_eq!(span.start_frame, cursor);
            cursor += span.frames;
        }
        assert_eq!(cursor, result.sequence.len());
        // First and last frames are the (offset-adjusted) endpoint states.
        let first = &result.sequence.frames[0];
        let offset = result.plan.start_offset;
        for (a, b) in first.positions.iter().zip(&start.positions) {
            assert!((a[0] - (b[0] + offset[0])).abs() < 1e-12);
            assert!((a[1] - b[1]).abs() < 1e-12);
            assert!((a[2] - (b[2] + offset[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn generate_is_bone_consistent_and_byte_deterministic() {
        let (db, models, start, end) = tiny_world(24, 8);
        let cfg = GenerationConfig {
            num_segments: 2,
            transition_len: 8,
            style_policy: StylePolicy::Random,
            ..GenerationConfig::default()
        };
        let a = generate(&cfg, &start, &end, &db, &models).unwrap();
        for f in &a.sequence.frames {
            assert!(f.max_bone_deviation(&db.topo) < 1e-9);
        }
        let b = generate(&cfg, &start, &end, &db, &models).unwrap();
        assert_eq!(format_motion(&a.sequence), format_motion(&b.sequence));
        assert_eq!(a.clip_ids, b.clip_ids);
        assert_eq!(a.style_ids, b.style_ids);

        let other = generate(
            &GenerationConfig {
                style_seed: 99,
                ..cfg
            },
            &start,
            &end,
            &db,
            &models,
        )
        .unwrap();
        // Different style seed, same plan.
        assert_eq!(other.clip_ids, a.clip_ids);
    }

    #[test]
    fn generate_rejects_mismatched_models() {
        let (db, mut models, start, end) = tiny_world(24, 8);
        let mut rng = StdRng::seed_from_u64(23);
        models.long = TransitionModel::new(TransitionConfig::tiny(8), 5, 30.0, &mut rng);
        let err = generate(
            &GenerationConfig {
                num_segments: 1,
                transition_len: 8,
                ..GenerationConfig::default()
            },
            &start,
            &end,
            &db,
            &models,
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::CheckpointMismatch { .. }));
    }

    #[test]
    fn hip_facing_tracks_the_walker_heading() {
        for heading in [0.0f64, 0.9, -2.3] {
            let seq = crate::dataset::synth_walker::<f64>(
                crate::dataset::WalkerParams {
                    heading,
                    ..crate::dataset::WalkerParams::steady(1.0, 1.8, 0.4)
                },
                crate::dataset::StyleParams::default(),
                4,
                30.0,
            );
            let topo = crate::dataset::synth_skeleton::<f64>();
            let f = hip_facing(&seq.frames[0], &topo);
            let want = [heading.cos(), heading.sin()];
            let dot = f[0] * want[0] + f[1] * want[1];
            assert!(dot > 0.95, "facing {f:?} vs heading {want:?}");
        }
    }

    #[test]
    fn projection_fixes_bone_lengths() {
        let (db, _, _, _) = tiny_world(24, 8);
        let mut broken = db.clips[0].seq.clone();
        for f in &mut broken.frames {
            for p in &mut f.positions {
                p[0] *= 1.1;
            }
        }
        let fixed = project_to_skeleton(&broken, &db.topo, &db.clips[0].seq).unwrap();
        for f in &fixed.frames {
            assert!(f.max_bone_deviation(&db.topo) < 1e-9);
        }
    }

    #[test]
    fn evaluate_produces_a_round_trippable_report() {
        let (db, models, _, _) = tiny_world(24, 8);
        let (train, heldout) = db.clips.split_at(db.clips.len() - 3);
        let report = evaluate(
            &models,
            train,
            heldout,
            &db.topo,
            &EvalConfig {
                transition_len: 8,
                max_windows: 4,
                ..EvalConfig::default()
            },
        )
        .unwrap();
        assert!(report.scalars.iter().any(|(k, _)| k == "diversity"));
        let mse = report
            .curves
            .iter()
            .find(|(k, _)| k == "interpolation_mse")
            .unwrap();
        assert_eq!(mse.1.len(), 6);
        assert_eq!(
            report
                .curves
                .iter()
                .filter(|(k, _)| k.starts_with("foot_height_rot"))
                .count(),
            3
        );
        let text = format_report(&report);
        let parsed: MetricsReport<f64> = parse_report(&text).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(format_report(&parsed), text);
    }

    #[test]
    fn evaluate_rejects_empty_sets() {
        let (db, models, _, _) = tiny_world(24, 8);
        let err = evaluate(
            &models,
            &db.clips,
            &[],
            &db.topo,
            &EvalConfig {
                transition_len: 8,
                ..EvalConfig::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::EmptyEval));
    }

    #[test]
    fn export_writes_two_files_that_reimport() {
        let (db, models, start, end) = tiny_world(24, 8);
        let cfg = GenerationConfig {
            num_segments: 1,
            transition_len: 8,
            style_policy: StylePolicy::Identity,
            ..GenerationConfig::default()
        };
        let result = generate(&cfg, &start, &end, &db, &models).unwrap();
        let dir = std::env::temp_dir().join(format!("stylemotion_exp_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        export_frames(&result, &dir, "generated").unwrap();
        let entries: Vec<_> = std::fs::read_dir(&dir).unwrap().collect();
        assert_eq!(entries.len(), 2);
        let text = std::fs::read_to_string(dir.join("generated.mseq")).unwrap();
        let parsed: MotionSequence<f64> = crate::geom::parse_motion(&text).unwrap();
        assert_eq!(parsed, result.sequence);
        let dump = std::fs::read_to_string(dir.join("generated.frames.txt")).unwrap();
        for span in &result.spans {
            assert!(dump.contains(&format!("start {} len {}", span.start_frame, span.frames)));
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn training_smoke_for_desk_scale_defaults() {
        // A one-epoch sweep through both trainers on the tiny world keeps
        // the pipeline wiring honest end to end.
        let (db, mut models, start, end) = tiny_world(24, 8);
        let split = crate::dataset::DatasetSplit {
            train: db.clips.clone(),
            heldout: Vec::new(),
            seed: 0,
        };
        let mut rng = StdRng::seed_from_u64(24);
        crate::shortrange::train(
            &mut models.short,
            &split,
            &db.topo,
            1,
            &AdamConfig::default(),
            &mut rng,
        )
        .unwrap();
        crate::longrange::train(
            &mut models.long,
            &split,
            &db.topo,
            1,
            &AdamConfig::default(),
            &mut rng,
        )
        .unwrap();
        let cfg = GenerationConfig {
            num_segments: 1,
            transition_len: 8,
            ..GenerationConfig::default()
        };
        let result = generate(&cfg, &start, &end, &db, &models).unwrap();
        assert_eq!(result.sequence.len(), expected_length(1, 24, 8));
    }
}
