//! Data ingestion: directory loading, clip windowing, the moving-route
//! control signal, train/held-out splitting, and a deterministic synthetic
//! walker generator for desk-scale training.

use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::geom::{
    forward_kinematics, format_motion, format_skeleton, parse_motion, parse_skeleton,
    DirectionFrame, FormatError, MotionSequence, SkeletonTopology,
};
use crate::scalar::{vec3, Scalar};

/// Width of the per-frame moving-route control signal: root horizontal
/// position and velocity (2+2), two foot positions (3+3) and velocities (3+3).
pub const ROUTE_DIM: usize = 16;

pub const ROUTE_ROOT_POS: usize = 0;
pub const ROUTE_ROOT_VEL: usize = 2;
pub const ROUTE_FOOT_L: usize = 4;
pub const ROUTE_FOOT_R: usize = 7;
pub const ROUTE_FOOT_L_VEL: usize = 10;
pub const ROUTE_FOOT_R_VEL: usize = 13;

/// Default clip length in frames.
pub const CLIP_LEN: usize = 120;

/// Default windowing stride (half-overlapping clips).
pub const CLIP_STRIDE: usize = 60;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: {inner}")]
    Parse { file: PathBuf, inner: FormatError },
    #[error("{file}: sequence has {got} joints, dataset uses {expected}")]
    SkeletonMismatch {
        file: PathBuf,
        expected: usize,
        got: usize,
    },
    #[error("skeleton declares no foot joints; add a `feet L R` line")]
    FootJointsUndeclared,
    #[error("missing skeleton file {0}")]
    MissingSkeleton(PathBuf),
    #[error("synthetic spec: {0}")]
    BadSynthSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One fixed-length training clip: frames, control signal, and the
/// horizontal distance its root travels first frame to last.
///
/// Route conventions: the root position channels are relative to the clip's
/// first frame; foot positions are relative to the same frame's root
/// horizontal position; every velocity channel is the backward difference of
/// the stored positions, zero at the first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip<S: Scalar> {
    pub seq: MotionSequence<S>,
    pub route: Vec<[S; ROUTE_DIM]>,
    pub travel_distance: S,
}

impl<S: Scalar> MotionClip<S> {
    pub fn from_sequence(seq: MotionSequence<S>, topo: &SkeletonTopology<S>) -> Result<Self, DataError> {
        let route = extract_route(&seq, topo)?;
        let travel_distance = travel_distance(&seq, topo);
        Ok(MotionClip {
            seq,
            route,
            travel_distance,
        })
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }
}

/// Horizontal root displacement between the first and last frames.
pub fn travel_distance<S: Scalar>(seq: &MotionSequence<S>, topo: &SkeletonTopology<S>) -> S {
    let root = topo.root();
    let a = seq.frames[0].positions[root];
    let b = seq.frames[seq.len() - 1].positions[root];
    let dx = b[0] - a[0];
    let dz = b[2] - a[2];
    (dx * dx + dz * dz).sqrt()
}

/// Moving-route control signal of a sequence. Requires declared foot joints.
pub fn extract_route<S: Scalar>(
    seq: &MotionSequence<S>,
    topo: &SkeletonTopology<S>,
) -> Result<Vec<[S; ROUTE_DIM]>, DataError> {
    let (left, right) = topo.feet().ok_or(DataError::FootJointsUndeclared)?;
    let root = topo.root();
    let origin = seq.frames[0].positions[root];
    let mut route = Vec::with_capacity(seq.len());
    for (t, frame) in seq.frames.iter().enumerate() {
        let rp = frame.positions[root];
        let rel_root = [rp[0] - origin[0], rp[2] - origin[2]];
        let foot = |j: usize| {
            let p = frame.positions[j];
            [p[0] - rp[0], p[1], p[2] - rp[2]]
        };
        let (fl, fr) = (foot(left), foot(right));
        let mut row = [S::zero(); ROUTE_DIM];
        row[ROUTE_ROOT_POS] = rel_root[0];
        row[ROUTE_ROOT_POS + 1] = rel_root[1];
        for c in 0..3 {
            row[ROUTE_FOOT_L + c] = fl[c];
            row[ROUTE_FOOT_R + c] = fr[c];
        }
        if t > 0 {
            let prev: [S; ROUTE_DIM] = route[t - 1];
            row[ROUTE_ROOT_VEL] = row[ROUTE_ROOT_POS] - prev[ROUTE_ROOT_POS];
            row[ROUTE_ROOT_VEL + 1] = row[ROUTE_ROOT_POS + 1] - prev[ROUTE_ROOT_POS + 1];
            for c in 0..3 {
                row[ROUTE_FOOT_L_VEL + c] = row[ROUTE_FOOT_L + c] - prev[ROUTE_FOOT_L + c];
                row[ROUTE_FOOT_R_VEL + c] = row[ROUTE_FOOT_R + c] - prev[ROUTE_FOOT_R + c];
            }
        }
        route.push(row);
    }
    Ok(route)
}

/// Result of sliding-window clipping; sequences shorter than the window are
/// counted rather than failing the whole ingest.
#[derive(Debug)]
pub struct WindowedClips<S: Scalar> {
    pub clips: Vec<MotionClip<S>>,
    pub skipped: usize,
}

pub fn window_clips<S: Scalar>(
    seqs: &[MotionSequence<S>],
    topo: &SkeletonTopology<S>,
    clip_len: usize,
    stride: usize,
) -> Result<WindowedClips<S>, DataError> {
    assert!(clip_len >= 2, "clips need at least two frames");
    assert!(stride >= 1);
    let mut clips = Vec::new();
    let mut skipped = 0;
    for seq in seqs {
        if seq.len() < clip_len {
            skipped += 1;
            continue;
        }
        let mut start = 0;
        while start + clip_len <= seq.len() {
            let frames = seq.frames[start..start + clip_len].to_vec();
            let window = MotionSequence::new(frames, seq.fps).expect("window shares J");
            clips.push(MotionClip::from_sequence(window, topo)?);
            start += stride;
        }
    }
    Ok(WindowedClips { clips, skipped })
}

/// Train / held-out partition of a clip set.
#[derive(Debug)]
pub struct DatasetSplit<S: Scalar> {
    pub train: Vec<MotionClip<S>>,
    pub heldout: Vec<MotionClip<S>>,
    pub seed: u64,
}

/// Deterministic split: `floor(heldout_fraction * n)` clips are held out,
/// chosen by a seeded shuffle; original order is preserved inside each side.
pub fn split<S: Scalar>(
    clips: Vec<MotionClip<S>>,
    heldout_fraction: f64,
    seed: u64,
) -> DatasetSplit<S> {
    let n = clips.len();
    let take = (heldout_fraction * n as f64).floor() as usize;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    // Fisher-Yates so the index stream depends only on the seed.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut heldout_idx: Vec<usize> = order[..take].to_vec();
    heldout_idx.sort_unstable();
    let mut heldout_mark = vec![false; n];
    for &i in &heldout_idx {
        heldout_mark[i] = true;
    }
    let mut train = Vec::with_capacity(n - take);
    let mut heldout = Vec::with_capacity(take);
    for (i, clip) in clips.into_iter().enumerate() {
        if heldout_mark[i] {
            heldout.push(clip);
        } else {
            train.push(clip);
        }
    }
    DatasetSplit { train, heldout, seed }
}

// ---------------------------------------------------------------------------
// Directory layout: `<dir>/skeleton.skel` plus any number of `*.mseq` files.
// ---------------------------------------------------------------------------

pub fn load_skeleton<S: Scalar>(dir: &Path) -> Result<SkeletonTopology<S>, DataError> {
    let path = dir.join("skeleton.skel");
    if !path.exists() {
        return Err(DataError::MissingSkeleton(path));
    }
    let text = std::fs::read_to_string(&path)?;
    parse_skeleton(&text).map_err(|inner| DataError::Parse { file: path, inner })
}

/// Every `*.mseq` under `dir`, sorted by file name. All sequences must agree
/// on the joint count; an empty directory is an empty list.
pub fn load_sequences<S: Scalar>(dir: &Path) -> Result<Vec<(String, MotionSequence<S>)>, DataError> {
    let mut files: Vec<PathBuf> = Vec::new();
    if dir.exists() {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "mseq") {
                files.push(path);
            }
        }
    }
    files.sort();
    let mut out: Vec<(String, MotionSequence<S>)> = Vec::with_capacity(files.len());
    for path in files {
        let text = std::fs::read_to_string(&path)?;
        let seq = parse_motion(&text).map_err(|inner| DataError::Parse {
            file: path.clone(),
            inner,
        })?;
        if let Some((_, first)) = out.first() {
            if seq.joint_count() != first.joint_count() {
                return Err(DataError::SkeletonMismatch {
                    file: path,
                    expected: first.joint_count(),
                    got: seq.joint_count(),
                });
            }
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.push((name, seq));
    }
    Ok(out)
}

pub fn save_dataset<S: Scalar>(
    dir: &Path,
    topo: &SkeletonTopology<S>,
    seqs: &[(String, MotionSequence<S>)],
) -> Result<(), DataError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("skeleton.skel"), format_skeleton(topo))?;
    for (name, seq) in seqs {
        std::fs::write(dir.join(format!("{name}.mseq")), format_motion(seq))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic walkers.
//
// Deterministic parametric figures: sinusoidal limb swing (content: speed,
// frequency, amplitude, turn rate, phase) plus constant posture offsets
// (style: torso lean, arm lift, head tilt) on straight or arced root paths.
// Every frame is produced by forward kinematics over unit bone directions,
// so bone lengths hold exactly.
// ---------------------------------------------------------------------------

/// Joint indices of the synthetic skeleton.
pub mod synth_joints {
    pub const ROOT: usize = 0;
    pub const CHEST: usize = 1;
    pub const HEAD: usize = 2;
    pub const HAND_L: usize = 3;
    pub const HAND_R: usize = 4;
    pub const KNEE_L: usize = 5;
    pub const KNEE_R: usize = 6;
    pub const FOOT_L: usize = 7;
    pub const FOOT_R: usize = 8;
}

/// Nine-joint biped used by the synthetic generator.
pub fn synth_skeleton<S: Scalar>() -> SkeletonTopology<S> {
    use synth_joints::*;
    let mut parent = vec![None; 9];
    parent[CHEST] = Some(ROOT);
    parent[HEAD] = Some(CHEST);
    parent[HAND_L] = Some(CHEST);
    parent[HAND_R] = Some(CHEST);
    parent[KNEE_L] = Some(ROOT);
    parent[KNEE_R] = Some(ROOT);
    parent[FOOT_L] = Some(KNEE_L);
    parent[FOOT_R] = Some(KNEE_R);
    let mut bone = vec![S::zero(); 9];
    bone[CHEST] = S::of(0.5);
    bone[HEAD] = S::of(0.25);
    bone[HAND_L] = S::of(0.55);
    bone[HAND_R] = S::of(0.55);
    bone[KNEE_L] = S::of(0.45);
    bone[KNEE_R] = S::of(0.45);
    bone[FOOT_L] = S::of(0.45);
    bone[FOOT_R] = S::of(0.45);
    SkeletonTopology::new(parent, bone)
        .expect("synthetic skeleton is well formed")
        .with_feet(FOOT_L, FOOT_R)
        .expect("synthetic feet exist")
}

/// Content of a synthetic walker: what it does each frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkerParams {
    /// Forward speed, m/s.
    pub speed: f64,
    /// Gait frequency, Hz.
    pub frequency: f64,
    /// Limb swing amplitude, radians. Zero freezes the pose.
    pub amplitude: f64,
    /// Heading change, rad/s; zero walks straight.
    pub turn_rate: f64,
    /// Gait phase offset, radians.
    pub phase: f64,
    /// Initial heading angle on the ground, radians.
    pub heading: f64,
    /// Gait-locked speed pulsing, fraction of `speed`; zero means constant
    /// velocity.
    pub speed_sway: f64,
    /// Gait-locked vertical root bob, meters.
    pub root_bob: f64,
}

impl WalkerParams {
    /// Constant-velocity walker with no gait-locked modulation.
    pub fn steady(speed: f64, frequency: f64, amplitude: f64) -> Self {
        WalkerParams {
            speed,
            frequency,
            amplitude,
            turn_rate: 0.0,
            phase: 0.0,
            heading: 0.0,
            speed_sway: 0.0,
            root_bob: 0.0,
        }
    }
}

/// Style of a synthetic walker: constant posture offsets.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StyleParams {
    pub lean: f64,
    pub arm_lift: f64,
    pub head_tilt: f64,
}

/// Fixed style table indexed by style id. Offsets are deliberately strong
/// so posture differences are measurable at desk scale.
pub fn style_table(style: usize) -> StyleParams {
    let s = style as f64;
    StyleParams {
        lean: 0.22 * s,
        arm_lift: 0.7 * s,
        head_tilt: 0.12 * s,
    }
}

const LEG_SPLAY: f64 = 0.18;
const ROOT_HEIGHT: f64 = 0.88;

/// One synthetic walking sequence. The root track depends only on the
/// content parameters, never on style.
pub fn synth_walker<S: Scalar>(
    content: WalkerParams,
    style: StyleParams,
    frames: usize,
    fps: f64,
) -> MotionSequence<S> {
    use synth_joints::*;
    let topo = synth_skeleton::<S>();
    let dt = 1.0 / fps;
    let mut states = Vec::with_capacity(frames);
    let mut pos = [0.0f64, 0.0];
    for t in 0..frames {
        let time = t as f64 * dt;
        let heading = content.heading + content.turn_rate * time;
        let fwd = [heading.cos(), 0.0, heading.sin()];
        let lat = [-heading.sin(), 0.0, heading.cos()];
        let up = [0.0, 1.0, 0.0];
        let theta = 2.0 * std::f64::consts::PI * content.frequency * time + content.phase;
        // Both feet push once per gait cycle: speed and root height pulse at
        // twice the swing frequency.
        let pulse = (2.0 * theta).sin();
        let root_y = ROOT_HEIGHT + content.root_bob * (2.0 * theta).cos();
        let swing_l = content.amplitude * theta.sin();
        let swing_r = content.amplitude * (theta + std::f64::consts::PI).sin();

        let limb = |swing: f64, splay: f64| -> [f64; 3] {
            let v = [
                swing.sin() * fwd[0] + splay * lat[0],
                -swing.cos(),
                swing.sin() * fwd[2] + splay * lat[2],
            ];
            vec3::normalize(v)
        };
        let arm = |swing: f64, side: f64| -> [f64; 3] {
            let lift = style.arm_lift;
            let v = [
                swing.sin() * fwd[0] * lift.cos() + side * (lift.sin() + 0.1) * lat[0],
                -swing.cos() * lift.cos(),
                swing.sin() * fwd[2] * lift.cos() + side * (lift.sin() + 0.1) * lat[2],
            ];
            vec3::normalize(v)
        };

        let mut dirs = vec![[0.0f64; 3]; topo.rows()];
        let mut set = |joint: usize, d: [f64; 3]| {
            dirs[topo.row_of(joint).unwrap()] = d;
        };
        set(
            CHEST,
            vec3::normalize([
                up[0] + style.lean * fwd[0],
                up[1],
                up[2] + style.lean * fwd[2],
            ]),
        );
        set(
            HEAD,
            vec3::normalize([
                up[0] + style.head_tilt * fwd[0],
                up[1],
                up[2] + style.head_tilt * fwd[2],
            ]),
        );
        set(HAND_L, arm(-swing_l * 0.8, 1.0));
        set(HAND_R, arm(-swing_r * 0.8, -1.0));
        set(KNEE_L, limb(swing_l, LEG_SPLAY));
        set(KNEE_R, limb(swing_r, -LEG_SPLAY));
        set(FOOT_L, limb(swing_l * 0.6 - 0.1, LEG_SPLAY));
        set(FOOT_R, limb(swing_r * 0.6 - 0.1, -LEG_SPLAY));

        let frame = DirectionFrame {
            dirs: dirs
                .into_iter()
                .map(|d| [S::of(d[0]), S::of(d[1]), S::of(d[2])])
                .collect(),
            root_position: [S::of(pos[0]), S::of(root_y), S::of(pos[1])],
        };
        states.push(forward_kinematics(&frame, &topo));

        let step = content.speed * (1.0 + content.speed_sway * pulse) * dt;
        pos[0] += step * fwd[0];
        pos[1] += step * fwd[2];
    }
    MotionSequence::new(states, S::of(fps)).expect("walker frames share J")
}

/// Parameters of a synthetic dataset: `walkers K frames T styles S seed X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub walkers: usize,
    pub frames: usize,
    pub styles: usize,
    pub seed: u64,
}

pub fn parse_synth_spec(text: &str) -> Result<SynthSpec, DataError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() % 2 != 0 {
        return Err(DataError::BadSynthSpec("expected key value pairs".into()));
    }
    let mut spec = SynthSpec {
        walkers: 8,
        frames: 300,
        styles: 2,
        seed: 7,
    };
    for pair in toks.chunks(2) {
        let parse = |what: &str| {
            pair[1]
                .parse::<u64>()
                .map_err(|_| DataError::BadSynthSpec(format!("bad {what}: {:?}", pair[1])))
        };
        match pair[0] {
            "walkers" => spec.walkers = parse("walkers")? as usize,
            "frames" => spec.frames = parse("frames")? as usize,
            "styles" => spec.styles = parse("styles")? as usize,
            "seed" => spec.seed = parse("seed")?,
            other => {
                return Err(DataError::BadSynthSpec(format!("unknown key {other:?}")));
            }
        }
    }
    Ok(spec)
}

/// Deterministic synthetic dataset: `walkers x styles` sequences, walker
/// content drawn from the seed, styles from the fixed table.
pub fn synth_dataset<S: Scalar>(
    spec: SynthSpec,
) -> (SkeletonTopology<S>, Vec<(String, MotionSequence<S>)>) {
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let mut seqs = Vec::with_capacity(spec.walkers * spec.styles);
    for w in 0..spec.walkers {
        let content = WalkerParams {
            speed: rng.random_range(0.6..1.3),
            frequency: rng.random_range(1.4..2.2),
            amplitude: rng.random_range(0.35..0.6),
            turn_rate: rng.random_range(-0.25..0.25),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            heading: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            speed_sway: rng.random_range(0.08..0.16),
            root_bob: rng.random_range(0.02..0.035),
        };
        for s in 0..spec.styles {
            let seq = synth_walker::<S>(content, style_table(s), spec.frames, 30.0);
            seqs.push((format!("walker{w:02}_style{s}"), seq));
        }
    }
    (synth_skeleton(), seqs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::MotionState;

    fn straight_walker(speed: f64, amplitude: f64, frames: usize) -> MotionSequence<f64> {
        synth_walker(
            WalkerParams {
                phase: 0.3,
                ..WalkerParams::steady(speed, 1.8, amplitude)
            },
            style_table(0),
            frames,
            30.0,
        )
    }

    #[test]
    fn walker_is_bone_consistent_every_frame() {
        let topo = synth_skeleton::<f64>();
        let seq = synth_walker(
            WalkerParams {
                turn_rate: 0.2,
                heading: 0.7,
                speed_sway: 0.1,
                root_bob: 0.02,
                ..WalkerParams::steady(1.1, 2.0, 0.5)
            },
            style_table(1),
            90,
            30.0,
        );
        for f in &seq.frames {
            assert!(f.max_bone_deviation(&topo) < 1e-9);
        }
    }

    #[test]
    fn zero_amplitude_walker_translates_rigidly() {
        let topo = synth_skeleton::<f64>();
        let seq = straight_walker(1.0, 0.0, 40);
        let first = crate::geom::direction_vectors(&seq.frames[0], &topo).unwrap();
        for f in &seq.frames {
            let df = crate::geom::direction_vectors(f, &topo).unwrap();
            for (a, b) in df.dirs.iter().zip(&first.dirs) {
                for c in 0..3 {
                    assert!((a[c] - b[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn styles_share_the_root_track() {
        let content = WalkerParams {
            turn_rate: 0.15,
            phase: 1.1,
            heading: -0.4,
            speed_sway: 0.09,
            root_bob: 0.015,
            ..WalkerParams::steady(0.9, 1.7, 0.45)
        };
        let a = synth_walker::<f64>(content, style_table(0), 50, 30.0);
        let b = synth_walker::<f64>(content, style_table(1), 50, 30.0);
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.positions[synth_joints::ROOT], fb.positions[synth_joints::ROOT]);
        }
    }

    #[test]
    fn straight_unit_speed_clip_travels_119_thirtieths() {
        let topo = synth_skeleton::<f64>();
        let seq = straight_walker(1.0, 0.5, CLIP_LEN);
        let windowed = window_clips(&[seq], &topo, CLIP_LEN, CLIP_STRIDE).unwrap();
        assert_eq!(windowed.clips.len(), 1);
        let want = 119.0 / 30.0;
        assert!((windowed.clips[0].travel_distance - want).abs() < 1e-9);
    }

    #[test]
    fn window_counts_and_skips() {
        let topo = synth_skeleton::<f64>();
        let s120 = straight_walker(1.0, 0.4, 120);
        let s180 = straight_walker(1.0, 0.4, 180);
        let s50 = straight_walker(1.0, 0.4, 50);
        let w = window_clips(&[s120.clone()], &topo, 120, 60).unwrap();
        assert_eq!((w.clips.len(), w.skipped), (1, 0));
        let w = window_clips(&[s180], &topo, 120, 60).unwrap();
        assert_eq!((w.clips.len(), w.skipped), (2, 0));
        let w = window_clips(&[s120, s50], &topo, 120, 60).unwrap();
        assert_eq!((w.clips.len(), w.skipped), (1, 1));
    }

    #[test]
    fn route_of_stationary_pose_has_zero_velocities() {
        let topo = synth_skeleton::<f64>();
        let pose = straight_walker(0.0, 0.0, 10);
        let route = extract_route(&pose, &topo).unwrap();
        for row in &route {
            for c in 0..ROUTE_DIM {
                if c >= ROUTE_ROOT_VEL && c < ROUTE_FOOT_L {
                    assert_eq!(row[c], 0.0);
                }
                if c >= ROUTE_FOOT_L_VEL {
                    assert_eq!(row[c], 0.0);
                }
            }
        }
    }

    #[test]
    fn uniform_translation_gives_constant_root_velocity() {
        let topo = synth_skeleton::<f64>();
        let seq = straight_walker(1.2, 0.0, 30);
        let route = extract_route(&seq, &topo).unwrap();
        let want = 1.2 / 30.0;
        for row in route.iter().skip(1) {
            let v = (row[ROUTE_ROOT_VEL].powi(2) + row[ROUTE_ROOT_VEL + 1].powi(2)).sqrt();
            assert!((v - want).abs() < 1e-9);
        }
        assert_eq!(route[0][ROUTE_ROOT_VEL], 0.0);
    }

    #[test]
    fn velocities_match_a_finite_difference_oracle() {
        let topo = synth_skeleton::<f64>();
        let seq = synth_walker::<f64>(
            WalkerParams {
                turn_rate: -0.2,
                heading: 0.2,
                speed_sway: 0.12,
                root_bob: 0.02,
                ..WalkerParams::steady(1.0, 2.1, 0.55)
            },
            style_table(1),
            40,
            30.0,
        );
        let route = extract_route(&seq, &topo).unwrap();
        for t in 1..route.len() {
            for (pos_c, vel_c) in [
                (ROUTE_ROOT_POS, ROUTE_ROOT_VEL),
                (ROUTE_ROOT_POS + 1, ROUTE_ROOT_VEL + 1),
            ] {
                let fd = route[t][pos_c] - route[t - 1][pos_c];
                assert!((route[t][vel_c] - fd).abs() < 1e-9);
            }
            for c in 0..3 {
                let fd = route[t][ROUTE_FOOT_L + c] - route[t - 1][ROUTE_FOOT_L + c];
                assert!((route[t][ROUTE_FOOT_L_VEL + c] - fd).abs() < 1e-9);
                let fd = route[t][ROUTE_FOOT_R + c] - route[t - 1][ROUTE_FOOT_R + c];
                assert!((route[t][ROUTE_FOOT_R_VEL + c] - fd).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn route_requires_declared_feet() {
        let bare = SkeletonTopology::<f64>::new(vec![None, Some(0)], vec![0.0, 1.0]).unwrap();
        let state = MotionState::new(vec![[0.0; 3], [0.0, 1.0, 0.0]]);
        let seq = MotionSequence::new(vec![state], 30.0).unwrap();
        assert!(matches!(
            extract_route(&seq, &bare),
            Err(DataError::FootJointsUndeclared)
        ));
    }

    fn toy_clips(n: usize) -> Vec<MotionClip<f64>> {
        let topo = synth_skeleton::<f64>();
        (0..n)
            .map(|i| {
                let seq = straight_walker(0.6 + 0.05 * i as f64, 0.4, 12);
                MotionClip::from_sequence(seq, &topo).unwrap()
            })
            .collect()
    }

    #[test]
    fn split_examples() {
        let clips = toy_clips(10);
        let all_train = split(clips.clone(), 0.0, 5);
        assert_eq!(all_train.train.len(), 10);
        assert!(all_train.heldout.is_empty());

        let a = split(clips.clone(), 0.25, 9);
        let b = split(clips.clone(), 0.25, 9);
        assert_eq!(a.heldout.len(), 2); // floor(0.25 * 10)
        assert_eq!(a.train.len(), 8);
        assert_eq!(
            a.heldout.iter().map(|c| c.travel_distance).collect::<Vec<_>>(),
            b.heldout.iter().map(|c| c.travel_distance).collect::<Vec<_>>()
        );
        let different = split(clips, 0.25, 10);
        assert_eq!(different.heldout.len(), 2);
    }

    #[test]
    fn synth_spec_parsing() {
        let spec = parse_synth_spec("walkers 8 frames 300 styles 2 seed 7").unwrap();
        assert_eq!(
            spec,
            SynthSpec {
                walkers: 8,
                frames: 300,
                styles: 2,
                seed: 7
            }
        );
        assert!(parse_synth_spec("walkers").is_err());
        assert!(parse_synth_spec("wat 3").is_err());
    }

    #[test]
    fn dataset_round_trips_through_directory() {
        let dir = std::env::temp_dir().join(format!("stylemotion_ds_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let (topo, seqs) = synth_dataset::<f64>(SynthSpec {
            walkers: 2,
            frames: 40,
            styles: 2,
            seed: 3,
        });
        assert_eq!(seqs.len(), 4);
        save_dataset(&dir, &topo, &seqs).unwrap();
        let loaded_topo = load_skeleton::<f64>(&dir).unwrap();
        assert_eq!(loaded_topo, topo);
        let loaded = load_sequences::<f64>(&dir).unwrap();
        assert_eq!(loaded.len(), 4);
        for ((an, a), (bn, b)) in loaded.iter().zip(&seqs) {
            assert_eq!(an, bn);
            assert_eq!(a, b);
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn empty_directory_loads_no_sequences() {
        let dir = std::env::temp_dir().join(format!("stylemotion_empty_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        assert!(load_sequences::<f64>(&dir).unwrap().is_empty());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn parse_errors_carry_file_and_line() {
        let dir = std::env::temp_dir().join(format!("stylemotion_bad_{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("bad.mseq"), "1 2 30\n0 0 0\noops 0 0\n").unwrap();
        match load_sequences::<f64>(&dir) {
            Err(DataError::Parse { file, inner }) => {
                assert!(file.ends_with("bad.mseq"));
                assert_eq!(inner.line, 3);
            }
            other => panic!("wanted parse error, got {other:?}"),
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
