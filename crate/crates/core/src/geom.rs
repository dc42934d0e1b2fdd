//! Skeleton-aware geometric primitives: motion states, per-bone direction
//! vectors, forward kinematics, and rigid alignment of clips.
//!
//! Conventions, fixed once for the whole crate:
//! - the vertical axis is Y; the ground plane is X-Z; 2D ground points are (x, z);
//! - a positive rotation angle about the vertical turns +X toward +Z;
//! - bone lengths come from the skeleton, never re-measured per frame.

use thiserror::Error;

use crate::scalar::{vec3, Scalar};

/// Child joints closer than this to their parent are treated as collapsed.
pub const COLLAPSED_BONE_EPS: f64 = 1e-12;

/// Bone-length deviations above this (meters) are flagged by [`validate_state`].
pub const BONE_DEVIATION_FLAG: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("joint {joint} coincides with its parent; direction undefined")]
    ZeroBone { joint: usize },
    #[error("state has {got} joints, skeleton has {expected}")]
    JointCountMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate at joint {joint}")]
    NonFinite { joint: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("skeleton must declare exactly one root, found {0}")]
    RootCount(usize),
    #[error("parent index {parent} of joint {joint} is out of range")]
    BadParent { joint: usize, parent: usize },
    #[error("joint {0} is not connected to the root (cycle or orphan)")]
    Unreachable(usize),
    #[error("bone length of joint {0} must be positive and finite")]
    BadBoneLength(usize),
    #[error("parent and bone-length arrays must have equal length")]
    LengthMismatch,
    #[error("foot joint index {0} is out of range or is the root")]
    BadFootJoint(usize),
}

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

impl FormatError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        FormatError {
            line,
            message: message.into(),
        }
    }
}

/// Child-to-parent joint tree with per-bone lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTopology<S: Scalar> {
    parent: Vec<Option<usize>>,
    bone_length: Vec<S>,
    feet: Option<(usize, usize)>,
    root: usize,
    /// Joints ordered parents-before-children, root first.
    order: Vec<usize>,
    /// Row of each non-root joint in a [`DirectionFrame`]; `None` at the root.
    row_of: Vec<Option<usize>>,
    /// Child joint of each direction row, ascending.
    row_child: Vec<usize>,
}

impl<S: Scalar> SkeletonTopology<S> {
    pub fn new(parent: Vec<Option<usize>>, bone_length: Vec<S>) -> Result<Self, TopologyError> {
        if parent.len() != bone_length.len() {
            return Err(TopologyError::LengthMismatch);
        }
        let j = parent.len();
        let roots: Vec<usize> = (0..j).filter(|&i| parent[i].is_none()).collect();
        if roots.len() != 1 {
            return Err(TopologyError::RootCount(roots.len()));
        }
        let root = roots[0];
        for i in 0..j {
            if let Some(p) = parent[i] {
                if p >= j {
                    return Err(TopologyError::BadParent { joint: i, parent: p });
                }
                if !(bone_length[i] > S::zero()) || !bone_length[i].is_finite() {
                    return Err(TopologyError::BadBoneLength(i));
                }
            }
        }
        // Breadth-first walk from the root both orders the joints and
        // detects cycles (a joint on a cycle is never reached).
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); j];
        for i in 0..j {
            if let Some(p) = parent[i] {
                children[p].push(i);
            }
        }
        let mut order = Vec::with_capacity(j);
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &c in &children[i] {
                queue.push_back(c);
            }
        }
        if order.len() != j {
            let missing = (0..j).find(|i| !order.contains(i)).unwrap();
            return Err(TopologyError::Unreachable(missing));
        }
        let mut row_of = vec![None; j];
        let mut row_child = Vec::with_capacity(j.saturating_sub(1));
        for i in 0..j {
            if i != root {
                row_of[i] = Some(row_child.len());
                row_child.push(i);
            }
        }
        Ok(SkeletonTopology {
            parent,
            bone_length,
            feet: None,
            root,
            order,
            row_of,
            row_child,
        })
    }

    pub fn with_feet(mut self, left: usize, right: usize) -> Result<Self, TopologyError> {
        for f in [left, right] {
            if f >= self.joint_count() || f == self.root {
                return Err(TopologyError::BadFootJoint(f));
            }
        }
        self.feet = Some((left, right));
        Ok(self)
    }

    pub fn joint_count(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent_of(&self, joint: usize) -> Option<usize> {
        self.parent[joint]
    }

    pub fn bone_length(&self, joint: usize) -> S {
        self.bone_length[joint]
    }

    pub fn feet(&self) -> Option<(usize, usize)> {
        self.feet
    }

    /// Joints ordered so every parent precedes its children.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Direction-frame row of a non-root joint.
    pub fn row_of(&self, joint: usize) -> Option<usize> {
        self.row_of[joint]
    }

    /// Child joint addressed by a direction-frame row.
    pub fn row_child(&self, row: usize) -> usize {
        self.row_child[row]
    }

    /// Number of direction rows, `J - 1`.
    pub fn rows(&self) -> usize {
        self.row_child.len()
    }
}

/// Joint positions of a single frame, meters, x-y-z per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionState<S: Scalar> {
    pub positions: Vec<[S; 3]>,
}

impl<S: Scalar> MotionState<S> {
    pub fn new(positions: Vec<[S; 3]>) -> Self {
        MotionState { positions }
    }

    pub fn joint_count(&self) -> usize {
        self.positions.len()
    }

    pub fn is_finite(&self) -> bool {
        self.positions
            .iter()
            .all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Maximum absolute bone-length deviation against the skeleton.
    pub fn max_bone_deviation(&self, topo: &SkeletonTopology<S>) -> S {
        let mut worst = S::zero();
        for j in 0..self.joint_count() {
            if let Some(p) = topo.parent_of(j) {
                let d = (vec3::dist(self.positions[j], self.positions[p]) - topo.bone_length(j))
                    .abs();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Time-ordered stack of motion states sharing one skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence<S: Scalar> {
    pub frames: Vec<MotionState<S>>,
    pub fps: S,
}

impl<S: Scalar> MotionSequence<S> {
    pub fn new(frames: Vec<MotionState<S>>, fps: S) -> Result<Self, GeomError> {
        assert!(!frames.is_empty(), "a motion sequence has at least one frame");
        let j = frames[0].joint_count();
        for f in &frames {
            if f.joint_count() != j {
                return Err(GeomError::JointCountMismatch {
                    expected: j,
                    got: f.joint_count(),
                });
            }
        }
        Ok(MotionSequence { frames, fps })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn joint_count(&self) -> usize {
        self.frames[0].joint_count()
    }
}

/// Per-bone unit direction vectors of one frame plus the root position.
/// Row `r` points from `parent(row_child(r))` to `row_child(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionFrame<S: Scalar> {
    pub dirs: Vec<[S; 3]>,
    pub root_position: [S; 3],
}

/// Unit direction of every bone in `state`, child minus parent, normalized.
pub fn direction_vectors<S: Scalar>(
    state: &MotionState<S>,
    topo: &SkeletonTopology<S>,
) -> Result<DirectionFrame<S>, GeomError> {
    if state.joint_count() != topo.joint_count() {
        return Err(GeomError::JointCountMismatch {
            expected: topo.joint_count(),
            got: state.joint_count(),
        });
    }
    let mut dirs = vec![[S::zero(); 3]; topo.rows()];
    for row in 0..topo.rows() {
        let child = topo.row_child(row);
        let parent = topo.parent_of(child).unwrap();
        let d = vec3::sub(state.positions[child], state.positions[parent]);
        let n = vec3::norm(d);
        if n < S::of(COLLAPSED_BONE_EPS) {
            return Err(GeomError::ZeroBone { joint: child });
        }
        dirs[row] = vec3::scale(d, S::one() / n);
    }
    Ok(DirectionFrame {
        dirs,
        root_position: state.positions[topo.root()],
    })
}

/// Rebuild joint positions from a direction frame. Directions are
/// renormalized internally, so the output is bone-consistent to machine
/// precision regardless of small drift in the input rows.
pub fn forward_kinematics<S: Scalar>(
    frame: &DirectionFrame<S>,
    topo: &SkeletonTopology<S>,
) -> MotionState<S> {
    assert_eq!(frame.dirs.len(), topo.rows(), "direction row count");
    let mut positions = vec![[S::zero(); 3]; topo.joint_count()];
    for &j in topo.order() {
        match topo.parent_of(j) {
            None => positions[j] = frame.root_position,
            Some(p) => {
                let row = topo.row_of(j).unwrap();
                let dir = vec3::normalize(frame.dirs[row]);
                positions[j] = vec3::add(positions[p], vec3::scale(dir, topo.bone_length(j)));
            }
        }
    }
    MotionState::new(positions)
}

/// Rotate every frame about the vertical axis through `pivot` = (x, z).
/// Positive angle turns +X toward +Z. Rigid: bone lengths are untouched.
pub fn rotate_about_vertical<S: Scalar>(
    seq: &MotionSequence<S>,
    angle: S,
    pivot: [S; 2],
) -> MotionSequence<S> {
    let (sin, cos) = angle.sin_cos();
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            MotionState::new(
                f.positions
                    .iter()
                    .map(|&[x, y, z]| {
                        let dx = x - pivot[0];
                        let dz = z - pivot[1];
                        [pivot[0] + cos * dx - sin * dz, y, pivot[1] + sin * dx + cos * dz]
                    })
                    .collect(),
            )
        })
        .collect();
    MotionSequence { frames, fps: seq.fps }
}

/// Rotate a single state about the vertical axis through `pivot`.
pub fn rotate_state_about_vertical<S: Scalar>(
    state: &MotionState<S>,
    angle: S,
    pivot: [S; 2],
) -> MotionState<S> {
    let seq = MotionSequence {
        frames: vec![state.clone()],
        fps: S::of(30.0),
    };
    rotate_about_vertical(&seq, angle, pivot).frames.remove(0)
}

/// Shift every joint of every frame by `offset`.
pub fn translate<S: Scalar>(seq: &MotionSequence<S>, offset: [S; 3]) -> MotionSequence<S> {
    let frames = seq
        .frames
        .iter()
        .map(|f| MotionState::new(f.positions.iter().map(|&p| vec3::add(p, offset)).collect()))
        .collect();
    MotionSequence { frames, fps: seq.fps }
}

/// Shift a single state by `offset`.
pub fn translate_state<S: Scalar>(state: &MotionState<S>, offset: [S; 3]) -> MotionState<S> {
    MotionState::new(state.positions.iter().map(|&p| vec3::add(p, offset)).collect())
}

/// Per-bone report of how far a raw state strays from the skeleton's
/// bone lengths. FK output passes with deviations at machine precision;
/// ingested data may not and is reported rather than rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<S: Scalar> {
    /// `(child joint, |measured - declared|)` for every non-root joint.
    pub deviations: Vec<(usize, S)>,
    /// Child joints whose deviation exceeds [`BONE_DEVIATION_FLAG`].
    pub flagged: Vec<usize>,
}

impl<S: Scalar> ValidationReport<S> {
    pub fn is_clean(&self) -> bool {
        self.flagged.is_empty()
    }
}

pub fn validate_state<S: Scalar>(
    state: &MotionState<S>,
    topo: &SkeletonTopology<S>,
) -> ValidationReport<S> {
    let mut deviations = Vec::with_capacity(topo.rows());
    let mut flagged = Vec::new();
    for row in 0..topo.rows() {
        let child = topo.row_child(row);
        let parent = topo.parent_of(child).unwrap();
        let dev =
            (vec3::dist(state.positions[child], state.positions[parent]) - topo.bone_length(child))
                .abs();
        if dev > S::of(BONE_DEVIATION_FLAG) {
            flagged.push(child);
        }
        deviations.push((child, dev));
    }
    ValidationReport { deviations, flagged }
}

// ---------------------------------------------------------------------------
// Text file formats.
//
// Skeleton (`.skel`):  line 1 is `J`; then J lines `joint parent bone`,
// root has parent -1 and bone 0; optional trailing line `feet L R`.
// Motion (`.mseq`):    line 1 is `J T fps`; then T lines of 3*J reals.
// ---------------------------------------------------------------------------

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, FormatError> {
    tok.parse()
        .map_err(|_| FormatError::new(line, format!("cannot parse {what} from {tok:?}")))
}

pub fn parse_skeleton<S: Scalar>(text: &str) -> Result<SkeletonTopology<S>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, first) = lines
        .next()
        .ok_or_else(|| FormatError::new(1, "empty skeleton file"))?;
    let j: usize = parse_num(first.trim(), ln, "joint count")?;
    if j == 0 {
        return Err(FormatError::new(ln, "joint count must be positive"));
    }
    let mut parent = vec![None; j];
    let mut bone = vec![S::zero(); j];
    let mut seen = vec![false; j];
    let mut feet = None;
    let mut rows = 0usize;
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks[0] == "feet" {
            if toks.len() != 3 {
                return Err(FormatError::new(ln, "feet line needs two joint indices"));
            }
            let l: usize = parse_num(toks[1], ln, "left foot joint")?;
            let r: usize = parse_num(toks[2], ln, "right foot joint")?;
            feet = Some((l, r));
            continue;
        }
        if rows == j {
            return Err(FormatError::new(ln, "more joint lines than declared"));
        }
        if toks.len() != 3 {
            return Err(FormatError::new(ln, "expected: joint parent bone"));
        }
        let idx: usize = parse_num(toks[0], ln, "joint index")?;
        if idx >= j {
            return Err(FormatError::new(ln, format!("joint index {idx} out of range")));
        }
        if seen[idx] {
            return Err(FormatError::new(ln, format!("joint {idx} declared twice")));
        }
        seen[idx] = true;
        let p: i64 = parse_num(toks[1], ln, "parent index")?;
        let b: S = parse_num(toks[2], ln, "bone length")?;
        if p >= 0 {
            parent[idx] = Some(p as usize);
            bone[idx] = b;
        }
        rows += 1;
    }
    if rows != j {
        return Err(FormatError::new(0, format!("expected {j} joint lines, found {rows}")));
    }
    let topo = SkeletonTopology::new(parent, bone)
        .map_err(|e| FormatError::new(0, e.to_string()))?;
    match feet {
        Some((l, r)) => topo
            .with_feet(l, r)
            .map_err(|e| FormatError::new(0, e.to_string())),
        None => Ok(topo),
    }
}

pub fn format_skeleton<S: Scalar>(topo: &SkeletonTopology<S>) -> String {
    let mut out = format!("{}\n", topo.joint_count());
    for j in 0..topo.joint_count() {
        match topo.parent_of(j) {
            None => out.push_str(&format!("{j} -1 0\n")),
            Some(p) => out.push_str(&format!("{j} {p} {}\n", topo.bone_length(j))),
        }
    }
    if let Some((l, r)) = topo.feet() {
        out.push_str(&format!("feet {l} {r}\n"));
    }
    out
}

pub fn parse_motion<S: Scalar>(text: &str) -> Result<MotionSequence<S>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (ln, head) = lines
        .next()
        .ok_or_else(|| FormatError::new(1, "empty motion file"))?;
    let toks: Vec<&str> = head.split_whitespace().collect();
    if toks.len() != 3 {
        return Err(FormatError::new(ln, "header must be: J T fps"));
    }
    let j: usize = parse_num(toks[0], ln, "joint count")?;
    let t: usize = parse_num(toks[1], ln, "frame count")?;
    let fps: S = parse_num(toks[2], ln, "fps")?;
    if j == 0 || t == 0 {
        return Err(FormatError::new(ln, "J and T must be positive"));
    }
    if !(fps > S::zero()) {
        return Err(FormatError::new(ln, "fps must be positive"));
    }
    let mut frames = Vec::with_capacity(t);
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if frames.len() == t {
            return Err(FormatError::new(ln, "more frame lines than declared"));
        }
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 3 * j {
            return Err(FormatError::new(
                ln,
                format!("expected {} values, found {}", 3 * j, vals.len()),
            ));
        }
        let mut positions = Vec::with_capacity(j);
        for jj in 0..j {
            let mut p = [S::zero(); 3];
            for c in 0..3 {
                p[c] = parse_num(vals[3 * jj + c], ln, "coordinate")?;
                if !p[c].is_finite() {
                    return Err(FormatError::new(ln, "non-finite coordinate"));
                }
            }
            positions.push(p);
        }
        frames.push(MotionState::new(positions));
    }
    if frames.len() != t {
        return Err(FormatError::new(
            0,
            format!("expected {t} frame lines, found {}", frames.len()),
        ));
    }
    MotionSequence::new(frames, fps).map_err(|e| FormatError::new(0, e.to_string()))
}

pub fn format_motion<S: Scalar>(seq: &MotionSequence<S>) -> String {
    let mut out = format!("{} {} {}\n", seq.joint_count(), seq.len(), seq.fps);
    for f in &seq.frames {
        let mut first = true;
        for p in &f.positions {
            for c in p {
                if !first {
                    out.push(' ');
                }
                out.push_str(&format!("{c}"));
                first = false;
            }
        }
        out.push('\n');
    }
    out
}
