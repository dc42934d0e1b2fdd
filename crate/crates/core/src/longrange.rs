//! Transition generation between clips: bi-directional recurrent rollouts in
//! the per-bone latitude/longitude space, fusion through forward kinematics
//! in position space, and least-squares adversarial training for boundary
//! pairs that have no ground truth.
//!
//! A transition of length `n` owns frames `2..n-1`; its boundary frames are
//! the neighbouring clips' states and are inserted verbatim. Every generated
//! frame goes through FK, so bone lengths hold no matter what the networks
//! emit.

use std::rc::Rc;

use rand::rngs::StdRng;
use rand::Rng;
use thiserror::Error;

use crate::dataset::DatasetSplit;
use crate::geom::{
    direction_vectors, DirectionFrame, GeomError, MotionSequence, MotionState, SkeletonTopology,
};
use crate::nn::{
    parse_blocks, uniform_init, write_blocks, AdamConfig, BoundParams, Graph, NnError, ParamStore,
    Tensor, Value, LEAKY_SLOPE,
};
use crate::scalar::Scalar;
use crate::slerp::{bone_bases, motion_to_params, params_to_motion, BoneBasis};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, iteration {iteration}")]
    NonFiniteLoss { epoch: usize, iteration: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionConfig<S: Scalar> {
    /// Total transition length including both boundary frames.
    pub transition_len: usize,
    /// Recurrent state width of each rollout cell.
    pub hidden: usize,
    /// Hidden width of the per-frame fusion head.
    pub fuse_hidden: usize,
    /// Width of the discriminator's residual blocks.
    pub disc_hidden: usize,
    /// Consecutive direction frames per discriminator window.
    pub disc_window: usize,
    pub disc_blocks: usize,
    pub batch_size: usize,
    /// Cross-sequence boundary pairs per generator/discriminator step.
    pub adv_batch: usize,
    /// Weight of the adversarial terms next to the position loss.
    pub adv_weight: S,
    /// Cap on learned deviations from the geodesic reference, applied on
    /// top of the boundary-vanishing window.
    pub deviation_scale: S,
}

impl<S: Scalar> Default for TransitionConfig<S> {
    fn default() -> Self {
        TransitionConfig {
            transition_len: 40,
            hidden: 64,
            fuse_hidden: 64,
            disc_hidden: 128,
            disc_window: 8,
            disc_blocks: 3,
            batch_size: 8,
            adv_batch: 2,
            adv_weight: S::of(0.01),
            deviation_scale: S::of(0.5),
        }
    }
}

impl<S: Scalar> TransitionConfig<S> {
    pub fn tiny(transition_len: usize) -> Self {
        TransitionConfig {
            transition_len,
            hidden: 12,
            fuse_hidden: 16,
            disc_hidden: 16,
            disc_window: 4,
            disc_blocks: 2,
            batch_size: 4,
            adv_batch: 2,
            adv_weight: S::of(0.01),
            deviation_scale: S::one(),
        }
    }
}

/// Boundary pair of a transition, with interior ground truth when both
/// boundaries come from the same sequence. Velocities are horizontal root
/// displacements per frame, entering the boundary frame.
#[derive(Debug, Clone)]
pub struct TransitionBoundary<S: Scalar> {
    pub start_state: MotionState<S>,
    pub end_state: MotionState<S>,
    pub start_vel: [S; 2],
    pub end_vel: [S; 2],
    pub interior: Option<Vec<MotionState<S>>>,
}

impl<S: Scalar> TransitionBoundary<S> {
    /// Boundary with nominal straight-line velocities, used when nothing
    /// else is known about the endpoints.
    pub fn nominal(
        start_state: MotionState<S>,
        end_state: MotionState<S>,
        n: usize,
        topo: &SkeletonTopology<S>,
    ) -> Self {
        let root = topo.root();
        let a = start_state.positions[root];
        let b = end_state.positions[root];
        let steps = S::from_usize(n - 1).unwrap();
        let vel = [(b[0] - a[0]) / steps, (b[2] - a[2]) / steps];
        TransitionBoundary {
            start_state,
            end_state,
            start_vel: vel,
            end_vel: vel,
            interior: None,
        }
    }

    /// Supervised boundary from a same-sequence window of length `n`. The
    /// interior target is re-projected through the parameter space, so it is
    /// exactly representable by the generator's output space.
    pub fn from_window(
        frames: &[MotionState<S>],
        topo: &SkeletonTopology<S>,
        fps: S,
    ) -> Result<Self, GeomError> {
        let n = frames.len();
        assert!(n >= 3, "window too short for a transition");
        let root = topo.root();
        let start_state = frames[0].clone();
        let end_state = frames[n - 1].clone();
        let d1 = direction_vectors(&start_state, topo)?;
        let dn = direction_vectors(&end_state, topo)?;
        let interior_dirs: Vec<DirectionFrame<S>> = frames[1..n - 1]
            .iter()
            .map(|f| direction_vectors(f, topo))
            .collect::<Result<_, _>>()?;
        let extraction = motion_to_params(&d1, &dn, &interior_dirs);
        let track: Vec<[S; 3]> = frames[1..n - 1]
            .iter()
            .map(|f| f.positions[root])
            .collect();
        let target = params_to_motion(
            &start_state,
            &end_state,
            &extraction.trajectory,
            &track,
            topo,
            fps,
        )?;
        let vel = |a: [S; 3], b: [S; 3]| [b[0] - a[0], b[2] - a[2]];
        Ok(TransitionBoundary {
            start_vel: vel(frames[0].positions[root], frames[1].positions[root]),
            end_vel: vel(frames[n - 2].positions[root], frames[n - 1].positions[root]),
            start_state,
            end_state,
            interior: Some(target.frames),
        })
    }
}

/// Generator (forward/backward rollouts plus fusion head) and discriminator
/// parameters for one skeleton size.
#[derive(Debug, Clone)]
pub struct TransitionModel<S: Scalar> {
    pub cfg: TransitionConfig<S>,
    pub joints: usize,
    pub fps: S,
    pub gen_store: ParamStore<S>,
    pub disc_store: ParamStore<S>,
}

impl<S: Scalar> TransitionModel<S> {
    /// Width of one parameter frame: latitude and longitude per bone plus
    /// two root-velocity channels.
    pub fn o_dim(&self) -> usize {
        2 * (self.joints - 1) + 2
    }

    fn dirs_flat_dim(&self) -> usize {
        3 * (self.joints - 1)
    }

    pub fn new(cfg: TransitionConfig<S>, joints: usize, fps: S, rng: &mut StdRng) -> Self {
        let d = 2 * (joints - 1) + 2;
        let h = cfg.hidden;
        let mut gen = ParamStore::new();
        for side in ["fwd", "bwd"] {
            gen.insert(
                format!("{side}.w_ih"),
                uniform_init(vec![4 * h, 2 * d], 2 * d, 4 * h, rng),
            )
            .unwrap();
            gen.insert(
                format!("{side}.w_hh"),
                uniform_init(vec![4 * h, h], h, 4 * h, rng),
            )
            .unwrap();
            gen.insert(format!("{side}.b"), Tensor::zeros(vec![4 * h]))
                .unwrap();
            let mut head_w: Tensor<S> = uniform_init(vec![d, h], h, d, rng);
            for v in head_w.data_mut() {
                *v = *v * S::of(0.1);
            }
            gen.insert(format!("{side}.head.w"), head_w).unwrap();
            gen.insert(format!("{side}.head.b"), Tensor::zeros(vec![d]))
                .unwrap();
        }
        let fse_in = 6 * joints + 1;
        let fse_out = 3 * (joints - 1) + 3;
        gen.insert(
            "fse.l1.w",
            uniform_init(vec![cfg.fuse_hidden, fse_in], fse_in, cfg.fuse_hidden, rng),
        )
        .unwrap();
        gen.insert("fse.l1.b", Tensor::zeros(vec![cfg.fuse_hidden]))
            .unwrap();
        // The fusion head emits corrections on top of the blended rollout
        // decode; starting it near zero keeps early gradients flowing into
        // the rollouts instead of letting the head shortcut them.
        let mut fse_out_w: Tensor<S> =
            uniform_init(vec![fse_out, cfg.fuse_hidden], cfg.fuse_hidden, fse_out, rng);
        for v in fse_out_w.data_mut() {
            *v = *v * S::of(0.1);
        }
        gen.insert("fse.l2.w", fse_out_w).unwrap();
        gen.insert("fse.l2.b", Tensor::zeros(vec![fse_out])).unwrap();

        let mut disc = ParamStore::new();
        let win = cfg.disc_window * 3 * (joints - 1);
        let dh = cfg.disc_hidden;
        disc.insert("disc.in.w", uniform_init(vec![dh, win], win, dh, rng))
            .unwrap();
        disc.insert("disc.in.b", Tensor::zeros(vec![dh])).unwrap();
        for k in 0..cfg.disc_blocks {
            for layer in ["l1", "l2"] {
                disc.insert(
                    format!("disc.blk{k}.{layer}.w"),
                    uniform_init(vec![dh, dh], dh, dh, rng),
                )
                .unwrap();
                disc.insert(format!("disc.blk{k}.{layer}.b"), Tensor::zeros(vec![dh]))
                    .unwrap();
            }
        }
        disc.insert("disc.out.w", uniform_init(vec![1, dh], dh, 1, rng))
            .unwrap();
        disc.insert("disc.out.b", Tensor::zeros(vec![1])).unwrap();

        TransitionModel {
            cfg,
            joints,
            fps,
            gen_store: gen,
            disc_store: disc,
        }
    }

    /// Boundary parameter frames `(o_start, o_end)`: latitude 0 everywhere,
    /// longitude 0 at the start and 1 at the end, plus the boundary
    /// velocities.
    pub fn boundary_params(&self, boundary: &TransitionBoundary<S>) -> (Tensor<S>, Tensor<S>) {
        let bones = self.joints - 1;
        let build = |lon: S, vel: [S; 2]| {
            let mut v = vec![S::zero(); 2 * bones + 2];
            for b in 0..bones {
                v[bones + b] = lon;
            }
            v[2 * bones] = vel[0];
            v[2 * bones + 1] = vel[1];
            Tensor::vector(v)
        };
        (
            build(S::zero(), boundary.start_vel),
            build(S::one(), boundary.end_vel),
        )
    }

    /// Autoregressive rollout producing interior parameter frames. Heads
    /// emit deviations around the geodesic reference (a linear longitude
    /// ramp and linearly blended boundary velocity), applied inside the
    /// squashing, so a fresh model already produces exact-seam single-arc
    /// interpolations and training only has to learn the deviation.
    fn rollout_g(
        &self,
        g: &mut Graph<S>,
        p: &BoundParams,
        side: &str,
        origin: &Tensor<S>,
        goal: &Tensor<S>,
        steps: usize,
    ) -> Result<Vec<Value>, NnError> {
        let bones = self.joints - 1;
        let n = steps + 2;
        let nf = S::from_usize(n - 1).unwrap();
        // Chronological boundary velocities regardless of rollout direction.
        let (v_first, v_last) = match side {
            "fwd" => (
                [origin.data()[2 * bones], origin.data()[2 * bones + 1]],
                [goal.data()[2 * bones], goal.data()[2 * bones + 1]],
            ),
            _ => (
                [goal.data()[2 * bones], goal.data()[2 * bones + 1]],
                [origin.data()[2 * bones], origin.data()[2 * bones + 1]],
            ),
        };
        let params = p.lstm(side);
        let head_w = p.value(&format!("{side}.head.w"));
        let head_b = p.value(&format!("{side}.head.b"));
        let mut h = g.input(Tensor::zeros(vec![self.cfg.hidden]));
        let mut c = g.input(Tensor::zeros(vec![self.cfg.hidden]));
        let origin_v = g.input(origin.clone());
        let goal_v = g.input(goal.clone());
        let mut cur = origin_v;
        let mut outs = Vec::with_capacity(steps);
        for step in 0..steps {
            // 1-based frame this step predicts.
            let frame = match side {
                "fwd" => step + 2,
                _ => n - 1 - step,
            };
            let ramp = S::from_usize(frame - 1).unwrap() / nf;
            // Deviations vanish at the boundaries: the frames next to them
            // sit on the reference geodesic no matter what the nets emit,
            // which keeps the seams sound for boundary pairs never seen in
            // training.
            let window = (S::PI() * ramp).sin() * self.cfg.deviation_scale;
            let x = g.concat(&[cur, goal_v])?;
            let (h2, c2) = g.lstm_cell(x, h, c, &params)?;
            h = h2;
            c = c2;
            let raw = g.dense(h, head_w, head_b)?;
            let lat_raw = g.slice(raw, 0, bones)?;
            let lon_raw = g.slice(raw, bones, bones)?;
            let vel_raw = g.slice(raw, 2 * bones, 2)?;
            let lat_windowed = g.scale(lat_raw, window);
            let lat = g.tanh(lat_windowed);
            let lon_windowed = g.scale(lon_raw, window);
            let lon_shifted = g.add_scalar(lon_windowed, (ramp / (S::one() - ramp)).ln());
            let lon = g.sigmoid(lon_shifted);
            let vel_ref = g.input(Tensor::vector(vec![
                v_first[0] + ramp * (v_last[0] - v_first[0]),
                v_first[1] + ramp * (v_last[1] - v_first[1]),
            ]));
            let vel_windowed = g.scale(vel_raw, window);
            let vel = g.add(vel_windowed, vel_ref)?;
            cur = g.concat(&[lat, lon, vel])?;
            outs.push(cur);
        }
        Ok(outs)
    }

    #[doc(hidden)]
    pub fn rollout_graph_probe(
        &self,
        g: &mut Graph<S>,
        p: &BoundParams,
        side: &str,
        origin: &Tensor<S>,
        goal: &Tensor<S>,
        steps: usize,
    ) -> Result<Vec<Value>, NnError> {
        self.rollout_g(g, p, side, origin, goal, steps)
    }

    /// Forward rollout: `n - 2` interior parameter frames for frames
    /// `2..n-1`, starting from `o_start` and conditioned on `o_end`. Outputs
    /// are squashed into the valid ranges by construction.
    pub fn rollout_forward(
        &self,
        o_start: &Tensor<S>,
        o_end: &Tensor<S>,
        n: usize,
    ) -> Result<Vec<Tensor<S>>, NnError> {
        let mut g = Graph::new();
        let p = self.gen_store.bind(&mut g);
        let outs = self.rollout_g(&mut g, &p, "fwd", o_start, o_end, n - 2)?;
        Ok(outs.into_iter().map(|v| g.value(v).clone()).collect())
    }

    /// Backward rollout, mirror of [`Self::rollout_forward`]: entry `i`
    /// holds the parameter frame for frame `n-1-i`.
    pub fn rollout_backward(
        &self,
        o_end: &Tensor<S>,
        o_start: &Tensor<S>,
        n: usize,
    ) -> Result<Vec<Tensor<S>>, NnError> {
        let mut g = Graph::new();
        let p = self.gen_store.bind(&mut g);
        let outs = self.rollout_g(&mut g, &p, "bwd", o_end, o_start, n - 2)?;
        Ok(outs.into_iter().map(|v| g.value(v).clone()).collect())
    }

    fn discriminate_g(
        &self,
        g: &mut Graph<S>,
        p: &BoundParams,
        window: Value,
    ) -> Result<Value, NnError> {
        let slope = S::of(LEAKY_SLOPE);
        let mut h = g.dense(window, p.value("disc.in.w"), p.value("disc.in.b"))?;
        h = g.leaky_relu(h, slope);
        for k in 0..self.cfg.disc_blocks {
            let t = g.dense(
                h,
                p.value(&format!("disc.blk{k}.l1.w")),
                p.value(&format!("disc.blk{k}.l1.b")),
            )?;
            let t = g.leaky_relu(t, slope);
            let t = g.dense(
                t,
                p.value(&format!("disc.blk{k}.l2.w")),
                p.value(&format!("disc.blk{k}.l2.b")),
            )?;
            let sum = g.add(h, t)?;
            h = g.leaky_relu(sum, slope);
        }
        let out = g.dense(h, p.value("disc.out.w"), p.value("disc.out.b"))?;
        Ok(g.sigmoid(out))
    }

    /// Realness score in (0, 1) of a window of consecutive direction frames.
    pub fn discriminate(&self, window: &[DirectionFrame<S>]) -> Result<S, NnError> {
        let flat = flatten_window(window, self.cfg.disc_window, self.dirs_flat_dim())?;
        let mut g = Graph::new();
        let p = self.disc_store.bind(&mut g);
        let w = g.input(flat);
        let d = self.discriminate_g(&mut g, &p, w)?;
        Ok(g.item(d))
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), NnError> {
        let mut blocks = vec![("meta".to_string(), self.meta_tensor())];
        blocks.extend(self.gen_store.to_blocks());
        blocks.extend(self.disc_store.to_blocks());
        std::fs::write(
            path,
            write_blocks(&blocks, self.gen_store.step(), self.gen_store.epoch()),
        )?;
        Ok(())
    }

    fn meta_tensor(&self) -> Tensor<S> {
        let c = &self.cfg;
        Tensor::vector(vec![
            S::from_usize(self.joints).unwrap(),
            S::from_usize(c.transition_len).unwrap(),
            S::from_usize(c.hidden).unwrap(),
            S::from_usize(c.fuse_hidden).unwrap(),
            S::from_usize(c.disc_hidden).unwrap(),
            S::from_usize(c.disc_window).unwrap(),
            S::from_usize(c.disc_blocks).unwrap(),
            S::from_usize(c.batch_size).unwrap(),
            S::from_usize(c.adv_batch).unwrap(),
            c.adv_weight,
            c.deviation_scale,
            self.fps,
            S::from_u64(self.disc_store.step()).unwrap(),
            S::from_u64(self.disc_store.epoch()).unwrap(),
        ])
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path)?;
        let ckpt = parse_blocks::<S>(&text)?;
        let mut meta = None;
        let mut gen_blocks = Vec::new();
        let mut disc_blocks = Vec::new();
        for (name, tensor) in ckpt.blocks {
            if name == "meta" {
                meta = Some(tensor);
            } else if name.starts_with("disc.") {
                disc_blocks.push((name, tensor));
            } else {
                gen_blocks.push((name, tensor));
            }
        }
        let meta = meta.ok_or_else(|| NnError::Checkpoint("missing meta block".into()))?;
        if meta.len() != 14 {
            return Err(NnError::Checkpoint("meta block has wrong arity".into()));
        }
        let d = meta.data();
        let us = |v: S| v.to_f64_lossy().round() as usize;
        let cfg = TransitionConfig {
            transition_len: us(d[1]),
            hidden: us(d[2]),
            fuse_hidden: us(d[3]),
            disc_hidden: us(d[4]),
            disc_window: us(d[5]),
            disc_blocks: us(d[6]),
            batch_size: us(d[7]),
            adv_batch: us(d[8]),
            adv_weight: d[9],
            deviation_scale: d[10],
        };
        Ok(TransitionModel {
            cfg,
            joints: us(d[0]),
            fps: d[11],
            gen_store: ParamStore::from_blocks(gen_blocks, ckpt.step, ckpt.epoch)?,
            disc_store: ParamStore::from_blocks(
                disc_blocks,
                us(d[12]) as u64,
                us(d[13]) as u64,
            )?,
        })
    }
}

fn flatten_window<S: Scalar>(
    window: &[DirectionFrame<S>],
    expect_frames: usize,
    flat_dim: usize,
) -> Result<Tensor<S>, NnError> {
    if window.len() != expect_frames {
        return Err(NnError::ShapeMismatch {
            op: "discriminate",
            detail: format!("window has {} frames, model wants {expect_frames}", window.len()),
        });
    }
    let mut data = Vec::with_capacity(expect_frames * flat_dim);
    for frame in window {
        for d in &frame.dirs {
            data.extend_from_slice(d);
        }
    }
    if data.len() != expect_frames * flat_dim {
        return Err(NnError::ShapeMismatch {
            op: "discriminate",
            detail: "direction frame size does not match the model skeleton".into(),
        });
    }
    Ok(Tensor::vector(data))
}

// ---------------------------------------------------------------------------
// Differentiable decode: parameter frames -> unit bone directions.
// ---------------------------------------------------------------------------

/// Graph constants describing the per-bone bases between two boundary
/// direction frames. Degenerate bones carry a normalized-lerp fallback mask.
struct BasisConsts<S: Scalar> {
    v_start: Tensor<S>,
    v_end: Tensor<S>,
    normal: Tensor<S>,
    angle: Tensor<S>,
    inv_sin: Tensor<S>,
    mask: Tensor<S>,
    inv_mask: Tensor<S>,
    axis_bias: Tensor<S>,
}

fn basis_consts<S: Scalar>(d1: &DirectionFrame<S>, dn: &DirectionFrame<S>) -> BasisConsts<S> {
    let bones = d1.dirs.len();
    let (bases, _) = bone_bases(d1, dn);
    let mut v_start = Vec::with_capacity(bones * 3);
    let mut v_end = Vec::with_capacity(bones * 3);
    let mut normal = vec![S::zero(); bones * 3];
    let mut angle = vec![S::zero(); bones];
    let mut inv_sin = vec![S::zero(); bones];
    let mut mask = vec![S::zero(); bones];
    let mut inv_mask = vec![S::zero(); bones];
    let mut axis_bias = vec![S::zero(); bones * 3];
    for (b, basis) in bases.iter().enumerate() {
        match basis {
            BoneBasis::Slerp(s) => {
                v_start.extend_from_slice(&s.start);
                v_end.extend_from_slice(&s.end);
                normal[b * 3..b * 3 + 3].copy_from_slice(&s.normal);
                angle[b] = s.angle;
                inv_sin[b] = S::one() / s.angle.sin();
                mask[b] = S::one();
            }
            BoneBasis::Degenerate { start, end, axis } => {
                v_start.extend_from_slice(start);
                v_end.extend_from_slice(end);
                inv_mask[b] = S::one();
                let tiny = S::of(1e-6);
                for c in 0..3 {
                    axis_bias[b * 3 + c] = axis[c] * tiny;
                }
            }
        }
    }
    BasisConsts {
        v_start: Tensor::new(vec![bones, 3], v_start).unwrap(),
        v_end: Tensor::new(vec![bones, 3], v_end).unwrap(),
        normal: Tensor::new(vec![bones, 3], normal).unwrap(),
        angle: Tensor::vector(angle),
        inv_sin: Tensor::vector(inv_sin),
        mask: Tensor::vector(mask),
        inv_mask: Tensor::vector(inv_mask),
        axis_bias: Tensor::new(vec![bones, 3], axis_bias).unwrap(),
    }
}

struct BasisValues {
    v_start: Value,
    v_end: Value,
    normal: Value,
    angle: Value,
    inv_sin: Value,
    mask: Value,
    inv_mask: Value,
    axis_bias: Value,
    ones: Value,
}

fn bind_basis<S: Scalar>(g: &mut Graph<S>, bc: &BasisConsts<S>) -> BasisValues {
    let bones = bc.angle.len();
    BasisValues {
        v_start: g.input(bc.v_start.clone()),
        v_end: g.input(bc.v_end.clone()),
        normal: g.input(bc.normal.clone()),
        angle: g.input(bc.angle.clone()),
        inv_sin: g.input(bc.inv_sin.clone()),
        mask: g.input(bc.mask.clone()),
        inv_mask: g.input(bc.inv_mask.clone()),
        axis_bias: g.input(bc.axis_bias.clone()),
        ones: g.input(Tensor::full(vec![bones], S::one())),
    }
}

/// Unit bone directions from latitude/longitude vectors: the double slerp on
/// healthy bones, normalized lerp on degenerate ones. Always finite.
fn dirs_from_params_g<S: Scalar>(
    g: &mut Graph<S>,
    bv: &BasisValues,
    lat: Value,
    lon: Value,
) -> Result<Value, NnError> {
    let one_minus = g.sub(bv.ones, lon)?;
    let a_raw = g.mul(one_minus, bv.angle)?;
    let a_sin = g.sin(a_raw);
    let a1 = g.mul(a_sin, bv.inv_sin)?;
    let b_raw = g.mul(lon, bv.angle)?;
    let b_sin = g.sin(b_raw);
    let a2 = g.mul(b_sin, bv.inv_sin)?;
    let u1 = g.row_scale(bv.v_start, a1)?;
    let u2 = g.row_scale(bv.v_end, a2)?;
    let in_plane = g.add(u1, u2)?;
    let lat_angle = g.scale(lat, S::FRAC_PI_2());
    let lat_cos = g.cos(lat_angle);
    let lat_sin = g.sin(lat_angle);
    let planar = g.row_scale(in_plane, lat_cos)?;
    let out_of_plane = g.row_scale(bv.normal, lat_sin)?;
    let slerp_dirs = g.add(planar, out_of_plane)?;

    let m1 = g.row_scale(bv.v_start, one_minus)?;
    let m2 = g.row_scale(bv.v_end, lon)?;
    let mix = g.add(m1, m2)?;
    let mix_biased = g.add(mix, bv.axis_bias)?;
    let nlerp_dirs = g.row_normalize(mix_biased, S::of(1e-12))?;

    let keep = g.row_scale(slerp_dirs, bv.mask)?;
    let fallback = g.row_scale(nlerp_dirs, bv.inv_mask)?;
    g.add(keep, fallback)
}

// ---------------------------------------------------------------------------
// Transition synthesis graph.
// ---------------------------------------------------------------------------

struct TransitionContext<S: Scalar> {
    n: usize,
    basis: BasisConsts<S>,
    o_start: Tensor<S>,
    o_end: Tensor<S>,
    start_root: [S; 3],
    end_root: [S; 3],
    end_vel: [S; 2],
    topo: Rc<SkeletonTopology<S>>,
}

impl<S: Scalar> TransitionContext<S> {
    fn build(
        model: &TransitionModel<S>,
        boundary: &TransitionBoundary<S>,
        n: usize,
        topo: &SkeletonTopology<S>,
    ) -> Result<Self, GeomError> {
        let d1 = direction_vectors(&boundary.start_state, topo)?;
        let dn = direction_vectors(&boundary.end_state, topo)?;
        let (o_start, o_end) = model.boundary_params(boundary);
        let root = topo.root();
        Ok(TransitionContext {
            n,
            basis: basis_consts(&d1, &dn),
            o_start,
            o_end,
            start_root: boundary.start_state.positions[root],
            end_root: boundary.end_state.positions[root],
            end_vel: boundary.end_vel,
            topo: Rc::new(topo.clone()),
        })
    }
}

struct FuseBuild {
    /// Fused positions per interior frame, `[J, 3]` values.
    positions: Vec<Value>,
    /// Fused unit direction frames per interior frame, `[J-1, 3]` values.
    dirs: Vec<Value>,
    /// Corrected horizontal root track per interior frame, `[2]` values.
    track: Vec<Value>,
    /// Vertical root coordinate per interior frame (linear blend, constant).
    track_y: Vec<f64>,
}

/// Interior decode and fusion: integrate the root track from predicted
/// velocities with a linear endpoint correction, FK both rollouts, run the
/// fusion head per frame, and re-project through FK.
fn fuse_g<S: Scalar>(
    model: &TransitionModel<S>,
    g: &mut Graph<S>,
    p: &BoundParams,
    ctx: &TransitionContext<S>,
    fwd: &[Value],
    bwd: &[Value],
) -> Result<FuseBuild, NnError> {
    let n = ctx.n;
    let interior = n - 2;
    assert_eq!(fwd.len(), interior);
    assert_eq!(bwd.len(), interior);
    let bones = model.joints - 1;
    let bv = bind_basis(g, &ctx.basis);

    // Raw track: start root plus cumulative predicted velocities. Entry i
    // corresponds to frame t = i + 2; the backward estimate of the same
    // frame sits at index n - 3 - i. Each frame trusts whichever rollout is
    // fewer autoregressive steps from its boundary.
    let nf = (n - 1) as f64;
    let mut raw_track: Vec<Value> = Vec::with_capacity(interior);
    let start_xz = g.input(Tensor::vector(vec![ctx.start_root[0], ctx.start_root[2]]));
    let mut cur = start_xz;
    for i in 0..interior {
        let tau = S::of((i + 1) as f64 / nf);
        let vf = g.slice(fwd[i], 2 * bones, 2)?;
        let vb = g.slice(bwd[interior - 1 - i], 2 * bones, 2)?;
        let vfw = g.scale(vf, S::one() - tau);
        let vbw = g.scale(vb, tau);
        let v = g.add(vfw, vbw)?;
        cur = g.add(cur, v)?;
        raw_track.push(cur);
    }
    // One more step with the known end velocity, then spread the endpoint
    // error linearly so the track lands exactly on the end root.
    let end_vel = g.input(Tensor::vector(vec![ctx.end_vel[0], ctx.end_vel[1]]));
    let reached = g.add(cur, end_vel)?;
    let target = g.input(Tensor::vector(vec![ctx.end_root[0], ctx.end_root[2]]));
    let gap = g.sub(target, reached)?;
    let mut track = Vec::with_capacity(interior);
    let mut track_y = Vec::with_capacity(interior);
    let y1 = ctx.start_root[1].to_f64_lossy();
    let yn = ctx.end_root[1].to_f64_lossy();
    for i in 0..interior {
        let w = (i + 1) as f64 / nf;
        let corr = g.scale(gap, S::of(w));
        track.push(g.add(raw_track[i], corr)?);
        track_y.push(y1 + w * (yn - y1));
    }

    let mut positions = Vec::with_capacity(interior);
    let mut dirs_out = Vec::with_capacity(interior);
    for i in 0..interior {
        let fwd_lat = g.slice(fwd[i], 0, bones)?;
        let fwd_lon = g.slice(fwd[i], bones, bones)?;
        let dirs_f = dirs_from_params_g(g, &bv, fwd_lat, fwd_lon)?;
        // Same-frame pairing: the backward output produced at step n - t is
        // the backward estimate of frame t, so every fused frame sees one
        // fresh rollout (forward near the start, backward near the end).
        let paired = &bwd[interior - 1 - i];
        let bwd_lat = g.slice(*paired, 0, bones)?;
        let bwd_lon = g.slice(*paired, bones, bones)?;
        let dirs_b = dirs_from_params_g(g, &bv, bwd_lat, bwd_lon)?;

        let y = g.input(Tensor::vector(vec![S::of(track_y[i])]));
        let tx = g.slice(track[i], 0, 1)?;
        let tz = g.slice(track[i], 1, 1)?;
        let root3 = g.concat(&[tx, y, tz])?;

        let pos_f = g.fk(dirs_f, root3, &ctx.topo)?;
        let pos_b = g.fk(dirs_b, root3, &ctx.topo)?;

        let flat_f = g.reshape(pos_f, vec![3 * model.joints])?;
        let flat_b = g.reshape(pos_b, vec![3 * model.joints])?;
        let tau = g.input(Tensor::vector(vec![S::of((i + 1) as f64 / nf)]));
        let inp = g.concat(&[flat_f, flat_b, tau])?;
        let h = g.dense(inp, p.value("fse.l1.w"), p.value("fse.l1.b"))?;
        let h = g.leaky_relu(h, S::of(LEAKY_SLOPE));
        let out = g.dense(h, p.value("fse.l2.w"), p.value("fse.l2.b"))?;
        let window =
            (S::PI() * S::of((i + 1) as f64 / nf)).sin() * model.cfg.deviation_scale;
        let corr_flat = g.slice(out, 0, 3 * bones)?;
        let corr_raw = g.reshape(corr_flat, vec![bones, 3])?;
        let corr = g.scale(corr_raw, window);
        let off_raw = g.slice(out, 3 * bones, 3)?;
        let root_off = g.scale(off_raw, window);

        // Baseline: trust the forward decode near the start and the
        // backward decode near the end, then add the windowed correction,
        // which vanishes at the seams.
        let tau_s = S::of((i + 1) as f64 / nf);
        let base_f = g.scale(dirs_f, S::one() - tau_s);
        let base_b = g.scale(dirs_b, tau_s);
        let base = g.add(base_f, base_b)?;
        let pre = g.add(base, corr)?;
        let fused_dirs = g.row_normalize(pre, S::of(1e-12))?;
        let fused_root = g.add(root3, root_off)?;
        let pos = g.fk(fused_dirs, fused_root, &ctx.topo)?;
        positions.push(pos);
        dirs_out.push(fused_dirs);
    }
    Ok(FuseBuild {
        positions,
        dirs: dirs_out,
        track,
        track_y,
    })
}

/// Fused interior frames plus the corrected root track (including both
/// boundary entries, which land exactly on the boundary roots).
pub struct FuseOutput<S: Scalar> {
    pub interior: MotionSequence<S>,
    pub root_track: Vec<[S; 3]>,
}

/// Decode and fuse precomputed rollout outputs between two states. Boundary
/// velocities are taken as nominal straight-line ones, as in
/// [`interpolate`].
pub fn fuse<S: Scalar>(
    model: &TransitionModel<S>,
    forward: &[Tensor<S>],
    backward: &[Tensor<S>],
    start_state: &MotionState<S>,
    end_state: &MotionState<S>,
    topo: &SkeletonTopology<S>,
) -> Result<FuseOutput<S>, TrainError> {
    let n = forward.len() + 2;
    let boundary = TransitionBoundary::nominal(start_state.clone(), end_state.clone(), n, topo);
    let ctx = TransitionContext::build(model, &boundary, n, topo)?;
    let mut g = Graph::new();
    let p = model.gen_store.bind(&mut g);
    let fwd: Vec<Value> = forward.iter().map(|t| g.input(t.clone())).collect();
    let bwd: Vec<Value> = backward.iter().map(|t| g.input(t.clone())).collect();
    let build = fuse_g(model, &mut g, &p, &ctx, &fwd, &bwd)?;
    collect_fuse_output(model, &g, &ctx, &build)
}

fn collect_fuse_output<S: Scalar>(
    model: &TransitionModel<S>,
    g: &Graph<S>,
    ctx: &TransitionContext<S>,
    build: &FuseBuild,
) -> Result<FuseOutput<S>, TrainError> {
    let frames: Vec<MotionState<S>> = build
        .positions
        .iter()
        .map(|&v| {
            let t = g.value(v);
            let positions = (0..model.joints)
                .map(|j| [t.data()[j * 3], t.data()[j * 3 + 1], t.data()[j * 3 + 2]])
                .collect();
            MotionState::new(positions)
        })
        .collect();
    let mut root_track = Vec::with_capacity(build.track.len() + 2);
    root_track.push(ctx.start_root);
    for (i, &v) in build.track.iter().enumerate() {
        let t = g.value(v);
        root_track.push([t.data()[0], S::of(build.track_y[i]), t.data()[1]]);
    }
    root_track.push(ctx.end_root);
    Ok(FuseOutput {
        interior: MotionSequence::new(frames, model.fps)?,
        root_track,
    })
}

/// Full transition of length `n`: the boundary states verbatim, generated
/// interior frames in between. Every frame is bone-consistent.
pub fn interpolate<S: Scalar>(
    model: &TransitionModel<S>,
    start_state: &MotionState<S>,
    end_state: &MotionState<S>,
    n: usize,
    topo: &SkeletonTopology<S>,
) -> Result<MotionSequence<S>, TrainError> {
    let boundary = TransitionBoundary::nominal(start_state.clone(), end_state.clone(), n, topo);
    interpolate_with_boundary(model, &boundary, n, topo)
}

pub fn interpolate_with_boundary<S: Scalar>(
    model: &TransitionModel<S>,
    boundary: &TransitionBoundary<S>,
    n: usize,
    topo: &SkeletonTopology<S>,
) -> Result<MotionSequence<S>, TrainError> {
    assert!(n >= 3, "a transition has at least one interior frame");
    let ctx = TransitionContext::build(model, boundary, n, topo)?;
    let mut g = Graph::new();
    let p = model.gen_store.bind(&mut g);
    let fwd = model.rollout_g(&mut g, &p, "fwd", &ctx.o_start, &ctx.o_end, n - 2)?;
    let bwd = model.rollout_g(&mut g, &p, "bwd", &ctx.o_end, &ctx.o_start, n - 2)?;
    let build = fuse_g(model, &mut g, &p, &ctx, &fwd, &bwd)?;
    let fused = collect_fuse_output(model, &g, &ctx, &build)?;
    let mut frames = Vec::with_capacity(n);
    frames.push(boundary.start_state.clone());
    frames.extend(fused.interior.frames);
    frames.push(boundary.end_state.clone());
    Ok(MotionSequence::new(frames, model.fps)?)
}

// ---------------------------------------------------------------------------
// Losses and metrics.
// ---------------------------------------------------------------------------

/// Mean-square position error over matching frame lists.
pub fn loss_position<S: Scalar>(gt: &[MotionState<S>], predicted: &[MotionState<S>]) -> S {
    assert_eq!(gt.len(), predicted.len(), "frame counts differ");
    assert!(!gt.is_empty());
    let mut acc = S::zero();
    let mut count = 0usize;
    for (a, b) in gt.iter().zip(predicted) {
        for (pa, pb) in a.positions.iter().zip(&b.positions) {
            for c in 0..3 {
                let d = pa[c] - pb[c];
                acc += d * d;
                count += 1;
            }
        }
    }
    acc / S::from_usize(count).unwrap()
}

/// Least-squares discriminator loss: `0.5 ((1 - d_real)^2 + d_fake^2)`.
pub fn lsgan_discriminator_loss<S: Scalar>(d_real: S, d_fake: S) -> S {
    let one = S::one();
    S::of(0.5) * ((one - d_real) * (one - d_real) + d_fake * d_fake)
}

/// Least-squares generator loss: `(1 - d_fake)^2`.
pub fn lsgan_generator_loss<S: Scalar>(d_fake: S) -> S {
    let one = S::one();
    (one - d_fake) * (one - d_fake)
}

/// Score a real window and a generated window and return `(L_D, L_G)`.
pub fn loss_adversarial<S: Scalar>(
    model: &TransitionModel<S>,
    real_window: &[DirectionFrame<S>],
    fake_window: &[DirectionFrame<S>],
) -> Result<(S, S), NnError> {
    let d_real = model.discriminate(real_window)?;
    let d_fake = model.discriminate(fake_window)?;
    Ok((
        lsgan_discriminator_loss(d_real, d_fake),
        lsgan_generator_loss(d_fake),
    ))
}

/// Per-interior-timestep mean-square error curve of predictions against
/// ground truth; entry `i` covers frame `i + 2` of the transitions.
pub fn position_mse_curve<S: Scalar>(
    gt_interiors: &[Vec<MotionState<S>>],
    predicted_interiors: &[Vec<MotionState<S>>],
) -> Vec<S> {
    assert_eq!(gt_interiors.len(), predicted_interiors.len());
    assert!(!gt_interiors.is_empty());
    let len = gt_interiors[0].len();
    let mut curve = vec![S::zero(); len];
    for (gt, pred) in gt_interiors.iter().zip(predicted_interiors) {
        assert_eq!(gt.len(), len);
        assert_eq!(pred.len(), len);
        for i in 0..len {
            curve[i] += loss_position(&gt[i..=i], &pred[i..=i]);
        }
    }
    let k = S::from_usize(gt_interiors.len()).unwrap();
    for v in &mut curve {
        *v /= k;
    }
    curve
}

/// MSE curve of the model's transitions over supervised held-out windows.
pub fn interpolation_mse<S: Scalar>(
    model: &TransitionModel<S>,
    windows: &[TransitionBoundary<S>],
    n: usize,
    topo: &SkeletonTopology<S>,
) -> Result<Vec<S>, TrainError> {
    let mut gts = Vec::with_capacity(windows.len());
    let mut preds = Vec::with_capacity(windows.len());
    for w in windows {
        let gt = w
            .interior
            .as_ref()
            .expect("interpolation_mse needs supervised windows")
            .clone();
        let seq = interpolate_with_boundary(model, w, n, topo)?;
        preds.push(seq.frames[1..n - 1].to_vec());
        gts.push(gt);
    }
    Ok(position_mse_curve(&gts, &preds))
}

/// Graph-side supervised loss of one transition window: rollouts, decode,
/// fusion, and the position loss against the window's interior target.
/// Public so the whole generator graph can be gradient-checked end to end.
pub fn supervised_loss_graph<S: Scalar>(
    model: &TransitionModel<S>,
    g: &mut Graph<S>,
    p: &BoundParams,
    boundary: &TransitionBoundary<S>,
    topo: &SkeletonTopology<S>,
) -> Result<Value, TrainError> {
    let interior = boundary
        .interior
        .as_ref()
        .expect("supervised loss needs a window with interior ground truth");
    let n = interior.len() + 2;
    let ctx = TransitionContext::build(model, boundary, n, topo)?;
    let fwd = model.rollout_g(g, p, "fwd", &ctx.o_start, &ctx.o_end, n - 2)?;
    let bwd = model.rollout_g(g, p, "bwd", &ctx.o_end, &ctx.o_start, n - 2)?;
    let build = fuse_g(model, g, p, &ctx, &fwd, &bwd)?;
    let mut losses = Vec::with_capacity(n - 2);
    for (i, &pos) in build.positions.iter().enumerate() {
        let tgt = g.input(state_tensor(&interior[i]));
        losses.push(g.mse(pos, tgt)?);
    }
    let sum = g.sum_values(&losses)?;
    Ok(g.scale(sum, S::one() / S::from_usize(n - 2).unwrap()))
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainReport<S: Scalar> {
    /// Mean position loss per epoch (generator supervision).
    pub epoch_pos_loss: Vec<S>,
    /// Mean discriminator loss per epoch.
    pub epoch_disc_loss: Vec<S>,
}

struct PreparedWindow<S: Scalar> {
    boundary: TransitionBoundary<S>,
    targets: Vec<Tensor<S>>,
}

/// Cross-sequence boundary pair: the end state of one window chained onto
/// the (heading-aligned) start state of another, at the first window's exit
/// speed.
fn cross_boundary<S: Scalar>(
    a: &TransitionBoundary<S>,
    b: &TransitionBoundary<S>,
    n: usize,
    topo: &SkeletonTopology<S>,
) -> TransitionBoundary<S> {
    let root = topo.root();
    let heading_of = |v: [S; 2]| -> [S; 2] {
        let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if norm < S::of(1e-9) {
            [S::one(), S::zero()]
        } else {
            [v[0] / norm, v[1] / norm]
        }
    };
    let ha = heading_of(a.end_vel);
    let hb = heading_of(b.start_vel);
    let angle = (hb[0] * ha[1] - hb[1] * ha[0]).atan2(hb[0] * ha[0] + hb[1] * ha[1]);
    let b_root = b.start_state.positions[root];
    let rotated = crate::geom::rotate_state_about_vertical(
        &b.start_state,
        angle,
        [b_root[0], b_root[2]],
    );
    let a_root = a.end_state.positions[root];
    let speed = (a.end_vel[0] * a.end_vel[0] + a.end_vel[1] * a.end_vel[1]).sqrt();
    let gap = speed * S::from_usize(n - 1).unwrap();
    let target = [a_root[0] + ha[0] * gap, a_root[2] + ha[1] * gap];
    let moved = crate::geom::translate_state(
        &rotated,
        [target[0] - b_root[0], S::zero(), target[1] - b_root[2]],
    );
    let vel_mag = (b.start_vel[0] * b.start_vel[0] + b.start_vel[1] * b.start_vel[1]).sqrt();
    TransitionBoundary {
        start_state: a.end_state.clone(),
        end_state: moved,
        start_vel: a.end_vel,
        end_vel: [ha[0] * vel_mag, ha[1] * vel_mag],
        interior: None,
    }
}

/// Alternating adversarial training: each iteration takes one generator step
/// on `L_pos + w L_G` over a supervised batch plus cross-sequence fakes, and
/// one discriminator step on `w L_D` with detached fakes.
pub fn train<S: Scalar>(
    model: &mut TransitionModel<S>,
    split: &DatasetSplit<S>,
    topo: &SkeletonTopology<S>,
    epochs: usize,
    adam: &AdamConfig<S>,
    rng: &mut StdRng,
) -> Result<TrainReport<S>, TrainError> {
    let n = model.cfg.transition_len;
    assert!(n >= 3);
    let stride = (n / 2).max(1);
    let mut windows: Vec<PreparedWindow<S>> = Vec::new();
    for clip in &split.train {
        let frames = &clip.seq.frames;
        let mut start = 0;
        while start + n <= frames.len() {
            let boundary = TransitionBoundary::from_window(&frames[start..start + n], topo, model.fps)?;
            let targets = boundary
                .interior
                .as_ref()
                .unwrap()
                .iter()
                .map(|f| state_tensor(f))
                .collect();
            windows.push(PreparedWindow { boundary, targets });
            start += stride;
        }
    }
    assert!(!windows.is_empty(), "no transition windows in the training set");
    // Direction frames of whole clips feed the discriminator's real windows.
    let clip_dirs: Vec<Vec<DirectionFrame<S>>> = split
        .train
        .iter()
        .map(|c| {
            c.seq
                .frames
                .iter()
                .map(|f| direction_vectors(f, topo))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;

    let batch = model.cfg.batch_size.min(windows.len());
    let iters = windows.len().div_ceil(batch);
    let window_frames = model.cfg.disc_window;
    let interior = n - 2;
    let can_adv = interior >= window_frames;
    let mut report = TrainReport {
        epoch_pos_loss: Vec::with_capacity(epochs),
        epoch_disc_loss: Vec::with_capacity(epochs),
    };

    for epoch in 0..epochs {
        let mut pos_acc = S::zero();
        let mut disc_acc = S::zero();
        for iteration in 0..iters {
            // Generator step: supervised position loss plus adversarial term.
            let mut g = Graph::new();
            let gen_bound = model.gen_store.bind(&mut g);
            let disc_bound = model.disc_store.bind(&mut g);
            let mut pos_losses = Vec::with_capacity(batch);
            for _ in 0..batch {
                let w = &windows[rng.random_range(0..windows.len())];
                let ctx = TransitionContext::build(model, &w.boundary, n, topo)?;
                let fwd =
                    model.rollout_g(&mut g, &gen_bound, "fwd", &ctx.o_start, &ctx.o_end, interior)?;
                let bwd =
                    model.rollout_g(&mut g, &gen_bound, "bwd", &ctx.o_end, &ctx.o_start, interior)?;
                let build = fuse_g(model, &mut g, &gen_bound, &ctx, &fwd, &bwd)?;
                let mut frame_losses = Vec::with_capacity(interior);
                for (i, &pos) in build.positions.iter().enumerate() {
                    let tgt = g.input(w.targets[i].clone());
                    frame_losses.push(g.mse(pos, tgt)?);
                }
                let sum = g.sum_values(&frame_losses)?;
                pos_losses.push(g.scale(sum, S::one() / S::from_usize(interior).unwrap()));
            }
            let pos_sum = g.sum_values(&pos_losses)?;
            let pos_mean = g.scale(pos_sum, S::one() / S::from_usize(batch).unwrap());

            let mut cross_boundaries = Vec::new();
            let loss = if can_adv {
                let mut gen_terms = Vec::with_capacity(model.cfg.adv_batch);
                for _ in 0..model.cfg.adv_batch {
                    let wa = &windows[rng.random_range(0..windows.len())].boundary;
                    let wb = &windows[rng.random_range(0..windows.len())].boundary;
                    let fake = cross_boundary(wa, wb, n, topo);
                    let ctx = TransitionContext::build(model, &fake, n, topo)?;
                    cross_boundaries.push(fake);
                    let fwd =
                        model.rollout_g(&mut g, &gen_bound, "fwd", &ctx.o_start, &ctx.o_end, interior)?;
                    let bwd =
                        model.rollout_g(&mut g, &gen_bound, "bwd", &ctx.o_end, &ctx.o_start, interior)?;
                    let build = fuse_g(model, &mut g, &gen_bound, &ctx, &fwd, &bwd)?;
                    let ws = rng.random_range(0..=interior - window_frames);
                    let mut flat = Vec::with_capacity(window_frames);
                    for k in 0..window_frames {
                        flat.push(g.reshape(build.dirs[ws + k], vec![3 * (model.joints - 1)])?);
                    }
                    let window = g.concat(&flat)?;
                    let d_fake = model.discriminate_g(&mut g, &disc_bound, window)?;
                    let one = g.scalar_const(S::one());
                    let diff = g.sub(one, d_fake)?;
                    gen_terms.push(g.mul(diff, diff)?);
                }
                let adv_sum = g.sum_values(&gen_terms)?;
                let adv_mean = g.scale(
                    adv_sum,
                    model.cfg.adv_weight / S::from_usize(model.cfg.adv_batch).unwrap(),
                );
                g.add(pos_mean, adv_mean)?
            } else {
                pos_mean
            };
            let pos_value = g.item(pos_mean);
            if !g.item(loss).is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, iteration });
            }
            pos_acc += pos_value;
            let grads = g.backward(loss)?;
            model.gen_store.absorb_grads(&gen_bound, &grads);
            model.gen_store.adam_step(adam)?;

            // Discriminator step on detached fakes and real clip windows.
            if can_adv {
                let mut g = Graph::new();
                let disc_bound = model.disc_store.bind(&mut g);
                let mut terms = Vec::with_capacity(model.cfg.adv_batch);
                for fake in &cross_boundaries {
                    let seq = interpolate_with_boundary(model, fake, n, topo)?;
                    let fake_dirs: Vec<DirectionFrame<S>> = seq.frames[1..n - 1]
                        .iter()
                        .map(|f| direction_vectors(f, topo))
                        .collect::<Result<_, _>>()?;
                    let ws = rng.random_range(0..=interior - window_frames);
                    let fake_flat =
                        flatten_window(&fake_dirs[ws..ws + window_frames], window_frames, 3 * (model.joints - 1))?;
                    let clip = &clip_dirs[rng.random_range(0..clip_dirs.len())];
                    let rs = rng.random_range(0..=clip.len() - window_frames);
                    let real_flat =
                        flatten_window(&clip[rs..rs + window_frames], window_frames, 3 * (model.joints - 1))?;
                    let fw = g.input(fake_flat);
                    let rw = g.input(real_flat);
                    let d_fake = self_disc(model, &mut g, &disc_bound, fw)?;
                    let d_real = self_disc(model, &mut g, &disc_bound, rw)?;
                    let one = g.scalar_const(S::one());
                    let miss = g.sub(one, d_real)?;
                    let miss2 = g.mul(miss, miss)?;
                    let fake2 = g.mul(d_fake, d_fake)?;
                    let pair = g.add(miss2, fake2)?;
                    terms.push(g.scale(pair, S::of(0.5)));
                }
                let sum = g.sum_values(&terms)?;
                let d_loss = g.scale(
                    sum,
                    model.cfg.adv_weight / S::from_usize(model.cfg.adv_batch).unwrap(),
                );
                let d_value = g.item(d_loss);
                if !d_value.is_finite() {
                    return Err(TrainError::NonFiniteLoss { epoch, iteration });
                }
                disc_acc += d_value;
                let grads = g.backward(d_loss)?;
                model.disc_store.absorb_grads(&disc_bound, &grads);
                model.disc_store.adam_step(adam)?;
            }
        }
        model.gen_store.end_epoch();
        model.disc_store.end_epoch();
        let itf = S::from_usize(iters).unwrap();
        report.epoch_pos_loss.push(pos_acc / itf);
        report.epoch_disc_loss.push(disc_acc / itf);
    }
    Ok(report)
}

fn self_disc<S: Scalar>(
    model: &TransitionModel<S>,
    g: &mut Graph<S>,
    p: &BoundParams,
    window: Value,
) -> Result<Value, NnError> {
    model.discriminate_g(g, p, window)
}

fn state_tensor<S: Scalar>(state: &MotionState<S>) -> Tensor<S> {
    let mut data = Vec::with_capacity(state.joint_count() * 3);
    for p in &state.positions {
        data.extend_from_slice(p);
    }
    Tensor::new(vec![state.joint_count(), 3], data).unwrap()
}

/// Fraction of windows the discriminator classifies correctly (reals above
/// one half, fakes below).
pub fn discriminator_accuracy<S: Scalar>(
    model: &TransitionModel<S>,
    real_windows: &[Vec<DirectionFrame<S>>],
    fake_windows: &[Vec<DirectionFrame<S>>],
) -> Result<S, NnError> {
    let mut correct = 0usize;
    let half = S::of(0.5);
    for w in real_windows {
        if model.discriminate(w)? > half {
            correct += 1;
        }
    }
    for w in fake_windows {
        if model.discriminate(w)? < half {
            correct += 1;
        }
    }
    Ok(S::from_usize(correct).unwrap()
        / S::from_usize(real_windows.len() + fake_windows.len()).unwrap())
}
