//! Short-range motion generation: a content/style disentangling auto-encoder
//! with bi-linear fusion, its four training losses, and style transfer
//! between clips.
//!
//! Content features hold the per-frame action (with the raw moving route as
//! their leading channels, skipped past the encoder); style features are
//! pushed toward time-constancy by the consistency loss. A clip is rebuilt
//! per timestep as `decoder(bilinear(content_t, style_t))`.

use rand::rngs::StdRng;
use rand::Rng;
use thiserror::Error;

use crate::dataset::{DataError, DatasetSplit, MotionClip, ROUTE_DIM, ROUTE_ROOT_POS};
use crate::geom::{MotionSequence, MotionState, SkeletonTopology};
use crate::nn::{
    parse_blocks, uniform_init, write_blocks, AdamConfig, BoundParams, Graph, NnError, ParamStore,
    Tensor, Value, LEAKY_SLOPE,
};
use crate::scalar::Scalar;

/// Kernel width of every style-encoder convolution.
pub const STYLE_KERNEL: usize = 11;

/// Content-encoder kernels: a pointwise lift then a width-3 window.
pub const CONTENT_KERNELS: [usize; 2] = [1, 3];

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at epoch {epoch}, iteration {iteration}")]
    NonFiniteLoss { epoch: usize, iteration: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Loss term weights; defaults follow the combined training objective
/// `rec + 0.01 cst + 0.5 rte + trn`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<S: Scalar> {
    pub rec: S,
    pub cst: S,
    pub rte: S,
    pub trn: S,
}

impl<S: Scalar> Default for LossWeights<S> {
    fn default() -> Self {
        LossWeights {
            rec: S::one(),
            cst: S::of(0.01),
            rte: S::of(0.5),
            trn: S::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShortRangeConfig<S: Scalar> {
    /// Learned content channels; the 16 route channels ride on top of these.
    pub content_channels: usize,
    pub style_channels: usize,
    /// Output width of the bi-linear fusion.
    pub fused_channels: usize,
    pub content_hidden: usize,
    pub style_hidden: usize,
    pub decoder_hidden: usize,
    pub clip_len: usize,
    pub batch_size: usize,
    pub weights: LossWeights<S>,
}

impl<S: Scalar> Default for ShortRangeConfig<S> {
    fn default() -> Self {
        ShortRangeConfig {
            content_channels: 16,
            style_channels: 16,
            fused_channels: 64,
            content_hidden: 32,
            style_hidden: 24,
            decoder_hidden: 32,
            clip_len: 120,
            batch_size: 8,
            weights: LossWeights::default(),
        }
    }
}

impl<S: Scalar> ShortRangeConfig<S> {
    /// Desk-scale dimensions for fast training runs and gradient checks.
    pub fn tiny(clip_len: usize) -> Self {
        ShortRangeConfig {
            content_channels: 6,
            style_channels: 4,
            fused_channels: 8,
            content_hidden: 8,
            style_hidden: 6,
            decoder_hidden: 8,
            clip_len,
            batch_size: 8,
            weights: LossWeights::default(),
        }
    }

    /// Full content width: learned channels plus the route block.
    pub fn content_total(&self) -> usize {
        self.content_channels + ROUTE_DIM
    }
}

/// Per-channel standardization statistics, fit over the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization<S: Scalar> {
    pub mean: Vec<S>,
    pub std: Vec<S>,
}

impl<S: Scalar> Normalization<S> {
    pub fn identity(channels: usize) -> Self {
        Normalization {
            mean: vec![S::zero(); channels],
            std: vec![S::one(); channels],
        }
    }

    pub fn fit(matrices: &[Tensor<S>]) -> Self {
        assert!(!matrices.is_empty(), "fit needs at least one clip");
        let channels = matrices[0].dim(0);
        let mut mean = vec![S::zero(); channels];
        let mut count = S::zero();
        for m in matrices {
            let cols = m.dim(1);
            for ch in 0..channels {
                for t in 0..cols {
                    mean[ch] += m.at2(ch, t);
                }
            }
            count += S::from_usize(cols).unwrap();
        }
        for v in &mut mean {
            *v /= count;
        }
        let mut var = vec![S::zero(); channels];
        for m in matrices {
            let cols = m.dim(1);
            for ch in 0..channels {
                for t in 0..cols {
                    let d = m.at2(ch, t) - mean[ch];
                    var[ch] += d * d;
                }
            }
        }
        let floor = S::of(1e-6);
        let std = var
            .into_iter()
            .map(|v| (v / count).sqrt().max(floor))
            .collect();
        Normalization { mean, std }
    }

    pub fn normalize(&self, m: &Tensor<S>) -> Tensor<S> {
        let (channels, cols) = (m.dim(0), m.dim(1));
        let mut out = vec![S::zero(); channels * cols];
        for ch in 0..channels {
            for t in 0..cols {
                out[ch * cols + t] = (m.at2(ch, t) - self.mean[ch]) / self.std[ch];
            }
        }
        Tensor::new(vec![channels, cols], out).unwrap()
    }

    pub fn denormalize(&self, m: &Tensor<S>) -> Tensor<S> {
        let (channels, cols) = (m.dim(0), m.dim(1));
        let mut out = vec![S::zero(); channels * cols];
        for ch in 0..channels {
            for t in 0..cols {
                out[ch * cols + t] = m.at2(ch, t) * self.std[ch] + self.mean[ch];
            }
        }
        Tensor::new(vec![channels, cols], out).unwrap()
    }
}

/// The auto-encoder: two temporal-conv encoders, a bi-linear fusion weight,
/// and a mirrored conv decoder, plus the dataset normalization baked in at
/// training time.
#[derive(Debug, Clone)]
pub struct ShortRangeModel<S: Scalar> {
    pub cfg: ShortRangeConfig<S>,
    pub joints: usize,
    pub fps: S,
    pub norm: Normalization<S>,
    pub store: ParamStore<S>,
}

impl<S: Scalar> ShortRangeModel<S> {
    pub fn channels(&self) -> usize {
        ROUTE_DIM + 3 * self.joints
    }

    pub fn new(cfg: ShortRangeConfig<S>, joints: usize, fps: S, rng: &mut StdRng) -> Self {
        let in_ch = ROUTE_DIM + 3 * joints;
        let mut store = ParamStore::new();
        let conv = |store: &mut ParamStore<S>, name: &str, co: usize, ci: usize, k: usize, rng: &mut StdRng| {
            store
                .insert(format!("{name}.w"), uniform_init(vec![co, ci, k], ci * k, co * k, rng))
                .unwrap();
            store
                .insert(format!("{name}.b"), Tensor::zeros(vec![co]))
                .unwrap();
        };
        conv(&mut store, "enc_c.l1", cfg.content_hidden, in_ch, CONTENT_KERNELS[0], rng);
        conv(&mut store, "enc_c.l2", cfg.content_channels, cfg.content_hidden, CONTENT_KERNELS[1], rng);
        conv(&mut store, "enc_s.l1", cfg.style_hidden, in_ch, STYLE_KERNEL, rng);
        conv(&mut store, "enc_s.l2", cfg.style_hidden, cfg.style_hidden, STYLE_KERNEL, rng);
        conv(&mut store, "enc_s.l3", cfg.style_hidden, cfg.style_hidden, STYLE_KERNEL, rng);
        conv(&mut store, "enc_s.l4", cfg.style_channels, cfg.style_hidden, STYLE_KERNEL, rng);
        store
            .insert(
                "fuse.w",
                uniform_init(
                    vec![cfg.content_total(), cfg.fused_channels, cfg.style_channels],
                    cfg.content_total() * cfg.style_channels,
                    cfg.fused_channels,
                    rng,
                ),
            )
            .unwrap();
        conv(&mut store, "dec.l1", cfg.decoder_hidden, cfg.fused_channels, CONTENT_KERNELS[1], rng);
        conv(&mut store, "dec.l2", in_ch, cfg.decoder_hidden, CONTENT_KERNELS[0], rng);
        ShortRangeModel {
            cfg,
            joints,
            fps,
            norm: Normalization::identity(in_ch),
            store,
        }
    }

    /// Channel matrix of a clip: 16 route rows, then per joint the positions
    /// relative to the same frame's root horizontal position.
    pub fn clip_channels(&self, clip: &MotionClip<S>, topo: &SkeletonTopology<S>) -> Tensor<S> {
        clip_channels(clip, topo)
    }

    fn conv_block(
        &self,
        g: &mut Graph<S>,
        p: &BoundParams,
        name: &str,
        x: Value,
    ) -> Result<Value, NnError> {
        g.conv1d(x, p.value(&format!("{name}.w")), p.value(&format!("{name}.b")))
    }

    /// Content features of a normalized channel matrix: route rows carried
    /// through unchanged, learned rows from the two-layer conv stack.
    pub fn content_features_g(
        &self,
        g: &mut Graph<S>,
        p: &BoundParams,
        x: Value,
    ) -> Result<Value, NnError> {
        let route = g.row_slice(x, 0, ROUTE_DIM)?;
        let h = self.conv_block(g, p, "enc_c.l1", x)?;
        let h = g.leaky_relu(h, S::of(LEAKY_SLOPE));
        let h = self.conv_block(g, p, "enc_c.l2", h)?;
        let learned = g.tanh(h);
        g.row_concat(&[route, learned])
    }

    /// Style features: four width-11 temporal convolutions.
    pub fn style_features_g(
        &self,
        g: &mut Graph<S>,
        p: &BoundParams,
        x: Value,
    ) -> Result<Value, NnError> {
        let mut h = self.conv_block(g, p, "enc_s.l1", x)?;
        h = g.leaky_relu(h, S::of(LEAKY_SLOPE));
        h = self.conv_block(g, p, "enc_s.l2", h)?;
        h = g.leaky_relu(h, S::of(LEAKY_SLOPE));
        h = self.conv_block(g, p, "enc_s.l3", h)?;
        h = g.leaky_relu(h, S::of(LEAKY_SLOPE));
        h = self.conv_block(g, p, "enc_s.l4", h)?;
        Ok(g.tanh(h))
    }

    /// Per-timestep bi-linear fusion followed by the mirrored conv decoder.
    pub fn decode_g(
        &self,
        g: &mut Graph<S>,
        p: &BoundParams,
        content: Value,
        style: Value,
    ) -> Result<Value, NnError> {
        let fused = g.bilinear_seq(content, p.value("fuse.w"), style)?;
        let h = self.conv_block(g, p, "dec.l1", fused)?;
        let h = g.leaky_relu(h, S::of(LEAKY_SLOPE));
        self.conv_block(g, p, "dec.l2", h)
    }

    fn run_forward<F>(&self, build: F) -> Result<Tensor<S>, NnError>
    where
        F: FnOnce(&Self, &mut Graph<S>, &BoundParams) -> Result<Value, NnError>,
    {
        let mut g = Graph::new();
        let bound = self.store.bind(&mut g);
        let out = build(self, &mut g, &bound)?;
        Ok(g.value(out).clone())
    }

    /// Content features of a clip, `[content_total, M]`.
    pub fn encode_content(
        &self,
        clip: &MotionClip<S>,
        topo: &SkeletonTopology<S>,
    ) -> Result<Tensor<S>, NnError> {
        let x = self.norm.normalize(&clip_channels(clip, topo));
        self.run_forward(|m, g, p| {
            let xv = g.input(x.clone());
            m.content_features_g(g, p, xv)
        })
    }

    /// Style features of a clip, `[style_channels, M]`.
    pub fn encode_style(
        &self,
        clip: &MotionClip<S>,
        topo: &SkeletonTopology<S>,
    ) -> Result<Tensor<S>, NnError> {
        let x = self.norm.normalize(&clip_channels(clip, topo));
        self.run_forward(|m, g, p| {
            let xv = g.input(x.clone());
            m.style_features_g(g, p, xv)
        })
    }

    /// Decode fused features back to a clip anchored at `anchor` (ground
    /// position of the first-frame root). The route comes from the decoded
    /// control channels, not from re-measuring the positions.
    pub fn fuse_decode(
        &self,
        content: &Tensor<S>,
        style: &Tensor<S>,
        anchor: [S; 2],
        topo: &SkeletonTopology<S>,
    ) -> Result<MotionClip<S>, NnError> {
        let decoded = self.run_forward(|m, g, p| {
            let c = g.input(content.clone());
            let s = g.input(style.clone());
            m.decode_g(g, p, c, s)
        })?;
        let denorm = self.norm.denormalize(&decoded);
        Ok(channels_to_clip(&denorm, anchor, self.fps, topo))
    }

    /// Recombine the content of one clip with the style of another.
    pub fn transfer_style(
        &self,
        content_clip: &MotionClip<S>,
        style_clip: &MotionClip<S>,
        topo: &SkeletonTopology<S>,
    ) -> Result<MotionClip<S>, NnError> {
        let content = self.encode_content(content_clip, topo)?;
        let style = self.encode_style(style_clip, topo)?;
        let root = topo.root();
        let first = content_clip.seq.frames[0].positions[root];
        self.fuse_decode(&content, &style, [first[0], first[2]], topo)
    }

    /// Mean over channels of the temporal standard deviation of the style
    /// features; low values mean the style code stays constant over the clip.
    pub fn style_temporal_std(
        &self,
        clip: &MotionClip<S>,
        topo: &SkeletonTopology<S>,
    ) -> Result<S, NnError> {
        let style = self.encode_style(clip, topo)?;
        let (c, m) = (style.dim(0), style.dim(1));
        let mf = S::from_usize(m).unwrap();
        let mut acc = S::zero();
        for ch in 0..c {
            let mut mean = S::zero();
            for t in 0..m {
                mean += style.at2(ch, t);
            }
            mean /= mf;
            let mut var = S::zero();
            for t in 0..m {
                let d = style.at2(ch, t) - mean;
                var += d * d;
            }
            acc += (var / mf).sqrt();
        }
        Ok(acc / S::from_usize(c).unwrap())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), NnError> {
        let mut blocks = vec![
            ("meta".to_string(), self.meta_tensor()),
            (
                "norm.mean".to_string(),
                Tensor::vector(self.norm.mean.clone()),
            ),
            (
                "norm.std".to_string(),
                Tensor::vector(self.norm.std.clone()),
            ),
        ];
        blocks.extend(self.store.to_blocks());
        std::fs::write(
            path,
            write_blocks(&blocks, self.store.step(), self.store.epoch()),
        )?;
        Ok(())
    }

    fn meta_tensor(&self) -> Tensor<S> {
        let c = &self.cfg;
        let w = &c.weights;
        Tensor::vector(vec![
            S::from_usize(self.joints).unwrap(),
            S::from_usize(c.content_channels).unwrap(),
            S::from_usize(c.style_channels).unwrap(),
            S::from_usize(c.fused_channels).unwrap(),
            S::from_usize(c.content_hidden).unwrap(),
            S::from_usize(c.style_hidden).unwrap(),
            S::from_usize(c.decoder_hidden).unwrap(),
            S::from_usize(c.clip_len).unwrap(),
            S::from_usize(c.batch_size).unwrap(),
            self.fps,
            w.rec,
            w.cst,
            w.rte,
            w.trn,
        ])
    }

    pub fn load(path: &std::path::Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path)?;
        let ckpt = parse_blocks::<S>(&text)?;
        let mut meta = None;
        let mut mean = None;
        let mut std = None;
        let mut rest = Vec::new();
        for (name, tensor) in ckpt.blocks {
            match name.as_str() {
                "meta" => meta = Some(tensor),
                "norm.mean" => mean = Some(tensor),
                "norm.std" => std = Some(tensor),
                _ => rest.push((name, tensor)),
            }
        }
        let meta = meta.ok_or_else(|| NnError::Checkpoint("missing meta block".into()))?;
        if meta.len() != 14 {
            return Err(NnError::Checkpoint("meta block has wrong arity".into()));
        }
        let d = meta.data();
        let us = |v: S| v.to_f64_lossy().round() as usize;
        let cfg = ShortRangeConfig {
            content_channels: us(d[1]),
            style_channels: us(d[2]),
            fused_channels: us(d[3]),
            content_hidden: us(d[4]),
            style_hidden: us(d[5]),
            decoder_hidden: us(d[6]),
            clip_len: us(d[7]),
            batch_size: us(d[8]),
            weights: LossWeights {
                rec: d[10],
                cst: d[11],
                rte: d[12],
                trn: d[13],
            },
        };
        let norm = Normalization {
            mean: mean
                .ok_or_else(|| NnError::Checkpoint("missing norm.mean".into()))?
                .data()
                .to_vec(),
            std: std
                .ok_or_else(|| NnError::Checkpoint("missing norm.std".into()))?
                .data()
                .to_vec(),
        };
        Ok(ShortRangeModel {
            cfg,
            joints: us(d[0]),
            fps: d[9],
            norm,
            store: ParamStore::from_blocks(rest, ckpt.step, ckpt.epoch)?,
        })
    }
}

/// Channel matrix of a clip: `[16 + 3J, M]`, route rows first.
pub fn clip_channels<S: Scalar>(clip: &MotionClip<S>, topo: &SkeletonTopology<S>) -> Tensor<S> {
    let m = clip.len();
    let j = topo.joint_count();
    let channels = ROUTE_DIM + 3 * j;
    let root = topo.root();
    let mut out = vec![S::zero(); channels * m];
    for t in 0..m {
        for c in 0..ROUTE_DIM {
            out[c * m + t] = clip.route[t][c];
        }
        let rp = clip.seq.frames[t].positions[root];
        for joint in 0..j {
            let p = clip.seq.frames[t].positions[joint];
            let rel = [p[0] - rp[0], p[1], p[2] - rp[2]];
            for c in 0..3 {
                out[(ROUTE_DIM + 3 * joint + c) * m + t] = rel[c];
            }
        }
    }
    Tensor::new(vec![channels, m], out).unwrap()
}

/// Rebuild a clip from a decoded channel matrix. The root track comes from
/// the decoded route (relative to `anchor`); the returned route is the
/// decoded control signal itself.
pub fn channels_to_clip<S: Scalar>(
    channels: &Tensor<S>,
    anchor: [S; 2],
    fps: S,
    topo: &SkeletonTopology<S>,
) -> MotionClip<S> {
    let m = channels.dim(1);
    let j = topo.joint_count();
    let root = topo.root();
    let mut frames = Vec::with_capacity(m);
    let mut route = Vec::with_capacity(m);
    for t in 0..m {
        let mut row = [S::zero(); ROUTE_DIM];
        for c in 0..ROUTE_DIM {
            row[c] = channels.at2(c, t);
        }
        route.push(row);
        let rx = anchor[0] + row[ROUTE_ROOT_POS];
        let rz = anchor[1] + row[ROUTE_ROOT_POS + 1];
        let mut positions = Vec::with_capacity(j);
        for joint in 0..j {
            let rel = [
                channels.at2(ROUTE_DIM + 3 * joint, t),
                channels.at2(ROUTE_DIM + 3 * joint + 1, t),
                channels.at2(ROUTE_DIM + 3 * joint + 2, t),
            ];
            positions.push([rel[0] + rx, rel[1], rel[2] + rz]);
        }
        // The root row decodes to its own relative offset; pin it exactly.
        positions[root] = [rx, positions[root][1], rz];
        frames.push(MotionState::new(positions));
    }
    let seq = MotionSequence::new(frames, fps).expect("decoded frames share J");
    let travel_distance = crate::dataset::travel_distance(&seq, topo);
    MotionClip {
        seq,
        route,
        travel_distance,
    }
}

// ---------------------------------------------------------------------------
// Losses.
// ---------------------------------------------------------------------------

/// Sum of squared differences divided by element count.
pub fn mean_square_diff<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> S {
    assert_eq!(a.shape(), b.shape(), "mean_square_diff shapes");
    let mut acc = S::zero();
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = x - y;
        acc += d * d;
    }
    acc / S::from_usize(a.len()).unwrap()
}

/// Reconstruction error over the pose block of two channel matrices.
pub fn loss_reconstruction<S: Scalar>(target_pose: &Tensor<S>, predicted_pose: &Tensor<S>) -> S {
    mean_square_diff(target_pose, predicted_pose)
}

/// Control-signal error over the route block.
pub fn loss_route<S: Scalar>(route: &Tensor<S>, predicted: &Tensor<S>) -> S {
    mean_square_diff(route, predicted)
}

/// Distance between the style features of two random timesteps.
pub fn loss_style_consistency<S: Scalar, R: Rng>(style: &Tensor<S>, rng: &mut R) -> S {
    let (c, m) = (style.dim(0), style.dim(1));
    let i = rng.random_range(0..m);
    let j = rng.random_range(0..m);
    let mut acc = S::zero();
    for ch in 0..c {
        let d = style.at2(ch, i) - style.at2(ch, j);
        acc += d * d;
    }
    acc / S::from_usize(c).unwrap()
}

/// Time-major Gram matrix of a `[channels, M]` feature tensor.
pub fn time_gram<S: Scalar>(features: &Tensor<S>) -> Tensor<S> {
    let (c, m) = (features.dim(0), features.dim(1));
    let mut out = vec![S::zero(); m * m];
    for a in 0..m {
        for b in a..m {
            let mut acc = S::zero();
            for ch in 0..c {
                acc += features.at2(ch, a) * features.at2(ch, b);
            }
            out[a * m + b] = acc;
            out[b * m + a] = acc;
        }
    }
    Tensor::new(vec![m, m], out).unwrap()
}

/// Cross-transfer consistency: generate from (content of `clip_m`, style of
/// `clip_n`), re-encode the output, and compare content directly and style
/// through its Gram statistics.
pub fn loss_transfer<S: Scalar>(
    model: &ShortRangeModel<S>,
    clip_m: &MotionClip<S>,
    clip_n: &MotionClip<S>,
    topo: &SkeletonTopology<S>,
) -> Result<S, NnError> {
    let content_m = model.encode_content(clip_m, topo)?;
    let style_n = model.encode_style(clip_n, topo)?;
    let root = topo.root();
    let first = clip_m.seq.frames[0].positions[root];
    let generated = model.fuse_decode(&content_m, &style_n, [first[0], first[2]], topo)?;
    let content_hat = model.encode_content(&generated, topo)?;
    let style_hat = model.encode_style(&generated, topo)?;
    let content_term = mean_square_diff(&content_m, &content_hat);
    let gram_term = mean_square_diff(&time_gram(&style_n), &time_gram(&style_hat));
    Ok(content_term + gram_term)
}

/// The four loss components of one training pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents<S: Scalar> {
    pub rec: S,
    pub cst: S,
    pub rte: S,
    pub trn: S,
}

/// Combined objective: `rec + 0.01 cst + 0.5 rte + trn`.
pub fn loss_total<S: Scalar>(c: &LossComponents<S>) -> S {
    c.rec + S::of(0.01) * c.cst + S::of(0.5) * c.rte + c.trn
}

/// Averaged per-frame, per-coordinate standard deviation across a clip set
/// aligned by frame index. Higher means more diverse output.
pub fn diversity<S: Scalar>(clips: &[MotionClip<S>]) -> S {
    assert!(!clips.is_empty(), "diversity of an empty set");
    let m = clips[0].len();
    let j = clips[0].seq.joint_count();
    let k = S::from_usize(clips.len()).unwrap();
    let mut acc = S::zero();
    for t in 0..m {
        for joint in 0..j {
            for c in 0..3 {
                let mut lo = S::infinity();
                let mut hi = S::neg_infinity();
                let mut mean = S::zero();
                for clip in clips {
                    let v = clip.seq.frames[t].positions[joint][c];
                    lo = lo.min(v);
                    hi = hi.max(v);
                    mean += v;
                }
                // Identical samples spread exactly zero; skip the round-off
                // the mean subtraction would otherwise leave behind.
                if lo == hi {
                    continue;
                }
                mean /= k;
                let mut var = S::zero();
                for clip in clips {
                    let d = clip.seq.frames[t].positions[joint][c] - mean;
                    var += d * d;
                }
                acc += (var / k).sqrt();
            }
        }
    }
    acc / S::from_usize(m * j * 3).unwrap()
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainReport<S: Scalar> {
    /// Mean combined loss per epoch.
    pub epoch_loss: Vec<S>,
}

/// Graph-side loss of one (content source, style source) pair of normalized
/// channel matrices. Returns the weighted total; gradients flow through
/// generation and re-encoding. Public so the whole model graph can be
/// gradient-checked end to end.
pub fn training_loss_graph<S: Scalar>(
    model: &ShortRangeModel<S>,
    g: &mut Graph<S>,
    p: &BoundParams,
    x_m: &Tensor<S>,
    x_n: &Tensor<S>,
    cst_pair: (usize, usize),
) -> Result<Value, NnError> {
    let pose_rows = 3 * model.joints;
    let xm = g.input(x_m.clone());
    let xn = g.input(x_n.clone());

    let content_m = model.content_features_g(g, p, xm)?;
    let style_m = model.style_features_g(g, p, xm)?;
    let recon = model.decode_g(g, p, content_m, style_m)?;

    let rec_t = g.row_slice(xm, ROUTE_DIM, pose_rows)?;
    let rec_p = g.row_slice(recon, ROUTE_DIM, pose_rows)?;
    let l_rec = g.mse(rec_t, rec_p)?;

    let rte_t = g.row_slice(xm, 0, ROUTE_DIM)?;
    let rte_p = g.row_slice(recon, 0, ROUTE_DIM)?;
    let l_rte = g.mse(rte_t, rte_p)?;

    let col_i = g.col(style_m, cst_pair.0)?;
    let col_j = g.col(style_m, cst_pair.1)?;
    let l_cst = g.mse(col_i, col_j)?;

    let style_n = model.style_features_g(g, p, xn)?;
    let generated = model.decode_g(g, p, content_m, style_n)?;
    let content_hat = model.content_features_g(g, p, generated)?;
    let style_hat = model.style_features_g(g, p, generated)?;
    let l_content = g.mse(content_m, content_hat)?;
    let sn_t = g.transpose(style_n)?;
    let sh_t = g.transpose(style_hat)?;
    let gram_n = g.gram(sn_t)?;
    let gram_hat = g.gram(sh_t)?;
    let l_gram = g.mse(gram_n, gram_hat)?;
    let l_trn = g.add(l_content, l_gram)?;

    let w = &model.cfg.weights;
    let wrec = g.scale(l_rec, w.rec);
    let wcst = g.scale(l_cst, w.cst);
    let wrte = g.scale(l_rte, w.rte);
    let wtrn = g.scale(l_trn, w.trn);
    g.sum_values(&[wrec, wcst, wrte, wtrn])
}

/// Train the auto-encoder on the training side of `split`. Fits the channel
/// normalization first, then runs `epochs` passes of freshly-sampled
/// (content, style) batch pairs. Deterministic for a fixed seed.
pub fn train<S: Scalar>(
    model: &mut ShortRangeModel<S>,
    split: &DatasetSplit<S>,
    topo: &SkeletonTopology<S>,
    epochs: usize,
    adam: &AdamConfig<S>,
    rng: &mut StdRng,
) -> Result<TrainReport<S>, TrainError> {
    assert!(!split.train.is_empty(), "training set is empty");
    let raw: Vec<Tensor<S>> = split
        .train
        .iter()
        .map(|c| clip_channels(c, topo))
        .collect();
    model.norm = Normalization::fit(&raw);
    let xs: Vec<Tensor<S>> = raw.iter().map(|m| model.norm.normalize(m)).collect();
    let n = xs.len();
    let batch = model.cfg.batch_size.min(n);
    let iters = n.div_ceil(batch);
    let m_frames = xs[0].dim(1);

    let mut report = TrainReport {
        epoch_loss: Vec::with_capacity(epochs),
    };
    for epoch in 0..epochs {
        let mut epoch_acc = S::zero();
        for iteration in 0..iters {
            let mut g = Graph::new();
            let bound = model.store.bind(&mut g);
            let mut members = Vec::with_capacity(batch);
            for _ in 0..batch {
                let m_idx = rng.random_range(0..n);
                let n_idx = rng.random_range(0..n);
                let pair = (
                    rng.random_range(0..m_frames),
                    rng.random_range(0..m_frames),
                );
                members.push(training_loss_graph(model, &mut g, &bound, &xs[m_idx], &xs[n_idx], pair)?);
            }
            let total = g.sum_values(&members)?;
            let loss = g.scale(total, S::one() / S::from_usize(batch).unwrap());
            let value = g.item(loss);
            if !value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, iteration });
            }
            epoch_acc += value;
            let grads = g.backward(loss)?;
            model.store.absorb_grads(&bound, &grads);
            model.store.adam_step(adam)?;
        }
        model.store.end_epoch();
        report.epoch_loss.push(epoch_acc / S::from_usize(iters).unwrap());
    }
    Ok(report)
}
