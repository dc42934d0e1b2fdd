//! Trainable parameter store, Adam with decoupled weight decay, and the
//! text checkpoint format.

use std::path::Path;

use rand::Rng;

use crate::nn::graph::{BoundParams, Gradients, Graph};
use crate::nn::{NnError, Tensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<S: Scalar> {
    pub learning_rate: S,
    /// Per-epoch multiplier applied to the learning rate.
    pub lr_decay: S,
    /// Decoupled weight decay, applied to parameters directly.
    pub weight_decay: S,
    pub beta1: S,
    pub beta2: S,
    pub epsilon: S,
}

impl<S: Scalar> Default for AdamConfig<S> {
    fn default() -> Self {
        AdamConfig {
            learning_rate: S::of(5e-4),
            lr_decay: S::of(0.97),
            weight_decay: S::of(1e-5),
            beta1: S::of(0.9),
            beta2: S::of(0.999),
            epsilon: S::of(1e-8),
        }
    }
}

#[derive(Debug, Clone)]
struct ParamEntry<S: Scalar> {
    name: String,
    tensor: Tensor<S>,
    m: Vec<S>,
    v: Vec<S>,
}

/// Ordered collection of named trainable tensors plus optimizer state.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<S: Scalar> {
    entries: Vec<ParamEntry<S>>,
    step: u64,
    epoch: u64,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            entries: Vec::new(),
            step: 0,
            epoch: 0,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, mut tensor: Tensor<S>) -> Result<(), NnError> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(NnError::DuplicateParam(name));
        }
        let len = tensor.len();
        tensor.requires_grad = true;
        self.entries.push(ParamEntry {
            name,
            tensor,
            m: vec![S::zero(); len],
            v: vec![S::zero(); len],
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<S>> {
        self.entries
            .iter_mut()
            .find(|e| e.name == name)
            .map(|e| &mut e.tensor)
    }

    /// Insert every parameter into `g` as a leaf and remember the mapping.
    pub fn bind(&self, g: &mut Graph<S>) -> BoundParams {
        let values = self
            .entries
            .iter()
            .map(|e| (e.name.clone(), g.input(e.tensor.clone())))
            .collect();
        BoundParams { values }
    }

    /// Copy gradients of a backward pass into the parameter grad slots.
    /// Parameters that did not influence the loss get zero gradients.
    pub fn absorb_grads(&mut self, bound: &BoundParams, grads: &Gradients<S>) {
        for (entry, (name, value)) in self.entries.iter_mut().zip(&bound.values) {
            debug_assert_eq!(&entry.name, name, "bound params out of sync with store");
            let len = entry.tensor.len();
            entry.tensor.grad = Some(match grads.get(*value) {
                Some(g) => g.to_vec(),
                None => vec![S::zero(); len],
            });
        }
    }

    pub fn clear_grads(&mut self) {
        for e in &mut self.entries {
            e.tensor.grad = None;
        }
    }

    /// Bias-corrected Adam step with decoupled weight decay. The effective
    /// learning rate is `learning_rate * lr_decay^epoch`.
    pub fn adam_step(&mut self, cfg: &AdamConfig<S>) -> Result<(), NnError> {
        self.step += 1;
        let t = self.step;
        let eff_lr = cfg.learning_rate * cfg.lr_decay.powi(self.epoch as i32);
        let bc1 = S::one() - cfg.beta1.powi(t as i32);
        let bc2 = S::one() - cfg.beta2.powi(t as i32);
        for e in &mut self.entries {
            let grad = e
                .tensor
                .grad
                .as_ref()
                .ok_or_else(|| NnError::MissingGrad(e.name.clone()))?
                .clone();
            let data = e.tensor.data_mut();
            for i in 0..grad.len() {
                let g = grad[i];
                e.m[i] = cfg.beta1 * e.m[i] + (S::one() - cfg.beta1) * g;
                e.v[i] = cfg.beta2 * e.v[i] + (S::one() - cfg.beta2) * g * g;
                let m_hat = e.m[i] / bc1;
                let v_hat = e.v[i] / bc2;
                data[i] = data[i]
                    - eff_lr * m_hat / (v_hat.sqrt() + cfg.epsilon)
                    - eff_lr * cfg.weight_decay * data[i];
            }
        }
        Ok(())
    }

    /// Advance the epoch counter, shrinking the effective learning rate.
    pub fn end_epoch(&mut self) {
        self.epoch += 1;
    }

    // -- checkpoint text format ---------------------------------------------
    //
    //   version 1
    //   <name> <ndim> <d1> ... <dn>
    //   <values ...>
    //   <name>.m <ndim> ...        (optimizer moments)
    //   <name>.v <ndim> ...
    //   step <S> epoch <E>

    pub fn to_blocks(&self) -> Vec<(String, Tensor<S>)> {
        let mut blocks = Vec::with_capacity(self.entries.len() * 3);
        for e in &self.entries {
            let shape = e.tensor.shape().to_vec();
            blocks.push((e.name.clone(), e.tensor.clone()));
            blocks.push((
                format!("{}.m", e.name),
                Tensor::new(shape.clone(), e.m.clone()).unwrap(),
            ));
            blocks.push((
                format!("{}.v", e.name),
                Tensor::new(shape, e.v.clone()).unwrap(),
            ));
        }
        blocks
    }

    /// Rebuild a store from named blocks. `name.m` / `name.v` blocks attach
    /// moments to the parameter they suffix; anything else is a parameter.
    pub fn from_blocks(blocks: Vec<(String, Tensor<S>)>, step: u64, epoch: u64) -> Result<Self, NnError> {
        let mut store = ParamStore::new();
        store.step = step;
        store.epoch = epoch;
        for (name, tensor) in blocks {
            let moment = name
                .strip_suffix(".m")
                .map(|s| (s.to_string(), true))
                .or_else(|| name.strip_suffix(".v").map(|s| (s.to_string(), false)));
            match moment {
                Some((base, is_m)) if store.entries.iter().any(|e| e.name == base) => {
                    let entry = store.entries.iter_mut().find(|e| e.name == base).unwrap();
                    if tensor.shape() != entry.tensor.shape() {
                        return Err(NnError::Checkpoint(format!(
                            "moment {name} shape {:?} does not match parameter {:?}",
                            tensor.shape(),
                            entry.tensor.shape()
                        )));
                    }
                    if is_m {
                        entry.m = tensor.data().to_vec();
                    } else {
                        entry.v = tensor.data().to_vec();
                    }
                }
                _ => store.insert(name, tensor)?,
            }
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        std::fs::write(path, write_blocks(&self.to_blocks(), self.step, self.epoch))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = std::fs::read_to_string(path)?;
        let ckpt = parse_blocks(&text)?;
        Self::from_blocks(ckpt.blocks, ckpt.step, ckpt.epoch)
    }
}

/// Parsed checkpoint: named tensors plus the optimizer step/epoch trailer.
pub struct CheckpointBlocks<S: Scalar> {
    pub blocks: Vec<(String, Tensor<S>)>,
    pub step: u64,
    pub epoch: u64,
}

pub fn write_blocks<S: Scalar>(blocks: &[(String, Tensor<S>)], step: u64, epoch: u64) -> String {
    let mut out = String::from("version 1\n");
    for (name, tensor) in blocks {
        out.push_str(name);
        out.push(' ');
        out.push_str(&tensor.rank().to_string());
        for d in tensor.shape() {
            out.push(' ');
            out.push_str(&d.to_string());
        }
        out.push('\n');
        let mut first = true;
        for v in tensor.data() {
            if !first {
                out.push(' ');
            }
            out.push_str(&format!("{v}"));
            first = false;
        }
        out.push('\n');
    }
    out.push_str(&format!("step {step} epoch {epoch}\n"));
    out
}

pub fn parse_blocks<S: Scalar>(text: &str) -> Result<CheckpointBlocks<S>, NnError> {
    let bad = |msg: String| NnError::Checkpoint(msg);
    let mut lines = text.lines();
    match lines.next() {
        Some("version 1") => {}
        other => return Err(bad(format!("unsupported header {other:?}"))),
    }
    let mut blocks = Vec::new();
    let (mut step, mut epoch) = (None, None);
    while let Some(head) = lines.next() {
        let head = head.trim();
        if head.is_empty() {
            continue;
        }
        let toks: Vec<&str> = head.split_whitespace().collect();
        if toks[0] == "step" {
            if toks.len() != 4 || toks[2] != "epoch" {
                return Err(bad(format!("malformed trailer {head:?}")));
            }
            step = Some(
                toks[1]
                    .parse()
                    .map_err(|_| bad(format!("bad step {:?}", toks[1])))?,
            );
            epoch = Some(
                toks[3]
                    .parse()
                    .map_err(|_| bad(format!("bad epoch {:?}", toks[3])))?,
            );
            continue;
        }
        if toks.len() < 2 {
            return Err(bad(format!("malformed block header {head:?}")));
        }
        let name = toks[0].to_string();
        let ndim: usize = toks[1]
            .parse()
            .map_err(|_| bad(format!("bad rank in {head:?}")))?;
        if toks.len() != 2 + ndim {
            return Err(bad(format!("header {head:?} wants {ndim} dims")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for d in &toks[2..] {
            shape.push(
                d.parse()
                    .map_err(|_| bad(format!("bad dimension {d:?}")))?,
            );
        }
        let values_line = lines
            .next()
            .ok_or_else(|| bad(format!("block {name} is missing its values line")))?;
        let mut data = Vec::with_capacity(shape.iter().product());
        for tok in values_line.split_whitespace() {
            let v: S = tok
                .parse()
                .map_err(|_| bad(format!("bad value {tok:?} in block {name}")))?;
            data.push(v);
        }
        let tensor = Tensor::new(shape, data)
            .map_err(|e| bad(format!("block {name}: {e}")))?;
        blocks.push((name, tensor));
    }
    match (step, epoch) {
        (Some(step), Some(epoch)) => Ok(CheckpointBlocks { blocks, step, epoch }),
        _ => Err(bad("missing step/epoch trailer".into())),
    }
}

/// Uniform initialization in `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`.
/// Samples are drawn in f64 so the stream is identical for every scalar type.
pub fn uniform_init<S: Scalar, R: Rng>(
    shape: Vec<usize>,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor<S> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| S::of(rng.random_range(-a..a)))
        .collect();
    Tensor::new(shape, data).unwrap()
}

