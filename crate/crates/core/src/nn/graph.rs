//! Eager expression graph with reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so walking ids in reverse is a
//! valid topological order for backpropagation. Values are plain indices into
//! the graph arena; a graph lives for one forward/backward pass and is then
//! dropped. Identical inputs build identical graphs, so results are
//! bit-reproducible run to run.

use std::rc::Rc;

use crate::geom::SkeletonTopology;
use crate::nn::{NnError, Tensor};
use crate::scalar::Scalar;

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Value(pub(crate) usize);

#[derive(Debug)]
enum Op<S: Scalar> {
    Leaf,
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    Scale(Value, S),
    AddScalar(Value, S),
    MatVec(Value, Value),
    Conv1d { x: Value, w: Value, b: Value },
    Bilinear { hc: Value, w: Value, hs: Value },
    BilinearSeq { hc: Value, w: Value, hs: Value },
    Gram(Value),
    Transpose(Value),
    LeakyRelu(Value, S),
    Tanh(Value),
    Sigmoid(Value),
    Sin(Value),
    Cos(Value),
    Slice { x: Value, start: usize },
    Col { x: Value, col: usize },
    Concat(Vec<Value>),
    RowSlice { x: Value, start: usize },
    RowConcat(Vec<Value>),
    RowScale { m: Value, v: Value },
    RowNormalize { m: Value, eps: S },
    Reshape(Value),
    Fk { dirs: Value, root: Value, topo: Rc<SkeletonTopology<S>> },
    MeanAll(Value),
    SumAll(Value),
}

struct Node<S: Scalar> {
    value: Tensor<S>,
    op: Op<S>,
}

/// Gradients of one backward pass, indexed by [`Value`].
pub struct Gradients<S: Scalar> {
    slots: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of the loss w.r.t. a node, `None` if the node does not
    /// influence the loss.
    pub fn get(&self, v: Value) -> Option<&[S]> {
        self.slots[v.0].as_deref()
    }
}

pub struct Graph<S: Scalar> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, detail: String) -> NnError {
    NnError::ShapeMismatch { op, detail }
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Value) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    /// Scalar payload of a one-element node.
    pub fn item(&self, v: Value) -> S {
        self.nodes[v.0].value.item()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Value {
        self.nodes.push(Node { value, op });
        Value(self.nodes.len() - 1)
    }

    /// Insert a leaf holding `t`. Inputs, constants and parameters are all
    /// leaves; what makes a parameter is that its gradient is read back.
    pub fn input(&mut self, t: Tensor<S>) -> Value {
        self.push(t, Op::Leaf)
    }

    pub fn constant(&mut self, t: Tensor<S>) -> Value {
        self.input(t)
    }

    pub fn scalar_const(&mut self, v: S) -> Value {
        self.input(Tensor::scalar(v))
    }

    fn same_shape(&self, op: &'static str, a: Value, b: Value) -> Result<(), NnError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(mismatch(
                op,
                format!(
                    "{:?} vs {:?}",
                    self.value(a).shape(),
                    self.value(b).shape()
                ),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value, NnError> {
        self.same_shape("add", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value, NnError> {
        self.same_shape("sub", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x - y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(t, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value, NnError> {
        self.same_shape("mul", a, b)?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Value, k: S) -> Value {
        let data = self.value(a).data().iter().map(|&x| x * k).collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).unwrap();
        self.push(t, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Value, k: S) -> Value {
        let data = self.value(a).data().iter().map(|&x| x + k).collect();
        let t = Tensor::new(self.value(a).shape().to_vec(), data).unwrap();
        self.push(t, Op::AddScalar(a, k))
    }

    /// Balanced sum of several same-shaped values.
    pub fn sum_values(&mut self, vs: &[Value]) -> Result<Value, NnError> {
        assert!(!vs.is_empty(), "sum of no values");
        let mut acc = vs[0];
        for &v in &vs[1..] {
            acc = self.add(acc, v)?;
        }
        Ok(acc)
    }

    /// `w [m,n] * x [n] -> [m]`.
    pub fn matvec(&mut self, w: Value, x: Value) -> Result<Value, NnError> {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.rank() != 2 || xt.rank() != 1 || wt.dim(1) != xt.dim(0) {
            return Err(mismatch(
                "matvec",
                format!("{:?} x {:?}", wt.shape(), xt.shape()),
            ));
        }
        let (m, n) = (wt.dim(0), wt.dim(1));
        let mut out = vec![S::zero(); m];
        for r in 0..m {
            let mut acc = S::zero();
            for c in 0..n {
                acc = acc + wt.data()[r * n + c] * xt.data()[c];
            }
            out[r] = acc;
        }
        let t = Tensor::new(vec![m], out)?;
        Ok(self.push(t, Op::MatVec(w, x)))
    }

    /// Affine map: `w x + b`.
    pub fn dense(&mut self, x: Value, w: Value, b: Value) -> Result<Value, NnError> {
        let wx = self.matvec(w, x)?;
        self.add(wx, b)
    }

    /// Temporal cross-correlation with zero padding that preserves length.
    /// `x [ci,t] * w [co,ci,k] + b [co] -> [co,t]`, `k` odd.
    pub fn conv1d(&mut self, x: Value, w: Value, b: Value) -> Result<Value, NnError> {
        let (xt, wt, bt) = (self.value(x), self.value(w), self.value(b));
        if xt.rank() != 2 || wt.rank() != 3 || bt.rank() != 1 {
            return Err(mismatch(
                "conv1d",
                format!("{:?}, {:?}, {:?}", xt.shape(), wt.shape(), bt.shape()),
            ));
        }
        let (ci, t) = (xt.dim(0), xt.dim(1));
        let (co, wci, k) = (wt.dim(0), wt.dim(1), wt.dim(2));
        if wci != ci || bt.dim(0) != co || k % 2 == 0 {
            return Err(mismatch(
                "conv1d",
                format!("x {:?}, w {:?}, b {:?}", xt.shape(), wt.shape(), bt.shape()),
            ));
        }
        let pad = (k - 1) / 2;
        let mut out = vec![S::zero(); co * t];
        for o in 0..co {
            for tt in 0..t {
                let mut acc = bt.data()[o];
                for i in 0..ci {
                    for kk in 0..k {
                        let s = tt as isize + kk as isize - pad as isize;
                        if s >= 0 && (s as usize) < t {
                            acc = acc
                                + xt.data()[i * t + s as usize]
                                    * wt.data()[(o * ci + i) * k + kk];
                        }
                    }
                }
                out[o * t + tt] = acc;
            }
        }
        let tens = Tensor::new(vec![co, t], out)?;
        Ok(self.push(tens, Op::Conv1d { x, w, b }))
    }

    /// Two-factor map `out[o] = sum_ij hc[i] w[i,o,j] hs[j]`, linear in each
    /// factor with the other held fixed.
    pub fn bilinear(&mut self, hc: Value, w: Value, hs: Value) -> Result<Value, NnError> {
        let (ct, wt, st) = (self.value(hc), self.value(w), self.value(hs));
        if ct.rank() != 1 || st.rank() != 1 || wt.rank() != 3 {
            return Err(mismatch(
                "bilinear",
                format!("{:?}, {:?}, {:?}", ct.shape(), wt.shape(), st.shape()),
            ));
        }
        let (ci, co, cj) = (wt.dim(0), wt.dim(1), wt.dim(2));
        if ct.dim(0) != ci || st.dim(0) != cj {
            return Err(mismatch(
                "bilinear",
                format!("hc {:?}, w {:?}, hs {:?}", ct.shape(), wt.shape(), st.shape()),
            ));
        }
        let mut out = vec![S::zero(); co];
        for o in 0..co {
            let mut acc = S::zero();
            for i in 0..ci {
                for j in 0..cj {
                    acc = acc + ct.data()[i] * wt.data()[(i * co + o) * cj + j] * st.data()[j];
                }
            }
            out[o] = acc;
        }
        let t = Tensor::new(vec![co], out)?;
        Ok(self.push(t, Op::Bilinear { hc, w, hs }))
    }

    /// [`Graph::bilinear`] applied to every column of two feature sequences:
    /// `hc [ci,m], hs [cj,m] -> [co,m]`.
    pub fn bilinear_seq(&mut self, hc: Value, w: Value, hs: Value) -> Result<Value, NnError> {
        let (ct, wt, st) = (self.value(hc), self.value(w), self.value(hs));
        if ct.rank() != 2 || st.rank() != 2 || wt.rank() != 3 || ct.dim(1) != st.dim(1) {
            return Err(mismatch(
                "bilinear_seq",
                format!("{:?}, {:?}, {:?}", ct.shape(), wt.shape(), st.shape()),
            ));
        }
        let (ci, co, cj) = (wt.dim(0), wt.dim(1), wt.dim(2));
        let m = ct.dim(1);
        if ct.dim(0) != ci || st.dim(0) != cj {
            return Err(mismatch(
                "bilinear_seq",
                format!("hc {:?}, w {:?}, hs {:?}", ct.shape(), wt.shape(), st.shape()),
            ));
        }
        let mut out = vec![S::zero(); co * m];
        for col in 0..m {
            for o in 0..co {
                let mut acc = S::zero();
                for i in 0..ci {
                    for j in 0..cj {
                        acc = acc
                            + ct.data()[i * m + col]
                                * wt.data()[(i * co + o) * cj + j]
                                * st.data()[j * m + col];
                    }
                }
                out[o * m + col] = acc;
            }
        }
        let t = Tensor::new(vec![co, m], out)?;
        Ok(self.push(t, Op::BilinearSeq { hc, w, hs }))
    }

    /// `h [t,c] -> h h^T [t,t]`; symmetric positive semi-definite.
    pub fn gram(&mut self, h: Value) -> Result<Value, NnError> {
        let ht = self.value(h);
        if ht.rank() != 2 {
            return Err(mismatch("gram", format!("{:?}", ht.shape())));
        }
        let (t, c) = (ht.dim(0), ht.dim(1));
        let mut out = vec![S::zero(); t * t];
        for a in 0..t {
            for b in a..t {
                let mut acc = S::zero();
                for k in 0..c {
                    acc = acc + ht.data()[a * c + k] * ht.data()[b * c + k];
                }
                out[a * t + b] = acc;
                out[b * t + a] = acc;
            }
        }
        let tens = Tensor::new(vec![t, t], out)?;
        Ok(self.push(tens, Op::Gram(h)))
    }

    pub fn transpose(&mut self, x: Value) -> Result<Value, NnError> {
        let xt = self.value(x);
        if xt.rank() != 2 {
            return Err(mismatch("transpose", format!("{:?}", xt.shape())));
        }
        let (r, c) = (xt.dim(0), xt.dim(1));
        let mut out = vec![S::zero(); r * c];
        for rr in 0..r {
            for cc in 0..c {
                out[cc * r + rr] = xt.data()[rr * c + cc];
            }
        }
        let t = Tensor::new(vec![c, r], out)?;
        Ok(self.push(t, Op::Transpose(x)))
    }

    pub fn leaky_relu(&mut self, x: Value, slope: S) -> Value {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| if v > S::zero() { v } else { v * slope })
            .collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(t, Op::LeakyRelu(x, slope))
    }

    pub fn tanh(&mut self, x: Value) -> Value {
        let data = self.value(x).data().iter().map(|&v| v.tanh()).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(t, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Value) -> Value {
        let data = self
            .value(x)
            .data()
            .iter()
            .map(|&v| stable_sigmoid(v))
            .collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(t, Op::Sigmoid(x))
    }

    pub fn sin(&mut self, x: Value) -> Value {
        let data = self.value(x).data().iter().map(|&v| v.sin()).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(t, Op::Sin(x))
    }

    pub fn cos(&mut self, x: Value) -> Value {
        let data = self.value(x).data().iter().map(|&v| v.cos()).collect();
        let t = Tensor::new(self.value(x).shape().to_vec(), data).unwrap();
        self.push(t, Op::Cos(x))
    }

    /// Contiguous slice of a 1-D value.
    pub fn slice(&mut self, x: Value, start: usize, len: usize) -> Result<Value, NnError> {
        let xt = self.value(x);
        if xt.rank() != 1 || start + len > xt.dim(0) {
            return Err(mismatch(
                "slice",
                format!("[{start}..{}] of {:?}", start + len, xt.shape()),
            ));
        }
        let data = xt.data()[start..start + len].to_vec();
        let t = Tensor::new(vec![len], data)?;
        Ok(self.push(t, Op::Slice { x, start }))
    }

    /// One column of a 2-D value as a vector.
    pub fn col(&mut self, x: Value, col: usize) -> Result<Value, NnError> {
        let xt = self.value(x);
        if xt.rank() != 2 || col >= xt.dim(1) {
            return Err(mismatch(
                "col",
                format!("column {col} of {:?}", xt.shape()),
            ));
        }
        let (r, c) = (xt.dim(0), xt.dim(1));
        let data = (0..r).map(|rr| xt.data()[rr * c + col]).collect();
        let t = Tensor::new(vec![r], data)?;
        Ok(self.push(t, Op::Col { x, col }))
    }

    /// Concatenate 1-D values.
    pub fn concat(&mut self, parts: &[Value]) -> Result<Value, NnError> {
        let mut data = Vec::new();
        for &p in parts {
            let pt = self.value(p);
            if pt.rank() != 1 {
                return Err(mismatch("concat", format!("{:?}", pt.shape())));
            }
            data.extend_from_slice(pt.data());
        }
        let t = Tensor::new(vec![data.len()], data)?;
        Ok(self.push(t, Op::Concat(parts.to_vec())))
    }

    /// Contiguous block of rows of a 2-D value.
    pub fn row_slice(&mut self, x: Value, start: usize, rows: usize) -> Result<Value, NnError> {
        let xt = self.value(x);
        if xt.rank() != 2 || start + rows > xt.dim(0) {
            return Err(mismatch(
                "row_slice",
                format!("rows [{start}..{}] of {:?}", start + rows, xt.shape()),
            ));
        }
        let c = xt.dim(1);
        let data = xt.data()[start * c..(start + rows) * c].to_vec();
        let t = Tensor::new(vec![rows, c], data)?;
        Ok(self.push(t, Op::RowSlice { x, start }))
    }

    /// Stack 2-D values with equal column counts on top of each other.
    pub fn row_concat(&mut self, parts: &[Value]) -> Result<Value, NnError> {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).dim(1);
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let pt = self.value(p);
            if pt.rank() != 2 || pt.dim(1) != cols {
                return Err(mismatch("row_concat", format!("{:?}", pt.shape())));
            }
            rows += pt.dim(0);
            data.extend_from_slice(pt.data());
        }
        let t = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(t, Op::RowConcat(parts.to_vec())))
    }

    /// Scale row `r` of `m` by `v[r]`.
    pub fn row_scale(&mut self, m: Value, v: Value) -> Result<Value, NnError> {
        let (mt, vt) = (self.value(m), self.value(v));
        if mt.rank() != 2 || vt.rank() != 1 || mt.dim(0) != vt.dim(0) {
            return Err(mismatch(
                "row_scale",
                format!("{:?} by {:?}", mt.shape(), vt.shape()),
            ));
        }
        let (r, c) = (mt.dim(0), mt.dim(1));
        let mut out = vec![S::zero(); r * c];
        for rr in 0..r {
            for cc in 0..c {
                out[rr * c + cc] = mt.data()[rr * c + cc] * vt.data()[rr];
            }
        }
        let t = Tensor::new(vec![r, c], out)?;
        Ok(self.push(t, Op::RowScale { m, v }))
    }

    /// Normalize each row to (softly) unit length: `x / sqrt(|x|^2 + eps^2)`.
    /// Smooth everywhere, which keeps gradients finite at collapsed rows.
    pub fn row_normalize(&mut self, m: Value, eps: S) -> Result<Value, NnError> {
        let mt = self.value(m);
        if mt.rank() != 2 {
            return Err(mismatch("row_normalize", format!("{:?}", mt.shape())));
        }
        let (r, c) = (mt.dim(0), mt.dim(1));
        let mut out = vec![S::zero(); r * c];
        for rr in 0..r {
            let mut n2 = eps * eps;
            for cc in 0..c {
                let x = mt.data()[rr * c + cc];
                n2 = n2 + x * x;
            }
            let inv = S::one() / n2.sqrt();
            for cc in 0..c {
                out[rr * c + cc] = mt.data()[rr * c + cc] * inv;
            }
        }
        let t = Tensor::new(vec![r, c], out)?;
        Ok(self.push(t, Op::RowNormalize { m, eps }))
    }

    pub fn reshape(&mut self, x: Value, shape: Vec<usize>) -> Result<Value, NnError> {
        let xt = self.value(x);
        if shape.iter().product::<usize>() != xt.len() {
            return Err(mismatch(
                "reshape",
                format!("{:?} -> {:?}", xt.shape(), shape),
            ));
        }
        let t = Tensor::new(shape, xt.data().to_vec())?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    /// Differentiable forward kinematics: bone directions `[rows,3]` plus a
    /// root position `[3]` yield joint positions `[j,3]`. Directions are used
    /// as given (callers normalize first when exactness matters).
    pub fn fk(
        &mut self,
        dirs: Value,
        root: Value,
        topo: &Rc<SkeletonTopology<S>>,
    ) -> Result<Value, NnError> {
        let (dt, rt) = (self.value(dirs), self.value(root));
        if dt.rank() != 2
            || dt.dim(0) != topo.rows()
            || dt.dim(1) != 3
            || rt.shape() != [3]
        {
            return Err(mismatch(
                "fk",
                format!("dirs {:?}, root {:?}", dt.shape(), rt.shape()),
            ));
        }
        let j = topo.joint_count();
        let mut pos = vec![S::zero(); j * 3];
        for &joint in topo.order() {
            match topo.parent_of(joint) {
                None => {
                    for c in 0..3 {
                        pos[joint * 3 + c] = rt.data()[c];
                    }
                }
                Some(p) => {
                    let row = topo.row_of(joint).unwrap();
                    let bone = topo.bone_length(joint);
                    for c in 0..3 {
                        pos[joint * 3 + c] = pos[p * 3 + c] + bone * dt.data()[row * 3 + c];
                    }
                }
            }
        }
        let t = Tensor::new(vec![j, 3], pos)?;
        Ok(self.push(
            t,
            Op::Fk {
                dirs,
                root,
                topo: Rc::clone(topo),
            },
        ))
    }

    pub fn mean_all(&mut self, x: Value) -> Value {
        let xt = self.value(x);
        let n = S::from_usize(xt.len()).unwrap();
        let sum = xt.data().iter().fold(S::zero(), |a, &b| a + b);
        self.push(Tensor::scalar(sum / n), Op::MeanAll(x))
    }

    pub fn sum_all(&mut self, x: Value) -> Value {
        let sum = self.value(x).data().iter().fold(S::zero(), |a, &b| a + b);
        self.push(Tensor::scalar(sum), Op::SumAll(x))
    }

    /// Mean-square error: sums of squares divided by element count, so loss
    /// weights stay comparable across differing clip sizes.
    pub fn mse(&mut self, a: Value, b: Value) -> Result<Value, NnError> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean_all(sq))
    }

    /// One gated recurrent step. Gate layout in `w_ih`/`w_hh`/`b` rows:
    /// input, forget, candidate, output, each `h` wide.
    pub fn lstm_cell(
        &mut self,
        x: Value,
        h_prev: Value,
        c_prev: Value,
        params: &LstmParams,
    ) -> Result<(Value, Value), NnError> {
        let h = self.value(h_prev).dim(0);
        let wih = self.value(params.w_ih);
        let whh = self.value(params.w_hh);
        let bt = self.value(params.b);
        if wih.rank() != 2
            || whh.rank() != 2
            || wih.dim(0) != 4 * h
            || whh.dim(0) != 4 * h
            || whh.dim(1) != h
            || wih.dim(1) != self.value(x).dim(0)
            || bt.shape() != [4 * h]
        {
            return Err(mismatch(
                "lstm_cell",
                format!(
                    "x {:?}, h {:?}, w_ih {:?}, w_hh {:?}, b {:?}",
                    self.value(x).shape(),
                    self.value(h_prev).shape(),
                    wih.shape(),
                    whh.shape(),
                    bt.shape()
                ),
            ));
        }
        let zx = self.matvec(params.w_ih, x)?;
        let zh = self.matvec(params.w_hh, h_prev)?;
        let zs = self.add(zx, zh)?;
        let z = self.add(zs, params.b)?;
        let i_raw = self.slice(z, 0, h)?;
        let f_raw = self.slice(z, h, h)?;
        let g_raw = self.slice(z, 2 * h, h)?;
        let o_raw = self.slice(z, 3 * h, h)?;
        let i = self.sigmoid(i_raw);
        let f = self.sigmoid(f_raw);
        let g = self.tanh(g_raw);
        let o = self.sigmoid(o_raw);
        let fc = self.mul(f, c_prev)?;
        let ig = self.mul(i, g)?;
        let c = self.add(fc, ig)?;
        let ct = self.tanh(c);
        let h_next = self.mul(o, ct)?;
        Ok((h_next, c))
    }

    /// Reverse-mode sweep from a scalar loss node. Returns per-node
    /// gradients; read the ones you care about by their [`Value`].
    pub fn backward(&self, loss: Value) -> Result<Gradients<S>, NnError> {
        if self.value(loss).len() != 1 {
            return Err(mismatch(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut slots: Vec<Option<Vec<S>>> = vec![None; self.nodes.len()];
        slots[loss.0] = Some(vec![S::one()]);
        for id in (0..=loss.0).rev() {
            let Some(gout) = slots[id].take() else {
                continue;
            };
            self.backprop_node(id, &gout, &mut slots);
            slots[id] = Some(gout);
        }
        Ok(Gradients { slots })
    }

    fn backprop_node(&self, id: usize, gout: &[S], slots: &mut [Option<Vec<S>>]) {
        let node = &self.nodes[id];
        let val = |v: Value| self.nodes[v.0].value.data();
        macro_rules! slot {
            ($v:expr) => {{
                let len = self.nodes[$v.0].value.len();
                slots[$v.0].get_or_insert_with(|| vec![S::zero(); len])
            }};
        }
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for (g, &d) in slot!(a).iter_mut().zip(gout) {
                    *g += d;
                }
                for (g, &d) in slot!(b).iter_mut().zip(gout) {
                    *g += d;
                }
            }
            Op::Sub(a, b) => {
                for (g, &d) in slot!(a).iter_mut().zip(gout) {
                    *g += d;
                }
                for (g, &d) in slot!(b).iter_mut().zip(gout) {
                    *g -= d;
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a).to_vec(), val(*b).to_vec());
                for ((g, &d), &bx) in slot!(a).iter_mut().zip(gout).zip(&bv) {
                    *g += d * bx;
                }
                for ((g, &d), &ax) in slot!(b).iter_mut().zip(gout).zip(&av) {
                    *g += d * ax;
                }
            }
            Op::Scale(a, k) => {
                for (g, &d) in slot!(a).iter_mut().zip(gout) {
                    *g += d * *k;
                }
            }
            Op::AddScalar(a, _) => {
                for (g, &d) in slot!(a).iter_mut().zip(gout) {
                    *g += d;
                }
            }
            Op::MatVec(w, x) => {
                let (m, n) = (self.nodes[w.0].value.dim(0), self.nodes[w.0].value.dim(1));
                let wv = val(*w).to_vec();
                let xv = val(*x).to_vec();
                {
                    let gw = slot!(w);
                    for r in 0..m {
                        for c in 0..n {
                            gw[r * n + c] += gout[r] * xv[c];
                        }
                    }
                }
                let gx = slot!(x);
                for c in 0..n {
                    let mut acc = S::zero();
                    for r in 0..m {
                        acc = acc + gout[r] * wv[r * n + c];
                    }
                    gx[c] += acc;
                }
            }
            Op::Conv1d { x, w, b } => {
                let xt = &self.nodes[x.0].value;
                let wt = &self.nodes[w.0].value;
                let (ci, t) = (xt.dim(0), xt.dim(1));
                let (co, k) = (wt.dim(0), wt.dim(2));
                let pad = (k - 1) / 2;
                let xv = xt.data().to_vec();
                let wv = wt.data().to_vec();
                {
                    let gb = slot!(b);
                    for o in 0..co {
                        for tt in 0..t {
                            gb[o] += gout[o * t + tt];
                        }
                    }
                }
                {
                    let gw = slot!(w);
                    for o in 0..co {
                        for tt in 0..t {
                            let d = gout[o * t + tt];
                            for i in 0..ci {
                                for kk in 0..k {
                                    let s = tt as isize + kk as isize - pad as isize;
                                    if s >= 0 && (s as usize) < t {
                                        gw[(o * ci + i) * k + kk] += d * xv[i * t + s as usize];
                                    }
                                }
                            }
                        }
                    }
                }
                let gx = slot!(x);
                for o in 0..co {
                    for tt in 0..t {
                        let d = gout[o * t + tt];
                        for i in 0..ci {
                            for kk in 0..k {
                                let s = tt as isize + kk as isize - pad as isize;
                                if s >= 0 && (s as usize) < t {
                                    gx[i * t + s as usize] += d * wv[(o * ci + i) * k + kk];
                                }
                            }
                        }
                    }
                }
            }
            Op::Bilinear { hc, w, hs } => {
                let wt = &self.nodes[w.0].value;
                let (ci, co, cj) = (wt.dim(0), wt.dim(1), wt.dim(2));
                let cv = val(*hc).to_vec();
                let wv = wt.data().to_vec();
                let sv = val(*hs).to_vec();
                {
                    let gc = slot!(hc);
                    for i in 0..ci {
                        let mut acc = S::zero();
                        for o in 0..co {
                            for j in 0..cj {
                                acc = acc + gout[o] * wv[(i * co + o) * cj + j] * sv[j];
                            }
                        }
                        gc[i] += acc;
                    }
                }
                {
                    let gw = slot!(w);
                    for i in 0..ci {
                        for o in 0..co {
                            for j in 0..cj {
                                gw[(i * co + o) * cj + j] += cv[i] * gout[o] * sv[j];
                            }
                        }
                    }
                }
                let gs = slot!(hs);
                for j in 0..cj {
                    let mut acc = S::zero();
                    for o in 0..co {
                        for i in 0..ci {
                            acc = acc + gout[o] * wv[(i * co + o) * cj + j] * cv[i];
                        }
                    }
                    gs[j] += acc;
                }
            }
            Op::BilinearSeq { hc, w, hs } => {
                let wt = &self.nodes[w.0].value;
                let (ci, co, cj) = (wt.dim(0), wt.dim(1), wt.dim(2));
                let m = self.nodes[hc.0].value.dim(1);
                let cv = val(*hc).to_vec();
                let wv = wt.data().to_vec();
                let sv = val(*hs).to_vec();
                {
                    let gc = slot!(hc);
                    for col in 0..m {
                        for i in 0..ci {
                            let mut acc = S::zero();
                            for o in 0..co {
                                for j in 0..cj {
                                    acc = acc
                                        + gout[o * m + col]
                                            * wv[(i * co + o) * cj + j]
                                            * sv[j * m + col];
                                }
                            }
                            gc[i * m + col] += acc;
                        }
                    }
                }
                {
                    let gw = slot!(w);
                    for col in 0..m {
                        for i in 0..ci {
                            for o in 0..co {
                                for j in 0..cj {
                                    gw[(i * co + o) * cj + j] +=
                                        cv[i * m + col] * gout[o * m + col] * sv[j * m + col];
                                }
                            }
                        }
                    }
                }
                let gs = slot!(hs);
                for col in 0..m {
                    for j in 0..cj {
                        let mut acc = S::zero();
                        for o in 0..co {
                            for i in 0..ci {
                                acc = acc
                                    + gout[o * m + col]
                                        * wv[(i * co + o) * cj + j]
                                        * cv[i * m + col];
                            }
                        }
                        gs[j * m + col] += acc;
                    }
                }
            }
            Op::Gram(h) => {
                let ht = &self.nodes[h.0].value;
                let (t, c) = (ht.dim(0), ht.dim(1));
                let hv = ht.data().to_vec();
                let gh = slot!(h);
                for a in 0..t {
                    for k in 0..c {
                        let mut acc = S::zero();
                        for b in 0..t {
                            acc = acc + (gout[a * t + b] + gout[b * t + a]) * hv[b * c + k];
                        }
                        gh[a * c + k] += acc;
                    }
                }
            }
            Op::Transpose(x) => {
                let (r, c) = (self.nodes[x.0].value.dim(0), self.nodes[x.0].value.dim(1));
                let gx = slot!(x);
                for rr in 0..r {
                    for cc in 0..c {
                        gx[rr * c + cc] += gout[cc * r + rr];
                    }
                }
            }
            Op::LeakyRelu(x, slope) => {
                let xv = val(*x).to_vec();
                for ((g, &d), &xx) in slot!(x).iter_mut().zip(gout).zip(&xv) {
                    *g += d * if xx > S::zero() { S::one() } else { *slope };
                }
            }
            Op::Tanh(x) => {
                let yv = node.value.data().to_vec();
                for ((g, &d), &y) in slot!(x).iter_mut().zip(gout).zip(&yv) {
                    *g += d * (S::one() - y * y);
                }
            }
            Op::Sigmoid(x) => {
                let yv = node.value.data().to_vec();
                for ((g, &d), &y) in slot!(x).iter_mut().zip(gout).zip(&yv) {
                    *g += d * y * (S::one() - y);
                }
            }
            Op::Sin(x) => {
                let xv = val(*x).to_vec();
                for ((g, &d), &xx) in slot!(x).iter_mut().zip(gout).zip(&xv) {
                    *g += d * xx.cos();
                }
            }
            Op::Cos(x) => {
                let xv = val(*x).to_vec();
                for ((g, &d), &xx) in slot!(x).iter_mut().zip(gout).zip(&xv) {
                    *g -= d * xx.sin();
                }
            }
            Op::Slice { x, start } => {
                let gx = slot!(x);
                for (k, &d) in gout.iter().enumerate() {
                    gx[start + k] += d;
                }
            }
            Op::Col { x, col } => {
                let c = self.nodes[x.0].value.dim(1);
                let gx = slot!(x);
                for (rr, &d) in gout.iter().enumerate() {
                    gx[rr * c + col] += d;
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.nodes[p.0].value.len();
                    let gp = slot!(&p);
                    for k in 0..len {
                        gp[k] += gout[off + k];
                    }
                    off += len;
                }
            }
            Op::RowSlice { x, start } => {
                let c = self.nodes[x.0].value.dim(1);
                let gx = slot!(x);
                for (k, &d) in gout.iter().enumerate() {
                    gx[start * c + k] += d;
                }
            }
            Op::RowConcat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.nodes[p.0].value.len();
                    let gp = slot!(&p);
                    for k in 0..len {
                        gp[k] += gout[off + k];
                    }
                    off += len;
                }
            }
            Op::RowScale { m, v } => {
                let mt = &self.nodes[m.0].value;
                let (r, c) = (mt.dim(0), mt.dim(1));
                let mv = mt.data().to_vec();
                let vv = val(*v).to_vec();
                {
                    let gm = slot!(m);
                    for rr in 0..r {
                        for cc in 0..c {
                            gm[rr * c + cc] += gout[rr * c + cc] * vv[rr];
                        }
                    }
                }
                let gv = slot!(v);
                for rr in 0..r {
                    let mut acc = S::zero();
                    for cc in 0..c {
                        acc = acc + gout[rr * c + cc] * mv[rr * c + cc];
                    }
                    gv[rr] += acc;
                }
            }
            Op::RowNormalize { m, eps } => {
                let mt = &self.nodes[m.0].value;
                let (r, c) = (mt.dim(0), mt.dim(1));
                let mv = mt.data().to_vec();
                let gm = slot!(m);
                for rr in 0..r {
                    let mut n2 = *eps * *eps;
                    for cc in 0..c {
                        let x = mv[rr * c + cc];
                        n2 = n2 + x * x;
                    }
                    let nu = n2.sqrt();
                    let mut xd = S::zero();
                    for cc in 0..c {
                        xd = xd + mv[rr * c + cc] * gout[rr * c + cc];
                    }
                    for cc in 0..c {
                        gm[rr * c + cc] +=
                            gout[rr * c + cc] / nu - mv[rr * c + cc] * xd / (nu * nu * nu);
                    }
                }
            }
            Op::Reshape(x) => {
                for (g, &d) in slot!(x).iter_mut().zip(gout) {
                    *g += d;
                }
            }
            Op::Fk { dirs, root, topo } => {
                // Reverse accumulation over the joint tree: each joint's
                // gradient flows to its parent and to its own bone direction.
                let j = topo.joint_count();
                let mut acc = gout.to_vec();
                debug_assert_eq!(acc.len(), j * 3);
                for &joint in topo.order().iter().rev() {
                    if let Some(p) = topo.parent_of(joint) {
                        for cc in 0..3 {
                            let g = acc[joint * 3 + cc];
                            acc[p * 3 + cc] = acc[p * 3 + cc] + g;
                        }
                    }
                }
                {
                    let gd = slot!(dirs);
                    for row in 0..topo.rows() {
                        let joint = topo.row_child(row);
                        let bone = topo.bone_length(joint);
                        for cc in 0..3 {
                            gd[row * 3 + cc] += bone * acc[joint * 3 + cc];
                        }
                    }
                }
                let gr = slot!(root);
                let r = topo.root();
                for cc in 0..3 {
                    gr[cc] += acc[r * 3 + cc];
                }
            }
            Op::MeanAll(x) => {
                let n = S::from_usize(self.nodes[x.0].value.len()).unwrap();
                let d = gout[0] / n;
                for g in slot!(x).iter_mut() {
                    *g += d;
                }
            }
            Op::SumAll(x) => {
                let d = gout[0];
                for g in slot!(x).iter_mut() {
                    *g += d;
                }
            }
        }
    }
}

/// Parameter handles for one LSTM cell bound into a graph.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams {
    pub w_ih: Value,
    pub w_hh: Value,
    pub b: Value,
}

/// Name-to-leaf mapping produced by binding a parameter store into a graph.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub(crate) values: Vec<(String, Value)>,
}

impl BoundParams {
    pub fn value(&self, name: &str) -> Value {
        self.values
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("parameter {name} is not bound"))
    }

    /// LSTM parameter triple under a common prefix: `<p>.w_ih`, `<p>.w_hh`, `<p>.b`.
    pub fn lstm(&self, prefix: &str) -> LstmParams {
        LstmParams {
            w_ih: self.value(&format!("{prefix}.w_ih")),
            w_hh: self.value(&format!("{prefix}.w_hh")),
            b: self.value(&format!("{prefix}.b")),
        }
    }
}

fn stable_sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}
