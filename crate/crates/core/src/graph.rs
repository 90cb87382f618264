//! Reverse-mode automatic differentiation over a linear tape.
//!
//! A [`Graph`] records every primitive as a node holding its value, its
//! inputs and whatever the backward rule needs. Nodes are appended in
//! evaluation order, so the tape is topologically sorted by construction and
//! [`Graph::backward`] is a single reverse sweep. Gradients are accumulated in
//! fixed tape order; replaying a tape gives bit-identical results.
//!
//! Parameters are not copied onto the tape: a parameter leaf refers to its
//! slot in the borrowed [`ParamStore`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::kernels::{gemm_nn, gemm_nt, gemm_tn};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{broadcast_shape, check_axes, numel, strides, AxisGroups, BroadcastMap, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Primitive identity, used to target gradient fault injection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    Param,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,
    Square,
    Silu,
    Tanh,
    Exp,
    MatMul,
    Permute,
    Reshape,
    SumAll,
    MeanAll,
    SumAxes,
    Softmax,
    LayerNorm,
    Switch,
    GatherRows,
    GatherElems,
    ScatterAddRows,
    Slice,
    Concat,
    CrossEntropy,
}

/// Named elementwise / reduction primitives accepted by [`Graph::activation`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Silu,
    Tanh,
    Square,
    Negate,
    Add,
    Mul,
    Sum,
    Mean,
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "silu" => Activation::Silu,
            "tanh" => Activation::Tanh,
            "square" => Activation::Square,
            "negate" => Activation::Negate,
            "add" => Activation::Add,
            "mul" => Activation::Mul,
            "sum" => Activation::Sum,
            "mean" => Activation::Mean,
            other => return Err(Error::contract("activation", format!("unknown kind `{other}`"))),
        })
    }
}

#[derive(Clone, Debug)]
struct MatMulPlan {
    m: usize,
    k: usize,
    p: usize,
    /// (out batch, a batch, b batch) triples.
    batches: Vec<(usize, usize, usize)>,
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Param(ParamId),
    Add(BroadcastMap, BroadcastMap),
    Sub(BroadcastMap, BroadcastMap),
    Mul(BroadcastMap, BroadcastMap),
    Div(BroadcastMap, BroadcastMap),
    Neg,
    Scale(T),
    Square,
    Silu,
    Tanh,
    Exp,
    MatMul(MatMulPlan),
    Permute(Vec<usize>),
    Reshape,
    SumAll,
    MeanAll,
    SumAxes { groups: AxisGroups, scale: T },
    Softmax(AxisGroups),
    LayerNorm { xhat: Vec<T>, rstd: Vec<T> },
    Switch { grid: Vec<T>, t: Vec<T> },
    GatherRows { idx: Vec<usize>, cols: usize },
    GatherElems(Vec<usize>),
    ScatterAddRows { idx: Vec<Vec<usize>>, cols: usize },
    Slice { outer: usize, dim: usize, inner: usize, start: usize, len: usize },
    Concat { outer: usize, inner: usize, dims: Vec<usize> },
    CrossEntropy { probs: Vec<T>, labels: Vec<usize>, classes: usize },
}

impl<T> Op<T> {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Param(_) => OpKind::Param,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Div(..) => OpKind::Div,
            Op::Neg => OpKind::Neg,
            Op::Scale(_) => OpKind::Scale,
            Op::Square => OpKind::Square,
            Op::Silu => OpKind::Silu,
            Op::Tanh => OpKind::Tanh,
            Op::Exp => OpKind::Exp,
            Op::MatMul(_) => OpKind::MatMul,
            Op::Permute(_) => OpKind::Permute,
            Op::Reshape => OpKind::Reshape,
            Op::SumAll => OpKind::SumAll,
            Op::MeanAll => OpKind::MeanAll,
            Op::SumAxes { .. } => OpKind::SumAxes,
            Op::Softmax(_) => OpKind::Softmax,
            Op::LayerNorm { .. } => OpKind::LayerNorm,
            Op::Switch { .. } => OpKind::Switch,
            Op::GatherRows { .. } => OpKind::GatherRows,
            Op::GatherElems(_) => OpKind::GatherElems,
            Op::ScatterAddRows { .. } => OpKind::ScatterAddRows,
            Op::Slice { .. } => OpKind::Slice,
            Op::Concat { .. } => OpKind::Concat,
            Op::CrossEntropy { .. } => OpKind::CrossEntropy,
        }
    }
}

struct Node<T> {
    op: Op<T>,
    inputs: Vec<Var>,
    shape: Vec<usize>,
    /// `None` for parameter leaves, whose values live in the store.
    value: Option<Vec<T>>,
    requires_grad: bool,
}

/// Gradients produced by one backward sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    params: Vec<Option<Vec<T>>>,
    leaves: BTreeMap<Var, Tensor<T>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for a parameter, `None` when it never reached the output.
    pub fn param(&self, id: ParamId) -> Option<&[T]> {
        self.params.get(id.0).and_then(|g| g.as_deref())
    }

    /// Gradient for a grad-enabled leaf created with [`Graph::leaf`].
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(&v)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }
}

pub struct Graph<'p, T: Scalar> {
    store: Option<&'p ParamStore<T>>,
    nodes: Vec<Node<T>>,
    param_vars: BTreeMap<ParamId, Var>,
    fault: Option<(OpKind, T)>,
}

impl<T: Scalar> Default for Graph<'static, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<'static, T> {
    /// A tape without parameters; inputs come from [`Graph::leaf`].
    pub fn new() -> Self {
        Graph {
            store: None,
            nodes: Vec::new(),
            param_vars: BTreeMap::new(),
            fault: None,
        }
    }
}

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn with_params(store: &'p ParamStore<T>) -> Self {
        Graph {
            store: Some(store),
            nodes: Vec::with_capacity(256),
            param_vars: BTreeMap::new(),
            fault: None,
        }
    }

    /// Scale the backward contribution of every `kind` op by `factor`.
    ///
    /// Only meaningful for exercising the gradient checker.
    pub fn inject_gradient_fault(&mut self, kind: OpKind, factor: f64) {
        self.fault = Some((kind, T::of_f64(factor)));
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        let n = &self.nodes[v.0];
        match (&n.value, &n.op) {
            (Some(d), _) => d,
            (None, Op::Param(id)) => self.store.expect("param node without store").get(*id).data(),
            _ => unreachable!("node without value"),
        }
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec()).expect("node shape is consistent")
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op<T>, inputs: Vec<Var>, shape: Vec<usize>, value: Vec<T>) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            inputs,
            shape,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    // ── Leaves ────────────────────────────────────────────────────────

    pub fn leaf(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        let shape = t.shape().to_vec();
        self.nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            shape,
            value: Some(t.into_data()),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, false)
    }

    pub fn scalar_constant(&mut self, v: T) -> Var {
        self.constant(Tensor::scalar(v))
    }

    /// Parameter leaf; repeated calls return the same node so gradients
    /// from every use accumulate in one place.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let store = self.store.expect("Graph::param requires a parameter store");
        let entry = store.entry(id);
        self.nodes.push(Node {
            op: Op::Param(id),
            inputs: Vec::new(),
            shape: entry.tensor.shape().to_vec(),
            value: None,
            requires_grad: entry.trainable,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars.insert(id, v);
        v
    }

    // ── Elementwise ──────────────────────────────────────────────────

    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<(Vec<usize>, BroadcastMap, BroadcastMap, Vec<T>)> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let out = broadcast_shape(&sa, &sb).ok_or_else(|| Error::shape(name, &sa, &sb))?;
        let ma = BroadcastMap::new(&sa, &out);
        let mb = BroadcastMap::new(&sb, &out);
        let (va, vb) = (self.value(a), self.value(b));
        let n = numel(&out);
        let data = match (&ma, &mb) {
            (BroadcastMap::Same, BroadcastMap::Same) => va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect(),
            (BroadcastMap::Same, BroadcastMap::Cyclic(m)) => {
                let mut d = Vec::with_capacity(n);
                for chunk in va.chunks(*m) {
                    d.extend(chunk.iter().zip(vb).map(|(&x, &y)| f(x, y)));
                }
                d
            }
            _ => (0..n).map(|i| f(va[ma.at(i)], vb[mb.at(i)])).collect(),
        };
        Ok((out, ma, mb, data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, ma, mb, d) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(Op::Add(ma, mb), vec![a, b], shape, d))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, ma, mb, d) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(Op::Sub(ma, mb), vec![a, b], shape, d))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, ma, mb, d) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(Op::Mul(ma, mb), vec![a, b], shape, d))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let (shape, ma, mb, d) = self.binary("div", a, b, |x, y| x / y)?;
        Ok(self.push(Op::Div(ma, mb), vec![a, b], shape, d))
    }

    fn unary(&mut self, op: Op<T>, x: Var, f: impl Fn(T) -> T) -> Var {
        let shape = self.shape(x).to_vec();
        let d = self.value(x).iter().map(|&v| f(v)).collect();
        self.push(op, vec![x], shape, d)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.unary(Op::Neg, x, |v| -v)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        self.unary(Op::Scale(c), x, |v| v * c)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(Op::Square, x, |v| v * v)
    }

    /// x · sigmoid(x)
    pub fn silu(&mut self, x: Var) -> Var {
        self.unary(Op::Silu, x, |v| v / (T::one() + (-v).exp()))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(Op::Tanh, x, |v| v.tanh())
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(Op::Exp, x, |v| v.exp())
    }

    /// Dispatch by name; `operands` must match the kind's arity.
    pub fn activation(&mut self, kind: Activation, operands: &[Var]) -> Result<Var> {
        let arity = match kind {
            Activation::Add | Activation::Mul => 2,
            _ => 1,
        };
        if operands.len() != arity {
            return Err(Error::contract(
                "activation",
                format!("{kind:?} takes {arity} operand(s), got {}", operands.len()),
            ));
        }
        let x = operands[0];
        Ok(match kind {
            Activation::Silu => self.silu(x),
            Activation::Tanh => self.tanh(x),
            Activation::Square => self.square(x),
            Activation::Negate => self.neg(x),
            Activation::Add => self.add(x, operands[1])?,
            Activation::Mul => self.mul(x, operands[1])?,
            Activation::Sum => self.sum(x),
            Activation::Mean => self.mean(x),
        })
    }

    // ── Linear algebra and layout ────────────────────────────────────

    /// Batched matrix product `[.., M, K] · [.., K, P]` with broadcast batch
    /// axes.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        if sa.len() < 2 || sb.len() < 2 || sa[sa.len() - 1] != sb[sb.len() - 2] {
            return Err(Error::shape("matmul", &sa, &sb));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let p = sb[sb.len() - 1];
        let ba = &sa[..sa.len() - 2];
        let bb = &sb[..sb.len() - 2];
        let bout = broadcast_shape(ba, bb).ok_or_else(|| Error::shape("matmul", &sa, &sb))?;
        let nb = numel(&bout);
        let map_a = BroadcastMap::new(ba, &bout);
        let map_b = BroadcastMap::new(bb, &bout);
        let batches: Vec<_> = (0..nb).map(|i| (i, map_a.at(i), map_b.at(i))).collect();
        let mut out = vec![T::zero(); nb * m * p];
        {
            let (va, vb) = (self.value(a), self.value(b));
            let shared_b = numel(bb) == 1;
            if shared_b && numel(ba) == nb {
                gemm_nn(nb * m, k, p, va, vb, &mut out);
            } else {
                for &(o, ia, ib) in &batches {
                    gemm_nn(m, k, p, &va[ia * m * k..], &vb[ib * k * p..], &mut out[o * m * p..]);
                }
            }
        }
        let mut shape = bout;
        shape.push(m);
        shape.push(p);
        Ok(self.push(Op::MatMul(MatMulPlan { m, k, p, batches }), vec![a, b], shape, out))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != numel(self.shape(x)) {
            return Err(Error::shape("reshape", self.shape(x), shape));
        }
        let d = self.value(x).to_vec();
        Ok(self.push(Op::Reshape, vec![x], shape.to_vec(), d))
    }

    /// Output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let mut check = perm.to_vec();
        check.sort_unstable();
        if check != (0..s.len()).collect::<Vec<_>>() {
            return Err(Error::contract("permute", format!("{perm:?} is not a permutation of rank {}", s.len())));
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| s[p]).collect();
        let d = permute_data(self.value(x), &s, perm);
        Ok(self.push(Op::Permute(perm.to_vec()), vec![x], out_shape, d))
    }

    pub fn transpose_last(&mut self, x: Var) -> Result<Var> {
        let r = self.shape(x).len();
        if r < 2 {
            return Err(Error::contract("transpose", "rank < 2"));
        }
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 1, r - 2);
        self.permute(x, &perm)
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if axis >= s.len() || start + len > s[axis] {
            return Err(Error::contract("slice", format!("[{start}, {}) of axis {axis} in {s:?}", start + len)));
        }
        let outer = numel(&s[..axis]);
        let inner = numel(&s[axis + 1..]);
        let dim = s[axis];
        let v = self.value(x);
        let mut d = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * dim + start) * inner;
            d.extend_from_slice(&v[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        Ok(self.push(Op::Slice { outer, dim, inner, start, len }, vec![x], shape, d))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .shape(*xs.first().ok_or_else(|| Error::contract("concat", "no inputs"))?)
            .to_vec();
        if axis >= first.len() {
            return Err(Error::contract("concat", "axis out of range"));
        }
        let mut dims = Vec::with_capacity(xs.len());
        for &x in xs {
            let s = self.shape(x);
            let ok = s.len() == first.len() && s.iter().zip(&first).enumerate().all(|(k, (a, b))| k == axis || a == b);
            if !ok {
                return Err(Error::shape("concat", &first, s));
            }
            dims.push(s[axis]);
        }
        let outer = numel(&first[..axis]);
        let inner = numel(&first[axis + 1..]);
        let total: usize = dims.iter().sum();
        let mut d = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (x, &dim) in xs.iter().zip(&dims) {
                let v = self.value(*x);
                d.extend_from_slice(&v[o * dim * inner..(o + 1) * dim * inner]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        Ok(self.push(Op::Concat { outer, inner, dims }, xs.to_vec(), shape, d))
    }

    /// Rows of a 2-D tensor, in `idx` order (duplicates allowed).
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 2 || idx.iter().any(|&i| i >= s[0]) {
            return Err(Error::contract("gather_rows", format!("bad indices for shape {s:?}")));
        }
        let cols = s[1];
        let v = self.value(x);
        let mut d = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            d.extend_from_slice(&v[i * cols..(i + 1) * cols]);
        }
        Ok(self.push(Op::GatherRows { idx: idx.to_vec(), cols }, vec![x], vec![idx.len(), cols], d))
    }

    /// Flat elements at `idx`, returned with the given shape.
    pub fn gather_elems(&mut self, x: Var, idx: &[usize], shape: &[usize]) -> Result<Var> {
        let n = numel(self.shape(x));
        if numel(shape) != idx.len() || idx.iter().any(|&i| i >= n) {
            return Err(Error::contract("gather_elems", "bad index list"));
        }
        let v = self.value(x);
        let d = idx.iter().map(|&i| v[i]).collect();
        Ok(self.push(Op::GatherElems(idx.to_vec()), vec![x], shape.to_vec(), d))
    }

    /// `rows × C` tensor where row `idx[s][i]` accumulates row `i` of source
    /// `s`. Sources are added in the order given.
    pub fn scatter_add_rows(&mut self, rows: usize, cols: usize, parts: &[(Var, Vec<usize>)]) -> Result<Var> {
        let mut d = vec![T::zero(); rows * cols];
        for (src, idx) in parts {
            let s = self.shape(*src);
            if s != [idx.len(), cols] || idx.iter().any(|&r| r >= rows) {
                return Err(Error::shape("scatter_add_rows", s, &[idx.len(), cols]));
            }
            let v = self.value(*src);
            for (i, &r) in idx.iter().enumerate() {
                for (o, &x) in d[r * cols..(r + 1) * cols].iter_mut().zip(&v[i * cols..(i + 1) * cols]) {
                    *o += x;
                }
            }
        }
        let inputs = parts.iter().map(|(v, _)| *v).collect();
        let idx = parts.iter().map(|(_, i)| i.clone()).collect();
        Ok(self.push(Op::ScatterAddRows { idx, cols }, inputs, vec![rows, cols], d))
    }

    // ── Reductions ───────────────────────────────────────────────────

    pub fn sum(&mut self, x: Var) -> Var {
        let s: T = self.value(x).iter().copied().sum();
        self.push(Op::SumAll, vec![x], Vec::new(), vec![s])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s: T = v.iter().copied().sum::<T>() / T::of_usize(v.len().max(1));
        self.push(Op::MeanAll, vec![x], Vec::new(), vec![s])
    }

    fn reduce_axes(&mut self, x: Var, axes: &[usize], keepdim: bool, mean: bool) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let axes = check_axes("sum_axes", &s, axes)?;
        let groups = AxisGroups::new(&s, &axes);
        let scale = if mean {
            T::one() / T::of_usize(groups.reduced.len())
        } else {
            T::one()
        };
        let v = self.value(x);
        let d: Vec<T> = groups
            .kept
            .iter()
            .map(|&k| groups.reduced.iter().map(|&r| v[k + r]).sum::<T>() * scale)
            .collect();
        let shape: Vec<usize> = s
            .iter()
            .enumerate()
            .filter_map(|(i, &dim)| {
                if axes.contains(&i) {
                    keepdim.then_some(1)
                } else {
                    Some(dim)
                }
            })
            .collect();
        Ok(self.push(Op::SumAxes { groups, scale }, vec![x], shape, d))
    }

    pub fn sum_axes(&mut self, x: Var, axes: &[usize], keepdim: bool) -> Result<Var> {
        self.reduce_axes(x, axes, keepdim, false)
    }

    pub fn mean_axes(&mut self, x: Var, axes: &[usize], keepdim: bool) -> Result<Var> {
        self.reduce_axes(x, axes, keepdim, true)
    }

    // ── Fused primitives ─────────────────────────────────────────────

    /// Softmax normalised jointly over `axes` (max-subtracted).
    pub fn softmax(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let axes = check_axes("softmax", &s, axes)?;
        let groups = AxisGroups::new(&s, &axes);
        let v = self.value(x);
        let mut d = vec![T::zero(); v.len()];
        if groups.is_trailing() {
            let n = groups.reduced.len();
            for (src, dst) in v.chunks(n).zip(d.chunks_mut(n)) {
                softmax_run(src, dst);
            }
        } else {
            let mut buf = vec![T::zero(); groups.reduced.len()];
            let mut out = buf.clone();
            for &k in &groups.kept {
                for (b, &r) in buf.iter_mut().zip(&groups.reduced) {
                    *b = v[k + r];
                }
                softmax_run(&buf, &mut out);
                for (o, &r) in out.iter().zip(&groups.reduced) {
                    d[k + r] = *o;
                }
            }
        }
        Ok(self.push(Op::Softmax(groups), vec![x], s, d))
    }

    /// Per last-axis vector: (x − mean) / sqrt(var + eps) · gain + bias, with
    /// population variance.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        if !(eps > 0.0) {
            return Err(Error::contract("layer_norm", "eps must be positive"));
        }
        let s = self.shape(x).to_vec();
        let dim = *s.last().ok_or_else(|| Error::contract("layer_norm", "scalar input"))?;
        if self.shape(gain) != [dim] || self.shape(bias) != [dim] {
            return Err(Error::shape("layer_norm", &s, self.shape(gain)));
        }
        let eps = T::of_f64(eps);
        let inv_d = T::one() / T::of_usize(dim);
        let (v, g, b) = (self.value(x), self.value(gain), self.value(bias));
        let rows = v.len() / dim.max(1);
        let mut xhat = Vec::with_capacity(v.len());
        let mut rstd = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(v.len());
        for row in v.chunks(dim) {
            let mu = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&t| (t - mu) * (t - mu)).sum::<T>() * inv_d;
            let r = T::one() / (var + eps).sqrt();
            rstd.push(r);
            for (j, &t) in row.iter().enumerate() {
                let h = (t - mu) * r;
                xhat.push(h);
                out.push(h * g[j] + b[j]);
            }
        }
        Ok(self.push(Op::LayerNorm { xhat, rstd }, vec![x, gain, bias], s, out))
    }

    /// Reflectional switch basis: `[.., D] → [.., D, G]` with entries
    /// 1 − tanh²((x_d − grid_j) / denominator). `denominator` is a
    /// one-element node so it can be trained.
    pub fn reflectional_switch(&mut self, x: Var, grid: &[T], denominator: Var) -> Result<Var> {
        if numel(self.shape(denominator)) != 1 {
            return Err(Error::shape("reflectional_switch", self.shape(denominator), &[1]));
        }
        let den = self.value(denominator)[0];
        if !(den > T::zero()) {
            return Err(Error::contract("reflectional_switch", "denominator must be positive"));
        }
        if grid.is_empty() {
            return Err(Error::contract("reflectional_switch", "empty grid"));
        }
        let v = self.value(x);
        let gsz = grid.len();
        let mut t = Vec::with_capacity(v.len() * gsz);
        let mut out = Vec::with_capacity(v.len() * gsz);
        for &xv in v {
            for &gj in grid {
                let th = ((xv - gj) / den).tanh();
                t.push(th);
                out.push(T::one() - th * th);
            }
        }
        let mut shape = self.shape(x).to_vec();
        shape.push(gsz);
        Ok(self.push(Op::Switch { grid: grid.to_vec(), t }, vec![x, denominator], shape, out))
    }

    /// Mean cross-entropy of `[B, C]` logits against class labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || s[0] != labels.len() {
            return Err(Error::shape("cross_entropy", &s, &[labels.len()]));
        }
        let classes = s[1];
        if labels.iter().any(|&l| l >= classes) {
            return Err(Error::contract("cross_entropy", "label out of range"));
        }
        let v = self.value(logits);
        let mut probs = vec![T::zero(); v.len()];
        let mut loss = T::zero();
        for (b, (src, dst)) in v.chunks(classes).zip(probs.chunks_mut(classes)).enumerate() {
            softmax_run(src, dst);
            loss -= dst[labels[b]].max(T::min_positive_value()).ln();
        }
        loss /= T::of_usize(labels.len().max(1));
        Ok(self.push(
            Op::CrossEntropy {
                probs,
                labels: labels.to_vec(),
                classes,
            },
            vec![logits],
            Vec::new(),
            vec![loss],
        ))
    }

    /// Mean squared error between equally shaped tensors.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::shape("mse", self.shape(pred), self.shape(target)));
        }
        let d = self.sub(pred, target)?;
        let sq = self.square(d);
        Ok(self.mean(sq))
    }

    // ── Backward ─────────────────────────────────────────────────────

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        if numel(self.shape(output)) != 1 {
            return Err(Error::contract(
                "backward",
                format!("output must be scalar, got shape {:?}", self.shape(output)),
            ));
        }
        let n_params = self.store.map_or(0, |s| s.len());
        let mut result = Gradients {
            params: vec![None; n_params],
            leaves: BTreeMap::new(),
        };
        let mut grads: Vec<Option<Vec<T>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(vec![T::one()]);

        for i in (0..=output.0).rev() {
            let Some(gy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {
                    result
                        .leaves
                        .insert(Var(i), Tensor::new(node.shape.clone(), gy).expect("leaf grad shape"));
                    continue;
                }
                Op::Param(id) => {
                    result.params[id.0] = Some(gy);
                    continue;
                }
                _ => {}
            }
            let mut contributions = self.node_backward(i, &gy);
            if let Some((kind, factor)) = self.fault {
                if node.op.kind() == kind {
                    for (_, g) in contributions.iter_mut() {
                        for v in g.iter_mut() {
                            *v *= factor;
                        }
                    }
                }
            }
            for (input, g) in contributions {
                if !self.nodes[input.0].requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&g) {
                            *a += *b;
                        }
                    }
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(result)
    }

    fn node_backward(&self, i: usize, gy: &[T]) -> Vec<(Var, Vec<T>)> {
        let node = &self.nodes[i];
        let ins = &node.inputs;
        let y = node.value.as_deref().unwrap_or(&[]);
        let want = |k: usize| self.nodes[ins[k].0].requires_grad;
        let len_of = |k: usize| numel(&self.nodes[ins[k].0].shape);
        let mut out = Vec::with_capacity(ins.len());
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Add(ma, mb) | Op::Sub(ma, mb) => {
                let neg = matches!(node.op, Op::Sub(..));
                if want(0) {
                    out.push((ins[0], reduce_to(gy, ma, len_of(0))));
                }
                if want(1) {
                    let mut g = reduce_to(gy, mb, len_of(1));
                    if neg {
                        g.iter_mut().for_each(|v| *v = -*v);
                    }
                    out.push((ins[1], g));
                }
            }
            Op::Mul(ma, mb) => {
                let (a, b) = (self.value(ins[0]), self.value(ins[1]));
                if want(0) {
                    let full: Vec<T> = gy.iter().enumerate().map(|(j, &g)| g * b[mb.at(j)]).collect();
                    out.push((ins[0], reduce_to(&full, ma, len_of(0))));
                }
                if want(1) {
                    let full: Vec<T> = gy.iter().enumerate().map(|(j, &g)| g * a[ma.at(j)]).collect();
                    out.push((ins[1], reduce_to(&full, mb, len_of(1))));
                }
            }
            Op::Div(ma, mb) => {
                let (a, b) = (self.value(ins[0]), self.value(ins[1]));
                if want(0) {
                    let full: Vec<T> = gy.iter().enumerate().map(|(j, &g)| g / b[mb.at(j)]).collect();
                    out.push((ins[0], reduce_to(&full, ma, len_of(0))));
                }
                if want(1) {
                    let full: Vec<T> = gy
                        .iter()
                        .enumerate()
                        .map(|(j, &g)| {
                            let bv = b[mb.at(j)];
                            -g * a[ma.at(j)] / (bv * bv)
                        })
                        .collect();
                    out.push((ins[1], reduce_to(&full, mb, len_of(1))));
                }
            }
            Op::Neg => out.push((ins[0], gy.iter().map(|&g| -g).collect())),
            Op::Scale(c) => out.push((ins[0], gy.iter().map(|&g| g * *c).collect())),
            Op::Square => {
                let x = self.value(ins[0]);
                let two = T::of_f64(2.0);
                out.push((ins[0], gy.iter().zip(x).map(|(&g, &v)| g * two * v).collect()));
            }
            Op::Silu => {
                let x = self.value(ins[0]);
                let g = gy
                    .iter()
                    .zip(x)
                    .map(|(&g, &v)| {
                        let s = T::one() / (T::one() + (-v).exp());
                        g * s * (T::one() + v * (T::one() - s))
                    })
                    .collect();
                out.push((ins[0], g));
            }
            Op::Tanh => out.push((ins[0], gy.iter().zip(y).map(|(&g, &t)| g * (T::one() - t * t)).collect())),
            Op::Exp => out.push((ins[0], gy.iter().zip(y).map(|(&g, &e)| g * e).collect())),
            Op::MatMul(plan) => {
                let (m, k, p) = (plan.m, plan.k, plan.p);
                let (a, b) = (self.value(ins[0]), self.value(ins[1]));
                if want(0) {
                    let mut ga = vec![T::zero(); a.len()];
                    for &(o, ia, ib) in &plan.batches {
                        gemm_nt(m, p, k, &gy[o * m * p..], &b[ib * k * p..], &mut ga[ia * m * k..]);
                    }
                    out.push((ins[0], ga));
                }
                if want(1) {
                    let mut gb = vec![T::zero(); b.len()];
                    let shared = b.len() == k * p;
                    if shared && a.len() == plan.batches.len() * m * k {
                        gemm_tn(plan.batches.len() * m, k, p, a, gy, &mut gb);
                    } else {
                        for &(o, ia, ib) in &plan.batches {
                            gemm_tn(m, k, p, &a[ia * m * k..], &gy[o * m * p..], &mut gb[ib * k * p..]);
                        }
                    }
                    out.push((ins[1], gb));
                }
            }
            Op::Permute(perm) => {
                let mut inv = vec![0; perm.len()];
                for (o, &p) in perm.iter().enumerate() {
                    inv[p] = o;
                }
                out.push((ins[0], permute_data(gy, &node.shape, &inv)));
            }
            Op::Reshape => out.push((ins[0], gy.to_vec())),
            Op::SumAll => out.push((ins[0], vec![gy[0]; len_of(0)])),
            Op::MeanAll => {
                let n = len_of(0);
                out.push((ins[0], vec![gy[0] / T::of_usize(n); n]));
            }
            Op::SumAxes { groups, scale } => {
                let mut g = vec![T::zero(); len_of(0)];
                for (ki, &k) in groups.kept.iter().enumerate() {
                    for &r in &groups.reduced {
                        g[k + r] = gy[ki] * *scale;
                    }
                }
                out.push((ins[0], g));
            }
            Op::Softmax(groups) => {
                let mut g = vec![T::zero(); y.len()];
                if groups.is_trailing() {
                    let n = groups.reduced.len();
                    for ((gi, yi), go) in gy.chunks(n).zip(y.chunks(n)).zip(g.chunks_mut(n)) {
                        let dotv: T = gi.iter().zip(yi).map(|(&a, &b)| a * b).sum();
                        for ((o, &a), &b) in go.iter_mut().zip(gi).zip(yi) {
                            *o = b * (a - dotv);
                        }
                    }
                } else {
                    for &k in &groups.kept {
                        let dotv: T = groups.reduced.iter().map(|&r| gy[k + r] * y[k + r]).sum();
                        for &r in &groups.reduced {
                            g[k + r] = y[k + r] * (gy[k + r] - dotv);
                        }
                    }
                }
                out.push((ins[0], g));
            }
            Op::LayerNorm { xhat, rstd } => {
                let gain = self.value(ins[1]);
                let dim = gain.len();
                let inv_d = T::one() / T::of_usize(dim);
                if want(0) {
                    let mut gx = vec![T::zero(); gy.len()];
                    let mut gh = vec![T::zero(); dim];
                    for (row, r) in rstd.iter().enumerate() {
                        let o = row * dim;
                        let mut mean_gh = T::zero();
                        let mut mean_ghx = T::zero();
                        for j in 0..dim {
                            gh[j] = gy[o + j] * gain[j];
                            mean_gh += gh[j];
                            mean_ghx += gh[j] * xhat[o + j];
                        }
                        mean_gh *= inv_d;
                        mean_ghx *= inv_d;
                        for j in 0..dim {
                            gx[o + j] = *r * (gh[j] - mean_gh - xhat[o + j] * mean_ghx);
                        }
                    }
                    out.push((ins[0], gx));
                }
                if want(1) {
                    let mut gg = vec![T::zero(); dim];
                    for (row_g, row_h) in gy.chunks(dim).zip(xhat.chunks(dim)) {
                        for j in 0..dim {
                            gg[j] += row_g[j] * row_h[j];
                        }
                    }
                    out.push((ins[1], gg));
                }
                if want(2) {
                    let mut gb = vec![T::zero(); dim];
                    for row_g in gy.chunks(dim) {
                        for j in 0..dim {
                            gb[j] += row_g[j];
                        }
                    }
                    out.push((ins[2], gb));
                }
            }
            Op::Switch { grid, t } => {
                let x = self.value(ins[0]);
                let den = self.value(ins[1])[0];
                let gsz = grid.len();
                let two = T::of_f64(2.0);
                // dφ/du = −2 t (1 − t²), u = (x − g) / den
                let mut gx = vec![T::zero(); x.len()];
                let mut gden = T::zero();
                for (d, &xv) in x.iter().enumerate() {
                    let mut acc = T::zero();
                    for j in 0..gsz {
                        let o = d * gsz + j;
                        let th = t[o];
                        let dphi_du = -two * th * (T::one() - th * th);
                        acc += gy[o] * dphi_du;
                        gden += gy[o] * dphi_du * (-(xv - grid[j]) / (den * den));
                    }
                    gx[d] = acc / den;
                }
                if want(0) {
                    out.push((ins[0], gx));
                }
                if want(1) {
                    out.push((ins[1], vec![gden]));
                }
            }
            Op::GatherRows { idx, cols } => {
                let mut g = vec![T::zero(); len_of(0)];
                for (i, &r) in idx.iter().enumerate() {
                    for (o, &v) in g[r * cols..(r + 1) * cols].iter_mut().zip(&gy[i * cols..(i + 1) * cols]) {
                        *o += v;
                    }
                }
                out.push((ins[0], g));
            }
            Op::GatherElems(idx) => {
                let mut g = vec![T::zero(); len_of(0)];
                for (i, &e) in idx.iter().enumerate() {
                    g[e] += gy[i];
                }
                out.push((ins[0], g));
            }
            Op::ScatterAddRows { idx, cols } => {
                for (k, rows) in idx.iter().enumerate() {
                    if !want(k) {
                        continue;
                    }
                    let mut g = Vec::with_capacity(rows.len() * cols);
                    for &r in rows {
                        g.extend_from_slice(&gy[r * cols..(r + 1) * cols]);
                    }
                    out.push((ins[k], g));
                }
            }
            Op::Slice { outer, dim, inner, start, len } => {
                let mut g = vec![T::zero(); outer * dim * inner];
                for o in 0..*outer {
                    let dst = (o * dim + start) * inner;
                    let src = o * len * inner;
                    g[dst..dst + len * inner].copy_from_slice(&gy[src..src + len * inner]);
                }
                out.push((ins[0], g));
            }
            Op::Concat { outer, inner, dims } => {
                let total: usize = dims.iter().sum();
                let mut offset = 0;
                for (k, &dim) in dims.iter().enumerate() {
                    if want(k) {
                        let mut g = Vec::with_capacity(outer * dim * inner);
                        for o in 0..*outer {
                            let src = (o * total + offset) * inner;
                            g.extend_from_slice(&gy[src..src + dim * inner]);
                        }
                        out.push((ins[k], g));
                    }
                    offset += dim;
                }
            }
            Op::CrossEntropy { probs, labels, classes } => {
                let scale = gy[0] / T::of_usize(labels.len().max(1));
                let mut g: Vec<T> = probs.iter().map(|&p| p * scale).collect();
                for (b, &l) in labels.iter().enumerate() {
                    g[b * classes + l] -= scale;
                }
                out.push((ins[0], g));
            }
        }
        out
    }
}

fn softmax_run<T: Scalar>(src: &[T], dst: &mut [T]) {
    let mx = src.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = (s - mx).exp();
        total += *d;
    }
    let inv = T::one() / total;
    for d in dst.iter_mut() {
        *d *= inv;
    }
}

/// Sum a broadcast gradient back onto an input of `n` elements.
fn reduce_to<T: Scalar>(g: &[T], map: &BroadcastMap, n: usize) -> Vec<T> {
    match map {
        BroadcastMap::Same => g.to_vec(),
        BroadcastMap::Cyclic(m) => {
            let mut out = vec![T::zero(); *m];
            for chunk in g.chunks(*m) {
                for (o, &v) in out.iter_mut().zip(chunk) {
                    *o += v;
                }
            }
            out
        }
        BroadcastMap::Explicit(idx) => {
            let mut out = vec![T::zero(); n];
            for (&i, &v) in idx.iter().zip(g) {
                out[i] += v;
            }
            out
        }
    }
}

fn permute_data<T: Scalar>(v: &[T], shape: &[usize], perm: &[usize]) -> Vec<T> {
    let st = strides(shape);
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let eff: Vec<usize> = perm.iter().map(|&p| st[p]).collect();
    let n = v.len();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let r = out_shape.len();
    let mut idx = vec![0usize; r];
    let mut cur = 0usize;
    for _ in 0..n {
        out.push(v[cur]);
        for k in (0..r).rev() {
            idx[k] += 1;
            cur += eff[k];
            if idx[k] < out_shape[k] {
                break;
            }
            cur -= eff[k] * idx[k];
            idx[k] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_small_cases() {
        let mut g = Graph::<f64>::new();
        let i2 = g.constant(t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let v = g.constant(t(&[2, 1], &[5.0, 7.0]));
        let r = g.matmul(i2, v).unwrap();
        assert_eq!(g.value(r), &[5.0, 7.0]);

        let a = g.constant(t(&[1, 1], &[2.0]));
        let b = g.constant(t(&[1, 1], &[3.0]));
        let r = g.matmul(a, b).unwrap();
        assert_eq!(g.value(r), &[6.0]);

        let a = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let ones = g.constant(t(&[2, 1], &[1.0, 1.0]));
        let r = g.matmul(a, ones).unwrap();
        assert_eq!(g.shape(r), &[2, 1]);
        assert_eq!(g.value(r), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(Tensor::zeros([2, 3]));
        let b = g.constant(Tensor::zeros([2, 3]));
        match g.matmul(a, b) {
            Err(Error::Shape { lhs, rhs, .. }) => {
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn batched_matmul_broadcasts_batch() {
        let mut g = Graph::<f64>::new();
        let a = g.constant(Tensor::from_fn([2, 3, 2, 4], |i| i as f64 * 0.1));
        let b = g.constant(Tensor::from_fn([3, 4, 5], |i| (i as f64).sin()));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.shape(c), &[2, 3, 2, 5]);
        let (av, bv, cv) = (g.value(a), g.value(b), g.value(c));
        for bi in 0..2 {
            for h in 0..3 {
                for i in 0..2 {
                    for j in 0..5 {
                        let mut s = 0.0;
                        for l in 0..4 {
                            s += av[((bi * 3 + h) * 2 + i) * 4 + l] * bv[(h * 4 + l) * 5 + j];
                        }
                        let got = cv[((bi * 3 + h) * 2 + i) * 5 + j];
                        assert!((got - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn softmax_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[4], &[1.0; 4]));
        let s = g.softmax(x, &[0]).unwrap();
        assert_eq!(g.value(s), &[0.25; 4]);

        let x = g.constant(t(&[2], &[0.0, core::f64::consts::LN_2]));
        let s = g.softmax(x, &[0]).unwrap();
        assert!((g.value(s)[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.value(s)[1] - 2.0 / 3.0).abs() < 1e-15);

        assert!(matches!(g.softmax(x, &[]), Err(Error::Contract { .. })));
    }

    #[test]
    fn softmax_over_middle_axis_normalises_each_slice() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::from_fn([2, 3, 4], |i| ((i * 7) % 5) as f64 - 2.0));
        let s = g.softmax(x, &[1]).unwrap();
        let v = g.value(s);
        for b in 0..2 {
            for k in 0..4 {
                let total: f64 = (0..3).map(|n| v[(b * 3 + n) * 4 + k]).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_norm_examples() {
        let mut g = Graph::<f64>::new();
        let gain = g.constant(Tensor::ones([3]));
        let bias = g.constant(Tensor::zeros([3]));
        let x = g.constant(t(&[3], &[2.5, 2.5, 2.5]));
        let y = g.layer_norm(x, gain, bias, 1e-5).unwrap();
        assert_eq!(g.value(y), &[0.0, 0.0, 0.0]);

        let gain = g.constant(Tensor::ones([2]));
        let bias = g.constant(Tensor::zeros([2]));
        let x = g.constant(t(&[2], &[1.0, 3.0]));
        let y = g.layer_norm(x, gain, bias, 1e-5).unwrap();
        // variance 1, so 1/sqrt(1 + 1e-5)
        let want = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((g.value(y)[0] + want).abs() < 1e-12);
        assert!((g.value(y)[1] - want).abs() < 1e-12);
        assert!((want - 0.999995).abs() < 1e-6);

        let bad_gain = g.constant(Tensor::ones([3]));
        assert!(matches!(g.layer_norm(x, bad_gain, bias, 1e-5), Err(Error::Shape { .. })));
    }

    #[test]
    fn activations() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(t(&[3], &[0.0, 10.0, -1.0]));
        let s = g.silu(x);
        assert_eq!(g.value(s)[0], 0.0);
        assert!((g.value(s)[1] - 9.999546).abs() < 1e-6);
        let th = g.tanh(x);
        assert_eq!(g.value(th)[0], 0.0);
        assert!("relu".parse::<Activation>().is_err());
        assert_eq!("silu".parse::<Activation>().unwrap(), Activation::Silu);
        assert!(g.activation(Activation::Add, &[x]).is_err());
    }

    #[test]
    fn backward_sum_is_ones_and_square_is_twice_x() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(t(&[2, 2], &[1.0, -2.0, 3.0, 0.5]), true);
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).unwrap().data(), &[1.0; 4]);

        let mut g = Graph::<f64>::new();
        let x = g.leaf(t(&[1], &[3.0]), true);
        let sq = g.square(x);
        let s = g.sum(sq);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.wrt(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_skips_unused_leaves() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(t(&[2], &[1.0, 2.0]), true);
        let unused = g.leaf(t(&[2], &[1.0, 2.0]), true);
        let y = g.square(x);
        assert!(matches!(g.backward(y), Err(Error::Contract { .. })));
        let s = g.sum(y);
        let grads = g.backward(s).unwrap();
        assert!(grads.wrt(unused).is_none());
        assert!(grads.wrt(x).is_some());
    }

    #[test]
    fn repeated_param_use_accumulates() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", t(&[1], &[2.0]));
        let mut g = Graph::with_params(&store);
        let a = g.param(w);
        let b = g.param(w);
        assert_eq!(a, b);
        let p = g.mul(a, b).unwrap();
        let s = g.sum(p);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.param(w).unwrap(), &[4.0]);
    }

    #[test]
    fn slice_concat_gather_scatter_values() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::from_fn([2, 3, 2], |i| i as f64));
        let s = g.slice(x, 1, 1, 2).unwrap();
        assert_eq!(g.value(s), &[2.0, 3.0, 4.0, 5.0, 8.0, 9.0, 10.0, 11.0]);
        let a = g.slice(x, 1, 0, 1).unwrap();
        let c = g.concat(&[a, s], 1).unwrap();
        assert_eq!(g.value(c), g.value(x));

        let m = g.constant(Tensor::from_fn([3, 2], |i| i as f64));
        let r = g.gather_rows(m, &[2, 0]).unwrap();
        assert_eq!(g.value(r), &[4.0, 5.0, 0.0, 1.0]);
        let sc = g.scatter_add_rows(3, 2, &[(r, vec![0, 0])]).unwrap();
        assert_eq!(g.value(sc), &[4.0, 6.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn permute_round_trip() {
        let mut g = Graph::<f64>::new();
        let x = g.constant(Tensor::from_fn([2, 3, 4], |i| i as f64));
        let p = g.permute(x, &[2, 0, 1]).unwrap();
        assert_eq!(g.shape(p), &[4, 2, 3]);
        let back = g.permute(p, &[1, 2, 0]).unwrap();
        assert_eq!(g.value(back), g.value(x));
        // element (i,j,k) of x lands at (k,i,j)
        let v = g.value(p);
        assert_eq!(v[(3 * 2 + 1) * 3 + 2], ((1 * 3 + 2) * 4 + 3) as f64);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor::zeros([2, 4]), true);
        let l = g.cross_entropy(x, &[0, 3]).unwrap();
        assert!((g.value(l)[0] - 4f64.ln()).abs() < 1e-12);
        let grads = g.backward(l).unwrap();
        let gx = grads.wrt(x).unwrap().data();
        assert!((gx[0] - (0.25 - 1.0) / 2.0).abs() < 1e-12);
        assert!((gx[1] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn replay_is_bit_identical() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor::from_fn([3, 4], |i| (i as f64 * 0.3).sin()), true);
        let w = g.leaf(Tensor::from_fn([4, 2], |i| (i as f64 * 0.7).cos()), true);
        let y = g.matmul(x, w).unwrap();
        let s = g.softmax(y, &[1]).unwrap();
        let sq = g.square(s);
        let l = g.sum(sq);
        assert_eq!(g.backward(l).unwrap(), g.backward(l).unwrap());
    }
}
