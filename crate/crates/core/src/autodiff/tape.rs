use super::store::ParameterStore;
use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Identifies one entry of one [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamRef {
    pub store: u32,
    pub index: usize,
}

/// The closed set of differentiable operations.
///
/// All operations act on the matrix view of a tensor (leading axes folded into
/// rows, last axis as columns).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpKind {
    /// `[m,k] x [k,n] -> [m,n]`
    MatMul,
    /// Elementwise sum; the second operand may also be a `[1,n]` row added to every row.
    Add,
    Sub,
    Mul,
    Div,
    ScalarMul(f32),
    /// Concatenation along the last axis of any number of inputs.
    Concat,
    Tanh,
    Sigmoid,
    Sqrt,
    /// Columns `start..end` of the last axis.
    Slice { start: usize, end: usize },
    MeanAll,
    SumAll,
    Abs,
    Square,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Apply(OpKind),
}

#[derive(Debug)]
struct Node {
    op: Op,
    inputs: Vec<usize>,
    value: Tensor,
    requires_grad: bool,
    param: Option<ParamRef>,
}

/// Append-only record of a forward computation.
///
/// Nodes are stored in creation order, which is a topological order because an
/// operation can only consume nodes that already exist.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every node that requires one.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f32>>>,
    params: Vec<(ParamRef, usize)>,
}

impl Gradients {
    /// Gradient with respect to `node`, if it takes part in differentiation.
    pub fn wrt(&self, node: NodeId) -> Option<&[f32]> {
        self.at(node.0)
    }

    /// Gradient with respect to the node at tape position `index`.
    pub fn at(&self, index: usize) -> Option<&[f32]> {
        self.grads.get(index).and_then(|g| g.as_deref())
    }

    /// Adds parameter gradients into the accumulators of the matching stores.
    pub fn accumulate_into(&self, stores: &mut [&mut ParameterStore]) {
        for &(pref, node) in &self.params {
            let Some(g) = self.grads[node].as_deref() else {
                continue;
            };
            if let Some(store) = stores.iter_mut().find(|s| s.tag() == pref.store) {
                store.accumulate(pref.index, g);
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Structure of node `index`: its operation (`None` for leaves), input
    /// indices, recorded value and whether it takes part in differentiation.
    pub fn node(&self, index: usize) -> (Option<OpKind>, &[usize], &Tensor, bool) {
        let n = &self.nodes[index];
        let kind = match n.op {
            Op::Leaf => None,
            Op::Apply(k) => Some(k),
        };
        (kind, &n.inputs, &n.value, n.requires_grad)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool, param: Option<ParamRef>) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            inputs: Vec::new(),
            value,
            requires_grad,
            param,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(value, false, None)
    }

    /// A free input whose gradient can be read back from [`Gradients::wrt`].
    pub fn variable(&mut self, value: Tensor) -> NodeId {
        self.push_leaf(value, true, None)
    }

    /// A trainable parameter; its gradient is routed back to `store`.
    pub fn param(&mut self, store: &ParameterStore, index: usize) -> NodeId {
        let pref = ParamRef {
            store: store.tag(),
            index,
        };
        self.push_leaf(store.value(index).clone(), true, Some(pref))
    }

    /// A parameter read as a constant (frozen network).
    pub fn frozen(&mut self, store: &ParameterStore, index: usize) -> NodeId {
        self.constant(store.value(index).clone())
    }

    /// Records `kind` applied to `inputs`.
    pub fn forward_op(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        let vals: Vec<&Tensor> = inputs.iter().map(|i| &self.nodes[i.0].value).collect();
        let value = eval(kind, &vals)?;
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op: Op::Apply(kind),
            inputs: inputs.iter().map(|i| i.0).collect(),
            value,
            requires_grad,
            param: None,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Add, &[a, b])
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Mul, &[a, b])
    }
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Div, &[a, b])
    }
    pub fn scale(&mut self, a: NodeId, c: f32) -> Result<NodeId> {
        self.forward_op(OpKind::ScalarMul(c), &[a])
    }
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.forward_op(OpKind::Concat, parts)
    }
    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Tanh, &[a])
    }
    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Sigmoid, &[a])
    }
    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Sqrt, &[a])
    }
    pub fn slice(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.forward_op(OpKind::Slice { start, end }, &[a])
    }
    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::MeanAll, &[a])
    }
    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::SumAll, &[a])
    }
    pub fn abs(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Abs, &[a])
    }
    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Square, &[a])
    }

    /// Affine map `x · w + b` with `b` a `[1,n]` row.
    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        let root_val = &self.nodes[root.0].value;
        if root_val.len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar root, got dims {:?}",
                root_val.dims()
            )));
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; root.0 + 1];
        if self.nodes[root.0].requires_grad {
            grads[root.0] = Some(vec![1.0]);
        }
        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            let Op::Apply(kind) = node.op else { continue };
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(kind, node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        let params = self.nodes[..=root.0]
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.map(|p| (p, i)))
            .collect();
        Ok(Gradients { grads, params })
    }

    /// Backward pass whose parameter gradients are added into `stores`.
    pub fn backward_into(&self, root: NodeId, stores: &mut [&mut ParameterStore]) -> Result<()> {
        self.backward(root)?.accumulate_into(stores);
        Ok(())
    }

    fn backprop_node(&self, kind: OpKind, node: &Node, g: &[f32], grads: &mut [Option<Vec<f32>>]) {
        let inp = |k: usize| &self.nodes[node.inputs[k]];
        let wants = |k: usize| inp(k).requires_grad;
        let out = node.value.data();
        match kind {
            OpKind::MatMul => {
                let a = &inp(0).value;
                let b = &inp(1).value;
                let (m, k, n) = (a.rows(), a.cols(), b.cols());
                if wants(0) {
                    // dA = dC · Bᵀ
                    let acc = grad_slot(grads, node.inputs[0], m * k);
                    gemm(m, n, k, g, (n as isize, 1), b.data(), (1, n as isize), acc, true);
                }
                if wants(1) {
                    // dB = Aᵀ · dC
                    let acc = grad_slot(grads, node.inputs[1], k * n);
                    gemm(k, m, n, a.data(), (1, k as isize), g, (n as isize, 1), acc, true);
                }
            }
            OpKind::Add | OpKind::Sub => {
                let sign = if matches!(kind, OpKind::Add) { 1.0 } else { -1.0 };
                if wants(0) {
                    add_into(grad_slot(grads, node.inputs[0], g.len()), g, 1.0);
                }
                if wants(1) {
                    let b = &inp(1).value;
                    let acc = grad_slot(grads, node.inputs[1], b.len());
                    if b.len() == g.len() {
                        add_into(acc, g, sign);
                    } else {
                        let n = b.len();
                        for row in g.chunks_exact(n) {
                            add_into(acc, row, sign);
                        }
                    }
                }
            }
            OpKind::Mul => {
                let a = inp(0).value.data();
                let b = inp(1).value.data();
                if wants(0) {
                    let acc = grad_slot(grads, node.inputs[0], a.len());
                    for ((s, &gi), &bi) in acc.iter_mut().zip(g).zip(b) {
                        *s += gi * bi;
                    }
                }
                if wants(1) {
                    let acc = grad_slot(grads, node.inputs[1], b.len());
                    for ((s, &gi), &ai) in acc.iter_mut().zip(g).zip(a) {
                        *s += gi * ai;
                    }
                }
            }
            OpKind::Div => {
                let b = inp(1).value.data();
                if wants(0) {
                    let acc = grad_slot(grads, node.inputs[0], b.len());
                    for ((s, &gi), &bi) in acc.iter_mut().zip(g).zip(b) {
                        *s += gi / bi;
                    }
                }
                if wants(1) {
                    // d(a/b)/db = -(a/b)/b
                    let acc = grad_slot(grads, node.inputs[1], b.len());
                    for (((s, &gi), &bi), &q) in acc.iter_mut().zip(g).zip(b).zip(out) {
                        *s -= gi * q / bi;
                    }
                }
            }
            OpKind::ScalarMul(c) => {
                if wants(0) {
                    add_into(grad_slot(grads, node.inputs[0], g.len()), g, c);
                }
            }
            OpKind::Concat => {
                let rows = node.value.rows();
                let total = node.value.cols();
                let mut offset = 0;
                for (k, &src) in node.inputs.iter().enumerate() {
                    let w = self.nodes[src].value.cols();
                    if wants(k) {
                        let acc = grad_slot(grads, src, rows * w);
                        for r in 0..rows {
                            add_into(
                                &mut acc[r * w..(r + 1) * w],
                                &g[r * total + offset..r * total + offset + w],
                                1.0,
                            );
                        }
                    }
                    offset += w;
                }
            }
            OpKind::Slice { start, end } => {
                if wants(0) {
                    let src = &inp(0).value;
                    let (rows, cols, w) = (src.rows(), src.cols(), end - start);
                    let acc = grad_slot(grads, node.inputs[0], rows * cols);
                    for r in 0..rows {
                        add_into(&mut acc[r * cols + start..r * cols + end], &g[r * w..(r + 1) * w], 1.0);
                    }
                }
            }
            OpKind::MeanAll | OpKind::SumAll => {
                if wants(0) {
                    let n = inp(0).value.len();
                    let v = if matches!(kind, OpKind::MeanAll) { g[0] / n as f32 } else { g[0] };
                    for s in grad_slot(grads, node.inputs[0], n) {
                        *s += v;
                    }
                }
            }
            OpKind::Tanh | OpKind::Sigmoid | OpKind::Sqrt | OpKind::Abs | OpKind::Square => {
                if !wants(0) {
                    return;
                }
                let x = inp(0).value.data();
                let acc = grad_slot(grads, node.inputs[0], x.len());
                for i in 0..x.len() {
                    let d = match kind {
                        OpKind::Tanh => 1.0 - out[i] * out[i],
                        OpKind::Sigmoid => out[i] * (1.0 - out[i]),
                        OpKind::Sqrt => 0.5 / out[i],
                        OpKind::Abs => sign(x[i]),
                        _ => 2.0 * x[i],
                    };
                    acc[i] += g[i] * d;
                }
            }
        }
    }
}

fn sign(x: f32) -> f32 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn grad_slot(grads: &mut [Option<Vec<f32>>], idx: usize, len: usize) -> &mut [f32] {
    grads[idx].get_or_insert_with(|| vec![0.0; len])
}

fn add_into(acc: &mut [f32], g: &[f32], scale: f32) {
    for (a, &b) in acc.iter_mut().zip(g) {
        *a += scale * b;
    }
}

fn same_dims(kind: OpKind, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!("{kind:?}: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

fn map(a: &Tensor, f: impl Fn(f32) -> f32) -> Tensor {
    a.with_data(a.data().iter().map(|&v| f(v)).collect())
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f32, f32) -> f32) -> Tensor {
    a.with_data(a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect())
}

fn arity(kind: OpKind, inputs: &[&Tensor], n: usize) -> Result<()> {
    if inputs.len() != n {
        return Err(Error::Shape(format!("{kind:?} takes {n} inputs, got {}", inputs.len())));
    }
    Ok(())
}

fn eval(kind: OpKind, inputs: &[&Tensor]) -> Result<Tensor> {
    match kind {
        OpKind::MatMul => {
            arity(kind, inputs, 2)?;
            let (a, b) = (inputs[0], inputs[1]);
            if a.dims().len() != 2 || b.dims().len() != 2 || a.cols() != b.rows() {
                return Err(Error::Shape(format!("matmul: {:?} x {:?}", a.dims(), b.dims())));
            }
            let (m, k, n) = (a.rows(), a.cols(), b.cols());
            let mut out = vec![0.0; m * n];
            gemm(m, k, n, a.data(), (k as isize, 1), b.data(), (n as isize, 1), &mut out, false);
            Tensor::matrix(m, n, out)
        }
        OpKind::Add => {
            arity(kind, inputs, 2)?;
            let (a, b) = (inputs[0], inputs[1]);
            if a.dims() == b.dims() {
                Ok(zip(a, b, |x, y| x + y))
            } else if b.dims() == [1, a.cols()] {
                let n = a.cols();
                let mut data = a.data().to_vec();
                for row in data.chunks_exact_mut(n) {
                    add_into(row, b.data(), 1.0);
                }
                Ok(a.with_data(data))
            } else {
                Err(Error::Shape(format!("add: {:?} + {:?}", a.dims(), b.dims())))
            }
        }
        OpKind::Sub | OpKind::Mul | OpKind::Div => {
            arity(kind, inputs, 2)?;
            let (a, b) = (inputs[0], inputs[1]);
            same_dims(kind, a, b)?;
            Ok(match kind {
                OpKind::Sub => zip(a, b, |x, y| x - y),
                OpKind::Mul => zip(a, b, |x, y| x * y),
                _ => zip(a, b, |x, y| x / y),
            })
        }
        OpKind::ScalarMul(c) => {
            arity(kind, inputs, 1)?;
            Ok(map(inputs[0], |x| c * x))
        }
        OpKind::Concat => {
            if inputs.is_empty() {
                return Err(Error::Shape("concat of zero tensors".into()));
            }
            let lead = &inputs[0].dims()[..inputs[0].dims().len() - 1];
            for t in inputs {
                if &t.dims()[..t.dims().len() - 1] != lead {
                    return Err(Error::Shape(format!(
                        "concat: leading dims {:?} vs {:?}",
                        inputs[0].dims(),
                        t.dims()
                    )));
                }
            }
            let rows = inputs[0].rows();
            let total: usize = inputs.iter().map(|t| t.cols()).sum();
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for t in inputs {
                    data.extend_from_slice(t.row(r));
                }
            }
            let mut dims = lead.to_vec();
            dims.push(total);
            Tensor::new(dims, data)
        }
        OpKind::Slice { start, end } => {
            arity(kind, inputs, 1)?;
            let a = inputs[0];
            if start >= end || end > a.cols() {
                return Err(Error::Shape(format!("slice {start}..{end} of {:?}", a.dims())));
            }
            let mut data = Vec::with_capacity(a.rows() * (end - start));
            for r in 0..a.rows() {
                data.extend_from_slice(&a.row(r)[start..end]);
            }
            let mut dims = a.dims().to_vec();
            *dims.last_mut().unwrap() = end - start;
            Tensor::new(dims, data)
        }
        OpKind::MeanAll => {
            arity(kind, inputs, 1)?;
            let a = inputs[0];
            Ok(Tensor::scalar(a.data().iter().sum::<f32>() / a.len() as f32))
        }
        OpKind::SumAll => {
            arity(kind, inputs, 1)?;
            Ok(Tensor::scalar(inputs[0].data().iter().sum()))
        }
        OpKind::Tanh => {
            arity(kind, inputs, 1)?;
            Ok(map(inputs[0], f32::tanh))
        }
        OpKind::Sigmoid => {
            arity(kind, inputs, 1)?;
            Ok(map(inputs[0], |x| 1.0 / (1.0 + (-x).exp())))
        }
        OpKind::Sqrt => {
            arity(kind, inputs, 1)?;
            Ok(map(inputs[0], f32::sqrt))
        }
        OpKind::Abs => {
            arity(kind, inputs, 1)?;
            Ok(map(inputs[0], f32::abs))
        }
        OpKind::Square => {
            arity(kind, inputs, 1)?;
            Ok(map(inputs[0], |x| x * x))
        }
    }
}
