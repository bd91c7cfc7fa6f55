//! Define-by-run computation graph with reverse-mode gradient propagation.
//!
//! Every builder method evaluates its operation eagerly and appends a node. Nodes
//! can only reference earlier nodes, so the node list is always in topological
//! order and the backward pass is a single reverse sweep.

use crate::error::{shape_err, Error, Result};
use crate::labels::LabelMap;
use crate::layers::conv::{conv2d_backward, conv2d_forward, ConvSpec};
use crate::layers::loss::{phi_backward, phi_loss, ScoreForm};
use crate::layers::pool::{max_pool2, max_pool2_backward};
use crate::layers::softmax::{softmax_channels, softmax_channels_backward};
use crate::layers::upsample::{upsample_backward, upsample_bilinear};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Op<S> {
    Leaf,
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        spec: ConvSpec,
    },
    MaxPool2 {
        x: Var,
        argmax: Vec<u32>,
    },
    Relu(Var),
    Sigmoid(Var),
    Upsample {
        x: Var,
        factor: usize,
    },
    Add(Var, Var),
    /// `b` is either the same shape as `a` or a (N, 1, H, W) map broadcast over channels.
    Mul(Var, Var),
    Scale(Var, S),
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Softmax(Var),
    Sum(Var),
    Phi {
        pred: Var,
        labels: LabelMap,
        form: ScoreForm,
        counted: usize,
    },
}

impl<S> Op<S> {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, b, .. } => {
                let mut v = vec![*x, *w];
                v.extend(b);
                v
            }
            Op::MaxPool2 { x, .. }
            | Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::Upsample { x, .. }
            | Op::Scale(x, _)
            | Op::Slice { x, .. }
            | Op::Softmax(x)
            | Op::Sum(x) => vec![*x],
            Op::Phi { pred, .. } => vec![*pred],
            Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Concat(xs) => xs.clone(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool2 { .. } => "max_pool2",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Upsample { .. } => "upsample",
            Op::Add(..) => "add",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::Softmax(_) => "softmax",
            Op::Sum(_) => "sum",
            Op::Phi { .. } => "phi_loss",
        }
    }
}

#[derive(Clone, Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    param: Option<ParamId>,
    needs_grad: bool,
}

/// Recorded operations of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

/// Gradients of a scalar with respect to every node that needed one.
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, v: Var) -> Option<&[S]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
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

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    /// Name of the operation that produced `v`.
    pub fn op_name(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.name()
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 >= self.nodes.len() {
            return Err(Error::Construction(format!(
                "node {} referenced before it was recorded ({} nodes)",
                v.0,
                self.nodes.len()
            )));
        }
        Ok(())
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Result<Var> {
        let inputs = op.inputs();
        for v in &inputs {
            self.check(*v)?;
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            param: None,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            param: None,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf whose gradient is reported by [`Graph::backward`].
    pub fn variable(&mut self, t: Tensor<S>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            param: None,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf bound to a stored parameter; [`Graph::backward_into`] writes its gradient back.
    pub fn param(&mut self, store: &ParamStore<S>, id: ParamId) -> Var {
        let t = store.get(id);
        self.nodes.push(Node {
            value: Tensor::from_vec(t.shape(), t.data().to_vec()).expect("valid param"),
            op: Op::Leaf,
            param: Some(id),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var> {
        self.check(x)?;
        self.check(w)?;
        if let Some(b) = b {
            self.check(b)?;
        }
        let y = conv2d_forward(
            &spec,
            self.value(x),
            self.value(w),
            b.map(|b| self.value(b)),
        )?;
        self.push(y, Op::Conv2d { x, w, b, spec })
    }

    pub fn max_pool2(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let (y, argmax) = max_pool2(self.value(x))?;
        self.push(y, Op::MaxPool2 { x, argmax })
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let y = Tensor::from_vec(t.shape(), t.data().iter().map(|v| v.max(S::zero())).collect())?;
        self.push(y, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let y = Tensor::from_vec(t.shape(), t.data().iter().map(|v| sigmoid(*v)).collect())?;
        self.push(y, Op::Sigmoid(x))
    }

    /// Bilinear upsampling by an integer factor (align-corners false).
    pub fn upsample(&mut self, x: Var, factor: usize) -> Result<Var> {
        self.check(x)?;
        let y = upsample_bilinear(self.value(x), factor)?;
        self.push(y, Op::Upsample { x, factor })
    }

    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        self.upsample(x, 2)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err!("add: {} vs {}", ta.shape(), tb.shape()));
        }
        let y = Tensor::from_vec(
            ta.shape(),
            ta.data().iter().zip(tb.data()).map(|(x, y)| *x + *y).collect(),
        )?;
        self.push(y, Op::Add(a, b))
    }

    /// Sums a non-empty list left to right.
    pub fn add_all(&mut self, xs: &[Var]) -> Result<Var> {
        let (first, rest) = xs
            .split_first()
            .ok_or_else(|| shape_err!("add_all of an empty list"))?;
        let mut acc = *first;
        for x in rest {
            acc = self.add(acc, *x)?;
        }
        Ok(acc)
    }

    /// Elementwise product. `b` may be a (N, 1, H, W) map, broadcast over `a`'s channels.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        let y = if sa == sb {
            ta.data().iter().zip(tb.data()).map(|(x, y)| *x * *y).collect()
        } else if sb == sa.with_channels(1) {
            let [n, c, h, w] = sa.0;
            let plane = h * w;
            let mut out = Vec::with_capacity(sa.numel());
            for b in 0..n {
                let m = &tb.data()[b * plane..(b + 1) * plane];
                for ch in 0..c {
                    let off = (b * c + ch) * plane;
                    out.extend(ta.data()[off..off + plane].iter().zip(m).map(|(x, y)| *x * *y));
                }
            }
            out
        } else {
            return Err(shape_err!("mul: {sa} is not compatible with {sb}"));
        };
        let y = Tensor::from_vec(sa, y)?;
        self.push(y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, factor: S) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let y = Tensor::from_vec(t.shape(), t.data().iter().map(|v| *v * factor).collect())?;
        self.push(y, Op::Scale(x, factor))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.scale(b, -S::one())?;
        self.add(a, nb)
    }

    /// Concatenates along channels, preserving input order.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or_else(|| shape_err!("concat of an empty list"))?;
        for x in xs {
            self.check(*x)?;
        }
        let s0 = self.shape(first);
        let mut channels = 0;
        for x in xs {
            let s = self.shape(*x);
            if s.with_channels(1) != s0.with_channels(1) {
                return Err(shape_err!("concat: {s0} vs {s}"));
            }
            channels += s.channels();
        }
        let out = s0.with_channels(channels);
        let mut data = Vec::with_capacity(out.numel());
        for b in 0..s0.batch() {
            for x in xs {
                let t = self.value(*x);
                let per = t.shape().channels() * t.shape().plane();
                data.extend_from_slice(&t.data()[b * per..(b + 1) * per]);
            }
        }
        let y = Tensor::from_vec(out, data)?;
        self.push(y, Op::Concat(xs.to_vec()))
    }

    /// Channels `start..start + len`.
    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        self.check(x)?;
        let t = self.value(x);
        let s = t.shape();
        if len == 0 || start + len > s.channels() {
            return Err(shape_err!("slice {start}..{} of {s}", start + len));
        }
        let plane = s.plane();
        let mut data = Vec::with_capacity(s.batch() * len * plane);
        for b in 0..s.batch() {
            let off = (b * s.channels() + start) * plane;
            data.extend_from_slice(&t.data()[off..off + len * plane]);
        }
        let y = Tensor::from_vec(s.with_channels(len), data)?;
        self.push(y, Op::Slice { x, start })
    }

    /// Per-pixel softmax across channels.
    pub fn softmax_channels(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let y = softmax_channels(self.value(x));
        self.push(y, Op::Softmax(x))
    }

    /// Sum of all elements as a (1,1,1,1) scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.check(x)?;
        let s: S = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Mean over non-ignored pixels of -log p(label).
    pub fn phi_loss(&mut self, pred: Var, labels: &LabelMap, form: ScoreForm) -> Result<Var> {
        self.check(pred)?;
        let v = phi_loss(self.value(pred), labels, form)?;
        self.push(
            Tensor::scalar(v.loss),
            Op::Phi {
                pred,
                labels: labels.clone(),
                form,
                counted: v.counted,
            },
        )
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        self.check(loss)?;
        let lt = self.value(loss);
        if !lt.shape().is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss of shape (1,1,1,1), got {}",
                lt.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![S::one()]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backward_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Runs [`Graph::backward`] and accumulates gradients into the bound parameters.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore<S>) -> Result<()> {
        let grads = self.backward(loss)?;
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Some(id), Some(g)) = (node.param, grads.grads[i].as_ref()) {
                store.get_mut(id).accumulate_grad(g)?;
            }
        }
        Ok(())
    }

    fn backward_node(&self, node: &Node<S>, g: &[S], grads: &mut [Option<Vec<S>>]) {
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        let numel = |v: Var| self.nodes[v.0].value.data().len();
        // Takes the gradient buffer of `v` out of `grads`, allocating zeros.
        fn slot<S: Scalar>(grads: &mut [Option<Vec<S>>], v: Var, len: usize) -> Vec<S> {
            grads[v.0].take().unwrap_or_else(|| vec![S::zero(); len])
        }
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { x, w, b, spec } => {
                let mut dx = wants(*x).then(|| slot(grads, *x, numel(*x)));
                let mut dw = wants(*w).then(|| slot(grads, *w, numel(*w)));
                let mut db = b.filter(|b| wants(*b)).map(|b| slot(grads, b, numel(b)));
                conv2d_backward(
                    spec,
                    self.value(*x),
                    self.value(*w),
                    g,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                if let Some(dx) = dx {
                    grads[x.0] = Some(dx);
                }
                if let Some(dw) = dw {
                    grads[w.0] = Some(dw);
                }
                if let (Some(db), Some(b)) = (db, b) {
                    grads[b.0] = Some(db);
                }
            }
            Op::MaxPool2 { x, argmax } => {
                let mut dx = slot(grads, *x, numel(*x));
                max_pool2_backward(argmax, g, &mut dx);
                grads[x.0] = Some(dx);
            }
            Op::Relu(x) => {
                let mut dx = slot(grads, *x, numel(*x));
                for ((d, gi), xv) in dx.iter_mut().zip(g).zip(self.value(*x).data()) {
                    if *xv > S::zero() {
                        *d = *d + *gi;
                    }
                }
                grads[x.0] = Some(dx);
            }
            Op::Sigmoid(x) => {
                let mut dx = slot(grads, *x, numel(*x));
                for ((d, gi), y) in dx.iter_mut().zip(g).zip(node.value.data()) {
                    *d = *d + *gi * *y * (S::one() - *y);
                }
                grads[x.0] = Some(dx);
            }
            Op::Upsample { x, factor } => {
                let mut dx = slot(grads, *x, numel(*x));
                upsample_backward(self.shape(*x), *factor, g, &mut dx);
                grads[x.0] = Some(dx);
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if wants(v) {
                        let mut d = slot(grads, v, numel(v));
                        for (d, gi) in d.iter_mut().zip(g) {
                            *d = *d + *gi;
                        }
                        grads[v.0] = Some(d);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let broadcast = ta.shape() != tb.shape();
                let [n, c, h, w] = ta.shape().0;
                let plane = h * w;
                let bidx = |i: usize| {
                    if broadcast {
                        (i / (c * plane)) * plane + i % plane
                    } else {
                        i
                    }
                };
                if wants(*a) {
                    let mut da = slot(grads, *a, numel(*a));
                    for (i, (d, gi)) in da.iter_mut().zip(g).enumerate() {
                        *d = *d + *gi * tb.data()[bidx(i)];
                    }
                    grads[a.0] = Some(da);
                }
                if wants(*b) {
                    let mut db = slot(grads, *b, numel(*b));
                    for i in 0..n * c * plane {
                        let j = bidx(i);
                        db[j] = db[j] + g[i] * ta.data()[i];
                    }
                    grads[b.0] = Some(db);
                }
            }
            Op::Scale(x, f) => {
                let mut dx = slot(grads, *x, numel(*x));
                for (d, gi) in dx.iter_mut().zip(g) {
                    *d = *d + *gi * *f;
                }
                grads[x.0] = Some(dx);
            }
            Op::Concat(xs) => {
                let out = node.value.shape();
                let plane = out.plane();
                let mut offset = 0;
                for x in xs {
                    let cx = self.shape(*x).channels();
                    if wants(*x) {
                        let mut dx = slot(grads, *x, numel(*x));
                        for b in 0..out.batch() {
                            let src = (b * out.channels() + offset) * plane;
                            let dst = b * cx * plane;
                            for k in 0..cx * plane {
                                dx[dst + k] = dx[dst + k] + g[src + k];
                            }
                        }
                        grads[x.0] = Some(dx);
                    }
                    offset += cx;
                }
            }
            Op::Slice { x, start } => {
                let s = self.shape(*x);
                let len = node.value.shape().channels();
                let plane = s.plane();
                let mut dx = slot(grads, *x, numel(*x));
                for b in 0..s.batch() {
                    let dst = (b * s.channels() + start) * plane;
                    let src = b * len * plane;
                    for k in 0..len * plane {
                        dx[dst + k] = dx[dst + k] + g[src + k];
                    }
                }
                grads[x.0] = Some(dx);
            }
            Op::Softmax(x) => {
                let mut dx = slot(grads, *x, numel(*x));
                softmax_channels_backward(&node.value, g, &mut dx);
                grads[x.0] = Some(dx);
            }
            Op::Sum(x) => {
                let mut dx = slot(grads, *x, numel(*x));
                dx.iter_mut().for_each(|d| *d = *d + g[0]);
                grads[x.0] = Some(dx);
            }
            Op::Phi {
                pred,
                labels,
                form,
                counted,
            } => {
                let mut dx = slot(grads, *pred, numel(*pred));
                phi_backward(self.value(*pred), labels, *form, *counted, g[0], &mut dx);
                grads[pred.0] = Some(dx);
            }
        }
    }
}

pub(crate) fn sigmoid<S: Scalar>(v: S) -> S {
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_of_sum_is_ones() {
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::full(Shape::new(1, 1, 2, 2), 0.3));
        let l = g.sum(x).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[1.0; 4]);
    }

    #[test]
    fn grad_of_sum_of_squares() {
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let sq = g.mul(x, x).unwrap();
        let l = g.sum(sq).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[2.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn non_scalar_loss_is_contract_error() {
        let mut g = Graph::<f32>::new();
        let x = g.variable(Tensor::zeros(Shape::new(1, 1, 1, 2)));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn forward_reference_is_construction_error() {
        let mut g = Graph::<f32>::new();
        let x = g.variable(Tensor::zeros(Shape::SCALAR));
        assert!(matches!(g.relu(Var(5)), Err(Error::Construction(_))));
        assert!(g.relu(x).is_ok());
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::<f64>::new();
        let c = g.constant(Tensor::full(Shape::SCALAR, 2.0));
        let x = g.variable(Tensor::full(Shape::SCALAR, 3.0));
        let y = g.mul(x, c).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).unwrap(), &[2.0]);
        assert!(grads.get(c).is_none());
    }

    #[test]
    fn params_receive_accumulated_grads() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::full(Shape::new(1, 1, 1, 2), 1.5)).unwrap();
        for _ in 0..2 {
            let mut g = Graph::new();
            let w = g.param(&store, id);
            let l = g.sum(w).unwrap();
            g.backward_into(l, &mut store).unwrap();
        }
        assert_eq!(store.get(id).grad().unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn each_node_visited_once_in_diamond() {
        // y = x + x, l = sum(y * y) -> dl/dx = 8x
        let mut g = Graph::<f64>::new();
        let x = g.variable(Tensor::full(Shape::SCALAR, 0.5));
        let y = g.add(x, x).unwrap();
        let z = g.mul(y, y).unwrap();
        let l = g.sum(z).unwrap();
        assert_eq!(g.backward(l).unwrap().get(x).unwrap(), &[4.0]);
    }

    #[test]
    fn mul_broadcast_map() {
        let mut g = Graph::<f64>::new();
        let a = g.variable(Tensor::from_fn(Shape::new(1, 3, 1, 2), |[_, c, _, w]| (c * 2 + w) as f64));
        let m = g.variable(Tensor::from_vec(Shape::new(1, 1, 1, 2), vec![2.0, -1.0]).unwrap());
        let y = g.mul(a, m).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, -1.0, 4.0, -3.0, 8.0, -5.0]);
        let l = g.sum(y).unwrap();
        let gr = g.backward(l).unwrap();
        assert_eq!(gr.get(m).unwrap(), &[6.0, 9.0]);
        assert_eq!(gr.get(a).unwrap(), &[2.0, -1.0, 2.0, -1.0, 2.0, -1.0]);
    }

    #[test]
    fn concat_preserves_order() {
        let mut g = Graph::<f32>::new();
        let a = g.constant(Tensor::full(Shape::new(1, 3, 4, 4), 1.0));
        let b = g.constant(Tensor::full(Shape::new(1, 2, 4, 4), 2.0));
        let c = g.concat(&[a, b]).unwrap();
        assert_eq!(g.shape(c), Shape::new(1, 5, 4, 4));
        assert_eq!(g.value(c).at(0, 2, 3, 3), 1.0);
        assert_eq!(g.value(c).at(0, 3, 0, 0), 2.0);
        let s = g.slice_channels(c, 3, 2).unwrap();
        assert_eq!(g.value(s), g.value(b));
    }

    #[test]
    fn sigmoid_zero_is_half() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-800.0f64).is_finite());
        assert!(sigmoid(800.0f32).is_finite());
    }
}
