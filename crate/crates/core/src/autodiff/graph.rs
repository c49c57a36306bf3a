//! Per-step computation graph. Nodes are appended in evaluation order, so
//! walking them backwards is a valid reverse topological traversal.

use std::sync::Arc;

use super::tensor::{numel, Tensor};
use crate::dsp::Fourier;
use crate::error::{bail, Result};
use crate::real::Real;

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum DiffAxis {
    /// Last axis (bins).
    Last,
    /// Second-to-last axis (frames).
    Frames,
}

pub(crate) enum Op<T: Real> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var),
    MatMul(Var, Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    DepthwiseConv { x: Var, w: Var, b: Option<Var> },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<T>, rstd: Vec<f64> },
    Sin(Var),
    Cos(Var),
    Exp(Var),
    Log(Var),
    Abs(Var),
    ClampMin(Var, T),
    Mean(Var),
    Sum(Var),
    Transpose(Var),
    Reshape(Var),
    Concat(Var, Var),
    Snake { x: Var, alpha: Var },
    Gelu(Var),
    Grn { x: Var, gamma: Var, beta: Var, gx: Vec<f64>, nx: Vec<f64>, denom: Vec<f64> },
    Atan2 { y: Var, x: Var },
    AntiWrap(Var),
    Diff(Var, DiffAxis),
    Magnitude { re: Var, im: Var },
    Synthesize { re: Var, im: Var, fourier: Arc<Fourier<T>>, frames: usize, inv_wsum: Arc<Vec<T>> },
    Analyze { x: Var, fourier: Arc<Fourier<T>>, frames: usize },
    Select { x: Var, part: usize },
    SliceLast { x: Var, start: usize },
    ReflectPad { x: Var, pad: usize },
}

pub(crate) struct Node<T: Real> {
    pub value: Vec<T>,
    pub shape: Vec<usize>,
    pub op: Op<T>,
    pub requires_grad: bool,
}

/// Arena of differentiable tensors built for one forward pass.
pub struct Graph<T: Real> {
    pub(crate) nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.data().to_vec(), t.shape().to_vec(), Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.data().to_vec(), t.shape().to_vec(), Op::Leaf, false)
    }

    pub fn constant_vec(&mut self, shape: &[usize], data: Vec<T>) -> Result<Var> {
        if numel(shape) != data.len() {
            bail!(Shape, "shape {shape:?} needs {} values, got {}", numel(shape), data.len());
        }
        Ok(self.push(data, shape.to_vec(), Op::Leaf, false))
    }

    /// Copy of `v` with no gradient path back to its inputs.
    pub fn detach(&mut self, v: Var) -> Var {
        let n = &self.nodes[v.0];
        let (value, shape) = (n.value.clone(), n.shape.clone());
        self.push(value, shape, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        let n = &self.nodes[v.0];
        Tensor::new(&n.shape, n.value.clone()).expect("node shape is consistent")
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value[0]
    }

    pub(crate) fn push(&mut self, value: Vec<T>, shape: Vec<usize>, op: Op<T>, requires_grad: bool) -> Var {
        debug_assert_eq!(value.len(), numel(&shape));
        self.nodes.push(Node { value, shape, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Reverse pass from a one-element `loss`; returns `∂loss/∂node` for
    /// every node that requires a gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.0].value.len() != 1 {
            bail!(
                InvalidInput,
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            );
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.backward_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

/// Gradients produced by [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `v`, or zeros of `len` when nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, len: usize) -> Vec<T> {
        self.get(v).map_or_else(|| vec![T::zero(); len], |g| g.to_vec())
    }
}

/// Lazily allocated gradient slot for `v`, or `None` when `v` needs no
/// gradient.
fn slot<'a, T: Real>(
    nodes: &[Node<T>],
    grads: &'a mut [Option<Vec<T>>],
    v: Var,
) -> Option<&'a mut Vec<T>> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); node.value.len()]))
}

/// Adds `g` reduced onto the (possibly broadcast) shape of `target`.
fn acc_broadcast<T: Real>(nodes: &[Node<T>], grads: &mut [Option<Vec<T>>], target: Var, g: &[T], f: impl Fn(usize) -> T) {
    let Some(dst) = slot(nodes, grads, target) else { return };
    let len = dst.len();
    if len == g.len() {
        for (i, d) in dst.iter_mut().enumerate() {
            *d = *d + g[i] * f(i);
        }
    } else {
        let mut tmp = vec![0f64; len];
        for (i, gi) in g.iter().enumerate() {
            tmp[i % len] += (*gi * f(i)).as_f64();
        }
        for (d, t) in dst.iter_mut().zip(tmp) {
            *d = *d + T::lit(t);
        }
    }
}

impl<T: Real> Graph<T> {
    fn backward_node(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let node = &nodes[i];
        let val = |v: Var| -> &[T] { &nodes[v.0].value };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc_broadcast(nodes, grads, *a, g, |_| T::one());
                acc_broadcast(nodes, grads, *b, g, |_| T::one());
            }
            Op::Sub(a, b) => {
                acc_broadcast(nodes, grads, *a, g, |_| T::one());
                acc_broadcast(nodes, grads, *b, g, |_| -T::one());
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let bl = bv.len();
                acc_broadcast(nodes, grads, *a, g, |k| bv[k % bl]);
                acc_broadcast(nodes, grads, *b, g, |k| av[k]);
            }
            Op::Scale(a, c) => acc_broadcast(nodes, grads, *a, g, |_| *c),
            Op::AddScalar(a) | Op::Reshape(a) => acc_broadcast(nodes, grads, *a, g, |_| T::one()),
            Op::MatMul(a, b) => {
                let (sa, sb) = (&nodes[a.0].shape, &nodes[b.0].shape);
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (val(*a), val(*b));
                if let Some(da) = slot(nodes, grads, *a) {
                    crate::real::matmul_into(g, false, bv, true, m, n, k, da, true);
                }
                if let Some(db) = slot(nodes, grads, *b) {
                    crate::real::matmul_into(av, true, g, false, k, m, n, db, true);
                }
            }
            Op::Linear { x, w, b } => {
                let sw = &nodes[w.0].shape;
                let (cin, cout) = (sw[0], sw[1]);
                let rows = g.len() / cout;
                let (xv, wv) = (val(*x), val(*w));
                if let Some(dx) = slot(nodes, grads, *x) {
                    crate::real::matmul_into(g, false, wv, true, rows, cout, cin, dx, true);
                }
                if let Some(dw) = slot(nodes, grads, *w) {
                    crate::real::matmul_into(xv, true, g, false, cin, rows, cout, dw, true);
                }
                if let Some(b) = b {
                    acc_broadcast(nodes, grads, *b, g, |_| T::one());
                }
            }
            Op::DepthwiseConv { x, w, b } => {
                let (bsz, t_len, c) = dims3(&nodes[x.0].shape);
                let k = nodes[w.0].shape[1];
                let pad = (k - 1) / 2;
                let (xv, wv) = (val(*x), val(*w));
                if let Some(dx) = slot(nodes, grads, *x) {
                    for bi in 0..bsz {
                        for t in 0..t_len {
                            let go = &g[(bi * t_len + t) * c..][..c];
                            for j in 0..k {
                                let src = t as isize + j as isize - pad as isize;
                                if src < 0 || src >= t_len as isize {
                                    continue;
                                }
                                let dst = &mut dx[(bi * t_len + src as usize) * c..][..c];
                                for ch in 0..c {
                                    dst[ch] = dst[ch] + go[ch] * wv[ch * k + j];
                                }
                            }
                        }
                    }
                }
                if let Some(dw) = slot(nodes, grads, *w) {
                    let mut tmp = vec![0f64; c * k];
                    for bi in 0..bsz {
                        for t in 0..t_len {
                            let go = &g[(bi * t_len + t) * c..][..c];
                            for j in 0..k {
                                let src = t as isize + j as isize - pad as isize;
                                if src < 0 || src >= t_len as isize {
                                    continue;
                                }
                                let xs = &xv[(bi * t_len + src as usize) * c..][..c];
                                for ch in 0..c {
                                    tmp[ch * k + j] += (go[ch] * xs[ch]).as_f64();
                                }
                            }
                        }
                    }
                    for (d, t) in dw.iter_mut().zip(tmp) {
                        *d = *d + T::lit(t);
                    }
                }
                if let Some(b) = b {
                    acc_broadcast(nodes, grads, *b, g, |_| T::one());
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let c = *nodes[x.0].shape.last().unwrap();
                let gv = val(*gamma);
                acc_broadcast(nodes, grads, *gamma, g, |k| xhat[k]);
                acc_broadcast(nodes, grads, *beta, g, |_| T::one());
                if let Some(dx) = slot(nodes, grads, *x) {
                    for (r, rs) in rstd.iter().enumerate() {
                        let row = r * c..(r + 1) * c;
                        let (mut m1, mut m2) = (0f64, 0f64);
                        for k in row.clone() {
                            let d = (g[k] * gv[k - r * c]).as_f64();
                            m1 += d;
                            m2 += d * xhat[k].as_f64();
                        }
                        m1 /= c as f64;
                        m2 /= c as f64;
                        for k in row {
                            let d = (g[k] * gv[k - r * c]).as_f64();
                            dx[k] = dx[k] + T::lit(rs * (d - m1 - xhat[k].as_f64() * m2));
                        }
                    }
                }
            }
            Op::Sin(a) => {
                let av = val(*a);
                acc_broadcast(nodes, grads, *a, g, |k| av[k].cos());
            }
            Op::Cos(a) => {
                let av = val(*a);
                acc_broadcast(nodes, grads, *a, g, |k| -av[k].sin());
            }
            Op::Exp(a) => {
                let out = &node.value;
                acc_broadcast(nodes, grads, *a, g, |k| out[k]);
            }
            Op::Log(a) => {
                let av = val(*a);
                acc_broadcast(nodes, grads, *a, g, |k| T::one() / av[k]);
            }
            Op::Abs(a) => {
                let av = val(*a);
                acc_broadcast(nodes, grads, *a, g, |k| sign(av[k]));
            }
            Op::ClampMin(a, lo) => {
                let av = val(*a);
                acc_broadcast(nodes, grads, *a, g, |k| if av[k] > *lo { T::one() } else { T::zero() });
            }
            Op::Mean(a) => {
                let n = T::lit(nodes[a.0].value.len() as f64);
                if let Some(d) = slot(nodes, grads, *a) {
                    let v = g[0] / n;
                    d.iter_mut().for_each(|x| *x = *x + v);
                }
            }
            Op::Sum(a) => {
                if let Some(d) = slot(nodes, grads, *a) {
                    d.iter_mut().for_each(|x| *x = *x + g[0]);
                }
            }
            Op::Transpose(a) => {
                let s = &nodes[a.0].shape;
                let (r, c) = (s[0], s[1]);
                if let Some(d) = slot(nodes, grads, *a) {
                    for i in 0..r {
                        for j in 0..c {
                            d[i * c + j] = d[i * c + j] + g[j * r + i];
                        }
                    }
                }
            }
            Op::Concat(a, b) => {
                let ca = *nodes[a.0].shape.last().unwrap();
                let cb = *nodes[b.0].shape.last().unwrap();
                let rows = nodes[a.0].value.len() / ca.max(1);
                if let Some(d) = slot(nodes, grads, *a) {
                    for r in 0..rows {
                        for j in 0..ca {
                            d[r * ca + j] = d[r * ca + j] + g[r * (ca + cb) + j];
                        }
                    }
                }
                if let Some(d) = slot(nodes, grads, *b) {
                    for r in 0..rows {
                        for j in 0..cb {
                            d[r * cb + j] = d[r * cb + j] + g[r * (ca + cb) + ca + j];
                        }
                    }
                }
            }
            Op::Snake { x, alpha } => {
                let (xv, av) = (val(*x), val(*alpha));
                let c = av.len();
                acc_broadcast(nodes, grads, *x, g, |k| {
                    let ax = av[k % c] * xv[k];
                    T::one() + (ax + ax).sin()
                });
                acc_broadcast(nodes, grads, *alpha, g, |k| {
                    let a = av[k % c];
                    let ax = a * xv[k];
                    let s = ax.sin();
                    -(s * s) / (a * a) + xv[k] * (ax + ax).sin() / a
                });
            }
            Op::Gelu(a) => {
                let av = val(*a);
                acc_broadcast(nodes, grads, *a, g, |k| gelu_grad(av[k]));
            }
            Op::Grn { x, gamma, beta, gx, nx, denom } => {
                let (bsz, t_len, c) = dims3(&nodes[x.0].shape);
                let (xv, gam) = (val(*x), val(*gamma));
                acc_broadcast(nodes, grads, *gamma, g, |k| {
                    let (bi, ch) = (k / (t_len * c), k % c);
                    xv[k] * T::lit(nx[bi * c + ch])
                });
                acc_broadcast(nodes, grads, *beta, g, |_| T::one());
                if let Some(dx) = slot(nodes, grads, *x) {
                    for bi in 0..bsz {
                        let mut dnx = vec![0f64; c];
                        for t in 0..t_len {
                            let base = (bi * t_len + t) * c;
                            for ch in 0..c {
                                let k = base + ch;
                                let gk = g[k].as_f64();
                                dnx[ch] += gk * gam[ch].as_f64() * xv[k].as_f64();
                                let direct = 1.0 + gam[ch].as_f64() * nx[bi * c + ch];
                                dx[k] = dx[k] + T::lit(gk * direct);
                            }
                        }
                        let d = denom[bi];
                        let cross: f64 = (0..c).map(|ch| dnx[ch] * gx[bi * c + ch]).sum::<f64>() / (d * d * c as f64);
                        for ch in 0..c {
                            let gxv = gx[bi * c + ch];
                            if gxv <= 0.0 {
                                continue;
                            }
                            let dgx = dnx[ch] / d - cross;
                            for t in 0..t_len {
                                let k = (bi * t_len + t) * c + ch;
                                dx[k] = dx[k] + T::lit(dgx * xv[k].as_f64() / gxv);
                            }
                        }
                    }
                }
            }
            Op::Atan2 { y, x } => {
                let (yv, xv) = (val(*y), val(*x));
                let r2 = |k: usize| xv[k] * xv[k] + yv[k] * yv[k];
                acc_broadcast(nodes, grads, *y, g, |k| {
                    let d = r2(k);
                    if d > T::zero() { xv[k] / d } else { T::zero() }
                });
                acc_broadcast(nodes, grads, *x, g, |k| {
                    let d = r2(k);
                    if d > T::zero() { -yv[k] / d } else { T::zero() }
                });
            }
            Op::AntiWrap(a) => {
                let av = val(*a);
                let two_pi = T::lit(2.0 * std::f64::consts::PI);
                let pi = T::lit(std::f64::consts::PI);
                acc_broadcast(nodes, grads, *a, g, |k| {
                    let r = av[k] - two_pi * (av[k] / two_pi).round();
                    if r.abs() >= pi { T::zero() } else { sign(r) }
                });
            }
            Op::Diff(a, axis) => {
                let shape = &nodes[a.0].shape;
                if let Some(d) = slot(nodes, grads, *a) {
                    diff_adjoint(shape, *axis, g, d);
                }
            }
            Op::Magnitude { re, im } => {
                let (rv, iv) = (val(*re), val(*im));
                let out = &node.value;
                acc_broadcast(nodes, grads, *re, g, |k| if out[k] > T::zero() { rv[k] / out[k] } else { T::zero() });
                acc_broadcast(nodes, grads, *im, g, |k| if out[k] > T::zero() { iv[k] / out[k] } else { T::zero() });
            }
            Op::Synthesize { re, im, fourier, frames, inv_wsum } => {
                let n = fourier.n_freq();
                let span = fourier.span(*frames);
                let batch = g.len() / span;
                let mut g_re = vec![T::zero(); batch * frames * n];
                let mut g_im = vec![T::zero(); batch * frames * n];
                for b in 0..batch {
                    let fr = b * frames * n..(b + 1) * frames * n;
                    fourier.synthesize_adjoint(
                        &g[b * span..(b + 1) * span],
                        *frames,
                        inv_wsum,
                        &mut g_re[fr.clone()],
                        &mut g_im[fr],
                    );
                }
                acc_broadcast(nodes, grads, *re, &g_re, |_| T::one());
                acc_broadcast(nodes, grads, *im, &g_im, |_| T::one());
            }
            Op::Analyze { x, fourier, frames } => {
                let n = fourier.n_freq();
                let len = *nodes[x.0].shape.last().unwrap();
                let per = frames * n;
                if let Some(dx) = slot(nodes, grads, *x) {
                    let batch = dx.len() / len;
                    for b in 0..batch {
                        let gb = &g[b * 2 * per..(b + 1) * 2 * per];
                        fourier.analyze_adjoint(&gb[..per], &gb[per..], *frames, &mut dx[b * len..(b + 1) * len]);
                    }
                }
            }
            Op::Select { x, part } => {
                let per = g.len() / nodes[x.0].shape[0];
                let outer = nodes[x.0].shape[0];
                if let Some(d) = slot(nodes, grads, *x) {
                    for b in 0..outer {
                        let dst = &mut d[(b * 2 + part) * per..][..per];
                        for (o, gi) in dst.iter_mut().zip(&g[b * per..(b + 1) * per]) {
                            *o = *o + *gi;
                        }
                    }
                }
            }
            Op::SliceLast { x, start } => {
                let src_len = *nodes[x.0].shape.last().unwrap();
                let len = *node.shape.last().unwrap();
                if let Some(d) = slot(nodes, grads, *x) {
                    let rows = d.len() / src_len;
                    for r in 0..rows {
                        for j in 0..len {
                            let k = r * src_len + start + j;
                            d[k] = d[k] + g[r * len + j];
                        }
                    }
                }
            }
            Op::ReflectPad { x, pad } => {
                let len = *nodes[x.0].shape.last().unwrap();
                let out_len = len + 2 * pad;
                if let Some(d) = slot(nodes, grads, *x) {
                    let rows = d.len() / len;
                    for r in 0..rows {
                        for j in 0..out_len {
                            let src = crate::dsp::fourier::reflect_source_index(len, *pad, j);
                            d[r * len + src] = d[r * len + src] + g[r * out_len + j];
                        }
                    }
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

pub(crate) fn dims3(shape: &[usize]) -> (usize, usize, usize) {
    (shape[0], shape[1], shape[2])
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

pub(crate) fn gelu<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    let u = T::lit(GELU_C) * (x + T::lit(GELU_K) * x * x * x);
    half * x * (T::one() + u.tanh())
}

fn gelu_grad<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    let u = T::lit(GELU_C) * (x + T::lit(GELU_K) * x * x * x);
    let t = u.tanh();
    let du = T::lit(GELU_C) * (T::one() + T::lit(3.0 * GELU_K) * x * x);
    half * (T::one() + t) + half * x * (T::one() - t * t) * du
}

/// Forward differences with the final difference repeated at the edge.
pub(crate) fn diff_forward<T: Real>(shape: &[usize], axis: DiffAxis, x: &[T]) -> Vec<T> {
    let r = shape.len();
    let (outer, len, inner) = match axis {
        DiffAxis::Last => (numel(&shape[..r - 1]), shape[r - 1], 1),
        DiffAxis::Frames => (numel(&shape[..r - 2]), shape[r - 2], shape[r - 1]),
    };
    let mut out = vec![T::zero(); x.len()];
    for o in 0..outer {
        for i in 0..len {
            let m = i.min(len - 2);
            for j in 0..inner {
                let at = |p: usize| (o * len + p) * inner + j;
                out[at(i)] = x[at(m + 1)] - x[at(m)];
            }
        }
    }
    out
}

fn diff_adjoint<T: Real>(shape: &[usize], axis: DiffAxis, g: &[T], d: &mut [T]) {
    let r = shape.len();
    let (outer, len, inner) = match axis {
        DiffAxis::Last => (numel(&shape[..r - 1]), shape[r - 1], 1),
        DiffAxis::Frames => (numel(&shape[..r - 2]), shape[r - 2], shape[r - 1]),
    };
    for o in 0..outer {
        for i in 0..len {
            let m = i.min(len - 2);
            for j in 0..inner {
                let at = |p: usize| (o * len + p) * inner + j;
                let gv = g[at(i)];
                d[at(m + 1)] = d[at(m + 1)] + gv;
                d[at(m)] = d[at(m)] - gv;
            }
        }
    }
}
