//! Forward constructors for the differentiable operations.

use super::graph::{dims3, diff_forward, gelu, DiffAxis, Graph, Op, Var};
use super::tensor::numel;
use crate::error::{bail, Result};
use crate::real::{matmul_into, Real};

const LN_EPS: f64 = 1e-6;
const GRN_EPS: f64 = 1e-6;

fn is_suffix(long: &[usize], short: &[usize]) -> bool {
    short.len() <= long.len() && long[long.len() - short.len()..] == *short
}

impl<T: Real> Graph<T> {
    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires_grad(a);
        self.push(value, shape, op, rg)
    }

    fn binary(&mut self, a: Var, b: Var, what: &str, op: Op<T>, f: impl Fn(T, T) -> T) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if !is_suffix(&sa, &sb) {
            bail!(Shape, "{what}: cannot broadcast {sb:?} onto {sa:?}");
        }
        let (av, bv) = (self.value(a), self.value(b));
        let bl = bv.len().max(1);
        let value = av.iter().enumerate().map(|(k, &x)| f(x, bv[k % bl])).collect();
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, sa, op, rg))
    }

    /// Elementwise `a + b`; `b` may broadcast over leading axes of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sin(a), |x| x.sin())
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(a, Op::Cos(a), |x| x.cos())
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), |x| x.exp())
    }

    /// Natural log; every input must be positive (see [`Graph::clamp_min`]).
    pub fn log(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.value(a).iter().find(|&&x| !(x > T::zero())) {
            bail!(Domain, "log of non-positive value {bad}");
        }
        Ok(self.unary(a, Op::Log(a), |x| x.ln()))
    }

    /// `|a|` with subgradient 0 at 0.
    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Op::Abs(a), |x| x.abs())
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.mul(a, a).expect("same shape")
    }

    /// `max(a, lo)`; gradient passes only where `a > lo`. NaN inputs map
    /// to `lo`.
    pub fn clamp_min(&mut self, a: Var, lo: T) -> Result<Var> {
        if !lo.is_finite() {
            bail!(Domain, "clamp bound must be finite, got {lo}");
        }
        Ok(self.unary(a, Op::ClampMin(a, lo), |x| if x > lo { x } else { lo }))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Gelu(a), gelu)
    }

    /// Distance to the nearest multiple of 2π, in `[0, π]`.
    pub fn anti_wrap(&mut self, a: Var) -> Var {
        let two_pi = T::lit(2.0 * std::f64::consts::PI);
        self.unary(a, Op::AntiWrap(a), |x| (x - two_pi * (x / two_pi).round()).abs())
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != self.value(a).len() {
            bail!(Shape, "cannot reshape {:?} to {shape:?}", self.shape(a));
        }
        let value = self.value(a).to_vec();
        let rg = self.requires_grad(a);
        Ok(self.push(value, shape.to_vec(), Op::Reshape(a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).iter().map(|x| x.as_f64()).sum();
        let rg = self.requires_grad(a);
        self.push(vec![T::lit(s)], vec![1], Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s: f64 = v.iter().map(|x| x.as_f64()).sum::<f64>() / v.len().max(1) as f64;
        let rg = self.requires_grad(a);
        self.push(vec![T::lit(s)], vec![1], Op::Mean(a), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s.len() != 2 {
            bail!(Shape, "transpose needs a 2-D tensor, got {s:?}");
        }
        let (r, c) = (s[0], s[1]);
        let av = self.value(a);
        let mut value = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                value[j * r + i] = av[i * c + j];
            }
        }
        let rg = self.requires_grad(a);
        Ok(self.push(value, vec![c, r], Op::Transpose(a), rg))
    }

    /// Plain 2-D matrix product.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            bail!(Shape, "matmul: incompatible shapes {sa:?} and {sb:?}");
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut value = vec![T::zero(); m * n];
        matmul_into(self.value(a), false, self.value(b), false, m, k, n, &mut value, false);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, vec![m, n], Op::MatMul(a, b), rg))
    }

    /// Pointwise projection over the last axis: `x[.., Cin] · w[Cin, Cout] + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w);
        if sw.len() != 2 || sx.last() != Some(&sw[0]) {
            bail!(Shape, "linear: input {sx:?} does not match weight {sw:?}");
        }
        let (cin, cout) = (sw[0], sw[1]);
        if let Some(b) = b {
            if self.shape(b) != [cout] {
                bail!(Shape, "linear: bias {:?} does not match {cout} outputs", self.shape(b));
            }
        }
        let rows = numel(&sx) / cin.max(1);
        let mut value = vec![T::zero(); rows * cout];
        if let Some(b) = b {
            let bv = self.value(b);
            for r in value.chunks_mut(cout) {
                r.copy_from_slice(bv);
            }
        }
        matmul_into(self.value(x), false, self.value(w), false, rows, cin, cout, &mut value, b.is_some());
        let mut shape = sx;
        *shape.last_mut().unwrap() = cout;
        let rg = self.any_grad(&[x, w]) || b.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(value, shape, Op::Linear { x, w, b }, rg))
    }

    /// Per-channel convolution along time of `x [B, T, C]` with kernels
    /// `w [C, k]` (odd `k`, zero "same" padding).
    pub fn depthwise_conv(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let sw = self.shape(w).to_vec();
        if sx.len() != 3 || sw.len() != 2 || sw[0] != sx[2] || sw[1] % 2 == 0 {
            bail!(Shape, "depthwise_conv: input {sx:?} does not match kernel {sw:?}");
        }
        if let Some(b) = b {
            if self.shape(b) != [sx[2]] {
                bail!(Shape, "depthwise_conv: bias {:?} does not match {} channels", self.shape(b), sx[2]);
            }
        }
        let (bsz, t_len, c) = dims3(&sx);
        let k = sw[1];
        let pad = (k - 1) / 2;
        let (xv, wv) = (self.value(x), self.value(w));
        let mut value = vec![T::zero(); xv.len()];
        if let Some(b) = b {
            let bv = self.value(b);
            for r in value.chunks_mut(c) {
                r.copy_from_slice(bv);
            }
        }
        // Transposed kernel so the inner loop runs over contiguous channels.
        let mut wt = vec![T::zero(); k * c];
        for ch in 0..c {
            for j in 0..k {
                wt[j * c + ch] = wv[ch * k + j];
            }
        }
        for bi in 0..bsz {
            for t in 0..t_len {
                let out = &mut value[(bi * t_len + t) * c..][..c];
                for j in 0..k {
                    let src = t as isize + j as isize - pad as isize;
                    if src < 0 || src >= t_len as isize {
                        continue;
                    }
                    let xs = &xv[(bi * t_len + src as usize) * c..][..c];
                    let wj = &wt[j * c..][..c];
                    for ch in 0..c {
                        out[ch] = out[ch] + wj[ch] * xs[ch];
                    }
                }
            }
        }
        let rg = self.any_grad(&[x, w]) || b.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(value, sx, Op::DepthwiseConv { x, w, b }, rg))
    }

    /// Layer normalization over the last axis with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let c = *sx.last().unwrap_or(&0);
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            bail!(Shape, "layer_norm: affine parameters must have shape [{c}]");
        }
        let xv = self.value(x);
        let rows = xv.len() / c.max(1);
        let (gv, bv) = (self.value(gamma), self.value(beta));
        let mut xhat = vec![T::zero(); xv.len()];
        let mut value = vec![T::zero(); xv.len()];
        let mut rstd = vec![0f64; rows];
        for r in 0..rows {
            let row = &xv[r * c..(r + 1) * c];
            let mean = row.iter().map(|v| v.as_f64()).sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v.as_f64() - mean).powi(2)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..c {
                let h = T::lit((row[j].as_f64() - mean) * rs);
                xhat[r * c + j] = h;
                value[r * c + j] = gv[j] * h + bv[j];
            }
        }
        let rg = self.any_grad(&[x, gamma, beta]);
        Ok(self.push(value, sx, Op::LayerNorm { x, gamma, beta, xhat, rstd }, rg))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != sb.len() || sa.is_empty() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            bail!(Shape, "concat: incompatible shapes {sa:?} and {sb:?}");
        }
        let (ca, cb) = (*sa.last().unwrap(), *sb.last().unwrap());
        let rows = numel(&sa[..sa.len() - 1]);
        let (av, bv) = (self.value(a), self.value(b));
        let mut value = Vec::with_capacity(rows * (ca + cb));
        for r in 0..rows {
            value.extend_from_slice(&av[r * ca..(r + 1) * ca]);
            value.extend_from_slice(&bv[r * cb..(r + 1) * cb]);
        }
        let mut shape = sa;
        *shape.last_mut().unwrap() = ca + cb;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, shape, Op::Concat(a, b), rg))
    }

    /// Snake activation `x + sin²(αx)/α` with one `α` per channel of the
    /// last axis. Fails with a domain error unless every `α > 0`.
    pub fn snake(&mut self, x: Var, alpha: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let c = *sx.last().unwrap_or(&0);
        if self.shape(alpha) != [c] {
            bail!(Shape, "snake: alpha {:?} does not match {c} channels", self.shape(alpha));
        }
        let av = self.value(alpha);
        if let Some(bad) = av.iter().find(|&&a| !(a > T::zero())) {
            bail!(Domain, "snake alpha must be positive, got {bad}");
        }
        let value = self
            .value(x)
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let a = av[k % c];
                let s = (a * v).sin();
                v + s * s / a
            })
            .collect();
        let rg = self.any_grad(&[x, alpha]);
        Ok(self.push(value, sx, Op::Snake { x, alpha }, rg))
    }

    /// Global response normalization of `x [B, T, C]` over time.
    pub fn grn(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.len() != 3 {
            bail!(Shape, "grn needs [B, T, C], got {sx:?}");
        }
        let (bsz, t_len, c) = dims3(&sx);
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            bail!(Shape, "grn: affine parameters must have shape [{c}]");
        }
        let xv = self.value(x);
        let mut gx = vec![0f64; bsz * c];
        for bi in 0..bsz {
            for t in 0..t_len {
                let row = &xv[(bi * t_len + t) * c..][..c];
                for ch in 0..c {
                    gx[bi * c + ch] += row[ch].as_f64().powi(2);
                }
            }
        }
        gx.iter_mut().for_each(|v| *v = v.sqrt());
        let denom: Vec<f64> = (0..bsz)
            .map(|bi| gx[bi * c..(bi + 1) * c].iter().sum::<f64>() / c as f64 + GRN_EPS)
            .collect();
        let nx: Vec<f64> = gx.iter().enumerate().map(|(k, v)| v / denom[k / c]).collect();
        let (gv, bv) = (self.value(gamma), self.value(beta));
        let value = xv
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let (bi, ch) = (k / (t_len * c), k % c);
                gv[ch] * v * T::lit(nx[bi * c + ch]) + bv[ch] + v
            })
            .collect();
        let rg = self.any_grad(&[x, gamma, beta]);
        Ok(self.push(value, sx, Op::Grn { x, gamma, beta, gx, nx, denom }, rg))
    }

    /// Elementwise `atan2(y, x)` in `(−π, π]`; gradient zero at the origin.
    pub fn atan2(&mut self, y: Var, x: Var) -> Result<Var> {
        if self.shape(y) != self.shape(x) {
            bail!(Shape, "atan2: shapes {:?} and {:?} differ", self.shape(y), self.shape(x));
        }
        let pi = T::lit(std::f64::consts::PI);
        let value = self
            .value(y)
            .iter()
            .zip(self.value(x))
            .map(|(&a, &b)| {
                let p = a.atan2(b);
                if p <= -pi { pi } else { p }
            })
            .collect();
        let shape = self.shape(y).to_vec();
        let rg = self.any_grad(&[y, x]);
        Ok(self.push(value, shape, Op::Atan2 { y, x }, rg))
    }

    /// `sqrt(re² + im²)`; gradient zero where the magnitude is zero.
    pub fn magnitude(&mut self, re: Var, im: Var) -> Result<Var> {
        if self.shape(re) != self.shape(im) {
            bail!(Shape, "magnitude: shapes {:?} and {:?} differ", self.shape(re), self.shape(im));
        }
        let value = self.value(re).iter().zip(self.value(im)).map(|(&a, &b)| a.hypot(b)).collect();
        let shape = self.shape(re).to_vec();
        let rg = self.any_grad(&[re, im]);
        Ok(self.push(value, shape, Op::Magnitude { re, im }, rg))
    }

    /// Forward difference along the last axis (bins), final difference
    /// repeated so the length is unchanged.
    pub fn diff_bins(&mut self, a: Var) -> Result<Var> {
        self.diff(a, DiffAxis::Last)
    }

    /// Forward difference along the second-to-last axis (frames).
    pub fn diff_frames(&mut self, a: Var) -> Result<Var> {
        self.diff(a, DiffAxis::Frames)
    }

    fn diff(&mut self, a: Var, axis: DiffAxis) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let (need_rank, len) = match axis {
            DiffAxis::Last => (1, shape.last().copied()),
            DiffAxis::Frames => (2, shape.len().checked_sub(2).map(|i| shape[i])),
        };
        if shape.len() < need_rank || len.unwrap_or(0) < 2 {
            bail!(Shape, "difference needs at least 2 entries along the axis, got {shape:?}");
        }
        let value = diff_forward(&shape, axis, self.value(a));
        let rg = self.requires_grad(a);
        Ok(self.push(value, shape, Op::Diff(a, axis), rg))
    }

    /// Elements `start..start+len` of the last axis.
    pub fn slice_last(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let n = *sx.last().unwrap_or(&0);
        if start + len > n {
            bail!(Shape, "slice {start}..{} out of range for last axis {n}", start + len);
        }
        let xv = self.value(x);
        let rows = xv.len() / n.max(1);
        let mut value = Vec::with_capacity(rows * len);
        for r in 0..rows {
            value.extend_from_slice(&xv[r * n + start..r * n + start + len]);
        }
        let mut shape = sx;
        *shape.last_mut().unwrap() = len;
        let rg = self.requires_grad(x);
        Ok(self.push(value, shape, Op::SliceLast { x, start }, rg))
    }

    /// Reflect padding of the last axis (edge sample excluded).
    pub fn reflect_pad(&mut self, x: Var, pad: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let n = *sx.last().unwrap_or(&0);
        if n <= pad {
            bail!(InvalidInput, "signal of {n} samples is too short for padding {pad}");
        }
        let xv = self.value(x);
        let rows = xv.len() / n;
        let mut value = Vec::with_capacity(rows * (n + 2 * pad));
        for r in 0..rows {
            value.extend(crate::dsp::fourier::reflect_pad(&xv[r * n..(r + 1) * n], pad));
        }
        let mut shape = sx;
        *shape.last_mut().unwrap() = n + 2 * pad;
        let rg = self.requires_grad(x);
        Ok(self.push(value, shape, Op::ReflectPad { x, pad }, rg))
    }
}
