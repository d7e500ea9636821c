//! Define-by-run reverse-mode differentiation.
//!
//! Every primitive appends a node holding its output value. `backward` walks
//! the node list once in reverse, so each recorded operation is visited
//! exactly once and gradients of shared inputs add up.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddExpand(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Vec<T>),
    Scale(Var, T),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    Stack(Vec<Var>),
    Reshape(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Embedding(Var, Vec<usize>),
    MeanLastDim(Var),
    WeightedSum(Var, Var),
    SelectRows(Vec<bool>, Var, Var),
    Sum(Var),
    Nll(Var, Vec<usize>, Vec<T>),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn tensor(&self, v: Var) -> Option<Tensor<T>> {
        self.get(v)
            .map(|g| Tensor::from_parts(self.shapes[v.0].clone(), g.to_vec()))
    }
}

/// An operation log. Tapes are single-owner; share the resulting tensors,
/// not the tape.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    backward_done: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn rows_of(shape: &[usize]) -> usize {
    shape[..shape.len() - 1].iter().product()
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            backward_done: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a constant input. No gradient is tracked for it.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, false)
    }

    /// Records an input whose gradient is wanted.
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push_leaf(&mut self, value: Tensor<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        #[cfg(debug_assertions)]
        if !value.is_finite() {
            let finite_inputs = inputs.iter().all(|v| self.nodes[v.0].value.is_finite());
            assert!(!finite_inputs, "non-finite output from finite inputs in {op:?}");
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn vals(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.values()
    }

    /// `a @ b` where `a` is `[.., k]` (leading dims flattened into rows) and
    /// `b` is `[k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() != 2 || *sa.last().unwrap() != sb[0] {
            return Err(Error::dim("matmul", &[sa, sb]));
        }
        let (k, n) = (sb[0], sb[1]);
        let rows = rows_of(sa);
        let mut shape = sa[..sa.len() - 1].to_vec();
        shape.push(n);
        let mut out = vec![T::zero(); rows * n];
        let (av, bv) = (self.vals(a), self.vals(b));
        for r in 0..rows {
            let arow = &av[r * k..(r + 1) * k];
            let orow = &mut out[r * n..(r + 1) * n];
            for (kk, &x) in arow.iter().enumerate() {
                if x == T::zero() {
                    continue;
                }
                let brow = &bv[kk * n..(kk + 1) * n];
                for (o, &w) in orow.iter_mut().zip(brow) {
                    *o += x * w;
                }
            }
        }
        Ok(self.push(Tensor::from_parts(shape, out), Op::MatMul(a, b), &[a, b]))
    }

    /// Elementwise sum. `b` may also match a trailing suffix of `a`'s shape,
    /// in which case it is broadcast over the leading dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() < sb.len() || !sa.ends_with(sb) {
            return Err(Error::dim("add", &[sa, sb]));
        }
        let shape = sa.to_vec();
        let bv = self.vals(b);
        let m = bv.len();
        let out = self
            .vals(a)
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv[i % m])
            .collect();
        Ok(self.push(Tensor::from_parts(shape, out), Op::Add(a, b), &[a, b]))
    }

    /// `[B, L, K] + [B, K]`, broadcasting `b` over the middle dimension.
    pub fn add_expand(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 3 || sb.len() != 2 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(Error::dim("add_expand", &[sa, sb]));
        }
        let (l, k) = (sa[1], sa[2]);
        let shape = sa.to_vec();
        let (av, bv) = (self.vals(a), self.vals(b));
        let out = av
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv[(i / (l * k)) * k + i % k])
            .collect();
        Ok(self.push(Tensor::from_parts(shape, out), Op::AddExpand(a, b), &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::dim(op, &[self.shape(a), self.shape(b)]));
        }
        Ok(())
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self
            .vals(a)
            .iter()
            .zip(self.vals(b))
            .map(|(&x, &y)| x - y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::from_parts(shape, out), Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self
            .vals(a)
            .iter()
            .zip(self.vals(b))
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::from_parts(shape, out), Op::Mul(a, b), &[a, b]))
    }

    /// Elementwise product with a constant of the same shape (dropout masks).
    pub fn mul_const(&mut self, a: Var, k: Tensor<T>) -> Result<Var> {
        if self.shape(a) != k.shape() {
            return Err(Error::dim("mul_const", &[self.shape(a), k.shape()]));
        }
        let out = self
            .vals(a)
            .iter()
            .zip(k.values())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(
            Tensor::from_parts(shape, out),
            Op::MulConst(a, k.into_values()),
            &[a],
        ))
    }

    pub fn scale(&mut self, a: Var, k: T) -> Var {
        let out = self.vals(a).iter().map(|&x| x * k).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Scale(a, k), &[a])
    }

    /// Concatenates along the last dimension.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("concat of zero tensors".into()));
        };
        let lead = self.shape(first)[..self.shape(first).len() - 1].to_vec();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.len() != lead.len() + 1 || s[..lead.len()] != lead[..] {
                let shapes: Vec<&[usize]> = parts.iter().map(|&v| self.shape(v)).collect();
                return Err(Error::dim("concat", &shapes));
            }
            widths.push(*s.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.vals(p)[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Concat(parts.to_vec()), parts))
    }

    /// Columns `start..end` of the last dimension.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let s = self.shape(a);
        let k = *s.last().unwrap();
        if start >= end || end > k {
            return Err(Error::Dimension {
                op: "slice",
                shapes: vec![s.to_vec(), vec![start, end]],
            });
        }
        let rows = rows_of(s);
        let mut shape = s.to_vec();
        *shape.last_mut().unwrap() = end - start;
        let av = self.vals(a);
        let mut out = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            out.extend_from_slice(&av[r * k + start..r * k + end]);
        }
        Ok(self.push(Tensor::from_parts(shape, out), Op::Slice(a, start, end), &[a]))
    }

    /// Stacks same-shaped `[.., K]` tensors into `[.., L, K]`.
    pub fn stack(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("stack of zero tensors".into()));
        };
        let s0 = self.shape(first).to_vec();
        if parts.iter().any(|&p| self.shape(p) != &s0[..]) {
            let shapes: Vec<&[usize]> = parts.iter().map(|&v| self.shape(v)).collect();
            return Err(Error::dim("stack", &shapes));
        }
        let k = *s0.last().unwrap();
        let rows = rows_of(&s0);
        let l = parts.len();
        let mut out = Vec::with_capacity(rows * l * k);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(&self.vals(p)[r * k..(r + 1) * k]);
            }
        }
        let mut shape = s0[..s0.len() - 1].to_vec();
        shape.push(l);
        shape.push(k);
        Ok(self.push(Tensor::from_parts(shape, out), Op::Stack(parts.to_vec()), parts))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = Tensor::new(shape.to_vec(), self.vals(a).to_vec())
            .map_err(|_| Error::dim("reshape", &[self.shape(a), shape]))?;
        Ok(self.push(value, Op::Reshape(a), &[a]))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.vals(a).iter().map(|x| x.tanh()).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let one = T::one();
        let out = self.vals(a).iter().map(|&x| one / (one + (-x).exp())).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::from_parts(shape, out), Op::Sigmoid(a), &[a])
    }

    /// Softmax over the last dimension.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.softmax_impl(a, None)
    }

    /// Softmax over the last dimension restricted to positions where `mask`
    /// is true; masked positions get exactly zero weight.
    pub fn softmax_masked(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(Error::dim("softmax_masked", &[self.shape(a), &[mask.len()]]));
        }
        self.softmax_impl(a, Some(mask))
    }

    fn softmax_impl(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let s = self.shape(a).to_vec();
        let k = *s.last().unwrap();
        let av = self.vals(a);
        let mut out = vec![T::zero(); av.len()];
        for (r, (row, orow)) in av.chunks(k).zip(out.chunks_mut(k)).enumerate() {
            let keep = |j: usize| mask.is_none_or(|m| m[r * k + j]);
            let mut max = T::neg_infinity();
            for (j, &x) in row.iter().enumerate() {
                if keep(j) && x > max {
                    max = x;
                }
            }
            if max == T::neg_infinity() {
                return Err(Error::Contract(format!(
                    "softmax row {r} has no unmasked finite entry"
                )));
            }
            let mut total = T::zero();
            for (j, (&x, o)) in row.iter().zip(orow.iter_mut()).enumerate() {
                if keep(j) {
                    *o = (x - max).exp();
                    total += *o;
                }
            }
            for o in orow.iter_mut() {
                *o /= total;
            }
        }
        Ok(self.push(Tensor::from_parts(s, out), Op::Softmax(a), &[a]))
    }

    /// Numerically stable log-softmax over the last dimension.
    pub fn log_softmax(&mut self, a: Var) -> Var {
        let s = self.shape(a).to_vec();
        let k = *s.last().unwrap();
        let av = self.vals(a);
        let mut out = Vec::with_capacity(av.len());
        for row in av.chunks(k) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<T>().ln();
            out.extend(row.iter().map(|&x| x - lse));
        }
        self.push(Tensor::from_parts(s, out), Op::LogSoftmax(a), &[a])
    }

    /// Gathers rows of a `[V, E]` table, producing `[ids.len(), E]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let s = self.shape(table);
        if s.len() != 2 || ids.is_empty() {
            return Err(Error::dim("embedding", &[s, &[ids.len()]]));
        }
        let (v, e) = (s[0], s[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Input(format!(
                "token id {bad} out of range for vocabulary of size {v}"
            )));
        }
        let tv = self.vals(table);
        let mut out = Vec::with_capacity(ids.len() * e);
        for &i in ids {
            out.extend_from_slice(&tv[i * e..(i + 1) * e]);
        }
        Ok(self.push(
            Tensor::from_parts(vec![ids.len(), e], out),
            Op::Embedding(table, ids.to_vec()),
            &[table],
        ))
    }

    /// Mean over the last dimension, dropping it (rank-1 inputs give `[1]`).
    pub fn mean_last_dim(&mut self, a: Var) -> Var {
        let s = self.shape(a).to_vec();
        let k = *s.last().unwrap();
        let inv = T::one() / T::from_usize(k).unwrap();
        let out: Vec<T> = self
            .vals(a)
            .chunks(k)
            .map(|row| row.iter().copied().sum::<T>() * inv)
            .collect();
        let shape = if s.len() == 1 {
            vec![1]
        } else {
            s[..s.len() - 1].to_vec()
        };
        self.push(Tensor::from_parts(shape, out), Op::MeanLastDim(a), &[a])
    }

    /// `out[b, :] = Σ_l alpha[b, l] · xs[b, l, :]` for `alpha: [B, L]`,
    /// `xs: [B, L, K]`.
    pub fn weighted_sum(&mut self, alpha: Var, xs: Var) -> Result<Var> {
        let (sa, sx) = (self.shape(alpha), self.shape(xs));
        if sa.len() != 2 || sx.len() != 3 || sa[0] != sx[0] || sa[1] != sx[1] {
            return Err(Error::dim("weighted_sum", &[sa, sx]));
        }
        let (b, l, k) = (sx[0], sx[1], sx[2]);
        let (av, xv) = (self.vals(alpha), self.vals(xs));
        let mut out = vec![T::zero(); b * k];
        for bi in 0..b {
            let orow = &mut out[bi * k..(bi + 1) * k];
            for li in 0..l {
                let w = av[bi * l + li];
                let x = &xv[(bi * l + li) * k..(bi * l + li + 1) * k];
                for (o, &xv) in orow.iter_mut().zip(x) {
                    *o += w * xv;
                }
            }
        }
        Ok(self.push(
            Tensor::from_parts(vec![b, k], out),
            Op::WeightedSum(alpha, xs),
            &[alpha, xs],
        ))
    }

    /// Row-wise choice: row `r` comes from `a` where `take_a[r]`, else `b`.
    pub fn select_rows(&mut self, take_a: &[bool], a: Var, b: Var) -> Result<Var> {
        self.same_shape("select_rows", a, b)?;
        let s = self.shape(a).to_vec();
        let rows = rows_of(&s);
        if take_a.len() != rows {
            return Err(Error::dim("select_rows", &[&s, &[take_a.len()]]));
        }
        let k = *s.last().unwrap();
        let mut out = Vec::with_capacity(rows * k);
        for (r, &pick) in take_a.iter().enumerate() {
            let src = if pick { self.vals(a) } else { self.vals(b) };
            out.extend_from_slice(&src[r * k..(r + 1) * k]);
        }
        Ok(self.push(
            Tensor::from_parts(s, out),
            Op::SelectRows(take_a.to_vec(), a, b),
            &[a, b],
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.vals(a).iter().copied().sum();
        self.push(Tensor::scalar(total), Op::Sum(a), &[a])
    }

    /// Weighted negative log-likelihood `-Σ_b w_b · logp[b, targets[b]]`.
    pub fn nll(&mut self, log_probs: Var, targets: &[usize], weights: &[T]) -> Result<Var> {
        let s = self.shape(log_probs);
        if s.len() != 2 || s[0] != targets.len() || s[0] != weights.len() {
            return Err(Error::dim("nll", &[s, &[targets.len()], &[weights.len()]]));
        }
        let v = s[1];
        let lp = self.vals(log_probs);
        let mut total = T::zero();
        for (b, (&t, &w)) in targets.iter().zip(weights).enumerate() {
            if w == T::zero() {
                continue;
            }
            if t >= v {
                return Err(Error::Input(format!("target id {t} outside vocabulary {v}")));
            }
            let x = lp[b * v + t];
            if !x.is_finite() {
                return Err(Error::Numeric(format!(
                    "log-probability of target {t} in row {b} is {x}"
                )));
            }
            total -= w * x;
        }
        Ok(self.push(
            Tensor::scalar(total),
            Op::Nll(log_probs, targets.to_vec(), weights.to_vec()),
            &[log_probs],
        ))
    }

    /// Back-propagates from a one-element `loss`. May be called once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.backward_done {
            return Err(Error::Contract(
                "backward already ran on this tape; record a fresh tape".into(),
            ));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "loss must be a scalar, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.backward_done = true;

        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let (before, rest) = grads.split_at_mut(i);
            let Some(g) = rest[0].as_deref() else {
                continue;
            };
            self.backprop_node(node, g, before);
        }

        // Reachable leaves that want gradients always get a buffer.
        for (i, node) in self.nodes.iter().enumerate().take(n) {
            if node.needs_grad && grads[i].is_none() && matches!(node.op, Op::Leaf) {
                let reached = self.reaches(Var(i), loss);
                if reached {
                    grads[i] = Some(vec![T::zero(); node.value.len()]);
                }
            }
        }

        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn inputs_of(op: &Op<T>) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::AddExpand(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::WeightedSum(a, b)
            | Op::SelectRows(_, a, b) => vec![*a, *b],
            Op::Concat(v) | Op::Stack(v) => v.clone(),
            Op::MulConst(a, _)
            | Op::Scale(a, _)
            | Op::Slice(a, _, _)
            | Op::Reshape(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Softmax(a)
            | Op::LogSoftmax(a)
            | Op::Embedding(a, _)
            | Op::MeanLastDim(a)
            | Op::Sum(a)
            | Op::Nll(a, _, _) => vec![*a],
        }
    }

    fn reaches(&self, from: Var, to: Var) -> bool {
        let mut seen = vec![false; to.0 + 1];
        let mut stack = vec![to];
        while let Some(v) = stack.pop() {
            if v == from {
                return true;
            }
            if v.0 < from.0 || seen[v.0] {
                continue;
            }
            seen[v.0] = true;
            stack.extend(Self::inputs_of(&self.nodes[v.0].op));
        }
        false
    }

    fn backprop_node(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let nodes = &self.nodes;
        let val = |v: Var| nodes[v.0].value.values();
        let wants = |v: Var| nodes[v.0].needs_grad;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [T])| {
            if wants(v) {
                let len = nodes[v.0].value.len();
                let buf = grads[v.0].get_or_insert_with(|| vec![T::zero(); len]);
                f(buf);
            }
        };
        let out = node.value.values();

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let sb = nodes[b.0].value.shape();
                let (k, n) = (sb[0], sb[1]);
                let rows = g.len() / n;
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for r in 0..rows {
                        let grow = &g[r * n..(r + 1) * n];
                        for kk in 0..k {
                            let brow = &bv[kk * n..(kk + 1) * n];
                            let mut s = T::zero();
                            for (&x, &y) in grow.iter().zip(brow) {
                                s += x * y;
                            }
                            ga[r * k + kk] += s;
                        }
                    }
                });
                acc(*b, &mut |gb| {
                    for r in 0..rows {
                        let grow = &g[r * n..(r + 1) * n];
                        for kk in 0..k {
                            let x = av[r * k + kk];
                            if x == T::zero() {
                                continue;
                            }
                            for (o, &y) in gb[kk * n..(kk + 1) * n].iter_mut().zip(grow) {
                                *o += x * y;
                            }
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| {
                    let m = gb.len();
                    for (i, &x) in g.iter().enumerate() {
                        gb[i % m] += x;
                    }
                });
            }
            Op::AddExpand(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                let s = nodes[a.0].value.shape();
                let (l, k) = (s[1], s[2]);
                acc(*b, &mut |gb| {
                    for (i, &x) in g.iter().enumerate() {
                        gb[(i / (l * k)) * k + i % k] += x;
                    }
                });
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| {
                    for (o, &x) in gb.iter_mut().zip(g) {
                        *o -= x;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for ((o, &x), &y) in ga.iter_mut().zip(g).zip(bv) {
                        *o += x * y;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((o, &x), &y) in gb.iter_mut().zip(g).zip(av) {
                        *o += x * y;
                    }
                });
            }
            Op::MulConst(a, k) => acc(*a, &mut |ga| {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(k) {
                    *o += x * y;
                }
            }),
            Op::Scale(a, k) => acc(*a, &mut |ga| {
                for (o, &x) in ga.iter_mut().zip(g) {
                    *o += x * *k;
                }
            }),
            Op::Concat(parts) => {
                let widths: Vec<usize> = parts.iter().map(|p| nodes[p.0].value.last_dim()).collect();
                let total: usize = widths.iter().sum();
                let rows = g.len() / total;
                let mut offset = 0;
                for (p, &w) in parts.iter().zip(&widths) {
                    acc(*p, &mut |gp| {
                        for r in 0..rows {
                            add_into(
                                &mut gp[r * w..(r + 1) * w],
                                &g[r * total + offset..r * total + offset + w],
                            );
                        }
                    });
                    offset += w;
                }
            }
            Op::Slice(a, start, end) => {
                let k = nodes[a.0].value.last_dim();
                let w = end - start;
                acc(*a, &mut |ga| {
                    for (r, grow) in g.chunks(w).enumerate() {
                        add_into(&mut ga[r * k + start..r * k + end], grow);
                    }
                });
            }
            Op::Stack(parts) => {
                let k = nodes[parts[0].0].value.last_dim();
                let l = parts.len();
                for (li, p) in parts.iter().enumerate() {
                    acc(*p, &mut |gp| {
                        for (r, grow) in gp.chunks_mut(k).enumerate() {
                            add_into(grow, &g[(r * l + li) * k..(r * l + li + 1) * k]);
                        }
                    });
                }
            }
            Op::Reshape(a) => acc(*a, &mut |ga| add_into(ga, g)),
            Op::Tanh(a) => acc(*a, &mut |ga| {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o += x * (T::one() - y * y);
                }
            }),
            Op::Sigmoid(a) => acc(*a, &mut |ga| {
                for ((o, &x), &y) in ga.iter_mut().zip(g).zip(out) {
                    *o += x * y * (T::one() - y);
                }
            }),
            Op::Softmax(a) => {
                let k = node.value.last_dim();
                acc(*a, &mut |ga| {
                    for ((grow, yrow), orow) in g.chunks(k).zip(out.chunks(k)).zip(ga.chunks_mut(k)) {
                        let dot: T = grow.iter().zip(yrow).map(|(&x, &y)| x * y).sum();
                        for ((o, &x), &y) in orow.iter_mut().zip(grow).zip(yrow) {
                            *o += y * (x - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let k = node.value.last_dim();
                acc(*a, &mut |ga| {
                    for ((grow, lrow), orow) in g.chunks(k).zip(out.chunks(k)).zip(ga.chunks_mut(k)) {
                        let total: T = grow.iter().copied().sum();
                        for ((o, &x), &l) in orow.iter_mut().zip(grow).zip(lrow) {
                            *o += x - l.exp() * total;
                        }
                    }
                });
            }
            Op::Embedding(table, ids) => {
                let e = node.value.last_dim();
                acc(*table, &mut |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * e..(id + 1) * e], &g[r * e..(r + 1) * e]);
                    }
                });
            }
            Op::MeanLastDim(a) => {
                let k = nodes[a.0].value.last_dim();
                let inv = T::one() / T::from_usize(k).unwrap();
                acc(*a, &mut |ga| {
                    for (i, o) in ga.iter_mut().enumerate() {
                        *o += g[i / k] * inv;
                    }
                });
            }
            Op::WeightedSum(alpha, xs) => {
                let s = nodes[xs.0].value.shape();
                let (b, l, k) = (s[0], s[1], s[2]);
                let (av, xv) = (val(*alpha), val(*xs));
                acc(*alpha, &mut |galpha| {
                    for bi in 0..b {
                        let grow = &g[bi * k..(bi + 1) * k];
                        for li in 0..l {
                            let x = &xv[(bi * l + li) * k..(bi * l + li + 1) * k];
                            galpha[bi * l + li] += grow.iter().zip(x).map(|(&p, &q)| p * q).sum();
                        }
                    }
                });
                acc(*xs, &mut |gx| {
                    for bi in 0..b {
                        let grow = &g[bi * k..(bi + 1) * k];
                        for li in 0..l {
                            let w = av[bi * l + li];
                            let o = &mut gx[(bi * l + li) * k..(bi * l + li + 1) * k];
                            for (o, &p) in o.iter_mut().zip(grow) {
                                *o += w * p;
                            }
                        }
                    }
                });
            }
            Op::SelectRows(take_a, a, b) => {
                let k = node.value.last_dim();
                acc(*a, &mut |ga| {
                    for (r, _) in take_a.iter().enumerate().filter(|(_, &t)| t) {
                        add_into(&mut ga[r * k..(r + 1) * k], &g[r * k..(r + 1) * k]);
                    }
                });
                acc(*b, &mut |gb| {
                    for (r, _) in take_a.iter().enumerate().filter(|(_, &t)| !t) {
                        add_into(&mut gb[r * k..(r + 1) * k], &g[r * k..(r + 1) * k]);
                    }
                });
            }
            Op::Sum(a) => acc(*a, &mut |ga| {
                for o in ga.iter_mut() {
                    *o += g[0];
                }
            }),
            Op::Nll(a, targets, weights) => {
                let v = nodes[a.0].value.last_dim();
                acc(*a, &mut |ga| {
                    for (b, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                        if w != T::zero() {
                            ga[b * v + t] -= g[0] * w;
                        }
                    }
                });
            }
        }
    }
}

#[inline]
fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (o, &x) in dst.iter_mut().zip(src) {
        *o += x;
    }
}
