//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] is an append-only arena of nodes. Every op reads existing
//! nodes and pushes a new one, so parents always have smaller indices than
//! their children and the arena order is a topological order. [`Graph::backward`]
//! walks it in reverse.
//!
//! All matrix-valued ops treat a tensor as `rows × cols` with the last axis
//! as columns; sequence models keep one row per batch element.

use std::collections::HashMap;

use super::{ParamStore, Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// How a node was produced. Doubles as the op tag shown in debug output.
#[derive(Clone, Debug)]
pub enum Op<T> {
    Leaf,
    /// `a[p×q] · b[q×r]`
    MatMul(Var, Var),
    /// `a[p×q] · b[r×q]ᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `x[R×C] + b[C]`, bias broadcast over rows.
    AddRow(Var, Var),
    /// `x[R×C] ⊙ s[R×1]`, one scalar per row.
    MulCol(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    /// `scale * x + shift`
    Affine(Var, T, T),
    Min(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    /// `[R×C] -> [R×1]`
    SumCols(Var),
    /// Row lookup into a `[V×D]` table.
    Gather(Var, Vec<usize>),
    SoftmaxRows(Var),
    /// Mean softmax cross-entropy over rows whose target is present.
    CrossEntropy {
        logits: Var,
        targets: Vec<Option<usize>>,
        count: usize,
    },
    Sum(Var),
}

/// Deliberate corruption of a backward rule, used to prove that the gradient
/// checker notices broken derivatives.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    SigmoidGrad,
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    param: Option<String>,
}

#[derive(Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
    bound: HashMap<String, Var>,
    fault: Option<Fault>,
}

fn cols_of(shape: &[usize]) -> usize {
    *shape.last().expect("non-empty shape")
}

fn rows_of(shape: &[usize]) -> usize {
    shape.iter().product::<usize>() / cols_of(shape)
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            bound: HashMap::new(),
            fault: None,
        }
    }

    #[doc(hidden)]
    pub fn with_fault(fault: Fault) -> Self {
        Self {
            fault: Some(fault),
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node {
            value,
            op,
            param: None,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// A constant or input; receives a gradient but belongs to no parameter.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Binds a named parameter of `store`. Binding the same name twice yields
    /// the same node, so tied weights share one gradient.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Result<Var> {
        if let Some(&v) = self.bound.get(name) {
            return Ok(v);
        }
        let value = store
            .value(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter '{name}'")))?
            .clone();
        let v = self.push(value, Op::Leaf);
        self.nodes[v.0].param = Some(name.to_string());
        self.bound.insert(name.to_string(), v);
        Ok(v)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn op(&self, v: Var) -> &Op<T> {
        &self.nodes[v.0].op
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient accumulated by the last [`Graph::backward`]; `None` when the
    /// node was not reached.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads[v.0].as_ref()
    }

    pub fn grad_or_zeros(&self, v: Var) -> Tensor<T> {
        self.grad(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.shape(v)))
    }

    /// Gradients of every bound parameter, keyed by parameter name.
    pub fn param_grads(&self) -> impl Iterator<Item = (&str, Option<&Tensor<T>>)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| {
            n.param
                .as_deref()
                .map(|name| (name, self.grads[i].as_ref()))
        })
    }

    /// Adds this graph's parameter gradients into the store's gradient buffers.
    pub fn accumulate_into(&self, store: &mut ParamStore<T>) -> Result<()> {
        for (name, grad) in self.param_grads() {
            if let Some(g) = grad {
                store.accumulate_grad(name, g)?;
            }
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // ops

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul_t(self.value(b))?;
        Ok(self.push(value, Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).mul(self.value(b))?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn min(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_with(self.value(b), "min", T::min)?;
        Ok(self.push(value, Op::Min(a, b)))
    }

    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(bias));
        let c = cols_of(xs);
        if bs.len() != 1 || bs[0] != c {
            return Err(Error::dim("add_row", xs, bs));
        }
        let b = self.value(bias).data().to_vec();
        let mut value = self.value(x).clone();
        for row in value.data_mut().chunks_mut(c) {
            row.iter_mut().zip(&b).for_each(|(v, &bb)| *v += bb);
        }
        Ok(self.push(value, Op::AddRow(x, bias)))
    }

    pub fn mul_col(&mut self, x: Var, s: Var) -> Result<Var> {
        let (xs, ss) = (self.shape(x), self.shape(s));
        let (r, c) = (rows_of(xs), cols_of(xs));
        if rows_of(ss) != r || cols_of(ss) != 1 {
            return Err(Error::dim("mul_col", xs, ss));
        }
        let scale = self.value(s).data().to_vec();
        let mut value = self.value(x).clone();
        for (row, &k) in value.data_mut().chunks_mut(c).zip(&scale) {
            row.iter_mut().for_each(|v| *v *= k);
        }
        Ok(self.push(value, Op::MulCol(x, s)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).sigmoid();
        self.push(value, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).tanh();
        self.push(value, Op::Tanh(x))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Var {
        let value = self.value(x).map(|v| scale * v + shift);
        self.push(value, Op::Affine(x, scale, shift))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        self.affine(x, s, T::zero())
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Tensor::concat_cols(&tensors)?;
        Ok(self.push(value, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of nothing".into()))?;
        let c = cols_of(self.shape(*first));
        let mut data = Vec::new();
        for &p in parts {
            if cols_of(self.shape(p)) != c {
                return Err(Error::dim("concat_rows", self.shape(*first), self.shape(p)));
            }
            data.extend_from_slice(self.value(p).data());
        }
        let rows = data.len() / c;
        let value = Tensor::new(vec![rows, c], data)?;
        Ok(self.push(value, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xs = self.shape(x);
        let c = cols_of(xs);
        if start >= end || end > c {
            return Err(Error::Contract(format!(
                "column slice {start}..{end} out of range for {xs:?}"
            )));
        }
        let r = rows_of(xs);
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(r * (end - start));
        for row in src.chunks(c) {
            data.extend_from_slice(&row[start..end]);
        }
        let value = Tensor::new(vec![r, end - start], data)?;
        Ok(self.push(value, Op::SliceCols(x, start, end)))
    }

    pub fn sum_cols(&mut self, x: Var) -> Result<Var> {
        let xs = self.shape(x);
        let (r, c) = (rows_of(xs), cols_of(xs));
        let data = self
            .value(x)
            .data()
            .chunks(c)
            .map(|row| row.iter().copied().sum())
            .collect();
        let value = Tensor::new(vec![r, 1], data)?;
        Ok(self.push(value, Op::SumCols(x)))
    }

    /// Looks up rows of a `[V×D]` table, producing `[ids.len()×D]`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let ts = self.shape(table);
        if ts.len() != 2 {
            return Err(Error::Contract(format!("gather needs a matrix, got {ts:?}")));
        }
        let (v, d) = (ts[0], ts[1]);
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::Data(format!("token id {bad} outside table of {v} rows")));
        }
        let src = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(src.row(i));
        }
        let value = Tensor::new(vec![ids.len(), d], data)?;
        Ok(self.push(value, Op::Gather(table, ids.to_vec())))
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let value = self.value(x).softmax();
        self.push(value, Op::SoftmaxRows(x))
    }

    /// Mean cross-entropy of row-wise softmax over `logits[R×C]`; rows with a
    /// `None` target are ignored. Zero when no row has a target.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let ls = self.shape(logits);
        let (r, c) = (rows_of(ls), cols_of(ls));
        if targets.len() != r {
            return Err(Error::dim("cross_entropy", ls, &[targets.len()]));
        }
        if let Some(bad) = targets.iter().flatten().find(|&&y| y >= c) {
            return Err(Error::Data(format!("label {bad} outside {c} classes")));
        }
        let x = self.value(logits).data();
        let mut total = T::zero();
        let mut count = 0;
        for (row, y) in x.chunks(c).zip(targets) {
            if let Some(y) = *y {
                total += log_sum_exp(row) - row[y];
                count += 1;
            }
        }
        let loss = if count == 0 {
            T::zero()
        } else {
            total / T::lit(count as f64)
        };
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                count,
            },
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x))
    }

    /// Sum of several same-shaped nodes.
    pub fn add_all(&mut self, parts: &[Var]) -> Result<Var> {
        let (&first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::Contract("sum of nothing".into()))?;
        rest.iter().try_fold(first, |acc, &p| self.add(acc, p))
    }

    // ------------------------------------------------------------------
    // reverse pass

    /// Accumulates `∂root/∂node` into every node reachable from `root`.
    ///
    /// Gradients from an earlier call are cleared first; unreached nodes keep
    /// no gradient.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                self.shape(root)
            )));
        }
        self.grads.iter_mut().for_each(|g| *g = None);
        self.grads[root.0] = Some(Tensor::full(self.shape(root), T::one()));

        for i in (0..=root.0).rev() {
            let (lo, hi) = self.grads.split_at_mut(i);
            let Some(g) = hi[0].as_ref() else { continue };
            propagate(&self.nodes, i, g, lo, self.fault)?;
        }
        Ok(())
    }
}

fn log_sum_exp<T: Scalar>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln()
}

fn slot<'a, T: Scalar>(
    lo: &'a mut [Option<Tensor<T>>],
    nodes: &[Node<T>],
    v: Var,
) -> &'a mut Tensor<T> {
    lo[v.0].get_or_insert_with(|| Tensor::zeros(nodes[v.0].value.shape()))
}

fn add_scaled<T: Scalar>(dst: &mut Tensor<T>, src: &[T], s: T) {
    dst.data_mut()
        .iter_mut()
        .zip(src)
        .for_each(|(d, &x)| *d += s * x);
}

fn propagate<T: Scalar>(
    nodes: &[Node<T>],
    i: usize,
    g: &Tensor<T>,
    lo: &mut [Option<Tensor<T>>],
    fault: Option<Fault>,
) -> Result<()> {
    let out = &nodes[i].value;
    let val = |v: Var| &nodes[v.0].value;
    let gd = g.data();
    match &nodes[i].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (p, q) = (val(*a).shape()[0], val(*a).shape()[1]);
            let r = val(*b).shape()[1];
            let bv = val(*b).data();
            T::gemm(false, true, p, r, q, gd, bv, true, slot(lo, nodes, *a).data_mut());
            let av = val(*a).data();
            T::gemm(true, false, q, p, r, av, gd, true, slot(lo, nodes, *b).data_mut());
        }
        Op::MatMulT(a, b) => {
            let (p, q) = (val(*a).shape()[0], val(*a).shape()[1]);
            let r = val(*b).shape()[0];
            let bv = val(*b).data();
            T::gemm(false, false, p, r, q, gd, bv, true, slot(lo, nodes, *a).data_mut());
            let av = val(*a).data();
            T::gemm(true, false, r, p, q, gd, av, true, slot(lo, nodes, *b).data_mut());
        }
        Op::Add(a, b) => {
            add_scaled(slot(lo, nodes, *a), gd, T::one());
            add_scaled(slot(lo, nodes, *b), gd, T::one());
        }
        Op::Sub(a, b) => {
            add_scaled(slot(lo, nodes, *a), gd, T::one());
            add_scaled(slot(lo, nodes, *b), gd, -T::one());
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a).data(), val(*b).data());
            let da = slot(lo, nodes, *a).data_mut();
            for ((d, &gg), &y) in da.iter_mut().zip(gd).zip(bv) {
                *d += gg * y;
            }
            let db = slot(lo, nodes, *b).data_mut();
            for ((d, &gg), &x) in db.iter_mut().zip(gd).zip(av) {
                *d += gg * x;
            }
        }
        Op::Min(a, b) => {
            let (av, bv) = (val(*a).data(), val(*b).data());
            let da = slot(lo, nodes, *a).data_mut();
            for (k, d) in da.iter_mut().enumerate() {
                if av[k] <= bv[k] {
                    *d += gd[k];
                }
            }
            let db = slot(lo, nodes, *b).data_mut();
            for (k, d) in db.iter_mut().enumerate() {
                if av[k] > bv[k] {
                    *d += gd[k];
                }
            }
        }
        Op::AddRow(x, b) => {
            add_scaled(slot(lo, nodes, *x), gd, T::one());
            let c = out.cols();
            let db = slot(lo, nodes, *b).data_mut();
            for row in gd.chunks(c) {
                db.iter_mut().zip(row).for_each(|(d, &gg)| *d += gg);
            }
        }
        Op::MulCol(x, s) => {
            let c = out.cols();
            let (xv, sv) = (val(*x).data(), val(*s).data());
            let dx = slot(lo, nodes, *x).data_mut();
            for ((drow, grow), &k) in dx.chunks_mut(c).zip(gd.chunks(c)).zip(sv) {
                drow.iter_mut().zip(grow).for_each(|(d, &gg)| *d += gg * k);
            }
            let ds = slot(lo, nodes, *s).data_mut();
            for ((d, grow), xrow) in ds.iter_mut().zip(gd.chunks(c)).zip(xv.chunks(c)) {
                *d += grow.iter().zip(xrow).map(|(&gg, &xx)| gg * xx).sum::<T>();
            }
        }
        Op::Sigmoid(x) => {
            let k = if fault == Some(Fault::SigmoidGrad) {
                T::lit(1.1)
            } else {
                T::one()
            };
            let dx = slot(lo, nodes, *x).data_mut();
            for ((d, &gg), &y) in dx.iter_mut().zip(gd).zip(out.data()) {
                *d += k * gg * y * (T::one() - y);
            }
        }
        Op::Tanh(x) => {
            let dx = slot(lo, nodes, *x).data_mut();
            for ((d, &gg), &y) in dx.iter_mut().zip(gd).zip(out.data()) {
                *d += gg * (T::one() - y * y);
            }
        }
        Op::Affine(x, scale, _) => add_scaled(slot(lo, nodes, *x), gd, *scale),
        Op::ConcatCols(parts) => {
            let c = out.cols();
            let mut offset = 0;
            for &p in parts {
                let pc = val(p).cols();
                let dp = slot(lo, nodes, p).data_mut();
                for (drow, grow) in dp.chunks_mut(pc).zip(gd.chunks(c)) {
                    drow.iter_mut()
                        .zip(&grow[offset..offset + pc])
                        .for_each(|(d, &gg)| *d += gg);
                }
                offset += pc;
            }
        }
        Op::ConcatRows(parts) => {
            let mut offset = 0;
            for &p in parts {
                let n = val(p).len();
                add_scaled(slot(lo, nodes, p), &gd[offset..offset + n], T::one());
                offset += n;
            }
        }
        Op::SliceCols(x, start, end) => {
            let c = val(*x).cols();
            let w = end - start;
            let dx = slot(lo, nodes, *x).data_mut();
            for (drow, grow) in dx.chunks_mut(c).zip(gd.chunks(w)) {
                drow[*start..*end]
                    .iter_mut()
                    .zip(grow)
                    .for_each(|(d, &gg)| *d += gg);
            }
        }
        Op::SumCols(x) => {
            let c = val(*x).cols();
            let dx = slot(lo, nodes, *x).data_mut();
            for (drow, &gg) in dx.chunks_mut(c).zip(gd) {
                drow.iter_mut().for_each(|d| *d += gg);
            }
        }
        Op::Gather(table, ids) => {
            let d = out.cols();
            let dt = slot(lo, nodes, *table).data_mut();
            for (&id, grow) in ids.iter().zip(gd.chunks(d)) {
                dt[id * d..(id + 1) * d]
                    .iter_mut()
                    .zip(grow)
                    .for_each(|(dd, &gg)| *dd += gg);
            }
        }
        Op::SoftmaxRows(x) => {
            let c = out.cols();
            let dx = slot(lo, nodes, *x).data_mut();
            for ((drow, grow), yrow) in dx.chunks_mut(c).zip(gd.chunks(c)).zip(out.data().chunks(c)) {
                let dot: T = grow.iter().zip(yrow).map(|(&gg, &y)| gg * y).sum();
                for ((d, &gg), &y) in drow.iter_mut().zip(grow).zip(yrow) {
                    *d += y * (gg - dot);
                }
            }
        }
        Op::CrossEntropy {
            logits,
            targets,
            count,
        } => {
            if *count == 0 {
                return Ok(());
            }
            let scale = gd[0] / T::lit(*count as f64);
            let lv = val(*logits);
            let c = lv.cols();
            let mut probs = vec![T::zero(); c];
            let dl = slot(lo, nodes, *logits).data_mut();
            for ((drow, row), y) in dl.chunks_mut(c).zip(lv.data().chunks(c)).zip(targets) {
                let Some(y) = *y else { continue };
                probs.copy_from_slice(row);
                super::tensor::softmax_in_place(&mut probs);
                probs[y] -= T::one();
                drow.iter_mut()
                    .zip(&probs)
                    .for_each(|(d, &p)| *d += scale * p);
            }
        }
        Op::Sum(x) => {
            let gg = gd[0];
            slot(lo, nodes, *x).data_mut().iter_mut().for_each(|d| *d += gg);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor64;

    #[test]
    fn square_sum_gradient() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor64::vector(&[1.0, 2.0, 3.0]));
        let sq = g.mul(x, x).unwrap();
        let root = g.sum(sq);
        g.backward(root).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn sigmoid_at_zero_weight() {
        let mut g = Graph::<f64>::new();
        let w = g.leaf(Tensor64::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap());
        let x = g.leaf(Tensor64::from_rows(&[vec![1.0], vec![-2.0], vec![3.0]]).unwrap());
        let z = g.matmul(w, x).unwrap();
        let s = g.sigmoid(z);
        let root = g.sum(s);
        g.backward(root).unwrap();
        assert_eq!(g.grad(w).unwrap().data(), &[0.25, -0.5, 0.75]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor64::vector(&[1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn unreachable_nodes_keep_no_gradient() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(Tensor64::scalar(2.0));
        let y = g.leaf(Tensor64::scalar(5.0));
        let _unused = g.tanh(y);
        let root = g.affine(x, 3.0, 1.0);
        g.backward(root).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 3.0);
        assert!(g.grad(y).is_none());
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let mut g = Graph::<f64>::new();
        let l = g.leaf(Tensor64::zeros(&[2, 3]));
        let ce = g.cross_entropy(l, &[Some(0), Some(2)]).unwrap();
        assert!((g.value(ce).item() - 3f64.ln()).abs() < 1e-15);
        let none = g.cross_entropy(l, &[None, None]).unwrap();
        assert_eq!(g.value(none).item(), 0.0);
    }

    #[test]
    fn tied_parameter_binds_once() {
        let mut store = ParamStore::<f64>::new(0);
        store.insert("w", Tensor64::scalar(1.5)).unwrap();
        let mut g = Graph::new();
        let a = g.param(&store, "w").unwrap();
        let b = g.param(&store, "w").unwrap();
        assert_eq!(a, b);
        let p = g.mul(a, b).unwrap();
        let root = g.sum(p);
        g.backward(root).unwrap();
        assert_eq!(g.grad(a).unwrap().item(), 3.0);
    }
}
