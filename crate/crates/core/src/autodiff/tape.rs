use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    /// Differentiable input (coordinates).
    Input,
    /// Trainable parameter with a caller-defined slot.
    Param(usize),
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Affine(Var, f64, f64),
    MatMul { a: Var, b: Var, ta: bool, tb: bool },
    Concat { a: Var, b: Var, axis: usize },
    Slice { x: Var, axis: usize, start: usize, len: usize },
    Pad { x: Var, axis: usize, start: usize, total: usize },
    Sum(Var),
    SumAxis(Var, usize),
    MeanAxis(Var, usize),
    Expand { x: Var, rows: usize, cols: usize },
    GatherLanes { x: Var, axis: usize, idx: Rc<[usize]> },
    ScatterLanes { x: Var, axis: usize, idx: Rc<[usize]>, len: usize },
    SelectRows { x: Var, rows: Rc<[usize]> },
    ScatterRows { x: Var, rows: Rc<[usize]>, total: usize },
    Tanh(Var),
    Square(Var),
}

impl Op {
    fn operands(&self) -> [Option<Var>; 2] {
        use Op::*;
        match *self {
            Input | Param(_) | Constant => [None, None],
            Add(a, b) | Sub(a, b) | Mul(a, b) | AddRow(a, b) | MulRow(a, b) => [Some(a), Some(b)],
            MatMul { a, b, .. } | Concat { a, b, .. } => [Some(a), Some(b)],
            Affine(x, ..) | Sum(x) | SumAxis(x, _) | MeanAxis(x, _) | Tanh(x) | Square(x) => [Some(x), None],
            Slice { x, .. } | Pad { x, .. } | Expand { x, .. } => [Some(x), None],
            GatherLanes { x, .. } | ScatterLanes { x, .. } => [Some(x), None],
            SelectRows { x, .. } | ScatterRows { x, .. } => [Some(x), None],
        }
    }
}

fn eval<'a>(op: &Op, val: impl Fn(Var) -> &'a Tensor) -> Result<Tensor> {
    use Op::*;
    match op {
        Input | Param(_) | Constant => unreachable!("leaves carry their own values"),
        Add(a, b) => val(*a).add(val(*b)),
        Sub(a, b) => val(*a).sub(val(*b)),
        Mul(a, b) => val(*a).mul(val(*b)),
        AddRow(a, r) => val(*a).add_row(val(*r)),
        MulRow(a, r) => val(*a).mul_row(val(*r)),
        Affine(x, s, c) => Ok(val(*x).affine(*s, *c)),
        MatMul { a, b, ta, tb } => val(*a).matmul_t(val(*b), *ta, *tb),
        Concat { a, b, axis } => val(*a).concat(val(*b), *axis),
        Slice { x, axis, start, len } => val(*x).slice(*axis, *start, *len),
        Pad { x, axis, start, total } => val(*x).pad(*axis, *start, *total),
        Sum(x) => Ok(val(*x).sum()),
        SumAxis(x, axis) => val(*x).sum_axis(*axis),
        MeanAxis(x, axis) => val(*x).mean_axis(*axis),
        Expand { x, rows, cols } => val(*x).expand(*rows, *cols),
        GatherLanes { x, axis, idx } => val(*x).gather_lanes(*axis, idx),
        ScatterLanes { x, axis, idx, len } => val(*x).scatter_lanes(*axis, idx, *len),
        SelectRows { x, rows } => val(*x).select_rows(rows),
        ScatterRows { x, rows, total } => val(*x).scatter_rows(rows, *total),
        Tanh(x) => Ok(val(*x).tanh()),
        Square(x) => Ok(val(*x).square()),
    }
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Pooling reduction used by the encoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pool {
    Avg,
    Max,
    Min,
}

/// Append-only record of primitive operations with cached forward values.
///
/// Forward values are computed eagerly when a node is recorded. Derivatives
/// come in two flavours: [`Tape::grad`] returns plain tensors, while
/// [`Tape::grad_graph`] records the adjoint computation on the tape itself so
/// that it can be differentiated again.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push_leaf(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op) -> Result<Var> {
        let value = {
            let nodes = &self.nodes;
            eval(&op, |v| &nodes[v.0].value)?
        };
        self.nodes.push(Node { op, value });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Registers a differentiable input such as a batch of coordinates.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push_leaf(Op::Input, value)
    }

    pub fn param(&mut self, slot: usize, value: Tensor) -> Var {
        self.push_leaf(Op::Param(slot), value)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push_leaf(Op::Constant, value)
    }

    /// Slot passed to [`Tape::param`] when `v` is a parameter leaf.
    pub fn param_slot(&self, v: Var) -> Option<usize> {
        match self.nodes.get(v.0).map(|n| &n.op) {
            Some(Op::Param(slot)) => Some(*slot),
            _ => None,
        }
    }

    pub fn is_input(&self, v: Var) -> bool {
        matches!(self.nodes.get(v.0).map(|n| &n.op), Some(Op::Input))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::Mul(a, b))
    }

    /// `[n, q] + [1, q]` with the row repeated.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.push(Op::AddRow(a, row))
    }

    /// `[n, q] ⊙ [1, q]` with the row repeated.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.push(Op::MulRow(a, row))
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Result<Var> {
        self.push(Op::Affine(x, scale, shift))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        self.affine(x, factor, 0.0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.push(Op::MatMul { a, b, ta: false, tb: false })
    }

    pub fn matmul_t(&mut self, a: Var, b: Var, ta: bool, tb: bool) -> Result<Var> {
        self.push(Op::MatMul { a, b, ta, tb })
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        self.push(Op::Concat { a, b, axis })
    }

    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.push(Op::Slice { x, axis, start, len })
    }

    /// Column `col` of `x` as an `[n, 1]` node.
    pub fn column(&mut self, x: Var, col: usize) -> Result<Var> {
        self.slice(x, 1, col, 1)
    }

    pub fn pad(&mut self, x: Var, axis: usize, start: usize, total: usize) -> Result<Var> {
        self.push(Op::Pad { x, axis, start, total })
    }

    /// Sum of all entries as a `[1, 1]` node.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Sum(x))
    }

    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.push(Op::SumAxis(x, axis))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(Error::Empty("mean of an empty tensor"));
        }
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n as f64)
    }

    pub fn expand(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        self.push(Op::Expand { x, rows, cols })
    }

    pub fn select_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        self.push(Op::SelectRows {
            x,
            rows: rows.into(),
        })
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Tanh(x))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.push(Op::Square(x))
    }

    pub fn mean_pool(&mut self, x: Var, axis: usize) -> Result<Var> {
        self.push(Op::MeanAxis(x, axis))
    }

    pub fn max_pool(&mut self, x: Var, axis: usize) -> Result<Var> {
        let idx = self.value(x).arg_extreme(axis, true)?;
        self.push(Op::GatherLanes { x, axis, idx: idx.into() })
    }

    pub fn min_pool(&mut self, x: Var, axis: usize) -> Result<Var> {
        let idx = self.value(x).arg_extreme(axis, false)?;
        self.push(Op::GatherLanes { x, axis, idx: idx.into() })
    }

    pub fn pool(&mut self, x: Var, axis: usize, kind: Pool) -> Result<Var> {
        match kind {
            Pool::Avg => self.mean_pool(x, axis),
            Pool::Max => self.max_pool(x, axis),
            Pool::Min => self.min_pool(x, axis),
        }
    }

    /// Recomputes every non-leaf node from the recorded leaves.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut values: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node.op {
                Op::Input | Op::Param(_) | Op::Constant => node.value.clone(),
                ref op => eval(op, |v| &values[v.0])?,
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Nodes that depend on any of `wrt`, restricted to ids `<= out`.
    fn dependents(&self, wrt: &[Var], out: Var) -> Vec<bool> {
        let mut active = vec![false; out.0 + 1];
        for v in wrt {
            if v.0 <= out.0 {
                active[v.0] = true;
            }
        }
        for i in 0..=out.0 {
            if !active[i] {
                active[i] = self.nodes[i]
                    .op
                    .operands()
                    .iter()
                    .flatten()
                    .any(|o| active[o.0]);
            }
        }
        active
    }

    fn check_scalar(&self, out: Var) -> Result<()> {
        let shape = self.shape(out);
        if shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalar(shape.to_vec()));
        }
        Ok(())
    }

    /// Gradient of a scalar node with respect to each of `wrt` as plain tensors.
    ///
    /// Variables that do not influence `out` receive zero tensors.
    pub fn grad(&self, out: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        self.check_scalar(out)?;
        self.value(out).ensure_finite("loss")?;
        let active = self.dependents(wrt, out);
        let mut adj: Vec<Option<Tensor>> = vec![None; out.0 + 1];
        if active[out.0] {
            adj[out.0] = Some(Tensor::full(1, 1, 1.0));
        }
        let mut backend = Numeric { tape: self };
        for i in (0..=out.0).rev() {
            if !active[i] || matches!(self.nodes[i].op, Op::Input | Op::Param(_) | Op::Constant) {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            let g = NumH::Own(g);
            for (target, contrib) in vjp(&mut backend, &self.nodes[i].op, Var(i), &g, &active)? {
                let contrib = match contrib {
                    NumH::Own(t) => t,
                    NumH::Node(v) => self.value(v).clone(),
                };
                match &mut adj[target.0] {
                    Some(acc) => acc.add_assign(&contrib)?,
                    slot @ None => *slot = Some(contrib),
                }
            }
        }
        Ok(wrt
            .iter()
            .map(|v| match adj.get_mut(v.0).and_then(Option::take) {
                Some(g) => g,
                None => {
                    let (r, c) = self.value(*v).dims().unwrap_or((1, 1));
                    Tensor::zeros(r, c)
                }
            })
            .collect())
    }

    /// Gradient of a scalar node recorded as new tape nodes (graph of the
    /// graph), so the result is itself differentiable.
    pub fn grad_graph(&mut self, out: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        self.check_scalar(out)?;
        let active = self.dependents(wrt, out);
        let mut adj: Vec<Option<Var>> = vec![None; out.0 + 1];
        if active[out.0] {
            adj[out.0] = Some(self.constant(Tensor::full(1, 1, 1.0)));
        }
        for i in (0..=out.0).rev() {
            if !active[i] {
                continue;
            }
            let Some(g) = adj[i] else { continue };
            let op = self.nodes[i].op.clone();
            if matches!(op, Op::Input | Op::Param(_) | Op::Constant) {
                continue;
            }
            let mut backend = Recorded { tape: self };
            for (target, contrib) in vjp(&mut backend, &op, Var(i), &g, &active)? {
                adj[target.0] = Some(match adj[target.0] {
                    Some(acc) => self.add(acc, contrib)?,
                    None => contrib,
                });
            }
        }
        wrt.iter()
            .map(|v| match adj.get(v.0).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let (r, c) = self.value(*v).dims()?;
                    Ok(self.constant(Tensor::zeros(r, c)))
                }
            })
            .collect()
    }

    /// `∂(Σ u)/∂x` recorded on the tape; for pointwise models row `k` holds
    /// the spatial gradient of `u_k`.
    pub fn gradient(&mut self, u: Var, x: Var) -> Result<Var> {
        if !self.is_input(x) {
            return Err(Error::NotRegistered);
        }
        let s = self.sum(u)?;
        Ok(self.grad_graph(s, &[x])?[0])
    }

    /// Spatial derivative of the column `u` with respect to input `x`.
    ///
    /// `order` 1 returns `∂u/∂x_i` (using `pair.0`); `order` 2 returns
    /// `∂²u/∂x_i∂x_j`, obtained by differentiating the recorded first
    /// derivative again.
    pub fn spatial_derivs(&mut self, u: Var, x: Var, order: usize, pair: (usize, usize)) -> Result<Var> {
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let d = self.value(x).cols();
        if pair.0 >= d || (order == 2 && pair.1 >= d) {
            return Err(Error::InvalidArgument(alloc::format!(
                "derivative axes {pair:?} out of range for {d} input dims"
            )));
        }
        let first = self.gradient(u, x)?;
        let di = self.column(first, pair.0)?;
        if order == 1 {
            return Ok(di);
        }
        let second = self.gradient(di, x)?;
        self.column(second, pair.1)
    }
}

/// Operations the backward rules need, implemented once over plain tensors
/// and once over tape nodes.
trait Adjoint {
    type H: Clone;
    fn node(&self, v: Var) -> Self::H;
    fn dims(&self, h: &Self::H) -> Result<(usize, usize)>;
    fn mul(&mut self, a: &Self::H, b: &Self::H) -> Result<Self::H>;
    fn mul_row(&mut self, a: &Self::H, row: &Self::H) -> Result<Self::H>;
    fn affine(&mut self, x: &Self::H, s: f64, c: f64) -> Result<Self::H>;
    fn matmul(&mut self, a: &Self::H, b: &Self::H, ta: bool, tb: bool) -> Result<Self::H>;
    fn slice(&mut self, x: &Self::H, axis: usize, start: usize, len: usize) -> Result<Self::H>;
    fn pad(&mut self, x: &Self::H, axis: usize, start: usize, total: usize) -> Result<Self::H>;
    fn sum_axis(&mut self, x: &Self::H, axis: usize) -> Result<Self::H>;
    fn expand(&mut self, x: &Self::H, rows: usize, cols: usize) -> Result<Self::H>;
    fn gather_lanes(&mut self, x: &Self::H, axis: usize, idx: &Rc<[usize]>) -> Result<Self::H>;
    fn scatter_lanes(&mut self, x: &Self::H, axis: usize, idx: &Rc<[usize]>, len: usize) -> Result<Self::H>;
    fn select_rows(&mut self, x: &Self::H, rows: &Rc<[usize]>) -> Result<Self::H>;
    fn scatter_rows(&mut self, x: &Self::H, rows: &Rc<[usize]>, total: usize) -> Result<Self::H>;
    fn square(&mut self, x: &Self::H) -> Result<Self::H>;
}

struct Numeric<'t> {
    tape: &'t Tape,
}

/// Adjoint values either borrow a forward value or own a fresh tensor.
#[derive(Clone)]
enum NumH {
    Node(Var),
    Own(Tensor),
}

impl Numeric<'_> {
    fn t<'a>(&'a self, h: &'a NumH) -> &'a Tensor {
        match h {
            NumH::Node(v) => self.tape.value(*v),
            NumH::Own(t) => t,
        }
    }
}

impl Adjoint for Numeric<'_> {
    type H = NumH;
    fn node(&self, v: Var) -> NumH {
        NumH::Node(v)
    }
    fn dims(&self, h: &NumH) -> Result<(usize, usize)> {
        self.t(h).dims()
    }
    fn mul(&mut self, a: &NumH, b: &NumH) -> Result<NumH> {
        self.t(a).mul(self.t(b)).map(NumH::Own)
    }
    fn mul_row(&mut self, a: &NumH, row: &NumH) -> Result<NumH> {
        self.t(a).mul_row(self.t(row)).map(NumH::Own)
    }
    fn affine(&mut self, x: &NumH, s: f64, c: f64) -> Result<NumH> {
        Ok(NumH::Own(self.t(x).affine(s, c)))
    }
    fn matmul(&mut self, a: &NumH, b: &NumH, ta: bool, tb: bool) -> Result<NumH> {
        self.t(a).matmul_t(self.t(b), ta, tb).map(NumH::Own)
    }
    fn slice(&mut self, x: &NumH, axis: usize, start: usize, len: usize) -> Result<NumH> {
        self.t(x).slice(axis, start, len).map(NumH::Own)
    }
    fn pad(&mut self, x: &NumH, axis: usize, start: usize, total: usize) -> Result<NumH> {
        self.t(x).pad(axis, start, total).map(NumH::Own)
    }
    fn sum_axis(&mut self, x: &NumH, axis: usize) -> Result<NumH> {
        self.t(x).sum_axis(axis).map(NumH::Own)
    }
    fn expand(&mut self, x: &NumH, rows: usize, cols: usize) -> Result<NumH> {
        self.t(x).expand(rows, cols).map(NumH::Own)
    }
    fn gather_lanes(&mut self, x: &NumH, axis: usize, idx: &Rc<[usize]>) -> Result<NumH> {
        self.t(x).gather_lanes(axis, idx).map(NumH::Own)
    }
    fn scatter_lanes(&mut self, x: &NumH, axis: usize, idx: &Rc<[usize]>, len: usize) -> Result<NumH> {
        self.t(x).scatter_lanes(axis, idx, len).map(NumH::Own)
    }
    fn select_rows(&mut self, x: &NumH, rows: &Rc<[usize]>) -> Result<NumH> {
        self.t(x).select_rows(rows).map(NumH::Own)
    }
    fn scatter_rows(&mut self, x: &NumH, rows: &Rc<[usize]>, total: usize) -> Result<NumH> {
        self.t(x).scatter_rows(rows, total).map(NumH::Own)
    }
    fn square(&mut self, x: &NumH) -> Result<NumH> {
        Ok(NumH::Own(self.t(x).square()))
    }
}

struct Recorded<'t> {
    tape: &'t mut Tape,
}

impl Adjoint for Recorded<'_> {
    type H = Var;
    fn node(&self, v: Var) -> Var {
        v
    }
    fn dims(&self, h: &Var) -> Result<(usize, usize)> {
        self.tape.value(*h).dims()
    }
    fn mul(&mut self, a: &Var, b: &Var) -> Result<Var> {
        self.tape.mul(*a, *b)
    }
    fn mul_row(&mut self, a: &Var, row: &Var) -> Result<Var> {
        self.tape.mul_row(*a, *row)
    }
    fn affine(&mut self, x: &Var, s: f64, c: f64) -> Result<Var> {
        self.tape.affine(*x, s, c)
    }
    fn matmul(&mut self, a: &Var, b: &Var, ta: bool, tb: bool) -> Result<Var> {
        self.tape.matmul_t(*a, *b, ta, tb)
    }
    fn slice(&mut self, x: &Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.tape.slice(*x, axis, start, len)
    }
    fn pad(&mut self, x: &Var, axis: usize, start: usize, total: usize) -> Result<Var> {
        self.tape.pad(*x, axis, start, total)
    }
    fn sum_axis(&mut self, x: &Var, axis: usize) -> Result<Var> {
        self.tape.sum_axis(*x, axis)
    }
    fn expand(&mut self, x: &Var, rows: usize, cols: usize) -> Result<Var> {
        self.tape.expand(*x, rows, cols)
    }
    fn gather_lanes(&mut self, x: &Var, axis: usize, idx: &Rc<[usize]>) -> Result<Var> {
        self.tape.push(Op::GatherLanes { x: *x, axis, idx: idx.clone() })
    }
    fn scatter_lanes(&mut self, x: &Var, axis: usize, idx: &Rc<[usize]>, len: usize) -> Result<Var> {
        self.tape.push(Op::ScatterLanes { x: *x, axis, idx: idx.clone(), len })
    }
    fn select_rows(&mut self, x: &Var, rows: &Rc<[usize]>) -> Result<Var> {
        self.tape.push(Op::SelectRows { x: *x, rows: rows.clone() })
    }
    fn scatter_rows(&mut self, x: &Var, rows: &Rc<[usize]>, total: usize) -> Result<Var> {
        self.tape.push(Op::ScatterRows { x: *x, rows: rows.clone(), total })
    }
    fn square(&mut self, x: &Var) -> Result<Var> {
        self.tape.square(*x)
    }
}

/// Vector-Jacobian product of one node: the contribution of the output
/// adjoint `g` to each active operand.
fn vjp<B: Adjoint>(b: &mut B, op: &Op, out: Var, g: &B::H, active: &[bool]) -> Result<Vec<(Var, B::H)>> {
    use Op::*;
    let on = |v: Var| active[v.0];
    let mut res = Vec::with_capacity(2);
    match op {
        Input | Param(_) | Constant => {}
        Add(x, y) => {
            if on(*x) {
                res.push((*x, g.clone()));
            }
            if on(*y) {
                res.push((*y, g.clone()));
            }
        }
        Sub(x, y) => {
            if on(*x) {
                res.push((*x, g.clone()));
            }
            if on(*y) {
                res.push((*y, b.affine(g, -1.0, 0.0)?));
            }
        }
        Mul(x, y) => {
            if on(*x) {
                let yv = b.node(*y);
                res.push((*x, b.mul(g, &yv)?));
            }
            if on(*y) {
                let xv = b.node(*x);
                res.push((*y, b.mul(g, &xv)?));
            }
        }
        AddRow(x, r) => {
            if on(*x) {
                res.push((*x, g.clone()));
            }
            if on(*r) {
                res.push((*r, b.sum_axis(g, 0)?));
            }
        }
        MulRow(x, r) => {
            if on(*x) {
                let rv = b.node(*r);
                res.push((*x, b.mul_row(g, &rv)?));
            }
            if on(*r) {
                let xv = b.node(*x);
                let gx = b.mul(g, &xv)?;
                res.push((*r, b.sum_axis(&gx, 0)?));
            }
        }
        Affine(x, s, _) => {
            if on(*x) {
                res.push((*x, b.affine(g, *s, 0.0)?));
            }
        }
        MatMul { a, b: bm, ta, tb } => {
            let (av, bv) = (b.node(*a), b.node(*bm));
            if on(*a) {
                let ga = if *ta {
                    b.matmul(&bv, g, *tb, true)?
                } else {
                    b.matmul(g, &bv, false, !*tb)?
                };
                res.push((*a, ga));
            }
            if on(*bm) {
                let gb = if *tb {
                    b.matmul(g, &av, true, *ta)?
                } else {
                    b.matmul(&av, g, !*ta, false)?
                };
                res.push((*bm, gb));
            }
        }
        Concat { a, b: y, axis } => {
            let (ar, ac) = b.dims(&b.node(*a))?;
            let (yr, yc) = b.dims(&b.node(*y))?;
            let (alen, ylen) = if *axis == 0 { (ar, yr) } else { (ac, yc) };
            if on(*a) {
                res.push((*a, b.slice(g, *axis, 0, alen)?));
            }
            if on(*y) {
                res.push((*y, b.slice(g, *axis, alen, ylen)?));
            }
        }
        Slice { x, axis, start, .. } => {
            if on(*x) {
                let (r, c) = b.dims(&b.node(*x))?;
                let total = if *axis == 0 { r } else { c };
                res.push((*x, b.pad(g, *axis, *start, total)?));
            }
        }
        Pad { x, axis, start, .. } => {
            if on(*x) {
                let (r, c) = b.dims(&b.node(*x))?;
                let len = if *axis == 0 { r } else { c };
                res.push((*x, b.slice(g, *axis, *start, len)?));
            }
        }
        Sum(x) | SumAxis(x, _) => {
            if on(*x) {
                let (r, c) = b.dims(&b.node(*x))?;
                res.push((*x, b.expand(g, r, c)?));
            }
        }
        MeanAxis(x, axis) => {
            if on(*x) {
                let (r, c) = b.dims(&b.node(*x))?;
                let n = if *axis == 0 { r } else { c };
                let e = b.expand(g, r, c)?;
                res.push((*x, b.affine(&e, 1.0 / n as f64, 0.0)?));
            }
        }
        Expand { x, .. } => {
            if on(*x) {
                let (r, c) = b.dims(&b.node(*x))?;
                let (er, ec) = b.dims(g)?;
                let mut acc = g.clone();
                if r == 1 && er != 1 {
                    acc = b.sum_axis(&acc, 0)?;
                }
                if c == 1 && ec != 1 {
                    acc = b.sum_axis(&acc, 1)?;
                }
                res.push((*x, acc));
            }
        }
        GatherLanes { x, axis, idx } => {
            if on(*x) {
                let (r, c) = b.dims(&b.node(*x))?;
                let len = if *axis == 0 { r } else { c };
                res.push((*x, b.scatter_lanes(g, *axis, idx, len)?));
            }
        }
        ScatterLanes { x, axis, idx, .. } => {
            if on(*x) {
                res.push((*x, b.gather_lanes(g, *axis, idx)?));
            }
        }
        SelectRows { x, rows } => {
            if on(*x) {
                let (r, _) = b.dims(&b.node(*x))?;
                res.push((*x, b.scatter_rows(g, rows, r)?));
            }
        }
        ScatterRows { x, rows, .. } => {
            if on(*x) {
                res.push((*x, b.select_rows(g, rows)?));
            }
        }
        Tanh(x) => {
            if on(*x) {
                // d tanh = 1 - tanh², built from the cached output.
                let t = b.node(out);
                let t2 = b.square(&t)?;
                let d = b.affine(&t2, -1.0, 1.0)?;
                res.push((*x, b.mul(g, &d)?));
            }
        }
        Square(x) => {
            if on(*x) {
                let xv = b.node(*x);
                let two_x = b.affine(&xv, 2.0, 0.0)?;
                res.push((*x, b.mul(g, &two_x)?));
            }
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Tensor {
        Tensor::matrix(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn tanh_of_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.input(Tensor::scalar(0.0));
        let y = t.tanh(x).unwrap();
        assert_eq!(t.value(y).item().unwrap(), 0.0);
    }

    #[test]
    fn mean_pool_of_identical_rows() {
        let mut t = Tape::new();
        let r = [0.3, -1.25, 7.0];
        let x = t.constant(Tensor::from_rows(&[r, r, r]));
        let m = t.mean_pool(x, 0).unwrap();
        assert_eq!(t.value(m).data(), &r);
    }

    #[test]
    fn max_pool_definition() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[[1., 5.], [3., 2.]]));
        let m = t.max_pool(x, 0).unwrap();
        assert_eq!(t.value(m).data(), &[3., 5.]);
    }

    #[test]
    fn max_pool_routes_gradient_to_first_extreme() {
        let mut t = Tape::new();
        let x = t.input(Tensor::from_rows(&[[2.], [2.], [1.]]));
        let m = t.max_pool(x, 0).unwrap();
        let s = t.sum(m).unwrap();
        let g = t.grad(s, &[x]).unwrap();
        assert_eq!(g[0].data(), &[1., 0., 0.]);
    }

    #[test]
    fn linear_map_gradient() {
        // loss = sum(x W): dloss/dW[i, j] = sum over rows of x[:, i].
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[[1., 2.], [3., 4.]]));
        let w = t.param(0, Tensor::from_rows(&[[0.5, -1., 2.], [1., 1., 1.]]));
        let y = t.matmul(x, w).unwrap();
        let s = t.sum(y).unwrap();
        let g = t.grad(s, &[w]).unwrap();
        assert_eq!(g[0].data(), &[4., 4., 4., 6., 6., 6.]);
    }

    #[test]
    fn grad_of_constant_is_zero() {
        let mut t = Tape::new();
        let w = t.param(0, Tensor::from_rows(&[[1., 2.]]));
        let c = t.constant(Tensor::scalar(3.0));
        let g = t.grad(c, &[w]).unwrap();
        assert_eq!(g[0].data(), &[0., 0.]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let w = t.param(0, Tensor::from_rows(&[[1., 2.]]));
        let y = t.square(w).unwrap();
        assert_eq!(t.grad(y, &[w]).unwrap_err(), Error::NonScalar(vec![1, 2]));
    }

    #[test]
    fn second_derivative_of_square() {
        let mut t = Tape::new();
        let x = t.input(col(&[-2.0, 0.0, 0.5, 3.0]));
        let u = t.square(x).unwrap();
        let d2 = t.spatial_derivs(u, x, 2, (0, 0)).unwrap();
        assert_eq!(t.value(d2).data(), &[2., 2., 2., 2.]);
        let d1 = t.spatial_derivs(u, x, 1, (0, 0)).unwrap();
        assert_eq!(t.value(d1).data(), &[-4., 0., 1., 6.]);
    }

    #[test]
    fn tanh_slope_at_origin() {
        let mut t = Tape::new();
        let x = t.input(col(&[0.0]));
        let u = t.tanh(x).unwrap();
        let d = t.spatial_derivs(u, x, 1, (0, 0)).unwrap();
        assert_eq!(t.value(d).item().unwrap(), 1.0);
    }

    #[test]
    fn unsupported_order_and_unregistered_input() {
        let mut t = Tape::new();
        let x = t.input(col(&[1.0]));
        let u = t.square(x).unwrap();
        assert_eq!(t.spatial_derivs(u, x, 3, (0, 0)).unwrap_err(), Error::UnsupportedOrder(3));
        let c = t.constant(col(&[1.0]));
        let v = t.square(c).unwrap();
        assert_eq!(t.spatial_derivs(v, c, 1, (0, 0)).unwrap_err(), Error::NotRegistered);
    }

    #[test]
    fn replay_reproduces_cached_values() {
        let mut t = Tape::new();
        let x = t.input(Tensor::from_rows(&[[0.1, 0.2], [0.3, -0.4]]));
        let w = t.param(0, Tensor::from_rows(&[[1.0, -0.5], [0.25, 2.0]]));
        let h = t.matmul(x, w).unwrap();
        let a = t.tanh(h).unwrap();
        let u = t.sum_axis(a, 1).unwrap();
        t.spatial_derivs(u, x, 2, (0, 1)).unwrap();
        let values = t.replay().unwrap();
        for (i, v) in values.iter().enumerate() {
            assert_eq!(v, t.value(Var(i)));
        }
    }
}
