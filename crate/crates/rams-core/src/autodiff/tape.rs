//! Scalar reverse-mode tape.
//!
//! The tape is an append-only list of primitive operations with parent
//! indices and local partials. Topological order is the append order, and the
//! backward pass visits nodes in strictly reverse append order, so adjoint
//! accumulation order is fixed and runs are bit-reproducible.
//!
//! Two front ends build tapes: [`Var`], an operator-overloaded handle that
//! records as it computes (used by the function-sample gradient path), and
//! [`ScalarProgram`] + [`record_scalar_graph`], an explicit primitive-op
//! sequence for callers that assemble graphs as data.

use std::cell::{Cell, RefCell};

use super::scalar::Scalar;
use crate::{Error, Result};

#[derive(Copy, Clone, Debug)]
enum Op {
    Leaf,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Neg(u32),
    Tanh(u32),
    Exp(u32),
    Sin(u32),
    Cos(u32),
    /// x * c
    Scale(u32, f64),
    /// x + c
    Shift(u32, f64),
    /// c - x
    SubFrom(u32, f64),
    /// c / x
    DivInto(u32, f64),
}

#[derive(Copy, Clone, Debug)]
struct Node {
    op: Op,
    value: f64,
    /// Local partials with respect to the (up to two) parents.
    pa: f64,
    pb: f64,
}

impl Node {
    fn parents(&self) -> (Option<u32>, Option<u32>) {
        match self.op {
            Op::Leaf => (None, None),
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => (Some(a), Some(b)),
            Op::Neg(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Sin(a)
            | Op::Cos(a)
            | Op::Scale(a, _)
            | Op::Shift(a, _)
            | Op::SubFrom(a, _)
            | Op::DivInto(a, _) => (Some(a), None),
        }
    }
}

/// Reverse-mode tape over `f64` scalars.
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    outputs: RefCell<Vec<u32>>,
    /// One backward pass per recorded forward pass.
    spent: Cell<bool>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            outputs: RefCell::new(Vec::new()),
            spent: Cell::new(false),
        }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
            outputs: RefCell::new(Vec::new()),
            spent: Cell::new(false),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Register an input leaf and return its handle.
    pub fn leaf(&self, value: f64) -> Var<'_> {
        let idx = self.push(Node {
            op: Op::Leaf,
            value,
            pa: 0.0,
            pb: 0.0,
        });
        Var {
            value,
            node: Some((self, idx)),
        }
    }

    pub fn leaves(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.leaf(v)).collect()
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(node);
        idx
    }

    /// Declare `var` the tape's scalar output.
    pub fn mark_output(&self, var: Var<'_>) {
        if let Some((_, idx)) = var.node {
            self.outputs.borrow_mut().push(idx);
        }
    }

    pub fn output_value(&self) -> Result<f64> {
        let outputs = self.outputs.borrow();
        match outputs.as_slice() {
            [idx] => Ok(self.nodes.borrow()[*idx as usize].value),
            _ => Err(Error::Structural(format!(
                "tape has {} outputs, expected exactly one",
                outputs.len()
            ))),
        }
    }

    /// Re-execute the recorded graph with fresh leaf values (in append
    /// order), refreshing every node value and local partial. Re-arms the
    /// tape for another backward pass.
    pub fn reforward(&self, leaf_values: &[f64]) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        let mut next_leaf = 0usize;
        for i in 0..nodes.len() {
            let op = nodes[i].op;
            let val = |k: u32| nodes[k as usize].value;
            let (value, pa, pb) = match op {
                Op::Leaf => {
                    let v = *leaf_values.get(next_leaf).ok_or_else(|| {
                        Error::Structural("reforward: too few leaf values".into())
                    })?;
                    next_leaf += 1;
                    (v, 0.0, 0.0)
                }
                Op::Add(a, b) => (val(a) + val(b), 1.0, 1.0),
                Op::Sub(a, b) => (val(a) - val(b), 1.0, -1.0),
                Op::Mul(a, b) => (val(a) * val(b), val(b), val(a)),
                Op::Div(a, b) => {
                    let w = val(a) / val(b);
                    (w, 1.0 / val(b), -w / val(b))
                }
                Op::Neg(a) => (-val(a), -1.0, 0.0),
                Op::Tanh(a) => {
                    let t = val(a).tanh();
                    (t, 1.0 - t * t, 0.0)
                }
                Op::Exp(a) => {
                    let e = val(a).exp();
                    (e, e, 0.0)
                }
                Op::Sin(a) => (val(a).sin(), val(a).cos(), 0.0),
                Op::Cos(a) => (val(a).cos(), -val(a).sin(), 0.0),
                Op::Scale(a, c) => (val(a) * c, c, 0.0),
                Op::Shift(a, c) => (val(a) + c, 1.0, 0.0),
                Op::SubFrom(a, c) => (c - val(a), -1.0, 0.0),
                Op::DivInto(a, c) => {
                    let w = c / val(a);
                    (w, -w / val(a), 0.0)
                }
            };
            nodes[i].value = value;
            nodes[i].pa = pa;
            nodes[i].pb = pb;
        }
        if next_leaf != leaf_values.len() {
            return Err(Error::Structural(format!(
                "reforward: {} leaf values supplied, tape has {next_leaf} leaves",
                leaf_values.len()
            )));
        }
        self.spent.set(false);
        Ok(())
    }

    /// Reverse sweep from the single marked output, seeded with `seed`.
    /// Returns the adjoint of every node; leaf adjoints are
    /// `seed * d(output)/d(leaf)`.
    pub fn backward(&self, seed: f64) -> Result<Adjoints> {
        let outputs = self.outputs.borrow();
        if outputs.len() != 1 {
            return Err(Error::Structural(format!(
                "backward requires exactly one seeded output, tape has {}",
                outputs.len()
            )));
        }
        if self.spent.replace(true) {
            return Err(Error::Structural(
                "tape already consumed by a backward pass; reforward before reuse".into(),
            ));
        }
        let out = outputs[0];
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[out as usize] = seed;
        for i in (0..nodes.len()).rev() {
            let a_i = adj[i];
            if a_i == 0.0 {
                continue;
            }
            let node = &nodes[i];
            let (pa, pb) = node.parents();
            if let Some(a) = pa {
                adj[a as usize] += node.pa * a_i;
            }
            if let Some(b) = pb {
                adj[b as usize] += node.pb * a_i;
            }
        }
        Ok(Adjoints { values: adj })
    }
}

/// Node adjoints produced by one backward pass.
pub struct Adjoints {
    values: Vec<f64>,
}

impl Adjoints {
    /// Adjoint of a recorded variable; constants have zero adjoint.
    pub fn of(&self, var: Var<'_>) -> f64 {
        match var.node {
            Some((_, idx)) => self.values[idx as usize],
            None => 0.0,
        }
    }

    pub fn of_all(&self, vars: &[Var<'_>]) -> Vec<f64> {
        vars.iter().map(|&v| self.of(v)).collect()
    }
}

/// Recording scalar handle. Arithmetic on `Var` pushes nodes onto the
/// originating tape; operations between plain constants stay off the tape.
#[derive(Copy, Clone)]
pub struct Var<'t> {
    value: f64,
    node: Option<(&'t Tape, u32)>,
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Self { value, node: None }
    }

    pub fn val(&self) -> f64 {
        self.value
    }

    fn tape(&self) -> Option<&'t Tape> {
        self.node.map(|(t, _)| t)
    }

    fn record(tape: &'t Tape, op: Op, value: f64, pa: f64, pb: f64) -> Var<'t> {
        let idx = tape.push(Node { op, value, pa, pb });
        Var {
            value,
            node: Some((tape, idx)),
        }
    }

    fn unary(self, f: impl Fn(f64) -> (f64, f64), op: impl Fn(u32) -> Op) -> Var<'t> {
        let (value, partial) = f(self.value);
        match self.node {
            Some((tape, idx)) => Var::record(tape, op(idx), value, partial, 0.0),
            None => Var::constant(value),
        }
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Var<'t> {
        let value = self.value + rhs.value;
        match (self.node, rhs.node) {
            (Some((t, a)), Some((_, b))) => Var::record(t, Op::Add(a, b), value, 1.0, 1.0),
            (Some((t, a)), None) => Var::record(t, Op::Shift(a, rhs.value), value, 1.0, 0.0),
            (None, Some((t, b))) => Var::record(t, Op::Shift(b, self.value), value, 1.0, 0.0),
            (None, None) => Var::constant(value),
        }
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Var<'t> {
        let value = self.value - rhs.value;
        match (self.node, rhs.node) {
            (Some((t, a)), Some((_, b))) => Var::record(t, Op::Sub(a, b), value, 1.0, -1.0),
            (Some((t, a)), None) => Var::record(t, Op::Shift(a, -rhs.value), value, 1.0, 0.0),
            (None, Some((t, b))) => Var::record(t, Op::SubFrom(b, self.value), value, -1.0, 0.0),
            (None, None) => Var::constant(value),
        }
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Var<'t> {
        let value = self.value * rhs.value;
        match (self.node, rhs.node) {
            (Some((t, a)), Some((_, b))) => {
                Var::record(t, Op::Mul(a, b), value, rhs.value, self.value)
            }
            (Some((t, a)), None) => Var::record(t, Op::Scale(a, rhs.value), value, rhs.value, 0.0),
            (None, Some((t, b))) => Var::record(t, Op::Scale(b, self.value), value, self.value, 0.0),
            (None, None) => Var::constant(value),
        }
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Var<'t> {
        let value = self.value / rhs.value;
        match (self.node, rhs.node) {
            (Some((t, a)), Some((_, b))) => Var::record(
                t,
                Op::Div(a, b),
                value,
                1.0 / rhs.value,
                -value / rhs.value,
            ),
            (Some((t, a)), None) => {
                Var::record(t, Op::Scale(a, 1.0 / rhs.value), value, 1.0 / rhs.value, 0.0)
            }
            (None, Some((t, b))) => Var::record(
                t,
                Op::DivInto(b, self.value),
                value,
                -value / rhs.value,
                0.0,
            ),
            (None, None) => Var::constant(value),
        }
    }
}

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(|v| (-v, -1.0), Op::Neg)
    }
}

impl<'t> Scalar for Var<'t> {
    fn from_f64(v: f64) -> Self {
        Var::constant(v)
    }
    fn value(self) -> f64 {
        self.value
    }
    fn scale(self, c: f64) -> Self {
        match self.node {
            Some((t, a)) => Var::record(t, Op::Scale(a, c), self.value * c, c, 0.0),
            None => Var::constant(self.value * c),
        }
    }
    fn shift(self, c: f64) -> Self {
        match self.node {
            Some((t, a)) => Var::record(t, Op::Shift(a, c), self.value + c, 1.0, 0.0),
            None => Var::constant(self.value + c),
        }
    }
    fn tanh(self) -> Self {
        self.unary(
            |v| {
                let t = v.tanh();
                (t, 1.0 - t * t)
            },
            Op::Tanh,
        )
    }
    fn exp(self) -> Self {
        self.unary(
            |v| {
                let e = v.exp();
                (e, e)
            },
            Op::Exp,
        )
    }
    fn sin(self) -> Self {
        self.unary(|v| (v.sin(), v.cos()), Op::Sin)
    }
    fn cos(self) -> Self {
        self.unary(|v| (v.cos(), -v.sin()), Op::Cos)
    }
}

/// One primitive in an explicit scalar program. Operands refer to earlier
/// entries of the op sequence by index.
#[derive(Clone, Debug, PartialEq)]
pub enum ProgOp {
    /// Load the i-th entry of the input vector.
    Input(usize),
    Const(f64),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Tanh(usize),
    Exp(usize),
    Sin(usize),
    Cos(usize),
}

/// A straight-line scalar program: a primitive-op sequence plus the index of
/// its single output.
#[derive(Clone, Debug)]
pub struct ScalarProgram {
    pub ops: Vec<ProgOp>,
    pub output: usize,
}

/// Execute `program` over `inputs`, recording every primitive onto a fresh
/// tape. The tape holds forward values for every node and has the program's
/// output marked for [`Tape::backward`].
pub fn record_scalar_graph(program: &ScalarProgram, inputs: &[f64]) -> Result<Tape> {
    let tape = Tape::new();
    let mut slots: Vec<Var<'_>> = Vec::with_capacity(program.ops.len());
    let fetch = |slots: &[Var<'_>], idx: usize, at: usize| -> Result<Var<'_>> {
        if idx >= at {
            return Err(Error::Structural(format!(
                "op {at} references undefined slot {idx}"
            )));
        }
        Ok(slots[idx])
    };
    for (at, op) in program.ops.iter().enumerate() {
        let var = match *op {
            ProgOp::Input(i) => {
                let v = *inputs.get(i).ok_or_else(|| {
                    Error::Structural(format!("op {at} references missing input {i}"))
                })?;
                tape.leaf(v)
            }
            ProgOp::Const(c) => tape.leaf(c),
            ProgOp::Add(a, b) => fetch(&slots, a, at)? + fetch(&slots, b, at)?,
            ProgOp::Sub(a, b) => fetch(&slots, a, at)? - fetch(&slots, b, at)?,
            ProgOp::Mul(a, b) => fetch(&slots, a, at)? * fetch(&slots, b, at)?,
            ProgOp::Div(a, b) => fetch(&slots, a, at)? / fetch(&slots, b, at)?,
            ProgOp::Neg(a) => -fetch(&slots, a, at)?,
            ProgOp::Tanh(a) => fetch(&slots, a, at)?.tanh(),
            ProgOp::Exp(a) => fetch(&slots, a, at)?.exp(),
            ProgOp::Sin(a) => fetch(&slots, a, at)?.sin(),
            ProgOp::Cos(a) => fetch(&slots, a, at)?.cos(),
        };
        slots.push(var);
    }
    let out = *slots.get(program.output).ok_or_else(|| {
        Error::Structural(format!("output index {} out of range", program.output))
    })?;
    tape.mark_output(out);
    Ok(tape)
}
