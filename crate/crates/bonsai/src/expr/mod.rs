//! Expression graphs for factorable functions.
//!
//! Expressions live in an arena ([`ExprGraph`]) with hash-consing: building a
//! node that is structurally equal to an existing one returns the existing
//! id, so common subexpressions are shared by construction and structural
//! equality coincides with id equality. Children always have smaller ids
//! than their parents, which makes ascending id order a topological order.
//!
//! The graph itself is immutable once built (simplification builds new
//! nodes); evaluation values and interval activities are kept in caller-owned
//! side vectors so that one graph can serve several solve contexts.

mod estimate;
mod simplify;

pub use estimate::{initial_reference_points, NodeEstimate, Sense};

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use crate::interval::Interval;
use crate::INF;

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Val(f64),
    Var(usize),
    /// a_0 + Σ a_j·child_j
    Sum {
        constant: f64,
        coefs: Vec<f64>,
    },
    /// c · Π child_j
    Prod {
        coef: f64,
    },
    /// child^p
    Pow {
        exponent: f64,
    },
    /// sign(child)·|child|^p, p > 1
    SignPow {
        exponent: f64,
    },
    Exp,
    Log,
    /// −child·log(child)
    Entropy,
    Sin,
    Cos,
    Abs,
}

impl Op {
    fn rank(&self) -> u8 {
        match self {
            Op::Var(_) => 0,
            Op::Val(_) => 1,
            Op::Sum { .. } => 2,
            Op::Prod { .. } => 3,
            Op::Pow { .. } => 4,
            Op::SignPow { .. } => 5,
            Op::Exp => 6,
            Op::Log => 7,
            Op::Entropy => 8,
            Op::Sin => 9,
            Op::Cos => 10,
            Op::Abs => 11,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub op: Op,
    pub children: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarType {
    Continuous,
    Integer,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarOrigin {
    /// Declared in the model.
    Original,
    /// Introduced for the extended formulations; relaxation bookkeeping only,
    /// excluded from branching by default.
    Auxiliary,
    /// Introduced by a handler purely for its relaxation (no defining
    /// expression); appears only in cut rows.
    Relaxation,
}

#[derive(Clone, Debug)]
pub struct Var {
    pub name: String,
    pub vartype: VarType,
    pub lb: f64,
    pub ub: f64,
    pub obj: f64,
    pub origin: VarOrigin,
    pub implied_integral: bool,
}

impl Var {
    pub fn continuous(name: &str, lb: f64, ub: f64) -> Var {
        Var {
            name: name.to_string(),
            vartype: VarType::Continuous,
            lb,
            ub,
            obj: 0.0,
            origin: VarOrigin::Original,
            implied_integral: false,
        }
    }

    pub fn bounds(&self) -> Interval {
        Interval::new(self.lb, self.ub)
    }

    pub fn is_integral(&self) -> bool {
        matches!(self.vartype, VarType::Integer | VarType::Binary)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Curvature {
    Convex,
    Concave,
    Linear,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Inc,
    Dec,
    Const,
    Unknown,
}

#[derive(Clone, Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("argument {value} outside the domain of {op} (node {node})")]
    Domain { node: NodeId, op: String, value: f64 },
    #[error("derivative evaluated at a kink of {op} (node {node})")]
    Kink { node: NodeId, op: String },
}

/// Result of a backward interval pass.
#[derive(Clone, Debug)]
pub enum PropOutcome {
    Infeasible,
    /// Variable index with the tightened (already intersected) bounds.
    Tightenings(Vec<(usize, Interval)>),
}

#[derive(Clone, Debug, Hash, PartialEq, Eq)]
struct NodeKey {
    rank: u8,
    bits: Vec<u64>,
    children: Vec<NodeId>,
}

fn op_bits(op: &Op) -> Vec<u64> {
    match op {
        Op::Val(v) => vec![v.to_bits()],
        Op::Var(i) => vec![*i as u64],
        Op::Sum { constant, coefs } => {
            let mut b = vec![constant.to_bits()];
            b.extend(coefs.iter().map(|c| c.to_bits()));
            b
        }
        Op::Prod { coef } => vec![coef.to_bits()],
        Op::Pow { exponent } | Op::SignPow { exponent } => vec![exponent.to_bits()],
        _ => vec![],
    }
}

#[derive(Default, Clone, Debug)]
pub struct ExprGraph {
    nodes: Vec<Node>,
    cons: HashMap<NodeKey, NodeId>,
}

impl ExprGraph {
    pub fn new() -> ExprGraph {
        ExprGraph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id].op
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id].children
    }

    /// Add a node, reusing an existing structurally equal one.
    pub fn add(&mut self, op: Op, children: Vec<NodeId>) -> NodeId {
        debug_assert!(children.iter().all(|&c| c < self.nodes.len()));
        if let Op::Sum { coefs, .. } = &op {
            debug_assert_eq!(coefs.len(), children.len());
        }
        let key = NodeKey {
            rank: op.rank(),
            bits: op_bits(&op),
            children: children.clone(),
        };
        if let Some(&id) = self.cons.get(&key) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(Node { op, children });
        self.cons.insert(key, id);
        id
    }

    pub fn val(&mut self, v: f64) -> NodeId {
        self.add(Op::Val(v), vec![])
    }

    pub fn var(&mut self, i: usize) -> NodeId {
        self.add(Op::Var(i), vec![])
    }

    pub fn sum(&mut self, constant: f64, terms: Vec<(f64, NodeId)>) -> NodeId {
        let (coefs, children): (Vec<f64>, Vec<NodeId>) = terms.into_iter().unzip();
        self.add(Op::Sum { constant, coefs }, children)
    }

    pub fn prod(&mut self, coef: f64, children: Vec<NodeId>) -> NodeId {
        self.add(Op::Prod { coef }, children)
    }

    pub fn pow(&mut self, child: NodeId, exponent: f64) -> NodeId {
        self.add(Op::Pow { exponent }, vec![child])
    }

    /// Structural total order: operator rank, then constant data, then arity,
    /// then children recursively. With hash-consing, Equal implies same id.
    pub fn compare(&self, a: NodeId, b: NodeId) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        let r = na.op.rank().cmp(&nb.op.rank());
        if r != Ordering::Equal {
            return r;
        }
        let (ba, bb) = (op_bits(&na.op), op_bits(&nb.op));
        let r = ba.len().cmp(&bb.len());
        if r != Ordering::Equal {
            return r;
        }
        let r = na.children.len().cmp(&nb.children.len());
        if r != Ordering::Equal {
            return r;
        }
        for (&ca, &cb) in na.children.iter().zip(&nb.children) {
            let r = self.compare(ca, cb);
            if r != Ordering::Equal {
                return r;
            }
        }
        for (xa, xb) in ba.iter().zip(&bb) {
            // compare constants by value, not bit pattern
            let (fa, fb) = (f64::from_bits(*xa), f64::from_bits(*xb));
            let r = fa.partial_cmp(&fb).unwrap_or(Ordering::Equal);
            if r != Ordering::Equal {
                return r;
            }
        }
        Ordering::Equal
    }

    /// Structural hash; equal under [`compare`](Self::compare) implies equal
    /// hash.
    pub fn hash_node(&self, id: NodeId) -> u64 {
        let mut memo = vec![0u64; id + 1];
        self.hash_into(id, &mut memo)
    }

    fn hash_into(&self, id: NodeId, memo: &mut Vec<u64>) -> u64 {
        if memo[id] != 0 {
            return memo[id];
        }
        let node = &self.nodes[id];
        let mut h = DefaultHasher::new();
        node.op.rank().hash(&mut h);
        op_bits(&node.op).hash(&mut h);
        for &c in &node.children {
            self.hash_into(c, memo).hash(&mut h);
        }
        let v = h.finish() | 1;
        memo[id] = v;
        v
    }

    /// All variable indices appearing under `root`, ascending.
    pub fn variables(&self, root: NodeId) -> Vec<usize> {
        let mut seen = vec![false; root + 1];
        let mut vars = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if seen[id] {
                continue;
            }
            seen[id] = true;
            if let Op::Var(i) = self.nodes[id].op {
                vars.push(i);
            }
            stack.extend_from_slice(&self.nodes[id].children);
        }
        vars.sort_unstable();
        vars.dedup();
        vars
    }

    /// Nodes reachable from `root`, as a mask over ids 0..=root.
    pub fn reachable(&self, root: NodeId) -> Vec<bool> {
        let mut seen = vec![false; root + 1];
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if seen[id] {
                continue;
            }
            seen[id] = true;
            stack.extend_from_slice(&self.nodes[id].children);
        }
        seen
    }

    // ------------------------------------------------------------------
    // evaluation
    // ------------------------------------------------------------------

    pub fn eval(&self, root: NodeId, point: &[f64]) -> Result<f64, EvalError> {
        self.eval_tol(root, point, 1e-6)
    }

    /// Evaluate with explicit feasibility tolerance: arguments violating an
    /// operator domain by at most `feastol` are clipped, larger violations
    /// raise a domain error.
    pub fn eval_tol(&self, root: NodeId, point: &[f64], feastol: f64) -> Result<f64, EvalError> {
        let mut values = vec![0.0f64; root + 1];
        self.eval_into(root, point, feastol, &mut values)?;
        Ok(values[root])
    }

    /// Evaluate every node up to `root` into `values` (resized as needed).
    pub fn eval_into(
        &self,
        root: NodeId,
        point: &[f64],
        feastol: f64,
        values: &mut Vec<f64>,
    ) -> Result<(), EvalError> {
        if values.len() < root + 1 {
            values.resize(root + 1, 0.0);
        }
        for id in 0..=root {
            let node = &self.nodes[id];
            let v = match &node.op {
                Op::Val(c) => *c,
                Op::Var(i) => point[*i],
                Op::Sum { constant, coefs } => {
                    let mut s = *constant;
                    for (c, &ch) in coefs.iter().zip(&node.children) {
                        s += c * values[ch];
                    }
                    s
                }
                Op::Prod { coef } => {
                    let mut p = *coef;
                    for &ch in &node.children {
                        p *= values[ch];
                    }
                    p
                }
                Op::Pow { exponent } => {
                    let x = values[node.children[0]];
                    let p = *exponent;
                    if p.fract() == 0.0 {
                        if p < 0.0 && x == 0.0 {
                            return Err(EvalError::Domain {
                                node: id,
                                op: "pow".into(),
                                value: x,
                            });
                        }
                        x.powi(p as i32)
                    } else {
                        let x = if x < 0.0 {
                            if x < -feastol {
                                return Err(EvalError::Domain {
                                    node: id,
                                    op: "pow".into(),
                                    value: x,
                                });
                            }
                            0.0
                        } else {
                            x
                        };
                        if p < 0.0 && x == 0.0 {
                            return Err(EvalError::Domain {
                                node: id,
                                op: "pow".into(),
                                value: x,
                            });
                        }
                        x.powf(p)
                    }
                }
                Op::SignPow { exponent } => {
                    let x = values[node.children[0]];
                    if x == 0.0 {
                        0.0
                    } else {
                        x.signum() * x.abs().powf(*exponent)
                    }
                }
                Op::Exp => values[node.children[0]].exp(),
                Op::Log => {
                    let x = values[node.children[0]];
                    if x <= 0.0 {
                        if x < -feastol {
                            return Err(EvalError::Domain {
                                node: id,
                                op: "log".into(),
                                value: x,
                            });
                        }
                        // argument clipped to the domain boundary
                        -crate::INF
                    } else {
                        x.ln()
                    }
                }
                Op::Entropy => {
                    let x = values[node.children[0]];
                    if x < 0.0 {
                        if x < -feastol {
                            return Err(EvalError::Domain {
                                node: id,
                                op: "entropy".into(),
                                value: x,
                            });
                        }
                        0.0
                    } else if x == 0.0 {
                        0.0
                    } else {
                        -x * x.ln()
                    }
                }
                Op::Sin => values[node.children[0]].sin(),
                Op::Cos => values[node.children[0]].cos(),
                Op::Abs => values[node.children[0]].abs(),
            };
            values[id] = v;
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // backward differentiation
    // ------------------------------------------------------------------

    /// Gradient of the function at `root` with respect to all variables,
    /// by one forward value pass and one reverse adjoint pass.
    pub fn backward_diff(
        &self,
        root: NodeId,
        point: &[f64],
        nvars: usize,
    ) -> Result<Vec<f64>, EvalError> {
        let mut values = Vec::new();
        self.eval_into(root, point, 1e-6, &mut values)?;
        let reachable = self.reachable(root);
        let mut adjoint = vec![0.0f64; root + 1];
        adjoint[root] = 1.0;
        let mut grad = vec![0.0f64; nvars];
        for id in (0..=root).rev() {
            if !reachable[id] || adjoint[id] == 0.0 {
                if let Op::Var(i) = self.nodes[id].op {
                    if reachable[id] {
                        grad[i] += adjoint[id];
                    }
                }
                continue;
            }
            let node = &self.nodes[id];
            let a = adjoint[id];
            match &node.op {
                Op::Val(_) => {}
                Op::Var(i) => grad[*i] += a,
                Op::Sum { coefs, .. } => {
                    for (c, &ch) in coefs.iter().zip(&node.children) {
                        adjoint[ch] += a * c;
                    }
                }
                Op::Prod { coef } => {
                    for (j, &ch) in node.children.iter().enumerate() {
                        let mut partial = *coef;
                        for (k, &other) in node.children.iter().enumerate() {
                            if k != j {
                                partial *= values[other];
                            }
                        }
                        adjoint[ch] += a * partial;
                    }
                }
                Op::Pow { exponent } => {
                    let x = values[node.children[0]];
                    let p = *exponent;
                    let d = if p.fract() == 0.0 {
                        p * x.powi(p as i32 - 1)
                    } else {
                        if x.abs() < 1e-9 && p < 1.0 {
                            return Err(EvalError::Kink {
                                node: id,
                                op: "pow".into(),
                            });
                        }
                        p * x.max(0.0).powf(p - 1.0)
                    };
                    adjoint[node.children[0]] += a * d;
                }
                Op::SignPow { exponent } => {
                    let x = values[node.children[0]];
                    adjoint[node.children[0]] += a * exponent * x.abs().powf(exponent - 1.0);
                }
                Op::Exp => adjoint[node.children[0]] += a * values[id],
                Op::Log => adjoint[node.children[0]] += a / values[node.children[0]],
                Op::Entropy => {
                    let x = values[node.children[0]];
                    if x < 1e-300 {
                        return Err(EvalError::Kink {
                            node: id,
                            op: "entropy".into(),
                        });
                    }
                    adjoint[node.children[0]] += a * (-(x.ln() + 1.0));
                }
                Op::Sin => adjoint[node.children[0]] += a * values[node.children[0]].cos(),
                Op::Cos => adjoint[node.children[0]] -= a * values[node.children[0]].sin(),
                Op::Abs => {
                    let x = values[node.children[0]];
                    if x.abs() < 1e-9 {
                        return Err(EvalError::Kink {
                            node: id,
                            op: "abs".into(),
                        });
                    }
                    adjoint[node.children[0]] += a * x.signum();
                }
            }
        }
        Ok(grad)
    }

    // ------------------------------------------------------------------
    // interval evaluation
    // ------------------------------------------------------------------

    /// Activity of one node given variable bounds.
    pub fn interval_eval(&self, root: NodeId, bounds: &[Interval]) -> Interval {
        let mut act = Vec::new();
        self.interval_eval_into(root, bounds, &mut act);
        act[root]
    }

    /// Forward pass filling activities for every node id ≤ root.
    pub fn interval_eval_into(&self, root: NodeId, bounds: &[Interval], act: &mut Vec<Interval>) {
        if act.len() < root + 1 {
            act.resize(root + 1, Interval::whole());
        }
        for id in 0..=root {
            act[id] = self.node_activity(id, bounds, act);
        }
    }

    pub(crate) fn node_activity(&self, id: NodeId, bounds: &[Interval], act: &[Interval]) -> Interval {
        let node = &self.nodes[id];
        match &node.op {
            Op::Val(c) => Interval::point(*c),
            Op::Var(i) => bounds[*i],
            Op::Sum { constant, coefs } => {
                let mut s = Interval::point(*constant);
                for (c, &ch) in coefs.iter().zip(&node.children) {
                    s = s.add(&act[ch].scale(*c));
                    if s.is_empty() {
                        return Interval::EMPTY;
                    }
                }
                s
            }
            Op::Prod { coef } => {
                let mut p = Interval::point(*coef);
                for &ch in &node.children {
                    p = p.mul(&act[ch]);
                    if p.is_empty() {
                        return Interval::EMPTY;
                    }
                }
                p
            }
            Op::Pow { exponent } => act[node.children[0]].pow(*exponent),
            Op::SignPow { exponent } => act[node.children[0]].signpower(*exponent),
            Op::Exp => act[node.children[0]].exp(),
            Op::Log => act[node.children[0]].log(),
            Op::Entropy => act[node.children[0]].entropy(),
            Op::Sin => act[node.children[0]].sin(),
            Op::Cos => act[node.children[0]].cos(),
            Op::Abs => act[node.children[0]].abs(),
        }
    }

    // ------------------------------------------------------------------
    // reverse interval propagation
    // ------------------------------------------------------------------

    /// Backward pass: restrict `root` to `target` and derive variable-bound
    /// tightenings. `act` must hold a valid forward pass for `root`.
    ///
    /// Returned tightenings are already intersected with the input bounds
    /// and never exclude a point x with root(x) ∈ target.
    pub fn reverse_prop(
        &self,
        root: NodeId,
        target: Interval,
        bounds: &[Interval],
        act: &[Interval],
    ) -> PropOutcome {
        let reachable = self.reachable(root);
        let mut node_target: Vec<Option<Interval>> = vec![None; root + 1];
        let start = target.intersect(&act[root]);
        if start.is_empty() {
            return PropOutcome::Infeasible;
        }
        node_target[root] = Some(start);
        let mut tight: HashMap<usize, Interval> = HashMap::new();
        for id in (0..=root).rev() {
            if !reachable[id] {
                continue;
            }
            let t = match node_target[id] {
                Some(t) => t,
                None => continue,
            };
            let node = &self.nodes[id];
            match &node.op {
                Op::Val(c) => {
                    let tol = 1e-9 * (1.0 + c.abs());
                    if *c < t.lo - tol || *c > t.hi + tol {
                        return PropOutcome::Infeasible;
                    }
                }
                Op::Var(i) => {
                    let cur = tight.get(i).copied().unwrap_or(bounds[*i]);
                    let new = cur.intersect(&t);
                    if new.is_empty() {
                        return PropOutcome::Infeasible;
                    }
                    tight.insert(*i, new);
                }
                _ => {
                    for j in 0..node.children.len() {
                        let ch = node.children[j];
                        let implied = self.invert_child(id, j, t, act);
                        let refined = implied.intersect(&act[ch]);
                        if refined.is_empty() {
                            return PropOutcome::Infeasible;
                        }
                        let merged = match node_target[ch] {
                            Some(prev) => prev.intersect(&refined),
                            None => refined,
                        };
                        if merged.is_empty() {
                            return PropOutcome::Infeasible;
                        }
                        node_target[ch] = Some(merged);
                    }
                }
            }
        }
        let mut out: Vec<(usize, Interval)> = Vec::new();
        for (i, iv) in tight {
            if iv.lo > bounds[i].lo || iv.hi < bounds[i].hi {
                out.push((i, iv));
            }
        }
        out.sort_by_key(|(i, _)| *i);
        PropOutcome::Tightenings(out)
    }

    /// Interval implied for child `j` of node `id` when the node value is
    /// restricted to `t`.
    pub(crate) fn invert_child(&self, id: NodeId, j: usize, t: Interval, act: &[Interval]) -> Interval {
        let node = &self.nodes[id];
        match &node.op {
            Op::Val(_) | Op::Var(_) => unreachable!(),
            Op::Sum { constant, coefs } => {
                let cj = coefs[j];
                if cj == 0.0 {
                    return Interval::whole();
                }
                let mut rest = Interval::point(*constant);
                for (k, (c, &ch)) in coefs.iter().zip(&node.children).enumerate() {
                    if k != j {
                        rest = rest.add(&act[ch].scale(*c));
                    }
                }
                t.sub(&rest).scale(1.0 / cj).widen_tiny()
            }
            Op::Prod { coef } => {
                let mut rest = Interval::point(*coef);
                for (k, &ch) in node.children.iter().enumerate() {
                    if k != j {
                        rest = rest.mul(&act[ch]);
                    }
                }
                t.div(&rest).widen_tiny()
            }
            Op::Pow { exponent } => invert_pow(t, *exponent, act[node.children[0]]),
            Op::SignPow { exponent } => {
                let inv = 1.0 / *exponent;
                let e = |v: f64| -> f64 {
                    if v.abs() >= INF {
                        v.signum() * INF
                    } else if v == 0.0 {
                        0.0
                    } else {
                        v.signum() * v.abs().powf(inv)
                    }
                };
                Interval::new(e(t.lo), e(t.hi)).widen_tiny()
            }
            Op::Exp => t.log(),
            Op::Log => t.exp(),
            Op::Entropy => invert_entropy(t, act[node.children[0]]),
            Op::Sin => invert_trig(t, act[node.children[0]], false),
            Op::Cos => invert_trig(t, act[node.children[0]], true),
            Op::Abs => {
                let pos = t.intersect(&Interval::new(0.0, INF));
                if pos.is_empty() {
                    return Interval::EMPTY;
                }
                let arg = act[node.children[0]];
                pos.intersect(&arg)
                    .hull(&pos.neg().intersect(&arg))
                    .widen_tiny()
            }
        }
    }

    // ------------------------------------------------------------------
    // curvature / monotonicity / integrality
    // ------------------------------------------------------------------

    pub fn curvature(&self, root: NodeId, bounds: &[Interval]) -> Curvature {
        let mut act = Vec::new();
        self.interval_eval_into(root, bounds, &mut act);
        self.curvature_at(root, &act)
    }

    pub fn curvature_at(&self, id: NodeId, act: &[Interval]) -> Curvature {
        use Curvature::*;
        let node = &self.nodes[id];
        match &node.op {
            Op::Val(_) | Op::Var(_) => Linear,
            Op::Sum { coefs, .. } => {
                let mut cur = Linear;
                for (c, &ch) in coefs.iter().zip(&node.children) {
                    let child = self.curvature_at(ch, act);
                    let signed = signed_curvature(child, *c);
                    cur = combine_sum(cur, signed);
                    if cur == Unknown {
                        return Unknown;
                    }
                }
                cur
            }
            Op::Prod { coef } => {
                if node.children.len() == 1 {
                    signed_curvature(self.curvature_at(node.children[0], act), *coef)
                } else {
                    Unknown
                }
            }
            Op::Pow { exponent } => {
                let g = self.curvature_at(node.children[0], act);
                let x = act[node.children[0]];
                pow_curvature(*exponent, x, g)
            }
            Op::SignPow { .. } => {
                let g = self.curvature_at(node.children[0], act);
                let x = act[node.children[0]];
                if g == Linear && x.lo >= 0.0 {
                    Convex
                } else if g == Linear && x.hi <= 0.0 {
                    Concave
                } else {
                    Unknown
                }
            }
            Op::Exp => {
                // exp is convex and increasing
                match self.curvature_at(node.children[0], act) {
                    Linear | Convex => Convex,
                    _ => Unknown,
                }
            }
            Op::Log => match self.curvature_at(node.children[0], act) {
                Linear | Concave => Concave,
                _ => Unknown,
            },
            Op::Entropy => match self.curvature_at(node.children[0], act) {
                Linear => Concave,
                _ => Unknown,
            },
            Op::Sin | Op::Cos => {
                let g = self.curvature_at(node.children[0], act);
                if g != Linear {
                    return Unknown;
                }
                let x = act[node.children[0]];
                trig_curvature(x, matches!(node.op, Op::Cos))
            }
            Op::Abs => match self.curvature_at(node.children[0], act) {
                Linear => Convex,
                _ => Unknown,
            },
        }
    }

    pub fn monotonicity(&self, id: NodeId, child_index: usize, act: &[Interval]) -> Monotonicity {
        use Monotonicity::*;
        let node = &self.nodes[id];
        match &node.op {
            Op::Val(_) | Op::Var(_) => Const,
            Op::Sum { coefs, .. } => {
                let c = coefs[child_index];
                if c > 0.0 {
                    Inc
                } else if c < 0.0 {
                    Dec
                } else {
                    Const
                }
            }
            Op::Prod { coef } => {
                let mut partial = Interval::point(*coef);
                for (k, &ch) in node.children.iter().enumerate() {
                    if k != child_index {
                        partial = partial.mul(&act[ch]);
                    }
                }
                sign_to_monotonicity(partial)
            }
            Op::Pow { exponent } => {
                let p = *exponent;
                let x = act[node.children[0]];
                if p == 0.0 {
                    return Const;
                }
                let is_int = p.fract() == 0.0;
                let even = is_int && (p as i64) % 2 == 0;
                if p > 0.0 {
                    if !even {
                        if is_int || x.lo >= 0.0 {
                            Inc
                        } else {
                            Unknown
                        }
                    } else if x.lo >= 0.0 {
                        Inc
                    } else if x.hi <= 0.0 {
                        Dec
                    } else {
                        Unknown
                    }
                } else if x.lo > 0.0 {
                    Dec
                } else if x.hi < 0.0 {
                    if even {
                        Inc
                    } else if is_int {
                        Dec
                    } else {
                        Unknown
                    }
                } else {
                    Unknown
                }
            }
            Op::SignPow { .. } => Inc,
            Op::Exp | Op::Log => Inc,
            Op::Entropy => {
                let x = act[node.children[0]];
                let e_inv = std::f64::consts::E.recip();
                if x.hi <= e_inv {
                    Inc
                } else if x.lo >= e_inv {
                    Dec
                } else {
                    Unknown
                }
            }
            Op::Sin => sign_to_monotonicity(act[node.children[0]].cos()),
            Op::Cos => sign_to_monotonicity(act[node.children[0]].sin().neg()),
            Op::Abs => {
                let x = act[node.children[0]];
                if x.lo >= 0.0 {
                    Inc
                } else if x.hi <= 0.0 {
                    Dec
                } else {
                    Unknown
                }
            }
        }
    }

    /// True when the node takes integral values whenever all variables do.
    pub fn integrality(&self, id: NodeId, vars: &[Var]) -> bool {
        let node = &self.nodes[id];
        let int = |x: f64| x.fract() == 0.0;
        match &node.op {
            Op::Val(c) => int(*c),
            Op::Var(i) => vars[*i].is_integral(),
            Op::Sum { constant, coefs } => {
                int(*constant)
                    && coefs.iter().all(|c| int(*c))
                    && node.children.iter().all(|&c| self.integrality(c, vars))
            }
            Op::Prod { coef } => {
                int(*coef) && node.children.iter().all(|&c| self.integrality(c, vars))
            }
            Op::Pow { exponent } => {
                *exponent > 0.0
                    && int(*exponent)
                    && self.integrality(node.children[0], vars)
            }
            Op::SignPow { exponent } => {
                int(*exponent) && self.integrality(node.children[0], vars)
            }
            Op::Abs => self.integrality(node.children[0], vars),
            _ => false,
        }
    }
}

impl Interval {
    /// Widen by one conservative notch; used after inverse operations whose
    /// endpoint arithmetic is not exactness-checked.
    fn widen_tiny(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        let d = |x: f64| 1e-12 * x.abs().max(1e-12);
        Interval::new(
            if self.lo <= -INF { -INF } else { self.lo - d(self.lo) },
            if self.hi >= INF { INF } else { self.hi + d(self.hi) },
        )
    }
}

fn sign_to_monotonicity(partial: Interval) -> Monotonicity {
    if partial.is_empty() {
        Monotonicity::Unknown
    } else if partial.lo >= 0.0 && partial.hi <= 0.0 {
        Monotonicity::Const
    } else if partial.lo >= 0.0 {
        Monotonicity::Inc
    } else if partial.hi <= 0.0 {
        Monotonicity::Dec
    } else {
        Monotonicity::Unknown
    }
}

fn signed_curvature(c: Curvature, coef: f64) -> Curvature {
    use Curvature::*;
    if coef == 0.0 {
        return Linear;
    }
    if coef > 0.0 {
        c
    } else {
        match c {
            Convex => Concave,
            Concave => Convex,
            other => other,
        }
    }
}

fn combine_sum(a: Curvature, b: Curvature) -> Curvature {
    use Curvature::*;
    match (a, b) {
        (Linear, x) | (x, Linear) => x,
        (Convex, Convex) => Convex,
        (Concave, Concave) => Concave,
        _ => Unknown,
    }
}

/// Curvature of x^p composed with a child of curvature `g` over range `x`.
fn pow_curvature(p: f64, x: Interval, g: Curvature) -> Curvature {
    use Curvature::*;
    if g == Unknown || x.is_empty() {
        return Unknown;
    }
    if p == 0.0 {
        return Linear;
    }
    if p == 1.0 {
        return g;
    }
    let is_int = p.fract() == 0.0;
    let even = is_int && (p as i64) % 2 == 0;
    // outer curvature and monotonicity of t^p on the child range
    let (outer_curv, outer_mono): (Curvature, Monotonicity) = if p > 1.0 {
        if even {
            let m = if x.lo >= 0.0 {
                Monotonicity::Inc
            } else if x.hi <= 0.0 {
                Monotonicity::Dec
            } else {
                Monotonicity::Unknown
            };
            (Convex, m)
        } else if is_int || x.lo >= 0.0 {
            if x.lo >= 0.0 {
                (Convex, Monotonicity::Inc)
            } else if x.hi <= 0.0 {
                (Concave, Monotonicity::Inc)
            } else {
                (Unknown, Monotonicity::Inc)
            }
        } else {
            (Unknown, Monotonicity::Unknown)
        }
    } else if p > 0.0 {
        // p in (0,1), domain x ≥ 0
        if x.lo >= 0.0 {
            (Concave, Monotonicity::Inc)
        } else {
            (Unknown, Monotonicity::Unknown)
        }
    } else {
        // p < 0
        if x.lo > 0.0 {
            (Convex, Monotonicity::Dec)
        } else if x.hi < 0.0 && is_int {
            if even {
                (Convex, Monotonicity::Inc)
            } else {
                (Concave, Monotonicity::Dec)
            }
        } else {
            (Unknown, Monotonicity::Unknown)
        }
    };
    compose_curvature(outer_curv, outer_mono, g)
}

/// Curvature of f(g(x)) from f's curvature and monotonicity on g's range.
fn compose_curvature(f_curv: Curvature, f_mono: Monotonicity, g: Curvature) -> Curvature {
    use Curvature::*;
    if g == Linear {
        return f_curv;
    }
    match (f_curv, f_mono, g) {
        (Convex, Monotonicity::Inc, Convex) => Convex,
        (Convex, Monotonicity::Dec, Concave) => Convex,
        (Concave, Monotonicity::Inc, Concave) => Concave,
        (Concave, Monotonicity::Dec, Convex) => Concave,
        _ => Unknown,
    }
}

fn trig_curvature(x: Interval, is_cos: bool) -> Curvature {
    if !x.is_finite() {
        return Curvature::Unknown;
    }
    // shift cos to sin phase: cos(x) = sin(x + π/2)
    let shift = if is_cos { std::f64::consts::FRAC_PI_2 } else { 0.0 };
    let pi = std::f64::consts::PI;
    let lo = (x.lo + shift) / pi;
    let hi = (x.hi + shift) / pi;
    if hi - lo > 1.0 {
        return Curvature::Unknown;
    }
    let k = lo.floor();
    if hi <= k + 1.0 + 1e-12 {
        // within [kπ, (k+1)π]: sin is concave for even k, convex for odd
        if (k as i64).rem_euclid(2) == 0 {
            return Curvature::Concave;
        }
        return Curvature::Convex;
    }
    Curvature::Unknown
}

/// Preimage of t under x^p.
fn invert_pow(t: Interval, p: f64, arg: Interval) -> Interval {
    if t.is_empty() {
        return Interval::EMPTY;
    }
    if p == 0.0 {
        return Interval::whole();
    }
    if p == 1.0 {
        return t;
    }
    let is_int = p.fract() == 0.0;
    let even = is_int && (p as i64) % 2 == 0;
    if p < 0.0 {
        // x^p ∈ t ⇔ x^|p| ∈ 1/t (with sign bookkeeping handled below)
        let s = t.recip();
        if s.is_empty() {
            return Interval::EMPTY;
        }
        return invert_pow_positive(s, -p, even, is_int, arg);
    }
    invert_pow_positive(t, p, even, is_int, arg)
}

fn invert_pow_positive(t: Interval, p: f64, even: bool, is_int: bool, arg: Interval) -> Interval {
    let root = |v: f64| -> f64 {
        if v.abs() >= INF {
            v.signum() * INF
        } else if v == 0.0 {
            0.0
        } else {
            v.signum() * v.abs().powf(1.0 / p)
        }
    };
    if even {
        let pos = t.intersect(&Interval::new(0.0, INF));
        if pos.is_empty() {
            return Interval::EMPTY;
        }
        // intersect each sign branch with the argument range before hulling
        let r = Interval::new(root(pos.lo), root(pos.hi)).widen_tiny();
        r.intersect(&arg).hull(&r.neg().intersect(&arg))
    } else if is_int {
        Interval::new(root(t.lo), root(t.hi)).widen_tiny()
    } else {
        // fractional exponent: domain x ≥ 0
        let pos = t.intersect(&Interval::new(0.0, INF));
        if pos.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(root(pos.lo), root(pos.hi)).widen_tiny()
    }
}

/// Preimage of t under x ↦ −x·log(x) on [0, ∞), via bisection on the two
/// monotone pieces.
fn invert_entropy(t: Interval, arg: Interval) -> Interval {
    let f = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    let e_inv = std::f64::consts::E.recip();
    let peak = e_inv;
    if t.is_empty() || t.lo > f(peak) {
        return Interval::EMPTY;
    }
    // increasing piece [0, 1/e]: values [0, 1/e]
    let inc_lo = if t.lo <= 0.0 {
        0.0
    } else {
        bisect_increasing(&f, 0.0, peak, t.lo)
    };
    let inc_hi = if t.hi >= f(peak) {
        peak
    } else if t.hi < 0.0 {
        f64::NAN
    } else {
        bisect_increasing(&f, 0.0, peak, t.hi)
    };
    let inc = if inc_hi.is_nan() {
        Interval::EMPTY
    } else {
        Interval::new(inc_lo, inc_hi)
    };
    // decreasing piece [1/e, ∞): values (−∞, 1/e]
    let dec_lo = if t.hi >= f(peak) {
        peak
    } else {
        bisect_decreasing(&f, peak, 1e30, t.hi)
    };
    let dec_hi = if t.lo >= f(peak) {
        peak
    } else {
        bisect_decreasing(&f, peak, 1e30, t.lo)
    };
    let dec = Interval::new(dec_lo, dec_hi.min(INF));
    inc.widen_tiny()
        .intersect(&arg)
        .hull(&dec.widen_tiny().intersect(&arg))
}

/// Smallest x in [lo,hi] with f(x) ≥ v for increasing f.
fn bisect_increasing(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, v: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if f(m) >= v {
            b = m;
        } else {
            a = m;
        }
    }
    a
}

/// Largest x in [lo,hi] with f(x) ≥ v for decreasing f.
fn bisect_decreasing(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, v: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..120 {
        let m = 0.5 * (a + b);
        if f(m) >= v {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// Preimage of t under sin (or cos), restricted to the child activity.
fn invert_trig(t: Interval, child: Interval, is_cos: bool) -> Interval {
    let t = t.intersect(&Interval::new(-1.0, 1.0));
    if t.is_empty() {
        return Interval::EMPTY;
    }
    if t.lo <= -1.0 && t.hi >= 1.0 {
        return child;
    }
    let tau = 2.0 * std::f64::consts::PI;
    if child.is_empty() || !child.is_finite() || child.width() >= tau || child.lo.abs() > 1e10 {
        return child;
    }
    // cos(x) = sin(x + π/2): shift, solve for sin, shift back
    let shift = if is_cos { std::f64::consts::FRAC_PI_2 } else { 0.0 };
    let c = Interval::new(child.lo + shift, child.hi + shift);
    let asin_lo = t.lo.asin();
    let asin_hi = t.hi.asin();
    let pi = std::f64::consts::PI;
    let mut hull = Interval::EMPTY;
    let k0 = ((c.lo + pi / 2.0) / tau).floor() as i64 - 1;
    let k1 = ((c.hi + pi / 2.0) / tau).ceil() as i64 + 1;
    for k in k0..=k1 {
        let base = k as f64 * tau;
        // increasing branch: [asin_lo, asin_hi] + 2kπ
        let inc = Interval::new(base + asin_lo - 1e-9, base + asin_hi + 1e-9);
        // decreasing branch: [π − asin_hi, π − asin_lo] + 2kπ
        let dec = Interval::new(base + pi - asin_hi - 1e-9, base + pi - asin_lo + 1e-9);
        hull = hull.hull(&inc.intersect(&c)).hull(&dec.intersect(&c));
    }
    if hull.is_empty() {
        return Interval::EMPTY;
    }
    Interval::new(hull.lo - shift, hull.hi - shift).intersect(&child)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    /// log(x)² + 2·log(x)·y + y²
    fn paper_expr(g: &mut ExprGraph) -> NodeId {
        let x = g.var(0);
        let y = g.var(1);
        let lx = g.add(Op::Log, vec![x]);
        let lx2 = g.pow(lx, 2.0);
        let lxy = g.prod(1.0, vec![lx, y]);
        let y2 = g.pow(y, 2.0);
        g.sum(0.0, vec![(1.0, lx2), (2.0, lxy), (1.0, y2)])
    }

    #[test]
    fn eval_log_quadratic() {
        let mut g = ExprGraph::new();
        let e = paper_expr(&mut g);
        let v = g.eval(e, &[1.0, 2.0]).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn eval_entropy_limits() {
        let mut g = ExprGraph::new();
        let y = g.var(0);
        let e = g.add(Op::Entropy, vec![y]);
        assert_eq!(g.eval(e, &[0.0]).unwrap(), 0.0);
        assert!(g.eval(e, &[1.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn eval_signpower_negative_base() {
        let mut g = ExprGraph::new();
        let y = g.var(0);
        let e = g.add(Op::SignPow { exponent: 3.0 }, vec![y]);
        assert!((g.eval(e, &[-2.0]).unwrap() + 8.0).abs() < 1e-12);
    }

    #[test]
    fn eval_domain_error_beyond_feastol() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let e = g.add(Op::Log, vec![x]);
        assert!(matches!(g.eval(e, &[-1.0]), Err(EvalError::Domain { .. })));
        let e2 = g.pow(x, 0.5);
        assert_eq!(g.eval(e2, &[-1e-8]).unwrap(), 0.0);
        assert!(matches!(g.eval(e2, &[-1.0]), Err(EvalError::Domain { .. })));
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let a = g.pow(x, 2.0);
        let b = g.pow(x, 2.0);
        assert_eq!(a, b);
        let s1 = g.sum(1.0, vec![(2.0, a)]);
        let s2 = g.sum(1.0, vec![(2.0, b)]);
        assert_eq!(s1, s2);
        assert_eq!(g.compare(s1, s2), Ordering::Equal);
        assert_eq!(g.hash_node(s1), g.hash_node(s2));
    }

    #[test]
    fn gradient_exp_at_zero() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let e = g.add(Op::Exp, vec![x]);
        let grad = g.backward_diff(e, &[0.0], 1).unwrap();
        assert!((grad[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_bilinear() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let e = g.prod(1.0, vec![x, y]);
        let grad = g.backward_diff(e, &[2.0, 3.0], 2).unwrap();
        assert!((grad[0] - 3.0).abs() < 1e-12 && (grad[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_log_squared_matches_finite_differences() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let lx = g.add(Op::Log, vec![x]);
        let e = g.pow(lx, 2.0);
        let p = std::f64::consts::E;
        let grad = g.backward_diff(e, &[p], 1).unwrap();
        let h = 1e-6;
        let fd = (g.eval(e, &[p + h]).unwrap() - g.eval(e, &[p - h]).unwrap()) / (2.0 * h);
        assert!((grad[0] - fd).abs() < 1e-6 * (1.0 + fd.abs()));
        assert!((grad[0] - 2.0 / p).abs() < 1e-9);
    }

    #[test]
    fn gradient_via_shared_subexpression() {
        // d/dx (log(x)² + 2·log(x)·y + y²) = 2·log(x)/x + 2y/x
        let mut g = ExprGraph::new();
        let e = paper_expr(&mut g);
        let grad = g.backward_diff(e, &[2.0, 3.0], 2).unwrap();
        let lx = 2.0f64.ln();
        assert!((grad[0] - (2.0 * lx / 2.0 + 2.0 * 3.0 / 2.0)).abs() < 1e-9);
        assert!((grad[1] - (2.0 * lx + 2.0 * 3.0)).abs() < 1e-9);
    }

    #[test]
    fn activity_of_log_on_unit_box() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let e = g.add(Op::Log, vec![x]);
        let act = g.interval_eval(e, &[iv(0.0, 1.0)]);
        assert!(act.lo <= -crate::INF + 1.0);
        assert!(act.hi >= 0.0 && act.hi < 1e-9);
    }

    #[test]
    fn reverse_prop_linear_inversion() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let e = g.sum(0.0, vec![(1.0, x), (1.0, y)]);
        let bounds = [iv(0.0, 10.0), iv(0.0, 2.0)];
        let mut act = Vec::new();
        g.interval_eval_into(e, &bounds, &mut act);
        match g.reverse_prop(e, Interval::point(5.0), &bounds, &act) {
            PropOutcome::Tightenings(t) => {
                let tx = t.iter().find(|(i, _)| *i == 0).unwrap().1;
                assert!((tx.lo - 3.0).abs() < 1e-6 && (tx.hi - 5.0).abs() < 1e-6);
            }
            PropOutcome::Infeasible => panic!("feasible case"),
        }
    }

    #[test]
    fn reverse_prop_square() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let e = g.pow(x, 2.0);
        let bounds = [iv(0.0, 10.0)];
        let mut act = Vec::new();
        g.interval_eval_into(e, &bounds, &mut act);
        match g.reverse_prop(e, iv(4.0, 9.0), &bounds, &act) {
            PropOutcome::Tightenings(t) => {
                let tx = t[0].1;
                assert!(
                    (tx.lo - 2.0).abs() < 1e-6 && (tx.hi - 3.0).abs() < 1e-6,
                    "got {:?}",
                    tx
                );
            }
            PropOutcome::Infeasible => panic!("feasible case"),
        }
    }

    #[test]
    fn reverse_prop_exp() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let e = g.add(Op::Exp, vec![x]);
        let bounds = [iv(-5.0, 5.0)];
        let mut act = Vec::new();
        g.interval_eval_into(e, &bounds, &mut act);
        match g.reverse_prop(e, iv(1.0, std::f64::consts::E), &bounds, &act) {
            PropOutcome::Tightenings(t) => {
                let tx = t[0].1;
                assert!(tx.lo.abs() < 1e-6 && (tx.hi - 1.0).abs() < 1e-6);
            }
            PropOutcome::Infeasible => panic!("feasible case"),
        }
    }

    #[test]
    fn reverse_prop_infeasible_square() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let e = g.pow(x, 2.0);
        let bounds = [iv(-10.0, 10.0)];
        let mut act = Vec::new();
        g.interval_eval_into(e, &bounds, &mut act);
        assert!(matches!(
            g.reverse_prop(e, iv(-2.0, -1.0), &bounds, &act),
            PropOutcome::Infeasible
        ));
    }

    #[test]
    fn curvature_basics() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let e = g.add(Op::Exp, vec![x]);
        let l = g.add(Op::Log, vec![x]);
        let p = g.prod(1.0, vec![x, y]);
        let b = [iv(0.5, 2.0), iv(0.0, 1.0)];
        assert_eq!(g.curvature(e, &b), Curvature::Convex);
        assert_eq!(g.curvature(l, &b), Curvature::Concave);
        assert_eq!(g.curvature(p, &b), Curvature::Unknown);
    }

    #[test]
    fn monotonicity_paper_example() {
        // 2·x·y with y ≤ 0 is decreasing in x
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let e = g.prod(2.0, vec![x, y]);
        let b = [iv(0.0, 1.0), iv(-5.0, 0.0)];
        let mut act = Vec::new();
        g.interval_eval_into(e, &b, &mut act);
        assert_eq!(g.monotonicity(e, 0, &act), Monotonicity::Dec);
        let l = g.add(Op::Log, vec![x]);
        let mut act2 = Vec::new();
        g.interval_eval_into(l, &b, &mut act2);
        assert_eq!(g.monotonicity(l, 0, &act2), Monotonicity::Inc);
        let sq = g.pow(x, 2.0);
        let b2 = [iv(-1.0, 1.0), iv(-5.0, 0.0)];
        let mut act3 = Vec::new();
        g.interval_eval_into(sq, &b2, &mut act3);
        assert_eq!(g.monotonicity(sq, 0, &act3), Monotonicity::Unknown);
    }

    #[test]
    fn integrality_rules() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let vars = vec![
            Var {
                vartype: VarType::Integer,
                ..Var::continuous("x", 0.0, 10.0)
            },
            Var {
                vartype: VarType::Integer,
                ..Var::continuous("y", 0.0, 10.0)
            },
        ];
        let s = g.sum(0.0, vec![(1.0, x), (2.0, y)]);
        assert!(g.integrality(s, &vars));
        let h = g.sum(0.0, vec![(0.5, x)]);
        assert!(!g.integrality(h, &vars));
        let p = g.prod(1.0, vec![x, y]);
        assert!(g.integrality(p, &vars));
    }

    #[test]
    fn entropy_inversion_sound() {
        // entropy(x) ∈ [0.2, 0.3] on x ∈ [0, 1]
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let e = g.add(Op::Entropy, vec![x]);
        let bounds = [iv(0.0, 1.0)];
        let mut act = Vec::new();
        g.interval_eval_into(e, &bounds, &mut act);
        let t = iv(0.2, 0.3);
        match g.reverse_prop(e, t, &bounds, &act) {
            PropOutcome::Tightenings(ts) => {
                let tx = ts[0].1;
                // all x with entropy(x) in [0.2,0.3] must stay inside
                for i in 0..=1000 {
                    let xv = i as f64 / 1000.0;
                    let ev = if xv == 0.0 { 0.0 } else { -xv * xv.ln() };
                    if ev >= 0.2 && ev <= 0.3 {
                        assert!(
                            tx.contains(xv),
                            "excluded feasible {} (bounds {:?})",
                            xv,
                            tx
                        );
                    }
                }
            }
            PropOutcome::Infeasible => panic!("feasible case"),
        }
    }

    #[test]
    fn trig_inversion_sound() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let e = g.add(Op::Sin, vec![x]);
        let bounds = [iv(0.0, 3.0)];
        let mut act = Vec::new();
        g.interval_eval_into(e, &bounds, &mut act);
        let t = iv(0.9, 1.0);
        match g.reverse_prop(e, t, &bounds, &act) {
            PropOutcome::Tightenings(ts) => {
                let tx = ts[0].1;
                for i in 0..=3000 {
                    let xv = i as f64 / 1000.0;
                    if xv.sin() >= 0.9 {
                        assert!(tx.contains(xv), "excluded {} from {:?}", xv, tx);
                    }
                }
            }
            PropOutcome::Infeasible => panic!("feasible case"),
        }
    }
}
