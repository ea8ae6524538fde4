//! Extended-formulation construction: expression locks, the handler
//! detection loop, auxiliary-variable assignment, and inequality senses.
//!
//! Original constraints keep their full expression trees; handlers claiming
//! separation roles request auxiliary variables for subexpressions, which
//! become constraints of their own. The propagation view treats every
//! auxiliary relation as an equality (the exact lift), the relaxation view
//! uses the lock-derived sense.

use crate::expr::{ExprGraph, Monotonicity, NodeId, Op, Var, VarOrigin};
use crate::interval::Interval;
use crate::model::Problem;
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LockCount {
    pub down: u32,
    pub up: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConSense {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConOrigin {
    Original,
    Auxiliary,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoleSet {
    pub prop: bool,
    pub below: bool,
    pub above: bool,
}

impl RoleSet {
    pub fn all_for(sense: ConSense) -> RoleSet {
        RoleSet {
            prop: true,
            below: sense != ConSense::Ge,
            above: sense != ConSense::Le,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.prop && !self.below && !self.above
    }

    pub fn minus(&self, other: RoleSet) -> RoleSet {
        RoleSet {
            prop: self.prop && !other.prop,
            below: self.below && !other.below,
            above: self.above && !other.above,
        }
    }
}

/// Handler-specific structure computed at detection time.
#[derive(Clone, Debug)]
pub enum HandlerData {
    Plain,
    /// collected quadratic form with arguments reseated on columns
    Quad(crate::nlq::QuadForm),
    /// second-order cone over columns
    Soc(crate::soc::SocForm),
}

/// One successful detection: the roles the handler takes, its structure,
/// and whether the separation roles stay open for later handlers too
/// (co-separation on constraints whose relaxed form may not capture every
/// violation).
pub struct Detected {
    pub roles: RoleSet,
    pub data: HandlerData,
    pub shared: bool,
}

impl Detected {
    pub fn exclusive(roles: RoleSet, data: HandlerData) -> Detected {
        Detected {
            roles,
            data,
            shared: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Claim {
    pub handler: usize,
    pub roles: RoleSet,
    pub data: HandlerData,
}

#[derive(Clone, Debug)]
pub struct ExtCon {
    pub name: String,
    pub root: NodeId,
    pub sense: ConSense,
    /// Originals: the constraint sides. Auxiliary: the defining bounds given
    /// to the auxiliary variable at creation.
    pub sides: Interval,
    pub aux_var: Option<usize>,
    pub origin: ConOrigin,
    pub claims: Vec<Claim>,
}

impl ExtCon {
    pub fn handler_for(&self, pick: impl Fn(&RoleSet) -> bool) -> Option<&Claim> {
        self.claims.iter().find(|c| pick(&c.roles))
    }
}

pub struct ExtForm {
    pub graph: ExprGraph,
    pub vars: Vec<Var>,
    pub n_original_vars: usize,
    pub cons: Vec<ExtCon>,
    pub m_original: usize,
    pub node_aux: HashMap<NodeId, usize>,
    pub aux_node: HashMap<usize, NodeId>,
    pub var_locks: Vec<LockCount>,
    pub node_locks: HashMap<NodeId, LockCount>,
}

/// Journal of lock additions for one constraint, for exact unlocking.
#[derive(Clone, Debug, Default)]
pub struct LockJournal {
    entries: Vec<(NodeId, LockCount)>,
}

pub fn sense_for_aux(locks: LockCount) -> ConSense {
    if locks.down == 0 {
        ConSense::Le
    } else if locks.up == 0 {
        ConSense::Ge
    } else {
        ConSense::Eq
    }
}

pub fn sense_for_sides(lhs: f64, rhs: f64) -> ConSense {
    let lhs_finite = lhs > -crate::INF;
    let rhs_finite = rhs < crate::INF;
    match (lhs_finite, rhs_finite) {
        (true, false) => ConSense::Ge,
        (false, true) => ConSense::Le,
        _ => ConSense::Eq,
    }
}

/// Add locks implied by one constraint to per-node and per-variable counts,
/// walking monotonicity: increasing children copy the parent locks,
/// decreasing children swap them, unknown children receive both on both
/// sides. Returns a journal that `unlock` undoes exactly.
pub fn propagate_locks(
    graph: &ExprGraph,
    root: NodeId,
    lhs_finite: bool,
    rhs_finite: bool,
    act: &[Interval],
    node_locks: &mut HashMap<NodeId, LockCount>,
    var_locks: &mut [LockCount],
) -> LockJournal {
    let mut journal = LockJournal::default();
    let mut add: HashMap<NodeId, LockCount> = HashMap::new();
    add.insert(
        root,
        LockCount {
            down: lhs_finite as u32,
            up: rhs_finite as u32,
        },
    );
    for id in (0..=root).rev() {
        let a = match add.remove(&id) {
            Some(a) if a.down > 0 || a.up > 0 => a,
            _ => continue,
        };
        let e = node_locks.entry(id).or_default();
        e.down += a.down;
        e.up += a.up;
        journal.entries.push((id, a));
        let node = graph.node(id);
        if let Op::Var(i) = node.op {
            var_locks[i].down += a.down;
            var_locks[i].up += a.up;
            continue;
        }
        for j in 0..node.children.len() {
            let contrib = match graph.monotonicity(id, j, act) {
                Monotonicity::Inc => a,
                Monotonicity::Dec => LockCount {
                    down: a.up,
                    up: a.down,
                },
                Monotonicity::Const => continue,
                Monotonicity::Unknown => {
                    let b = a.down + a.up;
                    LockCount { down: b, up: b }
                }
            };
            let c = add.entry(node.children[j]).or_default();
            c.down += contrib.down;
            c.up += contrib.up;
        }
    }
    journal
}

/// Undo one `propagate_locks` call.
pub fn unlock(
    graph: &ExprGraph,
    journal: &LockJournal,
    node_locks: &mut HashMap<NodeId, LockCount>,
    var_locks: &mut [LockCount],
) {
    for &(id, a) in &journal.entries {
        if let Some(e) = node_locks.get_mut(&id) {
            e.down -= a.down;
            e.up -= a.up;
        }
        if let Op::Var(i) = graph.node(id).op {
            var_locks[i].down -= a.down;
            var_locks[i].up -= a.up;
        }
    }
}

// ----------------------------------------------------------------------
// handler interface and detection
// ----------------------------------------------------------------------

pub struct ExtBuilder {
    pub graph: ExprGraph,
    pub vars: Vec<Var>,
    pub n_original_vars: usize,
    pub cons: Vec<ExtCon>,
    pub node_aux: HashMap<NodeId, usize>,
    pub aux_node: HashMap<usize, NodeId>,
    pub node_locks: HashMap<NodeId, LockCount>,
    pub var_locks: Vec<LockCount>,
    /// forward activities of every node over the original variable bounds
    pub act: Vec<Interval>,
    pending: Vec<usize>,
}

impl ExtBuilder {
    /// Auxiliary variable standing for subexpression `e`, created on first
    /// request and shared afterwards. Creating one also appends the defining
    /// constraint and queues it for detection.
    pub fn aux_for(&mut self, e: NodeId) -> usize {
        if let Some(&w) = self.node_aux.get(&e) {
            return w;
        }
        let activity = self.act[e];
        let w = self.vars.len();
        let name = format!("_w{}", w - self.n_original_vars + 1);
        let mut v = Var::continuous(&name, activity.lo, activity.hi);
        v.origin = VarOrigin::Auxiliary;
        v.implied_integral = self.graph.integrality(e, &self.vars);
        self.vars.push(v);
        self.var_locks.push(self.node_locks.get(&e).copied().unwrap_or_default());
        self.node_aux.insert(e, w);
        self.aux_node.insert(w, e);
        let sense = sense_for_aux(self.node_locks.get(&e).copied().unwrap_or_default());
        let idx = self.cons.len();
        self.cons.push(ExtCon {
            name: name.clone(),
            root: e,
            sense,
            sides: activity,
            aux_var: Some(w),
            origin: ConOrigin::Auxiliary,
            claims: Vec::new(),
        });
        self.pending.push(idx);
        w
    }

    /// Fresh relaxation-only variable: a handler-owned column with no
    /// defining expression, referenced only by cut rows.
    pub fn relax_var(&mut self, stem: &str, lo: f64, hi: f64) -> usize {
        let w = self.vars.len();
        let name = format!("_{}{}", stem, w - self.n_original_vars + 1);
        let mut v = Var::continuous(&name, lo, hi);
        v.origin = VarOrigin::Relaxation;
        self.vars.push(v);
        self.var_locks.push(LockCount::default());
        w
    }

    pub fn activity_of(&self, e: NodeId) -> Interval {
        self.act[e]
    }

    pub fn locks_of(&self, e: NodeId) -> LockCount {
        self.node_locks.get(&e).copied().unwrap_or_default()
    }
}

pub trait NlHandler {
    fn name(&self) -> &'static str;

    /// Claim roles for constraint `con` of the builder; may request
    /// auxiliary variables through the builder. Returning NONE declines.
    fn detect(&self, b: &mut ExtBuilder, con: usize, remaining: RoleSet) -> Option<Detected>;
}

/// Fallback handler: estimates single operators over variable children,
/// requesting an auxiliary variable for every non-leaf child when it has to
/// separate; propagation walks the full tree and needs no auxiliaries.
pub struct DefaultHandler;

impl NlHandler for DefaultHandler {
    fn name(&self) -> &'static str {
        "default"
    }

    fn detect(&self, b: &mut ExtBuilder, con: usize, remaining: RoleSet) -> Option<Detected> {
        let root = b.cons[con].root;
        if remaining.below || remaining.above {
            let children = b.graph.node(root).children.clone();
            for ch in children {
                if !matches!(b.graph.node(ch).op, Op::Var(_) | Op::Val(_)) {
                    b.aux_for(ch);
                }
            }
        }
        Some(Detected::exclusive(remaining, HandlerData::Plain))
    }
}

pub struct Registry {
    pub handlers: Vec<Box<dyn NlHandler>>,
}

impl Registry {
    /// Only the fallback handler.
    pub fn default_only() -> Registry {
        Registry {
            handlers: vec![Box::new(DefaultHandler)],
        }
    }

    /// Structure handlers in precedence order, fallback last.
    pub fn standard() -> Registry {
        Registry {
            handlers: vec![
                Box::new(crate::soc::SocHandler),
                Box::new(crate::nlq::QuadHandler),
                Box::new(DefaultHandler),
            ],
        }
    }
}

/// Run lock computation and the detection loop over a problem. The
/// constraint expressions are canonicalized first, so handlers see
/// flattened sums, folded product coefficients, and collapsed powers.
pub fn build_extform(problem: &Problem, registry: &Registry) -> ExtForm {
    let mut graph = problem.graph.clone();
    let vars = problem.vars.clone();
    let n = vars.len();
    let roots: Vec<NodeId> = problem
        .constraints
        .iter()
        .map(|c| graph.simplify(c.root, &vars))
        .collect();
    let bounds: Vec<Interval> = vars.iter().map(|v| v.bounds()).collect();
    let mut act = Vec::new();
    if graph.len() > 0 {
        graph.interval_eval_into(graph.len() - 1, &bounds, &mut act);
    }
    let mut node_locks = HashMap::new();
    let mut var_locks = vec![LockCount::default(); n];
    for (c, &root) in problem.constraints.iter().zip(roots.iter()) {
        propagate_locks(
            &graph,
            root,
            c.lhs > -crate::INF,
            c.rhs < crate::INF,
            &act,
            &mut node_locks,
            &mut var_locks,
        );
    }
    let mut b = ExtBuilder {
        graph,
        vars,
        n_original_vars: n,
        cons: Vec::new(),
        node_aux: HashMap::new(),
        aux_node: HashMap::new(),
        node_locks,
        var_locks,
        act,
        pending: Vec::new(),
    };
    for (c, &root) in problem.constraints.iter().zip(roots.iter()) {
        let sense = sense_for_sides(c.lhs, c.rhs);
        let idx = b.cons.len();
        b.cons.push(ExtCon {
            name: c.name.clone(),
            root,
            sense,
            sides: Interval::new(c.lhs, c.rhs),
            aux_var: None,
            origin: ConOrigin::Original,
            claims: Vec::new(),
        });
        b.pending.push(idx);
    }
    let m_original = problem.constraints.len();
    // depth-first: newly created auxiliary constraints are processed before
    // returning to older queue entries
    while let Some(idx) = b.pending.pop() {
        let root = b.cons[idx].root;
        let mut remaining = RoleSet::all_for(b.cons[idx].sense);
        if matches!(b.graph.node(root).op, Op::Var(_) | Op::Val(_)) {
            // plain rows need no nonlinear handling
            b.cons[idx].claims.push(Claim {
                handler: registry.handlers.len() - 1,
                roles: remaining,
                data: HandlerData::Plain,
            });
            continue;
        }
        for (hidx, h) in registry.handlers.iter().enumerate() {
            if remaining.is_empty() {
                break;
            }
            if let Some(det) = h.detect(&mut b, idx, remaining) {
                let roles = RoleSet {
                    prop: det.roles.prop && remaining.prop,
                    below: det.roles.below && remaining.below,
                    above: det.roles.above && remaining.above,
                };
                if roles.is_empty() {
                    continue;
                }
                // a sharing claim leaves its separation roles on the table
                // so later handlers set up their own relaxation as well
                let consumed = if det.shared {
                    RoleSet {
                        prop: roles.prop,
                        below: false,
                        above: false,
                    }
                } else {
                    roles
                };
                remaining = remaining.minus(consumed);
                b.cons[idx].claims.push(Claim {
                    handler: hidx,
                    roles,
                    data: det.data,
                });
            }
        }
        debug_assert!(remaining.is_empty(), "default handler must claim the rest");
    }
    ExtForm {
        graph: b.graph,
        vars: b.vars,
        n_original_vars: b.n_original_vars,
        cons: b.cons,
        m_original,
        node_aux: b.node_aux,
        aux_node: b.aux_node,
        var_locks: b.var_locks,
        node_locks: b.node_locks,
    }
}

impl ExtForm {
    /// Value of a node with auxiliary read-through: descendants carrying an
    /// auxiliary variable read the point instead of recomputing, except the
    /// node itself.
    pub fn node_value(&self, root: NodeId, x: &[f64]) -> f64 {
        let mut memo: HashMap<NodeId, f64> = HashMap::new();
        self.node_value_memo(root, x, true, &mut memo)
    }

    fn node_value_memo(
        &self,
        id: NodeId,
        x: &[f64],
        is_root: bool,
        memo: &mut HashMap<NodeId, f64>,
    ) -> f64 {
        if !is_root {
            if let Some(&w) = self.node_aux.get(&id) {
                return x[w];
            }
            if let Some(&v) = memo.get(&id) {
                return v;
            }
        }
        let node = self.graph.node(id);
        let kids: Vec<f64> = node
            .children
            .iter()
            .map(|&c| self.node_value_memo(c, x, false, memo))
            .collect();
        let v = match &node.op {
            Op::Val(c) => *c,
            Op::Var(i) => x[*i],
            Op::Sum { constant, coefs } => {
                constant + coefs.iter().zip(&kids).map(|(c, v)| c * v).sum::<f64>()
            }
            Op::Prod { coef } => coef * kids.iter().product::<f64>(),
            Op::Pow { exponent } => {
                if exponent.fract() == 0.0 {
                    kids[0].powi(*exponent as i32)
                } else {
                    kids[0].max(0.0).powf(*exponent)
                }
            }
            Op::SignPow { exponent } => {
                if kids[0] == 0.0 {
                    0.0
                } else {
                    kids[0].signum() * kids[0].abs().powf(*exponent)
                }
            }
            Op::Exp => kids[0].exp(),
            Op::Log => {
                if kids[0] <= 0.0 {
                    -crate::INF
                } else {
                    kids[0].ln()
                }
            }
            Op::Entropy => {
                if kids[0] <= 0.0 {
                    0.0
                } else {
                    -kids[0] * kids[0].ln()
                }
            }
            Op::Sin => kids[0].sin(),
            Op::Cos => kids[0].cos(),
            Op::Abs => kids[0].abs(),
        };
        if !is_root {
            memo.insert(id, v);
        }
        v
    }

    /// Bounds of a node with auxiliary read-through against `bounds`, which
    /// covers original and auxiliary columns.
    pub fn node_bounds(&self, root: NodeId, bounds: &[Interval]) -> Interval {
        let mut memo: HashMap<NodeId, Interval> = HashMap::new();
        self.node_bounds_memo(root, bounds, true, &mut memo)
    }

    fn node_bounds_memo(
        &self,
        id: NodeId,
        bounds: &[Interval],
        is_root: bool,
        memo: &mut HashMap<NodeId, Interval>,
    ) -> Interval {
        if !is_root {
            if let Some(&w) = self.node_aux.get(&id) {
                return bounds[w];
            }
            if let Some(&v) = memo.get(&id) {
                return v;
            }
        }
        let node = self.graph.node(id);
        let mut act: HashMap<NodeId, Interval> = HashMap::new();
        for &c in &node.children {
            let b = self.node_bounds_memo(c, bounds, false, memo);
            act.insert(c, b);
        }
        // reuse the per-operator image through a dense scratch vector
        let mut scratch = vec![Interval::whole(); id + 1];
        for (&k, &v) in &act {
            scratch[k] = v;
        }
        let v = self.graph.node_activity(id, bounds, &scratch);
        if !is_root {
            memo.insert(id, v);
        }
        v
    }

    pub fn is_aux(&self, var: usize) -> bool {
        var >= self.n_original_vars
    }

    /// Text dump, one constraint per line.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for (i, c) in self.cons.iter().enumerate() {
            let body = crate::model::print_expr(&self.graph, &self.vars, c.root);
            let rel = match c.sense {
                ConSense::Le => "<=",
                ConSense::Ge => ">=",
                ConSense::Eq => "==",
            };
            let target = match c.aux_var {
                Some(w) => self.vars[w].name.clone(),
                None => format!("[{}, {}]", c.sides.lo, c.sides.hi),
            };
            let claims: Vec<String> = c
                .claims
                .iter()
                .map(|cl| {
                    let mut roles = String::new();
                    if cl.roles.prop {
                        roles.push('p');
                    }
                    if cl.roles.below {
                        roles.push('b');
                    }
                    if cl.roles.above {
                        roles.push('a');
                    }
                    format!("{}:{}", cl.handler, roles)
                })
                .collect();
            let _ = writeln!(
                out,
                "{} [{}]: {} {} {}  ({})",
                i,
                c.name,
                body,
                rel,
                target,
                claims.join(",")
            );
        }
        out
    }
}
