//! Feasibility-based bound tightening over the propagation view of the
//! extended formulation: forward activity passes, a breadth-first backward
//! queue, and the exact relaxation/acceptance tolerances.
//!
//! Backward-derived bounds on auxiliary relations are kept in a store of
//! their own; they reach forward passes only after resulting in a real
//! column bound change, which keeps propagation independent of incidental
//! evaluation order.

use crate::expr::{Op, Var};
use crate::extform::{ExtForm, HandlerData};
use crate::interval::Interval;
use crate::nlq::{quad_inteval, quad_reverseprop, QuadForm};
use std::collections::{HashMap, VecDeque};

const EPSILON: f64 = 1e-9;
const BOUNDSTREPS: f64 = 0.05;
const MAX_ROUNDS: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FbbtMode {
    Node,
    RedundancyCheck,
}

#[derive(Clone, Debug)]
pub enum FbbtOutcome {
    Infeasible { con: Option<usize> },
    Done(FbbtReport),
}

#[derive(Clone, Debug, Default)]
pub struct FbbtReport {
    pub bounds: Vec<Interval>,
    /// variables whose bounds changed, ascending, deduplicated
    pub tightened: Vec<usize>,
    pub rounds: u32,
    pub n_tightenings: u32,
    /// constraint indices whose activity lies inside the (relaxed) sides
    pub redundant: Vec<usize>,
    /// raw forward activities of the last pass, indexed by node
    pub activity: Vec<Interval>,
}

/// Outward relaxation applied to variable bounds on entering a forward
/// pass: 1e-9·max(1,|b|), capped at 1e-3 of the domain width, skipping
/// integer variables, and never crossing the next integer value.
pub fn relax_input_bounds(bounds: &[Interval], vars: &[Var]) -> Vec<Interval> {
    bounds
        .iter()
        .zip(vars)
        .map(|(b, v)| {
            if b.is_empty() || integralish(v) {
                return *b;
            }
            let width = b.width();
            let lo = if b.lo <= -crate::INF {
                b.lo
            } else {
                let d = (EPSILON * b.lo.abs().max(1.0)).min(1e-3 * width);
                let next = if b.lo.fract() == 0.0 { b.lo - 1.0 } else { b.lo.floor() };
                (b.lo - d).max(next)
            };
            let hi = if b.hi >= crate::INF {
                b.hi
            } else {
                let d = (EPSILON * b.hi.abs().max(1.0)).min(1e-3 * width);
                let next = if b.hi.fract() == 0.0 { b.hi + 1.0 } else { b.hi.ceil() };
                (b.hi + d).min(next)
            };
            Interval::new(lo, hi)
        })
        .collect()
}

fn relax_by(bounds: &[Interval], amount: f64) -> Vec<Interval> {
    bounds
        .iter()
        .map(|b| {
            if b.is_empty() || b.width() == 0.0 {
                *b
            } else {
                let lo = if b.lo <= -crate::INF { b.lo } else { b.lo - amount };
                let hi = if b.hi >= crate::INF { b.hi } else { b.hi + amount };
                Interval::new(lo, hi)
            }
        })
        .collect()
}

fn integralish(v: &Var) -> bool {
    v.is_integral() || v.implied_integral
}

fn round_inward(iv: Interval) -> Interval {
    if iv.is_empty() {
        return iv;
    }
    let lo = if iv.lo <= -crate::INF {
        iv.lo
    } else {
        (iv.lo - EPSILON).ceil()
    };
    let hi = if iv.hi >= crate::INF {
        iv.hi
    } else {
        (iv.hi + EPSILON).floor()
    };
    Interval::new(lo, hi)
}

/// gap between two disjoint intervals (0 if they intersect)
fn gap(a: Interval, b: Interval) -> f64 {
    if a.lo > b.hi {
        a.lo - b.hi
    } else if b.lo > a.hi {
        b.lo - a.hi
    } else {
        0.0
    }
}

struct Engine<'a> {
    ext: &'a ExtForm,
    cur: Vec<Interval>,
    /// forward store: activity ∩ column bounds at auxiliary nodes
    eff: Vec<Interval>,
    /// raw activities (pure operator composition)
    raw: Vec<Interval>,
    /// backward store: tightenings on auxiliary relations, isolated from eff
    back: HashMap<usize, Interval>,
    /// the relaxed variable bounds of the running pass, for handler reads
    relaxed: Vec<Interval>,
    /// collected quadratic forms claiming propagation, by root node / by
    /// constraint
    quad_root: HashMap<usize, &'a QuadForm>,
    quad_con: HashMap<usize, &'a QuadForm>,
    reachable: Vec<bool>,
    filter: bool,
    harvest: bool,
    tighten_log: HashMap<usize, Interval>,
    n_tightenings: u32,
    original_changed: bool,
}

enum Applied {
    Changed,
    NoChange,
    Infeasible,
}

impl<'a> Engine<'a> {
    fn new(ext: &'a ExtForm, bounds: &[Interval], filter: bool, harvest: bool) -> Engine<'a> {
        let n_nodes = ext.graph.len();
        let mut reachable = vec![false; n_nodes];
        for c in &ext.cons {
            for (id, r) in ext.graph.reachable(c.root).into_iter().enumerate() {
                if r {
                    reachable[id] = true;
                }
            }
        }
        let mut quad_root: HashMap<usize, &'a QuadForm> = HashMap::new();
        let mut quad_con: HashMap<usize, &'a QuadForm> = HashMap::new();
        for (ci, c) in ext.cons.iter().enumerate() {
            if let Some(claim) = c.handler_for(|r| r.prop) {
                if let HandlerData::Quad(q) = &claim.data {
                    quad_root.insert(c.root, q);
                    quad_con.insert(ci, q);
                }
            }
        }
        Engine {
            ext,
            cur: bounds.to_vec(),
            eff: vec![Interval::whole(); n_nodes],
            raw: vec![Interval::whole(); n_nodes],
            back: HashMap::new(),
            relaxed: Vec::new(),
            quad_root,
            quad_con,
            reachable,
            filter,
            harvest,
            tighten_log: HashMap::new(),
            n_tightenings: 0,
            original_changed: false,
        }
    }

    /// Forward pass over the whole graph with auxiliary read-through.
    /// Returns false on proven infeasibility.
    fn forward(&mut self, relaxed: &[Interval]) -> bool {
        self.back.clear();
        self.relaxed.clear();
        self.relaxed.extend_from_slice(relaxed);
        for id in 0..self.ext.graph.len() {
            if !self.reachable[id] {
                continue;
            }
            let mut a = self.ext.graph.node_activity(id, relaxed, &self.eff);
            if let Some(q) = self.quad_root.get(&id).copied() {
                // handler activity reads the same stores the walk does:
                // relaxed columns for variables, fresh pass values for
                // auxiliary arguments; both enclose the image, so an empty
                // intersection can only be rounding noise — drop the
                // refinement rather than manufacture infeasibility
                let h = quad_inteval(q, &arg_bounds(self.ext, relaxed, &self.eff));
                let both = a.intersect(&h);
                if !both.is_empty() {
                    a = both;
                }
            }
            self.raw[id] = a;
            self.eff[id] = a;
            if a.is_empty() {
                return false;
            }
            if let Some(&w) = self.ext.node_aux.get(&id) {
                let col = relaxed[w];
                let isect = a.intersect(&col);
                if isect.is_empty() {
                    // numerically touching: fix the column to the nearest
                    // bound instead of declaring the subproblem infeasible
                    if gap(a, col) < EPSILON {
                        let fix = if a.lo > col.hi { col.hi } else { col.lo };
                        self.set_bound(w, Interval::point(fix));
                        self.eff[id] = Interval::point(fix);
                    } else {
                        return false;
                    }
                } else {
                    self.eff[id] = isect;
                }
            }
        }
        true
    }

    fn set_bound(&mut self, var: usize, iv: Interval) {
        if iv.lo > self.cur[var].lo || iv.hi < self.cur[var].hi {
            self.cur[var] = iv.intersect(&self.cur[var]);
            self.tighten_log.insert(var, self.cur[var]);
            self.n_tightenings += 1;
            if var < self.ext.n_original_vars {
                self.original_changed = true;
            }
        }
    }

    /// Per-side acceptance: fixing, ≥5% of the old width, a previously
    /// infinite bound turning finite, or a bound moving to/through zero.
    fn accept_lower(&self, old: Interval, new_lo: f64) -> bool {
        if !self.filter {
            return true;
        }
        if old.lo <= -crate::INF {
            return new_lo > -crate::INF;
        }
        // zero comparison at tolerance: a side relaxed by epsilon still
        // counts as landing on zero
        if old.lo < -EPSILON && new_lo >= -EPSILON {
            return true;
        }
        new_lo - old.lo >= BOUNDSTREPS * old.width()
    }

    fn accept_upper(&self, old: Interval, new_hi: f64) -> bool {
        if !self.filter {
            return true;
        }
        if old.hi >= crate::INF {
            return new_hi < crate::INF;
        }
        if old.hi > EPSILON && new_hi <= EPSILON {
            return true;
        }
        old.hi - new_hi >= BOUNDSTREPS * old.width()
    }

    /// Intersect, handle near-empty fixing, round integral domains inward,
    /// and apply the acceptance test per side against `old`.
    fn filtered_update(
        &mut self,
        old: Interval,
        implied: Interval,
        integral: bool,
    ) -> (Interval, Applied) {
        let mut new = implied.intersect(&old);
        if new.is_empty() {
            if gap(implied, old) < EPSILON {
                let fix = if implied.lo > old.hi { old.hi } else { old.lo };
                return (Interval::point(fix), Applied::Changed);
            }
            return (old, Applied::Infeasible);
        }
        if integral {
            new = round_inward(new);
            if new.is_empty() {
                return (old, Applied::Infeasible);
            }
        }
        if new.width() == 0.0 && old.width() > 0.0 {
            return (new, Applied::Changed);
        }
        let lo = if new.lo > old.lo && self.accept_lower(old, new.lo) {
            new.lo
        } else {
            old.lo
        };
        let hi = if new.hi < old.hi && self.accept_upper(old, new.hi) {
            new.hi
        } else {
            old.hi
        };
        if lo > old.lo || hi < old.hi {
            (Interval::new(lo, hi), Applied::Changed)
        } else {
            (old, Applied::NoChange)
        }
    }

    fn apply_var(&mut self, i: usize, implied: Interval) -> Result<(), ()> {
        let old = self.cur[i];
        let (new, applied) = self.filtered_update(old, implied, integralish(&self.ext.vars[i]));
        match applied {
            Applied::Infeasible => Err(()),
            Applied::NoChange => Ok(()),
            Applied::Changed => {
                self.set_bound(i, new);
                Ok(())
            }
        }
    }

    /// Tightening of the interval attached to an auxiliary relation:
    /// update the backward store, the real column bounds, and requeue the
    /// defining relation when the progress is sufficient.
    fn apply_aux(
        &mut self,
        node: usize,
        implied: Interval,
        queue: &mut VecDeque<(usize, Interval)>,
        con_of_node: &HashMap<usize, usize>,
    ) -> Result<(), ()> {
        let w = self.ext.node_aux[&node];
        let cur_known = self.back.get(&node).copied().unwrap_or(self.eff[node]);
        let integral = integralish(&self.ext.vars[w]);
        let (new, applied) = self.filtered_update(cur_known, implied, integral);
        match applied {
            Applied::Infeasible => Err(()),
            Applied::NoChange => Ok(()),
            Applied::Changed => {
                self.back.insert(node, new);
                // the real column follows; it is only read again at the
                // start of the next forward pass
                let col = self.cur[w].intersect(&new);
                if col.is_empty() {
                    return Err(());
                }
                self.set_bound(w, col);
                if let Some(&ci) = con_of_node.get(&node) {
                    queue.push_back((ci, new));
                }
                Ok(())
            }
        }
    }

    /// Backward step for a relation whose propagation was claimed by a
    /// collected quadratic form: one solve per argument, applied straight
    /// to the argument columns.
    fn quad_reverse(
        &mut self,
        q: &QuadForm,
        target: Interval,
        queue: &mut VecDeque<(usize, Interval)>,
        con_of_node: &HashMap<usize, usize>,
    ) -> Result<(), ()> {
        let tights = match quad_reverseprop(
            q,
            target,
            &arg_bounds(self.ext, &self.relaxed, &self.eff),
        ) {
            Some(t) => t,
            None => return Err(()),
        };
        for (col, implied) in tights {
            if col < self.ext.n_original_vars {
                self.apply_var(col, implied)?;
            } else {
                let node = self.ext.aux_node[&col];
                self.apply_aux(node, implied, queue, con_of_node)?;
            }
        }
        Ok(())
    }

    /// Reverse walk of one relation against `target`, merging per-node
    /// targets so shared subexpressions are processed once.
    fn reverse_walk(
        &mut self,
        ci: usize,
        target: Interval,
        queue: &mut VecDeque<(usize, Interval)>,
        con_of_node: &HashMap<usize, usize>,
    ) -> Result<(), ()> {
        if let Some(q) = self.quad_con.get(&ci).copied() {
            return self.quad_reverse(q, target, queue, con_of_node);
        }
        let root = self.ext.cons[ci].root;
        let mut node_target: HashMap<usize, Interval> = HashMap::new();
        node_target.insert(root, target);
        for id in (0..=root).rev() {
            let t = match node_target.remove(&id) {
                Some(t) => t,
                None => continue,
            };
            let node = self.ext.graph.node(id);
            let op = node.op.clone();
            match op {
                Op::Val(c) => {
                    if c < t.lo - EPSILON * (1.0 + c.abs()) || c > t.hi + EPSILON * (1.0 + c.abs()) {
                        return Err(());
                    }
                }
                Op::Var(i) => self.apply_var(i, t)?,
                _ => {
                    let children = node.children.clone();
                    for (j, &ch) in children.iter().enumerate() {
                        let mut implied = self.ext.graph.invert_child(id, j, t, &self.eff);
                        if self.harvest {
                            implied = harvest_domain(&op, implied);
                        }
                        let ch_op = self.ext.graph.node(ch).op.clone();
                        match ch_op {
                            Op::Var(i) => self.apply_var(i, implied)?,
                            Op::Val(c) => {
                                if c < implied.lo - EPSILON * (1.0 + c.abs())
                                    || c > implied.hi + EPSILON * (1.0 + c.abs())
                                {
                                    return Err(());
                                }
                            }
                            _ => {
                                if self.ext.node_aux.contains_key(&ch) {
                                    self.apply_aux(ch, implied, queue, con_of_node)?;
                                } else {
                                    let refined = implied.intersect(&self.eff[ch]);
                                    if refined.is_empty() {
                                        return Err(());
                                    }
                                    if refined.lo > self.eff[ch].lo || refined.hi < self.eff[ch].hi
                                    {
                                        let merged = match node_target.get(&ch) {
                                            Some(prev) => prev.intersect(&refined),
                                            None => refined,
                                        };
                                        if merged.is_empty() {
                                            return Err(());
                                        }
                                        node_target.insert(ch, merged);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bounds of one handler argument column as seen inside a pass: variables
/// read the relaxed inputs, auxiliary columns read the forward store of
/// their defining node (activity ∩ column), matching what the generic walk
/// reads through `node_activity`.
fn arg_bounds<'b>(
    ext: &'b ExtForm,
    relaxed: &'b [Interval],
    eff: &'b [Interval],
) -> impl Fn(usize) -> Interval + 'b {
    move |col| {
        if col < ext.n_original_vars {
            relaxed[col]
        } else {
            eff[ext.aux_node[&col]]
        }
    }
}

/// Domain bounds implied by an operator on its argument, used when
/// harvesting implied auxiliary bounds: arguments of log and of negative
/// fractional powers are positive (a tiny positive lower bound stands in
/// for the open domain), fractional powers and entropy need nonnegative
/// arguments.
fn harvest_domain(op: &Op, implied: Interval) -> Interval {
    let strict_pos = |iv: Interval| {
        Interval::new(iv.lo.max(f64::MIN_POSITIVE), iv.hi)
    };
    let nonneg = |iv: Interval| Interval::new(iv.lo.max(0.0), iv.hi);
    match op {
        Op::Log => strict_pos(implied),
        Op::Entropy => nonneg(implied),
        Op::Pow { exponent } if exponent.fract() != 0.0 => {
            if *exponent < 0.0 {
                strict_pos(implied)
            } else {
                nonneg(implied)
            }
        }
        _ => implied,
    }
}

fn con_sides_relaxed(ext: &ExtForm, ci: usize, cur: &[Interval], amount: f64) -> Interval {
    let c = &ext.cons[ci];
    let sides = match c.aux_var {
        Some(w) => cur[w],
        None => c.sides,
    };
    let lo = if sides.lo <= -crate::INF { sides.lo } else { sides.lo - amount };
    let hi = if sides.hi >= crate::INF { sides.hi } else { sides.hi + amount };
    Interval::new(lo, hi)
}

fn run(
    ext: &ExtForm,
    bounds: &[Interval],
    mode: FbbtMode,
    feastol: f64,
    filter: bool,
    harvest: bool,
    queue_all: bool,
    forward_only: bool,
) -> FbbtOutcome {
    for b in bounds {
        if b.is_empty() {
            return FbbtOutcome::Infeasible { con: None };
        }
    }
    let mut eng = Engine::new(ext, bounds, filter, harvest);
    let side_relax = match mode {
        FbbtMode::Node => EPSILON,
        FbbtMode::RedundancyCheck => feastol,
    };
    let mut redundant = Vec::new();
    let mut rounds = 0;
    let con_of_node: HashMap<usize, usize> = ext
        .cons
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.aux_var.map(|_| (c.root, i)))
        .collect();
    loop {
        rounds += 1;
        let relaxed = match mode {
            FbbtMode::Node => relax_input_bounds(&eng.cur, &ext.vars),
            FbbtMode::RedundancyCheck => relax_by(&eng.cur, feastol),
        };
        if !eng.forward(&relaxed) {
            return FbbtOutcome::Infeasible { con: None };
        }
        // seed the backward queue
        let mut queue: VecDeque<(usize, Interval)> = VecDeque::new();
        redundant.clear();
        for ci in 0..ext.cons.len() {
            let a = eng.raw[ext.cons[ci].root];
            let sides = con_sides_relaxed(ext, ci, &eng.cur, side_relax);
            let isect = a.intersect(&sides);
            if isect.is_empty() {
                if gap(a, sides) < EPSILON {
                    // touching at tolerance: treat as tight, not infeasible
                    let fix = if a.lo > sides.hi { sides.hi } else { sides.lo };
                    if !forward_only {
                        queue.push_back((ci, Interval::point(fix)));
                    }
                    continue;
                }
                return FbbtOutcome::Infeasible { con: Some(ci) };
            }
            if a.lo >= sides.lo && a.hi <= sides.hi {
                if ci < ext.m_original {
                    redundant.push(ci);
                }
                if !queue_all {
                    continue;
                }
            }
            if !forward_only {
                queue.push_back((ci, isect));
            }
        }
        // breadth-first backward pass
        let mut steps = 0usize;
        let step_cap = 50 * (ext.cons.len() + 1);
        eng.original_changed = false;
        while let Some((ci, target)) = queue.pop_front() {
            steps += 1;
            if steps > step_cap {
                break;
            }
            if eng
                .reverse_walk(ci, target, &mut queue, &con_of_node)
                .is_err()
            {
                return FbbtOutcome::Infeasible { con: Some(ci) };
            }
        }
        if forward_only || !eng.original_changed || rounds >= MAX_ROUNDS {
            break;
        }
    }
    let mut tightened: Vec<usize> = eng.tighten_log.keys().copied().collect();
    tightened.sort_unstable();
    FbbtOutcome::Done(FbbtReport {
        bounds: eng.cur,
        tightened,
        rounds,
        n_tightenings: eng.n_tightenings,
        redundant,
        activity: eng.raw,
    })
}

/// Feasibility-based bound tightening. `Node` mode applies the standard
/// input relaxation and the sufficient-progress filter; `RedundancyCheck`
/// relaxes unfixed variables and sides by `feastol` and runs a forward
/// pass only, reporting which constraints are redundant.
pub fn fbbt(ext: &ExtForm, bounds: &[Interval], mode: FbbtMode, feastol: f64) -> FbbtOutcome {
    match mode {
        FbbtMode::Node => run(ext, bounds, mode, feastol, true, false, false, false),
        FbbtMode::RedundancyCheck => run(ext, bounds, mode, feastol, false, false, false, true),
    }
}

/// Root propagation run once after the extended formulation is built:
/// every relation is reverse-propagated, no progress filter is applied,
/// and operator domains are harvested onto auxiliary columns (for example
/// a positive lower bound for arguments of log). Returns false when the
/// problem is proven infeasible.
pub fn initsolve_propagate(ext: &ExtForm, bounds: &mut Vec<Interval>) -> bool {
    match run(ext, bounds, FbbtMode::Node, 1e-6, false, true, true, false) {
        FbbtOutcome::Infeasible { .. } => false,
        FbbtOutcome::Done(rep) => {
            *bounds = rep.bounds;
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extform::{build_extform, Registry};
    use crate::model::parse_model;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn setup(text: &str) -> (crate::model::Problem, ExtForm, Vec<Interval>) {
        let p = parse_model(text).unwrap();
        let ext = build_extform(&p, &Registry::default_only());
        let bounds: Vec<Interval> = ext.vars.iter().map(|v| v.bounds()).collect();
        (p, ext, bounds)
    }

    fn run_node(text: &str) -> FbbtOutcome {
        let (_, ext, bounds) = setup(text);
        fbbt(&ext, &bounds, FbbtMode::Node, 1e-6)
    }

    fn report(o: FbbtOutcome) -> FbbtReport {
        match o {
            FbbtOutcome::Done(r) => r,
            FbbtOutcome::Infeasible { con } => panic!("unexpected infeasibility ({:?})", con),
        }
    }

    #[test]
    fn relax_rules_pinned() {
        let mut int_var = Var::continuous("b", 0.0, 3.0);
        int_var.vartype = crate::expr::VarType::Integer;
        let vars = vec![
            Var::continuous("a", -5.0, 5.0),
            int_var,
            Var::continuous("c", 1e6, 1e6 + 1e-2),
        ];
        let bounds: Vec<Interval> = vars.iter().map(|v| v.bounds()).collect();
        let r = relax_input_bounds(&bounds, &vars);
        // |b| = 5, width 10: relax by 5e-9
        assert!((r[0].hi - (5.0 + 5e-9)).abs() < 1e-15);
        assert!((r[0].lo - (-5.0 - 5e-9)).abs() < 1e-15);
        // integer bounds untouched
        assert_eq!(r[1].lo, 0.0);
        assert_eq!(r[1].hi, 3.0);
        // large bound, small width: capped at 1e-3 × width = 1e-5
        assert!((r[2].lo - (1e6 - 1e-5)).abs() < 1e-9);
    }

    #[test]
    fn relax_stops_at_next_integer() {
        let vars = vec![Var::continuous("x", 1e-10, 50.0)];
        let bounds = vec![Interval::new(1e-10, 50.0)];
        let r = relax_input_bounds(&bounds, &vars);
        // relaxing the tiny positive lower bound must not cross zero
        assert_eq!(r[0].lo, 0.0);
    }

    #[test]
    fn linear_equality_tightens_partner() {
        let rep = report(run_node(
            "var x continuous [0, 10]\nvar y continuous [0, 2]\ncon c: x + y == 5\nminimize\n",
        ));
        assert!((rep.bounds[0].lo - 3.0).abs() < 1e-6, "{:?}", rep.bounds[0]);
        assert!((rep.bounds[0].hi - 5.0).abs() < 1e-6);
    }

    #[test]
    fn exp_constraint_not_infeasible() {
        let rep = report(run_node(
            "var x continuous [-10, 10]\ncon c: exp(x) <= 0.5\nminimize\n",
        ));
        let target = 0.5f64.ln();
        assert!(rep.bounds[0].hi >= target && rep.bounds[0].hi <= target + 1e-6);
        assert_eq!(rep.bounds[0].lo, -10.0);
    }

    #[test]
    fn square_below_negative_is_infeasible() {
        let out = run_node("var x continuous [-10, 10]\ncon c: x^2 <= -1\nminimize\n");
        assert!(matches!(out, FbbtOutcome::Infeasible { .. }));
    }

    #[test]
    fn small_gain_is_filtered_out() {
        // 2% improvement: rejected by the sufficient-progress rule
        let rep = report(run_node(
            "var x continuous [0, 10]\ncon c: x <= 9.8\nminimize\n",
        ));
        assert_eq!(rep.bounds[0].hi, 10.0);
        assert!(rep.tightened.is_empty());
    }

    #[test]
    fn move_to_zero_beats_filter() {
        // 4.8% improvement but the bound lands on zero: accepted
        let rep = report(run_node(
            "var x continuous [-0.5, 10]\ncon c: x >= 0\nminimize\n",
        ));
        assert!(rep.bounds[0].lo >= -1e-9 && rep.bounds[0].lo <= 0.0);
        // same magnitude without the sign change: rejected
        let rep = report(run_node(
            "var x continuous [-0.5, 10]\ncon c: x >= -0.2\nminimize\n",
        ));
        assert_eq!(rep.bounds[0].lo, -0.5);
    }

    #[test]
    fn integral_bounds_round_inward() {
        let rep = report(run_node(
            "var x integer [0, 10]\ncon c: 2*x >= 3.1\nminimize\n",
        ));
        assert_eq!(rep.bounds[0].lo, 2.0);
    }

    #[test]
    fn near_miss_fixes_instead_of_infeasible() {
        let rep = report(run_node(
            "var x continuous [0, 1]\ncon c: x >= 1.0000000015\nminimize\n",
        ));
        assert_eq!(rep.bounds[0].lo, 1.0);
        assert_eq!(rep.bounds[0].hi, 1.0);
        let out = run_node("var x continuous [0, 1]\ncon c: x >= 1.1\nminimize\n");
        assert!(matches!(out, FbbtOutcome::Infeasible { .. }));
    }

    #[test]
    fn aux_column_bounds_flow_back_to_originals() {
        let (_p, ext, mut bounds) = setup(
            "var x continuous [0, 1]\nvar y continuous [-1, 1]\n\
             con c: exp(x + y^2) <= 3\nminimize\n",
        );
        // find the column standing for y² and pretend branching tightened it
        let w = ext
            .cons
            .iter()
            .find_map(|c| {
                if matches!(ext.graph.node(c.root).op, Op::Pow { .. }) {
                    c.aux_var
                } else {
                    None
                }
            })
            .unwrap();
        bounds[w] = Interval::new(0.0, 0.25);
        let rep = report(fbbt(&ext, &bounds, FbbtMode::Node, 1e-6));
        assert!(rep.bounds[1].lo >= -0.5 - 1e-6 && rep.bounds[1].lo < -0.499);
        assert!(rep.bounds[1].hi <= 0.5 + 1e-6 && rep.bounds[1].hi > 0.499);
    }

    #[test]
    fn initsolve_implies_positive_log_argument() {
        let (_p, ext, mut bounds) = setup(
            "var x continuous [-1, 1]\nvar y continuous [-1, 1]\n\
             con c: log(x*y) <= 0.5\nminimize\n",
        );
        let w = ext.cons.iter().find_map(|c| c.aux_var).unwrap();
        assert!(initsolve_propagate(&ext, &mut bounds));
        assert!(bounds[w].lo > 0.0, "positive implied bound, got {:?}", bounds[w]);
        assert!(bounds[w].lo <= 1e-300, "tiny, got {:?}", bounds[w]);
        // exp(0.5) ≥ image upper bound from the side
        assert!(bounds[w].hi <= 0.5f64.exp() + 1e-9);
        // original variables cannot be tightened by a positive product
        assert_eq!(bounds[0], Interval::new(-1.0, 1.0));
    }

    #[test]
    fn initsolve_nonnegative_sqrt_argument() {
        let (_p, ext, mut bounds) = setup(
            "var x continuous [-1, 1]\nvar y continuous [-1, 1]\n\
             con c: sqrt(x + y) <= 2\nminimize\n",
        );
        let w = ext.cons.iter().find_map(|c| c.aux_var).unwrap();
        assert!(initsolve_propagate(&ext, &mut bounds));
        assert!(bounds[w].lo >= 0.0);
        assert!(bounds[w].hi <= 2.0 + 1e-9);
    }

    #[test]
    fn initsolve_keeps_existing_tighter_bounds() {
        let (_p, ext, mut bounds) = setup(
            "var x continuous [0.5, 1]\nvar y continuous [0.5, 1]\n\
             con c: log(x*y) <= 0.5\nminimize\n",
        );
        let w = ext.cons.iter().find_map(|c| c.aux_var).unwrap();
        let before = bounds[w];
        assert!(before.lo >= 0.25 - 1e-9);
        assert!(initsolve_propagate(&ext, &mut bounds));
        assert!(bounds[w].lo >= before.lo);
    }

    #[test]
    fn redundancy_check_classifies() {
        let (_p, ext, bounds) = setup(
            "var x continuous [0, 1]\nvar y continuous [0, 1]\n\
             con wide: x + y <= 10\ncon tight: x + y <= 1.5\ncon edge: x + y <= 2\nminimize\n",
        );
        let rep = report(fbbt(&ext, &bounds, FbbtMode::RedundancyCheck, 1e-6));
        assert!(rep.redundant.contains(&0), "clearly slack constraint");
        assert!(!rep.redundant.contains(&1), "cuts into the box");
        // at the edge: a feastol-perturbed point violates it, so it stays
        assert!(!rep.redundant.contains(&2));
    }

    #[test]
    fn redundant_never_violated_by_perturbed_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let feastol = 1e-6;
        let models = [
            "var x continuous [0, 1]\nvar y continuous [0, 1]\n\
             con a: x*y <= 1.1\ncon b: exp(x) + y <= 4\ncon c: x + y >= -0.5\nminimize\n",
            "var x continuous [-1, 1]\nvar y continuous [-1, 1]\n\
             con a: x^2 + y^2 <= 2.5\ncon b: x^2 + y^2 <= 1\nminimize\n",
        ];
        for text in models {
            let (p, ext, bounds) = setup(text);
            let rep = report(fbbt(&ext, &bounds, FbbtMode::RedundancyCheck, feastol));
            for &ci in &rep.redundant {
                let c = &p.constraints[ci];
                for _ in 0..1000 {
                    let x: Vec<f64> = p
                        .vars
                        .iter()
                        .map(|v| rng.gen_range(v.lb - feastol..=v.ub + feastol))
                        .collect();
                    let v = p.graph.eval_tol(c.root, &x, feastol).unwrap();
                    assert!(
                        v >= c.lhs - feastol && v <= c.rhs + feastol,
                        "constraint {} marked redundant but violated at {:?}: {}",
                        c.name,
                        x,
                        v
                    );
                }
            }
        }
    }

    #[test]
    fn feasible_samples_never_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let models = [
            "var x continuous [-1, 1]\nvar y continuous [-1, 1]\n\
             con a: x*y + y^2 <= 0.5\ncon b: exp(x) + y >= 0.2\nminimize\n",
            "var x continuous [0.1, 2]\nvar y continuous [0.1, 2]\n\
             con a: log(x) + x*y <= 1\ncon b: x + y >= 0.5\nminimize\n",
            "var x continuous [-2, 2]\nvar y continuous [-2, 2]\n\
             con a: x^2 + y^2 <= 1\nminimize\n",
        ];
        for text in models {
            let (p, ext, bounds) = setup(text);
            let rep = report(fbbt(&ext, &bounds, FbbtMode::Node, 1e-6));
            assert!(rep.rounds <= MAX_ROUNDS);
            let mut kept = 0;
            for _ in 0..1000 {
                let x: Vec<f64> = p
                    .vars
                    .iter()
                    .map(|v| rng.gen_range(v.lb..=v.ub))
                    .collect();
                let feasible = p.constraints.iter().all(|c| {
                    match p.graph.eval(c.root, &x) {
                        Ok(v) => v >= c.lhs - 1e-9 && v <= c.rhs + 1e-9,
                        Err(_) => false,
                    }
                });
                if !feasible {
                    continue;
                }
                kept += 1;
                for (i, xi) in x.iter().enumerate() {
                    assert!(
                        *xi >= rep.bounds[i].lo - 1e-9 && *xi <= rep.bounds[i].hi + 1e-9,
                        "feasible sample excluded: x[{}]={} outside {:?}",
                        i,
                        xi,
                        rep.bounds[i]
                    );
                }
            }
            assert!(kept > 0, "test instance has no sampled feasible points");
        }
    }

    #[test]
    fn equality_circle_tightens_to_unit_box() {
        let rep = report(run_node(
            "var x continuous [-2, 2]\nvar y continuous [-2, 2]\ncon a: x^2 + y^2 == 1\nminimize\n",
        ));
        for b in &rep.bounds[..2] {
            assert!(b.lo >= -1.0 - 1e-6 && b.hi <= 1.0 + 1e-6, "{:?}", b);
        }
    }

    #[test]
    fn rounds_capped() {
        // chain of halvings wants many rounds; the cap keeps it finite
        let rep = report(run_node(
            "var a continuous [0, 100]\nvar b continuous [0, 100]\n\
             var c continuous [0, 100]\nvar d continuous [0, 100]\n\
             con c1: a - 0.5*b <= 0\ncon c2: b - 0.5*c <= 0\ncon c3: c - 0.5*d <= 0\n\
             con c4: d <= 1\nminimize\n",
        ));
        assert!(rep.rounds <= MAX_ROUNDS);
        assert!(rep.bounds[0].hi <= 0.2, "chain should contract: {:?}", rep.bounds[0]);
    }
}
