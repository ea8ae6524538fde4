//! Quadratic structure recognition and dependency-aware interval
//! propagation.
//!
//! A sum whose terms include squares or two-factor products is collected
//! into q(y) = Σ_i (a_i·y_i² + c_i·y_i + Σ_{j∈P_i} b_{i,j}·y_i·y_j) + const,
//! where each argument y_i is a variable or a subexpression. Ranging each
//! collected term as a univariate quadratic in its argument (partners
//! replaced by their bounds) avoids the overestimate a termwise walk incurs
//! when an argument appears several times, and backward propagation can
//! solve the matching univariate quadratic interval equations directly.

use crate::expr::{ExprGraph, NodeId, Op};
use crate::extform::{Detected, ExtBuilder, HandlerData, NlHandler, RoleSet};
use crate::interval::{solve_univariate_quadratic, Interval};
use crate::INF;
use std::collections::{BTreeMap, BTreeSet};

/// One argument of a quadratic form. `arg` identifies the argument: node
/// ids at detection time, columns of the extended formulation once claimed.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadTerm {
    pub arg: usize,
    /// coefficient of arg²
    pub sq: f64,
    /// coefficient of arg
    pub lin: f64,
    /// bilinear partners as (term index, coefficient); each unordered pair
    /// of arguments is stored on exactly one of its two terms
    pub bilin: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadForm {
    pub terms: Vec<QuadTerm>,
    pub constant: f64,
    /// true when some argument appears at least twice, so the collected
    /// form propagates strictly better than a termwise walk can
    pub propagable: bool,
}

impl QuadForm {
    /// Point evaluation (arguments indexed by their `arg` key).
    pub fn eval(&self, val: &dyn Fn(usize) -> f64) -> f64 {
        let mut s = self.constant;
        for t in &self.terms {
            let y = val(t.arg);
            s += t.sq * y * y + t.lin * y;
            for &(j, b) in &t.bilin {
                s += b * y * val(self.terms[j].arg);
            }
        }
        s
    }
}

/// Collect the expression rooted at `root` into a quadratic form.
///
/// Returns NONE when the root is not a sum, when the sum has fewer than two
/// terms (a lone square or product is left to its operator), or when no
/// term is a square or a two-factor product. Bilinear terms are attached to
/// the argument with more appearances, ties resolved toward the earlier
/// node. When the form is propagable, arguments appearing only as one
/// square or only in one product are folded behind that subexpression as a
/// linear term, so the nonlinear part they carry can be handled — and
/// shared — on its own.
pub fn detect_quadratic(g: &ExprGraph, root: NodeId) -> Option<QuadForm> {
    let (sum_constant, coefs, children) = match &g.node(root).op {
        Op::Sum { constant, coefs } => (*constant, coefs.clone(), g.node(root).children.clone()),
        _ => return None,
    };

    // per-argument square coefficient and the node holding the square
    let mut squares: BTreeMap<NodeId, (f64, NodeId)> = BTreeMap::new();
    // per-pair coefficient, the product node, and its own scale factor
    let mut pairs: BTreeMap<(NodeId, NodeId), (f64, NodeId, f64)> = BTreeMap::new();
    let mut linears: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut constant = sum_constant;
    let mut n_terms = 0usize;

    for (&ch, &w) in children.iter().zip(coefs.iter()) {
        if w == 0.0 {
            continue;
        }
        let node = g.node(ch);
        match node.op.clone() {
            Op::Val(v) => {
                constant += w * v;
                continue;
            }
            Op::Pow { exponent } if exponent == 2.0 => {
                n_terms += 1;
                let base = node.children[0];
                if let Op::Val(v) = g.node(base).op {
                    constant += w * v * v;
                } else {
                    let e = squares.entry(base).or_insert((0.0, ch));
                    e.0 += w;
                }
                continue;
            }
            Op::Prod { coef } => {
                n_terms += 1;
                let kids = node.children.clone();
                let plain = kids
                    .iter()
                    .all(|&k| !matches!(g.node(k).op, Op::Val(_)));
                if kids.len() == 2 && kids[0] != kids[1] && plain {
                    let key = (kids[0].min(kids[1]), kids[0].max(kids[1]));
                    let e = pairs.entry(key).or_insert((0.0, ch, coef));
                    e.0 += w * coef;
                } else {
                    *linears.entry(ch).or_insert(0.0) += w;
                }
                continue;
            }
            _ => {
                n_terms += 1;
                *linears.entry(ch).or_insert(0.0) += w;
            }
        }
    }

    squares.retain(|_, (a, _)| *a != 0.0);
    pairs.retain(|_, (b, _, _)| *b != 0.0);
    linears.retain(|_, c| *c != 0.0);
    if n_terms < 2 || (squares.is_empty() && pairs.is_empty()) {
        return None;
    }

    let mut count: BTreeMap<NodeId, u32> = BTreeMap::new();
    for &u in squares.keys() {
        *count.entry(u).or_insert(0) += 1;
    }
    for &u in linears.keys() {
        *count.entry(u).or_insert(0) += 1;
    }
    for &(u, v) in pairs.keys() {
        *count.entry(u).or_insert(0) += 1;
        *count.entry(v).or_insert(0) += 1;
    }
    let propagable = count.values().any(|&c| c >= 2);

    if propagable {
        // fold arguments whose only appearance is one square or one product
        // behind that subexpression: the form keeps a linear handle on it
        // while its interior is handled separately
        let only_square: Vec<NodeId> = squares
            .keys()
            .copied()
            .filter(|u| count[u] == 1)
            .collect();
        for u in only_square {
            let (a, sq_node) = squares.remove(&u).unwrap();
            *linears.entry(sq_node).or_insert(0.0) += a;
        }
        let lone_pairs: Vec<(NodeId, NodeId)> = pairs
            .keys()
            .copied()
            .filter(|&(u, v)| count[&u] == 1 && count[&v] == 1)
            .collect();
        for key in lone_pairs {
            let (b, prod_node, scale) = pairs.remove(&key).unwrap();
            *linears.entry(prod_node).or_insert(0.0) += b / scale;
        }
    }

    let mut args: BTreeSet<NodeId> = BTreeSet::new();
    args.extend(squares.keys());
    args.extend(linears.keys());
    for &(u, v) in pairs.keys() {
        args.insert(u);
        args.insert(v);
    }
    let index: BTreeMap<NodeId, usize> = args.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut terms: Vec<QuadTerm> = args
        .iter()
        .map(|&u| QuadTerm {
            arg: u,
            sq: squares.get(&u).map_or(0.0, |&(a, _)| a),
            lin: linears.get(&u).copied().unwrap_or(0.0),
            bilin: Vec::new(),
        })
        .collect();
    for (&(u, v), &(b, _, _)) in &pairs {
        let (cu, cv) = (count[&u], count[&v]);
        let owner = if cu > cv {
            u
        } else if cv > cu {
            v
        } else {
            u.min(v)
        };
        let other = if owner == u { v } else { u };
        terms[index[&owner]].bilin.push((index[&other], b));
    }
    for t in &mut terms {
        t.bilin.sort_unstable_by_key(|&(j, _)| j);
    }
    debug_assert!(
        !propagable || terms.iter().any(|t| t.sq != 0.0 || !t.bilin.is_empty()),
        "a propagable form keeps at least one square or product"
    );

    Some(QuadForm {
        terms,
        constant,
        propagable,
    })
}

// ----------------------------------------------------------------------
// forward interval evaluation
// ----------------------------------------------------------------------

/// Range of a·s² + λ·s over s ∈ t, λ ∈ l: the extremes in λ sit at its
/// endpoints for every fixed s, so two exact univariate ranges suffice.
fn ivq_range(a: f64, l: Interval, t: Interval) -> Interval {
    if t.is_empty() || l.is_empty() {
        return Interval::EMPTY;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in [l.lo, l.hi] {
        if c.abs() >= INF {
            continue;
        }
        let r = uni_quad_range(a, c, t);
        lo = lo.min(r.lo);
        hi = hi.max(r.hi);
    }
    // an unbounded coefficient sweeps the value over a half-line wherever
    // the argument is nonzero
    if l.lo <= -INF {
        if t.hi > 0.0 {
            lo = -INF;
        }
        if t.lo < 0.0 {
            hi = INF;
        }
    }
    if l.hi >= INF {
        if t.hi > 0.0 {
            hi = INF;
        }
        if t.lo < 0.0 {
            lo = -INF;
        }
    }
    if lo > hi {
        // both coefficient endpoints unbounded and t = {0}
        return Interval::point(0.0);
    }
    Interval::new(lo, hi)
}

/// Exact range of a·s² + c·s over s ∈ t for finite c: endpoints (or their
/// limits) plus the interior vertex.
fn uni_quad_range(a: f64, c: f64, t: Interval) -> Interval {
    let eval = |s: f64| a * s * s + c * s;
    let mut cands: Vec<f64> = Vec::with_capacity(4);
    for (end, toward_neg) in [(t.lo, true), (t.hi, false)] {
        if end.abs() >= INF {
            let sgn = if a > 0.0 {
                1.0
            } else if a < 0.0 {
                -1.0
            } else if c == 0.0 {
                0.0
            } else if toward_neg {
                -c.signum()
            } else {
                c.signum()
            };
            cands.push(if sgn == 0.0 { 0.0 } else { sgn * f64::INFINITY });
        } else {
            cands.push(eval(end));
        }
    }
    if a != 0.0 {
        let v = -c / (2.0 * a);
        if t.contains(v) {
            cands.push(eval(v));
        }
    }
    let lo = cands.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Interval::new(lo, hi)
}

fn term_lincoef(q: &QuadForm, t: &QuadTerm, argb: &dyn Fn(usize) -> Interval) -> Interval {
    let mut l = Interval::point(t.lin);
    for &(j, b) in &t.bilin {
        l = l.add(&argb(q.terms[j].arg).scale(b));
    }
    l
}

fn outward(iv: Interval) -> Interval {
    if iv.is_empty() {
        return iv;
    }
    let lo = if iv.lo <= -INF {
        iv.lo
    } else {
        iv.lo - 1e-12 * iv.lo.abs().max(1.0)
    };
    let hi = if iv.hi >= INF {
        iv.hi
    } else {
        iv.hi + 1e-12 * iv.hi.abs().max(1.0)
    };
    Interval::new(lo, hi)
}

/// Forward interval evaluation of the collected form over per-argument
/// bounds, exact per term (and overall for a single argument).
pub fn quad_inteval(q: &QuadForm, argb: &dyn Fn(usize) -> Interval) -> Interval {
    let mut total = Interval::point(q.constant);
    for t in &q.terms {
        let l = term_lincoef(q, t, argb);
        let r = ivq_range(t.sq, l, argb(t.arg));
        if r.is_empty() {
            return Interval::EMPTY;
        }
        total = total.add(&r);
    }
    outward(total)
}

// ----------------------------------------------------------------------
// backward propagation
// ----------------------------------------------------------------------

/// Hull over s ∈ t of rest/s − a·s, requiring 0 ∉ t. Negative domains are
/// mirrored through f(−s) = −(−rest··· ) pointwise.
fn residual_range(rest: Interval, a: f64, t: Interval) -> Interval {
    if rest.is_empty() || t.is_empty() {
        return Interval::EMPTY;
    }
    if t.hi < 0.0 {
        return residual_range(rest, a, Interval::new(-t.hi, -t.lo)).neg();
    }
    let lo = if rest.lo <= -INF {
        -INF
    } else {
        residual_min(rest.lo, a, t)
    };
    let hi = if rest.hi >= INF {
        INF
    } else {
        -residual_min(-rest.hi, -a, t)
    };
    Interval::new(lo, hi)
}

/// min over s ∈ t (with t.lo > 0) of b/s − a·s for finite b.
fn residual_min(b: f64, a: f64, t: Interval) -> f64 {
    let eval = |s: f64| b / s - a * s;
    let mut m = eval(t.lo);
    if t.hi >= INF {
        let limit = if a > 0.0 {
            f64::NEG_INFINITY
        } else if a < 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        m = m.min(limit);
    } else {
        m = m.min(eval(t.hi));
    }
    if a != 0.0 && -b / a > 0.0 {
        let s = (-b / a).sqrt();
        if s > t.lo && (t.hi >= INF || s < t.hi) {
            m = m.min(eval(s));
        }
    }
    m
}

/// Argument tightenings implied by q(y) ∈ target over per-argument bounds.
///
/// Each argument's own term is solved as a univariate quadratic interval
/// equation against the residual of the remaining terms. Arguments held
/// only as bilinear partners get bounds a second way: dividing the residual
/// by an owning argument bounded away from zero turns the constraint into
/// c_i + Σ b_{i,j}·y_j ∈ rest/y_i − a_i·y_i, and the partner sum inverts
/// linearly. Returns NONE when some argument admits no value at all, i.e.
/// the bounds are infeasible for the target.
pub fn quad_reverseprop(
    q: &QuadForm,
    target: Interval,
    argb: &dyn Fn(usize) -> Interval,
) -> Option<Vec<(usize, Interval)>> {
    let k = q.terms.len();
    let lin: Vec<Interval> = q.terms.iter().map(|t| term_lincoef(q, t, argb)).collect();
    let rng: Vec<Interval> = q
        .terms
        .iter()
        .enumerate()
        .map(|(i, t)| ivq_range(t.sq, lin[i], argb(t.arg)))
        .collect();
    if rng.iter().any(|r| r.is_empty()) {
        return None;
    }
    let zero = Interval::point(0.0);
    let mut prefix = vec![zero; k + 1];
    for i in 0..k {
        prefix[i + 1] = prefix[i].add(&rng[i]);
    }
    let mut suffix = vec![zero; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1].add(&rng[i]);
    }
    let inner = target.sub(&Interval::point(q.constant));

    let mut out: Vec<(usize, Interval)> = Vec::new();
    for (i, t) in q.terms.iter().enumerate() {
        let rest = inner.sub(&prefix[i]).sub(&suffix[i + 1]);
        let dom = argb(t.arg);
        let sol = solve_univariate_quadratic(t.sq, lin[i], rest, dom);
        if sol.is_empty() {
            return None;
        }
        if sol.lo > dom.lo || sol.hi < dom.hi {
            out.push((t.arg, sol));
        }
        if t.bilin.is_empty() || dom.is_empty() || dom.contains(0.0) {
            continue;
        }
        let partner_sum = residual_range(rest, t.sq, dom);
        for (pos, &(j, bj)) in t.bilin.iter().enumerate() {
            let mut others = Interval::point(t.lin);
            for (pos2, &(j2, b2)) in t.bilin.iter().enumerate() {
                if pos2 != pos {
                    others = others.add(&argb(q.terms[j2].arg).scale(b2));
                }
            }
            let implied = partner_sum.sub(&others).scale(1.0 / bj);
            let pd = argb(q.terms[j].arg);
            if implied.lo > pd.lo || implied.hi < pd.hi {
                out.push((q.terms[j].arg, implied));
            }
        }
    }
    Some(out)
}

// ----------------------------------------------------------------------
// handler
// ----------------------------------------------------------------------

/// Claims domain propagation for propagable quadratic sums. Separation is
/// left to the termwise fallback, so only arguments — not every square and
/// product — receive auxiliary variables here.
pub struct QuadHandler;

impl NlHandler for QuadHandler {
    fn name(&self) -> &'static str {
        "quadratic"
    }

    fn detect(&self, b: &mut ExtBuilder, con: usize, remaining: RoleSet) -> Option<Detected> {
        if !remaining.prop {
            return None;
        }
        let root = b.cons[con].root;
        let mut q = detect_quadratic(&b.graph, root)?;
        if !q.propagable {
            return None;
        }
        // reseat arguments on columns: variables keep theirs, argument
        // subexpressions get shared auxiliary variables
        for i in 0..q.terms.len() {
            let node = q.terms[i].arg;
            let var = match b.graph.node(node).op {
                Op::Var(v) => Some(v),
                _ => None,
            };
            q.terms[i].arg = match var {
                Some(v) => v,
                None => b.aux_for(node),
            };
        }
        Some(Detected::exclusive(
            RoleSet {
                prop: true,
                below: false,
                above: false,
            },
            HandlerData::Quad(q),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ExprGraph;
    use crate::extform::{build_extform, Registry};
    use crate::interval::Interval;
    use crate::model::parse_model;
    use crate::prop::{fbbt, FbbtMode, FbbtOutcome};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    fn fixed(bounds: Vec<Interval>) -> impl Fn(usize) -> Interval {
        move |i| bounds[i]
    }

    /// form over arguments 0..k keyed directly by index
    fn direct_form(
        sq: &[f64],
        lin: &[f64],
        bil: &[(usize, usize, f64)],
        constant: f64,
    ) -> QuadForm {
        let mut terms: Vec<QuadTerm> = sq
            .iter()
            .zip(lin)
            .enumerate()
            .map(|(i, (&a, &c))| QuadTerm {
                arg: i,
                sq: a,
                lin: c,
                bilin: Vec::new(),
            })
            .collect();
        for &(i, j, b) in bil {
            terms[i].bilin.push((j, b));
        }
        QuadForm {
            terms,
            constant,
            propagable: true,
        }
    }

    #[test]
    fn detect_square_plus_linear_is_propagable() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let x2 = g.pow(x, 2.0);
        let root = g.sum(0.0, vec![(1.0, x2), (1.0, x)]);
        let q = detect_quadratic(&g, root).unwrap();
        assert!(q.propagable);
        assert_eq!(q.terms.len(), 1);
        assert_eq!(q.terms[0].arg, x);
        assert_eq!(q.terms[0].sq, 1.0);
        assert_eq!(q.terms[0].lin, 1.0);
        assert!(q.terms[0].bilin.is_empty());
        assert_eq!(q.constant, 0.0);
    }

    #[test]
    fn detect_separable_squares_not_propagable() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let x2 = g.pow(x, 2.0);
        let y2 = g.pow(y, 2.0);
        let root = g.sum(0.0, vec![(1.0, x2), (1.0, y2)]);
        let q = detect_quadratic(&g, root).unwrap();
        assert!(!q.propagable);
        // the handler declines, so the whole constraint stays with the
        // termwise fallback
        let p = parse_model(
            "var x continuous [-2, 2]\nvar y continuous [-2, 2]\ncon c: x^2 + y^2 <= 2\n",
        )
        .unwrap();
        let ext = build_extform(&p, &Registry::standard());
        assert!(ext.cons[0]
            .claims
            .iter()
            .all(|c| !matches!(c.data, HandlerData::Quad(_))));
    }

    #[test]
    fn detect_rejects_single_terms_and_linear_sums() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let x2 = g.pow(x, 2.0);
        assert!(detect_quadratic(&g, x2).is_none());
        let scaled = g.sum(3.0, vec![(2.0, x2)]);
        assert!(detect_quadratic(&g, scaled).is_none());
        let xy = g.prod(1.0, vec![x, y]);
        assert!(detect_quadratic(&g, xy).is_none());
        let lin = g.sum(1.0, vec![(2.0, x), (-1.0, y)]);
        assert!(detect_quadratic(&g, lin).is_none());
    }

    #[test]
    fn detect_folds_lone_product_behind_its_node() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let z = g.var(2);
        let xy = g.prod(1.0, vec![x, y]);
        let z2 = g.pow(z, 2.0);
        let root = g.sum(0.0, vec![(1.0, xy), (1.0, z2), (1.0, z)]);
        let q = detect_quadratic(&g, root).unwrap();
        assert!(q.propagable);
        assert_eq!(q.terms.len(), 2);
        // the product is held linearly through its own node; z keeps its
        // square and linear coefficients
        let tw = q.terms.iter().find(|t| t.arg == xy).unwrap();
        assert_eq!((tw.sq, tw.lin), (0.0, 1.0));
        assert!(tw.bilin.is_empty());
        let tz = q.terms.iter().find(|t| t.arg == z).unwrap();
        assert_eq!((tz.sq, tz.lin), (1.0, 1.0));
        assert!(tz.bilin.is_empty());
    }

    #[test]
    fn detect_assigns_products_to_more_frequent_argument() {
        // y1² + y1·y2 + y1·y3 + y2·y3 + y3: appearances are y1:3, y2:2,
        // y3:3, so y1 owns (y1,y2) and — on the tie with y3 — (y1,y3),
        // while y3 owns (y2,y3); y2 keeps no term of its own.
        let mut g = ExprGraph::new();
        let y1 = g.var(0);
        let y2 = g.var(1);
        let y3 = g.var(2);
        let sq1 = g.pow(y1, 2.0);
        let p12 = g.prod(1.0, vec![y1, y2]);
        let p13 = g.prod(1.0, vec![y1, y3]);
        let p23 = g.prod(1.0, vec![y2, y3]);
        let root = g.sum(
            0.0,
            vec![(1.0, sq1), (1.0, p12), (1.0, p13), (1.0, p23), (1.0, y3)],
        );
        let q = detect_quadratic(&g, root).unwrap();
        assert!(q.propagable);
        assert_eq!(q.terms.len(), 3);
        let (t1, t2, t3) = (&q.terms[0], &q.terms[1], &q.terms[2]);
        assert_eq!((t1.arg, t2.arg, t3.arg), (y1, y2, y3));
        assert_eq!(t1.sq, 1.0);
        assert_eq!(t1.bilin, vec![(1, 1.0), (2, 1.0)]);
        assert_eq!((t2.sq, t2.lin), (0.0, 0.0));
        assert!(t2.bilin.is_empty());
        assert_eq!((t3.sq, t3.lin), (0.0, 1.0));
        assert_eq!(t3.bilin, vec![(1, 1.0)]);
    }

    #[test]
    fn detect_is_deterministic() {
        let build = || {
            let mut g = ExprGraph::new();
            let x = g.var(0);
            let y = g.var(1);
            let z = g.var(2);
            let xy = g.prod(2.0, vec![x, y]);
            let xz = g.prod(1.0, vec![x, z]);
            let x2 = g.pow(x, 2.0);
            let root = g.sum(1.5, vec![(1.0, x2), (0.5, xy), (-1.0, xz), (3.0, y)]);
            detect_quadratic(&g, root).unwrap()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn inteval_univariate_is_exact() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let x2 = g.pow(x, 2.0);
        let root = g.sum(0.0, vec![(1.0, x2), (1.0, x)]);
        let q = detect_quadratic(&g, root).unwrap();
        let b = move |_: usize| iv(-1.0, 1.0);
        let r = quad_inteval(&q, &b);
        assert!((r.lo - -0.25).abs() < 1e-9, "{:?}", r);
        assert!((r.hi - 2.0).abs() < 1e-9, "{:?}", r);
    }

    #[test]
    fn inteval_bilinear_pinned() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let y = g.var(1);
        let x2 = g.pow(x, 2.0);
        let xy = g.prod(1.0, vec![x, y]);
        let root = g.sum(0.0, vec![(1.0, x2), (1.0, xy)]);
        let q = detect_quadratic(&g, root).unwrap();
        let bx = iv(0.0, 1.0);
        let by = iv(0.0, 1.0);
        let b = move |a: usize| if a == x { bx } else { by };
        let r = quad_inteval(&q, &b);
        assert!((r.lo - 0.0).abs() < 1e-9, "{:?}", r);
        assert!((r.hi - 2.0).abs() < 1e-9, "{:?}", r);
    }

    #[test]
    fn inteval_constant_only() {
        let q = QuadForm {
            terms: Vec::new(),
            constant: 3.5,
            propagable: false,
        };
        let r = quad_inteval(&q, &|_| unreachable!());
        assert!((r.lo - 3.5).abs() < 1e-9 && (r.hi - 3.5).abs() < 1e-9);
    }

    fn random_form_and_bounds(rng: &mut ChaCha8Rng) -> (QuadForm, Vec<Interval>) {
        let k = rng.gen_range(1..=4);
        let coef = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                rng.gen_range(-3.0..3.0)
            }
        };
        let sq: Vec<f64> = (0..k).map(|_| coef(rng)).collect();
        let lin: Vec<f64> = (0..k).map(|_| coef(rng)).collect();
        let mut bil = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                if rng.gen_bool(0.4) {
                    let b = rng.gen_range(-3.0..3.0);
                    if b != 0.0 {
                        if rng.gen_bool(0.5) {
                            bil.push((i, j, b));
                        } else {
                            bil.push((j, i, b));
                        }
                    }
                }
            }
        }
        let q = direct_form(&sq, &lin, &bil, rng.gen_range(-2.0..2.0));
        let bounds: Vec<Interval> = (0..k)
            .map(|_| {
                let a: f64 = rng.gen_range(-5.0..5.0);
                let w: f64 = rng.gen_range(0.0..6.0);
                iv(a, a + w)
            })
            .collect();
        (q, bounds)
    }

    fn sample_points(bounds: &[Interval], rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                bounds
                    .iter()
                    .map(|b| rng.gen_range(b.lo..=b.hi))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn inteval_contains_sampled_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let (q, bounds) = random_form_and_bounds(&mut rng);
            let r = quad_inteval(&q, &fixed(bounds.clone()));
            for p in sample_points(&bounds, &mut rng, 40) {
                let v = q.eval(&|i| p[i]);
                assert!(
                    r.contains(v) || (v - r.hi).abs() < 1e-7 || (r.lo - v).abs() < 1e-7,
                    "value {} outside {:?} for {:?} at {:?}",
                    v,
                    r,
                    q,
                    p
                );
            }
        }
    }

    #[test]
    fn reverse_univariate_pinned() {
        let mut g = ExprGraph::new();
        let x = g.var(0);
        let x2 = g.pow(x, 2.0);
        let root = g.sum(0.0, vec![(1.0, x2), (1.0, x)]);
        let q = detect_quadratic(&g, root).unwrap();
        let b = move |_: usize| iv(-10.0, 10.0);
        let out = quad_reverseprop(&q, iv(0.0, 2.0), &b).unwrap();
        assert_eq!(out.len(), 1);
        let (arg, r) = out[0];
        assert_eq!(arg, x);
        assert!((r.lo - -2.0).abs() < 1e-6, "{:?}", r);
        assert!((r.hi - 1.0).abs() < 1e-6, "{:?}", r);
    }

    #[test]
    fn reverse_no_tightening_at_activity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (q, bounds) = random_form_and_bounds(&mut rng);
            let act = quad_inteval(&q, &fixed(bounds.clone()));
            let out = quad_reverseprop(&q, act, &fixed(bounds.clone())).unwrap();
            for (arg, r) in out {
                assert!(
                    r.contains_interval(&bounds[arg]),
                    "activity target shrank arg {} to {:?} from {:?}",
                    arg,
                    r,
                    bounds[arg]
                );
            }
        }
    }

    #[test]
    fn reverse_partner_bound_through_argument_division() {
        // y1² + y1·y2 + y1·y3 + y2·y3 + y3 ∈ [0,1]: y2 has no term of its
        // own, yet dividing the residual by y1 (and by y3) bounds it.
        let mut g = ExprGraph::new();
        let y1 = g.var(0);
        let y2 = g.var(1);
        let y3 = g.var(2);
        let sq1 = g.pow(y1, 2.0);
        let p12 = g.prod(1.0, vec![y1, y2]);
        let p13 = g.prod(1.0, vec![y1, y3]);
        let p23 = g.prod(1.0, vec![y2, y3]);
        let root = g.sum(
            0.0,
            vec![(1.0, sq1), (1.0, p12), (1.0, p13), (1.0, p23), (1.0, y3)],
        );
        let q = detect_quadratic(&g, root).unwrap();
        let bounds = vec![iv(2.0, 3.0), iv(-10.0, 10.0), iv(0.1, 0.2)];
        let target = iv(0.0, 1.0);
        let bl = bounds.clone();
        let b = move |a: usize| bl[if a == y1 { 0 } else if a == y2 { 1 } else { 2 }];
        let out = quad_reverseprop(&q, target, &b).unwrap();
        let mut y2_range = iv(-10.0, 10.0);
        for (arg, r) in &out {
            if *arg == y2 {
                y2_range = y2_range.intersect(r);
            }
        }
        assert!(
            y2_range.lo > -10.0 + 1e-6 && y2_range.hi < 10.0 - 1e-6,
            "no cut on the partner-only argument: {:?}",
            y2_range
        );
        // grid oracle: no feasible y2 may be excluded
        let mut feas_lo = f64::INFINITY;
        let mut feas_hi = f64::NEG_INFINITY;
        let n = 60;
        for i in 0..=n {
            for j in 0..=n {
                for l in 0..=n {
                    let p1 = 2.0 + (i as f64) / (n as f64);
                    let p2 = -10.0 + 20.0 * (j as f64) / (n as f64);
                    let p3 = 0.1 + 0.1 * (l as f64) / (n as f64);
                    let v = p1 * p1 + p1 * p2 + p1 * p3 + p2 * p3 + p3;
                    if v >= target.lo - 1e-9 && v <= target.hi + 1e-9 {
                        feas_lo = feas_lo.min(p2);
                        feas_hi = feas_hi.max(p2);
                    }
                }
            }
        }
        assert!(feas_lo <= feas_hi, "oracle grid found no feasible points");
        assert!(
            y2_range.lo <= feas_lo + 1e-6 && y2_range.hi >= feas_hi - 1e-6,
            "tightening {:?} excludes feasible y2 range [{}, {}]",
            y2_range,
            feas_lo,
            feas_hi
        );
    }

    #[test]
    fn reverse_never_excludes_sampled_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..300 {
            let (q, bounds) = random_form_and_bounds(&mut rng);
            let act = quad_inteval(&q, &fixed(bounds.clone()));
            if !act.is_finite() {
                continue;
            }
            let t0 = rng.gen_range(act.lo..=act.hi);
            let t1 = rng.gen_range(t0..=act.hi);
            let target = iv(t0, t1);
            let points = sample_points(&bounds, &mut rng, 60);
            let feasible: Vec<&Vec<f64>> = points
                .iter()
                .filter(|p| target.contains(q.eval(&|i| p[i])))
                .collect();
            match quad_reverseprop(&q, target, &fixed(bounds.clone())) {
                None => {
                    assert!(
                        feasible.is_empty(),
                        "declared infeasible with {} feasible samples for {:?}",
                        feasible.len(),
                        q
                    );
                }
                Some(out) => {
                    for p in feasible {
                        for (arg, r) in &out {
                            assert!(
                                r.lo <= p[*arg] + 1e-7 && p[*arg] - 1e-7 <= r.hi,
                                "arg {} value {} excluded by {:?} (target {:?}, q {:?})",
                                arg,
                                p[*arg],
                                r,
                                target,
                                q
                            );
                        }
                    }
                }
            }
        }
    }

    // ------------------------------------------------------------------
    // engine integration
    // ------------------------------------------------------------------

    fn tightened_bounds(text: &str, registry: &Registry) -> Vec<Interval> {
        let p = parse_model(text).unwrap();
        let ext = build_extform(&p, registry);
        let bounds: Vec<Interval> = ext.vars.iter().map(|v| v.bounds()).collect();
        match fbbt(&ext, &bounds, FbbtMode::Node, 1e-6) {
            FbbtOutcome::Done(r) => r.bounds,
            FbbtOutcome::Infeasible { con } => panic!("unexpected infeasibility ({:?})", con),
        }
    }

    #[test]
    fn fbbt_solves_quadratic_directly() {
        let text = "var x continuous [-10, 10]\ncon c: x^2 + x <= 2\n";
        let quad = tightened_bounds(text, &Registry::standard());
        assert!(quad[0].lo >= -2.0 - 1e-3 && quad[0].lo <= -2.0 + 1e-3, "{:?}", quad[0]);
        assert!(quad[0].hi <= 1.0 + 1e-3 && quad[0].hi >= 1.0 - 1e-3, "{:?}", quad[0]);
        // the collected form is at least as tight as the termwise walk
        let term = tightened_bounds(text, &Registry::default_only());
        assert!(quad[0].lo >= term[0].lo - 1e-9 && quad[0].hi <= term[0].hi + 1e-9);
    }

    #[test]
    fn fbbt_splits_product_and_propagates_reformulation() {
        let text = "var x continuous [0, 2]\n\
                    var y continuous [0, 2]\n\
                    var z continuous [-5, 5]\n\
                    con c: x*y + z^2 + z <= 1\n";
        let p = parse_model(text).unwrap();
        let ext = build_extform(&p, &Registry::standard());
        let claim = ext.cons[0]
            .claims
            .iter()
            .find(|c| c.roles.prop)
            .expect("propagation claim");
        let q = match &claim.data {
            HandlerData::Quad(q) => q,
            other => panic!("expected quadratic claim, got {:?}", other),
        };
        assert_eq!(q.terms.len(), 2);
        // the product argument is a (shared) auxiliary column
        assert!(q.terms.iter().any(|t| t.arg >= ext.n_original_vars));
        let bounds: Vec<Interval> = ext.vars.iter().map(|v| v.bounds()).collect();
        let r = match fbbt(&ext, &bounds, FbbtMode::Node, 1e-6) {
            FbbtOutcome::Done(r) => r,
            FbbtOutcome::Infeasible { con } => panic!("unexpected infeasibility ({:?})", con),
        };
        let golden_lo = (-1.0 - 5.0_f64.sqrt()) / 2.0;
        let golden_hi = (-1.0 + 5.0_f64.sqrt()) / 2.0;
        assert!((r.bounds[2].lo - golden_lo).abs() < 1e-2, "{:?}", r.bounds[2]);
        assert!((r.bounds[2].hi - golden_hi).abs() < 1e-2, "{:?}", r.bounds[2]);
        // the product column inherits what the quadratic residual allows
        let wcol = q
            .terms
            .iter()
            .find(|t| t.arg >= ext.n_original_vars)
            .unwrap()
            .arg;
        assert!(r.bounds[wcol].hi <= 1.25 + 1e-6, "{:?}", r.bounds[wcol]);
    }

    #[test]
    fn fbbt_reaches_quadratic_behind_auxiliary() {
        // exp(x² + x) ≤ 5 pushes ln 5 through the auxiliary onto x
        let text = "var x continuous [-10, 10]\ncon c: exp(x^2 + x) <= 5\n";
        let b = tightened_bounds(text, &Registry::standard());
        let hi = (-1.0 + (1.0 + 4.0 * 5.0_f64.ln()).sqrt()) / 2.0;
        let lo = (-1.0 - (1.0 + 4.0 * 5.0_f64.ln()).sqrt()) / 2.0;
        assert!((b[0].lo - lo).abs() < 1e-2, "{:?} want lo {}", b[0], lo);
        assert!((b[0].hi - hi).abs() < 1e-2, "{:?} want hi {}", b[0], hi);
    }
}
