//! Second-order cone structure: detection, disaggregation, and separation.
//!
//! A cone constraint stores `sqrt(Σ_j t_j(y)²) ≤ t_rhs(y)` where every
//! `t` is an affine form over columns. Four shapes of nonlinear rows
//! reduce to this:
//!
//! * a square root whose argument is a sum of perfect squares after
//!   completion (`sqrt(4x² + 4x + 2) = sqrt((2x+1)² + 1)`),
//! * a difference of squares with exactly one negative square whose
//!   variable is sign-restricted (`x² + y² − z² ≤ 0`, `z ≥ 0`),
//! * a sum of squares minus one bilinear product of two variables whose
//!   sum is sign-restricted (`x² − y·w ≤ 0`, `y + w ≥ 0`), and
//! * a general quadratic whose symmetric coefficient matrix has exactly
//!   one negative eigenvalue, via an eigendecomposition rewrite.
//!
//! Cones over three or more terms are disaggregated: one extra column
//! `z_j` per term with `t_j(y)² ≤ z_j·t_rhs(y)` and `Σ z_j ≤ t_rhs(y)`,
//! which yields much stronger linearizations than cutting the aggregate
//! norm. Separation produces gradient cuts of the norm (or of the
//! two-term standard form of a disaggregation member), which are tangent
//! planes and therefore globally valid.

use std::collections::BTreeMap;

use crate::expr::{NodeId, Op, Var, VarOrigin};
use crate::extform::{
    ConOrigin, Detected, ExtBuilder, HandlerData, NlHandler, RoleSet,
};
use crate::interval::Interval;
use crate::sepa::{RowPrep, Side};
use crate::INF;

/// Gradient cuts below this efficacy are dropped when the caller asks
/// for strong cuts only.
pub const MIN_CUT_EFFICACY: f64 = 1e-5;

/// Norm values below this are treated as the cone apex, where the norm
/// is not differentiable and no single tangent exists.
const APEX_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// stored form
// ---------------------------------------------------------------------------

/// Sparse affine form `Σ a_c·x_c + offset` over columns, sorted by column.
#[derive(Clone, Debug, PartialEq)]
pub struct SocTerm {
    pub coefs: Vec<(usize, f64)>,
    pub offset: f64,
}

impl SocTerm {
    pub fn constant(offset: f64) -> SocTerm {
        SocTerm {
            coefs: Vec::new(),
            offset,
        }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.coefs
            .iter()
            .map(|&(c, a)| a * point[c])
            .sum::<f64>()
            + self.offset
    }

    /// Interval of the form over the column bound boxes.
    pub fn bounds(&self, vars: &[Var]) -> Interval {
        let mut r = Interval::point(self.offset);
        for &(c, a) in &self.coefs {
            r = r.add(&vars[c].bounds().scale(a));
        }
        r
    }
}

/// A second-order cone `sqrt(Σ_j terms[j]²) ≤ rhs` over columns. When
/// the cone has been disaggregated, `disagg[j]` is the column of the
/// slack `z_j` bounding `terms[j]² / rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct SocForm {
    pub terms: Vec<SocTerm>,
    pub rhs: SocTerm,
    pub disagg: Vec<usize>,
}

impl SocForm {
    /// Number of terms under the norm.
    pub fn k(&self) -> usize {
        self.terms.len()
    }

    pub fn lhs_norm(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let v = t.eval(point);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Positive when the point lies outside the cone.
    pub fn violation(&self, point: &[f64]) -> f64 {
        self.lhs_norm(point) - self.rhs.eval(point)
    }
}

/// Disaggregated view: each member pairs a term with its slack column,
/// meaning `term(y)² ≤ z·rhs(y)`, and the slacks sum to at most `rhs`.
#[derive(Clone, Debug)]
pub struct SocExt {
    pub members: Vec<(SocTerm, usize)>,
    pub rhs: SocTerm,
}

/// Split a cone with at least three terms into per-term members. Slack
/// columns are taken from `fresh_col` on first use and remembered on the
/// form, so repeated calls reuse the same columns. Two-term cones are
/// left alone: their aggregate gradient cuts are already as strong.
pub fn disaggregate(
    s: &mut SocForm,
    mut fresh_col: impl FnMut() -> usize,
) -> Option<SocExt> {
    if s.terms.len() < 3 {
        return None;
    }
    if s.disagg.is_empty() {
        s.disagg = (0..s.terms.len()).map(|_| fresh_col()).collect();
    }
    Some(SocExt {
        members: s
            .terms
            .iter()
            .cloned()
            .zip(s.disagg.iter().copied())
            .collect(),
        rhs: s.rhs.clone(),
    })
}

// ---------------------------------------------------------------------------
// symmetric eigendecomposition
// ---------------------------------------------------------------------------

/// Eigendecomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns the eigenvalues and an orthonormal matrix whose
/// column `j` (`q[i][j]` over `i`) is the eigenvector for eigenvalue
/// `j`. Sweeps stop once every off-diagonal entry is below
/// `1e-12·max(1, ‖A‖∞)`, or after 100 sweeps.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut q = vec![vec![0.0; n]; n];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let stop = 1e-12 * scale.max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0_f64;
        for p in 0..n {
            for r in (p + 1)..n {
                off = off.max(m[p][r].abs());
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m[p][r];
                if apr.abs() <= stop {
                    continue;
                }
                let tau = (m[r][r] - m[p][p]) / (2.0 * apr);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkr) = (m[k][p], m[k][r]);
                    m[k][p] = c * mkp - s * mkr;
                    m[k][r] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let (mpk, mrk) = (m[p][k], m[r][k]);
                    m[p][k] = c * mpk - s * mrk;
                    m[r][k] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let (qkp, qkr) = (q[k][p], q[k][r]);
                    q[k][p] = c * qkp - s * qkr;
                    q[k][r] = s * qkp + c * qkr;
                }
            }
        }
    }
    let lam = (0..n).map(|i| m[i][i]).collect();
    (lam, q)
}

// ---------------------------------------------------------------------------
// detection
// ---------------------------------------------------------------------------

/// Affine form over graph nodes, before arguments are seated on columns.
struct NodeTerm {
    coefs: Vec<(NodeId, f64)>,
    offset: f64,
}

impl NodeTerm {
    fn constant(offset: f64) -> NodeTerm {
        NodeTerm {
            coefs: Vec::new(),
            offset,
        }
    }

    fn single(n: NodeId, a: f64) -> NodeTerm {
        NodeTerm {
            coefs: vec![(n, a)],
            offset: 0.0,
        }
    }
}

struct NodeCone {
    terms: Vec<NodeTerm>,
    rhs: NodeTerm,
}

/// Quadratic parts of a row, keyed by argument node: `Σ sq_n·n² +
/// Σ lin_n·n + Σ bilin_(n,m)·n·m + constant`. Arguments that are not
/// squares or two-factor products land in `lin` as opaque terms.
#[derive(Default)]
struct QuadParts {
    sq: BTreeMap<NodeId, f64>,
    lin: BTreeMap<NodeId, f64>,
    bilin: BTreeMap<(NodeId, NodeId), f64>,
    constant: f64,
}

/// Strip scalar wrappers: a single-child sum without constant (`a·u`)
/// or a single-child product is the wrapped node carrying a multiplier.
fn scalar_unwrap(b: &ExtBuilder, n: NodeId) -> (NodeId, f64) {
    let mut id = n;
    let mut mult = 1.0;
    loop {
        let node = b.graph.node(id);
        match &node.op {
            Op::Sum { constant, coefs }
                if *constant == 0.0 && node.children.len() == 1 =>
            {
                mult *= coefs[0];
                id = node.children[0];
            }
            Op::Prod { coef } if node.children.len() == 1 => {
                mult *= coef;
                id = node.children[0];
            }
            _ => return (id, mult),
        }
    }
}

fn absorb(b: &ExtBuilder, q: &mut QuadParts, ch: NodeId, w: f64) {
    let (id, mult) = scalar_unwrap(b, ch);
    let w = w * mult;
    let node = b.graph.node(id).clone();
    match node.op {
        Op::Val(v) => q.constant += w * v,
        Op::Sum { constant, ref coefs } => {
            q.constant += w * constant;
            for (&c, &a) in node.children.iter().zip(coefs.iter()) {
                absorb(b, q, c, w * a);
            }
        }
        Op::Pow { exponent } if exponent == 2.0 => {
            let (base, bm) = scalar_unwrap(b, node.children[0]);
            let w2 = w * bm * bm;
            if let Op::Val(v) = b.graph.node(base).op {
                q.constant += w2 * v * v;
            } else {
                *q.sq.entry(base).or_insert(0.0) += w2;
            }
        }
        Op::Prod { coef } if node.children.len() == 2 => {
            let (u, um) = scalar_unwrap(b, node.children[0]);
            let (v, vm) = scalar_unwrap(b, node.children[1]);
            let u_val = matches!(b.graph.node(u).op, Op::Val(_));
            let v_val = matches!(b.graph.node(v).op, Op::Val(_));
            if u_val || v_val {
                // constants inside products are folded by simplification;
                // treat leftovers as an opaque argument
                *q.lin.entry(id).or_insert(0.0) += w;
            } else if u == v {
                *q.sq.entry(u).or_insert(0.0) += w * coef * um * vm;
            } else {
                let key = (u.min(v), u.max(v));
                *q.bilin.entry(key).or_insert(0.0) += w * coef * um * vm;
            }
        }
        _ => {
            *q.lin.entry(id).or_insert(0.0) += w;
        }
    }
}

/// Collect the quadratic parts of `root`, negated for the mirrored
/// orientation. Scalar wrappers are seen through and nested sums
/// flattened, so `4·(x²) + (4·x)·y` lands as a square and a bilinear
/// pair over `x` and `y`. Linear terms over integral unit-interval
/// variables are moved into the squares (`y = y²` on `{0,1}`), which
/// both widens norm detection and removes their completion offset.
fn collect(b: &ExtBuilder, root: NodeId, negate: bool) -> QuadParts {
    let mut q = QuadParts::default();
    absorb(b, &mut q, root, 1.0);
    if negate {
        q.constant = -q.constant;
        for w in q.sq.values_mut() {
            *w = -*w;
        }
        for w in q.lin.values_mut() {
            *w = -*w;
        }
        for w in q.bilin.values_mut() {
            *w = -*w;
        }
    }
    let mut unit_integral = Vec::new();
    for (&n, &w) in &q.lin {
        if let Op::Var(i) = b.graph.node(n).op {
            let v = &b.vars[i];
            if v.is_integral() && v.lb >= 0.0 && v.ub <= 1.0 {
                unit_integral.push((n, w));
            }
        }
    }
    for (n, w) in unit_integral {
        *q.sq.entry(n).or_insert(0.0) += w;
        q.lin.remove(&n);
    }
    q.sq.retain(|_, w| *w != 0.0);
    q.lin.retain(|_, w| *w != 0.0);
    q.bilin.retain(|_, w| *w != 0.0);
    q
}

/// Square-root whose argument completes to a sum of squares:
/// `sqrt(Σ a_j y_j² + Σ b_j y_j + c)` with every `a_j > 0`, every linear
/// term matched by a square, and nonnegative completion rest
/// `c − Σ b_j²/(4a_j)`. The right-hand side is the node itself, which
/// the caller has already attached to a column.
fn try_norm(b: &ExtBuilder, root: NodeId) -> Option<NodeCone> {
    let node = b.graph.node(root).clone();
    let arg = match node.op {
        Op::Pow { exponent } if exponent == 0.5 => node.children[0],
        _ => return None,
    };
    let q = collect(b, arg, false);
    if q.sq.is_empty() || !q.bilin.is_empty() {
        return None;
    }
    if q.sq.values().any(|&a| a <= 0.0) {
        return None;
    }
    if q.lin.keys().any(|n| !q.sq.contains_key(n)) {
        return None;
    }
    let mut rest = q.constant;
    let mut terms = Vec::new();
    for (&n, &a) in &q.sq {
        let bb = q.lin.get(&n).copied().unwrap_or(0.0);
        rest -= bb * bb / (4.0 * a);
        let sa = a.sqrt();
        terms.push(NodeTerm {
            coefs: vec![(n, sa)],
            offset: bb / (2.0 * sa),
        });
    }
    if rest < 0.0 {
        return None;
    }
    if rest > 0.0 {
        terms.push(NodeTerm::constant(rest.sqrt()));
    }
    Some(NodeCone {
        terms,
        rhs: NodeTerm::single(root, 1.0),
    })
}

/// Sum of positive squares minus one square of a sign-restricted
/// variable: `Σ a_j y_j² − a'·y'² + c ≤ ub` with `c − ub ≥ 0` and
/// `y' ≥ 0` becomes `sqrt(Σ (√a_j y_j)² + (c − ub)) ≤ √a'·y'`.
fn try_simple(b: &ExtBuilder, q: &QuadParts, ub: f64) -> Option<NodeCone> {
    if !q.lin.is_empty() || !q.bilin.is_empty() {
        return None;
    }
    let mut neg: Option<(NodeId, f64)> = None;
    let mut pos = Vec::new();
    for (&n, &w) in &q.sq {
        if w > 0.0 {
            pos.push((n, w));
        } else if neg.is_none() {
            neg = Some((n, w));
        } else {
            return None;
        }
    }
    let (yn, wn) = neg?;
    if pos.is_empty() {
        return None;
    }
    let c = q.constant - ub;
    if c < 0.0 {
        return None;
    }
    if b.act[yn].lo < 0.0 {
        return None;
    }
    let mut terms: Vec<NodeTerm> = pos
        .into_iter()
        .map(|(n, a)| NodeTerm::single(n, a.sqrt()))
        .collect();
    if c > 0.0 {
        terms.push(NodeTerm::constant(c.sqrt()));
    }
    Some(NodeCone {
        terms,
        rhs: NodeTerm::single(yn, (-wn).sqrt()),
    })
}

/// Sum of positive squares minus one bilinear term: `Σ a_j y_j² −
/// a'·y₁y₂ + c ≤ ub` with `c − ub ≥ 0` and `y₁ + y₂ ≥ 0`. The bilinear
/// product splits into square halves, `−a'y₁y₂ = (a'/4)(y₁−y₂)² −
/// (a'/4)(y₁+y₂)²`, giving a cone with right-hand side
/// `(√a'/2)(y₁+y₂)`.
fn try_rotated(b: &ExtBuilder, q: &QuadParts, ub: f64) -> Option<NodeCone> {
    if !q.lin.is_empty() || q.bilin.len() != 1 {
        return None;
    }
    let (&(y1, y2), &bw) = q.bilin.iter().next().unwrap();
    if bw >= 0.0 {
        return None;
    }
    if q.sq.values().any(|&w| w <= 0.0) {
        return None;
    }
    let c = q.constant - ub;
    if c < 0.0 {
        return None;
    }
    if b.act[y1].add(&b.act[y2]).lo < 0.0 {
        return None;
    }
    let h = (-bw).sqrt() / 2.0;
    let mut terms: Vec<NodeTerm> = q
        .sq
        .iter()
        .map(|(&n, &w)| NodeTerm::single(n, w.sqrt()))
        .collect();
    terms.push(NodeTerm {
        coefs: vec![(y1, h), (y2, -h)],
        offset: 0.0,
    });
    if c > 0.0 {
        terms.push(NodeTerm::constant(c.sqrt()));
    }
    Some(NodeCone {
        terms,
        rhs: NodeTerm {
            coefs: vec![(y1, h), (y2, h)],
            offset: 0.0,
        },
    })
}

/// Full quadratic `yᵀAy + bᵀy + c₀ ≤ ub` whose symmetric matrix has
/// exactly one negative eigenvalue: rewrite over the eigenbasis as
/// `Σ_j λ_j(q_jᵀy + β_j)² + c` with `β_j = (q_jᵀb)/(2λ_j)`, decline if a
/// zero eigenvalue carries a linear part, and keep the cone when the
/// negative direction `q_negᵀy + β_neg` is bounded away from zero so
/// its sign fixes the right-hand side.
fn try_general(b: &ExtBuilder, q: &QuadParts, ub: f64) -> Option<NodeCone> {
    let mut arg_set: std::collections::BTreeSet<NodeId> =
        q.sq.keys().copied().collect();
    arg_set.extend(q.lin.keys().copied());
    for &(u, v) in q.bilin.keys() {
        arg_set.insert(u);
        arg_set.insert(v);
    }
    let args: Vec<NodeId> = arg_set.into_iter().collect();
    let nn = args.len();
    if nn < 2 {
        return None;
    }
    let index: BTreeMap<NodeId, usize> =
        args.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let mut a = vec![vec![0.0; nn]; nn];
    for (&n, &w) in &q.sq {
        let i = index[&n];
        a[i][i] = w;
    }
    for (&(u, v), &w) in &q.bilin {
        let (i, j) = (index[&u], index[&v]);
        a[i][j] = w / 2.0;
        a[j][i] = w / 2.0;
    }
    let mut bv = vec![0.0; nn];
    for (&n, &w) in &q.lin {
        bv[index[&n]] = w;
    }
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let tol = 1e-9 * scale.max(1.0);
    let (lam, qm) = jacobi_eigen(&a);
    let mut negs = Vec::new();
    let mut poss = Vec::new();
    for (j, &l) in lam.iter().enumerate() {
        if l > tol {
            poss.push(j);
        } else if l < -tol {
            negs.push(j);
        }
    }
    if negs.len() != 1 || poss.is_empty() {
        return None;
    }
    let bnorm = bv.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let ztol = 1e-9 * (1.0 + bnorm);
    let mut beta = vec![0.0; nn];
    let mut c = q.constant;
    for j in 0..nn {
        let gamma: f64 = (0..nn).map(|i| qm[i][j] * bv[i]).sum();
        if lam[j].abs() <= tol {
            if gamma.abs() > ztol {
                // linear part outside the range of the matrix: not a cone
                return None;
            }
            continue;
        }
        beta[j] = gamma / (2.0 * lam[j]);
        c -= lam[j] * beta[j] * beta[j];
    }
    let cc = c - ub;
    if cc < 0.0 {
        return None;
    }
    let jn = negs[0];
    let mut range = Interval::point(beta[jn]);
    for i in 0..nn {
        range = range.add(&b.act[args[i]].scale(qm[i][jn]));
    }
    let sign = if range.lo > 0.0 {
        1.0
    } else if range.hi < 0.0 {
        -1.0
    } else {
        return None;
    };
    let mut terms = Vec::new();
    for &j in &poss {
        let sj = lam[j].sqrt();
        let coefs: Vec<(NodeId, f64)> = (0..nn)
            .filter(|&i| qm[i][j] != 0.0)
            .map(|i| (args[i], sj * qm[i][j]))
            .collect();
        terms.push(NodeTerm {
            coefs,
            offset: sj * beta[j],
        });
    }
    if cc > 0.0 {
        terms.push(NodeTerm::constant(cc.sqrt()));
    }
    let sn = (-lam[jn]).sqrt();
    let rhs_coefs: Vec<(NodeId, f64)> = (0..nn)
        .filter(|&i| qm[i][jn] != 0.0)
        .map(|i| (args[i], sign * sn * qm[i][jn]))
        .collect();
    Some(NodeCone {
        terms,
        rhs: NodeTerm {
            coefs: rhs_coefs,
            offset: sign * sn * beta[jn],
        },
    })
}

/// Seat a node-level affine form on columns: variable nodes keep their
/// column, other argument nodes get (or reuse) an auxiliary variable.
fn seat_term(b: &mut ExtBuilder, t: NodeTerm) -> SocTerm {
    let mut coefs = Vec::with_capacity(t.coefs.len());
    for (n, a) in t.coefs {
        let col = match b.graph.node(n).op {
            Op::Var(i) => i,
            _ => b.aux_for(n),
        };
        coefs.push((col, a));
    }
    coefs.sort_by(|x, y| x.0.cmp(&y.0));
    debug_assert!(coefs.windows(2).all(|w| w[0].0 < w[1].0));
    SocTerm {
        coefs,
        offset: t.offset,
    }
}

fn detect_oriented(b: &mut ExtBuilder, con: usize, mirror: bool) -> Option<Detected> {
    let (root, origin, aux, sides) = {
        let c = &b.cons[con];
        (c.root, c.origin, c.aux_var, c.sides)
    };
    let mut found: Option<NodeCone> = None;
    let mut shared = false;
    if !mirror && origin == ConOrigin::Auxiliary {
        // the defining row of a square-root column: the cone's right-hand
        // side is that column itself, so the cone captures the row exactly
        found = try_norm(b, root);
    }
    if found.is_none() {
        let ub = match aux {
            Some(w) => {
                if mirror {
                    -b.vars[w].lb
                } else {
                    b.vars[w].ub
                }
            }
            None => {
                if mirror {
                    -sides.lo
                } else {
                    sides.hi
                }
            }
        };
        if ub < INF {
            let q = collect(b, root, mirror);
            found = try_simple(b, &q, ub)
                .or_else(|| try_rotated(b, &q, ub))
                .or_else(|| try_general(b, &q, ub));
            // a defining row only bounds its column's slice of the
            // relaxation; the termwise relaxation still has to be set up,
            // so the cone shares the separation role instead of owning it
            shared = found.is_some() && origin == ConOrigin::Auxiliary;
        }
    }
    let cone = found?;
    let terms = cone
        .terms
        .into_iter()
        .map(|t| seat_term(b, t))
        .collect::<Vec<_>>();
    let rhs = seat_term(b, cone.rhs);
    let mut form = SocForm {
        terms,
        rhs,
        disagg: Vec::new(),
    };
    if form.terms.len() >= 3 {
        let rhs_hi = form.rhs.bounds(&b.vars).hi;
        disaggregate(&mut form, || b.relax_var("z", 0.0, rhs_hi));
    }
    let roles = RoleSet {
        prop: false,
        below: !mirror,
        above: mirror,
    };
    Some(Detected {
        roles,
        data: HandlerData::Soc(form),
        shared,
    })
}

/// Try the cone cases against constraint `con`, in its written
/// orientation first and mirrored (negated against the lower side)
/// second. The first orientation that fits wins.
pub fn detect_soc(b: &mut ExtBuilder, con: usize, remaining: RoleSet) -> Option<Detected> {
    if remaining.below {
        if let Some(d) = detect_oriented(b, con, false) {
            return Some(d);
        }
    }
    if remaining.above {
        if let Some(d) = detect_oriented(b, con, true) {
            return Some(d);
        }
    }
    None
}

pub struct SocHandler;

impl NlHandler for SocHandler {
    fn name(&self) -> &'static str {
        "soc"
    }

    fn detect(&self, b: &mut ExtBuilder, con: usize, remaining: RoleSet) -> Option<Detected> {
        detect_soc(b, con, remaining)
    }
}

// ---------------------------------------------------------------------------
// separation
// ---------------------------------------------------------------------------

/// Tangent cut of the aggregate norm at `point`: `σ + g·(y−ŷ) ≤ rhs(y)`
/// with `g` the norm gradient. Returns NONE at the apex (no tangent)
/// or, in strong mode, when the cut's efficacy is below
/// [`MIN_CUT_EFFICACY`].
fn gradient_cut(s: &SocForm, point: &[f64], strong: bool) -> Option<RowPrep> {
    let tvals: Vec<f64> = s.terms.iter().map(|t| t.eval(point)).collect();
    let sigma = tvals.iter().map(|t| t * t).sum::<f64>().sqrt();
    if sigma <= APEX_TOL {
        return None;
    }
    let mut g: BTreeMap<usize, f64> = BTreeMap::new();
    for (t, &tv) in s.terms.iter().zip(&tvals) {
        for &(c, v) in &t.coefs {
            *g.entry(c).or_insert(0.0) += tv * v / sigma;
        }
    }
    let mut r = RowPrep::new(Side::Le, "soc");
    let mut side = s.rhs.offset - sigma;
    for (&c, &gc) in &g {
        r.add(c, gc);
        side += gc * point[c];
    }
    for &(c, v) in &s.rhs.coefs {
        r.add(c, -v);
    }
    r.side = side;
    if strong && r.efficacy(point) < MIN_CUT_EFFICACY {
        return None;
    }
    Some(r)
}

/// Tangent cut for disaggregation member `j`, written on the standard
/// two-term form `sqrt((2t_j(y))² + (rhs(y)−z_j)²) ≤ rhs(y) + z_j`,
/// which is equivalent to `t_j(y)² ≤ z_j·rhs(y)` on `z_j, rhs ≥ 0`.
fn member_cut(s: &SocForm, j: usize, point: &[f64], strong: bool) -> Option<RowPrep> {
    let t = &s.terms[j];
    let zcol = s.disagg[j];
    let that = t.eval(point);
    let rhat = s.rhs.eval(point);
    let u = 2.0 * that;
    let d = rhat - point[zcol];
    let sigma = (u * u + d * d).sqrt();
    if sigma <= APEX_TOL {
        return None;
    }
    let mut grad: BTreeMap<usize, f64> = BTreeMap::new();
    for &(c, v) in &t.coefs {
        *grad.entry(c).or_insert(0.0) += 2.0 * u * v / sigma;
    }
    for &(c, v) in &s.rhs.coefs {
        *grad.entry(c).or_insert(0.0) += d * v / sigma;
    }
    let gz = -d / sigma;
    let mut r = RowPrep::new(Side::Le, "soc");
    let mut side = s.rhs.offset - sigma + gz * point[zcol];
    for (&c, &gc) in &grad {
        r.add(c, gc);
        side += gc * point[c];
    }
    for &(c, v) in &s.rhs.coefs {
        r.add(c, -v);
    }
    r.add(zcol, gz - 1.0);
    r.side = side;
    if strong && r.efficacy(point) < MIN_CUT_EFFICACY {
        return None;
    }
    Some(r)
}

/// Separate `point` from the cone. Aggregate cones get the norm tangent.
/// Disaggregated cones first return the (linear) slack-sum row when it
/// is violated, otherwise a tangent for the most violated member.
/// Returns NONE when nothing is violated, at an apex, or when strong
/// mode screens the cut out.
pub fn soc_separate(s: &SocForm, point: &[f64], strong: bool) -> Option<RowPrep> {
    if s.disagg.is_empty() {
        return gradient_cut(s, point, strong);
    }
    let rhat = s.rhs.eval(point);
    let zsum: f64 = s.disagg.iter().map(|&z| point[z]).sum();
    if zsum - rhat > 0.0 {
        let mut r = RowPrep::new(Side::Le, "soc");
        for &z in &s.disagg {
            r.add(z, 1.0);
        }
        for &(c, v) in &s.rhs.coefs {
            r.add(c, -v);
        }
        r.side = s.rhs.offset;
        return Some(r);
    }
    let mut best: Option<(f64, usize)> = None;
    for (j, t) in s.terms.iter().enumerate() {
        let tj = t.eval(point);
        let viol = tj * tj - point[s.disagg[j]] * rhat;
        if viol > best.map_or(0.0, |(v, _)| v) {
            best = Some((viol, j));
        }
    }
    let (_, j) = best?;
    member_cut(s, j, point, strong)
}

/// Mark relaxation slack columns so node bound tightening can refresh
/// them: `z_j` may always fall back to `[0, ub(rhs)]`.
pub fn is_relaxation_column(vars: &[Var], col: usize) -> bool {
    vars[col].origin == VarOrigin::Relaxation
}
