//! Canonicalization of expression graphs: flattened sums and products,
//! folded constants, substituted fixed variables, compare-sorted children.

use std::collections::HashMap;

use super::{ExprGraph, NodeId, Op, Var};

impl ExprGraph {
    /// Simplify into canonical form. The result is value-equivalent to the
    /// input on the feasible box and idempotent.
    pub fn simplify(&mut self, root: NodeId, vars: &[Var]) -> NodeId {
        let mut memo = HashMap::new();
        self.simplify_rec(root, vars, &mut memo)
    }

    fn simplify_rec(
        &mut self,
        id: NodeId,
        vars: &[Var],
        memo: &mut HashMap<NodeId, NodeId>,
    ) -> NodeId {
        if let Some(&r) = memo.get(&id) {
            return r;
        }
        let children: Vec<NodeId> = self.nodes[id].children.clone();
        let simplified: Vec<NodeId> = children
            .iter()
            .map(|&c| self.simplify_rec(c, vars, memo))
            .collect();
        let op = self.nodes[id].op.clone();
        let result = match op {
            Op::Val(_) => id,
            Op::Var(i) => {
                if vars[i].lb == vars[i].ub {
                    self.val(vars[i].lb)
                } else {
                    id
                }
            }
            Op::Sum { constant, coefs } => {
                let terms: Vec<(f64, NodeId)> =
                    coefs.iter().copied().zip(simplified.iter().copied()).collect();
                self.make_sum(constant, terms)
            }
            Op::Prod { coef } => self.make_prod(coef, simplified),
            Op::Pow { exponent } => self.make_pow(simplified[0], exponent, vars),
            Op::SignPow { exponent } => {
                let c = simplified[0];
                let cop = self.nodes[c].op.clone();
                if let Op::Val(v) = cop {
                    self.val(if v == 0.0 {
                        0.0
                    } else {
                        v.signum() * v.abs().powf(exponent)
                    })
                } else if exponent.fract() == 0.0 && (exponent as i64) % 2 == 1 {
                    // odd integer exponent: identical to a plain power
                    self.make_pow(c, exponent, vars)
                } else if self.nonneg(c, vars) {
                    self.make_pow(c, exponent, vars)
                } else {
                    self.add(Op::SignPow { exponent }, vec![c])
                }
            }
            Op::Exp => {
                let c = simplified[0];
                match self.nodes[c].op.clone() {
                    Op::Val(v) => self.val(v.exp()),
                    Op::Log => self.nodes[c].children[0],
                    _ => self.add(Op::Exp, vec![c]),
                }
            }
            Op::Log => {
                let c = simplified[0];
                match self.nodes[c].op.clone() {
                    Op::Val(v) if v > 0.0 => self.val(v.ln()),
                    Op::Exp => self.nodes[c].children[0],
                    _ => self.add(Op::Log, vec![c]),
                }
            }
            Op::Entropy => {
                let c = simplified[0];
                match self.nodes[c].op.clone() {
                    Op::Val(v) if v >= 0.0 => {
                        self.val(if v == 0.0 { 0.0 } else { -v * v.ln() })
                    }
                    _ => self.add(Op::Entropy, vec![c]),
                }
            }
            Op::Sin => {
                let c = simplified[0];
                match self.nodes[c].op.clone() {
                    Op::Val(v) => self.val(v.sin()),
                    _ => self.add(Op::Sin, vec![c]),
                }
            }
            Op::Cos => {
                let c = simplified[0];
                match self.nodes[c].op.clone() {
                    Op::Val(v) => self.val(v.cos()),
                    _ => self.add(Op::Cos, vec![c]),
                }
            }
            Op::Abs => {
                let c = simplified[0];
                match self.nodes[c].op.clone() {
                    Op::Val(v) => self.val(v.abs()),
                    Op::Abs => c,
                    _ => {
                        if self.nonneg(c, vars) {
                            c
                        } else {
                            self.add(Op::Abs, vec![c])
                        }
                    }
                }
            }
        };
        memo.insert(id, result);
        result
    }

    /// Canonical sum from already-simplified terms: flattens nested sums,
    /// folds constants, pulls product coefficients, merges duplicates, sorts.
    pub fn make_sum(&mut self, constant: f64, terms: Vec<(f64, NodeId)>) -> NodeId {
        let mut c0 = constant;
        let mut flat: Vec<(f64, NodeId)> = Vec::new();
        for (a, ch) in terms {
            if a == 0.0 {
                continue;
            }
            let op = self.nodes[ch].op.clone();
            match op {
                Op::Val(v) => c0 += a * v,
                Op::Sum {
                    constant: c2,
                    coefs,
                } => {
                    c0 += a * c2;
                    let kids = self.nodes[ch].children.clone();
                    for (b, gch) in coefs.into_iter().zip(kids) {
                        flat.push((a * b, gch));
                    }
                }
                Op::Prod { coef } if coef != 1.0 => {
                    let kids = self.nodes[ch].children.clone();
                    let inner = self.make_prod(1.0, kids);
                    flat.push((a * coef, inner));
                }
                _ => flat.push((a, ch)),
            }
        }
        flat.sort_by(|x, y| self.compare(x.1, y.1));
        let mut merged: Vec<(f64, NodeId)> = Vec::new();
        for (a, ch) in flat {
            if let Some(last) = merged.last_mut() {
                if last.1 == ch {
                    last.0 += a;
                    continue;
                }
            }
            merged.push((a, ch));
        }
        merged.retain(|(a, _)| *a != 0.0);
        if merged.is_empty() {
            return self.val(c0);
        }
        if merged.len() == 1 && c0 == 0.0 && merged[0].0 == 1.0 {
            return merged[0].1;
        }
        self.sum(c0, merged)
    }

    /// Canonical product from already-simplified factors.
    pub fn make_prod(&mut self, coef: f64, factors: Vec<NodeId>) -> NodeId {
        let mut c = coef;
        let mut flat: Vec<NodeId> = Vec::new();
        for ch in factors {
            let op = self.nodes[ch].op.clone();
            match op {
                Op::Val(v) => c *= v,
                Op::Prod { coef: pc } => {
                    c *= pc;
                    let kids = self.nodes[ch].children.clone();
                    flat.extend(kids);
                }
                Op::Sum { constant, coefs } if constant == 0.0 && coefs.len() == 1 => {
                    c *= coefs[0];
                    flat.push(self.nodes[ch].children[0]);
                }
                _ => flat.push(ch),
            }
        }
        if c == 0.0 {
            return self.val(0.0);
        }
        flat.sort_by(|x, y| self.compare(*x, *y));
        // merge repeated factors into powers
        let mut merged: Vec<NodeId> = Vec::new();
        let mut i = 0;
        while i < flat.len() {
            let mut j = i + 1;
            while j < flat.len() && flat[j] == flat[i] {
                j += 1;
            }
            let count = j - i;
            if count == 1 {
                merged.push(flat[i]);
            } else {
                let p = self.add(
                    Op::Pow {
                        exponent: count as f64,
                    },
                    vec![flat[i]],
                );
                merged.push(p);
            }
            i = j;
        }
        if merged.is_empty() {
            return self.val(c);
        }
        if merged.len() == 1 {
            if c == 1.0 {
                return merged[0];
            }
            return self.sum(0.0, vec![(c, merged[0])]);
        }
        merged.sort_by(|x, y| self.compare(*x, *y));
        if c == 1.0 {
            self.prod(1.0, merged)
        } else {
            self.prod(c, merged)
        }
    }

    /// Canonical power with constant folding and nested-power collapsing.
    pub fn make_pow(&mut self, base: NodeId, p: f64, vars: &[Var]) -> NodeId {
        if p == 0.0 {
            return self.val(1.0);
        }
        if p == 1.0 {
            return base;
        }
        let base_op = self.nodes[base].op.clone();
        if let Op::Val(v) = base_op {
            let folded = if p.fract() == 0.0 {
                if p < 0.0 && v == 0.0 {
                    f64::NAN
                } else {
                    v.powi(p as i32)
                }
            } else if v >= 0.0 {
                v.powf(p)
            } else {
                f64::NAN
            };
            if folded.is_finite() {
                return self.val(folded);
            }
        }
        if let Op::Pow { exponent: q } = base_op {
            let inner = self.nodes[base].children[0];
            let both_int = p.fract() == 0.0 && q.fract() == 0.0;
            if both_int || self.nonneg(inner, vars) {
                return self.make_pow(inner, p * q, vars);
            }
        }
        if let Op::Abs = base_op {
            if p.fract() == 0.0 && (p as i64) % 2 == 0 {
                let inner = self.nodes[base].children[0];
                return self.make_pow(inner, p, vars);
            }
        }
        self.add(Op::Pow { exponent: p }, vec![base])
    }

    /// Syntactic nonnegativity certificate (no interval evaluation).
    fn nonneg(&self, id: NodeId, vars: &[Var]) -> bool {
        match &self.nodes[id].op {
            Op::Val(v) => *v >= 0.0,
            Op::Var(i) => vars[*i].lb >= 0.0,
            Op::Exp | Op::Abs => true,
            Op::Pow { exponent } => {
                (exponent.fract() == 0.0 && (*exponent as i64) % 2 == 0)
                    || self.nonneg(self.nodes[id].children[0], vars)
            }
            _ => false,
        }
    }

    /// Copy the subgraphs of `roots` into a fresh graph, dropping garbage
    /// left behind by simplification; shared subexpressions keep one node.
    pub fn gc(&self, roots: &[NodeId]) -> (ExprGraph, Vec<NodeId>) {
        let mut fresh = ExprGraph::new();
        let mut map: HashMap<NodeId, NodeId> = HashMap::new();
        let mut mapped_roots = Vec::with_capacity(roots.len());
        for &r in roots {
            mapped_roots.push(self.gc_rec(r, &mut fresh, &mut map));
        }
        (fresh, mapped_roots)
    }

    fn gc_rec(&self, id: NodeId, fresh: &mut ExprGraph, map: &mut HashMap<NodeId, NodeId>) -> NodeId {
        if let Some(&m) = map.get(&id) {
            return m;
        }
        let children: Vec<NodeId> = self.nodes[id]
            .children
            .iter()
            .map(|&c| self.gc_rec(c, fresh, map))
            .collect();
        let nid = fresh.add(self.nodes[id].op.clone(), children);
        map.insert(id, nid);
        nid
    }
}
