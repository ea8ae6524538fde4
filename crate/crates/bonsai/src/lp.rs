//! Dense bounded-variable primal simplex.
//!
//! Solves min c·x subject to row sides L ≤ Ax ≤ U and column bounds
//! l ≤ x ≤ u, via slack columns (Ax − s = 0, s ∈ [L,U]). Two phases: a
//! composite infeasibility minimization drives out-of-bound basics to
//! their bounds, then the true objective is optimized. The basis inverse
//! is kept explicitly and refreshed periodically; Bland's rule takes over
//! after a run of degenerate pivots.

use crate::INF;

#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    pub ncols: usize,
    pub obj: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    pub col_lo: Vec<f64>,
    pub col_hi: Vec<f64>,
}

impl LpProblem {
    pub fn new(ncols: usize) -> LpProblem {
        LpProblem {
            ncols,
            obj: vec![0.0; ncols],
            rows: Vec::new(),
            row_lo: Vec::new(),
            row_hi: Vec::new(),
            col_lo: vec![-INF; ncols],
            col_hi: vec![INF; ncols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, coefs: Vec<f64>, lo: f64, hi: f64) -> usize {
        assert_eq!(coefs.len(), self.ncols);
        self.rows.push(coefs);
        self.row_lo.push(lo);
        self.row_hi.push(hi);
        self.rows.len() - 1
    }

    /// Margin by which a row combination `y` proves infeasibility:
    /// min over the box of (yᵀA)x minus max over the row sides of yᵀs.
    /// A positive value is a valid certificate. Combination coefficients
    /// that are rounding dust (relative to the scale of `y` and the
    /// column) are treated as zero so they cannot be amplified by
    /// infinite bounds.
    pub fn farkas_gap(&self, y: &[f64]) -> f64 {
        let yscale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut lhs = 0.0;
        for j in 0..self.ncols {
            let mut c = 0.0;
            let mut amax = 0.0f64;
            for r in 0..self.nrows() {
                c += y[r] * self.rows[r][j];
                amax = amax.max(self.rows[r][j].abs());
            }
            if c.abs() <= 1e-9 * yscale * amax.max(1.0) {
                continue;
            }
            lhs += if c > 0.0 {
                c * self.col_lo[j]
            } else {
                c * self.col_hi[j]
            };
        }
        let mut rhs = 0.0;
        for r in 0..self.nrows() {
            if y[r] > 0.0 {
                rhs += y[r] * self.row_hi[r];
            } else if y[r] < 0.0 {
                rhs += y[r] * self.row_lo[r];
            }
        }
        lhs - rhs
    }

    /// entry r of column j in the slack-extended system [A | −I]
    fn a(&self, r: usize, j: usize) -> f64 {
        if j < self.ncols {
            self.rows[r][j]
        } else if j - self.ncols == r {
            -1.0
        } else {
            0.0
        }
    }

    fn lo(&self, j: usize) -> f64 {
        if j < self.ncols {
            self.col_lo[j]
        } else {
            self.row_lo[j - self.ncols]
        }
    }

    fn hi(&self, j: usize) -> f64 {
        if j < self.ncols {
            self.col_hi[j]
        } else {
            self.row_hi[j - self.ncols]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColStatus {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Clone, Debug)]
pub struct Basis {
    pub status: Vec<ColStatus>,
}

#[derive(Clone, Debug)]
pub enum LpResult {
    Optimal {
        x: Vec<f64>,
        obj: f64,
        /// one multiplier per row; positive when the row is tight at its
        /// lower side, negative at the upper side
        dual_rows: Vec<f64>,
        /// reduced costs of the structural columns
        reduced_costs: Vec<f64>,
        basis: Basis,
    },
    /// row combination y with min_{x∈box} (yᵀA)x > max_{s∈[L,U]} yᵀs
    Infeasible { farkas: Vec<f64> },
    /// improving feasible direction (structural part)
    Unbounded { ray: Vec<f64> },
    IterationLimit,
}

const REFACTOR_EVERY: u64 = 64;
const DEGEN_BLAND: u32 = 50;

struct Simplex<'a> {
    p: &'a LpProblem,
    n: usize,
    m: usize,
    tol: f64,
    status: Vec<ColStatus>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    x: Vec<f64>,
    pivots: u64,
    degen_run: u32,
}

impl<'a> Simplex<'a> {
    fn new(p: &'a LpProblem, tol: f64) -> Simplex<'a> {
        let n = p.ncols;
        let m = p.nrows();
        Simplex {
            p,
            n,
            m,
            tol,
            status: Vec::new(),
            basis: Vec::new(),
            binv: vec![0.0; m * m],
            x: vec![0.0; n + m],
            pivots: 0,
            degen_run: 0,
        }
    }

    fn cold_status(&self) -> Vec<ColStatus> {
        let mut st = Vec::with_capacity(self.n + self.m);
        for j in 0..self.n {
            if self.p.lo(j) > -INF {
                st.push(ColStatus::AtLower);
            } else if self.p.hi(j) < INF {
                st.push(ColStatus::AtUpper);
            } else {
                st.push(ColStatus::AtLower); // free column rides at zero
            }
        }
        for _ in 0..self.m {
            st.push(ColStatus::Basic);
        }
        st
    }

    fn install(&mut self, status: Vec<ColStatus>) -> bool {
        let basis: Vec<usize> = (0..self.n + self.m)
            .filter(|&j| status[j] == ColStatus::Basic)
            .collect();
        if basis.len() != self.m {
            return false;
        }
        self.status = status;
        self.basis = basis;
        self.refactor()
    }

    /// rebuild the explicit basis inverse by Gauss-Jordan with partial
    /// pivoting; false on a singular basis
    fn refactor(&mut self) -> bool {
        let m = self.m;
        if m == 0 {
            return true;
        }
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for r in 0..m {
                a[r * m + k] = self.p.a(r, j);
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut piv = c;
            for r in c + 1..m {
                if a[r * m + c].abs() > a[piv * m + c].abs() {
                    piv = r;
                }
            }
            if a[piv * m + c].abs() < 1e-12 {
                return false;
            }
            if piv != c {
                for k in 0..m {
                    a.swap(c * m + k, piv * m + k);
                    inv.swap(c * m + k, piv * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        // binv maps (column-of-basis index) via rows: binv = B⁻¹ with
        // basis order along columns of B; B⁻¹ rows correspond to basis slots
        self.binv = inv;
        true
    }

    fn nb_value(&self, j: usize) -> f64 {
        match self.status[j] {
            ColStatus::AtLower => {
                let lo = self.p.lo(j);
                if lo > -INF {
                    lo
                } else {
                    0.0
                }
            }
            ColStatus::AtUpper => self.p.hi(j),
            ColStatus::Basic => unreachable!(),
        }
    }

    /// basic values from nonbasic assignment: x_B = B⁻¹(−N x_N)
    fn compute_x(&mut self) {
        for j in 0..self.n + self.m {
            if self.status[j] != ColStatus::Basic {
                self.x[j] = self.nb_value(j);
            }
        }
        if self.m == 0 {
            return;
        }
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == ColStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for r in 0..self.m {
                    rhs[r] -= self.p.rows[r][j] * v;
                }
            } else {
                rhs[j - self.n] += v;
            }
        }
        for (k, &j) in self.basis.iter().enumerate() {
            let mut s = 0.0;
            for r in 0..self.m {
                s += self.binv[k * self.m + r] * rhs[r];
            }
            self.x[j] = s;
        }
    }

    fn duals(&self, costs: &[f64]) -> Vec<f64> {
        let mut pi = vec![0.0; self.m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = costs[j];
            if c != 0.0 {
                for r in 0..self.m {
                    pi[r] += c * self.binv[k * self.m + r];
                }
            }
        }
        pi
    }

    fn reduced(&self, j: usize, pi: &[f64], costs: &[f64]) -> f64 {
        let mut d = costs[j];
        if j < self.n {
            for r in 0..self.m {
                if pi[r] != 0.0 {
                    d -= pi[r] * self.p.rows[r][j];
                }
            }
        } else {
            d += pi[j - self.n];
        }
        d
    }

    /// phase-1 costs: unit penalty on out-of-bound basics; None when the
    /// basic solution is feasible
    fn phase1_costs(&self) -> Option<Vec<f64>> {
        let mut costs = vec![0.0; self.n + self.m];
        let mut any = false;
        for &j in &self.basis {
            let v = self.x[j];
            if v < self.p.lo(j) - self.tol {
                costs[j] = -1.0;
                any = true;
            } else if v > self.p.hi(j) + self.tol {
                costs[j] = 1.0;
                any = true;
            }
        }
        if any {
            Some(costs)
        } else {
            None
        }
    }

    fn entering(&self, pi: &[f64], costs: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None; // (col, d, score)
        for j in 0..self.n + self.m {
            if self.status[j] == ColStatus::Basic {
                continue;
            }
            let lo = self.p.lo(j);
            let hi = self.p.hi(j);
            if lo == hi {
                continue;
            }
            let d = self.reduced(j, pi, costs);
            let free = lo <= -INF && hi >= INF;
            let viol = match self.status[j] {
                ColStatus::AtLower => {
                    if d < -self.tol {
                        -d
                    } else if free && d > self.tol {
                        d
                    } else {
                        continue;
                    }
                }
                ColStatus::AtUpper => {
                    if d > self.tol {
                        d
                    } else {
                        continue;
                    }
                }
                ColStatus::Basic => unreachable!(),
            };
            if bland {
                return Some((j, d));
            }
            match best {
                Some((_, _, s)) if s >= viol => {}
                _ => best = Some((j, d, viol)),
            }
        }
        best.map(|(j, d, _)| (j, d))
    }

    /// B⁻¹ a_q, in basis-slot order
    fn ftran(&self, q: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        if q < self.n {
            for k in 0..self.m {
                let mut s = 0.0;
                for r in 0..self.m {
                    s += self.binv[k * self.m + r] * self.p.rows[r][q];
                }
                w[k] = s;
            }
        } else {
            let r = q - self.n;
            for k in 0..self.m {
                w[k] = -self.binv[k * self.m + r];
            }
        }
        w
    }

    /// update binv after basis slot `slot` is replaced by a column with
    /// tableau vector w
    fn update_binv(&mut self, slot: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[slot];
        for r in 0..m {
            self.binv[slot * m + r] /= piv;
        }
        for k in 0..m {
            if k != slot && w[k] != 0.0 {
                let f = w[k];
                for r in 0..m {
                    self.binv[k * m + r] -= f * self.binv[slot * m + r];
                }
            }
        }
    }

    fn solve(&mut self, warm: Option<&Basis>) -> LpResult {
        let installed = match warm {
            Some(b) if b.status.len() <= self.n + self.m => {
                let mut st = b.status.clone();
                // statuses for columns appended since the snapshot: new
                // structural columns rest at a bound, new slacks go basic
                while st.len() < self.n {
                    let j = st.len();
                    st.push(if self.p.lo(j) > -INF || self.p.hi(j) >= INF {
                        ColStatus::AtLower
                    } else {
                        ColStatus::AtUpper
                    });
                }
                while st.len() < self.n + self.m {
                    st.push(ColStatus::Basic);
                }
                self.install(st)
            }
            _ => false,
        };
        if !installed && !self.install(self.cold_status()) {
            // singular even from scratch: give up loudly
            return LpResult::IterationLimit;
        }
        let limit = 10 * ((self.m + self.n) as u64 + 1).pow(2);
        loop {
            if self.pivots > limit {
                return LpResult::IterationLimit;
            }
            if self.pivots % REFACTOR_EVERY == REFACTOR_EVERY - 1 && !self.refactor() {
                return LpResult::IterationLimit;
            }
            self.compute_x();
            let phase1 = self.phase1_costs();
            let costs: Vec<f64> = match &phase1 {
                Some(c) => c.clone(),
                None => {
                    let mut c = self.p.obj.clone();
                    c.resize(self.n + self.m, 0.0);
                    c
                }
            };
            let pi = self.duals(&costs);
            let bland = self.degen_run >= DEGEN_BLAND;
            let (q, dq) = match self.entering(&pi, &costs, bland) {
                Some(e) => e,
                None => {
                    if phase1.is_some() {
                        return LpResult::Infeasible {
                            farkas: self.farkas(&pi),
                        };
                    }
                    let x = self.x[..self.n].to_vec();
                    let obj = self
                        .p
                        .obj
                        .iter()
                        .zip(&x)
                        .map(|(c, v)| c * v)
                        .sum::<f64>();
                    let reduced_costs =
                        (0..self.n).map(|j| self.reduced(j, &pi, &costs)).collect();
                    return LpResult::Optimal {
                        x,
                        obj,
                        dual_rows: pi,
                        reduced_costs,
                        basis: Basis {
                            status: self.status.clone(),
                        },
                    };
                }
            };
            let sigma: f64 = if dq < 0.0 { 1.0 } else { -1.0 };
            let w = self.ftran(q);
            // ratio test; entering may also simply flip to its other bound
            let span = self.p.hi(q) - self.p.lo(q);
            let mut best_delta = if span < INF { span } else { INF };
            let mut leave: Option<(usize, ColStatus)> = None; // basis slot
            let infeasible_phase = phase1.is_some();
            for k in 0..self.m {
                let step = -sigma * w[k]; // change of basic k per unit
                if step.abs() < 1e-11 {
                    continue;
                }
                let j = self.basis[k];
                let v = self.x[j];
                let lo = self.p.lo(j);
                let hi = self.p.hi(j);
                let (target, stat) = if step > 0.0 {
                    // moving up: an under-lower basic has its breakpoint at
                    // the lower bound; an above-upper basic worsens linearly
                    // (slope already in the penalty) and never blocks
                    if infeasible_phase && v < lo - self.tol {
                        (lo, ColStatus::AtLower)
                    } else if infeasible_phase && v > hi + self.tol {
                        continue;
                    } else if hi < INF {
                        (hi, ColStatus::AtUpper)
                    } else {
                        continue;
                    }
                } else if infeasible_phase && v > hi + self.tol {
                    (hi, ColStatus::AtUpper)
                } else if infeasible_phase && v < lo - self.tol {
                    continue;
                } else if lo > -INF {
                    (lo, ColStatus::AtLower)
                } else {
                    continue;
                };
                let ratio = ((target - v) / step).max(0.0);
                let better = match leave {
                    None => ratio < best_delta - 1e-12,
                    Some((cur, _)) => {
                        ratio < best_delta - 1e-12
                            || (ratio < best_delta + 1e-12
                                && if bland {
                                    self.basis[k] < self.basis[cur]
                                } else {
                                    w[k].abs() > w[cur].abs()
                                })
                    }
                };
                if better {
                    best_delta = best_delta.min(ratio);
                    leave = Some((k, stat));
                }
            }
            self.pivots += 1;
            match leave {
                None => {
                    if best_delta >= INF {
                        if infeasible_phase {
                            // cannot happen for a bounded penalty; treat as
                            // numerical failure
                            return LpResult::IterationLimit;
                        }
                        let mut ray = vec![0.0; self.n];
                        if q < self.n {
                            ray[q] = sigma;
                        }
                        for (k, &j) in self.basis.iter().enumerate() {
                            if j < self.n {
                                ray[j] = -sigma * w[k];
                            }
                        }
                        return LpResult::Unbounded { ray };
                    }
                    // bound flip
                    self.degen_run = if best_delta <= 1e-11 {
                        self.degen_run + 1
                    } else {
                        0
                    };
                    self.status[q] = match self.status[q] {
                        ColStatus::AtLower => ColStatus::AtUpper,
                        ColStatus::AtUpper => ColStatus::AtLower,
                        ColStatus::Basic => unreachable!(),
                    };
                }
                Some((slot, stat)) => {
                    if w[slot].abs() < 1e-9 && !self.refactor() {
                        return LpResult::IterationLimit;
                    }
                    self.degen_run = if best_delta <= 1e-11 {
                        self.degen_run + 1
                    } else {
                        0
                    };
                    let leaving = self.basis[slot];
                    self.status[leaving] = stat;
                    self.status[q] = ColStatus::Basic;
                    self.basis[slot] = q;
                    self.update_binv(slot, &w);
                }
            }
        }
    }

    /// pick the sign of the phase-1 duals that certifies infeasibility;
    /// numerical dust is dropped first so a 1e-16 component cannot poison
    /// the evaluation through an infinite bound
    fn farkas(&self, pi: &[f64]) -> Vec<f64> {
        let scale = pi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let pi: Vec<f64> = pi
            .iter()
            .map(|&v| if v.abs() < 1e-10 * scale { 0.0 } else { v })
            .collect();
        let pi = &pi[..];
        let neg: Vec<f64> = pi.iter().map(|v| -v).collect();
        if self.p.farkas_gap(&neg) > self.p.farkas_gap(pi) {
            neg
        } else {
            pi.to_vec()
        }
    }
}

/// Solve an LP, optionally warm-starting from a previous basis snapshot.
pub fn solve(p: &LpProblem, warm: Option<&Basis>, tol: f64) -> LpResult {
    debug_assert!(p
        .col_lo
        .iter()
        .zip(&p.col_hi)
        .all(|(l, u)| l <= u));
    let mut s = Simplex::new(p, tol);
    s.solve(warm)
}

/// number of pivots a solve took (for warm-start regressions)
pub fn solve_counting(p: &LpProblem, warm: Option<&Basis>, tol: f64) -> (LpResult, u64) {
    let mut s = Simplex::new(p, tol);
    let r = s.solve(warm);
    (r, s.pivots)
}
