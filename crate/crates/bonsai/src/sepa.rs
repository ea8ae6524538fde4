//! Cut container with numerics cleanup, the strong-cut acceptance test, and
//! a global cut pool.
//!
//! Cuts are prepared as one-sided linear rows. Before a row is handed to the
//! LP it passes a cleanup pipeline that (1) reduces the coefficient range by
//! substituting variable bounds, (2) rescales by an exact power of two,
//! (3) moves coefficients off near-integer values by bound-compensated
//! relaxation instead of silent rounding, and (4) lifts a right-hand side
//! out of the rounding dust near zero. Every relaxation is recorded so the
//! caller can register the bounds it leaned on as branching candidates.

use crate::interval::Interval;
use std::collections::BTreeMap;

/// Fraction of the convexification gap a cut must close to count as strong.
pub const WEAK_CUT_THRESHOLD: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// activity ≤ side
    Le,
    /// activity ≥ side
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validity {
    Global,
    Local,
}

/// A linear cut under preparation: sparse coefficients over columns, one
/// side, provenance, and the record of which variable bounds relaxed it.
#[derive(Clone, Debug)]
pub struct RowPrep {
    pub coefs: BTreeMap<usize, f64>,
    pub side: f64,
    pub side_type: Side,
    pub validity: Validity,
    /// constraint the cut enforces, when tied to one
    pub con: Option<usize>,
    /// name of the producing handler or separator
    pub handler: &'static str,
    /// violation of the underlying nonlinear relation at the reference point
    /// when the cut was created; the strong-cut test measures the fraction
    /// of it the cut closes
    pub gap: f64,
    /// columns whose bounds were substituted into the row during cleanup
    pub bounds_used: Vec<usize>,
}

impl RowPrep {
    pub fn new(side_type: Side, handler: &'static str) -> RowPrep {
        RowPrep {
            coefs: BTreeMap::new(),
            side: 0.0,
            side_type,
            validity: Validity::Global,
            con: None,
            handler,
            gap: 0.0,
            bounds_used: Vec::new(),
        }
    }

    /// Accumulate `a` onto the coefficient of `col`.
    pub fn add(&mut self, col: usize, a: f64) {
        if a == 0.0 {
            return;
        }
        let e = self.coefs.entry(col).or_insert(0.0);
        *e += a;
        if *e == 0.0 {
            self.coefs.remove(&col);
        }
    }

    pub fn activity(&self, point: &[f64]) -> f64 {
        self.coefs.iter().map(|(&j, &a)| a * point[j]).sum()
    }

    /// Amount by which `point` violates the row; positive means cut off.
    pub fn violation(&self, point: &[f64]) -> f64 {
        match self.side_type {
            Side::Le => self.activity(point) - self.side,
            Side::Ge => self.side - self.activity(point),
        }
    }

    /// Violation divided by the Euclidean norm of the coefficient vector.
    pub fn efficacy(&self, point: &[f64]) -> f64 {
        let norm = self.coefs.values().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            self.violation(point)
        } else {
            self.violation(point) / norm
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rejection {
    /// a needed finite variable bound was not available
    NoBound,
    /// the relaxed row is no longer violated enough at the reference point
    LostViolation,
    /// the row no longer closes enough of the recorded gap
    Weak,
}

/// Cleanup configuration. `separation` builds the strong-cut profile used
/// during plain separation; `enforcement` builds the rescue profile used
/// when a violated constraint must be resolved.
#[derive(Clone, Copy, Debug)]
pub struct Cleanup {
    /// largest allowed ratio between the extreme nonzero |coefficients|
    pub max_coef_ratio: f64,
    /// separation mode scales the largest |coefficient| into
    /// [1/strong_max_coef, strong_max_coef]
    pub strong_max_coef: f64,
    /// integer-snap distance and right-hand-side dust threshold
    pub epsilon: f64,
    /// fraction of the recorded gap that must remain closed; 0 disables the
    /// strong screen
    pub weak_threshold: f64,
    /// enforcement mode: scale weak violations up toward `min_efficacy`,
    /// cap coefficients at 10/feastol instead of the strong window, and
    /// require the violation to dominate floating-point roundoff
    pub enforcement: bool,
    pub min_efficacy: f64,
    pub feastol: f64,
}

impl Cleanup {
    pub fn separation() -> Cleanup {
        Cleanup {
            max_coef_ratio: 1e7,
            strong_max_coef: 1e4,
            epsilon: 1e-9,
            weak_threshold: WEAK_CUT_THRESHOLD,
            enforcement: false,
            min_efficacy: 1e-4,
            feastol: 1e-6,
        }
    }

    pub fn enforcement(feastol: f64) -> Cleanup {
        Cleanup {
            weak_threshold: 0.0,
            enforcement: true,
            feastol,
            ..Cleanup::separation()
        }
    }
}

impl Default for Cleanup {
    fn default() -> Cleanup {
        Cleanup::separation()
    }
}

/// Clean one row. `bounds` and `point` are indexed by column; the reference
/// point is the one the cut is meant to separate. The result satisfies the
/// coefficient-range, scaling, integer-distance, and side invariants, or the
/// row is rejected with the reason.
pub fn cleanup(
    r: &RowPrep,
    bounds: &[Interval],
    point: &[f64],
    min_violation: f64,
    cfg: &Cleanup,
) -> Result<RowPrep, Rejection> {
    // canonicalize to activity ≤ side; mirrored back on exit
    let flip = r.side_type == Side::Ge;
    let s = if flip { -1.0 } else { 1.0 };
    let mut coefs: BTreeMap<usize, f64> = r
        .coefs
        .iter()
        .filter(|(_, &a)| a != 0.0)
        .map(|(&j, &a)| (j, s * a))
        .collect();
    let mut side = s * r.side;
    let mut used = r.bounds_used.clone();
    let mut validity = r.validity;

    // the lower bound supports positive coefficients of a ≤ row, the upper
    // bound negative ones
    let support = |j: usize, a: f64| -> Option<f64> {
        let b = if a > 0.0 { bounds[j].lo } else { bounds[j].hi };
        (b.abs() < crate::INF).then_some(b)
    };

    // 1. coefficient-range reduction by eliminating an extreme term against
    // its supporting bound
    loop {
        if coefs.len() <= 1 {
            break;
        }
        let (&jmax, &amax) = coefs
            .iter()
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .unwrap();
        let (&jmin, &amin) = coefs
            .iter()
            .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .unwrap();
        if amax.abs() <= cfg.max_coef_ratio * amin.abs() {
            break;
        }
        // violation lost at the reference point by eliminating each
        // candidate; an infinite bound rules a candidate out
        let cand = [(jmax, amax), (jmin, amin)];
        let mut pick: Option<(usize, f64, f64, f64)> = None;
        for &(j, a) in &cand {
            let Some(b) = support(j, a) else { continue };
            let loss = a * (point[j] - b);
            let better = match pick {
                None => true,
                Some((_, pa, _, ploss)) => {
                    loss < ploss || (loss == ploss && a.abs() > pa.abs())
                }
            };
            if better {
                pick = Some((j, a, b, loss));
            }
        }
        let Some((j, a, b, _)) = pick else {
            return Err(Rejection::NoBound);
        };
        side -= a * b;
        coefs.remove(&j);
        used.push(j);
        validity = Validity::Local;
    }

    // 2. rescaling by an exact power of two
    let maxabs = |m: &BTreeMap<usize, f64>| m.values().fold(0.0f64, |acc, a| acc.max(a.abs()));
    let scale_all = |m: &mut BTreeMap<usize, f64>, side: &mut f64, p: i32| {
        let f = 2f64.powi(p);
        for a in m.values_mut() {
            *a *= f;
        }
        *side *= f;
    };
    let viol_of = |m: &BTreeMap<usize, f64>, side: f64| -> f64 {
        m.iter().map(|(&j, &a)| a * point[j]).sum::<f64>() - side
    };
    if !coefs.is_empty() {
        if cfg.enforcement {
            let cap = 10.0 / cfg.feastol;
            let viol = viol_of(&coefs, side);
            if viol >= 10.0 * cfg.epsilon && viol <= min_violation {
                // rescue a barely violated row: scale up toward the
                // efficacy target, staying under the coefficient cap
                let p_target = (cfg.min_efficacy / viol).log2().ceil() as i32;
                let p_cap = (cap / maxabs(&coefs)).log2().floor() as i32;
                let p = p_target.min(p_cap);
                if p > 0 {
                    scale_all(&mut coefs, &mut side, p);
                }
            }
            let a1 = maxabs(&coefs);
            if a1 > cap {
                let p = -((a1 / cap).log2().ceil() as i32);
                if viol_of(&coefs, side) * 2f64.powi(p) >= min_violation {
                    scale_all(&mut coefs, &mut side, p);
                }
            }
        } else {
            let a1 = maxabs(&coefs);
            let (lo, hi) = (1.0 / cfg.strong_max_coef, cfg.strong_max_coef);
            if a1 > hi {
                scale_all(&mut coefs, &mut side, -((a1 / hi).log2().ceil() as i32));
            } else if a1 < lo {
                scale_all(&mut coefs, &mut side, (lo / a1).log2().ceil() as i32);
            }
        }
    }

    // 3. move near-integer coefficients onto the integer, compensating
    // through the side so the row is relaxed, never tightened
    let snap: Vec<(usize, f64)> = coefs
        .iter()
        .filter_map(|(&j, &a)| {
            let r = a.round();
            let d = r - a;
            (d != 0.0 && d.abs() <= cfg.epsilon).then_some((j, a))
        })
        .collect();
    for (j, a) in snap {
        let r = a.round();
        let d = r - a;
        let b = if d > 0.0 { bounds[j].hi } else { bounds[j].lo };
        if b.abs() >= crate::INF {
            return Err(Rejection::NoBound);
        }
        coefs.insert(j, r);
        side += d * b;
        used.push(j);
        validity = Validity::Local;
    }

    // 4. lift the side out of the dust around zero
    if side >= -cfg.epsilon && side <= 0.0 {
        side = 0.0;
    } else if side > 0.0 && side <= cfg.epsilon {
        side = 1.1e-9;
    }

    let viol = viol_of(&coefs, side);
    if cfg.enforcement {
        let guard = coefs
            .iter()
            .map(|(&j, &a)| (a * point[j]).abs())
            .fold(side.abs(), f64::max);
        if viol < guard * 2f64.powi(-50) {
            return Err(Rejection::LostViolation);
        }
    }
    if viol < min_violation {
        return Err(Rejection::LostViolation);
    }
    if cfg.weak_threshold > 0.0 && r.gap > 0.0 && viol < cfg.weak_threshold * r.gap {
        return Err(Rejection::Weak);
    }

    Ok(RowPrep {
        coefs: coefs.into_iter().map(|(j, a)| (j, s * a)).collect(),
        side: s * side,
        side_type: r.side_type,
        validity,
        con: r.con,
        handler: r.handler,
        gap: r.gap,
        bounds_used: used,
    })
}

/// Strong-cut test: the estimator must close at least `WEAK_CUT_THRESHOLD`
/// of the gap between the function value and the relaxation value at the
/// reference point. `estimator_value` and `function_value` are the
/// estimator and the estimated function evaluated at `point`.
pub fn is_strong(r: &RowPrep, point: &[f64], estimator_value: f64, function_value: f64) -> bool {
    let v = r.violation(point);
    // relaxation value currently held by the point: estimator minus the
    // part the cut would remove
    let gap = function_value - (estimator_value - v);
    if gap <= 0.0 {
        return true;
    }
    v >= WEAK_CUT_THRESHOLD * gap
}

/// Counters for the separation statistics table.
#[derive(Clone, Copy, Debug, Default)]
pub struct SepaStats {
    pub created: usize,
    pub cleaned: usize,
    pub rejected_no_bound: usize,
    pub rejected_lost_violation: usize,
    pub rejected_weak: usize,
}

impl SepaStats {
    pub fn note(&mut self, outcome: &Result<RowPrep, Rejection>) {
        self.created += 1;
        match outcome {
            Ok(_) => self.cleaned += 1,
            Err(Rejection::NoBound) => self.rejected_no_bound += 1,
            Err(Rejection::LostViolation) => self.rejected_lost_violation += 1,
            Err(Rejection::Weak) => self.rejected_weak += 1,
        }
    }
}

/// Pool of globally valid rows, kept across nodes.
#[derive(Default)]
pub struct CutPool {
    pub rows: Vec<RowPrep>,
}

impl CutPool {
    pub fn new() -> CutPool {
        CutPool::default()
    }

    /// Add a row; locally valid rows and exact duplicates are skipped.
    pub fn add(&mut self, r: RowPrep) -> bool {
        if r.validity != Validity::Global {
            return false;
        }
        if self
            .rows
            .iter()
            .any(|q| q.side_type == r.side_type && q.side == r.side && q.coefs == r.coefs)
        {
            return false;
        }
        self.rows.push(r);
        true
    }

    /// Indices of rows violated by at least `tol` at `point`.
    pub fn violated(&self, point: &[f64], tol: f64) -> Vec<usize> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].violation(point) > tol)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi)
    }

    fn le_row(coefs: &[(usize, f64)], side: f64) -> RowPrep {
        let mut r = RowPrep::new(Side::Le, "test");
        for &(j, a) in coefs {
            r.add(j, a);
        }
        r.side = side;
        r
    }

    #[test]
    fn ratio_elimination_follows_the_bound_substitution_example() {
        // 1e8·x0 + 1·x1 ≤ 5 with x0 unbounded below and x1 ∈ [0,1]: only the
        // small term can be eliminated, against x1 ≥ 0; the survivor is then
        // scaled by 2^-14 into the strong window.
        let r = le_row(&[(0, 1e8), (1, 1.0)], 5.0);
        let bounds = [iv(-crate::INF, crate::INF), iv(0.0, 1.0)];
        let point = [1e-6, 0.5];
        let c = cleanup(&r, &bounds, &point, 1e-6, &Cleanup::separation()).unwrap();
        let f = 2f64.powi(-14);
        assert_eq!(c.coefs.len(), 1);
        assert_eq!(c.coefs[&0], 1e8 * f);
        assert!((c.coefs[&0] - 6103.515625).abs() < 1e-9);
        assert_eq!(c.side, 5.0 * f);
        assert!((c.side - 3.0517578125e-4).abs() < 1e-12);
        assert_eq!(c.bounds_used, vec![1]);
        assert_eq!(c.validity, Validity::Local);
    }

    #[test]
    fn elimination_prefers_the_smaller_violation_loss() {
        // both ends have finite supporting bounds; the big coefficient sits
        // right on its bound (zero loss) and is the cheaper elimination
        let r = le_row(&[(0, 1e8), (1, 1.0)], 5.0);
        let bounds = [iv(0.0, 1.0), iv(0.0, 1.0)];
        let point = [0.0, 0.5];
        let c = cleanup(&r, &bounds, &point, -1e9, &Cleanup::separation()).unwrap();
        assert!(c.coefs.contains_key(&1) && !c.coefs.contains_key(&0));
        assert_eq!(c.bounds_used, vec![0]);
    }

    #[test]
    fn unbounded_columns_reject_with_no_bound() {
        let r = le_row(&[(0, 1e8), (1, 1.0)], 5.0);
        let bounds = [iv(-crate::INF, crate::INF), iv(-crate::INF, crate::INF)];
        let point = [1.0, 1.0];
        assert_eq!(
            cleanup(&r, &bounds, &point, 1e-6, &Cleanup::separation()).unwrap_err(),
            Rejection::NoBound
        );
    }

    #[test]
    fn near_integer_coefficients_snap_with_side_compensation() {
        // coefficient just above 2: moving down to 2 leans on the lower
        // bound 0, so the side stays put
        let r = le_row(&[(0, 2.0 + 1e-10)], 1.0);
        let bounds = [iv(0.0, 3.0)];
        let point = [0.9];
        let c = cleanup(&r, &bounds, &point, 1e-6, &Cleanup::separation()).unwrap();
        assert_eq!(c.coefs[&0], 2.0);
        assert_eq!(c.side, 1.0);
        assert_eq!(c.bounds_used, vec![0]);
        assert_eq!(c.validity, Validity::Local);

        // coefficient just below 2: moving up to 2 leans on the upper bound
        // 3 and the side is compensated outward — never silently rounded
        let r = le_row(&[(0, 2.0 - 1e-10)], 1.0);
        let c = cleanup(&r, &bounds, &point, 1e-6, &Cleanup::separation()).unwrap();
        assert_eq!(c.coefs[&0], 2.0);
        assert!(c.side > 1.0);
        assert!((c.side - (1.0 + 3e-10)).abs() < 1e-16);
        // the relaxed row still admits everything the original admitted
        for i in 0..=30 {
            let x = 3.0 * i as f64 / 30.0;
            if (2.0 - 1e-10) * x <= 1.0 {
                assert!(2.0 * x <= c.side + 1e-15);
            }
        }
    }

    #[test]
    fn exact_integers_are_left_alone() {
        let r = le_row(&[(0, 2.0), (1, -3.0)], 0.5);
        let bounds = [iv(0.0, 1.0), iv(0.0, 1.0)];
        let point = [1.0, 0.0];
        let c = cleanup(&r, &bounds, &point, 1e-6, &Cleanup::separation()).unwrap();
        assert_eq!(c.coefs[&0], 2.0);
        assert_eq!(c.coefs[&1], -3.0);
        assert!(c.bounds_used.is_empty());
        assert_eq!(c.validity, Validity::Global);
    }

    #[test]
    fn dusty_rhs_is_relaxed_outward() {
        let r = le_row(&[(0, 1.0)], 5e-10);
        let bounds = [iv(-10.0, 10.0)];
        let c = cleanup(&r, &bounds, &[1.0], 1e-6, &Cleanup::separation()).unwrap();
        assert_eq!(c.side, 1.1e-9);

        let r = le_row(&[(0, 1.0)], -5e-10);
        let c = cleanup(&r, &bounds, &[1.0], 1e-6, &Cleanup::separation()).unwrap();
        assert_eq!(c.side, 0.0);
    }

    #[test]
    fn ge_rows_clean_through_the_mirror() {
        // x0 ≥ -5e-10 relaxes to x0 ≥ 0... the mirror of the dust rule:
        // canonical side -(-5e-10) ∈ (0, 1e-9] lifts to 1.1e-9
        let mut r = RowPrep::new(Side::Ge, "test");
        r.add(0, 1.0);
        r.side = 5e-10;
        let bounds = [iv(-10.0, 10.0)];
        let c = cleanup(&r, &bounds, &[-1.0], 1e-6, &Cleanup::separation()).unwrap();
        assert_eq!(c.side_type, Side::Ge);
        assert_eq!(c.side, 0.0);
        assert_eq!(c.coefs[&0], 1.0);
        assert!((c.violation(&[-1.0]) - 1.0).abs() < 1e-12);

        // mirrored ratio elimination keeps the row equivalent
        let mut r = RowPrep::new(Side::Ge, "test");
        r.add(0, 1e8);
        r.add(1, 1.0);
        r.side = 5.0;
        let bounds = [iv(-crate::INF, crate::INF), iv(0.0, 1.0)];
        // Ge row: positive coefficient is supported by the upper bound
        let c = cleanup(&r, &bounds, &[-1e-6, 0.5], 1e-6, &Cleanup::separation()).unwrap();
        assert_eq!(c.bounds_used, vec![1]);
        assert!(c.coefs[&0] > 0.0);
        assert!(c.violation(&[-1e-6, 0.5]) > 0.0);
    }

    #[test]
    fn cleanup_is_idempotent_on_its_output() {
        let rows = [
            le_row(&[(0, 1e8), (1, 1.0)], 5.0),
            le_row(&[(0, 2.0 + 1e-10), (1, 0.3)], 1.0),
            le_row(&[(0, 1.0)], 5e-10),
        ];
        let bounds = [iv(0.0, 3.0), iv(0.0, 1.0)];
        let point = [1e-6, 0.5];
        for r in rows {
            let c1 = cleanup(&r, &bounds, &point, -1e9, &Cleanup::separation()).unwrap();
            let c2 = cleanup(&c1, &bounds, &point, -1e9, &Cleanup::separation()).unwrap();
            assert_eq!(c1.coefs, c2.coefs);
            assert_eq!(c1.side, c2.side);
        }
    }

    #[test]
    fn cleanup_never_invalidates_sampled_cuts() {
        // random rows over random boxes: every point of the box satisfying
        // the original row must satisfy the cleaned row
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0usize;
        for _ in 0..120 {
            let n = rng.gen_range(1..5usize);
            let mut r = RowPrep::new(Side::Le, "test");
            for j in 0..n {
                let mag = 10f64.powf(rng.gen_range(-4.0..7.0));
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                r.add(j, sign * mag);
            }
            let bounds: Vec<Interval> = (0..n)
                .map(|_| {
                    let lo = rng.gen_range(-5.0..4.0);
                    Interval::new(lo, lo + rng.gen_range(0.1..5.0))
                })
                .collect();
            let point: Vec<f64> = bounds
                .iter()
                .map(|b| rng.gen_range(b.lo..=b.hi))
                .collect();
            r.side = r.activity(&point) - rng.gen_range(0.1..2.0);
            let Ok(c) = cleanup(&r, &bounds, &point, 0.0, &Cleanup::separation()) else {
                continue;
            };
            checked += 1;
            for _ in 0..40 {
                let x: Vec<f64> = bounds
                    .iter()
                    .map(|b| rng.gen_range(b.lo..=b.hi))
                    .collect();
                let tol = 1e-9 * (1.0 + c.side.abs());
                if r.violation(&x) <= 0.0 {
                    assert!(
                        c.violation(&x) <= tol,
                        "cleaned cut excludes a feasible point: {:?}",
                        x
                    );
                }
            }
        }
        assert!(checked >= 60, "too few cleanups survived: {}", checked);
    }

    #[test]
    fn strong_cut_requires_a_fifth_of_the_gap() {
        // cut x ≤ w; reference (x,w) = (1, 0.75), estimator value 1
        let mut r = RowPrep::new(Side::Le, "test");
        r.add(0, 1.0);
        r.add(1, -1.0);
        r.side = 0.0;
        let point = [1.0, 0.75];
        // function value 1.75: the gap is 1.0 and the cut closes 0.25 of it
        assert!(is_strong(&r, &point, 1.0, 1.75));
        // function value 3.25: the gap is 2.5, closed fraction 10%
        assert!(!is_strong(&r, &point, 1.0, 3.25));
        // supporting tangent of a convex function closes the whole gap
        assert!(is_strong(&r, &point, 1.0, 1.0));
    }

    #[test]
    fn weak_screen_rejects_in_cleanup() {
        let mut r = le_row(&[(0, 1.0), (1, -1.0)], 0.0);
        r.gap = 10.0; // cut closes 0.25 < 0.2·10
        let bounds = [iv(0.0, 2.0), iv(0.0, 2.0)];
        let point = [1.0, 0.75];
        assert_eq!(
            cleanup(&r, &bounds, &point, 1e-6, &Cleanup::separation()).unwrap_err(),
            Rejection::Weak
        );
        let mut cfg = Cleanup::separation();
        cfg.weak_threshold = 0.0;
        assert!(cleanup(&r, &bounds, &point, 1e-6, &cfg).is_ok());
    }

    #[test]
    fn enforcement_scales_weak_violations_up() {
        // violation 5e-8 is under the LP tolerance 1e-6; scaling by 2^11
        // lifts it past the efficacy target 1e-4
        let r = le_row(&[(0, 1.0)], 1.0 - 5e-8);
        let bounds = [iv(0.0, 2.0)];
        let point = [1.0];
        let c = cleanup(&r, &bounds, &point, 1e-6, &Cleanup::enforcement(1e-6)).unwrap();
        assert_eq!(c.coefs[&0], 2048.0);
        let v = c.violation(&point);
        assert!(v >= 1e-4 && v < 2e-4, "violation {}", v);
    }

    #[test]
    fn enforcement_scale_up_respects_the_coefficient_cap() {
        // the coefficient already sits at the cap 10/feastol = 1e7, so no
        // rescue is possible and the row is rejected
        let r = le_row(&[(0, 1e7)], 1e7 * 1.0 - 5e-8);
        let bounds = [iv(0.0, 2.0)];
        let point = [1.0];
        assert_eq!(
            cleanup(&r, &bounds, &point, 1e-6, &Cleanup::enforcement(1e-6)).unwrap_err(),
            Rejection::LostViolation
        );
    }

    #[test]
    fn enforcement_caps_coefficients_by_feastol() {
        // max coefficient 1e9 over the cap 1e7: scaled down by 2^-7 while
        // the violation stays above the LP tolerance
        let r = le_row(&[(0, 1e9), (1, 300.0)], 1e9 * 0.5 - 1.0);
        let bounds = [iv(0.0, 2.0), iv(0.0, 1.0)];
        let point = [0.5, 0.0];
        let c = cleanup(&r, &bounds, &point, 1e-6, &Cleanup::enforcement(1e-6)).unwrap();
        let f = 2f64.powi(-7);
        assert_eq!(c.coefs[&0], 1e9 * f);
        assert!(c.coefs[&0] < 1e7);
        assert!(c.violation(&point) >= 1e-6);

        // when scaling down would lose the violation, the row is left big
        let r = le_row(&[(0, 1e9), (1, 300.0)], 1e9 * 0.5 - 2e-5);
        let c = cleanup(&r, &bounds, &point, 1e-6, &Cleanup::enforcement(1e-6)).unwrap();
        assert_eq!(c.coefs[&0], 1e9);
    }

    #[test]
    fn fp_guard_rejects_dust_dominated_rows() {
        // violation 2e-6 is real but five hundred times smaller than
        // 2^-50 of the side magnitude 1e10
        let r = le_row(&[(0, 1.0)], 1e10 - 2e-6);
        let bounds = [iv(0.0, 2e10)];
        let point = [1e10];
        assert_eq!(
            cleanup(&r, &bounds, &point, 1e-6, &Cleanup::enforcement(1e-6)).unwrap_err(),
            Rejection::LostViolation
        );
        // separation mode has no such guard
        let mut cfg = Cleanup::separation();
        cfg.weak_threshold = 0.0;
        assert!(cleanup(&r, &bounds, &point, 1e-6, &cfg).is_ok());
    }

    #[test]
    fn pool_keeps_global_rows_and_finds_violated() {
        let mut pool = CutPool::new();
        assert!(pool.add(le_row(&[(0, 1.0)], 1.0)));
        // duplicate is skipped
        assert!(!pool.add(le_row(&[(0, 1.0)], 1.0)));
        let mut local = le_row(&[(1, 1.0)], 0.0);
        local.validity = Validity::Local;
        assert!(!pool.add(local));
        assert!(pool.add(le_row(&[(1, 1.0)], 2.0)));
        assert_eq!(pool.violated(&[1.5, 1.0], 1e-9), vec![0]);
        assert_eq!(pool.violated(&[0.0, 0.0], 1e-9), Vec::<usize>::new());
    }

    #[test]
    fn stats_count_outcomes_by_reason() {
        let mut st = SepaStats::default();
        st.note(&Ok(le_row(&[(0, 1.0)], 0.0)));
        st.note(&Err(Rejection::NoBound));
        st.note(&Err(Rejection::Weak));
        st.note(&Err(Rejection::LostViolation));
        assert_eq!(st.created, 4);
        assert_eq!(st.cleaned, 1);
        assert_eq!(st.rejected_no_bound, 1);
        assert_eq!(st.rejected_weak, 1);
        assert_eq!(st.rejected_lost_violation, 1);
    }
}
