//! Linear under- and overestimation of single operators over a box, the
//! myopic view used by the default relaxation handler: each child is treated
//! as a variable with known bounds and a reference value.

use super::{ExprGraph, NodeId, Op};
use crate::interval::Interval;
use crate::INF;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// estimate ≤ function on the box
    Under,
    /// estimate ≥ function on the box
    Over,
}

impl Sense {
    pub fn flip(self) -> Sense {
        match self {
            Sense::Under => Sense::Over,
            Sense::Over => Sense::Under,
        }
    }
}

/// Affine estimate of a node in terms of its children:
/// constant + Σ coefs[j]·child_j.
#[derive(Clone, Debug)]
pub struct NodeEstimate {
    pub constant: f64,
    pub coefs: Vec<f64>,
}

impl NodeEstimate {
    pub fn value(&self, child_vals: &[f64]) -> f64 {
        self.constant
            + self
                .coefs
                .iter()
                .zip(child_vals)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }
}

fn finite(x: f64) -> bool {
    x.abs() < INF
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Shape {
    ConvexOn,
    ConcaveOn,
}

/// Tangent / secant estimate of a univariate function with known shape on
/// the box. `integral` switches the tangent side to the secant between
/// adjacent integer points.
fn univariate(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    b: Interval,
    xhat: f64,
    sense: Sense,
    shape: Shape,
    integral: bool,
) -> Option<(f64, f64)> {
    let xhat = xhat.clamp(b.lo, b.hi);
    let tangent_side = matches!(
        (shape, sense),
        (Shape::ConvexOn, Sense::Under) | (Shape::ConcaveOn, Sense::Over)
    );
    if tangent_side {
        if integral {
            let lo_int = if finite(b.lo) { b.lo.ceil() } else { -INF };
            let hi_int = if finite(b.hi) { b.hi.floor() } else { INF };
            let mut fl = xhat.floor().max(lo_int);
            if fl + 1.0 > hi_int {
                fl = hi_int - 1.0;
            }
            if finite(fl) && fl >= lo_int {
                let (f0, f1) = (f(fl), f(fl + 1.0));
                if f0.is_finite() && f1.is_finite() {
                    let slope = f1 - f0;
                    return Some((slope, f0 - slope * fl));
                }
            }
        }
        let mut t = xhat;
        let mut d = df(t);
        if !d.is_finite() || d.abs() >= INF {
            // nudge off a vertical tangent (e.g. sqrt at 0)
            let w = if b.is_finite() { b.width() } else { 1.0 };
            t = if (t - b.lo).abs() < (b.hi - t).abs() {
                t + 1e-6 * w.max(1e-6)
            } else {
                t - 1e-6 * w.max(1e-6)
            };
            d = df(t);
            if !d.is_finite() {
                return None;
            }
        }
        let ft = f(t);
        if !ft.is_finite() {
            return None;
        }
        Some((d, ft - d * t))
    } else {
        if !b.is_finite() {
            return None;
        }
        let (flo, fhi) = (f(b.lo), f(b.hi));
        if !flo.is_finite() || !fhi.is_finite() {
            return None;
        }
        if b.width() < 1e-12 {
            let v = match sense {
                Sense::Under => flo.min(fhi),
                Sense::Over => flo.max(fhi),
            };
            return Some((0.0, v));
        }
        let slope = (fhi - flo) / (b.hi - b.lo);
        Some((slope, flo - slope * b.lo))
    }
}

/// McCormick estimate for y1·y2 over a box: (coef1, coef2, constant).
fn mccormick(
    b1: Interval,
    b2: Interval,
    r1: f64,
    r2: f64,
    sense: Sense,
) -> Option<(f64, f64, f64)> {
    let cand = |c1: f64, c2: f64| -> Option<(f64, f64, f64)> {
        if !finite(c1) || !finite(c2) {
            return None;
        }
        Some((c2, c1, -(c1 * c2)))
    };
    let (a, b) = match sense {
        // (y1−y̲₁)(y2−y̲₂) ≥ 0 and (y1−ȳ₁)(y2−ȳ₂) ≥ 0
        Sense::Under => (cand(b1.lo, b2.lo), cand(b1.hi, b2.hi)),
        // (y1−y̲₁)(y2−ȳ₂) ≤ 0 and (y1−ȳ₁)(y2−y̲₂) ≤ 0
        Sense::Over => (cand(b1.lo, b2.hi), cand(b1.hi, b2.lo)),
    };
    let val = |e: &(f64, f64, f64)| e.0 * r1 + e.1 * r2 + e.2;
    match (a, b) {
        (Some(x), Some(y)) => {
            let pick_x = match sense {
                Sense::Under => val(&x) >= val(&y),
                Sense::Over => val(&x) <= val(&y),
            };
            Some(if pick_x { x } else { y })
        }
        (Some(x), None) => Some(x),
        (None, Some(y)) => Some(y),
        (None, None) => None,
    }
}

/// Tangency point for the one-sided envelope of an odd-symmetric function
/// (x^p with odd p, or signpower) on a box straddling zero: smallest t ≥ 0
/// where the line through (lo, f(lo)) touches the graph tangentially.
fn odd_tangent_point(f: &dyn Fn(f64) -> f64, df: &dyn Fn(f64) -> f64, lo: f64) -> Option<f64> {
    debug_assert!(lo < 0.0);
    let g = |t: f64| f(t) + df(t) * (lo - t) - f(lo);
    let mut hi = 1.0f64.max(-lo);
    let mut tries = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return None;
        }
    }
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Underestimator for an odd-symmetric increasing function with concave
/// negative part and convex positive part, on a box with lo < 0 < hi.
fn odd_mixed_under(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    b: Interval,
    xhat: f64,
) -> Option<(f64, f64)> {
    if !finite(b.lo) {
        return None;
    }
    if finite(b.hi) {
        let ghi = f(b.hi) + df(b.hi) * (b.lo - b.hi) - f(b.lo);
        if ghi > 0.0 {
            // tangency beyond the box: the envelope is the secant
            let slope = (f(b.hi) - f(b.lo)) / (b.hi - b.lo);
            return Some((slope, f(b.lo) - slope * b.lo));
        }
    }
    let t = odd_tangent_point(f, df, b.lo)?;
    if xhat >= t {
        let d = df(xhat);
        Some((d, f(xhat) - d * xhat))
    } else {
        let d = df(t);
        Some((d, f(b.lo) - d * b.lo))
    }
}

fn odd_mixed(
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    b: Interval,
    xhat: f64,
    sense: Sense,
) -> Option<(f64, f64)> {
    match sense {
        Sense::Under => odd_mixed_under(f, df, b, xhat),
        Sense::Over => {
            // by odd symmetry: over(f)(x) = −under(f)(−x) on the mirrored box
            let mb = Interval::new(-b.hi, -b.lo);
            let (a, c) = odd_mixed_under(f, df, mb, -xhat)?;
            Some((a, -c))
        }
    }
}

impl ExprGraph {
    /// Estimate a single operator over its children.
    ///
    /// `child_bounds`, `child_refs`, `child_integral` are indexed like the
    /// node's children. Returns NONE when no finite estimator exists (for
    /// example a secant over an unbounded box), signalling branching.
    pub fn estimate_node(
        &self,
        id: NodeId,
        child_bounds: &[Interval],
        child_refs: &[f64],
        sense: Sense,
        child_integral: &[bool],
    ) -> Option<NodeEstimate> {
        let node = self.node(id);
        let nch = node.children.len();
        debug_assert_eq!(child_bounds.len(), nch);
        let uni = |pair: Option<(f64, f64)>| -> Option<NodeEstimate> {
            pair.map(|(coef, constant)| NodeEstimate {
                constant,
                coefs: vec![coef],
            })
        };
        match &node.op {
            Op::Val(v) => Some(NodeEstimate {
                constant: *v,
                coefs: vec![],
            }),
            Op::Var(_) => Some(NodeEstimate {
                constant: 0.0,
                coefs: vec![],
            }),
            Op::Sum { constant, coefs } => Some(NodeEstimate {
                constant: *constant,
                coefs: coefs.clone(),
            }),
            Op::Prod { coef } => {
                self.estimate_product(*coef, child_bounds, child_refs, sense)
            }
            Op::Pow { exponent } => {
                let p = *exponent;
                let b = child_bounds[0];
                let x = child_refs[0];
                let int = child_integral[0];
                let is_int = p.fract() == 0.0;
                let even = is_int && (p as i64) % 2 == 0;
                let fu: Box<dyn Fn(f64) -> f64> = if is_int {
                    let pi = p as i32;
                    Box::new(move |t: f64| t.powi(pi))
                } else {
                    Box::new(move |t: f64| t.max(0.0).powf(p))
                };
                let dfu: Box<dyn Fn(f64) -> f64> = if is_int {
                    let pi = p as i32;
                    Box::new(move |t: f64| p * t.powi(pi - 1))
                } else {
                    Box::new(move |t: f64| p * t.max(0.0).powf(p - 1.0))
                };
                if p == 0.0 {
                    return Some(NodeEstimate {
                        constant: 1.0,
                        coefs: vec![0.0],
                    });
                }
                if p == 1.0 {
                    return Some(NodeEstimate {
                        constant: 0.0,
                        coefs: vec![1.0],
                    });
                }
                if p > 1.0 && even {
                    return uni(univariate(&*fu, &*dfu, b, x, sense, Shape::ConvexOn, int));
                }
                if p > 1.0 && is_int {
                    // odd power
                    if b.lo >= 0.0 {
                        return uni(univariate(&*fu, &*dfu, b, x, sense, Shape::ConvexOn, int));
                    }
                    if b.hi <= 0.0 {
                        return uni(univariate(&*fu, &*dfu, b, x, sense, Shape::ConcaveOn, int));
                    }
                    return uni(odd_mixed(&*fu, &*dfu, b, x, sense));
                }
                if p > 1.0 {
                    // fractional exponent > 1: convex on the nonnegative axis
                    let b = b.intersect(&Interval::new(0.0, INF));
                    return uni(univariate(&*fu, &*dfu, b, x.max(0.0), sense, Shape::ConvexOn, int));
                }
                if p > 0.0 {
                    // p in (0,1): concave on the nonnegative axis
                    let b = b.intersect(&Interval::new(0.0, INF));
                    return uni(univariate(&*fu, &*dfu, b, x.max(0.0), sense, Shape::ConcaveOn, int));
                }
                // negative exponents need the box on one side of zero
                if b.lo > 0.0 {
                    return uni(univariate(&*fu, &*dfu, b, x, sense, Shape::ConvexOn, int));
                }
                if b.hi < 0.0 && is_int {
                    let shape = if even { Shape::ConvexOn } else { Shape::ConcaveOn };
                    return uni(univariate(&*fu, &*dfu, b, x, sense, shape, int));
                }
                None
            }
            Op::SignPow { exponent } => {
                let p = *exponent;
                let b = child_bounds[0];
                let x = child_refs[0];
                let f = move |t: f64| {
                    if t == 0.0 {
                        0.0
                    } else {
                        t.signum() * t.abs().powf(p)
                    }
                };
                let df = move |t: f64| p * t.abs().powf(p - 1.0);
                if b.lo >= 0.0 {
                    return uni(univariate(&f, &df, b, x, sense, Shape::ConvexOn, false));
                }
                if b.hi <= 0.0 {
                    return uni(univariate(&f, &df, b, x, sense, Shape::ConcaveOn, false));
                }
                uni(odd_mixed(&f, &df, b, x, sense))
            }
            Op::Exp => {
                let b = child_bounds[0];
                uni(univariate(
                    &|t| t.exp(),
                    &|t| t.exp(),
                    b,
                    child_refs[0],
                    sense,
                    Shape::ConvexOn,
                    child_integral[0],
                ))
            }
            Op::Log => {
                let b = child_bounds[0].intersect(&Interval::new(0.0, INF));
                if b.is_empty() {
                    return None;
                }
                uni(univariate(
                    &|t| t.ln(),
                    &|t| 1.0 / t,
                    b,
                    child_refs[0].max(b.lo),
                    sense,
                    Shape::ConcaveOn,
                    child_integral[0],
                ))
            }
            Op::Entropy => {
                let b = child_bounds[0].intersect(&Interval::new(0.0, INF));
                if b.is_empty() {
                    return None;
                }
                uni(univariate(
                    &|t| if t <= 0.0 { 0.0 } else { -t * t.ln() },
                    &|t| -(t.ln() + 1.0),
                    b,
                    child_refs[0].max(b.lo),
                    sense,
                    Shape::ConcaveOn,
                    child_integral[0],
                ))
            }
            Op::Sin | Op::Cos => {
                // constant bounds from the activity: valid but weak
                let img = if matches!(node.op, Op::Sin) {
                    child_bounds[0].sin()
                } else {
                    child_bounds[0].cos()
                };
                if img.is_empty() {
                    return None;
                }
                let v = match sense {
                    Sense::Under => img.lo,
                    Sense::Over => img.hi,
                };
                Some(NodeEstimate {
                    constant: v,
                    coefs: vec![0.0],
                })
            }
            Op::Abs => {
                let b = child_bounds[0];
                let x = child_refs[0];
                match sense {
                    Sense::Under => {
                        let slope = if x > 0.0 {
                            1.0
                        } else if x < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                        Some(NodeEstimate {
                            constant: 0.0,
                            coefs: vec![slope],
                        })
                    }
                    Sense::Over => uni(univariate(
                        &|t| t.abs(),
                        &|t| t.signum(),
                        b,
                        x,
                        Sense::Over,
                        Shape::ConvexOn,
                        false,
                    )),
                }
            }
        }
    }

    /// Recursive binary McCormick over a left-fold association order for
    /// products with two or more children.
    fn estimate_product(
        &self,
        coef: f64,
        child_bounds: &[Interval],
        child_refs: &[f64],
        sense: Sense,
    ) -> Option<NodeEstimate> {
        let k = child_bounds.len();
        if k == 0 {
            return Some(NodeEstimate {
                constant: coef,
                coefs: vec![],
            });
        }
        if k == 1 {
            return Some(NodeEstimate {
                constant: 0.0,
                coefs: vec![coef],
            });
        }
        // carry both senses of the partial product through the fold
        let mut under = NodeEstimate {
            constant: 0.0,
            coefs: {
                let mut c = vec![0.0; k];
                c[0] = 1.0;
                c
            },
        };
        let mut over = under.clone();
        let mut t_bounds = child_bounds[0];
        let mut t_ref = child_refs[0];
        for j in 1..k {
            let (bj, rj) = (child_bounds[j], child_refs[j]);
            let mut next: [Option<NodeEstimate>; 2] = [None, None];
            for (slot, want) in [(0, Sense::Under), (1, Sense::Over)] {
                let (ct, cj, c0) = mccormick(t_bounds, bj, t_ref, rj, want)?;
                // substitute the partial-product affine into the t coefficient
                let sub = if ct >= 0.0 {
                    if want == Sense::Under {
                        &under
                    } else {
                        &over
                    }
                } else if want == Sense::Under {
                    &over
                } else {
                    &under
                };
                let mut coefs: Vec<f64> = sub.coefs.iter().map(|c| c * ct).collect();
                coefs[j] += cj;
                next[slot] = Some(NodeEstimate {
                    constant: ct * sub.constant + c0,
                    coefs,
                });
            }
            under = next[0].take().unwrap();
            over = next[1].take().unwrap();
            t_bounds = t_bounds.mul(&bj);
            t_ref *= rj;
        }
        let want = if coef >= 0.0 { sense } else { sense.flip() };
        let picked = match want {
            Sense::Under => under,
            Sense::Over => over,
        };
        Some(NodeEstimate {
            constant: coef * picked.constant,
            coefs: picked.coefs.iter().map(|c| coef * c).collect(),
        })
    }

    /// Reference points for initial cuts: the two box corners and the
    /// midpoint, with infinite components replaced by finite stand-ins.
    pub fn estimate_refs_for_initial_cuts(bounds: &[Interval]) -> Vec<Vec<f64>> {
        initial_reference_points(bounds)
    }
}

/// The two box corners plus the midpoint, made finite.
pub fn initial_reference_points(bounds: &[Interval]) -> Vec<Vec<f64>> {
    let loside: Vec<f64> = bounds
        .iter()
        .map(|b| {
            if b.lo_finite() {
                b.lo
            } else if b.hi_finite() {
                b.hi - 1.0
            } else {
                -1.0
            }
        })
        .collect();
    let hiside: Vec<f64> = bounds
        .iter()
        .map(|b| {
            if b.hi_finite() {
                b.hi
            } else if b.lo_finite() {
                b.lo + 1.0
            } else {
                1.0
            }
        })
        .collect();
    let mid: Vec<f64> = bounds.iter().map(|b| b.mid()).collect();
    vec![loside, hiside, mid]
}
