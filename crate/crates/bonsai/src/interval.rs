//! Conservative interval arithmetic.
//!
//! Endpoints at or beyond ±1e20 are treated as infinite. Outward safety is
//! obtained by a post-hoc relative inflation of 1e-12 on endpoints that are
//! not provably exact, instead of fiddling with hardware rounding modes.

use crate::INF;

const INFLATE: f64 = 1e-12;

/// A closed real interval, or the empty set (encoded with NaN endpoints).
#[derive(Clone, Copy, Debug)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        (self.is_empty() && other.is_empty()) || (self.lo == other.lo && self.hi == other.hi)
    }
}

fn clamp_endpoint(x: f64) -> f64 {
    if x.is_nan() {
        x
    } else {
        x.clamp(-INF, INF)
    }
}

/// Inflate `x` away from zero direction `dir` (-1 down, +1 up) by a relative
/// margin, leaving infinite endpoints alone.
fn inflate(x: f64, dir: f64) -> f64 {
    if x.abs() >= INF {
        return x.signum() * INF;
    }
    clamp_endpoint(x + dir * INFLATE * x.abs())
}

/// True if `a + b` rounds to the exact real sum.
fn add_exact(a: f64, b: f64) -> bool {
    let s = a + b;
    if !s.is_finite() {
        return false;
    }
    let bv = s - a;
    let err = (a - (s - bv)) + (b - bv);
    err == 0.0
}

/// True if `a * b` rounds to the exact real product.
fn mul_exact(a: f64, b: f64) -> bool {
    let p = a * b;
    if !p.is_finite() {
        return false;
    }
    f64::mul_add(a, b, -p) == 0.0
}

/// True if `a / b` is exact.
fn div_exact(a: f64, b: f64) -> bool {
    let q = a / b;
    if !q.is_finite() {
        return false;
    }
    f64::mul_add(q, b, -a) == 0.0
}

/// Integer power by repeated multiplication, tracking exactness.
fn powi_exact(base: f64, p: u32) -> (f64, bool) {
    let mut result = 1.0f64;
    let mut exact = true;
    let mut b = base;
    let mut e = p;
    let mut b_exact = true;
    while e > 0 {
        if e & 1 == 1 {
            exact = exact && b_exact && mul_exact(result, b);
            result *= b;
        }
        e >>= 1;
        if e > 0 {
            b_exact = b_exact && mul_exact(b, b);
            b *= b;
        }
        if !result.is_finite() || !b.is_finite() {
            return (result, false);
        }
    }
    (result, exact)
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::NAN,
        hi: f64::NAN,
    };

    pub fn new(lo: f64, hi: f64) -> Interval {
        let lo = clamp_endpoint(lo);
        let hi = clamp_endpoint(hi);
        if lo.is_nan() || hi.is_nan() || lo > hi {
            Interval::EMPTY
        } else {
            Interval { lo, hi }
        }
    }

    pub fn point(v: f64) -> Interval {
        Interval::new(v, v)
    }

    pub fn whole() -> Interval {
        Interval { lo: -INF, hi: INF }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_nan() || self.hi.is_nan()
    }

    pub fn lo_finite(&self) -> bool {
        !self.is_empty() && self.lo > -INF
    }

    pub fn hi_finite(&self) -> bool {
        !self.is_empty() && self.hi < INF
    }

    pub fn is_finite(&self) -> bool {
        self.lo_finite() && self.hi_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        !self.is_empty() && self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.is_empty() || (!self.is_empty() && self.lo <= other.lo && other.hi <= self.hi)
    }

    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn mid(&self) -> f64 {
        if !self.lo_finite() && !self.hi_finite() {
            0.0
        } else if !self.lo_finite() {
            self.hi
        } else if !self.hi_finite() {
            self.lo
        } else {
            0.5 * (self.lo + self.hi)
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn neg(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        let lo = if self.lo <= -INF || other.lo <= -INF {
            -INF
        } else {
            let s = self.lo + other.lo;
            if add_exact(self.lo, other.lo) {
                s
            } else {
                inflate(s, -1.0)
            }
        };
        let hi = if self.hi >= INF || other.hi >= INF {
            INF
        } else {
            let s = self.hi + other.hi;
            if add_exact(self.hi, other.hi) {
                s
            } else {
                inflate(s, 1.0)
            }
        };
        Interval::new(lo, hi)
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        self.add(&other.neg())
    }

    /// Scale by a real constant (exactness-checked).
    pub fn scale(&self, c: f64) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if c == 0.0 {
            return Interval::point(0.0);
        }
        let (a, b) = if c > 0.0 {
            (self.lo, self.hi)
        } else {
            (self.hi, self.lo)
        };
        let lo = if a.abs() >= INF {
            a.signum() * c.signum() * INF
        } else {
            let p = a * c;
            if mul_exact(a, c) {
                p
            } else {
                inflate(p, -1.0)
            }
        };
        let hi = if b.abs() >= INF {
            b.signum() * c.signum() * INF
        } else {
            let p = b * c;
            if mul_exact(b, c) {
                p
            } else {
                inflate(p, 1.0)
            }
        };
        Interval::new(lo, hi)
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        // A zero point absorbs even unbounded factors: the factors stand for
        // sets of reals, so every product is 0.
        if self.lo == 0.0 && self.hi == 0.0 || other.lo == 0.0 && other.hi == 0.0 {
            return Interval::point(0.0);
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut exact = true;
        for &a in &[self.lo, self.hi] {
            for &b in &[other.lo, other.hi] {
                let p = if a.abs() >= INF || b.abs() >= INF {
                    if a == 0.0 || b == 0.0 {
                        0.0
                    } else {
                        a.signum() * b.signum() * INF
                    }
                } else {
                    if !mul_exact(a, b) {
                        exact = false;
                    }
                    a * b
                };
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        if !exact {
            lo = inflate(lo, -1.0);
            hi = inflate(hi, 1.0);
        }
        Interval::new(lo, hi)
    }

    /// Multiplicative inverse, with half-line refinement when zero is an
    /// endpoint and the whole line when zero is interior.
    pub fn recip(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if self.lo == 0.0 && self.hi == 0.0 {
            return Interval::EMPTY;
        }
        if self.lo > 0.0 || self.hi < 0.0 {
            let lo = if self.hi.abs() >= INF {
                if self.hi > 0.0 {
                    0.0
                } else {
                    -INF
                }
            } else {
                let q = 1.0 / self.hi;
                if div_exact(1.0, self.hi) {
                    q
                } else {
                    inflate(q, -1.0)
                }
            };
            let hi = if self.lo.abs() >= INF {
                if self.lo > 0.0 {
                    INF
                } else {
                    0.0
                }
            } else {
                let q = 1.0 / self.lo;
                if div_exact(1.0, self.lo) {
                    q
                } else {
                    inflate(q, 1.0)
                }
            };
            return Interval::new(lo, hi);
        }
        if self.lo == 0.0 {
            // 1/x for x in (0, hi]
            let lo = if self.hi >= INF {
                0.0
            } else {
                let q = 1.0 / self.hi;
                if div_exact(1.0, self.hi) {
                    q
                } else {
                    inflate(q, -1.0)
                }
            };
            return Interval::new(lo, INF);
        }
        if self.hi == 0.0 {
            let hi = if self.lo <= -INF {
                0.0
            } else {
                let q = 1.0 / self.lo;
                if div_exact(1.0, self.lo) {
                    q
                } else {
                    inflate(q, 1.0)
                }
            };
            return Interval::new(-INF, hi);
        }
        Interval::whole()
    }

    pub fn div(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        if other.lo < 0.0 && other.hi > 0.0 {
            return Interval::whole();
        }
        self.mul(&other.recip())
    }

    pub fn abs(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            Interval::new(0.0, self.hi.max(-self.lo))
        }
    }

    pub fn exp(&self) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        let lo = if self.lo <= -INF {
            0.0
        } else {
            inflate(self.lo.exp(), -1.0).max(0.0)
        };
        let hi = if self.hi >= INF {
            INF
        } else {
            inflate(self.hi.exp(), 1.0)
        };
        Interval::new(lo, hi)
    }

    /// Natural logarithm; the domain is clipped to positive values and an
    /// interval with no positive part yields EMPTY.
    pub fn log(&self) -> Interval {
        if self.is_empty() || self.hi <= 0.0 {
            return Interval::EMPTY;
        }
        let lo = if self.lo <= 0.0 {
            -INF
        } else {
            inflate(self.lo.ln(), -1.0)
        };
        let hi = if self.hi >= INF {
            INF
        } else {
            inflate(self.hi.ln(), 1.0)
        };
        Interval::new(lo, hi)
    }

    /// x^p for a real exponent. Non-integer exponents clip the base to the
    /// nonnegative axis first; EMPTY when nothing remains.
    pub fn pow(&self, p: f64) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        if p == 0.0 {
            return Interval::point(1.0);
        }
        if p == 1.0 {
            return *self;
        }
        let is_int = p.fract() == 0.0 && p.abs() < 1e9;
        if is_int {
            let n = p.abs() as u32;
            if p > 0.0 {
                return self.pow_uint(n);
            }
            return self.pow_uint(n).recip();
        }
        let clipped = self.intersect(&Interval::new(0.0, INF));
        if clipped.is_empty() {
            return Interval::EMPTY;
        }
        if p > 0.0 {
            let lo = if clipped.lo == 0.0 {
                0.0
            } else {
                inflate(clipped.lo.powf(p), -1.0).max(0.0)
            };
            let hi = if clipped.hi >= INF {
                INF
            } else {
                inflate(clipped.hi.powf(p), 1.0)
            };
            Interval::new(lo, hi)
        } else {
            // decreasing on (0, inf)
            let lo = if clipped.hi >= INF {
                0.0
            } else if clipped.hi == 0.0 {
                return Interval::EMPTY;
            } else {
                inflate(clipped.hi.powf(p), -1.0).max(0.0)
            };
            let hi = if clipped.lo == 0.0 {
                INF
            } else {
                inflate(clipped.lo.powf(p), 1.0)
            };
            Interval::new(lo, hi)
        }
    }

    fn pow_uint(&self, n: u32) -> Interval {
        debug_assert!(n >= 1);
        let even = n % 2 == 0;
        let ep = |x: f64, dir: f64| -> f64 {
            if x.abs() >= INF {
                return if even { INF } else { x.signum() * INF };
            }
            let (v, exact) = powi_exact(x, n);
            if exact {
                v
            } else {
                inflate(v, dir)
            }
        };
        if even {
            if self.lo >= 0.0 {
                Interval::new(ep(self.lo, -1.0), ep(self.hi, 1.0))
            } else if self.hi <= 0.0 {
                Interval::new(ep(self.hi, -1.0), ep(self.lo, 1.0))
            } else {
                let m = self.hi.max(-self.lo);
                Interval::new(0.0, ep(m, 1.0))
            }
        } else {
            Interval::new(ep(self.lo, -1.0), ep(self.hi, 1.0))
        }
    }

    /// sign(x)·|x|^p for p > 1 (odd-symmetric monotone increasing).
    pub fn signpower(&self, p: f64) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        let ep = |x: f64, dir: f64| -> f64 {
            if x.abs() >= INF {
                return x.signum() * INF;
            }
            if x == 0.0 {
                return 0.0;
            }
            inflate(x.signum() * x.abs().powf(p), dir)
        };
        Interval::new(ep(self.lo, -1.0), ep(self.hi, 1.0))
    }

    /// -x·log(x) on x ≥ 0 with value 0 at x = 0; the domain is clipped.
    pub fn entropy(&self) -> Interval {
        if self.is_empty() || self.hi < 0.0 {
            return Interval::EMPTY;
        }
        let clipped = self.intersect(&Interval::new(0.0, INF));
        let f = |x: f64| -> f64 {
            if x <= 0.0 {
                0.0
            } else {
                -x * x.ln()
            }
        };
        let argmax = std::f64::consts::E.recip();
        let hi = if clipped.contains(argmax) {
            inflate(argmax, 1.0)
        } else if clipped.hi < argmax {
            inflate(f(clipped.hi), 1.0)
        } else {
            inflate(f(clipped.lo), 1.0)
        };
        let lo = if clipped.hi >= INF {
            -INF
        } else {
            inflate(f(clipped.lo).min(f(clipped.hi)).min(0.0f64.min(f(clipped.lo))), -1.0)
        };
        // entropy(0) = 0 keeps 0 in the image whenever 0 is in the domain
        let lo = if clipped.lo == 0.0 { lo.min(0.0) } else { lo };
        Interval::new(lo, hi)
    }

    pub fn sin(&self) -> Interval {
        self.trig(false)
    }

    pub fn cos(&self) -> Interval {
        self.trig(true)
    }

    fn trig(&self, is_cos: bool) -> Interval {
        if self.is_empty() {
            return Interval::EMPTY;
        }
        let tau = 2.0 * std::f64::consts::PI;
        if !self.is_finite() || self.width() >= tau || self.lo.abs() > 1e10 || self.hi.abs() > 1e10
        {
            return Interval::new(-1.0, 1.0);
        }
        let f = |x: f64| if is_cos { x.cos() } else { x.sin() };
        let mut lo = f(self.lo).min(f(self.hi));
        let mut hi = f(self.lo).max(f(self.hi));
        // check interior critical points k·π/2 for the exact ±1 extrema
        let half_pi = 0.5 * std::f64::consts::PI;
        let k0 = (self.lo / half_pi).floor() as i64;
        let k1 = (self.hi / half_pi).ceil() as i64;
        for k in k0..=k1 {
            let x = k as f64 * half_pi;
            // widen the membership test by one inflation step so that
            // critical points just outside due to π rounding still count
            if x >= self.lo - 1e-9 && x <= self.hi + 1e-9 {
                let v = f(x);
                if v > 0.5 {
                    hi = 1.0;
                }
                if v < -0.5 {
                    lo = -1.0;
                }
            }
        }
        lo = inflate(lo, -1.0).max(-1.0);
        hi = inflate(hi, 1.0).min(1.0);
        Interval::new(lo, hi)
    }
}

/// Roots of a·y² + b·y = r, smallest first; empty when none.
fn quad_roots(a: f64, b: f64, r: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return vec![];
        }
        return vec![r / b];
    }
    let disc = b * b + 4.0 * a * r;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // numerically stable pairing
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if b == 0.0 {
        (-sq / (2.0 * a), sq / (2.0 * a))
    } else {
        (q / a, if q != 0.0 { -r / q } else { 0.0 })
    };
    let (mut r1, mut r2) = (r1, r2);
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    vec![r1, r2]
}

/// Subset of `domain` where q(y) = a·y² + b·y satisfies q(y) ≤ r (if `upper`)
/// or q(y) ≥ r, returned as up to two disjoint intervals.
fn quad_level_set(a: f64, b: f64, r: f64, upper: bool, domain: Interval) -> Vec<Interval> {
    if domain.is_empty() {
        return vec![];
    }
    if r.abs() >= INF {
        if (upper && r >= INF) || (!upper && r <= -INF) {
            return vec![domain];
        }
        return vec![];
    }
    let roots = quad_roots(a, b, r);
    let q = |y: f64| a * y * y + b * y;
    // tiny margin so boundary points survive floating-point wobble
    let eps = 1e-11 * (1.0 + r.abs());
    let ok = |y: f64| if upper { q(y) <= r + eps } else { q(y) >= r - eps };
    let mut pieces: Vec<Interval> = Vec::new();
    let mut cuts = vec![domain.lo.max(-INF)];
    for &root in &roots {
        if root > domain.lo && root < domain.hi {
            cuts.push(root);
        }
    }
    cuts.push(domain.hi.min(INF));
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo > hi {
            continue;
        }
        let sample = if lo <= -INF && hi >= INF {
            0.0
        } else if lo <= -INF {
            hi - 1.0
        } else if hi >= INF {
            lo + 1.0
        } else {
            0.5 * (lo + hi)
        };
        if ok(sample) {
            let piece = Interval::new(lo, hi);
            if let Some(last) = pieces.last_mut() {
                if last.hi >= piece.lo {
                    *last = last.hull(&piece);
                    continue;
                }
            }
            pieces.push(piece);
        }
    }
    pieces
}

/// Hull of { y ∈ domain : a·y² + β·y ∈ rhs for some β ∈ b }.
///
/// For fixed y ≥ 0 the attainable values are [a·y²+b.lo·y, a·y²+b.hi·y]
/// (mirrored for y ≤ 0), so membership splits into one quadratic upper-level
/// and one lower-level condition per half-line.
pub fn solve_univariate_quadratic(a: f64, b: Interval, rhs: Interval, domain: Interval) -> Interval {
    if domain.is_empty() || b.is_empty() || rhs.is_empty() {
        return Interval::EMPTY;
    }
    let mut hull = Interval::EMPTY;
    for half in 0..2 {
        let part = if half == 0 {
            domain.intersect(&Interval::new(0.0, INF))
        } else {
            domain.intersect(&Interval::new(-INF, 0.0))
        };
        if part.is_empty() {
            continue;
        }
        // coefficient of y giving the smallest / largest attainable value
        let (bmin, bmax) = if half == 0 { (b.lo, b.hi) } else { (b.hi, b.lo) };
        let upper_ok = if bmin.abs() >= INF {
            vec![part]
        } else {
            quad_level_set(a, bmin, rhs.hi, true, part)
        };
        let lower_ok = if bmax.abs() >= INF {
            vec![part]
        } else {
            quad_level_set(a, bmax, rhs.lo, false, part)
        };
        for u in &upper_ok {
            for l in &lower_ok {
                hull = hull.hull(&u.intersect(l));
            }
        }
    }
    if hull.is_empty() {
        return Interval::EMPTY;
    }
    Interval::new(inflate(hull.lo, -1.0), inflate(hull.hi, 1.0)).intersect(&domain)
}
