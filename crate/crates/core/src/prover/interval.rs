//! Closed intervals with outward padding.
//!
//! Every operation widens its result by a relative `2⁻⁵⁰` (at least 4 ulps)
//! plus a subnormal quantum, which dominates the rounding error of the basic
//! IEEE operations and the documented error of the libm transcendentals used.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

const REL: f64 = 1.0 / (1u64 << 50) as f64;
const ABS: f64 = 1e-300;

#[inline]
pub fn down(x: f64) -> f64 {
    if x.is_finite() {
        x - (x.abs() * REL + ABS)
    } else {
        x
    }
}

#[inline]
pub fn up(x: f64) -> f64 {
    if x.is_finite() {
        x + (x.abs() * REL + ABS)
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };
    pub const ENTIRE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// Padded enclosure of a computed value.
    pub fn around(x: f64) -> Self {
        Self { lo: down(x), hi: up(x) }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            0.5 * self.lo + 0.5 * self.hi
        } else if self.lo.is_finite() {
            self.lo
        } else if self.hi.is_finite() {
            self.hi
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        Interval { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    pub fn intersect(&self, o: &Interval) -> Option<Interval> {
        let lo = self.lo.max(o.lo);
        let hi = self.hi.min(o.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn clamp_to(&self, lo: f64, hi: f64) -> Interval {
        Interval { lo: self.lo.clamp(lo, hi), hi: self.hi.clamp(lo, hi) }
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn sqr(self) -> Interval {
        let (a, b) = (self.lo * self.lo, self.hi * self.hi);
        if self.lo >= 0.0 {
            Interval { lo: down(a), hi: up(b) }
        } else if self.hi <= 0.0 {
            Interval { lo: down(b), hi: up(a) }
        } else {
            Interval { lo: 0.0, hi: up(a.max(b)) }
        }
    }

    pub fn sqrt(self) -> Interval {
        let lo = self.lo.max(0.0);
        let hi = self.hi.max(0.0);
        Interval { lo: down(lo.sqrt()).max(0.0), hi: up(hi.sqrt()) }
    }

    pub fn exp(self) -> Interval {
        Interval { lo: down(self.lo.exp()).max(0.0), hi: up(self.hi.exp()) }
    }

    pub fn recip(self) -> Interval {
        Interval::ONE / self
    }

    pub fn powi(self, n: u32) -> Interval {
        let mut acc = Interval::ONE;
        for _ in 0..n / 2 {
            acc = acc * self.sqr();
        }
        if n % 2 == 1 {
            acc = acc * self;
        }
        acc
    }

    pub fn scale(self, c: f64) -> Interval {
        self * Interval::point(c)
    }

    /// Sine on a subset of `[−π/2, π/2]`, where it is increasing.
    pub fn sin_monotone(self) -> Interval {
        Interval { lo: down(self.lo.sin()).max(-1.0), hi: up(self.hi.sin()).min(1.0) }
    }

    /// Cosine on a subset of `[−π/2, π/2]`.
    pub fn cos_half_period(self) -> Interval {
        let (a, b) = (self.lo.cos(), self.hi.cos());
        let hi = if self.contains_zero() { 1.0 } else { up(a.max(b)).min(1.0) };
        Interval { lo: down(a.min(b)).max(0.0), hi }
    }

    pub fn min_with(self, o: Interval) -> Interval {
        Interval { lo: self.lo.min(o.lo), hi: self.hi.min(o.hi) }
    }

    pub fn max_with(self, o: Interval) -> Interval {
        Interval { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval { lo: down(self.lo + o.lo), hi: up(self.hi + o.hi) }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval { lo: down(self.lo - o.hi), hi: up(self.hi - o.lo) }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

#[inline]
fn mul_ext(a: f64, b: f64) -> f64 {
    // 0 · ∞ is 0 for enclosure purposes.
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let p = [mul_ext(self.lo, o.lo), mul_ext(self.lo, o.hi), mul_ext(self.hi, o.lo), mul_ext(self.hi, o.hi)];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: down(lo), hi: up(hi) }
    }
}

impl Div for Interval {
    type Output = Interval;
    fn div(self, o: Interval) -> Interval {
        if o.contains_zero() {
            return Interval::ENTIRE;
        }
        let p = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        if p.iter().any(|x| x.is_nan()) {
            return Interval::ENTIRE;
        }
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo: down(lo), hi: up(hi) }
    }
}

impl From<f64> for Interval {
    fn from(x: f64) -> Self {
        Interval::point(x)
    }
}
