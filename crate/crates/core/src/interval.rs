//! Closed `f64` intervals with outward rounding.
//!
//! Elementary functions (`ln`, `exp`, `sqrt`) are widened by a few ulps on
//! each side; the platform libm is assumed accurate to within that slack.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::BigRational;
use serde::Serialize;

use crate::exact_linalg::rational_to_f64;

const LIBM_SLACK_ULPS: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    /// Tight enclosure of a rational.
    pub fn from_rational(q: &BigRational) -> Self {
        let f = rational_to_f64(q);
        match BigRational::from_float(f) {
            Some(exact) if exact == *q => Self::point(f),
            Some(exact) if exact < *q => Self::new(f, f.next_up()),
            Some(_) => Self::new(f.next_down(), f),
            None => Self::new(f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Enclosure of `sqrt(q)` for a nonnegative rational, verified by exact
    /// squaring of the endpoints.
    pub fn sqrt_rational(q: &BigRational) -> Self {
        let f = rational_to_f64(q).max(0.0).sqrt();
        let sq = |x: f64| {
            let r = BigRational::from_float(x).expect("finite");
            &r * &r
        };
        let mut lo = f;
        while lo > 0.0 && sq(lo) > *q {
            lo = lo.next_down();
        }
        let mut hi = f;
        while sq(hi) < *q {
            hi = hi.next_up();
        }
        Self::new(lo.max(0.0), hi)
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) / 2.0
        }
    }

    /// Upper bound on the half-width.
    pub fn radius(&self) -> f64 {
        ((self.hi - self.lo) / 2.0).next_up().max(0.0)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn widen(self, ulps: u32) -> Self {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for _ in 0..ulps {
            lo = lo.next_down();
            hi = hi.next_up();
        }
        Self { lo, hi }
    }

    pub fn ln(self) -> Self {
        debug_assert!(self.lo > 0.0);
        Self::new(self.lo.ln(), self.hi.ln()).widen(LIBM_SLACK_ULPS)
    }

    pub fn exp(self) -> Self {
        Self::new(self.lo.exp(), self.hi.exp()).widen(LIBM_SLACK_ULPS)
    }

    pub fn powi(self, n: i32) -> Self {
        debug_assert!(self.lo >= 0.0 && n >= 0);
        let mut acc = Self::point(1.0);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }

    /// `Some(ordering)` when the comparison is decided by the enclosures;
    /// `Equal` only for identical point intervals.
    pub fn certified_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.lo > other.hi {
            Some(Ordering::Greater)
        } else if self.hi < other.lo {
            Some(Ordering::Less)
        } else if self.is_point() && other.is_point() && self.lo == other.lo {
            Some(Ordering::Equal)
        } else {
            None
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        let lo = self.lo + o.lo;
        let hi = self.hi + o.hi;
        Interval::new(lo.next_down(), hi.next_up())
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        self + (-o)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo.next_down(), hi.next_up())
    }
}

impl Div for Interval {
    type Output = Interval;
    fn div(self, o: Interval) -> Interval {
        assert!(o.lo > 0.0 || o.hi < 0.0, "division by interval containing zero");
        let c = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo.next_down(), hi.next_up())
    }
}
