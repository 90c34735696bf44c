//! Double-double arithmetic (~106-bit mantissa), used as an independent
//! high-precision oracle.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

pub const LN2: Dd = Dd { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };
pub const PI: Dd = Dd { hi: std::f64::consts::PI, lo: 1.224_646_799_147_353_2e-16 };

impl Dd {
    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn sqr(self) -> Self {
        self * self
    }

    fn ldexp(self, e: i32) -> Self {
        let k = 2f64.powi(e);
        Dd { hi: self.hi * k, lo: self.lo * k }
    }

    pub fn exp(self) -> Self {
        if self.hi == 0.0 {
            return Dd::new(1.0);
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2 * Dd::new(k);
        // Shrink further so the series converges in a few terms.
        let r = r.ldexp(-10);
        let mut term = Dd::new(1.0);
        let mut sum = Dd::new(1.0);
        for i in 1..30 {
            term = term * r / Dd::new(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-40 {
                break;
            }
        }
        for _ in 0..10 {
            sum = sum.sqr();
        }
        sum.ldexp(k as i32)
    }

    /// Natural log by Newton iteration on `exp`.
    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of non-positive value");
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..3 {
            y = y + self * (-y).exp() - Dd::new(1.0);
        }
        y
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

/// Identities the oracle must satisfy before it is trusted.
pub fn self_check() -> bool {
    let e = Dd::new(1.0).exp();
    let x = Dd::new(0.1);
    let third = Dd::new(1.0) / Dd::new(3.0);
    e.hi == std::f64::consts::E
        && (Dd::new(2.0).ln() - LN2).hi.abs() < 1e-31
        && ((x.exp().ln() - x) / x).hi.abs() < 1e-26
        && (third * Dd::new(3.0) - Dd::new(1.0)).hi.abs() < 1e-31
}
