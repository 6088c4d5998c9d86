//! Double-double arithmetic (~32 significant digits) for the finite-difference
//! oracle. With a 1e-5 step, plain f64 differences carry ~1e-11 absolute noise,
//! which swamps gradients below ~1e-7.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

impl Dd {
    pub(crate) const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub(crate) const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn ldexp(self, k: i32) -> Dd {
        let s = 2f64.powi(k);
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub(crate) fn exp(self) -> Dd {
        if self.hi > 709.0 {
            return Dd::from(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        // x = k ln2 + r, then exp(r) = exp(r / 2^10)^(2^10)
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Dd::from(k)).ldexp(-10);
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for n in 1..=14 {
            term = term * r / Dd::from(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    pub(crate) fn tanh(self) -> Dd {
        if self.hi.abs() > 40.0 {
            return Dd::from(self.hi.signum());
        }
        if self.hi.abs() < 1e-3 {
            // odd series, avoids cancellation in (e^2x - 1)
            let x2 = self * self;
            // Taylor coefficients num/den of x, x^3, x^5, ...
            let num = [1.0, -1.0, 2.0, -17.0, 62.0, -1382.0, 21844.0];
            let den = [1.0, 3.0, 15.0, 315.0, 2835.0, 155_925.0, 6_081_075.0];
            let mut acc = Dd::ZERO;
            for i in (0..num.len()).rev() {
                acc = acc * x2 + Dd::from(num[i]) / Dd::from(den[i]);
            }
            return acc * self;
        }
        let e = (self + self).exp();
        (e - Dd::ONE) / (e + Dd::ONE)
    }

    pub(crate) fn sigmoid(self) -> Dd {
        Dd::ONE / (Dd::ONE + (-self).exp())
    }
}

impl From<f64> for Dd {
    fn from(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
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
        let r = self - o * Dd::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::from(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_matches_libm() {
        for x in [-30.0, -1.5, -1e-4, 0.0, 0.3, 1.0, 7.25, 50.0] {
            let got = Dd::from(x).exp().to_f64();
            let want = f64::exp(x);
            assert!(((got - want) / want).abs() < 4e-16, "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn extra_precision() {
        // (1 + 1e-20) - 1 survives in double-double
        let tiny = (Dd::ONE + Dd::from(1e-20)) - Dd::ONE;
        assert_eq!(tiny.to_f64(), 1e-20);
        // e^1 * e^-1 = 1 to ~1e-30
        let one = Dd::from(1.0).exp() * Dd::from(-1.0).exp() - Dd::ONE;
        assert!(one.to_f64().abs() < 1e-29, "{:e}", one.to_f64());
        let third = Dd::ONE / Dd::from(3.0) * Dd::from(3.0) - Dd::ONE;
        assert!(third.to_f64().abs() < 1e-30);
    }

    #[test]
    fn tanh_and_sigmoid() {
        for x in [-45.0, -3.0, -0.2, -5e-4, 0.0, 2e-4, 0.7, 12.0] {
            assert!((Dd::from(x).tanh().to_f64() - f64::tanh(x)).abs() < 1e-15, "{x}");
            let s = 1.0 / (1.0 + (-x).exp());
            assert!((Dd::from(x).sigmoid().to_f64() - s).abs() < 1e-15, "{x}");
        }
        // series and exp branches agree at the switch point
        let a = Dd::from(1e-3 - 1e-12).tanh().to_f64();
        let b = Dd::from(1e-3 + 1e-12).tanh().to_f64();
        let slope = 1.0 - f64::tanh(1e-3).powi(2);
        assert!((b - a - 2e-12 * slope).abs() < 1e-18, "{:e}", b - a);
    }
}
