//! Minimal double-double arithmetic for the overlap-matrix recursion.
//!
//! Overlap matrices of many magnons combine terms spanning tens of orders
//! of magnitude; accumulating the recursion in plain f64 loses the small
//! entries to cancellation noise. A double-double carries ~32 significant
//! digits through the chain, and only the final snapshot is rounded.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

// Dekker split against the 2^27 + 1 constant.
#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let err = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from_f64(q1)));
        let q2 = r.hi / other.hi;
        let r = r.sub(other.mul(Dd::from_f64(q2)));
        let q3 = r.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }.add(Dd::from_f64(q3))
    }

    #[inline]
    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::from_f64(self.hi.sqrt());
        }
        let y = Dd::from_f64(self.hi.sqrt());
        // One Newton step: y' = (y + a / y) / 2.
        let refined = y.add(self.div(y));
        Dd {
            hi: refined.hi * 0.5,
            lo: refined.lo * 0.5,
        }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Complex number with double-double components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Cdd {
    pub re: Dd,
    pub im: Dd,
}

impl Cdd {
    pub const ZERO: Cdd = Cdd {
        re: Dd::ZERO,
        im: Dd::ZERO,
    };

    #[inline]
    pub fn from_c64(z: Complex64) -> Cdd {
        Cdd {
            re: Dd::from_f64(z.re),
            im: Dd::from_f64(z.im),
        }
    }

    #[inline]
    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.hi + self.re.lo, self.im.hi + self.im.lo)
    }

    #[inline]
    pub fn conj(self) -> Cdd {
        Cdd {
            re: self.re,
            im: Dd {
                hi: -self.im.hi,
                lo: -self.im.lo,
            },
        }
    }

    #[inline]
    pub fn add(self, other: Cdd) -> Cdd {
        Cdd {
            re: self.re.add(other.re),
            im: self.im.add(other.im),
        }
    }

    #[inline]
    pub fn sub(self, other: Cdd) -> Cdd {
        Cdd {
            re: self.re.sub(other.re),
            im: self.im.sub(other.im),
        }
    }

    #[inline]
    pub fn mul(self, other: Cdd) -> Cdd {
        Cdd {
            re: self.re.mul(other.re).sub(self.im.mul(other.im)),
            im: self.re.mul(other.im).add(self.im.mul(other.re)),
        }
    }

    /// Division by a real double-double.
    #[inline]
    pub fn div_real(self, d: Dd) -> Cdd {
        Cdd {
            re: self.re.div(d),
            im: self.im.div(d),
        }
    }

    /// Multiplication by a real double-double.
    #[inline]
    pub fn mul_real(self, d: Dd) -> Cdd {
        Cdd {
            re: self.re.mul(d),
            im: self.im.mul(d),
        }
    }

    #[inline]
    pub fn neg(self) -> Cdd {
        Cdd {
            re: Dd { hi: -self.re.hi, lo: -self.re.lo },
            im: Dd { hi: -self.im.hi, lo: -self.im.lo },
        }
    }

    #[inline]
    pub fn norm_sqr_f64(self) -> f64 {
        let re = self.re.to_f64();
        let im = self.im.to_f64();
        re * re + im * im
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn representable_cancellation() {
        // (1e16 + 1) - 1e16 loses the 1 in f64 but not in double-double.
        let big = Dd::from_f64(1e16);
        let sum = big.add(Dd::from_f64(1.0)).sub(big);
        assert_eq!(sum.hi, 1.0);
        assert_eq!(sum.lo, 0.0);
    }

    #[test]
    fn product_error_term() {
        let a = Dd::from_f64(1.0 + 2f64.powi(-30));
        let b = a.mul(a);
        let exact = 1.0 + 2f64.powi(-29) + 2f64.powi(-60);
        assert!((b.hi + b.lo - exact).abs() < 1e-32);
    }

    #[test]
    fn complex_arithmetic_matches_f64_for_small_inputs() {
        let z = Cdd::from_c64(Complex64::new(0.3, -0.7));
        let w = Cdd::from_c64(Complex64::new(-1.1, 0.2));
        let got = z.mul(w).add(z.conj()).to_c64();
        let want = Complex64::new(0.3, -0.7) * Complex64::new(-1.1, 0.2)
            + Complex64::new(0.3, 0.7);
        assert!((got - want).norm() < 1e-15);
    }
}
