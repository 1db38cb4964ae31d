//! Second-order jets (value + first + second derivative with respect to one
//! scalar parameter), used to differentiate curve parametrizations that are
//! built from C-infinity step functions — hand-differentiating those is
//! error-prone, and we need the curve's first and second derivatives for the
//! tube-field Jacobian.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    /// value
    pub v: f64,
    /// first derivative
    pub d: f64,
    /// second derivative
    pub dd: f64,
}

impl Jet2 {
    pub const fn c(v: f64) -> Self {
        Jet2 { v, d: 0.0, dd: 0.0 }
    }

    /// The jet of the identity map at `v` (derivative 1).
    pub const fn var(v: f64) -> Self {
        Jet2 { v, d: 1.0, dd: 0.0 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Jet2 {
            v: e,
            d: e * self.d,
            dd: e * (self.dd + self.d * self.d),
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        Jet2 {
            v: s,
            d: c * self.d,
            dd: c * self.dd - s * self.d * self.d,
        }
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        Jet2 {
            v: c,
            d: -s * self.d,
            dd: -s * self.dd - c * self.d * self.d,
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        Jet2 {
            v: r,
            d: -self.d * r * r,
            dd: (2.0 * self.d * self.d * r - self.dd) * r * r,
        }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v + o.v, d: self.d + o.d, dd: self.dd + o.dd }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v - o.v, d: self.d - o.d, dd: self.dd - o.dd }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
            dd: self.dd * o.v + 2.0 * self.d * o.d + self.v * o.dd,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 { v: -self.v, d: -self.d, dd: -self.dd }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, k: f64) -> Jet2 {
        Jet2 { v: self.v * k, d: self.d * k, dd: self.dd * k }
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, k: f64) -> Jet2 {
        Jet2 { v: self.v + k, ..self }
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(self, k: f64) -> Jet2 {
        Jet2 { v: self.v - k, ..self }
    }
}

/// C-infinity step: 0 for `t <= 0`, 1 for `t >= 1`, strictly increasing in
/// between, flat to all orders at both ends.
pub fn smooth_step(t: Jet2) -> Jet2 {
    if t.v <= 0.0 {
        Jet2::c(0.0)
    } else if t.v >= 1.0 {
        Jet2::c(1.0)
    } else {
        let p = (-t.recip()).exp();
        let q = (-(Jet2::c(1.0) - t).recip()).exp();
        p / (p + q)
    }
}
