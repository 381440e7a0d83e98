//! Scalar abstraction shared by every derivative carrier.
//!
//! Residual operators, network forwards, and closed-form solutions are all
//! written once, generically over [`Scalar`]. Instantiating the same code at
//! `f64`, [`Dual`], [`Jet2`], or a tape variable is what gives us plain
//! values, first derivatives, second directional derivatives, and the mixed
//! third-order terms (via nesting, e.g. `Jet2<Dual<f64>>`) without separate
//! hand-written rules per caller.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Field-like number that supports the elementary functions appearing in the
/// benchmark residuals. `scale`/`shift` exist so generic code can mix in
/// plain `f64` constants without needing a context to lift them.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    /// The value channel, stripped of any derivative information.
    fn value(self) -> f64;
    /// `self * c` for a plain constant.
    fn scale(self, c: f64) -> Self;
    /// `self + c` for a plain constant.
    fn shift(self, c: f64) -> Self;
    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn sq(self) -> Self {
        self * self
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn shift(self, c: f64) -> Self {
        self + c
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

/// First-order dual number: value plus one directional derivative.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Dual<S: Scalar> {
    pub v: S,
    pub d: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(v: S, d: S) -> Self {
        Self { v, d }
    }
    pub fn constant(v: S) -> Self {
        Self { v, d: S::zero() }
    }
    /// Input seeded as the differentiation variable.
    pub fn seeded(v: S) -> Self {
        Self { v, d: S::one() }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Self::new(self.v + r.v, self.d + r.d)
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Self::new(self.v - r.v, self.d - r.d)
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        Self::new(self.v * r.v, self.d * r.v + self.v * r.d)
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        let w = self.v / r.v;
        Self::new(w, (self.d - w * r.d) / r.v)
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v, -self.d)
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn from_f64(v: f64) -> Self {
        Self::constant(S::from_f64(v))
    }
    fn value(self) -> f64 {
        self.v.value()
    }
    fn scale(self, c: f64) -> Self {
        Self::new(self.v.scale(c), self.d.scale(c))
    }
    fn shift(self, c: f64) -> Self {
        Self::new(self.v.shift(c), self.d)
    }
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        // d tanh = (1 - tanh^2)
        Self::new(t, self.d * (S::one() - t * t))
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        Self::new(e, self.d * e)
    }
    fn sin(self) -> Self {
        Self::new(self.v.sin(), self.d * self.v.cos())
    }
    fn cos(self) -> Self {
        Self::new(self.v.cos(), -(self.d * self.v.sin()))
    }
}

/// Second-order jet along a single input direction: value, first, and second
/// directional derivative. Arithmetic follows the second-order Taylor
/// composition rules exactly; constants promote with `d1 = d2 = 0`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Jet2<S: Scalar = f64> {
    pub value: S,
    pub d1: S,
    pub d2: S,
}

impl<S: Scalar> Jet2<S> {
    pub fn new(value: S, d1: S, d2: S) -> Self {
        Self { value, d1, d2 }
    }
    pub fn constant(value: S) -> Self {
        Self::new(value, S::zero(), S::zero())
    }
    /// Input coordinate seeded as the jet direction (d1 = 1, d2 = 0).
    pub fn seeded(value: S) -> Self {
        Self::new(value, S::one(), S::zero())
    }
}

impl<S: Scalar> Add for Jet2<S> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Self::new(self.value + r.value, self.d1 + r.d1, self.d2 + r.d2)
    }
}

impl<S: Scalar> Sub for Jet2<S> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Self::new(self.value - r.value, self.d1 - r.d1, self.d2 - r.d2)
    }
}

impl<S: Scalar> Mul for Jet2<S> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        // (fg)'' = f''g + 2 f'g' + f g''
        Self::new(
            self.value * r.value,
            self.d1 * r.value + self.value * r.d1,
            self.d2 * r.value + (self.d1 * r.d1).scale(2.0) + self.value * r.d2,
        )
    }
}

impl<S: Scalar> Div for Jet2<S> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        let w = self.value / r.value;
        let w1 = (self.d1 - w * r.d1) / r.value;
        let w2 = (self.d2 - (w1 * r.d1).scale(2.0) - w * r.d2) / r.value;
        Self::new(w, w1, w2)
    }
}

impl<S: Scalar> Neg for Jet2<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.d1, -self.d2)
    }
}

impl<S: Scalar> Scalar for Jet2<S> {
    fn from_f64(v: f64) -> Self {
        Self::constant(S::from_f64(v))
    }
    fn value(self) -> f64 {
        self.value.value()
    }
    fn scale(self, c: f64) -> Self {
        Self::new(self.value.scale(c), self.d1.scale(c), self.d2.scale(c))
    }
    fn shift(self, c: f64) -> Self {
        Self::new(self.value.shift(c), self.d1, self.d2)
    }
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        let s = S::one() - t * t;
        // (tanh f)'' = s f'' - 2 t s (f')^2
        Self::new(
            t,
            s * self.d1,
            s * self.d2 - (t * s * self.d1 * self.d1).scale(2.0),
        )
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        Self::new(e, e * self.d1, e * (self.d2 + self.d1 * self.d1))
    }
    fn sin(self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        Self::new(s, c * self.d1, c * self.d2 - s * self.d1 * self.d1)
    }
    fn cos(self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        Self::new(c, -(s * self.d1), -(s * self.d2) - c * self.d1 * self.d1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs() + b.abs())
    }

    // Scalar test function with all primitives: f(x) = tanh(x) * exp(0.3 x) + sin(x) / (cos(x) + 2) - x^2
    fn probe<S: Scalar>(x: S) -> S {
        x.tanh() * (x.scale(0.3)).exp() + x.sin() / (x.cos().shift(2.0)) - x.sq()
    }

    #[test]
    fn jet2_matches_central_differences() {
        let h = 1e-5;
        for &x in &[-1.7, -0.4, 0.0, 0.33, 1.9] {
            let j = probe(Jet2::<f64>::seeded(x));
            let f = |x: f64| probe(x);
            let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
            let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            assert!(close(j.value, f(x), 1e-14));
            assert!(close(j.d1, d1, 1e-8), "d1 {} vs {}", j.d1, d1);
            assert!(close(j.d2, d2, 1e-4), "d2 {} vs {}", j.d2, d2);
        }
    }

    #[test]
    fn dual_matches_jet_first_derivative() {
        for &x in &[-0.9, 0.1, 2.3] {
            let d = probe(Dual::<f64>::seeded(x));
            let j = probe(Jet2::<f64>::seeded(x));
            assert!(close(d.d, j.d1, 1e-13));
        }
    }

    #[test]
    fn product_rule_second_order_identity() {
        // (f*g).d2 = f.d2*g + 2 f.d1*g.d1 + f*g.d2 on raw jets
        let f = Jet2::new(1.3, -0.7, 0.25);
        let g = Jet2::new(-2.1, 0.4, 1.5);
        let p = f * g;
        assert!(close(
            p.d2,
            f.d2 * g.value + 2.0 * f.d1 * g.d1 + f.value * g.d2,
            1e-15
        ));
    }

    #[test]
    fn constants_carry_no_derivatives() {
        let c = Jet2::<f64>::from_f64(4.2);
        assert_eq!(c.d1, 0.0);
        assert_eq!(c.d2, 0.0);
        let x = Jet2::<f64>::seeded(1.0);
        let y = x * c + c;
        assert!(close(y.d1, 4.2, 1e-15));
        assert_eq!(y.d2, 0.0);
    }

    #[test]
    fn nested_jet_over_dual_gives_mixed_third_order() {
        // g(x, y) = tanh(x*y) ; check d/dy (d^2/dx^2 g) by nesting Jet2 (x-dir) over Dual (y-dir).
        let x0 = 0.7;
        let y0 = -0.4;
        let g = |x: f64, y: f64| (x * y).tanh();
        let xj: Jet2<Dual<f64>> = Jet2::seeded(Dual::constant(x0));
        let yj: Jet2<Dual<f64>> = Jet2::constant(Dual::seeded(y0));
        let out = (xj * yj).tanh();
        // FD oracle on d^2/dx^2 with respect to y
        let h = 1e-5;
        let hx = 1e-4;
        let d2x = |y: f64| (g(x0 + hx, y) - 2.0 * g(x0, y) + g(x0 - hx, y)) / (hx * hx);
        let mixed = (d2x(y0 + h) - d2x(y0 - h)) / (2.0 * h);
        assert!(close(out.d2.d, mixed, 1e-3), "{} vs {}", out.d2.d, mixed);
    }

    #[test]
    fn division_taylor_consistency() {
        // f/g recomputed as f * (1/g) through value channel FD
        let f = |x: f64| (x.sin() + 2.0) / (x.exp() + 0.5);
        let x0 = 0.42;
        let j = {
            let x = Jet2::<f64>::seeded(x0);
            (x.sin().shift(2.0)) / (x.exp().shift(0.5))
        };
        let h = 1e-5;
        let d1 = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
        let d2 = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
        assert!(close(j.d1, d1, 1e-9));
        assert!(close(j.d2, d2, 1e-4));
    }
}
