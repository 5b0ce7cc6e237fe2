//! Smooth transition functions with exact first and second derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// A value together with its first two derivatives with respect to one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Self { v, d1: 0.0, d2: 0.0 }
    }

    pub fn variable(v: f64) -> Self {
        Self { v, d1: 1.0, d2: 0.0 }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Self { v: e, d1: e * self.d1, d2: e * (self.d2 + self.d1 * self.d1) }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        Self { v: r, d1: -self.d1 * r * r, d2: (2.0 * self.d1 * self.d1 * r - self.d2) * r * r }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 { v: -self.v, d1: -self.d1, d2: -self.d2 }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
}

impl Mul<Jet2> for f64 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 { v: self * o.v, d1: self * o.d1, d2: self * o.d2 }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        self * o.recip()
    }
}

/// `e^{-1/x}` for `x > 0`, zero otherwise.
fn flat(x: Jet2) -> Jet2 {
    if x.v <= 0.0 {
        Jet2::constant(0.0)
    } else {
        (-x.recip()).exp()
    }
}

/// C^∞ step: 0 for `x ≤ 0`, 1 for `x ≥ 1`, `f(x)/(f(x)+f(1-x))` with
/// `f(x) = e^{-1/x}` in between.
pub fn step(x: Jet2) -> Jet2 {
    if x.v <= 0.0 {
        Jet2::constant(0.0)
    } else if x.v >= 1.0 {
        Jet2::constant(1.0)
    } else {
        let a = flat(x);
        let b = flat(Jet2::constant(1.0) - x);
        a / (a + b)
    }
}

/// Scalar form of [`step`].
pub fn step_value(x: f64) -> f64 {
    step(Jet2::variable(x)).v
}

/// Even bump: 1 on `[-1/2, 1/2]`, 0 outside `[-1, 1]`, equal to
/// `step(2 − 2|y|)` in between.
pub fn bump(y: Jet2) -> Jet2 {
    let a = if y.v < 0.0 { -y } else { y };
    step(Jet2::constant(2.0) - 2.0 * a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_is_symmetric_and_flat_at_the_ends() {
        for &x in &[0.1, 0.3, 0.5, 0.77] {
            let a = step(Jet2::variable(x));
            let b = step(Jet2::variable(1.0 - x));
            assert!((a.v + b.v - 1.0).abs() < 1e-15);
            assert!((a.d1 - b.d1).abs() < 1e-12);
        }
        assert_eq!(step(Jet2::variable(-0.2)).v, 0.0);
        assert_eq!(step(Jet2::variable(1.3)).d1, 0.0);
        assert!(step(Jet2::variable(1e-3)).v < 1e-300);
    }

    #[test]
    fn jet_derivatives_match_finite_differences() {
        let h = 1e-5;
        for &x in &[0.2, 0.45, 0.8] {
            let j = step(Jet2::variable(x));
            let fp = step_value(x + h);
            let fm = step_value(x - h);
            assert!((j.d1 - (fp - fm) / (2.0 * h)).abs() < 1e-6);
            assert!((j.d2 - (fp - 2.0 * j.v + fm) / (h * h)).abs() < 1e-3);
        }
    }

    #[test]
    fn bump_support() {
        assert_eq!(bump(Jet2::variable(0.4)).v, 1.0);
        assert_eq!(bump(Jet2::variable(-0.5)).v, 1.0);
        assert_eq!(bump(Jet2::variable(1.0)).v, 0.0);
        let m = bump(Jet2::variable(0.75)).v;
        assert!((m - 0.5).abs() < 1e-15);
    }
}
