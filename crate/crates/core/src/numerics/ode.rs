//! Adaptive Dormand–Prince 5(4) integrator with continuous output.

use std::ops::ControlFlow;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Tolerances and limits for [`Dopri5::integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, h_init: 0.0, h_max: f64::INFINITY, max_steps: 10_000_000 }
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    pub fn with_h_init(mut self, h: f64) -> Self {
        self.h_init = h;
        self
    }

    /// Integrate `y' = f(t, y)` from `t0` to `t1` (`t1 > t0`).
    ///
    /// `on_step` sees every accepted step with its continuous extension and may
    /// stop the integration early; the returned pair is the last accepted state.
    pub fn integrate<const N: usize, F, C>(
        &self,
        mut f: F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        mut on_step: C,
    ) -> Result<(f64, [f64; N]), OdeError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        C: FnMut(&Step<N>) -> ControlFlow<()>,
    {
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let span = t1 - t0;
        let mut h = if self.h_init > 0.0 { self.h_init } else { self.initial_step(&y, &k1, span) };
        h = h.min(self.h_max);
        let mut steps = 0usize;
        let mut fac_old: f64 = 1e-4;
        while t < t1 {
            if steps >= self.max_steps {
                return Err(OdeError::TooManySteps { t, max_steps: self.max_steps });
            }
            steps += 1;
            let last = t + h >= t1;
            if last {
                h = t1 - t;
            }
            if h <= 1e-14 * t.abs().max(span.abs()).max(1e-300) {
                return Err(OdeError::StepUnderflow { t });
            }
            let stage = |a: &[(f64, &[f64; N])]| {
                let mut out = y;
                for (coef, k) in a {
                    for i in 0..N {
                        out[i] += h * coef * k[i];
                    }
                }
                out
            };
            let k2 = f(t + C2 * h, &stage(&[(A21, &k1)]));
            let k3 = f(t + C3 * h, &stage(&[(A31, &k1), (A32, &k2)]));
            let k4 = f(t + C4 * h, &stage(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
            let k5 = f(t + C5 * h, &stage(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
            let k6 = f(t + h, &stage(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
            let y_new = stage(&[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(t + h, &y_new);
            let mut err = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                if h < 1e-12 * span.abs() {
                    return Err(OdeError::NonFinite { t });
                }
                h *= 0.1;
                continue;
            }
            if err <= 1.0 {
                let mut cont = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y_new[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    cont[0][i] = y[i];
                    cont[1][i] = dy;
                    cont[2][i] = bspl;
                    cont[3][i] = dy - h * k7[i] - bspl;
                    cont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                let step = Step { t0: t, h, cont, y1: y_new };
                t = if last { t1 } else { t + h };
                y = y_new;
                k1 = k7;
                if on_step(&step).is_break() {
                    return Ok((t, y));
                }
                // PI step-size control (Hairer's DOPRI5 constants)
                let fac = err.max(1e-10).powf(0.2 - 0.04 * 0.75) / fac_old.powf(0.04);
                fac_old = err.max(1e-4);
                h = (h / (fac / 0.9).clamp(0.1, 5.0)).min(self.h_max);
            } else {
                let fac = err.powf(0.2 - 0.04 * 0.75);
                h /= (fac / 0.9).min(10.0);
            }
        }
        Ok((t, y))
    }

    fn initial_step<const N: usize>(&self, y: &[f64; N], k: &[f64; N], span: f64) -> f64 {
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..N {
            let sk = self.atol + self.rtol * y[i].abs();
            dnf += (k[i] / sk).powi(2);
            dny += (y[i] / sk).powi(2);
        }
        let h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * (dny / dnf).sqrt() };
        h.min(span.abs()).max(1e-12 * span.abs())
    }
}

/// An accepted step with its continuous extension.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
    pub y1: [f64; N],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn y0(&self) -> [f64; N] {
        self.cont[0]
    }

    /// Fourth-order accurate interpolant on `[t0, t0 + h]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut out = [0.0; N];
        for i in 0..N {
            let c = &self.cont;
            out[i] = c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_to_tolerance() {
        let (t, y) = Dopri5::new(1e-12, 1e-14)
            .integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, |_| ControlFlow::Continue(()))
            .unwrap();
        assert_eq!(t, 2.0);
        assert!((y[0] - 2f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_tracks_harmonic_oscillator() {
        let mut worst: f64 = 0.0;
        Dopri5::new(1e-11, 1e-13)
            .integrate(
                |_, y: &[f64; 2]| [y[1], -y[0]],
                0.0,
                [0.0, 1.0],
                10.0,
                |step| {
                    for j in 1..8 {
                        let t = step.t0 + step.h * j as f64 / 8.0;
                        let y = step.eval(t);
                        worst = worst.max((y[0] - t.sin()).abs()).max((y[1] - t.cos()).abs());
                    }
                    ControlFlow::Continue(())
                },
            )
            .unwrap();
        assert!(worst < 1e-9, "dense output error {worst}");
    }

    #[test]
    fn early_stop_returns_last_state() {
        let (t, _) = Dopri5::new(1e-8, 1e-10)
            .integrate(
                |_, _: &[f64; 1]| [1.0],
                0.0,
                [0.0],
                10.0,
                |s| if s.y1[0] > 1.0 { ControlFlow::Break(()) } else { ControlFlow::Continue(()) },
            )
            .unwrap();
        assert!(t > 1.0 && t < 10.0);
    }
}
