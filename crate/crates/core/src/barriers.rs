//! Supersolutions `Y_a(u)` of the stationary tip equation
//!
//! `op[Y] = Y Y'' − (u/2) Y' − ½ Y'² + (1 − Y) Y'/u + 2 (1 − Y) Y/u²`,
//!
//! one for each large parameter `a`.
//!
//! Near `u = 0` the curve is a rescaled Bryant profile, `Z₀(a u/√2) − a⁻²`.
//! Away from the tip it is the two-term expansion
//! `a⁻²(2u⁻² − 1) + a⁻⁴(8u⁻⁴ + ζ(u))`. The leading-order curve
//! `Z₀(a u/√2) − a⁻²` on its own has a residual of size `+a⁻⁴(8u⁻⁴ − 2u⁻²)`,
//! which has the wrong sign. So the inner piece instead solves the forced
//! equation `op[Y] = −m(u)` with
//!
//! `m(u) = a⁻⁴ (A u⁻⁴ + B u⁶)`, `A = 4/5`, `B = 11/160`,
//!
//! launched from Bryant data at `u = r*/a`. The dilation `λ` of that data is
//! fixed by shooting, so that the inner piece meets the outer expansion at
//! `u_j = √2 − 0.05`. The outer correction `ζ` solves the same forced
//! equation at order `a⁻⁴`. With this forcing, `ζ` is smooth through `u = √2`
//! and satisfies `2 + ζ(√2) = 1/4`.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use serde::Serialize;
use thiserror::Error;

use crate::bryant::{BryantError, BryantProfile};
use crate::numerics::fd::{self, EndRule};
use crate::numerics::ode::Dopri5;
use crate::numerics::smooth::step_value;
use crate::numerics::{find_root, lerp_at};

const FORCING_A: f64 = 0.8;
const FORCING_B: f64 = 11.0 / 160.0;

/// Default absolute slack of [`barrier_dominates`].
pub const DOMINANCE_SLACK: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum BarrierError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("bryant profile too short: need rho up to {needed}, have {available}")]
    BryantTooShort { needed: f64, available: f64 },
    #[error(transparent)]
    Bryant(#[from] BryantError),
    #[error("shooting for the inner piece failed for a = {a}")]
    Shooting { a: f64 },
    #[error("window [{lo}, {hi}] is not inside the barrier domain [{min}, {max}]")]
    Domain { lo: f64, hi: f64, min: f64, max: f64 },
}

/// The stationary operator of the tip equation. Along the rescaled flow the
/// tip chart evolves by `Y_τ = op[Y]` at fixed `u`.
pub fn stationary_operator(u: f64, y: f64, dy: f64, d2y: f64) -> f64 {
    y * d2y - 0.5 * u * dy - 0.5 * dy * dy + (1.0 - y) * dy / u + 2.0 * (1.0 - y) * y / (u * u)
}

/// Forcing `m(u) = a⁻⁴ (A u⁻⁴ + B u⁶)` that the barrier absorbs.
pub fn forcing(a: f64, u: f64) -> f64 {
    let t = u * u;
    (FORCING_A / (t * t) + FORCING_B * t * t * t) / a.powi(4)
}

/// Order-`a⁻⁴` correction of the outer expansion, in closed form.
pub fn zeta(u: f64) -> f64 {
    let t = u * u;
    let k = 8.0 + FORCING_A;
    let n2 = 2.0 - k / 2.0 - 16.0 * FORCING_B;
    let integral = -0.25 * k * (0.5 * t).ln()
        - FORCING_B * (t * t * t / 3.0 + 2.0 * t * t + 12.0 * t - (8.0 / 3.0 + 8.0 + 24.0));
    n2 / t + (2.0 - t) / t * integral
}

/// `a⁻²(2u⁻² − 1) + a⁻⁴(8u⁻⁴ + ζ(u))`.
pub fn outer_expansion(a: f64, u: f64) -> f64 {
    let e = 1.0 / (a * a);
    e * (2.0 / (u * u) - 1.0) + e * e * (8.0 / u.powi(4) + zeta(u))
}

/// Construction settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierConfig {
    /// Inner end of the domain is `r*/a`.
    pub r_star: f64,
    /// Distance of the junction below `√2`.
    pub join_offset: f64,
    /// Width of the smooth blend ending at the junction.
    pub blend: f64,
    /// Spacing of the sample grid in `ln u`.
    pub log_step: f64,
    /// Relative tolerance of the inner integration.
    pub tol: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self { r_star: 2.0, join_offset: 0.05, blend: 0.05, log_step: 1e-3, tol: 1e-12 }
    }
}

/// One sampled barrier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierCurve {
    pub a: f64,
    pub r_star: f64,
    /// Dilation of the Bryant launch data selected by shooting.
    pub lambda: f64,
    /// Junction between the inner piece and the outer expansion.
    pub u_join: f64,
    pub u: Vec<f64>,
    pub ya: Vec<f64>,
}

impl BarrierCurve {
    pub fn domain(&self) -> (f64, f64) {
        (self.u[0], self.u[self.u.len() - 1])
    }

    /// Linear interpolation on the sample grid.
    pub fn eval(&self, u: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        (lo..=hi).contains(&u).then(|| lerp_at(&self.u, &self.ya, u))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,Ya\n");
        for (u, y) in self.u.iter().zip(&self.ya) {
            let _ = writeln!(out, "{u:.12e},{y:.12e}");
        }
        out
    }
}

pub fn outer_end() -> f64 {
    9.0 / 8.0 * std::f64::consts::SQRT_2
}

pub fn build_barrier(a: f64, bryant: &BryantProfile) -> Result<BarrierCurve, BarrierError> {
    build_barrier_with(a, bryant, &BarrierConfig::default())
}

pub fn build_barrier_with(a: f64, bryant: &BryantProfile, cfg: &BarrierConfig) -> Result<BarrierCurve, BarrierError> {
    if !(a >= 10.0 && a.is_finite()) {
        return Err(BarrierError::InvalidParameter { name: "a", reason: format!("must be >= 10, got {a}") });
    }
    if !(cfg.r_star > 0.0 && cfg.r_star / a < 0.25) {
        return Err(BarrierError::InvalidParameter { name: "r_star", reason: format!("need 0 < r*/a < 1/4, got r* = {}", cfg.r_star) });
    }
    if !(cfg.blend > 0.0 && cfg.join_offset > 0.0 && cfg.blend + cfg.join_offset < 0.5) {
        return Err(BarrierError::InvalidParameter { name: "blend", reason: "blend and join offset must be small and positive".into() });
    }
    let u_in = cfg.r_star / a;
    let u_join = std::f64::consts::SQRT_2 - cfg.join_offset;
    // The shooting brackets λ ∈ [0.9, 1.1].
    let needed = 1.1 * u_in * a / std::f64::consts::SQRT_2;
    if bryant.rho_max() < needed {
        return Err(BarrierError::BryantTooShort { needed, available: bryant.rho_max() });
    }

    let inner = InnerPiece { a, u_in, tol: cfg.tol };
    let target = outer_expansion(a, u_join);
    let mismatch = |lambda: f64| match inner.shoot(bryant, lambda, u_join, &[]) {
        Ok((y, _)) => y - target,
        Err(_) => -1.0,
    };
    let lambda = find_root(mismatch, 0.9, 1.1, 1e-15).ok_or(BarrierError::Shooting { a })?;

    let n = ((outer_end() / u_in).ln() / cfg.log_step).ceil() as usize;
    let u: Vec<f64> = (0..=n).map(|i| u_in * (outer_end() / u_in).powf(i as f64 / n as f64)).collect();
    let split = u.partition_point(|&v| v <= u_join);
    let (_, inner_vals) = inner.shoot(bryant, lambda, u_join, &u[..split]).map_err(|_| BarrierError::Shooting { a })?;
    let blend_start = u_join - cfg.blend;
    let ya = u
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if i >= split {
                outer_expansion(a, v)
            } else {
                let w = step_value((v - blend_start) / cfg.blend);
                inner_vals[i] + w * (outer_expansion(a, v) - inner_vals[i])
            }
        })
        .collect();
    Ok(BarrierCurve { a, r_star: cfg.r_star, lambda, u_join, u, ya })
}

struct InnerPiece {
    a: f64,
    u_in: f64,
    tol: f64,
}

impl InnerPiece {
    /// Integrates the forced equation from `u_in` to `u_end` and returns the
    /// end value together with samples at `grid` (which must lie in range).
    fn shoot(&self, bryant: &BryantProfile, lambda: f64, u_end: f64, grid: &[f64]) -> Result<(f64, Vec<f64>), ()> {
        let scale = lambda * self.a / std::f64::consts::SQRT_2;
        let (z, dz) = bryant.eval(scale * self.u_in).map_err(|_| ())?;
        let y0 = [z - 1.0 / (self.a * self.a), scale * dz];
        let a = self.a;
        let rhs = move |u: f64, y: &[f64; 2]| {
            let (v, dv) = (y[0], y[1]);
            let lhs = -forcing(a, u) + 0.5 * u * dv + 0.5 * dv * dv - (1.0 - v) * dv / u - 2.0 * (1.0 - v) * v / (u * u);
            [dv, lhs / v]
        };
        let mut samples = vec![f64::NAN; grid.len()];
        let mut next = 0;
        let mut died = false;
        let solver = Dopri5::new(self.tol, 1e-20).with_h_max(0.05);
        let (_, end) = solver
            .integrate(rhs, self.u_in, y0, u_end, |step| {
                if !(step.y1[0] > 0.0) {
                    died = true;
                    return ControlFlow::Break(());
                }
                while next < grid.len() && grid[next] <= step.t1() {
                    samples[next] = step.eval(grid[next])[0];
                    next += 1;
                }
                ControlFlow::Continue(())
            })
            .map_err(|_| ())?;
        if died {
            return Err(());
        }
        Ok((end[0], samples))
    }
}

/// Pointwise operator values of a sampled barrier and their supremum over
/// the inspection window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub u: Vec<f64>,
    pub residual: Vec<f64>,
    pub window: (f64, f64),
    pub sup: f64,
    pub sup_at: f64,
    pub negative: bool,
}

impl ResidualReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,residual\n");
        for (u, r) in self.u.iter().zip(&self.residual) {
            let _ = writeln!(out, "{u:.12e},{r:.12e}");
        }
        out
    }

    /// Operator value at the grid point closest to `u`.
    pub fn at(&self, u: f64) -> f64 {
        let i = self.u.partition_point(|&v| v < u).min(self.u.len() - 1);
        let j = if i > 0 && (self.u[i - 1] - u).abs() < (self.u[i] - u).abs() { i - 1 } else { i };
        self.residual[j]
    }
}

/// Five-point finite-difference evaluation of the operator on any sampled
/// curve, with the supremum taken over `window`.
pub fn operator_residual(u: &[f64], y: &[f64], window: (f64, f64)) -> ResidualReport {
    let (d1, d2) = fd::derivatives(u, y, EndRule::OneSided, EndRule::OneSided);
    let residual: Vec<f64> = (0..u.len()).map(|i| stationary_operator(u[i], y[i], d1[i], d2[i])).collect();
    let (sup, sup_at) = u
        .iter()
        .zip(&residual)
        .filter(|(v, _)| (window.0..=window.1).contains(*v))
        .map(|(&v, &r)| (r, v))
        .fold((f64::NEG_INFINITY, f64::NAN), |acc, x| if x.0 > acc.0 { x } else { acc });
    ResidualReport { u: u.to_vec(), residual, window, sup, sup_at, negative: sup < 0.0 }
}

/// Inspection window `[2√2 r*/a, √2 − η]`.
pub fn inspection_window(b: &BarrierCurve, eta: f64) -> (f64, f64) {
    (2.0 * std::f64::consts::SQRT_2 * b.r_star / b.a, std::f64::consts::SQRT_2 - eta)
}

pub fn supersolution_residual(b: &BarrierCurve, eta: f64) -> ResidualReport {
    operator_residual(&b.u, &b.ya, inspection_window(b, eta))
}

/// True iff `flow_y(u) ≤ Y_a(u) + slack` at every barrier node inside the
/// window and at both window ends.
pub fn barrier_dominates(flow_y: impl Fn(f64) -> f64, b: &BarrierCurve, window: (f64, f64)) -> Result<bool, BarrierError> {
    barrier_dominates_with_slack(flow_y, b, window, DOMINANCE_SLACK)
}

pub fn barrier_dominates_with_slack(
    flow_y: impl Fn(f64) -> f64,
    b: &BarrierCurve,
    window: (f64, f64),
    slack: f64,
) -> Result<bool, BarrierError> {
    let (min, max) = b.domain();
    let (lo, hi) = window;
    if !(lo <= hi && lo >= min && hi <= max) {
        return Err(BarrierError::Domain { lo, hi, min, max });
    }
    let interior = b.u.iter().zip(&b.ya).filter(|(u, _)| (lo..=hi).contains(*u)).map(|(&u, &y)| (u, y));
    let ends = [lo, hi].into_iter().map(|u| (u, lerp_at(&b.u, &b.ya, u)));
    Ok(interior.chain(ends).all(|(u, y)| flow_y(u) <= y + slack))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_value_at_the_neck_radius() {
        let r2 = std::f64::consts::SQRT_2;
        assert!((2.0 + zeta(r2) - 0.25).abs() < 1e-13);
        // smooth through √2: a (u − √2) ln|u − √2| term would make the
        // second difference grow like ln h
        let d2 = |h: f64| (zeta(r2 + h) - 2.0 * zeta(r2) + zeta(r2 - h)) / (h * h);
        assert!((d2(1e-2) - d2(1e-3)).abs() < 1e-2, "{} vs {}", d2(1e-2), d2(1e-3));
        assert!(d2(1e-3).abs() < 100.0);
    }

    #[test]
    fn outer_expansion_absorbs_the_forcing() {
        // op[Y_exp] = −m(1 + O(a⁻²)) checked with centred differences; the
        // difference error in Y' must stay well below m ~ a⁻⁴
        let gap = |a: f64, u: f64| {
            let h = 1e-4;
            let f = |v: f64| outer_expansion(a, v);
            let y = f(u);
            let dy = (8.0 * (f(u + h) - f(u - h)) - f(u + 2.0 * h) + f(u - 2.0 * h)) / (12.0 * h);
            let d2y = (f(u + h) - 2.0 * y + f(u - h)) / (h * h);
            stationary_operator(u, y, dy, d2y) / forcing(a, u) + 1.0
        };
        for &u in &[1.0, 1.3, 1.5] {
            let (g1, g2) = (gap(200.0, u), gap(400.0, u));
            assert!(g1.abs() * 200f64.powi(2) < 300.0, "u = {u}: {g1}");
            if u == 1.0 {
                assert!((g1 / g2 - 4.0).abs() < 0.1, "u = {u}: {g1} vs {g2}");
            }
        }
    }

    #[test]
    fn zero_is_a_fixed_point_of_the_operator() {
        assert_eq!(stationary_operator(0.7, 0.0, 0.0, 0.0), 0.0);
    }
}
