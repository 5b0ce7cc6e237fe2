//! The Bryant steady soliton normalised to maximal scalar curvature one,
//! written as `Z₀(ρ)`, the square of the radial derivative in the chart
//! where the orbit radius `ρ` is the coordinate:
//!
//! `Z Z'' − ½ Z'² + (1 − Z) Z'/ρ + 2 (1 − Z) Z/ρ² = 0`, `Z(0) = 1`.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use serde::Serialize;
use thiserror::Error;

use crate::numerics::ode::{Dopri5, OdeError};
use crate::numerics::{self, fd, quad};

/// Second Taylor coefficient of `Z₀` at the origin.
pub const B0: f64 = -1.0 / 6.0;

/// Launch radius for the series start.
pub const LAUNCH_RHO: f64 = 1e-3;

/// Default sampling step of [`BryantProfile`].
pub const DEFAULT_SPACING: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BryantError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("integration failed near rho = {last_rho}: {source}")]
    Integration { last_rho: f64, source: OdeError },
    #[error("profile left (0, 1] at rho = {rho} (Z = {z})")]
    BlowUp { rho: f64, z: f64 },
    #[error("rho = {rho} outside the computed range [0, {rho_max}]")]
    OutOfRange { rho: f64, rho_max: f64 },
    #[error("tail correction {tail} exceeds 10% of the total {total}; extend rho_max")]
    TailTooLarge { tail: f64, total: f64 },
}

/// Origin expansion `1 + b₀ f² + (2/5) b₀² f⁴` with `b₀ = −1/6`; meant for `|f| ≤ 0.5`.
pub fn series_origin(f: f64) -> f64 {
    let f2 = f * f;
    1.0 + B0 * f2 + 0.4 * B0 * B0 * f2 * f2
}

fn series_origin_slope(f: f64) -> f64 {
    2.0 * B0 * f + 1.6 * B0 * B0 * f * f * f
}

/// Residual of the soliton equation at one point.
pub fn ode_residual(rho: f64, z: f64, dz: f64, d2z: f64) -> f64 {
    z * d2z - 0.5 * dz * dz + (1.0 - z) * dz / rho + 2.0 * (1.0 - z) * z / (rho * rho)
}

/// `Z''` solved from the soliton equation.
pub fn second_derivative(rho: f64, z: f64, dz: f64) -> f64 {
    (0.5 * dz * dz - (1.0 - z) * dz / rho - 2.0 * (1.0 - z) * z / (rho * rho)) / z
}

/// Residual of the equation for `Ψ = √Z`:
/// `Ψ'' + (Ψ⁻² − 1) Ψ'/ρ + (Ψ⁻¹ − Ψ)/ρ²`.
pub fn pressure_residual(rho: f64, psi: f64, dpsi: f64, d2psi: f64) -> f64 {
    d2psi + (1.0 / (psi * psi) - 1.0) * dpsi / rho + (1.0 / psi - psi) / (rho * rho)
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BryantConfig {
    pub rho_max: f64,
    pub tol: f64,
    pub spacing: f64,
}

impl BryantConfig {
    pub fn new(rho_max: f64, tol: f64) -> Self {
        Self { rho_max, tol, spacing: DEFAULT_SPACING }
    }
}

/// `Z₀` sampled on a uniform grid `ρᵢ = i·h` together with `Z₀'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BryantProfile {
    rho: Vec<f64>,
    z: Vec<f64>,
    dz: Vec<f64>,
    spacing: f64,
}

/// Integrates the soliton equation from the series launch out to `rho_max`.
pub fn solve_bryant(rho_max: f64, tol: f64) -> Result<BryantProfile, BryantError> {
    solve_bryant_with(BryantConfig::new(rho_max, tol))
}

pub fn solve_bryant_with(cfg: BryantConfig) -> Result<BryantProfile, BryantError> {
    if !(cfg.rho_max >= 10.0) {
        return Err(BryantError::InvalidParameter { name: "rho_max", reason: format!("must be >= 10, got {}", cfg.rho_max) });
    }
    if !(cfg.tol > 1e-14 && cfg.tol < 1e-4) {
        return Err(BryantError::InvalidParameter { name: "tol", reason: format!("must lie in (1e-14, 1e-4), got {}", cfg.tol) });
    }
    if !(cfg.spacing > 0.0 && cfg.spacing <= 0.1) {
        return Err(BryantError::InvalidParameter { name: "spacing", reason: format!("must lie in (0, 0.1], got {}", cfg.spacing) });
    }
    let count = (cfg.rho_max / cfg.spacing).round() as usize;
    let rho: Vec<f64> = (0..=count).map(|i| i as f64 * cfg.spacing).collect();
    let mut z = vec![0.0; rho.len()];
    let mut dz = vec![0.0; rho.len()];
    let mut next = 0;
    while next < rho.len() && rho[next] <= LAUNCH_RHO {
        z[next] = series_origin(rho[next]);
        dz[next] = series_origin_slope(rho[next]);
        next += 1;
    }
    // log-radius variable x = ln ρ, state (Z, ρ Z')
    let x0 = LAUNCH_RHO.ln();
    let y0 = [series_origin(LAUNCH_RHO), LAUNCH_RHO * series_origin_slope(LAUNCH_RHO)];
    let rhs = |_x: f64, y: &[f64; 2]| {
        let (zz, zx) = (y[0], y[1]);
        [zx, zx + (0.5 * zx * zx - (1.0 - zz) * zx - 2.0 * (1.0 - zz) * zz) / zz]
    };
    let mut blow_up = None;
    let mut last_x = x0;
    // Global error of the profile grows to a few hundred local tolerances over
    // the log range, so steps are controlled well below the requested `tol`.
    let local = (1e-2 * cfg.tol).max(1e-14);
    let result = Dopri5::new(local, 1e-3 * local).integrate(rhs, x0, y0, rho[count].ln(), |step| {
        last_x = step.t0;
        if !(step.y1[0] > 0.0 && step.y1[0] <= 1.0) {
            blow_up = Some((step.t1().exp(), step.y1[0]));
            return ControlFlow::Break(());
        }
        while next < rho.len() && rho[next].ln() <= step.t1() {
            let y = step.eval(rho[next].ln());
            z[next] = y[0];
            dz[next] = y[1] / rho[next];
            next += 1;
        }
        ControlFlow::Continue(())
    });
    if let Some((rho, z)) = blow_up {
        return Err(BryantError::BlowUp { rho, z });
    }
    let (_, y_end) = result.map_err(|source| BryantError::Integration { last_rho: last_x.exp(), source })?;
    while next < rho.len() {
        // endpoint rounding: the last sample coincides with the final state
        z[next] = y_end[0];
        dz[next] = y_end[1] / rho[next];
        next += 1;
    }
    Ok(BryantProfile { rho, z, dz, spacing: cfg.spacing })
}

impl BryantProfile {
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn dz(&self) -> &[f64] {
        &self.dz
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn rho_max(&self) -> f64 {
        self.rho[self.rho.len() - 1]
    }

    /// `(Z₀, Z₀')` at any `ρ ∈ [0, rho_max]` (cubic Hermite interpolation).
    pub fn eval(&self, rho: f64) -> Result<(f64, f64), BryantError> {
        if !(rho >= 0.0 && rho <= self.rho_max()) {
            return Err(BryantError::OutOfRange { rho, rho_max: self.rho_max() });
        }
        Ok(numerics::hermite_at(&self.rho, &self.z, &self.dz, rho))
    }

    /// `(Z₀, Z₀', Z₀'')`, the second derivative taken from the equation.
    pub fn eval2(&self, rho: f64) -> Result<(f64, f64, f64), BryantError> {
        let (z, dz) = self.eval(rho)?;
        let d2z = if rho < LAUNCH_RHO { 2.0 * B0 + 4.8 * B0 * B0 * rho * rho } else { second_derivative(rho, z, dz) };
        Ok((z, dz, d2z))
    }

    /// `ρ² Z₀(ρ)`.
    pub fn rho2z(&self, rho: f64) -> Result<f64, BryantError> {
        Ok(rho * rho * self.eval(rho)?.0)
    }

    /// Leading coefficient `c` of `Z₀ ≈ c ρ⁻² + 2c² ρ⁻⁴` fitted at the grid end.
    pub fn c0_measured(&self) -> f64 {
        let r = self.rho_max();
        let q = r * r * self.z[self.z.len() - 1];
        let eps = 1.0 / (r * r);
        (-1.0 + (1.0 + 8.0 * eps * q).sqrt()) / (4.0 * eps)
    }

    /// True when `Z₀' < 0` at every sample with `ρ > 0`.
    pub fn is_decreasing(&self) -> bool {
        self.dz.iter().skip(1).all(|&d| d < 0.0)
    }

    /// CSV with header `rho,Z`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,Z\n");
        for (r, z) in self.rho.iter().zip(&self.z) {
            let _ = writeln!(out, "{r:.17e},{z:.17e}");
        }
        out
    }
}

/// `∫₀^upper Z₀'/(ρ √Z₀) dρ` without any tail beyond `upper`.
pub fn c0_integral(b: &BryantProfile, upper: f64) -> Result<f64, BryantError> {
    let lo = LAUNCH_RHO;
    if !(upper > lo && upper <= b.rho_max()) {
        return Err(BryantError::OutOfRange { rho: upper, rho_max: b.rho_max() });
    }
    Ok(c0_head(lo) + c0_body(b, lo, upper)?)
}

/// Series part `∫₀^ρ₀` of the integrand `2b₀ + (4c − b₀²)ρ² + …`, `c = (2/5) b₀²`.
fn c0_head(rho0: f64) -> f64 {
    let c = 0.4 * B0 * B0;
    2.0 * B0 * rho0 + (4.0 * c - B0 * B0) * rho0.powi(3) / 3.0
}

/// Composite Simpson in `x = ln ρ` on a uniform log grid: `∫ Z'/√Z dx`.
fn c0_body(b: &BryantProfile, lo: f64, hi: f64) -> Result<f64, BryantError> {
    let (x0, x1) = (lo.ln(), hi.ln());
    let n = (((x1 - x0) / 2e-4).ceil() as usize).max(8) | 1;
    let xs: Vec<f64> = (0..n).map(|i| x0 + (x1 - x0) * i as f64 / (n - 1) as f64).collect();
    let ys = xs
        .iter()
        .map(|&x| {
            let r = x.exp().min(hi);
            b.eval(r).map(|(z, dz)| dz / z.sqrt())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(quad::simpson_uniform(&xs, &ys))
}

/// Breakdown of the `C₀` integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C0Report {
    pub value: f64,
    pub head: f64,
    pub body: f64,
    pub tail: f64,
    pub c0_measured: f64,
}

/// `C₀ = ∫₀^∞ Z₀'/(ρ√Z₀) dρ` with series and `ρ⁻²`-asymptotic end corrections.
pub fn compute_c0(b: &BryantProfile) -> Result<C0Report, BryantError> {
    if b.rho_max() < 30.0 {
        return Err(BryantError::InvalidParameter { name: "rho_max", reason: format!("C0 needs rho_max >= 30, got {}", b.rho_max()) });
    }
    let r = b.rho_max();
    let c = b.c0_measured();
    let head = c0_head(LAUNCH_RHO);
    let body = c0_body(b, LAUNCH_RHO, r)?;
    // integrand ≈ −2√c ρ⁻³ (1 + 3c ρ⁻²)
    let tail = -c.sqrt() / (r * r) - 1.5 * c.powf(1.5) / r.powi(4);
    let value = head + body + tail;
    if tail.abs() > 0.1 * value.abs() {
        return Err(BryantError::TailTooLarge { tail, total: value });
    }
    Ok(C0Report { value, head, body, tail, c0_measured: c })
}

/// `Ψ_ρ + (Ψ − Ψ⁻¹)/ρ` for `Ψ = √Z₀`; tends to 0 at the origin and −1 at infinity.
pub fn boundary_functional(b: &BryantProfile, rho: f64) -> Result<f64, BryantError> {
    let (z, dz) = b.eval(rho)?;
    let psi = z.sqrt();
    Ok(dz / (2.0 * psi) + (psi - 1.0 / psi) / rho)
}

/// Pointwise residual of `(2/ρ) Ψ_ρ = d/dρ (Ψ_ρ + (Ψ − Ψ⁻¹)/ρ)` on the profile grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceCheck {
    pub rho: Vec<f64>,
    pub residual: Vec<f64>,
}

impl DivergenceCheck {
    pub fn sup(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn divergence_residual(b: &BryantProfile) -> DivergenceCheck {
    let n = b.rho.len();
    let func: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                let psi = b.z[i].sqrt();
                b.dz[i] / (2.0 * psi) + (psi - 1.0 / psi) / b.rho[i]
            }
        })
        .collect();
    let w = fd::fornberg_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
    let h = b.spacing;
    let mut rho = Vec::with_capacity(n);
    let mut residual = Vec::with_capacity(n);
    for i in 3..n - 2 {
        let d: f64 = (0..5).map(|k| w[1][k] * func[i + k - 2]).sum::<f64>() / h;
        let psi = b.z[i].sqrt();
        let lhs = 2.0 / b.rho[i] * b.dz[i] / (2.0 * psi);
        rho.push(b.rho[i]);
        residual.push(lhs - d);
    }
    DivergenceCheck { rho, residual }
}

/// The constants reported for a solved profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BryantConstants {
    #[serde(rename = "C0")]
    pub c0_integral: f64,
    pub c0_measured: f64,
    pub b0: f64,
}

pub fn constants(b: &BryantProfile) -> Result<BryantConstants, BryantError> {
    let report = compute_c0(b)?;
    Ok(BryantConstants { c0_integral: report.value, c0_measured: report.c0_measured, b0: B0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_values() {
        assert_eq!(series_origin(0.0), 1.0);
        assert!((series_origin(0.3) - 0.985090).abs() < 1e-6);
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(solve_bryant(5.0, 1e-10), Err(BryantError::InvalidParameter { name: "rho_max", .. })));
        assert!(matches!(solve_bryant(20.0, 1e-3), Err(BryantError::InvalidParameter { name: "tol", .. })));
    }

    #[test]
    fn origin_and_far_field() {
        let b = solve_bryant(40.0, 1e-10).unwrap();
        assert_eq!(b.z()[0], 1.0);
        assert!((b.eval(0.1).unwrap().0 - (1.0 - 0.01 / 6.0)).abs() < 1e-5);
        assert!((b.rho2z(30.0).unwrap() - 1.0).abs() < 5e-3);
        assert!(b.is_decreasing());
        assert!(b.eval(41.0).is_err());
    }

    #[test]
    fn equation_is_satisfied_between_samples() {
        let b = solve_bryant(20.0, 1e-11).unwrap();
        let h = 1e-4;
        for &r in &[0.37, 1.234, 4.5, 13.3] {
            let (z, dz) = b.eval(r).unwrap();
            let (_, dzp) = b.eval(r + h).unwrap();
            let (_, dzm) = b.eval(r - h).unwrap();
            let d2z = (dzp - dzm) / (2.0 * h);
            assert!(ode_residual(r, z, dz, d2z).abs() < 1e-6, "at {r}");
        }
    }
}
