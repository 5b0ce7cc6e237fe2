//! Hermite analysis on the Gaussian-weighted line `L²(ℝ, e^{−σ²/4} dσ)`.
//!
//! `𝓛 v = v'' − (σ/2) v' + v` is diagonal in the monic Hermite basis
//! `h₀ = 1`, `h₂ = σ² − 2`, `h₄ = σ⁴ − 12σ² + 12`, …, with `𝓛 h_n = (1 − n/2) h_n`.
//! Perturbations `v = u/√2 − 1` of the cylinder are cut off with
//! `χ(σ) = χ̂(δ^θ σ)` before projection. Here
//! `χ̂(y) = s(2 − 2|y|)` and `s(x) = f(x)/(f(x) + f(1 − x))`, `f(x) = e^{−1/x}`.

use std::f64::consts::PI;

use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use crate::numerics::fd::{self, EndRule};
use crate::numerics::poly::Poly;
use crate::numerics::quad::{cumulative_trapezoid, gauss_hermite, integrate_sampled};
use crate::numerics::smooth::{bump, Jet2};

/// Gauss–Hermite nodes used for polynomial and closure inner products.
pub const QUADRATURE_NODES: usize = 60;
/// Exponent in `χ(σ) = χ̂(δ^θ σ)`.
pub const THETA: f64 = 0.01;
/// Largest admissible weight mass outside a sampled grid.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("grid covers |sigma| <= {reach} only; weight mass outside is {outside:e}")]
    GridTooNarrow { reach: f64, outside: f64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("1 + v <= 0 at sigma = {sigma}")]
    Degenerate { sigma: f64 },
}

/// `∫ σ^{2k} e^{−σ²/4} dσ = 2√π (2k − 1)!! 2^k`; odd moments vanish.
pub fn gaussian_moment(n: usize) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    let k = n / 2;
    let dfact: f64 = (1..=k).map(|j| (2 * j - 1) as f64).product();
    2.0 * PI.sqrt() * dfact * 2f64.powi(k as i32)
}

/// Monic Hermite polynomials for the weight `e^{−σ²/4}`:
/// `h_{n+1} = σ h_n − 2n h_{n−1}`.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    polys: Vec<Poly>,
}

impl HermiteBasis {
    /// All `h_n` with `n ≤ max_even_index` (rounded up to even).
    pub fn new(max_even_index: usize) -> Self {
        let top = max_even_index + max_even_index % 2;
        let mut polys = vec![Poly::from_ints(&[1]), Poly::x()];
        for n in 1..top {
            let next = &(&Poly::x() * &polys[n]) - &polys[n - 1].scale(Rational64::from_integer(2 * n as i64));
            polys.push(next);
        }
        polys.truncate(top + 1);
        Self { polys }
    }

    pub fn max_index(&self) -> usize {
        self.polys.len() - 1
    }

    /// `h_n`. Panics when `n` exceeds the constructed range.
    pub fn h(&self, n: usize) -> &Poly {
        &self.polys[n]
    }

    /// Even members `h₀, h₂, …`.
    pub fn even(&self) -> impl Iterator<Item = (usize, &Poly)> {
        self.polys.iter().enumerate().step_by(2)
    }

    /// `‖h_n‖² = 2√π 2ⁿ n!`.
    pub fn norm_sq(n: usize) -> f64 {
        let fact: f64 = (1..=n).map(|j| j as f64).product();
        2.0 * PI.sqrt() * 2f64.powi(n as i32) * fact
    }

    /// `𝓛` eigenvalue of `h_n`.
    pub fn eigenvalue(n: usize) -> f64 {
        1.0 - n as f64 / 2.0
    }
}

/// `𝓛 p = p'' − (σ/2) p' + p` in exact arithmetic.
pub fn apply_l(p: &Poly) -> Poly {
    let d1 = p.derivative();
    let d2 = d1.derivative();
    let drift = (&Poly::x() * &d1).scale(Rational64::new(1, 2));
    &(&d2 - &drift) + p
}

/// `𝓛 v` on a sampled function with five-point differences.
pub fn apply_l_sampled(sigma: &[f64], v: &[f64]) -> Vec<f64> {
    let (d1, d2) = fd::derivatives(sigma, v, EndRule::OneSided, EndRule::OneSided);
    (0..v.len()).map(|i| d2[i] - 0.5 * sigma[i] * d1[i] + v[i]).collect()
}

/// `∫ f e^{−σ²/4} dσ` by Gauss–Hermite after `σ = 2x`.
pub fn weighted_integral(f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_hermite(QUADRATURE_NODES);
    2.0 * x.iter().zip(&w).map(|(&x, &w)| w * f(2.0 * x)).sum::<f64>()
}

pub fn inner_poly(p: &Poly, q: &Poly) -> f64 {
    let (pc, qc) = (p.coeffs_f64(), q.coeffs_f64());
    let horner = |c: &[f64], s: f64| c.iter().rev().fold(0.0, |acc, a| acc * s + a);
    weighted_integral(|s| horner(&pc, s) * horner(&qc, s))
}

/// Weight mass outside `[−reach, reach]`: `2√π erfc(reach/2)`.
pub fn mass_outside(reach: f64) -> f64 {
    2.0 * PI.sqrt() * libm::erfc(reach / 2.0)
}

fn check_grid(sigma: &[f64], lens: &[usize]) -> Result<(), SpectralError> {
    for &len in lens {
        if len != sigma.len() {
            return Err(SpectralError::LengthMismatch(sigma.len(), len));
        }
    }
    let reach = match (sigma.first(), sigma.last()) {
        (Some(a), Some(b)) if sigma.len() >= 5 => (-a).min(*b),
        _ => 0.0,
    };
    let outside = mass_outside(reach.max(0.0));
    if outside > MASS_TOLERANCE {
        return Err(SpectralError::GridTooNarrow { reach, outside });
    }
    Ok(())
}

fn weighted(sigma: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    let y: Vec<f64> = sigma.iter().enumerate().map(|(i, s)| f(i) * (-s * s / 4.0).exp()).collect();
    integrate_sampled(sigma, &y)
}

/// `⟨f, g⟩` for functions sampled on a common grid reaching `|σ| ≥ 12`.
pub fn weighted_inner(sigma: &[f64], f: &[f64], g: &[f64]) -> Result<f64, SpectralError> {
    check_grid(sigma, &[f.len(), g.len()])?;
    Ok(weighted(sigma, |i| f[i] * g[i]))
}

/// The smooth truncation `χ(σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Cutoff {
    /// `χ ≡ 1`.
    Identity,
    /// `χ̂(δ^θ σ)`, with `δ' = delta_rate` entering `χ_τ`.
    Bump { delta: f64, theta: f64, delta_rate: f64 },
}

impl Cutoff {
    pub fn new(delta: f64) -> Result<Self, SpectralError> {
        Self::with_theta(delta, THETA)
    }

    pub fn with_theta(delta: f64, theta: f64) -> Result<Self, SpectralError> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(SpectralError::InvalidParameter { name: "delta", reason: format!("must lie in (0, 1], got {delta}") });
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(SpectralError::InvalidParameter { name: "theta", reason: format!("must be positive, got {theta}") });
        }
        Ok(Self::Bump { delta, theta, delta_rate: 0.0 })
    }

    pub fn with_delta_rate(self, rate: f64) -> Self {
        match self {
            Self::Bump { delta, theta, .. } => Self::Bump { delta, theta, delta_rate: rate },
            Self::Identity => Self::Identity,
        }
    }

    /// Half-width `δ^{−θ}` of the support.
    pub fn support(&self) -> f64 {
        match *self {
            Self::Identity => f64::INFINITY,
            Self::Bump { delta, theta, .. } => delta.powf(-theta),
        }
    }

    /// `χ` with its first two σ-derivatives.
    pub fn jet(&self, sigma: f64) -> Jet2 {
        match *self {
            Self::Identity => Jet2::constant(1.0),
            Self::Bump { delta, theta, .. } => {
                let scale = delta.powf(theta);
                bump(Jet2 { v: scale * sigma, d1: scale, d2: 0.0 })
            }
        }
    }

    /// `χ_τ = χ̂'(δ^θ σ) θ δ^{θ−1} δ' σ`.
    pub fn tau_derivative(&self, sigma: f64) -> f64 {
        match *self {
            Self::Identity => 0.0,
            Self::Bump { delta, theta, delta_rate } => {
                let y = delta.powf(theta) * sigma;
                bump(Jet2::variable(y)).d1 * theta * delta.powf(theta - 1.0) * delta_rate * sigma
            }
        }
    }
}

/// `v̄ = χ v` with `χ(σ) = χ̂(δ^θ σ)`, θ = 1/100.
pub fn truncate(sigma: &[f64], v: &[f64], delta: f64) -> Result<Vec<f64>, SpectralError> {
    truncate_with(sigma, v, &Cutoff::new(delta)?)
}

pub fn truncate_with(sigma: &[f64], v: &[f64], chi: &Cutoff) -> Result<Vec<f64>, SpectralError> {
    if sigma.len() != v.len() {
        return Err(SpectralError::LengthMismatch(sigma.len(), v.len()));
    }
    Ok(sigma.iter().zip(v).map(|(&s, &x)| chi.jet(s).v * x).collect())
}

/// Running `δ(τ) = sup_{τ'≤τ} (|u(0,τ') − √2| + |u_σ(0,τ')|)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DeltaTracker {
    value: f64,
}

impl DeltaTracker {
    pub fn push(&mut self, u0: f64, u_sigma0: f64) -> f64 {
        self.value = self.value.max((u0 - std::f64::consts::SQRT_2).abs() + u_sigma0.abs());
        self.value
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

/// Coefficients of `v̄` on `h₀`, `h₂` and the size of the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Projection {
    /// `⟨v̄, h₂⟩/‖h₂‖²`.
    pub alpha: f64,
    /// `⟨v̄, h₂⟩` without normalisation.
    pub alpha_raw: f64,
    /// `⟨v̄, h₀⟩/‖h₀‖²`.
    pub plus_coeff: f64,
    /// `‖v̄ − plus·h₀ − alpha·h₂‖`.
    pub minus_norm: f64,
}

pub fn project(sigma: &[f64], vbar: &[f64]) -> Result<Projection, SpectralError> {
    check_grid(sigma, &[vbar.len()])?;
    let h2 = |s: f64| s * s - 2.0;
    let alpha_raw = weighted(sigma, |i| vbar[i] * h2(sigma[i]));
    let alpha = alpha_raw / HermiteBasis::norm_sq(2);
    let plus_coeff = weighted(sigma, |i| vbar[i]) / HermiteBasis::norm_sq(0);
    let rest = weighted(sigma, |i| (vbar[i] - plus_coeff - alpha * h2(sigma[i])).powi(2));
    Ok(Projection { alpha, alpha_raw, plus_coeff, minus_norm: rest.max(0.0).sqrt() })
}

/// Projection of a closure by Gauss–Hermite quadrature.
pub fn project_fn(f: impl Fn(f64) -> f64) -> Projection {
    let h2 = |s: f64| s * s - 2.0;
    let alpha_raw = weighted_integral(|s| f(s) * h2(s));
    let alpha = alpha_raw / HermiteBasis::norm_sq(2);
    let plus_coeff = weighted_integral(&f) / HermiteBasis::norm_sq(0);
    let rest = weighted_integral(|s| (f(s) - plus_coeff - alpha * h2(s)).powi(2));
    Projection { alpha, alpha_raw, plus_coeff, minus_norm: rest.max(0.0).sqrt() }
}

/// Spectral snapshot at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralState {
    pub tau: f64,
    pub alpha: f64,
    pub alpha_raw: f64,
    pub plus_coeff: f64,
    pub minus_norm: f64,
    pub delta: f64,
    pub vbar: Vec<f64>,
}

impl SpectralState {
    pub fn from_sampled(tau: f64, sigma: &[f64], v: &[f64], delta: f64) -> Result<Self, SpectralError> {
        let vbar = truncate(sigma, v, delta)?;
        let p = project(sigma, &vbar)?;
        Ok(Self { tau, alpha: p.alpha, alpha_raw: p.alpha_raw, plus_coeff: p.plus_coeff, minus_norm: p.minus_norm, delta, vbar })
    }
}

/// Error fields and their `h₂` pairings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorFunctionals {
    pub e: Vec<f64>,
    pub e_chi: Vec<f64>,
    pub e_nl: Vec<f64>,
    pub pairings: Pairings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pairings {
    pub e_h2: f64,
    pub e_chi_h2: f64,
    pub e_nl_h2: f64,
    /// `∫ (v̄²/2 + v̄_σ²) h₂ dμ`.
    pub quadratic_form: f64,
}

/// Evaluates `E`, `E_χ`, `E_nl` on a sampled perturbation.
///
/// `j` is the nonlocal term `J = 2∫₀^σ v_σσ/(1 + v)`. When given,
/// `∫₀^σ v_σ²/(1 + v)² = J/2 − v_σ/(1 + v)` is read off from it. Otherwise
/// that integral is accumulated by the trapezoid rule from `σ = 0`.
pub fn error_functionals(
    sigma: &[f64],
    v: &[f64],
    vbar: &[f64],
    chi: &Cutoff,
    j: Option<&[f64]>,
) -> Result<ErrorFunctionals, SpectralError> {
    check_grid(sigma, &[v.len(), vbar.len()])?;
    if let Some(j) = j {
        check_grid(sigma, &[j.len()])?;
    }
    if let Some(i) = v.iter().position(|&x| !(1.0 + x > 0.0)) {
        return Err(SpectralError::Degenerate { sigma: sigma[i] });
    }
    let n = sigma.len();
    let (vs, _) = fd::derivatives(sigma, v, EndRule::OneSided, EndRule::OneSided);
    let (vbs, _) = fd::derivatives(sigma, vbar, EndRule::OneSided, EndRule::OneSided);

    let nonlocal: Vec<f64> = match j {
        Some(j) => (0..n).map(|i| 0.5 * j[i] - vs[i] / (1.0 + v[i])).collect(),
        None => {
            let g: Vec<f64> = (0..n).map(|i| vs[i] * vs[i] / (1.0 + v[i]).powi(2)).collect();
            let cum = cumulative_trapezoid(sigma, &g);
            let origin = crate::numerics::lerp_at(sigma, &cum, 0.0);
            cum.iter().map(|c| c - origin).collect()
        }
    };

    let mut e = vec![0.0; n];
    let mut e_chi = vec![0.0; n];
    let mut e_nl = vec![0.0; n];
    for i in 0..n {
        let s = sigma[i];
        let c = chi.jet(s);
        let (x, c1, c2) = (c.v, c.d1, c.d2);
        let one_minus = 1.0 - x;
        let (w, wb, ws, wbs) = (v[i], vbar[i], vs[i], vbs[i]);
        let p = 1.0 + w;
        e[i] = wb * wbs * wbs / p + wb.powi(3) / (2.0 * p);
        e_chi[i] = -2.0 * ws * c1 - w * c2 + 0.5 * s * w * c1 - one_minus * ws * wbs + c1 * w * wbs + c1 * ws * ws
            - 0.5 * w * wb * one_minus
            + wb * one_minus * one_minus * ws * ws / p
            + wb * c1 * c1 * w * w / p
            + wb * w * w * one_minus * one_minus / (2.0 * p)
            + wb * wb * w * one_minus / p
            + 2.0 * wb / p * (wbs * ws * one_minus - w * wbs * c1 - c1 * one_minus * w * ws)
            + w * chi.tau_derivative(s);
        e_nl[i] = -2.0 * x * ws * nonlocal[i];
    }
    let h2 = |i: usize| sigma[i] * sigma[i] - 2.0;
    let pairings = Pairings {
        e_h2: weighted(sigma, |i| e[i] * h2(i)),
        e_chi_h2: weighted(sigma, |i| e_chi[i] * h2(i)),
        e_nl_h2: weighted(sigma, |i| e_nl[i] * h2(i)),
        quadratic_form: weighted(sigma, |i| (0.5 * vbar[i] * vbar[i] + vbs[i] * vbs[i]) * h2(i)),
    };
    Ok(ErrorFunctionals { e, e_chi, e_nl, pairings })
}

/// Outcome of the exact and quadrature checks on the basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    /// `h₂² − (h₄ + 8h₂ + 8h₀)` vanishes identically.
    pub square_identity: bool,
    /// `(h₂')² − (4h₂ + 8h₀)` vanishes identically.
    pub derivative_identity: bool,
    /// `∫ (h₂³/2 + (h₂')² h₂) dμ`.
    pub cubic_integral: f64,
    /// `8‖h₂‖² = 128√π`.
    pub cubic_expected: f64,
    pub cubic_rel_error: f64,
    /// Largest `|⟨h_{2j}, h_{2k}⟩| / (‖h_{2j}‖‖h_{2k}‖)`, `j ≠ k ≤ 6`.
    pub orthogonality: f64,
    /// Largest `‖𝓛h_{2k} − (1 − k)h_{2k}‖ / ‖h_{2k}‖`, `k ≤ 6`.
    pub eigen_relation: f64,
    /// Every `𝓛h_{2k} − (1 − k)h_{2k}` is the zero polynomial.
    pub eigen_exact: bool,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.square_identity
            && self.derivative_identity
            && self.cubic_rel_error < 1e-8
            && self.orthogonality < 1e-10
            && self.eigen_relation < 1e-10
            && self.eigen_exact
    }
}

pub fn hermite_identities() -> IdentityReport {
    let basis = HermiteBasis::new(12);
    let (h0, h2, h4) = (basis.h(0), basis.h(2), basis.h(4));
    let int = |k: i64| Rational64::from_integer(k);
    let square = &(h2 * h2) - &(&(h4 + &h2.scale(int(8))) + &h0.scale(int(8)));
    let dh2 = h2.derivative();
    let deriv = &(&dh2 * &dh2) - &(&h2.scale(int(4)) + &h0.scale(int(8)));

    let cubic_poly = &(&(h2 * h2) * h2).scale(Rational64::new(1, 2)) + &(&(&dh2 * &dh2) * h2);
    let cubic_integral = inner_poly(&cubic_poly, h0);
    let cubic_expected = 8.0 * HermiteBasis::norm_sq(2);

    let evens: Vec<(usize, &Poly)> = basis.even().collect();
    let mut orthogonality: f64 = 0.0;
    for (a, (j, p)) in evens.iter().enumerate() {
        for (k, q) in evens.iter().skip(a + 1) {
            let scale = (HermiteBasis::norm_sq(*j) * HermiteBasis::norm_sq(*k)).sqrt();
            orthogonality = orthogonality.max(inner_poly(p, q).abs() / scale);
        }
    }
    let mut eigen_relation: f64 = 0.0;
    let mut eigen_exact = true;
    for (n, p) in &evens {
        let lambda = Rational64::new(2 - *n as i64, 2);
        let diff = &apply_l(p) - &p.scale(lambda);
        eigen_exact &= diff.is_zero();
        eigen_relation = eigen_relation.max((inner_poly(&diff, &diff) / HermiteBasis::norm_sq(*n)).sqrt());
    }
    IdentityReport {
        square_identity: square.is_zero(),
        derivative_identity: deriv.is_zero(),
        cubic_integral,
        cubic_expected,
        cubic_rel_error: (cubic_integral / cubic_expected - 1.0).abs(),
        orthogonality,
        eigen_relation,
        eigen_exact,
    }
}

/// JSON-facing summary of one spectral evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub tau: f64,
    pub alpha: f64,
    pub alpha_raw: f64,
    pub plus: f64,
    pub minus_norm: f64,
    pub pairings: Option<Pairings>,
}

/// Uniform symmetric grid on `[−reach, reach]` with `2m + 1` nodes.
pub fn symmetric_grid(reach: f64, m: usize) -> Vec<f64> {
    (0..=2 * m).map(|i| reach * (i as f64 / m as f64 - 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_members_match_closed_forms() {
        let b = HermiteBasis::new(4);
        assert_eq!(b.h(0), &Poly::from_ints(&[1]));
        assert_eq!(b.h(2), &Poly::from_ints(&[-2, 0, 1]));
        assert_eq!(b.h(4), &Poly::from_ints(&[12, 0, -12, 0, 1]));
        assert_eq!(b.max_index(), 4);
    }

    #[test]
    fn moments_agree_with_quadrature() {
        for n in 0..=20 {
            let q = weighted_integral(|s| s.powi(n as i32));
            let m = gaussian_moment(n);
            let scale = gaussian_moment(n + n % 2);
            assert!((q - m).abs() <= 1e-12 * scale, "n = {n}");
        }
    }

    #[test]
    fn cutoff_jet_scales_with_delta() {
        let c = Cutoff::new(1.0).unwrap();
        assert_eq!(c.jet(0.3).v, 1.0);
        assert_eq!(c.jet(1.0).v, 0.0);
        assert!(Cutoff::new(0.0).is_err());
        assert!(Cutoff::new(1.5).is_err());
    }
}
