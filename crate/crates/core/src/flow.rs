//! Time stepping of the rotationally symmetric flow.
//!
//! Both the unrescaled equation `ψ_t = ψ_ss − (1 − ψ_s²)/ψ` and the rescaled
//! one share a single stepper. Along material points the metric stretches
//! as `∂_t ds = −2K₀ ds`. In the rescaled variables `u = ψ/√(T − t)`,
//! `σ = s/√(T − t)`, `τ = −ln(T − t)` this becomes
//! `∂_τ dσ = (½ − 2K₀) dσ`, and
//!
//! `u_τ = u_σσ + u_σ²/u − 1/u + u/2`.
//!
//! Relative to the point at `σ = 0`, a material point drifts with speed
//! `σ/2 + J(σ)`, where `J(σ) = 2∫₀^σ u_σσ/u`. The tips follow
//! `σ' = σ/2 + J(σ)`.
//!
//! The grid keeps the anchor node at `σ = 0`, with uniform spacing on each
//! side of it. Grid motion relative to the material shows up as a transport
//! term. Each half is stretched after every step so that the tip slope is
//! exactly `∓1`, and [`tip_ode_rhs`] measures how well this agrees with the
//! drift predicted by `J`.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::barriers::stationary_operator;
use crate::geometry::{self, curvature_fields, validate_closed, CurvatureFields, Fixture, GeometryError, ProfileGrid};
use crate::numerics::fd::{self, EndRule};
use crate::numerics::quad::cumulative_trapezoid;
use crate::numerics::{lerp_at, solve_pentadiagonal};

/// Largest `dt / h_min²` accepted by a single step.
pub const STABILITY: f64 = 0.5;
/// Default `dt / h_min²` used by the drivers.
pub const DEFAULT_CFL: f64 = 0.25;
/// Tip slope residual beyond which the tip ODE is not evaluated.
pub const TIP_SLOPE_TOLERANCE: f64 = 0.05;
/// Relative slack of the tip flag for the location of `max R`.
pub const RMAX_SLACK: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("step {dt:e} exceeds the stability bound {bound:e}")]
    Unstable { dt: f64, bound: f64 },
    #[error("closing residual {residual:e} too large for a stable step")]
    Closing { residual: f64 },
    #[error("interior radius reached zero; singular time near {t_estimate}")]
    Singular { t_estimate: f64 },
    #[error("grid not uniform at node {index}")]
    NonUniform { index: usize },
    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },
    #[error("integrand of J too large near sigma = {sigma}")]
    NonIntegrable { sigma: f64 },
    #[error("tip slope residual {residual:e} exceeds {TIP_SLOPE_TOLERANCE}")]
    TipSlope { residual: f64 },
    #[error("profile not monotone towards the tip at node {index}")]
    NotMonotone { index: usize },
    #[error("sigma = {sigma} outside [{lo}, {hi}]")]
    OutOfRange { sigma: f64, lo: f64, hi: f64 },
    #[error("profile has no tips")]
    NoTips,
}

/// End conditions of a rescaled profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Closed profile: `u = 0` at both ends with odd reflection.
    Tips,
    /// Segment with `u_σ = 0` at both ends (even reflection).
    Neumann,
}

impl Boundary {
    fn rule(self) -> EndRule {
        match self {
            Boundary::Tips => EndRule::Odd,
            Boundary::Neumann => EndRule::Even,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Minus,
    Plus,
}

/// `u(σ)` at rescaled time `τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledProfile {
    sigma: Vec<f64>,
    u: Vec<f64>,
    tau: f64,
    boundary: Boundary,
}

impl RescaledProfile {
    pub fn new(sigma: Vec<f64>, u: Vec<f64>, tau: f64, boundary: Boundary) -> Result<Self, FlowError> {
        match boundary {
            Boundary::Tips => validate_closed(&sigma, &u)?,
            Boundary::Neumann => {
                if sigma.len() != u.len() {
                    return Err(GeometryError::LengthMismatch(sigma.len(), u.len()).into());
                }
                if sigma.len() < 7 {
                    return Err(GeometryError::TooFewPoints(sigma.len()).into());
                }
                if let Some(index) = sigma.iter().chain(&u).position(|v| !v.is_finite()) {
                    return Err(GeometryError::NonFinite { field: "sigma/u", index: index % sigma.len() }.into());
                }
                if let Some(i) = sigma.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(GeometryError::NotIncreasing(i + 1).into());
                }
                if let Some(i) = u.iter().position(|&v| v <= 0.0) {
                    return Err(GeometryError::NonPositive(i).into());
                }
            }
        }
        if !tau.is_finite() {
            return Err(FlowError::InvalidParameter { name: "tau", reason: "must be finite".into() });
        }
        Ok(Self { sigma, u, tau, boundary })
    }

    /// Rescales a closed profile about the extinction time `t_ext`, shifting
    /// arclength so the node nearest `s = 0` sits at `σ = 0`.
    pub fn from_profile(p: &ProfileGrid, t_ext: f64) -> Result<Self, FlowError> {
        let left = t_ext - p.t();
        if !(left > 0.0) {
            return Err(FlowError::InvalidParameter { name: "t_extinction", reason: format!("must exceed t = {}", p.t()) });
        }
        let k = 1.0 / left.sqrt();
        let origin = p.s()[anchor_of(p.s())];
        let sigma = p.s().iter().map(|s| (s - origin) * k).collect();
        let u = p.psi().iter().map(|w| w * k).collect();
        Self::new(sigma, u, -left.ln(), Boundary::Tips)
    }

    /// Inverse of [`RescaledProfile::from_profile`].
    pub fn to_profile(&self, t_ext: f64) -> Result<ProfileGrid, FlowError> {
        if self.boundary != Boundary::Tips {
            return Err(FlowError::NoTips);
        }
        let left = (-self.tau).exp();
        let k = left.sqrt();
        ProfileGrid::new(
            self.sigma.iter().map(|s| s * k).collect(),
            self.u.iter().map(|u| u * k).collect(),
            t_ext - left,
        )
        .map_err(Into::into)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `(σ₋, σ₊)`: the end nodes.
    pub fn sigma_tips(&self) -> (f64, f64) {
        (self.sigma[0], self.sigma[self.sigma.len() - 1])
    }

    /// Index of the node nearest `σ = 0`.
    pub fn anchor(&self) -> usize {
        anchor_of(&self.sigma)
    }

    pub fn u_max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rescaled curvature fields.
    pub fn curvatures(&self) -> CurvatureFields {
        let rule = self.boundary.rule();
        curvature_fields(&self.sigma, &self.u, rule, rule)
    }

    /// `u_σ` and `u_σσ` at the nodes.
    pub fn derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        let rule = self.boundary.rule();
        fd::derivatives(&self.sigma, &self.u, rule, rule)
    }

    /// Averages mirror nodes about the anchor (odd node counts only).
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        symmetrize(&mut out.sigma, &mut out.u);
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma,u\n");
        for (s, u) in self.sigma.iter().zip(&self.u) {
            let _ = writeln!(out, "{s:.15e},{u:.15e}");
        }
        out
    }
}

fn anchor_of(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn symmetrize(x: &mut [f64], w: &mut [f64]) {
    let n = x.len();
    if n.is_multiple_of(2) {
        return;
    }
    let mid = n / 2;
    let shift = x[mid];
    for i in 0..mid {
        let j = n - 1 - i;
        let d = 0.5 * ((x[j] - shift) - (x[i] - shift));
        let v = 0.5 * (w[i] + w[j]);
        x[i] = shift - d;
        x[j] = shift + d;
        w[i] = v;
        w[j] = v;
    }
}

fn min_spacing(x: &[f64]) -> f64 {
    x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Largest step accepted on the grid `x`.
pub fn stability_bound(x: &[f64]) -> f64 {
    STABILITY * min_spacing(x).powi(2)
}

/// Velocity of material points relative to the anchor node:
/// `expand·(x − x_a) − 2∫_{x_a}^x K₀`.
fn material_velocity(x: &[f64], k0: &[f64], expand: f64, anchor: usize) -> Vec<f64> {
    let integrand: Vec<f64> = k0.iter().map(|k| -2.0 * k).collect();
    let cum = cumulative_trapezoid(x, &integrand);
    x.iter().zip(&cum).map(|(xi, c)| expand * (xi - x[anchor]) + c - cum[anchor]).collect()
}

/// Nodes spaced uniformly on each side of `x[anchor] = mid`.
fn split_grid(lo: f64, mid: f64, hi: f64, anchor: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| match i.cmp(&anchor) {
            std::cmp::Ordering::Less => mid - (mid - lo) * (anchor - i) as f64 / anchor as f64,
            std::cmp::Ordering::Equal => mid,
            std::cmp::Ordering::Greater => mid + (hi - mid) * (i - anchor) as f64 / (n - 1 - anchor) as f64,
        })
        .collect()
}

fn check_split_uniform(x: &[f64], anchor: usize) -> Result<(), FlowError> {
    let n = x.len();
    let halves = [(0, anchor), (anchor, n - 1)];
    for (a, b) in halves {
        let h = (x[b] - x[a]) / (b - a) as f64;
        if let Some(i) = (a..b).find(|&i| ((x[i + 1] - x[i]) - h).abs() > 1e-8 * h) {
            return Err(FlowError::NonUniform { index: i + 1 });
        }
    }
    Ok(())
}

/// Stretches each half of the grid about the anchor so that both tip
/// slopes are exactly `±1`.
fn close_tips(x: &[f64], w: &[f64], anchor: usize) -> Vec<f64> {
    let n = x.len();
    let left = fd::one_sided(x, w, true, 5).0;
    let right = -fd::one_sided(x, w, false, 5).0;
    let mid = x[anchor];
    split_grid(mid - (mid - x[0]) * left, mid, mid + (x[n - 1] - mid) * right, anchor, n)
}

/// One step of `w_t = w_xx − (1 − w_x²)/w + expand·w` (along material points).
///
/// With `Tips` the nodes are spaced uniformly on each side of the anchor,
/// which stays put as a material point, and each half follows its tip. The
/// tip speed comes from `J`, but the half lengths are then fixed by the
/// closing conditions: the `J` integral is too sensitive to the nodes next
/// to a tip to drive the grid on its own. With `Neumann` the grid is fixed.
///
/// Diffusion and the linearised reaction are implicit; near a tip the
/// reaction behaves like `2w_x/x`, which is too stiff for an explicit update.
fn gauge_step(x: &[f64], w: &[f64], boundary: Boundary, dt: f64, expand: f64) -> Result<(Vec<f64>, Vec<f64>), FlowError> {
    let n = x.len();
    let anchor = anchor_of(x);
    if boundary == Boundary::Tips {
        if !(2..n - 2).contains(&anchor) {
            return Err(FlowError::InvalidParameter { name: "profile", reason: "x = 0 must lie between the tips".into() });
        }
        check_split_uniform(x, anchor)?;
    }
    let bound = stability_bound(x);
    if !(dt > 0.0 && dt <= bound) {
        return Err(FlowError::Unstable { dt, bound });
    }
    let rule = boundary.rule();
    let c = curvature_fields(x, w, rule, rule);
    if let Some(index) = c.k0.iter().position(|v| !v.is_finite()) {
        return Err(FlowError::NonFinite { index });
    }
    let v_mat = material_velocity(x, &c.k0, expand, anchor);

    let parity = match boundary {
        Boundary::Tips => -1.0,
        Boundary::Neumann => 1.0,
    };
    let last = (n - 1) as isize;
    // node, sign and position of the image of index j under the end reflections
    let image = |grid: &[f64], j: isize| -> (usize, f64, f64) {
        if j < 0 {
            ((-j) as usize, parity, 2.0 * grid[0] - grid[(-j) as usize])
        } else if j > last {
            let k = (2 * last - j) as usize;
            (k, parity, 2.0 * grid[n - 1] - grid[k])
        } else {
            (j as usize, 1.0, grid[j as usize])
        }
    };
    // five-point first-derivative weights and three-point second-derivative weights
    let weights = |grid: &[f64], i: usize| -> [(usize, f64, f64, f64); 5] {
        let nodes: Vec<(usize, f64, f64)> = (0..5).map(|k| image(grid, i as isize + k as isize - 2)).collect();
        let pos: Vec<f64> = nodes.iter().map(|p| p.2).collect();
        let d1 = &fd::fornberg_weights(grid[i], &pos, 1)[1];
        let (l, cc, r) = fd::second_derivative_3pt(pos[2] - pos[1], pos[3] - pos[2]);
        let d2 = [0.0, l, cc, r, 0.0];
        std::array::from_fn(|k| (nodes[k].0, nodes[k].1, d1[k], d2[k]))
    };
    let slope: Vec<f64> = (0..n).map(|i| weights(x, i).iter().map(|&(j, s, d1, _)| d1 * s * w[j]).sum()).collect();

    let fixed = |i: usize| boundary == Boundary::Tips && (i == 0 || i == n - 1);
    let unknowns: Vec<usize> = (0..n).filter(|&i| !fixed(i)).collect();

    let pass = |v_lo: f64, v_hi: f64| -> Result<(Vec<f64>, Vec<f64>), FlowError> {
        let (x_new, v_grid) = match boundary {
            Boundary::Tips => {
                let mid = x[anchor];
                let grid = split_grid(x[0] + dt * v_lo, mid, x[n - 1] + dt * v_hi, anchor, n);
                let v: Vec<f64> = x
                    .iter()
                    .map(|&xi| if xi <= mid { v_lo * (mid - xi) / (mid - x[0]) } else { v_hi * (xi - mid) / (x[n - 1] - mid) })
                    .collect();
                (grid, v)
            }
            Boundary::Neumann => (x.to_vec(), vec![0.0; n]),
        };
        let mut rows = vec![[0.0; 5]; unknowns.len()];
        let mut rhs = vec![0.0; unknowns.len()];
        for (row, &i) in unknowns.iter().enumerate() {
            let w_x = slope[i];
            let a = 2.0 * w_x / w[i];
            let k1 = (1.0 - w_x * w_x) / (w[i] * w[i]);
            // w − dt (w_xx + a w_x + K₁ w) on the new grid
            rows[row][2] += 1.0 - dt * k1;
            for (j, sgn, d1, d2) in weights(&x_new, i) {
                if !fixed(j) {
                    rows[row][j + 2 - i] -= dt * sgn * (d2 + a * d1);
                }
            }
            let transport = (v_grid[i] - v_mat[i]) * w_x;
            rhs[row] = w[i] + dt * (-2.0 * k1 * w[i] - a * w_x + expand * w[i] + transport);
        }
        let solved = solve_pentadiagonal(&rows, &rhs).ok_or(FlowError::NonFinite { index: 0 })?;
        let mut w_new = vec![0.0; n];
        for (&i, v) in unknowns.iter().zip(solved) {
            w_new[i] = v;
        }
        if let Some(index) = w_new.iter().position(|v| !v.is_finite()) {
            return Err(FlowError::NonFinite { index });
        }
        if unknowns.iter().any(|&i| w_new[i] <= 0.0) {
            return Err(FlowError::Singular { t_estimate: f64::NAN });
        }
        Ok((x_new, w_new))
    };

    match boundary {
        Boundary::Tips => {
            let (x1, w1) = pass(v_mat[0], v_mat[n - 1])?;
            Ok((close_tips(&x1, &w1, anchor), w1))
        }
        Boundary::Neumann => pass(0.0, 0.0),
    }
}

/// One implicit-explicit step of `ψ_t = ψ_ss − (1 − ψ_s²)/ψ`.
pub fn step_unrescaled(p: &ProfileGrid, dt: f64) -> Result<ProfileGrid, FlowError> {
    let closing = geometry::closing_residual(p);
    let residual = closing.slope_minus.max(closing.slope_plus);
    if !(residual < 1e-2) {
        return Err(FlowError::Closing { residual });
    }
    match gauge_step(p.s(), p.psi(), Boundary::Tips, dt, 0.0) {
        Ok((s, psi)) => Ok(ProfileGrid::new(s, psi, p.t() + dt)?),
        Err(FlowError::Singular { .. }) => {
            // the waist would reach zero within this step
            Err(FlowError::Singular { t_estimate: p.t() + dt })
        }
        Err(e) => Err(e),
    }
}

/// One step of the rescaled equation. The tips move with the grid ends.
pub fn step_rescaled(r: &RescaledProfile, dtau: f64) -> Result<RescaledProfile, FlowError> {
    let (sigma, u) = gauge_step(&r.sigma, &r.u, r.boundary, dtau, 0.5).map_err(|e| match e {
        FlowError::Singular { .. } => FlowError::Singular { t_estimate: r.tau + dtau },
        e => e,
    })?;
    RescaledProfile::new(sigma, u, r.tau + dtau, r.boundary)
}

/// `J = 2∫₀^σ u_σσ/u` at every node, using `u_σσ/u = −K₀` (finite at tips).
pub fn j_field(r: &RescaledProfile) -> Result<Vec<f64>, FlowError> {
    let c = r.curvatures();
    let integrand: Vec<f64> = c.k0.iter().map(|k| -2.0 * k).collect();
    for (i, w) in r.sigma.windows(2).enumerate() {
        let step = (w[1] - w[0]) * integrand[i].abs().max(integrand[i + 1].abs());
        if !(step < 1e6) {
            return Err(FlowError::NonIntegrable { sigma: r.sigma[i] });
        }
    }
    let cum = cumulative_trapezoid(&r.sigma, &integrand);
    let origin = lerp_at(&r.sigma, &cum, 0.0);
    Ok(cum.into_iter().map(|v| v - origin).collect())
}

pub fn compute_j(r: &RescaledProfile, sigma: f64) -> Result<f64, FlowError> {
    let (lo, hi) = r.sigma_tips();
    if !(lo..=hi).contains(&sigma) {
        return Err(FlowError::OutOfRange { sigma, lo, hi });
    }
    Ok(lerp_at(&r.sigma, &j_field(r)?, sigma))
}

/// One-sided `u_σ` at a tip.
pub fn tip_slope(r: &RescaledProfile, side: Side) -> f64 {
    fd::one_sided(&r.sigma, &r.u, side == Side::Minus, 5).0
}

/// `σ_±/2 + J(σ_±)`, the speed of a tip.
pub fn tip_ode_rhs(r: &RescaledProfile, side: Side) -> Result<f64, FlowError> {
    if r.boundary != Boundary::Tips {
        return Err(FlowError::NoTips);
    }
    let (expected, tip) = match side {
        Side::Minus => (1.0, r.sigma_tips().0),
        Side::Plus => (-1.0, r.sigma_tips().1),
    };
    let residual = (tip_slope(r, side) - expected).abs();
    if residual > TIP_SLOPE_TOLERANCE {
        return Err(FlowError::TipSlope { residual });
    }
    Ok(0.5 * tip + compute_j(r, tip)?)
}

/// `Y = u_σ²` as a function of `u` between a tip and the anchor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TipChart {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub tau: f64,
}

impl TipChart {
    /// `Y_τ = Y Y'' − (u/2) Y' − ½ Y'² + (1 − Y) Y'/u + 2(1 − Y) Y/u²` at fixed `u`.
    pub fn rhs(&self) -> Vec<f64> {
        let (d1, d2) = fd::derivatives(&self.u, &self.y, EndRule::OneSided, EndRule::OneSided);
        (0..self.u.len()).map(|i| stationary_operator(self.u[i], self.y[i], d1[i], d2[i])).collect()
    }

    pub fn eval(&self, u: f64) -> Option<f64> {
        let (lo, hi) = (self.u[0], self.u[self.u.len() - 1]);
        (lo..=hi).contains(&u).then(|| lerp_at(&self.u, &self.y, u))
    }

    /// `Z(ρ) = Y(ρ/√κ)` sampled at `ρ = √κ u`.
    pub fn rescaled(&self, kappa: f64) -> (Vec<f64>, Vec<f64>) {
        (self.u.iter().map(|u| u * kappa.sqrt()).collect(), self.y.clone())
    }
}

/// Tip chart on `side`, from the tip up to the largest `u` on that side of
/// the anchor.
pub fn to_tip_chart(r: &RescaledProfile, side: Side) -> Result<TipChart, FlowError> {
    let (d1, _) = r.derivatives();
    let n = r.len();
    let anchor = r.anchor();
    let widest = |range: std::ops::RangeInclusive<usize>| range.max_by(|&a, &b| r.u[a].total_cmp(&r.u[b])).unwrap_or(anchor);
    // nodes from the first one off the tip towards the cut
    let order: Vec<usize> = match side {
        Side::Plus => (widest(anchor..=n - 1)..n - 1).rev().collect(),
        Side::Minus => (1..=widest(0..=anchor)).collect(),
    };
    let mut u: Vec<f64> = Vec::with_capacity(order.len());
    let mut y: Vec<f64> = Vec::with_capacity(order.len());
    for &i in &order {
        let last = u.last().copied().unwrap_or(0.0);
        if r.u[i] < last {
            return Err(FlowError::NotMonotone { index: i });
        }
        if r.u[i] == last {
            continue;
        }
        u.push(r.u[i]);
        y.push(d1[i] * d1[i]);
    }
    Ok(TipChart { u, y, tau: r.tau })
}

/// Location of `max R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RmaxLocation {
    Tip,
    Interior,
}

pub fn rmax_location(c: &CurvatureFields) -> RmaxLocation {
    let n = c.r.len();
    let max = c.r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tip = c.r[0].max(c.r[n - 1]);
    if tip >= max - RMAX_SLACK * max.abs() {
        RmaxLocation::Tip
    } else {
        RmaxLocation::Interior
    }
}

/// Geometric monitors of one rescaled snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowMonitors {
    pub tau: f64,
    pub t: f64,
    pub q_max: f64,
    pub r_max_location: RmaxLocation,
    /// Unrescaled `max ψ`.
    pub psi_max: f64,
    pub u_max: f64,
    pub j_at_tip: f64,
    /// Rescaled scalar curvature at the tip.
    pub kappa: f64,
    /// Unrescaled distance between the poles.
    pub diameter: f64,
    pub sigma_plus: f64,
    /// Largest `u_σσ`.
    pub max_u_ss: f64,
}

pub fn monitors(r: &RescaledProfile, t_ext: f64) -> Result<FlowMonitors, FlowError> {
    let c = r.curvatures();
    let n = r.len();
    let scale = (-0.5 * r.tau).exp();
    let (lo, hi) = r.sigma_tips();
    let (_, d2) = r.derivatives();
    Ok(FlowMonitors {
        tau: r.tau,
        t: t_ext - (-r.tau).exp(),
        q_max: c.q_max(),
        r_max_location: rmax_location(&c),
        psi_max: r.u_max() * scale,
        u_max: r.u_max(),
        j_at_tip: compute_j(r, hi)?,
        kappa: 0.5 * (c.r[0] + c.r[n - 1]),
        diameter: (hi - lo) * scale,
        sigma_plus: hi,
        max_u_ss: d2.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Unrescaled run to extinction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtinctionRun {
    /// Time of the last accepted step.
    pub t_last: f64,
    /// Zero of the linear extrapolation of `ψ_max²` (of the squared waist
    /// after a neckpinch).
    pub t_estimate: f64,
    pub steps: usize,
    /// `Q_max` after every step.
    pub q_max: Vec<f64>,
    /// `ψ_max²` against `t` at every step.
    pub psi_max_sq: Vec<(f64, f64)>,
    /// Largest `Δψ_max/Δt + 1/ψ_max` over the run.
    pub psi_rate_excess: f64,
    /// Set when the waist pinched before the extinction guard.
    pub neckpinch: bool,
}

/// Runs `ψ` until `max ψ < 10 h₀`, or until the waist drops below both
/// `10 h₀` and half its initial value.
pub fn run_to_extinction(p0: &ProfileGrid, cfl: f64, symmetry: bool, max_steps: usize) -> Result<ExtinctionRun, FlowError> {
    if !(cfl > 0.0 && cfl <= STABILITY) {
        return Err(FlowError::InvalidParameter { name: "cfl", reason: format!("must lie in (0, {STABILITY}]") });
    }
    let h0 = min_spacing(p0.s());
    let guard = 10.0 * h0;
    let mut p = p0.clone();
    let mut q_max = Vec::new();
    let mut history = vec![(p.t(), p.psi_max().powi(2))];
    let mut excess = f64::NEG_INFINITY;
    let mut neckpinch = false;
    let mut steps = 0;
    let waist0 = p0.waist();
    let mut waist_sq = [(p.t(), waist0 * waist0); 2];
    while p.psi_max() >= guard && steps < max_steps {
        let dt = cfl * min_spacing(p.s()).powi(2);
        let before = p.psi_max();
        let mut next = step_unrescaled(&p, dt)?;
        if symmetry {
            let (mut s, mut w) = (next.s().to_vec(), next.psi().to_vec());
            symmetrize(&mut s, &mut w);
            next = ProfileGrid::new(s, w, next.t())?;
        }
        p = next;
        steps += 1;
        excess = excess.max((p.psi_max() - before) / dt + 1.0 / before);
        q_max.push(geometry::curvatures(&p)?.q_max());
        history.push((p.t(), p.psi_max().powi(2)));
        waist_sq = [waist_sq[1], (p.t(), p.waist().powi(2))];
        if p.waist() < guard.min(0.5 * waist0) && p.waist() < 0.5 * p.psi_max() {
            neckpinch = true;
            break;
        }
    }
    // linear extrapolation of a squared radius to zero
    let crossing = |(t0, a0): (f64, f64), (t1, a1): (f64, f64)| t1 + a1 * (t1 - t0) / (a0 - a1);
    let n = history.len();
    let t_estimate = if neckpinch {
        crossing(waist_sq[0], waist_sq[1])
    } else if n >= 2 {
        crossing(history[n - 2], history[n - 1])
    } else {
        f64::NAN
    };
    Ok(ExtinctionRun { t_last: p.t(), t_estimate, steps, q_max, psi_max_sq: history, psi_rate_excess: excess, neckpinch })
}

/// Richardson extrapolation of a quantity converging at `order` under halving.
pub fn richardson(coarse: f64, fine: f64, order: f64) -> f64 {
    fine + (fine - coarse) / (2f64.powf(order) - 1.0)
}

/// Settings of [`run_flow`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConfig {
    pub fixture: Fixture,
    /// Upper bound on the rescaled step.
    pub dtau: f64,
    /// Stop once `τ` reaches this value.
    pub tau_end: Option<f64>,
    pub symmetry: bool,
    pub output_every: usize,
    /// Extinction time; estimated by an unrescaled run when absent.
    pub t_extinction: Option<f64>,
    pub cfl: f64,
    pub max_steps: usize,
}

impl FlowConfig {
    pub fn new(fixture: Fixture) -> Self {
        Self {
            fixture,
            dtau: 1e-3,
            tau_end: None,
            symmetry: true,
            output_every: 100,
            t_extinction: None,
            cfl: DEFAULT_CFL,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub profile: RescaledProfile,
    pub monitors: FlowMonitors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TauEnd,
    Extinction,
    MaxSteps,
    /// A step failed; the trajectory holds everything before it.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowRun {
    pub t_extinction: f64,
    pub extinction_estimated: bool,
    /// Unrescaled pre-run, present when the extinction time was estimated.
    pub prelude: Option<ExtinctionRun>,
    pub snapshots: Vec<Snapshot>,
    /// `Q_max` after every rescaled step.
    pub q_max: Vec<f64>,
    pub steps: usize,
    pub stop: StopReason,
}

impl FlowRun {
    /// Largest `Q_max` over both phases.
    pub fn q_max_overall(&self) -> f64 {
        let pre = self.prelude.iter().flat_map(|p| p.q_max.iter());
        pre.chain(&self.q_max).copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn run_flow(cfg: &FlowConfig) -> Result<FlowRun, FlowError> {
    if !(cfg.dtau > 0.0) {
        return Err(FlowError::InvalidParameter { name: "dtau", reason: "must be positive".into() });
    }
    if cfg.output_every == 0 {
        return Err(FlowError::InvalidParameter { name: "output_every", reason: "must be at least 1".into() });
    }
    let p0 = cfg.fixture.build()?;
    let (t_ext, prelude) = match cfg.t_extinction {
        Some(t) => (t, None),
        None => {
            let run = run_to_extinction(&p0, cfg.cfl, cfg.symmetry, cfg.max_steps)?;
            (run.t_estimate, Some(run))
        }
    };
    let mut r = RescaledProfile::from_profile(&p0, t_ext)?;
    if let Some(end) = cfg.tau_end {
        if !(end > r.tau) {
            return Err(FlowError::InvalidParameter { name: "tau_end", reason: format!("must exceed the initial tau {}", r.tau) });
        }
    }
    let guard = 10.0 * min_spacing(p0.s());
    let mut snapshots = vec![Snapshot { monitors: monitors(&r, t_ext)?, profile: r.clone() }];
    let mut q_max = Vec::new();
    let mut steps = 0;
    let stop = loop {
        if cfg.tau_end.is_some_and(|end| r.tau >= end) {
            break StopReason::TauEnd;
        }
        if r.u_max() * (-0.5 * r.tau).exp() < guard {
            break StopReason::Extinction;
        }
        if steps >= cfg.max_steps {
            break StopReason::MaxSteps;
        }
        let mut dtau = cfg.dtau.min(cfg.cfl * min_spacing(&r.sigma).powi(2));
        if let Some(end) = cfg.tau_end {
            dtau = dtau.min(end - r.tau).max(1e-15);
        }
        let next = match step_rescaled(&r, dtau) {
            Ok(next) if cfg.symmetry => next.symmetrized(),
            Ok(next) => next,
            Err(e) => break StopReason::Failed(e.to_string()),
        };
        r = next;
        steps += 1;
        q_max.push(r.curvatures().q_max());
        if steps % cfg.output_every == 0 {
            match monitors(&r, t_ext) {
                Ok(m) => snapshots.push(Snapshot { profile: r.clone(), monitors: m }),
                Err(e) => break StopReason::Failed(e.to_string()),
            }
        }
    };
    if snapshots.last().is_some_and(|s| s.profile.tau != r.tau) {
        if let Ok(m) = monitors(&r, t_ext) {
            snapshots.push(Snapshot { profile: r.clone(), monitors: m });
        }
    }
    Ok(FlowRun { t_extinction: t_ext, extinction_estimated: prelude.is_some(), prelude, snapshots, q_max, steps, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_keeps_the_anchor() {
        let mut x = vec![-2.0, -1.1, 0.0, 0.9, 2.0];
        let mut w = vec![0.0, 1.0, 2.0, 3.0, 0.0];
        symmetrize(&mut x, &mut w);
        assert_eq!(x, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(w, vec![0.0, 2.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn richardson_removes_the_leading_error() {
        let exact = 1.0;
        let coarse = exact + 0.04;
        let fine = exact + 0.01;
        assert!((richardson(coarse, fine, 2.0) - exact).abs() < 1e-15);
    }
}
