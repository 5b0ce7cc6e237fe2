//! Three-region asymptotic profile of the rescaled flow near extinction.
//!
//! * parabolic region `|σ| ≤ L`: `u = √2 (1 − (σ² − 2)/(8|τ|))`;
//! * intermediate region, in `z = σ/√|τ|`: `u = √(2 − z²/2)`;
//! * tip region `u ≤ θ`: `u_σ = −√Z₀(√κ u)` with the Bryant profile `Z₀`.
//!
//! Neighbouring pieces are joined by smooth convex combinations. Every piece
//! carries exact `σ` and `τ` derivatives, so the residual of the rescaled
//! equation only meets finite differences through the nonlocal term `J`.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::bryant::{BryantError, BryantProfile};
use crate::flow::{self, Boundary, FlowError, RescaledProfile, Side};
use crate::numerics::smooth::{step, Jet2};
use crate::numerics::{hermite_at, lerp_at, loglog_slope};
use crate::spectral::{self, Projection, SpectralError};

/// Smallest `|τ|` accepted by the ansatz.
pub const MIN_TAU_ABS: f64 = 10.0;
/// The residual ladder used by default.
pub const DEFAULT_LADDER: [f64; 4] = [-100.0, -200.0, -400.0, -800.0];

#[derive(Debug, Error)]
pub enum AsymptoticsError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("|z| = {0} outside [0, 2]")]
    OutOfDomain(f64),
    #[error("tip piece needs the Bryant profile up to rho ≈ {needed:.1}, have {available}")]
    BryantTooShort { needed: f64, available: f64 },
    #[error("seam `{seam}` jumps by {jump:.3e} at sigma = {sigma:.4} (tolerance {tolerance:.3e})")]
    SeamJump { seam: &'static str, sigma: f64, jump: f64, tolerance: f64 },
    #[error(transparent)]
    Bryant(#[from] BryantError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn invalid(name: &'static str, reason: impl Into<String>) -> AsymptoticsError {
    AsymptoticsError::InvalidParameter { name, reason: reason.into() }
}

/// Tip curvature scale `κ(τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaModel {
    /// `κ = |τ|`.
    Leading,
    /// `κ = |τ| + c ln|τ|`.
    Log { c: f64 },
}

impl KappaModel {
    pub fn value(self, tau: f64) -> f64 {
        let a = tau.abs();
        match self {
            KappaModel::Leading => a,
            KappaModel::Log { c } => a + c * a.ln(),
        }
    }

    /// `dκ/dτ`.
    pub fn rate(self, tau: f64) -> f64 {
        match self {
            KappaModel::Leading => -1.0,
            KappaModel::Log { c } => -(1.0 + c / tau.abs()),
        }
    }
}

/// Parameters of the glued profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedAnsatz {
    pub tau: f64,
    /// Half-width `L` of the parabolic window.
    pub parabolic_l: f64,
    /// Level `θ` below which the tip piece takes over.
    pub theta: f64,
    pub kappa_model: KappaModel,
    /// Blend width, as a fraction of `L` at the parabolic seam and of `θ` at the tip seam.
    pub overlap: f64,
    /// Largest accepted disagreement of two pieces inside a blend window.
    pub seam_tolerance: f64,
    /// Grid spacing; `None` uses `min(0.02, 0.1/√κ)`.
    pub spacing: Option<f64>,
}

impl MatchedAnsatz {
    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            parabolic_l: 5.0,
            theta: 0.5,
            kappa_model: KappaModel::Leading,
            overlap: 0.5,
            seam_tolerance: 0.05,
            spacing: None,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_model.value(self.tau)
    }

    pub fn validate(&self) -> Result<(), AsymptoticsError> {
        if !(self.tau.is_finite() && self.tau <= -MIN_TAU_ABS) {
            return Err(invalid("tau", format!("must be <= -{MIN_TAU_ABS}, got {}", self.tau)));
        }
        if !(self.overlap > 0.0 && self.overlap <= 1.0) {
            return Err(invalid("overlap", format!("must lie in (0, 1], got {}", self.overlap)));
        }
        if !(self.theta > 0.0 && (1.0 + self.overlap) * self.theta < SQRT_2) {
            return Err(invalid("theta", format!("need 0 < (1 + overlap) theta < sqrt 2, got theta = {}", self.theta)));
        }
        let reach = self.intermediate_sigma((1.0 + self.overlap) * self.theta);
        if !(self.parabolic_l > 0.0 && (1.0 + self.overlap) * self.parabolic_l < reach) {
            return Err(invalid(
                "parabolic_l",
                format!("the parabolic seam must end before sigma = {reach:.3}, got L = {}", self.parabolic_l),
            ));
        }
        if !(self.kappa() > 0.0) {
            return Err(invalid("kappa_model", format!("kappa = {} at tau = {}", self.kappa(), self.tau)));
        }
        if !(self.seam_tolerance > 0.0) {
            return Err(invalid("seam_tolerance", "must be positive"));
        }
        if let Some(h) = self.spacing {
            if !(h > 0.0 && h.is_finite()) {
                return Err(invalid("spacing", format!("must be positive, got {h}")));
            }
        }
        Ok(())
    }

    /// `σ ≥ 0` at which the intermediate profile equals `u`.
    pub fn intermediate_sigma(&self, u: f64) -> f64 {
        self.tau.abs().sqrt() * z_of(u)
    }

    pub fn build(&self, bryant: &BryantProfile) -> Result<GluedAnsatz, AsymptoticsError> {
        GluedAnsatz::new(*self, bryant)
    }
}

fn z_of(u: f64) -> f64 {
    (4.0 - 2.0 * u * u).max(0.0).sqrt()
}

/// Leading-order parabolic profile, meant for `|σ| ≤ L` and `τ ≤ −10`.
pub fn parabolic_ansatz(sigma: f64, tau: f64) -> f64 {
    SQRT_2 * (1.0 - (sigma * sigma - 2.0) / (8.0 * tau.abs()))
}

/// Limit profile of the intermediate region.
pub fn intermediate_profile(z: f64) -> Result<f64, AsymptoticsError> {
    if !(z.abs() <= 2.0) {
        return Err(AsymptoticsError::OutOfDomain(z.abs()));
    }
    Ok((2.0 - 0.5 * z * z).sqrt())
}

/// `−(z/2) ū_z − 1/ū + ū/2` for `ū = √(2 − z²/2)`.
pub fn intermediate_transport_residual(z: f64) -> Result<f64, AsymptoticsError> {
    let u = intermediate_profile(z)?;
    let u_z = -z / (2.0 * u);
    Ok(-0.5 * z * u_z - 1.0 / u + 0.5 * u)
}

/// `u` with `u_σ`, `u_σσ` and `u_τ` at fixed `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalJet {
    pub u: f64,
    pub u_s: f64,
    pub u_ss: f64,
    pub u_t: f64,
}

impl LocalJet {
    /// `(1 − w) a + w b`, with `w` carrying its `σ` derivatives and `w_t = ∂_τ w`.
    fn blend(a: Self, b: Self, w: Jet2, w_t: f64) -> Self {
        let du = b.u - a.u;
        Self {
            u: a.u + w.v * du,
            u_s: a.u_s + w.v * (b.u_s - a.u_s) + w.d1 * du,
            u_ss: a.u_ss + w.v * (b.u_ss - a.u_ss) + 2.0 * w.d1 * (b.u_s - a.u_s) + w.d2 * du,
            u_t: a.u_t + w.v * (b.u_t - a.u_t) + w_t * du,
        }
    }

    fn mirrored(self) -> Self {
        Self { u_s: -self.u_s, ..self }
    }
}

/// `u_τ − [u_σσ − (σ/2 + J) u_σ + u_σ²/u − 1/u + u/2]`.
pub fn equation_residual(sigma: f64, p: &LocalJet, j: f64) -> f64 {
    p.u_t - (p.u_ss - (0.5 * sigma + j) * p.u_s + (p.u_s * p.u_s - 1.0) / p.u + 0.5 * p.u)
}

pub fn parabolic_jet(sigma: f64, tau: f64) -> LocalJet {
    let eps = 1.0 / (8.0 * tau.abs());
    LocalJet {
        u: parabolic_ansatz(sigma, tau),
        u_s: -2.0 * SQRT_2 * eps * sigma,
        u_ss: -2.0 * SQRT_2 * eps,
        // ∂_τ ε = 8ε²
        u_t: -8.0 * SQRT_2 * eps * eps * (sigma * sigma - 2.0),
    }
}

/// Intermediate profile at `σ`, i.e. `z = σ/√|τ|`; needs `|z| < 2`.
pub fn intermediate_jet(sigma: f64, tau: f64) -> LocalJet {
    let a = tau.abs();
    let q = 2.0 - sigma * sigma / (2.0 * a);
    let u = q.sqrt();
    let q_s = -sigma / a;
    LocalJet {
        u,
        u_s: q_s / (2.0 * u),
        u_ss: -1.0 / (2.0 * a * u) - q_s * q_s / (4.0 * u * u * u),
        u_t: -sigma * sigma / (4.0 * tau * tau * u),
    }
}

/// `σ ≥ 0` part of the tip piece, parametrised by `F(ρ) = ∫₀^ρ Z₀^{-1/2}`
/// so that `√κ (σ₊ − σ) = F(√κ u)`.
#[derive(Debug, Clone)]
struct TipPiece {
    root_kappa: f64,
    /// `d√κ/dτ`.
    root_kappa_rate: f64,
    f: Vec<f64>,
    rho: Vec<f64>,
    root_z: Vec<f64>,
    z: Vec<f64>,
    dz: Vec<f64>,
    sigma_theta: f64,
    sigma_plus: f64,
    /// `dσ₊/dτ`.
    sigma_plus_rate: f64,
}

impl TipPiece {
    fn new(a: &MatchedAnsatz, b: &BryantProfile) -> Result<Self, AsymptoticsError> {
        let (rho, z, dz) = (b.rho().to_vec(), b.z().to_vec(), b.dz().to_vec());
        let g: Vec<f64> = z.iter().map(|z| 1.0 / z.sqrt()).collect();
        let dg: Vec<f64> = z.iter().zip(&dz).map(|(z, d)| -0.5 * d / (z * z.sqrt())).collect();
        // trapezoid with the endpoint-derivative correction, fourth order
        let mut f = vec![0.0; rho.len()];
        for i in 1..rho.len() {
            let h = rho[i] - rho[i - 1];
            f[i] = f[i - 1] + 0.5 * h * (g[i] + g[i - 1]) - h * h / 12.0 * (dg[i] - dg[i - 1]);
        }
        let kappa = a.kappa();
        let root_kappa = kappa.sqrt();
        let root_kappa_rate = a.kappa_model.rate(a.tau) / (2.0 * root_kappa);

        let rho_theta = root_kappa * a.theta;
        let rho_max = b.rho_max();
        if rho_theta > rho_max {
            return Err(AsymptoticsError::BryantTooShort { needed: rho_theta, available: rho_max });
        }
        let f_theta = hermite_at(&rho, &f, &g, rho_theta).0;
        let g_theta = 1.0 / b.eval(rho_theta)?.0.sqrt();
        let sigma_theta = a.intermediate_sigma(a.theta);
        let sigma_plus = sigma_theta + f_theta / root_kappa;
        let abs_tau = a.tau.abs();
        let sigma_plus_rate = -z_of(a.theta) / (2.0 * abs_tau.sqrt()) + g_theta * a.theta * root_kappa_rate / root_kappa
            - f_theta * root_kappa_rate / kappa;

        let reach = root_kappa * (sigma_plus - a.intermediate_sigma((1.0 + a.overlap) * a.theta));
        let f_max = f[f.len() - 1];
        if reach > f_max {
            // F grows like ρ²/2 in the far field
            let needed = (rho_max * rho_max + 2.0 * (reach - f_max)).sqrt();
            return Err(AsymptoticsError::BryantTooShort { needed, available: rho_max });
        }
        let root_z = z.iter().map(|z| z.sqrt()).collect();
        Ok(Self { root_kappa, root_kappa_rate, f, rho, root_z, z, dz, sigma_theta, sigma_plus, sigma_plus_rate })
    }

    fn jet(&self, sigma: f64) -> LocalJet {
        let d = (self.sigma_plus - sigma).max(0.0);
        let rho = hermite_at(&self.f, &self.rho, &self.root_z, self.root_kappa * d).0.max(0.0);
        let (z, dz) = hermite_at(&self.rho, &self.z, &self.dz, rho);
        let root_z = z.sqrt();
        let u = rho / self.root_kappa;
        let drift = self.root_kappa_rate / self.root_kappa;
        LocalJet {
            u,
            u_s: -root_z,
            u_ss: 0.5 * self.root_kappa * dz,
            u_t: root_z * (self.sigma_plus_rate + d * drift) - u * drift,
        }
    }
}

/// Disagreement of two pieces over a blend window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Seam {
    pub name: &'static str,
    pub window: (f64, f64),
    /// `max |u_a − u_b|` over the window.
    pub jump: f64,
    pub at: f64,
}

/// The glued profile at one `τ`, with exact derivatives at every node.
#[derive(Debug, Clone, Serialize)]
pub struct GluedAnsatz {
    pub ansatz: MatchedAnsatz,
    pub profile: RescaledProfile,
    pub jets: Vec<LocalJet>,
    pub kappa: f64,
    pub sigma_plus: f64,
    pub seams: Vec<Seam>,
    #[serde(skip)]
    pieces: Pieces,
}

#[derive(Debug, Clone)]
struct Pieces {
    a: MatchedAnsatz,
    tip: TipPiece,
    parabolic_seam: (f64, f64),
    tip_seam: (f64, f64),
}

impl Pieces {
    fn parabolic_weight(&self, sigma: f64) -> Jet2 {
        let (lo, hi) = self.parabolic_seam;
        step(Jet2 { v: (sigma - lo) / (hi - lo), d1: 1.0 / (hi - lo), d2: 0.0 })
    }

    /// Weight of the tip piece and its `τ` derivative; the window is fixed in `z`.
    fn tip_weight(&self, sigma: f64) -> (Jet2, f64) {
        let root = self.a.tau.abs().sqrt();
        let (za, zb) = (self.tip_seam.0 / root, self.tip_seam.1 / root);
        let x = Jet2 { v: (sigma / root - za) / (zb - za), d1: 1.0 / (root * (zb - za)), d2: 0.0 };
        let w = step(x);
        // ∂_τ |τ|^{-1/2} = |τ|^{-3/2}/2
        let x_t = sigma * 0.5 / (root * root * root) / (zb - za);
        (w, w.d1 / x.d1 * x_t)
    }

    fn jet(&self, sigma: f64) -> LocalJet {
        let tau = self.a.tau;
        let s = sigma.abs();
        let jet = if s <= self.parabolic_seam.0 {
            parabolic_jet(s, tau)
        } else if s < self.parabolic_seam.1 {
            LocalJet::blend(parabolic_jet(s, tau), intermediate_jet(s, tau), self.parabolic_weight(s), 0.0)
        } else if s <= self.tip_seam.0 {
            intermediate_jet(s, tau)
        } else if s < self.tip_seam.1 {
            let (w, w_t) = self.tip_weight(s);
            LocalJet::blend(intermediate_jet(s, tau), self.tip.jet(s), w, w_t)
        } else {
            self.tip.jet(s)
        };
        if sigma < 0.0 {
            jet.mirrored()
        } else {
            jet
        }
    }

    fn seam(&self, name: &'static str, window: (f64, f64), a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> Seam {
        const SAMPLES: usize = 200;
        let (jump, at) = (0..=SAMPLES)
            .map(|k| window.0 + (window.1 - window.0) * k as f64 / SAMPLES as f64)
            .map(|s| ((a(s) - b(s)).abs(), s))
            .fold((0.0, window.0), |best, c| if c.0 > best.0 { c } else { best });
        Seam { name, window, jump, at }
    }
}

impl GluedAnsatz {
    fn new(a: MatchedAnsatz, bryant: &BryantProfile) -> Result<Self, AsymptoticsError> {
        a.validate()?;
        let tip = TipPiece::new(&a, bryant)?;
        let pieces = Pieces {
            a,
            parabolic_seam: (a.parabolic_l, (1.0 + a.overlap) * a.parabolic_l),
            tip_seam: (a.intermediate_sigma((1.0 + a.overlap) * a.theta), tip.sigma_theta),
            tip,
        };
        let tau = a.tau;
        let seams = vec![
            pieces.seam("parabolic", pieces.parabolic_seam, |s| parabolic_ansatz(s, tau), |s| intermediate_jet(s, tau).u),
            pieces.seam("tip", pieces.tip_seam, |s| intermediate_jet(s, tau).u, |s| pieces.tip.jet(s).u),
        ];
        if let Some(s) = seams.iter().find(|s| s.jump > a.seam_tolerance) {
            return Err(AsymptoticsError::SeamJump { seam: s.name, sigma: s.at, jump: s.jump, tolerance: a.seam_tolerance });
        }

        let kappa = a.kappa();
        let sigma_plus = pieces.tip.sigma_plus;
        let h = a.spacing.unwrap_or_else(|| (0.1 / kappa.sqrt()).min(0.02));
        let m = (sigma_plus / h).ceil() as usize;
        let half: Vec<f64> = (0..=m).map(|k| sigma_plus * k as f64 / m as f64).collect();
        let sigma: Vec<f64> = half.iter().rev().map(|s| -s).chain(half.iter().skip(1).copied()).collect();
        let mut jets: Vec<LocalJet> = sigma.iter().map(|&s| pieces.jet(s)).collect();
        let n = jets.len();
        jets[0].u = 0.0;
        jets[n - 1].u = 0.0;
        let u = jets.iter().map(|j| j.u).collect();
        let profile = RescaledProfile::new(sigma, u, tau, Boundary::Tips)?;
        Ok(Self { ansatz: a, profile, jets, kappa, sigma_plus, seams, pieces })
    }

    /// Exact jet of the glued profile at any `|σ| ≤ σ₊`.
    pub fn jet(&self, sigma: f64) -> Option<LocalJet> {
        (sigma.abs() <= self.sigma_plus).then(|| self.pieces.jet(sigma))
    }

    pub fn to_csv(&self) -> String {
        self.profile.to_csv()
    }
}

/// Glued profile of `a`.
pub fn matched_profile(a: &MatchedAnsatz, bryant: &BryantProfile) -> Result<RescaledProfile, AsymptoticsError> {
    Ok(a.build(bryant)?.profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Parabolic,
    Intermediate,
    Tip,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Parabolic, Region::Intermediate, Region::Tip];

    pub fn name(self) -> &'static str {
        match self {
            Region::Parabolic => "parabolic",
            Region::Intermediate => "intermediate",
            Region::Tip => "tip",
        }
    }
}

impl std::str::FromStr for Region {
    type Err = AsymptoticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Region::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| invalid("region", format!("expected parabolic, intermediate or tip, got `{s}`")))
    }
}

/// Sup-norm of the residual over one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionSup {
    pub sup: f64,
    pub at: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSample {
    pub tau: f64,
    pub parabolic: RegionSup,
    pub intermediate: RegionSup,
    pub tip: RegionSup,
    /// Residual at `z = 1`.
    pub at_unit_z: f64,
    pub seams: Vec<Seam>,
}

impl ResidualSample {
    pub fn region(&self, r: Region) -> RegionSup {
        match r {
            Region::Parabolic => self.parabolic,
            Region::Intermediate => self.intermediate,
            Region::Tip => self.tip,
        }
    }
}

/// Residual at every node; the tips, where `u = 0`, are left as NaN.
pub fn residual_field(g: &GluedAnsatz) -> Result<Vec<f64>, AsymptoticsError> {
    let j = flow::j_field(&g.profile)?;
    let sigma = g.profile.sigma();
    let n = sigma.len();
    Ok((0..n)
        .map(|i| if i == 0 || i == n - 1 { f64::NAN } else { equation_residual(sigma[i], &g.jets[i], j[i]) })
        .collect())
}

pub fn region_of(g: &GluedAnsatz, i: usize) -> Region {
    if g.profile.sigma()[i].abs() <= g.ansatz.parabolic_l {
        Region::Parabolic
    } else if g.jets[i].u >= g.ansatz.theta {
        Region::Intermediate
    } else {
        Region::Tip
    }
}

pub fn pde_residual(g: &GluedAnsatz) -> Result<ResidualSample, AsymptoticsError> {
    let res = residual_field(g)?;
    let sigma = g.profile.sigma();
    let mut sups = [RegionSup { sup: 0.0, at: 0.0, nodes: 0 }; 3];
    for (i, r) in res.iter().enumerate().filter(|(_, r)| r.is_finite()) {
        let slot = &mut sups[region_of(g, i) as usize];
        slot.nodes += 1;
        if r.abs() > slot.sup {
            slot.sup = r.abs();
            slot.at = sigma[i];
        }
    }
    let at_unit_z = lerp_at(sigma, &res, g.ansatz.tau.abs().sqrt());
    Ok(ResidualSample {
        tau: g.ansatz.tau,
        parabolic: sups[0],
        intermediate: sups[1],
        tip: sups[2],
        at_unit_z,
        seams: g.seams.clone(),
    })
}

/// Residuals across a `τ` ladder with fitted decay exponents `p`, `sup ∝ |τ|^{-p}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderReport {
    pub samples: Vec<ResidualSample>,
    pub parabolic_exponent: f64,
    pub intermediate_exponent: f64,
    pub tip_exponent: f64,
    pub unit_z_exponent: f64,
}

impl LadderReport {
    pub fn exponent(&self, r: Region) -> f64 {
        match r {
            Region::Parabolic => self.parabolic_exponent,
            Region::Intermediate => self.intermediate_exponent,
            Region::Tip => self.tip_exponent,
        }
    }

    /// CSV with header `tau,parabolic,intermediate,tip,unit_z`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,parabolic,intermediate,tip,unit_z\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{:.9e},{:.9e},{:.9e},{:.9e}",
                s.tau, s.parabolic.sup, s.intermediate.sup, s.tip.sup, s.at_unit_z
            );
        }
        out
    }
}

/// Builds the ansatz at every `τ` of the ladder (concurrently) and fits the
/// decay of each regional residual.
pub fn residual_ladder(base: &MatchedAnsatz, taus: &[f64], bryant: &BryantProfile) -> Result<LadderReport, AsymptoticsError> {
    if taus.len() < 2 {
        return Err(invalid("tau_ladder", "needs at least two values"));
    }
    let samples = std::thread::scope(|scope| {
        let handles: Vec<_> = taus
            .iter()
            .map(|&tau| {
                let a = MatchedAnsatz { tau, ..*base };
                scope.spawn(move || pde_residual(&a.build(bryant)?))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("ladder worker panicked")).collect::<Result<Vec<_>, _>>()
    })?;
    let abs_tau: Vec<f64> = samples.iter().map(|s| s.tau.abs()).collect();
    let fit = |f: &dyn Fn(&ResidualSample) -> f64| -loglog_slope(&abs_tau, &samples.iter().map(f).collect::<Vec<_>>());
    Ok(LadderReport {
        parabolic_exponent: fit(&|s| s.parabolic.sup),
        intermediate_exponent: fit(&|s| s.intermediate.sup),
        tip_exponent: fit(&|s| s.tip.sup),
        unit_z_exponent: fit(&|s| s.at_unit_z.abs()),
        samples,
    })
}

/// `|τ| · sup |u_parabolic − u_intermediate|` over `L ≤ σ ≤ 2L`.
pub fn region_agreement(tau: f64, l: f64) -> f64 {
    const SAMPLES: usize = 400;
    (0..=SAMPLES)
        .map(|k| l * (1.0 + k as f64 / SAMPLES as f64))
        .map(|s| (parabolic_ansatz(s, tau) - intermediate_jet(s, tau).u).abs())
        .fold(0.0, f64::max)
        * tau.abs()
}

/// Projection of `v = u/√2 − 1` for the parabolic formula on the whole line.
pub fn parabolic_alpha(tau: f64) -> Result<Projection, AsymptoticsError> {
    let sigma = spectral::symmetric_grid(20.0, 2000);
    let v: Vec<f64> = sigma.iter().map(|&s| parabolic_ansatz(s, tau) / SQRT_2 - 1.0).collect();
    Ok(spectral::project(&sigma, &v)?)
}

/// Leading-order curvature and diameter near the singular time `T = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub t: f64,
    /// `log|t|/|t|`.
    pub k: f64,
    /// `4√(|t| log|t|)`.
    pub d: f64,
    /// `k |t|`, the rescaled curvature.
    pub kappa_rescaled: f64,
    /// `|τ| = log|t|` for `τ = −log(−t)`.
    pub tau_abs: f64,
    /// `kappa_rescaled/|τ| − 1`.
    pub kappa_gap: f64,
}

pub fn predictions(t: f64) -> Result<Prediction, AsymptoticsError> {
    let e2 = std::f64::consts::E.powi(2);
    if !(t <= -e2) {
        return Err(invalid("t", format!("must be <= -e^2, got {t}")));
    }
    let a = t.abs();
    let log = a.ln();
    let k = log / a;
    let kappa_rescaled = k * a;
    Ok(Prediction { t, k, d: 4.0 * (a * log).sqrt(), kappa_rescaled, tau_abs: log, kappa_gap: kappa_rescaled / log - 1.0 })
}

/// One pass/fail check with its margin and location.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    /// Where `value` was attained (`σ` or `u`, see `name`).
    pub at: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, value: f64, limit: f64, at: f64) -> Self {
        Self { name, value, limit, at, passed: value <= limit }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyTolerances {
    /// Relative gap allowed between `Y = u_σ²` and the parabolic-window formula.
    pub y_gap: f64,
    /// Slack in the upper bound on `Y`.
    pub delta: f64,
    /// Allowed `|J(σ₊)/√κ + 1|`.
    pub j_epsilon: f64,
    /// Allowed `|σ₊/(2√|τ|) − 1|`.
    pub diameter: f64,
    /// Allowed `|u_σ(σ₊) + 1|`.
    pub tip_slope: f64,
}

impl Default for ConsistencyTolerances {
    fn default() -> Self {
        Self { y_gap: 0.1, delta: 0.5, j_epsilon: 0.15, diameter: 0.1, tip_slope: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TipConsistency {
    pub tau: f64,
    pub kappa_model: f64,
    /// `max R` of the glued profile.
    pub kappa_measured: f64,
    pub j_tip: f64,
    /// `J(σ₊)/√κ` with the measured `κ`.
    pub j_ratio: f64,
    pub sigma_plus: f64,
    pub diameter_ratio: f64,
    pub tip_slope: f64,
    /// `√(2 + 4/δ)`.
    pub m_delta: f64,
    pub checks: Vec<Check>,
}

impl TipConsistency {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// `(2u⁻² − 1)/(2|τ|) + 1/(4τ²)`, the value of `Y` forced by the parabolic profile.
pub fn parabolic_window_y(u: f64, tau: f64) -> f64 {
    (2.0 / (u * u) - 1.0) / (2.0 * tau.abs()) + 1.0 / (4.0 * tau * tau)
}

pub fn tip_consistency(a: &MatchedAnsatz, bryant: &BryantProfile) -> Result<TipConsistency, AsymptoticsError> {
    tip_consistency_with(a, bryant, &ConsistencyTolerances::default())
}

pub fn tip_consistency_with(
    a: &MatchedAnsatz,
    bryant: &BryantProfile,
    tol: &ConsistencyTolerances,
) -> Result<TipConsistency, AsymptoticsError> {
    let g = a.build(bryant)?;
    let sigma = g.profile.sigma();
    let tau = a.tau;
    let mut checks = Vec::new();

    // Y against the parabolic-window formula on |σ| ≤ L
    let window: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i].abs() <= a.parabolic_l).collect();
    let scale = window.iter().map(|&i| parabolic_window_y(g.jets[i].u, tau).abs()).fold(0.0, f64::max);
    let (gap, gap_at) = window
        .iter()
        .map(|&i| ((g.jets[i].u_s.powi(2) - parabolic_window_y(g.jets[i].u, tau)).abs(), sigma[i]))
        .fold((0.0, 0.0), |best, c| if c.0 > best.0 { c } else { best });
    checks.push(Check::new("y_parabolic_gap", gap / scale, tol.y_gap, gap_at));

    // upper bound on θ ≤ u ≤ u(M_δ), reported as the largest Y/bound
    let m_delta = (2.0 + 4.0 / tol.delta).sqrt();
    let (ratio, ratio_at) = (0..sigma.len())
        .filter(|&i| sigma[i] >= m_delta && g.jets[i].u >= a.theta)
        .map(|i| {
            let u = g.jets[i].u;
            let bound = (1.0 + tol.delta) / (2.0 * tau.abs()) * (2.0 / (u * u) - 1.0);
            (g.jets[i].u_s.powi(2) / bound, u)
        })
        .fold((0.0, f64::NAN), |best, c| if c.0 > best.0 { c } else { best });
    checks.push(Check::new("y_upper_bound", ratio, 1.0, ratio_at));

    let j_tip = *flow::j_field(&g.profile)?.last().expect("non-empty profile");
    let kappa_measured = g.profile.curvatures().r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let j_ratio = j_tip / kappa_measured.sqrt();
    checks.push(Check::new("j_tip", (j_ratio + 1.0).abs(), tol.j_epsilon, g.sigma_plus));

    let diameter_ratio = g.sigma_plus / (2.0 * tau.abs().sqrt());
    checks.push(Check::new("diameter", (diameter_ratio - 1.0).abs(), tol.diameter, g.sigma_plus));

    let tip_slope = flow::tip_slope(&g.profile, Side::Plus);
    checks.push(Check::new("tip_slope", (tip_slope + 1.0).abs(), tol.tip_slope, g.sigma_plus));

    Ok(TipConsistency {
        tau,
        kappa_model: g.kappa,
        kappa_measured,
        j_tip,
        j_ratio,
        sigma_plus: g.sigma_plus,
        diameter_ratio,
        tip_slope,
        m_delta,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_of_equal_pieces_is_the_piece() {
        let p = parabolic_jet(1.3, -50.0);
        let w = Jet2 { v: 0.3, d1: 2.0, d2: -5.0 };
        let b = LocalJet::blend(p, p, w, 7.0);
        assert!((b.u - p.u).abs() < 1e-15 && (b.u_ss - p.u_ss).abs() < 1e-15 && (b.u_t - p.u_t).abs() < 1e-15);
    }

    #[test]
    fn kappa_rate_is_the_derivative() {
        let m = KappaModel::Log { c: 0.7 };
        let (tau, h) = (-300.0, 1e-4);
        let fd = (m.value(tau + h) - m.value(tau - h)) / (2.0 * h);
        assert!((fd - m.rate(tau)).abs() < 1e-9);
    }
}
