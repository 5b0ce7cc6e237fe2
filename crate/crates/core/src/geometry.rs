//! Warped-product profiles `ds² + ψ(s)² g_can`, their sectional curvatures,
//! closing-condition residuals and analytic fixtures.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::numerics::fd::{self, EndRule};
use crate::numerics::ode::Dopri5;
use crate::numerics::{find_root, smooth};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("profile needs at least 5 interior points, got {0}")]
    TooFewPoints(usize),
    #[error("coordinate and radius arrays differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("arclength not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("radius must vanish exactly at both poles (got {0}, {1})")]
    OpenEnd(f64, f64),
    #[error("radius not positive at interior index {0}")]
    NonPositive(usize),
    #[error("non-finite {field} at index {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("unknown fixture kind `{0}`")]
    UnknownFixture(String),
    #[error("invalid fixture parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("fixture construction failed: {0}")]
    Construction(String),
}

/// A sampled profile `ψ(s)` at time `t`, closed off by two poles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileGrid {
    s: Vec<f64>,
    psi: Vec<f64>,
    t: f64,
}

impl ProfileGrid {
    pub fn new(s: Vec<f64>, psi: Vec<f64>, t: f64) -> Result<Self, GeometryError> {
        validate_closed(&s, &psi)?;
        Ok(Self { s, psi, t })
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Distance between the poles, `s₊ − s₋`.
    pub fn diameter(&self) -> f64 {
        self.s[self.s.len() - 1] - self.s[0]
    }

    pub fn psi_max(&self) -> f64 {
        self.psi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest radius between the outermost local maxima of `ψ` (the neck of
    /// a dumbbell); equals `psi_max` for single-bulb profiles.
    pub fn waist(&self) -> f64 {
        let n = self.psi.len();
        let is_peak = |i: usize| self.psi[i] >= self.psi[i - 1] && self.psi[i] >= self.psi[i + 1];
        let first = (1..n - 1).find(|&i| is_peak(i)).unwrap_or(0);
        let last = (1..n - 1).rev().find(|&i| is_peak(i)).unwrap_or(n - 1);
        self.psi[first..=last].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with header `s,psi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,psi\n");
        for (s, p) in self.s.iter().zip(&self.psi) {
            let _ = writeln!(out, "{s:.17e},{p:.17e}");
        }
        out
    }
}

pub(crate) fn validate_closed(s: &[f64], psi: &[f64]) -> Result<(), GeometryError> {
    if s.len() != psi.len() {
        return Err(GeometryError::LengthMismatch(s.len(), psi.len()));
    }
    if s.len() < 7 {
        return Err(GeometryError::TooFewPoints(s.len().saturating_sub(2)));
    }
    for (i, v) in s.iter().chain(psi.iter()).enumerate() {
        if !v.is_finite() {
            let (field, index) = if i < s.len() { ("s", i) } else { ("psi", i - s.len()) };
            return Err(GeometryError::NonFinite { field, index });
        }
    }
    if let Some(i) = s.windows(2).position(|w| w[1] <= w[0]) {
        return Err(GeometryError::NotIncreasing(i + 1));
    }
    let n = psi.len();
    if psi[0] != 0.0 || psi[n - 1] != 0.0 {
        return Err(GeometryError::OpenEnd(psi[0], psi[n - 1]));
    }
    if let Some(i) = psi[1..n - 1].iter().position(|&p| p <= 0.0) {
        return Err(GeometryError::NonPositive(i + 1));
    }
    Ok(())
}

/// Sectional curvatures and derived fields on a profile grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureFields {
    /// Curvature of planes containing `∂_s`: `−ψ_ss/ψ`.
    pub k0: Vec<f64>,
    /// Curvature of planes tangent to the orbit spheres: `(1 − ψ_s²)/ψ²`.
    pub k1: Vec<f64>,
    /// Scalar curvature `4 K0 + 2 K1`.
    pub r: Vec<f64>,
    /// `K0 / K1` (NaN where `K1 = 0`).
    pub q: Vec<f64>,
}

impl CurvatureFields {
    /// CSV with header `s,K0,K1,R,Q`.
    pub fn to_csv(&self, s: &[f64]) -> String {
        let mut out = String::from("s,K0,K1,R,Q\n");
        for i in 0..s.len() {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                s[i], self.k0[i], self.k1[i], self.r[i], self.q[i]
            );
        }
        out
    }

    /// Largest finite `Q`.
    pub fn q_max(&self) -> f64 {
        self.q.iter().copied().filter(|q| q.is_finite()).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Curvatures of `ψ` sampled on `x`. Ends with [`EndRule::Odd`] are poles:
/// there `K0` is the limit of the interior values (even extrapolation in the
/// distance to the pole) and `K1 := K0`.
pub(crate) fn curvature_fields(x: &[f64], w: &[f64], left: EndRule, right: EndRule) -> CurvatureFields {
    let n = x.len();
    let (d1, d2) = fd::derivatives(x, w, left, right);
    let mut k0: Vec<f64> = (0..n).map(|i| -d2[i] / w[i]).collect();
    let mut k1: Vec<f64> = (0..n).map(|i| (1.0 - d1[i] * d1[i]) / (w[i] * w[i])).collect();
    if left == EndRule::Odd {
        let v = pole_limit(x[0], &x[1..4], &k0[1..4]);
        k0[0] = v;
        k1[0] = v;
    }
    if right == EndRule::Odd {
        let v = pole_limit(x[n - 1], &x[n - 4..n - 1], &k0[n - 4..n - 1]);
        k0[n - 1] = v;
        k1[n - 1] = v;
    }
    let r = k0.iter().zip(&k1).map(|(a, b)| 4.0 * a + 2.0 * b).collect();
    let q = k0.iter().zip(&k1).map(|(a, b)| if *b == 0.0 { f64::NAN } else { a / b }).collect();
    CurvatureFields { k0, k1, r, q }
}

/// Value at the pole of an even function of the distance to the pole,
/// interpolated in the squared distance through three samples.
pub(crate) fn pole_limit(pole: f64, x: &[f64], v: &[f64]) -> f64 {
    let t: Vec<f64> = x.iter().map(|xi| (xi - pole) * (xi - pole)).collect();
    (0..t.len())
        .map(|j| {
            let basis: f64 = (0..t.len()).filter(|&m| m != j).map(|m| -t[m] / (t[j] - t[m])).product();
            v[j] * basis
        })
        .sum()
}

/// Curvature fields of a closed profile.
pub fn curvatures(p: &ProfileGrid) -> Result<CurvatureFields, GeometryError> {
    let c = curvature_fields(&p.s, &p.psi, EndRule::Odd, EndRule::Odd);
    for (field, arr) in [("K0", &c.k0), ("K1", &c.k1)] {
        if let Some(index) = arr.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite { field, index });
        }
    }
    Ok(c)
}

/// Closing-condition residuals at the two poles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosingResidual {
    /// `|ψ_s(s₋) − 1|`
    pub slope_minus: f64,
    /// `|ψ_s(s₊) + 1|`
    pub slope_plus: f64,
    /// `|ψ_ss(s₋)|`
    pub curvature_minus: f64,
    /// `|ψ_ss(s₊)|`
    pub curvature_plus: f64,
}

/// One-sided five-point estimates of the closing conditions.
pub fn closing_residual(p: &ProfileGrid) -> ClosingResidual {
    let (l1, l2) = fd::one_sided(&p.s, &p.psi, true, 5);
    let (r1, r2) = fd::one_sided(&p.s, &p.psi, false, 5);
    ClosingResidual {
        slope_minus: (l1 - 1.0).abs(),
        slope_plus: (r1 + 1.0).abs(),
        curvature_minus: l2.abs(),
        curvature_plus: r2.abs(),
    }
}

/// Analytic test profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fixture {
    /// Round sphere of the given radius.
    Sphere { radius: f64, n: usize },
    /// Cylinder of radius `radius` and barrel length `length` with hemispherical caps.
    CappedCylinder { radius: f64, length: f64, n: usize },
    /// Two spherical bulbs of radius `bulb` joined through a neck of radius `neck`.
    Dumbbell { neck: f64, bulb: f64, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Sphere,
    CappedCylinder,
    Dumbbell,
}

impl FromStr for FixtureKind {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere" => Ok(Self::Sphere),
            "capped_cylinder" | "cylinder" => Ok(Self::CappedCylinder),
            "dumbbell" => Ok(Self::Dumbbell),
            other => Err(GeometryError::UnknownFixture(other.to_string())),
        }
    }
}

const DEFAULT_POINTS: usize = 201;

impl Fixture {
    /// Builds a fixture description from a kind name and a parameter map.
    /// Recognised keys: `radius`, `length`, `neck`, `bulb`, `n`.
    pub fn from_params(kind: &str, params: &BTreeMap<String, f64>) -> Result<Self, GeometryError> {
        let kind: FixtureKind = kind.parse()?;
        let allowed: &[&str] = match kind {
            FixtureKind::Sphere => &["radius", "n"],
            FixtureKind::CappedCylinder => &["radius", "length", "n"],
            FixtureKind::Dumbbell => &["neck", "bulb", "n"],
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(GeometryError::InvalidParameter {
                name: k.clone(),
                reason: "not used by this fixture".into(),
            });
        }
        let get = |k: &str, default: f64| -> Result<f64, GeometryError> {
            let v = params.get(k).copied().unwrap_or(default);
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(GeometryError::InvalidParameter { name: k.into(), reason: format!("must be positive, got {v}") })
            }
        };
        let n = get("n", DEFAULT_POINTS as f64)?;
        if n.fract() != 0.0 {
            return Err(GeometryError::InvalidParameter { name: "n".into(), reason: "must be an integer".into() });
        }
        let n = n as usize;
        Ok(match kind {
            FixtureKind::Sphere => Fixture::Sphere { radius: get("radius", 1.0)?, n },
            FixtureKind::CappedCylinder => {
                Fixture::CappedCylinder { radius: get("radius", 2f64.sqrt())?, length: get("length", 10.0)?, n }
            }
            FixtureKind::Dumbbell => Fixture::Dumbbell { neck: get("neck", 0.5)?, bulb: get("bulb", 1.0)?, n },
        })
    }

    pub fn build(&self) -> Result<ProfileGrid, GeometryError> {
        match *self {
            Fixture::Sphere { radius, n } => {
                check_points(n)?;
                let half = FRAC_PI_2 * radius;
                let s = linspace(-half, half, n);
                let psi = closed_ends(s.iter().map(|x| radius * (x / radius).cos()).collect());
                ProfileGrid::new(s, psi, 0.0)
            }
            Fixture::CappedCylinder { radius, length, n } => {
                check_points(n)?;
                let half = 0.5 * length + FRAC_PI_2 * radius;
                let s = linspace(-half, half, n);
                let psi = s
                    .iter()
                    .map(|x| {
                        let excess = x.abs() - 0.5 * length;
                        if excess <= 0.0 {
                            radius
                        } else {
                            radius * (excess / radius).cos()
                        }
                    })
                    .collect();
                ProfileGrid::new(s, closed_ends(psi), 0.0)
            }
            Fixture::Dumbbell { neck, bulb, n } => {
                check_points(n)?;
                Dumbbell::shoot(bulb, neck)?.sample(n)
            }
        }
    }
}

/// `fixtures(kind, params)` convenience wrapper.
pub fn fixture(kind: &str, params: &BTreeMap<String, f64>) -> Result<ProfileGrid, GeometryError> {
    Fixture::from_params(kind, params)?.build()
}

fn check_points(n: usize) -> Result<(), GeometryError> {
    if n < 7 {
        Err(GeometryError::TooFewPoints(n.saturating_sub(2)))
    } else {
        Ok(())
    }
}

fn closed_ends(mut psi: Vec<f64>) -> Vec<f64> {
    let n = psi.len();
    psi[0] = 0.0;
    psi[n - 1] = 0.0;
    psi
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { b } else { a + h * i as f64 }).collect()
}

/// Dumbbell built by prescribing `Q = K0/K1` along the profile: `Q = 1` (an
/// exact spherical cap of radius `bulb`) up to `start`, then a smooth descent
/// to `Q = -1` over `width`. Writing `ψ_s = cos φ`, the profile solves
/// `φ_s = Q sin φ / ψ`; the neck sits where `φ` returns to `π/2` and the
/// profile is mirrored there. `Q ≤ 1` holds by construction.
struct Dumbbell {
    bulb: f64,
    start: f64,
    width: f64,
    half_length: f64,
}

const NECK_Q: f64 = -1.0;

impl Dumbbell {
    fn q_at(&self, x: f64) -> f64 {
        1.0 + (NECK_Q - 1.0) * smooth::step_value((x - self.start) / self.width)
    }

    /// Integrates from the end of the spherical cap to the neck; returns the
    /// neck position and radius.
    fn neck(bulb: f64, start: f64, width: f64) -> Option<(f64, f64)> {
        let shape = Dumbbell { bulb, start, width, half_length: 0.0 };
        let y0 = [bulb * (start / bulb).sin(), start / bulb];
        let mut hit = None;
        let mut above = y0[1] > FRAC_PI_2;
        let mut failed = false;
        let _ = Dopri5::new(1e-12, 1e-14).with_h_max(0.05 * bulb).integrate(
            |x, y: &[f64; 2]| [y[1].cos(), shape.q_at(x) * y[1].sin() / y[0]],
            start,
            y0,
            start + 20.0 * bulb,
            |step| {
                if step.y1[0] <= 1e-6 * bulb || step.y1[1] >= PI - 1e-6 {
                    failed = true;
                    return ControlFlow::Break(());
                }
                if above && step.y1[1] <= FRAC_PI_2 {
                    let x = find_root(|t| step.eval(t)[1] - FRAC_PI_2, step.t0, step.t1(), 1e-14)
                        .unwrap_or(step.t1());
                    hit = Some((x, step.eval(x)[0]));
                    return ControlFlow::Break(());
                }
                above = above || step.y1[1] > FRAC_PI_2;
                ControlFlow::Continue(())
            },
        );
        if failed {
            None
        } else {
            hit
        }
    }

    fn shoot(bulb: f64, neck: f64) -> Result<Self, GeometryError> {
        let width = 0.5 * bulb;
        let lo = FRAC_PI_2 * bulb;
        let target = |start: f64| Self::neck(bulb, start, width).map(|(_, r)| r - neck);
        let widest = target(lo).ok_or_else(|| GeometryError::Construction("no neck for the shortest cap".into()))?;
        if widest <= 0.0 {
            return Err(GeometryError::InvalidParameter {
                name: "neck".into(),
                reason: format!("must be below {:.4} for bulb {bulb}", widest + neck),
            });
        }
        let mut a = lo;
        let mut b = lo;
        let step = 0.02 * PI * bulb;
        loop {
            b += step;
            match target(b) {
                Some(v) if v <= 0.0 => break,
                Some(_) => a = b,
                None => {
                    return Err(GeometryError::InvalidParameter {
                        name: "neck".into(),
                        reason: "too thin to construct".into(),
                    })
                }
            }
        }
        let start = find_root(|s| target(s).unwrap_or(-neck), a, b, 1e-13)
            .ok_or_else(|| GeometryError::Construction("shooting for the neck radius failed".into()))?;
        let (half_length, _) = Self::neck(bulb, start, width)
            .ok_or_else(|| GeometryError::Construction("neck lost after shooting".into()))?;
        if half_length < start + width {
            return Err(GeometryError::InvalidParameter {
                name: "neck".into(),
                reason: "too close to the bulb radius for a symmetric neck".into(),
            });
        }
        Ok(Dumbbell { bulb, start, width, half_length })
    }

    fn sample(&self, n: usize) -> Result<ProfileGrid, GeometryError> {
        let l = self.half_length;
        let s = linspace(-l, l, n);
        // distance from the nearest pole, in increasing order for the left half
        let mut wanted: Vec<(f64, usize)> = s.iter().enumerate().map(|(i, x)| (l - x.abs(), i)).collect();
        wanted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut psi = vec![0.0; n];
        let mut pending = wanted.into_iter().peekable();
        while let Some(&(xi, i)) = pending.peek() {
            if xi > self.start {
                break;
            }
            psi[i] = self.bulb * (xi / self.bulb).sin();
            pending.next();
        }
        let y0 = [self.bulb * (self.start / self.bulb).sin(), self.start / self.bulb];
        let result = Dopri5::new(1e-12, 1e-14).with_h_max(0.05 * self.bulb).integrate(
            |x, y: &[f64; 2]| [y[1].cos(), self.q_at(x) * y[1].sin() / y[0]],
            self.start,
            y0,
            l,
            |step| {
                while let Some(&(xi, i)) = pending.peek() {
                    if xi > step.t1() {
                        break;
                    }
                    psi[i] = step.eval(xi)[0];
                    pending.next();
                }
                ControlFlow::Continue(())
            },
        );
        result.map_err(|e| GeometryError::Construction(e.to_string()))?;
        if let Some((xi, i)) = pending.next() {
            return Err(GeometryError::Construction(format!("sample {i} at {xi} not reached")));
        }
        ProfileGrid::new(s, closed_ends(psi), 0.0)
    }
}
