//! Material coefficients `rho`, `sigma` and the speeds derived from them.
//!
//! The physical speed is `c = sqrt(sigma / rho)`. Seen from the reference
//! variable `y = g^{-1}(x)` the effective speed is `c_g(y) = c(g(y)) / g'(y)`;
//! rays written in the physical variable use the pair
//! `a_g(x) = (g' c_g)(g^{-1}(x)) = c(x)` and `b_g(x) = c_g'(g^{-1}(x))`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::mesh::{linspace, MeshMap};
use crate::{Error, Result};

const FD_STEP: f64 = 1e-6;
const FD_STEP_2: f64 = 1e-4;
const BOUND_SAMPLES: usize = 10_000;

/// `sigma(x) = 1 + A cos^2(kappa pi x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorySigma {
    amplitude: f64,
    wavenumber: u32,
}

impl OscillatorySigma {
    pub fn new(amplitude: f64, wavenumber: u32) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!("amplitude must be positive, got {amplitude}")));
        }
        if wavenumber == 0 {
            return Err(Error::InvalidArgument("wavenumber must be at least 1".into()));
        }
        Ok(Self { amplitude, wavenumber })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn wavenumber(&self) -> u32 {
        self.wavenumber
    }

    /// Spatial period `1 / kappa`.
    pub fn period(&self) -> f64 {
        1.0 / self.wavenumber as f64
    }

    fn k(&self) -> f64 {
        self.wavenumber as f64 * PI
    }

    pub fn value(&self, x: f64) -> f64 {
        let c = (self.k() * x).cos();
        1.0 + self.amplitude * c * c
    }

    pub fn d1(&self, x: f64) -> f64 {
        -self.amplitude * self.k() * (2.0 * self.k() * x).sin()
    }

    pub fn d2(&self, x: f64) -> f64 {
        -2.0 * self.amplitude * self.k() * self.k() * (2.0 * self.k() * x).cos()
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// User profile. Missing derivatives fall back to central differences
/// (step `1e-6` for the first derivative, `1e-4` for the second).
pub struct CustomProfile {
    pub name: String,
    pub value: ScalarFn,
    pub d1: Option<ScalarFn>,
    pub d2: Option<ScalarFn>,
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile").field("name", &self.name).finish_non_exhaustive()
    }
}

/// A scalar coefficient profile on `[-1, 1]`.
#[derive(Debug, Clone)]
pub enum Profile {
    Constant(f64),
    Oscillatory(OscillatorySigma),
    Custom(Arc<CustomProfile>),
}

impl Profile {
    pub fn one() -> Self {
        Profile::Constant(1.0)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant(_))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Oscillatory(s) => s.value(x),
            Profile::Custom(p) => (p.value)(x),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(_) => 0.0,
            Profile::Oscillatory(s) => s.d1(x),
            Profile::Custom(p) => match &p.d1 {
                Some(f) => f(x),
                None => ((p.value)(x + FD_STEP) - (p.value)(x - FD_STEP)) / (2.0 * FD_STEP),
            },
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match self {
            Profile::Constant(_) => 0.0,
            Profile::Oscillatory(s) => s.d2(x),
            Profile::Custom(p) => match &p.d2 {
                Some(f) => f(x),
                None => {
                    let h = FD_STEP_2;
                    ((p.value)(x + h) - 2.0 * (p.value)(x) + (p.value)(x - h)) / (h * h)
                }
            },
        }
    }
}

/// Density and stiffness on `[-1, 1]`, with certified positive lower bounds.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    rho: Profile,
    sigma: Profile,
    rho_star: f64,
    sigma_star: f64,
}

impl Default for CoefficientField {
    fn default() -> Self {
        Self::constant()
    }
}

impl CoefficientField {
    /// `rho = sigma = 1`.
    pub fn constant() -> Self {
        Self { rho: Profile::one(), sigma: Profile::one(), rho_star: 1.0, sigma_star: 1.0 }
    }

    /// `rho = 1`, `sigma = 1 + A cos^2(kappa pi x)`.
    pub fn oscillatory(amplitude: f64, wavenumber: u32) -> Result<Self> {
        Self::new(Profile::one(), Profile::Oscillatory(OscillatorySigma::new(amplitude, wavenumber)?))
    }

    /// Fails when either profile is not bounded away from zero on a dense
    /// sample of `[-1, 1]`.
    pub fn new(rho: Profile, sigma: Profile) -> Result<Self> {
        let rho_star = sampled_min(&rho);
        let sigma_star = sampled_min(&sigma);
        if !(rho_star > 0.0) || !(sigma_star > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "coefficients must be positive: min rho = {rho_star}, min sigma = {sigma_star}"
            )));
        }
        Ok(Self { rho, sigma, rho_star, sigma_star })
    }

    pub fn rho(&self) -> &Profile {
        &self.rho
    }

    pub fn sigma(&self) -> &Profile {
        &self.sigma
    }

    pub fn lower_bounds(&self) -> (f64, f64) {
        (self.rho_star, self.sigma_star)
    }

    pub fn is_constant(&self) -> bool {
        self.rho.is_constant() && self.sigma.is_constant()
    }

    /// `c(x) = sqrt(sigma(x) / rho(x))`.
    pub fn speed(&self, x: f64) -> f64 {
        (self.sigma.value(x) / self.rho.value(x)).sqrt()
    }

    /// `c'(x)`.
    pub fn speed_d1(&self, x: f64) -> f64 {
        let (q, q1, _) = self.ratio_derivatives(x);
        q1 / (2.0 * q.sqrt())
    }

    /// `c''(x)`.
    pub fn speed_d2(&self, x: f64) -> f64 {
        let (q, q1, q2) = self.ratio_derivatives(x);
        let s = q.sqrt();
        q2 / (2.0 * s) - q1 * q1 / (4.0 * q * s)
    }

    /// `q = sigma / rho` and its first two derivatives.
    fn ratio_derivatives(&self, x: f64) -> (f64, f64, f64) {
        let (s, s1, s2) = (self.sigma.value(x), self.sigma.d1(x), self.sigma.d2(x));
        let (r, r1, r2) = (self.rho.value(x), self.rho.d1(x), self.rho.d2(x));
        let q = s / r;
        let q1 = s1 / r - s * r1 / (r * r);
        let q2 = s2 / r - 2.0 * s1 * r1 / (r * r) - s * r2 / (r * r) + 2.0 * s * r1 * r1 / (r * r * r);
        (q, q1, q2)
    }
}

fn sampled_min(p: &Profile) -> f64 {
    match p {
        Profile::Constant(v) => *v,
        Profile::Oscillatory(_) => 1.0,
        Profile::Custom(_) => linspace(-1.0, 1.0, BOUND_SAMPLES).map(|x| p.value(x)).fold(f64::INFINITY, f64::min),
    }
}

/// `c(x) = sqrt(sigma(x) / rho(x))`.
pub fn wave_speed(field: &CoefficientField, x: f64) -> f64 {
    field.speed(x)
}

/// `c_g(y) = c(g(y)) / g'(y)` at a reference position `y`.
pub fn effective_speed_cg(field: &CoefficientField, map: &MeshMap, y: f64) -> f64 {
    field.speed(map.g(y)) / map.dg(y)
}

/// `d c_g / dy` at a reference position.
pub fn effective_speed_cg_d1(field: &CoefficientField, map: &MeshMap, y: f64) -> f64 {
    let x = map.g(y);
    let (g1, g2) = (map.dg(y), map.ddg(y));
    field.speed_d1(x) - field.speed(x) * g2 / (g1 * g1)
}

/// `d^2 c_g / dy^2` at a reference position.
pub fn effective_speed_cg_d2(field: &CoefficientField, map: &MeshMap, y: f64) -> f64 {
    let x = map.g(y);
    let (g1, g2, g3) = (map.dg(y), map.ddg(y), map.dddg(y));
    let (c, c1, c2) = (field.speed(x), field.speed_d1(x), field.speed_d2(x));
    c2 * g1 - c1 * g2 / g1 - c * (g3 / (g1 * g1) - 2.0 * g2 * g2 / (g1 * g1 * g1))
}

/// `(a_g(x), b_g(x))` at a physical position `x`.
///
/// `a_g = g' c_g` composed with `g^{-1}` collapses to `c(x)`, so constant
/// coefficients give `a_g = 1` exactly for every map.
pub fn grid_speed_pair(field: &CoefficientField, map: &MeshMap, x: f64) -> (f64, f64) {
    let a = field.speed(x);
    if map.is_identity() {
        return (a, field.speed_d1(x));
    }
    (a, effective_speed_cg_d1(field, map, map.ginv(x)))
}

/// `d b_g / dx = c_g''(y) / g'(y)` with `y = g^{-1}(x)`.
pub fn grid_speed_b_d1(field: &CoefficientField, map: &MeshMap, x: f64) -> f64 {
    if map.is_identity() {
        return field.speed_d2(x);
    }
    let y = map.ginv(x);
    effective_speed_cg_d2(field, map, y) / map.dg(y)
}
