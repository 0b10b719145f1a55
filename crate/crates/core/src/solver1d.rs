//! Semi-discrete 1D wave equation `rho u_tt = (sigma u_x)_x` on a
//! transformed grid, advanced in time by leapfrog.

use crate::coefficients::CoefficientField;
use crate::mesh::TransformedGrid1D;
use crate::quadrature::adaptive_gk;
use crate::{Error, Result, C64};

/// Blow-up threshold relative to the initial norm.
pub const INSTABILITY_FACTOR: f64 = 1e6;
/// Target number of space-time rows when no stride is given.
pub const DEFAULT_SNAPSHOT_ROWS: usize = 512;

/// Default packet concentration `h^{-0.9}`.
pub fn default_gamma(h: f64) -> f64 {
    h.powf(-0.9)
}

/// Gaussian packet centred at `x0` with frequency `xi0` (in units of `1/h`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketSpec {
    pub x0: f64,
    pub xi0: f64,
    /// Concentration; `None` means [`default_gamma`].
    pub gamma: Option<f64>,
}

impl PacketSpec {
    pub fn new(x0: f64, xi0: f64) -> Self {
        Self { x0, xi0, gamma: None }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn gamma_for(&self, h: f64) -> f64 {
        self.gamma.unwrap_or_else(|| default_gamma(h))
    }
}

/// Initial position and velocity `(G(g_j), G'(g_j))`.
///
/// The envelope and phase are written in the reference variable
/// `Y = g^{-1}(x)`, so on a refined region the packet is correspondingly
/// narrower in `x`. Boundary entries are zero.
pub fn gaussian_packet(grid: &TransformedGrid1D, spec: &PacketSpec) -> Result<(Vec<C64>, Vec<C64>)> {
    if !(spec.x0 > -1.0 && spec.x0 < 1.0) {
        return Err(Error::InvalidArgument(format!("packet centre must lie in (-1, 1), got {}", spec.x0)));
    }
    let h = grid.h();
    let gamma = spec.gamma_for(h);
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let map = grid.map();
    let y0 = map.ginv(spec.x0);
    let k = spec.xi0 / h;
    let n = grid.len();
    let mut u0 = vec![C64::new(0.0, 0.0); n];
    let mut u1 = vec![C64::new(0.0, 0.0); n];
    for j in 1..n - 1 {
        let y = grid.reference_nodes()[j];
        let d = y - y0;
        let val = (-0.5 * gamma * d * d).exp() * C64::from_polar(1.0, k * y);
        u0[j] = val;
        u1[j] = val * C64::new(-gamma * d, k) / map.dg(y);
    }
    Ok((u0, u1))
}

/// Precomputed stencil of the 1D operator.
#[derive(Debug, Clone)]
pub struct Scheme1D {
    grid: TransformedGrid1D,
    coeffs: CoefficientField,
    /// `sigma(g_{j+1/2}) / h_{j+1/2}`, length `N + 1`.
    stiffness: Vec<f64>,
    /// `h_j rho(g_j)`, length `N + 2`.
    mass: Vec<f64>,
}

impl Scheme1D {
    pub fn new(grid: TransformedGrid1D, coeffs: CoefficientField) -> Self {
        let stiffness = grid
            .midpoints()
            .iter()
            .zip(grid.cells())
            .map(|(&m, &c)| coeffs.sigma().value(m) / c)
            .collect();
        let mass = grid.nodes().iter().zip(grid.dual()).map(|(&g, &d)| d * coeffs.rho().value(g)).collect();
        Self { grid, coeffs, stiffness, mass }
    }

    pub fn grid(&self) -> &TransformedGrid1D {
        &self.grid
    }

    pub fn coeffs(&self) -> &CoefficientField {
        &self.coeffs
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    fn check_len(&self, u: &[C64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::InvalidArgument(format!("field has length {}, grid has {}", u.len(), self.len())));
        }
        Ok(())
    }

    /// `v = L u`, zero on the boundary.
    pub fn apply(&self, u: &[C64]) -> Result<Vec<C64>> {
        self.check_len(u)?;
        let mut v = vec![C64::new(0.0, 0.0); u.len()];
        self.apply_into(u, &mut v);
        Ok(v)
    }

    fn apply_into(&self, u: &[C64], v: &mut [C64]) {
        let n = u.len();
        let cells = u.windows(3).zip(self.stiffness.windows(2)).zip(&self.mass[1..n - 1]);
        for (out, ((w, s), m)) in v[1..n - 1].iter_mut().zip(cells) {
            *out = ((w[2] - w[1]) * s[1] - (w[1] - w[0]) * s[0]) / *m;
        }
        v[0] = C64::new(0.0, 0.0);
        v[n - 1] = C64::new(0.0, 0.0);
    }

    /// `1/2 sum h_j rho_j |v_j|^2 + 1/2 sum sigma_{j+1/2} |u_{j+1}-u_j|^2 / h_{j+1/2}`.
    pub fn semi_discrete_energy(&self, u: &[C64], v: &[C64]) -> f64 {
        let kinetic: f64 = self.mass.iter().zip(v).map(|(m, v)| m * v.norm_sqr()).sum();
        let potential: f64 = (0..u.len() - 1).map(|j| self.stiffness[j] * (u[j + 1] - u[j]).norm_sqr()).sum();
        0.5 * (kinetic + potential)
    }

    /// Mass-weighted squared norm `sum h_j rho_j |u_j|^2`.
    pub fn weighted_norm_sqr(&self, u: &[C64]) -> f64 {
        self.mass.iter().zip(u).map(|(m, u)| m * u.norm_sqr()).sum()
    }
}

/// Free-function form of [`Scheme1D::apply`] on the state's scheme.
pub fn apply_operator(state: &WaveState1D, u: &[C64]) -> Result<Vec<C64>> {
    state.scheme.apply(u)
}

/// Two consecutive leapfrog levels.
#[derive(Debug, Clone)]
pub struct WaveState1D {
    scheme: Scheme1D,
    u_curr: Vec<C64>,
    u_prev: Vec<C64>,
    time: f64,
    dt: f64,
    step: usize,
    initial_norm: f64,
    scratch: Vec<C64>,
}

impl WaveState1D {
    /// Builds levels 0 and 1 with the Taylor start
    /// `u^1 = u^0 + dt u1 + dt^2/2 L u^0`.
    pub fn start(scheme: Scheme1D, u0: &[C64], u1: &[C64], dt: f64) -> Result<Self> {
        scheme.check_len(u0)?;
        scheme.check_len(u1)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let n = u0.len();
        let mut prev = u0.to_vec();
        prev[0] = C64::new(0.0, 0.0);
        prev[n - 1] = C64::new(0.0, 0.0);
        let lu = scheme.apply(&prev)?;
        let mut curr: Vec<C64> = (0..n).map(|j| prev[j] + u1[j] * dt + lu[j] * (0.5 * dt * dt)).collect();
        curr[0] = C64::new(0.0, 0.0);
        curr[n - 1] = C64::new(0.0, 0.0);
        let initial_norm = scheme.weighted_norm_sqr(&prev).sqrt();
        Ok(Self { scheme, u_curr: curr, u_prev: prev, time: dt, dt, step: 1, initial_norm, scratch: lu })
    }

    pub fn scheme(&self) -> &Scheme1D {
        &self.scheme
    }

    pub fn current(&self) -> &[C64] {
        &self.u_curr
    }

    pub fn previous(&self) -> &[C64] {
        &self.u_prev
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.u_curr.iter().map(|z| z.norm()).collect()
    }

    /// One leapfrog step `u^{n+1} = 2u^n - u^{n-1} + dt^2 L u^n`.
    pub fn advance(&mut self) -> Result<()> {
        self.scheme.apply_into(&self.u_curr, &mut self.scratch);
        let dt2 = self.dt * self.dt;
        let mut norm_sqr = 0.0;
        let levels = self.u_curr.iter_mut().zip(self.u_prev.iter_mut());
        for ((c, p), (l, m)) in levels.zip(self.scratch.iter().zip(&self.scheme.mass)) {
            let next = *c * 2.0 - *p + *l * dt2;
            *p = *c;
            *c = next;
            norm_sqr += m * next.norm_sqr();
        }
        self.step += 1;
        self.time = self.step as f64 * self.dt;
        let norm = norm_sqr.sqrt();
        let limit = INSTABILITY_FACTOR * self.initial_norm.max(f64::MIN_POSITIVE);
        if !norm.is_finite() || (self.initial_norm > 0.0 && norm > limit) {
            return Err(Error::Instability { step: self.step, time: self.time, norm });
        }
        Ok(())
    }
}

/// Leapfrog energy between levels `n - 1` and `n`.
///
/// Kinetic part from the backward difference `(u^n - u^{n-1}) / dt`;
/// potential part as the product of consecutive-level differences, the
/// quadratic form the leapfrog recurrence conserves exactly.
pub fn discrete_energy(state: &WaveState1D) -> f64 {
    let s = &state.scheme;
    let (u, p) = (&state.u_curr, &state.u_prev);
    let kinetic: f64 = s.mass.iter().zip(u.iter().zip(p)).map(|(m, (a, b))| m * (a - b).norm_sqr()).sum();
    let potential: f64 = s
        .stiffness
        .iter()
        .zip(u.windows(2).zip(p.windows(2)))
        .map(|(k, (a, b))| k * ((a[1] - a[0]) * (b[1] - b[0]).conj()).re)
        .sum();
    0.5 * (kinetic / (state.dt * state.dt) + potential)
}

/// `sum h_j g_j m_j^2 / sum h_j m_j^2` for a modulus field `m`.
pub fn centroid(modulus: &[f64], grid: &TransformedGrid1D) -> Result<f64> {
    if modulus.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("field has length {}, grid has {}", modulus.len(), grid.len())));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for ((m, g), w) in modulus.iter().zip(grid.nodes()).zip(grid.dual()) {
        let e = w * m * m;
        num += e * g;
        den += e;
    }
    if !(den > 0.0) {
        return Err(Error::UndefinedCentroid);
    }
    Ok(num / den)
}

/// Whole-line d'Alembert solution of `u_tt = u_xx` at `(x, t)`.
///
/// Only valid while `[x - t, x + t]` stays inside `(-1, 1)`.
pub fn dalembert_reference<F, G>(u0: F, u1: G, x: f64, t: f64) -> Result<C64>
where
    F: Fn(f64) -> C64,
    G: Fn(f64) -> C64,
{
    let (lo, hi) = (x - t, x + t);
    if !(lo > -1.0 && hi < 1.0) {
        return Err(Error::OutOfValidity { lo, hi });
    }
    let re = adaptive_gk(|s| u1(s).re, lo, hi, 1e-10)?;
    let im = adaptive_gk(|s| u1(s).im, lo, hi, 1e-10)?;
    Ok((u0(hi) + u0(lo)) * 0.5 + C64::new(re, im) * 0.5)
}

/// Time-integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeapfrogOptions {
    pub horizon: f64,
    pub cfl: f64,
    /// Snapshot every `stride` steps; `None` targets about 512 rows.
    pub stride: Option<usize>,
}

impl LeapfrogOptions {
    pub fn new(horizon: f64, cfl: f64) -> Self {
        Self { horizon, cfl, stride: None }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = Some(stride);
        self
    }

    /// `(steps, dt)` with `dt <= cfl * h` and `steps * dt = horizon`.
    pub fn steps(&self, h: f64) -> Result<(usize, f64)> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::InvalidArgument(format!("cfl must lie in (0, 0.5], got {}", self.cfl)));
        }
        let steps = (self.horizon / (self.cfl * h) - 1e-9).ceil().max(1.0) as usize;
        Ok((steps, self.horizon / steps as f64))
    }
}

/// Recorded run.
#[derive(Debug, Clone)]
pub struct Trajectory1D {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub centroids: Vec<Option<f64>>,
    /// `(t, E)` after every step.
    pub energies: Vec<(f64, f64)>,
    pub dt: f64,
    pub steps: usize,
    pub final_state: WaveState1D,
}

impl Trajectory1D {
    /// Largest `|E_n - E_0| / E_0`; zero for a silent run.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = match self.energies.first() {
            Some(&(_, e)) if e > 0.0 => e,
            _ => return 0.0,
        };
        self.energies.iter().map(|&(_, e)| (e - e0).abs() / e0).fold(0.0, f64::max)
    }
}

/// Runs leapfrog from `(u0, u1)` up to `opts.horizon`.
///
/// Snapshot 0 is the initial field at `t = 0`; the energy series starts at
/// `t = dt`, the first time both levels exist.
pub fn leapfrog_integrate(scheme: &Scheme1D, u0: &[C64], u1: &[C64], opts: &LeapfrogOptions) -> Result<Trajectory1D> {
    let (steps, dt) = opts.steps(scheme.grid().h())?;
    let stride = opts.stride.unwrap_or((steps / DEFAULT_SNAPSHOT_ROWS).max(1)).max(1);
    let grid = scheme.grid();
    let mut state = WaveState1D::start(scheme.clone(), u0, u1, dt)?;
    let mut times = vec![0.0];
    let m0: Vec<f64> = state.previous().iter().map(|z| z.norm()).collect();
    let mut centroids = vec![centroid(&m0, grid).ok()];
    let mut snapshots = vec![m0];
    let mut energies = vec![(state.time(), discrete_energy(&state))];
    let record = |state: &WaveState1D, times: &mut Vec<f64>, snaps: &mut Vec<Vec<f64>>, cents: &mut Vec<Option<f64>>| {
        let m = state.modulus();
        times.push(state.time());
        cents.push(centroid(&m, grid).ok());
        snaps.push(m);
    };
    if stride == 1 || steps == 1 {
        record(&state, &mut times, &mut snapshots, &mut centroids);
    }
    for n in 2..=steps {
        state.advance()?;
        energies.push((state.time(), discrete_energy(&state)));
        if n % stride == 0 || n == steps {
            record(&state, &mut times, &mut snapshots, &mut centroids);
        }
    }
    Ok(Trajectory1D { times, snapshots, centroids, energies, dt, steps, final_state: state })
}
