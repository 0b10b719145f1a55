//! Hamiltonian ray systems of the semi-discrete wave equation.
//!
//! A ray carries a position and a frequency `xi in [0, 2 pi]`. In the
//! physical variable `x` the `+` branch reads
//!
//! ```text
//! x'  = -a_g(x) w'(xi)
//! xi' =  b_g(x) w(xi)
//! ```
//!
//! and the `-` branch flips both signs. In the reference variable `y` the
//! pair `(a_g, b_g)` is replaced by `(c_g, c_g')`. At the walls `x = +-1`
//! a ray is reflected by `xi -> 2 pi - xi`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::coefficients::{
    effective_speed_cg, effective_speed_cg_d1, effective_speed_cg_d2, grid_speed_b_d1, grid_speed_pair,
    CoefficientField,
};
use crate::mesh::MeshMap;
use crate::ode::rk4_step;
use crate::{Error, Result, C64};

const EVENT_TOL: f64 = 1e-10;
const NEWTON_TOL: f64 = 1e-12;
const DEDUP_TOL: f64 = 1e-6;
const ZERO_EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LawKind {
    Continuous,
    Discrete,
}

/// Dispersion relation `w(xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DispersionLaw {
    pub kind: LawKind,
}

impl DispersionLaw {
    /// `w(xi) = 2 sin(xi / 2)`.
    pub const fn discrete() -> Self {
        Self { kind: LawKind::Discrete }
    }

    /// `w(xi) = xi`.
    pub const fn continuous() -> Self {
        Self { kind: LawKind::Continuous }
    }

    pub fn omega(&self, xi: f64) -> f64 {
        match self.kind {
            LawKind::Continuous => xi,
            LawKind::Discrete => 2.0 * (0.5 * xi).sin(),
        }
    }

    /// `w'(xi)`. The discrete form is evaluated as `sin((pi - xi) / 2)` so it
    /// is exactly zero at `xi = pi`.
    pub fn domega(&self, xi: f64) -> f64 {
        match self.kind {
            LawKind::Continuous => 1.0,
            LawKind::Discrete => (0.5 * (PI - xi)).sin(),
        }
    }

    pub fn ddomega(&self, xi: f64) -> f64 {
        match self.kind {
            LawKind::Continuous => 0.0,
            LawKind::Discrete => -0.5 * (0.5 * xi).sin(),
        }
    }
}

/// `w'(xi)`.
pub fn group_velocity(law: &DispersionLaw, xi: f64) -> f64 {
    law.domega(xi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }
}

/// Which variable the position component refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayForm {
    /// Physical position `x = g(y)`.
    Physical,
    /// Reference position `y`.
    Reference,
}

#[derive(Debug, Clone)]
pub struct RaySystem1D {
    pub law: DispersionLaw,
    pub map: MeshMap,
    pub coeffs: CoefficientField,
    pub branch: Branch,
    pub form: RayForm,
}

impl RaySystem1D {
    /// Physical form with the given ingredients.
    pub fn new(law: DispersionLaw, map: MeshMap, coeffs: CoefficientField, branch: Branch) -> Self {
        Self { law, map, coeffs, branch, form: RayForm::Physical }
    }

    /// Discrete law, unit coefficients.
    pub fn constant(map: MeshMap, branch: Branch) -> Self {
        Self::new(DispersionLaw::discrete(), map, CoefficientField::constant(), branch)
    }

    pub fn with_form(mut self, form: RayForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    /// `(a, b)` at a position of this system's form.
    fn speeds(&self, p: f64) -> (f64, f64) {
        match self.form {
            RayForm::Physical => grid_speed_pair(&self.coeffs, &self.map, p),
            RayForm::Reference => {
                (effective_speed_cg(&self.coeffs, &self.map, p), effective_speed_cg_d1(&self.coeffs, &self.map, p))
            }
        }
    }

    fn speed_derivatives(&self, p: f64) -> (f64, f64) {
        match self.form {
            RayForm::Physical => (self.coeffs.speed_d1(p), grid_speed_b_d1(&self.coeffs, &self.map, p)),
            RayForm::Reference => {
                (effective_speed_cg_d1(&self.coeffs, &self.map, p), effective_speed_cg_d2(&self.coeffs, &self.map, p))
            }
        }
    }

    /// Reference coordinate of a position.
    pub fn reference_position(&self, p: f64) -> f64 {
        match self.form {
            RayForm::Physical => self.map.ginv(p),
            RayForm::Reference => p,
        }
    }

    /// `c_g` at a position of this system's form.
    pub fn cg(&self, p: f64) -> f64 {
        effective_speed_cg(&self.coeffs, &self.map, self.reference_position(p))
    }

    /// `(dp/dt, dxi/dt)`.
    pub fn rhs(&self, state: [f64; 2]) -> [f64; 2] {
        let [p, xi] = state;
        let s = self.branch.sign();
        let (a, b) = self.speeds(p);
        [-s * a * self.law.domega(xi), s * b * self.law.omega(xi)]
    }

    /// Analytic Jacobian of [`rhs`](Self::rhs).
    pub fn jacobian(&self, state: [f64; 2]) -> [[f64; 2]; 2] {
        let [p, xi] = state;
        let s = self.branch.sign();
        let (a, b) = self.speeds(p);
        let (da, db) = self.speed_derivatives(p);
        let (w, dw, ddw) = (self.law.omega(xi), self.law.domega(xi), self.law.ddomega(xi));
        [[-s * da * dw, -s * a * ddw], [s * db * w, s * b * dw]]
    }

    /// Central-difference Jacobian with step `1e-6`.
    pub fn numerical_jacobian(&self, state: [f64; 2]) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let mut jac = [[0.0; 2]; 2];
        for col in 0..2 {
            let (mut up, mut dn) = (state, state);
            up[col] += h;
            dn[col] -= h;
            let (fu, fd) = (self.rhs(up), self.rhs(dn));
            for row in 0..2 {
                jac[row][col] = (fu[row] - fd[row]) / (2.0 * h);
            }
        }
        jac
    }

    /// Branch energy `tau0 = +-c_g(y0) w(xi0)`.
    pub fn tau0(&self, p0: f64, xi0: f64) -> f64 {
        self.branch.sign() * self.cg(p0) * self.law.omega(xi0)
    }

    /// `-tau0^2 + c_g^2 w(xi)^2`.
    pub fn hamiltonian_value(&self, state: [f64; 2], tau0: f64) -> f64 {
        let c = self.cg(state[0]);
        let w = self.law.omega(state[1]);
        -tau0 * tau0 + c * c * w * w
    }
}

/// Second time derivative of the position along the flow, `J[0] . F`.
pub fn path_acceleration(system: &RaySystem1D, state: [f64; 2]) -> f64 {
    let f = system.rhs(state);
    let j = system.jacobian(state);
    j[0][0] * f[0] + j[0][1] * f[1]
}

/// Free-function form of [`RaySystem1D::rhs`].
pub fn ray_rhs(system: &RaySystem1D, state: [f64; 2]) -> [f64; 2] {
    system.rhs(state)
}

/// Free-function form of [`RaySystem1D::hamiltonian_value`].
pub fn hamiltonian_value(system: &RaySystem1D, state: [f64; 2], tau0: f64) -> f64 {
    system.hamiltonian_value(state, tau0)
}

/// Ray system on the uniform mesh with `rho = 1`, `sigma = 1 + A cos^2(k pi x)`:
///
/// ```text
/// x'  = -sqrt(sigma) cos(xi / 2)
/// xi' = -A k pi sin(2 k pi x) / sqrt(sigma) sin(xi / 2)
/// ```
pub fn variable_coefficient_rhs(amplitude: f64, wavenumber: f64, state: [f64; 2]) -> [f64; 2] {
    let [x, xi] = state;
    let k = wavenumber * PI;
    let sigma = 1.0 + amplitude * (k * x).cos().powi(2);
    let root = sigma.sqrt();
    [-root * (0.5 * (PI - xi)).sin(), -amplitude * k * (2.0 * k * x).sin() / root * (0.5 * xi).sin()]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    pub t: f64,
    pub x: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    pub t: f64,
    /// `-1` or `+1`.
    pub endpoint: f64,
    pub xi_before: f64,
    pub xi_after: f64,
}

/// Integrated ray.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPath {
    pub branch: Branch,
    pub tau0: f64,
    pub samples: Vec<RaySample>,
    pub reflections: Vec<Reflection>,
}

impl RayPath {
    pub fn positions(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x).collect()
    }

    pub fn max_abs_position(&self) -> f64 {
        self.samples.iter().map(|s| s.x.abs()).fold(0.0, f64::max)
    }

    pub fn last(&self) -> RaySample {
        *self.samples.last().expect("ray path has at least one sample")
    }

    /// Position at time `t`, linearly interpolated between samples.
    pub fn position_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        let k = s.partition_point(|p| p.t <= t);
        if k == 0 {
            return s[0].x;
        }
        if k >= s.len() {
            return s[s.len() - 1].x;
        }
        let (a, b) = (s[k - 1], s[k]);
        a.x + (b.x - a.x) * (t - a.t) / (b.t - a.t)
    }
}

/// How a trajectory treats the walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Reflect at `+-1` with `xi -> 2 pi - xi`.
    Reflect,
    /// Stop as soon as the position leaves `[lo, hi]`.
    Clip { lo: f64, hi: f64 },
}

/// Sample times `0, dt, 2 dt, ...` with the last one clamped to `horizon`.
pub(crate) fn time_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("ray step must be positive, got {dt}")));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
    }
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    Ok((0..=steps).map(|k| (k as f64 * dt).min(horizon)).collect())
}

/// Integrates an autonomous planar system with RK4 on a fixed time grid.
pub(crate) fn integrate_planar<F>(rhs: &F, z0: [f64; 2], times: &[f64], dt: f64, boundary: Boundary) -> Result<(Vec<RaySample>, Vec<Reflection>)>
where
    F: Fn([f64; 2]) -> [f64; 2],
{
    let f = |_t: f64, z: [f64; 2]| rhs(z);
    let mut z = z0;
    let mut samples = vec![RaySample { t: times[0], x: z[0], xi: z[1] }];
    let mut reflections = Vec::new();
    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        match boundary {
            Boundary::Clip { lo, hi } => {
                z = rk4_step(&f, t0, z, t1 - t0);
                if !(z[0] >= lo && z[0] <= hi) {
                    break;
                }
            }
            Boundary::Reflect => {
                let mut t = t0;
                let mut guard = 0;
                while t1 - t > 0.0 {
                    let h = t1 - t;
                    let trial = rk4_step(&f, t, z, h);
                    if trial[0].abs() <= 1.0 {
                        z = trial;
                        break;
                    }
                    if trial[0].abs() > 1.0 + 10.0 * dt || !trial[0].is_finite() {
                        return Err(Error::StepRejected { time: t, position: trial[0] });
                    }
                    guard += 1;
                    if guard > 8 {
                        return Err(Error::StepRejected { time: t, position: trial[0] });
                    }
                    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                    while (hi - lo) * h > EVENT_TOL {
                        let mid = 0.5 * (lo + hi);
                        if rk4_step(&f, t, z, mid * h)[0].abs() > 1.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let mut at = rk4_step(&f, t, z, lo * h);
                    let endpoint = trial[0].signum();
                    at[0] = endpoint;
                    let xi_before = at[1];
                    at[1] = 2.0 * PI - xi_before;
                    let te = t + lo * h;
                    reflections.push(Reflection { t: te, endpoint, xi_before, xi_after: at[1] });
                    z = at;
                    t = te;
                }
            }
        }
        samples.push(RaySample { t: t1, x: z[0], xi: z[1] });
    }
    Ok((samples, reflections))
}

/// RK4 ray with wall reflections, sampled every `dt` up to `horizon`.
pub fn integrate_ray(system: &RaySystem1D, x0: f64, xi0: f64, horizon: f64, dt: f64) -> Result<RayPath> {
    integrate_ray_with(system, x0, xi0, horizon, dt, Boundary::Reflect)
}

pub fn integrate_ray_with(system: &RaySystem1D, x0: f64, xi0: f64, horizon: f64, dt: f64, boundary: Boundary) -> Result<RayPath> {
    if boundary == Boundary::Reflect && !(-1.0..=1.0).contains(&x0) {
        return Err(Error::InvalidArgument(format!("ray must start in [-1, 1], got {x0}")));
    }
    let times = time_grid(horizon, dt)?;
    let rhs = |z: [f64; 2]| system.rhs(z);
    let (samples, reflections) = integrate_planar(&rhs, [x0, xi0], &times, dt, boundary)?;
    Ok(RayPath { branch: system.branch, tau0: system.tau0(x0, xi0), samples, reflections })
}

/// Largest `|H|` along a path.
pub fn max_hamiltonian_residual(system: &RaySystem1D, path: &RayPath) -> f64 {
    path.samples
        .iter()
        .map(|s| system.hamiltonian_value([s.x, s.xi], path.tau0).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Center,
    Saddle,
    Other,
}

impl EquilibriumKind {
    pub fn label(self) -> &'static str {
        match self {
            EquilibriumKind::Center => "center",
            EquilibriumKind::Saddle => "saddle",
            EquilibriumKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub x: f64,
    pub xi: f64,
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [C64; 2],
    pub kind: EquilibriumKind,
}

/// Eigenvalues of a real 2x2 matrix, larger real (then imaginary) part first.
pub fn eigenvalues_2x2(m: [[f64; 2]; 2]) -> [C64; 2] {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [C64::new(0.5 * tr + r, 0.0), C64::new(0.5 * tr - r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [C64::new(0.5 * tr, r), C64::new(0.5 * tr, -r)]
    }
}

fn kind_of(eig: [C64; 2]) -> EquilibriumKind {
    let scale = eig[0].norm().max(eig[1].norm());
    if eig.iter().any(|l| l.norm() <= ZERO_EIG_TOL) {
        return EquilibriumKind::Other;
    }
    if eig[0].im != 0.0 {
        if eig[0].re.abs() <= ZERO_EIG_TOL * scale.max(1.0) {
            return EquilibriumKind::Center;
        }
        return EquilibriumKind::Other;
    }
    if eig[0].re * eig[1].re < 0.0 {
        EquilibriumKind::Saddle
    } else {
        EquilibriumKind::Other
    }
}

/// Linearizes the system at a rest point.
pub fn classify_equilibrium(system: &RaySystem1D, location: [f64; 2]) -> Result<Equilibrium> {
    let f = system.rhs(location);
    let res = f[0].hypot(f[1]);
    if !(res <= 1e-8) {
        return Err(Error::InvalidArgument(format!(
            "({}, {}) is not a rest point: |F| = {res:e}",
            location[0], location[1]
        )));
    }
    let jacobian = system.jacobian(location);
    let eigenvalues = eigenvalues_2x2(jacobian);
    Ok(Equilibrium { x: location[0], xi: location[1], jacobian, eigenvalues, kind: kind_of(eigenvalues) })
}

/// Full Newton steps from a converged root, keeping the smallest residual.
/// Brings `|F|` down to rounding level so rest points stay put under RK4.
fn polish(system: &RaySystem1D, z: [f64; 2]) -> [f64; 2] {
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);
    let (mut best, mut best_res) = (z, norm(system.rhs(z)));
    let mut cur = z;
    for _ in 0..8 {
        let f = system.rhs(cur);
        let j = system.jacobian(cur);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        cur = [cur[0] - (j[1][1] * f[0] - j[0][1] * f[1]) / det, cur[1] - (j[0][0] * f[1] - j[1][0] * f[0]) / det];
        let res = norm(system.rhs(cur));
        if res < best_res {
            (best, best_res) = (cur, res);
        }
        if best_res == 0.0 {
            break;
        }
    }
    best
}

/// Outcome of an equilibrium search.
#[derive(Debug, Clone, Default)]
pub struct EquilibriumReport {
    /// Isolated rest points, sorted by `x`.
    pub equilibria: Vec<Equilibrium>,
    /// Rest points with a singular Jacobian, such as the line `xi = pi` of
    /// the identity map.
    pub degenerate: Vec<[f64; 2]>,
    /// Candidates dropped because Newton failed.
    pub warnings: Vec<String>,
}

fn newton(system: &RaySystem1D, mut z: [f64; 2]) -> Option<[f64; 2]> {
    let norm = |f: [f64; 2]| f[0].hypot(f[1]);
    let mut f = system.rhs(z);
    let mut lambda = 1e-6;
    for _ in 0..200 {
        if norm(f) <= NEWTON_TOL {
            return Some(z);
        }
        let j = system.jacobian(z);
        // (J^T J + lambda I) d = -J^T f
        let a = j[0][0] * j[0][0] + j[1][0] * j[1][0] + lambda;
        let b = j[0][0] * j[0][1] + j[1][0] * j[1][1];
        let d = j[0][1] * j[0][1] + j[1][1] * j[1][1] + lambda;
        let g0 = j[0][0] * f[0] + j[1][0] * f[1];
        let g1 = j[0][1] * f[0] + j[1][1] * f[1];
        let det = a * d - b * b;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let step = [-(d * g0 - b * g1) / det, -(a * g1 - b * g0) / det];
        let cand = [z[0] + step[0], z[1] + step[1]];
        let fc = system.rhs(cand);
        if norm(fc) < norm(f) {
            z = cand;
            f = fc;
            lambda = (lambda * 0.1).max(1e-15);
            if step[0].hypot(step[1]) <= 1e-15 * (1.0 + z[0].hypot(z[1])) && norm(f) <= 1e-10 {
                return Some(z);
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                return if norm(f) <= 1e-10 { Some(z) } else { None };
            }
        }
    }
    if norm(f) <= 1e-10 {
        Some(z)
    } else {
        None
    }
}

/// Scans `[-1, 1] x [0, 2 pi]` on an `nx x nxi` lattice for local minima of
/// `|F|` and refines each with damped Newton.
pub fn find_equilibria(system: &RaySystem1D, nx: usize, nxi: usize) -> Result<EquilibriumReport> {
    if nx < 3 || nxi < 3 {
        return Err(Error::InvalidArgument("scan needs at least 3 points per axis".into()));
    }
    let xs: Vec<f64> = (0..nx).map(|i| -1.0 + 2.0 * i as f64 / (nx - 1) as f64).collect();
    let xis: Vec<f64> = (0..nxi).map(|k| 2.0 * PI * k as f64 / (nxi - 1) as f64).collect();
    let grid: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| xis.iter().map(|&xi| {
            let f = system.rhs([x, xi]);
            f[0].hypot(f[1])
        }).collect())
        .collect();
    let mut candidates = Vec::new();
    for i in 0..nx {
        for k in 0..nxi {
            let v = grid[i][k];
            let mut is_min = true;
            'nb: for di in -1i64..=1 {
                for dk in -1i64..=1 {
                    let (ii, kk) = (i as i64 + di, k as i64 + dk);
                    if (di, dk) == (0, 0) || ii < 0 || kk < 0 || ii >= nx as i64 || kk >= nxi as i64 {
                        continue;
                    }
                    if grid[ii as usize][kk as usize] < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                candidates.push([xs[i], xis[k]]);
            }
        }
    }
    let mut report = EquilibriumReport::default();
    let close = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs() <= DEDUP_TOL && (a[1] - b[1]).abs() <= DEDUP_TOL;
    for c in candidates {
        let Some(root) = newton(system, c).map(|z| polish(system, z)) else {
            report.warnings.push(format!("no convergence from ({:.6}, {:.6})", c[0], c[1]));
            continue;
        };
        if !(root[0] >= -1.0 - 1e-12 && root[0] <= 1.0 + 1e-12 && root[1] >= -1e-12 && root[1] <= 2.0 * PI + 1e-12) {
            report.warnings.push(format!("root ({:.6}, {:.6}) left the scan window", root[0], root[1]));
            continue;
        }
        let eq = classify_equilibrium(system, root)?;
        let j = eq.jacobian;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let scale = j.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        if det.abs() <= 1e-10 * scale * scale {
            if !report.degenerate.iter().any(|&d| close(d, root)) {
                report.degenerate.push(root);
            }
        } else if !report.equilibria.iter().any(|e| close([e.x, e.xi], root)) {
            report.equilibria.push(eq);
        }
    }
    report.equilibria.sort_by(|a, b| a.x.total_cmp(&b.x));
    report.degenerate.sort_by(|a, b| a[0].total_cmp(&b[0]));
    Ok(report)
}

/// Portrait settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortraitOptions {
    pub horizon: f64,
    pub dt: f64,
    /// Orbits stop once `x` leaves this window.
    pub window: (f64, f64),
    pub scan: (usize, usize),
}

impl Default for PortraitOptions {
    fn default() -> Self {
        Self { horizon: 10.0, dt: 1e-3, window: (-1.0, 1.0), scan: (201, 201) }
    }
}

#[derive(Debug, Clone)]
pub struct PhasePortrait {
    pub orbits: Vec<RayPath>,
    pub equilibria: EquilibriumReport,
}

/// Orbits through each seed (no reflection) plus the equilibria.
pub fn phase_portrait(system: &RaySystem1D, seeds: &[(f64, f64)], opts: &PortraitOptions) -> Result<PhasePortrait> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("phase portrait needs at least one seed".into()));
    }
    let (lo, hi) = opts.window;
    let orbits = seeds
        .par_iter()
        .map(|&(x0, xi0)| integrate_ray_with(system, x0, xi0, opts.horizon, opts.dt, Boundary::Clip { lo, hi }))
        .collect::<Result<Vec<_>>>()?;
    let equilibria = find_equilibria(system, opts.scan.0, opts.scan.1)?;
    Ok(PhasePortrait { orbits, equilibria })
}

/// First return of a closed orbit to its seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstReturn {
    pub time: f64,
    pub x: f64,
    pub xi: f64,
    pub distance: f64,
}

/// Detects the first crossing of the section through the seed normal to the
/// flow, `(z - z0) . F(z0) = 0`, from below.
pub fn first_return(path: &RayPath, direction: [f64; 2]) -> Option<FirstReturn> {
    let s = &path.samples;
    let z0 = [s.first()?.x, s[0].xi];
    let phi = |p: &RaySample| (p.x - z0[0]) * direction[0] + (p.xi - z0[1]) * direction[1];
    if direction[0] == 0.0 && direction[1] == 0.0 {
        return None;
    }
    let mut went_below = false;
    for w in s.windows(2) {
        let (pa, pb) = (phi(&w[0]), phi(&w[1]));
        if pb < 0.0 {
            went_below = true;
        }
        if went_below && pa < 0.0 && pb >= 0.0 {
            let f = pa / (pa - pb);
            let x = w[0].x + f * (w[1].x - w[0].x);
            let xi = w[0].xi + f * (w[1].xi - w[0].xi);
            let time = w[0].t + f * (w[1].t - w[0].t);
            return Some(FirstReturn { time, x, xi, distance: (x - z0[0]).hypot(xi - z0[1]) });
        }
    }
    None
}

/// [`first_return`] for a 1D ray, using the flow direction at the seed.
pub fn first_return_1d(system: &RaySystem1D, path: &RayPath) -> Option<FirstReturn> {
    let s0 = path.samples.first()?;
    first_return(path, system.rhs([s0.x, s0.xi]))
}
