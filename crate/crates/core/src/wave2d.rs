//! Wave equation on the square `[-1, 1]^2` with a tensor-product mapped grid.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{s, Array2, Zip};
use rayon::prelude::*;

use crate::coefficients::CoefficientField;
use crate::eigen::symmetric_tridiagonal;
use crate::mesh::{MeshMap, TransformedGrid1D};
use crate::quadrature::composite_gauss;
use crate::rays::{integrate_planar, time_grid, Boundary, Branch, RayPath};
use crate::solver1d::{default_gamma, Scheme1D, DEFAULT_SNAPSHOT_ROWS, INSTABILITY_FACTOR};
use crate::{Error, Result, C64};

/// Tensor grid: `axis_x` carries the first index, `axis_y` the second.
#[derive(Debug, Clone)]
pub struct Grid2D {
    pub axis_x: TransformedGrid1D,
    pub axis_y: TransformedGrid1D,
}

impl Grid2D {
    pub fn new(axis_x: TransformedGrid1D, axis_y: TransformedGrid1D) -> Self {
        Self { axis_x, axis_y }
    }

    /// Interior counts `(M, N)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.axis_x.n_interior(), self.axis_y.n_interior())
    }

    /// Field shape `(M + 2, N + 2)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.axis_x.len(), self.axis_y.len())
    }

    pub fn zeros(&self) -> Array2<C64> {
        Array2::zeros(self.shape())
    }

    /// Dual-cell area `h_j h_k`.
    pub fn area(&self) -> Array2<f64> {
        let (dx, dy) = (self.axis_x.dual(), self.axis_y.dual());
        Array2::from_shape_fn(self.shape(), |(j, k)| dx[j] * dy[k])
    }
}

type Field2DFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Scalar coefficient on the square.
#[derive(Clone)]
pub enum Field2D {
    Constant(f64),
    Function(Field2DFn),
}

impl fmt::Debug for Field2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field2D::Constant(v) => write!(f, "Constant({v})"),
            Field2D::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Field2D {
    pub fn value(&self, x: f64, y: f64) -> f64 {
        match self {
            Field2D::Constant(v) => *v,
            Field2D::Function(f) => f(x, y),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Field2D::Constant(_))
    }
}

#[derive(Debug, Clone)]
pub struct Coefficients2D {
    pub rho: Field2D,
    pub sigma: Field2D,
}

impl Default for Coefficients2D {
    fn default() -> Self {
        Self { rho: Field2D::Constant(1.0), sigma: Field2D::Constant(1.0) }
    }
}

impl Coefficients2D {
    pub fn is_unit(&self) -> bool {
        matches!((&self.rho, &self.sigma), (Field2D::Constant(r), Field2D::Constant(s)) if *r == 1.0 && *s == 1.0)
    }
}

/// Five-point `div(sigma grad)` divided by `rho`.
///
/// In flux form the operator reads `(L u)_{jk} = [h^y_k D_x + h^x_j D_y] / m_{jk}`
/// with `m_{jk} = h^x_j h^y_k rho_{jk}`, which is symmetric in the
/// `m`-weighted inner product.
#[derive(Debug, Clone)]
pub struct Scheme2D {
    grid: Grid2D,
    coeffs: Coefficients2D,
    /// `h^y_k sigma(g_{j+1/2}, z_k) / h^x_{j+1/2}`, shape `(M + 1, N + 2)`.
    stiff_x: Array2<f64>,
    /// `h^x_j sigma(g_j, z_{k+1/2}) / h^y_{k+1/2}`, shape `(M + 2, N + 1)`.
    stiff_y: Array2<f64>,
    mass: Array2<f64>,
    inv_mass: Array2<f64>,
}

impl Scheme2D {
    pub fn new(grid: Grid2D, coeffs: Coefficients2D) -> Result<Self> {
        let (ax, ay) = (&grid.axis_x, &grid.axis_y);
        let (nx, ny) = grid.shape();
        let stiff_x = Array2::from_shape_fn((nx - 1, ny), |(j, k)| {
            ay.dual()[k] * coeffs.sigma.value(ax.midpoints()[j], ay.nodes()[k]) / ax.cells()[j]
        });
        let stiff_y = Array2::from_shape_fn((nx, ny - 1), |(j, k)| {
            ax.dual()[j] * coeffs.sigma.value(ax.nodes()[j], ay.midpoints()[k]) / ay.cells()[k]
        });
        let mass = Array2::from_shape_fn((nx, ny), |(j, k)| {
            ax.dual()[j] * ay.dual()[k] * coeffs.rho.value(ax.nodes()[j], ay.nodes()[k])
        });
        if mass.iter().chain(stiff_x.iter()).chain(stiff_y.iter()).any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidOperator("coefficients must be positive on the grid".into()));
        }
        let inv_mass = mass.mapv(|m| 1.0 / m);
        Ok(Self { grid, coeffs, stiff_x, stiff_y, mass, inv_mass })
    }

    /// Unit coefficients.
    pub fn constant(grid: Grid2D) -> Self {
        Self::new(grid, Coefficients2D::default()).expect("unit coefficients are positive")
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn coeffs(&self) -> &Coefficients2D {
        &self.coeffs
    }

    pub fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    fn check_shape(&self, u: &Array2<C64>) -> Result<()> {
        if u.dim() != self.grid.shape() {
            return Err(Error::InvalidArgument(format!("field shape {:?}, grid shape {:?}", u.dim(), self.grid.shape())));
        }
        Ok(())
    }

    pub fn apply(&self, u: &Array2<C64>) -> Result<Array2<C64>> {
        self.check_shape(u)?;
        let mut v = self.grid.zeros();
        self.apply_into(u, &mut v);
        Ok(v)
    }

    fn apply_into(&self, u: &Array2<C64>, v: &mut Array2<C64>) {
        let (nx, ny) = u.dim();
        let u = u.as_standard_layout();
        let u = u.as_slice().expect("standard layout");
        let (sx, sy, m) = (slice_of(&self.stiff_x), slice_of(&self.stiff_y), slice_of(&self.inv_mass));
        let zero = C64::new(0.0, 0.0);
        let out = v.as_slice_mut().expect("scratch arrays are contiguous");
        out[..ny].fill(zero);
        out[(nx - 1) * ny..].fill(zero);
        out[ny..(nx - 1) * ny].par_chunks_mut(ny).enumerate().for_each(|(r, row)| {
            let j = r + 1;
            let (up, mid, down) = (&u[(j - 1) * ny..j * ny], &u[j * ny..(j + 1) * ny], &u[(j + 1) * ny..(j + 2) * ny]);
            let (sx_lo, sx_hi) = (&sx[(j - 1) * ny..j * ny], &sx[j * ny..(j + 1) * ny]);
            let sy_row = &sy[j * (ny - 1)..(j + 1) * (ny - 1)];
            let m_row = &m[j * ny..(j + 1) * ny];
            row[0] = zero;
            row[ny - 1] = zero;
            for k in 1..ny - 1 {
                let c = mid[k];
                let dx = (down[k] - c) * sx_hi[k] - (c - up[k]) * sx_lo[k];
                let dy = (mid[k + 1] - c) * sy_row[k] - (c - mid[k - 1]) * sy_row[k - 1];
                row[k] = (dx + dy) * m_row[k];
            }
        });
    }

    /// `sum m |u|^2`.
    pub fn weighted_norm_sqr(&self, u: &Array2<C64>) -> f64 {
        Zip::from(&self.mass).and(u).fold(0.0, |acc, m, z| acc + m * z.norm_sqr())
    }

    /// Sum of `stiffness * Re(du conj(dv))` over all x and y edges.
    fn edge_form(&self, u: &Array2<C64>, v: &Array2<C64>) -> f64 {
        let (nx, ny) = u.dim();
        let (u, v) = (u.as_standard_layout(), v.as_standard_layout());
        let (u, v) = (u.as_slice().expect("standard layout"), v.as_slice().expect("standard layout"));
        let (sx, sy) = (slice_of(&self.stiff_x), slice_of(&self.stiff_y));
        let mut acc = 0.0;
        for i in 0..(nx - 1) * ny {
            acc += sx[i] * ((u[i + ny] - u[i]) * (v[i + ny] - v[i]).conj()).re;
        }
        for j in 0..nx {
            let (ur, vr) = (&u[j * ny..(j + 1) * ny], &v[j * ny..(j + 1) * ny]);
            let sr = &sy[j * (ny - 1)..(j + 1) * (ny - 1)];
            for k in 0..ny - 1 {
                acc += sr[k] * ((ur[k + 1] - ur[k]) * (vr[k + 1] - vr[k]).conj()).re;
            }
        }
        acc
    }

    /// `1/2 sum m |v|^2 + 1/2 sum sigma |grad u|^2` for position `u` and
    /// velocity `v`.
    pub fn semi_discrete_energy(&self, u: &Array2<C64>, v: &Array2<C64>) -> f64 {
        0.5 * (self.weighted_norm_sqr(v) + self.edge_form(u, u))
    }
}

fn slice_of(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("coefficient arrays are built contiguous")
}

/// Free-function form of [`Scheme2D::apply`] on the state's current level.
pub fn apply_operator_2d(state: &WaveState2D) -> Result<Array2<C64>> {
    state.scheme.apply(&state.u_curr)
}

/// Two leapfrog levels on a [`Grid2D`].
#[derive(Debug, Clone)]
pub struct WaveState2D {
    scheme: Scheme2D,
    u_curr: Array2<C64>,
    u_prev: Array2<C64>,
    time: f64,
    dt: f64,
    step: usize,
    initial_norm: f64,
    scratch: Array2<C64>,
}

fn zero_frame(u: &mut Array2<C64>) {
    let (nx, ny) = u.dim();
    let z = C64::new(0.0, 0.0);
    u.row_mut(0).fill(z);
    u.row_mut(nx - 1).fill(z);
    u.column_mut(0).fill(z);
    u.column_mut(ny - 1).fill(z);
}

impl WaveState2D {
    /// Taylor start `u^1 = u^0 + dt u1 + dt^2/2 L u^0`.
    pub fn start(scheme: Scheme2D, u0: &Array2<C64>, u1: &Array2<C64>, dt: f64) -> Result<Self> {
        scheme.check_shape(u0)?;
        scheme.check_shape(u1)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let mut prev = u0.clone();
        zero_frame(&mut prev);
        let lu = scheme.apply(&prev)?;
        let mut curr = &prev + &(u1 * C64::new(dt, 0.0)) + &(&lu * C64::new(0.5 * dt * dt, 0.0));
        zero_frame(&mut curr);
        let initial_norm = scheme.weighted_norm_sqr(&prev).sqrt();
        Ok(Self { scheme, u_curr: curr, u_prev: prev, time: dt, dt, step: 1, initial_norm, scratch: lu })
    }

    pub fn scheme(&self) -> &Scheme2D {
        &self.scheme
    }

    pub fn current(&self) -> &Array2<C64> {
        &self.u_curr
    }

    pub fn previous(&self) -> &Array2<C64> {
        &self.u_prev
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn modulus(&self) -> Array2<f64> {
        self.u_curr.mapv(|z| z.norm_sqr().sqrt())
    }

    pub fn advance(&mut self) -> Result<()> {
        self.scheme.apply_into(&self.u_curr, &mut self.scratch);
        let dt2 = self.dt * self.dt;
        let mut norm_sqr = 0.0;
        Zip::from(&mut self.u_curr).and(&mut self.u_prev).and(&self.scratch).and(&self.scheme.mass).for_each(|c, p, l, m| {
            let next = *c * 2.0 - *p + *l * dt2;
            *p = *c;
            *c = next;
            norm_sqr += m * next.norm_sqr();
        });
        self.step += 1;
        self.time = self.step as f64 * self.dt;
        let norm = norm_sqr.sqrt();
        if !norm.is_finite() || (self.initial_norm > 0.0 && norm > INSTABILITY_FACTOR * self.initial_norm) {
            return Err(Error::Instability { step: self.step, time: self.time, norm });
        }
        Ok(())
    }
}

/// Leapfrog energy between the two stored levels; conserved exactly by the
/// recurrence.
pub fn energy_2d(state: &WaveState2D) -> f64 {
    let inv2 = 1.0 / (state.dt * state.dt);
    let kinetic = Zip::from(&state.scheme.mass).and(&state.u_curr).and(&state.u_prev).fold(0.0, |acc, m, c, p| acc + m * (c - p).norm_sqr());
    0.5 * (kinetic * inv2 + state.scheme.edge_form(&state.u_curr, &state.u_prev))
}

#[derive(Debug, Clone)]
pub struct Trajectory2D {
    pub times: Vec<f64>,
    pub snapshots: Vec<Array2<f64>>,
    pub energies: Vec<(f64, f64)>,
    pub dt: f64,
    pub steps: usize,
    pub final_state: WaveState2D,
}

impl Trajectory2D {
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = match self.energies.first() {
            Some(&(_, e)) if e > 0.0 => e,
            _ => return 0.0,
        };
        self.energies.iter().map(|&(_, e)| (e - e0).abs() / e0).fold(0.0, f64::max)
    }
}

/// Leapfrog with `dt <= cfl * min(h_x, h_y)` landing exactly on `horizon`.
///
/// Energy is recorded at `t = dt` and with every snapshot after that.
pub fn leapfrog_integrate_2d(
    scheme: &Scheme2D,
    u0: &Array2<C64>,
    u1: &Array2<C64>,
    horizon: f64,
    cfl: f64,
    stride: Option<usize>,
) -> Result<Trajectory2D> {
    let h = scheme.grid.axis_x.h().min(scheme.grid.axis_y.h());
    let (steps, dt) = crate::solver1d::LeapfrogOptions::new(horizon, cfl).steps(h)?;
    let stride = stride.unwrap_or((steps / DEFAULT_SNAPSHOT_ROWS).max(1)).max(1);
    let mut state = WaveState2D::start(scheme.clone(), u0, u1, dt)?;
    let mut times = vec![0.0];
    let mut snapshots = vec![state.u_prev.mapv(|z| z.norm_sqr().sqrt())];
    let mut energies = vec![(state.time, energy_2d(&state))];
    if stride == 1 || steps == 1 {
        times.push(state.time);
        snapshots.push(state.modulus());
    }
    for n in 2..=steps {
        state.advance()?;
        if n % stride == 0 || n == steps {
            energies.push((state.time, energy_2d(&state)));
            times.push(state.time);
            snapshots.push(state.modulus());
        }
    }
    Ok(Trajectory2D { times, snapshots, energies, dt, steps, final_state: state })
}

/// Eigenpairs of `-L` on one axis.
#[derive(Debug, Clone)]
pub struct AxisSpectrum {
    /// Ascending, strictly positive.
    pub values: Vec<f64>,
    /// Column `m` is the `m`-th eigenvector on interior nodes, orthonormal
    /// in the `weights` inner product.
    pub vectors: Array2<f64>,
    /// Interior masses `h_j rho_j`.
    pub weights: Vec<f64>,
}

/// Symmetrizes the 1D operator by the square root of its masses and solves
/// the resulting tridiagonal eigenproblem.
pub fn eigendecompose_axis(axis: &TransformedGrid1D, coeffs: &CoefficientField) -> Result<AxisSpectrum> {
    let scheme = Scheme1D::new(axis.clone(), coeffs.clone());
    let n = axis.n_interior();
    let w: Vec<f64> = scheme.mass()[1..=n].to_vec();
    let st = scheme.stiffness();
    let diag: Vec<f64> = (0..n).map(|i| (st[i] + st[i + 1]) / w[i]).collect();
    let off: Vec<f64> = (0..n.saturating_sub(1)).map(|i| -st[i + 1] / (w[i] * w[i + 1]).sqrt()).collect();
    let (values, mut vectors) = symmetric_tridiagonal(&diag, &off)?;
    if values.first().is_some_and(|&v| !(v > 0.0)) {
        return Err(Error::InvalidOperator(format!("axis operator is not positive definite: {}", values[0])));
    }
    for (i, mut row) in vectors.rows_mut().into_iter().enumerate() {
        row /= w[i].sqrt();
    }
    Ok(AxisSpectrum { values, vectors, weights: w })
}

/// Separated-variable eigenbasis for unit coefficients.
#[derive(Debug, Clone)]
pub struct SpectralBasis2D {
    pub x: AxisSpectrum,
    pub y: AxisSpectrum,
}

impl SpectralBasis2D {
    pub fn new(grid: &Grid2D) -> Result<Self> {
        let one = CoefficientField::constant();
        let (x, y) = rayon::join(|| eigendecompose_axis(&grid.axis_x, &one), || eigendecompose_axis(&grid.axis_y, &one));
        Ok(Self { x: x?, y: y? })
    }

    /// `lambda_{jk} = mu_j + nu_k`.
    pub fn eigenvalues(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.x.values.len(), self.y.values.len()), |(j, k)| self.x.values[j] + self.y.values[k])
    }

    /// `Psi_j (x) Upsilon_k` on the full grid, boundary zero.
    pub fn mode(&self, j: usize, k: usize) -> Array2<C64> {
        let (m, n) = (self.x.values.len(), self.y.values.len());
        let mut out = Array2::zeros((m + 2, n + 2));
        for a in 0..m {
            for b in 0..n {
                out[[a + 1, b + 1]] = C64::new(self.x.vectors[[a, j]] * self.y.vectors[[b, k]], 0.0);
            }
        }
        out
    }

    /// `beta = Psi^T W_x U W_y Upsilon` over interior nodes.
    pub fn coefficients(&self, u: &Array2<C64>) -> Result<Array2<C64>> {
        let (m, n) = (self.x.values.len(), self.y.values.len());
        if u.dim() != (m + 2, n + 2) {
            return Err(Error::InvalidArgument(format!("field shape {:?}, basis expects {:?}", u.dim(), (m + 2, n + 2))));
        }
        let inner = u.slice(s![1..m + 1, 1..n + 1]);
        let scaled = |part: fn(&C64) -> f64| {
            Array2::from_shape_fn((m, n), |(a, b)| part(&inner[[a, b]]) * self.x.weights[a] * self.y.weights[b])
        };
        let re = self.x.vectors.t().dot(&scaled(|z| z.re)).dot(&self.y.vectors);
        let im = self.x.vectors.t().dot(&scaled(|z| z.im)).dot(&self.y.vectors);
        Ok(Zip::from(&re).and(&im).map_collect(|&r, &i| C64::new(r, i)))
    }

    /// Field with the given modal coefficients, boundary zero.
    pub fn synthesize(&self, beta: &Array2<C64>) -> Array2<C64> {
        let (m, n) = beta.dim();
        let re = self.x.vectors.dot(&beta.mapv(|z| z.re)).dot(&self.y.vectors.t());
        let im = self.x.vectors.dot(&beta.mapv(|z| z.im)).dot(&self.y.vectors.t());
        let mut out = Array2::zeros((m + 2, n + 2));
        Zip::from(out.slice_mut(s![1..m + 1, 1..n + 1])).and(&re).and(&im).for_each(|o, &r, &i| *o = C64::new(r, i));
        out
    }
}

/// `u(t) = sum beta_{jk} Phi_{jk} exp(i t sqrt(lambda_{jk}))`.
pub fn spectral_solution(basis: &SpectralBasis2D, u0: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let beta = basis.coefficients(u0)?;
    Ok(spectral_from_coefficients(basis, &beta, t))
}

pub fn spectral_from_coefficients(basis: &SpectralBasis2D, beta: &Array2<C64>, t: f64) -> Array2<C64> {
    let lam = basis.eigenvalues();
    let phased = Zip::from(beta).and(&lam).map_collect(|&b, &l| b * C64::from_polar(1.0, t * l.sqrt()));
    basis.synthesize(&phased)
}

/// Velocity field of the single-branch evolution at `t = 0`, that is the
/// mode-wise `i sqrt(lambda) beta`.
pub fn spectral_velocity(basis: &SpectralBasis2D, u0: &Array2<C64>) -> Result<Array2<C64>> {
    let beta = basis.coefficients(u0)?;
    let lam = basis.eigenvalues();
    let v = Zip::from(&beta).and(&lam).map_collect(|&b, &l| b * C64::new(0.0, l.sqrt()));
    Ok(basis.synthesize(&v))
}

/// Solution with independent position and velocity data:
/// `sum [beta cos(t sqrt(lambda)) + delta sin(t sqrt(lambda)) / sqrt(lambda)] Phi`.
pub fn spectral_solution_two_branch(basis: &SpectralBasis2D, u0: &Array2<C64>, u1: &Array2<C64>, t: f64) -> Result<Array2<C64>> {
    let beta = basis.coefficients(u0)?;
    let delta = basis.coefficients(u1)?;
    let lam = basis.eigenvalues();
    let c = Zip::from(&beta).and(&delta).and(&lam).map_collect(|&b, &d, &l| {
        let w = l.sqrt();
        b * (t * w).cos() + d * ((t * w).sin() / w)
    });
    Ok(basis.synthesize(&c))
}

/// `sum |beta|^2 lambda`, the energy of the single-branch evolution.
pub fn spectral_energy(basis: &SpectralBasis2D, beta: &Array2<C64>) -> f64 {
    let lam = basis.eigenvalues();
    Zip::from(beta).and(&lam).fold(0.0, |acc, b, l| acc + b.norm_sqr() * l)
}

/// Packet `exp(-gamma |X - X0|^2) exp(i (X xi0 / h_x + Y eta0 / h_y))` in
/// reference coordinates `X = g^{-1}(x)`, `Y = g^{-1}(y)`; boundary frame zero.
pub fn gaussian_packet_2d(grid: &Grid2D, x0: f64, y0: f64, xi0: f64, eta0: f64, gamma: Option<f64>) -> Result<Array2<C64>> {
    for (name, v) in [("x0", x0), ("y0", y0)] {
        if !(-1.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} must lie in [-1, 1], got {v}")));
        }
    }
    let (ax, ay) = (&grid.axis_x, &grid.axis_y);
    let gamma = gamma.unwrap_or_else(|| default_gamma(ax.h().min(ay.h())));
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let (cx, cy) = (ax.map().ginv(x0), ay.map().ginv(y0));
    let (kx, ky) = (xi0 / ax.h(), eta0 / ay.h());
    let mut u = Array2::from_shape_fn(grid.shape(), |(j, k)| {
        let (x, y) = (ax.reference_nodes()[j], ay.reference_nodes()[k]);
        let r2 = (x - cx).powi(2) + (y - cy).powi(2);
        (-gamma * r2).exp() * C64::from_polar(1.0, kx * x + ky * y)
    });
    zero_frame(&mut u);
    Ok(u)
}

/// Area-weighted centroid of `|u|^2`.
pub fn centroid_2d(modulus: &Array2<f64>, grid: &Grid2D) -> Result<(f64, f64)> {
    let (gx, gy) = (grid.axis_x.nodes(), grid.axis_y.nodes());
    let (dx, dy) = (grid.axis_x.dual(), grid.axis_y.dual());
    let (mut sx, mut sy, mut den) = (0.0, 0.0, 0.0);
    for ((j, k), m) in modulus.indexed_iter() {
        let e = dx[j] * dy[k] * m * m;
        sx += e * gx[j];
        sy += e * gy[k];
        den += e;
    }
    if !(den > 0.0) {
        return Err(Error::UndefinedCentroid);
    }
    Ok((sx / den, sy / den))
}

/// `lambda = 2 sin(xi / 2) / g'(g^{-1}(x))` for one axis.
pub fn axis_symbol(map: &MeshMap, x: f64, xi: f64) -> f64 {
    2.0 * (0.5 * xi).sin() / map.dg(map.ginv(x))
}

/// `(lambda_1, lambda_2, Lambda)` at physical positions, unit coefficients.
pub fn lambda_symbols(map_x: &MeshMap, map_y: &MeshMap, state: [f64; 4]) -> (f64, f64, f64) {
    let l1 = axis_symbol(map_x, state[0], state[2]);
    let l2 = axis_symbol(map_y, state[1], state[3]);
    (l1, l2, l1 * l1 + l2 * l2)
}

/// One axis of the decoupled 2D ray system:
///
/// ```text
/// x'  = -s (lambda / r0) cos(xi / 2)
/// xi' =  s (lambda / r0) 2 b_g(x) sin(xi / 2)
/// ```
///
/// with `lambda` the axis symbol of the current state and `r0` frozen.
pub fn axis_ray_rhs(map: &MeshMap, r0: f64, branch: Branch, state: [f64; 2]) -> [f64; 2] {
    let [x, xi] = state;
    let s = branch.sign();
    let y = map.ginv(x);
    let (g1, g2) = (map.dg(y), map.ddg(y));
    let lam = 2.0 * (0.5 * xi).sin() / g1;
    // unit-speed form of `grid_speed_pair`
    let b = -g2 / (g1 * g1);
    let k = s * lam / r0;
    [-k * (0.5 * (PI - xi)).sin(), k * 2.0 * b * (0.5 * xi).sin()]
}

/// Two axis paths on a shared time grid plus the conserved symbols.
#[derive(Debug, Clone)]
pub struct RayPath2D {
    pub x: RayPath,
    pub y: RayPath,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

impl RayPath2D {
    /// Largest drift of `(r0, r1, r2)` along the path.
    pub fn invariant_drift(&self, map_x: &MeshMap, map_y: &MeshMap) -> (f64, f64, f64) {
        let mut d = (0.0_f64, 0.0_f64, 0.0_f64);
        for (a, b) in self.x.samples.iter().zip(&self.y.samples) {
            let (l1, l2, big) = lambda_symbols(map_x, map_y, [a.x, b.x, a.xi, b.xi]);
            d.0 = d.0.max((big.sqrt() - self.r0).abs());
            d.1 = d.1.max((l1 - self.r1).abs());
            d.2 = d.2.max((l2 - self.r2).abs());
        }
        d
    }
}

/// Integrates both axes with wall reflection.
#[allow(clippy::too_many_arguments)]
pub fn integrate_ray_2d(
    map_x: &MeshMap,
    map_y: &MeshMap,
    x0: f64,
    y0: f64,
    xi0: f64,
    eta0: f64,
    horizon: f64,
    dt: f64,
    branch: Branch,
) -> Result<RayPath2D> {
    for (name, v) in [("x0", x0), ("y0", y0)] {
        if !(-1.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} must lie in [-1, 1], got {v}")));
        }
    }
    let (r1, r2, big) = lambda_symbols(map_x, map_y, [x0, y0, xi0, eta0]);
    let r0 = big.sqrt();
    if !(r0 > 1e-14) {
        return Err(Error::DegenerateRay(format!("both frequencies vanish: xi0 = {xi0}, eta0 = {eta0}")));
    }
    let times = time_grid(horizon, dt)?;
    let fx = |z: [f64; 2]| axis_ray_rhs(map_x, r0, branch, z);
    let fy = |z: [f64; 2]| axis_ray_rhs(map_y, r0, branch, z);
    let (px, py) = rayon::join(
        || integrate_planar(&fx, [x0, xi0], &times, dt, Boundary::Reflect),
        || integrate_planar(&fy, [y0, eta0], &times, dt, Boundary::Reflect),
    );
    let ((sx, rx), (sy, ry)) = (px?, py?);
    let tau = branch.sign() * r0;
    Ok(RayPath2D {
        x: RayPath { branch, tau0: tau, samples: sx, reflections: rx },
        y: RayPath { branch, tau0: tau, samples: sy, reflections: ry },
        r0,
        r1,
        r2,
    })
}

/// Composite Gauss panels and order for the period integral.
const PERIOD_PANELS: usize = 64;
const PERIOD_ORDER: usize = 10;

/// Period of a trapped axis orbit:
/// `T = (2 r0 / r_axis) int_{-y*}^{y*} g'(z) / sqrt(1 - (g'(z) / g'(y*))^2) dz`
/// where `g'(y*) = g'(y0) / sin(xi0 / 2)` and `y0 = g^{-1}(x0)`.
pub fn trap_period(map: &MeshMap, r0: f64, r_axis: f64, x0: f64, xi0: f64) -> Result<f64> {
    if !(r_axis > 0.0) || !(r0 > 0.0) {
        return Err(Error::NotTrapped(format!("axis symbol must be positive, got r0 = {r0}, r = {r_axis}")));
    }
    let y0 = map.ginv(x0).abs();
    let s = (0.5 * xi0).sin();
    if !(s > 0.0) {
        return Err(Error::NotTrapped(format!("xi0 = {xi0} carries no energy on this axis")));
    }
    let target = map.dg(y0) / s;
    let slope = |y: f64| map.dg(y).abs() - target;
    if slope(1.0) < 0.0 {
        return Err(Error::NotTrapped(format!("no turning point: g' stays below {target} on [{y0}, 1]")));
    }
    let (mut lo, mut hi) = (y0, 1.0);
    if slope(lo) >= 0.0 {
        hi = lo;
    }
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ystar = hi;
    // the orbit must stay below the turning slope on the whole interval
    let check = 200;
    if (0..check).any(|i| map.dg(-ystar + 2.0 * ystar * i as f64 / check as f64).abs() > target * (1.0 + 1e-12)) {
        return Err(Error::NotTrapped(format!("g' exceeds the turning slope inside [-{ystar}, {ystar}]")));
    }
    if ystar == 0.0 {
        return Err(Error::NotTrapped("turning point at the origin: the orbit is a rest point".into()));
    }
    let gstar = map.dg(ystar);
    let integrand = |theta: f64| {
        let z = ystar * theta.sin();
        let q = map.dg(z) / gstar;
        let denom = (1.0 - q * q).max(0.0).sqrt();
        if denom == 0.0 {
            return 0.0;
        }
        map.dg(z) * ystar * theta.cos() / denom
    };
    let integral = composite_gauss(integrand, -0.5 * PI, 0.5 * PI, PERIOD_PANELS, PERIOD_ORDER);
    Ok(2.0 * r0 / r_axis * integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::mapped_grid;

    fn uniform2d(m: usize, n: usize) -> Grid2D {
        Grid2D::new(mapped_grid(m, &MeshMap::identity()).unwrap(), mapped_grid(n, &MeshMap::identity()).unwrap())
    }

    #[test]
    fn five_point_pattern() {
        let g = uniform2d(7, 7);
        let h = g.axis_x.h();
        let s = Scheme2D::constant(g.clone());
        let mut e = g.zeros();
        e[[4, 4]] = C64::new(1.0, 0.0);
        let v = s.apply(&e).unwrap();
        let nz: Vec<_> = v.indexed_iter().filter(|(_, z)| z.norm() > 0.0).map(|(i, z)| (i, z.re * h * h)).collect();
        assert_eq!(nz.len(), 5);
        for ((j, k), val) in nz {
            let expect = if (j, k) == (4, 4) { -4.0 } else { 1.0 };
            assert!((val - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn bilinear_is_harmonic() {
        let g = Grid2D::new(mapped_grid(20, &MeshMap::tan_center()).unwrap(), mapped_grid(25, &MeshMap::sin_boundary()).unwrap());
        let s = Scheme2D::constant(g.clone());
        let u = Array2::from_shape_fn(g.shape(), |(j, k)| {
            let (x, y) = (g.axis_x.nodes()[j], g.axis_y.nodes()[k]);
            C64::new(1.0 + 2.0 * x - y + 3.0 * x * y, x * y)
        });
        let v = s.apply(&u).unwrap();
        assert!(v.iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn uniform_axis_eigenvalues() {
        let axis = mapped_grid(40, &MeshMap::identity()).unwrap();
        let h = axis.h();
        let sp = eigendecompose_axis(&axis, &CoefficientField::constant()).unwrap();
        assert_eq!(sp.values.len(), 40);
        for (j, v) in sp.values.iter().enumerate() {
            let exact = 4.0 / (h * h) * ((j + 1) as f64 * PI * h / 4.0).sin().powi(2);
            assert!((v - exact).abs() < 1e-10 * exact.max(1.0));
        }
    }

    #[test]
    fn tensor_mode_is_eigenfunction() {
        let g = Grid2D::new(mapped_grid(15, &MeshMap::tan_center()).unwrap(), mapped_grid(12, &MeshMap::identity()).unwrap());
        let b = SpectralBasis2D::new(&g).unwrap();
        let s = Scheme2D::constant(g);
        let phi = b.mode(0, 0);
        let lam = b.x.values[0] + b.y.values[0];
        let v = s.apply(&phi).unwrap();
        for (a, c) in v.iter().zip(phi.iter()) {
            assert!((a + c * lam).norm() < 1e-9);
        }
    }

    #[test]
    fn symbols() {
        let id = MeshMap::identity();
        assert_eq!(lambda_symbols(&id, &id, [0.2, -0.1, 0.0, 0.0]), (0.0, 0.0, 0.0));
        let (l1, l2, big) = lambda_symbols(&id, &id, [0.2, -0.1, PI, PI]);
        assert!((l1 - 2.0).abs() < 1e-15 && (l2 - 2.0).abs() < 1e-15 && (big - 8.0).abs() < 1e-14);
    }

    #[test]
    fn tan_axis_rhs_matches_explicit_form() {
        let map = MeshMap::tan_center();
        let r0 = 1.7;
        for b in [Branch::Plus, Branch::Minus] {
            let s = b.sign();
            for &(x, xi) in &[(0.3, 1.0), (-0.6, 2.2), (0.9, 4.0)] {
                let f = axis_ray_rhs(&map, r0, b, [x, xi]);
                let ex = -s * 4.0 / (r0 * PI) * xi.sin() / (x * x + 1.0);
                let ek = -s * 32.0 / (r0 * PI) * (xi / 2.0).sin().powi(2) * x / (x * x + 1.0).powi(2);
                assert!((f[0] - ex).abs() < 1e-13 && (f[1] - ek).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn degenerate_ray() {
        let m = MeshMap::tan_center();
        let r = integrate_ray_2d(&m, &m, 0.0, 0.0, 0.0, 2.0 * PI, 1.0, 1e-3, Branch::Plus);
        assert!(matches!(r, Err(Error::DegenerateRay(_))));
    }

    #[test]
    fn period_rejects_untrapped() {
        let m = MeshMap::tan_center();
        assert!(matches!(trap_period(&m, 1.0, 1.0, 1.0, PI / 2.0), Err(Error::NotTrapped(_))));
        assert!(matches!(trap_period(&MeshMap::sin_boundary(), 1.0, 1.0, 0.0, PI / 2.0), Err(Error::NotTrapped(_))));
    }

    #[test]
    fn packet_2d_examples() {
        let g = uniform2d(30, 30);
        let u = gaussian_packet_2d(&g, 0.0, 0.0, 0.0, 0.0, None).unwrap();
        assert!(u.iter().all(|z| z.im == 0.0 && z.re >= 0.0));
        let u = gaussian_packet_2d(&g, 0.0, 0.0, PI, PI, None).unwrap();
        let c = (15, 15);
        let max = u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(u[[c.0 + 1, c.1 + 1]].norm() <= max);
        // checkerboard: neighbouring phases differ by pi
        let ratio = u[[16, 16]] / u[[17, 16]];
        assert!(ratio.re < 0.0 && ratio.im.abs() < 1e-12);
        assert!(gaussian_packet_2d(&g, 1.5, 0.0, 0.0, 0.0, None).is_err());
    }
}
