//! Reference grids on `[-1, 1]` and their images under a mesh map `g`.
//!
//! A [`MeshMap`] is a `C^2` diffeomorphism of `[-1, 1]` onto itself. Pushing
//! the uniform grid `x_j = -1 + j h` through `g` yields the non-uniform nodes
//! `g_j = g(x_j)` used by every scheme in this crate.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::{Error, Result};

/// Number of sample points used to certify derivative bounds of a custom map.
pub const DEFAULT_BOUND_SAMPLES: usize = 10_000;

const FD_STEP: f64 = 1e-6;

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied map given by closures.
pub struct CustomMap {
    pub name: String,
    pub g: ScalarFn,
    pub dg: ScalarFn,
    pub ddg: ScalarFn,
    /// Third derivative, used only for ray Jacobians. Central differences of
    /// `ddg` are used when absent.
    pub dddg: Option<ScalarFn>,
    /// Inverse map. Bisection on `g` is used when absent.
    pub ginv: Option<ScalarFn>,
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMap").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum MapKind {
    Identity,
    /// `g(x) = tan(a x) / tan(a)`, refining towards `x = 0`. `a = pi/4`
    /// gives `tan(pi x / 4)`.
    TanCenter { a: f64 },
    /// `g(x) = sin(b x) / sin(b)`, refining towards `x = +-1`. `b = pi/6`
    /// gives `2 sin(pi x / 6)`.
    SinBoundary { b: f64 },
    Custom(Arc<CustomMap>),
}

/// Declared derivative bounds `0 < g_d_minus <= |g'| <= g_d_plus`,
/// `|g''| <= g_dd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeBounds {
    pub g_d_minus: f64,
    pub g_d_plus: f64,
    pub g_dd: f64,
}

#[derive(Debug, Clone)]
pub struct MeshMap {
    kind: MapKind,
    bounds: DerivativeBounds,
}

impl MeshMap {
    pub fn identity() -> Self {
        Self {
            kind: MapKind::Identity,
            bounds: DerivativeBounds { g_d_minus: 1.0, g_d_plus: 1.0, g_dd: 0.0 },
        }
    }

    /// `tan(pi x / 4)`.
    pub fn tan_center() -> Self {
        Self::tan_center_with(PI / 4.0).expect("pi/4 is a valid parameter")
    }

    pub fn tan_center_with(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < PI / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "tan_center parameter must lie in (0, pi/2), got {a}"
            )));
        }
        let t = a.tan();
        let sec2 = 1.0 + t * t;
        Ok(Self {
            kind: MapKind::TanCenter { a },
            bounds: DerivativeBounds {
                g_d_minus: a / t,
                g_d_plus: a * sec2 / t,
                g_dd: 2.0 * a * a * sec2,
            },
        })
    }

    /// `2 sin(pi x / 6)`.
    pub fn sin_boundary() -> Self {
        Self::sin_boundary_with(PI / 6.0).expect("pi/6 is a valid parameter")
    }

    pub fn sin_boundary_with(b: f64) -> Result<Self> {
        if !(b > 0.0 && b < PI / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "sin_boundary parameter must lie in (0, pi/2), got {b}"
            )));
        }
        Ok(Self {
            kind: MapKind::SinBoundary { b },
            bounds: DerivativeBounds {
                g_d_minus: b * b.cos() / b.sin(),
                g_d_plus: b / b.sin(),
                g_dd: b * b,
            },
        })
    }

    /// Wraps a user map. Its bounds are certified by sampling
    /// [`DEFAULT_BOUND_SAMPLES`] points; no monotonicity check happens here.
    pub fn custom(map: CustomMap) -> Self {
        let map = Arc::new(map);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        let mut dd = 0.0_f64;
        for x in linspace(-1.0, 1.0, DEFAULT_BOUND_SAMPLES) {
            let d = (map.dg)(x).abs();
            lo = lo.min(d);
            hi = hi.max(d);
            dd = dd.max((map.ddg)(x).abs());
        }
        Self {
            kind: MapKind::Custom(map),
            bounds: DerivativeBounds { g_d_minus: lo, g_d_plus: hi, g_dd: dd },
        }
    }

    /// Overrides the declared bounds (used to test the validator).
    pub fn with_bounds(mut self, bounds: DerivativeBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn bounds(&self) -> DerivativeBounds {
        self.bounds
    }

    pub fn name(&self) -> String {
        match &self.kind {
            MapKind::Identity => "identity".into(),
            MapKind::TanCenter { .. } => "tan_center".into(),
            MapKind::SinBoundary { .. } => "sin_boundary".into(),
            MapKind::Custom(c) => c.name.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, MapKind::Identity)
    }

    pub fn g(&self, x: f64) -> f64 {
        match &self.kind {
            MapKind::Identity => x,
            MapKind::TanCenter { a } => (a * x).tan() / a.tan(),
            MapKind::SinBoundary { b } => (b * x).sin() / b.sin(),
            MapKind::Custom(c) => (c.g)(x),
        }
    }

    pub fn dg(&self, x: f64) -> f64 {
        match &self.kind {
            MapKind::Identity => 1.0,
            MapKind::TanCenter { a } => {
                let t = (a * x).tan();
                a * (1.0 + t * t) / a.tan()
            }
            MapKind::SinBoundary { b } => b * (b * x).cos() / b.sin(),
            MapKind::Custom(c) => (c.dg)(x),
        }
    }

    pub fn ddg(&self, x: f64) -> f64 {
        match &self.kind {
            MapKind::Identity => 0.0,
            MapKind::TanCenter { a } => {
                let t = (a * x).tan();
                2.0 * a * a * t * (1.0 + t * t) / a.tan()
            }
            MapKind::SinBoundary { b } => -b * b * (b * x).sin() / b.sin(),
            MapKind::Custom(c) => (c.ddg)(x),
        }
    }

    pub fn dddg(&self, x: f64) -> f64 {
        match &self.kind {
            MapKind::Identity => 0.0,
            MapKind::TanCenter { a } => {
                let t = (a * x).tan();
                let sec2 = 1.0 + t * t;
                2.0 * a * a * a * sec2 * (sec2 + 2.0 * t * t) / a.tan()
            }
            MapKind::SinBoundary { b } => -b * b * b * (b * x).cos() / b.sin(),
            MapKind::Custom(c) => match &c.dddg {
                Some(f) => f(x),
                None => ((c.ddg)(x + FD_STEP) - (c.ddg)(x - FD_STEP)) / (2.0 * FD_STEP),
            },
        }
    }

    pub fn ginv(&self, y: f64) -> f64 {
        match &self.kind {
            MapKind::Identity => y,
            MapKind::TanCenter { a } => (y * a.tan()).atan() / a,
            MapKind::SinBoundary { b } => (y * b.sin()).asin() / b,
            MapKind::Custom(c) => match &c.ginv {
                Some(f) => f(y),
                None => bisect_inverse(&*c.g, y),
            },
        }
    }
}

fn bisect_inverse(g: &dyn Fn(f64) -> f64, y: f64) -> f64 {
    let (mut lo, mut hi) = (-1.0, 1.0);
    let increasing = g(1.0) >= g(-1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) < y) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (b - a) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |i| if i + 1 == n && n > 1 { b } else { a + i as f64 * step })
}

/// The three builtin maps: identity, `tan_center`, `sin_boundary`.
pub fn builtin_maps() -> Vec<MeshMap> {
    vec![MeshMap::identity(), MeshMap::tan_center(), MeshMap::sin_boundary()]
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapViolation {
    /// `g'` vanishes or changes sign somewhere on the sample.
    NotMonotone { at: f64, dg: f64 },
    /// `|g'|` leaves `[g_d_minus, g_d_plus]`.
    SlopeOutOfBounds { at: f64, dg: f64 },
    CurvatureOutOfBounds { at: f64, ddg: f64 },
    Endpoint { at: f64, residual: f64 },
    Inverse { at: f64, residual: f64 },
}

#[derive(Debug, Clone)]
pub struct MapValidation {
    pub samples: usize,
    pub min_abs_dg: f64,
    pub argmin_abs_dg: f64,
    pub max_abs_dg: f64,
    pub argmax_abs_dg: f64,
    pub max_abs_ddg: f64,
    /// `(g(-1) + 1, g(1) - 1)`.
    pub endpoint_residuals: (f64, f64),
    pub max_inverse_residual: f64,
    pub violations: Vec<MapViolation>,
}

impl MapValidation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const ENDPOINT_TOL: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-10;
const BOUND_SLACK: f64 = 1e-12;

/// Samples `map` on `samples` equispaced points of `[-1, 1]` and checks it
/// against its declared bounds. Failures are collected, not raised.
pub fn validate_mesh_map(map: &MeshMap, samples: usize) -> Result<MapValidation> {
    if samples < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {samples}")));
    }
    let bounds = map.bounds();
    let mut report = MapValidation {
        samples,
        min_abs_dg: f64::INFINITY,
        argmin_abs_dg: 0.0,
        max_abs_dg: 0.0,
        argmax_abs_dg: 0.0,
        max_abs_ddg: 0.0,
        endpoint_residuals: (map.g(-1.0) + 1.0, map.g(1.0) - 1.0),
        max_inverse_residual: 0.0,
        violations: Vec::new(),
    };
    let mut sign = 0.0_f64;
    let mut monotone_flagged = false;
    for x in linspace(-1.0, 1.0, samples) {
        let d = map.dg(x);
        let dd = map.ddg(x);
        let ad = d.abs();
        if ad < report.min_abs_dg {
            report.min_abs_dg = ad;
            report.argmin_abs_dg = x;
        }
        if ad > report.max_abs_dg {
            report.max_abs_dg = ad;
            report.argmax_abs_dg = x;
        }
        report.max_abs_ddg = report.max_abs_ddg.max(dd.abs());

        let flipped = sign != 0.0 && d.signum() != sign;
        if !monotone_flagged && (ad <= f64::EPSILON || flipped) {
            report.violations.push(MapViolation::NotMonotone { at: x, dg: d });
            monotone_flagged = true;
        }
        if sign == 0.0 && ad > f64::EPSILON {
            sign = d.signum();
        }
        if ad < bounds.g_d_minus * (1.0 - BOUND_SLACK) || ad > bounds.g_d_plus * (1.0 + BOUND_SLACK)
        {
            report.violations.push(MapViolation::SlopeOutOfBounds { at: x, dg: d });
        }
        if dd.abs() > bounds.g_dd * (1.0 + BOUND_SLACK) + BOUND_SLACK {
            report.violations.push(MapViolation::CurvatureOutOfBounds { at: x, ddg: dd });
        }
        let inv = (map.ginv(map.g(x)) - x).abs();
        report.max_inverse_residual = report.max_inverse_residual.max(inv);
        if inv > INVERSE_TOL {
            report.violations.push(MapViolation::Inverse { at: x, residual: inv });
        }
    }
    if !(bounds.g_d_minus > 0.0) && !monotone_flagged {
        report.violations.push(MapViolation::NotMonotone {
            at: report.argmin_abs_dg,
            dg: report.min_abs_dg,
        });
    }
    let (lo, hi) = report.endpoint_residuals;
    if lo.abs() > ENDPOINT_TOL {
        report.violations.push(MapViolation::Endpoint { at: -1.0, residual: lo });
    }
    if hi.abs() > ENDPOINT_TOL {
        report.violations.push(MapViolation::Endpoint { at: 1.0, residual: hi });
    }
    Ok(report)
}

/// Uniform grid `x_j = -1 + j h`, `h = 2 / (N + 1)`, `j = 0..=N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    n_interior: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid1D {
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Reference midpoint `x_{j+1/2}` for `j = 0..=N`.
    pub fn midpoint(&self, j: usize) -> f64 {
        let m = (self.n_interior + 1) as f64;
        (2.0 * j as f64 + 1.0 - m) / m
    }
}

pub fn uniform_grid(n_interior: usize) -> Result<Grid1D> {
    if n_interior == 0 {
        return Err(Error::InvalidArgument("grid needs at least one interior node".into()));
    }
    let m = (n_interior + 1) as f64;
    // (2j - m) / m keeps x_{N+1-j} = -x_j exactly
    let nodes = (0..=n_interior + 1).map(|j| (2.0 * j as f64 - m) / m).collect();
    Ok(Grid1D { n_interior, h: 2.0 / m, nodes })
}

/// Image of a [`Grid1D`] under a [`MeshMap`].
///
/// `dual` holds the control-volume size `h_j = (h_{j+1/2} + h_{j-1/2}) / 2`
/// for interior nodes; the two boundary entries carry the adjacent half cell.
#[derive(Debug, Clone)]
pub struct TransformedGrid1D {
    source: Grid1D,
    map: MeshMap,
    nodes: Vec<f64>,
    midpoints: Vec<f64>,
    cells: Vec<f64>,
    dual: Vec<f64>,
}

impl TransformedGrid1D {
    pub fn source(&self) -> &Grid1D {
        &self.source
    }

    pub fn map(&self) -> &MeshMap {
        &self.map
    }

    pub fn n_interior(&self) -> usize {
        self.source.n_interior
    }

    /// Reference step `h = 2 / (N + 1)`.
    pub fn h(&self) -> f64 {
        self.source.h
    }

    /// `g_j`, length `N + 2`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Reference nodes `x_j = g^{-1}(g_j)`.
    pub fn reference_nodes(&self) -> &[f64] {
        &self.source.nodes
    }

    /// `g_{j+1/2}`, length `N + 1`.
    pub fn midpoints(&self) -> &[f64] {
        &self.midpoints
    }

    /// `h_{j+1/2} = g_{j+1} - g_j`, length `N + 1`.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// `h_{j+1/2}`.
    pub fn cell_right(&self, j: usize) -> f64 {
        self.cells[j]
    }

    /// `h_{j-1/2}`, for `j >= 1`.
    pub fn cell_left(&self, j: usize) -> f64 {
        self.cells[j - 1]
    }

    /// Dual cells, length `N + 2`.
    pub fn dual(&self) -> &[f64] {
        &self.dual
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: f64) -> usize {
        let mut best = 0;
        for (j, g) in self.nodes.iter().enumerate() {
            if (g - x).abs() < (self.nodes[best] - x).abs() {
                best = j;
            }
        }
        best
    }
}

pub fn transform_grid(grid: &Grid1D, map: &MeshMap) -> Result<TransformedGrid1D> {
    let n = grid.n_interior;
    let mut nodes: Vec<f64> = grid.nodes.iter().map(|&x| map.g(x)).collect();
    if (nodes[0] + 1.0).abs() > ENDPOINT_TOL || (nodes[n + 1] - 1.0).abs() > ENDPOINT_TOL {
        return Err(Error::InvalidMesh(format!(
            "map {} does not fix the endpoints: g(-1) = {}, g(1) = {}",
            map.name(),
            nodes[0],
            nodes[n + 1]
        )));
    }
    nodes[0] = -1.0;
    nodes[n + 1] = 1.0;
    if let Some(j) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidMesh(format!(
            "map {} is not increasing on the grid: g_{} = {} >= g_{} = {}",
            map.name(),
            j,
            nodes[j],
            j + 1,
            nodes[j + 1]
        )));
    }
    let midpoints = (0..=n).map(|j| map.g(grid.midpoint(j))).collect();
    let cells: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let mut dual = Vec::with_capacity(n + 2);
    dual.push(0.5 * cells[0]);
    dual.extend((1..=n).map(|j| 0.5 * (cells[j] + cells[j - 1])));
    dual.push(0.5 * cells[n]);
    Ok(TransformedGrid1D { source: grid.clone(), map: map.clone(), nodes, midpoints, cells, dual })
}

/// Shorthand for `transform_grid(&uniform_grid(n)?, map)`.
pub fn mapped_grid(n_interior: usize, map: &MeshMap) -> Result<TransformedGrid1D> {
    transform_grid(&uniform_grid(n_interior)?, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_examples() {
        let g = uniform_grid(3).unwrap();
        assert_eq!(g.h(), 0.5);
        assert_eq!(g.nodes(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(uniform_grid(1).unwrap().nodes(), &[-1.0, 0.0, 1.0]);
        let g = uniform_grid(199).unwrap();
        assert!((g.h() - 0.01).abs() < 1e-15);
        assert_eq!(g.nodes()[100], 0.0);
        assert!(matches!(uniform_grid(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn identity_transform_is_exact() {
        let g = uniform_grid(17).unwrap();
        let t = transform_grid(&g, &MeshMap::identity()).unwrap();
        assert_eq!(t.nodes(), g.nodes());
    }

    #[test]
    fn refinement_direction() {
        let t1 = mapped_grid(20, &MeshMap::tan_center()).unwrap();
        let argmin = |c: &[f64]| {
            c.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
        };
        // 21 cells, the central one is index 10
        assert_eq!(argmin(t1.cells()), 10);
        let t2 = mapped_grid(20, &MeshMap::sin_boundary()).unwrap();
        let k = argmin(t2.cells());
        assert!(k == 0 || k == 20, "argmin {k}");
        assert!((t1.nodes()[0] + 1.0).abs() < 1e-15 && t2.nodes()[21] == 1.0);
    }

    #[test]
    fn builtin_map_values() {
        let g1 = MeshMap::tan_center();
        assert_eq!(g1.g(0.0), 0.0);
        assert!((g1.g(1.0) - 1.0).abs() < 1e-15 && (g1.g(-1.0) + 1.0).abs() < 1e-15);
        assert!((g1.ginv(g1.g(0.3)) - 0.3).abs() < 1e-15);
        assert!((g1.ginv(0.5) - 4.0 / PI * 0.5_f64.atan()).abs() < 1e-15);
        let g2 = MeshMap::sin_boundary();
        assert!((g2.g(1.0) - 1.0).abs() < 1e-15);
        assert!((g2.g(0.4) - 2.0 * (PI * 0.4 / 6.0).sin()).abs() < 1e-15);
        assert!((g2.dg(0.0) - PI / 3.0).abs() < 1e-15);
        assert_eq!(MeshMap::identity().bounds(), DerivativeBounds { g_d_minus: 1.0, g_d_plus: 1.0, g_dd: 0.0 });
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let h = 1e-5;
        for map in [MeshMap::tan_center(), MeshMap::sin_boundary(), MeshMap::tan_center_with(1.2).unwrap()] {
            for &x in &[-0.9, -0.3, 0.0, 0.45, 0.8] {
                let fd1 = (map.g(x + h) - map.g(x - h)) / (2.0 * h);
                let fd2 = (map.dg(x + h) - map.dg(x - h)) / (2.0 * h);
                let fd3 = (map.ddg(x + h) - map.ddg(x - h)) / (2.0 * h);
                assert!((fd1 - map.dg(x)).abs() < 1e-8, "{} dg at {x}", map.name());
                assert!((fd2 - map.ddg(x)).abs() < 1e-7, "{} ddg at {x}", map.name());
                assert!((fd3 - map.dddg(x)).abs() < 1e-6, "{} dddg at {x}", map.name());
            }
        }
    }

    #[test]
    fn validation_reports() {
        let r = validate_mesh_map(&MeshMap::identity(), 100).unwrap();
        assert_eq!((r.min_abs_dg, r.max_abs_dg), (1.0, 1.0));
        assert!(r.is_valid());

        let r = validate_mesh_map(&MeshMap::tan_center(), 1000).unwrap();
        assert!(r.is_valid(), "{:?}", r.violations);
        assert!((r.min_abs_dg - PI / 4.0).abs() < 1e-5 && r.argmin_abs_dg.abs() < 2e-3);
        assert!((r.max_abs_dg - PI / 2.0).abs() < 1e-12 && r.argmax_abs_dg.abs() == 1.0);

        let cubic = MeshMap::custom(CustomMap {
            name: "cubic".into(),
            g: Box::new(|x| x * x * x),
            dg: Box::new(|x| 3.0 * x * x),
            ddg: Box::new(|x| 6.0 * x),
            dddg: None,
            ginv: Some(Box::new(|y: f64| y.cbrt())),
        });
        let r = validate_mesh_map(&cubic, 101).unwrap();
        assert!(r.violations.iter().any(|v| matches!(v, MapViolation::NotMonotone { .. })));
        assert!(validate_mesh_map(&cubic, 1).is_err());
    }

    #[test]
    fn non_monotone_map_rejected_on_nodes() {
        let fold = MeshMap::custom(CustomMap {
            name: "fold".into(),
            g: Box::new(|x| x - 0.4 * (2.0 * PI * x).sin()),
            dg: Box::new(|x| 1.0 - 0.8 * PI * (2.0 * PI * x).cos()),
            ddg: Box::new(|x| 1.6 * PI * PI * (2.0 * PI * x).sin()),
            dddg: None,
            ginv: None,
        });
        let e = mapped_grid(6, &fold).unwrap_err();
        assert!(matches!(e, Error::InvalidMesh(_)), "{e}");
    }

    #[test]
    fn dual_cells_positive_and_bounded() {
        for map in builtin_maps() {
            let t = mapped_grid(40, &map).unwrap();
            let sum: f64 = t.cells().iter().sum();
            assert!((sum - 2.0).abs() < 1e-12);
            for j in 1..=40 {
                let d = t.dual()[j];
                assert!(d > 0.0 && d <= t.cell_left(j).max(t.cell_right(j)));
            }
        }
    }
}
