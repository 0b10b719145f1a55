//! Named parameter sets for the standard experiments.

use std::f64::consts::PI;
use std::sync::OnceLock;

use raywave::coefficients::CoefficientField;
use raywave::mesh::MeshMap;
use raywave::rays::{find_equilibria, Branch, DispersionLaw, EquilibriumKind, RaySystem1D};

use crate::config::{ExperimentConfig, Kind, MapSpec, MeshSpec, Method2D, PacketParams, PortraitParams, SigmaSpec};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub config: ExperimentConfig,
}

const N_1D: usize = 400;
const N_2D: usize = 150;

fn base(kind: Kind, name: &str, map: MapSpec, n: usize, horizon: f64) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        preset: Some(name.to_string()),
        horizon,
        cfl: 0.1,
        dt_ray: 1e-3,
        stride: None,
        out: None,
        method: Method2D::Leapfrog,
        mesh: MeshSpec { map, n, map_y: map, n_y: n },
        sigma: SigmaSpec::One,
        packet: PacketParams { x0: 0.0, y0: 0.0, xi0: 0.0, eta0: 0.0, gamma: None, branch: Branch::Plus },
        portrait: PortraitParams { seeds: Vec::new(), window: (-1.0, 1.0) },
    }
}

fn one_d(name: &'static str, description: &'static str, map: MapSpec, sigma: SigmaSpec, x0: f64, xi0: f64) -> Preset {
    let mut config = base(Kind::Simulate1d, name, map, N_1D, 5.0);
    config.sigma = sigma;
    config.packet.x0 = x0;
    config.packet.xi0 = xi0;
    Preset { name, description, config }
}

#[allow(clippy::too_many_arguments)]
fn two_d(name: &'static str, description: &'static str, map: MapSpec, x0: f64, y0: f64, xi0: f64, eta0: f64, horizon: f64) -> Preset {
    let mut config = base(Kind::Simulate2d, name, map, N_2D, horizon);
    config.packet = PacketParams { x0, y0, xi0, eta0, gamma: None, branch: Branch::Plus };
    Preset { name, description, config }
}

fn portrait(name: &'static str, description: &'static str, map: MapSpec, sigma: SigmaSpec) -> Preset {
    let mut config = base(Kind::Portrait, name, map, N_1D, 10.0);
    config.sigma = sigma;
    let xs = [-0.8, -0.4, 0.0, 0.4, 0.8];
    let xis = [PI / 3.0, 2.0 * PI / 3.0, PI, 4.0 * PI / 3.0, 5.0 * PI / 3.0];
    config.portrait.seeds = xs.iter().flat_map(|&x| xis.iter().map(move |&xi| (x, xi))).collect();
    config.packet.xi0 = PI;
    Preset { name, description, config }
}

/// Smallest positive saddle abscissa of the `A = 1, kappa = 1` system on `map`.
fn variable_saddle(map: MeshMap) -> f64 {
    let field = CoefficientField::oscillatory(1.0, 1).expect("valid coefficients");
    let sys = RaySystem1D::new(DispersionLaw::discrete(), map, field, Branch::Plus);
    let report = find_equilibria(&sys, 401, 201).expect("equilibrium scan");
    report
        .equilibria
        .iter()
        .filter(|e| e.kind == EquilibriumKind::Saddle && e.x > 0.0 && e.x < 1.0)
        .map(|e| e.x)
        .fold(f64::INFINITY, f64::min)
}

fn build() -> Vec<Preset> {
    use MapSpec::{Identity, SinBoundary, TanCenter};
    let tan = TanCenter(None);
    let sin = SinBoundary(None);
    let one = SigmaSpec::One;
    let var = |amplitude, kappa| SigmaSpec::Oscillatory { amplitude, kappa };
    let u3a_y0 = (2f64.powf(-0.25)).acos().tan();
    let mut v = vec![
        one_d("fig-low", "tan grid, xi0 = pi/4: packet crosses and reflects at the walls", tan, one, 0.0, PI / 4.0),
        one_d("fig-mirror-uniform", "uniform grid, xi0 = 7pi/4: mirrored direction", Identity, one, 0.0, 7.0 * PI / 4.0),
        one_d("fig-mirror-tan", "tan grid, xi0 = 7pi/4: mirrored direction", tan, one, 0.0, 7.0 * PI / 4.0),
        one_d("fig-mirror-sin", "sin grid, xi0 = 7pi/4: mirrored direction", sin, one, 0.0, 7.0 * PI / 4.0),
        one_d("fig-nonprop-uniform", "uniform grid, xi0 = pi: zero group velocity", Identity, one, 0.0, PI),
        one_d("fig-nonprop-tan", "tan grid, xi0 = pi: packet sits on a center", tan, one, 0.0, PI),
        one_d("fig-nonprop-sin", "sin grid, xi0 = pi: packet sits on a saddle and splits", sin, one, 0.0, PI),
        one_d("fig-internal-low", "tan grid, xi0 = 7pi/15: internal reflection", tan, one, 0.0, 7.0 * PI / 15.0),
        one_d("fig-internal-mid", "tan grid, xi0 = 10pi/15: internal reflection", tan, one, 0.0, 10.0 * PI / 15.0),
        one_d("fig-internal-high", "tan grid, xi0 = 13pi/15: internal reflection", tan, one, 0.0, 13.0 * PI / 15.0),
        one_d("fig-saddle-right", "sin grid, x0 = 1/2, xi0 = pi: trapped right of the saddle", sin, one, 0.5, PI),
        one_d("fig-saddle-left", "sin grid, x0 = -1/2, xi0 = pi: trapped left of the saddle", sin, one, -0.5, PI),
        one_d("fig-var-low", "uniform grid, A = 1, kappa = 1, xi0 = pi/7", Identity, var(1.0, 1), 0.0, PI / 7.0),
        one_d("fig-var-high-amp", "uniform grid, A = 7, kappa = 1, xi0 = pi/7", Identity, var(7.0, 1), 0.0, PI / 7.0),
        one_d("fig-var-kappa1", "uniform grid, A = 2, kappa = 1, xi0 = pi/7", Identity, var(2.0, 1), 0.0, PI / 7.0),
        one_d("fig-var-kappa5", "uniform grid, A = 2, kappa = 5, xi0 = pi/7", Identity, var(2.0, 5), 0.0, PI / 7.0),
        one_d(
            "fig-var-dispersive-tan",
            "tan grid, A = 1, kappa = 1, xi0 = pi at a saddle: dispersive non-propagation",
            tan,
            var(1.0, 1),
            variable_saddle(MeshMap::tan_center()),
            PI,
        ),
        one_d(
            "fig-var-dispersive-sin",
            "sin grid, A = 1, kappa = 1, xi0 = pi at a saddle: dispersive non-propagation",
            sin,
            var(1.0, 1),
            variable_saddle(MeshMap::sin_boundary()),
            PI,
        ),
        portrait("portrait-tan", "phase portrait, tan grid: one center at (0, pi)", tan, one),
        portrait("portrait-sin", "phase portrait, sin grid: one saddle at (0, pi)", sin, one),
        portrait("portrait-var-tan", "phase portrait, tan grid, A = 1, kappa = 1", tan, var(1.0, 1)),
        portrait("portrait-var-sin", "phase portrait, sin grid, A = 1, kappa = 1", sin, var(1.0, 1)),
        two_d("fig-low-2d", "tan grids, (0, 1/2, pi/4, pi/4), T = 5", tan, 0.0, 0.5, PI / 4.0, PI / 4.0, 5.0),
        two_d("fig-low-2d-uniform", "uniform grids, (0, 1/2, pi/4, pi/4), T = 5", Identity, 0.0, 0.5, PI / 4.0, PI / 4.0, 5.0),
        two_d("fig-np1", "tan grids, (1, 0, pi/2, pi), T = 10: no vertical motion", tan, 1.0, 0.0, PI / 2.0, PI, 10.0),
        two_d("fig-np1-uniform", "uniform grids, (1, 0, pi/2, pi), T = 10", Identity, 1.0, 0.0, PI / 2.0, PI, 10.0),
        two_d("fig-np3", "tan grids, (0, 0, pi, pi), T = 10: no motion at all", tan, 0.0, 0.0, PI, PI, 10.0),
        two_d("fig-np3-uniform", "uniform grids, (0, 0, pi, pi), T = 10", Identity, 0.0, 0.0, PI, PI, 10.0),
        two_d("fig-u3a", "tan grids, (0, tan(arccos(2^-1/4)), pi/2, pi), T = 8", tan, 0.0, u3a_y0, PI / 2.0, PI, 8.0),
        two_d("fig-u3b", "tan grids, (0, 0, pi/2, 5pi/6), T = 21", tan, 0.0, 0.0, PI / 2.0, 5.0 * PI / 6.0, 21.0),
        two_d("fig-u3c", "tan grids, (0, 0, pi/2, 7pi/18), T = 37", tan, 0.0, 0.0, PI / 2.0, 7.0 * PI / 18.0, 37.0),
        two_d("fig-u3d", "tan grids, (0, 0, pi/2, 7pi/12), T = 118", tan, 0.0, 0.0, PI / 2.0, 7.0 * PI / 12.0, 118.0),
    ];
    v.sort_by_key(|p| p.name);
    v
}

/// The preset catalogue, sorted by name.
pub fn list_presets() -> &'static [Preset] {
    static CATALOGUE: OnceLock<Vec<Preset>> = OnceLock::new();
    CATALOGUE.get_or_init(build)
}

pub fn find(name: &str) -> Option<&'static Preset> {
    list_presets().iter().find(|p| p.name == name)
}
