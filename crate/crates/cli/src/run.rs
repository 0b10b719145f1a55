//! Executes a validated experiment and writes its artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use raywave::mesh::{mapped_grid, MeshMap, TransformedGrid1D};
use raywave::output::{fmt_f64, max_pool, write_csv, write_pgm};
use raywave::rays::{
    first_return, integrate_ray, max_hamiltonian_residual, phase_portrait, DispersionLaw, PortraitOptions, RayPath, RaySystem1D,
};
use raywave::solver1d::{gaussian_packet, leapfrog_integrate, LeapfrogOptions, PacketSpec, Scheme1D};
use raywave::wave2d::{
    axis_ray_rhs, centroid_2d, eigendecompose_axis, gaussian_packet_2d, integrate_ray_2d, leapfrog_integrate_2d, spectral_energy,
    spectral_from_coefficients, spectral_velocity, trap_period, Grid2D, Scheme2D, SpectralBasis2D,
};
use serde::Serialize;

use crate::config::{serialize_config, ExperimentConfig, Kind, Method2D};

pub const MANIFEST: &str = "manifest.json";
/// Largest side of a PGM image.
const PGM_MAX_SIDE: usize = 512;
/// Snapshot count targeted by 2D runs without an explicit stride.
const SNAPSHOTS_2D: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Numerical(#[from] raywave::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: String,
    pub kind: String,
    pub preset: Option<String>,
    /// The fully expanded config as TOML.
    pub config: String,
    /// Every file written into the output directory, this manifest included.
    pub files: Vec<String>,
    pub wall_time_s: f64,
    /// Scalar diagnostics of the run.
    pub summary: BTreeMap<String, f64>,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
    summary: BTreeMap<String, f64>,
}

impl Artifacts {
    fn io(&self, name: &str) -> impl Fn(io::Error) -> RunError + '_ {
        let path = self.dir.join(name);
        move |source| RunError::Io { path: path.clone(), source }
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<(), RunError> {
        let run = || -> io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(self.dir.join(name))?);
            f(&mut w)?;
            w.flush()
        };
        run().map_err(self.io(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), RunError> {
        self.write_with(name, |w| {
            writeln!(w, "{}", header.join(","))?;
            for row in rows {
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        })
    }

    fn numeric_csv<R: AsRef<[f64]>>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<(), RunError> {
        self.write_with(name, |w| write_csv(w, header, rows))
    }

    fn pgm(&mut self, name: &str, data: ArrayView2<f64>) -> Result<(), RunError> {
        let pooled = max_pool(data, PGM_MAX_SIDE);
        self.write_with(name, |w| write_pgm(w, pooled.view()))
    }

    fn note(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }
}

fn num(v: f64) -> String {
    fmt_f64(v)
}

/// Runs `cfg`, writing artifacts and `manifest.json` into `dir`.
///
/// Files listed by a previous manifest in `dir` are removed first so the
/// directory never holds stale outputs.
pub fn run(cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest, RunError> {
    let start = Instant::now();
    let io_err = |source| RunError::Io { path: dir.to_path_buf(), source };
    fs::create_dir_all(dir).map_err(io_err)?;
    remove_previous(dir).map_err(io_err)?;
    let mut art = Artifacts { dir: dir.to_path_buf(), files: Vec::new(), summary: BTreeMap::new() };
    art.write_with("config.toml", |w| w.write_all(serialize_config(cfg).as_bytes()))?;
    match cfg.kind {
        Kind::Simulate1d => simulate1d(cfg, &mut art)?,
        Kind::Ray1d => ray1d(cfg, &mut art)?,
        Kind::Portrait => portrait(cfg, &mut art)?,
        Kind::Simulate2d => simulate2d(cfg, &mut art)?,
        Kind::Ray2d => ray2d(cfg, &mut art)?,
        Kind::Spectrum => spectrum(cfg, &mut art)?,
        Kind::Period => period(cfg, &mut art)?,
    }
    let mut files = art.files;
    files.push(MANIFEST.to_string());
    let manifest = Manifest {
        version: raywave::VERSION.to_string(),
        kind: cfg.kind.name().to_string(),
        preset: cfg.preset.clone(),
        config: serialize_config(cfg),
        files,
        wall_time_s: start.elapsed().as_secs_f64(),
        summary: art.summary,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST), text).map_err(|source| RunError::Io { path: dir.join(MANIFEST), source })?;
    Ok(manifest)
}

fn remove_previous(dir: &Path) -> io::Result<()> {
    let Ok(text) = fs::read_to_string(dir.join(MANIFEST)) else {
        return Ok(());
    };
    let Ok(old) = serde_json::from_str::<serde_json::Value>(&text) else {
        return Ok(());
    };
    for f in old["files"].as_array().into_iter().flatten().filter_map(|v| v.as_str()) {
        // only plain names written by an earlier run
        if Path::new(f).file_name().map(|n| n == f).unwrap_or(false) {
            match fs::remove_file(dir.join(f)) {
                Err(e) if e.kind() != io::ErrorKind::NotFound => return Err(e),
                _ => {}
            }
        }
    }
    Ok(())
}

fn grid_1d(cfg: &ExperimentConfig) -> Result<(MeshMap, TransformedGrid1D), RunError> {
    let map = cfg.mesh.map.build()?;
    let grid = mapped_grid(cfg.mesh.n, &map)?;
    Ok((map, grid))
}

fn ray_system(cfg: &ExperimentConfig, map: MeshMap) -> Result<RaySystem1D, RunError> {
    Ok(RaySystem1D::new(DispersionLaw::discrete(), map, cfg.sigma.build()?, cfg.packet.branch))
}

fn ray_rows(path: &RayPath) -> Vec<Vec<String>> {
    path.samples.iter().map(|s| vec![num(s.t), num(s.x), num(s.xi), path.branch.label().to_string()]).collect()
}

fn reflection_rows(path: &RayPath) -> Vec<Vec<String>> {
    path.reflections.iter().map(|r| vec![num(r.t), num(r.endpoint), num(r.xi_before), num(r.xi_after)]).collect()
}

const RAY_HEADER: [&str; 4] = ["t", "x", "xi", "branch"];
const REFLECTION_HEADER: [&str; 4] = ["t", "endpoint", "xi_before", "xi_after"];

fn write_ray_1d(cfg: &ExperimentConfig, map: MeshMap, art: &mut Artifacts) -> Result<(), RunError> {
    let sys = ray_system(cfg, map)?;
    let p = &cfg.packet;
    let path = integrate_ray(&sys, p.x0, p.xi0, cfg.horizon, cfg.dt_ray)?;
    art.csv("ray.csv", &RAY_HEADER, ray_rows(&path))?;
    art.csv("reflections.csv", &REFLECTION_HEADER, reflection_rows(&path))?;
    art.note("reflections", path.reflections.len() as f64);
    art.note("max_hamiltonian_residual", max_hamiltonian_residual(&sys, &path));
    Ok(())
}

fn simulate1d(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let (map, grid) = grid_1d(cfg)?;
    let scheme = Scheme1D::new(grid.clone(), cfg.sigma.build()?);
    let p = &cfg.packet;
    let mut spec = PacketSpec::new(p.x0, p.xi0);
    if let Some(g) = p.gamma {
        spec = spec.with_gamma(g);
    }
    let (u0, u1) = gaussian_packet(&grid, &spec)?;
    let mut opts = LeapfrogOptions::new(cfg.horizon, cfg.cfl);
    if let Some(s) = cfg.stride {
        opts = opts.with_stride(s);
    }
    let tr = leapfrog_integrate(&scheme, &u0, &u1, &opts)?;

    art.csv("grid.csv", &["x"], grid.nodes().iter().map(|&x| vec![num(x)]))?;
    let mut header = vec!["t".to_string()];
    header.extend(grid.nodes().iter().map(|&x| num(x)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = tr.times.iter().zip(&tr.snapshots).map(|(&t, snap)| {
        let mut row = Vec::with_capacity(snap.len() + 1);
        row.push(t);
        row.extend_from_slice(snap);
        row
    });
    art.numeric_csv("spacetime.csv", &header, rows)?;
    let image = Array2::from_shape_fn((tr.snapshots.len(), grid.len()), |(i, j)| tr.snapshots[i][j]);
    art.pgm("spacetime.pgm", image.view())?;
    art.numeric_csv("energy.csv", &["t", "E"], tr.energies.iter().map(|&(t, e)| [t, e]))?;
    let centroids = tr.times.iter().zip(&tr.centroids).map(|(&t, c)| [t, c.unwrap_or(f64::NAN)]);
    art.numeric_csv("centroid.csv", &["t", "centroid"], centroids)?;
    art.note("steps", tr.steps as f64);
    art.note("dt", tr.dt);
    art.note("max_energy_drift", tr.max_energy_drift());
    write_ray_1d(cfg, map, art)
}

fn ray1d(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let map = cfg.mesh.map.build()?;
    write_ray_1d(cfg, map, art)
}

fn portrait(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let sys = ray_system(cfg, cfg.mesh.map.build()?)?;
    let opts = PortraitOptions { horizon: cfg.horizon, dt: cfg.dt_ray, window: cfg.portrait.window, ..Default::default() };
    let pp = phase_portrait(&sys, &cfg.portrait.seeds, &opts)?;
    for (i, orbit) in pp.orbits.iter().enumerate() {
        let rows = orbit.samples.iter().map(|s| [s.t, s.x, s.xi]);
        art.numeric_csv(&format!("orbit_{i:03}.csv"), &["t", "x", "xi"], rows)?;
    }
    let eq = pp.equilibria.equilibria.iter().map(|e| {
        let l = e.eigenvalues[0];
        vec![num(e.x), num(e.xi), e.kind.label().to_string(), num(l.re), num(l.im)]
    });
    art.csv("equilibria.csv", &["x", "xi", "kind", "re_lambda", "im_lambda"], eq)?;
    let degenerate = pp.equilibria.degenerate.iter().map(|d| vec![num(d[0]), num(d[1])]);
    art.csv("degenerate.csv", &["x", "xi"], degenerate)?;
    art.note("equilibria", pp.equilibria.equilibria.len() as f64);
    Ok(())
}

fn spectrum(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let (_, grid) = grid_1d(cfg)?;
    let sp = eigendecompose_axis(&grid, &cfg.sigma.build()?)?;
    let rows = sp.values.iter().enumerate().map(|(i, &v)| vec![(i + 1).to_string(), num(v)]);
    art.csv("eigenvalues.csv", &["index", "eigenvalue"], rows)?;
    art.note("count", sp.values.len() as f64);
    Ok(())
}

fn grid_2d(cfg: &ExperimentConfig) -> Result<(MeshMap, MeshMap, Grid2D), RunError> {
    let (mx, my) = (cfg.mesh.map.build()?, cfg.mesh.map_y.build()?);
    let grid = Grid2D::new(mapped_grid(cfg.mesh.n, &mx)?, mapped_grid(cfg.mesh.n_y, &my)?);
    Ok((mx, my, grid))
}

/// Image with `y` increasing upwards and `x` to the right.
fn image_2d(modulus: &Array2<f64>) -> Array2<f64> {
    let (nx, ny) = modulus.dim();
    Array2::from_shape_fn((ny, nx), |(r, c)| modulus[[c, ny - 1 - r]])
}

fn write_ray_2d(cfg: &ExperimentConfig, mx: &MeshMap, my: &MeshMap, art: &mut Artifacts) -> Result<(), RunError> {
    let p = &cfg.packet;
    let path = integrate_ray_2d(mx, my, p.x0, p.y0, p.xi0, p.eta0, cfg.horizon, cfg.dt_ray, p.branch)?;
    let rows = path.x.samples.iter().zip(&path.y.samples).map(|(a, b)| [a.t, a.x, b.x, a.xi, b.xi]);
    art.numeric_csv("ray.csv", &["t", "x", "y", "xi", "eta"], rows)?;
    art.csv("reflections_x.csv", &REFLECTION_HEADER, reflection_rows(&path.x))?;
    art.csv("reflections_y.csv", &REFLECTION_HEADER, reflection_rows(&path.y))?;
    let (d0, d1, d2) = path.invariant_drift(mx, my);
    art.note("r0", path.r0);
    art.note("r1", path.r1);
    art.note("r2", path.r2);
    art.note("max_invariant_drift", d0.max(d1).max(d2));
    Ok(())
}

fn simulate2d(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let (mx, my, grid) = grid_2d(cfg)?;
    let p = &cfg.packet;
    let u0 = gaussian_packet_2d(&grid, p.x0, p.y0, p.xi0, p.eta0, p.gamma)?;
    let basis = SpectralBasis2D::new(&grid)?;
    let sign = p.branch.sign();
    let v0 = spectral_velocity(&basis, &u0)?.mapv(|z| z * sign);
    let h = grid.axis_x.h().min(grid.axis_y.h());
    let (steps, dt) = LeapfrogOptions::new(cfg.horizon, cfg.cfl).steps(h)?;
    let stride = cfg.stride.unwrap_or((steps / SNAPSHOTS_2D).max(1));
    let mut snaps: Vec<(f64, Array2<f64>)> = Vec::new();
    let mut energies: Vec<(f64, f64)> = Vec::new();
    match cfg.method {
        Method2D::Leapfrog => {
            let tr = leapfrog_integrate_2d(&Scheme2D::constant(grid.clone()), &u0, &v0, cfg.horizon, cfg.cfl, Some(stride))?;
            snaps = tr.times.into_iter().zip(tr.snapshots).collect();
            energies = tr.energies;
        }
        Method2D::Spectral => {
            let beta = basis.coefficients(&u0)?;
            let e = spectral_energy(&basis, &beta);
            for n in (0..=steps).filter(|n| n % stride == 0 || *n == steps) {
                let t = n as f64 * dt;
                let u = spectral_from_coefficients(&basis, &beta, sign * t);
                snaps.push((t, u.mapv(|z| z.norm_sqr().sqrt())));
                energies.push((t, e));
            }
        }
    }
    let (gx, gy) = (grid.axis_x.nodes(), grid.axis_y.nodes());
    art.csv("grid_x.csv", &["x"], gx.iter().map(|&x| vec![num(x)]))?;
    art.csv("grid_y.csv", &["y"], gy.iter().map(|&y| vec![num(y)]))?;
    let mut index = Vec::new();
    let mut centroids = Vec::new();
    for (k, (t, m)) in snaps.iter().enumerate() {
        let name = format!("snap_{k:04}.pgm");
        art.pgm(&name, image_2d(m).view())?;
        index.push(vec![k.to_string(), num(*t), name]);
        let (cx, cy) = centroid_2d(m, &grid).unwrap_or((f64::NAN, f64::NAN));
        centroids.push(vec![num(*t), num(cx), num(cy)]);
    }
    art.csv("snapshots.csv", &["index", "t", "filename"], index)?;
    art.csv("centroid.csv", &["t", "x", "y"], centroids)?;
    art.numeric_csv("energy.csv", &["t", "E"], energies.iter().map(|&(t, e)| [t, e]))?;
    let e0 = energies.first().map(|e| e.1).unwrap_or(0.0);
    let drift = energies.iter().map(|&(_, e)| if e0 > 0.0 { (e - e0).abs() / e0 } else { 0.0 }).fold(0.0, f64::max);
    art.note("steps", steps as f64);
    art.note("dt", dt);
    art.note("max_energy_drift", drift);
    write_ray_2d(cfg, &mx, &my, art)
}

fn ray2d(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let (mx, my) = (cfg.mesh.map.build()?, cfg.mesh.map_y.build()?);
    write_ray_2d(cfg, &mx, &my, art)
}

fn period(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), RunError> {
    let (mx, my) = (cfg.mesh.map.build()?, cfg.mesh.map_y.build()?);
    let p = &cfg.packet;
    let path = integrate_ray_2d(&mx, &my, p.x0, p.y0, p.xi0, p.eta0, cfg.horizon, cfg.dt_ray, p.branch)?;
    let mut rows = Vec::new();
    for (axis, map, r, z0, zeta0, ray) in [
        ("x", &mx, path.r1, p.x0, p.xi0, &path.x),
        ("y", &my, path.r2, p.y0, p.eta0, &path.y),
    ] {
        let quad = trap_period(map, path.r0, r, z0, zeta0);
        let trapped = quad.is_ok();
        let dir = axis_ray_rhs(map, path.r0, p.branch, [z0, zeta0]);
        let ode = first_return(ray, dir).map(|f| f.time).unwrap_or(f64::NAN);
        let quad = quad.unwrap_or(f64::NAN);
        rows.push(vec![
            axis.to_string(),
            num(z0),
            num(zeta0),
            num(path.r0),
            num(r),
            num(quad),
            num(ode),
            u8::from(trapped).to_string(),
        ]);
        art.note(&format!("period_{axis}"), quad);
        art.note(&format!("first_return_{axis}"), ode);
    }
    art.csv("period.csv", &["axis", "position", "frequency", "r0", "r_axis", "period", "first_return", "trapped"], rows)
}
