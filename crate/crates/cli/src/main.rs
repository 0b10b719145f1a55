use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use raywave_cli::config::SigmaSpec;
use raywave_cli::{list_presets, parse_config_with, run, ExperimentConfig, Kind, Overrides, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "raywave", version, about = "Wave packets and numerical rays on mapped grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Config file; repeat to run several configs in parallel, each into
    /// its own subdirectory of --out.
    #[arg(long, global = true)]
    config: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Start from a named preset (see `raywave presets`).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Snapshot every n time steps.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// 1D leapfrog simulation of a Gaussian packet, with its ray.
    Simulate1d,
    /// 1D ray with wall reflections.
    Ray1d,
    /// Phase portrait and equilibria of the 1D ray system.
    Portrait,
    /// 2D simulation (leapfrog or spectral), with its ray.
    Simulate2d,
    /// 2D ray and its conserved symbols.
    Ray2d,
    /// Eigenvalues of one mapped axis.
    Spectrum,
    /// Trapped-orbit periods from quadrature and from the ray ODE.
    Period,
    /// List the built-in presets.
    Presets,
}

impl Command {
    fn kind(self) -> Option<Kind> {
        Some(match self {
            Command::Simulate1d => Kind::Simulate1d,
            Command::Ray1d => Kind::Ray1d,
            Command::Portrait => Kind::Portrait,
            Command::Simulate2d => Kind::Simulate2d,
            Command::Ray2d => Kind::Ray2d,
            Command::Spectrum => Kind::Spectrum,
            Command::Period => Kind::Period,
            Command::Presets => return None,
        })
    }
}

fn print_presets() {
    for p in list_presets() {
        let c = &p.config;
        let sigma = match c.sigma {
            SigmaSpec::One => "sigma=1".to_string(),
            SigmaSpec::Oscillatory { amplitude, kappa } => format!("A={amplitude} kappa={kappa}"),
        };
        let packet = if c.kind.is_2d() {
            format!("x0={:.6} y0={:.6} xi0={:.6} eta0={:.6}", c.packet.x0, c.packet.y0, c.packet.xi0, c.packet.eta0)
        } else {
            format!("x0={:.6} xi0={:.6}", c.packet.x0, c.packet.xi0)
        };
        println!(
            "{:<24} {:<11} map={:<12} n={:<4} T={:<5} {:<16} {}\n{:<24} {}",
            p.name,
            c.kind.name(),
            c.mesh.map.name(),
            c.mesh.n,
            c.horizon,
            sigma,
            packet,
            "",
            p.description
        );
    }
}

struct Job {
    label: String,
    config: ExperimentConfig,
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(kind) = cli.command.kind() else {
        print_presets();
        return ExitCode::SUCCESS;
    };
    let overrides = Overrides { kind: Some(kind), preset: cli.preset.clone(), stride: cli.stride, out: None };

    let sources: Vec<(String, String)> = if cli.config.is_empty() {
        vec![("<command line>".into(), String::new())]
    } else {
        let mut v = Vec::new();
        for path in &cli.config {
            match fs::read_to_string(path) {
                Ok(text) => v.push((path.display().to_string(), text)),
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            }
        }
        v
    };

    let mut jobs = Vec::new();
    let mut failed = false;
    for (label, text) in &sources {
        match parse_config_with(text, &overrides) {
            Ok(config) => jobs.push(Job { label: label.clone(), config, dir: PathBuf::new() }),
            Err(errs) => {
                failed = true;
                for e in &errs.0 {
                    eprintln!("{label}: {e}");
                }
            }
        }
    }
    if failed {
        return ExitCode::from(EXIT_CONFIG as u8);
    }

    if let [job] = jobs.as_mut_slice() {
        let fallback = || PathBuf::from("out").join(job.config.preset.clone().unwrap_or_else(|| kind.name().to_string()));
        job.dir = cli.out.clone().or_else(|| job.config.out.clone()).unwrap_or_else(fallback);
    } else {
        let base = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (job, path) in jobs.iter_mut().zip(&cli.config) {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
            let count = seen.entry(stem.clone()).or_insert(0);
            *count += 1;
            let name = if *count == 1 { stem } else { format!("{stem}-{count}") };
            job.dir = base.join(name);
        }
    }

    let results: Vec<_> = jobs.par_iter().map(|job| (job, run(&job.config, &job.dir))).collect();
    let mut code = 0;
    for (job, result) in results {
        match result {
            Ok(m) => {
                if !cli.quiet {
                    println!("{}: wrote {} files to {} in {:.2} s", job.label, m.files.len(), job.dir.display(), m.wall_time_s);
                }
            }
            Err(e) => {
                eprintln!("{}: error: {e}", job.label);
                code = code.max(e.exit_code());
            }
        }
    }
    ExitCode::from(code as u8)
}
