//! Experiment configuration: TOML text in, validated [`ExperimentConfig`] out.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use raywave::coefficients::CoefficientField;
use raywave::mesh::MeshMap;
use raywave::rays::Branch;
use toml::{Table, Value};

use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Simulate1d,
    Ray1d,
    Portrait,
    Simulate2d,
    Ray2d,
    Spectrum,
    Period,
}

impl Kind {
    pub const ALL: [Kind; 7] =
        [Kind::Simulate1d, Kind::Ray1d, Kind::Portrait, Kind::Simulate2d, Kind::Ray2d, Kind::Spectrum, Kind::Period];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate1d => "simulate1d",
            Kind::Ray1d => "ray1d",
            Kind::Portrait => "portrait",
            Kind::Simulate2d => "simulate2d",
            Kind::Ray2d => "ray2d",
            Kind::Spectrum => "spectrum",
            Kind::Period => "period",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_2d(self) -> bool {
        matches!(self, Kind::Simulate2d | Kind::Ray2d | Kind::Period)
    }
}

/// A built-in mesh map with an optional shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapSpec {
    Identity,
    TanCenter(Option<f64>),
    SinBoundary(Option<f64>),
}

impl MapSpec {
    pub fn name(self) -> &'static str {
        match self {
            MapSpec::Identity => "identity",
            MapSpec::TanCenter(_) => "tan_center",
            MapSpec::SinBoundary(_) => "sin_boundary",
        }
    }

    pub fn build(self) -> raywave::Result<MeshMap> {
        match self {
            MapSpec::Identity => Ok(MeshMap::identity()),
            MapSpec::TanCenter(None) => Ok(MeshMap::tan_center()),
            MapSpec::TanCenter(Some(a)) => MeshMap::tan_center_with(a),
            MapSpec::SinBoundary(None) => Ok(MeshMap::sin_boundary()),
            MapSpec::SinBoundary(Some(b)) => MeshMap::sin_boundary_with(b),
        }
    }

    fn parameter(self) -> Option<f64> {
        match self {
            MapSpec::Identity => None,
            MapSpec::TanCenter(p) | MapSpec::SinBoundary(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSpec {
    One,
    Oscillatory { amplitude: f64, kappa: u32 },
}

impl SigmaSpec {
    pub fn build(self) -> raywave::Result<CoefficientField> {
        match self {
            SigmaSpec::One => Ok(CoefficientField::constant()),
            SigmaSpec::Oscillatory { amplitude, kappa } => CoefficientField::oscillatory(amplitude, kappa),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method2D {
    Leapfrog,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub map: MapSpec,
    pub n: usize,
    pub map_y: MapSpec,
    pub n_y: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketParams {
    pub x0: f64,
    pub y0: f64,
    pub xi0: f64,
    pub eta0: f64,
    pub gamma: Option<f64>,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortraitParams {
    pub seeds: Vec<(f64, f64)>,
    pub window: (f64, f64),
}

/// Fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub preset: Option<String>,
    pub horizon: f64,
    pub cfl: f64,
    pub dt_ray: f64,
    pub stride: Option<usize>,
    pub out: Option<PathBuf>,
    pub method: Method2D,
    pub mesh: MeshSpec,
    pub sigma: SigmaSpec,
    pub packet: PacketParams,
    pub portrait: PortraitParams,
}

/// One problem found while reading a config.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line in the config text; `None` for keys that came from a
    /// preset or are missing.
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Settings from the command line that take part in config resolution.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kind: Option<Kind>,
    pub preset: Option<String>,
    pub stride: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parses and validates config text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    parse_config_with(text, &Overrides::default())
}

/// Parses config text, expanding presets and applying command-line overrides
/// before validation.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigErrors> {
    let file: Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        ConfigErrors(vec![ConfigError { line, key: "<syntax>".into(), message: e.message().trim().to_string() }])
    })?;
    let loc = Locator { text };
    let mut errs = Vec::new();

    let preset_name = match (&overrides.preset, file.get("preset")) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(Value::String(s))) => Some(s.clone()),
        (None, Some(_)) => {
            errs.push(loc.error(None, "preset", "must be a string"));
            None
        }
        (None, None) => None,
    };
    let mut merged = Table::new();
    let mut preset_kind = None;
    if let Some(name) = &preset_name {
        match presets::find(name) {
            Some(p) => {
                merged = to_table(&p.config);
                preset_kind = Some(p.config.kind);
            }
            None => {
                errs.push(loc.error(None, "preset", &format!("unknown preset '{name}' (see `raywave presets`)")));
            }
        }
    }
    overlay(&mut merged, &file);
    if let Some(name) = &preset_name {
        merged.insert("preset".into(), Value::String(name.clone()));
    }

    // kind: explicit file value must agree with the subcommand; a preset's
    // kind is only a default
    let file_kind = match file.get("kind") {
        Some(Value::String(s)) => match Kind::parse(s) {
            Some(k) => Some(k),
            None => {
                errs.push(loc.error(None, "kind", &format!("unknown kind '{s}'")));
                None
            }
        },
        Some(_) => {
            errs.push(loc.error(None, "kind", "must be a string"));
            None
        }
        None => None,
    };
    let kind = match (overrides.kind, file_kind, preset_kind) {
        (Some(o), Some(f), _) if o != f => {
            errs.push(loc.error(None, "kind", &format!("config says '{}' but the subcommand is '{}'", f.name(), o.name())));
            None
        }
        (Some(o), _, Some(p)) if o.is_2d() != p.is_2d() => {
            let dim = if p.is_2d() { "2D" } else { "1D" };
            errs.push(loc.error(None, "preset", &format!("preset is {dim} and cannot run as '{}'", o.name())));
            None
        }
        (Some(o), _, _) => Some(o),
        (None, Some(f), _) => Some(f),
        (None, None, Some(p)) => Some(p),
        (None, None, None) => {
            errs.push(ConfigError { line: None, key: "kind".into(), message: "missing required field".into() });
            None
        }
    };
    if let Some(s) = overrides.stride {
        merged.insert("stride".into(), Value::Integer(s as i64));
    }
    if let Some(o) = &overrides.out {
        merged.insert("out".into(), Value::String(o.to_string_lossy().into_owned()));
    }
    let Some(kind) = kind else {
        return Err(ConfigErrors(errs));
    };
    let cfg = Validator { loc, errs: &mut errs }.build(kind, preset_name, &merged);
    match cfg {
        Some(c) if errs.is_empty() => Ok(c),
        _ => Err(ConfigErrors(errs)),
    }
}

/// Renders a config as TOML that parses back to the same value.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    toml::to_string(&to_table(cfg)).expect("config tables always serialize")
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Merges `top` into `base`; sections merge key by key.
fn overlay(base: &mut Table, top: &Table) {
    for (k, v) in top {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => overlay(b, t),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn map_value(m: MapSpec) -> Value {
    match m.parameter() {
        None => Value::String(m.name().into()),
        Some(p) => {
            let mut t = Table::new();
            t.insert("name".into(), Value::String(m.name().into()));
            let key = if matches!(m, MapSpec::TanCenter(_)) { "a" } else { "b" };
            t.insert(key.into(), Value::Float(p));
            Value::Table(t)
        }
    }
}

pub(crate) fn to_table(cfg: &ExperimentConfig) -> Table {
    let mut t = Table::new();
    t.insert("kind".into(), Value::String(cfg.kind.name().into()));
    if let Some(p) = &cfg.preset {
        t.insert("preset".into(), Value::String(p.clone()));
    }
    t.insert("T".into(), Value::Float(cfg.horizon));
    t.insert("cfl".into(), Value::Float(cfg.cfl));
    t.insert("dt_ray".into(), Value::Float(cfg.dt_ray));
    if let Some(s) = cfg.stride {
        t.insert("stride".into(), Value::Integer(s as i64));
    }
    if let Some(o) = &cfg.out {
        t.insert("out".into(), Value::String(o.to_string_lossy().into_owned()));
    }
    let method = match cfg.method {
        Method2D::Leapfrog => "leapfrog",
        Method2D::Spectral => "spectral",
    };
    t.insert("method".into(), Value::String(method.into()));

    let mut mesh = Table::new();
    mesh.insert("map".into(), map_value(cfg.mesh.map));
    mesh.insert("n".into(), Value::Integer(cfg.mesh.n as i64));
    mesh.insert("map_y".into(), map_value(cfg.mesh.map_y));
    mesh.insert("n_y".into(), Value::Integer(cfg.mesh.n_y as i64));
    t.insert("mesh".into(), Value::Table(mesh));

    let mut coeffs = Table::new();
    coeffs.insert("rho".into(), Value::String("one".into()));
    let sigma = match cfg.sigma {
        SigmaSpec::One => Value::String("one".into()),
        SigmaSpec::Oscillatory { amplitude, kappa } => {
            let mut s = Table::new();
            s.insert("kind".into(), Value::String("oscillatory".into()));
            s.insert("A".into(), Value::Float(amplitude));
            s.insert("kappa".into(), Value::Integer(kappa as i64));
            Value::Table(s)
        }
    };
    coeffs.insert("sigma".into(), sigma);
    t.insert("coefficients".into(), Value::Table(coeffs));

    let p = &cfg.packet;
    let mut packet = Table::new();
    packet.insert("x0".into(), Value::Float(p.x0));
    packet.insert("y0".into(), Value::Float(p.y0));
    packet.insert("xi0".into(), Value::Float(p.xi0));
    packet.insert("eta0".into(), Value::Float(p.eta0));
    if let Some(g) = p.gamma {
        packet.insert("gamma".into(), Value::Float(g));
    }
    let branch = match p.branch {
        Branch::Plus => "plus",
        Branch::Minus => "minus",
    };
    packet.insert("branch".into(), Value::String(branch.into()));
    t.insert("packet".into(), Value::Table(packet));

    if !cfg.portrait.seeds.is_empty() {
        let mut portrait = Table::new();
        let seeds = cfg.portrait.seeds.iter().map(|&(x, xi)| Value::Array(vec![Value::Float(x), Value::Float(xi)])).collect();
        portrait.insert("seeds".into(), Value::Array(seeds));
        let (lo, hi) = cfg.portrait.window;
        portrait.insert("window".into(), Value::Array(vec![Value::Float(lo), Value::Float(hi)]));
        t.insert("portrait".into(), Value::Table(portrait));
    }
    t
}

/// Parses a number given as a TOML number or a string such as `"7pi/15"`,
/// `"-pi/2"`, `"2*pi"` or `"0.25"`.
pub fn parse_scalar(v: &Value) -> Result<f64, String> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        Value::String(s) => parse_expr(s).ok_or_else(|| format!("cannot read '{s}' as a number")),
        other => Err(format!("expected a number, got {}", other.type_str())),
    }
}

fn parse_expr(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(&s)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (body, 1.0),
    };
    let value = match num.find("pi") {
        Some(i) => {
            if !num[i + 2..].is_empty() {
                return None;
            }
            let coef = num[..i].trim_end_matches('*');
            let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().ok()? };
            c * PI
        }
        None => num.parse::<f64>().ok()?,
    };
    let out = sign * value / den;
    out.is_finite().then_some(out)
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    /// Line where `key` is assigned inside `[section]` (top level for `None`).
    fn line(&self, section: Option<&str>, key: &str) -> Option<usize> {
        let mut current: Option<String> = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('[') {
                current = rest.split(']').next().map(|s| s.trim().to_string());
                continue;
            }
            if current.as_deref() != section {
                continue;
            }
            if let Some(rest) = line.strip_prefix(key) {
                let rest = rest.trim_start();
                let rest = rest.strip_prefix('"').unwrap_or(rest).trim_start();
                if rest.starts_with('=') {
                    return Some(i + 1);
                }
            }
            if let Some(rest) = line.strip_prefix(&format!("\"{key}\"")) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
        section.and_then(|s| self.section_line(s))
    }

    fn section_line(&self, section: &str) -> Option<usize> {
        self.text.lines().position(|l| l.trim() == format!("[{section}]")).map(|i| i + 1)
    }

    fn error(&self, section: Option<&str>, key: &str, message: &str) -> ConfigError {
        let full = match section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        let line = self.line(section, key.split('.').next().unwrap_or(key));
        ConfigError { line, key: full, message: message.to_string() }
    }
}

const TOP_KEYS: [&str; 11] =
    ["kind", "preset", "T", "cfl", "dt_ray", "stride", "out", "method", "mesh", "coefficients", "packet"];
const MESH_KEYS: [&str; 4] = ["map", "n", "map_y", "n_y"];
const COEFF_KEYS: [&str; 2] = ["rho", "sigma"];
const PACKET_KEYS: [&str; 6] = ["x0", "y0", "xi0", "eta0", "gamma", "branch"];
const PORTRAIT_KEYS: [&str; 2] = ["seeds", "window"];
const MAX_NODES_1D: usize = 200_000;
const MAX_NODES_2D: usize = 2_000;
const MAX_NODES_SPECTRUM: usize = 4_000;

struct Validator<'a, 'e> {
    loc: Locator<'a>,
    errs: &'e mut Vec<ConfigError>,
}

impl Validator<'_, '_> {
    fn err(&mut self, section: Option<&str>, key: &str, msg: impl AsRef<str>) {
        let e = self.loc.error(section, key, msg.as_ref());
        self.errs.push(e);
    }

    fn section<'t>(&mut self, root: &'t Table, name: &str, allowed: &[&str]) -> Option<&'t Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => {
                for k in t.keys() {
                    if !allowed.contains(&k.as_str()) {
                        self.err(Some(name), k, "unknown key");
                    }
                }
                Some(t)
            }
            Some(_) => {
                self.err(None, name, "must be a section");
                None
            }
        }
    }

    fn number(&mut self, t: Option<&Table>, section: Option<&str>, key: &str) -> Option<f64> {
        let v = t?.get(key)?;
        match parse_scalar(v) {
            Ok(x) if x.is_finite() => Some(x),
            Ok(_) => {
                self.err(section, key, "must be finite");
                None
            }
            Err(m) => {
                self.err(section, key, m);
                None
            }
        }
    }

    fn ranged(&mut self, t: Option<&Table>, section: Option<&str>, key: &str, default: Option<f64>, range: Range) -> Option<f64> {
        let v = match self.number(t, section, key) {
            Some(v) => v,
            None if t.and_then(|t| t.get(key)).is_some() => return None,
            None => match default {
                Some(d) => return Some(d),
                None => {
                    self.err(section, key, "missing required field");
                    return None;
                }
            },
        };
        if range.contains(v) {
            Some(v)
        } else {
            self.err(section, key, format!("must lie in {}, got {v}", range.describe()));
            None
        }
    }

    fn count(&mut self, t: Option<&Table>, section: Option<&str>, key: &str, default: Option<usize>, max: usize) -> Option<usize> {
        match t.and_then(|t| t.get(key)) {
            None => {
                if default.is_none() {
                    self.err(section, key, "missing required field");
                }
                default
            }
            Some(Value::Integer(i)) if *i >= 1 && (*i as u64) <= max as u64 => Some(*i as usize),
            Some(Value::Integer(i)) => {
                self.err(section, key, format!("must lie in [1, {max}], got {i}"));
                None
            }
            Some(other) => {
                self.err(section, key, format!("expected an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn string<'t>(&mut self, t: Option<&'t Table>, section: Option<&str>, key: &str) -> Option<&'t str> {
        match t?.get(key)? {
            Value::String(s) => Some(s),
            other => {
                self.err(section, key, format!("expected a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn map_spec(&mut self, t: Option<&Table>, key: &str, default: MapSpec) -> Option<MapSpec> {
        let Some(v) = t.and_then(|t| t.get(key)) else {
            return Some(default);
        };
        let sec = Some("mesh");
        let (name, param) = match v {
            Value::String(s) => (s.as_str(), None),
            Value::Table(m) => {
                let Some(Value::String(name)) = m.get("name") else {
                    self.err(sec, key, "map table needs a string 'name'");
                    return None;
                };
                let pkey = match name.as_str() {
                    "tan_center" => "a",
                    "sin_boundary" => "b",
                    _ => "",
                };
                for k in m.keys() {
                    if k != "name" && k != pkey {
                        self.err(sec, &format!("{key}.{k}"), "unknown key");
                    }
                }
                let p = match m.get(pkey).map(parse_scalar) {
                    None => None,
                    Some(Ok(p)) => Some(p),
                    Some(Err(e)) => {
                        self.err(sec, &format!("{key}.{pkey}"), e);
                        return None;
                    }
                };
                (name.as_str(), p)
            }
            other => {
                self.err(sec, key, format!("expected a map name or table, got {}", other.type_str()));
                return None;
            }
        };
        let spec = match name {
            "identity" => MapSpec::Identity,
            "tan_center" => MapSpec::TanCenter(param),
            "sin_boundary" => MapSpec::SinBoundary(param),
            other => {
                self.err(sec, key, format!("unknown map '{other}' (identity, tan_center, sin_boundary)"));
                return None;
            }
        };
        if let Err(e) = spec.build() {
            self.err(sec, key, e.to_string());
            return None;
        }
        Some(spec)
    }

    fn sigma_spec(&mut self, t: Option<&Table>) -> Option<SigmaSpec> {
        let sec = Some("coefficients");
        if let Some(v) = t.and_then(|t| t.get("rho")) {
            if v.as_str() != Some("one") {
                self.err(sec, "rho", "only \"one\" is supported");
            }
        }
        match t.and_then(|t| t.get("sigma")) {
            None => Some(SigmaSpec::One),
            Some(Value::String(s)) if s == "one" => Some(SigmaSpec::One),
            Some(Value::Table(s)) => {
                for k in s.keys() {
                    if !["kind", "A", "kappa"].contains(&k.as_str()) {
                        self.err(sec, &format!("sigma.{k}"), "unknown key");
                    }
                }
                if s.get("kind").and_then(Value::as_str) != Some("oscillatory") {
                    self.err(sec, "sigma.kind", "must be \"oscillatory\"");
                    return None;
                }
                let amplitude = self.ranged(Some(s), sec, "A", None, Range::open(-1.0, f64::INFINITY));
                let kappa = match s.get("kappa") {
                    Some(Value::Integer(k)) if (1..=1000).contains(k) => Some(*k as u32),
                    Some(_) => {
                        self.err(sec, "sigma.kappa", "must be an integer in [1, 1000]");
                        None
                    }
                    None => {
                        self.err(sec, "sigma.kappa", "missing required field");
                        None
                    }
                };
                Some(SigmaSpec::Oscillatory { amplitude: amplitude?, kappa: kappa? })
            }
            Some(_) => {
                self.err(sec, "sigma", "expected \"one\" or { kind = \"oscillatory\", A = .., kappa = .. }");
                None
            }
        }
    }

    fn pair(&mut self, v: &Value, key: &str) -> Option<(f64, f64)> {
        let sec = Some("portrait");
        match v.as_array().map(|a| a.as_slice()) {
            Some([a, b]) => match (parse_scalar(a), parse_scalar(b)) {
                (Ok(a), Ok(b)) => Some((a, b)),
                (Err(e), _) | (_, Err(e)) => {
                    self.err(sec, key, e);
                    None
                }
            },
            _ => {
                self.err(sec, key, "expected a pair [a, b]");
                None
            }
        }
    }

    fn build(mut self, kind: Kind, preset: Option<String>, root: &Table) -> Option<ExperimentConfig> {
        let mut allowed = TOP_KEYS.to_vec();
        allowed.push("portrait");
        for k in root.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(None, k, "unknown key");
            }
        }
        let top = Some(root);
        let horizon = self.ranged(top, None, "T", Some(5.0), Range::open(0.0, 1e4));
        let cfl = self.ranged(top, None, "cfl", Some(0.1), Range { lo: 0.0, hi: 0.5, lo_closed: false, hi_closed: true });
        let dt_ray = self.ranged(top, None, "dt_ray", Some(1e-3), Range::open(0.0, 1.0));
        let stride = match root.get("stride") {
            None => Some(None),
            Some(_) => self.count(top, None, "stride", None, usize::MAX >> 1).map(Some),
        };
        let out = match self.string(top, None, "out") {
            Some("") => {
                self.err(None, "out", "must not be empty");
                None
            }
            s => Some(s.map(PathBuf::from)),
        };
        let method = match self.string(top, None, "method") {
            None | Some("leapfrog") => Some(Method2D::Leapfrog),
            Some("spectral") => Some(Method2D::Spectral),
            Some(m) => {
                self.err(None, "method", format!("unknown method '{m}' (leapfrog, spectral)"));
                None
            }
        };

        let mesh_t = self.section(root, "mesh", &MESH_KEYS);
        let max = match kind {
            k if k.is_2d() => MAX_NODES_2D,
            Kind::Spectrum => MAX_NODES_SPECTRUM,
            _ => MAX_NODES_1D,
        };
        let default_n = if kind.is_2d() { 100 } else { 200 };
        let map = self.map_spec(mesh_t, "map", MapSpec::Identity);
        let n = self.count(mesh_t, Some("mesh"), "n", Some(default_n), max);
        let map_y = map.and_then(|m| self.map_spec(mesh_t, "map_y", m));
        let n_y = n.and_then(|n| self.count(mesh_t, Some("mesh"), "n_y", Some(n), max));

        let coeff_t = self.section(root, "coefficients", &COEFF_KEYS);
        let sigma = self.sigma_spec(coeff_t);
        if kind.is_2d() && !matches!(sigma, Some(SigmaSpec::One) | None) {
            self.err(Some("coefficients"), "sigma", "2D experiments support only sigma = \"one\"");
        }

        let pk = self.section(root, "packet", &PACKET_KEYS);
        let ps = Some("packet");
        let needs_freq = !matches!(kind, Kind::Spectrum | Kind::Portrait);
        let angle = Range::closed(0.0, 2.0 * PI);
        // the 1D packet needs an interior centre; rays and 2D data may start on a wall
        let position = if kind == Kind::Simulate1d { Range::open(-1.0, 1.0) } else { Range::closed(-1.0, 1.0) };
        let x0 = self.ranged(pk, ps, "x0", Some(0.0), position);
        let y0 = self.ranged(pk, ps, "y0", Some(0.0), position);
        let xi0_default = if needs_freq { None } else { Some(PI) };
        let has_xi0 = pk.and_then(|t| t.get("xi0")).is_some();
        let xi0 = self.ranged(pk, ps, "xi0", xi0_default, angle);
        let eta0_default = if kind.is_2d() { None } else { Some(0.0) };
        let eta0 = self.ranged(pk, ps, "eta0", eta0_default, angle);
        let gamma = match pk.and_then(|t| t.get("gamma")) {
            None => Some(None),
            Some(_) => self.ranged(pk, ps, "gamma", None, Range::open(0.0, f64::INFINITY)).map(Some),
        };
        let branch = match self.string(pk, ps, "branch") {
            None | Some("plus") | Some("+") => Some(Branch::Plus),
            Some("minus") | Some("-") => Some(Branch::Minus),
            Some(b) => {
                self.err(ps, "branch", format!("unknown branch '{b}' (plus, minus)"));
                None
            }
        };

        let pt = self.section(root, "portrait", &PORTRAIT_KEYS);
        let mut seeds = Vec::new();
        match pt.and_then(|t| t.get("seeds")) {
            Some(Value::Array(items)) if !items.is_empty() => {
                for (i, item) in items.iter().enumerate() {
                    if let Some((x, xi)) = self.pair(item, "seeds") {
                        if !(-1.0..=1.0).contains(&x) || !angle.contains(xi) {
                            self.err(Some("portrait"), "seeds", format!("seed {i} = ({x}, {xi}) outside [-1, 1] x [0, 2pi]"));
                        }
                        seeds.push((x, xi));
                    }
                }
            }
            Some(_) => self.err(Some("portrait"), "seeds", "expected a non-empty array of [x, xi] pairs"),
            None if kind == Kind::Portrait => match (x0, xi0) {
                (Some(x), Some(xi)) if has_xi0 => seeds.push((x, xi)),
                _ => self.err(Some("portrait"), "seeds", "missing required field"),
            },
            None => {}
        }
        let window = match pt.and_then(|t| t.get("window")) {
            None => Some((-1.0, 1.0)),
            Some(v) => match self.pair(v, "window") {
                Some((lo, hi)) if lo < hi => Some((lo, hi)),
                Some(_) => {
                    self.err(Some("portrait"), "window", "needs lo < hi");
                    None
                }
                None => None,
            },
        };

        if let (Some(h), Some(d)) = (horizon, dt_ray) {
            if d > h {
                self.err(None, "dt_ray", format!("must not exceed T = {h}"));
            }
        }

        Some(ExperimentConfig {
            kind,
            preset,
            horizon: horizon?,
            cfl: cfl?,
            dt_ray: dt_ray?,
            stride: stride?,
            out: out?,
            method: method?,
            mesh: MeshSpec { map: map?, n: n?, map_y: map_y?, n_y: n_y? },
            sigma: sigma?,
            packet: PacketParams { x0: x0?, y0: y0?, xi0: xi0?, eta0: eta0?, gamma: gamma?, branch: branch? },
            portrait: PortraitParams { seeds, window: window? },
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
    lo_closed: bool,
    hi_closed: bool,
}

impl Range {
    fn open(lo: f64, hi: f64) -> Self {
        Range { lo, hi, lo_closed: false, hi_closed: false }
    }

    fn closed(lo: f64, hi: f64) -> Self {
        Range { lo, hi, lo_closed: true, hi_closed: true }
    }

    fn contains(&self, v: f64) -> bool {
        let lo = if self.lo_closed { v >= self.lo } else { v > self.lo };
        let hi = if self.hi_closed { v <= self.hi } else { v < self.hi };
        lo && hi
    }

    fn describe(&self) -> String {
        format!(
            "{}{}, {}{}",
            if self.lo_closed { "[" } else { "(" },
            self.lo,
            self.hi,
            if self.hi_closed { "]" } else { ")" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "kind = \"ray1d\"\n[packet]\nxi0 = \"pi/4\"\n";

    #[test]
    fn scalar_expressions() {
        let cases = [("7pi/15", 7.0 * PI / 15.0), ("pi", PI), ("-pi/2", -PI / 2.0), ("2*pi", 2.0 * PI), ("0.25", 0.25), ("3/4", 0.75)];
        for (s, v) in cases {
            assert!((parse_expr(s).unwrap() - v).abs() < 1e-15, "{s}");
        }
        for bad in ["pie", "x", "pi/0", "", "pi2"] {
            assert!(parse_expr(bad).is_none(), "{bad}");
        }
    }

    #[test]
    fn minimal_config_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.kind, Kind::Ray1d);
        assert_eq!(cfg.packet.xi0, PI / 4.0);
        assert_eq!(cfg.horizon, 5.0);
        let again = parse_config(&serialize_config(&cfg)).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn range_error_names_the_key_and_line() {
        let err = parse_config("kind = \"ray1d\"\n\n[packet]\nxi0 = 7\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].key, "packet.xi0");
        assert_eq!(err.0[0].line, Some(4));
        assert!(err.0[0].message.contains("[0, 6.28"));
    }

    #[test]
    fn unknown_and_missing_keys() {
        let err = parse_config("kind = \"ray1d\"\ncolour = 3\n[mesh]\nm = 4\n").unwrap_err();
        let keys: Vec<&str> = err.0.iter().map(|e| e.key.as_str()).collect();
        assert!(keys.contains(&"colour") && keys.contains(&"mesh.m") && keys.contains(&"packet.xi0"), "{keys:?}");
        let colour = err.0.iter().find(|e| e.key == "colour").unwrap();
        assert_eq!(colour.line, Some(2));
        let missing = parse_config("[packet]\nxi0 = 1\n").unwrap_err();
        assert_eq!(missing.0[0].key, "kind");
    }

    #[test]
    fn syntax_errors_are_located() {
        let err = parse_config("kind = \"ray1d\"\nT = = 3\n").unwrap_err();
        assert_eq!(err.0[0].line, Some(2));
    }

    #[test]
    fn sigma_and_maps() {
        let text = "kind = \"simulate1d\"\n[mesh]\nmap = { name = \"tan_center\", a = 0.5 }\nn = 50\n\
                    [coefficients]\nsigma = { kind = \"oscillatory\", A = 2, kappa = 5 }\n[packet]\nxi0 = \"pi/7\"\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.mesh.map, MapSpec::TanCenter(Some(0.5)));
        assert_eq!(cfg.mesh.map_y, cfg.mesh.map);
        assert_eq!(cfg.sigma, SigmaSpec::Oscillatory { amplitude: 2.0, kappa: 5 });
        assert_eq!(parse_config(&serialize_config(&cfg)).unwrap(), cfg);
        let bad = parse_config("kind = \"ray2d\"\n[coefficients]\nsigma = { kind = \"oscillatory\", A = 1, kappa = 1 }\n[packet]\nxi0 = 1\neta0 = 1\n");
        assert!(bad.unwrap_err().0.iter().any(|e| e.key == "coefficients.sigma"));
    }

    #[test]
    fn kinds_conflict_with_subcommand() {
        let o = Overrides { kind: Some(Kind::Simulate1d), ..Default::default() };
        assert!(parse_config_with(MINIMAL, &o).is_err());
        let o = Overrides { kind: Some(Kind::Ray1d), preset: Some("fig-np1".into()), ..Default::default() };
        assert!(parse_config_with("", &o).is_err());
        let o = Overrides { kind: Some(Kind::Ray1d), preset: Some("fig-low".into()), stride: Some(7), ..Default::default() };
        let cfg = parse_config_with("", &o).unwrap();
        assert_eq!((cfg.kind, cfg.stride), (Kind::Ray1d, Some(7)));
    }

    #[test]
    fn file_values_override_the_preset() {
        let cfg = parse_config("preset = \"fig-low\"\nT = 2\n[packet]\nx0 = 0.1\n").unwrap();
        assert_eq!(cfg.horizon, 2.0);
        assert_eq!(cfg.packet.x0, 0.1);
        assert_eq!(cfg.packet.xi0, PI / 4.0);
        assert_eq!(cfg.mesh.map, MapSpec::TanCenter(None));
    }

    mod round_trip {
        use super::super::*;
        use proptest::prelude::*;

        fn map() -> impl Strategy<Value = MapSpec> {
            prop_oneof![
                Just(MapSpec::Identity),
                Just(MapSpec::TanCenter(None)),
                (0.1f64..1.5).prop_map(|a| MapSpec::TanCenter(Some(a))),
                (0.1f64..1.5).prop_map(|b| MapSpec::SinBoundary(Some(b))),
            ]
        }

        proptest! {
            #[test]
            fn serialize_then_parse_is_identity(
                kind in 0usize..4,
                horizon in 0.1f64..50.0,
                cfl in 0.01f64..0.5,
                n in 1usize..500,
                mx in map(),
                my in map(),
                x0 in -0.99f64..0.99,
                xi0 in 0.0f64..(2.0 * PI),
                eta0 in 0.0f64..(2.0 * PI),
                amp in prop::option::of(0.0f64..8.0),
                stride in prop::option::of(1usize..100),
                minus in any::<bool>(),
            ) {
                let kind = [Kind::Simulate1d, Kind::Ray1d, Kind::Ray2d, Kind::Period][kind];
                let sigma = match amp {
                    Some(a) if !kind.is_2d() => SigmaSpec::Oscillatory { amplitude: a, kappa: 3 },
                    _ => SigmaSpec::One,
                };
                let cfg = ExperimentConfig {
                    kind,
                    preset: None,
                    horizon,
                    cfl,
                    dt_ray: 1e-3,
                    stride,
                    out: None,
                    method: Method2D::Spectral,
                    mesh: MeshSpec { map: mx, n, map_y: my, n_y: n + 1 },
                    sigma,
                    packet: PacketParams {
                        x0,
                        y0: -x0,
                        xi0,
                        eta0,
                        gamma: None,
                        branch: if minus { Branch::Minus } else { Branch::Plus },
                    },
                    portrait: PortraitParams { seeds: Vec::new(), window: (-1.0, 1.0) },
                };
                let text = serialize_config(&cfg);
                prop_assert_eq!(parse_config(&text).unwrap(), cfg);
            }
        }
    }
}
