//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [field]
//! name = taylor_green
//! nu = 0.05
//!
//! [particle]
//! r0 = 0.4 1.2 0.3
//! auto_tangent = true
//! beta = 0.8
//!
//! [integrator]
//! dt = 1e-3
//! t_end = 2
//! ```
//!
//! Sections are `[field]`, `[particle]`, `[integrator]`, `[ensemble]`,
//! `[output]` and `[verify]`; every key is optional and unknown keys are
//! errors. `#` starts a comment. Vectors are three whitespace-separated
//! numbers. [`RunConfig::render`] writes every value with 17 significant
//! digits, and its output parses back to an identical config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ensemble::{tangent_frame, EnsembleSpec, Sampling};
use crate::error::{Result, TtpError};
use crate::fields::{build_provider, load_grid, lookup, Bounded, FieldProvider, Interpolation};
use crate::integrate::{IntegratorConfig, Method};
use crate::kinetics::{isobaric_normal, OmegaRoute, TtpState};
use crate::linalg::Vec3;

/// Field name that selects a gridded provider loaded from `grid`.
pub const GRID_FIELD: &str = "grid";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub name: String,
    /// Overrides of the builtin provider's parameters.
    pub parameters: BTreeMap<String, f64>,
    pub grid: Option<PathBuf>,
    pub interpolation: Interpolation,
    /// Optional box restricting the provider's domain.
    pub bounds: Option<(Vec3, Vec3)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDirection {
    Explicit(Vec3),
    /// First vector of the tangent frame of `b(r0, t0)`, or `x` where the
    /// pressure gradient is degenerate.
    AutoTangent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    pub r0: Vec3,
    pub t0: f64,
    pub direction: InitialDirection,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub count: usize,
    pub sampling: Sampling,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Summary,
}

impl FromStr for OutputFormat {
    type Err = TtpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "summary" => Ok(OutputFormat::Summary),
            other => Err(TtpError::validation(
                "output.formats",
                format!("expected csv or summary, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Summary => "summary",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// Write every `stride`-th record (the last record is always written).
    pub stride: usize,
}

impl OutputConfig {
    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub points: usize,
    pub seed: u64,
    /// Sample time of the sweeps.
    pub t: f64,
    /// Step of the single-`h` identity sweep.
    pub h: f64,
    pub h_list: Vec<f64>,
    pub dt_list: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub field: FieldConfig,
    pub particle: ParticleConfig,
    pub integrator: IntegratorConfig,
    pub ensemble: EnsembleConfig,
    pub output: OutputConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            field: FieldConfig {
                name: "uniform".into(),
                parameters: BTreeMap::new(),
                grid: None,
                interpolation: Interpolation::Tricubic,
                bounds: None,
            },
            particle: ParticleConfig {
                r0: Vec3::zeros(),
                t0: 0.0,
                direction: InitialDirection::AutoTangent,
                beta: 1.0,
            },
            integrator: IntegratorConfig::default(),
            ensemble: EnsembleConfig {
                count: 64,
                sampling: Sampling::EquispacedCircle,
                seed: 0,
            },
            output: OutputConfig {
                directory: PathBuf::from("out"),
                formats: vec![OutputFormat::Csv, OutputFormat::Summary],
                stride: 1,
            },
            verify: VerifyConfig {
                points: 1000,
                seed: 1,
                t: 0.0,
                h: 1e-5,
                h_list: vec![4e-3, 2e-3, 1e-3],
                dt_list: vec![4e-3, 2e-3, 1e-3],
            },
        }
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TtpError::io(path, e))?;
    let mut config = parse_config_str(&text)?;
    // relative grid paths are resolved against the config file
    if let (Some(grid), Some(dir)) = (&config.field.grid, path.parent()) {
        if grid.is_relative() {
            config.field.grid = Some(dir.join(grid));
        }
    }
    Ok(config)
}

struct Entry {
    line: usize,
    value: String,
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    const SECTIONS: [&str; 6] = [
        "field",
        "particle",
        "integrator",
        "ensemble",
        "output",
        "verify",
    ];
    let mut entries: BTreeMap<(String, String), Entry> = BTreeMap::new();
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(TtpError::Parse {
                    line,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(TtpError::Parse {
                line,
                message: format!("expected `key = value` or `[section]`, got `{content}`"),
            });
        };
        let Some(sec) = &section else {
            return Err(TtpError::Parse {
                line,
                message: "key before the first [section]".into(),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(TtpError::Parse {
                line,
                message: "empty key or value".into(),
            });
        }
        if entries.contains_key(&(sec.clone(), key.clone())) {
            return Err(TtpError::Parse {
                line,
                message: format!("duplicate key `{sec}.{key}`"),
            });
        }
        entries.insert((sec.clone(), key), Entry { line, value });
    }
    build(entries)
}

fn parse_err(entry: &Entry, key: &str, what: &str) -> TtpError {
    TtpError::Parse {
        line: entry.line,
        message: format!("`{key}`: expected {what}, got `{}`", entry.value),
    }
}

fn number(entry: &Entry, key: &str) -> Result<f64> {
    entry
        .value
        .parse()
        .map_err(|_| parse_err(entry, key, "a number"))
}

fn integer<T: FromStr>(entry: &Entry, key: &str) -> Result<T> {
    entry
        .value
        .parse()
        .map_err(|_| parse_err(entry, key, "a non-negative integer"))
}

fn boolean(entry: &Entry, key: &str) -> Result<bool> {
    entry
        .value
        .parse()
        .map_err(|_| parse_err(entry, key, "true or false"))
}

fn list(entry: &Entry, key: &str) -> Result<Vec<f64>> {
    entry
        .value
        .split_whitespace()
        .map(|s| {
            s.parse()
                .map_err(|_| parse_err(entry, key, "whitespace-separated numbers"))
        })
        .collect()
}

fn vector(entry: &Entry, key: &str) -> Result<Vec3> {
    match list(entry, key)?.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(parse_err(entry, key, "three numbers")),
    }
}

fn every(entry: &Entry, key: &str) -> Result<Option<usize>> {
    if entry.value == "never" {
        Ok(None)
    } else {
        integer(entry, key).map(Some)
    }
}

fn keyed<T: FromStr<Err = TtpError>>(entry: &Entry, key: &str) -> Result<T> {
    entry.value.parse::<T>().map_err(|e| match e {
        TtpError::Validation { message, .. } => TtpError::validation(key, message),
        other => other,
    })
}

fn build(entries: BTreeMap<(String, String), Entry>) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    let mut bounds_min = None;
    let mut bounds_max = None;
    let mut n0 = None;
    let mut auto_tangent = None;
    let mut field_params = Vec::new();

    for ((section, key), e) in &entries {
        let full = format!("{section}.{key}");
        let k = full.as_str();
        match k {
            "field.name" => c.field.name = e.value.clone(),
            "field.grid" => c.field.grid = Some(PathBuf::from(&e.value)),
            "field.interpolation" => c.field.interpolation = keyed(e, k)?,
            "field.bounds_min" => bounds_min = Some(vector(e, k)?),
            "field.bounds_max" => bounds_max = Some(vector(e, k)?),
            _ if section == "field" => field_params.push((key.clone(), number(e, k)?)),

            "particle.r0" => c.particle.r0 = vector(e, k)?,
            "particle.t0" => c.particle.t0 = number(e, k)?,
            "particle.n0" => n0 = Some(vector(e, k)?),
            "particle.auto_tangent" => auto_tangent = Some(boolean(e, k)?),
            "particle.beta" => c.particle.beta = number(e, k)?,

            "integrator.dt" => c.integrator.dt = number(e, k)?,
            "integrator.t_end" => c.integrator.t_end = number(e, k)?,
            "integrator.method" => c.integrator.method = keyed::<Method>(e, k)?,
            "integrator.renormalize_every" => c.integrator.renormalize_every = every(e, k)?,
            "integrator.project_tangency_every" => {
                c.integrator.project_tangency_every = every(e, k)?
            }
            "integrator.eps_grad" => c.integrator.eps_grad = number(e, k)?,
            "integrator.omega_route" => c.integrator.omega_route = keyed::<OmegaRoute>(e, k)?,
            "integrator.project_initial" => c.integrator.project_initial = boolean(e, k)?,
            "integrator.tangency_tolerance" => c.integrator.tangency_tolerance = number(e, k)?,
            "integrator.on_degenerate" => {
                c.integrator.fail_on_degenerate = match e.value.as_str() {
                    "freeze" => false,
                    "fail" => true,
                    _ => return Err(TtpError::validation(k, "expected freeze or fail")),
                }
            }

            "ensemble.count" => c.ensemble.count = integer(e, k)?,
            "ensemble.sampling" => c.ensemble.sampling = keyed::<Sampling>(e, k)?,
            "ensemble.seed" => c.ensemble.seed = integer(e, k)?,

            "output.directory" => c.output.directory = PathBuf::from(&e.value),
            "output.formats" => {
                c.output.formats = e
                    .value
                    .split(',')
                    .map(|s| s.trim().parse::<OutputFormat>())
                    .collect::<Result<_>>()?
            }
            "output.stride" => c.output.stride = integer(e, k)?,

            "verify.points" => c.verify.points = integer(e, k)?,
            "verify.seed" => c.verify.seed = integer(e, k)?,
            "verify.t" => c.verify.t = number(e, k)?,
            "verify.h" => c.verify.h = number(e, k)?,
            "verify.h_list" => c.verify.h_list = list(e, k)?,
            "verify.dt_list" => c.verify.dt_list = list(e, k)?,

            _ => return Err(TtpError::validation(k, "unknown key")),
        }
    }

    c.field.bounds = match (bounds_min, bounds_max) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => {
            return Err(TtpError::validation(
                "field.bounds_min",
                "bounds_min and bounds_max must be given together",
            ))
        }
    };
    if c.field.name == GRID_FIELD {
        if c.field.grid.is_none() {
            return Err(TtpError::validation(
                "field.grid",
                "a grid field needs a `grid` file",
            ));
        }
        if let Some((key, _)) = field_params.first() {
            return Err(TtpError::validation(
                format!("field.{key}"),
                "grid fields take no parameters",
            ));
        }
    } else {
        let desc = lookup(&c.field.name)?;
        if c.field.grid.is_some() {
            return Err(TtpError::validation(
                "field.grid",
                "only valid with `name = grid`",
            ));
        }
        for (key, value) in field_params {
            if !desc.parameters.contains_key(&key) {
                return Err(TtpError::validation(
                    format!("field.{key}"),
                    format!("`{}` has no parameter `{key}`", desc.name),
                ));
            }
            c.field.parameters.insert(key, value);
        }
    }

    c.particle.direction = match (n0, auto_tangent) {
        (Some(_), Some(_)) => {
            return Err(TtpError::validation(
                "particle.n0",
                "give exactly one of n0 and auto_tangent",
            ))
        }
        (Some(n), None) => InitialDirection::Explicit(n),
        (None, Some(false)) => {
            return Err(TtpError::validation(
                "particle.auto_tangent",
                "auto_tangent = false requires n0",
            ))
        }
        (None, _) => InitialDirection::AutoTangent,
    };
    c.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.particle;
        if !(p.r0.iter().all(|x| x.is_finite()) && p.t0.is_finite()) {
            return Err(TtpError::validation(
                "particle.r0",
                "r0 and t0 must be finite",
            ));
        }
        if !(p.beta.is_finite() && p.beta >= 0.0) {
            return Err(TtpError::validation(
                "particle.beta",
                "beta must be finite and non-negative",
            ));
        }
        if let InitialDirection::Explicit(n) = p.direction {
            if (n.norm() - 1.0).abs() > crate::kinetics::UNIT_TOLERANCE {
                return Err(TtpError::validation(
                    "particle.n0",
                    "n0 must be a unit vector",
                ));
            }
        }
        self.integrator.validate(p.t0)?;
        if self.ensemble.count == 0 {
            return Err(TtpError::validation(
                "ensemble.count",
                "count must be at least 1",
            ));
        }
        if self.output.stride == 0 {
            return Err(TtpError::validation(
                "output.stride",
                "stride must be at least 1",
            ));
        }
        if self.output.formats.is_empty() {
            return Err(TtpError::validation(
                "output.formats",
                "at least one format is required",
            ));
        }
        let v = &self.verify;
        if v.points == 0 {
            return Err(TtpError::validation(
                "verify.points",
                "points must be at least 1",
            ));
        }
        if !(v.h > 0.0) || v.h_list.iter().chain(&v.dt_list).any(|x| !(*x > 0.0)) {
            return Err(TtpError::validation("verify", "steps must be positive"));
        }
        if let Some((lo, hi)) = self.field.bounds {
            if (0..3).any(|i| !(lo[i] < hi[i])) {
                return Err(TtpError::validation(
                    "field.bounds_min",
                    "bounds_min must be below bounds_max",
                ));
            }
        }
        Ok(())
    }

    /// Builds the configured provider, restricted to `bounds` when given.
    pub fn provider(&self) -> Result<Box<dyn FieldProvider>> {
        let f = &self.field;
        let inner: Box<dyn FieldProvider> = match &f.grid {
            Some(path) => Box::new(load_grid(path, f.interpolation)?),
            None => build_provider(&f.name, &f.parameters)?,
        };
        Ok(match f.bounds {
            Some((lo, hi)) => Box::new(Bounded::new(inner, lo, hi)?),
            None => inner,
        })
    }

    /// The particle's initial state; the position must lie in the domain.
    pub fn initial_state(&self, provider: &dyn FieldProvider) -> Result<TtpState> {
        let p = &self.particle;
        let n = match p.direction {
            InitialDirection::Explicit(n) => n,
            InitialDirection::AutoTangent => {
                let sample = provider.sample(&p.r0, p.t0)?;
                match isobaric_normal(&sample, self.integrator.eps_grad).vector() {
                    Some(b) => tangent_frame(&b).0,
                    None => Vec3::x(),
                }
            }
        };
        provider.descriptor().check(&p.r0, p.t0)?;
        TtpState::new(p.t0, p.r0, n, p.beta)
    }

    pub fn ensemble_spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            r0: self.particle.r0,
            t0: self.particle.t0,
            count: self.ensemble.count,
            sampling: self.ensemble.sampling,
            seed: self.ensemble.seed,
            beta: self.particle.beta,
            eps_grad: self.integrator.eps_grad,
        }
    }

    /// The full config with every default made explicit.
    pub fn render(&self) -> String {
        let mut o = String::new();
        let f = &self.field;
        let _ = writeln!(o, "[field]\nname = {}", f.name);
        for (k, v) in &f.parameters {
            let _ = writeln!(o, "{k} = {}", num(*v));
        }
        if let Some(g) = &f.grid {
            let _ = writeln!(o, "grid = {}", g.display());
        }
        let _ = writeln!(o, "interpolation = {}", f.interpolation);
        if let Some((lo, hi)) = f.bounds {
            let _ = writeln!(o, "bounds_min = {}\nbounds_max = {}", vec3(&lo), vec3(&hi));
        }

        let p = &self.particle;
        let _ = writeln!(o, "\n[particle]\nr0 = {}\nt0 = {}", vec3(&p.r0), num(p.t0));
        match p.direction {
            InitialDirection::Explicit(n) => {
                let _ = writeln!(o, "n0 = {}", vec3(&n));
            }
            InitialDirection::AutoTangent => {
                let _ = writeln!(o, "auto_tangent = true");
            }
        }
        let _ = writeln!(o, "beta = {}", num(p.beta));

        let i = &self.integrator;
        let _ = writeln!(
            o,
            "\n[integrator]\ndt = {}\nt_end = {}\nmethod = {}",
            num(i.dt),
            num(i.t_end),
            i.method
        );
        let _ = writeln!(o, "renormalize_every = {}", interval(i.renormalize_every));
        let _ = writeln!(
            o,
            "project_tangency_every = {}",
            interval(i.project_tangency_every)
        );
        let _ = writeln!(
            o,
            "eps_grad = {}\nomega_route = {}",
            num(i.eps_grad),
            i.omega_route
        );
        let _ = writeln!(
            o,
            "project_initial = {}\ntangency_tolerance = {}",
            i.project_initial,
            num(i.tangency_tolerance)
        );
        let _ = writeln!(
            o,
            "on_degenerate = {}",
            if i.fail_on_degenerate {
                "fail"
            } else {
                "freeze"
            }
        );

        let e = &self.ensemble;
        let _ = writeln!(
            o,
            "\n[ensemble]\ncount = {}\nsampling = {}\nseed = {}",
            e.count, e.sampling, e.seed
        );

        let out = &self.output;
        let formats: Vec<String> = out.formats.iter().map(|f| f.to_string()).collect();
        let _ = writeln!(
            o,
            "\n[output]\ndirectory = {}\nformats = {}\nstride = {}",
            out.directory.display(),
            formats.join(","),
            out.stride
        );

        let v = &self.verify;
        let _ = writeln!(
            o,
            "\n[verify]\npoints = {}\nseed = {}\nt = {}\nh = {}",
            v.points,
            v.seed,
            num(v.t),
            num(v.h)
        );
        let _ = writeln!(
            o,
            "h_list = {}\ndt_list = {}",
            nums(&v.h_list),
            nums(&v.dt_list)
        );
        o
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn nums(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

fn vec3(v: &Vec3) -> String {
    nums(v.as_slice())
}

fn interval(every: Option<usize>) -> String {
    every.map_or("never".to_string(), |k| k.to_string())
}
