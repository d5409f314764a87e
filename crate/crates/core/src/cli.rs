//! Command-line runner: `simulate`, `ensemble`, `verify` and `fields`.
//!
//! Exit codes: 0 success, 2 config or validation failure, 3 runtime error.
//! Diagnostics go to standard error; artifacts are written under the
//! configured output directory.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_config, OutputFormat, RunConfig};
use crate::ensemble::{evolve_ensemble, seed_tangent_circle, EnsembleRun};
use crate::error::{Result, TtpError};
use crate::fields::{
    build_provider, fd_verify_derivatives, register_builtin_providers, write_grid, FieldProvider,
};
use crate::integrate::{integrate_trajectory, Trajectory};
use crate::linalg::Vec3;
use crate::verify::{
    convergence_study, omega_fd_convergence, omega_identity_sweep, tangency_cancellation_sweep,
    tangency_drift_study,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const TRAJECTORY_HEADER: &str =
    "t,rx,ry,rz,nx,ny,nz,ux,uy,uz,vx,vy,vz,vth,p1hat,bx,by,bz,n_dot_b,norm_err,degenerate_flag";
pub const STATS_HEADER: &str = "t,n_effective,mean_vx,mean_vy,mean_vz,mean_ux,mean_uy,mean_uz,cov_uxx,cov_uxy,cov_uxz,cov_uyy,cov_uyz,cov_uzz";

#[derive(Debug, Parser)]
#[command(
    name = "ttp",
    version,
    about = "Thermal tracer particle dynamics and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one particle and write its trajectory and invariant summary.
    Simulate(RunArgs),
    /// Evolve a tangent-circle ensemble and write its moment time series.
    Ensemble(RunArgs),
    /// Run the identity sweeps and the drift and convergence studies.
    Verify(RunArgs),
    /// List providers, check their derivatives, or export one to a grid file.
    Fields(FieldsArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run configuration file.
    config: PathBuf,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// Override `output.directory`.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FieldsArgs {
    /// Check a provider's derivatives against finite differences.
    #[arg(long, value_name = "NAME")]
    check: Option<String>,
    /// Sample a provider on a regular grid and write a grid file.
    #[arg(long, value_name = "NAME", conflicts_with = "check")]
    export: Option<String>,
    /// Provider parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-4)]
    h: f64,
    /// Number of random check points in the provider's sweep box.
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Sample time.
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    /// Largest accepted relative residual.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Grid nodes per axis for --export.
    #[arg(long, default_value_t = 33)]
    nodes: usize,
    /// Grid lower corner for --export, `x,y,z`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lo: Option<Vec<f64>>,
    /// Grid upper corner for --export, `x,y,z`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    hi: Option<Vec<f64>>,
    /// Output path for --export.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => with_config(a, out, simulate),
        Command::Ensemble(a) => with_config(a, out, ensemble),
        Command::Verify(a) => with_config(a, out, verify),
        Command::Fields(a) => fields(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn with_config(
    args: RunArgs,
    out: &mut dyn Write,
    action: fn(&RunConfig, &mut dyn Write) -> Result<()>,
) -> Result<()> {
    let mut config = parse_config(&args.config).map_err(|e| match e {
        TtpError::Io { path, message } => {
            TtpError::validation("config", format!("{path}: {message}"))
        }
        other => other,
    })?;
    if let Some(dir) = args.output {
        config.output.directory = dir;
    }
    if args.print_config {
        return emit(out, &config.render());
    }
    action(&config, out)
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| TtpError::io("<stdout>", e))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| TtpError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| TtpError::io(&path, e))?;
    Ok(path)
}

fn strided(len: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..len).filter(move |k| k % stride == 0 || *k + 1 == len)
}

/// Trajectory CSV with every `stride`-th record and the last one.
pub fn trajectory_csv(traj: &Trajectory, stride: usize) -> String {
    let mut s = String::with_capacity(traj.records.len() / stride.max(1) * 400 + 200);
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    let nan = Vec3::repeat(f64::NAN);
    for k in strided(traj.records.len(), stride.max(1)) {
        let r = &traj.records[k];
        let b = r.b.unwrap_or(nan);
        let fields = [
            r.t, r.r.x, r.r.y, r.r.z, r.n.x, r.n.y, r.n.z, r.u.x, r.u.y, r.u.z, r.v.x, r.v.y,
            r.v.z, r.v_th, r.p1hat, b.x, b.y, b.z, r.n_dot_b, r.norm_err,
        ];
        for x in fields {
            let _ = write!(s, "{x:.16e},");
        }
        let _ = writeln!(s, "{}", u8::from(r.flags.degenerate));
    }
    s
}

pub fn stats_csv(run: &EnsembleRun) -> String {
    let mut s = String::from(STATS_HEADER);
    s.push('\n');
    for snap in &run.series {
        let st = &snap.stats;
        let c = &st.cov_u;
        let _ = write!(s, "{:.16e},{}", snap.t, st.n_effective);
        for x in [
            st.mean_v.x,
            st.mean_v.y,
            st.mean_v.z,
            st.mean_u.x,
            st.mean_u.y,
            st.mean_u.z,
            c[(0, 0)],
            c[(0, 1)],
            c[(0, 2)],
            c[(1, 1)],
            c[(1, 2)],
            c[(2, 2)],
        ] {
            let _ = write!(s, ",{x:.16e}");
        }
        s.push('\n');
    }
    s
}

fn header(provider: &dyn FieldProvider) -> String {
    let d = provider.descriptor();
    format!("provider = {}\nfield = {}\n", d.name, d.description)
}

fn simulate(config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let provider = config.provider()?;
    let state0 = config.initial_state(provider.as_ref())?;
    let traj = integrate_trajectory(&state0, provider.as_ref(), &config.integrator)?;
    let dir = &config.output.directory;
    let mut report = format!("{}{}\n", header(provider.as_ref()), traj.summary);
    if config.output.wants(OutputFormat::Csv) {
        let path = write_file(
            dir,
            "trajectory.csv",
            &trajectory_csv(&traj, config.output.stride),
        )?;
        let _ = writeln!(report, "trajectory = {}", path.display());
    }
    if config.output.wants(OutputFormat::Summary) {
        write_file(dir, "summary.txt", &report)?;
    }
    emit(out, &report)
}

fn ensemble(config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let provider = config.provider()?;
    let spec = config.ensemble_spec();
    provider.descriptor().check(&spec.r0, spec.t0)?;
    let states = seed_tangent_circle(&spec, provider.as_ref())?;
    let run = evolve_ensemble(
        &states,
        provider.as_ref(),
        &config.integrator,
        config.output.stride,
    )?;
    let first = run.series.first().expect("series has the seed time");
    let last = run.series.last().expect("series has the final time");
    let mut report = format!(
        "{}count = {}\nsampling = {}\noutput_times = {}\n",
        header(provider.as_ref()),
        spec.count,
        spec.sampling,
        run.series.len()
    );
    let _ = writeln!(
        report,
        "initial |mean_u| = {:.6e}",
        first.stats.mean_u.norm()
    );
    let _ = writeln!(
        report,
        "final t = {} n_effective = {} excluded = {} |mean_u| = {:.6e}",
        last.t,
        last.stats.n_effective,
        last.excluded,
        last.stats.mean_u.norm()
    );
    let dir = &config.output.directory;
    if config.output.wants(OutputFormat::Csv) {
        let path = write_file(dir, "ensemble_stats.csv", &stats_csv(&run))?;
        let _ = writeln!(report, "stats = {}", path.display());
    }
    if config.output.wants(OutputFormat::Summary) {
        write_file(dir, "summary.txt", &report)?;
    }
    emit(out, &report)
}

fn verify(config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let provider = config.provider()?;
    let p = provider.as_ref();
    let v = &config.verify;
    let dir = &config.output.directory;
    let csv = config.output.wants(OutputFormat::Csv);
    let mut report = header(p);

    let sweep = omega_identity_sweep(p, v.points, v.seed, v.h, v.t)?;
    let _ = writeln!(report, "{sweep}");
    if csv {
        write_file(dir, "omega_identity.csv", &sweep.to_csv())?;
    }

    let (cancel, used) = tangency_cancellation_sweep(p, v.points, v.seed, v.t)?;
    let _ = writeln!(
        report,
        "tangency cancellation: max relative {cancel:.3e} over {used} states"
    );

    let fd = omega_fd_convergence(p, v.points, v.seed, &v.h_list, v.t)?;
    let _ = writeln!(report, "{fd}");
    if csv {
        write_file(
            dir,
            "omega_fd_convergence.csv",
            &fd.to_csv("median_residual"),
        )?;
    }

    let state0 = config.initial_state(p)?;
    let drift = tangency_drift_study(p, &state0, &v.dt_list, &config.integrator)?;
    let _ = writeln!(report, "{drift}");
    if csv {
        write_file(dir, "tangency_drift.csv", &drift.to_csv("max_norm_err"))?;
    }

    match convergence_study(p, &state0, &v.dt_list, &config.integrator) {
        Ok(conv) => {
            let _ = writeln!(report, "{conv}");
            if csv {
                write_file(dir, "convergence.csv", &conv.to_csv("direction_error"))?;
            }
        }
        Err(TtpError::NoOracle(name)) => {
            let _ = writeln!(
                report,
                "convergence study skipped: `{name}` has no closed-form oracle"
            );
        }
        Err(e) => return Err(e),
    }
    if config.output.wants(OutputFormat::Summary) {
        write_file(dir, "verify_report.txt", &report)?;
    }
    emit(out, &report)
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, f64>> {
    raw.iter()
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                TtpError::validation("--param", format!("expected KEY=VALUE, got `{kv}`"))
            })?;
            let value = v.trim().parse().map_err(|_| {
                TtpError::validation(
                    format!("field.{}", k.trim()),
                    format!("not a number: `{v}`"),
                )
            })?;
            Ok((k.trim().to_string(), value))
        })
        .collect()
}

fn fields(args: FieldsArgs, out: &mut dyn Write) -> Result<()> {
    let params = parse_params(&args.params)?;
    if let Some(name) = &args.check {
        return check_provider(name, &params, &args, out);
    }
    if let Some(name) = &args.export {
        return export_provider(name, &params, &args, out);
    }
    let mut s = String::new();
    for d in register_builtin_providers() {
        let params: Vec<String> = d
            .parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let _ = writeln!(s, "{:<20} {}", d.name, d.description);
        let _ = writeln!(
            s,
            "{:<20} parameters: {}; time_dependent={}; domain={}",
            "",
            params.join(" "),
            d.time_dependent,
            d.domain_bounds
        );
    }
    let _ = writeln!(
        s,
        "{:<20} gridded field loaded from a TTPGRID file (name = grid, grid = <path>)",
        "grid"
    );
    emit(out, &s)
}

fn check_provider(
    name: &str,
    params: &BTreeMap<String, f64>,
    args: &FieldsArgs,
    out: &mut dyn Write,
) -> Result<()> {
    if !(args.h > 0.0) || args.points == 0 {
        return Err(TtpError::validation("--h", "h and points must be positive"));
    }
    let provider = build_provider(name, params)?;
    let (lo, hi) = provider.descriptor().sweep_box;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..args.points {
        let r = Vec3::from_fn(|i, _| rng.random_range(lo[i]..=hi[i]));
        let rep = fd_verify_derivatives(provider.as_ref(), &r, args.t, args.h)?;
        for (w, x) in worst.iter_mut().zip([
            rep.grad_v,
            rep.grad_p1hat,
            rep.hess_p1hat,
            rep.dt_grad_p1hat,
        ]) {
            *w = w.max(x);
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    let mut s = format!(
        "fd derivative check: provider={name} h={:e} t={} points={}\n",
        args.h, args.t, args.points
    );
    for (label, w) in ["grad_v", "grad_p1hat", "hess_p1hat", "dt_grad_p1hat"]
        .iter()
        .zip(worst)
    {
        let _ = writeln!(s, "  {label:<14} max relative residual {w:.3e}");
    }
    let pass = max < args.tolerance;
    let _ = writeln!(
        s,
        "max residual {max:.3e} {} tolerance {:e}: {}",
        if pass { "<" } else { ">=" },
        args.tolerance,
        if pass { "ok" } else { "FAILED" }
    );
    emit(out, &s)?;
    if pass {
        Ok(())
    } else {
        Err(TtpError::CheckFailed(format!(
            "derivatives of `{name}` disagree with finite differences: max residual {max:.3e}"
        )))
    }
}

fn export_provider(
    name: &str,
    params: &BTreeMap<String, f64>,
    args: &FieldsArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let (Some(lo), Some(hi), Some(path)) = (&args.lo, &args.hi, &args.out) else {
        return Err(TtpError::validation(
            "--export",
            "--lo, --hi and --out are required",
        ));
    };
    if lo.len() != 3 || hi.len() != 3 {
        return Err(TtpError::validation(
            "--lo",
            "corners take three comma-separated numbers",
        ));
    }
    if args.nodes < 2 {
        return Err(TtpError::validation("--nodes", "at least 2 nodes per axis"));
    }
    let lo = Vec3::new(lo[0], lo[1], lo[2]);
    let hi = Vec3::new(hi[0], hi[1], hi[2]);
    if (0..3).any(|i| !(lo[i] < hi[i])) {
        return Err(TtpError::validation(
            "--lo",
            "lo must be below hi on every axis",
        ));
    }
    let provider = build_provider(name, params)?;
    let spacing = (hi - lo) / (args.nodes - 1) as f64;
    write_grid(
        path,
        provider.as_ref(),
        [args.nodes; 3],
        lo,
        spacing,
        args.t,
    )?;
    emit(
        out,
        &format!(
            "wrote {}^3 grid of `{name}` at t={} to {}\n",
            args.nodes,
            args.t,
            path.display()
        ),
    )
}
