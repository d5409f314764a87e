//! Verification campaigns: the `Omega` identity against finite differences,
//! the decomposition residual, tangency drift and trajectory convergence.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ensemble::tangent_frame;
use crate::error::{Result, TtpError};
use crate::fields::FieldProvider;
use crate::integrate::{integrate_trajectory, IntegratorConfig};
use crate::kinetics::{
    isobaric_normal, normal_rate, omega_decomposed, omega_direct, relative_velocity, TtpState,
};
use crate::linalg::{log_log_slope, Vec3};

/// Gradient threshold for sweep points; nearly-degenerate points are skipped.
const SWEEP_EPS_GRAD: f64 = 1e-6;
/// Below this `|Omega|` residuals are reported as absolute values.
const OMEGA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub r: Vec3,
    pub n: Vec3,
    pub beta: f64,
    pub omega_norm: f64,
    /// `|Omega - b x db/dt|_fd`, relative to `|Omega|` above a small floor.
    pub fd_residual: f64,
    /// `|omega_direct - omega_decomposed|`.
    pub decomposition_residual: f64,
    /// Same, relative to `|omega_direct|` above the floor.
    pub decomposition_relative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub provider: String,
    pub h: f64,
    pub t: f64,
    pub points: Vec<SweepPoint>,
    /// Candidates rejected for a (near-)degenerate gradient or a stencil leaving the domain.
    pub skipped: usize,
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn median_of(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    if values.len().is_multiple_of(2) {
        0.5 * (values[m - 1] + values[m])
    } else {
        values[m]
    }
}

impl SweepReport {
    pub fn max_fd_residual(&self) -> f64 {
        max_of(self.points.iter().map(|p| p.fd_residual))
    }

    pub fn median_fd_residual(&self) -> f64 {
        median_of(self.points.iter().map(|p| p.fd_residual).collect())
    }

    pub fn max_decomposition_residual(&self) -> f64 {
        max_of(self.points.iter().map(|p| p.decomposition_relative))
    }

    pub fn median_decomposition_residual(&self) -> f64 {
        median_of(
            self.points
                .iter()
                .map(|p| p.decomposition_relative)
                .collect(),
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "rx,ry,rz,nx,ny,nz,beta,omega_norm,fd_residual,decomposition_residual,decomposition_relative\n",
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                p.r.x, p.r.y, p.r.z, p.n.x, p.n.y, p.n.z, p.beta, p.omega_norm,
                p.fd_residual, p.decomposition_residual, p.decomposition_relative
            );
        }
        out
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "omega identity sweep: provider={} h={:e} t={}",
            self.provider, self.h, self.t
        )?;
        writeln!(f, "  points={} skipped={}", self.points.len(), self.skipped)?;
        writeln!(
            f,
            "  b x db/dt vs finite differences: max={:.3e} median={:.3e}",
            self.max_fd_residual(),
            self.median_fd_residual()
        )?;
        write!(
            f,
            "  direct vs decomposed (reported only): max={:.3e} median={:.3e}",
            self.max_decomposition_residual(),
            self.median_decomposition_residual()
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    r: Vec3,
    angle: f64,
    beta: f64,
}

fn candidates(provider: &dyn FieldProvider, count: usize, seed: u64) -> Vec<Candidate> {
    let (lo, hi) = provider.descriptor().sweep_box;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| Candidate {
            r: Vec3::from_fn(|i, _| rng.random_range(lo[i]..=hi[i])),
            angle: rng.random_range(0.0..std::f64::consts::TAU),
            beta: rng.random_range(0.2..1.5),
        })
        .collect()
}

/// Builds a tangent state at a candidate point, or `None` if the gradient is
/// (nearly) degenerate there.
fn tangent_state(provider: &dyn FieldProvider, c: &Candidate, t: f64) -> Result<Option<TtpState>> {
    let sample = provider.sample(&c.r, t)?;
    Ok(isobaric_normal(&sample, SWEEP_EPS_GRAD).vector().map(|b| {
        let (e1, e2) = tangent_frame(&b);
        TtpState {
            t,
            r: c.r,
            n: c.angle.cos() * e1 + c.angle.sin() * e2,
            beta: c.beta,
        }
    }))
}

fn sweep_point(
    provider: &dyn FieldProvider,
    state: &TtpState,
    h: f64,
) -> Result<Option<SweepPoint>> {
    let sample = provider.sample(&state.r, state.t)?;
    let omega = omega_direct(&sample, state, SWEEP_EPS_GRAD)?;
    let breakdown = omega_decomposed(&sample, state, SWEEP_EPS_GRAD)?;
    let b = isobaric_normal(&sample, SWEEP_EPS_GRAD)
        .vector()
        .expect("checked by caller");
    let w = sample.v + relative_velocity(state, &sample)?;
    let normal_at = |sign: f64| -> Result<Option<Vec3>> {
        let s = provider.sample(&(state.r + sign * h * w), state.t + sign * h)?;
        Ok(isobaric_normal(&s, SWEEP_EPS_GRAD).vector())
    };
    let (Some(b_plus), Some(b_minus)) = (normal_at(1.0)?, normal_at(-1.0)?) else {
        return Ok(None);
    };
    let omega_fd = b.cross(&((b_plus - b_minus) / (2.0 * h)));
    let norm = omega.norm();
    let scale = |x: f64| if norm > OMEGA_FLOOR { x / norm } else { x };
    Ok(Some(SweepPoint {
        r: state.r,
        n: state.n,
        beta: state.beta,
        omega_norm: norm,
        fd_residual: scale((omega - omega_fd).norm()),
        decomposition_residual: breakdown.residual,
        decomposition_relative: scale(breakdown.residual),
    }))
}

fn tolerable(err: &TtpError) -> bool {
    matches!(
        err,
        TtpError::OutOfDomain { .. }
            | TtpError::NegativePressure { .. }
            | TtpError::DegenerateGradient { .. }
    )
}

/// Compares `omega_direct` at random tangent states with `b x db/dt` where
/// `db/dt` is a central difference of `b` along the particle path,
/// `[b(r + h w, t + h) - b(r - h w, t - h)] / 2h` with `w = V + u`. Also
/// records the residual between the direct and decomposed routes.
pub fn omega_identity_sweep(
    provider: &dyn FieldProvider,
    n_points: usize,
    seed: u64,
    h: f64,
    t: f64,
) -> Result<SweepReport> {
    let evaluated: Vec<Result<Option<SweepPoint>>> = candidates(provider, n_points, seed)
        .par_iter()
        .map(|c| match tangent_state(provider, c, t)? {
            Some(state) => sweep_point(provider, &state, h),
            None => Ok(None),
        })
        .collect();
    let mut points = Vec::with_capacity(n_points);
    let mut skipped = 0;
    for item in evaluated {
        match item {
            Ok(Some(p)) => points.push(p),
            Ok(None) => skipped += 1,
            Err(e) if tolerable(&e) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(SweepReport {
        provider: provider.name().to_string(),
        h,
        t,
        points,
        skipped,
    })
}

/// Largest relative value of `(Omega x n) . b + n . db/dt` over random tangent
/// states. Zero in exact arithmetic: `d(n . b)/dt` vanishes along the flow.
pub fn tangency_cancellation_sweep(
    provider: &dyn FieldProvider,
    n_points: usize,
    seed: u64,
    t: f64,
) -> Result<(f64, usize)> {
    let results: Vec<Result<Option<f64>>> = candidates(provider, n_points, seed)
        .par_iter()
        .map(|c| {
            let Some(state) = tangent_state(provider, c, t)? else {
                return Ok(None);
            };
            let sample = provider.sample(&state.r, t)?;
            let b = isobaric_normal(&sample, SWEEP_EPS_GRAD)
                .vector()
                .expect("tangent state");
            let omega = omega_direct(&sample, &state, SWEEP_EPS_GRAD)?;
            let b_dot = normal_rate(&sample, &state, SWEEP_EPS_GRAD)?;
            let value = omega.cross(&state.n).dot(&b) + state.n.dot(&b_dot);
            let scale = omega.norm().max(b_dot.norm());
            Ok(Some(if scale > 0.0 {
                value.abs() / scale
            } else {
                value.abs()
            }))
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for r in results {
        match r {
            Ok(Some(v)) => {
                worst = worst.max(v);
                used += 1;
            }
            Ok(None) => {}
            Err(e) if tolerable(&e) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((worst, used))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    /// Step size (`dt` or `h`).
    pub step: f64,
    pub error: f64,
    /// Secondary column: norm error for drift studies, direction error for
    /// convergence studies, median residual for sweeps.
    pub aux: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub label: String,
    pub rows: Vec<OrderRow>,
    /// Least-squares log-log slope; `None` when some error is zero
    /// (rounding floor) or non-finite.
    pub fitted_order: Option<f64>,
}

impl OrderTable {
    fn new(label: impl Into<String>, rows: Vec<OrderRow>) -> Self {
        let usable = rows.iter().all(|r| r.error > 0.0 && r.error.is_finite());
        let fitted_order = usable.then(|| {
            let xs: Vec<f64> = rows.iter().map(|r| r.step).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.error).collect();
            log_log_slope(&xs, &ys)
        });
        OrderTable {
            label: label.into(),
            rows,
            fitted_order,
        }
    }

    /// Orders between consecutive rows.
    pub fn pairwise_orders(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[0].error / w[1].error).ln() / (w[0].step / w[1].step).ln())
            .collect()
    }

    pub fn to_csv(&self, aux_name: &str) -> String {
        let mut out = format!("step,error,{aux_name}\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", r.step, r.error, r.aux);
        }
        out
    }
}

impl fmt::Display for OrderTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.label)?;
        for r in &self.rows {
            writeln!(
                f,
                "  step={:<10e} error={:.6e} aux={:.3e}",
                r.step, r.error, r.aux
            )?;
        }
        match self.fitted_order {
            Some(p) => write!(f, "  fitted order = {p:.3}"),
            None => write!(f, "  fitted order = n/a (errors at rounding floor)"),
        }
    }
}

fn require_points(len: usize) -> Result<()> {
    if len < 3 {
        Err(TtpError::TooFewPoints {
            needed: 3,
            got: len,
        })
    } else {
        Ok(())
    }
}

/// Maximum fd residual of the identity sweep at several `h`, same points.
pub fn omega_fd_convergence(
    provider: &dyn FieldProvider,
    n_points: usize,
    seed: u64,
    hs: &[f64],
    t: f64,
) -> Result<OrderTable> {
    require_points(hs.len())?;
    let rows = hs
        .iter()
        .map(|&h| {
            let rep = omega_identity_sweep(provider, n_points, seed, h, t)?;
            Ok(OrderRow {
                step: h,
                error: rep.max_fd_residual(),
                aux: rep.median_fd_residual(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderTable::new(
        format!("omega fd residual vs h ({})", provider.name()),
        rows,
    ))
}

/// Maximum `|n . b|` over a run for each `dt`, with tangency projection off.
pub fn tangency_drift_study(
    provider: &dyn FieldProvider,
    state0: &TtpState,
    dt_list: &[f64],
    base: &IntegratorConfig,
) -> Result<OrderTable> {
    require_points(dt_list.len())?;
    let rows = dt_list
        .par_iter()
        .map(|&dt| {
            let config = IntegratorConfig {
                dt,
                project_tangency_every: None,
                ..*base
            };
            let traj = integrate_trajectory(state0, provider, &config)?;
            Ok(OrderRow {
                step: dt,
                error: traj.summary.max_abs_n_dot_b,
                aux: traj.summary.max_norm_err,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderTable::new(
        format!(
            "tangency drift max|n.b| vs dt ({}, {})",
            provider.name(),
            base.method
        ),
        rows,
    ))
}

/// Global position error at `base.t_end` against the provider's closed-form
/// trajectory, for each `dt`. `aux` holds the direction error `|n - n_exact|`.
pub fn convergence_study(
    provider: &dyn FieldProvider,
    state0: &TtpState,
    dt_list: &[f64],
    base: &IntegratorConfig,
) -> Result<OrderTable> {
    let oracle = provider
        .oracle()
        .ok_or_else(|| TtpError::NoOracle(provider.name().to_string()))?;
    require_points(dt_list.len())?;
    let exact = oracle.exact_state(state0, base.t_end)?;
    let rows = dt_list
        .par_iter()
        .map(|&dt| {
            let config = IntegratorConfig { dt, ..*base };
            let traj = integrate_trajectory(state0, provider, &config)?;
            let end = traj.final_state();
            Ok(OrderRow {
                step: dt,
                error: (end.r - exact.r).norm(),
                aux: (end.n - exact.n).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderTable::new(
        format!(
            "global position error vs dt ({}, {})",
            provider.name(),
            base.method
        ),
        rows,
    ))
}
