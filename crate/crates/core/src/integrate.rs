//! Fixed-step trajectory integration with invariant monitoring.
//!
//! `rk4_rodrigues` is a fourth-order commutator-free Lie-group Runge-Kutta
//! scheme on R^3 x S^2: the position update is classical RK4, and every
//! direction update (stages and the final two-exponential update) is an exact
//! axis-angle rotation, so `|n| = 1` holds to rounding. `rk4_naive` applies
//! classical RK4 to `n` as a plain vector and is kept for comparison.

use std::fmt;

use crate::error::{Result, TtpError};
use crate::fields::{FieldProvider, FluidSample};
use crate::kinetics::{
    isobaric_normal, relative_velocity, rhs_from_sample, thermal_velocity, OmegaRoute,
    StateDerivative, TtpState, DEFAULT_EPS_GRAD,
};
use crate::linalg::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4Rodrigues,
    Rk4Naive,
}

impl std::str::FromStr for Method {
    type Err = TtpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4_rodrigues" => Ok(Method::Rk4Rodrigues),
            "rk4_naive" => Ok(Method::Rk4Naive),
            other => Err(TtpError::validation(
                "integrator.method",
                format!("expected rk4_rodrigues or rk4_naive, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4Rodrigues => "rk4_rodrigues",
            Method::Rk4Naive => "rk4_naive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    /// Renormalize `n` every this many steps; `None` never.
    pub renormalize_every: Option<usize>,
    /// Project `n` onto the isobaric tangent plane every this many steps; `None` never.
    pub project_tangency_every: Option<usize>,
    pub eps_grad: f64,
    pub omega_route: OmegaRoute,
    /// Project a non-tangent initial direction instead of rejecting it.
    pub project_initial: bool,
    /// Largest accepted `|n0 . b|` at the initial point.
    pub tangency_tolerance: f64,
    /// Treat a degenerate pressure gradient at any stage as an error.
    pub fail_on_degenerate: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            t_end: 1.0,
            method: Method::Rk4Rodrigues,
            renormalize_every: None,
            project_tangency_every: None,
            eps_grad: DEFAULT_EPS_GRAD,
            omega_route: OmegaRoute::Direct,
            project_initial: false,
            tangency_tolerance: 1e-9,
            fail_on_degenerate: false,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self, t0: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(TtpError::validation("integrator.dt", "dt must be positive"));
        }
        if !(self.t_end > t0) {
            return Err(TtpError::validation(
                "integrator.t_end",
                format!("t_end must exceed the initial time {t0}"),
            ));
        }
        if !(self.eps_grad >= 0.0) {
            return Err(TtpError::validation(
                "integrator.eps_grad",
                "eps_grad must be non-negative",
            ));
        }
        if self.renormalize_every == Some(0) || self.project_tangency_every == Some(0) {
            return Err(TtpError::validation(
                "integrator",
                "step intervals must be at least 1 (or `never`)",
            ));
        }
        Ok(())
    }

    /// Number of steps from `t0` to `t_end`; the last step is shortened when
    /// the span is not a whole number of `dt`.
    pub fn step_count(&self, t0: f64) -> usize {
        let ratio = (self.t_end - t0) / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest.max(1.0) as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// Rotates the unit vector `n` about `omega / |omega|` by `|omega| dt`.
/// The result is rescaled to unit length, which only removes rounding.
pub fn rotate_unit(n: &Vec3, omega: &Vec3, dt: f64) -> Vec3 {
    let rate = omega.norm();
    if rate == 0.0 || dt == 0.0 {
        return *n;
    }
    let axis = omega / rate;
    let (s, c) = (rate * dt).sin_cos();
    let rotated = n * c + axis.cross(n) * s + axis * (axis.dot(n) * (1.0 - c));
    // the rounded (c, s) pair scales the norm by the same factor every step
    rotated / rotated.norm()
}

fn evaluate(
    provider: &dyn FieldProvider,
    t: f64,
    r: Vec3,
    n: Vec3,
    beta: f64,
    config: &IntegratorConfig,
) -> Result<(StateDerivative, FluidSample)> {
    let sample = provider.sample(&r, t)?;
    let state = TtpState { t, r, n, beta };
    let d = rhs_from_sample(&sample, &state, config.eps_grad, config.omega_route)?;
    if d.degenerate && config.fail_on_degenerate {
        return Err(TtpError::DegenerateGradient {
            magnitude: sample.grad_p1hat.norm(),
            eps_grad: config.eps_grad,
        });
    }
    Ok((d, sample))
}

/// Advances by `h`, returning the new state and whether any stage hit a
/// degenerate pressure gradient.
fn advance(
    state: &TtpState,
    provider: &dyn FieldProvider,
    config: &IntegratorConfig,
    h: f64,
) -> Result<(TtpState, bool)> {
    let TtpState { t, r, n, beta } = *state;
    let half = 0.5 * h;
    match config.method {
        Method::Rk4Rodrigues => {
            let (k1, _) = evaluate(provider, t, r, n, beta, config)?;
            let n2 = rotate_unit(&n, &k1.omega, half);
            let (k2, _) = evaluate(provider, t + half, r + half * k1.dr_dt, n2, beta, config)?;
            let n3 = rotate_unit(&n, &k2.omega, half);
            let (k3, _) = evaluate(provider, t + half, r + half * k2.dr_dt, n3, beta, config)?;
            let n4 = rotate_unit(&n2, &(k3.omega - 0.5 * k1.omega), h);
            let (k4, _) = evaluate(provider, t + h, r + h * k3.dr_dt, n4, beta, config)?;

            let r1 = r + h / 6.0 * (k1.dr_dt + 2.0 * k2.dr_dt + 2.0 * k3.dr_dt + k4.dr_dt);
            let first = (3.0 * k1.omega + 2.0 * k2.omega + 2.0 * k3.omega - k4.omega) / 12.0;
            let second = (-k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + 3.0 * k4.omega) / 12.0;
            let n1 = rotate_unit(&rotate_unit(&n, &first, h), &second, h);
            let degenerate = k1.degenerate || k2.degenerate || k3.degenerate || k4.degenerate;
            Ok((
                TtpState {
                    t: t + h,
                    r: r1,
                    n: n1,
                    beta,
                },
                degenerate,
            ))
        }
        Method::Rk4Naive => {
            let (k1, _) = evaluate(provider, t, r, n, beta, config)?;
            let (k2, _) = evaluate(
                provider,
                t + half,
                r + half * k1.dr_dt,
                n + half * k1.dn_dt,
                beta,
                config,
            )?;
            let (k3, _) = evaluate(
                provider,
                t + half,
                r + half * k2.dr_dt,
                n + half * k2.dn_dt,
                beta,
                config,
            )?;
            let (k4, _) = evaluate(
                provider,
                t + h,
                r + h * k3.dr_dt,
                n + h * k3.dn_dt,
                beta,
                config,
            )?;
            let r1 = r + h / 6.0 * (k1.dr_dt + 2.0 * k2.dr_dt + 2.0 * k3.dr_dt + k4.dr_dt);
            let n1 = n + h / 6.0 * (k1.dn_dt + 2.0 * k2.dn_dt + 2.0 * k3.dn_dt + k4.dn_dt);
            let degenerate = k1.degenerate || k2.degenerate || k3.degenerate || k4.degenerate;
            Ok((
                TtpState {
                    t: t + h,
                    r: r1,
                    n: n1,
                    beta,
                },
                degenerate,
            ))
        }
    }
}

/// One step of size `config.dt`. With `rk4_naive` the returned direction is
/// not renormalized; `integrate_trajectory` applies `renormalize_every`.
pub fn step(
    state: &TtpState,
    provider: &dyn FieldProvider,
    config: &IntegratorConfig,
) -> Result<TtpState> {
    advance(state, provider, config, config.dt).map(|(s, _)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepFlags {
    pub degenerate: bool,
    pub renormalized: bool,
    pub projected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub r: Vec3,
    pub n: Vec3,
    pub u: Vec3,
    /// Lab-frame particle velocity `V + u`.
    pub v: Vec3,
    pub v_th: f64,
    pub p1hat: f64,
    /// `None` where the pressure gradient is degenerate.
    pub b: Option<Vec3>,
    pub n_dot_b: f64,
    pub norm_err: f64,
    pub omega: Vec3,
    /// `| |u| - beta v_th |`, relative to `beta v_th` when that is non-zero.
    pub constraint_residual: f64,
    pub flags: StepFlags,
}

impl TrajectoryRecord {
    pub fn from_state(
        state: &TtpState,
        sample: &FluidSample,
        config: &IntegratorConfig,
        flags: StepFlags,
    ) -> Result<Self> {
        let v_th = thermal_velocity(sample)?;
        let u = relative_velocity(state, sample)?;
        let b = isobaric_normal(sample, config.eps_grad).vector();
        let d = rhs_from_sample(sample, state, config.eps_grad, config.omega_route)?;
        let expected = state.beta * v_th;
        let mismatch = (u.norm() - expected).abs();
        Ok(TrajectoryRecord {
            t: state.t,
            r: state.r,
            n: state.n,
            u,
            v: sample.v + u,
            v_th,
            p1hat: sample.p1hat,
            b,
            n_dot_b: b.map_or(0.0, |b| state.n.dot(&b)),
            norm_err: (state.n.norm() - 1.0).abs(),
            omega: d.omega,
            constraint_residual: if expected > 0.0 {
                mismatch / expected
            } else {
                mismatch
            },
            flags: StepFlags {
                degenerate: flags.degenerate || b.is_none(),
                ..flags
            },
        })
    }

    pub fn state(&self, beta: f64) -> TtpState {
        TtpState {
            t: self.t,
            r: self.r,
            n: self.n,
            beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// The particle left the provider's domain (or valid pressure region).
    DomainExit {
        t: f64,
        reason: String,
    },
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Completed => write!(f, "completed"),
            Termination::DomainExit { t, reason } => write!(f, "domain exit after t={t}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSummary {
    pub steps: usize,
    pub max_norm_err: f64,
    pub max_abs_n_dot_b: f64,
    pub max_constraint_residual: f64,
    /// Records whose step or evaluation point had a degenerate pressure gradient.
    pub degenerate_steps: usize,
    pub termination: Termination,
    /// Divergence of the reduced `(r, n)` vector field at the first and last records.
    pub divergence_initial: f64,
    pub divergence_final: f64,
}

impl fmt::Display for InvariantSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "termination = {}", self.termination)?;
        writeln!(f, "max_norm_err = {:.6e}", self.max_norm_err)?;
        writeln!(f, "max_abs_n_dot_b = {:.6e}", self.max_abs_n_dot_b)?;
        writeln!(
            f,
            "max_constraint_residual = {:.6e}",
            self.max_constraint_residual
        )?;
        writeln!(f, "degenerate_steps = {}", self.degenerate_steps)?;
        writeln!(f, "divergence_initial = {:.6e}", self.divergence_initial)?;
        write!(f, "divergence_final = {:.6e}", self.divergence_final)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub beta: f64,
    pub records: Vec<TrajectoryRecord>,
    pub summary: InvariantSummary,
}

impl Trajectory {
    pub fn final_state(&self) -> TtpState {
        self.records
            .last()
            .expect("trajectory has an initial record")
            .state(self.beta)
    }
}

fn project_onto_tangent(n: &Vec3, b: &Vec3) -> Vec3 {
    (n - b * b.dot(n)).normalize()
}

/// Checks (or, with `project_initial`, enforces) `n0 . b = 0` at the start.
pub fn prepare_initial_state(
    state0: &TtpState,
    provider: &dyn FieldProvider,
    config: &IntegratorConfig,
) -> Result<TtpState> {
    let sample = provider.sample(&state0.r, state0.t)?;
    let mut state = *state0;
    if let Some(b) = isobaric_normal(&sample, config.eps_grad).vector() {
        let n_dot_b = state.n.dot(&b).abs();
        if n_dot_b > config.tangency_tolerance {
            if !config.project_initial {
                return Err(TtpError::InitialTangencyViolation {
                    n_dot_b,
                    tolerance: config.tangency_tolerance,
                });
            }
            let projected = state.n - b * b.dot(&state.n);
            if projected.norm() < 1e-12 {
                return Err(TtpError::validation(
                    "n0",
                    "initial direction is parallel to the pressure gradient and cannot be projected",
                ));
            }
            state.n = projected.normalize();
        }
    }
    Ok(state)
}

fn is_domain_exit(err: &TtpError) -> bool {
    matches!(
        err,
        TtpError::OutOfDomain { .. } | TtpError::NegativePressure { .. }
    )
}

pub fn integrate_trajectory(
    state0: &TtpState,
    provider: &dyn FieldProvider,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate(state0.t)?;
    let mut state = prepare_initial_state(state0, provider, config)?;
    let first = provider.sample(&state.r, state.t)?;
    let mut records = vec![TrajectoryRecord::from_state(
        &state,
        &first,
        config,
        StepFlags::default(),
    )?];

    let t0 = state.t;
    let steps = config.step_count(t0);
    let mut termination = Termination::Completed;
    for k in 0..steps {
        let t_next = if k + 1 == steps {
            config.t_end
        } else {
            t0 + (k + 1) as f64 * config.dt
        };
        let h = t_next - state.t;
        let (mut next, degenerate) = match advance(&state, provider, config, h) {
            Ok(v) => v,
            Err(e) if is_domain_exit(&e) => {
                termination = Termination::DomainExit {
                    t: state.t,
                    reason: e.to_string(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        next.t = t_next;
        let mut flags = StepFlags {
            degenerate,
            ..Default::default()
        };
        if config.renormalize_every.is_some_and(|m| (k + 1) % m == 0) {
            next.n = next.n.normalize();
            flags.renormalized = true;
        }
        let sample = match provider.sample(&next.r, next.t) {
            Ok(s) => s,
            Err(e) if is_domain_exit(&e) => {
                termination = Termination::DomainExit {
                    t: state.t,
                    reason: e.to_string(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        if config
            .project_tangency_every
            .is_some_and(|m| (k + 1) % m == 0)
        {
            if let Some(b) = isobaric_normal(&sample, config.eps_grad).vector() {
                next.n = project_onto_tangent(&next.n, &b);
                flags.projected = true;
            }
        }
        records.push(TrajectoryRecord::from_state(&next, &sample, config, flags)?);
        state = next;
    }

    let divergence_initial =
        reduced_divergence(&records[0].state(state0.beta), provider, config, 1e-5)
            .unwrap_or(f64::NAN);
    let divergence_final = reduced_divergence(&state, provider, config, 1e-5).unwrap_or(f64::NAN);
    let summary = InvariantSummary {
        steps: records.len() - 1,
        max_norm_err: records.iter().map(|r| r.norm_err).fold(0.0, f64::max),
        max_abs_n_dot_b: records.iter().map(|r| r.n_dot_b.abs()).fold(0.0, f64::max),
        max_constraint_residual: records
            .iter()
            .map(|r| r.constraint_residual)
            .fold(0.0, f64::max),
        degenerate_steps: records.iter().filter(|r| r.flags.degenerate).count(),
        termination,
        divergence_initial,
        divergence_final,
    };
    Ok(Trajectory {
        beta: state0.beta,
        records,
        summary,
    })
}

/// Divergence of the reduced vector field `(V + u, Omega x n)` on R^3 x S^2 at
/// `state`, by central differences of step `h`. The spatial part holds `n`
/// fixed; the sphere part differentiates along great circles through `n`.
pub fn reduced_divergence(
    state: &TtpState,
    provider: &dyn FieldProvider,
    config: &IntegratorConfig,
    h: f64,
) -> Result<f64> {
    let eval = |r: Vec3, n: Vec3| -> Result<StateDerivative> {
        evaluate(provider, state.t, r, n, state.beta, config).map(|(d, _)| d)
    };
    let mut div = 0.0;
    for i in 0..3 {
        let e = Vec3::ith(i, h);
        let plus = eval(state.r + e, state.n)?;
        let minus = eval(state.r - e, state.n)?;
        div += (plus.dr_dt[i] - minus.dr_dt[i]) / (2.0 * h);
    }
    let n = state.n.normalize();
    let helper = if n.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    let (s, c) = h.sin_cos();
    for e in [e1, e2] {
        let plus = eval(state.r, c * n + s * e)?;
        let minus = eval(state.r, c * n - s * e)?;
        div += e.dot(&(plus.dn_dt - minus.dn_dt)) / (2.0 * h);
    }
    Ok(div)
}
