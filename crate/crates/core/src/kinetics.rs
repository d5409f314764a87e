//! Constraint system and evolution law of a thermal tracer particle.
//!
//! The particle's relative velocity is `u = beta * v_th * n` with
//! `v_th = sqrt(2 p1hat)` and `|n| = 1`. The direction stays tangent to the
//! isobaric surface, `n . b = 0` with `b = grad p1hat / |grad p1hat|`, and
//! precesses as `dn/dt = Omega x n`, `Omega = b x db/dt`, where `db/dt` is
//! the total derivative of `b` along the particle path `dr/dt = V + u`.

use crate::error::{Result, TtpError};
use crate::fields::{FieldProvider, FluidSample};
use crate::linalg::{tangent_projector, Vec3};

/// Default threshold on `|grad p1hat|` below which `b` is undefined.
pub const DEFAULT_EPS_GRAD: f64 = 1e-10;

/// Largest tolerated `| |n| - 1 |` for a valid state.
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Reduced particle state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtpState {
    pub t: f64,
    pub r: Vec3,
    /// Unit direction of the relative velocity.
    pub n: Vec3,
    /// Thermal proportionality constant, fixed along a trajectory.
    pub beta: f64,
}

impl TtpState {
    pub fn new(t: f64, r: Vec3, n: Vec3, beta: f64) -> Result<Self> {
        if (n.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(TtpError::validation(
                "n0",
                format!("direction must be a unit vector, |n| = {}", n.norm()),
            ));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(TtpError::validation(
                "beta",
                "beta must be finite and non-negative",
            ));
        }
        if !(r.iter().all(|x| x.is_finite()) && t.is_finite()) {
            return Err(TtpError::validation(
                "r0",
                "position and time must be finite",
            ));
        }
        Ok(TtpState { t, r, n, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IsobaricNormal {
    Normal(Vec3),
    /// `|grad p1hat| <= eps_grad`: the isobaric surface is locally undefined.
    Degenerate,
}

impl IsobaricNormal {
    pub fn vector(&self) -> Option<Vec3> {
        match self {
            IsobaricNormal::Normal(b) => Some(*b),
            IsobaricNormal::Degenerate => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, IsobaricNormal::Degenerate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmegaRoute {
    /// `Omega = b x db/dt` from the chain rule.
    #[default]
    Direct,
    /// Convective split plus the printed tangential-vorticity / pressure-velocity terms.
    Decomposed,
}

impl std::str::FromStr for OmegaRoute {
    type Err = TtpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(OmegaRoute::Direct),
            "decomposed" => Ok(OmegaRoute::Decomposed),
            other => Err(TtpError::validation(
                "integrator.omega_route",
                format!("expected direct or decomposed, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for OmegaRoute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OmegaRoute::Direct => "direct",
            OmegaRoute::Decomposed => "decomposed",
        })
    }
}

pub fn isobaric_normal(sample: &FluidSample, eps_grad: f64) -> IsobaricNormal {
    let g = sample.grad_p1hat;
    let magnitude = g.norm();
    if magnitude > eps_grad {
        IsobaricNormal::Normal(g / magnitude)
    } else {
        IsobaricNormal::Degenerate
    }
}

/// `v_th = sqrt(2 p1hat)`.
pub fn thermal_velocity(sample: &FluidSample) -> Result<f64> {
    if sample.p1hat < 0.0 {
        return Err(TtpError::NegativePressure {
            p1hat: sample.p1hat,
            r: [f64::NAN; 3],
        });
    }
    Ok((2.0 * sample.p1hat).sqrt())
}

/// `u = beta v_th n`.
pub fn relative_velocity(state: &TtpState, sample: &FluidSample) -> Result<Vec3> {
    Ok(state.beta * thermal_velocity(sample)? * state.n)
}

fn require_normal(sample: &FluidSample, eps_grad: f64) -> Result<Vec3> {
    isobaric_normal(sample, eps_grad)
        .vector()
        .ok_or(TtpError::DegenerateGradient {
            magnitude: sample.grad_p1hat.norm(),
            eps_grad,
        })
}

/// Total derivative of `b` along the path `dr/dt = V + u`:
/// `db/dt = [1 - bb] (d_t g + H (V + u)) / |g|` with `g = grad p1hat`, `H` its Hessian.
pub fn normal_rate(sample: &FluidSample, state: &TtpState, eps_grad: f64) -> Result<Vec3> {
    let b = require_normal(sample, eps_grad)?;
    let w = sample.v + relative_velocity(state, sample)?;
    let dg = sample.dt_grad_p1hat + sample.hess_p1hat * w;
    Ok(tangent_projector(&b) * dg / sample.grad_p1hat.norm())
}

/// `Omega = b x db/dt`. Orthogonal to `b` by construction.
pub fn omega_direct(sample: &FluidSample, state: &TtpState, eps_grad: f64) -> Result<Vec3> {
    let b = require_normal(sample, eps_grad)?;
    Ok(b.cross(&normal_rate(sample, state, eps_grad)?))
}

/// Term-wise evaluation of the convective / vorticity / pressure-velocity
/// split of `Omega`, alongside the direct route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaBreakdown {
    pub omega_direct: Vec3,
    pub omega_decomposed: Vec3,
    /// `b x Db/Dt`, the fluid convective derivative `d_t + V . grad`.
    pub term_convective: Vec3,
    /// `-[1 - bb] xi`.
    pub term_vorticity: Vec3,
    /// `(1/|g|) [b x grad(g . V) - b x (g . grad) V]`.
    pub term_pressure_velocity: Vec3,
    /// `b x (u . grad) b`, the advective part the split is meant to reproduce.
    pub term_relative_advection: Vec3,
    /// `|omega_direct - omega_decomposed|`.
    pub residual: f64,
}

pub fn omega_decomposed(
    sample: &FluidSample,
    state: &TtpState,
    eps_grad: f64,
) -> Result<OmegaBreakdown> {
    let b = require_normal(sample, eps_grad)?;
    let g = sample.grad_p1hat;
    let g_norm = g.norm();
    let projector = tangent_projector(&b);
    let u = relative_velocity(state, sample)?;
    let h = &sample.hess_p1hat;

    let db_convective = projector * (sample.dt_grad_p1hat + h * sample.v) / g_norm;
    let term_convective = b.cross(&db_convective);
    let term_relative_advection = b.cross(&(projector * (h * u) / g_norm));

    let term_vorticity = -(projector * sample.xi);
    // grad(g . V)_i = H_ij V_j + g_j dV_j/dx_i
    let grad_g_dot_v = h * sample.v + sample.grad_v * g;
    // ((g . grad) V)_j = g_i dV_j/dx_i
    let g_dot_grad_v = sample.grad_v.transpose() * g;
    let term_pressure_velocity = (b.cross(&grad_g_dot_v) - b.cross(&g_dot_grad_v)) / g_norm;

    let omega_direct = term_convective + term_relative_advection;
    let omega_decomposed = term_convective + term_vorticity + term_pressure_velocity;
    Ok(OmegaBreakdown {
        omega_direct,
        omega_decomposed,
        term_convective,
        term_vorticity,
        term_pressure_velocity,
        term_relative_advection,
        residual: (omega_direct - omega_decomposed).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dr_dt: Vec3,
    pub dn_dt: Vec3,
    /// Rotation vector used for `dn_dt = omega x n` (zero when degenerate).
    pub omega: Vec3,
    pub degenerate: bool,
}

/// Right-hand side from an already-evaluated sample. `n` need not be exactly
/// unit here; stage values of the naive integrator drift off the sphere.
pub fn rhs_from_sample(
    sample: &FluidSample,
    state: &TtpState,
    eps_grad: f64,
    route: OmegaRoute,
) -> Result<StateDerivative> {
    let u = relative_velocity(state, sample)?;
    let (omega, degenerate) = match isobaric_normal(sample, eps_grad) {
        IsobaricNormal::Degenerate => (Vec3::zeros(), true),
        IsobaricNormal::Normal(_) => (
            match route {
                OmegaRoute::Direct => omega_direct(sample, state, eps_grad)?,
                OmegaRoute::Decomposed => {
                    omega_decomposed(sample, state, eps_grad)?.omega_decomposed
                }
            },
            false,
        ),
    };
    Ok(StateDerivative {
        dr_dt: sample.v + u,
        dn_dt: omega.cross(&state.n),
        omega,
        degenerate,
    })
}

/// `dr/dt = V + beta v_th n`, `dn/dt = Omega x n`. Where `|grad p1hat| <=
/// eps_grad` the rotation is frozen (`Omega = 0`) and the result is flagged.
pub fn state_rhs(
    state: &TtpState,
    provider: &dyn FieldProvider,
    eps_grad: f64,
    route: OmegaRoute,
) -> Result<StateDerivative> {
    let sample = provider.sample(&state.r, state.t)?;
    rhs_from_sample(&sample, state, eps_grad, route)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::build_provider;
    use crate::linalg::Mat3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn sample_with_grad(g: Vec3) -> FluidSample {
        FluidSample {
            v: Vec3::zeros(),
            grad_v: Mat3::zeros(),
            xi: Vec3::zeros(),
            p1hat: 0.5,
            grad_p1hat: g,
            hess_p1hat: Mat3::zeros(),
            dt_grad_p1hat: Vec3::zeros(),
        }
    }

    fn state(r: Vec3, n: Vec3, beta: f64) -> TtpState {
        TtpState::new(0.0, r, n, beta).unwrap()
    }

    #[test]
    fn normal_examples() {
        let b = isobaric_normal(&sample_with_grad(Vec3::new(2.0, 0.0, 0.0)), 1e-10);
        assert_eq!(b, IsobaricNormal::Normal(Vec3::new(1.0, 0.0, 0.0)));
        let b = isobaric_normal(&sample_with_grad(Vec3::new(1.0, 1.0, 0.0)), 1e-10)
            .vector()
            .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b - Vec3::new(s, s, 0.0)).norm() < 1e-15);
        assert!((b.norm() - 1.0).abs() < 1e-15);
        assert!(isobaric_normal(&sample_with_grad(Vec3::zeros()), 1e-10).is_degenerate());
    }

    #[test]
    fn thermal_velocity_examples() {
        let mut s = sample_with_grad(Vec3::zeros());
        for (p, v) in [(0.0, 0.0), (2.0, 2.0), (0.5, 1.0)] {
            s.p1hat = p;
            assert_eq!(thermal_velocity(&s).unwrap(), v);
        }
        s.p1hat = -1.0;
        assert!(matches!(
            thermal_velocity(&s),
            Err(TtpError::NegativePressure { .. })
        ));
    }

    #[test]
    fn relative_velocity_examples() {
        let mut s = sample_with_grad(Vec3::zeros());
        let u = relative_velocity(&state(Vec3::zeros(), Vec3::y(), 1.0), &s).unwrap();
        assert_eq!(u, Vec3::new(0.0, 1.0, 0.0));
        let u = relative_velocity(&state(Vec3::zeros(), Vec3::y(), 0.0), &s).unwrap();
        assert_eq!(u, Vec3::zeros());
        s.p1hat = 2.0;
        let u = relative_velocity(&state(Vec3::zeros(), Vec3::x(), 2.0), &s).unwrap();
        assert_eq!(u, Vec3::new(4.0, 0.0, 0.0));
    }

    #[test]
    fn state_rejects_non_unit_direction() {
        assert!(TtpState::new(0.0, Vec3::zeros(), Vec3::new(1.0, 1.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn constant_gradient_gives_zero_omega() {
        let mut p = BTreeMap::new();
        p.insert("gx".to_string(), 0.3);
        p.insert("gz".to_string(), -0.2);
        p.insert("vy".to_string(), 2.0);
        let provider = build_provider("uniform", &p).unwrap();
        let s = provider.sample(&Vec3::new(0.1, 0.2, 0.3), 0.0).unwrap();
        let b = isobaric_normal(&s, 1e-10).vector().unwrap();
        let n = b.cross(&Vec3::y()).normalize();
        let om = omega_direct(&s, &state(Vec3::zeros(), n, 1.0), 1e-10).unwrap();
        assert_eq!(om, Vec3::zeros());
    }

    // Closed form: in rigid rotation with p1hat = |r_perp|^2 / 2 a particle on
    // radius R with azimuthal n circles at rate 1 + beta v_th(R) / R, so b is
    // radial and turns at that rate: Omega = (1 + beta v_th / R) z.
    #[test]
    fn rigid_rotation_omega_closed_form() {
        let provider = build_provider("rigid_rotation", &BTreeMap::new()).unwrap();
        for (radius, beta) in [(1.0, 1.0), (0.5, 0.3), (2.0, 0.0)] {
            let r = Vec3::new(radius, 0.0, 0.4);
            let s = provider.sample(&r, 0.0).unwrap();
            let st = state(r, Vec3::y(), beta);
            let v_th: f64 = radius; // sqrt(2 * R^2 / 2)
            let expected = Vec3::new(0.0, 0.0, 1.0 + beta * v_th / radius);
            let om = omega_direct(&s, &st, 1e-10).unwrap();
            assert!((om - expected).norm() < 1e-14, "{om:?} vs {expected:?}");
            let d = state_rhs(&st, provider.as_ref(), 1e-10, OmegaRoute::Direct).unwrap();
            assert!((d.dn_dt.norm() - expected.norm()).abs() < 1e-14);
        }
    }

    #[test]
    fn rigid_rotation_decomposition_terms() {
        let provider = build_provider("rigid_rotation", &BTreeMap::new()).unwrap();
        let r = Vec3::new(1.0, 0.0, 0.0);
        let s = provider.sample(&r, 0.0).unwrap();
        let br = omega_decomposed(&s, &state(r, Vec3::y(), 1.0), 1e-10).unwrap();
        assert!((br.term_vorticity - Vec3::new(0.0, 0.0, -2.0)).norm() < 1e-15);
        // direct: 2 z; convective b x Db/Dt = 1 z; pressure-velocity:
        // g = (1,0,0), grad(g.V) = H V + gradV g = (0,1,0)... both cross terms
        // evaluated literally
        assert!((br.omega_direct - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-15);
        assert!((br.term_convective - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-15);
        assert!(
            (br.omega_direct - omega_direct(&s, &state(r, Vec3::y(), 1.0), 1e-10).unwrap()).norm()
                < 1e-15
        );
        assert!((br.residual - (br.omega_direct - br.omega_decomposed).norm()).abs() < 1e-15);
    }

    #[test]
    fn static_fluid_split_terms_vanish() {
        let mut p = BTreeMap::new();
        p.insert("vx".to_string(), 0.0);
        p.insert("gx".to_string(), 0.5);
        let provider = build_provider("uniform", &p).unwrap();
        let s = provider.sample(&Vec3::new(0.3, 0.0, 0.0), 0.0).unwrap();
        let br = omega_decomposed(&s, &state(Vec3::zeros(), Vec3::z(), 1.0), 1e-10).unwrap();
        assert_eq!(br.term_vorticity, Vec3::zeros());
        assert_eq!(br.term_pressure_velocity, Vec3::zeros());
    }

    #[test]
    fn degenerate_policy_freezes_direction() {
        let provider = build_provider("uniform", &BTreeMap::new()).unwrap();
        let st = TtpState::new(0.0, Vec3::zeros(), Vec3::y(), 1.0).unwrap();
        let d = state_rhs(&st, provider.as_ref(), 1e-10, OmegaRoute::Direct).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.dn_dt, Vec3::zeros());
        // V0 + beta sqrt(2) n
        assert_eq!(d.dr_dt, Vec3::new(1.0, 2f64.sqrt(), 0.0));
        let s = provider.sample(&Vec3::zeros(), 0.0).unwrap();
        assert!(matches!(
            omega_direct(&s, &st, 1e-10),
            Err(TtpError::DegenerateGradient { .. })
        ));
    }

    #[test]
    fn passive_tracer_moves_with_fluid() {
        let provider = build_provider("taylor_green", &BTreeMap::new()).unwrap();
        let r = Vec3::new(0.3, 1.1, 0.2);
        let s = provider.sample(&r, 0.0).unwrap();
        let b = isobaric_normal(&s, 1e-10).vector().unwrap();
        let n = b.cross(&Vec3::x()).normalize();
        let d = state_rhs(
            &state(r, n, 0.0),
            provider.as_ref(),
            1e-10,
            OmegaRoute::Direct,
        )
        .unwrap();
        assert_eq!(d.dr_dt, s.v);
        assert!(d.dn_dt.dot(&n).abs() < 1e-15);
    }

    #[test]
    fn tangency_is_conserved_by_the_continuous_flow() {
        // (Omega x n) . b + n . db/dt = 0 for the direct route
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for name in ["rigid_rotation", "taylor_green", "lamb_oseen"] {
            let provider = build_provider(name, &BTreeMap::new()).unwrap();
            let (lo, hi) = provider.descriptor().sweep_box;
            for _ in 0..200 {
                let r = Vec3::from_fn(|i, _| rng.random_range(lo[i]..hi[i]));
                let s = provider.sample(&r, 0.1).unwrap();
                let Some(b) = isobaric_normal(&s, 1e-6).vector() else {
                    continue;
                };
                let a = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                let n = b.cross(&a).normalize();
                let st = TtpState::new(0.1, r, n, rng.random_range(0.0..2.0)).unwrap();
                let om = omega_direct(&s, &st, 1e-6).unwrap();
                let bdot = normal_rate(&s, &st, 1e-6).unwrap();
                let lhs = om.cross(&n).dot(&b) + n.dot(&bdot);
                let scale = om.norm().max(bdot.norm()).max(f64::MIN_POSITIVE);
                assert!(lhs.abs() / scale < 1e-12, "{name}: {lhs}");
                assert!(om.dot(&b).abs() <= 1e-12 * om.norm().max(1e-300), "{name}");
            }
        }
    }
}
