//! Tangent-circle ensembles and their velocity moments.
//!
//! At the seed point every direction is drawn from the circle of unit
//! vectors orthogonal to `b`. With equispaced directions the circle averages
//! give `<n> = 0` and `<nn> = (1 - bb) / 2`, so the ensemble mean velocity
//! equals the fluid velocity exactly at the seed time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, TtpError};
use crate::fields::FieldProvider;
use crate::integrate::{integrate_trajectory, IntegratorConfig, Trajectory};
use crate::kinetics::{isobaric_normal, relative_velocity, TtpState};
use crate::linalg::{pairwise_sum, pairwise_sum_mat, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    #[default]
    EquispacedCircle,
    RandomCircle,
}

impl std::str::FromStr for Sampling {
    type Err = TtpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equispaced_circle" => Ok(Sampling::EquispacedCircle),
            "random_circle" => Ok(Sampling::RandomCircle),
            other => Err(TtpError::validation(
                "ensemble.sampling",
                format!("expected equispaced_circle or random_circle, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Sampling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sampling::EquispacedCircle => "equispaced_circle",
            Sampling::RandomCircle => "random_circle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub r0: Vec3,
    pub t0: f64,
    pub count: usize,
    pub sampling: Sampling,
    pub seed: u64,
    pub beta: f64,
    pub eps_grad: f64,
}

/// Right-handed orthonormal frame `(e1, e2, b)`:
/// `e1 = normalize(a x b)` with `a = z` unless `|b . z| > 0.9`, then `a = x`;
/// `e2 = b x e1`.
pub fn tangent_frame(b: &Vec3) -> (Vec3, Vec3) {
    let a = if b.z.abs() > 0.9 {
        Vec3::x()
    } else {
        Vec3::z()
    };
    let e1 = a.cross(b).normalize();
    let e2 = b.cross(&e1);
    (e1, e2)
}

fn seed_normal(spec: &EnsembleSpec, provider: &dyn FieldProvider) -> Result<Vec3> {
    if spec.count == 0 {
        return Err(TtpError::validation(
            "ensemble.count",
            "count must be at least 1",
        ));
    }
    let sample = provider.sample(&spec.r0, spec.t0)?;
    isobaric_normal(&sample, spec.eps_grad)
        .vector()
        .ok_or(TtpError::DegenerateGradient {
            magnitude: sample.grad_p1hat.norm(),
            eps_grad: spec.eps_grad,
        })
}

/// Seeds `count` particles at `r0` with directions on the tangent circle.
pub fn seed_tangent_circle(
    spec: &EnsembleSpec,
    provider: &dyn FieldProvider,
) -> Result<Vec<TtpState>> {
    let b = seed_normal(spec, provider)?;
    let (e1, e2) = tangent_frame(&b);
    Ok(seed_in_frame(spec, e1, e2))
}

/// As [`seed_tangent_circle`] but in the frame rotated by `angle` about `b`.
pub fn seed_tangent_circle_rotated(
    spec: &EnsembleSpec,
    provider: &dyn FieldProvider,
    angle: f64,
) -> Result<Vec<TtpState>> {
    let b = seed_normal(spec, provider)?;
    let (e1, e2) = tangent_frame(&b);
    let (s, c) = angle.sin_cos();
    Ok(seed_in_frame(spec, c * e1 + s * e2, c * e2 - s * e1))
}

fn seed_in_frame(spec: &EnsembleSpec, e1: Vec3, e2: Vec3) -> Vec<TtpState> {
    let angles: Vec<f64> = match spec.sampling {
        Sampling::EquispacedCircle => (0..spec.count)
            .map(|k| std::f64::consts::TAU * k as f64 / spec.count as f64)
            .collect(),
        Sampling::RandomCircle => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..spec.count)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect()
        }
    };
    angles
        .into_iter()
        .map(|a| TtpState {
            t: spec.t0,
            r: spec.r0,
            n: a.cos() * e1 + a.sin() * e2,
            beta: spec.beta,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleStats {
    pub mean_v: Vec3,
    pub mean_u: Vec3,
    /// Population covariance (1/N) of the relative velocity.
    pub cov_u: Mat3,
    pub n_effective: usize,
}

/// Moments from per-particle `(v, u)` pairs in a fixed order.
fn moments(velocities: &[(Vec3, Vec3)], t: f64) -> Result<EnsembleStats> {
    let n = velocities.len();
    if n == 0 {
        return Err(TtpError::EmptyEnsemble { t });
    }
    let inv = 1.0 / n as f64;
    let mean_v = pairwise_sum(velocities, &|p: &(Vec3, Vec3)| p.0) * inv;
    let mean_u = pairwise_sum(velocities, &|p: &(Vec3, Vec3)| p.1) * inv;
    let cov_u = pairwise_sum_mat(velocities, &|p: &(Vec3, Vec3)| {
        let d = p.1 - mean_u;
        d * d.transpose()
    }) * inv;
    Ok(EnsembleStats {
        mean_v,
        mean_u,
        cov_u,
        n_effective: n,
    })
}

/// Sample moments of `v = V + u` and `u` over states at a common time.
pub fn ensemble_stats(states: &[TtpState], provider: &dyn FieldProvider) -> Result<EnsembleStats> {
    let Some(first) = states.first() else {
        return Err(TtpError::EmptyEnsemble { t: f64::NAN });
    };
    if states.iter().any(|s| s.t != first.t) {
        return Err(TtpError::validation(
            "ensemble",
            "states must share a common time",
        ));
    }
    let velocities = states
        .par_iter()
        .map(|s| {
            let sample = provider.sample(&s.r, s.t)?;
            let u = relative_velocity(s, &sample)?;
            Ok((sample.v + u, u))
        })
        .collect::<Result<Vec<_>>>()?;
    moments(&velocities, first.t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSnapshot {
    pub t: f64,
    pub stats: EnsembleStats,
    /// Particles that left the domain before `t`.
    pub excluded: usize,
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub trajectories: Vec<Trajectory>,
    pub series: Vec<EnsembleSnapshot>,
}

/// Integrates every particle independently and records moments every
/// `stride` steps (and at the final step) over the particles still inside
/// the domain.
pub fn evolve_ensemble(
    states: &[TtpState],
    provider: &dyn FieldProvider,
    config: &IntegratorConfig,
    stride: usize,
) -> Result<EnsembleRun> {
    if stride == 0 {
        return Err(TtpError::validation(
            "output.stride",
            "stride must be at least 1",
        ));
    }
    let trajectories = states
        .par_iter()
        .map(|s| integrate_trajectory(s, provider, config))
        .collect::<Result<Vec<_>>>()?;
    let total = states.len();
    let t0 = states.first().map_or(0.0, |s| s.t);
    let steps = config.step_count(t0);
    let mut series = Vec::new();
    for k in (0..=steps).filter(|k| k % stride == 0 || *k == steps) {
        let velocities: Vec<(Vec3, Vec3)> = trajectories
            .iter()
            .filter_map(|tr| tr.records.get(k))
            .map(|rec| (rec.v, rec.u))
            .collect();
        let t = if k == steps {
            config.t_end
        } else {
            t0 + k as f64 * config.dt
        };
        let stats = moments(&velocities, t)?;
        series.push(EnsembleSnapshot {
            t,
            excluded: total - stats.n_effective,
            stats,
        });
    }
    Ok(EnsembleRun {
        trajectories,
        series,
    })
}
