//! Prescribed fluid fields.
//!
//! Every provider returns a [`FluidSample`] holding the velocity, its
//! gradient and curl, and the mass-normalized kinetic pressure `p1hat` with
//! the first and second spatial derivatives and the time derivative of its
//! gradient. Providers are immutable after construction and `sample` is a
//! pure function of `(r, t)`.

mod analytic;
mod grid;

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Result, TtpError};
use crate::kinetics::TtpState;
use crate::linalg::{curl_from_gradient, Mat3, Vec3};

pub use analytic::{LambOseen, RigidRotation, TaylorGreen, Uniform};
pub use grid::{load_grid, parse_grid, render_grid, write_grid, GridProvider, Interpolation};

/// Local fluid-field data at one `(r, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidSample {
    pub v: Vec3,
    /// `grad_v[(i, j)] = dV_j / dx_i`.
    pub grad_v: Mat3,
    pub xi: Vec3,
    pub p1hat: f64,
    pub grad_p1hat: Vec3,
    pub hess_p1hat: Mat3,
    pub dt_grad_p1hat: Vec3,
}

impl FluidSample {
    /// Largest component-wise mismatch between `xi` and the curl of `grad_v`,
    /// relative to `max(|xi|, 1)`.
    pub fn curl_residual(&self) -> f64 {
        let curl = curl_from_gradient(&self.grad_v);
        (curl - self.xi).amax() / self.xi.amax().max(1.0)
    }

    pub fn hessian_asymmetry(&self) -> f64 {
        let h = &self.hess_p1hat;
        (h - h.transpose()).amax() / h.amax().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainBounds {
    Unbounded,
    Box { min: Vec3, max: Vec3 },
}

impl DomainBounds {
    pub fn contains(&self, r: &Vec3) -> bool {
        match self {
            DomainBounds::Unbounded => r.iter().all(|x| x.is_finite()),
            DomainBounds::Box { min, max } => (0..3).all(|i| r[i] >= min[i] && r[i] <= max[i]),
        }
    }

    /// Whether the axis-aligned cube of half-width `margin` around `r` is inside.
    pub fn contains_with_margin(&self, r: &Vec3, margin: f64) -> bool {
        match self {
            DomainBounds::Unbounded => r.iter().all(|x| x.is_finite()),
            DomainBounds::Box { min, max } => {
                (0..3).all(|i| r[i] - margin >= min[i] && r[i] + margin <= max[i])
            }
        }
    }
}

impl fmt::Display for DomainBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainBounds::Unbounded => write!(f, "unbounded"),
            DomainBounds::Box { min, max } => write!(
                f,
                "[{}, {}] x [{}, {}] x [{}, {}]",
                min.x, max.x, min.y, max.y, min.z, max.z
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldProviderDescriptor {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub time_dependent: bool,
    pub domain_bounds: DomainBounds,
    /// Closed interval of valid sample times.
    pub time_range: (f64, f64),
    /// Interior box used by the random-point verification sweeps.
    pub sweep_box: (Vec3, Vec3),
    pub description: &'static str,
}

impl FieldProviderDescriptor {
    pub fn check(&self, r: &Vec3, t: f64) -> Result<()> {
        let t_ok = t >= self.time_range.0 && t <= self.time_range.1;
        if self.domain_bounds.contains(r) && t_ok {
            Ok(())
        } else {
            let bounds = if t_ok {
                self.domain_bounds.to_string()
            } else {
                format!(
                    "{} for t in [{}, {}]",
                    self.domain_bounds, self.time_range.0, self.time_range.1
                )
            };
            Err(TtpError::OutOfDomain {
                r: [r.x, r.y, r.z],
                t,
                bounds,
            })
        }
    }
}

pub trait FieldProvider: Send + Sync {
    fn descriptor(&self) -> &FieldProviderDescriptor;

    fn sample(&self, r: &Vec3, t: f64) -> Result<FluidSample>;

    fn name(&self) -> &str {
        &self.descriptor().name
    }

    /// Closed-form particle trajectories, for providers that have them.
    fn oracle(&self) -> Option<&dyn TrajectoryOracle> {
        None
    }
}

/// Exact particle motion in a provider, used to measure integrator error.
pub trait TrajectoryOracle {
    /// State at time `t` of the particle that starts at `state0`.
    fn exact_state(&self, state0: &TtpState, t: f64) -> Result<TtpState>;
}

impl<P: FieldProvider + ?Sized> FieldProvider for Box<P> {
    fn descriptor(&self) -> &FieldProviderDescriptor {
        (**self).descriptor()
    }

    fn sample(&self, r: &Vec3, t: f64) -> Result<FluidSample> {
        (**self).sample(r, t)
    }

    fn oracle(&self) -> Option<&dyn TrajectoryOracle> {
        (**self).oracle()
    }
}

/// Restricts any provider to an axis-aligned box.
pub struct Bounded<P> {
    inner: P,
    descriptor: FieldProviderDescriptor,
}

impl<P: FieldProvider> Bounded<P> {
    pub fn new(inner: P, min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(min[i] < max[i])) {
            return Err(TtpError::validation("bounds", "each axis needs min < max"));
        }
        let mut descriptor = inner.descriptor().clone();
        descriptor.domain_bounds = DomainBounds::Box { min, max };
        let (lo, hi) = descriptor.sweep_box;
        descriptor.sweep_box = (lo.sup(&min), hi.inf(&max));
        Ok(Bounded { inner, descriptor })
    }
}

impl<P: FieldProvider> FieldProvider for Bounded<P> {
    fn descriptor(&self) -> &FieldProviderDescriptor {
        &self.descriptor
    }

    fn sample(&self, r: &Vec3, t: f64) -> Result<FluidSample> {
        self.descriptor.check(r, t)?;
        self.inner.sample(r, t)
    }

    fn oracle(&self) -> Option<&dyn TrajectoryOracle> {
        self.inner.oracle()
    }
}

/// Descriptors of every builtin analytic provider, with default parameters.
pub fn register_builtin_providers() -> Vec<FieldProviderDescriptor> {
    vec![
        Uniform::default().descriptor().clone(),
        RigidRotation::default().descriptor().clone(),
        TaylorGreen::default().descriptor().clone(),
        TaylorGreen::steady().descriptor().clone(),
        LambOseen::default().descriptor().clone(),
    ]
}

pub fn lookup(name: &str) -> Result<FieldProviderDescriptor> {
    register_builtin_providers()
        .into_iter()
        .find(|d| d.name == name)
        .ok_or_else(|| TtpError::NotFound(name.to_string()))
}

/// Builds a builtin provider, overriding its default parameters.
/// Unknown parameter names are rejected.
pub fn build_provider(
    name: &str,
    overrides: &BTreeMap<String, f64>,
) -> Result<Box<dyn FieldProvider>> {
    let defaults = lookup(name)?;
    let mut params = defaults.parameters.clone();
    for (key, value) in overrides {
        match params.get_mut(key) {
            Some(slot) => *slot = *value,
            None => {
                return Err(TtpError::validation(
                    format!("field.{key}"),
                    format!("`{name}` has no parameter `{key}`"),
                ))
            }
        }
    }
    Ok(match name {
        "uniform" => Box::new(Uniform::from_params(&params)?),
        "rigid_rotation" => Box::new(RigidRotation::from_params(&params)?),
        "taylor_green" => Box::new(TaylorGreen::from_params(&params, false)?),
        "taylor_green_steady" => Box::new(TaylorGreen::from_params(&params, true)?),
        "lamb_oseen" => Box::new(LambOseen::from_params(&params)?),
        _ => return Err(TtpError::NotFound(name.to_string())),
    })
}

pub(crate) fn param(params: &BTreeMap<String, f64>, key: &str) -> f64 {
    params[key]
}

/// Relative residuals of provider derivatives against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub h: f64,
    pub grad_v: f64,
    pub grad_p1hat: f64,
    pub hess_p1hat: f64,
    pub dt_grad_p1hat: f64,
}

impl FdReport {
    pub fn max(&self) -> f64 {
        self.grad_v
            .max(self.grad_p1hat)
            .max(self.hess_p1hat)
            .max(self.dt_grad_p1hat)
    }
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Compares the provider's derivatives with second-order central differences
/// built only from `sample` values. Residuals are Frobenius norms of the
/// mismatch divided by the norm of the provider's value (absolute when that
/// value is exactly zero).
pub fn fd_verify_derivatives(
    provider: &dyn FieldProvider,
    r: &Vec3,
    t: f64,
    h: f64,
) -> Result<FdReport> {
    let desc = provider.descriptor();
    if !desc.domain_bounds.contains_with_margin(r, 2.0 * h) {
        return Err(TtpError::OutOfDomain {
            r: [r.x, r.y, r.z],
            t,
            bounds: format!("{} shrunk by 2h={}", desc.domain_bounds, 2.0 * h),
        });
    }
    let center = provider.sample(r, t)?;

    let mut grad_v = Mat3::zeros();
    let mut grad_p = Vec3::zeros();
    let mut hess = Mat3::zeros();
    for i in 0..3 {
        let e = Vec3::ith(i, h);
        let plus = provider.sample(&(r + e), t)?;
        let minus = provider.sample(&(r - e), t)?;
        let dv = (plus.v - minus.v) / (2.0 * h);
        let dg = (plus.grad_p1hat - minus.grad_p1hat) / (2.0 * h);
        for j in 0..3 {
            grad_v[(i, j)] = dv[j];
            hess[(i, j)] = dg[j];
        }
        grad_p[i] = (plus.p1hat - minus.p1hat) / (2.0 * h);
    }

    let dt_grad = if desc.time_dependent {
        let plus = provider.sample(r, t + h)?;
        let minus = provider.sample(r, t - h)?;
        (plus.grad_p1hat - minus.grad_p1hat) / (2.0 * h)
    } else {
        Vec3::zeros()
    };

    Ok(FdReport {
        h,
        grad_v: relative((grad_v - center.grad_v).norm(), center.grad_v.norm()),
        grad_p1hat: relative(
            (grad_p - center.grad_p1hat).norm(),
            center.grad_p1hat.norm(),
        ),
        hess_p1hat: relative((hess - center.hess_p1hat).norm(), center.hess_p1hat.norm()),
        dt_grad_p1hat: relative(
            (dt_grad - center.dt_grad_p1hat).norm(),
            center.dt_grad_p1hat.norm(),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn builtins() -> Vec<Box<dyn FieldProvider>> {
        register_builtin_providers()
            .iter()
            .map(|d| build_provider(&d.name, &BTreeMap::new()).unwrap())
            .collect()
    }

    fn random_point(rng: &mut ChaCha8Rng, desc: &FieldProviderDescriptor) -> Vec3 {
        let (lo, hi) = desc.sweep_box;
        Vec3::from_fn(|i, _| rng.random_range(lo[i]..hi[i]))
    }

    #[test]
    fn registry_lookups() {
        assert!(!lookup("uniform").unwrap().time_dependent);
        let tg = lookup("taylor_green").unwrap();
        for key in ["A", "k", "nu"] {
            assert!(tg.parameters.contains_key(key), "missing {key}");
        }
        assert_eq!(
            lookup("nonexistent"),
            Err(TtpError::NotFound("nonexistent".into()))
        );
        let names: Vec<_> = register_builtin_providers()
            .into_iter()
            .map(|d| d.name)
            .collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(names.len(), dedup.len());
    }

    #[test]
    fn unknown_parameter_is_rejected() {
        let mut p = BTreeMap::new();
        p.insert("bogus".to_string(), 1.0);
        assert!(matches!(
            build_provider("uniform", &p),
            Err(TtpError::Validation { .. })
        ));
    }

    #[test]
    fn uniform_sample_is_constant() {
        let p = build_provider("uniform", &BTreeMap::new()).unwrap();
        let s = p.sample(&Vec3::new(3.0, -2.0, 7.5), 11.0).unwrap();
        assert_eq!(s.v, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(s.grad_v, Mat3::zeros());
        assert_eq!(s.xi, Vec3::zeros());
        assert_eq!(s.grad_p1hat, Vec3::zeros());
        assert_eq!(s.p1hat, 1.0);
    }

    #[test]
    fn rigid_rotation_sample() {
        let p = build_provider("rigid_rotation", &BTreeMap::new()).unwrap();
        let s = p.sample(&Vec3::new(1.0, 0.0, 0.0), 0.0).unwrap();
        assert!((s.v - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert!((s.xi - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-15);
    }

    // Independent oracle: Richardson-extrapolated central differences of the
    // velocity and pressure values alone, h = 1e-5.
    fn richardson<F: Fn(f64) -> f64>(f: F, h: f64) -> f64 {
        let d = |h: f64| (f(h) - f(-h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    #[test]
    fn taylor_green_sample_matches_fd_oracle() {
        let p = build_provider("taylor_green", &BTreeMap::new()).unwrap();
        let r0 = Vec3::new(
            std::f64::consts::FRAC_PI_4,
            std::f64::consts::FRAC_PI_4,
            0.0,
        );
        let s = p.sample(&r0, 0.0).unwrap();

        // Frozen values from the oracle below (A=1, k=1, nu=0.05, p0=1, s=0.5).
        let frozen_v = Vec3::new(0.5, -0.5, 0.0);
        let frozen_grad_v = Mat3::new(-0.5, -0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0);
        let frozen_xi = Vec3::new(0.0, 0.0, -1.0);
        let frozen_grad_p = Vec3::new(0.5, 0.5, 0.0);
        let frozen_hess = Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5);
        let frozen_dt_grad = Vec3::new(-0.1, -0.1, 0.0);

        assert!((s.v - frozen_v).norm() < 1e-15);
        assert!((s.p1hat - 1.0).abs() < 1e-15);
        assert!((s.grad_v - frozen_grad_v).norm() < 1e-15);
        assert!((s.xi - frozen_xi).norm() < 1e-15);
        assert!((s.grad_p1hat - frozen_grad_p).norm() < 1e-15);
        assert!((s.hess_p1hat - frozen_hess).norm() < 1e-15);
        assert!((s.dt_grad_p1hat - frozen_dt_grad).norm() < 1e-15);

        let h = 1e-5;
        let at = |dr: Vec3, dt: f64| p.sample(&(r0 + dr), dt).unwrap();
        for i in 0..3 {
            let e = Vec3::ith(i, 1.0);
            for j in 0..3 {
                let d = richardson(|x| at(e * x, 0.0).v[j], h);
                assert!((d - frozen_grad_v[(i, j)]).abs() < 1e-9, "gradV[{i}{j}]");
            }
            let dp = richardson(|x| at(e * x, 0.0).p1hat, h);
            assert!((dp - frozen_grad_p[i]).abs() < 1e-9);
            for j in 0..3 {
                let ej = Vec3::ith(j, 1.0);
                let d2 = richardson(
                    |x| richardson(|y| at(e * x + ej * y, 0.0).p1hat, 1e-3),
                    1e-3,
                );
                assert!((d2 - frozen_hess[(i, j)]).abs() < 1e-6, "hess[{i}{j}]");
            }
            let dtg = richardson(|tt| richardson(|x| at(e * x, tt).p1hat, 1e-3), 1e-3);
            assert!((dtg - frozen_dt_grad[i]).abs() < 1e-6, "dt grad[{i}]");
        }
    }

    #[test]
    fn curl_matches_gradient_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in builtins() {
            for _ in 0..100 {
                let r = random_point(&mut rng, p.descriptor());
                let s = p.sample(&r, 0.3).unwrap();
                assert!(s.curl_residual() < 1e-12, "{} at {r:?}", p.name());
                assert!(s.hessian_asymmetry() < 1e-12, "{}", p.name());
                assert!(s.p1hat >= 0.0);
            }
        }
    }

    #[test]
    fn sample_is_bitwise_deterministic() {
        let r = Vec3::new(0.3, -0.7, 0.2);
        for p in builtins() {
            let a = p.sample(&r, 0.25).unwrap();
            let b = p.sample(&r, 0.25).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn fd_residuals_small_and_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in builtins() {
            for _ in 0..10 {
                let r = random_point(&mut rng, p.descriptor());
                let report = fd_verify_derivatives(p.as_ref(), &r, 0.2, 1e-4).unwrap();
                assert!(report.max() < 1e-6, "{}: {report:?}", p.name());

                let hs = [1e-3, 5e-4, 2.5e-4];
                let res: Vec<FdReport> = hs
                    .iter()
                    .map(|&h| fd_verify_derivatives(p.as_ref(), &r, 0.2, h).unwrap())
                    .collect();
                let parts: [fn(&FdReport) -> f64; 4] = [
                    |f| f.grad_v,
                    |f| f.grad_p1hat,
                    |f| f.hess_p1hat,
                    |f| f.dt_grad_p1hat,
                ];
                for part in parts {
                    let ys: Vec<f64> = res.iter().map(part).collect();
                    // Components that are exact under central differences sit
                    // at the rounding floor and carry no order information.
                    if ys.iter().any(|&y| y < 1e-10) {
                        continue;
                    }
                    let order = crate::linalg::log_log_slope(&hs, &ys);
                    assert!((1.7..=2.3).contains(&order), "{}: order {order}", p.name());
                }
            }
        }
    }

    #[test]
    fn fd_on_uniform_is_exactly_zero() {
        let p = build_provider("uniform", &BTreeMap::new()).unwrap();
        let rep = fd_verify_derivatives(p.as_ref(), &Vec3::new(0.1, 0.2, 0.3), 0.0, 1e-4).unwrap();
        assert_eq!(rep.max(), 0.0);
    }

    #[test]
    fn fd_on_rigid_rotation_gradient_is_exact() {
        let p = build_provider("rigid_rotation", &BTreeMap::new()).unwrap();
        for h in [1e-2, 1e-4, 1e-6] {
            let rep =
                fd_verify_derivatives(p.as_ref(), &Vec3::new(0.7, -0.4, 0.3), 0.0, h).unwrap();
            assert!(rep.grad_v < 1e-10, "h={h}: {rep:?}");
        }
    }

    #[test]
    fn bounded_provider_rejects_outside_points() {
        let inner = build_provider("uniform", &BTreeMap::new()).unwrap();
        let p = Bounded::new(inner, Vec3::repeat(-1.0), Vec3::repeat(1.0)).unwrap();
        assert!(p.sample(&Vec3::new(0.5, 0.0, 0.0), 0.0).is_ok());
        let err = p.sample(&Vec3::new(1.5, 0.0, 0.0), 0.0).unwrap_err();
        assert!(
            err.to_string().contains("[-1, 1] x [-1, 1] x [-1, 1]"),
            "{err}"
        );
        assert!(matches!(
            fd_verify_derivatives(&p, &Vec3::new(0.99, 0.0, 0.0), 0.0, 0.01),
            Err(TtpError::OutOfDomain { .. })
        ));
    }
}
