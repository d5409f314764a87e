//! Closed-form providers. Each documents its choice of `p1hat`; any smooth
//! positive field with a gradient that vanishes only on a thin set works for
//! the particle dynamics.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{
    param, DomainBounds, FieldProvider, FieldProviderDescriptor, FluidSample, TrajectoryOracle,
};
use crate::error::{Result, TtpError};
use crate::kinetics::TtpState;
use crate::linalg::{Mat3, Vec3};

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn non_negative(p1hat: f64, r: &Vec3) -> Result<f64> {
    if p1hat < 0.0 {
        Err(TtpError::NegativePressure {
            p1hat,
            r: [r.x, r.y, r.z],
        })
    } else {
        Ok(p1hat)
    }
}

/// Constant velocity `V0` and a linear pressure `p1hat + g . r`.
///
/// With the default `g = 0` the isobaric normal is undefined everywhere.
#[derive(Debug, Clone)]
pub struct Uniform {
    v0: Vec3,
    p1hat: f64,
    gradient: Vec3,
    descriptor: FieldProviderDescriptor,
}

impl Default for Uniform {
    fn default() -> Self {
        Self::from_params(&params(&[
            ("vx", 1.0),
            ("vy", 0.0),
            ("vz", 0.0),
            ("p1hat", 1.0),
            ("gx", 0.0),
            ("gy", 0.0),
            ("gz", 0.0),
        ]))
        .expect("default uniform parameters are valid")
    }
}

impl Uniform {
    pub fn from_params(p: &BTreeMap<String, f64>) -> Result<Self> {
        let v0 = Vec3::new(param(p, "vx"), param(p, "vy"), param(p, "vz"));
        let gradient = Vec3::new(param(p, "gx"), param(p, "gy"), param(p, "gz"));
        Ok(Uniform {
            v0,
            p1hat: param(p, "p1hat"),
            gradient,
            descriptor: FieldProviderDescriptor {
                name: "uniform".into(),
                parameters: p.clone(),
                time_dependent: false,
                domain_bounds: DomainBounds::Unbounded,
                time_range: (f64::NEG_INFINITY, f64::INFINITY),
                sweep_box: (Vec3::repeat(-1.0), Vec3::repeat(1.0)),
                description: "constant velocity (vx,vy,vz); p1hat + (gx,gy,gz).r",
            },
        })
    }

    pub fn velocity(&self) -> Vec3 {
        self.v0
    }
}

impl FieldProvider for Uniform {
    fn descriptor(&self) -> &FieldProviderDescriptor {
        &self.descriptor
    }

    fn sample(&self, r: &Vec3, t: f64) -> Result<FluidSample> {
        self.descriptor.check(r, t)?;
        Ok(FluidSample {
            v: self.v0,
            grad_v: Mat3::zeros(),
            xi: Vec3::zeros(),
            p1hat: non_negative(self.p1hat + self.gradient.dot(r), r)?,
            grad_p1hat: self.gradient,
            hess_p1hat: Mat3::zeros(),
            dt_grad_p1hat: Vec3::zeros(),
        })
    }

    fn oracle(&self) -> Option<&dyn TrajectoryOracle> {
        Some(self)
    }
}

/// Straight-line motion. Exact when the pressure is constant along the path:
/// zero gradient, or a gradient orthogonal to both `V0` and `n0`.
impl TrajectoryOracle for Uniform {
    fn exact_state(&self, state0: &TtpState, t: f64) -> Result<TtpState> {
        let g = self.gradient;
        let tol = 1e-12 * g.norm();
        if g != Vec3::zeros() && (g.dot(&self.v0).abs() > tol || g.dot(&state0.n).abs() > tol) {
            return Err(TtpError::NoOracle(
                "uniform (pressure varies along the path)".into(),
            ));
        }
        let s = self.sample(&state0.r, state0.t)?;
        let v_th = (2.0 * s.p1hat).sqrt();
        let velocity = self.v0 + state0.beta * v_th * state0.n;
        Ok(TtpState {
            t,
            r: state0.r + velocity * (t - state0.t),
            ..*state0
        })
    }
}

/// Solid-body rotation `V = w x r` with the axisymmetric pressure
/// `p1hat = p0 + c |r_perp|^2 / 2`, `r_perp` measured from the rotation axis
/// through the origin.
#[derive(Debug, Clone)]
pub struct RigidRotation {
    omega: Vec3,
    axis: Vec3,
    p0: f64,
    c: f64,
    descriptor: FieldProviderDescriptor,
}

impl Default for RigidRotation {
    fn default() -> Self {
        Self::from_params(&params(&[
            ("wx", 0.0),
            ("wy", 0.0),
            ("wz", 1.0),
            ("p0", 0.0),
            ("c", 1.0),
        ]))
        .expect("default rigid_rotation parameters are valid")
    }
}

impl RigidRotation {
    pub fn from_params(p: &BTreeMap<String, f64>) -> Result<Self> {
        let omega = Vec3::new(param(p, "wx"), param(p, "wy"), param(p, "wz"));
        let norm = omega.norm();
        if !(norm > 0.0) {
            return Err(TtpError::validation(
                "field.wx",
                "rotation vector (wx, wy, wz) must be non-zero",
            ));
        }
        Ok(RigidRotation {
            omega,
            axis: omega / norm,
            p0: param(p, "p0"),
            c: param(p, "c"),
            descriptor: FieldProviderDescriptor {
                name: "rigid_rotation".into(),
                parameters: p.clone(),
                time_dependent: false,
                domain_bounds: DomainBounds::Unbounded,
                time_range: (f64::NEG_INFINITY, f64::INFINITY),
                sweep_box: (Vec3::repeat(-2.0), Vec3::repeat(2.0)),
                description: "V = w x r; p1hat = p0 + c |r_perp|^2 / 2",
            },
        })
    }

    pub fn omega(&self) -> Vec3 {
        self.omega
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    fn perpendicular(&self, r: &Vec3) -> Vec3 {
        r - self.axis * self.axis.dot(r)
    }
}

impl FieldProvider for RigidRotation {
    fn descriptor(&self) -> &FieldProviderDescriptor {
        &self.descriptor
    }

    fn sample(&self, r: &Vec3, t: f64) -> Result<FluidSample> {
        self.descriptor.check(r, t)?;
        let mut grad_v = Mat3::zeros();
        for i in 0..3 {
            let col = self.omega.cross(&Vec3::ith(i, 1.0));
            for j in 0..3 {
                grad_v[(i, j)] = col[j];
            }
        }
        let r_perp = self.perpendicular(r);
        Ok(FluidSample {
            v: self.omega.cross(r),
            grad_v,
            xi: 2.0 * self.omega,
            p1hat: non_negative(self.p0 + 0.5 * self.c * r_perp.norm_squared(), r)?,
            grad_p1hat: self.c * r_perp,
            hess_p1hat: self.c * (Mat3::identity() - self.axis * self.axis.transpose()),
            dt_grad_p1hat: Vec3::zeros(),
        })
    }

    fn oracle(&self) -> Option<&dyn TrajectoryOracle> {
        Some(self)
    }
}

/// With `b` radial, a tangent `n0 = cos(a) phi + sin(a) w_hat` keeps its
/// angle to the local azimuth: the particle stays on its cylinder of radius
/// `R`, circles at `W + beta v_th cos(a) / R` and drifts axially at
/// `beta v_th sin(a)`. `b` turns at the same rate, so `Omega` is that rate
/// times the axis and `n` co-rotates with the azimuthal frame.
impl TrajectoryOracle for RigidRotation {
    fn exact_state(&self, state0: &TtpState, t: f64) -> Result<TtpState> {
        let w_hat = self.axis;
        let r_perp = self.perpendicular(&state0.r);
        let radius = r_perp.norm();
        if !(radius > 0.0) || self.c == 0.0 {
            return Err(TtpError::NoOracle(
                "rigid_rotation (particle on the axis or uniform pressure)".into(),
            ));
        }
        let r_hat = r_perp / radius;
        let phi_hat = w_hat.cross(&r_hat);
        if state0.n.dot(&r_hat).abs() > 1e-9 {
            return Err(TtpError::InitialTangencyViolation {
                n_dot_b: state0.n.dot(&r_hat).abs(),
                tolerance: 1e-9,
            });
        }
        let cos_a = state0.n.dot(&phi_hat);
        let sin_a = state0.n.dot(&w_hat);
        let v_th = (2.0 * (self.p0 + 0.5 * self.c * radius * radius)).sqrt();
        let rate = self.omega.norm() + state0.beta * v_th * cos_a / radius;
        let axial_speed = state0.beta * v_th * sin_a;

        let elapsed = t - state0.t;
        let (s, c) = (rate * elapsed).sin_cos();
        let axial = w_hat * (w_hat.dot(&state0.r) + axial_speed * elapsed);
        let r_hat_t = c * r_hat + s * phi_hat;
        let phi_hat_t = c * phi_hat - s * r_hat;
        Ok(TtpState {
            t,
            r: axial + radius * r_hat_t,
            n: cos_a * phi_hat_t + sin_a * w_hat,
            beta: state0.beta,
        })
    }
}

/// Taylor-Green vortex cells extended uniformly along z:
/// `V = A F(t) (cos kx sin ky, -sin kx cos ky, 0)`, `F(t) = exp(-2 nu k^2 t)`.
///
/// Pressure: the inviscid Taylor-Green pressure on top of a background `p0`,
/// plus a confining `s z^2 / 2` term so the isobaric normal is fully 3D:
/// `p1hat = p0 - (A^2 F^2 / 4)(cos 2kx + cos 2ky) + s z^2 / 2`.
/// Non-negative whenever `p0 >= A^2 / 2` and `s >= 0`.
#[derive(Debug, Clone)]
pub struct TaylorGreen {
    amplitude: f64,
    k: f64,
    nu: f64,
    p0: f64,
    s: f64,
    descriptor: FieldProviderDescriptor,
}

impl Default for TaylorGreen {
    fn default() -> Self {
        Self::from_params(
            &params(&[
                ("A", 1.0),
                ("k", 1.0),
                ("nu", 0.05),
                ("p0", 1.0),
                ("s", 0.5),
            ]),
            false,
        )
        .expect("default taylor_green parameters are valid")
    }
}

impl TaylorGreen {
    pub fn steady() -> Self {
        Self::from_params(
            &params(&[("A", 1.0), ("k", 1.0), ("p0", 1.0), ("s", 0.5)]),
            true,
        )
        .expect("default taylor_green_steady parameters are valid")
    }

    pub fn from_params(p: &BTreeMap<String, f64>, steady: bool) -> Result<Self> {
        let k = param(p, "k");
        if !(k > 0.0) {
            return Err(TtpError::validation(
                "field.k",
                "wavenumber must be positive",
            ));
        }
        let nu = if steady { 0.0 } else { param(p, "nu") };
        if nu < 0.0 {
            return Err(TtpError::validation(
                "field.nu",
                "viscosity must be non-negative",
            ));
        }
        let period = 2.0 * PI / k;
        Ok(TaylorGreen {
            amplitude: param(p, "A"),
            k,
            nu,
            p0: param(p, "p0"),
            s: param(p, "s"),
            descriptor: FieldProviderDescriptor {
                name: if steady {
                    "taylor_green_steady"
                } else {
                    "taylor_green"
                }
                .into(),
                parameters: p.clone(),
                time_dependent: !steady && nu > 0.0,
                domain_bounds: DomainBounds::Unbounded,
                time_range: (f64::NEG_INFINITY, f64::INFINITY),
                sweep_box: (Vec3::new(0.0, 0.0, -1.0), Vec3::new(period, period, 1.0)),
                description: if steady {
                    "steady Taylor-Green cells; p1hat = p0 - A^2/4 (cos 2kx + cos 2ky) + s z^2/2"
                } else {
                    "decaying Taylor-Green cells, F = exp(-2 nu k^2 t); p1hat = p0 - A^2 F^2/4 (cos 2kx + cos 2ky) + s z^2/2"
                },
            },
        })
    }
}

impl FieldProvider for TaylorGreen {
    fn descriptor(&self) -> &FieldProviderDescriptor {
        &self.descriptor
    }

    fn sample(&self, r: &Vec3, t: f64) -> Result<FluidSample> {
        self.descriptor.check(r, t)?;
        let (a, k) = (self.amplitude, self.k);
        let decay = (-2.0 * self.nu * k * k * t).exp();
        let af = a * decay;
        let (sx, cx) = (k * r.x).sin_cos();
        let (sy, cy) = (k * r.y).sin_cos();
        let (s2x, c2x) = (2.0 * k * r.x).sin_cos();
        let (s2y, c2y) = (2.0 * k * r.y).sin_cos();

        let v = Vec3::new(af * cx * sy, -af * sx * cy, 0.0);
        let mut grad_v = Mat3::zeros();
        grad_v[(0, 0)] = -af * k * sx * sy;
        grad_v[(1, 0)] = af * k * cx * cy;
        grad_v[(0, 1)] = -af * k * cx * cy;
        grad_v[(1, 1)] = af * k * sx * sy;
        let xi = Vec3::new(0.0, 0.0, -2.0 * af * k * cx * cy);

        let q = af * af / 4.0;
        let p1hat = self.p0 - q * (c2x + c2y) + 0.5 * self.s * r.z * r.z;
        let grad_p1hat = Vec3::new(2.0 * k * q * s2x, 2.0 * k * q * s2y, self.s * r.z);
        let hess_p1hat = Mat3::from_diagonal(&Vec3::new(
            4.0 * k * k * q * c2x,
            4.0 * k * k * q * c2y,
            self.s,
        ));
        // d(F^2)/dt = -4 nu k^2 F^2
        let rate = -4.0 * self.nu * k * k;
        let dt_grad_p1hat = Vec3::new(rate * grad_p1hat.x, rate * grad_p1hat.y, 0.0);

        Ok(FluidSample {
            v,
            grad_v,
            xi,
            p1hat: non_negative(p1hat, r)?,
            grad_p1hat,
            hess_p1hat,
            dt_grad_p1hat,
        })
    }
}

/// Lamb-Oseen vortex about the z axis with a uniform axial flow `w`:
/// `V_theta = gamma / (2 pi rho) (1 - exp(-rho^2 / delta^2))`,
/// `delta^2(t) = rc^2 + 4 nu t`.
///
/// Pressure: a confining paraboloid with a Gaussian low-pressure core that
/// spreads with the vortex,
/// `p1hat = p0 + c rho^2 / 2 - d exp(-rho^2 / delta^2) + s z^2 / 2`.
/// Non-negative whenever `d <= p0` and `c, s >= 0`.
#[derive(Debug, Clone)]
pub struct LambOseen {
    gamma: f64,
    rc: f64,
    nu: f64,
    w: f64,
    p0: f64,
    c: f64,
    d: f64,
    s: f64,
    descriptor: FieldProviderDescriptor,
}

impl Default for LambOseen {
    fn default() -> Self {
        Self::from_params(&params(&[
            ("gamma", 1.0),
            ("rc", 0.5),
            ("nu", 0.01),
            ("w", 0.1),
            ("p0", 1.0),
            ("c", 0.5),
            ("d", 0.5),
            ("s", 0.2),
        ]))
        .expect("default lamb_oseen parameters are valid")
    }
}

/// `g(a) = (1 - exp(-a)) / a` and `g'(a)`, series near zero.
fn core_profile(a: f64) -> (f64, f64) {
    if a < 0.5 {
        let mut g = 0.0;
        let mut dg = 0.0;
        // term_k = (-a)^k / (k+1)!
        let mut term = 1.0;
        for k in 0..24 {
            g += term;
            if k + 1 < 24 {
                // derivative of (-a)^(k+1)/(k+2)! is -(k+1) (-a)^k / (k+2)!
                dg += -((k + 1) as f64) * term / ((k + 2) as f64);
            }
            term *= -a / ((k + 2) as f64);
        }
        (g, dg)
    } else {
        let em1 = (-a).exp_m1();
        (-em1 / a, (a * (-a).exp() + em1) / (a * a))
    }
}

impl LambOseen {
    pub fn from_params(p: &BTreeMap<String, f64>) -> Result<Self> {
        let rc = param(p, "rc");
        let nu = param(p, "nu");
        if !(rc > 0.0) {
            return Err(TtpError::validation(
                "field.rc",
                "core radius must be positive",
            ));
        }
        if nu < 0.0 {
            return Err(TtpError::validation(
                "field.nu",
                "viscosity must be non-negative",
            ));
        }
        // the core stays at least rc / sqrt(2) wide over the valid interval
        let t_min = if nu > 0.0 {
            -rc * rc / (8.0 * nu)
        } else {
            f64::NEG_INFINITY
        };
        Ok(LambOseen {
            gamma: param(p, "gamma"),
            rc,
            nu,
            w: param(p, "w"),
            p0: param(p, "p0"),
            c: param(p, "c"),
            d: param(p, "d"),
            s: param(p, "s"),
            descriptor: FieldProviderDescriptor {
                name: "lamb_oseen".into(),
                parameters: p.clone(),
                time_dependent: nu > 0.0,
                domain_bounds: DomainBounds::Unbounded,
                time_range: (t_min, f64::INFINITY),
                sweep_box: (Vec3::new(-1.5, -1.5, -1.0), Vec3::new(1.5, 1.5, 1.0)),
                description: "Lamb-Oseen vortex + axial w; p1hat = p0 + c rho^2/2 - d exp(-rho^2/delta^2) + s z^2/2",
            },
        })
    }
}

impl FieldProvider for LambOseen {
    fn descriptor(&self) -> &FieldProviderDescriptor {
        &self.descriptor
    }

    fn sample(&self, r: &Vec3, t: f64) -> Result<FluidSample> {
        self.descriptor.check(r, t)?;
        let (x, y, z) = (r.x, r.y, r.z);
        let delta2 = self.rc * self.rc + 4.0 * self.nu * t;
        let q = x * x + y * y;
        let a = q / delta2;
        let e = (-a).exp();
        let (g, dg) = core_profile(a);

        // V_perp = f(q) (-y, x), f = gamma / (2 pi delta^2) g(q / delta^2)
        let f = self.gamma / (2.0 * PI * delta2) * g;
        let df = self.gamma / (2.0 * PI * delta2 * delta2) * dg;
        let v = Vec3::new(-y * f, x * f, self.w);
        let mut grad_v = Mat3::zeros();
        grad_v[(0, 0)] = -2.0 * x * y * df;
        grad_v[(1, 0)] = -f - 2.0 * y * y * df;
        grad_v[(0, 1)] = f + 2.0 * x * x * df;
        grad_v[(1, 1)] = 2.0 * x * y * df;
        let xi = Vec3::new(0.0, 0.0, self.gamma / (PI * delta2) * e);

        let p1hat = self.p0 + 0.5 * self.c * q - self.d * e + 0.5 * self.s * z * z;
        // p1hat = P(q) + s z^2/2
        let dp = 0.5 * self.c + self.d / delta2 * e;
        let ddp = -self.d / (delta2 * delta2) * e;
        let grad_p1hat = Vec3::new(2.0 * dp * x, 2.0 * dp * y, self.s * z);
        let mut hess_p1hat = Mat3::zeros();
        hess_p1hat[(0, 0)] = 4.0 * ddp * x * x + 2.0 * dp;
        hess_p1hat[(1, 1)] = 4.0 * ddp * y * y + 2.0 * dp;
        hess_p1hat[(0, 1)] = 4.0 * ddp * x * y;
        hess_p1hat[(1, 0)] = hess_p1hat[(0, 1)];
        hess_p1hat[(2, 2)] = self.s;
        // d/dt of P'(q) with d(delta^2)/dt = 4 nu
        let dt_dp = self.d * 4.0 * self.nu * e * (a - 1.0) / (delta2 * delta2);
        let dt_grad_p1hat = Vec3::new(2.0 * dt_dp * x, 2.0 * dt_dp * y, 0.0);

        Ok(FluidSample {
            v,
            grad_v,
            xi,
            p1hat: non_negative(p1hat, r)?,
            grad_p1hat,
            hess_p1hat,
            dt_grad_p1hat,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_profile_branches_agree() {
        for a in [1e-8, 1e-3, 0.1, 0.49, 0.5, 0.51, 2.0] {
            let (g, dg) = core_profile(a);
            let em1 = (-a).exp_m1();
            let g_closed = -em1 / a;
            assert!((g - g_closed).abs() < 1e-14, "g at {a}");
            // finite-difference check of g'
            let h = 1e-5 * a.max(1e-3);
            let (gp, _) = core_profile(a + h);
            let (gm, _) = core_profile((a - h).max(0.0));
            let fd = (gp - gm) / (a + h - (a - h).max(0.0));
            assert!((dg - fd).abs() < 1e-7, "g' at {a}: {dg} vs {fd}");
        }
        let (g0, dg0) = core_profile(0.0);
        assert_eq!(g0, 1.0);
        assert!((dg0 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn lamb_oseen_is_regular_on_axis() {
        let p = LambOseen::default();
        let s = p.sample(&Vec3::new(0.0, 0.0, 0.3), 0.0).unwrap();
        // solid-body core: V_theta ~ gamma rho / (2 pi delta^2)
        let omega_core = 1.0 / (2.0 * PI * 0.25);
        assert!((s.grad_v[(0, 1)] - omega_core).abs() < 1e-14);
        assert!((s.xi.z - 2.0 * omega_core).abs() < 1e-14);
        assert!(s.grad_p1hat.x == 0.0 && s.grad_p1hat.y == 0.0);
    }

    #[test]
    fn negative_pressure_is_reported() {
        let mut p = BTreeMap::new();
        for (k, v) in [
            ("vx", 0.0),
            ("vy", 0.0),
            ("vz", 0.0),
            ("p1hat", 0.5),
            ("gx", 1.0),
            ("gy", 0.0),
            ("gz", 0.0),
        ] {
            p.insert(k.to_string(), v);
        }
        let u = Uniform::from_params(&p).unwrap();
        assert!(u.sample(&Vec3::new(0.0, 0.0, 0.0), 0.0).is_ok());
        assert!(matches!(
            u.sample(&Vec3::new(-1.0, 0.0, 0.0), 0.0),
            Err(TtpError::NegativePressure { .. })
        ));
    }
}
