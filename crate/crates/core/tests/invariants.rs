use std::collections::BTreeMap;

use proptest::prelude::*;

use ttp::ensemble::{
    ensemble_stats, evolve_ensemble, seed_tangent_circle, tangent_frame, EnsembleSpec, Sampling,
};
use ttp::fields::build_provider;
use ttp::integrate::{integrate_trajectory, rotate_unit, IntegratorConfig};
use ttp::kinetics::{isobaric_normal, normal_rate, omega_direct, relative_velocity};
use ttp::verify::omega_identity_sweep;
use ttp::{FieldProvider, TtpState, Vec3};

const SMOOTH: [&str; 4] = [
    "rigid_rotation",
    "taylor_green",
    "taylor_green_steady",
    "lamb_oseen",
];

fn provider(name: &str) -> Box<dyn FieldProvider> {
    build_provider(name, &BTreeMap::new()).unwrap()
}

fn tangent_state(
    p: &dyn FieldProvider,
    r: Vec3,
    t: f64,
    angle: f64,
    beta: f64,
) -> Option<TtpState> {
    let b = isobaric_normal(&p.sample(&r, t).ok()?, 1e-6).vector()?;
    let (e1, e2) = tangent_frame(&b);
    TtpState::new(t, r, angle.cos() * e1 + angle.sin() * e2, beta).ok()
}

fn point() -> impl Strategy<Value = Vec3> {
    proptest::array::uniform3(-2.0f64..2.0).prop_map(Vec3::from)
}

proptest! {
    #[test]
    fn rotation_keeps_unit_length(
        n in proptest::array::uniform3(-1.0f64..1.0),
        w in proptest::array::uniform3(-50.0f64..50.0),
        dt in 0.0f64..1.0,
    ) {
        let n = Vec3::from(n);
        prop_assume!(n.norm() > 1e-3);
        let out = rotate_unit(&n.normalize(), &Vec3::from(w), dt);
        prop_assert!((out.norm() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn omega_keeps_n_tangent(idx in 0usize..4, r in point(), t in 0.0f64..2.0, angle in 0.0f64..6.3, beta in 0.0f64..2.0) {
        let p = provider(SMOOTH[idx]);
        let Some(s) = tangent_state(p.as_ref(), r, t, angle, beta) else { return Ok(()) };
        let sample = p.sample(&s.r, t).unwrap();
        let b = isobaric_normal(&sample, 1e-6).vector().unwrap();
        let omega = omega_direct(&sample, &s, 1e-6).unwrap();
        let b_dot = normal_rate(&sample, &s, 1e-6).unwrap();
        let scale = omega.norm().max(b_dot.norm()).max(1e-300);
        prop_assert!((omega.cross(&s.n).dot(&b) + s.n.dot(&b_dot)).abs() / scale <= 1e-12);
        // Omega lies in the tangent plane
        prop_assert!(omega.dot(&b).abs() <= 1e-12 * omega.norm().max(1.0));
    }

    #[test]
    fn relative_speed_is_locked(idx in 0usize..4, r in point(), angle in 0.0f64..6.3, beta in 0.0f64..2.0) {
        let p = provider(SMOOTH[idx]);
        let Some(s) = tangent_state(p.as_ref(), r, 0.0, angle, beta) else { return Ok(()) };
        let sample = p.sample(&s.r, 0.0).unwrap();
        let u = relative_velocity(&s, &sample).unwrap();
        let expected = beta * (2.0 * sample.p1hat).sqrt();
        prop_assert!((u.norm() - expected).abs() <= 1e-15 * expected.max(1.0));
    }

    #[test]
    fn seeded_moments_match_circle_averages(idx in 0usize..4, r in point(), count in 3usize..40, beta in 0.1f64..2.0) {
        let p = provider(SMOOTH[idx]);
        let sample = p.sample(&r, 0.0).unwrap();
        let Some(b) = isobaric_normal(&sample, 1e-6).vector() else { return Ok(()) };
        let spec = EnsembleSpec { r0: r, t0: 0.0, count, sampling: Sampling::EquispacedCircle, seed: 0, beta, eps_grad: 1e-6 };
        let stats = ensemble_stats(&seed_tangent_circle(&spec, p.as_ref()).unwrap(), p.as_ref()).unwrap();
        let scale = beta * beta * 2.0 * sample.p1hat;
        let expected = scale / 2.0 * (ttp::Mat3::identity() - b * b.transpose());
        prop_assert!((stats.mean_v - sample.v).norm() <= 1e-13 * sample.v.norm() + 1e-14);
        prop_assert!((stats.cov_u - expected).norm() <= 1e-13 * scale);
        prop_assert!(stats.cov_u.symmetric_eigenvalues().iter().all(|&l| l >= -1e-14 * scale));
    }
}

#[test]
fn trajectories_are_bitwise_reproducible() {
    let p = provider("lamb_oseen");
    let s0 = tangent_state(p.as_ref(), Vec3::new(0.5, -0.3, 0.2), 0.0, 1.0, 0.7).unwrap();
    let cfg = IntegratorConfig {
        dt: 1e-2,
        t_end: 3.0,
        ..Default::default()
    };
    let a = integrate_trajectory(&s0, p.as_ref(), &cfg).unwrap();
    let b = integrate_trajectory(&s0, p.as_ref(), &cfg).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.summary, b.summary);
}

#[test]
fn parallel_results_do_not_depend_on_worker_count() {
    let p = provider("taylor_green");
    let spec = EnsembleSpec {
        r0: Vec3::new(0.4, 1.2, 0.3),
        t0: 0.0,
        count: 37,
        sampling: Sampling::RandomCircle,
        seed: 4,
        beta: 0.9,
        eps_grad: 1e-10,
    };
    let states = seed_tangent_circle(&spec, p.as_ref()).unwrap();
    let cfg = IntegratorConfig {
        dt: 1e-2,
        t_end: 1.0,
        ..Default::default()
    };
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let run = evolve_ensemble(&states, p.as_ref(), &cfg, 10).unwrap();
            let sweep = omega_identity_sweep(p.as_ref(), 200, 3, 1e-5, 0.0).unwrap();
            (run.series, sweep)
        })
    };
    let (series1, sweep1) = run_with(1);
    let (series4, sweep4) = run_with(4);
    assert_eq!(series1, series4);
    assert_eq!(sweep1, sweep4);
}
