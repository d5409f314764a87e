//! One revolution in a solid-body rotation, compared with the closed-form
//! helical trajectory.

use std::collections::BTreeMap;

use ttp::fields::build_provider;
use ttp::integrate::{integrate_trajectory, IntegratorConfig};
use ttp::{TtpState, Vec3};

fn main() -> ttp::Result<()> {
    let p = build_provider("rigid_rotation", &BTreeMap::new())?;
    let s0 = TtpState::new(0.0, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.8, 0.6), 1.0)?;
    // angular rate |w| + beta v_th cos(alpha) / R = 1 + 0.8
    let period = 2.0 * std::f64::consts::PI / 1.8;
    let oracle = p.oracle().expect("rigid rotation has a closed form");

    for dt in [4e-3, 2e-3, 1e-3] {
        let cfg = IntegratorConfig {
            dt,
            t_end: period,
            ..Default::default()
        };
        let traj = integrate_trajectory(&s0, p.as_ref(), &cfg)?;
        let end = traj.final_state();
        let exact = oracle.exact_state(&s0, period)?;
        println!(
            "dt={dt:e}: |r - r_exact| = {:.3e}  |n - n_exact| = {:.3e}  max| |n|-1 | = {:.1e}",
            (end.r - exact.r).norm(),
            (end.n - exact.n).norm(),
            traj.summary.max_norm_err
        );
    }
    Ok(())
}
