//! Tangency drift `max |n . b|` in decaying Taylor-Green cells for the
//! rotation-based and the plain-vector RK4 updates.

use std::collections::BTreeMap;

use ttp::ensemble::tangent_frame;
use ttp::fields::build_provider;
use ttp::integrate::{IntegratorConfig, Method};
use ttp::kinetics::isobaric_normal;
use ttp::verify::tangency_drift_study;
use ttp::{TtpState, Vec3};

fn main() -> ttp::Result<()> {
    let p = build_provider("taylor_green", &BTreeMap::new())?;
    let r0 = Vec3::new(0.3, 0.1, 0.1);
    let b = isobaric_normal(&p.sample(&r0, 0.0)?, 1e-10)
        .vector()
        .expect("non-degenerate gradient at r0");
    let (e1, _) = tangent_frame(&b);
    let s0 = TtpState::new(0.0, r0, e1, 1.0)?;

    for (method, renorm) in [
        (Method::Rk4Rodrigues, None),
        (Method::Rk4Naive, None),
        (Method::Rk4Naive, Some(1)),
    ] {
        let cfg = IntegratorConfig {
            t_end: 1.0,
            method,
            renormalize_every: renorm,
            ..Default::default()
        };
        let table = tangency_drift_study(p.as_ref(), &s0, &[4e-3, 2e-3, 1e-3], &cfg)?;
        println!("renormalize_every={renorm:?}\n{table}\n");
    }
    Ok(())
}
