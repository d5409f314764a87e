//! Global position error against the rigid-rotation closed form, with
//! pairwise and fitted orders, written as CSV.

use std::collections::BTreeMap;

use ttp::fields::build_provider;
use ttp::integrate::IntegratorConfig;
use ttp::verify::convergence_study;
use ttp::{TtpState, Vec3};

fn main() -> ttp::Result<()> {
    let mut params = BTreeMap::new();
    params.insert("p0".to_string(), 0.5);
    let p = build_provider("rigid_rotation", &params)?;
    let s0 = TtpState::new(0.0, Vec3::new(0.0, 2.0, 0.5), Vec3::new(0.6, 0.0, 0.8), 0.7)?;
    let cfg = IntegratorConfig {
        t_end: 10.0,
        ..Default::default()
    };
    let dts = [4e-2, 2e-2, 1e-2, 5e-3];
    let table = convergence_study(p.as_ref(), &s0, &dts, &cfg)?;
    println!("{table}");
    println!("pairwise orders: {:?}", table.pairwise_orders());
    print!("{}", table.to_csv("direction_error"));
    Ok(())
}
