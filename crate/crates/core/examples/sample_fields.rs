//! Samples every builtin provider at one point and checks its analytic
//! derivatives against central differences.

use std::collections::BTreeMap;

use ttp::fields::{build_provider, fd_verify_derivatives, register_builtin_providers};
use ttp::Vec3;

fn main() -> ttp::Result<()> {
    let r = Vec3::new(0.4, 1.1, 0.3);
    let t = 0.5;
    for desc in register_builtin_providers() {
        let p = build_provider(&desc.name, &BTreeMap::new())?;
        let s = p.sample(&r, t)?;
        let fd = fd_verify_derivatives(p.as_ref(), &r, t, 1e-4)?;
        println!("{}", desc.name);
        println!("  V     = [{:+.6}, {:+.6}, {:+.6}]", s.v.x, s.v.y, s.v.z);
        println!("  xi    = [{:+.6}, {:+.6}, {:+.6}]", s.xi.x, s.xi.y, s.xi.z);
        println!(
            "  p1hat = {:.6}  |grad p1hat| = {:.6}",
            s.p1hat,
            s.grad_p1hat.norm()
        );
        println!("  fd residual (h=1e-4): {:.2e}", fd.max());
    }
    Ok(())
}
