//! Checks `Omega = b x db/dt` against finite differences of `b` along the
//! particle path, and reports how far the decomposed route lands from it.

use std::collections::BTreeMap;

use ttp::fields::{build_provider, register_builtin_providers};
use ttp::verify::{omega_fd_convergence, omega_identity_sweep, tangency_cancellation_sweep};

fn main() -> ttp::Result<()> {
    for desc in register_builtin_providers() {
        let p = build_provider(&desc.name, &BTreeMap::new())?;
        let report = omega_identity_sweep(p.as_ref(), 500, 7, 1e-5, 0.0)?;
        println!("{report}");
        let (cancel, used) = tangency_cancellation_sweep(p.as_ref(), 500, 7, 0.0)?;
        println!("  (Omega x n).b + n.db/dt: max relative {cancel:.2e} over {used} states");
        if !report.points.is_empty() {
            let table = omega_fd_convergence(p.as_ref(), 200, 7, &[4e-3, 2e-3, 1e-3], 0.0)?;
            println!("{table}");
        }
        println!();
    }
    Ok(())
}
