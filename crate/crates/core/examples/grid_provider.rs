//! Samples a Lamb-Oseen vortex onto a grid, reloads it, and compares
//! tricubic and trilinear interpolation with the analytic field.

use std::collections::BTreeMap;

use ttp::fields::{build_provider, parse_grid, render_grid, Interpolation};
use ttp::{FieldProvider, Vec3};

fn main() -> ttp::Result<()> {
    let exact = build_provider("lamb_oseen", &BTreeMap::new())?;
    let n = 41;
    let lo = Vec3::repeat(-2.0);
    let spacing = Vec3::repeat(4.0 / (n - 1) as f64);
    let text = render_grid(exact.as_ref(), [n, n, n], lo, spacing, 0.0)?;

    let probes = [Vec3::new(0.31, -0.47, 0.12), Vec3::new(1.13, 0.77, -0.6)];
    for interp in [Interpolation::Tricubic, Interpolation::Trilinear] {
        let grid = parse_grid(&text, interp)?;
        for r in &probes {
            let a = exact.sample(r, 0.0)?;
            let g = grid.sample(r, 0.0)?;
            println!(
                "{interp:<9} r={:?}: |dV|={:.2e} |d xi|={:.2e} |d grad p1hat|={:.2e}",
                r.as_slice(),
                (g.v - a.v).norm(),
                (g.xi - a.xi).norm(),
                (g.grad_p1hat - a.grad_p1hat).norm()
            );
        }
    }
    Ok(())
}
