//! Steady rectilinear grids with tricubic (natural cubic B-spline) or
//! trilinear interpolation.
//!
//! File layout (`TTPGRID 1`):
//!
//! ```text
//! TTPGRID 1
//! dims nx ny nz
//! origin ox oy oz
//! spacing dx dy dz
//! fields V p1hat
//! Vx Vy Vz p1hat      <- nx*ny*nz records, x fastest
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{DomainBounds, FieldProvider, FieldProviderDescriptor, FluidSample};
use crate::error::{Result, TtpError};
use crate::linalg::{curl_from_gradient, Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Tensor-product natural cubic spline; C2, so the pressure Hessian is continuous.
    #[default]
    Tricubic,
    /// Piecewise trilinear. Second derivatives are cell-wise and jump across faces.
    Trilinear,
}

impl std::str::FromStr for Interpolation {
    type Err = TtpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tricubic" => Ok(Interpolation::Tricubic),
            "trilinear" => Ok(Interpolation::Trilinear),
            other => Err(TtpError::validation(
                "field.interpolation",
                format!("expected tricubic or trilinear, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Interpolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Interpolation::Tricubic => "tricubic",
            Interpolation::Trilinear => "trilinear",
        })
    }
}

/// Interpolation coefficients for one scalar component.
#[derive(Debug, Clone)]
struct Coefficients {
    data: Vec<f64>,
    /// Extent per axis (n + 2 for tricubic, n for trilinear).
    ext: [usize; 3],
}

impl Coefficients {
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[i + self.ext[0] * (j + self.ext[1] * k)]
    }
}

/// Natural cubic spline in B-spline form: maps n nodal values to n + 2
/// coefficients `c[-1..=n]`, stored from index 0.
fn spline_prefilter_line(values: &[f64], out: &mut [f64]) {
    let n = values.len();
    debug_assert_eq!(out.len(), n + 2);
    let c = &mut out[1..=n];
    c[0] = values[0];
    c[n - 1] = values[n - 1];
    if n > 2 {
        // c[i-1] + 4 c[i] + c[i+1] = 6 y[i], i = 1..n-2, Thomas algorithm
        let m = n - 2;
        let mut diag = vec![4.0; m];
        let mut rhs: Vec<f64> = (1..=m).map(|i| 6.0 * values[i]).collect();
        rhs[0] -= c[0];
        rhs[m - 1] -= c[n - 1];
        for i in 1..m {
            let w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        c[m] = rhs[m - 1] / diag[m - 1];
        for i in (1..m).rev() {
            c[i] = (rhs[i - 1] - c[i + 1]) / diag[i - 1];
        }
    }
    let (first, second) = (out[1], out[2]);
    out[0] = 2.0 * first - second;
    let (last, before) = (out[n], out[n - 1]);
    out[n + 1] = 2.0 * last - before;
}

fn prefilter(values: &[f64], dims: [usize; 3]) -> Coefficients {
    let ext = [dims[0] + 2, dims[1] + 2, dims[2] + 2];
    let mut data = vec![0.0; ext[0] * ext[1] * ext[2]];
    let idx = |i: usize, j: usize, k: usize| i + ext[0] * (j + ext[1] * k);
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                data[idx(i + 1, j + 1, k + 1)] = values[i + dims[0] * (j + dims[1] * k)];
            }
        }
    }
    // Each line filter reads only interior slots of its own axis, so lines
    // through not-yet-filtered extension slots are harmless.
    for axis in 0..3 {
        let n = dims[axis];
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n + 2];
        for p in 0..ext[a] {
            for q in 0..ext[b] {
                let at = |s: usize| {
                    let mut ijk = [0; 3];
                    ijk[axis] = s;
                    ijk[a] = p;
                    ijk[b] = q;
                    idx(ijk[0], ijk[1], ijk[2])
                };
                for s in 0..n {
                    line[s] = data[at(s + 1)];
                }
                spline_prefilter_line(&line, &mut out);
                for s in 0..n + 2 {
                    data[at(s)] = out[s];
                }
            }
        }
    }
    Coefficients { data, ext }
}

/// Basis weights and their first two derivatives in local cell coordinate `u`.
#[derive(Debug, Clone, Copy)]
struct AxisWeights {
    /// First coefficient index touched.
    base: usize,
    len: usize,
    w: [[f64; 4]; 3],
}

fn cubic_weights(cell: usize, u: f64) -> AxisWeights {
    let v = 1.0 - u;
    let (u2, u3) = (u * u, u * u * u);
    AxisWeights {
        // coefficient c[cell - 1] lives at storage index cell
        base: cell,
        len: 4,
        w: [
            [
                v * v * v / 6.0,
                (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
                (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
                u3 / 6.0,
            ],
            [
                -v * v / 2.0,
                (3.0 * u2 - 4.0 * u) / 2.0,
                (-3.0 * u2 + 2.0 * u + 1.0) / 2.0,
                u2 / 2.0,
            ],
            [v, 3.0 * u - 2.0, 1.0 - 3.0 * u, u],
        ],
    }
}

fn linear_weights(cell: usize, u: f64) -> AxisWeights {
    AxisWeights {
        base: cell,
        len: 2,
        w: [[1.0 - u, u, 0.0, 0.0], [-1.0, 1.0, 0.0, 0.0], [0.0; 4]],
    }
}

/// Value, gradient and Hessian of one interpolated scalar.
#[derive(Debug, Clone, Copy)]
struct Jet {
    value: f64,
    grad: Vec3,
    hess: Mat3,
}

#[derive(Debug, Clone)]
pub struct GridProvider {
    dims: [usize; 3],
    origin: Vec3,
    spacing: Vec3,
    interpolation: Interpolation,
    /// Vx, Vy, Vz, p1hat.
    components: [Coefficients; 4],
    descriptor: FieldProviderDescriptor,
}

impl GridProvider {
    /// Builds a provider from records in x-fastest order, each `[Vx, Vy, Vz, p1hat]`.
    pub fn from_records(
        dims: [usize; 3],
        origin: Vec3,
        spacing: Vec3,
        records: &[[f64; 4]],
        interpolation: Interpolation,
    ) -> Result<Self> {
        if dims.iter().any(|&n| n < 2) {
            return Err(TtpError::validation(
                "dims",
                "each axis needs at least 2 nodes",
            ));
        }
        if (0..3).any(|i| !(spacing[i] > 0.0 && spacing[i].is_finite())) {
            return Err(TtpError::validation("spacing", "spacing must be positive"));
        }
        let count = dims[0] * dims[1] * dims[2];
        if records.len() != count {
            return Err(TtpError::validation(
                "records",
                format!("expected {count} records, got {}", records.len()),
            ));
        }
        let components = std::array::from_fn(|c| {
            let values: Vec<f64> = records.iter().map(|rec| rec[c]).collect();
            match interpolation {
                Interpolation::Tricubic => prefilter(&values, dims),
                Interpolation::Trilinear => Coefficients {
                    data: values,
                    ext: dims,
                },
            }
        });
        let max = origin + Vec3::from_fn(|i, _| spacing[i] * (dims[i] - 1) as f64);
        let margin = 2.0 * spacing;
        let sweep_box = if (0..3).all(|i| max[i] - origin[i] > 2.0 * margin[i]) {
            (origin + margin, max - margin)
        } else {
            (origin, max)
        };
        let mut parameters = std::collections::BTreeMap::new();
        for (i, axis) in ["x", "y", "z"].iter().enumerate() {
            parameters.insert(format!("n{axis}"), dims[i] as f64);
            parameters.insert(format!("d{axis}"), spacing[i]);
        }
        Ok(GridProvider {
            dims,
            origin,
            spacing,
            interpolation,
            components,
            descriptor: FieldProviderDescriptor {
                name: "grid".into(),
                parameters,
                time_dependent: false,
                domain_bounds: DomainBounds::Box { min: origin, max },
                time_range: (f64::NEG_INFINITY, f64::INFINITY),
                sweep_box,
                description: match interpolation {
                    Interpolation::Tricubic => "steady grid, tricubic spline",
                    Interpolation::Trilinear => {
                        "steady grid, trilinear (pressure Hessian discontinuous across cell faces)"
                    }
                },
            },
        })
    }

    /// Builds a provider from explicit node coordinates, which must be
    /// uniformly spaced along each axis.
    pub fn from_axes(
        axes: [&[f64]; 3],
        records: &[[f64; 4]],
        interpolation: Interpolation,
    ) -> Result<Self> {
        let mut spacing = Vec3::zeros();
        for (i, coords) in axes.iter().enumerate() {
            let name = ['x', 'y', 'z'][i];
            if coords.len() < 2 {
                return Err(TtpError::validation(
                    "dims",
                    "each axis needs at least 2 nodes",
                ));
            }
            let d = (coords[coords.len() - 1] - coords[0]) / (coords.len() - 1) as f64;
            let tol = 1e-9 * d.abs().max(f64::MIN_POSITIVE);
            for (m, pair) in coords.windows(2).enumerate() {
                if ((pair[1] - pair[0]) - d).abs() > tol {
                    return Err(TtpError::NonUniformSpacing {
                        axis: name,
                        message: format!(
                            "step {m} is {} but the mean step is {d}",
                            pair[1] - pair[0]
                        ),
                    });
                }
            }
            spacing[i] = d;
        }
        let origin = Vec3::new(axes[0][0], axes[1][0], axes[2][0]);
        let dims = [axes[0].len(), axes[1].len(), axes[2].len()];
        Self::from_records(dims, origin, spacing, records, interpolation)
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    fn axis_weights(&self, r: &Vec3) -> [AxisWeights; 3] {
        std::array::from_fn(|i| {
            let s = (r[i] - self.origin[i]) / self.spacing[i];
            let cell = (s.floor().max(0.0) as usize).min(self.dims[i] - 2);
            let u = s - cell as f64;
            match self.interpolation {
                Interpolation::Tricubic => cubic_weights(cell, u),
                Interpolation::Trilinear => linear_weights(cell, u),
            }
        })
    }

    fn jet(&self, coeffs: &Coefficients, w: &[AxisWeights; 3]) -> Jet {
        // derivative orders per axis for value, gradient, Hessian entries
        const ORDERS: [[usize; 3]; 10] = [
            [0, 0, 0],
            [1, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
            [2, 0, 0],
            [0, 2, 0],
            [0, 0, 2],
            [1, 1, 0],
            [1, 0, 1],
            [0, 1, 1],
        ];
        let mut acc = [0.0; 10];
        for c in 0..w[2].len {
            for b in 0..w[1].len {
                for a in 0..w[0].len {
                    let coef = coeffs.at(w[0].base + a, w[1].base + b, w[2].base + c);
                    for (slot, ord) in acc.iter_mut().zip(ORDERS.iter()) {
                        *slot += coef * w[0].w[ord[0]][a] * w[1].w[ord[1]][b] * w[2].w[ord[2]][c];
                    }
                }
            }
        }
        let inv = Vec3::from_fn(|i, _| 1.0 / self.spacing[i]);
        let grad = Vec3::new(acc[1] * inv.x, acc[2] * inv.y, acc[3] * inv.z);
        let mut hess = Mat3::zeros();
        hess[(0, 0)] = acc[4] * inv.x * inv.x;
        hess[(1, 1)] = acc[5] * inv.y * inv.y;
        hess[(2, 2)] = acc[6] * inv.z * inv.z;
        hess[(0, 1)] = acc[7] * inv.x * inv.y;
        hess[(0, 2)] = acc[8] * inv.x * inv.z;
        hess[(1, 2)] = acc[9] * inv.y * inv.z;
        hess[(1, 0)] = hess[(0, 1)];
        hess[(2, 0)] = hess[(0, 2)];
        hess[(2, 1)] = hess[(1, 2)];
        Jet {
            value: acc[0],
            grad,
            hess,
        }
    }
}

impl FieldProvider for GridProvider {
    fn descriptor(&self) -> &FieldProviderDescriptor {
        &self.descriptor
    }

    fn sample(&self, r: &Vec3, t: f64) -> Result<FluidSample> {
        self.descriptor.check(r, t)?;
        let w = self.axis_weights(r);
        let mut v = Vec3::zeros();
        let mut grad_v = Mat3::zeros();
        for j in 0..3 {
            let jet = self.jet(&self.components[j], &w);
            v[j] = jet.value;
            for i in 0..3 {
                grad_v[(i, j)] = jet.grad[i];
            }
        }
        let p = self.jet(&self.components[3], &w);
        if p.value < 0.0 {
            return Err(TtpError::NegativePressure {
                p1hat: p.value,
                r: [r.x, r.y, r.z],
            });
        }
        Ok(FluidSample {
            v,
            grad_v,
            xi: curl_from_gradient(&grad_v),
            p1hat: p.value,
            grad_p1hat: p.grad,
            hess_p1hat: p.hess,
            dt_grad_p1hat: Vec3::zeros(),
        })
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> TtpError {
    TtpError::Parse {
        line,
        message: message.into(),
    }
}

fn header_values<T: std::str::FromStr>(
    lines: &[&str],
    line_no: usize,
    keyword: &str,
) -> Result<[T; 3]> {
    let line = lines
        .get(line_no - 1)
        .ok_or_else(|| parse_err(line_no, format!("missing `{keyword}` line")))?;
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some(keyword) {
        return Err(parse_err(line_no, format!("expected `{keyword} a b c`")));
    }
    let vals: Vec<T> = tokens
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| parse_err(line_no, format!("cannot parse `{tok}`")))
        })
        .collect::<Result<_>>()?;
    vals.try_into()
        .map_err(|_| parse_err(line_no, format!("`{keyword}` takes exactly 3 values")))
}

/// Parses a grid from text in the `TTPGRID 1` format.
pub fn parse_grid(text: &str, interpolation: Interpolation) -> Result<GridProvider> {
    let lines: Vec<&str> = text.lines().collect();
    if lines
        .first()
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
        != Some(vec!["TTPGRID", "1"])
    {
        return Err(parse_err(1, "expected `TTPGRID 1`"));
    }
    let dims: [usize; 3] = header_values(&lines, 2, "dims")?;
    if dims.contains(&0) {
        return Err(parse_err(2, "dims must be positive integers"));
    }
    let origin: [f64; 3] = header_values(&lines, 3, "origin")?;
    let spacing: [f64; 3] = header_values(&lines, 4, "spacing")?;
    if spacing.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(parse_err(4, "spacing must be positive reals"));
    }
    match lines
        .get(4)
        .map(|l| l.split_whitespace().collect::<Vec<_>>())
    {
        Some(tokens) if tokens == ["fields", "V", "p1hat"] => {}
        _ => return Err(parse_err(5, "expected `fields V p1hat`")),
    }

    let expected = dims[0] * dims[1] * dims[2];
    let mut records = Vec::with_capacity(expected);
    for (offset, line) in lines.iter().enumerate().skip(5) {
        let line_no = offset + 1;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| parse_err(line_no, format!("cannot parse `{tok}`")))
            })
            .collect::<Result<_>>()?;
        let rec: [f64; 4] = vals
            .try_into()
            .map_err(|_| parse_err(line_no, "record needs exactly 4 values: Vx Vy Vz p1hat"))?;
        if records.len() == expected {
            return Err(parse_err(line_no, format!("more than {expected} records")));
        }
        records.push(rec);
    }
    if records.len() != expected {
        return Err(parse_err(
            lines.len(),
            format!("expected {expected} records, found {}", records.len()),
        ));
    }
    if dims.iter().any(|&n| n < 2) {
        return Err(parse_err(2, "each axis needs at least 2 nodes"));
    }
    GridProvider::from_records(
        dims,
        Vec3::from(origin),
        Vec3::from(spacing),
        &records,
        interpolation,
    )
}

pub fn load_grid(path: impl AsRef<Path>, interpolation: Interpolation) -> Result<GridProvider> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| TtpError::io(path.as_ref(), e))?;
    parse_grid(&text, interpolation)
}

/// Samples `provider` at `t` on a grid and renders it in the `TTPGRID 1` format.
pub fn render_grid(
    provider: &dyn FieldProvider,
    dims: [usize; 3],
    origin: Vec3,
    spacing: Vec3,
    t: f64,
) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "TTPGRID 1");
    let _ = writeln!(out, "dims {} {} {}", dims[0], dims[1], dims[2]);
    let _ = writeln!(
        out,
        "origin {:.16e} {:.16e} {:.16e}",
        origin.x, origin.y, origin.z
    );
    let _ = writeln!(
        out,
        "spacing {:.16e} {:.16e} {:.16e}",
        spacing.x, spacing.y, spacing.z
    );
    let _ = writeln!(out, "fields V p1hat");
    for k in 0..dims[2] {
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                let r = origin
                    + Vec3::new(
                        i as f64 * spacing.x,
                        j as f64 * spacing.y,
                        k as f64 * spacing.z,
                    );
                let s = provider.sample(&r, t)?;
                let _ = writeln!(
                    out,
                    "{:.16e} {:.16e} {:.16e} {:.16e}",
                    s.v.x, s.v.y, s.v.z, s.p1hat
                );
            }
        }
    }
    Ok(out)
}

pub fn write_grid(
    path: impl AsRef<Path>,
    provider: &dyn FieldProvider,
    dims: [usize; 3],
    origin: Vec3,
    spacing: Vec3,
    t: f64,
) -> Result<()> {
    let text = render_grid(provider, dims, origin, spacing, t)?;
    fs::write(path.as_ref(), text).map_err(|e| TtpError::io(path.as_ref(), e))
}
