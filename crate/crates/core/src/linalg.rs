//! Small 3-vector helpers on top of nalgebra.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Curl from a velocity-gradient tensor stored as `grad[(i, j)] = dV_j/dx_i`.
pub fn curl_from_gradient(grad: &Mat3) -> Vec3 {
    Vec3::new(
        grad[(1, 2)] - grad[(2, 1)],
        grad[(2, 0)] - grad[(0, 2)],
        grad[(0, 1)] - grad[(1, 0)],
    )
}

/// Projector onto the plane orthogonal to the unit vector `b`.
pub fn tangent_projector(b: &Vec3) -> Mat3 {
    Mat3::identity() - b * b.transpose()
}

/// Fixed-order pairwise reduction. The summation tree depends only on the
/// slice length.
pub fn pairwise_sum<T, F>(items: &[T], f: &F) -> Vec3
where
    F: Fn(&T) -> Vec3,
{
    match items.len() {
        0 => Vec3::zeros(),
        1 => f(&items[0]),
        n => {
            let (a, b) = items.split_at(n / 2);
            pairwise_sum(a, f) + pairwise_sum(b, f)
        }
    }
}

pub fn pairwise_sum_mat<T, F>(items: &[T], f: &F) -> Mat3
where
    F: Fn(&T) -> Mat3,
{
    match items.len() {
        0 => Mat3::zeros(),
        1 => f(&items[0]),
        n => {
            let (a, b) = items.split_at(n / 2);
            pairwise_sum_mat(a, f) + pairwise_sum_mat(b, f)
        }
    }
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curl_of_solid_body_rotation_is_twice_omega() {
        // V = w x r, dV_j/dx_i = eps_{jki} w_k
        let w = Vec3::new(0.3, -1.2, 0.7);
        let mut g = Mat3::zeros();
        for i in 0..3 {
            let e = Vec3::ith(i, 1.0);
            let col = w.cross(&e);
            for j in 0..3 {
                g[(i, j)] = col[j];
            }
        }
        let xi = curl_from_gradient(&g);
        assert!((xi - 2.0 * w).norm() < 1e-15);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs = [1.0, 0.5, 0.25];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(4)).collect();
        assert!((log_log_slope(&xs, &ys) - 4.0).abs() < 1e-12);
    }
}
