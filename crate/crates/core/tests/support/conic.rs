//! Least-squares conic fit, independent of the closed-form conic.

use anisotag_core::geometry::Point2;
use nalgebra::{DMatrix, SVD};

/// Eccentricity and focus recovered from a least-squares conic through
/// `points`, independent of the closed form.
pub struct FittedConic {
    pub eccentricity: f64,
    /// Both foci on the axis `v = 0`; a circle reports its centre twice.
    pub foci: [f64; 2],
    /// Coefficients of `u v` and `v`, relative to the largest; zero for a
    /// conic symmetric about `v = 0`.
    pub asymmetry: f64,
}

pub fn fit_conic(points: &[Point2]) -> FittedConic {
    // Scaling keeps the design matrix well conditioned for far samples.
    let scale = points.iter().map(|p| p.u.hypot(p.v)).sum::<f64>() / points.len() as f64;
    let rows: Vec<f64> = points
        .iter()
        .flat_map(|p| {
            let (u, v) = (p.u / scale, p.v / scale);
            [u * u, u * v, v * v, u, v, 1.0]
        })
        .collect();
    let design = DMatrix::from_row_slice(points.len(), 6, &rows);
    let svd = SVD::new(design.transpose() * &design, true, true);
    let (idx, _) = svd.singular_values.argmin();
    let c = svd.v_t.expect("requested").row(idx).transpose();
    let (a, b, cc, d, e, f) = (c[0], c[1], c[2], c[3] * scale, c[4] * scale, c[5] * scale * scale);
    let largest = [a, b, cc].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // Axis along u: (1 - e^2) u^2 + v^2 + d1 u + f0 = 0 after dividing by C.
    let (ra, d1, f0) = (a / cc, d / cc, f / cc);
    let e2 = 1.0 - ra;
    let foci = if e2.abs() < 1e-12 {
        [-d1 / 2.0; 2]
    } else {
        // f solves 4 e^2 f^2 - (d1 + 2 f)^2 - 4 e^2 f0 = 0.
        let qa = 4.0 * e2 - 4.0;
        let qb = -4.0 * d1;
        let qc = -d1 * d1 - 4.0 * e2 * f0;
        if qa.abs() < 1e-14 {
            [-qc / qb; 2]
        } else {
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            [(-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa)]
        }
    };
    FittedConic {
        eccentricity: e2.max(0.0).sqrt(),
        foci,
        asymmetry: b.abs().max(e.abs() / scale) / largest,
    }
}
