//! Matérn 5/2 kernel with per-dimension lengthscales.

const SQRT5: f64 = 2.236_067_977_499_79;

/// Scaled distance r = sqrt(Σ ((a_j − b_j) / l_j)²).
#[inline]
pub fn scaled_distance(a: &[f64], b: &[f64], inv_lengthscales: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_lengthscales)
        .map(|((x, y), il)| {
            let t = (x - y) * il;
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Correlation part (1 + √5 r + 5r²/3) exp(−√5 r); multiply by the signal
/// variance for the covariance.
#[inline]
pub fn matern52(r: f64) -> f64 {
    let s = SQRT5 * r;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// ∂k/∂log l_j = σ² (5/3)(1 + √5 r) exp(−√5 r) (Δ_j / l_j)².
#[inline]
pub fn matern52_dlog_lengthscale(r: f64, scaled_diff_sq: f64) -> f64 {
    let s = SQRT5 * r;
    (5.0 / 3.0) * (1.0 + s) * (-s).exp() * scaled_diff_sq
}
