//! Standard normal density, CDF, and quantile helpers.

use statrs::function::erf;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.39894228040143268;

#[inline]
pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / SQRT_2)
}

/// Inverse CDF on the open interval (0, 1).
#[inline]
pub(crate) fn std_normal_inv_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    -SQRT_2 * erf::erfc_inv(2.0 * p)
}
