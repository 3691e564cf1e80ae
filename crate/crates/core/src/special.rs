//! Scalar special functions shared by the hazard, limit, and analysis code.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// Density of the standard normal distribution.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Cumulative distribution function of the standard normal distribution.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// The scaled normal tail `√(2π) Φ(−x) exp(x²/2)` for `x ≥ 0`, equal to the
/// Mills ratio `Φ(−x)/φ(x)`.
///
/// The naive product overflows once `exp(x²/2)` leaves the double range, so
/// large arguments switch to the asymptotic expansion
/// `x⁻¹(1 − x⁻² + 3x⁻⁴ − 15x⁻⁶ + 105x⁻⁸)`.
pub fn mills_ratio(x: f64) -> f64 {
    assert!(x >= 0.0, "mills_ratio requires x >= 0, got {x}");
    if x <= 30.0 {
        (2.0 * std::f64::consts::PI).sqrt() * normal_cdf(-x) * (0.5 * x * x).exp()
    } else {
        let ix2 = 1.0 / (x * x);
        (1.0 - ix2 * (1.0 - ix2 * (3.0 - ix2 * (15.0 - ix2 * 105.0)))) / x
    }
}

/// `Γ((l+1)/2) / Γ(l/2)` for a positive integer `l`.
pub fn gamma_half_ratio(l: usize) -> f64 {
    assert!(l >= 1);
    let l = l as f64;
    (ln_gamma((l + 1.0) / 2.0) - ln_gamma(l / 2.0)).exp()
}
