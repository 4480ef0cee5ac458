//! Standard normal density, distribution function and its logarithm.

use libm::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// `Φ(z)`, accurate in relative terms in the lower tail.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln Φ(z)`, finite for every finite `z`.
pub fn ln_cdf(z: f64) -> f64 {
    if z > -30.0 {
        let p = cdf(z);
        if p > 0.5 {
            // ln(1 − Φ(−z)) without cancellation.
            (-cdf(-z)).ln_1p()
        } else {
            p.ln()
        }
    } else {
        // Mills ratio asymptotics: Φ(z) ≈ φ(z)/|z| · (1 − 1/z² + 3/z⁴ − 15/z⁶).
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - LN_SQRT_2PI - (-z).ln() + series.ln()
    }
}
