//! Small numeric helpers shared by the series oracles and geometry code.

use std::f64::consts::PI;

/// Trigamma function ψ₁(x) for x > 0, i.e. Σ_{n≥0} 1/(x+n)².
pub fn trigamma(mut x: f64) -> f64 {
    debug_assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let x2 = x * x;
    let x5 = x2 * x2 * x;
    // Asymptotic expansion; the first omitted term is below 1e-15 for x >= 20.
    acc + 1.0 / x + 1.0 / (2.0 * x2) + 1.0 / (6.0 * x2 * x) - 1.0 / (30.0 * x5)
        + 1.0 / (42.0 * x5 * x2)
        - 1.0 / (30.0 * x5 * x2 * x2)
}

/// Σ_{k>K} 1/k².
pub fn inverse_square_tail(k: usize) -> f64 {
    trigamma(k as f64 + 1.0)
}

/// Lebesgue volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2π/d · V_{d-2}
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// Normal-approximation 95% interval half width.
pub const Z95: f64 = 1.959_963_984_540_054;
