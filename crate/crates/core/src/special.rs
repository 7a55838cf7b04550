//! Special functions used by the analytic tail sums and the Gaussian pivots.

use statrs::function::erf::erfc_inv;

/// Even-index Bernoulli numbers B_2, B_4, ..., B_20.
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta function ζ(s, a) = Σ_{j≥0} (a + j)^{-s} for s > 1, a > 0.
///
/// Evaluated by direct summation of the leading terms followed by the
/// Euler–Maclaurin remainder. Relative accuracy is near machine precision
/// over the parameter ranges used here (1 < s ≤ 60, a > 0).
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0, "hurwitz_zeta requires s > 1, got {s}");
    assert!(a > 0.0, "hurwitz_zeta requires a > 0, got {a}");
    let shift = (s.ceil() as usize).max(12);
    let head: f64 = (0..shift).map(|j| (a + j as f64).powf(-s)).sum();
    let x = a + shift as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // Rising factorial s(s+1)...(s+2i-2) / (2i)! times x^{-s-2i+1}.
    let mut factor = s * x.powf(-s - 1.0) / 2.0;
    for (i, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b * factor;
        tail += term;
        if term.abs() < 1e-18 * tail.abs() {
            break;
        }
        let m = (2 * i + 2) as f64;
        factor *= (s + m - 1.0) * (s + m) / ((m + 1.0) * (m + 2.0)) / (x * x);
    }
    head + tail
}

/// Standard normal quantile Φ⁻¹(p) for p ∈ (0, 1), via the inverse
/// complementary error function: Φ⁻¹(p) = −√2 · erfc⁻¹(2p).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile requires p in (0,1), got {p}");
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Two-sided critical value z_{(1+level)/2}.
pub fn two_sided_z(level: f64) -> f64 {
    normal_quantile(0.5 * (1.0 + level))
}

pub fn gamma_fn(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
