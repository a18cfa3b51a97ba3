//! Standard normal density, distribution function and the scaled
//! complementary error function.
//!
//! Everything here is written against `libm` so the crate stays `no_std`.
//! The tail paths never form `exp(-x^2)` and `erfc(x)` separately, which is
//! what keeps the inverse Mills ratio finite out to |x| ~ 38 and beyond.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

/// `1 / sqrt(2 pi)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// `0.5 * ln(2 pi)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
/// `sqrt(pi / 2)`.
pub const SQRT_FRAC_PI_2: f64 = 1.253_314_137_315_500_3;

/// Standardized argument beyond which the continued fractions take over.
pub const TAIL_SWITCH: f64 = 5.0;

const ERFCX_CF_SWITCH: f64 = TAIL_SWITCH * FRAC_1_SQRT_2;
const CF_TERMS: usize = 60;

/// Standard normal density.
#[inline]
pub fn phi(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// `ln phi(x)`.
#[inline]
pub fn ln_phi(x: f64) -> f64 {
    -0.5 * x * x - HALF_LN_2PI
}

/// Standard normal distribution function.
pub fn cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
    } else {
        1.0 - 0.5 * libm::erfc(x * FRAC_1_SQRT_2)
    }
}

/// Upper tail `1 - Phi(x)`, accurate for large positive `x`.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// `ln Phi(x)` without underflow in the lower tail.
pub fn ln_cdf(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if x < -TAIL_SWITCH {
        // Phi(x) = phi(x) / lambda(x), with lambda the inverse Mills ratio.
        ln_phi(x) - libm::log(inverse_mills(x))
    } else if x < 0.0 {
        libm::log(cdf(x))
    } else {
        libm::log1p(-0.5 * libm::erfc(x * FRAC_1_SQRT_2))
    }
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
///
/// Finite for every finite `x >= 0`; overflows for large negative `x`
/// where the true value does.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        // erfcx(x) = 2 exp(x^2) - erfcx(-x)
        return 2.0 * exp_square(x) - erfcx(-x);
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < ERFCX_CF_SWITCH {
        exp_square(x) * libm::erfc(x)
    } else {
        erfcx_cf(x)
    }
}

/// erfcx(x) = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
fn erfcx_cf(x: f64) -> f64 {
    let mut t = x;
    for n in (1..=CF_TERMS).rev() {
        t = x + (n as f64 * 0.5) / t;
    }
    1.0 / (libm::sqrt(PI) * t)
}

/// `exp(x^2)` with the rounding error of `x*x` folded back in.
fn exp_square(x: f64) -> f64 {
    let hi = x * x;
    let lo = libm::fma(x, x, -hi);
    libm::exp(hi) * (1.0 + lo)
}

/// Inverse Mills ratio `phi(x) / Phi(x)`.
///
/// Uses `erfcx` so there is no `0/0` in the lower tail: for `x -> -inf` the
/// ratio behaves like `-x`.
pub fn inverse_mills(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < 0.0 {
        // Phi(x) = 0.5 erfcx(-x/sqrt2) exp(-x^2/2)
        1.0 / (SQRT_FRAC_PI_2 * erfcx(-x * FRAC_1_SQRT_2))
    } else {
        phi(x) / cdf(x)
    }
}

/// For `x > 0`, returns `(delta, g)` where the inverse Mills ratio at `-x` is
/// `x + delta` and `delta = 1/(x + g)`, both read off the Mills-ratio
/// continued fraction. Only meaningful in the tail (`x > TAIL_SWITCH`),
/// where they let the truncated variance be formed without cancellation.
pub(crate) fn mills_tail_parts(x: f64) -> (f64, f64) {
    // 1/R(x) = x + 1/(x + 2/(x + 3/(x + ...)))
    let mut t = x;
    for n in (3..=CF_TERMS).rev() {
        t = x + n as f64 / t;
    }
    let g = 2.0 / t;
    let delta = 1.0 / (x + g);
    (delta, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_symmetry_and_center() {
        assert_eq!(cdf(0.0), 0.5);
        for i in 0..200 {
            let x = -10.0 + i as f64 * 0.1;
            assert!((cdf(x) + cdf(-x) - 1.0).abs() <= 1e-15, "x = {x}");
        }
    }

    #[test]
    fn cdf_is_monotone() {
        let mut prev = 0.0;
        for i in 0..=800 {
            let x = -40.0 + i as f64 * 0.1;
            let c = cdf(x);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn erfcx_branches_agree_at_switch() {
        let x = ERFCX_CF_SWITCH;
        let direct = exp_square(x) * libm::erfc(x);
        let cf = erfcx_cf(x);
        assert!((direct - cf).abs() / direct < 1e-13);
        for &x in &[3.6, 4.0, 6.0, 10.0, 20.0] {
            let direct = exp_square(x) * libm::erfc(x);
            assert!((direct - erfcx(x)).abs() / direct < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn erfcx_reference_values() {
        // mpmath, 30 digits
        let cases = [
            (0.0, 1.0),
            (1.0, 0.427_583_576_155_807),
            (5.0, 0.110_704_637_733_068_6),
            (30.0, 0.018_795_888_861_416_75),
        ];
        for (x, want) in cases {
            assert!((erfcx(x) - want).abs() / want < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn ln_cdf_deep_tail() {
        // ln Phi(-10) from 50-digit quadrature
        let want = -53.231_285_150_512_47;
        assert!((ln_cdf(-10.0) - want).abs() / want.abs() < 1e-14);
        assert!(ln_cdf(-38.0).is_finite());
        assert!(ln_cdf(-1e3).is_finite());
    }

    #[test]
    fn inverse_mills_tail_is_finite() {
        for i in 0..=400 {
            let x = -40.0 + i as f64 * 0.1;
            let r = inverse_mills(x);
            assert!(r.is_finite() && r > 0.0 && r > -x);
        }
    }

    #[test]
    fn mills_parts_match_erfcx_route() {
        for &x in &[5.5, 8.0, 20.0, 38.0] {
            let (delta, _) = mills_tail_parts(x);
            let lambda = inverse_mills(-x);
            assert!(((x + delta) - lambda).abs() / lambda < 1e-14, "x = {x}");
        }
    }
}
