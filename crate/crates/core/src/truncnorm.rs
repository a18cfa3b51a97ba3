//! Moments, log-normalizer and entropy of the truncated normal
//! `TN(mu, sigma, lower, upper)`.
//!
//! All entry points take a two-sided window; one-sided truncation is just an
//! infinite side. Work is done on the standardized window
//! `[(lower - mu)/sigma, (upper - mu)/sigma]`, reflected so that its near
//! side (the one closest to zero) is the upper one. Three regimes:
//!
//! * narrow windows, where `ln phi` varies by at most [`NARROW_SPREAD`]
//!   across the window: fixed Gauss-Legendre rule on `phi(t)/phi(anchor)`,
//!   which is smooth and bounded by one there;
//! * windows entirely in the lower tail: boundary terms expressed through
//!   `erfcx`, anchored at the near side, so nothing underflows;
//! * windows straddling zero: plain `erf` differences.

use core::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::model::CensoringBound;
use crate::special::{self, erfcx, ln_phi, phi, SQRT_FRAC_PI_2, TAIL_SWITCH};

/// Spread of `ln phi` over the window below which quadrature is used.
pub const NARROW_SPREAD: f64 = 4.0;

/// `0.5 * ln(2 pi e)`, the entropy of the standard normal.
pub const STD_NORMAL_ENTROPY: f64 = 1.418_938_533_204_672_7;

// 32-point Gauss-Legendre rule on [-1, 1], positive half.
const GL_NODES: [f64; 16] = [
    0.048_307_665_687_738_31,
    0.144_471_961_582_796_5,
    0.239_287_362_252_137_06,
    0.331_868_602_282_127_67,
    0.421_351_276_130_635_33,
    0.506_899_908_932_229_4,
    0.587_715_757_240_762_3,
    0.663_044_266_930_215_2,
    0.732_182_118_740_289_7,
    0.794_483_795_967_942_4,
    0.849_367_613_732_57,
    0.896_321_155_766_052_2,
    0.934_906_075_937_739_7,
    0.964_762_255_587_506_4,
    0.985_611_511_545_268_4,
    0.997_263_861_849_481_6,
];
const GL_WEIGHTS: [f64; 16] = [
    0.096_540_088_514_727_81,
    0.095_638_720_079_274_83,
    0.093_844_399_080_804_57,
    0.091_173_878_695_763_86,
    0.087_652_093_004_403_91,
    0.083_311_924_226_946_85,
    0.078_193_895_787_070_31,
    0.072_345_794_108_848_45,
    0.065_822_222_776_361_75,
    0.058_684_093_478_535_704,
    0.050_998_059_262_376_244,
    0.042_835_898_022_226_43,
    0.034_273_862_913_021_63,
    0.025_392_065_309_262_427,
    0.016_274_394_730_905_965,
    0.007_018_610_009_469_298,
];

/// Everything the fitter needs from one truncated normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TnMoments {
    /// `ln(Phi(beta_hat) - Phi(alpha_hat))`.
    pub log_normalizer: f64,
    pub mean: f64,
    pub variance: f64,
    /// `E[X^2] = mean^2 + variance`.
    pub second_moment: f64,
    /// Differential entropy.
    pub entropy: f64,
}

/// Standardized quantities, before shifting and scaling back.
#[derive(Debug, Clone, Copy)]
struct Standard {
    log_z: f64,
    mean: f64,
    var: f64,
    entropy: f64,
}

/// Truncated normal with location `mu`, scale `sigma` and window `bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    mu: f64,
    sigma: f64,
    bound: CensoringBound,
}

impl TruncatedNormal {
    pub fn new(mu: f64, sigma: f64, bound: CensoringBound) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain("sigma must be positive and finite"));
        }
        if !mu.is_finite() {
            return Err(Error::Domain("mu must be finite"));
        }
        if !bound.is_valid() {
            return Err(Error::Domain("truncation window requires lower < upper"));
        }
        Ok(TruncatedNormal { mu, sigma, bound })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bound(&self) -> CensoringBound {
        self.bound
    }

    pub fn moments(&self) -> TnMoments {
        let alpha = (self.bound.lower - self.mu) / self.sigma;
        let beta = (self.bound.upper - self.mu) / self.sigma;
        let s = standardized(alpha, beta);
        let mean = clamp_into(self.mu + self.sigma * s.mean, &self.bound);
        let variance = self.sigma * self.sigma * s.var;
        TnMoments {
            log_normalizer: s.log_z,
            mean,
            variance,
            second_moment: mean * mean + variance,
            entropy: s.entropy + libm::log(self.sigma),
        }
    }

    /// Density at `x` (zero outside the window).
    pub fn pdf(&self, x: f64) -> f64 {
        if !self.bound.contains(x) {
            return 0.0;
        }
        let log_z = self.moments().log_normalizer;
        let z = (x - self.mu) / self.sigma;
        libm::exp(ln_phi(z) - log_z) / self.sigma
    }
}

/// Rounding in `mu + sigma * m` can land on or a hair outside a tight
/// window; the true mean is always strictly inside.
fn clamp_into(value: f64, bound: &CensoringBound) -> f64 {
    let inside = value.max(bound.lower).min(bound.upper);
    if inside == bound.lower {
        step_toward(inside, bound.upper)
    } else if inside == bound.upper {
        step_toward(inside, bound.lower)
    } else {
        inside
    }
}

/// Next representable value from finite `x` in the direction of `target`.
fn step_toward(x: f64, target: f64) -> f64 {
    if !(x.is_finite() && target != x) {
        return x;
    }
    if x == 0.0 {
        return if target > 0.0 {
            f64::from_bits(1)
        } else {
            -f64::from_bits(1)
        };
    }
    let bits = x.to_bits();
    let away_from_zero = (target > x) == (x > 0.0);
    let next = f64::from_bits(if away_from_zero { bits + 1 } else { bits - 1 });
    // A window narrower than two ulps has no strict interior point.
    if (target > x && next < target) || (target < x && next > target) {
        next
    } else {
        x
    }
}

/// `ln Z` with `Z = Phi((u - mu)/sigma) - Phi((l - mu)/sigma)`.
pub fn tn_log_normalizer(mu: f64, sigma: f64, bound: CensoringBound) -> Result<f64> {
    Ok(TruncatedNormal::new(mu, sigma, bound)?.moments().log_normalizer)
}

pub fn tn_mean(mu: f64, sigma: f64, bound: CensoringBound) -> Result<f64> {
    Ok(TruncatedNormal::new(mu, sigma, bound)?.moments().mean)
}

pub fn tn_second_moment(mu: f64, sigma: f64, bound: CensoringBound) -> Result<f64> {
    Ok(TruncatedNormal::new(mu, sigma, bound)?.moments().second_moment)
}

pub fn tn_variance(mu: f64, sigma: f64, bound: CensoringBound) -> Result<f64> {
    Ok(TruncatedNormal::new(mu, sigma, bound)?.moments().variance)
}

pub fn tn_entropy(mu: f64, sigma: f64, bound: CensoringBound) -> Result<f64> {
    Ok(TruncatedNormal::new(mu, sigma, bound)?.moments().entropy)
}

fn standardized(alpha: f64, beta: f64) -> Standard {
    if alpha == f64::NEG_INFINITY && beta == f64::INFINITY {
        return Standard {
            log_z: 0.0,
            mean: 0.0,
            var: 1.0,
            entropy: STD_NORMAL_ENTROPY,
        };
    }
    // Reflect so the near side is `b` and |a| >= |b|.
    let reflect = alpha + beta > 0.0;
    let (a, b) = if reflect { (-beta, -alpha) } else { (alpha, beta) };
    let anchor = if b < 0.0 { b } else { 0.0 };
    let spread = 0.5 * (a - anchor) * (a + anchor);
    let mut s = if a.is_finite() && spread <= NARROW_SPREAD {
        narrow(a, b, anchor)
    } else if b < 0.0 {
        lower_tail(a, b)
    } else {
        straddle(a, b)
    };
    if reflect {
        s.mean = -s.mean;
    }
    s
}

/// Gauss-Legendre on `g(t) = phi(t)/phi(c)` over `[a, b]`, `c` the point of
/// the window nearest zero, so `0 < g <= 1`.
fn narrow(a: f64, b: f64, c: f64) -> Standard {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes = [0.0; 32];
    let mut weights = [0.0; 32];
    for (j, (&s, &w)) in GL_NODES.iter().zip(GL_WEIGHTS.iter()).enumerate() {
        nodes[2 * j] = mid - half * s;
        nodes[2 * j + 1] = mid + half * s;
        weights[2 * j] = w;
        weights[2 * j + 1] = w;
    }
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut i_sq = 0.0;
    let mut g = [0.0; 32];
    for j in 0..32 {
        let t = nodes[j];
        g[j] = weights[j] * libm::exp(-0.5 * (t - c) * (t + c));
        i0 += g[j];
        i1 += g[j] * (t - c);
        i_sq += g[j] * (t - c) * (t + c);
    }
    let mean = c + i1 / i0;
    let mut var = 0.0;
    for j in 0..32 {
        let dt = nodes[j] - mean;
        var += g[j] * dt * dt;
    }
    var /= i0;
    let log_j0 = libm::log(half * i0);
    Standard {
        log_z: ln_phi(c) + log_j0,
        mean,
        var,
        // H = ln(sqrt(2 pi) Z) + E[t^2]/2, with Z = phi(c) * J0
        entropy: log_j0 + 0.5 * i_sq / i0,
    }
}

/// Window `[a, b]` with `a < b < 0` (`a` may be `-inf`). Boundary ratios
/// `phi(a)/Z`, `phi(b)/Z` are formed from `D = Z / phi(b)`.
fn lower_tail(a: f64, b: f64) -> Standard {
    if a == f64::NEG_INFINITY && b < -TAIL_SWITCH {
        return lower_tail_one_sided(b);
    }
    // ln(phi(a)/phi(b))
    let ln_e = if a.is_finite() {
        -0.5 * (a - b) * (a + b)
    } else {
        f64::NEG_INFINITY
    };
    let e = libm::exp(ln_e);
    let far = if a.is_finite() {
        erfcx(-a * FRAC_1_SQRT_2) * e
    } else {
        0.0
    };
    let d = SQRT_FRAC_PI_2 * (erfcx(-b * FRAC_1_SQRT_2) - far);
    let r_b = 1.0 / d;
    let r_a = e / d;
    let mean = libm::expm1(ln_e) / d;
    let a_ra = if a.is_finite() { a * r_a } else { 0.0 };
    let boundary = a_ra - b * r_b;
    let log_z = ln_phi(b) + libm::log(d);
    Standard {
        log_z,
        mean,
        var: (1.0 + boundary - mean * mean).max(0.0),
        entropy: STD_NORMAL_ENTROPY + log_z + 0.5 * boundary,
    }
}

/// `(-inf, b]` with `b` deep in the tail: the inverse Mills ratio is
/// `x + delta` with `x = -b`, and the variance is assembled from the
/// continued-fraction pieces so no `x^2`-sized terms cancel.
fn lower_tail_one_sided(b: f64) -> Standard {
    let x = -b;
    let (delta, g) = special::mills_tail_parts(x);
    let lambda = x + delta;
    let xg = x + g;
    let var = (g * xg - 1.0) / (xg * xg);
    let log_z = ln_phi(b) - libm::log(lambda);
    Standard {
        log_z,
        mean: b - delta,
        var,
        entropy: STD_NORMAL_ENTROPY + log_z - 0.5 * b * lambda,
    }
}

/// Window with `a <= -b <= 0 <= b`.
fn straddle(a: f64, b: f64) -> Standard {
    let z = 0.5 * (libm::erf(b * FRAC_1_SQRT_2) - libm::erf(a * FRAC_1_SQRT_2));
    let r_a = phi(a) / z;
    let r_b = phi(b) / z;
    let mean = r_a - r_b;
    let a_ra = if a.is_finite() { a * r_a } else { 0.0 };
    let boundary = a_ra - b * r_b;
    let log_z = libm::log(z);
    Standard {
        log_z,
        mean,
        var: (1.0 + boundary - mean * mean).max(0.0),
        entropy: STD_NORMAL_ENTROPY + log_z + 0.5 * boundary,
    }
}
