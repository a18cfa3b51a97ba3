//! Test-side oracles and instance generators, independent of the library's
//! closed forms. Shared with the acceptance suite of the `mttm` crate.
#![allow(dead_code)]

use mttm_core::linalg::lu_solve;
use mttm_core::{eval_l_s, CensoringBound, Dataset, TargetEntry};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: (f64, f64), tol: f64, depth: u32) -> f64 {
    let (value, err) = whole;
    if err <= tol || depth == 0 {
        return value;
    }
    let mid = 0.5 * (a + b);
    let left = gk15(f, a, mid);
    let right = gk15(f, mid, b);
    adapt(f, a, mid, left, tol, depth - 1) + adapt(f, mid, b, right, tol, depth - 1)
}

/// Integral of `f` over the finite interval `[a, b]` to roughly `rel_tol`
/// relative to `scale` (an estimate of the integral's magnitude).
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, scale: f64, rel_tol: f64) -> f64 {
    // Seed with a fixed split so narrow peaks are not missed.
    let pieces = 16;
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|p| {
            let lo = a + p as f64 * width;
            let hi = if p + 1 == pieces { b } else { lo + width };
            adapt(f, lo, hi, gk15(f, lo, hi), rel_tol * scale / pieces as f64, 40)
        })
        .sum()
}

/// Truncated-normal quantities computed by quadrature of the density.
#[derive(Debug, Clone, Copy)]
pub struct QuadMoments {
    pub log_normalizer: f64,
    pub mean: f64,
    pub second_moment: f64,
    pub entropy: f64,
}

/// Quadrature oracle for `TN(mu, sigma, [lower, upper])`.
///
/// Works on the standardized window with the integrand scaled by the
/// density at the window point nearest zero, so nothing underflows for
/// standardized bounds of moderate size. Infinite sides are cut 40 units
/// past that point.
pub fn tn_quadrature(mu: f64, sigma: f64, bound: CensoringBound) -> QuadMoments {
    let alpha = (bound.lower - mu) / sigma;
    let beta = (bound.upper - mu) / sigma;
    let c = 0.0f64.max(alpha).min(beta);
    let lo = if alpha.is_finite() { alpha } else { c - 40.0 };
    let hi = if beta.is_finite() { beta } else { c + 40.0 };
    let g = move |t: f64| (-0.5 * (t - c) * (t + c)).exp();
    let rel = 1e-15;
    let mass = integrate(&g, lo, hi, 1.0f64.min(hi - lo), rel);
    let m1 = integrate(&|t| t * g(t), lo, hi, mass * (1.0 + c.abs()), rel) / mass;
    let m2 = integrate(&|t| t * t * g(t), lo, hi, mass * (1.0 + c * c), rel) / mass;
    // -int f ln f with f = g / mass
    let neg_f_ln_f = |t: f64| {
        let f = g(t) / mass;
        if f > 0.0 {
            -f * f.ln()
        } else {
            0.0
        }
    };
    let h = integrate(&neg_f_ln_f, lo, hi, 1.0, rel);
    let ln_phi_c = -0.5 * c * c - 0.5 * (2.0 * std::f64::consts::PI).ln();
    QuadMoments {
        log_normalizer: ln_phi_c + mass.ln(),
        mean: mu + sigma * m1,
        second_moment: mu * mu + 2.0 * mu * sigma * m1 + sigma * sigma * m2,
        entropy: h + sigma.ln(),
    }
}

/// `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

// ---------------------------------------------------------------------------
// Random instances.

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Censors `value` with a random window that contains it: left, right or
/// interval with equal probability.
pub fn random_window<R: Rng>(rng: &mut R, value: f64) -> CensoringBound {
    let l = rng.random_range(0.0..0.6);
    let r = rng.random_range(0.0..0.6);
    match rng.random_range(0..3) {
        0 => CensoringBound::below(value + r),
        1 => CensoringBound::above(value - l),
        _ => CensoringBound::interval(value - l - 0.05, value + r + 0.05).unwrap(),
    }
}

/// Random coupled instance: features standard normal, cross coefficients
/// in `[-0.3, 0.3]` (spectral radius below one for m <= 4), noise sd 0.5,
/// each cell censored with probability `rate` by a window containing it.
pub fn random_dataset<R: Rng>(rng: &mut R, m: usize, n: usize, d: usize, rate: f64) -> Dataset {
    let coupling: Vec<f64> = (0..m * m)
        .map(|idx| {
            if idx / m == idx % m {
                0.0
            } else {
                rng.random_range(-0.3..0.3)
            }
        })
        .collect();
    let w: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| normal(rng)).collect()).collect();
    let mut lhs = vec![0.0; m * m];
    for k in 0..m {
        for j in 0..m {
            lhs[k * m + j] = if k == j { 1.0 } else { 0.0 } - coupling[k * m + j];
        }
    }
    let mut x_rows = Vec::with_capacity(n);
    let mut y_rows = vec![Vec::with_capacity(n); m];
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|_| normal(rng)).collect();
        let rhs: Vec<f64> = (0..m)
            .map(|k| w[k].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + 0.5 * normal(rng))
            .collect();
        let y = lu_solve(&lhs, &rhs, m).expect("coupling keeps the system regular");
        for k in 0..m {
            let entry = if rng.random_bool(rate) {
                TargetEntry::Censored(random_window(rng, y[k]))
            } else {
                TargetEntry::Observed(y[k])
            };
            y_rows[k].push(entry);
        }
        x_rows.push(x);
    }
    Dataset::new(x_rows, y_rows).unwrap()
}

/// Single-target instance with left-censoring at the empirical quantile:
/// `y = <w, x> + N(0, 1/beta)` with standard normal features.
pub fn left_censored_single<R: Rng>(rng: &mut R, w: &[f64], beta: f64, n: usize, rate: f64) -> Dataset {
    let d = w.len();
    let sd = 1.0 / beta.sqrt();
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| normal(rng)).collect()).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + sd * normal(rng))
        .collect();
    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let count = (rate * n as f64).ceil() as usize;
    let limit = if count == 0 {
        f64::NEG_INFINITY
    } else {
        sorted[count - 1]
    };
    let entries = y
        .iter()
        .map(|&v| {
            if v <= limit {
                TargetEntry::Censored(CensoringBound::below(limit))
            } else {
                TargetEntry::Observed(v)
            }
        })
        .collect();
    Dataset::new(x, vec![entries]).unwrap()
}

// ---------------------------------------------------------------------------
// Generic optimizer for the single-target likelihood.

/// Maximizes `eval_l_s` over `(w, ln beta)` by damped Newton steps on
/// central-difference gradients and Hessians. Knows nothing about the
/// model's structure beyond the likelihood value.
pub fn maximize_l_s(data: &Dataset, w0: &[f64], beta0: f64) -> (Vec<f64>, f64) {
    let d = w0.len();
    let p = d + 1;
    let f = |z: &[f64]| eval_l_s(&z[..d], z[d].exp(), data).unwrap_or(f64::NEG_INFINITY);
    let mut z: Vec<f64> = w0.iter().copied().chain([beta0.ln()]).collect();
    let h = 1e-4;
    for _ in 0..200 {
        let f0 = f(&z);
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for r in 0..p {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[r] += h;
            zm[r] -= h;
            let (fp, fm) = (f(&zp), f(&zm));
            grad[r] = (fp - fm) / (2.0 * h);
            hess[r * p + r] = (fp - 2.0 * f0 + fm) / (h * h);
            for s in 0..r {
                let mut zpp = z.clone();
                let mut zpm = z.clone();
                let mut zmp = z.clone();
                let mut zmm = z.clone();
                zpp[r] += h;
                zpp[s] += h;
                zpm[r] += h;
                zpm[s] -= h;
                zmp[r] -= h;
                zmp[s] += h;
                zmm[r] -= h;
                zmm[s] -= h;
                let v = (f(&zpp) - f(&zpm) - f(&zmp) + f(&zmm)) / (4.0 * h * h);
                hess[r * p + s] = v;
                hess[s * p + r] = v;
            }
        }
        // Newton direction on -f; fall back to gradient ascent if the
        // Hessian is not negative definite.
        let neg: Vec<f64> = hess.iter().map(|v| -v).collect();
        let step = lu_solve(&neg, &grad, p)
            .filter(|s| s.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() > 0.0)
            .unwrap_or_else(|| grad.clone());
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            if f(&cand) >= f0 {
                moved = cand.iter().zip(&z).any(|(a, b)| (a - b).abs() > 1e-13);
                z = cand;
                break;
            }
            t *= 0.5;
        }
        let gnorm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if !moved || gnorm < 1e-9 {
            break;
        }
    }
    (z[..d].to_vec(), z[d].exp())
}
