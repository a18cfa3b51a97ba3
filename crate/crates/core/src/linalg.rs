//! Dense solvers for the small systems the updates produce (size m - 1 + d
//! for the ridge step, at most m for prediction).

use alloc::vec::Vec;

/// Pivots below this fraction of the largest diagonal entry count as zero.
const RANK_TOL: f64 = 1e-12;

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, size
/// `dim`). Returns `None` when `A` is numerically singular.
pub fn cholesky_solve(a: &[f64], b: &[f64], dim: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), dim * dim);
    debug_assert_eq!(b.len(), dim);
    let scale = (0..dim).map(|j| a[j * dim + j].abs()).fold(0.0, f64::max);
    let floor = RANK_TOL * scale.max(f64::MIN_POSITIVE);
    let mut l = alloc::vec![0.0; dim * dim];
    for j in 0..dim {
        let mut diag = a[j * dim + j];
        for p in 0..j {
            diag -= l[j * dim + p] * l[j * dim + p];
        }
        if !(diag > floor) {
            return None;
        }
        let ljj = libm::sqrt(diag);
        l[j * dim + j] = ljj;
        for i in j + 1..dim {
            let mut s = a[i * dim + j];
            for p in 0..j {
                s -= l[i * dim + p] * l[j * dim + p];
            }
            l[i * dim + j] = s / ljj;
        }
    }
    let mut y = b.to_vec();
    for i in 0..dim {
        for p in 0..i {
            y[i] -= l[i * dim + p] * y[p];
        }
        y[i] /= l[i * dim + i];
    }
    for i in (0..dim).rev() {
        for p in i + 1..dim {
            y[i] -= l[p * dim + i] * y[p];
        }
        y[i] /= l[i * dim + i];
    }
    Some(y)
}

/// Gaussian elimination with partial pivoting for a general square system.
pub fn lu_solve(a: &[f64], b: &[f64], dim: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), dim * dim);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let floor = RANK_TOL * scale.max(f64::MIN_POSITIVE);
    for col in 0..dim {
        let pivot = (col..dim).max_by(|&r, &s| m[r * dim + col].abs().total_cmp(&m[s * dim + col].abs()))?;
        if !(m[pivot * dim + col].abs() > floor) {
            return None;
        }
        if pivot != col {
            for j in 0..dim {
                m.swap(pivot * dim + j, col * dim + j);
            }
            rhs.swap(pivot, col);
        }
        for r in col + 1..dim {
            let factor = m[r * dim + col] / m[col * dim + col];
            if factor != 0.0 {
                for j in col..dim {
                    m[r * dim + j] -= factor * m[col * dim + j];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
    }
    for i in (0..dim).rev() {
        let mut s = rhs[i];
        for j in i + 1..dim {
            s -= m[i * dim + j] * rhs[j];
        }
        rhs[i] = s / m[i * dim + i];
    }
    Some(rhs)
}
