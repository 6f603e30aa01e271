//! Small dense linear-algebra helpers on `ndarray` types.
//!
//! Everything here targets the tiny matrices this crate works with (feature
//! dimension ≲ 32), so plain Gauss-Jordan and unblocked Cholesky are the
//! right tools.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2};

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Numerical("invert: matrix not square".into()));
    }
    let mut work = a.clone();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let mut pivot = col;
        let mut best = work[[col, col]].abs();
        for row in (col + 1)..n {
            let v = work[[row, col]].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 || !best.is_finite() {
            return Err(Error::Numerical("invert: singular matrix".into()));
        }
        if pivot != col {
            for j in 0..n {
                work.swap([pivot, j], [col, j]);
                inv.swap([pivot, j], [col, j]);
            }
        }
        let diag = work[[col, col]];
        for j in 0..n {
            work[[col, j]] /= diag;
            inv[[col, j]] /= diag;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = work[[row, col]];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                work[[row, j]] -= factor * work[[col, j]];
                inv[[row, j]] -= factor * inv[[col, j]];
            }
        }
    }
    Ok(inv)
}

/// Cholesky factor `L` with `L Lᵀ = a`; fails if `a` is not positive
/// definite within `shift` on the diagonal (pass 0.0 for a strict check).
pub fn cholesky(a: &Array2<f64>, shift: f64) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Numerical("cholesky: matrix not square".into()));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            if i == j {
                sum += shift;
            }
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::Numerical(format!(
                        "cholesky: non-positive pivot {sum} at {i}"
                    )));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// log det of a symmetric positive definite matrix via Cholesky.
pub fn log_det_spd(a: &Array2<f64>) -> Result<f64> {
    let l = cholesky(a, 0.0)?;
    Ok(2.0 * (0..a.nrows()).map(|i| l[[i, i]].ln()).sum::<f64>())
}

/// True when `a` is PSD up to `tol`: `a + tol·I` admits a Cholesky factor.
pub fn is_psd(a: &Array2<f64>, tol: f64) -> bool {
    cholesky(a, tol).is_ok()
}

/// xᵀ A x.
pub fn quad_form(a: &Array2<f64>, x: &Array1<f64>) -> f64 {
    let ax = a.dot(x);
    x.dot(&ax)
}

/// max |(A B − I)_{ij}|, the drift measure for maintained inverses.
pub fn identity_drift(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let prod = a.dot(b);
    let n = prod.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[[i, j]] - target).abs());
        }
    }
    worst
}
