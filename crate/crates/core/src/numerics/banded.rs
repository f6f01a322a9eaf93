//! Banded linear solvers: the Hodrick-Prescott normal equations (symmetric
//! pentadiagonal) and the natural cubic spline system (tridiagonal).

use crate::Scalar;

/// Solves `(I + λ DᵀD) trend = x`, where `D` is the `(n-2) × n` second
/// difference operator. This is the minimizer of
/// `Σ (x_t - trend_t)² + λ Σ (trend_t - 2 trend_{t-1} + trend_{t-2})²`.
///
/// Returns `None` when `x.len() < 3` (the penalty has no terms) or `λ < 0`.
pub fn pentadiagonal_solve<S: Scalar>(lambda: S, x: &[S]) -> Option<Vec<S>> {
    let n = x.len();
    if n < 3 || lambda < S::zero() {
        return None;
    }
    let (d0, d1, d2) = hp_bands(lambda, n);
    Some(solve_symmetric_penta(&d0, &d1, &d2, x))
}

/// Diagonals of `I + λ DᵀD`: main, first off-diagonal, second off-diagonal.
pub fn hp_bands<S: Scalar>(lambda: S, n: usize) -> (Vec<S>, Vec<S>, Vec<S>) {
    // DᵀD = Σ_r v_r v_rᵀ with v_r = e_r - 2 e_{r+1} + e_{r+2}, r = 0..n-2
    let mut d0 = vec![S::one(); n];
    let mut d1 = vec![S::zero(); n - 1];
    let mut d2 = vec![S::zero(); n - 2];
    let (one, two, four) = (S::one(), S::of(2.0), S::of(4.0));
    for r in 0..n - 2 {
        d0[r] += lambda * one;
        d0[r + 1] += lambda * four;
        d0[r + 2] += lambda * one;
        d1[r] -= lambda * two;
        d1[r + 1] -= lambda * two;
        d2[r] += lambda * one;
    }
    (d0, d1, d2)
}

/// LDLᵀ solve of a symmetric positive definite pentadiagonal system.
///
/// With `L` unit lower triangular with bands `l1` (offset -1) and `l2`
/// (offset -2):
/// `A[i,i] = d_i + l1_i² d_{i-1} + l2_i² d_{i-2}`,
/// `A[i+1,i] = l1_{i+1} d_i + l2_{i+1} l1_i d_{i-1}`,
/// `A[i+2,i] = l2_{i+2} d_i`.
pub fn solve_symmetric_penta<S: Scalar>(d0: &[S], d1: &[S], d2: &[S], rhs: &[S]) -> Vec<S> {
    let n = d0.len();
    let mut d = vec![S::zero(); n];
    let mut l1 = vec![S::zero(); n];
    let mut l2 = vec![S::zero(); n];
    for i in 0..n {
        let mut di = d0[i];
        if i >= 1 {
            di -= l1[i] * l1[i] * d[i - 1];
        }
        if i >= 2 {
            di -= l2[i] * l2[i] * d[i - 2];
        }
        d[i] = di;
        if i + 2 < n {
            l2[i + 2] = d2[i] / d[i];
        }
        if i + 1 < n {
            let mut a = d1[i];
            if i >= 1 {
                a -= l2[i + 1] * l1[i] * d[i - 1];
            }
            l1[i + 1] = a / d[i];
        }
    }
    // L z = rhs
    let mut z = rhs.to_vec();
    for i in 0..n {
        if i >= 1 {
            let v = l1[i] * z[i - 1];
            z[i] -= v;
        }
        if i >= 2 {
            let v = l2[i] * z[i - 2];
            z[i] -= v;
        }
    }
    for i in 0..n {
        z[i] /= d[i];
    }
    // Lᵀ x = z
    for i in (0..n).rev() {
        if i + 1 < n {
            let v = l1[i + 1] * z[i + 1];
            z[i] -= v;
        }
        if i + 2 < n {
            let v = l2[i + 2] * z[i + 2];
            z[i] -= v;
        }
    }
    z
}

/// Thomas algorithm for a tridiagonal system with sub-diagonal `a`, diagonal
/// `b` and super-diagonal `c` (`a[0]` and `c[n-1]` are ignored).
pub fn solve_tridiagonal<S: Scalar>(a: &[S], b: &[S], c: &[S], rhs: &[S]) -> Vec<S> {
    let n = b.len();
    let mut cp = vec![S::zero(); n];
    let mut dp = vec![S::zero(); n];
    cp[0] = c[0] / b[0];
    dp[0] = rhs[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / m } else { S::zero() };
        dp[i] = (rhs[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        let v = cp[i] * x[i + 1];
        x[i] -= v;
    }
    x
}
