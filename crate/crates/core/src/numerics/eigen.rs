use super::Array;
use crate::error::{Error, Result};
use crate::Scalar;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors stored as columns.
pub fn symmetric_eigen<S: Scalar>(m: &Array<S>) -> Result<(Vec<S>, Array<S>)> {
    let n = square_dim(m)?;
    let mut a = m.clone();
    let mut v = Array::zeros(&[n, n]);
    for i in 0..n {
        v.set2(i, i, S::one());
    }
    let scale = m.max_abs().max(S::min_positive_value());
    let tol = S::epsilon() * S::epsilon() * scale * scale;
    for _sweep in 0..100 {
        let mut off = S::zero();
        for p in 0..n {
            for q in p + 1..n {
                off += a.get2(p, q) * a.get2(p, q);
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get2(p, q);
                if apq == S::zero() {
                    continue;
                }
                let (app, aqq) = (a.get2(p, p), a.get2(q, q));
                let theta = (aqq - app) / (S::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a.get2(k, p), a.get2(k, q));
                    a.set2(k, p, c * akp - s * akq);
                    a.set2(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let (apk, aqk) = (a.get2(p, k), a.get2(q, k));
                    a.set2(p, k, c * apk - s * aqk);
                    a.set2(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let (vkp, vkq) = (v.get2(k, p), v.get2(k, q));
                    v.set2(k, p, c * vkp - s * vkq);
                    v.set2(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let vals = (0..n).map(|i| a.get2(i, i)).collect();
    Ok((vals, v))
}

fn square_dim<S: Scalar>(m: &Array<S>) -> Result<usize> {
    if m.ndim() != 2 || m.shape()[0] != m.shape()[1] {
        return Err(Error::shape(
            "symmetric matrix",
            m.shape(),
            &[m.rows(), m.rows()],
        ));
    }
    Ok(m.shape()[0])
}

fn check_symmetric<S: Scalar>(m: &Array<S>, tol: S) -> Result<()> {
    let n = square_dim(m)?;
    for i in 0..n {
        for j in i + 1..n {
            if (m.get2(i, j) - m.get2(j, i)).abs() > tol {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    m.get2(i, j),
                    m.get2(j, i)
                )));
            }
        }
    }
    Ok(())
}

/// Rejects clearly negative eigenvalues and zeroes those within rounding
/// noise of zero, so rank-deficient inputs do not pick up `sqrt(eps)` terms.
fn clamp_eigenvalues<S: Scalar>(vals: &mut [S], scale: S) -> Result<()> {
    let floor = -S::of(1e-8) * scale.max(S::one());
    let noise = S::of(64.0) * S::of_usize(vals.len()) * S::epsilon() * scale;
    for v in vals {
        if *v < floor {
            return Err(Error::Numeric(format!(
                "matrix is not positive semi-definite (eigenvalue {v})"
            )));
        }
        if *v <= noise {
            *v = S::zero();
        }
    }
    Ok(())
}

/// Principal square root of a symmetric PSD matrix.
pub fn psd_sqrt<S: Scalar>(m: &Array<S>) -> Result<Array<S>> {
    check_symmetric(m, S::of(1e-8))?;
    let n = m.rows();
    let (mut vals, vecs) = symmetric_eigen(m)?;
    clamp_eigenvalues(&mut vals, m.max_abs())?;
    let mut out = Array::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let mut acc = S::zero();
            for (k, &l) in vals.iter().enumerate() {
                acc += vecs.get2(i, k) * l.sqrt() * vecs.get2(j, k);
            }
            out.set2(i, j, acc);
        }
    }
    Ok(out)
}

/// `Tr((S1 S2)^{1/2})` for symmetric PSD `S1`, `S2`, computed as the trace of
/// the PSD root of `S1^{1/2} S2 S1^{1/2}` (which has the same spectrum).
pub fn symmetric_sqrt_product<S: Scalar>(s1: &Array<S>, s2: &Array<S>) -> Result<S> {
    let n = square_dim(s1)?;
    if s2.shape() != s1.shape() {
        return Err(Error::shape(
            "symmetric_sqrt_product",
            s1.shape(),
            s2.shape(),
        ));
    }
    check_symmetric(s1, S::of(1e-8))?;
    check_symmetric(s2, S::of(1e-8))?;
    let r = psd_sqrt(s1)?;
    let m = r.matmul(s2)?.matmul(&r)?;
    let mut sym = Array::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            sym.set2(i, j, (m.get2(i, j) + m.get2(j, i)) / S::of(2.0));
        }
    }
    let (mut vals, _) = symmetric_eigen(&sym)?;
    clamp_eigenvalues(&mut vals, sym.max_abs())?;
    Ok(vals.iter().map(|v| v.sqrt()).sum())
}
