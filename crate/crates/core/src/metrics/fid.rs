use crate::error::{Error, Result};
use crate::motion::Outcome;
use crate::numerics::{symmetric_sqrt_product, Array};

/// Sample mean and covariance (`N − 1` denominator) of row vectors.
pub fn moments(features: &[Vec<f64>]) -> Result<(Vec<f64>, Array<f64>)> {
    let n = features.len();
    let d = features.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(Error::invalid("feature set is empty or zero-dimensional"));
    }
    if let Some(bad) = features.iter().position(|f| f.len() != d) {
        return Err(Error::invalid(format!(
            "feature row {bad} has {} values, expected {d}",
            features[bad].len()
        )));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }
    let mut mean = vec![0.0; d];
    for f in features {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Array::zeros(&[d, d]);
    if n > 1 {
        for i in 0..d {
            for j in i..d {
                let s: f64 = features
                    .iter()
                    .map(|f| (f[i] - mean[i]) * (f[j] - mean[j]))
                    .sum();
                let c = s / (n - 1) as f64;
                cov.set2(i, j, c);
                cov.set2(j, i, c);
            }
        }
    }
    Ok((mean, cov))
}

/// Fréchet distance between two Gaussians given their moments:
/// `|μa − μb|² + Tr(Σa + Σb − 2 (Σa Σb)^{1/2})`, clamped at zero.
pub fn fid_from_moments(
    mu_a: &[f64],
    cov_a: &Array<f64>,
    mu_b: &[f64],
    cov_b: &Array<f64>,
) -> Result<f64> {
    if mu_a.len() != mu_b.len() || mu_a.is_empty() {
        return Err(Error::shape("fid means", &[mu_a.len()], &[mu_b.len()]));
    }
    let d = mu_a.len();
    if cov_a.shape() != [d, d] || cov_b.shape() != [d, d] {
        return Err(Error::shape(
            "fid covariances",
            cov_a.shape(),
            cov_b.shape(),
        ));
    }
    let mean_term: f64 = mu_a.iter().zip(mu_b).map(|(a, b)| (a - b) * (a - b)).sum();
    let trace: f64 = (0..d).map(|i| cov_a.get2(i, i) + cov_b.get2(i, i)).sum();
    let cross = symmetric_sqrt_product(cov_a, cov_b)?;
    let v = mean_term + trace - 2.0 * cross;
    if v < -1e-8 * (1.0 + trace) {
        return Err(Error::Numeric(format!(
            "Fréchet distance came out negative ({v})"
        )));
    }
    Ok(v.max(0.0))
}

/// Fréchet distance between two feature sets (rows are samples). Warns when
/// either set has no more samples than dimensions, since its covariance is
/// then singular.
pub fn fid(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Outcome<f64>> {
    let (mu_a, cov_a) = moments(a)?;
    let (mu_b, cov_b) = moments(b)?;
    let d = mu_a.len();
    let mut warnings = Vec::new();
    for (name, n) in [("first", a.len()), ("second", b.len())] {
        if n <= d {
            warnings.push(format!(
                "{name} feature set has {n} samples for {d} dimensions; covariance is rank-deficient"
            ));
        }
    }
    let value = fid_from_moments(&mu_a, &cov_a, &mu_b, &cov_b)?;
    Ok(Outcome { value, warnings })
}
