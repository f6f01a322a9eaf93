use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::Scalar;

/// Sampling knobs. `top_k = Some(1)` is greedy argmax decoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub temperature: f64,
    pub top_k: Option<usize>,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_k: None,
        }
    }
}

impl Sampling {
    pub fn argmax() -> Self {
        Self {
            temperature: 1.0,
            top_k: Some(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be > 0, got {} (use top_k = 1 for argmax)",
                self.temperature
            )));
        }
        if self.top_k == Some(0) {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        Ok(())
    }
}

/// Draws one index from `exp(log_probs / temperature)`, optionally restricted
/// to the `top_k` most likely entries, by inverse-CDF sampling.
pub fn sample_categorical<S: Scalar>(
    log_probs: &[S],
    sampling: Sampling,
    rng: &mut SeededRng,
) -> Result<usize> {
    sampling.validate()?;
    if log_probs.is_empty() {
        return Err(Error::invalid("cannot sample from an empty distribution"));
    }
    if let Some(i) = log_probs
        .iter()
        .position(|v| v.is_nan() || *v == S::infinity())
    {
        return Err(Error::invalid(format!(
            "log-probability {i} is {}",
            log_probs[i]
        )));
    }
    let scaled: Vec<f64> = log_probs
        .iter()
        .map(|v| v.as_f64() / sampling.temperature)
        .collect();
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    if let Some(k) = sampling.top_k {
        if k < scaled.len() {
            order.sort_by(|&a, &b| scaled[b].total_cmp(&scaled[a]));
            order.truncate(k);
            order.sort_unstable();
        }
    }
    let max = order
        .iter()
        .map(|&i| scaled[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::invalid("every candidate has zero probability"));
    }
    let weights: Vec<f64> = order.iter().map(|&i| (scaled[i] - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let target = rng.uniform() * total;
    let mut cum = 0.0;
    for (&i, &w) in order.iter().zip(&weights) {
        cum += w;
        if target < cum {
            return Ok(i);
        }
    }
    let last = order
        .iter()
        .zip(&weights)
        .rev()
        .find(|(_, &w)| w > 0.0)
        .map(|(&i, _)| i)
        .expect("max weight is 1");
    Ok(last)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_always_chosen() {
        let mut lp = vec![f64::NEG_INFINITY; 10];
        lp[7] = 0.0;
        let mut rng = SeededRng::new(1);
        for _ in 0..100 {
            assert_eq!(
                sample_categorical(&lp, Sampling::default(), &mut rng).unwrap(),
                7
            );
        }
    }

    #[test]
    fn top1_is_argmax() {
        let lp: Vec<f64> = [0.1f64, 0.5, 0.3, 0.1].iter().map(|p| p.ln()).collect();
        let mut rng = SeededRng::new(2);
        for _ in 0..50 {
            assert_eq!(
                sample_categorical(&lp, Sampling::argmax(), &mut rng).unwrap(),
                1
            );
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = SeededRng::new(3);
        assert!(sample_categorical(&[0.0, f64::NAN], Sampling::default(), &mut rng).is_err());
        let s = Sampling {
            temperature: 0.0,
            top_k: None,
        };
        assert!(sample_categorical(&[0.0], s, &mut rng).is_err());
    }
}
