use crate::error::{Error, Result};
use crate::numerics::Array;
use crate::Scalar;

/// One row of the sinusoidal positional encoding.
pub fn positional_row<S: Scalar>(t: usize, d: usize, out: &mut [S]) {
    for i in 0..d / 2 {
        let angle = t as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
        out[2 * i] = S::of(angle.sin());
        out[2 * i + 1] = S::of(angle.cos());
    }
}

/// Sinusoidal positional encoding, `[t_len, d]`:
/// `PE(t, 2i) = sin(t / 10000^(2i/d))`, `PE(t, 2i+1) = cos(t / 10000^(2i/d))`.
pub fn positional_encoding<S: Scalar>(t_len: usize, d: usize) -> Result<Array<S>> {
    if !d.is_multiple_of(2) || d == 0 {
        return Err(Error::invalid(format!(
            "positional encoding width must be even and positive, got {d}"
        )));
    }
    let mut out = Array::zeros(&[t_len, d]);
    for t in 0..t_len {
        positional_row(t, d, out.row_mut(t));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_rows() {
        let pe = positional_encoding::<f64>(3, 8).unwrap();
        for i in 0..4 {
            assert_eq!(pe.row(0)[2 * i], 0.0);
            assert_eq!(pe.row(0)[2 * i + 1], 1.0);
        }
        assert!((pe.row(1)[0] - 0.8414709848078965).abs() < 1e-15);
        assert!(pe.data().iter().all(|v| v.abs() <= 1.0));
        assert!(positional_encoding::<f64>(3, 7).is_err());
    }
}
