//! Hodrick-Prescott jitter filter.

use super::{Outcome, PoseSequence};
use crate::error::{Error, Result};
use crate::numerics::pentadiagonal_solve;

/// Default smoothing weight for 24-fps pose data.
pub const DEFAULT_HP_LAMBDA: f64 = 1.0;

/// Trend/cyclical decomposition of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct HpFilterResult {
    pub trend: Vec<f64>,
    pub cyclical: Vec<f64>,
    pub lambda: f64,
}

/// Splits `series` into a smooth trend and the cyclical residual.
/// Series shorter than 3 samples come back unchanged (trend = input) with a warning.
pub fn hp_filter(series: &[f64], lambda: f64) -> Result<Outcome<HpFilterResult>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "HP lambda must be >= 0, got {lambda}"
        )));
    }
    let mut warnings = Vec::new();
    let trend = match pentadiagonal_solve(lambda, series) {
        Some(t) => t,
        None => {
            warnings.push(format!(
                "series of length {} is too short for HP filtering; left unchanged",
                series.len()
            ));
            series.to_vec()
        }
    };
    let cyclical = series.iter().zip(&trend).map(|(x, t)| x - t).collect();
    Ok(Outcome {
        value: HpFilterResult {
            trend,
            cyclical,
            lambda,
        },
        warnings,
    })
}

/// Filters each of the 51 coordinate channels independently and keeps the trend.
pub fn hp_filter_sequence(seq: &PoseSequence, lambda: f64) -> Result<Outcome<PoseSequence>> {
    if seq.len() < 3 {
        return Ok(Outcome {
            value: seq.clone(),
            warnings: vec![format!(
                "sequence of {} frames is too short for HP filtering; left unchanged",
                seq.len()
            )],
        });
    }
    let channels = (0..super::POSE_DIMS)
        .map(|d| hp_filter(&seq.channel(d), lambda).map(|o| o.value.trend))
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome::ok(PoseSequence::from_channels(
        seq.fps(),
        seq.joints().to_vec(),
        &channels,
    )?))
}
