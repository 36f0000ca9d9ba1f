//! Discrete argument principle for closed sampled curves.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::error::NumericsError;

pub const DEFAULT_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub struct WindingOptions {
    /// Minimum allowed distance between the curve and the reference point.
    pub touch_tolerance: f64,
    /// Maximum distance of the raw sum (in turns) from an integer.
    pub integer_tolerance: f64,
}

impl Default for WindingOptions {
    fn default() -> Self {
        WindingOptions {
            touch_tolerance: 1e-9,
            integer_tolerance: 1e-6,
        }
    }
}

/// Winding number of the closed curve `samples` (last point joins the first) around `z0`.
pub fn winding_from_samples(samples: &[Complex64], z0: Complex64) -> Result<i64, NumericsError> {
    winding_with(samples, z0, WindingOptions::default())
}

pub fn winding_with(
    samples: &[Complex64],
    z0: Complex64,
    opts: WindingOptions,
) -> Result<i64, NumericsError> {
    if samples.len() < 3 {
        return Err(NumericsError::InvalidArgument(format!(
            "{} samples do not form a closed curve",
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|s| !(s.re.is_finite() && s.im.is_finite()))
    {
        return Err(NumericsError::NonFinite);
    }
    let distance = samples
        .iter()
        .map(|s| (s - z0).norm())
        .fold(f64::INFINITY, f64::min);
    if distance <= opts.touch_tolerance {
        return Err(NumericsError::CurveTouchesReference { distance });
    }
    let mut total = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let next = samples[(i + 1) % samples.len()];
        let step = ((next - z0) / (s - z0)).arg();
        if step.abs() > FRAC_PI_2 {
            return Err(NumericsError::InsufficientSampling {
                increment: step.abs(),
            });
        }
        total += step;
    }
    let turns = total / (2.0 * PI);
    let rounded = turns.round();
    if (turns - rounded).abs() > opts.integer_tolerance {
        return Err(NumericsError::NonIntegerWinding { value: turns });
    }
    Ok(rounded as i64)
}
