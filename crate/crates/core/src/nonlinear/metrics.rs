//! Steady-state amplitude, oscillation frequency and settling time of a
//! simulated trajectory.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::NonlinearError;
use crate::numerics::Trajectory;

/// Window-mean amplitude below this fraction of the peak counts as fully decayed.
const DECAYED: f64 = 1e-9;
/// Band around the final amplitude that defines settling.
const SETTLING_BAND: f64 = 0.05;
const MIN_WINDOW_SAMPLES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturationOptions {
    /// State components entering the amplitude; all when `None`. The first
    /// listed component is used for the frequency estimate.
    pub components: Option<Vec<usize>>,
    /// Fraction of the trajectory treated as the steady window.
    pub window: f64,
    /// Largest accepted relative change of the mean amplitude between the
    /// two halves of the window.
    pub drift_tolerance: f64,
}

impl Default for SaturationOptions {
    fn default() -> Self {
        SaturationOptions {
            components: None,
            window: 0.2,
            drift_tolerance: 0.01,
        }
    }
}

impl SaturationOptions {
    pub fn components(mut self, components: Vec<usize>) -> Self {
        self.components = Some(components);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationMetrics {
    /// RMS over the window of the Euclidean norm of the selected components.
    pub amplitude: f64,
    /// Angular frequency of the largest spectral peak of the first component.
    pub frequency: f64,
    /// Earliest time after which the norm stays within 5% of its final level.
    pub settling_time: f64,
    pub drift: f64,
}

pub fn saturation_metrics(
    traj: &Trajectory,
    options: &SaturationOptions,
) -> Result<SaturationMetrics, NonlinearError> {
    if traj.diverged() {
        return Err(NonlinearError::NotSettled {
            drift: f64::INFINITY,
        });
    }
    let dim = traj.dimension();
    let comps: Vec<usize> = options
        .components
        .clone()
        .unwrap_or_else(|| (0..dim).collect());
    if comps.is_empty() || comps.iter().any(|&c| c >= dim) {
        return Err(NonlinearError::InvalidParams(format!(
            "components {comps:?} out of range for dimension {dim}"
        )));
    }
    if !(options.window > 0.0 && options.window <= 1.0) {
        return Err(NonlinearError::InvalidParams(format!(
            "window fraction {} outside (0, 1]",
            options.window
        )));
    }
    let len = traj.times.len();
    let w = ((len as f64 * options.window).ceil() as usize).min(len);
    if w < MIN_WINDOW_SAMPLES {
        return Err(NonlinearError::InvalidParams(format!(
            "window holds {w} samples, need {MIN_WINDOW_SAMPLES}"
        )));
    }
    let norm: Vec<f64> = traj
        .states
        .iter()
        .map(|s| comps.iter().map(|&c| s[c] * s[c]).sum::<f64>().sqrt())
        .collect();
    let peak = norm.iter().fold(0.0f64, |m, v| m.max(*v));
    let start = len - w;
    let window = &norm[start..];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let overall = mean(window);
    let decayed = overall <= DECAYED * peak || peak == 0.0;

    let drift = if decayed {
        0.0
    } else {
        let (m1, m2) = (mean(&window[..w / 2]), mean(&window[w / 2..]));
        (m2 - m1).abs() / m1.max(m2)
    };
    if !(drift <= options.drift_tolerance) {
        return Err(NonlinearError::NotSettled { drift });
    }
    let amplitude = (window.iter().map(|v| v * v).sum::<f64>() / w as f64).sqrt();

    let in_band = |v: f64| {
        if decayed {
            v <= SETTLING_BAND * peak
        } else {
            (v - overall).abs() <= SETTLING_BAND * overall
        }
    };
    let first_settled = (0..len)
        .rev()
        .take_while(|&i| in_band(norm[i]))
        .last()
        .unwrap_or(len - 1);
    let settling_time = traj.times[first_settled] - traj.times[0];

    let signal: Vec<f64> = traj.states[start..].iter().map(|s| s[comps[0]]).collect();
    let frequency = spectral_peak(&traj.times[start..], &signal)?;
    Ok(SaturationMetrics {
        amplitude,
        frequency,
        settling_time,
        drift,
    })
}

/// Magnitude of the Hann-windowed DTFT of a uniformly sampled signal at angular frequency `w`.
fn dtft_magnitude(t: &[f64], y: &[f64], hann: &[f64], w: f64) -> f64 {
    let t0 = t[0];
    let mut acc = Complex64::new(0.0, 0.0);
    for ((ti, yi), hi) in t.iter().zip(y).zip(hann) {
        acc += Complex64::from_polar(yi * hi, -w * (ti - t0));
    }
    acc.norm()
}

/// Location of the largest peak of the (mean-removed, Hann-windowed)
/// spectrum: zero-padded FFT for the coarse bin, golden-section search on the
/// continuous transform between the neighbouring bins.
pub(crate) fn spectral_peak(t: &[f64], y: &[f64]) -> Result<f64, NonlinearError> {
    let n = y.len();
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if !(dt > 0.0) {
        return Err(NonlinearError::InvalidParams(
            "window has no time extent".into(),
        ));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let hann: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect();

    let size = (4 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = centered
        .iter()
        .zip(&hann)
        .map(|(v, h)| Complex64::new(v * h, 0.0))
        .collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(size).process(&mut buf);
    let (k, _) = buf[..=size / 2]
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bk, bv), (k, v)| {
            if v.norm() > bv {
                (k, v.norm())
            } else {
                (bk, bv)
            }
        });
    let bin = 2.0 * PI / (size as f64 * dt);
    let (mut lo, mut hi) = (
        (k as f64 - 1.0).max(0.0) * bin,
        (k as f64 + 1.0).min(size as f64 / 2.0) * bin,
    );
    let f = |w: f64| -dtft_magnitude(t, &centered, &hann, w);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-10 * bin {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    Ok(0.5 * (lo + hi))
}
