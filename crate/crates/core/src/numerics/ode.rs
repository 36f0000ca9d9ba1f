//! Fixed-step classical Runge-Kutta integration.

use serde::{Deserialize, Serialize};

use super::error::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IvpStatus {
    Completed,
    /// State norm exceeded the blow-up bound at `time`.
    Diverged {
        time: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub integrator: String,
    pub step: f64,
    pub status: IvpStatus,
}

impl Trajectory {
    pub fn dimension(&self) -> usize {
        self.states.first().map(Vec::len).unwrap_or(0)
    }

    pub fn diverged(&self) -> bool {
        matches!(self.status, IvpStatus::Diverged { .. })
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// Time series of one state component.
    pub fn component(&self, idx: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[idx]).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IvpOptions {
    pub step: f64,
    /// Euclidean state norm at which integration stops with `Diverged`.
    pub blowup: f64,
    /// Store every `record_every`-th step (the final state is always stored).
    pub record_every: usize,
    /// Number of times the step is halved before integrating.
    pub halvings: u32,
}

impl IvpOptions {
    pub fn new(step: f64) -> Self {
        IvpOptions {
            step,
            blowup: 1e12,
            record_every: 1,
            halvings: 0,
        }
    }

    pub fn record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    pub fn blowup(mut self, bound: f64) -> Self {
        self.blowup = bound;
        self
    }

    pub fn halvings(mut self, h: u32) -> Self {
        self.halvings = h;
        self
    }
}

/// Integrates `y' = f(t, y)` over `[t0, t1]` with RK4. The vector field writes
/// its derivative into the output slice.
pub fn integrate_ivp<F>(
    mut f: F,
    y0: &[f64],
    t_span: (f64, f64),
    opts: IvpOptions,
) -> Result<Trajectory, NumericsError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let (t0, t1) = t_span;
    if !(t1 > t0) || !(opts.step > 0.0) || !t0.is_finite() || !t1.is_finite() {
        return Err(NumericsError::InvalidArgument(format!(
            "time span ({t0}, {t1}) with step {}",
            opts.step
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let step = opts.step / 2f64.powi(opts.halvings as i32);
    let n_steps = ((t1 - t0) / step).ceil() as usize;
    let h = (t1 - t0) / n_steps as f64;
    let dim = y0.len();

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    let mut times = vec![t0];
    let mut states = vec![y.clone()];
    let mut status = IvpStatus::Completed;

    for s in 0..n_steps {
        let t = t0 + s as f64 * h;
        f(t, &y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + h * k3[i];
        }
        f(t + h, &tmp, &mut k4);
        for i in 0..dim {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t_next = if s + 1 == n_steps {
            t1
        } else {
            t0 + (s + 1) as f64 * h
        };
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= opts.blowup) {
            times.push(t_next);
            states.push(y.clone());
            status = IvpStatus::Diverged { time: t_next };
            break;
        }
        if (s + 1) % opts.record_every == 0 || s + 1 == n_steps {
            times.push(t_next);
            states.push(y.clone());
        }
    }

    Ok(Trajectory {
        times,
        states,
        integrator: "rk4".to_string(),
        step: h,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let tr = integrate_ivp(
            |_, y, dy| dy[0] = -y[0],
            &[1.0],
            (0.0, 1.0),
            IvpOptions::new(1e-3),
        )
        .unwrap();
        assert!((tr.last().unwrap()[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn fourth_order_convergence() {
        let run = |h: f64| {
            integrate_ivp(
                |_, y, dy| dy[0] = -y[0],
                &[1.0],
                (0.0, 2.0),
                IvpOptions::new(h),
            )
            .unwrap()
            .last()
            .unwrap()[0]
        };
        let exact = (-2.0f64).exp();
        let e1 = (run(0.1) - exact).abs();
        let e2 = (run(0.05) - exact).abs();
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.1, "observed order {order}");
    }

    #[test]
    fn divergence_is_reported() {
        let tr = integrate_ivp(
            |_, y, dy| dy[0] = y[0],
            &[1.0],
            (0.0, 100.0),
            IvpOptions::new(0.01).blowup(1e6),
        )
        .unwrap();
        assert!(tr.diverged());
    }
}
