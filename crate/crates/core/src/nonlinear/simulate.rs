//! Time-domain integration of the modulated chain, either on the full
//! mechanical oscillation (`Fullband`) or on slowly varying envelopes in the
//! frames of the local oscillators (`Envelope`).

use std::f64::consts::{SQRT_2, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::catalog::{envelope_force_terms, ForceTerm};
use super::{NonlinearError, OptomechanicalParams};
use crate::chain::{build_dynamical_matrix, ChainSpec};
use crate::numerics::{integrate_ivp, IvpOptions, Trajectory};
use crate::tones::{compile_tones, coupling_from_modulation, ToneSchedule};

/// Fullband steps per period of the fastest frequency when no step is given.
const STEPS_PER_PERIOD: f64 = 64.0;
/// Coarsest accepted fullband step, in periods of the fastest frequency.
const MAX_PERIOD_FRACTION: f64 = 1.0 / 50.0;
/// Envelope step as a fraction of the fastest slow rate.
const ENVELOPE_STEP_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulationMode {
    Fullband,
    Envelope,
}

/// White force noise. In envelope mode each quadrature receives noise of
/// intensity `strength` (variance per unit time); in fullband mode mode `j`
/// receives force noise of intensity `4 nu_j^2 strength`, which maps onto the
/// same quadrature intensity. Samples are drawn on the integration grid and
/// linearly interpolated, so the realized spectrum rolls off near the step
/// frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDrive {
    pub strength: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub mode: SimulationMode,
    pub duration: f64,
    /// Integration step; chosen from the fastest rate when `None`.
    pub step: Option<f64>,
    /// Approximate number of stored samples.
    pub samples: usize,
    /// Envelope amplitudes `a_j` at `t = 0`, with `x = sqrt2 Re a`, `p = sqrt2 Im a`.
    pub initial: Vec<Complex64>,
    /// Multiplier on the cubic force; 0 gives the linear chain.
    pub nonlinearity: f64,
    pub noise: Option<NoiseDrive>,
    /// Quadrature norm at which the run is declared divergent.
    pub blowup: f64,
}

impl SimulationOptions {
    pub fn new(mode: SimulationMode, duration: f64, initial: Vec<Complex64>) -> Self {
        SimulationOptions {
            mode,
            duration,
            step: None,
            samples: 2000,
            initial,
            nonlinearity: 1.0,
            noise: None,
            blowup: 1e12,
        }
    }

    pub fn step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn samples(mut self, samples: usize) -> Self {
        self.samples = samples.max(1);
        self
    }

    pub fn nonlinearity(mut self, scale: f64) -> Self {
        self.nonlinearity = scale;
        self
    }

    pub fn noise(mut self, noise: NoiseDrive) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn blowup(mut self, bound: f64) -> Self {
        self.blowup = bound;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub mode: SimulationMode,
    pub schedule: ToneSchedule,
    /// Local-oscillator frequencies defining the envelopes.
    pub frame_frequencies: Vec<f64>,
    /// Spring-shifted mechanical frequencies.
    pub natural_frequencies: Vec<f64>,
    /// Envelope quadratures `(x_1..x_N, p_1..p_N)`; demodulated in fullband mode.
    pub quadratures: Trajectory,
    /// Fullband state `(z_1..z_N, dz_1..dz_N)`.
    pub raw: Option<Trajectory>,
}

impl Simulation {
    pub fn diverged(&self) -> bool {
        self.quadratures.diverged()
    }

    /// Complex envelopes of sample `idx`.
    pub fn envelopes(&self, idx: usize) -> Vec<Complex64> {
        let s = &self.quadratures.states[idx];
        let n = s.len() / 2;
        (0..n)
            .map(|j| Complex64::new(s[j], s[n + j]) / SQRT_2)
            .collect()
    }
}

/// Counter-based Gaussian samples on a uniform grid, linearly interpolated.
struct NoiseField {
    seed: u64,
    t0: f64,
    h: f64,
    gains: Vec<f64>,
    node: i64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl NoiseField {
    fn new(seed: u64, t0: f64, h: f64, gains: Vec<f64>) -> Self {
        let c = gains.len();
        NoiseField {
            seed,
            t0,
            h,
            gains,
            node: i64::MIN,
            lo: vec![0.0; c],
            hi: vec![0.0; c],
        }
    }

    fn gaussian(&self, channel: usize, node: i64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(channel as u64);
        // Room for ziggurat rejections before the next node's words.
        rng.set_word_pos(node as u128 * 64);
        rng.sample(StandardNormal)
    }

    fn fill(&mut self, node: i64) {
        let c = self.gains.len();
        if node == self.node + 1 {
            std::mem::swap(&mut self.lo, &mut self.hi);
            for ch in 0..c {
                self.hi[ch] = self.gaussian(ch, node + 1);
            }
        } else {
            for ch in 0..c {
                self.lo[ch] = self.gaussian(ch, node);
                self.hi[ch] = self.gaussian(ch, node + 1);
            }
        }
        self.node = node;
    }

    /// Adds the noise at time `t` to `out`.
    fn add(&mut self, t: f64, out: &mut [f64]) {
        let pos = ((t - self.t0) / self.h).max(0.0);
        let node = pos.floor() as i64;
        if node != self.node {
            self.fill(node);
        }
        let frac = pos - node as f64;
        let white = 1.0 / self.h.sqrt();
        for (ch, g) in self.gains.iter().enumerate() {
            out[ch] += g * white * (self.lo[ch] + frac * (self.hi[ch] - self.lo[ch]));
        }
    }
}

fn apply_force_terms(terms: &[ForceTerm], a: &[Complex64], da: &mut [Complex64]) {
    for t in terms {
        let v = |f: (usize, bool)| if f.1 { a[f.0].conj() } else { a[f.0] };
        da[t.target] += t.coefficient * v(t.factors[0]) * v(t.factors[1]) * v(t.factors[2]);
    }
}

/// Integrates the chain realized by the tones that [`compile_tones`] derives
/// from `spec` and `params`.
///
/// Envelope mode evolves `dq/dt = M q` plus the secular cubic force.
/// Fullband mode evolves
/// `z_i'' = -W_i^2 z_i - gamma_i z_i' - sum t_ip cos(w_m t + phase_m) z_p - c_i m(t) u^3`
/// with `W_i` the spring-shifted frequency, `t_ip = 4 nu_i |coupling|`,
/// `u = sum_j g0_j z_j` and `m(t) = 1 + sum_m c_m cos(w_m t + phase_m)`, and
/// demodulates `a = (z + i z'/nu) e^{i nu t} / 2`. The fullband equation is
/// integrated exactly through the rotating variables `b = (z + i z'/W) e^{iWt} / 2`,
/// so RK4 error scales with the perturbing forces rather than with `W`.
pub fn simulate(
    spec: &ChainSpec,
    params: &OptomechanicalParams,
    options: &SimulationOptions,
) -> Result<Simulation, NonlinearError> {
    spec.validate()?;
    params.validate()?;
    let n = spec.n_sites;
    params.require_modes(n)?;
    if options.nonlinearity != 0.0 {
        params.check_magic()?;
    }
    if options.initial.len() != n {
        return Err(NonlinearError::InvalidParams(format!(
            "initial state has {} amplitudes for {n} modes",
            options.initial.len()
        )));
    }
    if !(options.duration > 0.0 && options.duration.is_finite()) {
        return Err(NonlinearError::InvalidParams(format!(
            "duration {} must be positive",
            options.duration
        )));
    }
    if let Some(noise) = options.noise {
        if !(noise.strength >= 0.0 && noise.strength.is_finite()) {
            return Err(NonlinearError::InvalidParams(
                "noise strength must be non-negative".into(),
            ));
        }
    }
    let schedule = compile_tones(spec, params)?;
    let nu = schedule.frame_frequencies();
    let natural: Vec<f64> = (0..n).map(|j| params.shifted_frequency(j)).collect();
    let terms = if options.nonlinearity != 0.0 {
        envelope_force_terms(params, &schedule, options.nonlinearity)?
    } else {
        Vec::new()
    };

    let (quadratures, raw) = match options.mode {
        SimulationMode::Envelope => (run_envelope(spec, &terms, options)?, None),
        SimulationMode::Fullband => {
            let raw = run_fullband(spec, params, &schedule, &natural, options)?;
            (demodulate(&raw, &nu), Some(raw))
        }
    };
    Ok(Simulation {
        mode: options.mode,
        schedule,
        frame_frequencies: nu,
        natural_frequencies: natural,
        quadratures,
        raw,
    })
}

/// Shrinks `step` so that every recording interval holds a whole number of
/// steps; both modes then sample at the same times.
fn aligned_step(duration: f64, step: f64, samples: usize) -> (f64, usize) {
    let interval = duration / samples.max(1) as f64;
    let every = (interval / step).ceil().max(1.0);
    (interval / every, every as usize)
}

fn run_envelope(
    spec: &ChainSpec,
    terms: &[ForceTerm],
    options: &SimulationOptions,
) -> Result<Trajectory, NonlinearError> {
    let n = spec.n_sites;
    let m = build_dynamical_matrix(spec)?.matrix;
    let a0 = &options.initial;
    let step = match options.step {
        Some(h) => h,
        None => {
            let amp2 = a0.iter().map(|a| a.norm_sqr()).fold(1.0f64, f64::max);
            let mut nl = vec![0.0; n];
            for t in terms {
                nl[t.target] += t.coefficient.norm() * amp2;
            }
            let rate = nl
                .iter()
                .fold(m.norm_inf(), |r, v| r.max(*v))
                .max(f64::MIN_POSITIVE);
            ENVELOPE_STEP_FRACTION / rate
        }
    };
    let (step, every) = aligned_step(options.duration, step, options.samples);
    let y0: Vec<f64> = a0
        .iter()
        .map(|a| SQRT_2 * a.re)
        .chain(a0.iter().map(|a| SQRT_2 * a.im))
        .collect();
    let mut noise = options
        .noise
        .map(|d| NoiseField::new(d.seed, 0.0, step, vec![d.strength.sqrt(); 2 * n]));
    let mut a = vec![Complex64::new(0.0, 0.0); n];
    let mut da = vec![Complex64::new(0.0, 0.0); n];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let lin = m.matvec(y);
        dy.copy_from_slice(&lin);
        if !terms.is_empty() {
            for j in 0..n {
                a[j] = Complex64::new(y[j], y[n + j]) / SQRT_2;
                da[j] = Complex64::new(0.0, 0.0);
            }
            apply_force_terms(terms, &a, &mut da);
            for j in 0..n {
                dy[j] += SQRT_2 * da[j].re;
                dy[n + j] += SQRT_2 * da[j].im;
            }
        }
        if let Some(field) = noise.as_mut() {
            field.add(t, dy);
        }
    };
    let opts = IvpOptions::new(step)
        .record_every(every)
        .blowup(options.blowup);
    Ok(integrate_ivp(rhs, &y0, (0.0, options.duration), opts)?)
}

struct ToneForce {
    target: usize,
    partner: usize,
    amplitude: f64,
    frequency: f64,
    phase: f64,
}

fn run_fullband(
    spec: &ChainSpec,
    params: &OptomechanicalParams,
    schedule: &ToneSchedule,
    natural: &[f64],
    options: &SimulationOptions,
) -> Result<Trajectory, NonlinearError> {
    let n = spec.n_sites;
    let nu = schedule.frame_frequencies();
    let shifts: Vec<f64> = (0..n).map(|j| params.spring_shift(j)).collect();
    let active: Vec<_> = schedule.tones.iter().filter(|t| t.depth != 0.0).collect();

    let mut forces = Vec::new();
    for tone in &active {
        let (s, t) = tone.link;
        let magnitude = coupling_from_modulation(tone.depth, shifts[s], shifts[t]);
        for (target, partner) in [(s, t), (t, s)] {
            forces.push(ToneForce {
                target,
                partner,
                amplitude: 4.0 * nu[target] * magnitude,
                frequency: tone.frequency,
                phase: tone.phase,
            });
        }
    }
    let modulation: Vec<(f64, f64, f64)> = active
        .iter()
        .map(|t| (t.depth, t.frequency, t.phase))
        .collect();

    let fastest = nu
        .iter()
        .chain(natural)
        .chain(active.iter().map(|t| &t.frequency))
        .fold(0.0f64, |m, w| m.max(w.abs()));
    let limit = TAU / fastest * MAX_PERIOD_FRACTION;
    let step = options.step.unwrap_or(TAU / fastest / STEPS_PER_PERIOD);
    if step > limit * (1.0 + 1e-12) {
        return Err(NonlinearError::StepTooCoarse { step, limit });
    }
    let (step, every) = aligned_step(options.duration, step, options.samples);

    let cubic: Vec<f64> = if options.nonlinearity != 0.0 {
        (0..n)
            .map(|i| params.cubic_prefactor(i) * options.nonlinearity)
            .collect()
    } else {
        Vec::new()
    };
    let g = params.vacuum_couplings.clone();
    let gamma = spec.damping.clone();
    let mut noise = options.noise.map(|d| {
        let gains = (0..n).map(|j| 2.0 * nu[j] * d.strength.sqrt()).collect();
        NoiseField::new(d.seed, 0.0, step, gains)
    });

    // Exact variation of constants: z = b e^{-iWt} + c.c. with
    // db/dt = i F e^{iWt} / (2W), where F is every force except -W^2 z.
    let mut z = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut force = vec![0.0; n];
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        for i in 0..n {
            let rot = Complex64::new(y[i], y[n + i]) * Complex64::from_polar(1.0, -natural[i] * t);
            z[i] = 2.0 * rot.re;
            v[i] = 2.0 * natural[i] * rot.im;
            force[i] = -gamma[i] * v[i];
        }
        for f in &forces {
            force[f.target] -= f.amplitude * (f.frequency * t + f.phase).cos() * z[f.partner];
        }
        if !cubic.is_empty() {
            let m = 1.0
                + modulation
                    .iter()
                    .map(|(c, w, p)| c * (w * t + p).cos())
                    .sum::<f64>();
            let u: f64 = g.iter().zip(&z).map(|(gj, zj)| gj * zj).sum();
            let u3 = m * u * u * u;
            for i in 0..n {
                force[i] -= cubic[i] * u3;
            }
        }
        if let Some(field) = noise.as_mut() {
            field.add(t, &mut force);
        }
        for i in 0..n {
            let db = Complex64::new(0.0, force[i] / (2.0 * natural[i]))
                * Complex64::from_polar(1.0, natural[i] * t);
            dy[i] = db.re;
            dy[n + i] = db.im;
        }
    };
    let a0 = &options.initial;
    let z0: Vec<f64> = a0.iter().map(|a| 2.0 * a.re).collect();
    let v0: Vec<f64> = a0.iter().zip(&nu).map(|(a, w)| 2.0 * w * a.im).collect();
    let b0: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(z0[i], v0[i] / natural[i]) / 2.0)
        .collect();
    let y0: Vec<f64> = b0
        .iter()
        .map(|b| b.re)
        .chain(b0.iter().map(|b| b.im))
        .collect();
    let opts = IvpOptions::new(step)
        .record_every(every)
        .blowup(options.blowup);
    let mut traj = integrate_ivp(rhs, &y0, (0.0, options.duration), opts)?;
    for (t, s) in traj.times.iter().zip(traj.states.iter_mut()) {
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            let rot = Complex64::new(s[i], s[n + i]) * Complex64::from_polar(1.0, -natural[i] * t);
            out[i] = 2.0 * rot.re;
            out[n + i] = 2.0 * natural[i] * rot.im;
        }
        *s = out;
    }
    Ok(traj)
}

/// `a = (z + i z'/nu) e^{i nu t} / 2`, stored as `(sqrt2 Re a, sqrt2 Im a)`.
fn demodulate(raw: &Trajectory, nu: &[f64]) -> Trajectory {
    let n = nu.len();
    let states = raw
        .times
        .iter()
        .zip(&raw.states)
        .map(|(&t, s)| {
            let mut q = vec![0.0; 2 * n];
            for j in 0..n {
                let a =
                    Complex64::new(s[j], s[n + j] / nu[j]) * Complex64::from_polar(0.5, nu[j] * t);
                q[j] = SQRT_2 * a.re;
                q[n + j] = SQRT_2 * a.im;
            }
            q
        })
        .collect();
    Trajectory {
        times: raw.times.clone(),
        states,
        integrator: raw.integrator.clone(),
        step: raw.step,
        status: raw.status,
    }
}
