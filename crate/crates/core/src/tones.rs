//! Modulation-tone compiler: turns a chain specification into beam-splitter
//! and two-mode-squeezing tones with rotating-frame phase bookkeeping, and
//! plans how tones and local oscillators share a fixed oscillator bank.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainError, ChainSpec};
use crate::nonlinear::{NonlinearError, OptomechanicalParams};

/// Relative tolerance for frequency collisions.
pub const COLLISION_TOLERANCE: f64 = 1e-9;
/// Oscillators available on the reference instrument.
pub const DEFAULT_CAPACITY: usize = 8;
/// Output delay per oscillator index, in clock cycles.
pub const LATENCY_CYCLES_PER_INDEX: u32 = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToneError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Params(#[from] NonlinearError),
    #[error("{kind} tone on link {link:?} needs modulation depth {depth:.6} > 1 (insufficient spring shift)")]
    InsufficientSpringShift {
        link: (usize, usize),
        kind: ToneKind,
        depth: f64,
    },
    #[error("frequency collision between {first} and {second} at {frequency:.9e} rad/s")]
    FrequencyCollision {
        first: String,
        second: String,
        frequency: f64,
    },
    #[error("no local oscillator for mode {mode}")]
    MissingOscillator { mode: usize },
    #[error("{n_modes} modes leave no transfer oscillator among {capacity}")]
    Infeasible { n_modes: usize, capacity: usize },
    #[error("table line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToneKind {
    #[serde(rename = "BS")]
    BeamSplitter,
    #[serde(rename = "TMS")]
    TwoModeSqueezing,
}

impl ToneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ToneKind::BeamSplitter => "BS",
            ToneKind::TwoModeSqueezing => "TMS",
        }
    }

    fn sign(self) -> char {
        match self {
            ToneKind::BeamSplitter => '-',
            ToneKind::TwoModeSqueezing => '+',
        }
    }
}

impl std::fmt::Display for ToneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One intensity-modulation tone `c cos(omega t + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// Chain link `(source, target)` the tone realizes.
    pub link: (usize, usize),
    pub kind: ToneKind,
    /// Frequency label `(j, k)` of the tone `j - k` or `j + k`. For a
    /// difference tone `j` is the higher-frequency mode.
    pub label: (usize, usize),
    /// Angular frequency (rad/s).
    pub frequency: f64,
    pub depth: f64,
    /// Argument of the coupling the tone implements (`arg J` or `arg lambda`).
    pub target_phase: f64,
    /// Absolute phase offset of the tone.
    pub phase: f64,
}

impl Tone {
    pub fn pair_label(&self) -> String {
        format!("{}{}{}", self.label.0, self.kind.sign(), self.label.1)
    }

    /// Formal frequency as integer coefficients on the mode frequencies.
    pub fn formal_frequency(&self, n_modes: usize) -> Vec<i64> {
        let mut v = vec![0i64; n_modes];
        v[self.label.0] += 1;
        match self.kind {
            ToneKind::BeamSplitter => v[self.label.1] -= 1,
            ToneKind::TwoModeSqueezing => v[self.label.1] += 1,
        }
        v
    }

    /// Coupling in the link orientation recovered from the depth, the two
    /// spring shifts and the tone phase relative to the local oscillators.
    pub fn coupling(
        &self,
        spring_shifts: &[f64],
        oscillators: &[LocalOscillator],
    ) -> Result<Complex64, ToneError> {
        let (j, k) = self.label;
        for m in [j, k] {
            if m >= spring_shifts.len() {
                return Err(ToneError::MissingOscillator { mode: m });
            }
        }
        let magnitude = coupling_from_modulation(self.depth, spring_shifts[j], spring_shifts[k]);
        let dphi = rotating_frame_phase(self, oscillators)?;
        let arg = match self.kind {
            ToneKind::BeamSplitter if self.label.0 == self.link.1 => -dphi,
            ToneKind::BeamSplitter => dphi,
            ToneKind::TwoModeSqueezing => -dphi,
        };
        Ok(Complex64::from_polar(magnitude, arg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalOscillator {
    pub mode: usize,
    /// Angular frequency (rad/s) defining the rotating frame of the mode.
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneSchedule {
    pub tones: Vec<Tone>,
    pub oscillators: Vec<LocalOscillator>,
}

impl ToneSchedule {
    /// Local-oscillator frequencies indexed by mode.
    pub fn frame_frequencies(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.oscillators.len()];
        for lo in &self.oscillators {
            f[lo.mode] = lo.frequency;
        }
        f
    }
}

/// Coupling magnitude produced by depth `c` between modes with spring shifts
/// `dw_j`, `dw_k`: `c sqrt(dw_j dw_k) / 2`.
pub fn coupling_from_modulation(depth: f64, dw_j: f64, dw_k: f64) -> f64 {
    depth * (dw_j * dw_k).sqrt() / 2.0
}

/// Inverse of [`coupling_from_modulation`].
pub fn modulation_depth(coupling: f64, dw_j: f64, dw_k: f64) -> f64 {
    2.0 * coupling / (dw_j * dw_k).sqrt()
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Tone phase in the frame of its two local oscillators:
/// `phase - (phi_j +- phi_k)`, wrapped into `(-pi, pi]`.
pub fn rotating_frame_phase(
    tone: &Tone,
    oscillators: &[LocalOscillator],
) -> Result<f64, ToneError> {
    let lo_phase = |mode: usize| {
        oscillators
            .iter()
            .find(|lo| lo.mode == mode)
            .map(|lo| lo.phase)
            .ok_or(ToneError::MissingOscillator { mode })
    };
    let (pj, pk) = (lo_phase(tone.label.0)?, lo_phase(tone.label.1)?);
    let reference = match tone.kind {
        ToneKind::BeamSplitter => pj - pk,
        ToneKind::TwoModeSqueezing => pj + pk,
    };
    Ok(wrap_phase(tone.phase - reference))
}

/// Compiles the chain into tones with all local-oscillator phases zero.
pub fn compile_tones(
    spec: &ChainSpec,
    params: &OptomechanicalParams,
) -> Result<ToneSchedule, ToneError> {
    compile_tones_with(spec, params, &vec![0.0; spec.n_sites])
}

/// Compiles one beam-splitter and one squeezing tone per chain link.
/// Zero-depth tones are listed but exempt from the collision check.
///
/// The local oscillator of mode `j` runs at `omega_j + dw_j + eps_j`, so a
/// detuning shifts every tone touching the detuned site.
pub fn compile_tones_with(
    spec: &ChainSpec,
    params: &OptomechanicalParams,
    lo_phases: &[f64],
) -> Result<ToneSchedule, ToneError> {
    spec.validate()?;
    params.validate()?;
    let n = spec.n_sites;
    params.require_modes(n)?;
    if lo_phases.len() != n {
        return Err(ChainError::Length {
            field: "lo_phases",
            got: lo_phases.len(),
            expected: n,
        }
        .into());
    }
    let shifts: Vec<f64> = (0..n).map(|j| params.spring_shift(j)).collect();
    let oscillators: Vec<LocalOscillator> = (0..n)
        .map(|j| LocalOscillator {
            mode: j,
            frequency: params.frequencies[j] + shifts[j] + spec.detuning[j],
            phase: lo_phases[j],
        })
        .collect();
    let nu: Vec<f64> = oscillators.iter().map(|lo| lo.frequency).collect();

    let mut tones = Vec::with_capacity(2 * spec.links().len());
    for (s, t) in spec.links() {
        let product = shifts[s] * shifts[t];
        for (kind, coupling) in [
            (ToneKind::BeamSplitter, spec.hopping),
            (ToneKind::TwoModeSqueezing, spec.squeezing),
        ] {
            let depth = if coupling.norm() == 0.0 {
                0.0
            } else if product > 0.0 {
                modulation_depth(coupling.norm(), shifts[s], shifts[t])
            } else {
                f64::INFINITY
            };
            if !(depth <= 1.0) {
                return Err(ToneError::InsufficientSpringShift {
                    link: (s, t),
                    kind,
                    depth,
                });
            }
            let arg = if coupling.norm() == 0.0 {
                0.0
            } else {
                coupling.arg()
            };
            let (label, frequency, dphi, reference) = match kind {
                ToneKind::BeamSplitter => {
                    let (hi, lo) = if nu[t] > nu[s] { (t, s) } else { (s, t) };
                    let dphi = if hi == t { -arg } else { arg };
                    (
                        (hi, lo),
                        nu[hi] - nu[lo],
                        dphi,
                        lo_phases[hi] - lo_phases[lo],
                    )
                }
                ToneKind::TwoModeSqueezing => (
                    (s.min(t), s.max(t)),
                    nu[s] + nu[t],
                    -arg,
                    lo_phases[s] + lo_phases[t],
                ),
            };
            tones.push(Tone {
                link: (s, t),
                kind,
                label,
                frequency,
                depth,
                target_phase: arg,
                phase: wrap_phase(dphi + reference),
            });
        }
    }
    tones.sort_by(|a, b| (a.kind, a.label, a.link).cmp(&(b.kind, b.label, b.link)));
    check_collisions(&tones, &oscillators)?;
    Ok(ToneSchedule { tones, oscillators })
}

fn check_collisions(tones: &[Tone], oscillators: &[LocalOscillator]) -> Result<(), ToneError> {
    let mut entries: Vec<(String, f64)> = oscillators
        .iter()
        .map(|lo| (format!("LO {}", lo.mode), lo.frequency))
        .collect();
    entries.extend(
        tones
            .iter()
            .filter(|t| t.depth != 0.0)
            .map(|t| (format!("{} tone {}", t.kind, t.pair_label()), t.frequency)),
    );
    let scale = entries
        .iter()
        .map(|e| e.1.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for (a, (name_a, fa)) in entries.iter().enumerate() {
        if fa.abs() <= COLLISION_TOLERANCE * scale {
            return Err(ToneError::FrequencyCollision {
                first: name_a.clone(),
                second: "DC".into(),
                frequency: *fa,
            });
        }
        for (name_b, fb) in &entries[a + 1..] {
            if (fa - fb).abs() <= COLLISION_TOLERANCE * scale {
                return Err(ToneError::FrequencyCollision {
                    first: name_a.clone(),
                    second: name_b.clone(),
                    frequency: *fa,
                });
            }
        }
    }
    Ok(())
}

/// Plain-text table, one row per local oscillator and tone.
///
/// ```text
/// # row pair kind link frequency_hz depth phase_rad target_phase_rad
/// LO 0 - - 3700000 - 0 -
/// TONE 1-0 BS 0>1 1600000 0.3 -1.5707963267948966 1.5707963267948966
/// ```
pub fn schedule_to_table(schedule: &ToneSchedule) -> String {
    let mut out =
        String::from("# row pair kind link frequency_hz depth phase_rad target_phase_rad\n");
    for lo in &schedule.oscillators {
        let _ = writeln!(
            out,
            "LO {} - - {} - {} -",
            lo.mode,
            lo.frequency / TAU,
            lo.phase
        );
    }
    for t in &schedule.tones {
        let _ = writeln!(
            out,
            "TONE {} {} {}>{} {} {} {} {}",
            t.pair_label(),
            t.kind,
            t.link.0,
            t.link.1,
            t.frequency / TAU,
            t.depth,
            t.phase,
            t.target_phase
        );
    }
    out
}

/// Parses the format written by [`schedule_to_table`].
pub fn schedule_from_table(text: &str) -> Result<ToneSchedule, ToneError> {
    let mut tones = Vec::new();
    let mut oscillators = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ToneError::Parse { line, message };
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.len() != 8 {
            return Err(err(format!("expected 8 columns, found {}", cols.len())));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| err(format!("bad number {s:?}: {e}")))
        };
        let idx_of = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| err(format!("bad index {s:?}: {e}")))
        };
        match cols[0] {
            "LO" => oscillators.push(LocalOscillator {
                mode: idx_of(cols[1])?,
                frequency: num(cols[4])? * TAU,
                phase: num(cols[6])?,
            }),
            "TONE" => {
                let kind = match cols[2] {
                    "BS" => ToneKind::BeamSplitter,
                    "TMS" => ToneKind::TwoModeSqueezing,
                    other => return Err(err(format!("unknown tone kind {other:?}"))),
                };
                let (a, b) = cols[1]
                    .split_once(kind.sign())
                    .ok_or_else(|| err(format!("pair {:?} does not match kind {kind}", cols[1])))?;
                let (s, t) = cols[3]
                    .split_once('>')
                    .ok_or_else(|| err(format!("bad link {:?}", cols[3])))?;
                tones.push(Tone {
                    link: (idx_of(s)?, idx_of(t)?),
                    kind,
                    label: (idx_of(a)?, idx_of(b)?),
                    frequency: num(cols[4])? * TAU,
                    depth: num(cols[5])?,
                    phase: num(cols[6])?,
                    target_phase: num(cols[7])?,
                });
            }
            other => return Err(err(format!("unknown row type {other:?}"))),
        }
    }
    Ok(ToneSchedule { tones, oscillators })
}

/// One step of the phase-transfer procedure for an externally generated tone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferStep {
    /// Tune the transfer oscillator to the tone frequency.
    SetFrequency { oscillator: usize, tone: usize },
    /// Read instantaneous phases of the transfer oscillator and both LOs.
    ReadPhases { oscillator: usize, tone: usize },
    /// Evaluate the transfer oscillator's rotating-frame phase.
    ComputeOffset { oscillator: usize, tone: usize },
    /// Shift the transfer oscillator by minus that phase.
    CancelOffset { oscillator: usize, tone: usize },
    /// Output a weak reference modulation from the transfer oscillator.
    EmitReference { oscillator: usize, tone: usize },
    /// Demodulate the monitor signal: phase `alpha_1`.
    MeasureReference { oscillator: usize, tone: usize },
    /// Disable the internal output and enable the external source.
    SwitchToExternal { tone: usize },
    /// Demodulate the monitor signal: phase `alpha_2`.
    MeasureExternal { oscillator: usize, tone: usize },
    /// Shift the external source by `-(alpha_2 - alpha_1)`.
    AlignExternal { tone: usize },
    /// Shift the external source to the target coupling phase.
    ApplyTargetPhase { tone: usize },
}

impl TransferStep {
    pub fn describe(&self) -> String {
        match self {
            TransferStep::SetFrequency { oscillator, tone } => {
                format!("set oscillator {oscillator} to the frequency of tone {tone}")
            }
            TransferStep::ReadPhases { oscillator, tone } => {
                format!(
                    "read phases of oscillator {oscillator} and the LOs addressed by tone {tone}"
                )
            }
            TransferStep::ComputeOffset { oscillator, tone } => {
                format!("compute rotating-frame phase of oscillator {oscillator} for tone {tone}")
            }
            TransferStep::CancelOffset { oscillator, .. } => {
                format!("shift oscillator {oscillator} by minus its rotating-frame phase")
            }
            TransferStep::EmitReference { oscillator, .. } => {
                format!("emit weak reference modulation from oscillator {oscillator}")
            }
            TransferStep::MeasureReference { oscillator, .. } => {
                format!("measure monitor phase alpha_1 with oscillator {oscillator}")
            }
            TransferStep::SwitchToExternal { tone } => {
                format!("disable internal output, enable external source of tone {tone}")
            }
            TransferStep::MeasureExternal { oscillator, .. } => {
                format!("measure monitor phase alpha_2 with oscillator {oscillator}")
            }
            TransferStep::AlignExternal { tone } => {
                format!("shift external source of tone {tone} by -(alpha_2 - alpha_1)")
            }
            TransferStep::ApplyTargetPhase { tone } => {
                format!("shift external source of tone {tone} to its target phase")
            }
        }
    }
}

/// Full transfer script for an external tone.
pub fn transfer_script(oscillator: usize, tone: usize) -> Vec<TransferStep> {
    vec![
        TransferStep::SetFrequency { oscillator, tone },
        TransferStep::ReadPhases { oscillator, tone },
        TransferStep::ComputeOffset { oscillator, tone },
        TransferStep::CancelOffset { oscillator, tone },
        TransferStep::EmitReference { oscillator, tone },
        TransferStep::MeasureReference { oscillator, tone },
        TransferStep::SwitchToExternal { tone },
        TransferStep::MeasureExternal { oscillator, tone },
        TransferStep::AlignExternal { tone },
        TransferStep::ApplyTargetPhase { tone },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalTone {
    pub tone: usize,
    pub script: Vec<TransferStep>,
}

/// Assignment of local oscillators and tones to a bank of numbered
/// oscillators (1-based, as on the instrument front panel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorPlan {
    pub capacity: usize,
    pub latency_cycles_per_index: u32,
    /// `(oscillator index, mode)`.
    pub local_oscillators: Vec<(usize, usize)>,
    /// `(oscillator index, tone)`.
    pub internal_tones: Vec<(usize, usize)>,
    pub external_tones: Vec<ExternalTone>,
    /// Oscillator borrowed for phase transfer, if any tone is external.
    pub transfer_oscillator: Option<usize>,
    /// Re-referencing of the internal tone displaced by the transfer steps.
    pub restore: Vec<TransferStep>,
}

impl OscillatorPlan {
    pub fn latency_cycles(&self, index: usize) -> u32 {
        self.latency_cycles_per_index * index as u32
    }

    /// Oscillators in use once referencing is finished.
    pub fn occupied(&self) -> usize {
        self.local_oscillators.len() + self.internal_tones.len()
    }
}

/// LOs take the lowest indices, tones fill the remaining slots, and any
/// overflow tones become external sources referenced through the
/// highest-index oscillator.
pub fn plan_oscillators(
    n_modes: usize,
    n_tones: usize,
    capacity: usize,
) -> Result<OscillatorPlan, ToneError> {
    let overflow = n_modes + n_tones > capacity;
    if n_modes > capacity || (overflow && n_modes + 1 > capacity) {
        return Err(ToneError::Infeasible { n_modes, capacity });
    }
    let local_oscillators: Vec<(usize, usize)> = (0..n_modes).map(|m| (m + 1, m)).collect();
    let n_internal = n_tones.min(capacity - n_modes);
    let internal_tones: Vec<(usize, usize)> =
        (0..n_internal).map(|t| (n_modes + 1 + t, t)).collect();
    let (external_tones, transfer_oscillator, restore) = if overflow {
        let osc = capacity;
        let displaced = internal_tones
            .last()
            .map(|&(_, tone)| tone)
            .expect("overflow leaves an internal tone");
        let external = (n_internal..n_tones)
            .map(|tone| ExternalTone {
                tone,
                script: transfer_script(osc, tone),
            })
            .collect();
        let restore = transfer_script(osc, displaced)
            .into_iter()
            .take(4)
            .collect();
        (external, Some(osc), restore)
    } else {
        (Vec::new(), None, Vec::new())
    };
    Ok(OscillatorPlan {
        capacity,
        latency_cycles_per_index: LATENCY_CYCLES_PER_INDEX,
        local_oscillators,
        internal_tones,
        external_tones,
        transfer_oscillator,
        restore,
    })
}
