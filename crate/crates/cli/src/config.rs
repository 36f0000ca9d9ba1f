//! Scenario files: strict TOML, frequencies in Hz, times in seconds.
//!
//! ```toml
//! kind = "respond"            # optional; must match the subcommand
//! seed = 7                    # optional; --seed overrides
//!
//! [chain]
//! n_sites = 4
//! boundary = "open"           # or "periodic"
//! damping_hz = 8000.0         # gamma / 2 pi
//! gain = 0.75                 # exceptional family J = lambda = i G gamma / 4
//! # or explicit couplings instead of `gain`:
//! # hopping_hz = 1500.0
//! # hopping_phase = 1.5707963267948966
//! # squeezing_hz = 1500.0
//! # squeezing_phase = 1.5707963267948966
//! # detuning_hz = [0.0, 0.0, 0.0, 200.0]
//!
//! [respond]
//! omega_hz = [0.0]
//! ```
//!
//! `simulate` and `tones` also need a `[hardware]` table with
//! `frequencies_hz`, `spring_shift_hz`, `linewidth_hz` and optionally
//! `g0_over_kappa`.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use bkc_core::chain::{Boundary, ChainSpec};
use bkc_core::nonlinear::OptomechanicalParams;
use bkc_core::numerics::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Respond,
    Spectrum,
    PhaseDiagram,
    Thermal,
    Sense,
    Simulate,
    Tones,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Respond => "respond",
            Kind::Spectrum => "spectrum",
            Kind::PhaseDiagram => "phase-diagram",
            Kind::Thermal => "thermal",
            Kind::Sense => "sense",
            Kind::Simulate => "simulate",
            Kind::Tones => "tones",
        }
    }

    fn needs_hardware(self) -> bool {
        matches!(self, Kind::Simulate | Kind::Tones)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: Option<Kind>,
    pub seed: Option<u64>,
    pub chain: ChainConfig,
    pub hardware: Option<HardwareConfig>,
    #[serde(default)]
    pub respond: RespondConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default, rename = "phase-diagram")]
    pub phase_diagram: PhaseDiagramConfig,
    #[serde(default)]
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub sense: SenseConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub tones: TonesConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_sites: usize,
    pub boundary: Boundary,
    pub damping_hz: f64,
    pub gain: Option<f64>,
    pub hopping_hz: Option<f64>,
    pub hopping_phase: Option<f64>,
    pub squeezing_hz: Option<f64>,
    pub squeezing_phase: Option<f64>,
    pub detuning_hz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareConfig {
    pub frequencies_hz: Vec<f64>,
    pub spring_shift_hz: f64,
    pub linewidth_hz: f64,
    #[serde(default = "default_g0_over_kappa")]
    pub g0_over_kappa: f64,
}

fn default_g0_over_kappa() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RespondConfig {
    pub omega_hz: Vec<f64>,
}

impl Default for RespondConfig {
    fn default() -> Self {
        RespondConfig {
            omega_hz: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub k_points: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { k_points: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseDiagramConfig {
    pub phase_min: f64,
    pub phase_max: f64,
    pub phase_points: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub ratio_points: usize,
}

impl Default for PhaseDiagramConfig {
    fn default() -> Self {
        PhaseDiagramConfig {
            phase_min: 0.0,
            phase_max: PI,
            phase_points: 41,
            ratio_min: 0.0,
            ratio_max: 2.0,
            ratio_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalConfig {
    /// Bath occupation, one value for all sites or one per site.
    pub n_th: Vec<f64>,
    /// Points of the fluctuation spectrum; none when zero.
    pub spectrum_points: usize,
    /// Spectrum covers `[-span, span]`.
    pub spectrum_span_hz: f64,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig {
            n_th: vec![1.0],
            spectrum_points: 0,
            spectrum_span_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SenseConfig {
    /// Detuning grid `[-max, max]`; defaults to half the damping rate.
    pub epsilon_max_hz: Option<f64>,
    pub epsilon_points: usize,
    /// Chain lengths for the responsivity scaling sweep; none when empty.
    pub lengths: Vec<usize>,
}

impl Default for SenseConfig {
    fn default() -> Self {
        SenseConfig {
            epsilon_max_hz: None,
            epsilon_points: 21,
            lengths: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulateMode {
    Envelope,
    Fullband,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub mode: SimulateMode,
    pub duration_s: f64,
    pub step_s: Option<f64>,
    pub samples: usize,
    pub initial_re: Vec<f64>,
    pub initial_im: Vec<f64>,
    pub nonlinearity: f64,
    /// White-noise intensity per quadrature; no noise when absent.
    pub noise_strength: Option<f64>,
    /// Report steady amplitude and frequency of the final window.
    pub saturation: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            mode: SimulateMode::Envelope,
            duration_s: 0.0,
            step_s: None,
            samples: 2000,
            initial_re: Vec::new(),
            initial_im: Vec::new(),
            nonlinearity: 1.0,
            noise_strength: None,
            saturation: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TonesConfig {
    pub lo_phases: Vec<f64>,
    pub capacity: usize,
}

impl Default for TonesConfig {
    fn default() -> Self {
        TonesConfig {
            lo_phases: Vec::new(),
            capacity: bkc_core::tones::DEFAULT_CAPACITY,
        }
    }
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

/// Required keys absent from the raw table, as dotted paths.
fn missing_required(table: &toml::Table, kind: Kind) -> Vec<String> {
    let mut missing = Vec::new();
    let sub = |name: &str| table.get(name).and_then(|v| v.as_table());
    let chain = sub("chain");
    for key in ["n_sites", "boundary", "damping_hz"] {
        if chain.is_none_or(|c| !c.contains_key(key)) {
            missing.push(format!("chain.{key}"));
        }
    }
    if chain.is_none_or(|c| !c.contains_key("gain") && !c.contains_key("hopping_hz")) {
        missing.push("chain.gain (or chain.hopping_hz)".into());
    }
    if kind.needs_hardware() {
        let hw = sub("hardware");
        for key in ["frequencies_hz", "spring_shift_hz", "linewidth_hz"] {
            if hw.is_none_or(|h| !h.contains_key(key)) {
                missing.push(format!("hardware.{key}"));
            }
        }
    }
    if kind == Kind::Simulate && sub("simulate").is_none_or(|s| !s.contains_key("duration_s")) {
        missing.push("simulate.duration_s".into());
    }
    missing
}

impl Config {
    pub fn load(path: &Path, kind: Kind) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Config::parse(&text, kind)
    }

    pub fn parse(text: &str, kind: Kind) -> Result<Config, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| schema(e.to_string()))?;
        let missing = missing_required(&table, kind);
        if !missing.is_empty() {
            return Err(schema(format!(
                "missing required fields: {}",
                missing.join(", ")
            )));
        }
        let config: Config = toml::from_str(text).map_err(|e| schema(e.to_string()))?;
        if let Some(k) = config.kind {
            if k != kind {
                return Err(schema(format!(
                    "config kind {:?} does not match subcommand {:?}",
                    k.as_str(),
                    kind.as_str()
                )));
            }
        }
        config.check(kind)?;
        Ok(config)
    }

    fn check(&self, kind: Kind) -> Result<(), CliError> {
        let c = &self.chain;
        if c.gain.is_some()
            && (c.hopping_hz.is_some()
                || c.squeezing_hz.is_some()
                || c.hopping_phase.is_some()
                || c.squeezing_phase.is_some())
        {
            return Err(schema(
                "chain: `gain` excludes explicit hopping/squeezing fields",
            ));
        }
        self.chain_spec()?;
        match kind {
            Kind::Respond if self.respond.omega_hz.is_empty() => {
                return Err(schema("respond.omega_hz is empty"))
            }
            Kind::PhaseDiagram
                if self.phase_diagram.phase_points == 0 || self.phase_diagram.ratio_points == 0 =>
            {
                return Err(schema("phase-diagram grids need at least one point"))
            }
            Kind::Thermal
                if self.thermal.spectrum_points > 0 && !(self.thermal.spectrum_span_hz > 0.0) =>
            {
                return Err(schema(
                    "thermal.spectrum_span_hz must be positive when spectrum_points > 0",
                ))
            }
            Kind::Sense if self.sense.epsilon_points == 0 => {
                return Err(schema("sense.epsilon_points must be positive"))
            }
            Kind::Simulate => {
                let s = &self.simulate;
                if !(s.duration_s > 0.0) {
                    return Err(schema("simulate.duration_s must be positive"));
                }
                let n = c.n_sites;
                for (name, v) in [("initial_re", &s.initial_re), ("initial_im", &s.initial_im)] {
                    if !v.is_empty() && v.len() != n {
                        return Err(schema(format!(
                            "simulate.{name} has {} entries for {n} sites",
                            v.len()
                        )));
                    }
                }
            }
            Kind::Tones
                if !self.tones.lo_phases.is_empty() && self.tones.lo_phases.len() != c.n_sites =>
            {
                return Err(schema(format!(
                    "tones.lo_phases has {} entries for {} sites",
                    self.tones.lo_phases.len(),
                    c.n_sites
                )))
            }
            _ => {}
        }
        if kind.needs_hardware() {
            self.params()?;
        }
        Ok(())
    }

    /// Chain in angular units.
    pub fn chain_spec(&self) -> Result<ChainSpec, CliError> {
        let c = &self.chain;
        let gamma = TAU * c.damping_hz;
        let (hopping, squeezing) = match c.gain {
            Some(g) => {
                let mu = g * gamma / 4.0;
                (Complex64::new(0.0, mu), Complex64::new(0.0, mu))
            }
            None => (
                Complex64::from_polar(
                    TAU * c.hopping_hz.unwrap_or(0.0),
                    c.hopping_phase.unwrap_or(0.0),
                ),
                Complex64::from_polar(
                    TAU * c.squeezing_hz.unwrap_or(0.0),
                    c.squeezing_phase.unwrap_or(0.0),
                ),
            ),
        };
        let detuning = match &c.detuning_hz {
            Some(d) => d.iter().map(|v| TAU * v).collect(),
            None => vec![0.0; c.n_sites],
        };
        ChainSpec::new(
            c.n_sites,
            hopping,
            squeezing,
            vec![gamma; c.n_sites],
            detuning,
            c.boundary,
        )
        .map_err(|e| schema(format!("chain: {e}")))
    }

    pub fn params(&self) -> Result<OptomechanicalParams, CliError> {
        let hw = self
            .hardware
            .as_ref()
            .ok_or_else(|| schema("missing required table: hardware"))?;
        let freqs = hw.frequencies_hz.iter().map(|f| TAU * f).collect();
        OptomechanicalParams::from_spring_shift(
            freqs,
            TAU * hw.spring_shift_hz,
            hw.g0_over_kappa,
            TAU * hw.linewidth_hz,
        )
        .map_err(|e| schema(format!("hardware: {e}")))
    }
}
