//! Scenario execution: one function per kind, each returning the rendered
//! datasets and a JSON summary.

use std::f64::consts::TAU;

use bkc_core::chain::{build_dynamical_matrix, Boundary, ChainSpec};
use bkc_core::nonlinear::{
    saturation_metrics, simulate, NoiseDrive, SaturationOptions, SimulationMode, SimulationOptions,
};
use bkc_core::numerics::{eigenvalues, Complex64};
use bkc_core::response::{channel_gains, end_to_end_gain_map, linear_grid, susceptibility};
use bkc_core::sensing::{scaling_sweep, sensing_report};
use bkc_core::spectra::{bloch_bands, classify_phase, stability_report, winding_numbers};
use bkc_core::thermal::{closed_form_population, steady_covariance, thermal_spectrum};
use bkc_core::tones::{compile_tones_with, plan_oscillators, schedule_to_table, ToneKind};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Config, Kind, SimulateMode};
use crate::dataset::{complex_cells, complex_columns, Artifact, Cell, Table};
use crate::CliError;

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Quadrature labels `x1..xN, p1..pN`.
fn quadrature_labels(n: usize) -> Vec<String> {
    (1..=n)
        .map(|j| format!("x{j}"))
        .chain((1..=n).map(|j| format!("p{j}")))
        .collect()
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

pub fn run(kind: Kind, config: &Config, seed: u64) -> Result<Outcome, CliError> {
    let spec = config.chain_spec()?;
    let (mut artifacts, summary) = match kind {
        Kind::Respond => respond(config, &spec)?,
        Kind::Spectrum => spectrum(config, &spec)?,
        Kind::PhaseDiagram => phase_diagram(config, &spec)?,
        Kind::Thermal => thermal(config, &spec)?,
        Kind::Sense => sense(config, &spec)?,
        Kind::Simulate => simulate_scenario(config, &spec, seed)?,
        Kind::Tones => tones(config, &spec)?,
    };
    artifacts.push(Artifact::json("summary", &summary)?);
    Ok(Outcome { artifacts, summary })
}

type Produced = (Vec<Artifact>, Value);

fn respond(config: &Config, spec: &ChainSpec) -> Result<Produced, CliError> {
    let n = spec.n_sites;
    let labels = quadrature_labels(n);
    let results = config
        .respond
        .omega_hz
        .par_iter()
        .map(|&f| {
            let chi = susceptibility(spec, TAU * f).map_err(numerical)?;
            let gains = channel_gains(&chi).map_err(numerical)?;
            Ok((f, chi, gains))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut long = Table::with_columns(
        "susceptibility",
        ["omega_hz", "to", "from"]
            .iter()
            .map(|s| s.to_string())
            .chain(complex_columns("chi_s"))
            .collect(),
    );
    let mut magnitude = Table::with_columns(
        "susceptibility_magnitude",
        ["omega_hz".to_string(), "to".to_string()]
            .into_iter()
            .chain(labels.iter().cloned())
            .collect(),
    );
    let mut channels = Table::new("singular_values", &["omega_hz", "index", "sigma_s"]);
    let mut separations = Vec::new();
    for (f, chi, gains) in &results {
        for r in 0..2 * n {
            let mut mrow = vec![Cell::Float(*f), Cell::Text(labels[r].clone())];
            for c in 0..2 * n {
                let z = chi.chi[(r, c)];
                let mut row = vec![
                    Cell::Float(*f),
                    Cell::Text(labels[r].clone()),
                    Cell::Text(labels[c].clone()),
                ];
                row.extend(complex_cells(z));
                long.push(row);
                mrow.push(Cell::Float(z.norm()));
            }
            magnitude.push(mrow);
        }
        for (i, s) in gains.values.iter().enumerate() {
            channels.push(vec![Cell::Float(*f), Cell::from(i + 1), Cell::Float(*s)]);
        }
        separations.push(json!({ "omega_hz": f, "sigma2_over_sigma3": gains.separation }));
    }
    let summary = json!({ "kind": "respond", "n_sites": n, "channel_separation": separations });
    Ok((
        vec![
            Artifact::table(&long)?,
            Artifact::table(&magnitude)?,
            Artifact::table(&channels)?,
        ],
        summary,
    ))
}

fn spectrum(config: &Config, spec: &ChainSpec) -> Result<Produced, CliError> {
    let periodic = spec.with_boundary(Boundary::Periodic);
    let bands = bloch_bands(&periodic, config.spectrum.k_points).map_err(numerical)?;
    let mut cols = vec!["k_rad".to_string()];
    cols.extend(complex_columns("plus_hz"));
    cols.extend(complex_columns("minus_hz"));
    let mut band_table = Table::with_columns("bloch_bands", cols);
    for ((k, p), m) in bands.k.iter().zip(&bands.plus).zip(&bands.minus) {
        let mut row = vec![Cell::Float(*k)];
        row.extend(complex_cells(p / TAU));
        row.extend(complex_cells(m / TAU));
        band_table.push(row);
    }

    let mut eig_table = Table::with_columns(
        "eigenvalues",
        ["index".to_string()]
            .into_iter()
            .chain(complex_columns("rate_hz"))
            .collect(),
    );
    let m = build_dynamical_matrix(spec).map_err(numerical)?.matrix;
    for (i, s) in eigenvalues(&m.to_complex())
        .map_err(numerical)?
        .iter()
        .enumerate()
    {
        let mut row = vec![Cell::from(i + 1)];
        row.extend(complex_cells(s / TAU));
        eig_table.push(row);
    }
    let stability = stability_report(spec).map_err(numerical)?;
    let summary = json!({
        "kind": "spectrum",
        "boundary": spec.boundary,
        "growth_rate_hz": stability.growth_rate / TAU,
        "stable": stability.stable,
        "pbc_max_growth_hz": bands.max_growth() / TAU,
        "winding": winding_numbers(spec).ok(),
        "phase_label": classify_phase(spec).ok().map(|c| c.label.as_str()),
    });
    Ok((
        vec![Artifact::table(&band_table)?, Artifact::table(&eig_table)?],
        summary,
    ))
}

fn phase_diagram(config: &Config, spec: &ChainSpec) -> Result<Produced, CliError> {
    let pd = &config.phase_diagram;
    let phases = linear_grid(pd.phase_min, pd.phase_max, pd.phase_points);
    let ratios = linear_grid(pd.ratio_min, pd.ratio_max, pd.ratio_points);
    let base = spec.with_boundary(Boundary::Open);
    let map = end_to_end_gain_map(&base, &phases, &ratios).map_err(numerical)?;
    let mut table = Table::new(
        "gain_map",
        &["phase_rad", "coupling_ratio", "gain", "label"],
    );
    let mut counts = std::collections::BTreeMap::new();
    for p in &map.points {
        let label = p.label.map_or("boundary", |l| l.as_str());
        *counts.entry(label).or_insert(0usize) += 1;
        table.push(vec![
            Cell::Float(p.phase),
            Cell::Float(p.coupling_ratio),
            Cell::from(p.gain),
            Cell::from(label),
        ]);
    }
    let summary = json!({
        "kind": "phase-diagram",
        "n_sites": spec.n_sites,
        "hopping_over_damping": spec.hopping.norm() / spec.damping[0],
        "label_counts": counts,
    });
    Ok((vec![Artifact::table(&table)?], summary))
}

fn thermal(config: &Config, spec: &ChainSpec) -> Result<Produced, CliError> {
    let th = &config.thermal;
    let cov = steady_covariance(spec, &th.n_th).map_err(numerical)?;
    let closed_form = |site: usize| match (config.chain.gain, spec.n_sites) {
        (Some(g), 4) => closed_form_population(g, cov.bath[site], spec.boundary, site).ok(),
        _ => None,
    };
    let mut table = Table::new(
        "populations",
        &["site", "bath", "population", "enhancement", "closed_form"],
    );
    let (pops, enh) = (cov.populations(), cov.enhancement());
    for j in 0..spec.n_sites {
        table.push(vec![
            Cell::from(j + 1),
            Cell::Float(cov.bath[j]),
            Cell::Float(pops[j]),
            Cell::Float(enh[j]),
            Cell::from(closed_form(j)),
        ]);
    }
    let mut artifacts = vec![Artifact::table(&table)?];
    if th.spectrum_points > 0 {
        let freqs = linear_grid(
            -th.spectrum_span_hz,
            th.spectrum_span_hz,
            th.spectrum_points,
        );
        let omegas: Vec<f64> = freqs.iter().map(|f| TAU * f).collect();
        let s = thermal_spectrum(spec, &th.n_th, &omegas).map_err(numerical)?;
        let cols = ["omega_hz".to_string()]
            .into_iter()
            .chain((1..=spec.n_sites).map(|j| format!("psd_site{j}")))
            .collect();
        let mut t = Table::with_columns("thermal_spectrum", cols);
        for (i, f) in freqs.iter().enumerate() {
            t.push(
                std::iter::once(Cell::Float(*f))
                    .chain(s.psd.iter().map(|site| Cell::Float(site[i])))
                    .collect(),
            );
        }
        artifacts.push(Artifact::table(&t)?);
    }
    let summary = json!({ "kind": "thermal", "populations": pops });
    Ok((artifacts, summary))
}

fn sense(config: &Config, spec: &ChainSpec) -> Result<Produced, CliError> {
    let se = &config.sense;
    let gamma_hz = spec.damping[0] / TAU;
    let max = se.epsilon_max_hz.unwrap_or(0.5 * gamma_hz);
    let eps_hz = linear_grid(-max, max, se.epsilon_points);
    let eps: Vec<f64> = eps_hz.iter().map(|e| TAU * e).collect();
    let report = sensing_report(spec, &eps).map_err(numerical)?;
    let mut cols = vec!["epsilon_hz".to_string()];
    cols.extend(complex_columns("direct_s"));
    cols.extend(complex_columns("rank_one_s"));
    let mut table = Table::with_columns("sensing", cols);
    for ((e, d), r) in eps_hz.iter().zip(&report.direct).zip(&report.rank_one) {
        let mut row = vec![Cell::Float(*e)];
        row.extend(complex_cells(*d));
        row.extend(complex_cells(*r));
        table.push(row);
    }
    let mut artifacts = vec![Artifact::table(&table)?];
    let mut summary = json!({
        "kind": "sense",
        "gain": report.gain,
        "responsivity": report.responsivity,
        "max_path_deviation": report.max_path_deviation(),
    });
    if !se.lengths.is_empty() {
        let sweep = scaling_sweep(spec, &se.lengths).map_err(numerical)?;
        let mut t = Table::new("scaling", &["n_sites", "responsivity"]);
        for (n, r) in &sweep.points {
            t.push(vec![Cell::from(*n), Cell::Float(*r)]);
        }
        artifacts.push(Artifact::table(&t)?);
        summary["log_slope"] = json!(sweep.slope);
    }
    Ok((artifacts, summary))
}

fn simulate_scenario(config: &Config, spec: &ChainSpec, seed: u64) -> Result<Produced, CliError> {
    let sc = &config.simulate;
    let params = config.params()?;
    let n = spec.n_sites;
    let pick = |v: &Vec<f64>, j: usize| v.get(j).copied().unwrap_or(0.0);
    let initial: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(pick(&sc.initial_re, j), pick(&sc.initial_im, j)))
        .collect();
    let mode = match sc.mode {
        SimulateMode::Envelope => SimulationMode::Envelope,
        SimulateMode::Fullband => SimulationMode::Fullband,
    };
    let mut options = SimulationOptions::new(mode, sc.duration_s, initial)
        .samples(sc.samples)
        .nonlinearity(sc.nonlinearity);
    if let Some(h) = sc.step_s {
        options = options.step(h);
    }
    if let Some(strength) = sc.noise_strength {
        options = options.noise(NoiseDrive { strength, seed });
    }
    let sim = simulate(spec, &params, &options).map_err(numerical)?;

    let cols = ["t_s".to_string()]
        .into_iter()
        .chain(quadrature_labels(n))
        .collect();
    let mut table = Table::with_columns("trajectory", cols);
    for (t, s) in sim.quadratures.times.iter().zip(&sim.quadratures.states) {
        table.push(
            std::iter::once(Cell::Float(*t))
                .chain(s.iter().map(|v| Cell::Float(*v)))
                .collect(),
        );
    }
    let mut artifacts = vec![Artifact::table(&table)?];
    if let Some(raw) = &sim.raw {
        let cols = ["t_s".to_string()]
            .into_iter()
            .chain((1..=n).map(|j| format!("z{j}")))
            .chain((1..=n).map(|j| format!("dz{j}_per_s")))
            .collect();
        let mut t = Table::with_columns("displacement", cols);
        for (time, s) in raw.times.iter().zip(&raw.states) {
            t.push(
                std::iter::once(Cell::Float(*time))
                    .chain(s.iter().map(|v| Cell::Float(*v)))
                    .collect(),
            );
        }
        artifacts.push(Artifact::table(&t)?);
    }
    let mut summary = json!({
        "kind": "simulate",
        "mode": sc.mode,
        "diverged": sim.diverged(),
        "frame_frequencies_hz": sim.frame_frequencies.iter().map(|w| w / TAU).collect::<Vec<_>>(),
        "warnings": params.validity_warnings(),
    });
    if sc.saturation {
        let traj = sim.raw.as_ref().unwrap_or(&sim.quadratures);
        summary["saturation"] = match saturation_metrics(traj, &SaturationOptions::default()) {
            Ok(m) => json!({
                "settled": true,
                "amplitude": m.amplitude,
                "frequency_hz": m.frequency / TAU,
                "settling_time_s": m.settling_time,
                "drift": m.drift,
            }),
            Err(e) => json!({ "settled": false, "reason": e.to_string() }),
        };
    }
    Ok((artifacts, summary))
}

fn tones(config: &Config, spec: &ChainSpec) -> Result<Produced, CliError> {
    let params = config.params()?;
    let lo = if config.tones.lo_phases.is_empty() {
        vec![0.0; spec.n_sites]
    } else {
        config.tones.lo_phases.clone()
    };
    let schedule = compile_tones_with(spec, &params, &lo).map_err(numerical)?;
    let shifts: Vec<f64> = (0..spec.n_sites).map(|j| params.spring_shift(j)).collect();

    let mut table = Table::new(
        "tones",
        &[
            "pair",
            "kind",
            "link",
            "frequency_hz",
            "depth",
            "phase_rad",
            "target_phase_rad",
        ],
    );
    let mut worst: f64 = 0.0;
    for t in &schedule.tones {
        table.push(vec![
            Cell::Text(t.pair_label()),
            Cell::from(t.kind.as_str()),
            Cell::Text(format!("{}>{}", t.link.0 + 1, t.link.1 + 1)),
            Cell::Float(t.frequency / TAU),
            Cell::Float(t.depth),
            Cell::Float(t.phase),
            Cell::Float(t.target_phase),
        ]);
        let target = match t.kind {
            ToneKind::BeamSplitter => spec.hopping,
            ToneKind::TwoModeSqueezing => spec.squeezing,
        };
        let got = t
            .coupling(&shifts, &schedule.oscillators)
            .map_err(numerical)?;
        if target.norm() > 0.0 {
            worst = worst.max((got - target).norm() / target.norm());
        }
    }
    let active = schedule.tones.iter().filter(|t| t.depth > 0.0).count();
    let plan = plan_oscillators(spec.n_sites, active, config.tones.capacity).map_err(numerical)?;
    let summary = json!({
        "kind": "tones",
        "tones": schedule.tones.len(),
        "active_tones": active,
        "external_tones": plan.external_tones.len(),
        "round_trip_deviation": worst,
    });
    let artifacts = vec![
        Artifact::table(&table)?,
        Artifact::text("tones.txt", schedule_to_table(&schedule)),
        Artifact::json("oscillator_plan", &plan)?,
    ];
    Ok((artifacts, summary))
}
