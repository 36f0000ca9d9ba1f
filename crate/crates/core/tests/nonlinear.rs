use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};

use bkc_core::chain::{build_dynamical_matrix, Boundary, ChainSpec};
use bkc_core::nonlinear::{
    build_rwa_catalog, cavity_response_derivatives, duffing_coefficient, nl_frequency_shift,
    saturation_metrics, simulate, DegeneracyClass, Monomial, NoiseDrive, NonlinearError,
    OptomechanicalParams, SaturationOptions, SimulationMode, SimulationOptions,
};
use bkc_core::numerics::{Complex64, RealMatrix};
use bkc_core::spectra::stability_report;
use bkc_core::tones::{compile_tones, LocalOscillator, ToneSchedule};

/// `exp(A t) y` by scaling and squaring of a Taylor series.
fn expm_apply(a: &RealMatrix, t: f64, y: &[f64]) -> Vec<f64> {
    let n = a.rows();
    let norm = a.norm_inf() * t;
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let h = t / 2f64.powi(squarings);
    let mut term = RealMatrix::identity(n);
    let mut sum = RealMatrix::identity(n);
    let ah = a.scale(h);
    for k in 1..=20 {
        term = term.matmul(&ah).scale(1.0 / k as f64);
        sum = RealMatrix::from_fn(n, n, |i, j| sum[(i, j)] + term[(i, j)]);
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum.matvec(y)
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}

fn max_traj_dev(a: &bkc_core::numerics::Trajectory, b: &bkc_core::numerics::Trajectory) -> f64 {
    let scale = b
        .states
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    a.states
        .iter()
        .zip(&b.states)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
        / scale
}

/// Two incommensurate modes with a beam-splitter link of strength `j` and no damping.
fn bs_pair(j: f64, phase: f64) -> (ChainSpec, OptomechanicalParams) {
    let spec = ChainSpec::new(
        2,
        Complex64::from_polar(j, phase),
        Complex64::new(0.0, 0.0),
        vec![0.0; 2],
        vec![0.0; 2],
        Boundary::Open,
    )
    .unwrap();
    let params =
        OptomechanicalParams::from_spring_shift(vec![1.0, SQRT_2], 20.0 * j, 0.01, 100.0).unwrap();
    (spec, params)
}

#[test]
fn duffing_coefficient_matches_third_derivative_form() {
    let (w, dw) = (TAU * 4e6, TAU * 1e4);
    let kappa = TAU * 1e9;
    let p = OptomechanicalParams::from_spring_shift(vec![w], dw, 0.01, kappa).unwrap();
    assert!((p.spring_shift(0) / dw - 1.0).abs() < 1e-12);
    let alpha = duffing_coefficient(&p, 0).unwrap();
    let expected = -6.0 * w * dw * 1e-4;
    assert!((alpha / expected - 1.0).abs() < 1e-12);

    // alpha = -8 omega g0^4 n_max h'''(u0) / (3 kappa^3), with h''' from a
    // central difference of h''.
    let u0 = p.operating_point();
    let h = 1e-5;
    let h3 = (cavity_response_derivatives(u0 + h)[2] - cavity_response_derivatives(u0 - h)[2])
        / (2.0 * h);
    let g0 = p.vacuum_couplings[0];
    let from_h3 = -8.0 * w * g0.powi(4) * p.max_photons * h3 / (3.0 * kappa.powi(3));
    assert!((alpha / from_h3 - 1.0).abs() < 1e-8, "{alpha} vs {from_h3}");
    assert!((h3 - 81.0 / (16.0 * 3f64.sqrt())).abs() < 1e-8);
}

#[test]
fn duffing_coefficient_edge_cases() {
    let p = OptomechanicalParams::new(vec![1.0], vec![0.0], 10.0, 5.0).unwrap();
    assert_eq!(duffing_coefficient(&p, 0).unwrap(), 0.0);

    let q = OptomechanicalParams::new(vec![1.0], vec![0.2], 10.0, 5.0).unwrap();
    let flipped = q.clone().with_detuning(-q.detuning);
    let (a, b) = (
        duffing_coefficient(&q, 0).unwrap(),
        duffing_coefficient(&flipped, 0).unwrap(),
    );
    assert!(a < 0.0);
    assert!((a + b).abs() < 1e-15 * a.abs());
    assert!(matches!(
        duffing_coefficient(&q, 3),
        Err(NonlinearError::InvalidParams(_))
    ));
}

#[test]
fn small_amplitude_frequency_shift() {
    let p = OptomechanicalParams::from_spring_shift(vec![TAU * 4e6], TAU * 1e4, 0.01, TAU * 1e9)
        .unwrap();
    assert_eq!(nl_frequency_shift(&p, 0, 0.0), 0.0);
    let shift = nl_frequency_shift(&p, 0, 10.0);
    assert!(
        (shift / (-TAU * 225.0) - 1.0).abs() < 1e-12,
        "{}",
        shift / TAU
    );
    // Harmonic balance: mu^2 = omega^2 + 3 alpha A^2 / 4.
    let alpha = duffing_coefficient(&p, 0).unwrap();
    let w = p.frequencies[0];
    let mu = (w * w + 0.75 * alpha * 100.0).sqrt();
    assert!(((mu - w) / shift - 1.0).abs() < 1e-3);
}

/// Free oscillation of a single undamped mode: the spectral peak of `z`
/// moves by the harmonic-balance shift and the amplitude stays at `A`.
#[test]
fn duffing_oscillation_frequency_and_amplitude() {
    let w = 1.0;
    let p = OptomechanicalParams::from_spring_shift(vec![w], 1e-3, 0.01, 100.0).unwrap();
    let spec = ChainSpec::new(
        1,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        vec![0.0],
        vec![0.0],
        Boundary::Open,
    )
    .unwrap();
    let amplitude = 10.0;
    let opts = SimulationOptions::new(
        SimulationMode::Fullband,
        20_000.0,
        vec![Complex64::new(amplitude / 2.0, 0.0)],
    )
    .samples(80_000);
    let sim = simulate(&spec, &p, &opts).unwrap();
    let raw = sim.raw.as_ref().unwrap();
    let m = saturation_metrics(raw, &SaturationOptions::default().components(vec![0])).unwrap();
    let measured = m.frequency - p.shifted_frequency(0);
    let predicted = nl_frequency_shift(&p, 0, amplitude);
    assert!(
        (measured / predicted - 1.0).abs() < 0.05,
        "measured {measured:e}, predicted {predicted:e}"
    );
    assert!((m.amplitude * SQRT_2 / amplitude - 1.0).abs() < 0.05);
}

#[test]
fn linear_envelope_and_fullband_match_matrix_exponential() {
    let (spec, params) = bs_pair(1e-5, 0.7);
    let spec = ChainSpec {
        damping: vec![4e-6, 6e-6],
        ..spec
    };
    let a0 = vec![Complex64::new(1.0, 0.3), Complex64::new(-0.2, 0.5)];
    let t = 1.2e5;
    let m = build_dynamical_matrix(&spec).unwrap().matrix;
    let y0: Vec<f64> = a0
        .iter()
        .map(|a| SQRT_2 * a.re)
        .chain(a0.iter().map(|a| SQRT_2 * a.im))
        .collect();
    let exact = expm_apply(&m, t, &y0);
    for mode in [SimulationMode::Envelope, SimulationMode::Fullband] {
        let opts = SimulationOptions::new(mode, t, a0.clone())
            .nonlinearity(0.0)
            .samples(10);
        let sim = simulate(&spec, &params, &opts).unwrap();
        let dev = rel_dev(sim.quadratures.last().unwrap(), &exact);
        assert!(dev < 1e-4, "{mode:?}: {dev:e}");
    }
}

#[test]
fn beam_splitter_exchange_at_twice_the_coupling() {
    let j = 2e-4;
    let (spec, params) = bs_pair(j, FRAC_PI_2);
    let t_end = TAU / (2.0 * j);
    let a0 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let env = simulate(
        &spec,
        &params,
        &SimulationOptions::new(SimulationMode::Envelope, t_end, a0.clone())
            .nonlinearity(0.0)
            .samples(200),
    )
    .unwrap();
    for (i, &t) in env.quadratures.times.iter().enumerate() {
        let a = env.envelopes(i);
        let expected = (j * t).sin().powi(2);
        assert!((a[1].norm_sqr() - expected).abs() < 1e-8, "t = {t}");
        assert!((a[0].norm_sqr() + a[1].norm_sqr() - 1.0).abs() < 1e-8);
    }
    let full = simulate(
        &spec,
        &params,
        &SimulationOptions::new(SimulationMode::Fullband, t_end, a0)
            .nonlinearity(0.0)
            .samples(200),
    )
    .unwrap();
    let m = build_dynamical_matrix(&spec).unwrap().matrix;
    let y0 = [SQRT_2, 0.0, 0.0, 0.0];
    for (t, s) in full.quadratures.times.iter().zip(&full.quadratures.states) {
        let exact = expm_apply(&m, *t, &y0);
        let dev = s
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / SQRT_2;
        assert!(dev < 1e-3, "t = {t}: {dev:e}");
    }
}

#[test]
fn envelope_tracks_fullband_with_nonlinearity() {
    let j = 1e-3;
    let (spec, params) = bs_pair(j, 0.3);
    let spec = ChainSpec {
        damping: vec![2e-4; 2],
        ..spec
    };
    let a0 = vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.75)];
    let t_end = 2.0 / j;
    let run = |mode| {
        simulate(
            &spec,
            &params,
            &SimulationOptions::new(mode, t_end, a0.clone()).samples(200),
        )
        .unwrap()
        .quadratures
    };
    let (env, full) = (run(SimulationMode::Envelope), run(SimulationMode::Fullband));
    assert_eq!(env.times.len(), full.times.len());
    assert!(env
        .times
        .iter()
        .zip(&full.times)
        .all(|(a, b)| (a - b).abs() < 1e-9 * t_end));
    let dev = max_traj_dev(&full, &env);
    assert!(dev < 1e-2, "{dev:e}");
}

#[test]
fn undamped_linear_fullband_conserves_energy() {
    let spec = ChainSpec::new(
        2,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        vec![0.0; 2],
        vec![0.0; 2],
        Boundary::Open,
    )
    .unwrap();
    let params =
        OptomechanicalParams::from_spring_shift(vec![1.0, SQRT_2], 1e-2, 0.01, 100.0).unwrap();
    let opts = SimulationOptions::new(
        SimulationMode::Fullband,
        500.0,
        vec![Complex64::new(1.0, 0.2), Complex64::new(0.4, -0.7)],
    )
    .nonlinearity(0.0)
    .samples(500);
    let sim = simulate(&spec, &params, &opts).unwrap();
    let w: Vec<f64> = (0..2).map(|j| params.shifted_frequency(j)).collect();
    let energy = |s: &Vec<f64>| {
        (0..2)
            .map(|j| 0.5 * (s[2 + j] * s[2 + j] + w[j] * w[j] * s[j] * s[j]))
            .sum::<f64>()
    };
    let raw = sim.raw.unwrap();
    let e0 = energy(&raw.states[0]);
    let drift = raw
        .states
        .iter()
        .map(|s| (energy(s) / e0 - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-12, "{drift:e}");
}

fn pbc_chain(gain: f64, gamma: f64) -> (ChainSpec, OptomechanicalParams) {
    let spec = ChainSpec::exceptional(4, gain, gamma, Boundary::Periodic).unwrap();
    let freqs = vec![1.0, SQRT_2, 3f64.sqrt(), 5f64.sqrt()];
    let params = OptomechanicalParams::from_spring_shift(freqs, 10.0 * gamma, 0.01, 100.0).unwrap();
    (spec, params)
}

fn seed_amplitudes() -> Vec<Complex64> {
    (0..4)
        .map(|j| Complex64::from_polar(0.01, 0.7 * j as f64))
        .collect()
}

#[test]
fn periodic_chain_saturates_with_softening_nonlinearity() {
    let gamma = 1e-3;
    let (spec, params) = pbc_chain(1.2, gamma);
    assert!(duffing_coefficient(&params, 0).unwrap() < 0.0);
    assert!(stability_report(&spec).unwrap().growth_rate > 0.0);

    let duration = 1500.0 / gamma;
    let linear = simulate(
        &spec,
        &params,
        &SimulationOptions::new(SimulationMode::Envelope, duration, seed_amplitudes())
            .nonlinearity(0.0),
    )
    .unwrap();
    assert!(linear.diverged());

    let sim = simulate(
        &spec,
        &params,
        &SimulationOptions::new(SimulationMode::Envelope, duration, seed_amplitudes())
            .samples(4000),
    )
    .unwrap();
    assert!(!sim.diverged());
    let m = saturation_metrics(&sim.quadratures, &SaturationOptions::default()).unwrap();
    assert!(m.amplitude > 1.0 && m.amplitude < 1e3, "{m:?}");
}

#[test]
fn saturation_amplitude_decreases_with_nonlinearity() {
    let gamma = 1e-3;
    let (spec, params) = pbc_chain(1.2, gamma);
    let duration = 1500.0 / gamma;
    let amps: Vec<f64> = [0.5, 1.0, 2.0, 5.0]
        .iter()
        .map(|&s| {
            let opts =
                SimulationOptions::new(SimulationMode::Envelope, duration, seed_amplitudes())
                    .nonlinearity(s)
                    .samples(4000);
            let sim = simulate(&spec, &params, &opts).unwrap();
            saturation_metrics(&sim.quadratures, &SaturationOptions::default())
                .unwrap()
                .amplitude
        })
        .collect();
    assert!(amps.windows(2).all(|w| w[1] < w[0]), "{amps:?}");
    // Amplitude scales as |alpha|^{-1/2} for a Kerr-limited cycle.
    assert!(
        (amps[0] / amps[3] - 10f64.sqrt()).abs() < 0.05 * 10f64.sqrt(),
        "{amps:?}"
    );
}

#[test]
fn open_chain_destabilized_by_nonlinear_detuning() {
    let gamma = 1e-3;
    let spec = ChainSpec::exceptional(4, 4.0, gamma, Boundary::Open).unwrap();
    let freqs = vec![1.0, SQRT_2, 3f64.sqrt(), 5f64.sqrt()];
    let params = OptomechanicalParams::from_spring_shift(freqs, 10.0 * gamma, 0.01, 100.0).unwrap();
    assert!((stability_report(&spec).unwrap().growth_rate + gamma / 2.0).abs() < 1e-9);

    let a0: Vec<Complex64> = (0..4)
        .map(|j| Complex64::from_polar(3.0, 0.7 * j as f64))
        .collect();
    let duration = 200.0 / gamma;
    let run = |scale: f64| {
        let opts = SimulationOptions::new(SimulationMode::Envelope, duration, a0.clone())
            .nonlinearity(scale)
            .samples(2000);
        simulate(&spec, &params, &opts).unwrap()
    };
    let linear = run(0.0);
    let nonlinear = run(1.0);
    let norm = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lin_end = norm(linear.quadratures.last().unwrap());
    let nl_end = norm(nonlinear.quadratures.last().unwrap());
    assert!(lin_end < 1e-6 * norm(&linear.quadratures.states[0]));
    assert!(
        nl_end > 1e3 * lin_end,
        "linear {lin_end:e}, nonlinear {nl_end:e}"
    );
}

#[test]
fn single_mode_catalog_is_self_kerr() {
    let params = OptomechanicalParams::from_spring_shift(vec![1.0], 1e-2, 0.01, 100.0).unwrap();
    let spec = ChainSpec::new(
        1,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        vec![0.0],
        vec![0.0],
        Boundary::Open,
    )
    .unwrap();
    let schedule = compile_tones(&spec, &params).unwrap();
    let cat = build_rwa_catalog(&params, &schedule).unwrap();
    let alpha = params.quartic_coefficient([0; 4]);
    assert_eq!(cat.terms.len(), 3);
    assert!(cat
        .terms
        .iter()
        .all(|t| t.class == DegeneracyClass::SelfKerr && t.tone.is_none()));
    let coeff = |c: usize| {
        cat.terms
            .iter()
            .find(|t| {
                t.monomial
                    == Monomial {
                        creation: vec![0; c],
                        annihilation: vec![0; c],
                    }
            })
            .map(|t| t.coefficient)
            .unwrap()
    };
    assert!((coeff(2).re - 6.0 / 16.0 * alpha).abs() < 1e-15 * alpha.abs());
    assert!((coeff(1).re - 12.0 / 16.0 * alpha).abs() < 1e-15 * alpha.abs());
    assert!((coeff(0).re - 3.0 / 16.0 * alpha).abs() < 1e-15 * alpha.abs());
}

#[test]
fn beam_splitter_tone_gives_difference_corrections_only() {
    let (spec, params) = bs_pair(1e-3, 0.0);
    let schedule = compile_tones(&spec, &params).unwrap();
    let cat = build_rwa_catalog(&params, &schedule).unwrap();
    let bs = schedule.tones.iter().position(|t| t.depth > 0.0).unwrap();
    let class2: Vec<_> = cat.class(DegeneracyClass::PopulationAssisted).collect();
    assert!(!class2.is_empty());
    for t in &class2 {
        assert_eq!(t.tone.map(|k| k.0), Some(bs));
        // Beam-splitter monomials conserve excitation number.
        assert_eq!(
            t.monomial.creation.len(),
            t.monomial.annihilation.len(),
            "{}",
            t.monomial
        );
    }
    assert!(cat
        .terms
        .iter()
        .all(|t| t.tone.is_none() || t.tone.unwrap().0 == bs));
    assert!(cat.count(DegeneracyClass::CrossKerr) > 0);
}

#[test]
fn four_distinct_modes_have_no_quartic_exchange() {
    let (spec, params) = pbc_chain(1.2, 1e-3);
    let schedule = compile_tones(&spec, &params).unwrap();
    let cat = build_rwa_catalog(&params, &schedule).unwrap();
    assert!(cat.terms.iter().all(|t| {
        let mut m = t.modes.to_vec();
        m.dedup();
        m.len() < 4
    }));
    for class in [
        DegeneracyClass::SelfKerr,
        DegeneracyClass::PopulationAssisted,
        DegeneracyClass::CrossKerr,
        DegeneracyClass::ToneAssisted,
    ] {
        assert!(cat.count(class) > 0, "{class:?}");
    }
}

#[test]
fn commensurate_frequencies_rejected() {
    let params =
        OptomechanicalParams::from_spring_shift(vec![1.0, 2.0, 3.0], 0.0, 0.01, 100.0).unwrap();
    let nu = (0..3).map(|j| params.shifted_frequency(j));
    let oscillators = nu
        .enumerate()
        .map(|(mode, frequency)| LocalOscillator {
            mode,
            frequency,
            phase: 0.0,
        })
        .collect();
    let schedule = ToneSchedule {
        tones: Vec::new(),
        oscillators,
    };
    match build_rwa_catalog(&params, &schedule) {
        Err(NonlinearError::Commensurate { relation, mismatch }) => {
            let nu = &schedule.frame_frequencies();
            let s: f64 = relation.iter().zip(nu).map(|(n, w)| *n as f64 * w).sum();
            assert!(s.abs() <= mismatch + 1e-15 && relation.iter().any(|n| *n != 0));
        }
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn saturation_metrics_edge_cases() {
    let spec = ChainSpec::new(
        1,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        vec![0.1],
        vec![0.0],
        Boundary::Open,
    )
    .unwrap();
    let params = OptomechanicalParams::from_spring_shift(vec![1.0], 1e-2, 0.01, 100.0).unwrap();
    let opts = SimulationOptions::new(
        SimulationMode::Envelope,
        800.0,
        vec![Complex64::new(1.0, 0.0)],
    )
    .nonlinearity(0.0);
    let decay = simulate(&spec, &params, &opts).unwrap();
    let m = saturation_metrics(&decay.quadratures, &SaturationOptions::default()).unwrap();
    assert!(m.amplitude < 1e-12);

    let growing = ChainSpec {
        damping: vec![-0.1],
        ..spec.clone()
    };
    assert!(simulate(&growing, &params, &opts).is_err());
    let unstable = ChainSpec::exceptional(3, 3.0, 0.1, Boundary::Periodic).unwrap();
    let params3 =
        OptomechanicalParams::from_spring_shift(vec![1.0, SQRT_2, 3f64.sqrt()], 1.0, 0.01, 100.0)
            .unwrap();
    let div = simulate(
        &unstable,
        &params3,
        &SimulationOptions::new(
            SimulationMode::Envelope,
            2000.0,
            vec![Complex64::new(1.0, 0.0); 3],
        )
        .nonlinearity(0.0),
    )
    .unwrap();
    assert!(div.diverged());
    assert!(matches!(
        saturation_metrics(&div.quadratures, &SaturationOptions::default()),
        Err(NonlinearError::NotSettled { .. })
    ));
}

#[test]
fn noise_is_reproducible_per_seed() {
    let gamma = 1e-3;
    let spec = ChainSpec::exceptional(2, 0.5, gamma, Boundary::Open).unwrap();
    let params =
        OptomechanicalParams::from_spring_shift(vec![1.0, SQRT_2], 10.0 * gamma, 0.01, 100.0)
            .unwrap();
    let run = |seed| {
        let opts = SimulationOptions::new(
            SimulationMode::Envelope,
            2000.0,
            vec![Complex64::new(0.0, 0.0); 2],
        )
        .noise(NoiseDrive {
            strength: 1e-3,
            seed,
        })
        .samples(50);
        simulate(&spec, &params, &opts).unwrap().quadratures
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn fullband_rejects_coarse_steps() {
    let (spec, params) = bs_pair(1e-3, 0.0);
    let opts = SimulationOptions::new(
        SimulationMode::Fullband,
        10.0,
        vec![Complex64::new(1.0, 0.0); 2],
    )
    .step(0.5);
    assert!(matches!(
        simulate(&spec, &params, &opts),
        Err(NonlinearError::StepTooCoarse { .. })
    ));
}
