use std::f64::consts::PI;

use bkc_core::chain::{Boundary, ChainSpec};
use bkc_core::numerics::eigenvalues;
use bkc_core::thermal::*;
use proptest::prelude::*;

fn ep4(g: f64, boundary: Boundary) -> ChainSpec {
    ChainSpec::exceptional(4, g, 1.0, boundary).unwrap()
}

/// Grid `omega = c tan(theta)`, dense near resonance with wide tails.
fn tangent_grid(c: f64, count: usize) -> Vec<f64> {
    let edge = PI / 2.0 - 2e-4;
    (0..count)
        .map(|i| c * (-edge + 2.0 * edge * i as f64 / (count - 1) as f64).tan())
        .collect()
}

#[test]
fn open_chain_reference_values() {
    let cov = steady_covariance(&ep4(1.0, Boundary::Open), &[3.0]).unwrap();
    let e = cov.enhancement();
    assert!((e[0] - 1.59375).abs() < 1e-12 && (e[1] - 1.6875).abs() < 1e-12);
    let e = steady_covariance(&ep4(2.0, Boundary::Open), &[3.0])
        .unwrap()
        .enhancement();
    assert!((e[0] - 15.0).abs() < 1e-10 && (e[1] - 6.0).abs() < 1e-10);
}

#[test]
fn periodic_reference_value() {
    let e = steady_covariance(&ep4(0.5f64.sqrt(), Boundary::Periodic), &[1.0])
        .unwrap()
        .enhancement();
    for v in e {
        assert!((v - 1.5).abs() < 1e-12);
    }
}

#[test]
fn lyapunov_matches_closed_forms() {
    let mut gains: Vec<(f64, Boundary)> = (1..=9)
        .flat_map(|i| {
            let g = i as f64 / 10.0;
            [(g, Boundary::Open), (g, Boundary::Periodic)]
        })
        .collect();
    gains.extend([(1.0, Boundary::Open), (2.0, Boundary::Open)]);
    for (g, b) in gains {
        let e = steady_covariance(&ep4(g, b), &[10.0])
            .unwrap()
            .enhancement();
        for (site, v) in e.iter().enumerate() {
            let want = closed_form_population(g, 1.0, b, site).unwrap();
            assert!(
                (v - want).abs() <= 1e-10 * want,
                "G={g} {b:?} site {site}: {v} vs {want}"
            );
        }
    }
}

#[test]
fn classical_limit_populations_follow_closed_forms() {
    let n_th = 1e6;
    let pops = steady_covariance(&ep4(0.8, Boundary::Open), &[n_th])
        .unwrap()
        .populations();
    for (site, n) in pops.iter().enumerate() {
        let want = closed_form_population(0.8, n_th, Boundary::Open, site).unwrap();
        assert!((n - want).abs() <= 1e-6 * want);
    }
}

#[test]
fn open_chain_mirror_symmetric() {
    let p = steady_covariance(&ep4(1.7, Boundary::Open), &[2.0])
        .unwrap()
        .populations();
    assert!((p[0] - p[3]).abs() < 1e-10 * p[0] && (p[1] - p[2]).abs() < 1e-10 * p[1]);
}

#[test]
fn periodic_instability_reported() {
    for g in [1.0, 1.2, 3.0] {
        assert!(
            matches!(
                steady_covariance(&ep4(g, Boundary::Periodic), &[1.0]),
                Err(ThermalError::Unstable { .. })
            ),
            "G={g}"
        );
        assert!(matches!(
            closed_form_population(g, 1.0, Boundary::Periodic, 0),
            Err(ThermalError::Unstable { .. })
        ));
    }
}

#[test]
fn periodic_closed_form_diverges_toward_unit_gain() {
    let a = closed_form_population(0.99, 1.0, Boundary::Periodic, 0).unwrap();
    let b = closed_form_population(0.999, 1.0, Boundary::Periodic, 0).unwrap();
    assert!(b > 5.0 * a && b > 100.0);
}

#[test]
fn per_site_baths() {
    let spec = ep4(0.0, Boundary::Open);
    let p = steady_covariance(&spec, &[1.0, 2.0, 3.0, 4.0])
        .unwrap()
        .populations();
    for (j, n) in p.iter().enumerate() {
        assert!((n - (j + 1) as f64).abs() < 1e-12);
    }
}

#[test]
fn uncoupled_spectrum_is_lorentzian() {
    let spec = ep4(0.0, Boundary::Open);
    let omegas = [-2.0, -0.5, 0.0, 0.5, 3.0];
    let s = thermal_spectrum(&spec, &[2.0], &omegas).unwrap();
    for (i, w) in omegas.iter().enumerate() {
        let want = 2.5 / (w * w + 0.25);
        assert!((s.psd[0][i] - want).abs() < 1e-12 * want);
    }
    // Half maximum at |omega| = gamma / 2.
    let half = thermal_spectrum(&spec, &[2.0], &[0.5]).unwrap().psd[0][0];
    assert!((half / s.psd[0][2] - 0.5).abs() < 1e-12);
}

#[test]
fn spectrum_integral_matches_covariance() {
    let omegas = tangent_grid(1.0, 20001);
    for b in [Boundary::Open, Boundary::Periodic] {
        let spec = ep4(0.8, b);
        let pops = steady_covariance(&spec, &[5.0]).unwrap().populations();
        let s = thermal_spectrum(&spec, &[5.0], &omegas).unwrap();
        for (j, n) in pops.iter().enumerate() {
            let want = 2.0 * PI * (n + 0.5);
            assert!(
                (s.integrated(j) - want).abs() <= 0.01 * want,
                "{b:?} site {j}: {} vs {want}",
                s.integrated(j)
            );
        }
    }
}

#[test]
fn periodic_spectrum_narrows_toward_unit_gain() {
    let omegas: Vec<f64> = (0..2001).map(|i| -1.0 + i as f64 * 1e-3).collect();
    let mut last_peak = 0.0;
    let mut last_width = f64::INFINITY;
    for g in [0.5, 0.8, 0.95] {
        let s = thermal_spectrum(&ep4(g, Boundary::Periodic), &[1.0], &omegas).unwrap();
        let psd = &s.psd[0];
        let peak = psd.iter().cloned().fold(0.0, f64::max);
        let width = psd.iter().filter(|&&p| p >= peak / 2.0).count() as f64 * 1e-3;
        assert!(peak > last_peak && width < last_width, "G={g}");
        last_peak = peak;
        last_width = width;
    }
}

#[test]
fn spectrum_of_unstable_chain_rejected() {
    assert!(matches!(
        thermal_spectrum(&ep4(1.5, Boundary::Periodic), &[1.0], &[0.0]),
        Err(ThermalError::Unstable { .. })
    ));
}

proptest! {
    #[test]
    fn covariance_is_physical(g in 0.0f64..3.0, n_th in 0.0f64..50.0, phi in 0.0f64..3.1, open in any::<bool>()) {
        let b = if open { Boundary::Open } else { Boundary::Periodic };
        let mu = g / 4.0;
        let spec = ChainSpec::common_phase(4, mu, mu, phi, 1.0, b).unwrap();
        let Ok(cov) = steady_covariance(&spec, &[n_th]) else { return Ok(()) };
        let scale = cov.sigma.max_abs();
        prop_assert!(cov.sigma.asymmetry() <= 1e-12 * scale);
        for i in 0..8 {
            prop_assert!(cov.sigma[(i, i)] >= 0.5 - 1e-10);
        }
        let min_eig = eigenvalues(&cov.sigma.to_complex()).unwrap().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig >= -1e-10 * scale);
    }

    #[test]
    fn populations_grow_with_gain(g in 0.0f64..0.98, dg in 0.001f64..0.02, open in any::<bool>()) {
        let b = if open { Boundary::Open } else { Boundary::Periodic };
        prop_assume!(open || g + dg < 0.99);
        let n1 = |g: f64| steady_covariance(&ep4(g, b), &[1.0]).unwrap().populations()[0];
        prop_assert!(n1(g + dg) >= n1(g));
    }

    #[test]
    fn periodic_populations_site_independent(g in 0.0f64..0.95, n in 2usize..7) {
        let spec = ChainSpec::exceptional(n, g, 1.0, Boundary::Periodic).unwrap();
        let p = steady_covariance(&spec, &[3.0]).unwrap().populations();
        for v in &p {
            prop_assert!((v - p[0]).abs() <= 1e-10 * p[0]);
        }
    }
}
