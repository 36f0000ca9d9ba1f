use std::f64::consts::{FRAC_PI_2, PI};

use bkc_core::chain::{bloch_matrix, quadrature_to_mode, Boundary, ChainSpec};
use bkc_core::numerics::{invert, Complex64, ComplexMatrix};
use bkc_core::response::*;
use bkc_core::spectra::PhaseLabel;
use proptest::prelude::*;

fn ep(n: usize, g: f64, gamma: f64) -> ChainSpec {
    ChainSpec::exceptional(n, g, gamma, Boundary::Open).unwrap()
}

fn rel_entry_error(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let scale = b.max_abs().max(1e-300);
    (a - b).max_abs() / scale
}

#[test]
fn single_site_response_is_two_over_gamma() {
    let s = ChainSpec::new(
        1,
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        vec![0.8],
        vec![0.0],
        Boundary::Open,
    )
    .unwrap();
    let chi = susceptibility(&s, 0.0).unwrap();
    let mag = chi.magnitude();
    assert!((mag[(0, 0)] - 2.5).abs() < 1e-15 && (mag[(1, 1)] - 2.5).abs() < 1e-15);
    assert_eq!(mag[(0, 1)], 0.0);
}

#[test]
fn inverse_residual_is_small() {
    let s = ChainSpec::common_phase(5, 0.7, 0.4, 1.1, 0.6, Boundary::Periodic)
        .unwrap()
        .with_detuning(2, 0.2)
        .unwrap();
    for omega in [0.0, 0.3, -1.7] {
        assert!(
            susceptibility(&s, omega)
                .unwrap()
                .inverse_residual()
                .unwrap()
                < 1e-10
        );
    }
}

#[test]
fn undamped_resonance_is_reported() {
    let s = ChainSpec::new(
        2,
        Complex64::new(0.5, 0.0),
        Complex64::new(0.0, 0.0),
        vec![0.0; 2],
        vec![0.0; 2],
        Boundary::Open,
    )
    .unwrap();
    // Eigenvalues of M are +/- 0.5 i, i.e. resonant at omega = 0.5.
    assert!(matches!(
        susceptibility(&s, 0.5),
        Err(ResponseError::Resonance { .. })
    ));
}

#[test]
fn quarter_phase_blocks_decouple() {
    let s = ChainSpec::common_phase(4, 0.9, 0.5, FRAC_PI_2, 1.0, Boundary::Open).unwrap();
    let chi = susceptibility(&s, 0.4).unwrap();
    let norm = chi.chi.max_abs();
    assert!(chi.xp().max_abs() <= 1e-12 * norm && chi.px().max_abs() <= 1e-12 * norm);
}

#[test]
fn end_to_end_power_law_at_three_quarter_gain() {
    let gamma = 1.0;
    let chi = susceptibility(&ep(4, 0.75, gamma), 0.0).unwrap();
    let t = chi.transfer(Quadrature::X(0), Quadrature::X(3)).norm();
    assert!((t - 2.0 * 0.421875).abs() < 1e-12);
}

#[test]
fn oracle_examples() {
    let z = resonant_susceptibility_oracle(3, 0.0, 2.0).unwrap();
    assert!(
        (&z.chi - &ComplexMatrix::identity(6).scale(Complex64::new(-1.0, 0.0))).max_abs() == 0.0
    );
    let two = resonant_susceptibility_oracle(2, 1.0, 1.0).unwrap();
    let want = [[1.0, 0.0], [1.0, 1.0]];
    for r in 0..2 {
        for c in 0..2 {
            assert_eq!(two.xx()[(r, c)], Complex64::new(-2.0 * want[r][c], 0.0));
        }
    }
    assert!(resonant_susceptibility_oracle(3, -1.0, 1.0).is_err());
    assert!(resonant_susceptibility_oracle(3, 1.0, 0.0).is_err());
}

#[test]
fn oracle_matches_solver_over_ep_family() {
    for n in 1..=8 {
        for &g in &[0.0, 0.3, 0.75, 1.0, 1.37, 2.0, 3.1, 4.0] {
            let gamma = 0.7;
            let direct = susceptibility(&ep(n, g, gamma), 0.0).unwrap();
            let oracle = resonant_susceptibility_oracle(n, g, gamma).unwrap();
            assert!(
                rel_entry_error(&direct.chi, &oracle.chi) <= 1e-10,
                "N={n} G={g}"
            );
        }
    }
}

#[test]
fn gain_chirality_at_quarter_phase() {
    let (g, gamma) = (1.6, 0.5);
    let chi = susceptibility(&ep(5, g, gamma), 0.0).unwrap();
    let norm = chi.chi.max_abs();
    for j in 0..4 {
        let fwd = chi.transfer(Quadrature::X(j), Quadrature::X(j + 1)).norm();
        let bwd_p = chi.transfer(Quadrature::P(j + 1), Quadrature::P(j)).norm();
        assert!((fwd - g * 2.0 / gamma).abs() < 1e-10 * fwd);
        assert!((bwd_p - g * 2.0 / gamma).abs() < 1e-10 * fwd);
        assert!(chi.transfer(Quadrature::X(j + 1), Quadrature::X(j)).norm() <= 1e-12 * norm);
    }
}

#[test]
fn reversal_with_quadrature_swap_preserves_magnitudes() {
    let n = 4;
    let chi = susceptibility(&ep(n, 1.37, 1.0), 0.0).unwrap();
    let mag = chi.magnitude();
    let map = |i: usize| {
        if i < n {
            n + (n - 1 - i)
        } else {
            n - 1 - (i - n)
        }
    };
    for r in 0..2 * n {
        for c in 0..2 * n {
            assert!((mag[(r, c)] - mag[(map(r), map(c))]).abs() <= 1e-10 * mag.max_abs());
        }
    }
}

#[test]
fn magnitude_squared_is_square_of_magnitude() {
    let chi = susceptibility(&ep(3, 1.2, 1.0), 0.0).unwrap();
    let (m, m2) = (chi.magnitude(), chi.magnitude_squared());
    for r in 0..6 {
        for c in 0..6 {
            assert!((m[(r, c)].powi(2) - m2[(r, c)]).abs() <= 1e-12 * m2.max_abs());
        }
    }
}

#[test]
fn periodic_response_is_block_diagonal_in_momentum() {
    let n = 6;
    let s = ChainSpec::common_phase(n, 0.8, 0.3, 0.9, 1.0, Boundary::Periodic).unwrap();
    let chi = susceptibility(&s, 0.0).unwrap();
    let t = quadrature_to_mode(n);
    let mode = t.matmul(&chi.chi).matmul(&t.adjoint());
    let norm = 1.0 / (n as f64).sqrt();
    let f = ComplexMatrix::from_fn(2 * n, 2 * n, |row, col| {
        if row % 2 != col / n {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(norm, 2.0 * PI * ((row / 2) * (col % n)) as f64 / n as f64)
    });
    let momentum = f.matmul(&mode).matmul(&f.adjoint());
    for q in 0..n {
        let k = 2.0 * PI * q as f64 / n as f64;
        // Mode-basis rate generator is -i times the Bloch matrix, so chi(0) = i M_alpha^-1.
        let want = invert(&bloch_matrix(&s, k).unwrap())
            .unwrap()
            .scale(Complex64::new(0.0, 1.0));
        assert!(
            (&momentum.submatrix(2 * q, 2 * q, 2, 2) - &want).max_abs() < 1e-10,
            "q={q}"
        );
        for qp in (0..n).filter(|&qp| qp != q) {
            assert!(momentum.submatrix(2 * q, 2 * qp, 2, 2).max_abs() < 1e-10);
        }
    }
}

#[test]
fn channels_of_uncoupled_chain_are_flat() {
    let gains = channel_gains(&susceptibility(&ep(4, 0.0, 0.5), 0.0).unwrap()).unwrap();
    assert_eq!(gains.values.len(), 8);
    assert!(gains.values.iter().all(|s| (s - 4.0).abs() < 1e-12));
}

#[test]
fn amplifying_channels_pair_and_separate() {
    let mut last = (0.0, 0.0);
    for &g in &[0.5, 1.0, 1.5, 2.0, 3.0] {
        let gains = channel_gains(&resonant_susceptibility_oracle(4, g, 1.0).unwrap()).unwrap();
        let v = &gains.values;
        assert!((v[0] - v[1]).abs() <= 1e-9 * v[0], "G={g}");
        let sep = gains.separation.unwrap();
        assert!(v[0] > last.0 && sep > last.1, "G={g}");
        last = (v[0], sep);
    }
}

#[test]
fn gain_map_reference_points() {
    let gamma = 1.0;
    let base =
        ChainSpec::common_phase(4, 5.0 / 16.0, 0.0, FRAC_PI_2, gamma, Boundary::Open).unwrap();
    let map = end_to_end_gain_map(&base, &[FRAC_PI_2, 0.0, 1.0], &[1.0, 0.0, 0.5]).unwrap();
    let p = map.at(0, 0);
    assert!((p.gain.unwrap() - 2.0 * 1.953125).abs() < 1e-10);
    assert_eq!(p.label, Some(PhaseLabel::NontrivialWinding));
    for i in 0..3 {
        assert!(map.at(i, 1).gain.unwrap() <= 2.0 / gamma + 1e-12);
    }
    assert!(map.at(1, 0).gain.unwrap() <= 1e-12);
    assert_eq!(map.at(1, 0).label, Some(PhaseLabel::PointGapClosed));
}

#[test]
fn gain_map_flags_boundary_and_unstable_points() {
    let base = ChainSpec::common_phase(4, 5.0 / 16.0, 0.0, FRAC_PI_2, 1.0, Boundary::Open).unwrap();
    let map = end_to_end_gain_map(&base, &[FRAC_PI_2], &[0.8, 1.9]).unwrap();
    assert_eq!(map.at(0, 0).label, None);
    let far = map.at(0, 1);
    assert_eq!(far.label, Some(PhaseLabel::ObcUnstable));
    assert!(far.gain.is_none());
}

#[test]
fn gain_map_rejects_periodic_base() {
    let base = ChainSpec::common_phase(4, 0.3, 0.0, 0.0, 1.0, Boundary::Periodic).unwrap();
    assert!(end_to_end_gain_map(&base, &[0.0], &[1.0]).is_err());
}

#[test]
fn gain_map_default_axes_cover_figure_extent() {
    let (phases, ratios) = default_gain_map_axes();
    assert_eq!((phases.len(), ratios.len()), (101, 101));
    assert!((phases[100] - PI).abs() < 1e-15 && (ratios[100] - 2.0).abs() < 1e-15);
}

#[test]
fn nonreciprocity_at_zero_phase() {
    for boundary in [Boundary::Open, Boundary::Periodic] {
        let s = ChainSpec::common_phase(4, 0.4, 0.4, 0.0, 1.0, boundary).unwrap();
        let r = nonreciprocity_report(&s).unwrap();
        assert!(r.min_neighbor_x_to_p > 0.1, "{boundary:?}");
        assert!(r.max_p_to_x <= 1e-12 * r.norm);
        assert!(r.max_long_range_x_to_p <= 1e-12 * r.norm);
        assert!(r.boundary_independent && !r.reciprocal);
    }
}

#[test]
fn uncoupled_chain_is_trivially_reciprocal() {
    let s = ChainSpec::common_phase(4, 0.0, 0.0, 0.0, 1.0, Boundary::Open).unwrap();
    assert!(nonreciprocity_report(&s).unwrap().reciprocal);
}

#[test]
fn nonreciprocity_preconditions() {
    assert!(nonreciprocity_report(
        &ChainSpec::common_phase(4, 0.4, 0.3, 0.0, 1.0, Boundary::Open).unwrap()
    )
    .is_err());
    assert!(nonreciprocity_report(
        &ChainSpec::common_phase(4, 0.4, 0.4, 0.5, 1.0, Boundary::Open).unwrap()
    )
    .is_err());
}

proptest! {
    #[test]
    fn solver_matches_oracle(n in 1usize..=8, g in 0.0f64..4.0, gamma in 0.1f64..5.0) {
        let direct = susceptibility(&ep(n, g, gamma), 0.0).unwrap();
        let oracle = resonant_susceptibility_oracle(n, g, gamma).unwrap();
        prop_assert!(rel_entry_error(&direct.chi, &oracle.chi) <= 1e-10);
    }

    #[test]
    fn passive_chain_never_amplifies_end_to_end(phi in 0.0f64..PI, j in 0.05f64..1.0) {
        let s = ChainSpec::common_phase(4, j, 0.0, phi, 1.0, Boundary::Open).unwrap();
        let chi = susceptibility(&s, 0.0).unwrap();
        prop_assert!(chi.transfer(Quadrature::X(0), Quadrature::X(3)).norm() <= 2.0 + 1e-12);
    }
}
