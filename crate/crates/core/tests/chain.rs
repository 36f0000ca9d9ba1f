use std::f64::consts::{FRAC_PI_2, PI};

use bkc_core::chain::*;
use bkc_core::numerics::{Complex64, ComplexMatrix, RealMatrix};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Bloch block from the real-space generator of site `j`, minimal-image displacements.
fn fourier_block(spec: &ChainSpec, k: f64) -> ComplexMatrix {
    let n = spec.n_sites;
    let a = build_dynamical_matrix(spec).unwrap().mode_basis();
    let j = 0;
    let mut out = ComplexMatrix::zeros(2, 2);
    for m in 0..n {
        let mut d = j as i64 - m as i64;
        if d > n as i64 / 2 {
            d -= n as i64;
        }
        if d < -(n as i64) / 2 {
            d += n as i64;
        }
        let phase = Complex64::from_polar(1.0, k * d as f64);
        for (r, row) in [(0, j), (1, n + j)] {
            for (s, col) in [(0, m), (1, n + m)] {
                out[(r, s)] += a[(row, col)] * phase;
            }
        }
    }
    out.scale(c(0.0, 1.0))
}

#[test]
fn fourier_transform_reproduces_bloch_matrix() {
    let spec = ChainSpec::common_phase(3, 1.0, 0.5, 0.7, 0.3, Boundary::Periodic).unwrap();
    for i in 0..8 {
        let k = 2.0 * PI * i as f64 / 8.0;
        let diff = &fourier_block(&spec, k) - &bloch_matrix(&spec, k).unwrap();
        assert!(diff.max_abs() < 1e-12, "k={k}: {}", diff.max_abs());
    }
}

#[test]
fn quarter_phase_blocks() {
    let (j, l, gamma) = (0.8, 0.3, 0.5);
    let spec = ChainSpec::common_phase(4, j, l, FRAC_PI_2, gamma, Boundary::Open).unwrap();
    let m = build_dynamical_matrix(&spec).unwrap();
    assert_eq!(m.cross_coupling(), 0.0);
    let (mx, mp) = (m.x_block(), m.p_block());
    for s in 0..3 {
        assert!((mx[(s + 1, s)] - (j + l)).abs() < 1e-15);
        assert!((mx[(s, s + 1)] + (j - l)).abs() < 1e-15);
        // M_p = -Gamma/2 - H^T
        assert!((mp[(s, s + 1)] + (j + l)).abs() < 1e-15);
        assert!((mp[(s + 1, s)] - (j - l)).abs() < 1e-15);
    }
    assert!(mx
        .diagonal()
        .iter()
        .all(|d| (d + gamma / 2.0).abs() < 1e-15));
}

#[test]
fn mode_basis_round_trip() {
    let spec = ChainSpec::common_phase(3, 0.4, 0.9, 1.3, 0.2, Boundary::Periodic)
        .unwrap()
        .with_detuning(1, 0.3)
        .unwrap();
    let m = build_dynamical_matrix(&spec).unwrap();
    let t = quadrature_to_mode(3);
    let back = t.adjoint().matmul(&m.mode_basis()).matmul(&t);
    assert!((&back - &m.matrix.to_complex()).max_abs() < 1e-14);
    assert!((&t.matmul(&t.adjoint()) - &ComplexMatrix::identity(6)).max_abs() < 1e-15);
}

#[test]
fn rate_frequency_conversions_invert() {
    let s = c(-0.3, 1.2);
    assert_eq!(rate_to_frequency(s), c(-1.2, -0.3));
    assert!((frequency_to_rate(rate_to_frequency(s)) - s).norm() < 1e-16);
}

#[test]
fn reflection_with_quadrature_exchange_at_quarter_phase() {
    // Reversal plus x <-> p exchange maps M onto itself once alternate sites flip sign.
    let n = 5;
    let spec = ChainSpec::common_phase(n, 0.7, 0.4, FRAC_PI_2, 0.6, Boundary::Open).unwrap();
    let m = build_dynamical_matrix(&spec).unwrap().matrix;
    let q = RealMatrix::from_fn(2 * n, 2 * n, |r, col| {
        let (rb, rs) = (r / n, r % n);
        let (cb, cs) = (col / n, col % n);
        if rb != cb && rs == n - 1 - cs {
            if cs % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    });
    let mapped = q.matmul(&m).matmul(&q.transpose());
    assert!((&mapped - &m).max_abs() < 1e-15);
}

#[test]
fn transform_columns_are_eigenvectors_at_every_k() {
    for &(j, l, phi) in &[
        (1.0, 0.5, 0.3),
        (1.0, 2.0, 0.3),
        (0.7, 0.7, 1.2),
        (2.0, 1.0, 2.0),
        (1.0, 1.0, FRAC_PI_2),
    ] {
        let spec = ChainSpec::common_phase(4, j, l, phi, 0.4, Boundary::Periodic).unwrap();
        let v = local_quadrature_transform(&spec).unwrap().v;
        for col in 0..2 {
            let (a, b) = (v[(0, col)], v[(1, col)]);
            assert!(((a.norm_sqr() + b.norm_sqr()).sqrt() - 1.0).abs() < 1e-14);
            for i in 0..16 {
                let k = 2.0 * PI * i as f64 / 16.0;
                let w = bloch_matrix(&spec, k).unwrap().matvec(&[a, b]);
                // Parallel iff the 2D cross product vanishes.
                assert!(
                    (w[0] * b - w[1] * a).norm() < 1e-12,
                    "({j},{l},{phi}) k={k}"
                );
            }
        }
    }
}

#[test]
fn closed_gap_transform_at_y_two() {
    let spec = ChainSpec::common_phase(4, 2.0, 1.0, 0.0, 0.4, Boundary::Periodic).unwrap();
    let t = local_quadrature_transform(&spec).unwrap();
    assert_eq!(t.y, 2.0);
    let xi = 2.0f64.acosh();
    assert!((xi - 1.3170).abs() < 1e-4);
    assert!(matches!(t.regime, GapRegime::Closed { xi: x } if (x - xi).abs() < 1e-14));
    // Ratio of first to second entry is -e^{-/+ xi}.
    assert!((t.v[(0, 0)] / t.v[(1, 0)] - c(-(-xi).exp(), 0.0)).norm() < 1e-12);
    assert!((t.v[(0, 1)] / t.v[(1, 1)] - c(-xi.exp(), 0.0)).norm() < 1e-12);
}

#[test]
fn squeezing_free_limit_is_finite() {
    let spec = ChainSpec::common_phase(4, 1.0, 0.0, 0.4, 0.4, Boundary::Periodic).unwrap();
    let v = local_quadrature_transform(&spec).unwrap().v;
    assert!(v.is_finite());
    for col in 0..2 {
        let w = bloch_matrix(&spec, 0.9)
            .unwrap()
            .matvec(&[v[(0, col)], v[(1, col)]]);
        assert!((w[0] * v[(1, col)] - w[1] * v[(0, col)]).norm() < 1e-12);
    }
}

#[test]
fn uncoupled_transform_rejected() {
    let spec = ChainSpec::common_phase(2, 0.0, 0.0, 0.0, 1.0, Boundary::Open).unwrap();
    assert_eq!(
        local_quadrature_transform(&spec).unwrap_err(),
        ChainError::Uncoupled
    );
}

#[test]
fn phase_accessors() {
    let spec = ChainSpec::common_phase(3, 1.0, 0.5, 0.9, 1.0, Boundary::Open).unwrap();
    assert!((spec.phase().unwrap() - 0.9).abs() < 1e-15);
    let mismatched = ChainSpec::new(
        3,
        c(1.0, 0.0),
        c(0.0, 1.0),
        vec![1.0; 3],
        vec![0.0; 3],
        Boundary::Open,
    )
    .unwrap();
    assert!(matches!(
        mismatched.phase(),
        Err(ChainError::PhaseMismatch { .. })
    ));
    assert!(
        (ChainSpec::exceptional(3, 1.6, 0.5, Boundary::Open)
            .unwrap()
            .link_gain()
            .unwrap()
            - 1.6)
            .abs()
            < 1e-15
    );
}

#[test]
fn length_mismatch_rejected() {
    let err = ChainSpec::new(
        3,
        c(1.0, 0.0),
        c(0.0, 0.0),
        vec![1.0; 2],
        vec![0.0; 3],
        Boundary::Open,
    )
    .unwrap_err();
    assert!(matches!(
        err,
        ChainError::Length {
            field: "damping",
            ..
        }
    ));
    assert!(ChainSpec::new(0, c(1.0, 0.0), c(0.0, 0.0), vec![], vec![], Boundary::Open).is_err());
}

#[test]
fn spec_serde_round_trip() {
    let spec = ChainSpec::common_phase(3, 1.0, 0.5, 0.9, 1.0, Boundary::Periodic).unwrap();
    let json = serde_json::to_string(&spec).unwrap();
    assert!(json.contains("\"periodic\""));
    assert_eq!(serde_json::from_str::<ChainSpec>(&json).unwrap(), spec);
}

prop_compose! {
    fn coupling()(re in -2.0f64..2.0, im in -2.0f64..2.0) -> Complex64 { c(re, im) }
}

proptest! {
    #[test]
    fn generator_is_linear_in_couplings(
        j1 in coupling(), l1 in coupling(), j2 in coupling(), l2 in coupling(),
        e1 in prop::collection::vec(-1.0f64..1.0, 4), e2 in prop::collection::vec(-1.0f64..1.0, 4),
        periodic in any::<bool>(),
    ) {
        let b = if periodic { Boundary::Periodic } else { Boundary::Open };
        let gamma = vec![0.3, 0.5, 0.2, 0.9];
        let mk = |j, l, e: Vec<f64>| build_dynamical_matrix(&ChainSpec::new(4, j, l, gamma.clone(), e, b).unwrap()).unwrap().matrix;
        let zero = mk(c(0.0, 0.0), c(0.0, 0.0), vec![0.0; 4]);
        let sum: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
        let lhs = &(&mk(j1, l1, e1) + &mk(j2, l2, e2)) - &zero;
        let rhs = mk(j1 + j2, l1 + l2, sum);
        prop_assert!((&lhs - &rhs).max_abs() < 1e-14);
    }

    #[test]
    fn generator_entries_finite(j in coupling(), l in coupling(), n in 1usize..8) {
        let spec = ChainSpec::new(n, j, l, vec![0.4; n], vec![0.1; n], Boundary::Open).unwrap();
        prop_assert!(build_dynamical_matrix(&spec).unwrap().matrix.is_finite());
    }
}
