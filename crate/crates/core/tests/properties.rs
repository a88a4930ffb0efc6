use approx::assert_relative_eq;
use focklens::optimize::fit_power_law;
use focklens::oracles::{bessel_j_sequence, displacement_matrix_element};
use focklens::propagate::{apply_quadratic_phase, displace, evolve_hamiltonian};
use focklens::state::{coherent_state, default_window, fidelity, fock_state, make_window, photon_statistics};
use focklens::{Complex64, HamiltonianSpec, QuadraticPhase};
use proptest::prelude::*;

fn complex(max: f64) -> impl Strategy<Value = Complex64> {
    (0.0..max, -std::f64::consts::PI..std::f64::consts::PI).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn coherent_states_are_normalized(alpha in complex(60.0)) {
        let s = coherent_state(alpha, default_window(alpha.norm_sqr())).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        let stats = photon_statistics(&s);
        prop_assert!((stats.mean - alpha.norm_sqr()).abs() < 1e-8 * (1.0 + alpha.norm_sqr()));
    }

    #[test]
    fn cdf_is_monotone_and_complete(alpha in complex(20.0), phi in 0.0..0.05f64, beta in complex(1.0)) {
        let s = coherent_state(alpha, make_window(alpha.norm_sqr() as u64, 320)).unwrap();
        let s = apply_quadratic_phase(&s, &QuadraticPhase::new(phi, alpha.norm_sqr()));
        let s = displace(&s, beta).unwrap();
        let stats = photon_statistics(&s);
        prop_assert!(stats.cdf.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!((stats.cdf.last().unwrap() - 1.0).abs() < 1e-10);
        prop_assert!(stats.probabilities.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn quadratic_phase_is_diagonal(alpha in complex(15.0), phi in -1.0..1.0f64, center in 0.0..400.0f64, linear in -1.0..1.0f64) {
        let s = coherent_state(alpha, make_window(225, 250)).unwrap();
        let phase = QuadraticPhase { phi0: phi, center, linear_coeff: linear };
        let out = apply_quadratic_phase(&s, &phase);
        for (a, b) in s.amplitudes().iter().zip(out.amplitudes()) {
            prop_assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn displacement_is_unitary_and_invertible(alpha in complex(10.0), beta in complex(2.0)) {
        let s = coherent_state(alpha, make_window(100, 250)).unwrap();
        let forward = displace(&s, beta).unwrap();
        prop_assert!((forward.norm_sqr() - 1.0).abs() < 1e-10);
        let back = displace(&forward, -beta).unwrap();
        prop_assert!(back.distance(&s) < 1e-10);
    }

    #[test]
    fn displacement_composes_coherent_states(alpha in complex(8.0), beta in complex(2.0)) {
        let window = make_window(64, 250);
        let moved = displace(&coherent_state(alpha, window).unwrap(), beta).unwrap();
        let direct = coherent_state(alpha + beta, window).unwrap();
        // equal up to the phase exp(i Im(beta alpha^*))
        prop_assert!((moved.inner(&direct).norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn drive_equals_displacement(alpha in complex(8.0), eps in 0.1..2.0f64, tau in 0.0..1.5f64, theta in -3.0..3.0f64) {
        let s = coherent_state(alpha, make_window(64, 250)).unwrap();
        let driven = evolve_hamiltonian(&s, &HamiltonianSpec::drive(eps, theta), tau, 1e-10).unwrap();
        let beta = Complex64::new(0.0, -eps * tau) * Complex64::from_polar(1.0, -theta);
        prop_assert!(driven.distance(&displace(&s, beta).unwrap()) < 1e-9);
    }

    #[test]
    fn evolution_preserves_norm(alpha in complex(8.0), chi in 0.0..0.05f64, delta in -0.5..0.5f64, t in 0.0..2.0f64) {
        let s = coherent_state(alpha, make_window(64, 250)).unwrap();
        let h = HamiltonianSpec { drive_strength: 1.0, drive_phase: 0.2, detuning: delta, kerr: chi, ..Default::default() };
        let out = evolve_hamiltonian(&s, &h, t, 1e-9).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_ignores_global_phase(alpha in complex(10.0), theta in -3.0..3.0f64, n in 0u64..150) {
        let s = coherent_state(alpha, make_window(100, 250)).unwrap();
        let rotated: Vec<Complex64> = s.amplitudes().iter().map(|c| c * Complex64::from_polar(1.0, theta)).collect();
        let rotated = focklens::StateVector::from_amplitudes(s.window(), rotated).unwrap();
        prop_assert!((fidelity(&s, n) - fidelity(&rotated, n)).abs() < 1e-15);
    }

    #[test]
    fn power_law_fit_is_exact(prefactor in 0.01..100.0f64, exponent in -2.0..2.0f64) {
        let samples: Vec<(f64, f64)> = [2.0, 7.0, 30.0, 1e3, 4e4].iter().map(|&x: &f64| (x, prefactor * x.powf(-exponent))).collect();
        let fit = fit_power_law(&samples).unwrap();
        prop_assert!((fit.exponent - exponent).abs() < 1e-12);
        prop_assert!((fit.prefactor / prefactor - 1.0).abs() < 1e-10);
        prop_assert!(fit.max_log_residual < 1e-12);
    }

    #[test]
    fn bessel_sequences_are_normalized(x in 0.0..80.0f64) {
        let j = bessel_j_sequence(x, x as usize + 60);
        let total = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn displace_matches_laguerre_elements(n in 0u64..300, beta in complex(1.5)) {
        let window = make_window(n, 120);
        let out = displace(&fock_state(n, window).unwrap(), beta).unwrap();
        for m in [n.saturating_sub(7), n, n + 3, n + 11] {
            let expected = displacement_matrix_element(m, n, beta).unwrap();
            prop_assert!((out.amplitude(m) - expected).norm() < 1e-10);
        }
    }
}

#[test]
fn bare_coherent_fidelity_scales_as_inverse_square_root() {
    let samples: Vec<(f64, f64)> = [1e3, 2.5e3, 1e4, 4e4, 1e5]
        .iter()
        .map(|&n: &f64| {
            let s = coherent_state(Complex64::new(n.sqrt(), 0.0), default_window(n)).unwrap();
            (n, fidelity(&s, n as u64))
        })
        .collect();
    let fit = fit_power_law(&samples).unwrap();
    assert_relative_eq!(fit.exponent, 0.5, epsilon = 0.02);
}
