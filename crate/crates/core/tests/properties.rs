use proptest::prelude::*;
use reactmix::compactness::{kernel, CompactnessFunctional};
use reactmix::entropy::{det_b_closed_form, matrix_b};
use reactmix::flux::truncated_flux_at;
use reactmix::mixture::{MixtureParams, ReactionNetwork};
use reactmix::oracle::{det_numeric, ode_reference_wellmixed};
use reactmix::solver::{FourierTerm, InitialProfile, SimConfig, Solver};
use reactmix::spectral::SpectralGrid;

fn params_strategy(n: usize) -> impl Strategy<Value = MixtureParams> {
    (
        proptest::collection::vec(1.2f64..3.0, n),
        proptest::collection::vec(0.3f64..3.0, n),
    )
        .prop_map(|(g, m)| MixtureParams::new(g, m))
}

fn point_strategy() -> impl Strategy<Value = (MixtureParams, Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|n| {
        (
            params_strategy(n),
            proptest::collection::vec(1e-2f64..10.0, n),
            proptest::collection::vec(-3.0f64..3.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flux_has_the_b_representation((params, rho, grad) in point_strategy()) {
        let n = rho.len();
        let mut flux = vec![0.0; n];
        truncated_flux_at(&rho, &grad, &params, f64::INFINITY, &mut flux);
        let grad_h: Vec<f64> = (0..n)
            .map(|i| params.gamma[i] / params.molar_mass[i] * rho[i].powf(params.gamma[i] - 2.0) * grad[i])
            .collect();
        let grad_q: Vec<f64> = grad_h.windows(2).map(|w| w[0] - w[1]).collect();
        let via_b = matrix_b(&rho).unwrap().mul_vec(&grad_q);
        let scale = flux.iter().fold(0.0f64, |a, f| a.max(f.abs())).max(1e-300);
        for i in 0..n - 1 {
            prop_assert!((via_b[i] - flux[i]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn det_b_matches_elimination(rho in proptest::collection::vec(1e-2f64..1e2, 2..7)) {
        let closed = det_b_closed_form(&rho).unwrap();
        let numeric = det_numeric(&matrix_b(&rho).unwrap().rows());
        prop_assert!(((numeric - closed) / closed).abs() <= 1e-12);
    }

    #[test]
    fn truncated_fluxes_cancel_on_signed_states(
        (params, rho, grad) in point_strategy(),
        signs in proptest::collection::vec(any::<bool>(), 6),
        delta in 0.05f64..2.0,
    ) {
        let rho: Vec<f64> = rho.iter().zip(&signs).map(|(r, s)| if *s { -0.1 * r } else { *r }).collect();
        prop_assume!(rho.iter().any(|r| *r > 0.0));
        let mut flux = vec![0.0; rho.len()];
        truncated_flux_at(&rho, &grad, &params, 1.0 / delta, &mut flux);
        let scale = flux.iter().fold(0.0f64, |a, f| a.max(f.abs()));
        prop_assert!(flux.iter().sum::<f64>().abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn functional_is_a_shift_invariant_seminorm(
        values in proptest::collection::vec(-2.0f64..2.0, 64),
        scale in -5.0f64..5.0,
        offset in -3.0f64..3.0,
        shift in 0usize..64,
    ) {
        let grid = SpectralGrid::new(64).unwrap();
        let f = CompactnessFunctional::new(&grid, 1e-2).unwrap();
        let base = f.evaluate(&values);
        prop_assert!(base >= 0.0);
        let affine: Vec<f64> = values.iter().map(|v| scale * v + offset).collect();
        prop_assert!((f.evaluate(&affine) - scale * scale * base).abs() <= 1e-12 * (1.0 + scale * scale) * base.max(1e-300) + 1e-15);
        let shifted: Vec<f64> = (0..64).map(|k| values[(k + shift) % 64]).collect();
        prop_assert!((f.evaluate(&shifted) - base).abs() <= 1e-12 * base.max(1e-300) + 1e-15);
    }

    #[test]
    fn kernel_is_even_positive_and_bounded(x in -2.0f64..2.0, h in 1e-5f64..0.125) {
        let k = kernel(x, h);
        prop_assert!(k >= 0.0 && k <= 1.0 / h);
        prop_assert_eq!(k, kernel(-x, h));
        prop_assert!((k - kernel(x + 1.0, h)).abs() <= 1e-9 * (1.0 / h));
    }
}

#[test]
fn functional_vanishes_on_constants() {
    let grid = SpectralGrid::new(128).unwrap();
    for h in [1e-2, 1e-3, 1e-4] {
        let f = CompactnessFunctional::new(&grid, h).unwrap();
        assert_eq!(f.evaluate(&[3.5; 128]), 0.0);
    }
}

fn smooth_config(m: usize) -> SimConfig {
    let params = MixtureParams::new(vec![1.7, 2.0, 2.4], vec![1.0, 2.0, 1.5]).with_epsilon(1e-2);
    let wave = |mean: f64, amplitude: f64, mode: u32| InitialProfile::Sinusoidal {
        mean,
        terms: vec![FourierTerm {
            amplitude,
            mode,
            phase: 0.3 * mode as f64,
        }],
    };
    let init = vec![wave(1.0, 0.05, 1), wave(0.8, 0.04, 2), wave(0.5, 0.02, 1)];
    SimConfig::new(m, params, ReactionNetwork::abc(1.0, 0.5), init, 0.1)
}

#[test]
fn right_hand_side_converges_spectrally() {
    let coarse = Solver::new(smooth_config(64)).unwrap();
    let fine = Solver::new(smooth_config(128)).unwrap();
    let a = coarse.species_rhs(&coarse.initial_state()).unwrap();
    let b = fine.species_rhs(&fine.initial_state()).unwrap();
    let scale = b.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in 0..3 {
        let err = (0..64).map(|k| (a.get(i, k) - b.get(i, 2 * k)).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10 * scale, "component {i}: {err:e} against {scale:e}");
    }
}

#[test]
fn rk4_is_fourth_order_on_the_reaction_subsystem() {
    let initial = [0.9, 1.1, 0.2];
    let reference = ode_reference_wellmixed(&[0, 1], &[2.0, 3.0], &[2], &[5.0], &initial, 1.0, 1e-13);
    let errors: Vec<f64> = [0.1f64, 0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| {
            let params = MixtureParams::new(vec![2.0; 3], vec![1.0; 3]);
            let init = initial.iter().map(|&value| InitialProfile::Constant { value }).collect();
            let solver = Solver::new(SimConfig::new(16, params, ReactionNetwork::abc(2.0, 3.0), init, 1.0)).unwrap();
            let mut state = solver.initial_state();
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                state = solver.step_rk4(&state, dt).unwrap().state;
            }
            (0..3).map(|i| (state.component(i)[0] - reference[i]).abs()).fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 4.0).abs() < 0.3, "{errors:?}");
    }
}
