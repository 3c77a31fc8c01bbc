use num_complex::Complex64 as C64;
use proptest::prelude::*;

use otoc_core::evolution::{evolve_doubled, make_propagator};
use otoc_core::hamiltonians::{
    antisymmetry_report, build_xy_chain, dense_antisymmetry_violation, ChainPart, HamiltonianSpec, Pauli, PauliString,
};
use otoc_core::noise::{channel_series, NoiseConfig, NoiseKind};
use otoc_core::protocol::{otoc_exact_trace, otoc_protocol, Measurement, SeriesConfig, WOperator};
use otoc_core::qstate::{frame_bell_state, DiagonalOperator, LocalObservable, PhaseFrame, StateVector};
use otoc_core::varprep::{build_ansatz_state, fidelity_fp, max_degenerate_spread, AnsatzParams, Spectrum};

fn pauli() -> impl Strategy<Value = Pauli> {
    prop_oneof![Just(Pauli::I), Just(Pauli::X), Just(Pauli::Y), Just(Pauli::Z)]
}

fn pauli_sum(n: usize) -> impl Strategy<Value = HamiltonianSpec> {
    prop::collection::vec((prop::collection::vec(pauli(), n), -1.0..1.0f64), 1..6).prop_map(move |terms| {
        let terms = terms.into_iter().map(|(ops, c)| PauliString::new(ops, c).unwrap()).collect();
        HamiltonianSpec::new(n, terms).unwrap()
    })
}

/// Random Hamiltonian that is antisymmetric in the frame given by `mask`,
/// obtained by dropping the even terms of a random Pauli sum.
fn antisymmetric(n: usize) -> impl Strategy<Value = (HamiltonianSpec, PhaseFrame)> {
    (pauli_sum(n), 0..1u64 << n).prop_filter_map("no odd terms", move |(h, mask)| {
        let odd: Vec<_> = h.terms().iter().filter(|t| t.is_odd_in_frame(mask)).cloned().collect();
        (!odd.is_empty()).then(|| (HamiltonianSpec::new(n, odd).unwrap(), PhaseFrame::from_mask(n, mask)))
    })
}

fn amplitudes(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1 << n)
        .prop_filter("nonzero", |v| v.iter().any(|&(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn algebraic_and_dense_antisymmetry_agree(h in (1usize..=4).prop_flat_map(pauli_sum), mask in 0u64..16) {
        let n = h.num_qubits();
        let frame = PhaseFrame::from_mask(n, mask & ((1 << n) - 1));
        let report = antisymmetry_report(&h, &frame).unwrap();
        let dense = dense_antisymmetry_violation(&h, &frame).unwrap();
        prop_assert_eq!(report.holds, dense <= 1e-12, "algebraic {:?}, dense {}", report, dense);
    }

    #[test]
    fn frame_conjugation_twice_is_z_conjugation(ops in prop::collection::vec(pauli(), 1..6), c in -2.0..2.0f64, mask in 0u64..64) {
        let n = ops.len();
        let frame = PhaseFrame::from_mask(n, mask & ((1 << n) - 1));
        let s = PauliString::new(ops.clone(), c).unwrap();
        let twice = s.conjugate_by_frame(&frame).conjugate_by_frame(&frame);
        let flips = ops.iter().enumerate().filter(|&(j, p)| frame.is_quarter_turn(j) && matches!(p, Pauli::X | Pauli::Y)).count();
        prop_assert_eq!(twice.ops(), &ops[..]);
        let expected = if flips % 2 == 0 { c } else { -c };
        prop_assert!((twice.coeff() - expected).abs() < 1e-15);
    }

    #[test]
    fn normalization_is_enforced_and_preserved(amps in (2usize..=3).prop_flat_map(|n| amplitudes(2 * n)), t in 0.0..3.0f64) {
        let n = amps.len().trailing_zeros() as usize / 2;
        let h = build_xy_chain(n, 1.0, ChainPart::Ab).unwrap();
        let frame = PhaseFrame::alternating(n);
        let psi = StateVector::normalized(amps.clone(), frame.doubled()).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        let u = make_propagator(&h, &frame, t).unwrap();
        prop_assert!((evolve_doubled(&psi, &u).unwrap().norm() - 1.0).abs() < 1e-12);
        let scaled: Vec<C64> = amps.iter().map(|a| a * 1.5).collect();
        prop_assert!(StateVector::from_amplitudes(scaled, frame.doubled()).is_err());
    }

    #[test]
    fn propagators_are_unitary_and_real_when_antisymmetric((h, frame) in (1usize..=4).prop_flat_map(antisymmetric), t in -3.0..3.0f64) {
        let u = make_propagator(&h, &frame, t).unwrap();
        prop_assert!(u.unitarity_error() < 1e-10);
        prop_assert!(u.max_imaginary() < 1e-10);
    }

    #[test]
    fn protocol_equals_trace_in_any_valid_frame(
        (h, frame) in (2usize..=4).prop_flat_map(antisymmetric),
        w in 0usize..4,
        v in 0usize..4,
        t in 0.0..2.0f64,
    ) {
        let n = h.num_qubits();
        let (w, v) = (w % n, v % n);
        let exact = otoc_exact_trace(&h, &frame, w, v, t).unwrap();
        let p = otoc_protocol(&h, &frame, w, v, t).unwrap();
        prop_assert!(p.antisymmetric);
        prop_assert!((p.value - exact).abs() < 1e-10);
        prop_assert!(exact.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn vvt_outcomes_form_a_distribution(amps in amplitudes(4), site in 0usize..2, theta in 0.0..std::f64::consts::PI, mask in 0u64..4) {
        let frame = PhaseFrame::from_mask(2, mask);
        let psi = StateVector::normalized(amps, frame.doubled()).unwrap();
        // A generic Hermitian observable with eigenvalues ±1.
        let (s, c) = theta.sin_cos();
        let m = [[C64::new(c, 0.0), C64::new(s * 0.6, -s * 0.8)], [C64::new(s * 0.6, s * 0.8), C64::new(-c, 0.0)]];
        let v = LocalObservable::new(site, m).unwrap();
        let meas = Measurement::of_state(&psi, &v).unwrap();
        let total: f64 = meas.probabilities.iter().flatten().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(meas.probabilities.iter().flatten().all(|&p| p >= -1e-15));
        prop_assert!(meas.value().abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn readout_scales_by_one_minus_two_x_squared(p in prop::array::uniform4(0.0..1.0f64), x in 0.0..0.5f64) {
        let total: f64 = p.iter().sum();
        prop_assume!(total > 1e-6);
        let probabilities = [[p[0] / total, p[1] / total], [p[2] / total, p[3] / total]];
        let m = Measurement { eigenvalues: [-1.0, 1.0], probabilities };
        let noisy = m.with_readout_error(x).value();
        prop_assert!((noisy - (1.0 - 2.0 * x).powi(2) * m.value()).abs() < 1e-12);
    }

    #[test]
    fn ansatz_amplitudes_are_constant_on_eigenspaces(
        k in 1usize..=5,
        extra in 0usize..=2,
        levels in prop::collection::vec(-2.0..2.0f64, 2..4),
        picks in prop::collection::vec(0usize..4, 32),
        alphas in prop::collection::vec(-6.0..6.0f64, 0..=3),
    ) {
        let values: Vec<f64> = (0..1usize << k).map(|x| levels[picks[x % 32] % levels.len()]).collect();
        let w = DiagonalOperator::from_values(k, values).unwrap();
        let params = AnsatzParams::new(alphas);
        let psi = build_ansatz_state(&w, &params, k + extra).unwrap();
        prop_assert!(max_degenerate_spread(&psi, &w) < 1e-12);
        prop_assert!((psi.norm() - 1.0).abs() < 1e-12);
        if let Ok(s) = Spectrum::from_diagonal(&w) {
            prop_assert!(fidelity_fp(&s, &params).unwrap().magnitude() <= 1.0 + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn broken_symmetry_response_is_even_in_epsilon(eps in 0.001..0.2f64, t in 0.2..2.0f64, kind in 0usize..3) {
        let kind = [NoiseKind::SymmetryBreaking, NoiseKind::UnequalHamiltonians, NoiseKind::IntercopyCoupling][kind];
        let cfg = SeriesConfig {
            hamiltonian: build_xy_chain(4, 1.0, ChainPart::Ab).unwrap(),
            frame: None,
            w: WOperator::PauliZ(0),
            v_sites: vec![3],
            times: vec![t],
            shots: 0,
            seed: 1,
        };
        let plus = channel_series(&NoiseConfig::new(kind, eps).unwrap(), &cfg).unwrap();
        let minus = channel_series(&NoiseConfig::new(kind, -eps).unwrap(), &cfg).unwrap();
        let (a, b) = (plus[0].points[0], minus[0].points[0]);
        prop_assert!((a.protocol - b.protocol).abs() < 1e-10);
        prop_assert!((a.baseline - b.baseline).abs() < 1e-10);
    }

    #[test]
    fn bell_state_is_fixed_by_antisymmetric_evolution((h, frame) in (1usize..=4).prop_flat_map(antisymmetric), t in 0.0..3.0f64) {
        let bell = frame_bell_state(&frame).unwrap();
        let u = make_propagator(&h, &frame, t).unwrap();
        let out = evolve_doubled(&bell, &u).unwrap();
        prop_assert!((out.overlap_magnitude(&bell).unwrap() - 1.0).abs() < 1e-10);
    }
}
