use faer::Mat;
use proptest::prelude::*;

use uscqed::evolve::thermal_weights;
use uscqed::model::{build_dicke_hamiltonian, build_full_hamiltonian, parity_operator, ControlledHamiltonian, ModelParams};
use uscqed::observables::{entanglement_entropy, fidelity_to_qubit_state};
use uscqed::schedules::{ControlSchedule, Controls, Segment, Shape};
use uscqed::spectral::dicke_state;
use uscqed::statespace::{
    embed, partial_trace, reduce_to_register, spin_squared, Axis, DensityMatrix, Factor, HilbertSpace, Keep, Layout,
    StateVector,
};
use uscqed::C64;

fn cvec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len).prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn state(len: usize) -> impl Strategy<Value = StateVector> {
    cvec(len).prop_filter_map("zero vector", |v| StateVector::new(v).normalized().ok())
}

/// `ρ = A A† / Tr(A A†)` for a random square `A`.
fn density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    cvec(dim * dim).prop_map(move |v| {
        let a = Mat::from_fn(dim, dim, |i, j| v[i * dim + j]);
        let rho = &a * a.adjoint();
        let tr: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
        DensityMatrix::new(Mat::from_fn(dim, dim, |i, j| rho[(i, j)] / tr)).unwrap()
    })
}

fn params(n: usize) -> impl Strategy<Value = ModelParams> {
    (
        0.2f64..3.0,
        prop::collection::vec(0.0f64..4.0, n),
        prop::collection::vec(-3.0f64..3.0, n),
    )
        .prop_map(|(omega_r, g, omega_q)| ModelParams { omega_r, g, omega_q })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn partial_traces_keep_unit_trace(rho in density(2 * 2 * 3)) {
        let space = HilbertSpace::new(2, 3).unwrap();
        for keep in [Keep::Qubits, Keep::Resonator, Keep::SingleQubit(1)] {
            let red = partial_trace(&rho, Layout::Full(space), &keep).unwrap();
            prop_assert!((red.trace().re - 1.0).abs() < 1e-12);
            prop_assert!(red.trace().im.abs() < 1e-12);
            prop_assert!(red.hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_parity_symmetric(p in params(3)) {
        let space = HilbertSpace::new(3, 5).unwrap();
        let h = build_full_hamiltonian(&p, &space).unwrap();
        prop_assert!(h.hermiticity_error() < 1e-12);
        prop_assert!(h.commutator(&parity_operator(&space)).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn matrix_free_apply_matches_sparse(p in params(2), psi in state(2 * 2 * 6)) {
        let space = HilbertSpace::new(2, 6).unwrap();
        let ham = ControlledHamiltonian::new(space, p.omega_r).unwrap();
        let dense = ham.to_operator(&p.g, &p.omega_q).unwrap().apply_vec(&psi.amplitudes);
        let mut out = vec![C64::new(0.0, 0.0); space.dim()];
        let mut work = out.clone();
        ham.apply(&p.g, &p.omega_q, &psi.amplitudes, &mut out, &mut work);
        let err = out.iter().zip(&dense).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn dicke_model_conserves_total_spin(g in 0.0f64..5.0, w in 0.1f64..3.0) {
        let space = HilbertSpace::new(3, 5).unwrap();
        let h = build_dicke_hamiltonian(1.0, g, w, &space).unwrap();
        let s2 = embed(&spin_squared(3).unwrap(), Factor::Qubits, &space).unwrap();
        prop_assert!(h.commutator(&s2).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn thermal_weights_are_normalised_and_geometric(nbar in 0.0f64..4.0, n_cut in 1usize..30) {
        let w = thermal_weights(nbar, n_cut).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let r = nbar / (1.0 + nbar);
        for k in 1..w.len() {
            prop_assert!((w[k] - w[k - 1] * r).abs() < 1e-12);
        }
    }

    #[test]
    fn schedules_are_continuous(
        values in prop::collection::vec((0.0f64..5.0, 0.1f64..20.0), 4),
        durations in prop::collection::vec(0.1f64..5.0, 3),
        shapes in prop::collection::vec(prop_oneof![Just(Shape::Linear), Just(Shape::Cosine)], 3),
    ) {
        let segs: Vec<Segment> = (0..3)
            .map(|k| Segment::uniform(2, durations[k], shapes[k], (values[k].0, values[k + 1].0), (values[k].1, values[k + 1].1)))
            .collect();
        let sched = ControlSchedule::new(2, segs).unwrap();
        for b in sched.boundaries() {
            let (gl, wl) = sched.evaluate(b - 1e-9);
            let (gr, wr) = sched.evaluate(b + 1e-9);
            prop_assert!((gl[0] - gr[0]).abs() < 1e-6 && (wl[1] - wr[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn fidelities_and_entropies_are_bounded(psi in state(2 * 2 * 2 * 4)) {
        let space = HilbertSpace::new(3, 4).unwrap();
        let target = dicke_state(3, 1.5, 0.5, Axis::X, 0).unwrap();
        let f = fidelity_to_qubit_state(&psi.amplitudes, &space, &target).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
        let rq = reduce_to_register(&psi.amplitudes, &space);
        let s = entanglement_entropy(&rq).unwrap();
        prop_assert!((-1e-12..=3.0 + 1e-9).contains(&s));
        prop_assert!(rq.purity() <= 1.0 + 1e-12 && rq.purity() >= 1.0 / 8.0 - 1e-12);
    }
}
