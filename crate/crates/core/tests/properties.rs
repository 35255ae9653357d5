//! Randomized invariants across circuits, Hamiltonians and spectra.

use hamline::chain::legal_sequence;
use hamline::circuit::{circuit_to_json, parse_circuit, GateKind, LayeredCircuit};
use hamline::hamiltonian::{export_terms, hamiltonian_for, parse_terms, Couplings};
use hamline::spectra::{
    full_index, random_vector, restrict, walk_eigs_analytic, walk_matrix, FullOperator, LinearOperator,
};
use hamline::verify::history_energies;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

const KINDS: [GateKind; 7] = [GateKind::I, GateKind::H, GateKind::X, GateKind::T, GateKind::Cnot, GateKind::Swap, GateKind::Cz];

fn circuit(n: usize, rounds: usize) -> impl Strategy<Value = LayeredCircuit> {
    // the first round is always the identity
    prop::collection::vec(prop::collection::vec(0..KINDS.len(), n - 1), rounds - 1).prop_map(move |picks| {
        let mut rounds = vec![vec![GateKind::I; n - 1]];
        rounds.extend(picks.iter().map(|r| r.iter().map(|&k| KINDS[k]).collect::<Vec<_>>()));
        LayeredCircuit::from_kinds(n, 1, &rounds).unwrap()
    })
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn full_operator_is_hermitian(c in circuit(2, 1), seed in 0u64..1000) {
        let h = hamiltonian_for(&c, None).unwrap();
        let op = FullOperator::new(&h).unwrap();
        let x = random_vector(op.dim(), seed);
        let y = random_vector(op.dim(), seed + 1);
        let (mut hx, mut hy) = (vec![C64::new(0.0, 0.0); op.dim()], vec![C64::new(0.0, 0.0); op.dim()]);
        op.apply(&x, &mut hx);
        op.apply(&y, &mut hy);
        let gap = (dot(&x, &hy) - dot(&hx, &y)).norm();
        prop_assert!(gap <= 1e-12 * op.scale() * op.dim() as f64, "gap {gap}");
    }

    #[test]
    fn restriction_matches_full_rows(c in circuit(2, 2)) {
        let h = hamiltonian_for(&c, Some(Couplings::unit())).unwrap();
        let op = FullOperator::new(&h).unwrap();
        let legal = legal_sequence(2, 2).unwrap();
        let r = restrict(&h, &legal).unwrap();
        let dense = r.dense().unwrap();
        prop_assert!((&dense - dense.adjoint()).camax() < 1e-12);
        for row in 0..r.dim() {
            let (rc, ru) = r.basis.label(row);
            let full_row = op.row(full_index(rc, ru));
            for col in 0..r.dim() {
                let (cc, cu) = r.basis.label(col);
                let fi = full_index(cc, cu);
                let want: C64 = full_row.iter().filter(|(j, _)| *j == fi).map(|(_, v)| *v).sum();
                prop_assert!((dense[(row, col)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn history_state_costs_only_rejection(c in circuit(3, 2), re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let w = [C64::new(1.0, 0.0), C64::new(re, im)];
        let e = history_energies(&c, &w).unwrap();
        prop_assert!(e.input.abs() < 1e-12 && e.pen.abs() < 1e-12 && e.prop.abs() < 1e-12);
        prop_assert!((e.output - e.p0 / (e.k + 1) as f64).abs() < 1e-12);
    }

    #[test]
    fn walk_spectra_have_closed_forms(l in 1usize..=64) {
        for (f, g) in [(0.5, 0.5), (1.0, 1.0), (1.0, 0.5)] {
            let num = walk_matrix(f, g, l).unwrap().eigenvalues();
            let ana = walk_eigs_analytic(f, g, l).unwrap();
            for (a, b) in num.iter().zip(&ana) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn term_export_round_trips(c in circuit(3, 1)) {
        let h = hamiltonian_for(&c, None).unwrap();
        let text = export_terms(&h);
        prop_assert_eq!(export_terms(&parse_terms(&text).unwrap()), text);
    }

    #[test]
    fn circuit_json_round_trips(c in circuit(4, 2)) {
        let back = parse_circuit(&circuit_to_json(&c).to_string()).unwrap();
        prop_assert_eq!(back.unitary(), c.unitary());
    }
}
