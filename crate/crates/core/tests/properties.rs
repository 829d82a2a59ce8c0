use std::sync::Arc;

use decoherence_core::classical::classical_equilibrium_density;
use decoherence_core::dynamics::{equilibrium_state, evolve_state, expectation, liouvillian_apply, QuadratureMode};
use decoherence_core::experiment::{pairing_invariance, pointer_diagnostics};
use decoherence_core::fixtures::{outer, Fixtures};
use decoherence_core::model::DeltaWell;
use decoherence_core::pointer::{diagonalize_blocks, transform_state};
use decoherence_core::profile::Profile;
use decoherence_core::spectral::{
    dual_pairing, Amplitudes, Blocks, ObservableFn, QuantumNumbers, SpectrumGrid, StateFn,
};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn context() -> (Arc<SpectrumGrid>, Arc<QuantumNumbers>) {
    (Arc::new(SpectrumGrid::new(-1.0, 20.0, 5, 6).unwrap()), Arc::new(QuantumNumbers::parity()))
}

fn close(a: C64, b: C64, rel: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()).max(1.0)
}

/// `|a⟩⟨b|` for two independent random amplitude sets: not self-adjoint.
fn skew_observable(fx: &mut Fixtures, g: &Arc<SpectrumGrid>, q: &Arc<QuantumNumbers>) -> ObservableFn {
    let (a, b) = (fx.amplitudes(g, q).unwrap(), fx.amplitudes(g, q).unwrap());
    ObservableFn::new(g.clone(), q.clone(), outer(&a, &b)).unwrap()
}

fn combine(x: &Blocks, a: C64, y: &Blocks, b: C64) -> Blocks {
    let mut out = x.clone();
    out.scale(a);
    out.axpy(b, y);
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn quadrature_is_exact_for_panel_polynomials(
        order in 2usize..9,
        panels in 1usize..6,
        coeffs in proptest::collection::vec(-1.0f64..1.0, 18),
    ) {
        let grid = SpectrumGrid::new(-1.0, 3.0, panels, order).unwrap();
        let degree = 2 * order - 1;
        let c = &coeffs[..=degree];
        let f = |x: f64| c.iter().rev().fold(0.0, |acc, &k| acc * x + k);
        let exact: f64 = c.iter().enumerate().map(|(n, &k)| k * 3f64.powi(n as i32 + 1) / (n + 1) as f64).sum();
        let sum: f64 = grid.nodes().iter().zip(grid.weights()).map(|(&x, &w)| w * f(x)).sum();
        let scale: f64 = c.iter().enumerate().map(|(n, &k)| k.abs() * 3f64.powi(n as i32 + 1)).sum();
        prop_assert!((sum - exact).abs() <= 1e-12 * scale.max(1.0), "{sum} vs {exact}");
    }

    #[test]
    fn pairing_is_conjugation_symmetric_and_linear(seed: u64, ar in -2.0f64..2.0, ai in -2.0f64..2.0) {
        let (g, q) = context();
        let mut fx = Fixtures::new(seed);
        let rho = fx.state(&g, &q, 2).unwrap();
        let sigma = fx.state(&g, &q, 1).unwrap();
        let o1 = skew_observable(&mut fx, &g, &q);
        let o2 = fx.observable(&g, &q).unwrap();
        let p = |r: &StateFn, o: &ObservableFn| dual_pairing(r, o).unwrap();
        prop_assert!(close(p(&rho, &o1), p(&rho, &o1.adjoint()).conj(), 1e-12));

        let a = C64::new(ar, ai);
        let b = C64::new(0.5, -1.0);
        let mixed = o1.with_blocks(combine(o1.blocks(), a, o2.blocks(), b)).unwrap();
        prop_assert!(close(p(&rho, &mixed), a * p(&rho, &o1) + b * p(&rho, &o2), 1e-12));

        let raw = StateFn::raw(g.clone(), q.clone(), combine(rho.blocks(), a, sigma.blocks(), b)).unwrap();
        prop_assert!(close(p(&raw, &o2), a.conj() * p(&rho, &o2) + b.conj() * p(&sigma, &o2), 1e-12));
    }

    #[test]
    fn states_from_every_operation_validate(seed: u64, t in 0.0f64..200.0) {
        let (g, q) = context();
        let mut fx = Fixtures::new(seed);
        let rho = fx.state(&g, &q, 3).unwrap();
        let aligned = fx.aligned_state(&g, &q).unwrap();
        let star = equilibrium_state(&aligned);
        let u = diagonalize_blocks(&star, None).unwrap();
        let produced = [
            evolve_state(&rho, t),
            equilibrium_state(&rho),
            transform_state(&star, &u).unwrap(),
            transform_state(&aligned, &u).unwrap(),
            StateFn::mixture(&[(0.3, &rho), (0.7, &aligned)]).unwrap(),
        ];
        for s in &produced {
            prop_assert!(s.validate().passed(), "{:?}", s.validate());
        }
    }

    #[test]
    fn plain_expectation_agrees_with_evolved_pairing(seed: u64, t in 0.0f64..0.5) {
        let (g, q) = context();
        let mut fx = Fixtures::new(seed);
        let rho = fx.state(&g, &q, 2).unwrap();
        let o = fx.observable(&g, &q).unwrap();
        let direct = dual_pairing(&evolve_state(&rho, t), &o).unwrap().re;
        let e = expectation(&rho, &o, t, QuadratureMode::Plain).unwrap();
        prop_assert!((e - direct).abs() <= 1e-12 * direct.abs().max(1.0), "{e} vs {direct}");
    }

    #[test]
    fn evolution_preserves_hermiticity_and_trace(seed: u64, t in -1e3f64..1e3) {
        let (g, q) = context();
        let rho = Fixtures::new(seed).state(&g, &q, 2).unwrap();
        let moved = evolve_state(&rho, t);
        prop_assert_eq!(moved.blocks().hermiticity_defect(), 0.0);
        prop_assert_eq!(moved.trace(), rho.trace());
        prop_assert!(liouvillian_apply(&equilibrium_state(&rho)).is_zero());
    }

    #[test]
    fn pointer_invariants_hold(seed: u64, three in any::<bool>()) {
        let g = Arc::new(SpectrumGrid::new(-1.0, 20.0, 5, 6).unwrap());
        let q = Arc::new(if three { QuantumNumbers::range(3).unwrap() } else { QuantumNumbers::parity() });
        let mut fx = Fixtures::new(seed);
        let rho = fx.aligned_state(&g, &q).unwrap();
        let o = fx.observable(&g, &q).unwrap();
        let d = pointer_diagnostics(&rho, None).unwrap();
        prop_assert!(d.off_diagonal < 1e-12);
        prop_assert!(d.unitarity < 1e-12);
        prop_assert!(d.eigenvalue_mismatch < 1e-12);
        prop_assert!(pairing_invariance(&d, &o).unwrap() < 1e-12);
        let ens = classical_equilibrium_density(&d.rho_pointer, &d.transform).unwrap();
        prop_assert!(ens.min_weight() >= 0.0);
        prop_assert!((ens.total_weight() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pointer_components_are_constants_of_the_motion(seed: u64, t in 0.0f64..1e3) {
        let (g, q) = context();
        let rho = Fixtures::new(seed).aligned_state(&g, &q).unwrap();
        let u = diagonalize_blocks(&equilibrium_state(&rho), None).unwrap();
        let before = transform_state(&rho, &u).unwrap();
        let after = transform_state(&evolve_state(&rho, t), &u).unwrap();
        for s in g.sectors() {
            let (x, y) = (before.blocks().diagonal_block(s), after.blocks().diagonal_block(s));
            for r in 0..q.len() {
                prop_assert_eq!(x[(r, r)], y[(r, r)]);
            }
        }
    }

    #[test]
    fn delta_well_eigenfunctions_have_parity(g in 0.1f64..5.0, omega in 1e-3f64..100.0, x in 0.0f64..30.0) {
        let m = DeltaWell::new(g).unwrap();
        prop_assert_eq!(m.even(omega, -x), m.even(omega, x));
        prop_assert_eq!(m.odd(omega, -x), -m.odd(omega, x));
        prop_assert_eq!(m.bound_state(-x), m.bound_state(x));
    }
}

#[test]
fn smooth_rotation_tracks_with_high_overlap() {
    let g = Arc::new(SpectrumGrid::new(-1.0, 20.0, 40, 8).unwrap());
    let q = Arc::new(QuantumNumbers::parity());
    let amps = Amplitudes::from_profiles(
        &g,
        &[C64::new(0.3, 0.0), C64::new(0.1, 0.0)],
        &[Profile::gaussian(6.0, 2.5), Profile::gaussian(9.0, 3.0)],
    )
    .unwrap();
    let rho = StateFn::pure(g, q, &amps).unwrap();
    let u = diagonalize_blocks(&equilibrium_state(&rho), None).unwrap();
    assert!(u.min_overlap() > 0.99, "{}", u.min_overlap());
}
