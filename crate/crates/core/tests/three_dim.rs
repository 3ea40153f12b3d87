use std::sync::Arc;

use qwl_core::diagnostics::{energy_identity_residual, energy_norm, max_energy_increase};
use qwl_core::random::{random_state, rng};
use qwl_core::solver::{evolve, ProblemSpec};
use qwl_core::spectral::{make_basis, CoeffField};
use qwl_core::NonlinearitySpec;

#[test]
fn cube_energy_identity_and_decay() {
    let b = make_basis(3, 4, 4).unwrap();
    assert_eq!(b.total_modes(), 64);
    let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
    let xi0 = random_state(&b, &mut rng(9), 10, 1.0);
    let t = evolve(&p, &xi0, 0.5, 5e-3).unwrap();
    let id = energy_identity_residual(&t);
    assert!(id.per_unit_time < 1e-5, "{}", id.per_unit_time);
    assert!(max_energy_increase(&t) < 1e-6);
    assert!(energy_norm(t.last()) < energy_norm(&xi0));
}

#[test]
fn cube_stationary_forcing_response() {
    // -Δu = g for u = e_1 on the lowest mode, with f = 0 the state stays put.
    let b = make_basis(3, 3, 4).unwrap();
    let lambda = b.eigenvalue(0);
    assert!((lambda - 3.0).abs() < 1e-14);
    let g = CoeffField::mode(&b, 0).scaled(lambda);
    let p = Arc::new(ProblemSpec::new(&b, 1.0, g, NonlinearitySpec::zero(), b.total_modes()).unwrap());
    let mut xi0 = qwl_core::StatePair::zeros(&b);
    xi0.u = CoeffField::mode(&b, 0);
    let t = evolve(&p, &xi0, 1.0, 1e-2).unwrap();
    assert!(energy_norm(&t.last().sub(&xi0)) < 1e-12);
}
