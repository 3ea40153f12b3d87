//! Seeded random band-limited fields and states.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::diagnostics::energy_norm;
use crate::spectral::{Basis, CoeffField, StatePair};

pub use rand::SeedableRng;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian coefficients weighted by `λ_k^{-s/2}`, restricted to the first
/// `active` modes of the sorted enumeration.
pub fn random_field<R: Rng>(basis: &Arc<Basis>, rng: &mut R, s: f64, active: usize) -> CoeffField {
    let coeffs = basis
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let z: f64 = StandardNormal.sample(rng);
            if k < active {
                z * l.powf(-0.5 * s)
            } else {
                0.0
            }
        })
        .collect();
    CoeffField::from_coeffs(basis, coeffs).expect("finite gaussian draws")
}

/// Random state on the first `active` modes rescaled to energy norm `target`.
pub fn random_state<R: Rng>(basis: &Arc<Basis>, rng: &mut R, active: usize, target: f64) -> StatePair {
    let active = active.clamp(1, basis.total_modes());
    let xi = StatePair {
        u: random_field(basis, rng, 2.0, active),
        ut: random_field(basis, rng, 1.0, active),
    };
    let e = energy_norm(&xi);
    if e == 0.0 {
        return xi;
    }
    xi.scaled(target / e)
}

/// Independent random states for an ensemble; member `k` uses seed `seed + k`.
pub fn random_ensemble(basis: &Arc<Basis>, seed: u64, members: usize, active: usize, target: f64) -> Vec<StatePair> {
    (0..members)
        .map(|k| random_state(basis, &mut rng(seed.wrapping_add(k as u64)), active, target))
        .collect()
}
