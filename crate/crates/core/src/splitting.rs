//! Splitting `u = v + w` of a nonlinear trajectory into the free damped
//! linear evolution `v` of the initial data and the remainder `w`, which
//! starts from zero and is driven by `g - f(u)`.

use serde::Serialize;

use crate::diagnostics::{e_delta_norm, energy_norm, envelope_decay_fit, FitReport};
use crate::error::{Error, Result};
use crate::solver::{linear_evolve, Dynamics, EvolveOptions, LinearForcing, ModePropagator, Trajectory};
use crate::spectral::{CoeffField, StatePair};

/// The linear part `v` (exact per-mode propagation of `ξ_u(0)` without
/// forcing) and the remainder `w = u - v`, on the sample times of `traj`.
/// Both returned trajectories keep the problem of `traj` for reference.
pub fn split(traj: &Trajectory) -> Result<(Trajectory, Trajectory)> {
    let basis = traj.basis();
    let gamma = traj.problem().gamma;
    let props: Vec<ModePropagator> = basis
        .eigenvalues()
        .iter()
        .map(|&l| ModePropagator::new(l, gamma, traj.spacing()))
        .collect();
    let first = traj.state(0);
    let mut u = first.u.coeffs().to_vec();
    let mut w = first.ut.coeffs().to_vec();
    let mut v_samples = Vec::with_capacity(traj.len());
    let mut w_samples = Vec::with_capacity(traj.len());
    for (i, xi) in traj.states().iter().enumerate() {
        if i > 0 {
            for k in 0..u.len() {
                let (a, b) = props[k].apply(u[k], w[k], 0.0);
                u[k] = a;
                w[k] = b;
            }
        }
        let v = StatePair {
            u: CoeffField::from_coeffs(basis, u.clone())?,
            ut: CoeffField::from_coeffs(basis, w.clone())?,
        };
        w_samples.push(xi.sub(&v));
        v_samples.push(v);
    }
    Ok((
        traj.with_samples(Dynamics::LinearExact, v_samples),
        traj.with_samples(Dynamics::LinearExact, w_samples),
    ))
}

/// Largest `‖ξ_w(t) - ξ_ŵ(t)‖_ℰ` where `ŵ` integrates
/// `∂ₜ²ŵ + γ∂ₜŵ - Δŵ = P_N g - P_N f(u)` from zero with the linear
/// propagator. Needs every solver step recorded.
pub fn remainder_consistency(traj: &Trajectory, w_traj: &Trajectory) -> Result<f64> {
    if traj.stride() != 1 {
        return Err(Error::param(
            "record_stride",
            "the remainder check needs every solver step recorded",
        ));
    }
    let p = traj.problem();
    let g = p.projected_forcing();
    let forcing: Vec<CoeffField> = traj
        .states()
        .iter()
        .map(|xi| &g - &p.nonlinear_term(&xi.u))
        .collect();
    let total = traj.t_end() - traj.t0();
    let steps = traj.len() - 1;
    let lin = linear_evolve(
        traj.basis(),
        p.gamma,
        LinearForcing::Sampled(&forcing),
        &StatePair::zeros(traj.basis()),
        traj.dt() * steps as f64,
        traj.dt(),
        EvolveOptions::default(),
    )?;
    debug_assert!((lin.t_end() - total).abs() <= 1e-9 * total.max(1.0));
    Ok(lin
        .states()
        .iter()
        .zip(w_traj.states())
        .map(|(a, b)| energy_norm(&a.sub(b)))
        .fold(0.0, f64::max))
}

/// `δ = 3κ/(10 + 3κ)` for subcritical defect `κ`.
pub fn regularity_delta(kappa_sub: f64) -> f64 {
    3.0 * kappa_sub / (10.0 + 3.0 * kappa_sub)
}

/// Largest admissible smoothing exponent, kept strictly below `1/2`.
pub const DELTA_CAP: f64 = 0.5 - 1e-9;

/// Allowed growth of the tail-half maximum of `‖ξ_w‖_{ℰ_δ}` over the
/// first-half maximum.
pub const W_GROWTH_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub kappa_sub: f64,
    /// Raw `3κ/(10+3κ)`.
    pub delta: f64,
    /// `min(δ, 1/2 - 1e-9)`, used for the norms below.
    pub delta_eff: f64,
    /// `10/(10+3κ)`.
    pub theta: f64,
    /// Envelope fit of `‖ξ_v(t)‖_ℰ`; absent when `v` vanishes.
    pub v_decay: Option<FitReport>,
    pub v_e_series: Vec<(f64, f64)>,
    pub w_e_delta_series: Vec<(f64, f64)>,
    pub w_sup: f64,
    pub first_half_max: f64,
    pub tail_half_max: f64,
    pub w_bounded: bool,
    /// `max ‖ξ_u - ξ_v - ξ_w‖_ℰ` over the samples.
    pub reconstruction_error: f64,
}

pub fn regularity_gain_report(traj: &Trajectory, kappa_sub: f64) -> Result<SplitReport> {
    if !(kappa_sub > 0.0 && kappa_sub <= 4.0) {
        return Err(Error::param(
            "kappa_sub",
            format!("must lie in (0, 4], got {kappa_sub}"),
        ));
    }
    let delta = regularity_delta(kappa_sub);
    let delta_eff = delta.min(DELTA_CAP);
    let (v, w) = split(traj)?;
    let times = traj.times();
    let v_e_series: Vec<(f64, f64)> = times
        .iter()
        .zip(v.states())
        .map(|(t, xi)| (*t, energy_norm(xi)))
        .collect();
    let w_e_delta_series: Vec<(f64, f64)> = times
        .iter()
        .zip(w.states())
        .map(|(t, xi)| (*t, e_delta_norm(xi, delta_eff)))
        .collect();
    let v_decay = if v_e_series.iter().all(|(_, e)| *e > 0.0) {
        envelope_decay_fit(&v_e_series).ok()
    } else {
        None
    };
    let half = w_e_delta_series.len() / 2;
    let max_of = |s: &[(f64, f64)]| s.iter().map(|p| p.1).fold(0.0, f64::max);
    let first_half_max = max_of(&w_e_delta_series[..half.max(1)]);
    let tail_half_max = max_of(&w_e_delta_series[half..]);
    let w_sup = first_half_max.max(tail_half_max);
    let reconstruction_error = traj
        .states()
        .iter()
        .zip(v.states().iter().zip(w.states()))
        .map(|(u, (a, b))| energy_norm(&u.sub(a).sub(b)))
        .fold(0.0, f64::max);
    Ok(SplitReport {
        kappa_sub,
        delta,
        delta_eff,
        theta: 10.0 / (10.0 + 3.0 * kappa_sub),
        v_decay,
        v_e_series,
        w_bounded: w_sup.is_finite() && tail_half_max <= (1.0 + W_GROWTH_TOLERANCE) * first_half_max,
        w_e_delta_series,
        w_sup,
        first_half_max,
        tail_half_max,
        reconstruction_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::NonlinearitySpec;
    use crate::solver::{evolve, evolve_with, ProblemSpec};
    use crate::spectral::make_basis;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn quintic_run(stride: usize) -> Trajectory {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let mut rng = crate::random::rng(17);
        let x = crate::random::random_state(&b, &mut rng, 8, 1.5);
        evolve_with(&p, &x, 2.0, 1e-3, EvolveOptions { record_stride: stride }).unwrap()
    }

    #[test]
    fn linear_problem_remainder_is_second_order() {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap());
        let mut rng = crate::random::rng(3);
        let x = crate::random::random_state(&b, &mut rng, 8, 1.0);
        // w only carries the implicit-midpoint phase error of the linear flow
        let worst = |dt: f64| {
            let t = evolve(&p, &x, 1.0, dt).unwrap();
            let (_, w) = split(&t).unwrap();
            w.states().iter().map(energy_norm).fold(0.0, f64::max)
        };
        let (a, b) = (worst(1e-3), worst(5e-4));
        assert!(a < 1e-5, "{a}");
        assert!((a / b - 4.0).abs() < 0.2, "{}", a / b);
    }

    #[test]
    fn zero_data_gives_zero_linear_part() {
        let b = make_basis(1, 4, 4).unwrap();
        let g = CoeffField::mode(&b, 0);
        let p = Arc::new(ProblemSpec::new(&b, 1.0, g, NonlinearitySpec::quintic(), 4).unwrap());
        let t = evolve(&p, &StatePair::zeros(&b), 0.5, 1e-2).unwrap();
        let (v, w) = split(&t).unwrap();
        for i in 0..t.len() {
            assert!(v.state(i).u.is_zero() && v.state(i).ut.is_zero());
            assert_eq!(w.state(i), t.state(i));
        }
    }

    #[test]
    fn reconstruction_is_exact() {
        let t = quintic_run(10);
        let r = regularity_gain_report(&t, 1.0).unwrap();
        assert!(r.reconstruction_error <= 1e-10, "{}", r.reconstruction_error);
        let (_, w) = split(&t).unwrap();
        assert_eq!(energy_norm(w.state(0)), 0.0);
    }

    #[test]
    fn remainder_solves_forced_linear_problem() {
        let t = quintic_run(1);
        let (_, w) = split(&t).unwrap();
        let dev = remainder_consistency(&t, &w).unwrap();
        assert!(dev < 1e-5, "{dev}");
    }

    #[test]
    fn delta_values() {
        assert_abs_diff_eq!(regularity_delta(1.0), 3.0 / 13.0);
        assert_abs_diff_eq!(regularity_delta(4.0), 6.0 / 11.0);
        let t = quintic_run(10);
        let r = regularity_gain_report(&t, 4.0).unwrap();
        assert_eq!(r.delta_eff, DELTA_CAP);
        assert!(regularity_gain_report(&t, 0.0).is_err());
        assert!(regularity_gain_report(&t, 4.5).is_err());
    }

    #[test]
    fn v_decays_at_a_positive_rate() {
        let t = quintic_run(10);
        let r = regularity_gain_report(&t, 1.0).unwrap();
        assert!(r.v_decay.unwrap().rate > 0.0);
    }
}
