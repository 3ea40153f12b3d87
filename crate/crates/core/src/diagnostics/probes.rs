use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{evolve_with, EvolveOptions, ProblemSpec, Trajectory};
use crate::spectral::{sobolev_norm, sobolev_norm_sq, StatePair};

use super::norms::{energy_norm, lp_norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DependenceSample {
    pub t: f64,
    pub difference: f64,
    pub majorant: f64,
    /// `1 + ‖u_a‖⁴_{L¹²} + ‖u_b‖⁴_{L¹²}`.
    pub kernel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceReport {
    pub series: Vec<DependenceSample>,
    /// Smallest `c` with `d/dt log‖δξ‖ ≤ c·kernel` on every sample interval.
    pub c_fit: f64,
    pub max_difference: f64,
    pub holds: bool,
}

/// Evolves two initial states and compares their distance in `ℰ` with the
/// Gronwall majorant `‖δξ(0)‖ exp(c ∫ (1 + ‖u_a‖⁴_{L¹²} + ‖u_b‖⁴_{L¹²}))`.
///
/// The growth rate is measured per sample interval as
/// `log(‖δξ_{i+1}‖/‖δξ_i‖)/h`; `c` is the smallest constant dominating it
/// against the interval-averaged kernel, so the majorant is tight on at least
/// one interval.
pub fn continuous_dependence_probe(
    problem: &Arc<ProblemSpec>,
    xi_a: &StatePair,
    xi_b: &StatePair,
    total: f64,
    dt: f64,
    opts: EvolveOptions,
) -> Result<DependenceReport> {
    if !xi_a.same_basis(xi_b) || !xi_a.u.basis().as_ref().eq(problem.basis.as_ref()) {
        return Err(Error::BasisMismatch);
    }
    let ta = evolve_with(problem, xi_a, total, dt, opts)?;
    let tb = evolve_with(problem, xi_b, total, dt, opts)?;
    Ok(compare_trajectories(&ta, &tb))
}

pub fn compare_trajectories(ta: &Trajectory, tb: &Trajectory) -> DependenceReport {
    let h = ta.spacing();
    let n = ta.len().min(tb.len());
    let diff: Vec<f64> = (0..n)
        .map(|i| energy_norm(&ta.state(i).sub(tb.state(i))))
        .collect();
    let kernel: Vec<f64> = (0..n)
        .map(|i| 1.0 + lp_norm(&ta.state(i).u, 12.0).powi(4) + lp_norm(&tb.state(i).u, 12.0).powi(4))
        .collect();
    let mut c_fit = 0.0f64;
    if diff[0] > 0.0 {
        for i in 0..n - 1 {
            if diff[i] > 0.0 && diff[i + 1] > 0.0 {
                let rate = (diff[i + 1] / diff[i]).ln() / h;
                let k = 0.5 * (kernel[i] + kernel[i + 1]);
                c_fit = c_fit.max(rate / k);
            }
        }
    }
    let mut integral = 0.0;
    let mut series = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            integral += 0.5 * h * (kernel[i - 1] + kernel[i]);
        }
        series.push(DependenceSample {
            t: ta.time(i),
            difference: diff[i],
            majorant: diff[0] * (c_fit * integral).exp(),
            kernel: kernel[i],
        });
    }
    let holds = series
        .iter()
        .all(|s| s.difference <= s.majorant * (1.0 + 1e-10));
    DependenceReport {
        max_difference: diff.iter().fold(0.0, |m: f64, d| m.max(*d)),
        series,
        c_fit,
        holds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelfConvergence {
    pub n: usize,
    /// `‖ξ_{u_n}(T) - ξ_{u_{2n}}(T)‖_ℰ`.
    pub difference: f64,
}

/// Distances at time `T` between the `n`- and `2n`-mode Galerkin solutions
/// started from `P_n ξ₀` and `P_{2n} ξ₀`, for each `n` in `n_list`.
pub fn galerkin_self_convergence(
    problem: &Arc<ProblemSpec>,
    xi0: &StatePair,
    total: f64,
    dt: f64,
    n_list: &[usize],
) -> Result<Vec<SelfConvergence>> {
    if n_list.is_empty() {
        return Err(Error::Empty("n_list"));
    }
    let total_modes = problem.basis.total_modes();
    if let Some(&n) = n_list.iter().find(|&&n| n == 0 || 2 * n > total_modes) {
        return Err(Error::ModeOutOfRange {
            n: 2 * n,
            total: total_modes,
        });
    }
    let final_state = |n: usize| -> Result<StatePair> {
        let pn = Arc::new(problem.with_galerkin_n(n)?);
        Ok(crate::solver::evolve(&pn, xi0, total, dt)?.last().clone())
    };
    n_list
        .par_iter()
        .map(|&n| {
            Ok(SelfConvergence {
                n,
                difference: energy_norm(&final_state(n)?.sub(&final_state(2 * n)?)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H2Sample {
    pub t: f64,
    /// `‖Δu‖²`.
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Report {
    pub series: Vec<H2Sample>,
    /// Constant in front of `‖g‖²`.
    pub c_forcing: f64,
    /// Constant in front of `‖ξ_v‖²_ℰ`.
    pub c_velocity: f64,
    /// Constant in front of `‖ξ_u‖²_ℰ`, twice the certified lower bound of `-f'`.
    pub c_energy: f64,
    pub max_ratio: f64,
    pub holds: bool,
}

/// Elliptic bound `‖Δu‖² ≤ C_g‖g‖² + C_v‖ξ_v‖²_ℰ + 2K‖ξ_u‖²_ℰ` with
/// `v = ∂ₜu`, `ξ_v = (∂ₜu, ∂ₜ²u)` and `∂ₜ²u` taken from the equation.
///
/// Testing `-Δu + f(u) = g - ∂ₜv - γv` against `-Δu` and using
/// `f' ≥ -K` gives `‖Δu‖² ≤ ‖g - ∂ₜv - γv‖² + 2K‖∇u‖²`, hence
/// `C_g = 3` and `C_v = 3 max(1, γ²/λ₁)`.
pub fn h2_bound_check(traj: &Trajectory, k_cert: f64) -> Result<H2Report> {
    if !(k_cert >= 0.0 && k_cert.is_finite()) {
        return Err(Error::param("K_cert", format!("must be nonnegative, got {k_cert}")));
    }
    let p = traj.problem();
    let l1 = p.basis.eigenvalue(0);
    let c_forcing = 3.0;
    let c_velocity = 3.0 * (p.gamma * p.gamma / l1).max(1.0);
    let c_energy = 2.0 * k_cert;
    let g2 = sobolev_norm_sq(&p.projected_forcing(), 0.0);
    let mut max_ratio = 0.0f64;
    let series: Vec<H2Sample> = traj
        .states()
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let acc = p.acceleration(xi);
            let xv = sobolev_norm_sq(&xi.ut, 1.0) + sobolev_norm_sq(&acc, 0.0);
            let xu = energy_norm(xi).powi(2);
            let lhs = sobolev_norm_sq(&xi.u, 2.0);
            let rhs = c_forcing * g2 + c_velocity * xv + c_energy * xu;
            if rhs > 0.0 {
                max_ratio = max_ratio.max(lhs / rhs);
            }
            H2Sample {
                t: traj.time(i),
                lhs,
                rhs,
                holds: lhs <= rhs * (1.0 + 1e-10) + 1e-300,
            }
        })
        .collect();
    Ok(H2Report {
        holds: series.iter().all(|s| s.holds),
        series,
        c_forcing,
        c_velocity,
        c_energy,
        max_ratio,
    })
}

/// `‖∂ₜu(t)‖_{H^{-β}}` at every sample.
pub fn dtu_negative_norm_series(traj: &Trajectory, beta: f64) -> Result<Vec<(f64, f64)>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param("beta", format!("must lie in (0, 1], got {beta}")));
    }
    Ok(traj
        .states()
        .iter()
        .enumerate()
        .map(|(i, xi)| (traj.time(i), sobolev_norm(&xi.ut, -beta)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::NonlinearitySpec;
    use crate::solver::evolve;
    use crate::spectral::{make_basis, CoeffField};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_data_never_separate() {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let mut rng = crate::random::rng(1);
        let x = crate::random::random_state(&b, &mut rng, 8, 1.0);
        let r = continuous_dependence_probe(&p, &x, &x, 0.5, 0.01, EvolveOptions::default()).unwrap();
        assert!(r.series.iter().all(|s| s.difference == 0.0 && s.majorant == 0.0));
        assert!(r.holds);
    }

    #[test]
    fn linear_difference_does_not_grow() {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 0.5, NonlinearitySpec::zero()).unwrap());
        let mut rng = crate::random::rng(2);
        let a = crate::random::random_state(&b, &mut rng, 8, 1.0);
        let d = crate::random::random_state(&b, &mut rng, 8, 1e-3);
        let r = continuous_dependence_probe(&p, &a, &a.add(&d), 2.0, 0.01, EvolveOptions::default()).unwrap();
        assert_eq!(r.c_fit, 0.0);
        assert!(r.holds);
        assert!(r.max_difference <= r.series[0].difference * (1.0 + 1e-12));
    }

    #[test]
    fn mismatched_bases_rejected() {
        let b = make_basis(1, 8, 4).unwrap();
        let c = make_basis(1, 6, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap());
        let r = continuous_dependence_probe(&p, &StatePair::zeros(&b), &StatePair::zeros(&c), 1.0, 0.1, EvolveOptions::default());
        assert_eq!(r.unwrap_err(), Error::BasisMismatch);
    }

    #[test]
    fn band_limited_linear_runs_agree() {
        let b = make_basis(1, 16, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap());
        let mut rng = crate::random::rng(4);
        let x = crate::random::random_state(&b, &mut rng, 4, 1.0);
        let r = galerkin_self_convergence(&p, &x, 0.5, 0.01, &[4, 8]).unwrap();
        assert!(r.iter().all(|s| s.difference <= 1e-14));
        assert!(galerkin_self_convergence(&p, &x, 0.5, 0.01, &[16]).is_err());
    }

    #[test]
    fn h2_zero_state() {
        let b = make_basis(1, 4, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let t = evolve(&p, &StatePair::zeros(&b), 0.1, 0.01).unwrap();
        let r = h2_bound_check(&t, 0.0).unwrap();
        assert!(r.holds);
        assert!(r.series.iter().all(|s| s.lhs == 0.0 && s.rhs == 0.0));
    }

    #[test]
    fn h2_linear_single_mode() {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap());
        let x = StatePair::new(CoeffField::mode(&b, 2), CoeffField::zeros(&b)).unwrap();
        let t = evolve(&p, &x, 2.0, 0.01).unwrap();
        let r = h2_bound_check(&t, 0.0).unwrap();
        assert!(r.holds, "max ratio {}", r.max_ratio);
    }

    #[test]
    fn dtu_norm_examples() {
        let b = make_basis(1, 4, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap());
        let x = StatePair::new(CoeffField::zeros(&b), CoeffField::mode(&b, 1)).unwrap();
        let t = evolve(&p, &x, 0.01, 0.01).unwrap();
        let s = dtu_negative_norm_series(&t, 1.0).unwrap();
        assert_abs_diff_eq!(s[0].1, 0.5, epsilon = 1e-15);
        assert!(dtu_negative_norm_series(&t, 0.0).is_err());
        let z = evolve(&p, &StatePair::zeros(&b), 0.01, 0.01).unwrap();
        assert_eq!(dtu_negative_norm_series(&z, 0.5).unwrap()[1].1, 0.0);
    }
}
