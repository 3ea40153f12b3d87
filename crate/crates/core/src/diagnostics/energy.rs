//! Energy functionals and the residuals of the energy identities along
//! computed trajectories.
//!
//! Residuals use the midpoint rule over each sample interval, evaluated at
//! the averaged state `ξ_{i+1/2} = (ξ_i + ξ_{i+1})/2`. For trajectories
//! recorded at every integrator step this matches the implicit midpoint
//! scheme, so every quadratic contribution cancels exactly and the residual
//! only measures the `F(u)` increment against `(f(u_{i+1/2}), u_{i+1} - u_i)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::{eval_big_f, NonlinearitySpec};
use crate::solver::{ProblemSpec, Trajectory};
use crate::spectral::{sobolev_norm_sq, to_grid, Basis, CoeffField, StatePair};

use super::norms::{e1_norm, energy_norm, modified_energy_norm};

/// `(F(u), 1)`.
pub fn potential(nonlinearity: &NonlinearitySpec, u: &CoeffField) -> f64 {
    if nonlinearity.is_zero() {
        return 0.0;
    }
    u.basis().integrate(&eval_big_f(nonlinearity, &to_grid(u)))
}

/// `(f(u)u, 1)`.
fn f_u_mass(nonlinearity: &NonlinearitySpec, u: &CoeffField) -> f64 {
    if nonlinearity.is_zero() {
        return 0.0;
    }
    u.basis()
        .integrate(&to_grid(u).mapv(|v| nonlinearity.f(v) * v))
}

/// `E(u) = ½‖ξ‖²_ℰ + (F(u), 1) - (g, u)`.
pub fn full_energy(problem: &ProblemSpec, xi: &StatePair) -> f64 {
    let e = energy_norm(xi);
    0.5 * e * e + potential(&problem.nonlinearity, &xi.u) - problem.projected_forcing().dot(&xi.u)
}

/// Cumulative `∫ ‖∂ₜu‖²` from the first sample, midpoint rule per interval.
pub fn dissipation_integral(traj: &Trajectory) -> Vec<f64> {
    let h = traj.spacing();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(traj.len());
    out.push(0.0);
    for w in traj.states().windows(2) {
        let mid = w[0].ut.axpy(1.0, &w[1].ut).scaled(0.5);
        acc += h * mid.dot(&mid);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    /// `|E(t_{i+1}) - E(t_i) + γ∫‖∂ₜu‖²|` per interval.
    pub per_interval: Vec<f64>,
    /// Signed accumulated residual from the first sample.
    pub cumulative: Vec<f64>,
    pub max_interval: f64,
    pub max_cumulative: f64,
    /// `max_cumulative` divided by the trajectory duration.
    pub per_unit_time: f64,
}

fn summarize(per_interval_signed: Vec<f64>, duration: f64) -> IdentityResidual {
    let mut cumulative = Vec::with_capacity(per_interval_signed.len() + 1);
    cumulative.push(0.0);
    let mut acc = 0.0;
    for r in &per_interval_signed {
        acc += r;
        cumulative.push(acc);
    }
    let max_cumulative = cumulative.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let per_interval: Vec<f64> = per_interval_signed.iter().map(|r| r.abs()).collect();
    IdentityResidual {
        max_interval: per_interval.iter().fold(0.0, |m: f64, r| m.max(*r)),
        per_interval,
        cumulative,
        max_cumulative,
        per_unit_time: if duration > 0.0 {
            max_cumulative / duration
        } else {
            0.0
        },
    }
}

/// Residual of `d/dt E(u) + γ‖∂ₜu‖² = 0` along the trajectory.
pub fn energy_identity_residual(traj: &Trajectory) -> IdentityResidual {
    let p = traj.problem();
    let h = traj.spacing();
    let energies: Vec<f64> = traj.states().iter().map(|xi| full_energy(p, xi)).collect();
    let signed = traj
        .states()
        .windows(2)
        .zip(energies.windows(2))
        .map(|(s, e)| {
            let mid = s[0].ut.axpy(1.0, &s[1].ut).scaled(0.5);
            e[1] - e[0] + p.gamma * h * mid.dot(&mid)
        })
        .collect();
    summarize(signed, traj.t_end() - traj.t0())
}

/// Largest increase `E(t_{i+1}) - E(t_i)` between consecutive samples,
/// zero when the energy never grows.
pub fn max_energy_increase(traj: &Trajectory) -> f64 {
    let p = traj.problem();
    traj.states()
        .windows(2)
        .map(|w| full_energy(p, &w[1]) - full_energy(p, &w[0]))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub t: f64,
    pub e_norm: f64,
    pub e_norm_modified: f64,
    pub full_energy: f64,
    pub e1_norm: f64,
    pub dissipation_accum: f64,
    /// Signed accumulated energy-identity residual up to `t`.
    pub identity_residual: f64,
}

pub fn energy_reports(traj: &Trajectory) -> Vec<EnergyReport> {
    let p = traj.problem();
    let growth = p.nonlinearity.growth_exponent();
    let diss = dissipation_integral(traj);
    let res = energy_identity_residual(traj);
    traj.states()
        .iter()
        .enumerate()
        .map(|(i, xi)| EnergyReport {
            t: traj.time(i),
            e_norm: energy_norm(xi),
            e_norm_modified: modified_energy_norm(xi, growth),
            full_energy: full_energy(p, xi),
            e1_norm: e1_norm(xi),
            dissipation_accum: diss[i],
            identity_residual: res.cumulative[i],
        })
        .collect()
}

/// Multiplier parameters for the perturbed energy identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbedParams {
    pub alpha: f64,
    pub kappa: f64,
}

impl PerturbedParams {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be positive, got {alpha}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", format!("must be positive, got {kappa}")));
        }
        if 4.0 * kappa > alpha * (1.0 + 1e-12) {
            return Err(Error::param(
                "kappa",
                format!("4κ ≤ α violated: κ = {kappa}, α = {alpha}"),
            ));
        }
        Ok(PerturbedParams { alpha, kappa })
    }

    /// `α = γ/4`, `κ = α/4`.
    pub fn default_for(gamma: f64) -> Self {
        let alpha = gamma / 4.0;
        PerturbedParams {
            alpha,
            kappa: alpha / 4.0,
        }
    }
}

/// `E_α(u) = E(u) + α(u, ∂ₜu) + ½αγ‖u‖²`.
pub fn e_alpha(problem: &ProblemSpec, xi: &StatePair, prm: PerturbedParams) -> f64 {
    full_energy(problem, xi)
        + prm.alpha * xi.u.dot(&xi.ut)
        + 0.5 * prm.alpha * problem.gamma * xi.u.dot(&xi.u)
}

/// The quadratic form `G_α`.
pub fn g_alpha_form(gamma: f64, xi: &StatePair, prm: PerturbedParams) -> f64 {
    let PerturbedParams { alpha, kappa } = prm;
    (gamma - alpha - 0.5 * kappa) * xi.ut.dot(&xi.ut)
        + (alpha - 0.5 * kappa) * sobolev_norm_sq(&xi.u, 1.0)
        - kappa * alpha * xi.u.dot(&xi.ut)
        - 0.5 * gamma * alpha * kappa * xi.u.dot(&xi.u)
}

/// `(Φ_α(u), 1)` with `Φ_α(u) = αf(u)u - κF(u)`.
pub fn phi_alpha_mass(nonlinearity: &NonlinearitySpec, u: &CoeffField, prm: PerturbedParams) -> f64 {
    prm.alpha * f_u_mass(nonlinearity, u) - prm.kappa * potential(nonlinearity, u)
}

/// `(g_α, u)` with `g_α = (κ - α)g`.
pub fn g_alpha_pairing(problem: &ProblemSpec, u: &CoeffField, prm: PerturbedParams) -> f64 {
    (prm.kappa - prm.alpha) * problem.projected_forcing().dot(u)
}

/// Sum of the non-derivative terms: `κE_α + G_α + (Φ_α,1) + (g_α,u)`.
fn perturbed_rate(problem: &ProblemSpec, xi: &StatePair, prm: PerturbedParams) -> f64 {
    prm.kappa * e_alpha(problem, xi, prm)
        + g_alpha_form(problem.gamma, xi, prm)
        + phi_alpha_mass(&problem.nonlinearity, &xi.u, prm)
        + g_alpha_pairing(problem, &xi.u, prm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbedEnergyReport {
    pub t: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub e_alpha: f64,
    pub g_alpha_form: f64,
    pub phi_alpha_mass: f64,
    pub g_alpha_pairing: f64,
    /// Signed accumulated residual of the differential identity up to `t`.
    pub residual: f64,
    /// Residual of the integrated, `e^{κs}`-weighted identity on `[t₀, t]`.
    pub integrated_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedSeries {
    pub reports: Vec<PerturbedEnergyReport>,
    pub identity: IdentityResidual,
    pub max_integrated: f64,
}

/// Evaluates `E_α, G_α, (Φ_α,1), (g_α,u)` at every sample and the residuals of
/// `d/dt E_α + κE_α + G_α + (Φ_α,1) + (g_α,u) = 0` (centered over each
/// interval) and of its integrated form with weight `e^{κs}`.
pub fn perturbed_energy_report(traj: &Trajectory, alpha: f64, kappa: f64) -> Result<PerturbedSeries> {
    let prm = PerturbedParams::new(alpha, kappa)?;
    let p = traj.problem();
    let h = traj.spacing();
    let t0 = traj.t0();
    let ea: Vec<f64> = traj.states().iter().map(|xi| e_alpha(p, xi, prm)).collect();
    let mut signed = Vec::with_capacity(traj.len());
    let mut integrated = Vec::with_capacity(traj.len());
    integrated.push(0.0);
    let mut weighted = 0.0;
    for (i, s) in traj.states().windows(2).enumerate() {
        let mid = s[0].midpoint(&s[1]);
        let rate = perturbed_rate(p, &mid, prm);
        signed.push(ea[i + 1] - ea[i] + h * rate);
        let tm = traj.time(i) + 0.5 * h - t0;
        let source = rate - prm.kappa * e_alpha(p, &mid, prm);
        weighted += h * (prm.kappa * tm).exp() * source;
        let t1 = traj.time(i + 1) - t0;
        integrated.push((prm.kappa * t1).exp() * ea[i + 1] - ea[0] + weighted);
    }
    let identity = summarize(signed, traj.t_end() - t0);
    let reports = traj
        .states()
        .iter()
        .enumerate()
        .map(|(i, xi)| PerturbedEnergyReport {
            t: traj.time(i),
            alpha,
            kappa,
            e_alpha: ea[i],
            g_alpha_form: g_alpha_form(p.gamma, xi, prm),
            phi_alpha_mass: phi_alpha_mass(&p.nonlinearity, &xi.u, prm),
            g_alpha_pairing: g_alpha_pairing(p, &xi.u, prm),
            residual: identity.cumulative[i],
            integrated_residual: integrated[i],
        })
        .collect();
    let max_integrated = integrated.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(PerturbedSeries {
        reports,
        identity,
        max_integrated,
    })
}

/// Exact bounds `K₁‖ξ‖² ≤ G_α(ξ) ≤ K₂‖ξ‖²` over the basis, from the 2×2
/// form of each mode in the coordinates `(√λ u, ∂ₜu)`.
pub fn g_alpha_bounds(basis: &Basis, gamma: f64, prm: PerturbedParams) -> (f64, f64) {
    let PerturbedParams { alpha, kappa } = prm;
    let mut k1 = f64::INFINITY;
    let mut k2 = f64::NEG_INFINITY;
    for &l in basis.eigenvalues() {
        let a = (alpha - 0.5 * kappa) - 0.5 * gamma * alpha * kappa / l;
        let d = gamma - alpha - 0.5 * kappa;
        let b = -0.5 * kappa * alpha / l.sqrt();
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        k1 = k1.min(mean - rad);
        k2 = k2.max(mean + rad);
    }
    (k1, k2)
}

/// `min G_α(ξ)/‖ξ‖²_ℰ` over random unit states.
pub fn g_alpha_sampled_min(basis: &std::sync::Arc<Basis>, gamma: f64, prm: PerturbedParams, samples: usize, seed: u64) -> f64 {
    let mut rng = crate::random::rng(seed);
    (0..samples)
        .map(|i| {
            // alternate between smooth and rough draws to probe both ends of the spectrum
            let s = if i % 2 == 0 { 1.0 } else { 0.0 };
            let xi = StatePair {
                u: crate::random::random_field(basis, &mut rng, 1.0 + s, basis.total_modes()),
                ut: crate::random::random_field(basis, &mut rng, s, basis.total_modes()),
            };
            let e = energy_norm(&xi);
            let unit = xi.scaled(1.0 / e);
            g_alpha_form(gamma, &unit, prm)
        })
        .fold(f64::INFINITY, f64::min)
}
