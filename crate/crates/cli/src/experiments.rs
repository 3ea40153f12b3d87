//! Experiment drivers. Each one runs core diagnostics, writes its CSV
//! artifacts and returns a [`Summary`] of metrics and threshold checks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use qwl_core::attractor::{
    absorb_time, attraction_curve, attractor_strichartz_bound, dissipation_saturation, e1_bound,
    omega_limit_sample, relative_drift, CloudNorm, TrajectoryStore, DOUBLING_TOLERANCE,
    M_ENERGY_HELD_OUT_SLACK,
};
use qwl_core::diagnostics::{
    continuous_dependence_probe, dtu_negative_norm_series, energy_identity_residual, energy_norm,
    energy_reports, g_alpha_bounds, g_alpha_sampled_min, galerkin_self_convergence, h2_bound_check,
    interpolation_check, loglog_slope, max_energy_increase, perturbed_energy_report,
    sobolev_l6_constant, strichartz_ratio_probe, PerturbedParams, ProbeOptions,
};
use qwl_core::nonlinearity::{certify, AssumptionId};
use qwl_core::output::{
    to_file, write_cloud_csv, write_curve_csv, write_energy_csv, write_split_csv, write_table,
    write_trajectory_csv,
};
use qwl_core::random::{random_ensemble, random_state, rng};
use qwl_core::solver::{evolve_with, EvolveOptions, Trajectory};
use qwl_core::splitting::{regularity_gain_report, W_GROWTH_TOLERANCE};
use qwl_core::Error as CoreError;

use crate::config::{ExperimentConfig, ExperimentName, InitialConfig, Setup};
use crate::error::CliError;

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
pub const ORDER_RANGE: (f64, f64) = (1.8, 2.2);
pub const SCALE_DRIFT_TOL: f64 = 1e-12;
pub const RECONSTRUCTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: &'static str,
    pub metrics: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Summary {
    fn new(name: ExperimentName) -> Self {
        Summary {
            experiment: name.as_str(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            pass: true,
        }
    }

    fn metric(&mut self, key: &str, v: impl Serialize) {
        self.metrics.insert(key.to_string(), json!(v));
    }

    fn check(&mut self, name: &str, value: f64, limit: Option<f64>, pass: bool) {
        self.pass &= pass;
        self.checks.push(Check {
            name: name.to_string(),
            value,
            limit,
            pass,
        });
    }

    /// `value ≤ limit`.
    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.check(name, value, Some(limit), value <= limit);
    }
}

const PARAM: &str = "experiment.parameters";

fn param_err(name: &str, reason: impl Into<String>) -> CliError {
    CliError::validation(&format!("{PARAM}.{name}"), reason)
}

/// Re-labels parameter errors raised by core as validation errors on `name`.
fn as_param(name: &'static str) -> impl Fn(CoreError) -> CliError {
    move |e| match e.root() {
        CoreError::InvalidParameter { .. } | CoreError::ModeOutOfRange { .. } | CoreError::Empty(_) => {
            param_err(name, e.to_string())
        }
        _ => CliError::Run(e),
    }
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(param_err(name, format!("must be positive, got {v}")))
    }
}

fn n_list(cfg: &ExperimentConfig, setup: &Setup, factor: usize) -> Result<Vec<usize>, CliError> {
    let list = cfg.experiment.parameters.n_list.clone().unwrap_or_else(|| vec![8, 16, 32]);
    let total = setup.basis.total_modes();
    if list.is_empty() {
        return Err(param_err("n_list", "must not be empty"));
    }
    if let Some(n) = list.iter().find(|&&n| n == 0 || factor * n > total) {
        return Err(param_err(
            "n_list",
            format!("entry {n} needs {} modes, the basis has {total}", factor * n),
        ));
    }
    if list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(param_err("n_list", "must be strictly ascending"));
    }
    Ok(list)
}

fn kappa_sub(cfg: &ExperimentConfig, setup: &Setup) -> Result<f64, CliError> {
    let k = match cfg.experiment.parameters.kappa_sub {
        Some(k) => k,
        None => setup.problem.nonlinearity.subcritical_defect().ok_or_else(|| {
            param_err("kappa_sub", "required when the nonlinearity has no subcritical defect")
        })?,
    };
    if !(k > 0.0 && k <= 4.0) {
        return Err(param_err("kappa_sub", format!("must lie in (0, 4], got {k}")));
    }
    Ok(k)
}

fn perturbed_params(cfg: &ExperimentConfig) -> Result<PerturbedParams, CliError> {
    let p = &cfg.experiment.parameters;
    let d = PerturbedParams::default_for(cfg.gamma);
    PerturbedParams::new(p.alpha.unwrap_or(d.alpha), p.kappa.unwrap_or(d.kappa))
        .map_err(|e| param_err(if p.kappa.is_some() { "kappa" } else { "alpha" }, e.to_string()))
}

struct AttractorPlan {
    seed: u64,
    energy: f64,
    active: usize,
    members: usize,
    stride: f64,
    window: f64,
    tolerance: f64,
}

fn attractor_plan(cfg: &ExperimentConfig, setup: &Setup) -> Result<AttractorPlan, CliError> {
    let InitialConfig::Random { seed, energy, active_modes } = &cfg.initial else {
        return Err(CliError::validation("initial.type", "the attractor experiment needs type = \"random\""));
    };
    let p = &cfg.experiment.parameters;
    let members = p.members.unwrap_or(10);
    if members == 0 {
        return Err(param_err("members", "must be at least 1"));
    }
    if let Some(t) = p.t_min {
        if !(t > 0.0 && 2.0 * t <= setup.total) {
            return Err(param_err("t_min", format!("needs 0 < 2 t_min <= T = {}", setup.total)));
        }
    }
    Ok(AttractorPlan {
        seed: *seed,
        energy: *energy,
        active: active_modes.unwrap_or(setup.basis.total_modes()),
        members,
        stride: positive("stride", p.stride.unwrap_or(1.0))?,
        window: positive("window", p.window.unwrap_or(1.0))?,
        tolerance: positive("tolerance", p.tolerance.unwrap_or(0.05))?,
    })
}

/// Experiment-specific checks that need no integration.
pub fn preflight(cfg: &ExperimentConfig, setup: &Setup) -> Result<(), CliError> {
    let p = &cfg.experiment.parameters;
    if let Some(t) = p.residual_tol {
        positive("residual_tol", t)?;
    }
    match cfg.experiment.name {
        ExperimentName::Simulate | ExperimentName::PerturbedEnergy => {
            perturbed_params(cfg)?;
        }
        ExperimentName::EnergyReport => {
            perturbed_params(cfg)?;
            if let Some(sweep) = &p.dt_sweep {
                if sweep.len() < 2 {
                    return Err(param_err("dt_sweep", "needs at least two step sizes"));
                }
                for &dt in sweep {
                    positive("dt_sweep", dt)?;
                }
            }
            if let Some(b) = p.beta {
                if !(b > 0.0 && b <= 1.0) {
                    return Err(param_err("beta", format!("must lie in (0, 1], got {b}")));
                }
            }
        }
        ExperimentName::Splitting => {
            kappa_sub(cfg, setup)?;
        }
        ExperimentName::GalerkinConvergence => {
            n_list(cfg, setup, 2)?;
        }
        ExperimentName::MEnergy => {
            n_list(cfg, setup, 1)?;
        }
        ExperimentName::StrichartzProbe => {
            let theta = p.theta.unwrap_or(0.8);
            if !(0.0..=1.0).contains(&theta) {
                return Err(param_err("theta", format!("must lie in [0, 1], got {theta}")));
            }
            if p.ensemble_size == Some(0) {
                return Err(param_err("ensemble_size", "must be at least 1"));
            }
            for &s in p.scales.as_deref().unwrap_or(&[]) {
                positive("scales", s)?;
            }
        }
        ExperimentName::ContinuousDependence => {
            positive("perturbation", p.perturbation.unwrap_or(1e-6))?;
        }
        ExperimentName::Attractor => {
            attractor_plan(cfg, setup)?;
        }
        ExperimentName::H2Check => {
            if let Some(k) = p.k_cert {
                if !(k >= 0.0 && k.is_finite()) {
                    return Err(param_err("k_cert", format!("must be nonnegative, got {k}")));
                }
            }
        }
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, setup: &Setup, out: &Path) -> Result<Summary, CliError> {
    preflight(cfg, setup)?;
    std::fs::create_dir_all(out)?;
    let mut s = Summary::new(cfg.experiment.name);
    match cfg.experiment.name {
        ExperimentName::Simulate => simulate(cfg, setup, out, &mut s)?,
        ExperimentName::EnergyReport => energy_report(cfg, setup, out, &mut s)?,
        ExperimentName::PerturbedEnergy => perturbed_energy(cfg, setup, out, &mut s)?,
        ExperimentName::Splitting => splitting(cfg, setup, out, &mut s)?,
        ExperimentName::GalerkinConvergence => galerkin_convergence(cfg, setup, out, &mut s)?,
        ExperimentName::StrichartzProbe => strichartz_probe(cfg, setup, out, &mut s)?,
        ExperimentName::ContinuousDependence => continuous_dependence(cfg, setup, out, &mut s)?,
        ExperimentName::MEnergy => m_energy(cfg, setup, out, &mut s)?,
        ExperimentName::Attractor => attractor(cfg, setup, out, &mut s)?,
        ExperimentName::H2Check => h2_check(cfg, setup, out, &mut s)?,
    }
    let file = std::fs::File::create(out.join("summary.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), &s)?;
    Ok(s)
}

fn trajectory(setup: &Setup) -> Result<Trajectory, CliError> {
    Ok(evolve_with(
        &setup.problem,
        &setup.xi0,
        setup.total,
        setup.dt,
        EvolveOptions { record_stride: setup.stride },
    )?)
}

fn write_energy(cfg: &ExperimentConfig, traj: &Trajectory, out: &Path) -> Result<(), CliError> {
    let prm = perturbed_params(cfg)?;
    let energy = energy_reports(traj);
    let perturbed = perturbed_energy_report(traj, prm.alpha, prm.kappa)?;
    to_file(&out.join("energy.csv"), |w| write_energy_csv(w, &energy, &perturbed.reports))?;
    Ok(())
}

fn simulate(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let traj = trajectory(setup)?;
    to_file(&out.join("trajectory.csv"), |w| write_trajectory_csv(w, &traj))?;
    write_energy(cfg, &traj, out)?;
    s.metric("samples", traj.len());
    s.metric("initial_e_norm", energy_norm(traj.state(0)));
    s.metric("final_e_norm", energy_norm(traj.last()));
    s.metric("identity_residual_per_unit_time", energy_identity_residual(&traj).per_unit_time);
    Ok(())
}

fn energy_report(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let p = &cfg.experiment.parameters;
    let tol = p.residual_tol.unwrap_or(DEFAULT_RESIDUAL_TOL);
    let traj = trajectory(setup)?;
    write_energy(cfg, &traj, out)?;
    let id = energy_identity_residual(&traj);
    s.metric("max_interval_residual", id.max_interval);
    s.metric("max_cumulative_residual", id.max_cumulative);
    s.metric("max_energy_increase", max_energy_increase(&traj));
    s.at_most("identity_residual_per_unit_time", id.per_unit_time, tol);

    if let Some(sweep) = &p.dt_sweep {
        let residuals = sweep
            .iter()
            .map(|&dt| {
                let t = evolve_with(&setup.problem, &setup.xi0, setup.total, dt, EvolveOptions::default())
                    .map_err(as_param("dt_sweep"))?;
                Ok(energy_identity_residual(&t).per_unit_time)
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        to_file(&out.join("residual_sweep.csv"), |w| {
            write_table(w, &["dt", "residual_per_unit_time"], &[sweep.clone(), residuals.clone()])
        })?;
        let order = loglog_slope(sweep, &residuals);
        let (lo, hi) = ORDER_RANGE;
        s.metric("order_range", [lo, hi]);
        s.check("residual_order", order, None, (lo..=hi).contains(&order));
    }
    if let Some(beta) = p.beta {
        let series = dtu_negative_norm_series(&traj, beta)?;
        let (t, v): (Vec<f64>, Vec<f64>) = series.into_iter().unzip();
        s.metric("dtu_negative_norm_final", v.last().copied().unwrap_or(0.0));
        to_file(&out.join("dtu_negative.csv"), |w| write_table(w, &["t", "dtu_norm"], &[t, v]))?;
    }
    Ok(())
}

fn perturbed_energy(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let p = &cfg.experiment.parameters;
    let tol = p.residual_tol.unwrap_or(DEFAULT_RESIDUAL_TOL);
    let prm = perturbed_params(cfg)?;
    let traj = trajectory(setup)?;
    let series = perturbed_energy_report(&traj, prm.alpha, prm.kappa)?;
    let r = &series.reports;
    let col = |f: fn(&qwl_core::diagnostics::PerturbedEnergyReport) -> f64| r.iter().map(f).collect::<Vec<f64>>();
    to_file(&out.join("perturbed.csv"), |w| {
        write_table(
            w,
            &["t", "e_alpha", "g_alpha_form", "phi_alpha_mass", "g_alpha_pairing", "residual", "integrated_residual"],
            &[
                col(|x| x.t),
                col(|x| x.e_alpha),
                col(|x| x.g_alpha_form),
                col(|x| x.phi_alpha_mass),
                col(|x| x.g_alpha_pairing),
                col(|x| x.residual),
                col(|x| x.integrated_residual),
            ],
        )
    })?;
    let (k1, k2) = g_alpha_bounds(&setup.basis, cfg.gamma, prm);
    let sampled = g_alpha_sampled_min(&setup.basis, cfg.gamma, prm, p.samples.unwrap_or(1000), p.seed.unwrap_or(0));
    s.metric("alpha", prm.alpha);
    s.metric("kappa", prm.kappa);
    s.metric("k1", k1);
    s.metric("k2", k2);
    s.metric("g_alpha_sampled_min", sampled);
    s.at_most("identity_residual_per_unit_time", series.identity.per_unit_time, tol);
    s.at_most("integrated_residual_per_unit_time", series.max_integrated / setup.total, tol);
    s.check("g_alpha_lower_constant", k1, Some(0.0), k1 > 0.0);
    Ok(())
}

fn splitting(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let k = kappa_sub(cfg, setup)?;
    let traj = trajectory(setup)?;
    let rep = regularity_gain_report(&traj, k)?;
    to_file(&out.join("split.csv"), |w| write_split_csv(w, &rep))?;
    s.metric("kappa_sub", rep.kappa_sub);
    s.metric("delta", rep.delta);
    s.metric("delta_eff", rep.delta_eff);
    s.metric("theta", rep.theta);
    s.metric("w_sup", rep.w_sup);
    s.metric("v_decay", &rep.v_decay);
    if let Some(fit) = &rep.v_decay {
        s.check("v_decay_rate", fit.rate, Some(0.0), fit.rate > 0.0);
    }
    s.at_most("reconstruction_error", rep.reconstruction_error, RECONSTRUCTION_TOL);
    let growth = if rep.first_half_max > 0.0 {
        rep.tail_half_max / rep.first_half_max - 1.0
    } else {
        0.0
    };
    s.check("w_tail_growth", growth, Some(W_GROWTH_TOLERANCE), rep.w_bounded);
    Ok(())
}

fn galerkin_convergence(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let list = n_list(cfg, setup, 2)?;
    let conv = galerkin_self_convergence(&setup.problem, &setup.xi0, setup.total, setup.dt, &list)
        .map_err(as_param("n_list"))?;
    let ns: Vec<f64> = conv.iter().map(|c| c.n as f64).collect();
    let ds: Vec<f64> = conv.iter().map(|c| c.difference).collect();
    to_file(&out.join("convergence.csv"), |w| write_table(w, &["n", "difference"], &[ns, ds.clone()]))?;
    s.metric("differences", &conv);
    let worst = ds.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let decreasing = ds.windows(2).all(|w| w[1] < w[0]);
    s.check("max_successive_ratio", worst, Some(1.0), decreasing);
    Ok(())
}

fn strichartz_probe(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let p = &cfg.experiment.parameters;
    let seed = p.seed.unwrap_or(0);
    let ensemble = p.ensemble_size.unwrap_or(100);
    let theta = p.theta.unwrap_or(0.8);
    let opts = ProbeOptions {
        dt: setup.dt,
        active_modes: p.active_modes.unwrap_or(16).min(setup.basis.total_modes()),
        input_scale: 1.0,
    };
    let base = strichartz_ratio_probe(&setup.basis, cfg.gamma, ensemble, setup.total, seed, opts)?;
    let col = |f: fn(&qwl_core::diagnostics::RatioSample) -> f64| base.samples.iter().map(f).collect::<Vec<f64>>();
    to_file(&out.join("ratios.csv"), |w| {
        write_table(
            w,
            &["strichartz", "data_energy", "forcing_l1l2", "ratio", "dissipative_ratio"],
            &[
                col(|x| x.strichartz),
                col(|x| x.data_energy),
                col(|x| x.forcing_l1l2),
                col(|x| x.ratio),
                col(|x| x.dissipative_ratio),
            ],
        )
    })?;
    s.metric("ratio_max", base.max);
    s.metric("ratio_mean", base.mean);
    s.metric("dissipative_max", base.dissipative_max);
    s.metric("beta", base.beta);

    let scales = p.scales.clone().unwrap_or_else(|| vec![1e-3, 2.5, 1e4]);
    let mut drift = 0.0f64;
    for &scale in &scales {
        let r = strichartz_ratio_probe(
            &setup.basis,
            cfg.gamma,
            ensemble,
            setup.total,
            seed,
            ProbeOptions { input_scale: scale, ..opts },
        )?;
        drift = drift.max(relative_drift(base.max, r.max)).max(relative_drift(base.mean, r.mean));
    }
    s.check("ratio_finite", base.max, None, base.max.is_finite());
    s.at_most("scale_drift", drift, SCALE_DRIFT_TOL);

    let sob = sobolev_l6_constant(&setup.basis, p.sobolev_starts.unwrap_or(16), 200, seed);
    let traj = trajectory(setup)?;
    let interp = interpolation_check(&traj, 0.0, setup.total, theta).map_err(as_param("theta"))?;
    let limit = sob.value.powf(1.0 - theta);
    s.metric("sobolev_l6_constant", sob.value);
    s.metric("interpolation", interp);
    s.at_most("interpolation_constant", interp.ratio, limit);
    Ok(())
}

fn continuous_dependence(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let p = &cfg.experiment.parameters;
    let eps = p.perturbation.unwrap_or(1e-6);
    let total_modes = setup.basis.total_modes();
    let dir = random_state(&setup.basis, &mut rng(p.seed.unwrap_or(0)), total_modes, 1.0);
    let xi_b = setup.xi0.add(&dir.scaled(eps));
    let rep = continuous_dependence_probe(
        &setup.problem,
        &setup.xi0,
        &xi_b,
        setup.total,
        setup.dt,
        EvolveOptions { record_stride: setup.stride },
    )?;
    let col = |f: fn(&qwl_core::diagnostics::DependenceSample) -> f64| rep.series.iter().map(f).collect::<Vec<f64>>();
    to_file(&out.join("dependence.csv"), |w| {
        write_table(
            w,
            &["t", "difference", "majorant", "kernel"],
            &[col(|x| x.t), col(|x| x.difference), col(|x| x.majorant), col(|x| x.kernel)],
        )
    })?;
    s.metric("perturbation", eps);
    s.metric("max_difference", rep.max_difference);
    s.check("gronwall_constant", rep.c_fit, None, rep.holds);
    Ok(())
}

fn m_energy(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let list = n_list(cfg, setup, 1)?;
    let rep = qwl_core::attractor::m_energy_surrogate(
        &setup.problem,
        &setup.xi0,
        setup.total,
        &list,
        setup.dt,
        setup.stride,
    )
    .map_err(as_param("n_list"))?;
    let ns: Vec<f64> = rep.entries.iter().map(|e| e.n as f64).collect();
    let vs: Vec<f64> = rep.entries.iter().map(|e| e.value).collect();
    to_file(&out.join("m_energy.csv"), |w| write_table(w, &["n", "value"], &[ns, vs]))?;
    s.metric("growth_exponent", rep.growth_exponent);
    s.metric("surrogate", rep.surrogate);
    s.metric("decay_fit", &rep.decay_check);
    s.check("finest_vs_surrogate", rep.finest, Some(rep.surrogate + 1e-6), rep.bound_holds);
    s.check(
        "held_out_ratio",
        rep.decay_check.held_out_max_ratio,
        Some(1.0 + M_ENERGY_HELD_OUT_SLACK),
        rep.decay_check.holds,
    );
    Ok(())
}

fn attractor(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let plan = attractor_plan(cfg, setup)?;
    let init = random_ensemble(&setup.basis, plan.seed, plan.members, plan.active, plan.energy);
    let store = TrajectoryStore::evolve(
        &setup.problem,
        &init,
        setup.total,
        setup.dt,
        EvolveOptions { record_stride: setup.stride },
        plan.window,
    )?;
    let radius = qwl_core::attractor::empirical_absorbing_radius(&store);
    s.metric("absorbing_radius", radius);
    let absorb = store
        .trajectories()
        .iter()
        .map(|t| absorb_time(t, radius))
        .collect::<Result<Vec<_>, _>>()?;
    let latest = absorb.iter().try_fold(0.0f64, |m, a| a.map(|a| m.max(a)));
    let Some(latest) = latest else {
        s.check("absorbed", 0.0, None, false);
        return Ok(());
    };
    s.metric("latest_absorb_time", latest);
    let t_min = match cfg.experiment.parameters.t_min {
        Some(t) => t,
        None => (0.25 * setup.total).max(latest.ceil()),
    };
    if 2.0 * t_min > setup.total {
        s.check("absorbed_before_half_horizon", latest, Some(0.5 * setup.total), false);
        return Ok(());
    }
    s.metric("t_min", t_min);
    let cloud1 = omega_limit_sample(&store, t_min, plan.stride).map_err(as_param("stride"))?;
    let cloud2 = omega_limit_sample(&store, 2.0 * t_min, plan.stride).map_err(as_param("stride"))?;
    to_file(&out.join("cloud.csv"), |w| write_cloud_csv(w, &cloud2))?;

    let n_times = (setup.total / plan.stride).floor() as usize;
    let times: Vec<f64> = (0..=n_times).map(|i| i as f64 * plan.stride).collect();
    let curve = attraction_curve(&store, &cloud2, &times, CloudNorm::E).map_err(as_param("stride"))?;
    to_file(&out.join("curve.csv"), |w| write_curve_csv(w, &curve))?;

    let (e1a, _) = e1_bound(&cloud1)?;
    let (e1b, _) = e1_bound(&cloud2)?;
    let sa = attractor_strichartz_bound(&store, plan.window, t_min).map_err(as_param("window"))?;
    let sb = attractor_strichartz_bound(&store, plan.window, 2.0 * t_min).map_err(as_param("window"))?;
    s.metric("cloud_size", cloud2.len());
    s.metric("cloud_diameter", cloud2.diameter());
    s.metric("e1_sup", [e1a, e1b]);
    s.metric("strichartz_sup", [sa, sb]);
    s.at_most("e1_doubling_drift", relative_drift(e1a, e1b), DOUBLING_TOLERANCE);
    s.at_most("strichartz_doubling_drift", relative_drift(sa, sb), DOUBLING_TOLERANCE);
    let (first, last) = (curve[0].1, curve[curve.len() - 1].1);
    s.at_most("terminal_semidist", last, first);
    let worst = store
        .trajectories()
        .iter()
        .map(|t| dissipation_saturation(t, plan.tolerance))
        .fold(0.0f64, |m, d| m.max(d.ratio));
    s.at_most("dissipation_tail_ratio", worst, plan.tolerance);
    Ok(())
}

fn h2_check(cfg: &ExperimentConfig, setup: &Setup, out: &Path, s: &mut Summary) -> Result<(), CliError> {
    let k = match cfg.experiment.parameters.k_cert {
        Some(k) => k,
        None => {
            let cert = certify(&setup.problem.nonlinearity, AssumptionId::FPrimeLower)?;
            if !cert.holds {
                return Err(CliError::validation("nonlinearity", "f' is not bounded below; set k_cert"));
            }
            cert.constants.get("K").copied().unwrap_or(0.0)
        }
    };
    let traj = trajectory(setup)?;
    let rep = h2_bound_check(&traj, k)?;
    let col = |f: fn(&qwl_core::diagnostics::H2Sample) -> f64| rep.series.iter().map(f).collect::<Vec<f64>>();
    to_file(&out.join("h2.csv"), |w| {
        write_table(w, &["t", "lhs", "rhs"], &[col(|x| x.t), col(|x| x.lhs), col(|x| x.rhs)])
    })?;
    s.metric("k_cert", k);
    s.metric("c_forcing", rep.c_forcing);
    s.metric("c_velocity", rep.c_velocity);
    s.metric("c_energy", rep.c_energy);
    s.check("max_ratio", rep.max_ratio, Some(1.0), rep.holds);
    Ok(())
}
