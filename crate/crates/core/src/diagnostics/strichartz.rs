//! Space-time Lebesgue norms along trajectories, the interpolation
//! inequality between them, and empirical Strichartz ratios for the linear
//! damped wave equation.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::solver::{linear_evolve, EvolveOptions, LinearForcing, Trajectory};
use crate::spectral::{fractional_laplacian, project, sobolev_norm, to_grid, from_grid, Basis, CoeffField, StatePair};

use super::norms::{energy_norm, lp_norm};

/// Composite Simpson over equally spaced values. An odd interval count
/// closes with Simpson's 3/8 rule on the last three intervals; a single
/// interval falls back to the trapezoid rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        2 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        3 => 3.0 * h / 8.0 * (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3]),
        _ => {
            let even_end = if n % 2 == 0 { n } else { n - 3 };
            let mut s = values[0] + values[even_end];
            for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = h / 3.0 * s;
            if even_end < n {
                let v = &values[even_end..];
                total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

/// Sample indices covering `[t0, t1]`.
pub(crate) fn window(traj: &Trajectory, t0: f64, t1: f64) -> Result<(usize, usize)> {
    let out_of_range = || Error::WindowOutOfRange {
        t0,
        t1,
        start: traj.t0(),
        end: traj.t_end(),
    };
    if !(t1 >= t0) {
        return Err(out_of_range());
    }
    let tol = 1e-9 * traj.spacing();
    if t0 < traj.t0() - tol || t1 > traj.t_end() + tol {
        return Err(out_of_range());
    }
    Ok((traj.index_of_time(t0)?, traj.index_of_time(t1)?))
}

/// `‖u‖_{L^{q_time}(t0, t1; L^{q_space})}` over the stored samples. An
/// infinite `q_time` takes the supremum over samples.
pub fn strichartz_norm(traj: &Trajectory, t0: f64, t1: f64, q_time: f64, q_space: f64) -> Result<f64> {
    if !(q_time >= 1.0) {
        return Err(Error::param("q_time", format!("must be ≥ 1, got {q_time}")));
    }
    if !(q_space >= 1.0) {
        return Err(Error::param("q_space", format!("must be ≥ 1, got {q_space}")));
    }
    let (i0, i1) = window(traj, t0, t1)?;
    let spatial: Vec<f64> = traj.states()[i0..=i1]
        .iter()
        .map(|xi| lp_norm(&xi.u, q_space))
        .collect();
    Ok(time_norm(&spatial, traj.spacing(), q_time))
}

fn time_norm(spatial: &[f64], h: f64, q_time: f64) -> f64 {
    if q_time.is_infinite() {
        return spatial.iter().fold(0.0, |m: f64, v| m.max(*v));
    }
    let integrand: Vec<f64> = spatial.iter().map(|v| v.powf(q_time)).collect();
    simpson(&integrand, h).max(0.0).powf(1.0 / q_time)
}

/// Default mixed norm `L⁴(L¹²)`.
pub fn strichartz_l4_l12(traj: &Trajectory, t0: f64, t1: f64) -> Result<f64> {
    strichartz_norm(traj, t0, t1, 4.0, 12.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationReport {
    pub theta: f64,
    pub q_time: f64,
    pub q_space: f64,
    /// `‖u‖_{L^{4/θ}(L^{12/(2-θ)})}`.
    pub lhs: f64,
    pub strichartz: f64,
    /// `sup_t ‖∇u(t)‖`.
    pub energy_sup: f64,
    /// `‖u‖^θ_{L⁴L¹²} ‖u‖^{1-θ}_{L^∞H¹}`.
    pub bound: f64,
    /// `lhs / bound`, the empirical constant; zero when both sides vanish.
    pub ratio: f64,
}

/// Compares `‖u‖_{L^{4/θ}(L^{12/(2-θ)})}` with
/// `‖u‖^θ_{L⁴(L¹²)} ‖u‖^{1-θ}_{L^∞(H¹)}` on `[t0, t1]`.
pub fn interpolation_check(traj: &Trajectory, t0: f64, t1: f64, theta: f64) -> Result<InterpolationReport> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::param("theta", format!("must lie in [0, 1], got {theta}")));
    }
    let q_time = if theta == 0.0 { f64::INFINITY } else { 4.0 / theta };
    let q_space = 12.0 / (2.0 - theta);
    let lhs = strichartz_norm(traj, t0, t1, q_time, q_space)?;
    let strichartz = strichartz_l4_l12(traj, t0, t1)?;
    let (i0, i1) = window(traj, t0, t1)?;
    let energy_sup = traj.states()[i0..=i1]
        .iter()
        .map(|xi| sobolev_norm(&xi.u, 1.0))
        .fold(0.0, f64::max);
    let bound = strichartz.powf(theta) * energy_sup.powf(1.0 - theta);
    let ratio = if bound > 0.0 { lhs / bound } else { 0.0 };
    Ok(InterpolationReport {
        theta,
        q_time,
        q_space,
        lhs,
        strichartz,
        energy_sup,
        bound,
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevConstant {
    /// Largest `‖u‖_{L⁶}/‖∇u‖` found.
    pub value: f64,
    pub starts: usize,
    pub iterations: usize,
}

/// Lower estimate of the discrete embedding constant of `H¹₀ → L⁶` on the
/// basis: random starts followed by the ascent `u ← (-Δ)⁻¹ P(u⁵)` on the
/// unit sphere of `H¹₀`, which increases `‖u‖_{L⁶}` monotonically.
pub fn sobolev_l6_constant(basis: &Arc<Basis>, starts: usize, iterations: usize, seed: u64) -> SobolevConstant {
    let ratio = |u: &CoeffField| lp_norm(u, 6.0) / sobolev_norm(u, 1.0);
    let normalize = |u: CoeffField| {
        let n = sobolev_norm(&u, 1.0);
        u.scaled(1.0 / n)
    };
    let best = (0..starts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = crate::random::rng(seed.wrapping_add(k as u64));
            let s = if k == 0 { 4.0 } else { 1.0 + (k % 4) as f64 * 0.5 };
            let mut u = normalize(crate::random::random_field(basis, &mut rng, s, basis.total_modes()));
            let mut best = ratio(&u);
            for _ in 0..iterations {
                let g = to_grid(&u).mapv(|v| v.powi(5));
                let Ok(c) = from_grid(&g, basis) else { break };
                let next = fractional_laplacian(&c, -1.0);
                if sobolev_norm(&next, 1.0) == 0.0 {
                    break;
                }
                u = normalize(next);
                let r = ratio(&u);
                if r <= best * (1.0 + 1e-14) {
                    best = best.max(r);
                    break;
                }
                best = r;
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    SobolevConstant {
        value: best,
        starts: starts.max(1),
        iterations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioSample {
    pub strichartz: f64,
    pub data_energy: f64,
    pub forcing_l1l2: f64,
    /// `‖v‖_{L⁴L¹²} / (‖ξ₀‖_ℰ + ‖G‖_{L¹L²})`.
    pub ratio: f64,
    /// Supremum over sample times of the dissipative ratio.
    pub dissipative_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioStats {
    pub samples: Vec<RatioSample>,
    pub max: f64,
    pub mean: f64,
    pub dissipative_max: f64,
    /// Decay rate used in the dissipative variant.
    pub beta: f64,
}

/// Slowest decay rate of the free linear flow, `-max Re μ` over the modes.
pub fn linear_decay_rate(basis: &Basis, gamma: f64) -> f64 {
    let l1 = basis.eigenvalue(0);
    let d = 0.25 * gamma * gamma - l1;
    if d > 0.0 {
        0.5 * gamma - d.sqrt()
    } else {
        0.5 * gamma
    }
}

/// Evaluates the Strichartz ratio of a single linear solution with forcing
/// sampled at every solver time.
pub fn strichartz_ratio(
    basis: &Arc<Basis>,
    gamma: f64,
    xi0: &StatePair,
    forcing: &[CoeffField],
    total: f64,
    dt: f64,
) -> Result<RatioSample> {
    let traj = linear_evolve(
        basis,
        gamma,
        LinearForcing::Sampled(forcing),
        xi0,
        total,
        dt,
        EvolveOptions::default(),
    )?;
    let data_energy = energy_norm(xi0);
    let g_norms: Vec<f64> = forcing.iter().map(|g| g.l2_norm()).collect();
    let forcing_l1l2 = simpson(&g_norms, dt);
    let denom = data_energy + forcing_l1l2;
    if !(denom > 0.0) {
        return Err(Error::param("xi0", "zero data and zero forcing"));
    }
    let spatial: Vec<f64> = traj.states().iter().map(|xi| lp_norm(&xi.u, 12.0)).collect();
    let strichartz = time_norm(&spatial, dt, 4.0);

    let beta = linear_decay_rate(basis, gamma);
    let window_steps = (1.0 / dt).round().max(1.0) as usize;
    let l4: Vec<f64> = spatial.iter().map(|v| v.powi(4)).collect();
    let mut weighted = 0.0;
    let mut dissipative_ratio = 0.0f64;
    for i in 1..traj.len() {
        // ∫₀ᵗ e^{-β(t-s)}‖G(s)‖ ds by the trapezoid recursion
        weighted = (-beta * dt).exp() * weighted
            + 0.5 * dt * ((-beta * dt).exp() * g_norms[i - 1] + g_norms[i]);
        let t = i as f64 * dt;
        let j0 = i.saturating_sub(window_steps);
        let local = simpson(&l4[j0..=i], dt).max(0.0).powf(0.25);
        let num = energy_norm(traj.state(i)) + local;
        let den = data_energy * (-beta * t).exp() + weighted;
        if den > 0.0 {
            dissipative_ratio = dissipative_ratio.max(num / den);
        }
    }
    Ok(RatioSample {
        strichartz,
        data_energy,
        forcing_l1l2,
        ratio: strichartz / denom,
        dissipative_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeOptions {
    pub dt: f64,
    /// Number of lowest modes carrying random data.
    pub active_modes: usize,
    /// Multiplies both `ξ₀` and `G` after normalization.
    pub input_scale: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            dt: 1e-3,
            active_modes: 16,
            input_scale: 1.0,
        }
    }
}

/// Random unit-energy data `ξ₀` and forcing
/// `G(t) = cos(ω₁t + φ)G₁ + sin(ω₂t)G₂` with unit `‖G₁‖, ‖G₂‖`.
fn draw_member(basis: &Arc<Basis>, seed: u64, total: f64, opts: &ProbeOptions) -> Result<(StatePair, Vec<CoeffField>)> {
    use rand::Rng;
    let mut rng = crate::random::rng(seed);
    let active = opts.active_modes.clamp(1, basis.total_modes());
    let xi0 = crate::random::random_state(basis, &mut rng, active, 1.0).scaled(opts.input_scale);
    let unit = |f: CoeffField| {
        let n = f.l2_norm();
        f.scaled(1.0 / n)
    };
    let g1 = unit(crate::random::random_field(basis, &mut rng, 1.0, active));
    let g2 = unit(crate::random::random_field(basis, &mut rng, 1.0, active));
    let w1: f64 = rng.random_range(0.5..8.0);
    let w2: f64 = rng.random_range(0.5..8.0);
    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let steps = (total / opts.dt).round() as usize;
    let forcing = (0..=steps)
        .map(|i| {
            let t = i as f64 * opts.dt;
            g1.scaled((w1 * t + phase).cos() * opts.input_scale)
                .axpy((w2 * t).sin() * opts.input_scale, &g2)
        })
        .collect();
    let xi0 = StatePair {
        u: project(&xi0.u, active)?,
        ut: project(&xi0.ut, active)?,
    };
    Ok((xi0, forcing))
}

/// Ensemble of Strichartz ratios for the linear equation with seeded
/// random data and forcing.
pub fn strichartz_ratio_probe(
    basis: &Arc<Basis>,
    gamma: f64,
    ensemble_size: usize,
    total: f64,
    seed: u64,
    opts: ProbeOptions,
) -> Result<RatioStats> {
    if ensemble_size == 0 {
        return Err(Error::param("ensemble_size", "must be at least 1"));
    }
    if !(opts.input_scale > 0.0 && opts.input_scale.is_finite()) {
        return Err(Error::param("input_scale", "must be positive"));
    }
    let samples = (0..ensemble_size)
        .into_par_iter()
        .map(|k| {
            let (xi0, forcing) = draw_member(basis, seed.wrapping_add(k as u64), total, &opts)?;
            strichartz_ratio(basis, gamma, &xi0, &forcing, total, opts.dt)
        })
        .collect::<Result<Vec<_>>>()?;
    let max = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    let dissipative_max = samples.iter().map(|s| s.dissipative_ratio).fold(0.0, f64::max);
    let mean = samples.iter().map(|s| s.ratio).sum::<f64>() / samples.len() as f64;
    Ok(RatioStats {
        samples,
        max,
        mean,
        dissipative_max,
        beta: linear_decay_rate(basis, gamma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::NonlinearitySpec;
    use crate::solver::{evolve, ProblemSpec};
    use crate::spectral::make_basis;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simpson_exact_on_cubics() {
        for n in [2usize, 3, 4, 5, 7, 10] {
            let h = 1.0 / n as f64;
            let v: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(3)).collect();
            assert_abs_diff_eq!(simpson(&v, h), 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn zero_trajectory_has_zero_norm() {
        let b = make_basis(1, 4, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let t = evolve(&p, &StatePair::zeros(&b), 1.0, 0.01).unwrap();
        assert_eq!(strichartz_l4_l12(&t, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn window_outside_span_rejected() {
        let b = make_basis(1, 4, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap());
        let t = evolve(&p, &StatePair::zeros(&b), 1.0, 0.01).unwrap();
        assert!(matches!(
            strichartz_l4_l12(&t, 0.0, 2.0),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn stationary_state_gives_spatial_norm() {
        let b = make_basis(1, 4, 4).unwrap();
        let e1 = CoeffField::mode(&b, 0);
        // -Δu = g with u = e₁ is an equilibrium of the linear problem
        let p = Arc::new(ProblemSpec::new(&b, 1.0, e1.clone(), NonlinearitySpec::zero(), 4).unwrap());
        let xi = StatePair::new(e1.clone(), CoeffField::zeros(&b)).unwrap();
        let t = evolve(&p, &xi, 1.0, 0.01).unwrap();
        assert_abs_diff_eq!(
            strichartz_l4_l12(&t, 0.0, 1.0).unwrap(),
            lp_norm(&e1, 12.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn theta_one_is_an_identity() {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let mut rng = crate::random::rng(2);
        let x0 = crate::random::random_state(&b, &mut rng, 8, 1.0);
        let t = evolve(&p, &x0, 1.0, 0.01).unwrap();
        let r = interpolation_check(&t, 0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.ratio, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn theta_zero_bounded_by_sobolev_constant() {
        let b = make_basis(1, 8, 4).unwrap();
        let c = sobolev_l6_constant(&b, 16, 200, 9);
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let mut rng = crate::random::rng(4);
        let x0 = crate::random::random_state(&b, &mut rng, 8, 2.0);
        let t = evolve(&p, &x0, 1.0, 0.01).unwrap();
        let r = interpolation_check(&t, 0.0, 1.0, 0.0).unwrap();
        assert!(r.ratio <= c.value * (1.0 + 1e-9), "{} vs {}", r.ratio, c.value);
    }

    #[test]
    fn l5_l10_at_four_fifths() {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let mut rng = crate::random::rng(8);
        let x0 = crate::random::random_state(&b, &mut rng, 8, 1.0);
        let t = evolve(&p, &x0, 1.0, 0.01).unwrap();
        let r = interpolation_check(&t, 0.0, 1.0, 0.8).unwrap();
        assert_abs_diff_eq!(r.q_time, 5.0);
        assert_abs_diff_eq!(r.q_space, 10.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.lhs, strichartz_norm(&t, 0.0, 1.0, 5.0, 10.0).unwrap());
        assert!(r.ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn single_mode_ratio_matches_closed_form() {
        let b = make_basis(1, 4, 4).unwrap();
        let dt = 1e-3;
        let steps = 1000;
        let xi0 = StatePair::new(CoeffField::mode(&b, 0), CoeffField::zeros(&b)).unwrap();
        let forcing = vec![CoeffField::zeros(&b); steps + 1];
        let r = strichartz_ratio(&b, 1.0, &xi0, &forcing, 1.0, dt).unwrap();
        // u(t) = e^{-t/2}(cos ωt + sin ωt/(2ω)) e₁, ω = √3/2
        let w = 3f64.sqrt() / 2.0;
        let e1_l12 = lp_norm(&CoeffField::mode(&b, 0), 12.0);
        let n = 20000;
        let h = 1.0 / n as f64;
        let vals: Vec<f64> = (0..=n)
            .map(|i| {
                let t = i as f64 * h;
                ((-0.5 * t).exp() * ((w * t).cos() + (w * t).sin() / (2.0 * w))).powi(4)
            })
            .collect();
        let exact = e1_l12 * simpson(&vals, h).powf(0.25);
        assert_abs_diff_eq!(r.ratio, exact, epsilon = 1e-9);
    }

    #[test]
    fn probe_is_scale_invariant() {
        let b = make_basis(1, 8, 4).unwrap();
        let opts = ProbeOptions { dt: 1e-2, active_modes: 8, input_scale: 1.0 };
        let a = strichartz_ratio_probe(&b, 1.0, 4, 1.0, 3, opts).unwrap();
        let s = strichartz_ratio_probe(&b, 1.0, 4, 1.0, 3, ProbeOptions { input_scale: 37.5, ..opts }).unwrap();
        assert!((a.max - s.max).abs() <= 1e-12 * a.max);
        assert!(a.max.is_finite() && a.max > 0.0);
    }

    #[test]
    fn degenerate_input_rejected() {
        let b = make_basis(1, 4, 4).unwrap();
        let forcing = vec![CoeffField::zeros(&b); 11];
        assert!(strichartz_ratio(&b, 1.0, &StatePair::zeros(&b), &forcing, 0.1, 0.01).is_err());
    }
}
