//! Time integration of the Galerkin system
//! `u'' + γu' - Δu + P_N f(u) = P_N g` and of the linear problem
//! `v'' + γv' - Δv = G(t)`.
//!
//! The nonlinear problem uses the implicit midpoint rule. The linear part of
//! the stage equation is solved exactly per mode; only the nonlinear term is
//! iterated. The linear problem advances each mode with its exact 2×2
//! propagator.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nonlinearity::{eval_f, NonlinearitySpec};
use crate::spectral::{from_grid, project, to_grid, Basis, CoeffField, StatePair};

/// Stage iteration tolerance on the midpoint state.
pub const STAGE_TOL: f64 = 1e-12;
pub const MAX_STAGE_ITERATIONS: usize = 100;
/// Coefficient magnitude treated as discrete blow-up.
pub const BLOWUP_SENTINEL: f64 = 1e150;

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub basis: Arc<Basis>,
    pub gamma: f64,
    pub forcing: CoeffField,
    pub nonlinearity: NonlinearitySpec,
    pub galerkin_n: usize,
}

impl ProblemSpec {
    pub fn new(
        basis: &Arc<Basis>,
        gamma: f64,
        forcing: CoeffField,
        nonlinearity: NonlinearitySpec,
        galerkin_n: usize,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
        }
        if !forcing.basis().as_ref().eq(basis.as_ref()) {
            return Err(Error::BasisMismatch);
        }
        if forcing.coeffs().iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("forcing"));
        }
        let total = basis.total_modes();
        if galerkin_n == 0 || galerkin_n > total {
            return Err(Error::ModeOutOfRange {
                n: galerkin_n,
                total,
            });
        }
        Ok(ProblemSpec {
            basis: basis.clone(),
            gamma,
            forcing,
            nonlinearity,
            galerkin_n,
        })
    }

    /// Problem on the full basis with zero forcing.
    pub fn unforced(basis: &Arc<Basis>, gamma: f64, nonlinearity: NonlinearitySpec) -> Result<Self> {
        Self::new(
            basis,
            gamma,
            CoeffField::zeros(basis),
            nonlinearity,
            basis.total_modes(),
        )
    }

    pub fn with_galerkin_n(&self, n: usize) -> Result<Self> {
        Self::new(
            &self.basis,
            self.gamma,
            self.forcing.clone(),
            self.nonlinearity.clone(),
            n,
        )
    }

    pub fn projected_forcing(&self) -> CoeffField {
        project(&self.forcing, self.galerkin_n).expect("galerkin_n validated")
    }

    /// `P_N f(u)`, evaluated pseudo-spectrally.
    pub fn nonlinear_term(&self, u: &CoeffField) -> CoeffField {
        if self.nonlinearity.is_zero() {
            return CoeffField::zeros(&self.basis);
        }
        let grid = eval_f(&self.nonlinearity, &to_grid(u));
        let full = from_grid(&grid, &self.basis).expect("grid shape from own basis");
        project(&full, self.galerkin_n).expect("galerkin_n validated")
    }

    /// `∂ₜ²u` recovered from the equation: `Δu - P_N f(u) - γ∂ₜu + P_N g`.
    pub fn acceleration(&self, xi: &StatePair) -> CoeffField {
        let lap = crate::spectral::laplacian_apply(&xi.u);
        let f = self.nonlinear_term(&xi.u);
        let g = self.projected_forcing();
        let mut out = project(&lap, self.galerkin_n).expect("validated");
        for (k, a) in out.coeffs_mut().iter_mut().enumerate() {
            *a += -f.coeffs()[k] - self.gamma * xi.ut.coeffs()[k] + g.coeffs()[k];
        }
        project(&out, self.galerkin_n).expect("validated")
    }
}

fn check_state(state: &StatePair) -> Result<()> {
    let mut worst = 0.0f64;
    for &c in state.u.coeffs().iter().chain(state.ut.coeffs()) {
        if !c.is_finite() {
            return Err(Error::Overflow {
                magnitude: f64::INFINITY,
            });
        }
        worst = worst.max(c.abs());
    }
    if worst > BLOWUP_SENTINEL {
        return Err(Error::Overflow { magnitude: worst });
    }
    Ok(())
}

/// One implicit-midpoint step of the Galerkin system. The result lies in
/// the span of the first `galerkin_n` modes.
pub fn step(problem: &ProblemSpec, state: &StatePair, dt: f64) -> Result<StatePair> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    if !state.u.basis().as_ref().eq(problem.basis.as_ref()) {
        return Err(Error::BasisMismatch);
    }
    check_state(state)?;
    let n = problem.galerkin_n;
    let gamma = problem.gamma;
    let lam = &problem.basis.eigenvalues()[..n];
    let u0 = &state.u.coeffs()[..n];
    let w0 = &state.ut.coeffs()[..n];
    let g = problem.projected_forcing();
    let g = &g.coeffs()[..n];

    // per-mode constants of the 2×2 midpoint solve
    let denom: Vec<f64> = lam
        .iter()
        .map(|l| 1.0 + 0.5 * dt * gamma + 0.25 * dt * dt * l)
        .collect();
    let base: Vec<f64> = (0..n)
        .map(|k| {
            w0[k] * (1.0 - 0.5 * dt * gamma - 0.25 * dt * dt * lam[k]) - dt * lam[k] * u0[k]
                + dt * g[k]
        })
        .collect();

    let solve = |f: &[f64], u1: &mut [f64], w1: &mut [f64]| {
        for k in 0..n {
            w1[k] = (base[k] - dt * f[k]) / denom[k];
            u1[k] = u0[k] + 0.5 * dt * (w0[k] + w1[k]);
        }
    };

    let mut u1 = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    if problem.nonlinearity.is_zero() {
        solve(&vec![0.0; n], &mut u1, &mut w1);
    } else {
        let mut um = state.u.clone();
        {
            let c = um.coeffs_mut();
            c[n..].iter_mut().for_each(|x| *x = 0.0);
            for k in 0..n {
                c[k] = u0[k] + 0.5 * dt * w0[k];
            }
        }
        let mut iterations = 0;
        loop {
            iterations += 1;
            let f = problem.nonlinear_term(&um);
            solve(&f.coeffs()[..n], &mut u1, &mut w1);
            let mut change = 0.0f64;
            let mut scale = 1.0f64;
            let c = um.coeffs_mut();
            for k in 0..n {
                let next = 0.5 * (u0[k] + u1[k]);
                change = change.max((next - c[k]).abs());
                scale = scale.max(next.abs());
                c[k] = next;
            }
            let residual = change / scale;
            if !residual.is_finite() {
                return Err(Error::Overflow {
                    magnitude: f64::INFINITY,
                });
            }
            if residual <= STAGE_TOL {
                break;
            }
            if iterations >= MAX_STAGE_ITERATIONS {
                return Err(Error::NonConvergence {
                    iterations,
                    residual,
                });
            }
        }
        // final pass with the converged midpoint
        let f = problem.nonlinear_term(&um);
        solve(&f.coeffs()[..n], &mut u1, &mut w1);
    }

    let total = problem.basis.total_modes();
    u1.resize(total, 0.0);
    w1.resize(total, 0.0);
    let out = StatePair {
        u: CoeffField::from_coeffs(&problem.basis, u1).map_err(|_| Error::Overflow {
            magnitude: f64::INFINITY,
        })?,
        ut: CoeffField::from_coeffs(&problem.basis, w1).map_err(|_| Error::Overflow {
            magnitude: f64::INFINITY,
        })?,
    };
    check_state(&out)?;
    Ok(out)
}

/// Which dynamics generated a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    Galerkin,
    LinearExact,
}

/// Uniformly sampled solution together with the problem that produced it.
#[derive(Debug, Clone)]
pub struct Trajectory {
    problem: Arc<ProblemSpec>,
    dynamics: Dynamics,
    dt: f64,
    stride: usize,
    base_t0: f64,
    offset: usize,
    samples: Arc<Vec<StatePair>>,
}

impl Trajectory {
    pub(crate) fn from_parts(
        problem: Arc<ProblemSpec>,
        dynamics: Dynamics,
        dt: f64,
        stride: usize,
        t0: f64,
        samples: Vec<StatePair>,
    ) -> Self {
        Trajectory {
            problem,
            dynamics,
            dt,
            stride,
            base_t0: t0,
            offset: 0,
            samples: Arc::new(samples),
        }
    }

    /// Same samples viewed from `extra` samples later.
    pub(crate) fn with_offset(&self, extra: usize) -> Self {
        let mut t = self.clone();
        t.offset += extra;
        t
    }

    /// Replaces the samples, keeping timing metadata.
    pub(crate) fn with_samples(&self, dynamics: Dynamics, samples: Vec<StatePair>) -> Self {
        Trajectory {
            problem: self.problem.clone(),
            dynamics,
            dt: self.dt,
            stride: self.stride,
            base_t0: self.t0(),
            offset: 0,
            samples: Arc::new(samples),
        }
    }

    pub fn problem(&self) -> &Arc<ProblemSpec> {
        &self.problem
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.problem.basis
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    /// Integrator step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Integrator steps per recorded sample.
    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Time between recorded samples.
    pub fn spacing(&self) -> f64 {
        self.dt * self.stride as f64
    }

    pub fn states(&self) -> &[StatePair] {
        &self.samples[self.offset..]
    }

    pub fn len(&self) -> usize {
        self.samples.len() - self.offset
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, i: usize) -> &StatePair {
        &self.states()[i]
    }

    pub fn last(&self) -> &StatePair {
        self.states().last().expect("trajectories hold at least one sample")
    }

    pub fn time(&self, i: usize) -> f64 {
        self.base_t0 + (self.offset + i) as f64 * self.spacing()
    }

    pub fn t0(&self) -> f64 {
        self.time(0)
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Sample index of an aligned time.
    pub fn index_of_time(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0()) / self.spacing();
        let i = x.round();
        if (x - i).abs() > 1e-9 {
            return Err(Error::Misaligned {
                t,
                spacing: self.spacing(),
            });
        }
        if i < 0.0 || i as usize >= self.len() {
            return Err(Error::WindowOutOfRange {
                t0: t,
                t1: t,
                start: self.t0(),
                end: self.t_end(),
            });
        }
        Ok(i as usize)
    }

    /// Re-runs the solver between consecutive samples and returns the
    /// largest coefficient deviation.
    pub fn verify_steps(&self) -> Result<f64> {
        if self.dynamics != Dynamics::Galerkin {
            return Err(Error::param("trajectory", "only Galerkin trajectories can be re-stepped"));
        }
        let mut worst = 0.0f64;
        for pair in self.states().windows(2) {
            let mut s = pair[0].clone();
            for _ in 0..self.stride {
                s = step(&self.problem, &s, self.dt)?;
            }
            worst = worst.max(s.sub(&pair[1]).max_abs());
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Record every `record_stride`-th step.
    pub record_stride: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { record_stride: 1 }
    }
}

fn step_count(total: f64, dt: f64) -> Result<usize> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::param("T", format!("must be positive, got {total}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let n = (total / dt).round();
    if n < 1.0 || (total - n * dt).abs() > 1e-12 * total.max(1.0) {
        return Err(Error::param("dt", format!("{dt} does not divide T = {total}")));
    }
    Ok(n as usize)
}

/// Integrates the Galerkin system from `xi0` (projected onto `P_N`) over `[0, T]`.
pub fn evolve(problem: &Arc<ProblemSpec>, xi0: &StatePair, total: f64, dt: f64) -> Result<Trajectory> {
    evolve_from(problem, xi0, 0.0, total, dt, EvolveOptions::default())
}

pub fn evolve_with(
    problem: &Arc<ProblemSpec>,
    xi0: &StatePair,
    total: f64,
    dt: f64,
    opts: EvolveOptions,
) -> Result<Trajectory> {
    evolve_from(problem, xi0, 0.0, total, dt, opts)
}

/// Like [`evolve`], starting the clock at `t0`.
pub fn evolve_from(
    problem: &Arc<ProblemSpec>,
    xi0: &StatePair,
    t0: f64,
    total: f64,
    dt: f64,
    opts: EvolveOptions,
) -> Result<Trajectory> {
    let steps = step_count(total, dt)?;
    let stride = opts.record_stride.max(1);
    if steps % stride != 0 {
        return Err(Error::param(
            "record_stride",
            format!("{stride} does not divide the step count {steps}"),
        ));
    }
    if !xi0.u.basis().as_ref().eq(problem.basis.as_ref()) || !xi0.u.same_basis(&xi0.ut) {
        return Err(Error::BasisMismatch);
    }
    let n = problem.galerkin_n;
    let mut state = StatePair {
        u: project(&xi0.u, n)?,
        ut: project(&xi0.ut, n)?,
    };
    let mut samples = Vec::with_capacity(steps / stride + 1);
    samples.push(state.clone());
    for i in 1..=steps {
        state = step(problem, &state, dt).map_err(|e| Error::AtTime {
            t: t0 + (i - 1) as f64 * dt,
            source: Box::new(e),
        })?;
        if i % stride == 0 {
            samples.push(state.clone());
        }
    }
    Ok(Trajectory::from_parts(
        problem.clone(),
        Dynamics::Galerkin,
        dt,
        stride,
        t0,
        samples,
    ))
}

/// Continues a trajectory from its last sample by another `total` time units.
pub fn continue_evolve(traj: &Trajectory, total: f64) -> Result<Trajectory> {
    evolve_from(
        traj.problem(),
        traj.last(),
        traj.t_end(),
        total,
        traj.dt(),
        EvolveOptions {
            record_stride: traj.stride(),
        },
    )
}

/// Evolves an ensemble of initial states in parallel.
pub fn evolve_ensemble(
    problem: &Arc<ProblemSpec>,
    initial: &[StatePair],
    total: f64,
    dt: f64,
    opts: EvolveOptions,
) -> Vec<Result<Trajectory>> {
    initial
        .par_iter()
        .map(|xi| evolve_with(problem, xi, total, dt, opts))
        .collect()
}

/// Exact propagator of one mode `b'' + γb' + λb = G` over a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePropagator {
    /// `exp(A h)` with `A = [[0, 1], [-λ, -γ]]`, row-major.
    pub phi: [f64; 4],
    /// `∫₀ʰ exp(A s) ds · (0, 1)ᵀ`.
    pub forcing: [f64; 2],
}

impl ModePropagator {
    pub fn new(lambda: f64, gamma: f64, h: f64) -> Self {
        let mu = -0.5 * gamma;
        let d = 0.25 * gamma * gamma - lambda;
        let (c, s) = if d < 0.0 {
            let w = (-d).sqrt();
            ((w * h).cos(), (w * h).sin() / w)
        } else if d > 0.0 {
            let v = d.sqrt();
            ((v * h).cosh(), (v * h).sinh() / v)
        } else {
            (1.0, h)
        };
        let e = (mu * h).exp();
        let phi = [
            e * (c + 0.5 * gamma * s),
            e * s,
            -lambda * e * s,
            e * (c - 0.5 * gamma * s),
        ];
        let forcing = [(1.0 - phi[3] - gamma * phi[1]) / lambda, phi[1]];
        ModePropagator { phi, forcing }
    }

    pub fn apply(&self, u: f64, w: f64, g: f64) -> (f64, f64) {
        (
            self.phi[0] * u + self.phi[1] * w + self.forcing[0] * g,
            self.phi[2] * u + self.phi[3] * w + self.forcing[1] * g,
        )
    }
}

/// Forcing for [`linear_evolve`].
#[derive(Debug, Clone, Copy)]
pub enum LinearForcing<'a> {
    Zero,
    Constant(&'a CoeffField),
    /// Values at every solver time `t_i = i·dt`, `i = 0..=steps`.
    Sampled(&'a [CoeffField]),
}

/// Integrates `v'' + γv' - Δv = G(t)` with exact per-mode propagators and
/// the forcing frozen at each step's midpoint value.
pub fn linear_evolve(
    basis: &Arc<Basis>,
    gamma: f64,
    forcing: LinearForcing<'_>,
    xi0: &StatePair,
    total: f64,
    dt: f64,
    opts: EvolveOptions,
) -> Result<Trajectory> {
    let steps = step_count(total, dt)?;
    let stride = opts.record_stride.max(1);
    if steps % stride != 0 {
        return Err(Error::param(
            "record_stride",
            format!("{stride} does not divide the step count {steps}"),
        ));
    }
    if let LinearForcing::Sampled(g) = forcing {
        if g.len() != steps + 1 {
            return Err(Error::ShapeMismatch {
                expected: vec![steps + 1],
                actual: vec![g.len()],
            });
        }
        if g.iter().any(|f| !f.basis().as_ref().eq(basis.as_ref())) {
            return Err(Error::BasisMismatch);
        }
    }
    if !xi0.u.basis().as_ref().eq(basis.as_ref()) {
        return Err(Error::BasisMismatch);
    }
    let problem = Arc::new(ProblemSpec::unforced(basis, gamma, NonlinearitySpec::zero())?);
    let props: Vec<ModePropagator> = basis
        .eigenvalues()
        .iter()
        .map(|&l| ModePropagator::new(l, gamma, dt))
        .collect();
    let total_modes = basis.total_modes();
    let mut u = xi0.u.coeffs().to_vec();
    let mut w = xi0.ut.coeffs().to_vec();
    let mut samples = Vec::with_capacity(steps / stride + 1);
    samples.push(xi0.clone());
    let mut gmid = vec![0.0; total_modes];
    for i in 0..steps {
        match forcing {
            LinearForcing::Zero => {}
            LinearForcing::Constant(g) => gmid.copy_from_slice(g.coeffs()),
            LinearForcing::Sampled(g) => {
                for (k, m) in gmid.iter_mut().enumerate() {
                    *m = 0.5 * (g[i].coeffs()[k] + g[i + 1].coeffs()[k]);
                }
            }
        }
        for k in 0..total_modes {
            let (a, b) = props[k].apply(u[k], w[k], gmid[k]);
            u[k] = a;
            w[k] = b;
        }
        if (i + 1) % stride == 0 {
            samples.push(StatePair {
                u: CoeffField::from_coeffs(basis, u.clone())?,
                ut: CoeffField::from_coeffs(basis, w.clone())?,
            });
        }
    }
    Ok(Trajectory::from_parts(
        problem,
        Dynamics::LinearExact,
        dt,
        stride,
        0.0,
        samples,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_basis;
    use approx::assert_abs_diff_eq;

    fn damped_mode_exact(t: f64) -> f64 {
        let s3 = 3f64.sqrt();
        (-t / 2.0).exp() * ((s3 * t / 2.0).cos() + (s3 * t / 2.0).sin() / s3)
    }

    fn single_mode_state(basis: &Arc<Basis>, u: f64, w: f64) -> StatePair {
        StatePair {
            u: CoeffField::mode(basis, 0).scaled(u),
            ut: CoeffField::mode(basis, 0).scaled(w),
        }
    }

    #[test]
    fn free_damped_mode_matches_closed_form() {
        let b = make_basis(1, 4, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap());
        let traj = evolve(&p, &single_mode_state(&b, 1.0, 0.0), 1.0, 1e-4).unwrap();
        let got = traj.last().u.coeffs()[0];
        assert!((got - damped_mode_exact(1.0)).abs() <= 1e-6 * damped_mode_exact(1.0).abs());
    }

    #[test]
    fn one_step_rotation_is_third_order() {
        let b = make_basis(1, 1, 4).unwrap();
        let p = ProblemSpec::unforced(&b, 1e-12, NonlinearitySpec::zero()).unwrap();
        let x0 = single_mode_state(&b, 1.0, 0.0);
        let errs: Vec<f64> = [0.1, 0.05]
            .iter()
            .map(|&dt| {
                let x1 = step(&p, &x0, dt).unwrap();
                let du = x1.u.coeffs()[0] - dt.cos();
                let dw = x1.ut.coeffs()[0] + dt.sin();
                du.hypot(dw)
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 2.8 && order < 3.2, "local order {order}");
    }

    #[test]
    fn zero_state_is_fixed() {
        let b = make_basis(2, 3, 4).unwrap();
        let p = ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap();
        let z = StatePair::zeros(&b);
        assert_eq!(step(&p, &z, 0.01).unwrap(), z);
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = make_basis(1, 4, 4).unwrap();
        assert!(ProblemSpec::unforced(&b, 0.0, NonlinearitySpec::zero()).is_err());
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap());
        let z = StatePair::zeros(&b);
        assert!(step(&p, &z, -1.0).is_err());
        assert!(evolve(&p, &z, 1.0, 0.3).is_err());
    }

    #[test]
    fn blowup_sentinel_and_nonconvergence() {
        let b = make_basis(1, 4, 4).unwrap();
        // f(u) = -u⁵ with a huge step and large data: the stage map is not a contraction
        let bad = NonlinearitySpec::polynomial(vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        let p = ProblemSpec::unforced(&b, 1.0, bad).unwrap();
        let x = single_mode_state(&b, 50.0, 0.0);
        let e = step(&p, &x, 0.5).unwrap_err();
        assert!(matches!(e, Error::NonConvergence { .. } | Error::Overflow { .. }), "{e}");
        let huge = single_mode_state(&b, 1e200, 0.0);
        let q = ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::zero()).unwrap();
        assert!(matches!(step(&q, &huge, 0.1), Err(Error::Overflow { .. })));
    }

    #[test]
    fn semigroup_property_is_exact() {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let mut x0 = StatePair::zeros(&b);
        x0.u.coeffs_mut()[0] = 1.0;
        x0.u.coeffs_mut()[2] = 0.3;
        x0.ut.coeffs_mut()[1] = -0.5;
        let once = evolve(&p, &x0, 0.2, 0.01).unwrap();
        let twice = continue_evolve(&once, 0.2).unwrap();
        let full = evolve(&p, &x0, 0.4, 0.01).unwrap();
        assert_eq!(twice.last(), full.last());
        assert_eq!(&full.states()[20..], twice.states());
        assert_abs_diff_eq!(twice.t0(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn galerkin_projection_equivariance() {
        let b = make_basis(1, 8, 4).unwrap();
        let p = Arc::new(
            ProblemSpec::new(
                &b,
                1.0,
                CoeffField::mode(&b, 0),
                NonlinearitySpec::quintic(),
                3,
            )
            .unwrap(),
        );
        let mut x0 = StatePair::zeros(&b);
        x0.u.coeffs_mut().iter_mut().enumerate().for_each(|(k, c)| *c = 0.5 / (k + 1) as f64);
        let a = evolve(&p, &x0, 0.1, 0.01).unwrap();
        let projected = StatePair {
            u: project(&x0.u, 3).unwrap(),
            ut: project(&x0.ut, 3).unwrap(),
        };
        let c = evolve(&p, &projected, 0.1, 0.01).unwrap();
        assert_eq!(a.last(), c.last());
        assert!(a.last().u.coeffs()[3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recorded_stride() {
        let b = make_basis(1, 4, 4).unwrap();
        let p = Arc::new(ProblemSpec::unforced(&b, 1.0, NonlinearitySpec::quintic()).unwrap());
        let x0 = single_mode_state(&b, 0.5, 0.0);
        let t = evolve_with(&p, &x0, 1.0, 0.01, EvolveOptions { record_stride: 10 }).unwrap();
        assert_eq!(t.len(), 11);
        assert_abs_diff_eq!(t.t_end(), 1.0, epsilon = 1e-12);
        assert!(t.verify_steps().unwrap() == 0.0);
        let dense = evolve(&p, &x0, 1.0, 0.01).unwrap();
        assert_eq!(dense.last(), t.last());
    }

    #[test]
    fn linear_free_mode() {
        let b = make_basis(1, 4, 4).unwrap();
        let t = linear_evolve(
            &b,
            1.0,
            LinearForcing::Zero,
            &single_mode_state(&b, 1.0, 0.0),
            1.0,
            0.01,
            EvolveOptions::default(),
        )
        .unwrap();
        for (i, s) in t.states().iter().enumerate() {
            assert_abs_diff_eq!(s.u.coeffs()[0], damped_mode_exact(t.time(i)), epsilon = 1e-12);
        }
    }

    #[test]
    fn linear_equilibrium_is_stationary() {
        let b = make_basis(1, 6, 4).unwrap();
        let g = CoeffField::from_coeffs(&b, vec![1.0, -0.5, 0.25, 0.0, 0.1, 0.0]).unwrap();
        let ustar = crate::spectral::fractional_laplacian(&g, -1.0);
        let x0 = StatePair {
            u: ustar,
            ut: CoeffField::zeros(&b),
        };
        let t = linear_evolve(&b, 0.7, LinearForcing::Constant(&g), &x0, 2.0, 0.01, EvolveOptions::default()).unwrap();
        assert!(t.last().sub(&x0).max_abs() < 1e-12);
        let z = linear_evolve(
            &b,
            0.7,
            LinearForcing::Zero,
            &StatePair::zeros(&b),
            1.0,
            0.1,
            EvolveOptions::default(),
        )
        .unwrap();
        assert!(z.last().max_abs() == 0.0);
    }

    #[test]
    fn linear_sampling_mismatch() {
        let b = make_basis(1, 2, 4).unwrap();
        let g = vec![CoeffField::zeros(&b); 3];
        let r = linear_evolve(
            &b,
            1.0,
            LinearForcing::Sampled(&g),
            &StatePair::zeros(&b),
            1.0,
            0.1,
            EvolveOptions::default(),
        );
        assert!(matches!(r, Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn overdamped_and_critical_propagators() {
        // compare against a fine RK4 integration of the mode system
        for &(lam, gamma) in &[(1.0, 3.0), (1.0, 2.0), (4.0, 0.5)] {
            let prop = ModePropagator::new(lam, gamma, 0.5);
            let (u, w) = prop.apply(1.0, -0.3, 0.2);
            let rhs = |y: [f64; 2]| [y[1], -lam * y[0] - gamma * y[1] + 0.2];
            let mut y = [1.0, -0.3];
            let h = 0.5 / 2000.0;
            for _ in 0..2000 {
                let k1 = rhs(y);
                let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
                let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
                let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
                for j in 0..2 {
                    y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
            assert_abs_diff_eq!(u, y[0], epsilon = 1e-12);
            assert_abs_diff_eq!(w, y[1], epsilon = 1e-12);
        }
    }
}
