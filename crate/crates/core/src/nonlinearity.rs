//! Polynomial nonlinearities `f(u) = Σ a_j u^j` with antiderivative `F`,
//! and certifiers for the structural inequalities imposed on `f`.
//!
//! Every certifier combines an exact leading-term/critical-point analysis
//! with a dense sample sweep over `[-U, U]` as a cross-check.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Grid;

/// Dense real polynomial, coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &a| acc * x + a)
    }

    /// Index of the highest nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.iter().rposition(|&a| a != 0.0)
    }

    pub fn leading(&self) -> f64 {
        self.degree().map_or(0.0, |d| self.0[d])
    }

    pub fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, &a)| j as f64 * a)
                .collect(),
        )
    }

    /// Antiderivative vanishing at zero.
    pub fn antiderivative(&self) -> Poly {
        let mut c = Vec::with_capacity(self.0.len() + 1);
        c.push(0.0);
        c.extend(self.0.iter().enumerate().map(|(j, &a)| a / (j + 1) as f64));
        Poly(c)
    }

    /// `u · p(u)`.
    pub fn times_x(&self) -> Poly {
        let mut c = Vec::with_capacity(self.0.len() + 1);
        c.push(0.0);
        c.extend_from_slice(&self.0);
        Poly(c)
    }

    pub fn scaled(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|a| a * s).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly(
            (0..n)
                .map(|j| self.0.get(j).unwrap_or(&0.0) + other.0.get(j).unwrap_or(&0.0))
                .collect(),
        )
    }

    /// `p(u) - s·u^k`.
    pub fn minus_monomial(&self, s: f64, k: usize) -> Poly {
        let mut c = self.0.clone();
        if c.len() <= k {
            c.resize(k + 1, 0.0);
        }
        c[k] -= s;
        Poly(c)
    }

    /// Cauchy bound on the magnitude of real roots.
    fn root_bound(&self) -> f64 {
        match self.degree() {
            None | Some(0) => 0.0,
            Some(d) => {
                let lead = self.0[d].abs();
                1.0 + self.0[..d].iter().fold(0.0f64, |m, a| m.max(a.abs() / lead))
            }
        }
    }
}

/// Result of minimizing a polynomial over the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infimum {
    Bounded { min: f64, argmin: f64 },
    Unbounded { witness: f64 },
}

/// Exact infimum of a polynomial over ℝ: leading-term test, then critical
/// points located by bracketing sign changes of `p'` inside the Cauchy bound.
pub fn poly_infimum(p: &Poly, sweep_bound: f64) -> Infimum {
    let deg = match p.degree() {
        None => return Infimum::Bounded { min: 0.0, argmin: 0.0 },
        Some(d) => d,
    };
    if deg == 0 {
        return Infimum::Bounded {
            min: p.0[0],
            argmin: 0.0,
        };
    }
    if deg % 2 == 1 || p.leading() < 0.0 {
        let r = p.root_bound().max(sweep_bound);
        let witness = if p.eval(r) < p.eval(-r) { r } else { -r };
        return Infimum::Unbounded { witness };
    }
    let dp = p.derivative();
    let r = dp.root_bound() + 1.0;
    let pieces = 20_000usize;
    let h = 2.0 * r / pieces as f64;
    let mut best = (p.eval(0.0), 0.0);
    let consider = |x: f64, best: &mut (f64, f64)| {
        let v = p.eval(x);
        if v < best.0 {
            *best = (v, x);
        }
    };
    let mut x0 = -r;
    let mut d0 = dp.eval(x0);
    for i in 1..=pieces {
        let x1 = -r + i as f64 * h;
        let d1 = dp.eval(x1);
        if d0 == 0.0 {
            consider(x0, &mut best);
        } else if d0.signum() != d1.signum() {
            consider(bisect(&dp, x0, x1), &mut best);
        }
        x0 = x1;
        d0 = d1;
    }
    consider(r, &mut best);
    Infimum::Bounded {
        min: best.0,
        argmin: best.1,
    }
}

fn bisect(p: &Poly, mut a: f64, mut b: f64) -> f64 {
    let mut fa = p.eval(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = p.eval(m);
        if fm == 0.0 || (b - a).abs() <= 1e-15 * (1.0 + m.abs()) {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// A polynomial nonlinearity together with its growth exponent `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    coeffs: Vec<f64>,
    growth_exponent: f64,
}

impl NonlinearitySpec {
    /// Builds `f(u) = Σ coeffs[j] u^j`. The growth exponent defaults to
    /// `max(q - 2, -1)` so that the modified energy controls `‖u‖_{L^{q+1}}`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DegenerateNonlinearity("empty coefficient list".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("nonlinearity coefficients"));
        }
        let q = Poly(coeffs.clone()).degree().unwrap_or(0);
        Ok(NonlinearitySpec {
            coeffs,
            growth_exponent: (q as f64 - 2.0).max(-1.0),
        })
    }

    pub fn zero() -> Self {
        Self::polynomial(vec![0.0]).expect("zero polynomial")
    }

    /// `f(u) = u⁵`.
    pub fn quintic() -> Self {
        Self::polynomial(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).expect("quintic")
    }

    pub fn with_growth_exponent(mut self, p: f64) -> Self {
        self.growth_exponent = p;
        self
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn degree(&self) -> usize {
        self.f_poly().degree().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn f_poly(&self) -> Poly {
        Poly(self.coeffs.clone())
    }

    pub fn antiderivative_poly(&self) -> Poly {
        self.f_poly().antiderivative()
    }

    pub fn f(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| acc * u + a)
    }

    pub fn big_f(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (j, &a) in self.coeffs.iter().enumerate().rev() {
            acc = acc * u + a / (j + 1) as f64;
        }
        acc * u
    }

    pub fn f_prime(&self, u: f64) -> f64 {
        self.f_poly().derivative().eval(u)
    }

    /// Subcritical defect `κ` with `|f'(u)| ≤ C(1 + |u|^{4-κ})`, capped at 4;
    /// `None` for degree 5 and above.
    pub fn subcritical_defect(&self) -> Option<f64> {
        let q = self.degree();
        if q >= 5 {
            None
        } else {
            Some((5.0 - q as f64).min(4.0))
        }
    }
}

impl fmt::Display for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(j, a)| match j {
                0 => format!("{a}"),
                1 => format!("{a}·u"),
                _ => format!("{a}·u^{j}"),
            })
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

pub fn eval_f(spec: &NonlinearitySpec, u_grid: &Grid) -> Grid {
    u_grid.mapv(|u| spec.f(u))
}

pub fn eval_big_f(spec: &NonlinearitySpec, u_grid: &Grid) -> Grid {
    u_grid.mapv(|u| spec.big_f(u))
}

/// The structural inequalities that can be certified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionId {
    /// `|f'(u)| ≤ C(1 + |u|⁴)`.
    GrowthQuintic,
    /// `|f'(u)| ≤ C(1 + |u|^{4-κ})`.
    Subcritical(f64),
    /// `f(u)u ≥ -C`.
    FUDissipative,
    /// `F(u) ≥ -C + κ|u|⁶`, `κ > 0`.
    FCoercive,
    /// `f(u)u - 4F(u) ≥ -C`.
    FUMinus4F,
    /// `f'(u) ≥ -K`.
    FPrimeLower,
    /// `f(0) = 0`, `|f''(v)| ≤ C(1 + |v|^p)`, `f'(v) ≥ -K + δ|v|^{p+1}`.
    Conditions003,
}

impl fmt::Display for AssumptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssumptionId::GrowthQuintic => write!(f, "growth_quintic"),
            AssumptionId::Subcritical(k) => write!(f, "subcritical({k})"),
            AssumptionId::FUDissipative => write!(f, "f_u_dissipative"),
            AssumptionId::FCoercive => write!(f, "F_coercive"),
            AssumptionId::FUMinus4F => write!(f, "f_u_minus_4F"),
            AssumptionId::FPrimeLower => write!(f, "f_prime_lower"),
            AssumptionId::Conditions003 => write!(f, "conditions_00_3"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCertificate {
    pub assumption: AssumptionId,
    pub holds: bool,
    pub constants: BTreeMap<String, f64>,
    /// Sample point attaining the tightest margin (or violating the inequality).
    pub witness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions {
    pub sweep_bound: f64,
    pub samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            sweep_bound: 1e3,
            samples: 100_000,
        }
    }
}

impl CertifyOptions {
    fn sweep(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.samples.max(3);
        let u = self.sweep_bound;
        (0..n).map(move |i| -u + 2.0 * u * i as f64 / (n - 1) as f64)
    }
}

/// Lower-bound certificate for `p ≥ -C`: returns (holds, C, witness).
fn lower_bound(p: &Poly, opts: &CertifyOptions) -> (bool, f64, f64) {
    match poly_infimum(p, opts.sweep_bound) {
        Infimum::Unbounded { witness } => (false, f64::INFINITY, witness),
        Infimum::Bounded { min, argmin } => {
            // the sweep may only confirm, never beat, the exact minimum
            let (smin, sarg) = opts
                .sweep()
                .map(|x| (p.eval(x), x))
                .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
            let (m, x) = if smin < min { (smin, sarg) } else { (min, argmin) };
            (true, (-m).max(0.0), x)
        }
    }
}

/// Growth certificate `|h(u)| ≤ C(1 + |u|^r)`: returns (holds, C, witness).
fn growth_bound(h: &Poly, r: f64, opts: &CertifyOptions) -> (bool, f64, f64) {
    let deg = h.degree().map_or(0, |d| d) as f64;
    if deg > r + 1e-12 {
        return (false, f64::INFINITY, opts.sweep_bound);
    }
    let asymptote = if (deg - r).abs() <= 1e-12 {
        h.leading().abs()
    } else {
        0.0
    };
    let (sup, arg) = opts
        .sweep()
        .map(|x| (h.eval(x).abs() / (1.0 + x.abs().powf(r)), x))
        .fold((asymptote, f64::INFINITY), |a, b| if b.0 > a.0 { b } else { a });
    (true, sup, arg)
}

/// Certificate for `p(u) ≥ -C + c·|u|^k` with `c > 0` (k even).
fn coercive_bound(p: &Poly, k: usize, opts: &CertifyOptions) -> (bool, f64, f64, f64) {
    let deg = p.degree().unwrap_or(0);
    if deg < k || deg % 2 == 1 || p.leading() <= 0.0 {
        let w = if p.eval(opts.sweep_bound) < p.eval(-opts.sweep_bound) {
            opts.sweep_bound
        } else {
            -opts.sweep_bound
        };
        return (false, 0.0, f64::INFINITY, w);
    }
    let candidates = if deg > k {
        vec![1.0]
    } else {
        vec![p.leading(), 0.5 * p.leading()]
    };
    for c in candidates {
        let (ok, big_c, w) = lower_bound(&p.minus_monomial(c, k), opts);
        if ok {
            return (true, c, big_c, w);
        }
    }
    unreachable!("half the leading coefficient always leaves a bounded-below remainder")
}

pub fn certify(spec: &NonlinearitySpec, assumption: AssumptionId) -> Result<AssumptionCertificate> {
    certify_with(spec, assumption, &CertifyOptions::default())
}

pub fn certify_with(
    spec: &NonlinearitySpec,
    assumption: AssumptionId,
    opts: &CertifyOptions,
) -> Result<AssumptionCertificate> {
    if spec.coeffs.is_empty() {
        return Err(Error::DegenerateNonlinearity("empty coefficient list".into()));
    }
    let f = spec.f_poly();
    let big_f = f.antiderivative();
    let df = f.derivative();
    let mut constants = BTreeMap::new();
    let (holds, witness) = match assumption {
        AssumptionId::GrowthQuintic => {
            let (ok, c, w) = growth_bound(&df, 4.0, opts);
            constants.insert("C".into(), c);
            (ok, w)
        }
        AssumptionId::Subcritical(kappa) => {
            if !(kappa > 0.0 && kappa <= 4.0) {
                return Err(Error::param("kappa", format!("must lie in (0, 4], got {kappa}")));
            }
            let (ok, c, w) = growth_bound(&df, 4.0 - kappa, opts);
            constants.insert("C".into(), c);
            constants.insert("kappa".into(), kappa);
            (ok, w)
        }
        AssumptionId::FUDissipative => {
            let (ok, c, w) = lower_bound(&f.times_x(), opts);
            constants.insert("C".into(), c);
            (ok, w)
        }
        AssumptionId::FCoercive => {
            let (ok, kappa, c, w) = coercive_bound(&big_f, 6, opts);
            constants.insert("kappa".into(), kappa);
            constants.insert("C".into(), c);
            (ok, w)
        }
        AssumptionId::FUMinus4F => {
            let (ok, c, w) = lower_bound(&f.times_x().add(&big_f.scaled(-4.0)), opts);
            constants.insert("C".into(), c);
            (ok, w)
        }
        AssumptionId::FPrimeLower => {
            let (ok, k, w) = lower_bound(&df, opts);
            constants.insert("K".into(), k);
            (ok, w)
        }
        AssumptionId::Conditions003 => {
            let p = spec.growth_exponent;
            let zero_ok = f.eval(0.0) == 0.0;
            let (growth_ok, c, w_growth) = growth_bound(&df.derivative(), p, opts);
            let k = p + 1.0;
            let (coer_ok, delta, big_k, w_coer) = if k >= 0.0 && k.fract() == 0.0 && (k as usize) % 2 == 0 {
                coercive_bound(&df, k as usize, opts)
            } else {
                // non-polynomial weight: sweep only
                let delta = df.leading().max(0.0) * 0.5;
                let (m, x) = opts
                    .sweep()
                    .map(|x| (df.eval(x) - delta * x.abs().powf(k), x))
                    .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
                (delta > 0.0, delta, (-m).max(0.0), x)
            };
            constants.insert("C".into(), c);
            constants.insert("K".into(), big_k);
            constants.insert("delta".into(), delta);
            constants.insert("p".into(), p);
            let ok = zero_ok && growth_ok && coer_ok;
            let w = if !zero_ok {
                0.0
            } else if !growth_ok {
                w_growth
            } else {
                w_coer
            };
            (ok, w)
        }
    };
    Ok(AssumptionCertificate {
        assumption,
        holds,
        constants,
        witness: Some(witness).filter(|w| w.is_finite()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, ArrayD};

    fn grid(v: &[f64]) -> Grid {
        arr1(v).into_dyn()
    }

    #[test]
    fn quintic_values() {
        let s = NonlinearitySpec::quintic();
        assert_eq!(eval_f(&s, &grid(&[2.0]))[[0]], 32.0);
        assert_abs_diff_eq!(eval_big_f(&s, &grid(&[2.0]))[[0]], 64.0 / 6.0, epsilon = 1e-14);
        assert_eq!(s.degree(), 5);
        assert_eq!(s.growth_exponent(), 3.0);
    }

    #[test]
    fn zero_and_shifted() {
        let z = NonlinearitySpec::zero();
        assert!(eval_f(&z, &ArrayD::from_elem(vec![3, 3], 1.5)).iter().all(|&v| v == 0.0));
        let s = NonlinearitySpec::polynomial(vec![0.0, -1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.f(1.0), 0.0);
        assert_abs_diff_eq!(s.big_f(1.0), -1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(
            NonlinearitySpec::polynomial(vec![]),
            Err(Error::DegenerateNonlinearity(_))
        ));
    }

    #[test]
    fn antiderivative_identity() {
        let s = NonlinearitySpec::polynomial(vec![0.3, -1.0, 2.0, 0.5, 0.0, 1.0]).unwrap();
        let back = s.antiderivative_poly().derivative();
        for (a, b) in back.0.iter().zip(s.coeffs()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
        }
        assert_eq!(s.big_f(0.0), 0.0);
    }

    #[test]
    fn quintic_certificates() {
        let s = NonlinearitySpec::quintic();
        let c = certify(&s, AssumptionId::FCoercive).unwrap();
        assert!(c.holds);
        assert_abs_diff_eq!(c.constants["kappa"], 1.0 / 6.0);
        assert_eq!(c.constants["C"], 0.0);
        let c = certify(&s, AssumptionId::FUMinus4F).unwrap();
        assert!(c.holds);
        assert_eq!(c.constants["C"], 0.0);
        for id in [
            AssumptionId::GrowthQuintic,
            AssumptionId::FUDissipative,
            AssumptionId::FPrimeLower,
            AssumptionId::Conditions003,
        ] {
            assert!(certify(&s, id).unwrap().holds, "{id}");
        }
        let c = certify(&s, AssumptionId::Conditions003).unwrap();
        assert_abs_diff_eq!(c.constants["C"], 20.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.constants["delta"], 5.0);
        assert_eq!(c.constants["K"], 0.0);
        assert!(!certify(&s, AssumptionId::Subcritical(1.0)).unwrap().holds);
    }

    #[test]
    fn prime_lower_of_shifted_quintic() {
        let s = NonlinearitySpec::polynomial(vec![0.0, -1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let c = certify(&s, AssumptionId::FPrimeLower).unwrap();
        assert!(c.holds);
        assert_abs_diff_eq!(c.constants["K"], 1.0, epsilon = 1e-12);
        // F = u⁶/6 - u²/2 needs κ below 1/6
        let c = certify(&s, AssumptionId::FCoercive).unwrap();
        assert!(c.holds);
        assert!(c.constants["kappa"] > 0.0 && c.constants["kappa"] < 1.0 / 6.0);
    }

    #[test]
    fn negative_cubic_not_dissipative() {
        let s = NonlinearitySpec::polynomial(vec![0.0, 0.0, 0.0, -1.0]).unwrap();
        let c = certify(&s, AssumptionId::FUDissipative).unwrap();
        assert!(!c.holds);
        let w = c.witness.unwrap();
        assert!(w.abs() >= 1e3);
        assert!(s.f(w) * w < -1e11);
    }

    #[test]
    fn cubic_fails_coercivity_but_is_subcritical() {
        let s = NonlinearitySpec::polynomial(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(!certify(&s, AssumptionId::FCoercive).unwrap().holds);
        assert_eq!(s.subcritical_defect(), Some(2.0));
        let c = certify(&s, AssumptionId::Subcritical(2.0)).unwrap();
        assert!(c.holds);
        assert_abs_diff_eq!(c.constants["C"], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn infimum_finds_interior_minimum() {
        // (u² - 2)² - 1 has minimum -1 at ±√2
        let p = Poly(vec![3.0, 0.0, -4.0, 0.0, 1.0]);
        match poly_infimum(&p, 1e3) {
            Infimum::Bounded { min, argmin } => {
                assert_abs_diff_eq!(min, -1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(argmin.abs(), 2f64.sqrt(), epsilon = 1e-7);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certification_is_deterministic() {
        let s = NonlinearitySpec::polynomial(vec![0.0, -2.0, 0.5, 1.0, 0.0, 1.0]).unwrap();
        let a = certify(&s, AssumptionId::FUMinus4F).unwrap();
        let b = certify(&s, AssumptionId::FUMinus4F).unwrap();
        assert_eq!(a, b);
    }
}
