//! Dirichlet Laplacian eigenbasis on the box `(0, π)^dim`.
//!
//! Eigenfunctions are `e_k(x) = (2/π)^{dim/2} Π sin(k_i x_i)` with eigenvalue
//! `λ_k = |k|²`. Modes are stored in ascending eigenvalue order, ties broken
//! lexicographically on the multi-index. Grid values live on the midpoint
//! grid `x_j = (j + 1/2) π / M`, `M = grid_factor · N`, where the discrete
//! sine sums are exact for trigonometric products of total degree below `2M`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};

use crate::error::{Error, Result};

/// Real tensor of grid samples, shape `[M; dim]`.
pub type Grid = ArrayD<f64>;

#[derive(Debug)]
pub struct Basis {
    dim: usize,
    modes_per_dim: usize,
    grid_factor: usize,
    modes: Vec<[usize; 3]>,
    eigenvalues: Vec<f64>,
    /// Sorted index -> row-major offset in the `[N; dim]` coefficient tensor.
    tensor_pos: Vec<usize>,
    /// `M × N` table of `sqrt(2/π) sin(k x_j)`.
    sine_table: Vec<f64>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.modes_per_dim == other.modes_per_dim
            && self.grid_factor == other.grid_factor
    }
}

/// Builds the truncated eigenbasis with `modes_per_dim` modes along each axis.
pub fn make_basis(dim: usize, modes_per_dim: usize, grid_factor: usize) -> Result<Arc<Basis>> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidBasis(format!("dim must be 1, 2 or 3, got {dim}")));
    }
    if modes_per_dim == 0 {
        return Err(Error::InvalidBasis("modes_per_dim must be at least 1".into()));
    }
    if grid_factor < 2 {
        return Err(Error::InvalidBasis(format!(
            "grid_factor must be at least 2, got {grid_factor}"
        )));
    }
    let n = modes_per_dim;
    let total = n.pow(dim as u32);
    let mut modes: Vec<[usize; 3]> = (0..total)
        .map(|flat| {
            let mut idx = [0usize; 3];
            let mut rem = flat;
            for axis in (0..dim).rev() {
                idx[axis] = rem % n + 1;
                rem /= n;
            }
            idx
        })
        .collect();
    let lambda = |k: &[usize; 3]| k.iter().map(|&ki| (ki * ki) as u64).sum::<u64>();
    // stable sort keeps lexicographic order among equal eigenvalues
    modes.sort_by_key(lambda);
    let eigenvalues = modes.iter().map(|k| lambda(k) as f64).collect();
    let tensor_pos = modes
        .iter()
        .map(|k| (0..dim).fold(0, |acc, axis| acc * n + (k[axis] - 1)))
        .collect();

    let m = grid_factor * n;
    let norm = (2.0 / PI).sqrt();
    let mut sine_table = vec![0.0; m * n];
    for j in 0..m {
        let x = (j as f64 + 0.5) * PI / m as f64;
        for k in 1..=n {
            sine_table[j * n + (k - 1)] = norm * (k as f64 * x).sin();
        }
    }

    Ok(Arc::new(Basis {
        dim,
        modes_per_dim,
        grid_factor,
        modes,
        eigenvalues,
        tensor_pos,
        sine_table,
    }))
}

impl Basis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes_per_dim(&self) -> usize {
        self.modes_per_dim
    }

    pub fn grid_factor(&self) -> usize {
        self.grid_factor
    }

    pub fn total_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Grid points per dimension.
    pub fn grid_len(&self) -> usize {
        self.grid_factor * self.modes_per_dim
    }

    pub fn grid_shape(&self) -> Vec<usize> {
        vec![self.grid_len(); self.dim]
    }

    /// Eigenvalues in the sorted enumeration.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues[i]
    }

    /// Multi-index of sorted mode `i` (only the first `dim` entries are used).
    pub fn mode_index(&self, i: usize) -> &[usize] {
        &self.modes[i][..self.dim]
    }

    /// Position of a multi-index in the sorted enumeration.
    pub fn sorted_index_of(&self, multi: &[usize]) -> Option<usize> {
        if multi.len() != self.dim || multi.iter().any(|&k| k == 0 || k > self.modes_per_dim) {
            return None;
        }
        self.modes.iter().position(|k| &k[..self.dim] == multi)
    }

    /// Midpoint quadrature weight of one grid cell, `(π/M)^dim`.
    pub fn quadrature_weight(&self) -> f64 {
        (PI / self.grid_len() as f64).powi(self.dim as i32)
    }

    /// Grid coordinates along one axis.
    pub fn grid_points(&self) -> Vec<f64> {
        let m = self.grid_len();
        (0..m).map(|j| (j as f64 + 0.5) * PI / m as f64).collect()
    }

    /// Measure of the box.
    pub fn volume(&self) -> f64 {
        PI.powi(self.dim as i32)
    }

    /// Grid quadrature of a sampled function.
    pub fn integrate(&self, grid: &Grid) -> f64 {
        self.quadrature_weight() * grid.iter().sum::<f64>()
    }

    fn same(a: &Arc<Basis>, b: &Arc<Basis>) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }
}

/// Applies `matrix` (`out × inp`, row-major) along every axis of a `[inp; dim]` tensor.
fn apply_separable(data: &[f64], dim: usize, inp: usize, out: usize, matrix: &[f64]) -> Vec<f64> {
    let mut shape = vec![inp; dim];
    let mut cur = data.to_vec();
    for axis in 0..dim {
        let pre: usize = shape[..axis].iter().product();
        let post: usize = shape[axis + 1..].iter().product();
        let mut next = vec![0.0; pre * out * post];
        for p in 0..pre {
            for o in 0..out {
                let dst = &mut next[(p * out + o) * post..(p * out + o + 1) * post];
                for i in 0..inp {
                    let a = matrix[o * inp + i];
                    if a == 0.0 {
                        continue;
                    }
                    let src = &cur[(p * inp + i) * post..(p * inp + i + 1) * post];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += a * s;
                    }
                }
            }
        }
        shape[axis] = out;
        cur = next;
    }
    cur
}

/// Coefficients of a function in the truncated basis, indexed by the sorted
/// enumeration.
#[derive(Debug, Clone)]
pub struct CoeffField {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl PartialEq for CoeffField {
    fn eq(&self, other: &Self) -> bool {
        Basis::same(&self.basis, &other.basis) && self.coeffs == other.coeffs
    }
}

impl CoeffField {
    pub fn zeros(basis: &Arc<Basis>) -> Self {
        CoeffField {
            basis: basis.clone(),
            coeffs: vec![0.0; basis.total_modes()],
        }
    }

    pub fn from_coeffs(basis: &Arc<Basis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.total_modes() {
            return Err(Error::ShapeMismatch {
                expected: vec![basis.total_modes()],
                actual: vec![coeffs.len()],
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        Ok(CoeffField {
            basis: basis.clone(),
            coeffs,
        })
    }

    /// The eigenfunction with sorted index `i` (0-based).
    pub fn mode(basis: &Arc<Basis>, i: usize) -> Self {
        let mut f = Self::zeros(basis);
        f.coeffs[i] = 1.0;
        f
    }

    /// The eigenfunction with the given multi-index, e.g. `[1, 1]`.
    pub fn eigenfunction(basis: &Arc<Basis>, multi: &[usize]) -> Result<Self> {
        let i = basis.sorted_index_of(multi).ok_or_else(|| {
            Error::param("mode index", format!("{multi:?} not in basis"))
        })?;
        Ok(Self::mode(basis, i))
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn same_basis(&self, other: &CoeffField) -> bool {
        Basis::same(&self.basis, &other.basis)
    }

    /// L² inner product (the basis is orthonormal).
    pub fn dot(&self, other: &CoeffField) -> f64 {
        debug_assert!(self.same_basis(other));
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> CoeffField {
        CoeffField {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &CoeffField) -> CoeffField {
        debug_assert!(self.same_basis(other));
        CoeffField {
            basis: self.basis.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

impl Add for &CoeffField {
    type Output = CoeffField;
    fn add(self, rhs: &CoeffField) -> CoeffField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &CoeffField {
    type Output = CoeffField;
    fn sub(self, rhs: &CoeffField) -> CoeffField {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<f64> for &CoeffField {
    type Output = CoeffField;
    fn mul(self, s: f64) -> CoeffField {
        self.scaled(s)
    }
}

impl Neg for &CoeffField {
    type Output = CoeffField;
    fn neg(self) -> CoeffField {
        self.scaled(-1.0)
    }
}

/// Phase-space point `(u, ∂ₜu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub u: CoeffField,
    pub ut: CoeffField,
}

impl StatePair {
    pub fn new(u: CoeffField, ut: CoeffField) -> Result<Self> {
        if !u.same_basis(&ut) {
            return Err(Error::BasisMismatch);
        }
        Ok(StatePair { u, ut })
    }

    pub fn zeros(basis: &Arc<Basis>) -> Self {
        StatePair {
            u: CoeffField::zeros(basis),
            ut: CoeffField::zeros(basis),
        }
    }

    pub fn basis(&self) -> &Arc<Basis> {
        self.u.basis()
    }

    pub fn same_basis(&self, other: &StatePair) -> bool {
        self.u.same_basis(&other.u)
    }

    pub fn sub(&self, other: &StatePair) -> StatePair {
        StatePair {
            u: &self.u - &other.u,
            ut: &self.ut - &other.ut,
        }
    }

    pub fn add(&self, other: &StatePair) -> StatePair {
        StatePair {
            u: &self.u + &other.u,
            ut: &self.ut + &other.ut,
        }
    }

    pub fn scaled(&self, s: f64) -> StatePair {
        StatePair {
            u: self.u.scaled(s),
            ut: self.ut.scaled(s),
        }
    }

    /// Average of two states.
    pub fn midpoint(&self, other: &StatePair) -> StatePair {
        self.add(other).scaled(0.5)
    }

    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.ut.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.u.coeffs().iter().chain(self.ut.coeffs()).all(|c| c.is_finite())
    }
}

/// Samples the field on the oversampled grid.
pub fn to_grid(f: &CoeffField) -> Grid {
    let b = &f.basis;
    let n = b.modes_per_dim;
    let mut tensor = vec![0.0; b.total_modes()];
    for (i, &pos) in b.tensor_pos.iter().enumerate() {
        tensor[pos] = f.coeffs[i];
    }
    let values = apply_separable(&tensor, b.dim, n, b.grid_len(), &b.sine_table);
    ArrayD::from_shape_vec(IxDyn(&b.grid_shape()), values).expect("grid shape")
}

/// Discrete sine quadrature of grid samples against every basis function.
pub fn from_grid(g: &Grid, basis: &Arc<Basis>) -> Result<CoeffField> {
    let shape = basis.grid_shape();
    if g.shape() != shape.as_slice() {
        return Err(Error::ShapeMismatch {
            expected: shape,
            actual: g.shape().to_vec(),
        });
    }
    let n = basis.modes_per_dim;
    let m = basis.grid_len();
    let h = PI / m as f64;
    // transposed and weighted table: N × M
    let mut analysis = vec![0.0; n * m];
    for j in 0..m {
        for k in 0..n {
            analysis[k * m + j] = h * basis.sine_table[j * n + k];
        }
    }
    let data: Vec<f64> = g.iter().copied().collect();
    let tensor = apply_separable(&data, basis.dim, m, n, &analysis);
    let coeffs = basis.tensor_pos.iter().map(|&pos| tensor[pos]).collect();
    Ok(CoeffField {
        basis: basis.clone(),
        coeffs,
    })
}

/// Orthoprojector onto the first `n` modes of the sorted enumeration.
pub fn project(f: &CoeffField, n: usize) -> Result<CoeffField> {
    let total = f.basis.total_modes();
    if n == 0 || n > total {
        return Err(Error::ModeOutOfRange { n, total });
    }
    let mut out = f.clone();
    out.coeffs[n..].iter_mut().for_each(|c| *c = 0.0);
    Ok(out)
}

/// `Δf`: multiplies each coefficient by `-λ_k`.
pub fn laplacian_apply(f: &CoeffField) -> CoeffField {
    CoeffField {
        basis: f.basis.clone(),
        coeffs: f
            .coeffs
            .iter()
            .zip(&f.basis.eigenvalues)
            .map(|(c, l)| -l * c)
            .collect(),
    }
}

/// `(Σ λ_k^s c_k²)^{1/2}`.
pub fn sobolev_norm(f: &CoeffField, s: f64) -> f64 {
    sobolev_norm_sq(f, s).sqrt()
}

pub(crate) fn sobolev_norm_sq(f: &CoeffField, s: f64) -> f64 {
    f.coeffs
        .iter()
        .zip(&f.basis.eigenvalues)
        .map(|(c, l)| {
            let w = if s == 0.0 {
                1.0
            } else if s == 1.0 {
                *l
            } else if s == 2.0 {
                l * l
            } else {
                l.powf(s)
            };
            w * c * c
        })
        .sum()
}

/// Applies `(-Δ)^{s}` in coefficient space.
pub fn fractional_laplacian(f: &CoeffField, s: f64) -> CoeffField {
    CoeffField {
        basis: f.basis.clone(),
        coeffs: f
            .coeffs
            .iter()
            .zip(&f.basis.eigenvalues)
            .map(|(c, l)| l.powf(s) * c)
            .collect(),
    }
}
