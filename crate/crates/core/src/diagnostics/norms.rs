use crate::spectral::{sobolev_norm_sq, to_grid, CoeffField, StatePair};

/// `‖ξ‖_ℰ² = ‖∇u‖² + ‖∂ₜu‖²`.
pub fn energy_norm(xi: &StatePair) -> f64 {
    (sobolev_norm_sq(&xi.u, 1.0) + sobolev_norm_sq(&xi.ut, 0.0)).sqrt()
}

/// Norm of `ℰ₁ = (H² ∩ H¹₀) × H¹₀`, with `‖Δu‖` as the `H²` norm.
pub fn e1_norm(xi: &StatePair) -> f64 {
    (sobolev_norm_sq(&xi.u, 2.0) + sobolev_norm_sq(&xi.ut, 1.0)).sqrt()
}

/// Norm of `ℰ_δ = H^{1+δ} × H^δ`.
pub fn e_delta_norm(xi: &StatePair, delta: f64) -> f64 {
    (sobolev_norm_sq(&xi.u, 1.0 + delta) + sobolev_norm_sq(&xi.ut, delta)).sqrt()
}

/// Energy norm augmented by `‖u‖_{L^{p+3}}^{p+3}` under the square root.
pub fn modified_energy_norm(xi: &StatePair, p: f64) -> f64 {
    let e = energy_norm(xi);
    (e * e + lp_integral(&xi.u, p + 3.0)).sqrt()
}

/// `∫ |u|^p` by grid quadrature.
pub fn lp_integral(u: &CoeffField, p: f64) -> f64 {
    let grid = to_grid(u);
    let b = u.basis();
    let sum: f64 = if p == 2.0 {
        grid.iter().map(|v| v * v).sum()
    } else if p.fract() == 0.0 && p <= 64.0 {
        let k = p as i32;
        grid.iter().map(|v| v.abs().powi(k)).sum()
    } else {
        grid.iter().map(|v| v.abs().powf(p)).sum()
    };
    b.quadrature_weight() * sum
}

/// `‖u‖_{L^p}` on the oversampled grid.
pub fn lp_norm(u: &CoeffField, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm needs p >= 1, got {p}");
    lp_integral(u, p).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_basis, sobolev_norm};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn energy_examples() {
        let b = make_basis(1, 4, 4).unwrap();
        let e1 = CoeffField::mode(&b, 0);
        let z = CoeffField::zeros(&b);
        assert_abs_diff_eq!(energy_norm(&StatePair::new(e1.clone(), z.clone()).unwrap()), 1.0);
        let xi = StatePair::new(z.clone(), e1.clone()).unwrap();
        assert_abs_diff_eq!(energy_norm(&xi), 1.0);
        assert_abs_diff_eq!(e1_norm(&xi), 1.0);
        let xi2 = StatePair::new(CoeffField::mode(&b, 1), z).unwrap();
        assert_abs_diff_eq!(e1_norm(&xi2), 4.0);
        assert_abs_diff_eq!(e_delta_norm(&xi2, 0.0), 2.0);
    }

    #[test]
    fn lp_examples() {
        let b = make_basis(1, 4, 4).unwrap();
        let e1 = CoeffField::mode(&b, 0);
        assert_abs_diff_eq!(lp_norm(&e1, 2.0), 1.0, epsilon = 1e-12);
        // ∫ sin⁶ over (0, π) is 5π/16
        let exact = ((2.0 / PI).powi(3) * 5.0 * PI / 16.0).powf(1.0 / 6.0);
        assert_abs_diff_eq!(lp_norm(&e1, 6.0), exact, epsilon = 1e-12);
    }

    #[test]
    fn normalized_lp_increases_with_p() {
        // projection of the constant 1/√π (unit L² mass)
        let b = make_basis(1, 16, 4).unwrap();
        let c: Vec<f64> = (1..=16)
            .map(|k| if k % 2 == 1 { (2.0 / PI).sqrt() * 2.0 / k as f64 / PI.sqrt() } else { 0.0 })
            .collect();
        let u = CoeffField::from_coeffs(&b, c).unwrap();
        let mut last = 0.0;
        for p in [1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0] {
            let mean = lp_norm(&u, p) * PI.powf(-1.0 / p);
            assert!(mean >= last - 1e-14, "p = {p}");
            last = mean;
        }
    }

    #[test]
    fn lp2_matches_l2_on_random_fields() {
        let b = make_basis(2, 6, 2).unwrap();
        let mut rng = crate::random::rng(11);
        for _ in 0..10 {
            let f = crate::random::random_field(&b, &mut rng, 0.0, 36);
            assert!((lp_norm(&f, 2.0) - sobolev_norm(&f, 0.0)).abs() <= 1e-10);
        }
    }
}
