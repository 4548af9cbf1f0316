//! Gaussian-weighted quadrature over the lattice box.
//!
//! The weight is the backward-heat kernel evaluated analytically at grid
//! points, combined with tensor trapezoid weights. Trapezoid-with-analytic
//! weight is spectrally accurate here because every integrand we meet is a
//! smooth field damped by the Gaussian.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{Center, GValuedOneForm, GValuedTwoForm, Grid, MAX_N};
use crate::sum::tree_sum_indexed;

/// G_{x0,t0}(x) = (4 pi t0)^(-n/2) exp(-|x-x0|^2 / (4 t0)).
pub fn gaussian_weight(x: &[f64], center: &Center) -> f64 {
    let n = x.len();
    let t0 = center.t0;
    let mut d2 = 0.0;
    for k in 0..n {
        let d = x[k] - center.x0[k];
        d2 += d * d;
    }
    (4.0 * std::f64::consts::PI * t0).powf(-(n as f64) / 2.0) * (-d2 / (4.0 * t0)).exp()
}

/// Plain tensor trapezoid integral of point values over the box.
pub fn trapezoid_integral(grid: &Grid, values: &[f64]) -> f64 {
    assert_eq!(values.len(), grid.npoints());
    let grid = *grid;
    tree_sum_indexed(values.len(), |p| {
        let mut mi = [0usize; MAX_N];
        grid.decode(p, &mut mi);
        values[p] * crate::fields::trapezoid_weight(&grid, &mi)
    })
}

/// Per-point quadrature weights G(x) * h^n with trapezoid edge corrections.
pub struct WeightedQuadrature {
    grid: Grid,
    center: Center,
    weights: Vec<f64>,
}

impl WeightedQuadrature {
    pub fn new(grid: Grid, center: &Center) -> Result<Self> {
        center.validate_for(&grid)?;
        let mut weights = vec![0.0f64; grid.npoints()];
        weights.par_iter_mut().enumerate().for_each(|(p, w)| {
            let mut mi = [0usize; MAX_N];
            let mut xs = [0.0f64; MAX_N];
            grid.decode(p, &mut mi);
            grid.point(p, &mut xs);
            *w = gaussian_weight(&xs[..grid.n()], center)
                * crate::fields::trapezoid_weight(&grid, &mi);
        });
        let quad = Self { grid, center: center.clone(), weights };
        let total = quad.weight_sum();
        if !(total > 0.0 && total <= 1.0 + 1e-6) {
            return Err(Error::InvalidCenter {
                reason: format!("quadrature mass {total} outside (0, 1 + 1e-6]"),
            });
        }
        Ok(quad)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn center(&self) -> &Center {
        &self.center
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total quadrature mass; at most 1 (the Gaussian integrates to 1 over
    /// all of R^n, truncation only removes mass).
    pub fn weight_sum(&self) -> f64 {
        tree_sum_indexed(self.weights.len(), |p| self.weights[p])
    }

    /// Integral of a scalar lattice field against the weight.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.weights.len());
        tree_sum_indexed(values.len(), |p| self.weights[p] * values[p])
    }

    /// Weighted inner product of one-forms: sum_p w_p sum_j <a_j, b_j>.
    pub fn inner_oneform(&self, a: &GValuedOneForm, b: &GValuedOneForm) -> Result<f64> {
        self.grid.check_same(a.grid())?;
        a.check_compatible(b)?;
        let n = self.grid.n();
        Ok(tree_sum_indexed(self.weights.len(), |p| {
            let mut acc = 0.0;
            for j in 0..n {
                acc += crate::algebra::frob_inner_slices(a.comp(p, j), b.comp(p, j));
            }
            self.weights[p] * acc
        }))
    }

    pub fn norm_sq_oneform(&self, a: &GValuedOneForm) -> Result<f64> {
        self.inner_oneform(a, a)
    }

    /// Weighted inner product of two-forms: sum_p w_p sum_{i<j} <a_ij, b_ij>.
    pub fn inner_twoform(&self, a: &GValuedTwoForm, b: &GValuedTwoForm) -> Result<f64> {
        self.grid.check_same(a.grid())?;
        a.check_compatible(b)?;
        let npairs = self.grid.npairs();
        Ok(tree_sum_indexed(self.weights.len(), |p| {
            let mut acc = 0.0;
            for c in 0..npairs {
                acc += crate::algebra::frob_inner_slices(a.comp(p, c), b.comp(p, c));
            }
            self.weights[p] * acc
        }))
    }

    /// Gaussian mass lost to box truncation, from the one-dimensional
    /// error-function factorization.
    pub fn truncation_deficit(&self) -> f64 {
        truncation_deficit(&self.grid, &self.center)
    }
}

/// 1 - prod_k (axis-k Gaussian mass inside [-R, R]).
pub fn truncation_deficit(grid: &Grid, center: &Center) -> f64 {
    let r = grid.half_width();
    let s = 2.0 * center.t0.sqrt();
    let mut mass = 1.0;
    for k in 0..grid.n() {
        mass *= 0.5 * (libm::erf((r - center.x0[k]) / s) + libm::erf((r + center.x0[k]) / s));
    }
    1.0 - mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_weight_closed_form_and_decay() {
        let c = Center::origin(2, 1.0);
        let val = gaussian_weight(&[0.0, 0.0], &c);
        assert_relative_eq!(val, 1.0 / (4.0 * std::f64::consts::PI), max_relative = 1e-12);
        let mut prev = val;
        for k in 1..10 {
            let cur = gaussian_weight(&[0.1 * k as f64, 0.0], &c);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn box_mass_matches_the_erf_product_at_six_sqrt_t0() {
        // R = 6 sqrt(t0), n = 3: per-axis tail is erfc(3), so the box holds
        // 1 - 6.63e-5 of the Gaussian mass. erf(3)^3 = 0.99993373.
        let grid = Grid::new(3, 25, 6.0).unwrap();
        let c = Center::origin(3, 1.0);
        let quad = WeightedQuadrature::new(grid, &c).unwrap();
        let total = quad.weight_sum();
        assert!(total >= 1.0 - 1e-4, "mass {total}");
        assert!(total <= 1.0 + 1e-6, "mass {total}");
        assert!(quad.weights().iter().all(|w| *w > 0.0));
        let oracle = 1.0 - quad.truncation_deficit();
        assert_relative_eq!(oracle, 0.9999337299729635, max_relative = 1e-12);
        // trapezoid error at h = 0.5 is the boundary Euler-Maclaurin term
        assert!((oracle - total).abs() < 2e-5, "quad {total} vs oracle {oracle}");
    }

    #[test]
    fn truncation_deficit_grows_as_t0_grows() {
        let grid = Grid::new(2, 17, 3.0).unwrap();
        // z = R / (2 sqrt(t0)) = 5: per-axis tail erfc(5) = 1.5e-12
        let tight = truncation_deficit(&grid, &Center::origin(2, 0.09));
        let loose = truncation_deficit(&grid, &Center::origin(2, 4.0));
        assert!(tight < 1e-8);
        assert!(loose > 1e-2);
        assert!(loose < 1.0);
    }

    #[test]
    fn trapezoid_integral_of_one_is_box_volume() {
        let grid = Grid::new(2, 9, 1.5).unwrap();
        let ones = vec![1.0; grid.npoints()];
        assert_relative_eq!(trapezoid_integral(&grid, &ones), 9.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_oneform_inner_product_is_weighted_mass() {
        let grid = Grid::new(2, 17, 6.0).unwrap();
        let c = Center::origin(2, 1.0);
        let quad = WeightedQuadrature::new(grid, &c).unwrap();
        let mut a = GValuedOneForm::zero(grid, 2);
        let e = crate::algebra::AlgebraElement::basis(2, 0, 1);
        for p in 0..grid.npoints() {
            a.comp_mut(p, 0).copy_from_slice(e.entries());
        }
        // <a, a> = |E01|^2 = 2 pointwise, only the j = 0 component set
        let got = quad.norm_sq_oneform(&a).unwrap();
        assert_relative_eq!(got, 2.0 * quad.weight_sum(), max_relative = 1e-12);
    }

    #[test]
    fn off_center_weight_respects_validation() {
        let grid = Grid::new(2, 9, 2.0).unwrap();
        let bad = Center::new(vec![5.0, 0.0], 1.0).unwrap();
        assert!(WeightedQuadrature::new(grid, &bad).is_err());
    }
}
