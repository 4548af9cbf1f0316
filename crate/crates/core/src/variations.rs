//! First and second variations of the weighted curvature functional, the
//! stability operator, and the soliton residual.
//!
//! Two realizations of the stability operator coexist. `l_apply` composes the
//! raw stencils following the component formula; its G-self-adjointness is a
//! discretization statement that holds only as the mesh refines.
//! `StabilityOperator` instead builds the quadratic form t0 (|d_nabla theta|^2
//! + <R theta, theta>) from the exact transpose tables, so it is G-self-adjoint
//! to rounding and is what the spectral solver consumes. The two agree at the
//! stencil order on smooth fields.

use rayon::prelude::*;

use crate::algebra::{axpy_slices, bracket_axpy_slices};
use crate::error::{Error, Result};
use crate::fields::{
    codifferential, curvature, d_nabla_one, interior_product, interior_product_const, Center,
    ConnectionField, GValuedOneForm, GValuedTwoForm, MAX_N,
};
use crate::functionals::{f_functional, f_gradient_center};
use crate::quadrature::WeightedQuadrature;

/// Tangent direction of a variation path s -> (x0 + sV, t0 + sq, A + s theta).
pub struct VariationDirection {
    pub q: f64,
    pub v: Vec<f64>,
    pub theta: GValuedOneForm,
}

impl VariationDirection {
    pub fn zero(a: &ConnectionField) -> Self {
        Self {
            q: 0.0,
            v: vec![0.0; a.grid().n()],
            theta: GValuedOneForm::zero(*a.grid(), a.rank()),
        }
    }

    pub fn validate_for(&self, a: &ConnectionField) -> Result<()> {
        a.grid().check_same(self.theta.grid())?;
        if self.theta.rank() != a.rank() {
            return Err(Error::RankMismatch { expected: a.rank(), got: self.theta.rank() });
        }
        if self.v.len() != a.grid().n() {
            return Err(Error::InvalidCenter {
                reason: format!(
                    "direction vector has {} components, grid dimension is {}",
                    self.v.len(),
                    a.grid().n()
                ),
            });
        }
        Ok(())
    }
}

/// S_j = nabla^p F_pj - (x - x0)^p F_pj / (2 t0); zero exactly at solitons.
pub fn soliton_residual(a: &ConnectionField, center: &Center) -> Result<GValuedOneForm> {
    center.validate_for(a.grid())?;
    let f = curvature(a);
    let mut s = codifferential(a, &f)?;
    let x = interior_product(&f, &center.x0);
    s.axpy(-1.0 / (2.0 * center.t0), &x)?;
    Ok(s)
}

/// Curvature action on one-forms: (R theta)_j = sum_i [F_ij, theta_i].
pub fn r_apply(f: &GValuedTwoForm, theta: &GValuedOneForm) -> Result<GValuedOneForm> {
    f.grid().check_same(theta.grid())?;
    if f.rank() != theta.rank() {
        return Err(Error::RankMismatch { expected: f.rank(), got: theta.rank() });
    }
    let grid = *f.grid();
    let r = f.rank();
    let rr = r * r;
    let n = grid.n();

    let mut out = GValuedOneForm::zero(grid, r);
    out.data_mut()
        .par_chunks_mut(n * rr)
        .enumerate()
        .for_each(|(p, chunk)| {
            for j in 0..n {
                let slot = &mut chunk[j * rr..(j + 1) * rr];
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
                    let pair = grid.pair_index(lo, hi);
                    bracket_axpy_slices(sign, f.comp(p, pair), theta.comp(p, i), slot, r);
                }
            }
        });
    Ok(out)
}

/// G-weighted pairing of one-forms.
pub fn weighted_inner(theta: &GValuedOneForm, eta: &GValuedOneForm, center: &Center) -> Result<f64> {
    WeightedQuadrature::new(*theta.grid(), center)?.inner_oneform(theta, eta)
}

/// Raw stencil composition of the stability operator:
/// L theta = -t0 [ (d_nabla)* d_nabla theta + R(theta)
///                 + i_{(x-x0)/(2 t0)} d_nabla theta ].
pub fn l_apply(
    a: &ConnectionField,
    center: &Center,
    theta: &GValuedOneForm,
) -> Result<GValuedOneForm> {
    center.validate_for(a.grid())?;
    let t0 = center.t0;
    let om = d_nabla_one(a, theta)?;
    // codifferential returns +sum_p nabla_p om_pj, which is -(d_nabla)* om
    let mut out = codifferential(a, &om)?;
    out.scale(t0);
    let rt = r_apply(&curvature(a), theta)?;
    out.axpy(-t0, &rt)?;
    let drift = interior_product(&om, &center.x0);
    out.axpy(-0.5, &drift)?;
    Ok(out)
}

/// The stability operator assembled as an exactly G-self-adjoint form:
/// L theta = -t0 [ W^{-1} D^T (W d_nabla theta) + R(theta) ] with D^T the
/// exact lattice transpose of the covariant exterior derivative. The Gaussian
/// weight ratio inside D^T reproduces the drift term of the raw formula.
pub struct StabilityOperator {
    a: ConnectionField,
    f: GValuedTwoForm,
    quad: WeightedQuadrature,
    t0: f64,
}

impl StabilityOperator {
    pub fn new(a: &ConnectionField, center: &Center) -> Result<Self> {
        let quad = WeightedQuadrature::new(*a.grid(), center)?;
        Ok(Self { a: a.clone(), f: curvature(a), quad, t0: center.t0 })
    }

    pub fn quadrature(&self) -> &WeightedQuadrature {
        &self.quad
    }

    pub fn curvature(&self) -> &GValuedTwoForm {
        &self.f
    }

    pub fn connection(&self) -> &ConnectionField {
        &self.a
    }

    pub fn apply(&self, theta: &GValuedOneForm) -> Result<GValuedOneForm> {
        let grid = *self.a.grid();
        let r = self.a.rank();
        let rr = r * r;
        let npairs = grid.npairs();
        let w = self.quad.weights();

        let mut om = d_nabla_one(&self.a, theta)?;
        om.data_mut()
            .par_chunks_mut(npairs * rr)
            .enumerate()
            .for_each(|(p, chunk)| {
                for v in chunk.iter_mut() {
                    *v *= w[p];
                }
            });

        let dt = self.d_transpose(&om);
        let mut out = r_apply(&self.f, theta)?;
        let n = grid.n();
        out.data_mut()
            .par_chunks_mut(n * rr)
            .enumerate()
            .for_each(|(p, chunk)| {
                let inv_w = 1.0 / w[p];
                for (o, d) in chunk.iter_mut().zip(&dt.data()[p * n * rr..(p + 1) * n * rr]) {
                    *o = -self.t0 * (*o + d * inv_w);
                }
            });
        Ok(out)
    }

    /// Exact transpose of the linearized exterior derivative:
    /// (D^T om)_j = sum_i D_i^T(om_ij) - [A_i, om_ij].
    fn d_transpose(&self, om: &GValuedTwoForm) -> GValuedOneForm {
        let grid = *self.a.grid();
        let r = self.a.rank();
        let rr = r * r;
        let n = grid.n();
        let table = grid.deriv_table();
        let strides: Vec<usize> = (0..n).map(|ax| grid.stride(ax)).collect();

        let mut out = GValuedOneForm::zero(grid, r);
        out.data_mut()
            .par_chunks_mut(n * rr)
            .enumerate()
            .for_each(|(p, chunk)| {
                let mut mi = [0usize; MAX_N];
                grid.decode(p, &mut mi);
                for j in 0..n {
                    let slot = &mut chunk[j * rr..(j + 1) * rr];
                    for i in 0..n {
                        if i == j {
                            continue;
                        }
                        let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
                        let pair = grid.pair_index(lo, hi);
                        for &(off, c) in &table.transpose[mi[i]] {
                            let q = (p as isize + off * strides[i] as isize) as usize;
                            axpy_slices(sign * c, om.comp(q, pair), slot);
                        }
                        bracket_axpy_slices(-sign, self.a.comp(p, i), om.comp(p, pair), slot, r);
                    }
                }
            });
        out
    }
}

/// d/ds of the functional along (x0 + sV, t0 + sq, A + s theta) at s = 0,
/// with the theta term in its pre-integration-by-parts form
/// 2 t0^2 <d_nabla theta, F>_G, which matches path differencing to rounding.
pub fn first_variation(
    a: &ConnectionField,
    center: &Center,
    dir: &VariationDirection,
) -> Result<f64> {
    dir.validate_for(a)?;
    let (dt0, dx0) = f_gradient_center(a, center)?;
    let quad = WeightedQuadrature::new(*a.grid(), center)?;
    let om = d_nabla_one(a, &dir.theta)?;
    let theta_term = 2.0 * center.t0 * center.t0 * quad.inner_twoform(&om, &curvature(a))?;
    let v_term: f64 = dir.v.iter().zip(&dx0).map(|(v, g)| v * g).sum();
    Ok(dir.q * dt0 + v_term + theta_term)
}

/// The same derivative with the theta term written through the soliton
/// residual, -2 t0^2 <theta, S>_G. Equals `first_variation` up to the
/// discrete integration-by-parts defect, which vanishes at the stencil order.
pub fn first_variation_residual_form(
    a: &ConnectionField,
    center: &Center,
    dir: &VariationDirection,
) -> Result<f64> {
    dir.validate_for(a)?;
    let (dt0, dx0) = f_gradient_center(a, center)?;
    let quad = WeightedQuadrature::new(*a.grid(), center)?;
    let s = soliton_residual(a, center)?;
    let theta_term = -2.0 * center.t0 * center.t0 * quad.inner_oneform(&dir.theta, &s)?;
    let v_term: f64 = dir.v.iter().zip(&dx0).map(|(v, g)| v * g).sum();
    Ok(dir.q * dt0 + v_term + theta_term)
}

/// Functional value along the variation path at parameter s.
pub fn path_value(
    a: &ConnectionField,
    center: &Center,
    dir: &VariationDirection,
    s: f64,
) -> Result<f64> {
    dir.validate_for(a)?;
    let mut shifted = a.clone();
    shifted.add_scaled_oneform(s, &dir.theta)?;
    let x0: Vec<f64> = center.x0.iter().zip(&dir.v).map(|(x, v)| x + s * v).collect();
    f_functional(&shifted, &Center::new(x0, center.t0 + s * dir.q)?)
}

/// Second central difference of the functional along the path.
pub fn second_variation_fd(
    a: &ConnectionField,
    center: &Center,
    dir: &VariationDirection,
    s: f64,
) -> Result<f64> {
    let plus = path_value(a, center, dir, s)?;
    let mid = path_value(a, center, dir, 0.0)?;
    let minus = path_value(a, center, dir, -s)?;
    Ok((plus - 2.0 * mid + minus) / (s * s))
}

/// Second variation from the soliton formula
/// 2 t0 [ <-L theta - 2 q J - i_V F, theta>_G - q^2 |J|_G^2 - 1/2 |i_V F|_G^2 ].
/// The formula is derived at solitons, so callers must pass a near-soliton:
/// the weighted residual norm is gated against `gate_rel` times the weighted
/// curvature norm. Off-soliton fields get `second_variation_fd` instead.
pub fn second_variation(
    a: &ConnectionField,
    center: &Center,
    dir: &VariationDirection,
    gate_rel: f64,
) -> Result<f64> {
    dir.validate_for(a)?;
    let op = StabilityOperator::new(a, center)?;
    let quad = op.quadrature();

    let s = soliton_residual(a, center)?;
    let res_norm = quad.norm_sq_oneform(&s)?.sqrt();
    let f_norm = quad.inner_twoform(op.curvature(), op.curvature())?.sqrt();
    let gate = gate_rel * f_norm;
    if res_norm > gate {
        return Err(Error::NotNearSoliton {
            residual: res_norm,
            gate,
            factor: if f_norm > 0.0 { res_norm / f_norm } else { f64::INFINITY },
        });
    }

    let t0 = center.t0;
    let j = codifferential(a, op.curvature())?;
    let ivf = interior_product_const(op.curvature(), &dir.v);

    let mut combo = op.apply(&dir.theta)?;
    combo.scale(-1.0);
    combo.axpy(-2.0 * dir.q, &j)?;
    combo.axpy(-1.0, &ivf)?;

    let paired = quad.inner_oneform(&combo, &dir.theta)?;
    let j_sq = quad.norm_sq_oneform(&j)?;
    let ivf_sq = quad.norm_sq_oneform(&ivf)?;
    Ok(2.0 * t0 * (paired - dir.q * dir.q * j_sq - 0.5 * ivf_sq))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraElement;
    use crate::fields::{
        abelian_linear, flat, poly_window, random_smooth, Grid, RandomFieldParams,
    };
    use approx::assert_relative_eq;

    /// Random compactly supported one-form: random smooth components under a
    /// polynomial window that vanishes to high order at the faces.
    fn random_compact_oneform(grid: &Grid, r: usize, seed: u64) -> GValuedOneForm {
        let src = random_smooth(*grid, r, seed, &RandomFieldParams::compact(grid));
        let mut theta = GValuedOneForm::zero(*grid, r);
        theta.data_mut().copy_from_slice(src.data());
        let window = poly_window(grid.half_width(), 4);
        let n = grid.n();
        let rr = r * r;
        let mut xs = [0.0f64; MAX_N];
        for p in 0..grid.npoints() {
            grid.point(p, &mut xs);
            let w = window(&xs[..n]);
            for v in theta.data_mut()[p * n * rr..(p + 1) * n * rr].iter_mut() {
                *v *= w;
            }
        }
        theta
    }

    #[test]
    fn residual_of_flat_field_is_zero() {
        let grid = Grid::new(2, 9, 2.0).unwrap();
        let a = flat(grid, 2);
        let s = soliton_residual(&a, &Center::origin(2, 1.0)).unwrap();
        assert!(s.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn residual_of_constant_abelian_curvature_is_the_drift_term() {
        // J = 0, so S_j = -x^p F_pj / 2 with F_01 = E_01
        let grid = Grid::new(2, 9, 2.0).unwrap();
        let mut b = vec![0.0; 4];
        b[1] = 1.0;
        b[2] = -1.0;
        let a = abelian_linear(grid, 2, &b, &AlgebraElement::basis(2, 0, 1));
        let s = soliton_residual(&a, &Center::origin(2, 1.0)).unwrap();
        let mut xs = [0.0f64; MAX_N];
        for p in 0..grid.npoints() {
            grid.point(p, &mut xs);
            // S_0 = -x_1 F_10 / 2 = x_1 E_01 / 2; S_1 = -x_0 E_01 / 2
            assert_relative_eq!(s.comp(p, 0)[1], 0.5 * xs[1], max_relative = 1e-11, epsilon = 1e-12);
            assert_relative_eq!(s.comp(p, 1)[1], -0.5 * xs[0], max_relative = 1e-11, epsilon = 1e-12);
        }
    }

    #[test]
    fn r_apply_matches_a_direct_bracket_sum() {
        let grid = Grid::new(3, 9, 2.0).unwrap();
        let a = random_smooth(grid, 3, 2, &RandomFieldParams::gentle(&grid));
        let f = curvature(&a);
        let theta = random_compact_oneform(&grid, 3, 9);
        let got = r_apply(&f, &theta).unwrap();

        let n = grid.n();
        for p in (0..grid.npoints()).step_by(17) {
            for j in 0..n {
                let mut want = AlgebraElement::zero(3);
                for i in 0..n {
                    if i == j {
                        continue;
                    }
                    let fij = if i < j {
                        AlgebraElement::from_entries(3, f.comp_pair(p, i, j).to_vec()).unwrap()
                    } else {
                        AlgebraElement::from_entries(3, f.comp_pair(p, j, i).to_vec())
                            .unwrap()
                            .scaled(-1.0)
                    };
                    let ti = AlgebraElement::from_entries(3, theta.comp(p, i).to_vec()).unwrap();
                    want = want.add(&fij.bracket(&ti).unwrap()).unwrap();
                }
                for (g, w) in got.comp(p, j).iter().zip(want.entries()) {
                    assert_relative_eq!(g, w, max_relative = 1e-12, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn r_apply_vanishes_on_a_shared_abelian_generator() {
        let grid = Grid::new(2, 9, 2.0).unwrap();
        let mut b = vec![0.0; 4];
        b[1] = 0.7;
        b[2] = -0.7;
        let a = abelian_linear(grid, 3, &b, &AlgebraElement::basis(3, 0, 1));
        let f = curvature(&a);
        let mut theta = GValuedOneForm::zero(grid, 3);
        let e = AlgebraElement::basis(3, 0, 1);
        for p in 0..grid.npoints() {
            theta.comp_mut(p, 0).copy_from_slice(e.entries());
        }
        let got = r_apply(&f, &theta).unwrap();
        assert!(got.data().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn weighted_inner_is_positive_and_sees_disjoint_supports() {
        let grid = Grid::new(2, 17, 4.0).unwrap();
        let c = Center::origin(2, 0.5);
        let theta = random_compact_oneform(&grid, 2, 3);
        let norm = weighted_inner(&theta, &theta, &c).unwrap();
        assert!(norm > 0.0);

        // eta supported on the half x_0 > 1, theta * indicator(x_0 < -1)
        let mut left = theta.clone();
        let mut right = theta.clone();
        let rr = 4;
        let n = 2;
        let mut xs = [0.0f64; MAX_N];
        for p in 0..grid.npoints() {
            grid.point(p, &mut xs);
            let (l, r_) = (xs[0] < -1.0, xs[0] > 1.0);
            for k in 0..n * rr {
                if !l {
                    left.data_mut()[p * n * rr + k] = 0.0;
                }
                if !r_ {
                    right.data_mut()[p * n * rr + k] = 0.0;
                }
            }
        }
        assert_eq!(weighted_inner(&left, &right, &c).unwrap(), 0.0);
    }

    #[test]
    fn first_variation_of_the_zero_direction_vanishes() {
        let grid = Grid::new(2, 17, 4.0).unwrap();
        let a = random_smooth(grid, 2, 5, &RandomFieldParams::gentle(&grid));
        let c = Center::origin(2, 0.5);
        let dir = VariationDirection::zero(&a);
        assert_eq!(first_variation(&a, &c, &dir).unwrap(), 0.0);
        assert_eq!(second_variation_fd(&a, &c, &dir, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn first_variation_matches_path_differencing() {
        let grid = Grid::new(2, 25, 6.0).unwrap();
        let a = random_smooth(grid, 3, 12, &RandomFieldParams::gentle(&grid));
        let c = Center::new(vec![0.2, -0.3], 0.7).unwrap();
        let dir = VariationDirection {
            q: 0.4,
            v: vec![-0.3, 0.6],
            theta: random_compact_oneform(&grid, 3, 21),
        };
        let fv = first_variation(&a, &c, &dir).unwrap();
        let s = 1e-4;
        let fd = (path_value(&a, &c, &dir, s).unwrap() - path_value(&a, &c, &dir, -s).unwrap())
            / (2.0 * s);
        assert_relative_eq!(fv, fd, max_relative = 1e-5);
    }

    #[test]
    fn residual_form_converges_to_the_primary_form() {
        let mut gaps = Vec::new();
        for m in [17, 33] {
            let grid = Grid::new(2, m, 4.0).unwrap();
            let a = random_smooth(grid, 3, 12, &RandomFieldParams::gentle(&grid));
            let c = Center::origin(2, 0.5);
            let dir = VariationDirection {
                q: 0.0,
                v: vec![0.0, 0.0],
                theta: random_compact_oneform(&grid, 3, 21),
            };
            let primary = first_variation(&a, &c, &dir).unwrap();
            let residual = first_variation_residual_form(&a, &c, &dir).unwrap();
            gaps.push((primary - residual).abs() / primary.abs().max(1e-30));
        }
        assert!(gaps[1] < gaps[0] / 4.0, "by-parts defect gaps {gaps:?}");
        assert!(gaps[1] < 1e-3, "by-parts defect {gaps:?}");
    }

    #[test]
    fn symmetrized_operator_is_g_self_adjoint() {
        let grid = Grid::new(2, 17, 4.0).unwrap();
        let a = random_smooth(grid, 3, 6, &RandomFieldParams::gentle(&grid));
        let c = Center::new(vec![0.3, 0.1], 0.6).unwrap();
        let op = StabilityOperator::new(&a, &c).unwrap();
        let theta = random_compact_oneform(&grid, 3, 31);
        let eta = random_compact_oneform(&grid, 3, 32);
        let lt = op.apply(&theta).unwrap();
        let le = op.apply(&eta).unwrap();
        let quad = op.quadrature();
        let lhs = quad.inner_oneform(&lt, &eta).unwrap();
        let rhs = quad.inner_oneform(&theta, &le).unwrap();
        let scale = quad.norm_sq_oneform(&theta).unwrap().sqrt()
            * quad.norm_sq_oneform(&eta).unwrap().sqrt();
        assert!(
            (lhs - rhs).abs() <= 1e-12 * scale,
            "asymmetry {} vs scale {scale}",
            (lhs - rhs).abs()
        );
    }

    #[test]
    fn quadratic_form_matches_derivative_plus_curvature_terms() {
        // <-L theta, theta>_G = t0 (|d_nabla theta|_G^2 + <R theta, theta>_G)
        let grid = Grid::new(2, 17, 4.0).unwrap();
        let a = random_smooth(grid, 3, 6, &RandomFieldParams::gentle(&grid));
        let c = Center::origin(2, 1.0);
        let op = StabilityOperator::new(&a, &c).unwrap();
        let theta = random_compact_oneform(&grid, 3, 41);
        let lt = op.apply(&theta).unwrap();
        let quad = op.quadrature();
        let lhs = -quad.inner_oneform(&lt, &theta).unwrap();
        let om = d_nabla_one(&a, &theta).unwrap();
        let rt = r_apply(op.curvature(), &theta).unwrap();
        let rhs = c.t0
            * (quad.inner_twoform(&om, &om).unwrap() + quad.inner_oneform(&rt, &theta).unwrap());
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn raw_operator_converges_to_the_symmetrized_one() {
        let mut gaps = Vec::new();
        for m in [17, 33] {
            let grid = Grid::new(2, m, 4.0).unwrap();
            let a = random_smooth(grid, 3, 6, &RandomFieldParams::gentle(&grid));
            let c = Center::origin(2, 0.5);
            let op = StabilityOperator::new(&a, &c).unwrap();
            let theta = random_compact_oneform(&grid, 3, 51);
            let sym = op.apply(&theta).unwrap();
            let mut raw = l_apply(&a, &c, &theta).unwrap();
            raw.axpy(-1.0, &sym).unwrap();
            let quad = op.quadrature();
            let gap = quad.norm_sq_oneform(&raw).unwrap().sqrt()
                / quad.norm_sq_oneform(&sym).unwrap().sqrt();
            gaps.push(gap);
        }
        assert!(gaps[1] < gaps[0] / 4.0, "operator gaps {gaps:?}");
    }

    #[test]
    fn second_variation_refuses_a_generic_field() {
        let grid = Grid::new(2, 17, 4.0).unwrap();
        let a = random_smooth(grid, 3, 14, &RandomFieldParams::gentle(&grid));
        let c = Center::origin(2, 0.5);
        let dir = VariationDirection::zero(&a);
        match second_variation(&a, &c, &dir, 1e-3) {
            Err(Error::NotNearSoliton { .. }) => {}
            other => panic!("expected the residual gate to fire, got {other:?}"),
        }
    }

    #[test]
    fn second_variation_at_flat_matches_path_differencing() {
        // A = 0 is a trivial soliton; the formula collapses to
        // 2 t0^2 |d theta|_G^2 and the path value is exactly quartic in s
        let grid = Grid::new(2, 17, 4.0).unwrap();
        let a = flat(grid, 3);
        let c = Center::origin(2, 0.6);
        let dir = VariationDirection {
            q: 0.0,
            v: vec![0.0, 0.0],
            theta: random_compact_oneform(&grid, 3, 61),
        };
        let formula = second_variation(&a, &c, &dir, 1e-3).unwrap();
        let fd = second_variation_fd(&a, &c, &dir, 1e-3).unwrap();
        assert_relative_eq!(formula, fd, max_relative = 1e-3);
        assert!(formula > 0.0);
    }
}
