//! Differential operators on lattice gauge fields.
//!
//! Derivatives use the per-axis tables from [`super::stencil`]: fourth-order
//! central in the interior, second-order one-sided in the two layers nearest
//! the boundary. Brackets are evaluated pointwise, so every operator here is
//! local and parallelizes over output points.

use rayon::prelude::*;

use super::{ConnectionField, GValuedOneForm, GValuedTwoForm, Grid, MAX_N};
use crate::algebra::{bracket_axpy_slices, frob_inner_slices};
use crate::error::Result;

/// Scratch-free fiber size bound: r <= 8.
const RR_MAX: usize = 64;

/// Curvature F_ij = d_i A_j - d_j A_i + [A_i, A_j].
pub fn curvature(a: &ConnectionField) -> GValuedTwoForm {
    let grid = *a.grid();
    let r = a.rank();
    let rr = r * r;
    let n = grid.n();
    let npairs = grid.npairs();
    let table = grid.deriv_table();
    let strides: Vec<usize> = (0..n).map(|ax| grid.stride(ax)).collect();

    let mut f = GValuedTwoForm::zero(grid, r);
    f.data_mut()
        .par_chunks_mut(npairs * rr)
        .enumerate()
        .for_each(|(p, out)| {
            let mut mi = [0usize; MAX_N];
            grid.decode(p, &mut mi);
            let mut pair = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let fij = &mut out[pair * rr..(pair + 1) * rr];
                    for &(off, c) in &table.taps[mi[i]] {
                        let q = (p as isize + off * strides[i] as isize) as usize;
                        crate::algebra::axpy_slices(c, a.comp(q, j), fij);
                    }
                    for &(off, c) in &table.taps[mi[j]] {
                        let q = (p as isize + off * strides[j] as isize) as usize;
                        crate::algebra::axpy_slices(-c, a.comp(q, i), fij);
                    }
                    bracket_axpy_slices(1.0, a.comp(p, i), a.comp(p, j), fij, r);
                    pair += 1;
                }
            }
        });
    f
}

/// Covariant derivative along one axis: (nabla_p theta)_j = d_p theta_j + [A_p, theta_j].
pub fn covariant_derivative(
    a: &ConnectionField,
    theta: &GValuedOneForm,
    axis: usize,
) -> Result<GValuedOneForm> {
    a.grid().check_same(theta.grid())?;
    if a.rank() != theta.rank() {
        return Err(crate::error::Error::RankMismatch { expected: a.rank(), got: theta.rank() });
    }
    if axis >= a.grid().n() {
        return Err(crate::error::Error::AxisOutOfRange { axis, n: a.grid().n() });
    }
    let grid = *a.grid();
    let r = a.rank();
    let rr = r * r;
    let n = grid.n();
    let table = grid.deriv_table();
    let stride = grid.stride(axis);

    let mut out = GValuedOneForm::zero(grid, r);
    out.data_mut()
        .par_chunks_mut(n * rr)
        .enumerate()
        .for_each(|(p, chunk)| {
            let mut mi = [0usize; MAX_N];
            grid.decode(p, &mut mi);
            for j in 0..n {
                let slot = &mut chunk[j * rr..(j + 1) * rr];
                for &(off, c) in &table.taps[mi[axis]] {
                    let q = (p as isize + off * stride as isize) as usize;
                    crate::algebra::axpy_slices(c, theta.comp(q, j), slot);
                }
                bracket_axpy_slices(1.0, a.comp(p, axis), theta.comp(p, j), slot, r);
            }
        });
    Ok(out)
}

/// Covariant exterior derivative of a one-form:
/// (d_nabla theta)_ij = nabla_i theta_j - nabla_j theta_i.
pub fn d_nabla_one(a: &ConnectionField, theta: &GValuedOneForm) -> Result<GValuedTwoForm> {
    a.grid().check_same(theta.grid())?;
    if a.rank() != theta.rank() {
        return Err(crate::error::Error::RankMismatch { expected: a.rank(), got: theta.rank() });
    }
    let grid = *a.grid();
    let r = a.rank();
    let rr = r * r;
    let n = grid.n();
    let npairs = grid.npairs();
    let table = grid.deriv_table();
    let strides: Vec<usize> = (0..n).map(|ax| grid.stride(ax)).collect();

    let mut out = GValuedTwoForm::zero(grid, r);
    out.data_mut()
        .par_chunks_mut(npairs * rr)
        .enumerate()
        .for_each(|(p, chunk)| {
            let mut mi = [0usize; MAX_N];
            grid.decode(p, &mut mi);
            let mut pair = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    let slot = &mut chunk[pair * rr..(pair + 1) * rr];
                    for &(off, c) in &table.taps[mi[i]] {
                        let q = (p as isize + off * strides[i] as isize) as usize;
                        crate::algebra::axpy_slices(c, theta.comp(q, j), slot);
                    }
                    for &(off, c) in &table.taps[mi[j]] {
                        let q = (p as isize + off * strides[j] as isize) as usize;
                        crate::algebra::axpy_slices(-c, theta.comp(q, i), slot);
                    }
                    bracket_axpy_slices(1.0, a.comp(p, i), theta.comp(p, j), slot, r);
                    bracket_axpy_slices(-1.0, a.comp(p, j), theta.comp(p, i), slot, r);
                    pair += 1;
                }
            }
        });
    Ok(out)
}

/// Covariant divergence J_j = sum_p nabla_p F_pj. Note the sign convention:
/// the codifferential acting on two-forms is minus this sum, so callers that
/// want (d_nabla)* F should negate.
pub fn codifferential(a: &ConnectionField, f: &GValuedTwoForm) -> Result<GValuedOneForm> {
    a.grid().check_same(f.grid())?;
    if a.rank() != f.rank() {
        return Err(crate::error::Error::RankMismatch { expected: a.rank(), got: f.rank() });
    }
    let grid = *a.grid();
    let r = a.rank();
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
            let mut bracket_arg = [0.0f64; RR_MAX];
            for j in 0..n {
                let slot = &mut chunk[j * rr..(j + 1) * rr];
                for ax in 0..n {
                    if ax == j {
                        continue;
                    }
                    // F_{ax, j} = sign * stored(min, max)
                    let (lo, hi, sign) = if ax < j { (ax, j, 1.0) } else { (j, ax, -1.0) };
                    let pair = grid.pair_index(lo, hi);
                    for &(off, c) in &table.taps[mi[ax]] {
                        let q = (p as isize + off * strides[ax] as isize) as usize;
                        crate::algebra::axpy_slices(sign * c, f.comp(q, pair), slot);
                    }
                    let fq = f.comp(p, pair);
                    let arg = &mut bracket_arg[..rr];
                    for (dst, src) in arg.iter_mut().zip(fq) {
                        *dst = sign * src;
                    }
                    bracket_axpy_slices(1.0, a.comp(p, ax), arg, slot, r);
                }
            }
        });
    Ok(out)
}

/// Interior product with the position field: X_j(x) = sum_p (x - x0)^p F_pj(x).
pub fn interior_product(f: &GValuedTwoForm, x0: &[f64]) -> GValuedOneForm {
    let grid = *f.grid();
    let r = f.rank();
    let rr = r * r;
    let n = grid.n();
    assert_eq!(x0.len(), n, "base point dimension mismatch");

    let mut out = GValuedOneForm::zero(grid, r);
    out.data_mut()
        .par_chunks_mut(n * rr)
        .enumerate()
        .for_each(|(p, chunk)| {
            let mut xs = [0.0f64; MAX_N];
            grid.point(p, &mut xs);
            for j in 0..n {
                let slot = &mut chunk[j * rr..(j + 1) * rr];
                for ax in 0..n {
                    if ax == j {
                        continue;
                    }
                    let (lo, hi, sign) = if ax < j { (ax, j, 1.0) } else { (j, ax, -1.0) };
                    let w = sign * (xs[ax] - x0[ax]);
                    crate::algebra::axpy_slices(w, f.comp(p, grid.pair_index(lo, hi)), slot);
                }
            }
        });
    out
}

/// Interior product with a constant vector: (i_V F)_j = sum_p V^p F_pj.
pub fn interior_product_const(f: &GValuedTwoForm, v: &[f64]) -> GValuedOneForm {
    let grid = *f.grid();
    let r = f.rank();
    let rr = r * r;
    let n = grid.n();
    assert_eq!(v.len(), n, "vector dimension mismatch");

    let mut out = GValuedOneForm::zero(grid, r);
    out.data_mut()
        .par_chunks_mut(n * rr)
        .enumerate()
        .for_each(|(p, chunk)| {
            for j in 0..n {
                let slot = &mut chunk[j * rr..(j + 1) * rr];
                for ax in 0..n {
                    if ax == j {
                        continue;
                    }
                    let (lo, hi, sign) = if ax < j { (ax, j, 1.0) } else { (j, ax, -1.0) };
                    crate::algebra::axpy_slices(sign * v[ax], f.comp(p, grid.pair_index(lo, hi)), slot);
                }
            }
        });
    out
}

/// Pointwise |F|^2 = (1/2) sum_{i,j} <F_ij, F_ij> = sum_{i<j} |F_ij|^2.
pub fn curvature_norm_sq_field(f: &GValuedTwoForm) -> Vec<f64> {
    let npairs = f.grid().npairs();
    let rr = f.rank() * f.rank();
    (0..f.grid().npoints())
        .into_par_iter()
        .map(|p| {
            let mut acc = 0.0;
            for pair in 0..npairs {
                let slice = f.comp(p, pair);
                acc += frob_inner_slices(slice, slice);
            }
            let _ = rr;
            acc
        })
        .collect()
}

/// Pointwise |theta|^2 = sum_j <theta_j, theta_j>.
pub fn oneform_norm_sq_field(theta: &GValuedOneForm) -> Vec<f64> {
    let n = theta.grid().n();
    (0..theta.grid().npoints())
        .into_par_iter()
        .map(|p| {
            let mut acc = 0.0;
            for j in 0..n {
                let slice = theta.comp(p, j);
                acc += frob_inner_slices(slice, slice);
            }
            acc
        })
        .collect()
}

/// sup over points of |F|(x).
pub fn sup_curvature(f: &GValuedTwoForm) -> f64 {
    curvature_norm_sq_field(f)
        .into_iter()
        .fold(0.0f64, f64::max)
        .sqrt()
}

/// Max over interior points (two layers in) and ordered triples i<j<k of
/// |nabla_i F_jk + nabla_j F_ki + nabla_k F_ij|.
pub fn bianchi_residual(a: &ConnectionField) -> f64 {
    let f = curvature(a);
    let grid = *a.grid();
    let n = grid.n();
    let r = a.rank();
    let rr = r * r;
    if n < 3 {
        return 0.0;
    }
    let table = grid.deriv_table();
    let strides: Vec<usize> = (0..n).map(|ax| grid.stride(ax)).collect();

    // nabla_d F_{ij} for ordered (i, j), with sign handling for storage.
    let grad_f = |p: usize, mi: &[usize; MAX_N], d: usize, i: usize, j: usize, out: &mut [f64]| {
        out.fill(0.0);
        let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let pair = grid.pair_index(lo, hi);
        for &(off, c) in &table.taps[mi[d]] {
            let q = (p as isize + off * strides[d] as isize) as usize;
            crate::algebra::axpy_slices(sign * c, f.comp(q, pair), out);
        }
        let mut arg = [0.0f64; RR_MAX];
        let arg = &mut arg[..rr];
        for (dst, src) in arg.iter_mut().zip(f.comp(p, pair)) {
            *dst = sign * src;
        }
        bracket_axpy_slices(1.0, a.comp(p, d), arg, out, r);
    };

    (0..grid.npoints())
        .into_par_iter()
        .map(|p| {
            let mut mi = [0usize; MAX_N];
            grid.decode(p, &mut mi);
            if !grid.is_interior(&mi, 2) {
                return 0.0;
            }
            let mut worst = 0.0f64;
            let mut term = [0.0f64; RR_MAX];
            let mut total = [0.0f64; RR_MAX];
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        let total = &mut total[..rr];
                        total.fill(0.0);
                        for (d, a1, a2) in [(i, j, k), (j, k, i), (k, i, j)] {
                            grad_f(p, &mi, d, a1, a2, &mut term[..rr]);
                            crate::algebra::axpy_slices(1.0, &term[..rr], total);
                        }
                        worst = worst.max(frob_inner_slices(total, total).sqrt());
                    }
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Plain trapezoid weight (1/2 on each boundary face) times h^n at a point.
pub fn trapezoid_weight(grid: &Grid, mi: &[usize; MAX_N]) -> f64 {
    let mut w = grid.spacing().powi(grid.n() as i32);
    for a in 0..grid.n() {
        if mi[a] == 0 || mi[a] + 1 == grid.m() {
            w *= 0.5;
        }
    }
    w
}
