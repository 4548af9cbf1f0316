//! Multilinear interpolation and resampling maps.

use super::{ConnectionField, Grid, MAX_N};

/// Interpolates the full per-point record (length `record`) of a point-major
/// field at an arbitrary position. Positions outside the box read as zero,
/// which matches the decaying fields this crate works with.
pub fn multilinear_record(
    grid: &Grid,
    data: &[f64],
    record: usize,
    x: &[f64],
    out: &mut [f64],
) {
    out.fill(0.0);
    let n = grid.n();
    let m = grid.m();
    let h = grid.spacing();
    let rw = grid.half_width();

    let mut base = [0usize; MAX_N];
    let mut frac = [0.0f64; MAX_N];
    for a in 0..n {
        let u = (x[a] + rw) / h;
        if u < -1e-12 || u > (m - 1) as f64 + 1e-12 {
            return; // outside: zero extension
        }
        let u = u.clamp(0.0, (m - 1) as f64);
        let mut i0 = u.floor() as usize;
        if i0 + 1 >= m {
            i0 = m - 2;
        }
        base[a] = i0;
        frac[a] = u - i0 as f64;
    }

    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        let mut idx = 0usize;
        for a in 0..n {
            let hi = (corner >> a) & 1;
            w *= if hi == 1 { frac[a] } else { 1.0 - frac[a] };
            idx = idx * m + base[a] + hi;
        }
        if w == 0.0 {
            continue;
        }
        let src = &data[idx * record..(idx + 1) * record];
        for (o, s) in out.iter_mut().zip(src) {
            *o += w * s;
        }
    }
}

/// A shifted copy: out_i(x) = A_i(x + shift), interpolated, zero outside.
pub fn translate_connection(a: &ConnectionField, shift: &[f64]) -> ConnectionField {
    let grid = *a.grid();
    let n = grid.n();
    let record = n * a.rank() * a.rank();
    let mut out = ConnectionField::zero(grid, a.rank());
    let mut xs = [0.0f64; MAX_N];
    let mut probe = [0.0f64; MAX_N];
    for p in 0..grid.npoints() {
        grid.point(p, &mut xs);
        for k in 0..n {
            probe[k] = xs[k] + shift[k];
        }
        let dst = &mut out.data_mut()[p * record..(p + 1) * record];
        multilinear_record(&grid, a.data(), record, &probe[..n], dst);
    }
    out
}

/// The parabolic rescaling of a connection about a base point:
/// out_p(y) = lambda * A_p(x0 + lambda (y - x0)), interpolated, zero outside.
pub fn rescale_spatial(a: &ConnectionField, lambda: f64, x0: &[f64]) -> ConnectionField {
    let grid = *a.grid();
    let n = grid.n();
    let record = n * a.rank() * a.rank();
    let mut out = ConnectionField::zero(grid, a.rank());
    let mut xs = [0.0f64; MAX_N];
    let mut probe = [0.0f64; MAX_N];
    for p in 0..grid.npoints() {
        grid.point(p, &mut xs);
        for k in 0..n {
            probe[k] = x0[k] + lambda * (xs[k] - x0[k]);
        }
        let dst = &mut out.data_mut()[p * record..(p + 1) * record];
        multilinear_record(&grid, a.data(), record, &probe[..n], dst);
        for v in dst.iter_mut() {
            *v *= lambda;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraElement;

    #[test]
    fn interpolation_is_exact_on_multilinear_data() {
        let grid = Grid::new(2, 9, 2.0).unwrap();
        let gen = AlgebraElement::basis(2, 0, 1);
        let mut a = ConnectionField::zero(grid, 2);
        let mut xs = [0.0f64; MAX_N];
        for p in 0..grid.npoints() {
            grid.point(p, &mut xs);
            let coeff = 1.5 + 0.25 * xs[0] - 0.7 * xs[1] + 0.3 * xs[0] * xs[1];
            crate::algebra::axpy_slices(coeff, gen.entries(), a.comp_mut(p, 0));
        }
        let record = 2 * 4;
        let mut out = vec![0.0; record];
        for probe in [[0.3, -1.1], [1.99, 1.99], [-2.0, 0.0]] {
            multilinear_record(&grid, a.data(), record, &probe, &mut out);
            let want = 1.5 + 0.25 * probe[0] - 0.7 * probe[1] + 0.3 * probe[0] * probe[1];
            assert!((out[1] - want).abs() < 1e-12, "probe {probe:?}");
        }
        // outside the box reads zero
        multilinear_record(&grid, a.data(), record, &[2.5, 0.0], &mut out);
        assert_eq!(out, vec![0.0; record]);
    }

    #[test]
    fn translate_shifts_sample_locations() {
        let grid = Grid::new(2, 17, 2.0).unwrap();
        let gen = AlgebraElement::basis(2, 0, 1);
        let mut a = ConnectionField::zero(grid, 2);
        let mut xs = [0.0f64; MAX_N];
        for p in 0..grid.npoints() {
            grid.point(p, &mut xs);
            crate::algebra::axpy_slices(xs[0] + 2.0 * xs[1], gen.entries(), a.comp_mut(p, 1));
        }
        let shifted = translate_connection(&a, &[0.5, -0.25]);
        // interior grid point away from the zero-extension edge
        let mut mi = [0usize; MAX_N];
        mi[0] = 4;
        mi[1] = 6;
        let p = grid.encode(&mi);
        grid.point(p, &mut xs);
        let want = (xs[0] + 0.5) + 2.0 * (xs[1] - 0.25);
        assert!((shifted.comp(p, 1)[1] - want).abs() < 1e-12);
    }
}
