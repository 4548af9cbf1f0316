//! so(r) kernels: antisymmetric real r x r matrices under the commutator
//! bracket, paired by the componentwise (Frobenius) inner product.
//!
//! The fiber dimension r is small (2..=8 in practice) and every hot loop in
//! the crate works on raw `&[f64]` slices of length r*r in row-major order,
//! so the slice kernels here are the ones that matter for speed. The
//! [`AlgebraElement`] wrapper adds validated construction for API surfaces
//! and tests.

use crate::error::{Error, Result};

/// Tolerance on |B + B^T|_inf accepted at construction.
pub const ANTISYMMETRY_TOL: f64 = 1e-12;

/// Tolerance on |h^T h - I|_inf for rotation validation.
pub const ROTATION_TOL: f64 = 1e-10;

/// An element of so(r): an antisymmetric r x r matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    r: usize,
    entries: Vec<f64>,
}

impl AlgebraElement {
    pub fn zero(r: usize) -> Self {
        Self { r, entries: vec![0.0; r * r] }
    }

    /// Validates antisymmetry to [`ANTISYMMETRY_TOL`]; does not project.
    pub fn from_entries(r: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != r * r {
            return Err(Error::RankMismatch { expected: r, got: entries.len() / r.max(1) });
        }
        let defect = antisymmetry_defect(&entries, r);
        if defect > ANTISYMMETRY_TOL {
            return Err(Error::NotAntisymmetric { defect });
        }
        Ok(Self { r, entries })
    }

    /// Builds from arbitrary entries by the projection B -> (B - B^T)/2.
    pub fn antisymmetrize(r: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), r * r);
        let mut out = vec![0.0; r * r];
        for a in 0..r {
            for b in 0..r {
                out[a * r + b] = 0.5 * (entries[a * r + b] - entries[b * r + a]);
            }
        }
        Self { r, entries: out }
    }

    /// Basis element E_ab = e_a e_b^T - e_b e_a^T for a < b.
    pub fn basis(r: usize, a: usize, b: usize) -> Self {
        assert!(a < b && b < r, "basis indices must satisfy a < b < r");
        let mut e = Self::zero(r);
        e.entries[a * r + b] = 1.0;
        e.entries[b * r + a] = -1.0;
        e
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.r + b]
    }

    /// [self, other] = self * other - other * self.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        if self.r != other.r {
            return Err(Error::RankMismatch { expected: self.r, got: other.r });
        }
        let mut out = Self::zero(self.r);
        bracket_slices(&self.entries, &other.entries, &mut out.entries, self.r);
        Ok(out)
    }

    /// <self, other> = sum_ab self[a,b] * other[a,b].
    pub fn frob_inner(&self, other: &Self) -> Result<f64> {
        if self.r != other.r {
            return Err(Error::RankMismatch { expected: self.r, got: other.r });
        }
        Ok(frob_inner_slices(&self.entries, &other.entries))
    }

    pub fn frob_norm(&self) -> f64 {
        frob_inner_slices(&self.entries, &self.entries).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for e in &mut out.entries {
            *e *= s;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.r != other.r {
            return Err(Error::RankMismatch { expected: self.r, got: other.r });
        }
        let mut out = self.clone();
        for (e, o) in out.entries.iter_mut().zip(&other.entries) {
            *e += o;
        }
        Ok(out)
    }
}

/// Full basis of so(r) in lexicographic (a, b) order with a < b.
pub fn so_basis(r: usize) -> Vec<AlgebraElement> {
    let mut out = Vec::with_capacity(so_dim(r));
    for a in 0..r {
        for b in (a + 1)..r {
            out.push(AlgebraElement::basis(r, a, b));
        }
    }
    out
}

pub fn so_dim(r: usize) -> usize {
    r * (r - 1) / 2
}

pub fn antisymmetry_defect(entries: &[f64], r: usize) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..r {
        for b in 0..r {
            worst = worst.max((entries[a * r + b] + entries[b * r + a]).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Slice kernels. `out` must not alias the inputs.
// ---------------------------------------------------------------------------

/// out = b*c - c*b for row-major r x r slices.
#[inline]
pub fn bracket_slices(b: &[f64], c: &[f64], out: &mut [f64], r: usize) {
    for i in 0..r {
        for j in 0..r {
            let mut acc = 0.0;
            for k in 0..r {
                acc += b[i * r + k] * c[k * r + j] - c[i * r + k] * b[k * r + j];
            }
            out[i * r + j] = acc;
        }
    }
}

/// out += s * (b*c - c*b).
#[inline]
pub fn bracket_axpy_slices(s: f64, b: &[f64], c: &[f64], out: &mut [f64], r: usize) {
    for i in 0..r {
        for j in 0..r {
            let mut acc = 0.0;
            for k in 0..r {
                acc += b[i * r + k] * c[k * r + j] - c[i * r + k] * b[k * r + j];
            }
            out[i * r + j] += s * acc;
        }
    }
}

#[inline]
pub fn frob_inner_slices(b: &[f64], c: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in b.iter().zip(c) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn axpy_slices(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

// ---------------------------------------------------------------------------
// so(r) coordinates: B = sum_{a<b} coord[k] E_ab with k running over the
// lexicographic (a, b) list, so coord[k] = B[a, b].
// ---------------------------------------------------------------------------

/// Writes the upper-triangle coordinates of an antisymmetric slice.
#[inline]
pub fn pack_coords(matrix: &[f64], coords: &mut [f64], r: usize) {
    let mut k = 0;
    for a in 0..r {
        for b in (a + 1)..r {
            coords[k] = matrix[a * r + b];
            k += 1;
        }
    }
}

/// Inverse of [`pack_coords`].
#[inline]
pub fn unpack_coords(coords: &[f64], matrix: &mut [f64], r: usize) {
    let mut k = 0;
    for a in 0..r {
        matrix[a * r + a] = 0.0;
        for b in (a + 1)..r {
            matrix[a * r + b] = coords[k];
            matrix[b * r + a] = -coords[k];
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Rotations.
// ---------------------------------------------------------------------------

/// exp(B) for antisymmetric B via scaling and squaring with a Taylor core.
/// Lands in SO(r) up to roundoff.
pub fn so_exp(b: &[f64], r: usize) -> Vec<f64> {
    let norm = frob_inner_slices(b, b).sqrt();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);

    let scaled: Vec<f64> = b.iter().map(|x| x * scale).collect();
    // Taylor series: with |scaled| <= 0.5 fifteen terms are far below 1e-16.
    let mut result = identity(r);
    let mut term = identity(r);
    for k in 1..=15 {
        term = mat_mul(&term, &scaled, r);
        for t in &mut term {
            *t /= k as f64;
        }
        for (res, t) in result.iter_mut().zip(&term) {
            *res += t;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result, r);
    }
    result
}

/// Pulls a nearly orthogonal matrix back onto the rotation group by
/// Newton-Schulz iteration: h <- h (3I - h^T h) / 2.
pub fn orthonormalize(h: &mut [f64], r: usize) {
    for _ in 0..4 {
        let hth = mat_tmul(h, h, r);
        let mut corr = vec![0.0; r * r];
        for i in 0..r {
            for j in 0..r {
                corr[i * r + j] = -0.5 * hth[i * r + j] + if i == j { 1.5 } else { 0.0 };
            }
        }
        let next = mat_mul(h, &corr, r);
        h.copy_from_slice(&next);
        if rotation_defect(h, r) < 1e-15 {
            break;
        }
    }
}

/// |h^T h - I|_inf.
pub fn rotation_defect(h: &[f64], r: usize) -> f64 {
    let hth = mat_tmul(h, h, r);
    let mut worst = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((hth[i * r + j] - target).abs());
        }
    }
    worst
}

/// Checks h^T h = I to [`ROTATION_TOL`] and det h = +1.
pub fn validate_rotation(h: &[f64], r: usize) -> Result<()> {
    let defect = rotation_defect(h, r);
    if defect > ROTATION_TOL {
        return Err(Error::NotRotation { reason: format!("|h^T h - I| = {defect:.3e}") });
    }
    let d = det(h, r);
    if d < 0.0 {
        return Err(Error::NotRotation { reason: format!("det h = {d:.6} < 0") });
    }
    Ok(())
}

pub fn identity(r: usize) -> Vec<f64> {
    let mut m = vec![0.0; r * r];
    for i in 0..r {
        m[i * r + i] = 1.0;
    }
    m
}

pub fn mat_mul(a: &[f64], b: &[f64], r: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * r];
    for i in 0..r {
        for k in 0..r {
            let aik = a[i * r + k];
            for j in 0..r {
                out[i * r + j] += aik * b[k * r + j];
            }
        }
    }
    out
}

/// a^T * b.
pub fn mat_tmul(a: &[f64], b: &[f64], r: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * r];
    for k in 0..r {
        for i in 0..r {
            let aki = a[k * r + i];
            for j in 0..r {
                out[i * r + j] += aki * b[k * r + j];
            }
        }
    }
    out
}

/// out = h^T * m * h (pointwise conjugation of a fiber matrix).
pub fn conjugate_slices(h: &[f64], m: &[f64], out: &mut [f64], r: usize, scratch: &mut [f64]) {
    // scratch = m * h
    for i in 0..r {
        for j in 0..r {
            let mut acc = 0.0;
            for k in 0..r {
                acc += m[i * r + k] * h[k * r + j];
            }
            scratch[i * r + j] = acc;
        }
    }
    // out = h^T * scratch
    for i in 0..r {
        for j in 0..r {
            let mut acc = 0.0;
            for k in 0..r {
                acc += h[k * r + i] * scratch[k * r + j];
            }
            out[i * r + j] = acc;
        }
    }
}

fn det(m: &[f64], r: usize) -> f64 {
    let mut a = m.to_vec();
    let mut sign = 1.0;
    for col in 0..r {
        let mut pivot = col;
        for row in (col + 1)..r {
            if a[row * r + col].abs() > a[pivot * r + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * r + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..r {
                a.swap(col * r + j, pivot * r + j);
            }
            sign = -sign;
        }
        let p = a[col * r + col];
        for row in (col + 1)..r {
            let factor = a[row * r + col] / p;
            for j in col..r {
                a[row * r + j] -= factor * a[col * r + j];
            }
        }
    }
    let mut d = sign;
    for i in 0..r {
        d *= a[i * r + i];
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn elem(r: usize, seed: &[f64]) -> AlgebraElement {
        AlgebraElement::antisymmetrize(r, &seed.iter().cycle().take(r * r).cloned().collect::<Vec<_>>())
    }

    #[test]
    fn basis_bracket_structure() {
        // [E_12, E_23] = E_13 in so(3) with zero-based indices (0,1),(1,2),(0,2).
        let e01 = AlgebraElement::basis(3, 0, 1);
        let e12 = AlgebraElement::basis(3, 1, 2);
        let e02 = AlgebraElement::basis(3, 0, 2);
        let br = e01.bracket(&e12).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!((br.get(a, b) - e02.get(a, b)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn frob_inner_of_basis_elements() {
        let e = AlgebraElement::basis(4, 1, 3);
        assert_eq!(e.frob_inner(&e).unwrap(), 2.0);
        let f = AlgebraElement::basis(4, 0, 2);
        assert_eq!(e.frob_inner(&f).unwrap(), 0.0);
    }

    #[test]
    fn construction_rejects_symmetric_part() {
        let bad = vec![0.0, 1.0, 1.0, 0.0];
        assert!(matches!(
            AlgebraElement::from_entries(2, bad),
            Err(Error::NotAntisymmetric { .. })
        ));
    }

    #[test]
    fn rank_mismatch_is_reported() {
        let a = elem(3, &[0.3, -0.1, 0.7]);
        let b = elem(4, &[0.2, 0.5, -0.4]);
        assert!(matches!(a.bracket(&b), Err(Error::RankMismatch { .. })));
    }

    #[test]
    fn pack_unpack_round_trip() {
        let b = elem(5, &[0.3, -1.2, 0.8, 0.05, -0.6]);
        let mut coords = vec![0.0; so_dim(5)];
        pack_coords(b.entries(), &mut coords, 5);
        let mut back = vec![0.0; 25];
        unpack_coords(&coords, &mut back, 5);
        assert_eq!(back, b.entries());
    }

    #[test]
    fn exp_of_generator_is_plane_rotation() {
        let theta = 0.73;
        let gen = AlgebraElement::basis(2, 0, 1).scaled(theta);
        let h = so_exp(gen.entries(), 2);
        assert!((h[0] - theta.cos()).abs() < 1e-14);
        assert!((h[1] - theta.sin()).abs() < 1e-14);
        validate_rotation(&h, 2).unwrap();
    }

    #[test]
    fn exp_lands_in_rotation_group() {
        let b = elem(5, &[1.7, -0.9, 2.3, 0.4, -1.1]);
        let h = so_exp(b.entries(), 5);
        validate_rotation(&h, 5).unwrap();
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let b = elem(4, &[0.4, -0.2, 0.9, 0.1]);
        let mut h = so_exp(b.entries(), 4);
        for e in h.iter_mut() {
            *e += 1e-5 * (e.to_bits() % 7) as f64 / 7.0;
        }
        orthonormalize(&mut h, 4);
        assert!(rotation_defect(&h, 4) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn bracket_stays_antisymmetric_and_jacobi_holds(
            xs in prop::collection::vec(-1.0f64..1.0, 16),
            ys in prop::collection::vec(-1.0f64..1.0, 16),
            zs in prop::collection::vec(-1.0f64..1.0, 16),
        ) {
            let r = 4;
            let b = AlgebraElement::antisymmetrize(r, &xs);
            let c = AlgebraElement::antisymmetrize(r, &ys);
            let d = AlgebraElement::antisymmetrize(r, &zs);

            let bc = b.bracket(&c).unwrap();
            prop_assert!(antisymmetry_defect(bc.entries(), r) < 1e-13);

            // [[B,C],D] + [[C,D],B] + [[D,B],C] = 0
            let t1 = bc.bracket(&d).unwrap();
            let t2 = c.bracket(&d).unwrap().bracket(&b).unwrap();
            let t3 = d.bracket(&b).unwrap().bracket(&c).unwrap();
            let total = t1.add(&t2).unwrap().add(&t3).unwrap();
            prop_assert!(total.frob_norm() < 1e-12);
        }

        #[test]
        fn commutator_bound_and_pairing_invariance(
            xs in prop::collection::vec(-1.0f64..1.0, 16),
            ys in prop::collection::vec(-1.0f64..1.0, 16),
            zs in prop::collection::vec(-1.0f64..1.0, 16),
        ) {
            let r = 4;
            let b = AlgebraElement::antisymmetrize(r, &xs);
            let c = AlgebraElement::antisymmetrize(r, &ys);
            let d = AlgebraElement::antisymmetrize(r, &zs);

            // |[B,C]| <= |B| |C|
            let bc = b.bracket(&c).unwrap();
            prop_assert!(bc.frob_norm() <= b.frob_norm() * c.frob_norm() + 1e-12);

            // <[B,C],D> + <C,[B,D]> = 0
            let lhs = bc.frob_inner(&d).unwrap();
            let rhs = c.frob_inner(&b.bracket(&d).unwrap()).unwrap();
            prop_assert!((lhs + rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
