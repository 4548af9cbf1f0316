//! Lattice gauge fields over a truncated box.
//!
//! The domain is the cube [-R, R]^n sampled by m points per axis (m odd, so
//! the origin is a grid point), spacing h = 2R/(m-1). Points are indexed
//! lexicographically with axis 0 slowest; each point carries one r x r fiber
//! matrix per form component, stored row-major. That flat layout is also the
//! archive byte order, so saving a field is a straight dump of `data`.

mod builders;
mod gauge;
mod interp;
mod ops;
mod stencil;

pub use builders::*;
pub use gauge::*;
pub use interp::*;
pub use ops::*;
pub use stencil::DerivTable;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest supported spatial dimension.
pub const MAX_N: usize = 6;

/// Regular origin-centered lattice on [-R, R]^n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    m: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(n: usize, m: usize, half_width: f64) -> Result<Self> {
        if !(2..=MAX_N).contains(&n) {
            return Err(Error::InvalidGrid { reason: format!("n = {n} outside 2..=6") });
        }
        if m < 9 {
            return Err(Error::InvalidGrid { reason: format!("m = {m} below the minimum 9") });
        }
        if m % 2 == 0 {
            return Err(Error::InvalidGrid { reason: format!("m = {m} must be odd") });
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid { reason: format!("half-width {half_width} not positive") });
        }
        Ok(Self { n, m, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Lattice spacing h = 2R/(m-1).
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.m - 1) as f64
    }

    pub fn npoints(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    /// Number of unordered axis pairs, the two-form component count.
    pub fn npairs(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Linear stride of one step along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.m.pow((self.n - 1 - axis) as u32)
    }

    /// Coordinate of axis index i: -R + i h.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn decode(&self, mut idx: usize, out: &mut [usize; MAX_N]) {
        for axis in (0..self.n).rev() {
            out[axis] = idx % self.m;
            idx /= self.m;
        }
    }

    pub fn encode(&self, multi: &[usize; MAX_N]) -> usize {
        let mut idx = 0;
        for axis in 0..self.n {
            idx = idx * self.m + multi[axis];
        }
        idx
    }

    /// Writes the spatial coordinates of a point into `out[..n]`.
    pub fn point(&self, idx: usize, out: &mut [f64; MAX_N]) {
        let mut mi = [0usize; MAX_N];
        self.decode(idx, &mut mi);
        for axis in 0..self.n {
            out[axis] = self.coord(mi[axis]);
        }
    }

    /// Pair component index for i < j in lexicographic order
    /// (0,1), (0,2), ..., (0,n-1), (1,2), ...
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    /// True when every axis index is at least `depth` away from both ends.
    pub fn is_interior(&self, multi: &[usize; MAX_N], depth: usize) -> bool {
        (0..self.n).all(|a| multi[a] >= depth && multi[a] + depth < self.m)
    }

    /// Finite difference tables shared by every axis (all axes have m points).
    pub fn deriv_table(&self) -> stencil::DerivTable {
        stencil::DerivTable::new(self.m, self.spacing())
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// A Gaussian center: base point x0 and scale t0 > 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Center {
    pub x0: Vec<f64>,
    pub t0: f64,
}

impl Center {
    pub fn new(x0: Vec<f64>, t0: f64) -> Result<Self> {
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::InvalidCenter { reason: format!("t0 = {t0} not positive") });
        }
        if x0.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCenter { reason: "x0 has a non-finite coordinate".into() });
        }
        Ok(Self { x0, t0 })
    }

    /// Center (0, t0) in dimension n.
    pub fn origin(n: usize, t0: f64) -> Self {
        Self { x0: vec![0.0; n], t0 }
    }

    pub fn validate_for(&self, grid: &Grid) -> Result<()> {
        if self.x0.len() != grid.n() {
            return Err(Error::InvalidCenter {
                reason: format!("x0 has {} coordinates, grid dimension is {}", self.x0.len(), grid.n()),
            });
        }
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(Error::InvalidCenter { reason: format!("t0 = {} not positive", self.t0) });
        }
        let hw = grid.half_width();
        if self.x0.iter().any(|c| c.abs() > hw) {
            return Err(Error::InvalidCenter {
                reason: format!("x0 = {:?} outside the box [-{hw}, {hw}]^n", self.x0),
            });
        }
        Ok(())
    }
}

macro_rules! impl_fiber_field {
    ($name:ident) => {
        impl $name {
            pub fn grid(&self) -> &Grid {
                &self.grid
            }

            pub fn rank(&self) -> usize {
                self.r
            }

            pub fn ncomp(&self) -> usize {
                self.ncomp
            }

            /// Fiber matrix of component `c` at point `p`, row-major r x r.
            #[inline]
            pub fn comp(&self, p: usize, c: usize) -> &[f64] {
                let rr = self.r * self.r;
                let base = (p * self.ncomp + c) * rr;
                &self.data[base..base + rr]
            }

            #[inline]
            pub fn comp_mut(&mut self, p: usize, c: usize) -> &mut [f64] {
                let rr = self.r * self.r;
                let base = (p * self.ncomp + c) * rr;
                &mut self.data[base..base + rr]
            }

            pub fn data(&self) -> &[f64] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [f64] {
                &mut self.data
            }

            pub fn fill_zero(&mut self) {
                self.data.fill(0.0);
            }

            /// self += s * other.
            pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
                self.check_compatible(other)?;
                crate::algebra::axpy_slices(s, &other.data, &mut self.data);
                Ok(())
            }

            pub fn scale(&mut self, s: f64) {
                for v in &mut self.data {
                    *v *= s;
                }
            }

            pub fn sup_entry_norm(&self) -> f64 {
                self.data.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
            }

            pub fn check_compatible(&self, other: &Self) -> Result<()> {
                self.grid.check_same(&other.grid)?;
                if self.r != other.r {
                    return Err(Error::RankMismatch { expected: self.r, got: other.r });
                }
                Ok(())
            }
        }
    };
}

/// Connection one-form A: n fiber matrices per point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionField {
    grid: Grid,
    r: usize,
    ncomp: usize,
    data: Vec<f64>,
}

/// so(r)-valued one-form (variation directions, codifferentials, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct GValuedOneForm {
    grid: Grid,
    r: usize,
    ncomp: usize,
    data: Vec<f64>,
}

/// so(r)-valued two-form stored on the strict upper triangle of axis pairs;
/// the (j, i) component with j > i is minus the stored (i, j) one.
#[derive(Clone, Debug, PartialEq)]
pub struct GValuedTwoForm {
    grid: Grid,
    r: usize,
    ncomp: usize,
    data: Vec<f64>,
}

/// Pointwise rotation h(x) in SO(r); one fiber matrix per point.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeTransform {
    grid: Grid,
    r: usize,
    ncomp: usize,
    data: Vec<f64>,
}

impl_fiber_field!(ConnectionField);
impl_fiber_field!(GValuedOneForm);
impl_fiber_field!(GValuedTwoForm);
impl_fiber_field!(GaugeTransform);

impl ConnectionField {
    pub fn zero(grid: Grid, r: usize) -> Self {
        let ncomp = grid.n();
        let data = vec![0.0; grid.npoints() * ncomp * r * r];
        Self { grid, r, ncomp, data }
    }

    /// self += s * theta, moving the connection along a one-form direction.
    pub fn add_scaled_oneform(&mut self, s: f64, theta: &GValuedOneForm) -> Result<()> {
        self.grid.check_same(&theta.grid)?;
        if self.r != theta.r {
            return Err(Error::RankMismatch { expected: self.r, got: theta.r });
        }
        crate::algebra::axpy_slices(s, &theta.data, &mut self.data);
        Ok(())
    }

    /// The same coefficients seen as a one-form (identical layout).
    pub fn to_oneform(&self) -> GValuedOneForm {
        GValuedOneForm { grid: self.grid, r: self.r, ncomp: self.ncomp, data: self.data.clone() }
    }
}

impl GValuedOneForm {
    pub fn zero(grid: Grid, r: usize) -> Self {
        let ncomp = grid.n();
        let data = vec![0.0; grid.npoints() * ncomp * r * r];
        Self { grid, r, ncomp, data }
    }

    pub fn to_connection(&self) -> ConnectionField {
        ConnectionField { grid: self.grid, r: self.r, ncomp: self.ncomp, data: self.data.clone() }
    }
}

impl GValuedTwoForm {
    pub fn zero(grid: Grid, r: usize) -> Self {
        let ncomp = grid.npairs();
        let data = vec![0.0; grid.npoints() * ncomp * r * r];
        Self { grid, r, ncomp, data }
    }

    /// Stored component for an ordered pair i < j.
    #[inline]
    pub fn comp_pair(&self, p: usize, i: usize, j: usize) -> &[f64] {
        self.comp(p, self.grid.pair_index(i, j))
    }
}

impl GaugeTransform {
    /// Identity gauge.
    pub fn identity(grid: Grid, r: usize) -> Self {
        let npts = grid.npoints();
        let mut data = vec![0.0; npts * r * r];
        for p in 0..npts {
            for a in 0..r {
                data[(p * r + a) * r + a] = 1.0;
            }
        }
        Self { grid, r, ncomp: 1, data }
    }

    /// Validates every fiber matrix: h^T h = I within 1e-10 and det h = +1.
    pub fn validate(&self) -> Result<()> {
        for p in 0..self.grid.npoints() {
            crate::algebra::validate_rotation(self.comp(p, 0), self.r)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(3, 9, 4.0).is_ok());
        assert!(matches!(Grid::new(1, 9, 4.0), Err(Error::InvalidGrid { .. })));
        assert!(matches!(Grid::new(7, 9, 4.0), Err(Error::InvalidGrid { .. })));
        assert!(matches!(Grid::new(3, 7, 4.0), Err(Error::InvalidGrid { .. })));
        assert!(matches!(Grid::new(3, 10, 4.0), Err(Error::InvalidGrid { .. })));
        assert!(matches!(Grid::new(3, 9, -1.0), Err(Error::InvalidGrid { .. })));
    }

    #[test]
    fn origin_is_a_grid_point_and_spacing_matches() {
        let g = Grid::new(2, 9, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.coord((g.m() - 1) / 2), 0.0);
        assert_eq!(g.coord(0), -4.0);
        assert_eq!(g.coord(8), 4.0);
    }

    #[test]
    fn encode_decode_round_trip() {
        let g = Grid::new(3, 9, 2.0).unwrap();
        let mut mi = [0usize; MAX_N];
        for idx in [0, 1, 8, 9, 80, 81, 500, 728] {
            g.decode(idx, &mut mi);
            assert_eq!(g.encode(&mi), idx);
        }
        g.decode(9, &mut mi);
        assert_eq!(&mi[..3], &[0, 1, 0]);
    }

    #[test]
    fn pair_index_is_lexicographic() {
        let g = Grid::new(4, 9, 1.0).unwrap();
        let expect = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for (k, (i, j)) in expect.iter().enumerate() {
            assert_eq!(g.pair_index(*i, *j), k);
        }
    }

    #[test]
    fn field_layout_is_point_major() {
        let g = Grid::new(2, 9, 1.0).unwrap();
        let mut a = ConnectionField::zero(g, 2);
        a.comp_mut(3, 1)[1] = 7.0;
        // point 3, component 1, entry (0,1) of a 2x2 matrix
        assert_eq!(a.data()[(3 * 2 + 1) * 4 + 1], 7.0);
    }

    #[test]
    fn gauge_identity_validates() {
        let g = Grid::new(2, 9, 1.0).unwrap();
        GaugeTransform::identity(g, 3).validate().unwrap();
    }

    #[test]
    fn center_validation() {
        let g = Grid::new(3, 9, 2.0).unwrap();
        assert!(Center::origin(3, 1.0).validate_for(&g).is_ok());
        assert!(Center::new(vec![0.0; 3], 0.0).is_err());
        assert!(Center::origin(2, 1.0).validate_for(&g).is_err());
    }
}
