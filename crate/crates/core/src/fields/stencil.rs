//! One-dimensional derivative stencils shared by every axis.
//!
//! Interior points (two or more layers from either end) use the fourth-order
//! central five-point stencil; the two layers nearest each end fall back to
//! the second-order one-sided three-point formula. The transpose table is the
//! exact adjoint of the gather table with respect to the plain grid sum, used
//! to build discretely symmetric quadratic forms.

/// Per-axis-index tap lists: `taps[i]` holds `(offset, coeff)` pairs so that
/// (d f)(i) = sum c * f(i + offset).
#[derive(Clone, Debug)]
pub struct DerivTable {
    pub taps: Vec<Vec<(isize, f64)>>,
    pub transpose: Vec<Vec<(isize, f64)>>,
}

impl DerivTable {
    pub fn new(m: usize, h: f64) -> Self {
        assert!(m >= 9, "stencil table needs m >= 9");
        let mut taps: Vec<Vec<(isize, f64)>> = Vec::with_capacity(m);
        for i in 0..m {
            if i >= 2 && i + 2 < m {
                taps.push(vec![
                    (-2, 1.0 / (12.0 * h)),
                    (-1, -8.0 / (12.0 * h)),
                    (1, 8.0 / (12.0 * h)),
                    (2, -1.0 / (12.0 * h)),
                ]);
            } else if i < 2 {
                taps.push(vec![
                    (0, -3.0 / (2.0 * h)),
                    (1, 4.0 / (2.0 * h)),
                    (2, -1.0 / (2.0 * h)),
                ]);
            } else {
                taps.push(vec![
                    (0, 3.0 / (2.0 * h)),
                    (-1, -4.0 / (2.0 * h)),
                    (-2, 1.0 / (2.0 * h)),
                ]);
            }
        }

        let mut transpose: Vec<Vec<(isize, f64)>> = vec![Vec::new(); m];
        for (x, row) in taps.iter().enumerate() {
            for &(off, c) in row {
                let y = (x as isize + off) as usize;
                transpose[y].push((-off, c));
            }
        }

        Self { taps, transpose }
    }
}
