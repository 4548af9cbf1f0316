//! Field constructors: the seed catalog used by tests, the solver, and the
//! command line `make-field`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ConnectionField, GaugeTransform, Grid, MAX_N};
use crate::algebra::{so_exp, AlgebraElement};
use crate::error::{Error, Result};

/// The zero (flat) connection.
pub fn flat(grid: Grid, r: usize) -> ConnectionField {
    ConnectionField::zero(grid, r)
}

/// Per-axis polynomial window prod_j (1 - (x_j/half_width)^2)^k. Vanishes to
/// order k at each face (one-sided stencils near the boundary only see
/// near-zeros) and, unlike sharper bump families, its derivatives grow slowly
/// enough that fourth-order stencil convergence is visible already at m = 17.
pub fn poly_window(half_width: f64, k: i32) -> impl Fn(&[f64]) -> f64 + Clone {
    move |xs: &[f64]| {
        let mut v = 1.0;
        for x in xs {
            let w: f64 = 1.0 - (x / half_width) * (x / half_width);
            if w <= 0.0 {
                return 0.0;
            }
            v *= w.powi(k);
        }
        v
    }
}

/// Rotation field h(x) = exp(profile(x) * E_ab) for one so(r) generator.
pub fn gauge_from_profile<F>(grid: Grid, r: usize, gen: (usize, usize), profile: F) -> GaugeTransform
where
    F: Fn(&[f64]) -> f64,
{
    let e = AlgebraElement::basis(r, gen.0, gen.1);
    let mut h = GaugeTransform::identity(grid, r);
    let rr = r * r;
    let mut xs = [0.0f64; MAX_N];
    for p in 0..grid.npoints() {
        grid.point(p, &mut xs);
        let b = e.scaled(profile(&xs[..grid.n()]));
        let hp = so_exp(b.entries(), r);
        h.data_mut()[p * rr..(p + 1) * rr].copy_from_slice(&hp);
    }
    h
}

/// Pure gauge connection h^-1 dh: flat up to discretization error.
pub fn pure_gauge(h: &GaugeTransform) -> Result<ConnectionField> {
    let flat = ConnectionField::zero(*h.grid(), h.rank());
    super::gauge::gauge_apply(h, &flat)
}

/// A_j = -(1/2) B_jk x^k E for a constant antisymmetric n x n matrix B and a
/// single generator E: constant curvature F_ij = B_ij E.
pub fn abelian_linear(grid: Grid, r: usize, b: &[f64], gen: &AlgebraElement) -> ConnectionField {
    let n = grid.n();
    assert_eq!(b.len(), n * n, "B must be n x n");
    assert_eq!(gen.rank(), r);
    for i in 0..n {
        for j in 0..n {
            assert!(
                (b[i * n + j] + b[j * n + i]).abs() < 1e-12,
                "B must be antisymmetric"
            );
        }
    }
    let mut a = ConnectionField::zero(grid, r);
    let mut xs = [0.0f64; MAX_N];
    for p in 0..grid.npoints() {
        grid.point(p, &mut xs);
        for j in 0..n {
            let mut coeff = 0.0;
            for k in 0..n {
                coeff += -0.5 * b[j * n + k] * xs[k];
            }
            crate::algebra::axpy_slices(coeff, gen.entries(), a.comp_mut(p, j));
        }
    }
    a
}

/// Knobs for [`random_smooth`]. Length scale sets bump widths; the envelope
/// radius pulls everything to zero well before the boundary. A compact
/// envelope (1-u)^6 vanishes identically outside its radius, so one-sided
/// boundary stencils only ever see zeros; the Gaussian envelope decays but
/// never quite vanishes.
#[derive(Clone, Debug)]
pub struct RandomFieldParams {
    pub amplitude: f64,
    pub length_scale: f64,
    pub envelope_radius: f64,
    pub bumps: usize,
    pub compact: bool,
}

impl RandomFieldParams {
    pub fn gentle(grid: &Grid) -> Self {
        Self {
            amplitude: 0.3,
            length_scale: 0.45 * grid.half_width(),
            envelope_radius: 0.45 * grid.half_width(),
            bumps: 4,
            compact: false,
        }
    }

    /// Compactly supported variant for refinement studies: everything dies
    /// well before the boundary layers.
    pub fn compact(grid: &Grid) -> Self {
        Self {
            amplitude: 0.3,
            length_scale: 0.5 * grid.half_width(),
            envelope_radius: 0.6 * grid.half_width(),
            bumps: 3,
            compact: true,
        }
    }
}

/// Superposition of Gaussian bumps with random so(r) directions, multiplied
/// by a centered Gaussian envelope. Deterministic in `seed`.
pub fn random_smooth(grid: Grid, r: usize, seed: u64, params: &RandomFieldParams) -> ConnectionField {
    let n = grid.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rw = grid.half_width();

    struct Bump {
        center: Vec<f64>,
        inv_two_sigma2: f64,
        dirs: Vec<Vec<f64>>, // one so(r) matrix per axis component
    }

    let normal = |rng: &mut ChaCha8Rng| -> f64 {
        // Box-Muller
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random::<f64>();
        (-2.0 * u1.ln()).sqrt() * libm::cos(2.0 * std::f64::consts::PI * u2)
    };

    let mut bumps = Vec::with_capacity(params.bumps);
    for _ in 0..params.bumps {
        let center: Vec<f64> = (0..n).map(|_| rng.random_range(-0.4 * rw..0.4 * rw)).collect();
        let sigma = params.length_scale * rng.random_range(0.7..1.3);
        let dirs: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..r * r).map(|_| normal(&mut rng)).collect();
                let elem = AlgebraElement::antisymmetrize(r, &raw);
                let norm = elem.frob_norm().max(1e-12);
                elem.scaled(params.amplitude / norm).entries().to_vec()
            })
            .collect();
        bumps.push(Bump { center, inv_two_sigma2: 1.0 / (2.0 * sigma * sigma), dirs });
    }

    let env_r2 = params.envelope_radius * params.envelope_radius;
    let mut a = ConnectionField::zero(grid, r);
    let mut xs = [0.0f64; MAX_N];
    for p in 0..grid.npoints() {
        grid.point(p, &mut xs);
        let rho2: f64 = xs[..n].iter().map(|x| x * x).sum();
        let envelope = if params.compact {
            let u = rho2 / env_r2;
            if u >= 1.0 {
                0.0
            } else {
                (1.0 - u).powi(6)
            }
        } else {
            (-rho2 / (2.0 * env_r2)).exp()
        };
        if envelope < 1e-14 {
            continue;
        }
        for bump in &bumps {
            let mut d2 = 0.0;
            for k in 0..n {
                let d = xs[k] - bump.center[k];
                d2 += d * d;
            }
            let w = envelope * (-d2 * bump.inv_two_sigma2).exp();
            if w < 1e-14 {
                continue;
            }
            for j in 0..n {
                crate::algebra::axpy_slices(w, &bump.dirs[j], a.comp_mut(p, j));
            }
        }
    }
    a
}

/// Extends a field on an (n-1)-dimensional grid to n dimensions: constant
/// along `axis` with zero component there. The inner grid must share m and R.
pub fn descended_extension(inner: &ConnectionField, grid: Grid, axis: usize) -> Result<ConnectionField> {
    let n = grid.n();
    let inner_grid = *inner.grid();
    if inner_grid.n() + 1 != n {
        return Err(Error::InvalidGrid {
            reason: format!("inner field has dimension {}, expected {}", inner_grid.n(), n - 1),
        });
    }
    if inner_grid.m() != grid.m() || inner_grid.half_width() != grid.half_width() {
        return Err(Error::GridMismatch);
    }
    if axis >= n {
        return Err(Error::AxisOutOfRange { axis, n });
    }
    let r = inner.rank();
    let rr = r * r;
    let mut out = ConnectionField::zero(grid, r);
    let mut mi = [0usize; MAX_N];
    let mut inner_mi = [0usize; MAX_N];
    for p in 0..grid.npoints() {
        grid.decode(p, &mut mi);
        let mut k = 0;
        for a in 0..n {
            if a == axis {
                continue;
            }
            inner_mi[k] = mi[a];
            k += 1;
        }
        let q = inner_grid.encode(&inner_mi);
        let mut k = 0;
        for a in 0..n {
            if a == axis {
                continue;
            }
            out.comp_mut(p, a).copy_from_slice(inner.comp(q, k));
            let _ = rr;
            k += 1;
        }
    }
    Ok(out)
}

/// Rotationally equivariant field A_i(x) = f(|x|^2) M_i(x) where
/// (M_i)^{ab} = delta_i^a x^b - delta_i^b x^a embeds so(n) into so(r).
/// Requires r >= n. The radial component x^p A_p vanishes identically, so
/// these fields are already in radial gauge about the origin.
pub fn so_rotational<F>(grid: Grid, r: usize, profile: F) -> Result<ConnectionField>
where
    F: Fn(f64) -> f64,
{
    let n = grid.n();
    if r < n {
        return Err(Error::RankMismatch { expected: n, got: r });
    }
    let mut a = ConnectionField::zero(grid, r);
    let mut xs = [0.0f64; MAX_N];
    for p in 0..grid.npoints() {
        grid.point(p, &mut xs);
        let rho: f64 = xs[..n].iter().map(|x| x * x).sum();
        let f = profile(rho);
        if f == 0.0 {
            continue;
        }
        for i in 0..n {
            let slot = a.comp_mut(p, i);
            for b in 0..n {
                // (M_i)^{ib} = x^b, (M_i)^{bi} = -x^b
                slot[i * r + b] += f * xs[b];
                slot[b * r + i] -= f * xs[b];
            }
        }
    }
    Ok(a)
}
