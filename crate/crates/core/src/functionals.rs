//! Heat-kernel weighted curvature functionals and the entropy supremum.
//!
//! The base quantity is the scalar lattice field |F|^2 = sum_{i<j} <F_ij,F_ij>
//! (equal to half the full double sum over ordered pairs). Every functional
//! here is a weighted reduction of that field, so the entropy ascent computes
//! it once and sweeps centers cheaply.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    curvature, curvature_norm_sq_field, Center, ConnectionField, Grid, MAX_N,
};
use crate::quadrature::{gaussian_weight, trapezoid_integral, truncation_deficit};
use crate::sum::tree_sum_indexed;

/// Estimated Gaussian mass outside the box when the truncation rule
/// R >= 5 sqrt(t0) is violated. None when the rule holds.
pub fn truncation_warning(grid: &Grid, center: &Center) -> Option<f64> {
    if grid.half_width() >= 5.0 * center.t0.sqrt() {
        None
    } else {
        Some(truncation_deficit(grid, center))
    }
}

/// t0^2 * integral of |F|^2 against the Gaussian weight.
pub fn f_functional(a: &ConnectionField, center: &Center) -> Result<f64> {
    let nsq = curvature_norm_sq_field(&curvature(a));
    f_of_norm_sq(a.grid(), &nsq, center)
}

/// The functional evaluated from a precomputed |F|^2 field.
pub fn f_of_norm_sq(grid: &Grid, nsq: &[f64], center: &Center) -> Result<f64> {
    center.validate_for(grid)?;
    let w = center_weights(grid, center);
    Ok(center.t0 * center.t0 * tree_sum_indexed(nsq.len(), |p| w[p] * nsq[p]))
}

/// Derivatives of the functional in the center: (dF/dt0, dF/dx0).
pub fn f_gradient_center(a: &ConnectionField, center: &Center) -> Result<(f64, Vec<f64>)> {
    center.validate_for(a.grid())?;
    let nsq = curvature_norm_sq_field(&curvature(a));
    let m = center_moments(a.grid(), &nsq, center);
    Ok((m.dt0, m.dx0))
}

/// Backward-kernel functional at flow time t: the weight scale is t0 - t.
pub fn phi(a_snapshot: &ConnectionField, center: &Center, t: f64) -> Result<f64> {
    if !(t < center.t0) {
        return Err(Error::InvalidCenter {
            reason: format!("flow time {t} not below the center scale {}", center.t0),
        });
    }
    f_functional(a_snapshot, &Center { x0: center.x0.clone(), t0: center.t0 - t })
}

/// Truncated Yang-Mills energy: half the unweighted trapezoid sum of |F|^2.
pub fn ym_energy(a: &ConnectionField) -> f64 {
    let nsq = curvature_norm_sq_field(&curvature(a));
    0.5 * trapezoid_integral(a.grid(), &nsq)
}

/// Multistart configuration for the entropy ascent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub max_iters: usize,
    /// Ascent stops when |grad| <= grad_tol * (1 + |value|).
    pub grad_tol: f64,
    /// Mean |F|^2 on the outermost lattice layer above this triggers the
    /// divergence sentinel: t0^2 * const does not stay bounded in t0.
    pub shell_threshold: f64,
    /// The two lateral starts sit at +- offset_frac * half_width along the
    /// main diagonal.
    pub offset_frac: f64,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self { max_iters: 300, grad_tol: 1e-9, shell_threshold: 1e-6, offset_frac: 0.25 }
    }
}

/// Outcome of the entropy supremum search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyResult {
    /// Best functional value found, or +infinity when curvature does not
    /// decay toward the boundary.
    pub value: f64,
    pub argmax_center: Option<Center>,
    pub starts_tried: usize,
    pub converged: bool,
    /// True when the best center sits on the t0 <= (R/5)^2 truncation clamp.
    pub clamped: bool,
}

/// sup over centers of the weighted curvature functional, by multistart
/// gradient ascent in (x0, log t0). Eight starts: x0 in {0, argmax |F|^2,
/// +- diagonal offset} crossed with log t0 in {-1, 0, 1} for the first two.
pub fn entropy(a: &ConnectionField, cfg: &EntropyConfig) -> Result<EntropyResult> {
    let grid = *a.grid();
    let n = grid.n();
    let hw = grid.half_width();
    let nsq = curvature_norm_sq_field(&curvature(a));

    // divergence detection on the outermost layer
    let mut shell_sum = 0.0;
    let mut shell_count = 0usize;
    let mut mi = [0usize; MAX_N];
    for p in 0..grid.npoints() {
        grid.decode(p, &mut mi);
        if !grid.is_interior(&mi, 1) {
            shell_sum += nsq[p];
            shell_count += 1;
        }
    }
    if shell_sum / shell_count as f64 > cfg.shell_threshold {
        return Ok(EntropyResult {
            value: f64::INFINITY,
            argmax_center: None,
            starts_tried: 0,
            converged: false,
            clamped: false,
        });
    }

    let t0_max = (hw / 5.0).powi(2);
    let tau_max = t0_max.ln();

    let mut xmax = vec![0.0f64; n];
    let pmax = (0..nsq.len()).max_by(|&i, &j| nsq[i].total_cmp(&nsq[j])).unwrap_or(0);
    let mut xs = [0.0f64; MAX_N];
    grid.point(pmax, &mut xs);
    xmax.copy_from_slice(&xs[..n]);

    let off = cfg.offset_frac * hw / (n as f64).sqrt();
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(8);
    for tau in [-1.0, 0.0, 1.0] {
        starts.push((vec![0.0; n], tau));
        starts.push((xmax.clone(), tau));
    }
    starts.push((vec![off; n], 0.0));
    starts.push((vec![-off; n], 0.0));

    let mut best_value = f64::NEG_INFINITY;
    let mut best_u: Option<(Vec<f64>, f64)> = None;
    let mut best_converged = false;
    for (x0, tau) in &starts {
        let u0 = clamp_u(x0, tau.min(tau_max), hw, tau_max);
        let (val, u, conv) = ascend(&grid, &nsq, u0, hw, tau_max, cfg);
        if val > best_value {
            best_value = val;
            best_u = Some(u);
            best_converged = conv;
        }
    }

    let (x0, tau) = best_u.expect("at least one start");
    let t0 = tau.exp();
    Ok(EntropyResult {
        value: best_value,
        argmax_center: Some(Center::new(x0, t0)?),
        starts_tried: starts.len(),
        converged: best_converged,
        clamped: t0 >= t0_max * (1.0 - 1e-9),
    })
}

/// Quadrature weights for one center: Gaussian times trapezoid cell measure.
fn center_weights(grid: &Grid, center: &Center) -> Vec<f64> {
    let grid = *grid;
    let center = center.clone();
    let mut w = vec![0.0f64; grid.npoints()];
    w.par_iter_mut().enumerate().for_each(|(p, out)| {
        let mut mi = [0usize; MAX_N];
        let mut xs = [0.0f64; MAX_N];
        grid.decode(p, &mut mi);
        grid.point(p, &mut xs);
        *out = gaussian_weight(&xs[..grid.n()], &center)
            * crate::fields::trapezoid_weight(&grid, &mi);
    });
    w
}

struct Moments {
    value: f64,
    dt0: f64,
    dx0: Vec<f64>,
}

/// Value and center-derivatives of the functional in one weight sweep.
fn center_moments(grid: &Grid, nsq: &[f64], center: &Center) -> Moments {
    let n = grid.n();
    let t0 = center.t0;
    let w = center_weights(grid, center);
    let npts = nsq.len();
    let value = t0 * t0 * tree_sum_indexed(npts, |p| w[p] * nsq[p]);
    let dt0 = tree_sum_indexed(npts, |p| {
        let mut xs = [0.0f64; MAX_N];
        grid.point(p, &mut xs);
        let mut d2 = 0.0;
        for k in 0..n {
            let d = xs[k] - center.x0[k];
            d2 += d * d;
        }
        ((4.0 - n as f64) / 2.0 * t0 + 0.25 * d2) * nsq[p] * w[p]
    });
    let mut dx0 = vec![0.0f64; n];
    for k in 0..n {
        dx0[k] = 0.5
            * t0
            * tree_sum_indexed(npts, |p| {
                let mut xs = [0.0f64; MAX_N];
                grid.point(p, &mut xs);
                (xs[k] - center.x0[k]) * nsq[p] * w[p]
            });
    }
    Moments { value, dt0, dx0 }
}

fn clamp_u(x0: &[f64], tau: f64, hw: f64, tau_max: f64) -> (Vec<f64>, f64) {
    let x = x0.iter().map(|c| c.clamp(-hw, hw)).collect();
    (x, tau.min(tau_max))
}

/// Backtracking gradient ascent in u = (x0, log t0).
fn ascend(
    grid: &Grid,
    nsq: &[f64],
    u0: (Vec<f64>, f64),
    hw: f64,
    tau_max: f64,
    cfg: &EntropyConfig,
) -> (f64, (Vec<f64>, f64), bool) {
    let n = grid.n();
    let eval = |u: &(Vec<f64>, f64)| -> (f64, Vec<f64>) {
        let t0 = u.1.exp();
        let center = Center { x0: u.0.clone(), t0 };
        let m = center_moments(grid, nsq, &center);
        let mut g = m.dx0;
        g.push(t0 * m.dt0);
        (m.value, g)
    };

    let mut u = u0;
    let (mut f, mut g) = eval(&u);
    let mut step = 0.25;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let gnorm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        if gnorm <= cfg.grad_tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
        let mut accepted = false;
        while step >= 1e-14 {
            let mut xt: Vec<f64> = (0..n).map(|k| u.0[k] + step * g[k]).collect();
            for c in xt.iter_mut() {
                *c = c.clamp(-hw, hw);
            }
            let ut = (xt, (u.1 + step * g[n]).min(tau_max));
            let (ft, gt) = eval(&ut);
            if ft > f {
                u = ut;
                f = ft;
                g = gt;
                step = (step * 1.5).min(100.0);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no increasing step exists at floating-point resolution
            converged = true;
            break;
        }
    }
    (f, u, converged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{abelian_linear, random_smooth, translate_connection, RandomFieldParams};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn constant_curvature_field(m: usize, hw: f64) -> ConnectionField {
        // abelian linear potential with B_01 = 1: F_01 = E_01 everywhere
        let grid = Grid::new(2, m, hw).unwrap();
        let mut b = vec![0.0; 4];
        b[0 * 2 + 1] = 1.0;
        b[1 * 2 + 0] = -1.0;
        abelian_linear(grid, 2, &b, &crate::algebra::AlgebraElement::basis(2, 0, 1))
    }

    #[test]
    fn zero_field_has_zero_functionals() {
        let grid = Grid::new(2, 9, 5.5).unwrap();
        let a = crate::fields::flat(grid, 3);
        let c = Center::origin(2, 1.0);
        assert_eq!(f_functional(&a, &c).unwrap(), 0.0);
        let (dt0, dx0) = f_gradient_center(&a, &c).unwrap();
        assert_eq!(dt0, 0.0);
        assert!(dx0.iter().all(|v| *v == 0.0));
        assert_eq!(ym_energy(&a), 0.0);
        let res = entropy(&a, &EntropyConfig::default()).unwrap();
        assert_eq!(res.value, 0.0);
        assert!(res.converged);
        assert_eq!(res.starts_tried, 8);
    }

    #[test]
    fn constant_curvature_value_is_two() {
        // |F|^2 = 2 everywhere; R = 8 sqrt(t0) keeps the tail below 1e-7
        let a = constant_curvature_field(33, 8.0);
        let c = Center::origin(2, 1.0);
        assert!(truncation_warning(a.grid(), &c).is_none());
        let val = f_functional(&a, &c).unwrap();
        assert_relative_eq!(val, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn ym_energy_of_constant_curvature_is_box_volume() {
        let a = constant_curvature_field(17, 3.0);
        assert_relative_eq!(ym_energy(&a), 36.0, max_relative = 1e-12);
    }

    #[test]
    fn truncation_warning_reports_lost_mass() {
        let grid = Grid::new(2, 9, 3.0).unwrap();
        let lost = truncation_warning(&grid, &Center::origin(2, 1.0)).unwrap();
        assert!(lost > 1e-5 && lost < 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let grid = Grid::new(2, 33, 6.0).unwrap();
        let a = random_smooth(grid, 3, 11, &RandomFieldParams::gentle(&grid));
        let c = Center::new(vec![0.3, -0.2], 0.8).unwrap();
        let (dt0, dx0) = f_gradient_center(&a, &c).unwrap();

        let fd = |cp: &Center, cm: &Center, h: f64| {
            (f_functional(&a, cp).unwrap() - f_functional(&a, cm).unwrap()) / (2.0 * h)
        };
        let h = 1e-4;
        let fd_t0 = fd(
            &Center::new(c.x0.clone(), c.t0 + h).unwrap(),
            &Center::new(c.x0.clone(), c.t0 - h).unwrap(),
            h,
        );
        assert_relative_eq!(fd_t0, dt0, max_relative = 1e-6);
        for k in 0..2 {
            let mut xp = c.x0.clone();
            let mut xm = c.x0.clone();
            xp[k] += h;
            xm[k] -= h;
            let fd_k = fd(
                &Center::new(xp, c.t0).unwrap(),
                &Center::new(xm, c.t0).unwrap(),
                h,
            );
            assert_relative_eq!(fd_k, dx0[k], max_relative = 1e-6);
        }
    }

    #[test]
    fn rescaling_leaves_the_functional_invariant() {
        // F_{c x0, c^2 t0}(A^c) = F_{x0, t0}(A) with A^c(y) = A(y/c)/c by
        // interpolation, c = 2. Multilinear coefficient fields are resampled
        // exactly, so the comparison is limited only by box truncation.
        let grid = Grid::new(2, 33, 6.0).unwrap();
        let e01 = crate::algebra::AlgebraElement::basis(3, 0, 1);
        let e12 = crate::algebra::AlgebraElement::basis(3, 1, 2);
        let mut a = ConnectionField::zero(grid, 3);
        let mut xs = [0.0f64; MAX_N];
        for p in 0..grid.npoints() {
            grid.point(p, &mut xs);
            let (x, y) = (xs[0], xs[1]);
            let p0 = 0.3 + 0.2 * x - 0.15 * y + 0.05 * x * y;
            let p1 = -0.1 + 0.12 * x + 0.2 * y - 0.07 * x * y;
            for (k, v) in e01.entries().iter().enumerate() {
                a.comp_mut(p, 0)[k] = p0 * v;
            }
            for (k, v) in e12.entries().iter().enumerate() {
                a.comp_mut(p, 1)[k] = p1 * v;
            }
        }
        let c0 = Center::new(vec![0.2, -0.1], 0.09).unwrap();
        let base = f_functional(&a, &c0).unwrap();
        assert!(base > 1e-4, "base functional {base} too small to test against");

        let scaled = crate::fields::rescale_spatial(&a, 0.5, &[0.0, 0.0]);
        let c1 = Center::new(vec![0.4, -0.2], 0.36).unwrap();
        let val = f_functional(&scaled, &c1).unwrap();
        assert_relative_eq!(val, base, max_relative = 1e-4);
    }

    #[test]
    fn phi_at_time_zero_is_the_functional() {
        let grid = Grid::new(2, 17, 6.0).unwrap();
        let a = random_smooth(grid, 2, 7, &RandomFieldParams::compact(&grid));
        let c = Center::origin(2, 1.2);
        assert_eq!(phi(&a, &c, 0.0).unwrap(), f_functional(&a, &c).unwrap());
        // shifting t only shifts the kernel scale
        let direct = f_functional(&a, &Center::origin(2, 0.9)).unwrap();
        assert_relative_eq!(phi(&a, &c, 0.3).unwrap(), direct, max_relative = 1e-12);
        assert!(phi(&a, &c, 1.2).is_err());
    }

    #[test]
    fn nondecaying_curvature_trips_the_sentinel() {
        let a = constant_curvature_field(17, 6.0);
        let res = entropy(&a, &EntropyConfig::default()).unwrap();
        assert!(res.value.is_infinite());
        assert!(res.argmax_center.is_none());
        assert!(!res.converged);
    }

    #[test]
    fn entropy_dominates_random_probe_centers() {
        let grid = Grid::new(2, 25, 6.0).unwrap();
        let a = random_smooth(grid, 2, 23, &RandomFieldParams::compact(&grid));
        let res = entropy(&a, &EntropyConfig::default()).unwrap();
        assert!(res.value.is_finite());
        assert!(res.converged);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let t0_max = (grid.half_width() / 5.0).powi(2);
        for _ in 0..100 {
            let x0 = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let t0 = rng.random_range(0.05..t0_max);
            let probe = f_functional(&a, &Center::new(x0, t0).unwrap()).unwrap();
            assert!(res.value >= probe - 1e-12 * probe.abs());
        }
    }

    #[test]
    fn entropy_is_translation_invariant() {
        let grid = Grid::new(2, 33, 6.0).unwrap();
        let mut params = RandomFieldParams::compact(&grid);
        params.envelope_radius = 0.3 * grid.half_width();
        let a = random_smooth(grid, 2, 31, &params);
        let base = entropy(&a, &EntropyConfig::default()).unwrap();

        // shift by an exact lattice vector so no interpolation error enters
        let h = grid.spacing();
        let shifted = translate_connection(&a, &[2.0 * h, -h]);
        let moved = entropy(&shifted, &EntropyConfig::default()).unwrap();
        assert!(base.value.is_finite() && moved.value.is_finite());
        assert_relative_eq!(moved.value, base.value, max_relative = 1e-4);
    }
}
