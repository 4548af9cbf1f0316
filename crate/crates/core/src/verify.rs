//! Executable checks for the weighted integral identities, the curvature gap
//! threshold, the low-dimension obstruction, path monotonicity along center
//! rescalings, descended directions, and the entropy response to unstable
//! perturbations.
//!
//! The workhorse is an integration-by-parts identity valid for every smooth
//! connection, not only solitons. For a polynomial vector field phi and
//! y = x - x0,
//!
//!   int <phi, y> |F|^2 G dx
//!     = int [ 2 t0 div(phi) |F|^2 - 4 t0 (d_i phi^p) <F_pj, F_ij> ] G dx
//!       - 4 t0 int <i_phi F, S> G dx,
//!
//! where S is the soliton residual. The last term vanishes at solitons;
//! specializing phi over a six-field catalog then yields the five moment
//! identities of `identity_a_through_e`. Because the identity holds for
//! arbitrary fields, it is assertable on random data with no soliton in hand,
//! which is what makes this suite testable off-soliton.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    curvature, interior_product, interior_product_const, random_smooth, so_rotational, Center,
    ConnectionField, GValuedOneForm, GValuedTwoForm, Grid, RandomFieldParams, MAX_N,
};
use crate::functionals::{entropy, f_functional, EntropyConfig};
use crate::quadrature::WeightedQuadrature;
use crate::solve::{find_soliton, residual_energy, JacobianMode, SolverConfig};
use crate::spectral::SOLITON_GATE_REL;
use crate::sum::tree_sum_indexed;
use crate::variations::soliton_residual;

/// Default relative tolerance for the ungated generalized identity.
pub const GENERALIZED_TOL: f64 = 5e-3;
/// Default relative tolerance for the moment identities (a), (c), (e).
pub const MOMENT_TOL: f64 = 2e-2;
/// Default mass-relative tolerance for the vanishing moments (b), (d).
pub const CENTROID_TOL: f64 = 1e-3;
/// Tolerance for the two independent evaluations of identity (c)'s right side.
pub const C_CROSSCHECK_TOL: f64 = 1e-3;

/// The six polynomial vector fields phi(y), y = x - x0, used by the identity
/// catalog. Each carries its own analytic Jacobian, so divergence and the
/// curvature contraction are evaluated without differencing.
#[derive(Clone, Debug, PartialEq)]
pub enum PhiField {
    /// phi = V, constant.
    Constant(Vec<f64>),
    /// phi = y.
    Radial,
    /// phi = |y|^2 y.
    RadialCubed,
    /// phi = |y|^2 V.
    ScaledVector(Vec<f64>),
    /// phi = <V, y> y.
    ProjectedRadial(Vec<f64>),
    /// phi = <V, y> V.
    ProjectedVector(Vec<f64>),
}

impl PhiField {
    pub fn name(&self) -> &'static str {
        match self {
            PhiField::Constant(_) => "phi = V",
            PhiField::Radial => "phi = y",
            PhiField::RadialCubed => "phi = |y|^2 y",
            PhiField::ScaledVector(_) => "phi = |y|^2 V",
            PhiField::ProjectedRadial(_) => "phi = <V,y> y",
            PhiField::ProjectedVector(_) => "phi = <V,y> V",
        }
    }

    pub fn vector(&self) -> Option<&[f64]> {
        match self {
            PhiField::Constant(v)
            | PhiField::ScaledVector(v)
            | PhiField::ProjectedRadial(v)
            | PhiField::ProjectedVector(v) => Some(v),
            _ => None,
        }
    }

    /// The full catalog for one auxiliary vector V.
    pub fn catalog(v: &[f64]) -> Vec<PhiField> {
        vec![
            PhiField::Constant(v.to_vec()),
            PhiField::Radial,
            PhiField::RadialCubed,
            PhiField::ScaledVector(v.to_vec()),
            PhiField::ProjectedRadial(v.to_vec()),
            PhiField::ProjectedVector(v.to_vec()),
        ]
    }

    fn validate(&self, n: usize) -> Result<()> {
        if let Some(v) = self.vector() {
            if v.len() != n {
                return Err(Error::InvalidArgument {
                    reason: format!("phi vector has {} components, grid dimension is {n}", v.len()),
                });
            }
            if v.iter().map(|c| c * c).sum::<f64>() == 0.0 {
                return Err(Error::InvalidArgument { reason: "phi vector is zero".into() });
            }
        }
        Ok(())
    }

    /// phi(y) written into `out` (length n).
    pub fn eval(&self, y: &[f64], out: &mut [f64]) {
        let n = y.len();
        let s: f64 = y.iter().map(|c| c * c).sum();
        match self {
            PhiField::Constant(v) => out[..n].copy_from_slice(&v[..n]),
            PhiField::Radial => out[..n].copy_from_slice(y),
            PhiField::RadialCubed => {
                for k in 0..n {
                    out[k] = s * y[k];
                }
            }
            PhiField::ScaledVector(v) => {
                for k in 0..n {
                    out[k] = s * v[k];
                }
            }
            PhiField::ProjectedRadial(v) => {
                let vy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
                for k in 0..n {
                    out[k] = vy * y[k];
                }
            }
            PhiField::ProjectedVector(v) => {
                let vy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
                for k in 0..n {
                    out[k] = vy * v[k];
                }
            }
        }
    }

    /// Jacobian J[i * n + p] = d phi^p / d y^i, written into `out` (length n^2).
    pub fn jacobian(&self, y: &[f64], out: &mut [f64]) {
        let n = y.len();
        let s: f64 = y.iter().map(|c| c * c).sum();
        out[..n * n].fill(0.0);
        match self {
            PhiField::Constant(_) => {}
            PhiField::Radial => {
                for k in 0..n {
                    out[k * n + k] = 1.0;
                }
            }
            PhiField::RadialCubed => {
                for i in 0..n {
                    for p in 0..n {
                        out[i * n + p] = 2.0 * y[i] * y[p];
                    }
                    out[i * n + i] += s;
                }
            }
            PhiField::ScaledVector(v) => {
                for i in 0..n {
                    for p in 0..n {
                        out[i * n + p] = 2.0 * y[i] * v[p];
                    }
                }
            }
            PhiField::ProjectedRadial(v) => {
                let vy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    for p in 0..n {
                        out[i * n + p] = v[i] * y[p];
                    }
                    out[i * n + i] += vy;
                }
            }
            PhiField::ProjectedVector(v) => {
                for i in 0..n {
                    for p in 0..n {
                        out[i * n + p] = v[i] * v[p];
                    }
                }
            }
        }
    }

    pub fn divergence(&self, y: &[f64]) -> f64 {
        let n = y.len();
        let mut jac = [0.0f64; MAX_N * MAX_N];
        self.jacobian(y, &mut jac[..n * n]);
        (0..n).map(|k| jac[k * n + k]).sum()
    }
}

/// One checked equality. `pass` holds exactly when
/// `relative_gap <= tolerance`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Soliton-residual correction term where applicable; the checked
    /// equality is lhs = rhs + residual_term for the generalized identity
    /// and lhs = rhs for the soliton-specialized ones.
    pub residual_term: f64,
    pub relative_gap: f64,
    pub pass: bool,
    pub tolerance: f64,
}

impl IdentityReport {
    fn new(name: &str, lhs: f64, rhs: f64, residual_term: f64, gap: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            residual_term,
            relative_gap: gap,
            pass: gap <= tol,
            tolerance: tol,
        }
    }
}

fn relative_gap(defect: f64, scales: &[f64], floor: f64) -> f64 {
    let denom = scales.iter().fold(floor, |acc, s| acc.max(s.abs()));
    if denom <= 0.0 {
        0.0
    } else {
        defect.abs() / denom
    }
}

/// Pointwise sum over components of the Frobenius pairing of two one-forms.
fn pointwise_inner_oneform(a: &GValuedOneForm, b: &GValuedOneForm) -> Vec<f64> {
    let n = a.grid().n();
    (0..a.grid().npoints())
        .map(|p| {
            (0..n).map(|j| crate::algebra::frob_inner_slices(a.comp(p, j), b.comp(p, j))).sum()
        })
        .collect()
}

/// Pointwise |F|^2 = sum_{i<j} <F_ij, F_ij>.
fn pointwise_norm_sq_twoform(f: &GValuedTwoForm) -> Vec<f64> {
    crate::fields::curvature_norm_sq_field(f)
}

struct IdentityContext {
    quad: WeightedQuadrature,
    nsq: Vec<f64>,
    /// i_y F with y = x - x0.
    x_form: GValuedOneForm,
    s_form: GValuedOneForm,
    mass: f64,
}

impl IdentityContext {
    fn new(a: &ConnectionField, center: &Center) -> Result<Self> {
        let quad = WeightedQuadrature::new(*a.grid(), center)?;
        let f = curvature(a);
        let nsq = pointwise_norm_sq_twoform(&f);
        let x_form = interior_product(&f, &center.x0);
        let s_form = soliton_residual(a, center)?;
        let mass = quad.integrate(&nsq);
        Ok(Self { quad, nsq, x_form, s_form, mass })
    }

    fn grid(&self) -> Grid {
        *self.quad.grid()
    }

    /// Weighted integral of a pointwise product fn(p, y, s) where y = x - x0
    /// and s = |y|^2.
    fn moment<Fv: Fn(usize, &[f64], f64) -> f64 + Sync>(&self, value: Fv) -> f64 {
        let grid = self.grid();
        let n = grid.n();
        let x0 = &self.quad.center().x0;
        let w = self.quad.weights();
        tree_sum_indexed(grid.npoints(), |p| {
            let mut xs = [0.0f64; MAX_N];
            grid.point(p, &mut xs);
            let mut y = [0.0f64; MAX_N];
            let mut s = 0.0;
            for k in 0..n {
                y[k] = xs[k] - x0[k];
                s += y[k] * y[k];
            }
            w[p] * value(p, &y[..n], s)
        })
    }
}

/// Evaluates the pre-soliton identity for one catalog field: the moment on
/// the left, the two-term divergence side, and the residual correction.
/// Holds for arbitrary smooth connections whose curvature is resolved and
/// Gaussian-suppressed inside the box.
pub fn generalized_identity(
    a: &ConnectionField,
    center: &Center,
    phi: &PhiField,
) -> Result<IdentityReport> {
    center.validate_for(a.grid())?;
    phi.validate(a.grid().n())?;
    let ctx = IdentityContext::new(a, center)?;
    let n = ctx.grid().n();
    let t0 = center.t0;

    // base one-form for i_phi F and the T2 contraction: every catalog field
    // contracts through i_y F, i_V F, or both
    let w_form = phi.vector().map(|v| interior_product_const(&curvature(a), v));
    let mut xx = Vec::new();
    let mut ww = Vec::new();
    let mut xw = Vec::new();
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    match phi {
        PhiField::Constant(_) => {
            ws = pointwise_inner_oneform(w_form.as_ref().unwrap(), &ctx.s_form);
        }
        PhiField::Radial => {
            xs = pointwise_inner_oneform(&ctx.x_form, &ctx.s_form);
        }
        PhiField::RadialCubed => {
            xx = pointwise_inner_oneform(&ctx.x_form, &ctx.x_form);
            xs = pointwise_inner_oneform(&ctx.x_form, &ctx.s_form);
        }
        PhiField::ScaledVector(_) => {
            let wf = w_form.as_ref().unwrap();
            xw = pointwise_inner_oneform(&ctx.x_form, wf);
            ws = pointwise_inner_oneform(wf, &ctx.s_form);
        }
        PhiField::ProjectedRadial(_) => {
            let wf = w_form.as_ref().unwrap();
            xw = pointwise_inner_oneform(&ctx.x_form, wf);
            xs = pointwise_inner_oneform(&ctx.x_form, &ctx.s_form);
        }
        PhiField::ProjectedVector(_) => {
            let wf = w_form.as_ref().unwrap();
            ww = pointwise_inner_oneform(wf, wf);
            ws = pointwise_inner_oneform(wf, &ctx.s_form);
        }
    }

    let dot_v = |y: &[f64]| -> f64 {
        phi.vector().map(|v| v.iter().zip(y).map(|(a, b)| a * b).sum()).unwrap_or(0.0)
    };

    let lhs = ctx.moment(|p, y, s| {
        let scal = match phi {
            PhiField::Constant(_) => dot_v(y),
            PhiField::Radial => s,
            PhiField::RadialCubed => s * s,
            PhiField::ScaledVector(_) => s * dot_v(y),
            PhiField::ProjectedRadial(_) => dot_v(y) * s,
            PhiField::ProjectedVector(_) => {
                let vy = dot_v(y);
                vy * vy
            }
        };
        scal * ctx.nsq[p]
    });

    // rhs = int [2 t0 div(phi) |F|^2 - 4 t0 T2] G with the Jacobian
    // contraction T2 = (d_i phi^p) <F_pj, F_ij> reduced per catalog entry
    let rhs = ctx.moment(|p, y, s| {
        let (div, t2) = match phi {
            PhiField::Constant(_) => (0.0, 0.0),
            PhiField::Radial => (n as f64, 2.0 * ctx.nsq[p]),
            PhiField::RadialCubed => ((n as f64 + 2.0) * s, 2.0 * xx[p] + 2.0 * s * ctx.nsq[p]),
            PhiField::ScaledVector(_) => (2.0 * dot_v(y), 2.0 * xw[p]),
            PhiField::ProjectedRadial(_) => {
                let vy = dot_v(y);
                ((n as f64 + 1.0) * vy, xw[p] + 2.0 * vy * ctx.nsq[p])
            }
            PhiField::ProjectedVector(_) => {
                let v = phi.vector().unwrap();
                (v.iter().map(|c| c * c).sum::<f64>(), ww[p])
            }
        };
        2.0 * t0 * div * ctx.nsq[p] - 4.0 * t0 * t2
    });

    // residual correction: -4 t0 int <i_phi F, S> G
    let residual_term = -4.0
        * t0
        * ctx.moment(|p, y, s| match phi {
            PhiField::Constant(_) => ws[p],
            PhiField::Radial => xs[p],
            PhiField::RadialCubed => s * xs[p],
            PhiField::ScaledVector(_) => s * ws[p],
            PhiField::ProjectedRadial(_) => dot_v(y) * xs[p],
            PhiField::ProjectedVector(_) => dot_v(y) * ws[p],
        });

    // odd moments cancel to near zero; the honest yardstick for the defect
    // is the non-cancelling absolute moment of the same integrand
    let abs_lhs = ctx.moment(|p, y, s| {
        let scal = match phi {
            PhiField::Constant(_) => dot_v(y),
            PhiField::Radial => s,
            PhiField::RadialCubed => s * s,
            PhiField::ScaledVector(_) => s * dot_v(y),
            PhiField::ProjectedRadial(_) => dot_v(y) * s,
            PhiField::ProjectedVector(_) => {
                let vy = dot_v(y);
                vy * vy
            }
        };
        scal.abs() * ctx.nsq[p]
    });
    let hwsq = (n as f64) * ctx.grid().half_width().powi(2);
    let floor = 1e-9 * (1.0 + hwsq * hwsq) * ctx.mass;
    let gap =
        relative_gap(lhs - rhs - residual_term, &[lhs, rhs, residual_term, abs_lhs], floor);
    Ok(IdentityReport::new(phi.name(), lhs, rhs, residual_term, gap, GENERALIZED_TOL))
}

fn soliton_gate(ctx: &IdentityContext, gate_rel: f64) -> Result<()> {
    let res = ctx.quad.norm_sq_oneform(&ctx.s_form)?.sqrt();
    let fnorm = ctx.mass.max(0.0).sqrt();
    if res > gate_rel * fnorm {
        return Err(Error::NotNearSoliton { residual: res, gate: gate_rel * fnorm, factor: gate_rel });
    }
    Ok(())
}

/// The five moment identities at a (near-)soliton, plus a sixth report
/// checking that identity (c)'s right side evaluates identically via the
/// paper-constant form and via nesting the generalized identity. Each
/// report's `residual_term` carries the measured residual correction as a
/// diagnostic; the pass criterion is the plain identity.
pub fn identity_a_through_e(
    a: &ConnectionField,
    center: &Center,
    v: &[f64],
) -> Result<Vec<IdentityReport>> {
    center.validate_for(a.grid())?;
    let n = a.grid().n();
    if v.len() != n {
        return Err(Error::InvalidArgument {
            reason: format!("vector V has {} components, grid dimension is {n}", v.len()),
        });
    }
    let vv: f64 = v.iter().map(|c| c * c).sum();
    if vv == 0.0 {
        return Err(Error::InvalidArgument { reason: "vector V is zero".into() });
    }
    let ctx = IdentityContext::new(a, center)?;
    soliton_gate(&ctx, SOLITON_GATE_REL)?;

    let t0 = center.t0;
    let nf = n as f64;
    let mass = ctx.mass;
    let mass_floor = mass.max(1e-300);
    let f = curvature(a);
    let w_form = interior_product_const(&f, v);
    let j_form = crate::fields::codifferential(a, &f)?;

    let xx = pointwise_inner_oneform(&ctx.x_form, &ctx.x_form);
    let ww = pointwise_inner_oneform(&w_form, &w_form);
    let xs = pointwise_inner_oneform(&ctx.x_form, &ctx.s_form);
    let ws = pointwise_inner_oneform(&w_form, &ctx.s_form);
    let jj = pointwise_inner_oneform(&j_form, &j_form);

    let mut reports = Vec::with_capacity(6);

    // (a): int |y|^2 |F|^2 G = 2 (n - 4) t0 * mass
    let lhs_a = ctx.moment(|p, _, s| s * ctx.nsq[p]);
    let rhs_a = 2.0 * (nf - 4.0) * t0 * mass;
    let corr_a = -4.0 * t0 * ctx.moment(|p, _, _| xs[p]);
    let gap_a = relative_gap(lhs_a - rhs_a, &[lhs_a, rhs_a], 1e-12 * mass_floor);
    reports.push(IdentityReport::new("(a) second moment", lhs_a, rhs_a, corr_a, gap_a, MOMENT_TOL));

    // (b): int y_k |F|^2 G = 0 for each axis; gap is the worst component
    // relative to the curvature mass
    let mut lhs_b = 0.0f64;
    let mut corr_b = 0.0f64;
    for k in 0..n {
        let mk = ctx.moment(|p, y, _| y[k] * ctx.nsq[p]);
        let ek: Vec<f64> = (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        let wk = interior_product_const(&f, &ek);
        let wks = pointwise_inner_oneform(&wk, &ctx.s_form);
        let ck = -4.0 * t0 * ctx.moment(|p, _, _| wks[p]);
        if mk.abs() > lhs_b.abs() {
            lhs_b = mk;
        }
        if ck.abs() > corr_b.abs() {
            corr_b = ck;
        }
    }
    let gap_b = lhs_b.abs() / mass_floor;
    reports.push(IdentityReport::new("(b) centroid", lhs_b, 0.0, corr_b, gap_b, CENTROID_TOL));

    // (c): int |y|^4 |F|^2 G = 4 (n-2)(n-4) t0^2 mass - 32 t0^3 int |J|^2 G
    let lhs_c = ctx.moment(|p, _, s| s * s * ctx.nsq[p]);
    let jmass = ctx.quad.integrate(&jj);
    let rhs_c = 4.0 * (nf - 2.0) * (nf - 4.0) * t0 * t0 * mass - 32.0 * t0.powi(3) * jmass;
    let corr_c = -4.0 * t0 * ctx.moment(|p, _, s| s * xs[p]);
    let floor_c = 1e-12 * mass_floor * (1.0 + t0 * t0);
    let gap_c = relative_gap(lhs_c - rhs_c, &[lhs_c, rhs_c], floor_c);
    reports.push(IdentityReport::new("(c) fourth moment", lhs_c, rhs_c, corr_c, gap_c, MOMENT_TOL));

    // (c) cross-check: the same right side by nesting the generalized
    // identity, int [2 (n-2) t0 s |F|^2 - 8 t0 |i_y F|^2] G
    let nested_c = ctx.moment(|p, _, s| 2.0 * (nf - 2.0) * t0 * s * ctx.nsq[p] - 8.0 * t0 * xx[p]);
    let gap_cc = relative_gap(nested_c - rhs_c, &[nested_c, rhs_c], floor_c);
    reports.push(IdentityReport::new(
        "(c) two-evaluation agreement",
        nested_c,
        rhs_c,
        0.0,
        gap_cc,
        C_CROSSCHECK_TOL,
    ));

    // (d): int |y|^2 <V, y> |F|^2 G = 0, normalized odd-moment style
    let lhs_d = ctx.moment(|p, y, s| {
        let vy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
        s * vy * ctx.nsq[p]
    });
    let corr_d = -4.0 * t0 * ctx.moment(|p, _, s| s * ws[p]);
    let d_scale = (1.0 + 2.0 * (nf - 4.0).abs() * t0) * (2.0 * t0).sqrt();
    let gap_d = lhs_d.abs() / (vv.sqrt() * d_scale * mass_floor);
    reports.push(IdentityReport::new("(d) cubic moment", lhs_d, 0.0, corr_d, gap_d, CENTROID_TOL));

    // (e): int <V,y>^2 |F|^2 G = 2 t0 |V|^2 mass - 4 t0 int |i_V F|^2 G
    let lhs_e = ctx.moment(|p, y, _| {
        let vy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
        vy * vy * ctx.nsq[p]
    });
    let rhs_e = 2.0 * t0 * vv * mass - 4.0 * t0 * ctx.quad.integrate(&ww);
    let corr_e = -4.0
        * t0
        * ctx.moment(|p, y, _| {
            let vy: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
            vy * ws[p]
        });
    let gap_e = relative_gap(lhs_e - rhs_e, &[lhs_e, rhs_e], 1e-12 * vv * t0 * mass_floor);
    reports.push(IdentityReport::new("(e) V-projection", lhs_e, rhs_e, corr_e, gap_e, MOMENT_TOL));

    Ok(reports)
}

/// Outcome of the pointwise curvature-gap comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapReport {
    pub sup_f_sq: f64,
    /// n / (2 (n - 1)).
    pub threshold: f64,
    pub below_threshold: bool,
    pub near_soliton: bool,
    /// Set only when the field passed the soliton gate and sits below the
    /// threshold: the theorem then demands flatness.
    pub flat_consistent: Option<bool>,
    pub flatness_tol: f64,
    /// A gate-passing field below the threshold that is not flat signals
    /// discretization error or a residual too large to trust.
    pub inconsistency: bool,
}

/// Compares sup |F|^2 against the flatness threshold n / (2 (n - 1)). The
/// gate is a parameter so negative controls can force the consistency branch.
pub fn gap_check(
    a: &ConnectionField,
    center: &Center,
    flatness_tol: f64,
    gate_rel: f64,
) -> Result<GapReport> {
    center.validate_for(a.grid())?;
    let n = a.grid().n() as f64;
    let threshold = n / (2.0 * (n - 1.0));
    let ctx = IdentityContext::new(a, center)?;
    let sup_f_sq = ctx.nsq.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let below = sup_f_sq < threshold;
    let near = soliton_gate(&ctx, gate_rel).is_ok();

    let (flat_consistent, inconsistency) = if near && below {
        let ok = sup_f_sq.sqrt() <= flatness_tol;
        (Some(ok), !ok)
    } else {
        (None, false)
    };
    Ok(GapReport {
        sup_f_sq,
        threshold,
        below_threshold: below,
        near_soliton: near,
        flat_consistent,
        flatness_tol,
        inconsistency,
    })
}

/// One solver run inside the dimension-obstruction sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstructionRun {
    pub n: usize,
    pub seed_name: String,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub curvature_mass: f64,
    pub flat_within_tolerance: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub mass_tolerance: f64,
    pub runs: Vec<ObstructionRun>,
    pub low_dim_converged: usize,
    /// True when every converged run with n <= 4 lands within the mass
    /// tolerance. Dimensions above 4 are reported but never asserted.
    pub all_low_dim_flat: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObstructionConfig {
    pub m: usize,
    pub half_width: f64,
    pub rank: usize,
    pub seeds_per_dim: usize,
    pub base_seed: u64,
    pub amplitude: f64,
    pub mass_tolerance: f64,
    /// Per-run solver target: target_rel times the seed residual.
    pub target_rel: f64,
    pub max_outer: usize,
    pub cg_max_iters: usize,
    pub mode: JacobianMode,
}

impl Default for ObstructionConfig {
    fn default() -> Self {
        Self {
            m: 11,
            half_width: 4.0,
            rank: 3,
            seeds_per_dim: 2,
            base_seed: 1,
            amplitude: 0.05,
            mass_tolerance: 1e-4,
            target_rel: 1e-2,
            max_outer: 12,
            cg_max_iters: 20,
            mode: JacobianMode::Symmetrized,
        }
    }
}

/// Runs the soliton finder from a small seed catalog in each requested
/// dimension. No shrinking soliton exists for n <= 4, so every converged
/// low-dimensional run must come out flat; n >= 5 runs are informational.
pub fn dimension_obstruction_experiment(
    dims: &[usize],
    cfg: &ObstructionConfig,
) -> Result<ObstructionReport> {
    let mut runs = Vec::new();
    let mut all_flat = true;
    let mut low_dim_converged = 0usize;

    for (di, &n) in dims.iter().enumerate() {
        let grid = Grid::new(n, cfg.m, cfg.half_width)?;
        for s in 0..cfg.seeds_per_dim {
            let seed_id = cfg.base_seed + (di * cfg.seeds_per_dim + s) as u64;
            let (seed, seed_name) = build_obstruction_seed(grid, cfg, s, seed_id)?;

            let center = Center::origin(n, 1.0);
            let initial = residual_energy(&seed, &center)?.sqrt();
            let mut solver = SolverConfig::canonical(n);
            solver.max_outer = cfg.max_outer;
            solver.cg_max_iters = cfg.cg_max_iters;
            solver.mode = cfg.mode;
            solver.target_residual = (cfg.target_rel * initial).max(1e-12);

            let (_, report) = find_soliton(&seed, &solver)?;
            let flat_ok = report.curvature_mass <= cfg.mass_tolerance;
            if n <= 4 && report.converged {
                low_dim_converged += 1;
                all_flat &= flat_ok;
            }
            runs.push(ObstructionRun {
                n,
                seed_name,
                converged: report.converged,
                initial_residual: initial,
                final_residual: report.final_residual,
                curvature_mass: report.curvature_mass,
                flat_within_tolerance: flat_ok,
            });
        }
    }
    Ok(ObstructionReport {
        mass_tolerance: cfg.mass_tolerance,
        runs,
        low_dim_converged,
        all_low_dim_flat: all_flat,
    })
}

fn build_obstruction_seed(
    grid: Grid,
    cfg: &ObstructionConfig,
    s: usize,
    seed_id: u64,
) -> Result<(ConnectionField, String)> {
    let n = grid.n();
    let kind = s % 3;
    if kind == 2 && cfg.rank >= n {
        let amp = cfg.amplitude;
        let a = so_rotational(grid, cfg.rank, move |rho| amp * (-rho / 4.0).exp())?;
        return Ok((a, "rotational".to_string()));
    }
    let mut params = if kind == 1 {
        RandomFieldParams::gentle(&grid)
    } else {
        RandomFieldParams::compact(&grid)
    };
    params.amplitude = cfg.amplitude;
    let name = if kind == 1 { "random-gentle" } else { "random-compact" };
    Ok((random_smooth(grid, cfg.rank, seed_id, &params), format!("{name}-{seed_id}")))
}

/// One sample of the center-rescaling path comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathSample {
    pub s: f64,
    /// Centered difference of the functional along the path.
    pub numeric: f64,
    /// -s int |(T-1) s X + t_s i_y F|^2 G_s with X = i_{x - x_s} F.
    pub closed: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathMonotonicityReport {
    pub samples: Vec<PathSample>,
    pub max_numeric: f64,
    pub max_closed: f64,
    pub max_rel_gap: f64,
    /// Closed form nonpositive at every sample; structural, since each value
    /// is -s times a squared norm.
    pub closed_nonpositive: bool,
    /// Numeric derivative <= +1e-6 at every sample.
    pub numeric_nonpositive: bool,
    /// Mutual relative agreement within 5e-2 at every sample.
    pub agree: bool,
}

const PATH_MONOTONE_TOL: f64 = 1e-6;
const PATH_AGREE_TOL: f64 = 5e-2;

/// Checks dg/ds <= 0 for g(s) = F at the moving center (s y, 1 + (T-1) s^2),
/// comparing a centered difference of the functional against the closed-form
/// derivative that is valid at solitons centered at (0, 1). `gate_rel` is the
/// near-soliton gate; pass infinity to probe the machinery on generic fields.
pub fn path_monotonicity_check(
    a: &ConnectionField,
    y: &[f64],
    t_cap: f64,
    nsamples: usize,
    gate_rel: f64,
) -> Result<PathMonotonicityReport> {
    let grid = *a.grid();
    let n = grid.n();
    if y.len() != n {
        return Err(Error::InvalidArgument {
            reason: format!("path vector has {} components, grid dimension is {n}", y.len()),
        });
    }
    if !(t_cap > 0.0) {
        return Err(Error::InvalidArgument { reason: format!("T = {t_cap} must be positive") });
    }
    if nsamples == 0 {
        return Err(Error::InvalidArgument { reason: "need at least one path sample".into() });
    }
    let base = Center::origin(n, 1.0);
    base.validate_for(&grid)?;
    let ctx = IdentityContext::new(a, &base)?;
    soliton_gate(&ctx, gate_rel)?;

    let f = curvature(a);
    let w_base = interior_product_const(&f, y);
    let scale0 = f_functional(a, &base)?.abs();
    let floor = 1e-10 * (1.0 + scale0);

    let center_at = |s: f64| -> Result<Center> {
        let x0: Vec<f64> = y.iter().map(|c| c * s).collect();
        Center::new(x0, 1.0 + (t_cap - 1.0) * s * s)
    };

    let mut samples = Vec::with_capacity(nsamples);
    let mut max_numeric = f64::NEG_INFINITY;
    let mut max_closed = f64::NEG_INFINITY;
    let mut max_rel_gap = 0.0f64;
    for i in 1..=nsamples {
        let s = i as f64 / nsamples as f64;
        let ds = 0.05 / nsamples as f64;
        let g_plus = f_functional(a, &center_at(s + ds)?)?;
        let g_minus = f_functional(a, &center_at(s - ds)?)?;
        let numeric = (g_plus - g_minus) / (2.0 * ds);

        let c_s = center_at(s)?;
        let quad_s = WeightedQuadrature::new(grid, &c_s)?;
        let mut integrand = interior_product(&f, &c_s.x0);
        integrand.scale((t_cap - 1.0) * s);
        integrand.axpy(c_s.t0, &w_base)?;
        let closed = -s * quad_s.norm_sq_oneform(&integrand)?;

        max_numeric = max_numeric.max(numeric);
        max_closed = max_closed.max(closed);
        max_rel_gap =
            max_rel_gap.max(relative_gap(numeric - closed, &[numeric, closed], floor));
        samples.push(PathSample { s, numeric, closed });
    }

    Ok(PathMonotonicityReport {
        samples,
        max_numeric,
        max_closed,
        max_rel_gap,
        closed_nonpositive: max_closed <= 0.0,
        numeric_nonpositive: max_numeric <= PATH_MONOTONE_TOL,
        agree: max_rel_gap <= PATH_AGREE_TOL,
    })
}

/// Structural consequences of a descended direction, checked on input
/// expected to be in a gauge adapted to V (radial gauge or constructed).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplittingReport {
    /// sup |V^k A_k| relative to sup |A|.
    pub v_component: f64,
    /// sup |d_V A| * half_width relative to sup |A|.
    pub v_constancy: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DescentReport {
    /// Row-major n x n Gram matrix of <i_{e_k} F, i_{e_l} F>_G.
    pub gram: Vec<f64>,
    /// Ascending eigenvalues of the Gram matrix.
    pub eigenvalues: Vec<f64>,
    pub descends: bool,
    /// Gram numerically zero (flat field): every direction descends vacuously.
    pub vacuous: bool,
    /// Unit eigenvectors for eigenvalues at or below the descent threshold.
    pub directions: Vec<Vec<f64>>,
    pub splitting: Option<SplittingReport>,
}

/// Looks for constant directions V with i_V F = 0 through the spectrum of
/// the interior-product Gram matrix; descends iff the smallest eigenvalue is
/// at most tol * trace / n. When a direction is found, the splitting
/// consequence (vanishing V-component, constancy along V) is measured on the
/// field as given.
pub fn descent_check(a: &ConnectionField, center: &Center, tol: f64) -> Result<DescentReport> {
    center.validate_for(a.grid())?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument { reason: format!("tol {tol} outside (0, 1)") });
    }
    let grid = *a.grid();
    let n = grid.n();
    let quad = WeightedQuadrature::new(grid, center)?;
    let f = curvature(a);
    let w = quad.weights();

    // Gram_kl = sum_j <F_kj, F_lj> integrated; F_kj read off the stored
    // strict-upper-triangle components with antisymmetry signs
    let mut gram = vec![0.0f64; n * n];
    for k in 0..n {
        for l in k..n {
            let val = tree_sum_indexed(grid.npoints(), |p| {
                let mut acc = 0.0;
                for j in 0..n {
                    if j == k || j == l {
                        continue;
                    }
                    let (ka, kb, ks) = if k < j { (k, j, 1.0) } else { (j, k, -1.0) };
                    let (la, lb, ls) = if l < j { (l, j, 1.0) } else { (j, l, -1.0) };
                    acc += ks
                        * ls
                        * crate::algebra::frob_inner_slices(
                            f.comp(p, grid.pair_index(ka, kb)),
                            f.comp(p, grid.pair_index(la, lb)),
                        );
                }
                w[p] * acc
            });
            gram[k * n + l] = val;
            gram[l * n + k] = val;
        }
    }

    let trace: f64 = (0..n).map(|k| gram[k * n + k]).sum();
    let mass = quad.integrate(&pointwise_norm_sq_twoform(&f));
    let vacuous = trace <= 1e-14 * (1.0 + mass * center.t0 * n as f64);

    let gm = DMatrix::from_row_slice(n, n, &gram);
    let eig = gm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let threshold = tol * trace / n as f64;
    let mut directions = Vec::new();
    if !vacuous {
        for &i in &order {
            if eig.eigenvalues[i] <= threshold {
                let col = eig.eigenvectors.column(i);
                let mut v: Vec<f64> = col.iter().copied().collect();
                // canonical sign: largest-magnitude entry positive
                let lead = v
                    .iter()
                    .enumerate()
                    .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                if v[lead] < 0.0 {
                    for c in &mut v {
                        *c = -*c;
                    }
                }
                directions.push(v);
            }
        }
    }
    let descends = vacuous || !directions.is_empty();

    let splitting = directions.first().map(|v| splitting_probe(a, v)).transpose()?;

    Ok(DescentReport { gram, eigenvalues, descends, vacuous, directions, splitting })
}

fn splitting_probe(a: &ConnectionField, v: &[f64]) -> Result<SplittingReport> {
    let grid = *a.grid();
    let n = grid.n();
    let r = a.rank();
    let rr = r * r;
    let sup_a = a.sup_entry_norm().max(1e-300);

    let mut v_component = 0.0f64;
    let mut buf = vec![0.0f64; rr];
    for p in 0..grid.npoints() {
        buf.fill(0.0);
        for k in 0..n {
            crate::algebra::axpy_slices(v[k], a.comp(p, k), &mut buf);
        }
        for e in &buf {
            v_component = v_component.max(e.abs());
        }
    }

    // raw directional derivative sum_k V^k d_k A, one axis at a time
    let table = grid.deriv_table();
    let mut deriv = ConnectionField::zero(grid, r);
    let mut mi = [0usize; MAX_N];
    for axis in 0..n {
        if v[axis] == 0.0 {
            continue;
        }
        let stride = grid.stride(axis);
        for p in 0..grid.npoints() {
            grid.decode(p, &mut mi);
            for j in 0..n {
                for &(off, c) in &table.taps[mi[axis]] {
                    let q = (p as isize + off * stride as isize) as usize;
                    crate::algebra::axpy_slices(v[axis] * c, a.comp(q, j), deriv.comp_mut(p, j));
                }
            }
        }
    }
    let v_constancy = deriv.sup_entry_norm() * grid.half_width() / sup_a;
    let v_component = v_component / sup_a;
    let tol = 1e-8;
    Ok(SplittingReport { v_component, v_constancy, pass: v_component <= tol && v_constancy <= tol })
}

/// Entropy response to a one-form perturbation, fitted as
/// e(eps) - e(0) = b eps + c eps^2 over symmetric samples.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyPerturbationReport {
    pub e0: f64,
    /// (epsilon, entropy) pairs, both signs of each requested epsilon.
    pub samples: Vec<(f64, f64)>,
    pub linear_coeff: f64,
    pub quadratic_coeff: f64,
    /// -t0 |lambda| |theta|_G^2 when a negative eigenvalue is supplied.
    pub predicted_quadratic: Option<f64>,
    pub prediction_rel_gap: Option<f64>,
    pub second_order_decrease: bool,
}

/// Measures entropy(A + eps theta) on a symmetric epsilon grid and fits the
/// quadratic response. For an F-unstable near-soliton and theta a negative
/// eigenfield of eigenvalue lambda, the fitted quadratic coefficient should
/// track -t0 |lambda| |theta|_G^2; for stable fields it must not be
/// meaningfully negative.
pub fn entropy_perturbation_experiment(
    a: &ConnectionField,
    center: &Center,
    theta: &GValuedOneForm,
    lambda_neg: Option<f64>,
    epsilons: &[f64],
    ecfg: &EntropyConfig,
) -> Result<EntropyPerturbationReport> {
    center.validate_for(a.grid())?;
    if epsilons.is_empty() || epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument {
            reason: "epsilons must be non-empty and positive".into(),
        });
    }
    let quad = WeightedQuadrature::new(*a.grid(), center)?;
    let theta_sq = quad.norm_sq_oneform(theta)?;

    let e0 = entropy(a, ecfg)?.value;
    let mut samples = Vec::with_capacity(2 * epsilons.len());
    for &eps in epsilons {
        for sign in [-1.0, 1.0] {
            let mut cand = a.clone();
            cand.add_scaled_oneform(sign * eps, theta)?;
            let val = entropy(&cand, ecfg)?.value;
            if !val.is_finite() {
                return Err(Error::NotConverged {
                    what: format!("entropy diverged at eps = {}", sign * eps),
                });
            }
            samples.push((sign * eps, val));
        }
    }

    // least squares for (b, c) in d = b eps + c eps^2
    let (mut s2, mut s3, mut s4, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(eps, val) in &samples {
        let d = val - e0;
        s2 += eps * eps;
        s3 += eps * eps * eps;
        s4 += eps * eps * eps * eps;
        r1 += eps * d;
        r2 += eps * eps * d;
    }
    let det = s2 * s4 - s3 * s3;
    if det.abs() <= f64::EPSILON * (s2 * s4).abs().max(1.0) {
        return Err(Error::SingularGram { what: "entropy fit normal equations".into() });
    }
    let b = (s4 * r1 - s3 * r2) / det;
    let c = (s2 * r2 - s3 * r1) / det;

    let predicted = lambda_neg.map(|l| -center.t0 * l.abs() * theta_sq);
    let gap = predicted.map(|p| (c - p).abs() / p.abs().max(1e-300));

    Ok(EntropyPerturbationReport {
        e0,
        samples,
        linear_coeff: b,
        quadratic_coeff: c,
        predicted_quadratic: predicted,
        prediction_rel_gap: gap,
        second_order_decrease: c < 0.0,
    })
}
