//! Soliton search as a weighted least-squares problem.
//!
//! The residual S_j = nabla^p F_pj - (x - x0)^p F_pj / (2 t0) vanishes exactly
//! at a shrinking soliton, so near-solitons are found by driving the residual
//! energy E(A) = |S(A)|_G^2 toward zero with a damped Gauss-Newton iteration.
//! E is the right objective: the weighted curvature functional itself is
//! minimized by flat connections, while solitons generally sit at saddles, so
//! descending the functional would walk straight past them.
//!
//! The linearization of S at A is (1/t0) L_A with L the raw stability
//! operator, so Jacobian products are available three ways: centered
//! directional differences of the nonlinear residual (default), a Richardson
//! extrapolation of those, or the exactly G-self-adjoint assembly of L. The
//! normal equations use the Jacobian as its own G-adjoint; that is exact in
//! symmetrized mode and exact up to discretization order otherwise, and the
//! Armijo check on the true energy guards whatever defect remains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Center, ConnectionField, GValuedOneForm, Grid};
use crate::functionals::f_functional;
use crate::quadrature::WeightedQuadrature;
use crate::variations::{soliton_residual, StabilityOperator};

/// Sufficient-decrease fraction for the Armijo backtracking test.
const ARMIJO_C: f64 = 1e-4;
/// Smallest line-search step before the direction is declared useless.
const MIN_STEP: f64 = 1e-6;
/// Relative energy decrease below which an outer iteration counts as a stall.
const STALL_DROP: f64 = 1e-10;
/// Consecutive stalls that end the solve as stagnated.
const STALL_LIMIT: usize = 5;

/// How Gauss-Newton applies the linearized residual to a direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JacobianMode {
    /// Centered directional difference of the nonlinear residual.
    FiniteDifference,
    /// Two-step Richardson extrapolation of the centered difference;
    /// quartic in the probe step instead of quadratic, at twice the cost.
    Richardson,
    /// The exactly G-self-adjoint stability operator scaled by -1/t0.
    /// Cheapest per product and makes the normal equations exactly
    /// symmetric, but differs from the true lattice Jacobian by the
    /// commutation defect of folding the Gaussian into the transpose.
    Symmetrized,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub center: Center,
    pub max_outer: usize,
    /// Inner CG stops when the normal-equation residual falls below
    /// cg_tol times its starting norm.
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Directional-difference step scale; the probe applied to a direction
    /// theta is fd_probe * (1 + rms(A)) / rms(theta).
    pub fd_probe: f64,
    /// Solve ends successfully once |S|_G reaches this value.
    pub target_residual: f64,
    pub mode: JacobianMode,
}

impl SolverConfig {
    /// Canonical setup centered at (0, 1) for an n-dimensional grid.
    pub fn canonical(n: usize) -> Self {
        Self {
            center: Center::origin(n, 1.0),
            max_outer: 30,
            cg_tol: 1e-4,
            cg_max_iters: 40,
            fd_probe: 1e-5,
            target_residual: 1e-8,
            mode: JacobianMode::FiniteDifference,
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        self.center.validate_for(grid)?;
        if !(self.target_residual > 0.0) {
            return Err(Error::InvalidArgument {
                reason: format!("target_residual {} must be positive", self.target_residual),
            });
        }
        if !(1e-7..=1e-3).contains(&self.fd_probe) {
            return Err(Error::InvalidArgument {
                reason: format!("fd_probe {} outside [1e-7, 1e-3]", self.fd_probe),
            });
        }
        if self.max_outer == 0 || self.cg_max_iters == 0 {
            return Err(Error::InvalidArgument {
                reason: "max_outer and cg_max_iters must be at least 1".into(),
            });
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::InvalidArgument {
                reason: format!("cg_tol {} outside (0, 1)", self.cg_tol),
            });
        }
        Ok(())
    }
}

/// Outcome of a solve. Residual entries are weighted norms |S|_G, and
/// `residual_history` holds the seed value followed by one entry per
/// accepted outer step, so it is non-increasing by construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub stagnated: bool,
    pub outer_iterations: usize,
    pub cg_iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    /// Weighted curvature mass of the returned field: integral of |F|^2 G.
    pub curvature_mass: f64,
    pub residual_history: Vec<f64>,
}

/// Weighted squared norm of the soliton residual.
pub fn residual_energy(a: &ConnectionField, center: &Center) -> Result<f64> {
    let quad = WeightedQuadrature::new(*a.grid(), center)?;
    quad.norm_sq_oneform(&soliton_residual(a, center)?)
}

fn rms(data: &[f64]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    (data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64).sqrt()
}

fn fd_difference(
    a: &ConnectionField,
    center: &Center,
    theta: &GValuedOneForm,
    eps: f64,
) -> Result<GValuedOneForm> {
    let mut shifted = a.clone();
    shifted.add_scaled_oneform(eps, theta)?;
    let mut out = soliton_residual(&shifted, center)?;
    shifted.clone_from(a);
    shifted.add_scaled_oneform(-eps, theta)?;
    out.axpy(-1.0, &soliton_residual(&shifted, center)?)?;
    out.scale(0.5 / eps);
    Ok(out)
}

/// Jacobian products of the residual at a frozen iterate.
pub struct ResidualJacobian<'a> {
    a: &'a ConnectionField,
    center: Center,
    mode: JacobianMode,
    step_scale: f64,
    sym: Option<StabilityOperator>,
}

impl<'a> ResidualJacobian<'a> {
    pub fn new(a: &'a ConnectionField, center: &Center, mode: JacobianMode, fd_probe: f64) -> Result<Self> {
        center.validate_for(a.grid())?;
        let sym = match mode {
            JacobianMode::Symmetrized => Some(StabilityOperator::new(a, center)?),
            _ => None,
        };
        // the 1 + rms(A) floor keeps the probe finite on (near-)flat iterates
        let step_scale = fd_probe * (1.0 + rms(a.data()));
        Ok(Self { a, center: center.clone(), mode, step_scale, sym })
    }

    pub fn apply(&self, theta: &GValuedOneForm) -> Result<GValuedOneForm> {
        match self.mode {
            JacobianMode::Symmetrized => {
                // StabilityOperator yields L theta; the residual linearization
                // is dS = L / t0.
                let mut out = self.sym.as_ref().unwrap().apply(theta)?;
                out.scale(1.0 / self.center.t0);
                Ok(out)
            }
            JacobianMode::FiniteDifference => {
                let eps = self.probe(theta);
                fd_difference(self.a, &self.center, theta, eps)
            }
            JacobianMode::Richardson => {
                let eps = self.probe(theta);
                let mut fine = fd_difference(self.a, &self.center, theta, 0.5 * eps)?;
                let coarse = fd_difference(self.a, &self.center, theta, eps)?;
                fine.scale(4.0 / 3.0);
                fine.axpy(-1.0 / 3.0, &coarse)?;
                Ok(fine)
            }
        }
    }

    fn probe(&self, theta: &GValuedOneForm) -> f64 {
        let tn = rms(theta.data());
        if tn > 0.0 {
            self.step_scale / tn
        } else {
            self.step_scale
        }
    }
}

/// CG on the normal equations J^T J delta = -J^T S in the G-inner product,
/// with the Jacobian standing in for its own adjoint.
fn gauss_newton_direction(
    jac: &ResidualJacobian,
    quad: &WeightedQuadrature,
    s: &GValuedOneForm,
    cfg: &SolverConfig,
    cg_spent: &mut usize,
) -> Result<GValuedOneForm> {
    let mut b = jac.apply(s)?;
    b.scale(-1.0);
    let b_norm_sq = quad.norm_sq_oneform(&b)?;
    let mut delta = GValuedOneForm::zero(*s.grid(), s.rank());
    if b_norm_sq == 0.0 {
        return Ok(delta);
    }
    let mut resid = b.clone();
    let mut dir = resid.clone();
    let mut rs = b_norm_sq;
    for _ in 0..cfg.cg_max_iters {
        if rs.sqrt() <= cfg.cg_tol * b_norm_sq.sqrt() {
            break;
        }
        let jd = jac.apply(&dir)?;
        let ndir = jac.apply(&jd)?;
        *cg_spent += 1;
        let alpha_den = quad.inner_oneform(&dir, &ndir)?;
        // loss of positivity means the self-adjoint approximation broke down
        if !alpha_den.is_finite() || alpha_den <= 0.0 {
            break;
        }
        let alpha = rs / alpha_den;
        delta.axpy(alpha, &dir)?;
        resid.axpy(-alpha, &ndir)?;
        let rs_next = quad.norm_sq_oneform(&resid)?;
        let beta = rs_next / rs;
        rs = rs_next;
        let mut next_dir = resid.clone();
        next_dir.axpy(beta, &dir)?;
        dir = next_dir;
    }
    Ok(delta)
}

/// Damped Gauss-Newton search for a near-soliton starting from `seed`.
///
/// Accepted steps strictly decrease the residual energy, so the returned
/// field never has a larger residual than the seed. Stagnation (relative
/// decrease below 1e-10 on five consecutive outer steps, or an exhausted
/// line search) ends the solve with the best iterate flagged non-converged.
pub fn find_soliton(
    seed: &ConnectionField,
    cfg: &SolverConfig,
) -> Result<(ConnectionField, SolveReport)> {
    cfg.validate(seed.grid())?;
    let quad = WeightedQuadrature::new(*seed.grid(), &cfg.center)?;

    let mut a = seed.clone();
    let mut s = soliton_residual(&a, &cfg.center)?;
    let mut energy = quad.norm_sq_oneform(&s)?;
    if !energy.is_finite() {
        return Err(Error::InvalidArgument { reason: "seed has non-finite residual".into() });
    }

    let mut history = vec![energy.sqrt()];
    let mut best = (a.clone(), energy);
    let mut cg_spent = 0usize;
    let mut stalls = 0usize;
    let mut stagnated = false;
    let mut outer = 0usize;

    while outer < cfg.max_outer && energy.sqrt() > cfg.target_residual {
        let jac = ResidualJacobian::new(&a, &cfg.center, cfg.mode, cfg.fd_probe)?;
        let mut delta = gauss_newton_direction(&jac, &quad, &s, cfg, &mut cg_spent)?;
        let jd = jac.apply(&delta)?;
        let mut slope = 2.0 * quad.inner_oneform(&s, &jd)?;
        if !(slope < 0.0) {
            // CG produced an ascent direction; fall back to the negative
            // gradient of the energy, -2 J^T S up to the shared factor.
            delta = jac.apply(&s)?;
            delta.scale(-1.0);
            let jd = jac.apply(&delta)?;
            slope = 2.0 * quad.inner_oneform(&s, &jd)?;
        }
        if !(slope < 0.0) {
            stagnated = true;
            break;
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= MIN_STEP {
            let mut cand = a.clone();
            cand.add_scaled_oneform(alpha, &delta)?;
            let cand_s = soliton_residual(&cand, &cfg.center)?;
            let cand_e = quad.norm_sq_oneform(&cand_s)?;
            if cand_e.is_finite() && cand_e <= energy + ARMIJO_C * alpha * slope {
                let drop = (energy - cand_e) / energy.max(f64::MIN_POSITIVE);
                a = cand;
                s = cand_s;
                energy = cand_e;
                accepted = true;
                history.push(energy.sqrt());
                if energy < best.1 {
                    best = (a.clone(), energy);
                }
                if drop < STALL_DROP {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                break;
            }
            alpha *= 0.5;
        }
        outer += 1;
        if !accepted {
            stalls += 1;
        }
        if stalls >= STALL_LIMIT {
            stagnated = true;
            break;
        }
    }

    let (out, out_energy) = best;
    let final_residual = out_energy.sqrt();
    let t0 = cfg.center.t0;
    let curvature_mass = f_functional(&out, &cfg.center)? / (t0 * t0);
    let report = SolveReport {
        converged: final_residual <= cfg.target_residual,
        stagnated,
        outer_iterations: outer,
        cg_iterations: cg_spent,
        initial_residual: history[0],
        final_residual,
        curvature_mass,
        residual_history: history,
    };
    Ok((out, report))
}

/// The soliton residual of a rotationally equivariant connection
/// A_i = f(|x|^2) M_i collapses to defect(rho) * M_j with this scalar. With
/// P = 2f' - f^2 and Q = 2f + rho f^2 the curvature is
/// F_ij = P (x_i M_j - x_j M_i) - Q E_ij, and contracting the covariant
/// divergence and the radial term leaves
///   4 rho f'' + (2n + 4 - rho) f' - 3(n-2) f^2 - (n-2) rho f^3 - f.
/// The pure-gauge profile f = -2/rho annihilates it identically, which pins
/// the coefficients.
pub fn equivariant_defect(n: usize, rho: f64, f: f64, fp: f64, fpp: f64) -> f64 {
    let nf = n as f64;
    4.0 * rho * fpp + (2.0 * nf + 4.0 - rho) * fp
        - 3.0 * (nf - 2.0) * f * f
        - (nf - 2.0) * rho * f * f * f
        - f
}

/// Radial shrinker profile from the equivariant reduction: a table on a
/// uniform rho grid plus the matched algebraic tail c/rho (1 + (2n-4)/rho)
/// of the linearized equation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadialProfile {
    pub n: usize,
    /// Shooting parameter f(0).
    pub f0: f64,
    /// Table spacing in rho.
    pub step: f64,
    /// f at rho = i * step.
    pub values: Vec<f64>,
    pub tail_c: f64,
}

impl RadialProfile {
    pub fn eval(&self, rho: f64) -> f64 {
        let edge = self.step * (self.values.len() - 1) as f64;
        if rho >= edge {
            self.tail_c / rho * (1.0 + (2.0 * self.n as f64 - 4.0) / rho)
        } else {
            let u = rho / self.step;
            let i = (u as usize).min(self.values.len() - 2);
            let w = u - i as f64;
            self.values[i] * (1.0 - w) + self.values[i + 1] * w
        }
    }
}

/// End state of one shooting integration.
enum ShotOutcome {
    /// |f| escaped; carries the escape sign.
    Diverged(f64),
    /// Survived to rho_max; carries the final value.
    Survived(f64),
}

fn shoot(n: usize, f0: f64, rho_max: f64, mut capture: Option<&mut Vec<(f64, f64)>>) -> ShotOutcome {
    let nf = n as f64;
    // regular series start: f = f0 + f1 rho + f2 rho^2
    let f1 = (f0 + 3.0 * (nf - 2.0) * f0 * f0) / (2.0 * nf + 4.0);
    let f2 = (2.0 * f1 + (nf - 2.0) * (6.0 * f0 * f1 + f0 * f0 * f0)) / (4.0 * nf + 16.0);
    let mut rho = 1e-4;
    let mut f = f0 + f1 * rho + f2 * rho * rho;
    let mut g = f1 + 2.0 * f2 * rho;
    if let Some(cap) = capture.as_deref_mut() {
        cap.push((0.0, f0));
        cap.push((rho, f));
    }

    let rhs = |rho: f64, f: f64, g: f64| -> f64 {
        (-(2.0 * nf + 4.0 - rho) * g
            + 3.0 * (nf - 2.0) * f * f
            + (nf - 2.0) * rho * f * f * f
            + f)
            / (4.0 * rho)
    };

    const ESCAPE: f64 = 10.0;
    while rho < rho_max {
        let h = if rho < 1.0 { 1e-4 } else { 1e-3 };
        let k1f = g;
        let k1g = rhs(rho, f, g);
        let k2f = g + 0.5 * h * k1g;
        let k2g = rhs(rho + 0.5 * h, f + 0.5 * h * k1f, g + 0.5 * h * k1g);
        let k3f = g + 0.5 * h * k2g;
        let k3g = rhs(rho + 0.5 * h, f + 0.5 * h * k2f, g + 0.5 * h * k2g);
        let k4f = g + h * k3g;
        let k4g = rhs(rho + h, f + h * k3f, g + h * k3g);
        f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        g += h / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g);
        rho += h;
        if let Some(cap) = capture.as_deref_mut() {
            cap.push((rho, f));
        }
        if !f.is_finite() || f.abs() > ESCAPE {
            return ShotOutcome::Diverged(if f.is_finite() { f.signum() } else { 1.0 });
        }
    }
    ShotOutcome::Survived(f)
}

fn shot_sign(n: usize, f0: f64, rho_max: f64) -> f64 {
    match shoot(n, f0, rho_max, None) {
        ShotOutcome::Diverged(s) => s,
        ShotOutcome::Survived(f) => f.signum(),
    }
}

/// Shooting solve of the equivariant shrinker equation: scans f(0), brackets
/// sign changes of the escape direction away from the trivial root at 0, and
/// bisects the one closest to it. No profile exists for n <= 4 (there is no
/// shrinking soliton there), so finding no bracket is reported as
/// non-convergence rather than an internal error.
pub fn shrinker_profile(n: usize) -> Result<RadialProfile> {
    if !(2..=6).contains(&n) {
        return Err(Error::InvalidArgument { reason: format!("dimension {n} outside 2..=6") });
    }
    let rho_max = 80.0;
    let table_edge = 50.0;

    // scan both signs; exclude a neighborhood of 0 so the trivial root does
    // not masquerade as a bracket
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    for side in [-1.0f64, 1.0] {
        let mut prev: Option<(f64, f64)> = None;
        for i in 1..=150 {
            let f0 = side * 0.02 * i as f64;
            let s = shot_sign(n, f0, rho_max);
            if let Some((pf0, ps)) = prev {
                if ps * s < 0.0 {
                    brackets.push((pf0, f0));
                }
            }
            prev = Some((f0, s));
        }
    }
    let (mut lo, mut hi) = *brackets
        .iter()
        .min_by(|a, b| a.0.abs().min(a.1.abs()).total_cmp(&b.0.abs().min(b.1.abs())))
        .ok_or_else(|| Error::NotConverged {
            what: format!("no equivariant shrinker bracket in dimension {n}"),
        })?;

    let slo = shot_sign(n, lo, rho_max);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if shot_sign(n, mid, rho_max) == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let f0 = 0.5 * (lo + hi);

    let mut raw = Vec::new();
    shoot(n, f0, rho_max, Some(&mut raw));
    let reach = raw.last().map_or(0.0, |&(r, _)| r);
    if reach < table_edge {
        return Err(Error::NotConverged {
            what: format!("bisected profile in dimension {n} escapes at rho = {reach:.2}"),
        });
    }
    // resample onto a uniform table; integration steps are far finer
    let step = 0.01;
    let len = (table_edge / step) as usize + 1;
    let mut values = Vec::with_capacity(len);
    let mut j = 0usize;
    for i in 0..len {
        let target = i as f64 * step;
        while j + 1 < raw.len() && raw[j + 1].0 < target {
            j += 1;
        }
        let (r0, v0) = raw[j];
        let (r1, v1) = raw[(j + 1).min(raw.len() - 1)];
        let w = if r1 > r0 { ((target - r0) / (r1 - r0)).clamp(0.0, 1.0) } else { 0.0 };
        values.push(v0 * (1.0 - w) + v1 * w);
    }
    let edge = (len - 1) as f64 * step;
    let f_edge = values[len - 1];
    let tail_c = f_edge * edge / (1.0 + (2.0 * n as f64 - 4.0) / edge);
    Ok(RadialProfile { n, f0, step, values, tail_c })
}
