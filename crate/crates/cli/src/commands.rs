//! Command implementations. Every command loads or builds a connection,
//! dispatches into the library, writes `report.json` under --out, and maps
//! the result onto the exit-code contract: 0 success, 1 bad configuration
//! or input, 2 failed check, 3 non-convergence.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use ymlab_core::algebra::AlgebraElement;
use ymlab_core::archive::{load_connection, save_connection, save_flow_trace, save_twoform};
use ymlab_core::fields::{
    abelian_linear, bianchi_residual, curvature, descended_extension, flat, gauge_from_profile,
    poly_window, pure_gauge, random_smooth, rescale_spatial, so_rotational, Center,
    ConnectionField, Grid, RandomFieldParams,
};
use ymlab_core::flow::{integrate, monotonicity_check, sup_curvature, FlowConfig};
use ymlab_core::functionals::{
    entropy, f_functional, f_gradient_center, truncation_warning, ym_energy,
};
use ymlab_core::solve::{find_soliton, shrinker_profile};
use ymlab_core::spectral::{f_stability_verdict, lowest_spectrum_with};
use ymlab_core::verify::{
    dimension_obstruction_experiment, descent_check, gap_check, generalized_identity,
    identity_a_through_e, path_monotonicity_check, PhiField,
};
use ymlab_core::{Error, Result};

use crate::config::{FieldSpec, RotationalProfile, RunConfig, VerifySection};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CHECK: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

/// How a completed command run ended, before strictness is applied.
#[derive(Clone, Copy, PartialEq)]
pub enum Status {
    Pass,
    CheckFailed,
    NotConverged,
}

pub struct Outcome {
    pub report: Value,
    pub warnings: Vec<String>,
    pub status: Status,
}

impl Outcome {
    fn pass(report: Value) -> Self {
        Self { report, warnings: Vec::new(), status: Status::Pass }
    }

    pub fn exit_code(&self, strict: bool) -> i32 {
        match self.status {
            Status::CheckFailed => EXIT_CHECK,
            Status::NotConverged => EXIT_NONCONVERGED,
            Status::Pass if strict && !self.warnings.is_empty() => EXIT_CHECK,
            Status::Pass => EXIT_OK,
        }
    }
}

/// Exit code for an error that prevented a report from being produced.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } | Error::Blowup { .. } => EXIT_NONCONVERGED,
        Error::NotNearSoliton { .. } => EXIT_CHECK,
        _ => EXIT_CONFIG,
    }
}

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Ctx {
    fn grid(&self) -> Result<Grid> {
        self.cfg.grid()
    }

    fn center(&self, grid: &Grid) -> Result<Center> {
        self.cfg.center(grid)
    }

    /// The working connection: the input archive when one is named,
    /// otherwise the field recipe.
    fn field(&self) -> Result<ConnectionField> {
        let grid = self.grid()?;
        let r = self.cfg.rank()?;
        if let Some(path) = &self.cfg.input {
            let a = load_connection(Path::new(path))?;
            if *a.grid() != grid {
                return Err(Error::InvalidArgument {
                    reason: format!(
                        "input archive grid (n={}, m={}, R={}) differs from the grid section",
                        a.grid().n(),
                        a.grid().m(),
                        a.grid().half_width()
                    ),
                });
            }
            if a.rank() != r {
                return Err(Error::RankMismatch { expected: r, got: a.rank() });
            }
            return Ok(a);
        }
        match &self.cfg.field {
            Some(spec) => build_field(spec, grid, r, self.seed),
            None => Err(Error::InvalidArgument {
                reason: "no input archive and no field recipe in the configuration".into(),
            }),
        }
    }

    fn grid_json(&self, grid: &Grid) -> Value {
        json!({ "n": grid.n(), "m": grid.m(), "half_width": grid.half_width() })
    }
}

pub fn build_field(spec: &FieldSpec, grid: Grid, r: usize, seed: u64) -> Result<ConnectionField> {
    let n = grid.n();
    match spec {
        FieldSpec::Flat => Ok(flat(grid, r)),
        FieldSpec::PureGauge { pair, amplitude, power } => {
            check_pair("pure-gauge pair", *pair, r)?;
            let w = poly_window(grid.half_width(), *power);
            let amp = *amplitude;
            let h = gauge_from_profile(grid, r, (pair[0], pair[1]), move |x| amp * w(x));
            pure_gauge(&h)
        }
        FieldSpec::AbelianLinear { axes, strength, generator } => {
            check_pair("abelian-linear axes", *axes, n)?;
            let gen = generator.unwrap_or([0, 1]);
            check_pair("abelian-linear generator", gen, r)?;
            let mut b = vec![0.0; n * n];
            b[axes[0] * n + axes[1]] = *strength;
            b[axes[1] * n + axes[0]] = -*strength;
            Ok(abelian_linear(grid, r, &b, &AlgebraElement::basis(r, gen[0], gen[1])))
        }
        FieldSpec::RandomSmooth { amplitude, length_scale, envelope_radius, bumps, compact } => {
            let mut params = if *compact {
                RandomFieldParams::compact(&grid)
            } else {
                RandomFieldParams::gentle(&grid)
            };
            if let Some(v) = amplitude {
                params.amplitude = *v;
            }
            if let Some(v) = length_scale {
                params.length_scale = *v;
            }
            if let Some(v) = envelope_radius {
                params.envelope_radius = *v;
            }
            if let Some(v) = bumps {
                params.bumps = *v;
            }
            Ok(random_smooth(grid, r, seed, &params))
        }
        FieldSpec::Rotational { profile } => match profile {
            RotationalProfile::Gaussian { amplitude, scale } => {
                if !(*scale > 0.0) {
                    return Err(Error::InvalidArgument {
                        reason: format!("rotational scale {scale} must be positive"),
                    });
                }
                let (a, s) = (*amplitude, *scale);
                so_rotational(grid, r, move |rho| a * (-rho / s).exp())
            }
            RotationalProfile::Shrinker => {
                let p = shrinker_profile(n)?;
                so_rotational(grid, r, move |rho| p.eval(rho))
            }
        },
        FieldSpec::DescendedExtension { axis, inner } => {
            if n < 3 {
                return Err(Error::InvalidArgument {
                    reason: "descended-extension needs n >= 3".into(),
                });
            }
            let inner_grid = Grid::new(n - 1, grid.m(), grid.half_width())?;
            let inner_field = build_field(inner, inner_grid, r, seed)?;
            descended_extension(&inner_field, grid, *axis)
        }
    }
}

fn check_pair(what: &str, pair: [usize; 2], bound: usize) -> Result<()> {
    if pair[0] == pair[1] || pair[0] >= bound || pair[1] >= bound {
        return Err(Error::InvalidArgument {
            reason: format!("{what} ({}, {}) must be distinct indices below {bound}", pair[0], pair[1]),
        });
    }
    Ok(())
}

fn save_field(ctx: &Ctx, name: &str, a: &ConnectionField) -> Result<String> {
    std::fs::create_dir_all(&ctx.out)?;
    let manifest = ctx.out.join(name);
    save_connection(&manifest, a)?;
    Ok(name.to_string())
}

pub fn make_field(ctx: &Ctx) -> Result<Outcome> {
    if ctx.cfg.field.is_none() {
        return Err(Error::InvalidArgument {
            reason: "make-field requires a field recipe in the configuration".into(),
        });
    }
    let a = ctx.field()?;
    let archive = save_field(ctx, "field.json", &a)?;
    Ok(Outcome::pass(json!({
        "command": "make-field",
        "grid": ctx.grid_json(a.grid()),
        "rank": a.rank(),
        "archive": archive,
        "sup_entry": a.sup_entry_norm(),
        "sup_f": sup_curvature(&a),
    })))
}

pub fn cmd_curvature(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.field()?;
    let f = curvature(&a);
    std::fs::create_dir_all(&ctx.out)?;
    save_twoform(&ctx.out.join("curvature.json"), &f)?;
    Ok(Outcome::pass(json!({
        "command": "curvature",
        "grid": ctx.grid_json(a.grid()),
        "rank": a.rank(),
        "archive": "curvature.json",
        "sup_f": sup_curvature(&a),
        "bianchi_residual": bianchi_residual(&a),
        "ym_energy": ym_energy(&a),
    })))
}

pub fn cmd_functional(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.field()?;
    let center = ctx.center(a.grid())?;
    let value = f_functional(&a, &center)?;
    let (dt0, dx0) = f_gradient_center(&a, &center)?;
    let mut warnings = Vec::new();
    let deficit = truncation_warning(a.grid(), &center);
    if let Some(d) = deficit {
        warnings.push(format!(
            "box half-width {} is under five Gaussian widths; truncation deficit {d:.3e}",
            a.grid().half_width()
        ));
    }
    let report = json!({
        "command": "functional",
        "grid": ctx.grid_json(a.grid()),
        "rank": a.rank(),
        "center": center,
        "value": value,
        "gradient_t0": dt0,
        "gradient_x0": dx0,
        "ym_energy": ym_energy(&a),
        "truncation_deficit": deficit,
        "warnings": warnings,
    });
    Ok(Outcome { report, warnings, status: Status::Pass })
}

pub fn cmd_entropy(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.field()?;
    let cfg = ctx.cfg.entropy.clone().unwrap_or_default().build();
    let res = entropy(&a, &cfg)?;
    let value = if res.value.is_finite() { json!(res.value) } else { json!("+inf") };
    let mut warnings = Vec::new();
    if res.clamped {
        warnings.push("entropy argmax sits on the t0 truncation clamp".into());
    }
    // the divergence sentinel is an exact answer, not an ascent failure
    let status = if res.value.is_finite() && !res.converged {
        Status::NotConverged
    } else {
        Status::Pass
    };
    let report = json!({
        "command": "entropy",
        "grid": ctx.grid_json(a.grid()),
        "rank": a.rank(),
        "value": value,
        "argmax_center": res.argmax_center,
        "starts_tried": res.starts_tried,
        "converged": res.converged,
        "clamped": res.clamped,
        "warnings": warnings,
    });
    Ok(Outcome { report, warnings, status })
}

pub fn cmd_spectrum(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.field()?;
    let center = ctx.center(a.grid())?;
    let section = ctx.cfg.spectrum.clone().unwrap_or_default();
    let cfg = section.build(ctx.seed);
    let k = section.count.unwrap_or(a.grid().n() + 4);
    let res = lowest_spectrum_with(&a, &center, k, section.deflate, &cfg)?;
    let verdict = if section.verdict {
        Some(f_stability_verdict(&a, &center, None)?)
    } else {
        None
    };
    let status = if res.converged { Status::Pass } else { Status::NotConverged };
    let deflated: Vec<&str> = res.deflated.iter().map(|(l, _)| l.as_str()).collect();
    let report = json!({
        "command": "spectrum",
        "grid": ctx.grid_json(a.grid()),
        "rank": a.rank(),
        "center": center,
        "eigenvalues": res.eigenvalues,
        "residuals": res.residuals,
        "cycles": res.cycles,
        "converged": res.converged,
        "deflated": deflated,
        "verdict": verdict,
    });
    Ok(Outcome { report, warnings: Vec::new(), status })
}

pub fn cmd_flow(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.field()?;
    let grid = *a.grid();
    let section = ctx.cfg.flow.clone().ok_or_else(|| Error::InvalidArgument {
        reason: "flow command needs a flow section".into(),
    })?;
    let mut cfg = FlowConfig::default();
    if let Some(v) = section.cfl {
        cfg.cfl = v;
    }
    if let Some(v) = section.snapshot_stride {
        cfg.snapshot_stride = v;
    }
    if let Some(v) = section.max_steps {
        cfg.max_steps = v;
    }
    if let Some(v) = section.sup_f_limit {
        cfg.sup_f_limit = v;
    }
    cfg.entropy_every = section.entropy_every;
    if let Some(e) = &ctx.cfg.entropy {
        cfg.entropy = e.build();
    }
    for c in &section.centers {
        cfg.centers.push(c.build(&grid)?);
    }

    let trace = integrate(&a, section.t_end, &cfg)?;
    std::fs::create_dir_all(&ctx.out)?;
    save_flow_trace(&ctx.out.join("trace"), &trace)?;

    let mut warnings = trace.violations.clone();
    let mut status = Status::Pass;
    let monotonicity = if section.monotonicity {
        let center = cfg.centers.first().cloned().ok_or_else(|| Error::InvalidArgument {
            reason: "monotonicity check needs at least one tracked center".into(),
        })?;
        let rep = monotonicity_check(&trace, &center)?;
        if !rep.monotone {
            status = Status::CheckFailed;
        }
        Some(rep)
    } else {
        None
    };
    if trace.blowup.is_some() {
        warnings.push("sup|F| crossed the blowup limit; trace ends early".into());
    }
    let report = json!({
        "command": "flow",
        "grid": ctx.grid_json(&grid),
        "rank": a.rank(),
        "final_time": trace.final_time(),
        "accepted_steps": trace.diagnostics.len(),
        "snapshots": trace.snapshots.len(),
        "sup_f_final": sup_curvature(trace.final_field()),
        "blowup": trace.blowup,
        "violations": trace.violations,
        "monotonicity": monotonicity,
        "trace_dir": "trace",
        "warnings": warnings,
    });
    Ok(Outcome { report, warnings, status })
}

pub fn cmd_verify(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.field()?;
    let center = ctx.center(a.grid())?;
    let n = a.grid().n();
    let section = ctx.cfg.verify.clone().unwrap_or_else(VerifySection::default);
    let gate_rel = section.gate_rel.unwrap_or(ymlab_core::spectral::SOLITON_GATE_REL);
    let flatness_tol = section.flatness_tol.unwrap_or(1e-6);
    let v = match &section.vector {
        Some(v) => {
            if v.len() != n {
                return Err(Error::InvalidArgument {
                    reason: format!("verify vector has {} entries, grid needs {n}", v.len()),
                });
            }
            v.clone()
        }
        None => {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        }
    };

    let mut passed = true;
    let mut warnings = Vec::new();

    let generalized = if section.generalized {
        let mut reports = Vec::new();
        for phi in PhiField::catalog(&v) {
            let rep = generalized_identity(&a, &center, &phi)?;
            passed &= rep.pass;
            reports.push(rep);
        }
        Some(reports)
    } else {
        None
    };

    let gap = if section.gap {
        let rep = gap_check(&a, &center, flatness_tol, gate_rel)?;
        if rep.inconsistency {
            passed = false;
        }
        if !rep.near_soliton {
            warnings.push("gap check field is not gated as a near-soliton".into());
        }
        Some(rep)
    } else {
        None
    };

    let soliton_identities = if section.soliton_identities {
        let reports = identity_a_through_e(&a, &center, &v)?;
        for rep in &reports {
            passed &= rep.pass;
        }
        Some(reports)
    } else {
        None
    };

    let path = match &section.path {
        Some(p) => {
            if p.y.len() != n {
                return Err(Error::InvalidArgument {
                    reason: format!("path endpoint has {} entries, grid needs {n}", p.y.len()),
                });
            }
            let rep = path_monotonicity_check(&a, &p.y, p.t_cap, p.samples, gate_rel)?;
            passed &= rep.closed_nonpositive && rep.agree;
            if !rep.numeric_nonpositive {
                warnings.push("numeric path derivative has positive samples".into());
            }
            Some(rep)
        }
        None => None,
    };

    let obstruction = match &section.obstruction {
        Some(o) => {
            let rep = dimension_obstruction_experiment(&o.dims, &o.build())?;
            passed &= rep.all_low_dim_flat;
            if rep.low_dim_converged == 0 {
                warnings.push("no low-dimension obstruction run converged".into());
            }
            Some(rep)
        }
        None => None,
    };

    let status = if passed { Status::Pass } else { Status::CheckFailed };
    let report = json!({
        "command": "verify",
        "grid": ctx.grid_json(a.grid()),
        "rank": a.rank(),
        "center": center,
        "vector": v,
        "gate_rel": gate_rel,
        "generalized": generalized,
        "gap": gap,
        "soliton_identities": soliton_identities,
        "path": path,
        "obstruction": obstruction,
        "passed": passed,
        "warnings": warnings,
    });
    Ok(Outcome { report, warnings, status })
}

pub fn cmd_find_soliton(ctx: &Ctx) -> Result<Outcome> {
    let seed_field = ctx.field()?;
    let center = ctx.center(seed_field.grid())?;
    let t0 = center.t0;
    let f_norm = (f_functional(&seed_field, &center)? / (t0 * t0)).sqrt();
    let cfg = ctx.cfg.solver.clone().unwrap_or_default().build(center, f_norm);
    let (out, report) = find_soliton(&seed_field, &cfg)?;
    let archive = save_field(ctx, "soliton.json", &out)?;
    let status = if report.converged { Status::Pass } else { Status::NotConverged };
    let rel = report.final_residual / report.curvature_mass.sqrt().max(f64::MIN_POSITIVE);
    let value = json!({
        "command": "find-soliton",
        "grid": ctx.grid_json(out.grid()),
        "rank": out.rank(),
        "archive": archive,
        "solve": report,
        "relative_residual": rel,
    });
    Ok(Outcome { report: value, warnings: Vec::new(), status })
}

pub fn cmd_rescale(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.field()?;
    let n = a.grid().n();
    let section = ctx.cfg.rescale.clone().ok_or_else(|| Error::InvalidArgument {
        reason: "rescale command needs a rescale section".into(),
    })?;
    if !(section.lambda > 0.0 && section.lambda.is_finite()) {
        return Err(Error::InvalidArgument {
            reason: format!("rescale lambda {} must be positive and finite", section.lambda),
        });
    }
    let x0 = section.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    if x0.len() != n {
        return Err(Error::InvalidArgument {
            reason: format!("rescale x0 has {} entries, grid needs {n}", x0.len()),
        });
    }
    let out = rescale_spatial(&a, section.lambda, &x0);
    let archive = save_field(ctx, "rescaled.json", &out)?;
    Ok(Outcome::pass(json!({
        "command": "rescale",
        "grid": ctx.grid_json(a.grid()),
        "rank": a.rank(),
        "lambda": section.lambda,
        "x0": x0,
        "archive": archive,
        "sup_f_in": sup_curvature(&a),
        "sup_f_out": sup_curvature(&out),
    })))
}

pub fn cmd_descent(ctx: &Ctx) -> Result<Outcome> {
    let a = ctx.field()?;
    let center = ctx.center(a.grid())?;
    let tol = ctx.cfg.descent.clone().unwrap_or_default().tol.unwrap_or(1e-8);
    let rep = descent_check(&a, &center, tol)?;
    Ok(Outcome::pass(json!({
        "command": "descent",
        "grid": ctx.grid_json(a.grid()),
        "rank": a.rank(),
        "center": center,
        "report": rep,
    })))
}
