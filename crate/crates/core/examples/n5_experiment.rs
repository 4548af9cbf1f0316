//! Background experiment: polish the equivariant n=5 seed into a lattice
//! near-soliton and report whether the residual gate and the downstream
//! identity checks hold at desk resolution. Writes fixtures and a log under
//! target/fixtures/.

use std::path::Path;
use std::time::Instant;

use ymlab_core::archive::save_connection;
use ymlab_core::fields::{so_rotational, Center, Grid};
use ymlab_core::functionals::f_functional;
use ymlab_core::solve::{
    find_soliton, residual_energy, shrinker_profile, JacobianMode, SolverConfig,
};
use ymlab_core::verify::{gap_check, identity_a_through_e};

fn polish(m: usize, half_width: f64, max_outer: usize, cg: usize) {
    let n = 5usize;
    let profile = shrinker_profile(n).unwrap();
    let grid = Grid::new(n, m, half_width).unwrap();
    let seed = so_rotational(grid, n, |rho| profile.eval(rho)).unwrap();
    let center = Center::origin(n, 1.0);

    let t = Instant::now();
    let e0 = residual_energy(&seed, &center).unwrap().sqrt();
    let mass0 = f_functional(&seed, &center).unwrap();
    let fnorm0 = mass0.sqrt();
    println!(
        "[m={m}] seed: residual {e0:.6e} fnorm {fnorm0:.6e} rel {:.6e} ({:?})",
        e0 / fnorm0,
        t.elapsed()
    );

    let mut cfg = SolverConfig::canonical(n);
    cfg.mode = JacobianMode::Symmetrized;
    cfg.max_outer = max_outer;
    cfg.cg_max_iters = cg;
    cfg.cg_tol = 1e-4;
    cfg.target_residual = 0.9e-3 * fnorm0;

    let t = Instant::now();
    let (out, report) = find_soliton(&seed, &cfg).unwrap();
    println!(
        "[m={m}] solve: converged {} stagnated {} outers {} cg {} residual {:.6e} -> {:.6e} mass {:.6e} ({:?})",
        report.converged,
        report.stagnated,
        report.outer_iterations,
        report.cg_iterations,
        report.initial_residual,
        report.final_residual,
        report.curvature_mass,
        t.elapsed()
    );
    for (i, r) in report.residual_history.iter().enumerate() {
        println!("[m={m}]   outer {i}: {r:.6e}");
    }

    let fnorm = report.curvature_mass.sqrt();
    let rel = report.final_residual / fnorm;
    println!("[m={m}] gate: rel {rel:.6e} (need <= 1e-3), mass {:.6e} (need >= 1e-3)", report.curvature_mass);

    let dir = Path::new("target/fixtures");
    std::fs::create_dir_all(dir).unwrap();
    save_connection(&dir.join(format!("n5_m{m}.json")), &out).unwrap();

    if rel <= 1.1e-3 {
        let t = Instant::now();
        match identity_a_through_e(&out, &center, &[1.0, 0.0, 0.0, 0.0, 0.0]) {
            Ok(reports) => {
                for r in &reports {
                    println!(
                        "[m={m}] {}: lhs {:.6e} rhs {:.6e} corr {:.3e} gap {:.4e} pass {}",
                        r.name, r.lhs, r.rhs, r.residual_term, r.relative_gap, r.pass
                    );
                }
            }
            Err(e) => println!("[m={m}] identities gated out: {e}"),
        }
        println!("[m={m}] identities ({:?})", t.elapsed());
        let gap = gap_check(&out, &center, 1e-6, 1e-3).unwrap();
        println!(
            "[m={m}] gap: sup|F|^2 {:.6e} threshold {:.6e} below {} near {}",
            gap.sup_f_sq, gap.threshold, gap.below_threshold, gap.near_soliton
        );
    }
}

fn main() {
    polish(9, 4.5, 30, 30);
    polish(11, 5.5, 30, 30);
    println!("experiment done");
}
