//! Scratch probe for the equivariant shrinker reduction: shooting outcomes
//! per dimension, profile shape, and the lattice residual of the seeded
//! rotational field. Run with --release.

use std::time::Instant;

use ymlab_core::fields::{
    curvature, interior_product, so_rotational, Center, Grid, MAX_N,
};
use ymlab_core::solve::{equivariant_defect, residual_energy, shrinker_profile};
use ymlab_core::variations::soliton_residual;

fn main() {
    // generic-profile reduction check at n=4: lattice residual entries vs
    // defect(rho) * M_j at interior points
    {
        let n = 4usize;
        let grid = Grid::new(n, 13, 3.0).unwrap();
        let (amp, scale) = (0.08f64, 2.0f64);
        let a = so_rotational(grid, n, move |rho| amp * (-rho / scale).exp()).unwrap();
        let s = soliton_residual(&a, &Center::origin(n, 1.0)).unwrap();
        let mut mi = [0usize; MAX_N];
        let mut xs = [0.0f64; MAX_N];
        let (mut worst, mut sup) = (0.0f64, 0.0f64);
        for pt in 0..grid.npoints() {
            grid.decode(pt, &mut mi);
            if mi.iter().take(n).any(|&c| !(4..=8).contains(&c)) {
                continue;
            }
            grid.point(pt, &mut xs);
            let rho: f64 = xs[..n].iter().map(|x| x * x).sum();
            let f = amp * (-rho / scale).exp();
            let fp = -f / scale;
            let fpp = f / (scale * scale);
            let d = equivariant_defect(n, rho, f, fp, fpp);
            for j in 0..n {
                let got = s.comp(pt, j);
                for b in 0..n {
                    let expect_jb = d * xs[b];
                    let e = got[j * n + b];
                    if b != j {
                        worst = worst.max((e - expect_jb).abs());
                        sup = sup.max(expect_jb.abs());
                    }
                }
            }
        }
        println!("n=4 generic reduction: sup|expected| = {sup:.4e} worst mismatch = {worst:.4e} rel = {:.4e}", worst / sup);
    }

    for n in 2..=6 {
        let t = Instant::now();
        match shrinker_profile(n) {
            Ok(p) => {
                println!(
                    "n={n}: f0 = {:.12} tail_c = {:.6} f(1)={:.6} f(5)={:.6} f(20)={:.6} f(50)={:.6} [{:?}]",
                    p.f0,
                    p.tail_c,
                    p.eval(1.0),
                    p.eval(5.0),
                    p.eval(20.0),
                    p.eval(50.0),
                    t.elapsed()
                );
            }
            Err(e) => println!("n={n}: {e} [{:?}]", t.elapsed()),
        }
    }

    // defect sanity along the n=5 profile via finite differences on eval
    if let Ok(p) = shrinker_profile(5) {
        for rho in [0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0] {
            let d = 0.05;
            let f = p.eval(rho);
            let fp = (p.eval(rho + d) - p.eval(rho - d)) / (2.0 * d);
            let fpp = (p.eval(rho + d) - 2.0 * f + p.eval(rho - d)) / (d * d);
            println!(
                "  rho={rho:5.1}: f={f:+.6} defect={:+.3e}",
                equivariant_defect(5, rho, f, fp, fpp)
            );
        }

        // pointwise lattice residual vs the radial-term scale, interior only
        let t = Instant::now();
        let grid = Grid::new(5, 9, 3.0).unwrap();
        let a = so_rotational(grid, 5, |rho| p.eval(rho)).unwrap();
        let center = Center::origin(5, 1.0);
        let s = soliton_residual(&a, &center).unwrap();
        let f2 = curvature(&a);
        let x = interior_product(&f2, &center.x0);
        let mut mi = [0usize; MAX_N];
        let (mut sup_s, mut sup_x) = (0.0f64, 0.0f64);
        for pt in 0..grid.npoints() {
            grid.decode(pt, &mut mi);
            if mi.iter().take(5).any(|&c| !(3..=5).contains(&c)) {
                continue;
            }
            for j in 0..5 {
                for e in s.comp(pt, j) {
                    sup_s = sup_s.max(e.abs());
                }
                for e in x.comp(pt, j) {
                    sup_x = sup_x.max(e.abs());
                }
            }
        }
        println!(
            "  lattice m=9 R=3: interior sup|S| = {sup_s:.4e} sup|X| = {sup_x:.4e} ratio = {:.4e} [{:?}]",
            sup_s / (0.5 * sup_x),
            t.elapsed()
        );

        // weighted residual on the experiment grid
        for (m, r_half) in [(9usize, 4.5f64), (11, 5.5)] {
            let t = Instant::now();
            let grid = Grid::new(5, m, r_half).unwrap();
            let a = so_rotational(grid, 5, |rho| p.eval(rho)).unwrap();
            let e = residual_energy(&a, &center).unwrap();
            let mass = ymlab_core::functionals::f_functional(&a, &center).unwrap();
            println!(
                "  m={m} R={r_half}: residual = {:.4e} mass = {:.4e} rel = {:.4e} [{:?}]",
                e.sqrt(),
                mass,
                e.sqrt() / mass.sqrt(),
                t.elapsed()
            );
        }
    }
}
