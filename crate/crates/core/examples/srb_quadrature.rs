//! Two ways to integrate against the SRB measure: orbit averages with
//! batch-means error bars, and a pushed curve of unstable manifold.

use std::f64::consts::TAU;

use s3_core::maps::cat_map;
use s3_core::quadrature::{curve_sweep, find_turnover, mc_integrate, CurveQuadratureSpec};
use s3_core::torus::TorusPoint;

fn main() -> s3_core::Result<()> {
    let cat = cat_map();
    let g = |p: TorusPoint| (TAU * p.x).cos();

    println!("orbit averages of cos 2 pi x (exact 0)");
    for n in [10_000, 100_000, 1_000_000] {
        let e = mc_integrate(&cat, g, n, 1, 100)?;
        println!("  N = {n:>8}: {:>10.2e} +/- {:.2e}", e.mean, e.stderr);
    }

    let spec = CurveQuadratureSpec::new(TorusPoint::new(0.31, 0.17), cat.eigen().unstable, 0, 2000);
    let sweep = curve_sweep(&cat, g, &spec, 0..40)?;
    println!("curve quadrature, 2000 nodes");
    for (n, e) in sweep.iter().enumerate().step_by(3) {
        println!("  n_push = {n:>2}: error {:.2e}  budget {:.2e}", e.value.abs(), e.budget.total());
    }
    let t = find_turnover(&sweep, 0.0, 0);
    println!(
        "best n_push {} with error {:.2e} (start {:.2e}, end {:.2e})",
        t.best_push, t.best_error, t.initial_error, t.final_error
    );
    Ok(())
}
