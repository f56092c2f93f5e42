//! Central finite difference of the SRB average over the map family, the
//! reference the sensitivity estimate is checked against.

use s3_core::config::{MapConfig, MapFamily, S3Config};
use s3_core::driver::{fd_oracle, run_s3};
use s3_core::fields::{Axis, Mode, TrigField};
use s3_core::maps::HessianMode;

fn main() -> s3_core::Result<()> {
    let mut cfg = S3Config::new(MapConfig {
        family: MapFamily::PerturbedCat,
        matrix: [[2, 1], [1, 1]],
        t: 0.0,
        hessian: HessianMode::Analytic,
        field: TrigField::zero().with(Axis::Y, Mode::sin(1.0, 2, 1)),
    });
    cfg.quadrature.samples = 200_000;
    cfg.oracle.t_step = 0.01;
    cfg.oracle.steps = 1_000_000;
    cfg.oracle.seeds = 4;

    let o = fd_oracle(&cfg)?;
    println!("f(t+dt) = {:.6} +/- {:.6}", o.plus.value, o.plus.stderr);
    println!("f(t-dt) = {:.6} +/- {:.6}", o.minus.value, o.minus.stderr);
    println!("oracle   {:>9.5} +/- {:.5}  ({})", o.estimate, o.stderr, o.bias_note);

    let r = run_s3(&cfg)?;
    println!("s3       {:>9.5} +/- {:.5}", r.psi_total, r.psi_stderr);
    println!("exact    {:>9.5}", -std::f64::consts::PI);
    Ok(())
}
