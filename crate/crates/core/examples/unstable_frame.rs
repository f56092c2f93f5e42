//! Unstable direction, expansion factor and curvature along an orbit.

use std::sync::Arc;

use s3_core::cocycle::{power_iterate_unstable, UnstableFrame};
use s3_core::fields::{Axis, Mode, TrigField, VectorField};
use s3_core::maps::{cat_map, evolve_orbit, perturbed_cat_map, Direction};
use s3_core::pipeline::Windows;
use s3_core::torus::{TangentVector, TorusPoint};

fn main() -> s3_core::Result<()> {
    let x0 = TorusPoint::new(0.31, 0.17);
    let start = TangentVector::new(1.0, 0.0);

    let cat = cat_map();
    let pts = evolve_orbit(&cat, x0, 60, Direction::Forward)?.into_forward_points();
    let p = power_iterate_unstable(&cat, &pts, start)?;
    let e = cat.eigen();
    println!(
        "cat map: angle ratio {:.5} (lambda_s/lambda_u = {:.5}), burn-in {}",
        p.measured_ratio,
        e.lambda_s / e.lambda_u,
        p.recommended_burn_in
    );

    let field: Arc<dyn VectorField> = Arc::new(TrigField::zero().with(Axis::Y, Mode::sin(1.0, 2, 1)));
    let map = perturbed_cat_map(0.05, field)?;
    let w = Windows::default();
    let pts = evolve_orbit(&map, x0, w.history() + 10, Direction::Forward)?.into_forward_points();
    let frame = UnstableFrame::build(&map, pts, start, w.frame())?;
    let d = &frame.diagnostics;
    println!("perturbed map t = 0.05:");
    println!("  power ratio            {:.4}", d.power_ratio);
    println!("  curvature residual     {:.2e}", d.curvature_residual);
    println!("  curvature contraction  {:.4}", d.curvature_contraction);
    println!("  geometric mean of h    {:.4}", d.h_geometric_mean);

    println!("{:>4} {:>9} {:>9} {:>9} {:>11}", "k", "Xu_x", "Xu_y", "h", "|curv|");
    for k in (frame.xu_h_start..frame.len()).step_by(4) {
        println!(
            "{k:>4} {:>9.5} {:>9.5} {:>9.5} {:>11.4e}",
            frame.xu[k][0],
            frame.xu[k][1],
            frame.h[k],
            frame.curvature[k].norm()
        );
    }
    Ok(())
}
