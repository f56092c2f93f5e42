//! The density `rho` that turns the unstable part into an ordinary
//! correlation: its orbit average should vanish.

use std::sync::Arc;

use s3_core::fields::{Axis, Mode, TrigField, VectorField};
use s3_core::maps::{evolve_orbit, perturbed_cat_map, Direction};
use s3_core::pipeline::{compute_fields, FieldOptions, Windows};
use s3_core::torus::TorusPoint;

fn main() -> s3_core::Result<()> {
    let shape: Arc<dyn VectorField> = Arc::new(TrigField::zero().with(Axis::Y, Mode::sin(1.0, 2, 1)));
    let map = perturbed_cat_map(0.05, shape.clone())?;
    let w = Windows::default();
    let n = 200_000;
    let pts = evolve_orbit(&map, TorusPoint::new(0.123, 0.456), w.history() + n, Direction::Forward)?.into_forward_points();
    let f = compute_fields(&map, pts, shape.as_ref(), &FieldOptions::new(w))?;

    let rho: Vec<f64> = (f.start..f.len()).map(|i| f.rho(i)).collect();
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    let rms = (rho.iter().map(|r| r * r).sum::<f64>() / rho.len() as f64).sqrt();
    println!("rho over {} points: mean {mean:.2e}, rms {rms:.4}", rho.len());
    println!("rho0 residual {:.2e}, contraction {:.4}", f.density.rho0_residual, f.density.contraction);

    let d = &f.density;
    for k in (f.start..f.start + 5).chain([f.len() - 1]) {
        println!("  k = {k:>6}  rho0 = {:>9.5}  rho = {:>9.5}", d.rho0[k], d.rho[k]);
    }
    Ok(())
}
