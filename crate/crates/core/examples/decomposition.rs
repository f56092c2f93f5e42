//! Split a perturbation into an unstable part and a coboundary,
//! `X = a Xu + V - T_* V`, and watch the residual fall with the window.

use std::sync::Arc;

use s3_core::export::write_split_csv;
use s3_core::fields::{Axis, Mode, TrigField, VectorField};
use s3_core::maps::{evolve_orbit, perturbed_cat_map, Direction};
use s3_core::pipeline::{compute_fields, FieldOptions, Windows};
use s3_core::torus::TorusPoint;

fn main() -> s3_core::Result<()> {
    let shape: Arc<dyn VectorField> = Arc::new(TrigField::zero().with(Axis::Y, Mode::sin(1.0, 2, 1)));
    let map = perturbed_cat_map(0.05, shape)?;
    let x = TrigField::zero()
        .with(Axis::X, Mode::cos(0.3, 1, 1))
        .with(Axis::Y, Mode::sin(0.5, 0, 1));

    println!("{:>6} {:>12} {:>10}", "window", "residual", "lift rate");
    for n in [4, 8, 16, 24, 40] {
        let w = Windows { n_o2: n, ..Windows::default() };
        let pts = evolve_orbit(&map, TorusPoint::new(0.4, 0.9), w.history() + 20, Direction::Forward)?.into_forward_points();
        let f = compute_fields(&map, pts, &x, &FieldOptions::new(w))?;
        println!("{n:>6} {:>12.3e} {:>10.4}", f.split.max_residual, f.split.contraction);
        if n == 40 {
            let mut csv = Vec::new();
            write_split_csv(&mut csv, &f.frame, &f.split)?;
            for line in String::from_utf8_lossy(&csv).lines().take(5) {
                println!("{line}");
            }
        }
    }
    Ok(())
}
