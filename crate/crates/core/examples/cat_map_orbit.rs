//! Orbits of the cat map and of a perturbed member of its family.
//!
//! ```text
//! cargo run --release --example cat_map_orbit
//! ```

use std::sync::Arc;

use s3_core::export::write_orbit_csv;
use s3_core::fields::{Axis, Mode, TrigField, VectorField};
use s3_core::maps::{cat_map, evolve_orbit, perturbed_cat_map, Direction, MapModel};
use s3_core::torus::TorusPoint;

fn main() -> s3_core::Result<()> {
    let cat = cat_map();
    let e = cat.eigen();
    println!("cat map: lambda_u = {:.6}, lambda_s = {:.6}", e.lambda_u, e.lambda_s);
    println!("unstable direction ({:.6}, {:.6})", e.unstable[0], e.unstable[1]);

    // T_t = A + t (0, sin 2 pi x) o A
    let field: Arc<dyn VectorField> = Arc::new(TrigField::zero().with(Axis::Y, Mode::sin(1.0, 1, 0)));
    let map = perturbed_cat_map(0.1, field)?;

    let x0 = TorusPoint::new(0.2, 0.7);
    let forward = evolve_orbit(&map, x0, 200, Direction::Forward)?;
    println!("forward orbit: {} points, consistency {:.2e}", forward.len(), forward.consistency_error(&map));

    // Walking back lands on the start again, up to roundoff amplified by
    // lambda_u per step.
    for n in [10, 20, 30] {
        let back = evolve_orbit(&map, forward.points[n], n, Direction::Backward)?;
        println!("return error after {n} steps back: {:.2e}", back.points[n].distance(x0));
    }

    let det = map.jacobian(x0).determinant();
    println!("det dT at x0 = {det:.12}");

    let mut csv = Vec::new();
    write_orbit_csv(&mut csv, &forward.points[..6])?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}
