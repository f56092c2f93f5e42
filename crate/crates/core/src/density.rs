//! The density `rho` with `mu(Y g) = mu(g rho)` for `Y = a X_u`:
//! `rho = a rho_0 - X_u a`, where `(I - L_h) rho_0 = -X_u h / h` and
//! `L_h u(x) = h(x) u(T^{-1} x)`.

use crate::cocycle::UnstableFrame;
use crate::error::Result;
use crate::neumann::neumann_solve;
use crate::split::SplitFields;

#[derive(Debug, Clone)]
pub struct DensityField {
    pub rho0: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho0_start: usize,
    /// First index where `rho` is defined.
    pub start: usize,
    pub rho0_residual: f64,
    pub contraction: f64,
}

#[derive(Debug, Clone)]
pub struct Rho0Solution {
    pub values: Vec<f64>,
    pub start: usize,
    pub max_residual: f64,
    pub contraction: f64,
}

/// Scalar solve for `rho_0` on `h` and `X_u h` along `n_terms` backward steps.
pub fn solve_rho0_raw(h: &[f64], xu_h: &[f64], first: usize, n_terms: usize) -> Result<Rho0Solution> {
    let source: Vec<f64> = xu_h.iter().zip(h).map(|(d, h)| -d / h).collect();
    let sol = neumann_solve("rho0", |i, u: &f64| h[i] * u, &source, first, n_terms)?;
    Ok(Rho0Solution {
        values: sol.values,
        start: sol.start,
        max_residual: sol.max_residual,
        contraction: sol.contraction,
    })
}

pub fn solve_rho0(frame: &UnstableFrame, n_terms: usize) -> Result<Rho0Solution> {
    solve_rho0_raw(&frame.h, &frame.xu_h, frame.xu_h_start, n_terms)
}

/// `rho = a rho_0 - X_u a`.
pub fn assemble_rho(a: f64, xu_a: f64, rho0: f64) -> f64 {
    a * rho0 - xu_a
}

pub fn density_field(frame: &UnstableFrame, split: &SplitFields, n_terms: usize) -> Result<DensityField> {
    let r0 = solve_rho0(frame, n_terms)?;
    let start = r0.start.max(split.start);
    let rho = (0..frame.len())
        .map(|i| {
            if i < start {
                f64::NAN
            } else {
                assemble_rho(split.a[i], split.xu_a[i], r0.values[i])
            }
        })
        .collect();
    Ok(DensityField {
        rho0: r0.values,
        rho,
        rho0_start: r0.start,
        start,
        rho0_residual: r0.max_residual,
        contraction: r0.contraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cocycle::FrameWindows;
    use crate::fields::{Axis, Mode, TrigField};
    use crate::maps::{cat_map, evolve_orbit, perturbed_cat_map, Direction, MapModel};
    use crate::split::{jet_decompose, DerivativeMode};
    use crate::torus::{TangentVector, TorusPoint};
    use std::sync::Arc;

    const W: FrameWindows = FrameWindows {
        n_o1: 40,
        curvature_terms: 40,
        curvature_tolerance: 1e-8,
    };

    fn frame_with_sign<M: MapModel>(m: &M, n: usize, flip: bool) -> UnstableFrame {
        let pts = evolve_orbit(m, TorusPoint::new(0.37, 0.91), n, Direction::Forward)
            .unwrap()
            .points;
        UnstableFrame::build_with_sign(m, pts, TangentVector::new(1.0, 0.0), W, flip).unwrap()
    }

    fn sine_y() -> TrigField {
        TrigField::zero().with(Axis::Y, Mode::sin(1.0, 1, 0))
    }

    #[test]
    fn cat_map_rho0_vanishes() {
        let fr = frame_with_sign(&cat_map(), 200, false);
        let r = solve_rho0(&fr, 40).unwrap();
        assert!(r.values[r.start..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_inputs_sum_geometric_series() {
        let c = 0.3;
        let h = vec![0.5; 100];
        let xu_h: Vec<f64> = h.iter().map(|h| c * h).collect();
        let r = solve_rho0_raw(&h, &xu_h, 0, 60).unwrap();
        for v in &r.values[r.start..] {
            assert!((v + 2.0 * c).abs() < 1e-14);
        }
    }

    #[test]
    fn assemble_reductions() {
        assert_eq!(assemble_rho(0.0, 0.0, 1.3), 0.0);
        assert_eq!(assemble_rho(2.5, -0.4, 0.0), 0.4);
        assert_eq!(assemble_rho(2.0, 1.0, 3.0), 5.0);
    }

    #[test]
    fn perturbed_rho0_matches_longer_window() {
        let m = perturbed_cat_map(1e-2, Arc::new(sine_y())).unwrap();
        let fr = frame_with_sign(&m, 300, false);
        let r40 = solve_rho0(&fr, 40).unwrap();
        let r80 = solve_rho0(&fr, 80).unwrap();
        assert!(r40.max_residual < 1e-8);
        for i in r80.start..fr.len() {
            assert!((r40.values[i] - r80.values[i]).abs() < 1e-10);
        }
        assert!(r40.values[r40.start..].iter().any(|v| v.abs() > 1e-4));
    }

    #[test]
    fn rho_is_invariant_under_sign_flip() {
        let m = perturbed_cat_map(0.05, Arc::new(sine_y())).unwrap();
        let x = TrigField::zero()
            .with(Axis::X, Mode::cos(0.3, 1, 1))
            .with(Axis::Y, Mode::sin(0.7, 0, 1));
        let fa = frame_with_sign(&m, 250, false);
        let fb = frame_with_sign(&m, 250, true);
        let sa = jet_decompose(&fa, &x, DerivativeMode::Auto, 40).unwrap();
        let sb = jet_decompose(&fb, &x, DerivativeMode::Auto, 40).unwrap();
        let da = density_field(&fa, &sa, 40).unwrap();
        let db = density_field(&fb, &sb, 40).unwrap();
        for i in da.start..fa.len() {
            assert!((da.rho[i] - db.rho[i]).abs() < 1e-10);
            assert!((sa.a[i] + sb.a[i]).abs() < 1e-10);
        }
    }
}
