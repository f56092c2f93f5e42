//! Unstable direction along orbits and the cocycle scalars built from it.
//!
//! * `X_u` by normalized power iteration of the pushforward,
//! * `h = <T_* X_u, X_u>^{-1}`, so that `h T_* X_u = X_u`,
//! * the curvature `nabla_{X_u} X_u`, solution of
//!   `(I - L) c = h^2 P T_* d^2T(X_u, X_u)` with the lift `h^2 P dT`,
//! * `X_u h`, obtained by differentiating the definition of `h`.
//!
//! All arrays are indexed like the forward orbit slice they were computed
//! on; entries before the corresponding `*_start` index are NaN.

use crate::error::{Result, S3Error};
use crate::maps::{canonical_sign, MapModel};
use crate::neumann::{neumann_solve, Fiber};
use crate::torus::{orthogonal_projector, Mat2, TangentVector, TorusPoint};

/// Angle below which two power iterates count as converged.
const ANGLE_FLOOR: f64 = 1e-13;
const DEGENERATE_RATIO: f64 = 0.95;
const DEGENERATE_STEPS: usize = 20;

#[derive(Debug, Clone)]
pub struct PowerIteration {
    /// Unit vectors, `directions[k]` sits over `points[k]`.
    pub directions: Vec<TangentVector>,
    /// Per-step ratios of the angle between the iterate and a companion
    /// iterate started from a rotated vector.
    pub ratios: Vec<f64>,
    /// Geometric mean of the informative ratios.
    pub measured_ratio: f64,
    /// `ceil(log(1e-12) / log(measured_ratio))`.
    pub recommended_burn_in: usize,
}

fn sin_angle(a: &TangentVector, b: &TangentVector) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).abs()
}

/// Normalized pushforward iteration `X^{k+1} = T_* X^k / |T_* X^k|` along a
/// forward-ordered orbit, with the first-positive-component sign convention.
pub fn power_iterate_unstable<M: MapModel + ?Sized>(
    model: &M,
    points: &[TorusPoint],
    x0: TangentVector,
) -> Result<PowerIteration> {
    if x0.norm() == 0.0 || !x0.norm().is_finite() {
        return Err(S3Error::DegenerateStart { step: 0 });
    }
    let mut directions = Vec::with_capacity(points.len());
    let mut current = canonical_sign(x0.normalize());
    let rot = nalgebra::Rotation2::new(1.0);
    let mut companion = Some(rot * current);
    let mut prev_angle = companion.map(|c| sin_angle(&current, &c)).unwrap_or(0.0);
    let mut ratios = Vec::new();
    let mut stalled = 0usize;
    directions.push(current);
    for k in 1..points.len() {
        let j = model.jacobian(points[k - 1]);
        current = canonical_sign((j * current).normalize());
        if let Some(c) = companion {
            let next = (j * c).normalize();
            let angle = sin_angle(&current, &next);
            let ratio = angle / prev_angle;
            ratios.push(ratio);
            stalled = if ratio > DEGENERATE_RATIO { stalled + 1 } else { 0 };
            if stalled >= DEGENERATE_STEPS {
                return Err(S3Error::DegenerateStart { step: k });
            }
            prev_angle = angle;
            companion = (angle > ANGLE_FLOOR).then_some(next);
        }
        directions.push(current);
    }
    let informative: Vec<f64> = {
        // Skip the transient first step and anything near round-off.
        let mut angle = 1.0;
        let mut out = Vec::new();
        for (i, r) in ratios.iter().enumerate() {
            angle *= r;
            if i > 0 && angle > 1e-11 && r.is_finite() && *r > 0.0 {
                out.push(r.ln());
            }
        }
        out
    };
    let measured_ratio = if informative.is_empty() {
        f64::NAN
    } else {
        (informative.iter().sum::<f64>() / informative.len() as f64).exp()
    };
    let recommended_burn_in = if measured_ratio.is_finite() && measured_ratio < 1.0 {
        ((1e-12f64).ln() / measured_ratio.ln()).ceil() as usize
    } else {
        points.len()
    };
    Ok(PowerIteration {
        directions,
        ratios,
        measured_ratio,
        recommended_burn_in,
    })
}

/// `h(x_k) = 1 / <dT_{x_{k-1}} X_u(x_{k-1}), X_u(x_k)>` for `k > start`.
pub fn compute_h<M: MapModel + ?Sized>(
    model: &M,
    points: &[TorusPoint],
    xu: &[TangentVector],
    start: usize,
) -> Result<Vec<f64>> {
    let mut h = vec![f64::NAN; points.len()];
    for k in start + 1..points.len() {
        let pushed = model.jacobian(points[k - 1]) * xu[k - 1];
        let s = pushed.dot(&xu[k]);
        if s.is_nan() || s <= 1.0 {
            return Err(S3Error::NonHyperbolicSample { index: k, value: s });
        }
        h[k] = 1.0 / s;
    }
    Ok(h)
}

/// Curvature solve output.
#[derive(Debug, Clone)]
pub struct CurvatureSolution {
    pub curvature: Vec<TangentVector>,
    pub start: usize,
    pub max_residual: f64,
    pub contraction: f64,
}

/// Per-index data reused by the curvature and decomposition lifts.
#[derive(Debug, Clone)]
pub struct LiftData {
    /// `dT` at `points[i]`.
    pub jacobian: Vec<Mat2>,
    /// `v -> d^2T_{x_i}(X_u(x_i), v)`.
    pub hessian_xu: Vec<Mat2>,
    /// Projector onto `X_u(x_i)^perp`.
    pub projector: Vec<Mat2>,
    /// `P_i dT_{x_{i-1}}`, the decomposition lift into fiber `i`.
    pub proj_jacobian: Vec<Mat2>,
}

impl LiftData {
    pub fn new<M: MapModel + ?Sized>(
        model: &M,
        points: &[TorusPoint],
        xu: &[TangentVector],
    ) -> Self {
        let jacobian: Vec<Mat2> = points.iter().map(|p| model.jacobian(*p)).collect();
        let hessian_xu = points
            .iter()
            .zip(xu)
            .map(|(p, u)| model.hessian_matrix(*p, u))
            .collect();
        let projector: Vec<Mat2> = xu.iter().map(orthogonal_projector).collect();
        let proj_jacobian = (0..points.len())
            .map(|i| {
                if i == 0 {
                    Mat2::repeat(f64::NAN)
                } else {
                    projector[i] * jacobian[i - 1]
                }
            })
            .collect();
        Self {
            jacobian,
            hessian_xu,
            projector,
            proj_jacobian,
        }
    }
}

/// Solve `(I - L) c = h^2 P d^2T(X_u, X_u)` with lift `h^2 P dT`, keeping
/// `n_terms` terms. `h` must be valid from `h_start`.
pub fn solve_curvature(
    lift: &LiftData,
    xu: &[TangentVector],
    h: &[f64],
    h_start: usize,
    n_terms: usize,
    tolerance: f64,
) -> Result<CurvatureSolution> {
    let n = xu.len();
    let mut source = vec![TangentVector::nan(); n];
    for i in h_start.max(1)..n {
        let second = lift.hessian_xu[i - 1] * xu[i - 1];
        source[i] = lift.projector[i] * second * (h[i] * h[i]);
    }
    let step = |i: usize, v: &TangentVector| lift.proj_jacobian[i] * v * (h[i] * h[i]);
    let sol = neumann_solve("curvature", step, &source, h_start.max(1), n_terms)?;
    if sol.max_residual > tolerance {
        return Err(S3Error::WindowTooShort {
            stage: "curvature",
            residual: sol.max_residual,
            tolerance,
        });
    }
    Ok(CurvatureSolution {
        curvature: sol.values,
        start: sol.start,
        max_residual: sol.max_residual,
        contraction: sol.contraction,
    })
}

/// `X_u h (x_k) = -h^3 <d^2T(X_u, X_u) + dT c, X_u(x_k)>` with every
/// derivative taken at `x_{k-1}`.
pub fn compute_xu_h(
    lift: &LiftData,
    xu: &[TangentVector],
    h: &[f64],
    curvature: &[TangentVector],
    curvature_start: usize,
) -> Vec<f64> {
    let mut out = vec![f64::NAN; xu.len()];
    for k in curvature_start + 1..xu.len() {
        let d_push = lift.hessian_xu[k - 1] * xu[k - 1] + lift.jacobian[k - 1] * curvature[k - 1];
        out[k] = -h[k].powi(3) * d_push.dot(&xu[k]);
    }
    out
}

/// Window lengths for the frame computation.
#[derive(Debug, Clone, Copy)]
pub struct FrameWindows {
    /// Power-iteration burn-in.
    pub n_o1: usize,
    /// Terms of the curvature series.
    pub curvature_terms: usize,
    pub curvature_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct FrameDiagnostics {
    pub power_ratio: f64,
    pub recommended_burn_in: usize,
    pub curvature_residual: f64,
    pub curvature_contraction: f64,
    /// Largest `|dT X_u|` seen, a proxy for the maximal expansion.
    pub max_expansion: f64,
    /// Largest running geometric mean of `h` over the frame.
    pub h_geometric_mean: f64,
}

/// `X_u`, `h`, curvature and `X_u h` along a forward orbit slice.
#[derive(Debug, Clone)]
pub struct UnstableFrame {
    pub points: Vec<TorusPoint>,
    pub xu: Vec<TangentVector>,
    pub xu_start: usize,
    pub h: Vec<f64>,
    pub curvature: Vec<TangentVector>,
    pub curvature_start: usize,
    pub xu_h: Vec<f64>,
    pub xu_h_start: usize,
    pub lift: LiftData,
    pub diagnostics: FrameDiagnostics,
}

impl UnstableFrame {
    pub fn build<M: MapModel + ?Sized>(
        model: &M,
        points: Vec<TorusPoint>,
        x0: TangentVector,
        windows: FrameWindows,
    ) -> Result<Self> {
        Self::build_with_sign(model, points, x0, windows, false)
    }

    /// As [`UnstableFrame::build`], optionally with the global sign of `X_u`
    /// reversed.
    pub fn build_with_sign<M: MapModel + ?Sized>(
        model: &M,
        points: Vec<TorusPoint>,
        x0: TangentVector,
        windows: FrameWindows,
        flip_sign: bool,
    ) -> Result<Self> {
        let needed = windows.n_o1 + windows.curvature_terms + 2;
        if points.len() < needed {
            return Err(S3Error::OrbitTooShort {
                needed,
                got: points.len(),
            });
        }
        let power = power_iterate_unstable(model, &points, x0)?;
        let xu_start = windows.n_o1;
        let mut xu = power.directions;
        for (k, v) in xu.iter_mut().enumerate() {
            if k < xu_start {
                *v = TangentVector::nan();
            } else if flip_sign {
                *v = -*v;
            }
        }
        let h = compute_h(model, &points, &xu, xu_start)?;
        let lift = LiftData::new(model, &points, &xu);
        let curv = solve_curvature(
            &lift,
            &xu,
            &h,
            xu_start + 1,
            windows.curvature_terms,
            windows.curvature_tolerance,
        )?;
        let xu_h = compute_xu_h(&lift, &xu, &h, &curv.curvature, curv.start);
        let max_expansion = (xu_start + 1..points.len())
            .map(|k| 1.0 / h[k])
            .fold(0.0, f64::max);
        let mut log_sum = 0.0;
        let mut h_geometric_mean: f64 = 0.0;
        for (n, k) in (xu_start + 1..points.len()).enumerate() {
            log_sum += h[k].ln();
            h_geometric_mean = h_geometric_mean.max((log_sum / (n + 1) as f64).exp());
        }
        Ok(Self {
            points,
            xu,
            xu_start,
            h,
            curvature: curv.curvature,
            curvature_start: curv.start,
            xu_h,
            xu_h_start: curv.start + 1,
            lift,
            diagnostics: FrameDiagnostics {
                power_ratio: power.measured_ratio,
                recommended_burn_in: power.recommended_burn_in,
                curvature_residual: curv.max_residual,
                curvature_contraction: curv.contraction,
                max_expansion,
                h_geometric_mean,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{cat_map, evolve_orbit, perturbed_cat_map, Direction};
    use crate::fields::{Axis, Mode, TrigField, VectorField};
    use std::sync::Arc;

    fn windows() -> FrameWindows {
        FrameWindows {
            n_o1: 40,
            curvature_terms: 40,
            curvature_tolerance: 1e-8,
        }
    }

    fn orbit<M: MapModel>(m: &M, n: usize) -> Vec<TorusPoint> {
        evolve_orbit(m, TorusPoint::new(0.1234, 0.5678), n, Direction::Forward)
            .unwrap()
            .points
    }

    fn sine_field() -> Arc<dyn VectorField> {
        Arc::new(TrigField::zero().with(Axis::Y, Mode::sin(1.0, 1, 0)))
    }

    #[test]
    fn cat_map_power_iteration_converges_to_eigenvector() {
        let t = cat_map();
        let e = t.eigen();
        let pts = orbit(&t, 60);
        let pi = power_iterate_unstable(&t, &pts, TangentVector::new(1.0, 0.0)).unwrap();
        assert!((pi.directions[50] - TangentVector::new(0.850_650_8, 0.525_731_1)).norm() < 1e-7);
        assert!((pi.directions[50] - e.unstable).norm() < 1e-14);
        let expected = e.lambda_s / e.lambda_u;
        assert!((expected - 0.145_898_0).abs() < 1e-7);
        assert!((pi.measured_ratio / expected - 1.0).abs() < 0.1, "{}", pi.measured_ratio);
        assert!(pi.recommended_burn_in <= 20);
    }

    #[test]
    fn exact_eigenvector_is_fixed() {
        let t = cat_map();
        let e = t.eigen();
        let pts = orbit(&t, 30);
        let pi = power_iterate_unstable(&t, &pts, e.unstable).unwrap();
        for d in &pi.directions {
            assert!((d - e.unstable).norm() < 1e-15);
        }
    }

    struct Shear;
    impl MapModel for Shear {
        fn forward(&self, p: TorusPoint) -> TorusPoint {
            p
        }
        fn inverse(&self, p: TorusPoint) -> Result<TorusPoint> {
            Ok(p)
        }
        fn jacobian(&self, _p: TorusPoint) -> Mat2 {
            Mat2::identity()
        }
        fn hessian_action(&self, _: TorusPoint, _: &TangentVector, _: &TangentVector) -> TangentVector {
            TangentVector::zeros()
        }
    }

    #[test]
    fn non_contracting_start_is_degenerate() {
        let pts = vec![TorusPoint::new(0.1, 0.1); 50];
        let err = power_iterate_unstable(&Shear, &pts, TangentVector::new(1.0, 0.0)).unwrap_err();
        assert!(matches!(err, S3Error::DegenerateStart { .. }));
    }

    #[test]
    fn identity_map_is_not_hyperbolic() {
        let pts = vec![TorusPoint::new(0.1, 0.1); 10];
        let xu = vec![TangentVector::x(); 10];
        assert!(matches!(
            compute_h(&Shear, &pts, &xu, 0),
            Err(S3Error::NonHyperbolicSample { index: 1, .. })
        ));
    }

    #[test]
    fn cat_map_frame_is_exact() {
        let t = cat_map();
        let e = t.eigen();
        let frame = UnstableFrame::build(&t, orbit(&t, 200), TangentVector::new(1.0, 0.0), windows()).unwrap();
        for k in frame.xu_h_start..frame.len() {
            assert!((frame.h[k] - 1.0 / e.lambda_u).abs() < 1e-12);
            assert!((frame.h[k] - 0.381_966_0).abs() < 1e-7);
            assert_eq!(frame.curvature[k], TangentVector::zeros());
            assert_eq!(frame.xu_h[k], 0.0);
        }
    }

    #[test]
    fn scalar_h_matches_eigenvalue_definition() {
        let t = cat_map();
        let e = t.eigen();
        let pts = orbit(&t, 4);
        let xu = vec![e.unstable; 5];
        let h = compute_h(&t, &pts, &xu, 0).unwrap();
        assert!((h[3] * e.lambda_u - 1.0).abs() < 1e-14);
    }

    #[test]
    fn perturbed_frame_invariants() {
        let m = perturbed_cat_map(1e-2, sine_field()).unwrap();
        let frame = UnstableFrame::build(&m, orbit(&m, 400), TangentVector::new(1.0, 0.0), windows()).unwrap();
        let lu_inv = 1.0 / cat_map().eigen().lambda_u;
        for k in frame.xu_h_start..frame.len() {
            assert!((frame.xu[k].norm() - 1.0).abs() < 1e-12);
            assert!(frame.curvature[k].dot(&frame.xu[k]).abs() < 1e-10);
            assert!((frame.h[k] - lu_inv).abs() <= 0.05);
            // Cocycle identity h dT X_u(prev) = X_u.
            let pushed = frame.lift.jacobian[k - 1] * frame.xu[k - 1] * frame.h[k];
            assert!((pushed - frame.xu[k]).norm() < 1e-12);
        }
        assert!(frame.diagnostics.h_geometric_mean < 1.0);
        assert!(frame.diagnostics.curvature_residual < 1e-8);
    }

    #[test]
    fn running_geometric_mean_of_h_is_below_one() {
        let m = perturbed_cat_map(0.05, sine_field()).unwrap();
        let frame = UnstableFrame::build(&m, orbit(&m, 500), TangentVector::new(1.0, 0.0), windows()).unwrap();
        let mut log_sum = 0.0;
        for (n, k) in (frame.xu_start + 1..frame.len()).enumerate() {
            log_sum += frame.h[k].ln();
            if n + 1 >= 50 {
                assert!((log_sum / (n + 1) as f64).exp() < 1.0);
            }
        }
    }

    #[test]
    fn short_curvature_window_is_flagged() {
        let m = perturbed_cat_map(0.05, sine_field()).unwrap();
        let w = FrameWindows {
            curvature_terms: 2,
            ..windows()
        };
        let err = UnstableFrame::build(&m, orbit(&m, 200), TangentVector::new(1.0, 0.0), w).unwrap_err();
        assert!(matches!(err, S3Error::WindowTooShort { stage: "curvature", .. }));
    }

    /// `X_u` and `h` at `y` from a fresh backward orbit, independent of the
    /// Neumann machinery.
    fn fresh_xu_h<M: MapModel>(m: &M, y: TorusPoint) -> (TangentVector, f64) {
        let back = evolve_orbit(m, y, 60, Direction::Backward).unwrap();
        let pts = back.into_forward_points();
        let pi = power_iterate_unstable(m, &pts, TangentVector::new(1.0, 0.0)).unwrap();
        let n = pts.len() - 1;
        let u = pi.directions[n];
        let prev = pi.directions[n - 1];
        (u, 1.0 / (m.jacobian(pts[n - 1]) * prev).dot(&u))
    }

    #[test]
    fn curvature_and_xu_h_match_finite_differences() {
        let m = perturbed_cat_map(1e-2, sine_field()).unwrap();
        let frame = UnstableFrame::build(&m, orbit(&m, 200), TangentVector::new(1.0, 0.0), windows()).unwrap();
        let eps = 1e-4;
        for k in [frame.xu_h_start + 3, frame.xu_h_start + 50, frame.len() - 1] {
            let x = frame.points[k];
            let u = frame.xu[k];
            let (up, hp) = fresh_xu_h(&m, x.shifted(&(u * eps)));
            let (um, hm) = fresh_xu_h(&m, x.shifted(&(u * -eps)));
            let fd_c = (up - um) / (2.0 * eps);
            let fd_h = (hp - hm) / (2.0 * eps);
            let c = frame.curvature[k];
            assert!((c - fd_c).norm() <= 1e-3 * fd_c.norm() + 1e-9, "{c} vs {fd_c}");
            let xh = frame.xu_h[k];
            assert!((xh - fd_h).abs() <= 1e-3 * fd_h.abs() + 1e-9, "{xh} vs {fd_h}");
            assert!(fd_c.norm() > 1e-3);
        }
    }

    #[test]
    fn zero_perturbation_has_zero_xu_h() {
        let m = perturbed_cat_map(0.0, sine_field()).unwrap();
        let frame = UnstableFrame::build(&m, orbit(&m, 150), TangentVector::new(1.0, 0.0), windows()).unwrap();
        assert!(frame.xu_h[frame.xu_h_start..].iter().all(|v| *v == 0.0));
    }
}
