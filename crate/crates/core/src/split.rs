//! Splitting `X = Y + V - T_* V` with `Y` along the unstable direction.
//!
//! `V` solves `(I - L) V = X` for the lift `P dT`, where `P` projects onto the
//! orthogonal of `X_u`. The jet version carries `nabla_{X_u}` of every field
//! alongside its value through the block-triangular lift.

use serde::{Deserialize, Serialize};

use crate::cocycle::UnstableFrame;
use crate::error::{Result, S3Error};
use crate::fields::VectorField;
use crate::maps::field_jacobian;
use crate::neumann::{neumann_solve, Fiber, JetVector};
use crate::torus::{Mat2, TangentVector};

/// Step used for central differences of `X` along the unstable line.
pub const FIELD_FD_STEP: f64 = 1e-5;

/// How `nabla_{X_u} X` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    /// Analytic Jacobian if the field has one, central differences otherwise.
    #[default]
    Auto,
    Analytic,
    FiniteDifference,
    Disabled,
}

/// Per-point decomposition output. Entries before `start` are NaN.
#[derive(Debug, Clone)]
pub struct SplitFields {
    /// `V`, with `dv` set to NaN for a values-only solve.
    pub v: Vec<JetVector>,
    /// `T_* V`, i.e. `dT V` at the previous point.
    pub pushed_v: Vec<JetVector>,
    /// `Y = a X_u`.
    pub y: Vec<JetVector>,
    /// `a = <X_u, X - V + T_* V>`.
    pub a: Vec<f64>,
    /// `X_u a`, NaN for a values-only solve.
    pub xu_a: Vec<f64>,
    /// `|X - Y - V + T_* V|`, the part of `X - V + T_* V` off the unstable line.
    pub residual: Vec<f64>,
    pub start: usize,
    pub max_residual: f64,
    /// Measured per-step contraction of the `P dT` lift.
    pub contraction: f64,
}

impl SplitFields {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

fn field_values(frame: &UnstableFrame, field: &dyn VectorField, first: usize) -> Vec<TangentVector> {
    let mut out = vec![TangentVector::nan(); frame.len()];
    for (i, v) in out.iter_mut().enumerate().skip(first) {
        *v = field.value(frame.points[i]);
    }
    out
}

/// `nabla_{X_u} X` along the frame.
pub fn field_derivative(
    frame: &UnstableFrame,
    field: &dyn VectorField,
    mode: DerivativeMode,
    first: usize,
) -> Result<Vec<TangentVector>> {
    let analytic = match mode {
        DerivativeMode::Disabled => return Err(S3Error::DerivativeUnavailable),
        DerivativeMode::Analytic => {
            if field.jacobian(frame.points[first]).is_none() {
                return Err(S3Error::DerivativeUnavailable);
            }
            true
        }
        DerivativeMode::Auto => field.jacobian(frame.points[first]).is_some(),
        DerivativeMode::FiniteDifference => false,
    };
    let mut out = vec![TangentVector::nan(); frame.len()];
    for (i, d) in out.iter_mut().enumerate().skip(first) {
        let p = frame.points[i];
        let u = frame.xu[i];
        *d = if analytic {
            field_jacobian(field, p) * u
        } else {
            let e = u * FIELD_FD_STEP;
            (field.value(p.shifted(&e)) - field.value(p.shifted(&-e))) / (2.0 * FIELD_FD_STEP)
        };
    }
    Ok(out)
}

fn check_window(frame: &UnstableFrame, n_terms: usize) -> Result<usize> {
    let first = frame.curvature_start;
    let needed = first + n_terms + 1;
    if frame.len() < needed {
        return Err(S3Error::OrbitTooShort {
            needed,
            got: frame.len(),
        });
    }
    Ok(first)
}

/// Values-only decomposition with `n_terms` Neumann terms.
pub fn decompose_field(frame: &UnstableFrame, field: &dyn VectorField, n_terms: usize) -> Result<SplitFields> {
    let first = check_window(frame, n_terms)?;
    let x = field_values(frame, field, first);
    let pj = &frame.lift.proj_jacobian;
    let sol = neumann_solve("decomposition", |i, v: &TangentVector| pj[i] * v, &x, first, n_terms)?;
    let n = frame.len();
    let nan = JetVector::nan();
    let mut out = SplitFields {
        v: vec![nan; n],
        pushed_v: vec![nan; n],
        y: vec![nan; n],
        a: vec![f64::NAN; n],
        xu_a: vec![f64::NAN; n],
        residual: vec![f64::NAN; n],
        start: sol.start + 1,
        max_residual: 0.0,
        contraction: sol.contraction,
    };
    for i in out.start..n {
        let v = sol.values[i];
        let pushed = frame.lift.jacobian[i - 1] * sol.values[i - 1];
        let y_raw = x[i] - v + pushed;
        let u = frame.xu[i];
        let a = u.dot(&y_raw);
        let res = (y_raw - u * a).norm();
        out.v[i] = JetVector::new(v, TangentVector::nan());
        out.pushed_v[i] = JetVector::new(pushed, TangentVector::nan());
        out.y[i] = JetVector::new(u * a, TangentVector::nan());
        out.a[i] = a;
        out.residual[i] = res;
        out.max_residual = out.max_residual.max(res);
    }
    Ok(out)
}

/// Decomposition with unstable derivatives of `V`, `Y` and `a`.
pub fn jet_decompose(
    frame: &UnstableFrame,
    field: &dyn VectorField,
    mode: DerivativeMode,
    n_terms: usize,
) -> Result<SplitFields> {
    let first = check_window(frame, n_terms)?;
    let x = field_values(frame, field, first);
    let dx = field_derivative(frame, field, mode, first)?;
    let source: Vec<JetVector> = x.iter().zip(&dx).map(|(v, d)| JetVector::new(*v, *d)).collect();
    let n = frame.len();
    let lift = &frame.lift;
    // Lower-left block of the jet lift.
    let coupling: Vec<Mat2> = (0..n)
        .map(|i| {
            if i <= first {
                return Mat2::repeat(f64::NAN);
            }
            let u = frame.xu[i];
            let c = frame.curvature[i];
            let dp = c * u.transpose() + u * c.transpose();
            lift.projector[i] * lift.hessian_xu[i - 1] * frame.h[i] - dp * lift.jacobian[i - 1]
        })
        .collect();
    let step = |i: usize, j: &JetVector| {
        JetVector::new(
            lift.proj_jacobian[i] * j.v,
            lift.proj_jacobian[i] * j.dv * frame.h[i] + coupling[i] * j.v,
        )
    };
    let sol = neumann_solve("decomposition", step, &source, first, n_terms)?;
    let nan = JetVector::nan();
    let mut out = SplitFields {
        v: vec![nan; n],
        pushed_v: vec![nan; n],
        y: vec![nan; n],
        a: vec![f64::NAN; n],
        xu_a: vec![f64::NAN; n],
        residual: vec![f64::NAN; n],
        start: sol.start + 1,
        max_residual: 0.0,
        contraction: sol.contraction,
    };
    for i in out.start..n {
        let prev = sol.values[i - 1];
        let v = sol.values[i];
        let pushed = lift.jacobian[i - 1] * prev.v;
        let d_pushed = (lift.hessian_xu[i - 1] * prev.v + lift.jacobian[i - 1] * prev.dv) * frame.h[i];
        let y_raw = x[i] - v.v + pushed;
        let dy_raw = dx[i] - v.dv + d_pushed;
        let u = frame.xu[i];
        let c = frame.curvature[i];
        let a = u.dot(&y_raw);
        let xu_a = c.dot(&y_raw) + u.dot(&dy_raw);
        let res = (y_raw - u * a).norm();
        out.v[i] = v;
        out.pushed_v[i] = JetVector::new(pushed, d_pushed);
        out.y[i] = JetVector::new(u * a, u * xu_a + c * a);
        out.a[i] = a;
        out.xu_a[i] = xu_a;
        out.residual[i] = res;
        out.max_residual = out.max_residual.max(res);
    }
    Ok(out)
}
