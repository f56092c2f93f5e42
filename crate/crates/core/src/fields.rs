//! Perturbation vector fields `X` and scalar observables `f`.
//!
//! The built-in families are finite trigonometric sums on the torus, which
//! covers every field and observable used by the examples and the test
//! suite and keeps all derivatives analytic.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::maps::MapModel;
use crate::torus::{Mat2, TangentVector, TorusPoint};

/// Smooth periodic vector field on the torus.
pub trait VectorField: Send + Sync {
    fn value(&self, p: TorusPoint) -> TangentVector;

    /// Analytic Jacobian `dX` (column `j` is `d X / d x_j`), when known.
    fn jacobian(&self, _p: TorusPoint) -> Option<Mat2> {
        None
    }

    /// Analytic second derivative `d^2 X (u, v)`, when known.
    fn hessian_action(
        &self,
        _p: TorusPoint,
        _u: &TangentVector,
        _v: &TangentVector,
    ) -> Option<TangentVector> {
        None
    }
}

/// Scalar observable with gradient.
pub trait Observable: Send + Sync {
    fn value(&self, p: TorusPoint) -> f64;
    fn gradient(&self, p: TorusPoint) -> TangentVector;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    #[default]
    Sin,
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// One mode `amplitude * wave(2 pi (kx x + ky y) + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub amplitude: f64,
    pub kx: i64,
    pub ky: i64,
    #[serde(default)]
    pub phase: f64,
    #[serde(default)]
    pub wave: Wave,
}

impl Mode {
    pub fn sin(amplitude: f64, kx: i64, ky: i64) -> Self {
        Self {
            amplitude,
            kx,
            ky,
            phase: 0.0,
            wave: Wave::Sin,
        }
    }

    pub fn cos(amplitude: f64, kx: i64, ky: i64) -> Self {
        Self {
            wave: Wave::Cos,
            ..Self::sin(amplitude, kx, ky)
        }
    }

    fn wavevector(&self) -> TangentVector {
        TangentVector::new(TAU * self.kx as f64, TAU * self.ky as f64)
    }

    fn angle(&self, p: TorusPoint) -> f64 {
        TAU * (self.kx as f64 * p.x + self.ky as f64 * p.y) + self.phase
    }

    /// Value, first and second derivative of the wave at the mode's angle.
    fn wave_jet(&self, p: TorusPoint) -> (f64, f64, f64) {
        let (s, c) = self.angle(p).sin_cos();
        match self.wave {
            Wave::Sin => (s, c, -s),
            Wave::Cos => (c, -s, -c),
        }
    }

    pub fn value(&self, p: TorusPoint) -> f64 {
        self.amplitude * self.wave_jet(p).0
    }

    pub fn gradient(&self, p: TorusPoint) -> TangentVector {
        self.wavevector() * (self.amplitude * self.wave_jet(p).1)
    }

    pub fn hessian_action(&self, p: TorusPoint, u: &TangentVector, v: &TangentVector) -> f64 {
        let k = self.wavevector();
        self.amplitude * self.wave_jet(p).2 * k.dot(u) * k.dot(v)
    }
}

/// Component-wise trigonometric vector field plus a constant offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrigField {
    #[serde(default)]
    pub constant: [f64; 2],
    #[serde(default)]
    pub terms: Vec<FieldMode>,
}

/// A [`Mode`] attached to one component of a vector field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMode {
    pub component: Axis,
    #[serde(flatten)]
    pub mode: Mode,
}

impl TrigField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: [f64; 2]) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn with(mut self, component: Axis, mode: Mode) -> Self {
        self.terms.push(FieldMode { component, mode });
        self
    }

    pub fn is_zero(&self) -> bool {
        self.constant == [0.0, 0.0] && self.terms.iter().all(|t| t.mode.amplitude == 0.0)
    }

    /// Linear combination `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &TrigField, beta: f64) -> TrigField {
        fn scale(f: &TrigField, s: f64) -> impl Iterator<Item = FieldMode> + '_ {
            f.terms.iter().map(move |t| FieldMode {
                component: t.component,
                mode: Mode {
                    amplitude: s * t.mode.amplitude,
                    ..t.mode
                },
            })
        }
        TrigField {
            constant: [
                alpha * self.constant[0] + beta * other.constant[0],
                alpha * self.constant[1] + beta * other.constant[1],
            ],
            terms: scale(self, alpha).chain(scale(other, beta)).collect(),
        }
    }
}

impl VectorField for TrigField {
    fn value(&self, p: TorusPoint) -> TangentVector {
        let mut out = TangentVector::new(self.constant[0], self.constant[1]);
        for t in &self.terms {
            out[t.component.index()] += t.mode.value(p);
        }
        out
    }

    fn jacobian(&self, p: TorusPoint) -> Option<Mat2> {
        let mut out = Mat2::zeros();
        for t in &self.terms {
            let g = t.mode.gradient(p);
            let row = t.component.index();
            out[(row, 0)] += g[0];
            out[(row, 1)] += g[1];
        }
        Some(out)
    }

    fn hessian_action(
        &self,
        p: TorusPoint,
        u: &TangentVector,
        v: &TangentVector,
    ) -> Option<TangentVector> {
        let mut out = TangentVector::zeros();
        for t in &self.terms {
            out[t.component.index()] += t.mode.hessian_action(p, u, v);
        }
        Some(out)
    }
}

/// Trigonometric observable `constant + sum of modes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrigObservable {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<Mode>,
}

impl TrigObservable {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn mode(m: Mode) -> Self {
        Self {
            constant: 0.0,
            terms: vec![m],
        }
    }

    /// `cos 2 pi x`.
    pub fn cos_x() -> Self {
        Self::mode(Mode::cos(1.0, 1, 0))
    }

    /// `cos 2 pi y`.
    pub fn cos_y() -> Self {
        Self::mode(Mode::cos(1.0, 0, 1))
    }
}

impl Observable for TrigObservable {
    fn value(&self, p: TorusPoint) -> f64 {
        self.constant + self.terms.iter().map(|m| m.value(p)).sum::<f64>()
    }

    fn gradient(&self, p: TorusPoint) -> TangentVector {
        self.terms
            .iter()
            .fold(TangentVector::zeros(), |acc, m| acc + m.gradient(p))
    }
}

/// Exact coboundary `X = V0 - T_* V0`, with `T_* V0(x) = dT V0` evaluated at
/// `T^{-1} x`.
pub struct CoboundaryField {
    pub v0: TrigField,
    pub model: Arc<dyn MapModel>,
}

impl CoboundaryField {
    pub fn new(v0: TrigField, model: Arc<dyn MapModel>) -> Self {
        Self { v0, model }
    }

    fn preimage(&self, p: TorusPoint) -> TorusPoint {
        self.model
            .inverse(p)
            .expect("coboundary field requires an invertible map")
    }
}

impl VectorField for CoboundaryField {
    fn value(&self, p: TorusPoint) -> TangentVector {
        let q = self.preimage(p);
        self.v0.value(p) - self.model.jacobian(q) * self.v0.value(q)
    }

    fn jacobian(&self, p: TorusPoint) -> Option<Mat2> {
        let q = self.preimage(p);
        let jq = self.model.jacobian(q);
        let v0q = self.v0.value(q);
        let hess = Mat2::from_columns(&[
            self.model.hessian_action(q, &TangentVector::x(), &v0q),
            self.model.hessian_action(q, &TangentVector::y(), &v0q),
        ]);
        let inv = jq.try_inverse()?;
        Some(self.v0.jacobian(p)? - (hess + jq * self.v0.jacobian(q)?) * inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::cat_map;

    fn fd_gradient(f: &dyn Fn(TorusPoint) -> f64, p: TorusPoint) -> TangentVector {
        let h = 1e-6;
        TangentVector::new(
            (f(TorusPoint::new(p.x + h, p.y)) - f(TorusPoint::new(p.x - h, p.y))) / (2.0 * h),
            (f(TorusPoint::new(p.x, p.y + h)) - f(TorusPoint::new(p.x, p.y - h))) / (2.0 * h),
        )
    }

    fn sample_points() -> Vec<TorusPoint> {
        (0..17)
            .map(|i| TorusPoint::new(0.137 * i as f64 + 0.01, 0.291 * i as f64 + 0.03))
            .collect()
    }

    #[test]
    fn observable_gradient_matches_finite_differences() {
        let f = TrigObservable {
            constant: 0.3,
            terms: vec![Mode::cos(1.0, 1, 0), Mode::sin(0.4, 2, -1), Mode::cos(0.2, 0, 3)],
        };
        for p in sample_points() {
            let g = f.gradient(p);
            let fd = fd_gradient(&|q| f.value(q), p);
            assert!((g - fd).norm() <= 1e-6 * g.norm().max(1.0), "{g} vs {fd}");
        }
    }

    #[test]
    fn field_jacobian_and_hessian_match_finite_differences() {
        let x = TrigField::constant([0.1, -0.2])
            .with(Axis::Y, Mode::sin(1.0, 1, 0))
            .with(Axis::X, Mode::cos(0.3, 1, 2));
        let u = TangentVector::new(0.3, -0.7);
        let v = TangentVector::new(0.9, 0.2);
        let h = 1e-6;
        for p in sample_points() {
            let jac = x.jacobian(p).unwrap();
            for c in 0..2 {
                let fd = fd_gradient(&|q| x.value(q)[c], p);
                assert!((jac.row(c).transpose() - fd).norm() < 1e-6 * fd.norm().max(1.0));
            }
            let hv = x.hessian_action(p, &u, &v).unwrap();
            let fd = (x.jacobian(p.shifted(&(u * h))).unwrap()
                - x.jacobian(p.shifted(&(-u * h))).unwrap())
                * v
                / (2.0 * h);
            assert!((hv - fd).norm() < 1e-6 * hv.norm().max(1.0));
        }
    }

    #[test]
    fn field_is_periodic() {
        let x = TrigField::zero().with(Axis::X, Mode::sin(0.1, 0, 1));
        let a = x.value(TorusPoint { x: 0.3, y: 0.2 });
        let b = x.value(TorusPoint { x: 1.3, y: -0.8 });
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn coboundary_jacobian_matches_finite_differences() {
        let model: Arc<dyn MapModel> = Arc::new(cat_map());
        let x = CoboundaryField::new(TrigField::zero().with(Axis::X, Mode::sin(0.1, 0, 1)), model);
        for p in sample_points() {
            let jac = x.jacobian(p).unwrap();
            for c in 0..2 {
                let fd = fd_gradient(&|q| x.value(q)[c], p);
                assert!((jac.row(c).transpose() - fd).norm() < 1e-6 * fd.norm().max(1.0));
            }
        }
    }
}
