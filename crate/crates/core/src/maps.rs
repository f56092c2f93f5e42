//! Map models on the torus and orbit generation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, S3Error};
use crate::fields::VectorField;
use crate::torus::{wrap_centered, Mat2, TangentVector, TorusPoint};

/// A torus diffeomorphism with first and second derivatives.
///
/// Implementations are pure and shareable across threads.
pub trait MapModel: Send + Sync {
    fn forward(&self, p: TorusPoint) -> TorusPoint;

    fn inverse(&self, p: TorusPoint) -> Result<TorusPoint>;

    /// `d_p T`.
    fn jacobian(&self, p: TorusPoint) -> Mat2;

    /// `d^2_p T (u, v)`.
    fn hessian_action(&self, p: TorusPoint, u: &TangentVector, v: &TangentVector) -> TangentVector;

    /// Bilinear map `v -> d^2_p T (u, v)` as a matrix.
    fn hessian_matrix(&self, p: TorusPoint, u: &TangentVector) -> Mat2 {
        Mat2::from_columns(&[
            self.hessian_action(p, u, &TangentVector::x()),
            self.hessian_action(p, u, &TangentVector::y()),
        ])
    }
}

impl<M: MapModel + ?Sized> MapModel for Arc<M> {
    fn forward(&self, p: TorusPoint) -> TorusPoint {
        (**self).forward(p)
    }
    fn inverse(&self, p: TorusPoint) -> Result<TorusPoint> {
        (**self).inverse(p)
    }
    fn jacobian(&self, p: TorusPoint) -> Mat2 {
        (**self).jacobian(p)
    }
    fn hessian_action(&self, p: TorusPoint, u: &TangentVector, v: &TangentVector) -> TangentVector {
        (**self).hessian_action(p, u, v)
    }
    fn hessian_matrix(&self, p: TorusPoint, u: &TangentVector) -> Mat2 {
        (**self).hessian_matrix(p, u)
    }
}

/// How second derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HessianMode {
    #[default]
    Analytic,
    FiniteDifference,
}

const HESSIAN_FD_STEP: f64 = 1e-5;

/// Central differences of the Jacobian along `u`, applied to `v`.
pub fn fd_hessian_action<M: MapModel + ?Sized>(
    model: &M,
    p: TorusPoint,
    u: &TangentVector,
    v: &TangentVector,
) -> TangentVector {
    let h = HESSIAN_FD_STEP;
    (model.jacobian(p.shifted(&(u * h))) - model.jacobian(p.shifted(&(-u * h)))) * v / (2.0 * h)
}

/// Wraps any model and replaces its Hessian by finite differences of the
/// Jacobian.
pub struct FdHessian<M>(pub M);

impl<M: MapModel> MapModel for FdHessian<M> {
    fn forward(&self, p: TorusPoint) -> TorusPoint {
        self.0.forward(p)
    }
    fn inverse(&self, p: TorusPoint) -> Result<TorusPoint> {
        self.0.inverse(p)
    }
    fn jacobian(&self, p: TorusPoint) -> Mat2 {
        self.0.jacobian(p)
    }
    fn hessian_action(&self, p: TorusPoint, u: &TangentVector, v: &TangentVector) -> TangentVector {
        fd_hessian_action(&self.0, p, u, v)
    }
}

/// Hyperbolic toral automorphism `p -> A p mod 1` for an integer matrix with
/// determinant +-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatMap {
    matrix: [[i64; 2]; 2],
    inverse: [[i64; 2]; 2],
}

/// Closed-form eigen-data of a cat map.
#[derive(Debug, Clone, Copy)]
pub struct CatEigen {
    pub lambda_u: f64,
    pub lambda_s: f64,
    /// Unit unstable eigenvector, first component >= 0.
    pub unstable: TangentVector,
    /// Unit stable eigenvector, first component >= 0.
    pub stable: TangentVector,
}

impl CatMap {
    pub fn new(matrix: [[i64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        let det = a * d - b * c;
        if det.abs() != 1 {
            return Err(S3Error::InvalidConfig(format!(
                "cat map matrix must have determinant +-1, got {det}"
            )));
        }
        let trace = a + d;
        // Hyperbolic iff |tr| > 2 for det = 1, tr != 0 for det = -1.
        if (det == 1 && trace.abs() <= 2) || (det == -1 && trace == 0) {
            return Err(S3Error::InvalidConfig(format!(
                "cat map matrix {matrix:?} is not hyperbolic"
            )));
        }
        let inverse = [[d * det, -b * det], [-c * det, a * det]];
        Ok(Self { matrix, inverse })
    }

    pub fn matrix(&self) -> Mat2 {
        let m = self.matrix;
        Mat2::new(m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64)
    }

    fn apply(m: &[[i64; 2]; 2], p: TorusPoint) -> TorusPoint {
        TorusPoint::new(
            m[0][0] as f64 * p.x + m[0][1] as f64 * p.y,
            m[1][0] as f64 * p.x + m[1][1] as f64 * p.y,
        )
    }

    pub fn inverse_exact(&self, p: TorusPoint) -> TorusPoint {
        Self::apply(&self.inverse, p)
    }

    pub fn eigen(&self) -> CatEigen {
        let a = self.matrix();
        let tr = a.trace();
        let det = a.determinant();
        let disc = (tr * tr - 4.0 * det).sqrt();
        let (l1, l2) = ((tr + disc) / 2.0, (tr - disc) / 2.0);
        let (lu, ls) = if l1.abs() > l2.abs() { (l1, l2) } else { (l2, l1) };
        let eigvec = |l: f64| {
            // (A - l I) v = 0 with v = (b, l - a) or (l - d, c).
            let b = a[(0, 1)];
            let v = if b != 0.0 {
                TangentVector::new(b, l - a[(0, 0)])
            } else {
                TangentVector::new(l - a[(1, 1)], a[(1, 0)])
            };
            canonical_sign(v.normalize())
        };
        CatEigen {
            lambda_u: lu,
            lambda_s: ls,
            unstable: eigvec(lu),
            stable: eigvec(ls),
        }
    }
}

/// Flip so the first component is positive (second component on ties).
pub fn canonical_sign(v: TangentVector) -> TangentVector {
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        -v
    } else {
        v
    }
}

/// The map `(x, y) -> (2x + y, x + y) mod 1`.
pub fn cat_map() -> CatMap {
    CatMap::new([[2, 1], [1, 1]]).expect("the standard cat map is hyperbolic")
}

impl MapModel for CatMap {
    fn forward(&self, p: TorusPoint) -> TorusPoint {
        Self::apply(&self.matrix, p)
    }

    fn inverse(&self, p: TorusPoint) -> Result<TorusPoint> {
        Ok(self.inverse_exact(p))
    }

    fn jacobian(&self, _p: TorusPoint) -> Mat2 {
        self.matrix()
    }

    fn hessian_action(&self, _p: TorusPoint, _u: &TangentVector, _v: &TangentVector) -> TangentVector {
        TangentVector::zeros()
    }

    fn hessian_matrix(&self, _p: TorusPoint, _u: &TangentVector) -> Mat2 {
        Mat2::zeros()
    }
}

const NEWTON_MAX_ITERATIONS: usize = 50;
const NEWTON_TOLERANCE: f64 = 1e-13;
const FIELD_FD_STEP: f64 = 1e-6;
const DETERMINANT_FLOOR: f64 = 1e-3;

/// `T_t = T + t X o T` for a cat map `T`.
pub struct PerturbedCatMap {
    base: CatMap,
    t: f64,
    field: Arc<dyn VectorField>,
    hessian: HessianMode,
}

/// Jacobian of a field, analytic when available and central differences
/// otherwise.
pub fn field_jacobian(field: &dyn VectorField, p: TorusPoint) -> Mat2 {
    field.jacobian(p).unwrap_or_else(|| {
        let h = FIELD_FD_STEP;
        let dx = (field.value(TorusPoint::new(p.x + h, p.y))
            - field.value(TorusPoint::new(p.x - h, p.y)))
            / (2.0 * h);
        let dy = (field.value(TorusPoint::new(p.x, p.y + h))
            - field.value(TorusPoint::new(p.x, p.y - h)))
            / (2.0 * h);
        Mat2::from_columns(&[dx, dy])
    })
}

/// Build `T_t = T + t X o T` around the standard cat map.
pub fn perturbed_cat_map(t: f64, field: Arc<dyn VectorField>) -> Result<PerturbedCatMap> {
    PerturbedCatMap::new(cat_map(), t, field, HessianMode::Analytic)
}

impl PerturbedCatMap {
    /// Checks that `det(I + t dX)` stays away from zero on a 64x64 grid.
    pub fn new(
        base: CatMap,
        t: f64,
        field: Arc<dyn VectorField>,
        hessian: HessianMode,
    ) -> Result<Self> {
        let grid = 64;
        let mut min_det = f64::INFINITY;
        for i in 0..grid {
            for j in 0..grid {
                let p = TorusPoint::new(i as f64 / grid as f64, j as f64 / grid as f64);
                let d = (Mat2::identity() + field_jacobian(field.as_ref(), p) * t).determinant();
                min_det = min_det.min(d);
            }
        }
        if min_det < DETERMINANT_FLOOR {
            return Err(S3Error::SingularPerturbation {
                determinant: min_det,
            });
        }
        Ok(Self {
            base,
            t,
            field,
            hessian,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn base(&self) -> &CatMap {
        &self.base
    }

    pub fn field(&self) -> &Arc<dyn VectorField> {
        &self.field
    }

    fn analytic_hessian(&self, p: TorusPoint, u: &TangentVector, v: &TangentVector) -> Option<TangentVector> {
        let a = self.base.matrix();
        let z = self.base.forward(p);
        self.field
            .hessian_action(z, &(a * u), &(a * v))
            .map(|h| h * self.t)
    }
}

impl MapModel for PerturbedCatMap {
    fn forward(&self, p: TorusPoint) -> TorusPoint {
        let z = self.base.forward(p);
        z.shifted(&(self.field.value(z) * self.t))
    }

    /// Newton iteration on `z + t X(z) = q` seeded with `z = q`, then
    /// `p = A^{-1} z`.
    fn inverse(&self, q: TorusPoint) -> Result<TorusPoint> {
        let mut z = q;
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let g = z.to_vector() + self.field.value(z) * self.t - q.to_vector();
            let r = TangentVector::new(wrap_centered(g[0]), wrap_centered(g[1]));
            if r.norm() < NEWTON_TOLERANCE {
                return Ok(self.base.inverse_exact(z));
            }
            let jac = Mat2::identity() + field_jacobian(self.field.as_ref(), z) * self.t;
            let step = jac
                .lu()
                .solve(&r)
                .ok_or(S3Error::InversionFailure { point: q, iterations: 0 })?;
            z = z.shifted(&(-step));
        }
        Err(S3Error::InversionFailure {
            point: q,
            iterations: NEWTON_MAX_ITERATIONS,
        })
    }

    fn jacobian(&self, p: TorusPoint) -> Mat2 {
        let z = self.base.forward(p);
        (Mat2::identity() + field_jacobian(self.field.as_ref(), z) * self.t) * self.base.matrix()
    }

    fn hessian_action(&self, p: TorusPoint, u: &TangentVector, v: &TangentVector) -> TangentVector {
        match self.hessian {
            HessianMode::Analytic => self
                .analytic_hessian(p, u, v)
                .unwrap_or_else(|| fd_hessian_action(self, p, u, v)),
            HessianMode::FiniteDifference => fd_hessian_action(self, p, u, v),
        }
    }
}

/// Tangent of the family `s -> T_{t+s}` at the map's own parameter, as a
/// vector field: `X(A T_t^{-1} x)`.
///
/// At `t = 0` this is the perturbation field itself.
pub struct FamilyTangent {
    pub map: Arc<PerturbedCatMap>,
}

impl FamilyTangent {
    pub fn new(map: Arc<PerturbedCatMap>) -> Self {
        Self { map }
    }

    fn lifted(&self, x: TorusPoint) -> TorusPoint {
        let q = self
            .map
            .inverse(x)
            .expect("family tangent requires an invertible map");
        self.map.base.forward(q)
    }
}

impl VectorField for FamilyTangent {
    fn value(&self, x: TorusPoint) -> TangentVector {
        self.map.field.value(self.lifted(x))
    }

    /// `dX(z) (I + t dX(z))^{-1}` where `z + t X(z) = x`.
    fn jacobian(&self, x: TorusPoint) -> Option<Mat2> {
        let z = self.lifted(x);
        let dx = field_jacobian(self.map.field.as_ref(), z);
        let inv = (Mat2::identity() + dx * self.map.t).try_inverse()?;
        Some(dx * inv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

/// `points[k]` is `T^k x0` (forward) or `T^{-k} x0` (backward).
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSegment {
    pub points: Vec<TorusPoint>,
    pub direction: Direction,
}

impl OrbitSegment {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in increasing time; a backward segment is reversed so that its
    /// last entry is the starting point.
    pub fn into_forward_points(self) -> Vec<TorusPoint> {
        match self.direction {
            Direction::Forward => self.points,
            Direction::Backward => {
                let mut p = self.points;
                p.reverse();
                p
            }
        }
    }

    /// Largest torus distance between `T(points[k])` and `points[k + 1]` in
    /// time order.
    pub fn consistency_error<M: MapModel + ?Sized>(&self, model: &M) -> f64 {
        self.points
            .windows(2)
            .map(|w| match self.direction {
                Direction::Forward => model.forward(w[0]).distance(w[1]),
                Direction::Backward => model.forward(w[1]).distance(w[0]),
            })
            .fold(0.0, f64::max)
    }
}

/// Returns `n + 1` points starting at `x0`.
pub fn evolve_orbit<M: MapModel + ?Sized>(
    model: &M,
    x0: TorusPoint,
    n: usize,
    direction: Direction,
) -> Result<OrbitSegment> {
    if n == 0 {
        return Err(S3Error::InvalidConfig("orbit length must be positive".into()));
    }
    let mut points = Vec::with_capacity(n + 1);
    points.push(x0);
    let mut p = x0;
    for _ in 0..n {
        p = match direction {
            Direction::Forward => model.forward(p),
            Direction::Backward => model.inverse(p)?,
        };
        points.push(p);
    }
    Ok(OrbitSegment { points, direction })
}
