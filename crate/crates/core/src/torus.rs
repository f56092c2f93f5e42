//! The flat unit 2-torus: points, tangent vectors and small linear algebra.
//!
//! A single global chart is used, so tangent spaces are all identified with
//! `R^2`, parallel transport is the identity and covariant derivatives are
//! ordinary directional derivatives.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Tangent vector in the global flat chart.
pub type TangentVector = Vector2<f64>;

/// Real 2x2 matrix (Jacobians, projectors, fiber lifts).
pub type Mat2 = Matrix2<f64>;

/// Point on `R^2 / Z^2`, coordinates kept in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

/// Reduce a real number into `[0, 1)`.
#[inline]
pub fn wrap_unit(v: f64) -> f64 {
    let r = v - v.floor();
    // `v - floor(v)` can round up to exactly 1.0 for tiny negative inputs.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed representative of `v` modulo 1 in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_centered(v: f64) -> f64 {
    v - (v + 0.5).floor()
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: wrap_unit(x),
            y: wrap_unit(y),
        }
    }

    pub fn from_vector(v: &TangentVector) -> Self {
        Self::new(v[0], v[1])
    }

    pub fn to_vector(self) -> TangentVector {
        TangentVector::new(self.x, self.y)
    }

    /// Translate by a tangent vector and reduce mod 1.
    pub fn shifted(self, v: &TangentVector) -> Self {
        Self::new(self.x + v[0], self.y + v[1])
    }

    /// Shortest displacement `other - self` over all integer shifts.
    pub fn displacement_to(self, other: TorusPoint) -> TangentVector {
        TangentVector::new(
            wrap_centered(other.x - self.x),
            wrap_centered(other.y - self.y),
        )
    }

    /// Flat torus distance.
    pub fn distance(self, other: TorusPoint) -> f64 {
        self.displacement_to(other).norm()
    }
}

/// Orthogonal projector onto the complement of the unit vector `u`.
#[inline]
pub fn orthogonal_projector(u: &TangentVector) -> Mat2 {
    Mat2::identity() - u * u.transpose()
}

/// Rotate by +90 degrees.
#[inline]
pub fn perp(v: &TangentVector) -> TangentVector {
    TangentVector::new(-v[1], v[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_handles_negative_zero_and_edges() {
        assert_eq!(wrap_unit(1.0), 0.0);
        assert_eq!(wrap_unit(-1e-18), 0.0);
        assert_eq!(wrap_unit(2.25), 0.25);
        assert!((wrap_unit(-0.25) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn distance_uses_shortest_shift() {
        let a = TorusPoint::new(0.05, 0.95);
        let b = TorusPoint::new(0.95, 0.05);
        assert!((a.distance(b) - (0.1f64 * 0.1 * 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn projector_kills_direction() {
        let u = TangentVector::new(0.6, 0.8);
        let p = orthogonal_projector(&u);
        assert!((p * u).norm() < 1e-15);
        assert!((p * perp(&u) - perp(&u)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn construction_reduces_into_unit_square(x in -50.0f64..50.0, y in -50.0f64..50.0) {
            let p = TorusPoint::new(x, y);
            prop_assert!((0.0..1.0).contains(&p.x));
            prop_assert!((0.0..1.0).contains(&p.y));
            prop_assert!(p.distance(TorusPoint::new(x + 3.0, y - 7.0)) < 1e-12);
        }
    }
}
