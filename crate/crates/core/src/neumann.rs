//! Truncated Neumann series for `(I - L) v = w` along an orbit.
//!
//! `L v (x) = lift(v(T^{-1} x))` for a fiberwise-linear lift of the map. On a
//! forward-ordered orbit slice, index `i` holds `T^i x_0` and `lift(i, .)`
//! maps the fiber over point `i - 1` to the fiber over point `i`. The
//! truncated solution keeps exactly `N` terms:
//!
//! ```text
//! v_N(x_j) = sum_{n=0}^{N-1} lift(j) ... lift(j-n+1) w(x_{j-n})
//! ```
//!
//! and is evaluated by Horner's rule over the private window `j-N+1 ..= j`.

use std::ops::{Add, Mul, Sub};

use nalgebra::Vector4;

use crate::error::{Result, S3Error};
use crate::torus::TangentVector;

/// A fiber value: scalar, tangent vector or jet.
pub trait Fiber:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn nan() -> Self;
    fn norm(&self) -> f64;
    fn basis() -> Vec<Self>;
}

impl Fiber for f64 {
    fn zero() -> Self {
        0.0
    }
    fn nan() -> Self {
        f64::NAN
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn basis() -> Vec<Self> {
        vec![1.0]
    }
}

impl Fiber for TangentVector {
    fn zero() -> Self {
        TangentVector::zeros()
    }
    fn nan() -> Self {
        TangentVector::repeat(f64::NAN)
    }
    fn norm(&self) -> f64 {
        nalgebra::Matrix::norm(self)
    }
    fn basis() -> Vec<Self> {
        vec![TangentVector::x(), TangentVector::y()]
    }
}

/// A tangent vector together with its derivative along the unstable
/// direction, `v (+) nabla_{X_u} v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetVector {
    pub v: TangentVector,
    pub dv: TangentVector,
}

impl JetVector {
    pub fn new(v: TangentVector, dv: TangentVector) -> Self {
        Self { v, dv }
    }

    fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.v[0], self.v[1], self.dv[0], self.dv[1])
    }
}

impl Add for JetVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.v + o.v, self.dv + o.dv)
    }
}

impl Sub for JetVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.v - o.v, self.dv - o.dv)
    }
}

impl Mul<f64> for JetVector {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.v * s, self.dv * s)
    }
}

impl Fiber for JetVector {
    fn zero() -> Self {
        Self::new(TangentVector::zeros(), TangentVector::zeros())
    }
    fn nan() -> Self {
        Self::new(TangentVector::nan(), TangentVector::nan())
    }
    fn norm(&self) -> f64 {
        self.as_vector4().norm()
    }
    fn basis() -> Vec<Self> {
        let z = TangentVector::zeros();
        vec![
            Self::new(TangentVector::x(), z),
            Self::new(TangentVector::y(), z),
            Self::new(z, TangentVector::x()),
            Self::new(z, TangentVector::y()),
        ]
    }
}

/// Output of [`neumann_solve`]. Entries before `start` are NaN.
#[derive(Debug, Clone)]
pub struct NeumannSolution<F> {
    pub values: Vec<F>,
    pub start: usize,
    /// `max_j |v_j - lift(j, v_{j-1}) - w_j|` over `j > start`; this is the
    /// size of the first dropped term of the series.
    pub max_residual: f64,
    /// Empirical per-step contraction of the lift cocycle over the last
    /// window of the slice, `(|Phi_N| / |Phi_{N/2}|)^(1/(N - N/2))`.
    pub contraction: f64,
}

/// Operator norm proxy of the cocycle over `steps` lifts ending at `end`:
/// largest image norm of a fiber basis vector.
pub fn cocycle_norm<F: Fiber>(lift: &impl Fn(usize, &F) -> F, end: usize, steps: usize) -> f64 {
    F::basis()
        .into_iter()
        .map(|e| {
            let mut acc = e;
            for i in end + 1 - steps..=end {
                acc = lift(i, &acc);
            }
            acc.norm()
        })
        .fold(0.0, f64::max)
}

/// Measured per-step contraction rate of a lift over the window of `n_terms`
/// steps ending at `end`.
pub fn cocycle_rate<F: Fiber>(lift: &impl Fn(usize, &F) -> F, end: usize, n_terms: usize) -> f64 {
    let half = (n_terms / 2).max(1);
    if n_terms <= half {
        return f64::NAN;
    }
    let full = cocycle_norm(lift, end, n_terms);
    let part = cocycle_norm(lift, end, half);
    if part == 0.0 || full == 0.0 {
        return 0.0;
    }
    (full / part).powf(1.0 / (n_terms - half) as f64)
}

/// Solve `(I - L) v = w` by the `n_terms`-term truncated series at every
/// index `j >= first + n_terms - 1`.
///
/// `source[i]` and `lift(i, .)` must be valid for `i >= first` (the lift is
/// only called with `i > first`).
pub fn neumann_solve<F: Fiber>(
    stage: &'static str,
    lift: impl Fn(usize, &F) -> F,
    source: &[F],
    first: usize,
    n_terms: usize,
) -> Result<NeumannSolution<F>> {
    if n_terms == 0 {
        return Err(S3Error::InvalidConfig(format!("{stage}: Neumann truncation must be positive")));
    }
    let start = first + n_terms - 1;
    if source.len() <= start {
        return Err(S3Error::OrbitTooShort {
            needed: start + 1,
            got: source.len(),
        });
    }
    let mut values = vec![F::nan(); source.len()];
    for j in start..source.len() {
        let mut acc = source[j + 1 - n_terms];
        for i in j + 2 - n_terms..=j {
            acc = lift(i, &acc) + source[i];
        }
        values[j] = acc;
    }
    let max_residual = (start + 1..source.len())
        .map(|j| (values[j] - lift(j, &values[j - 1]) - source[j]).norm())
        .fold(0.0, f64::max);
    let contraction = if n_terms >= 2 && source.len() > first + n_terms {
        cocycle_rate(&lift, source.len() - 1, n_terms)
    } else {
        f64::NAN
    };
    if contraction.is_finite() && contraction >= 1.0 {
        return Err(S3Error::ContractionViolation {
            stage,
            rate: contraction,
        });
    }
    Ok(NeumannSolution {
        values,
        start,
        max_residual,
        contraction,
    })
}
