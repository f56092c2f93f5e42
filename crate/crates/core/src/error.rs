use thiserror::Error;

use crate::torus::TorusPoint;

/// Failures raised by the map models, the orbit solvers and the quadrature
/// layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum S3Error {
    #[error("inverse did not converge at ({}, {}) after {iterations} Newton steps", point.x, point.y)]
    InversionFailure { point: TorusPoint, iterations: usize },

    #[error("perturbed map is not a diffeomorphism: Jacobian determinant {determinant:.3e} at sample grid")]
    SingularPerturbation { determinant: f64 },

    #[error("power iteration failed to contract from the initial vector (step {step})")]
    DegenerateStart { step: usize },

    #[error("expansion violated at orbit index {index}: <T_* Xu, Xu> = {value}")]
    NonHyperbolicSample { index: usize, value: f64 },

    #[error("{stage}: a-posteriori residual {residual:.3e} exceeds tolerance {tolerance:.3e}; window too short")]
    WindowTooShort {
        stage: &'static str,
        residual: f64,
        tolerance: f64,
    },

    #[error("{stage}: lift cocycle does not contract over the window (estimated rate {rate:.4})")]
    ContractionViolation { stage: &'static str, rate: f64 },

    #[error("unstable derivative of the perturbation field is unavailable")]
    DerivativeUnavailable,

    #[error("orbit segment too short: need {needed} points, got {got}")]
    OrbitTooShort { needed: usize, got: usize },

    #[error("curve quadrature: {nodes} nodes cannot resolve {n_push} pushes (node spacing after pushing {spacing:.3e} exceeds one period)")]
    NodeBudgetExceeded {
        nodes: usize,
        n_push: usize,
        spacing: f64,
    },

    #[error("output error: {0}")]
    Io(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("while evaluating {context}: {source}")]
    Located {
        context: String,
        source: Box<S3Error>,
    },
}

impl S3Error {
    /// Attach the window or point being processed.
    pub fn located(self, context: impl Into<String>) -> Self {
        S3Error::Located {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error.
    pub fn root(&self) -> &S3Error {
        match self {
            S3Error::Located { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, S3Error>;
