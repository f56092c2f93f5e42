//! All per-point fields of the algorithm on one forward orbit slice.
//!
//! A slice is laid out as `history | evaluation points`. The history feeds
//! the power iteration, the curvature series, and the two later series;
//! [`Windows::history`] is its minimal length.

use serde::{Deserialize, Serialize};

use crate::cocycle::{FrameWindows, UnstableFrame};
use crate::density::{density_field, DensityField};
use crate::error::{Result, S3Error};
use crate::fields::VectorField;
use crate::maps::{evolve_orbit, Direction, MapModel};
use crate::split::{jet_decompose, DerivativeMode, SplitFields};
use crate::torus::{TangentVector, TorusPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Windows {
    /// Power-iteration burn-in.
    pub n_o1: usize,
    /// Terms of the curvature series.
    pub curvature_terms: usize,
    /// Terms of the series for `V`.
    pub n_o2: usize,
    /// Terms of the series for `rho_0`.
    pub n_o3: usize,
    pub curvature_tolerance: f64,
}

impl Default for Windows {
    fn default() -> Self {
        Self {
            n_o1: 40,
            curvature_terms: 40,
            n_o2: 40,
            n_o3: 40,
            curvature_tolerance: 1e-8,
        }
    }
}

impl Windows {
    pub fn uniform(n: usize) -> Self {
        Self {
            n_o1: n,
            curvature_terms: n,
            n_o2: n,
            n_o3: n,
            ..Self::default()
        }
    }

    /// Number of points that must precede the first evaluation point.
    pub fn history(&self) -> usize {
        self.n_o1 + self.curvature_terms + self.n_o2.max(self.n_o3)
    }

    pub fn frame(&self) -> FrameWindows {
        FrameWindows {
            n_o1: self.n_o1,
            curvature_terms: self.curvature_terms,
            curvature_tolerance: self.curvature_tolerance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_o1", self.n_o1),
            ("curvature_terms", self.curvature_terms),
            ("n_o2", self.n_o2),
            ("n_o3", self.n_o3),
        ] {
            if v == 0 {
                return Err(S3Error::InvalidConfig(format!("windows.{name} must be positive")));
            }
        }
        if !(self.curvature_tolerance > 0.0) {
            return Err(S3Error::InvalidConfig(
                "windows.curvature_tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Frame, decomposition and density on one slice.
#[derive(Debug, Clone)]
pub struct OrbitFields {
    pub frame: UnstableFrame,
    pub split: SplitFields,
    pub density: DensityField,
    /// First index where every field is defined.
    pub start: usize,
}

impl OrbitFields {
    pub fn len(&self) -> usize {
        self.frame.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame.is_empty()
    }

    pub fn points(&self) -> &[TorusPoint] {
        &self.frame.points
    }

    /// `V . grad f` at index `i`.
    pub fn v(&self, i: usize) -> TangentVector {
        self.split.v[i].v
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.density.rho[i]
    }
}

/// Options shared by every slice of a run.
#[derive(Debug, Clone, Copy)]
pub struct FieldOptions {
    pub windows: Windows,
    pub derivatives: DerivativeMode,
    /// Starting vector of the power iteration.
    pub initial_direction: TangentVector,
    /// Reverse the global sign of the unstable direction.
    pub flip_sign: bool,
}

impl FieldOptions {
    pub fn new(windows: Windows) -> Self {
        Self {
            windows,
            derivatives: DerivativeMode::Auto,
            initial_direction: TangentVector::new(1.0, 0.0),
            flip_sign: false,
        }
    }
}

pub fn compute_fields<M: MapModel + ?Sized>(
    model: &M,
    points: Vec<TorusPoint>,
    field: &dyn VectorField,
    opts: &FieldOptions,
) -> Result<OrbitFields> {
    let w = opts.windows;
    w.validate()?;
    let needed = w.history() + 1;
    if points.len() < needed {
        return Err(S3Error::OrbitTooShort {
            needed,
            got: points.len(),
        });
    }
    let frame = UnstableFrame::build_with_sign(model, points, opts.initial_direction, w.frame(), opts.flip_sign)?;
    let split = jet_decompose(&frame, field, opts.derivatives, w.n_o2)?;
    let density = density_field(&frame, &split, w.n_o3)?;
    let start = density.start.max(split.start);
    debug_assert!(start <= w.history());
    Ok(OrbitFields {
        frame,
        split,
        density,
        start,
    })
}

/// Fields on the slice `T^{-H} x, ..., x, ..., T^{ahead} x`, history from
/// the inverse map. Index [`Windows::history`] holds `x`.
pub fn fields_around_point<M: MapModel + ?Sized>(
    model: &M,
    x: TorusPoint,
    ahead: usize,
    field: &dyn VectorField,
    opts: &FieldOptions,
) -> Result<OrbitFields> {
    let h = opts.windows.history();
    let mut points = evolve_orbit(model, x, h, Direction::Backward)?.into_forward_points();
    let mut p = x;
    for _ in 0..ahead {
        p = model.forward(p);
        points.push(p);
    }
    compute_fields(model, points, field, opts)
}
