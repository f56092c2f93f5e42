//! Run configuration, read from TOML.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, S3Error};
use crate::fields::{CoboundaryField, TrigField, TrigObservable, VectorField};
use crate::maps::{CatMap, FamilyTangent, HessianMode, MapModel, PerturbedCatMap};
use crate::pipeline::Windows;
use crate::split::DerivativeMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapFamily {
    Cat,
    PerturbedCat,
}

fn standard_matrix() -> [[i64; 2]; 2] {
    [[2, 1], [1, 1]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub family: MapFamily,
    #[serde(default = "standard_matrix")]
    pub matrix: [[i64; 2]; 2],
    /// Parameter of the perturbed family.
    #[serde(default)]
    pub t: f64,
    #[serde(default)]
    pub hessian: HessianMode,
    /// Field of the family `T_t = T + t X o T`.
    #[serde(default = "TrigField::zero")]
    pub field: TrigField,
}

/// The vector field whose response is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationConfig {
    /// Tangent of the map family at its parameter.
    #[default]
    Family,
    Field { field: TrigField },
    /// `V0 - T_* V0`.
    Coboundary { v0: TrigField },
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMethod {
    #[default]
    Probabilistic,
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveConfig {
    pub length: f64,
    pub n_push: usize,
    pub n_nodes: usize,
    pub alpha: f64,
    /// Base point; drawn from the seed when absent.
    pub base: Option<[f64; 2]>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            length: 0.05,
            n_push: 10,
            n_nodes: 20_000,
            alpha: 1.0,
            base: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub method: QuadratureMethod,
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub curve: CurveConfig,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            method: QuadratureMethod::Probabilistic,
            samples: 1_000_000,
            burn_in: 100,
            seed: 1,
            curve: CurveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesConfig {
    /// Number of correlation terms `L`.
    pub length: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self { length: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub t_step: f64,
    pub steps: usize,
    pub seeds: usize,
    pub seed: u64,
    pub burn_in: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            t_step: 1e-3,
            steps: 10_000_000,
            seeds: 8,
            seed: 1000,
            burn_in: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    /// Bound on the decomposition, curvature and `rho_0` residuals.
    pub residual_tolerance: f64,
    /// Width of the statistical bands, in standard errors.
    pub sigmas: f64,
    /// Evaluation points for the residual checks.
    pub residual_points: usize,
    /// Terms of the telescoping partial sums.
    pub telescoping_terms: usize,
    /// Terms in the correlation decay fit.
    pub decay_terms: usize,
    pub decay_p_value: f64,
    /// Second observable of the adjoint check.
    pub adjoint_observable: TrigObservable,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            residual_tolerance: 1e-8,
            sigmas: 3.0,
            residual_points: 1000,
            telescoping_terms: 8,
            decay_terms: 15,
            decay_p_value: 0.01,
            adjoint_observable: TrigObservable::cos_y(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S3Config {
    pub map: MapConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
    #[serde(default = "TrigObservable::cos_x")]
    pub observable: TrigObservable,
    #[serde(default)]
    pub derivatives: DerivativeMode,
    #[serde(default)]
    pub windows: Windows,
    #[serde(default)]
    pub series: SeriesConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
}

/// A built map, keeping the family structure visible.
#[derive(Clone)]
pub enum BuiltMap {
    Cat(CatMap),
    Perturbed(Arc<PerturbedCatMap>),
}

impl BuiltMap {
    pub fn model(&self) -> Arc<dyn MapModel> {
        match self {
            BuiltMap::Cat(m) => Arc::new(*m),
            BuiltMap::Perturbed(m) => m.clone(),
        }
    }
}

impl S3Config {
    /// Configuration for `family` with every other setting at its default.
    pub fn new(map: MapConfig) -> Self {
        Self {
            map,
            perturbation: PerturbationConfig::default(),
            observable: TrigObservable::cos_x(),
            derivatives: DerivativeMode::default(),
            windows: Windows::default(),
            series: SeriesConfig::default(),
            quadrature: QuadratureConfig::default(),
            oracle: OracleConfig::default(),
            validation: ValidationConfig::default(),
        }
    }

    /// Parse and validate. Errors name the offending key and line.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| S3Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Complete TOML echo, defaults included.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(S3Error::InvalidConfig(m.to_string()));
        self.windows.validate()?;
        if self.series.length == 0 {
            return bad("series.length must be at least 1");
        }
        if self.quadrature.samples == 0 {
            return bad("quadrature.samples must be positive");
        }
        let c = &self.quadrature.curve;
        if c.n_nodes < 3 || !(c.length > 0.0) || !(c.alpha > 0.0) {
            return bad("quadrature.curve needs n_nodes >= 3, length > 0 and alpha > 0");
        }
        if self.oracle.seeds == 0 || self.oracle.steps == 0 || !(self.oracle.t_step > 0.0) {
            return bad("oracle needs seeds > 0, steps > 0 and t_step > 0");
        }
        if self.map.family == MapFamily::Cat && self.map.t != 0.0 {
            return bad("map.t is only meaningful for family = \"perturbed_cat\"");
        }
        let v = &self.validation;
        if !(v.residual_tolerance > 0.0) || !(v.sigmas > 0.0) || v.decay_terms < 3 {
            return bad("validation needs residual_tolerance > 0, sigmas > 0 and decay_terms >= 3");
        }
        Ok(())
    }

    pub fn build_map_at(&self, t: f64) -> Result<BuiltMap> {
        let base = CatMap::new(self.map.matrix)?;
        Ok(match self.map.family {
            MapFamily::Cat => BuiltMap::Cat(base),
            MapFamily::PerturbedCat => BuiltMap::Perturbed(Arc::new(PerturbedCatMap::new(
                base,
                t,
                Arc::new(self.map.field.clone()),
                self.map.hessian,
            )?)),
        })
    }

    pub fn build_map(&self) -> Result<BuiltMap> {
        self.build_map_at(self.map.t)
    }

    pub fn build_field(&self, map: &BuiltMap) -> Arc<dyn VectorField> {
        match (&self.perturbation, map) {
            (PerturbationConfig::Family, BuiltMap::Cat(_)) => Arc::new(self.map.field.clone()),
            (PerturbationConfig::Family, BuiltMap::Perturbed(m)) => Arc::new(FamilyTangent::new(m.clone())),
            (PerturbationConfig::Field { field }, _) => Arc::new(field.clone()),
            (PerturbationConfig::Coboundary { v0 }, m) => Arc::new(CoboundaryField::new(v0.clone(), m.model())),
        }
    }

    /// True when the perturbation is identically zero.
    pub fn perturbation_is_zero(&self) -> bool {
        match &self.perturbation {
            PerturbationConfig::Family => self.map.field.is_zero(),
            PerturbationConfig::Field { field } => field.is_zero(),
            PerturbationConfig::Coboundary { v0 } => v0.is_zero(),
        }
    }
}
