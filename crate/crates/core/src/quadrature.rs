//! Integration against the SRB measure.
//!
//! Orbit averages with batch-means error bars, and Riemann sums over pushed
//! forward curves transverse to the stable direction.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Result, S3Error};
use crate::maps::MapModel;
use crate::torus::{TangentVector, TorusPoint};

/// Smallest sample count accepted by [`mc_integrate`].
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
}

/// `ceil(sqrt(n))` contiguous batches of near-equal size covering `0..n`.
pub fn batch_ranges(n: usize) -> Vec<Range<usize>> {
    let b = (n as f64).sqrt().ceil().max(1.0) as usize;
    let b = b.min(n.max(1));
    (0..b).map(|k| k * n / b..(k + 1) * n / b).collect()
}

/// Per-batch sums of several integrands evaluated on the same samples.
#[derive(Debug, Clone, Default)]
pub struct BatchSums {
    pub counts: Vec<usize>,
    /// `sums[batch][integrand]`.
    pub sums: Vec<Vec<f64>>,
}

impl BatchSums {
    pub fn from_batches(batches: Vec<(usize, Vec<f64>)>) -> Self {
        let (counts, sums) = batches.into_iter().unzip();
        Self { counts, sums }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Estimate of `sum_c weights[c] * mean(integrand c)`.
    pub fn estimate_combination(&self, weights: &[(usize, f64)], seed: u64) -> MonteCarloEstimate {
        let n = self.total();
        let batch_sum = |b: usize| weights.iter().map(|(c, w)| w * self.sums[b][*c]).sum::<f64>();
        let mut total = 0.0;
        for b in 0..self.counts.len() {
            total += batch_sum(b);
        }
        let mean = total / n as f64;
        let nb = self.counts.len();
        let stderr = if nb < 2 {
            f64::NAN
        } else {
            let mut acc = 0.0;
            for b in 0..nb {
                let m = batch_sum(b) / self.counts[b] as f64;
                acc += self.counts[b] as f64 * (m - mean).powi(2);
            }
            (acc / ((nb - 1) as f64 * n as f64)).sqrt()
        };
        MonteCarloEstimate {
            mean,
            stderr,
            n,
            seed,
        }
    }

    pub fn estimate(&self, integrand: usize, seed: u64) -> MonteCarloEstimate {
        self.estimate_combination(&[(integrand, 1.0)], seed)
    }
}

/// Pseudo-random starting point, uniform on the torus.
pub fn seeded_start(seed: u64) -> TorusPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TorusPoint::new(rng.random(), rng.random())
}

/// Orbit average of a pointwise function after `burn_in` steps from
/// [`seeded_start`].
pub fn mc_integrate<M, G>(model: &M, g: G, n: usize, seed: u64, burn_in: usize) -> Result<MonteCarloEstimate>
where
    M: MapModel + ?Sized,
    G: Fn(TorusPoint) -> f64,
{
    if n < MIN_SAMPLES {
        return Err(S3Error::InvalidConfig(format!(
            "orbit averages need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    let mut p = seeded_start(seed);
    for _ in 0..burn_in {
        p = model.forward(p);
    }
    let mut batches = Vec::new();
    for r in batch_ranges(n) {
        let mut s = 0.0;
        for _ in r.clone() {
            s += g(p);
            p = model.forward(p);
        }
        batches.push((r.len(), vec![s]));
    }
    Ok(BatchSums::from_batches(batches).estimate(0, seed))
}

/// Least-squares line through `(k, values[k])` with a one-sided p-value for
/// a negative slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// `P(T <= slope / stderr)` for Student's t with `n - 2` dof.
    pub p_value: f64,
}

pub fn fit_slope(values: &[f64]) -> SlopeFit {
    let n = values.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = values.iter().sum::<f64>() / n;
    let sxx: f64 = (0..values.len()).map(|k| (k as f64 - xm).powi(2)).sum();
    let sxy: f64 = values.iter().enumerate().map(|(k, y)| (k as f64 - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let sse: f64 = values
        .iter()
        .enumerate()
        .map(|(k, y)| (y - intercept - slope * k as f64).powi(2))
        .sum();
    let dof = n - 2.0;
    let slope_stderr = (sse / dof / sxx).sqrt();
    let p_value = if slope_stderr == 0.0 {
        if slope < 0.0 {
            0.0
        } else {
            1.0
        }
    } else {
        StudentsT::new(0.0, 1.0, dof)
            .map(|t| t.cdf(slope / slope_stderr))
            .unwrap_or(f64::NAN)
    };
    SlopeFit {
        slope,
        intercept,
        slope_stderr,
        p_value,
    }
}

/// Normalizing constant of `exp(-1/(1-u^2))` on `(-1, 1)`.
pub const BUMP_MASS: f64 = 0.443_993_816_168_079_4;

pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Straight base segment with a bump density, pushed `n_push` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveQuadratureSpec {
    pub base: TorusPoint,
    pub direction: TangentVector,
    /// Arclength of the segment.
    pub length: f64,
    pub n_push: usize,
    pub n_nodes: usize,
    /// Holder exponent used in the error model.
    pub alpha: f64,
}

impl CurveQuadratureSpec {
    pub fn new(base: TorusPoint, direction: TangentVector, n_push: usize, n_nodes: usize) -> Self {
        Self {
            base,
            direction,
            length: 0.05,
            n_push,
            n_nodes,
            alpha: 1.0,
        }
    }

    /// Arclength offsets of the equispaced nodes, centred on `base`.
    pub fn offsets(&self) -> Vec<f64> {
        let n = self.n_nodes;
        (0..n)
            .map(|i| self.length * (i as f64 / (n - 1) as f64 - 0.5))
            .collect()
    }

    /// Density at arclength offset `s`: the bump rescaled to the inner 80%.
    pub fn density(&self, s: f64) -> f64 {
        let half = 0.4 * self.length;
        bump(s / half) / (BUMP_MASS * half)
    }
}

/// Two-term error model `(delta kappa^n / N)^alpha + 1 / (delta kappa^n)`.
///
/// The second term bounds how far the pushed curve is from equidistributed;
/// `eta` is reported alongside as the measured per-step contraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveErrorBudget {
    /// Largest stretching of the segment after `n_push` steps.
    pub expansion: f64,
    /// Per-step ratio of smallest to largest singular value of `dT`, geometric mean.
    pub eta: f64,
    /// Spacing of the pushed nodes, `delta kappa^n / N`.
    pub pushed_spacing: f64,
    pub riemann_term: f64,
    /// Reciprocal pushed length, capped at one.
    pub tail_term: f64,
}

impl CurveErrorBudget {
    pub fn total(&self) -> f64 {
        self.riemann_term + self.tail_term
    }
}

/// Pushed nodes and weights, reusable across integrands.
#[derive(Debug, Clone)]
pub struct CurveQuadrature {
    pub spec: CurveQuadratureSpec,
    pub weights: Vec<f64>,
    /// `T^n` of every node.
    pub pushed: Vec<TorusPoint>,
    /// Pushforward of the segment tangent at every node.
    pub pushed_tangent: Vec<TangentVector>,
    pub budget: CurveErrorBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub value: f64,
    pub budget: CurveErrorBudget,
}

fn singular_ratio(m: &crate::torus::Mat2) -> f64 {
    let s = m.singular_values();
    s.min() / s.max()
}

impl CurveQuadrature {
    /// Push the nodes forward. Fails if the pushed nodes are farther apart
    /// than the torus itself.
    pub fn prepare<M: MapModel + ?Sized>(model: &M, spec: CurveQuadratureSpec) -> Result<Self> {
        let q = Self::prepare_unchecked(model, spec)?;
        if q.budget.pushed_spacing > 1.0 {
            return Err(S3Error::NodeBudgetExceeded {
                nodes: q.spec.n_nodes,
                n_push: q.spec.n_push,
                spacing: q.budget.pushed_spacing,
            });
        }
        Ok(q)
    }

    /// As [`CurveQuadrature::prepare`] without the node budget check.
    pub fn prepare_unchecked<M: MapModel + ?Sized>(model: &M, spec: CurveQuadratureSpec) -> Result<Self> {
        if spec.n_nodes < 3 || spec.length <= 0.0 || spec.direction.norm() == 0.0 {
            return Err(S3Error::InvalidConfig(
                "curve quadrature needs at least 3 nodes, a positive length and a nonzero direction".into(),
            ));
        }
        let dir = spec.direction.normalize();
        let offsets = spec.offsets();
        let raw: Vec<f64> = offsets.iter().map(|s| spec.density(*s)).collect();
        let mass: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / mass).collect();
        let pushed: Vec<(TorusPoint, TangentVector, f64)> = offsets
            .par_iter()
            .map(|s| {
                let mut p = spec.base.shifted(&(dir * *s));
                let mut v = dir;
                let mut log_eta = 0.0;
                for _ in 0..spec.n_push {
                    let j = model.jacobian(p);
                    log_eta += singular_ratio(&j).ln();
                    v = j * v;
                    p = model.forward(p);
                }
                (p, v, log_eta)
            })
            .collect();
        let expansion = pushed.iter().map(|t| t.1.norm()).fold(0.0, f64::max);
        let eta = if spec.n_push == 0 {
            singular_ratio(&model.jacobian(spec.base))
        } else {
            pushed
                .iter()
                .map(|t| (t.2 / spec.n_push as f64).exp())
                .fold(0.0, f64::max)
        };
        let pushed_spacing = spec.length * expansion / spec.n_nodes as f64;
        let budget = CurveErrorBudget {
            expansion,
            eta,
            pushed_spacing,
            riemann_term: pushed_spacing.powf(spec.alpha),
            tail_term: (1.0 / (spec.length * expansion)).min(1.0),
        };
        Ok(Self {
            spec,
            weights,
            pushed: pushed.iter().map(|t| t.0).collect(),
            pushed_tangent: pushed.iter().map(|t| t.1).collect(),
            budget,
        })
    }

    pub fn integrate<G: Fn(TorusPoint) -> f64 + Sync>(&self, g: G) -> CurveEstimate {
        let terms: Vec<f64> = self.pushed.par_iter().map(|p| g(*p)).collect();
        let value = terms.iter().zip(&self.weights).map(|(g, w)| g * w).sum();
        CurveEstimate {
            value,
            budget: self.budget,
        }
    }
}

/// Integrate `g` on the pushed curve for every `n_push` in `pushes`, without
/// the node budget check.
pub fn curve_sweep<M, G>(model: &M, g: G, spec: &CurveQuadratureSpec, pushes: Range<usize>) -> Result<Vec<CurveEstimate>>
where
    M: MapModel + ?Sized,
    G: Fn(TorusPoint) -> f64 + Sync,
{
    pushes
        .map(|n| {
            let s = CurveQuadratureSpec {
                n_push: n,
                ..spec.clone()
            };
            Ok(CurveQuadrature::prepare_unchecked(model, s)?.integrate(&g))
        })
        .collect()
}

/// Where the error of a sweep against a known value bottoms out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Turnover {
    pub best_push: usize,
    pub best_error: f64,
    pub initial_error: f64,
    pub final_error: f64,
}

impl Turnover {
    /// Error first falls then rises again by at least `factor`.
    pub fn exists(&self, factor: f64) -> bool {
        self.initial_error > factor * self.best_error && self.final_error > factor * self.best_error
    }
}

pub fn find_turnover(sweep: &[CurveEstimate], exact: f64, first_push: usize) -> Turnover {
    let errs: Vec<f64> = sweep.iter().map(|e| (e.value - exact).abs()).collect();
    let (best, best_error) = errs
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, e)| if e < acc.1 { (i, e) } else { acc });
    let tail = &errs[best..];
    Turnover {
        best_push: first_push + best,
        best_error,
        initial_error: errs[0],
        final_error: tail.iter().copied().fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::cat_map;
    use std::f64::consts::TAU;

    #[test]
    fn bump_mass_matches_fine_trapezoid() {
        let n = 200_000;
        let h = 2.0 / n as f64;
        let s: f64 = (0..=n).map(|i| bump(-1.0 + i as f64 * h)).sum::<f64>() * h;
        assert!((s - BUMP_MASS).abs() < 1e-13);
    }

    #[test]
    fn batches_cover_range() {
        let r = batch_ranges(1_000_003);
        assert_eq!(r.len(), 1001);
        assert_eq!(r[0].start, 0);
        assert_eq!(r.last().unwrap().end, 1_000_003);
        for w in r.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
    }

    #[test]
    fn constants_are_exact() {
        let t = cat_map();
        let e = mc_integrate(&t, |_| 0.75, 5000, 3, 10).unwrap();
        assert_eq!(e.mean, 0.75);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(mc_integrate(&cat_map(), |_| 1.0, 999, 0, 0).is_err());
    }

    #[test]
    fn cat_map_averages() {
        let t = cat_map();
        let c = mc_integrate(&t, |p| (TAU * p.x).cos(), 1_000_000, 11, 100).unwrap();
        assert!(c.mean.abs() <= 5e-3);
        let c2 = mc_integrate(&t, |p| (TAU * p.x).cos().powi(2), 1_000_000, 12, 100).unwrap();
        assert!((c2.mean - 0.5).abs() <= 3.0 * c2.stderr, "{c2:?}");
        assert!(c2.stderr > 0.0);
    }

    #[test]
    fn seeded_runs_are_bit_identical_and_linear() {
        let t = cat_map();
        let g = |p: TorusPoint| (TAU * p.y).sin() + p.x;
        let a = mc_integrate(&t, g, 4000, 9, 5).unwrap();
        let b = mc_integrate(&t, g, 4000, 9, 5).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        let lin = mc_integrate(&t, |p| 2.0 * g(p) - 1.0, 4000, 9, 5).unwrap();
        assert!((lin.mean - (2.0 * a.mean - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn slope_fit_recovers_line() {
        let v: Vec<f64> = (0..15).map(|k| 1.0 - 0.4 * k as f64 + 0.01 * ((k * 7) % 3) as f64).collect();
        let f = fit_slope(&v);
        assert!((f.slope + 0.4).abs() < 0.01);
        assert!(f.p_value < 1e-10);
        let flat: Vec<f64> = (0..15).map(|k| ((k * 7919) % 13) as f64).collect();
        assert!(fit_slope(&flat).p_value > 0.01);
    }

    fn spec(n_push: usize, n_nodes: usize) -> CurveQuadratureSpec {
        let e = cat_map().eigen();
        CurveQuadratureSpec::new(TorusPoint::new(0.31, 0.17), e.unstable, n_push, n_nodes)
    }

    #[test]
    fn curve_density_has_unit_mass() {
        let s = spec(0, 4001);
        let h = s.length / (s.n_nodes - 1) as f64;
        let mass: f64 = s.offsets().iter().map(|x| s.density(*x)).sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-10);
        assert!(s.density(0.45 * s.length).abs() == 0.0);
        let q = CurveQuadrature::prepare(&cat_map(), spec(5, 1000)).unwrap();
        assert!((q.integrate(|_| 2.5).value - 2.5).abs() < 1e-14);
    }

    #[test]
    fn unpushed_curve_matches_trapezoid() {
        let s = spec(0, 2001);
        let g = |p: TorusPoint| (TAU * p.x).cos() * (TAU * p.y).sin() + p.y;
        let q = CurveQuadrature::prepare(&cat_map(), s.clone()).unwrap();
        // Independent trapezoid on a finer grid with the analytic constant.
        let n = 20_001;
        let h = s.length / (n - 1) as f64;
        let dir = s.direction.normalize();
        let reference: f64 = (0..n)
            .map(|i| {
                let off = -0.5 * s.length + i as f64 * h;
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                w * s.density(off) * g(s.base.shifted(&(dir * off)))
            })
            .sum::<f64>()
            * h;
        assert!((q.integrate(g).value - reference).abs() < 1e-10);
    }

    #[test]
    fn pushed_curve_integrates_cat_map() {
        let q = CurveQuadrature::prepare(&cat_map(), spec(12, 100_000)).unwrap();
        assert!(q.integrate(|p| (TAU * p.x).cos()).value.abs() < 1e-2);
        assert!((q.budget.eta - 0.145_898).abs() < 1e-5);
    }

    #[test]
    fn node_budget_is_enforced() {
        let err = CurveQuadrature::prepare(&cat_map(), spec(20, 1000)).unwrap_err();
        assert!(matches!(err, S3Error::NodeBudgetExceeded { .. }));
    }

    #[test]
    fn sweep_shows_turnover() {
        let sweep = curve_sweep(&cat_map(), |p| (TAU * p.x).cos(), &spec(0, 2000), 0..40).unwrap();
        let t = find_turnover(&sweep, 0.0, 0);
        assert!(t.exists(1e3), "{t:?}");
        assert!(t.best_push > 0 && t.best_push < 39);
    }
}
