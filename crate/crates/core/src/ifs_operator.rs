//! The fitted IFS model, the operator `T` on distribution functions, and
//! fixed-point iteration for the CDF estimate.

use serde::{Deserialize, Serialize};

use crate::affine_maps::{AffineMap, MapFamily, MapKind, SupportInterval};
use crate::error::{invalid, IfsError, Result};
use crate::inverse_problem::ProbabilityVector;

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_ITERATIONS: usize = 5;

/// Maps plus probabilities on `[0, 1]`, and the original support they were
/// fitted for.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsModel {
    family: MapFamily,
    p: ProbabilityVector,
    support: SupportInterval,
    sample_size: Option<usize>,
}

impl IfsModel {
    pub fn new(family: MapFamily, p: ProbabilityVector, support: SupportInterval) -> Result<Self> {
        if family.len() != p.len() {
            return Err(invalid(format!(
                "{} maps but {} probabilities",
                family.len(),
                p.len()
            )));
        }
        Ok(Self {
            family,
            p,
            support,
            sample_size: None,
        })
    }

    /// Records the size of the sample the model was fitted on (used by the
    /// Fourier term-selection rule).
    pub fn with_sample_size(mut self, n: usize) -> Self {
        self.sample_size = Some(n);
        self
    }

    pub fn family(&self) -> &MapFamily {
        &self.family
    }

    pub fn maps(&self) -> &[AffineMap] {
        self.family.maps()
    }

    pub fn probabilities(&self) -> &ProbabilityVector {
        &self.p
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    pub fn sample_size(&self) -> Option<usize> {
        self.sample_size
    }

    pub fn contractivity(&self) -> f64 {
        self.family.contractivity()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| IfsError::Schema(e.to_string()))?;
        file.try_into()
    }
}

/// On-disk form: `{support: [alpha, beta], kind, maps: [[a, b], ...], p: [...]}`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    support: SupportInterval,
    kind: MapKind,
    maps: Vec<AffineMap>,
    p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

impl From<&IfsModel> for ModelFile {
    fn from(m: &IfsModel) -> Self {
        ModelFile {
            support: m.support,
            kind: m.family.kind(),
            maps: m.family.maps().to_vec(),
            p: m.p.as_slice().to_vec(),
            n: m.sample_size,
        }
    }
}

impl TryFrom<ModelFile> for IfsModel {
    type Error = IfsError;

    fn try_from(f: ModelFile) -> Result<Self> {
        let schema = |e: IfsError| IfsError::Schema(e.to_string());
        let family = MapFamily::from_maps(f.kind, f.maps).map_err(schema)?;
        let p = ProbabilityVector::new(f.p).map_err(schema)?;
        let mut model = IfsModel::new(family, p, f.support).map_err(schema)?;
        model.sample_size = f.n;
        Ok(model)
    }
}

/// A distribution function sampled at `G + 1` equispaced points of `[0, 1]`
/// and linearly interpolated between them.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseCdf {
    values: Vec<f64>,
}

impl PiecewiseCdf {
    /// `F(x) = x` on a grid of `grid` intervals.
    pub fn uniform(grid: usize) -> Result<Self> {
        if grid == 0 {
            return Err(invalid("grid needs at least one interval"));
        }
        Ok(Self {
            values: (0..=grid).map(|j| j as f64 / grid as f64).collect(),
        })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(invalid("a piecewise CDF needs at least two grid values"));
        }
        if values[0] != 0.0 || values[values.len() - 1] != 1.0 {
            return Err(invalid("a piecewise CDF must start at 0 and end at 1"));
        }
        if values.windows(2).any(|w| !(w[1] >= w[0])) || values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("CDF values must be non-decreasing within [0, 1]"));
        }
        Ok(Self { values })
    }

    /// Number of grid intervals `G`.
    pub fn grid_size(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn abscissa(&self, j: usize) -> f64 {
        j as f64 / self.grid_size() as f64
    }

    /// Evaluates on `[0, 1]`, extended by 0 below and 1 above.
    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let g = self.grid_size();
        let pos = u * g as f64;
        let j = (pos.floor() as usize).min(g - 1);
        let frac = pos - j as f64;
        self.values[j] + frac * (self.values[j + 1] - self.values[j])
    }

    pub fn sup_distance(&self, other: &PiecewiseCdf) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One application of `TF(x) = sum_i p_i F(w_i^{-1}(x))` at every grid point.
///
/// Zero-slope maps contribute the unit step at their intercept; decreasing
/// maps contribute `1 - F(w^{-1}(x))`.
pub fn apply_t(model: &IfsModel, f: &PiecewiseCdf) -> PiecewiseCdf {
    let g = f.grid_size();
    let maps = model.maps();
    let p = model.probabilities().as_slice();
    let mut values = Vec::with_capacity(g + 1);
    values.push(0.0);
    let mut running = 0.0f64;
    for j in 1..g {
        let x = f.abscissa(j);
        let mut total = 0.0;
        for (m, &pi) in maps.iter().zip(p) {
            if pi == 0.0 {
                continue;
            }
            let b = m.slope();
            let contribution = if b > 0.0 {
                f.eval((x - m.intercept()) / b)
            } else if b < 0.0 {
                1.0 - f.eval((x - m.intercept()) / b)
            } else if x >= m.intercept() {
                1.0
            } else {
                0.0
            };
            total += pi * contribution;
        }
        running = running.max(total.clamp(0.0, 1.0));
        values.push(running);
    }
    values.push(1.0);
    PiecewiseCdf { values }
}

/// Result of iterating `T` from the uniform CDF.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub cdf: PiecewiseCdf,
    /// Sup distance between consecutive iterates, one entry per iteration.
    pub step_distances: Vec<f64>,
}

/// Iterates `T` `iterations` times from the uniform CDF on the default grid.
pub fn fixed_point_cdf(model: &IfsModel, iterations: usize) -> Result<FixedPoint> {
    fixed_point_cdf_on_grid(model, iterations, DEFAULT_GRID)
}

pub fn fixed_point_cdf_on_grid(model: &IfsModel, iterations: usize, grid: usize) -> Result<FixedPoint> {
    if iterations == 0 {
        return Err(invalid("at least one iteration is required"));
    }
    let mut cdf = PiecewiseCdf::uniform(grid)?;
    let mut step_distances = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let next = apply_t(model, &cdf);
        step_distances.push(next.sup_distance(&cdf));
        cdf = next;
    }
    Ok(FixedPoint { cdf, step_distances })
}

/// `F(x)` on the model's original support.
pub fn evaluate_cdf(model: &IfsModel, cdf: &PiecewiseCdf, x: f64) -> f64 {
    let s = model.support();
    if x <= s.alpha() {
        0.0
    } else if x >= s.beta() {
        1.0
    } else {
        cdf.eval(s.to_unit(x))
    }
}
