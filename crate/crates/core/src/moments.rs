//! Samples, moment vectors and the moment-transfer matrix of an affine IFS.

use nalgebra::{DMatrix, DVector};

use crate::affine_maps::{MapFamily, SupportInterval};
use crate::error::{invalid, Result};

/// An i.i.d. sample together with the support the analyst declares for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    support: SupportInterval,
}

impl Sample {
    pub fn new(values: Vec<f64>, support: SupportInterval) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("sample must be nonempty"));
        }
        if let Some(bad) = values.iter().find(|v| !support.contains(**v)) {
            return Err(invalid(format!(
                "sample value {bad} lies outside the support [{}, {}]",
                support.alpha(),
                support.beta()
            )));
        }
        Ok(Self { values, support })
    }

    /// Uses `[min, max]` of the data as the support.
    pub fn with_range_support(values: Vec<f64>) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let support = SupportInterval::new(lo, hi)?;
        Self::new(values, support)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> SupportInterval {
        self.support
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values rescaled onto `[0, 1]`.
    pub fn canonical_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|&x| self.support.to_unit(x).clamp(0.0, 1.0))
            .collect()
    }
}

/// Truncated moment sequence `g_0, ..., g_M` with `g_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    g: Vec<f64>,
}

impl MomentVector {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        if g.len() < 2 {
            return Err(invalid("moment vector needs at least g_0 and g_1"));
        }
        if g[0] != 1.0 {
            return Err(invalid(format!("g_0 must be 1, got {}", g[0])));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(invalid("moments must be finite"));
        }
        Ok(Self { g })
    }

    /// Moments of the uniform law on `[0, 1]`: `g_k = 1 / (k + 1)`.
    pub fn uniform(order: usize) -> Self {
        Self {
            g: (0..=order).map(|k| 1.0 / (k as f64 + 1.0)).collect(),
        }
    }

    /// Moments of Beta(a, b): `g_k = prod_{r<k} (a + r) / (a + b + r)`.
    pub fn beta(shape_a: f64, shape_b: f64, order: usize) -> Result<Self> {
        if !(shape_a > 0.0 && shape_b > 0.0) {
            return Err(invalid("beta shapes must be positive"));
        }
        let mut g = Vec::with_capacity(order + 1);
        let mut acc = 1.0;
        g.push(acc);
        for r in 0..order {
            let r = r as f64;
            acc *= (shape_a + r) / (shape_a + shape_b + r);
            g.push(acc);
        }
        Ok(Self { g })
    }

    /// Truncation order `M`.
    pub fn order(&self) -> usize {
        self.g.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.g
    }

    pub fn get(&self, k: usize) -> f64 {
        self.g[k]
    }

    /// Checks `1 >= g_1 >= ... >= g_M >= 0` up to `tol`.
    pub fn is_valid_on_unit(&self, tol: f64) -> bool {
        self.g.iter().all(|&v| (-tol..=1.0 + tol).contains(&v))
            && self.g.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Sample moments `m_k = (1/n) sum X_i^k` of the rescaled sample, `k = 0..=order`.
pub fn empirical_moments(sample: &Sample, order: usize) -> Result<MomentVector> {
    if order == 0 {
        return Err(invalid("moment order must be at least 1"));
    }
    let n = sample.len() as f64;
    let mut sums = vec![0.0; order + 1];
    for x in sample.canonical_values() {
        let mut pow = 1.0;
        for s in sums.iter_mut() {
            *s += pow;
            pow *= x;
        }
    }
    let mut g: Vec<f64> = sums.into_iter().map(|s| s / n).collect();
    g[0] = 1.0;
    MomentVector::new(g)
}

/// `A[k-1, i] = sum_j C(k, j) b_i^j a_i^(k-j) g_j`, rows `k = 1..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    a: DMatrix<f64>,
}

impl TransferMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Truncation order `M` (number of rows).
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_maps(&self) -> usize {
        self.a.ncols()
    }

    /// Entry for moment order `k >= 1` and map `i`.
    pub fn entry(&self, k: usize, i: usize) -> f64 {
        self.a[(k - 1, i)]
    }
}

pub fn transfer_matrix(family: &MapFamily, g: &MomentVector) -> TransferMatrix {
    let order = g.order();
    let gs = g.as_slice();
    let mut a = DMatrix::zeros(order, family.len());
    let mut binom = vec![0.0; order + 1];
    for (i, map) in family.maps().iter().enumerate() {
        let (ai, bi) = (map.intercept(), map.slope());
        for k in 1..=order {
            // C(k, j) = C(k, j - 1) (k - j + 1) / j
            binom[0] = 1.0;
            for j in 1..=k {
                binom[j] = binom[j - 1] * (k - j + 1) as f64 / j as f64;
            }
            let mut total = 0.0;
            for j in 0..=k {
                total += binom[j] * bi.powi(j as i32) * ai.powi((k - j) as i32) * gs[j];
            }
            a[(k - 1, i)] = total;
        }
    }
    TransferMatrix { a }
}

/// Moments `h_k = sum_i A_ki p_i` of the pushed-forward measure, with `h_0 = 1`.
pub fn push_forward_moments(a: &TransferMatrix, p: &[f64]) -> Result<MomentVector> {
    if p.len() != a.num_maps() {
        return Err(invalid(format!(
            "probability vector has {} entries but the family has {} maps",
            p.len(),
            a.num_maps()
        )));
    }
    let h = a.matrix() * DVector::from_column_slice(p);
    let mut g = Vec::with_capacity(h.len() + 1);
    g.push(1.0);
    g.extend(h.iter().copied());
    MomentVector::new(g)
}
