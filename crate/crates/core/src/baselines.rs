//! Reference estimators and distribution oracles: the empirical distribution
//! function, sample quantiles, a Gaussian kernel density estimator, and the
//! Beta law used as ground truth in the experiments.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Gamma, Open01};
use rand_xoshiro::Xoshiro256PlusPlus;
use statrs::function::gamma::ln_gamma;

use crate::affine_maps::SupportInterval;
use crate::error::{invalid, IfsError, Result};
use crate::moments::Sample;

/// Fraction of sample values `<= x`.
pub fn edf(sample: &Sample, x: f64) -> f64 {
    let below = sample.values().iter().filter(|&&v| v <= x).count();
    below as f64 / sample.len() as f64
}

/// Sorted copy of a sample for repeated EDF evaluation.
#[derive(Debug, Clone)]
pub struct Edf {
    sorted: Vec<f64>,
}

impl Edf {
    pub fn new(sample: &Sample) -> Self {
        let mut sorted = sample.values().to_vec();
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }
}

/// Order-statistic interpolated quantile: with `h = 1 + u (n - 1)`, returns
/// `x_(floor h) + (h - floor h) (x_(floor h + 1) - x_(floor h))`.
pub fn empirical_quantile(sample: &Sample, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(invalid(format!("quantile level {u} outside [0, 1]")));
    }
    let mut sorted = sample.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(empirical_quantile_sorted(&sorted, u))
}

/// Same as [`empirical_quantile`] on already sorted, nonempty data.
pub(crate) fn empirical_quantile_sorted(sorted: &[f64], u: f64) -> f64 {
    let n = sorted.len();
    let h = u * (n - 1) as f64;
    let lo = (h.floor() as usize).min(n - 1);
    let frac = h - lo as f64;
    if lo + 1 >= n || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    shape_a: f64,
    shape_b: f64,
}

impl BetaParams {
    pub fn new(shape_a: f64, shape_b: f64) -> Result<Self> {
        if !(shape_a > 0.0 && shape_b > 0.0 && shape_a.is_finite() && shape_b.is_finite()) {
            return Err(invalid(format!(
                "beta shapes must be positive, got ({shape_a}, {shape_b})"
            )));
        }
        Ok(Self { shape_a, shape_b })
    }

    pub fn shape_a(&self) -> f64 {
        self.shape_a
    }

    pub fn shape_b(&self) -> f64 {
        self.shape_b
    }

    pub fn mean(&self) -> f64 {
        self.shape_a / (self.shape_a + self.shape_b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.shape_a + self.shape_b;
        self.shape_a * self.shape_b / (s * s * (s + 1.0))
    }

    /// Short label such as `beta(2,2)`.
    pub fn label(&self) -> String {
        format!("beta({},{})", self.shape_a, self.shape_b)
    }

    /// The eight laws of the relative-efficiency tables.
    pub fn table_laws() -> Vec<BetaParams> {
        [
            (0.9, 0.1),
            (0.1, 0.9),
            (0.1, 0.1),
            (2.0, 2.0),
            (5.0, 5.0),
            (3.0, 5.0),
            (5.0, 3.0),
            (1.0, 1.0),
        ]
        .into_iter()
        .map(|(a, b)| BetaParams { shape_a: a, shape_b: b })
        .collect()
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta `I_x(a, b)`; errors when `x` is outside `[0, 1]`.
pub fn beta_cdf(params: BetaParams, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("beta_cdf argument {x} outside [0, 1]")));
    }
    Ok(regularized_incomplete_beta(params.shape_a, params.shape_b, x))
}

/// Lenient form of [`beta_cdf`]: clamps `x` into `[0, 1]` and reports whether
/// clamping happened.
pub fn beta_cdf_clamped(params: BetaParams, x: f64) -> (f64, bool) {
    let clamped = x.clamp(0.0, 1.0);
    (
        regularized_incomplete_beta(params.shape_a, params.shape_b, clamped),
        clamped != x,
    )
}

pub fn beta_pdf(params: BetaParams, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let (a, b) = (params.shape_a, params.shape_b);
    if (x == 0.0 && a < 1.0) || (x == 1.0 && b < 1.0) {
        return f64::INFINITY;
    }
    ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)).exp()
}

fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    // the fraction converges quickly below the mean-ish split point
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 1000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Master seed for every randomized computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub const DEFAULT: RngSeed = RngSeed(3_735_928_559);

    /// Derives an independent child seed for stream `index`.
    ///
    /// `child = splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15)`, so the
    /// stream of a replication depends only on its index.
    pub fn split(self, index: u64) -> RngSeed {
        let mut z = self
            .0
            .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }

    pub fn rng(self) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::seed_from_u64(self.0)
    }
}

/// `ln G` for `G ~ Gamma(shape, 1)`; small shapes are boosted through
/// `G(shape) = G(shape + 1) U^(1/shape)` in log space so nothing underflows.
fn ln_gamma_variate<R: Rng>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("valid shape").sample(rng);
        g.ln()
    } else {
        let boosted: f64 = Gamma::new(shape + 1.0, 1.0).expect("valid shape").sample(rng);
        let u: f64 = Open01.sample(rng);
        boosted.ln() + u.ln() / shape
    }
}

/// `n` Beta variates `X = G_a / (G_a + G_b)` on the declared support `[0, 1]`.
pub fn beta_sample(params: BetaParams, n: usize, seed: RngSeed) -> Result<Sample> {
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut rng = seed.rng();
    let values = (0..n)
        .map(|_| {
            let la = ln_gamma_variate(params.shape_a, &mut rng);
            let lb = ln_gamma_variate(params.shape_b, &mut rng);
            (1.0 / (1.0 + (lb - la).exp())).clamp(0.0, 1.0)
        })
        .collect();
    Sample::new(values, SupportInterval::UNIT)
}

/// Gaussian kernel density estimate with Silverman's rule-of-thumb bandwidth.
#[derive(Debug, Clone)]
pub struct KernelDensity {
    points: Vec<f64>,
    bandwidth: f64,
}

impl KernelDensity {
    pub fn new(sample: &Sample) -> Result<Self> {
        let n = sample.len();
        if n < 2 {
            return Err(IfsError::DegenerateSample(
                "kernel density needs at least two points".into(),
            ));
        }
        let values = sample.values();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if var <= 0.0 {
            return Err(IfsError::DegenerateSample("sample variance is zero".into()));
        }
        let sd = var.sqrt();
        let iqr = empirical_quantile(sample, 0.75)? - empirical_quantile(sample, 0.25)?;
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        let bandwidth = 0.9 * spread * (n as f64).powf(-0.2);
        Ok(Self {
            points: values.to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn eval(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * self.points.len() as f64);
        norm * self
            .points
            .iter()
            .map(|p| (-0.5 * ((x - p) / h).powi(2)).exp())
            .sum::<f64>()
    }
}

/// Convenience wrapper around [`KernelDensity`].
pub fn kernel_density(sample: &Sample, x: f64) -> Result<f64> {
    Ok(KernelDensity::new(sample)?.eval(x))
}

/// Two-sided Kolmogorov-Smirnov statistic of a sample against a CDF.
///
/// The supremum is taken over representable `f64` points: equal values are
/// grouped, and the left limit at `v` is `cdf(v.next_down())`. Without ties
/// this is the usual formula; with ties it does not charge the sample for
/// mass the CDF places between adjacent floats (Beta laws with a shape
/// near 0.1 put over 1% of their mass within one ulp of 1).
pub fn ks_statistic(sample: &Sample, cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut below = 0usize;
    for group in sorted.chunk_by(|a, b| a == b) {
        let v = group[0];
        let at_or_below = below + group.len();
        d = d
            .max((at_or_below as f64 / n - cdf(v)).abs())
            .max((below as f64 / n - cdf(v.next_down())).abs());
        below = at_or_below;
    }
    d
}
