//! Affine contraction maps and the map families used by the estimators.
//!
//! Every family lives on the canonical support `[0, 1]`; samples are rescaled
//! before the maps are built and estimates are rescaled back on evaluation.

use serde::{Deserialize, Serialize};

use crate::baselines::empirical_quantile_sorted;
use crate::error::{invalid, IfsError, Result};
use crate::moments::Sample;

/// Closed interval `[alpha, beta]` with `alpha < beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct SupportInterval {
    alpha: f64,
    beta: f64,
}

impl SupportInterval {
    pub const UNIT: SupportInterval = SupportInterval {
        alpha: 0.0,
        beta: 1.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite()) || alpha >= beta {
            return Err(invalid(format!(
                "support must satisfy alpha < beta, got [{alpha}, {beta}]"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn width(&self) -> f64 {
        self.beta - self.alpha
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.alpha && x <= self.beta
    }

    /// Maps `x` from this interval onto `[0, 1]`.
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.alpha) / self.width()
    }

    /// Maps `u` from `[0, 1]` back onto this interval.
    pub fn from_unit(&self, u: f64) -> f64 {
        self.alpha + u * self.width()
    }
}

impl TryFrom<[f64; 2]> for SupportInterval {
    type Error = IfsError;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<SupportInterval> for [f64; 2] {
    fn from(s: SupportInterval) -> Self {
        [s.alpha, s.beta]
    }
}

/// A contraction `w(x) = a + b x` with `|b| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct AffineMap {
    a: f64,
    b: f64,
}

impl AffineMap {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || b.abs() >= 1.0 {
            return Err(invalid(format!(
                "affine map must be finite with |b| < 1, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn intercept(&self) -> f64 {
        self.a
    }

    pub fn slope(&self) -> f64 {
        self.b
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.a + self.b * x
    }

    /// Returns `(y - a) / b`.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if self.b == 0.0 {
            return Err(IfsError::NonInvertible);
        }
        Ok((y - self.a) / self.b)
    }
}

impl TryFrom<[f64; 2]> for AffineMap {
    type Error = IfsError;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<AffineMap> for [f64; 2] {
    fn from(m: AffineMap) -> Self {
        [m.a, m.b]
    }
}

/// Free-standing form of [`AffineMap::invert`].
pub fn invert_map(map: &AffineMap, y: f64) -> Result<f64> {
    map.invert(y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    W1,
    W2,
    Q1,
    Q2,
}

impl MapKind {
    pub const ALL: [MapKind; 4] = [MapKind::W1, MapKind::W2, MapKind::Q1, MapKind::Q2];

    pub fn name(&self) -> &'static str {
        match self {
            MapKind::W1 => "w1",
            MapKind::W2 => "w2",
            MapKind::Q1 => "q1",
            MapKind::Q2 => "q2",
        }
    }

    pub fn is_quantile(&self) -> bool {
        matches!(self, MapKind::Q1 | MapKind::Q2)
    }
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MapKind {
    type Err = IfsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "w1" => Ok(MapKind::W1),
            "w2" => Ok(MapKind::W2),
            "q1" => Ok(MapKind::Q1),
            "q2" => Ok(MapKind::Q2),
            other => Err(invalid(format!(
                "unknown map family '{other}', expected one of w1, w2, q1, q2"
            ))),
        }
    }
}

/// An ordered family of maps on `[0, 1]`.
///
/// `counts[i]` is the number of nominal quantile intervals folded into map `i`
/// (always 1 for the wavelet families).
#[derive(Debug, Clone, PartialEq)]
pub struct MapFamily {
    kind: MapKind,
    maps: Vec<AffineMap>,
    counts: Vec<usize>,
}

impl MapFamily {
    /// Wraps an explicit list of maps, each with merge count 1.
    pub fn from_maps(kind: MapKind, maps: Vec<AffineMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(invalid("map family must be nonempty"));
        }
        let counts = vec![1; maps.len()];
        Ok(Self { kind, maps, counts })
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// `max |b_i|`.
    pub fn contractivity(&self) -> f64 {
        self.maps.iter().map(|m| m.slope().abs()).fold(0.0, f64::max)
    }
}

/// Dyadic maps `(x + j - 1) / 2^i` for `i = 1..=i_star`, `j = 1..=2^i`.
pub fn build_wavelet_maps_w1(i_star: u32) -> Result<MapFamily> {
    if i_star == 0 {
        return Err(invalid("W1 requires i_star >= 1"));
    }
    if i_star > 20 {
        return Err(invalid("W1 i_star above 20 is not supported"));
    }
    let mut maps = Vec::with_capacity((1usize << (i_star + 1)) - 2);
    for i in 1..=i_star {
        let scale = 0.5f64.powi(i as i32);
        for j in 1..=(1u64 << i) {
            maps.push(AffineMap::new((j - 1) as f64 * scale, scale)?);
        }
    }
    MapFamily::from_maps(MapKind::W1, maps)
}

/// Harmonic maps `(x + j - 1) / i` for `i = 2..=i_star`, `j = 2..=i`.
pub fn build_wavelet_maps_w2(i_star: u32) -> Result<MapFamily> {
    if i_star < 2 {
        return Err(invalid("W2 requires i_star >= 2"));
    }
    let mut maps = Vec::new();
    for i in 2..=i_star {
        let scale = 1.0 / i as f64;
        for j in 2..=i {
            maps.push(AffineMap::new((j - 1) as f64 * scale, scale)?);
        }
    }
    MapFamily::from_maps(MapKind::W2, maps)
}

/// Quantile maps `w_i(x) = (q_{i+1} - q_i) x + q_i` over `num_maps + 1`
/// equally spaced quantile levels of the rescaled sample.
///
/// Zero-length intervals (ties) are folded into the next nondegenerate
/// interval, or into the last one when they trail. The returned family is
/// tagged `Q1`; use [`MapFamily::with_kind`] to relabel it.
pub fn build_quantile_maps(sample: &Sample, num_maps: usize) -> Result<MapFamily> {
    if num_maps == 0 {
        return Err(invalid("quantile family needs at least one map"));
    }
    let mut sorted = sample.canonical_values();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(IfsError::DegenerateSample(
            "all sample values are identical".into(),
        ));
    }
    let quantiles: Vec<f64> = (0..=num_maps)
        .map(|i| empirical_quantile_sorted(&sorted, i as f64 / num_maps as f64))
        .collect();

    let mut maps: Vec<AffineMap> = Vec::with_capacity(num_maps);
    let mut counts: Vec<usize> = Vec::with_capacity(num_maps);
    let mut pending = 0usize;
    for pair in quantiles.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi - lo >= 1.0 {
            return Err(IfsError::DegenerateSample(
                "a quantile interval spans the whole support, the map would not contract".into(),
            ));
        }
        if hi > lo {
            maps.push(AffineMap::new(lo, hi - lo)?);
            counts.push(1 + pending);
            pending = 0;
        } else {
            pending += 1;
        }
    }
    // at least one interval is nondegenerate since min < max
    if pending > 0 {
        *counts.last_mut().expect("nonempty family") += pending;
    }
    Ok(MapFamily {
        kind: MapKind::Q1,
        maps,
        counts,
    })
}

impl MapFamily {
    pub fn with_kind(mut self, kind: MapKind) -> Self {
        self.kind = kind;
        self
    }
}
