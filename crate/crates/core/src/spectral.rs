//! Characteristic function of the IFS fixed point and the truncated Fourier
//! density estimator built from it.
//!
//! The characteristic function solves
//! `phi(t) = sum_k p_k exp(-i t a_k) phi(b_k t)`. It is computed by sweeping
//! that relation over a grid on `[0, t_max]` (the negative half follows from
//! `phi(-t) = conj(phi(t))`), interpolating `phi` at `b_k t` with a
//! four-point cubic stencil.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::ifs_operator::IfsModel;

#[derive(Debug, Clone, PartialEq)]
pub struct CharFnConfig {
    pub t_max: f64,
    /// Grid points over `[-t_max, t_max]`; must be odd so that `t = 0` is a node.
    pub grid_points: usize,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl CharFnConfig {
    pub const DEFAULT_GRID_POINTS: usize = 4097;

    pub fn with_t_max(t_max: f64) -> Self {
        Self {
            t_max,
            ..Self::default()
        }
    }
}

impl Default for CharFnConfig {
    fn default() -> Self {
        Self {
            t_max: 27.0,
            grid_points: Self::DEFAULT_GRID_POINTS,
            max_sweeps: 60,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CharFnEstimate {
    step: f64,
    /// Values at `t = j * step`, `j = 0..=K`.
    half: Vec<Complex64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// `sup_t |phi(t) - sum_k p_k exp(-i t a_k) phi(b_k t)|` over the grid.
    pub residual: f64,
}

impl CharFnEstimate {
    pub fn t_max(&self) -> f64 {
        self.step * (self.half.len() - 1) as f64
    }

    /// Cubic interpolation on the grid, with Hermitian extension to `t < 0`.
    /// Arguments beyond `t_max` are clamped to the grid edge.
    pub fn eval(&self, t: f64) -> Complex64 {
        if t < 0.0 {
            return self.eval(-t).conj();
        }
        let (base, theta) = stencil(self.half.len(), t / self.step);
        interpolate(&self.half, base, theta)
    }

    /// The full symmetric grid as `(t, phi(t))`, ascending in `t`.
    pub fn grid(&self) -> Vec<(f64, Complex64)> {
        let k = self.half.len() - 1;
        let mut out = Vec::with_capacity(2 * k + 1);
        for j in (1..=k).rev() {
            out.push((-(j as f64) * self.step, self.half[j].conj()));
        }
        for (j, v) in self.half.iter().enumerate() {
            out.push((j as f64 * self.step, *v));
        }
        out
    }
}

/// Base node and offset for the cubic stencil `base - 1 ..= base + 2` at
/// fractional grid position `pos >= 0`; positions past the last node clamp to it.
fn stencil(len: usize, pos: f64) -> (usize, f64) {
    let last = len - 1;
    if pos >= last as f64 {
        return (last - 2, 2.0);
    }
    let base = (pos.floor() as usize).min(last - 2);
    (base, pos - base as f64)
}

/// Lagrange cubic through nodes `base - 1 ..= base + 2`; the node at `-1`
/// is `conj(phi(step))`.
fn interpolate(values: &[Complex64], base: usize, theta: f64) -> Complex64 {
    let below = if base == 0 { values[1].conj() } else { values[base - 1] };
    let (t0, t1, t2, t3) = (theta + 1.0, theta, theta - 1.0, theta - 2.0);
    let w_below = -t1 * t2 * t3 / 6.0;
    let w0 = t0 * t2 * t3 / 2.0;
    let w1 = -t0 * t1 * t3 / 2.0;
    let w2 = t0 * t1 * t2 / 6.0;
    below * w_below + values[base] * w0 + values[base + 1] * w1 + values[base + 2] * w2
}

/// One precomputed term `p_k exp(-i t a_k)` with the stencil of `|b_k| t`.
#[derive(Clone, Copy)]
struct Term {
    weight: Complex64,
    base: usize,
    theta: f64,
    conjugate: bool,
}

fn sweep(terms: &[Vec<Term>], current: &[Complex64]) -> Vec<Complex64> {
    let mut next: Vec<Complex64> = terms
        .par_iter()
        .map(|row| {
            row.iter()
                .map(|term| {
                    let v = interpolate(current, term.base, term.theta);
                    let v = if term.conjugate { v.conj() } else { v };
                    term.weight * v
                })
                .sum()
        })
        .collect();
    next[0] = Complex64::new(1.0, 0.0);
    next
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Fixed point of the characteristic-function relation on a grid, starting from `phi = 1`.
pub fn char_fn_fixed_point(model: &IfsModel, config: &CharFnConfig) -> Result<CharFnEstimate> {
    if !(config.t_max > 0.0) || !config.t_max.is_finite() {
        return Err(invalid("t_max must be positive"));
    }
    if config.grid_points < 7 || config.grid_points.is_multiple_of(2) {
        return Err(invalid("grid_points must be odd and at least 7"));
    }
    if config.max_sweeps == 0 {
        return Err(invalid("max_sweeps must be positive"));
    }
    let k = (config.grid_points - 1) / 2;
    let step = config.t_max / k as f64;
    let p = model.probabilities().as_slice();
    let terms: Vec<Vec<Term>> = (0..=k)
        .map(|j| {
            let t = j as f64 * step;
            model
                .maps()
                .iter()
                .zip(p)
                .filter(|(_, &pk)| pk > 0.0)
                .map(|(m, &pk)| {
                    let (base, theta) = stencil(k + 1, m.slope().abs() * t / step);
                    Term {
                        weight: Complex64::from_polar(pk, -t * m.intercept()),
                        base,
                        theta,
                        conjugate: m.slope() < 0.0,
                    }
                })
                .collect()
        })
        .collect();

    let mut current = vec![Complex64::new(1.0, 0.0); k + 1];
    let mut iterations_used = 0;
    let mut converged = false;
    for _ in 0..config.max_sweeps {
        let next = sweep(&terms, &current);
        iterations_used += 1;
        let change = sup_diff(&next, &current);
        current = next;
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let residual = sup_diff(&sweep(&terms, &current), &current);
    Ok(CharFnEstimate {
        step,
        half: current,
        iterations_used,
        converged,
        residual,
    })
}

/// Outcome of the Fourier term-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermSelection {
    pub m: usize,
    /// True when no pair of small coefficients was found and the fallback was used.
    pub truncated: bool,
}

/// Smallest `m` with `|B_{m+1}|^2 < 2/(n+1)` and `|B_{m+2}|^2 < 2/(n+1)`;
/// `m_max - 2` when there is none. `coefficients[k]` is `B_k`, `k = 0..=m_max`.
pub fn select_num_terms(coefficients: &[Complex64], n: usize) -> Result<TermSelection> {
    if coefficients.len() < 3 {
        return Err(invalid("term selection needs B_0, B_1 and B_2 at least"));
    }
    let threshold = 2.0 / (n as f64 + 1.0);
    let m_max = coefficients.len() - 1;
    let found = (0..=m_max - 2).find(|&m| {
        coefficients[m + 1].norm_sqr() < threshold && coefficients[m + 2].norm_sqr() < threshold
    });
    Ok(match found {
        Some(m) => TermSelection { m, truncated: false },
        None => TermSelection {
            m: m_max - 2,
            truncated: true,
        },
    })
}

/// Truncated Fourier density on `[0, 1]` with period `2 pi`.
#[derive(Debug, Clone)]
pub struct FourierDensity {
    coefficients: Vec<Complex64>,
    m: usize,
    sample_size: usize,
    pub truncated: bool,
    pub char_fn_converged: bool,
}

impl FourierDensity {
    pub fn new(coefficients: Vec<Complex64>, m: usize, sample_size: usize) -> Result<Self> {
        if coefficients.is_empty() || m >= coefficients.len() {
            return Err(invalid("number of terms exceeds the available coefficients"));
        }
        Ok(Self {
            coefficients,
            m,
            sample_size,
            truncated: false,
            char_fn_converged: true,
        })
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn num_terms(&self) -> usize {
        self.m
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    /// Same coefficients with a different number of terms.
    pub fn with_terms(&self, m: usize) -> Result<Self> {
        let mut out = Self::new(self.coefficients.clone(), m, self.sample_size)?;
        out.truncated = self.truncated;
        out.char_fn_converged = self.char_fn_converged;
        Ok(out)
    }
}

/// `1/(2 pi) + (1/pi) sum_{k=1..m} (Re B_k cos kx - Im B_k sin kx)`.
///
/// Values may be negative; see [`density_estimate_clamped`].
pub fn density_estimate(fd: &FourierDensity, x: f64) -> f64 {
    let series: f64 = fd.coefficients[1..=fd.m]
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let kx = (i + 1) as f64 * x;
            b.re * kx.cos() - b.im * kx.sin()
        })
        .sum();
    1.0 / (2.0 * PI) + series / PI
}

pub fn density_estimate_clamped(fd: &FourierDensity, x: f64) -> f64 {
    density_estimate(fd, x).max(0.0)
}

/// Density on the model's original support: `f((y - alpha) / w) / w`.
pub fn density_on_support(model: &IfsModel, fd: &FourierDensity, y: f64) -> f64 {
    let s = model.support();
    density_estimate(fd, s.to_unit(y)) / s.width()
}

pub const DEFAULT_MAX_TERMS: usize = 25;

/// Characteristic function with `t_max = m_max + 2`, `B_k = phi(k)`, and term selection.
pub fn fit_density(model: &IfsModel, n: usize, m_max: usize) -> Result<FourierDensity> {
    if m_max < 2 {
        return Err(invalid("m_max must be at least 2"));
    }
    let t_max = (m_max + 2) as f64;
    // put every integer on the grid: K intervals with K a multiple of t_max
    let default_half = (CharFnConfig::DEFAULT_GRID_POINTS - 1) / 2;
    let per_unit = default_half.div_ceil(m_max + 2);
    let config = CharFnConfig {
        t_max,
        grid_points: 2 * per_unit * (m_max + 2) + 1,
        ..CharFnConfig::default()
    };
    let phi = char_fn_fixed_point(model, &config)?;
    let coefficients: Vec<Complex64> = (0..=m_max)
        .map(|k| phi.half[k * per_unit])
        .collect();
    let selection = select_num_terms(&coefficients, n)?;
    let mut fd = FourierDensity::new(coefficients, selection.m, n)?;
    fd.truncated = selection.truncated;
    fd.char_fn_converged = phi.converged;
    Ok(fd)
}
