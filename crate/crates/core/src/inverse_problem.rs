//! The collage quadratic program and its penalized box-constrained solution.
//!
//! Given transfer matrix `A` and target moments `g`, the collage distance
//! `S(p) = sum_k (h_k - g_k)^2 / k^2` is the quadratic `p'Qp + B'p + C`. The
//! simplex constraint is replaced by the penalty `lambda (1 - sum p)^2` and
//! the resulting problem is minimized over the box `[0, 1]^N` with a
//! projected limited-memory quasi-Newton method. `lambda` is escalated until
//! the simplex residual is small, then `p` is renormalized exactly.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, IfsError, Result};
use crate::moments::{push_forward_moments, MomentVector, TransferMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    q: DMatrix<f64>,
    b: DVector<f64>,
    c: f64,
    order: usize,
}

impl QuadraticProblem {
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Moment truncation order the sums were cut at.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

/// A point of the simplex: `p_i in [0, 1]`, `sum p_i = 1` within `1e-9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub const SUM_TOL: f64 = 1e-9;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(invalid("probability vector must be nonempty"));
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("probabilities must lie in [0, 1]"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// `p_i = w_i / sum w`.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(invalid("weights must be nonnegative with a positive sum"));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = IfsError;

    fn try_from(p: Vec<f64>) -> Result<Self> {
        Self::new(p)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(p: ProbabilityVector) -> Self {
        p.0
    }
}

impl std::ops::Deref for ProbabilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda_init: f64,
    /// Infinity norm of the projected gradient that counts as stationary.
    pub tol_grad: f64,
    /// Relative objective change that counts as stalled.
    pub tol_rel_objective: f64,
    /// Iteration cap per penalty level.
    pub max_iter: usize,
    /// Number of stored curvature pairs.
    pub history: usize,
    /// Number of penalty levels tried, each ten times the previous.
    pub penalty_levels: usize,
    /// Simplex residual below which no further escalation happens.
    pub residual_target: f64,
    /// Simplex residual above which the solve is reported as failed.
    pub residual_limit: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda_init: 1e3,
            tol_grad: 1e-8,
            tol_rel_objective: 1e-12,
            max_iter: 500,
            history: 10,
            penalty_levels: 6,
            residual_target: 1e-6,
            residual_limit: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub solution: ProbabilityVector,
    /// `S(p)` at the returned solution.
    pub objective: f64,
    /// `|1 - sum p|` before the final renormalization.
    pub penalty_residual: f64,
    /// Quasi-Newton iterations summed over all penalty levels.
    pub iterations: usize,
    pub converged: bool,
    /// Penalty weight of the last level solved.
    pub lambda: f64,
}

/// `q_ij = sum_k A_ki A_kj / k^2`, `B_i = -2 sum_k g_k A_ki / k^2`,
/// `C = sum_k g_k^2 / k^2`, all for `k = 1..=M`.
pub fn assemble_quadratic_problem(a: &TransferMatrix, g: &MomentVector) -> Result<QuadraticProblem> {
    let order = a.order();
    if order == 0 || g.order() != order {
        return Err(invalid(format!(
            "transfer matrix has {} moment rows but the target has order {}",
            order,
            g.order()
        )));
    }
    let weights = DVector::from_fn(order, |r, _| 1.0 / ((r + 1) as f64).powi(2));
    let target = DVector::from_fn(order, |r, _| g.get(r + 1));
    let weighted = DMatrix::from_fn(order, a.num_maps(), |r, i| weights[r] * a.matrix()[(r, i)]);
    let mut q = a.matrix().transpose() * &weighted;
    // exact symmetry regardless of summation order
    for i in 0..q.nrows() {
        for j in 0..i {
            let avg = 0.5 * (q[(i, j)] + q[(j, i)]);
            q[(i, j)] = avg;
            q[(j, i)] = avg;
        }
    }
    let b = -2.0 * weighted.transpose() * &target;
    let c = target.iter().zip(weights.iter()).map(|(t, w)| t * t * w).sum();
    Ok(QuadraticProblem { q, b, c, order })
}

fn quadratic_value(qp: &QuadraticProblem, p: &DVector<f64>) -> f64 {
    p.dot(&(&qp.q * p)) + qp.b.dot(p) + qp.c
}

/// `S(p) = p'Qp + B'p + C`, floored at zero against rounding.
pub fn collage_objective(qp: &QuadraticProblem, p: &[f64]) -> f64 {
    quadratic_value(qp, &DVector::from_column_slice(p)).max(0.0)
}

/// Direct evaluation of `sum_k (h_k - g_k)^2 / k^2` through the pushed-forward moments.
pub fn collage_distance_direct(a: &TransferMatrix, g: &MomentVector, p: &[f64]) -> Result<f64> {
    let h = push_forward_moments(a, p)?;
    Ok((1..=g.order())
        .map(|k| (h.get(k) - g.get(k)).powi(2) / (k * k) as f64)
        .sum())
}

/// `L(p) = S(p) + lambda (1 - sum p)^2` and its gradient
/// `2Qp + B - 2 lambda (1 - sum p) 1`.
pub fn penalized_objective_with_gradient(qp: &QuadraticProblem, p: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let p = DVector::from_column_slice(p);
    let (value, grad) = penalized(qp, &p, lambda);
    (value, grad.iter().copied().collect())
}

fn penalized(qp: &QuadraticProblem, p: &DVector<f64>, lambda: f64) -> (f64, DVector<f64>) {
    let qpv = &qp.q * p;
    let slack = 1.0 - p.sum();
    let value = p.dot(&qpv) + qp.b.dot(p) + qp.c + lambda * slack * slack;
    let mut grad = 2.0 * qpv + &qp.b;
    grad.add_scalar_mut(-2.0 * lambda * slack);
    (value, grad)
}

fn project_box(x: &mut DVector<f64>) {
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

fn projected_gradient_norm(x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    x.iter()
        .zip(g.iter())
        .map(|(&xi, &gi)| (xi - (xi - gi).clamp(0.0, 1.0)).abs())
        .fold(0.0, f64::max)
}

struct InnerOutcome {
    x: DVector<f64>,
    iterations: usize,
    converged: bool,
}

struct CurvaturePair {
    s: DVector<f64>,
    y: DVector<f64>,
}

fn masked_dot(a: &DVector<f64>, b: &DVector<f64>, free: &[bool]) -> f64 {
    a.iter()
        .zip(b.iter())
        .zip(free)
        .filter(|(_, f)| **f)
        .map(|((x, y), _)| x * y)
        .sum()
}

/// Two-loop recursion restricted to the free variables.
fn quasi_newton_direction(g: &DVector<f64>, history: &VecDeque<CurvaturePair>, free: &[bool]) -> DVector<f64> {
    let mut q = DVector::from_fn(g.len(), |i, _| if free[i] { g[i] } else { 0.0 });
    let mut alphas = Vec::with_capacity(history.len());
    let mut gamma = None;
    for pair in history.iter().rev() {
        let sy = masked_dot(&pair.s, &pair.y, free);
        if sy <= 0.0 {
            alphas.push(None);
            continue;
        }
        if gamma.is_none() {
            gamma = Some(sy / masked_dot(&pair.y, &pair.y, free));
        }
        let rho = 1.0 / sy;
        let alpha = rho * masked_dot(&pair.s, &q, free);
        for i in 0..q.len() {
            if free[i] {
                q[i] -= alpha * pair.y[i];
            }
        }
        alphas.push(Some((alpha, rho)));
    }
    q *= gamma.unwrap_or(1.0);
    for (pair, coeffs) in history.iter().zip(alphas.iter().rev()) {
        if let Some((alpha, rho)) = coeffs {
            let beta = rho * masked_dot(&pair.y, &q, free);
            for i in 0..q.len() {
                if free[i] {
                    q[i] += (alpha - beta) * pair.s[i];
                }
            }
        }
    }
    -q
}

fn check_finite(value: f64, grad: &DVector<f64>) -> Result<()> {
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(IfsError::NumericalFailure(
            "objective or gradient is not finite".into(),
        ));
    }
    Ok(())
}

/// Minimizes `L_lambda` over `[0, 1]^N` starting from the feasible point `x0`.
fn minimize_on_box(qp: &QuadraticProblem, lambda: f64, x0: DVector<f64>, cfg: &SolverConfig) -> Result<InnerOutcome> {
    let n = x0.len();
    let mut x = x0;
    let (mut f, mut g) = penalized(qp, &x, lambda);
    check_finite(f, &g)?;
    let mut history: VecDeque<CurvaturePair> = VecDeque::with_capacity(cfg.history);
    let mut free = vec![true; n];

    for iter in 0..cfg.max_iter {
        if projected_gradient_norm(&x, &g) < cfg.tol_grad {
            return Ok(InnerOutcome { x, iterations: iter, converged: true });
        }
        for i in 0..n {
            free[i] = !((x[i] <= 0.0 && g[i] > 0.0) || (x[i] >= 1.0 && g[i] < 0.0));
        }

        let mut direction = quasi_newton_direction(&g, &history, &free);
        if g.dot(&direction) >= 0.0 {
            history.clear();
            direction = DVector::from_fn(n, |i, _| if free[i] { -g[i] } else { 0.0 });
        }

        let mut accepted = None;
        for attempt in 0..2 {
            // exact minimizer of the quadratic along the ray, before projection
            let hd = {
                let mut hd = 2.0 * (&qp.q * &direction);
                hd.add_scalar_mut(2.0 * lambda * direction.sum());
                hd
            };
            let curvature = direction.dot(&hd);
            let slope = g.dot(&direction);
            let mut step = if curvature > 0.0 { -slope / curvature } else { 1.0 };
            if !step.is_finite() || step <= 0.0 {
                step = 1.0;
            }
            for _ in 0..60 {
                let mut trial = &x + step * &direction;
                project_box(&mut trial);
                let moved = &trial - &x;
                if moved.amax() == 0.0 {
                    break;
                }
                let (ft, gt) = penalized(qp, &trial, lambda);
                check_finite(ft, &gt)?;
                if ft <= f + 1e-4 * g.dot(&moved) {
                    accepted = Some((trial, ft, gt));
                    break;
                }
                step *= 0.5;
            }
            if accepted.is_some() || attempt == 1 || history.is_empty() {
                break;
            }
            // curvature model misled the search; retry along steepest descent
            history.clear();
            direction = DVector::from_fn(n, |i, _| if free[i] { -g[i] } else { 0.0 });
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            return Ok(InnerOutcome { x, iterations: iter + 1, converged: false });
        };

        let s = &x_new - &x;
        let y = &g_new - &g;
        if s.dot(&y) > 1e-12 * y.norm_squared().max(f64::MIN_POSITIVE) {
            if history.len() == cfg.history {
                history.pop_front();
            }
            history.push_back(CurvaturePair { s, y });
        }
        let change = (f - f_new).abs();
        x = x_new;
        g = g_new;
        let scale = f.abs().max(f_new.abs());
        f = f_new;
        if change <= cfg.tol_rel_objective * scale {
            return Ok(InnerOutcome { x, iterations: iter + 1, converged: true });
        }
    }
    Ok(InnerOutcome { x, iterations: cfg.max_iter, converged: false })
}

/// Minimizes `S` over the simplex through escalating penalties on the box.
pub fn solve_box_constrained(qp: &QuadraticProblem, config: &SolverConfig) -> Result<SolverReport> {
    let n = qp.dim();
    if n == 0 {
        return Err(invalid("quadratic problem has no variables"));
    }
    if !(config.lambda_init > 0.0) || config.penalty_levels == 0 || config.history == 0 {
        return Err(invalid("solver needs lambda_init > 0, at least one penalty level and history >= 1"));
    }
    let start = DVector::from_element(n, 1.0 / n as f64);
    let start_objective = quadratic_value(qp, &start).max(0.0);

    let mut x = start.clone();
    let mut lambda = config.lambda_init;
    let mut iterations = 0;
    let mut converged = false;
    let mut residual = 0.0;
    for level in 0..config.penalty_levels {
        if level > 0 {
            lambda *= 10.0;
        }
        let outcome = minimize_on_box(qp, lambda, x, config)?;
        x = outcome.x;
        iterations += outcome.iterations;
        residual = (1.0 - x.sum()).abs();
        converged = outcome.converged && residual <= config.residual_target;
        if residual <= config.residual_target {
            break;
        }
    }

    let total = x.sum();
    let mut p: Vec<f64> = x.iter().map(|v| (v / total).clamp(0.0, 1.0)).collect();
    let mut objective = collage_objective(qp, &p);
    if !objective.is_finite() {
        return Err(IfsError::NumericalFailure("objective is not finite at the solution".into()));
    }
    if objective > start_objective {
        p = start.iter().copied().collect();
        objective = start_objective;
    }
    let report = SolverReport {
        solution: ProbabilityVector(p),
        objective,
        penalty_residual: residual,
        iterations,
        converged,
        lambda,
    };
    if residual > config.residual_limit || !(total > 0.0) {
        return Err(IfsError::NonConvergence(Box::new(report)));
    }
    Ok(report)
}
