//! The principal's estimate of the agent's normalized mean rewards.
//!
//! Given past incentive vectors and the arms the agent picked in response,
//! the estimate minimizes the total max-gap loss
//!
//! ```text
//! L(s) = sum_tau max_a (s_a + pi_tau_a - s_chosen - pi_tau_chosen)
//! ```
//!
//! over `s_1 = 0` and `s` inside the normalized box. The objective is convex
//! and piecewise linear; four solvers are provided:
//!
//! * [`solve_exact_lp`]: the slack-variable LP on the dense simplex.
//! * [`solve_cutting_plane`]: Kelley's method in the `n - 1` free
//!   coordinates; exact, and cheap for long histories.
//! * [`solve_subgradient`]: projected subgradient with an adaptive Polyak
//!   level, used between exact refreshes.
//! * [`brute_force_grid`]: exhaustive grid search, a test oracle.

use serde::{Deserialize, Serialize};

use crate::error::EstimatorError;
use crate::history::History;
use crate::model::SearchBox;
use crate::simplex::{self, Constraint, LinearProgram, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    ExactLp,
    CuttingPlane,
    Subgradient,
    Grid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRewardEstimate {
    /// Estimate with `s_hat[0] == 0`.
    pub s_hat: Vec<f64>,
    /// Total loss at `s_hat`.
    pub objective: f64,
    pub solver: SolverKind,
    pub iterations: usize,
    /// False when an iterative solver stopped on its iteration budget.
    pub converged: bool,
}

/// Row count above which [`solve_exact`] switches from the full LP to the
/// cutting-plane method.
pub const FULL_LP_MAX_ROWS: usize = 200;

/// Largest arm count [`brute_force_grid`] accepts.
pub const GRID_MAX_ARMS: usize = 4;

/// Loss of one record: how far the chosen arm falls short of the best arm
/// under `s + pi`.
pub fn single_step_loss(s: &[f64], chosen_arm: usize, pi: &[f64]) -> Result<f64, EstimatorError> {
    if s.len() != pi.len() {
        return Err(EstimatorError::DimensionMismatch {
            expected: s.len(),
            got: pi.len(),
        });
    }
    if chosen_arm >= s.len() {
        return Err(EstimatorError::ArmOutOfRange {
            arm: chosen_arm,
            n: s.len(),
        });
    }
    Ok(record_loss(s, chosen_arm, pi).0)
}

// (loss, maximizing arm); zero loss reports the chosen arm itself.
#[inline]
fn record_loss(s: &[f64], chosen: usize, pi: &[f64]) -> (f64, usize) {
    let mut best = 0;
    let mut best_v = s[0] + pi[0];
    for a in 1..s.len() {
        let v = s[a] + pi[a];
        if v > best_v {
            best = a;
            best_v = v;
        }
    }
    let own = s[chosen] + pi[chosen];
    if best_v <= own {
        (0.0, chosen)
    } else {
        (best_v - own, best)
    }
}

/// Sum of [`single_step_loss`] over every record of `history`.
pub fn total_loss(s: &[f64], history: &History) -> Result<f64, EstimatorError> {
    if history.is_empty() {
        return Err(EstimatorError::EmptyHistory);
    }
    if s.len() != history.n() {
        return Err(EstimatorError::DimensionMismatch {
            expected: history.n(),
            got: s.len(),
        });
    }
    Ok(history
        .choices()
        .map(|(pi, arm)| record_loss(s, arm, pi).0)
        .sum())
}

// Loss and a subgradient with respect to the free coordinates s_2..s_n.
fn loss_and_subgradient(s: &[f64], history: &History, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut total = 0.0;
    for (pi, chosen) in history.choices() {
        let (loss, best) = record_loss(s, chosen, pi);
        if loss > 0.0 {
            total += loss;
            if best > 0 {
                grad[best - 1] += 1.0;
            }
            if chosen > 0 {
                grad[chosen - 1] -= 1.0;
            }
        }
    }
    total
}

fn check_input(history: &History, bounds: &SearchBox) -> Result<(), EstimatorError> {
    if history.is_empty() {
        return Err(EstimatorError::EmptyHistory);
    }
    if history.n() < 2 {
        return Err(EstimatorError::InvalidParameter(
            "at least two arms are required".into(),
        ));
    }
    if !(bounds.lo <= 0.0 && bounds.hi >= 0.0 && bounds.lo.is_finite() && bounds.hi.is_finite()) {
        return Err(EstimatorError::InvalidParameter(format!(
            "search box [{}, {}] must be finite and contain 0",
            bounds.lo, bounds.hi
        )));
    }
    Ok(())
}

fn clamp_into(s: &mut [f64], bounds: &SearchBox) {
    s[0] = 0.0;
    for v in &mut s[1..] {
        *v = v.clamp(bounds.lo, bounds.hi);
    }
}

/// Exact minimizer through the slack-variable linear program.
///
/// Variables are the free coordinates (shifted to start at the box's lower
/// edge) and one slack per record. Each slack is constrained non-negative,
/// which never cuts off an optimum since a minimizing slack equals its
/// record's loss.
pub fn solve_exact_lp(
    history: &History,
    bounds: &SearchBox,
) -> Result<NormalizedRewardEstimate, EstimatorError> {
    check_input(history, bounds)?;
    let n = history.n();
    let d = n - 1;
    let m = history.len();
    let nv = d + m;
    let lo = bounds.lo;
    let width = bounds.width();

    let mut constraints = Vec::with_capacity(m * d + d);
    for (tau, (pi, chosen)) in history.choices().enumerate() {
        for a in 0..n {
            if a == chosen {
                continue;
            }
            // s_a - s_chosen - y_tau <= pi_chosen - pi_a, with s_b = lo + u_b for b > 0.
            let mut coeffs = vec![0.0; nv];
            let mut rhs = pi[chosen] - pi[a];
            if a > 0 {
                coeffs[a - 1] += 1.0;
                rhs -= lo;
            }
            if chosen > 0 {
                coeffs[chosen - 1] -= 1.0;
                rhs += lo;
            }
            coeffs[d + tau] = -1.0;
            constraints.push(Constraint::le(coeffs, rhs));
        }
    }
    for a in 0..d {
        let mut coeffs = vec![0.0; nv];
        coeffs[a] = 1.0;
        constraints.push(Constraint::le(coeffs, width));
    }
    let mut objective = vec![0.0; nv];
    objective[d..].iter_mut().for_each(|c| *c = 1.0);

    let lp = LinearProgram {
        objective,
        constraints,
    };
    let sol = simplex::solve(&lp, &SimplexOptions::default()).map_err(|e| {
        let iterations = match e {
            crate::error::LpError::IterationLimit { iterations } => iterations,
            _ => 0,
        };
        match e {
            crate::error::LpError::Infeasible | crate::error::LpError::Unbounded => {
                EstimatorError::Internal(format!("estimator LP reported {e}"))
            }
            _ => EstimatorError::Solver {
                iterations,
                source: e,
            },
        }
    })?;

    let mut s_hat = vec![0.0; n];
    for a in 1..n {
        s_hat[a] = lo + sol.x[a - 1];
    }
    clamp_into(&mut s_hat, bounds);
    let mut objective = total_loss(&s_hat, history)?;
    if (objective - sol.objective).abs() > 1e-9 * objective.abs().max(1.0) {
        return Err(EstimatorError::Internal(format!(
            "LP objective {} disagrees with the loss {} at its solution",
            sol.objective, objective
        )));
    }
    let mut iterations = sol.iterations;
    if objective > 0.0 && sol.objective <= 1e-9 {
        // A zero-loss vertex sits on the boundary of the consistent region
        // and picks up rounding error; move to a point with positive margins.
        if let Some((inner, pivots)) = max_margin_point(history, bounds)? {
            let inner_loss = total_loss(&inner, history)?;
            if inner_loss < objective {
                s_hat = inner;
                objective = inner_loss;
            }
            iterations += pivots;
        }
    }
    Ok(NormalizedRewardEstimate {
        s_hat,
        objective,
        solver: SolverKind::ExactLp,
        iterations,
        converged: true,
    })
}

// Point of the consistent region {s : every chosen arm maximizes s + pi}
// maximizing the smallest margin (capped at 1). None when the region has
// no interior.
fn max_margin_point(
    history: &History,
    bounds: &SearchBox,
) -> Result<Option<(Vec<f64>, usize)>, EstimatorError> {
    let n = history.n();
    let d = n - 1;
    let nv = d + 1;
    let lo = bounds.lo;
    let mut constraints = Vec::with_capacity(history.len() * d + d + 1);
    for (pi, chosen) in history.choices() {
        for a in (0..n).filter(|&a| a != chosen) {
            // s_a - s_chosen + margin <= pi_chosen - pi_a
            let mut coeffs = vec![0.0; nv];
            let mut rhs = pi[chosen] - pi[a];
            if a > 0 {
                coeffs[a - 1] += 1.0;
                rhs -= lo;
            }
            if chosen > 0 {
                coeffs[chosen - 1] -= 1.0;
                rhs += lo;
            }
            coeffs[d] = 1.0;
            constraints.push(Constraint::le(coeffs, rhs));
        }
    }
    for a in 0..nv {
        let mut coeffs = vec![0.0; nv];
        coeffs[a] = 1.0;
        let cap = if a < d { bounds.width() } else { 1.0 };
        constraints.push(Constraint::le(coeffs, cap));
    }
    let mut objective = vec![0.0; nv];
    objective[d] = -1.0;
    let lp = LinearProgram {
        objective,
        constraints,
    };
    let sol = match simplex::solve(&lp, &SimplexOptions::default()) {
        Ok(sol) => sol,
        Err(crate::error::LpError::Infeasible) => return Ok(None),
        Err(e) => {
            return Err(EstimatorError::Solver {
                iterations: 0,
                source: e,
            })
        }
    };
    if sol.x[d] <= 1e-9 {
        return Ok(None);
    }
    let mut s = vec![0.0; n];
    for a in 1..n {
        s[a] = lo + sol.x[a - 1];
    }
    clamp_into(&mut s, bounds);
    Ok(Some((s, sol.iterations)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CuttingPlaneOptions {
    pub max_iters: usize,
    /// Relative optimality gap at which to stop.
    pub tol: f64,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for CuttingPlaneOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-9,
            warm_start: None,
        }
    }
}

/// Exact minimizer by Kelley's cutting-plane method.
///
/// Each iteration adds the linearization `L(s_i) + g_i'(s - s_i)` of the
/// objective at the latest master solution. The master problem
/// `min z s.t. z >= cut_i(s), s in box` is solved through its dual, which
/// has `n` rows regardless of how many cuts have accumulated. The method
/// stops once the master lower bound meets the best evaluated loss.
pub fn solve_cutting_plane(
    history: &History,
    bounds: &SearchBox,
    opts: &CuttingPlaneOptions,
) -> Result<NormalizedRewardEstimate, EstimatorError> {
    check_input(history, bounds)?;
    let n = history.n();
    let d = n - 1;
    let lo = bounds.lo;
    let width = bounds.width();

    let mut s = match &opts.warm_start {
        Some(w) if w.len() == n => w.clone(),
        Some(w) => {
            return Err(EstimatorError::DimensionMismatch {
                expected: n,
                got: w.len(),
            })
        }
        None => vec![0.0; n],
    };
    clamp_into(&mut s, bounds);

    let mut grad = vec![0.0; d];
    // Each cut is z - g'u >= b with u = s[1..] - lo.
    let mut cut_g: Vec<Vec<f64>> = Vec::new();
    let mut cut_b: Vec<f64> = Vec::new();

    let mut best_s = s.clone();
    let mut best_f = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        iterations += 1;
        let f = loss_and_subgradient(&s, history, &mut grad);
        if f < best_f {
            best_f = f;
            best_s.copy_from_slice(&s);
        }
        if best_f == 0.0 {
            converged = true;
            break;
        }
        // f + g'(s' - s) with s' = lo + u  =>  z - g'u >= f - g's + lo * sum(g)
        let b = f - grad.iter().zip(&s[1..]).map(|(g, x)| g * x).sum::<f64>()
            + lo * grad.iter().sum::<f64>();
        cut_g.push(grad.clone());
        cut_b.push(b);

        let (lower, u) = solve_master(&cut_g, &cut_b, width, d)?;
        if best_f - lower <= opts.tol * (1.0 + best_f.abs()) {
            converged = true;
            break;
        }
        for a in 0..d {
            s[a + 1] = lo + u[a];
        }
        clamp_into(&mut s, bounds);
    }

    Ok(NormalizedRewardEstimate {
        s_hat: best_s,
        objective: best_f,
        solver: SolverKind::CuttingPlane,
        iterations,
        converged,
    })
}

// Dual of the master: min -b'l + W sum(mu) s.t. sum(l) <= 1,
// -sum_i l_i g_ia - mu_a <= 0, l, mu >= 0. The master's (z, u) are the
// negated row multipliers.
fn solve_master(
    cut_g: &[Vec<f64>],
    cut_b: &[f64],
    width: f64,
    d: usize,
) -> Result<(f64, Vec<f64>), EstimatorError> {
    let k = cut_b.len();
    let nv = k + d;
    let mut objective = Vec::with_capacity(nv);
    objective.extend(cut_b.iter().map(|b| -b));
    objective.extend(std::iter::repeat_n(width, d));

    let mut constraints = Vec::with_capacity(d + 1);
    let mut simplex_row = vec![0.0; nv];
    simplex_row[..k].iter_mut().for_each(|c| *c = 1.0);
    constraints.push(Constraint::le(simplex_row, 1.0));
    for a in 0..d {
        let mut row = vec![0.0; nv];
        for (i, g) in cut_g.iter().enumerate() {
            row[i] = -g[a];
        }
        row[k + a] = -1.0;
        constraints.push(Constraint::le(row, 0.0));
    }
    let lp = LinearProgram {
        objective,
        constraints,
    };
    let opts = SimplexOptions {
        rule: simplex::PivotRule::Dantzig,
        ..Default::default()
    };
    let sol = simplex::solve(&lp, &opts).map_err(|e| match e {
        crate::error::LpError::IterationLimit { iterations } => EstimatorError::Solver {
            iterations,
            source: e,
        },
        other => EstimatorError::Internal(format!("cutting-plane master reported {other}")),
    })?;
    let lower = -sol.objective;
    let u = sol.duals[1..]
        .iter()
        .map(|y| (-y).clamp(0.0, width))
        .collect();
    Ok((lower, u))
}

/// Exact minimizer, choosing the full LP for small histories and the
/// cutting-plane method otherwise.
pub fn solve_exact(
    history: &History,
    bounds: &SearchBox,
    warm_start: Option<&[f64]>,
) -> Result<NormalizedRewardEstimate, EstimatorError> {
    let rows = history.len() * history.n().saturating_sub(1);
    if rows <= FULL_LP_MAX_ROWS {
        solve_exact_lp(history, bounds)
    } else {
        solve_cutting_plane(
            history,
            bounds,
            &CuttingPlaneOptions {
                warm_start: warm_start.map(<[f64]>::to_vec),
                ..Default::default()
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// Polyak steps toward a target level `best - gap`; the gap halves
    /// whenever progress stalls.
    AdaptivePolyak { initial_gap: f64 },
    /// Normalized steps of length `scale / sqrt(k + 1)`.
    Diminishing { scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientOptions {
    pub max_iters: usize,
    pub step: StepSchedule,
    /// Stop once the Polyak gap falls below `tol * (1 + best)`.
    pub tol: f64,
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SubgradientOptions {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            step: StepSchedule::AdaptivePolyak { initial_gap: 0.0 },
            tol: 1e-4,
            warm_start: None,
        }
    }
}

/// Projected subgradient descent on the free coordinates, keeping the best
/// iterate.
pub fn solve_subgradient(
    history: &History,
    bounds: &SearchBox,
    opts: &SubgradientOptions,
) -> Result<NormalizedRewardEstimate, EstimatorError> {
    check_input(history, bounds)?;
    if opts.max_iters == 0 {
        return Err(EstimatorError::InvalidParameter(
            "max_iters must be positive".into(),
        ));
    }
    let n = history.n();
    let d = n - 1;
    let mut s = match &opts.warm_start {
        Some(w) if w.len() == n => w.clone(),
        Some(w) => {
            return Err(EstimatorError::DimensionMismatch {
                expected: n,
                got: w.len(),
            })
        }
        None => vec![0.0; n],
    };
    clamp_into(&mut s, bounds);

    let mut grad = vec![0.0; d];
    let mut best_s = s.clone();
    let mut best_f = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    // Adaptive level state.
    let path_budget = bounds.width() * (d as f64).sqrt();
    let mut gap = f64::NAN;
    let mut record_at_reset = f64::INFINITY;
    let mut path = 0.0;

    for k in 0..opts.max_iters {
        iterations = k + 1;
        let f = loss_and_subgradient(&s, history, &mut grad);
        if f < best_f {
            best_f = f;
            best_s.copy_from_slice(&s);
        }
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if best_f == 0.0 || g2 == 0.0 {
            converged = true;
            break;
        }

        let step = match opts.step {
            StepSchedule::AdaptivePolyak { initial_gap } => {
                if gap.is_nan() {
                    gap = if initial_gap > 0.0 {
                        initial_gap
                    } else {
                        0.5 * f.max(1e-3)
                    };
                    record_at_reset = best_f;
                }
                if best_f <= record_at_reset - 0.5 * gap {
                    record_at_reset = best_f;
                    path = 0.0;
                } else if path > path_budget {
                    gap *= 0.5;
                    record_at_reset = best_f;
                    path = 0.0;
                    s.copy_from_slice(&best_s);
                    continue;
                }
                if gap <= opts.tol * (1.0 + best_f.abs()) {
                    converged = true;
                    break;
                }
                let level = record_at_reset - gap;
                let step = (f - level).max(0.0) / g2;
                path += step * g2.sqrt();
                step
            }
            StepSchedule::Diminishing { scale } => scale / ((k + 1) as f64).sqrt() / g2.sqrt(),
        };

        for a in 0..d {
            s[a + 1] -= step * grad[a];
        }
        clamp_into(&mut s, bounds);
    }

    Ok(NormalizedRewardEstimate {
        s_hat: best_s,
        objective: best_f,
        solver: SolverKind::Subgradient,
        iterations,
        converged,
    })
}

/// Evaluates the loss at every point of a regular grid over the box and
/// returns the best one.
///
/// Grid points are `lo + i * resolution` up to `hi`, plus `hi` itself.
pub fn brute_force_grid(
    history: &History,
    bounds: &SearchBox,
    resolution: f64,
) -> Result<NormalizedRewardEstimate, EstimatorError> {
    check_input(history, bounds)?;
    let n = history.n();
    if n > GRID_MAX_ARMS {
        return Err(EstimatorError::GridTooLarge {
            n,
            limit: GRID_MAX_ARMS,
        });
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(EstimatorError::InvalidParameter(format!(
            "grid resolution must be positive (got {resolution})"
        )));
    }
    let mut axis: Vec<f64> = Vec::new();
    let steps = (bounds.width() / resolution + 1e-9).floor() as usize;
    for i in 0..=steps {
        axis.push((bounds.lo + i as f64 * resolution).min(bounds.hi));
    }
    if *axis.last().expect("non-empty axis") < bounds.hi {
        axis.push(bounds.hi);
    }

    let d = n - 1;
    let m = axis.len();
    let total: usize = m.pow(d as u32);
    let mut idx = vec![0usize; d];
    let mut s = vec![0.0; n];
    let mut best_s = s.clone();
    let mut best_f = f64::INFINITY;
    for _ in 0..total {
        for a in 0..d {
            s[a + 1] = axis[idx[a]];
        }
        let f: f64 = history
            .choices()
            .map(|(pi, chosen)| record_loss(&s, chosen, pi).0)
            .sum();
        if f < best_f {
            best_f = f;
            best_s.copy_from_slice(&s);
        }
        for digit in idx.iter_mut() {
            *digit += 1;
            if *digit < m {
                break;
            }
            *digit = 0;
        }
    }
    Ok(NormalizedRewardEstimate {
        s_hat: best_s,
        objective: best_f,
        solver: SolverKind::Grid,
        iterations: total,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{argmax_sum, IncentiveRange};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn range() -> IncentiveRange {
        IncentiveRange {
            lo: -20.0,
            hi: 60.0,
        }
    }

    fn sbox() -> SearchBox {
        SearchBox::new(-70.0, 70.0)
    }

    fn random_history(
        rng: &mut ChaCha8Rng,
        n: usize,
        records: usize,
        s0: Option<&[f64]>,
    ) -> History {
        let choices: Vec<(Vec<f64>, usize)> = (0..records)
            .map(|_| {
                let pi: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..60.0)).collect();
                let arm = match s0 {
                    Some(s) => argmax_sum(s, &pi),
                    None => rng.random_range(0..n),
                };
                (pi, arm)
            })
            .collect();
        History::from_choices(n, range(), choices).unwrap()
    }

    #[test]
    fn single_step_examples() {
        assert_eq!(single_step_loss(&[0.0, -5.0], 1, &[0.0, 5.0]).unwrap(), 0.0);
        assert_eq!(single_step_loss(&[0.0, 0.0], 0, &[0.0, 5.0]).unwrap(), 5.0);
        assert!(matches!(
            single_step_loss(&[0.0, 0.0], 0, &[0.0]),
            Err(EstimatorError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            single_step_loss(&[0.0, 0.0], 2, &[0.0, 1.0]),
            Err(EstimatorError::ArmOutOfRange { .. })
        ));
    }

    #[test]
    fn total_loss_adds_records() {
        let h =
            History::from_choices(2, range(), [(vec![0.0, 5.0], 0), (vec![0.0, 5.0], 0)]).unwrap();
        assert_eq!(total_loss(&[0.0, 0.0], &h).unwrap(), 10.0);
        let empty = History::new(2, range());
        assert_eq!(
            total_loss(&[0.0, 0.0], &empty),
            Err(EstimatorError::EmptyHistory)
        );
    }

    #[test]
    fn exact_lp_single_record() {
        let h = History::from_choices(2, range(), [(vec![0.0, 5.0], 1)]).unwrap();
        let est = solve_exact_lp(&h, &sbox()).unwrap();
        assert_eq!(est.objective, 0.0);
        assert_eq!(est.s_hat[0], 0.0);
        assert!(est.s_hat[1] >= -5.0);
    }

    #[test]
    fn grid_single_record() {
        let h = History::from_choices(2, range(), [(vec![0.0, 5.0], 1)]).unwrap();
        let est = brute_force_grid(&h, &SearchBox::new(-1.0, 1.0), 0.5).unwrap();
        assert_eq!(est.objective, 0.0);
        assert_eq!(est.iterations, 5);
        let est = brute_force_grid(&h, &sbox(), 0.5).unwrap();
        assert_eq!(est.objective, 0.0);
    }

    #[test]
    fn grid_refuses_many_arms() {
        let h = History::from_choices(5, range(), [(vec![0.0; 5], 0)]).unwrap();
        assert!(matches!(
            brute_force_grid(&h, &sbox(), 1.0),
            Err(EstimatorError::GridTooLarge { n: 5, .. })
        ));
        let h2 = History::from_choices(2, range(), [(vec![0.0; 2], 0)]).unwrap();
        assert!(brute_force_grid(&h2, &sbox(), 0.0).is_err());
    }

    #[test]
    fn perfect_agent_history_has_zero_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s0 = [0.0, -38.0, -18.0, 5.0, 15.0];
        let h = random_history(&mut rng, 5, 60, Some(&s0));
        assert_eq!(total_loss(&s0, &h).unwrap(), 0.0);
        let est = solve_exact_lp(&h, &sbox()).unwrap();
        assert_eq!(est.objective, 0.0);
        let cp = solve_cutting_plane(&h, &sbox(), &CuttingPlaneOptions::default()).unwrap();
        assert!(cp.objective <= 1e-9, "{}", cp.objective);
    }

    #[test]
    fn exact_solvers_agree_on_noisy_histories() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 5] {
            for _ in 0..5 {
                let h = random_history(&mut rng, n, 40, None);
                let lp = solve_exact_lp(&h, &sbox()).unwrap();
                let cp = solve_cutting_plane(&h, &sbox(), &CuttingPlaneOptions::default()).unwrap();
                assert!(cp.converged);
                assert!(
                    (lp.objective - cp.objective).abs() <= 1e-7 * (1.0 + lp.objective),
                    "n={n}: lp {} vs cutting plane {}",
                    lp.objective,
                    cp.objective
                );
            }
        }
    }

    #[test]
    fn exact_lp_dominates_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let h = random_history(&mut rng, 4, 25, None);
            let est = solve_exact_lp(&h, &sbox()).unwrap();
            for _ in 0..1000 {
                let mut s = vec![0.0; 4];
                for v in &mut s[1..] {
                    *v = rng.random_range(-70.0..70.0);
                }
                assert!(est.objective <= total_loss(&s, &h).unwrap() + 1e-9);
            }
        }
    }

    #[test]
    fn lp_objective_grows_as_records_append() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_history(&mut rng, 3, 30, None);
        let mut prev = 0.0;
        for len in 1..=h.len() {
            let obj = solve_exact_lp(&h.prefix(len), &sbox()).unwrap().objective;
            assert!(obj >= prev - 1e-9, "len {len}: {obj} < {prev}");
            prev = obj;
        }
    }

    #[test]
    fn lp_objective_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let records: Vec<(Vec<f64>, usize)> = (0..20)
            .map(|_| {
                let pi = (0..4).map(|_| rng.random_range(-10.0..50.0)).collect();
                (pi, rng.random_range(0..4))
            })
            .collect();
        let h = History::from_choices(4, range(), records.clone()).unwrap();
        let a = solve_exact_lp(&h, &sbox()).unwrap().objective;
        for c in [-10.0, 7.5, 10.0] {
            let shifted = records
                .iter()
                .map(|(pi, arm)| (pi.iter().map(|x| x + c).collect::<Vec<_>>(), *arm));
            let hs = History::from_choices(4, range(), shifted).unwrap();
            let b = solve_exact_lp(&hs, &sbox()).unwrap().objective;
            assert!((a - b).abs() < 1e-9 * (1.0 + a), "{a} vs {b}");
        }
    }

    #[test]
    fn subgradient_reaches_zero_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s0 = [0.0, -38.0, -18.0, 5.0, 15.0];
        let h = random_history(&mut rng, 5, 80, Some(&s0));
        let opts = SubgradientOptions {
            tol: 1e-6,
            ..Default::default()
        };
        let est = solve_subgradient(&h, &sbox(), &opts).unwrap();
        assert!(est.objective <= opts.tol, "{}", est.objective);
    }

    #[test]
    fn subgradient_constant_history() {
        // Same incentives and arm repeated: the optimum is zero (arm 2 can be
        // made a maximizer inside the box).
        let records = vec![(vec![0.0, 5.0, 0.0], 1); 12];
        let h = History::from_choices(3, range(), records).unwrap();
        let est = solve_subgradient(&h, &sbox(), &SubgradientOptions::default()).unwrap();
        assert!(est.converged);
        assert_eq!(est.objective, 0.0);
    }

    #[test]
    fn subgradient_diminishing_schedule_improves_on_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_history(&mut rng, 3, 30, None);
        let start = total_loss(&[0.0; 3], &h).unwrap();
        let opts = SubgradientOptions {
            max_iters: 3000,
            step: StepSchedule::Diminishing { scale: 10.0 },
            ..Default::default()
        };
        let est = solve_subgradient(&h, &sbox(), &opts).unwrap();
        let exact = solve_exact_lp(&h, &sbox()).unwrap().objective;
        assert!(est.objective <= start);
        assert!(est.objective >= exact - 1e-9);
        // Convergence is only claimed on a zero subgradient, which certifies optimality.
        if est.converged {
            assert!((est.objective - exact).abs() <= 1e-9 * (1.0 + exact));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn loss_is_zero_iff_chosen_arm_maximizes(
            (s, pi, arm) in (2usize..6).prop_flat_map(|n| (
                prop::collection::vec(-70.0f64..70.0, n),
                prop::collection::vec(-20.0f64..60.0, n),
                0..n,
            ))
        ) {
            let loss = single_step_loss(&s, arm, &pi).unwrap();
            prop_assert!(loss >= 0.0);
            let best = argmax_sum(&s, &pi);
            let own = s[arm] + pi[arm];
            let is_max = own >= s[best] + pi[best];
            prop_assert_eq!(loss == 0.0, is_max);
            prop_assert_eq!(single_step_loss(&s, best, &pi).unwrap(), 0.0);
        }
    }
}
