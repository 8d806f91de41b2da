//! The principal: sample means of its own rewards, the exploration
//! schedule, buffered exploitation incentives and the full-knowledge oracle.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::compute_k_tilde;
use crate::error::{BoundsError, EngineError, EstimatorError};
use crate::estimator::{
    solve_exact, solve_subgradient, NormalizedRewardEstimate, SolverKind, StepSchedule,
    SubgradientOptions,
};
use crate::history::{History, HistoryRecord};
use crate::model::{argmax, max_entry, BufferOverride, GameConfig, IncentiveRange, SearchBox};

/// `min{1, m_pr / t^(1/2 - w)}`.
pub fn exploration_prob(t: usize, m_pr: f64, w: f64) -> f64 {
    (m_pr / (t as f64).powf(0.5 - w)).min(1.0)
}

/// Theoretical buffer scale
/// `3k (3(r_max - r_min) + gamma)^n (32n)^(1/6) / (1 - k sqrt(ln 2 k_tilde) / sqrt(k_tilde))`.
pub fn compute_b(
    k: f64,
    k_tilde: usize,
    r_min: f64,
    r_max: f64,
    gamma: f64,
    n: usize,
) -> Result<f64, BoundsError> {
    let kt = k_tilde as f64;
    let denom = 1.0 - k * (2.0 * kt).ln().sqrt() / kt.sqrt();
    if !(denom > 0.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "k sqrt(ln 2 k_tilde) must be below sqrt(k_tilde) (k = {k}, k_tilde = {k_tilde})"
        )));
    }
    let n = n as f64;
    Ok(3.0 * k * (3.0 * (r_max - r_min) + gamma).powf(n) * (32.0 * n).powf(1.0 / 6.0) / denom)
}

/// Buffer scale for which `2 beta_T = gamma`.
pub fn auto_buffer_scale(gamma: f64, w: f64, horizon: usize) -> f64 {
    let t = horizon as f64;
    gamma * t.powf(w / 3.0) / (2.0 * (2.0 * t).ln().sqrt())
}

/// Buffer scale in effect for `cfg`.
pub fn effective_buffer_scale(cfg: &GameConfig) -> Result<f64, BoundsError> {
    match cfg.buffer_override {
        Some(BufferOverride::Value(b)) => Ok(b),
        Some(BufferOverride::Rule(_)) => Ok(auto_buffer_scale(cfg.gamma, cfg.w, cfg.horizon)),
        None => compute_b(
            cfg.k,
            compute_k_tilde(cfg.k)?,
            cfg.r_min,
            cfg.r_max,
            cfg.gamma,
            cfg.n,
        ),
    }
}

/// `beta_t = b sqrt(ln 2t) / t^(w/3)`.
pub fn buffer(t: usize, b: f64, w: f64) -> f64 {
    let t = t as f64;
    b * (2.0 * t).ln().sqrt() / t.powf(w / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Init,
    Explore,
    Exploit,
    Oracle,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Init => "init",
            Mode::Explore => "explore",
            Mode::Exploit => "exploit",
            Mode::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveDecision {
    pub pi: Vec<f64>,
    pub mode: Mode,
    pub target_arm: Option<usize>,
    /// Buffer used; 0 outside exploitation.
    pub beta: f64,
}

/// Pays the least amount (plus `margin`) that makes the arm with the best
/// estimated net reward the agent's maximizer.
fn steer(theta: &[f64], s: &[f64], margin: f64, range: IncentiveRange) -> (usize, Vec<f64>) {
    assert_eq!(theta.len(), s.len(), "theta and s must have equal length");
    let top = max_entry(s);
    let value: Vec<f64> = theta
        .iter()
        .zip(s)
        .map(|(&th, &sj)| th - top + sj - margin)
        .collect();
    let j = argmax(&value);
    let mut pi = vec![range.clip(0.0); s.len()];
    pi[j] = range.clip(top - s[j] + margin);
    (j, pi)
}

/// Exploitation incentives with buffer `beta` (the margin is `2 beta`).
pub fn exploitation_incentives(
    theta_hat: &[f64],
    s_hat: &[f64],
    beta: f64,
    range: IncentiveRange,
) -> IncentiveDecision {
    let (j, pi) = steer(theta_hat, s_hat, 2.0 * beta, range);
    IncentiveDecision {
        pi,
        mode: Mode::Exploit,
        target_arm: Some(j),
        beta,
    }
}

/// Oracle incentives under full knowledge, with tie-break margin `varsigma`.
pub fn oracle_incentives(
    theta0: &[f64],
    s0: &[f64],
    varsigma: f64,
    range: IncentiveRange,
) -> IncentiveDecision {
    let (j, pi) = steer(theta0, s0, varsigma, range);
    IncentiveDecision {
        pi,
        mode: Mode::Oracle,
        target_arm: Some(j),
        beta: 0.0,
    }
}

/// Principal's expected net reward `theta0[arm] - sum(pi)`.
pub fn expected_net_reward(theta0: &[f64], arm: usize, pi: &[f64]) -> f64 {
    theta0[arm] - pi.iter().sum::<f64>()
}

/// How often the exploitation steps re-solve the estimator exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SolveMode {
    /// Exact solve at every exploitation step.
    Exact,
    /// Exact solve every `every`-th exploitation step; in between, a few
    /// subgradient iterations warm-started at the last estimate.
    Hybrid {
        every: usize,
        subgradient_iters: usize,
    },
    /// Warm-started subgradient iterations only.
    Subgradient { iters: usize },
}

impl Default for SolveMode {
    fn default() -> Self {
        SolveMode::Hybrid {
            every: 50,
            subgradient_iters: 20,
        }
    }
}

impl SolveMode {
    /// Parses the CLI names `exact`, `hybrid` and `subgradient`.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "exact" => Some(SolveMode::Exact),
            "hybrid" => Some(SolveMode::default()),
            "subgradient" => Some(SolveMode::Subgradient { iters: 50 }),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolveMode::Exact => "exact",
            SolveMode::Hybrid { .. } => "hybrid",
            SolveMode::Subgradient { .. } => "subgradient",
        }
    }
}

/// Everything the epsilon-greedy principal knows.
#[derive(Debug, Clone)]
pub struct PrincipalState {
    pub theta_hat: Vec<f64>,
    pub counts: Vec<usize>,
    pub s_hat: Option<NormalizedRewardEstimate>,
    /// Last decided step.
    pub step: usize,
    pub history: History,
    pub rng: ChaCha8Rng,
}

impl PrincipalState {
    pub fn new(n: usize, range: IncentiveRange, rng: ChaCha8Rng) -> Self {
        Self {
            theta_hat: vec![0.0; n],
            counts: vec![0; n],
            s_hat: None,
            step: 0,
            history: History::new(n, range),
            rng,
        }
    }

    /// Folds one reward observation into the running mean of `arm`.
    pub fn update_theta_hat(&mut self, arm: usize, mu: f64) {
        self.counts[arm] += 1;
        let c = self.counts[arm] as f64;
        self.theta_hat[arm] += (mu - self.theta_hat[arm]) / c;
    }
}

/// The principal's side of the game loop.
///
/// `observe` receives only what the principal may see: its own offer, the
/// arm the agent chose, and the principal's own reward.
pub trait Principal: Send {
    fn decide(&mut self, t: usize) -> Result<IncentiveDecision, EngineError>;
    fn observe(
        &mut self,
        t: usize,
        pi: &[f64],
        arm: usize,
        mu: f64,
        explored: bool,
    ) -> Result<(), EngineError>;
    /// Estimate used at the latest exploitation step, if any.
    fn estimate(&self) -> Option<&NormalizedRewardEstimate> {
        None
    }
    /// Estimate at step `t` from the records observed so far, reusing the
    /// latest one when it is already exact for this step.
    fn final_estimate(
        &mut self,
        _t: usize,
    ) -> Result<Option<NormalizedRewardEstimate>, EngineError> {
        Ok(None)
    }
}

/// Forces the Bernoulli draw of a non-initialization step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forced {
    Explore,
    Exploit,
}

/// Epsilon-greedy incentive policy.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyPrincipal {
    n: usize,
    range: IncentiveRange,
    sbox: SearchBox,
    m_pr: f64,
    w: f64,
    b: f64,
    solve: SolveMode,
    exploit_steps: usize,
    // Step at which `state.s_hat` was computed and whether exactly.
    estimated_at: Option<(usize, bool)>,
    pub state: PrincipalState,
}

impl EpsilonGreedyPrincipal {
    pub fn new(cfg: &GameConfig, solve: SolveMode, rng: ChaCha8Rng) -> Result<Self, BoundsError> {
        Ok(Self::with_buffer_scale(
            cfg,
            effective_buffer_scale(cfg)?,
            solve,
            rng,
        ))
    }

    pub fn with_buffer_scale(cfg: &GameConfig, b: f64, solve: SolveMode, rng: ChaCha8Rng) -> Self {
        let range = cfg.incentive_range();
        Self {
            n: cfg.n,
            range,
            sbox: cfg.search_box(),
            m_pr: cfg.m_pr,
            w: cfg.w,
            b,
            solve,
            exploit_steps: 0,
            estimated_at: None,
            state: PrincipalState::new(cfg.n, range, rng),
        }
    }

    pub fn buffer_scale(&self) -> f64 {
        self.b
    }

    /// One step of the policy; `forced` overrides the exploration draw.
    pub fn step(
        &mut self,
        t: usize,
        forced: Option<Forced>,
    ) -> Result<IncentiveDecision, EngineError> {
        self.state.step = t;
        if t <= self.n {
            let mut pi = vec![self.range.clip(0.0); self.n];
            pi[t - 1] = self.range.hi;
            return Ok(IncentiveDecision {
                pi,
                mode: Mode::Init,
                target_arm: None,
                beta: 0.0,
            });
        }
        let explore = match forced {
            Some(f) => f == Forced::Explore,
            None => {
                let eps = exploration_prob(t, self.m_pr, self.w);
                self.state.rng.random::<f64>() < eps
            }
        };
        if explore {
            let (lo, hi) = (self.range.lo, self.range.hi);
            let pi = (0..self.n)
                .map(|_| self.state.rng.random_range(lo..hi))
                .collect();
            return Ok(IncentiveDecision {
                pi,
                mode: Mode::Explore,
                target_arm: None,
                beta: 0.0,
            });
        }
        self.refresh(t)?;
        let s_hat = &self.state.s_hat.as_ref().expect("estimate refreshed").s_hat;
        let beta = buffer(t, self.b, self.w);
        Ok(exploitation_incentives(
            &self.state.theta_hat,
            s_hat,
            beta,
            self.range,
        ))
    }

    fn solve_exact_now(&self, t: usize) -> Result<NormalizedRewardEstimate, EngineError> {
        let warm = self.state.s_hat.as_ref().map(|e| e.s_hat.as_slice());
        solve_exact(&self.state.history, &self.sbox, warm)
            .map_err(|source| EngineError::Estimator { t, source })
    }

    fn solve_warm(&self, t: usize, iters: usize) -> Result<NormalizedRewardEstimate, EngineError> {
        let prev = self.state.s_hat.as_ref();
        let opts = SubgradientOptions {
            max_iters: iters,
            step: StepSchedule::AdaptivePolyak {
                initial_gap: prev.map_or(0.0, |e| 1e-3 * (1.0 + e.objective)),
            },
            warm_start: prev.map(|e| e.s_hat.clone()),
            ..Default::default()
        };
        solve_subgradient(&self.state.history, &self.sbox, &opts)
            .map_err(|source| EngineError::Estimator { t, source })
    }

    fn refresh(&mut self, t: usize) -> Result<(), EngineError> {
        if self.state.history.is_empty() {
            return Err(EngineError::Estimator {
                t,
                source: EstimatorError::EmptyHistory,
            });
        }
        let k = self.exploit_steps;
        self.exploit_steps += 1;
        let (est, exact) = match self.solve {
            SolveMode::Exact => (self.solve_exact_now(t)?, true),
            SolveMode::Hybrid {
                every,
                subgradient_iters,
            } => {
                if self.state.s_hat.is_none() || k % every.max(1) == 0 {
                    (self.solve_exact_now(t)?, true)
                } else {
                    (self.solve_warm(t, subgradient_iters)?, false)
                }
            }
            SolveMode::Subgradient { iters } => (self.solve_warm(t, iters)?, false),
        };
        self.state.s_hat = Some(est);
        self.estimated_at = Some((t, exact));
        Ok(())
    }
}

impl Principal for EpsilonGreedyPrincipal {
    fn decide(&mut self, t: usize) -> Result<IncentiveDecision, EngineError> {
        self.step(t, None)
    }

    fn observe(
        &mut self,
        t: usize,
        pi: &[f64],
        arm: usize,
        mu: f64,
        explored: bool,
    ) -> Result<(), EngineError> {
        self.state
            .history
            .push(HistoryRecord {
                t,
                pi: pi.to_vec(),
                chosen_arm: arm,
                mu,
                explored_pr: explored,
                explored_ag: false,
            })
            .map_err(|source| EngineError::History { t, source })?;
        self.state.update_theta_hat(arm, mu);
        Ok(())
    }

    fn estimate(&self) -> Option<&NormalizedRewardEstimate> {
        self.state.s_hat.as_ref()
    }

    fn final_estimate(
        &mut self,
        t: usize,
    ) -> Result<Option<NormalizedRewardEstimate>, EngineError> {
        if self.state.history.is_empty() {
            return Ok(None);
        }
        let current = self.estimated_at == Some((t, true))
            || (self.estimated_at.map(|(at, _)| at) == Some(t)
                && matches!(self.solve, SolveMode::Subgradient { .. }));
        if current {
            return Ok(self.state.s_hat.clone());
        }
        let est = match self.solve {
            SolveMode::Subgradient { .. } => self.solve_warm(t, 2000)?,
            _ => self.solve_exact_now(t)?,
        };
        debug_assert!(est.solver != SolverKind::Grid);
        Ok(Some(est))
    }
}

/// Offers the oracle incentives at every step.
#[derive(Debug, Clone)]
pub struct OraclePrincipal {
    decision: IncentiveDecision,
}

impl OraclePrincipal {
    pub fn new(theta0: &[f64], s0: &[f64], varsigma: f64, range: IncentiveRange) -> Self {
        Self {
            decision: oracle_incentives(theta0, s0, varsigma, range),
        }
    }
}

impl Principal for OraclePrincipal {
    fn decide(&mut self, _t: usize) -> Result<IncentiveDecision, EngineError> {
        Ok(self.decision.clone())
    }

    fn observe(
        &mut self,
        _: usize,
        _: &[f64],
        _: usize,
        _: f64,
        _: bool,
    ) -> Result<(), EngineError> {
        Ok(())
    }
}
