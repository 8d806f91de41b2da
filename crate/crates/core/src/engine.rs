//! Episodes of the repeated game, replicates and their metrics.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentKind, EpsilonGreedyAgent, PerfectAgent, UniformRandomAgent};
use crate::error::EngineError;
use crate::model::{argmax_sum, GameConfig, NoiseFamily, RewardModel};
use crate::principal::{
    expected_net_reward, oracle_incentives, EpsilonGreedyPrincipal, Mode, OraclePrincipal,
    Principal, SolveMode,
};

// Stream ids of the per-role generators derived from an episode seed.
const STREAM_PRINCIPAL: u64 = 1;
const STREAM_AGENT: u64 = 2;
const STREAM_AGENT_REWARD: u64 = 3;
const STREAM_PRINCIPAL_REWARD: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `i` under `master`.
pub fn replicate_seed(master: u64, i: usize) -> u64 {
    splitmix64(splitmix64(master) ^ i as u64)
}

/// Draws reward realizations; the only holder of the true means during play.
#[derive(Debug, Clone)]
pub struct Environment {
    r0: Vec<f64>,
    theta0: Vec<f64>,
    noise: NoiseFamily,
    sd_ag: f64,
    sd_pr: f64,
    rho_rng: ChaCha8Rng,
    mu_rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(cfg: &GameConfig, model: &RewardModel, seed: u64) -> Self {
        Self {
            r0: model.r0.clone(),
            theta0: model.theta0.clone(),
            noise: model.noise,
            sd_ag: cfg.sigma2_ag.sqrt(),
            sd_pr: cfg.sigma2_pr.sqrt(),
            rho_rng: stream(seed, STREAM_AGENT_REWARD),
            mu_rng: stream(seed, STREAM_PRINCIPAL_REWARD),
        }
    }

    fn draw(noise: NoiseFamily, mean: f64, sd: f64, rng: &mut ChaCha8Rng) -> f64 {
        match noise {
            NoiseFamily::Deterministic => mean,
            NoiseFamily::Gaussian => Normal::new(mean, sd)
                .expect("validated variance")
                .sample(rng),
        }
    }

    /// Agent reward realization for `arm`.
    pub fn rho(&mut self, arm: usize) -> f64 {
        Self::draw(self.noise, self.r0[arm], self.sd_ag, &mut self.rho_rng)
    }

    /// Principal reward realization for `arm`.
    pub fn mu(&mut self, arm: usize) -> f64 {
        Self::draw(self.noise, self.theta0[arm], self.sd_pr, &mut self.mu_rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub pi: Vec<f64>,
    pub mode: Mode,
    pub target_arm: Option<usize>,
    pub beta: f64,
    pub chosen_arm: usize,
    pub explored_ag: bool,
    pub mu: f64,
    pub rho: f64,
    /// `||s0 - s_hat||_inf` when the principal refreshed its estimate.
    pub linf_error: Option<f64>,
    pub regret_increment: f64,
    /// Whether the agent played the true maximizer of `s0 + pi`.
    pub agent_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub final_s_hat: Option<Vec<f64>>,
    pub final_pi: Vec<f64>,
    pub l1_policy_distance: f64,
    pub regret_curve: Vec<f64>,
    pub linf_final: Option<f64>,
    pub regret_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<StepRecord>,
    pub summary: TraceSummary,
}

impl Trace {
    /// Exploration flags of the principal, indexed by `t - 1`.
    pub fn explore_flags(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.mode == Mode::Explore).collect()
    }

    /// `(t, pi, chosen_arm)` per step.
    pub fn choices(&self) -> impl Iterator<Item = (usize, &[f64], usize)> + '_ {
        self.steps
            .iter()
            .map(|s| (s.t, s.pi.as_slice(), s.chosen_arm))
    }
}

/// `sum_a |pi_T[a] - oracle[a]|`.
pub fn l1_policy_distance(pi_t: &[f64], oracle_pi: &[f64]) -> f64 {
    assert_eq!(pi_t.len(), oracle_pi.len(), "length mismatch");
    pi_t.iter().zip(oracle_pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Prefix sums of the per-step regret.
pub fn cumulative_regret(trace: &Trace) -> Vec<f64> {
    trace
        .steps
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.regret_increment;
            Some(*acc)
        })
        .collect()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrincipalKind {
    #[default]
    EpsilonGreedy,
    Oracle,
}

/// Which policies play an episode and how the estimator is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub principal: PrincipalKind,
    pub agent: AgentKind,
    pub solve: SolveMode,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            principal: PrincipalKind::EpsilonGreedy,
            agent: AgentKind::EpsilonGreedy,
            solve: SolveMode::default(),
        }
    }
}

/// Rejects invalid configurations and fatal model mismatches.
pub fn check_inputs(cfg: &GameConfig, model: &RewardModel) -> Result<(), EngineError> {
    let v = cfg.validate();
    if !v.is_empty() {
        return Err(EngineError::Config(v));
    }
    let fatal: Vec<_> = model
        .validate(cfg)
        .into_iter()
        .filter(|v| v.is_fatal())
        .collect();
    if !fatal.is_empty() {
        return Err(EngineError::Model(fatal));
    }
    Ok(())
}

/// Plays one episode with the built-in policies named in `spec`.
pub fn run_episode(
    cfg: &GameConfig,
    model: &RewardModel,
    spec: &EpisodeSpec,
    seed: u64,
) -> Result<Trace, EngineError> {
    check_inputs(cfg, model)?;
    let s0 = model.s0();
    let mut principal: Box<dyn Principal> = match spec.principal {
        PrincipalKind::EpsilonGreedy => Box::new(EpsilonGreedyPrincipal::new(
            cfg,
            spec.solve,
            stream(seed, STREAM_PRINCIPAL),
        )?),
        PrincipalKind::Oracle => Box::new(OraclePrincipal::new(
            &model.theta0,
            &s0,
            cfg.varsigma,
            cfg.incentive_range(),
        )),
    };
    let agent_rng = stream(seed, STREAM_AGENT);
    let mut agent: Box<dyn Agent> = match spec.agent {
        AgentKind::EpsilonGreedy => Box::new(EpsilonGreedyAgent::new(cfg.n, cfg.m_ag, agent_rng)),
        AgentKind::Perfect => Box::new(PerfectAgent::new(s0)),
        AgentKind::UniformRandom => Box::new(UniformRandomAgent::new(cfg.n, agent_rng)),
    };
    let mut env = Environment::new(cfg, model, seed);
    play(cfg, model, principal.as_mut(), agent.as_mut(), &mut env)
}

/// The game loop. The principal sees its offer, the chosen arm and `mu`;
/// the agent sees the offer and `rho`. Ground truth stays in the harness.
pub fn play(
    cfg: &GameConfig,
    model: &RewardModel,
    principal: &mut dyn Principal,
    agent: &mut dyn Agent,
    env: &mut Environment,
) -> Result<Trace, EngineError> {
    let s0 = model.s0();
    let oracle = oracle_incentives(&model.theta0, &s0, cfg.varsigma, cfg.incentive_range());
    let oracle_arm = oracle.target_arm.expect("oracle has a target");
    let v_oracle = expected_net_reward(&model.theta0, oracle_arm, &oracle.pi);

    let horizon = cfg.horizon;
    let mut steps = Vec::with_capacity(horizon);
    let mut curve = Vec::with_capacity(horizon);
    let mut regret = 0.0;
    let mut final_s_hat = None;

    for t in 1..=horizon {
        let decision = principal.decide(t)?;
        let linf_error = if decision.mode == Mode::Exploit {
            principal.estimate().map(|e| linf(&s0, &e.s_hat))
        } else {
            None
        };
        if t == horizon {
            final_s_hat = principal.final_estimate(t)?.map(|e| e.s_hat);
        }
        let choice = agent.decide(t, &decision.pi);
        let arm = choice.arm;
        let rho = env.rho(arm);
        let mu = env.mu(arm);
        agent.observe(t, arm, rho);
        principal.observe(t, &decision.pi, arm, mu, decision.mode == Mode::Explore)?;

        let increment = v_oracle - expected_net_reward(&model.theta0, arm, &decision.pi);
        regret += increment;
        curve.push(regret);
        steps.push(StepRecord {
            t,
            agent_correct: arm == argmax_sum(&s0, &decision.pi),
            pi: decision.pi,
            mode: decision.mode,
            target_arm: decision.target_arm,
            beta: decision.beta,
            chosen_arm: arm,
            explored_ag: choice.explored,
            mu,
            rho,
            linf_error,
            regret_increment: increment,
        });
    }

    let final_pi = steps.last().map(|s| s.pi.clone()).unwrap_or_default();
    let summary = TraceSummary {
        linf_final: final_s_hat.as_deref().map(|s| linf(&s0, s)),
        final_s_hat,
        l1_policy_distance: if final_pi.is_empty() {
            0.0
        } else {
            l1_policy_distance(&final_pi, &oracle.pi)
        },
        regret_final: regret,
        regret_curve: curve,
        final_pi,
    };
    Ok(Trace { steps, summary })
}

/// Final metrics of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMetrics {
    pub linf_final: Option<f64>,
    pub l1_final: f64,
    pub regret_final: f64,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub outcome: Result<ReplicateMetrics, String>,
}

/// Mean, sample standard deviation and standard error of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
}

impl Stat {
    /// `None` for an empty sample; the spread of a single value is 0.
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        };
        Some(Stat {
            mean,
            std,
            stderr: std / m.sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub linf_final: Option<Stat>,
    pub l1_final: Option<Stat>,
    pub regret_final: Option<Stat>,
    pub wallclock_s: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub n: usize,
    pub horizon: usize,
    /// Sorted by replicate id.
    pub rows: Vec<ReplicateRow>,
}

impl ResultTable {
    fn successes(&self) -> impl Iterator<Item = &ReplicateMetrics> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn aggregate(&self) -> Aggregate {
        let col = |f: &dyn Fn(&ReplicateMetrics) -> Option<f64>| {
            Stat::of(&self.successes().filter_map(f).collect::<Vec<_>>())
        };
        Aggregate {
            linf_final: col(&|m| m.linf_final),
            l1_final: col(&|m| Some(m.l1_final)),
            regret_final: col(&|m| Some(m.regret_final)),
            wallclock_s: col(&|m| Some(m.wallclock_s)),
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &str)> {
        self.rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(|e| (r.replicate, e.as_str())))
    }
}

/// Runs `cfg.replicates` independent episodes in parallel.
///
/// Each finished trace is handed to `sink` (replicate id, seed, trace)
/// before it is dropped; a sink error marks that replicate failed.
pub fn run_experiment<F>(
    cfg: &GameConfig,
    model: &RewardModel,
    spec: &EpisodeSpec,
    sink: F,
) -> Result<ResultTable, EngineError>
where
    F: Fn(usize, u64, &Trace) -> Result<(), String> + Sync,
{
    check_inputs(cfg, model)?;
    let rows = (0..cfg.replicates)
        .into_par_iter()
        .map(|replicate| {
            let seed = replicate_seed(cfg.seed, replicate);
            let start = Instant::now();
            let outcome = run_episode(cfg, model, spec, seed)
                .map_err(|e| e.to_string())
                .and_then(|trace| {
                    let wallclock_s = start.elapsed().as_secs_f64();
                    sink(replicate, seed, &trace)?;
                    Ok(ReplicateMetrics {
                        linf_final: trace.summary.linf_final,
                        l1_final: trace.summary.l1_policy_distance,
                        regret_final: trace.summary.regret_final,
                        wallclock_s,
                    })
                });
            ReplicateRow {
                replicate,
                seed,
                outcome,
            }
        })
        .collect();
    Ok(ResultTable {
        n: cfg.n,
        horizon: cfg.horizon,
        rows,
    })
}
