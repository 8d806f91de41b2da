//! Agents that pick an arm given the principal's incentives.
//!
//! An agent sees the step, the offered incentives and its own reward. It
//! never sees the principal's rewards or estimates.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::argmax_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentChoice {
    pub arm: usize,
    pub explored: bool,
}

pub trait Agent: Send {
    fn decide(&mut self, t: usize, pi: &[f64]) -> AgentChoice;
    fn observe(&mut self, t: usize, arm: usize, rho: f64);
}

/// `min{1, m_ag / sqrt(t)}`.
pub fn agent_exploration_prob(t: usize, m_ag: f64) -> f64 {
    (m_ag / (t as f64).sqrt()).min(1.0)
}

/// Built-in agent behaviours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    EpsilonGreedy,
    /// Plays the true maximizer of `s0 + pi`.
    Perfect,
    UniformRandom,
}

/// Epsilon-greedy bandit learner on its own reward sample means.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyAgent {
    pub s_hat_ag: Vec<f64>,
    pub counts: Vec<usize>,
    pub m_ag: f64,
    rng: ChaCha8Rng,
}

impl EpsilonGreedyAgent {
    pub fn new(n: usize, m_ag: f64, rng: ChaCha8Rng) -> Self {
        Self {
            s_hat_ag: vec![0.0; n],
            counts: vec![0; n],
            m_ag,
            rng,
        }
    }
}

impl Agent for EpsilonGreedyAgent {
    fn decide(&mut self, t: usize, pi: &[f64]) -> AgentChoice {
        let n = self.s_hat_ag.len();
        if t <= n {
            return AgentChoice {
                arm: t - 1,
                explored: false,
            };
        }
        if self.rng.random::<f64>() < agent_exploration_prob(t, self.m_ag) {
            AgentChoice {
                arm: self.rng.random_range(0..n),
                explored: true,
            }
        } else {
            AgentChoice {
                arm: argmax_sum(&self.s_hat_ag, pi),
                explored: false,
            }
        }
    }

    fn observe(&mut self, _t: usize, arm: usize, rho: f64) {
        self.counts[arm] += 1;
        let c = self.counts[arm] as f64;
        self.s_hat_ag[arm] += (rho - self.s_hat_ag[arm]) / c;
    }
}

/// Knows its normalized means and always plays the best response.
#[derive(Debug, Clone)]
pub struct PerfectAgent {
    s0: Vec<f64>,
}

impl PerfectAgent {
    pub fn new(s0: Vec<f64>) -> Self {
        Self { s0 }
    }
}

impl Agent for PerfectAgent {
    fn decide(&mut self, _t: usize, pi: &[f64]) -> AgentChoice {
        AgentChoice {
            arm: argmax_sum(&self.s0, pi),
            explored: false,
        }
    }

    fn observe(&mut self, _: usize, _: usize, _: f64) {}
}

#[derive(Debug, Clone)]
pub struct UniformRandomAgent {
    n: usize,
    rng: ChaCha8Rng,
}

impl UniformRandomAgent {
    pub fn new(n: usize, rng: ChaCha8Rng) -> Self {
        Self { n, rng }
    }
}

impl Agent for UniformRandomAgent {
    fn decide(&mut self, _t: usize, _pi: &[f64]) -> AgentChoice {
        AgentChoice {
            arm: self.rng.random_range(0..self.n),
            explored: true,
        }
    }

    fn observe(&mut self, _: usize, _: usize, _: f64) {}
}

/// Replays a fixed arm sequence, cycling when it runs out.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    arms: Vec<usize>,
    pub seen: Vec<(usize, Vec<f64>)>,
    pub rewards: Vec<f64>,
}

impl ScriptedAgent {
    pub fn new(arms: Vec<usize>) -> Self {
        assert!(!arms.is_empty(), "script must not be empty");
        Self {
            arms,
            seen: Vec::new(),
            rewards: Vec::new(),
        }
    }
}

impl Agent for ScriptedAgent {
    fn decide(&mut self, t: usize, pi: &[f64]) -> AgentChoice {
        self.seen.push((t, pi.to_vec()));
        AgentChoice {
            arm: self.arms[(t - 1) % self.arms.len()],
            explored: false,
        }
    }

    fn observe(&mut self, _t: usize, _arm: usize, rho: f64) {
        self.rewards.push(rho);
    }
}

/// Per-step indicator that the chosen arm missed `argmax(s0 + pi)`.
pub fn measure_pt<'a, I>(steps: I, s0: &[f64]) -> Vec<(usize, bool)>
where
    I: IntoIterator<Item = (usize, &'a [f64], usize)>,
{
    steps
        .into_iter()
        .map(|(t, pi, arm)| (t, arm != argmax_sum(s0, pi)))
        .collect()
}

/// Miss rate over the steps `lo < t <= hi`; `None` for an empty window.
pub fn windowed_rate(indicators: &[(usize, bool)], lo: usize, hi: usize) -> Option<f64> {
    let (hits, total) = indicators
        .iter()
        .filter(|(t, _)| *t > lo && *t <= hi)
        .fold((0usize, 0usize), |(h, n), &(_, miss)| {
            (h + miss as usize, n + 1)
        });
    (total > 0).then(|| hits as f64 / total as f64)
}

/// `p_hat * sqrt(t) / sqrt(ln 2t)`, the scaled inaccuracy whose
/// boundedness the theory assumes.
pub fn scaled_inaccuracy(p_hat: f64, t: usize) -> f64 {
    let t = t as f64;
    p_hat * t.sqrt() / (2.0 * t).ln().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn exploration_schedule() {
        assert_eq!(agent_exploration_prob(100, 10.0), 1.0);
        assert!(agent_exploration_prob(101, 10.0) < 1.0);
        for t in 1..=100 {
            assert_eq!(agent_exploration_prob(t, 10.0), 1.0);
        }
        let mut prev = 1.0;
        for t in 1..10_000 {
            let p = agent_exploration_prob(t, 10.0);
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn initialization_plays_arm_t() {
        let mut a = EpsilonGreedyAgent::new(5, 10.0, rng(0));
        let c = a.decide(2, &[60.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            c,
            AgentChoice {
                arm: 1,
                explored: false
            }
        );
    }

    #[test]
    fn exploit_picks_the_strict_maximizer() {
        // m_ag = 1 makes eps tiny at large t; look at the non-exploring draws
        let mut a = EpsilonGreedyAgent::new(2, 1.0, rng(1));
        a.observe(1, 0, 0.0);
        a.observe(2, 1, 0.0);
        let mut greedy = 0;
        for t in 10_000..10_200 {
            let c = a.decide(t, &[0.0, 5.0]);
            if !c.explored {
                assert_eq!(c.arm, 1);
                greedy += 1;
            }
        }
        assert!(greedy > 150);
    }

    #[test]
    fn ties_go_to_the_lowest_index() {
        let mut a = PerfectAgent::new(vec![0.0, -5.0, 0.0]);
        assert_eq!(a.decide(1, &[1.0, 6.0, 1.0]).arm, 0);
    }

    #[test]
    fn sample_means_concentrate() {
        let mut a = EpsilonGreedyAgent::new(1, 10.0, rng(2));
        let noise = Normal::new(-24.0, 10f64.sqrt()).unwrap();
        let mut r = rng(3);
        for t in 1..=10_000 {
            a.observe(t, 0, noise.sample(&mut r));
        }
        assert!((a.s_hat_ag[0] + 24.0).abs() < 0.2);
        assert_eq!(a.counts[0], 10_000);
    }

    #[test]
    fn perfect_agent_never_misses() {
        let s0 = vec![0.0, -38.0, -18.0, 5.0, 15.0];
        let mut a = PerfectAgent::new(s0.clone());
        let mut r = rng(4);
        let mut steps = Vec::new();
        for t in 1..=500 {
            let pi: Vec<f64> = (0..5).map(|_| r.random_range(-20.0..60.0)).collect();
            let arm = a.decide(t, &pi).arm;
            steps.push((t, pi, arm));
        }
        let ind = measure_pt(steps.iter().map(|(t, p, a)| (*t, p.as_slice(), *a)), &s0);
        assert!(ind.iter().all(|(_, miss)| !miss));
        assert_eq!(windowed_rate(&ind, 0, 500), Some(0.0));
    }

    #[test]
    fn uniform_agent_miss_rate() {
        // symmetric model: every arm is equally likely to be the maximizer
        let n = 5;
        let s0 = vec![0.0; n];
        let mut a = UniformRandomAgent::new(n, rng(5));
        let mut r = rng(6);
        let m = 20_000;
        let mut steps = Vec::new();
        for t in 1..=m {
            let pi: Vec<f64> = (0..n).map(|_| r.random_range(-20.0..60.0)).collect();
            let arm = a.decide(t, &pi).arm;
            steps.push((t, pi, arm));
        }
        let ind = measure_pt(steps.iter().map(|(t, p, a)| (*t, p.as_slice(), *a)), &s0);
        let rate = windowed_rate(&ind, 0, m).unwrap();
        let p = (n - 1) as f64 / n as f64;
        let sd = (p * (1.0 - p) / m as f64).sqrt();
        assert!((rate - p).abs() < 3.0 * sd, "rate {rate}");
    }

    #[test]
    fn converged_learner_misses_about_as_often_as_it_explores() {
        let s0 = [0.0, -38.0, -18.0, 5.0, 15.0];
        let mut a = EpsilonGreedyAgent::new(5, 10.0, rng(7));
        a.s_hat_ag = s0.to_vec();
        a.counts = vec![1_000_000; 5];
        let mut r = rng(8);
        let mut ind = Vec::new();
        let (lo, hi) = (5_000, 10_000);
        for t in lo + 1..=hi {
            // gaps of at least 10 between the best and second-best arm
            let pi = [0.0, 0.0, 0.0, 20.0 * r.random::<f64>(), 0.0];
            let arm = a.decide(t, &pi).arm;
            ind.push((t, arm != argmax_sum(&s0, &pi)));
        }
        let rate = windowed_rate(&ind, lo, hi).unwrap();
        let eps = agent_exploration_prob(lo, 10.0);
        assert!(rate <= eps + 0.02, "rate {rate} eps {eps}");
    }

    #[test]
    fn windowed_rate_bounds() {
        let ind = [(1, true), (2, false), (3, true), (4, true)];
        assert_eq!(windowed_rate(&ind, 1, 4), Some(2.0 / 3.0));
        assert_eq!(windowed_rate(&ind, 4, 8), None);
        assert!((scaled_inaccuracy(0.5, 2) - 0.5 * 2f64.sqrt() / 4f64.ln().sqrt()).abs() < 1e-15);
    }
}
