//! Simulation of a repeated principal-agent game in which the agent's
//! rewards are hidden from the principal.
//!
//! The principal offers an incentive per arm, a learning agent picks an
//! arm, and both collect noisy rewards. The principal never sees the
//! agent's rewards; it infers the agent's normalized mean rewards from the
//! arms chosen under past incentives ([`estimator`]) and runs an
//! epsilon-greedy incentive policy on top ([`principal`]). The
//! [`engine`] plays full episodes and computes regret and estimation
//! metrics against the full-knowledge oracle; [`bounds`] evaluates the
//! closed-form theoretical quantities for overlays.

pub mod agent;
pub mod bounds;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod history;
pub mod model;
pub mod output;
pub mod principal;
pub mod simplex;

pub use agent::{Agent, AgentChoice, AgentKind};
pub use engine::{run_episode, run_experiment, EpisodeSpec, PrincipalKind, ResultTable, Trace};
pub use error::{BoundsError, EngineError, EstimatorError, HistoryError, LpError, OutputError};
pub use estimator::{NormalizedRewardEstimate, SolverKind};
pub use history::{History, HistoryRecord};
pub use model::{GameConfig, Preset, RewardModel};
pub use principal::{IncentiveDecision, Mode, Principal, SolveMode};
