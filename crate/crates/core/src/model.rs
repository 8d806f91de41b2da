//! Game configuration, ground-truth reward model and the normalization of
//! agent reward vectors.
//!
//! Arms are 0-indexed everywhere inside the crate. External formats (CSV
//! files, the CLI) present them 1-indexed.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Default oracle tie-break margin, in reward units.
pub const DEFAULT_VARSIGMA: f64 = 1e-6;

/// How the buffer scale `B` of the exploitation incentives is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BufferOverride {
    /// Use this value for `B` directly.
    Value(f64),
    /// Pick `B` per horizon so that `2 * beta_T == gamma`.
    Rule(BufferRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferRule {
    Auto,
}

/// All model and algorithm constants of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    /// Number of arms.
    pub n: usize,
    /// Horizon.
    #[serde(rename = "T")]
    pub horizon: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Incentive headroom above `r_max`.
    pub gamma: f64,
    /// Upper bound on the principal's mean rewards.
    pub theta_max: f64,
    pub m_pr: f64,
    pub w: f64,
    pub m_ag: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_varsigma")]
    pub varsigma: f64,
    pub sigma2_ag: f64,
    pub sigma2_pr: f64,
    /// `None` means the theoretical buffer constant.
    #[serde(default)]
    pub buffer_override: Option<BufferOverride>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn default_k() -> f64 {
    1.0
}

fn default_varsigma() -> f64 {
    DEFAULT_VARSIGMA
}

fn default_replicates() -> usize {
    1
}

/// The feasible incentive interval `[r_min, r_max + gamma]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncentiveRange {
    pub lo: f64,
    pub hi: f64,
}

impl IncentiveRange {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clip(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }
}

/// Box `[-(r_max - r_min), r_max - r_min]` holding every normalized entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub lo: f64,
    pub hi: f64,
}

impl SearchBox {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl GameConfig {
    pub fn incentive_range(&self) -> IncentiveRange {
        IncentiveRange {
            lo: self.r_min,
            hi: self.r_max + self.gamma,
        }
    }

    pub fn reward_span(&self) -> f64 {
        self.r_max - self.r_min
    }

    pub fn search_box(&self) -> SearchBox {
        let span = self.reward_span();
        SearchBox::new(-span, span)
    }

    /// Every violated invariant; empty when the configuration is usable.
    pub fn validate(&self) -> Vec<ConfigViolation> {
        validate_config(self)
    }

    /// Shipped experiment settings for the two ground-truth models.
    pub fn experiment_defaults(n: usize) -> Self {
        Self {
            n,
            horizon: 1000,
            r_min: -20.0,
            r_max: 50.0,
            gamma: 10.0,
            theta_max: 100.0,
            m_pr: 5.0,
            w: 0.2,
            m_ag: 10.0,
            k: 1.0,
            varsigma: DEFAULT_VARSIGMA,
            sigma2_ag: 10.0,
            sigma2_pr: 10.0,
            buffer_override: Some(BufferOverride::Rule(BufferRule::Auto)),
            seed: 0,
            replicates: 5,
        }
    }
}

/// One violated configuration invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigViolation {
    NonFinite(&'static str),
    TooFewArms { n: usize },
    HorizonShorterThanArms { horizon: usize, n: usize },
    RewardSpanTooSmall { span: f64 },
    GammaNotPositive { gamma: f64 },
    GammaTooLarge { gamma: f64, limit: f64 },
    ThetaMaxNegative { theta_max: f64 },
    ExponentOutOfRange { w: f64 },
    PrincipalScaleTooSmall { m_pr: f64 },
    AgentScaleTooSmall { m_ag: f64 },
    InaccuracyTooSmall { k: f64 },
    VarsigmaNotPositive { varsigma: f64 },
    VarianceNotPositive { field: &'static str, value: f64 },
    BufferNotPositive { value: f64 },
    NoReplicates,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ConfigViolation::*;
        match self {
            NonFinite(field) => write!(f, "{field} must be finite"),
            TooFewArms { n } => write!(f, "n must be at least 2 (got {n})"),
            HorizonShorterThanArms { horizon, n } => {
                write!(f, "T must be at least n (T = {horizon}, n = {n})")
            }
            RewardSpanTooSmall { span } => {
                write!(f, "r_max - r_min must be at least 1 (got {span})")
            }
            GammaNotPositive { gamma } => write!(f, "gamma must be positive (got {gamma})"),
            GammaTooLarge { gamma, limit } => write!(
                f,
                "gamma must satisfy gamma <= r_max - r_min - 1 = {limit} (got {gamma})"
            ),
            ThetaMaxNegative { theta_max } => {
                write!(f, "theta_max must be non-negative (got {theta_max})")
            }
            ExponentOutOfRange { w } => write!(f, "w must lie in (0, 1/4) (got {w})"),
            PrincipalScaleTooSmall { m_pr } => write!(f, "m_pr must be at least 1 (got {m_pr})"),
            AgentScaleTooSmall { m_ag } => write!(f, "m_ag must be at least 1 (got {m_ag})"),
            InaccuracyTooSmall { k } => write!(f, "k must be at least 1 (got {k})"),
            VarsigmaNotPositive { varsigma } => {
                write!(f, "varsigma must be positive (got {varsigma})")
            }
            VarianceNotPositive { field, value } => {
                write!(f, "{field} must be positive (got {value})")
            }
            BufferNotPositive { value } => {
                write!(f, "buffer_override must be positive (got {value})")
            }
            NoReplicates => write!(f, "replicates must be at least 1"),
        }
    }
}

/// Lists every violated invariant of `cfg`.
pub fn validate_config(cfg: &GameConfig) -> Vec<ConfigViolation> {
    use ConfigViolation::*;
    let mut out = Vec::new();

    let reals: [(&'static str, f64); 11] = [
        ("r_min", cfg.r_min),
        ("r_max", cfg.r_max),
        ("gamma", cfg.gamma),
        ("theta_max", cfg.theta_max),
        ("m_pr", cfg.m_pr),
        ("w", cfg.w),
        ("m_ag", cfg.m_ag),
        ("k", cfg.k),
        ("varsigma", cfg.varsigma),
        ("sigma2_ag", cfg.sigma2_ag),
        ("sigma2_pr", cfg.sigma2_pr),
    ];
    for (name, v) in reals {
        if !v.is_finite() {
            out.push(NonFinite(name));
        }
    }

    if cfg.n < 2 {
        out.push(TooFewArms { n: cfg.n });
    }
    if cfg.horizon < cfg.n {
        out.push(HorizonShorterThanArms {
            horizon: cfg.horizon,
            n: cfg.n,
        });
    }
    let span = cfg.reward_span();
    if !(span >= 1.0) {
        out.push(RewardSpanTooSmall { span });
    }
    if !(cfg.gamma > 0.0) {
        out.push(GammaNotPositive { gamma: cfg.gamma });
    }
    let limit = span - 1.0;
    if !(cfg.gamma <= limit) {
        out.push(GammaTooLarge {
            gamma: cfg.gamma,
            limit,
        });
    }
    if !(cfg.theta_max >= 0.0) {
        out.push(ThetaMaxNegative {
            theta_max: cfg.theta_max,
        });
    }
    if !(cfg.w > 0.0 && cfg.w < 0.25) {
        out.push(ExponentOutOfRange { w: cfg.w });
    }
    if !(cfg.m_pr >= 1.0) {
        out.push(PrincipalScaleTooSmall { m_pr: cfg.m_pr });
    }
    if !(cfg.m_ag >= 1.0) {
        out.push(AgentScaleTooSmall { m_ag: cfg.m_ag });
    }
    if !(cfg.k >= 1.0) {
        out.push(InaccuracyTooSmall { k: cfg.k });
    }
    if !(cfg.varsigma > 0.0) {
        out.push(VarsigmaNotPositive {
            varsigma: cfg.varsigma,
        });
    }
    if !(cfg.sigma2_ag > 0.0) {
        out.push(VarianceNotPositive {
            field: "sigma2_ag",
            value: cfg.sigma2_ag,
        });
    }
    if !(cfg.sigma2_pr > 0.0) {
        out.push(VarianceNotPositive {
            field: "sigma2_pr",
            value: cfg.sigma2_pr,
        });
    }
    if let Some(BufferOverride::Value(b)) = cfg.buffer_override {
        if !(b > 0.0 && b.is_finite()) {
            out.push(BufferNotPositive { value: b });
        }
    }
    if cfg.replicates == 0 {
        out.push(NoReplicates);
    }
    out
}

/// Reward noise family shared by both players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    /// Gaussian around the mean with the configured variances.
    #[default]
    Gaussian,
    /// Every realization equals its mean.
    Deterministic,
}

/// Ground-truth mean rewards. Only the engine and the metrics see this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardModel {
    /// Agent mean rewards, one per arm.
    pub r0: Vec<f64>,
    /// Principal mean rewards, one per arm.
    pub theta0: Vec<f64>,
    #[serde(default)]
    pub noise: NoiseFamily,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelViolation {
    LengthMismatch {
        field: &'static str,
        len: usize,
        n: usize,
    },
    AgentMeanOutOfRange {
        arm: usize,
        value: f64,
    },
    NormalizedOutOfBox {
        arm: usize,
        value: f64,
    },
    PrincipalMeanOutOfRange {
        arm: usize,
        value: f64,
    },
}

impl ModelViolation {
    /// Whether the model cannot be simulated at all.
    ///
    /// An agent mean outside `[r_min, r_max]` is tolerated as long as the
    /// normalized vector stays inside the search box: the first built-in
    /// model has such an entry.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, ModelViolation::AgentMeanOutOfRange { .. })
    }
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelViolation::LengthMismatch { field, len, n } => {
                write!(f, "{field} has {len} entries, expected n = {n}")
            }
            ModelViolation::AgentMeanOutOfRange { arm, value } => {
                write!(f, "r0 entry for arm {} ({value}) lies outside [r_min, r_max]", arm + 1)
            }
            ModelViolation::NormalizedOutOfBox { arm, value } => write!(
                f,
                "normalized agent mean for arm {} ({value}) lies outside [-(r_max - r_min), r_max - r_min]",
                arm + 1
            ),
            ModelViolation::PrincipalMeanOutOfRange { arm, value } => write!(
                f,
                "theta0 entry for arm {} ({value}) lies outside [0, theta_max]",
                arm + 1
            ),
        }
    }
}

impl RewardModel {
    pub fn new(r0: Vec<f64>, theta0: Vec<f64>) -> Self {
        Self {
            r0,
            theta0,
            noise: NoiseFamily::Gaussian,
        }
    }

    pub fn n(&self) -> usize {
        self.r0.len()
    }

    /// The normalized agent mean vector `s0`.
    pub fn s0(&self) -> Vec<f64> {
        normalize(&self.r0)
    }

    pub fn validate(&self, cfg: &GameConfig) -> Vec<ModelViolation> {
        let mut out = Vec::new();
        for (field, len) in [("r0", self.r0.len()), ("theta0", self.theta0.len())] {
            if len != cfg.n {
                out.push(ModelViolation::LengthMismatch {
                    field,
                    len,
                    n: cfg.n,
                });
            }
        }
        for (arm, &v) in self.r0.iter().enumerate() {
            if !(v >= cfg.r_min && v <= cfg.r_max) {
                out.push(ModelViolation::AgentMeanOutOfRange { arm, value: v });
            }
        }
        let sbox = cfg.search_box();
        for (arm, v) in self.s0().into_iter().enumerate() {
            if !(v >= sbox.lo && v <= sbox.hi) {
                out.push(ModelViolation::NormalizedOutOfBox { arm, value: v });
            }
        }
        for (arm, &v) in self.theta0.iter().enumerate() {
            if !(v >= 0.0 && v <= cfg.theta_max) {
                out.push(ModelViolation::PrincipalMeanOutOfRange { arm, value: v });
            }
        }
        out
    }
}

/// Shifts `r` so that its first entry is zero.
///
/// The agent's choice `argmax(r + pi)` only depends on differences between
/// entries of `r`, so the normalized vector carries all identifiable
/// information.
pub fn normalize(r: &[f64]) -> Vec<f64> {
    let Some(&first) = r.first() else {
        return Vec::new();
    };
    r.iter().map(|&x| x - first).collect()
}

/// Index of the largest entry, lowest index on ties.
///
/// Panics on an empty slice.
pub fn argmax(values: &[f64]) -> usize {
    assert!(!values.is_empty(), "argmax of an empty vector");
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `argmax(a + b)` without allocating, lowest index on ties.
pub fn argmax_sum(a: &[f64], b: &[f64]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    let mut best = 0;
    let mut best_v = a[0] + b[0];
    for i in 1..a.len() {
        let v = a[i] + b[i];
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

pub fn max_entry(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Built-in ground-truth models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Table1N5,
    Table1N10,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::Table1N5, Preset::Table1N10];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1N5 => "table1_n5",
            Preset::Table1N10 => "table1_n10",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn for_arm_count(n: usize) -> Option<Self> {
        match n {
            5 => Some(Preset::Table1N5),
            10 => Some(Preset::Table1N10),
            _ => None,
        }
    }

    pub fn model(self) -> RewardModel {
        match self {
            Preset::Table1N5 => RewardModel::new(
                vec![14.0, -24.0, -4.0, 19.0, 29.0],
                vec![29.0, 1.0, 14.0, 26.0, 15.0],
            ),
            Preset::Table1N10 => RewardModel::new(
                vec![-4.0, 8.0, 22.0, -12.0, -2.0, 46.0, -8.0, 16.0, 38.0, 14.0],
                vec![0.0, 44.0, 51.0, 65.0, 9.0, 35.0, 69.0, 91.0, 51.0, 44.0],
            ),
        }
    }

    pub fn config(self) -> GameConfig {
        GameConfig::experiment_defaults(self.model().n())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
