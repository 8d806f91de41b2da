//! Closed-form theoretical quantities: the agent inaccuracy bound, the
//! estimator concentration bound and the regret bound, plus the cdf of the
//! difference of two uniform incentives.
//!
//! `alpha` has no closed form; every quantity that consumes it holds only
//! up to that constant.

use crate::error::BoundsError;
use crate::model::GameConfig;
use crate::principal::exploration_prob;

/// Inequality defining the first informative step: `k sqrt(ln 2x) < sqrt(x)`.
fn informative(k: f64, x: f64) -> bool {
    k * (2.0 * x).ln().sqrt() < x.sqrt()
}

/// Smallest integer `k_tilde >= 2` with `k sqrt(ln 2 k_tilde) < sqrt(k_tilde)`.
pub fn compute_k_tilde(k: f64) -> Result<usize, BoundsError> {
    if !(k.is_finite() && k >= 1.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "k must be a finite number >= 1 (got {k})"
        )));
    }
    let mut x = 2usize;
    while !informative(k, x as f64) {
        x += 1;
    }
    Ok(x)
}

/// Upper bound `k sqrt(ln 2t) / sqrt(t)` on the agent's probability of
/// missing its utility-maximizing arm. Not clamped.
pub fn pt_bound(k: f64, t: usize) -> Result<f64, BoundsError> {
    let k_tilde = compute_k_tilde(k)?;
    if t < k_tilde {
        return Err(BoundsError::Domain { t, k_tilde });
    }
    let t = t as f64;
    Ok(k * (2.0 * t).ln().sqrt() / t.sqrt())
}

/// Constants shared by the bound formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams {
    pub k: f64,
    pub k_tilde: usize,
    pub alpha: f64,
    /// Accuracy level of the concentration bound.
    pub beta: f64,
    pub n: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub gamma: f64,
    pub w: f64,
    pub m_pr: f64,
    pub theta_max: f64,
}

impl BoundParams {
    pub fn from_config(cfg: &GameConfig, alpha: f64, beta: f64) -> Result<Self, BoundsError> {
        let p = Self {
            k: cfg.k,
            k_tilde: compute_k_tilde(cfg.k)?,
            alpha,
            beta,
            n: cfg.n,
            r_min: cfg.r_min,
            r_max: cfg.r_max,
            gamma: cfg.gamma,
            w: cfg.w,
            m_pr: cfg.m_pr,
            theta_max: cfg.theta_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        let bad = |msg: String| Err(BoundsError::InvalidParameter(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive (got {})", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive (got {})", self.beta));
        }
        if self.n < 2 {
            return bad(format!("n must be at least 2 (got {})", self.n));
        }
        if !(self.reward_span() > 0.0) {
            return bad("r_max must exceed r_min".into());
        }
        if !(self.gamma > 0.0) {
            return bad(format!("gamma must be positive (got {})", self.gamma));
        }
        if !(self.w > 0.0 && self.w < 0.25) {
            return bad(format!("w must lie in (0, 1/4) (got {})", self.w));
        }
        if !(self.m_pr >= 1.0) {
            return bad(format!("m_pr must be at least 1 (got {})", self.m_pr));
        }
        if !(self.theta_max >= 0.0) {
            return bad(format!(
                "theta_max must be non-negative (got {})",
                self.theta_max
            ));
        }
        if !(self.k >= 1.0) || !informative(self.k, self.k_tilde as f64) || self.k_tilde < 2 {
            return bad(format!(
                "k_tilde = {} does not satisfy k sqrt(ln 2 k_tilde) < sqrt(k_tilde) for k = {}",
                self.k_tilde, self.k
            ));
        }
        Ok(())
    }

    pub fn reward_span(&self) -> f64 {
        self.r_max - self.r_min
    }

    /// Width of the incentive range, `r_max - r_min + gamma`.
    pub fn incentive_width(&self) -> f64 {
        self.reward_span() + self.gamma
    }

    /// `1 - k sqrt(ln 2 k_tilde) / sqrt(k_tilde)`, positive by construction.
    pub fn margin(&self) -> f64 {
        let kt = self.k_tilde as f64;
        1.0 - self.k * (2.0 * kt).ln().sqrt() / kt.sqrt()
    }

    fn check_t(&self, t: usize) -> Result<(), BoundsError> {
        if t < self.k_tilde {
            Err(BoundsError::Domain {
                t,
                k_tilde: self.k_tilde,
            })
        } else {
            Ok(())
        }
    }
}

/// `lambda_t`; negative values are returned as is.
pub fn lambda_t(params: &BoundParams, expected_eta: f64, t: usize) -> f64 {
    let tf = t as f64;
    let m = params.margin();
    4.0 * params.alpha * m * m / 27.0 * params.beta.powi(3) * expected_eta
        - 3.0
            * params.k
            * (3.0 * params.reward_span() + params.gamma)
            * (tf * (2.0 * tf).ln()).sqrt()
}

/// Expected number of exploration steps in `[k_tilde, t - 1]` under the
/// principal's schedule. Steps up to `n` are initialization and never
/// explore.
pub fn expected_eta(params: &BoundParams, t: usize) -> f64 {
    let start = params.k_tilde.max(params.n + 1);
    (start..t)
        .map(|tau| exploration_prob(tau, params.m_pr, params.w))
        .sum()
}

/// Number of exploration steps in `[k_tilde, t - 1]`; `explored[i]` flags
/// step `i + 1`.
pub fn empirical_eta(explored: &[bool], k_tilde: usize, t: usize) -> usize {
    let lo = k_tilde.max(1) - 1;
    let hi = t.saturating_sub(1).min(explored.len());
    if lo >= hi {
        return 0;
    }
    explored[lo..hi].iter().filter(|&&e| e).count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationBound {
    pub raw: f64,
    /// `raw` clamped into `[0, 1]`.
    pub probability: f64,
}

/// Bound on `P(||s0 - s_hat_t||_inf > beta)` given `lambda_t`.
pub fn concentration_bound(
    params: &BoundParams,
    lambda: f64,
    t: usize,
) -> Result<ConcentrationBound, BoundsError> {
    params.check_t(t)?;
    let span = params.reward_span();
    let denom =
        (t as f64 - 1.0) * 16.0 * params.n as f64 * (6.0 * span + 2.0 * params.gamma).powi(2);
    let exponent =
        -2.0 * lambda * lambda / denom - params.beta.ln() + params.n as f64 * (2.0 * span).ln();
    let raw = 2.0 * exponent.exp();
    Ok(ConcentrationBound {
        raw,
        probability: raw.clamp(0.0, 1.0),
    })
}

/// The six terms of the finite-sample regret bound and their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretBound {
    pub terms: [f64; 6],
    pub total: f64,
}

/// Regret bound at horizon `horizon` for buffer scale `b`.
pub fn regret_bound(
    params: &BoundParams,
    horizon: usize,
    b: f64,
) -> Result<RegretBound, BoundsError> {
    params.check_t(horizon)?;
    if !(b > 0.0) {
        return Err(BoundsError::InvalidParameter(format!(
            "buffer scale must be positive (got {b})"
        )));
    }
    let t = horizon as f64;
    let n = params.n as f64;
    let w = params.w;
    let width = params.incentive_width();
    let th = params.theta_max;
    let log2t = (2.0 * t).ln();

    let t1 = 12.0 * b / (3.0 - w) * t.powf(1.0 - w / 3.0) * log2t.sqrt();
    let t2 = params.m_pr
        * (n * width + th)
        * (2.0 / (2.0 * w + 1.0) * t.powf(w + 0.5) + (2.0 * w - 1.0) / (2.0 * w + 1.0));
    let t3 = 2.0 * params.k * th * (t * log2t).sqrt();
    let t4 = 2f64.powf(n + 1.0)
        * (th * (2.0 * n.powf(11.0 / 6.0) + n.powf(-1.0 / 6.0))
            + n.powf(5.0 / 6.0) * width * (1.0 + 2.0 * n))
        / (3f64.powf(n + 1.0) * params.k * 32f64.powf(1.0 / 6.0))
        * t.sqrt();
    let t5 = n * n * (width + th) * t.ln();
    let t6 = th * params.k_tilde as f64;
    let terms = [t1, t2, t3, t4, t5, t6];
    Ok(RegretBound {
        terms,
        total: terms.iter().sum(),
    })
}

/// One line of the bounds table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsRow {
    pub t: usize,
    pub pt_bound: f64,
    pub expected_eta: f64,
    pub lambda: f64,
    pub concentration: ConcentrationBound,
    /// Regret bound with horizon `t`.
    pub regret: RegretBound,
}

/// Bounds for every `t` in `[k_tilde, horizon]`.
pub fn bounds_table(
    params: &BoundParams,
    b: f64,
    horizon: usize,
) -> Result<Vec<BoundsRow>, BoundsError> {
    params.validate()?;
    params.check_t(horizon)?;
    let start = params.k_tilde.max(params.n + 1);
    let mut eta = 0.0;
    let mut rows = Vec::with_capacity(horizon + 1 - params.k_tilde);
    for t in params.k_tilde..=horizon {
        if t > start {
            eta += exploration_prob(t - 1, params.m_pr, params.w);
        }
        let lambda = lambda_t(params, eta, t);
        rows.push(BoundsRow {
            t,
            pt_bound: params.k * (2.0 * t as f64).ln().sqrt() / (t as f64).sqrt(),
            expected_eta: eta,
            lambda,
            concentration: concentration_bound(params, lambda, t)?,
            regret: regret_bound(params, t, b)?,
        });
    }
    Ok(rows)
}

/// `P(X - Y <= delta)` for `X, Y` independent uniform on `[c_lo, c_hi]`.
pub fn cdf_uniform_difference(delta: f64, c_lo: f64, c_hi: f64) -> f64 {
    let w = c_hi - c_lo;
    if delta < -w {
        0.0
    } else if delta < 0.0 {
        (delta + w).powi(2) / (2.0 * w * w)
    } else if delta <= w {
        1.0 - (delta - w).powi(2) / (2.0 * w * w)
    } else {
        1.0
    }
}
