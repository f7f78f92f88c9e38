//! Detail-free algorithms: sampling stages that compare sample averages to
//! published prior means, and racing stages that eliminate arms. Nothing
//! here queries a posterior.

mod race;
mod sampling;

pub(crate) use race::race_into;
pub use race::{run_df_race_m, run_df_two_arm_race, RaceConfig, RaceOutput, RaceState};
pub use sampling::{df_exploit_arm, run_df_sampling_m, run_df_two_arm_sampling, DfSamplingConfig, DfSamplingOutput};

use serde::{Deserialize, Serialize};

use crate::env::{Environment, Outcome};
use crate::error::{Error, Result};
use crate::model::{ArmId, Transcript};
use crate::rng::RngStream;

/// Pulls `arm` and rejects rewards outside `[0, 1]`.
pub(crate) fn checked_pull(env: &mut Environment, arm: ArmId) -> Result<Outcome> {
    let out = env.pull(arm)?;
    if !(0.0..=1.0).contains(&out.reward) {
        return Err(Error::RewardOutOfRange { reward: out.reward });
    }
    Ok(out)
}

/// The two-number parameterization `(μ̂, N)` of the full detail-free
/// algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailFreeConfig {
    /// Approximation of the lowest prior mean, `μ_m⁰ ≤ μ̂ ≤ 2μ_m⁰`.
    pub mu_hat: f64,
    /// Master parameter: `k = L = θ = N`.
    pub n: u64,
    pub horizon: u64,
    /// Constant τ ∈ (0, 1) the race-stage guarantee is stated for.
    pub tau: f64,
    /// Overrides `θ = N`.
    pub theta: Option<f64>,
}

/// Constants derived from a [`DetailFreeConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetailFreeConstants {
    #[serde(rename = "C")]
    pub c: f64,
    pub k: u64,
    #[serde(rename = "L")]
    pub l: u64,
    pub theta: f64,
    /// Length `N + N²(m − 1)` of the sampling stage.
    pub f_n: u64,
}

impl DetailFreeConfig {
    pub fn new(mu_hat: f64, n: u64, horizon: u64) -> Result<Self> {
        let cfg = Self {
            mu_hat,
            n,
            horizon,
            tau: 0.5,
            theta: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu_hat > 0.0 && self.mu_hat <= 1.0) {
            return Err(Error::param("mu_hat", format!("must lie in (0, 1], got {}", self.mu_hat)));
        }
        if self.n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::param("tau", "must lie in (0, 1)"));
        }
        if let Some(t) = self.theta {
            if !(t >= 1.0) {
                return Err(Error::param("theta", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn constants(&self, m: usize) -> DetailFreeConstants {
        DetailFreeConstants {
            c: self.mu_hat / 6.0,
            k: self.n,
            l: self.n,
            theta: self.theta.unwrap_or(self.n as f64),
            f_n: self.n + self.n * self.n * (m as u64 - 1),
        }
    }
}

/// Full detail-free algorithm: the `m`-arm sampling stage with `k = L = N`
/// and `C = μ̂/6`, then the race with `θ = N` until the horizon.
pub fn run_detail_free(
    cfg: &DetailFreeConfig,
    prior_means: &[f64],
    env: &mut Environment,
    slots: &mut RngStream,
) -> Result<Transcript> {
    cfg.validate()?;
    let m = prior_means.len();
    if m < 2 {
        return Err(Error::ArmCount {
            expected: "at least 2".into(),
            actual: m,
        });
    }
    let dc = cfg.constants(m);
    if cfg.horizon < dc.f_n {
        return Err(Error::param(
            "T",
            format!("horizon {} is shorter than the sampling stage ({} rounds)", cfg.horizon, dc.f_n),
        ));
    }
    let scfg = DfSamplingConfig::new(dc.k, dc.l, dc.c)?;
    let sampled = run_df_sampling_m(prior_means, &scfg, env, slots)?;
    let mut t = sampled.transcript;
    let rcfg = RaceConfig::new(dc.theta, cfg.horizon, cfg.horizon - dc.f_n)?;
    race::race_into(&sampled.samples, &rcfg, env, &mut t)?;
    Ok(t)
}
