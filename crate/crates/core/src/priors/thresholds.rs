//! Closed-form parameter thresholds for the detail-free algorithms and the
//! Chernoff–Hoeffding helpers behind them. All logarithms are natural.

use serde::{Deserialize, Serialize};

use super::constants::{chunked, McOptions};
use super::PriorModel;
use crate::error::{Error, Result};
use crate::model::ArmId;
use crate::rng::RngStream;
use crate::stats::ceil_tol;

/// `2·exp(−2nδ²)`: Hoeffding bound on `Pr[|X̄ − μ| ≥ δ]` for `n` samples in `[0, 1]`.
pub fn hoeffding_tail(n: u64, delta: f64) -> f64 {
    2.0 * (-2.0 * n as f64 * delta * delta).exp()
}

/// Smallest `k` with `exp(−2ζ²C²k) ≤ κ(1−ζ)C·tail_prob`, i.e.
/// `ceil(−ln(κ(1−ζ)C·tail_prob) / (2ζ²C²))`.
pub fn chernoff_required_k(c: f64, zeta: f64, kappa: f64, tail_prob: f64) -> Result<u64> {
    for (name, v) in [("C", c), ("zeta", zeta), ("kappa", kappa)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::param(name, format!("must lie in (0, 1), got {v}")));
        }
    }
    if !(tail_prob > 0.0 && tail_prob <= 1.0) {
        return Err(Error::PriorNotPersuadable(format!(
            "tail probability {tail_prob} must lie in (0, 1]"
        )));
    }
    let k = -(kappa * (1.0 - zeta) * c * tail_prob).ln() / (2.0 * zeta * zeta * c * c);
    Ok(ceil_tol(k).max(1.0) as u64)
}

/// Inputs of [`detail_free_thresholds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdInputs {
    /// Prior mean of arm 1.
    pub mu_1: f64,
    /// (Approximate) prior mean of the last arm.
    pub mu_m: f64,
    /// `C / μ_m⁰`.
    pub lambda: f64,
    /// Two arms: `Pr[μ₁/μ₂⁰ ≤ 1 − 3λ/2]`; more arms: `Pr[E]` for the
    /// sampling-stage event.
    pub event_prob: f64,
    /// `min_i Pr[μ_i − max_{j≠i} μ_j ≥ τ]`.
    pub race_prob: f64,
    pub m: usize,
    pub horizon: u64,
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub c: f64,
    /// `β(λ)` (two arms) or `C·Pr[E]` (more arms).
    pub beta: f64,
    /// Sampling-stage sample count (`k*` for two arms).
    pub k_sampling: u64,
    pub l: u64,
    pub theta: f64,
    pub k_race: u64,
    /// The largest of the integer thresholds, `max(k_sampling, L, ⌈θ⌉, k_race)`.
    pub n_p: u64,
}

pub fn detail_free_thresholds(inp: &ThresholdInputs) -> Result<Thresholds> {
    if inp.m < 2 {
        return Err(Error::param("m", "need at least two arms"));
    }
    if !(inp.mu_m > 0.0) {
        return Err(Error::param("mu_m", "prior mean of the last arm must be positive"));
    }
    let lambda_max = if inp.m == 2 { 2.0 / 3.0 } else { 1.0 / 3.0 };
    if !(inp.lambda > 0.0 && inp.lambda < lambda_max) {
        return Err(Error::param(
            "lambda",
            format!("must lie in (0, {lambda_max:.4}) for {} arms", inp.m),
        ));
    }
    if !(inp.tau > 0.0 && inp.tau < 1.0) {
        return Err(Error::param("tau", "must lie in (0, 1)"));
    }
    if inp.horizon < 2 {
        return Err(Error::param("horizon", "must be at least 2"));
    }
    for (what, p) in [("event", inp.event_prob), ("race", inp.race_prob)] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::PriorNotPersuadable(format!("{what} probability is {p}")));
        }
    }
    let c = inp.lambda * inp.mu_m;
    let gap = (inp.mu_1 - inp.mu_m).max(0.0);
    let (beta, k_sampling, l) = if inp.m == 2 {
        let beta = c * inp.event_prob;
        let k = 2.0 / (c * c) * (4.0 / beta).ln();
        let l = 1.0 + 8.0 * gap / beta;
        (beta, k, l)
    } else {
        let ce = c * inp.event_prob;
        let k = 8.0 / (c * c) * (8.0 * inp.m as f64 / ce).ln();
        let l = 1.0 + 2.0 * gap / ce;
        (ce, k, l)
    };
    let theta = (4.0 / inp.tau) / inp.race_prob;
    let k_race = theta * theta * (inp.horizon as f64).ln();
    let k_sampling = ceil_tol(k_sampling) as u64;
    let l = ceil_tol(l) as u64;
    let k_race = ceil_tol(k_race) as u64;
    let n_p = k_sampling.max(l).max(ceil_tol(theta) as u64).max(k_race);
    Ok(Thresholds {
        c,
        beta,
        k_sampling,
        l,
        theta,
        k_race,
        n_p,
    })
}

/// Monte-Carlo estimate of `min_i Pr[μ_i − max_{j≠i} μ_j ≥ τ]`.
pub fn estimate_race_probability(prior: &PriorModel, tau: f64, opts: McOptions) -> Result<f64> {
    let m = prior.num_arms();
    let counts = chunked(
        opts.replicates,
        |lo, hi| {
            let mut c = vec![0u64; m];
            for r in lo..hi {
                let mut rng = RngStream::new(opts.seed, r, "race-prob", 0);
                let mu = prior.sample_instance(&mut rng)?;
                let means = &mu.means()[..m];
                for (i, ci) in c.iter_mut().enumerate() {
                    if super::constants::min_advantage(means, i) >= tau {
                        *ci += 1;
                    }
                }
            }
            Ok(c)
        },
        |acc: &mut Vec<u64>, part| {
            if acc.is_empty() {
                *acc = part;
            } else {
                for (a, b) in acc.iter_mut().zip(part) {
                    *a += b;
                }
            }
        },
    )?;
    let min = counts.iter().copied().min().unwrap_or(0);
    Ok(min as f64 / opts.replicates as f64)
}

/// Monte-Carlo estimate of the sampling-stage event probability: for two
/// arms `Pr[μ₁ ≤ μ₂⁰(1 − 3λ/2)]`, otherwise
/// `Pr[∀ j ∉ {1, m}: μ₁ + 3C/2 ≤ μ_j ≤ μ_m⁰ − 3C/2]` with `C = λμ_m⁰`.
pub fn estimate_event_probability(prior: &PriorModel, lambda: f64, opts: McOptions) -> Result<f64> {
    let m = prior.num_arms();
    let mu_m = prior.prior_mean(ArmId::from_index(m - 1));
    let c = lambda * mu_m;
    let hits = chunked(
        opts.replicates,
        |lo, hi| {
            let mut h = 0u64;
            for r in lo..hi {
                let mut rng = RngStream::new(opts.seed, r, "event-prob", 0);
                let mu = prior.sample_instance(&mut rng)?;
                let means = mu.means();
                let ok = if m == 2 {
                    means[0] <= mu_m * (1.0 - 1.5 * lambda)
                } else {
                    (1..m - 1).all(|j| means[0] + 1.5 * c <= means[j] && means[j] <= mu_m - 1.5 * c)
                };
                h += ok as u64;
            }
            Ok(h)
        },
        |acc: &mut u64, part| *acc += part,
    )?;
    Ok(hits as f64 / opts.replicates as f64)
}
