//! Prior-dependent constants: the distribution of the posterior gap `X^k`,
//! persuasion constants `(k_P, τ_P, ρ_P)` and minimum phase lengths.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, Marginal, PriorModel};
use crate::error::{Error, Result};
use crate::model::{ArmId, RewardFamily};
use crate::rng::RngStream;
use crate::stats::{ceil_tol, normal_cdf, normal_pdf, wilson_interval, z_two_sided, Moments};

/// Floor below which an upper confidence bound on `ρ` counts as zero.
pub const RHO_FLOOR: f64 = 1e-4;

/// Replicates per parallel chunk. Chunks are merged in index order so
/// results do not depend on scheduling.
pub(crate) const CHUNK: u64 = 1024;

/// Monte-Carlo settings shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub replicates: u64,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            replicates: 10_000,
            confidence: 0.95,
            seed: 0,
        }
    }
}

impl McOptions {
    pub fn new(replicates: u64, confidence: f64, seed: u64) -> Self {
        Self {
            replicates,
            confidence,
            seed,
        }
    }

    pub(crate) fn validate(&self, min_replicates: u64) -> Result<()> {
        if self.replicates < min_replicates {
            return Err(Error::param(
                "replicates",
                format!("need at least {min_replicates}, got {}", self.replicates),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::param("confidence", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Runs `per_chunk(start, end)` over replicate chunks in parallel and folds
/// the results in chunk order.
pub(crate) fn chunked<T, F, M>(replicates: u64, per_chunk: F, mut merge: M) -> Result<T>
where
    T: Send + Default,
    F: Fn(u64, u64) -> Result<T> + Sync,
    M: FnMut(&mut T, T),
{
    let chunks = replicates.div_ceil(CHUNK);
    let parts: Vec<Result<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| per_chunk(c * CHUNK, ((c + 1) * CHUNK).min(replicates)))
        .collect();
    let mut acc = T::default();
    for p in parts {
        merge(&mut acc, p?);
    }
    Ok(acc)
}

/// Mean and variance of `X^k = μ₂⁰ − E[μ₁ | k samples of arm 1]` for a
/// two-arm independent Gaussian-conjugate prior.
pub fn xk_distribution(prior: &PriorModel, k: u64) -> Result<(f64, f64)> {
    let (m1, var1, noise1) = gaussian_arm(prior, 0)?;
    let (m2, _, _) = gaussian_arm(prior, 1)?;
    if prior.num_arms() != 2 {
        return Err(Error::ArmCount {
            expected: "2".into(),
            actual: prior.num_arms(),
        });
    }
    let kf = k as f64;
    let var = var1 * (kf * var1) / (noise1 + kf * var1);
    Ok((m2 - m1, var))
}

fn gaussian_arm(prior: &PriorModel, arm: usize) -> Result<(f64, f64, f64)> {
    let marginals = prior
        .marginals()
        .ok_or_else(|| Error::param("prior", "needs an independent prior"))?;
    match (marginals.get(arm), prior.families().get(arm)) {
        (Some(Marginal::Gaussian { mean, var }), Some(RewardFamily::Gaussian { noise_var })) => {
            Ok((*mean, *var, *noise_var))
        }
        _ => Err(Error::param(
            "prior",
            "closed form needs Gaussian priors with Gaussian rewards",
        )),
    }
}

/// Draws of `X^k = E[μ₂ − μ₁ | k samples of arm 1]` for a two-arm prior.
pub fn xk_samples(prior: &PriorModel, k: u64, draws: u64, seed: u64) -> Result<Vec<f64>> {
    if prior.num_arms() != 2 || prior.num_contexts() != 1 {
        return Err(Error::ArmCount {
            expected: "2".into(),
            actual: prior.num_arms(),
        });
    }
    chunked(
        draws,
        |lo, hi| {
            let mut out = Vec::with_capacity((hi - lo) as usize);
            for r in lo..hi {
                let mut rng = RngStream::new(seed, r, "xk", k);
                let mu = prior.sample_instance(&mut rng)?;
                let mut data = prior.empty_dataset();
                let fam = prior.family_in(ArmId::FIRST, 0);
                for _ in 0..k {
                    data.add(ArmId::FIRST, fam.draw(mu.mean(ArmId::FIRST), &mut rng)?);
                }
                let post = prior.posterior_means_in(&data, 0)?;
                out.push(post[1] - post[0]);
            }
            Ok(out)
        },
        |acc: &mut Vec<f64>, part| acc.extend(part),
    )
}

/// 50 log-spaced points in `[10⁻³, 1]`.
pub fn tau_grid() -> Vec<f64> {
    let n = 50;
    let (lo, hi) = (1e-3f64.ln(), 0.0f64);
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Exceedance counts of one posterior gap over the τ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    /// One-based arm (or arm-rank) whose advantage is measured.
    pub arm: u32,
    /// Number of leading arms (ranks) whose samples are conditioned on.
    pub conditioned_on: u32,
    /// Rank compared against, for contextual entries; the best other arm
    /// otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competitor: Option<u32>,
    pub exceed: Vec<u64>,
    pub trials: u64,
}

impl ProfileEntry {
    pub(crate) fn new(arm: u32, conditioned_on: u32, competitor: Option<u32>, grid: usize) -> Self {
        Self {
            arm,
            conditioned_on,
            competitor,
            exceed: vec![0; grid],
            trials: 0,
        }
    }

    pub(crate) fn record(&mut self, x: f64, taus: &[f64]) {
        self.trials += 1;
        for (c, &t) in self.exceed.iter_mut().zip(taus) {
            if x > t {
                *c += 1;
            }
        }
    }

    pub(crate) fn merge(&mut self, other: &ProfileEntry) {
        self.trials += other.trials;
        for (a, b) in self.exceed.iter_mut().zip(&other.exceed) {
            *a += b;
        }
    }

    pub fn rho_hat(&self, tau_index: usize) -> f64 {
        self.exceed[tau_index] as f64 / self.trials as f64
    }

    pub fn interval(&self, tau_index: usize, confidence: f64) -> (f64, f64) {
        wilson_interval(self.exceed[tau_index], self.trials, confidence)
    }
}

/// Per-arm estimates of `Pr[X > τ]` over the τ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersuasionProfile {
    pub k: u64,
    pub taus: Vec<f64>,
    pub entries: Vec<ProfileEntry>,
    pub replicates: u64,
    pub confidence: f64,
}

impl PersuasionProfile {
    pub fn entry(&self, arm: u32, conditioned_on: u32) -> Option<&ProfileEntry> {
        self.entries
            .iter()
            .find(|e| e.arm == arm && e.conditioned_on == conditioned_on)
    }

    /// The `(τ, ρ̂)` pair of one entry maximizing `τ · LCB(ρ̂)`.
    pub fn best_for(&self, entry: &ProfileEntry) -> (f64, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &t) in self.taus.iter().enumerate() {
            let score = t * entry.interval(i, self.confidence).0;
            if score > best.1 {
                best = (i, score);
            }
        }
        (self.taus[best.0], entry.rho_hat(best.0))
    }

    /// Chooses the τ maximizing `τ · min over entries of LCB(ρ̂)`.
    pub fn constants(&self) -> Result<PersuasionConstants> {
        let mut best: Option<(usize, f64, f64)> = None;
        let mut any_above_floor = false;
        for (i, &t) in self.taus.iter().enumerate() {
            let mut lcb = f64::INFINITY;
            let mut ucb = f64::INFINITY;
            for e in &self.entries {
                let (lo, hi) = e.interval(i, self.confidence);
                lcb = lcb.min(lo);
                ucb = ucb.min(hi);
            }
            any_above_floor |= ucb >= RHO_FLOOR;
            let score = t * lcb;
            if best.is_none_or(|(_, s, _)| score > s) {
                best = Some((i, score, lcb));
            }
        }
        let (i, score, lcb) = best.expect("nonempty τ grid");
        if !any_above_floor || score <= 0.0 {
            let worst = self
                .entries
                .iter()
                .min_by(|a, b| a.exceed[0].cmp(&b.exceed[0]))
                .map(|e| format!("arm {} (after {} arms) exceeds τ = {:.0e} in {} of {} draws", e.arm, e.conditioned_on, self.taus[0], e.exceed[0], e.trials))
                .unwrap_or_default();
            return Err(Error::PriorNotPersuadable(worst));
        }
        let rho_hat = self
            .entries
            .iter()
            .map(|e| e.rho_hat(i))
            .fold(f64::INFINITY, f64::min);
        Ok(PersuasionConstants {
            k_p: self.k,
            tau_p: self.taus[i],
            rho_p: lcb,
            rho_hat,
            replicates: self.replicates,
            ci_level: self.confidence,
        })
    }
}

/// Constants `(k_P, τ_P, ρ_P)`; `rho_p` is the lower confidence bound used
/// in every downstream formula and `rho_hat` the point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersuasionConstants {
    pub k_p: u64,
    pub tau_p: f64,
    pub rho_p: f64,
    pub rho_hat: f64,
    pub replicates: u64,
    pub ci_level: f64,
}

/// Estimates `Pr[X_i^k > τ]` for every arm `i`, where `X_i^k` is the
/// smallest posterior advantage of arm `i` over any other arm after `k`
/// samples of each arm before it. The prior's arm order is used as given.
pub fn persuasion_profile(prior: &PriorModel, k: u64, opts: McOptions) -> Result<PersuasionProfile> {
    opts.validate(1000)?;
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    if prior.num_contexts() != 1 {
        return Err(Error::param("prior", "use the contextual estimator for contextual priors"));
    }
    let taus = tau_grid();
    let m = prior.num_arms();
    let fresh = || -> Vec<ProfileEntry> {
        (0..m)
            .map(|i| ProfileEntry::new(i as u32 + 1, i as u32, None, taus.len()))
            .collect()
    };
    let entries = chunked(
        opts.replicates,
        |lo, hi| {
            let mut entries = fresh();
            for r in lo..hi {
                let mut rng = RngStream::new(opts.seed, r, "persuasion", k);
                let mu = prior.sample_instance(&mut rng)?;
                let mut data = prior.empty_dataset();
                for (i, entry) in entries.iter_mut().enumerate() {
                    let post = prior.posterior_means_in(&data, 0)?;
                    entry.record(min_advantage(&post, i), &taus);
                    let arm = ArmId::from_index(i);
                    let fam = prior.family_in(arm, 0);
                    for _ in 0..k {
                        data.add(arm, fam.draw(mu.mean(arm), &mut rng)?);
                    }
                }
            }
            Ok(entries)
        },
        |acc: &mut Vec<ProfileEntry>, part| {
            if acc.is_empty() {
                *acc = part;
            } else {
                for (a, b) in acc.iter_mut().zip(&part) {
                    a.merge(b);
                }
            }
        },
    )?;
    Ok(PersuasionProfile {
        k,
        taus,
        entries,
        replicates: opts.replicates,
        confidence: opts.confidence,
    })
}

/// `post[i] − max_{j≠i} post[j]`.
pub(crate) fn min_advantage(post: &[f64], i: usize) -> f64 {
    let other = post
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if other.is_finite() {
        post[i] - other
    } else {
        f64::INFINITY
    }
}

pub fn estimate_persuasion_constants(prior: &PriorModel, k: u64, opts: McOptions) -> Result<PersuasionConstants> {
    persuasion_profile(prior, k, opts)?.constants()
}

/// `E[Y⁺]` for `Y ~ N(m, s²)`.
pub fn positive_part_normal(m: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return m.max(0.0);
    }
    m * normal_cdf(m / s) + s * normal_pdf(m / s)
}

/// Minimum phase length for the two-arm sampler:
/// `ceil(max(k_P, 1 + (μ₁⁰ − μ₂⁰) / E[Y·1{Y>0}]))` with `Y = X^{k_P}`.
/// Gaussian-conjugate priors use the closed form; other priors use the
/// lower confidence bound of a Monte-Carlo estimate.
pub fn min_phase_length_two_arm(prior: &PriorModel, k_p: u64, opts: McOptions) -> Result<u64> {
    if prior.num_arms() != 2 || prior.num_contexts() != 1 {
        return Err(Error::ArmCount {
            expected: "2".into(),
            actual: prior.num_arms(),
        });
    }
    let gap = prior.prior_mean(ArmId::FIRST) - prior.prior_mean(ArmId::from_index(1));
    if gap < 0.0 {
        return Err(Error::ArmOrder {
            prev_arm: 1,
            prev: prior.prior_mean(ArmId::FIRST),
            arm: 2,
            next: prior.prior_mean(ArmId::from_index(1)),
        });
    }
    let floor = k_p.max(1) as f64;
    if gap == 0.0 {
        return Ok(floor as u64);
    }
    let denom = match xk_distribution(prior, k_p) {
        Ok((m, var)) => positive_part_normal(m, var.sqrt()),
        Err(_) => {
            opts.validate(1000)?;
            let xs = xk_samples(prior, k_p, opts.replicates, opts.seed)?;
            let mom: Moments = xs.iter().map(|x| x.max(0.0)).collect();
            mom.mean() - z_two_sided(opts.confidence) * mom.std_error()
        }
    };
    if !(denom > 0.0) {
        return Err(Error::PriorNotPersuadable(format!(
            "E[X·1{{X>0}}] bound is {denom:.3e}"
        )));
    }
    Ok(ceil_tol(floor.max(1.0 + gap / denom)) as u64)
}

/// Monte-Carlo mean and standard error of `max_i μ_i` (context 0).
pub fn expected_max_mean(prior: &PriorModel, opts: McOptions) -> Result<Moments> {
    chunked(
        opts.replicates,
        |lo, hi| {
            let mut m = Moments::default();
            for r in lo..hi {
                let mut rng = RngStream::new(opts.seed, r, "expected-max", 0);
                m.push(prior.sample_instance(&mut rng)?.best_mean());
            }
            Ok(m)
        },
        |acc: &mut Moments, part| acc.merge(&part),
    )
}

/// Minimum phase length for the black-box reduction:
/// `ceil(2 + (UCB(E[max μ]) − μ_m⁰) / (τ_P · ρ_P))`.
pub fn min_phase_length_m_arm(prior: &PriorModel, constants: &PersuasionConstants, opts: McOptions) -> Result<u64> {
    let tr = constants.tau_p * constants.rho_p;
    if !(tr > 1e-12) {
        return Err(Error::PriorNotPersuadable(format!("τ_P·ρ_P = {tr:.3e}")));
    }
    opts.validate(1)?;
    let mom = expected_max_mean(prior, opts)?;
    let ucb = mom.mean() + z_two_sided(opts.confidence) * mom.std_error();
    let mu_m = prior.prior_mean(ArmId::from_index(prior.num_arms() - 1));
    Ok(ceil_tol(2.0 + (ucb - mu_m) / tr) as u64)
}

/// Monte-Carlo moments of `X·1{X>τ}` where `X = E[μ_i − max_{j≠i} μ_j | S]`
/// and `S` holds `counts[j]` samples of each arm `j`.
pub fn positive_part_moment(prior: &PriorModel, arm: ArmId, counts: &[u64], tau: f64, opts: McOptions) -> Result<Moments> {
    if counts.len() != prior.num_arms() {
        return Err(Error::ArmCount {
            expected: prior.num_arms().to_string(),
            actual: counts.len(),
        });
    }
    chunked(
        opts.replicates,
        |lo, hi| {
            let mut m = Moments::default();
            for r in lo..hi {
                let mut rng = RngStream::new(opts.seed, r, "conditioning", 0);
                let mu = prior.sample_instance(&mut rng)?;
                let mut data: Dataset = prior.empty_dataset();
                for (j, &c) in counts.iter().enumerate() {
                    let a = ArmId::from_index(j);
                    let fam = prior.family_in(a, 0);
                    for _ in 0..c {
                        data.add(a, fam.draw(mu.mean(a), &mut rng)?);
                    }
                }
                let post = prior.posterior_means_in(&data, 0)?;
                let x = min_advantage(&post, arm.index());
                m.push(if x > tau { x } else { 0.0 });
            }
            Ok(m)
        },
        |acc: &mut Moments, part| acc.merge(&part),
    )
}
