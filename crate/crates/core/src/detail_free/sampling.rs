use serde::{Deserialize, Serialize};

use super::checked_pull;
use crate::bic_core::sampler::random_subset;
use crate::bic_core::seed_of;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::model::{ArmId, Role, Slot, Stage, Transcript};
use crate::rng::RngStream;

/// Parameters of the detail-free sampling stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfSamplingConfig {
    /// Samples of each arm.
    pub k: u64,
    /// Phase-length multiplier: each exploration phase spans `Lk` rounds.
    pub l: u64,
    /// Safety margin `C`.
    pub c: f64,
    /// Initial arm-1 rounds `k*` of the two-arm stage; ignored for `m` arms.
    pub k_star: u64,
}

impl DfSamplingConfig {
    pub fn new(k: u64, l: u64, c: f64) -> Result<Self> {
        let cfg = Self { k, l, c, k_star: k };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_k_star(mut self, k_star: u64) -> Self {
        self.k_star = k_star;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 {
            return Err(Error::param("k", "k and L must be at least 1"));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::param("C", format!("must lie in (0, 1), got {}", self.c)));
        }
        Ok(())
    }

    /// `k + Lk(m − 1)`.
    pub fn m_arm_rounds(&self, m: usize) -> u64 {
        self.k + self.l * self.k * (m as u64 - 1)
    }

    /// `Lk + max(k, k*)`.
    pub fn two_arm_rounds(&self) -> u64 {
        self.l * self.k + self.k.max(self.k_star)
    }
}

/// A sampling-stage transcript and the rewards collected for each arm.
#[derive(Debug, Clone)]
pub struct DfSamplingOutput {
    pub transcript: Transcript,
    /// `samples[i]` holds the exploration rewards of arm `i + 1` in order.
    pub samples: Vec<Vec<f64>>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Exploit arm of the phase for arm `arm` (zero-based `i`) given the sample
/// averages of arms `< i`: arm `i` iff `μ̂₁ < μ_i⁰ − C` and
/// `μ̂₁ + C < μ̂_j < μ_i⁰ − C` for every `1 < j < i`; arm 1 otherwise.
pub fn df_exploit_arm(arm: ArmId, sample_means: &[f64], prior_means: &[f64], c: f64) -> ArmId {
    let i = arm.index();
    let bar = prior_means[i] - c;
    let m1 = sample_means[0];
    if m1 < bar && sample_means[1..i].iter().all(|&mj| m1 + c < mj && mj < bar) {
        arm
    } else {
        ArmId::FIRST
    }
}

fn check_prior_means(prior_means: &[f64], env: &Environment) -> Result<()> {
    if prior_means.len() != env.num_arms() || prior_means.len() < 2 {
        return Err(Error::ArmCount {
            expected: format!("{} prior means, at least 2", env.num_arms()),
            actual: prior_means.len(),
        });
    }
    Ok(())
}

/// Detail-free sampling stage for `m` arms: `k` rounds of arm 1, then for
/// each arm `i > 1` a phase of `Lk` rounds in which a uniform `k`-subset
/// gets arm `i` and the rest get the exploit arm chosen by
/// [`df_exploit_arm`].
pub fn run_df_sampling_m(
    prior_means: &[f64],
    cfg: &DfSamplingConfig,
    env: &mut Environment,
    slots: &mut RngStream,
) -> Result<DfSamplingOutput> {
    cfg.validate()?;
    check_prior_means(prior_means, env)?;
    let m = prior_means.len();
    let mut t = Transcript::with_capacity(env.instance().clone(), seed_of(slots), cfg.m_arm_rounds(m) as usize);
    let mut samples = vec![Vec::with_capacity(cfg.k as usize); m];
    for _ in 0..cfg.k {
        let out = checked_pull(env, ArmId::FIRST)?;
        samples[0].push(out.reward);
        t.push(None, ArmId::FIRST, out.reward, out.feedback, None, Slot::new(Stage::Sampling, 1, Role::Fixed));
    }
    let phase_len = (cfg.l * cfg.k) as usize;
    for i in 1..m {
        let arm = ArmId::from_index(i);
        let means: Vec<f64> = samples[..i].iter().map(|s| mean(s)).collect();
        let exploit = df_exploit_arm(arm, &means, prior_means, cfg.c);
        for in_q in random_subset(slots, phase_len, cfg.k as usize) {
            let (rec, role) = if in_q { (arm, Role::Explore) } else { (exploit, Role::Exploit) };
            let out = checked_pull(env, rec)?;
            if in_q {
                samples[i].push(out.reward);
            }
            t.push(None, rec, out.reward, out.feedback, None, Slot::new(Stage::Sampling, arm.number(), role));
        }
    }
    Ok(DfSamplingOutput { transcript: t, samples })
}

/// Detail-free two-arm sampling stage: `max(k, k*)` rounds of arm 1, then
/// exploit arm 2 iff `μ̂₁ ≤ μ₂⁰ − C`, with a uniform `k`-subset of the next
/// `Lk` agents getting arm 2. Arm 1's samples are all `max(k, k*)` rewards.
pub fn run_df_two_arm_sampling(
    prior_means: &[f64],
    cfg: &DfSamplingConfig,
    env: &mut Environment,
    slots: &mut RngStream,
) -> Result<DfSamplingOutput> {
    cfg.validate()?;
    check_prior_means(prior_means, env)?;
    if prior_means.len() != 2 {
        return Err(Error::ArmCount {
            expected: "2".into(),
            actual: prior_means.len(),
        });
    }
    let mut t = Transcript::with_capacity(env.instance().clone(), seed_of(slots), cfg.two_arm_rounds() as usize);
    let first = cfg.k.max(cfg.k_star);
    let mut samples = vec![Vec::with_capacity(first as usize), Vec::with_capacity(cfg.k as usize)];
    for _ in 0..first {
        let out = checked_pull(env, ArmId::FIRST)?;
        samples[0].push(out.reward);
        t.push(None, ArmId::FIRST, out.reward, out.feedback, None, Slot::new(Stage::Sampling, 0, Role::Fixed));
    }
    let second = ArmId::from_index(1);
    let exploit = if mean(&samples[0]) <= prior_means[1] - cfg.c { second } else { ArmId::FIRST };
    for in_q in random_subset(slots, (cfg.l * cfg.k) as usize, cfg.k as usize) {
        let (rec, role) = if in_q { (second, Role::Explore) } else { (exploit, Role::Exploit) };
        let out = checked_pull(env, rec)?;
        if in_q {
            samples[1].push(out.reward);
        }
        t.push(None, rec, out.reward, out.feedback, None, Slot::new(Stage::Sampling, 1, role));
    }
    Ok(DfSamplingOutput { transcript: t, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MabInstance, RewardFamily};

    #[test]
    fn exploit_rule() {
        let pm = [0.7, 0.65, 0.6];
        let a3 = ArmId::from_index(2);
        assert_eq!(df_exploit_arm(a3, &[0.3, 0.45], &pm, 0.1), a3);
        assert_eq!(df_exploit_arm(a3, &[0.55, 0.45], &pm, 0.1), ArmId::FIRST);
        // Second conjunct: μ̂₂ must sit strictly inside (μ̂₁ + C, μ₃⁰ − C).
        assert_eq!(df_exploit_arm(a3, &[0.3, 0.4], &pm, 0.1), ArmId::FIRST);
        assert_eq!(df_exploit_arm(a3, &[0.3, 0.5], &pm, 0.1), ArmId::FIRST);
    }

    #[test]
    fn two_arm_exploit_rule() {
        // μ₂⁰ = 0.5, C = 0.25: exploit arm 2 iff μ̂₁ ≤ 0.25.
        for (r1, expect) in [(0.2, 1usize), (0.3, 0)] {
            let inst = MabInstance::new(vec![r1, 0.5]).unwrap();
            let mut env = Environment::simple(inst, vec![RewardFamily::PointMass; 2], 0, 0).unwrap();
            let mut slots = RngStream::new(0, 0, "slots", 0);
            let cfg = DfSamplingConfig::new(2, 3, 0.25).unwrap();
            let out = run_df_two_arm_sampling(&[0.6, 0.5], &cfg, &mut env, &mut slots).unwrap();
            let exploit: Vec<_> = out
                .transcript
                .rows()
                .iter()
                .zip(out.transcript.slots())
                .filter(|(_, s)| s.role == Role::Exploit)
                .map(|(r, _)| r.recommendation.index())
                .collect();
            assert!(exploit.iter().all(|&a| a == expect), "{r1}: {exploit:?}");
        }
    }

    #[test]
    fn m_arm_round_count() {
        let inst = MabInstance::new(vec![0.6, 0.5, 0.4]).unwrap();
        let mut env = Environment::simple(inst, vec![RewardFamily::Bernoulli; 3], 0, 0).unwrap();
        let mut slots = RngStream::new(0, 0, "slots", 0);
        let cfg = DfSamplingConfig::new(2, 3, 0.1).unwrap();
        let out = run_df_sampling_m(&[0.6, 0.5, 0.4], &cfg, &mut env, &mut slots).unwrap();
        assert_eq!(out.transcript.len(), 14);
        assert!(out.samples.iter().all(|s| s.len() == 2));
    }

    #[test]
    fn two_arm_round_count() {
        let inst = MabInstance::new(vec![0.6, 0.5]).unwrap();
        let mut env = Environment::simple(inst, vec![RewardFamily::Bernoulli; 2], 0, 0).unwrap();
        let mut slots = RngStream::new(0, 0, "slots", 0);
        let cfg = DfSamplingConfig::new(4, 3, 0.25).unwrap().with_k_star(10);
        let out = run_df_two_arm_sampling(&[0.6, 0.5], &cfg, &mut env, &mut slots).unwrap();
        assert_eq!(out.transcript.len() as u64, 12 + 10);
        assert_eq!(out.samples[1].len(), 4);
    }

    #[test]
    fn unbounded_rewards_are_rejected() {
        let inst = MabInstance::new(vec![0.6, 0.5]).unwrap();
        let mut env = Environment::simple(inst, vec![RewardFamily::Gaussian { noise_var: 4.0 }; 2], 0, 0).unwrap();
        let mut slots = RngStream::new(0, 0, "slots", 0);
        let cfg = DfSamplingConfig::new(50, 2, 0.1).unwrap();
        let err = run_df_sampling_m(&[0.6, 0.5], &cfg, &mut env, &mut slots).unwrap_err();
        assert!(matches!(err, Error::RewardOutOfRange { .. }));
    }
}
