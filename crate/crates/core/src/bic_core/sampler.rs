use rand::seq::index::sample as sample_indices;

use super::{seed_of, ReductionConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::model::{ArmId, Prediction, Role, Slot, Stage, Transcript};
use crate::priors::{Dataset, PriorModel};
use crate::rng::RngStream;

/// A sampling-stage transcript and the exploration samples it collected.
#[derive(Debug, Clone)]
pub struct SamplingOutput {
    pub transcript: Transcript,
    pub samples: Dataset,
}

/// Uniformly random `k`-subset of `0..n` as a membership mask.
pub(crate) fn random_subset(rng: &mut RngStream, n: usize, k: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for i in sample_indices(rng, n, k).iter() {
        mask[i] = true;
    }
    mask
}

fn check_arms(prior: &PriorModel, env: &Environment) -> Result<()> {
    if prior.num_arms() != env.num_arms() {
        return Err(Error::ArmCount {
            expected: prior.num_arms().to_string(),
            actual: env.num_arms(),
        });
    }
    Ok(())
}

/// Two-arm sampler. Recommends arm 1 for `max(k, L)` rounds, fixes the
/// exploit arm `a*` as the posterior-best arm given those samples (ties to
/// arm 1), then runs `k` phases of `L` rounds in which one uniformly chosen
/// agent gets arm 2 and everyone else gets `a*`.
pub fn run_two_arm_sampler(
    prior: &PriorModel,
    cfg: &ReductionConfig,
    env: &mut Environment,
    slots: &mut RngStream,
) -> Result<SamplingOutput> {
    cfg.validate()?;
    if prior.num_arms() != 2 {
        return Err(Error::ArmCount {
            expected: "2".into(),
            actual: prior.num_arms(),
        });
    }
    check_arms(prior, env)?;
    let mut t = Transcript::with_capacity(env.instance().clone(), seed_of(slots), cfg.two_arm_rounds() as usize);
    let mut data = prior.empty_dataset();
    let first = ArmId::FIRST;
    let second = ArmId::from_index(1);
    for _ in 0..cfg.k.max(cfg.l) {
        let out = env.pull(first)?;
        data.add(first, out.reward);
        t.push(None, first, out.reward, out.feedback, None, Slot::new(Stage::Sampling, 0, Role::Fixed));
    }
    let exploit = prior.posterior_argmax(&data)?;
    for phase in 1..=cfg.k {
        let pos = slots.index(cfg.l as usize);
        for j in 0..cfg.l as usize {
            let (arm, role) = if j == pos {
                (second, Role::Explore)
            } else {
                (exploit, Role::Exploit)
            };
            let out = env.pull(arm)?;
            if role == Role::Explore {
                data.add(arm, out.reward);
            }
            t.push(None, arm, out.reward, out.feedback, None, Slot::new(Stage::Sampling, phase as u32, role));
        }
    }
    Ok(SamplingOutput {
        transcript: t,
        samples: data,
    })
}

/// m-arm sampling stage. Recommends arm 1 for `k` rounds; then for each arm
/// `i = 2..m` runs one phase of `Lk` rounds in which a uniform `k`-subset
/// gets arm `i` and the rest get the posterior-best arm given the samples of
/// arms `< i`. Returns exactly `k` exploration samples per arm.
pub fn run_m_arm_sampler(
    prior: &PriorModel,
    cfg: &ReductionConfig,
    env: &mut Environment,
    slots: &mut RngStream,
) -> Result<SamplingOutput> {
    let mut t = Transcript::with_capacity(
        env.instance().clone(),
        seed_of(slots),
        cfg.m_arm_rounds(prior.num_arms()) as usize,
    );
    let samples = m_arm_sampler_into(prior, cfg, env, slots, &mut t, None)?;
    Ok(SamplingOutput { transcript: t, samples })
}

pub(crate) fn m_arm_sampler_into(
    prior: &PriorModel,
    cfg: &ReductionConfig,
    env: &mut Environment,
    slots: &mut RngStream,
    t: &mut Transcript,
    pred: Option<Prediction>,
) -> Result<Dataset> {
    cfg.validate()?;
    if prior.num_arms() < 2 || prior.num_contexts() != 1 {
        return Err(Error::ArmCount {
            expected: "at least 2 arms and a single context".into(),
            actual: prior.num_arms(),
        });
    }
    check_arms(prior, env)?;
    let mut data = prior.empty_dataset();
    let first = ArmId::FIRST;
    for _ in 0..cfg.k {
        let out = env.pull(first)?;
        data.add(first, out.reward);
        t.push(None, first, out.reward, out.feedback, pred, Slot::new(Stage::Sampling, 1, Role::Fixed));
    }
    let phase_len = (cfg.l * cfg.k) as usize;
    for i in 1..prior.num_arms() {
        let arm = ArmId::from_index(i);
        let exploit = prior.posterior_argmax(&data)?;
        let q = random_subset(slots, phase_len, cfg.k as usize);
        let mut explored = Vec::with_capacity(cfg.k as usize);
        for &in_q in &q {
            let (rec, role) = if in_q {
                (arm, Role::Explore)
            } else {
                (exploit, Role::Exploit)
            };
            let out = env.pull(rec)?;
            if in_q {
                explored.push(out.reward);
            }
            t.push(None, rec, out.reward, out.feedback, pred, Slot::new(Stage::Sampling, arm.number(), role));
        }
        for r in explored {
            data.add(arm, r);
        }
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MabInstance, RewardFamily};
    use crate::priors::Marginal;

    fn point_prior(values: &[f64]) -> PriorModel {
        PriorModel::independent(
            values.iter().map(|&v| Marginal::PointMass { value: v }).collect(),
            vec![RewardFamily::Bernoulli; values.len()],
        )
        .unwrap()
    }

    fn env_for(values: &[f64], rep: u64) -> Environment {
        Environment::simple(
            MabInstance::new(values.to_vec()).unwrap(),
            vec![RewardFamily::Bernoulli; values.len()],
            1,
            rep,
        )
        .unwrap()
    }

    #[test]
    fn two_arm_round_count_and_one_explore_per_phase() {
        let p = point_prior(&[0.9, 0.1]);
        let cfg = ReductionConfig::new(2, 3, 0).unwrap();
        for rep in 0..20 {
            let mut env = env_for(&[0.9, 0.1], rep);
            let mut slots = RngStream::new(1, rep, "slots", 0);
            let out = run_two_arm_sampler(&p, &cfg, &mut env, &mut slots).unwrap();
            let t = &out.transcript;
            assert_eq!(t.len(), 9);
            let arm2: Vec<usize> = t
                .rows()
                .iter()
                .enumerate()
                .filter(|(_, r)| r.recommendation.index() == 1)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(arm2.len(), 2);
            assert!((3..6).contains(&arm2[0]) && (6..9).contains(&arm2[1]));
            assert_eq!(out.samples.count(ArmId::from_index(1)), 2);
        }
    }

    #[test]
    fn m_arm_round_count_and_exact_samples() {
        let p = point_prior(&[0.9, 0.5, 0.1]);
        let cfg = ReductionConfig::new(2, 3, 0).unwrap();
        let mut env = env_for(&[0.9, 0.5, 0.1], 0);
        let mut slots = RngStream::new(1, 0, "slots", 0);
        let out = run_m_arm_sampler(&p, &cfg, &mut env, &mut slots).unwrap();
        assert_eq!(out.transcript.len(), 14);
        for a in 0..3 {
            assert_eq!(out.samples.count(ArmId::from_index(a)), 2);
        }
        let by_arm = |a: usize| {
            out.transcript
                .rows()
                .iter()
                .filter(|r| r.recommendation.index() == a)
                .count()
        };
        assert_eq!(by_arm(1), 2);
        assert_eq!(by_arm(2), 2);
        assert_eq!(by_arm(0), 10);
    }

    #[test]
    fn two_arm_rejects_three_arms() {
        let p = point_prior(&[0.9, 0.5, 0.1]);
        let cfg = ReductionConfig::new(1, 1, 0).unwrap();
        let mut env = env_for(&[0.9, 0.5, 0.1], 0);
        let mut slots = RngStream::new(1, 0, "slots", 0);
        assert!(run_two_arm_sampler(&p, &cfg, &mut env, &mut slots).is_err());
    }
}
