//! The simulated world of one replicate: a realized instance, reward and
//! feedback samplers, and the arrival process of agent contexts.

use crate::error::{Error, Result};
use crate::model::{ArmId, ContextSpace, FeedbackFamily, MabInstance, RewardFamily};
use crate::priors::PriorModel;
use crate::rng::RngStream;

/// Reward and feedback observed after one pull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub reward: f64,
    pub feedback: Option<f64>,
}

/// Random streams driving an environment.
///
/// Rewards of ordinary rounds come from `nature`. Rounds whose outcome is
/// forwarded to a wrapped algorithm draw from `dedicated`, which is also the
/// stream a standalone run of that algorithm uses; this is what couples the
/// two runs.
#[derive(Debug)]
pub struct EnvStreams {
    pub nature: RngStream,
    pub dedicated: RngStream,
    pub contexts: RngStream,
}

impl EnvStreams {
    pub fn for_replicate(root: u64, replicate: u64) -> Self {
        Self {
            nature: RngStream::new(root, replicate, "nature", 0),
            dedicated: RngStream::new(root, replicate, "dedicated", 0),
            contexts: RngStream::new(root, replicate, "contexts", 0),
        }
    }
}

#[derive(Debug)]
pub struct Environment {
    instance: MabInstance,
    families: Vec<RewardFamily>,
    feedback: FeedbackFamily,
    contexts: ContextSpace,
    streams: EnvStreams,
}

impl Environment {
    /// `families` holds one entry per arm (shared across contexts) or one per
    /// arm-context cell.
    pub fn new(
        instance: MabInstance,
        families: Vec<RewardFamily>,
        feedback: FeedbackFamily,
        contexts: ContextSpace,
        streams: EnvStreams,
    ) -> Result<Self> {
        let arms = instance.num_arms();
        let cells = arms * instance.num_contexts();
        if families.len() != arms && families.len() != cells {
            return Err(Error::ArmCount {
                expected: format!("{arms} or {cells} reward families"),
                actual: families.len(),
            });
        }
        if contexts.len() != instance.num_contexts() {
            return Err(Error::param(
                "contexts",
                format!(
                    "context space has {} contexts but the instance has {}",
                    contexts.len(),
                    instance.num_contexts()
                ),
            ));
        }
        for (i, &mu) in instance.means().iter().enumerate() {
            families[i % families.len()].check_mean(mu)?;
        }
        Ok(Self {
            instance,
            families,
            feedback,
            contexts,
            streams,
        })
    }

    /// Plain multi-armed environment with the standard replicate streams.
    pub fn simple(instance: MabInstance, families: Vec<RewardFamily>, root: u64, replicate: u64) -> Result<Self> {
        Self::new(
            instance,
            families,
            FeedbackFamily::None,
            ContextSpace::single(),
            EnvStreams::for_replicate(root, replicate),
        )
    }

    /// Draws the replicate's instance from `prior` and wires the standard
    /// streams below `root`.
    pub fn for_replicate(
        prior: &PriorModel,
        contexts: ContextSpace,
        feedback: FeedbackFamily,
        root: u64,
        replicate: u64,
    ) -> Result<Self> {
        let mut rng = RngStream::new(root, replicate, "instance", 0);
        let instance = prior.sample_instance(&mut rng)?;
        Self::new(
            instance,
            prior.families().to_vec(),
            feedback,
            contexts,
            EnvStreams::for_replicate(root, replicate),
        )
    }

    pub fn instance(&self) -> &MabInstance {
        &self.instance
    }

    pub fn num_arms(&self) -> usize {
        self.instance.num_arms()
    }

    pub fn context_space(&self) -> &ContextSpace {
        &self.contexts
    }

    fn family(&self, arm: ArmId, context: u32) -> RewardFamily {
        if self.families.len() == self.instance.num_arms() {
            self.families[arm.index()]
        } else {
            self.families[context as usize * self.instance.num_arms() + arm.index()]
        }
    }

    fn check(&self, arm: ArmId, context: u32) -> Result<()> {
        if arm.index() >= self.instance.num_arms() {
            return Err(Error::UnknownArm(arm.number()));
        }
        self.contexts.check(context)
    }

    fn draw(&mut self, arm: ArmId, context: u32, dedicated: bool) -> Result<Outcome> {
        self.check(arm, context)?;
        let mu = self.instance.mean_in(arm, context);
        let family = self.family(arm, context);
        let rng = if dedicated {
            &mut self.streams.dedicated
        } else {
            &mut self.streams.nature
        };
        let reward = family.draw(mu, rng)?;
        let feedback = self.feedback.draw(mu, rng);
        Ok(Outcome { reward, feedback })
    }

    pub fn pull(&mut self, arm: ArmId) -> Result<Outcome> {
        self.draw(arm, 0, false)
    }

    pub fn pull_in(&mut self, arm: ArmId, context: u32) -> Result<Outcome> {
        self.draw(arm, context, false)
    }

    pub fn pull_dedicated(&mut self, arm: ArmId) -> Result<Outcome> {
        self.draw(arm, 0, true)
    }

    pub fn pull_dedicated_in(&mut self, arm: ArmId, context: u32) -> Result<Outcome> {
        self.draw(arm, context, true)
    }

    /// Context of the next ordinary agent.
    pub fn next_context(&mut self) -> u32 {
        self.contexts.draw(&mut self.streams.contexts)
    }

    /// Context of the next agent whose outcome goes to the wrapped algorithm.
    pub fn next_dedicated_context(&mut self) -> u32 {
        self.contexts.draw(&mut self.streams.dedicated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(root: u64) -> Environment {
        let inst = MabInstance::new(vec![0.7, 0.4]).unwrap();
        Environment::simple(inst, vec![RewardFamily::Bernoulli; 2], root, 0).unwrap()
    }

    #[test]
    fn dedicated_stream_is_separate_from_nature() {
        let mut a = env(5);
        let mut b = env(5);
        for _ in 0..50 {
            b.pull(ArmId::FIRST).unwrap();
        }
        let xa: Vec<f64> = (0..50).map(|_| a.pull_dedicated(ArmId::FIRST).unwrap().reward).collect();
        let xb: Vec<f64> = (0..50).map(|_| b.pull_dedicated(ArmId::FIRST).unwrap().reward).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn rejects_unknown_arm() {
        assert!(matches!(env(1).pull(ArmId::from_index(5)), Err(Error::UnknownArm(6))));
    }

    #[test]
    fn rejects_bernoulli_mean_outside_unit_interval() {
        let inst = MabInstance::new(vec![1.5, 0.4]).unwrap();
        assert!(Environment::simple(inst, vec![RewardFamily::Bernoulli; 2], 1, 0).is_err());
    }
}
