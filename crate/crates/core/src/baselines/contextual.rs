use crate::bic_core::BanditAlgorithm;
use crate::contextual::{ContextualBanditAlgorithm, PolicyClass};
use crate::error::{Error, Result};
use crate::model::{ArmId, Prediction};
use crate::rng::RngStream;

/// ε-greedy over a finite policy class. With probability ε plays a uniform
/// arm, otherwise the arm of the policy with the best inverse-propensity
/// reward estimate (ties to the lowest policy index). Feedback is ignored.
#[derive(Debug)]
pub struct EpsilonGreedyPolicies {
    policies: PolicyClass,
    epsilon: f64,
    rng: RngStream,
    scores: Vec<f64>,
    propensity: Option<f64>,
}

impl EpsilonGreedyPolicies {
    pub fn new(policies: PolicyClass, epsilon: f64, rng: RngStream) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::param("epsilon", format!("{epsilon} is outside [0, 1]")));
        }
        let n = policies.len();
        Ok(Self {
            policies,
            epsilon,
            rng,
            scores: vec![0.0; n],
            propensity: None,
        })
    }

    fn leader(&self) -> usize {
        let mut best = 0;
        for (i, &s) in self.scores.iter().enumerate() {
            if s > self.scores[best] {
                best = i;
            }
        }
        best
    }
}

impl ContextualBanditAlgorithm for EpsilonGreedyPolicies {
    fn name(&self) -> &str {
        "eps-greedy"
    }

    fn num_arms(&self) -> usize {
        self.policies.num_arms()
    }

    fn next_arm(&mut self, context: u32) -> Result<ArmId> {
        let m = self.policies.num_arms();
        let greedy = self.policies.policies()[self.leader()]
            .arm(context)
            .ok_or(Error::UnknownContext(context))?;
        let arm = if self.rng.uniform() < self.epsilon {
            ArmId::from_index(self.rng.index(m))
        } else {
            greedy
        };
        let uniform = self.epsilon / m as f64;
        self.propensity = Some(if arm == greedy { uniform + 1.0 - self.epsilon } else { uniform });
        Ok(arm)
    }

    fn observe(&mut self, context: u32, arm: ArmId, reward: f64, _: Option<f64>) -> Result<()> {
        let p = self
            .propensity
            .take()
            .ok_or_else(|| Error::Protocol("eps-greedy: observe without next_arm".into()))?;
        for (s, pol) in self.scores.iter_mut().zip(self.policies.policies()) {
            if pol.arm(context) == Some(arm) {
                *s += reward / p;
            }
        }
        Ok(())
    }

    fn predict(&self) -> Option<Prediction> {
        Some(Prediction::Policy(self.leader() as u32))
    }

    fn emits_predictions(&self) -> bool {
        true
    }
}

/// Runs a multi-armed algorithm on contextual rounds by discarding the
/// context.
#[derive(Debug)]
pub struct IgnoreContext<A>(pub A);

impl<A: BanditAlgorithm> ContextualBanditAlgorithm for IgnoreContext<A> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn num_arms(&self) -> usize {
        self.0.num_arms()
    }

    fn next_arm(&mut self, _: u32) -> Result<ArmId> {
        self.0.next_arm()
    }

    fn observe(&mut self, _: u32, arm: ArmId, reward: f64, feedback: Option<f64>) -> Result<()> {
        self.0.observe(arm, reward, feedback)
    }

    fn predict(&self) -> Option<Prediction> {
        self.0.predict()
    }

    fn emits_predictions(&self) -> bool {
        self.0.emits_predictions()
    }
}

/// Builds a contextual algorithm by name: `eps-greedy:<ε>` over `policies`,
/// or any multi-armed name with the context ignored.
pub fn make_contextual_algorithm(
    name: &str,
    policies: &PolicyClass,
    horizon: u64,
    rng: RngStream,
) -> Result<Box<dyn ContextualBanditAlgorithm>> {
    if let Some(eps) = name.strip_prefix("eps-greedy:") {
        let eps: f64 = eps.parse().map_err(|_| Error::UnknownAlgorithm(name.into()))?;
        return Ok(Box::new(EpsilonGreedyPolicies::new(policies.clone(), eps, rng)?));
    }
    let inner = super::make_algorithm(name, policies.num_arms(), horizon, rng)?;
    Ok(Box::new(IgnoreContext(inner)))
}
