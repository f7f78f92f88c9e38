//! Contexts, arm-ranks, policies and the contextual black-box reduction.

mod persuasion;
mod reduction;

pub use persuasion::{estimate_contextual_persuasion, ContextualPersuasion};
pub use reduction::{run_contextual_reduction, run_contextual_standalone, ContextualLayout};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::regret::RegretCurve;
use crate::model::{ArmId, ContextSpace, FeedbackFamily, Prediction, Transcript};
use crate::priors::config::LoadedPrior;
use crate::priors::PriorModel;

/// A prior over the `arms × contexts` mean matrix with its context
/// distribution, feedback family and per-context arm ranking.
#[derive(Debug, Clone)]
pub struct ContextualPrior {
    prior: PriorModel,
    contexts: ContextSpace,
    feedback: FeedbackFamily,
    ranks: Vec<Vec<ArmId>>,
}

impl ContextualPrior {
    pub fn new(prior: PriorModel, contexts: ContextSpace, feedback: FeedbackFamily) -> Result<Self> {
        if prior.num_contexts() != contexts.len() {
            return Err(Error::param(
                "contexts",
                format!(
                    "prior has {} contexts but the context space has {}",
                    prior.num_contexts(),
                    contexts.len()
                ),
            ));
        }
        let ranks = (0..contexts.len() as u32)
            .map(|x| {
                let mut order: Vec<ArmId> = (0..prior.num_arms()).map(ArmId::from_index).collect();
                order.sort_by(|a, b| prior.prior_mean_in(*b, x).total_cmp(&prior.prior_mean_in(*a, x)));
                order
            })
            .collect();
        Ok(Self {
            prior,
            contexts,
            feedback,
            ranks,
        })
    }

    pub fn from_loaded(loaded: LoadedPrior) -> Result<Self> {
        Self::new(loaded.prior, loaded.contexts, loaded.feedback)
    }

    pub fn prior(&self) -> &PriorModel {
        &self.prior
    }

    pub fn contexts(&self) -> &ContextSpace {
        &self.contexts
    }

    pub fn feedback(&self) -> FeedbackFamily {
        self.feedback
    }

    pub fn num_arms(&self) -> usize {
        self.prior.num_arms()
    }

    /// Arms of context `x` from best to worst prior mean.
    pub fn ranking(&self, x: u32) -> Result<&[ArmId]> {
        self.contexts.check(x)?;
        Ok(&self.ranks[x as usize])
    }

    /// The arm of rank `rank` (one-based) in context `x`.
    pub fn ranked_arm(&self, x: u32, rank: usize) -> Result<ArmId> {
        let r = self.ranking(x)?;
        r.get(rank.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::param("rank", format!("must lie in 1..={}", r.len())))
    }
}

/// The permutation `σ(x, ·)`: arms sorted by prior mean in context `x`,
/// descending, ties to the lower index.
pub fn arm_rank(prior: &ContextualPrior, x: u32) -> Result<Vec<ArmId>> {
    prior.ranking(x).map(<[ArmId]>::to_vec)
}

/// A context-tagged sample of a given arm-rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSample {
    pub context: u32,
    pub arm: ArmId,
    pub rank: u32,
    pub reward: f64,
    pub feedback: Option<f64>,
}

/// A context → arm table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy(pub Vec<ArmId>);

impl Policy {
    pub fn arm(&self, x: u32) -> Option<ArmId> {
        self.0.get(x as usize).copied()
    }
}

/// A finite, nonempty list of total policies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyClass {
    policies: Vec<Policy>,
    arms: usize,
    contexts: usize,
}

impl PolicyClass {
    pub fn new(policies: Vec<Policy>, arms: usize, contexts: usize) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::param("policies", "the class must be nonempty"));
        }
        for (p, pol) in policies.iter().enumerate() {
            if pol.0.len() != contexts {
                return Err(Error::PolicyNotTotal {
                    policy: p,
                    context: pol.0.len().min(contexts) as u32,
                });
            }
            if let Some(a) = pol.0.iter().find(|a| a.index() >= arms) {
                return Err(Error::UnknownArm(a.number()));
            }
        }
        Ok(Self {
            policies,
            arms,
            contexts,
        })
    }

    /// Every one of the `arms^contexts` policies.
    pub fn all(arms: usize, contexts: usize) -> Result<Self> {
        let total = (arms as u64).checked_pow(contexts as u32).filter(|&n| n <= 1 << 20);
        let Some(total) = total else {
            return Err(Error::param("policies", "too many policies to enumerate"));
        };
        let policies = (0..total)
            .map(|mut n| {
                Policy(
                    (0..contexts)
                        .map(|_| {
                            let a = (n % arms as u64) as usize;
                            n /= arms as u64;
                            ArmId::from_index(a)
                        })
                        .collect(),
                )
            })
            .collect();
        Self::new(policies, arms, contexts)
    }

    /// One constant policy per arm.
    pub fn constant(arms: usize, contexts: usize) -> Result<Self> {
        let policies = (0..arms)
            .map(|a| Policy(vec![ArmId::from_index(a); contexts]))
            .collect();
        Self::new(policies, arms, contexts)
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn num_arms(&self) -> usize {
        self.arms
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts
    }

    pub fn get(&self, index: u32) -> Option<&Policy> {
        self.policies.get(index as usize)
    }
}

/// A stateful contextual bandit algorithm. `next_arm` and `observe`
/// alternate strictly.
pub trait ContextualBanditAlgorithm: Send {
    fn name(&self) -> &str;

    fn num_arms(&self) -> usize;

    fn next_arm(&mut self, context: u32) -> Result<ArmId>;

    fn observe(&mut self, context: u32, arm: ArmId, reward: f64, feedback: Option<f64>) -> Result<()>;

    fn predict(&self) -> Option<Prediction> {
        None
    }

    fn emits_predictions(&self) -> bool {
        false
    }
}

impl<A: ContextualBanditAlgorithm + ?Sized> ContextualBanditAlgorithm for Box<A> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn num_arms(&self) -> usize {
        (**self).num_arms()
    }

    fn next_arm(&mut self, context: u32) -> Result<ArmId> {
        (**self).next_arm(context)
    }

    fn observe(&mut self, context: u32, arm: ArmId, reward: f64, feedback: Option<f64>) -> Result<()> {
        (**self).observe(context, arm, reward, feedback)
    }

    fn predict(&self) -> Option<Prediction> {
        (**self).predict()
    }

    fn emits_predictions(&self) -> bool {
        (**self).emits_predictions()
    }
}

/// Protocol checker for contextual algorithms.
#[derive(Debug)]
pub struct ContextualGuarded<A> {
    inner: A,
    pending: Option<(u32, ArmId)>,
}

impl<A: ContextualBanditAlgorithm> ContextualGuarded<A> {
    pub fn new(inner: A) -> Self {
        Self { inner, pending: None }
    }

    pub fn into_inner(self) -> A {
        self.inner
    }
}

impl<A: ContextualBanditAlgorithm> ContextualBanditAlgorithm for ContextualGuarded<A> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn num_arms(&self) -> usize {
        self.inner.num_arms()
    }

    fn next_arm(&mut self, context: u32) -> Result<ArmId> {
        if self.pending.is_some() {
            return Err(Error::Protocol(format!(
                "{}: next_arm called twice without an observation",
                self.inner.name()
            )));
        }
        let arm = self.inner.next_arm(context)?;
        if arm.index() >= self.inner.num_arms() {
            return Err(Error::Protocol(format!("{}: returned unknown arm {arm}", self.inner.name())));
        }
        self.pending = Some((context, arm));
        Ok(arm)
    }

    fn observe(&mut self, context: u32, arm: ArmId, reward: f64, feedback: Option<f64>) -> Result<()> {
        match self.pending {
            Some(p) if p == (context, arm) => {
                self.pending = None;
                self.inner.observe(context, arm, reward, feedback)
            }
            _ => Err(Error::Protocol(format!(
                "{}: observation for context {context}, arm {arm} does not match the pending request",
                self.inner.name()
            ))),
        }
    }

    fn predict(&self) -> Option<Prediction> {
        self.inner.predict()
    }

    fn emits_predictions(&self) -> bool {
        self.inner.emits_predictions()
    }
}

/// `max over π ∈ Π of E_x μ(π(x), x)` for one instance.
pub fn best_policy_value(
    instance: &crate::model::MabInstance,
    contexts: &ContextSpace,
    policies: &PolicyClass,
) -> Result<f64> {
    if policies.num_contexts() != contexts.len() || instance.num_contexts() != contexts.len() {
        return Err(Error::param("policies", "policy class and context space disagree"));
    }
    Ok(policies
        .policies()
        .iter()
        .map(|p| {
            contexts
                .probs()
                .iter()
                .enumerate()
                .map(|(x, &px)| px * instance.mean_in(p.0[x], x as u32))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Bayesian contextual regret against the class `policies`: per replicate
/// `t · max_π E_x μ(π(x), x) − Σ_{s≤t} μ(I_s, x_s)` with that replicate's
/// true means, averaged over replicates.
pub fn contextual_regret(transcripts: &[Transcript], prior: &ContextualPrior, policies: &PolicyClass) -> Result<RegretCurve> {
    let curves = transcripts
        .iter()
        .map(|t| {
            let inst = t.instance();
            let best = best_policy_value(inst, prior.contexts(), policies)?;
            let mut acc = 0.0;
            Ok(t.rows()
                .iter()
                .map(|r| {
                    acc += best - inst.mean_in(r.recommendation, r.context.unwrap_or(0));
                    acc
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    RegretCurve::from_curves(curves, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RewardFamily;
    use crate::priors::Marginal;

    fn point_prior(cells: &[f64], arms: usize, probs: Vec<f64>) -> ContextualPrior {
        let n = probs.len();
        let prior = PriorModel::contextual(
            arms,
            n,
            cells.iter().map(|&v| Marginal::PointMass { value: v }).collect(),
            vec![RewardFamily::Bernoulli; arms],
        )
        .unwrap();
        ContextualPrior::new(prior, ContextSpace::new(probs).unwrap(), FeedbackFamily::None).unwrap()
    }

    #[test]
    fn ranks_sort_by_prior_mean() {
        let p = point_prior(&[0.3, 0.9, 0.5], 3, vec![1.0]);
        let numbers: Vec<u32> = arm_rank(&p, 0).unwrap().iter().map(|a| a.number()).collect();
        assert_eq!(numbers, vec![2, 3, 1]);
    }

    #[test]
    fn equal_means_give_identity() {
        let p = point_prior(&[0.5, 0.5, 0.5], 3, vec![1.0]);
        let numbers: Vec<u32> = arm_rank(&p, 0).unwrap().iter().map(|a| a.number()).collect();
        assert_eq!(numbers, vec![1, 2, 3]);
    }

    #[test]
    fn context_free_prior_ranks_identically() {
        let p = point_prior(&[0.2, 0.6, 0.2, 0.6], 2, vec![0.5, 0.5]);
        assert_eq!(arm_rank(&p, 0).unwrap(), arm_rank(&p, 1).unwrap());
        assert!(arm_rank(&p, 2).is_err());
    }

    #[test]
    fn policy_enumeration() {
        let c = PolicyClass::all(2, 3).unwrap();
        assert_eq!(c.len(), 8);
        assert!(PolicyClass::new(vec![Policy(vec![ArmId::FIRST])], 2, 2).is_err());
        assert!(PolicyClass::new(vec![], 2, 2).is_err());
    }

    #[test]
    fn best_policy_picks_per_context_argmax() {
        let inst = crate::model::MabInstance::contextual(2, 2, vec![0.9, 0.1, 0.2, 0.6]).unwrap();
        let ctx = ContextSpace::new(vec![0.5, 0.5]).unwrap();
        let v = best_policy_value(&inst, &ctx, &PolicyClass::all(2, 2).unwrap()).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
        let v = best_policy_value(&inst, &ctx, &PolicyClass::constant(2, 2).unwrap()).unwrap();
        assert!((v - 0.55).abs() < 1e-12);
    }
}
