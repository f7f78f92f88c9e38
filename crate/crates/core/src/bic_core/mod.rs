//! Prior-dependent BIC algorithms: the two-arm sampler, the m-arm sampling
//! stage and the black-box reduction that wraps an arbitrary bandit
//! algorithm.

pub(crate) mod reduction;
pub(crate) mod sampler;

pub use reduction::{run_black_box_reduction, run_reduction_with_samples};
pub use sampler::{run_m_arm_sampler, run_two_arm_sampler, SamplingOutput};

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::model::{ArmId, Prediction, Role, SeedRecord, Slot, Stage, Transcript};
use crate::rng::RngStream;

/// A stateful bandit algorithm. Calls to [`next_arm`](Self::next_arm) and
/// [`observe`](Self::observe) alternate strictly; `predict` is read-only.
pub trait BanditAlgorithm: Send {
    fn name(&self) -> &str;

    fn num_arms(&self) -> usize;

    fn next_arm(&mut self) -> Result<ArmId>;

    fn observe(&mut self, arm: ArmId, reward: f64, feedback: Option<f64>) -> Result<()>;

    /// Current prediction, if the algorithm makes any.
    fn predict(&self) -> Option<Prediction> {
        None
    }

    /// Whether [`predict`](Self::predict) is meaningful for this algorithm.
    fn emits_predictions(&self) -> bool {
        false
    }
}

impl<A: BanditAlgorithm + ?Sized> BanditAlgorithm for Box<A> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn num_arms(&self) -> usize {
        (**self).num_arms()
    }

    fn next_arm(&mut self) -> Result<ArmId> {
        (**self).next_arm()
    }

    fn observe(&mut self, arm: ArmId, reward: f64, feedback: Option<f64>) -> Result<()> {
        (**self).observe(arm, reward, feedback)
    }

    fn predict(&self) -> Option<Prediction> {
        (**self).predict()
    }

    fn emits_predictions(&self) -> bool {
        (**self).emits_predictions()
    }
}

/// Protocol checker: rejects a second `next_arm` before `observe`, an
/// `observe` without a pending arm or for a different arm, and arms out of
/// range.
#[derive(Debug)]
pub struct Guarded<A> {
    inner: A,
    pending: Option<ArmId>,
    calls: u64,
}

impl<A: BanditAlgorithm> Guarded<A> {
    pub fn new(inner: A) -> Self {
        Self {
            inner,
            pending: None,
            calls: 0,
        }
    }

    pub fn into_inner(self) -> A {
        self.inner
    }

    /// Number of completed `observe` calls.
    pub fn observations(&self) -> u64 {
        self.calls
    }
}

impl<A: BanditAlgorithm> BanditAlgorithm for Guarded<A> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn num_arms(&self) -> usize {
        self.inner.num_arms()
    }

    fn next_arm(&mut self) -> Result<ArmId> {
        if let Some(a) = self.pending {
            return Err(Error::Protocol(format!(
                "{}: next_arm called again while arm {a} awaits its outcome",
                self.inner.name()
            )));
        }
        let arm = self.inner.next_arm()?;
        if arm.index() >= self.inner.num_arms() {
            return Err(Error::Protocol(format!(
                "{}: returned arm {arm} but only {} arms exist",
                self.inner.name(),
                self.inner.num_arms()
            )));
        }
        self.pending = Some(arm);
        Ok(arm)
    }

    fn observe(&mut self, arm: ArmId, reward: f64, feedback: Option<f64>) -> Result<()> {
        match self.pending.take() {
            Some(p) if p == arm => {
                self.calls += 1;
                self.inner.observe(arm, reward, feedback)
            }
            Some(p) => {
                self.pending = Some(p);
                Err(Error::Protocol(format!(
                    "{}: outcome for arm {arm} delivered while arm {p} is pending",
                    self.inner.name()
                )))
            }
            None => Err(Error::Protocol(format!(
                "{}: observe called without a pending arm",
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

/// Parameters shared by the samplers and the reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionConfig {
    /// Samples per arm collected by the sampling stage.
    pub k: u64,
    /// Phase length.
    pub l: u64,
    /// Horizon.
    pub horizon: u64,
}

impl ReductionConfig {
    pub fn new(k: u64, l: u64, horizon: u64) -> Result<Self> {
        let c = Self { k, l, horizon };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::param("k", "must be at least 1"));
        }
        if self.l == 0 {
            return Err(Error::param("L", "must be at least 1"));
        }
        Ok(())
    }

    /// Length of the two-arm sampler: `max(k, L) + kL`.
    pub fn two_arm_rounds(&self) -> u64 {
        self.k.max(self.l) + self.k * self.l
    }

    /// Length of the m-arm sampling stage: `k + (m − 1)Lk`.
    pub fn m_arm_rounds(&self, m: usize) -> u64 {
        self.k + (m as u64 - 1) * self.l * self.k
    }
}

pub(crate) fn seed_of(rng: &RngStream) -> SeedRecord {
    SeedRecord {
        root: rng.root(),
        replicate: rng.key().replicate,
    }
}

/// Runs `algo` alone for `horizon` rounds, drawing outcomes from the
/// environment's dedicated stream. With the same seed this is the reference
/// run that the reduction's predictions are coupled to.
pub fn run_standalone<A: BanditAlgorithm + ?Sized>(
    algo: &mut A,
    env: &mut Environment,
    horizon: u64,
    seed: SeedRecord,
) -> Result<Transcript> {
    let mut t = Transcript::with_capacity(env.instance().clone(), seed, horizon as usize);
    let emits = algo.emits_predictions();
    let slot = Slot::new(Stage::Standalone, 0, Role::Fixed);
    for _ in 0..horizon {
        let arm = algo.next_arm()?;
        let pred = emits.then(|| algo.predict().unwrap_or(Prediction::Null));
        let out = env.pull_dedicated(arm)?;
        algo.observe(arm, out.reward, out.feedback)?;
        t.push(None, arm, out.reward, out.feedback, pred, slot);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(u32);

    impl BanditAlgorithm for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn num_arms(&self) -> usize {
            2
        }
        fn next_arm(&mut self) -> Result<ArmId> {
            Ok(ArmId::from_index(self.0 as usize))
        }
        fn observe(&mut self, _: ArmId, _: f64, _: Option<f64>) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn guard_rejects_double_next() {
        let mut g = Guarded::new(Fixed(0));
        g.next_arm().unwrap();
        assert!(matches!(g.next_arm(), Err(Error::Protocol(_))));
    }

    #[test]
    fn guard_rejects_unsolicited_observe() {
        let mut g = Guarded::new(Fixed(0));
        assert!(matches!(g.observe(ArmId::FIRST, 1.0, None), Err(Error::Protocol(_))));
        g.next_arm().unwrap();
        assert!(g.observe(ArmId::from_index(1), 1.0, None).is_err());
        assert!(g.observe(ArmId::FIRST, 1.0, None).is_ok());
        assert_eq!(g.observations(), 1);
    }

    #[test]
    fn guard_rejects_out_of_range_arm() {
        let mut g = Guarded::new(Fixed(7));
        assert!(matches!(g.next_arm(), Err(Error::Protocol(_))));
    }

    #[test]
    fn round_counts() {
        let c = ReductionConfig::new(2, 3, 100).unwrap();
        assert_eq!(c.two_arm_rounds(), 9);
        assert_eq!(c.m_arm_rounds(3), 14);
        assert!(ReductionConfig::new(0, 3, 10).is_err());
    }
}
