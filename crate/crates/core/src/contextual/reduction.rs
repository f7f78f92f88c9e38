use serde::{Deserialize, Serialize};

use super::{ContextualBanditAlgorithm, ContextualGuarded, ContextualPrior};
use crate::bic_core::reduction::lagged_prediction;
use crate::bic_core::sampler::random_subset;
use crate::bic_core::{seed_of, ReductionConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::model::{ArmId, Prediction, Role, SeedRecord, Slot, Stage, Transcript};
use crate::priors::Dataset;
use crate::rng::RngStream;

/// Shape of the contextual sampling stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextualLayout {
    /// `k` warm-up rounds of rank 1, then one phase of `kL` rounds for every
    /// rank `1..=m`: `c = mLk + k` rounds.
    #[default]
    Standard,
    /// Warm-up, then phases for ranks `2..=m` only: `c = k + (m − 1)Lk`,
    /// the multi-armed sampling stage when there is a single context.
    Compact,
}

impl ContextualLayout {
    fn first_rank(self) -> usize {
        match self {
            ContextualLayout::Standard => 1,
            ContextualLayout::Compact => 2,
        }
    }

    fn warmup_phase(self) -> u32 {
        match self {
            ContextualLayout::Standard => 0,
            ContextualLayout::Compact => 1,
        }
    }

    /// Length of the sampling stage.
    pub fn sampling_rounds(self, cfg: &ReductionConfig, m: usize) -> u64 {
        let phases = (m + 1 - self.first_rank()) as u64;
        cfg.k + phases * cfg.l * cfg.k
    }
}

/// Exploit arms per context, computed on first use within a phase.
struct ExploitCache(Vec<Option<ArmId>>);

impl ExploitCache {
    fn get(&mut self, prior: &ContextualPrior, data: &Dataset, x: u32) -> Result<ArmId> {
        if let Some(a) = self.0[x as usize] {
            return Ok(a);
        }
        let a = prior.prior().posterior_argmax_in(data, x)?;
        self.0[x as usize] = Some(a);
        Ok(a)
    }
}

/// Contextual black-box reduction. The sampling stage collects `k`
/// rank-samples of every arm-rank; then every phase of `L` agents has one
/// uniformly placed agent whose context goes to `algo` and whose outcome is
/// returned to it, while everyone else gets the posterior-best arm for her
/// own context.
pub fn run_contextual_reduction<A: ContextualBanditAlgorithm>(
    prior: &ContextualPrior,
    cfg: &ReductionConfig,
    layout: ContextualLayout,
    algo: A,
    env: &mut Environment,
    slots: &mut RngStream,
) -> Result<Transcript> {
    cfg.validate()?;
    let m = prior.num_arms();
    if env.num_arms() != m || algo.num_arms() != m {
        return Err(Error::ArmCount {
            expected: m.to_string(),
            actual: if env.num_arms() != m { env.num_arms() } else { algo.num_arms() },
        });
    }
    if env.context_space().len() != prior.contexts().len() {
        return Err(Error::param("contexts", "environment and prior disagree on the context space"));
    }
    let c = layout.sampling_rounds(cfg, m);
    if cfg.horizon < c {
        return Err(Error::param(
            "T",
            format!("horizon {} is shorter than the sampling stage ({c} rounds)", cfg.horizon),
        ));
    }
    let emits = algo.emits_predictions();
    let pred = emits.then_some(Prediction::Null);
    let mut t = Transcript::with_capacity(env.instance().clone(), seed_of(slots), cfg.horizon as usize);
    let mut data = prior.prior().empty_dataset();
    let ncx = prior.contexts().len();

    let warm = Slot::new(Stage::Sampling, layout.warmup_phase(), Role::Fixed);
    for _ in 0..cfg.k {
        let x = env.next_context();
        let a = prior.ranked_arm(x, 1)?;
        let out = env.pull_in(a, x)?;
        data.add_in(a, x, out.reward);
        t.push(Some(x), a, out.reward, out.feedback, pred, warm);
    }
    let phase_len = (cfg.l * cfg.k) as usize;
    for rank in layout.first_rank()..=m {
        let mut exploit = ExploitCache(vec![None; ncx]);
        let q = random_subset(slots, phase_len, cfg.k as usize);
        let mut explored = Vec::with_capacity(cfg.k as usize);
        for in_q in q {
            let x = env.next_context();
            let (a, role) = if in_q {
                (prior.ranked_arm(x, rank)?, Role::Explore)
            } else {
                (exploit.get(prior, &data, x)?, Role::Exploit)
            };
            let out = env.pull_in(a, x)?;
            if in_q {
                explored.push((a, x, out.reward));
            }
            t.push(Some(x), a, out.reward, out.feedback, pred, Slot::new(Stage::Sampling, rank as u32, role));
        }
        for (a, x, r) in explored {
            data.add_in(a, x, r);
        }
    }

    let mut algo = ContextualGuarded::new(algo);
    let l = cfg.l;
    let remaining = cfg.horizon - c;
    let full = remaining / l;
    let mut phis: Vec<Prediction> = Vec::with_capacity(full as usize);
    let mut buffer: Vec<(ArmId, u32, f64)> = Vec::with_capacity(l as usize);
    for n in 1..=full + 1 {
        let len = if n <= full { l } else { remaining - full * l };
        if len == 0 {
            break;
        }
        let mut exploit = ExploitCache(vec![None; ncx]);
        let dedicated = (n <= full).then(|| slots.index(l as usize) as u64);
        buffer.clear();
        for j in 0..len {
            let (x, a, out, role) = if dedicated == Some(j) {
                let x = env.next_dedicated_context();
                let a = algo.next_arm(x)?;
                if emits {
                    phis.push(algo.predict().unwrap_or(Prediction::Null));
                }
                let out = env.pull_dedicated_in(a, x)?;
                algo.observe(x, a, out.reward, out.feedback)?;
                (x, a, out, Role::Dedicated)
            } else {
                let x = env.next_context();
                let a = exploit.get(prior, &data, x)?;
                (x, a, env.pull_in(a, x)?, Role::Exploit)
            };
            let round = t.len() as u64 + 1;
            let p = emits.then(|| lagged_prediction(round, c, l, &phis));
            buffer.push((a, x, out.reward));
            t.push(Some(x), a, out.reward, out.feedback, p, Slot::new(Stage::Simulation, n as u32, role));
        }
        for &(a, x, r) in &buffer {
            data.add_in(a, x, r);
        }
    }
    Ok(t)
}

/// Runs a contextual algorithm alone on the dedicated stream: the reference
/// run the reduction's predictions are coupled to.
pub fn run_contextual_standalone<A: ContextualBanditAlgorithm + ?Sized>(
    algo: &mut A,
    env: &mut Environment,
    horizon: u64,
    seed: SeedRecord,
) -> Result<Transcript> {
    let mut t = Transcript::with_capacity(env.instance().clone(), seed, horizon as usize);
    let emits = algo.emits_predictions();
    let slot = Slot::new(Stage::Standalone, 0, Role::Fixed);
    for _ in 0..horizon {
        let x = env.next_dedicated_context();
        let a = algo.next_arm(x)?;
        let pred = emits.then(|| algo.predict().unwrap_or(Prediction::Null));
        let out = env.pull_dedicated_in(a, x)?;
        algo.observe(x, a, out.reward, out.feedback)?;
        t.push(Some(x), a, out.reward, out.feedback, pred, slot);
    }
    Ok(t)
}
