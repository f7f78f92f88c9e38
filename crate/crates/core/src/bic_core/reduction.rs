use super::sampler::m_arm_sampler_into;
use super::{seed_of, BanditAlgorithm, Guarded, ReductionConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::model::{ArmId, Prediction, Role, Slot, Stage, Transcript};
use crate::priors::{Dataset, PriorModel};
use crate::rng::RngStream;

/// Prediction recorded at simulation round `t` (1-based, absolute) given the
/// sampling-stage length `c`, phase length `l` and the predictions `phis`
/// made at the start of each phase so far.
pub(crate) fn lagged_prediction(t: u64, c: u64, l: u64, phis: &[Prediction]) -> Prediction {
    let s = (t - c) / l;
    if s == 0 {
        Prediction::Null
    } else {
        phis[s as usize - 1]
    }
}

/// Black-box reduction: the m-arm sampling stage followed by the simulation
/// stage driven by `algo`, for `cfg.horizon` rounds in total.
///
/// In each simulation phase of `L` rounds the exploit arm is the posterior
/// best given all samples so far; one uniformly chosen agent instead gets the
/// arm chosen by `algo`, and only that agent's outcome is returned to
/// `algo`. A trailing partial phase is exploit-only.
pub fn run_black_box_reduction<A: BanditAlgorithm>(
    prior: &PriorModel,
    cfg: &ReductionConfig,
    algo: A,
    env: &mut Environment,
    slots: &mut RngStream,
) -> Result<Transcript> {
    cfg.validate()?;
    let m = prior.num_arms();
    let c = cfg.m_arm_rounds(m);
    if cfg.horizon < c {
        return Err(Error::param(
            "T",
            format!("horizon {} is shorter than the sampling stage ({c} rounds)", cfg.horizon),
        ));
    }
    let emits = algo.emits_predictions();
    let pred = emits.then_some(Prediction::Null);
    let mut t = Transcript::with_capacity(env.instance().clone(), seed_of(slots), cfg.horizon as usize);
    let samples = m_arm_sampler_into(prior, cfg, env, slots, &mut t, pred)?;
    simulate_into(prior, cfg, algo, env, slots, &mut t, samples)?;
    Ok(t)
}

/// Simulation stage only, starting from externally collected samples.
pub fn run_reduction_with_samples<A: BanditAlgorithm>(
    prior: &PriorModel,
    cfg: &ReductionConfig,
    algo: A,
    samples: Dataset,
    env: &mut Environment,
    slots: &mut RngStream,
) -> Result<Transcript> {
    cfg.validate()?;
    let mut t = Transcript::with_capacity(env.instance().clone(), seed_of(slots), cfg.horizon as usize);
    simulate_into(prior, cfg, algo, env, slots, &mut t, samples)?;
    Ok(t)
}

fn simulate_into<A: BanditAlgorithm>(
    prior: &PriorModel,
    cfg: &ReductionConfig,
    algo: A,
    env: &mut Environment,
    slots: &mut RngStream,
    t: &mut Transcript,
    mut data: Dataset,
) -> Result<()> {
    if algo.num_arms() != prior.num_arms() {
        return Err(Error::ArmCount {
            expected: prior.num_arms().to_string(),
            actual: algo.num_arms(),
        });
    }
    let mut algo = Guarded::new(algo);
    let emits = algo.emits_predictions();
    let c = t.len() as u64;
    let l = cfg.l;
    let remaining = cfg.horizon.saturating_sub(c);
    let full = remaining / l;
    let mut phis: Vec<Prediction> = Vec::with_capacity(full as usize);
    let mut buffer: Vec<(ArmId, f64)> = Vec::with_capacity(l as usize);
    for n in 1..=full + 1 {
        let len = if n <= full { l } else { remaining - full * l };
        if len == 0 {
            break;
        }
        let exploit = prior.posterior_argmax(&data)?;
        let dedicated = if n <= full {
            let arm = algo.next_arm()?;
            if emits {
                phis.push(algo.predict().unwrap_or(Prediction::Null));
            }
            Some((arm, slots.index(l as usize) as u64))
        } else {
            None
        };
        buffer.clear();
        for j in 0..len {
            let round = t.len() as u64 + 1;
            let pred = emits.then(|| lagged_prediction(round, c, l, &phis));
            let (arm, out, role) = match dedicated {
                Some((arm, pos)) if pos == j => {
                    let out = env.pull_dedicated(arm)?;
                    algo.observe(arm, out.reward, out.feedback)?;
                    (arm, out, Role::Dedicated)
                }
                _ => (exploit, env.pull(exploit)?, Role::Exploit),
            };
            buffer.push((arm, out.reward));
            t.push(None, arm, out.reward, out.feedback, pred, Slot::new(Stage::Simulation, n as u32, role));
        }
        for &(arm, r) in &buffer {
            data.add(arm, r);
        }
    }
    Ok(())
}
