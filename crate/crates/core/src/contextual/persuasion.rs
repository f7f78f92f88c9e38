use serde::{Deserialize, Serialize};

use super::ContextualPrior;
use crate::error::{Error, Result};
use crate::priors::constants::{chunked, tau_grid, McOptions, PersuasionConstants, PersuasionProfile, ProfileEntry};
use crate::rng::RngStream;
use crate::stats::ceil_tol;

/// Persuasion constants for a contextual prior together with the phase
/// length they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualPersuasion {
    pub constants: PersuasionConstants,
    /// `1 + max over contexts and arm pairs of (μ⁰_{a,x} − μ⁰_{a',x}) / (τ ρ)`.
    pub l_p: u64,
    pub profile: PersuasionProfile,
}

fn competitors(i: u32, m: u32) -> Vec<u32> {
    let mut js = vec![i - 1];
    if m != i && m != i - 1 {
        js.push(m);
    }
    js
}

/// Estimates `Pr[X > τ]` over the τ grid for every rank `i ≥ 2` and
/// competitor `j ∈ {i − 1, m}`, where `X` is the posterior advantage of the
/// rank-`i` arm over the rank-`j` arm for a fresh agent context, after `k`
/// rank-samples of each rank below `i`.
pub fn estimate_contextual_persuasion(prior: &ContextualPrior, k: u64, opts: McOptions) -> Result<ContextualPersuasion> {
    opts.validate(1000)?;
    if k == 0 {
        return Err(Error::param("k", "must be at least 1"));
    }
    let m = prior.num_arms() as u32;
    if m < 2 {
        return Err(Error::ArmCount {
            expected: "at least 2".into(),
            actual: m as usize,
        });
    }
    let taus = tau_grid();
    let fresh = || -> Vec<ProfileEntry> {
        (2..=m)
            .flat_map(|i| {
                competitors(i, m)
                    .into_iter()
                    .map(move |j| (i, j))
            })
            .map(|(i, j)| ProfileEntry::new(i, i - 1, Some(j), taus.len()))
            .collect()
    };
    let model = prior.prior();
    let space = prior.contexts();
    let entries = chunked(
        opts.replicates,
        |lo, hi| {
            let mut entries = fresh();
            for r in lo..hi {
                let mut rng = RngStream::new(opts.seed, r, "ctx-persuasion", k);
                let mu = model.sample_instance(&mut rng)?;
                let mut data = model.empty_dataset();
                for rank in 1..=m {
                    if rank >= 2 {
                        let x = space.draw(&mut rng);
                        let post = model.posterior_means_in(&data, x)?;
                        let ranking = prior.ranking(x)?;
                        let own = post[ranking[rank as usize - 1].index()];
                        for e in entries.iter_mut().filter(|e| e.arm == rank) {
                            let j = e.competitor.expect("contextual entries name a competitor");
                            e.record(own - post[ranking[j as usize - 1].index()], &taus);
                        }
                    }
                    if rank == m {
                        break;
                    }
                    for _ in 0..k {
                        let x = space.draw(&mut rng);
                        let a = prior.ranked_arm(x, rank as usize)?;
                        let r = model.family_in(a, x).draw(mu.mean_in(a, x), &mut rng)?;
                        data.add_in(a, x, r);
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
    let profile = PersuasionProfile {
        k,
        taus,
        entries,
        replicates: opts.replicates,
        confidence: opts.confidence,
    };
    let constants = profile.constants()?;
    let scale = constants.tau_p * constants.rho_p;
    if scale <= 1e-12 {
        return Err(Error::PriorNotPersuadable(format!("τρ = {scale:.3e} is too small")));
    }
    let mut spread: f64 = 0.0;
    for x in 0..space.len() as u32 {
        let means: Vec<f64> = (0..m as usize)
            .map(|a| model.prior_mean_in(crate::model::ArmId::from_index(a), x))
            .collect();
        let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
        spread = spread.max(hi - lo);
    }
    let l_p = ceil_tol(1.0 + spread / scale) as u64;
    Ok(ContextualPersuasion {
        constants,
        l_p,
        profile,
    })
}
