//! Declarative algorithm descriptions and the per-replicate pipeline.
//!
//! Every replicate `r` under root seed `s` draws its instance from stream
//! `(s, r, "instance")`, rewards from `"nature"` and `"dedicated"`, contexts
//! from `"contexts"`, phase placements from `"slots"` and algorithm coin
//! flips from `"algo"`, so any replicate can be rerun in isolation.

use serde::{Deserialize, Serialize};

use crate::baselines::{make_algorithm, make_contextual_algorithm};
use crate::bic_core::{run_black_box_reduction, run_m_arm_sampler, run_standalone, run_two_arm_sampler, ReductionConfig};
use crate::contextual::{
    run_contextual_reduction, run_contextual_standalone, ContextualLayout, ContextualPrior, Policy, PolicyClass,
};
use crate::detail_free::{
    race_into, run_detail_free, run_df_two_arm_sampling, DetailFreeConfig, DfSamplingConfig, RaceConfig,
};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::model::{ArmId, SeedRecord, Transcript};
use crate::priors::config::LoadedPrior;
use crate::rng::RngStream;

fn half() -> f64 {
    0.5
}

/// An algorithm and its parameters. Sampler-only kinds produce just their
/// own rounds; every other kind runs for the full horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    TwoArmSampler {
        k: u64,
        #[serde(rename = "L")]
        l: u64,
    },
    MArmSampler {
        k: u64,
        #[serde(rename = "L")]
        l: u64,
    },
    Reduction {
        k: u64,
        #[serde(rename = "L")]
        l: u64,
        wrapped: String,
    },
    Standalone {
        wrapped: String,
    },
    DetailFree {
        mu_hat: f64,
        #[serde(rename = "N")]
        n: u64,
        #[serde(default = "half")]
        tau: f64,
        theta: Option<f64>,
    },
    DfTwoArm {
        k: u64,
        k_star: u64,
        #[serde(rename = "L")]
        l: u64,
        #[serde(rename = "C")]
        c: f64,
        theta: f64,
    },
    Contextual {
        k: u64,
        #[serde(rename = "L")]
        l: u64,
        wrapped: String,
        #[serde(default)]
        layout: ContextualLayout,
    },
    ContextualStandalone {
        wrapped: String,
    },
}

impl AlgorithmSpec {
    /// Length of the stage before the wrapped algorithm takes over, for the
    /// reductions.
    pub fn sampling_rounds(&self, m: usize) -> Option<u64> {
        match *self {
            AlgorithmSpec::Reduction { k, l, .. } => Some(k + (m as u64 - 1) * l * k),
            AlgorithmSpec::Contextual { k, l, layout, .. } => {
                ReductionConfig::new(k, l, 0).ok().map(|c| layout.sampling_rounds(&c, m))
            }
            _ => None,
        }
    }
}

/// Policy class given by name (`"all"`, `"constant"`) or as explicit
/// context → arm tables with one-based arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Named(String),
    Tables(Vec<Vec<u32>>),
}

impl PolicySpec {
    pub fn build(&self, arms: usize, contexts: usize) -> Result<PolicyClass> {
        match self {
            PolicySpec::Named(n) if n == "all" => PolicyClass::all(arms, contexts),
            PolicySpec::Named(n) if n == "constant" => PolicyClass::constant(arms, contexts),
            PolicySpec::Named(n) => Err(Error::config("policies", format!("unknown policy class `{n}`"))),
            PolicySpec::Tables(rows) => {
                let policies = rows
                    .iter()
                    .map(|r| r.iter().map(|&a| ArmId::from_number(a)).collect::<Result<Vec<_>>>().map(Policy))
                    .collect::<Result<Vec<_>>>()?;
                PolicyClass::new(policies, arms, contexts)
            }
        }
    }
}

/// A prior with its context space and the policy class used for contextual
/// learners and regret.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub prior: ContextualPrior,
    pub policies: PolicyClass,
}

impl Scenario {
    pub fn new(loaded: LoadedPrior, policies: Option<&PolicySpec>) -> Result<Self> {
        let prior = ContextualPrior::from_loaded(loaded)?;
        let (m, n) = (prior.num_arms(), prior.contexts().len());
        let policies = match policies {
            Some(p) => p.build(m, n)?,
            None => PolicyClass::all(m, n).or_else(|_| PolicyClass::constant(m, n))?,
        };
        Ok(Self { prior, policies })
    }

    pub fn environment(&self, root: u64, replicate: u64) -> Result<Environment> {
        Environment::for_replicate(
            self.prior.prior(),
            self.prior.contexts().clone(),
            self.prior.feedback(),
            root,
            replicate,
        )
    }
}

/// Runs replicate `replicate` of `spec` under root seed `root`.
pub fn run_replicate(spec: &AlgorithmSpec, sc: &Scenario, horizon: u64, root: u64, replicate: u64) -> Result<Transcript> {
    let prior = sc.prior.prior();
    let m = prior.num_arms();
    let mut env = sc.environment(root, replicate)?;
    let mut slots = RngStream::new(root, replicate, "slots", 0);
    let algo_rng = RngStream::new(root, replicate, "algo", 0);
    let seed = SeedRecord { root, replicate };
    match spec {
        AlgorithmSpec::TwoArmSampler { k, l } => {
            let cfg = ReductionConfig::new(*k, *l, horizon)?;
            Ok(run_two_arm_sampler(prior, &cfg, &mut env, &mut slots)?.transcript)
        }
        AlgorithmSpec::MArmSampler { k, l } => {
            let cfg = ReductionConfig::new(*k, *l, horizon)?;
            Ok(run_m_arm_sampler(prior, &cfg, &mut env, &mut slots)?.transcript)
        }
        AlgorithmSpec::Reduction { k, l, wrapped } => {
            let cfg = ReductionConfig::new(*k, *l, horizon)?;
            let algo = make_algorithm(wrapped, m, horizon, algo_rng)?;
            run_black_box_reduction(prior, &cfg, algo, &mut env, &mut slots)
        }
        AlgorithmSpec::Standalone { wrapped } => {
            let mut algo = make_algorithm(wrapped, m, horizon, algo_rng)?;
            run_standalone(&mut algo, &mut env, horizon, seed)
        }
        AlgorithmSpec::DetailFree { mu_hat, n, tau, theta } => {
            let cfg = DetailFreeConfig {
                mu_hat: *mu_hat,
                n: *n,
                horizon,
                tau: *tau,
                theta: *theta,
            };
            run_detail_free(&cfg, prior.prior_means(), &mut env, &mut slots)
        }
        AlgorithmSpec::DfTwoArm { k, k_star, l, c, theta } => {
            let scfg = DfSamplingConfig::new(*k, *l, *c)?.with_k_star(*k_star);
            let len = scfg.two_arm_rounds();
            if horizon < len {
                return Err(Error::param("T", format!("horizon {horizon} is shorter than the sampling stage ({len} rounds)")));
            }
            let out = run_df_two_arm_sampling(prior.prior_means(), &scfg, &mut env, &mut slots)?;
            let mut samples = out.samples;
            samples[0].truncate(*k as usize);
            let mut t = out.transcript;
            race_into(&samples, &RaceConfig::new(*theta, horizon, horizon - len)?, &mut env, &mut t)?;
            Ok(t)
        }
        AlgorithmSpec::Contextual { k, l, wrapped, layout } => {
            let cfg = ReductionConfig::new(*k, *l, horizon)?;
            let algo = make_contextual_algorithm(wrapped, &sc.policies, horizon, algo_rng)?;
            run_contextual_reduction(&sc.prior, &cfg, *layout, algo, &mut env, &mut slots)
        }
        AlgorithmSpec::ContextualStandalone { wrapped } => {
            let mut algo = make_contextual_algorithm(wrapped, &sc.policies, horizon, algo_rng)?;
            run_contextual_standalone(&mut algo, &mut env, horizon, seed)
        }
    }
}
