use serde::{Deserialize, Serialize};

use super::checked_pull;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::model::{ArmId, Role, SeedRecord, Slot, Stage, Transcript};

/// Parameters of the racing stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaceConfig {
    pub theta: f64,
    /// Total horizon `T` entering `ln(Tθ)`.
    pub horizon: u64,
    /// Rounds available to the race itself.
    pub rounds: u64,
}

impl RaceConfig {
    pub fn new(theta: f64, horizon: u64, rounds: u64) -> Result<Self> {
        if !(theta >= 1.0) {
            return Err(Error::param("theta", format!("must be at least 1, got {theta}")));
        }
        if horizon == 0 {
            return Err(Error::param("T", "must be positive"));
        }
        Ok(Self { theta, horizon, rounds })
    }

    /// `c_n = sqrt(ln(Tθ) / n)`.
    pub fn radius(&self, n: u64) -> f64 {
        ((self.horizon as f64 * self.theta).ln() / n as f64).sqrt()
    }
}

/// Active set and running sample sums of a race.
#[derive(Debug, Clone, PartialEq)]
pub struct RaceState {
    active: Vec<bool>,
    sums: Vec<f64>,
    /// Samples per active arm.
    n: u64,
}

impl RaceState {
    /// Starts from `k` samples of every arm.
    pub fn new(samples: &[Vec<f64>]) -> Result<Self> {
        let k = samples.first().map_or(0, Vec::len);
        if samples.len() < 2 || k == 0 || samples.iter().any(|s| s.len() != k) {
            return Err(Error::param("samples", "need the same positive number of samples for at least two arms"));
        }
        Ok(Self {
            active: vec![true; samples.len()],
            sums: samples.iter().map(|s| s.iter().sum()).collect(),
            n: k as u64,
        })
    }

    pub fn phase(&self) -> u64 {
        self.n
    }

    pub fn active(&self) -> Vec<ArmId> {
        (0..self.active.len())
            .filter(|&a| self.active[a])
            .map(ArmId::from_index)
            .collect()
    }

    pub fn is_active(&self, arm: ArmId) -> bool {
        self.active[arm.index()]
    }

    pub fn mean(&self, arm: ArmId) -> f64 {
        self.sums[arm.index()] / self.n as f64
    }

    /// Active arm with the highest average, ties to the lowest index.
    pub fn leader(&self) -> ArmId {
        let mut best: Option<ArmId> = None;
        for a in self.active() {
            if best.is_none_or(|b| self.mean(a) > self.mean(b)) {
                best = Some(a);
            }
        }
        best.expect("active set is never empty")
    }

    /// Drops every arm trailing the leader by more than `radius`.
    pub fn eliminate(&mut self, radius: f64) {
        let top = self.mean(self.leader());
        for a in self.active() {
            if top - self.mean(a) > radius {
                self.active[a.index()] = false;
            }
        }
    }

    fn record(&mut self, arm: ArmId, reward: f64) {
        self.sums[arm.index()] += reward;
    }
}

/// A race transcript with the final state.
#[derive(Debug, Clone)]
pub struct RaceOutput {
    pub transcript: Transcript,
    pub state: RaceState,
    /// The lone survivor, or the leader if the race hit the horizon first.
    pub committed: ArmId,
}

/// Racing stage for `m` arms: phases start at `n = k`; each phase drops arms
/// trailing the leader by more than `c_n`, then recommends every remaining
/// arm once in index order. Once one arm remains it is recommended for every
/// remaining round. Eliminated arms are never pulled again.
pub fn run_df_race_m(samples: &[Vec<f64>], cfg: &RaceConfig, env: &mut Environment, seed: SeedRecord) -> Result<RaceOutput> {
    let mut t = Transcript::with_capacity(env.instance().clone(), seed, cfg.rounds as usize);
    let state = race_into(samples, cfg, env, &mut t)?;
    let committed = state.leader();
    Ok(RaceOutput {
        transcript: t,
        state,
        committed,
    })
}

/// Two-arm race: phases of two rounds while `|μ̂₁ − μ̂₂| ≤ c_n`, then the
/// leader for the rest of the horizon.
pub fn run_df_two_arm_race(samples: &[Vec<f64>], cfg: &RaceConfig, env: &mut Environment, seed: SeedRecord) -> Result<RaceOutput> {
    if samples.len() != 2 {
        return Err(Error::ArmCount {
            expected: "2".into(),
            actual: samples.len(),
        });
    }
    run_df_race_m(samples, cfg, env, seed)
}

pub(crate) fn race_into(samples: &[Vec<f64>], cfg: &RaceConfig, env: &mut Environment, t: &mut Transcript) -> Result<RaceState> {
    if samples.len() != env.num_arms() {
        return Err(Error::ArmCount {
            expected: env.num_arms().to_string(),
            actual: samples.len(),
        });
    }
    let mut state = RaceState::new(samples)?;
    let mut left = cfg.rounds;
    while left > 0 {
        state.eliminate(cfg.radius(state.n));
        let active = state.active();
        if active.len() == 1 {
            let a = active[0];
            for _ in 0..left {
                let out = checked_pull(env, a)?;
                t.push(None, a, out.reward, out.feedback, None, Slot::new(Stage::Commit, 0, Role::Exploit));
            }
            break;
        }
        let phase = state.n as u32;
        for &a in active.iter().take(left as usize) {
            let out = checked_pull(env, a)?;
            state.record(a, out.reward);
            t.push(None, a, out.reward, out.feedback, None, Slot::new(Stage::Racing, phase, Role::Race));
        }
        left -= (active.len() as u64).min(left);
        state.n += 1;
    }
    Ok(state)
}
