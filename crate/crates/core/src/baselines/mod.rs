//! Reference bandit algorithms to wrap with the reductions, and a registry
//! that builds them by name.

mod contextual;

pub use contextual::{make_contextual_algorithm, EpsilonGreedyPolicies, IgnoreContext};
pub use crate::env::{EnvStreams, Environment, Outcome};

use crate::bic_core::BanditAlgorithm;
use crate::error::{Error, Result};
use crate::model::{ArmId, Prediction};
use crate::rng::RngStream;

/// Per-arm running sums shared by the index algorithms.
#[derive(Debug, Clone)]
struct Tally {
    counts: Vec<u64>,
    sums: Vec<f64>,
}

impl Tally {
    fn new(m: usize) -> Self {
        Self {
            counts: vec![0; m],
            sums: vec![0.0; m],
        }
    }

    fn add(&mut self, arm: ArmId, r: f64) {
        self.counts[arm.index()] += 1;
        self.sums[arm.index()] += r;
    }

    fn mean(&self, a: usize) -> f64 {
        self.sums[a] / self.counts[a] as f64
    }

    fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn first_unplayed(&self) -> Option<ArmId> {
        self.counts.iter().position(|&c| c == 0).map(ArmId::from_index)
    }

    /// Highest empirical mean among played arms in `allowed`, ties to the
    /// lowest index; arm 1 when nothing has been played.
    fn leader(&self, allowed: impl Fn(usize) -> bool) -> ArmId {
        let mut best: Option<usize> = None;
        for a in 0..self.counts.len() {
            if self.counts[a] == 0 || !allowed(a) {
                continue;
            }
            if best.is_none_or(|b| self.mean(a) > self.mean(b)) {
                best = Some(a);
            }
        }
        ArmId::from_index(best.unwrap_or(0))
    }
}

/// UCB1: plays each arm once, then maximizes `mean + sqrt(2 ln t / n)`,
/// ties to the lowest index. Predicts the empirical-best arm.
#[derive(Debug, Clone)]
pub struct Ucb1 {
    tally: Tally,
}

impl Ucb1 {
    pub fn new(m: usize) -> Self {
        Self { tally: Tally::new(m) }
    }

    pub fn counts(&self) -> &[u64] {
        &self.tally.counts
    }
}

impl BanditAlgorithm for Ucb1 {
    fn name(&self) -> &str {
        "ucb1"
    }

    fn num_arms(&self) -> usize {
        self.tally.counts.len()
    }

    fn next_arm(&mut self) -> Result<ArmId> {
        if let Some(a) = self.tally.first_unplayed() {
            return Ok(a);
        }
        let ln_t = (self.tally.total() as f64).ln();
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for a in 0..self.tally.counts.len() {
            let idx = self.tally.mean(a) + (2.0 * ln_t / self.tally.counts[a] as f64).sqrt();
            if idx > best_index {
                best = a;
                best_index = idx;
            }
        }
        Ok(ArmId::from_index(best))
    }

    fn observe(&mut self, arm: ArmId, reward: f64, _: Option<f64>) -> Result<()> {
        self.tally.add(arm, reward);
        Ok(())
    }

    fn predict(&self) -> Option<Prediction> {
        Some(Prediction::Arm(self.tally.leader(|_| true)))
    }

    fn emits_predictions(&self) -> bool {
        true
    }
}

/// Active Arms Elimination fed one round at a time. Each phase recomputes the
/// active set `B = {i : μ̂* − μ̂_i ≤ sqrt(ln(Tθ)/n)}` and plays every active
/// arm once in index order; a lone survivor is played forever.
#[derive(Debug, Clone)]
pub struct ActiveArmsElimination {
    tally: Tally,
    active: Vec<bool>,
    queue: std::collections::VecDeque<ArmId>,
    log_t_theta: f64,
}

impl ActiveArmsElimination {
    pub fn new(m: usize, horizon: u64, theta: f64) -> Result<Self> {
        if !(theta >= 1.0) {
            return Err(Error::param("theta", "must be at least 1"));
        }
        if horizon == 0 || m == 0 {
            return Err(Error::param("horizon", "needs a positive horizon and at least one arm"));
        }
        Ok(Self {
            tally: Tally::new(m),
            active: vec![true; m],
            queue: Default::default(),
            log_t_theta: (horizon as f64 * theta).ln(),
        })
    }

    /// Starts from `samples[i]` rewards of each arm; every arm must have the
    /// same number of samples.
    pub fn with_samples(horizon: u64, theta: f64, samples: &[Vec<f64>]) -> Result<Self> {
        let mut s = Self::new(samples.len(), horizon, theta)?;
        let k = samples.first().map_or(0, Vec::len);
        if samples.iter().any(|v| v.len() != k) {
            return Err(Error::param("samples", "every arm needs the same number of samples"));
        }
        for (a, v) in samples.iter().enumerate() {
            for &r in v {
                s.tally.add(ArmId::from_index(a), r);
            }
        }
        Ok(s)
    }

    pub fn active(&self) -> Vec<ArmId> {
        (0..self.active.len())
            .filter(|&a| self.active[a])
            .map(ArmId::from_index)
            .collect()
    }

    fn start_phase(&mut self) {
        let active: Vec<usize> = (0..self.active.len()).filter(|&a| self.active[a]).collect();
        let n = active.iter().map(|&a| self.tally.counts[a]).min().unwrap_or(0);
        if n > 0 && active.len() > 1 {
            let radius = (self.log_t_theta / n as f64).sqrt();
            let best = active
                .iter()
                .map(|&a| self.tally.mean(a))
                .fold(f64::NEG_INFINITY, f64::max);
            for &a in &active {
                if best - self.tally.mean(a) > radius {
                    self.active[a] = false;
                }
            }
        }
        self.queue.extend(
            (0..self.active.len())
                .filter(|&a| self.active[a])
                .map(ArmId::from_index),
        );
    }
}

impl BanditAlgorithm for ActiveArmsElimination {
    fn name(&self) -> &str {
        "aae"
    }

    fn num_arms(&self) -> usize {
        self.active.len()
    }

    fn next_arm(&mut self) -> Result<ArmId> {
        if self.queue.is_empty() {
            self.start_phase();
        }
        Ok(*self.queue.front().expect("active set is never empty"))
    }

    fn observe(&mut self, arm: ArmId, reward: f64, _: Option<f64>) -> Result<()> {
        self.queue.pop_front();
        self.tally.add(arm, reward);
        Ok(())
    }

    fn predict(&self) -> Option<Prediction> {
        Some(Prediction::Arm(self.tally.leader(|a| self.active[a])))
    }

    fn emits_predictions(&self) -> bool {
        true
    }
}

/// Plays arms round-robin until each has `k` samples, then commits to the
/// empirical best.
#[derive(Debug, Clone)]
pub struct ExploreThenCommit {
    tally: Tally,
    k: u64,
}

impl ExploreThenCommit {
    pub fn new(m: usize, k: u64) -> Self {
        Self { tally: Tally::new(m), k }
    }
}

impl BanditAlgorithm for ExploreThenCommit {
    fn name(&self) -> &str {
        "etc"
    }

    fn num_arms(&self) -> usize {
        self.tally.counts.len()
    }

    fn next_arm(&mut self) -> Result<ArmId> {
        let m = self.tally.counts.len() as u64;
        let t = self.tally.total();
        if t < self.k * m {
            Ok(ArmId::from_index((t % m) as usize))
        } else {
            Ok(self.tally.leader(|_| true))
        }
    }

    fn observe(&mut self, arm: ArmId, reward: f64, _: Option<f64>) -> Result<()> {
        self.tally.add(arm, reward);
        Ok(())
    }

    fn predict(&self) -> Option<Prediction> {
        Some(Prediction::Arm(self.tally.leader(|_| true)))
    }

    fn emits_predictions(&self) -> bool {
        true
    }
}

/// Plays each arm once, then always the empirical best.
#[derive(Debug, Clone)]
pub struct Greedy {
    tally: Tally,
}

impl Greedy {
    pub fn new(m: usize) -> Self {
        Self { tally: Tally::new(m) }
    }
}

impl BanditAlgorithm for Greedy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn num_arms(&self) -> usize {
        self.tally.counts.len()
    }

    fn next_arm(&mut self) -> Result<ArmId> {
        Ok(self
            .tally
            .first_unplayed()
            .unwrap_or_else(|| self.tally.leader(|_| true)))
    }

    fn observe(&mut self, arm: ArmId, reward: f64, _: Option<f64>) -> Result<()> {
        self.tally.add(arm, reward);
        Ok(())
    }

    fn predict(&self) -> Option<Prediction> {
        Some(Prediction::Arm(self.tally.leader(|_| true)))
    }

    fn emits_predictions(&self) -> bool {
        true
    }
}

/// Always the same arm.
#[derive(Debug, Clone)]
pub struct Constant {
    m: usize,
    arm: ArmId,
}

impl Constant {
    pub fn new(m: usize, arm: ArmId) -> Result<Self> {
        if arm.index() >= m {
            return Err(Error::UnknownArm(arm.number()));
        }
        Ok(Self { m, arm })
    }
}

impl BanditAlgorithm for Constant {
    fn name(&self) -> &str {
        "constant"
    }

    fn num_arms(&self) -> usize {
        self.m
    }

    fn next_arm(&mut self) -> Result<ArmId> {
        Ok(self.arm)
    }

    fn observe(&mut self, _: ArmId, _: f64, _: Option<f64>) -> Result<()> {
        Ok(())
    }

    fn predict(&self) -> Option<Prediction> {
        Some(Prediction::Arm(self.arm))
    }

    fn emits_predictions(&self) -> bool {
        true
    }
}

/// Uniformly random arm every round.
#[derive(Debug)]
pub struct UniformRandom {
    m: usize,
    rng: RngStream,
}

impl UniformRandom {
    pub fn new(m: usize, rng: RngStream) -> Self {
        Self { m, rng }
    }
}

impl BanditAlgorithm for UniformRandom {
    fn name(&self) -> &str {
        "uniform"
    }

    fn num_arms(&self) -> usize {
        self.m
    }

    fn next_arm(&mut self) -> Result<ArmId> {
        Ok(ArmId::from_index(self.rng.index(self.m)))
    }

    fn observe(&mut self, _: ArmId, _: f64, _: Option<f64>) -> Result<()> {
        Ok(())
    }
}

/// Names accepted by [`make_algorithm`].
pub const ALGORITHM_NAMES: &[&str] = &["ucb1", "greedy", "uniform", "constant[:ARM]", "etc:K", "aae[:THETA]"];

/// Builds an algorithm by name. `rng` is the algorithm's private stream.
pub fn make_algorithm(name: &str, m: usize, horizon: u64, rng: RngStream) -> Result<Box<dyn BanditAlgorithm>> {
    let (base, arg) = match name.split_once(':') {
        Some((b, a)) => (b, Some(a)),
        None => (name, None),
    };
    let bad = || Error::UnknownAlgorithm(name.to_string());
    let num = |a: Option<&str>| -> Result<Option<f64>> {
        a.map(|s| s.parse::<f64>().map_err(|_| bad())).transpose()
    };
    Ok(match base {
        "ucb1" if arg.is_none() => Box::new(Ucb1::new(m)),
        "greedy" if arg.is_none() => Box::new(Greedy::new(m)),
        "uniform" if arg.is_none() => Box::new(UniformRandom::new(m, rng)),
        "constant" => {
            let arm = num(arg)?.unwrap_or(1.0);
            Box::new(Constant::new(m, ArmId::from_number(arm as u32)?)?)
        }
        "etc" => {
            let k = num(arg)?.ok_or_else(bad)?;
            Box::new(ExploreThenCommit::new(m, k as u64))
        }
        "aae" => {
            let theta = num(arg)?.unwrap_or(1.0);
            Box::new(ActiveArmsElimination::new(m, horizon, theta)?)
        }
        _ => return Err(bad()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bic_core::{run_standalone, Guarded};
    use crate::model::{MabInstance, RewardFamily, SeedRecord};

    fn play(algo: &mut dyn BanditAlgorithm, rewards: &[(usize, f64)]) {
        for &(a, r) in rewards {
            let arm = algo.next_arm().unwrap();
            assert_eq!(arm.index(), a);
            algo.observe(arm, r, None).unwrap();
        }
    }

    #[test]
    fn ucb1_third_round_after_one_zero() {
        let mut u = Ucb1::new(2);
        play(&mut u, &[(0, 1.0), (1, 0.0)]);
        assert_eq!(u.next_arm().unwrap(), ArmId::FIRST);
    }

    #[test]
    fn ucb1_ties_go_to_lowest_index() {
        let mut u = Ucb1::new(3);
        play(&mut u, &[(0, 0.5), (1, 0.5), (2, 0.5), (0, 0.5), (1, 0.5), (2, 0.5)]);
    }

    #[test]
    fn ucb1_rarely_plays_bad_arm() {
        let inst = MabInstance::new(vec![0.9, 0.1]).unwrap();
        let mut env = Environment::simple(inst, vec![RewardFamily::PointMass; 2], 1, 0).unwrap();
        let mut u = Ucb1::new(2);
        run_standalone(&mut u, &mut env, 1000, SeedRecord { root: 1, replicate: 0 }).unwrap();
        assert!(u.counts()[1] < 100, "{:?}", u.counts());
    }

    #[test]
    fn aae_eliminates_at_first_crossing() {
        // ln(1000·1) = 6.91; radius sqrt(6.91/n) < 0.8 first at n = 11.
        let inst = MabInstance::new(vec![0.9, 0.1]).unwrap();
        let mut env = Environment::simple(inst, vec![RewardFamily::PointMass; 2], 1, 0).unwrap();
        let mut a = ActiveArmsElimination::new(2, 1000, 1.0).unwrap();
        let t = run_standalone(&mut a, &mut env, 100, SeedRecord { root: 1, replicate: 0 }).unwrap();
        let last_arm2 = t.rows().iter().rposition(|r| r.recommendation.index() == 1).unwrap();
        assert_eq!(last_arm2, 2 * 11 - 1);
        assert_eq!(a.active(), vec![ArmId::FIRST]);
    }

    #[test]
    fn aae_zero_gap_never_eliminates() {
        let inst = MabInstance::new(vec![0.5, 0.5]).unwrap();
        let mut env = Environment::simple(inst, vec![RewardFamily::PointMass; 2], 1, 0).unwrap();
        let mut a = ActiveArmsElimination::new(2, 1000, 1.0).unwrap();
        run_standalone(&mut a, &mut env, 1000, SeedRecord { root: 1, replicate: 0 }).unwrap();
        assert_eq!(a.active().len(), 2);
    }

    #[test]
    fn every_baseline_honors_the_protocol() {
        let inst = MabInstance::new(vec![0.6, 0.5, 0.2]).unwrap();
        for name in ["ucb1", "greedy", "uniform", "constant:2", "etc:5", "aae:10"] {
            let algo = make_algorithm(name, 3, 500, RngStream::new(1, 0, "algo", 0)).unwrap();
            let mut g = Guarded::new(algo);
            let mut env = Environment::simple(inst.clone(), vec![RewardFamily::Bernoulli; 3], 1, 0).unwrap();
            run_standalone(&mut g, &mut env, 500, SeedRecord { root: 1, replicate: 0 }).unwrap();
            assert_eq!(g.observations(), 500, "{name}");
        }
    }

    #[test]
    fn registry_rejects_unknown_names() {
        for bad in ["thompson", "etc", "ucb1:3", "constant:x"] {
            assert!(make_algorithm(bad, 2, 10, RngStream::new(1, 0, "algo", 0)).is_err(), "{bad}");
        }
    }

    #[test]
    fn etc_commits_to_best() {
        let mut e = ExploreThenCommit::new(2, 2);
        play(&mut e, &[(0, 0.0), (1, 1.0), (0, 0.0), (1, 1.0)]);
        assert_eq!(e.next_arm().unwrap().index(), 1);
    }
}
