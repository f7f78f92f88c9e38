//! Core domain types shared by every algorithm: arms, instances, reward
//! families, prediction tokens and the per-round transcript.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// An arm. Stored zero-based, displayed and serialized one-based; arm 1 has
/// the highest prior mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArmId(u32);

impl ArmId {
    pub const FIRST: ArmId = ArmId(0);

    pub fn from_index(index: usize) -> Self {
        ArmId(index as u32)
    }

    /// Builds an arm from its one-based number.
    pub fn from_number(number: u32) -> Result<Self> {
        if number == 0 {
            return Err(Error::UnknownArm(0));
        }
        Ok(ArmId(number - 1))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn number(self) -> u32 {
        self.0 + 1
    }
}

impl fmt::Display for ArmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for ArmId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u32(self.number())
    }
}

impl<'de> Deserialize<'de> for ArmId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let n = u32::deserialize(d)?;
        ArmId::from_number(n).map_err(serde::de::Error::custom)
    }
}

/// The realized mean rewards of one replicate. Contextual instances store an
/// arm-by-context matrix; plain instances have a single context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MabInstance {
    arms: usize,
    contexts: usize,
    /// Row-major by context: `means[x * arms + a]`.
    means: Vec<f64>,
}

impl MabInstance {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        let arms = means.len();
        Self::contextual(arms, 1, means)
    }

    pub fn contextual(arms: usize, contexts: usize, means: Vec<f64>) -> Result<Self> {
        if arms == 0 || contexts == 0 {
            return Err(Error::param("means", "instance needs at least one arm and context"));
        }
        if means.len() != arms * contexts {
            return Err(Error::param(
                "means",
                format!("expected {} entries, got {}", arms * contexts, means.len()),
            ));
        }
        if let Some(bad) = means.iter().find(|m| !m.is_finite()) {
            return Err(Error::param("means", format!("non-finite mean {bad}")));
        }
        Ok(Self {
            arms,
            contexts,
            means,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.arms
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn mean(&self, arm: ArmId) -> f64 {
        self.means[arm.index()]
    }

    pub fn mean_in(&self, arm: ArmId, context: u32) -> f64 {
        self.means[context as usize * self.arms + arm.index()]
    }

    /// `μ*` for the given context.
    pub fn best_mean_in(&self, context: u32) -> f64 {
        let row = &self.means[context as usize * self.arms..(context as usize + 1) * self.arms];
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn best_mean(&self) -> f64 {
        self.best_mean_in(0)
    }

    /// Best arm for a context, ties to the lowest index.
    pub fn best_arm_in(&self, context: u32) -> ArmId {
        let base = context as usize * self.arms;
        let mut best = 0;
        for a in 1..self.arms {
            if self.means[base + a] > self.means[base + best] {
                best = a;
            }
        }
        ArmId::from_index(best)
    }

    /// Difference between the best and the second-best distinct mean
    /// (context 0). Zero when every arm has the same mean.
    pub fn gap(&self) -> f64 {
        let best = self.best_mean();
        let second = self.means[..self.arms]
            .iter()
            .copied()
            .filter(|&m| m < best)
            .fold(f64::NEG_INFINITY, f64::max);
        if second.is_finite() {
            best - second
        } else {
            0.0
        }
    }

    pub fn in_unit_interval(&self) -> bool {
        self.means.iter().all(|m| (0.0..=1.0).contains(m))
    }
}

/// A finite context space with a categorical arrival distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSpace {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ContextSpace {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::param("contexts", "context space must be nonempty"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param("contexts", "probabilities must be nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(
                "contexts",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { probs, cumulative })
    }

    pub fn single() -> Self {
        Self {
            probs: vec![1.0],
            cumulative: vec![1.0],
        }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("contexts", "context space must be nonempty"));
        }
        Self::new(vec![1.0 / n as f64; n]).or_else(|_| {
            let mut p = vec![1.0 / n as f64; n];
            let rest: f64 = p[..n - 1].iter().sum();
            p[n - 1] = 1.0 - rest;
            Self::new(p)
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn check(&self, context: u32) -> Result<()> {
        if (context as usize) < self.probs.len() {
            Ok(())
        } else {
            Err(Error::UnknownContext(context))
        }
    }

    /// Draws a context. A single-context space consumes no randomness.
    pub fn draw(&self, rng: &mut RngStream) -> u32 {
        if self.probs.len() == 1 {
            return 0;
        }
        let u = rng.uniform() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.probs.len() - 1) as u32
    }
}

/// Single-parameter reward family `D(μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardFamily {
    Bernoulli,
    Gaussian { noise_var: f64 },
    PointMass,
}

impl RewardFamily {
    pub fn name(&self) -> &'static str {
        match self {
            RewardFamily::Bernoulli => "bernoulli",
            RewardFamily::Gaussian { .. } => "gaussian",
            RewardFamily::PointMass => "point_mass",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardFamily::Gaussian { noise_var } if !(noise_var > 0.0 && noise_var.is_finite()) => {
                Err(Error::param("noise_var", "Gaussian noise variance must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn check_mean(&self, mean: f64) -> Result<()> {
        if !mean.is_finite() || (*self == RewardFamily::Bernoulli && !(0.0..=1.0).contains(&mean))
        {
            return Err(Error::MeanOutOfRange {
                family: self.name(),
                mean,
            });
        }
        Ok(())
    }

    pub fn check_reward(&self, reward: f64) -> Result<()> {
        let ok = match self {
            RewardFamily::Bernoulli => reward == 0.0 || reward == 1.0,
            _ => reward.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::RewardOutOfSupport {
                family: self.name(),
                reward,
            })
        }
    }

    /// True when every reward lies in `[0, 1]` for means in `[0, 1]`.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, RewardFamily::Gaussian { .. })
    }

    /// Draws one reward with mean `mean`.
    pub fn draw(&self, mean: f64, rng: &mut RngStream) -> Result<f64> {
        self.check_mean(mean)?;
        Ok(match *self {
            RewardFamily::Bernoulli => {
                if rng.uniform() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardFamily::Gaussian { noise_var } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + noise_var.sqrt() * z
            }
            RewardFamily::PointMass => mean,
        })
    }
}

/// Auxiliary feedback family `D_fb(μ)`; the token is forwarded untouched.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackFamily {
    #[default]
    None,
    /// A second noisy observation of the mean.
    NoisyMean { noise_var: f64 },
}

impl FeedbackFamily {
    pub fn draw(&self, mean: f64, rng: &mut RngStream) -> Option<f64> {
        match *self {
            FeedbackFamily::None => None,
            FeedbackFamily::NoisyMean { noise_var } => {
                let z: f64 = rng.sample(StandardNormal);
                Some(mean + noise_var.sqrt() * z)
            }
        }
    }
}

/// Prediction token emitted by a wrapped algorithm. `Null` is the sentinel
/// used before the wrapped algorithm has produced anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prediction {
    Null,
    Arm(ArmId),
    Policy(u32),
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Null => write!(f, "null"),
            Prediction::Arm(a) => write!(f, "arm:{a}"),
            Prediction::Policy(p) => write!(f, "policy:{p}"),
        }
    }
}

impl FromStr for Prediction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("prediction", format!("unrecognized token `{s}`"));
        if s == "null" {
            return Ok(Prediction::Null);
        }
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let value: u32 = value.parse().map_err(|_| bad())?;
        match kind {
            "arm" => Ok(Prediction::Arm(ArmId::from_number(value)?)),
            "policy" => Ok(Prediction::Policy(value)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Prediction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prediction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which algorithmic stage produced a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sampling,
    Simulation,
    Racing,
    Commit,
    Standalone,
}

/// Why a round received its recommendation. Never visible to agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Exploit,
    Explore,
    Dedicated,
    Race,
    Fixed,
}

/// Structural position of a round. Rounds sharing `(stage, phase)` are
/// exchangeable and may be pooled by the audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub stage: Stage,
    pub phase: u32,
    pub role: Role,
}

impl Slot {
    pub fn new(stage: Stage, phase: u32, role: Role) -> Self {
        Self { stage, phase, role }
    }
}

/// One round of interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub round: u64,
    pub context: Option<u32>,
    pub recommendation: ArmId,
    pub reward: f64,
    pub feedback: Option<f64>,
    pub prediction: Option<Prediction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub root: u64,
    pub replicate: u64,
}

/// Per-round record of a run together with the hidden instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    rows: Vec<Row>,
    slots: Vec<Slot>,
    instance: MabInstance,
    seed: SeedRecord,
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    #[serde(flatten)]
    row: Row,
    stage: Stage,
    phase: u32,
    role: Role,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    round: u64,
    context: Option<u32>,
    recommendation: u32,
    reward: f64,
    feedback: Option<f64>,
    prediction: Option<String>,
}

impl Transcript {
    pub fn new(instance: MabInstance, seed: SeedRecord) -> Self {
        Self {
            rows: Vec::new(),
            slots: Vec::new(),
            instance,
            seed,
        }
    }

    pub fn with_capacity(instance: MabInstance, seed: SeedRecord, capacity: usize) -> Self {
        Self {
            rows: Vec::with_capacity(capacity),
            slots: Vec::with_capacity(capacity),
            instance,
            seed,
        }
    }

    /// Appends the next round; the round index is assigned here so rounds
    /// are always `1..=len` without gaps.
    pub fn push(
        &mut self,
        context: Option<u32>,
        recommendation: ArmId,
        reward: f64,
        feedback: Option<f64>,
        prediction: Option<Prediction>,
        slot: Slot,
    ) {
        self.rows.push(Row {
            round: self.rows.len() as u64 + 1,
            context,
            recommendation,
            reward,
            feedback,
            prediction,
        });
        self.slots.push(slot);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn instance(&self) -> &MabInstance {
        &self.instance
    }

    pub fn seed(&self) -> SeedRecord {
        self.seed
    }

    /// Mean reward of the recommended arm in round `t` (1-based).
    pub fn mean_at(&self, t: usize) -> f64 {
        let row = &self.rows[t - 1];
        self.instance
            .mean_in(row.recommendation, row.context.unwrap_or(0))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(CsvRow {
                round: r.round,
                context: r.context,
                recommendation: r.recommendation.number(),
                reward: r.reward,
                feedback: r.feedback,
                prediction: r.prediction.map(|p| p.to_string()),
            })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (row, slot) in self.rows.iter().zip(&self.slots) {
            let line = JsonRow {
                row: row.clone(),
                stage: slot.stage,
                phase: slot.phase,
                role: slot.role,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads rows written by [`Transcript::write_jsonl`].
    pub fn read_jsonl<R: BufRead>(r: R, instance: MabInstance, seed: SeedRecord) -> Result<Self> {
        let mut t = Transcript::new(instance, seed);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let j: JsonRow = serde_json::from_str(&line)
                .map_err(|e| Error::config(format!("line {}", i + 1), e.to_string()))?;
            if j.row.round != t.len() as u64 + 1 {
                return Err(Error::config(
                    format!("line {}", i + 1),
                    format!("round {} out of sequence", j.row.round),
                ));
            }
            t.rows.push(j.row);
            t.slots.push(Slot::new(j.stage, j.phase, j.role));
        }
        Ok(t)
    }
}
