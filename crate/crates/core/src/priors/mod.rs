//! Prior models over mean rewards, sample datasets and posterior queries.
//!
//! A [`PriorModel`] covers `arms × contexts` cells. Plain bandit priors have a
//! single context and keep arms sorted by non-increasing prior mean; this
//! ordering is checked at construction. Posterior means are exact for the
//! conjugate pairs (Gaussian–Gaussian, Beta–Bernoulli), grid-based for
//! discretized densities and importance-sampled for joint priors.

pub mod config;
pub mod constants;
pub mod thresholds;

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta as BetaDist, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArmId, MabInstance, RewardFamily};
use crate::rng::RngStream;

/// Importance-sampling runs below this effective sample size trigger a warning.
pub const ESS_FLOOR: f64 = 100.0;

/// Default number of joint-prior draws kept for importance sampling.
pub const DEFAULT_BANK_SIZE: usize = 4096;

static ESS_WARNED: AtomicBool = AtomicBool::new(false);

/// A discretized density: probability mass on a finite set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    points: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    ln_p: Vec<f64>,
    ln_q: Vec<f64>,
}

impl GridDensity {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::param("grid", "points and weights must be nonempty and of equal length"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("grid", "weights must be finite and nonnegative"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("grid", "points must be finite"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::param("grid", "total grid mass is zero"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        let ln_p = points.iter().map(|p: &f64| p.ln()).collect();
        let ln_q = points.iter().map(|p: &f64| (1.0 - p).ln()).collect();
        Ok(Self {
            points,
            weights,
            cumulative,
            ln_p,
            ln_q,
        })
    }

    fn midpoints(resolution: usize) -> Result<Vec<f64>> {
        if resolution == 0 {
            return Err(Error::param("resolution", "grid resolution must be positive"));
        }
        Ok((0..resolution)
            .map(|i| (i as f64 + 0.5) / resolution as f64)
            .collect())
    }

    /// Uniform density on `[0, 1]` at `resolution` cell midpoints.
    pub fn uniform(resolution: usize) -> Result<Self> {
        let points = Self::midpoints(resolution)?;
        let weights = vec![1.0; points.len()];
        Self::new(points, weights)
    }

    /// Normal density truncated to `[0, 1]`.
    pub fn truncated_normal(mean: f64, var: f64, resolution: usize) -> Result<Self> {
        if !(var > 0.0) {
            return Err(Error::param("var", "variance must be positive"));
        }
        let points = Self::midpoints(resolution)?;
        let weights = points
            .iter()
            .map(|p| (-(p - mean).powi(2) / (2.0 * var)).exp())
            .collect();
        Self::new(points, weights)
    }

    /// Beta density on `[0, 1]`.
    pub fn beta(alpha: f64, beta: f64, resolution: usize) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::param("beta", "shape parameters must be positive"));
        }
        let points = Self::midpoints(resolution)?;
        let weights = points
            .iter()
            .map(|p| ((alpha - 1.0) * p.ln() + (beta - 1.0) * (1.0 - p).ln()).exp())
            .collect();
        Self::new(points, weights)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| p * w).sum()
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.points[i.min(self.points.len() - 1)]
    }

    fn posterior_mean(&self, stats: &SampleStats, family: RewardFamily) -> Result<f64> {
        if stats.n == 0 {
            return Ok(self.mean());
        }
        let logw: Vec<f64> = (0..self.points.len())
            .map(|g| {
                if self.weights[g] == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let ll = match family {
                    RewardFamily::Bernoulli => {
                        let s = stats.sum;
                        let f = stats.n as f64 - s;
                        let a = if s > 0.0 { s * self.ln_p[g] } else { 0.0 };
                        let b = if f > 0.0 { f * self.ln_q[g] } else { 0.0 };
                        a + b
                    }
                    RewardFamily::Gaussian { noise_var } => {
                        let mu = self.points[g];
                        (mu * stats.sum - 0.5 * stats.n as f64 * mu * mu) / noise_var
                    }
                    RewardFamily::PointMass => point_mass_loglik(stats, self.points[g]),
                };
                self.weights[g].ln() + ll
            })
            .collect();
        let (num, den, _) = weighted_mean(&logw, |g| self.points[g])?;
        Ok(num / den)
    }
}

/// Returns `(Σ w·f, Σ w, Σ w²)` for self-normalized weights `exp(logw)`.
fn weighted_mean(logw: &[f64], f: impl Fn(usize) -> f64) -> Result<(f64, f64, f64)> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegeneratePosterior(
            "no prior mass is compatible with the observed samples".into(),
        ));
    }
    let (mut num, mut den, mut sq) = (0.0, 0.0, 0.0);
    for (i, &lw) in logw.iter().enumerate() {
        let w = (lw - max).exp();
        if w > 0.0 {
            num += w * f(i);
            den += w;
            sq += w * w;
        }
    }
    Ok((num, den, sq))
}

fn point_mass_loglik(stats: &SampleStats, mu: f64) -> f64 {
    let mean = stats.mean();
    if (mean - mu).abs() <= 1e-9 * (1.0 + mu.abs()) {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Marginal prior of one cell's mean reward.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Gaussian { mean: f64, var: f64 },
    Beta { alpha: f64, beta: f64 },
    Grid(GridDensity),
    PointMass { value: f64 },
}

impl Marginal {
    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Gaussian { mean, .. } => *mean,
            Marginal::Beta { alpha, beta } => alpha / (alpha + beta),
            Marginal::Grid(g) => g.mean(),
            Marginal::PointMass { value } => *value,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Gaussian { mean, var } if !(mean.is_finite() && var > 0.0 && var.is_finite()) => {
                Err(Error::param("gaussian", "needs a finite mean and positive variance"))
            }
            Marginal::Beta { alpha, beta } if !(alpha > 0.0 && beta > 0.0) => {
                Err(Error::param("beta", "shape parameters must be positive"))
            }
            Marginal::PointMass { value } if !value.is_finite() => {
                Err(Error::param("point_mass", "value must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            Marginal::Gaussian { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + var.sqrt() * z
            }
            Marginal::Beta { alpha, beta } => {
                let d = BetaDist::new(*alpha, *beta).expect("validated beta parameters");
                rng.sample(d)
            }
            Marginal::Grid(g) => g.sample(rng),
            Marginal::PointMass { value } => *value,
        }
    }

    /// True when every draw lies in `[0, 1]`.
    fn is_bounded(&self) -> bool {
        match self {
            Marginal::Gaussian { .. } => false,
            Marginal::Beta { .. } => true,
            Marginal::Grid(g) => g.points.iter().all(|p| (0.0..=1.0).contains(p)),
            Marginal::PointMass { value } => (0.0..=1.0).contains(value),
        }
    }
}

/// Joint prior over all cell means, used for correlated priors.
pub trait JointSampler: fmt::Debug + Send + Sync {
    fn cells(&self) -> usize;
    fn prior_means(&self) -> Vec<f64>;
    fn sample(&self, rng: &mut RngStream) -> Vec<f64>;
}

/// Perfectly correlated prior: `μ_i = base + offset_i` for one base draw.
#[derive(Debug, Clone)]
pub struct ShiftedSampler {
    pub base: Marginal,
    pub offsets: Vec<f64>,
}

impl JointSampler for ShiftedSampler {
    fn cells(&self) -> usize {
        self.offsets.len()
    }

    fn prior_means(&self) -> Vec<f64> {
        let m = self.base.mean();
        self.offsets.iter().map(|o| m + o).collect()
    }

    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        let b = self.base.sample(rng);
        self.offsets.iter().map(|o| b + o).collect()
    }
}

/// Independent marginals sampled jointly; lets an independent prior be
/// queried through importance sampling.
#[derive(Debug, Clone)]
pub struct ProductSampler(pub Vec<Marginal>);

impl JointSampler for ProductSampler {
    fn cells(&self) -> usize {
        self.0.len()
    }

    fn prior_means(&self) -> Vec<f64> {
        self.0.iter().map(Marginal::mean).collect()
    }

    fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.0.iter().map(|m| m.sample(rng)).collect()
    }
}

/// Count, sum and sum of squares of the rewards observed in one cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleStats {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
    non_binary: Option<f64>,
}

impl SampleStats {
    pub fn push(&mut self, r: f64) {
        self.n += 1;
        self.sum += r;
        self.sum_sq += r * r;
        if self.non_binary.is_none() && r != 0.0 && r != 1.0 {
            self.non_binary = Some(r);
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    fn check(&self, family: RewardFamily) -> Result<()> {
        match (family, self.non_binary) {
            (RewardFamily::Bernoulli, Some(r)) => Err(Error::RewardOutOfSupport {
                family: family.name(),
                reward: r,
            }),
            _ => Ok(()),
        }
    }
}

/// The samples collected so far, aggregated per arm-context cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    arms: usize,
    contexts: usize,
    stats: Vec<SampleStats>,
}

impl Dataset {
    pub fn new(arms: usize, contexts: usize) -> Self {
        Self {
            arms,
            contexts,
            stats: vec![SampleStats::default(); arms * contexts],
        }
    }

    pub fn add(&mut self, arm: ArmId, reward: f64) {
        self.add_in(arm, 0, reward);
    }

    pub fn add_in(&mut self, arm: ArmId, context: u32, reward: f64) {
        self.stats[context as usize * self.arms + arm.index()].push(reward);
    }

    pub fn stats(&self, arm: ArmId) -> &SampleStats {
        self.stats_in(arm, 0)
    }

    pub fn stats_in(&self, arm: ArmId, context: u32) -> &SampleStats {
        &self.stats[context as usize * self.arms + arm.index()]
    }

    pub fn count(&self, arm: ArmId) -> u64 {
        self.stats(arm).n
    }

    pub fn total(&self) -> u64 {
        self.stats.iter().map(|s| s.n).sum()
    }

    pub fn num_arms(&self) -> usize {
        self.arms
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CellRule {
    Conjugate { mean: f64, var: f64, noise_var: f64 },
    BetaBernoulli { alpha: f64, beta: f64 },
    Grid(GridDensity),
    Fixed(f64),
    SampleMean(f64),
}

impl CellRule {
    fn build(marginal: &Marginal, family: RewardFamily) -> Result<Self> {
        Ok(match (marginal, family) {
            (Marginal::PointMass { value }, _) => CellRule::Fixed(*value),
            (m, RewardFamily::PointMass) => CellRule::SampleMean(m.mean()),
            (Marginal::Gaussian { mean, var }, RewardFamily::Gaussian { noise_var }) => {
                CellRule::Conjugate {
                    mean: *mean,
                    var: *var,
                    noise_var,
                }
            }
            (Marginal::Gaussian { .. }, RewardFamily::Bernoulli) => {
                return Err(Error::param(
                    "prior",
                    "a Gaussian prior puts mass outside [0, 1]; use a truncated grid for Bernoulli rewards",
                ))
            }
            (Marginal::Beta { alpha, beta }, RewardFamily::Bernoulli) => CellRule::BetaBernoulli {
                alpha: *alpha,
                beta: *beta,
            },
            (Marginal::Beta { alpha, beta }, _) => CellRule::Grid(GridDensity::beta(*alpha, *beta, 2000)?),
            (Marginal::Grid(g), _) => CellRule::Grid(g.clone()),
        })
    }

    fn posterior_mean(&self, stats: &SampleStats, family: RewardFamily) -> Result<f64> {
        Ok(match self {
            CellRule::Conjugate {
                mean,
                var,
                noise_var,
            } => {
                let precision = 1.0 / var + stats.n as f64 / noise_var;
                (mean / var + stats.sum / noise_var) / precision
            }
            CellRule::BetaBernoulli { alpha, beta } => {
                (alpha + stats.sum) / (alpha + beta + stats.n as f64)
            }
            CellRule::Grid(g) => g.posterior_mean(stats, family)?,
            CellRule::Fixed(v) => *v,
            CellRule::SampleMean(prior) => {
                if stats.n == 0 {
                    *prior
                } else {
                    stats.mean()
                }
            }
        })
    }
}

#[derive(Debug, Clone)]
enum PriorKind {
    Independent {
        marginals: Vec<Marginal>,
        rules: Vec<CellRule>,
    },
    Joint {
        sampler: Arc<dyn JointSampler>,
        bank: Arc<Vec<f64>>,
        bank_size: usize,
    },
}

/// Posterior means of one context together with importance-sampling
/// diagnostics when they apply.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub means: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub effective_sample_size: Option<f64>,
}

/// Common prior over the mean-reward matrix plus the reward family of every
/// cell. Immutable and cheap to share across threads.
#[derive(Debug, Clone)]
pub struct PriorModel {
    arms: usize,
    contexts: usize,
    families: Vec<RewardFamily>,
    prior_means: Vec<f64>,
    kind: PriorKind,
}

impl PriorModel {
    /// Independent prior over arms with arms already in order of
    /// non-increasing prior mean.
    pub fn independent(marginals: Vec<Marginal>, families: Vec<RewardFamily>) -> Result<Self> {
        let p = Self::unordered(marginals, families)?;
        p.check_order()?;
        Ok(p)
    }

    /// Independent prior without the ordering check. Algorithms that rely on
    /// arm 1 being prior-best should use [`PriorModel::independent`] or
    /// [`PriorModel::relabeled`].
    pub fn unordered(marginals: Vec<Marginal>, families: Vec<RewardFamily>) -> Result<Self> {
        let n = marginals.len();
        Self::contextual(n, 1, marginals, families)
    }

    /// Sorts arms by non-increasing prior mean (stable, so ties keep input
    /// order). Returns the prior and `original[new_index]`.
    pub fn relabeled(marginals: Vec<Marginal>, families: Vec<RewardFamily>) -> Result<(Self, Vec<usize>)> {
        if families.len() != marginals.len() {
            return Err(Error::ArmCount {
                expected: format!("{} reward families", marginals.len()),
                actual: families.len(),
            });
        }
        let mut order: Vec<usize> = (0..marginals.len()).collect();
        order.sort_by(|&a, &b| marginals[b].mean().total_cmp(&marginals[a].mean()));
        let m = order.iter().map(|&i| marginals[i].clone()).collect();
        let f = order.iter().map(|&i| families[i]).collect();
        Ok((Self::independent(m, f)?, order))
    }

    /// Independent cell priors over an `arms × contexts` matrix, row-major by
    /// context. `families` has one entry per arm or per cell.
    pub fn contextual(
        arms: usize,
        contexts: usize,
        marginals: Vec<Marginal>,
        families: Vec<RewardFamily>,
    ) -> Result<Self> {
        if arms == 0 || contexts == 0 {
            return Err(Error::param("prior", "needs at least one arm and one context"));
        }
        let cells = arms * contexts;
        if marginals.len() != cells {
            return Err(Error::ArmCount {
                expected: format!("{cells} cell priors"),
                actual: marginals.len(),
            });
        }
        let families = expand_families(families, arms, cells)?;
        let mut rules = Vec::with_capacity(cells);
        for (m, &f) in marginals.iter().zip(&families) {
            m.validate()?;
            f.validate()?;
            if f == RewardFamily::Bernoulli && !m.is_bounded() {
                return Err(Error::param(
                    "prior",
                    "Bernoulli rewards need a prior supported on [0, 1]",
                ));
            }
            rules.push(CellRule::build(m, f)?);
        }
        let prior_means = marginals.iter().map(Marginal::mean).collect();
        Ok(Self {
            arms,
            contexts,
            families,
            prior_means,
            kind: PriorKind::Independent { marginals, rules },
        })
    }

    /// Joint prior given by a sampler. Posterior queries use self-normalized
    /// importance sampling over a fixed bank of `bank_size` prior draws taken
    /// from the stream `(seed, "prior-bank")`. Single-context priors must be
    /// ordered.
    pub fn joint(
        sampler: Arc<dyn JointSampler>,
        arms: usize,
        contexts: usize,
        families: Vec<RewardFamily>,
        bank_size: usize,
        seed: u64,
    ) -> Result<Self> {
        let cells = arms * contexts;
        if sampler.cells() != cells || cells == 0 {
            return Err(Error::ArmCount {
                expected: format!("{cells} cells"),
                actual: sampler.cells(),
            });
        }
        if bank_size == 0 {
            return Err(Error::param("bank_size", "must be positive"));
        }
        let families = expand_families(families, arms, cells)?;
        for f in &families {
            f.validate()?;
        }
        let mut rng = RngStream::new(seed, 0, "prior-bank", 0);
        let mut bank = Vec::with_capacity(bank_size * cells);
        for _ in 0..bank_size {
            let draw = sampler.sample(&mut rng);
            bank.extend_from_slice(&draw);
        }
        let p = Self {
            arms,
            contexts,
            families,
            prior_means: sampler.prior_means(),
            kind: PriorKind::Joint {
                sampler,
                bank: Arc::new(bank),
                bank_size,
            },
        };
        if contexts == 1 {
            p.check_order()?;
        }
        Ok(p)
    }

    /// Two or more arms whose means move together: `μ_i = b + offsets[i]`
    /// with `b` drawn from `base`.
    pub fn shifted(base: Marginal, offsets: Vec<f64>, family: RewardFamily, bank_size: usize, seed: u64) -> Result<Self> {
        base.validate()?;
        let arms = offsets.len();
        let sampler = ShiftedSampler { base, offsets };
        Self::joint(Arc::new(sampler), arms, 1, vec![family; arms], bank_size, seed)
    }

    fn check_order(&self) -> Result<()> {
        for x in 0..self.contexts {
            let row = &self.prior_means[x * self.arms..(x + 1) * self.arms];
            for a in 1..row.len() {
                if row[a] > row[a - 1] {
                    return Err(Error::ArmOrder {
                        prev_arm: a as u32,
                        prev: row[a - 1],
                        arm: a as u32 + 1,
                        next: row[a],
                    });
                }
            }
        }
        Ok(())
    }

    pub fn num_arms(&self) -> usize {
        self.arms
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts
    }

    /// One family per cell.
    pub fn families(&self) -> &[RewardFamily] {
        &self.families
    }

    pub fn family_in(&self, arm: ArmId, context: u32) -> RewardFamily {
        self.families[context as usize * self.arms + arm.index()]
    }

    pub fn prior_means(&self) -> &[f64] {
        &self.prior_means
    }

    pub fn prior_mean(&self, arm: ArmId) -> f64 {
        self.prior_means[arm.index()]
    }

    pub fn prior_mean_in(&self, arm: ArmId, context: u32) -> f64 {
        self.prior_means[context as usize * self.arms + arm.index()]
    }

    pub fn is_independent(&self) -> bool {
        matches!(self.kind, PriorKind::Independent { .. })
    }

    /// Cell marginals of an independent prior.
    pub fn marginals(&self) -> Option<&[Marginal]> {
        match &self.kind {
            PriorKind::Independent { marginals, .. } => Some(marginals),
            PriorKind::Joint { .. } => None,
        }
    }

    /// True when every cell's rewards are guaranteed to lie in `[0, 1]`.
    pub fn has_bounded_rewards(&self) -> bool {
        let families_ok = self.families.iter().all(RewardFamily::is_bounded);
        let means_ok = match &self.kind {
            PriorKind::Independent { marginals, .. } => marginals.iter().all(Marginal::is_bounded),
            PriorKind::Joint { bank, .. } => bank.iter().all(|m| (0.0..=1.0).contains(m)),
        };
        families_ok && means_ok
    }

    pub fn sample_instance(&self, rng: &mut RngStream) -> Result<MabInstance> {
        let means = match &self.kind {
            PriorKind::Independent { marginals, .. } => marginals.iter().map(|m| m.sample(rng)).collect(),
            PriorKind::Joint { sampler, .. } => sampler.sample(rng),
        };
        MabInstance::contextual(self.arms, self.contexts, means)
    }

    fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.arms != self.arms || data.contexts != self.contexts {
            return Err(Error::ArmCount {
                expected: format!("dataset of {} arms × {} contexts", self.arms, self.contexts),
                actual: data.arms * data.contexts,
            });
        }
        for (s, &f) in data.stats.iter().zip(&self.families) {
            s.check(f)?;
        }
        Ok(())
    }

    /// Posterior means of every arm in `context` given `data`.
    pub fn posterior_means_in(&self, data: &Dataset, context: u32) -> Result<Vec<f64>> {
        Ok(self.posterior_summary(data, context)?.means)
    }

    pub fn posterior_summary(&self, data: &Dataset, context: u32) -> Result<PosteriorSummary> {
        self.check_data(data)?;
        if context as usize >= self.contexts {
            return Err(Error::UnknownContext(context));
        }
        let base = context as usize * self.arms;
        match &self.kind {
            PriorKind::Independent { rules, .. } => {
                let means = (0..self.arms)
                    .map(|a| rules[base + a].posterior_mean(&data.stats[base + a], self.families[base + a]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PosteriorSummary {
                    means,
                    std_errors: None,
                    effective_sample_size: None,
                })
            }
            PriorKind::Joint { bank, bank_size, .. } => {
                self.importance_posterior(data, base, bank, *bank_size)
            }
        }
    }

    fn importance_posterior(
        &self,
        data: &Dataset,
        base: usize,
        bank: &[f64],
        bank_size: usize,
    ) -> Result<PosteriorSummary> {
        let cells = self.arms * self.contexts;
        let observed: Vec<usize> = (0..cells).filter(|&c| data.stats[c].n > 0).collect();
        if observed.is_empty() {
            return Ok(PosteriorSummary {
                means: self.prior_means[base..base + self.arms].to_vec(),
                std_errors: None,
                effective_sample_size: None,
            });
        }
        let logw: Vec<f64> = (0..bank_size)
            .map(|b| {
                let draw = &bank[b * cells..(b + 1) * cells];
                observed
                    .iter()
                    .map(|&c| cell_loglik(&data.stats[c], self.families[c], draw[c]))
                    .sum()
            })
            .collect();
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegeneratePosterior(
                "every prior draw has zero likelihood".into(),
            ));
        }
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let den: f64 = w.iter().sum();
        let sq: f64 = w.iter().map(|x| x * x).sum();
        let ess = den * den / sq;
        if ess < ESS_FLOOR && !ESS_WARNED.swap(true, Ordering::Relaxed) {
            log::warn!("importance-sampling effective sample size {ess:.1} is below {ESS_FLOOR}; increase the prior bank");
        }
        let mut means = Vec::with_capacity(self.arms);
        let mut ses = Vec::with_capacity(self.arms);
        for a in 0..self.arms {
            let c = base + a;
            let est = (0..bank_size).map(|b| w[b] * bank[b * cells + c]).sum::<f64>() / den;
            let var = (0..bank_size)
                .map(|b| (w[b] * (bank[b * cells + c] - est)).powi(2))
                .sum::<f64>()
                / (den * den);
            means.push(est);
            ses.push(var.sqrt());
        }
        Ok(PosteriorSummary {
            means,
            std_errors: Some(ses),
            effective_sample_size: Some(ess),
        })
    }

    pub fn posterior_mean(&self, data: &Dataset, arm: ArmId) -> Result<f64> {
        self.posterior_mean_in(data, arm, 0)
    }

    pub fn posterior_mean_in(&self, data: &Dataset, arm: ArmId, context: u32) -> Result<f64> {
        if arm.index() >= self.arms {
            return Err(Error::UnknownArm(arm.number()));
        }
        Ok(self.posterior_means_in(data, context)?[arm.index()])
    }

    /// Arm with the largest posterior mean in `context`, ties to the lowest index.
    pub fn posterior_argmax_in(&self, data: &Dataset, context: u32) -> Result<ArmId> {
        Ok(argmax(&self.posterior_means_in(data, context)?))
    }

    pub fn posterior_argmax(&self, data: &Dataset) -> Result<ArmId> {
        self.posterior_argmax_in(data, 0)
    }

    pub fn empty_dataset(&self) -> Dataset {
        Dataset::new(self.arms, self.contexts)
    }
}

/// Index of the largest value, ties to the lowest index.
pub fn argmax(values: &[f64]) -> ArmId {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    ArmId::from_index(best)
}

fn cell_loglik(stats: &SampleStats, family: RewardFamily, mu: f64) -> f64 {
    match family {
        RewardFamily::Bernoulli => {
            let s = stats.sum;
            let f = stats.n as f64 - s;
            if !(0.0..=1.0).contains(&mu) {
                return f64::NEG_INFINITY;
            }
            let a = if s > 0.0 { s * mu.ln() } else { 0.0 };
            let b = if f > 0.0 { f * (1.0 - mu).ln() } else { 0.0 };
            a + b
        }
        RewardFamily::Gaussian { noise_var } => {
            (mu * stats.sum - 0.5 * stats.n as f64 * mu * mu) / noise_var
        }
        RewardFamily::PointMass => point_mass_loglik(stats, mu),
    }
}

fn expand_families(families: Vec<RewardFamily>, arms: usize, cells: usize) -> Result<Vec<RewardFamily>> {
    if families.len() == cells {
        Ok(families)
    } else if families.len() == arms {
        Ok((0..cells).map(|c| families[c % arms]).collect())
    } else {
        Err(Error::ArmCount {
            expected: format!("{arms} or {cells} reward families"),
            actual: families.len(),
        })
    }
}

/// Serializable summary of a prior for reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PriorSummary {
    pub arms: usize,
    pub contexts: usize,
    pub prior_means: Vec<f64>,
    pub independent: bool,
}

impl From<&PriorModel> for PriorSummary {
    fn from(p: &PriorModel) -> Self {
        Self {
            arms: p.arms,
            contexts: p.contexts,
            prior_means: p.prior_means.clone(),
            independent: p.is_independent(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSS: RewardFamily = RewardFamily::Gaussian { noise_var: 1.0 };

    fn gaussian_example() -> PriorModel {
        PriorModel::independent(
            vec![
                Marginal::Gaussian { mean: 1.0, var: 1.0 },
                Marginal::Gaussian { mean: 0.5, var: 1.0 },
            ],
            vec![GAUSS; 2],
        )
        .unwrap()
    }

    #[test]
    fn conjugate_gaussian_single_sample() {
        let p = gaussian_example();
        let mut d = p.empty_dataset();
        d.add(ArmId::FIRST, 2.0);
        assert!((p.posterior_mean(&d, ArmId::FIRST).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_returns_prior_means() {
        let p = gaussian_example();
        let d = p.empty_dataset();
        assert_eq!(p.posterior_means_in(&d, 0).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn uniform_grid_matches_beta_conjugate() {
        let grid = PriorModel::independent(
            vec![Marginal::Grid(GridDensity::uniform(10_000).unwrap())],
            vec![RewardFamily::Bernoulli],
        )
        .unwrap();
        let mut d = grid.empty_dataset();
        for r in [1.0, 1.0, 1.0, 0.0] {
            d.add(ArmId::FIRST, r);
        }
        let post = grid.posterior_mean(&d, ArmId::FIRST).unwrap();
        assert!((post - 4.0 / 6.0).abs() < 1e-3, "{post}");
    }

    #[test]
    fn bernoulli_reward_outside_support_is_rejected() {
        let p = PriorModel::independent(
            vec![Marginal::Beta { alpha: 1.0, beta: 1.0 }],
            vec![RewardFamily::Bernoulli],
        )
        .unwrap();
        let mut d = p.empty_dataset();
        d.add(ArmId::FIRST, 0.5);
        assert!(matches!(
            p.posterior_mean(&d, ArmId::FIRST),
            Err(Error::RewardOutOfSupport { .. })
        ));
    }

    #[test]
    fn misordered_prior_is_rejected() {
        let r = PriorModel::independent(
            vec![
                Marginal::PointMass { value: 0.3 },
                Marginal::PointMass { value: 0.9 },
            ],
            vec![RewardFamily::PointMass; 2],
        );
        assert!(matches!(r, Err(Error::ArmOrder { arm: 2, .. })));
    }

    #[test]
    fn relabeling_is_stable() {
        let (p, order) = PriorModel::relabeled(
            vec![
                Marginal::PointMass { value: 0.3 },
                Marginal::PointMass { value: 0.9 },
                Marginal::PointMass { value: 0.3 },
            ],
            vec![RewardFamily::PointMass; 3],
        )
        .unwrap();
        assert_eq!(order, vec![1, 0, 2]);
        assert_eq!(p.prior_means(), &[0.9, 0.3, 0.3]);
    }

    #[test]
    fn point_mass_prior_always_returns_truth() {
        let p = PriorModel::independent(
            vec![
                Marginal::PointMass { value: 0.9 },
                Marginal::PointMass { value: 0.1 },
            ],
            vec![RewardFamily::Bernoulli; 2],
        )
        .unwrap();
        let mut rng = RngStream::new(1, 0, "t", 0);
        for _ in 0..10 {
            assert_eq!(p.sample_instance(&mut rng).unwrap().means(), &[0.9, 0.1]);
        }
    }

    #[test]
    fn shifted_prior_keeps_offset_in_posterior() {
        let p = PriorModel::shifted(
            Marginal::Gaussian { mean: 1.0, var: 1.0 },
            vec![0.0, -0.2],
            GAUSS,
            2048,
            3,
        )
        .unwrap();
        let mut d = p.empty_dataset();
        d.add(ArmId::FIRST, 0.4);
        let m = p.posterior_means_in(&d, 0).unwrap();
        assert!((m[0] - m[1] - 0.2).abs() < 1e-9);
        assert_eq!(p.posterior_argmax(&d).unwrap(), ArmId::FIRST);
    }

    #[test]
    fn sample_moments_of_independent_priors() {
        let unif = PriorModel::independent(
            vec![Marginal::Beta { alpha: 1.0, beta: 1.0 }; 2],
            vec![RewardFamily::Bernoulli; 2],
        )
        .unwrap();
        let gauss = gaussian_example();
        let mut rng = RngStream::new(9, 0, "instance", 0);
        let n = 100_000;
        let mut su = [0.0; 2];
        let mut sg = [0.0; 2];
        for _ in 0..n {
            let u = unif.sample_instance(&mut rng).unwrap();
            let g = gauss.sample_instance(&mut rng).unwrap();
            for a in 0..2 {
                su[a] += u.means()[a];
                sg[a] += g.means()[a];
            }
        }
        for a in 0..2 {
            assert!((su[a] / n as f64 - 0.5).abs() < 0.005);
        }
        let se = (1.0 / n as f64).sqrt();
        assert!((sg[0] / n as f64 - 1.0).abs() < 3.0 * se);
        assert!((sg[1] / n as f64 - 0.5).abs() < 3.0 * se);
    }
}
