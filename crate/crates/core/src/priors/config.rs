//! Declarative prior descriptions read from TOML or JSON.
//!
//! ```toml
//! [[arms]]
//! prior = { kind = "gaussian", mean = 1.0, var = 1.0 }
//! reward = { kind = "gaussian", noise_var = 1.0 }
//!
//! [[arms]]
//! prior = { kind = "gaussian", mean = 0.5, var = 1.0 }
//! reward = { kind = "gaussian", noise_var = 1.0 }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GridDensity, Marginal, PriorModel, DEFAULT_BANK_SIZE};
use crate::error::{Error, Result};
use crate::model::{ContextSpace, FeedbackFamily, RewardFamily};

const DEFAULT_GRID: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    Gaussian { mean: f64, var: f64 },
    Beta { alpha: f64, beta: f64 },
    Uniform { resolution: Option<usize> },
    TruncatedNormal { mean: f64, var: f64, resolution: Option<usize> },
    Grid { points: Vec<f64>, weights: Vec<f64> },
    PointMass { value: f64 },
}

impl MarginalSpec {
    pub fn build(&self) -> Result<Marginal> {
        let m = match self {
            MarginalSpec::Gaussian { mean, var } => Marginal::Gaussian { mean: *mean, var: *var },
            MarginalSpec::Beta { alpha, beta } => Marginal::Beta { alpha: *alpha, beta: *beta },
            MarginalSpec::Uniform { resolution } => {
                Marginal::Grid(GridDensity::uniform(resolution.unwrap_or(DEFAULT_GRID))?)
            }
            MarginalSpec::TruncatedNormal { mean, var, resolution } => Marginal::Grid(
                GridDensity::truncated_normal(*mean, *var, resolution.unwrap_or(DEFAULT_GRID))?,
            ),
            MarginalSpec::Grid { points, weights } => {
                Marginal::Grid(GridDensity::new(points.clone(), weights.clone())?)
            }
            MarginalSpec::PointMass { value } => Marginal::PointMass { value: *value },
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub prior: MarginalSpec,
    pub reward: RewardFamily,
}

/// All arms move together: `μ_i = b + offsets[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftedSpec {
    pub base: MarginalSpec,
    pub offsets: Vec<f64>,
    pub reward: RewardFamily,
    pub bank_size: Option<usize>,
    pub bank_seed: Option<u64>,
}

/// Contextual prior: `cells` lists `arms` entries per context, context by context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextsSpec {
    pub probs: Vec<f64>,
    pub arms: usize,
    pub cells: Vec<CellSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    #[serde(default)]
    pub arms: Vec<CellSpec>,
    pub shifted: Option<ShiftedSpec>,
    pub contexts: Option<ContextsSpec>,
    pub feedback: Option<FeedbackFamily>,
    /// Sort arms by prior mean instead of rejecting a misordered list.
    #[serde(default)]
    pub relabel: bool,
}

/// A prior together with its context space and feedback family.
#[derive(Debug, Clone)]
pub struct LoadedPrior {
    pub prior: PriorModel,
    pub contexts: ContextSpace,
    pub feedback: FeedbackFamily,
    /// `original[new_index]` when the arms were relabeled.
    pub relabel: Option<Vec<usize>>,
}

impl PriorSpec {
    pub fn build(&self) -> Result<LoadedPrior> {
        let given = [!self.arms.is_empty(), self.shifted.is_some(), self.contexts.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if given != 1 {
            return Err(Error::config(
                "prior",
                "exactly one of `arms`, `shifted` or `contexts` must be given",
            ));
        }
        let feedback = self.feedback.unwrap_or_default();
        if let Some(s) = &self.shifted {
            let prior = PriorModel::shifted(
                s.base.build()?,
                s.offsets.clone(),
                s.reward,
                s.bank_size.unwrap_or(DEFAULT_BANK_SIZE),
                s.bank_seed.unwrap_or(0),
            )
            .map_err(|e| Error::config("shifted", e.to_string()))?;
            return Ok(LoadedPrior {
                prior,
                contexts: ContextSpace::single(),
                feedback,
                relabel: None,
            });
        }
        if let Some(c) = &self.contexts {
            let contexts = ContextSpace::new(c.probs.clone()).map_err(|e| Error::config("contexts.probs", e.to_string()))?;
            let (marginals, families) = cells(&c.cells, "contexts.cells")?;
            let prior = PriorModel::contextual(c.arms, contexts.len(), marginals, families)
                .map_err(|e| Error::config("contexts.cells", e.to_string()))?;
            return Ok(LoadedPrior {
                prior,
                contexts,
                feedback,
                relabel: None,
            });
        }
        let (marginals, families) = cells(&self.arms, "arms")?;
        let (prior, relabel) = if self.relabel {
            let (p, order) = PriorModel::relabeled(marginals, families)?;
            (p, Some(order))
        } else {
            (
                PriorModel::independent(marginals, families).map_err(|e| Error::config("arms", e.to_string()))?,
                None,
            )
        };
        Ok(LoadedPrior {
            prior,
            contexts: ContextSpace::single(),
            feedback,
            relabel,
        })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config("prior", e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::config("prior", e.to_string()))
    }

    /// Reads JSON when the extension is `.json`, TOML otherwise.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }
}

fn cells(specs: &[CellSpec], field: &str) -> Result<(Vec<Marginal>, Vec<RewardFamily>)> {
    let mut marginals = Vec::with_capacity(specs.len());
    let mut families = Vec::with_capacity(specs.len());
    for (i, c) in specs.iter().enumerate() {
        marginals.push(
            c.prior
                .build()
                .map_err(|e| Error::config(format!("{field}[{i}].prior"), e.to_string()))?,
        );
        families.push(c.reward);
    }
    Ok((marginals, families))
}
