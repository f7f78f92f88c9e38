//! Ex-post and Bayesian regret and windowed average rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MabInstance, Transcript};
use crate::stats::{z_two_sided, Moments};

/// Cumulative regret after each round, averaged over replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    /// `mean[t − 1]` is the mean cumulative regret after `t` rounds.
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_instance: Option<Vec<Vec<f64>>>,
}

impl RegretCurve {
    /// Averages per-replicate cumulative curves, which must share a length.
    pub fn from_curves(curves: Vec<Vec<f64>>, keep: bool) -> Result<Self> {
        let Some(first) = curves.first() else {
            return Err(Error::param("transcripts", "need at least one transcript"));
        };
        let len = first.len();
        if curves.iter().any(|c| c.len() != len) {
            return Err(Error::param("transcripts", "transcripts must share the horizon"));
        }
        let mut mean = Vec::with_capacity(len);
        let mut std_error = Vec::with_capacity(len);
        for t in 0..len {
            let m: Moments = curves.iter().map(|c| c[t]).collect();
            mean.push(m.mean());
            std_error.push(m.std_error());
        }
        Ok(Self {
            mean,
            std_error,
            replicates: curves.len(),
            per_instance: keep.then_some(curves),
        })
    }

    /// Builds a curve from per-round running moments.
    pub fn from_moments(rounds: &[Moments]) -> Self {
        Self {
            mean: rounds.iter().map(Moments::mean).collect(),
            std_error: rounds.iter().map(Moments::std_error).collect(),
            replicates: rounds.first().map_or(0, |m| m.n as usize),
            per_instance: None,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.mean.len() as u64
    }

    /// Mean cumulative regret after `t` rounds.
    pub fn at(&self, t: u64) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.mean[t as usize - 1]
        }
    }

    pub fn interval(&self, t: u64, confidence: f64) -> (f64, f64) {
        if t == 0 {
            return (0.0, 0.0);
        }
        let z = z_two_sided(confidence);
        let (m, s) = (self.mean[t as usize - 1], self.std_error[t as usize - 1]);
        (m - z * s, m + z * s)
    }
}

/// `T · max_i μ_i − Σ_t μ_{I_t}`, context by context.
pub fn expost_regret(transcript: &Transcript, instance: &MabInstance) -> f64 {
    cumulative(transcript, instance).last().copied().unwrap_or(0.0)
}

fn cumulative(transcript: &Transcript, instance: &MabInstance) -> Vec<f64> {
    let mut acc = 0.0;
    transcript
        .rows()
        .iter()
        .map(|r| {
            let x = r.context.unwrap_or(0);
            acc += instance.best_mean_in(x) - instance.mean_in(r.recommendation, x);
            acc
        })
        .collect()
}

/// Mean cumulative ex-post regret across transcripts, each against its own
/// instance.
pub fn bayes_regret(transcripts: &[Transcript]) -> Result<RegretCurve> {
    let curves = transcripts.iter().map(|t| cumulative(t, t.instance())).collect();
    RegretCurve::from_curves(curves, false)
}

/// Mean over transcripts of the mean `μ_{I_t}` over rounds `from..=to`
/// (one-based), with its standard error across transcripts.
pub fn avg_reward_window(transcripts: &[Transcript], from: u64, to: u64) -> Result<Moments> {
    if from == 0 || from > to {
        return Err(Error::EmptyWindow { from, to });
    }
    if transcripts.is_empty() {
        return Err(Error::param("transcripts", "need at least one transcript"));
    }
    transcripts
        .iter()
        .map(|t| {
            if to as usize > t.len() {
                return Err(Error::EmptyWindow { from, to });
            }
            let sum: f64 = (from..=to).map(|s| t.mean_at(s as usize)).sum();
            Ok(sum / (to - from + 1) as f64)
        })
        .collect()
}
