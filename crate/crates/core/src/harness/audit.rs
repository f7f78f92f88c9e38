//! Empirical check of the incentive constraint `E[μ_i − μ_j | I_t = i] ≥ 0`.
//!
//! Rounds are pooled by (stage, phase, context): within a phase every round
//! carries the same information structure. The estimate of a cell is the
//! ratio of summed gaps to event counts over replicates, with a delta-method
//! standard error that treats replicates (not events) as independent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Stage, Transcript};
use crate::priors::constants::chunked;
use crate::stats::z_two_sided;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditOptions {
    pub replicates: u64,
    pub epsilon: f64,
    /// Cells with fewer conditioning events are inconclusive.
    pub min_count: u64,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            replicates: 100_000,
            epsilon: 0.01,
            min_count: 200,
            confidence: 0.95,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub stage: Stage,
    pub phase: u32,
    pub context: Option<u32>,
    /// One-based recommended arm.
    pub arm: u32,
    /// One-based competitor arm.
    pub competitor: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCell {
    #[serde(flatten)]
    pub key: CellKey,
    pub count: u64,
    pub slack: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub verdict: Verdict,
    pub replicates: u64,
    pub epsilon: f64,
    pub min_count: u64,
    pub confidence: f64,
    pub cells: Vec<AuditCell>,
}

impl AuditReport {
    pub fn cell(&self, key: &CellKey) -> Option<&AuditCell> {
        self.cells.iter().find(|c| &c.key == key)
    }

    /// The conclusive cell with the lowest lower bound.
    pub fn worst(&self) -> Option<&AuditCell> {
        self.cells
            .iter()
            .filter(|c| c.verdict != Verdict::Inconclusive)
            .min_by(|a, b| a.lower.total_cmp(&b.lower))
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "stage", "phase", "context", "arm", "competitor", "count", "slack", "std_error", "lower", "upper", "verdict",
        ])?;
        for c in &self.cells {
            out.write_record([
                format!("{:?}", c.key.stage).to_lowercase(),
                c.key.phase.to_string(),
                c.key.context.map(|x| x.to_string()).unwrap_or_default(),
                c.key.arm.to_string(),
                c.key.competitor.to_string(),
                c.count.to_string(),
                c.slack.to_string(),
                c.std_error.to_string(),
                c.lower.to_string(),
                c.upper.to_string(),
                format!("{:?}", c.verdict).to_uppercase(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Sums over replicates of a cell's per-replicate gap total `S` and event
/// count `N`, with the second moments the ratio estimator needs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct CellAcc {
    n: f64,
    s: f64,
    ss: f64,
    nn: f64,
    sn: f64,
}

impl CellAcc {
    fn add_replicate(&mut self, s: f64, n: f64) {
        self.n += n;
        self.s += s;
        self.ss += s * s;
        self.nn += n * n;
        self.sn += s * n;
    }

    fn merge(&mut self, o: &CellAcc) {
        self.n += o.n;
        self.s += o.s;
        self.ss += o.ss;
        self.nn += o.nn;
        self.sn += o.sn;
    }
}

/// Running audit sums; replicates can be added in any grouping and merged
/// in a fixed order.
#[derive(Debug, Clone, Default)]
pub(crate) struct AuditAccumulator {
    cells: BTreeMap<CellKey, CellAcc>,
    replicates: u64,
}

impl AuditAccumulator {
    pub(crate) fn add(&mut self, t: &Transcript) {
        accumulate(t, &mut self.cells);
        self.replicates += 1;
    }

    pub(crate) fn merge(&mut self, other: AuditAccumulator) {
        for (k, v) in other.cells {
            self.cells.entry(k).or_default().merge(&v);
        }
        self.replicates += other.replicates;
    }

    pub(crate) fn finish(self, opts: &AuditOptions) -> AuditReport {
        finish(self.cells, self.replicates, opts)
    }
}

type Accs = BTreeMap<CellKey, CellAcc>;

fn accumulate(t: &Transcript, accs: &mut Accs) {
    let inst = t.instance();
    let m = inst.num_arms();
    let mut per: BTreeMap<CellKey, (f64, f64)> = BTreeMap::new();
    for (row, slot) in t.rows().iter().zip(t.slots()) {
        let x = row.context.unwrap_or(0);
        let i = row.recommendation;
        for j in 0..m {
            if j == i.index() {
                continue;
            }
            let key = CellKey {
                stage: slot.stage,
                phase: slot.phase,
                context: row.context,
                arm: i.number(),
                competitor: j as u32 + 1,
            };
            let gap = inst.mean_in(i, x) - inst.means()[x as usize * m + j];
            let e = per.entry(key).or_default();
            e.0 += gap;
            e.1 += 1.0;
        }
    }
    for (k, (s, n)) in per {
        accs.entry(k).or_default().add_replicate(s, n);
    }
}

fn finish(accs: Accs, replicates: u64, opts: &AuditOptions) -> AuditReport {
    let z = z_two_sided(opts.confidence);
    let r = replicates as f64;
    let cells: Vec<AuditCell> = accs
        .into_iter()
        .map(|(key, a)| {
            let est = a.s / a.n;
            let nbar = a.n / r;
            let d2 = (a.ss - 2.0 * est * a.sn + est * est * a.nn).max(0.0);
            let se = if replicates > 1 {
                (d2 / (r * (r - 1.0))).sqrt() / nbar
            } else {
                f64::INFINITY
            };
            let (lower, upper) = (est - z * se, est + z * se);
            let verdict = if (a.n as u64) < opts.min_count {
                Verdict::Inconclusive
            } else if lower >= -opts.epsilon {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            AuditCell {
                key,
                count: a.n as u64,
                slack: est,
                std_error: se,
                lower,
                upper,
                verdict,
            }
        })
        .collect();
    let verdict = if cells.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if cells.iter().any(|c| c.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    AuditReport {
        verdict,
        replicates,
        epsilon: opts.epsilon,
        min_count: opts.min_count,
        confidence: opts.confidence,
        cells,
    }
}

/// Audits already collected transcripts, one per replicate.
pub fn audit_transcripts(transcripts: &[Transcript], opts: &AuditOptions) -> Result<AuditReport> {
    if transcripts.is_empty() {
        return Err(Error::param("transcripts", "need at least one transcript"));
    }
    let mut acc = AuditAccumulator::default();
    for t in transcripts {
        acc.add(t);
    }
    Ok(acc.finish(opts))
}

/// Runs `run(replicate)` for `opts.replicates` replicates in parallel and
/// audits the transcripts as they are produced.
pub fn audit_bic<F>(opts: &AuditOptions, run: F) -> Result<AuditReport>
where
    F: Fn(u64) -> Result<Transcript> + Sync,
{
    if opts.replicates < 1000 {
        return Err(Error::param("replicates", "an audit needs at least 1000 replicates"));
    }
    if !(opts.epsilon >= 0.0) {
        return Err(Error::param("epsilon", "must be nonnegative"));
    }
    let acc = chunked(
        opts.replicates,
        |lo, hi| {
            let mut acc = AuditAccumulator::default();
            for r in lo..hi {
                acc.add(&run(r)?);
            }
            Ok(acc)
        },
        |acc: &mut AuditAccumulator, part| acc.merge(part),
    )?;
    Ok(acc.finish(opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmId, MabInstance, Role, SeedRecord, Slot};

    fn run(means: [f64; 2], arm: usize) -> Transcript {
        let mut t = Transcript::new(MabInstance::new(means.to_vec()).unwrap(), SeedRecord { root: 0, replicate: 0 });
        t.push(None, ArmId::from_index(arm), 0.0, None, None, Slot::new(Stage::Sampling, 1, Role::Fixed));
        t
    }

    #[test]
    fn ratio_estimate_and_verdicts() {
        let ts: Vec<Transcript> = (0..300).map(|r| run([0.5 + (r % 3) as f64 * 0.1, 0.5], 0)).collect();
        let opts = AuditOptions::default();
        let rep = audit_transcripts(&ts, &opts).unwrap();
        assert_eq!(rep.cells.len(), 1);
        let c = &rep.cells[0];
        assert_eq!(c.count, 300);
        assert!((c.slack - 0.1).abs() < 1e-12);
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn small_cells_are_inconclusive() {
        let ts: Vec<Transcript> = (0..50).map(|_| run([0.4, 0.6], 0)).collect();
        let rep = audit_transcripts(&ts, &AuditOptions::default()).unwrap();
        assert_eq!(rep.cells[0].verdict, Verdict::Inconclusive);
        assert_eq!(rep.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn negative_slack_fails() {
        let ts: Vec<Transcript> = (0..300).map(|_| run([0.4, 0.6], 0)).collect();
        let rep = audit_transcripts(&ts, &AuditOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!((rep.worst().unwrap().slack + 0.2).abs() < 1e-12);
    }

    #[test]
    fn audit_requires_enough_replicates() {
        let opts = AuditOptions {
            replicates: 10,
            ..Default::default()
        };
        assert!(audit_bic(&opts, |_| Ok(run([0.5, 0.4], 0))).is_err());
    }
}
