//! Checks that a reduction's recorded predictions equal the wrapped
//! algorithm's own predictions one phase earlier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Transcript;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingCheck {
    /// Rounds compared (all `t > c + L`).
    pub checked: u64,
    /// Rounds whose prediction differed.
    pub mismatches: Vec<u64>,
}

impl CouplingCheck {
    pub fn is_coupled(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares `prediction(t)` of the reduction with the wrapped run's
/// prediction at round `⌊(t − c)/L⌋` for every `t > c + L`.
pub fn check_prediction_coupling(reduction: &Transcript, wrapped: &Transcript, c: u64, l: u64) -> Result<CouplingCheck> {
    check_prediction_coupling_with(reduction, wrapped, c, l, |t| (t - c) / l)
}

/// As [`check_prediction_coupling`] with an arbitrary round map.
pub fn check_prediction_coupling_with<F>(
    reduction: &Transcript,
    wrapped: &Transcript,
    c: u64,
    l: u64,
    map: F,
) -> Result<CouplingCheck>
where
    F: Fn(u64) -> u64,
{
    if l == 0 {
        return Err(Error::param("L", "must be at least 1"));
    }
    if reduction.seed() != wrapped.seed() {
        return Err(Error::CouplingNotConfigured(format!(
            "reduction seed {:?} differs from wrapped seed {:?}",
            reduction.seed(),
            wrapped.seed()
        )));
    }
    let mut out = CouplingCheck {
        checked: 0,
        mismatches: Vec::new(),
    };
    for row in reduction.rows().iter().filter(|r| r.round > c + l) {
        let s = map(row.round);
        let theirs = wrapped
            .rows()
            .get((s as usize).wrapping_sub(1))
            .and_then(|r| r.prediction);
        let (Some(ours), Some(theirs)) = (row.prediction, theirs) else {
            return Err(Error::CouplingNotConfigured(format!(
                "no prediction to compare at round {} (wrapped round {s})",
                row.round
            )));
        };
        out.checked += 1;
        if ours != theirs {
            out.mismatches.push(row.round);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ArmId, MabInstance, Prediction, Role, SeedRecord, Slot, Stage};

    fn transcript(preds: &[u32], seed: u64) -> Transcript {
        let mut t = Transcript::new(MabInstance::new(vec![0.5, 0.4]).unwrap(), SeedRecord { root: seed, replicate: 0 });
        for &p in preds {
            t.push(None, ArmId::FIRST, 0.0, None, Some(Prediction::Policy(p)), Slot::new(Stage::Standalone, 0, Role::Fixed));
        }
        t
    }

    #[test]
    fn lag_is_respected() {
        // c = 2, L = 2: rounds 5.. map to wrapped rounds 1, 2, 2, 3.
        let wrapped = transcript(&[10, 20, 30], 1);
        let red = transcript(&[0, 0, 0, 0, 10, 20, 20, 30], 1);
        let ok = check_prediction_coupling(&red, &wrapped, 2, 2).unwrap();
        assert!(ok.is_coupled());
        assert_eq!(ok.checked, 4);
        let off = check_prediction_coupling_with(&red, &wrapped, 2, 2, |t| (t - 2) / 2 + 1);
        assert!(off.map(|c| !c.is_coupled()).unwrap_or(true));
    }

    #[test]
    fn early_rounds_are_excluded() {
        let wrapped = transcript(&[10], 1);
        let red = transcript(&[99, 99, 99, 99], 1);
        assert_eq!(check_prediction_coupling(&red, &wrapped, 2, 2).unwrap().checked, 0);
    }

    #[test]
    fn uncoupled_seeds_are_reported() {
        let wrapped = transcript(&[10], 1);
        let red = transcript(&[0, 0, 0, 0, 10], 2);
        assert!(matches!(
            check_prediction_coupling(&red, &wrapped, 2, 2),
            Err(Error::CouplingNotConfigured(_))
        ));
    }
}
