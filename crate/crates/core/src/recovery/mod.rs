//! Recovery of transmitted mixtures from array observations.

pub mod filter;
pub mod oracle;
pub mod programs;

use crate::affinity::AffinityMatrix;
use crate::channel::ReceptionConfig;
use crate::design::MixtureBook;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub use filter::{
    build_filter_bank, detect_release_events, matched_filter, MatchedFilterBank, ReleaseDetection,
};
pub use oracle::{brute_force_sparse_oracle, expected_output, OracleResult};
pub use programs::{
    build_op1, build_op2, check_constraints, solve_op1, solve_op2, ConstraintReport, Program,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub solver_tol: f64,
    pub max_iters: usize,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            epsilon: 3.0,
            delta: 3.0,
            solver_tol: 1e-7,
            max_iters: 200,
        }
    }
}

impl RecoveryConfig {
    /// Tied thresholds, `delta = epsilon`.
    pub fn tied(epsilon: f64) -> Self {
        Self {
            epsilon,
            delta: epsilon,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.delta > 0.0 && self.solver_tol > 0.0 && self.max_iters > 0)
        {
            return Err(Error::InvalidParam(
                "epsilon, delta, solver_tol and max_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryEstimate {
    pub x_hat: Vec<f64>,
    pub w_hat: Vec<f64>,
    pub active_set: Vec<usize>,
    pub status: RecoveryStatus,
}

/// Receptors with strictly positive output, and the rest.
pub fn split_active(y: &[f64]) -> (Vec<usize>, Vec<usize>) {
    (0..y.len()).partition(|&r| y[r] > 0.0)
}

/// Index of the largest entry, lowest index on ties. `None` for an empty slice.
pub fn detect_peak_mixture(w_hat: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in w_hat.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// One-hot decision vector for the peak mixture.
pub fn one_hot(len: usize, index: usize) -> Vec<u8> {
    let mut v = vec![0; len];
    v[index] = 1;
    v
}

/// Below this the stage-one estimate is treated as "nothing transmitted".
pub const EMPTY_DETECTION_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEstimate {
    /// Solution over the full reception matrix.
    pub stage1: RecoveryEstimate,
    /// Final estimate, `w_hat` indexed over all mixtures.
    pub refined: RecoveryEstimate,
    pub tx: Option<usize>,
    /// Set when the restricted problem failed and the stage-one estimate
    /// was kept.
    pub fell_back: bool,
}

/// Two-stage recovery: solve with every mixture, take the owner of the
/// strongest mixture as the active transmitter, and re-solve with only that
/// transmitter's columns.
pub fn solve_op2_adaptive(
    y: &[f64],
    a: &AffinityMatrix,
    book: &MixtureBook,
    cfg: &ReceptionConfig,
    rcfg: &RecoveryConfig,
) -> Result<AdaptiveEstimate> {
    let stage1 = solve_op2(y, a, book.reception(), cfg, rcfg)?;
    refine(y, a, book, cfg, rcfg, stage1)
}

/// Second stage of [`solve_op2_adaptive`] given an existing stage-one result.
pub fn refine(
    y: &[f64],
    a: &AffinityMatrix,
    book: &MixtureBook,
    cfg: &ReceptionConfig,
    rcfg: &RecoveryConfig,
    stage1: RecoveryEstimate,
) -> Result<AdaptiveEstimate> {
    let keep = |stage1: RecoveryEstimate, fell_back| AdaptiveEstimate {
        refined: stage1.clone(),
        stage1,
        tx: None,
        fell_back,
    };
    if stage1.status != RecoveryStatus::Optimal {
        return Ok(keep(stage1, false));
    }
    let peak = detect_peak_mixture(&stage1.w_hat).expect("book has mixtures");
    if stage1.w_hat[peak] < EMPTY_DETECTION_FLOOR {
        return Ok(keep(stage1, false));
    }
    let k = book.owner(peak);
    let range = book.tx_range(k);
    let sub = solve_op2(y, a, &book.reception_for_tx(k), cfg, rcfg)?;
    if sub.status != RecoveryStatus::Optimal {
        let mut out = keep(stage1, true);
        out.tx = Some(k);
        return Ok(out);
    }
    let mut w_hat = vec![0.0; book.num_mixtures()];
    w_hat[range].copy_from_slice(&sub.w_hat);
    Ok(AdaptiveEstimate {
        stage1,
        refined: RecoveryEstimate { w_hat, ..sub },
        tx: Some(k),
        fell_back: false,
    })
}
