//! Single-sample Monte Carlo estimation of the mixture detection error.

use super::config::Variant;
use super::stats::{wilson, Z95};
use super::Experiment;
use crate::channel::observe;
use crate::design::{random_book, MixtureBook};
use crate::error::{Error, Result};
use crate::recovery::{
    detect_peak_mixture, refine, solve_op2, RecoveryConfig, RecoveryEstimate, RecoveryStatus,
    EMPTY_DETECTION_FLOOR,
};
use crate::rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Keeps the random-book trials on streams disjoint from the optimized ones.
const RANDOM_FAMILY: u64 = 0x5851_f42d_4c95_7f2d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub planted: usize,
    pub tx: usize,
    /// Detected mixture; `None` when the solve failed or nothing was detected.
    pub s_hat: Option<usize>,
    pub status: RecoveryStatus,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeEstimate {
    pub trials: usize,
    pub errors: usize,
    pub pe: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub records: Vec<TrialRecord>,
}

impl PeEstimate {
    pub fn from_records(records: Vec<TrialRecord>) -> Self {
        let trials = records.len();
        let errors = records.iter().filter(|r| !r.correct).count();
        let (ci_lo, ci_hi) = wilson(errors, trials, Z95);
        Self {
            trials,
            errors,
            pe: errors as f64 / trials.max(1) as f64,
            ci_lo,
            ci_hi,
            records,
        }
    }

    pub fn count(&self, status: RecoveryStatus) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }
}

fn decide(est: &RecoveryEstimate) -> Option<usize> {
    if est.status != RecoveryStatus::Optimal {
        return None;
    }
    detect_peak_mixture(&est.w_hat).filter(|&m| est.w_hat[m] >= EMPTY_DETECTION_FLOOR)
}

fn record(trial: usize, planted: usize, book: &MixtureBook, est: &RecoveryEstimate) -> TrialRecord {
    let s_hat = decide(est);
    TrialRecord {
        trial,
        planted,
        tx: book.owner(planted),
        s_hat,
        status: est.status,
        correct: s_hat == Some(planted),
    }
}

/// One trial; returns the (non-adaptive, adaptive) records that were asked for.
fn trial(
    exp: &Experiment,
    rcfg: &RecoveryConfig,
    index: usize,
    optimized: bool,
    want: (bool, bool),
) -> Result<(Option<TrialRecord>, Option<TrialRecord>)> {
    let cfg = &exp.config;
    let family = if optimized {
        cfg.seed
    } else {
        cfg.seed ^ RANDOM_FAMILY
    };
    let mut r = rng::stream(family, index as u64);
    let drawn;
    let book = if optimized {
        &exp.book
    } else {
        drawn = random_book(
            &mut r,
            cfg.book.k,
            cfg.book.q_tx,
            cfg.book.alphabet_size,
            exp.book.gammas().to_vec(),
            cfg.book.x_bar_mix,
        )?;
        &drawn
    };
    let planted = r.random_range(0..book.num_mixtures());
    let x_bar: Vec<f64> = (0..book.num_molecules())
        .map(|q| book.reception()[(q, planted)] * cfg.book.x_bar_mix)
        .collect();
    let obs = observe(&exp.affinity, &x_bar, &cfg.reception, &mut r);
    let stage1 = solve_op2(
        &obs.y,
        &exp.affinity,
        book.reception(),
        &cfg.reception,
        rcfg,
    )?;
    let plain = want.0.then(|| record(index, planted, book, &stage1));
    let adaptive = if want.1 {
        let ad = refine(&obs.y, &exp.affinity, book, &cfg.reception, rcfg, stage1)?;
        Some(record(index, planted, book, &ad.refined))
    } else {
        None
    };
    Ok((plain, adaptive))
}

/// Runs the configured number of trials once and scores the requested
/// receivers on the same observations. The adaptive receiver reuses the
/// non-adaptive solve as its first stage.
pub fn run_point(
    exp: &Experiment,
    rcfg: &RecoveryConfig,
    optimized: bool,
    want: (bool, bool),
) -> Result<(Option<PeEstimate>, Option<PeEstimate>)> {
    let out: Vec<(Option<TrialRecord>, Option<TrialRecord>)> = (0..exp.config.trials)
        .into_par_iter()
        .map(|i| trial(exp, rcfg, i, optimized, want))
        .collect::<Result<_>>()?;
    let (plain, adaptive): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    let plain: Vec<TrialRecord> = plain.into_iter().flatten().collect();
    let adaptive: Vec<TrialRecord> = adaptive.into_iter().flatten().collect();
    Ok((
        want.0.then(|| PeEstimate::from_records(plain)),
        want.1.then(|| PeEstimate::from_records(adaptive)),
    ))
}

pub fn run_single_sample(
    exp: &Experiment,
    rcfg: &RecoveryConfig,
    adaptive: bool,
    optimized_mixtures: bool,
) -> Result<PeEstimate> {
    let (p, a) = run_point(exp, rcfg, optimized_mixtures, (!adaptive, adaptive))?;
    Ok(p.or(a).expect("one receiver requested"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub delta: f64,
    pub variant: Variant,
    pub trials: usize,
    pub errors: usize,
    pub pe: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Every grid point of `config.epsilon_grid` for every configured variant,
/// grid-major in configuration order.
pub fn sweep_epsilon(exp: &Experiment) -> Result<Vec<SweepRow>> {
    let cfg = &exp.config;
    if cfg.epsilon_grid.is_empty() {
        return Err(Error::InvalidParam("empty epsilon grid".into()));
    }
    let mut rows = Vec::with_capacity(cfg.epsilon_grid.len() * cfg.variants.len());
    for i in 0..cfg.epsilon_grid.len() {
        let rcfg = cfg.recovery_at(i);
        let mut point = Vec::new();
        for optimized in [true, false] {
            let want_plain = cfg
                .variants
                .iter()
                .any(|v| v.optimized() == optimized && !v.adaptive());
            let want_adaptive = cfg
                .variants
                .iter()
                .any(|v| v.optimized() == optimized && v.adaptive());
            if !(want_plain || want_adaptive) {
                continue;
            }
            let (p, a) = run_point(exp, &rcfg, optimized, (want_plain, want_adaptive))?;
            point.extend(p.map(|e| (optimized, false, e)));
            point.extend(a.map(|e| (optimized, true, e)));
        }
        for &v in &cfg.variants {
            let (_, _, e) = point
                .iter()
                .find(|(o, ad, _)| *o == v.optimized() && *ad == v.adaptive())
                .expect("variant was run");
            rows.push(SweepRow {
                epsilon: rcfg.epsilon,
                delta: rcfg.delta,
                variant: v,
                trials: e.trials,
                errors: e.errors,
                pe: e.pe,
                ci_lo: e.ci_lo,
                ci_hi: e.ci_hi,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "epsilon,variant,trials,errors,pe,ci_lo,ci_hi";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.epsilon,
            r.variant.name(),
            r.trials,
            r.errors,
            r.pe,
            r.ci_lo,
            r.ci_hi
        ));
    }
    s
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(sweep_csv(rows).as_bytes())?;
    Ok(())
}

/// Rows of one variant in grid order.
pub fn curve(rows: &[SweepRow], variant: Variant) -> Vec<&SweepRow> {
    rows.iter().filter(|r| r.variant == variant).collect()
}

/// Smallest error rate on a curve and the epsilon attaining it. When several
/// grid points tie, the geometric centre of the tied points is reported.
pub fn best_epsilon(curve: &[&SweepRow]) -> Option<(f64, f64)> {
    let pe = curve.iter().map(|r| r.pe).fold(f64::INFINITY, f64::min);
    let tied: Vec<f64> = curve
        .iter()
        .filter(|r| r.pe == pe)
        .map(|r| r.epsilon.ln())
        .collect();
    if tied.is_empty() {
        return None;
    }
    Some(((tied.iter().sum::<f64>() / tied.len() as f64).exp(), pe))
}

/// True when the minimum lies strictly below both end points of the curve.
pub fn has_interior_minimum(curve: &[&SweepRow]) -> bool {
    if curve.len() < 3 {
        return false;
    }
    let inner = curve[1..curve.len() - 1]
        .iter()
        .map(|r| r.pe)
        .fold(f64::INFINITY, f64::min);
    inner < curve[0].pe && inner < curve[curve.len() - 1].pe
}
