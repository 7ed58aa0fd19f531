//! Multi-sample pipeline: temporal channel, per-sample adaptive recovery,
//! matched filtering and release detection.

use super::Experiment;
use crate::channel::{expected_arrivals, receive, relu, sample_arrivals, ReleaseEvent};
use crate::error::{Error, Result};
use crate::recovery::{
    build_filter_bank, detect_release_events, matched_filter, solve_op2_adaptive, RecoveryConfig,
    RecoveryStatus, EMPTY_DETECTION_FLOOR,
};
use crate::rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Stream reserved for trace noise so traces do not share draws with trials.
const TRACE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedRelease {
    pub mixture: usize,
    /// 0-based sample index of the filter peak.
    pub sample: usize,
    pub time_s: f64,
    pub value: f64,
}

/// Every intermediate series of one trace, indexed `[sample][...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub delta_t: f64,
    pub schedule: Vec<ReleaseEvent>,
    /// Released amount per mixture in the sampling interval of the release.
    pub u: Vec<Vec<f64>>,
    pub x_bar: Vec<Vec<f64>>,
    pub x: Vec<Vec<u64>>,
    pub y: Vec<Vec<f64>>,
    pub x_hat: Vec<Vec<f64>>,
    pub w_hat: Vec<Vec<f64>>,
    /// Matched-filter output per sample and mixture.
    pub w_flr: Vec<Vec<f64>>,
    pub tx: Vec<Option<usize>>,
    pub status: Vec<RecoveryStatus>,
    pub events: Vec<DetectedRelease>,
}

/// Runs `config.reception.n_samples` samples of the schedule. With
/// `deterministic` set, arrivals are the rounded expectations and the
/// receptor noise is replaced by its mean.
pub fn run_trace(
    exp: &Experiment,
    schedule: &[ReleaseEvent],
    deterministic: bool,
) -> Result<TraceBundle> {
    let cfg = &exp.config;
    let rc = &cfg.reception;
    let n = rc.n_samples;
    if n == 0 {
        return Err(Error::InvalidParam(
            "trace needs at least one sample".into(),
        ));
    }
    let m = exp.book.num_mixtures();
    if let Some(ev) = schedule
        .iter()
        .find(|e| e.mixture_id >= m || !(e.release_time >= 0.0))
    {
        return Err(Error::InvalidParam(format!(
            "schedule entry {} at {} s is out of range",
            ev.mixture_id, ev.release_time
        )));
    }
    let mut r = rng::stream(cfg.seed, TRACE_STREAM);
    let rcfg = RecoveryConfig {
        epsilon: cfg.trace.epsilon,
        delta: cfg.trace.epsilon,
        ..cfg.recovery
    };
    let mut out = TraceBundle {
        delta_t: rc.delta_t,
        schedule: schedule.to_vec(),
        u: vec![vec![0.0; m]; n],
        x_bar: Vec::with_capacity(n),
        x: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        x_hat: Vec::with_capacity(n),
        w_hat: Vec::with_capacity(n),
        w_flr: Vec::new(),
        tx: Vec::with_capacity(n),
        status: Vec::with_capacity(n),
        events: Vec::new(),
    };
    for ev in schedule {
        let k = (ev.release_time / rc.delta_t).floor() as usize;
        if k < n {
            out.u[k][ev.mixture_id] += ev.n_rls;
        }
    }
    for j in 1..=n {
        let x_bar = expected_arrivals(schedule, exp.book.construction(), &exp.channels, rc, j)?;
        let (x, y) = if deterministic {
            let x: Vec<u64> = x_bar.iter().map(|v| v.round() as u64).collect();
            let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let y = exp
                .affinity
                .apply(&xf)
                .into_iter()
                .map(|p| relu(p + rc.lambda_r, rc.x_thr))
                .collect();
            (x, y)
        } else {
            let x = sample_arrivals(&x_bar, &mut r);
            let y = receive(&exp.affinity, &x, rc, &mut r);
            (x, y)
        };
        let est = solve_op2_adaptive(&y, &exp.affinity, &exp.book, rc, &rcfg)?;
        out.x_bar.push(x_bar);
        out.x.push(x);
        out.y.push(y);
        out.x_hat.push(est.refined.x_hat);
        out.w_hat.push(est.refined.w_hat);
        out.tx.push(est.tx);
        out.status.push(est.refined.status);
    }
    let bank = build_filter_bank(
        exp.book.construction(),
        &exp.channels,
        rc.delta_t,
        cfg.trace.support_epsilon,
    )?;
    // solver residue below the detection floor is not a release
    let series: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            out.w_hat
                .iter()
                .map(|w| {
                    if w[i] >= EMPTY_DETECTION_FLOOR {
                        w[i]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let filtered = matched_filter(&series, &bank)?;
    out.w_flr = (0..n)
        .map(|j| filtered.iter().map(|f| f[j]).collect())
        .collect();
    out.events =
        detect_release_events(&filtered, cfg.trace.rel_threshold, cfg.trace.min_separation)
            .into_iter()
            .map(|d| DetectedRelease {
                mixture: d.mixture,
                sample: d.sample,
                time_s: d.sample as f64 * rc.delta_t,
                value: d.value,
            })
            .collect();
    Ok(out)
}

pub fn run_multisample(exp: &Experiment, schedule: &[ReleaseEvent]) -> Result<TraceBundle> {
    run_trace(exp, schedule, false)
}

/// Releases of the two-event demonstration: transmitter 1's first mixture at
/// zero and its second four seconds later.
pub fn demo_schedule(exp: &Experiment) -> Vec<ReleaseEvent> {
    [(0usize, 0.0), (1usize, 4.0)]
        .into_iter()
        .map(|(mixture_id, release_time)| ReleaseEvent {
            mixture_id,
            release_time,
            n_rls: exp.config.n_rls,
        })
        .collect()
}

/// Schedule CSV with header `mixture_id,release_time_s`; ids are 0-based
/// global mixture indices.
pub fn read_schedule(path: &Path, n_rls: f64) -> Result<Vec<ReleaseEvent>> {
    #[derive(Deserialize)]
    struct Row {
        mixture_id: usize,
        release_time_s: f64,
    }
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    rd.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(ReleaseEvent {
                mixture_id: row.mixture_id,
                release_time: row.release_time_s,
                n_rls,
            })
        })
        .collect()
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl TraceBundle {
    pub fn num_samples(&self) -> usize {
        self.y.len()
    }

    /// Long-format CSV files keyed by name: per mixture, per molecule, per
    /// receptor and the detected events.
    pub fn to_csv(&self) -> Vec<(&'static str, String)> {
        let n = self.num_samples();
        let time = |j: usize| j as f64 * self.delta_t;
        let mut mix = String::from("sample,time_s,mixture,u,w_hat,w_flr,tx,status\n");
        let mut mol = String::from("sample,time_s,molecule,x_bar,x,x_hat\n");
        let mut arr = String::from("sample,time_s,receptor,y\n");
        for j in 0..n {
            let tx = self.tx[j].map_or(String::new(), |k| k.to_string());
            let status = serde_json::to_value(self.status[j])
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            for i in 0..self.u[j].len() {
                mix.push_str(&join([
                    j.to_string(),
                    time(j).to_string(),
                    i.to_string(),
                    self.u[j][i].to_string(),
                    self.w_hat[j][i].to_string(),
                    self.w_flr[j][i].to_string(),
                    tx.clone(),
                    status.clone(),
                ]));
                mix.push('\n');
            }
            for q in 0..self.x_bar[j].len() {
                mol.push_str(&join([
                    j.to_string(),
                    time(j).to_string(),
                    q.to_string(),
                    self.x_bar[j][q].to_string(),
                    self.x[j][q].to_string(),
                    self.x_hat[j][q].to_string(),
                ]));
                mol.push('\n');
            }
            for (k, v) in self.y[j].iter().enumerate() {
                arr.push_str(&join([
                    j.to_string(),
                    time(j).to_string(),
                    k.to_string(),
                    v.to_string(),
                ]));
                arr.push('\n');
            }
        }
        let mut ev = String::from("mixture,sample,time_s,value\n");
        for e in &self.events {
            ev.push_str(&join([
                e.mixture.to_string(),
                e.sample.to_string(),
                e.time_s.to_string(),
                e.value.to_string(),
            ]));
            ev.push('\n');
        }
        vec![
            ("trace_mixtures.csv", mix),
            ("trace_molecules.csv", mol),
            ("trace_array.csv", arr),
            ("trace_events.csv", ev),
        ]
    }
}
