//! Matched filtering of per-sample mixture estimates and release detection.

use crate::channel::ChannelResponse;
use crate::error::{Error, Result};
use mmsk_conic::Matrix;
use serde::{Deserialize, Serialize};

/// Anticausal taps per mixture: `taps[m][l]` multiplies the sample `l` steps
/// ahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedFilterBank {
    pub taps: Vec<Vec<f64>>,
    pub delta_t: f64,
}

/// Support of a sampled response: the first index past the peak where the
/// value drops below `support_epsilon` times the peak.
fn support_len(v: &[f64], support_epsilon: f64) -> usize {
    let (peak_idx, peak) =
        v.iter().enumerate().fold(
            (0, f64::MIN),
            |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc },
        );
    let cut = support_epsilon * peak;
    (peak_idx + 1..v.len())
        .find(|&l| v[l] < cut)
        .unwrap_or(v.len())
        .max(1)
}

impl MatchedFilterBank {
    /// Builds taps from per-type sampled responses `responses[q][k] = v_q(k dt)`.
    pub fn from_sampled(
        construction: &Matrix,
        responses: &[Vec<f64>],
        delta_t: f64,
        support_epsilon: f64,
    ) -> Result<Self> {
        let (q, m) = (construction.rows(), construction.cols());
        if responses.len() != q {
            return Err(Error::Dimension(format!(
                "{} responses for Q = {q}",
                responses.len()
            )));
        }
        let energy: Vec<f64> = responses
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum())
            .collect();
        let support: Vec<usize> = responses
            .iter()
            .map(|v| support_len(v, support_epsilon))
            .collect();
        let mut taps = Vec::with_capacity(m);
        for j in 0..m {
            let members: Vec<usize> = (0..q).filter(|&i| construction[(i, j)] != 0.0).collect();
            let len = members.iter().map(|&i| support[i]).max().unwrap_or(1);
            let mut f = vec![0.0; len];
            for &i in &members {
                if energy[i] == 0.0 {
                    continue;
                }
                let c = 1.0 / energy[i];
                for (l, fl) in f.iter_mut().enumerate() {
                    *fl += c * responses[i].get(l).copied().unwrap_or(0.0) * construction[(i, j)];
                }
            }
            taps.push(f);
        }
        Ok(Self { taps, delta_t })
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

/// Samples each channel finely enough that the normalizing energy converges.
fn sample_response(ch: &ChannelResponse, delta_t: f64) -> Vec<f64> {
    let peak = ch.peak_rate();
    let mut v = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * delta_t;
        let r = ch.rate(t);
        v.push(r);
        if (t > ch.peak_time() && r < 1e-12 * peak) || k >= 1_000_000 {
            break;
        }
        k += 1;
    }
    v
}

pub fn build_filter_bank(
    construction: &Matrix,
    channels: &[ChannelResponse],
    delta_t: f64,
    support_epsilon: f64,
) -> Result<MatchedFilterBank> {
    if !(delta_t > 0.0) {
        return Err(Error::InvalidParam("delta_t must be positive".into()));
    }
    let responses: Vec<Vec<f64>> = channels
        .iter()
        .map(|c| sample_response(c, delta_t))
        .collect();
    MatchedFilterBank::from_sampled(construction, &responses, delta_t, support_epsilon)
}

/// `out[m][j] = sum_l taps[m][l] * series[m][j + l]`, zero past the end.
pub fn matched_filter(series: &[Vec<f64>], bank: &MatchedFilterBank) -> Result<Vec<Vec<f64>>> {
    if series.len() != bank.len() {
        return Err(Error::Dimension(format!(
            "{} series for {} filters",
            series.len(),
            bank.len()
        )));
    }
    Ok(series
        .iter()
        .zip(&bank.taps)
        .map(|(s, f)| {
            (0..s.len())
                .map(|j| f.iter().zip(&s[j..]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseDetection {
    pub mixture: usize,
    pub sample: usize,
    pub value: f64,
}

/// Local maxima of the filtered series that reach `rel_threshold` of the
/// overall maximum, thinned so that no two detections (of any mixtures) lie
/// closer than `min_separation` samples. Stronger peaks win.
pub fn detect_release_events(
    filtered: &[Vec<f64>],
    rel_threshold: f64,
    min_separation: usize,
) -> Vec<ReleaseDetection> {
    let global = filtered
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(global > 0.0) {
        return Vec::new();
    }
    let floor = rel_threshold * global;
    let mut cands = Vec::new();
    for (m, s) in filtered.iter().enumerate() {
        for j in 0..s.len() {
            let v = s[j];
            let left_ok = j == 0 || v > s[j - 1];
            let right_ok = j + 1 == s.len() || v >= s[j + 1];
            if v > 0.0 && v >= floor && left_ok && right_ok {
                cands.push(ReleaseDetection {
                    mixture: m,
                    sample: j,
                    value: v,
                });
            }
        }
    }
    cands.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then(a.mixture.cmp(&b.mixture))
            .then(a.sample.cmp(&b.sample))
    });
    let mut kept: Vec<ReleaseDetection> = Vec::new();
    for c in cands {
        if kept
            .iter()
            .all(|k| k.sample.abs_diff(c.sample) >= min_separation)
        {
            kept.push(c);
        }
    }
    kept.sort_by_key(|k| (k.sample, k.mixture));
    kept
}
