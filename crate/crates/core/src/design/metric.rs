//! Monte Carlo dissimilarity between mixtures.
//!
//! For two mixtures with array outputs `y_m`, `y_m'` the metric is
//! `|E y_m - E y_m'|^2 / (Var p^T y_m + Var p^T y_m')` in dB, where `p` is the
//! unit vector along the mean difference.

use super::Mixture;
use crate::affinity::AffinityMatrix;
use crate::channel::{relu, ReceptionConfig};
use crate::error::{Error, Result};
use crate::{poisson, rng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How a mixture's expected molecule count is spread over its constituents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcentrationProfile {
    /// Constituents share `x_bar_mix` equally, so the total is `x_bar_mix`.
    #[default]
    SplitTotal,
    /// Every constituent is present at `x_bar_mix`.
    PerConstituent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub x_bar_mix: f64,
    pub mc: usize,
    pub seed: u64,
    pub profile: ConcentrationProfile,
}

impl MetricConfig {
    pub fn new(x_bar_mix: f64, mc: usize, seed: u64, profile: ConcentrationProfile) -> Self {
        Self {
            x_bar_mix,
            mc,
            seed,
            profile,
        }
    }
}

/// Expected count per molecule type with the total split evenly over the
/// constituents.
pub fn mixture_expected_concentration(mix: &Mixture, q: usize, x_bar_mix: f64) -> Result<Vec<f64>> {
    profile_concentration(mix, q, x_bar_mix, ConcentrationProfile::SplitTotal)
}

pub fn profile_concentration(
    mix: &Mixture,
    q: usize,
    x_bar_mix: f64,
    profile: ConcentrationProfile,
) -> Result<Vec<f64>> {
    if mix.is_empty() {
        return Err(Error::EmptyMixture);
    }
    if !(x_bar_mix > 0.0) {
        return Err(Error::InvalidParam("x_bar_mix must be positive".into()));
    }
    if mix.constituents().iter().any(|&c| c >= q) {
        return Err(Error::Dimension(format!("mixture {mix} exceeds Q = {q}")));
    }
    let per = match profile {
        ConcentrationProfile::SplitTotal => x_bar_mix / mix.len() as f64,
        ConcentrationProfile::PerConstituent => x_bar_mix,
    };
    let mut out = vec![0.0; q];
    for &c in mix.constituents() {
        out[c] = per;
    }
    Ok(out)
}

/// First and second sample moments of one mixture's array output.
#[derive(Debug, Clone)]
pub struct ResponseMoments {
    pub mean: Vec<f64>,
    /// Unbiased covariance, row-major R x R.
    pub cov: Vec<f64>,
}

/// Stream id tied to the mixture's content so every table and every pair
/// order sees the same samples for a given mixture.
fn mixture_stream(mix: &Mixture) -> u64 {
    // FNV-1a over the constituent indices
    let mut h: u64 = 0xcbf29ce484222325;
    for &c in mix.constituents() {
        for b in (c as u64).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

pub fn response_moments(
    a: &AffinityMatrix,
    mix: &Mixture,
    cfg: &ReceptionConfig,
    mc: &MetricConfig,
) -> Result<ResponseMoments> {
    if mc.mc < 2 {
        return Err(Error::InvalidParam("need at least two realizations".into()));
    }
    let q = a.molecules();
    let r = a.receptors();
    let conc = profile_concentration(mix, q, mc.x_bar_mix, mc.profile)?;
    let mut rng = rng::stream(mc.seed, mixture_stream(mix));
    let cols: Vec<(f64, Vec<f64>)> = mix
        .constituents()
        .iter()
        .map(|&c| (conc[c], a.column(c)))
        .collect();
    let mut mean = vec![0.0; r];
    let mut m2 = vec![0.0; r * r];
    let mut y = vec![0.0; r];
    let mut delta = vec![0.0; r];
    for n in 1..=mc.mc {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (lam, col) in &cols {
            let k = poisson::sample(&mut rng, *lam) as f64;
            for (yi, ci) in y.iter_mut().zip(col) {
                *yi += k * ci;
            }
        }
        for yi in y.iter_mut() {
            *yi = relu(
                *yi + poisson::sample(&mut rng, cfg.lambda_r) as f64,
                cfg.x_thr,
            );
        }
        // Welford update of mean and co-moment
        let inv = 1.0 / n as f64;
        for i in 0..r {
            delta[i] = y[i] - mean[i];
            mean[i] += delta[i] * inv;
        }
        for i in 0..r {
            let di = delta[i];
            let yi_new = y[i] - mean[i];
            for j in 0..r {
                m2[i * r + j] += di * (y[j] - mean[j]) * 0.5 + delta[j] * yi_new * 0.5;
            }
        }
    }
    let denom = (mc.mc - 1) as f64;
    let cov = m2.iter().map(|v| v / denom).collect();
    Ok(ResponseMoments { mean, cov })
}

/// Metric in dB from two moment sets; `-inf` when the means coincide.
pub fn dissimilarity_from_moments(a: &ResponseMoments, b: &ResponseMoments) -> f64 {
    let r = a.mean.len();
    let diff: Vec<f64> = a.mean.iter().zip(&b.mean).map(|(x, y)| x - y).collect();
    let num: f64 = diff.iter().map(|v| v * v).sum();
    if num < 1e-12 {
        return f64::NEG_INFINITY;
    }
    let p: Vec<f64> = diff.iter().map(|v| v / num.sqrt()).collect();
    let quad = |cov: &[f64]| {
        let mut s = 0.0;
        for i in 0..r {
            for j in 0..r {
                s += p[i] * cov[i * r + j] * p[j];
            }
        }
        s
    };
    let den = quad(&a.cov) + quad(&b.cov);
    10.0 * (num / den).log10()
}

pub fn dissimilarity(
    a: &AffinityMatrix,
    m1: &Mixture,
    m2: &Mixture,
    cfg: &ReceptionConfig,
    mc: &MetricConfig,
) -> Result<f64> {
    let s1 = response_moments(a, m1, cfg, mc)?;
    let s2 = response_moments(a, m2, cfg, mc)?;
    Ok(dissimilarity_from_moments(&s1, &s2))
}

/// Pairwise metrics over a mixture list; the diagonal is NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityTable {
    pub mixtures: Vec<Mixture>,
    values: Vec<f64>,
    pub mc_realizations: usize,
    pub seed: u64,
}

impl DissimilarityTable {
    /// Builds a table directly from values, for synthetic tests.
    pub fn from_values(mixtures: Vec<Mixture>, values: Vec<Vec<f64>>) -> Result<Self> {
        let n = mixtures.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(
                "table must be square over the mixtures".into(),
            ));
        }
        let mut flat = vec![f64::NAN; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    if values[i][j] != values[j][i]
                        && !(values[i][j].is_nan() && values[j][i].is_nan())
                    {
                        return Err(Error::InvalidParam("table must be symmetric".into()));
                    }
                    flat[i * n + j] = values[i][j];
                }
            }
        }
        Ok(Self {
            mixtures,
            values: flat,
            mc_realizations: 0,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.mixtures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixtures.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn index_of(&self, mix: &Mixture) -> Option<usize> {
        self.mixtures.iter().position(|m| m == mix)
    }
}

/// Fills a table. Each mixture is simulated once and reused for all its pairs.
pub fn dissimilarity_table(
    a: &AffinityMatrix,
    mixtures: &[Mixture],
    cfg: &ReceptionConfig,
    mc: &MetricConfig,
) -> Result<DissimilarityTable> {
    let moments = mixtures
        .par_iter()
        .map(|m| response_moments(a, m, cfg, mc))
        .collect::<Result<Vec<_>>>()?;
    let n = mixtures.len();
    let mut values = vec![f64::NAN; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dissimilarity_from_moments(&moments[i], &moments[j]);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DissimilarityTable {
        mixtures: mixtures.to_vec(),
        values,
        mc_realizations: mc.mc,
        seed: mc.seed,
    })
}
