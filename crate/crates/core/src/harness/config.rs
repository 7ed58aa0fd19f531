//! Experiment configuration, defaulting to the reference system parameters.

use crate::affinity::{construct_affinity, load_fixture_affinity, AffinityMatrix, AffinityParams};
use crate::channel::{ChannelResponse, ReceptionConfig};
use crate::design::{self, ConcentrationProfile, DesignParams, MetricConfig, MixtureBook};
use crate::error::{Error, Result};
use crate::recovery::RecoveryConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AffinitySource {
    #[default]
    Fixture,
    Constructed {
        params: AffinityParams,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BookSource {
    /// The published allocation and alphabets for the example matrix.
    #[default]
    Reference,
    /// Run allocation and alphabet design on the configured matrix.
    Designed {
        mc: usize,
        profile: ConcentrationProfile,
        /// Signal level used for the metric tables.
        metric_x_bar_mix: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BookConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub q_tx: usize,
    pub m_mix: usize,
    pub alphabet_size: usize,
    /// Distinguishability threshold in dB; absent means no threshold.
    pub d_thr: Option<f64>,
    pub x_bar_mix: f64,
    pub source: BookSource,
}

impl Default for BookConfig {
    fn default() -> Self {
        Self {
            k: 4,
            q_tx: 4,
            m_mix: 3,
            alphabet_size: 4,
            d_thr: None,
            x_bar_mix: 50.0,
            source: BookSource::Reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ChannelConfig {
    pub default: ChannelResponse,
    /// Optional per-type responses; overrides `default` when present.
    pub per_type: Option<Vec<ChannelResponse>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Optimized,
    OptimizedAdaptive,
    Random,
    RandomAdaptive,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Optimized,
        Variant::OptimizedAdaptive,
        Variant::Random,
        Variant::RandomAdaptive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Optimized => "optimized",
            Variant::OptimizedAdaptive => "optimized-adaptive",
            Variant::Random => "random",
            Variant::RandomAdaptive => "random-adaptive",
        }
    }

    pub fn adaptive(self) -> bool {
        matches!(self, Variant::OptimizedAdaptive | Variant::RandomAdaptive)
    }

    pub fn optimized(self) -> bool {
        matches!(self, Variant::Optimized | Variant::OptimizedAdaptive)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    SingleSample,
    MultiSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    /// Reconstruction parameter used for every sample (`delta = epsilon`).
    pub epsilon: f64,
    pub support_epsilon: f64,
    pub rel_threshold: f64,
    pub min_separation: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            epsilon: 10f64.sqrt(),
            support_epsilon: 1e-3,
            rel_threshold: 0.5,
            min_separation: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaConfig {
    /// 1-based labels of the two molecule types.
    pub molecules: [usize; 2],
    /// Expected counts of the two types, one entry per cluster.
    pub cases: Vec<[f64; 2]>,
    /// Total realizations, split evenly over the cases.
    pub realizations: usize,
    /// Scale every receptor output to unit variance before the eigen
    /// decomposition.
    pub standardize: bool,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            molecules: [1, 2],
            cases: vec![
                [0.0, 0.0],
                [50.0, 0.0],
                [100.0, 0.0],
                [0.0, 50.0],
                [0.0, 100.0],
                [50.0, 50.0],
            ],
            realizations: 100_000,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub affinity: AffinitySource,
    pub book: BookConfig,
    pub channel: ChannelConfig,
    pub reception: ReceptionConfig,
    /// Solver settings; `epsilon` and `delta` are taken from the grids.
    pub recovery: RecoveryConfig,
    pub epsilon_grid: Vec<f64>,
    /// Separate delta values; absent means `delta = epsilon`.
    pub delta_grid: Option<Vec<f64>>,
    pub variants: Vec<Variant>,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Molecules per mixture release.
    pub n_rls: f64,
    pub trace: TraceConfig,
    pub pca: PcaConfig,
}

/// Nine log-spaced points from 10^-0.5 to 10^1.5.
pub fn default_epsilon_grid() -> Vec<f64> {
    (-2..=6).map(|k| 10f64.powf(k as f64 / 4.0)).collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            affinity: AffinitySource::Fixture,
            book: BookConfig::default(),
            channel: ChannelConfig::default(),
            reception: ReceptionConfig::default(),
            recovery: RecoveryConfig::default(),
            epsilon_grid: default_epsilon_grid(),
            delta_grid: None,
            variants: Variant::ALL.to_vec(),
            trials: 10_000,
            seed: 1,
            mode: Mode::SingleSample,
            n_rls: 1e5,
            trace: TraceConfig::default(),
            pca: PcaConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.into()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.epsilon_grid.is_empty() || self.epsilon_grid.iter().any(|e| !(*e > 0.0)) {
            return bad("epsilon grid must be nonempty and positive");
        }
        if let Some(d) = &self.delta_grid {
            if d.len() != self.epsilon_grid.len() || d.iter().any(|v| !(*v > 0.0)) {
                return bad("delta grid must match the epsilon grid and be positive");
            }
        }
        if self.book.alphabet_size == 0 {
            return bad("alphabet size must be positive");
        }
        if !(self.n_rls > 0.0) {
            return bad("n_rls must be positive");
        }
        if !(self.trace.epsilon > 0.0) {
            return bad("trace epsilon must be positive");
        }
        self.reception.check()
    }

    /// Recovery settings for grid point `i`.
    pub fn recovery_at(&self, i: usize) -> RecoveryConfig {
        let eps = self.epsilon_grid[i];
        let delta = self.delta_grid.as_ref().map_or(eps, |d| d[i]);
        RecoveryConfig {
            epsilon: eps,
            delta,
            ..self.recovery
        }
    }

    pub fn load_affinity(&self) -> Result<AffinityMatrix> {
        match &self.affinity {
            AffinitySource::Fixture => Ok(load_fixture_affinity()),
            AffinitySource::Constructed { params } => construct_affinity(params),
            AffinitySource::File { path } => AffinityMatrix::read_csv(path),
        }
    }

    pub fn channels(&self, q: usize) -> Result<Vec<ChannelResponse>> {
        match &self.channel.per_type {
            Some(v) if v.len() != q => Err(Error::Dimension(format!(
                "{} channel entries for Q = {q}",
                v.len()
            ))),
            Some(v) => v
                .iter()
                .map(|c| ChannelResponse::new(c.alpha, c.beta, c.gamma))
                .collect(),
            None => {
                let c = self.channel.default;
                Ok(vec![ChannelResponse::new(c.alpha, c.beta, c.gamma)?; q])
            }
        }
    }

    /// The optimized book for this configuration.
    pub fn build_book(
        &self,
        a: &AffinityMatrix,
        channels: &[ChannelResponse],
    ) -> Result<MixtureBook> {
        let gammas: Vec<f64> = channels.iter().map(|c| c.gamma).collect();
        let b = &self.book;
        match &b.source {
            BookSource::Reference => {
                if b.k != 4 || b.q_tx != 4 || a.molecules() != 20 {
                    return Err(Error::InvalidParam(
                        "the reference book needs K = 4, Q_tx = 4 and Q = 20".into(),
                    ));
                }
                design::reference_book(b.alphabet_size, gammas, b.x_bar_mix)
            }
            BookSource::Designed {
                mc,
                profile,
                metric_x_bar_mix,
            } => {
                let params = DesignParams {
                    k: b.k,
                    q_tx: b.q_tx,
                    m_mix: b.m_mix,
                    d_thr: b.d_thr.unwrap_or(f64::NEG_INFINITY),
                    metric: MetricConfig::new(
                        *metric_x_bar_mix,
                        *mc,
                        self.seed,
                        ConcentrationProfile::SplitTotal,
                    ),
                    mixture_profile: *profile,
                };
                let outcome = design::design(a, &params, &self.reception)?;
                outcome
                    .book(gammas, b.x_bar_mix)?
                    .truncated(b.alphabet_size)
            }
        }
    }
}
