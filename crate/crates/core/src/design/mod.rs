//! Modulation design: mixtures, molecule allocation and per-transmitter
//! alphabets, plus the construction and reception matrices they induce.

pub mod greedy;
pub mod metric;

use crate::affinity::AffinityMatrix;
use crate::channel::ReceptionConfig;
use crate::error::{Error, Result};
use mmsk_conic::Matrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

pub use greedy::{allocate_molecules, build_alphabet, is_distinguishable, Alphabet};
pub use metric::{
    dissimilarity, dissimilarity_table, mixture_expected_concentration, profile_concentration,
    ConcentrationProfile, DissimilarityTable, MetricConfig,
};

/// Set of molecule types released together. Indices are 0-based internally
/// and 1-based in serialized form and `Display`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct Mixture(Vec<usize>);

impl Mixture {
    pub fn new(mut constituents: Vec<usize>) -> Result<Self> {
        if constituents.is_empty() {
            return Err(Error::EmptyMixture);
        }
        constituents.sort_unstable();
        if constituents.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParam("duplicate constituent".into()));
        }
        Ok(Self(constituents))
    }

    /// From 1-based molecule labels.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::InvalidParam("molecule labels start at 1".into()));
        }
        Self::new(labels.iter().map(|l| l - 1).collect())
    }

    pub fn single(q: usize) -> Self {
        Self(vec![q])
    }

    pub fn constituents(&self) -> &[usize] {
        &self.0
    }

    pub fn labels(&self) -> Vec<usize> {
        self.0.iter().map(|c| c + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.0.binary_search(&q).is_ok()
    }
}

impl From<Mixture> for Vec<usize> {
    fn from(m: Mixture) -> Self {
        m.labels()
    }
}

impl TryFrom<Vec<usize>> for Mixture {
    type Error = Error;
    fn try_from(labels: Vec<usize>) -> Result<Self> {
        Mixture::from_labels(&labels)
    }
}

impl fmt::Display for Mixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels().iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// All nonempty subsets of `pool` with at most `m_mix` elements, by size then
/// lexicographically.
pub fn candidate_mixtures(pool: &[usize], m_mix: usize) -> Vec<Mixture> {
    let mut pool = pool.to_vec();
    pool.sort_unstable();
    let mut out = Vec::new();
    for size in 1..=m_mix.min(pool.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(Mixture(idx.iter().map(|&i| pool[i]).collect()));
            // next combination
            let mut i = size;
            while i > 0 && idx[i - 1] == pool.len() - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for j in i..size {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Column `m` holds `1/|mixture|` at each constituent.
pub fn build_construction_matrix(mixtures: &[Mixture], q: usize) -> Result<Matrix> {
    if mixtures.is_empty() {
        return Err(Error::InvalidParam("no mixtures".into()));
    }
    let mut m = Matrix::zeros(q, mixtures.len());
    for (j, mix) in mixtures.iter().enumerate() {
        let share = 1.0 / mix.len() as f64;
        for &c in mix.constituents() {
            if c >= q {
                return Err(Error::Dimension(format!("mixture {mix} exceeds Q = {q}")));
            }
            m[(c, j)] = share;
        }
    }
    Ok(m)
}

/// Construction weights reweighted by capture fractions and renormalized
/// per column.
pub fn build_reception_matrix(construction: &Matrix, gammas: &[f64]) -> Result<Matrix> {
    let (q, m) = (construction.rows(), construction.cols());
    if gammas.len() != q {
        return Err(Error::Dimension(format!(
            "{} gammas for Q = {q}",
            gammas.len()
        )));
    }
    if gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidParam("gammas must be positive".into()));
    }
    let mut out = Matrix::zeros(q, m);
    for j in 0..m {
        let denom: f64 = (0..q).map(|i| construction[(i, j)] * gammas[i]).sum();
        if !(denom > 0.0) {
            return Err(Error::InvisibleMixture(j));
        }
        for i in 0..q {
            out[(i, j)] = construction[(i, j)] * gammas[i] / denom;
        }
    }
    Ok(out)
}

/// Per-transmitter molecule sets and alphabets with the derived matrices.
#[derive(Debug, Clone)]
pub struct MixtureBook {
    allocations: Vec<Vec<usize>>,
    alphabets: Vec<Vec<Mixture>>,
    gammas: Vec<f64>,
    construction: Matrix,
    reception: Matrix,
    pub x_bar_mix: f64,
}

#[derive(Serialize, Deserialize)]
struct BookFile {
    allocations: Vec<Mixture>,
    alphabets: Vec<Vec<Mixture>>,
    gammas: Vec<f64>,
    x_bar_mix: f64,
    #[serde(default, skip_deserializing)]
    construction: Vec<Vec<f64>>,
    #[serde(default, skip_deserializing)]
    reception: Vec<Vec<f64>>,
}

impl MixtureBook {
    pub fn new(
        allocations: Vec<Vec<usize>>,
        alphabets: Vec<Vec<Mixture>>,
        gammas: Vec<f64>,
        x_bar_mix: f64,
    ) -> Result<Self> {
        let q = gammas.len();
        if allocations.len() != alphabets.len() || allocations.is_empty() {
            return Err(Error::InvalidParam(
                "one alphabet per allocation required".into(),
            ));
        }
        let mut seen = vec![false; q];
        for set in &allocations {
            for &m in set {
                if m >= q {
                    return Err(Error::Dimension(format!(
                        "molecule {} exceeds Q = {q}",
                        m + 1
                    )));
                }
                if seen[m] {
                    return Err(Error::InvalidParam(format!(
                        "molecule {} allocated twice",
                        m + 1
                    )));
                }
                seen[m] = true;
            }
        }
        for (k, alpha) in alphabets.iter().enumerate() {
            if alpha.is_empty() {
                return Err(Error::InvalidParam(format!(
                    "transmitter {k} has no mixtures"
                )));
            }
            for mix in alpha {
                if !mix
                    .constituents()
                    .iter()
                    .all(|c| allocations[k].contains(c))
                {
                    return Err(Error::InvalidParam(format!(
                        "mixture {mix} uses molecules outside transmitter {k}"
                    )));
                }
            }
        }
        if !(x_bar_mix > 0.0) {
            return Err(Error::InvalidParam("x_bar_mix must be positive".into()));
        }
        let flat: Vec<Mixture> = alphabets.iter().flatten().cloned().collect();
        let construction = build_construction_matrix(&flat, q)?;
        let reception = build_reception_matrix(&construction, &gammas)?;
        Ok(Self {
            allocations,
            alphabets,
            gammas,
            construction,
            reception,
            x_bar_mix,
        })
    }

    pub fn num_tx(&self) -> usize {
        self.alphabets.len()
    }

    pub fn num_molecules(&self) -> usize {
        self.gammas.len()
    }

    pub fn num_mixtures(&self) -> usize {
        self.construction.cols()
    }

    pub fn allocations(&self) -> &[Vec<usize>] {
        &self.allocations
    }

    pub fn alphabets(&self) -> &[Vec<Mixture>] {
        &self.alphabets
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn construction(&self) -> &Matrix {
        &self.construction
    }

    pub fn reception(&self) -> &Matrix {
        &self.reception
    }

    /// Global index range of transmitter `k`'s mixtures.
    pub fn tx_range(&self, k: usize) -> std::ops::Range<usize> {
        let start: usize = self.alphabets[..k].iter().map(Vec::len).sum();
        start..start + self.alphabets[k].len()
    }

    /// Transmitter owning global mixture `m`.
    pub fn owner(&self, m: usize) -> usize {
        let mut start = 0;
        for (k, a) in self.alphabets.iter().enumerate() {
            if m < start + a.len() {
                return k;
            }
            start += a.len();
        }
        panic!("mixture index {m} out of range")
    }

    pub fn mixture(&self, m: usize) -> &Mixture {
        let k = self.owner(m);
        &self.alphabets[k][m - self.tx_range(k).start]
    }

    /// Reception matrix restricted to transmitter `k`'s columns.
    pub fn reception_for_tx(&self, k: usize) -> Matrix {
        let r = self.tx_range(k);
        let q = self.num_molecules();
        let mut out = Matrix::zeros(q, r.len());
        for i in 0..q {
            for (jj, j) in r.clone().enumerate() {
                out[(i, jj)] = self.reception[(i, j)];
            }
        }
        out
    }

    /// Keeps the first `size` mixtures of every alphabet.
    pub fn truncated(&self, size: usize) -> Result<Self> {
        if self.alphabets.iter().any(|a| a.len() < size) || size == 0 {
            return Err(Error::InvalidParam(format!(
                "alphabet size {size} not available for every transmitter"
            )));
        }
        let alphabets = self.alphabets.iter().map(|a| a[..size].to_vec()).collect();
        Self::new(
            self.allocations.clone(),
            alphabets,
            self.gammas.clone(),
            self.x_bar_mix,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let rows = |m: &Matrix| (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
        let file = BookFile {
            allocations: self
                .allocations
                .iter()
                .map(|s| Mixture::new(s.clone()))
                .collect::<Result<_>>()?,
            alphabets: self.alphabets.clone(),
            gammas: self.gammas.clone(),
            x_bar_mix: self.x_bar_mix,
            construction: rows(&self.construction),
            reception: rows(&self.reception),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: BookFile = serde_json::from_str(s)?;
        let allocations = f
            .allocations
            .into_iter()
            .map(|m| m.constituents().to_vec())
            .collect();
        Self::new(allocations, f.alphabets, f.gammas, f.x_bar_mix)
    }
}

/// Published allocation and full 14-mixture alphabets, in generation order,
/// for the fixture matrix (1-based labels).
pub const REFERENCE_ALLOCATIONS: [[usize; 4]; 4] = [
    [1, 5, 11, 14],
    [3, 7, 12, 19],
    [2, 6, 13, 16],
    [9, 10, 15, 18],
];

const REFERENCE_ALPHABETS: [[&[usize]; 14]; 4] = [
    [
        &[5, 14],
        &[1, 11],
        &[1, 5],
        &[11, 14],
        &[5, 11],
        &[1, 14],
        &[1],
        &[14],
        &[5, 11, 14],
        &[5],
        &[1, 5, 11],
        &[11],
        &[1, 5, 14],
        &[1, 11, 14],
    ],
    [
        &[7, 12],
        &[3, 19],
        &[3, 7],
        &[7, 19],
        &[3, 12],
        &[12, 19],
        &[7],
        &[3],
        &[3, 7, 12],
        &[3, 7, 19],
        &[19],
        &[12],
        &[7, 12, 19],
        &[3, 12, 19],
    ],
    [
        &[2, 16],
        &[6, 13],
        &[2, 13],
        &[2, 6],
        &[13, 16],
        &[6, 16],
        &[2],
        &[16],
        &[2, 13, 16],
        &[13],
        &[6, 13, 16],
        &[2, 6, 13],
        &[6],
        &[2, 6, 16],
    ],
    [
        &[9, 18],
        &[10, 15],
        &[9, 10],
        &[10, 18],
        &[15, 18],
        &[9, 15],
        &[10],
        &[9, 15, 18],
        &[18],
        &[9],
        &[10, 15, 18],
        &[15],
        &[9, 10, 18],
        &[9, 10, 15],
    ],
];

/// Published minimum pairwise metric of the first transmitter's alphabet for
/// sizes 2 through 14.
pub const REFERENCE_TX1_MIN_METRIC: [f64; 13] = [
    25.14, 21.44, 21.18, 20.72, 19.93, 17.17, 16.59, 16.58, 16.21, 16.15, 15.87, 15.34, 15.27,
];

/// The published book truncated to `alphabet_size` mixtures per transmitter.
pub fn reference_book(
    alphabet_size: usize,
    gammas: Vec<f64>,
    x_bar_mix: f64,
) -> Result<MixtureBook> {
    if gammas.len() < 19 {
        return Err(Error::Dimension("reference book needs Q >= 19".into()));
    }
    let allocations = REFERENCE_ALLOCATIONS
        .iter()
        .map(|s| s.iter().map(|l| l - 1).collect())
        .collect();
    let alphabets = REFERENCE_ALPHABETS
        .iter()
        .map(|a| {
            a.iter()
                .map(|m| Mixture::from_labels(m))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureBook::new(allocations, alphabets, gammas, x_bar_mix)?.truncated(alphabet_size)
}

/// Random book: a random disjoint allocation of `k * q_tx` molecules and, per
/// transmitter, `alphabet_size` distinct random two-molecule mixtures.
pub fn random_book<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    q_tx: usize,
    alphabet_size: usize,
    gammas: Vec<f64>,
    x_bar_mix: f64,
) -> Result<MixtureBook> {
    let q = gammas.len();
    if k * q_tx > q {
        return Err(Error::InsufficientMolecules {
            needed: k * q_tx,
            available: q,
        });
    }
    let pairs = q_tx * (q_tx.saturating_sub(1)) / 2;
    if alphabet_size > pairs {
        return Err(Error::InvalidParam(format!(
            "only {pairs} two-molecule mixtures per transmitter"
        )));
    }
    let mut mols: Vec<usize> = (0..q).collect();
    mols.shuffle(rng);
    let mut allocations = Vec::with_capacity(k);
    let mut alphabets = Vec::with_capacity(k);
    for t in 0..k {
        let mut set = mols[t * q_tx..(t + 1) * q_tx].to_vec();
        set.sort_unstable();
        let mut cands: Vec<Mixture> = candidate_mixtures(&set, 2)
            .into_iter()
            .filter(|m| m.len() == 2)
            .collect();
        cands.shuffle(rng);
        cands.truncate(alphabet_size);
        allocations.push(set);
        alphabets.push(cands);
    }
    MixtureBook::new(allocations, alphabets, gammas, x_bar_mix)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    #[serde(rename = "K")]
    pub k: usize,
    pub q_tx: usize,
    pub m_mix: usize,
    pub d_thr: f64,
    pub metric: MetricConfig,
    /// Profile for the per-transmitter mixture tables; allocation always
    /// compares singletons, where the profiles agree.
    pub mixture_profile: ConcentrationProfile,
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub allocations: Vec<Vec<usize>>,
    pub alphabets: Vec<Vec<Mixture>>,
    pub min_metric: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct DesignFile<'a> {
    allocations: Vec<Mixture>,
    alphabets: &'a [Vec<Mixture>],
    min_metric_by_size: &'a [Vec<f64>],
    construction: Vec<Vec<f64>>,
    reception: Vec<Vec<f64>>,
}

impl DesignOutcome {
    /// Book over the designed alphabets (full greedy length).
    pub fn book(&self, gammas: Vec<f64>, x_bar_mix: f64) -> Result<MixtureBook> {
        MixtureBook::new(
            self.allocations.clone(),
            self.alphabets.clone(),
            gammas,
            x_bar_mix,
        )
    }

    pub fn to_json(&self, book: &MixtureBook) -> Result<String> {
        let rows = |m: &Matrix| (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
        let file = DesignFile {
            allocations: self
                .allocations
                .iter()
                .map(|s| Mixture::new(s.clone()))
                .collect::<Result<_>>()?,
            alphabets: &self.alphabets,
            min_metric_by_size: &self.min_metric,
            construction: rows(book.construction()),
            reception: rows(book.reception()),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

/// Allocation over singleton metrics followed by a greedy alphabet per
/// transmitter.
pub fn design(
    a: &AffinityMatrix,
    params: &DesignParams,
    cfg: &ReceptionConfig,
) -> Result<DesignOutcome> {
    let singles: Vec<Mixture> = (0..a.molecules()).map(Mixture::single).collect();
    let single_table = dissimilarity_table(a, &singles, cfg, &params.metric)?;
    let allocations = allocate_molecules(&single_table, params.k, params.q_tx)?;
    let mix_cfg = MetricConfig {
        profile: params.mixture_profile,
        ..params.metric
    };
    let mut alphabets = Vec::with_capacity(params.k);
    let mut min_metric = Vec::with_capacity(params.k);
    for set in &allocations {
        let cands = candidate_mixtures(set, params.m_mix);
        let table = dissimilarity_table(a, &cands, cfg, &mix_cfg)?;
        let alpha = build_alphabet(&table, params.d_thr);
        alphabets.push(alpha.members.iter().map(|&i| cands[i].clone()).collect());
        min_metric.push(alpha.min_metric);
    }
    Ok(DesignOutcome {
        allocations,
        alphabets,
        min_metric,
    })
}
