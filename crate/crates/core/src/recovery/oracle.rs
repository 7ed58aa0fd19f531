//! Exhaustive sparse search on tiny instances, used to cross-check the
//! convex programs.

use crate::affinity::AffinityMatrix;
use crate::channel::{relu, ReceptionConfig};
use crate::error::{Error, Result};

pub const MAX_MOLECULES: usize = 12;
pub const MAX_SPARSITY: usize = 3;
pub const MAX_GRID: usize = 32;

/// Exact `E[relu(A x + n, x_thr)]` with `n ~ Poisson(lambda_r)`.
pub fn expected_output(a: &AffinityMatrix, x: &[f64], cfg: &ReceptionConfig) -> Vec<f64> {
    let pre = a.apply(x);
    let lam = cfg.lambda_r;
    if lam == 0.0 {
        return pre.iter().map(|&p| relu(p, cfg.x_thr)).collect();
    }
    let kmax = (lam + 12.0 * lam.sqrt() + 30.0).ceil() as usize;
    let mut pmf = Vec::with_capacity(kmax + 1);
    let mut p = (-lam).exp();
    for k in 0..=kmax {
        if k > 0 {
            p *= lam / k as f64;
        }
        pmf.push(p);
    }
    pre.iter()
        .map(|&mu| {
            pmf.iter()
                .enumerate()
                .map(|(k, pk)| pk * relu(mu + k as f64, cfg.x_thr))
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub support: Vec<usize>,
    pub concentrations: Vec<f64>,
    pub error: f64,
}

/// Sparsest gridded `x` whose expected output lies within `tolerance`
/// (squared distance) of `y`. If no support of size at most `sparsity_cap`
/// qualifies, the best fit found is returned.
pub fn brute_force_sparse_oracle(
    y: &[f64],
    a: &AffinityMatrix,
    cfg: &ReceptionConfig,
    sparsity_cap: usize,
    grid: &[f64],
    tolerance: f64,
) -> Result<OracleResult> {
    let q = a.molecules();
    if q > MAX_MOLECULES || sparsity_cap > MAX_SPARSITY || grid.len() > MAX_GRID {
        return Err(Error::OracleGuard(format!(
            "Q <= {MAX_MOLECULES}, sparsity <= {MAX_SPARSITY}, grid <= {MAX_GRID} required"
        )));
    }
    if grid.is_empty() || grid.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::OracleGuard(
            "grid must be nonempty and positive".into(),
        ));
    }
    if y.len() != a.receptors() {
        return Err(Error::Dimension("observation length differs from R".into()));
    }
    let err_of = |x: &[f64]| -> f64 {
        expected_output(a, x, cfg)
            .iter()
            .zip(y)
            .map(|(e, v)| (e - v).powi(2))
            .sum()
    };
    let zero = vec![0.0; q];
    let mut overall = OracleResult {
        support: vec![],
        concentrations: zero.clone(),
        error: err_of(&zero),
    };
    if overall.error <= tolerance {
        return Ok(overall);
    }
    for size in 1..=sparsity_cap.min(q) {
        let mut best: Option<OracleResult> = None;
        for support in combinations(q, size) {
            let mut levels = vec![0usize; size];
            loop {
                let mut x = vec![0.0; q];
                for (s, &l) in support.iter().zip(&levels) {
                    x[*s] = grid[l];
                }
                let e = err_of(&x);
                if best.as_ref().is_none_or(|b| e < b.error) {
                    best = Some(OracleResult {
                        support: support.clone(),
                        concentrations: x,
                        error: e,
                    });
                }
                // odometer over grid levels
                let mut i = 0;
                while i < size {
                    levels[i] += 1;
                    if levels[i] < grid.len() {
                        break;
                    }
                    levels[i] = 0;
                    i += 1;
                }
                if i == size {
                    break;
                }
            }
        }
        let best = best.expect("at least one support");
        if best.error <= tolerance {
            return Ok(best);
        }
        if best.error < overall.error {
            overall = best;
        }
    }
    Ok(overall)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
