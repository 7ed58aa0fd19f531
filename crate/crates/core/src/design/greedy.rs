//! Greedy max-min selection: molecule allocation and alphabet construction.

use super::metric::DissimilarityTable;
use crate::error::{Error, Result};

/// Metrics are compared after rounding to 1e-9 dB so that ties resolve by
/// index rather than by floating-point noise.
fn key(v: f64) -> f64 {
    if v.is_finite() {
        (v * 1e9).round()
    } else {
        v
    }
}

/// Best pair among `pool` (ascending indices); lowest pair wins ties.
fn best_pair(table: &DissimilarityTable, pool: &[usize]) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (ia, &a) in pool.iter().enumerate() {
        for &b in &pool[ia + 1..] {
            let v = table.get(a, b);
            if best.is_none_or(|(bv, _, _)| key(v) > key(bv)) {
                best = Some((v, a, b));
            }
        }
    }
    best
}

fn min_to(table: &DissimilarityTable, i: usize, set: &[usize]) -> f64 {
    set.iter()
        .map(|&j| table.get(i, j))
        .fold(f64::INFINITY, f64::min)
}

/// Splits the table's entries into `k` disjoint groups of `q_tx`.
///
/// Each group is seeded in turn with the most dissimilar remaining pair; the
/// groups are then grown one entry at a time, always taking the (group, entry)
/// combination whose worst-case metric to the group is largest.
pub fn allocate_molecules(
    table: &DissimilarityTable,
    k: usize,
    q_tx: usize,
) -> Result<Vec<Vec<usize>>> {
    if k == 0 || q_tx < 2 {
        return Err(Error::InvalidParam("need K >= 1 and Q_tx >= 2".into()));
    }
    let n = table.len();
    if k * q_tx > n {
        return Err(Error::InsufficientMolecules {
            needed: k * q_tx,
            available: n,
        });
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(k);
    for _ in 0..k {
        let (_, a, b) = best_pair(table, &remaining).expect("at least two remain");
        remaining.retain(|&x| x != a && x != b);
        sets.push(vec![a, b]);
    }
    while sets.iter().any(|s| s.len() < q_tx) {
        let mut best: Option<(f64, usize, usize)> = None;
        for (si, s) in sets.iter().enumerate() {
            if s.len() >= q_tx {
                continue;
            }
            for &q in &remaining {
                let v = min_to(table, q, s);
                if best.is_none_or(|(bv, _, _)| key(v) > key(bv)) {
                    best = Some((v, si, q));
                }
            }
        }
        let (_, si, q) = best.expect("remaining entries suffice");
        sets[si].push(q);
        remaining.retain(|&x| x != q);
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    Ok(sets)
}

/// Greedy alphabet in acceptance order.
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    /// Table indices in the order they were accepted.
    pub members: Vec<usize>,
    /// `min_metric[i]` is the minimum pairwise metric of the first `i + 2`
    /// members.
    pub min_metric: Vec<f64>,
}

/// Builds a `d_thr`-distinguishable alphabet from the table.
///
/// Starts from the most dissimilar pair and keeps adding the candidate whose
/// minimum metric to the current set is largest, until that value drops
/// below `d_thr` or candidates run out.
pub fn build_alphabet(table: &DissimilarityTable, d_thr: f64) -> Alphabet {
    let all: Vec<usize> = (0..table.len()).collect();
    let empty = Alphabet {
        members: vec![],
        min_metric: vec![],
    };
    let Some((v, a, b)) = best_pair(table, &all) else {
        return empty;
    };
    if v < d_thr {
        return empty;
    }
    let mut members = vec![a, b];
    let mut min_metric = vec![v];
    loop {
        let mut best: Option<(f64, usize)> = None;
        for &c in &all {
            if members.contains(&c) {
                continue;
            }
            let score = min_to(table, c, &members);
            if best.is_none_or(|(bv, _)| key(score) > key(bv)) {
                best = Some((score, c));
            }
        }
        match best {
            Some((score, c)) if score >= d_thr => {
                members.push(c);
                let running = *min_metric.last().expect("nonempty");
                min_metric.push(running.min(score));
            }
            _ => break,
        }
    }
    Alphabet {
        members,
        min_metric,
    }
}

/// True iff every pair among `members` has metric at least `d_thr`.
pub fn is_distinguishable(table: &DissimilarityTable, members: &[usize], d_thr: f64) -> bool {
    members
        .iter()
        .enumerate()
        .all(|(i, &a)| members[i + 1..].iter().all(|&b| table.get(a, b) >= d_thr))
}
