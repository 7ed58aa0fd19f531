//! Receptor-molecule affinity matrices.

use crate::error::{Error, Result};
use crate::rng;
use rand::seq::index::sample as sample_indices;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

/// R x Q activation strengths, row per receptor type, column per molecule type.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    /// Rounding step of the source when entries were printed at fixed
    /// precision. Any printed zero may then hide a value below half a step.
    print_quantum: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityParams {
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    pub r_act: usize,
    pub a_inh: f64,
    pub mu_thr: f64,
    pub seed: u64,
    #[serde(default = "default_retry_cap")]
    pub retry_cap: u64,
}

fn default_retry_cap() -> u64 {
    1_000_000
}

impl AffinityParams {
    pub fn new(r: usize, q: usize, r_act: usize, a_inh: f64, mu_thr: f64, seed: u64) -> Self {
        Self {
            r,
            q,
            r_act,
            a_inh,
            mu_thr,
            seed,
            retry_cap: default_retry_cap(),
        }
    }

    /// Parameters the fixture was built with.
    pub fn fixture() -> Self {
        Self::new(10, 20, 5, 0.3, 0.5, 0)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        if self.r == 0 || self.q == 0 {
            return bad("R and Q must be positive");
        }
        if self.r_act == 0 || self.r_act > self.r {
            return bad("R_act must lie in 1..=R");
        }
        if !(0.0..=1.0).contains(&self.a_inh) {
            return bad("a_inh must lie in [0, 1]");
        }
        if !(self.mu_thr > 0.0 && self.mu_thr <= 1.0) {
            return bad("mu_thr must lie in (0, 1]");
        }
        if self.retry_cap == 0 {
            return bad("retry cap must be positive");
        }
        Ok(())
    }
}

impl AffinityMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let q = rows.first().map_or(0, Vec::len);
        if r == 0 || q == 0 {
            return Err(Error::Dimension("affinity matrix must be nonempty".into()));
        }
        if rows.iter().any(|row| row.len() != q) {
            return Err(Error::Dimension("ragged affinity rows".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("non-finite affinity entry".into()));
        }
        Ok(Self {
            rows: r,
            cols: q,
            values: rows.concat(),
            print_quantum: None,
        })
    }

    pub fn with_print_quantum(mut self, quantum: f64) -> Self {
        self.print_quantum = Some(quantum);
        self
    }

    pub fn print_quantum(&self) -> Option<f64> {
        self.print_quantum
    }

    /// Number of receptor types R.
    pub fn receptors(&self) -> usize {
        self.rows
    }

    /// Number of molecule types Q.
    pub fn molecules(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, q: usize) -> f64 {
        self.values[r * self.cols + q]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, q: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, q)).collect()
    }

    /// Keeps only the listed molecule columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .map(|r| cols.iter().map(|&q| self.get(r, q)).collect())
            .collect();
        Self {
            rows: self.rows,
            cols: cols.len(),
            values: rows.concat(),
            print_quantum: self.print_quantum,
        }
    }

    /// `A x` for a real vector `x` of length Q.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// CSV with one row per receptor, entries at six significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)?;
        for r in 0..self.rows {
            w.write_record(self.row(r).iter().map(|&v| format_sig(v, 6)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(path)?;
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("affinity entry {s:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

impl fmt::Display for AffinityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let cells: Vec<String> = self.row(r).iter().map(|v| format!("{v:6.2}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Formats `v` with `digits` significant digits and no trailing zeros.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// `|a^T b| / (|a| |b|)`.
pub fn mutual_coherence(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(
            "coherence operands differ in length".into(),
        ));
    }
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateColumn);
    }
    let ip: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((ip.abs() / (na * nb)).min(1.0))
}

/// Random cross-reactive affinity matrix.
///
/// Each column activates `r_act` receptors chosen uniformly. Strengths are
/// drawn on (0, 1], divided by their maximum and affinely mapped so the
/// strongest entry is 1 and the weakest can reach `-a_inh`. A column is
/// redrawn until its coherence with every earlier column is at most `mu_thr`.
pub fn construct_affinity(params: &AffinityParams) -> Result<AffinityMatrix> {
    params.check()?;
    let (r, q) = (params.r, params.q);
    let mut rng = rng::seeded(params.seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(q);
    for qi in 0..q {
        let mut attempts = 0u64;
        let col = loop {
            if attempts >= params.retry_cap {
                return Err(Error::CoherenceUnsatisfiable {
                    column: qi,
                    attempts,
                });
            }
            attempts += 1;
            let cand = draw_column(&mut rng, r, params.r_act, params.a_inh);
            let mut ok = true;
            for prev in &cols {
                if mutual_coherence(&cand, prev)? > params.mu_thr {
                    ok = false;
                    break;
                }
            }
            if ok {
                break cand;
            }
        };
        cols.push(col);
    }
    let rows: Vec<Vec<f64>> = (0..r)
        .map(|ri| cols.iter().map(|c| c[ri]).collect())
        .collect();
    AffinityMatrix::from_rows(&rows)
}

fn draw_column(rng: &mut rng::Rng, r: usize, r_act: usize, a_inh: f64) -> Vec<f64> {
    let idx = sample_indices(rng, r, r_act);
    let raw: Vec<f64> = (0..r_act).map(|_| rng::open_closed_unit(rng)).collect();
    let max = raw.iter().cloned().fold(f64::MIN, f64::max);
    let mut col = vec![0.0; r];
    for (i, v) in idx.iter().zip(raw) {
        col[i] = if v == max {
            1.0
        } else {
            v / max * (1.0 + a_inh) - a_inh
        };
    }
    col
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    EntryOutOfRange {
        row: usize,
        col: usize,
        value: f64,
    },
    SupportSize {
        col: usize,
        nonzeros: usize,
        expected: usize,
    },
    ColumnMax {
        col: usize,
        max: f64,
    },
    Coherence {
        a: usize,
        b: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EntryOutOfRange { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} outside [-a_inh, 1]")
            }
            Violation::SupportSize {
                col,
                nonzeros,
                expected,
            } => write!(
                f,
                "column {col} has {nonzeros} nonzeros, expected {expected}"
            ),
            Violation::ColumnMax { col, max } => write!(f, "column {col} max {max} != 1"),
            Violation::Coherence { a, b, value } => {
                write!(f, "columns {a},{b} coherence {value} > mu_thr")
            }
        }
    }
}

/// Lists every violated invariant; an empty report means the matrix is valid.
pub fn validate_affinity(a: &AffinityMatrix, params: &AffinityParams) -> Result<Vec<Violation>> {
    if a.receptors() != params.r || a.molecules() != params.q {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, params say {}x{}",
            a.receptors(),
            a.molecules(),
            params.r,
            params.q
        )));
    }
    let mut out = Vec::new();
    for q in 0..a.molecules() {
        let col = a.column(q);
        for (r, &v) in col.iter().enumerate() {
            if v < -params.a_inh || v > 1.0 {
                out.push(Violation::EntryOutOfRange {
                    row: r,
                    col: q,
                    value: v,
                });
            }
        }
        let nonzeros = col.iter().filter(|v| **v != 0.0).count();
        // with printed entries a true nonzero may have rounded to zero,
        // so only an excess of nonzeros is conclusive
        let support_ok = match a.print_quantum() {
            Some(_) => nonzeros <= params.r_act,
            None => nonzeros == params.r_act,
        };
        if !support_ok {
            out.push(Violation::SupportSize {
                col: q,
                nonzeros,
                expected: params.r_act,
            });
        }
        let max = col.iter().cloned().fold(f64::MIN, f64::max);
        if max != 1.0 {
            out.push(Violation::ColumnMax { col: q, max });
        }
    }
    for i in 0..a.molecules() {
        for j in i + 1..a.molecules() {
            let c = match mutual_coherence(&a.column(i), &a.column(j)) {
                Ok(c) => c,
                Err(_) => 1.0,
            };
            if c > params.mu_thr {
                out.push(Violation::Coherence {
                    a: i,
                    b: j,
                    value: c,
                });
            }
        }
    }
    Ok(out)
}

#[rustfmt::skip]
const FIXTURE: [[f64; 20]; 10] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.55, 1.0, -0.1, 0.0, 0.0, 0.0, -0.28, 0.46, 0.66, 1.0, 0.0, 0.76, -0.14, 0.0, 0.0],
    [0.0, -0.06, 0.31, 0.02, 1.0, 0.0, 0.0, 0.38, 0.38, -0.29, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.81, 0.99, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.52, 0.38, 0.6, 0.0, -0.11, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.01, 0.98, 0.0, 0.0, 0.0],
    [1.0, 0.41, 0.0, 0.0, 0.0, 0.0, 0.27, 0.0, 0.9, 0.0, -0.25, 0.65, 0.0, -0.25, 0.0, 0.0, 1.0, 0.0, 1.0, 0.76],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -0.01, 0.0, -0.25, 0.0, 0.71, -0.17, 0.73, 0.0, 0.38, 0.0, 0.0, -0.1, 0.88, 0.79],
    [0.55, 0.44, 0.55, 0.0, -0.25, 0.29, 0.0, 1.0, 0.0, 0.0, 0.31, 0.0, 0.0, -0.24, 0.96, 0.63, -0.24, 0.0, 0.0, 0.0],
    [-0.3, 1.0, 0.0, 0.0, 0.5, -0.29, 0.0, 0.0, 0.33, 0.6, 0.0, 0.0, 0.0, 1.0, 0.12, -0.17, 0.0, 0.0, -0.07, 0.75],
    [0.0, 0.0, 0.62, 0.0, 0.0, 0.0, 0.0, -0.19, 1.0, -0.17, 1.0, 0.0, -0.2, -0.13, 0.4, 0.55, 0.0, 0.0, 0.0, 0.36],
    [-0.08, 0.67, 0.0, 0.0, 0.0, 1.0, -0.21, 0.0, 0.0, 0.0, 0.45, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.77, 0.0],
    [0.16, 0.0, -0.3, 0.16, 0.83, 0.0, 0.89, 0.0, 0.0, 0.16, 0.0, 0.84, -0.18, 0.0, 0.0, 1.0, 0.0, 0.0, -0.21, 1.0],
];

/// The published 10 x 20 example matrix, entries at two decimals.
pub fn load_fixture_affinity() -> AffinityMatrix {
    let rows: Vec<Vec<f64>> = FIXTURE.iter().map(|r| r.to_vec()).collect();
    AffinityMatrix::from_rows(&rows)
        .expect("fixture is well formed")
        .with_print_quantum(0.01)
}
