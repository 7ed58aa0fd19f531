//! Sparse recovery programs cast as second-order cone programs.
//!
//! Both programs share the array-fit constraints
//!
//! * C1: `|y_A - (A_A x + (lambda_r - x_thr))|^2 <= |A| lambda_r eps` over
//!   active receptors,
//! * C2: `A_{A^c} x + (lambda_r - x_thr) <= sqrt(lambda_r eps)` over silent
//!   receptors,
//!
//! and `x >= 0`. The molecule program minimizes `sum x`; the mixture program
//! adds `w >= 0` and, per molecule, `(x_q - t_q)^2 <= delta t_q` with
//! `t = M_rx w`, minimizing `sum w`.

use super::{split_active, RecoveryConfig, RecoveryEstimate, RecoveryStatus};
use crate::affinity::AffinityMatrix;
use crate::channel::ReceptionConfig;
use crate::error::{Error, Result};
use mmsk_conic::{solve, solve_from, ConeSpec, InitialPoint, Matrix, Problem, Settings, Status};

/// Row layout of a built program; used to map solutions back.
#[derive(Debug, Clone)]
pub struct Program {
    pub problem: Problem,
    /// Global molecule index of each x variable.
    x_map: Vec<usize>,
    num_w: usize,
    active: Vec<usize>,
    molecules: usize,
}

impl Program {
    fn x_offset(&self) -> usize {
        0
    }

    fn w_offset(&self) -> usize {
        self.x_map.len()
    }
}

fn check_dims(y: &[f64], a: &AffinityMatrix) -> Result<()> {
    if y.len() != a.receptors() {
        return Err(Error::Dimension(format!(
            "observation has {} receptors, affinity has {}",
            y.len(),
            a.receptors()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParam("non-finite observation".into()));
    }
    Ok(())
}

struct Builder {
    n: usize,
    nonneg: Vec<(Vec<f64>, f64)>,
    soc: Vec<Vec<(Vec<f64>, f64)>>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Self {
            n,
            nonneg: Vec::new(),
            soc: Vec::new(),
        }
    }

    fn row(&self) -> Vec<f64> {
        vec![0.0; self.n]
    }

    fn finish(self, c: Vec<f64>) -> Result<Problem> {
        let mut rows = Vec::new();
        let mut h = Vec::new();
        for (g, v) in &self.nonneg {
            rows.push(g.clone());
            h.push(*v);
        }
        let mut soc_dims = Vec::new();
        for block in &self.soc {
            soc_dims.push(block.len());
            for (g, v) in block {
                rows.push(g.clone());
                h.push(*v);
            }
        }
        let g = Matrix::from_rows(&rows);
        let g = if rows.is_empty() {
            Matrix::zeros(0, self.n)
        } else {
            g
        };
        Problem::new(c, g, h, ConeSpec::new(self.nonneg.len(), soc_dims))
            .map_err(|e| Error::InvalidParam(e.to_string()))
    }
}

/// Adds x >= 0, C2 and C1 over the variables in `x_map`.
fn add_fit_constraints(
    b: &mut Builder,
    y: &[f64],
    a: &AffinityMatrix,
    x_map: &[usize],
    cfg: &ReceptionConfig,
    eps: f64,
) -> Vec<usize> {
    let (active, silent) = split_active(y);
    let offset = cfg.lambda_r - cfg.x_thr;
    for i in 0..x_map.len() {
        let mut g = b.row();
        g[i] = -1.0;
        b.nonneg.push((g, 0.0));
    }
    let c2_rhs = (cfg.lambda_r * eps).sqrt() - offset;
    for &r in &silent {
        let mut g = b.row();
        for (i, &q) in x_map.iter().enumerate() {
            g[i] = a.get(r, q);
        }
        b.nonneg.push((g, c2_rhs));
    }
    if !active.is_empty() {
        let mut block = Vec::with_capacity(active.len() + 1);
        block.push((b.row(), (active.len() as f64 * cfg.lambda_r * eps).sqrt()));
        for &r in &active {
            let mut g = b.row();
            for (i, &q) in x_map.iter().enumerate() {
                g[i] = a.get(r, q);
            }
            block.push((g, y[r] - offset));
        }
        b.soc.push(block);
    }
    active
}

pub fn build_op1(
    y: &[f64],
    a: &AffinityMatrix,
    cfg: &ReceptionConfig,
    rcfg: &RecoveryConfig,
) -> Result<Program> {
    check_dims(y, a)?;
    rcfg.check()?;
    let q = a.molecules();
    let x_map: Vec<usize> = (0..q).collect();
    let mut b = Builder::new(q);
    let active = add_fit_constraints(&mut b, y, a, &x_map, cfg, rcfg.epsilon);
    let problem = b.finish(vec![1.0; q])?;
    Ok(Program {
        problem,
        x_map,
        num_w: 0,
        active,
        molecules: q,
    })
}

pub fn build_op2(
    y: &[f64],
    a: &AffinityMatrix,
    reception: &Matrix,
    cfg: &ReceptionConfig,
    rcfg: &RecoveryConfig,
) -> Result<Program> {
    check_dims(y, a)?;
    rcfg.check()?;
    let q = a.molecules();
    if reception.rows() != q {
        return Err(Error::Dimension(format!(
            "reception matrix has {} rows, Q = {q}",
            reception.rows()
        )));
    }
    let m = reception.cols();
    // molecules no mixture can deliver are pinned to zero by C3, so they are
    // dropped instead of leaving a cone without interior
    let x_map: Vec<usize> = (0..q)
        .filter(|&i| reception.row(i).iter().any(|v| *v != 0.0))
        .collect();
    let nx = x_map.len();
    let mut b = Builder::new(nx + m);
    let active = add_fit_constraints(&mut b, y, a, &x_map, cfg, rcfg.epsilon);
    for j in 0..m {
        let mut g = b.row();
        g[nx + j] = -1.0;
        b.nonneg.push((g, 0.0));
    }
    let delta = rcfg.delta;
    for (i, &qi) in x_map.iter().enumerate() {
        let mrow = reception.row(qi);
        // (delta + t, 2 (x - t), delta - t) in the second-order cone
        let mut g0 = b.row();
        let mut g1 = b.row();
        let mut g2 = b.row();
        g1[i] = -2.0;
        for j in 0..m {
            g0[nx + j] = -mrow[j];
            g1[nx + j] = 2.0 * mrow[j];
            g2[nx + j] = mrow[j];
        }
        b.soc.push(vec![(g0, delta), (g1, 0.0), (g2, delta)]);
    }
    let mut c = vec![0.0; nx + m];
    c[nx..].fill(1.0);
    let problem = b.finish(c)?;
    Ok(Program {
        problem,
        x_map,
        num_w: m,
        active,
        molecules: q,
    })
}

fn settings(rcfg: &RecoveryConfig) -> Settings {
    Settings {
        max_iters: rcfg.max_iters,
        feastol: (rcfg.solver_tol * 1e-2).max(1e-12),
        abstol: rcfg.solver_tol,
        reltol: rcfg.solver_tol,
        reduced_tol: (rcfg.solver_tol * 10.0).min(1e-6),
        ..Settings::default()
    }
}

impl Program {
    pub fn solve(&self, rcfg: &RecoveryConfig) -> RecoveryEstimate {
        let sol = solve(&self.problem, &settings(rcfg));
        self.estimate(sol.status, &sol.x)
    }

    /// Solves from a caller-supplied interior starting point.
    pub fn solve_from(
        &self,
        rcfg: &RecoveryConfig,
        start: &InitialPoint,
    ) -> Result<RecoveryEstimate> {
        let sol = solve_from(&self.problem, &settings(rcfg), start)
            .map_err(|e| Error::InvalidParam(e.to_string()))?;
        Ok(self.estimate(sol.status, &sol.x))
    }

    fn estimate(&self, status: Status, v: &[f64]) -> RecoveryEstimate {
        let status = match status {
            Status::Optimal | Status::NearOptimal => RecoveryStatus::Optimal,
            Status::PrimalInfeasible => RecoveryStatus::Infeasible,
            _ => RecoveryStatus::IterationLimit,
        };
        let mut x_hat = vec![0.0; self.molecules];
        let mut w_hat = vec![0.0; self.num_w];
        if status == RecoveryStatus::Optimal {
            for (i, &q) in self.x_map.iter().enumerate() {
                x_hat[q] = v[self.x_offset() + i].max(0.0);
            }
            for (j, w) in w_hat.iter_mut().enumerate() {
                *w = v[self.w_offset() + j].max(0.0);
            }
        }
        RecoveryEstimate {
            x_hat,
            w_hat,
            active_set: self.active.clone(),
            status,
        }
    }
}

pub fn solve_op1(
    y: &[f64],
    a: &AffinityMatrix,
    cfg: &ReceptionConfig,
    rcfg: &RecoveryConfig,
) -> Result<RecoveryEstimate> {
    Ok(build_op1(y, a, cfg, rcfg)?.solve(rcfg))
}

pub fn solve_op2(
    y: &[f64],
    a: &AffinityMatrix,
    reception: &Matrix,
    cfg: &ReceptionConfig,
    rcfg: &RecoveryConfig,
) -> Result<RecoveryEstimate> {
    Ok(build_op2(y, a, reception, cfg, rcfg)?.solve(rcfg))
}

/// Largest relative violation of each constraint family, evaluated directly
/// from the problem statement. Nonpositive means satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub nonneg: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl ConstraintReport {
    pub fn worst(&self) -> f64 {
        self.nonneg.max(self.c1).max(self.c2).max(self.c3)
    }

    pub fn satisfied(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

/// Violation scaled as `(lhs - rhs) / (1 + |rhs|)`.
fn rel(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / (1.0 + rhs.abs())
}

/// Substitutes `(x, w)` into C1, C2 and, if `reception` is given, C3.
pub fn check_constraints(
    y: &[f64],
    a: &AffinityMatrix,
    x: &[f64],
    w: Option<(&[f64], &Matrix)>,
    cfg: &ReceptionConfig,
    rcfg: &RecoveryConfig,
) -> ConstraintReport {
    let (active, silent) = split_active(y);
    let offset = cfg.lambda_r - cfg.x_thr;
    let ax = a.apply(x);
    let mut nonneg = x.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max);
    let resid: f64 = active
        .iter()
        .map(|&r| (y[r] - (ax[r] + offset)).powi(2))
        .sum::<f64>()
        .sqrt();
    let c1 = if active.is_empty() {
        f64::NEG_INFINITY
    } else {
        rel(
            resid,
            (active.len() as f64 * cfg.lambda_r * rcfg.epsilon).sqrt(),
        )
    };
    // C2 in its pre-substitution form: x_thr + sqrt(lambda eps) bounds the
    // expected pre-activation A x + lambda
    let c2 = silent
        .iter()
        .map(|&r| {
            rel(
                ax[r] + cfg.lambda_r,
                cfg.x_thr + (cfg.lambda_r * rcfg.epsilon).sqrt(),
            )
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut c3 = f64::NEG_INFINITY;
    if let Some((w, m)) = w {
        nonneg = nonneg.max(w.iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max));
        let t = m.mul_vec(w);
        for q in 0..x.len() {
            c3 = c3.max(rel((x[q] - t[q]).powi(2), rcfg.delta * t[q]));
        }
    }
    ConstraintReport { nonneg, c1, c2, c3 }
}
