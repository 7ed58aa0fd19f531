//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! Solves
//!
//! ```text
//!   minimize    c^T x
//!   subject to  G x + s = h,  s in K
//! ```
//!
//! together with its dual `maximize -h^T z  s.t.  G^T z + c = 0, z in K`.
//! Search directions use Nesterov-Todd scaling with a Mehrotra
//! predictor-corrector step.

use crate::cones::ConeSpec;
use crate::linalg::{axpy, dot, norm2, Cholesky, Matrix};
use crate::scaling::NtScaling;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("G has {g_rows} rows but h has {h_len} entries")]
    RowMismatch { g_rows: usize, h_len: usize },
    #[error("G has {g_cols} columns but c has {c_len} entries")]
    ColMismatch { g_cols: usize, c_len: usize },
    #[error("cone dimension {cone} does not match {rows} constraint rows")]
    ConeMismatch { cone: usize, rows: usize },
    #[error("second-order cone blocks must have dimension >= 1")]
    EmptySocBlock,
    #[error("problem data contains a non-finite value")]
    NonFinite,
    #[error("initial point has wrong dimensions or is not interior")]
    BadInitialPoint,
}

/// A conic program in standard inequality form.
#[derive(Debug, Clone)]
pub struct Problem {
    pub c: Vec<f64>,
    pub g: Matrix,
    pub h: Vec<f64>,
    pub cone: ConeSpec,
}

impl Problem {
    pub fn new(c: Vec<f64>, g: Matrix, h: Vec<f64>, cone: ConeSpec) -> Result<Self, ProblemError> {
        if g.rows() != h.len() {
            return Err(ProblemError::RowMismatch {
                g_rows: g.rows(),
                h_len: h.len(),
            });
        }
        if g.cols() != c.len() {
            return Err(ProblemError::ColMismatch {
                g_cols: g.cols(),
                c_len: c.len(),
            });
        }
        if cone.dim() != h.len() {
            return Err(ProblemError::ConeMismatch {
                cone: cone.dim(),
                rows: h.len(),
            });
        }
        if cone.soc.iter().any(|&d| d == 0) {
            return Err(ProblemError::EmptySocBlock);
        }
        let finite = c
            .iter()
            .chain(&h)
            .chain(g.as_slice())
            .all(|v| v.is_finite());
        if !finite {
            return Err(ProblemError::NonFinite);
        }
        Ok(Self { c, g, h, cone })
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.h.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub max_iters: usize,
    /// Primal and dual residual tolerance.
    pub feastol: f64,
    /// Absolute duality gap tolerance.
    pub abstol: f64,
    /// Relative duality gap tolerance.
    pub reltol: f64,
    /// Looser tolerances accepted when progress stalls.
    pub reduced_tol: f64,
    pub step_fraction: f64,
    pub refinement_steps: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iters: 200,
            feastol: 1e-9,
            abstol: 1e-9,
            reltol: 1e-9,
            reduced_tol: 1e-6,
            step_fraction: 0.99,
            refinement_steps: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// Converged only to the reduced tolerance.
    NearOptimal,
    /// `z` holds a certificate: `G^T z = 0`, `h^T z = -1`, `z in K`.
    PrimalInfeasible,
    /// `x` holds a certificate: `G x + s = 0`, `c^T x = -1`, `s in K`.
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

impl Status {
    pub fn is_optimal(self) -> bool {
        matches!(self, Status::Optimal | Status::NearOptimal)
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Optional starting point. `s` and `z` must be strictly interior.
#[derive(Debug, Clone)]
pub struct InitialPoint {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
}

pub fn solve(problem: &Problem, settings: &Settings) -> Solution {
    Solver::new(problem, settings).run(None)
}

pub fn solve_from(
    problem: &Problem,
    settings: &Settings,
    start: &InitialPoint,
) -> Result<Solution, ProblemError> {
    let n = problem.num_vars();
    let m = problem.num_rows();
    if start.x.len() != n
        || start.s.len() != m
        || start.z.len() != m
        || !problem.cone.is_interior(&start.s)
        || !problem.cone.is_interior(&start.z)
    {
        return Err(ProblemError::BadInitialPoint);
    }
    Ok(Solver::new(problem, settings).run(Some(start)))
}

struct Kkt {
    scaling: NtScaling,
    // W^{-1} G stored transposed: row j is W^{-1} applied to column j of G
    bt: Matrix,
    chol: Cholesky,
}

struct Solver<'a> {
    p: &'a Problem,
    set: &'a Settings,
    gt: Matrix,
}

struct Iterate {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

impl<'a> Solver<'a> {
    fn new(p: &'a Problem, set: &'a Settings) -> Self {
        let (m, n) = (p.num_rows(), p.num_vars());
        let mut gt = Matrix::zeros(n, m);
        for i in 0..m {
            for (j, &v) in p.g.row(i).iter().enumerate() {
                gt[(j, i)] = v;
            }
        }
        Self { p, set, gt }
    }

    fn factor(&self, scaling: NtScaling) -> Option<Kkt> {
        let (n, m) = (self.p.num_vars(), self.p.num_rows());
        let mut bt = Matrix::zeros(n, m);
        for j in 0..n {
            let col = scaling.apply_inv(self.gt.row(j));
            bt.row_mut(j).copy_from_slice(&col);
        }
        let mut h = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(bt.row(i), bt.row(j));
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        let max_diag = (0..n).map(|i| h[(i, i)]).fold(0.0_f64, f64::max);
        let reg = 1e-13 * max_diag.max(1.0);
        for i in 0..n {
            h[(i, i)] += reg;
        }
        let chol = Cholesky::factor(&h)?;
        Some(Kkt { scaling, bt, chol })
    }

    /// Solves `[0 G^T; G -W^2] [x; z] = [bx; bz]` with iterative refinement.
    fn solve_kkt(&self, kkt: &Kkt, bx: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut x, mut z) = self.solve_kkt_once(kkt, bx, bz);
        for _ in 0..self.set.refinement_steps {
            let gtz = self.gt.mul_vec(&z);
            let rx: Vec<f64> = bx.iter().zip(&gtz).map(|(b, v)| b - v).collect();
            let gx = self.p.g.mul_vec(&x);
            let w2z = kkt.scaling.apply(&kkt.scaling.apply(&z));
            let rz: Vec<f64> = bz
                .iter()
                .zip(gx.iter().zip(&w2z))
                .map(|(b, (g, w))| b - (g - w))
                .collect();
            let scale = 1.0 + norm2(bx).max(norm2(bz));
            if norm2(&rx).max(norm2(&rz)) <= 1e-14 * scale {
                break;
            }
            let (dx, dz) = self.solve_kkt_once(kkt, &rx, &rz);
            axpy(1.0, &dx, &mut x);
            axpy(1.0, &dz, &mut z);
        }
        (x, z)
    }

    fn solve_kkt_once(&self, kkt: &Kkt, bx: &[f64], bz: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let wbz = kkt.scaling.apply_inv(bz);
        let mut x = kkt.bt.mul_vec(&wbz);
        axpy(1.0, bx, &mut x);
        kkt.chol.solve_in_place(&mut x);
        let bx_ = kkt.bt.tmul_vec(&x);
        let zt: Vec<f64> = bx_.iter().zip(&wbz).map(|(a, b)| a - b).collect();
        let z = kkt.scaling.apply_inv(&zt);
        (x, z)
    }

    fn initial_point(&self) -> Option<Iterate> {
        let cone = &self.p.cone;
        let m = self.p.num_rows();
        let n = self.p.num_vars();
        let e = cone.identity();
        let unit = NtScaling::new(cone, &e, &e)?;
        let kkt = self.factor(unit)?;
        let (x, zp) = self.solve_kkt(&kkt, &vec![0.0; n], &self.p.h);
        let mut s: Vec<f64> = zp.iter().map(|v| -v).collect();
        let neg_c: Vec<f64> = self.p.c.iter().map(|v| -v).collect();
        let (_, mut z) = self.solve_kkt(&kkt, &neg_c, &vec![0.0; m]);
        shift_into_interior(cone, &mut s);
        shift_into_interior(cone, &mut z);
        Some(Iterate {
            x,
            s,
            z,
            tau: 1.0,
            kappa: 1.0,
        })
    }

    fn run(&self, start: Option<&InitialPoint>) -> Solution {
        let p = self.p;
        let cone = &p.cone;
        let m = p.num_rows();
        let degree = cone.degree() as f64;
        let e = cone.identity();
        let norm_c = norm2(&p.c).max(1.0);
        let norm_h = norm2(&p.h).max(1.0);

        let mut it = match start {
            Some(st) => Iterate {
                x: st.x.clone(),
                s: st.s.clone(),
                z: st.z.clone(),
                tau: 1.0,
                kappa: 1.0,
            },
            None => match self.initial_point() {
                Some(it) => it,
                None => return self.failure(Status::NumericalFailure, 0, None),
            },
        };

        let mut best: Option<(f64, Solution)> = None;
        for iter in 0..=self.set.max_iters {
            // residuals of the embedding
            let gx = p.g.mul_vec(&it.x);
            let gtz = self.gt.mul_vec(&it.z);
            let rx: Vec<f64> = gtz.iter().zip(&p.c).map(|(a, c)| a + c * it.tau).collect();
            let rz: Vec<f64> = (0..m).map(|i| gx[i] + it.s[i] - p.h[i] * it.tau).collect();
            let cx = dot(&p.c, &it.x);
            let hz = dot(&p.h, &it.z);
            let rt = it.kappa + cx + hz;
            let sz = dot(&it.s, &it.z);
            let mu = (sz + it.tau * it.kappa) / (degree + 1.0);

            let pcost = cx / it.tau;
            let dcost = -hz / it.tau;
            let pres = norm2(&rz) / it.tau / norm_h;
            let dres = norm2(&rx) / it.tau / norm_c;
            let gap = sz / (it.tau * it.tau);
            let relgap = if pcost < 0.0 {
                gap / -pcost
            } else if dcost > 0.0 {
                gap / dcost
            } else {
                f64::INFINITY
            };
            let snapshot = |status| self.unscaled(&it, status, iter, pres, dres, gap);

            if pres <= self.set.feastol
                && dres <= self.set.feastol
                && (gap <= self.set.abstol || relgap <= self.set.reltol)
            {
                return snapshot(Status::Optimal);
            }
            let loose = pres.max(dres).max(gap.min(relgap));
            if loose <= self.set.reduced_tol && best.as_ref().is_none_or(|(v, _)| loose < *v) {
                best = Some((loose, snapshot(Status::NearOptimal)));
            }
            // infeasibility certificates
            if hz < 0.0 {
                let r = norm2(&gtz) / norm_c / -hz;
                if r <= self.set.feastol {
                    return self.certificate(&it, Status::PrimalInfeasible, iter, -hz);
                }
            }
            if cx < 0.0 {
                let gxs: Vec<f64> = gx.iter().zip(&it.s).map(|(a, b)| a + b).collect();
                let r = norm2(&gxs) / norm_h / -cx;
                if r <= self.set.feastol {
                    return self.certificate(&it, Status::DualInfeasible, iter, -cx);
                }
            }
            if iter == self.set.max_iters {
                break;
            }

            let Some(scaling) = NtScaling::new(cone, &it.s, &it.z) else {
                break;
            };
            let lambda = scaling.apply(&it.z);
            let Some(kkt) = self.factor(scaling) else {
                break;
            };
            let neg_c: Vec<f64> = p.c.iter().map(|v| -v).collect();
            let (x1, z1) = self.solve_kkt(&kkt, &neg_c, &p.h);
            let denom1 = dot(&p.c, &x1) + dot(&p.h, &z1) - it.kappa / it.tau;

            let direction = |eta: f64, ds: &[f64], dk: f64| {
                let lds = cone.inv_circ(&lambda, ds);
                let wlds = kkt.scaling.apply(&lds);
                let bx: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
                let bz: Vec<f64> = (0..m).map(|i| -eta * rz[i] - wlds[i]).collect();
                let (x2, z2) = self.solve_kkt(&kkt, &bx, &bz);
                let num = -eta * rt - dk / it.tau - dot(&p.c, &x2) - dot(&p.h, &z2);
                let dtau = num / denom1;
                let mut dx = x2;
                axpy(dtau, &x1, &mut dx);
                let mut dz = z2;
                axpy(dtau, &z1, &mut dz);
                let wdz = kkt.scaling.apply(&dz);
                let inner: Vec<f64> = lds.iter().zip(&wdz).map(|(a, b)| a - b).collect();
                let dsv = kkt.scaling.apply(&inner);
                let dkappa = (dk - it.kappa * dtau) / it.tau;
                (dx, dsv, dz, dtau, dkappa)
            };
            let step_len = |dsv: &[f64], dz: &[f64], dtau: f64, dkappa: f64| {
                let mut a = cone.max_step(&it.s, dsv).min(cone.max_step(&it.z, dz));
                if dtau < 0.0 {
                    a = a.min(-it.tau / dtau);
                }
                if dkappa < 0.0 {
                    a = a.min(-it.kappa / dkappa);
                }
                a
            };

            // predictor
            let lam_sq = cone.circ(&lambda, &lambda);
            let ds_aff: Vec<f64> = lam_sq.iter().map(|v| -v).collect();
            let dk_aff = -it.tau * it.kappa;
            let (_, dsa, dza, dta, dka) = direction(1.0, &ds_aff, dk_aff);
            let alpha_aff = step_len(&dsa, &dza, dta, dka).min(1.0);
            let sigma = (1.0 - alpha_aff).powi(3);

            // corrector
            let w_inv_dsa = kkt.scaling.apply_inv(&dsa);
            let w_dza = kkt.scaling.apply(&dza);
            let corr = cone.circ(&w_inv_dsa, &w_dza);
            let ds: Vec<f64> = (0..m)
                .map(|i| -lam_sq[i] + sigma * mu * e[i] - corr[i])
                .collect();
            let dk = -it.tau * it.kappa + sigma * mu - dta * dka;
            let (dx, dsv, dz, dtau, dkappa) = direction(1.0 - sigma, &ds, dk);
            let alpha = (self.set.step_fraction * step_len(&dsv, &dz, dtau, dkappa)).min(1.0);
            if !(alpha > 1e-12) || !alpha.is_finite() {
                break;
            }

            axpy(alpha, &dx, &mut it.x);
            axpy(alpha, &dsv, &mut it.s);
            axpy(alpha, &dz, &mut it.z);
            it.tau += alpha * dtau;
            it.kappa += alpha * dkappa;
            if !(it.tau > 0.0 && it.kappa > 0.0) || it.x.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        match best {
            Some((_, sol)) => sol,
            None => {
                let status = if it.x.iter().all(|v| v.is_finite()) {
                    Status::MaxIterations
                } else {
                    Status::NumericalFailure
                };
                self.failure(status, self.set.max_iters, Some(&it))
            }
        }
    }

    fn unscaled(
        &self,
        it: &Iterate,
        status: Status,
        iterations: usize,
        pres: f64,
        dres: f64,
        gap: f64,
    ) -> Solution {
        let t = it.tau;
        let x: Vec<f64> = it.x.iter().map(|v| v / t).collect();
        let s: Vec<f64> = it.s.iter().map(|v| v / t).collect();
        let z: Vec<f64> = it.z.iter().map(|v| v / t).collect();
        Solution {
            status,
            primal_objective: dot(&self.p.c, &x),
            dual_objective: -dot(&self.p.h, &z),
            x,
            s,
            z,
            primal_residual: pres,
            dual_residual: dres,
            gap,
            iterations,
        }
    }

    fn certificate(&self, it: &Iterate, status: Status, iterations: usize, scale: f64) -> Solution {
        let x: Vec<f64> = it.x.iter().map(|v| v / scale).collect();
        let s: Vec<f64> = it.s.iter().map(|v| v / scale).collect();
        let z: Vec<f64> = it.z.iter().map(|v| v / scale).collect();
        Solution {
            status,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            x,
            s,
            z,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            iterations,
        }
    }

    fn failure(&self, status: Status, iterations: usize, it: Option<&Iterate>) -> Solution {
        let (m, n) = (self.p.num_rows(), self.p.num_vars());
        let (x, s, z) = match it {
            Some(it) => (it.x.clone(), it.s.clone(), it.z.clone()),
            None => (vec![f64::NAN; n], vec![f64::NAN; m], vec![f64::NAN; m]),
        };
        Solution {
            status,
            x,
            s,
            z,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            iterations,
        }
    }
}

/// Moves `v` into the interior along the identity direction if needed.
fn shift_into_interior(cone: &ConeSpec, v: &mut [f64]) {
    let alpha = -cone.min_eig(v);
    if alpha >= 0.0 {
        let e = cone.identity();
        axpy(1.0 + alpha, &e, v);
    }
}
