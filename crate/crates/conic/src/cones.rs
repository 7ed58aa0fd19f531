//! Cone bookkeeping: the nonnegative orthant followed by second-order cones.
//!
//! A vector in the product cone is laid out as `[orthant | soc_0 | soc_1 | ...]`.
//! Each second-order block `(t, u)` requires `t >= ||u||`.

use crate::linalg::{dot, norm2};

/// Shape of the product cone.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConeSpec {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeSpec {
    pub fn new(nonneg: usize, soc: Vec<usize>) -> Self {
        Self { nonneg, soc }
    }

    /// Total number of rows.
    pub fn dim(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant coordinate and one per second-order block.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    /// Offsets of the second-order blocks.
    pub fn soc_blocks(&self) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        let mut start = self.nonneg;
        self.soc.iter().map(move |&d| {
            let r = start..start + d;
            start += d;
            r
        })
    }

    /// Identity element of the Jordan algebra.
    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[..self.nonneg].fill(1.0);
        for b in self.soc_blocks() {
            e[b.start] = 1.0;
        }
        e
    }

    /// Smallest "eigenvalue" over all blocks; positive iff `v` is interior.
    pub fn min_eig(&self, v: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for &x in &v[..self.nonneg] {
            m = m.min(x);
        }
        for b in self.soc_blocks() {
            let blk = &v[b];
            m = m.min(blk[0] - norm2(&blk[1..]));
        }
        m
    }

    pub fn is_interior(&self, v: &[f64]) -> bool {
        self.min_eig(v) > 0.0
    }

    /// Largest step `a` (possibly infinite) with `v + a * dv` in the cone.
    /// `v` must be interior.
    pub fn max_step(&self, v: &[f64], dv: &[f64]) -> f64 {
        let mut a = f64::INFINITY;
        for (x, d) in v[..self.nonneg].iter().zip(&dv[..self.nonneg]) {
            if *d < 0.0 {
                a = a.min(-x / d);
            }
        }
        for b in self.soc_blocks() {
            a = a.min(soc_max_step(&v[b.clone()], &dv[b]));
        }
        a
    }

    /// Jordan product `u o v`.
    pub fn circ(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for i in 0..self.nonneg {
            out[i] = u[i] * v[i];
        }
        for b in self.soc_blocks() {
            let (ub, vb) = (&u[b.clone()], &v[b.clone()]);
            out[b.start] = dot(ub, vb);
            for k in 1..ub.len() {
                out[b.start + k] = ub[0] * vb[k] + vb[0] * ub[k];
            }
        }
        out
    }

    /// Solves `lambda o x = d` for `x`; `lambda` must be interior.
    pub fn inv_circ(&self, lambda: &[f64], d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; d.len()];
        for i in 0..self.nonneg {
            out[i] = d[i] / lambda[i];
        }
        for b in self.soc_blocks() {
            let (l, db) = (&lambda[b.clone()], &d[b.clone()]);
            let det = soc_det(l);
            let x0 = (l[0] * db[0] - dot(&l[1..], &db[1..])) / det;
            out[b.start] = x0;
            for k in 1..l.len() {
                out[b.start + k] = (db[k] - x0 * l[k]) / l[0];
            }
        }
        out
    }
}

/// `t^2 - ||u||^2` computed as a product to limit cancellation.
#[inline]
pub(crate) fn soc_det(v: &[f64]) -> f64 {
    let n = norm2(&v[1..]);
    (v[0] - n) * (v[0] + n)
}

/// Max step for a single second-order block. The block is mapped to the
/// identity by a Lorentz boost, which preserves the cone, so the step can be
/// read off in closed form.
fn soc_max_step(v: &[f64], dv: &[f64]) -> f64 {
    let nu = soc_det(v).max(f64::MIN_POSITIVE).sqrt();
    let v0 = v[0] / nu;
    let v1 = &v[1..];
    let proj = dot(v1, &dv[1..]) / nu;
    let u0 = (v0 * dv[0] - proj) / nu;
    let coef = proj / (1.0 + v0) - dv[0];
    let mut nrm_sq = 0.0;
    for k in 1..v.len() {
        let vk = v1[k - 1] / nu;
        let uk = (dv[k] + coef * vk) / nu;
        nrm_sq += uk * uk;
    }
    let denom = nrm_sq.sqrt() - u0;
    if denom > 0.0 {
        1.0 / denom
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_step(spec: &ConeSpec, v: &[f64], dv: &[f64]) -> f64 {
        // bisection on membership
        let inside = |a: f64| {
            let p: Vec<f64> = v.iter().zip(dv).map(|(x, d)| x + a * d).collect();
            spec.min_eig(&p) >= 0.0
        };
        if inside(1e6) {
            return f64::INFINITY;
        }
        let (mut lo, mut hi) = (0.0, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if inside(mid) {
                lo = mid
            } else {
                hi = mid
            }
        }
        lo
    }

    #[test]
    fn soc_step_matches_bisection() {
        let spec = ConeSpec::new(0, vec![3]);
        let cases = [
            ([2.0, 0.5, -0.3], [-1.0, 0.2, 0.9]),
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            ([5.0, 3.0, 3.9], [-0.1, 2.0, -4.0]),
        ];
        for (v, d) in cases {
            let a = spec.max_step(&v, &d);
            let b = brute_step(&spec, &v, &d);
            assert!((a - b).abs() < 1e-8 * (1.0 + b), "{a} vs {b}");
        }
        // moving deeper inside never hits the boundary
        assert!(spec
            .max_step(&[1.0, 0.2, 0.1], &[1.0, 0.0, 0.0])
            .is_infinite());
    }

    #[test]
    fn inv_circ_inverts_circ() {
        let spec = ConeSpec::new(2, vec![3, 2]);
        let lam = [0.5, 2.0, 3.0, 1.0, -0.5, 1.5, 0.3];
        let x = [0.1, -0.2, 0.7, 0.3, 0.9, -1.0, 4.0];
        let d = spec.circ(&lam, &x);
        let back = spec.inv_circ(&lam, &d);
        for (a, b) in back.iter().zip(x) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_and_degree() {
        let spec = ConeSpec::new(2, vec![3, 4]);
        assert_eq!(spec.dim(), 9);
        assert_eq!(spec.degree(), 4);
        assert_eq!(
            spec.identity(),
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]
        );
        assert!(spec.is_interior(&spec.identity()));
    }
}
