//! Nesterov-Todd scaling for the product cone.
//!
//! For interior `s` and `z` the scaling `W` is symmetric positive definite
//! and satisfies `W z = W^{-1} s = lambda`.

use crate::cones::{soc_det, ConeSpec};
use crate::linalg::dot;

#[derive(Debug, Clone)]
struct SocBlock {
    start: usize,
    len: usize,
    eta: f64,
    // J-normalized scaling point, w[0]^2 - |w[1..]|^2 = 1
    w: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NtScaling {
    diag: Vec<f64>,
    blocks: Vec<SocBlock>,
}

impl NtScaling {
    /// Computes the scaling from interior points `s` and `z`. Returns `None`
    /// if either point has left the interior numerically.
    pub fn new(cone: &ConeSpec, s: &[f64], z: &[f64]) -> Option<Self> {
        let mut diag = Vec::with_capacity(cone.nonneg);
        for i in 0..cone.nonneg {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            diag.push((s[i] / z[i]).sqrt());
        }
        let mut blocks = Vec::with_capacity(cone.soc.len());
        for r in cone.soc_blocks() {
            let (sb, zb) = (&s[r.clone()], &z[r.clone()]);
            let (ds, dz) = (soc_det(sb), soc_det(zb));
            if !(ds > 0.0 && dz > 0.0 && sb[0] > 0.0 && zb[0] > 0.0) {
                return None;
            }
            let (ns, nz) = (ds.sqrt(), dz.sqrt());
            let sbar: Vec<f64> = sb.iter().map(|v| v / ns).collect();
            let zbar: Vec<f64> = zb.iter().map(|v| v / nz).collect();
            let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
            let mut w = Vec::with_capacity(r.len());
            w.push((sbar[0] + zbar[0]) / (2.0 * gamma));
            for k in 1..r.len() {
                w.push((sbar[k] - zbar[k]) / (2.0 * gamma));
            }
            blocks.push(SocBlock {
                start: r.start,
                len: r.len(),
                eta: (ns / nz).sqrt(),
                w,
            });
        }
        Some(Self { diag, blocks })
    }

    /// Returns `W v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.apply_impl(v, false)
    }

    /// Returns `W^{-1} v`.
    pub fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        self.apply_impl(v, true)
    }

    fn apply_impl(&self, v: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (i, d) in self.diag.iter().enumerate() {
            out[i] = if inverse { v[i] / d } else { v[i] * d };
        }
        for b in &self.blocks {
            let vb = &v[b.start..b.start + b.len];
            let w = &b.w;
            let sign = if inverse { -1.0 } else { 1.0 };
            let scale = if inverse { 1.0 / b.eta } else { b.eta };
            let w1v1 = dot(&w[1..], &vb[1..]);
            out[b.start] = scale * (w[0] * vb[0] + sign * w1v1);
            let coef = sign * vb[0] + w1v1 / (1.0 + w[0]);
            for k in 1..b.len {
                out[b.start + k] = scale * (vb[k] + coef * w[k]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_maps_z_and_s_to_same_point() {
        let cone = ConeSpec::new(2, vec![3, 4]);
        let s = [0.4, 3.0, 2.0, 0.5, -1.2, 5.0, 1.0, 2.0, -3.0];
        let z = [1.5, 0.2, 1.0, -0.3, 0.6, 2.0, -0.5, 0.4, 0.9];
        let w = NtScaling::new(&cone, &s, &z).unwrap();
        let a = w.apply(&z);
        let b = w.apply_inv(&s);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12, "{a:?} {b:?}");
        }
        let back = w.apply_inv(&w.apply(&s));
        for (x, y) in back.iter().zip(&s) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
