//! Principal component projection of array outputs.

use super::config::PcaConfig;
use crate::affinity::AffinityMatrix;
use crate::channel::{receive, sample_arrivals, ReceptionConfig};
use crate::error::{Error, Result};
use crate::rng;
use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// `coords[i][c]`: sample `i` on component `c`.
    pub coords: Vec<Vec<f64>>,
    /// Share of the total variance carried by each returned component.
    pub explained: Vec<f64>,
    /// Unit principal directions in the (possibly standardized) input space.
    pub directions: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Per-feature divisor applied before projection (all ones unless
    /// standardized).
    pub scale: Vec<f64>,
}

/// Projects mean-centred samples onto the leading `components` eigenvectors
/// of their sample covariance. With `standardize`, every feature is first
/// divided by its standard deviation (features with zero variance are left
/// unscaled).
pub fn pca_project(
    samples: &[Vec<f64>],
    components: usize,
    standardize: bool,
) -> Result<PcaProjection> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidParam("PCA needs at least two samples".into()));
    }
    let d = samples[0].len();
    if samples.iter().any(|s| s.len() != d) {
        return Err(Error::Dimension("samples differ in length".into()));
    }
    if components == 0 || components > d {
        return Err(Error::InvalidParam(format!(
            "cannot keep {components} of {d} components"
        )));
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for s in samples {
        for i in 0..d {
            let di = s[i] - mean[i];
            for j in i..d {
                cov[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[(i, j)] /= (n - 1) as f64;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    let mut scale = vec![1.0; d];
    if standardize {
        for (i, s) in scale.iter_mut().enumerate() {
            if cov[(i, i)] > 0.0 {
                *s = cov[(i, i)].sqrt();
            }
        }
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] /= scale[i] * scale[j];
            }
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let mut directions = Vec::with_capacity(components);
    let mut explained = Vec::with_capacity(components);
    for &k in order.iter().take(components) {
        directions.push(
            eig.eigenvectors
                .column(k)
                .iter()
                .copied()
                .collect::<Vec<f64>>(),
        );
        let lam = eig.eigenvalues[k].max(0.0);
        explained.push(if total > 0.0 { lam / total } else { 0.0 });
    }
    let coords = samples
        .iter()
        .map(|s| {
            directions
                .iter()
                .map(|u| (0..d).map(|i| u[i] * (s[i] - mean[i]) / scale[i]).sum())
                .collect()
        })
        .collect();
    Ok(PcaProjection {
        coords,
        explained,
        directions,
        mean,
        scale,
    })
}

/// Array outputs for two molecule types at the configured expected counts;
/// returns the samples and the case index of each.
pub fn two_type_samples(
    a: &AffinityMatrix,
    cfg: &ReceptionConfig,
    pca: &PcaConfig,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let q = a.molecules();
    let [ma, mb] = pca.molecules;
    if ma == 0 || mb == 0 || ma > q || mb > q || ma == mb {
        return Err(Error::InvalidParam(
            "PCA molecules must be two distinct labels in 1..=Q".into(),
        ));
    }
    if pca.cases.is_empty() || pca.realizations < pca.cases.len() {
        return Err(Error::InvalidParam(
            "need at least one realization per case".into(),
        ));
    }
    let per = pca.realizations / pca.cases.len();
    let mut samples = Vec::with_capacity(per * pca.cases.len());
    let mut labels = Vec::with_capacity(per * pca.cases.len());
    for (c, case) in pca.cases.iter().enumerate() {
        let mut r = rng::stream(seed, c as u64);
        let mut x_bar = vec![0.0; q];
        x_bar[ma - 1] = case[0];
        x_bar[mb - 1] = case[1];
        for _ in 0..per {
            let x = sample_arrivals(&x_bar, &mut r);
            samples.push(receive(a, &x, cfg, &mut r));
            labels.push(c);
        }
    }
    Ok((samples, labels))
}

/// Mean projected coordinates of each case.
pub fn centroids(proj: &PcaProjection, labels: &[usize], cases: usize) -> Vec<Vec<f64>> {
    let k = proj.explained.len();
    let mut sum = vec![vec![0.0; k]; cases];
    let mut count = vec![0usize; cases];
    for (c, &l) in proj.coords.iter().zip(labels) {
        count[l] += 1;
        for (s, v) in sum[l].iter_mut().zip(c) {
            *s += v;
        }
    }
    for (s, &n) in sum.iter_mut().zip(&count) {
        s.iter_mut().for_each(|v| *v /= n.max(1) as f64);
    }
    sum
}
