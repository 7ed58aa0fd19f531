//! Release, propagation and reception.

use crate::affinity::AffinityMatrix;
use crate::error::{Error, Result};
use crate::poisson;
use mmsk_conic::Matrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Arrival-rate profile of one molecule type,
/// `v(t) = (gamma/beta) (1 + alpha/beta) (1 - e^{-t/alpha}) e^{-t/beta}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelResponse {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ChannelResponse {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1.7,
            gamma: 0.01,
        }
    }
}

impl ChannelResponse {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "channel needs alpha, beta > 0 and gamma in (0, 1], got ({alpha}, {beta}, {gamma})"
            )));
        }
        Ok(Self { alpha, beta, gamma })
    }

    fn scale(&self) -> f64 {
        self.gamma * (self.alpha + self.beta) / (self.beta * self.beta)
    }

    /// Arrival rate at time `t` (zero before release).
    pub fn rate(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.scale() * (-(-t / self.alpha).exp_m1()) * (-t / self.beta).exp()
    }

    /// Time of the rate maximum, `alpha ln(1 + beta/alpha)`.
    pub fn peak_time(&self) -> f64 {
        self.alpha * (self.beta / self.alpha).ln_1p()
    }

    pub fn peak_rate(&self) -> f64 {
        self.rate(self.peak_time())
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        let fast = a * b / (a + b);
        self.scale() * (-b * (-t / b).exp() + fast * (-t / fast).exp())
    }

    /// Fraction of released molecules arriving in `[t0, t1]`; `t1` may be infinite.
    pub fn integral(&self, t0: f64, t1: f64) -> Result<f64> {
        if t1 < t0 || t0.is_nan() || t1.is_nan() {
            return Err(Error::BadInterval { t0, t1 });
        }
        let (t0, t1) = (t0.max(0.0), t1.max(0.0));
        if t0 == t1 {
            return Ok(0.0);
        }
        Ok((self.antiderivative(t1) - self.antiderivative(t0)).max(0.0))
    }
}

/// Release of one mixture. `mixture_id` indexes the global alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReleaseEvent {
    pub mixture_id: usize,
    pub release_time: f64,
    pub n_rls: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReceptionConfig {
    pub lambda_r: f64,
    pub x_thr: f64,
    pub delta_t: f64,
    pub n_samples: usize,
}

impl Default for ReceptionConfig {
    fn default() -> Self {
        Self {
            lambda_r: 10.0,
            x_thr: 5.0,
            delta_t: 0.2,
            n_samples: 50,
        }
    }
}

impl ReceptionConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.lambda_r >= 0.0 && self.x_thr >= 0.0 && self.delta_t > 0.0) {
            return Err(Error::InvalidParam(
                "reception needs lambda_r, x_thr >= 0 and delta_t > 0".into(),
            ));
        }
        Ok(())
    }
}

/// One sampling interval at the receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayObservation {
    pub x_bar: Vec<f64>,
    pub x: Vec<u64>,
    pub y: Vec<f64>,
}

/// Expected arrivals per molecule type in sample `j` (1-based), i.e. over
/// `((j-1) dt, j dt]`.
pub fn expected_arrivals(
    events: &[ReleaseEvent],
    construction: &Matrix,
    channels: &[ChannelResponse],
    cfg: &ReceptionConfig,
    j: usize,
) -> Result<Vec<f64>> {
    let q = construction.rows();
    if channels.len() != q {
        return Err(Error::Dimension(format!(
            "{} channels for {q} molecule types",
            channels.len()
        )));
    }
    if j == 0 {
        return Err(Error::InvalidParam("sample index is 1-based".into()));
    }
    let mut out = vec![0.0; q];
    for ev in events {
        if ev.mixture_id >= construction.cols() {
            return Err(Error::InvalidParam(format!(
                "mixture id {} out of range",
                ev.mixture_id
            )));
        }
        let t0 = ((j - 1) as f64 * cfg.delta_t - ev.release_time).max(0.0);
        let t1 = (j as f64 * cfg.delta_t - ev.release_time).max(0.0);
        if t1 == 0.0 {
            continue;
        }
        for (qi, ch) in channels.iter().enumerate() {
            let frac = construction[(qi, ev.mixture_id)];
            if frac != 0.0 {
                out[qi] += ev.n_rls * frac * ch.integral(t0, t1)?;
            }
        }
    }
    Ok(out)
}

pub fn sample_arrivals<R: Rng + ?Sized>(x_bar: &[f64], rng: &mut R) -> Vec<u64> {
    poisson::sample_vec(rng, x_bar)
}

#[inline]
pub fn relu(v: f64, x_thr: f64) -> f64 {
    if v >= x_thr {
        v - x_thr
    } else {
        0.0
    }
}

/// `y = relu(A x + n, x_thr)` with fresh Poisson noise `n`.
pub fn receive<R: Rng + ?Sized>(
    a: &AffinityMatrix,
    x: &[u64],
    cfg: &ReceptionConfig,
    rng: &mut R,
) -> Vec<f64> {
    let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let mut pre = a.apply(&xf);
    for p in pre.iter_mut() {
        *p = relu(*p + poisson::sample(rng, cfg.lambda_r) as f64, cfg.x_thr);
    }
    pre
}

/// Draws arrivals around `x_bar` and pushes them through the array.
pub fn observe<R: Rng + ?Sized>(
    a: &AffinityMatrix,
    x_bar: &[f64],
    cfg: &ReceptionConfig,
    rng: &mut R,
) -> ArrayObservation {
    let x = sample_arrivals(x_bar, rng);
    let y = receive(a, &x, cfg, rng);
    ArrayObservation {
        x_bar: x_bar.to_vec(),
        x,
        y,
    }
}
