use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distribution::SampleTargetDistribution;
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;
use crate::loss::{build_loss_matrix, dot, norm, DataValues, LossMatrix, NormRegime};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    /// Unit vector `v`.
    pub vector: Vec<f64>,
    /// `vᵀ M v`.
    pub rayleigh: f64,
    pub iterations: usize,
}

/// Power-iteration schedule. The defaults give an iteration cap of
/// `⌈40 ln(n+10) / eps⌉` and stop early once the Rayleigh quotient moves by
/// less than `eps/100` (relative) over a window of 10 iterations.
#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub cap_factor: f64,
    pub window: usize,
    pub stall_factor: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            cap_factor: 40.0,
            window: 10,
            stall_factor: 0.01,
        }
    }
}

/// Approximate top eigenvector of `M` by the power method from a Gaussian
/// start. Each iteration costs one factored product `rowsᵀ(rows·w)`.
pub fn top_eigen<R: Rng + ?Sized>(m: &LossMatrix, eps: f64, rng: &mut R) -> Result<EigenResult> {
    top_eigen_from(m, eps, rng, None, EigenOptions::default())
}

/// As [`top_eigen`], optionally starting from `start` instead of a fresh
/// Gaussian vector.
pub fn top_eigen_from<R: Rng + ?Sized>(
    m: &LossMatrix,
    eps: f64,
    rng: &mut R,
    start: Option<&[f64]>,
    opts: EigenOptions,
) -> Result<EigenResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("loss matrix"));
    }
    let n = m.dim();
    if n == 0 {
        return Ok(EigenResult {
            vector: Vec::new(),
            rayleigh: 0.0,
            iterations: 0,
        });
    }

    let mut w: Vec<f64> = match start {
        Some(s) if s.len() == n && norm(s) > 0.0 => s.to_vec(),
        _ => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
    };
    normalize(&mut w);

    let cap = (opts.cap_factor * ((n + 10) as f64).ln() / eps).ceil() as usize;
    let mut y = vec![0.0; n];
    let mut history: Vec<f64> = Vec::with_capacity(cap.min(4096));
    let mut iterations = 0;
    while iterations < cap {
        m.apply(&w, &mut y);
        iterations += 1;
        let rayleigh = dot(&w, &y);
        let ny = norm(&y);
        if ny == 0.0 {
            // w lies in the null space; with a generic start this means M = 0
            return Ok(EigenResult {
                vector: w,
                rayleigh: 0.0,
                iterations,
            });
        }
        for (wi, yi) in w.iter_mut().zip(&y) {
            *wi = yi / ny;
        }
        history.push(rayleigh);
        let h = history.len();
        if h > opts.window {
            let old = history[h - 1 - opts.window];
            if (rayleigh - old).abs() <= opts.stall_factor * eps * rayleigh.abs() {
                break;
            }
        }
    }

    let rayleigh = m.quadratic_form(&w).max(0.0);
    Ok(EigenResult {
        vector: w,
        rayleigh,
        iterations,
    })
}

fn normalize(w: &mut [f64]) {
    let nrm = norm(w);
    if nrm > 0.0 {
        w.iter_mut().for_each(|v| *v /= nrm);
    }
}

#[derive(Debug, Clone)]
pub struct Sdp2Value {
    /// `n · vᵀMv`, a lower bound on `sdp₂(a)` within `(1 + eps/10)`.
    pub value: f64,
    /// `x = √n v`, attaining `xᵀMx = value`.
    pub adversary: DataValues,
    pub eigen: EigenResult,
}

/// Worst-case ℓ2 error of `a`: `n` times the top eigenvalue of `M(a)`.
pub fn sdp2_value<R: Rng + ?Sized>(
    a: &SemilinearEstimator,
    dist: &SampleTargetDistribution,
    eps: f64,
    rng: &mut R,
) -> Result<Sdp2Value> {
    let m = build_loss_matrix(a, dist)?;
    sdp2_of_matrix(&m, eps, rng)
}

pub fn sdp2_of_matrix<R: Rng + ?Sized>(m: &LossMatrix, eps: f64, rng: &mut R) -> Result<Sdp2Value> {
    let eigen = top_eigen(m, eps, rng)?;
    let n = m.dim() as f64;
    let scale = n.sqrt();
    let x: Vec<f64> = eigen.vector.iter().map(|v| v * scale).collect();
    Ok(Sdp2Value {
        value: n * eigen.rayleigh,
        adversary: DataValues::new(x, NormRegime::L2)?,
        eigen,
    })
}
