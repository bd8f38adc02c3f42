//! Online gradient descent over `a = (a_1, …, a_m)`.
//!
//! Round `t` observes the linear-in-`X` cost `f_t(a) = <M(a), X^(t)>`, where
//! `X^(t)` approximately maximizes `<M(a^(t)), X>` over the adversary's
//! feasible set (rank one `x xᵀ` for ℓ2, unit-diagonal PSD for ℓ∞). The
//! gradient block for `a_i` is `(2/m) Π_{W_i} X (a_i - b_i)`; the step size
//! is `η_t = m/(n√t)`, followed by projection onto the ball around `b`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ball::{project_aligned, BallGeometry};
use crate::distribution::{intersect_positions, SampleTargetDistribution};
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;
use crate::loss::{LossMatrix, NormRegime};
use crate::subproblems::{sdp_inf_solve_with, top_eigen, GramFactor, SdpOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgdConfig {
    pub eps: f64,
    pub t_max: usize,
    /// Initial upper bound on the optimum; `None` means `1/n`.
    pub p_init: Option<f64>,
    /// Doubling cap; `None` means `⌈log₂ n⌉ + 2`.
    pub p_doublings_max: Option<usize>,
    pub regime: NormRegime,
    pub seed: u64,
}

impl OgdConfig {
    pub fn new(regime: NormRegime) -> Self {
        Self {
            eps: 0.01,
            t_max: 1000,
            p_init: None,
            p_doublings_max: None,
            regime,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {}", self.eps)));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidArgument("t_max must be at least 1".into()));
        }
        if let Some(p) = self.p_init {
            if !(p > 0.0) {
                return Err(Error::InvalidArgument(format!("p_init must be positive, got {p}")));
            }
        }
        Ok(())
    }

    pub fn p_init_for(&self, n: usize) -> f64 {
        self.p_init.unwrap_or(1.0 / n.max(1) as f64)
    }

    pub fn doublings_for(&self, n: usize) -> usize {
        self.p_doublings_max
            .unwrap_or_else(|| (n.max(1) as f64).log2().ceil() as usize + 2)
    }

    /// Ball radius for optimum bound `p`: `√(π m p / 2)` for ℓ∞ and `√(m p)`
    /// for ℓ2.
    pub fn radius(&self, m: usize, p: f64) -> f64 {
        match self.regime {
            NormRegime::Linf => (PI * m as f64 * p / 2.0).sqrt(),
            NormRegime::L2 => (m as f64 * p).sqrt(),
        }
    }

    /// Iteration count under which the regret argument certifies `eps`.
    pub fn theoretical_iterations(&self, n: usize, p: f64) -> f64 {
        let base = 36.0 * (n as f64 * p / self.eps).powi(2);
        match self.regime {
            NormRegime::Linf => PI * PI * base,
            NormRegime::L2 => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub eta: f64,
    pub f_t: f64,
    pub lambda: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgdTrace {
    pub regime: NormRegime,
    pub records: Vec<TraceRecord>,
    pub best_t: usize,
    pub best_value: f64,
    pub p: f64,
    pub radius: f64,
    pub beta: f64,
    pub theoretical_iterations: f64,
    /// `3GD/(2√T)` with `G = 2nr/m`, `D = 2r` and `T` the iterations run.
    pub regret_bound: f64,
    /// Subproblem solves that hit their iteration cap; the regret argument
    /// assumes every `X^(t)` meets the `(1 + eps/10)` contract.
    pub unconverged_subproblems: usize,
}

impl OgdTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// CSV with header `t,eta,f_t,lambda,elapsed_ms`, 6-decimal fixed point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "eta", "f_t", "lambda", "elapsed_ms"])?;
        for r in &self.records {
            w.write_record([
                r.t.to_string(),
                format!("{:.6}", r.eta),
                format!("{:.6}", r.f_t),
                format!("{:.6}", r.lambda),
                format!("{:.6}", r.elapsed_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct OgdRun {
    pub estimator: SemilinearEstimator,
    pub trace: OgdTrace,
}

/// Starting point: the sample mean `𝟙_{A_i}/|A_i|`, zero for an empty sample,
/// and `b_i` itself whenever the target lies inside the sample.
pub(crate) fn initial_weights(dist: &SampleTargetDistribution) -> Vec<Vec<f64>> {
    dist.pairs()
        .iter()
        .map(|pair| {
            let s = pair.sample.len();
            if s == 0 {
                return Vec::new();
            }
            let hits = intersect_positions(&pair.sample, &pair.target);
            if hits.len() == pair.target.len() {
                let mut v = vec![0.0; s];
                let w = 1.0 / pair.target.len() as f64;
                for (k, _) in hits {
                    v[k] = w;
                }
                v
            } else {
                vec![1.0 / s as f64; s]
            }
        })
        .collect()
}

/// `u_i = V (a_i - b_i)` for one pair.
fn residual_image(
    factor: &GramFactor,
    sample: &[usize],
    target: &[usize],
    a: &[f64],
    out: &mut [f64],
) {
    let bw = 1.0 / target.len() as f64;
    factor.project_sparse(
        sample
            .iter()
            .copied()
            .zip(a.iter().copied())
            .chain(target.iter().map(|&j| (j, -bw))),
        out,
    );
}

/// `f(a) = <M(a), VᵀV> = (1/m) Σ ‖V(a_i - b_i)‖²`.
pub fn linear_cost(dist: &SampleTargetDistribution, aligned: &[Vec<f64>], factor: &GramFactor) -> f64 {
    let mut u = vec![0.0; factor.rank()];
    let mut total = 0.0;
    for (pair, a) in dist.pairs().iter().zip(aligned) {
        residual_image(factor, &pair.sample, &pair.target, a, &mut u);
        total += u.iter().map(|v| v * v).sum::<f64>();
    }
    total / dist.m() as f64
}

/// Gradient of [`linear_cost`] in aligned form:
/// block `i` is `(2/m) Π_{W_i} VᵀV (a_i - b_i)`.
pub fn linear_cost_gradient(
    dist: &SampleTargetDistribution,
    aligned: &[Vec<f64>],
    factor: &GramFactor,
) -> Vec<Vec<f64>> {
    let scale = 2.0 / dist.m() as f64;
    let mut u = vec![0.0; factor.rank()];
    dist.pairs()
        .iter()
        .zip(aligned)
        .map(|(pair, a)| {
            residual_image(factor, &pair.sample, &pair.target, a, &mut u);
            pair.sample
                .iter()
                .map(|&j| scale * crate::loss::dot(factor.column(j), &u))
                .collect()
        })
        .collect()
}

/// One descent step in aligned form followed by projection; returns `λ`.
pub(crate) fn step_aligned(
    aligned: &mut [Vec<f64>],
    factor: &GramFactor,
    eta: f64,
    geom: &BallGeometry,
    dist: &SampleTargetDistribution,
) -> Result<f64> {
    let scale = eta * 2.0 / dist.m() as f64;
    let mut u = vec![0.0; factor.rank()];
    for (pair, a) in dist.pairs().iter().zip(aligned.iter_mut()) {
        residual_image(factor, &pair.sample, &pair.target, a, &mut u);
        for (x, &j) in a.iter_mut().zip(&pair.sample) {
            *x -= scale * crate::loss::dot(factor.column(j), &u);
        }
    }
    project_aligned(aligned, geom)
}

/// `η_t = m/(n√t)`.
pub fn step_size(m: usize, n: usize, t: usize) -> f64 {
    m as f64 / (n as f64 * (t as f64).sqrt())
}

/// One iteration of the update for an arbitrary PSD direction `X = VᵀV`
/// (rank one `x xᵀ` in the ℓ2 case). Returns `a^(t+1)` and `λ^(t)`.
pub fn ogd_step(
    a: &SemilinearEstimator,
    x: &GramFactor,
    t: usize,
    geom: &BallGeometry,
    dist: &SampleTargetDistribution,
) -> Result<(SemilinearEstimator, f64)> {
    if t == 0 {
        return Err(Error::InvalidArgument("iterations are numbered from 1".into()));
    }
    if x.dim() != dist.n() {
        return Err(Error::DimensionMismatch {
            expected: dist.n(),
            got: x.dim(),
        });
    }
    let mut aligned = a.aligned(dist)?;
    let eta = step_size(dist.m(), dist.n(), t);
    let lambda = step_aligned(&mut aligned, x, eta, geom, dist)?;
    Ok((SemilinearEstimator::from_aligned(dist, &aligned)?, lambda))
}

/// Runs the descent for a fixed optimum bound `p`.
pub fn minimize_with_bound(dist: &SampleTargetDistribution, cfg: &OgdConfig, p: f64) -> Result<OgdRun> {
    cfg.validate()?;
    if !(p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    let n = dist.n();
    let m = dist.m();
    let radius = cfg.radius(m, p);
    let geom = BallGeometry::new(dist, radius);
    geom.check_feasible()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = initial_weights(dist);
    let mut best_a = a.clone();
    let mut best_value = f64::INFINITY;
    let mut best_t = 1;
    let mut records = Vec::with_capacity(cfg.t_max);
    let mut warm: Option<GramFactor> = None;
    let mut unconverged = 0;
    let sqrt_n = (n as f64).sqrt();

    for t in 1..=cfg.t_max {
        let clock = Instant::now();
        let loss = LossMatrix::from_aligned(dist, &a);
        let (factor, f_t) = match cfg.regime {
            NormRegime::L2 => {
                let eig = top_eigen(&loss, cfg.eps, &mut rng)?;
                let x: Vec<f64> = eig.vector.iter().map(|v| v * sqrt_n).collect();
                (GramFactor::rank_one(&x), n as f64 * eig.rayleigh)
            }
            NormRegime::Linf => {
                let sol = match sdp_inf_solve_with(&loss, cfg.eps, &mut rng, warm.as_ref(), SdpOptions::default()) {
                    Ok(sol) => sol,
                    Err(Error::SdpNotConverged { best, .. }) => {
                        unconverged += 1;
                        *best
                    }
                    Err(e) => return Err(e),
                };
                (sol.factor, sol.objective)
            }
        };
        if f_t < best_value {
            best_value = f_t;
            best_t = t;
            best_a.clone_from(&a);
        }
        let eta = step_size(m, n, t);
        if f_t <= 0.0 {
            // M(a) = 0: a is an exact optimum and every later gradient vanishes
            records.push(TraceRecord {
                t,
                eta,
                f_t,
                lambda: 1.0,
                elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
            });
            break;
        }
        let lambda = step_aligned(&mut a, &factor, eta, &geom, dist)?;
        if cfg.regime == NormRegime::Linf {
            warm = Some(factor);
        }
        records.push(TraceRecord {
            t,
            eta,
            f_t,
            lambda,
            elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
    }

    let iterations = records.len().max(1) as f64;
    let g = 2.0 * n as f64 * radius / m as f64;
    let d = 2.0 * radius;
    let trace = OgdTrace {
        regime: cfg.regime,
        records,
        best_t,
        best_value,
        p,
        radius,
        beta: geom.beta,
        theoretical_iterations: cfg.theoretical_iterations(n, p),
        regret_bound: 3.0 * g * d / (2.0 * iterations.sqrt()),
        unconverged_subproblems: unconverged,
    };
    Ok(OgdRun {
        estimator: SemilinearEstimator::from_aligned(dist, &best_a)?,
        trace,
    })
}

fn require_regime(cfg: &OgdConfig, regime: NormRegime) -> Result<()> {
    if cfg.regime != regime {
        return Err(Error::InvalidArgument(format!(
            "configuration is for {}, expected {}",
            cfg.regime.name(),
            regime.name()
        )));
    }
    Ok(())
}

/// Descent on `sdp₂(a) = n λ_max(M(a))` at `p = cfg.p_init`.
pub fn minimize_sdp2(dist: &SampleTargetDistribution, cfg: &OgdConfig) -> Result<OgdRun> {
    require_regime(cfg, NormRegime::L2)?;
    minimize_with_bound(dist, cfg, cfg.p_init_for(dist.n()))
}

/// Descent on `sdp∞(a)` at `p = cfg.p_init`.
pub fn minimize_sdp_inf(dist: &SampleTargetDistribution, cfg: &OgdConfig) -> Result<OgdRun> {
    require_regime(cfg, NormRegime::Linf)?;
    minimize_with_bound(dist, cfg, cfg.p_init_for(dist.n()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Pair;

    #[test]
    fn initial_point_rules() {
        let d = SampleTargetDistribution::new(
            4,
            vec![
                Pair::new(vec![0, 1, 2], vec![3]),
                Pair::new(vec![], vec![0]),
                Pair::new(vec![0, 1, 2, 3], vec![1, 3]),
            ],
        )
        .unwrap();
        let a = initial_weights(&d);
        assert_eq!(a[0], vec![1.0 / 3.0; 3]);
        assert!(a[1].is_empty());
        assert_eq!(a[2], vec![0.0, 0.5, 0.0, 0.5]);
    }

    #[test]
    fn zero_direction_is_projection_only() {
        let d = SampleTargetDistribution::new(2, vec![Pair::new(vec![0], vec![0, 1])]).unwrap();
        let geom = BallGeometry::new(&d, 10.0);
        let a = SemilinearEstimator::new(2, vec![vec![(0, 0.3)]]).unwrap();
        let zero = GramFactor::rank_one(&[0.0, 0.0]);
        let (next, lambda) = ogd_step(&a, &zero, 1, &geom, &d).unwrap();
        assert_eq!(next, a);
        assert_eq!(lambda, 1.0);
    }

    #[test]
    fn exact_estimator_is_fixed_point() {
        let d = SampleTargetDistribution::new(2, vec![Pair::new(vec![0, 1], vec![0, 1])]).unwrap();
        let geom = BallGeometry::new(&d, 1.0);
        let a = SemilinearEstimator::new(2, vec![vec![(0, 0.5), (1, 0.5)]]).unwrap();
        let x = GramFactor::rank_one(&[1.0, -1.0]);
        let (next, _) = ogd_step(&a, &x, 3, &geom, &d).unwrap();
        assert_eq!(next, a);
    }

    #[test]
    fn regime_mismatch_is_rejected() {
        let d = SampleTargetDistribution::new(1, vec![Pair::new(vec![0], vec![0])]).unwrap();
        assert!(minimize_sdp2(&d, &OgdConfig::new(NormRegime::Linf)).is_err());
        assert!(minimize_sdp_inf(&d, &OgdConfig::new(NormRegime::L2)).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let d = SampleTargetDistribution::new(2, vec![Pair::new(vec![0], vec![1])]).unwrap();
        let mut cfg = OgdConfig::new(NormRegime::L2);
        cfg.t_max = 3;
        let run = minimize_with_bound(&d, &cfg, 4.0).unwrap();
        let mut buf = Vec::new();
        run.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,eta,f_t,lambda,elapsed_ms"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1");
        assert_eq!(first[1], "0.500000");
        assert_eq!(text.lines().count(), 4);
    }
}
