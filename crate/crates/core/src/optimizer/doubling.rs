use serde::{Deserialize, Serialize};

use super::ogd::{minimize_with_bound, OgdConfig, OgdRun};
use crate::distribution::SampleTargetDistribution;
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;

use super::ogd::OgdTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingAttempt {
    pub p: f64,
    /// `None` when the ball missed the feasible subspace at this `p`.
    pub best_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DoublingOutcome {
    pub estimator: SemilinearEstimator,
    pub trace: OgdTrace,
    pub p_final: f64,
    pub doublings: usize,
    /// False when the doubling cap ran out before any run certified its `p`;
    /// the returned run is then the best one seen.
    pub accepted: bool,
    pub attempts: Vec<DoublingAttempt>,
}

/// Runs the descent with `p = p_init, 2 p_init, 4 p_init, …`, accepting the
/// first run whose best objective is at most `p`. Each attempt starts fresh.
pub fn run_with_doubling(dist: &SampleTargetDistribution, cfg: &OgdConfig) -> Result<DoublingOutcome> {
    cfg.validate()?;
    let n = dist.n();
    let max_doublings = cfg.doublings_for(n);
    let mut p = cfg.p_init_for(n);
    let mut attempts = Vec::new();
    let mut best: Option<(OgdRun, usize)> = None;

    for doublings in 0..=max_doublings {
        match minimize_with_bound(dist, cfg, p) {
            Ok(run) => {
                let value = run.trace.best_value;
                attempts.push(DoublingAttempt {
                    p,
                    best_value: Some(value),
                });
                if value <= p {
                    return Ok(DoublingOutcome {
                        estimator: run.estimator,
                        trace: run.trace,
                        p_final: p,
                        doublings,
                        accepted: true,
                        attempts,
                    });
                }
                if best.as_ref().is_none_or(|(b, _)| value < b.trace.best_value) {
                    best = Some((run, doublings));
                }
            }
            Err(Error::InfeasibleBall { .. }) => attempts.push(DoublingAttempt { p, best_value: None }),
            Err(e) => return Err(e),
        }
        if doublings < max_doublings {
            p *= 2.0;
        }
    }

    match best {
        Some((run, doublings)) => Ok(DoublingOutcome {
            p_final: run.trace.p,
            estimator: run.estimator,
            trace: run.trace,
            doublings,
            accepted: false,
            attempts,
        }),
        None => Err(Error::InfeasibleBall {
            radius_sq: cfg.radius(dist.m(), p).powi(2),
            beta: super::BallGeometry::new(dist, 0.0).beta,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Pair;
    use crate::loss::NormRegime;

    #[test]
    fn zero_optimum_accepts_immediately() {
        let d = SampleTargetDistribution::new(
            3,
            vec![Pair::new(vec![0, 1], vec![0, 1]), Pair::new(vec![2], vec![2])],
        )
        .unwrap();
        for regime in [NormRegime::L2, NormRegime::Linf] {
            let out = run_with_doubling(&d, &OgdConfig::new(regime)).unwrap();
            assert!(out.accepted);
            assert_eq!(out.doublings, 0);
            assert!((out.p_final - 1.0 / 3.0).abs() < 1e-15);
            assert_eq!(out.trace.best_value, 0.0);
        }
    }

    #[test]
    fn disjoint_targets_force_doubling() {
        // beta = m = 2 while r² = m/n = 1 at p = 1/n
        let d = SampleTargetDistribution::new(
            2,
            vec![Pair::new(vec![0], vec![1]), Pair::new(vec![1], vec![0])],
        )
        .unwrap();
        let mut cfg = OgdConfig::new(NormRegime::L2);
        cfg.t_max = 50;
        let out = run_with_doubling(&d, &cfg).unwrap();
        assert!(out.doublings >= 1);
        assert_eq!(out.attempts[0].best_value, None);
        assert!(out.doublings <= cfg.doublings_for(2));
    }

    #[test]
    fn cap_is_respected() {
        let d = SampleTargetDistribution::new(
            2,
            vec![Pair::new(vec![0], vec![1]), Pair::new(vec![1], vec![0])],
        )
        .unwrap();
        let mut cfg = OgdConfig::new(NormRegime::L2);
        cfg.t_max = 5;
        cfg.p_doublings_max = Some(0);
        // the only attempt is infeasible
        assert!(matches!(run_with_doubling(&d, &cfg), Err(Error::InfeasibleBall { .. })));
        cfg.p_doublings_max = Some(1);
        let out = run_with_doubling(&d, &cfg).unwrap();
        assert!(out.doublings <= 1);
        assert_eq!(out.attempts.len(), 2);
    }
}
