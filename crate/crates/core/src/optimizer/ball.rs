use crate::distribution::{intersect_positions, SampleTargetDistribution};
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;

/// The feasible set of the descent: the ball of radius `r` around
/// `b = (b_1, …, b_m)` intersected with the subspace `a_i ∈ W_i`.
///
/// Inside the subspace this is a ball of squared radius `r² - β` around the
/// projected center `Π_W b`, where `β = Σ ‖Π_{W_i⊥} b_i‖²`.
#[derive(Debug, Clone)]
pub struct BallGeometry {
    pub radius: f64,
    pub beta: f64,
    /// `Π_{W_i} b_i`, aligned with each sample `A_i`.
    pub center: Vec<Vec<f64>>,
}

impl BallGeometry {
    pub fn new(dist: &SampleTargetDistribution, radius: f64) -> Self {
        let mut beta = 0.0;
        let center = dist
            .pairs()
            .iter()
            .map(|pair| {
                let w = 1.0 / pair.target.len() as f64;
                let mut c = vec![0.0; pair.sample.len()];
                let hits = intersect_positions(&pair.sample, &pair.target);
                for &(k, _) in &hits {
                    c[k] = w;
                }
                beta += (pair.target.len() - hits.len()) as f64 * w * w;
                c
            })
            .collect();
        Self { radius, beta, center }
    }

    /// `r² - β`; negative when the ball misses the subspace.
    pub fn slack(&self) -> f64 {
        self.radius * self.radius - self.beta
    }

    pub fn check_feasible(&self) -> Result<()> {
        if self.slack() < 0.0 {
            Err(Error::InfeasibleBall {
                radius_sq: self.radius * self.radius,
                beta: self.beta,
            })
        } else {
            Ok(())
        }
    }

    /// `Σ ‖a_i - Π_{W_i} b_i‖²` for aligned weights.
    pub fn distance_sq(&self, aligned: &[Vec<f64>]) -> f64 {
        aligned
            .iter()
            .zip(&self.center)
            .map(|(a, c)| a.iter().zip(c).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
            .sum()
    }
}

/// In-place projection of aligned weights onto the ball; returns the
/// contraction factor `λ`.
pub(crate) fn project_aligned(aligned: &mut [Vec<f64>], geom: &BallGeometry) -> Result<f64> {
    geom.check_feasible()?;
    let dist_sq = geom.distance_sq(aligned);
    // at the center the ratio is 0/0; the point is already inside
    let lambda = if dist_sq > 0.0 {
        (geom.slack() / dist_sq).sqrt().min(1.0)
    } else {
        1.0
    };
    if lambda < 1.0 {
        for (a, c) in aligned.iter_mut().zip(&geom.center) {
            for (x, &y) in a.iter_mut().zip(c) {
                *x = lambda * *x + (1.0 - lambda) * y;
            }
        }
    }
    Ok(lambda)
}

/// Euclidean projection of `a` onto the ball within the subspace. Returns the
/// projected estimator and `λ`.
pub fn project_to_ball(
    a: &SemilinearEstimator,
    geom: &BallGeometry,
    dist: &SampleTargetDistribution,
) -> Result<(SemilinearEstimator, f64)> {
    let mut aligned = a.aligned(dist)?;
    let lambda = project_aligned(&mut aligned, geom)?;
    Ok((SemilinearEstimator::from_aligned(dist, &aligned)?, lambda))
}
