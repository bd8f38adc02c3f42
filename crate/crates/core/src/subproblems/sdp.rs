//! `max <M, X>` over PSD `X` with unit diagonal, solved in low-rank form
//! `X = VᵀV` by block coordinate ascent over the columns of `V`.
//!
//! With the other columns fixed the objective is `M_jj + 2<V_j, g_j> + const`
//! where `g_j = Σ_{l≠j} M_jl V_l`, so the best unit column is `g_j/‖g_j‖`.
//! Each sweep costs `O(n²k)` and never decreases the objective.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GramFactor;
use crate::distribution::SampleTargetDistribution;
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;
use crate::loss::{build_loss_matrix, dot, norm, LossMatrix};

/// A feasible point of the unit-diagonal SDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdAssignment {
    pub factor: GramFactor,
    /// `<M, X>`
    pub objective: f64,
    pub sweeps: usize,
}

impl PsdAssignment {
    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    /// Wraps an explicit factor, evaluating its objective against `m`.
    pub fn from_factor(factor: GramFactor, m: &LossMatrix) -> Result<Self> {
        if factor.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                got: factor.dim(),
            });
        }
        for j in 0..factor.dim() {
            if (norm(factor.column(j)) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("column {j} of the factor is not unit norm")));
            }
        }
        let objective = factor.inner_with_dense(m.dense());
        Ok(Self {
            factor,
            objective,
            sweeps: 0,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub max_sweeps: usize,
    /// Factor rank; `None` uses `⌈√(2n)⌉ + 1` capped at `n`.
    pub rank: Option<usize>,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 20_000,
            rank: None,
        }
    }
}

pub(crate) fn default_rank(n: usize) -> usize {
    let k = (2.0 * n as f64).sqrt().ceil() as usize + 1;
    k.min(n).max(1)
}

pub fn sdp_inf_solve<R: Rng + ?Sized>(m: &LossMatrix, eps: f64, rng: &mut R) -> Result<PsdAssignment> {
    sdp_inf_solve_with(m, eps, rng, None, SdpOptions::default())
}

/// Solves the unit-diagonal SDP, optionally warm-started from `warm` when its
/// shape matches. Converged once a full sweep improves the objective by at
/// most `eps/20 · max(objective, trace M)`.
pub fn sdp_inf_solve_with<R: Rng + ?Sized>(
    m: &LossMatrix,
    eps: f64,
    rng: &mut R,
    warm: Option<&GramFactor>,
    opts: SdpOptions,
) -> Result<PsdAssignment> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("loss matrix"));
    }
    let n = m.dim();
    let k = opts.rank.unwrap_or_else(|| default_rank(n)).max(1);
    let mut v = match warm {
        Some(w) if w.dim() == n && w.rank() == k => w.clone(),
        _ => GramFactor::random_unit_columns(n, k, rng),
    };
    let d = m.dense();
    let trace: f64 = (0..n).map(|j| d[j * n + j]).sum();

    let mut objective = v.inner_with_dense(d);
    let mut g = vec![0.0; k];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let before = objective;
        for j in 0..n {
            g.iter_mut().for_each(|x| *x = 0.0);
            let row = &d[j * n..(j + 1) * n];
            for (l, &mjl) in row.iter().enumerate() {
                if l != j && mjl != 0.0 {
                    for (gi, &vl) in g.iter_mut().zip(v.column(l)) {
                        *gi += mjl * vl;
                    }
                }
            }
            let gn = norm(&g);
            // zero direction: every unit column is stationary, keep the old one
            if gn > 0.0 && gn.is_finite() {
                let old = dot(v.column(j), &g);
                let col = v.column_mut(j);
                for (c, &gi) in col.iter_mut().zip(&g) {
                    *c = gi / gn;
                }
                objective += 2.0 * (gn - old);
            }
        }
        let improvement = objective - before;
        if improvement <= eps / 20.0 * objective.max(trace) {
            converged = true;
            break;
        }
    }
    let objective = v.inner_with_dense(d);
    let result = PsdAssignment {
        factor: v,
        objective,
        sweeps,
    };
    if converged {
        Ok(result)
    } else {
        Err(Error::SdpNotConverged {
            sweeps,
            best: Box::new(result),
        })
    }
}

/// `sdp∞(a)` for an estimator over `dist`.
pub fn sdp_inf_value<R: Rng + ?Sized>(
    a: &SemilinearEstimator,
    dist: &SampleTargetDistribution,
    eps: f64,
    rng: &mut R,
) -> Result<PsdAssignment> {
    let m = build_loss_matrix(a, dist)?;
    sdp_inf_solve(&m, eps, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_columns(p: &PsdAssignment) -> bool {
        (0..p.factor.dim()).all(|j| (norm(p.factor.column(j)) - 1.0).abs() < 1e-9)
    }

    #[test]
    fn identity_objective_is_trace() {
        let m = LossMatrix::from_rows(
            3,
            &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sdp_inf_solve(&m, 0.01, &mut rng).unwrap();
        assert!((p.objective - 3.0).abs() < 1e-12);
        assert!(unit_columns(&p));
    }

    #[test]
    fn two_by_two_optimum() {
        // M = [[.25,-.25],[-.25,.25]]; over X = [[1,ρ],[ρ,1]] the objective is
        // 0.5 - 0.5ρ, maximized at ρ = -1 with value 1.
        let m = LossMatrix::from_rows(2, &[vec![0.5, -0.5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = sdp_inf_solve(&m, 0.01, &mut rng).unwrap();
        assert!((p.objective - 1.0).abs() < 1e-9, "{}", p.objective);
        assert!((p.factor.entry(0, 1) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_matrix_converges_immediately() {
        let m = LossMatrix::from_rows(4, &[vec![0.0; 4]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = sdp_inf_solve(&m, 0.01, &mut rng).unwrap();
        assert_eq!(p.objective, 0.0);
        assert_eq!(p.sweeps, 1);
        assert!(unit_columns(&p));
    }

    #[test]
    fn iteration_cap_reports_best() {
        let m = LossMatrix::from_rows(3, &[vec![1.0, -0.3, 0.2], vec![0.1, 0.4, -0.9]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let opts = SdpOptions {
            max_sweeps: 1,
            rank: Some(2),
        };
        // a single sweep from a random start cannot certify convergence
        match sdp_inf_solve_with(&m, 1e-9, &mut rng, None, opts) {
            Err(Error::SdpNotConverged { sweeps, best }) => {
                assert_eq!(sweeps, 1);
                assert!(best.objective >= m.trace() - 1e-9 || best.objective > 0.0);
                assert!(unit_columns(&best));
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rank_choice() {
        assert_eq!(default_rank(1), 1);
        assert_eq!(default_rank(2), 2);
        assert_eq!(default_rank(50), 11);
    }
}
