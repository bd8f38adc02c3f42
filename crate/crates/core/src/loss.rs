//! The loss matrix `M(a) = (1/m) Σ (a_i - b_i)(a_i - b_i)ᵀ` and fixed-data
//! evaluation.
//!
//! `M` is held in factored form: `m` dense rows `r_i = (a_i - b_i)/√m`, so
//! that `M = Σ r_i r_iᵀ` and `xᵀMx = Σ <r_i, x>²`. The dense `n×n` form is
//! built on first request only.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::distribution::SampleTargetDistribution;
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;

/// Norm ball the adversary's data values are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormRegime {
    /// `max_j |x_j| <= 1`
    Linf,
    /// `‖x‖ <= √n`
    L2,
}

impl NormRegime {
    pub fn name(self) -> &'static str {
        match self {
            NormRegime::Linf => "linf",
            NormRegime::L2 => "l2",
        }
    }
}

impl std::str::FromStr for NormRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linf" | "Linf" | "inf" => Ok(NormRegime::Linf),
            "l2" | "L2" => Ok(NormRegime::L2),
            other => Err(Error::Unknown {
                kind: "regime",
                name: other.to_string(),
            }),
        }
    }
}

/// Data values inside one of the two admissible norm balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataValues {
    x: Vec<f64>,
    regime: NormRegime,
}

impl DataValues {
    pub fn new(x: Vec<f64>, regime: NormRegime) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data values"));
        }
        let ok = match regime {
            NormRegime::Linf => x.iter().all(|v| v.abs() <= 1.0 + 1e-12),
            NormRegime::L2 => {
                let n = x.len() as f64;
                norm(&x) <= n.sqrt() * (1.0 + 1e-12)
            }
        };
        if !ok {
            return Err(Error::OutOfBounds {
                regime: regime.name(),
            });
        }
        Ok(Self { x, regime })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn regime(&self) -> NormRegime {
        self.regime
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The loss matrix of an estimator, in factored row form.
#[derive(Debug, Clone)]
pub struct LossMatrix {
    n: usize,
    num_rows: usize,
    rows: Vec<f64>,
    dense: OnceLock<Vec<f64>>,
}

impl LossMatrix {
    /// Wraps pre-scaled rows, so that `M = Σ r rᵀ`.
    pub fn from_rows(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(n * rows.len());
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: r.len(),
                });
            }
            flat.extend_from_slice(r);
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("loss matrix rows"));
        }
        Ok(Self {
            n,
            num_rows: rows.len(),
            rows: flat,
            dense: OnceLock::new(),
        })
    }

    /// Rows `(a_i - b_i)/√m` from weights aligned with each sample `A_i`.
    pub(crate) fn from_aligned(dist: &SampleTargetDistribution, aligned: &[Vec<f64>]) -> Self {
        let n = dist.n();
        let m = dist.m();
        let scale = 1.0 / (m as f64).sqrt();
        let mut rows = vec![0.0; n * m];
        for (i, (pair, a)) in dist.pairs().iter().zip(aligned).enumerate() {
            let row = &mut rows[i * n..(i + 1) * n];
            let bw = 1.0 / pair.target.len() as f64;
            for &j in &pair.target {
                row[j] -= bw;
            }
            for (&j, &v) in pair.sample.iter().zip(a) {
                row[j] += v;
            }
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
        Self {
            n,
            num_rows: m,
            rows,
            dense: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.n.max(1)).take(self.num_rows)
    }

    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(|v| v.is_finite())
    }

    /// `out = M w`: `Σ r_i <r_i, w>` in `O(mn)` when there are at most `n`
    /// rows, the dense product otherwise.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        if self.num_rows > self.n {
            let n = self.n;
            for (o, row) in out.iter_mut().zip(self.dense().chunks_exact(n)) {
                *o = dot(row, w);
            }
            return;
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for r in self.rows() {
            let c = dot(r, w);
            if c != 0.0 {
                for (o, &ri) in out.iter_mut().zip(r) {
                    *o += c * ri;
                }
            }
        }
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.rows().map(|r| dot(r, x).powi(2)).sum()
    }

    /// `trace(M) = Σ ‖r_i‖²`.
    pub fn trace(&self) -> f64 {
        self.rows.iter().map(|v| v * v).sum()
    }

    /// Row-major dense `n×n` form, materialized once.
    pub fn dense(&self) -> &[f64] {
        self.dense.get_or_init(|| {
            let n = self.n;
            let mut d = vec![0.0; n * n];
            for r in self.rows() {
                for j in 0..n {
                    let rj = r[j];
                    if rj == 0.0 {
                        continue;
                    }
                    let out = &mut d[j * n..j * n + n];
                    for l in j..n {
                        out[l] += rj * r[l];
                    }
                }
            }
            for j in 0..n {
                for l in 0..j {
                    d[j * n + l] = d[l * n + j];
                }
            }
            d
        })
    }

    pub fn entry(&self, j: usize, l: usize) -> f64 {
        self.dense()[j * self.n + l]
    }
}

/// Builds `M(a)` for an estimator over `dist`, rejecting weights outside `A_i`.
pub fn build_loss_matrix(a: &SemilinearEstimator, dist: &SampleTargetDistribution) -> Result<LossMatrix> {
    let aligned = a.aligned(dist)?;
    Ok(LossMatrix::from_aligned(dist, &aligned))
}

/// `(1/m) Σ_i (<a_i, x> - mean(x_{B_i}))²`, evaluated directly from the
/// weights without forming `M`.
pub fn fixed_data_error(a: &SemilinearEstimator, dist: &SampleTargetDistribution, x: &[f64]) -> Result<f64> {
    a.check_against(dist)?;
    if x.len() != dist.n() {
        return Err(Error::DimensionMismatch {
            expected: dist.n(),
            got: x.len(),
        });
    }
    let total: f64 = dist
        .pairs()
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let est = a.apply(i, x);
            let mean = pair.target.iter().map(|&j| x[j]).sum::<f64>() / pair.target.len() as f64;
            (est - mean).powi(2)
        })
        .sum();
    Ok(total / dist.m() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Pair;

    fn single_pair() -> (SampleTargetDistribution, SemilinearEstimator) {
        let d = SampleTargetDistribution::new(2, vec![Pair::new(vec![0], vec![0, 1])]).unwrap();
        let a = SemilinearEstimator::new(2, vec![vec![(0, 1.0)]]).unwrap();
        (d, a)
    }

    #[test]
    fn single_pair_outer_product() {
        let (d, a) = single_pair();
        let m = build_loss_matrix(&a, &d).unwrap();
        let expect = [0.25, -0.25, -0.25, 0.25];
        for (got, want) in m.dense().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((fixed_data_error(&a, &d, &[1.0, -1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fixed_data_error(&a, &d, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn exact_estimator_has_zero_loss() {
        let d = SampleTargetDistribution::new(
            3,
            vec![Pair::new(vec![0, 1, 2], vec![1, 2]), Pair::new(vec![0], vec![0])],
        )
        .unwrap();
        let a = SemilinearEstimator::new(3, vec![vec![(1, 0.5), (2, 0.5)], vec![(0, 1.0)]]).unwrap();
        let m = build_loss_matrix(&a, &d).unwrap();
        assert!(m.dense().iter().all(|&v| v == 0.0));
        assert_eq!(fixed_data_error(&a, &d, &[0.3, -0.9, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn isotropic_from_two_pairs() {
        // residuals e_0 and e_1 scaled by 1/√2 give I/2
        let d = SampleTargetDistribution::new(
            2,
            vec![Pair::new(vec![0, 1], vec![1]), Pair::new(vec![0, 1], vec![0])],
        )
        .unwrap();
        let a = SemilinearEstimator::new(2, vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, 1.0)]])
            .unwrap();
        let m = build_loss_matrix(&a, &d).unwrap();
        let expect = [0.5, 0.0, 0.0, 0.5];
        for (got, want) in m.dense().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_outside_support_and_bad_lengths() {
        let (d, _) = single_pair();
        let bad = SemilinearEstimator::new(2, vec![vec![(1, 1.0)]]).unwrap();
        assert!(matches!(
            build_loss_matrix(&bad, &d),
            Err(Error::SupportViolation { .. })
        ));
        let (_, a) = single_pair();
        assert!(matches!(
            fixed_data_error(&a, &d, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn data_value_bounds() {
        assert!(DataValues::new(vec![1.0, -1.0], NormRegime::Linf).is_ok());
        assert!(DataValues::new(vec![1.01, 0.0], NormRegime::Linf).is_err());
        assert!(DataValues::new(vec![1.4, 0.0], NormRegime::L2).is_ok());
        assert!(DataValues::new(vec![1.5, 0.0], NormRegime::L2).is_err());
    }
}
