//! Inner maximizations over the adversary: the top eigenvector for the ℓ2
//! ball, the unit-diagonal SDP for the ℓ∞ ball, and sign rounding of SDP
//! solutions into concrete ±1 data values.

mod eigen;
mod rounding;
mod sdp;

pub use eigen::{sdp2_of_matrix, sdp2_value, top_eigen, top_eigen_from, EigenOptions, EigenResult, Sdp2Value};
pub use rounding::{round_sign, RoundedAdversary};
pub use sdp::{sdp_inf_solve, sdp_inf_solve_with, sdp_inf_value, PsdAssignment, SdpOptions};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A PSD matrix `X = VᵀV` held as its `k×n` factor `V`. Column `V_j` is the
/// `k`-vector stored at `cols[j*k..(j+1)*k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramFactor {
    n: usize,
    rank: usize,
    cols: Vec<f64>,
}

impl GramFactor {
    pub fn new(n: usize, rank: usize, cols: Vec<f64>) -> crate::Result<Self> {
        if cols.len() != n * rank {
            return Err(crate::Error::DimensionMismatch {
                expected: n * rank,
                got: cols.len(),
            });
        }
        if cols.iter().any(|v| !v.is_finite()) {
            return Err(crate::Error::NonFinite("gram factor"));
        }
        Ok(Self { n, rank, cols })
    }

    /// The rank-one factor of `x xᵀ`.
    pub fn rank_one(x: &[f64]) -> Self {
        Self {
            n: x.len(),
            rank: 1,
            cols: x.to_vec(),
        }
    }

    pub(crate) fn random_unit_columns<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> Self {
        let mut cols = vec![0.0; n * rank];
        for col in cols.chunks_exact_mut(rank.max(1)) {
            loop {
                for v in col.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let nrm = crate::loss::norm(col);
                if nrm > 1e-12 {
                    col.iter_mut().for_each(|v| *v /= nrm);
                    break;
                }
            }
        }
        Self { n, rank, cols }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j * self.rank..(j + 1) * self.rank]
    }

    pub(crate) fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.cols[j * self.rank..(j + 1) * self.rank]
    }

    /// `X_jl = <V_j, V_l>`.
    pub fn entry(&self, j: usize, l: usize) -> f64 {
        crate::loss::dot(self.column(j), self.column(l))
    }

    /// `<M, X> = Σ_jl M_jl <V_j, V_l>` against a row-major dense `M`.
    pub fn inner_with_dense(&self, dense: &[f64]) -> f64 {
        let n = self.n;
        let k = self.rank;
        let mut acc = vec![0.0; k];
        let mut total = 0.0;
        for j in 0..n {
            acc.iter_mut().for_each(|v| *v = 0.0);
            let row = &dense[j * n..(j + 1) * n];
            for (l, &mjl) in row.iter().enumerate() {
                if mjl != 0.0 {
                    for (a, &v) in acc.iter_mut().zip(self.column(l)) {
                        *a += mjl * v;
                    }
                }
            }
            total += crate::loss::dot(self.column(j), &acc);
        }
        total
    }

    /// `V w` for a sparse `w` given as `(index, value)` terms.
    pub(crate) fn project_sparse<'a>(&self, terms: impl Iterator<Item = (usize, f64)> + 'a, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, c) in terms {
            for (o, &v) in out.iter_mut().zip(self.column(j)) {
                *o += c * v;
            }
        }
    }
}
