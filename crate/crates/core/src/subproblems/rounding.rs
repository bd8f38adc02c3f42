use rand::Rng;
use rand_distr::StandardNormal;

use super::PsdAssignment;
use crate::error::{Error, Result};
use crate::loss::{dot, DataValues, LossMatrix, NormRegime};

#[derive(Debug, Clone)]
pub struct RoundedAdversary {
    pub values: DataValues,
    /// `xᵀ M x` for the returned `x`.
    pub objective: f64,
}

/// Hyperplane rounding: per trial draw Gaussian `g` and set
/// `x_j = sign(<V_j, g>)` (zero maps to +1). Returns the best `x ∈ {±1}ⁿ`.
pub fn round_sign<R: Rng + ?Sized>(
    x: &PsdAssignment,
    m: &LossMatrix,
    trials: usize,
    rng: &mut R,
) -> Result<RoundedAdversary> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = m.dim();
    if x.factor.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.factor.dim(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("loss matrix"));
    }
    let k = x.rank();
    let mut g = vec![0.0; k];
    let mut cand = vec![0.0; n];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..trials {
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (j, c) in cand.iter_mut().enumerate() {
            *c = if dot(x.factor.column(j), &g) >= 0.0 { 1.0 } else { -1.0 };
        }
        let value = m.quadratic_form(&cand);
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((cand.clone(), value));
        }
    }
    let (xs, objective) = best.expect("trials >= 1");
    Ok(RoundedAdversary {
        values: DataValues::new(xs, NormRegime::Linf)?,
        objective,
    })
}
