//! Non-expansion certificates and the adversarial data values that force
//! constant error on any mean estimator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::SampleTargetDistribution;
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;
use crate::loss::{DataValues, NormRegime};

pub const MAX_BRUTEFORCE_N: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonExpansionCertificate {
    #[serde(rename = "S")]
    pub set: Vec<usize>,
    pub alpha: f64,
    /// Pairs with `A ⊆ S` and `B ∩ S = ∅`.
    pub side1_count: usize,
    /// Pairs with `A ∩ S = ∅` and `B ⊆ S`.
    pub side2_count: usize,
}

/// Any mean estimator that sees the observed values of one pair.
pub trait MeanEstimator {
    /// `observed[k]` is the value at `sample[k]`.
    fn estimate(&self, pair: usize, sample: &[usize], target: &[usize], observed: &[f64]) -> f64;
}

impl MeanEstimator for SemilinearEstimator {
    fn estimate(&self, pair: usize, sample: &[usize], _target: &[usize], observed: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut k = 0;
        for &(j, w) in &self.weights()[pair] {
            while k < sample.len() && sample[k] < j {
                k += 1;
            }
            if k < sample.len() && sample[k] == j {
                total += w * observed[k];
            }
        }
        total
    }
}

impl<F> MeanEstimator for F
where
    F: Fn(usize, &[usize], &[usize], &[f64]) -> f64,
{
    fn estimate(&self, pair: usize, sample: &[usize], target: &[usize], observed: &[f64]) -> f64 {
        self(pair, sample, target, observed)
    }
}

fn membership(dist: &SampleTargetDistribution, set: &[usize]) -> Result<Vec<bool>> {
    let n = dist.n();
    let mut inside = vec![false; n];
    for &j in set {
        if j >= n {
            return Err(Error::InvalidArgument(format!("index {j} out of range for n = {n}")));
        }
        inside[j] = true;
    }
    Ok(inside)
}

/// Which side of the definition pair `i` satisfies, if exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Inside,
    Outside,
}

fn side_of(sample: &[usize], target: &[usize], inside: &[bool]) -> Option<Side> {
    let a_in = sample.iter().all(|&j| inside[j]);
    let a_out = sample.iter().all(|&j| !inside[j]);
    let b_in = target.iter().all(|&j| inside[j]);
    let b_out = target.iter().all(|&j| !inside[j]);
    match (a_in && b_out, a_out && b_in) {
        (true, false) => Some(Side::Inside),
        (false, true) => Some(Side::Outside),
        _ => None,
    }
}

pub fn check_non_expanding(dist: &SampleTargetDistribution, set: &[usize]) -> Result<NonExpansionCertificate> {
    let inside = membership(dist, set)?;
    let mut side1 = 0;
    let mut side2 = 0;
    for pair in dist.pairs() {
        match side_of(&pair.sample, &pair.target, &inside) {
            Some(Side::Inside) => side1 += 1,
            Some(Side::Outside) => side2 += 1,
            None => {}
        }
    }
    Ok(NonExpansionCertificate {
        set: (0..dist.n()).filter(|&j| inside[j]).collect(),
        alpha: (side1 + side2) as f64 / dist.m() as f64,
        side1_count: side1,
        side2_count: side2,
    })
}

fn mask_of(list: &[usize]) -> u32 {
    list.iter().fold(0, |m, &j| m | (1 << j))
}

/// True when the sorted element list of `x` precedes that of `y`.
fn lex_less(x: u32, y: u32) -> bool {
    if x == y {
        return false;
    }
    let d = (x ^ y).trailing_zeros();
    let above = !((2u64 << d) - 1) as u32;
    let (with, without) = if x >> d & 1 == 1 { (x, y) } else { (y, x) };
    // the set holding d comes first unless the other one ends right there
    let with_first = without & above != 0;
    (with == x) == with_first
}

/// Maximizes `α` over every `S ⊆ [0, n)`; ties go to the lexicographically
/// smallest sorted index list.
pub fn best_s_bruteforce(dist: &SampleTargetDistribution) -> Result<NonExpansionCertificate> {
    let n = dist.n();
    if n > MAX_BRUTEFORCE_N {
        return Err(Error::TooLarge {
            n,
            max: MAX_BRUTEFORCE_N,
        });
    }
    let masks: Vec<(u32, u32)> = dist
        .pairs()
        .iter()
        .map(|p| (mask_of(&p.sample), mask_of(&p.target)))
        .collect();
    let count = |s: u32| -> usize {
        masks
            .iter()
            .filter(|&&(a, b)| {
                let one = a & !s == 0 && b & s == 0;
                let two = a & s == 0 && b & !s == 0;
                one != two
            })
            .count()
    };
    let better = |x: (usize, u32), y: (usize, u32)| -> (usize, u32) {
        if x.0 > y.0 || (x.0 == y.0 && lex_less(x.1, y.1)) {
            x
        } else {
            y
        }
    };
    let (_, best) = (0u32..(1u32 << n))
        .into_par_iter()
        .map(|s| (count(s), s))
        .reduce(|| (0, 0), better);
    let set: Vec<usize> = (0..n).filter(|&j| best >> j & 1 == 1).collect();
    check_non_expanding(dist, &set)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversarialOutcome {
    pub x: DataValues,
    /// `(1/m) Σ (f(x_{A_i}) - mean(x_{B_i}))²` over all pairs.
    pub achieved_error: f64,
    /// The set carrying `+1`; the complement of the input when the second
    /// side held the majority.
    pub effective_set: Vec<usize>,
    pub median: f64,
    /// Size of the guaranteed-error subset of pairs.
    pub hit_count: usize,
}

/// Builds `x` with `‖x‖∞ = 1` against `f` from a certifying set `S`.
pub fn adversarial_values<F: MeanEstimator + ?Sized>(
    dist: &SampleTargetDistribution,
    set: &[usize],
    f: &F,
) -> Result<AdversarialOutcome> {
    let cert = check_non_expanding(dist, set)?;
    if cert.side1_count + cert.side2_count == 0 {
        return Err(Error::NoCertificate);
    }
    let mut inside = membership(dist, set)?;
    let side = if cert.side2_count > cert.side1_count {
        inside.iter_mut().for_each(|v| *v = !*v);
        Side::Outside
    } else {
        Side::Inside
    };
    let original = membership(dist, set)?;

    let mut values: Vec<f64> = dist
        .pairs()
        .iter()
        .enumerate()
        .filter(|(_, p)| side_of(&p.sample, &p.target, &original) == Some(side))
        .map(|(i, p)| f.estimate(i, &p.sample, &p.target, &vec![1.0; p.sample.len()]))
        .collect();
    values.sort_by(f64::total_cmp);
    let median = values[(values.len() - 1) / 2];
    let off = if median >= 0.0 { -1.0 } else { 1.0 };
    let hit_count = if median >= 0.0 {
        values.iter().filter(|&&v| v >= median).count()
    } else {
        values.iter().filter(|&&v| v <= median).count()
    };

    let x: Vec<f64> = inside.iter().map(|&s| if s { 1.0 } else { off }).collect();
    let mut total = 0.0;
    let mut observed = Vec::new();
    for (i, p) in dist.pairs().iter().enumerate() {
        observed.clear();
        observed.extend(p.sample.iter().map(|&j| x[j]));
        let est = f.estimate(i, &p.sample, &p.target, &observed);
        let mean = p.target.iter().map(|&j| x[j]).sum::<f64>() / p.target.len() as f64;
        total += (est - mean).powi(2);
    }
    Ok(AdversarialOutcome {
        effective_set: (0..dist.n()).filter(|&j| inside[j]).collect(),
        x: DataValues::new(x, NormRegime::Linf)?,
        achieved_error: total / dist.m() as f64,
        median,
        hit_count,
    })
}

/// Every `A_i ⊆ [0, n/2)` and `B_i ⊆ [n/2, n)`: non-expanding with `α = 1`
/// for `S = [0, n/2)`.
pub fn half_split_distribution(n: usize, pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<SampleTargetDistribution> {
    let half = n / 2;
    let list = pairs
        .iter()
        .map(|(a, b)| {
            if a.iter().any(|&j| j >= half) || b.iter().any(|&j| j < half) {
                return Err(Error::InvalidArgument("pair crosses the half split".into()));
            }
            Ok(crate::distribution::Pair::new(a.clone(), b.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    SampleTargetDistribution::new(n, list)
}
