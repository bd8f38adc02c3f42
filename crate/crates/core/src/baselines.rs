//! Standard comparison estimators, each expressed as a [`SemilinearEstimator`].

use serde::{Deserialize, Serialize};

use crate::distribution::SampleTargetDistribution;
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStructure {
    pub groups: Vec<Vec<usize>>,
    pub inclusion_prob: Vec<f64>,
}

impl GroupStructure {
    pub fn new(groups: Vec<Vec<usize>>, inclusion_prob: Vec<f64>) -> Result<Self> {
        let n = inclusion_prob.len();
        let mut seen = vec![false; n];
        for g in &groups {
            for &j in g {
                if j >= n || seen[j] {
                    return Err(Error::InvalidArgument(format!(
                        "groups must partition [0, {n}); index {j} is out of range or repeated"
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("index {j} belongs to no group")));
        }
        if let Some(p) = inclusion_prob.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidArgument(format!("inclusion probability {p} not in (0, 1]")));
        }
        Ok(Self { groups, inclusion_prob })
    }

    pub fn n(&self) -> usize {
        self.inclusion_prob.len()
    }

    /// Group id of every index.
    pub fn labels(&self) -> Vec<usize> {
        let mut label = vec![0; self.n()];
        for (g, members) in self.groups.iter().enumerate() {
            for &j in members {
                label[j] = g;
            }
        }
        label
    }
}

/// How the subgroup estimator treats a group with no sampled member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyGroupRule {
    /// Average over the groups that were sampled.
    #[default]
    DropEmpty,
    /// An unsampled group contributes a mean of zero; always divide by the
    /// total number of groups.
    ZeroMean,
}

fn require_full_population(dist: &SampleTargetDistribution) -> Result<()> {
    let n = dist.n();
    for (i, pair) in dist.pairs().iter().enumerate() {
        if pair.target.len() != n {
            return Err(Error::NotFullPopulation { pair: i });
        }
    }
    Ok(())
}

fn check_groups(dist: &SampleTargetDistribution, gs: &GroupStructure) -> Result<()> {
    if gs.n() != dist.n() {
        return Err(Error::DimensionMismatch {
            expected: dist.n(),
            got: gs.n(),
        });
    }
    Ok(())
}

/// Inverse-probability weights `1/(n p_j)` on each sampled index.
pub fn reweighting_estimator(dist: &SampleTargetDistribution, gs: &GroupStructure) -> Result<SemilinearEstimator> {
    check_groups(dist, gs)?;
    require_full_population(dist)?;
    let n = dist.n() as f64;
    let weights = dist
        .pairs()
        .iter()
        .map(|pair| {
            pair.sample
                .iter()
                .map(|&j| (j, 1.0 / (n * gs.inclusion_prob[j])))
                .collect()
        })
        .collect();
    SemilinearEstimator::new(dist.n(), weights)
}

/// Average of the per-group sample means.
pub fn subgroup_estimator(
    dist: &SampleTargetDistribution,
    gs: &GroupStructure,
    rule: EmptyGroupRule,
) -> Result<SemilinearEstimator> {
    check_groups(dist, gs)?;
    require_full_population(dist)?;
    let labels = gs.labels();
    let mut counts = vec![0usize; gs.groups.len()];
    let weights = dist
        .pairs()
        .iter()
        .map(|pair| {
            counts.iter_mut().for_each(|c| *c = 0);
            for &j in &pair.sample {
                counts[labels[j]] += 1;
            }
            let denom = match rule {
                EmptyGroupRule::DropEmpty => counts.iter().filter(|&&c| c > 0).count(),
                EmptyGroupRule::ZeroMean => counts.len(),
            };
            pair.sample
                .iter()
                .map(|&j| (j, 1.0 / (denom * counts[labels[j]]) as f64))
                .collect()
        })
        .collect();
    SemilinearEstimator::new(dist.n(), weights)
}

/// `1/|A_i|` on every sampled index.
pub fn sample_mean_estimator(dist: &SampleTargetDistribution) -> SemilinearEstimator {
    let weights = dist
        .pairs()
        .iter()
        .map(|pair| {
            let w = 1.0 / pair.sample.len() as f64;
            pair.sample.iter().map(|&j| (j, w)).collect()
        })
        .collect();
    SemilinearEstimator::new(dist.n(), weights).expect("sample indices are validated")
}

/// Mean of the last `min(w_i, t)` elements of a prefix sample `{0, …, t-1}`.
pub fn selective_prediction_estimator(
    dist: &SampleTargetDistribution,
    windows: &[usize],
) -> Result<SemilinearEstimator> {
    if windows.len() != dist.m() {
        return Err(Error::DimensionMismatch {
            expected: dist.m(),
            got: windows.len(),
        });
    }
    let mut weights = Vec::with_capacity(dist.m());
    for (i, (pair, &w)) in dist.pairs().iter().zip(windows).enumerate() {
        if pair.sample.iter().enumerate().any(|(k, &j)| k != j) {
            return Err(Error::NotPrefix { pair: i });
        }
        let t = pair.sample.len();
        let len = w.min(t);
        let val = 1.0 / len as f64;
        weights.push((t - len..t).map(|j| (j, val)).collect());
    }
    SemilinearEstimator::new(dist.n(), weights)
}

/// Baselines addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Reweighting,
    Subgroup,
    SampleMean,
    SelectivePrediction,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [
        Baseline::Reweighting,
        Baseline::Subgroup,
        Baseline::SampleMean,
        Baseline::SelectivePrediction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Reweighting => "reweighting",
            Baseline::Subgroup => "subgroup",
            Baseline::SampleMean => "sample_mean",
            Baseline::SelectivePrediction => "selective_prediction",
        }
    }
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "baseline",
                name: s.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Pair;

    fn weights_of(a: &SemilinearEstimator, i: usize) -> Vec<(usize, f64)> {
        a.weight(i).unwrap().to_vec()
    }

    #[test]
    fn reweighting_examples() {
        let d = SampleTargetDistribution::new(
            2,
            vec![Pair::new(vec![0, 1], vec![0, 1]), Pair::new(vec![], vec![0, 1])],
        )
        .unwrap();
        let uniform = GroupStructure::new(vec![vec![0, 1]], vec![1.0, 1.0]).unwrap();
        let a = reweighting_estimator(&d, &uniform).unwrap();
        assert_eq!(weights_of(&a, 0), vec![(0, 0.5), (1, 0.5)]);
        assert!(weights_of(&a, 1).is_empty());
        let skewed = GroupStructure::new(vec![vec![0], vec![1]], vec![0.5, 1.0]).unwrap();
        let a = reweighting_estimator(&d, &skewed).unwrap();
        assert_eq!(weights_of(&a, 0), vec![(0, 1.0), (1, 0.5)]);
    }

    #[test]
    fn partial_target_is_rejected() {
        let d = SampleTargetDistribution::new(2, vec![Pair::new(vec![0], vec![1])]).unwrap();
        let gs = GroupStructure::new(vec![vec![0, 1]], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            reweighting_estimator(&d, &gs),
            Err(Error::NotFullPopulation { pair: 0 })
        ));
        assert!(subgroup_estimator(&d, &gs, EmptyGroupRule::DropEmpty).is_err());
    }

    #[test]
    fn subgroup_examples() {
        let full = vec![0, 1, 2, 3];
        let d = SampleTargetDistribution::new(
            4,
            vec![
                Pair::new(vec![1, 2], full.clone()),
                Pair::new(vec![0, 1], full.clone()),
                Pair::new(vec![], full),
            ],
        )
        .unwrap();
        let gs = GroupStructure::new(vec![vec![0, 1], vec![2, 3]], vec![0.5; 4]).unwrap();
        let a = subgroup_estimator(&d, &gs, EmptyGroupRule::DropEmpty).unwrap();
        assert_eq!(weights_of(&a, 0), vec![(1, 0.5), (2, 0.5)]);
        assert_eq!(weights_of(&a, 1), vec![(0, 0.5), (1, 0.5)]);
        assert!(weights_of(&a, 2).is_empty());
        let z = subgroup_estimator(&d, &gs, EmptyGroupRule::ZeroMean).unwrap();
        assert_eq!(weights_of(&z, 0), vec![(1, 0.5), (2, 0.5)]);
        assert_eq!(weights_of(&z, 1), vec![(0, 0.25), (1, 0.25)]);
    }

    #[test]
    fn sample_mean_examples() {
        let d = SampleTargetDistribution::new(
            6,
            vec![
                Pair::new(vec![0, 1, 2], vec![0]),
                Pair::new(vec![5], vec![0]),
                Pair::new(vec![], vec![0]),
            ],
        )
        .unwrap();
        let a = sample_mean_estimator(&d);
        assert_eq!(weights_of(&a, 0), vec![(0, 1.0 / 3.0), (1, 1.0 / 3.0), (2, 1.0 / 3.0)]);
        assert_eq!(weights_of(&a, 1), vec![(5, 1.0)]);
        assert!(weights_of(&a, 2).is_empty());
    }

    #[test]
    fn selective_prediction_examples() {
        let d = SampleTargetDistribution::new(
            12,
            vec![
                Pair::new(vec![0, 1, 2, 3], vec![4, 5]),
                Pair::new(vec![0], vec![1]),
                Pair::new(vec![], vec![0]),
            ],
        )
        .unwrap();
        let a = selective_prediction_estimator(&d, &[2, 8, 1]).unwrap();
        assert_eq!(weights_of(&a, 0), vec![(2, 0.5), (3, 0.5)]);
        assert_eq!(weights_of(&a, 1), vec![(0, 1.0)]);
        assert!(weights_of(&a, 2).is_empty());
        let gap = SampleTargetDistribution::new(4, vec![Pair::new(vec![0, 2], vec![3])]).unwrap();
        assert!(matches!(
            selective_prediction_estimator(&gap, &[1]),
            Err(Error::NotPrefix { pair: 0 })
        ));
    }

    #[test]
    fn names_round_trip() {
        for b in Baseline::ALL {
            assert_eq!(b.name().parse::<Baseline>().unwrap(), b);
        }
        assert!("median".parse::<Baseline>().is_err());
    }

    #[test]
    fn group_structure_validation() {
        assert!(GroupStructure::new(vec![vec![0]], vec![0.5, 0.5]).is_err());
        assert!(GroupStructure::new(vec![vec![0, 1], vec![1]], vec![0.5, 0.5]).is_err());
        assert!(GroupStructure::new(vec![vec![0, 1]], vec![0.0, 0.5]).is_err());
        assert_eq!(
            GroupStructure::new(vec![vec![1], vec![0]], vec![1.0, 0.2]).unwrap().labels(),
            vec![1, 0]
        );
    }
}
