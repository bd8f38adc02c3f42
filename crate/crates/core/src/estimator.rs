use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::{validate_index_list, SampleTargetDistribution};
use crate::error::{Error, Result, SetKind};

#[derive(Serialize, Deserialize)]
struct RawEstimator {
    n: usize,
    weights: Vec<Vec<(usize, f64)>>,
}

/// A semilinear estimator: for pair `i` it outputs `<a_i, x>` with `a_i`
/// supported on the sample `A_i`. Weights are sparse `(index, value)` lists
/// sorted by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEstimator", into = "RawEstimator")]
pub struct SemilinearEstimator {
    n: usize,
    weights: Vec<Vec<(usize, f64)>>,
}

impl TryFrom<RawEstimator> for SemilinearEstimator {
    type Error = Error;

    fn try_from(raw: RawEstimator) -> Result<Self> {
        Self::new(raw.n, raw.weights)
    }
}

impl From<SemilinearEstimator> for RawEstimator {
    fn from(e: SemilinearEstimator) -> Self {
        RawEstimator {
            n: e.n,
            weights: e.weights,
        }
    }
}

impl SemilinearEstimator {
    pub fn new(n: usize, weights: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (i, w) in weights.iter().enumerate() {
            let idx: Vec<usize> = w.iter().map(|&(j, _)| j).collect();
            validate_index_list(i, SetKind::Sample, &idx, n)?;
            if w.iter().any(|&(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite("estimator weights"));
            }
        }
        Ok(Self { n, weights })
    }

    /// Builds an estimator from weight vectors aligned with each sample
    /// `A_i` (entry `k` of `values[i]` is the weight on `A_i[k]`).
    pub fn from_aligned(dist: &SampleTargetDistribution, values: &[Vec<f64>]) -> Result<Self> {
        if values.len() != dist.m() {
            return Err(Error::DimensionMismatch {
                expected: dist.m(),
                got: values.len(),
            });
        }
        let mut weights = Vec::with_capacity(values.len());
        for (pair, v) in dist.pairs().iter().zip(values) {
            if v.len() != pair.sample.len() {
                return Err(Error::DimensionMismatch {
                    expected: pair.sample.len(),
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("estimator weights"));
            }
            weights.push(pair.sample.iter().copied().zip(v.iter().copied()).collect());
        }
        Ok(Self {
            n: dist.n(),
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<(usize, f64)>] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> Result<&[(usize, f64)]> {
        self.weights
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::PairOutOfRange {
                index: i,
                m: self.weights.len(),
            })
    }

    /// Checks that the estimator matches `dist` in `n` and `m` and that
    /// every `a_i` is supported on `A_i`.
    pub fn check_against(&self, dist: &SampleTargetDistribution) -> Result<()> {
        if self.n != dist.n() {
            return Err(Error::DimensionMismatch {
                expected: dist.n(),
                got: self.n,
            });
        }
        if self.m() != dist.m() {
            return Err(Error::DimensionMismatch {
                expected: dist.m(),
                got: self.m(),
            });
        }
        for (i, (w, pair)) in self.weights.iter().zip(dist.pairs()).enumerate() {
            if w.len() > pair.sample.len() {
                return Err(Error::SupportViolation {
                    pair: i,
                    index: w.last().map_or(0, |&(j, _)| j),
                });
            }
            for &(j, _) in w {
                if pair.sample.binary_search(&j).is_err() {
                    return Err(Error::SupportViolation { pair: i, index: j });
                }
            }
        }
        Ok(())
    }

    /// Weights aligned with each sample `A_i`; zero where `a_i` has no entry.
    pub fn aligned(&self, dist: &SampleTargetDistribution) -> Result<Vec<Vec<f64>>> {
        self.check_against(dist)?;
        Ok(self
            .weights
            .iter()
            .zip(dist.pairs())
            .map(|(w, pair)| {
                let mut v = vec![0.0; pair.sample.len()];
                for &(j, val) in w {
                    let k = pair.sample.binary_search(&j).expect("support checked");
                    v[k] = val;
                }
                v
            })
            .collect())
    }

    /// `<a_i, x>` using only the observed coordinates.
    pub fn evaluate_pointwise(&self, i: usize, observed: &BTreeMap<usize, f64>) -> Result<f64> {
        let w = self.weight(i)?;
        let mut acc = 0.0;
        for &(j, v) in w {
            let x = observed
                .get(&j)
                .ok_or(Error::MissingObservation { index: j })?;
            acc += v * x;
        }
        Ok(acc)
    }

    /// `<a_i, x>` for a dense data vector.
    pub fn apply(&self, i: usize, x: &[f64]) -> f64 {
        self.weights[i].iter().map(|&(j, v)| v * x[j]).sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Pair;

    #[test]
    fn pointwise_examples() {
        let est = SemilinearEstimator::new(
            4,
            vec![vec![(0, 0.5), (3, 0.5)], vec![], vec![(1, 2.0)]],
        )
        .unwrap();
        let obs: BTreeMap<usize, f64> = [(0, 1.0), (3, 1.0)].into_iter().collect();
        assert_eq!(est.evaluate_pointwise(0, &obs).unwrap(), 1.0);
        assert_eq!(est.evaluate_pointwise(1, &BTreeMap::new()).unwrap(), 0.0);
        let obs: BTreeMap<usize, f64> = [(1, -0.5)].into_iter().collect();
        assert_eq!(est.evaluate_pointwise(2, &obs).unwrap(), -1.0);
        assert!(matches!(
            est.evaluate_pointwise(0, &BTreeMap::new()),
            Err(Error::MissingObservation { index: 0 })
        ));
    }

    #[test]
    fn support_is_checked() {
        let d = SampleTargetDistribution::new(3, vec![Pair::new(vec![0, 2], vec![1])]).unwrap();
        let ok = SemilinearEstimator::new(3, vec![vec![(2, 1.0)]]).unwrap();
        ok.check_against(&d).unwrap();
        assert_eq!(ok.aligned(&d).unwrap(), vec![vec![0.0, 1.0]]);
        let bad = SemilinearEstimator::new(3, vec![vec![(1, 1.0)]]).unwrap();
        assert!(matches!(
            bad.check_against(&d),
            Err(Error::SupportViolation { pair: 0, index: 1 })
        ));
    }

    #[test]
    fn json_format() {
        let est = SemilinearEstimator::new(2, vec![vec![(0, 0.25), (1, -1.5)], vec![]]).unwrap();
        let text = est.to_json().unwrap();
        assert_eq!(text, r#"{"n":2,"weights":[[[0,0.25],[1,-1.5]],[]]}"#);
        assert_eq!(SemilinearEstimator::from_json(&text).unwrap(), est);
        assert!(SemilinearEstimator::from_json(r#"{"n":2,"weights":[[[2,1.0]]]}"#).is_err());
    }
}
