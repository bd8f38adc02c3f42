//! Sample-target distributions: the uniform distribution over `m` pairs of
//! index sets `(A_i, B_i)` drawn from a population `[0, n)`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SetKind};

/// One sample-target pair. `sample` is observed, the mean over `target` is
/// estimated. Both lists are sorted and duplicate free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    #[serde(rename = "A")]
    pub sample: Vec<usize>,
    #[serde(rename = "B")]
    pub target: Vec<usize>,
}

impl Pair {
    pub fn new(sample: Vec<usize>, target: Vec<usize>) -> Self {
        Self { sample, target }
    }
}

#[derive(Serialize, Deserialize)]
struct RawDistribution {
    n: usize,
    pairs: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDistribution", into = "RawDistribution")]
pub struct SampleTargetDistribution {
    n: usize,
    pairs: Vec<Pair>,
}

impl TryFrom<RawDistribution> for SampleTargetDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        Self::new(raw.n, raw.pairs)
    }
}

impl From<SampleTargetDistribution> for RawDistribution {
    fn from(d: SampleTargetDistribution) -> Self {
        RawDistribution {
            n: d.n,
            pairs: d.pairs,
        }
    }
}

pub(crate) fn validate_index_list(
    pair: usize,
    set: SetKind,
    list: &[usize],
    n: usize,
) -> Result<()> {
    for (k, &index) in list.iter().enumerate() {
        if index >= n {
            return Err(Error::IndexOutOfRange { pair, set, index, n });
        }
        if k > 0 {
            let prev = list[k - 1];
            if prev == index {
                return Err(Error::Duplicate { pair, set, index });
            }
            if prev > index {
                return Err(Error::Unsorted { pair, set });
            }
        }
    }
    Ok(())
}

impl SampleTargetDistribution {
    /// Validates and wraps `pairs`. Indices must be sorted, unique and in
    /// `[0, n)`; every target must be non-empty. Samples may be empty.
    pub fn new(n: usize, pairs: Vec<Pair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::NoPairs);
        }
        for (i, p) in pairs.iter().enumerate() {
            validate_index_list(i, SetKind::Sample, &p.sample, n)?;
            validate_index_list(i, SetKind::Target, &p.target, n)?;
            if p.target.is_empty() {
                return Err(Error::EmptyTarget { pair: i });
            }
        }
        Ok(Self { n, pairs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn pair(&self, i: usize) -> Result<&Pair> {
        self.pairs.get(i).ok_or(Error::PairOutOfRange {
            index: i,
            m: self.pairs.len(),
        })
    }

    /// The averaging vector `b_i`: `1/|B_i|` on each target index.
    pub fn target_vector(&self, i: usize) -> Result<Vec<(usize, f64)>> {
        let pair = self.pair(i)?;
        let w = 1.0 / pair.target.len() as f64;
        Ok(pair.target.iter().map(|&j| (j, w)).collect())
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
}

/// Reads and validates a distribution file.
pub fn load_distribution(path: impl AsRef<Path>) -> Result<SampleTargetDistribution> {
    let text = fs::read_to_string(path)?;
    SampleTargetDistribution::from_json(&text).map_err(|e| match e {
        // serde wraps the validation error from `try_from` as a message; re-run
        // validation on the raw form so callers get the structured variant.
        Error::Json(json) => match serde_json::from_str::<RawDistribution>(&text) {
            Ok(raw) => match SampleTargetDistribution::try_from(raw) {
                Err(inner) => inner,
                Ok(_) => Error::Json(json),
            },
            Err(_) => Error::Json(json),
        },
        other => other,
    })
}

/// Positions in the sorted list `sample` of each element of the sorted list
/// `target` that also lies in `sample`, as `(position_in_sample, position_in_target)`.
pub(crate) fn intersect_positions(sample: &[usize], target: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < sample.len() && j < target.len() {
        match sample[i].cmp(&target[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((i, j));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pairs() -> SampleTargetDistribution {
        SampleTargetDistribution::new(
            4,
            vec![Pair::new(vec![0, 1], vec![0, 1]), Pair::new(vec![], vec![2])],
        )
        .unwrap()
    }

    #[test]
    fn target_vector_examples() {
        let d = two_pairs();
        assert_eq!(d.target_vector(0).unwrap(), vec![(0, 0.5), (1, 0.5)]);
        assert_eq!(d.target_vector(1).unwrap(), vec![(2, 1.0)]);

        let full = SampleTargetDistribution::new(3, vec![Pair::new(vec![], vec![0, 1, 2])]).unwrap();
        let b = full.target_vector(0).unwrap();
        assert_eq!(b.len(), 3);
        for (_, w) in &b {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        let total: f64 = b.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(matches!(
            d.target_vector(2),
            Err(Error::PairOutOfRange { index: 2, m: 2 })
        ));
    }

    #[test]
    fn validation_errors() {
        let err = SampleTargetDistribution::new(2, vec![Pair::new(vec![0], vec![])]).unwrap_err();
        assert!(matches!(err, Error::EmptyTarget { pair: 0 }));
        let err = SampleTargetDistribution::new(2, vec![Pair::new(vec![2], vec![0])]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 2, .. }));
        let err = SampleTargetDistribution::new(3, vec![Pair::new(vec![1, 0], vec![0])]).unwrap_err();
        assert!(matches!(err, Error::Unsorted { .. }));
        let err = SampleTargetDistribution::new(3, vec![Pair::new(vec![], vec![1, 1])]).unwrap_err();
        assert!(matches!(err, Error::Duplicate { index: 1, .. }));
        assert!(matches!(
            SampleTargetDistribution::new(3, vec![]).unwrap_err(),
            Error::NoPairs
        ));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let d = two_pairs();
        let text = d.to_json().unwrap();
        assert_eq!(
            text,
            r#"{"n":4,"pairs":[{"A":[0,1],"B":[0,1]},{"A":[],"B":[2]}]}"#
        );
        assert_eq!(SampleTargetDistribution::from_json(&text).unwrap(), d);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, r#"{"n":2,"pairs":[{"A":[0],"B":[]}]}"#).unwrap();
        assert!(matches!(
            load_distribution(&path).unwrap_err(),
            Error::EmptyTarget { pair: 0 }
        ));
        fs::write(&path, r#"{"n":2,"pairs":[{"A":[0],"B":[2]}]}"#).unwrap();
        assert!(matches!(
            load_distribution(&path).unwrap_err(),
            Error::IndexOutOfRange { index: 2, n: 2, .. }
        ));
        fs::write(&path, r#"{"n":2,"pairs":[{"A":[0],"B":[1]}"#).unwrap();
        assert!(matches!(load_distribution(&path).unwrap_err(), Error::Json(_)));
    }

    #[test]
    fn intersections() {
        assert_eq!(intersect_positions(&[0, 2, 5, 7], &[2, 3, 7]), vec![(1, 0), (3, 2)]);
        assert!(intersect_positions(&[], &[1]).is_empty());
    }
}
