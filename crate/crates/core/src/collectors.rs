//! Generators for the three experimental sampling settings.

use std::collections::VecDeque;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::GroupStructure;
use crate::distribution::{Pair, SampleTargetDistribution};
use crate::error::{Error, Result};

pub use crate::distribution::load_distribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceArgs {
    pub n: usize,
    /// Indices below `split` use `probs.0`, the rest `probs.1`.
    pub split: usize,
    pub probs: (f64, f64),
    pub m: usize,
    pub seed: u64,
}

impl Default for ImportanceArgs {
    fn default() -> Self {
        Self {
            n: 50,
            split: 25,
            probs: (0.1, 0.5),
            m: 2000,
            seed: 0,
        }
    }
}

/// Independent Bernoulli inclusion per index; the target is the whole
/// population.
pub fn gen_importance(args: &ImportanceArgs) -> Result<(SampleTargetDistribution, GroupStructure)> {
    let &ImportanceArgs { n, split, probs, m, seed } = args;
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("n and m must be positive".into()));
    }
    if split > n {
        return Err(Error::InvalidArgument(format!("split {split} exceeds n = {n}")));
    }
    let prob: Vec<f64> = (0..n).map(|j| if j < split { probs.0 } else { probs.1 }).collect();
    let groups: Vec<Vec<usize>> = [(0..split).collect::<Vec<_>>(), (split..n).collect()]
        .into_iter()
        .filter(|g| !g.is_empty())
        .collect();
    let gs = GroupStructure::new(groups, prob)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let full: Vec<usize> = (0..n).collect();
    let pairs = (0..m)
        .map(|_| {
            let sample = (0..n)
                .filter(|&j| rng.random::<f64>() < gs.inclusion_prob[j])
                .collect();
            Pair::new(sample, full.clone())
        })
        .collect();
    Ok((SampleTargetDistribution::new(n, pairs)?, gs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnowballArgs {
    pub n: usize,
    pub k: usize,
    pub num_neighbors: usize,
    pub recruit: usize,
    pub m: usize,
    pub seed: u64,
}

impl Default for SnowballArgs {
    fn default() -> Self {
        Self {
            n: 50,
            k: 25,
            num_neighbors: 5,
            recruit: 2,
            m: 2000,
            seed: 0,
        }
    }
}

/// `nn` nearest neighbours of every point, closest first, ties by index.
pub fn nearest_neighbors(points: &[[f64; 2]], nn: usize) -> Vec<Vec<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(u, p)| {
            let mut others: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(v, _)| v != u)
                .map(|(v, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2), v))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(nn).map(|(_, v)| v).collect()
        })
        .collect()
}

fn snowball_sample<R: Rng>(neighbors: &[Vec<usize>], k: usize, recruit: usize, rng: &mut R) -> Vec<usize> {
    let n = neighbors.len();
    let mut included = vec![false; n];
    let mut count = 0;
    let mut frontier = VecDeque::new();
    while count < k {
        let Some(u) = frontier.pop_front() else {
            let pick = rng.random_range(0..n - count);
            let v = (0..n).filter(|&v| !included[v]).nth(pick).expect("unincluded vertex");
            included[v] = true;
            count += 1;
            frontier.push_back(v);
            continue;
        };
        let nb = &neighbors[u];
        for idx in sample_indices(rng, nb.len(), recruit.min(nb.len())) {
            let v = nb[idx];
            if count < k && !included[v] {
                included[v] = true;
                count += 1;
                frontier.push_back(v);
            }
        }
    }
    (0..n).filter(|&v| included[v]).collect()
}

/// Snowball samples over a random point cloud in the unit square. Returns the
/// distribution and the points.
pub fn gen_snowball(args: &SnowballArgs) -> Result<(SampleTargetDistribution, Vec<[f64; 2]>)> {
    let &SnowballArgs {
        n,
        k,
        num_neighbors,
        recruit,
        m,
        seed,
    } = args;
    if n == 0 || m == 0 || k == 0 {
        return Err(Error::InvalidArgument("n, k and m must be positive".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("sample size k = {k} exceeds n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let neighbors = nearest_neighbors(&points, num_neighbors);
    let full: Vec<usize> = (0..n).collect();
    let pairs = (0..m)
        .map(|_| Pair::new(snowball_sample(&neighbors, k, recruit, &mut rng), full.clone()))
        .collect();
    Ok((SampleTargetDistribution::new(n, pairs)?, points))
}

/// Placement of the target window relative to the prefix `{0, …, t-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowBoundary {
    /// `B = {t, …, t+w-1}`.
    #[default]
    Disjoint,
    /// `B = {t-1, …, t+w-1}`, sharing the last observed step.
    Overlapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectiveArgs {
    pub n: usize,
    pub windows: Vec<usize>,
    pub boundary: WindowBoundary,
    /// Truncate windows running past `n` instead of dropping the pair.
    pub clip: bool,
}

impl Default for SelectiveArgs {
    fn default() -> Self {
        Self {
            n: 32,
            windows: vec![1, 2, 4, 8, 16],
            boundary: WindowBoundary::Disjoint,
            clip: false,
        }
    }
}

/// Enumerates every `(w, t)` with `t ≥ 1`, `w` from the window list. Returns
/// the distribution and the window length of each pair.
pub fn gen_selective(args: &SelectiveArgs) -> Result<(SampleTargetDistribution, Vec<usize>)> {
    let n = args.n;
    if n < 2 {
        return Err(Error::InvalidArgument("n must be at least 2".into()));
    }
    if let Some(&w) = args.windows.iter().find(|&&w| w == 0 || w > n) {
        return Err(Error::InvalidArgument(format!("window {w} must lie in [1, {n}]")));
    }
    let mut pairs = Vec::new();
    let mut lens = Vec::new();
    for &w in &args.windows {
        for t in 1..n {
            let start = match args.boundary {
                WindowBoundary::Disjoint => t,
                WindowBoundary::Overlapping => t - 1,
            };
            let end = t + w;
            if end > n && !args.clip {
                continue;
            }
            pairs.push(Pair::new((0..t).collect(), (start..end.min(n)).collect()));
            lens.push(w);
        }
    }
    Ok((SampleTargetDistribution::new(n, pairs)?, lens))
}

/// Sidecar written next to a generated distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMetadata {
    pub generator: String,
    pub args: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupStructure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<usize>>,
}

impl GeneratorMetadata {
    pub fn importance(args: &ImportanceArgs, groups: GroupStructure) -> Result<Self> {
        Ok(Self {
            generator: "importance".into(),
            args: serde_json::to_value(args)?,
            seed: Some(args.seed),
            groups: Some(groups),
            points: None,
            windows: None,
        })
    }

    pub fn snowball(args: &SnowballArgs, points: Vec<[f64; 2]>) -> Result<Self> {
        Ok(Self {
            generator: "snowball".into(),
            args: serde_json::to_value(args)?,
            seed: Some(args.seed),
            groups: None,
            points: Some(points),
            windows: None,
        })
    }

    pub fn selective(args: &SelectiveArgs, windows: Vec<usize>) -> Result<Self> {
        Ok(Self {
            generator: "selective".into(),
            args: serde_json::to_value(args)?,
            seed: None,
            groups: None,
            points: None,
            windows: Some(windows),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// `<stem>.meta.json` beside a distribution file.
pub fn metadata_path(distribution: &Path) -> std::path::PathBuf {
    let stem = distribution
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    distribution.with_file_name(format!("{stem}.meta.json"))
}
