//! Datasets, estimator-by-dataset evaluation, and the three experiment tables.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    reweighting_estimator, sample_mean_estimator, selective_prediction_estimator, subgroup_estimator,
    EmptyGroupRule,
};
use crate::collectors::{
    gen_importance, gen_selective, gen_snowball, ImportanceArgs, SelectiveArgs, SnowballArgs, WindowBoundary,
};
use crate::distribution::SampleTargetDistribution;
use crate::error::{Error, Result};
use crate::estimator::SemilinearEstimator;
use crate::loss::{build_loss_matrix, fixed_data_error, NormRegime};
use crate::optimizer::{run_with_doubling, DoublingOutcome, OgdConfig};
use crate::subproblems::{sdp2_of_matrix, sdp_inf_solve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    /// `x = 𝟙`.
    Constant,
    /// `+1` on the first half of the population, `-1` on the rest.
    Intergroup,
    /// `+1` on even 0-based indices, `-1` on odd ones.
    Intragroup,
    /// Explicit values, e.g. spatial sums or a file.
    Values { name: String, x: Vec<f64> },
    WorstLinf,
    WorstL2,
}

impl Dataset {
    pub fn label(&self) -> &str {
        match self {
            Dataset::Constant => "constant",
            Dataset::Intergroup => "intergroup",
            Dataset::Intragroup => "intragroup",
            Dataset::Values { name, .. } => name,
            Dataset::WorstLinf => "worst_sdp_inf",
            Dataset::WorstL2 => "worst_sdp2",
        }
    }

    /// Concrete values for fixed datasets; `None` for worst cases.
    pub fn values(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            Dataset::Constant => Some(vec![1.0; n]),
            Dataset::Intergroup => Some((0..n).map(|j| if j < n / 2 { 1.0 } else { -1.0 }).collect()),
            Dataset::Intragroup => Some((0..n).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect()),
            Dataset::Values { x, .. } => Some(x.clone()),
            Dataset::WorstLinf | Dataset::WorstL2 => None,
        }
    }
}

/// `x_j` = sum of the two coordinates of point `j`.
pub fn spatial_values(points: &[[f64; 2]]) -> Vec<f64> {
    points.iter().map(|p| p[0] + p[1]).collect()
}

/// Squared-error metric of `a` on one dataset. Worst cases are the solver
/// values of `sdp∞` and `sdp₂`; an unconverged `sdp∞` solve reports its best
/// objective.
pub fn evaluate(
    a: &SemilinearEstimator,
    dist: &SampleTargetDistribution,
    dataset: &Dataset,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if let Some(x) = dataset.values(dist.n()) {
        if x.len() != dist.n() {
            return Err(Error::DimensionMismatch {
                expected: dist.n(),
                got: x.len(),
            });
        }
        return fixed_data_error(a, dist, &x);
    }
    let m = build_loss_matrix(a, dist)?;
    match dataset {
        Dataset::WorstL2 => Ok(sdp2_of_matrix(&m, eps, rng)?.value),
        _ => match sdp_inf_solve(&m, eps, rng) {
            Ok(sol) => Ok(sol.objective),
            Err(Error::SdpNotConverged { best, .. }) => Ok(best.objective),
            Err(e) => Err(e),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub estimator: String,
    pub dataset: String,
    pub error: f64,
}

/// Every `(estimator, dataset)` cell, evaluated in parallel. Cell `c` draws
/// from stream `c` of a generator seeded with `seed`, so results do not
/// depend on scheduling.
pub fn evaluate_grid(
    estimators: &[(String, SemilinearEstimator)],
    dist: &SampleTargetDistribution,
    datasets: &[Dataset],
    eps: f64,
    seed: u64,
) -> Result<Vec<EvalRecord>> {
    let cells: Vec<(usize, usize)> = (0..estimators.len())
        .flat_map(|e| (0..datasets.len()).map(move |d| (e, d)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(c, &(e, d))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let (name, a) = &estimators[e];
            Ok(EvalRecord {
                estimator: name.clone(),
                dataset: datasets[d].label().to_string(),
                error: evaluate(a, dist, &datasets[d], eps, &mut rng)?,
            })
        })
        .collect()
}

pub fn write_records_csv<W: Write>(records: &[EvalRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["estimator", "dataset", "error"])?;
    for r in records {
        w.write_record([r.estimator.as_str(), r.dataset.as_str(), &format!("{:.6}", r.error)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Importance,
    Snowball,
    Selective,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::Importance,
        ExperimentKind::Snowball,
        ExperimentKind::Selective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Importance => "importance",
            ExperimentKind::Snowball => "snowball",
            ExperimentKind::Selective => "selective",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "experiment",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    /// Pair count for the sampled settings; `None` uses 2000.
    pub m: Option<usize>,
    pub eps: f64,
    pub t_max: usize,
    pub empty_group: EmptyGroupRule,
    pub boundary: WindowBoundary,
    pub clip: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            m: None,
            eps: 0.01,
            t_max: 1000,
            empty_group: EmptyGroupRule::ZeroMean,
            boundary: WindowBoundary::Disjoint,
            clip: false,
        }
    }
}

impl ExperimentConfig {
    pub fn pairs(&self) -> usize {
        self.m.unwrap_or(2000)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl ExperimentTable {
    pub fn get(&self, row: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.label == row).map(|r| r.values[c])
    }

    /// `data_values,<columns…>` header, 6-decimal values.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["data_values".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone()];
            rec.extend(r.values.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    fn mean_of(tables: &[ExperimentTable]) -> ExperimentTable {
        let mut out = tables[0].clone();
        let k = tables.len() as f64;
        for (r, row) in out.rows.iter_mut().enumerate() {
            for (c, v) in row.values.iter_mut().enumerate() {
                *v = tables.iter().map(|t| t.rows[r].values[c]).sum::<f64>() / k;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerProvenance {
    pub seed: u64,
    pub regime: NormRegime,
    pub runtime_ms: f64,
    pub p_final: f64,
    pub doublings: usize,
    pub accepted: bool,
    pub iterations: usize,
    pub best_t: usize,
    pub best_value: f64,
    pub theoretical_iterations: f64,
    pub regret_bound: f64,
    pub unconverged_subproblems: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub seeds: Vec<u64>,
    pub n: usize,
    pub m: usize,
    pub eps: f64,
    pub t_max: usize,
    pub config: ExperimentConfig,
    pub optimizers: Vec<OptimizerProvenance>,
    pub evaluation_runtime_ms: f64,
    pub total_runtime_ms: f64,
}

impl Provenance {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub distribution: SampleTargetDistribution,
    pub estimators: Vec<(String, SemilinearEstimator)>,
    pub table: ExperimentTable,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Cell-wise mean over seeds.
    pub table: ExperimentTable,
    pub runs: Vec<SeedRun>,
    pub provenance: Provenance,
}

struct Setting {
    dist: SampleTargetDistribution,
    baselines: Vec<(String, SemilinearEstimator)>,
    datasets: Vec<Dataset>,
}

fn build_setting(kind: ExperimentKind, cfg: &ExperimentConfig, seed: u64) -> Result<Setting> {
    match kind {
        ExperimentKind::Importance => {
            let args = ImportanceArgs {
                m: cfg.pairs(),
                seed,
                ..Default::default()
            };
            let (dist, gs) = gen_importance(&args)?;
            let baselines = vec![
                ("reweighting".to_string(), reweighting_estimator(&dist, &gs)?),
                ("subgroup".to_string(), subgroup_estimator(&dist, &gs, cfg.empty_group)?),
            ];
            Ok(Setting {
                dist,
                baselines,
                datasets: vec![
                    Dataset::Constant,
                    Dataset::Intergroup,
                    Dataset::Intragroup,
                    Dataset::WorstLinf,
                    Dataset::WorstL2,
                ],
            })
        }
        ExperimentKind::Snowball => {
            let args = SnowballArgs {
                m: cfg.pairs(),
                seed,
                ..Default::default()
            };
            let (dist, points) = gen_snowball(&args)?;
            let baselines = vec![("sample_mean".to_string(), sample_mean_estimator(&dist))];
            Ok(Setting {
                dist,
                baselines,
                datasets: vec![
                    Dataset::Values {
                        name: "spatial".into(),
                        x: spatial_values(&points),
                    },
                    Dataset::WorstLinf,
                    Dataset::WorstL2,
                ],
            })
        }
        ExperimentKind::Selective => {
            let args = SelectiveArgs {
                boundary: cfg.boundary,
                clip: cfg.clip,
                ..Default::default()
            };
            let (dist, windows) = gen_selective(&args)?;
            let baselines = vec![(
                "selective_prediction".to_string(),
                selective_prediction_estimator(&dist, &windows)?,
            )];
            Ok(Setting {
                dist,
                baselines,
                datasets: vec![Dataset::WorstLinf, Dataset::WorstL2],
            })
        }
    }
}

fn optimize(
    dist: &SampleTargetDistribution,
    cfg: &ExperimentConfig,
    seed: u64,
    regime: NormRegime,
) -> Result<(DoublingOutcome, OptimizerProvenance)> {
    let ocfg = OgdConfig {
        eps: cfg.eps,
        t_max: cfg.t_max,
        seed,
        ..OgdConfig::new(regime)
    };
    let clock = Instant::now();
    let out = run_with_doubling(dist, &ocfg)?;
    let prov = OptimizerProvenance {
        seed,
        regime,
        runtime_ms: clock.elapsed().as_secs_f64() * 1e3,
        p_final: out.p_final,
        doublings: out.doublings,
        accepted: out.accepted,
        iterations: out.trace.iterations(),
        best_t: out.trace.best_t,
        best_value: out.trace.best_value,
        theoretical_iterations: out.trace.theoretical_iterations,
        regret_bound: out.trace.regret_bound,
        unconverged_subproblems: out.trace.unconverged_subproblems,
    };
    Ok((out, prov))
}

fn run_seed(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(SeedRun, Vec<OptimizerProvenance>, f64)> {
    let setting = build_setting(kind, cfg, seed)?;
    let dist = &setting.dist;
    let (linf, l2) = rayon::join(
        || optimize(dist, cfg, seed, NormRegime::Linf),
        || optimize(dist, cfg, seed, NormRegime::L2),
    );
    let (linf, linf_prov) = linf?;
    let (l2, l2_prov) = l2?;
    let mut estimators = setting.baselines;
    estimators.push(("ogd_linf".to_string(), linf.estimator));
    estimators.push(("ogd_l2".to_string(), l2.estimator));

    let clock = Instant::now();
    let records = evaluate_grid(&estimators, dist, &setting.datasets, cfg.eps, seed)?;
    let eval_ms = clock.elapsed().as_secs_f64() * 1e3;
    let columns: Vec<String> = estimators.iter().map(|(n, _)| n.clone()).collect();
    let rows = setting
        .datasets
        .iter()
        .map(|d| TableRow {
            label: d.label().to_string(),
            values: columns
                .iter()
                .map(|c| {
                    records
                        .iter()
                        .find(|r| &r.estimator == c && r.dataset == d.label())
                        .map(|r| r.error)
                        .expect("every cell is evaluated")
                })
                .collect(),
        })
        .collect();
    let table = ExperimentTable {
        experiment: kind.name().to_string(),
        columns,
        rows,
    };
    Ok((
        SeedRun {
            seed,
            distribution: setting.dist,
            estimators,
            table,
        },
        vec![linf_prov, l2_prov],
        eval_ms,
    ))
}

/// Regenerates a setting per seed, fits both optimizers, evaluates the table
/// grid, and averages over seeds.
pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let clock = Instant::now();
    let results = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(kind, cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(results.len());
    let mut optimizers = Vec::new();
    let mut eval_ms = 0.0;
    for (run, prov, ms) in results {
        runs.push(run);
        optimizers.extend(prov);
        eval_ms += ms;
    }
    let tables: Vec<ExperimentTable> = runs.iter().map(|r| r.table.clone()).collect();
    let provenance = Provenance {
        experiment: kind.name().to_string(),
        seeds: cfg.seeds.clone(),
        n: runs[0].distribution.n(),
        m: runs[0].distribution.m(),
        eps: cfg.eps,
        t_max: cfg.t_max,
        config: cfg.clone(),
        optimizers,
        evaluation_runtime_ms: eval_ms,
        total_runtime_ms: clock.elapsed().as_secs_f64() * 1e3,
    };
    Ok(ExperimentOutput {
        table: ExperimentTable::mean_of(&tables),
        runs,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Pair;

    #[test]
    fn dataset_values() {
        assert_eq!(Dataset::Intergroup.values(4).unwrap(), vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(Dataset::Intragroup.values(3).unwrap(), vec![1.0, -1.0, 1.0]);
        assert_eq!(Dataset::Constant.values(2).unwrap(), vec![1.0, 1.0]);
        assert!(Dataset::WorstL2.values(2).is_none());
        assert_eq!(spatial_values(&[[0.25, 0.5]]), vec![0.75]);
    }

    #[test]
    fn full_observation_sample_mean_is_exact() {
        let d = SampleTargetDistribution::new(3, vec![Pair::new(vec![0, 1, 2], vec![0, 1, 2]); 2]).unwrap();
        let est = vec![("sample_mean".to_string(), sample_mean_estimator(&d))];
        let recs = evaluate_grid(
            &est,
            &d,
            &[Dataset::Constant, Dataset::Intragroup, Dataset::WorstLinf, Dataset::WorstL2],
            0.01,
            0,
        )
        .unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs.iter().all(|r| r.error.abs() < 1e-12));
    }

    #[test]
    fn grid_is_deterministic_and_csv_formatted() {
        let d = SampleTargetDistribution::new(
            3,
            vec![Pair::new(vec![0], vec![0, 1, 2]), Pair::new(vec![1, 2], vec![0, 1, 2])],
        )
        .unwrap();
        let est = vec![("sample_mean".to_string(), sample_mean_estimator(&d))];
        let ds = [Dataset::WorstLinf, Dataset::WorstL2];
        let a = evaluate_grid(&est, &d, &ds, 0.01, 5).unwrap();
        let b = evaluate_grid(&est, &d, &ds, 0.01, 5).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_records_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("estimator,dataset,error\nsample_mean,worst_sdp_inf,"));
    }

    #[test]
    fn small_experiment_shapes() {
        let cfg = ExperimentConfig {
            seeds: vec![1, 2],
            m: Some(40),
            t_max: 20,
            ..Default::default()
        };
        let imp = run_experiment(ExperimentKind::Importance, &cfg).unwrap();
        assert_eq!(imp.table.columns, ["reweighting", "subgroup", "ogd_linf", "ogd_l2"]);
        assert_eq!(imp.table.rows.len(), 5);
        assert_eq!(imp.runs.len(), 2);
        assert_eq!(imp.provenance.optimizers.len(), 4);
        let snow = run_experiment(ExperimentKind::Snowball, &cfg).unwrap();
        assert_eq!((snow.table.rows.len(), snow.table.columns.len()), (3, 3));
        let sel = run_experiment(ExperimentKind::Selective, &ExperimentConfig { t_max: 20, ..Default::default() })
            .unwrap();
        assert_eq!((sel.table.rows.len(), sel.table.columns.len()), (2, 3));
        assert_eq!(sel.provenance.m, 129);
        let mut buf = Vec::new();
        sel.table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("data_values,selective_prediction,ogd_linf,ogd_l2\nworst_sdp_inf,"));
    }

    #[test]
    fn experiment_names() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("survey".parse::<ExperimentKind>().is_err());
    }
}
