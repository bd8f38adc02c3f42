//! Worst-case error analysis and minimization for semilinear estimators of
//! target averages from sampled coordinates.

pub mod baselines;
pub mod collectors;
pub mod distribution;
mod error;
pub mod estimator;
pub mod experiments;
pub mod loss;
pub mod lowerbound;
pub mod optimizer;
pub mod subproblems;

pub use distribution::{load_distribution, Pair, SampleTargetDistribution};
pub use error::{Error, Result, SetKind};
pub use estimator::SemilinearEstimator;
pub use loss::{build_loss_matrix, fixed_data_error, DataValues, LossMatrix, NormRegime};
