//! Online gradient descent over semilinear estimators with projection onto a
//! ball around the targets, plus the doubling search over the optimum bound.

mod ball;
mod doubling;
mod ogd;

pub use ball::{project_to_ball, BallGeometry};
pub use doubling::{run_with_doubling, DoublingAttempt, DoublingOutcome};
pub use ogd::{
    linear_cost, linear_cost_gradient, minimize_sdp2, minimize_sdp_inf, minimize_with_bound, ogd_step,
    step_size, OgdConfig, OgdRun, OgdTrace, TraceRecord,
};
