//! Tuning-gain sweeps: one independent run per requested `r`.

use super::metrics::{compute_metrics, MetricsReport};
use super::scenario::Scenario;
use super::{run_scenario_logged, HarnessError};
use crate::tol;

/// Step-size policy for high tuning gains: the observer places modes near
/// `-r`, so very stiff sweep points shrink the step to keep the explicit
/// integrator well inside its stability region.
pub fn plan_dt(dt: f64, r: f64) -> f64 {
    if r > tol::SWEEP_R_CLAMP {
        dt.min(tol::SWEEP_DT_FACTOR / r)
    } else {
        dt
    }
}

/// Run the scenario once per tuning gain, concurrently, and return the
/// metrics in the order the gains were given. Each point owns its scenario
/// copy; the first failing run's error is propagated.
pub fn sweep(scn: &Scenario, r_values: &[f64]) -> Result<Vec<MetricsReport>, HarnessError> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = r_values
            .iter()
            .map(|&r| {
                let mut point = scn.clone();
                point.eso.r = r;
                point.sim.dt = plan_dt(scn.sim.dt, r);
                let base_dt = scn.sim.dt;
                scope.spawn(move || {
                    let mut overrides = vec![format!("r = {r} (sweep point)")];
                    if point.sim.dt != base_dt {
                        overrides.push(format!(
                            "dt = {} (clamped to {}/r for stiffness)",
                            point.sim.dt,
                            tol::SWEEP_DT_FACTOR
                        ));
                    }
                    let trace = run_scenario_logged(&point, overrides)?;
                    compute_metrics(&trace, &point).map_err(HarnessError::from)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}
