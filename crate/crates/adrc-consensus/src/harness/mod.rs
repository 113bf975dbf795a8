//! Scenario files, metrics, artifact emission, sweeps and the built-in
//! verification suite — everything around the simulation core.

pub mod metrics;
pub mod output;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use metrics::{compute_metrics, AgentMetrics, MetricsReport};
pub use scenario::{ProtocolConfig, Scenario, ScenarioError};
pub use sweep::sweep;

use crate::engine::{self, SimError, Trace};
use crate::plant::OracleError;
use crate::protocol::DesignError;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Shipped scenario texts, embedded so the verification suite and tests run
/// without touching the filesystem.
pub mod scenarios {
    pub const S4_PARA1: &str = include_str!("../../scenarios/s4_para1.scn");
    pub const S4_PARA2: &str = include_str!("../../scenarios/s4_para2.scn");
    pub const S4_THEORY: &str = include_str!("../../scenarios/s4_theory.scn");
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Design the protocol for `scn` and integrate it, logging `overrides`
/// into the trace metadata.
pub fn run_scenario_logged(
    scn: &Scenario,
    overrides: Vec<String>,
) -> Result<Trace, HarnessError> {
    let design = scn.design()?;
    let sys = scn.to_system(&design);
    let meta = scn.trace_meta(&design, overrides);
    Ok(engine::run(&sys, &scn.sim, meta)?)
}

/// [`run_scenario_logged`] without overrides.
pub fn run_scenario(scn: &Scenario) -> Result<Trace, HarnessError> {
    run_scenario_logged(scn, Vec::new())
}

/// Write the full artifact set for one run into `dir`: `trace.csv`,
/// `metrics.csv` and the three standard charts (tracking errors, highest
/// plant states, estimation errors). Returns the created paths.
pub fn write_run_outputs(
    dir: &Path,
    scn: &Scenario,
    trace: &Trace,
    report: &MetricsReport,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<(), HarnessError> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    emit("trace.csv", output::trace_csv(trace))?;
    emit("metrics.csv", output::metrics_csv(std::slice::from_ref(report)))?;
    let charts = output::standard_charts(trace, scn)?;
    emit("tracking_errors.svg", charts.tracking)?;
    emit("second_states.svg", charts.states)?;
    emit("estimation_errors.svg", charts.estimation)?;
    Ok(written)
}
