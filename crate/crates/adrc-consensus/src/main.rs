//! Command-line front end: design inspection, single runs, gain sweeps,
//! and the built-in verification suite.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 scenario/argument validation
//! failure (including runtime expression domain errors), 3 divergence
//! during integration, 4 verification-suite failure.

use adrc_consensus::engine::SimError;
use adrc_consensus::harness::{
    self, compute_metrics, output, sweep, verify, HarnessError, MetricsReport, Scenario,
};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "adrc-consensus",
    version,
    about = "Design and simulate saturated ADRC output-consensus protocols \
             for leader-follower multi-agent chains"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the gain design for a scenario: follower Laplacian block,
    /// weight vector, coupling constants, Riccati solution, and the
    /// observer-gain Hurwitz verdict.
    Design {
        /// Scenario file.
        scn: PathBuf,
    },
    /// Integrate one scenario and write trace, metrics, and charts.
    Simulate {
        /// Scenario file.
        scn: PathBuf,
        /// Override the observer tuning gain.
        #[arg(long)]
        r: Option<f64>,
        /// Override the integration step.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the horizon.
        #[arg(long = "t-final")]
        t_final: Option<f64>,
        /// Output directory for trace.csv, metrics.csv, and the charts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the scenario once per tuning gain and print a combined
    /// metrics table.
    Sweep {
        /// Scenario file.
        scn: PathBuf,
        /// Comma-separated tuning gains, e.g. `--r 10,50`.
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<f64>,
        /// Optional directory for the combined metrics.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in verification suite.
    Verify,
}

fn main() -> ExitCode {
    let code = match Cli::parse().cmd {
        Cmd::Design { scn } => cmd_design(&scn),
        Cmd::Simulate {
            scn,
            r,
            dt,
            t_final,
            out,
        } => cmd_simulate(&scn, r, dt, t_final, &out),
        Cmd::Sweep { scn, r, out } => cmd_sweep(&scn, &r, out.as_deref()),
        Cmd::Verify => cmd_verify(),
    };
    ExitCode::from(code)
}

fn fail(err: &HarnessError) -> u8 {
    eprintln!("error: {err}");
    match err {
        HarnessError::Io(_) => 1,
        HarnessError::Scenario(_) | HarnessError::Design(_) | HarnessError::Oracle(_) => 2,
        HarnessError::Sim(SimError::Divergence { .. }) | HarnessError::Sim(SimError::NonFinite { .. }) => 3,
        // Domain errors in scenario expressions surface at runtime but are
        // scenario-content problems.
        HarnessError::Sim(SimError::Eval { .. }) => 2,
    }
}

fn load(path: &Path) -> Result<Scenario, HarnessError> {
    let src = std::fs::read_to_string(path)?;
    Ok(Scenario::parse(&src)?)
}

fn cmd_design(path: &Path) -> u8 {
    let scn = match load(path) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let design = match scn.design() {
        Ok(d) => d,
        Err(e) => return fail(&HarnessError::Design(e)),
    };
    println!("scenario {} (hash {:016x})", scn.name, scn.hash());
    println!("followers m = {}, chain order n = {}", scn.m, scn.n);
    println!("follower Laplacian block L1 =\n{}", design.laplacian.l1.render(4));
    let fmt_vec = |v: &[f64]| {
        v.iter()
            .map(|x| output::format_sig(*x, 6))
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("W   = ({})", fmt_vec(&design.w));
    println!("mu  = {}", output::format_g(design.mu));
    println!("mu0 = {}", output::format_g(design.mu0));
    println!(
        "P =\n{}",
        design.riccati.p.render(6)
    );
    println!("K   = ({})", fmt_vec(&design.riccati.k));
    println!(
        "Riccati residual {} after {} iterations",
        output::format_sig(design.riccati.residual, 3),
        design.riccati.iterations
    );
    println!(
        "observer gains k = ({}) with r = {}: Hurwitz",
        fmt_vec(&scn.eso.k),
        output::format_g(scn.eso.r)
    );
    0
}

fn apply_overrides(
    scn: &mut Scenario,
    r: Option<f64>,
    dt: Option<f64>,
    t_final: Option<f64>,
) -> Result<Vec<String>, String> {
    let mut log = Vec::new();
    if let Some(r) = r {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(format!("--r must be a finite gain >= 1, got {r}"));
        }
        log.push(format!("r: {} -> {} (--r)", scn.eso.r, r));
        scn.eso.r = r;
    }
    if let Some(dt) = dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(format!("--dt must be positive, got {dt}"));
        }
        log.push(format!("dt: {} -> {} (--dt)", scn.sim.dt, dt));
        scn.sim.dt = dt;
    }
    if let Some(tf) = t_final {
        log.push(format!("t_final: {} -> {} (--t-final)", scn.sim.t_final, tf));
        scn.sim.t_final = tf;
    }
    if scn.sim.t_final < scn.sim.dt {
        return Err(format!(
            "t_final = {} does not cover one step of dt = {}",
            scn.sim.t_final, scn.sim.dt
        ));
    }
    Ok(log)
}

fn print_report(report: &MetricsReport) {
    println!("r = {}", output::format_g(report.r));
    println!("agent  tail_sup_tracking  tail_sup_estimation  max_state_norm");
    for a in &report.agents {
        println!(
            "{:<5}  {:<17}  {:<19}  {}",
            a.agent,
            output::format_sig(a.tail_sup_tracking, 6),
            output::format_sig(a.tail_sup_estimation, 6),
            output::format_sig(a.max_state_norm, 6)
        );
    }
}

fn cmd_simulate(
    path: &Path,
    r: Option<f64>,
    dt: Option<f64>,
    t_final: Option<f64>,
    out: &Path,
) -> u8 {
    let mut scn = match load(path) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let overrides = match apply_overrides(&mut scn, r, dt, t_final) {
        Ok(log) => log,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    for line in &overrides {
        eprintln!("override: {line}");
    }
    let trace = match harness::run_scenario_logged(&scn, overrides) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    for warning in &trace.meta.warnings {
        eprintln!("warning: {warning}");
    }
    let report = match compute_metrics(&trace, &scn) {
        Ok(rep) => rep,
        Err(e) => return fail(&HarnessError::Oracle(e)),
    };
    print_report(&report);
    match harness::write_run_outputs(out, &scn, &trace, &report) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            0
        }
        Err(e) => fail(&e),
    }
}

fn cmd_sweep(path: &Path, r_values: &[f64], out: Option<&Path>) -> u8 {
    if let Some(&bad) = r_values.iter().find(|&&r| !(r >= 1.0 && r.is_finite())) {
        eprintln!("error: every sweep gain must be finite and >= 1, got {bad}");
        return 2;
    }
    let scn = match load(path) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let reports = match sweep(&scn, r_values) {
        Ok(reps) => reps,
        Err(e) => return fail(&e),
    };
    for report in &reports {
        print_report(report);
        println!();
    }
    if let Some(dir) = out {
        let write = || -> Result<PathBuf, HarnessError> {
            std::fs::create_dir_all(dir)?;
            let p = dir.join("metrics.csv");
            std::fs::write(&p, output::metrics_csv(&reports))?;
            Ok(p)
        };
        match write() {
            Ok(p) => println!("wrote {}", p.display()),
            Err(e) => return fail(&e),
        }
    }
    0
}

fn cmd_verify() -> u8 {
    let results = verify::run_all();
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} - {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    println!(
        "verification: {}/{} checks passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        4
    } else {
        0
    }
}
