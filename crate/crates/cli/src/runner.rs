//! Runs every sweep point of a configuration and writes its CSV files.

use std::path::{Path, PathBuf};

use pnpb_core::kernel::{load_or_build, KernelSpec};
use pnpb_core::{run_dynamics_with, solve_equilibrium, PnpbError, Result, Scenario, State, System};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output;

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "PNPB_OUTPUT_ROOT";

/// Tolerance for deciding that a step has reached an output time.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub steps: usize,
    pub final_time: f64,
    /// Lowest void fraction seen over the run.
    pub min_gamma: f64,
    pub equilibrium_iterations: Option<usize>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct PointOutcome {
    pub label: String,
    pub dir: PathBuf,
    pub result: Result<PointSummary>,
}

/// `output_dir`, placed under `$PNPB_OUTPUT_ROOT` when that is set and
/// `output_dir` is relative.
pub fn resolve_output_dir(output_dir: &Path, root: Option<&Path>) -> PathBuf {
    match root {
        Some(root) if output_dir.is_relative() => root.join(output_dir),
        _ => output_dir.to_path_buf(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> PnpbError {
    PnpbError::Cache(format!("cannot write {}: {e}", path.display()))
}

fn build(point: &Scenario, cache: Option<&Path>) -> Result<(System, State)> {
    match cache {
        Some(dir) => {
            let grid = point.grid()?;
            let p = &point.params;
            let spec = KernelSpec::new(p.kernel, grid.dim(), p.lambda, p.nu)?;
            point.build_with_table(load_or_build(dir, &spec, &grid)?)
        }
        None => point.build(),
    }
}

fn run_point(config: &RunConfig, point: &Scenario, dir: &Path) -> Result<PointSummary> {
    let (system, initial) = build(point, config.kernel_cache.as_deref())?;
    let mut files = Vec::new();
    let mut save = |name: String, contents: &str| -> Result<()> {
        let path = dir.join(name);
        output::write(&path, contents).map_err(|e| io_err(&path, e))?;
        files.push(path);
        Ok(())
    };
    let mut summary = PointSummary {
        steps: 0,
        final_time: initial.time,
        min_gamma: f64::INFINITY,
        equilibrium_iterations: None,
        files: Vec::new(),
    };

    if config.mode.dynamics() {
        let targets = config
            .output_times
            .clone()
            .unwrap_or_else(|| vec![point.t_end]);
        let mut next = 0;
        let mut trace = output::trace_header(initial.species_count());
        let outcome = run_dynamics_with(
            &system,
            &initial,
            point.dt,
            point.t_end,
            |state, fields, record| {
                trace.push_str(&output::trace_row(record));
                summary.steps += 1;
                summary.final_time = state.time;
                summary.min_gamma = summary.min_gamma.min(record.min_gamma);
                while next < targets.len()
                    && state.time >= targets[next] - TIME_SLACK * targets[next].max(1.0)
                {
                    let tag = output::time_tag(targets[next]);
                    save(
                        format!("profile_{tag}.csv"),
                        &output::profile_csv(&system, state, fields),
                    )?;
                    if system.grid().dim() == 2 {
                        save(
                            format!("marginal_{tag}.csv"),
                            &output::marginal_csv(&system, state),
                        )?;
                    }
                    next += 1;
                }
                Ok(())
            },
        );
        // The trace is kept even when the run stops early.
        save("trace.csv".into(), &trace)?;
        outcome?;
        // Time levels include the initial one.
        summary.steps = summary.steps.saturating_sub(1);
    }

    if config.mode.equilibrium() {
        let eq = &config.equilibrium;
        let report = solve_equilibrium(&system, &initial, eq.damping, eq.tol, eq.max_iter)?;
        save(
            "equilibrium.csv".into(),
            &output::profile_csv(&system, &report.state, &report.fields),
        )?;
        let mut trace = String::from("iteration,E\n");
        for (k, e) in report.energy_trace.iter().enumerate() {
            trace.push_str(&format!("{k},{}\n", output::num(*e)));
        }
        save("equilibrium_trace.csv".into(), &trace)?;
        summary.min_gamma = summary.min_gamma.min(report.fields.min_gamma());
        summary.equilibrium_iterations = Some(report.iterations);
        for w in &report.warnings {
            eprintln!("warning [{}]: {w}", point.label);
        }
    }
    summary.files = files;
    Ok(summary)
}

/// Runs all sweep points, in parallel, writing into
/// `<output root>/<config name>/<point>/`. A failing point does not stop
/// the others.
pub fn run_config(config: &RunConfig, output_root: &Path) -> Vec<PointOutcome> {
    let base = output_root.join(&config.name);
    config
        .points
        .par_iter()
        .map(|point| {
            let dir = base.join(output::point_dir(&point.label));
            let result = run_point(config, point, &dir);
            PointOutcome {
                label: point.label.clone(),
                dir,
                result,
            }
        })
        .collect()
}
