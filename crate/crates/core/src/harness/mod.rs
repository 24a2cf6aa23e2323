//! Experiment runner: configuration, initial data, single runs and sweeps.

mod config;
mod initial;

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

pub use config::{
    ExperimentConfig, GridSection, InitialKind, InitialSection, KernelSection, ModelSection, OutputSection,
    StoppingSection, SweepSection, DEFAULT_LENGTH_1D, DEFAULT_LENGTH_2D,
};
pub use initial::{build_initial, GridParams};

use crate::error::{Error, Result};
use crate::grid::{component_diameter, default_support_components, write_csv, write_pgm, Field};
use crate::integrator::{run_to_stationary_with, RunOptions, Trajectory};
use crate::stationary::{analyze, StationaryReport};

/// Everything a finished run produces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub kernel: String,
    pub m: f64,
    pub mass: f64,
    pub initial: Field,
    pub field: Field,
    pub trajectory: Trajectory,
    pub report: StationaryReport,
    /// Domain at least `2·(kernel reach + widest component)` wide.
    pub support_margin_ok: bool,
}

impl RunOutcome {
    pub fn energy_final(&self) -> f64 {
        self.trajectory.rows.last().map_or(f64::NAN, |r| r.energy)
    }
}

impl ExperimentConfig {
    pub fn grid_params(&self) -> GridParams {
        GridParams {
            dims: self.grid.dims,
            cells: self.cells(),
            dx: self.grid.dx,
        }
    }
}

fn label(cfg: &ExperimentConfig) -> String {
    format!("run kernel={} m={} M={}", cfg.kernel.name, cfg.model.m, cfg.initial.mass)
}

/// Runs to stationarity without touching the disk. Snapshots, when
/// requested, go to `on_snapshot`.
pub fn execute(
    cfg: &ExperimentConfig,
    on_snapshot: Option<&mut dyn FnMut(usize, &Field) -> Result<()>>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let run = || -> Result<RunOutcome> {
        let k = cfg.kernel()?;
        let stencil = cfg.stencil(&k)?;
        let params = cfg.sim_params(cfg.model.m);
        let initial = build_initial(&cfg.initial, &cfg.grid_params())?;
        let opts = RunOptions {
            trace_every: cfg.output.trace_every,
            snapshot_every: if on_snapshot.is_some() { cfg.output.snapshot_every } else { 0 },
            on_snapshot,
        };
        let (field, trajectory) = run_to_stationary_with(&initial, &stencil, &params, opts)?;
        let report = analyze(&field, &stencil, &k, &params, trajectory.converged, trajectory.final_residual);
        let comps = default_support_components(&field);
        let widest = comps
            .components
            .iter()
            .map(|c| component_diameter(c, &field))
            .fold(0.0, f64::max);
        let reach = cfg.truncation(&k);
        let support_margin_ok = cfg.domain_length() >= 2.0 * (reach + widest);
        if !support_margin_ok {
            warn!(
                "{}: domain {} is narrower than 2·(reach {reach} + support {widest}); periodic images may interact",
                label(cfg),
                cfg.domain_length()
            );
        }
        Ok(RunOutcome {
            kernel: cfg.kernel.name.clone(),
            m: cfg.model.m,
            mass: cfg.initial.mass,
            initial,
            field,
            trajectory,
            report,
            support_margin_ok,
        })
    };
    run().map_err(|e| e.context(label(cfg)))
}

fn write_field(field: &Field, dir: &Path, stem: &str) -> Result<()> {
    write_csv(field, &dir.join(format!("{stem}.csv")))?;
    if field.dims() == 2 {
        write_pgm(field, &dir.join(format!("{stem}.pgm")))?;
    }
    Ok(())
}

/// Writes the artifacts of a finished run into `dir`: `trajectory.csv`,
/// `initial.csv`, `final.csv` (plus `.pgm` in 2D), `report.csv` and `report.txt`.
pub fn write_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trajectory.csv"), outcome.trajectory.to_csv())?;
    write_field(&outcome.initial, dir, "initial")?;
    write_field(&outcome.field, dir, "final")?;
    let report = &outcome.report;
    std::fs::write(
        dir.join("report.csv"),
        format!("{}\n{}\n", StationaryReport::CSV_HEADER, report.csv_row()),
    )?;
    let mut text = format!(
        "kernel:           {}\nmass:             {}\nsteps:            {}\n",
        outcome.kernel, outcome.mass, outcome.trajectory.steps
    );
    text.push_str(&report.text_block());
    std::fs::write(dir.join("report.txt"), text)?;
    Ok(())
}

/// Runs one configuration and writes its artifacts to `[output].dir`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    run_into(cfg, &cfg.output.dir)
}

fn run_into(cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    std::fs::create_dir_all(dir)?;
    let mut snap = |step: usize, f: &Field| write_field(f, dir, &format!("snapshot_{step:08}"));
    let hook: Option<&mut dyn FnMut(usize, &Field) -> Result<()>> =
        if cfg.output.snapshot_every > 0 { Some(&mut snap) } else { None };
    let outcome = execute(cfg, hook)?;
    write_artifacts(&outcome, dir).map_err(|e| e.context(label(cfg)))?;
    info!(
        "{}: {} steps, max density {:.6}, converged {}",
        label(cfg),
        outcome.trajectory.steps,
        outcome.report.max_density,
        outcome.report.converged
    );
    Ok(outcome)
}

/// Summary of one successful sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSummary {
    pub max_density: f64,
    pub rho_star: Option<f64>,
    pub rho_e: Option<f64>,
    pub min_gap: Option<f64>,
    pub converged: bool,
    pub steps: usize,
    pub energy_final: f64,
    pub components: usize,
    pub hard_assertions_pass: bool,
}

impl SweepSummary {
    fn from_outcome(o: &RunOutcome) -> SweepSummary {
        SweepSummary {
            max_density: o.report.max_density,
            rho_star: o.report.rho_star,
            rho_e: o.report.rho_e,
            min_gap: o.report.min_gap,
            converged: o.report.converged,
            steps: o.trajectory.steps,
            energy_final: o.energy_final(),
            components: o.report.components.len(),
            hard_assertions_pass: o.report.hard_assertions_pass(),
        }
    }
}

/// One sweep row; failed runs keep their error message.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub kernel: String,
    pub m: f64,
    pub mass: f64,
    pub result: std::result::Result<SweepSummary, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub const CSV_HEADER: &'static str =
        "m,M,kernel,max_density,rho_star,rho_E,min_gap,converged,steps,energy_final,error";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::new();
        let _ = writeln!(s, "{}", Self::CSV_HEADER);
        for row in &self.rows {
            match &row.result {
                Ok(r) => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},{},{},",
                        row.m,
                        row.mass,
                        row.kernel,
                        r.max_density,
                        opt(r.rho_star),
                        opt(r.rho_e),
                        opt(r.min_gap),
                        r.converged,
                        r.steps,
                        r.energy_final
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "{},{},{},,,,,false,,,\"{}\"", row.m, row.mass, row.kernel, e.replace('"', "'"));
                }
            }
        }
        s
    }

    /// Every point ran and passed its hard assertions.
    pub fn all_pass(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.result.as_ref().is_ok_and(|s| s.hard_assertions_pass))
    }

    pub fn summaries(&self) -> impl Iterator<Item = (&SweepRow, &SweepSummary)> {
        self.rows.iter().filter_map(|r| r.result.as_ref().ok().map(|s| (r, s)))
    }
}

fn point_dir(idx: usize, kernel: &str, m: f64, mass: f64) -> String {
    format!("point_{idx:03}_{kernel}_m{m}_M{mass}")
}

/// Runs every `[sweep]` point concurrently without writing anything.
pub fn execute_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    sweep_impl(cfg, None)
}

/// Runs every `[sweep]` point concurrently; each point writes its artifacts
/// to its own subdirectory and the rows go to `sweep.csv` in list order.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    let result = sweep_impl(cfg, Some(&cfg.output.dir))?;
    std::fs::write(cfg.output.dir.join("sweep.csv"), result.to_csv())?;
    Ok(result)
}

fn sweep_impl(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<SweepResult> {
    cfg.validate()?;
    let points = cfg.sweep_points()?;
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(idx, (kernel, m, mass))| {
            let point = cfg.with_point(*m, *mass, kernel);
            let outcome = match dir {
                Some(d) => run_into(&point, &d.join(point_dir(idx, kernel, *m, *mass))),
                None => execute(&point, None),
            };
            SweepRow {
                kernel: kernel.clone(),
                m: *m,
                mass: *mass,
                result: outcome.as_ref().map(SweepSummary::from_outcome).map_err(|e| {
                    warn!("{e}");
                    e.to_string()
                }),
            }
        })
        .collect();
    Ok(SweepResult { rows })
}

/// Reads a field CSV and analyses it as a stationary state of the named
/// kernel with exponent `m` and `ε = 1`.
pub fn analyze_file(path: &Path, kernel: &str, m: f64) -> Result<StationaryReport> {
    let field = crate::grid::read_csv(path)?;
    let k = crate::kernels::builtin_kernel(kernel)
        .ok_or_else(|| Error::config("kernel", format!("unknown kernel {kernel:?}")))?
        .with_dimension(field.dims());
    let stencil = crate::convolution::default_stencil(&k, field.dx(), field.dims())?;
    let params = crate::integrator::SimParams::new(m, field.dx());
    params.validate()?;
    Ok(analyze(&field, &stencil, &k, &params, true, 0.0))
}
