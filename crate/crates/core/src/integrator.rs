//! Implicit–explicit time stepping for `∂ₜρ = εΔρᵐ + ∇·(ρ∇(W∗ρ))`.
//!
//! Finite-volume scheme in gradient-flow form: the face velocity is
//! `u = -∇ξ` with `ξ = mε/(m-1)·ρ^{m-1} + W∗ρ` and fluxes are upwinded by
//! its sign. The interaction potential is explicit; pressure and upwind
//! densities are backward Euler, solved by Newton's method on periodic
//! tridiagonal systems. In 2D the implicit part is split by direction: an x
//! sweep over every row followed by a y sweep over every column.

use rayon::prelude::*;

use crate::convolution::{convolve, face_velocity, KernelStencil};
use crate::energy::energy;
use crate::error::{Error, Result};
use crate::grid::{total_mass, Field, NEGATIVE_SLACK};
use crate::tridiag::solve_cyclic;

/// Lower cutoff on ρ inside the pressure slope `(m-1)ρ^{m-2}`, which is
/// singular at zero for `m < 2`.
const SLOPE_FLOOR: f64 = 1e-12;

/// Backtracking halvings allowed per Newton iteration.
const MAX_BACKTRACK: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct SimParams {
    /// Diffusion exponent, `m > 1`.
    pub m: f64,
    pub epsilon: f64,
    /// Requested time step; reduced per step by the velocity guard.
    pub dt: f64,
    /// Sup-norm tolerance on the Newton residual.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Stationarity threshold on `sup |ρⁿ⁺¹ - ρⁿ| / dt`.
    pub steady_tol: f64,
    pub max_steps: usize,
    /// Largest fraction of a cell the interaction velocity may cross per step.
    pub cfl_safety: f64,
}

impl SimParams {
    /// Defaults: `ε = 1`, `dt = dx`.
    pub fn new(m: f64, dx: f64) -> SimParams {
        SimParams {
            m,
            epsilon: 1.0,
            dt: dx,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            steady_tol: 1e-7,
            max_steps: 1_000_000,
            cfl_safety: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(Error::Domain(what.to_string())) };
        check(self.m > 1.0, "m must exceed 1")?;
        check(self.epsilon > 0.0, "epsilon must be positive")?;
        check(self.dt > 0.0, "dt must be positive")?;
        check(self.newton_tol > 0.0, "newton_tol must be positive")?;
        check(self.newton_max_iter > 0, "newton_max_iter must be positive")?;
        check(self.steady_tol > 0.0, "steady_tol must be positive")?;
        check(self.max_steps > 0, "max_steps must be positive")?;
        check(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0, "cfl_safety must lie in (0, 1]")
    }

    /// `mε/(m-1)`, the coefficient of the pressure `ρ^{m-1}`.
    fn pressure_coefficient(&self) -> f64 {
        self.m * self.epsilon / (self.m - 1.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// Post-step mass minus pre-step mass.
    pub mass_drift: f64,
    /// Minimum value before clipping.
    pub min_value: f64,
    /// Newton iterations (maximum over lines in 2D).
    pub newton_iters: usize,
    /// Energy after the step.
    pub energy: f64,
    pub dt_used: f64,
    /// Residual reduction factor of the last Newton iteration that did work
    /// (`prev / final`), `None` when no iteration ran.
    pub final_contraction: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
struct LineSolve {
    iters: usize,
    contraction: Option<f64>,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// One periodic line of the implicit finite-volume system
/// `ρ_i - ρⁿ_i + λ(F_{i+1/2} - F_{i-1/2}) = 0` with upwind flux
/// `F = u⁺ρ_i + u⁻ρ_{i+1}` and `u = -(ξ_{i+1} - ξ_i)/dx`,
/// `ξ = c·max(ρ,0)^{m-1} + V` where `V` is frozen at the old level.
struct Line<'a> {
    old: &'a [f64],
    potential: &'a [f64],
    lambda: f64,
    dx: f64,
    c: f64,
    m: f64,
}

impl Line<'_> {
    fn xi(&self, rho: &[f64], i: usize) -> f64 {
        self.c * rho[i].max(0.0).powf(self.m - 1.0) + self.potential[i]
    }

    /// Face velocities `u_{i+1/2}` into `u`.
    fn velocities(&self, rho: &[f64], u: &mut [f64]) {
        let n = rho.len();
        let mut here = self.xi(rho, 0);
        let first = here;
        for i in 0..n {
            let next = if i + 1 == n { first } else { self.xi(rho, i + 1) };
            u[i] = -(next - here) / self.dx;
            here = next;
        }
    }

    fn flux(u: f64, left: f64, right: f64) -> f64 {
        if u > 0.0 {
            u * left
        } else if u < 0.0 {
            u * right
        } else {
            0.0
        }
    }

    fn residual(&self, rho: &[f64], u: &mut [f64], out: &mut [f64]) {
        let n = rho.len();
        self.velocities(rho, u);
        let mut prev = Self::flux(u[n - 1], rho[n - 1], rho[0]);
        for i in 0..n {
            let f = Self::flux(u[i], rho[i], rho[(i + 1) % n]);
            out[i] = rho[i] - self.old[i] + self.lambda * (f - prev);
            prev = f;
        }
    }
}

/// Newton solve of one periodic line in place; `rho` holds the initial guess.
fn solve_line(rho: &mut [f64], line: &Line<'_>, p: &SimParams) -> Result<LineSolve> {
    let n = rho.len();
    let mut u = vec![0.0; n];
    let mut res = vec![0.0; n];
    line.residual(rho, &mut u, &mut res);
    let mut norm = sup_norm(&res);
    let mut out = LineSolve::default();
    let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut slope = vec![0.0; n];
    let mut d_left = vec![0.0; n];
    let mut d_right = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_u = vec![0.0; n];
    let mut trial_res = vec![0.0; n];
    let scale = line.c / line.dx;
    while norm > p.newton_tol {
        if out.iters >= p.newton_max_iter {
            return Err(Error::StepFailure {
                residual: norm,
                iterations: out.iters,
            });
        }
        for (s, &r) in slope.iter_mut().zip(rho.iter()) {
            *s = scale * (p.m - 1.0) * r.max(SLOPE_FLOOR).powf(p.m - 2.0);
        }
        // ∂F_{i+1/2}/∂ρ_i and ∂F_{i+1/2}/∂ρ_{i+1}
        for i in 0..n {
            let r = (i + 1) % n;
            let (ui, upwind) = if u[i] > 0.0 {
                (u[i], rho[i])
            } else if u[i] < 0.0 {
                (u[i], rho[r])
            } else {
                (0.0, 0.5 * (rho[i] + rho[r]))
            };
            let upwind = upwind.max(0.0);
            d_left[i] = ui.max(0.0) + upwind * slope[i];
            d_right[i] = ui.min(0.0) - upwind * slope[r];
        }
        for i in 0..n {
            let l = (i + n - 1) % n;
            diag[i] = 1.0 + line.lambda * (d_left[i] - d_right[l]);
            sup[i] = line.lambda * d_right[i];
            sub[i] = -line.lambda * d_left[l];
        }
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let delta = solve_cyclic(&sub, &diag, &sup, &neg);

        let mut step = 1.0;
        let mut trial_norm;
        let mut halvings = 0;
        loop {
            for i in 0..n {
                trial[i] = rho[i] + step * delta[i];
            }
            line.residual(&trial, &mut trial_u, &mut trial_res);
            trial_norm = sup_norm(&trial_res);
            if trial_norm < norm || halvings >= MAX_BACKTRACK || !trial_norm.is_finite() {
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
        if !trial_norm.is_finite() {
            return Err(Error::StepFailure {
                residual: trial_norm,
                iterations: out.iters,
            });
        }
        rho.copy_from_slice(&trial);
        res.copy_from_slice(&trial_res);
        u.copy_from_slice(&trial_u);
        out.iters += 1;
        out.contraction = Some(if trial_norm > 0.0 { norm / trial_norm } else { f64::INFINITY });
        norm = trial_norm;
    }
    Ok(out)
}

/// Implicit solve in place: one direction in 1D, an x sweep over every row
/// followed by a y sweep over every column in 2D.
fn implicit_update(rho: &mut Field, potential: &Field, dt: f64, p: &SimParams) -> Result<LineSolve> {
    let dx = rho.dx();
    let lambda = dt / dx;
    let c = p.pressure_coefficient();
    let n1 = rho.shape()[0];
    let m = p.m;
    fn make<'a>(old: &'a [f64], potential: &'a [f64], lambda: f64, dx: f64, c: f64, m: f64) -> Line<'a> {
        Line {
            old,
            potential,
            lambda,
            dx,
            c,
            m,
        }
    }
    if rho.dims() == 1 {
        let old = rho.data().to_vec();
        return solve_line(rho.data_mut(), &make(&old, potential.data(), lambda, dx, c, m), p);
    }
    let n2 = rho.shape()[1];
    let merge = |acc: LineSolve, s: LineSolve| if s.iters >= acc.iters { s } else { acc };

    // x sweep: rows are contiguous
    let pot = potential.data();
    let rows: Vec<Result<LineSolve>> = rho
        .data_mut()
        .par_chunks_mut(n1)
        .zip(pot.par_chunks(n1))
        .map(|(row, v)| {
            let old = row.to_vec();
            solve_line(row, &make(&old, v, lambda, dx, c, m), p)
        })
        .collect();
    let mut worst = LineSolve::default();
    for r in rows {
        worst = merge(worst, r?);
    }

    // y sweep on gathered columns
    let data = rho.data().to_vec();
    let cols: Vec<Result<(Vec<f64>, LineSolve)>> = (0..n1)
        .into_par_iter()
        .map(|i| {
            let old: Vec<f64> = (0..n2).map(|j| data[j * n1 + i]).collect();
            let v: Vec<f64> = (0..n2).map(|j| pot[j * n1 + i]).collect();
            let mut col = old.clone();
            solve_line(&mut col, &make(&old, &v, lambda, dx, c, m), p).map(|s| (col, s))
        })
        .collect();
    let out = rho.data_mut();
    for (i, c) in cols.into_iter().enumerate() {
        let (col, solve) = c?;
        worst = merge(worst, solve);
        for (j, v) in col.into_iter().enumerate() {
            out[j * n1 + i] = v;
        }
    }
    Ok(worst)
}

/// `p.dt`, reduced so the interaction velocity crosses at most `cfl_safety`
/// of a cell per step.
fn guarded_dt(potential: &Field, p: &SimParams) -> f64 {
    let dx = potential.dx();
    let max_u = (0..potential.dims())
        .map(|axis| face_velocity(potential, axis).data().iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0f64, f64::max);
    if max_u * p.dt / dx > p.cfl_safety {
        p.cfl_safety * dx / max_u
    } else {
        p.dt
    }
}

/// One IMEX step: interaction potential from the old density, pressure and
/// upwind densities implicit.
pub fn step(f: &Field, s: &KernelStencil, p: &SimParams) -> Result<(Field, StepReport)> {
    f.check_density()?;
    s.check_fits(f)?;
    let mass_before = total_mass(f);

    let potential = convolve(s, f)?;
    let dt = guarded_dt(&potential, p);

    let mut next = f.clone();
    let solve = implicit_update(&mut next, &potential, dt, p)?;

    let min_value = next.min();
    for (cell, v) in next.data_mut().iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -NEGATIVE_SLACK {
                return Err(Error::PositivityViolation { min: *v, cell });
            }
            *v = 0.0;
        }
    }
    let report = StepReport {
        mass_drift: total_mass(&next) - mass_before,
        min_value,
        newton_iters: solve.iters,
        energy: energy(&next, s, p).total,
        dt_used: dt,
        final_contraction: solve.contraction,
    };
    Ok((next, report))
}

/// One row of the trajectory summary.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub max_density: f64,
    pub energy: f64,
    pub newton_iters: usize,
}

/// Running checks of the per-step structural invariants.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantStats {
    pub steps: usize,
    /// Largest `|mass drift| / mass` over all steps.
    pub max_relative_mass_drift: f64,
    /// Smallest pre-clip value seen.
    pub min_preclip: f64,
    /// Largest `(Eⁿ⁺¹ - Eⁿ)/|Eⁿ|` seen (positive means an increase).
    pub max_relative_energy_increase: f64,
    pub max_newton_iters: usize,
}

impl InvariantStats {
    fn record(&mut self, mass: f64, prev_energy: f64, r: &StepReport) {
        self.steps += 1;
        if mass > 0.0 {
            self.max_relative_mass_drift = self.max_relative_mass_drift.max(r.mass_drift.abs() / mass);
        }
        self.min_preclip = self.min_preclip.min(r.min_value);
        let scale = prev_energy.abs().max(f64::MIN_POSITIVE);
        self.max_relative_energy_increase = self.max_relative_energy_increase.max((r.energy - prev_energy) / scale);
        self.max_newton_iters = self.max_newton_iters.max(r.newton_iters);
    }

    pub fn merge(&mut self, other: &InvariantStats) {
        self.steps += other.steps;
        self.max_relative_mass_drift = self.max_relative_mass_drift.max(other.max_relative_mass_drift);
        self.min_preclip = self.min_preclip.min(other.min_preclip);
        self.max_relative_energy_increase = self.max_relative_energy_increase.max(other.max_relative_energy_increase);
        self.max_newton_iters = self.max_newton_iters.max(other.max_newton_iters);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub converged: bool,
    pub steps: usize,
    pub time: f64,
    /// Last value of `sup |ρⁿ⁺¹ - ρⁿ| / dt`.
    pub final_residual: f64,
    pub invariants: InvariantStats,
}

impl Trajectory {
    pub const CSV_HEADER: &'static str = "step,time,mass,max_density,energy,newton_iters";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.step, r.time, r.mass, r.max_density, r.energy, r.newton_iters
            ));
        }
        s
    }
}

/// Observer hooks for [`run_to_stationary_with`].
pub struct RunOptions<'a> {
    /// Keep one trajectory row every this many steps (the last step is always kept).
    pub trace_every: usize,
    /// Called with `(step, field)` every `snapshot_every` steps when non-zero.
    pub snapshot_every: usize,
    pub on_snapshot: Option<&'a mut dyn FnMut(usize, &Field) -> Result<()>>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        RunOptions {
            trace_every: 1,
            snapshot_every: 0,
            on_snapshot: None,
        }
    }
}

/// Steps until `sup |ρⁿ⁺¹ - ρⁿ| / dt < steady_tol` or `max_steps`.
pub fn run_to_stationary(f0: &Field, s: &KernelStencil, p: &SimParams) -> Result<(Field, Trajectory)> {
    run_to_stationary_with(f0, s, p, RunOptions::default())
}

pub fn run_to_stationary_with(
    f0: &Field,
    s: &KernelStencil,
    p: &SimParams,
    mut opts: RunOptions<'_>,
) -> Result<(Field, Trajectory)> {
    p.validate()?;
    let mass = total_mass(f0);
    if !(mass > 0.0) {
        return Err(Error::Domain("initial mass must be positive".into()));
    }
    let trace_every = opts.trace_every.max(1);
    let mut field = f0.clone();
    let mut e = energy(&field, s, p).total;
    let mut rows = vec![TrajectoryRow {
        step: 0,
        time: 0.0,
        mass,
        max_density: field.max(),
        energy: e,
        newton_iters: 0,
    }];
    let mut stats = InvariantStats::default();
    let mut time = 0.0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut steps = 0;
    while steps < p.max_steps {
        let (next, report) = step(&field, s, p)?;
        steps += 1;
        time += report.dt_used;
        stats.record(mass, e, &report);
        e = report.energy;
        residual = next
            .data()
            .iter()
            .zip(field.data())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
            / report.dt_used;
        field = next;
        converged = residual < p.steady_tol;
        if steps % trace_every == 0 || converged || steps == p.max_steps {
            rows.push(TrajectoryRow {
                step: steps,
                time,
                mass: total_mass(&field),
                max_density: field.max(),
                energy: e,
                newton_iters: report.newton_iters,
            });
        }
        if opts.snapshot_every > 0 && steps % opts.snapshot_every == 0 {
            if let Some(cb) = opts.on_snapshot.as_mut() {
                cb(steps, &field)?;
            }
        }
        if converged {
            break;
        }
    }
    Ok((
        field,
        Trajectory {
            rows,
            converged,
            steps,
            time,
            final_residual: residual,
            invariants: stats,
        },
    ))
}
