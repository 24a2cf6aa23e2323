//! Verdicts on converged fields: per-component radial monotonicity, the
//! component gap bound, the mass-independent density bound ρ_s* and the
//! plateau estimate ρ_E.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::convolution::KernelStencil;
use crate::energy::{component_interior, euler_lagrange_field, flatness, lagrange_constant, FlatnessStats};
use crate::error::{Error, Result};
use crate::grid::{component_gap, default_support_components, Field, SupportComponents};
use crate::integrator::SimParams;
use crate::kernels::{Kernel, KernelKind};

/// Allowed rise of bin-averaged density with radius, as a fraction of the maximum.
pub const MONOTONICITY_TOL: f64 = 0.01;
/// Allowed deviation from the fitted radial profile, as a fraction of the maximum.
pub const SYMMETRY_TOL: f64 = 0.05;
/// Relative slack on `max ρ ≤ ρ_s*`.
pub const BOUND_SLACK: f64 = 1e-6;

/// `ρ_s* = ((m-1)/(mε)·‖W‖₁)^{1/(m-2)}`.
pub fn rho_star(p: &SimParams, l1: f64) -> Result<f64> {
    if p.m <= 2.0 {
        return Err(Error::Domain(format!("density bound needs m > 2, got m = {}", p.m)));
    }
    if !(l1 > 0.0) {
        return Err(Error::Domain(format!("kernel norm must be positive, got {l1}")));
    }
    Ok(((p.m - 1.0) / (p.m * p.epsilon) * l1).powf(1.0 / (p.m - 2.0)))
}

/// Plateau estimate `ρ_E = (‖W‖₁/(2ε))^{1/(m-2)}`.
pub fn rho_plateau(p: &SimParams, l1: f64) -> Result<f64> {
    if p.m <= 2.0 {
        return Err(Error::Domain(format!("plateau estimate needs m > 2, got m = {}", p.m)));
    }
    if !(l1 > 0.0) {
        return Err(Error::Domain(format!("kernel norm must be positive, got {l1}")));
    }
    Ok((l1 / (2.0 * p.epsilon)).powf(1.0 / (p.m - 2.0)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityVerdict {
    /// Density-weighted centre x₀.
    pub center: Vec<f64>,
    /// Largest rise between consecutive radial bins, relative to the maximum.
    pub max_violation: f64,
    /// Largest deviation of a cell from the radial profile, relative to the maximum.
    pub max_spread: f64,
    pub passed: bool,
}

/// Unwrapped lattice offsets (in cells) of every component cell relative to
/// `reference`, found by walking lattice adjacency so components wider than
/// half the domain stay contiguous.
fn unwrapped_offsets(f: &Field, component: &[usize], reference: usize) -> Vec<[f64; 2]> {
    const STEPS: [[f64; 2]; 4] = [[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]];
    let mut offset: Vec<Option<[f64; 2]>> = vec![None; component.len()];
    let slot = |idx: usize| component.binary_search(&idx).ok();
    let start = slot(reference).expect("reference lies in the component");
    offset[start] = Some([0.0, 0.0]);
    let mut queue = VecDeque::from([reference]);
    while let Some(cell) = queue.pop_front() {
        let here = offset[slot(cell).unwrap()].unwrap();
        for (nb, step) in f.neighbors(cell).into_iter().zip(STEPS) {
            if let Some(k) = slot(nb) {
                if offset[k].is_none() {
                    offset[k] = Some([here[0] + step[0], here[1] + step[1]]);
                    queue.push_back(nb);
                }
            }
        }
    }
    offset
        .into_iter()
        .map(|o| o.expect("component is lattice-connected"))
        .collect()
}

/// Checks that the density on one component is radially non-increasing about
/// its centre of mass, and radially symmetric up to [`SYMMETRY_TOL`].
///
/// `component` must be sorted and lattice-connected, as produced by
/// [`crate::grid::support_components`].
pub fn radial_monotonicity(f: &Field, component: &[usize]) -> MonotonicityVerdict {
    assert!(!component.is_empty(), "empty component");
    let data = f.data();
    let reference = *component
        .iter()
        .max_by(|&&a, &&b| data[a].total_cmp(&data[b]))
        .unwrap();
    let peak = data[reference];
    let offsets = unwrapped_offsets(f, component, reference);
    let weight: f64 = component.iter().map(|&c| data[c]).sum();
    let mut com = [0.0; 2];
    for (o, &c) in offsets.iter().zip(component) {
        com[0] += o[0] * data[c] / weight;
        com[1] += o[1] * data[c] / weight;
    }
    let base = f.center(reference);
    let lengths = f.lengths();
    let center: Vec<f64> = base
        .iter()
        .enumerate()
        .map(|(a, x)| {
            let low = f.origin()[a] - 0.5 * f.dx();
            low + (x + com[a] * f.dx() - low).rem_euclid(lengths[a])
        })
        .collect();

    let radii: Vec<f64> = offsets
        .iter()
        .map(|o| f.dx() * ((o[0] - com[0]).powi(2) + (o[1] - com[1]).powi(2)).sqrt())
        .collect();
    let bin = |r: f64| (r / f.dx() + 0.5) as usize;
    let nbins = radii.iter().map(|&r| bin(r)).max().unwrap() + 1;
    let mut sum_r = vec![0.0; nbins];
    let mut sum_v = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    for (&r, &c) in radii.iter().zip(component) {
        let b = bin(r);
        sum_r[b] += r;
        sum_v[b] += data[c];
        count[b] += 1;
    }
    let profile: Vec<(f64, f64)> = (0..nbins)
        .filter(|&b| count[b] > 0)
        .map(|b| (sum_r[b] / count[b] as f64, sum_v[b] / count[b] as f64))
        .collect();

    let scale = if peak > 0.0 { peak } else { 1.0 };
    let max_violation = profile
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / scale)
        .fold(0.0f64, f64::max);

    let interpolate = |r: f64| -> f64 {
        if r <= profile[0].0 {
            return profile[0].1;
        }
        for w in profile.windows(2) {
            if r <= w[1].0 {
                let t = (r - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        profile.last().unwrap().1
    };
    let max_spread = radii
        .iter()
        .zip(component)
        .map(|(&r, &c)| (data[c] - interpolate(r)).abs() / scale)
        .fold(0.0f64, f64::max);

    MonotonicityVerdict {
        center,
        max_violation,
        max_spread,
        passed: max_violation <= MONOTONICITY_TOL && max_spread <= SYMMETRY_TOL,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GapVerdict {
    /// Unbounded kernel, or fewer than two components.
    NotApplicable(String),
    Pass { min_gap: f64, required: f64 },
    Fail { min_gap: f64, required: f64 },
}

impl GapVerdict {
    pub fn min_gap(&self) -> Option<f64> {
        match self {
            GapVerdict::NotApplicable(_) => None,
            GapVerdict::Pass { min_gap, .. } | GapVerdict::Fail { min_gap, .. } => Some(*min_gap),
        }
    }

    pub fn failed(&self) -> bool {
        matches!(self, GapVerdict::Fail { .. })
    }
}

/// Smallest pairwise component distance.
pub fn min_component_gap(f: &Field, comps: &SupportComponents) -> Option<f64> {
    let c = &comps.components;
    let mut best: Option<f64> = None;
    for a in 0..c.len() {
        for b in a + 1..c.len() {
            let g = component_gap(&c[a], &c[b], f).expect("distinct components");
            best = Some(best.map_or(g, |x: f64| x.min(g)));
        }
    }
    best
}

/// Components must be at least `support_radius - dx` apart.
pub fn gap_check(f: &Field, comps: &SupportComponents, k: &Kernel) -> GapVerdict {
    if k.kind() != KernelKind::Compact {
        return GapVerdict::NotApplicable("kernel has unbounded support".into());
    }
    let Some(min_gap) = min_component_gap(f, comps) else {
        return GapVerdict::NotApplicable("fewer than two components".into());
    };
    let required = k.support_radius() - f.dx();
    if min_gap >= required - 1e-12 {
        GapVerdict::Pass { min_gap, required }
    } else {
        GapVerdict::Fail { min_gap, required }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundVerdict {
    pub passed: bool,
    pub max_density: f64,
    pub rho_star: f64,
    /// `max ρ / ρ_E`.
    pub plateau_ratio: f64,
}

/// `max ρ ≤ ρ_s*·(1 + 1e-6)`.
pub fn bound_check(max_density: f64, rho_star: f64, rho_e: f64) -> BoundVerdict {
    BoundVerdict {
        passed: max_density <= rho_star * (1.0 + BOUND_SLACK),
        max_density,
        rho_star,
        plateau_ratio: max_density / rho_e,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentRecord {
    pub center: Vec<f64>,
    pub max_density: f64,
    pub mass: f64,
    /// Length (1D) or area (2D) of the component's cells.
    pub support_measure: f64,
    pub monotonicity: MonotonicityVerdict,
    /// Λ statistics over the component interior (absent when it has no interior).
    pub lambda: Option<FlatnessStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationaryReport {
    pub converged: bool,
    pub final_residual: f64,
    pub m: f64,
    pub threshold: f64,
    pub components: Vec<ComponentRecord>,
    pub gap: GapVerdict,
    pub min_gap: Option<f64>,
    /// Discrete ‖W‖₁ the bounds were computed with.
    pub l1_norm: f64,
    pub rho_star: Option<f64>,
    pub rho_e: Option<f64>,
    pub bound: Option<BoundVerdict>,
    pub max_density: f64,
    /// `D = 2E/M + (m-2)ε/(M(m-1))‖ρ‖ₘᵐ`.
    pub lagrange_constant: f64,
}

impl StationaryReport {
    /// Density bound (m > 2) and gap bound (compact kernels, m > 2).
    pub fn hard_assertions_pass(&self) -> bool {
        let bound_ok = self.bound.map_or(true, |b| b.passed);
        let gap_ok = self.m <= 2.0 || !self.gap.failed();
        bound_ok && gap_ok
    }

    pub fn all_monotone(&self) -> bool {
        self.components.iter().all(|c| c.monotonicity.passed)
    }

    /// Largest interior `std(Λ)/|mean Λ|` over components.
    pub fn max_lambda_deviation(&self) -> Option<f64> {
        self.components
            .iter()
            .filter_map(|c| c.lambda.map(|l| l.relative_deviation()))
            .reduce(f64::max)
    }

    pub const CSV_HEADER: &'static str = "converged,final_residual,m,components,max_density,l1_norm,rho_star,rho_E,min_gap,gap_pass,bound_pass,monotone_pass,max_lambda_dev,lagrange_constant";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let gap_pass = match &self.gap {
            GapVerdict::NotApplicable(_) => String::new(),
            g => (!g.failed()).to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.converged,
            self.final_residual,
            self.m,
            self.components.len(),
            self.max_density,
            self.l1_norm,
            opt(self.rho_star),
            opt(self.rho_e),
            opt(self.min_gap),
            gap_pass,
            self.bound.map(|b| b.passed.to_string()).unwrap_or_default(),
            self.all_monotone(),
            opt(self.max_lambda_deviation()),
            self.lagrange_constant,
        )
    }

    pub fn text_block(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "converged:        {} (residual {:.3e})", self.converged, self.final_residual);
        let _ = writeln!(s, "m:                {}", self.m);
        let _ = writeln!(s, "max density:      {:.6}", self.max_density);
        let _ = writeln!(s, "discrete |W|_1:   {:.6}", self.l1_norm);
        if let (Some(rs), Some(re)) = (self.rho_star, self.rho_e) {
            let _ = writeln!(s, "rho_s* bound:     {rs:.6}");
            let _ = writeln!(s, "rho_E plateau:    {re:.6}");
        }
        if let Some(b) = self.bound {
            let _ = writeln!(
                s,
                "bound check:      {} (max/rho_E = {:.4})",
                if b.passed { "pass" } else { "FAIL" },
                b.plateau_ratio
            );
        }
        match &self.gap {
            GapVerdict::NotApplicable(why) => {
                let _ = writeln!(s, "gap check:        n/a ({why})");
            }
            GapVerdict::Pass { min_gap, required } => {
                let _ = writeln!(s, "gap check:        pass (min gap {min_gap:.3} >= {required:.3})");
            }
            GapVerdict::Fail { min_gap, required } => {
                let _ = writeln!(s, "gap check:        FAIL (min gap {min_gap:.3} < {required:.3})");
            }
        }
        let _ = writeln!(s, "Lagrange const D: {:.6}", self.lagrange_constant);
        let _ = writeln!(s, "components:       {}", self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let center: Vec<String> = c.center.iter().map(|x| format!("{x:.3}")).collect();
            let _ = writeln!(
                s,
                "  [{i}] center ({}) max {:.5} mass {:.4} measure {:.3} monotone {} (rise {:.2e}, spread {:.2e}){}",
                center.join(", "),
                c.max_density,
                c.mass,
                c.support_measure,
                if c.monotonicity.passed { "yes" } else { "NO" },
                c.monotonicity.max_violation,
                c.monotonicity.max_spread,
                c.lambda
                    .map(|l| format!(" Lambda {:.5} +- {:.2e}", l.mean, l.std_dev))
                    .unwrap_or_default(),
            );
        }
        s
    }
}

/// Builds the full report for a (presumably converged) field.
pub fn analyze(
    f: &Field,
    s: &KernelStencil,
    k: &Kernel,
    p: &SimParams,
    converged: bool,
    final_residual: f64,
) -> StationaryReport {
    let comps = default_support_components(f);
    let lambda = euler_lagrange_field(f, s, p);
    let components: Vec<ComponentRecord> = comps
        .components
        .iter()
        .map(|cells| {
            let interior = component_interior(f, cells);
            ComponentRecord {
                center: radial_monotonicity(f, cells).center,
                max_density: cells.iter().map(|&c| f.data()[c]).fold(0.0, f64::max),
                mass: cells.iter().map(|&c| f.data()[c]).sum::<f64>() * f.cell_volume(),
                support_measure: cells.len() as f64 * f.cell_volume(),
                monotonicity: radial_monotonicity(f, cells),
                lambda: flatness(&lambda, &interior),
            }
        })
        .collect();
    let l1 = s.l1_norm();
    let (rs, re) = if p.m > 2.0 && l1 > 0.0 {
        (rho_star(p, l1).ok(), rho_plateau(p, l1).ok())
    } else {
        (None, None)
    };
    let max_density = components.iter().map(|c| c.max_density).fold(0.0, f64::max);
    let gap = gap_check(f, &comps, k);
    StationaryReport {
        converged,
        final_residual,
        m: p.m,
        threshold: comps.threshold,
        min_gap: min_component_gap(f, &comps),
        gap,
        components,
        l1_norm: l1,
        rho_star: rs,
        rho_e: re,
        bound: rs.zip(re).map(|(a, b)| bound_check(max_density, a, b)),
        max_density,
        lagrange_constant: lagrange_constant(f, s, p),
    }
}
