//! Lyapunov energy `E = S + I` and Euler–Lagrange diagnostics.

use crate::convolution::{convolve, KernelStencil};
use crate::grid::{lp_norm, total_mass, Field};
use crate::integrator::SimParams;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    /// `ε/(m-1) Σ ρᵐ dxᵈ`
    pub entropy: f64,
    /// `½ Σ ρ (W∗ρ) dxᵈ`
    pub interaction: f64,
    pub total: f64,
}

/// Discrete energy of `f`. Panics if the stencil does not fit the field.
pub fn energy(f: &Field, s: &KernelStencil, p: &SimParams) -> EnergyBreakdown {
    let vol = f.cell_volume();
    let m = p.m;
    let entropy = p.epsilon / (m - 1.0) * f.data().iter().map(|&r| r.max(0.0).powf(m)).sum::<f64>() * vol;
    let potential = convolve(s, f).expect("stencil must fit the field");
    let interaction = 0.5 * f.data().iter().zip(potential.data()).map(|(r, v)| r * v).sum::<f64>() * vol;
    EnergyBreakdown {
        entropy,
        interaction,
        total: entropy + interaction,
    }
}

/// `Λ(x) = mε/(m-1)·ρ^{m-1}(x) + (W∗ρ)(x)`.
pub fn euler_lagrange_field(f: &Field, s: &KernelStencil, p: &SimParams) -> Field {
    let m = p.m;
    let coeff = m * p.epsilon / (m - 1.0);
    let potential = convolve(s, f).expect("stencil must fit the field");
    let data = f
        .data()
        .iter()
        .zip(potential.data())
        .map(|(&r, &v)| coeff * r.max(0.0).powf(m - 1.0) + v)
        .collect();
    f.with_data(data)
}

/// `D = 2E/M + (m-2)ε/(M(m-1))·‖ρ‖ₘᵐ`, the mass-weighted mean of Λ.
pub fn lagrange_constant(f: &Field, s: &KernelStencil, p: &SimParams) -> f64 {
    let mass = total_mass(f);
    let e = energy(f, s, p).total;
    let m = p.m;
    2.0 * e / mass + (m - 2.0) * p.epsilon / (mass * (m - 1.0)) * lp_norm(f, m).powf(m)
}

/// Cells of a component whose lattice neighbours all lie in the component and
/// whose density exceeds 10% of the component maximum.
pub fn component_interior(f: &Field, component: &[usize]) -> Vec<usize> {
    let peak = component.iter().map(|&c| f.data()[c]).fold(0.0f64, f64::max);
    component
        .iter()
        .copied()
        .filter(|&c| f.data()[c] > 0.1 * peak)
        .filter(|&c| f.neighbors(c).iter().all(|nb| component.binary_search(nb).is_ok()))
        .collect()
}

/// Mean and standard deviation of Λ over a set of cells.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlatnessStats {
    pub mean: f64,
    pub std_dev: f64,
    pub cells: usize,
}

impl FlatnessStats {
    /// `std / |mean|`.
    pub fn relative_deviation(&self) -> f64 {
        self.std_dev / self.mean.abs()
    }
}

pub fn flatness(lambda: &Field, cells: &[usize]) -> Option<FlatnessStats> {
    if cells.is_empty() {
        return None;
    }
    let n = cells.len() as f64;
    let mean = cells.iter().map(|&c| lambda.data()[c]).sum::<f64>() / n;
    let var = cells.iter().map(|&c| (lambda.data()[c] - mean).powi(2)).sum::<f64>() / n;
    Some(FlatnessStats {
        mean,
        std_dev: var.sqrt(),
        cells: cells.len(),
    })
}
