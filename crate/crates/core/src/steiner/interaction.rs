//! Interaction energy of symmetrized indicator densities and its one-sided
//! derivative.
//!
//! Every double integral over a pair of intervals is reduced to one
//! dimension: `∫∫ K(x − y) dy dx = ∫ K(z) ℓ(z) dz`, where `ℓ(z)` is the
//! length of `{x ∈ I₁ : x − z ∈ I₂}`, a trapezoid in `z`.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quadrature::integrate_with_breaks;

use super::{sgn, symmetrize_function, symmetrize_union, IntervalUnion, Kernel1D, LayerFunction, Speed};

/// Relative tolerance of interaction-energy quadrature.
pub const ENERGY_QUAD_TOL: f64 = 1e-9;

/// Relative agreement required between the closed-form derivative and the
/// extrapolated difference quotient.
pub const FD_AGREEMENT_TOL: f64 = 1e-6;

/// Quadrature tolerance for the energies entering difference quotients.
const FD_QUAD_TOL: f64 = 1e-13;

/// Magnitude below which derivatives are not compared relatively: the
/// integrands producing them are subnormal.
pub const RESOLVABLE: f64 = 1e-280;

/// Largest difference step, relative to the kernel range.
const FD_STEP: f64 = 1e-4;

/// Step reductions tried before settling on the most consistent estimate.
const FD_REFINEMENTS: usize = 5;

/// Relative change between consecutive extrapolations treated as settled.
const FD_SETTLED: f64 = 1e-9;

/// Allowed relative increase between consecutive energies of a symmetrization
/// series.
const SERIES_TOL: f64 = 1e-9;

fn overlap_length(z: f64, x: (f64, f64), y: (f64, f64)) -> f64 {
    (x.1.min(y.1 + z) - x.0.max(y.0 + z)).max(0.0)
}

/// `∫_{x.0}^{x.1} ∫_{y.0}^{y.1} k(x − y) dy dx` for `k` vanishing beyond `reach`.
fn pair_integral<F: Fn(f64) -> f64>(k: F, reach: f64, x: (f64, f64), y: (f64, f64), rel_tol: f64) -> f64 {
    let lo = (x.0 - y.1).max(-reach);
    let hi = (x.1 - y.0).min(reach);
    if lo >= hi {
        return 0.0;
    }
    let breaks = [x.0 - y.1, x.0 - y.0, x.1 - y.1, x.1 - y.0, 0.0, -reach, reach];
    integrate_with_breaks(|z| k(z) * overlap_length(z, x, y), lo, hi, &breaks, rel_tol, f64::MIN_POSITIVE)
}

fn union_pair_sum<F: Fn(f64) -> f64 + Copy>(k: F, reach: f64, u1: &IntervalUnion, u2: &IntervalUnion, tol: f64) -> f64 {
    let (s1, s2) = (u1.spans(), u2.spans());
    s1.iter()
        .flat_map(|&x| s2.iter().map(move |&y| (x, y)))
        .map(|(x, y)| pair_integral(k, reach, x, y, tol))
        .sum()
}

fn energy_with_tol(u1: &IntervalUnion, u2: &IntervalUnion, k: &Kernel1D, tau: f64, tol: f64) -> Result<f64> {
    let (a, b) = (symmetrize_union(u1, tau)?, symmetrize_union(u2, tau)?);
    Ok(union_pair_sum(|z| k.value(z), k.radius(), &a, &b, tol))
}

/// `I(τ) = ∫∫ χ_{M^τ U₁}(α) χ_{M^τ U₂}(β) K(α − β) dα dβ`.
pub fn interaction_energy(u1: &IntervalUnion, u2: &IntervalUnion, k: &Kernel1D, tau: f64) -> Result<f64> {
    energy_with_tol(u1, u2, k, tau, ENERGY_QUAD_TOL)
}

/// The one-sided derivative `d⁺I/dτ` computed two ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeCheck {
    /// `Σ (sgn c₂ⱼ − sgn c₁ᵢ) ∫∫_Q K′(x − y)` over interval pairs at time τ.
    pub formula: f64,
    /// Forward difference quotients extrapolated to zero step.
    pub finite_difference: f64,
    /// `Σ 2∫∫_Q |K′(x − y)|`, the natural size of the derivative.
    pub scale: f64,
}

impl DerivativeCheck {
    /// `|formula − fd| / max(|formula|, |fd|, scale)`. Values whose size is
    /// below [`RESOLVABLE`] are too close to underflow to carry relative
    /// precision and compare as equal.
    pub fn relative_gap(&self) -> f64 {
        let d = (self.formula - self.finite_difference).abs();
        let denom = self.formula.abs().max(self.finite_difference.abs()).max(self.scale);
        if denom < RESOLVABLE {
            0.0
        } else {
            d / denom
        }
    }

    pub fn agrees(&self) -> bool {
        self.relative_gap() <= FD_AGREEMENT_TOL
    }
}

/// `d⁺I/dτ` at `τ`, valid strictly before the first event (an interval
/// reaching the anchor or two intervals of one union meeting) of either
/// union. At or past that event the derivative may jump and an
/// event-boundary error is returned.
pub fn interaction_derivative(
    u1: &IntervalUnion,
    u2: &IntervalUnion,
    k: &Kernel1D,
    tau: f64,
) -> Result<DerivativeCheck> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidInput(format!("tau must be nonnegative, got {tau}")));
    }
    let event = [u1.next_event(), u2.next_event()]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    if tau >= event {
        return Err(Error::EventBoundary { tau, event });
    }
    let (a, b) = (symmetrize_union(u1, tau)?, symmetrize_union(u2, tau)?);
    let reach = k.radius();
    let mut formula = 0.0;
    let mut scale = 0.0;
    for (i1, x) in a.intervals().iter().zip(a.spans()) {
        for (i2, y) in b.intervals().iter().zip(b.spans()) {
            let weight = sgn(i2.c) - sgn(i1.c);
            if weight != 0.0 {
                formula += weight * pair_integral(|z| k.slope(z), reach, x, y, FD_QUAD_TOL);
            }
            scale += 2.0 * pair_integral(|z| k.slope(z).abs(), reach, x, y, FD_QUAD_TOL);
        }
    }
    let horizon = kink_horizon(&a, &b, reach);
    let h0 = (FD_STEP * reach).min(0.5 * (event - tau)).min(0.5 * horizon);
    let base = energy_with_tol(u1, u2, k, tau, FD_QUAD_TOL)?;
    let quotient = |h: f64| -> Result<f64> { Ok((energy_with_tol(u1, u2, k, tau + h, FD_QUAD_TOL)? - base) / h) };
    Ok(DerivativeCheck {
        formula,
        finite_difference: extrapolated_slope(quotient, h0)?,
        scale,
    })
}

/// Time until a breakpoint of some overlap profile `ℓ` crosses a point where
/// `K` may fail to be smooth (`0`, `±R`); `I(τ)` is smooth before it.
fn kink_horizon(a: &IntervalUnion, b: &IntervalUnion, reach: f64) -> f64 {
    let mut horizon = f64::INFINITY;
    for (i1, x) in a.intervals().iter().zip(a.spans()) {
        for (i2, y) in b.intervals().iter().zip(b.spans()) {
            let drift = sgn(i2.c) - sgn(i1.c);
            if drift == 0.0 {
                continue;
            }
            for p in [x.0 - y.1, x.0 - y.0, x.1 - y.1, x.1 - y.0] {
                for q in [-reach, 0.0, reach] {
                    let t = (q - p) / drift;
                    if t > 0.0 {
                        horizon = horizon.min(t);
                    }
                }
            }
        }
    }
    horizon
}

/// Forward difference quotients `D(h) = I′ + a₁h + a₂h² + …` with two
/// Richardson levels, `R(h) = (8D(h/4) − 6D(h/2) + D(h))/3`. The step is
/// reduced by factors of 8 until two consecutive extrapolations agree; the
/// pair with the smallest disagreement supplies the result.
fn extrapolated_slope<Q: Fn(f64) -> Result<f64>>(quotient: Q, h0: f64) -> Result<f64> {
    let extrapolate = |h: f64| -> Result<f64> {
        let (d0, d1, d2) = (quotient(h)?, quotient(0.5 * h)?, quotient(0.25 * h)?);
        Ok((8.0 * d2 - 6.0 * d1 + d0) / 3.0)
    };
    let mut h = h0;
    let mut prev = extrapolate(h)?;
    let mut best = (f64::INFINITY, prev);
    for _ in 0..FD_REFINEMENTS {
        h /= 8.0;
        let next = extrapolate(h)?;
        let diff = (next - prev).abs();
        if diff < best.0 {
            best = (diff, next);
        }
        if diff <= FD_SETTLED * next.abs() {
            break;
        }
        prev = next;
    }
    Ok(best.1)
}

/// `φ = min{−|r₁ − r₂| + |c₂ − c₁| + R, −|c₂ − c₁| + r₁ + r₂ + R, R}`.
pub fn phi(c1: f64, r1: f64, c2: f64, r2: f64, radius: f64) -> f64 {
    let dc = (c2 - c1).abs();
    (-(r1 - r2).abs() + dc + radius)
        .min(-dc + r1 + r2 + radius)
        .min(radius)
}

/// Opposite centre signs together with `|c₂ − c₁| < r₁ + r₂ + R` and
/// `|r₂ − r₁| < |c₂ − c₁| + R`.
pub fn lemma_conditions(c1: f64, r1: f64, c2: f64, r2: f64, radius: f64) -> bool {
    let dc = (c2 - c1).abs();
    sgn(c1) != sgn(c2) && dc < r1 + r2 + radius && (r2 - r1).abs() < dc + radius
}

/// `(1/6)·φ·min_{r ∈ [R/(3√2), R/√2]} K′(r)`, the stated lower bound on
/// `d⁺I/dτ(0)` for single intervals satisfying [`lemma_conditions`].
pub fn lemma_bound(c1: f64, r1: f64, c2: f64, r2: f64, k: &Kernel1D) -> f64 {
    let radius = k.radius();
    let slope = k.min_slope(radius / (3.0 * SQRT_2), radius / SQRT_2);
    phi(c1, r1, c2, r2, radius) * slope / 6.0
}

/// `Σₖ Σₗ Δhₖ Δhₗ ∫∫ χ_{Uₖ}(x) χ_{Vₗ}(y) k(x − y)` for `k` vanishing beyond `reach`.
pub fn layer_interaction<F: Fn(f64) -> f64 + Copy>(f: &LayerFunction, g: &LayerFunction, k: F, reach: f64) -> f64 {
    let (df, dg) = (f.thicknesses(), g.thicknesses());
    let mut total = 0.0;
    for (a, (_, u)) in df.iter().zip(f.layers()) {
        for (b, (_, v)) in dg.iter().zip(g.layers()) {
            total += a * b * union_pair_sum(k, reach, u, v, ENERGY_QUAD_TOL);
        }
    }
    total
}

/// Interaction energy `½∫∫ W(x − y) S^τf(x) S^τf(y)` sampled along τ.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergySeries {
    pub points: Vec<(f64, f64)>,
    /// Largest increase between consecutive points, relative to the largest
    /// energy magnitude in the series.
    pub max_increase: f64,
}

impl EnergySeries {
    /// Non-increasing within the series tolerance.
    pub fn monotone(&self) -> bool {
        self.max_increase <= SERIES_TOL
    }
}

/// Interaction energy of `S^τ f` (optionally with a height-dependent speed)
/// for the one-dimensional kernel `W(z) = ω(|z|)` at `steps + 1` equally
/// spaced times in `[0, τ_max]`.
pub fn energy_decrease_demo(
    f: &LayerFunction,
    w: &Kernel,
    tau_max: f64,
    steps: usize,
    speed: Option<&Speed>,
) -> Result<EnergySeries> {
    if !(tau_max >= 0.0 && tau_max.is_finite()) || steps == 0 {
        return Err(Error::InvalidInput(format!(
            "need finite tau_max >= 0 and at least one step, got {tau_max} and {steps}"
        )));
    }
    let reach = w.effective_radius();
    let kernel = |z: f64| w.profile(z.abs());
    let mut points = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let tau = tau_max * i as f64 / steps as f64;
        let s = symmetrize_function(f, tau, speed)?;
        points.push((tau, 0.5 * layer_interaction(&s, &s, kernel, reach)));
    }
    let magnitude = points.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let max_increase = points
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(0.0, f64::max)
        / if magnitude > 0.0 { magnitude } else { 1.0 };
    Ok(EnergySeries { points, max_increase })
}
