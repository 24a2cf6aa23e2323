//! Seeded randomized checks of the symmetrization machinery, shared by the
//! command-line `steiner-check` and the acceptance tests.

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::kernels::{make_bump_kernel, make_parabola_kernel};

use super::{
    decreasing_rearrangement, energy_decrease_demo, interaction_derivative, lemma_bound, lemma_conditions,
    make_k_slice, probe_points, symmetrize_function, symmetrize_union, Interval, IntervalUnion, Kernel1D,
    LayerFunction,
};

/// Slack allowed below zero for the one-sided derivative and below the
/// stated lower bound.
const SIGN_SLACK: f64 = 1e-9;

/// Agreement of symmetrized step functions with their oracles.
const GRID_PRECISION: f64 = 1e-12;

/// Cell width of random step functions.
const STEP_DX: f64 = 0.25;

/// Case counts and seed of the suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Random single-interval pairs for the sign and agreement checks.
    pub pairs: usize,
    /// Random pairs satisfying the lower-bound hypotheses.
    pub tuples: usize,
    /// Random step functions for the rearrangement, layer-cake and energy checks.
    pub functions: usize,
    /// Random interval unions for measure preservation and composition.
    pub unions: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 2024,
            pairs: 10_000,
            tuples: 1_000,
            functions: 100,
            unions: 1_000,
        }
    }
}

/// Outcome of one family of checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckTally {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
}

impl CheckTally {
    pub fn passed(&self) -> bool {
        self.passed == self.total
    }
}

impl fmt::Display for CheckTally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}/{} (worst {:.3e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.passed,
            self.total,
            self.worst
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub checks: Vec<CheckTally>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(CheckTally::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckTally> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tallies `(ok, value)` outcomes; `worst` keeps the minimum when `lower` is
/// set and the maximum otherwise.
fn tally(name: &'static str, outcomes: &[(bool, f64)], lower: bool) -> CheckTally {
    let init = if lower { f64::INFINITY } else { f64::NEG_INFINITY };
    let worst = outcomes
        .iter()
        .map(|o| o.1)
        .fold(init, |a, b| if lower { a.min(b) } else { a.max(b) });
    CheckTally {
        name,
        passed: outcomes.iter().filter(|o| o.0).count(),
        total: outcomes.len(),
        worst: if outcomes.is_empty() { 0.0 } else { worst },
    }
}

fn case_rng(seed: u64, family: u64, case: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((family << 40) | case as u64);
    rng
}

/// A random kernel satisfying the lemma hypotheses: a bump or parabola slice
/// at a random offset, or a quartic `(R² − z²)²` with random range.
fn random_kernel(rng: &mut ChaCha8Rng) -> Result<Kernel1D> {
    match rng.gen_range(0..3) {
        0 => make_k_slice(&make_bump_kernel(), rng.gen_range(0.0..0.9)),
        1 => make_k_slice(&make_parabola_kernel(), rng.gen_range(0.0..0.9)),
        _ => {
            let radius: f64 = rng.gen_range(0.5..2.0);
            Kernel1D::new(
                "quartic",
                move |z: f64| (radius * radius - z * z).max(0.0).powi(2),
                move |z: f64| {
                    if z.abs() < radius {
                        -4.0 * z * (radius * radius - z * z)
                    } else {
                        0.0
                    }
                },
                radius,
            )
        }
    }
}

fn nonzero(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    loop {
        let c = rng.gen_range(-bound..bound);
        if c != 0.0 {
            return c;
        }
    }
}

struct DerivativeOutcome {
    formula: f64,
    gap: f64,
    agrees: bool,
    margin: f64,
}

fn pair_case(seed: u64, case: usize) -> Result<DerivativeOutcome> {
    let mut rng = case_rng(seed, 1, case);
    let k = random_kernel(&mut rng)?;
    let (c1, c2) = (nonzero(&mut rng, 3.0), nonzero(&mut rng, 3.0));
    let (r1, r2) = (rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0));
    derivative_case(&k, c1, r1, c2, r2)
}

fn tuple_case(seed: u64, case: usize) -> Result<DerivativeOutcome> {
    let mut rng = case_rng(seed, 2, case);
    let k = random_kernel(&mut rng)?;
    loop {
        let c1 = -rng.gen_range(0.0..2.0f64);
        let c2 = rng.gen_range(0.0..2.0f64);
        let (c1, c2) = if rng.gen_bool(0.5) { (c1, c2) } else { (c2, c1) };
        let (r1, r2) = (rng.gen_range(0.05..1.5), rng.gen_range(0.05..1.5));
        if c1 != 0.0 && c2 != 0.0 && lemma_conditions(c1, r1, c2, r2, k.radius()) {
            return derivative_case(&k, c1, r1, c2, r2);
        }
    }
}

fn derivative_case(k: &Kernel1D, c1: f64, r1: f64, c2: f64, r2: f64) -> Result<DerivativeOutcome> {
    let u1 = IntervalUnion::single(0.0, c1, r1)?;
    let u2 = IntervalUnion::single(0.0, c2, r2)?;
    let d = interaction_derivative(&u1, &u2, k, 0.0)?;
    Ok(DerivativeOutcome {
        formula: d.formula,
        gap: d.relative_gap(),
        agrees: d.agrees(),
        margin: d.formula - lemma_bound(c1, r1, c2, r2, k),
    })
}

/// Disjoint intervals with endpoints on the 1/8 lattice, so that event times
/// and all positions are exact.
fn dyadic_union(rng: &mut ChaCha8Rng) -> Result<IntervalUnion> {
    let count = rng.gen_range(1..8);
    let mut left = -20.0;
    let mut intervals = Vec::with_capacity(count);
    for _ in 0..count {
        let a = left + rng.gen_range(1..24) as f64 / 8.0;
        let w = rng.gen_range(1..16) as f64 / 8.0;
        intervals.push(Interval::new(a + 0.5 * w, 0.5 * w));
        left = a + w;
    }
    IntervalUnion::new(rng.gen_range(-16..16) as f64 / 4.0, intervals)
}

fn union_case(seed: u64, case: usize) -> Result<(bool, bool)> {
    let mut rng = case_rng(seed, 3, case);
    let u = dyadic_union(&mut rng)?;
    let t1 = rng.gen_range(0..400) as f64 / 16.0;
    let t2 = rng.gen_range(0..400) as f64 / 16.0;
    let once = symmetrize_union(&u, t1)?;
    let preserved = once.measure() == u.measure();
    let composed = symmetrize_union(&once, t2)? == symmetrize_union(&u, t1 + t2)?;
    Ok((preserved, composed))
}

struct FunctionOutcome {
    limit_error: f64,
    layer_error: f64,
    energy_increase: f64,
    energy_ok: bool,
}

fn function_case(seed: u64, case: usize) -> Result<FunctionOutcome> {
    let mut rng = case_rng(seed, 4, case);
    let n = rng.gen_range(8..40);
    let values: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.4) {
                0.0
            } else {
                rng.gen_range(1..6) as f64 / 4.0
            }
        })
        .collect();
    let left = -0.5 * n as f64 * STEP_DX;
    let anchor = rng.gen_range(-8..8) as f64 / 8.0;
    let f = LayerFunction::from_samples(&values, left, STEP_DX, anchor)?;

    let limit = symmetrize_function(&f, f64::INFINITY, None)?;
    let oracle = decreasing_rearrangement(&values, STEP_DX, anchor);
    let limit_error = probe_points(anchor, STEP_DX, n + 1)
        .into_iter()
        .map(|x| (limit.eval(x) - oracle.eval(x)).abs())
        .fold(0.0, f64::max);

    // Superlevel sets rebuilt cell by cell, each symmetrized on its own.
    let tau = rng.gen_range(0..160) as f64 / 16.0;
    let s = symmetrize_function(&f, tau, None)?;
    let mut levels: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut direct = Vec::with_capacity(levels.len());
    for &h in &levels {
        let cells = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v >= h)
            .map(|(i, _)| Interval::new(left + (i as f64 + 0.5) * STEP_DX - anchor, 0.5 * STEP_DX))
            .collect();
        direct.push(symmetrize_union(&IntervalUnion::new(anchor, cells)?, tau)?);
    }
    let layer_error = (0..8 * n)
        .map(|j| left - 2.0 + (j as f64 + 0.3) * STEP_DX * 0.5 * 1.17)
        .map(|x| {
            let mut prev = 0.0;
            let mut want = 0.0;
            for (h, u) in levels.iter().zip(&direct) {
                if u.contains(x) {
                    want += h - prev;
                }
                prev = *h;
            }
            (s.eval(x) - want).abs()
        })
        .fold(0.0, f64::max);

    let series = energy_decrease_demo(&f, &make_bump_kernel(), 2.0 * n as f64 * STEP_DX, 8, None)?;
    Ok(FunctionOutcome {
        limit_error,
        layer_error,
        energy_increase: series.max_increase,
        energy_ok: series.monotone(),
    })
}

/// Runs every family of checks. Cases are generated from per-case streams of
/// one seeded generator, so results do not depend on the thread count.
pub fn run_property_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    let seed = config.seed;
    let pairs = (0..config.pairs)
        .into_par_iter()
        .map(|i| pair_case(seed, i))
        .collect::<Result<Vec<_>>>()?;
    let tuples = (0..config.tuples)
        .into_par_iter()
        .map(|i| tuple_case(seed, i))
        .collect::<Result<Vec<_>>>()?;
    let unions = (0..config.unions)
        .into_par_iter()
        .map(|i| union_case(seed, i))
        .collect::<Result<Vec<_>>>()?;
    let functions = (0..config.functions)
        .into_par_iter()
        .map(|i| function_case(seed, i))
        .collect::<Result<Vec<_>>>()?;

    let sign: Vec<(bool, f64)> = pairs.iter().map(|d| (d.formula >= -SIGN_SLACK, d.formula)).collect();
    let agreement: Vec<(bool, f64)> = pairs.iter().chain(&tuples).map(|d| (d.agrees, d.gap)).collect();
    let bound: Vec<(bool, f64)> = tuples.iter().map(|d| (d.margin >= -SIGN_SLACK, d.margin)).collect();
    let measure: Vec<(bool, f64)> = unions.iter().map(|u| (u.0, f64::from(u8::from(!u.0)))).collect();
    let semigroup: Vec<(bool, f64)> = unions.iter().map(|u| (u.1, f64::from(u8::from(!u.1)))).collect();
    let limit: Vec<(bool, f64)> = functions
        .iter()
        .map(|f| (f.limit_error <= GRID_PRECISION, f.limit_error))
        .collect();
    let layers: Vec<(bool, f64)> = functions
        .iter()
        .map(|f| (f.layer_error <= GRID_PRECISION, f.layer_error))
        .collect();
    let energy: Vec<(bool, f64)> = functions.iter().map(|f| (f.energy_ok, f.energy_increase)).collect();

    Ok(SuiteReport {
        config: *config,
        checks: vec![
            tally("one-sided derivative nonnegative", &sign, true),
            tally("lower bound on derivative", &bound, true),
            tally("closed form vs difference quotient", &agreement, false),
            tally("measure preservation", &measure, false),
            tally("composition in tau", &semigroup, false),
            tally("long-time limit vs rearrangement", &limit, false),
            tally("layer-cake consistency", &layers, false),
            tally("interaction energy non-increasing", &energy, false),
        ],
    })
}
