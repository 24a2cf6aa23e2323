//! Continuous Steiner symmetrization of finite interval unions and of
//! nonnegative step functions on the line, together with the interaction
//! energy of symmetrized indicator densities and its one-sided derivative.
//!
//! Intervals are stored as offsets `c` from the symmetrization anchor `x̃`
//! with half-width `r`; the open interval is `(x̃ + c − r, x̃ + c + r)`.

mod interaction;
mod kernel1d;
mod layers;
mod suite;

pub use interaction::{
    energy_decrease_demo, interaction_derivative, interaction_energy, layer_interaction, lemma_bound,
    lemma_conditions, phi, DerivativeCheck, EnergySeries, ENERGY_QUAD_TOL, FD_AGREEMENT_TOL, RESOLVABLE,
};
pub use kernel1d::{make_k_slice, Kernel1D};
pub use layers::{
    decreasing_rearrangement, probe_points, symmetrize_function, LayerFunction, Rearrangement, Speed,
};
pub use suite::{run_property_suite, CheckTally, SuiteConfig, SuiteReport};

use crate::error::{Error, Result};

/// Intervals whose gap is below this (relative to their extent) are treated
/// as touching and merged.
const TOUCH_TOL: f64 = 1e-13;

pub(crate) fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One open interval `(x̃ + c − r, x̃ + c + r)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    /// Centre offset from the anchor.
    pub c: f64,
    /// Half-width.
    pub r: f64,
}

impl Interval {
    pub fn new(c: f64, r: f64) -> Interval {
        Interval { c, r }
    }

    /// Left endpoint offset.
    pub fn left(&self) -> f64 {
        self.c - self.r
    }

    /// Right endpoint offset.
    pub fn right(&self) -> f64 {
        self.c + self.r
    }

    fn velocity(&self) -> f64 {
        -sgn(self.c)
    }

    fn advance(&mut self, dt: f64) {
        if self.c > 0.0 {
            self.c = if dt >= self.c { 0.0 } else { self.c - dt };
        } else if self.c < 0.0 {
            self.c = if dt >= -self.c { 0.0 } else { self.c + dt };
        }
    }
}

/// A finite union of pairwise disjoint open intervals around an anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalUnion {
    anchor: f64,
    intervals: Vec<Interval>,
}

impl IntervalUnion {
    /// Validates, sorts by left endpoint and merges intervals that share an
    /// endpoint. Overlapping intervals are rejected.
    pub fn new(anchor: f64, intervals: Vec<Interval>) -> Result<IntervalUnion> {
        if !anchor.is_finite() {
            return Err(Error::InvalidInput(format!("anchor must be finite, got {anchor}")));
        }
        for iv in &intervals {
            if !(iv.c.is_finite() && iv.r.is_finite() && iv.r > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "interval needs finite centre and positive half-width, got c = {}, r = {}",
                    iv.c, iv.r
                )));
            }
        }
        let mut intervals = intervals;
        intervals.sort_by(|a, b| a.left().total_cmp(&b.left()));
        for w in intervals.windows(2) {
            if w[1].left() < w[0].right() {
                return Err(Error::InvalidInput(format!(
                    "intervals ({}, {}) and ({}, {}) overlap",
                    anchor + w[0].left(),
                    anchor + w[0].right(),
                    anchor + w[1].left(),
                    anchor + w[1].right()
                )));
            }
        }
        merge_touching(&mut intervals);
        Ok(IntervalUnion { anchor, intervals })
    }

    /// Union given by absolute endpoints `(a, b)`.
    pub fn from_endpoints(anchor: f64, spans: &[(f64, f64)]) -> Result<IntervalUnion> {
        let intervals = spans
            .iter()
            .map(|&(a, b)| Interval::new(0.5 * (a + b) - anchor, 0.5 * (b - a)))
            .collect();
        IntervalUnion::new(anchor, intervals)
    }

    pub fn single(anchor: f64, c: f64, r: f64) -> Result<IntervalUnion> {
        IntervalUnion::new(anchor, vec![Interval::new(c, r)])
    }

    pub fn empty(anchor: f64) -> IntervalUnion {
        IntervalUnion {
            anchor,
            intervals: Vec::new(),
        }
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Absolute endpoints `(x̃ + c − r, x̃ + c + r)` of each interval.
    pub fn spans(&self) -> Vec<(f64, f64)> {
        self.intervals
            .iter()
            .map(|iv| (self.anchor + iv.left(), self.anchor + iv.right()))
            .collect()
    }

    /// Lebesgue measure Σ 2rᵢ.
    pub fn measure(&self) -> f64 {
        2.0 * self.intervals.iter().map(|iv| iv.r).sum::<f64>()
    }

    /// Whether `x` lies in the (open) union.
    pub fn contains(&self, x: f64) -> bool {
        let y = x - self.anchor;
        self.intervals.iter().any(|iv| y > iv.left() && y < iv.right())
    }

    /// Whether every interval of `self` lies inside some interval of `outer`.
    pub fn is_subset_of(&self, outer: &IntervalUnion, tol: f64) -> bool {
        let shift = self.anchor - outer.anchor;
        self.intervals.iter().all(|iv| {
            let (a, b) = (iv.left() + shift, iv.right() + shift);
            outer
                .intervals
                .iter()
                .any(|o| a >= o.left() - tol && b <= o.right() + tol)
        })
    }

    /// Time until the next change of motion: an interval reaching the anchor
    /// or two intervals meeting. `None` when nothing will change.
    pub fn next_event(&self) -> Option<f64> {
        next_event(&self.intervals)
    }
}

fn merge_touching(intervals: &mut Vec<Interval>) {
    let mut i = 0;
    while i + 1 < intervals.len() {
        let (a, b) = (intervals[i], intervals[i + 1]);
        let scale = 1.0 + a.right().abs().max(b.left().abs());
        if b.left() - a.right() <= TOUCH_TOL * scale {
            let r = a.r + b.r;
            intervals[i] = Interval::new(a.left() + r, r);
            intervals.remove(i + 1);
            i = i.saturating_sub(1);
        } else {
            i += 1;
        }
    }
}

fn next_event(intervals: &[Interval]) -> Option<f64> {
    let stops = intervals.iter().filter(|iv| iv.c != 0.0).map(|iv| iv.c.abs());
    let meets = intervals.windows(2).filter_map(|w| {
        let closing = w[0].velocity() - w[1].velocity();
        (closing > 0.0).then(|| (w[1].left() - w[0].right()).max(0.0) / closing)
    });
    stops.chain(meets).min_by(f64::total_cmp)
}

/// Continuous Steiner symmetrization `M^τ(U)`: every interval moves toward
/// the anchor at unit speed and stops there; intervals that meet merge and
/// the motion restarts from the merged configuration. Evolution is exact
/// between events, so no time step is involved.
pub fn symmetrize_union(u: &IntervalUnion, tau: f64) -> Result<IntervalUnion> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidInput(format!("tau must be nonnegative, got {tau}")));
    }
    let mut intervals = u.intervals.clone();
    let mut elapsed = 0.0;
    loop {
        let remaining = tau - elapsed;
        match next_event(&intervals) {
            Some(e) if e < remaining => {
                intervals.iter_mut().for_each(|iv| iv.advance(e));
                elapsed += e;
                merge_touching(&mut intervals);
            }
            _ => {
                intervals.iter_mut().for_each(|iv| iv.advance(remaining));
                merge_touching(&mut intervals);
                break;
            }
        }
    }
    Ok(IntervalUnion {
        anchor: u.anchor,
        intervals,
    })
}
