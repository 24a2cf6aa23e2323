//! Layer-cake representation of nonnegative step functions and their
//! continuous Steiner symmetrization.

use crate::error::{Error, Result};
use crate::grid::Field;

use super::{symmetrize_union, IntervalUnion};

/// Slack used when checking that superlevel sets are nested.
const NESTING_TOL: f64 = 1e-9;

/// Height-dependent speed `v(h) = 1` for `h ≥ h₀`, `(h/h₀)^{m−1}` below.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Speed {
    pub h0: f64,
    pub m: f64,
}

impl Speed {
    pub fn new(h0: f64, m: f64) -> Result<Speed> {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(Error::InvalidInput(format!("h0 must be positive, got {h0}")));
        }
        if !(m > 1.0 && m.is_finite()) {
            return Err(Error::InvalidInput(format!("speed exponent needs m > 1, got {m}")));
        }
        Ok(Speed { h0, m })
    }

    pub fn at(&self, h: f64) -> f64 {
        if h >= self.h0 {
            1.0
        } else if h > 0.0 {
            (h / self.h0).powf(self.m - 1.0)
        } else {
            0.0
        }
    }
}

/// `f = Σₖ (hₖ − hₖ₋₁) χ_{Uₖ}` with `0 = h₀ < h₁ < …`; for a step function
/// `Uₖ` is the superlevel set `{f ≥ hₖ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerFunction {
    anchor: f64,
    layers: Vec<(f64, IntervalUnion)>,
}

impl LayerFunction {
    /// Layers given explicitly as `(height, superlevel set)`; heights must be
    /// strictly increasing and positive, sets nested and sharing one anchor.
    pub fn from_layers(layers: Vec<(f64, IntervalUnion)>) -> Result<LayerFunction> {
        let anchor = layers.first().map_or(0.0, |(_, u)| u.anchor());
        let mut prev = 0.0;
        for (h, u) in &layers {
            if !(h.is_finite() && *h > prev) {
                return Err(Error::InvalidInput(format!(
                    "layer heights must be positive and strictly increasing, got {h} after {prev}"
                )));
            }
            if u.anchor() != anchor {
                return Err(Error::InvalidInput("layers use different anchors".into()));
            }
            prev = *h;
        }
        let f = LayerFunction { anchor, layers };
        if !f.is_nested() {
            return Err(Error::InvalidInput("layers are not nested".into()));
        }
        Ok(f)
    }

    /// Piecewise-constant function with `values[i]` on `[left + i·dx, left + (i+1)·dx)`.
    pub fn from_samples(values: &[f64], left: f64, dx: f64, anchor: f64) -> Result<LayerFunction> {
        if !(dx > 0.0 && dx.is_finite() && left.is_finite()) {
            return Err(Error::InvalidInput(format!("bad cell geometry: left = {left}, dx = {dx}")));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!("step values must be nonnegative, got {v}")));
        }
        let mut heights: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
        heights.sort_by(f64::total_cmp);
        heights.dedup();
        let mut layers = Vec::with_capacity(heights.len());
        for &h in &heights {
            let mut spans = Vec::new();
            let mut i = 0;
            while i < values.len() {
                if values[i] >= h {
                    let start = i;
                    while i < values.len() && values[i] >= h {
                        i += 1;
                    }
                    spans.push((left + start as f64 * dx, left + i as f64 * dx));
                } else {
                    i += 1;
                }
            }
            layers.push((h, IntervalUnion::from_endpoints(anchor, &spans)?));
        }
        Ok(LayerFunction { anchor, layers })
    }

    /// Step function read from a 1D lattice field (values are cell averages).
    pub fn from_field(f: &Field, anchor: f64) -> Result<LayerFunction> {
        if f.dims() != 1 {
            return Err(Error::ShapeMismatch("step functions are one-dimensional".into()));
        }
        let left = f.origin()[0] - 0.5 * f.dx();
        LayerFunction::from_samples(f.data(), left, f.dx(), anchor)
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn layers(&self) -> &[(f64, IntervalUnion)] {
        &self.layers
    }

    /// Layer thicknesses `hₖ − hₖ₋₁`.
    pub fn thicknesses(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.layers
            .iter()
            .map(|(h, _)| {
                let d = h - prev;
                prev = *h;
                d
            })
            .collect()
    }

    pub fn is_nested(&self) -> bool {
        self.layers
            .windows(2)
            .all(|w| w[1].1.is_subset_of(&w[0].1, NESTING_TOL))
    }

    /// Layer-cake sum at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.thicknesses()
            .iter()
            .zip(&self.layers)
            .filter(|(_, (_, u))| u.contains(x))
            .map(|(d, _)| d)
            .sum()
    }

    /// `∫ f`.
    pub fn integral(&self) -> f64 {
        self.thicknesses()
            .iter()
            .zip(&self.layers)
            .map(|(d, (_, u))| d * u.measure())
            .sum()
    }

    /// Values at the given points.
    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

/// `S^τ f`: each superlevel set evolves by [`symmetrize_union`] for time
/// `v(hₖ)·τ` (`v ≡ 1` without a speed) and the layers are summed again.
/// With a speed the resulting sets need not be nested; the layer-cake sum
/// still defines the function.
pub fn symmetrize_function(f: &LayerFunction, tau: f64, speed: Option<&Speed>) -> Result<LayerFunction> {
    if !f.is_nested() {
        return Err(Error::InvalidInput("layers are not nested".into()));
    }
    let layers = f
        .layers
        .iter()
        .map(|(h, u)| {
            let t = speed.map_or(tau, |s| s.at(*h) * tau);
            Ok((*h, symmetrize_union(u, t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerFunction {
        anchor: f.anchor,
        layers,
    })
}

/// Symmetric decreasing rearrangement of cell values about an anchor, built
/// by sorting: the j-th largest value occupies `dx·j/2 ≤ |x − x̃| < dx·(j+1)/2`.
#[derive(Clone, Debug)]
pub struct Rearrangement {
    sorted: Vec<f64>,
    dx: f64,
    anchor: f64,
}

pub fn decreasing_rearrangement(values: &[f64], dx: f64, anchor: f64) -> Rearrangement {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Rearrangement { sorted, dx, anchor }
}

impl Rearrangement {
    pub fn eval(&self, x: f64) -> f64 {
        let j = (2.0 * (x - self.anchor).abs() / self.dx).floor();
        if j < self.sorted.len() as f64 {
            self.sorted[j as usize]
        } else {
            0.0
        }
    }
}

/// Points `x̃ ± (k + ½)·dx/2`, `k < count`, one inside each half-cell of the
/// rearrangement.
pub fn probe_points(anchor: f64, dx: f64, count: usize) -> Vec<f64> {
    (0..count)
        .flat_map(|k| {
            let d = (k as f64 + 0.5) * 0.5 * dx;
            [anchor - d, anchor + d]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steiner::Interval;
    use proptest::prelude::*;

    fn step(values: &[f64], anchor: f64) -> LayerFunction {
        LayerFunction::from_samples(values, -0.5 * values.len() as f64 * 0.25, 0.25, anchor).unwrap()
    }

    #[test]
    fn layers_from_samples() {
        let f = step(&[0.0, 1.0, 2.0, 2.0, 0.0, 1.0, 0.0, 0.0], 0.0);
        assert_eq!(f.layers().len(), 2);
        assert_eq!(f.layers()[0].1.spans(), vec![(-0.75, 0.0), (0.25, 0.5)]);
        assert_eq!(f.layers()[1].1.spans(), vec![(-0.5, 0.0)]);
        assert_eq!(f.integral(), 0.25 * 6.0);
        assert_eq!(f.eval(-0.3), 2.0);
        assert_eq!(f.eval(0.3), 1.0);
        assert_eq!(f.eval(0.1), 0.0);
    }

    #[test]
    fn non_nested_layers_rejected() {
        let a = IntervalUnion::from_endpoints(0.0, &[(0.0, 1.0)]).unwrap();
        let inner = IntervalUnion::from_endpoints(0.0, &[(0.5, 1.0)]).unwrap();
        let b = IntervalUnion::from_endpoints(0.0, &[(0.5, 2.0)]).unwrap();
        assert!(LayerFunction::from_layers(vec![(1.0, a.clone()), (2.0, b.clone())]).is_err());
        assert!(LayerFunction::from_layers(vec![(1.0, b), (2.0, inner)]).is_ok());
    }

    #[test]
    fn symmetric_decreasing_is_fixed_point() {
        let f = step(&[0.0, 1.0, 2.0, 3.0, 3.0, 2.0, 1.0, 0.0], 0.0);
        for tau in [0.0, 0.3, 5.0, f64::INFINITY] {
            assert_eq!(symmetrize_function(&f, tau, None).unwrap(), f);
        }
    }

    #[test]
    fn limit_matches_rearrangement() {
        let values = [0.5, 0.0, 1.0, 0.25, 1.0, 0.0, 0.0, 0.75, 0.5, 0.0];
        let anchor = 0.375;
        let f = step(&values, anchor);
        let s = symmetrize_function(&f, f64::INFINITY, None).unwrap();
        let oracle = decreasing_rearrangement(&values, 0.25, anchor);
        for x in probe_points(anchor, 0.25, values.len() + 2) {
            assert_eq!(s.eval(x), oracle.eval(x), "x = {x}");
        }
    }

    #[test]
    fn speed_profile() {
        let v = Speed::new(0.5, 3.0).unwrap();
        assert_eq!(v.at(1.0), 1.0);
        assert_eq!(v.at(0.5), 1.0);
        assert!((v.at(0.25) - 0.25).abs() < 1e-15);
        assert_eq!(v.at(0.0), 0.0);
        assert!(Speed::new(0.0, 3.0).is_err());
        assert!(Speed::new(1.0, 1.0).is_err());
    }

    #[test]
    fn slow_low_layers_lag_behind() {
        // Base layer at height 0.25 moves at (0.25/1)^1 = 1/4 of unit speed.
        let f = step(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.25, 1.0, 1.0], 0.0);
        let v = Speed::new(1.0, 2.0).unwrap();
        let s = symmetrize_function(&f, 1.0, Some(&v)).unwrap();
        let unit = symmetrize_function(&f, 1.0, None).unwrap();
        assert_eq!(s.layers()[1], unit.layers()[1]);
        assert_eq!(
            s.layers()[0].1,
            symmetrize_union(&f.layers()[0].1, 0.25).unwrap()
        );
        assert_eq!(s.integral(), f.integral());
    }

    fn step_values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), (1u8..6).prop_map(|k| k as f64 / 4.0)], 8..40)
    }

    proptest! {
        #[test]
        fn mass_preserved(values in step_values(), anchor in -8i32..8, tau in 0i32..200) {
            let f = step(&values, anchor as f64 / 4.0);
            let s = symmetrize_function(&f, tau as f64 / 8.0, None).unwrap();
            prop_assert_eq!(s.integral(), f.integral());
        }

        #[test]
        fn unit_speed_keeps_nesting(values in step_values(), tau in 0i32..200) {
            let f = step(&values, 0.125);
            let s = symmetrize_function(&f, tau as f64 / 8.0, None).unwrap();
            prop_assert!(s.is_nested());
        }

        #[test]
        fn limit_is_sorted_rearrangement(values in step_values(), anchor in -8i32..8) {
            let anchor = anchor as f64 / 4.0;
            let f = step(&values, anchor);
            let s = symmetrize_function(&f, f64::INFINITY, None).unwrap();
            let oracle = decreasing_rearrangement(&values, 0.25, anchor);
            for x in probe_points(anchor, 0.25, values.len() + 1) {
                prop_assert!((s.eval(x) - oracle.eval(x)).abs() <= 1e-12);
            }
        }

        #[test]
        fn layer_cake_matches_direct_superlevel_sets(values in step_values(), tau in 0i32..200) {
            let tau = tau as f64 / 8.0;
            let left = -0.5 * values.len() as f64 * 0.25;
            let f = step(&values, 0.0);
            let s = symmetrize_function(&f, tau, None).unwrap();
            let mut levels: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let mut direct = Vec::new();
            for &h in &levels {
                let spans: Vec<(f64, f64)> = values
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v >= h)
                    .map(|(i, _)| (left + i as f64 * 0.25, left + (i + 1) as f64 * 0.25))
                    .collect();
                let cells: Vec<Interval> = spans
                    .iter()
                    .map(|&(a, b)| Interval::new(0.5 * (a + b), 0.5 * (b - a)))
                    .collect();
                direct.push(symmetrize_union(&IntervalUnion::new(0.0, cells).unwrap(), tau).unwrap());
            }
            let xs: Vec<f64> = (0..4 * values.len() + 8)
                .map(|k| left - 1.0 + (k as f64 + 0.37) * 0.0625 * 1.1)
                .collect();
            for x in xs {
                let mut prev = 0.0;
                let mut want = 0.0;
                for (h, u) in levels.iter().zip(&direct) {
                    if u.contains(x) {
                        want += h - prev;
                    }
                    prev = *h;
                }
                prop_assert!((s.eval(x) - want).abs() <= 1e-12);
            }
        }
    }
}
