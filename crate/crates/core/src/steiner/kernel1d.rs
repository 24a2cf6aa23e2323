//! Even one-dimensional kernels with a finite interaction range.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelKind};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Samples used by the evenness check on construction.
const EVENNESS_SAMPLES: usize = 100;

/// An even kernel `K` on ℝ with interaction range `R`.
#[derive(Clone)]
pub struct Kernel1D {
    name: String,
    value: ScalarFn,
    slope: ScalarFn,
    radius: f64,
}

impl fmt::Debug for Kernel1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel1D")
            .field("name", &self.name)
            .field("radius", &self.radius)
            .finish()
    }
}

impl Kernel1D {
    /// Kernel from value and derivative closures. Rejects a nonpositive range
    /// and kernels that are not even on sample points.
    pub fn new<F, G>(name: &str, value: F, slope: G, radius: f64) -> Result<Kernel1D>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("kernel range must be positive, got {radius}")));
        }
        let k = Kernel1D {
            name: name.to_string(),
            value: Arc::new(value),
            slope: Arc::new(slope),
            radius,
        };
        if !k.is_even(EVENNESS_SAMPLES) {
            return Err(Error::InvalidInput(format!("kernel {name} is not even")));
        }
        Ok(k)
    }

    /// Kernel from values only; the derivative is a central difference with
    /// step `1e−6·R`.
    pub fn from_value<F>(name: &str, value: F, radius: f64) -> Result<Kernel1D>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let value: ScalarFn = Arc::new(value);
        let h = 1e-6 * radius;
        let v = value.clone();
        Kernel1D::new(name, move |z| value(z), move |z| (v(z + h) - v(z - h)) / (2.0 * h), radius)
    }

    /// `K(z) = −max(R − |z|, 0)`.
    pub fn tent(radius: f64) -> Result<Kernel1D> {
        Kernel1D::new(
            "tent",
            move |z: f64| -(radius - z.abs()).max(0.0),
            move |z: f64| {
                if z.abs() < radius {
                    z.signum() * f64::from(z != 0.0)
                } else {
                    0.0
                }
            },
            radius,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, z: f64) -> f64 {
        (self.value)(z)
    }

    pub fn slope(&self, z: f64) -> f64 {
        (self.slope)(z)
    }

    /// Interaction range `R`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn sample_points(&self, samples: usize) -> impl Iterator<Item = f64> + '_ {
        (1..=samples).map(move |i| 1.5 * self.radius * (i as f64 - 0.5) / samples as f64)
    }

    /// `K(z) = K(−z)` on sample points in `(0, 1.5R)`.
    pub fn is_even(&self, samples: usize) -> bool {
        self.sample_points(samples).all(|z| {
            let (a, b) = (self.value(z), self.value(-z));
            (a - b).abs() <= 1e-12 * (1.0 + a.abs())
        })
    }

    /// Sampled check of the hypotheses of the derivative lemma: `K` even,
    /// `K′ < 0` on `(0, R)` and `K′ = 0` for `|z| ≥ R`. Points inside the
    /// range where both `K` and `K′` underflow to zero are accepted.
    pub fn lemma_admissible(&self, samples: usize) -> bool {
        let mut decreasing = false;
        let signs_ok = self.sample_points(samples).all(|z| {
            let s = self.slope(z);
            if z < self.radius {
                decreasing |= s < 0.0;
                s < 0.0 || (s == 0.0 && self.value(z) == 0.0)
            } else {
                s == 0.0
            }
        });
        self.is_even(samples) && signs_ok && decreasing
    }

    /// Minimum of `K′` over `[lo, hi]` on a uniform sample of 1025 points.
    pub fn min_slope(&self, lo: f64, hi: f64) -> f64 {
        const POINTS: usize = 1025;
        (0..POINTS)
            .map(|i| self.slope(lo + (hi - lo) * i as f64 / (POINTS - 1) as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Slice kernel `K_l(z) = −½ω(√(z² + l²))` of a compact kernel of unit
/// support radius, with range `R = √(1 − l²)`.
pub fn make_k_slice(k: &Kernel, l: f64) -> Result<Kernel1D> {
    if !(0.0..1.0).contains(&l) {
        return Err(Error::Domain(format!("slice offset must lie in [0, 1), got {l}")));
    }
    if k.kind() != KernelKind::Compact || (k.support_radius() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "slices need a compact kernel with support radius 1, got {} with radius {}",
            k.name(),
            k.support_radius()
        )));
    }
    let radius = (1.0 - l * l).sqrt();
    let (kv, ks) = (k.clone(), k.clone());
    Kernel1D::new(
        &format!("{}-slice-{l}", k.name()),
        move |z: f64| -0.5 * kv.profile((z * z + l * l).sqrt()),
        move |z: f64| {
            let rho = (z * z + l * l).sqrt();
            if rho == 0.0 {
                0.0
            } else {
                -0.5 * ks.derivative(rho) * z / rho
            }
        },
        radius,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_bump_kernel, make_exponential_kernel, make_parabola_kernel};

    #[test]
    fn slice_at_zero_is_half_profile() {
        let w = make_bump_kernel();
        let k = make_k_slice(&w, 0.0).unwrap();
        assert_eq!(k.radius(), 1.0);
        for z in [-0.9, -0.3, 0.0, 0.2, 0.7, 1.2] {
            assert_eq!(k.value(z), -0.5 * w.profile(z.abs()));
        }
    }

    #[test]
    fn slice_range() {
        let k = make_k_slice(&make_parabola_kernel(), 0.6).unwrap();
        assert!((k.radius() - 0.8).abs() < 1e-15);
        assert!(k.value(0.8).abs() < 1e-15);
        assert!(k.value(0.79) > 0.0);
    }

    #[test]
    fn slices_even_and_admissible() {
        for w in [make_bump_kernel(), make_parabola_kernel()] {
            for l in [0.0, 0.3, 0.6, 0.95] {
                let k = make_k_slice(&w, l).unwrap();
                assert!(k.is_even(100));
                assert!(k.lemma_admissible(200), "{} l = {l}", w.name());
            }
        }
    }

    #[test]
    fn slice_slope_matches_difference_quotient() {
        let k = make_k_slice(&make_bump_kernel(), 0.4).unwrap();
        for z in [-0.8, -0.3, 0.1, 0.5, 0.85] {
            let h = 1e-6;
            let fd = (k.value(z + h) - k.value(z - h)) / (2.0 * h);
            assert!((k.slope(z) - fd).abs() < 1e-6 * (1.0 + fd.abs()), "z = {z}");
        }
    }

    #[test]
    fn slice_domain_errors() {
        let w = make_bump_kernel();
        assert!(matches!(make_k_slice(&w, 1.0), Err(Error::Domain(_))));
        assert!(matches!(make_k_slice(&w, -0.1), Err(Error::Domain(_))));
        assert!(matches!(make_k_slice(&make_exponential_kernel(), 0.2), Err(Error::Domain(_))));
    }

    #[test]
    fn tent_violates_slope_sign() {
        let k = Kernel1D::tent(1.0).unwrap();
        assert_eq!(k.value(0.25), -0.75);
        assert_eq!(k.slope(0.25), 1.0);
        assert_eq!(k.slope(0.0), 0.0);
        assert!(k.is_even(100));
        assert!(!k.lemma_admissible(100));
    }

    #[test]
    fn odd_kernel_rejected() {
        assert!(Kernel1D::new("odd", |z| z, |_| 1.0, 1.0).is_err());
        assert!(Kernel1D::new("flat", |_| 0.0, |_| 0.0, 0.0).is_err());
    }

    #[test]
    fn central_difference_slope() {
        let k = Kernel1D::from_value("quartic", |z: f64| (1.0 - z * z).max(0.0).powi(2), 1.0).unwrap();
        for z in [0.1, 0.4, 0.9] {
            let exact = -4.0 * z * (1.0 - z * z);
            assert!((k.slope(z) - exact).abs() < 1e-8);
        }
        assert!(k.lemma_admissible(100));
    }
}
