//! Radially symmetric attractive interaction kernels `W(x) = ω(|x|)`.
//!
//! Every kernel is stored through its radial profile ω and derivative ω′.
//! Profiles are normalised so that ω ≤ 0 and ω vanishes at infinity (or
//! beyond the support radius for compact kernels).

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature;

/// Below this the bump exponent underflows; the profile is set to zero.
const BUMP_CUTOFF: f64 = 1.0 - 1e-8;

/// Magnitude below which an unbounded profile is treated as zero.
pub const TRUNCATION_LEVEL: f64 = 1e-12;

/// Minimum radius cap accepted by [`kernel_l1_norm`] for unbounded kernels.
pub const MIN_UNBOUNDED_CAP: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    /// ω′ = ω = 0 beyond the support radius.
    Compact,
    /// ω < 0 everywhere, ω → 0 at infinity.
    Unbounded,
}

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    Bump { amplitude: f64 },
    Exponential,
    Parabola,
    Tabulated(Arc<Table>),
    Custom { value: RadialFn, slope: RadialFn },
}

#[derive(Debug)]
struct Table {
    r: Vec<f64>,
    w: Vec<f64>,
}

impl Table {
    fn segment(&self, r: f64) -> Option<usize> {
        let last = *self.r.last()?;
        if r >= last {
            return None;
        }
        let idx = self.r.partition_point(|&x| x <= r);
        Some(idx.saturating_sub(1))
    }

    fn value(&self, r: f64) -> f64 {
        match self.segment(r) {
            None => 0.0,
            Some(i) => {
                let t = (r - self.r[i]) / (self.r[i + 1] - self.r[i]);
                self.w[i] + t * (self.w[i + 1] - self.w[i])
            }
        }
    }

    fn slope(&self, r: f64) -> f64 {
        match self.segment(r) {
            None => 0.0,
            Some(i) => (self.w[i + 1] - self.w[i]) / (self.r[i + 1] - self.r[i]),
        }
    }
}

/// An interaction kernel in dimension `d`.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    profile: Profile,
    support_radius: f64,
    dimension: usize,
    kind: KernelKind,
    l1_norm: f64,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("support_radius", &self.support_radius)
            .field("dimension", &self.dimension)
            .field("kind", &self.kind)
            .field("l1_norm", &self.l1_norm)
            .finish()
    }
}

/// `W(x) = -5 exp(1/(|x|² - 1))` for `|x| < 1`, zero otherwise.
pub fn make_bump_kernel() -> Kernel {
    Kernel::build("bump", Profile::Bump { amplitude: 5.0 }, 1.0, KernelKind::Compact, 1)
}

/// `W(x) = -exp(-|x|)`.
pub fn make_exponential_kernel() -> Kernel {
    Kernel::build("exponential", Profile::Exponential, f64::INFINITY, KernelKind::Unbounded, 1)
}

/// `W(x) = -max(1 - |x|², 0)`.
pub fn make_parabola_kernel() -> Kernel {
    Kernel::build("parabola", Profile::Parabola, 1.0, KernelKind::Compact, 1)
}

/// Looks up a built-in kernel by its configuration name.
pub fn builtin_kernel(name: &str) -> Option<Kernel> {
    match name {
        "bump" => Some(make_bump_kernel()),
        "exponential" => Some(make_exponential_kernel()),
        "parabola" => Some(make_parabola_kernel()),
        _ => None,
    }
}

impl Kernel {
    fn build(name: &str, profile: Profile, support_radius: f64, kind: KernelKind, dimension: usize) -> Kernel {
        let mut k = Kernel {
            name: name.to_string(),
            profile,
            support_radius,
            dimension,
            kind,
            l1_norm: 0.0,
        };
        k.l1_norm = k.continuous_l1_norm();
        k
    }

    /// Kernel from arbitrary radial closures. No assumptions are checked here;
    /// use [`validate_kernel`].
    pub fn from_fn<F, G>(
        name: &str,
        value: F,
        slope: G,
        support_radius: f64,
        kind: KernelKind,
        dimension: usize,
    ) -> Kernel
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Kernel::build(
            name,
            Profile::Custom {
                value: Arc::new(value),
                slope: Arc::new(slope),
            },
            support_radius,
            kind,
            dimension,
        )
    }

    /// Piecewise-linear kernel from `(r, ω(r))` samples; zero beyond the last radius.
    pub fn tabulated(r: Vec<f64>, w: Vec<f64>) -> Result<Kernel> {
        if r.len() < 2 || r.len() != w.len() {
            return Err(Error::InvalidInput(
                "tabulated kernel needs at least two (r, w) rows".into(),
            ));
        }
        if r[0] != 0.0 {
            return Err(Error::InvalidInput("tabulated kernel must start at r = 0".into()));
        }
        if r.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidInput("tabulated radii must be strictly increasing".into()));
        }
        if let Some(i) = r.iter().chain(&w).position(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel { radius: r[i % r.len()] });
        }
        let support = *r.last().unwrap();
        Ok(Kernel::build(
            "custom",
            Profile::Tabulated(Arc::new(Table { r, w })),
            support,
            KernelKind::Compact,
            1,
        ))
    }

    /// Reads a two-column whitespace-separated `(r, ω)` file.
    pub fn from_table_file(path: &Path) -> Result<Kernel> {
        let text = std::fs::read_to_string(path)?;
        let mut r = Vec::new();
        let mut w = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: e.to_string(),
                })
            };
            if cols.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected 2 columns, found {}", cols.len()),
                });
            }
            r.push(parse(cols[0])?);
            w.push(parse(cols[1])?);
        }
        Kernel::tabulated(r, w)
    }

    /// Same profile in another spatial dimension (recomputes the L¹ norm).
    pub fn with_dimension(&self, dimension: usize) -> Kernel {
        assert!(dimension == 1 || dimension == 2, "only d = 1, 2 are supported");
        Kernel::build(&self.name, self.profile.clone(), self.support_radius, self.kind, dimension)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Radius of supp W; `f64::INFINITY` for unbounded kernels.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// ‖W‖_{L¹(ℝᵈ)} by adaptive quadrature of the radial profile.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// ω(r).
    pub fn profile(&self, r: f64) -> f64 {
        let r = r.abs();
        match &self.profile {
            Profile::Bump { amplitude } => {
                if r >= BUMP_CUTOFF {
                    0.0
                } else {
                    -amplitude * (1.0 / (r * r - 1.0)).exp()
                }
            }
            Profile::Exponential => -(-r).exp(),
            Profile::Parabola => -(1.0 - r * r).max(0.0),
            Profile::Tabulated(t) => t.value(r),
            Profile::Custom { value, .. } => value(r),
        }
    }

    /// ω′(r).
    pub fn derivative(&self, r: f64) -> f64 {
        let r = r.abs();
        match &self.profile {
            Profile::Bump { amplitude } => {
                if r >= BUMP_CUTOFF {
                    0.0
                } else {
                    let s = r * r - 1.0;
                    amplitude * (1.0 / s).exp() * 2.0 * r / (s * s)
                }
            }
            Profile::Exponential => (-r).exp(),
            Profile::Parabola => {
                if r < 1.0 {
                    2.0 * r
                } else {
                    0.0
                }
            }
            Profile::Tabulated(t) => t.slope(r),
            Profile::Custom { slope, .. } => slope(r),
        }
    }

    /// W evaluated at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.profile(x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// Radius beyond which the kernel is (numerically) zero: the support radius
    /// for compact kernels, the radius where |ω| drops below 1e-12 otherwise.
    pub fn effective_radius(&self) -> f64 {
        if self.support_radius.is_finite() {
            return self.support_radius;
        }
        let small = |r: f64| self.profile(r).abs() < TRUNCATION_LEVEL;
        let mut hi = 1.0;
        while !small(hi) {
            hi *= 2.0;
            if hi > 1e9 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if small(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    fn continuous_l1_norm(&self) -> f64 {
        let upper = if self.support_radius.is_finite() {
            self.support_radius
        } else {
            self.effective_radius().min(1e4) * 2.0
        };
        let radial = |r: f64| -> f64 {
            let w = self.profile(r).abs();
            match self.dimension {
                1 => 2.0 * w,
                _ => 2.0 * std::f64::consts::PI * r * w,
            }
        };
        let breaks = match &self.profile {
            Profile::Tabulated(t) => t.r.clone(),
            _ => vec![0.5 * upper.min(1.0), 1.0],
        };
        quadrature::integrate_with_breaks(radial, 0.0, upper, &breaks, 1e-12, 1e-15)
    }
}

/// Values `W(j·dx)·dxᵈ` for every lattice offset with `|j·dx| ≤ cap`, in a
/// fixed order shared by the stencil builder and [`kernel_l1_norm`].
pub(crate) fn lattice_weights(k: &Kernel, dx: f64, dims: usize, cap: f64) -> (usize, Vec<(isize, isize, f64)>) {
    let reach = (cap / dx).ceil() as usize;
    let cell = dx.powi(dims as i32);
    let reach_i = reach as isize;
    let mut out = Vec::new();
    let ys: Vec<isize> = if dims == 2 { (-reach_i..=reach_i).collect() } else { vec![0] };
    for &jy in &ys {
        for jx in -reach_i..=reach_i {
            let r = dx * ((jx * jx + jy * jy) as f64).sqrt();
            if r <= cap {
                out.push((jx, jy, k.profile(r) * cell));
            }
        }
    }
    (reach, out)
}

/// Discrete L¹ norm `Σ |W(x_j)| dxᵈ` on the convolution lattice.
pub fn kernel_l1_norm(k: &Kernel, dx: f64, radius_cap: f64) -> Result<f64> {
    if !(dx > 0.0) {
        return Err(Error::Domain(format!("dx must be positive, got {dx}")));
    }
    if dx >= 2.0 * k.support_radius() {
        return Err(Error::StencilTooCoarse {
            dx,
            support_radius: k.support_radius(),
        });
    }
    if k.kind() == KernelKind::Unbounded && radius_cap < MIN_UNBOUNDED_CAP {
        return Err(Error::Domain(format!(
            "radius cap {radius_cap} below {MIN_UNBOUNDED_CAP} for an unbounded kernel"
        )));
    }
    let cap = radius_cap.min(k.support_radius());
    let (_, weights) = lattice_weights(k, dx, k.dimension(), cap);
    Ok(weights.iter().map(|&(_, _, w)| w.abs()).sum())
}

/// Per-assumption verdicts from dense sampling of a kernel profile.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// W1: radial symmetry (structural) with finite C¹ samples.
    pub w1: bool,
    /// W2: finite sampled bound `max ω′(r) r^{d-1}` on (0, 1].
    pub w2: bool,
    pub c_omega: f64,
    /// ω non-decreasing on the samples.
    pub monotone: bool,
    /// ω ≤ 0 on the samples.
    pub sign: bool,
    /// W3, only evaluated for unbounded kernels.
    pub w3: Option<bool>,
    /// W4, only evaluated for compact kernels.
    pub w4: Option<bool>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.w1 && self.w2 && self.monotone && self.sign && self.w3.unwrap_or(true) && self.w4.unwrap_or(true)
    }
}

/// Checks the structural kernel assumptions on `samples` radii.
pub fn validate_kernel(k: &Kernel, samples: usize) -> Result<AssumptionReport> {
    if samples < 16 {
        return Err(Error::Domain(format!("need at least 16 samples, got {samples}")));
    }
    let r_max = match k.kind() {
        KernelKind::Compact => 2.0 * k.support_radius(),
        KernelKind::Unbounded => MIN_UNBOUNDED_CAP,
    };
    let radii: Vec<f64> = (1..=samples).map(|i| r_max * i as f64 / samples as f64).collect();
    let mut values = Vec::with_capacity(samples);
    let mut slopes = Vec::with_capacity(samples);
    for &r in &radii {
        let (v, s) = (k.profile(r), k.derivative(r));
        if !v.is_finite() {
            return Err(Error::InvalidKernel { radius: r });
        }
        values.push(v);
        slopes.push(s);
    }

    let w1 = slopes.iter().all(|s| s.is_finite());
    let monotone = values.windows(2).all(|p| p[1] >= p[0]) && slopes.iter().all(|&s| s >= 0.0);
    let sign = values.iter().all(|&v| v <= 0.0) && k.profile(0.0) <= 0.0;

    let d = k.dimension() as i32;
    let c_omega = radii
        .iter()
        .zip(&slopes)
        .filter(|(&r, _)| r <= 1.0)
        .map(|(&r, &s)| s * r.powi(d - 1))
        .fold(0.0f64, f64::max);
    let w2 = c_omega.is_finite();

    let (w3, w4) = match k.kind() {
        KernelKind::Unbounded => {
            let positive_slope = slopes.iter().all(|&s| s > 0.0);
            let negative = values.iter().all(|&v| v < 0.0);
            let decays = k.effective_radius().is_finite();
            (Some(positive_slope && negative && decays), None)
        }
        KernelKind::Compact => {
            let rs = k.support_radius();
            let vanish = radii
                .iter()
                .zip(values.iter().zip(&slopes))
                .filter(|(&r, _)| r >= rs)
                .all(|(_, (&v, &s))| v == 0.0 && s == 0.0);
            let inner_positive = radii
                .iter()
                .zip(&slopes)
                .filter(|(&r, _)| r < 0.5 * rs)
                .all(|(_, &s)| s > 0.0);
            (None, Some(vanish && inner_positive))
        }
    };

    Ok(AssumptionReport {
        w1,
        w2,
        c_omega,
        monotone,
        sign,
        w3,
        w4,
    })
}
