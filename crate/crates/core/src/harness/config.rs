//! Experiment configuration: TOML sections, defaults and validation.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::convolution::{build_stencil, KernelStencil};
use crate::error::{Error, Result};
use crate::integrator::SimParams;
use crate::kernels::{builtin_kernel, Kernel, KernelKind};

/// Default domain side for one-dimensional runs, `[−40, 40]`.
pub const DEFAULT_LENGTH_1D: f64 = 80.0;
/// Default domain side for two-dimensional runs, `[−20, 20]²`.
pub const DEFAULT_LENGTH_2D: f64 = 40.0;

/// Compact kernels need a domain at least this many effective radii wide.
const MIN_DOMAIN_RADII: f64 = 4.0;

/// Relative slack when checking that `dx` divides the domain length.
const DIVISIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    /// `bump`, `exponential`, `parabola` or `custom`.
    pub name: String,
    /// Two-column `(r, ω)` table for `custom`.
    pub path: Option<PathBuf>,
    /// Stencil radius; defaults to the kernel's effective radius.
    pub truncation: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub m: f64,
    #[serde(default = "one")]
    pub epsilon: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "one_usize")]
    pub dims: usize,
    #[serde(default = "default_dx")]
    pub dx: f64,
    /// Side of the periodic box; defaults by dimension.
    pub domain_length: Option<f64>,
    /// Requested time step; defaults to `dx`.
    pub dt: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dims: 1,
            dx: default_dx(),
            domain_length: None,
            dt: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    /// `χ_{[−a, a]ᵈ}` scaled to mass `M`.
    Box,
    /// Union of equal-height boxes of half-width `a`.
    Boxes,
    /// Seeded random occupancy with uniform heights.
    Random,
    /// Uniform density.
    Constant,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub mass: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Box centres for `boxes`; one coordinate per axis.
    pub centers: Option<Vec<Vec<f64>>>,
    /// Evenly spaced boxes per axis for `boxes` without explicit centres.
    pub count: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Probability that a cell is occupied for `random`.
    #[serde(default = "one")]
    pub fraction: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StoppingSection {
    #[serde(default = "default_steady_tol")]
    pub steady_tol: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for StoppingSection {
    fn default() -> Self {
        StoppingSection {
            steady_tol: default_steady_tol(),
            max_steps: default_max_steps(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Field snapshot cadence in steps; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_every: usize,
    /// Trajectory row cadence in steps.
    #[serde(default = "one_usize")]
    pub trace_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_dir(),
            snapshot_every: 0,
            trace_every: 1,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `(m, M)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Kernels crossed with every point; defaults to `[kernel].name`.
    pub kernels: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kernel: KernelSection,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub stopping: StoppingSection,
    #[serde(default)]
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_dx() -> f64 {
    0.4
}

fn default_half_width() -> f64 {
    10.0
}

fn default_steady_tol() -> f64 {
    1e-7
}

fn default_max_steps() -> usize {
    1_000_000
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Line number (1-based) of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    /// Parses and validates a TOML document; `path` is used in messages and
    /// to resolve a relative custom-kernel path.
    pub fn parse(text: &str, path: &Path) -> Result<ExperimentConfig> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        if let (Some(table), Some(dir)) = (&cfg.kernel.path, path.parent()) {
            if table.is_relative() {
                cfg.kernel.path = Some(dir.join(table));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::parse(&text, path)
    }

    pub fn domain_length(&self) -> f64 {
        self.grid.domain_length.unwrap_or(if self.grid.dims == 2 {
            DEFAULT_LENGTH_2D
        } else {
            DEFAULT_LENGTH_1D
        })
    }

    /// Cells per axis.
    pub fn cells(&self) -> usize {
        (self.domain_length() / self.grid.dx).round() as usize
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt.unwrap_or(self.grid.dx)
    }

    /// Kernel named by the config, in the configured dimension.
    pub fn kernel(&self) -> Result<Kernel> {
        self.kernel_named(&self.kernel.name)
    }

    pub fn kernel_named(&self, name: &str) -> Result<Kernel> {
        let k = if name == "custom" {
            let path = self
                .kernel
                .path
                .as_ref()
                .ok_or_else(|| Error::config("kernel.path", "required for the custom kernel"))?;
            Kernel::from_table_file(path)?
        } else {
            builtin_kernel(name).ok_or_else(|| {
                Error::config(
                    "kernel.name",
                    format!("unknown kernel {name:?}; expected bump, exponential, parabola or custom"),
                )
            })?
        };
        Ok(k.with_dimension(self.grid.dims))
    }

    pub fn truncation(&self, k: &Kernel) -> f64 {
        self.kernel.truncation.unwrap_or_else(|| k.effective_radius())
    }

    pub fn stencil(&self, k: &Kernel) -> Result<KernelStencil> {
        build_stencil(k, self.grid.dx, self.grid.dims, self.truncation(k))
    }

    pub fn sim_params(&self, m: f64) -> SimParams {
        SimParams {
            epsilon: self.model.epsilon,
            dt: self.dt(),
            steady_tol: self.stopping.steady_tol,
            max_steps: self.stopping.max_steps,
            ..SimParams::new(m, self.grid.dx)
        }
    }

    /// Copy with `m`, `M` and the kernel name replaced (one sweep point).
    pub fn with_point(&self, m: f64, mass: f64, kernel: &str) -> ExperimentConfig {
        let mut cfg = self.clone();
        cfg.model.m = m;
        cfg.initial.mass = mass;
        cfg.kernel.name = kernel.to_string();
        cfg.sweep = None;
        cfg
    }

    /// `(kernel, m, M)` for every sweep row, kernels outermost.
    pub fn sweep_points(&self) -> Result<Vec<(String, f64, f64)>> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::config("sweep", "missing [sweep] section"))?;
        if sweep.points.is_empty() {
            return Err(Error::config("sweep.points", "sweep list is empty"));
        }
        let kernels = sweep.kernels.clone().unwrap_or_else(|| vec![self.kernel.name.clone()]);
        if kernels.is_empty() {
            return Err(Error::config("sweep.kernels", "kernel list is empty"));
        }
        Ok(kernels
            .iter()
            .flat_map(|k| sweep.points.iter().map(move |&(m, mass)| (k.clone(), m, mass)))
            .collect())
    }

    /// Checks every field and names the first offending one.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.dims != 1 && g.dims != 2 {
            return Err(Error::config("grid.dims", format!("must be 1 or 2, got {}", g.dims)));
        }
        if !(g.dx > 0.0 && g.dx.is_finite()) {
            return Err(Error::config("grid.dx", format!("must be positive, got {}", g.dx)));
        }
        let length = self.domain_length();
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::config("grid.domain_length", format!("must be positive, got {length}")));
        }
        let ratio = length / g.dx;
        if (ratio - ratio.round()).abs() > DIVISIBILITY_TOL * ratio {
            return Err(Error::config(
                "grid.domain_length",
                format!("dx = {} does not divide {length}", g.dx),
            ));
        }
        if !(self.dt() > 0.0) {
            return Err(Error::config("grid.dt", format!("must be positive, got {}", self.dt())));
        }
        if !(self.model.m > 1.0) {
            return Err(Error::config("model.m", format!("must exceed 1, got {}", self.model.m)));
        }
        if !(self.model.epsilon > 0.0) {
            return Err(Error::config(
                "model.epsilon",
                format!("must be positive, got {}", self.model.epsilon),
            ));
        }
        if !(self.stopping.steady_tol > 0.0) {
            return Err(Error::config("stopping.steady_tol", "must be positive"));
        }
        if self.stopping.max_steps == 0 {
            return Err(Error::config("stopping.max_steps", "must be positive"));
        }
        if let Some(t) = self.kernel.truncation {
            if !(t > 0.0) {
                return Err(Error::config("kernel.truncation", format!("must be positive, got {t}")));
            }
        }
        self.validate_initial(length)?;
        let names = match &self.sweep {
            Some(s) => {
                for &(m, mass) in &s.points {
                    if !(m > 1.0) {
                        return Err(Error::config("sweep.points", format!("m must exceed 1, got {m}")));
                    }
                    if !(mass > 0.0) {
                        return Err(Error::config("sweep.points", format!("mass must be positive, got {mass}")));
                    }
                }
                self.sweep_points()?;
                s.kernels.clone().unwrap_or_else(|| vec![self.kernel.name.clone()])
            }
            None => vec![self.kernel.name.clone()],
        };
        for name in names {
            self.validate_kernel(&name, length)?;
        }
        Ok(())
    }

    fn validate_initial(&self, length: f64) -> Result<()> {
        let init = &self.initial;
        if !(init.mass > 0.0 && init.mass.is_finite()) {
            return Err(Error::config("initial.mass", format!("must be positive, got {}", init.mass)));
        }
        match init.kind {
            InitialKind::Box | InitialKind::Boxes => {
                if !(init.half_width > 0.0) {
                    return Err(Error::config("initial.half_width", "must be positive"));
                }
                if 2.0 * init.half_width > length {
                    return Err(Error::config(
                        "initial.half_width",
                        format!("box of width {} exceeds the domain length {length}", 2.0 * init.half_width),
                    ));
                }
                if init.half_width < 0.5 * self.grid.dx {
                    return Err(Error::config("initial.half_width", "box covers no cell"));
                }
            }
            InitialKind::Random => {
                if !(init.fraction > 0.0 && init.fraction <= 1.0) {
                    return Err(Error::config("initial.fraction", "must lie in (0, 1]"));
                }
            }
            InitialKind::Constant => {}
        }
        if init.kind == InitialKind::Boxes {
            match (&init.centers, init.count) {
                (Some(centers), _) => {
                    if centers.is_empty() {
                        return Err(Error::config("initial.centers", "list is empty"));
                    }
                    if let Some(c) = centers.iter().find(|c| c.len() != self.grid.dims) {
                        return Err(Error::config(
                            "initial.centers",
                            format!("centre {c:?} needs {} coordinates", self.grid.dims),
                        ));
                    }
                }
                (None, Some(0)) => return Err(Error::config("initial.count", "must be positive")),
                (None, Some(_)) => {}
                (None, None) => return Err(Error::config("initial.centers", "boxes needs centers or count")),
            }
        }
        Ok(())
    }

    fn validate_kernel(&self, name: &str, length: f64) -> Result<()> {
        let k = self.kernel_named(name)?;
        let reach = self.truncation(&k);
        if k.kind() == KernelKind::Compact && length < MIN_DOMAIN_RADII * reach {
            return Err(Error::config(
                "grid.domain_length",
                format!("{length} is below {MIN_DOMAIN_RADII} kernel radii ({reach}) for {name}"),
            ));
        }
        let side = 2 * (reach / self.grid.dx).ceil() as usize + 1;
        if side > self.cells() {
            return Err(Error::config(
                "kernel.truncation",
                format!("stencil of {side} cells is wider than the {}-cell domain", self.cells()),
            ));
        }
        Ok(())
    }
}
