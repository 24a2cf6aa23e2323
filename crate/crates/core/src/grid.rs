//! Uniform periodic lattices in one and two dimensions.
//!
//! Cell `i` along an axis has its centre at `origin + i·dx`. Two-dimensional
//! data is stored row-major with `x` fastest: index `j·n₁ + i`.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Smallest number of cells allowed along an axis.
pub const MIN_CELLS: usize = 8;

/// Values in `[-NEGATIVE_SLACK, 0)` are treated as round-off.
pub const NEGATIVE_SLACK: f64 = 1e-12;

/// Relative support threshold used when none is given.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 1e-3;

/// Real values on a periodic lattice. Used for densities, potentials and
/// Euler–Lagrange fields alike.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    shape: Vec<usize>,
    dx: f64,
    origin: Vec<f64>,
    data: Vec<f64>,
}

/// A nonnegative density on the lattice.
pub type DensityField = Field;

impl Field {
    pub fn zeros(shape: &[usize], dx: f64, origin: &[f64]) -> Result<Field> {
        let n = shape.iter().product();
        Field::from_data(shape, dx, origin, vec![0.0; n])
    }

    pub fn from_data(shape: &[usize], dx: f64, origin: &[f64], data: Vec<f64>) -> Result<Field> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(Error::ShapeMismatch(format!("{} dimensions not supported", shape.len())));
        }
        if origin.len() != shape.len() {
            return Err(Error::ShapeMismatch("origin and shape lengths differ".into()));
        }
        if let Some(&n) = shape.iter().find(|&&n| n < MIN_CELLS) {
            return Err(Error::ShapeMismatch(format!("axis with {n} cells (minimum {MIN_CELLS})")));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::Domain(format!("dx must be positive, got {dx}")));
        }
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for shape {:?}",
                data.len(),
                shape
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at cell {i}")));
        }
        Ok(Field {
            shape: shape.to_vec(),
            dx,
            origin: origin.to_vec(),
            data,
        })
    }

    /// Lattice centred on zero: cell centres symmetric about the origin.
    pub fn centered(shape: &[usize], dx: f64) -> Result<Field> {
        let origin: Vec<f64> = shape.iter().map(|&n| -0.5 * (n as f64 - 1.0) * dx).collect();
        Field::zeros(shape, dx, &origin)
    }

    /// A new field on the same lattice.
    pub fn with_data(&self, data: Vec<f64>) -> Field {
        assert_eq!(data.len(), self.data.len());
        Field {
            shape: self.shape.clone(),
            dx: self.dx,
            origin: self.origin.clone(),
            data,
        }
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `dxᵈ`.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dims() as i32)
    }

    /// Periodic length of each axis.
    pub fn lengths(&self) -> Vec<f64> {
        self.shape.iter().map(|&n| n as f64 * self.dx).collect()
    }

    /// Measure of the whole periodic domain.
    pub fn domain_measure(&self) -> f64 {
        self.lengths().iter().product()
    }

    pub fn same_lattice(&self, other: &Field) -> bool {
        self.shape == other.shape && self.dx == other.dx
    }

    /// Axis indices `(i, j)` of a flat index (`j = 0` in 1D).
    pub fn unravel(&self, idx: usize) -> (usize, usize) {
        (idx % self.shape[0], idx / self.shape[0])
    }

    pub fn ravel(&self, i: usize, j: usize) -> usize {
        j * self.shape[0] + i
    }

    /// Coordinates of a cell centre.
    pub fn center(&self, idx: usize) -> Vec<f64> {
        let (i, j) = self.unravel(idx);
        let mut c = vec![self.origin[0] + i as f64 * self.dx];
        if self.dims() == 2 {
            c.push(self.origin[1] + j as f64 * self.dx);
        }
        c
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Checks the density invariants: finite values, nothing below the round-off slack.
    pub fn check_density(&self) -> Result<()> {
        for (cell, &v) in self.data.iter().enumerate() {
            if !v.is_finite() || v < -NEGATIVE_SLACK {
                return Err(Error::PositivityViolation { min: v, cell });
            }
        }
        Ok(())
    }

    /// Periodic translation by whole cells.
    pub fn shifted(&self, by: &[isize]) -> Field {
        let n1 = self.shape[0] as isize;
        let n2 = if self.dims() == 2 { self.shape[1] as isize } else { 1 };
        let s1 = by.first().copied().unwrap_or(0);
        let s2 = by.get(1).copied().unwrap_or(0);
        let mut data = vec![0.0; self.data.len()];
        for j in 0..n2 {
            for i in 0..n1 {
                let ti = (i + s1).rem_euclid(n1);
                let tj = (j + s2).rem_euclid(n2);
                data[(tj * n1 + ti) as usize] = self.data[(j * n1 + i) as usize];
            }
        }
        self.with_data(data)
    }

    /// Per-axis periodic separation between two cell centres, in cells.
    fn cell_offsets(&self, a: usize, b: usize) -> (usize, usize) {
        let (ai, aj) = self.unravel(a);
        let (bi, bj) = self.unravel(b);
        let wrap = |x: usize, y: usize, n: usize| {
            let d = x.abs_diff(y);
            d.min(n - d)
        };
        let dj = if self.dims() == 2 { wrap(aj, bj, self.shape[1]) } else { 0 };
        (wrap(ai, bi, self.shape[0]), dj)
    }

    /// Periodic distance between two cell centres.
    pub fn periodic_distance(&self, a: usize, b: usize) -> f64 {
        let (di, dj) = self.cell_offsets(a, b);
        self.dx * ((di * di + dj * dj) as f64).sqrt()
    }

    /// Periodic neighbours of a cell (2 in 1D, 4 in 2D).
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let (i, j) = self.unravel(idx);
        let n1 = self.shape[0];
        let mut out = vec![self.ravel((i + n1 - 1) % n1, j), self.ravel((i + 1) % n1, j)];
        if self.dims() == 2 {
            let n2 = self.shape[1];
            out.push(self.ravel(i, (j + n2 - 1) % n2));
            out.push(self.ravel(i, (j + 1) % n2));
        }
        out
    }
}

/// Conserved mass `Σ ρ dxᵈ`.
pub fn total_mass(f: &Field) -> f64 {
    f.data.iter().sum::<f64>() * f.cell_volume()
}

/// Discrete Lᵖ norm; `p = f64::INFINITY` gives the max norm.
pub fn lp_norm(f: &Field, p: f64) -> f64 {
    if p.is_infinite() {
        return f.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    assert!(p >= 1.0, "p must be at least 1");
    let sum: f64 = if p == 1.0 {
        f.data.iter().map(|v| v.abs()).sum()
    } else {
        f.data.iter().map(|v| v.abs().powf(p)).sum()
    };
    (sum * f.cell_volume()).powf(1.0 / p)
}

/// Connected components of `{ρ > threshold}` under periodic 2-/4-adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportComponents {
    pub threshold: f64,
    /// Flat cell indices of each component, sorted ascending.
    pub components: Vec<Vec<usize>>,
}

impl SupportComponents {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

pub fn support_components(f: &Field, threshold: f64) -> SupportComponents {
    assert!(threshold >= 0.0);
    let n = f.len();
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX || f.data[start] <= threshold {
            continue;
        }
        let id = components.len();
        let mut cells = Vec::new();
        label[start] = id;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            cells.push(c);
            for nb in f.neighbors(c) {
                if label[nb] == usize::MAX && f.data[nb] > threshold {
                    label[nb] = id;
                    queue.push_back(nb);
                }
            }
        }
        cells.sort_unstable();
        components.push(cells);
    }
    // leftmost, then bottom-most
    components.sort_by_key(|cells| {
        cells
            .iter()
            .map(|&c| {
                let (i, j) = f.unravel(c);
                (i, j)
            })
            .min()
            .unwrap()
    });
    SupportComponents { threshold, components }
}

/// Components with the relative default threshold `1e-3 · max ρ`.
pub fn default_support_components(f: &Field) -> SupportComponents {
    support_components(f, DEFAULT_RELATIVE_THRESHOLD * f.max().max(0.0))
}

/// Minimum periodic distance between cell centres of two components.
pub fn component_gap(a: &[usize], b: &[usize], f: &Field) -> Result<f64> {
    if a == b {
        return Err(Error::Domain("gap of a component with itself".into()));
    }
    let mut best = usize::MAX;
    for &x in a {
        for &y in b {
            let (di, dj) = f.cell_offsets(x, y);
            best = best.min(di * di + dj * dj);
        }
    }
    Ok(f.dx * (best as f64).sqrt())
}

/// Largest periodic distance between two cells of a component.
pub fn component_diameter(c: &[usize], f: &Field) -> f64 {
    let mut best = 0usize;
    for (k, &x) in c.iter().enumerate() {
        for &y in &c[k + 1..] {
            let (di, dj) = f.cell_offsets(x, y);
            best = best.max(di * di + dj * dj);
        }
    }
    f.dx * (best as f64).sqrt()
}

const CSV_HEADER: &str = "# dims,shape,dx,origin";

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Serialises a field: the header line, a metadata line, then one value per
/// line (1D) or one comma-separated row per `y` index (2D).
pub fn to_csv(f: &Field) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_HEADER}").unwrap();
    writeln!(s, "{},{},{},{}", f.dims(), join(&f.shape), f.dx, join(&f.origin)).unwrap();
    if f.dims() == 1 {
        for v in &f.data {
            writeln!(s, "{v}").unwrap();
        }
    } else {
        for row in f.data.chunks(f.shape[0]) {
            writeln!(s, "{}", row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")).unwrap();
        }
    }
    s
}

pub fn write_csv(f: &Field, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(f))?;
    Ok(())
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Field> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == CSV_HEADER => {}
        Some((n, _)) => return Err(err(n + 1, format!("expected header `{CSV_HEADER}`"))),
        None => return Err(err(1, "empty file".into())),
    }
    let (meta_line, meta) = lines.next().ok_or_else(|| err(2, "missing metadata line".into()))?;
    let cols: Vec<&str> = meta.trim().split(',').collect();
    if cols.len() != 4 {
        return Err(err(meta_line + 1, "metadata needs dims,shape,dx,origin".into()));
    }
    let bad = |e: String| err(meta_line + 1, e);
    let dims: usize = cols[0].parse().map_err(|e| bad(format!("dims: {e}")))?;
    let shape: Vec<usize> = cols[1]
        .split(';')
        .map(|s| s.parse().map_err(|e| bad(format!("shape: {e}"))))
        .collect::<Result<_>>()?;
    let dx: f64 = cols[2].parse().map_err(|e| bad(format!("dx: {e}")))?;
    let origin: Vec<f64> = cols[3]
        .split(';')
        .map(|s| s.parse().map_err(|e| bad(format!("origin: {e}"))))
        .collect::<Result<_>>()?;
    if shape.len() != dims {
        return Err(bad(format!("{dims} dims but shape {shape:?}")));
    }
    let mut data = Vec::with_capacity(shape.iter().product());
    for (n, line) in lines {
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| err(n + 1, format!("value `{tok}`: {e}")))?;
            data.push(v);
        }
    }
    Field::from_data(&shape, dx, &origin, data)
}

pub fn read_csv(path: &Path) -> Result<Field> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, path)
}

/// Binary 8-bit grayscale PGM of a 2D field, scaled by its maximum.
/// Row 0 of the image is the largest `y` index.
pub fn write_pgm(f: &Field, path: &Path) -> Result<()> {
    if f.dims() != 2 {
        return Err(Error::ShapeMismatch("PGM export needs a 2D field".into()));
    }
    let (w, h) = (f.shape[0], f.shape[1]);
    let max = f.max();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for j in (0..h).rev() {
        for i in 0..w {
            let v = (f.data[j * w + i].max(0.0) * scale).round().min(255.0);
            bytes.push(v as u8);
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}
