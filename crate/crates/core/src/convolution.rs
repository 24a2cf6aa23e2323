//! Periodic lattice convolution `W ∗ ρ` and the face velocity `u = -∇(W ∗ ρ)`.
//!
//! The direct sum is the reference path; the FFT path is used for axes longer
//! than [`FFT_THRESHOLD`] cells and must agree with it to round-off.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::kernels::{self, Kernel, KernelKind};

/// Axis length above which [`convolve`] switches to the FFT path.
pub const FFT_THRESHOLD: usize = 256;

/// Midpoint-quadrature weights `W(j·dx)·dxᵈ` on integer offsets `|j| ≤ reach`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelStencil {
    dims: usize,
    dx: f64,
    reach: usize,
    /// Dense `(2·reach + 1)ᵈ` block, x fastest.
    weights: Vec<f64>,
}

/// Builds the stencil of `k` for cell size `dx`, truncated at radius `truncation`.
pub fn build_stencil(k: &Kernel, dx: f64, dims: usize, truncation: f64) -> Result<KernelStencil> {
    if !(dx > 0.0) {
        return Err(Error::Domain(format!("dx must be positive, got {dx}")));
    }
    if dims != 1 && dims != 2 {
        return Err(Error::Domain(format!("{dims} dimensions not supported")));
    }
    if dx >= 2.0 * k.support_radius() {
        return Err(Error::StencilTooCoarse {
            dx,
            support_radius: k.support_radius(),
        });
    }
    if k.kind() == KernelKind::Compact && truncation < k.support_radius() {
        return Err(Error::Domain(format!(
            "truncation {truncation} inside the support radius {}",
            k.support_radius()
        )));
    }
    if !truncation.is_finite() || truncation <= 0.0 {
        return Err(Error::Domain(format!("invalid truncation radius {truncation}")));
    }
    let (reach, samples) = kernels::lattice_weights(k, dx, dims, truncation);
    let side = 2 * reach + 1;
    let mut weights = vec![0.0; side.pow(dims as u32)];
    for (jx, jy, w) in samples {
        let ix = (jx + reach as isize) as usize;
        let iy = if dims == 2 { (jy + reach as isize) as usize } else { 0 };
        weights[iy * side + ix] = w;
    }
    Ok(KernelStencil { dims, dx, reach, weights })
}

/// Stencil for `k` truncated at its effective radius.
pub fn default_stencil(k: &Kernel, dx: f64, dims: usize) -> Result<KernelStencil> {
    build_stencil(k, dx, dims, k.effective_radius())
}

impl KernelStencil {
    /// All-zero stencil: no interaction.
    pub fn zero(dx: f64, dims: usize) -> KernelStencil {
        KernelStencil {
            dims,
            dx,
            reach: 0,
            weights: vec![0.0],
        }
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn reach(&self) -> usize {
        self.reach
    }

    fn side(&self) -> usize {
        2 * self.reach + 1
    }

    /// Weight at offset `(jx, jy)`; zero outside the reach.
    pub fn weight(&self, jx: isize, jy: isize) -> f64 {
        let r = self.reach as isize;
        if jx.abs() > r || jy.abs() > r || (self.dims == 1 && jy != 0) {
            return 0.0;
        }
        let iy = if self.dims == 2 { (jy + r) as usize } else { 0 };
        self.weights[iy * self.side() + (jx + r) as usize]
    }

    /// Sum of all weights (equals `-‖W‖₁` on this lattice).
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Discrete L¹ norm of the stencil.
    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// Collapses a 2D stencil onto the x axis (sums over y offsets). Convolving
    /// a y-invariant field with the 2D stencil equals convolving a slice with this.
    pub fn reduce_to_1d(&self) -> KernelStencil {
        if self.dims == 1 {
            return self.clone();
        }
        let side = self.side();
        let mut weights = vec![0.0; side];
        for row in self.weights.chunks(side) {
            for (acc, w) in weights.iter_mut().zip(row) {
                *acc += w;
            }
        }
        KernelStencil {
            dims: 1,
            dx: self.dx,
            reach: self.reach,
            weights,
        }
    }

    fn nonzero(&self) -> Vec<(isize, isize, f64)> {
        let r = self.reach as isize;
        let side = self.side();
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(k, &w)| ((k % side) as isize - r, (k / side) as isize - r, w))
            .collect()
    }

    /// Errors unless the stencil fits inside the field without wrapping onto itself.
    pub fn check_fits(&self, f: &Field) -> Result<()> {
        if f.dims() != self.dims {
            return Err(Error::ShapeMismatch(format!(
                "{}D stencil applied to {}D field",
                self.dims,
                f.dims()
            )));
        }
        if (f.dx() - self.dx).abs() > 1e-12 * self.dx {
            return Err(Error::ShapeMismatch(format!(
                "stencil dx {} differs from field dx {}",
                self.dx,
                f.dx()
            )));
        }
        for &n in f.shape() {
            if self.side() > n {
                return Err(Error::StencilTooWide { width: self.side(), cells: n });
            }
        }
        Ok(())
    }
}

/// `V = W ∗ f` on the periodic lattice. Uses the FFT path on long axes.
pub fn convolve(s: &KernelStencil, f: &Field) -> Result<Field> {
    if f.shape().iter().any(|&n| n > FFT_THRESHOLD) {
        convolve_fft(s, f)
    } else {
        convolve_direct(s, f)
    }
}

/// Reference direct sum, fixed summation order per output cell.
pub fn convolve_direct(s: &KernelStencil, f: &Field) -> Result<Field> {
    s.check_fits(f)?;
    let taps = s.nonzero();
    let n1 = f.shape()[0] as isize;
    let n2 = if f.dims() == 2 { f.shape()[1] as isize } else { 1 };
    let src = f.data();
    let mut out = vec![0.0; f.len()];
    out.par_chunks_mut(n1 as usize).enumerate().for_each(|(j, row)| {
        let j = j as isize;
        for (i, v) in row.iter_mut().enumerate() {
            let i = i as isize;
            let mut acc = 0.0;
            for &(jx, jy, w) in &taps {
                let si = (i - jx).rem_euclid(n1);
                let sj = (j - jy).rem_euclid(n2);
                acc += w * src[(sj * n1 + si) as usize];
            }
            *v = acc;
        }
    });
    Ok(f.with_data(out))
}

fn fft_2d(buf: &mut [Complex<f64>], n1: usize, n2: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let row = if inverse { planner.plan_fft_inverse(n1) } else { planner.plan_fft_forward(n1) };
    for chunk in buf.chunks_mut(n1) {
        row.process(chunk);
    }
    if n2 > 1 {
        let col = if inverse { planner.plan_fft_inverse(n2) } else { planner.plan_fft_forward(n2) };
        let mut tmp = vec![Complex::new(0.0, 0.0); n2];
        for i in 0..n1 {
            for j in 0..n2 {
                tmp[j] = buf[j * n1 + i];
            }
            col.process(&mut tmp);
            for j in 0..n2 {
                buf[j * n1 + i] = tmp[j];
            }
        }
    }
}

/// Transform path: circular convolution via FFT.
pub fn convolve_fft(s: &KernelStencil, f: &Field) -> Result<Field> {
    s.check_fits(f)?;
    let n1 = f.shape()[0];
    let n2 = if f.dims() == 2 { f.shape()[1] } else { 1 };
    let n = n1 * n2;
    let mut kern = vec![Complex::new(0.0, 0.0); n];
    for (jx, jy, w) in s.nonzero() {
        let i = jx.rem_euclid(n1 as isize) as usize;
        let j = jy.rem_euclid(n2 as isize) as usize;
        kern[j * n1 + i] += Complex::new(w, 0.0);
    }
    let mut data: Vec<Complex<f64>> = f.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    fft_2d(&mut kern, n1, n2, false, &mut planner);
    fft_2d(&mut data, n1, n2, false, &mut planner);
    for (d, k) in data.iter_mut().zip(&kern) {
        *d *= k;
    }
    fft_2d(&mut data, n1, n2, true, &mut planner);
    let scale = 1.0 / n as f64;
    Ok(f.with_data(data.iter().map(|c| c.re * scale).collect()))
}

/// Face velocity `u_{i+1/2} = -(V_{i+1} - V_i)/dx` along `axis`, stored at cell `i`.
pub fn face_velocity(v: &Field, axis: usize) -> Field {
    assert!(axis < v.dims());
    let n1 = v.shape()[0];
    let n2 = if v.dims() == 2 { v.shape()[1] } else { 1 };
    let dx = v.dx();
    let d = v.data();
    let mut out = vec![0.0; v.len()];
    for j in 0..n2 {
        for i in 0..n1 {
            let here = j * n1 + i;
            let next = if axis == 0 { j * n1 + (i + 1) % n1 } else { ((j + 1) % n2) * n1 + i };
            out[here] = -(d[next] - d[here]) / dx;
        }
    }
    v.with_data(out)
}
