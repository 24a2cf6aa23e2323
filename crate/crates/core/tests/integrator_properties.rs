//! Time-stepping properties: invariants, an independent dense solve of the
//! implicit equations, order in time and dimensional consistency.

use aggdiff::convolution::{build_stencil, KernelStencil};
use aggdiff::grid::{total_mass, Field};
use aggdiff::integrator::{run_to_stationary, step, SimParams};
use aggdiff::kernels::{make_bump_kernel, make_parabola_kernel};
use proptest::prelude::*;

fn line(values: &[f64], dx: f64) -> Field {
    Field::centered(&[values.len()], dx).unwrap().with_data(values.to_vec())
}

/// Residual of the implicit pure-diffusion step written out directly:
/// `ρ_i − ρⁿ_i + (dt/dx)(F_{i+1/2} − F_{i−1/2})`, `F = u⁺ρ_i + u⁻ρ_{i+1}`,
/// `u = −(ξ_{i+1} − ξ_i)/dx`, `ξ = mε/(m−1)·ρ^{m−1}`.
fn diffusion_residual(rho: &[f64], old: &[f64], dt: f64, dx: f64, m: f64, eps: f64) -> Vec<f64> {
    let n = rho.len();
    let xi = |r: f64| m * eps / (m - 1.0) * r.max(0.0).powf(m - 1.0);
    let flux = |i: usize| {
        let j = (i + 1) % n;
        let u = -(xi(rho[j]) - xi(rho[i])) / dx;
        if u > 0.0 {
            u * rho[i]
        } else {
            u * rho[j]
        }
    };
    (0..n)
        .map(|i| rho[i] - old[i] + dt / dx * (flux(i) - flux((i + n - 1) % n)))
        .collect()
}

/// Gaussian elimination with partial pivoting on a dense copy.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}

/// Newton on the dense system with a central-difference Jacobian.
fn dense_newton_step(old: &[f64], dt: f64, dx: f64, m: f64) -> Vec<f64> {
    let n = old.len();
    let mut rho = old.to_vec();
    for _ in 0..100 {
        let r = diffusion_residual(&rho, old, dt, dx, m, 1.0);
        if r.iter().fold(0.0f64, |a, v| a.max(v.abs())) < 1e-13 {
            break;
        }
        let mut jac = vec![vec![0.0; n]; n];
        for k in 0..n {
            let h = 1e-7 * rho[k].abs().max(1e-3);
            let mut plus = rho.clone();
            let mut minus = rho.clone();
            plus[k] += h;
            minus[k] -= h;
            let rp = diffusion_residual(&plus, old, dt, dx, m, 1.0);
            let rm = diffusion_residual(&minus, old, dt, dx, m, 1.0);
            for i in 0..n {
                jac[i][k] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let delta = dense_solve(jac, r.iter().map(|v| -v).collect());
        for (x, d) in rho.iter_mut().zip(&delta) {
            *x += d;
        }
    }
    rho
}

#[test]
fn pure_diffusion_step_matches_dense_oracle() {
    let dx = 0.25;
    for n in [16usize, 33, 64] {
        let mut values = vec![0.0; n];
        values[n / 2] = 1.0 / dx;
        let f = line(&values, dx);
        let p = SimParams::new(2.0, dx);
        let (g, report) = step(&f, &KernelStencil::zero(dx, 1), &p).unwrap();
        let oracle = dense_newton_step(&values, p.dt, dx, 2.0);
        for (a, b) in g.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "n = {n}: {a} vs {b}");
        }
        assert!(report.mass_drift.abs() < 1e-12);
        assert!(g.max() < f.max());
    }
}

#[test]
fn smooth_diffusion_step_matches_dense_oracle() {
    let dx = 0.2;
    let values: Vec<f64> = (0..40).map(|i| 1.0 + 0.5 * (i as f64 * 0.3).sin().powi(2)).collect();
    let p = SimParams::new(3.0, dx);
    let (g, _) = step(&line(&values, dx), &KernelStencil::zero(dx, 1), &p).unwrap();
    let oracle = dense_newton_step(&values, p.dt, dx, 3.0);
    for (a, b) in g.data().iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9);
    }
}

fn evolve(f: &Field, s: &KernelStencil, p: &SimParams, steps: usize) -> Field {
    (0..steps).fold(f.clone(), |g, _| step(&g, s, p).unwrap().0)
}

#[test]
fn first_order_in_time() {
    let (n, dx) = (64usize, 0.125);
    let length = n as f64 * dx;
    let values: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * (i as f64 + 0.5) * dx / length).cos())
        .collect();
    let f = line(&values, dx);
    let s = KernelStencil::zero(dx, 1);
    let horizon = 0.5;
    let run = |steps: usize| {
        let mut p = SimParams::new(2.0, dx);
        p.dt = horizon / steps as f64;
        evolve(&f, &s, &p, steps)
    };
    let reference = run(1024);
    let error = |g: &Field| {
        g.data()
            .iter()
            .zip(reference.data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let errors: Vec<f64> = [8usize, 16, 32].iter().map(|&k| error(&run(k))).collect();
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.6..=2.4).contains(&ratio), "errors {errors:?}");
    }
}

#[test]
fn y_invariant_plane_matches_line() {
    let dx = 0.4;
    let (n1, n2) = (40usize, 12usize);
    let k = make_bump_kernel().with_dimension(2);
    let s2 = build_stencil(&k, dx, 2, 1.0).unwrap();
    let s1 = s2.reduce_to_1d();
    let profile: Vec<f64> = (0..n1).map(|i| if (14..26).contains(&i) { 2.0 + 0.1 * (i % 3) as f64 } else { 0.0 }).collect();
    let f1 = line(&profile, dx);
    let plane = Field::centered(&[n1, n2], dx).unwrap();
    let data: Vec<f64> = (0..n1 * n2).map(|idx| profile[idx % n1]).collect();
    let f2 = plane.with_data(data);
    let p = SimParams::new(3.0, dx);
    let g1 = evolve(&f1, &s1, &p, 10);
    let g2 = evolve(&f2, &s2, &p, 10);
    for j in 0..n2 {
        for i in 0..n1 {
            let a = g2.data()[g2.ravel(i, j)];
            assert!((a - g1.data()[i]).abs() < 1e-6, "({i}, {j})");
        }
    }
}

#[test]
fn pure_diffusion_converges_to_constant() {
    let dx = 0.4;
    let values: Vec<f64> = (0..50).map(|i| if i % 7 < 3 { 1.0 + (i % 5) as f64 } else { 0.0 }).collect();
    let f = line(&values, dx);
    let mut p = SimParams::new(3.0, dx);
    p.max_steps = 20_000;
    let (g, traj) = run_to_stationary(&f, &KernelStencil::zero(dx, 1), &p).unwrap();
    let mean = total_mass(&f) / (50.0 * dx);
    assert!(traj.converged);
    assert!((g.max() - mean).abs() <= 0.01 * mean);
    assert!((g.min() - mean).abs() <= 0.01 * mean);
}

fn profile() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..4.0], 48)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn step_invariants(values in profile(), m in 1.5f64..4.0, which in 0u8..2, dims in 1usize..=2) {
        prop_assume!(values.iter().any(|&v| v > 0.0));
        let dx = 0.4;
        let k = if which == 0 { make_bump_kernel() } else { make_parabola_kernel() }.with_dimension(dims);
        let s = build_stencil(&k, dx, dims, 1.0).unwrap();
        let f = if dims == 1 {
            line(&values, dx)
        } else {
            let plane = Field::centered(&[24, 24], dx).unwrap();
            let n = plane.len();
            plane.with_data(values.iter().cycle().take(n).copied().collect())
        };
        let p = SimParams::new(m, dx);
        let mass = total_mass(&f);
        let mut g = f;
        let mut e = aggdiff::energy::energy(&g, &s, &p).total;
        for _ in 0..15 {
            let (next, r) = step(&g, &s, &p).unwrap();
            prop_assert!(r.mass_drift.abs() <= 1e-10 * mass);
            prop_assert!((total_mass(&next) - mass).abs() <= 1e-10 * mass);
            prop_assert!(r.min_value >= -1e-12);
            prop_assert!(next.min() >= 0.0);
            prop_assert!(r.energy <= e + 1e-8 * e.abs());
            prop_assert!(r.newton_iters <= p.newton_max_iter);
            e = r.energy;
            g = next;
        }
    }
}
