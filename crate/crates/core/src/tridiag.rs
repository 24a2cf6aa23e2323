//! Periodic (cyclic) tridiagonal solves.

/// Thomas algorithm for a plain tridiagonal system. `sub[0]` and `sup[n-1]` are ignored.
fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64], out: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    let mut beta = diag[0];
    out[0] = rhs[0] / beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        out[i] = (rhs[i] - sub[i] * out[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i + 1] * out[i + 1];
    }
}

/// Solves `A x = rhs` where row `i` of `A` is
/// `sub[i]·x[i-1] + diag[i]·x[i] + sup[i]·x[i+1]` with periodic wrap
/// (`sub[0]` couples to `x[n-1]`, `sup[n-1]` to `x[0]`).
///
/// Uses the Sherman–Morrison correction; `A` should be diagonally dominant
/// by rows or columns.
pub fn solve_cyclic(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert!(n >= 3, "cyclic solve needs at least 3 unknowns");
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    let corner_top = sub[0]; // A[0][n-1]
    let corner_bottom = sup[n - 1]; // A[n-1][0]
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= corner_bottom * corner_top / gamma;

    let mut scratch = vec![0.0; n];
    let mut x = vec![0.0; n];
    thomas(sub, &d, sup, rhs, &mut x, &mut scratch);

    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner_bottom;
    let mut z = vec![0.0; n];
    thomas(sub, &d, sup, &u, &mut z, &mut scratch);

    let fact = (x[0] + corner_top * x[n - 1] / gamma) / (1.0 + z[0] + corner_top * z[n - 1] / gamma);
    for (xi, zi) in x.iter_mut().zip(&z) {
        *xi -= fact * zi;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    #[test]
    fn matches_dense_elimination() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 5, 17, 64] {
            // column-dominant like the diffusion Jacobian: 1 + 2a g_i on the diagonal
            let g: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let a = 2.5;
            let sub: Vec<f64> = (0..n).map(|i| -a * g[(i + n - 1) % n]).collect();
            let sup: Vec<f64> = (0..n).map(|i| -a * g[(i + 1) % n]).collect();
            let diag: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * a * g[i]).collect();
            let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                dense[i][i] += diag[i];
                dense[i][(i + n - 1) % n] += sub[i];
                dense[i][(i + 1) % n] += sup[i];
            }
            let x = solve_cyclic(&sub, &diag, &sup, &rhs);
            let y = dense_solve(dense, rhs);
            for (p, q) in x.iter().zip(&y) {
                assert!((p - q).abs() < 1e-10, "n={n}: {p} vs {q}");
            }
        }
    }
}
