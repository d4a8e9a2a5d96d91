//! Newton-system solvers for the singular Hessian.
//!
//! The Hessian of a connected design is positive semidefinite with kernel
//! spanned by the all-ones vector. Adding `c * 1 1^T / n` makes it positive
//! definite without changing the solution for right-hand sides orthogonal to
//! the kernel, which every gradient is.

use nalgebra::DVector;

use crate::model::{Hessian, DENSE_LIMIT};

pub(crate) struct CgOutcome {
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradient on `(H + c 1 1^T / n) x = b`.
pub(crate) fn solve_cg(
    h: &Hessian<'_>,
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let diag = h.diagonal();
    let shift = diag.iter().sum::<f64>() / n as f64;
    let shift_n = shift / n as f64;
    let precond: Vec<f64> = diag.iter().map(|&d| 1.0 / (d + shift_n).max(1e-300)).collect();

    let apply = |v: &[f64], out: &mut [f64]| {
        h.apply(v, out);
        let m = v.iter().sum::<f64>() * shift_n;
        out.iter_mut().for_each(|o| *o += m);
    };

    x.iter_mut().for_each(|v| *v = 0.0);
    let mut residual = b.to_vec();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return CgOutcome { converged: true };
    }
    let mut z: Vec<f64> = residual.iter().zip(&precond).map(|(r, m)| r * m).collect();
    let mut dir = z.clone();
    let mut rz = dot(&residual, &z);
    let mut hd = vec![0.0; n];
    for _ in 0..max_iter {
        apply(&dir, &mut hd);
        let curvature = dot(&dir, &hd);
        if curvature <= 0.0 || !curvature.is_finite() {
            return CgOutcome { converged: false };
        }
        let step = rz / curvature;
        for k in 0..n {
            x[k] += step * dir[k];
            residual[k] -= step * hd[k];
        }
        if norm(&residual) <= rel_tol * b_norm {
            return CgOutcome { converged: true };
        }
        for k in 0..n {
            z[k] = residual[k] * precond[k];
        }
        let rz_next = dot(&residual, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..n {
            dir[k] = z[k] + beta * dir[k];
        }
    }
    CgOutcome { converged: false }
}

/// Dense Cholesky solve on the reduced system with the first coordinate
/// fixed at zero. Returns `None` when the matrix is too large or not
/// numerically positive definite.
pub(crate) fn solve_dense(h: &Hessian<'_>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    if n > DENSE_LIMIT || n < 2 {
        return None;
    }
    let v = h.reduced_dense().ok()?;
    let chol = v.cholesky()?;
    let rhs = DVector::from_column_slice(&b[1..]);
    let sol = chol.solve(&rhs);
    let mut x = Vec::with_capacity(n);
    x.push(0.0);
    x.extend(sol.iter().copied());
    Some(x)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::sample_design;
    use crate::model::hessian;

    #[test]
    fn cg_and_dense_agree_up_to_shift() {
        let d = sample_design(30, 25, 0.3, 9).unwrap();
        let theta: Vec<f64> = (0..55).map(|k| ((k * 7) % 11) as f64 * 0.1 - 0.5).collect();
        let h = hessian(&d, &theta).unwrap();
        let mut b: Vec<f64> = (0..55).map(|k| (k as f64).cos()).collect();
        let mean = b.iter().sum::<f64>() / 55.0;
        b.iter_mut().for_each(|x| *x -= mean);

        let mut x = vec![0.0; 55];
        let out = solve_cg(&h, &b, &mut x, 1e-13, 1000);
        assert!(out.converged);
        let y = solve_dense(&h, &b).unwrap();
        let shift = x[0] - y[0];
        for k in 0..55 {
            assert!((x[k] - shift - y[k]).abs() < 1e-9, "{k}");
        }
        let mut hx = vec![0.0; 55];
        h.apply(&x, &mut hx);
        for k in 0..55 {
            assert!((hx[k] - b[k]).abs() < 1e-10);
        }
    }
}
