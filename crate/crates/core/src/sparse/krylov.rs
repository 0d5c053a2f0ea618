use super::{inf_norm, CsrMatrix, SolveError};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned BiCGStab. Iterates until `‖b − Ax‖∞ ≤ tol`, where
/// the residual is recomputed explicitly before accepting.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, SolveError> {
    let n = a.dim();
    if b.len() != n {
        return Err(SolveError::Dimension { matrix: n, vector: b.len() });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64], out: &mut [f64]| {
        for ((o, x), d) in out.iter_mut().zip(v).zip(&inv_diag) {
            *o = x * d;
        }
    };

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut best = inf_norm(&r);
    if best <= tol {
        return Ok(x);
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut ax = vec![0.0; n];

    for _ in 0..max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            // breakdown: restart from the current iterate
            a.mul_vec_into(&x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.fill(0.0);
            p.fill(0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        a.mul_vec_into(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        precond(&s, &mut z);
        a.mul_vec_into(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if inf_norm(&r) <= tol {
            a.mul_vec_into(&x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            let true_res = inf_norm(&r);
            if true_res <= tol {
                return Ok(x);
            }
            best = best.min(true_res);
        }
        if omega == 0.0 {
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.fill(0.0);
            p.fill(0.0);
        }
    }
    a.mul_vec_into(&x, &mut ax);
    let res = b.iter().zip(&ax).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    Err(SolveError::NotConverged { residual: res.min(best), tolerance: tol })
}
