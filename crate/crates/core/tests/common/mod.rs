//! Independent reference solutions for the integration tests.

#![allow(dead_code)]

use driftfv::mesh::EdgeKind;
use driftfv::problem::{pn_cartesian_mesh, pn_junction_preset, DopingProfile, PnCase, Problem};
use driftfv::PressureLaw;

pub fn preset(case: PnCase, doping: DopingProfile, nx: usize, ny: usize) -> Problem {
    Problem::discretize(&pn_junction_preset(case, doping), pn_cartesian_mesh(nx, ny).unwrap()).unwrap()
}

/// `x/(eˣ − 1)` straight from the definition, with its Taylor expansion
/// near 0.
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x / 2.0 + x * x / 12.0
    } else if x > 700.0 {
        x * (-x).exp()
    } else {
        x / x.exp_m1()
    }
}

/// `dr·B(x/dr)` with its `dr → 0` limit `max(−x, 0)`.
fn scaled(x: f64, dr: f64) -> f64 {
    if dr == 0.0 {
        (-x).max(0.0)
    } else {
        dr * bernoulli(x / dr)
    }
}

fn exponent(law: PressureLaw) -> Option<f64> {
    match law {
        PressureLaw::Isothermal => None,
        PressureLaw::Power { alpha } => Some(alpha),
    }
}

/// `(h(b) − h(a))/(log b − log a)` written out for `r(s) = s^α`.
fn dr(law: PressureLaw, a: f64, b: f64) -> f64 {
    let Some(alpha) = exponent(law) else { return 1.0 };
    let h = |s: f64| alpha / (alpha - 1.0) * (s.powf(alpha - 1.0) - 1.0);
    if a <= 0.0 || b <= 0.0 {
        // h(0⁺) is finite while the log difference diverges
        return 0.0;
    }
    if (a.ln() - b.ln()).abs() < 1e-9 {
        return alpha * (0.5 * (a + b)).powf(alpha - 1.0);
    }
    (h(b) - h(a)) / (b.ln() - a.ln())
}

/// Recombination rates of the diode presets.
pub fn rate(case: PnCase, n: f64, p: f64) -> f64 {
    match case {
        PnCase::LinearSrh => 10.0 * (n * p - 1.0) / (n + p + 1.0),
        PnCase::LinearAuger => 0.1 * (n + p) * (n * p - 1.0),
        _ => 0.0,
    }
}

/// Residual of the fully implicit coupled scheme in the unknowns
/// `x = (N, P, Ψ)`.
pub fn coupled_residual(
    problem: &Problem,
    case: PnCase,
    x: &[f64],
    n_prev: &[f64],
    p_prev: &[f64],
    dt: f64,
) -> Vec<f64> {
    let mesh = &problem.mesh;
    let k = mesh.num_cells();
    let (n, rest) = x.split_at(k);
    let (p, psi) = rest.split_at(k);
    let law = problem.law;
    let mut f = vec![0.0; 3 * k];
    for c in mesh.cells() {
        let i = c.id;
        let r = rate(case, n[i], p[i]);
        f[i] = c.measure * ((n[i] - n_prev[i]) / dt + r);
        f[k + i] = c.measure * ((p[i] - p_prev[i]) / dt + r);
        f[2 * k + i] = -c.measure * (p[i] - n[i] + problem.doping[i]);
    }
    let mut add = |i: usize, tau: f64, nl: f64, pl: f64, psil: f64| {
        let d = psil - psi[i];
        let drn = dr(law, n[i], nl);
        let drp = dr(law, p[i], pl);
        f[i] += tau * (scaled(-d, drn) * n[i] - scaled(d, drn) * nl);
        f[k + i] += tau * (scaled(d, drp) * p[i] - scaled(-d, drp) * pl);
        f[2 * k + i] -= problem.lambda2 * tau * d;
    };
    for e in mesh.edges() {
        match e.kind {
            EdgeKind::Interior { k: a, l: b } => {
                add(a, e.tau, n[b], p[b], psi[b]);
                add(b, e.tau, n[a], p[a], psi[a]);
            }
            EdgeKind::Dirichlet { k: a, index } => {
                add(a, e.tau, problem.n_dirichlet[index], problem.p_dirichlet[index], problem.psi_dirichlet[index]);
            }
            EdgeKind::Neumann { .. } => {}
        }
    }
    f
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dense Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let m = a[row][col] / a[col][col];
            for j in col..n {
                a[row][j] -= m * a[col][j];
            }
            b[row] -= m * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|j| a[row][j] * x[j]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// One implicit step by damped Newton on the coupled system with a
/// central-difference Jacobian. Returns `(N, P, Ψ)`.
pub fn newton_step(
    problem: &Problem,
    case: PnCase,
    n_prev: &[f64],
    p_prev: &[f64],
    dt: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = problem.mesh.num_cells();
    let mut x: Vec<f64> = n_prev.iter().chain(p_prev).copied().chain(std::iter::repeat_n(0.0, k)).collect();
    let residual = |x: &[f64]| coupled_residual(problem, case, x, n_prev, p_prev, dt);
    let mut f = residual(&x);
    for _ in 0..100 {
        if norm(&f) < 1e-14 {
            break;
        }
        let dim = x.len();
        let mut jac = vec![vec![0.0; dim]; dim];
        for j in 0..dim {
            let h = 1e-7 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (residual(&xp), residual(&xm));
            for i in 0..dim {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let dx = dense_solve(jac, f.iter().map(|v| -v).collect());
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
            let densities_ok = trial[..2 * k].iter().all(|&v| v > 0.0);
            if densities_ok {
                let ft = residual(&trial);
                if norm(&ft) < norm(&f) || step < 1e-6 {
                    x = trial;
                    f = ft;
                    break;
                }
            }
            step *= 0.5;
            assert!(step > 1e-12, "Newton line search failed");
        }
    }
    assert!(norm(&f) < 1e-12, "Newton oracle did not converge: {}", norm(&f));
    (x[..k].to_vec(), x[k..2 * k].to_vec(), x[2 * k..].to_vec())
}
