//! Discrete thermal equilibrium.
//!
//! Solves `−λ² Σ_σ τ_σ DΨ_{K,σ} = m(K)(g(α_P − Ψ_K) − g(α_N + Ψ_K) + C_K)`
//! by a damped semismooth Newton method; the densities follow from
//! `N_K = g(α_N + Ψ_K)` and `P_K = g(α_P − Ψ_K)`.

use thiserror::Error;

use crate::mesh::DiscreteFunction;
use crate::problem::Problem;
use crate::sparse::{check_m_matrix, inf_norm, CsrMatrix, LinearSolver, SolveError, SolverKind};
use crate::transient::poisson::assemble_laplacian;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumState {
    pub psi: DiscreteFunction,
    pub n: DiscreteFunction,
    pub p: DiscreteFunction,
    pub iterations: usize,
    /// `max_K |F_K| / m(K)` at the returned iterate.
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error(
        "equilibrium Newton did not converge in {iterations} iterations (residual {residual:e}; history {history:?})"
    )]
    NotConverged { iterations: usize, residual: f64, history: Vec<f64> },
    #[error("equilibrium Newton produced a non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("equilibrium Jacobian is not an M-matrix at iteration {iteration}: {detail}")]
    NotMMatrix { iteration: usize, detail: String },
    #[error("equilibrium linear solve failed: {0}")]
    Solve(#[from] SolveError),
}

struct Newton<'a> {
    problem: &'a Problem,
    laplacian: CsrMatrix,
    boundary_rhs: Vec<f64>,
    measures: Vec<f64>,
}

impl Newton<'_> {
    /// `F_K / m(K)`.
    fn residual(&self, psi: &[f64]) -> Vec<f64> {
        let law = self.problem.law;
        let (an, ap) = (self.problem.alpha_n, self.problem.alpha_p);
        let lap = self.laplacian.mul_vec(psi);
        (0..psi.len())
            .map(|k| {
                let space = lap[k] - self.boundary_rhs[k];
                let charge = law.g_inverse(ap - psi[k]) - law.g_inverse(an + psi[k]) + self.problem.doping[k];
                space / self.measures[k] - charge
            })
            .collect()
    }

    fn jacobian(&self, psi: &[f64]) -> CsrMatrix {
        let law = self.problem.law;
        let (an, ap) = (self.problem.alpha_n, self.problem.alpha_p);
        let mut j = self.laplacian.clone();
        for k in 0..psi.len() {
            let d = law.g_inverse_derivative(ap - psi[k]) + law.g_inverse_derivative(an + psi[k]);
            j.add(k, k, self.measures[k] * d);
        }
        j
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Linear Poisson problem with both densities frozen at the boundary-length
/// weighted averages of their Dirichlet data.
fn initial_guess(problem: &Problem, laplacian: &CsrMatrix, boundary_rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
    let mesh = &problem.mesh;
    let weights: Vec<f64> = mesh.dirichlet_edges().iter().map(|&e| mesh.edge(e).measure).collect();
    let total: f64 = weights.iter().sum();
    let avg = |v: &[f64]| v.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / total;
    let (n_bar, p_bar) = (avg(&problem.n_dirichlet), avg(&problem.p_dirichlet));
    let b: Vec<f64> =
        mesh.cells().iter().map(|c| c.measure * (p_bar - n_bar + problem.doping[c.id]) + boundary_rhs[c.id]).collect();
    LinearSolver::new(SolverKind::Direct).solve(laplacian, &b)
}

pub fn solve_equilibrium(problem: &Problem, tol: f64, max_iter: usize) -> Result<EquilibriumState, EquilibriumError> {
    let (laplacian, boundary_rhs) = assemble_laplacian(problem);
    let measures = problem.mesh.cells().iter().map(|c| c.measure).collect();
    let newton = Newton { problem, laplacian, boundary_rhs, measures };
    let mut psi = initial_guess(problem, &newton.laplacian, &newton.boundary_rhs)?;
    let mut solver = LinearSolver::new(SolverKind::Direct);

    let mut res = newton.residual(&psi);
    let mut history = vec![inf_norm(&res)];
    let mut iterations = 0;
    while *history.last().unwrap() > tol {
        if iterations == max_iter {
            return Err(EquilibriumError::NotConverged { iterations, residual: *history.last().unwrap(), history });
        }
        iterations += 1;
        let jac = newton.jacobian(&psi);
        let report = check_m_matrix(&jac);
        if !report.is_m_matrix {
            return Err(EquilibriumError::NotMMatrix {
                iteration: iterations,
                detail: format!("{:?}", report.violations),
            });
        }
        // the residual is scaled by 1/m(K), the Jacobian is not
        let rhs: Vec<f64> = res.iter().zip(&newton.measures).map(|(r, m)| -r * m).collect();
        let delta = solver.solve(&jac, &rhs)?;

        let merit = l2(&res);
        let mut step = 1.0;
        let mut trial: Vec<f64>;
        let mut trial_res: Vec<f64>;
        let mut halvings = 0;
        loop {
            trial = psi.iter().zip(&delta).map(|(x, d)| x + step * d).collect();
            trial_res = newton.residual(&trial);
            let m = l2(&trial_res);
            if (m.is_finite() && m < merit) || halvings == MAX_HALVINGS {
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
        if trial_res.iter().any(|v| !v.is_finite()) {
            return Err(EquilibriumError::NonFinite { iteration: iterations });
        }
        psi = trial;
        res = trial_res;
        history.push(inf_norm(&res));
    }

    let law = problem.law;
    let n = psi.iter().map(|&v| law.g_inverse(problem.alpha_n + v)).collect();
    let p = psi.iter().map(|&v| law.g_inverse(problem.alpha_p - v)).collect();
    Ok(EquilibriumState {
        n: problem.n_function(n),
        p: problem.p_function(p),
        psi: problem.psi_function(psi),
        iterations,
        residual: *history.last().unwrap(),
        residual_history: history,
    })
}

/// `max_K |F_K| / m(K)` of the equilibrium equation at `psi`.
pub fn equilibrium_residual(problem: &Problem, psi: &[f64]) -> f64 {
    let (laplacian, boundary_rhs) = assemble_laplacian(problem);
    let measures = problem.mesh.cells().iter().map(|c| c.measure).collect();
    inf_norm(&Newton { problem, laplacian, boundary_rhs, measures }.residual(psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::PressureLaw;
    use crate::mesh::{build_cartesian, Rect};
    use crate::problem::{
        constant, pn_cartesian_mesh, pn_junction_preset, DopingProfile, PnCase, ProblemSpec, RecombinationModel,
    };

    fn symmetric(doping: f64, mesh: crate::mesh::Mesh) -> Problem {
        let spec = ProblemSpec {
            law: PressureLaw::Isothermal,
            lambda2: 1.0,
            doping: constant(doping),
            n_boundary: constant(1.0),
            p_boundary: constant(1.0),
            psi_boundary: constant(0.0),
            n_initial: constant(1.0),
            p_initial: constant(1.0),
            recombination: RecombinationModel::None,
            allow_degenerate: false,
        };
        Problem::discretize(&spec, mesh).unwrap()
    }

    #[test]
    fn symmetric_data_gives_trivial_equilibrium() {
        let problem = symmetric(0.0, pn_cartesian_mesh(6, 6).unwrap());
        let eq = solve_equilibrium(&problem, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(eq.psi.cells.iter().all(|v| v.abs() < 1e-14));
        assert!(eq.n.cells.iter().chain(&eq.p.cells).all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn single_cell_matches_bisection() {
        // one unit cell, four Dirichlet edges with τ = 2:
        // 8Ψ = e^{−Ψ} − e^{Ψ} + c
        for c in [-3.0, -0.5, 0.7, 4.0] {
            let problem = symmetric(c, build_cartesian(1, 1, Rect::UNIT, |_| true).unwrap());
            let eq = solve_equilibrium(&problem, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let f = |x: f64| 8.0 * x - ((-x).exp() - x.exp() + c);
            let (mut lo, mut hi) = (-10.0, 10.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            assert!((eq.psi.cells[0] - 0.5 * (lo + hi)).abs() < 1e-11, "c = {c}");
        }
    }

    #[test]
    fn presets_converge_with_mass_action() {
        let mesh = pn_cartesian_mesh(16, 16).unwrap();
        for case in PnCase::ALL {
            for doping in [DopingProfile::Zero, DopingProfile::Pn] {
                let problem = Problem::discretize(&pn_junction_preset(case, doping), mesh.clone()).unwrap();
                let eq = solve_equilibrium(&problem, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
                assert!(eq.residual <= DEFAULT_TOL);
                assert!(equilibrium_residual(&problem, &eq.psi.cells) <= DEFAULT_TOL);
                if problem.law.is_isothermal() {
                    for (n, p) in eq.n.cells.iter().zip(&eq.p.cells) {
                        assert!((n * p - 1.0).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn non_convergence_reports_history() {
        let problem = Problem::discretize(
            &pn_junction_preset(PnCase::LinearR0, DopingProfile::Pn),
            pn_cartesian_mesh(8, 8).unwrap(),
        )
        .unwrap();
        match solve_equilibrium(&problem, 1e-30, 2) {
            Err(EquilibriumError::NotConverged { iterations: 2, history, .. }) => assert_eq!(history.len(), 3),
            other => panic!("{other:?}"),
        }
    }
}
