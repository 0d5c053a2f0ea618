use crate::mesh::{DiscreteFunction, EdgeKind, Mesh};
use crate::problem::Problem;
use crate::sparse::{CsrMatrix, LinearSolver, SolveError, SolverKind};

/// Sparsity pattern of the cell-to-cell coupling: the diagonal plus one
/// entry per interior edge and direction.
pub(crate) fn cell_pattern(mesh: &Mesh) -> CsrMatrix {
    let mut entries: Vec<(usize, usize)> = (0..mesh.num_cells()).map(|k| (k, k)).collect();
    for e in mesh.edges() {
        if let EdgeKind::Interior { k, l } = e.kind {
            entries.push((k, l));
            entries.push((l, k));
        }
    }
    CsrMatrix::from_pattern(mesh.num_cells(), entries)
}

/// `λ² Σ_σ τ_σ (u_K − u_{K,σ})` as a matrix, together with the right-hand
/// side contribution `λ² Σ_{σ Dirichlet} τ_σ Ψ^D_σ`.
pub(crate) fn assemble_laplacian(problem: &Problem) -> (CsrMatrix, Vec<f64>) {
    let mesh = &problem.mesh;
    let lambda2 = problem.lambda2;
    let mut a = cell_pattern(mesh);
    let mut rhs = vec![0.0; mesh.num_cells()];
    for e in mesh.edges() {
        let w = lambda2 * e.tau;
        match e.kind {
            EdgeKind::Interior { k, l } => {
                a.add(k, k, w);
                a.add(l, l, w);
                a.add(k, l, -w);
                a.add(l, k, -w);
            }
            EdgeKind::Dirichlet { k, index } => {
                a.add(k, k, w);
                rhs[k] += w * problem.psi_dirichlet[index];
            }
            EdgeKind::Neumann { .. } => {}
        }
    }
    (a, rhs)
}

/// Linear Poisson problem `−λ² Σ_σ τ_σ DΨ_{K,σ} = m(K)(P_K − N_K + C_K)`,
/// factorized once.
#[derive(Debug, Clone)]
pub struct PoissonSolver {
    matrix: CsrMatrix,
    boundary_rhs: Vec<f64>,
    measures: Vec<f64>,
    doping: Vec<f64>,
    dirichlet: Vec<f64>,
    solver: LinearSolver,
}

impl PoissonSolver {
    pub fn new(problem: &Problem, kind: SolverKind) -> Result<Self, SolveError> {
        let (matrix, boundary_rhs) = assemble_laplacian(problem);
        let mut solver = LinearSolver::new(kind);
        solver.prepare(&matrix)?;
        Ok(PoissonSolver {
            matrix,
            boundary_rhs,
            measures: problem.mesh.cells().iter().map(|c| c.measure).collect(),
            doping: problem.doping.clone(),
            dirichlet: problem.psi_dirichlet.clone(),
            solver,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Cell values of Ψ.
    pub fn solve(&self, n: &[f64], p: &[f64]) -> Result<Vec<f64>, SolveError> {
        let b: Vec<f64> = (0..self.measures.len())
            .map(|k| self.measures[k] * (p[k] - n[k] + self.doping[k]) + self.boundary_rhs[k])
            .collect();
        self.solver.solve_prepared(&self.matrix, &b)
    }

    pub fn solve_function(&self, n: &[f64], p: &[f64]) -> Result<DiscreteFunction, SolveError> {
        Ok(DiscreteFunction::new(self.solve(n, p)?, self.dirichlet.clone()))
    }
}

/// One-shot Poisson solve with the direct solver.
pub fn solve_poisson(problem: &Problem, n: &[f64], p: &[f64]) -> Result<DiscreteFunction, SolveError> {
    PoissonSolver::new(problem, SolverKind::Direct)?.solve_function(n, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::PressureLaw;
    use crate::mesh::{build_cartesian, Rect};
    use crate::problem::{constant, ProblemSpec, RecombinationModel};
    use std::sync::Arc;

    fn spec(psi: crate::problem::Field, doping: f64) -> ProblemSpec {
        let law = PressureLaw::Isothermal;
        let psi_n = psi.clone();
        let psi_p = psi.clone();
        ProblemSpec {
            law,
            lambda2: 1.0,
            doping: constant(doping),
            n_boundary: Arc::new(move |x| psi_n(x).exp()),
            p_boundary: Arc::new(move |x| (-psi_p(x)).exp()),
            psi_boundary: psi,
            n_initial: constant(1.0),
            p_initial: constant(1.0),
            recombination: RecombinationModel::None,
            allow_degenerate: false,
        }
    }

    #[test]
    fn linear_boundary_data_on_a_strip() {
        // 3×1 cells on [0,1]×[0,1/3], Dirichlet at x = 0 and x = 1
        let rect = Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 / 3.0 };
        let mesh = build_cartesian(3, 1, rect, |x| x[0] == 0.0 || x[0] == 1.0).unwrap();
        let problem = Problem::discretize(&spec(Arc::new(|x| x[0]), 0.0), mesh).unwrap();
        let psi = solve_poisson(&problem, &[1.0; 3], &[1.0; 3]).unwrap();
        for (k, want) in [1.0 / 6.0, 0.5, 5.0 / 6.0].into_iter().enumerate() {
            assert!((psi.cells[k] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn constants_are_discrete_harmonic() {
        let mesh = build_cartesian(5, 4, Rect::UNIT, |x| x[1] == 0.0).unwrap();
        let problem = Problem::discretize(&spec(constant(0.3), 0.0), mesh).unwrap();
        let psi = solve_poisson(&problem, &[2.0; 20], &[2.0; 20]).unwrap();
        assert!(psi.cells.iter().all(|v| (v - 0.3).abs() < 1e-14));
    }

    #[test]
    fn single_cell_hand_solve() {
        // unit square as one cell: four Dirichlet edges with τ = 1/(1/2) = 2
        let mesh = build_cartesian(1, 1, Rect::UNIT, |_| true).unwrap();
        let problem = Problem::discretize(&spec(constant(0.0), 4.0), mesh).unwrap();
        assert!(problem.mesh.edges().iter().all(|e| (e.tau - 2.0).abs() < 1e-15));
        let psi = solve_poisson(&problem, &[1.0], &[1.0]).unwrap();
        // −λ² Σ τ (0 − Ψ_K) = 8 Ψ_K = m(K)(P − N + C) = 4
        assert!((psi.cells[0] - 0.5).abs() < 1e-15);
    }
}
