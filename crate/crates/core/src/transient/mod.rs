//! Backward-Euler time stepping. Each implicit step is solved by iterating
//! the penalized map `T_μ`: a Poisson solve with the current densities,
//! followed by one linear M-matrix system per carrier.

mod anderson;
mod assembly;
pub(crate) mod poisson;

use std::fmt;

use thiserror::Error;

use crate::diagnostics::{fp_epsilon, DiagnosticsRecord};
use crate::equilibrium::EquilibriumState;
use crate::problem::{Problem, State};
use crate::sparse::{check_m_matrix, CsrMatrix, LinearSolver, SolveError, SolverKind};

pub use assembly::{scheme_residual, Carrier};
pub use poisson::{solve_poisson, PoissonSolver};

use anderson::Anderson;
use assembly::{DensityAssembler, LinearizedData};

/// Smallest damping factor reached by automatic halving.
pub const MIN_DAMPING: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPolicy {
    /// `μ = Δt·max(M̄, max(Nⁿ, Pⁿ))` with `M̄` the upper density bound of the
    /// step when the doping vanishes and the data bound `M` otherwise.
    Auto,
    Fixed(f64),
}

impl fmt::Display for MuPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MuPolicy::Auto => write!(f, "auto"),
            MuPolicy::Fixed(mu) => write!(f, "{mu}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub mu_policy: MuPolicy,
    /// `∞`-norm tolerance on fixed-point increments.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// Initial damping `ω ∈ (0, 1]`; halved when an increment grows.
    pub damping: f64,
    /// Number of plain iterations before Anderson mixing takes over.
    pub anderson_after: usize,
    /// History length of the Anderson mixing; 0 disables it.
    pub anderson_depth: usize,
    /// `Δt_max`, recorded for decay-rate bookkeeping only.
    pub dt_max: f64,
    pub solver: SolverKind,
    /// Check the M-matrix structure of `A_N`, `A_P` at every iteration.
    pub check_m_matrix: bool,
    /// Stop the run once `Eⁿ` drops below this value.
    pub entropy_floor: Option<f64>,
}

impl Default for StepperConfig {
    fn default() -> Self {
        StepperConfig {
            dt: 1e-2,
            t_end: 10.0,
            mu_policy: MuPolicy::Auto,
            fp_tol: 1e-10,
            fp_max_iter: 1000,
            damping: 1.0,
            anderson_after: 20,
            anderson_depth: 5,
            dt_max: 1e-2,
            solver: SolverKind::Direct,
            check_m_matrix: true,
            entropy_floor: None,
        }
    }
}

impl StepperConfig {
    /// `N_T = ⌊T/Δt⌋`, robust to the rounding of `T/Δt`.
    pub fn num_steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }

    pub fn validate(&self, problem: &Problem) -> Result<(), TransientError> {
        let bad = |msg: String| Err(TransientError::Config(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if !(self.fp_tol > 0.0) {
            return bad(format!("fp_tol must be positive, got {}", self.fp_tol));
        }
        if self.fp_max_iter == 0 {
            return bad("fp_max_iter must be at least 1".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if let MuPolicy::Fixed(mu) = self.mu_policy {
            if !(mu > 0.0 && mu.is_finite()) {
                return bad(format!("mu must be positive, got {mu}"));
            }
        }
        if !(self.dt_max >= self.dt) {
            return bad(format!("dt_max = {} is smaller than dt = {}", self.dt_max, self.dt));
        }
        let c = problem.doping_inf_norm();
        if c > 0.0 && self.dt > problem.lambda2 / c {
            return Err(TransientError::TimeStep { dt: self.dt, limit: problem.lambda2 / c });
        }
        Ok(())
    }
}

/// `mⁿ = m(1 + Δt‖C‖∞/λ²)⁻ⁿ`, `Mⁿ = M(1 − Δt‖C‖∞/λ²)⁻ⁿ`. With recombination
/// the lower bound is `1/Mⁿ` and `M` is raised to `max(M, 1/m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTracker {
    m: f64,
    big_m: f64,
    shrink: f64,
    grow: f64,
    reciprocal: bool,
    /// Violations are errors (zero doping, `m > 0`) rather than warnings.
    pub enforced: bool,
}

impl BoundsTracker {
    pub fn new(problem: &Problem, dt: f64) -> Self {
        let c = problem.doping_inf_norm() / problem.lambda2;
        let reciprocal = !problem.recombination.is_none();
        let big_m = if reciprocal { problem.m_upper.max(1.0 / problem.m_lower) } else { problem.m_upper };
        BoundsTracker {
            m: problem.m_lower,
            big_m,
            shrink: 1.0 + dt * c,
            grow: 1.0 - dt * c,
            reciprocal,
            enforced: c == 0.0 && !problem.degenerate,
        }
    }

    pub fn upper(&self, n: usize) -> f64 {
        if self.grow <= 0.0 && n > 0 {
            return f64::INFINITY;
        }
        self.big_m * self.grow.powi(-(n as i32))
    }

    pub fn lower(&self, n: usize) -> f64 {
        if self.reciprocal {
            1.0 / self.upper(n)
        } else {
            self.m * self.shrink.powi(-(n as i32))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub fp_iters: usize,
    /// Last undamped increment `‖T_μ(u) − u‖∞`.
    pub increment: f64,
    /// Scheme residual at the accepted state, scaled by `Δt/m(K)`.
    pub residual: f64,
    pub mu: f64,
    pub damping: f64,
    pub m_matrix_checks: usize,
    pub bound_warning: Option<String>,
}

#[derive(Debug, Error)]
pub enum TransientError {
    #[error("invalid stepper configuration: {0}")]
    Config(String),
    #[error("time step {dt} exceeds lambda2/||C||_inf = {limit}")]
    TimeStep { dt: f64, limit: f64 },
    #[error("step {step}: linear solve failed: {source}")]
    Solve { step: usize, source: SolveError },
    #[error("step {step}, iteration {iteration}: {matrix} is not an M-matrix: {detail}")]
    NotMMatrix { step: usize, iteration: usize, matrix: &'static str, detail: String },
    #[error("step {step}: fixed-point iteration did not converge in {iterations} iterations (increment {increment:e}, residual {residual:e})")]
    FixedPoint { step: usize, iterations: usize, increment: f64, residual: f64 },
    #[error("step {step}: {carrier} = {value} in cell {cell} leaves [{lower}, {upper}]")]
    Bounds { step: usize, carrier: &'static str, cell: usize, value: f64, lower: f64, upper: f64 },
    #[error("step {step}: non-finite density")]
    NonFinite { step: usize },
}

impl TransientError {
    fn solve(step: usize) -> impl Fn(SolveError) -> TransientError {
        move |source| TransientError::Solve { step, source }
    }
}

fn inc_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Owns the factorized Poisson operator and the density systems of one
/// problem.
pub struct Stepper<'p> {
    problem: &'p Problem,
    config: StepperConfig,
    poisson: PoissonSolver,
    assembler: DensityAssembler,
    a_n: CsrMatrix,
    a_p: CsrMatrix,
    rhs_n: Vec<f64>,
    rhs_p: Vec<f64>,
    solver_n: LinearSolver,
    solver_p: LinearSolver,
    bounds: BoundsTracker,
    m_matrix_checks: usize,
}

impl<'p> Stepper<'p> {
    pub fn new(problem: &'p Problem, config: StepperConfig) -> Result<Self, TransientError> {
        config.validate(problem)?;
        let poisson = PoissonSolver::new(problem, config.solver).map_err(TransientError::solve(0))?;
        let assembler = DensityAssembler::new(problem);
        let n = problem.mesh.num_cells();
        Ok(Stepper {
            problem,
            poisson,
            a_n: assembler.new_matrix(),
            a_p: assembler.new_matrix(),
            assembler,
            rhs_n: vec![0.0; n],
            rhs_p: vec![0.0; n],
            solver_n: LinearSolver::new(config.solver),
            solver_p: LinearSolver::new(config.solver),
            bounds: BoundsTracker::new(problem, config.dt),
            config,
            m_matrix_checks: 0,
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.config
    }

    pub fn bounds(&self) -> &BoundsTracker {
        &self.bounds
    }

    pub fn poisson(&self) -> &PoissonSolver {
        &self.poisson
    }

    /// Number of M-matrix checks performed so far (two per iteration).
    pub fn m_matrix_checks(&self) -> usize {
        self.m_matrix_checks
    }

    /// State with the given cell densities and the potential they induce.
    pub fn state_from_densities(&self, n: Vec<f64>, p: Vec<f64>, step: usize, t: f64) -> Result<State, TransientError> {
        let psi = self.poisson.solve(&n, &p).map_err(TransientError::solve(step))?;
        Ok(State {
            n: self.problem.n_function(n),
            p: self.problem.p_function(p),
            psi: self.problem.psi_function(psi),
            step,
            t,
        })
    }

    /// `(N⁰, P⁰)` from the data and `Ψ⁰` from the Poisson equation.
    pub fn initial_state(&self) -> Result<State, TransientError> {
        self.state_from_densities(self.problem.n_initial.clone(), self.problem.p_initial.clone(), 0, 0.0)
    }

    fn mu(&self, step: usize, state: &State) -> f64 {
        match self.config.mu_policy {
            MuPolicy::Fixed(mu) => mu,
            MuPolicy::Auto => {
                let bound =
                    if self.problem.doping_inf_norm() == 0.0 { self.bounds.upper(step) } else { self.bounds.upper(0) };
                let current = state.n.max_cell().max(state.p.max_cell());
                self.config.dt * bound.max(current)
            }
        }
    }

    /// One application of `T_μ` to `(n, p)` with potential `psi`.
    #[allow(clippy::too_many_arguments)]
    fn apply_map(
        &mut self,
        step: usize,
        iteration: usize,
        n: &[f64],
        p: &[f64],
        psi: &[f64],
        prev: &State,
        mu: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), TransientError> {
        let problem = self.problem;
        let r0: Vec<f64> = if problem.recombination.is_none() {
            Vec::new()
        } else {
            n.iter().zip(p).map(|(&a, &b)| problem.recombination.r0(a, b)).collect()
        };
        let dt = self.config.dt;
        let data_n = LinearizedData { own: n, other: p, psi, previous: &prev.n.cells, r0: &r0, mu, dt };
        self.assembler.assemble(problem, Carrier::Electrons, &data_n, &mut self.a_n, &mut self.rhs_n);
        let data_p = LinearizedData { own: p, other: n, psi, previous: &prev.p.cells, r0: &r0, mu, dt };
        self.assembler.assemble(problem, Carrier::Holes, &data_p, &mut self.a_p, &mut self.rhs_p);
        if self.config.check_m_matrix {
            for (a, carrier) in [(&self.a_n, Carrier::Electrons), (&self.a_p, Carrier::Holes)] {
                self.m_matrix_checks += 1;
                let report = check_m_matrix(a);
                if !report.is_m_matrix {
                    return Err(TransientError::NotMMatrix {
                        step,
                        iteration,
                        matrix: carrier.name(),
                        detail: format!("{:?}", &report.violations[..report.violations.len().min(5)]),
                    });
                }
            }
        }
        let err = TransientError::solve(step);
        self.solver_n.prepare(&self.a_n).map_err(&err)?;
        let n_hat = self.solver_n.solve_prepared(&self.a_n, &self.rhs_n).map_err(&err)?;
        self.solver_p.prepare(&self.a_p).map_err(&err)?;
        let p_hat = self.solver_p.solve_prepared(&self.a_p, &self.rhs_p).map_err(&err)?;
        Ok((n_hat, p_hat))
    }

    /// Advances `state` by one time step.
    pub fn advance(&mut self, state: &State) -> Result<(State, StepReport), TransientError> {
        let step = state.step + 1;
        let dt = self.config.dt;
        let tol = self.config.fp_tol;
        let mu = self.mu(step, state);
        let checks_before = self.m_matrix_checks;

        let mut n = state.n.cells.clone();
        let mut p = state.p.cells.clone();
        let mut psi = self.poisson.solve(&n, &p).map_err(TransientError::solve(step))?;
        let mut omega = self.config.damping;
        let mut last_increment = f64::INFINITY;
        let mut increment = f64::INFINITY;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        let mut anderson = Anderson::new(self.config.anderson_depth);
        let cells = n.len();
        loop {
            if iterations == self.config.fp_max_iter {
                return Err(TransientError::FixedPoint { step, iterations, increment, residual });
            }
            iterations += 1;
            let (n_hat, p_hat) = self.apply_map(step, iterations, &n, &p, &psi, state, mu)?;
            increment = inc_norm(&n_hat, &n).max(inc_norm(&p_hat, &p));
            if !increment.is_finite() {
                return Err(TransientError::NonFinite { step });
            }
            if self.config.anderson_depth > 0 && iterations > self.config.anderson_after {
                let x: Vec<f64> = n.iter().chain(&p).copied().collect();
                let g: Vec<f64> = n_hat.iter().chain(&p_hat).copied().collect();
                // where the extrapolation is not positive fall back to the
                // plain map value, which the M-matrix structure keeps
                // nonnegative
                let next: Vec<f64> =
                    anderson.next(&x, &g).into_iter().zip(&g).map(|(v, &gv)| if v > 0.0 { v } else { gv }).collect();
                n.copy_from_slice(&next[..cells]);
                p.copy_from_slice(&next[cells..]);
            } else {
                if increment > last_increment && omega > MIN_DAMPING {
                    omega = (0.5 * omega).max(MIN_DAMPING);
                }
                last_increment = increment;
                for (u, v) in n.iter_mut().zip(&n_hat) {
                    *u += omega * (v - *u);
                }
                for (u, v) in p.iter_mut().zip(&p_hat) {
                    *u += omega * (v - *u);
                }
            }
            psi = self.poisson.solve(&n, &p).map_err(TransientError::solve(step))?;
            if increment <= tol {
                let (rn, rp) = scheme_residual(self.problem, &n, &p, &psi, &state.n.cells, &state.p.cells, dt);
                residual = max_abs(&rn).max(max_abs(&rp));
                if residual <= 10.0 * tol {
                    break;
                }
            }
        }

        let bound_warning = self.check_bounds(step, &n, &p)?;
        let next = State {
            n: self.problem.n_function(n),
            p: self.problem.p_function(p),
            psi: self.problem.psi_function(psi),
            step,
            t: step as f64 * dt,
        };
        let report = StepReport {
            step,
            fp_iters: iterations,
            increment,
            residual,
            mu,
            damping: omega,
            m_matrix_checks: self.m_matrix_checks - checks_before,
            bound_warning,
        };
        Ok((next, report))
    }

    fn check_bounds(&self, step: usize, n: &[f64], p: &[f64]) -> Result<Option<String>, TransientError> {
        let tol = self.config.fp_tol;
        let (lower, upper) = (self.bounds.lower(step), self.bounds.upper(step));
        for (carrier, values) in [("N", n), ("P", p)] {
            for (cell, &value) in values.iter().enumerate() {
                if !value.is_finite() {
                    return Err(TransientError::NonFinite { step });
                }
                let outside = value < lower - tol || value > upper + tol;
                // positivity is required in every case
                if value < -tol || (outside && self.bounds.enforced) {
                    return Err(TransientError::Bounds { step, carrier, cell, value, lower, upper });
                }
                if outside {
                    return Ok(Some(format!(
                        "step {step}: {carrier} = {value} in cell {cell} leaves [{lower}, {upper}]"
                    )));
                }
            }
        }
        Ok(None)
    }
}

/// Assembles and solves the linearized density systems once. Returns
/// `(N̂, P̂)`.
#[allow(clippy::too_many_arguments)]
pub fn linearized_density_step(
    problem: &Problem,
    n: &[f64],
    p: &[f64],
    psi: &[f64],
    n_prev: &[f64],
    p_prev: &[f64],
    mu: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>), TransientError> {
    let config = StepperConfig { dt, dt_max: dt, mu_policy: MuPolicy::Fixed(mu), ..StepperConfig::default() };
    let mut stepper = Stepper::new(problem, config)?;
    let prev = State {
        n: problem.n_function(n_prev.to_vec()),
        p: problem.p_function(p_prev.to_vec()),
        psi: problem.psi_function(psi.to_vec()),
        step: 0,
        t: 0.0,
    };
    stepper.apply_map(1, 1, n, p, psi, &prev, mu)
}

/// Linearized matrices `(A_N, A_P)` at an iterate, for inspection.
pub fn linearized_matrices(
    problem: &Problem,
    n: &[f64],
    p: &[f64],
    psi: &[f64],
    mu: f64,
    dt: f64,
) -> (CsrMatrix, CsrMatrix) {
    let assembler = DensityAssembler::new(problem);
    let r0: Vec<f64> = n.iter().zip(p).map(|(&a, &b)| problem.recombination.r0(a, b)).collect();
    let mut rhs = vec![0.0; n.len()];
    let mut a_n = assembler.new_matrix();
    let mut a_p = assembler.new_matrix();
    let data = LinearizedData { own: n, other: p, psi, previous: n, r0: &r0, mu, dt };
    assembler.assemble(problem, Carrier::Electrons, &data, &mut a_n, &mut rhs);
    let data = LinearizedData { own: p, other: n, psi, previous: p, r0: &r0, mu, dt };
    assembler.assemble(problem, Carrier::Holes, &data, &mut a_p, &mut rhs);
    (a_n, a_p)
}

/// One time step with a fresh stepper.
pub fn advance_step(
    problem: &Problem,
    state: &State,
    config: &StepperConfig,
) -> Result<(State, StepReport), TransientError> {
    Stepper::new(problem, config.clone())?.advance(state)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: State,
    pub records: Vec<DiagnosticsRecord>,
    pub reports: Vec<StepReport>,
    pub m_matrix_checks: usize,
    pub warnings: Vec<String>,
    pub stopped_early: bool,
}

impl RunOutput {
    /// `ε_fp = 10·fp_tol·(1 + E⁰)`.
    pub fn epsilon(&self, fp_tol: f64) -> f64 {
        fp_epsilon(fp_tol, self.records[0].entropy)
    }
}

/// Runs from the initial data of `problem`. `sink` sees every record and
/// state, starting with `n = 0`.
pub fn run(
    problem: &Problem,
    eq: &EquilibriumState,
    config: &StepperConfig,
    sink: &mut dyn FnMut(&DiagnosticsRecord, &State),
) -> Result<RunOutput, TransientError> {
    let stepper = Stepper::new(problem, config.clone())?;
    let initial = stepper.initial_state()?;
    run_with(stepper, eq, initial, sink)
}

/// Runs from a given initial state.
pub fn run_from(
    problem: &Problem,
    eq: &EquilibriumState,
    config: &StepperConfig,
    initial: State,
    sink: &mut dyn FnMut(&DiagnosticsRecord, &State),
) -> Result<RunOutput, TransientError> {
    run_with(Stepper::new(problem, config.clone())?, eq, initial, sink)
}

fn run_with(
    mut stepper: Stepper,
    eq: &EquilibriumState,
    initial: State,
    sink: &mut dyn FnMut(&DiagnosticsRecord, &State),
) -> Result<RunOutput, TransientError> {
    let problem = stepper.problem;
    let steps = stepper.config.num_steps();
    let dt = stepper.config.dt;
    let floor = stepper.config.entropy_floor;
    let first = DiagnosticsRecord::compute(problem, &initial, eq, 0, None);
    sink(&first, &initial);
    let mut records = vec![first];
    let mut reports = Vec::with_capacity(steps);
    let mut warnings = Vec::new();
    let mut state = initial;
    let mut stopped_early = false;
    for _ in 0..steps {
        if let Some(f) = floor {
            if records.last().unwrap().entropy < f {
                stopped_early = true;
                break;
            }
        }
        let (next, report) = stepper.advance(&state)?;
        let prev_entropy = records.last().unwrap().entropy;
        let record = DiagnosticsRecord::compute(problem, &next, eq, report.fp_iters, Some((prev_entropy, dt)));
        sink(&record, &next);
        if let Some(w) = &report.bound_warning {
            warnings.push(w.clone());
        }
        records.push(record);
        reports.push(report);
        state = next;
    }
    Ok(RunOutput {
        final_state: state,
        records,
        reports,
        m_matrix_checks: stepper.m_matrix_checks,
        warnings,
        stopped_early,
    })
}
