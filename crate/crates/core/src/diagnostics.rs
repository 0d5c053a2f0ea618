//! Relative entropy, entropy production, decay-rate fits and the per-step
//! entropy inequality.

use std::io::{self, Write};
use std::ops::Range;

use thiserror::Error;

use crate::constitutive::PressureLaw;
use crate::equilibrium::EquilibriumState;
use crate::mesh::{DiscreteFunction, EdgeKind};
use crate::problem::{Problem, State};

/// Isothermal enthalpy argument floor, used only inside diagnostics.
pub const LOG_FLOOR: f64 = 1e-300;

pub const CSV_HEADER: &str = "step,t,E,I,F,l2_N,l2_P,l2_Psi,min_N,max_N,min_P,max_P,fp_iters,slack";

fn enthalpy(law: PressureLaw, s: f64) -> f64 {
    match law {
        PressureLaw::Isothermal => s.max(LOG_FLOOR).ln(),
        _ => law.enthalpy(s.max(0.0)),
    }
}

fn bregman_sum(problem: &Problem, u: &[f64], eq: &[f64]) -> f64 {
    let law = problem.law;
    problem.mesh.cells().iter().map(|c| c.measure * law.bregman(u[c.id], eq[c.id])).sum()
}

/// `Eⁿ = Σ_K m(K)[H(N_K) − H(N^eq_K) − h(N^eq_K)(N_K − N^eq_K) + (same for P)]
/// + λ²/2 |Ψ − Ψ^eq|²_{1,M}`.
pub fn entropy(problem: &Problem, state: &State, eq: &EquilibriumState) -> f64 {
    let dpsi = state.psi.zip_with(&eq.psi, |a, b| a - b);
    bregman_sum(problem, &state.n.cells, &eq.n.cells)
        + bregman_sum(problem, &state.p.cells, &eq.p.cells)
        + 0.5 * problem.lambda2 * dpsi.seminorm_sq(&problem.mesh)
}

/// Edge part of `Iⁿ` for one carrier with quasi-Fermi potential
/// `h(u) − sign·Ψ`, summed in the owner orientation of each edge.
fn edge_production(problem: &Problem, u: &DiscreteFunction, psi: &DiscreteFunction, sign: f64) -> f64 {
    let law = problem.law;
    let mesh = &problem.mesh;
    mesh.edges()
        .iter()
        .map(|e| {
            if matches!(e.kind, EdgeKind::Neumann { .. }) {
                return 0.0;
            }
            let k = e.owner();
            let (a, b) = (u.cells[k], u.across(mesh, k, e.id));
            let lo = a.min(b);
            if !(lo > 0.0) {
                return 0.0;
            }
            let d = (enthalpy(law, b) - sign * psi.across(mesh, k, e.id)) - (enthalpy(law, a) - sign * psi.cells[k]);
            e.tau * lo * d * d
        })
        .sum()
}

/// `Iⁿ`: edge dissipation of both carriers plus the recombination term
/// `Σ_K m(K) R(N_K, P_K)(h(N_K) + h(P_K) − h(N^eq_K) − h(P^eq_K))`.
pub fn production(problem: &Problem, state: &State, eq: &EquilibriumState) -> f64 {
    let law = problem.law;
    let mut total =
        edge_production(problem, &state.n, &state.psi, 1.0) + edge_production(problem, &state.p, &state.psi, -1.0);
    if !problem.recombination.is_none() {
        for c in problem.mesh.cells() {
            let k = c.id;
            let (n, p) = (state.n.cells[k], state.p.cells[k]);
            let (r, _) = problem.recombination.evaluate(n, p);
            let gap = enthalpy(law, n) + enthalpy(law, p) - enthalpy(law, eq.n.cells[k]) - enthalpy(law, eq.p.cells[k]);
            total += c.measure * r * gap;
        }
    }
    total
}

/// `Fⁿ = ‖N − N^eq‖₀² + ‖P − P^eq‖₀² + λ²/2 |Ψ − Ψ^eq|²_{1,M}`.
pub fn f_functional(problem: &Problem, state: &State, eq: &EquilibriumState) -> f64 {
    let mesh = &problem.mesh;
    let diff = |a: &DiscreteFunction, b: &DiscreteFunction| a.zip_with(b, |x, y| x - y);
    diff(&state.n, &eq.n).l2_norm_sq(mesh)
        + diff(&state.p, &eq.p).l2_norm_sq(mesh)
        + 0.5 * problem.lambda2 * diff(&state.psi, &eq.psi).seminorm_sq(mesh)
}

/// Tolerance of the per-step entropy inequality for a fixed-point
/// tolerance `fp_tol`: `10·fp_tol·(1 + E⁰)`.
pub fn fp_epsilon(fp_tol: f64, e0: f64) -> f64 {
    10.0 * fp_tol * (1.0 + e0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub entropy: f64,
    pub production: f64,
    pub f: f64,
    pub l2_n: f64,
    pub l2_p: f64,
    pub l2_psi: f64,
    pub min_n: f64,
    pub max_n: f64,
    pub min_p: f64,
    pub max_p: f64,
    pub fp_iters: usize,
    /// `Eⁿ⁻¹ − Eⁿ − Δt·Iⁿ`; zero on the first row.
    pub slack: f64,
}

impl DiagnosticsRecord {
    /// Diagnostics of `state`; `previous` is the entropy of the previous
    /// step and the time step that led to `state`.
    pub fn compute(
        problem: &Problem,
        state: &State,
        eq: &EquilibriumState,
        fp_iters: usize,
        previous: Option<(f64, f64)>,
    ) -> Self {
        let mesh = &problem.mesh;
        let entropy = entropy(problem, state, eq);
        let production = production(problem, state, eq);
        let norm = |a: &DiscreteFunction, b: &DiscreteFunction| a.zip_with(b, |x, y| x - y).l2_norm_sq(mesh).sqrt();
        let slack = match previous {
            Some((e_prev, dt)) => e_prev - entropy - dt * production,
            None => 0.0,
        };
        DiagnosticsRecord {
            step: state.step,
            t: state.t,
            entropy,
            production,
            f: f_functional(problem, state, eq),
            l2_n: norm(&state.n, &eq.n),
            l2_p: norm(&state.p, &eq.p),
            l2_psi: norm(&state.psi, &eq.psi),
            min_n: state.n.min_cell(),
            max_n: state.n.max_cell(),
            min_p: state.p.min_cell(),
            max_p: state.p.max_cell(),
            fp_iters,
            slack,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e}",
            self.step,
            self.t,
            self.entropy,
            self.production,
            self.f,
            self.l2_n,
            self.l2_p,
            self.l2_psi,
            self.min_n,
            self.max_n,
            self.min_p,
            self.max_p,
            self.fp_iters,
            self.slack
        )
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[DiagnosticsRecord]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Negative slope of `ln Eⁿ` against `tⁿ`.
    pub alpha: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Indices of the fitted points.
    pub window: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("decay fit window has {points} points above the floor, at least {min} are needed")]
    WindowTooShort { points: usize, min: usize },
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares fit of `ln Eⁿ = c − α tⁿ` over the leading run of points
/// with `Eⁿ > floor`.
pub fn fit_decay_rate(series: &[(f64, f64)], floor: f64) -> Result<DecayFit, FitError> {
    let end = series.iter().position(|&(_, e)| !(e > floor && e > 0.0)).unwrap_or(series.len());
    if end < MIN_FIT_POINTS {
        return Err(FitError::WindowTooShort { points: end, min: MIN_FIT_POINTS });
    }
    let pts: Vec<(f64, f64)> = series[..end].iter().map(|&(t, e)| (t, e.ln())).collect();
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        stt += (t - t_mean) * (t - t_mean);
        sty += (t - t_mean) * (y - y_mean);
        syy += (y - y_mean) * (y - y_mean);
    }
    let slope = if stt > 0.0 { sty / stt } else { 0.0 };
    let intercept = y_mean - slope * t_mean;
    let sse: f64 = pts.iter().map(|&(t, y)| (y - intercept - slope * t).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(DecayFit { alpha: -slope, intercept, r_squared, window: 0..end })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntropyChainReport {
    /// Steps with `slack < −ε`.
    pub inequality_violations: Vec<usize>,
    /// Steps with `Eⁿ > Eⁿ⁻¹ + ε`.
    pub monotonicity_violations: Vec<usize>,
    /// Steps with `Eⁿ < 0` or `Iⁿ < 0` beyond `ε`.
    pub sign_violations: Vec<usize>,
    pub min_slack: f64,
}

impl EntropyChainReport {
    pub fn is_clean(&self) -> bool {
        self.inequality_violations.is_empty()
            && self.monotonicity_violations.is_empty()
            && self.sign_violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<usize> {
        [&self.inequality_violations, &self.monotonicity_violations, &self.sign_violations]
            .iter()
            .filter_map(|v| v.first().copied())
            .min()
    }

    pub fn violation_count(&self) -> usize {
        self.inequality_violations.len() + self.monotonicity_violations.len() + self.sign_violations.len()
    }
}

pub fn check_entropy_chain(records: &[DiagnosticsRecord], eps: f64) -> EntropyChainReport {
    let mut report = EntropyChainReport { min_slack: f64::INFINITY, ..Default::default() };
    for (i, r) in records.iter().enumerate() {
        if r.entropy < -eps || r.production < -eps || !r.entropy.is_finite() || !r.production.is_finite() {
            report.sign_violations.push(r.step);
        }
        if i == 0 {
            continue;
        }
        report.min_slack = report.min_slack.min(r.slack);
        if !(r.slack >= -eps) {
            report.inequality_violations.push(r.step);
        }
        if !(r.entropy <= records[i - 1].entropy + eps) {
            report.monotonicity_violations.push(r.step);
        }
    }
    if records.len() < 2 {
        report.min_slack = 0.0;
    }
    report
}

/// Largest `Eⁿ/Iⁿ` over the records with `Eⁿ > floor`: an empirical
/// counterpart of the entropy–production constant.
pub fn max_entropy_production_ratio(records: &[DiagnosticsRecord], floor: f64) -> f64 {
    records
        .iter()
        .filter(|r| r.entropy > floor)
        .map(|r| if r.production > 0.0 { r.entropy / r.production } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

/// Lower end of the decay-fit window relative to `E⁰`.
pub const FIT_WINDOW: f64 = 1e-10;

/// One row of a reproduction summary.
#[derive(Debug, Clone)]
pub struct CaseSummary {
    pub name: String,
    /// No decay theorem covers the case.
    pub experimental: bool,
    pub steps: usize,
    pub e0: f64,
    pub e_final: f64,
    pub fit: Result<DecayFit, FitError>,
    pub chain: EntropyChainReport,
    pub fp_iters: usize,
}

impl CaseSummary {
    pub const HEADER: &'static str =
        "case,experimental,steps,E0,E_final,alpha_fit,r_squared,fit_points,inequality_violations,monotonicity_violations,min_slack,fp_iters";

    /// Summarizes a run whose records start at `n = 0`; `eps` is the entropy
    /// inequality tolerance.
    pub fn new(name: impl Into<String>, experimental: bool, records: &[DiagnosticsRecord], eps: f64) -> Self {
        let e0 = records.first().map_or(0.0, |r| r.entropy);
        let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.entropy)).collect();
        CaseSummary {
            name: name.into(),
            experimental,
            steps: records.len().saturating_sub(1),
            e0,
            e_final: records.last().map_or(0.0, |r| r.entropy),
            fit: fit_decay_rate(&series, FIT_WINDOW * e0),
            chain: check_entropy_chain(records, eps),
            fp_iters: records.iter().map(|r| r.fp_iters).sum(),
        }
    }

    pub fn csv_row(&self) -> String {
        let (alpha, r2, points) = match &self.fit {
            Ok(f) => (format!("{:.6e}", f.alpha), format!("{:.6}", f.r_squared), f.window.len().to_string()),
            Err(_) => ("nan".into(), "nan".into(), "0".into()),
        };
        format!(
            "{},{},{},{:.6e},{:.6e},{},{},{},{},{},{:.3e},{}",
            self.name,
            self.experimental,
            self.steps,
            self.e0,
            self.e_final,
            alpha,
            r2,
            points,
            self.chain.inequality_violations.len(),
            self.chain.monotonicity_violations.len(),
            self.chain.min_slack,
            self.fp_iters
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cartesian, Rect};
    use crate::problem::{constant, ProblemSpec, RecombinationModel};
    use std::f64::consts::E;

    fn problem(nx: usize, law: PressureLaw, recombination: RecombinationModel) -> Problem {
        let rect = Rect { x0: 0.0, x1: nx as f64, y0: 0.0, y1: 1.0 };
        let mesh = build_cartesian(nx, 1, rect, |x| x[0] == 0.0).unwrap();
        let spec = ProblemSpec {
            law,
            lambda2: 1.0,
            doping: constant(0.0),
            n_boundary: constant(1.0),
            p_boundary: constant(1.0),
            psi_boundary: constant(0.0),
            n_initial: constant(1.0),
            p_initial: constant(1.0),
            recombination,
            allow_degenerate: false,
        };
        Problem::discretize(&spec, mesh).unwrap()
    }

    fn state(problem: &Problem, n: Vec<f64>, p: Vec<f64>, psi: Vec<f64>) -> State {
        State { n: problem.n_function(n), p: problem.p_function(p), psi: problem.psi_function(psi), step: 0, t: 0.0 }
    }

    fn unit_eq(problem: &Problem) -> EquilibriumState {
        let k = problem.mesh.num_cells();
        EquilibriumState {
            psi: problem.psi_function(vec![0.0; k]),
            n: problem.n_function(vec![1.0; k]),
            p: problem.p_function(vec![1.0; k]),
            iterations: 0,
            residual: 0.0,
            residual_history: vec![0.0],
        }
    }

    #[test]
    fn equilibrium_has_zero_entropy_and_production() {
        let pb = problem(3, PressureLaw::Isothermal, RecombinationModel::PN_SRH);
        let eq = unit_eq(&pb);
        let s = state(&pb, vec![1.0; 3], vec![1.0; 3], vec![0.0; 3]);
        assert_eq!(entropy(&pb, &s, &eq), 0.0);
        assert_eq!(production(&pb, &s, &eq), 0.0);
        assert_eq!(f_functional(&pb, &s, &eq), 0.0);
    }

    #[test]
    fn single_cell_entropy() {
        let pb = problem(1, PressureLaw::Isothermal, RecombinationModel::None);
        let eq = unit_eq(&pb);
        let s = state(&pb, vec![E], vec![1.0], vec![0.0]);
        assert!((entropy(&pb, &s, &eq) - 1.0).abs() < 1e-15);
        let s = state(&pb, vec![3.0], vec![1.0], vec![0.0]);
        assert!((f_functional(&pb, &s, &eq) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn two_cell_production() {
        // cells of width 1: τ = 1 on the interior edge, 1 on the Dirichlet edge
        let pb = problem(2, PressureLaw::Isothermal, RecombinationModel::None);
        let eq = unit_eq(&pb);
        let s = state(&pb, vec![1.0, E], vec![1.0, 1.0], vec![0.0, 0.0]);
        let interior = pb.mesh.edges().iter().find(|e| e.is_interior()).unwrap();
        assert!((interior.tau - 1.0).abs() < 1e-15);
        // only the interior edge sees a jump of log N: τ·min(1, e)·1²
        assert!((production(&pb, &s, &eq) - interior.tau).abs() < 1e-14);
    }

    #[test]
    fn recombination_term_is_nonnegative() {
        let pb = problem(2, PressureLaw::Isothermal, RecombinationModel::PN_SRH);
        let eq = unit_eq(&pb);
        for (n, p) in [(2.0, 3.0), (0.2, 0.3), (5.0, 0.1)] {
            let s = state(&pb, vec![n, n], vec![p, p], vec![0.0, 0.0]);
            let i = production(&pb, &s, &eq);
            // the edge part is the Dirichlet edge only
            let (r, _) = pb.recombination.evaluate(n, p);
            assert!(r * (n * p).ln() >= 0.0);
            assert!(i >= 2.0 * r * (n * p).ln() - 1e-14);
        }
    }

    #[test]
    fn exact_exponential_fit() {
        let series: Vec<(f64, f64)> =
            (0..200).map(|i| (i as f64 * 0.05, 5.0 * (-2.0 * i as f64 * 0.05).exp())).collect();
        let fit = fit_decay_rate(&series, 0.0).unwrap();
        assert!((fit.alpha - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.window, 0..200);
        let flat: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(fit_decay_rate(&flat, 0.0).unwrap().alpha, 0.0);
        assert!(matches!(fit_decay_rate(&series[..9], 0.0), Err(FitError::WindowTooShort { points: 9, .. })));
        // floor cuts the window
        let fit = fit_decay_rate(&series, 5.0 * (-2.0f64 * 1.0).exp()).unwrap();
        assert_eq!(fit.window, 0..20);
    }

    fn record(step: usize, entropy: f64, slack: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            step,
            t: step as f64,
            entropy,
            production: 0.0,
            f: 0.0,
            l2_n: 0.0,
            l2_p: 0.0,
            l2_psi: 0.0,
            min_n: 0.0,
            max_n: 0.0,
            min_p: 0.0,
            max_p: 0.0,
            fp_iters: 0,
            slack,
        }
    }

    #[test]
    fn entropy_chain_flags_increase() {
        let records = vec![record(0, 1.0, 0.0), record(1, 0.5, 0.5), record(2, 0.7, -0.2), record(3, 0.1, 0.6)];
        let report = check_entropy_chain(&records, 1e-9);
        assert_eq!(report.inequality_violations, vec![2]);
        assert_eq!(report.monotonicity_violations, vec![2]);
        assert_eq!(report.first_violation(), Some(2));
        assert_eq!(report.min_slack, -0.2);
        assert!(check_entropy_chain(&records[..2], 1e-9).is_clean());
    }

    #[test]
    fn csv_row_has_all_columns() {
        let row = record(3, 0.25, 0.0).csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("3,3.0000000000000000e0,2.5000000000000000e-1,"));
    }
}
