//! Problem data, hypothesis checks and the PN-junction presets.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::constitutive::PressureLaw;
use crate::mesh::{build_cartesian, DiscreteFunction, EdgeKind, Mesh, MeshError, Point, Rect};

/// A scalar field on the domain, sampled at cell centers and edge midpoints.
pub type Field = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

pub fn constant(v: f64) -> Field {
    Arc::new(move |_| v)
}

/// `R(N, P) = R₀(N, P)(NP − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RecombinationModel {
    #[default]
    None,
    /// `R₀ = scale / (τ_P N + τ_N P + τ_C)`.
    Srh { scale: f64, tau_n: f64, tau_p: f64, tau_c: f64 },
    /// `R₀ = C_N N + C_P P`.
    Auger { c_n: f64, c_p: f64 },
}

impl RecombinationModel {
    /// `10 (NP − 1)/(N + P + 1)`.
    pub const PN_SRH: RecombinationModel = RecombinationModel::Srh { scale: 10.0, tau_n: 1.0, tau_p: 1.0, tau_c: 1.0 };
    /// `0.1 (N + P)(NP − 1)`.
    pub const PN_AUGER: RecombinationModel = RecombinationModel::Auger { c_n: 0.1, c_p: 0.1 };

    pub fn is_none(&self) -> bool {
        matches!(self, RecombinationModel::None)
    }

    #[inline]
    pub fn r0(&self, n: f64, p: f64) -> f64 {
        match *self {
            RecombinationModel::None => 0.0,
            RecombinationModel::Srh { scale, tau_n, tau_p, tau_c } => scale / (tau_p * n + tau_n * p + tau_c),
            RecombinationModel::Auger { c_n, c_p } => c_n * n + c_p * p,
        }
    }

    /// Returns `(R, R₀)`.
    #[inline]
    pub fn evaluate(&self, n: f64, p: f64) -> (f64, f64) {
        let r0 = self.r0(n, p);
        (r0 * (n * p - 1.0), r0)
    }

    fn check(&self) -> Result<(), HypothesisError> {
        let ok = match *self {
            RecombinationModel::None => true,
            RecombinationModel::Srh { scale, tau_n, tau_p, tau_c } => {
                scale >= 0.0 && tau_n > 0.0 && tau_p > 0.0 && tau_c > 0.0
            }
            RecombinationModel::Auger { c_n, c_p } => c_n >= 0.0 && c_p >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(HypothesisError::RecombinationCoefficients(format!("{self:?}")))
        }
    }
}

impl fmt::Display for RecombinationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecombinationModel::None => write!(f, "none"),
            RecombinationModel::Srh { scale, tau_n, tau_p, tau_c } => {
                write!(f, "srh(scale={scale}, tau_n={tau_n}, tau_p={tau_p}, tau_c={tau_c})")
            }
            RecombinationModel::Auger { c_n, c_p } => write!(f, "auger(c_n={c_n}, c_p={c_p})"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypothesisError {
    #[error("lambda2 must be positive and finite, got {0}")]
    Lambda2(f64),
    #[error("{what} is not a finite number at {location}")]
    NonFinite { what: &'static str, location: String },
    #[error("{what} is negative ({value}) at {location}")]
    NegativeDensity { what: &'static str, value: f64, location: String },
    #[error("the isothermal law needs strictly positive densities (minimum {0})")]
    IsothermalZeroDensity(f64),
    #[error("lower density bound m = {0} is not positive; the decay estimates need m > 0 (allow the degenerate opt-out to run anyway)")]
    DegenerateBounds(f64),
    #[error(
        "boundary compatibility violated: h({carrier}^D) {sign} Psi^D varies by {spread:e} over the Dirichlet edges"
    )]
    Compatibility { carrier: &'static str, sign: &'static str, spread: f64 },
    #[error("recombination requires the isothermal pressure law; with a nonlinear pressure law R must be 0")]
    RecombinationWithNonlinearPressure,
    #[error("mass action law N^D P^D = 1 violated on Dirichlet edge {edge}: N^D P^D = {product}")]
    MassAction { edge: usize, product: f64 },
    #[error("invalid recombination coefficients: {0}")]
    RecombinationCoefficients(String),
    #[error("the mesh has no Dirichlet edge")]
    NoDirichlet,
}

/// Continuous description of a problem, before discretization.
#[derive(Clone)]
pub struct ProblemSpec {
    pub law: PressureLaw,
    pub lambda2: f64,
    pub doping: Field,
    pub n_boundary: Field,
    pub p_boundary: Field,
    pub psi_boundary: Field,
    pub n_initial: Field,
    pub p_initial: Field,
    pub recombination: RecombinationModel,
    /// Accept `m = 0`; runs are then flagged experimental.
    pub allow_degenerate: bool,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("law", &self.law)
            .field("lambda2", &self.lambda2)
            .field("recombination", &self.recombination)
            .field("allow_degenerate", &self.allow_degenerate)
            .finish_non_exhaustive()
    }
}

/// Discretized problem: cell values of the data, Dirichlet edge values and
/// the derived constants.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub law: PressureLaw,
    pub lambda2: f64,
    pub doping: Vec<f64>,
    pub n_dirichlet: Vec<f64>,
    pub p_dirichlet: Vec<f64>,
    pub psi_dirichlet: Vec<f64>,
    pub n_initial: Vec<f64>,
    pub p_initial: Vec<f64>,
    pub recombination: RecombinationModel,
    /// Lower bound `m` of the data.
    pub m_lower: f64,
    /// Upper bound `M` of the data.
    pub m_upper: f64,
    pub alpha_n: f64,
    pub alpha_p: f64,
    /// `m = 0`: no decay theorem applies.
    pub degenerate: bool,
}

fn finite(what: &'static str, v: f64, location: impl Fn() -> String) -> Result<f64, HypothesisError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(HypothesisError::NonFinite { what, location: location() })
    }
}

fn density(what: &'static str, v: f64, location: impl Fn() -> String) -> Result<f64, HypothesisError> {
    let v = finite(what, v, &location)?;
    if v < 0.0 {
        return Err(HypothesisError::NegativeDensity { what, value: v, location: location() });
    }
    Ok(v)
}

/// Relative tolerance of the compatibility and mass-action checks.
pub const COMPATIBILITY_TOL: f64 = 1e-12;

fn spread(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi, mut sum, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        count += 1;
    }
    (hi - lo, sum / count as f64)
}

impl Problem {
    /// Midpoint-rule discretization of the data on `mesh`, followed by the
    /// hypothesis checks.
    pub fn discretize(spec: &ProblemSpec, mesh: Mesh) -> Result<Problem, HypothesisError> {
        if !(spec.lambda2 > 0.0 && spec.lambda2.is_finite()) {
            return Err(HypothesisError::Lambda2(spec.lambda2));
        }
        if mesh.num_dirichlet() == 0 {
            return Err(HypothesisError::NoDirichlet);
        }
        spec.recombination.check()?;
        if !spec.recombination.is_none() && !spec.law.is_isothermal() {
            return Err(HypothesisError::RecombinationWithNonlinearPressure);
        }

        let cell_loc = |k: usize| move || format!("cell {k}");
        let mut doping = Vec::with_capacity(mesh.num_cells());
        let mut n_initial = Vec::with_capacity(mesh.num_cells());
        let mut p_initial = Vec::with_capacity(mesh.num_cells());
        for cell in mesh.cells() {
            let x = cell.center;
            doping.push(finite("doping", (spec.doping)(x), cell_loc(cell.id))?);
            n_initial.push(density("initial N", (spec.n_initial)(x), cell_loc(cell.id))?);
            p_initial.push(density("initial P", (spec.p_initial)(x), cell_loc(cell.id))?);
        }
        let mut n_dirichlet = Vec::with_capacity(mesh.num_dirichlet());
        let mut p_dirichlet = Vec::with_capacity(mesh.num_dirichlet());
        let mut psi_dirichlet = Vec::with_capacity(mesh.num_dirichlet());
        for &e in mesh.dirichlet_edges() {
            let x = mesh.edge_midpoint(e);
            let loc = move || format!("Dirichlet edge {e}");
            n_dirichlet.push(density("boundary N", (spec.n_boundary)(x), loc)?);
            p_dirichlet.push(density("boundary P", (spec.p_boundary)(x), loc)?);
            psi_dirichlet.push(finite("boundary Psi", (spec.psi_boundary)(x), loc)?);
        }

        let all = || n_initial.iter().chain(&p_initial).chain(&n_dirichlet).chain(&p_dirichlet).copied();
        let m_lower = all().fold(f64::INFINITY, f64::min);
        let m_upper = all().fold(f64::NEG_INFINITY, f64::max);
        if spec.law.is_isothermal() && !(m_lower > 0.0) {
            return Err(HypothesisError::IsothermalZeroDensity(m_lower));
        }
        let degenerate = !(m_lower > 0.0);
        if degenerate && !spec.allow_degenerate {
            return Err(HypothesisError::DegenerateBounds(m_lower));
        }

        let law = spec.law;
        let (spread_n, alpha_n) =
            spread(n_dirichlet.iter().zip(&psi_dirichlet).map(|(&n, &psi)| law.enthalpy(n) - psi));
        let (spread_p, alpha_p) =
            spread(p_dirichlet.iter().zip(&psi_dirichlet).map(|(&p, &psi)| law.enthalpy(p) + psi));
        if !(spread_n <= COMPATIBILITY_TOL * (1.0 + alpha_n.abs())) {
            return Err(HypothesisError::Compatibility { carrier: "N", sign: "-", spread: spread_n });
        }
        if !(spread_p <= COMPATIBILITY_TOL * (1.0 + alpha_p.abs())) {
            return Err(HypothesisError::Compatibility { carrier: "P", sign: "+", spread: spread_p });
        }

        if !spec.recombination.is_none() {
            for (i, (&n, &p)) in n_dirichlet.iter().zip(&p_dirichlet).enumerate() {
                if !((n * p - 1.0).abs() <= COMPATIBILITY_TOL * 10.0) {
                    return Err(HypothesisError::MassAction { edge: mesh.dirichlet_edges()[i], product: n * p });
                }
            }
        }

        Ok(Problem {
            mesh,
            law,
            lambda2: spec.lambda2,
            doping,
            n_dirichlet,
            p_dirichlet,
            psi_dirichlet,
            n_initial,
            p_initial,
            recombination: spec.recombination,
            m_lower,
            m_upper,
            alpha_n,
            alpha_p,
            degenerate,
        })
    }

    pub fn doping_inf_norm(&self) -> f64 {
        self.doping.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Largest compatibility residual over the Dirichlet edges.
    pub fn compatibility_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_dirichlet.len() {
            let psi = self.psi_dirichlet[i];
            worst = worst.max((self.law.enthalpy(self.n_dirichlet[i]) - psi - self.alpha_n).abs());
            worst = worst.max((self.law.enthalpy(self.p_dirichlet[i]) + psi - self.alpha_p).abs());
        }
        worst
    }

    /// Discrete function with the given cell values and the Dirichlet data
    /// of `N`.
    pub fn n_function(&self, cells: Vec<f64>) -> DiscreteFunction {
        DiscreteFunction::new(cells, self.n_dirichlet.clone())
    }

    pub fn p_function(&self, cells: Vec<f64>) -> DiscreteFunction {
        DiscreteFunction::new(cells, self.p_dirichlet.clone())
    }

    pub fn psi_function(&self, cells: Vec<f64>) -> DiscreteFunction {
        DiscreteFunction::new(cells, self.psi_dirichlet.clone())
    }

    /// Dirichlet value index of edge `e`, if it is a Dirichlet edge.
    pub fn dirichlet_index(&self, e: usize) -> Option<usize> {
        match self.mesh.edge(e).kind {
            EdgeKind::Dirichlet { index, .. } => Some(index),
            _ => None,
        }
    }
}

/// Densities and potential at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub n: DiscreteFunction,
    pub p: DiscreteFunction,
    pub psi: DiscreteFunction,
    pub step: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PnCase {
    LinearR0,
    LinearSrh,
    LinearAuger,
    NonlinNondegenerate,
    NonlinDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DopingProfile {
    Zero,
    Pn,
}

impl PnCase {
    pub const ALL: [PnCase; 5] = [
        PnCase::LinearR0,
        PnCase::LinearSrh,
        PnCase::LinearAuger,
        PnCase::NonlinNondegenerate,
        PnCase::NonlinDegenerate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PnCase::LinearR0 => "linear_r0",
            PnCase::LinearSrh => "linear_srh",
            PnCase::LinearAuger => "linear_auger",
            PnCase::NonlinNondegenerate => "nonlinear_nondegenerate",
            PnCase::NonlinDegenerate => "nonlinear_degenerate",
        }
    }

    /// Degenerate boundary data: no decay theorem applies.
    pub fn is_experimental(&self) -> bool {
        matches!(self, PnCase::NonlinDegenerate)
    }

    pub fn law(&self) -> PressureLaw {
        match self {
            PnCase::LinearR0 | PnCase::LinearSrh | PnCase::LinearAuger => PressureLaw::Isothermal,
            PnCase::NonlinNondegenerate | PnCase::NonlinDegenerate => PressureLaw::power(5.0 / 3.0).expect("alpha > 1"),
        }
    }

    pub fn recombination(&self) -> RecombinationModel {
        match self {
            PnCase::LinearSrh => RecombinationModel::PN_SRH,
            PnCase::LinearAuger => RecombinationModel::PN_AUGER,
            _ => RecombinationModel::None,
        }
    }

    /// `(N^D_0, P^D_0, N^D_1, P^D_1)`: values on `{y = 0}` and on the top
    /// contact.
    pub fn boundary_values(&self) -> (f64, f64, f64, f64) {
        use std::f64::consts::E;
        match self {
            PnCase::LinearR0 | PnCase::LinearSrh | PnCase::LinearAuger => (E, 1.0 / E, 1.0, 1.0),
            PnCase::NonlinNondegenerate => (0.9, 0.1, 0.1, 0.9),
            PnCase::NonlinDegenerate => (1.0, 0.0, 0.0, 1.0),
        }
    }
}

impl std::str::FromStr for PnCase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PnCase::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown PN case `{s}`"))
    }
}

impl DopingProfile {
    pub fn name(&self) -> &'static str {
        match self {
            DopingProfile::Zero => "zero",
            DopingProfile::Pn => "pn",
        }
    }

    /// `-1` in the P-region `{x < 1/2, y > 1/2}`, `+1` elsewhere.
    pub fn field(&self) -> Field {
        match self {
            DopingProfile::Zero => constant(0.0),
            DopingProfile::Pn => Arc::new(pn_doping),
        }
    }
}

impl std::str::FromStr for DopingProfile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero" => Ok(DopingProfile::Zero),
            "pn" => Ok(DopingProfile::Pn),
            other => Err(format!("unknown doping profile `{other}` (expected zero or pn)")),
        }
    }
}

pub fn pn_doping(x: Point) -> f64 {
    if x[0] < 0.5 && x[1] > 0.5 {
        -1.0
    } else {
        1.0
    }
}

/// Ohmic contacts of the diode: the bottom side and the top side for
/// `x ≤ 1/4`. Evaluated at boundary edge midpoints.
pub fn pn_dirichlet(x: Point) -> bool {
    x[1] == 0.0 || (x[1] == 1.0 && x[0] <= 0.25)
}

/// Cartesian mesh of the unit square with the diode's boundary labels.
pub fn pn_cartesian_mesh(nx: usize, ny: usize) -> Result<Mesh, MeshError> {
    build_cartesian(nx, ny, Rect::UNIT, pn_dirichlet)
}

/// `v_1 + (v_0 − v_1)(1 − √y)`: equals `v_0` on `{y = 0}` and `v_1` on `{y = 1}`.
fn profile(v0: f64, v1: f64) -> Field {
    Arc::new(move |x: Point| v1 + (v0 - v1) * (1.0 - x[1].max(0.0).sqrt()))
}

pub fn pn_junction_preset(case: PnCase, doping: DopingProfile) -> ProblemSpec {
    let law = case.law();
    let (n0, p0, n1, p1) = case.boundary_values();
    let n_data = profile(n0, n1);
    let p_data = profile(p0, p1);
    let (nd, pd) = (n_data.clone(), p_data.clone());
    let psi_boundary: Field = Arc::new(move |x| 0.5 * (law.enthalpy(nd(x)) - law.enthalpy(pd(x))));
    ProblemSpec {
        law,
        lambda2: 1.0,
        doping: doping.field(),
        n_boundary: n_data.clone(),
        p_boundary: p_data.clone(),
        psi_boundary,
        n_initial: n_data,
        p_initial: p_data,
        recombination: case.recombination(),
        allow_degenerate: case.is_experimental(),
    }
}
