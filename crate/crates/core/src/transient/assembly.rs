use crate::flux::scaled_bernoulli;
use crate::mesh::EdgeKind;
use crate::problem::Problem;
use crate::sparse::CsrMatrix;

use super::poisson::cell_pattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Carrier {
    Electrons,
    Holes,
}

impl Carrier {
    /// Sign of the potential difference seen by the carrier.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Carrier::Electrons => 1.0,
            Carrier::Holes => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Carrier::Electrons => "A_N",
            Carrier::Holes => "A_P",
        }
    }
}

/// Frozen data of one linearized density system.
pub(crate) struct LinearizedData<'a> {
    /// Iterate of the carrier being solved for.
    pub own: &'a [f64],
    /// Iterate of the other carrier.
    pub other: &'a [f64],
    pub psi: &'a [f64],
    pub previous: &'a [f64],
    /// `R₀(N_K, P_K)` at the iterate.
    pub r0: &'a [f64],
    pub mu: f64,
    pub dt: f64,
}

/// Matrix positions of the four entries coupled by an interior edge.
#[derive(Debug, Clone, Copy)]
struct EdgeSlots {
    kk: usize,
    kl: usize,
    ll: usize,
    lk: usize,
}

/// Reusable assembly of `A_N`, `A_P` and their right-hand sides.
#[derive(Debug, Clone)]
pub(crate) struct DensityAssembler {
    pattern: CsrMatrix,
    diag: Vec<usize>,
    slots: Vec<Option<EdgeSlots>>,
}

impl DensityAssembler {
    pub fn new(problem: &Problem) -> Self {
        let mesh = &problem.mesh;
        let pattern = cell_pattern(mesh);
        let diag = (0..mesh.num_cells()).map(|k| pattern.position(k, k).unwrap()).collect();
        let slots = mesh
            .edges()
            .iter()
            .map(|e| match e.kind {
                EdgeKind::Interior { k, l } => Some(EdgeSlots {
                    kk: pattern.position(k, k).unwrap(),
                    kl: pattern.position(k, l).unwrap(),
                    ll: pattern.position(l, l).unwrap(),
                    lk: pattern.position(l, k).unwrap(),
                }),
                _ => None,
            })
            .collect();
        DensityAssembler { pattern, diag, slots }
    }

    pub fn new_matrix(&self) -> CsrMatrix {
        self.pattern.clone()
    }

    /// Fills `a` and `rhs` with the linearized system of `carrier`:
    ///
    /// `m(K)/Δt[(1 + μ/λ²)û_K − μ/λ² u_K − uⁿ_K] + Σ_σ τ_σ dr_σ[B(−sDΨ/dr_σ)û_K − B(sDΨ/dr_σ)û_{K,σ}]
    ///  = −m(K)R₀(N_K, P_K)(û_K v_K − 1)`
    ///
    /// with `dr_σ` frozen at the iterate `u`, `v` the other carrier and
    /// `s = ±1`.
    pub fn assemble(
        &self,
        problem: &Problem,
        carrier: Carrier,
        data: &LinearizedData,
        a: &mut CsrMatrix,
        rhs: &mut [f64],
    ) {
        let mesh = &problem.mesh;
        let law = problem.law;
        let s = carrier.sign();
        let boundary = match carrier {
            Carrier::Electrons => &problem.n_dirichlet,
            Carrier::Holes => &problem.p_dirichlet,
        };
        let penalty = data.mu / problem.lambda2;
        let recombination = !problem.recombination.is_none();
        let values = a.values_mut();
        values.fill(0.0);
        for c in mesh.cells() {
            let k = c.id;
            let w = c.measure / data.dt;
            values[self.diag[k]] = w * (1.0 + penalty);
            rhs[k] = w * (penalty * data.own[k] + data.previous[k]);
            if recombination {
                values[self.diag[k]] += c.measure * data.r0[k] * data.other[k];
                rhs[k] += c.measure * data.r0[k];
            }
        }
        for (e, slots) in mesh.edges().iter().zip(&self.slots) {
            match e.kind {
                EdgeKind::Interior { k, l } => {
                    let slots = slots.unwrap();
                    let x = s * (data.psi[l] - data.psi[k]);
                    let dr = law.dr_mean(data.own[k], data.own[l]);
                    let out_k = e.tau * scaled_bernoulli(-x, dr);
                    let in_k = e.tau * scaled_bernoulli(x, dr);
                    values[slots.kk] += out_k;
                    values[slots.kl] -= in_k;
                    values[slots.ll] += in_k;
                    values[slots.lk] -= out_k;
                }
                EdgeKind::Dirichlet { k, index } => {
                    let x = s * (problem.psi_dirichlet[index] - data.psi[k]);
                    let dr = law.dr_mean(data.own[k], boundary[index]);
                    values[self.diag[k]] += e.tau * scaled_bernoulli(-x, dr);
                    rhs[k] += e.tau * scaled_bernoulli(x, dr) * boundary[index];
                }
                EdgeKind::Neumann { .. } => {}
            }
        }
    }
}

/// Residuals of the implicit scheme
/// `m(K)(u_K − uⁿ_K)/Δt + Σ_σ F_{K,σ} + m(K)R(N_K, P_K)` for both carriers,
/// scaled by `Δt/m(K)`.
pub fn scheme_residual(
    problem: &Problem,
    n: &[f64],
    p: &[f64],
    psi: &[f64],
    n_prev: &[f64],
    p_prev: &[f64],
    dt: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mesh = &problem.mesh;
    let law = problem.law;
    let mut rn = vec![0.0; mesh.num_cells()];
    let mut rp = vec![0.0; mesh.num_cells()];
    for c in mesh.cells() {
        let k = c.id;
        let (r, _) = problem.recombination.evaluate(n[k], p[k]);
        rn[k] = c.measure * ((n[k] - n_prev[k]) / dt + r);
        rp[k] = c.measure * ((p[k] - p_prev[k]) / dt + r);
    }
    // F = τ[dr B(−x/dr) u_K − dr B(x/dr) u_L]
    let flux = |tau: f64, x: f64, a: f64, b: f64| {
        let dr = law.dr_mean(a, b);
        tau * (scaled_bernoulli(-x, dr) * a - scaled_bernoulli(x, dr) * b)
    };
    for e in mesh.edges() {
        match e.kind {
            EdgeKind::Interior { k, l } => {
                let x = psi[l] - psi[k];
                let fn_ = flux(e.tau, x, n[k], n[l]);
                let fp = flux(e.tau, -x, p[k], p[l]);
                rn[k] += fn_;
                rn[l] -= fn_;
                rp[k] += fp;
                rp[l] -= fp;
            }
            EdgeKind::Dirichlet { k, index } => {
                let x = problem.psi_dirichlet[index] - psi[k];
                rn[k] += flux(e.tau, x, n[k], problem.n_dirichlet[index]);
                rp[k] += flux(e.tau, -x, p[k], problem.p_dirichlet[index]);
            }
            EdgeKind::Neumann { .. } => {}
        }
    }
    for c in mesh.cells() {
        let scale = dt / c.measure;
        rn[c.id] *= scale;
        rp[c.id] *= scale;
    }
    (rn, rp)
}
