//! Bernoulli function and Scharfetter–Gummel edge fluxes.
//!
//! All fluxes are written from the point of view of a cell `K` and one of its
//! edges `σ`: `n_k` is the density in `K`, `n_ksigma` the density on the other
//! side of `σ` (neighbour cell, Dirichlet value, or `n_k` itself on a Neumann
//! edge) and `dpsi = Ψ_{K,σ} - Ψ_K`.

/// Below this diffusion mean the generalized flux is replaced by its
/// pure-upwind limit.
pub const DR_DEGENERATE: f64 = 1e-14;

const TAYLOR_RADIUS: f64 = 1e-8;
const SATURATION: f64 = 700.0;

/// `B(x) = x / (eˣ - 1)`, `B(0) = 1`.
#[inline]
pub fn bernoulli(x: f64) -> f64 {
    let ax = x.abs();
    if ax < TAYLOR_RADIUS {
        1.0 - 0.5 * x + x * x / 12.0
    } else if x > SATURATION {
        x * (-x).exp()
    } else if x < -SATURATION {
        -x
    } else {
        x / x.exp_m1()
    }
}

/// `dr · B(x / dr)`, continuous down to `dr = 0` where it becomes
/// `max(-x, 0)`.
#[inline]
pub fn scaled_bernoulli(x: f64, dr: f64) -> f64 {
    if dr <= DR_DEGENERATE {
        (-x).max(0.0)
    } else {
        dr * bernoulli(x / dr)
    }
}

/// Inputs of a single oriented edge flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFluxInput {
    pub tau: f64,
    pub n_k: f64,
    pub n_ksigma: f64,
    pub dpsi: f64,
    pub dr: f64,
}

/// Classical Scharfetter–Gummel electron flux `τ[B(-DΨ)N_K - B(DΨ)N_{K,σ}]`.
/// The `dr` field of the input is ignored.
#[inline]
pub fn sg_flux_n(input: &EdgeFluxInput) -> f64 {
    input.tau * (bernoulli(-input.dpsi) * input.n_k - bernoulli(input.dpsi) * input.n_ksigma)
}

/// Classical Scharfetter–Gummel hole flux: the electron flux with the
/// potential difference reversed.
#[inline]
pub fn sg_flux_p(input: &EdgeFluxInput) -> f64 {
    sg_flux_n(&EdgeFluxInput { dpsi: -input.dpsi, ..*input })
}

/// Generalized Scharfetter–Gummel electron flux
/// `τ·dr·[B(-DΨ/dr)N_K - B(DΨ/dr)N_{K,σ}]`.
#[inline]
pub fn gen_sg_flux_n(input: &EdgeFluxInput) -> f64 {
    input.tau
        * (scaled_bernoulli(-input.dpsi, input.dr) * input.n_k
            - scaled_bernoulli(input.dpsi, input.dr) * input.n_ksigma)
}

#[inline]
pub fn gen_sg_flux_p(input: &EdgeFluxInput) -> f64 {
    gen_sg_flux_n(&EdgeFluxInput { dpsi: -input.dpsi, ..*input })
}

/// Dissipation defect of the generalized electron flux:
/// `F·D(h(N) - Ψ) + τ·min(N_K, N_{K,σ})·(D(h(N) - Ψ))²`, which is never
/// positive. It vanishes at equilibrium pairs and for equal densities.
/// For holes pass the reversed potential difference.
pub fn lemma1_residual(input: &EdgeFluxInput, h_k: f64, h_ksigma: f64) -> f64 {
    let flux = gen_sg_flux_n(input);
    let d_quasi_fermi = (h_ksigma - h_k) - input.dpsi;
    flux * d_quasi_fermi + input.tau * input.n_k.min(input.n_ksigma) * d_quasi_fermi * d_quasi_fermi
}
