//! Pressure laws and the functions derived from them.
//!
//! For a pressure `r` the enthalpy is `h(s) = ∫₁ˢ r'(τ)/τ dτ`, `H` is the
//! antiderivative of `h` vanishing at 1 and `g` is the generalized inverse of
//! `h`, extended by zero below `h(0⁺)`. Two laws are provided: the isothermal
//! law `r(s) = s` (Boltzmann statistics, `h = log`, `g = exp`) and the power
//! law `r(s) = s^α` with `α > 1`.

use std::fmt;

/// Below this separation of `log a` and `log b` the diffusion mean switches to
/// the midpoint derivative branch.
pub const DR_LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressureLaw {
    Isothermal,
    Power { alpha: f64 },
}

impl fmt::Display for PressureLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PressureLaw::Isothermal => write!(f, "isothermal"),
            PressureLaw::Power { alpha } => write!(f, "power(alpha={alpha})"),
        }
    }
}

impl PressureLaw {
    /// Power law `r(s) = s^alpha`. Returns `None` unless `alpha > 1`.
    pub fn power(alpha: f64) -> Option<Self> {
        (alpha.is_finite() && alpha > 1.0).then_some(PressureLaw::Power { alpha })
    }

    pub fn is_isothermal(&self) -> bool {
        matches!(self, PressureLaw::Isothermal)
    }

    pub fn pressure(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Isothermal => s,
            PressureLaw::Power { alpha } => s.max(0.0).powf(alpha),
        }
    }

    /// `r'(s)`.
    pub fn pressure_derivative(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Isothermal => 1.0,
            PressureLaw::Power { alpha } => alpha * s.max(0.0).powf(alpha - 1.0),
        }
    }

    /// `h(0⁺)`: `-∞` for the isothermal law, `-α/(α-1)` for a power law.
    pub fn enthalpy_floor(&self) -> f64 {
        match *self {
            PressureLaw::Isothermal => f64::NEG_INFINITY,
            PressureLaw::Power { alpha } => -alpha / (alpha - 1.0),
        }
    }

    /// Enthalpy `h(s)`. Nonpositive arguments map to `h(0⁺)`.
    pub fn enthalpy(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Isothermal => {
                if s > 0.0 {
                    s.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            PressureLaw::Power { alpha } => {
                if s > 0.0 {
                    alpha / (alpha - 1.0) * (s.powf(alpha - 1.0) - 1.0)
                } else {
                    self.enthalpy_floor()
                }
            }
        }
    }

    /// `H(s) = ∫₁ˢ h`, convex with `H(1) = 0`. Defined on `s ≥ 0`.
    pub fn big_h(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Isothermal => {
                if s > 0.0 {
                    s * s.ln() - s + 1.0
                } else {
                    1.0
                }
            }
            PressureLaw::Power { alpha } => {
                let s = s.max(0.0);
                (s.powf(alpha) - 1.0 - alpha * (s - 1.0)) / (alpha - 1.0)
            }
        }
    }

    /// Generalized inverse `g` of the enthalpy.
    pub fn g_inverse(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Isothermal => s.exp(),
            PressureLaw::Power { alpha } => {
                let base = 1.0 + (alpha - 1.0) * s / alpha;
                if base <= 0.0 {
                    0.0
                } else {
                    base.powf(1.0 / (alpha - 1.0))
                }
            }
        }
    }

    /// One-sided derivative of `g`; zero at and below the kink `h(0⁺)`.
    pub fn g_inverse_derivative(&self, s: f64) -> f64 {
        match *self {
            PressureLaw::Isothermal => s.exp(),
            PressureLaw::Power { alpha } => {
                let base = 1.0 + (alpha - 1.0) * s / alpha;
                if base <= 0.0 {
                    0.0
                } else {
                    base.powf(1.0 / (alpha - 1.0) - 1.0) / alpha
                }
            }
        }
    }

    /// Equilibrium-preserving diffusion mean
    /// `dr(a, b) = (h(b) - h(a)) / (log b - log a)`, with `r'((a+b)/2)` when
    /// the logarithms (nearly) coincide. When one argument vanishes the
    /// quotient's limit is used: `1` for the isothermal law, `0` for a power
    /// law, whose enthalpy stays finite at `0`.
    ///
    /// The result is exactly symmetric in its arguments.
    pub fn dr_mean(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if !(lo > 0.0) {
            return match *self {
                PressureLaw::Isothermal => 1.0,
                // limit of the quotient as lo → 0: h(0⁺) is finite while
                // log lo diverges
                PressureLaw::Power { .. } => 0.0,
            };
        }
        let dlog = hi.ln() - lo.ln();
        if dlog.abs() < DR_LOG_EPS {
            return self.pressure_derivative(0.5 * (lo + hi));
        }
        match *self {
            PressureLaw::Isothermal => 1.0,
            PressureLaw::Power { alpha } => {
                // h(hi) - h(lo) = α/(α-1) lo^(α-1) expm1((α-1) dlog)
                let q = alpha - 1.0;
                alpha / q * lo.powf(q) * (q * dlog).exp_m1() / dlog
            }
        }
    }

    /// Bregman gap `H(x) - H(y) - h(y)(x - y)` evaluated without the
    /// cancellation of the naive formula, so that it is nonnegative and
    /// relatively accurate when `x` is close to `y`.
    pub fn bregman(&self, x: f64, y: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            PressureLaw::Isothermal => {
                if !(y > 0.0) {
                    return f64::INFINITY;
                }
                if x == 0.0 {
                    return y;
                }
                let u = (x - y) / y;
                if u.abs() < 1e-3 {
                    // (1+u)log(1+u) - u = Σ_{k≥2} (-1)^k u^k / (k(k-1))
                    let mut sum = 0.0;
                    let mut pow = u * u;
                    for k in 2..10 {
                        let kf = k as f64;
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        sum += sign * pow / (kf * (kf - 1.0));
                        pow *= u;
                    }
                    y * sum
                } else {
                    (x * (x / y).ln() - x + y).max(0.0)
                }
            }
            PressureLaw::Power { alpha } => {
                let q = alpha - 1.0;
                if !(y > 0.0) {
                    return x.powf(alpha) / q;
                }
                let u = (x - y) / y;
                let scale = y.powf(alpha) / q;
                if u.abs() < 1e-3 {
                    // (1+u)^α - 1 - αu = Σ_{k≥2} binom(α, k) u^k
                    let mut sum = 0.0;
                    let mut coeff = alpha * (alpha - 1.0) / 2.0;
                    let mut pow = u * u;
                    for k in 2..12 {
                        sum += coeff * pow;
                        let kf = k as f64;
                        coeff *= (alpha - kf) / (kf + 1.0);
                        pow *= u;
                    }
                    scale * sum
                } else {
                    (scale * ((1.0 + u).powf(alpha) - 1.0 - alpha * u)).max(0.0)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn enthalpy_values() {
        let iso = PressureLaw::Isothermal;
        assert_eq!(iso.enthalpy(1.0), 0.0);
        assert!(close(iso.enthalpy(E), 1.0, 1e-15));
        let p53 = PressureLaw::power(5.0 / 3.0).unwrap();
        assert!(close(p53.enthalpy(8.0), 7.5, 1e-14));
        assert!(close(p53.enthalpy(0.0), -2.5, 1e-15));
        assert_eq!(iso.enthalpy(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn big_h_values() {
        for law in [PressureLaw::Isothermal, PressureLaw::power(2.0).unwrap()] {
            assert_eq!(law.big_h(1.0), 0.0);
        }
        assert!(close(PressureLaw::Isothermal.big_h(E), 1.0, 1e-15));
        assert!(close(PressureLaw::power(2.0).unwrap().big_h(2.0), 1.0, 1e-15));
        assert_eq!(PressureLaw::Isothermal.big_h(0.0), 1.0);
    }

    #[test]
    fn g_inverse_values() {
        let p53 = PressureLaw::power(5.0 / 3.0).unwrap();
        assert_eq!(PressureLaw::Isothermal.g_inverse(0.0), 1.0);
        assert_eq!(p53.g_inverse(0.0), 1.0);
        assert!(close(p53.g_inverse(7.5), 8.0, 1e-14));
        assert_eq!(p53.g_inverse(-10.0), 0.0);
        assert_eq!(p53.g_inverse_derivative(-10.0), 0.0);
    }

    #[test]
    fn dr_mean_values() {
        assert_eq!(PressureLaw::Isothermal.dr_mean(2.0, 5.0), 1.0);
        assert_eq!(PressureLaw::Isothermal.dr_mean(3.0, 3.0), 1.0);
        let p2 = PressureLaw::power(2.0).unwrap();
        assert!(close(p2.dr_mean(3.0, 3.0), 6.0, 1e-15));
        assert!(close(p2.dr_mean(1.0, E), 2.0 * (E - 1.0), 1e-14));
        assert!(close(p2.dr_mean(1.0, E), 3.436563657, 1e-9));
        // zero argument falls back to r' at the midpoint
        assert_eq!(p2.dr_mean(0.0, 2.0), 0.0);
        assert_eq!(p2.dr_mean(0.0, 0.0), 0.0);
        assert_eq!(PressureLaw::Isothermal.dr_mean(0.0, 2.0), 1.0);
        // continuous at a vanishing argument
        let q = p2.dr_mean(1e-200, 2.0);
        assert!(q > 0.0 && q < 0.01);
    }

    #[test]
    fn dr_mean_matches_quotient_away_from_diagonal() {
        let p53 = PressureLaw::power(5.0 / 3.0).unwrap();
        let (a, b) = (0.3, 0.7);
        let quotient = (p53.enthalpy(b) - p53.enthalpy(a)) / (b.ln() - a.ln());
        assert!(close(p53.dr_mean(a, b), quotient, 1e-13));
        assert_eq!(p53.dr_mean(a, b), p53.dr_mean(b, a));
    }

    #[test]
    fn bregman_matches_naive_formula() {
        for law in [
            PressureLaw::Isothermal,
            PressureLaw::power(1.5).unwrap(),
            PressureLaw::power(5.0 / 3.0).unwrap(),
            PressureLaw::power(3.0).unwrap(),
        ] {
            for &(x, y) in &[(0.5, 2.0), (3.0, 0.2), (1.0001, 1.0), (0.9995, 1.0), (2.0, 2.0)] {
                let naive = law.big_h(x) - law.big_h(y) - law.enthalpy(y) * (x - y);
                let stable = law.bregman(x, y);
                assert!((stable - naive).abs() <= 1e-12, "{law} {x} {y}: {stable} vs {naive}");
                assert!(stable >= 0.0);
            }
        }
        // y = 0 under a power law: H(x) - H(0) - h(0⁺) x
        let p53 = PressureLaw::power(5.0 / 3.0).unwrap();
        let naive = p53.big_h(0.4) - p53.big_h(0.0) - p53.enthalpy(0.0) * 0.4;
        assert!(close(p53.bregman(0.4, 0.0), naive, 1e-13));
    }

    #[test]
    fn bregman_small_gap_is_quadratic() {
        let law = PressureLaw::Isothermal;
        let gap = law.bregman(1.0 + 1e-9, 1.0);
        assert!(close(gap, 0.5e-18, 1e-6), "{gap}");
    }

    #[test]
    fn power_constructor_rejects_alpha_le_one() {
        assert!(PressureLaw::power(1.0).is_none());
        assert!(PressureLaw::power(f64::NAN).is_none());
    }
}
