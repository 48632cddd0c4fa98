//! The three equations, their parameters, right-hand sides and first integrals.
//!
//! ```text
//! (I)   w'' = z + 6w^2
//! (II)  w'' = alpha + z w + 2w^3
//! (IV)  2w w'' = w'^2 + 3w^4 + 8z w^3 + 4(z^2 - alpha) w^2 + 2beta,   gamma^2 = -beta/2
//! ```
//!
//! Fourth-equation solutions pass through zeros of `w`, so that equation is
//! also available in the differentiated, polynomial third-order form
//! [`rhs3`], which never divides by `w`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C = Complex64;

/// Relative size of `|w|` below which the second-order form of (IV) is refused.
pub const ZERO_GUARD: f64 = 1e-3;

/// `ZERO_GUARD` scaled to the local size of the independent variable.
pub fn zero_guard(z: C) -> f64 {
    ZERO_GUARD * z.norm().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquationKind {
    #[serde(rename = "I")]
    PI,
    #[serde(rename = "II")]
    PII,
    #[serde(rename = "IV")]
    PIV,
}

impl EquationKind {
    /// Order of the movable poles (double for I, simple otherwise).
    pub fn pole_order(self) -> i32 {
        match self {
            EquationKind::PI => 2,
            _ => 1,
        }
    }

    /// Exponent `b` of the natural length scale `|z|^-b` near large poles.
    pub fn length_exponent(self) -> f64 {
        match self {
            EquationKind::PI => 0.25,
            EquationKind::PII => 0.5,
            EquationKind::PIV => 1.0,
        }
    }
}

impl std::fmt::Display for EquationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EquationKind::PI => "I",
            EquationKind::PII => "II",
            EquationKind::PIV => "IV",
        })
    }
}

impl std::str::FromStr for EquationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" | "p1" | "pi" => Ok(EquationKind::PI),
            "ii" | "2" | "p2" | "pii" => Ok(EquationKind::PII),
            "iv" | "4" | "p4" | "piv" => Ok(EquationKind::PIV),
            other => Err(format!("unknown equation `{other}`")),
        }
    }
}

/// Which square root of `-beta/2` is carried as `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaBranch {
    Plus,
    Minus,
}

impl GammaBranch {
    pub fn sign(self) -> f64 {
        match self {
            GammaBranch::Plus => 1.0,
            GammaBranch::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            GammaBranch::Plus => GammaBranch::Minus,
            GammaBranch::Minus => GammaBranch::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquationSpec {
    pub kind: EquationKind,
    pub alpha: C,
    pub beta: C,
    pub gamma: C,
    pub gamma_branch: GammaBranch,
}

impl EquationSpec {
    pub fn first() -> Self {
        EquationSpec {
            kind: EquationKind::PI,
            alpha: C::new(0.0, 0.0),
            beta: C::new(0.0, 0.0),
            gamma: C::new(0.0, 0.0),
            gamma_branch: GammaBranch::Plus,
        }
    }

    pub fn second(alpha: C) -> Self {
        EquationSpec { kind: EquationKind::PII, alpha, ..Self::first() }
    }

    /// Fourth equation with `gamma = ±sqrt(-beta/2)`, the sign fixed by `branch`
    /// relative to the principal square root.
    pub fn fourth(alpha: C, beta: C, branch: GammaBranch) -> Self {
        let gamma = (-beta / 2.0).sqrt() * branch.sign();
        EquationSpec { kind: EquationKind::PIV, alpha, beta, gamma, gamma_branch: branch }
    }

    /// Fourth equation parametrised by `(alpha, gamma)`; `beta = -2 gamma^2`.
    pub fn fourth_gamma(alpha: C, gamma: C) -> Self {
        let beta = -2.0 * gamma * gamma;
        let principal = (-beta / 2.0).sqrt();
        let branch = if (gamma - principal).norm() <= (gamma + principal).norm() {
            GammaBranch::Plus
        } else {
            GammaBranch::Minus
        };
        EquationSpec { kind: EquationKind::PIV, alpha, beta, gamma, gamma_branch: branch }
    }

    /// Natural length unit near `z`: the radius scale of pole discs.
    pub fn length_scale(&self, z: C) -> f64 {
        z.norm().max(1.0).powf(-self.kind.length_exponent())
    }

    /// `|w|` measured in local units (`1` at distance one local unit from a pole).
    pub fn scaled_magnitude(&self, z: C, w: C) -> f64 {
        w.norm() * self.length_scale(z).powi(self.kind.pole_order())
    }
}

/// Point value of a solution: `w`, `w'` and, for the third-order form, `w''`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub z: C,
    pub w: C,
    pub w1: C,
    pub w2: Option<C>,
}

impl Jet {
    pub fn new(z: C, w: C, w1: C) -> Self {
        Jet { z, w, w1, w2: None }
    }

    pub fn with_w2(z: C, w: C, w1: C, w2: C) -> Self {
        Jet { z, w, w1, w2: Some(w2) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstIntegralValue {
    pub value: C,
    pub calibration_point: C,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EqError {
    #[error("w = {w} is too close to zero at z = {z} for the second-order form")]
    DivisionNearZero { z: C, w: C },
    #[error("operation needs the fourth equation, got {0}")]
    WrongEquation(EquationKind),
    #[error("jet carries no second derivative")]
    MissingSecondDerivative,
}

fn guard(jet: &Jet) -> Result<(), EqError> {
    if jet.w.norm() < zero_guard(jet.z) {
        Err(EqError::DivisionNearZero { z: jet.z, w: jet.w })
    } else {
        Ok(())
    }
}

/// Right-hand side of (IV) times `2w`: `w'^2 + 3w^4 + 8zw^3 + 4(z^2-alpha)w^2 + 2beta`.
pub fn p4_numerator(eq: &EquationSpec, z: C, w: C, w1: C) -> C {
    let w2 = w * w;
    w1 * w1 + w2 * (3.0 * w2 + 8.0 * z * w + 4.0 * (z * z - eq.alpha)) + 2.0 * eq.beta
}

/// `w''` from the equation.
pub fn rhs(eq: &EquationSpec, jet: &Jet) -> Result<C, EqError> {
    let (z, w) = (jet.z, jet.w);
    Ok(match eq.kind {
        EquationKind::PI => z + 6.0 * w * w,
        EquationKind::PII => eq.alpha + z * w + 2.0 * w * w * w,
        EquationKind::PIV => {
            guard(jet)?;
            p4_numerator(eq, z, w, jet.w1) / (2.0 * w)
        }
    })
}

/// `w'''` of (IV) in polynomial form; regular through zeros of `w`.
pub fn rhs3(eq: &EquationSpec, jet: &Jet) -> C {
    let (z, w, w1) = (jet.z, jet.w, jet.w1);
    w1 * (6.0 * w * w + 12.0 * z * w + 4.0 * (z * z - eq.alpha)) + 4.0 * w * (w + z)
}

/// Derivative of the first integral: `w`, `w^2`, `w^2 + 2zw`.
pub fn first_integral_rate(eq: &EquationSpec, z: C, w: C) -> C {
    match eq.kind {
        EquationKind::PI => w,
        EquationKind::PII => w * w,
        EquationKind::PIV => w * w + 2.0 * z * w,
    }
}

/// Value of the first integral solving the algebraic relation at `jet`.
pub fn first_integral(eq: &EquationSpec, jet: &Jet) -> Result<FirstIntegralValue, EqError> {
    let (z, w, w1) = (jet.z, jet.w, jet.w1);
    let value = match eq.kind {
        EquationKind::PI => (4.0 * w * w * w + 2.0 * z * w - w1 * w1) / 2.0,
        EquationKind::PII => w * w * w * w + z * w * w + 2.0 * eq.alpha * w - w1 * w1,
        EquationKind::PIV => {
            guard(jet)?;
            let w2 = w * w;
            (w2 * (w2 + 4.0 * z * w + 4.0 * (z * z - eq.alpha)) - 2.0 * eq.beta - w1 * w1)
                / (4.0 * w)
        }
    };
    Ok(FirstIntegralValue { value, calibration_point: z })
}

/// Sum of the magnitudes of the terms in the algebraic relation for `W`,
/// the natural scale for comparing two evaluations of it.
pub fn first_integral_scale(eq: &EquationSpec, jet: &Jet) -> f64 {
    let (z, w, w1) = (jet.z.norm(), jet.w.norm(), jet.w1.norm());
    match eq.kind {
        EquationKind::PI => (4.0 * w * w * w + 2.0 * z * w + w1 * w1) / 2.0,
        EquationKind::PII => w.powi(4) + z * w * w + 2.0 * eq.alpha.norm() * w + w1 * w1,
        EquationKind::PIV => {
            let q = (jet.z * jet.z - eq.alpha).norm();
            (w.powi(4) + 4.0 * z * w.powi(3) + 4.0 * q * w * w + 2.0 * eq.beta.norm() + w1 * w1)
                / (4.0 * w.max(f64::MIN_POSITIVE))
        }
    }
}

/// `|C|` with `C = w'^2 + 3w^4 + 8zw^3 + 4(z^2-alpha)w^2 + 2beta - 2w w''`.
pub fn constraint_residual(eq: &EquationSpec, jet: &Jet) -> Result<f64, EqError> {
    if eq.kind != EquationKind::PIV {
        return Err(EqError::WrongEquation(eq.kind));
    }
    let w2 = jet.w2.ok_or(EqError::MissingSecondDerivative)?;
    Ok((p4_numerator(eq, jet.z, jet.w, jet.w1) - 2.0 * jet.w * w2).norm())
}

/// Equation residual of a full jet, relative to the largest term involved.
pub fn scaled_residual(eq: &EquationSpec, jet: &Jet) -> Result<f64, EqError> {
    let w2 = jet.w2.ok_or(EqError::MissingSecondDerivative)?;
    let (z, w, w1) = (jet.z, jet.w, jet.w1);
    let terms: Vec<C> = match eq.kind {
        EquationKind::PI => vec![w2, -z, -6.0 * w * w],
        EquationKind::PII => vec![w2, -eq.alpha, -z * w, -2.0 * w * w * w],
        EquationKind::PIV => {
            let sq = w * w;
            vec![
                2.0 * w * w2,
                -w1 * w1,
                -3.0 * sq * sq,
                -8.0 * z * sq * w,
                -4.0 * z * z * sq,
                4.0 * eq.alpha * sq,
                -2.0 * eq.beta,
            ]
        }
    };
    let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    let total: C = terms.iter().sum();
    Ok(if scale == 0.0 { 0.0 } else { total.norm() / scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn line_jet() -> (EquationSpec, Jet) {
        let eq = EquationSpec::fourth(c(0.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
        (eq, Jet::with_w2(c(1.0, 0.0), c(-2.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0)))
    }

    #[test]
    fn simple_right_hand_sides() {
        let zero = Jet::new(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!(rhs(&EquationSpec::first(), &zero).unwrap(), c(0.0, 0.0));
        assert_eq!(rhs(&EquationSpec::second(c(1.0, 0.0)), &zero).unwrap(), c(1.0, 0.0));
        let (eq, jet) = line_jet();
        assert_eq!(rhs(&eq, &jet).unwrap(), c(0.0, 0.0));
        assert_eq!(rhs3(&eq, &jet), c(0.0, 0.0));
    }

    #[test]
    fn second_order_form_refuses_small_w() {
        let eq = EquationSpec::fourth(c(0.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
        let jet = Jet::new(c(3.0, 0.0), c(1e-4, 0.0), c(2.0, 0.0));
        assert!(matches!(rhs(&eq, &jet), Err(EqError::DivisionNearZero { .. })));
        assert!(first_integral(&eq, &jet).is_err());
    }

    #[test]
    fn third_derivative_at_a_zero() {
        let eq = EquationSpec::fourth(c(0.3, 0.1), c(-0.5, 0.2), GammaBranch::Minus);
        let z = c(1.2, -0.7);
        let jet = Jet::new(z, c(0.0, 0.0), 2.0 * eq.gamma);
        let expect = 4.0 * (z * z - eq.alpha) * 2.0 * eq.gamma;
        assert!((rhs3(&eq, &jet) - expect).norm() < 1e-14);
    }

    #[test]
    fn gamma_branch_is_kept() {
        let beta = c(-0.7, 0.4);
        let plus = EquationSpec::fourth(c(0.0, 0.0), beta, GammaBranch::Plus);
        let minus = EquationSpec::fourth(c(0.0, 0.0), beta, GammaBranch::Minus);
        assert_eq!(plus.gamma, -minus.gamma);
        for eq in [plus, minus] {
            assert!((eq.gamma * eq.gamma + eq.beta / 2.0).norm() < 1e-15);
            let again = EquationSpec::fourth_gamma(eq.alpha, eq.gamma);
            assert_eq!(again.gamma_branch, eq.gamma_branch);
        }
    }

    #[test]
    fn first_integral_examples() {
        let j = Jet::new(c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0));
        assert_eq!(first_integral(&EquationSpec::first(), &j).unwrap().value, c(0.0, 0.0));
        let j = Jet::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let eq = EquationSpec::second(c(0.0, 0.0));
        assert_eq!(first_integral(&eq, &j).unwrap().value, c(-1.0, 0.0));
        let (eq, _) = line_jet();
        for x in [1.0, 2.5, -3.0] {
            let z = c(x, 0.5);
            let jet = Jet::new(z, -2.0 * z, c(-2.0, 0.0));
            // All terms cancel: the integral is identically zero on this line.
            let w_int = first_integral(&eq, &jet).unwrap().value;
            assert!(w_int.norm() < 1e-12 * (1.0 + z.norm().powi(3)));
        }
    }

    #[test]
    fn constraint_examples() {
        let (eq, jet) = line_jet();
        assert_eq!(constraint_residual(&eq, &jet).unwrap(), 0.0);
        let eq = EquationSpec::fourth(c(-2.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
        let z = c(2.0, 0.0);
        let jet = Jet::with_w2(z, -1.0 / z, 1.0 / (z * z), -2.0 / (z * z * z));
        assert!(constraint_residual(&eq, &jet).unwrap() < 1e-15);
        let mut bumped = jet;
        bumped.w2 = Some(jet.w2.unwrap() + 1e-6);
        let r = constraint_residual(&eq, &bumped).unwrap();
        assert!((r - 2.0 * jet.w.norm() * 1e-6).abs() < 1e-12);
    }

    #[test]
    fn rhs3_matches_finite_differences() {
        // Advance along the exact flow for a tiny step and difference w''.
        let eq = EquationSpec::fourth(c(0.4, -0.2), c(-1.1, 0.3), GammaBranch::Plus);
        let mut state = 12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..20 {
            let z = c(rnd() * 2.0, rnd() * 2.0);
            let w = c(1.0 + rnd().abs(), rnd());
            let w1 = c(rnd(), rnd());
            let jet = Jet::new(z, w, w1);
            let w2 = rhs(&eq, &jet).unwrap();
            let d = 1e-6;
            let ahead = Jet::new(z + d, w + d * w1 + 0.5 * d * d * w2, w1 + d * w2);
            let fd = (rhs(&eq, &ahead).unwrap() - w2) / d;
            let exact = rhs3(&eq, &jet);
            assert!((fd - exact).norm() < 1e-4 * (1.0 + exact.norm()), "{fd} vs {exact}");
        }
    }
}
