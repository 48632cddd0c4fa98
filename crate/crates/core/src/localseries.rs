//! Laurent expansions at movable poles and asymptotic expansions at infinity.
//!
//! Coefficients are produced numerically at fixed parameters by an
//! order-by-order solve: each new coefficient cancels the lowest uncancelled
//! order of the equation residual.  For the first and second equations the
//! expansions at infinity proceed in half powers of `z`; internally they are
//! series in `v = z^(-1/2)` (principal root).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eqcore::{EquationKind, EquationSpec, Jet, C};
use crate::frac::Frac;
use crate::lseries::{constant, solve_orders, z_series, Frame, Ls};

/// Pole disc radius in local units.
pub const DISC_DELTA: f64 = 0.5;
/// Default number of Laurent orders used to seed jets.
pub const SEED_ORDER: usize = 40;
/// Cap on asymptotic truncation.
pub const MAX_ASYMPTOTIC_ORDER: usize = 24;
/// Relative fit residual above which a pole fit is rejected.
pub const FIT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("offset {offset} exceeds the validity radius {radius}")]
    OffsetOutsideValidity { offset: f64, radius: f64 },
    #[error("pole fit failed: relative residual {residual:.3e}")]
    FitFailed { residual: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("family {0:?} has no expansion for these parameters")]
    UnsupportedFamily(FamilyTag),
    #[error("family {family:?} does not belong to equation {kind}")]
    FamilyMismatch { family: FamilyTag, kind: EquationKind },
    #[error("truncation order {0} is outside the supported range")]
    BadOrder(usize),
    #[error("log-derivative expansion needs beta = 0 (IV) or alpha = 0 (II)")]
    WrongParameters,
}

/// Residue sign of a simple pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Residue {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Residue {
    pub fn value(self) -> f64 {
        match self {
            Residue::Plus => 1.0,
            Residue::Minus => -1.0,
        }
    }

    pub fn from_sign(x: f64) -> Self {
        if x >= 0.0 {
            Residue::Plus
        } else {
            Residue::Minus
        }
    }
}

/// Initial data at a pole: location, residue sign (ignored for I) and the
/// free Laurent coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleSeed {
    pub eq: EquationSpec,
    pub p: C,
    pub eps: Residue,
    pub h: C,
}

impl PoleSeed {
    pub fn new(eq: EquationSpec, p: C, eps: Residue, h: C) -> Self {
        PoleSeed { eq, p, eps, h }
    }

    /// Pole disc radius `delta |p|^-b` (with `|p|` floored at one).
    pub fn disc_radius(&self) -> f64 {
        DISC_DELTA * self.eq.length_scale(self.p)
    }

    /// Largest offset at which [`seed_jet`] is trusted.
    pub fn validity_radius(&self) -> f64 {
        self.disc_radius()
    }

    /// Index of the free coefficient after the leading one.
    fn resonance(&self) -> usize {
        match self.eq.kind {
            EquationKind::PI => 6,
            EquationKind::PII => 4,
            EquationKind::PIV => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SeriesVariable {
    AroundPole { p: C },
    AtInfinity,
}

/// Truncated expansion `sum coeffs[k] * x^(leading + k*step)` with `x = z - p`
/// around a pole or `x = z` at infinity (then `step < 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesExpansion {
    pub label: String,
    pub variable: SeriesVariable,
    pub exponent_step: Frac,
    pub leading_exponent: Frac,
    pub coeffs: Vec<C>,
    pub truncation_order: usize,
}

fn cpow(x: C, e: Frac) -> C {
    if e.den == 1 {
        x.powi(e.num as i32)
    } else if e.den == 2 {
        x.sqrt().powi(e.num as i32)
    } else {
        (x.ln() * e.value()).exp()
    }
}

impl SeriesExpansion {
    pub fn exponent(&self, k: usize) -> Frac {
        self.leading_exponent.add(self.exponent_step.mul_int(k as i64))
    }

    /// Coefficient of `x^e`; zero for slots outside the stored window.
    pub fn coefficient_at(&self, e: Frac) -> C {
        let off = e.add(Frac::new(-self.leading_exponent.num, self.leading_exponent.den));
        let step = self.exponent_step;
        let k = Frac::new(off.num * step.den, off.den * step.num);
        if k.den != 1 || k.num < 0 || k.num as usize >= self.coeffs.len() {
            return C::new(0.0, 0.0);
        }
        self.coeffs[k.num as usize]
    }

    fn local(&self, z: C) -> C {
        match self.variable {
            SeriesVariable::AroundPole { p } => z - p,
            SeriesVariable::AtInfinity => z,
        }
    }

    /// Value and first two `z`-derivatives at `z`.
    pub fn eval(&self, z: C) -> [C; 3] {
        let x = self.local(z);
        let mut out = [C::new(0.0, 0.0); 3];
        for (k, a) in self.coeffs.iter().enumerate() {
            if *a == C::new(0.0, 0.0) {
                continue;
            }
            let e = self.exponent(k);
            let ev = e.value();
            let xe = cpow(x, e);
            out[0] += a * xe;
            out[1] += a * ev * xe / x;
            out[2] += a * ev * (ev - 1.0) * xe / (x * x);
        }
        out
    }

    pub fn value(&self, z: C) -> C {
        self.eval(z)[0]
    }

    /// Size of the last stored term at `z`: a proxy for the truncation error.
    pub fn tail_size(&self, z: C) -> f64 {
        let k = self.coeffs.len() - 1;
        (self.coeffs[k] * cpow(self.local(z), self.exponent(k))).norm()
    }
}

fn ls_to_expansion(label: String, variable: SeriesVariable, s: &Ls, unit: i64, order: usize) -> SeriesExpansion {
    // Pole frames use v = z - p (unit 1); infinity frames use v = z^(-1/unit).
    let (lead, step) = match variable {
        SeriesVariable::AroundPole { .. } => (Frac::int(s.lo as i64), Frac::int(1)),
        SeriesVariable::AtInfinity => (Frac::new(-(s.lo as i64), unit), Frac::new(-1, unit)),
    };
    SeriesExpansion {
        label,
        variable,
        exponent_step: step,
        leading_exponent: lead,
        coeffs: s.c.clone(),
        truncation_order: order,
    }
}

/// Residual of the equation for a series `w` in `frame`.
fn equation_residual(eq: &EquationSpec, frame: Frame, w: &Ls) -> Ls {
    let hi = w.hi() + 8;
    let z = z_series(frame, hi);
    let w1 = w.deriv(frame);
    let w2 = w1.deriv(frame);
    match eq.kind {
        EquationKind::PI => w2.sub(&z).sub(&w.mul(w).scale(C::new(6.0, 0.0))),
        EquationKind::PII => {
            w2.sub(&constant(eq.alpha, hi)).sub(&z.mul(w)).sub(&w.powi(3).scale(C::new(2.0, 0.0)))
        }
        EquationKind::PIV => {
            let sq = w.mul(w);
            let zz = z.mul(&z).sub(&constant(eq.alpha, hi));
            w.mul(&w2)
                .scale(C::new(2.0, 0.0))
                .sub(&w1.mul(&w1))
                .sub(&sq.mul(&sq).scale(C::new(3.0, 0.0)))
                .sub(&z.mul(&sq.mul(w)).scale(C::new(8.0, 0.0)))
                .sub(&zz.mul(&sq).scale(C::new(4.0, 0.0)))
                .sub(&constant(2.0 * eq.beta, hi))
        }
    }
}

/// First integral as a series, from the algebraic relation.
fn first_integral_series(eq: &EquationSpec, frame: Frame, w: &Ls) -> Ls {
    let hi = w.hi() + 8;
    let z = z_series(frame, hi);
    let w1 = w.deriv(frame);
    let sq = w.mul(w);
    match eq.kind {
        EquationKind::PI => sq
            .mul(w)
            .scale(C::new(4.0, 0.0))
            .add(&z.mul(w).scale(C::new(2.0, 0.0)))
            .sub(&w1.mul(&w1))
            .scale(C::new(0.5, 0.0)),
        EquationKind::PII => sq
            .mul(&sq)
            .add(&z.mul(&sq))
            .add(&w.scale(2.0 * eq.alpha))
            .sub(&w1.mul(&w1)),
        EquationKind::PIV => {
            let zz = z.mul(&z).sub(&constant(eq.alpha, hi));
            let num = sq
                .mul(&sq)
                .add(&z.mul(&sq.mul(w)).scale(C::new(4.0, 0.0)))
                .add(&zz.mul(&sq).scale(C::new(4.0, 0.0)))
                .sub(&constant(2.0 * eq.beta, hi))
                .sub(&w1.mul(&w1));
            num.mul(&w.inv()).scale(C::new(0.25, 0.0))
        }
    }
}

fn laurent_ls(seed: &PoleSeed, top: i32) -> Ls {
    let m = seed.eq.kind.pole_order();
    let lo = -m;
    let n = (top - lo).max(0) as usize;
    let c0 = match seed.eq.kind {
        EquationKind::PI => C::new(1.0, 0.0),
        _ => C::new(seed.eps.value(), 0.0),
    };
    let frame = Frame::Pole(seed.p);
    let eq = seed.eq;
    solve_orders(lo, c0, n, Some((seed.resonance(), seed.h)), |w| equation_residual(&eq, frame, w))
}

fn seed_label(seed: &PoleSeed) -> String {
    format!("pole:{}:p={},eps={},h={}", seed.eq.kind, seed.p, seed.eps.value(), seed.h)
}

/// Laurent expansion of `w` at the pole, through `(z-p)^n`.
pub fn laurent_w(seed: &PoleSeed, n: usize) -> SeriesExpansion {
    let s = laurent_ls(seed, n as i32);
    ls_to_expansion(seed_label(seed), SeriesVariable::AroundPole { p: seed.p }, &s, 1, n)
}

/// Laurent expansion of the first integral at the pole, through `(z-p)^n`.
pub fn laurent_big_w(seed: &PoleSeed, n: usize) -> SeriesExpansion {
    let m = seed.eq.kind.pole_order();
    let w = laurent_ls(seed, n as i32 + 3 * m + 2);
    let full = first_integral_series(&seed.eq, Frame::Pole(seed.p), &w).truncate(n as i32);
    // Orders below the simple pole cancel identically.
    let big = Ls { lo: -1, c: (-1..=n as i32).map(|e| full.at(e)).collect() };
    ls_to_expansion(seed_label(seed), SeriesVariable::AroundPole { p: seed.p }, &big, 1, n)
}

/// Jet of the seeded solution at `p + offset` (with `w''` for the fourth equation).
pub fn seed_jet(seed: &PoleSeed, offset: C) -> Result<Jet, SeriesError> {
    let radius = seed.validity_radius();
    if offset.norm() > radius * (1.0 + 1e-12) || offset.norm() == 0.0 {
        return Err(SeriesError::OffsetOutsideValidity { offset: offset.norm(), radius });
    }
    let s = laurent_w(seed, SEED_ORDER);
    let z = seed.p + offset;
    let [w, w1, w2] = s.eval(z);
    Ok(match seed.eq.kind {
        EquationKind::PIV => Jet::with_w2(z, w, w1, w2),
        _ => Jet::new(z, w, w1),
    })
}

/// First integral of the seeded solution at `p + offset`, from the Laurent model.
pub fn seed_big_w(seed: &PoleSeed, offset: C) -> C {
    laurent_big_w(seed, SEED_ORDER).value(seed.p + offset)
}

fn pole_guess(eq: &EquationSpec, jet: &Jet) -> C {
    let m = eq.kind.pole_order() as f64;
    jet.z + m * jet.w / jet.w1
}

/// Fit `(p, eps, h)` of the Laurent model to sampled jets near one pole.
///
/// Gauss-Newton on the holomorphic model `w(z; p, h)` with relative
/// residuals; both residue signs are tried for the simple-pole equations.
pub fn detect_pole(eq: &EquationSpec, samples: &[Jet]) -> Result<PoleSeed, SeriesError> {
    const NEED: usize = 8;
    if samples.len() < NEED {
        return Err(SeriesError::TooFewSamples { need: NEED, got: samples.len() });
    }
    let nearest = samples
        .iter()
        .max_by(|a, b| eq.scaled_magnitude(a.z, a.w).total_cmp(&eq.scaled_magnitude(b.z, b.w)))
        .expect("nonempty");
    let p0 = pole_guess(eq, nearest);
    // The sign suggested by the nearest sample goes first; the other is
    // only tried when that fit fails.
    let signs: &[Residue] = match eq.kind {
        EquationKind::PI => &[Residue::Plus],
        _ if (nearest.w * (nearest.z - p0)).re < 0.0 => &[Residue::Minus, Residue::Plus],
        _ => &[Residue::Plus, Residue::Minus],
    };
    let order = 24;
    let mut best: Option<(f64, PoleSeed)> = None;
    for &eps in signs {
        let mut seed = PoleSeed::new(*eq, p0, eps, C::new(0.0, 0.0));
        let scale_p = eq.length_scale(p0) * 1e-6;
        let mut res = f64::INFINITY;
        for _ in 0..40 {
            let model = |s: &PoleSeed| -> Vec<C> {
                let ser = laurent_w(s, order);
                samples.iter().map(|j| (ser.value(j.z) - j.w) / j.w.norm().max(1e-300)).collect()
            };
            let r = model(&seed);
            res = (r.iter().map(|x| x.norm_sqr()).sum::<f64>() / r.len() as f64).sqrt();
            if !res.is_finite() {
                break;
            }
            let hs = 1e-6 * (1.0 + seed.h.norm());
            let mut sp = seed;
            sp.p += scale_p;
            let mut sh = seed;
            sh.h += hs;
            let rp = model(&sp);
            let rh = model(&sh);
            // Normal equations of the 2x2 complex least-squares problem.
            let (mut a11, mut a12, mut a22) = (0.0, C::new(0.0, 0.0), 0.0);
            let (mut b1, mut b2) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
            for i in 0..r.len() {
                let jp = (rp[i] - r[i]) / scale_p;
                let jh = (rh[i] - r[i]) / hs;
                a11 += jp.norm_sqr();
                a22 += jh.norm_sqr();
                a12 += jp.conj() * jh;
                b1 += jp.conj() * r[i];
                b2 += jh.conj() * r[i];
            }
            let det = a11 * a22 - a12.norm_sqr();
            if det.abs() == 0.0 || !det.is_finite() {
                break;
            }
            let dp = (a22 * b1 - a12 * b2) / det;
            let dh = (a11 * b2 - a12.conj() * b1) / det;
            seed.p -= dp;
            seed.h -= dh;
            if dp.norm() < 1e-13 * eq.length_scale(seed.p) && dh.norm() < 1e-11 * (1.0 + seed.h.norm()) {
                let r = model(&seed);
                res = (r.iter().map(|x| x.norm_sqr()).sum::<f64>() / r.len() as f64).sqrt();
                break;
            }
        }
        if res.is_finite() && best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, seed));
        }
        if res <= FIT_TOL {
            break;
        }
    }
    match best {
        Some((res, seed)) if res <= FIT_TOL => Ok(seed),
        Some((res, _)) => Err(SeriesError::FitFailed { residual: res }),
        None => Err(SeriesError::FitFailed { residual: f64::INFINITY }),
    }
}

/// The seven expansion shapes at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    I,
    IIa,
    IIb,
    IVa,
    IVb,
    IVcPlus,
    IVcMinus,
}

/// Sign of the leading square root for the half-power families (relative to
/// `sqrt(z)` taken on the principal branch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RootBranch {
    Plus,
    Minus,
}

impl RootBranch {
    fn sign(self) -> f64 {
        match self {
            RootBranch::Plus => 1.0,
            RootBranch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AsymptoticFamily {
    pub tag: FamilyTag,
    pub branch: RootBranch,
}

impl AsymptoticFamily {
    pub fn new(tag: FamilyTag) -> Self {
        AsymptoticFamily { tag, branch: RootBranch::Plus }
    }

    pub fn with_branch(tag: FamilyTag, branch: RootBranch) -> Self {
        AsymptoticFamily { tag, branch }
    }

    pub fn kind(&self) -> EquationKind {
        match self.tag {
            FamilyTag::I => EquationKind::PI,
            FamilyTag::IIa | FamilyTag::IIb => EquationKind::PII,
            _ => EquationKind::PIV,
        }
    }

    /// `(d, lowest v-exponent, leading coefficient)` with `v = z^(-1/d)`.
    fn leading(&self, eq: &EquationSpec) -> Result<(i32, i32, C), SeriesError> {
        let s = self.branch.sign();
        let i = C::new(0.0, 1.0);
        Ok(match self.tag {
            FamilyTag::I => (2, -1, s * i / 6f64.sqrt()),
            FamilyTag::IIa => (1, 1, -eq.alpha),
            FamilyTag::IIb => (2, -1, s * i / 2f64.sqrt()),
            FamilyTag::IVa => (1, -1, C::new(-2.0 / 3.0, 0.0)),
            FamilyTag::IVb => (1, -1, C::new(-2.0, 0.0)),
            FamilyTag::IVcPlus | FamilyTag::IVcMinus => {
                if eq.gamma.norm() == 0.0 {
                    return Err(SeriesError::UnsupportedFamily(self.tag));
                }
                let g = if self.tag == FamilyTag::IVcPlus { eq.gamma } else { -eq.gamma };
                (1, 1, g)
            }
        })
    }

    fn label(&self) -> String {
        format!("{:?}", self.tag)
    }
}

fn check_family(family: &AsymptoticFamily, eq: &EquationSpec, n: usize) -> Result<(), SeriesError> {
    if family.kind() != eq.kind {
        return Err(SeriesError::FamilyMismatch { family: family.tag, kind: eq.kind });
    }
    if n > MAX_ASYMPTOTIC_ORDER {
        return Err(SeriesError::BadOrder(n));
    }
    Ok(())
}

fn asymptotic_ls(family: &AsymptoticFamily, eq: &EquationSpec, n: usize) -> Result<(i32, Ls), SeriesError> {
    let (d, lo, c0) = family.leading(eq)?;
    let frame = Frame::Infinity(d);
    let eqc = *eq;
    Ok((d, solve_orders(lo, c0, n, None, |w| equation_residual(&eqc, frame, w))))
}

/// Drop leading slots that vanish, keeping at least one coefficient.
fn trim_leading(mut s: Ls) -> Ls {
    let scale: f64 = s.c.iter().take(8).map(|a| a.norm()).sum();
    while s.c.len() > 1 && s.c[0].norm() <= 1e-13 * scale {
        s.c.remove(0);
        s.lo += 1;
    }
    s
}

/// Expansion of `w` at infinity with `n` terms after the leading one.
pub fn asymptotic_series(family: &AsymptoticFamily, eq: &EquationSpec, n: usize) -> Result<SeriesExpansion, SeriesError> {
    check_family(family, eq, n)?;
    let (d, s) = asymptotic_ls(family, eq, n)?;
    Ok(ls_to_expansion(family.label(), SeriesVariable::AtInfinity, &s, d as i64, n))
}

/// Expansion of the first integral at infinity, derived from [`asymptotic_series`].
pub fn asymptotic_series_big_w(
    family: &AsymptoticFamily,
    eq: &EquationSpec,
    n: usize,
) -> Result<SeriesExpansion, SeriesError> {
    check_family(family, eq, n)?;
    let (d, lo, _) = family.leading(eq)?;
    // Extra orders so that the integral is known through the same depth.
    let (_, w) = asymptotic_ls(family, eq, n + 8)?;
    let big = first_integral_series(eq, Frame::Infinity(d), &w);
    let big = trim_leading(big);
    let top = big.lo + n as i32;
    let big = big.truncate(top.min(big.hi()));
    let _ = lo;
    Ok(ls_to_expansion(format!("W:{}", family.label()), SeriesVariable::AtInfinity, &big, d as i64, n))
}

/// Which pair of opposite sectors an expansion of `w'/w` refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectorPair {
    /// Sectors 0 and 2 (leading `-2z` for IV, `+sqrt z` for II).
    Even,
    /// Sectors 1 and 3 (leading `+2z` for IV, `-sqrt z` for II).
    Odd,
}

/// Expansion of `w'/w` in the degenerate cases `beta = 0` (IV) and `alpha = 0` (II).
pub fn log_derivative_series(eq: &EquationSpec, pair: SectorPair, n: usize) -> Result<SeriesExpansion, SeriesError> {
    if n > MAX_ASYMPTOTIC_ORDER {
        return Err(SeriesError::BadOrder(n));
    }
    let even = pair == SectorPair::Even;
    let (d, c0) = match eq.kind {
        EquationKind::PIV if eq.beta.norm() == 0.0 => (1, if even { -2.0 } else { 2.0 }),
        EquationKind::PII if eq.alpha.norm() == 0.0 => (2, if even { 1.0 } else { -1.0 }),
        _ => return Err(SeriesError::WrongParameters),
    };
    let frame = Frame::Infinity(d);
    let alpha = eq.alpha;
    let kind = eq.kind;
    let s = solve_orders(-1, C::new(c0, 0.0), n, None, |y| {
        let hi = y.hi() + 4;
        let z = z_series(frame, hi);
        let y1 = y.deriv(frame);
        match kind {
            // 2y' + y^2 = 4(z^2 - alpha) once the exponentially small terms are dropped.
            EquationKind::PIV => y1
                .scale(C::new(2.0, 0.0))
                .add(&y.mul(y))
                .sub(&z.mul(&z).sub(&constant(alpha, hi)).scale(C::new(4.0, 0.0))),
            // y' + y^2 = z.
            _ => y1.add(&y.mul(y)).sub(&z),
        }
    });
    let label = format!("logderiv:{}:{:?}", kind, pair);
    Ok(ls_to_expansion(label, SeriesVariable::AtInfinity, &s, d as i64, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqcore::GammaBranch;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn close(a: C, b: C, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn first_equation_laurent_prints() {
        let p = c(0.7, -1.3);
        let h = c(0.2, 0.5);
        let seed = PoleSeed::new(EquationSpec::first(), p, Residue::Plus, h);
        let s = laurent_w(&seed, 4);
        let want = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), -p / 10.0, c(-1.0 / 6.0, 0.0), h];
        assert_eq!(s.coeffs.len(), want.len());
        for (a, b) in s.coeffs.iter().zip(want) {
            assert!(close(*a, b, 1e-14), "{a} vs {b}");
        }
        let big = laurent_big_w(&seed, 4);
        assert!(close(big.coefficient_at(Frac::int(-1)), c(-1.0, 0.0), 1e-14));
        // The algebraic relation fixes the constant at +14h.
        assert!(close(big.coefficient_at(Frac::int(0)), 14.0 * h, 1e-13));
    }

    #[test]
    fn fourth_equation_laurent_prints() {
        let eq = EquationSpec::fourth(c(0.3, 0.2), c(-0.4, 0.1), GammaBranch::Plus);
        let p = c(2.0, 1.0);
        for eps in [Residue::Plus, Residue::Minus] {
            let e = eps.value();
            let seed = PoleSeed::new(eq, p, eps, c(0.1, -0.3));
            let s = laurent_w(&seed, 2);
            assert!(close(s.coeffs[0], c(e, 0.0), 1e-14));
            assert!(close(s.coeffs[1], -p, 1e-14));
            assert!(close(s.coeffs[2], e / 3.0 * (p * p + 2.0 * eq.alpha - 4.0 * e), 1e-13));
            assert!(close(s.coeffs[3], seed.h, 1e-14));
            let big = laurent_big_w(&seed, 1);
            assert!(close(big.coeffs[0], c(-1.0, 0.0), 1e-13));
            assert!(close(big.coeffs[1], 2.0 * seed.h + 2.0 * (eq.alpha - e) * p, 1e-12));
        }
    }

    #[test]
    fn second_equation_laurent_example() {
        let seed = PoleSeed::new(EquationSpec::second(c(0.0, 0.0)), c(0.0, 0.0), Residue::Plus, c(0.0, 0.0));
        let s = laurent_w(&seed, 3);
        assert!(s.coefficient_at(Frac::int(1)).norm() < 1e-15);
        assert!(close(s.coefficient_at(Frac::int(2)), c(-0.25, 0.0), 1e-15));
        assert!(s.coefficient_at(Frac::int(3)).norm() < 1e-15);
    }

    #[test]
    fn seed_jet_sums_the_series() {
        let seed = PoleSeed::new(EquationSpec::first(), c(1.0, 0.0), Residue::Plus, c(0.0, 0.0));
        let jet = seed_jet(&seed, c(0.1, 0.0)).unwrap();
        let expected = 100.0 - 0.1 * 0.01 - 1e-3 / 6.0;
        assert!((jet.w - expected).norm() < 1e-6);
        let oracle = laurent_w(&seed, 12).value(c(1.1, 0.0));
        assert!((jet.w - oracle).norm() < 1e-12 * oracle.norm());

        let eq = EquationSpec::fourth(c(0.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
        let seed = PoleSeed::new(eq, c(3.0, 0.0), Residue::Plus, c(0.0, 0.0));
        let jet = seed_jet(&seed, c(0.05, 0.0)).unwrap();
        let c1 = (9.0 - 4.0) / 3.0;
        assert!((jet.w - (20.0 - 3.0 + c1 * 0.05)).norm() < 1e-2);
        let oracle = laurent_w(&seed, 12).value(c(3.05, 0.0));
        assert!((jet.w - oracle).norm() < 1e-12 * oracle.norm());

        let conj = seed_jet(&seed, c(0.05, -0.02)).unwrap();
        let plain = seed_jet(&seed, c(0.05, 0.02)).unwrap();
        assert!((conj.w - plain.w.conj()).norm() < 1e-12 * plain.w.norm());
        assert!(seed_jet(&seed, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn detect_pole_inverts_the_generator() {
        let eq = EquationSpec::fourth(c(0.5, 0.0), c(-0.5, 0.0), GammaBranch::Plus);
        let seed = PoleSeed::new(eq, c(10.0, 0.0), Residue::Plus, c(0.0, 0.0));
        let ser = laurent_w(&seed, 40);
        let samples: Vec<Jet> = (0..10)
            .map(|k| {
                let t = 0.015 * C::from_polar(1.0, 0.6 * k as f64);
                let [w, w1, _] = ser.eval(seed.p + t);
                Jet::new(seed.p + t, w, w1)
            })
            .collect();
        let fit = detect_pole(&eq, &samples).unwrap();
        assert!((fit.p - seed.p).norm() < 1e-8);
        assert_eq!(fit.eps, Residue::Plus);
        assert!((fit.h - seed.h).norm() < 1e-6, "h = {}", fit.h);

        let seed = PoleSeed::new(EquationSpec::first(), c(-0.5, 0.8), Residue::Plus, c(0.3, 0.0));
        let ser = laurent_w(&seed, 40);
        let samples: Vec<Jet> = (0..8)
            .map(|k| {
                let t = 0.2 * C::from_polar(1.0, 0.8 * k as f64);
                let [w, w1, _] = ser.eval(seed.p + t);
                Jet::new(seed.p + t, w, w1)
            })
            .collect();
        let fit = detect_pole(&EquationSpec::first(), &samples).unwrap();
        assert!((fit.p - seed.p).norm() < 1e-9);
        assert!((fit.h - seed.h).norm() < 1e-6);
    }

    #[test]
    fn detect_pole_on_reciprocal_solution() {
        let eq = EquationSpec::fourth(c(-2.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
        let samples: Vec<Jet> = (0..8)
            .map(|k| {
                let z = 0.1 * C::from_polar(1.0, 0.3 + 0.7 * k as f64);
                Jet::new(z, -1.0 / z, 1.0 / (z * z))
            })
            .collect();
        let fit = detect_pole(&eq, &samples).unwrap();
        assert!(fit.p.norm() < 1e-10);
        assert_eq!(fit.eps, Residue::Minus);
        assert!(fit.h.norm() < 1e-8);
    }

    #[test]
    fn asymptotic_prints() {
        let alpha = c(0.7, -0.2);
        let gamma = c(0.4, 0.9);
        let eq = EquationSpec::fourth_gamma(alpha, gamma);
        let b = asymptotic_series(&AsymptoticFamily::new(FamilyTag::IVb), &eq, 6).unwrap();
        assert!(close(b.coefficient_at(Frac::int(1)), c(-2.0, 0.0), 1e-14));
        assert!(close(b.coefficient_at(Frac::int(-1)), -alpha, 1e-13));
        let want = (3.0 * alpha * alpha - gamma * gamma + 1.0) / 4.0;
        assert!(close(b.coefficient_at(Frac::int(-3)), want, 1e-12));

        let eq2 = EquationSpec::second(c(1.0, 0.0));
        let a = asymptotic_series(&AsymptoticFamily::new(FamilyTag::IIa), &eq2, 6).unwrap();
        assert!(a.coefficient_at(Frac::int(-4)).norm() < 1e-14);

        let one = asymptotic_series(&AsymptoticFamily::new(FamilyTag::I), &EquationSpec::first(), 10).unwrap();
        assert!(close(one.coefficient_at(Frac::int(-2)), c(-1.0 / 48.0, 0.0), 1e-14));
        assert_eq!(one.exponent_step, Frac::new(-1, 2));
    }

    #[test]
    fn asymptotic_first_integral_prints() {
        let alpha = c(0.3, 0.1);
        let gamma = c(-0.5, 0.25);
        let eq = EquationSpec::fourth_gamma(alpha, gamma);
        let wa = asymptotic_series_big_w(&AsymptoticFamily::new(FamilyTag::IVa), &eq, 6).unwrap();
        assert!(close(wa.coefficient_at(Frac::int(3)), c(-8.0 / 27.0, 0.0), 1e-13));
        let wb = asymptotic_series_big_w(&AsymptoticFamily::new(FamilyTag::IVb), &eq, 6).unwrap();
        assert_eq!(wb.leading_exponent, Frac::int(1));
        assert!(close(wb.coeffs[0], 2.0 * alpha, 1e-13));
        let eq2 = EquationSpec::second(c(0.4, 0.0));
        let wiib = asymptotic_series_big_w(&AsymptoticFamily::new(FamilyTag::IIb), &eq2, 6).unwrap();
        assert!(close(wiib.coefficient_at(Frac::int(2)), c(-0.25, 0.0), 1e-13));
    }

    #[test]
    fn degenerate_third_family_is_refused() {
        let eq = EquationSpec::fourth(c(0.5, 0.0), c(0.0, 0.0), GammaBranch::Plus);
        let r = asymptotic_series(&AsymptoticFamily::new(FamilyTag::IVcPlus), &eq, 4);
        assert!(matches!(r, Err(SeriesError::UnsupportedFamily(_))));
        assert!(asymptotic_series(&AsymptoticFamily::new(FamilyTag::IVb), &eq, 30).is_err());
    }

    #[test]
    fn log_derivative_examples() {
        let slots = |s: &SeriesExpansion| {
            [s.coefficient_at(Frac::int(1)), s.coefficient_at(Frac::int(-1)), s.coefficient_at(Frac::int(-3))]
        };
        let eq = EquationSpec::fourth(c(1.0, 0.0), c(0.0, 0.0), GammaBranch::Plus);
        let got = slots(&log_derivative_series(&eq, SectorPair::Even, 6).unwrap());
        for (a, b) in got.iter().zip([-2.0, 0.0, 0.0]) {
            assert!(close(*a, c(b, 0.0), 1e-14));
        }
        let eq = EquationSpec::fourth(c(-1.0, 0.0), c(0.0, 0.0), GammaBranch::Plus);
        let got = slots(&log_derivative_series(&eq, SectorPair::Odd, 6).unwrap());
        for (a, b) in got.iter().zip([2.0, 0.0, 0.0]) {
            assert!(close(*a, c(b, 0.0), 1e-14));
        }
        let eq = EquationSpec::fourth(c(0.0, 0.0), c(0.0, 0.0), GammaBranch::Plus);
        let got = slots(&log_derivative_series(&eq, SectorPair::Even, 6).unwrap());
        for (a, b) in got.iter().zip([-2.0, -1.0, 0.75]) {
            assert!(close(*a, c(b, 0.0), 1e-14));
        }
        let eq2 = EquationSpec::second(c(0.0, 0.0));
        let s = log_derivative_series(&eq2, SectorPair::Even, 8).unwrap();
        assert!(close(s.coefficient_at(Frac::new(1, 2)), c(1.0, 0.0), 1e-14));
        assert!(close(s.coefficient_at(Frac::int(-1)), c(-0.25, 0.0), 1e-14));
        assert!(close(s.coefficient_at(Frac::new(-5, 2)), c(-5.0 / 32.0, 0.0), 1e-14));
        let bad = EquationSpec::fourth(c(0.0, 0.0), c(-1.0, 0.0), GammaBranch::Plus);
        assert!(log_derivative_series(&bad, SectorPair::Even, 4).is_err());
    }
}
