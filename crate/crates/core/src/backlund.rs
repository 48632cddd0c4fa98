//! Backlund transformations of the second and fourth equations, the trivial
//! symmetries, the symbolic signature algebra and chain construction of
//! sub-normal solutions from Weber-Hermite seeds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eqcore::{self, zero_guard, EquationKind, EquationSpec, Jet, C};
use crate::special::LinearizedSolution;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BacklundError {
    #[error("w is too close to zero at z = {0}")]
    AtZeroOfW(C),
    #[error("the transformed function is too close to zero at z = {0}")]
    AtZeroOfWTilde(C),
    #[error("denominator vanishes at z = {0}")]
    DenominatorVanishes(C),
    #[error("transform undefined for alpha = {0}")]
    ParameterExcluded(C),
    #[error("transform needs equation {expected}, got {got}")]
    WrongEquation { expected: EquationKind, got: EquationKind },
    #[error("an odd chain needs k >= 1")]
    BadChainOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformKind {
    Forward,
    Inverse,
    BPlus,
    BMinus,
    HalfToZero,
    Rotate,
    Conjugate,
    GammaFlip,
}

/// Parameters of the fourth equation with the record of how they arose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    pub alpha: C,
    pub gamma: C,
    pub history: Vec<TransformKind>,
}

impl ParameterState {
    pub fn new(alpha: C, gamma: C) -> Self {
        ParameterState { alpha, gamma, history: Vec::new() }
    }

    pub fn of(eq: &EquationSpec) -> Self {
        Self::new(eq.alpha, eq.gamma)
    }

    pub fn spec(&self) -> EquationSpec {
        EquationSpec::fourth_gamma(self.alpha, self.gamma)
    }

    fn then(&self, alpha: C, gamma: C, kind: TransformKind) -> Self {
        let mut history = self.history.clone();
        history.push(kind);
        ParameterState { alpha, gamma, history }
    }

    /// Parameters after one forward step.
    pub fn forward(&self) -> Self {
        let (a, g) = (self.alpha, self.gamma);
        self.then((1.0 - a + 3.0 * g) / 2.0, (1.0 + a + g) / 2.0, TransformKind::Forward)
    }

    /// Parameters after one inverse step.
    pub fn inverse(&self) -> Self {
        let (a, g) = (self.alpha, self.gamma);
        self.then((-1.0 - a + 3.0 * g) / 2.0, (-1.0 + a + g) / 2.0, TransformKind::Inverse)
    }

    /// Replace `gamma` by `-gamma` (the other square root of `-beta/2`).
    pub fn gamma_flipped(&self) -> Self {
        self.then(self.alpha, -self.gamma, TransformKind::GammaFlip)
    }
}

fn p4_second(ps: &ParameterState, z: C, w: C, w1: C) -> C {
    let beta = -2.0 * ps.gamma * ps.gamma;
    let sq = w * w;
    (w1 * w1 + sq * (3.0 * sq + 8.0 * z * w + 4.0 * (z * z - ps.alpha)) + 2.0 * beta) / (2.0 * w)
}

fn with_second(ps: &ParameterState, z: C, w: C, w1: C) -> Jet {
    if w.norm() >= zero_guard(z) {
        Jet::with_w2(z, w, w1, p4_second(ps, z, w, w1))
    } else {
        Jet::new(z, w, w1)
    }
}

/// `w~ = (w' - 2γ - 2zw - w²) / (2w)` without the zero guard.
pub fn biv_forward_unchecked(jet: &Jet, ps: &ParameterState) -> (Jet, ParameterState) {
    let (z, w, w1) = (jet.z, jet.w, jet.w1);
    let w2 = p4_second(ps, z, w, w1);
    let num = w1 - 2.0 * ps.gamma - 2.0 * z * w - w * w;
    let num1 = w2 - 2.0 * w - 2.0 * z * w1 - 2.0 * w * w1;
    let wt = num / (2.0 * w);
    let wt1 = (num1 * w - num * w1) / (2.0 * w * w);
    let next = ps.forward();
    (with_second(&next, z, wt, wt1), next)
}

pub fn biv_forward(jet: &Jet, ps: &ParameterState) -> Result<(Jet, ParameterState), BacklundError> {
    if jet.w.norm() < zero_guard(jet.z) {
        return Err(BacklundError::AtZeroOfW(jet.z));
    }
    Ok(biv_forward_unchecked(jet, ps))
}

/// `w = -(w~' + 2γ~ + 2zw~ + w~²) / (2w~)` without the zero guard; `ps`
/// holds the parameters of `w~`.
pub fn biv_inverse_unchecked(jet: &Jet, ps: &ParameterState) -> (Jet, ParameterState) {
    let (z, w, w1) = (jet.z, jet.w, jet.w1);
    let w2 = p4_second(ps, z, w, w1);
    let num = w1 + 2.0 * ps.gamma + 2.0 * z * w + w * w;
    let num1 = w2 + 2.0 * w + 2.0 * z * w1 + 2.0 * w * w1;
    let out = -num / (2.0 * w);
    let out1 = -(num1 * w - num * w1) / (2.0 * w * w);
    let next = ps.inverse();
    (with_second(&next, z, out, out1), next)
}

pub fn biv_inverse(jet: &Jet, ps: &ParameterState) -> Result<(Jet, ParameterState), BacklundError> {
    if jet.w.norm() < zero_guard(jet.z) {
        return Err(BacklundError::AtZeroOfWTilde(jet.z));
    }
    Ok(biv_inverse_unchecked(jet, ps))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiiDirection {
    Plus,
    Minus,
}

/// `B+ : w -> -w - (α + 1/2)/(w' + w² + z/2)` and its inverse `B-`; returns
/// the transformed jet and parameter.
pub fn bii_transforms(jet: &Jet, alpha: C, dir: BiiDirection) -> Result<(Jet, C), BacklundError> {
    let (z, w, w1) = (jet.z, jet.w, jet.w1);
    let w2 = alpha + z * w + 2.0 * w * w * w;
    let half = C::new(0.5, 0.0);
    let (k, den, den1, out_alpha) = match dir {
        BiiDirection::Plus => {
            if (alpha + half).norm() < 1e-14 {
                return Err(BacklundError::ParameterExcluded(alpha));
            }
            let den = w1 + w * w + 0.5 * z;
            (-(alpha + half), den, w2 + 2.0 * w * w1 + half, alpha + 1.0)
        }
        BiiDirection::Minus => {
            if (alpha - half).norm() < 1e-14 {
                return Err(BacklundError::ParameterExcluded(alpha));
            }
            let den = w1 - w * w - 0.5 * z;
            (alpha - half, den, w2 - 2.0 * w * w1 - half, alpha - 1.0)
        }
    };
    if den.norm() < 1e-14 * (1.0 + w1.norm() + w.norm_sqr() + z.norm()) {
        return Err(BacklundError::DenominatorVanishes(z));
    }
    let out = -w + k / den;
    let out1 = -w1 - k * den1 / (den * den);
    let out2 = out_alpha + z * out + 2.0 * out * out * out;
    Ok((Jet::with_w2(z, out, out1, out2), out_alpha))
}

/// The map from `alpha = 1/2` to `alpha = 0`: `z = -2^(1/3) t` and
/// `-2^(1/3) y(t)² = w'(z) - w(z)² - z/2`.  Returns the jet of `y` at `t`
/// (principal root for `y`).
pub fn bii_half_to_zero(jet: &Jet) -> Result<Jet, BacklundError> {
    let (z, w, w1) = (jet.z, jet.w, jet.w1);
    let cbrt2 = 2f64.cbrt();
    let v = w1 - w * w - 0.5 * z;
    let y = (-v / cbrt2).sqrt();
    if y.norm() < zero_guard(z) {
        return Err(BacklundError::DenominatorVanishes(z));
    }
    // v' with w'' = 1/2 + zw + 2w³
    let v1 = z * w + 2.0 * w * w * w - 2.0 * w * w1;
    let t = -z / cbrt2;
    let y1 = v1 / (2.0 * y);
    Ok(Jet::with_w2(t, y, y1, t * y + 2.0 * y * y * y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    Rotate,
    Conjugate,
}

/// Trivial symmetries.  `Rotate` is the generator of each equation's rotation
/// group: `μ² w(μz)` with `μ⁵ = 1` for (I), `ω w(ωz)` with `ω³ = 1` for (II),
/// and `-i w(iz)` for (IV).  `Conjugate` is `conj w(conj z)`.
pub fn trivial_symmetries(jet: &Jet, eq: &EquationSpec, which: Symmetry) -> (Jet, EquationSpec) {
    match which {
        Symmetry::Conjugate => {
            let out = Jet { z: jet.z.conj(), w: jet.w.conj(), w1: jet.w1.conj(), w2: jet.w2.map(|x| x.conj()) };
            let mut e = *eq;
            e.alpha = eq.alpha.conj();
            e.beta = eq.beta.conj();
            e.gamma = eq.gamma.conj();
            (out, e)
        }
        Symmetry::Rotate => {
            // v(z) = λ w(μ z): the jet at z1 = z0 / μ.
            let (lambda, mu) = match eq.kind {
                EquationKind::PI => {
                    let mu = C::from_polar(1.0, 2.0 * std::f64::consts::PI / 5.0);
                    (mu * mu, mu)
                }
                EquationKind::PII => {
                    let om = C::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
                    (om, om)
                }
                EquationKind::PIV => (C::new(0.0, -1.0), C::new(0.0, 1.0)),
            };
            let out = Jet {
                z: jet.z / mu,
                w: lambda * jet.w,
                w1: lambda * mu * jet.w1,
                w2: jet.w2.map(|x| lambda * mu * mu * x),
            };
            let e = match eq.kind {
                EquationKind::PIV => EquationSpec::fourth_gamma(-eq.alpha, -eq.gamma),
                _ => *eq,
            };
            (out, e)
        }
    }
}

/// The three symbols a sector entry may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SigSymbol {
    Alpha,
    GammaPlus,
    GammaMinus,
}

impl SigSymbol {
    fn value(self, alpha: C, gamma: C) -> C {
        match self {
            SigSymbol::Alpha => alpha,
            SigSymbol::GammaPlus => gamma,
            SigSymbol::GammaMinus => -gamma,
        }
    }
}

/// Leading coefficients `a_ν` of `W ~ 2 a_ν z` on the four Stokes sectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignatureIV {
    pub symbols: [SigSymbol; 4],
    pub alpha: C,
    pub gamma: C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DihedralMove {
    /// `(a0 a1 a2 a3) -> (-a1 -a2 -a3 -a0)`.
    Rotate,
    /// `(a0 a1 a2 a3) -> (conj a0, conj a3, conj a2, conj a1)`.
    Conjugate,
}

impl SignatureIV {
    pub fn new(symbols: [SigSymbol; 4], alpha: C, gamma: C) -> Self {
        SignatureIV { symbols, alpha, gamma }
    }

    pub fn values(&self) -> [C; 4] {
        self.symbols.map(|s| s.value(self.alpha, self.gamma))
    }

    /// The sector inequalities: `a1-a0, a1-a2, a3-a2, a3-a0` real and `>= 0`.
    pub fn satisfies_order_constraints(&self, tol: f64) -> bool {
        let a = self.values();
        [a[1] - a[0], a[1] - a[2], a[3] - a[2], a[3] - a[0]]
            .iter()
            .all(|d| d.im.abs() <= tol && d.re >= -tol)
    }
}

/// Dihedral action on signatures.  Rotation negates every value, which is
/// absorbed by `(α, γ) -> (-α, -γ)` so the symbols only move.
pub fn signature_transform(sig: &SignatureIV, which: DihedralMove) -> SignatureIV {
    let s = sig.symbols;
    match which {
        DihedralMove::Rotate => SignatureIV { symbols: [s[1], s[2], s[3], s[0]], alpha: -sig.alpha, gamma: -sig.gamma },
        DihedralMove::Conjugate => {
            SignatureIV { symbols: [s[0], s[3], s[2], s[1]], alpha: sig.alpha.conj(), gamma: sig.gamma.conj() }
        }
    }
}

/// Symbol map of one forward Backlund step: `α -> γ₁`, `-γ -> -γ₁`, `γ -> α₁`.
pub fn backlund_signature(sig: &SignatureIV) -> SignatureIV {
    let ps = ParameterState::new(sig.alpha, sig.gamma).forward();
    SignatureIV {
        symbols: sig.symbols.map(|s| match s {
            SigSymbol::Alpha => SigSymbol::GammaPlus,
            SigSymbol::GammaMinus => SigSymbol::GammaMinus,
            SigSymbol::GammaPlus => SigSymbol::Alpha,
        }),
        alpha: ps.alpha,
        gamma: ps.gamma,
    }
}

/// Relabeling used to reach a concrete form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relabel {
    /// `γ -> -γ` (the other root of `-β/2`).
    GammaBranchFlip,
    /// The leading symbol is moved onto `α` by a Backlund change of expansion.
    AlphaIdentification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalReduction {
    /// Form number `1..=5`.
    pub form: u8,
    pub moves: Vec<DihedralMove>,
    pub relabels: Vec<Relabel>,
    pub concrete: SignatureIV,
}

fn abstract_form(s: &[SigSymbol; 4]) -> Option<(u8, SigSymbol, Option<SigSymbol>, Option<SigSymbol>)> {
    let [a0, a1, a2, a3] = *s;
    if a0 == a1 && a2 == a3 && a0 != a2 {
        return Some((1, a0, Some(a2), None));
    }
    if a0 == a2 && a1 == a3 && a0 != a1 {
        return Some((2, a0, Some(a1), None));
    }
    if a0 == a1 && a1 == a2 && a2 != a3 {
        return Some((3, a0, Some(a3), None));
    }
    if a0 == a2 && a1 != a3 && a1 != a0 && a3 != a0 {
        return Some((4, a0, Some(a1), Some(a3)));
    }
    if a0 == a1 && a2 != a3 && a2 != a0 && a3 != a0 {
        return Some((5, a0, Some(a3), Some(a2)));
    }
    None
}

/// Reduce a signature to one of the five concrete forms
/// `(α α -γ -γ)`, `(α -γ α -γ)`, `(α α α -γ)`, `(α -γ α γ)`, `(α α γ -γ)`.
/// Among the eight dihedral images the one needing the fewest relabels,
/// then the fewest moves, is chosen.  `None` for constant signatures.
pub fn canonical_form(sig: &SignatureIV) -> Option<CanonicalReduction> {
    let mut images: Vec<(Vec<DihedralMove>, SignatureIV)> = Vec::new();
    let mut cur = (Vec::new(), *sig);
    for r in 0..4 {
        images.push(cur.clone());
        let mut conj = cur.0.clone();
        conj.push(DihedralMove::Conjugate);
        images.push((conj, signature_transform(&cur.1, DihedralMove::Conjugate)));
        if r < 3 {
            cur.0.push(DihedralMove::Rotate);
            cur.1 = signature_transform(&cur.1, DihedralMove::Rotate);
        }
    }
    let mut best: Option<(usize, usize, CanonicalReduction)> = None;
    for (moves, img) in images {
        let Some((form, a, b, c)) = abstract_form(&img.symbols) else { continue };
        let mut relabels = Vec::new();
        if a != SigSymbol::Alpha {
            relabels.push(Relabel::AlphaIdentification);
        }
        // b should denote -γ; c (forms 4 and 5) should denote +γ.
        let b_is_minus = match (b, a) {
            (Some(SigSymbol::GammaMinus), _) => true,
            (Some(SigSymbol::GammaPlus), _) => false,
            // b is α while a is a γ symbol: after identification b takes a's old role
            (Some(SigSymbol::Alpha), SigSymbol::GammaMinus) => false,
            _ => true,
        };
        if !b_is_minus {
            relabels.push(Relabel::GammaBranchFlip);
        }
        let _ = c;
        let concrete_symbols = {
            use SigSymbol::*;
            match form {
                1 => [Alpha, Alpha, GammaMinus, GammaMinus],
                2 => [Alpha, GammaMinus, Alpha, GammaMinus],
                3 => [Alpha, Alpha, Alpha, GammaMinus],
                4 => [Alpha, GammaMinus, Alpha, GammaPlus],
                _ => [Alpha, Alpha, GammaPlus, GammaMinus],
            }
        };
        let flip = relabels.contains(&Relabel::GammaBranchFlip);
        let concrete = SignatureIV {
            symbols: concrete_symbols,
            alpha: img.alpha,
            gamma: if flip { -img.gamma } else { img.gamma },
        };
        let key = (relabels.len(), moves.len());
        let red = CanonicalReduction { form, moves, relabels, concrete };
        if best.as_ref().is_none_or(|(r, m, _)| key < (*r, *m)) {
            best = Some((key.0, key.1, red));
        }
    }
    best.map(|b| b.2)
}

/// Per-sector contributions to `Δ(w)`: `-2(-1)^ν` on sectors where `w ~ -2z`
/// (symbol `α`), `0` where `w ~ ±γ/z`.
pub fn delta_of_signature(sig: &SignatureIV) -> (i32, [i32; 4]) {
    let mut parts = [0; 4];
    for (nu, s) in sig.symbols.iter().enumerate() {
        if *s == SigSymbol::Alpha {
            parts[nu] = if nu % 2 == 0 { -2 } else { 2 };
        }
    }
    (parts.iter().sum(), parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainParity {
    Even,
    Odd,
}

/// Parameters along `w_0 -> w_1 -> ... -> w_n` where `w_0` solves
/// `w' = 2γ₀ + 2zw + w²` (`α₀ + γ₀ = -1`) and each arrow is an inverse step.
/// The order is `n = 2k` or `2k - 1`; `γ₀` is chosen so that `α_n = alpha`.
pub fn chain_build(k: usize, alpha: C, parity: ChainParity) -> Result<Vec<ParameterState>, BacklundError> {
    let order = match parity {
        ChainParity::Even => 2 * k,
        ChainParity::Odd if k >= 1 => 2 * k - 1,
        ChainParity::Odd => return Err(BacklundError::BadChainOrder),
    };
    let run = |g0: C| {
        let mut out = vec![ParameterState::new(-1.0 - g0, g0)];
        for _ in 0..order {
            let next = out.last().unwrap().inverse();
            out.push(next);
        }
        out
    };
    if order == 0 {
        return Ok(run(-1.0 - alpha));
    }
    // α_n is affine in γ₀.
    let a0 = run(C::new(0.0, 0.0)).last().unwrap().alpha;
    let a1 = run(C::new(1.0, 0.0)).last().unwrap().alpha;
    let g0 = (alpha - a0) / (a1 - a0);
    let mut chain = run(g0);
    chain.last_mut().unwrap().alpha = alpha;
    Ok(chain)
}

/// A Weber-Hermite seed carried up a chain of inverse steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainedSolution {
    pub base: LinearizedSolution,
    pub chain: Vec<ParameterState>,
    /// Apply `v(z) = -i w(iz)` at the end.
    pub rotated: bool,
}

impl ChainedSolution {
    pub fn eq(&self) -> EquationSpec {
        let top = self.chain.last().expect("chain is never empty").spec();
        if self.rotated {
            EquationSpec::fourth_gamma(-top.alpha, -top.gamma)
        } else {
            top
        }
    }

    pub fn order(&self) -> usize {
        self.chain.len() - 1
    }

    /// Jet of the top solution from the base jet at the matching point.
    pub fn lift(&self, base_jet: &Jet) -> Jet {
        let mut jet = *base_jet;
        for ps in &self.chain[..self.chain.len() - 1] {
            jet = biv_inverse_unchecked(&jet, ps).0;
        }
        if self.rotated {
            let eq = self.chain.last().unwrap().spec();
            jet = trivial_symmetries(&jet, &eq, Symmetry::Rotate).0;
        }
        jet
    }

    /// Point of the base solution that maps to `z`.
    pub fn base_point(&self, z: C) -> C {
        if self.rotated {
            C::new(0.0, 1.0) * z
        } else {
            z
        }
    }

    pub fn eval(&self, z: C) -> Jet {
        self.lift(&self.base.eval(self.base_point(z)))
    }
}

/// Residual of `w'² + 4w' - w⁴ - 4zw³ - 4(z²-α)w² + 4`, relative to the
/// largest term; the first-order equation of order-one solutions (`γ = -1`).
pub fn order_one_residual(jet: &Jet, alpha: C) -> f64 {
    let (z, w, w1) = (jet.z, jet.w, jet.w1);
    let sq = w * w;
    let terms = [w1 * w1, 4.0 * w1, -sq * sq, -4.0 * z * sq * w, -4.0 * (z * z - alpha) * sq, C::new(4.0, 0.0)];
    let sum: C = terms.iter().sum();
    let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    sum.norm() / scale.max(f64::MIN_POSITIVE)
}

/// Scaled residual of the fourth equation at a jet that may lack `w''`.
pub fn scaled_iv_residual(jet: &Jet, ps: &ParameterState) -> f64 {
    let jet = if jet.w2.is_some() { *jet } else { with_second(ps, jet.z, jet.w, jet.w1) };
    eqcore::scaled_residual(&ps.spec(), &jet).unwrap_or(f64::INFINITY)
}
