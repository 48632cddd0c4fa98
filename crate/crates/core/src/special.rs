//! Reference solutions: Riccati (Weber-Hermite and Airy) solutions through
//! their linearization, exact rational solutions of the fourth equation, and
//! a real-line shooter for the decreasing solution of the second equation.

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eqcore::{scaled_residual, EquationKind, EquationSpec, Jet, C};
use crate::integrate::{integrate, IntegrateOptions, PathSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("the linear solution vanishes identically")]
    DegenerateU,
    #[error("no catalogued rational solution for alpha = {alpha}, beta = {beta}")]
    NoneKnown { alpha: C, beta: C },
    #[error("shooting bracket lost: {0}")]
    BracketLost(String),
}

/// Sign choice in the Riccati equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RiccatiBranch {
    Plus,
    Minus,
}

impl RiccatiBranch {
    pub fn sign(self) -> f64 {
        match self {
            RiccatiBranch::Plus => 1.0,
            RiccatiBranch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinearKind {
    /// `w' = 2γ ± (2zw + w²)`.
    WeberHermite { gamma: C },
    /// `w' = ±(z/2 + w²)`.
    Airy,
}

/// A Riccati solution `w = ∓u'/u` carried by an entire `u` with
/// `u'' = (p0 + p1 z) u' + (q0 + q1 z) u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedSolution {
    pub eq: EquationSpec,
    pub kind: LinearKind,
    pub branch: RiccatiBranch,
    /// `(u(0), u'(0))`.
    pub init: [C; 2],
}

/// `(u, u')` at a point.
pub type LinearState = [C; 2];

const TAYLOR_MAX_TERMS: usize = 80;

/// `(u, u')` at offset `t` from Taylor coefficients of `u`.
pub fn taylor_sum(a: &[C], t: C) -> LinearState {
    let mut u = C::new(0.0, 0.0);
    let mut du = C::new(0.0, 0.0);
    for k in (1..a.len()).rev() {
        u = u * t + a[k];
        du = du * t + a[k] * k as f64;
    }
    [u * t + a[0], du]
}

pub fn weber_hermite(gamma: C, branch: RiccatiBranch, init: [C; 2]) -> Result<LinearizedSolution, SpecialError> {
    if init[0].norm() == 0.0 && init[1].norm() == 0.0 {
        return Err(SpecialError::DegenerateU);
    }
    let alpha = -branch.sign() * (1.0 + gamma);
    Ok(LinearizedSolution {
        eq: EquationSpec::fourth_gamma(alpha, gamma),
        kind: LinearKind::WeberHermite { gamma },
        branch,
        init,
    })
}

pub fn airy_solution(branch: RiccatiBranch, init: [C; 2]) -> Result<LinearizedSolution, SpecialError> {
    if init[0].norm() == 0.0 && init[1].norm() == 0.0 {
        return Err(SpecialError::DegenerateU);
    }
    Ok(LinearizedSolution {
        eq: EquationSpec::second(C::new(0.5 * branch.sign(), 0.0)),
        kind: LinearKind::Airy,
        branch,
        init,
    })
}

impl LinearizedSolution {
    /// `(p0, p1, q0, q1)` of the linear equation for `u`.
    fn coefficients(&self) -> (C, C, C, C) {
        let s = self.branch.sign();
        let zero = C::new(0.0, 0.0);
        match self.kind {
            LinearKind::WeberHermite { gamma } => (zero, C::new(2.0 * s, 0.0), -2.0 * s * gamma, zero),
            LinearKind::Airy => (zero, zero, zero, C::new(-0.5, 0.0)),
        }
    }

    /// Residue of `w` at every zero of `u`.
    pub fn residue(&self) -> f64 {
        -self.branch.sign()
    }

    /// Largest step for which the local Taylor series converges quickly.
    pub fn step_scale(&self, c: C) -> f64 {
        match self.kind {
            LinearKind::WeberHermite { gamma } => 1.0 / (1.0 + c.norm() + gamma.norm().sqrt()),
            LinearKind::Airy => 1.0 / (1.0 + c.norm()).sqrt(),
        }
    }

    /// Taylor step: `(u, u', u'')` at `c + t` from `(u, u')` at `c`.
    pub fn taylor_step(&self, c: C, state: LinearState, t: C) -> [C; 3] {
        let (p0, p1, q0, q1) = self.coefficients();
        let (pc, qc) = (p0 + p1 * c, q0 + q1 * c);
        let mut a = [C::new(0.0, 0.0); TAYLOR_MAX_TERMS + 3];
        a[0] = state[0];
        a[1] = state[1];
        let mut u = a[0] + a[1] * t;
        let mut du = a[1];
        let mut ddu = C::new(0.0, 0.0);
        let mut tk = t; // t^k for the term a_{k+1}
        let scale = state[0].norm() + state[1].norm();
        let mut small = 0;
        for k in 0..TAYLOR_MAX_TERMS {
            let kf = k as f64;
            let mut rhs = pc * (kf + 1.0) * a[k + 1] + p1 * kf * a[k] + qc * a[k];
            if k >= 1 {
                rhs += q1 * a[k - 1];
            }
            a[k + 2] = rhs / ((kf + 2.0) * (kf + 1.0));
            // contributions of a_{k+2}
            let tk1 = tk * t; // t^(k+2)
            let term_u = a[k + 2] * tk1;
            let term_du = a[k + 2] * (kf + 2.0) * tk;
            let term_ddu = a[k + 2] * (kf + 2.0) * (kf + 1.0) * if k == 0 { C::new(1.0, 0.0) } else { tk / t };
            u += term_u;
            du += term_du;
            ddu += term_ddu;
            tk = tk1;
            let size = term_u.norm() + term_du.norm() * t.norm();
            if size <= 1e-18 * (scale + u.norm()) {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
        }
        [u, du, ddu]
    }

    /// Taylor coefficients of `u` about `c`, enough to sum to full precision
    /// within `radius`.
    pub fn taylor_coeffs(&self, c: C, state: LinearState, radius: f64) -> Vec<C> {
        let (p0, p1, q0, q1) = self.coefficients();
        let (pc, qc) = (p0 + p1 * c, q0 + q1 * c);
        let mut a = Vec::with_capacity(48);
        a.push(state[0]);
        a.push(state[1]);
        let mut peak = state[0].norm().max(state[1].norm() * radius);
        let mut rk = radius;
        let mut small = 0;
        for k in 0..4 * TAYLOR_MAX_TERMS {
            let kf = k as f64;
            let mut rhs = pc * (kf + 1.0) * a[k + 1] + p1 * kf * a[k] + qc * a[k];
            if k >= 1 {
                rhs += q1 * a[k - 1];
            }
            let next = rhs / ((kf + 2.0) * (kf + 1.0));
            a.push(next);
            rk *= radius;
            let size = next.norm() * rk;
            peak = peak.max(size);
            if size <= 1e-18 * peak {
                small += 1;
                if small >= 3 {
                    break;
                }
            } else {
                small = 0;
            }
        }
        a
    }

    /// Carry `(u, u')` from `from` to `to` along the straight segment,
    /// renormalising as it goes.  The overall scale of `u` is irrelevant to `w`.
    pub fn walk(&self, from: C, mut state: LinearState, to: C) -> LinearState {
        let mut c = from;
        loop {
            let left = to - c;
            let dist = left.norm();
            if dist == 0.0 {
                return state;
            }
            let h = self.step_scale(c);
            let t = if dist <= h { left } else { left * (h / dist) };
            let next = self.taylor_step(c, state, t);
            let m = next[0].norm().max(next[1].norm());
            state = if m > 0.0 && m.is_finite() { [next[0] / m, next[1] / m] } else { [next[0], next[1]] };
            c = if dist <= h { to } else { c + t };
        }
    }

    /// `(u, u')` at `z`.  The Maclaurin series is used when it sums without
    /// losing more than four digits (always for polynomial `u`); otherwise the
    /// state is carried along the ray from the origin.
    pub fn linear_state(&self, z: C) -> LinearState {
        match self.origin_series(z) {
            Some(st) => st,
            None => self.walk(C::new(0.0, 0.0), self.init, z),
        }
    }

    /// `(u, u')` at `z` from the series about 0, or `None` when cancellation
    /// would cost more than four digits.
    pub fn origin_series(&self, z: C) -> Option<LinearState> {
        let (p0, p1, q0, q1) = self.coefficients();
        debug_assert_eq!(p0, C::new(0.0, 0.0));
        let max_terms = 200 + (8.0 * z.norm_sqr()) as usize;
        let (mut a0, mut a1) = (C::new(0.0, 0.0), self.init[0]);
        let mut a2 = self.init[1];
        // a_k for k = j-1, j, j+1 as (a0, a1, a2); start with j = 0.
        let (mut u, mut du) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        let (mut mag_u, mut mag_du) = (0.0f64, 0.0f64);
        let mut zk = C::new(1.0, 0.0); // z^j
        let mut zk1 = C::new(0.0, 0.0); // z^(j-1)
        let mut quiet = 0;
        for j in 0..max_terms {
            let jf = j as f64;
            let tu = a1 * zk;
            let tdu = a1 * jf * zk1;
            u += tu;
            du += tdu;
            mag_u += tu.norm();
            mag_du += tdu.norm();
            if !(mag_u.is_finite() && mag_du.is_finite()) {
                return None;
            }
            // (j+2)(j+1) a_{j+2} = p1 j a_j + q0 a_j + q1 a_{j-1}; p0 is always 0.
            let a3 = (p1 * jf * a1 + q0 * a1 + q1 * a0) / ((jf + 2.0) * (jf + 1.0));
            a0 = a1;
            a1 = a2;
            a2 = a3;
            zk1 = zk;
            zk *= z;
            if tu.norm() <= 1e-17 * u.norm() && tdu.norm() <= 1e-17 * du.norm().max(1e-300) && j > 2 {
                quiet += 1;
                if quiet >= 4 {
                    break;
                }
            } else if a0 == C::new(0.0, 0.0) && a1 == C::new(0.0, 0.0) && a2 == C::new(0.0, 0.0) {
                break;
            } else {
                quiet = 0;
            }
        }
        let cond_u = mag_u / u.norm();
        let cond_du = if du.norm() > 0.0 { mag_du / du.norm() } else { 1.0 };
        (cond_u <= 1e4 && cond_du <= 1e4).then_some([u, du])
    }

    /// Jet of `w` (with `w''`) from `(u, u')` at `z`.
    pub fn jet_from_state(&self, z: C, state: LinearState) -> Jet {
        let s = self.branch.sign();
        let w = -s * state[1] / state[0];
        let (w1, w2) = match self.kind {
            LinearKind::WeberHermite { gamma } => {
                let w1 = 2.0 * gamma + s * (2.0 * z * w + w * w);
                (w1, s * (2.0 * w + 2.0 * z * w1 + 2.0 * w * w1))
            }
            LinearKind::Airy => {
                let w1 = s * (0.5 * z + w * w);
                (w1, s * (0.5 + 2.0 * w * w1))
            }
        };
        Jet::with_w2(z, w, w1, w2)
    }

    pub fn eval(&self, z: C) -> Jet {
        self.jet_from_state(z, self.linear_state(z))
    }

    /// Residual of the Painleve equation at `z`, relative to its largest term.
    pub fn residual(&self, z: C) -> f64 {
        let jet = self.eval(z);
        scaled_residual(&self.eq, &jet).unwrap_or(f64::INFINITY)
    }

    /// Newton refinement of a zero of `u` (a pole of `w`) near `z`,
    /// starting from the state at `z`.
    pub fn refine_zero(&self, z: C, state: LinearState) -> Option<C> {
        let (mut c, mut st) = (z, state);
        for _ in 0..30 {
            let step = -st[0] / st[1];
            if !step.is_finite() {
                return None;
            }
            let next = self.taylor_step(c, st, step);
            c += step;
            st = [next[0], next[1]];
            if step.norm() < 1e-15 * c.norm().max(1.0) {
                return Some(c);
            }
        }
        (st[0].norm() < 1e-10 * st[1].norm()).then_some(c)
    }
}

/// Polynomial with exact rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalPoly(pub Vec<Rational64>);

impl RationalPoly {
    pub fn from_ints(c: &[i64]) -> Self {
        RationalPoly(c.iter().map(|&k| Rational64::from_integer(k)).collect()).trimmed()
    }

    fn trimmed(mut self) -> Self {
        while self.0.len() > 1 && *self.0.last().unwrap() == Rational64::from_integer(0) {
            self.0.pop();
        }
        if self.0.is_empty() {
            self.0.push(Rational64::from_integer(0));
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == Rational64::from_integer(0))
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        let zero = Rational64::from_integer(0);
        RationalPoly((0..n).map(|i| *self.0.get(i).unwrap_or(&zero) + *o.0.get(i).unwrap_or(&zero)).collect()).trimmed()
    }

    pub fn scale(&self, k: Rational64) -> Self {
        RationalPoly(self.0.iter().map(|c| c * k).collect()).trimmed()
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = vec![Rational64::from_integer(0); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                r[i + j] += a * b;
            }
        }
        RationalPoly(r).trimmed()
    }

    pub fn deriv(&self) -> Self {
        RationalPoly(
            self.0.iter().enumerate().skip(1).map(|(i, c)| c * Rational64::from_integer(i as i64)).collect(),
        )
        .trimmed()
    }

    pub fn eval(&self, z: C) -> C {
        self.0.iter().rev().fold(C::new(0.0, 0.0), |acc, c| acc * z + (*c.numer() as f64 / *c.denom() as f64))
    }
}

/// Exact rational solution `w = num/den` of the fourth equation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalSolution {
    pub alpha: Rational64,
    pub beta: Rational64,
    pub num: RationalPoly,
    pub den: RationalPoly,
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

impl RationalSolution {
    pub fn eq(&self) -> EquationSpec {
        let f = |q: Rational64| C::new(*q.numer() as f64 / *q.denom() as f64, 0.0);
        EquationSpec::fourth(f(self.alpha), f(self.beta), crate::eqcore::GammaBranch::Plus)
    }

    /// Numerator of `2ww'' - w'^2 - 3w^4 - 8zw^3 - 4(z^2-alpha)w^2 - 2beta`
    /// after clearing the denominator `den^4`; zero iff `w` is a solution.
    pub fn exact_residual(&self) -> RationalPoly {
        let (n, d) = (&self.num, &self.den);
        let (n1, d1) = (n.deriv(), d.deriv());
        // w' = (n'd - nd')/d^2 =: a/d^2;  w'' = (a'd - 2ad')/d^3.
        let a = n1.mul(d).add(&n.mul(&d1).scale(r(-1, 1)));
        let a1 = a.deriv();
        let b = a1.mul(d).add(&a.mul(&d1).scale(r(-2, 1)));
        let z = RationalPoly::from_ints(&[0, 1]);
        let d2 = d.mul(d);
        let n2 = n.mul(n);
        let quad = z.mul(&z).add(&RationalPoly(vec![-self.alpha]));
        let terms = [
            n.mul(&b).scale(r(2, 1)),
            a.mul(&a).scale(r(-1, 1)),
            n2.mul(&n2).scale(r(-3, 1)),
            z.mul(&n2).mul(n).mul(d).scale(r(-8, 1)),
            quad.mul(&n2).mul(&d2).scale(r(-4, 1)),
            d2.mul(&d2).scale(self.beta * r(-2, 1)),
        ];
        terms.iter().fold(RationalPoly::from_ints(&[0]), |acc, t| acc.add(t))
    }

    pub fn jet(&self, z: C) -> Jet {
        let (n, d) = (self.num.eval(z), self.den.eval(z));
        let (n1, d1) = (self.num.deriv().eval(z), self.den.deriv().eval(z));
        let (n2, d2) = (self.num.deriv().deriv().eval(z), self.den.deriv().deriv().eval(z));
        let w = n / d;
        let w1 = (n1 - w * d1) / d;
        let w2 = (n2 - 2.0 * w1 * d1 - w * d2) / d;
        Jet::with_w2(z, w, w1, w2)
    }
}

/// Physicists' Hermite polynomial `H_n`.
fn hermite(n: usize) -> RationalPoly {
    let mut prev = RationalPoly::from_ints(&[1]);
    if n == 0 {
        return prev;
    }
    let mut cur = RationalPoly::from_ints(&[0, 2]);
    let two_z = RationalPoly::from_ints(&[0, 2]);
    for k in 1..n {
        let next = two_z.mul(&cur).add(&prev.scale(r(-2 * k as i64, 1)));
        prev = cur;
        cur = next;
    }
    cur
}

/// `i^(-n) H_n(iz)`: polynomial solution of `u'' + 2zu' - 2nu = 0`.
fn hermite_imaginary(n: usize) -> RationalPoly {
    let h = hermite(n);
    // coefficient of z^k gets i^(k-n); only k ≡ n (mod 2) occurs.
    RationalPoly(
        h.0.iter()
            .enumerate()
            .map(|(k, c)| if ((n - k) / 2) % 2 == 0 { *c } else { -c })
            .collect(),
    )
    .trimmed()
}

/// The hardcoded catalogue, each entry checked by exact substitution in tests.
pub fn rational_catalogue() -> Vec<RationalSolution> {
    let one = RationalPoly::from_ints(&[1]);
    let mut out = vec![
        RationalSolution { alpha: r(0, 1), beta: r(-2, 1), num: RationalPoly::from_ints(&[0, -2]), den: one.clone() },
        RationalSolution { alpha: r(0, 1), beta: r(-2, 9), num: RationalPoly(vec![r(0, 1), r(-2, 3)]), den: one.clone() },
    ];
    for n in 1..=4usize {
        let g = n as i64;
        // plus branch: w = -H_n'/H_n, alpha = -1 - n
        let h = hermite(n);
        out.push(RationalSolution { alpha: r(-1 - g, 1), beta: r(-2 * g * g, 1), num: h.deriv().scale(r(-1, 1)), den: h });
        // minus branch: w = u'/u, alpha = 1 + n
        let u = hermite_imaginary(n);
        out.push(RationalSolution { alpha: r(1 + g, 1), beta: r(-2 * g * g, 1), num: u.deriv(), den: u });
    }
    out
}

/// Catalogued rational solutions for the parameters of `eq`; `w ≡ 0` is
/// included whenever `beta = 0`.
pub fn rational_solutions(eq: &EquationSpec) -> Result<Vec<RationalSolution>, SpecialError> {
    let err = SpecialError::NoneKnown { alpha: eq.alpha, beta: eq.beta };
    if eq.kind != EquationKind::PIV || eq.alpha.im.abs() > 1e-12 || eq.beta.im.abs() > 1e-12 {
        return Err(err);
    }
    let close = |q: Rational64, x: f64| (*q.numer() as f64 / *q.denom() as f64 - x).abs() <= 1e-12 * (1.0 + x.abs());
    let mut hits: Vec<RationalSolution> = rational_catalogue()
        .into_iter()
        .filter(|s| close(s.alpha, eq.alpha.re) && close(s.beta, eq.beta.re))
        .collect();
    if eq.beta.norm() <= 1e-12 {
        if let Some(alpha) = Rational64::approximate_float(eq.alpha.re) {
            hits.push(RationalSolution {
                alpha,
                beta: r(0, 1),
                num: RationalPoly::from_ints(&[0]),
                den: RationalPoly::from_ints(&[1]),
            });
        }
    }
    if hits.is_empty() {
        Err(err)
    } else {
        Ok(hits)
    }
}

/// Result of the real-line shooter: two starting jets at 0 that bracket the
/// decreasing solution of the second equation with `alpha = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingBracket {
    /// Too small: the solution turns negative on `[-L, 0]`.
    pub below: Jet,
    /// Too large: the solution blows up on `[-L, 0]`.
    pub above: Jet,
    /// Tail amplitudes `k` in `w ≈ k Ai(x)` at `x = L` for the two jets.
    pub k_below: f64,
    pub k_above: f64,
}

/// `Ai(x)` and `Ai'(x)` for large positive `x` from the asymptotic series.
pub fn airy_ai_large(x: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let mut u = 1.0;
    let (mut su, mut sv) = (1.0, 1.0);
    let mut last = f64::INFINITY;
    // The series diverges; summation stops at its smallest term.
    for k in 1..=60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        let term = u / zeta.powi(k);
        if term >= last || term < 1e-17 {
            break;
        }
        last = term;
        su += sign * term;
        sv += sign * v / zeta.powi(k);
    }
    let pre = (-zeta).exp() / (2.0 * std::f64::consts::PI.sqrt());
    (pre * su / x.powf(0.25), -pre * x.powf(0.25) * sv)
}

const SHOOT_L: f64 = 8.0;
/// Relative gap to the asymptote below which a shot is not classified;
/// well above the size of the neglected asymptotic terms at `x = -L`.
const SEPARATRIX_MARGIN: f64 = 1e-4;

enum ShotOutcome {
    BlowsUp,
    TurnsNegative,
    Undecided,
}

fn shoot(k: f64) -> Result<(ShotOutcome, Jet), SpecialError> {
    let eq = EquationSpec::second(C::new(0.0, 0.0));
    let (ai, dai) = airy_ai_large(SHOOT_L);
    let start = Jet::new(C::new(SHOOT_L, 0.0), C::new(k * ai, 0.0), C::new(k * dai, 0.0));
    let path = PathSpec::Segment { z0: start.z, z1: C::new(-SHOOT_L, 0.0) };
    let opts = IntegrateOptions { tol: 1e-12, ..Default::default() };
    let traj = integrate(&eq, &start, &path, &opts).map_err(|e| SpecialError::BracketLost(e.to_string()))?;
    let at_zero = traj
        .samples
        .windows(2)
        .find(|w| w[0].jet.z.re >= 0.0 && w[1].jet.z.re <= 0.0)
        .map(|w| if w[0].jet.z.re.abs() < w[1].jet.z.re.abs() { w[0].jet } else { w[1].jet })
        .unwrap_or(traj.samples[0].jet);
    // The jet at 0 is re-evaluated exactly by integrating to 0 alone.
    let to_zero = integrate(&eq, &start, &PathSpec::Segment { z0: start.z, z1: C::new(0.0, 0.0) }, &opts)
        .map(|t| t.end().jet)
        .unwrap_or(at_zero);
    if !traj.pole_events.is_empty() {
        let first = traj.pole_events[0].seed.p.re;
        if first > 0.0 {
            return Err(SpecialError::BracketLost(format!("pole at x = {first} on the decaying side")));
        }
        return Ok((ShotOutcome::BlowsUp, to_zero));
    }
    let negative = traj.samples.iter().any(|x| x.jet.z.re <= 0.0 && x.jet.w.re < 0.0);
    // Close to the separatrix neither event happens inside the window; the
    // side is then read off against the two-term asymptote sqrt(-x/2)(1 + 1/(8x^3)).
    let x = -SHOOT_L;
    let asymptote = (-x / 2.0).sqrt() * (1.0 + 1.0 / (8.0 * x * x * x));
    let end = traj.end().jet.w;
    let outcome = if negative {
        ShotOutcome::TurnsNegative
    } else if traj.samples.iter().any(|x| x.jet.w.re > 10.0) || end.re > asymptote * (1.0 + SEPARATRIX_MARGIN) {
        ShotOutcome::BlowsUp
    } else if end.re < asymptote * (1.0 - SEPARATRIX_MARGIN) {
        ShotOutcome::TurnsNegative
    } else {
        ShotOutcome::Undecided
    };
    Ok((outcome, to_zero))
}

/// Bisection on the tail amplitude until the two starting values `w(0)`
/// differ by at most `tolerance`.
pub fn hastings_mcleod_shoot(tolerance: f64) -> Result<ShootingBracket, SpecialError> {
    let (mut lo, mut hi) = (0.5, 1.5);
    let (o_lo, mut j_lo) = shoot(lo)?;
    let (o_hi, mut j_hi) = shoot(hi)?;
    if !matches!(o_lo, ShotOutcome::TurnsNegative) || !matches!(o_hi, ShotOutcome::BlowsUp) {
        return Err(SpecialError::BracketLost("initial amplitudes do not bracket".into()));
    }
    for _ in 0..200 {
        if (j_hi.w - j_lo.w).norm() <= tolerance {
            return Ok(ShootingBracket { below: j_lo, above: j_hi, k_below: lo, k_above: hi });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match shoot(mid)? {
            (ShotOutcome::TurnsNegative, j) => {
                lo = mid;
                j_lo = j;
            }
            (ShotOutcome::BlowsUp, j) => {
                hi = mid;
                j_hi = j;
            }
            (ShotOutcome::Undecided, _) => {
                return Err(SpecialError::BracketLost(format!("amplitude {mid} neither blows up nor turns negative")));
            }
        }
    }
    if (j_hi.w - j_lo.w).norm() <= tolerance {
        Ok(ShootingBracket { below: j_lo, above: j_hi, k_below: lo, k_above: hi })
    } else {
        Err(SpecialError::BracketLost("bisection exhausted before reaching the tolerance".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn hermite_one_gives_minus_inverse() {
        let s = weber_hermite(c(1.0, 0.0), RiccatiBranch::Plus, [c(0.0, 0.0), c(2.0, 0.0)]).unwrap();
        assert_eq!(s.eq.alpha, c(-2.0, 0.0));
        assert_eq!(s.eq.beta, c(-2.0, 0.0));
        for z in [c(0.7, 0.2), c(-3.0, 4.0), c(6.0, -1.0)] {
            let j = s.eval(z);
            assert!((j.w + 1.0 / z).norm() < 1e-13 * (1.0 / z).norm());
            assert!((j.w1 - 1.0 / (z * z)).norm() < 1e-12 * (1.0 / (z * z)).norm());
        }
    }

    #[test]
    fn gamma_zero_is_trivial() {
        let s = weber_hermite(c(0.0, 0.0), RiccatiBranch::Plus, [c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(s.eq.beta, c(0.0, 0.0));
        let j = s.eval(c(3.0, 2.0));
        assert_eq!(j.w, c(0.0, 0.0));
        assert_eq!(j.w1, c(0.0, 0.0));
    }

    #[test]
    fn hermite_two_and_its_poles() {
        let s = weber_hermite(c(2.0, 0.0), RiccatiBranch::Plus, [c(-2.0, 0.0), c(0.0, 0.0)]).unwrap();
        for z in [c(0.3, 0.1), c(2.0, 2.0), c(-5.0, 1.0)] {
            let want = -8.0 * z / (4.0 * z * z - 2.0);
            assert!((s.eval(z).w - want).norm() < 1e-12 * want.norm());
        }
        let guess = c(0.7, 0.01);
        let p = s.refine_zero(guess, s.linear_state(guess)).unwrap();
        assert!((p - c(0.5f64.sqrt(), 0.0)).norm() < 1e-13);
        assert_eq!(s.residue(), -1.0);
    }

    #[test]
    fn weber_hermite_residuals_on_a_grid() {
        for (g, branch) in [(1.0, RiccatiBranch::Plus), (2.0, RiccatiBranch::Plus), (3.0, RiccatiBranch::Minus)] {
            let s = weber_hermite(c(g, 0.0), branch, [c(1.0, 0.0), c(0.3, -0.2)]).unwrap();
            for i in -5..=5 {
                for k in -5..=5 {
                    let z = c(2.0 * i as f64 + 0.013, 2.0 * k as f64 - 0.021);
                    let res = s.residual(z);
                    assert!(res <= 1e-10, "gamma {g} at {z}: {res:e}");
                }
            }
        }
    }

    #[test]
    fn airy_at_origin_and_residuals() {
        let s = airy_solution(RiccatiBranch::Plus, [c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let j = s.eval(c(0.0, 0.0));
        assert_eq!(j.w, c(0.0, 0.0));
        assert_eq!(j.w1, c(0.0, 0.0));
        assert_eq!(s.eq.alpha, c(0.5, 0.0));
        let m = airy_solution(RiccatiBranch::Minus, [c(0.2, 0.0), c(1.0, 0.5)]).unwrap();
        assert_eq!(m.eq.alpha, c(-0.5, 0.0));
        let mut rng = 12345u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let z = C::from_polar(5.0 * next().sqrt(), 2.0 * std::f64::consts::PI * next());
            assert!(s.residual(z) <= 1e-10);
            assert!(m.residual(z) <= 1e-10);
        }
    }

    #[test]
    fn degenerate_u_is_rejected() {
        assert_eq!(
            weber_hermite(c(1.0, 0.0), RiccatiBranch::Plus, [c(0.0, 0.0); 2]).unwrap_err(),
            SpecialError::DegenerateU
        );
        assert!(airy_solution(RiccatiBranch::Minus, [c(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn catalogue_is_exact() {
        for s in rational_catalogue() {
            assert!(s.exact_residual().is_zero(), "{s:?}");
        }
    }

    #[test]
    fn catalogue_lookups() {
        use crate::eqcore::GammaBranch;
        let look = |a: f64, b: f64| rational_solutions(&EquationSpec::fourth(c(a, 0.0), c(b, 0.0), GammaBranch::Plus));
        let w = &look(0.0, -2.0).unwrap()[0];
        assert_eq!(w.jet(c(3.0, 1.0)).w, c(-6.0, -2.0));
        let w = &look(0.0, -2.0 / 9.0).unwrap()[0];
        assert!((w.jet(c(3.0, 0.0)).w - c(-2.0, 0.0)).norm() < 1e-15);
        let w = &look(-2.0, -2.0).unwrap()[0];
        assert!((w.jet(c(2.0, 0.0)).w - c(-0.5, 0.0)).norm() < 1e-15);
        assert!(look(0.3, -1.0).is_err());
        assert!(look(0.3, 0.0).unwrap()[0].num.is_zero());
    }

    #[test]
    fn rational_jets_satisfy_the_equation() {
        for s in rational_catalogue() {
            let eq = s.eq();
            for z in [c(1.3, 0.4), c(-2.0, 3.0)] {
                assert!(scaled_residual(&eq, &s.jet(z)).unwrap() < 1e-13);
            }
        }
    }

    #[test]
    fn airy_asymptotics_near_known_value() {
        let (ai, dai) = airy_ai_large(8.0);
        assert!((ai / 4.6922076160992316e-8 - 1.0).abs() < 1e-11);
        assert!((dai / -1.3414392979067866e-7 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn hastings_mcleod_bracket() {
        let b = hastings_mcleod_shoot(1e-8).unwrap();
        assert!((b.above.w - b.below.w).norm() <= 1e-8);
        // Independent high-precision value of w(0) for this solution.
        let known = 0.367_061_551_548_078_4;
        assert!(b.below.w.re <= known + 1e-9 && known - 1e-9 <= b.above.w.re);
        let eq = EquationSpec::second(c(0.0, 0.0));
        let opts = IntegrateOptions { tol: 1e-12, ..Default::default() };
        let right = integrate(&eq, &b.below, &PathSpec::Segment { z0: c(0.0, 0.0), z1: c(6.0, 0.0) }, &opts).unwrap();
        let left = integrate(&eq, &b.below, &PathSpec::Segment { z0: c(0.0, 0.0), z1: c(-6.0, 0.0) }, &opts).unwrap();
        for t in [&right, &left] {
            assert!(t.pole_events.is_empty());
            assert!(t.samples.iter().all(|x| x.jet.w.re > 0.0 && x.jet.w1.re < 0.0));
        }
        let ratio = right.end().jet.w.re / 9.947_694_360_252_89e-6;
        assert!((0.9..=1.1).contains(&ratio), "{ratio}");
        let mut bumped = b.below;
        bumped.w += 1e-3;
        let t = integrate(&eq, &bumped, &PathSpec::Segment { z0: c(0.0, 0.0), z1: c(-8.0, 0.0) }, &opts).unwrap();
        assert!(!t.pole_events.is_empty());
    }
}
