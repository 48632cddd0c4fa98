//! Adaptive integration along complex paths with pole hopping.
//!
//! The stepper is the Dormand-Prince 5(4) pair with a PI step controller,
//! run in the real arc-length parameter `s` of the path.  The fourth
//! equation is integrated in its third-order polynomial form so that zeros
//! of `w` need no special handling.  Two quadratures ride along: the first
//! integral `W` (via its known derivative) and `Q = ∫ W dz`.
//!
//! When `|w|` in local units exceeds [`POLE_TRIGGER`] the recent samples are
//! fitted by a Laurent model, and the solution is restarted from the model
//! one disc diameter further along the path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eqcore::{self, first_integral, first_integral_rate, zero_guard, EquationKind, EquationSpec, Jet, C};
use crate::localseries::{detect_pole, laurent_big_w, seed_jet, PoleSeed, SeriesError, DISC_DELTA};

/// `|w|` in local units at which a pole hop is started.
pub const POLE_TRIGGER: f64 = 1e3;
/// Lower end of the `|w|` band (local units) whose samples feed the pole fit.
pub const FIT_BAND_LOW: f64 = 2.0;
/// Upper end of that band.
pub const FIT_BAND_HIGH: f64 = 1e4;

pub const FLAG_HOP_ENTRY: u8 = 1;
pub const FLAG_HOP_EXIT: u8 = 2;
pub const FLAG_NEAR_ZERO: u8 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("step size underflow at s = {s} (z = {z})")]
    StepSizeUnderflow { s: f64, z: C },
    #[error("pole fit failed near z = {z}: {source}")]
    PoleFitFailed { z: C, source: SeriesError },
    #[error("start jet at {start} is not the path origin {origin}")]
    StartMismatch { start: C, origin: C },
    #[error("tolerance {0} outside [1e-13, 1e-6]")]
    BadTolerance(f64),
    #[error("path is degenerate: {0}")]
    BadPath(String),
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error(transparent)]
    Equation(#[from] eqcore::EqError),
    #[error("no sample at the calibration point {0}")]
    CalibrationInvalid(C),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PathSpec {
    Segment { z0: C, z1: C },
    Ray { origin: C, theta: f64, r_max: f64 },
    Polyline { points: Vec<C> },
    Circle {
        center: C,
        radius: f64,
        turns: f64,
        #[serde(default)]
        start_angle: f64,
    },
}

impl PathSpec {
    fn pieces(&self) -> Vec<(C, C)> {
        match self {
            PathSpec::Segment { z0, z1 } => vec![(*z0, *z1)],
            PathSpec::Ray { origin, theta, r_max } => {
                vec![(*origin, origin + C::from_polar(*r_max, *theta))]
            }
            PathSpec::Polyline { points } => points.windows(2).map(|w| (w[0], w[1])).collect(),
            PathSpec::Circle { .. } => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        match self {
            PathSpec::Circle { radius, turns, .. } => {
                if !(*radius > 0.0 && turns.abs() > 0.0 && radius.is_finite() && turns.is_finite()) {
                    return Err(IntegrateError::BadPath("circle needs positive radius and turns".into()));
                }
            }
            PathSpec::Polyline { points } if points.len() < 2 => {
                return Err(IntegrateError::BadPath("polyline needs two points".into()));
            }
            _ => {
                if self.pieces().iter().any(|(a, b)| (b - a).norm() == 0.0) {
                    return Err(IntegrateError::BadPath("repeated point".into()));
                }
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        match self {
            PathSpec::Circle { radius, turns, .. } => 2.0 * std::f64::consts::PI * radius * turns.abs(),
            _ => self.pieces().iter().map(|(a, b)| (b - a).norm()).sum(),
        }
    }

    /// Arc-length positions of corners (excluding the ends).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut s = 0.0;
        let pieces = self.pieces();
        for (a, b) in pieces.iter().take(pieces.len().saturating_sub(1)) {
            s += (b - a).norm();
            out.push(s);
        }
        out
    }

    /// Point and unit tangent at arc length `s`.
    pub fn at(&self, s: f64) -> (C, C) {
        match self {
            PathSpec::Circle { center, radius, turns, start_angle } => {
                let dir = turns.signum();
                let phi = start_angle + dir * s / radius;
                let e = C::from_polar(1.0, phi);
                (center + radius * e, dir * C::new(0.0, 1.0) * e)
            }
            _ => {
                let pieces = self.pieces();
                let mut left = s;
                for (k, (a, b)) in pieces.iter().enumerate() {
                    let len = (b - a).norm();
                    if left <= len || k + 1 == pieces.len() {
                        let u = (b - a) / len;
                        return (a + u * left, u);
                    }
                    left -= len;
                }
                unreachable!("path has at least one piece")
            }
        }
    }

    pub fn start(&self) -> C {
        self.at(0.0).0
    }

    pub fn end(&self) -> C {
        self.at(self.length()).0
    }

    /// Reverse traversal of the same curve.
    pub fn reversed(&self) -> PathSpec {
        match self {
            PathSpec::Segment { z0, z1 } => PathSpec::Segment { z0: *z1, z1: *z0 },
            PathSpec::Ray { origin, theta, r_max } => {
                PathSpec::Segment { z0: origin + C::from_polar(*r_max, *theta), z1: *origin }
            }
            PathSpec::Polyline { points } => PathSpec::Polyline { points: points.iter().rev().cloned().collect() },
            PathSpec::Circle { center, radius, turns, start_angle } => PathSpec::Circle {
                center: *center,
                radius: *radius,
                turns: -turns,
                start_angle: start_angle + 2.0 * std::f64::consts::PI * turns,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub tol: f64,
    pub max_steps: usize,
    /// Upper bound on the step (path units); `0` means no bound.
    pub max_step: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { tol: 1e-10, max_steps: 2_000_000, max_step: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub s: f64,
    pub jet: Jet,
    /// Quadrature of the first integral, zero at the start.
    pub big_w: C,
    /// Quadrature of `big_w dz`, zero at the start.
    pub q: C,
    pub flags: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleEvent {
    pub seed: PoleSeed,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub max_step: f64,
    pub max_constraint: f64,
    pub hops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub eq: EquationSpec,
    pub path: PathSpec,
    pub samples: Vec<Sample>,
    pub pole_events: Vec<PoleEvent>,
    pub diagnostics: Diagnostics,
}

const N: usize = 5;
type State = [C; N];

// Layout: w, w', w'' (fourth equation only), W, Q.
const IW: usize = 3;
const IQ: usize = 4;

fn deriv(eq: &EquationSpec, z: C, dz: C, y: &State) -> Result<State, IntegrateError> {
    let (w, w1) = (y[0], y[1]);
    let jet = Jet::new(z, w, w1);
    let mut d = [C::new(0.0, 0.0); N];
    d[0] = w1 * dz;
    match eq.kind {
        EquationKind::PIV => {
            d[1] = y[2] * dz;
            d[2] = eqcore::rhs3(eq, &jet) * dz;
        }
        _ => d[1] = eqcore::rhs(eq, &jet)? * dz,
    }
    d[IW] = first_integral_rate(eq, z, w) * dz;
    d[IQ] = y[IW] * dz;
    Ok(d)
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    eq: &'a EquationSpec,
    path: &'a PathSpec,
    tol: f64,
}

impl Stepper<'_> {
    fn f(&self, s: f64, y: &State) -> Result<State, IntegrateError> {
        let (z, dz) = self.path.at(s);
        deriv(self.eq, z, dz, y)
    }

    /// One trial step: increment, last stage derivative and scaled error norm.
    fn trial(&self, s: f64, y: &State, k1: &State, h: f64) -> Result<(State, State, f64), IntegrateError> {
        let cs = [C2, C3, C4, C5, 1.0, 1.0];
        let mut ks: Vec<State> = vec![*k1];
        for i in 0..6 {
            let mut inc = [C::new(0.0, 0.0); N];
            for (j, kj) in ks.iter().enumerate() {
                let a = A[i][j];
                if a != 0.0 {
                    for n in 0..N {
                        inc[n] += h * a * kj[n];
                    }
                }
            }
            let mut yi = *y;
            for n in 0..N {
                yi[n] += inc[n];
            }
            if i == 5 {
                let k7 = self.f(s + h, &yi)?;
                let mut err = 0.0f64;
                ks.push(k7);
                let active = if self.eq.kind == EquationKind::PIV { 3 } else { 2 };
                for n in 0..active {
                    let mut e = C::new(0.0, 0.0);
                    for (j, kj) in ks.iter().enumerate() {
                        e += h * E[j] * kj[n];
                    }
                    let sc = self.tol * (1.0 + y[n].norm().max(yi[n].norm()));
                    err = err.max(e.norm() / sc);
                }
                return Ok((inc, k7, err));
            }
            ks.push(self.f(s + cs[i] * h, &yi)?);
        }
        unreachable!()
    }
}

fn jet_of(eq: &EquationSpec, z: C, y: &State) -> Jet {
    match eq.kind {
        EquationKind::PIV => Jet::with_w2(z, y[0], y[1], y[2]),
        _ => Jet::new(z, y[0], y[1]),
    }
}

fn state_of(eq: &EquationSpec, jet: &Jet, big_w: C, q: C) -> Result<State, IntegrateError> {
    let mut y = [C::new(0.0, 0.0); N];
    y[0] = jet.w;
    y[1] = jet.w1;
    if eq.kind == EquationKind::PIV {
        y[2] = match jet.w2 {
            Some(v) => v,
            None => eqcore::rhs(eq, jet)?,
        };
    }
    y[IW] = big_w;
    y[IQ] = q;
    Ok(y)
}

/// Integrate from `start` along `path`.
pub fn integrate(eq: &EquationSpec, start: &Jet, path: &PathSpec, opts: &IntegrateOptions) -> Result<Trajectory, IntegrateError> {
    if !(1e-13..=1e-6).contains(&opts.tol) {
        return Err(IntegrateError::BadTolerance(opts.tol));
    }
    path.validate()?;
    let origin = path.start();
    if (start.z - origin).norm() > 1e-12 * origin.norm().max(1.0) {
        return Err(IntegrateError::StartMismatch { start: start.z, origin });
    }
    let len = path.length();
    let breaks = path.breakpoints();
    let stepper = Stepper { eq, path, tol: opts.tol };

    let mut y = state_of(eq, start, C::new(0.0, 0.0), C::new(0.0, 0.0))?;
    let mut s = 0.0;
    let mut samples = vec![Sample { s, jet: jet_of(eq, origin, &y), big_w: y[IW], q: y[IQ], flags: 0 }];
    let mut events = Vec::new();
    let mut diag = Diagnostics { min_step: f64::INFINITY, ..Default::default() };
    let mut approach_start = 0usize;

    let local = eq.length_scale(origin);
    let mut h = (0.05 * local).min(len);
    let mut err_prev = 1.0f64;
    let mut k1 = stepper.f(s, &y)?;
    let mut comp = [C::new(0.0, 0.0); N];

    while s < len * (1.0 - 1e-15) {
        if diag.accepted + diag.rejected >= opts.max_steps {
            return Err(IntegrateError::TooManySteps(opts.max_steps));
        }
        let mut limit = len - s;
        if let Some(b) = breaks.iter().find(|&&b| b > s + 1e-14 * len) {
            limit = limit.min(b - s);
        }
        if opts.max_step > 0.0 {
            h = h.min(opts.max_step);
        }
        let hh = h.min(limit);
        if hh < 1e-14 * len.max(1.0) {
            let z = path.at(s).0;
            return Err(IntegrateError::StepSizeUnderflow { s, z });
        }
        let trial = stepper.trial(s, &y, &k1, hh);
        let (inc, k7, err) = match trial {
            Ok(t) if t.2.is_finite() => t,
            _ => {
                diag.rejected += 1;
                h = hh * 0.2;
                continue;
            }
        };
        if err > 1.0 {
            diag.rejected += 1;
            h = hh * (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }
        // Accept.
        let snew = if hh == limit { s + limit } else { s + hh };
        let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
        err_prev = err.max(1e-4);
        h = hh * fac.clamp(0.2, 5.0);
        diag.accepted += 1;
        diag.min_step = diag.min_step.min(hh);
        diag.max_step = diag.max_step.max(hh);
        s = snew;
        // Compensated update: rounding in the state sum is amplified along
        // unstable directions, so it is kept to a fraction of an ulp.
        for n in 0..N {
            let t = inc[n] - comp[n];
            let sum = y[n] + t;
            comp[n] = (sum - y[n]) - t;
            y[n] = sum;
        }
        k1 = k7;
        let z = path.at(s).0;
        let jet = jet_of(eq, z, &y);
        let mut flags = 0;
        if y[0].norm() < zero_guard(z) {
            flags |= FLAG_NEAR_ZERO;
        }
        if eq.kind == EquationKind::PIV {
            diag.max_constraint = diag.max_constraint.max(eqcore::constraint_residual(eq, &jet)?);
        }
        let mag = eq.scaled_magnitude(z, y[0]);
        samples.push(Sample { s, jet, big_w: y[IW], q: y[IQ], flags });
        if mag < FIT_BAND_LOW {
            approach_start = samples.len() - 1;
        }
        if mag >= POLE_TRIGGER && s < len * (1.0 - 1e-15) {
            let window: Vec<Jet> = samples[approach_start..]
                .iter()
                .filter(|x| {
                    let m = eq.scaled_magnitude(x.jet.z, x.jet.w);
                    (FIT_BAND_LOW..=FIT_BAND_HIGH).contains(&m)
                })
                .map(|x| x.jet)
                .collect();
            let seed = detect_pole(eq, &window).map_err(|source| IntegrateError::PoleFitFailed { z, source })?;
            let hop = DISC_DELTA * eq.length_scale(seed.p);
            let mut s_exit = (s + 0.95 * hop).min(len);
            let mut z_exit = path.at(s_exit).0;
            while (z_exit - seed.p).norm() > 0.98 * seed.validity_radius() && s_exit > s {
                s_exit = s + 0.9 * (s_exit - s);
                z_exit = path.at(s_exit).0;
            }
            let exit = seed_jet(&seed, z_exit - seed.p)
                .map_err(|source| IntegrateError::PoleFitFailed { z, source })?;
            let wl = laurent_big_w(&seed, 40);
            let jump = wl.value(z_exit) - wl.value(z);
            let big_w = y[IW] + jump;
            // Q picks up the integral of the Laurent model of W across the gap.
            let q = y[IQ] + laurent_q_increment(&wl, path, s, s_exit);
            if let Some(last) = samples.last_mut() {
                last.flags |= FLAG_HOP_ENTRY;
            }
            y = state_of(eq, &exit, big_w, q)?;
            comp = [C::new(0.0, 0.0); N];
            s = s_exit;
            samples.push(Sample { s, jet: exit, big_w, q, flags: FLAG_HOP_EXIT });
            events.push(PoleEvent { seed, s: samples[samples.len() - 2].s });
            diag.hops += 1;
            approach_start = samples.len() - 1;
            h = 0.05 * hop;
            err_prev = 1.0;
            k1 = stepper.f(s, &y)?;
        }
    }
    if diag.min_step == f64::INFINITY {
        diag.min_step = 0.0;
    }
    Ok(Trajectory { eq: *eq, path: path.clone(), samples, pole_events: events, diagnostics: diag })
}

/// Eight-point Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) const GL8_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
pub(crate) const GL8_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// `∫ W dz` of a Laurent model along the path between two arc lengths
/// (Gauss-Legendre; the model is smooth away from its pole).
fn laurent_q_increment(wl: &crate::localseries::SeriesExpansion, path: &PathSpec, s0: f64, s1: f64) -> C {
    // Subdivide geometrically toward the entry point, which sits next to the pole.
    let mut total = C::new(0.0, 0.0);
    let mut a = s0;
    let span = s1 - s0;
    let mut cuts = vec![s1];
    let mut t = span;
    for _ in 0..30 {
        t *= 0.5;
        cuts.push(s0 + t);
    }
    cuts.reverse();
    for b in cuts {
        let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, wg) in GL8_X.iter().zip(GL8_W) {
            let (z, dz) = path.at(m + r * x);
            total += wg * r * wl.value(z) * dz;
        }
        a = b;
    }
    total
}

impl Trajectory {
    pub fn end(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    /// The first integral along the trajectory pinned to `calibration`.
    pub fn continue_big_w(&self, calibration: &eqcore::FirstIntegralValue) -> Result<Vec<C>, IntegrateError> {
        let k = self
            .samples
            .iter()
            .position(|x| (x.jet.z - calibration.calibration_point).norm() <= 1e-12 * x.jet.z.norm().max(1.0))
            .ok_or(IntegrateError::CalibrationInvalid(calibration.calibration_point))?;
        if self.samples[k].jet.w.norm() < zero_guard(self.samples[k].jet.z) && self.eq.kind == EquationKind::PIV {
            return Err(IntegrateError::CalibrationInvalid(calibration.calibration_point));
        }
        let shift = calibration.value - self.samples[k].big_w;
        Ok(self.samples.iter().map(|x| x.big_w + shift).collect())
    }

    /// `∫ W dz` over the whole path with `W` pinned at the first sample.
    pub fn integral_of_big_w(&self) -> Result<C, IntegrateError> {
        let first = &self.samples[0];
        let cal = first_integral(&self.eq, &first.jet)?;
        let shift = cal.value - first.big_w;
        let last = self.end();
        Ok(last.q - first.q + shift * (last.jet.z - first.jet.z))
    }

    /// Largest gap between the pinned quadrature and the algebraic first
    /// integral, relative to `1 +` the magnitude of the terms in the algebraic
    /// relation (near a pole those terms cancel to many digits).
    pub fn integral_drift(&self) -> Result<f64, IntegrateError> {
        let cal = first_integral(&self.eq, &self.samples[0].jet)?;
        let cont = self.continue_big_w(&cal)?;
        let mut worst = 0.0f64;
        for (x, w) in self.samples.iter().zip(cont) {
            if let Ok(alg) = first_integral(&self.eq, &x.jet) {
                let scale = 1.0 + eqcore::first_integral_scale(&self.eq, &x.jet);
                worst = worst.max((alg.value - w).norm() / scale);
            }
        }
        Ok(worst)
    }
}

/// Empirical growth constants of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// `sup |w| / |z|` off the pole discs.
    pub value_ratio: f64,
    /// `sup |w'| / (|z|^2 + |w|^2)`.
    pub derivative_ratio: f64,
    /// `sup f#(z) / |z|` for `f = w / z` (fourth equation only).
    pub spherical_ratio: Option<f64>,
    pub samples_used: usize,
}

pub fn growth_probe(traj: &Trajectory) -> GrowthReport {
    let mut rep = GrowthReport { value_ratio: 0.0, derivative_ratio: 0.0, spherical_ratio: None, samples_used: 0 };
    for x in &traj.samples {
        let j = x.jet;
        let r = j.z.norm();
        if r < 1.0 {
            continue;
        }
        let in_disc = traj
            .pole_events
            .iter()
            .any(|e| (j.z - e.seed.p).norm() < e.seed.disc_radius());
        if in_disc {
            continue;
        }
        rep.samples_used += 1;
        rep.value_ratio = rep.value_ratio.max(j.w.norm() / r);
        rep.derivative_ratio = rep.derivative_ratio.max(j.w1.norm() / (r * r + j.w.norm_sqr()));
        if traj.eq.kind == EquationKind::PIV {
            let f = j.w / j.z;
            let df = (j.w1 * j.z - j.w) / (j.z * j.z);
            let sharp = df.norm() / (1.0 + f.norm_sqr());
            rep.spherical_ratio = Some(rep.spherical_ratio.unwrap_or(0.0).max(sharp / r));
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqcore::GammaBranch;
    use crate::localseries::{laurent_w, Residue};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn path_geometry() {
        let p = PathSpec::Polyline { points: vec![c(0.0, 0.0), c(3.0, 0.0), c(3.0, 4.0)] };
        assert_eq!(p.length(), 7.0);
        assert_eq!(p.breakpoints(), vec![3.0]);
        assert!((p.at(5.0).0 - c(3.0, 2.0)).norm() < 1e-15);
        let circ = PathSpec::Circle { center: c(1.0, 0.0), radius: 0.5, turns: 1.0, start_angle: 0.0 };
        assert!((circ.end() - circ.start()).norm() < 1e-14);
        assert!((circ.at(0.5 * std::f64::consts::PI * 0.5).0 - c(1.0, 0.5)).norm() < 1e-14);
        let back = circ.reversed();
        assert!((back.start() - circ.end()).norm() < 1e-14);
        assert!(PathSpec::Polyline { points: vec![c(1.0, 0.0), c(1.0, 0.0)] }.validate().is_err());
    }

    fn deviation_from_line(z0: C, z1: C, tol: f64) -> f64 {
        let eq = EquationSpec::fourth(c(0.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
        let start = Jet::new(z0, -2.0 * z0, c(-2.0, 0.0));
        let path = PathSpec::Segment { z0, z1 };
        let traj = integrate(&eq, &start, &path, &IntegrateOptions { tol, ..Default::default() }).unwrap();
        traj.samples.iter().map(|x| (x.jet.w + 2.0 * x.jet.z).norm()).fold(0.0, f64::max)
    }

    #[test]
    #[ignore = "perturbations of -2z grow like exp(z^2) on the real axis; f64 rounding alone exceeds 1e-9 by z = 5"]
    fn rational_line_on_real_segment() {
        let dev = deviation_from_line(c(1.0, 0.0), c(5.0, 0.0), 1e-10);
        assert!(dev < 1e-9, "max deviation {dev:e}");
    }

    #[test]
    fn rational_line_on_neutral_ray() {
        let u = C::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let dev = deviation_from_line(u, 5.0 * u, 1e-10);
        assert!(dev < 1e-9, "max deviation {dev:e}");
    }

    #[test]
    fn cube_root_rotation_of_second_equation() {
        // v(z) = ω w(ωz) solves the same equation when ω³ = 1.
        let eq = EquationSpec::second(c(0.0, 0.0));
        let om = C::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        let opts = IntegrateOptions::default();
        let w = integrate(&eq, &Jet::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)), &PathSpec::Segment { z0: c(0.0, 0.0), z1: 3.0 * om }, &opts).unwrap();
        let v = integrate(&eq, &Jet::new(c(0.0, 0.0), c(0.0, 0.0), om * om), &PathSpec::Segment { z0: c(0.0, 0.0), z1: c(3.0, 0.0) }, &opts).unwrap();
        let (a, b) = (w.end().jet, v.end().jet);
        assert!((om * a.w - b.w).norm() < 1e-8 * (1.0 + b.w.norm()), "{} {}", om * a.w, b.w);
    }

    #[test]
    fn residue_of_first_integral_round_a_pole() {
        let seed = PoleSeed::new(EquationSpec::first(), c(1.0, 0.0), Residue::Plus, c(0.0, 0.0));
        let start = seed_jet(&seed, c(0.1, 0.0)).unwrap();
        let path = PathSpec::Circle { center: seed.p, radius: 0.1, turns: 1.0, start_angle: 0.0 };
        let opts = IntegrateOptions { tol: 1e-12, ..Default::default() };
        let traj = integrate(&seed.eq, &start, &path, &opts).unwrap();
        assert!(traj.pole_events.is_empty());
        let res = traj.integral_of_big_w().unwrap() / (2.0 * std::f64::consts::PI * C::new(0.0, 1.0));
        assert!((res - c(-1.0, 0.0)).norm() < 1e-8, "{res}");
        let half = PathSpec::Circle { center: seed.p, radius: 0.1, turns: 0.5, start_angle: 0.0 };
        let traj = integrate(&seed.eq, &start, &half, &opts).unwrap();
        let end = traj.end().jet;
        let ser = laurent_w(&seed, 40).eval(end.z);
        assert!((end.w - ser[0]).norm() < 1e-7 * ser[0].norm());
    }

    #[test]
    fn hop_across_a_pole_of_the_first_equation() {
        // Straight through the pole; the continuation must agree with the model.
        let seed = PoleSeed::new(EquationSpec::first(), c(0.5, 0.3), Residue::Plus, c(0.2, -0.1));
        let start = seed_jet(&seed, c(-0.4, 0.0)).unwrap();
        let path = PathSpec::Segment { z0: start.z, z1: seed.p + c(0.45, 0.0) };
        let traj = integrate(&seed.eq, &start, &path, &IntegrateOptions::default()).unwrap();
        assert_eq!(traj.pole_events.len(), 1);
        let ev = traj.pole_events[0].seed;
        assert!((ev.p - seed.p).norm() < 1e-8, "{}", ev.p);
        assert!((ev.h - seed.h).norm() < 1e-5, "{}", ev.h);
        let end = traj.end().jet;
        let want = laurent_w(&seed, 40).eval(end.z)[0];
        assert!((end.w - want).norm() < 1e-6 * want.norm());
        let drift = traj.integral_drift().unwrap();
        assert!(drift < 1e-6, "{drift:e}");
    }

    #[test]
    fn path_reversal_returns_home() {
        let eq = EquationSpec::second(c(0.5, 0.0));
        let start = Jet::new(c(0.0, 0.0), c(0.3, 0.0), c(-0.2, 0.0));
        let path = PathSpec::Segment { z0: c(0.0, 0.0), z1: c(1.5, 1.0) };
        let opts = IntegrateOptions { tol: 1e-11, ..Default::default() };
        let fwd = integrate(&eq, &start, &path, &opts).unwrap();
        let back = integrate(&eq, &fwd.end().jet, &path.reversed(), &opts).unwrap();
        let home = back.end().jet;
        assert!((home.w - start.w).norm() < 10.0 * opts.tol * 10.0);
        assert!((home.w1 - start.w1).norm() < 10.0 * opts.tol * 10.0);
    }

    #[test]
    fn growth_of_exact_solutions() {
        let eq = EquationSpec::fourth(c(0.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
        let u = C::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let start = Jet::new(u, -2.0 * u, c(-2.0, 0.0));
        let path = PathSpec::Segment { z0: u, z1: 10.0 * u };
        let traj = integrate(&eq, &start, &path, &IntegrateOptions::default()).unwrap();
        let g = growth_probe(&traj);
        assert!((g.value_ratio - 2.0).abs() < 1e-8);

        let eq = EquationSpec::fourth(c(-2.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
        let z0 = C::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let start = Jet::new(z0, -1.0 / z0, 1.0 / (z0 * z0));
        let path = PathSpec::Segment { z0, z1: 10.0 * z0 };
        let traj = integrate(&eq, &start, &path, &IntegrateOptions::default()).unwrap();
        let g = growth_probe(&traj);
        assert!(g.derivative_ratio <= 0.5 + 1e-9);
    }
}
