//! Local rescalings near a large point `h`, the autonomous limit equations
//! they approach, and the cluster set of `h^-d W(h)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eqcore::{self, EquationKind, Jet, C};
use crate::frac::Frac;
use crate::localseries::{laurent_big_w, PoleSeed};
use crate::polefield::{JetSource, PoleCatalog};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RescaleError {
    #[error("evaluation failed at {0}")]
    EvaluationFailed(C),
    #[error("no sample passed the distance floor")]
    NoAdmissibleSamples,
    #[error("bad frame: {0}")]
    BadFrame(String),
}

/// Exponents `(a, b)` of `w_h(ζ) = h^-a w(h + h^-b ζ)`.
pub fn yosida_exponents(kind: EquationKind) -> (Frac, Frac) {
    match kind {
        EquationKind::PI => (Frac::new(1, 2), Frac::new(1, 4)),
        EquationKind::PII => (Frac::new(1, 2), Frac::new(1, 2)),
        EquationKind::PIV => (Frac::int(1), Frac::int(1)),
    }
}

/// Growth exponent `d` of the first integral: `W = O(|z|^d)` off the discs.
pub fn cluster_exponent(kind: EquationKind) -> Frac {
    match kind {
        EquationKind::PI => Frac::new(3, 2),
        EquationKind::PII => Frac::int(2),
        EquationKind::PIV => Frac::int(3),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaleFrame {
    pub h: C,
    pub a: Frac,
    pub b: Frac,
    pub grid: Vec<C>,
}

impl RescaleFrame {
    pub fn new(kind: EquationKind, h: C, grid: Vec<C>) -> Self {
        let (a, b) = yosida_exponents(kind);
        RescaleFrame { h, a, b, grid }
    }

    fn hpow(&self, e: f64) -> C {
        (e * self.h.ln()).exp()
    }
}

/// Square grid of `n × n` points covering `[-half, half]²`, skipping `ζ = 0`.
pub fn square_grid(half: f64, n: usize) -> Vec<C> {
    let step = 2.0 * half / (n.max(2) - 1) as f64;
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let z = C::new(-half + step * i as f64, -half + step * j as f64);
            if z.norm() > 1e-12 {
                out.push(z);
            }
        }
    }
    out
}

/// Ring of points `r e^{iφ}` for a few radii in `[r_in, r_out]`.
pub fn ring_grid(r_in: f64, r_out: f64, n_r: usize, n_theta: usize) -> Vec<C> {
    let mut out = Vec::new();
    for i in 0..n_r {
        let r = if n_r == 1 { r_in } else { r_in + (r_out - r_in) * i as f64 / (n_r - 1) as f64 };
        for k in 0..n_theta {
            out.push(C::from_polar(r, std::f64::consts::TAU * (k as f64 + 0.5) / n_theta as f64));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSample {
    pub zeta: C,
    pub w: C,
    pub w1: C,
}

/// `w_h` and `w_h'` on the frame's grid.
pub fn rescale_window(source: &dyn JetSource, frame: &RescaleFrame) -> Result<Vec<WindowSample>, RescaleError> {
    if frame.h.norm() == 0.0 || frame.grid.is_empty() {
        return Err(RescaleError::BadFrame(format!("h = {}, {} points", frame.h, frame.grid.len())));
    }
    let (a, b) = (frame.a.value(), frame.b.value());
    let shrink = frame.hpow(-b);
    let sw = frame.hpow(-a);
    let sw1 = frame.hpow(-a - b);
    frame
        .grid
        .iter()
        .map(|&zeta| {
            let z = frame.h + shrink * zeta;
            let j = source.jet_at(z).ok_or(RescaleError::EvaluationFailed(z))?;
            Ok(WindowSample { zeta, w: sw * j.w, w1: sw1 * j.w1 })
        })
        .collect()
}

/// `P(w; c)` with `w'² = P` the limit first-order equation.
pub fn limit_polynomial(kind: EquationKind, w: C, c: C) -> C {
    match kind {
        EquationKind::PI => 4.0 * w * w * w + 2.0 * w - 2.0 * c,
        EquationKind::PII => w * w * w * w + w * w - c,
        EquationKind::PIV => w * w * (w * w + 4.0 * w + 4.0) - 4.0 * c * w,
    }
}

/// Value of `c` in the limit equation matching the first integral at `h`.
pub fn limit_constant(kind: EquationKind, h: C, big_w: C) -> C {
    big_w * (-cluster_exponent(kind).value() * h.ln()).exp()
}

/// Largest `|w_h'² - P(w_h; c)|` relative to the largest term.
pub fn limit_ode_residual(kind: EquationKind, samples: &[WindowSample], c: C) -> f64 {
    samples
        .iter()
        .map(|s| {
            let p = limit_polynomial(kind, s.w, c);
            let scale = (s.w1 * s.w1).norm().max(p.norm()).max(c.norm()).max(1.0);
            (s.w1 * s.w1 - p).norm() / scale
        })
        .fold(0.0, f64::max)
}

/// Constant solutions `(w, c)` of the limit equations: double roots of `P`.
pub fn constant_limit_catalog(kind: EquationKind) -> Vec<(C, C)> {
    let i = C::new(0.0, 1.0);
    match kind {
        EquationKind::PI => {
            let w = 1.0 / 6f64.sqrt();
            let c = (2.0f64 / 27.0).sqrt();
            vec![(i * w, i * c), (-i * w, -i * c)]
        }
        EquationKind::PII => {
            let w = 0.5f64.sqrt();
            vec![(C::new(0.0, 0.0), C::new(0.0, 0.0)), (i * w, C::new(-0.25, 0.0)), (-i * w, C::new(-0.25, 0.0))]
        }
        EquationKind::PIV => vec![
            (C::new(0.0, 0.0), C::new(0.0, 0.0)),
            (C::new(-2.0, 0.0), C::new(0.0, 0.0)),
            (C::new(-2.0 / 3.0, 0.0), C::new(-8.0 / 27.0, 0.0)),
        ],
    }
}

/// Periods `(c, ω)` of the degenerate limit solutions (`c` at a constant).
pub fn period_catalog(kind: EquationKind) -> Vec<(C, C)> {
    let pi = std::f64::consts::PI;
    match kind {
        EquationKind::PI => Vec::new(),
        EquationKind::PII => vec![(C::new(0.0, 0.0), C::new(0.0, pi)), (C::new(-0.25, 0.0), C::new(pi * 2f64.sqrt(), 0.0))],
        EquationKind::PIV => {
            vec![(C::new(0.0, 0.0), C::new(0.0, pi)), (C::new(-8.0 / 27.0, 0.0), C::new(pi * 3f64.sqrt(), 0.0))]
        }
    }
}

/// `p^-d` times the constant term of `W` at the pole: the value `h^-d W(h)`
/// tends to as `h` approaches `p`.
pub fn pole_cluster_value(seed: &PoleSeed) -> C {
    let d = cluster_exponent(seed.eq.kind).value();
    let ser = laurent_big_w(seed, 12);
    ser.coefficient_at(Frac::int(0)) * (-d * seed.p.ln()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSample {
    pub h: C,
    pub value: C,
    /// `|h|^b dist(h, poles)`.
    pub scaled_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEstimate {
    pub d: Frac,
    pub samples: Vec<ClusterSample>,
    /// `(p, pole_cluster_value)` for the catalogue poles.
    pub pole_values: Vec<(C, C)>,
    /// Counts of `|value|` in bins of width `bin` from 0; the last bin is overflow.
    pub histogram: Vec<usize>,
    pub bin: f64,
}

impl ClusterEstimate {
    /// Fraction of samples within `radius` of `target`.
    pub fn fraction_within(&self, target: C, radius: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| (s.value - target).norm() <= radius).count() as f64 / self.samples.len() as f64
    }
}

/// Samples of `h^-d W(h)` at the given points, keeping those whose scaled
/// distance to every catalogued pole is at least `delta_floor`.
pub fn cluster_estimate(
    source: &dyn JetSource,
    points: &[C],
    delta_floor: f64,
    catalog: &PoleCatalog,
) -> Result<ClusterEstimate, RescaleError> {
    let eq = source.equation();
    let d = cluster_exponent(eq.kind);
    let (_, b) = yosida_exponents(eq.kind);
    let poles = catalog.pole_points();
    let mut samples = Vec::new();
    for &h in points {
        let dist = poles.iter().map(|p| (p - h).norm()).fold(f64::INFINITY, f64::min);
        let scaled = h.norm().powf(b.value()) * dist;
        if scaled < delta_floor {
            continue;
        }
        let j: Jet = source.jet_at(h).ok_or(RescaleError::EvaluationFailed(h))?;
        let Ok(big) = eqcore::first_integral(&eq, &j) else { continue };
        samples.push(ClusterSample { h, value: limit_constant(eq.kind, h, big.value), scaled_distance: scaled });
    }
    if samples.is_empty() {
        return Err(RescaleError::NoAdmissibleSamples);
    }
    let bin = 0.01;
    let mut histogram = vec![0usize; 21];
    for s in &samples {
        let k = ((s.value.norm() / bin) as usize).min(20);
        histogram[k] += 1;
    }
    let pole_values = catalog.poles.iter().map(|p| (p.p(), pole_cluster_value(&p.seed))).collect();
    Ok(ClusterEstimate { d, samples, pole_values, histogram, bin })
}
