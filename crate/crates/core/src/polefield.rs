//! Pole fields of solutions that can be evaluated pointwise: region sweeps,
//! strings of poles, counting functions, residue and zero bookkeeping and
//! signature inference.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backlund::{self, delta_of_signature, ChainedSolution, SigSymbol, SignatureIV};
use crate::eqcore::{self, EquationKind, EquationSpec, Jet, C};
use crate::frac::Frac;
use crate::integrate::{integrate, IntegrateOptions, PathSpec, Trajectory, GL8_W, GL8_X};
use crate::localseries::{detect_pole, laurent_w, PoleSeed, Residue, DISC_DELTA, FIT_TOL};
use crate::rescale::period_catalog;
use crate::special::{taylor_sum, LinearState, LinearizedSolution, RationalSolution};

/// Sample spacing of a sweep, in local length units.
pub const SWEEP_SPACING: f64 = 0.25;
/// `|w'/w|` in local units above which a sample starts a root search.
pub const DETECT_LEVEL: f64 = 2.0;
/// `|w'(z0) ∓ 2γ| / max(1, |z0|)` below which a zero joins the `±2γ` family.
pub const ZERO_CLASS_TOL: f64 = 1e-3;
/// Fewest members for a string.
pub const MIN_STRING: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoleFieldError {
    #[error("bad region: {0}")]
    BadRegion(String),
    #[error("contour through r = {r} passes within {distance:.3e} of a singularity")]
    ContourHitsPole { r: f64, distance: f64 },
    #[error("sector {0} is not pole-free at the probe radius")]
    SectorNotPoleFree(usize),
    #[error("sector {sector}: fitted value {value} is close to two symbols")]
    AmbiguousAssignment { sector: usize, value: C },
    #[error("zero near {0} could not be polished")]
    ZeroPolishFailed(C),
    #[error("evaluation failed at {0}")]
    EvaluationFailed(C),
    #[error("operation needs the fourth equation")]
    NeedsFourthEquation,
}

/// A solution that can be evaluated at any point.
pub trait JetSource: Sync {
    fn equation(&self) -> EquationSpec;
    fn jet_at(&self, z: C) -> Option<Jet>;
    /// Jets at `r e^{iθ}` for each radius.
    fn jets_on_ray(&self, theta: f64, radii: &[f64]) -> Vec<Option<Jet>> {
        radii.iter().map(|&r| self.jet_at(C::from_polar(r, theta))).collect()
    }
}

fn finite(j: &Jet) -> bool {
    j.w.is_finite() && j.w1.is_finite()
}

impl JetSource for LinearizedSolution {
    fn equation(&self) -> EquationSpec {
        self.eq
    }
    fn jet_at(&self, z: C) -> Option<Jet> {
        Some(self.eval(z)).filter(finite)
    }
}

impl JetSource for ChainedSolution {
    fn equation(&self) -> EquationSpec {
        self.eq()
    }
    fn jet_at(&self, z: C) -> Option<Jet> {
        Some(self.eval(z)).filter(finite)
    }
}

impl JetSource for RationalSolution {
    fn equation(&self) -> EquationSpec {
        self.eq()
    }
    fn jet_at(&self, z: C) -> Option<Jet> {
        Some(self.jet(z)).filter(finite)
    }
}

/// Solutions whose pole fields can be swept: a linearised solution, or one
/// reached from it by a chain of Backlund steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldSource {
    Linear(LinearizedSolution),
    Chain(ChainedSolution),
}

impl FieldSource {
    pub fn base(&self) -> &LinearizedSolution {
        match self {
            FieldSource::Linear(s) => s,
            FieldSource::Chain(c) => &c.base,
        }
    }

    /// Factor taking a point of the solution to the matching base point.
    fn base_factor(&self) -> C {
        match self {
            FieldSource::Chain(c) if c.rotated => C::new(0.0, 1.0),
            _ => C::new(1.0, 0.0),
        }
    }

    fn lift(&self, base_jet: &Jet) -> Jet {
        match self {
            FieldSource::Linear(_) => *base_jet,
            FieldSource::Chain(c) => c.lift(base_jet),
        }
    }

    /// Base state carried from the origin along the ray through `z`.
    fn patch_at(&self, z: C) -> Patch {
        let cb = z * self.base_factor();
        let base = self.base();
        Patch { cb, st: base.walk(C::new(0.0, 0.0), base.init, cb) }
    }

    /// Jet at `z` from the local Taylor model about the patch centre.
    fn jet_near(&self, patch: &Patch, z: C) -> Jet {
        let base = self.base();
        let zb = z * self.base_factor();
        let t = zb - patch.cb;
        let st = if t.norm() == 0.0 {
            patch.st
        } else {
            let s = base.taylor_step(patch.cb, patch.st, t);
            [s[0], s[1]]
        };
        self.lift(&base.jet_from_state(zb, st))
    }
}

impl JetSource for FieldSource {
    fn equation(&self) -> EquationSpec {
        match self {
            FieldSource::Linear(s) => s.eq,
            FieldSource::Chain(c) => c.eq(),
        }
    }

    fn jet_at(&self, z: C) -> Option<Jet> {
        let patch = self.patch_at(z);
        Some(self.jet_near(&patch, z)).filter(finite)
    }

    fn jets_on_ray(&self, theta: f64, radii: &[f64]) -> Vec<Option<Jet>> {
        let base = self.base();
        let dir = C::from_polar(1.0, theta);
        let dirb = dir * self.base_factor();
        let (mut c, mut st) = (C::new(0.0, 0.0), base.init);
        radii
            .iter()
            .map(|&r| {
                st = base.walk(c, st, dirb * r);
                c = dirb * r;
                Some(self.jet_near(&Patch { cb: c, st }, dir * r)).filter(finite)
            })
            .collect()
    }
}

/// Base point with the linear state there.
#[derive(Debug, Clone, Copy)]
struct Patch {
    cb: C,
    st: LinearState,
}

/// Annulus sector `r_min <= |z| <= r_max`, `theta_min <= arg z <= theta_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Region {
    pub r_min: f64,
    pub r_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Region {
    pub fn annulus(r_min: f64, r_max: f64) -> Self {
        Region { r_min, r_max, theta_min: -PI, theta_max: PI }
    }

    fn span(&self) -> f64 {
        (self.theta_max - self.theta_min).min(2.0 * PI)
    }

    pub fn contains(&self, z: C) -> bool {
        let r = z.norm();
        if r < self.r_min || r > self.r_max {
            return false;
        }
        if self.span() >= 2.0 * PI - 1e-12 {
            return true;
        }
        let d = (z.arg() - self.theta_min).rem_euclid(2.0 * PI);
        d <= self.theta_max - self.theta_min
    }

    fn validate(&self) -> Result<(), PoleFieldError> {
        let ok = self.r_min >= 0.0
            && self.r_max > self.r_min
            && self.r_max.is_finite()
            && self.theta_max > self.theta_min;
        if ok {
            Ok(())
        } else {
            Err(PoleFieldError::BadRegion(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepStrategy {
    /// Sample spacing in local length units.
    pub spacing: f64,
    pub detect_level: f64,
}

impl Default for SweepStrategy {
    fn default() -> Self {
        SweepStrategy { spacing: SWEEP_SPACING, detect_level: DETECT_LEVEL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleRecord {
    pub seed: PoleSeed,
    pub fit_residual: f64,
    pub string_id: Option<usize>,
}

impl PoleRecord {
    pub fn p(&self) -> C {
        self.seed.p
    }
    pub fn eps(&self) -> f64 {
        self.seed.eps.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroSign {
    PlusTwoGamma,
    MinusTwoGamma,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub z: C,
    pub multiplicity: u32,
    /// `w'` at the zero.
    pub slope: C,
    pub sign: ZeroSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleCatalog {
    pub eq: EquationSpec,
    pub region: Region,
    pub poles: Vec<PoleRecord>,
    pub zeros: Vec<ZeroRecord>,
    pub warnings: Vec<String>,
}

impl PoleCatalog {
    /// Sub-catalogue inside a smaller region.
    pub fn restrict(&self, region: &Region) -> PoleCatalog {
        PoleCatalog {
            eq: self.eq,
            region: *region,
            poles: self.poles.iter().filter(|p| region.contains(p.p())).copied().collect(),
            zeros: self.zeros.iter().filter(|z| region.contains(z.z)).copied().collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn pole_points(&self) -> Vec<C> {
        self.poles.iter().map(|p| p.p()).collect()
    }
}

fn sort_key(z: C) -> (f64, f64) {
    (z.norm(), z.arg())
}

/// Run a closure on a pool capped by `PNLV_THREADS` when that is set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var("PNLV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RootKind {
    Pole,
    Zero,
}

#[derive(Debug, Clone, Copy)]
struct Root {
    z: C,
    kind: RootKind,
    patch: Patch,
}

/// `|w'/w|` in local units: large next to poles and zeros, `O(|z|^-1)` elsewhere.
fn detector(eq: &EquationSpec, jet: &Jet) -> f64 {
    let d = (jet.w1 / jet.w).norm() * eq.length_scale(jet.z);
    if d.is_nan() {
        f64::INFINITY
    } else {
        d
    }
}

fn polish(source: &FieldSource, eq: &EquationSpec, patch: Patch, z0: C) -> Option<Root> {
    let reach = 1.5 * source.base().step_scale(patch.cb);
    let ell = eq.length_scale(z0);
    let m = eq.kind.pole_order() as f64;
    let mut z = z0;
    let mut jet = source.jet_near(&patch, z);
    if !finite(&jet) {
        z += C::new(0.0, 0.05 * ell);
        jet = source.jet_near(&patch, z);
        if !finite(&jet) {
            return None;
        }
    }
    let kind = if eq.scaled_magnitude(z, jet.w) >= 1.0 { RootKind::Pole } else { RootKind::Zero };
    let mut last = f64::INFINITY;
    for _ in 0..100 {
        let step = match kind {
            RootKind::Pole => m * jet.w / jet.w1,
            RootKind::Zero => -jet.w / jet.w1,
        };
        if !step.is_finite() {
            // Landed on the root itself.
            let on_root = match kind {
                RootKind::Pole => !jet.w.is_finite() || jet.w1.norm() == 0.0,
                RootKind::Zero => jet.w.norm() == 0.0,
            };
            return on_root.then_some(Root { z, kind, patch });
        }
        z += step;
        last = step.norm();
        if (z * source.base_factor() - patch.cb).norm() > reach {
            return None;
        }
        if last <= 1e-14 * z.norm().max(1.0) {
            return Some(Root { z, kind, patch });
        }
        jet = source.jet_near(&patch, z);
        if !finite(&jet) {
            return (kind == RootKind::Pole).then_some(Root { z, kind, patch });
        }
    }
    // Multiple zeros converge only linearly and stall near sqrt(eps).
    (last <= 1e-6 * ell).then_some(Root { z, kind, patch })
}

/// One ring of patch cells `[r_in, r_in + dr] × [θ_j - dθ/2, θ_j + dθ/2]`
/// with the Taylor coefficients of `u` about each cell centre.
struct Level {
    r_in: f64,
    dr: f64,
    dtheta: f64,
    thetas: Vec<f64>,
    coeffs: Vec<Vec<C>>,
}

impl Level {
    fn r(&self) -> f64 {
        self.r_in + 0.5 * self.dr
    }
}

/// Next ring of cells.  Each centre takes its state from the nearest centre
/// of the ring below by one short outward step, so the linear solution is
/// always continued away from the origin.
fn next_level(source: &FieldSource, region: &Region, prev: Option<&Level>) -> Level {
    let base = source.base();
    let factor = source.base_factor();
    let r_in = prev.map_or(0.0, |l| l.r_in + l.dr);
    let dr = 0.8 * base.step_scale(C::new(r_in, 0.0));
    let r = r_in + 0.5 * dr;
    let n = ((region.span() * r / dr).ceil() as usize).max(8);
    let dtheta = region.span() / n as f64;
    let thetas: Vec<f64> = (0..n).map(|k| region.theta_min + dtheta * (k as f64 + 0.5)).collect();
    let radius = 1.3 * dr;
    let coeffs = with_thread_cap(|| {
        thetas
            .par_iter()
            .map(|&th| {
                let cb = C::from_polar(r, th) * factor;
                let st = match prev {
                    None => base.walk(C::new(0.0, 0.0), base.init, cb),
                    Some(l) => {
                        let k = (((th - region.theta_min) / l.dtheta) as usize).min(l.thetas.len() - 1);
                        let pb = C::from_polar(l.r(), l.thetas[k]) * factor;
                        let s = taylor_sum(&l.coeffs[k], cb - pb);
                        let m = s[0].norm().max(s[1].norm());
                        if m > 0.0 && m.is_finite() {
                            [s[0] / m, s[1] / m]
                        } else {
                            s
                        }
                    }
                };
                base.taylor_coeffs(cb, st, radius)
            })
            .collect()
    });
    Level { r_in, dr, dtheta, thetas, coeffs }
}

/// Candidate roots in one cell: local maxima of the detector on a grid of
/// spacing `σℓ`, polished by Newton.
fn cell_roots(source: &FieldSource, eq: &EquationSpec, level: &Level, j: usize, strat: &SweepStrategy) -> Vec<Root> {
    let base = source.base();
    let factor = source.base_factor();
    let (r, th) = (level.r(), level.thetas[j]);
    let cb = C::from_polar(r, th) * factor;
    let a = &level.coeffs[j];
    let ell = eq.length_scale(C::new(r, 0.0));
    let mr = ((level.dr / (strat.spacing * ell)).ceil() as usize).max(1);
    let mt = ((r * level.dtheta / (strat.spacing * ell)).ceil() as usize).max(1);
    let point = |ia: usize, ib: usize| {
        let rho = level.r_in + (ia as f64 + 0.5) * level.dr / mr as f64;
        let phi = th - 0.5 * level.dtheta + (ib as f64 + 0.5) * level.dtheta / mt as f64;
        C::from_polar(rho, phi)
    };
    let mut d = vec![0.0; mr * mt];
    for ia in 0..mr {
        for ib in 0..mt {
            let zb = point(ia, ib) * factor;
            let jet = source.lift(&base.jet_from_state(zb, taylor_sum(a, zb - cb)));
            d[ia * mt + ib] = detector(eq, &jet);
        }
    }
    let patch = Patch { cb, st: [a[0], a[1]] };
    let mut out = Vec::new();
    // Cell edges compare only with neighbours inside the cell; roots found
    // from two cells are merged later.
    for ia in 0..mr {
        for ib in 0..mt {
            let v = d[ia * mt + ib];
            if v < strat.detect_level {
                continue;
            }
            let rows = ia.saturating_sub(1)..=(ia + 1).min(mr - 1);
            let is_max = rows.into_iter().all(|x| {
                (ib.saturating_sub(1)..=(ib + 1).min(mt - 1)).all(|y| (x == ia && y == ib) || d[x * mt + y] <= v)
            });
            if is_max {
                if let Some(root) = polish(source, eq, patch, point(ia, ib)) {
                    out.push(root);
                }
            }
        }
    }
    out
}

fn ring(center: C, radius: f64, n: usize) -> Vec<C> {
    (0..n).map(|k| center + C::from_polar(radius, 2.0 * PI * (k as f64 + 0.25) / n as f64)).collect()
}

/// Sweep a region for poles and zeros.  The region is tiled by Taylor patches
/// of the linear solution; roots are found by Newton from local maxima of
/// `|w'/w|` sampled closer than the local disc scale, deduplicated, and each
/// pole is confirmed by a Laurent fit.
pub fn sweep(source: &FieldSource, region: &Region, strategy: &SweepStrategy) -> Result<PoleCatalog, PoleFieldError> {
    region.validate()?;
    let eq = source.equation();
    let mut roots: Vec<Root> = Vec::new();
    let mut level = next_level(source, region, None);
    loop {
        if level.r_in + level.dr >= region.r_min && level.r_in <= region.r_max {
            let found: Vec<Root> = with_thread_cap(|| {
                (0..level.thetas.len())
                    .into_par_iter()
                    .flat_map_iter(|j| cell_roots(source, &eq, &level, j, strategy))
                    .collect()
            });
            roots.extend(found);
        }
        if level.r_in > region.r_max {
            break;
        }
        level = next_level(source, region, Some(&level));
    }
    // Deduplicate in a fixed order.
    let mut roots: Vec<Root> = roots.into_iter().filter(|r| r.z.is_finite()).collect();
    roots.sort_by(|x, y| sort_key(x.z).partial_cmp(&sort_key(y.z)).unwrap());
    let mut unique: Vec<Root> = Vec::new();
    for r in roots {
        let tol = 0.05 * eq.length_scale(r.z);
        let dup = unique
            .iter()
            .rev()
            .take_while(|u| r.z.norm() - u.z.norm() <= tol)
            .any(|u| (u.z - r.z).norm() <= tol);
        if !dup {
            unique.push(r);
        }
    }
    let unique: Vec<Root> = unique.into_iter().filter(|r| region.contains(r.z)).collect();
    let classified: Vec<Result<Classified, String>> =
        with_thread_cap(|| unique.par_iter().map(|r| classify(source, &eq, r)).collect());
    let mut poles = Vec::new();
    let mut zeros = Vec::new();
    let mut warnings = Vec::new();
    for c in classified {
        match c {
            Ok(Classified::Pole(p)) => poles.push(p),
            Ok(Classified::Zero(z)) => zeros.push(z),
            Err(w) => warnings.push(w),
        }
    }
    poles.sort_by(|x, y| sort_key(x.p()).partial_cmp(&sort_key(y.p())).unwrap());
    zeros.sort_by(|x, y| sort_key(x.z).partial_cmp(&sort_key(y.z)).unwrap());
    Ok(PoleCatalog { eq, region: *region, poles, zeros, warnings })
}

enum Classified {
    Pole(PoleRecord),
    Zero(ZeroRecord),
}

fn classify(source: &FieldSource, eq: &EquationSpec, root: &Root) -> Result<Classified, String> {
    let ell = eq.length_scale(root.z);
    match root.kind {
        RootKind::Pole => {
            let rad = 0.25 * DISC_DELTA * ell;
            let jets: Vec<Jet> = ring(root.z, rad, 12).into_iter().map(|z| source.jet_near(&root.patch, z)).collect();
            if !jets.iter().all(finite) {
                return Err(format!("pole near {} has non-finite neighbours", root.z));
            }
            let seed = detect_pole(eq, &jets).map_err(|e| format!("pole near {}: {e}", root.z))?;
            let ser = laurent_w(&seed, 24);
            let res = (jets.iter().map(|j| ((ser.value(j.z) - j.w) / j.w).norm_sqr()).sum::<f64>() / jets.len() as f64).sqrt();
            if (seed.p - root.z).norm() > 1e-6 * ell || res > FIT_TOL {
                return Err(format!("pole near {} not confirmed (fit residual {res:.2e})", root.z));
            }
            Ok(Classified::Pole(PoleRecord { seed, fit_residual: res, string_id: None }))
        }
        RootKind::Zero => {
            let rad = 0.2 * ell;
            let pts = ring(root.z, rad, 32);
            let mut wind = C::new(0.0, 0.0);
            for z in &pts {
                let j = source.jet_near(&root.patch, *z);
                wind += j.w1 / j.w * (*z - root.z);
            }
            wind /= pts.len() as f64;
            let m = wind.re.round();
            if !(m >= 1.0 && (wind - m).norm() < 0.1) {
                return Err(format!("zero near {} has winding {wind}", root.z));
            }
            let slope = source.jet_near(&root.patch, root.z).w1;
            let sign = zero_sign(eq, root.z, slope);
            Ok(Classified::Zero(ZeroRecord { z: root.z, multiplicity: m as u32, slope, sign }))
        }
    }
}

fn zero_sign(eq: &EquationSpec, z: C, slope: C) -> ZeroSign {
    if eq.kind != EquationKind::PIV {
        return ZeroSign::Unclassified;
    }
    let tol = ZERO_CLASS_TOL * z.norm().max(1.0);
    if eq.gamma.norm() <= tol {
        return ZeroSign::Unclassified;
    }
    if (slope - 2.0 * eq.gamma).norm() < tol {
        ZeroSign::PlusTwoGamma
    } else if (slope + 2.0 * eq.gamma).norm() < tol {
        ZeroSign::MinusTwoGamma
    } else {
        ZeroSign::Unclassified
    }
}

/// Catalogue of the poles an integration hopped across.
pub fn catalog_from_trajectory(traj: &Trajectory) -> PoleCatalog {
    let mut poles: Vec<PoleRecord> =
        traj.pole_events.iter().map(|e| PoleRecord { seed: e.seed, fit_residual: 0.0, string_id: None }).collect();
    poles.sort_by(|x, y| sort_key(x.p()).partial_cmp(&sort_key(y.p())).unwrap());
    let r_max = poles.iter().map(|p| p.p().norm()).fold(0.0, f64::max);
    PoleCatalog {
        eq: traj.eq,
        region: Region::annulus(0.0, r_max.max(1.0)),
        poles,
        zeros: Vec::new(),
        warnings: Vec::new(),
    }
}

/// Poles near a trajectory: each peak of `|w'/w| ℓ` at a large value of `w`
/// gives a Newton guess `p0`; a small circle about `p0` is integrated from the
/// peak sample and the circle jets are fitted with a Laurent series.
pub fn harvest_trajectory(eq: &EquationSpec, traj: &Trajectory, opts: &IntegrateOptions) -> (Vec<PoleRecord>, Vec<String>) {
    let mut out: Vec<PoleRecord> =
        traj.pole_events.iter().map(|e| PoleRecord { seed: e.seed, fit_residual: 0.0, string_id: None }).collect();
    let mut warnings = Vec::new();
    let d: Vec<f64> = traj.samples.iter().map(|s| detector(eq, &s.jet)).collect();
    let m = eq.kind.pole_order() as f64;
    for i in 1..d.len().saturating_sub(1) {
        let j = traj.samples[i].jet;
        if d[i] < DETECT_LEVEL || d[i] < d[i - 1] || d[i] < d[i + 1] || eq.scaled_magnitude(j.z, j.w) < 1.0 {
            continue;
        }
        let p0 = j.z + m * j.w / j.w1;
        let ell = eq.length_scale(p0);
        if out.iter().any(|r| (r.p() - p0).norm() < 0.25 * ell) {
            continue;
        }
        let rho = 0.25 * DISC_DELTA * ell;
        let phi = (j.z - p0).arg();
        let entry = PathSpec::Segment { z0: j.z, z1: p0 + C::from_polar(rho, phi) };
        let ring = PathSpec::Circle { center: p0, radius: rho, turns: 1.0, start_angle: phi };
        let ring_opts = IntegrateOptions { max_step: 2.0 * PI * rho / 16.0, ..*opts };
        let jets = integrate(eq, &j, &entry, opts)
            .and_then(|t| integrate(eq, &t.end().jet, &ring, &ring_opts))
            .map(|t| t.samples.iter().map(|s| s.jet).collect::<Vec<Jet>>());
        let jets = match jets {
            Ok(v) => v,
            Err(e) => {
                warnings.push(format!("pole near {p0}: {e}"));
                continue;
            }
        };
        match detect_pole(eq, &jets) {
            Ok(seed) => {
                let ser = laurent_w(&seed, 24);
                let res =
                    (jets.iter().map(|j| ((ser.value(j.z) - j.w) / j.w).norm_sqr()).sum::<f64>() / jets.len() as f64).sqrt();
                if res <= FIT_TOL && (seed.p - p0).norm() < rho {
                    out.push(PoleRecord { seed, fit_residual: res, string_id: None });
                } else {
                    warnings.push(format!("pole near {p0} not confirmed (fit residual {res:.2e})"));
                }
            }
            Err(e) => warnings.push(format!("pole near {p0}: {e}")),
        }
    }
    (out, warnings)
}

/// Catalogue from a fan of `n_rays` straight integrations leaving `start`
/// towards the outer circle of `region`.  Works for any seed but only sees the
/// poles the rays pass near; failed rays are reported as warnings.  Ray `k`
/// leaves at angle fraction `(k + phase) / n_rays` of the region's span.
pub fn ray_fan(
    eq: &EquationSpec,
    start: &Jet,
    region: &Region,
    n_rays: usize,
    phase: f64,
    opts: &IntegrateOptions,
) -> Result<PoleCatalog, PoleFieldError> {
    region.validate()?;
    let z0 = start.z;
    let n = n_rays.max(1);
    let results: Vec<(Vec<PoleRecord>, Vec<String>)> = with_thread_cap(|| {
        (0..n)
            .into_par_iter()
            .map(|k| {
                let th = region.theta_min + region.span() * (k as f64 + phase) / n as f64;
                let dir = C::from_polar(1.0, th);
                // Distance from z0 to the outer circle along dir.
                let b = (z0.conj() * dir).re;
                let reach = -b + (b * b - z0.norm_sqr() + region.r_max * region.r_max).max(0.0).sqrt();
                let path = PathSpec::Segment { z0, z1: z0 + dir * reach.max(1e-9) };
                match integrate(eq, start, &path, opts) {
                    Ok(t) => harvest_trajectory(eq, &t, opts),
                    Err(e) => (Vec::new(), vec![format!("ray at {th:.4}: {e}")]),
                }
            })
            .collect()
    });
    let mut seeds: Vec<PoleRecord> = Vec::new();
    let mut warnings = Vec::new();
    for (p, w) in results {
        seeds.extend(p);
        warnings.extend(w);
    }
    seeds.sort_by(|x, y| sort_key(x.p()).partial_cmp(&sort_key(y.p())).unwrap());
    let mut poles: Vec<PoleRecord> = Vec::new();
    for rec in seeds {
        let tol = 0.05 * eq.length_scale(rec.p());
        let dup = poles
            .iter()
            .rev()
            .take_while(|u| rec.p().norm() - u.p().norm() <= tol)
            .any(|u| (u.p() - rec.p()).norm() <= tol);
        if !dup && region.contains(rec.p()) {
            poles.push(rec);
        }
    }
    Ok(PoleCatalog { eq: *eq, region: *region, poles, zeros: Vec::new(), warnings })
}

/// `τ` of the string recursion for each equation.
pub fn string_tau(kind: EquationKind) -> Frac {
    match kind {
        EquationKind::PI => Frac::new(1, 4),
        EquationKind::PII => Frac::new(1, 2),
        EquationKind::PIV => Frac::int(1),
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// `log p` with the argument taken within `π` of `reference`.
fn log_near(p: C, reference: f64) -> C {
    C::new(p.norm().ln(), reference + wrap(p.arg() - reference))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LemmaChecks {
    /// Mean increment of `p^(1+τ)` over `(1+τ)ω` (tends to 1).
    pub value_ratio: C,
    /// `(s+t)θ - t arg ω` reduced to `(-π, π]`.
    pub angle_defect: f64,
    /// Fitted counting coefficient over `1/((1+τ)|ω|)`.
    pub count_ratio: f64,
    /// `|ω_fit| / |ω_catalogue| - 1`.
    pub omega_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StringModel {
    /// Catalogue indices, innermost first.
    pub members: Vec<usize>,
    pub omega: C,
    pub tau: Frac,
    /// Common residue, if all members share one.
    pub eps: Option<f64>,
    /// Residues alternate along the string.
    pub interlaced: bool,
    pub theta: f64,
    pub count_coeff: f64,
    pub checks: LemmaChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringReport {
    pub strings: Vec<StringModel>,
    /// Poles left out of every string (reported, not fatal).
    pub unchained: Vec<usize>,
}

/// Fit the string model to points given innermost first.
pub fn fit_string(points: &[C], kind: EquationKind) -> Option<(C, f64, f64, LemmaChecks)> {
    let periods: Vec<C> = period_catalog(kind).into_iter().map(|(_, w)| w).collect();
    if points.len() < 3 || periods.is_empty() {
        return None;
    }
    let tau = string_tau(kind);
    let tv = tau.value();
    let n = points.len();
    let outer = points[n - 1].arg();
    let logs: Vec<C> = points.iter().map(|p| log_near(*p, outer)).collect();
    let half = n / 2;
    let mut omega = C::new(0.0, 0.0);
    let mut dq = C::new(0.0, 0.0);
    for k in half..n - 1 {
        omega += (points[k + 1] - points[k]) * (tv * logs[k]).exp();
        dq += ((1.0 + tv) * logs[k + 1]).exp() - ((1.0 + tv) * logs[k]).exp();
    }
    let cnt = (n - 1 - half) as f64;
    omega /= cnt;
    dq /= cnt;
    let cat = periods
        .iter()
        .min_by(|a, b| (a.norm() - omega.norm()).abs().total_cmp(&(b.norm() - omega.norm()).abs()))
        .copied()?;
    let omega_ref = omega / omega.norm() * cat.norm();
    let quarter = (3 * n) / 4;
    let theta = logs[quarter.min(n - 1)..].iter().map(|l| l.im).sum::<f64>() / (n - quarter.min(n - 1)) as f64;
    let angle_defect = wrap((tau.num + tau.den) as f64 * theta - tau.den as f64 * omega.arg());
    // counting coefficient on the outer three quarters of the radius range
    let r_hi = points[n - 1].norm();
    let r_lo = (r_hi / 4.0).max(points[0].norm());
    let grid: Vec<f64> = (0..=40).map(|i| r_lo + (r_hi - r_lo) * i as f64 / 40.0).collect();
    let xs: Vec<f64> = grid.iter().map(|r| r.powf(1.0 + tv)).collect();
    let ys: Vec<f64> = grid.iter().map(|r| points.iter().filter(|p| p.norm() <= *r).count() as f64).collect();
    let count_coeff = linear_slope(&xs, &ys);
    let checks = LemmaChecks {
        value_ratio: dq / ((1.0 + tv) * omega_ref),
        angle_defect,
        count_ratio: count_coeff * (1.0 + tv) * cat.norm(),
        omega_error: omega.norm() / cat.norm() - 1.0,
    };
    Some((omega, theta, count_coeff, checks))
}

fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Chain poles into strings, outermost first, stepping inward by the
/// predicted `|ω| |p|^-τ` and preferring the direction of the previous step.
pub fn cluster_strings(catalog: &mut PoleCatalog) -> StringReport {
    let kind = catalog.eq.kind;
    let periods: Vec<f64> = period_catalog(kind).into_iter().map(|(_, w)| w.norm()).collect();
    let n = catalog.poles.len();
    for p in catalog.poles.iter_mut() {
        p.string_id = None;
    }
    if periods.is_empty() {
        return StringReport { strings: Vec::new(), unchained: (0..n).collect() };
    }
    let tv = string_tau(kind).value();
    let pts = catalog.pole_points();
    // indices sorted by modulus (the catalogue order already is)
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| pts[*a].norm().total_cmp(&pts[*b].norm()));
    let radii: Vec<f64> = order.iter().map(|i| pts[*i].norm()).collect();
    let w_max = periods.iter().copied().fold(0.0, f64::max);
    let mut assigned = vec![false; n];
    let mut strings = Vec::new();
    let mut unchained = Vec::new();
    for &seed in order.iter().rev() {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let mut chain = vec![seed];
        let mut cur = seed;
        let mut prev_dir: Option<C> = None;
        loop {
            let pc = pts[cur];
            let scale = pc.norm().max(1.0).powf(-tv);
            let lo = pc.norm() - 1.4 * w_max * scale;
            let start = radii.partition_point(|r| *r < lo);
            let mut best: Option<(f64, usize)> = None;
            for &q in &order[start..] {
                if pts[q].norm() >= pc.norm() {
                    break;
                }
                if assigned[q] {
                    continue;
                }
                let step = pc - pts[q];
                let len_err =
                    periods.iter().map(|w| (step.norm() / (w * scale) - 1.0).abs()).fold(f64::INFINITY, f64::min);
                if len_err > 0.3 {
                    continue;
                }
                let reference = prev_dir.unwrap_or(pc / pc.norm());
                let angle = (step / reference).arg().abs();
                if angle > 0.6 {
                    continue;
                }
                let score = angle + len_err;
                if best.is_none_or(|(s, _)| score < s) {
                    best = Some((score, q));
                }
            }
            let Some((_, q)) = best else { break };
            let step = pc - pts[q];
            prev_dir = Some(step / step.norm());
            assigned[q] = true;
            chain.push(q);
            cur = q;
        }
        if chain.len() < MIN_STRING {
            unchained.extend(chain);
            continue;
        }
        chain.reverse();
        let points: Vec<C> = chain.iter().map(|i| pts[*i]).collect();
        let Some((omega, theta, count_coeff, checks)) = fit_string(&points, kind) else {
            unchained.extend(chain);
            continue;
        };
        let eps_list: Vec<f64> = chain.iter().map(|i| catalog.poles[*i].eps()).collect();
        let eps = eps_list.iter().all(|e| *e == eps_list[0]).then_some(eps_list[0]);
        let interlaced = eps_list.windows(2).all(|w| w[0] != w[1]);
        let id = strings.len();
        for i in &chain {
            catalog.poles[*i].string_id = Some(id);
        }
        strings.push(StringModel {
            members: chain,
            omega,
            tau: string_tau(kind),
            eps,
            interlaced,
            theta,
            count_coeff,
            checks,
        });
    }
    unchained.sort_unstable();
    StringReport { strings, unchained }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecursionReport {
    pub p_final: C,
    /// `p_K / (K(1+τ)ω)^(1/(1+τ))` on the nearest branch.
    pub value_ratio: C,
    /// `(K+1) / (r^(1+τ)/((1+τ)|ω|))` at `r = |p_K|`.
    pub count_ratio: f64,
    pub angle_defect: f64,
}

/// Iterate `p_{k+1} = p_k + ω p_k^-τ` exactly `k_max` times.
pub fn string_recursion_sim(omega: C, tau: Frac, p0: C, k_max: usize) -> RecursionReport {
    let tv = tau.value();
    let mut p = p0;
    let mut max_r = p0.norm();
    for _ in 0..k_max {
        let pw = if tau.den == 1 { p.powi(-(tau.num as i32)) } else { (-tv * p.ln()).exp() };
        p += omega * pw;
        max_r = max_r.max(p.norm());
    }
    let k = k_max as f64;
    let base = (k * (1.0 + tv) * omega).powf(1.0 / (1.0 + tv));
    let branches = (tau.num + tau.den) as usize;
    let value_ratio = (0..branches)
        .map(|j| p / (base * C::from_polar(1.0, 2.0 * PI * j as f64 * tau.den as f64 / branches as f64)))
        .min_by(|a, b| (a - 1.0).norm().total_cmp(&(b - 1.0).norm()))
        .unwrap();
    let r = p.norm();
    let predicted = r.powf(1.0 + tv) / ((1.0 + tv) * omega.norm());
    RecursionReport {
        p_final: p,
        value_ratio,
        count_ratio: (k + 1.0) / predicted,
        angle_defect: wrap((tau.num + tau.den) as f64 * p.arg() - tau.den as f64 * omega.arg()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CountingTable {
    /// `(r, n(r))`.
    pub rows: Vec<(f64, usize)>,
    /// Slope of `log n` against `log r` on `[r_max/4, r_max]`.
    pub exponent: f64,
}

impl CountingTable {
    /// `n(r) 2π / r²` at the largest radius.
    pub fn nu_estimate(&self) -> f64 {
        let (r, n) = *self.rows.last().expect("nonempty table");
        n as f64 * 2.0 * PI / (r * r)
    }
}

/// Counting function of a point set on `r_grid` with the growth exponent fit
/// on the outer three quarters of the grid range.
pub fn counting_function(points: &[C], r_grid: &[f64]) -> CountingTable {
    let mut radii: Vec<f64> = points.iter().map(|p| p.norm()).collect();
    radii.sort_by(f64::total_cmp);
    let rows: Vec<(f64, usize)> = r_grid.iter().map(|&r| (r, radii.partition_point(|x| *x < r))).collect();
    let r_max = r_grid.iter().copied().fold(0.0, f64::max);
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|(r, n)| *r >= r_max / 4.0 && *n > 0)
        .map(|(r, n)| (r.ln(), (*n as f64).ln()))
        .unzip();
    let exponent = if xs.len() >= 2 { linear_slope(&xs, &ys) } else { f64::NAN };
    CountingTable { rows, exponent }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedgerMode {
    Count,
    Contour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerReport {
    pub r: f64,
    pub n_plus: usize,
    pub n_minus: usize,
    /// `(n₊ - n₋) 2π / r²`.
    pub delta_estimate: f64,
    /// `(1/2πi) ∮ w dz` (count mode: `n₊ - n₋`).
    pub integral_w: C,
    /// `(1/2πi) ∮ W dz` (count mode: `-(n₊ + n₋)`).
    pub integral_big_w: C,
}

/// Boundary of the disc `|z| < r` joined with every pole or zero disc
/// (radius `DISC_DELTA ℓ`) that meets it, closed under overlap.  Each kept
/// arc runs counterclockwise about its own centre and stays outside every
/// other disc, so all catalogued singularities are at least a disc radius away.
struct Contour {
    r: f64,
    discs: Vec<(C, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    center: C,
    radius: f64,
    a0: f64,
    a1: f64,
    /// Index of the small disc, `None` for the big circle.
    disc: Option<usize>,
}

impl Contour {
    fn new(catalog: &PoleCatalog, r: f64) -> Self {
        let eq = catalog.eq;
        let mut pending: Vec<(C, f64)> = catalog
            .poles
            .iter()
            .map(|p| p.p())
            .chain(catalog.zeros.iter().map(|z| z.z))
            .map(|p| (p, DISC_DELTA * eq.length_scale(p)))
            .collect();
        let mut discs: Vec<(C, f64)> = Vec::new();
        loop {
            let (hit, rest): (Vec<_>, Vec<_>) = pending.into_iter().partition(|(p, rho)| {
                p.norm() - rho < r || discs.iter().any(|(q, s)| (p - q).norm() < rho + s)
            });
            pending = rest;
            if hit.is_empty() {
                return Contour { r, discs };
            }
            discs.extend(hit);
        }
    }

    fn encloses(&self, z: C) -> bool {
        z.norm() < self.r || self.discs.iter().any(|(p, rho)| (z - p).norm() < *rho)
    }

    fn circles(&self) -> Vec<(C, f64)> {
        std::iter::once((C::new(0.0, 0.0), self.r)).chain(self.discs.iter().copied()).collect()
    }

    fn arcs(&self) -> Vec<Arc> {
        let circles = self.circles();
        let mut out = Vec::new();
        for (i, &(c, rad)) in circles.iter().enumerate() {
            let mut cuts = vec![-PI, PI];
            for (j, &(d, s)) in circles.iter().enumerate() {
                let dist = (d - c).norm();
                if i == j || dist >= rad + s || dist <= (rad - s).abs() {
                    continue;
                }
                let cosv = (rad * rad + dist * dist - s * s) / (2.0 * rad * dist);
                let a = cosv.clamp(-1.0, 1.0).acos();
                let base = (d - c).arg();
                cuts.push(wrap(base - a));
                cuts.push(wrap(base + a));
            }
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                if w[1] - w[0] < 1e-14 {
                    continue;
                }
                let mid = c + C::from_polar(rad, 0.5 * (w[0] + w[1]));
                let covered = circles.iter().enumerate().any(|(j, &(d, s))| j != i && (mid - d).norm() < s);
                if !covered {
                    out.push(Arc { center: c, radius: rad, a0: w[0], a1: w[1], disc: (i > 0).then(|| i - 1) });
                }
            }
        }
        out
    }
}

/// Residue bookkeeping on the contour `Γ_r`.  Count mode sums residues of
/// catalogued poles inside; contour mode integrates `w` and `W` numerically.
pub fn residue_ledger(
    catalog: &PoleCatalog,
    r: f64,
    source: Option<&FieldSource>,
    mode: LedgerMode,
) -> Result<LedgerReport, PoleFieldError> {
    let contour = Contour::new(catalog, r);
    let inside: Vec<&PoleRecord> = catalog.poles.iter().filter(|p| contour.encloses(p.p())).collect();
    let n_plus = inside.iter().filter(|p| p.seed.eps == Residue::Plus).count();
    let n_minus = inside.len() - n_plus;
    let delta_estimate = (n_plus as f64 - n_minus as f64) * 2.0 * PI / (r * r);
    let (integral_w, integral_big_w) = match (mode, source) {
        (LedgerMode::Count, _) | (LedgerMode::Contour, None) => {
            (C::new(n_plus as f64 - n_minus as f64, 0.0), C::new(-(inside.len() as f64), 0.0))
        }
        (LedgerMode::Contour, Some(src)) => contour_integrals(catalog, &contour, src)?,
    };
    Ok(LedgerReport { r, n_plus, n_minus, delta_estimate, integral_w, integral_big_w })
}

/// Gauss-Legendre nodes per detour arc, at least.
const DETOUR_NODES: usize = 32;

fn contour_integrals(catalog: &PoleCatalog, contour: &Contour, src: &FieldSource) -> Result<(C, C), PoleFieldError> {
    let eq = catalog.eq;
    let r = contour.r;
    let rho = DISC_DELTA * eq.length_scale(C::new(r, 0.0));
    let arcs = contour.arcs();
    // Patches: anchors on the big circle, one per small disc centre.
    let base = src.base();
    let n_anchor = ((2.0 * PI * r) / (0.5 * base.step_scale(C::new(r, 0.0)))).ceil().max(8.0) as usize;
    let anchor_at = |k: usize| C::from_polar(r, -PI + 2.0 * PI * k as f64 / n_anchor as f64);
    let (anchors, disc_patches): (Vec<Patch>, Vec<Patch>) = with_thread_cap(|| {
        let anchors: Vec<Patch> = (0..n_anchor).into_par_iter().map(|k| src.patch_at(anchor_at(k))).collect();
        let factor = src.base_factor();
        let discs = contour
            .discs
            .par_iter()
            .map(|(p, _)| {
                let k = ((p.arg() + PI) / (2.0 * PI) * n_anchor as f64).round() as usize % n_anchor;
                let a = anchors[k];
                let cb = *p * factor;
                Patch { cb, st: base.walk(a.cb, a.st, cb) }
            })
            .collect();
        (anchors, discs)
    });
    let mut panels: Vec<(Arc, f64, f64)> = Vec::new();
    for arc in &arcs {
        let len = arc.radius * (arc.a1 - arc.a0);
        let min = if arc.disc.is_some() { DETOUR_NODES / GL8_X.len() } else { 1 };
        let m = ((len / (0.2 * rho)).ceil() as usize).max(min);
        for k in 0..m {
            let t0 = arc.a0 + (arc.a1 - arc.a0) * k as f64 / m as f64;
            let t1 = arc.a0 + (arc.a1 - arc.a0) * (k + 1) as f64 / m as f64;
            panels.push((*arc, t0, t1));
        }
    }
    let parts: Vec<Result<(C, C), PoleFieldError>> = with_thread_cap(|| {
        panels
            .par_iter()
            .map(|&(arc, a, b)| {
                let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
                let mut acc = (C::new(0.0, 0.0), C::new(0.0, 0.0));
                for (x, wg) in GL8_X.iter().zip(GL8_W) {
                    let phi = m + h * x;
                    let e = C::from_polar(1.0, phi);
                    let z = arc.center + arc.radius * e;
                    let dz = C::new(0.0, arc.radius) * e;
                    let patch = match arc.disc {
                        Some(i) => &disc_patches[i],
                        None => &anchors[((phi + PI) / (2.0 * PI) * n_anchor as f64).round() as usize % n_anchor],
                    };
                    let jet = src.jet_near(patch, z);
                    if !finite(&jet) {
                        return Err(PoleFieldError::ContourHitsPole { r, distance: 0.0 });
                    }
                    acc.0 += wg * h * jet.w * dz;
                    acc.1 += wg * h * big_w_anywhere(&eq, &jet) * dz;
                }
                Ok(acc)
            })
            .collect()
    });
    let mut tw = C::new(0.0, 0.0);
    let mut tb = C::new(0.0, 0.0);
    for p in parts {
        let (a, b) = p?;
        tw += a;
        tb += b;
    }
    let two_pi_i = C::new(0.0, 2.0 * PI);
    Ok((tw / two_pi_i, tb / two_pi_i))
}

/// First integral from the algebraic relation; for (IV) near a zero of `w`
/// the relation is evaluated without the guard (the contour stays a disc
/// radius away from catalogued zeros).
fn big_w_anywhere(eq: &EquationSpec, jet: &Jet) -> C {
    match eqcore::first_integral(eq, jet) {
        Ok(v) => v.value,
        Err(_) => {
            let (z, w, w1) = (jet.z, jet.w, jet.w1);
            let w2 = w * w;
            (w2 * (w2 + 4.0 * z * w + 4.0 * (z * z - eq.alpha)) - 2.0 * eq.beta - w1 * w1) / (4.0 * w)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InferredSignature {
    pub signature: SignatureIV,
    /// Fitted `a_ν` on the sector midlines.
    pub fitted: [C; 4],
    pub delta: i32,
}

/// Fit `W = 2 a_ν z + λ_ν / z` on each sector midline `arg z = νπ/2` near
/// `r_probe` and assign the nearest of `α, γ, -γ`.
pub fn infer_signature(
    source: &dyn JetSource,
    r_probe: f64,
    catalog: Option<&PoleCatalog>,
) -> Result<InferredSignature, PoleFieldError> {
    let eq = source.equation();
    if eq.kind != EquationKind::PIV {
        return Err(PoleFieldError::NeedsFourthEquation);
    }
    let factors = [0.9, 0.95, 1.0, 1.05, 1.1];
    let mut fitted = [C::new(0.0, 0.0); 4];
    let mut symbols = [SigSymbol::Alpha; 4];
    for nu in 0..4 {
        let theta = nu as f64 * PI / 2.0;
        let radii: Vec<f64> = factors.iter().map(|f| f * r_probe).collect();
        if let Some(cat) = catalog {
            let near = radii.iter().any(|r| {
                let z = C::from_polar(*r, theta);
                cat.poles.iter().any(|p| (p.p() - z).norm() < 3.0 * p.seed.disc_radius())
            });
            if near {
                return Err(PoleFieldError::SectorNotPoleFree(nu));
            }
        }
        let jets = source.jets_on_ray(theta, &radii);
        // least squares for (a, λ) in W = 2 a z + λ / z
        let (mut a11, mut a12, mut a22) = (0.0, C::new(0.0, 0.0), 0.0);
        let (mut b1, mut b2) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        let mut rows = Vec::new();
        for j in &jets {
            let j = j.ok_or(PoleFieldError::SectorNotPoleFree(nu))?;
            let big = eqcore::first_integral(&eq, &j).map_err(|_| PoleFieldError::SectorNotPoleFree(nu))?.value;
            let (x1, x2) = (2.0 * j.z, 1.0 / j.z);
            a11 += x1.norm_sqr();
            a22 += x2.norm_sqr();
            a12 += x1.conj() * x2;
            b1 += x1.conj() * big;
            b2 += x2.conj() * big;
            rows.push((x1, x2, big));
        }
        let det = a11 * a22 - a12.norm_sqr();
        let a = (a22 * b1 - a12 * b2) / det;
        let lam = (a11 * b2 - a12.conj() * b1) / det;
        let misfit = rows.iter().map(|(x1, x2, y)| (a * x1 + lam * x2 - y).norm() / y.norm().max(1.0)).fold(0.0, f64::max);
        if !a.is_finite() || misfit > 1e-3 {
            return Err(PoleFieldError::SectorNotPoleFree(nu));
        }
        fitted[nu] = a;
        let cands = [(SigSymbol::Alpha, eq.alpha), (SigSymbol::GammaPlus, eq.gamma), (SigSymbol::GammaMinus, -eq.gamma)];
        let mut by_dist: Vec<(f64, SigSymbol, C)> = cands.iter().map(|(s, v)| ((a - v).norm(), *s, *v)).collect();
        by_dist.sort_by(|x, y| x.0.total_cmp(&y.0));
        let gap = (by_dist[0].2 - by_dist[1].2).norm();
        if by_dist[0].0 > 0.25 * gap {
            return Err(PoleFieldError::AmbiguousAssignment { sector: nu, value: a });
        }
        symbols[nu] = by_dist[0].1;
    }
    let signature = SignatureIV::new(symbols, eq.alpha, eq.gamma);
    let delta = delta_of_signature(&signature).0;
    Ok(InferredSignature { signature, fitted, delta })
}

/// Residue sign predicted for a string at `theta` from the limits `w/z -> τ`
/// on its clockwise (`τ_{ν-1}`) and counter-clockwise (`τ_ν`) sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StokesSides {
    pub tau_before: f64,
    pub tau_after: f64,
    pub predicted_eps: f64,
}

/// Sides of a string at `theta`, probed at radius `r` and angle offset `offset`.
pub fn stokes_sides(source: &dyn JetSource, theta: f64, r: f64, offset: f64) -> Option<StokesSides> {
    let snap = |z: C| -> Option<f64> {
        let j = source.jet_at(z)?;
        let q = j.w / j.z;
        [0.0, -2.0].into_iter().min_by(|a, b| (q - a).norm().total_cmp(&(q - b).norm()))
    };
    let before = snap(C::from_polar(r, theta - offset))?;
    let after = snap(C::from_polar(r, theta + offset))?;
    // ∫ z dz along the ray picks up e^{2iθ}: the sign flips between π/4 and 3π/4.
    let orient = (2.0 * theta).sin().signum();
    Some(StokesSides { tau_before: before, tau_after: after, predicted_eps: orient * (before - after) / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeficiencyRow {
    pub r: f64,
    pub poles: usize,
    /// Zeros counted with multiplicity.
    pub zeros: usize,
    pub ratio: f64,
    pub deficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeficiencyReport {
    pub rows: Vec<DeficiencyRow>,
    pub plus_family: usize,
    pub minus_family: usize,
    /// Zeros confirmed as residue-one poles of `w_± = (w' ± 2γ)/(2w) + z + w/2`.
    pub auxiliary_confirmed: usize,
}

/// Residue of `w_± = (w' ± 2γ)/(2w) + z + w/2` at a zero, sign chosen from
/// the zero's family (`+` for double zeros).
pub fn auxiliary_residue(source: &dyn JetSource, zero: &ZeroRecord) -> Option<C> {
    let eq = source.equation();
    let sgn = if zero.sign == ZeroSign::MinusTwoGamma { -1.0 } else { 1.0 };
    let rad = 0.2 * eq.length_scale(zero.z);
    let pts = ring(zero.z, rad, 32);
    let mut acc = C::new(0.0, 0.0);
    for z in &pts {
        let j = source.jet_at(*z)?;
        let aux = (j.w1 + sgn * 2.0 * eq.gamma) / (2.0 * j.w) + j.z + j.w / 2.0;
        acc += aux * (*z - zero.z);
    }
    Some(acc / pts.len() as f64)
}

/// `n(r, 1/w) / n(r, w)` and the deficiency estimate `1 - ratio` on a radius grid.
pub fn zero_catalog_and_deficiency(
    catalog: &PoleCatalog,
    r_grid: &[f64],
    auxiliary: Option<&dyn JetSource>,
) -> DeficiencyReport {
    let rows = r_grid
        .iter()
        .map(|&r| {
            let poles = catalog.poles.iter().filter(|p| p.p().norm() < r).count();
            let zeros: usize = catalog.zeros.iter().filter(|z| z.z.norm() < r).map(|z| z.multiplicity as usize).sum();
            let ratio = if poles > 0 { zeros as f64 / poles as f64 } else { f64::NAN };
            DeficiencyRow { r, poles, zeros, ratio, deficiency: 1.0 - ratio }
        })
        .collect();
    let plus_family = catalog.zeros.iter().filter(|z| z.sign == ZeroSign::PlusTwoGamma).count();
    let minus_family = catalog.zeros.iter().filter(|z| z.sign == ZeroSign::MinusTwoGamma).count();
    let auxiliary_confirmed = auxiliary.map_or(0, |src| {
        catalog
            .zeros
            .par_iter()
            .filter(|z| auxiliary_residue(src, z).is_some_and(|res| (res - 1.0).norm() < 1e-6))
            .count()
    });
    DeficiencyReport { rows, plus_family, minus_family, auxiliary_confirmed }
}

/// Largest relative residual of the order-one first-order equation over the jets.
pub fn first_order_residual(jets: &[Jet], alpha: C) -> f64 {
    jets.iter().map(|j| backlund::order_one_residual(j, alpha)).fold(0.0, f64::max)
}

/// JSON and SVG renderings of catalogues and strings.
pub mod io {
    use super::*;
    use serde_json::{json, Value};

    fn cplx(z: C) -> Value {
        json!({"re": z.re, "im": z.im})
    }

    pub fn catalog_json(cat: &PoleCatalog) -> Value {
        let branch = match cat.eq.gamma_branch {
            eqcore::GammaBranch::Plus => "plus",
            eqcore::GammaBranch::Minus => "minus",
        };
        json!({
            "eq": {
                "kind": cat.eq.kind.to_string(),
                "alpha": cplx(cat.eq.alpha),
                "beta": cplx(cat.eq.beta),
                "gammaBranch": branch,
            },
            "region": cat.region,
            "poles": cat.poles.iter().map(|p| json!({
                "re": p.p().re,
                "im": p.p().im,
                "eps": p.eps(),
                "h": cplx(p.seed.h),
                "stringId": p.string_id,
            })).collect::<Vec<_>>(),
            "zeros": cat.zeros.iter().map(|z| json!({
                "re": z.z.re,
                "im": z.z.im,
                "sign": match z.sign {
                    ZeroSign::PlusTwoGamma => "+2gamma",
                    ZeroSign::MinusTwoGamma => "-2gamma",
                    ZeroSign::Unclassified => "none",
                },
                "multiplicity": z.multiplicity,
            })).collect::<Vec<_>>(),
            "warnings": cat.warnings,
        })
    }

    /// Rebuild a catalogue from [`catalog_json`] output.
    pub fn catalog_from_json(v: &Value) -> Option<PoleCatalog> {
        let c = |x: &Value| Some(C::new(x.get("re")?.as_f64()?, x.get("im")?.as_f64()?));
        let e = v.get("eq")?;
        let kind = match e.get("kind")?.as_str()? {
            "I" => EquationKind::PI,
            "II" => EquationKind::PII,
            _ => EquationKind::PIV,
        };
        let alpha = c(e.get("alpha")?)?;
        let beta = c(e.get("beta")?)?;
        let branch = if e.get("gammaBranch").and_then(|b| b.as_str()) == Some("minus") {
            eqcore::GammaBranch::Minus
        } else {
            eqcore::GammaBranch::Plus
        };
        let eq = match kind {
            EquationKind::PI => EquationSpec::first(),
            EquationKind::PII => EquationSpec::second(alpha),
            EquationKind::PIV => EquationSpec::fourth(alpha, beta, branch),
        };
        let region: Region = serde_json::from_value(v.get("region")?.clone()).ok()?;
        let poles = v
            .get("poles")?
            .as_array()?
            .iter()
            .map(|p| {
                let seed = PoleSeed::new(eq, c(p)?, Residue::from_sign(p.get("eps")?.as_f64()?), c(p.get("h")?)?);
                let string_id = p.get("stringId").and_then(|s| s.as_u64()).map(|s| s as usize);
                Some(PoleRecord { seed, fit_residual: 0.0, string_id })
            })
            .collect::<Option<Vec<_>>>()?;
        let zeros = v
            .get("zeros")
            .and_then(|z| z.as_array())
            .map(|zs| {
                zs.iter()
                    .filter_map(|z| {
                        let sign = match z.get("sign")?.as_str()? {
                            "+2gamma" => ZeroSign::PlusTwoGamma,
                            "-2gamma" => ZeroSign::MinusTwoGamma,
                            _ => ZeroSign::Unclassified,
                        };
                        let multiplicity = z.get("multiplicity").and_then(|m| m.as_u64()).unwrap_or(1) as u32;
                        Some(ZeroRecord { z: c(z)?, multiplicity, slope: C::new(f64::NAN, f64::NAN), sign })
                    })
                    .collect()
            })
            .unwrap_or_default();
        let warnings = v
            .get("warnings")
            .and_then(|w| w.as_array())
            .map(|ws| ws.iter().filter_map(|w| w.as_str().map(String::from)).collect())
            .unwrap_or_default();
        Some(PoleCatalog { eq, region, poles, zeros, warnings })
    }

    pub fn strings_json(report: &StringReport) -> Value {
        json!({
            "strings": report.strings.iter().map(|s| json!({
                "omega": cplx(s.omega),
                "tau": {"num": s.tau.num, "den": s.tau.den},
                "eps": s.eps,
                "theta": s.theta,
                "countCoeff": s.count_coeff,
                "members": s.members,
                "checks": s.checks,
            })).collect::<Vec<_>>(),
            "unchained": report.unchained,
        })
    }

    /// Pole map: filled circles for residue `+1`, open circles for `-1`,
    /// stars for zeros and dashed Stokes rays.
    pub fn catalog_svg(cat: &PoleCatalog) -> String {
        let r = cat.region.r_max;
        let size = 800.0;
        let s = size / (2.2 * r);
        let xy = |z: C| (size / 2.0 + s * z.re, size / 2.0 - s * z.im);
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
        );
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        let rays = match cat.eq.kind {
            EquationKind::PIV => (0..4).map(|k| (2 * k + 1) as f64 * PI / 4.0).collect::<Vec<_>>(),
            EquationKind::PII => (0..6).map(|k| k as f64 * PI / 3.0).collect(),
            EquationKind::PI => (0..5).map(|k| PI + 2.0 * k as f64 * PI / 5.0).collect(),
        };
        for th in rays {
            let (x, y) = xy(C::from_polar(r * 1.05, th));
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n",
                size / 2.0,
                size / 2.0
            ));
        }
        let dot = (0.004 * size).max(1.5);
        for p in &cat.poles {
            let (x, y) = xy(p.p());
            let fill = if p.seed.eps == Residue::Plus { "black" } else { "none" };
            out.push_str(&format!(
                "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{dot:.2}\" fill=\"{fill}\" stroke=\"black\" stroke-width=\"0.6\"/>\n"
            ));
        }
        for z in &cat.zeros {
            let (x, y) = xy(z.z);
            let pts: Vec<String> = (0..10)
                .map(|k| {
                    let rad = if k % 2 == 0 { 1.6 * dot } else { 0.7 * dot };
                    let a = PI / 2.0 + k as f64 * PI / 5.0;
                    format!("{:.2},{:.2}", x + rad * a.cos(), y - rad * a.sin())
                })
                .collect();
            out.push_str(&format!("<polygon points=\"{}\" fill=\"black\"/>\n", pts.join(" ")));
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backlund::{chain_build, ChainParity};
    use crate::special::{weber_hermite, RiccatiBranch};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn hermite_two_poles_are_found() {
        // u = H_2 up to scale: u(0) = -2, u'(0) = 0 for γ = 2 (minus branch: α = 3)
        let sol = weber_hermite(c(2.0, 0.0), RiccatiBranch::Plus, [c(-2.0, 0.0), c(0.0, 0.0)]).unwrap();
        let cat = sweep(&FieldSource::Linear(sol), &Region::annulus(0.1, 3.0), &SweepStrategy::default()).unwrap();
        let expect = 1.0 / 2f64.sqrt();
        assert!(cat.warnings.is_empty(), "{:?}", cat.warnings);
        let found: Vec<C> = cat.pole_points();
        for target in [c(expect, 0.0), c(-expect, 0.0)] {
            assert!(found.iter().any(|p| (p - target).norm() < 1e-12), "{found:?}");
        }
    }

    #[test]
    fn minus_one_over_z_has_no_poles_in_an_annulus() {
        let sol = weber_hermite(c(1.0, 0.0), RiccatiBranch::Plus, [c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let cat = sweep(&FieldSource::Linear(sol), &Region::annulus(0.5, 6.0), &SweepStrategy::default()).unwrap();
        assert!(cat.poles.is_empty(), "{:?}", cat.poles);
    }

    #[test]
    fn recursion_sim_matches_lemma() {
        let rep = string_recursion_sim(c(2.0, 0.0), Frac::int(1), c(10.0, 0.0), 1_000_000);
        assert!((rep.value_ratio - 1.0).norm() < 1e-2);
        let rep = string_recursion_sim(c(0.0, PI), Frac::int(1), c(5.0, 0.0), 1_000_000);
        assert!((rep.value_ratio - 1.0).norm() < 1e-2);
        assert!((rep.count_ratio - 1.0).abs() < 0.02);
        assert!(rep.angle_defect.abs() < 0.05);
    }

    #[test]
    fn synthetic_string_is_recovered() {
        let omega = c(0.0, PI);
        let mut p = c(5.0, 0.0);
        let mut pts = vec![p];
        for _ in 0..400 {
            p += omega / p;
            pts.push(p);
        }
        let (w, theta, coeff, checks) = fit_string(&pts, EquationKind::PIV).unwrap();
        assert!((w - omega).norm() < 1e-3);
        assert!((theta - PI / 4.0).abs() < 0.05);
        assert!((coeff * 2.0 * PI - 1.0).abs() < 0.05);
        assert!((checks.value_ratio - 1.0).norm() < 1e-2);
        // τ=1, ω=π√3 counting coefficient 1/(2π√3)
        let omega = c(PI * 3f64.sqrt(), 0.0);
        let mut p = c(5.0, 0.0);
        let mut pts = vec![p];
        for _ in 0..400 {
            p += omega / p;
            pts.push(p);
        }
        let (_, _, coeff, _) = fit_string(&pts, EquationKind::PIV).unwrap();
        assert!((coeff * 2.0 * PI * 3f64.sqrt() - 1.0).abs() < 0.05);
    }

    #[test]
    fn counting_exponent_of_a_power_law() {
        let pts: Vec<C> = (1..5000).map(|k| C::from_polar((k as f64).sqrt(), k as f64)).collect();
        let grid: Vec<f64> = (1..=70).map(|i| i as f64).collect();
        let t = counting_function(&pts, &grid);
        assert!((t.exponent - 2.0).abs() < 0.05);
    }

    #[test]
    fn first_order_equation_on_exact_line() {
        let jets: Vec<Jet> = (0..10).map(|k| {
            let z = c(0.3 * k as f64, 0.2);
            Jet::new(z, -2.0 * z, c(-2.0, 0.0))
        }).collect();
        assert!(first_order_residual(&jets, c(0.0, 0.0)) < 1e-14);
    }

    #[test]
    fn contour_matches_count_on_a_small_field() {
        let sol = weber_hermite(c(0.5, 0.0), RiccatiBranch::Plus, [c(1.0, 0.0), c(0.3, 0.2)]).unwrap();
        let src = FieldSource::Linear(sol);
        let cat = sweep(&src, &Region::annulus(0.0, 7.0), &SweepStrategy::default()).unwrap();
        assert!(!cat.poles.is_empty());
        let count = residue_ledger(&cat, 6.0, None, LedgerMode::Count).unwrap();
        let cont = residue_ledger(&cat, 6.0, Some(&src), LedgerMode::Contour).unwrap();
        assert!((cont.integral_w - count.integral_w).norm() < 1e-6, "{cont:?} {count:?}");
        assert!((cont.integral_big_w - count.integral_big_w).norm() < 1e-6, "{cont:?} {count:?}");
    }

    #[test]
    fn chain_sources_evaluate_consistently() {
        let chain = chain_build(1, c(-3.0, 0.0), ChainParity::Even).unwrap();
        let base = weber_hermite(chain[0].gamma, RiccatiBranch::Plus, [c(1.0, 0.0), c(0.4, 0.2)]).unwrap();
        let sol = ChainedSolution { base, chain, rotated: true };
        let src = FieldSource::Chain(sol.clone());
        for z in [c(1.0, 2.0), c(2.5, -1.5)] {
            let a = src.jet_at(z).unwrap();
            let b = sol.eval(z);
            assert!(a.w.norm() > eqcore::zero_guard(z));
            assert!((a.w - b.w).norm() < 1e-9 * (1.0 + a.w.norm()));
            let res = backlund::scaled_iv_residual(&a, &backlund::ParameterState::of(&sol.eq()));
            assert!(res < 1e-9, "{res} {a:?} {:?}", sol.eq());
        }
        assert!((sol.eq().alpha - 3.0).norm() < 1e-14);
    }
}
