//! The subcommands.  Each returns the process exit code on success.

use std::fs;

use pnlv::backlund::{
    self, bii_half_to_zero, bii_transforms, chain_build, trivial_symmetries, BiiDirection, ChainParity,
    ChainedSolution, ParameterState, Symmetry,
};
use pnlv::checks::{run_check, CheckOutcome, Fixtures, CHECK_NAMES};
use pnlv::eqcore::{first_integral, rhs};
use pnlv::integrate::{integrate, IntegrateOptions, PathSpec, Trajectory};
use pnlv::localseries::{
    asymptotic_series, asymptotic_series_big_w, laurent_big_w, laurent_w, log_derivative_series, seed_jet,
    AsymptoticFamily, FamilyTag, PoleSeed, Residue, RootBranch, SectorPair, SeriesExpansion, SeriesVariable,
};
use pnlv::polefield::io::{catalog_from_json, catalog_json, catalog_svg, strings_json};
use pnlv::polefield::{cluster_strings, ray_fan, sweep, FieldSource, JetSource, PoleCatalog, Region, SweepStrategy};
use pnlv::rescale::{
    cluster_estimate, constant_limit_catalog, limit_constant, limit_ode_residual, period_catalog, rescale_window,
    ring_grid, square_grid, RescaleFrame,
};
use pnlv::special::{airy_solution, hastings_mcleod_shoot, rational_solutions, weber_hermite, RationalSolution, RiccatiBranch};
use pnlv::{EquationKind, EquationSpec, Frac, Jet, C};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::config::{
    c_list, fmt_c, kv_list, parse_bool, parse_c, parse_f64, parse_usize, split_kind, usage, CliError, RunConfig,
};
use crate::output::{csv_document, csv_header_value, emit, json_document, svg_document};

/// A solution that can be evaluated anywhere.
pub enum Pointwise {
    Field(FieldSource),
    Rational(RationalSolution),
}

impl Pointwise {
    pub fn source(&self) -> &dyn JetSource {
        match self {
            Pointwise::Field(f) => f,
            Pointwise::Rational(r) => r,
        }
    }
}

pub enum Seed {
    Pole(PoleSeed),
    Jet(Jet),
    Pointwise(Pointwise),
}

fn branch(s: Option<&String>) -> Result<RiccatiBranch, CliError> {
    match s.map(String::as_str) {
        None | Some("plus") | Some("+") => Ok(RiccatiBranch::Plus),
        Some("minus") | Some("-") => Ok(RiccatiBranch::Minus),
        Some(o) => Err(usage(format!("branch must be plus or minus, got {o}"))),
    }
}

fn key_c(m: &std::collections::BTreeMap<String, String>, k: &str, default: C) -> Result<C, CliError> {
    m.get(k).map_or(Ok(default), |v| parse_c(k, v))
}

/// `pole:p=..,eps=..,h=..`, `jet:z=..,w=..,w1=..`, `special:wh:..`,
/// `special:airy:..`, `special:rational:index=..` or `chain:k=..,alpha=..,parity=..`.
pub fn parse_seed(desc: &str, eq: &EquationSpec) -> Result<Seed, CliError> {
    let (kind, rest) = split_kind(desc);
    let one = C::new(1.0, 0.0);
    let zero = C::new(0.0, 0.0);
    match kind.as_str() {
        "pole" => {
            let m = kv_list(rest)?;
            let eps = m.get("eps").map_or(Ok(1.0), |v| parse_f64("eps", v))?;
            Ok(Seed::Pole(PoleSeed::new(*eq, key_c(&m, "p", zero)?, Residue::from_sign(eps), key_c(&m, "h", zero)?)))
        }
        "jet" => {
            let m = kv_list(rest)?;
            let jet = Jet::new(key_c(&m, "z", zero)?, key_c(&m, "w", zero)?, key_c(&m, "w1", zero)?);
            // The fourth equation is integrated in third-order form and needs w''.
            let jet = match rhs(eq, &jet) {
                Ok(w2) => Jet::with_w2(jet.z, jet.w, jet.w1, w2),
                Err(_) => jet,
            };
            Ok(Seed::Jet(jet))
        }
        "special" => {
            let (which, rest) = split_kind(rest);
            let m = kv_list(rest)?;
            let init = [key_c(&m, "u0", one)?, key_c(&m, "u1", zero)?];
            let lin = match which.as_str() {
                "wh" | "weber-hermite" => weber_hermite(key_c(&m, "gamma", eq.gamma)?, branch(m.get("branch"))?, init),
                "airy" => airy_solution(branch(m.get("branch"))?, init),
                "rational" => {
                    let idx = m.get("index").map_or(Ok(0), |v| parse_usize("index", v))?;
                    let all = rational_solutions(eq).map_err(CliError::run)?;
                    let n = all.len();
                    let sol = all.into_iter().nth(idx).ok_or_else(|| usage(format!("index {idx} of {n} rational solutions")))?;
                    return Ok(Seed::Pointwise(Pointwise::Rational(sol)));
                }
                o => return Err(usage(format!("special seed must be wh, airy or rational, got {o}"))),
            }
            .map_err(CliError::run)?;
            Ok(Seed::Pointwise(Pointwise::Field(FieldSource::Linear(lin))))
        }
        "chain" => {
            let m = kv_list(rest)?;
            let k = m.get("k").map_or(Ok(1), |v| parse_usize("k", v))?;
            let parity = match m.get("parity").map(String::as_str) {
                None | Some("even") => ChainParity::Even,
                Some("odd") => ChainParity::Odd,
                Some(o) => return Err(usage(format!("parity must be even or odd, got {o}"))),
            };
            let rotated = m.get("rotated").map_or(Ok(false), |v| parse_bool("rotated", v))?;
            // A rotated chain ends at -alpha; ask the builder for the unrotated value.
            let target = key_c(&m, "alpha", eq.alpha)?;
            let chain = chain_build(k, if rotated { -target } else { target }, parity).map_err(CliError::run)?;
            let init = [key_c(&m, "u0", one)?, key_c(&m, "u1", zero)?];
            let base = weber_hermite(chain[0].gamma, branch(m.get("branch"))?, init).map_err(CliError::run)?;
            Ok(Seed::Pointwise(Pointwise::Field(FieldSource::Chain(ChainedSolution { base, chain, rotated }))))
        }
        o => Err(usage(format!("seed kind must be pole, jet, special or chain, got {o}"))),
    }
}

/// The equation the seed actually solves.
fn seed_equation(seed: &Seed, eq: &EquationSpec) -> EquationSpec {
    match seed {
        Seed::Pointwise(p) => p.source().equation(),
        _ => *eq,
    }
}

/// Starting jet at `z`.
fn start_jet(seed: &Seed, z: C) -> Result<Jet, CliError> {
    match seed {
        Seed::Pole(s) => seed_jet(s, z - s.p).map_err(CliError::run),
        Seed::Jet(j) => {
            if (j.z - z).norm() > 1e-12 * (1.0 + z.norm()) {
                return Err(usage(format!("path starts at {} but the jet is given at {}", fmt_c(z), fmt_c(j.z))));
            }
            Ok(*j)
        }
        Seed::Pointwise(p) => p.source().jet_at(z).ok_or_else(|| CliError::Run(format!("cannot evaluate at {z}"))),
    }
}

pub fn parse_path(desc: &str) -> Result<PathSpec, CliError> {
    let (kind, rest) = split_kind(desc);
    let v = c_list("path", rest)?;
    let re = |k: usize| v.get(k).map(|z| z.re);
    let path = match kind.as_str() {
        "segment" if v.len() == 2 => PathSpec::Segment { z0: v[0], z1: v[1] },
        "ray" if v.len() == 3 => PathSpec::Ray { origin: v[0], theta: v[1].re, r_max: v[2].re },
        "polyline" if v.len() >= 2 => PathSpec::Polyline { points: v },
        "circle" if (2..=4).contains(&v.len()) => PathSpec::Circle {
            center: v[0],
            radius: v[1].re,
            turns: re(2).unwrap_or(1.0),
            start_angle: re(3).unwrap_or(0.0),
        },
        _ => return Err(usage(format!("bad path '{desc}'"))),
    };
    path.validate().map_err(|e| usage(e.to_string()))?;
    Ok(path)
}

pub fn parse_region(desc: &str) -> Result<Region, CliError> {
    let (kind, rest) = split_kind(desc);
    let v: Vec<f64> = rest.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_f64("region", s)).collect::<Result<_, _>>()?;
    match (kind.as_str(), v.len()) {
        ("annulus", 2) => Ok(Region::annulus(v[0], v[1])),
        ("annulus" | "sector", 4) => Ok(Region { r_min: v[0], r_max: v[1], theta_min: v[2], theta_max: v[3] }),
        _ => Err(usage(format!("bad region '{desc}' (annulus:rMin,rMax[,thetaMin,thetaMax])"))),
    }
}

fn cjson(z: C) -> Value {
    json!({"re": z.re, "im": z.im})
}

fn jet_json(j: &Jet) -> Value {
    let mut v = json!({"z": cjson(j.z), "w": cjson(j.w), "w1": cjson(j.w1)});
    if let Some(w2) = j.w2 {
        v["w2"] = cjson(w2);
    }
    v
}

fn options(cfg: &RunConfig) -> IntegrateOptions {
    IntegrateOptions { tol: cfg.tol, max_steps: cfg.max_steps, max_step: 0.0 }
}

fn need<'a>(v: &'a Option<String>, what: &str) -> Result<&'a str, CliError> {
    v.as_deref().ok_or_else(|| usage(format!("--{what} is required")))
}

const CSV_HEAD: &str = "pathParam,zRe,zIm,wRe,wIm,w1Re,w1Im";

fn csv_row(out: &mut String, s: f64, j: &Jet, with_w2: bool, flags: u8) {
    out.push_str(&format!("{s},{},{},{},{},{},{}", j.z.re, j.z.im, j.w.re, j.w.im, j.w1.re, j.w1.im));
    if with_w2 {
        let w2 = j.w2.unwrap_or(C::new(f64::NAN, f64::NAN));
        out.push_str(&format!(",{},{}", w2.re, w2.im));
    }
    out.push_str(&format!(",{flags}\n"));
}

fn trajectory_csv(traj: &Trajectory) -> String {
    let with_w2 = traj.eq.kind == EquationKind::PIV;
    let mut body = String::from(CSV_HEAD);
    body.push_str(if with_w2 { ",w2Re,w2Im,flags\n" } else { ",flags\n" });
    for s in &traj.samples {
        csv_row(&mut body, s.s, &s.jet, with_w2, s.flags);
    }
    body
}

pub fn integrate_cmd(cfg: &RunConfig) -> Result<i32, CliError> {
    let eq = cfg.equation()?;
    let seed = parse_seed(need(&cfg.seed, "seed")?, &eq)?;
    let path = parse_path(need(&cfg.path, "path")?)?;
    let eq = seed_equation(&seed, &eq);
    let start = start_jet(&seed, path.start())?;
    let traj = integrate(&eq, &start, &path, &options(cfg)).map_err(CliError::run)?;
    let extra = [
        ("equation", serde_json::to_string(&eq)?),
        ("diagnostics", serde_json::to_string(&traj.diagnostics)?),
    ];
    emit(cfg.out.as_deref(), &csv_document(cfg, &extra, &trajectory_csv(&traj))?)?;
    if let Some(path) = cfg.opt("events") {
        let events: Vec<Value> = traj
            .pole_events
            .iter()
            .map(|e| json!({"p": cjson(e.seed.p), "eps": e.seed.eps.value(), "h": cjson(e.seed.h), "pathParam": e.s}))
            .collect();
        emit(Some(path), &json_document(cfg, json!({"poleEvents": events}))?)?;
    }
    eprintln!("{} samples, {} pole hops", traj.samples.len(), traj.pole_events.len());
    Ok(0)
}

pub fn polefield_cmd(cfg: &RunConfig) -> Result<i32, CliError> {
    let eq = cfg.equation()?;
    let seed = parse_seed(need(&cfg.seed, "seed")?, &eq)?;
    let eq = seed_equation(&seed, &eq);
    let region = parse_region(cfg.region.as_deref().unwrap_or("annulus:0,10"))?;
    let cat = match &seed {
        Seed::Pointwise(Pointwise::Field(src)) => {
            let mut strategy = SweepStrategy::default();
            if let Some(s) = cfg.opt("spacing") {
                strategy.spacing = parse_f64("spacing", s)?;
            }
            if let Some(s) = cfg.opt("detectLevel") {
                strategy.detect_level = parse_f64("detectLevel", s)?;
            }
            sweep(src, &region, &strategy).map_err(CliError::run)?
        }
        other => {
            let rays = cfg.opt("rays").map_or(Ok(64), |s| parse_usize("rays", s))?;
            let start = match other {
                Seed::Pole(s) => seed_jet(s, C::new(0.5 * s.validity_radius(), 0.0)).map_err(CliError::run)?,
                Seed::Jet(j) => *j,
                Seed::Pointwise(p) => start_jet(&Seed::Pointwise(match p {
                    Pointwise::Rational(r) => Pointwise::Rational(r.clone()),
                    Pointwise::Field(_) => unreachable!(),
                }), C::new(0.5, 0.25))?,
            };
            let phase = StdRng::seed_from_u64(cfg.random_seed).gen::<f64>();
            ray_fan(&eq, &start, &region, rays, phase, &options(cfg)).map_err(CliError::run)?
        }
    };
    emit(cfg.out.as_deref(), &json_document(cfg, catalog_json(&cat))?)?;
    if let Some(path) = cfg.opt("svg") {
        emit(Some(path), &svg_document(cfg, &catalog_svg(&cat))?)?;
    }
    eprintln!("{} poles, {} zeros, {} warnings", cat.poles.len(), cat.zeros.len(), cat.warnings.len());
    Ok(0)
}

fn read_catalog(path: &str) -> Result<PoleCatalog, CliError> {
    let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    catalog_from_json(&v).ok_or_else(|| usage(format!("{path} is not a pole catalogue")))
}

pub fn strings_cmd(cfg: &RunConfig) -> Result<i32, CliError> {
    let input = cfg.opt("in").ok_or_else(|| usage("--in is required"))?;
    let mut cat = read_catalog(input)?;
    let rep = cluster_strings(&mut cat);
    let mut payload = strings_json(&rep);
    payload["stringIds"] = json!(cat.poles.iter().map(|p| p.string_id).collect::<Vec<_>>());
    emit(cfg.out.as_deref(), &json_document(cfg, payload)?)?;
    eprintln!("{:>4} {:>6} {:>8} {:>9} {:>9} {:>8} {:>8}", "id", "size", "theta", "|omega|", "valueErr", "angle", "count");
    for (i, s) in rep.strings.iter().enumerate() {
        eprintln!(
            "{:>4} {:>6} {:>8.4} {:>9.4} {:>9.2e} {:>8.2e} {:>8.4}",
            i,
            s.members.len(),
            s.theta,
            s.omega.norm(),
            (s.checks.value_ratio - 1.0).norm(),
            s.checks.angle_defect.abs(),
            s.checks.count_ratio
        );
    }
    eprintln!("{} strings, {} unchained poles", rep.strings.len(), rep.unchained.len());
    Ok(0)
}

struct CsvJets {
    rows: Vec<(f64, Jet, u8)>,
}

fn read_trajectory_csv(text: &str) -> Result<CsvJets, CliError> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let head: Vec<&str> = lines.next().ok_or_else(|| usage("empty trajectory CSV"))?.split(',').collect();
    let col = |name: &str| head.iter().position(|h| h.trim() == name);
    let need = |name: &str| col(name).ok_or_else(|| usage(format!("trajectory CSV lacks column {name}")));
    let (is, izr, izi, iwr, iwi, i1r, i1i) =
        (need("pathParam")?, need("zRe")?, need("zIm")?, need("wRe")?, need("wIm")?, need("w1Re")?, need("w1Im")?);
    let (i2r, i2i, ifl) = (col("w2Re"), col("w2Im"), col("flags"));
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> Result<f64, CliError> {
            f.get(i).ok_or_else(|| usage(format!("row {} is short", n + 1))).and_then(|s| parse_f64("csv", s))
        };
        let mut jet = Jet::new(C::new(num(izr)?, num(izi)?), C::new(num(iwr)?, num(iwi)?), C::new(num(i1r)?, num(i1i)?));
        if let (Some(a), Some(b)) = (i2r, i2i) {
            let w2 = C::new(num(a)?, num(b)?);
            if w2.is_finite() {
                jet.w2 = Some(w2);
            }
        }
        let flags = ifl.map_or(Ok(0), |i| f.get(i).map_or(Ok(0), |s| parse_usize("flags", s)))? as u8;
        rows.push((num(is)?, jet, flags));
    }
    Ok(CsvJets { rows })
}

pub fn backlund_cmd(cfg: &RunConfig) -> Result<i32, CliError> {
    let input = cfg.opt("in").ok_or_else(|| usage("--in is required"))?;
    let text = fs::read_to_string(input)?;
    let eq = if cfg.equation_given() {
        cfg.equation()?
    } else if let Some(e) = csv_header_value(&text, "equation") {
        serde_json::from_str(e)?
    } else {
        return Err(usage("the trajectory has no equation header; pass --eq"));
    };
    let transform = cfg.opt("transform").unwrap_or("forward");
    let steps = cfg.opt("steps").map_or(Ok(1), |s| parse_usize("steps", s))?;
    let traj = read_trajectory_csv(&text)?;

    let mut jets: Vec<Option<Jet>> = traj.rows.iter().map(|r| Some(r.1)).collect();
    let mut eq_now = eq;
    let mut history: Vec<Value> = vec![json!({"alpha": cjson(eq.alpha), "gamma": cjson(eq.gamma)})];
    for _ in 0..steps {
        let (next_eq, mapped): (EquationSpec, Vec<Option<Jet>>) = match transform {
            "forward" | "inverse" => {
                if eq_now.kind != EquationKind::PIV {
                    return Err(usage("forward and inverse steps act on the fourth equation"));
                }
                let ps = ParameterState::of(&eq_now);
                let step = |j: &Jet| {
                    if transform == "forward" {
                        backlund::biv_forward(j, &ps)
                    } else {
                        backlund::biv_inverse(j, &ps)
                    }
                };
                let next = if transform == "forward" { ps.forward() } else { ps.inverse() };
                (next.spec(), jets.iter().map(|j| j.and_then(|j| step(&j).ok().map(|r| r.0))).collect())
            }
            "bplus" | "bminus" => {
                if eq_now.kind != EquationKind::PII {
                    return Err(usage("B+ and B- act on the second equation"));
                }
                let dir = if transform == "bplus" { BiiDirection::Plus } else { BiiDirection::Minus };
                let shift = if transform == "bplus" { 1.0 } else { -1.0 };
                let out = jets.iter().map(|j| j.and_then(|j| bii_transforms(&j, eq_now.alpha, dir).ok().map(|r| r.0))).collect();
                (EquationSpec::second(eq_now.alpha + shift), out)
            }
            "half" => {
                if eq_now.kind != EquationKind::PII || (eq_now.alpha - 0.5).norm() > 1e-12 {
                    return Err(usage("the half-to-zero map needs the second equation with alpha = 1/2"));
                }
                let out = jets.iter().map(|j| j.and_then(|j| bii_half_to_zero(&j).ok())).collect();
                (EquationSpec::second(C::new(0.0, 0.0)), out)
            }
            "rotate" | "conjugate" => {
                let which = if transform == "rotate" { Symmetry::Rotate } else { Symmetry::Conjugate };
                let mut next = eq_now;
                let out = jets
                    .iter()
                    .map(|j| {
                        j.map(|j| {
                            let (img, e) = trivial_symmetries(&j, &eq_now, which);
                            next = e;
                            img
                        })
                    })
                    .collect();
                if jets.iter().all(Option::is_none) {
                    next = trivial_symmetries(&Jet::new(C::new(1.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0)), &eq_now, which).1;
                }
                (next, out)
            }
            o => return Err(usage(format!("unknown transform {o}"))),
        };
        eq_now = next_eq;
        jets = mapped;
        history.push(json!({"transform": transform, "alpha": cjson(eq_now.alpha), "gamma": cjson(eq_now.gamma)}));
    }
    let with_w2 = eq_now.kind == EquationKind::PIV;
    let mut body = String::from(CSV_HEAD);
    body.push_str(if with_w2 { ",w2Re,w2Im,flags\n" } else { ",flags\n" });
    let nan = C::new(f64::NAN, f64::NAN);
    let mut failed = 0;
    for ((s, orig, flags), j) in traj.rows.iter().zip(&jets) {
        let j = j.unwrap_or_else(|| {
            failed += 1;
            Jet::new(orig.z, nan, nan)
        });
        csv_row(&mut body, *s, &j, with_w2, *flags);
    }
    let extra = [("equation", serde_json::to_string(&eq_now)?)];
    emit(cfg.out.as_deref(), &csv_document(cfg, &extra, &body)?)?;
    if let Some(path) = cfg.opt("history") {
        emit(Some(path), &json_document(cfg, json!({"history": history, "equation": serde_json::to_value(eq_now)?}))?)?;
    }
    eprintln!("{} rows transformed, {failed} undefined", traj.rows.len() - failed);
    Ok(0)
}

fn frac_json(f: Frac) -> Value {
    json!({"num": f.num, "den": f.den})
}

fn series_json(s: &SeriesExpansion, origin: Value) -> Value {
    let mut v = json!({
        "label": s.label,
        "exponentStep": frac_json(s.exponent_step),
        "leadingExponent": frac_json(s.leading_exponent),
        "coeffs": s.coeffs.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
        "truncationOrder": s.truncation_order,
    });
    let key = match s.variable {
        SeriesVariable::AroundPole { .. } => "seed",
        SeriesVariable::AtInfinity => "family",
    };
    v[key] = origin;
    v
}

fn family(name: &str, b: Option<&str>) -> Result<AsymptoticFamily, CliError> {
    let tag = match name.to_lowercase().as_str() {
        "i" => FamilyTag::I,
        "iia" => FamilyTag::IIa,
        "iib" => FamilyTag::IIb,
        "iva" => FamilyTag::IVa,
        "ivb" => FamilyTag::IVb,
        "ivc+" | "ivcplus" => FamilyTag::IVcPlus,
        "ivc-" | "ivcminus" => FamilyTag::IVcMinus,
        o => return Err(usage(format!("unknown family {o}"))),
    };
    let br = match b {
        None | Some("plus") => RootBranch::Plus,
        Some("minus") => RootBranch::Minus,
        Some(o) => return Err(usage(format!("branch must be plus or minus, got {o}"))),
    };
    Ok(AsymptoticFamily::with_branch(tag, br))
}

pub fn series_cmd(cfg: &RunConfig) -> Result<i32, CliError> {
    let eq = cfg.equation()?;
    let kind = cfg.opt("kind").unwrap_or("laurent");
    let n = cfg.opt("order").map_or(Ok(12), |s| parse_usize("order", s))?;
    let pole = || -> Result<PoleSeed, CliError> {
        match parse_seed(need(&cfg.seed, "seed")?, &eq)? {
            Seed::Pole(s) => Ok(s),
            _ => Err(usage("Laurent series need a pole: seed")),
        }
    };
    let seed_origin = |s: &PoleSeed| json!({"p": cjson(s.p), "eps": s.eps.value(), "h": cjson(s.h)});
    let fam = || family(cfg.opt("family").unwrap_or("iva"), cfg.opt("branch"));
    let payload = match kind {
        "laurent" => {
            let s = pole()?;
            series_json(&laurent_w(&s, n), seed_origin(&s))
        }
        "laurent-big-w" => {
            let s = pole()?;
            series_json(&laurent_big_w(&s, n), seed_origin(&s))
        }
        "asymptotic" => {
            let f = fam()?;
            series_json(&asymptotic_series(&f, &eq, n).map_err(CliError::run)?, json!(format!("{:?}", f)))
        }
        "asymptotic-big-w" => {
            let f = fam()?;
            series_json(&asymptotic_series_big_w(&f, &eq, n).map_err(CliError::run)?, json!(format!("{:?}", f)))
        }
        "log-derivative" => {
            let pair = match cfg.opt("pair").unwrap_or("even") {
                "even" => SectorPair::Even,
                "odd" => SectorPair::Odd,
                o => return Err(usage(format!("pair must be even or odd, got {o}"))),
            };
            series_json(&log_derivative_series(&eq, pair, n).map_err(CliError::run)?, json!(format!("{pair:?}")))
        }
        o => return Err(usage(format!("unknown series kind {o}"))),
    };
    emit(cfg.out.as_deref(), &json_document(cfg, payload)?)?;
    Ok(0)
}

fn parse_grid(desc: &str) -> Result<Vec<C>, CliError> {
    let (kind, rest) = split_kind(desc);
    let v: Vec<f64> = rest.split(',').map(|s| parse_f64("grid", s)).collect::<Result<_, _>>()?;
    match (kind.as_str(), v.len()) {
        ("square", 2) => Ok(square_grid(v[0], v[1] as usize)),
        ("ring", 4) => Ok(ring_grid(v[0], v[1], v[2] as usize, v[3] as usize)),
        _ => Err(usage(format!("bad grid '{desc}' (square:half,n or ring:rIn,rOut,nR,nTheta)"))),
    }
}

pub fn rescale_cmd(cfg: &RunConfig) -> Result<i32, CliError> {
    let eq = cfg.equation()?;
    let seed = parse_seed(need(&cfg.seed, "seed")?, &eq)?;
    let Seed::Pointwise(sol) = seed else {
        return Err(usage("rescale needs a special: or chain: seed"));
    };
    let src = sol.source();
    let kind = src.equation().kind;
    let catalog: Vec<Value> = constant_limit_catalog(kind).iter().map(|(w, c)| json!({"w": cjson(*w), "c": cjson(*c)})).collect();
    let periods: Vec<Value> = period_catalog(kind).iter().map(|(c, w)| json!({"c": cjson(*c), "omega": cjson(*w)})).collect();
    let mut payload = json!({"constants": catalog, "periods": periods});
    if let Some(h) = cfg.opt("center") {
        let h = parse_c("center", h)?;
        let frame = RescaleFrame::new(kind, h, parse_grid(cfg.opt("grid").unwrap_or("square:1,9"))?);
        let samples = rescale_window(src, &frame).map_err(CliError::run)?;
        let jet = src.jet_at(h).ok_or_else(|| CliError::Run(format!("cannot evaluate at {h}")))?;
        let big_w = first_integral(&src.equation(), &jet).map_err(CliError::run)?.value;
        let c = limit_constant(kind, h, big_w);
        payload["window"] = json!({
            "center": cjson(h),
            "a": frac_json(frame.a),
            "b": frac_json(frame.b),
            "c": cjson(c),
            "samples": samples.len(),
            "residual": limit_ode_residual(kind, &samples, c),
        });
    }
    if let Some(theta) = cfg.opt("ray") {
        let theta = parse_f64("ray", theta)?;
        let range: Vec<f64> =
            cfg.opt("rRange").unwrap_or("10,30").split(',').map(|s| parse_f64("rRange", s)).collect::<Result<_, _>>()?;
        let [lo, hi] = range[..] else { return Err(usage("rRange is lo,hi")) };
        let Pointwise::Field(field) = &sol else {
            return Err(usage("cluster estimates need a special:wh, special:airy or chain: seed"));
        };
        let cat = sweep(field, &Region::annulus(0.0, hi + 1.0), &SweepStrategy::default()).map_err(CliError::run)?;
        let floor = cfg.opt("deltaFloor").map_or(Ok(0.5), |s| parse_f64("deltaFloor", s))?;
        let pts: Vec<C> = (0..400).map(|k| C::from_polar(lo + (hi - lo) * k as f64 / 399.0, theta)).collect();
        let est = cluster_estimate(src, &pts, floor, &cat).map_err(CliError::run)?;
        payload["cluster"] = json!({
            "d": frac_json(est.d),
            "bin": est.bin,
            "histogram": est.histogram,
            "samples": est.samples.len(),
            "fractionNearZero": est.fraction_within(C::new(0.0, 0.0), 0.05),
        });
    }
    emit(cfg.out.as_deref(), &json_document(cfg, payload)?)?;
    Ok(0)
}

pub fn special_cmd(cfg: &RunConfig) -> Result<i32, CliError> {
    let eq = cfg.equation()?;
    let which = cfg.opt("which").map(str::to_string).unwrap_or_else(|| match cfg.seed.as_deref() {
        Some(s) if s.starts_with("special:") => split_kind(split_kind(s).1).0,
        _ => "rational".to_string(),
    });
    let at = c_list("at", cfg.opt("at").unwrap_or("0.5+0.5i"))?;
    let payload = match which.as_str() {
        "hastings-mcleod" => {
            let tol = cfg.opt("tolerance").map_or(Ok(1e-8), |s| parse_f64("tolerance", s))?;
            let b = hastings_mcleod_shoot(tol).map_err(CliError::run)?;
            json!({"below": jet_json(&b.below), "above": jet_json(&b.above), "kBelow": b.k_below, "kAbove": b.k_above})
        }
        "rational" => {
            let sols = rational_solutions(&eq).map_err(CliError::run)?;
            let list: Vec<Value> = sols
                .iter()
                .map(|s| {
                    let poly = |p: &pnlv::special::RationalPoly| p.0.iter().map(|q| q.to_string()).collect::<Vec<_>>();
                    json!({
                        "alpha": s.alpha.to_string(),
                        "beta": s.beta.to_string(),
                        "numerator": poly(&s.num),
                        "denominator": poly(&s.den),
                        "exactResidualZero": s.exact_residual().is_zero(),
                        "jets": at.iter().map(|z| jet_json(&s.jet(*z))).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({"solutions": list})
        }
        "wh" | "airy" => {
            let desc = cfg.seed.clone().unwrap_or_else(|| format!("special:{which}"));
            let Seed::Pointwise(p) = parse_seed(&desc, &eq)? else { return Err(usage("expected a special: seed")) };
            let src = p.source();
            let jets: Vec<Value> = at
                .iter()
                .map(|z| {
                    let j = src.jet_at(*z);
                    json!({"jet": j.as_ref().map(jet_json), "residual": j.and_then(|j| pnlv::eqcore::scaled_residual(&src.equation(), &j).ok())})
                })
                .collect();
            json!({"equation": serde_json::to_value(src.equation())?, "jets": jets})
        }
        o => return Err(usage(format!("special --which must be wh, airy, rational or hastings-mcleod, got {o}"))),
    };
    emit(cfg.out.as_deref(), &json_document(cfg, payload)?)?;
    Ok(0)
}

/// Suite names accepted by `verify --suite`, in check order.
pub const SUITES: [&str; 12] = [
    "laurent",
    "asymptotic",
    "exact",
    "backlund",
    "passage",
    "string-sim",
    "strings",
    "counting",
    "rescale",
    "ledger",
    "first-order",
    "deficiency",
];

pub fn suite_id(name: &str) -> Result<usize, CliError> {
    if let Ok(n) = name.parse::<usize>() {
        if (1..=12).contains(&n) {
            return Ok(n);
        }
    }
    SUITES
        .iter()
        .position(|s| *s == name)
        .map(|i| i + 1)
        .ok_or_else(|| usage(format!("unknown suite {name}; known: {}", SUITES.join(", "))))
}

pub fn verify_cmd(cfg: &RunConfig) -> Result<i32, CliError> {
    let all = cfg.opt("all").map_or(Ok(false), |s| parse_bool("all", s))?;
    let ids: Vec<usize> = if all {
        (1..=12).collect()
    } else {
        let list = cfg.opt("suite").ok_or_else(|| usage("verify needs --suite NAME or --all"))?;
        list.split(',').map(|s| suite_id(s.trim())).collect::<Result<_, _>>()?
    };
    let fx = Fixtures::default();
    let mut results: Vec<CheckOutcome> = Vec::new();
    println!("{:>3}  {:<12} {:<26} {:<6} {:>8}  detail", "id", "suite", "criterion", "result", "seconds");
    for id in ids {
        let r = run_check(id, &fx);
        println!(
            "{:>3}  {:<12} {:<26} {:<6} {:>8.2}  {}",
            r.id,
            SUITES[id - 1],
            CHECK_NAMES[id - 1],
            if r.passed { "PASS" } else { "FAIL" },
            r.seconds,
            r.detail
        );
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if let Some(path) = cfg.out.as_deref() {
        // Timings vary between runs and stay out of the hashed report.
        let rows: Vec<Value> =
            results.iter().map(|r| json!({"id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail})).collect();
        emit(Some(path), &json_document(cfg, json!({"checks": rows, "failed": failed}))?)?;
    }
    Ok(if failed == 0 { 0 } else { 2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_and_regions_parse() {
        assert!(matches!(parse_path("segment:1,5").unwrap(), PathSpec::Segment { .. }));
        assert!(matches!(parse_path("circle:1,0.1").unwrap(), PathSpec::Circle { turns, .. } if turns == 1.0));
        assert!(parse_path("segment:1").is_err());
        let r = parse_region("annulus:5,30").unwrap();
        assert_eq!((r.r_min, r.r_max), (5.0, 30.0));
        assert!(parse_region("disc:3").is_err());
        assert!((parse_region("sector:0,3,0,1").unwrap().theta_max - 1.0).abs() < 1e-15);
    }

    #[test]
    fn seeds_parse() {
        let eq = EquationSpec::fourth(C::new(0.0, 0.0), C::new(-2.0, 0.0), pnlv::GammaBranch::Plus);
        assert!(matches!(parse_seed("jet:z=1,w=-2,w1=-2", &eq).unwrap(), Seed::Jet(j) if j.w2.is_some()));
        assert!(matches!(parse_seed("pole:p=1+1i,eps=-1,h=0.5", &eq).unwrap(), Seed::Pole(s) if s.eps == Residue::Minus));
        assert!(matches!(parse_seed("special:wh:gamma=0.5", &eq).unwrap(), Seed::Pointwise(_)));
        assert!(matches!(parse_seed("special:rational", &eq).unwrap(), Seed::Pointwise(Pointwise::Rational(_))));
        let Seed::Pointwise(p) = parse_seed("chain:k=1,alpha=3,parity=even,rotated=true", &eq).unwrap() else { panic!() };
        let e = p.source().equation();
        assert!((e.alpha - 3.0).norm() < 1e-12 && e.beta.norm() < 1e-12);
        assert!(parse_seed("nope:1", &eq).is_err());
    }

    #[test]
    fn suite_names_resolve() {
        assert_eq!(suite_id("laurent").unwrap(), 1);
        assert_eq!(suite_id("12").unwrap(), 12);
        assert!(suite_id("13").is_err());
    }
}
