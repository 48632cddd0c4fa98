
use pnlv::backlund::SigSymbol;
use pnlv::checks::{hermite_source, FIELD_RADIUS};
use pnlv::integrate::{integrate, IntegrateOptions, PathSpec};
use pnlv::localseries::{PoleSeed, Residue};
use pnlv::polefield::io::{catalog_from_json, catalog_json, catalog_svg, strings_json};
use pnlv::polefield::*;
use pnlv::rescale::pole_cluster_value;
use pnlv::special::{rational_solutions, weber_hermite, RiccatiBranch};
use pnlv::{EquationSpec, GammaBranch, Jet, C};

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn small_field(spacing: f64) -> PoleCatalog {
    let strategy = SweepStrategy { spacing, ..SweepStrategy::default() };
    sweep(&hermite_source(), &Region::annulus(0.0, 10.0), &strategy).unwrap()
}

#[test]
fn halving_the_sample_spacing_finds_the_same_poles() {
    let coarse = small_field(SWEEP_SPACING);
    let fine = small_field(SWEEP_SPACING / 2.0);
    assert!(coarse.poles.len() > 20);
    assert_eq!(coarse.poles.len(), fine.poles.len());
    for (a, b) in coarse.poles.iter().zip(&fine.poles) {
        assert!((a.p() - b.p()).norm() < 1e-10, "{} vs {}", a.p(), b.p());
        assert_eq!(a.seed.eps, b.seed.eps);
    }
    assert_eq!(coarse.zeros.len(), fine.zeros.len());
}

#[test]
fn catalogue_json_is_deterministic_and_round_trips() {
    let a = serde_json::to_string(&catalog_json(&small_field(SWEEP_SPACING))).unwrap();
    let b = serde_json::to_string(&catalog_json(&small_field(SWEEP_SPACING))).unwrap();
    assert_eq!(a, b);
    let back = catalog_from_json(&serde_json::from_str(&a).unwrap()).unwrap();
    assert_eq!(serde_json::to_string(&catalog_json(&back)).unwrap(), a);
    let svg = catalog_svg(&back);
    assert!(svg.starts_with("<svg") && svg.contains("circle"));
}

#[test]
fn strings_json_carries_the_fitted_law() {
    let mut cat = small_field(SWEEP_SPACING);
    let rep = cluster_strings(&mut cat);
    let v = strings_json(&rep);
    let arr = v["strings"].as_array().expect("array of strings");
    assert_eq!(arr.len(), rep.strings.len());
    for s in arr {
        assert_eq!(s["tau"]["num"], 1);
        assert!(s["omega"]["re"].is_f64());
    }
}

#[test]
fn cluster_value_of_a_fourth_equation_pole() {
    let eq = EquationSpec::fourth(c(0.7, -0.2), c(-1.3, 0.4), GammaBranch::Plus);
    for (p, eps) in [(c(3.0, 4.0), Residue::Plus), (c(-5.0, 1.0), Residue::Minus)] {
        let h = c(0.3, -1.1);
        let seed = PoleSeed::new(eq, p, eps, h);
        let want = (2.0 * h + 2.0 * (eq.alpha - eps.value()) * p) / (p * p * p);
        assert!((pole_cluster_value(&seed) - want).norm() < 1e-12 * want.norm().max(1.0));
    }
}

#[test]
fn trajectory_poles_agree_with_the_sweep() {
    let src = hermite_source();
    let FieldSource::Linear(lin) = &src else { unreachable!() };
    let cat = sweep(&src, &Region::annulus(0.0, 8.0), &SweepStrategy::default()).unwrap();
    // Aim straight through a few catalogued poles so the integrator must hop.
    let target = cat.poles.iter().find(|p| (4.0..6.0).contains(&p.p().norm())).unwrap().p();
    let z0 = c(0.5, 0.1);
    let start = lin.eval(z0);
    let path = PathSpec::Segment { z0, z1: z0 + (target - z0) * 1.6 };
    let traj = integrate(&lin.eq, &start, &path, &IntegrateOptions::default()).unwrap();
    let found = catalog_from_trajectory(&traj);
    assert!(!found.poles.is_empty());
    for p in &found.poles {
        let d = cat.poles.iter().map(|q| (q.p() - p.p()).norm()).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-7, "pole {} is {d} from the sweep", p.p());
    }
}

#[test]
fn rational_line_integrates_exactly() {
    let eq = EquationSpec::fourth(c(0.0, 0.0), c(-2.0, 0.0), GammaBranch::Plus);
    let sol = rational_solutions(&eq).unwrap().into_iter().find(|s| s.num.0.len() == 2).unwrap();
    let start = sol.jet(c(1.0, 0.0));
    let path = PathSpec::Segment { z0: c(1.0, 0.0), z1: c(5.0, 0.0) };
    let opts = IntegrateOptions { tol: 1e-12, ..IntegrateOptions::default() };
    let traj = integrate(&eq, &start, &path, &opts).unwrap();
    // Nearby solutions separate like exp(z²), so rounding errors grow along the path.
    for s in &traj.samples {
        let grow = (s.jet.z.re * s.jet.z.re).exp();
        assert!((s.jet.w + 2.0 * s.jet.z).norm() < 1e-13 * grow * s.jet.z.norm());
    }
}

#[test]
fn order_zero_without_gamma_has_no_zeros() {
    let lin = weber_hermite(c(0.0, 0.0), RiccatiBranch::Plus, [c(1.0, 0.0), c(0.3, 0.2)]).unwrap();
    let cat = sweep(&FieldSource::Linear(lin), &Region::annulus(0.0, 12.0), &SweepStrategy::default()).unwrap();
    assert!(cat.poles.len() > 10);
    assert!(cat.zeros.is_empty());
}

#[test]
fn hermite_zeros_split_by_slope_and_are_auxiliary_poles() {
    let src = hermite_source();
    let cat = sweep(&src, &Region::annulus(0.0, 8.0), &SweepStrategy::default()).unwrap();
    let rep = zero_catalog_and_deficiency(&cat, &[8.0], Some(&src));
    assert!(!cat.zeros.is_empty());
    assert_eq!(rep.plus_family + rep.minus_family, cat.zeros.len());
    assert_eq!(rep.auxiliary_confirmed, cat.zeros.len());
}

#[test]
fn hermite_signature_follows_the_even_pattern() {
    let src = hermite_source();
    let cat = sweep(&src, &Region::annulus(0.0, 14.0), &SweepStrategy::default()).unwrap();
    let sig = infer_signature(&src, 12.0, Some(&cat)).unwrap();
    let s = sig.signature.symbols;
    // Two opposite sectors carry α, the other two the same ±γ symbol.
    let alt = (s[0] == s[2]) && (s[1] == s[3]) && (s[0] != s[1]);
    assert!(alt, "{s:?}");
    assert!(s.contains(&SigSymbol::Alpha));
}

#[test]
fn ledger_contour_matches_counts_at_several_radii() {
    let src = hermite_source();
    let cat = sweep(&src, &Region::annulus(0.0, 16.0), &SweepStrategy::default()).unwrap();
    for r in [6.0, 10.0, 14.0] {
        let count = residue_ledger(&cat, r, None, LedgerMode::Count).unwrap();
        let contour = residue_ledger(&cat, r, Some(&src), LedgerMode::Contour).unwrap();
        assert!((count.integral_w - contour.integral_w).norm() < 1e-6);
        assert!((count.integral_big_w - contour.integral_big_w).norm() < 1e-6);
    }
}

#[test]
fn region_outside_the_field_radius_is_rejected() {
    let bad = Region { r_min: 5.0, r_max: 2.0, theta_min: 0.0, theta_max: 1.0 };
    assert!(sweep(&hermite_source(), &bad, &SweepStrategy::default()).is_err());
    assert!(FIELD_RADIUS > 0.0);
}

#[test]
fn first_order_residual_of_the_line() {
    let j = Jet::new(c(1.3, 0.4), c(-2.6, -0.8), c(-2.0, 0.0));
    assert!(first_order_residual(&[j], c(0.0, 0.0)) < 1e-15);
}

#[test]
fn ray_fan_poles_are_sweep_poles() {
    let src = hermite_source();
    let FieldSource::Linear(lin) = &src else { unreachable!() };
    // Rays cross pole-free sectors where errors grow like exp(|z|²); keep them short.
    let region = Region::annulus(0.0, 3.5);
    let cat = sweep(&src, &region, &SweepStrategy::default()).unwrap();
    let start = lin.eval(c(0.3, 0.1));
    let opts = IntegrateOptions { tol: 1e-12, ..IntegrateOptions::default() };
    let fan = ray_fan(&lin.eq, &start, &region, 48, 0.5, &opts).unwrap();
    assert!(fan.poles.len() >= 4, "{} {:?}", fan.poles.len(), &fan.warnings[..fan.warnings.len().min(3)]);
    for p in &fan.poles {
        let d = cat.poles.iter().map(|q| (q.p() - p.p()).norm()).fold(f64::INFINITY, f64::min);
        assert!(d < 1e-7, "pole {} is {d} from the sweep", p.p());
    }
}
